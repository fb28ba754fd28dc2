//! Preference construction, the backward deferred acceptance matcher, and
//! the baseline matchers (nearest-AP and exhaustive optimum).
//!
//! The matcher runs over a fully materialized `GameTable`: every feasible
//! coalition of every AP with its base worth, modified worth and bargained
//! per-member payoffs. Users propose to APs; APs counter-propose whole
//! coalitions drawn from their dynamic proposer lists; engagements break when
//! a better coalition forms. Payoff comparisons use a relative tolerance
//! before tie-breaking (user side: lowest AP index, then users
//! lexicographically; AP side: users lexicographically) so float jitter never
//! produces spurious strict preferences.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bargaining::{nash_allocate, SharingSpec};
use crate::control::ControlSpec;
use crate::error::{Error, Result};
use crate::model::{Coalition, PlayerId, RateMatrix, Scenario};

/// Relative tolerance under which two payoffs count as tied.
pub const PAYOFF_RTOL: f64 = 1e-12;

pub fn payoff_cmp(a: f64, b: f64) -> Ordering {
    let scale = a.abs().max(b.abs());
    if (a - b).abs() <= PAYOFF_RTOL * scale {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Lexicographic order on user index sets, e.g. {w1,w3} before {w2}.
pub fn mask_lex_cmp(a: u64, b: u64) -> Ordering {
    let (mut a, mut b) = (a, b);
    while a != 0 && b != 0 {
        let ia = a.trailing_zeros();
        let ib = b.trailing_zeros();
        match ia.cmp(&ib) {
            Ordering::Equal => {
                a &= a - 1;
                b &= b - 1;
            }
            other => return other,
        }
    }
    // a prefix precedes its extensions
    (a != 0).cmp(&(b != 0))
}

/// One feasible coalition with everything the matcher needs.
#[derive(Debug, Clone)]
pub struct GameEntry {
    pub coalition: Coalition,
    /// 0-based AP position.
    pub ap: usize,
    /// User bitmask (bit w = user position w).
    pub mask: u64,
    /// Unmodified worth v(C).
    pub v_base: f64,
    /// Controlled worth.
    pub v_mod: f64,
    /// AP's bargained share of the controlled worth.
    pub ap_payoff: f64,
    /// (user position, bargained share), ascending positions.
    pub user_payoffs: Vec<(usize, f64)>,
    /// Common fear of ruin of the controlled worth.
    pub chi: f64,
}

impl GameEntry {
    pub fn payoff_of_user(&self, w: usize) -> Option<f64> {
        self.user_payoffs.iter().find(|(u, _)| *u == w).map(|(_, p)| *p)
    }

    pub fn users(&self) -> Vec<usize> {
        self.user_payoffs.iter().map(|(u, _)| *u).collect()
    }
}

/// The materialized game: all feasible coalitions, indexed by AP.
#[derive(Debug, Clone)]
pub struct GameTable {
    pub n_users: usize,
    pub n_aps: usize,
    pub quotas: Vec<u32>,
    pub entries: Vec<GameEntry>,
    pub by_ap: Vec<Vec<usize>>,
    index: HashMap<(usize, u64), usize>,
}

impl GameTable {
    /// Enumerates every AP's coalitions over its acceptable users (sizes 1 to
    /// quota, by size then lexicographic), evaluates the base worth, applies
    /// the control and bargains the modified worth.
    pub fn build(
        n_users: usize,
        n_aps: usize,
        quotas: &[u32],
        acceptable: impl Fn(usize, usize) -> bool,
        worth: impl Fn(usize, &[usize]) -> Result<f64>,
        control: &ControlSpec,
        sharing: &SharingSpec,
    ) -> Result<GameTable> {
        if n_users > 64 {
            return Err(Error::SizeGuard { what: "users (bitmask)", got: n_users, limit: 64 });
        }
        let mut table = GameTable {
            n_users,
            n_aps,
            quotas: quotas.to_vec(),
            entries: Vec::new(),
            by_ap: vec![Vec::new(); n_aps],
            index: HashMap::new(),
        };
        for f in 0..n_aps {
            let acc: Vec<usize> = (0..n_users).filter(|&w| acceptable(w, f)).collect();
            let cap = (quotas[f] as usize).min(acc.len());
            let mut chosen = Vec::new();
            for size in 1..=cap {
                enumerate_subsets(&acc, size, 0, &mut chosen, &mut |users: &[usize]| {
                    table.push_entry(f, users, &worth, control, sharing)
                })?;
            }
        }
        Ok(table)
    }

    fn push_entry(
        &mut self,
        f: usize,
        users: &[usize],
        worth: &impl Fn(usize, &[usize]) -> Result<f64>,
        control: &ControlSpec,
        sharing: &SharingSpec,
    ) -> Result<()> {
        let coalition = Coalition::cell(f as u32 + 1, users.iter().map(|&w| w as u32 + 1));
        let v_base = worth(f, users)?;
        let v_mod = control.factor(&coalition) * v_base;
        let members = coalition.members();
        let outcome = nash_allocate(v_mod, &members, sharing)?;
        let ap_id = PlayerId::ap(f as u32 + 1);
        let user_payoffs: Vec<(usize, f64)> = users
            .iter()
            .map(|&w| (w, outcome.shares[&PlayerId::user(w as u32 + 1)]))
            .collect();
        let mask = users.iter().fold(0u64, |m, &w| m | 1 << w);
        let idx = self.entries.len();
        self.entries.push(GameEntry {
            coalition,
            ap: f,
            mask,
            v_base,
            v_mod,
            ap_payoff: outcome.shares[&ap_id],
            user_payoffs,
            chi: outcome.chi,
        });
        self.by_ap[f].push(idx);
        self.index.insert((f, mask), idx);
        Ok(())
    }

    /// Table from explicit per-member coalition values (abstract fixtures):
    /// each member of a listed coalition receives `value`; unlisted
    /// coalitions are worthless.
    pub fn from_member_values(
        n_users: usize,
        n_aps: usize,
        quotas: &[u32],
        acceptable: impl Fn(usize, usize) -> bool,
        values: &HashMap<(usize, u64), f64>,
    ) -> Result<GameTable> {
        let control = ControlSpec::none(n_aps);
        let sharing = SharingSpec::Identity;
        GameTable::build(
            n_users,
            n_aps,
            quotas,
            acceptable,
            |f, users| {
                let mask = users.iter().fold(0u64, |m, &w| m | 1 << w);
                let value = values.get(&(f, mask)).copied().unwrap_or(0.0);
                // worth |C| * value makes the equal split hand back `value`
                Ok(value * (users.len() + 1) as f64)
            },
            &control,
            &sharing,
        )
    }

    pub fn entry(&self, ap: usize, mask: u64) -> Option<&GameEntry> {
        self.index.get(&(ap, mask)).map(|&i| &self.entries[i])
    }

    pub fn entry_idx(&self, ap: usize, mask: u64) -> Option<usize> {
        self.index.get(&(ap, mask)).copied()
    }
}

fn enumerate_subsets(
    items: &[usize],
    size: usize,
    start: usize,
    stack: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if stack.len() == size {
        let users: Vec<usize> = stack.iter().map(|&i| items[i]).collect();
        return emit(&users);
    }
    let remaining = size - stack.len();
    for i in start..=items.len().saturating_sub(remaining) {
        stack.push(i);
        enumerate_subsets(items, size, i + 1, stack, emit)?;
        stack.pop();
    }
    Ok(())
}

/// Strict preference lists: AP lists over coalitions, the per-user best
/// achievable payoff per AP, and the reduced user lists over APs.
#[derive(Debug, Clone)]
pub struct PreferenceProfile {
    /// Per AP: entry indices, most preferred first. Only coalitions paying
    /// the AP a strictly positive share are listed.
    pub ap_prefs: Vec<Vec<usize>>,
    /// best_achievable[w][f]: the best payoff w can reach in any listed
    /// coalition of f.
    pub best_achievable: Vec<Vec<Option<f64>>>,
    /// Per user: AP positions, most preferred first.
    pub user_prefs: Vec<Vec<usize>>,
}

/// AP-side order: own payoff descending, ties lexicographic on user indices.
fn ap_entry_cmp(table: &GameTable, a: usize, b: usize) -> Ordering {
    let (ea, eb) = (&table.entries[a], &table.entries[b]);
    payoff_cmp(eb.ap_payoff, ea.ap_payoff).then_with(|| mask_lex_cmp(ea.mask, eb.mask))
}

pub fn build_preferences(table: &GameTable) -> PreferenceProfile {
    let mut ap_prefs: Vec<Vec<usize>> = Vec::with_capacity(table.n_aps);
    for f in 0..table.n_aps {
        let mut list: Vec<usize> = table.by_ap[f]
            .iter()
            .copied()
            .filter(|&i| table.entries[i].ap_payoff > 0.0)
            .collect();
        list.sort_by(|&a, &b| ap_entry_cmp(table, a, b));
        ap_prefs.push(list);
    }
    let mut best_achievable = vec![vec![None; table.n_aps]; table.n_users];
    for (f, list) in ap_prefs.iter().enumerate() {
        for &i in list {
            for &(w, p) in &table.entries[i].user_payoffs {
                let slot = &mut best_achievable[w][f];
                if slot.map_or(true, |cur| p > cur) {
                    *slot = Some(p);
                }
            }
        }
    }
    let mut user_prefs = Vec::with_capacity(table.n_users);
    for w in 0..table.n_users {
        let mut aps: Vec<usize> = (0..table.n_aps)
            .filter(|&f| best_achievable[w][f].map_or(false, |p| p > 0.0))
            .collect();
        aps.sort_by(|&a, &b| {
            payoff_cmp(best_achievable[w][b].unwrap(), best_achievable[w][a].unwrap())
                .then(a.cmp(&b))
        });
        user_prefs.push(aps);
    }
    PreferenceProfile { ap_prefs, best_achievable, user_prefs }
}

/// Coalitions containing `player`, most preferred first (payoff descending,
/// then lowest AP index, then users lexicographically). Zero-payoff
/// coalitions are unacceptable and omitted.
pub fn group_preference_list(table: &GameTable, player: PlayerId) -> Vec<usize> {
    let mut list: Vec<usize> = Vec::new();
    for (i, e) in table.entries.iter().enumerate() {
        let payoff = match player.kind {
            crate::model::PlayerKind::Ap => (e.ap == player.pos()).then_some(e.ap_payoff),
            crate::model::PlayerKind::User => e.payoff_of_user(player.pos()),
        };
        if payoff.map_or(false, |p| p > 0.0) {
            list.push(i);
        }
    }
    let payoff_in = |i: usize| -> f64 {
        let e = &table.entries[i];
        match player.kind {
            crate::model::PlayerKind::Ap => e.ap_payoff,
            crate::model::PlayerKind::User => e.payoff_of_user(player.pos()).unwrap(),
        }
    };
    list.sort_by(|&a, &b| {
        let (ea, eb) = (&table.entries[a], &table.entries[b]);
        payoff_cmp(payoff_in(b), payoff_in(a))
            .then(ea.ap.cmp(&eb.ap))
            .then_with(|| mask_lex_cmp(ea.mask, eb.mask))
    });
    list
}

/// A user-AP association. Users map to at most one AP (self otherwise); APs
/// map to user sets within quota; membership is mutual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// Per user position: the AP position, or None when self-matched.
    pub mu_user: Vec<Option<usize>>,
    /// Per AP position: sorted user positions.
    pub mu_ap: Vec<Vec<usize>>,
}

impl Matching {
    pub fn empty(n_users: usize, n_aps: usize) -> Self {
        Matching { mu_user: vec![None; n_users], mu_ap: vec![Vec::new(); n_aps] }
    }

    pub fn assign(&mut self, w: usize, f: usize) {
        self.mu_user[w] = Some(f);
        self.mu_ap[f].push(w);
        self.mu_ap[f].sort_unstable();
    }

    pub fn unmatched(&self) -> Vec<usize> {
        (0..self.mu_user.len()).filter(|&w| self.mu_user[w].is_none()).collect()
    }

    pub fn user_mask(&self, f: usize) -> u64 {
        self.mu_ap[f].iter().fold(0u64, |m, &w| m | 1 << w)
    }

    /// The three matching conditions: one AP per user (self otherwise),
    /// quota respected, mutual membership.
    pub fn is_valid(&self, quotas: &[u32]) -> bool {
        for (f, users) in self.mu_ap.iter().enumerate() {
            if users.len() > quotas[f] as usize {
                return false;
            }
            for &w in users {
                if self.mu_user[w] != Some(f) {
                    return false;
                }
            }
        }
        for (w, ap) in self.mu_user.iter().enumerate() {
            if let Some(f) = ap {
                if !self.mu_ap[*f].contains(&w) {
                    return false;
                }
            }
        }
        true
    }
}

/// One step of the matcher, for trace inspection and golden tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Round { n: usize },
    Propose { user: String, ap: String },
    Reopen { ap: String, dissolved: Vec<String> },
    Counter { ap: String, users: Vec<String>, payoffs: Vec<f64> },
    Accept { user: String, ap: String },
    Reject { user: String, ap: String },
    Engage { ap: String, users: Vec<String> },
    Dissolve { ap: String, users: Vec<String> },
    Prune { ap: String, removed: Vec<String> },
}

fn user_name(w: usize) -> String {
    PlayerId::user(w as u32 + 1).to_string()
}

fn ap_name(f: usize) -> String {
    PlayerId::ap(f as u32 + 1).to_string()
}

#[derive(Debug, Clone)]
pub struct BdaaOutcome {
    pub matching: Matching,
    pub trace: Vec<TraceEvent>,
    /// User proposals plus AP counter-proposals.
    pub proposals: u64,
    pub rounds: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BdaaOptions {
    /// AP processing order for the counter-proposal phase; index order when
    /// absent. The stable outcome does not depend on it.
    pub ap_order: Option<Vec<usize>>,
}

pub fn bdaa(table: &GameTable, prefs: &PreferenceProfile) -> Result<BdaaOutcome> {
    bdaa_with_options(table, prefs, &BdaaOptions::default())
}

pub fn bdaa_with_options(
    table: &GameTable,
    prefs: &PreferenceProfile,
    options: &BdaaOptions,
) -> Result<BdaaOutcome> {
    validate_strict(table, prefs)?;
    let (n_users, n_aps) = (table.n_users, table.n_aps);
    let ap_order: Vec<usize> = match &options.ap_order {
        Some(o) => o.clone(),
        None => (0..n_aps).collect(),
    };
    // F^3 W^2, or the additive proposal accounting FW(F+1) on degenerate
    // instances where the product form undershoots it
    let (f, w) = (n_aps as u64, n_users as u64);
    let bound = (f.pow(3) * w.pow(2)).max(f * w * (f + 1));

    let mut engaged_ap: Vec<Option<usize>> = vec![None; n_aps]; // entry idx
    let mut engaged_user: Vec<Option<usize>> = vec![None; n_users];
    let mut cum_list: Vec<u64> = vec![0; n_aps]; // L(f)
    let mut dyn_list: Vec<u64> = vec![0; n_aps]; // L*(f)
    let mut proposed: Vec<u64> = vec![0; n_users]; // AP bitmask per user
    let mut trace: Vec<TraceEvent> = Vec::new();
    let mut proposals: u64 = 0;
    let mut rounds = 0usize;

    let dissolve = |entry: usize,
                    engaged_ap: &mut Vec<Option<usize>>,
                    engaged_user: &mut Vec<Option<usize>>| {
        let e = &table.entries[entry];
        engaged_ap[e.ap] = None;
        for (w, _) in &e.user_payoffs {
            engaged_user[*w] = None;
        }
    };

    loop {
        // Step 2.a: every unengaged user proposes to its best un-proposed AP
        let mut round_proposals: Vec<(usize, usize)> = Vec::new();
        for w in 0..n_users {
            if engaged_user[w].is_some() {
                continue;
            }
            if let Some(&f) = prefs.user_prefs[w].iter().find(|&&f| proposed[w] & (1 << f) == 0) {
                round_proposals.push((w, f));
            }
        }
        if round_proposals.is_empty() {
            break;
        }
        rounds += 1;
        trace.push(TraceEvent::Round { n: rounds });
        for &(w, f) in &round_proposals {
            proposed[w] |= 1 << f;
            proposals += 1;
            trace.push(TraceEvent::Propose { user: user_name(w), ap: ap_name(f) });
            // a proposal reopens an engaged AP
            if let Some(entry) = engaged_ap[f] {
                let users: Vec<String> =
                    table.entries[entry].users().iter().map(|&u| user_name(u)).collect();
                dissolve(entry, &mut engaged_ap, &mut engaged_user);
                trace.push(TraceEvent::Reopen { ap: ap_name(f), dissolved: users });
            }
        }
        // Step 2.b: cumulate proposers and reset every dynamic list
        for &(w, f) in &round_proposals {
            cum_list[f] |= 1 << w;
        }
        for f in 0..n_aps {
            dyn_list[f] = cum_list[f];
        }

        // Steps 2.c-2.g: counter-proposal rounds
        loop {
            let mut counters: Vec<(usize, usize)> = Vec::new(); // (ap, entry)
            for &f in &ap_order {
                if engaged_ap[f].is_some() {
                    continue;
                }
                if let Some(&entry) = prefs.ap_prefs[f]
                    .iter()
                    .find(|&&i| table.entries[i].mask & !dyn_list[f] == 0)
                {
                    counters.push((f, entry));
                }
            }
            if counters.is_empty() {
                break;
            }
            let mut incoming: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_users];
            for &(f, entry) in &counters {
                proposals += 1;
                let e = &table.entries[entry];
                trace.push(TraceEvent::Counter {
                    ap: ap_name(f),
                    users: e.users().iter().map(|&u| user_name(u)).collect(),
                    payoffs: e.user_payoffs.iter().map(|&(_, p)| p).collect(),
                });
                for (w, _) in &e.user_payoffs {
                    incoming[*w].push((f, entry));
                }
            }

            // Step 2.d: accept or reject
            let mut accepted: Vec<Option<(usize, usize)>> = vec![None; n_users];
            for w in 0..n_users {
                if incoming[w].is_empty() {
                    continue;
                }
                // candidates: incoming counters plus the current engagement
                let mut cands: Vec<(usize, usize, bool)> = incoming[w]
                    .iter()
                    .map(|&(f, e)| (f, e, false))
                    .collect();
                if let Some(entry) = engaged_user[w] {
                    cands.push((table.entries[entry].ap, entry, true));
                }
                let payoff_at = |entry: usize| table.entries[entry].payoff_of_user(w).unwrap();
                cands.sort_by(|a, b| {
                    payoff_cmp(payoff_at(b.1), payoff_at(a.1))
                        .then(a.0.cmp(&b.0))
                        .then_with(|| mask_lex_cmp(table.entries[a.1].mask, table.entries[b.1].mask))
                });
                let (best_ap, best_entry, best_is_current) = cands[0];
                // best payoff still achievable with an AP not yet proposed to
                let outside = (0..n_aps)
                    .filter(|&f| proposed[w] & (1 << f) == 0)
                    .filter_map(|f| prefs.best_achievable[w][f])
                    .fold(f64::NEG_INFINITY, f64::max);
                let hold_out = outside.is_finite()
                    && payoff_cmp(outside, payoff_at(best_entry)) == Ordering::Greater;
                for &(f, entry) in &incoming[w] {
                    let accept = !hold_out && !best_is_current && f == best_ap && entry == best_entry;
                    if accept {
                        accepted[w] = Some((f, entry));
                        trace.push(TraceEvent::Accept { user: user_name(w), ap: ap_name(f) });
                    } else {
                        trace.push(TraceEvent::Reject { user: user_name(w), ap: ap_name(f) });
                    }
                }
            }

            // Step 2.e: unanimous acceptance forms the coalition
            let mut formed_any = false;
            for &(f, entry) in &counters {
                let e = &table.entries[entry];
                let unanimous = e
                    .user_payoffs
                    .iter()
                    .all(|&(w, _)| accepted[w] == Some((f, entry)));
                if !unanimous {
                    continue;
                }
                formed_any = true;
                for &(w, _) in &e.user_payoffs {
                    if let Some(old) = engaged_user[w] {
                        let old_e = &table.entries[old];
                        trace.push(TraceEvent::Dissolve {
                            ap: ap_name(old_e.ap),
                            users: old_e.users().iter().map(|&u| user_name(u)).collect(),
                        });
                        dissolve(old, &mut engaged_ap, &mut engaged_user);
                    }
                }
                engaged_ap[f] = Some(entry);
                for &(w, _) in &e.user_payoffs {
                    engaged_user[w] = Some(entry);
                }
                trace.push(TraceEvent::Engage {
                    ap: ap_name(f),
                    users: e.users().iter().map(|&u| user_name(u)).collect(),
                });
            }

            // Step 2.f: unengaged APs drop engaged rejecters
            let mut shrunk = false;
            for &(f, entry) in &counters {
                if engaged_ap[f].is_some() {
                    continue;
                }
                let e = &table.entries[entry];
                let mut removed: Vec<usize> = Vec::new();
                for &(w, _) in &e.user_payoffs {
                    let rejected = accepted[w] != Some((f, entry));
                    let engaged_elsewhere = engaged_user[w]
                        .map_or(false, |en| table.entries[en].ap != f);
                    if rejected && engaged_elsewhere && dyn_list[f] & (1 << w) != 0 {
                        dyn_list[f] &= !(1 << w);
                        removed.push(w);
                    }
                }
                if !removed.is_empty() {
                    shrunk = true;
                    trace.push(TraceEvent::Prune {
                        ap: ap_name(f),
                        removed: removed.iter().map(|&u| user_name(u)).collect(),
                    });
                }
            }

            if proposals > bound {
                return Err(Error::ProposalBound { count: proposals, bound });
            }
            // Step 2.g: iterate while lists shrank or the engagement state moved
            if !(shrunk || formed_any) {
                break;
            }
        }
        if proposals > bound {
            return Err(Error::ProposalBound { count: proposals, bound });
        }
    }

    let mut matching = Matching::empty(n_users, n_aps);
    for f in 0..n_aps {
        if let Some(entry) = engaged_ap[f] {
            for &(w, _) in &table.entries[entry].user_payoffs {
                matching.assign(w, f);
            }
        }
    }
    Ok(BdaaOutcome { matching, trace, proposals, rounds })
}

/// Rejects profiles with duplicated list entries, the only representable tie.
fn validate_strict(table: &GameTable, prefs: &PreferenceProfile) -> Result<()> {
    for (f, list) in prefs.ap_prefs.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for &i in list {
            if table.entries[i].ap != f || !seen.insert(i) {
                return Err(Error::TiesInPreferences(format!("duplicate coalition in P#({})", ap_name(f))));
            }
        }
    }
    for (w, list) in prefs.user_prefs.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for &f in list {
            if !seen.insert(f) {
                return Err(Error::TiesInPreferences(format!("duplicate AP in P'({})", user_name(w))));
            }
        }
    }
    Ok(())
}

/// Nearest-covering-AP baseline (signal strength proxied by distance), ties
/// to the lowest AP index; quotas are ignored.
pub fn best_rssi(scenario: &Scenario, rates: &RateMatrix) -> Matching {
    let mut m = Matching::empty(scenario.n_users(), scenario.n_aps());
    for w in 0..scenario.n_users() {
        let mut best: Option<(f64, usize)> = None;
        for f in 0..scenario.n_aps() {
            if rates.rate(w, f) <= 0.0 {
                continue;
            }
            let d = scenario.distance(w, f);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, f));
            }
        }
        if let Some((_, f)) = best {
            m.assign(w, f);
        }
    }
    m
}

/// Exact welfare maximizer over feasible coalition structures, by dynamic
/// programming over APs and user subsets. Guarded to 12 users.
pub fn exhaustive_optimum(table: &GameTable, use_modified: bool) -> Result<(Matching, f64)> {
    if table.n_users > 12 {
        return Err(Error::SizeGuard { what: "users", got: table.n_users, limit: 12 });
    }
    let n_masks = 1usize << table.n_users;
    let worth_of = |i: usize| {
        let e = &table.entries[i];
        if use_modified {
            e.v_mod
        } else {
            e.v_base
        }
    };
    let mut dp: Vec<f64> = vec![f64::NEG_INFINITY; n_masks];
    dp[0] = 0.0;
    // choice[f][mask] = entry chosen by AP f leading to state `mask`
    let mut choice: Vec<Vec<Option<Option<usize>>>> = vec![vec![None; n_masks]; table.n_aps];
    for f in 0..table.n_aps {
        let mut next: Vec<f64> = vec![f64::NEG_INFINITY; n_masks];
        for mask in 0..n_masks {
            if dp[mask].is_finite() && dp[mask] > next[mask] {
                next[mask] = dp[mask];
                choice[f][mask] = Some(None); // AP unused
            }
        }
        for &i in &table.by_ap[f] {
            let e = &table.entries[i];
            let w = worth_of(i);
            for mask in 0..n_masks {
                if !dp[mask].is_finite() || e.mask & mask as u64 != 0 {
                    continue;
                }
                let to = mask | e.mask as usize;
                let cand = dp[mask] + w;
                if cand > next[to] {
                    next[to] = cand;
                    choice[f][to] = Some(Some(i));
                }
            }
        }
        dp = next;
    }
    let (mut best_mask, mut best) = (0usize, f64::NEG_INFINITY);
    for mask in 0..n_masks {
        if dp[mask] > best {
            best = dp[mask];
            best_mask = mask;
        }
    }
    let mut matching = Matching::empty(table.n_users, table.n_aps);
    let mut mask = best_mask;
    for f in (0..table.n_aps).rev() {
        match choice[f][mask] {
            Some(Some(entry)) => {
                for &(w, _) in &table.entries[entry].user_payoffs {
                    matching.assign(w, f);
                }
                mask &= !(table.entries[entry].mask as usize);
            }
            Some(None) => {}
            None => {
                return Err(Error::NonConvergence("optimum reconstruction lost".into()));
            }
        }
    }
    Ok((matching, best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abstract_table(
        n_users: usize,
        n_aps: usize,
        quotas: &[u32],
        accept: &[(usize, usize)],
        values: &[(usize, &[usize], f64)],
    ) -> GameTable {
        let accept_set: std::collections::HashSet<(usize, usize)> =
            accept.iter().copied().collect();
        let mut map = HashMap::new();
        for &(f, users, v) in values {
            let mask = users.iter().fold(0u64, |m, &w| m | 1 << w);
            map.insert((f, mask), v);
        }
        GameTable::from_member_values(
            n_users,
            n_aps,
            quotas,
            |w, f| accept_set.contains(&(w, f)),
            &map,
        )
        .unwrap()
    }

    /// 2 users, 3 APs; the pair with f1 pays 10 each, singles pay 0.5/1/100.
    fn two_user_three_ap() -> GameTable {
        abstract_table(
            2,
            3,
            &[2, 1, 1],
            &[(0, 0), (0, 1), (1, 0), (1, 2)],
            &[
                (0, &[0, 1], 10.0),
                (0, &[0], 0.5),
                (0, &[1], 0.5),
                (1, &[0], 1.0),
                (2, &[1], 100.0),
            ],
        )
    }

    #[test]
    fn preferences_best_achievable() {
        let table = two_user_three_ap();
        let prefs = build_preferences(&table);
        assert_eq!(prefs.best_achievable[0][0], Some(10.0));
        assert_eq!(prefs.best_achievable[0][1], Some(1.0));
        assert_eq!(prefs.best_achievable[1][0], Some(10.0));
        assert_eq!(prefs.best_achievable[1][2], Some(100.0));
        assert_eq!(prefs.user_prefs[0], vec![0, 1]);
        assert_eq!(prefs.user_prefs[1], vec![2, 0]);
    }

    #[test]
    fn bdaa_two_user_three_ap_outcome() {
        let table = two_user_three_ap();
        let prefs = build_preferences(&table);
        let out = bdaa(&table, &prefs).unwrap();
        assert_eq!(out.matching.mu_user, vec![Some(1), Some(2)]);
        assert!(out.matching.is_valid(&table.quotas));
        assert!(out.proposals <= 27 * 4);
    }

    #[test]
    fn bdaa_single_pair() {
        let table = abstract_table(1, 1, &[1], &[(0, 0)], &[(0, &[0], 5.0)]);
        let prefs = build_preferences(&table);
        let out = bdaa(&table, &prefs).unwrap();
        assert_eq!(out.matching.mu_user, vec![Some(0)]);
    }

    #[test]
    fn bdaa_empty_game() {
        let table = abstract_table(0, 1, &[2], &[], &[]);
        let prefs = build_preferences(&table);
        let out = bdaa(&table, &prefs).unwrap();
        assert_eq!(out.matching.unmatched().len(), 0);
        assert_eq!(out.proposals, 0);
    }

    #[test]
    fn ap_order_does_not_change_outcome() {
        let table = two_user_three_ap();
        let prefs = build_preferences(&table);
        let base = bdaa(&table, &prefs).unwrap();
        for order in [vec![2, 1, 0], vec![1, 2, 0], vec![2, 0, 1]] {
            let alt = bdaa_with_options(&table, &prefs, &BdaaOptions { ap_order: Some(order) })
                .unwrap();
            assert_eq!(alt.matching, base.matching);
        }
    }

    #[test]
    fn mask_lex_ordering() {
        let m = |users: &[u64]| users.iter().fold(0u64, |m, &w| m | 1 << w);
        assert_eq!(mask_lex_cmp(m(&[0, 2]), m(&[1])), Ordering::Less);
        assert_eq!(mask_lex_cmp(m(&[0]), m(&[0, 1])), Ordering::Less);
        assert_eq!(mask_lex_cmp(m(&[1, 3]), m(&[1, 3])), Ordering::Equal);
    }

    #[test]
    fn rssi_ties_break_to_lowest_index() {
        use crate::model::{ApNode, UserNode};
        let scenario = Scenario {
            users: vec![UserNode { id: 1, x: 0.0, y: 0.0 }],
            aps: vec![
                ApNode { id: 1, x: 10.0, y: 0.0, quota: None },
                ApNode { id: 2, x: -10.0, y: 0.0, quota: None },
            ],
            rings: None,
            rates: None,
            coalition_values: None,
            mac: None,
        };
        let rates = crate::model::rates_from_geometry(&scenario).unwrap();
        let m = best_rssi(&scenario, &rates);
        assert_eq!(m.mu_user[0], Some(0));
    }

    #[test]
    fn rssi_uncovered_stays_alone() {
        use crate::model::{ApNode, UserNode};
        let scenario = Scenario {
            users: vec![UserNode { id: 1, x: 1000.0, y: 0.0 }],
            aps: vec![ApNode { id: 1, x: 0.0, y: 0.0, quota: None }],
            rings: None,
            rates: None,
            coalition_values: None,
            mac: None,
        };
        let rates = crate::model::rates_from_geometry(&scenario).unwrap();
        let m = best_rssi(&scenario, &rates);
        assert_eq!(m.mu_user[0], None);
    }

    #[test]
    fn optimum_enumerates_partitions() {
        // 1 AP, 2 users: grand coalition iff it beats every split
        let grand = abstract_table(
            2,
            1,
            &[2],
            &[(0, 0), (1, 0)],
            &[(0, &[0, 1], 10.0), (0, &[0], 4.0), (0, &[1], 3.0)],
        );
        let (m, w) = exhaustive_optimum(&grand, true).unwrap();
        assert_eq!(m.mu_ap[0], vec![0, 1]);
        assert!((w - 30.0).abs() < 1e-9); // member value 10 x |C|=3

        let split = abstract_table(
            2,
            1,
            &[2],
            &[(0, 0), (1, 0)],
            &[(0, &[0, 1], 1.0), (0, &[0], 4.0), (0, &[1], 3.0)],
        );
        let (m, w) = exhaustive_optimum(&split, true).unwrap();
        assert_eq!(m.mu_ap[0].len(), 1); // only one single cell can form
        assert!((w - 8.0).abs() < 1e-9);
    }

    #[test]
    fn optimum_empty_and_guard() {
        let empty = abstract_table(0, 1, &[2], &[], &[]);
        let (m, w) = exhaustive_optimum(&empty, true).unwrap();
        assert_eq!(w, 0.0);
        assert!(m.unmatched().is_empty());

        let table = GameTable::from_member_values(13, 1, &[2], |_, _| false, &HashMap::new());
        assert!(matches!(
            exhaustive_optimum(&table.unwrap(), true),
            Err(Error::SizeGuard { .. })
        ));
    }
}
