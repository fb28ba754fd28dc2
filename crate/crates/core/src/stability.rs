//! Brute-force stability oracles: pairwise stability, (weak-)core membership
//! by exhaustive domination scan, pairwise alignment, responsiveness,
//! substitutability, and regularity of the coalition family.
//!
//! These run only at desk scale (a handful of users and APs) and exist to
//! certify the matcher's output, so they favor directness over speed:
//! matchings are enumerated streaming, witnesses are always reported.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{mask_lex_cmp, payoff_cmp, GameTable, Matching};
use crate::model::{PlayerId, PlayerKind};

/// What a player holds under a matching: a coalition entry or nothing.
pub type Outcome = Option<usize>;

/// Strict preference order over outcomes for one player: payoff first (with
/// tolerance), then being alone beats a worthless coalition, then lowest AP
/// index (users), then users lexicographically.
pub fn preference_cmp(table: &GameTable, player: PlayerId, a: Outcome, b: Outcome) -> Ordering {
    let payoff = |o: Outcome| -> f64 {
        match o {
            None => 0.0,
            Some(i) => match player.kind {
                PlayerKind::Ap => table.entries[i].ap_payoff,
                PlayerKind::User => table.entries[i].payoff_of_user(player.pos()).unwrap_or(0.0),
            },
        }
    };
    payoff_cmp(payoff(a), payoff(b)).then_with(|| match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => {
            let (ex, ey) = (&table.entries[x], &table.entries[y]);
            // prefer the lower AP index, then the lexicographically first set
            ey.ap.cmp(&ex.ap).then_with(|| mask_lex_cmp(ey.mask, ex.mask))
        }
    })
}

fn outcome_of(table: &GameTable, matching: &Matching, player: PlayerId) -> Outcome {
    match player.kind {
        PlayerKind::User => matching.mu_user[player.pos()]
            .and_then(|f| table.entry_idx(f, matching.user_mask(f))),
        PlayerKind::Ap => {
            let f = player.pos();
            if matching.mu_ap[f].is_empty() {
                None
            } else {
                table.entry_idx(f, matching.user_mask(f))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingWitness {
    pub ap: Option<PlayerId>,
    pub users: Vec<PlayerId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub is_pairwise_stable: bool,
    pub core_member: Option<bool>,
    pub weak_core_member: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocking_witness: Option<BlockingWitness>,
}

fn witness_from_entry(table: &GameTable, entry: usize) -> BlockingWitness {
    let e = &table.entries[entry];
    BlockingWitness {
        ap: e.coalition.ap,
        users: e.coalition.users.iter().copied().collect(),
    }
}

/// No player prefers being alone, and no user-AP pair can rearrange f's cell
/// (choice from current users plus the newcomer) so that both strictly gain.
pub fn check_pairwise(
    table: &GameTable,
    matching: &Matching,
) -> (bool, Option<BlockingWitness>) {
    // blocked by a single player
    for w in 0..table.n_users {
        let id = PlayerId::user(w as u32 + 1);
        let cur = outcome_of(table, matching, id);
        if preference_cmp(table, id, None, cur) == Ordering::Greater {
            return (false, Some(BlockingWitness { ap: None, users: vec![id] }));
        }
    }
    for f in 0..table.n_aps {
        let id = PlayerId::ap(f as u32 + 1);
        let cur = outcome_of(table, matching, id);
        if preference_cmp(table, id, None, cur) == Ordering::Greater {
            return (false, Some(BlockingWitness { ap: Some(id), users: vec![] }));
        }
    }
    // blocked by a pair
    for f in 0..table.n_aps {
        let ap_id = PlayerId::ap(f as u32 + 1);
        let cur_f = outcome_of(table, matching, ap_id);
        let cur_mask = matching.user_mask(f);
        for w in 0..table.n_users {
            if cur_mask & (1 << w) != 0 {
                continue;
            }
            let user_id = PlayerId::user(w as u32 + 1);
            let pool = cur_mask | (1 << w);
            // f's choice set from its current users plus w
            let mut best: Option<usize> = None;
            for &i in &table.by_ap[f] {
                let e = &table.entries[i];
                if e.mask & !pool != 0 || e.ap_payoff <= 0.0 {
                    continue;
                }
                if best.map_or(true, |b| {
                    preference_cmp(table, ap_id, Some(i), Some(b)) == Ordering::Greater
                }) {
                    best = Some(i);
                }
            }
            if let Some(i) = best {
                if table.entries[i].mask & (1 << w) == 0 {
                    continue; // w not in f's choice
                }
                let cur_w = outcome_of(table, matching, user_id);
                let f_gains = preference_cmp(table, ap_id, Some(i), cur_f) == Ordering::Greater;
                let w_gains = preference_cmp(table, user_id, Some(i), cur_w) == Ordering::Greater;
                if f_gains && w_gains {
                    return (false, Some(witness_from_entry(table, i)));
                }
            }
        }
    }
    (true, None)
}

/// Streams every matching of the table's family (acceptability and quotas
/// respected, all-unmatched included).
pub fn enumerate_matchings(table: &GameTable, visit: &mut impl FnMut(&Matching)) {
    let acceptable: Vec<Vec<usize>> = (0..table.n_users)
        .map(|w| {
            (0..table.n_aps)
                .filter(|&f| table.entry_idx(f, 1 << w).is_some())
                .collect()
        })
        .collect();
    let mut m = Matching::empty(table.n_users, table.n_aps);
    let mut load = vec![0u32; table.n_aps];
    fn rec(
        w: usize,
        table: &GameTable,
        acceptable: &[Vec<usize>],
        m: &mut Matching,
        load: &mut Vec<u32>,
        visit: &mut impl FnMut(&Matching),
    ) {
        if w == table.n_users {
            visit(m);
            return;
        }
        m.mu_user[w] = None;
        rec(w + 1, table, acceptable, m, load, visit);
        for &f in &acceptable[w] {
            if load[f] < table.quotas[f] {
                m.mu_user[w] = Some(f);
                m.mu_ap[f].push(w);
                load[f] += 1;
                rec(w + 1, table, acceptable, m, load, visit);
                load[f] -= 1;
                m.mu_ap[f].pop();
                m.mu_user[w] = None;
            }
        }
    }
    rec(0, table, &acceptable, &mut m, &mut load, visit);
}

/// Is `matching` blocked (dominated via some family coalition)? `weak` asks
/// for weak domination: every member weakly better, at least one strictly.
/// A lone user strictly preferring its own company blocks either way.
pub fn find_blocking(
    table: &GameTable,
    matching: &Matching,
    weak: bool,
) -> Option<BlockingWitness> {
    for w in 0..table.n_users {
        let id = PlayerId::user(w as u32 + 1);
        let cur = outcome_of(table, matching, id);
        if preference_cmp(table, id, None, cur) == Ordering::Greater {
            return Some(BlockingWitness { ap: None, users: vec![id] });
        }
    }
    for (i, e) in table.entries.iter().enumerate() {
        let ap_id = PlayerId::ap(e.ap as u32 + 1);
        let mut all_weak = true;
        let mut any_strict = false;
        let mut members: Vec<PlayerId> = vec![ap_id];
        members.extend(e.coalition.users.iter().copied());
        for &p in &members {
            let cur = outcome_of(table, matching, p);
            match preference_cmp(table, p, Some(i), cur) {
                Ordering::Greater => any_strict = true,
                Ordering::Equal => {
                    if !weak {
                        all_weak = false;
                        break;
                    }
                }
                Ordering::Less => {
                    all_weak = false;
                    break;
                }
            }
        }
        if all_weak && any_strict {
            return Some(witness_from_entry(table, i));
        }
    }
    None
}

/// Core membership by exhaustive domination. Guarded to 6 users / 3 APs.
pub fn check_core(
    table: &GameTable,
    matching: &Matching,
    weak: bool,
) -> Result<(bool, Option<BlockingWitness>)> {
    guard_enumerable(table)?;
    match find_blocking(table, matching, weak) {
        Some(w) => Ok((false, Some(w))),
        None => Ok((true, None)),
    }
}

/// All matchings of the family that no coalition (weakly) dominates.
pub fn find_core(table: &GameTable, weak: bool) -> Result<Vec<Matching>> {
    guard_enumerable(table)?;
    let mut core = Vec::new();
    enumerate_matchings(table, &mut |m| {
        if find_blocking(table, m, weak).is_none() {
            core.push(m.clone());
        }
    });
    Ok(core)
}

fn guard_enumerable(table: &GameTable) -> Result<()> {
    if table.n_users > 6 {
        return Err(Error::SizeGuard { what: "users", got: table.n_users, limit: 6 });
    }
    if table.n_aps > 3 {
        return Err(Error::SizeGuard { what: "aps", got: table.n_aps, limit: 3 });
    }
    Ok(())
}

/// Pairwise alignment: any two players sharing two coalitions rank them the
/// same way. Nash-bargained tables satisfy this by construction.
pub fn check_pairwise_alignment(
    table: &GameTable,
) -> (bool, Option<(PlayerId, PlayerId, usize, usize)>) {
    let n = table.entries.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (ei, ej) = (&table.entries[i], &table.entries[j]);
            let mut common: Vec<PlayerId> = Vec::new();
            if ei.ap == ej.ap {
                common.push(PlayerId::ap(ei.ap as u32 + 1));
            }
            let shared = ei.mask & ej.mask;
            let mut m = shared;
            while m != 0 {
                let w = m.trailing_zeros() as usize;
                common.push(PlayerId::user(w as u32 + 1));
                m &= m - 1;
            }
            if common.len() < 2 {
                continue;
            }
            let first = preference_cmp(table, common[0], Some(i), Some(j));
            for &p in &common[1..] {
                if preference_cmp(table, p, Some(i), Some(j)) != first {
                    return (false, Some((common[0], p, i, j)));
                }
            }
        }
    }
    (true, None)
}

/// Does some coalition of the family contain all of `players`? With
/// `proper_only`, the grand coalition (possible only when F = 1 and the quota
/// admits every user) does not count.
fn exists_coalition_containing(
    table: &GameTable,
    players: &BTreeSet<PlayerId>,
    proper_only: bool,
) -> bool {
    let aps: Vec<usize> =
        players.iter().filter(|p| p.kind == PlayerKind::Ap).map(|p| p.pos()).collect();
    if aps.len() > 1 {
        return false;
    }
    let user_positions: Vec<usize> = players
        .iter()
        .filter(|p| p.kind == PlayerKind::User)
        .map(|p| p.pos())
        .collect();
    if user_positions.is_empty() {
        return false; // AP-only coalitions are not in the family
    }
    let candidates: Vec<usize> = match aps.first() {
        Some(&f) => vec![f],
        None => (0..table.n_aps).collect(),
    };
    for f in candidates {
        let fits = table.quotas[f] as usize >= user_positions.len()
            && user_positions.iter().all(|&w| table.entry_idx(f, 1 << w).is_some());
        if !fits {
            continue;
        }
        if proper_only {
            // the minimal containing coalition {f} ∪ users(S) is improper only
            // when it is everyone: a single AP holding the full user set
            let is_everyone = table.n_aps == 1 && user_positions.len() == table.n_users;
            if is_everyone {
                continue;
            }
        }
        return true;
    }
    false
}

/// The three regularity conditions of the coalition family, checked literally.
/// Returns the first failed condition.
pub fn check_regularity(table: &GameTable) -> (bool, Option<String>) {
    let users: Vec<PlayerId> = (0..table.n_users).map(|w| PlayerId::user(w as u32 + 1)).collect();
    let aps: Vec<PlayerId> = (0..table.n_aps).map(|f| PlayerId::ap(f as u32 + 1)).collect();
    let all: Vec<PlayerId> = users.iter().chain(aps.iter()).copied().collect();

    // C1: two players share a coalition iff at least one is a user
    for (i, &a) in all.iter().enumerate() {
        for &b in &all[i + 1..] {
            let some_user = a.kind == PlayerKind::User || b.kind == PlayerKind::User;
            let set: BTreeSet<PlayerId> = [a, b].into_iter().collect();
            let exists = exists_coalition_containing(table, &set, false);
            if exists != some_user {
                return (false, Some(format!("C1 fails for {a}, {b}")));
            }
        }
    }
    // C2: triangle of proper coalitions with a common element
    for &a1 in &users {
        for &a2 in &users {
            if a1 == a2 {
                continue;
            }
            for &a3 in &all {
                if a3 == a1 || a3 == a2 {
                    continue;
                }
                let ok = all.iter().any(|&x| {
                    let c12: BTreeSet<_> = [a1, a2, x].into_iter().collect();
                    let c23: BTreeSet<_> = [a2, a3, x].into_iter().collect();
                    let c31: BTreeSet<_> = [a3, a1, x].into_iter().collect();
                    exists_coalition_containing(table, &c12, true)
                        && exists_coalition_containing(table, &c23, true)
                        && exists_coalition_containing(table, &c31, true)
                });
                if !ok {
                    return (false, Some(format!("C2 fails for {a1}, {a2}, {a3}")));
                }
            }
        }
    }
    // C3(i): when {a,w} is not a coalition, two distinct APs host {f,a,w}
    for &w in &users {
        for &a in &all {
            if a == w {
                continue;
            }
            let pair_is_coalition = a.kind == PlayerKind::Ap
                && table.entry_idx(a.pos(), 1 << w.pos()).is_some();
            if pair_is_coalition {
                continue;
            }
            let hosts = aps
                .iter()
                .filter(|&&f| {
                    if a.kind == PlayerKind::Ap {
                        return false; // two APs never share a coalition
                    }
                    let set: BTreeSet<_> = [f, a, w].into_iter().collect();
                    exists_coalition_containing(table, &set, true)
                })
                .count();
            if hosts < 2 {
                return (false, Some(format!("C3(i) fails for {w}, {a}")));
            }
        }
    }
    // C3(ii): no proper coalition contains every user
    if table.n_aps >= 2 {
        for f in 0..table.n_aps {
            if table.quotas[f] as usize >= table.n_users
                && (0..table.n_users).all(|w| table.entry_idx(f, 1 << w).is_some())
            {
                return (false, Some(format!("C3(ii) fails for f{}", f + 1)));
            }
        }
    }
    (true, None)
}

/// A ranked list of player groups (the player itself excluded) for the
/// responsiveness and substitutability checks; earlier is better.
pub type GroupList = Vec<BTreeSet<PlayerId>>;

/// Group list of `player` from the table's preferences.
pub fn group_list_of(table: &GameTable, player: PlayerId) -> GroupList {
    crate::matching::group_preference_list(table, player)
        .into_iter()
        .map(|i| {
            let e = &table.entries[i];
            let mut set: BTreeSet<PlayerId> = e.coalition.users.iter().copied().collect();
            if let Some(ap) = e.coalition.ap {
                set.insert(ap);
            }
            set.remove(&player);
            set
        })
        .collect()
}

/// Checks that swapping one member aligns with the given individual order
/// (position in `individuals`, earlier preferred).
pub fn check_responsive_to(
    groups: &GroupList,
    individuals: &[PlayerId],
) -> (bool, Option<(usize, usize)>) {
    let rank_of = |p: PlayerId| individuals.iter().position(|&q| q == p);
    for (ia, a) in groups.iter().enumerate() {
        for (ib, b) in groups.iter().enumerate() {
            if ia >= ib {
                continue;
            }
            // a is preferred to b; responsive iff b = a ∪ {k} \ {l} implies k ≺ l fails
            let added: Vec<_> = b.difference(a).collect();
            let removed: Vec<_> = a.difference(b).collect();
            if added.len() == 1 && removed.len() == 1 {
                let (k, l) = (*added[0], *removed[0]);
                match (rank_of(l), rank_of(k)) {
                    (Some(rl), Some(rk)) => {
                        if !(rl < rk) {
                            return (false, Some((ia, ib)));
                        }
                    }
                    _ => return (false, Some((ia, ib))),
                }
            }
        }
    }
    (true, None)
}

/// Is there *any* individual order making the group list responsive? Swap
/// pairs induce forced comparisons; inconsistency or a cycle rules them all
/// out.
pub fn is_responsive(groups: &GroupList) -> (bool, Option<(usize, usize)>) {
    let mut players: BTreeSet<PlayerId> = BTreeSet::new();
    for g in groups {
        players.extend(g.iter().copied());
    }
    let players: Vec<PlayerId> = players.into_iter().collect();
    let idx = |p: PlayerId| players.iter().position(|&q| q == p).unwrap();
    let n = players.len();
    // edge[k][l] = true means k must be strictly preferred to l
    let mut edge = vec![vec![false; n]; n];
    let mut source: Vec<Vec<Option<(usize, usize)>>> = vec![vec![None; n]; n];
    for (ia, a) in groups.iter().enumerate() {
        for (ib, b) in groups.iter().enumerate() {
            if ia >= ib {
                continue;
            }
            let added: Vec<_> = b.difference(a).copied().collect();
            let removed: Vec<_> = a.difference(b).copied().collect();
            if added.len() == 1 && removed.len() == 1 {
                // a ≻ b and b = a ∪ {k} \ {l}  =>  l ≻ k
                let (k, l) = (idx(added[0]), idx(removed[0]));
                if edge[k][l] {
                    return (false, source[k][l].unwrap_or((ia, ib)).into());
                }
                edge[l][k] = true;
                source[l][k] = Some((ia, ib));
            }
        }
    }
    // transitive closure to catch cycles
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if edge[i][m] && edge[m][j] && !edge[i][j] {
                    edge[i][j] = true;
                    source[i][j] = source[i][m].or(source[m][j]);
                }
            }
        }
    }
    for i in 0..n {
        if edge[i][i] {
            return (false, source[i][i]);
        }
        for j in 0..n {
            if i != j && edge[i][j] && edge[j][i] {
                return (false, source[i][j].or(source[j][i]));
            }
        }
    }
    (true, None)
}

/// Choice set: the members of the best-ranked group drawn entirely from `s`.
pub fn choice_set(groups: &GroupList, s: &BTreeSet<PlayerId>) -> BTreeSet<PlayerId> {
    for g in groups {
        if g.is_subset(s) {
            return g.clone();
        }
    }
    BTreeSet::new()
}

/// Substitutability: chosen players stay chosen when someone else leaves the
/// pool. Returns a violating (pool, kept, removed) triple otherwise.
pub fn check_substitutable(
    groups: &GroupList,
) -> (bool, Option<(BTreeSet<PlayerId>, PlayerId, PlayerId)>) {
    let mut ground: BTreeSet<PlayerId> = BTreeSet::new();
    for g in groups {
        ground.extend(g.iter().copied());
    }
    let ground: Vec<PlayerId> = ground.into_iter().collect();
    let n = ground.len();
    for bits in 0u32..(1 << n) {
        let s: BTreeSet<PlayerId> = ground
            .iter()
            .enumerate()
            .filter(|(i, _)| bits & (1 << i) != 0)
            .map(|(_, &p)| p)
            .collect();
        if s.len() < 2 {
            continue;
        }
        let ch = choice_set(groups, &s);
        for &k in &ch {
            for &l in &s {
                if l == k {
                    continue;
                }
                let mut s2 = s.clone();
                s2.remove(&l);
                if !choice_set(groups, &s2).contains(&k) {
                    return (false, Some((s, k, l)));
                }
            }
        }
    }
    (true, None)
}
