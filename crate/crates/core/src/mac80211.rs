//! Saturation-throughput model of an 802.11 DCF cell.
//!
//! Every member of a cell (the AP included, transmitting downlink at the
//! governing standard's top rate) contends for the channel with a common
//! attempt rate `beta`, the fixed point of the decoupled backoff process.
//! The cell worth `v(C)` is the total saturation throughput; per-member
//! shares are proportional to the traffic weights `alpha_i`, which reduce to
//! equal sharing for single-flow equal-packet traffic. Everything internal is
//! computed in bits per slot; conversion to bit/s happens at the boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coalition, PlayerId, RateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Standard {
    B,
    G,
    N,
}

impl std::fmt::Display for Standard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Standard::B => write!(f, "802.11b"),
            Standard::G => write!(f, "802.11g"),
            Standard::N => write!(f, "802.11n"),
        }
    }
}

/// DCF parameters of one standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacParams {
    pub standard: Standard,
    /// Slot duration in seconds.
    pub slot_s: f64,
    /// Fixed overhead per successful transmission, in slots.
    pub t0_slots: f64,
    /// Fixed overhead per RTS collision, in slots.
    pub tc_slots: f64,
    /// Packet length in bits.
    pub l_bits: f64,
    /// Backoff stage limit.
    pub k_retry: u32,
    /// Initial mean backoff in slots.
    pub b0_slots: f64,
    /// Backoff multiplier per stage.
    pub p_mult: f64,
    /// Supported physical rates, bit/s.
    pub rate_set: Vec<f64>,
}

impl MacParams {
    pub fn max_rate(&self) -> f64 {
        self.rate_set.iter().cloned().fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let pos = [self.slot_s, self.t0_slots, self.tc_slots, self.l_bits, self.b0_slots, self.p_mult];
        if pos.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || self.rate_set.is_empty() {
            return Err(Error::InvalidConfig(format!("bad MAC table for {}", self.standard)));
        }
        Ok(())
    }
}

/// The three default tables: slot {9,9,20} us, T0 {3,5,50}, TC {2,10,20},
/// L 8192 bits, K 2, b0 16, p 2 for n/g/b.
pub fn default_tables() -> Vec<MacParams> {
    vec![
        MacParams {
            standard: Standard::N,
            slot_s: 9e-6,
            t0_slots: 3.0,
            tc_slots: 2.0,
            l_bits: 8192.0,
            k_retry: 2,
            b0_slots: 16.0,
            p_mult: 2.0,
            rate_set: vec![300e6, 54e6, 11e6],
        },
        MacParams {
            standard: Standard::G,
            slot_s: 9e-6,
            t0_slots: 5.0,
            tc_slots: 10.0,
            l_bits: 8192.0,
            k_retry: 2,
            b0_slots: 16.0,
            p_mult: 2.0,
            rate_set: vec![54e6, 11e6],
        },
        MacParams {
            standard: Standard::B,
            slot_s: 20e-6,
            t0_slots: 50.0,
            tc_slots: 20.0,
            l_bits: 8192.0,
            k_retry: 2,
            b0_slots: 16.0,
            p_mult: 2.0,
            rate_set: vec![11e6],
        },
    ]
}

/// MAC tables plus an optional fixed attempt-rate override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacModel {
    pub tables: Vec<MacParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_fixed: Option<f64>,
}

impl Default for MacModel {
    fn default() -> Self {
        MacModel { tables: default_tables(), beta_fixed: None }
    }
}

impl MacModel {
    pub fn validate(&self) -> Result<()> {
        if self.tables.is_empty() {
            return Err(Error::InvalidConfig("no MAC tables".into()));
        }
        for t in &self.tables {
            t.validate()?;
        }
        if let Some(b) = self.beta_fixed {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidConfig(format!("beta_fixed {b} outside (0,1)")));
            }
        }
        Ok(())
    }

    /// Table governing a cell: when all member rates are equal, the one whose
    /// max rate equals the common rate; otherwise the one whose max rate
    /// equals the cell minimum. Rates matching no table max fall back to the
    /// table with the smallest max rate still covering them.
    pub fn select_mac(&self, member_rates: &[f64]) -> Result<&MacParams> {
        if member_rates.is_empty() {
            return Err(Error::InvalidConfig("empty member rate list".into()));
        }
        let first = member_rates[0];
        let homogeneous = member_rates.iter().all(|&r| (r - first).abs() < 1e-9);
        let key = if homogeneous {
            first
        } else {
            member_rates.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        if let Some(t) = self.tables.iter().find(|t| (t.max_rate() - key).abs() < 1e-9) {
            return Ok(t);
        }
        self.tables
            .iter()
            .filter(|t| t.max_rate() >= key)
            .min_by(|a, b| a.max_rate().partial_cmp(&b.max_rate()).unwrap())
            .ok_or(Error::NoMacTable(key))
    }
}

/// Attempt rate of a contender among `n_members`: the unique fixed point of
/// beta = G(gamma(beta)) with gamma = 1-(1-beta)^(n-1) and
/// G(gamma) = sum_k gamma^k / sum_k gamma^k p^k b0, k = 0..=K.
/// `beta_fixed`, when set, short-circuits the solve.
pub fn attempt_rate(mac: &MacParams, n_members: usize, beta_fixed: Option<f64>) -> Result<f64> {
    if let Some(b) = beta_fixed {
        return Ok(b);
    }
    if n_members == 0 {
        return Err(Error::InvalidConfig("attempt rate needs at least one member".into()));
    }
    let g = |gamma: f64| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut gk = 1.0;
        let mut pk = 1.0;
        for _ in 0..=mac.k_retry {
            num += gk;
            den += gk * pk * mac.b0_slots;
            gk *= gamma;
            pk *= mac.p_mult;
        }
        num / den
    };
    let f = |beta: f64| g(1.0 - (1.0 - beta).powi(n_members as i32 - 1)) - beta;
    let (mut lo, mut hi) = (1e-9, 1.0);
    if f(lo) <= 0.0 || f(hi) >= 0.0 {
        return Err(Error::NonConvergence(format!(
            "attempt-rate bracket invalid for n={n_members}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NonConvergence("attempt-rate bisection stalled".into()))
}

/// One flow: selection probability and packet length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub p: f64,
    pub l_bits: f64,
}

/// Traffic description per cell member. The default is a single flow of the
/// table packet length per member, which makes every alpha_i equal to 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowSpec {
    /// member id -> flows; members absent from the map get the default flow.
    pub flows: BTreeMap<PlayerId, Vec<Flow>>,
}

impl FlowSpec {
    pub fn uniform() -> Self {
        FlowSpec::default()
    }

    fn member_flows(&self, id: PlayerId, l_default: f64) -> Vec<Flow> {
        match self.flows.get(&id) {
            Some(fl) => fl.clone(),
            None => vec![Flow { p: 1.0, l_bits: l_default }],
        }
    }

    fn validate_member(flows: &[Flow], l_max: f64) -> Result<()> {
        let psum: f64 = flows.iter().map(|f| f.p).sum();
        if (psum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("flow probabilities sum to {psum}, not 1")));
        }
        for f in flows {
            if f.l_bits <= 0.0 || f.l_bits > l_max + 1e-9 {
                return Err(Error::InvalidConfig(format!("flow length {} outside (0, L_max]", f.l_bits)));
            }
        }
        Ok(())
    }
}

/// Worth and per-member shares of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellThroughput {
    /// Coalition worth in bit/s.
    pub v: f64,
    pub per_member: BTreeMap<PlayerId, f64>,
    pub beta: f64,
}

/// Saturation throughput of a cell: total worth and the per-member split.
///
/// A lone user produces nothing (v = 0). Every user must have a non-zero rate
/// toward the coalition AP; the AP itself contends at the governing
/// standard's top rate.
pub fn coalition_worth(
    coalition: &Coalition,
    mac: &MacModel,
    rates: &RateMatrix,
    flows: &FlowSpec,
) -> Result<CellThroughput> {
    let ap = match coalition.ap {
        Some(ap) => ap,
        None => {
            let mut per_member = BTreeMap::new();
            for u in &coalition.users {
                per_member.insert(*u, 0.0);
            }
            return Ok(CellThroughput { v: 0.0, per_member, beta: 0.0 });
        }
    };
    let mut user_rates = Vec::with_capacity(coalition.users.len());
    for u in &coalition.users {
        let r = rates.rate(u.pos(), ap.pos());
        if r <= 0.0 {
            return Err(Error::ZeroRateMember(u.to_string()));
        }
        user_rates.push(r);
    }
    let params = mac.select_mac(&user_rates)?;
    let ap_rate = params.max_rate();

    // member list: users then the AP, with their rates
    let mut members: Vec<(PlayerId, f64)> = coalition
        .users
        .iter()
        .copied()
        .zip(user_rates.iter().copied())
        .collect();
    members.push((ap, ap_rate));

    let n = members.len();
    let beta = attempt_rate(params, n, mac.beta_fixed)?;
    let l_max = params.l_bits;

    let one_minus = 1.0 - beta;
    let succ = beta * one_minus.powi(n as i32); // per-flow success weight
    let contend = beta * one_minus.powi(n as i32 - 1);

    // denominator: mean slot-cycle duration in slots
    let mut den = 1.0;
    for (id, rate) in &members {
        let fl = flows.member_flows(*id, l_max);
        FlowSpec::validate_member(&fl, l_max)?;
        let service_slots: f64 = fl.iter().map(|f| f.p * (f.l_bits / rate) / params.slot_s).sum();
        den += contend * (service_slots + params.t0_slots);
    }
    den += (1.0 - one_minus.powi(n as i32) - n as f64 * contend) * params.tc_slots;

    let mut per_member = BTreeMap::new();
    let mut v_slots = 0.0;
    for (id, _) in &members {
        let fl = flows.member_flows(*id, l_max);
        let bits: f64 = fl.iter().map(|f| f.p * f.l_bits).sum();
        let r = bits * succ / den;
        v_slots += r;
        per_member.insert(*id, r / params.slot_s);
    }
    Ok(CellThroughput { v: v_slots / params.slot_s, per_member, beta })
}

/// Even split of the unit time resource: each user gets alpha = 1/|users| and
/// a throughput of alpha * theta_wf. This induces proportional fairness in
/// throughputs.
pub fn time_fair_allocation(
    coalition: &Coalition,
    rates: &RateMatrix,
) -> Result<BTreeMap<PlayerId, (f64, f64)>> {
    let ap = coalition
        .ap
        .ok_or_else(|| Error::InvalidScenario("time sharing needs an AP".into()))?;
    let n = coalition.users.len() as f64;
    let mut out = BTreeMap::new();
    for u in &coalition.users {
        let theta = rates.rate(u.pos(), ap.pos());
        if theta <= 0.0 {
            return Err(Error::ZeroRateMember(u.to_string()));
        }
        out.insert(*u, (1.0 / n, theta / n));
    }
    Ok(out)
}
