//! Core domain types: players, rates, scenarios and the feasible coalition family.
//!
//! A scenario is the "state of nature": user and AP positions, coverage rings
//! and the resulting (or explicitly given) rate matrix. Coalitions are one AP
//! plus a non-empty user subset bounded by the AP's quota, or a lone user.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlayerKind {
    Ap,
    User,
}

/// 1-based player identity, printed as `w3` / `f1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId {
    pub kind: PlayerKind,
    pub index: u32,
}

impl PlayerId {
    pub fn user(index: u32) -> Self {
        PlayerId { kind: PlayerKind::User, index }
    }

    pub fn ap(index: u32) -> Self {
        PlayerId { kind: PlayerKind::Ap, index }
    }

    /// 0-based position within its kind.
    pub fn pos(&self) -> usize {
        (self.index - 1) as usize
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PlayerKind::User => write!(f, "w{}", self.index),
            PlayerKind::Ap => write!(f, "f{}", self.index),
        }
    }
}

impl FromStr for PlayerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_at_checked(1) {
            Some(("w", rest)) => (PlayerKind::User, rest),
            Some(("f", rest)) => (PlayerKind::Ap, rest),
            _ => return Err(Error::UnknownPlayer(s.to_string())),
        };
        let index: u32 = rest.parse().map_err(|_| Error::UnknownPlayer(s.to_string()))?;
        if index == 0 {
            return Err(Error::UnknownPlayer(s.to_string()));
        }
        Ok(PlayerId { kind, index })
    }
}

impl Serialize for PlayerId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PlayerId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Physical data rates in bit/s, row per user, column per AP. Zero means the
/// user is outside that AP's coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    theta: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn new(theta: Vec<Vec<f64>>) -> Result<Self> {
        let cols = theta.first().map(|r| r.len()).unwrap_or(0);
        for row in &theta {
            if row.len() != cols {
                return Err(Error::InvalidScenario("ragged rate matrix".into()));
            }
            for &r in row {
                if !r.is_finite() || r < 0.0 {
                    return Err(Error::InvalidScenario(format!("invalid rate {r}")));
                }
            }
        }
        Ok(RateMatrix { theta })
    }

    pub fn n_users(&self) -> usize {
        self.theta.len()
    }

    pub fn n_aps(&self) -> usize {
        self.theta.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Rate between user `w` (0-based position) and AP `f` (0-based position).
    pub fn rate(&self, w: usize, f: usize) -> f64 {
        self.theta[w][f]
    }

    /// The distinct non-zero rates present, descending.
    pub fn rate_set(&self) -> Vec<f64> {
        let mut set: Vec<f64> = Vec::new();
        for row in &self.theta {
            for &r in row {
                if r > 0.0 && !set.iter().any(|&x| (x - r).abs() < 1e-9) {
                    set.push(r);
                }
            }
        }
        set.sort_by(|a, b| b.partial_cmp(a).unwrap());
        set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserNode {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApNode {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Hard cap on associated users; derived from load balancing when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<u32>,
}

/// One coverage ring: users within `radius_m` of the AP reach `rate_bps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageRing {
    pub radius_m: f64,
    pub rate_bps: f64,
}

/// Default rings. The radii are calibration values for desk experiments, not
/// measured 802.11 cell edges; the rates are the usual b/g/n maxima.
pub fn default_rings() -> Vec<CoverageRing> {
    vec![
        CoverageRing { radius_m: 30.0, rate_bps: 300e6 },
        CoverageRing { radius_m: 70.0, rate_bps: 54e6 },
        CoverageRing { radius_m: 110.0, rate_bps: 11e6 },
    ]
}

/// Explicit per-coalition member value, for abstract fixtures where worths are
/// given instead of derived from the MAC model. `value` is what each member of
/// the coalition receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionValue {
    pub ap: u32,
    pub users: Vec<u32>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub users: Vec<UserNode>,
    pub aps: Vec<ApNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<Vec<CoverageRing>>,
    /// Explicit W x F matrix in bit/s; overrides geometry when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
    /// Abstract per-coalition member values; overrides the MAC worth model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalition_values: Option<Vec<CoalitionValue>>,
    /// MAC parameter tables and attempt-rate override; defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<crate::mac80211::MacModel>,
}

impl Scenario {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, u) in self.users.iter().enumerate() {
            if u.id as usize != i + 1 {
                return Err(Error::InvalidScenario(format!(
                    "user ids must be 1..=W in order; position {} has id {}",
                    i, u.id
                )));
            }
        }
        for (i, a) in self.aps.iter().enumerate() {
            if a.id as usize != i + 1 {
                return Err(Error::InvalidScenario(format!(
                    "ap ids must be 1..=F in order; position {} has id {}",
                    i, a.id
                )));
            }
        }
        if self.users.len() > 64 {
            return Err(Error::InvalidScenario(
                "at most 64 users supported (user sets are bitmasks)".into(),
            ));
        }
        if let Some(rings) = &self.rings {
            validate_rings(rings)?;
        }
        if let Some(rates) = &self.rates {
            if rates.len() != self.users.len() {
                return Err(Error::InvalidScenario("rate matrix row count != W".into()));
            }
            for row in rates {
                if row.len() != self.aps.len() {
                    return Err(Error::InvalidScenario("rate matrix column count != F".into()));
                }
            }
            RateMatrix::new(rates.clone())?;
        }
        if let Some(values) = &self.coalition_values {
            for cv in values {
                if cv.ap == 0 || cv.ap as usize > self.aps.len() {
                    return Err(Error::InvalidScenario(format!("unknown ap f{}", cv.ap)));
                }
                if cv.users.is_empty() {
                    return Err(Error::InvalidScenario("coalition value without users".into()));
                }
                for &u in &cv.users {
                    if u == 0 || u as usize > self.users.len() {
                        return Err(Error::InvalidScenario(format!("unknown user w{u}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn distance(&self, w: usize, f: usize) -> f64 {
        let u = &self.users[w];
        let a = &self.aps[f];
        ((u.x - a.x).powi(2) + (u.y - a.y).powi(2)).sqrt()
    }

    /// The rate matrix: the explicit one when present, otherwise derived from
    /// geometry and rings.
    pub fn rate_matrix(&self) -> Result<RateMatrix> {
        match &self.rates {
            Some(rows) => RateMatrix::new(rows.clone()),
            None => rates_from_geometry(self),
        }
    }
}

fn validate_rings(rings: &[CoverageRing]) -> Result<()> {
    if rings.is_empty() {
        return Err(Error::InvalidScenario("coverage rings must be non-empty".into()));
    }
    for r in rings {
        if r.radius_m < 0.0 || !r.radius_m.is_finite() {
            return Err(Error::InvalidScenario(format!("negative ring radius {}", r.radius_m)));
        }
        if r.rate_bps <= 0.0 || !r.rate_bps.is_finite() {
            return Err(Error::InvalidScenario(format!("ring rate must be positive, got {}", r.rate_bps)));
        }
    }
    for pair in rings.windows(2) {
        if pair[1].radius_m <= pair[0].radius_m {
            return Err(Error::InvalidScenario("ring radii must be strictly increasing".into()));
        }
        if pair[1].rate_bps >= pair[0].rate_bps {
            return Err(Error::InvalidScenario("ring rates must be strictly decreasing".into()));
        }
    }
    Ok(())
}

/// theta[w][f] = rate of the innermost ring containing the AP-user distance,
/// 0 outside all rings. Ring boundaries are closed: distance == radius grants
/// the ring's rate.
pub fn rates_from_geometry(scenario: &Scenario) -> Result<RateMatrix> {
    let rings = match &scenario.rings {
        Some(r) => r.clone(),
        None => default_rings(),
    };
    validate_rings(&rings)?;
    let mut theta = vec![vec![0.0; scenario.aps.len()]; scenario.users.len()];
    for w in 0..scenario.users.len() {
        for f in 0..scenario.aps.len() {
            let d = scenario.distance(w, f);
            for ring in &rings {
                if d <= ring.radius_m {
                    theta[w][f] = ring.rate_bps;
                    break;
                }
            }
        }
    }
    RateMatrix::new(theta)
}

/// An AP with its user set, or a lone user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalition {
    pub ap: Option<PlayerId>,
    pub users: BTreeSet<PlayerId>,
}

impl Coalition {
    pub fn cell(ap_index: u32, user_indices: impl IntoIterator<Item = u32>) -> Self {
        Coalition {
            ap: Some(PlayerId::ap(ap_index)),
            users: user_indices.into_iter().map(PlayerId::user).collect(),
        }
    }

    pub fn singleton(user_index: u32) -> Self {
        Coalition {
            ap: None,
            users: std::iter::once(PlayerId::user(user_index)).collect(),
        }
    }

    /// All members; the AP counts as one.
    pub fn members(&self) -> Vec<PlayerId> {
        let mut m: Vec<PlayerId> = self.users.iter().copied().collect();
        if let Some(ap) = self.ap {
            m.push(ap);
        }
        m
    }

    /// |C|, counting the AP as a member.
    pub fn size(&self) -> usize {
        self.users.len() + usize::from(self.ap.is_some())
    }

    pub fn contains(&self, p: PlayerId) -> bool {
        match p.kind {
            PlayerKind::Ap => self.ap == Some(p),
            PlayerKind::User => self.users.contains(&p),
        }
    }

    /// Normalized composition: proportion of users per rate of `theta_set`
    /// (descending). Only defined for coalitions with an AP.
    pub fn composition(&self, rates: &RateMatrix, theta_set: &[f64]) -> Result<Vec<f64>> {
        let ap = self.ap.ok_or_else(|| {
            Error::InvalidScenario("composition undefined for a lone user".into())
        })?;
        let mut counts = vec![0usize; theta_set.len()];
        for u in &self.users {
            let r = rates.rate(u.pos(), ap.pos());
            let k = theta_set
                .iter()
                .position(|&t| (t - r).abs() < 1e-9)
                .ok_or_else(|| Error::InvalidScenario(format!("rate {r} not in rate set")))?;
            counts[k] += 1;
        }
        let n = self.users.len() as f64;
        Ok(counts.into_iter().map(|c| c as f64 / n).collect())
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        if let Some(ap) = self.ap {
            write!(f, "{ap}")?;
        }
        for (i, u) in self.users.iter().enumerate() {
            if i > 0 || self.ap.is_some() {
                write!(f, ",")?;
            }
            write!(f, "{u}")?;
        }
        write!(f, "}}")
    }
}

/// Fractional load-balancing targets and the integer feasibility caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaVector {
    pub qhat: Vec<f64>,
    pub caps: Vec<u32>,
}

/// Users with non-zero rate toward AP `f`.
pub fn acceptable_users(f: PlayerId, rates: &RateMatrix) -> Result<BTreeSet<PlayerId>> {
    if f.kind != PlayerKind::Ap || f.pos() >= rates.n_aps() {
        return Err(Error::UnknownPlayer(f.to_string()));
    }
    Ok((0..rates.n_users())
        .filter(|&w| rates.rate(w, f.pos()) > 0.0)
        .map(|w| PlayerId::user(w as u32 + 1))
        .collect())
}

/// All coalitions `{f} ∪ J` with `J` a non-empty subset of f's acceptable
/// users and `|J| <= quota`, ordered by size then lexicographically by user
/// indices.
pub fn enumerate_coalitions(f: PlayerId, rates: &RateMatrix, quota: u32) -> Result<Vec<Coalition>> {
    let acceptable: Vec<PlayerId> = acceptable_users(f, rates)?.into_iter().collect();
    let mut out = Vec::new();
    let cap = (quota as usize).min(acceptable.len());
    let mut stack: Vec<usize> = Vec::new();
    for size in 1..=cap {
        stack.clear();
        subsets_of_size(&acceptable, size, 0, &mut stack, &mut |chosen| {
            out.push(Coalition {
                ap: Some(f),
                users: chosen.iter().map(|&i| acceptable[i]).collect(),
            });
        });
    }
    Ok(out)
}

fn subsets_of_size(
    items: &[PlayerId],
    size: usize,
    start: usize,
    stack: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]),
) {
    if stack.len() == size {
        emit(stack);
        return;
    }
    let remaining = size - stack.len();
    for i in start..=items.len().saturating_sub(remaining) {
        stack.push(i);
        subsets_of_size(items, size, i + 1, stack, emit);
        stack.pop();
    }
}
