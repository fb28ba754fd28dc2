//! Nash-bargaining allocation of a coalition's worth.
//!
//! The allocator maximizes the product of member utilities over the worth
//! simplex. At the optimum the fear of ruin chi = u(s)/u'(s) is common to all
//! members and equals the inverse of the Lagrange multiplier lambda0 of the
//! budget constraint; each share is the inverse boldness evaluated at
//! lambda0. Identity and power utilities have closed forms; anything else is
//! solved by bisection on lambda0 with an inner bisection for the inverse
//! boldness.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PlayerId;

/// A member utility: strictly increasing, concave, differentiable, with
/// u(0)/u'(0) = 0.
#[derive(Clone)]
pub enum Utility {
    Identity,
    Power { alpha: f64 },
    Custom(Arc<CustomUtility>),
}

pub struct CustomUtility {
    pub name: String,
    pub u: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub du: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Identity => write!(f, "identity"),
            Utility::Power { alpha } => write!(f, "power({alpha})"),
            Utility::Custom(c) => write!(f, "custom({})", c.name),
        }
    }
}

impl Utility {
    pub fn log1p() -> Self {
        Utility::Custom(Arc::new(CustomUtility {
            name: "log1p".into(),
            u: Box::new(|x| (1.0 + x).ln()),
            du: Box::new(|x| 1.0 / (1.0 + x)),
        }))
    }

    /// sqrt(1+x) - 1: concave, increasing, u(0)=0.
    pub fn sqrt1p() -> Self {
        Utility::Custom(Arc::new(CustomUtility {
            name: "sqrt1p".into(),
            u: Box::new(|x| (1.0 + x).sqrt() - 1.0),
            du: Box::new(|x| 0.5 / (1.0 + x).sqrt()),
        }))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "log1p" => Ok(Self::log1p()),
            "sqrt1p" => Ok(Self::sqrt1p()),
            other => Err(Error::InvalidConfig(format!("unknown custom utility {other}"))),
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        match self {
            Utility::Identity => x,
            Utility::Power { alpha } => x.powf(*alpha),
            Utility::Custom(c) => (c.u)(x),
        }
    }

    pub fn du(&self, x: f64) -> f64 {
        match self {
            Utility::Identity => 1.0,
            Utility::Power { alpha } => alpha * x.powf(alpha - 1.0),
            Utility::Custom(c) => (c.du)(x),
        }
    }

    /// Boldness u'/u, strictly decreasing for valid utilities.
    pub fn boldness(&self, x: f64, threat: f64) -> f64 {
        match (self, threat) {
            (Utility::Identity, t) if t == 0.0 => 1.0 / x,
            (Utility::Power { alpha }, t) if t == 0.0 => alpha / x,
            _ => self.du(x) / (self.u(x) - threat),
        }
    }

    /// Inverse boldness: the x with u'(x)/(u(x)-t) = lambda, clamped to
    /// [floor, worth].
    fn inverse_boldness(&self, lambda: f64, threat: f64, worth: f64) -> f64 {
        match (self, threat) {
            (Utility::Identity, t) if t == 0.0 => (1.0 / lambda).clamp(0.0, worth),
            (Utility::Power { alpha }, t) if t == 0.0 => (alpha / lambda).clamp(0.0, worth),
            _ => {
                let floor = worth * 1e-12;
                let (mut lo, mut hi) = (floor, worth);
                if self.boldness(lo, threat) <= lambda {
                    return lo;
                }
                if self.boldness(hi, threat) >= lambda {
                    return hi;
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if self.boldness(mid, threat) > lambda {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Checks increase, concavity (u' non-increasing on a probe grid) and the
    /// u(0)/u'(0) = 0 condition.
    pub fn validate(&self, probe_to: f64) -> Result<()> {
        if let Utility::Power { alpha } = self {
            // x^alpha is strictly log-concave for every alpha > 0, which is
            // what the product maximization needs.
            if !(*alpha > 0.0) {
                return Err(Error::NonConcaveUtility(format!("power alpha {alpha} must be positive")));
            }
            return Ok(());
        }
        if matches!(self, Utility::Identity) {
            return Ok(());
        }
        let hi = if probe_to > 0.0 { probe_to } else { 1.0 };
        let eps = hi * 1e-12;
        let chi0 = self.u(eps) / self.du(eps);
        if !(chi0.abs() < hi * 1e-6) {
            return Err(Error::NonConcaveUtility(format!("u(0)/u'(0) = {chi0}, not 0")));
        }
        let mut prev_du = f64::INFINITY;
        for k in 1..=64 {
            let x = hi * k as f64 / 64.0;
            let du = self.du(x);
            if !(du > 0.0) {
                return Err(Error::NonConcaveUtility(format!("u' not positive at {x}")));
            }
            if du > prev_du * (1.0 + 1e-9) {
                return Err(Error::NonConcaveUtility(format!("u' increasing at {x}")));
            }
            prev_du = du;
        }
        Ok(())
    }
}

/// Which utility family allocates worths, per player.
#[derive(Debug, Clone)]
pub enum SharingSpec {
    /// Equal sharing: identity utilities for everyone.
    Identity,
    /// Power utilities x^alpha_i; players absent from the map get alpha 1.
    Power { alphas: BTreeMap<PlayerId, f64> },
    /// One custom utility shared by all players.
    Custom(Utility),
}

impl Default for SharingSpec {
    fn default() -> Self {
        SharingSpec::Identity
    }
}

impl SharingSpec {
    pub fn utility_of(&self, id: PlayerId) -> Utility {
        match self {
            SharingSpec::Identity => Utility::Identity,
            SharingSpec::Power { alphas } => Utility::Power {
                alpha: alphas.get(&id).copied().unwrap_or(1.0),
            },
            SharingSpec::Custom(u) => u.clone(),
        }
    }
}

/// Result of one bargaining round: shares, multiplier, coalition fear of ruin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BargainOutcome {
    pub shares: BTreeMap<PlayerId, f64>,
    pub lambda0: f64,
    pub chi: f64,
}

/// Fear of ruin u(s)/u'(s) at a given share.
pub fn fear_of_ruin(share: f64, u: &Utility) -> Result<f64> {
    if share < 0.0 {
        return Err(Error::NegativeWorth(share));
    }
    let du = u.du(share);
    if du == 0.0 || !du.is_finite() {
        return Err(Error::NonConcaveUtility(format!("u'({share}) = {du}")));
    }
    Ok(u.u(share) / du)
}

/// Splits `worth` among `members` by maximizing the utility product over the
/// worth simplex. Zero worth yields all-zero shares and chi = 0.
pub fn nash_allocate(
    worth: f64,
    members: &[PlayerId],
    sharing: &SharingSpec,
) -> Result<BargainOutcome> {
    if worth < 0.0 {
        return Err(Error::NegativeWorth(worth));
    }
    if members.is_empty() {
        return Err(Error::InvalidConfig("no members to allocate to".into()));
    }
    if worth == 0.0 {
        return Ok(BargainOutcome {
            shares: members.iter().map(|&m| (m, 0.0)).collect(),
            lambda0: f64::INFINITY,
            chi: 0.0,
        });
    }
    match sharing {
        SharingSpec::Identity => {
            let n = members.len() as f64;
            let share = worth / n;
            Ok(BargainOutcome {
                shares: members.iter().map(|&m| (m, share)).collect(),
                lambda0: n / worth,
                chi: worth / n,
            })
        }
        SharingSpec::Power { .. } => {
            let alphas: Vec<f64> = members
                .iter()
                .map(|&m| match sharing.utility_of(m) {
                    Utility::Power { alpha } => alpha,
                    _ => unreachable!(),
                })
                .collect();
            for (&m, &a) in members.iter().zip(&alphas) {
                if !(a > 0.0) {
                    return Err(Error::NonConcaveUtility(format!("alpha for {m} must be positive")));
                }
            }
            let total: f64 = alphas.iter().sum();
            Ok(BargainOutcome {
                shares: members
                    .iter()
                    .zip(&alphas)
                    .map(|(&m, &a)| (m, a / total * worth))
                    .collect(),
                lambda0: total / worth,
                chi: worth / total,
            })
        }
        SharingSpec::Custom(_) => {
            let utilities: Vec<(PlayerId, Utility, f64)> = members
                .iter()
                .map(|&m| (m, sharing.utility_of(m), 0.0))
                .collect();
            nash_allocate_solver(worth, &utilities)
        }
    }
}

/// Reference bisection solver on the Lagrange multiplier; works for any valid
/// utility family (the closed-form paths above are cross-checked against it).
/// `utilities` pairs each member with its utility and threat.
pub fn nash_allocate_solver(
    worth: f64,
    utilities: &[(PlayerId, Utility, f64)],
) -> Result<BargainOutcome> {
    if worth < 0.0 {
        return Err(Error::NegativeWorth(worth));
    }
    if worth == 0.0 {
        return Ok(BargainOutcome {
            shares: utilities.iter().map(|(m, _, _)| (*m, 0.0)).collect(),
            lambda0: f64::INFINITY,
            chi: 0.0,
        });
    }
    for (_, u, _) in utilities {
        u.validate(worth)?;
    }
    let n = utilities.len() as f64;
    let sum_at = |lambda: f64| -> f64 {
        utilities
            .iter()
            .map(|(_, u, t)| u.inverse_boldness(lambda, *t, worth))
            .sum()
    };
    // bracket: boldness at the full worth (lower) and at worth/(10n) (upper)
    let mut lo = utilities
        .iter()
        .map(|(_, u, t)| u.boldness(worth, *t))
        .fold(f64::INFINITY, f64::min);
    let mut hi = utilities
        .iter()
        .map(|(_, u, t)| u.boldness(worth / (10.0 * n), *t))
        .fold(0.0, f64::max);
    let mut tries = 0;
    while !(sum_at(lo) >= worth && sum_at(hi) <= worth) {
        lo /= 4.0;
        hi *= 4.0;
        tries += 1;
        if tries > 60 || !lo.is_finite() || !hi.is_finite() || lo <= 0.0 {
            return Err(Error::BracketFailure(format!(
                "lambda0 bracket failed for worth {worth}"
            )));
        }
    }
    let mut lambda0 = 0.5 * (lo + hi);
    for _ in 0..200 {
        lambda0 = 0.5 * (lo + hi);
        let s = sum_at(lambda0);
        if (s - worth).abs() <= 1e-10 * worth {
            break;
        }
        if s > worth {
            lo = lambda0;
        } else {
            hi = lambda0;
        }
    }
    let shares: BTreeMap<PlayerId, f64> = utilities
        .iter()
        .map(|(m, u, t)| (*m, u.inverse_boldness(lambda0, *t, worth)))
        .collect();
    let total: f64 = shares.values().sum();
    if (total - worth).abs() > 1e-8 * worth {
        return Err(Error::BracketFailure(format!(
            "allocation sums to {total}, wanted {worth}"
        )));
    }
    Ok(BargainOutcome { shares, lambda0, chi: 1.0 / lambda0 })
}

/// The coalition fear of ruin chi_C = 1/lambda0; strictly increasing in the
/// worth. Errors on non-positive worth.
pub fn coalition_for(worth: f64, members: &[PlayerId], sharing: &SharingSpec) -> Result<f64> {
    if worth <= 0.0 {
        return Err(Error::NonPositiveWorth(worth));
    }
    Ok(nash_allocate(worth, members, sharing)?.chi)
}
