//! Control of the coalition game: multiplicative tax rates over coalition
//! cardinality, and checks that the taxed game gives every AP's coalitions
//! single-peaked incentives at its quota target.
//!
//! The inverse fear of ruin F_C = lambda0(worth) is the comparison key: a
//! coalition with a smaller F is preferred by all its members. The Gaussian
//! family scales worths by exp(-(|C|-qhat)^2 / (2 sigma^2)); |C| counts the
//! AP as a member.

use serde::{Deserialize, Serialize};

use crate::bargaining::{nash_allocate, SharingSpec, Utility};
use crate::error::{Error, Result};
use crate::model::{Coalition, PlayerId};

/// Tax-rate family applied to one AP's coalitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TaxFamily {
    None,
    Gaussian { qhat: f64, sigma: f64 },
}

impl TaxFamily {
    /// ln of the multiplicative factor for a coalition of `size` members.
    pub fn log_factor(&self, size: usize) -> f64 {
        match self {
            TaxFamily::None => 0.0,
            TaxFamily::Gaussian { qhat, sigma } => {
                let d = size as f64 - qhat;
                -(d * d) / (2.0 * sigma * sigma)
            }
        }
    }

    pub fn factor(&self, size: usize) -> f64 {
        self.log_factor(size).exp()
    }
}

/// Per-AP control specification.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSpec {
    pub per_ap: Vec<TaxFamily>,
}

impl ControlSpec {
    pub fn none(n_aps: usize) -> Self {
        ControlSpec { per_ap: vec![TaxFamily::None; n_aps] }
    }

    pub fn gaussian(qhat: &[f64], sigma: &[f64]) -> Result<Self> {
        if qhat.len() != sigma.len() {
            return Err(Error::InvalidConfig("qhat and sigma lengths differ".into()));
        }
        for &s in sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidConfig(format!("sigma {s} must be positive")));
            }
        }
        Ok(ControlSpec {
            per_ap: qhat
                .iter()
                .zip(sigma)
                .map(|(&q, &s)| TaxFamily::Gaussian { qhat: q, sigma: s })
                .collect(),
        })
    }

    /// Factor for a coalition; lone users pass through untouched.
    pub fn factor(&self, coalition: &Coalition) -> f64 {
        self.log_factor(coalition).exp()
    }

    pub fn log_factor(&self, coalition: &Coalition) -> f64 {
        match coalition.ap {
            Some(ap) => self.per_ap[ap.pos()].log_factor(coalition.size()),
            None => 0.0,
        }
    }
}

/// A worth before and after the control transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledWorth {
    pub base: f64,
    pub modified: f64,
    pub factor: f64,
}

/// Applies the control transformation to one coalition's worth.
pub fn apply_control(v: f64, coalition: &Coalition, spec: &ControlSpec) -> ControlledWorth {
    let factor = spec.factor(coalition);
    ControlledWorth { base: v, modified: factor * v, factor }
}

fn chi_of(worth: f64, members: &[PlayerId], sharing: &SharingSpec) -> Result<f64> {
    if worth <= 0.0 {
        return Ok(0.0);
    }
    Ok(nash_allocate(worth, members, sharing)?.chi)
}

/// True iff every coalition in `preferred` beats every overlapping coalition
/// in `others` in the common fear-of-ruin ordering of the modified game
/// (chi_preferred > chi_other). Returns the first violating pair otherwise.
pub fn check_incentive_subset(
    vtilde: impl Fn(&Coalition) -> f64,
    sharing: &SharingSpec,
    preferred: &[Coalition],
    others: &[Coalition],
) -> Result<(bool, Option<(Coalition, Coalition)>)> {
    for cp in preferred {
        let chi_p = chi_of(vtilde(cp), &cp.members(), sharing)?;
        for co in others {
            let overlap = co.members().iter().any(|m| cp.contains(*m));
            if !overlap {
                continue;
            }
            let chi_o = chi_of(vtilde(co), &co.members(), sharing)?;
            if !(chi_p > chi_o) {
                return Ok((false, Some((cp.clone(), co.clone()))));
            }
        }
    }
    Ok((true, None))
}

/// ln F_C(vtilde(C)) where F_C = lambda0. For identity and power utilities
/// this is exact in the log domain, so crushed off-peak worths cannot
/// underflow; custom utilities go through the numeric solver.
fn log_inverse_for(
    log_base_worth: f64,
    log_factor: f64,
    members: &[PlayerId],
    sharing: &SharingSpec,
) -> Result<f64> {
    match sharing {
        SharingSpec::Identity => Ok((members.len() as f64).ln() - log_base_worth - log_factor),
        SharingSpec::Power { .. } => {
            let total: f64 = members
                .iter()
                .map(|&m| match sharing.utility_of(m) {
                    Utility::Power { alpha } => alpha,
                    _ => 1.0,
                })
                .sum();
            Ok(total.ln() - log_base_worth - log_factor)
        }
        SharingSpec::Custom(_) => {
            let w = (log_base_worth + log_factor).exp();
            if w <= 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(nash_allocate(w, members, sharing)?.lambda0.ln())
        }
    }
}

/// A violated adjacent-cardinality pair, with witness coalitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakViolation {
    pub q: usize,
    pub q_adjacent: usize,
    pub worse: Coalition,
    pub better: Coalition,
}

/// Certifies single-peaked incentives (peak at `qhat`) over the coalitions of
/// one AP: on each side of the peak, the worst coalition of a size closer to
/// the peak must still beat the best coalition one step further out, in the
/// inverse fear-of-ruin order. `family` pairs each coalition with its base
/// worth v(C) > 0.
pub fn check_single_peaked(
    family: &[(Coalition, f64)],
    control: &ControlSpec,
    sharing: &SharingSpec,
    qhat: f64,
) -> Result<(bool, Option<PeakViolation>)> {
    // group (ln F, coalition) by |C|
    let mut sizes: Vec<usize> = family.iter().map(|(c, _)| c.size()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let logf = |c: &Coalition, v: f64| -> Result<f64> {
        if v <= 0.0 {
            return Err(Error::NonPositiveWorth(v));
        }
        log_inverse_for(v.ln(), control.log_factor(c), &c.members(), sharing)
    };

    let extreme = |size: usize, want_max: bool| -> Result<Option<(f64, &Coalition)>> {
        let mut best: Option<(f64, &Coalition)> = None;
        for (c, v) in family.iter().filter(|(c, _)| c.size() == size) {
            let f = logf(c, *v)?;
            let replace = match &best {
                None => true,
                Some((cur, _)) => {
                    if want_max {
                        f > *cur
                    } else {
                        f < *cur
                    }
                }
            };
            if replace {
                best = Some((f, c));
            }
        }
        Ok(best)
    };

    for &q in &sizes {
        if (q as f64) >= qhat {
            // worst of size q must beat the best of size q+1
            if let (Some((max_q, wc)), Some((min_up, bc))) =
                (extreme(q, true)?, extreme(q + 1, false)?)
            {
                if !(max_q < min_up) {
                    return Ok((
                        false,
                        Some(PeakViolation {
                            q,
                            q_adjacent: q + 1,
                            worse: wc.clone(),
                            better: bc.clone(),
                        }),
                    ));
                }
            }
        }
        if (q as f64) <= qhat && q >= 1 {
            if let (Some((max_q, wc)), Some((min_down, bc))) =
                (extreme(q, true)?, extreme(q - 1, false)?)
            {
                if !(max_q < min_down) {
                    return Ok((
                        false,
                        Some(PeakViolation {
                            q,
                            q_adjacent: q - 1,
                            worse: wc.clone(),
                            better: bc.clone(),
                        }),
                    ));
                }
            }
        }
    }
    Ok((true, None))
}

/// Largest Gaussian sigma (within `(0, sigma_hi]`, bisection to `tol`) for
/// which the single-peaked certificate holds at `qhat`. The target must be
/// reachable: `qhat` may not exceed the largest coalition size in the family.
pub fn max_sigma_single_peaked(
    family: &[(Coalition, f64)],
    sharing: &SharingSpec,
    qhat: f64,
    tol: f64,
    sigma_hi: f64,
) -> Result<f64> {
    let max_size = family.iter().map(|(c, _)| c.size()).max().unwrap_or(0);
    if qhat > max_size as f64 {
        return Err(Error::InfeasibleTarget { qhat, max_size });
    }
    let passes = |sigma: f64| -> Result<bool> {
        let spec = ControlSpec {
            per_ap: vec![TaxFamily::Gaussian { qhat, sigma }; ap_count(family)],
        };
        Ok(check_single_peaked(family, &spec, sharing, qhat)?.0)
    };
    if passes(sigma_hi)? {
        return Ok(sigma_hi);
    }
    let mut lo = tol;
    if !passes(lo)? {
        return Err(Error::NoFeasibleSigma { lo, hi: sigma_hi });
    }
    let mut hi = sigma_hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn ap_count(family: &[(Coalition, f64)]) -> usize {
    family
        .iter()
        .filter_map(|(c, _)| c.ap.map(|a| a.pos() + 1))
        .max()
        .unwrap_or(1)
}
