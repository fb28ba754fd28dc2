//! Load balancing: fractional per-AP user-mass targets and integer caps.
//!
//! The shipped policy splits every covered user's unit mass evenly among its
//! covering APs, the symmetric bargaining split of the contested share. Other
//! policies plug in through the trait.

use crate::error::{Error, Result};
use crate::model::{QuotaVector, RateMatrix, Scenario};

pub trait QuotaPolicy {
    fn quotas(&self, scenario: &Scenario, rates: &RateMatrix) -> Vec<f64>;
}

/// Each user covered by k APs contributes 1/k to each of them.
#[derive(Debug, Clone, Copy, Default)]
pub struct EqualSplit;

impl QuotaPolicy for EqualSplit {
    fn quotas(&self, scenario: &Scenario, rates: &RateMatrix) -> Vec<f64> {
        let mut qhat = vec![0.0; scenario.n_aps()];
        for w in 0..scenario.n_users() {
            let covering: Vec<usize> =
                (0..scenario.n_aps()).filter(|&f| rates.rate(w, f) > 0.0).collect();
            if covering.is_empty() {
                continue;
            }
            let share = 1.0 / covering.len() as f64;
            for f in covering {
                qhat[f] += share;
            }
        }
        qhat
    }
}

/// Fractional targets from the policy; integer caps via `integer_caps`.
pub fn compute_quotas(
    scenario: &Scenario,
    rates: &RateMatrix,
    policy: &dyn QuotaPolicy,
) -> Result<QuotaVector> {
    let qhat = policy.quotas(scenario, rates);
    let caps = integer_caps(&qhat, scenario.n_users())?;
    Ok(QuotaVector { qhat, caps })
}

/// ceil(qhat) clamped to {2, ..., W-1}, the range that keeps the coalition
/// family regular.
pub fn integer_caps(qhat: &[f64], n_users: usize) -> Result<Vec<u32>> {
    if n_users < 3 {
        return Err(Error::TooFewUsers(n_users));
    }
    Ok(qhat
        .iter()
        .map(|&q| (q.ceil() as i64).clamp(2, n_users as i64 - 1) as u32)
        .collect())
}
