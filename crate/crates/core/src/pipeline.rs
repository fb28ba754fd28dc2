//! End-to-end orchestration: load balancing, control, bargained preferences,
//! matching, and MAC-level payoff recomputation, plus scenario generation and
//! seeded sweeps.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bargaining::{nash_allocate, SharingSpec};
use crate::config::{ControlConfig, QhatConfig, RunConfig};
use crate::control::ControlSpec;
use crate::error::{Error, Result};
use crate::loadbalance::{integer_caps, EqualSplit, QuotaPolicy};
use crate::mac80211::{coalition_worth, FlowSpec, MacModel};
use crate::matching::{
    bdaa, best_rssi, build_preferences, exhaustive_optimum, GameTable, Matching,
    PreferenceProfile, TraceEvent,
};
use crate::model::{Coalition, PlayerId, QuotaVector, RateMatrix, Scenario};

/// Where coalition worths come from.
#[derive(Debug, Clone)]
pub enum WorthModel {
    /// Saturation throughput of the cell under the governing MAC table.
    Mac { mac: MacModel, flows: FlowSpec },
    /// Explicit per-member values; worth is value times member count.
    Values { map: HashMap<(usize, u64), f64> },
}

impl WorthModel {
    pub fn base_worth(&self, rates: &RateMatrix, f: usize, users: &[usize]) -> Result<f64> {
        match self {
            WorthModel::Mac { mac, flows } => {
                let coalition =
                    Coalition::cell(f as u32 + 1, users.iter().map(|&w| w as u32 + 1));
                Ok(coalition_worth(&coalition, mac, rates, flows)?.v)
            }
            WorthModel::Values { map } => {
                let mask = users.iter().fold(0u64, |m, &w| m | 1 << w);
                let value = map.get(&(f, mask)).copied().unwrap_or(0.0);
                Ok(value * (users.len() + 1) as f64)
            }
        }
    }

    /// MAC-level per-member payoffs of a formed cell, under the unmodified
    /// worth.
    pub fn mac_shares(
        &self,
        rates: &RateMatrix,
        f: usize,
        users: &[usize],
    ) -> Result<BTreeMap<PlayerId, f64>> {
        let coalition = Coalition::cell(f as u32 + 1, users.iter().map(|&w| w as u32 + 1));
        match self {
            WorthModel::Mac { mac, flows } => {
                Ok(coalition_worth(&coalition, mac, rates, flows)?.per_member)
            }
            WorthModel::Values { .. } => {
                let v = self.base_worth(rates, f, users)?;
                let members = coalition.members();
                Ok(nash_allocate(v, &members, &SharingSpec::Identity)?.shares)
            }
        }
    }
}

/// Everything assembled for one scenario + config pair.
pub struct Pipeline {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub rates: RateMatrix,
    pub sharing: SharingSpec,
    pub control: ControlSpec,
    pub quotas: QuotaVector,
    /// Gaussian peak per AP (cell size), when control is on.
    pub control_targets: Option<Vec<f64>>,
    pub worth: WorthModel,
    pub table: GameTable,
    pub prefs: PreferenceProfile,
}

impl Pipeline {
    pub fn new(scenario: Scenario, config: RunConfig) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        let rates = scenario.rate_matrix()?;
        let sharing = config.sharing.to_spec()?;

        // step 1: load balancing
        let qhat = match &config.loadbalance.qhat_override {
            Some(q) => {
                if q.len() != scenario.n_aps() {
                    return Err(Error::InvalidConfig("qhat_override length != F".into()));
                }
                q.clone()
            }
            None => EqualSplit.quotas(&scenario, &rates),
        };
        let caps: Vec<u32> = match &config.quota.caps {
            Some(caps) => {
                if caps.len() != scenario.n_aps() {
                    return Err(Error::InvalidConfig("quota caps length != F".into()));
                }
                caps.clone()
            }
            None if scenario.aps.iter().all(|a| a.quota.is_some()) => {
                scenario.aps.iter().map(|a| a.quota.unwrap()).collect()
            }
            None if scenario.n_users() >= 3 => integer_caps(&qhat, scenario.n_users())?,
            // fewer than 3 users cannot satisfy the regular-range clamp;
            // fall back to admitting everyone
            None => vec![scenario.n_users().max(1) as u32; scenario.n_aps()],
        };
        let quotas = QuotaVector { qhat: qhat.clone(), caps };

        // step 2: control transformation
        let (control, control_targets) = match &config.control {
            ControlConfig::None => (ControlSpec::none(scenario.n_aps()), None),
            ControlConfig::Gaussian { sigma, qhat: qcfg } => {
                let sigmas = sigma.resolve(scenario.n_aps(), "sigma")?;
                let targets: Vec<f64> = match qcfg {
                    QhatConfig::Explicit(t) => {
                        if t.len() != scenario.n_aps() {
                            return Err(Error::InvalidConfig("control qhat length != F".into()));
                        }
                        t.clone()
                    }
                    // the AP itself occupies one seat of the target cell
                    QhatConfig::Auto(_) => qhat.iter().map(|q| q + 1.0).collect(),
                };
                (ControlSpec::gaussian(&targets, &sigmas)?, Some(targets))
            }
        };

        // worth source
        let worth = match &scenario.coalition_values {
            Some(values) => {
                let mut map = HashMap::new();
                for cv in values {
                    let mask = cv.users.iter().fold(0u64, |m, &u| m | 1 << (u - 1));
                    map.insert((cv.ap as usize - 1, mask), cv.value);
                }
                WorthModel::Values { map }
            }
            None => {
                let mac = scenario.mac.clone().unwrap_or_else(|| {
                    config.mac.to_model().expect("validated above")
                });
                let mut mac = mac;
                if mac.beta_fixed.is_none() {
                    mac.beta_fixed = config.mac.beta_fixed;
                }
                mac.validate()?;
                WorthModel::Mac { mac, flows: FlowSpec::uniform() }
            }
        };

        // step 3 prep: the materialized game and preference lists
        let table = GameTable::build(
            scenario.n_users(),
            scenario.n_aps(),
            &quotas.caps,
            |w, f| rates.rate(w, f) > 0.0,
            |f, users| worth.base_worth(&rates, f, users),
            &control,
            &sharing,
        )?;
        let prefs = build_preferences(&table);

        Ok(Pipeline {
            scenario,
            config,
            rates,
            sharing,
            control,
            quotas,
            control_targets,
            worth,
            table,
            prefs,
        })
    }

    /// The full mechanism: match, then recompute MAC-level payoffs.
    pub fn run(&self) -> Result<RunOutput> {
        let start = Instant::now();
        let outcome = bdaa(&self.table, &self.prefs)?;
        let mut report =
            self.report_for(&outcome.matching, outcome.proposals)?;
        report.wall_time = start.elapsed();
        Ok(RunOutput { report, trace: outcome.trace })
    }

    /// Builds a report for any matching (quota-violating baselines included:
    /// worths are recomputed directly, not looked up).
    pub fn report_for(&self, matching: &Matching, proposals: u64) -> Result<RunReport> {
        let mut cells = Vec::new();
        let mut welfare_modified = 0.0;
        let mut welfare_mac = 0.0;
        for f in 0..self.scenario.n_aps() {
            let users = &matching.mu_ap[f];
            if users.is_empty() {
                continue;
            }
            let coalition = Coalition::cell(f as u32 + 1, users.iter().map(|&w| w as u32 + 1));
            let v = self.worth.base_worth(&self.rates, f, users)?;
            let factor = self.control.factor(&coalition);
            let v_tilde = factor * v;
            let shares_modified = nash_allocate(v_tilde, &coalition.members(), &self.sharing)?.shares;
            let shares_mac = self.worth.mac_shares(&self.rates, f, users)?;
            welfare_modified += v_tilde;
            welfare_mac += v;
            cells.push(CellReport {
                ap: PlayerId::ap(f as u32 + 1),
                users: users.iter().map(|&w| PlayerId::user(w as u32 + 1)).collect(),
                v,
                v_tilde,
                shares_modified,
                shares_mac,
            });
        }
        let unmatched: Vec<PlayerId> =
            matching.unmatched().into_iter().map(|w| PlayerId::user(w as u32 + 1)).collect();
        let n_users = self.scenario.n_users();
        let unemployment_rate = if n_users == 0 {
            0.0
        } else {
            unmatched.len() as f64 / n_users as f64
        };
        Ok(RunReport {
            cells,
            unmatched,
            metrics: Metrics {
                unemployment_rate,
                welfare_modified_bps: welfare_modified,
                welfare_mac_bps: welfare_mac,
                proposal_count: proposals,
                qhat: self.quotas.qhat.clone(),
                caps: self.quotas.caps.clone(),
                control_targets: self.control_targets.clone(),
            },
            wall_time: Duration::default(),
        })
    }
}

/// One formed cell in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub ap: PlayerId,
    pub users: Vec<PlayerId>,
    /// Unmodified worth, bit/s.
    pub v: f64,
    /// Controlled worth, bit/s.
    pub v_tilde: f64,
    pub shares_modified: BTreeMap<PlayerId, f64>,
    pub shares_mac: BTreeMap<PlayerId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub unemployment_rate: f64,
    pub welfare_modified_bps: f64,
    pub welfare_mac_bps: f64,
    pub proposal_count: u64,
    pub qhat: Vec<f64>,
    pub caps: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_targets: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub cells: Vec<CellReport>,
    pub unmatched: Vec<PlayerId>,
    pub metrics: Metrics,
    /// Not serialized: reports must be byte-identical across identical runs.
    #[serde(skip, default)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<TraceEvent>,
}

pub fn run_pipeline(scenario: Scenario, config: RunConfig) -> Result<RunOutput> {
    Pipeline::new(scenario, config)?.run()
}

/// AP placement for generated scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApLayout {
    /// Uniform at random, like the users.
    Random,
    /// Five fixed positions on a quarter/center grid (requires 5 APs).
    Grid5,
}

/// Seeded uniform scenario. Identical seeds give byte-identical scenarios.
pub fn generate_random(
    n_users: usize,
    n_aps: usize,
    area_m: f64,
    seed: u64,
    layout: ApLayout,
) -> Result<Scenario> {
    if !(area_m > 0.0) {
        return Err(Error::InvalidScenario(format!("area must be positive, got {area_m}")));
    }
    if layout == ApLayout::Grid5 && n_aps != 5 {
        return Err(Error::InvalidScenario("the grid layout places exactly 5 APs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coord = |rng: &mut ChaCha8Rng| -> f64 {
        // two decimals keep the JSON stable and readable
        (rng.random_range(0.0..area_m) * 100.0).round() / 100.0
    };
    let aps = match layout {
        ApLayout::Grid5 => [(0.25, 0.25), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75), (0.75, 0.75)]
            .iter()
            .enumerate()
            .map(|(i, &(fx, fy))| crate::model::ApNode {
                id: i as u32 + 1,
                x: fx * area_m,
                y: fy * area_m,
                quota: None,
            })
            .collect(),
        ApLayout::Random => (1..=n_aps as u32)
            .map(|id| {
                let (x, y) = (coord(&mut rng), coord(&mut rng));
                crate::model::ApNode { id, x, y, quota: None }
            })
            .collect(),
    };
    let users = (1..=n_users as u32)
        .map(|id| {
            let (x, y) = (coord(&mut rng), coord(&mut rng));
            crate::model::UserNode { id, x, y }
        })
        .collect();
    let scenario = Scenario {
        users,
        aps,
        rings: None,
        rates: None,
        coalition_values: None,
        mac: None,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepParams {
    pub n_users: usize,
    pub n_aps: usize,
    pub area_m: f64,
    pub layout: ApLayout,
    pub runs: usize,
    pub base_seed: u64,
    /// Compare against the exhaustive optimum when the instance allows it.
    pub with_optimum: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: usize,
    pub seed: u64,
    pub unemployment_rate: f64,
    pub welfare_modified_bps: f64,
    pub welfare_mac_bps: f64,
    pub proposals: u64,
    /// BDAA modified welfare over the exhaustive modified optimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_modified_opt: Option<f64>,
    /// BDAA MAC welfare over the MAC welfare of the modified-optimal matching.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_mac_opt: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mean: SweepStats,
    pub std: SweepStats,
    /// Set when the optimum comparison was skipped for size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepStats {
    pub unemployment_rate: f64,
    pub welfare_modified_bps: f64,
    pub welfare_mac_bps: f64,
    pub proposals: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_modified_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_mac_opt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

pub fn sweep(params: &SweepParams, config: &RunConfig) -> Result<SweepResult> {
    if params.runs == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one run".into()));
    }
    let mut rows = Vec::with_capacity(params.runs);
    let mut warning = None;
    for k in 0..params.runs {
        let seed = params.base_seed + k as u64;
        let scenario =
            generate_random(params.n_users, params.n_aps, params.area_m, seed, params.layout)?;
        let pipeline = Pipeline::new(scenario, config.clone())?;
        let start = Instant::now();
        let outcome = bdaa(&pipeline.table, &pipeline.prefs)?;
        let wall = start.elapsed();
        let report = pipeline.report_for(&outcome.matching, outcome.proposals)?;
        let (mut ratio_modified, mut ratio_mac) = (None, None);
        if params.with_optimum {
            if params.n_users <= 12 {
                let (opt_matching, opt_mod) = exhaustive_optimum(&pipeline.table, true)?;
                let opt_report = pipeline.report_for(&opt_matching, 0)?;
                if opt_mod > 0.0 {
                    ratio_modified = Some(report.metrics.welfare_modified_bps / opt_mod);
                }
                if opt_report.metrics.welfare_mac_bps > 0.0 {
                    ratio_mac = Some(
                        report.metrics.welfare_mac_bps / opt_report.metrics.welfare_mac_bps,
                    );
                }
            } else if warning.is_none() {
                warning = Some(format!(
                    "optimum comparison skipped: {} users exceed the exhaustive limit of 12",
                    params.n_users
                ));
            }
        }
        rows.push(SweepRow {
            run: k + 1,
            seed,
            unemployment_rate: report.metrics.unemployment_rate,
            welfare_modified_bps: report.metrics.welfare_modified_bps,
            welfare_mac_bps: report.metrics.welfare_mac_bps,
            proposals: report.metrics.proposal_count,
            ratio_modified_opt: ratio_modified,
            ratio_mac_opt: ratio_mac,
            wall_ms: wall.as_secs_f64() * 1e3,
        });
    }
    let summary = summarize(&rows, warning);
    Ok(SweepResult { rows, summary })
}

fn summarize(rows: &[SweepRow], warning: Option<String>) -> SweepSummary {
    fn mean_std(values: &[f64]) -> (f64, f64) {
        if values.is_empty() {
            return (0.0, 0.0);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
    let pick = |f: &dyn Fn(&SweepRow) -> f64| -> (f64, f64) {
        mean_std(&rows.iter().map(f).collect::<Vec<_>>())
    };
    let opt = |f: &dyn Fn(&SweepRow) -> Option<f64>| -> (Option<f64>, Option<f64>) {
        let vals: Vec<f64> = rows.iter().filter_map(f).collect();
        if vals.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&vals);
            (Some(m), Some(s))
        }
    };
    let (u_m, u_s) = pick(&|r| r.unemployment_rate);
    let (wm_m, wm_s) = pick(&|r| r.welfare_modified_bps);
    let (wc_m, wc_s) = pick(&|r| r.welfare_mac_bps);
    let (p_m, p_s) = pick(&|r| r.proposals as f64);
    let (rm_m, rm_s) = opt(&|r| r.ratio_modified_opt);
    let (rc_m, rc_s) = opt(&|r| r.ratio_mac_opt);
    SweepSummary {
        mean: SweepStats {
            unemployment_rate: u_m,
            welfare_modified_bps: wm_m,
            welfare_mac_bps: wc_m,
            proposals: p_m,
            ratio_modified_opt: rm_m,
            ratio_mac_opt: rc_m,
        },
        std: SweepStats {
            unemployment_rate: u_s,
            welfare_modified_bps: wm_s,
            welfare_mac_bps: wc_s,
            proposals: p_s,
            ratio_modified_opt: rm_s,
            ratio_mac_opt: rc_s,
        },
        warning,
    }
}

/// CSV with one row per run plus `mean` and `std` summary rows.
pub fn sweep_to_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "run,seed,unemployment_rate,welfare_modified_bps,welfare_mac_bps,proposals,ratio_modified_opt,ratio_mac_opt,wall_ms\n",
    );
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.run,
            r.seed,
            r.unemployment_rate,
            r.welfare_modified_bps,
            r.welfare_mac_bps,
            r.proposals,
            fmt_opt(r.ratio_modified_opt),
            fmt_opt(r.ratio_mac_opt),
            r.wall_ms,
        ));
    }
    for (label, s) in [("mean", &result.summary.mean), ("std", &result.summary.std)] {
        out.push_str(&format!(
            "{},,{},{},{},{},{},{},\n",
            label,
            s.unemployment_rate,
            s.welfare_modified_bps,
            s.welfare_mac_bps,
            s.proposals,
            fmt_opt(s.ratio_modified_opt),
            fmt_opt(s.ratio_mac_opt),
        ));
    }
    out
}

/// BDAA next to the nearest-AP baseline and, at desk scale, the exhaustive
/// optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub bdaa: RunReport,
    pub best_rssi: RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum_modified: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn compare(scenario: Scenario, config: RunConfig) -> Result<CompareReport> {
    let pipeline = Pipeline::new(scenario, config)?;
    let outcome = bdaa(&pipeline.table, &pipeline.prefs)?;
    let bdaa_report = pipeline.report_for(&outcome.matching, outcome.proposals)?;
    let rssi = best_rssi(&pipeline.scenario, &pipeline.rates);
    let rssi_report = pipeline.report_for(&rssi, 0)?;
    let (optimum, warning) = if pipeline.scenario.n_users() <= 12 {
        let (m, _) = exhaustive_optimum(&pipeline.table, true)?;
        (Some(pipeline.report_for(&m, 0)?), None)
    } else {
        (
            None,
            Some(format!(
                "optimum comparison skipped: {} users exceed the exhaustive limit of 12",
                pipeline.scenario.n_users()
            )),
        )
    };
    Ok(CompareReport {
        bdaa: bdaa_report,
        best_rssi: rssi_report,
        optimum_modified: optimum,
        warning,
    })
}
