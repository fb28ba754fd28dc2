//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured numbers.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use apmatch_core::bargaining::{
    fear_of_ruin, nash_allocate, nash_allocate_solver, SharingSpec, Utility,
};
use apmatch_core::config::{ControlConfig, PerApValue, QhatConfig, RunConfig, SharingConfig};
use apmatch_core::control::{check_single_peaked, max_sigma_single_peaked, ControlSpec};
use apmatch_core::matching::{
    bdaa, best_rssi, build_preferences, exhaustive_optimum, GameTable, TraceEvent,
};
use apmatch_core::model::{PlayerId, Scenario};
use apmatch_core::pipeline::{generate_random, run_pipeline, ApLayout, Pipeline};
use apmatch_core::stability::{
    check_substitutable, choice_set, find_core, group_list_of, is_responsive,
};

fn pass(criterion: u32, name: &str, detail: &str) {
    println!("criterion {criterion:02} ({name}): PASS — {detail}");
}

fn scenario_from_json(json: &str) -> Scenario {
    let s: Scenario = serde_json::from_str(json).expect("fixture parses");
    s.validate().expect("fixture valid");
    s
}

fn config_no_control() -> RunConfig {
    RunConfig { control: ControlConfig::None, ..RunConfig::default() }
}

fn gaussian_config(sigma: f64) -> RunConfig {
    RunConfig {
        control: ControlConfig::Gaussian {
            sigma: PerApValue::Scalar(sigma),
            qhat: QhatConfig::default(),
        },
        ..RunConfig::default()
    }
}

// ---------------------------------------------------------------------------
// criterion 1: the worked two-user/three-AP trace
// ---------------------------------------------------------------------------

const WORKED_EXAMPLE: &str = r#"{
  "users": [{"id": 1, "x": 0.0, "y": 0.0}, {"id": 2, "x": 10.0, "y": 0.0}],
  "aps": [
    {"id": 1, "x": 0.0, "y": 5.0, "quota": 2},
    {"id": 2, "x": 5.0, "y": 5.0, "quota": 1},
    {"id": 3, "x": 10.0, "y": 5.0, "quota": 1}
  ],
  "rates": [[1e6, 1e6, 0.0], [1e6, 0.0, 1e6]],
  "coalition_values": [
    {"ap": 1, "users": [1, 2], "value": 10.0},
    {"ap": 1, "users": [1], "value": 0.5},
    {"ap": 1, "users": [2], "value": 0.5},
    {"ap": 2, "users": [1], "value": 1.0},
    {"ap": 3, "users": [2], "value": 100.0}
  ]
}"#;

#[test]
fn criterion_01_worked_example_golden_trace() {
    let scenario = scenario_from_json(WORKED_EXAMPLE);
    let pipeline = Pipeline::new(scenario, config_no_control()).unwrap();

    let start = Instant::now();
    let outcome = bdaa(&pipeline.table, &pipeline.prefs).unwrap();
    let elapsed = start.elapsed();

    use TraceEvent::*;
    let s = |x: &str| x.to_string();
    let expected = vec![
        Round { n: 1 },
        Propose { user: s("w1"), ap: s("f1") },
        Propose { user: s("w2"), ap: s("f3") },
        Counter { ap: s("f1"), users: vec![s("w1")], payoffs: vec![0.5] },
        Counter { ap: s("f3"), users: vec![s("w2")], payoffs: vec![100.0] },
        Reject { user: s("w1"), ap: s("f1") },
        Accept { user: s("w2"), ap: s("f3") },
        Engage { ap: s("f3"), users: vec![s("w2")] },
        Counter { ap: s("f1"), users: vec![s("w1")], payoffs: vec![0.5] },
        Reject { user: s("w1"), ap: s("f1") },
        Round { n: 2 },
        Propose { user: s("w1"), ap: s("f2") },
        Counter { ap: s("f1"), users: vec![s("w1")], payoffs: vec![0.5] },
        Counter { ap: s("f2"), users: vec![s("w1")], payoffs: vec![1.0] },
        Reject { user: s("w1"), ap: s("f1") },
        Accept { user: s("w1"), ap: s("f2") },
        Engage { ap: s("f2"), users: vec![s("w1")] },
        Prune { ap: s("f1"), removed: vec![s("w1")] },
    ];
    assert_eq!(outcome.trace, expected, "event sequence differs");

    assert_eq!(outcome.matching.mu_user, vec![Some(1), Some(2)]);
    let report = pipeline.report_for(&outcome.matching, outcome.proposals).unwrap();
    assert_eq!(report.metrics.unemployment_rate, 0.0);
    let w1 = report.cells.iter().find(|c| c.ap == PlayerId::ap(2)).unwrap();
    let w2 = report.cells.iter().find(|c| c.ap == PlayerId::ap(3)).unwrap();
    assert!((w1.shares_modified[&PlayerId::user(1)] - 1.0).abs() < 1e-12);
    assert!((w2.shares_modified[&PlayerId::user(2)] - 100.0).abs() < 1e-12);
    assert!(elapsed.as_micros() < 1000, "matcher took {elapsed:?}, budget 1 ms");

    pass(
        1,
        "worked-example golden trace",
        &format!(
            "18 events exact, matching {{(f2,w1),(f3,w2)}}, payoffs (1, 100), {} proposals, {:?}",
            outcome.proposals, elapsed
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 2: three-user preference fixture and the substitutability failure
// ---------------------------------------------------------------------------

const THREE_USER_FIXTURE: &str = r#"{
  "users": [
    {"id": 1, "x": 0.0, "y": 0.0},
    {"id": 2, "x": 1.0, "y": 0.0},
    {"id": 3, "x": 2.0, "y": 0.0}
  ],
  "aps": [
    {"id": 1, "x": 0.0, "y": 1.0, "quota": 2},
    {"id": 2, "x": 1.0, "y": 1.0, "quota": 2}
  ],
  "rates": [[300e6, 54e6], [1e6, 54e6], [54e6, 1e6]]
}"#;

#[test]
fn criterion_02_preference_fixture_and_substitutability() {
    let scenario = scenario_from_json(THREE_USER_FIXTURE);

    // uncontrolled: saturated equal-packet sharing
    let uncontrolled = Pipeline::new(scenario.clone(), config_no_control()).unwrap();
    let w1 = PlayerId::user(1);
    let listed: Vec<String> =
        apmatch_core::matching::group_preference_list(&uncontrolled.table, w1)
            .into_iter()
            .map(|i| uncontrolled.table.entries[i].coalition.to_string())
            .collect();
    let expected = vec![
        "{f1,w1}",
        "{f2,w1}",
        "{f1,w1,w3}",
        "{f2,w1,w2}",
        "{f1,w1,w2}",
        "{f2,w1,w3}",
    ];
    assert_eq!(listed, expected, "uncontrolled preference order differs");

    // the uncontrolled list is not responsive to any individual order
    let groups = group_list_of(&uncontrolled.table, w1);
    let (responsive, _) = is_responsive(&groups);
    assert!(!responsive, "uncontrolled list must not be responsive");

    // controlled toward three-member cells: the order flips as published
    let mut config = gaussian_config(0.3);
    config.control = ControlConfig::Gaussian {
        sigma: PerApValue::Scalar(0.3),
        qhat: QhatConfig::Explicit(vec![3.0, 3.0]),
    };
    let controlled = Pipeline::new(scenario, config).unwrap();
    let listed: Vec<String> =
        apmatch_core::matching::group_preference_list(&controlled.table, w1)
            .into_iter()
            .map(|i| controlled.table.entries[i].coalition.to_string())
            .collect();
    let expected_controlled = vec![
        "{f1,w1,w3}",
        "{f2,w1,w2}",
        "{f1,w1,w2}",
        "{f2,w1,w3}",
        "{f1,w1}",
        "{f2,w1}",
    ];
    assert_eq!(listed, expected_controlled, "controlled preference order differs");

    // substitutability fails on S = {w2, w3, f1, f2} exactly as published:
    // Ch(S) = {w3, f1} but Ch(S \ w3) = {w2, f2}
    let groups = group_list_of(&controlled.table, w1);
    let s: BTreeSet<PlayerId> =
        [PlayerId::user(2), PlayerId::user(3), PlayerId::ap(1), PlayerId::ap(2)]
            .into_iter()
            .collect();
    let ch_s = choice_set(&groups, &s);
    let expected_ch: BTreeSet<PlayerId> = [PlayerId::user(3), PlayerId::ap(1)].into_iter().collect();
    assert_eq!(ch_s, expected_ch);
    let mut s_minus = s.clone();
    s_minus.remove(&PlayerId::user(3));
    let ch_minus = choice_set(&groups, &s_minus);
    let expected_minus: BTreeSet<PlayerId> =
        [PlayerId::user(2), PlayerId::ap(2)].into_iter().collect();
    assert_eq!(ch_minus, expected_minus);
    assert!(
        ch_s.contains(&PlayerId::ap(1)) && !ch_minus.contains(&PlayerId::ap(1)),
        "the published choice failure must hold"
    );
    let (substitutable, witness) = check_substitutable(&groups);
    assert!(!substitutable, "controlled preferences must not be substitutable");
    assert!(witness.is_some());

    pass(
        2,
        "preference fixture",
        "uncontrolled order exact, not responsive; controlled order exact; Ch failure on {w2,w3,f1,f2} confirmed",
    );
}

// ---------------------------------------------------------------------------
// criterion 3: matcher output equals the unique core matching, 500 instances
// ---------------------------------------------------------------------------

struct RandomInstance {
    table: GameTable,
    n_users: usize,
    n_aps: usize,
}

fn random_small_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ seed);
    let n_users = rng.random_range(3..=6usize);
    let n_aps = rng.random_range(2..=3usize);
    let scenario =
        generate_random(n_users, n_aps, 160.0, seed, ApLayout::Random).unwrap();
    let rates = scenario.rate_matrix().unwrap();
    let caps: Vec<u32> =
        (0..n_aps).map(|_| rng.random_range(2..=(n_users as u32 - 1))).collect();
    let sharing = match seed % 3 {
        0 => SharingSpec::Identity,
        1 => {
            let mut alphas = std::collections::BTreeMap::new();
            for w in 1..=n_users as u32 {
                alphas.insert(PlayerId::user(w), rng.random_range(0.3..2.5));
            }
            for f in 1..=n_aps as u32 {
                alphas.insert(PlayerId::ap(f), rng.random_range(0.3..2.5));
            }
            SharingSpec::Power { alphas }
        }
        _ => {
            if seed % 9 == 2 {
                SharingSpec::Custom(Utility::log1p())
            } else {
                SharingSpec::Identity
            }
        }
    };
    let control = if seed % 2 == 0 {
        ControlSpec::none(n_aps)
    } else {
        let sigma: Vec<f64> = (0..n_aps).map(|_| rng.random_range(0.15..0.8)).collect();
        let qhat: Vec<f64> =
            (0..n_aps).map(|_| rng.random_range(2.0..(n_users as f64 + 1.0))).collect();
        ControlSpec::gaussian(&qhat, &sigma).unwrap()
    };
    let mac = apmatch_core::mac80211::MacModel::default();
    let flows = apmatch_core::mac80211::FlowSpec::uniform();
    let table = GameTable::build(
        n_users,
        n_aps,
        &caps,
        |w, f| rates.rate(w, f) > 0.0,
        |f, users| {
            let c = apmatch_core::model::Coalition::cell(
                f as u32 + 1,
                users.iter().map(|&w| w as u32 + 1),
            );
            Ok(apmatch_core::mac80211::coalition_worth(&c, &mac, &rates, &flows)?.v)
        },
        &control,
        &sharing,
    )
    .unwrap();
    RandomInstance { table, n_users, n_aps }
}

#[test]
fn criterion_03_core_equivalence_500_instances() {
    let start = Instant::now();
    let mut proposal_stats: Vec<(u64, usize, usize)> = Vec::new();
    for seed in 0..500u64 {
        let inst = random_small_instance(seed);
        let prefs = build_preferences(&inst.table);
        let outcome = bdaa(&inst.table, &prefs).unwrap();
        assert!(outcome.matching.is_valid(&inst.table.quotas), "seed {seed}: invalid matching");
        let core = find_core(&inst.table, true).unwrap();
        assert_eq!(core.len(), 1, "seed {seed}: weak core is not a singleton");
        assert_eq!(core[0], outcome.matching, "seed {seed}: matcher left the core");
        let bound = (inst.n_aps as u64).pow(3) * (inst.n_users as u64).pow(2);
        assert!(
            outcome.proposals <= bound,
            "seed {seed}: {} proposals over the bound {bound}",
            outcome.proposals
        );
        proposal_stats.push((outcome.proposals, inst.n_users, inst.n_aps));
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "suite took {elapsed:?}, budget 60 s");
    let max_props = proposal_stats.iter().map(|an| an.0).max().unwrap();
    pass(
        3,
        "core equivalence",
        &format!("500/500 instances matched the unique weak-core matching in {elapsed:?} (max {max_props} proposals)"),
    );
}

// ---------------------------------------------------------------------------
// criterion 4: bargaining numerics
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_bargaining_numerics() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    // fear-of-ruin equality across members, 1000 draws
    for k in 0..1000u32 {
        let n = rng.random_range(2..=5usize);
        let members: Vec<PlayerId> = (1..=n as u32).map(PlayerId::user).collect();
        let worth = 10f64.powf(rng.random_range(-3.0..9.0));
        let sharing = match k % 4 {
            0 => SharingSpec::Identity,
            1 => {
                let alphas = members
                    .iter()
                    .map(|&m| (m, rng.random_range(0.3..3.0)))
                    .collect();
                SharingSpec::Power { alphas }
            }
            2 => SharingSpec::Custom(Utility::log1p()),
            _ => SharingSpec::Custom(Utility::sqrt1p()),
        };
        let out = nash_allocate(worth, &members, &sharing).unwrap();
        for &m in &members {
            let chi = fear_of_ruin(out.shares[&m], &sharing.utility_of(m)).unwrap();
            let rel = (chi - out.chi).abs() / out.chi;
            assert!(rel < 1e-9, "draw {k}: FoR off by {rel}");
        }
        let total: f64 = out.shares.values().sum();
        assert!((total - worth).abs() / worth < 1e-9);
    }

    // power closed form against the bisection solver
    for k in 0..200u32 {
        let n = rng.random_range(2..=4usize);
        let worth = 10f64.powf(rng.random_range(-2.0..8.0));
        let utilities: Vec<(PlayerId, Utility, f64)> = (1..=n as u32)
            .map(|w| {
                (PlayerId::user(w), Utility::Power { alpha: rng.random_range(0.3..3.0) }, 0.0)
            })
            .collect();
        let alphas: std::collections::BTreeMap<PlayerId, f64> = utilities
            .iter()
            .map(|(m, u, _)| match u {
                Utility::Power { alpha } => (*m, *alpha),
                _ => unreachable!(),
            })
            .collect();
        let members: Vec<PlayerId> = utilities.iter().map(|(m, _, _)| *m).collect();
        let closed = nash_allocate(worth, &members, &SharingSpec::Power { alphas }).unwrap();
        let solved = nash_allocate_solver(worth, &utilities).unwrap();
        for &m in &members {
            let rel = (closed.shares[&m] - solved.shares[&m]).abs() / closed.shares[&m];
            assert!(rel < 1e-9, "draw {k}: closed form vs solver off by {rel}");
        }
    }

    // dense grid oracle on three-member custom cases
    let cases: Vec<(f64, Vec<Utility>)> = vec![
        (9.0, vec![Utility::log1p(), Utility::log1p(), Utility::log1p()]),
        (5.0, vec![Utility::sqrt1p(), Utility::sqrt1p(), Utility::sqrt1p()]),
        (12.0, vec![Utility::log1p(), Utility::sqrt1p(), Utility::log1p()]),
    ];
    for (worth, us) in cases {
        let utilities: Vec<(PlayerId, Utility, f64)> = us
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, u)| (PlayerId::user(i as u32 + 1), u, 0.0))
            .collect();
        let solved = nash_allocate_solver(worth, &utilities).unwrap();
        let step = worth / 2000.0;
        let mut best = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
        let mut i = 1usize;
        while (i as f64) * step < worth {
            let x1 = i as f64 * step;
            let mut j = 1usize;
            while x1 + (j as f64) * step < worth {
                let x2 = j as f64 * step;
                let x3 = worth - x1 - x2;
                let p = utilities[0].1.u(x1).ln()
                    + utilities[1].1.u(x2).ln()
                    + utilities[2].1.u(x3).ln();
                if p > best.0 {
                    best = (p, x1, x2);
                }
                j += 1;
            }
            i += 1;
        }
        let s1 = solved.shares[&PlayerId::user(1)];
        let s2 = solved.shares[&PlayerId::user(2)];
        assert!((best.1 - s1).abs() <= 2.0 * step, "grid x1 {} vs solver {s1}", best.1);
        assert!((best.2 - s2).abs() <= 2.0 * step, "grid x2 {} vs solver {s2}", best.2);
    }

    pass(
        4,
        "bargaining numerics",
        "FoR equality < 1e-9 on 1000 draws; closed form vs solver < 1e-9 on 200 draws; 3 grid oracles within 2 steps",
    );
}

// ---------------------------------------------------------------------------
// criterion 5: uncontrolled games match one-to-one
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_uncontrolled_one_to_one() {
    // full coverage: every user reaches every AP on the compact grid
    let mut max_props = 0u64;
    for seed in 100..200u64 {
        let scenario = generate_random(20, 5, 100.0, seed, ApLayout::Grid5).unwrap();
        let rates = scenario.rate_matrix().unwrap();
        for w in 0..20 {
            for f in 0..5 {
                assert!(rates.rate(w, f) > 0.0, "fixture must have full coverage");
            }
        }
        let out = run_pipeline(scenario, config_no_control()).unwrap();
        assert_eq!(out.report.cells.len(), 5, "seed {seed}: some AP stayed alone");
        for cell in &out.report.cells {
            assert_eq!(
                cell.users.len(),
                1,
                "seed {seed}: cell {} has {} users",
                cell.ap,
                cell.users.len()
            );
        }
        assert!((out.report.metrics.unemployment_rate - 0.75).abs() < 1e-12);
        let bound = 125u64 * 400u64;
        assert!(out.report.metrics.proposal_count <= bound);
        max_props = max_props.max(out.report.metrics.proposal_count);
    }
    pass(
        5,
        "uncontrolled one-to-one",
        &format!("100/100 seeded instances formed only single-user cells (max {max_props} proposals)"),
    );
}

// ---------------------------------------------------------------------------
// criterion 6: control efficacy at sigma 0.2
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_control_efficacy() {
    let scenario = generate_random(20, 5, 200.0, 1, ApLayout::Grid5).unwrap();
    let pipeline = Pipeline::new(scenario, gaussian_config(0.2)).unwrap();
    let outcome = bdaa(&pipeline.table, &pipeline.prefs).unwrap();
    let report = pipeline.report_for(&outcome.matching, outcome.proposals).unwrap();

    assert!(
        report.metrics.unemployment_rate <= 0.10,
        "unemployment {} above 10%",
        report.metrics.unemployment_rate
    );
    let caps = &pipeline.quotas.caps;
    let mut sizes = Vec::new();
    for cell in &report.cells {
        let f = cell.ap.pos();
        let target = caps[f] as i64;
        let got = cell.users.len() as i64;
        assert!(
            (got - target).abs() <= 1,
            "cell {} holds {got} users, target {target} ± 1",
            cell.ap
        );
        sizes.push(got);
    }
    let bound = 125u64 * 400u64;
    assert!(report.metrics.proposal_count <= bound);

    // certify single-peakedness per AP at the sigma the search returns
    let targets = pipeline.control_targets.clone().unwrap();
    let mut sigmas = Vec::new();
    for f in 0..5usize {
        let family: Vec<(apmatch_core::model::Coalition, f64)> = pipeline.table.by_ap[f]
            .iter()
            .map(|&i| {
                let e = &pipeline.table.entries[i];
                (e.coalition.clone(), e.v_base)
            })
            .collect();
        let sigma_star = max_sigma_single_peaked(
            &family,
            &SharingSpec::Identity,
            targets[f],
            1e-3,
            2.0,
        )
        .unwrap();
        let spec = ControlSpec::gaussian(&vec![targets[f]; 5], &vec![sigma_star; 5]).unwrap();
        let (certified, violation) =
            check_single_peaked(&family, &spec, &SharingSpec::Identity, targets[f]).unwrap();
        assert!(certified, "f{}: sigma* {sigma_star} not certified: {violation:?}", f + 1);
        sigmas.push(sigma_star);
    }

    pass(
        6,
        "control efficacy",
        &format!(
            "unemployment {:.0}%, cell user-counts {:?} within ±1 of caps {:?}, sigma* = {:?}",
            report.metrics.unemployment_rate * 100.0,
            sizes,
            caps,
            sigmas.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 7: proposal-count bounds
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_proposal_bounds() {
    let mut total = 0usize;
    let mut within_linear = 0usize;
    let mut record = |proposals: u64, w: usize, f: usize| {
        let hard = (f as u64).pow(3) * (w as u64).pow(2);
        assert!(proposals <= hard, "hard bound broken: {proposals} > {hard} (W={w}, F={f})");
        total += 1;
        if proposals <= 5 * (f as u64) * (w as u64) {
            within_linear += 1;
        }
    };

    // small random games with mixed sharing and control
    for seed in 1000..1100u64 {
        let inst = random_small_instance(seed);
        let prefs = build_preferences(&inst.table);
        let outcome = bdaa(&inst.table, &prefs).unwrap();
        record(outcome.proposals, inst.n_users, inst.n_aps);
    }
    // uncontrolled full-coverage instances
    for seed in 300..350u64 {
        let scenario = generate_random(20, 5, 100.0, seed, ApLayout::Grid5).unwrap();
        let out = run_pipeline(scenario, config_no_control()).unwrap();
        record(out.report.metrics.proposal_count, 20, 5);
    }
    // controlled scenario-class instances
    for seed in 400..450u64 {
        let scenario = generate_random(20, 5, 200.0, seed, ApLayout::Grid5).unwrap();
        let out = run_pipeline(scenario, gaussian_config(0.2)).unwrap();
        record(out.report.metrics.proposal_count, 20, 5);
    }

    let share = within_linear as f64 / total as f64;
    assert!(share >= 0.95, "only {share:.2} of runs within 5FW");
    pass(
        7,
        "proposal bounds",
        &format!("{total} runs under F³W²; {:.1}% within 5FW", share * 100.0),
    );
}

// ---------------------------------------------------------------------------
// criterion 8: welfare ratio against the exhaustive optimum
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_welfare_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut ratios = Vec::new();
    for seed in 0..100u64 {
        let n_users = rng.random_range(6..=10usize);
        let n_aps = rng.random_range(2..=3usize);
        let scenario =
            generate_random(n_users, n_aps, 150.0, 9000 + seed, ApLayout::Random).unwrap();
        let pipeline = Pipeline::new(scenario, gaussian_config(0.3)).unwrap();
        let outcome = bdaa(&pipeline.table, &pipeline.prefs).unwrap();
        let report = pipeline.report_for(&outcome.matching, outcome.proposals).unwrap();
        let (_, opt) = exhaustive_optimum(&pipeline.table, true).unwrap();
        if opt > 0.0 {
            let ratio = report.metrics.welfare_modified_bps / opt;
            assert!(ratio <= 1.0 + 1e-9, "seed {seed}: ratio {ratio} above 1");
            ratios.push(ratio);
        }
    }
    let good = ratios.iter().filter(|&&r| r >= 0.9).count();
    let share = good as f64 / ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        share >= 0.8,
        "only {share:.2} of instances reached 90% of the optimum (mean {mean:.3})"
    );
    pass(
        8,
        "welfare ratio",
        &format!(
            "{}/{} instances at ≥90% of the modified optimum; observed mean {:.1}%",
            good,
            ratios.len(),
            mean * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------
// criterion 9: congestion relief factor on the clustered fixture
// ---------------------------------------------------------------------------

const CONGESTED_FIXTURE: &str = r#"{
  "users": [
    {"id": 1, "x": 100.0, "y": 100.0},
    {"id": 2, "x": 115.0, "y": 100.0},
    {"id": 3, "x": 85.0, "y": 100.0},
    {"id": 4, "x": 100.0, "y": 115.0},
    {"id": 5, "x": 100.0, "y": 85.0},
    {"id": 6, "x": 110.0, "y": 110.0},
    {"id": 7, "x": 140.0, "y": 100.0},
    {"id": 8, "x": 60.0, "y": 100.0},
    {"id": 9, "x": 100.0, "y": 140.0},
    {"id": 10, "x": 100.0, "y": 60.0}
  ],
  "aps": [
    {"id": 1, "x": 50.0, "y": 50.0},
    {"id": 2, "x": 150.0, "y": 50.0},
    {"id": 3, "x": 100.0, "y": 100.0},
    {"id": 4, "x": 50.0, "y": 150.0},
    {"id": 5, "x": 150.0, "y": 150.0}
  ]
}"#;

#[test]
fn criterion_09_congestion_relief() {
    let scenario = scenario_from_json(CONGESTED_FIXTURE);
    let pipeline = Pipeline::new(scenario, gaussian_config(0.2)).unwrap();

    // the congested baseline: everyone picks the nearest AP
    let rssi = best_rssi(&pipeline.scenario, &pipeline.rates);
    assert!(
        rssi.mu_user.iter().all(|&f| f == Some(2)),
        "fixture must congest the center AP under nearest-AP association"
    );
    let rssi_report = pipeline.report_for(&rssi, 0).unwrap();

    let outcome = bdaa(&pipeline.table, &pipeline.prefs).unwrap();
    let report = pipeline.report_for(&outcome.matching, outcome.proposals).unwrap();
    assert_eq!(report.unmatched.len(), 0, "mechanism left users stranded");

    let mut factors = Vec::new();
    for w in 1..=10u32 {
        let id = PlayerId::user(w);
        let before = rssi_report
            .cells
            .iter()
            .find_map(|c| c.shares_mac.get(&id))
            .copied()
            .unwrap();
        let after = report
            .cells
            .iter()
            .find_map(|c| c.shares_mac.get(&id))
            .copied()
            .unwrap();
        factors.push(after / before);
    }
    let min = factors.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = factors.iter().sum::<f64>() / factors.len() as f64;
    assert!(min >= 2.0, "weakest relief factor {min:.2} below 2x");
    pass(
        9,
        "congestion relief",
        &format!("per-user MAC throughput up {min:.1}x to {mean:.1}x (mean) over nearest-AP"),
    );
}

// ---------------------------------------------------------------------------
// criterion 10: determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_determinism() {
    let scenario_a = generate_random(20, 5, 200.0, 42, ApLayout::Grid5).unwrap();
    let scenario_b = generate_random(20, 5, 200.0, 42, ApLayout::Grid5).unwrap();
    let json_a = serde_json::to_string_pretty(&scenario_a).unwrap();
    let json_b = serde_json::to_string_pretty(&scenario_b).unwrap();
    assert_eq!(json_a, json_b, "scenario generation must be deterministic");

    let out_a = run_pipeline(scenario_a, gaussian_config(0.3)).unwrap();
    let out_b = run_pipeline(scenario_b, gaussian_config(0.3)).unwrap();
    let report_a = serde_json::to_string_pretty(&out_a.report).unwrap();
    let report_b = serde_json::to_string_pretty(&out_b.report).unwrap();
    assert_eq!(report_a, report_b, "reports must be byte-identical");
    let trace_a: Vec<String> =
        out_a.trace.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    let trace_b: Vec<String> =
        out_b.trace.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    assert_eq!(trace_a, trace_b, "traces must be byte-identical");

    let other = generate_random(20, 5, 200.0, 43, ApLayout::Grid5).unwrap();
    assert_ne!(json_a, serde_json::to_string_pretty(&other).unwrap());

    pass(10, "determinism", "scenario, report and trace byte-identical across repeated runs");
}
