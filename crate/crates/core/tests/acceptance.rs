//! Acceptance suite. Each criterion prints one `criterion NN: PASS|FAIL` line.
//!
//! Heavy runs are serialized through a lock so that wall-clock budgets are
//! measured without competing test threads.

use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use chemoblow::dynamics::{ModelParams, RunStatus, SystemState};
use chemoblow::functionals::{theta, DiagnosticsRecord, SMembershipSpec};
use chemoblow::geometry::{RadialField, RadialGrid};
use chemoblow::initdata::FamilySpec;
use chemoblow::model::{
    inverse_transform_state, transform_params, transform_state, OriginalParams,
    OriginalState,
};
use chemoblow::oderef::{closed_form_blowup, ode_blowup, OdeOutcome, OdeSpec};
use chemoblow::presets::load_preset;
use chemoblow::scenario::{InitialSpec, ScenarioRun};
use chemoblow::sweep::{
    family_study, refinement_study, sample_study, RefinementReport, RefinementSettings, SweepSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASS_DRIFT_TOL: f64 = 1e-10;
const RUN_BUDGET: Duration = Duration::from_secs(60);
const REFINEMENT_BUDGET: Duration = Duration::from_secs(300);
const BLOWUP_BUDGET: Duration = Duration::from_secs(600);
const ROUND_TRIP_TOL: f64 = 1e-12;
const CROSS_RATIO_MIN: f64 = 1.7;
const RESIDUAL_ORDER_MIN: f64 = 1.0;
const YOUNG_TOL: f64 = 1e-9;
const MONITOR_FACTOR: f64 = 3.0;
const BLOWUP_TIME_SPREAD: f64 = 0.2;
const ODE_TOL: f64 = 1e-4;
const SAMPLE_MAX_SPREAD: f64 = 0.1;

/// Presets that are single runs rather than sweeps.
const RUN_PRESETS: [&str; 4] = ["blowup-attraction", "beta-eq-delta", "repulsion", "diffusion-only"];

static HEAVY: Mutex<()> = Mutex::new(());

fn serialized<T>(f: impl FnOnce() -> T) -> T {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    f()
}

fn report(id: u32, pass: bool, detail: String) {
    // Written to the raw handle so the line survives output capture.
    let line = format!("criterion {id:02}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id:02} failed: {detail}");
}

fn sci(xs: &[f64]) -> String {
    let cells: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", cells.join(", "))
}

struct TimedRun {
    name: &'static str,
    run: ScenarioRun,
    elapsed: Duration,
}

fn timed(name: &'static str, cells: usize) -> TimedRun {
    let mut scenario = load_preset(name).unwrap();
    scenario.grid.cells = cells;
    serialized(|| {
        let start = Instant::now();
        let run = scenario.execute().unwrap();
        TimedRun {
            name,
            run,
            elapsed: start.elapsed(),
        }
    })
}

fn preset_runs() -> &'static [TimedRun] {
    static RUNS: OnceLock<Vec<TimedRun>> = OnceLock::new();
    RUNS.get_or_init(|| RUN_PRESETS.iter().map(|name| timed(name, 256)).collect())
}

fn preset_run(name: &str) -> &'static TimedRun {
    preset_runs().iter().find(|r| r.name == name).unwrap()
}

fn blowup_fine() -> &'static TimedRun {
    static RUN: OnceLock<TimedRun> = OnceLock::new();
    RUN.get_or_init(|| timed("blowup-attraction", 512))
}

fn refinement() -> &'static (RefinementReport, Vec<Vec<DiagnosticsRecord>>, Duration) {
    static REPORT: OnceLock<(RefinementReport, Vec<Vec<DiagnosticsRecord>>, Duration)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let scenario = load_preset("refinement").unwrap();
        let Some(SweepSpec::Refinement {
            cells,
            dt_factor,
            dt_power,
            window,
            cross_check,
        }) = scenario.sweep.clone()
        else {
            panic!("refinement preset has no refinement sweep");
        };
        let settings = RefinementSettings {
            dt_factor,
            dt_power,
            window,
            cross_check,
        };
        serialized(|| {
            let start = Instant::now();
            let (report, runs) = refinement_study(&scenario, &cells, settings).unwrap();
            let elapsed = start.elapsed();
            let trajectories = runs.into_iter().map(|r| r.transformed.outcome.trajectory).collect();
            (report, trajectories, elapsed)
        })
    })
}

#[test]
fn criterion_01_conservation_positivity_runtime() {
    let mut pass = true;
    let mut detail = Vec::new();
    for r in preset_runs() {
        let stats = &r.run.outcome.stats;
        let ok = stats.max_relative_mass_drift <= MASS_DRIFT_TOL
            && stats.min_density >= 0.0
            && stats.min_signal >= 0.0
            && r.elapsed <= RUN_BUDGET;
        pass &= ok;
        detail.push(format!(
            "{}: drift={:.1e} min_density={:.3e} min_signal={:.3e} time={:.1}s",
            r.name,
            stats.max_relative_mass_drift,
            stats.min_density,
            stats.min_signal,
            r.elapsed.as_secs_f64()
        ));
    }
    report(1, pass, detail.join("; "));
}

fn random_field(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> RadialField {
    let values = (0..grid.cells()).map(|_| rng.gen_range(0.0..10.0)).collect();
    RadialField::new(Arc::clone(grid), values).unwrap()
}

fn rel_gap(a: &RadialField, b: &RadialField) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    a.zip_map(b, |x, y| x - y).max_abs() / scale
}

#[test]
fn criterion_02_transformation_round_trip() {
    let hand = transform_params(&OriginalParams::new(2.0, 1.0, 3.0, 1.0, 1.0, 4.0).unwrap()).unwrap();
    let hand_ok = (hand.a, hand.b, hand.c) == (4.0, 6.0, 1.0) && (hand.d - 0.6).abs() <= 1e-15;
    let grid = RadialGrid::new(1.0, 3, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        // chi*alpha >= 1 > xi*gamma keeps every draw attraction-dominated.
        let (chi, xi, alpha, beta, gamma, delta) = (
            rng.gen_range(1.0..5.0),
            rng.gen_range(0.1..1.0),
            rng.gen_range(1.0..5.0),
            rng.gen_range(0.1..5.0),
            rng.gen_range(0.1..1.0),
            rng.gen_range(0.1..5.0),
        );
        let p = OriginalParams::new(chi, xi, alpha, beta, gamma, delta).unwrap();
        let s = OriginalState {
            u: random_field(&grid, &mut rng),
            v1: random_field(&grid, &mut rng),
            v2: random_field(&grid, &mut rng),
        };
        let back = inverse_transform_state(&transform_state(&s, &p).unwrap(), &p).unwrap();
        worst = worst
            .max(rel_gap(&s.u, &back.u))
            .max(rel_gap(&s.v1, &back.v1))
            .max(rel_gap(&s.v2, &back.v2));
    }
    report(
        2,
        hand_ok && worst <= ROUND_TRIP_TOL,
        format!(
            "(2,1,3,1,1,4) -> ({}, {}, {}, {}); worst relative round-trip error {worst:.2e} over 100 states",
            hand.a, hand.b, hand.c, hand.d
        ),
    );
}

#[test]
fn criterion_03_cross_consistency() {
    let (report_, _, elapsed) = refinement();
    let errors: Vec<f64> = report_.levels.iter().filter_map(|l| l.cross_error).collect();
    let pass = report_.cross_ratios.len() == 2
        && report_.cross_ratios.iter().all(|r| *r >= CROSS_RATIO_MIN)
        && *elapsed <= REFINEMENT_BUDGET;
    report(
        3,
        pass,
        format!(
            "errors {} ratios {:.3?} time={:.1}s",
            sci(&errors),
            report_.cross_ratios,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_energy_identity_order() {
    let (report_, _, _) = refinement();
    let residuals: Vec<f64> = report_.levels.iter().map(|l| l.integrated_residual).collect();
    let pass = report_.residual_orders.len() == 2
        && report_.residual_orders.iter().all(|p| *p >= RESIDUAL_ORDER_MIN);
    report(
        4,
        pass,
        format!("integrated residuals {} orders {:.3?}", sci(&residuals), report_.residual_orders),
    );
}

#[test]
fn criterion_05_lyapunov_when_b_vanishes() {
    let run = &preset_run("beta-eq-delta").run;
    let b = run.summary.transformed_params.unwrap().b;
    let min_d = run
        .outcome
        .trajectory
        .iter()
        .filter_map(|r| r.dissipation)
        .fold(f64::INFINITY, f64::min);
    let mono = run.summary.monotonicity.unwrap();
    let pass = b == 0.0 && mono.monotone && min_d >= 0.0;
    report(
        5,
        pass,
        format!(
            "b={b} monotone_F={} max increase {:.3e} residual bound {:.3e} min D {min_d:.3e}",
            mono.monotone, mono.max_increase, mono.residual_bound
        ),
    );
}

#[test]
fn criterion_06_young_split() {
    let mut records: Vec<&DiagnosticsRecord> = Vec::new();
    for name in ["blowup-attraction", "beta-eq-delta", "diffusion-only"] {
        records.extend(preset_run(name).run.outcome.trajectory.iter());
    }
    let (_, trajectories, _) = refinement();
    records.extend(trajectories.iter().flatten());
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for r in records {
        let (Some(slack), Some(d)) = (r.young_slack, r.dissipation) else {
            continue;
        };
        checked += 1;
        worst = worst.min(slack / (1.0 + d));
    }
    report(
        6,
        checked > 0 && worst >= -YOUNG_TOL,
        format!("{checked} records, min slack/(1+D) = {worst:.3e}"),
    );
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[test]
fn criterion_07_monitors_bounded_on_blowup() {
    let run = &preset_run("blowup-attraction").run;
    assert_eq!(run.outcome.status, RunStatus::BlowUpDetected);
    let traj = &run.outcome.trajectory;
    let before = &traj[..traj.len() - 1];
    let monitors: [(&str, fn(&DiagnosticsRecord) -> f64); 4] = [
        ("v_l2", |r| r.v_l2),
        ("z_l1", |r| r.z_l1),
        ("grad_z_lp", |r| r.grad_z_lp),
        ("decay_envelope", |r| r.decay_envelope),
    ];
    let mut pass = before.len() >= 2;
    let mut detail = Vec::new();
    for (name, get) in monitors {
        let values: Vec<f64> = before.iter().map(get).collect();
        let worst = (1..=values.len())
            .map(|i| values[i - 1] / median(&values[..i]))
            .fold(0.0, f64::max);
        pass &= worst < MONITOR_FACTOR;
        detail.push(format!("{name} max/median {worst:.3}"));
    }
    let sup_growth = before.last().unwrap().supnorm_w / before[0].supnorm_w;
    detail.push(format!("{} records, sup growth {sup_growth:.1}", before.len()));
    report(7, pass, detail.join(", "));
}

#[test]
fn criterion_08_blowup_demonstration() {
    let coarse = preset_run("blowup-attraction");
    let fine = blowup_fine();
    let params = match coarse.run.summary.config.params {
        ModelParams::Original(p) => p,
        ModelParams::Transformed(_) => panic!("blow-up preset must state original parameters"),
    };
    let hand = (params.chi, params.xi, params.alpha, params.beta, params.gamma, params.delta);
    let k = match &coarse.run.summary.config.initial {
        InitialSpec::Family { family, .. } => family.k,
        _ => panic!("blow-up preset must use the concentration family"),
    };
    let (t1, t2) = (coarse.run.outcome.t_final, fine.run.outcome.t_final);
    let spread = (t1 - t2).abs() / t2;
    let total = coarse.elapsed + fine.elapsed;
    let pass = hand == (2.0, 1.0, 3.0, 1.0, 1.0, 4.0)
        && k == 32
        && coarse.run.outcome.status == RunStatus::BlowUpDetected
        && fine.run.outcome.status == RunStatus::BlowUpDetected
        && t1.is_finite()
        && spread <= BLOWUP_TIME_SPREAD
        && total <= BLOWUP_BUDGET;
    report(
        8,
        pass,
        format!(
            "t_final N=256 {t1:.6e}, N=512 {t2:.6e}, spread {:.1}%, time={:.1}s",
            100.0 * spread,
            total.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_family_trend() {
    let scenario = load_preset("family-k").unwrap();
    let Some(SweepSpec::Family { ks, p }) = scenario.sweep.clone() else {
        panic!("family-k preset has no family sweep");
    };
    let InitialSpec::Family { family, .. } = &scenario.initial else {
        panic!("family-k preset must use the concentration family");
    };
    let family: &FamilySpec = family;
    let grid = scenario.build_grid().unwrap();
    let a = scenario.transformed_params().unwrap().a;
    let rep = family_study(family, &grid, a, &ks, p).unwrap();
    let pass = ks == [4, 8, 16, 32, 64] && rep.monotone_energy && rep.monotone_w && rep.monotone_z;
    let energies: Vec<f64> = rep.rows.iter().map(|r| r.energy).collect();
    report(
        9,
        pass,
        format!(
            "F {energies:.4?}, w distances {}, z distances {}",
            sci(&rep.rows.iter().map(|r| r.w_lp).collect::<Vec<_>>()),
            sci(&rep.rows.iter().map(|r| r.z_w12).collect::<Vec<_>>())
        ),
    );
}

#[test]
fn criterion_10_comparison_ode() {
    let mut worst = 0.0_f64;
    let mut combos = 0;
    for y0 in [0.5, 2.0, 10.0] {
        for (c2, th) in [(0.3, 0.6), (1.0, 5.0 / 6.0), (4.0, 0.95)] {
            let exact = closed_form_blowup(y0, c2, th);
            let spec = OdeSpec::new(y0, c2, 0.0, th, 1e3 * exact).unwrap();
            let t = ode_blowup(&spec).blowup_time().unwrap_or(f64::INFINITY);
            worst = worst.max((t - exact).abs() / exact);
            combos += 1;
        }
    }
    let mut dichotomy = true;
    for (c2, c3, th) in [(1.0, 1.0, 5.0 / 6.0), (2.0, 5.0, 0.7), (0.5, 0.1, 0.9)] {
        let eq = OdeSpec::new(1.0, c2, c3, th, 1.0).unwrap().equilibrium();
        let below = OdeSpec::new(0.95 * eq, c2, c3, th, 1e3).unwrap();
        let above = OdeSpec::new(1.05 * eq, c2, c3, th, 1e6).unwrap();
        dichotomy &= matches!(ode_blowup(&below), OdeOutcome::Survives(_));
        dichotomy &= matches!(ode_blowup(&above), OdeOutcome::Finite(_));
    }
    report(
        10,
        combos == 9 && worst <= ODE_TOL && dichotomy,
        format!("{combos} combinations, worst relative error {worst:.2e}; dichotomy reproduced: {dichotomy}"),
    );
}

#[test]
fn criterion_11_appendix_probe() {
    let th = theta(3, 1.5);
    let scenario = load_preset("samples").unwrap();
    let Some(SweepSpec::Samples { count }) = scenario.sweep.clone() else {
        panic!("samples preset has no samples sweep");
    };
    let spec: SMembershipSpec = scenario.s_spec.unwrap();
    let grid = scenario.build_grid().unwrap();
    let a = scenario.transformed_params().unwrap().a;
    let rep = sample_study(&spec, &grid, a, scenario.seed..scenario.seed + count).unwrap();
    let spread = (rep.max_ratio - rep.max_ratio_first_half) / rep.max_ratio;
    let pass = th == 5.0 / 6.0
        && count == 200
        && rep.all_finite
        && rep.all_members
        && spread <= SAMPLE_MAX_SPREAD;
    report(
        11,
        pass,
        format!(
            "theta={th}; max ratio over 200 {:.4}, over 100 {:.4}, spread {:.1}%",
            rep.max_ratio,
            rep.max_ratio_first_half,
            100.0 * spread
        ),
    );
}

#[test]
fn run_presets_end_as_documented() {
    let outcomes: Vec<(&str, RunStatus)> = preset_runs().iter().map(|r| (r.name, r.run.outcome.status)).collect();
    assert_eq!(preset_run("blowup-attraction").run.outcome.status, RunStatus::BlowUpDetected);
    for name in ["beta-eq-delta", "repulsion", "diffusion-only"] {
        assert_eq!(preset_run(name).run.outcome.status, RunStatus::ReachedHorizon, "{outcomes:?}");
    }
    let rep = &preset_run("repulsion").run;
    assert!((rep.outcome.t_final - 10.0).abs() <= 1e-9);
    assert!(rep.outcome.supnorm_final.is_finite());
    assert!(matches!(rep.outcome.final_state, SystemState::Original(_)));
}
