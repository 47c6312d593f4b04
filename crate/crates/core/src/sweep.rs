//! Parallel sweeps over scenarios.
//!
//! Four modes share one layout: `<out>/<name>/point-NNNN/` per point, plus
//! `index.json` and `table.csv` next to them.
//!
//! - `runs`: overrides dotted scenario paths with listed values, either as a
//!   Cartesian product or zipped, and runs every point.
//! - `family`: evaluates `F` and the distances to the baseline along the
//!   concentration family for a list of `k`.
//! - `refinement`: reruns the scenario on several grids with a fixed step
//!   `dt = dt_factor·h^dt_power`, reporting the integrated energy residual
//!   and, optionally, the gap between the original and transformed runs.
//! - `samples`: draws random members of `s_spec` and reports the ratio
//!   `lhs/(q1^{2θ} + q2 + 1)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BlowUpSignal, ModelParams, RunStatus, SystemState};
use crate::functionals::{energy_f, integrated_residual, lemma31_quantities, s_membership, theta};
use crate::geometry::RadialGrid;
use crate::initdata::{concentration_family, family_distances, sample_s, FamilySpec};
use crate::model::transform_state;
use crate::output::{create_dir, format_cell, format_float, write_json, write_profiles, write_run, write_table, write_with};
use crate::scenario::{InitialSpec, Scenario, ScenarioError, ScenarioRun, CODE_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    #[default]
    Cartesian,
    Zip,
}

/// One swept scenario key, e.g. `path = "grid.cells"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepSpec {
    Runs {
        #[serde(default)]
        combine: Combine,
        axes: Vec<SweepAxis>,
    },
    Family {
        ks: Vec<u32>,
        #[serde(default = "default_p")]
        p: f64,
    },
    Refinement {
        cells: Vec<usize>,
        dt_factor: f64,
        #[serde(default = "default_dt_power")]
        dt_power: i32,
        #[serde(default = "default_window")]
        window: [f64; 2],
        #[serde(default)]
        cross_check: bool,
    },
    Samples {
        count: u64,
    },
}

fn default_p() -> f64 {
    1.1
}

fn default_dt_power() -> i32 {
    2
}

fn default_window() -> [f64; 2] {
    [0.1, 0.5]
}

impl SweepSpec {
    pub fn mode(&self) -> &'static str {
        match self {
            SweepSpec::Runs { .. } => "runs",
            SweepSpec::Family { .. } => "family",
            SweepSpec::Refinement { .. } => "refinement",
            SweepSpec::Samples { .. } => "samples",
        }
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Config(msg));
        match self {
            SweepSpec::Runs { .. } => {
                expand_runs(scenario)?;
            }
            SweepSpec::Family { ks, p } => {
                if !matches!(scenario.initial, InitialSpec::Family { .. }) {
                    return fail("a family sweep needs initial data of kind `family`".into());
                }
                if ks.is_empty() || ks.contains(&0) {
                    return fail("family sweep needs a nonempty list of positive ks".into());
                }
                if !(*p >= 1.0 && p.is_finite()) {
                    return fail(format!("family sweep exponent p must be at least 1, got {p}"));
                }
                scenario.transformed_params()?;
            }
            SweepSpec::Refinement {
                cells,
                dt_factor,
                window,
                cross_check,
                ..
            } => {
                if cells.len() < 2 {
                    return fail("a refinement sweep needs at least two grids".into());
                }
                if !(*dt_factor > 0.0 && dt_factor.is_finite()) {
                    return fail(format!("dt_factor must be positive, got {dt_factor}"));
                }
                if !(0.0 <= window[0] && window[0] < window[1] && window[1] <= scenario.sim.t_end) {
                    return fail(format!(
                        "residual window {window:?} must satisfy 0 ≤ start < end ≤ t_end"
                    ));
                }
                if *cross_check {
                    match scenario.params {
                        ModelParams::Original(p) => {
                            p.transform()?;
                        }
                        ModelParams::Transformed(_) => {
                            return fail("cross_check needs original parameters".into())
                        }
                    }
                }
            }
            SweepSpec::Samples { count } => {
                if *count == 0 {
                    return fail("samples sweep needs count ≥ 1".into());
                }
                if scenario.s_spec.is_none() {
                    return fail("samples sweep needs an [s_spec] table".into());
                }
                scenario.transformed_params()?;
            }
        }
        Ok(())
    }
}

/// Sets the value at a dotted path, creating intermediate tables.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ScenarioError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ScenarioError::Config(format!("invalid sweep path `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ScenarioError::Config(format!("`{path}` crosses a non-table value")))?;
        node = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| ScenarioError::Config(format!("`{path}` crosses a non-table value")))?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// A sweep point: its overrides and the resulting scenario.
#[derive(Debug, Clone)]
pub struct RunPoint {
    pub overrides: Vec<(String, toml::Value)>,
    pub scenario: Scenario,
}

impl RunPoint {
    pub fn label(&self) -> String {
        self.overrides
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Expands a `runs` sweep into its points.
pub fn expand_runs(scenario: &Scenario) -> Result<Vec<RunPoint>, ScenarioError> {
    let Some(SweepSpec::Runs { combine, axes }) = &scenario.sweep else {
        return Err(ScenarioError::Config("scenario has no `runs` sweep".into()));
    };
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(ScenarioError::Config("every sweep axis needs at least one value".into()));
    }
    let combos: Vec<Vec<usize>> = match combine {
        Combine::Zip => {
            let len = axes[0].values.len();
            if axes.iter().any(|a| a.values.len() != len) {
                return Err(ScenarioError::Config("zipped axes must have equal lengths".into()));
            }
            (0..len).map(|i| vec![i; axes.len()]).collect()
        }
        Combine::Cartesian => {
            let mut combos = vec![Vec::new()];
            for axis in axes {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        (0..axis.values.len()).map(move |i| {
                            let mut next = c.clone();
                            next.push(i);
                            next
                        })
                    })
                    .collect();
            }
            combos
        }
    };
    let mut base = scenario.clone();
    base.sweep = None;
    let base_value =
        toml::Value::try_from(&base).map_err(|e| ScenarioError::Config(e.to_string()))?;
    combos
        .into_iter()
        .map(|combo| {
            let mut value = base_value.clone();
            let mut overrides = Vec::new();
            for (axis, i) in axes.iter().zip(combo) {
                set_path(&mut value, &axis.path, axis.values[i].clone())?;
                overrides.push((axis.path.clone(), axis.values[i].clone()));
            }
            let scenario: Scenario = value.try_into().map_err(|e: toml::de::Error| {
                ScenarioError::Config(format!("sweep point {overrides:?}: {e}"))
            })?;
            scenario.validate()?;
            Ok(RunPoint {
                overrides,
                scenario,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub index: usize,
    pub dir: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<RunStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_signal: Option<BlowUpSignal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supnorm_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PointEntry {
    fn new(index: usize, label: String) -> Self {
        Self {
            index,
            dir: point_dir(index),
            label,
            status: None,
            blowup_signal: None,
            t_final: None,
            supnorm_final: None,
            error: None,
        }
    }

    fn with_run(mut self, run: &ScenarioRun) -> Self {
        self.status = Some(run.summary.status);
        self.blowup_signal = run.summary.blowup_signal;
        self.t_final = Some(run.summary.t_final);
        self.supnorm_final = Some(run.summary.supnorm_final);
        self
    }
}

fn point_dir(index: usize) -> String {
    format!("point-{index:04}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub k: u32,
    pub epsilon_k: f64,
    pub lambda_k: f64,
    #[serde(rename = "F")]
    pub energy: f64,
    pub w_lp: f64,
    pub z_w12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub p: f64,
    pub rows: Vec<FamilyRow>,
    /// `F` strictly decreasing in the listed order of `k`.
    #[serde(rename = "monotone_F")]
    pub monotone_energy: bool,
    pub monotone_w: bool,
    pub monotone_z: bool,
}

fn strictly_decreasing(xs: impl Iterator<Item = f64>) -> bool {
    let xs: Vec<f64> = xs.collect();
    xs.windows(2).all(|p| p[1] < p[0])
}

/// `F(w_k, z_k)` and the distances to the baseline for each `k`.
pub fn family_study(
    spec: &FamilySpec,
    grid: &std::sync::Arc<RadialGrid>,
    a: f64,
    ks: &[u32],
    p: f64,
) -> Result<FamilyReport, ScenarioError> {
    let rows = ks
        .par_iter()
        .map(|&k| {
            let spec = spec.with_k(k);
            let member = concentration_family(&spec, grid)?;
            let d = family_distances(&spec, grid, &member, p)?;
            Ok(FamilyRow {
                k,
                epsilon_k: spec.epsilon_k(),
                lambda_k: spec.lambda_k(),
                energy: energy_f(&member.w, &member.z, a),
                w_lp: d.w_lp,
                z_w12: d.z_w12,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(FamilyReport {
        p,
        monotone_energy: strictly_decreasing(rows.iter().map(|r| r.energy)),
        monotone_w: strictly_decreasing(rows.iter().map(|r| r.w_lp)),
        monotone_z: strictly_decreasing(rows.iter().map(|r| r.z_w12)),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementSettings {
    pub dt_factor: f64,
    pub dt_power: i32,
    pub window: [f64; 2],
    pub cross_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: u64,
    /// `∫|residual| dt` over the window.
    pub integrated_residual: f64,
    /// Sup-norm gap at `t_final` between the transformed run and the
    /// transformed image of the original run.
    pub cross_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub settings: RefinementSettings,
    pub levels: Vec<RefinementLevel>,
    /// Observed orders in `h` between consecutive levels.
    pub residual_orders: Vec<f64>,
    /// Error ratios between consecutive levels.
    pub cross_ratios: Vec<f64>,
}

/// The runs behind one refinement level.
#[derive(Debug, Clone)]
pub struct LevelRuns {
    pub transformed: ScenarioRun,
    pub original: Option<ScenarioRun>,
}

fn observed_orders(hs: &[f64], errs: &[f64]) -> Vec<f64> {
    hs.windows(2)
        .zip(errs.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

fn sup_gap(a: &SystemState, b: &SystemState) -> f64 {
    let (SystemState::Transformed(a), SystemState::Transformed(b)) = (a, b) else {
        return f64::NAN;
    };
    [(&a.w, &b.w), (&a.z, &b.z), (&a.v, &b.v)]
        .iter()
        .map(|(x, y)| x.zip_map(y, |p, q| p - q).max_abs())
        .fold(0.0, f64::max)
}

fn level_scenario(base: &Scenario, cells: usize, settings: &RefinementSettings) -> Scenario {
    let mut s = base.clone();
    s.sweep = None;
    s.grid.cells = cells;
    let h = s.grid.radius / cells as f64;
    s.sim = s.sim.clone().with_fixed_dt(settings.dt_factor * h.powi(settings.dt_power));
    s
}

/// Runs `scenario` on each grid in `cells` and measures convergence.
///
/// The transformed system is always run; with `cross_check` the original
/// system is run too, from the lifted data, and compared after mapping.
pub fn refinement_study(
    scenario: &Scenario,
    cells: &[usize],
    settings: RefinementSettings,
) -> Result<(RefinementReport, Vec<LevelRuns>), ScenarioError> {
    let results = cells
        .par_iter()
        .map(|&n| {
            let mut s = level_scenario(scenario, n, &settings);
            s.system = "transformed".into();
            let transformed = s.execute()?;
            let original = if settings.cross_check {
                let mut o = s.clone();
                o.system = "original".into();
                Some(o.execute()?)
            } else {
                None
            };
            Ok((s, LevelRuns { transformed, original }))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let mut levels = Vec::with_capacity(results.len());
    for (s, runs) in &results {
        let out = &runs.transformed.outcome;
        let cross_error = match (&runs.original, scenario.params) {
            (Some(o), ModelParams::Original(p)) => {
                let SystemState::Original(os) = &o.outcome.final_state else {
                    return Err(ScenarioError::Config("cross check produced a non-original state".into()));
                };
                let mapped = SystemState::Transformed(transform_state(os, &p)?);
                Some(sup_gap(&out.final_state, &mapped))
            }
            _ => None,
        };
        levels.push(RefinementLevel {
            cells: s.grid.cells,
            h: s.grid.radius / s.grid.cells as f64,
            dt: s.sim.dt_max,
            status: out.status,
            t_final: out.t_final,
            steps: out.steps,
            integrated_residual: integrated_residual(&out.trajectory, settings.window[0], settings.window[1]),
            cross_error,
        });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let residuals: Vec<f64> = levels.iter().map(|l| l.integrated_residual).collect();
    let cross_ratios = levels
        .windows(2)
        .filter_map(|l| Some(l[0].cross_error? / l[1].cross_error?))
        .collect();
    let report = RefinementReport {
        settings,
        residual_orders: observed_orders(&hs, &residuals),
        cross_ratios,
        levels,
    };
    Ok((report, results.into_iter().map(|(_, r)| r).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub seed: u64,
    pub lhs: f64,
    pub q1: f64,
    pub q2: f64,
    pub ratio: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub theta: f64,
    pub rows: Vec<SampleRow>,
    pub all_finite: bool,
    pub all_members: bool,
    pub max_ratio: f64,
    /// Maximum over the first half of the seeds.
    pub max_ratio_first_half: f64,
    pub mean_ratio: f64,
}

/// The lemma ratio over the seeds `seeds` of `sample_s`.
pub fn sample_study(
    spec: &crate::functionals::SMembershipSpec,
    grid: &std::sync::Arc<RadialGrid>,
    a: f64,
    seeds: std::ops::Range<u64>,
) -> Result<SampleReport, ScenarioError> {
    let th = theta(grid.dim(), spec.kappa);
    let rows = seeds
        .into_par_iter()
        .map(|seed| {
            let (w, z) = sample_s(spec, seed, grid)?;
            let q = lemma31_quantities(&w, &z, a);
            Ok(SampleRow {
                seed,
                lhs: q.lhs,
                q1: q.q1,
                q2: q.q2,
                ratio: q.ratio(th),
                member: s_membership(&w, &z, spec).passes(),
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let max = |rows: &[SampleRow]| rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let half = rows.len().div_ceil(2);
    Ok(SampleReport {
        theta: th,
        all_finite: rows.iter().all(|r| r.ratio.is_finite()),
        all_members: rows.iter().all(|r| r.member),
        max_ratio: max(&rows),
        max_ratio_first_half: max(&rows[..half]),
        mean_ratio: rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepReport {
    Runs { failed: usize },
    Family(FamilyReport),
    Refinement(RefinementReport),
    Samples(SampleReport),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepIndex {
    pub name: String,
    pub code_version: String,
    pub mode: String,
    pub workers: usize,
    pub points: Vec<PointEntry>,
    pub report: SweepReport,
    pub config: Scenario,
}

impl SweepIndex {
    /// Points whose run ended in an error.
    pub fn failed(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

/// Runs the sweep of `scenario` with `workers` threads, writing artifacts
/// under `out_root/<name>/`.
pub fn run_sweep(scenario: &Scenario, out_root: &Path, workers: usize) -> Result<SweepIndex, ScenarioError> {
    let Some(spec) = &scenario.sweep else {
        return Err(ScenarioError::Config(format!(
            "scenario `{}` has no [sweep] table",
            scenario.name
        )));
    };
    let root = out_root.join(&scenario.name);
    create_dir(&root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    let (points, report, header, rows) = pool.install(|| execute_mode(scenario, spec, &root))?;
    write_with(&root.join("table.csv"), |f| write_table(f, &header, &rows))?;
    let index = SweepIndex {
        name: scenario.name.clone(),
        code_version: CODE_VERSION.into(),
        mode: spec.mode().into(),
        workers: workers.max(1),
        points,
        report,
        config: scenario.clone(),
    };
    write_json(&root.join("index.json"), &index)?;
    Ok(index)
}

type ModeResult = (Vec<PointEntry>, SweepReport, Vec<&'static str>, Vec<Vec<String>>);

fn execute_mode(scenario: &Scenario, spec: &SweepSpec, root: &Path) -> Result<ModeResult, ScenarioError> {
    match spec {
        SweepSpec::Runs { .. } => {
            let points = expand_runs(scenario)?;
            let entries = points
                .par_iter()
                .enumerate()
                .map(|(i, point)| {
                    let entry = PointEntry::new(i, point.label());
                    let dir = root.join(&entry.dir);
                    match point.scenario.execute() {
                        Ok(run) => {
                            write_run(&dir, &run)?;
                            Ok(entry.with_run(&run))
                        }
                        Err(ScenarioError::Run(e)) => {
                            create_dir(&dir)?;
                            Ok(PointEntry {
                                error: Some(e.to_string()),
                                ..entry
                            })
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let rows = entries
                .iter()
                .map(|e| {
                    vec![
                        e.index.to_string(),
                        format!("\"{}\"", e.label.replace('"', "\"\"")),
                        e.status
                            .map(|s| serde_json::to_value(s).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default())
                            .unwrap_or_default(),
                        format_cell(e.t_final),
                        format_cell(e.supnorm_final),
                        e.error.clone().unwrap_or_default().replace(',', ";"),
                    ]
                })
                .collect();
            let failed = entries.iter().filter(|e| e.error.is_some()).count();
            Ok((
                entries,
                SweepReport::Runs { failed },
                vec!["index", "label", "status", "t_final", "supnorm_final", "error"],
                rows,
            ))
        }
        SweepSpec::Family { ks, p } => {
            let InitialSpec::Family { family, .. } = &scenario.initial else {
                return Err(ScenarioError::Config("family sweep needs family data".into()));
            };
            let grid = scenario.build_grid()?;
            let a = scenario.transformed_params()?.a;
            let report = family_study(family, &grid, a, ks, *p)?;
            let entries = ks
                .par_iter()
                .enumerate()
                .map(|(i, &k)| {
                    let entry = PointEntry::new(i, format!("k={k}"));
                    let dir = root.join(&entry.dir);
                    create_dir(&dir)?;
                    let member = concentration_family(&family.with_k(k), &grid)?;
                    write_with(&dir.join("profiles.csv"), |f| {
                        write_profiles(f, &SystemState::Transformed(member))
                    })?;
                    write_json(&dir.join("point.json"), &report.rows[i])?;
                    Ok(entry)
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        format_float(r.epsilon_k),
                        format_float(r.lambda_k),
                        format_float(r.energy),
                        format_float(r.w_lp),
                        format_float(r.z_w12),
                    ]
                })
                .collect();
            Ok((
                entries,
                SweepReport::Family(report),
                vec!["k", "epsilon_k", "lambda_k", "F", "w_lp_distance", "z_w12_distance"],
                rows,
            ))
        }
        SweepSpec::Refinement {
            cells,
            dt_factor,
            dt_power,
            window,
            cross_check,
        } => {
            let settings = RefinementSettings {
                dt_factor: *dt_factor,
                dt_power: *dt_power,
                window: *window,
                cross_check: *cross_check,
            };
            let (report, runs) = refinement_study(scenario, cells, settings)?;
            let mut entries = Vec::with_capacity(runs.len());
            for (i, level) in runs.iter().enumerate() {
                let entry = PointEntry::new(i, format!("cells={}", cells[i]));
                let dir = root.join(&entry.dir);
                write_run(&dir.join("transformed"), &level.transformed)?;
                if let Some(o) = &level.original {
                    write_run(&dir.join("original"), o)?;
                }
                entries.push(entry.with_run(&level.transformed));
            }
            let rows = report
                .levels
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let order = i.checked_sub(1).map(|j| report.residual_orders[j]);
                    let ratio = match (i.checked_sub(1).and_then(|j| report.levels[j].cross_error), l.cross_error) {
                        (Some(prev), Some(cur)) => Some(prev / cur),
                        _ => None,
                    };
                    vec![
                        l.cells.to_string(),
                        format_float(l.h),
                        format_float(l.dt),
                        format_float(l.integrated_residual),
                        format_cell(order),
                        format_cell(l.cross_error),
                        format_cell(ratio),
                    ]
                })
                .collect();
            Ok((
                entries,
                SweepReport::Refinement(report),
                vec!["cells", "h", "dt", "integrated_residual", "residual_order", "cross_error", "cross_ratio"],
                rows,
            ))
        }
        SweepSpec::Samples { count } => {
            let spec = scenario
                .s_spec
                .as_ref()
                .ok_or_else(|| ScenarioError::Config("samples sweep needs [s_spec]".into()))?;
            let grid = scenario.build_grid()?;
            let a = scenario.transformed_params()?.a;
            let seeds = scenario.seed..scenario.seed + count;
            let report = sample_study(spec, &grid, a, seeds)?;
            let entries = report
                .rows
                .par_iter()
                .enumerate()
                .map(|(i, row)| {
                    let entry = PointEntry::new(i, format!("seed={}", row.seed));
                    let dir = root.join(&entry.dir);
                    create_dir(&dir)?;
                    write_json(&dir.join("point.json"), row)?;
                    Ok(entry)
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.seed.to_string(),
                        format_float(r.lhs),
                        format_float(r.q1),
                        format_float(r.q2),
                        format_float(r.ratio),
                        r.member.to_string(),
                    ]
                })
                .collect();
            Ok((
                entries,
                SweepReport::Samples(report),
                vec!["seed", "lhs", "q1", "q2", "ratio", "member"],
                rows,
            ))
        }
    }
}
