//! Scenario files: grid, parameters, initial data, run settings and outputs.
//!
//! A scenario is a TOML document. Every preset shipped with the crate is one
//! of these files; see `presets/` for annotated examples.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advection::scheme_registry;
use crate::dynamics::{
    run, stepper_registry, ConfigError, Formulation, ModelParams, RunError, RunOutcome,
    RunStats, RunStatus, BlowUpSignal, SimConfig, Stepper, SystemState,
};
use crate::functionals::{
    check_monotone_energy, s_membership, theta, DiagnosticsRecord, MonotonicityReport,
    SMembershipReport, SMembershipSpec,
};
use crate::geometry::{GridError, RadialField, RadialGrid};
use crate::initdata::{concentration_family, lift_to_original, sample_s, FamilySpec, InitError, Profile};
use crate::model::{inverse_transform_state, transform_state, ModelError, OriginalParams, Regime, TransformedParams, TransformedState};
use crate::oderef::{fit_constants, ode_blowup, EmpiricalFit, OdeOutcome, OdeSpec};
use crate::sweep::SweepSpec;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run failed: {0}")]
    Run(RunError),
}

impl ScenarioError {
    /// Process exit status: 1 for configuration, 2 for I/O, 3 for a run
    /// that could neither finish nor detect blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 1,
            ScenarioError::Io { .. } => 2,
            ScenarioError::Run(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::Config(e.0)
    }
}

impl From<InitError> for ScenarioError {
    fn from(e: InitError) -> Self {
        ScenarioError::Config(e.to_string())
    }
}

impl From<ModelError> for ScenarioError {
    fn from(e: ModelError) -> Self {
        ScenarioError::Config(e.to_string())
    }
}

impl From<GridError> for ScenarioError {
    fn from(e: GridError) -> Self {
        ScenarioError::Config(e.to_string())
    }
}

impl From<RunError> for ScenarioError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => ScenarioError::Config(c.0),
            other => ScenarioError::Run(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub cells: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_radius() -> f64 {
    1.0
}

fn default_dim() -> usize {
    3
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>, GridError> {
        RadialGrid::new(self.radius, self.dim, self.cells)
    }
}

/// Initial data, given in whichever formulation is convenient. It is
/// converted to the formulation of the chosen system before the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Concentration family member `(w_k, z_k, v)`.
    Family {
        family: FamilySpec,
        /// Parameters used to lift `(w, z)` to `(u, v₁, v₂)` when the system
        /// is run in original form; defaults to the scenario parameters.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lift: Option<OriginalParams>,
        /// Baseline for `v₂`. When given, `v₁` is rebuilt from `z` and this
        /// baseline; otherwise the exact inverse `v₁ = v`, `v₂ = (χv − z)/ξ`
        /// is used, which needs `χv ≥ z`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_v2: Option<Profile>,
    },
    Transformed {
        w: Profile,
        z: Profile,
        #[serde(default = "zero_profile")]
        v: Profile,
        /// Rescales `w` to this mass.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
    },
    Original {
        u: Profile,
        v1: Profile,
        v2: Profile,
        /// Rescales `u` to this mass.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
    },
    /// A random member of the scenario's `s_spec` set, drawn with `seed`.
    SSample {
        #[serde(default = "zero_profile")]
        v: Profile,
    },
}

fn zero_profile() -> Profile {
    Profile::Constant { value: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Per-record diagnostics table.
    pub diagnostics: String,
    /// Run summary.
    pub summary: String,
    /// Final radial profiles; skipped when empty.
    pub profiles: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            diagnostics: "diagnostics.csv".into(),
            summary: "summary.json".into(),
            profiles: "profiles.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Registered system name: `transformed`, `original` or `diffusion-only`.
    #[serde(default = "default_system")]
    pub system: String,
    #[serde(default)]
    pub seed: u64,
    pub params: ModelParams,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_spec: Option<SMembershipSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_system() -> String {
    "transformed".into()
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(ScenarioError::Config(format!(
                "name `{}` must be nonempty and use only letters, digits, `-` and `_`",
                self.name
            )));
        }
        let grid = self.grid.build()?;
        self.sim.validate()?;
        self.stepper()?;
        if let Some(spec) = &self.s_spec {
            spec.validate_for(grid.dim())
                .map_err(|e| ScenarioError::Config(e.to_string()))?;
        }
        match &self.initial {
            InitialSpec::Family { family, base_v2, .. } => {
                family.validate()?;
                if let Some(p) = base_v2 {
                    p.validate()?;
                }
            }
            InitialSpec::Transformed { w, z, v, mass } => {
                for p in [w, z, v] {
                    p.validate()?;
                }
                check_mass(*mass)?;
            }
            InitialSpec::Original { u, v1, v2, mass } => {
                for p in [u, v1, v2] {
                    p.validate()?;
                }
                check_mass(*mass)?;
            }
            InitialSpec::SSample { v } => {
                v.validate()?;
                if self.s_spec.is_none() {
                    return Err(ScenarioError::Config(
                        "initial data of kind `s-sample` needs an [s_spec] table".into(),
                    ));
                }
            }
        }
        for file in [&self.output.diagnostics, &self.output.summary] {
            if file.is_empty() {
                return Err(ScenarioError::Config("output file names must be nonempty".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate(self)?;
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>, ScenarioError> {
        Ok(self.grid.build()?)
    }

    pub fn stepper(&self) -> Result<Box<dyn Stepper>, ScenarioError> {
        let factory = *stepper_registry().get(&self.system).map_err(ConfigError::from)?;
        let scheme = Arc::clone(
            scheme_registry()
                .get(&self.sim.advection_scheme)
                .map_err(ConfigError::from)?,
        );
        Ok(factory(&self.params, scheme)?)
    }

    /// Parameters of the transformed system, if the scenario has them.
    pub fn transformed_params(&self) -> Result<TransformedParams, ScenarioError> {
        match self.params {
            ModelParams::Transformed(p) => Ok(p),
            ModelParams::Original(p) => Ok(p.transform()?),
        }
    }

    /// Initial data as given, before any change of formulation.
    pub fn raw_initial_state(&self, grid: &Arc<RadialGrid>) -> Result<SystemState, ScenarioError> {
        Ok(match &self.initial {
            InitialSpec::Family { family, .. } => {
                SystemState::Transformed(concentration_family(family, grid)?)
            }
            InitialSpec::Transformed { w, z, v, mass } => SystemState::Transformed(TransformedState {
                w: rescale(w.sample(grid), *mass)?,
                z: z.sample(grid),
                v: v.sample(grid),
            }),
            InitialSpec::Original { u, v1, v2, mass } => {
                SystemState::Original(crate::model::OriginalState {
                    u: rescale(u.sample(grid), *mass)?,
                    v1: v1.sample(grid),
                    v2: v2.sample(grid),
                })
            }
            InitialSpec::SSample { v } => {
                let spec = self.s_spec.as_ref().ok_or_else(|| {
                    ScenarioError::Config("initial data of kind `s-sample` needs [s_spec]".into())
                })?;
                let (w, z) = sample_s(spec, self.seed, grid)?;
                SystemState::Transformed(TransformedState {
                    w,
                    z,
                    v: v.sample(grid),
                })
            }
        })
    }

    /// Initial data in the given formulation. Original data are mapped
    /// forward with the scenario parameters; transformed data are mapped back
    /// with `lift` (for family data) or the scenario parameters.
    pub fn initial_state(
        &self,
        grid: &Arc<RadialGrid>,
        target: Formulation,
    ) -> Result<SystemState, ScenarioError> {
        let raw = self.raw_initial_state(grid)?;
        match (raw, target) {
            (s @ SystemState::Transformed(_), Formulation::Transformed)
            | (s @ SystemState::Original(_), Formulation::Original) => Ok(s),
            (SystemState::Original(s), Formulation::Transformed) => match self.params {
                ModelParams::Original(p) => Ok(SystemState::Transformed(transform_state(&s, &p)?)),
                ModelParams::Transformed(_) => Err(ScenarioError::Config(
                    "original-form initial data needs original parameters to be transformed".into(),
                )),
            },
            (SystemState::Transformed(s), Formulation::Original) => {
                let (lift, base_v2) = match &self.initial {
                    InitialSpec::Family { lift, base_v2, .. } => (*lift, *base_v2),
                    _ => (None, None),
                };
                let params = match (lift, self.params) {
                    (Some(p), _) | (None, ModelParams::Original(p)) => p,
                    (None, ModelParams::Transformed(_)) => {
                        return Err(ScenarioError::Config(
                            "lifting transformed data needs original parameters".into(),
                        ))
                    }
                };
                let original = match base_v2 {
                    Some(b) => lift_to_original(&s.w, &s.z, &b.sample(grid), &params)?,
                    None => inverse_transform_state(&s, &params)?,
                };
                Ok(SystemState::Original(original))
            }
        }
    }

    /// Runs the scenario and condenses the outcome.
    pub fn execute(&self) -> Result<ScenarioRun, ScenarioError> {
        let grid = self.build_grid()?;
        let stepper = self.stepper()?;
        let initial = self.initial_state(&grid, stepper.formulation())?;
        let membership = match (&self.s_spec, &initial) {
            (Some(spec), SystemState::Transformed(s)) => Some(s_membership(&s.w, &s.z, spec)),
            _ => None,
        };
        let outcome = run(initial, stepper.as_ref(), &self.sim)?;
        let summary = Summary::new(self, stepper.as_ref(), &outcome, membership);
        Ok(ScenarioRun { outcome, summary })
    }
}

fn check_mass(mass: Option<f64>) -> Result<(), ScenarioError> {
    match mass {
        Some(m) if !(m > 0.0 && m.is_finite()) => Err(ScenarioError::Config(format!(
            "mass must be positive and finite, got {m}"
        ))),
        _ => Ok(()),
    }
}

fn rescale(f: RadialField, mass: Option<f64>) -> Result<RadialField, ScenarioError> {
    let Some(m) = mass else {
        return Ok(f);
    };
    let current = crate::geometry::integrate(&f);
    if !(current > 0.0) {
        return Err(ScenarioError::Config(
            "cannot rescale a profile with nonpositive mass".into(),
        ));
    }
    Ok(f.scaled(m / current))
}

/// A finished run together with its summary.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub outcome: RunOutcome,
    pub summary: Summary,
}

/// Comparison ODE fitted to `y = −F − 1` along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFit {
    pub fit: EmpiricalFit,
    pub y0: f64,
    /// Blow-up time of the fitted ODE from `y0`; `None` when it survives.
    pub predicted_blowup_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub code_version: String,
    pub csv_columns: Vec<String>,
    pub system: String,
    pub formulation: Formulation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transformed_params: Option<TransformedParams>,
    pub status: RunStatus,
    pub blowup_signal: Option<BlowUpSignal>,
    pub t_final: f64,
    pub supnorm_final: f64,
    pub steps: u64,
    pub rejections: u64,
    pub stats: RunStats,
    pub final_record: Option<DiagnosticsRecord>,
    #[serde(rename = "monotone_F")]
    pub monotone_f: Option<bool>,
    pub monotonicity: Option<MonotonicityReport>,
    pub max_abs_residual: Option<f64>,
    pub min_young_slack: Option<f64>,
    pub max_lemma31_ratio: Option<f64>,
    pub theta: f64,
    pub initial_s_membership: Option<SMembershipReport>,
    pub comparison_ode: Option<ComparisonFit>,
    pub config: Scenario,
}

impl Summary {
    fn new(
        scenario: &Scenario,
        stepper: &dyn Stepper,
        outcome: &RunOutcome,
        membership: Option<SMembershipReport>,
    ) -> Self {
        let records = &outcome.trajectory;
        let monotonicity = check_monotone_energy(records);
        let max_of = |f: fn(&DiagnosticsRecord) -> Option<f64>| {
            records.iter().filter_map(f).reduce(f64::max)
        };
        let dim = scenario.grid.dim;
        let th = theta(dim, scenario.sim.monitor.kappa);
        let regime = match scenario.params {
            ModelParams::Original(p) => Some(p.classify()),
            ModelParams::Transformed(_) => None,
        };
        Summary {
            name: scenario.name.clone(),
            code_version: CODE_VERSION.into(),
            csv_columns: DiagnosticsRecord::COLUMNS.iter().map(|s| s.to_string()).collect(),
            system: stepper.name().into(),
            formulation: stepper.formulation(),
            regime,
            transformed_params: scenario.transformed_params().ok(),
            status: outcome.status,
            blowup_signal: outcome.blowup_signal,
            t_final: outcome.t_final,
            supnorm_final: outcome.supnorm_final,
            steps: outcome.steps,
            rejections: outcome.rejections,
            stats: outcome.stats,
            final_record: records.last().cloned(),
            monotone_f: monotonicity.map(|m| m.monotone),
            monotonicity,
            max_abs_residual: max_of(|r| r.residual.map(f64::abs)),
            min_young_slack: records.iter().filter_map(|r| r.young_slack).reduce(f64::min),
            max_lemma31_ratio: max_of(|r| r.lemma31_ratio),
            theta: th,
            initial_s_membership: membership,
            comparison_ode: comparison_fit(records, th, scenario.sim.t_end),
            config: scenario.clone(),
        }
    }
}

fn comparison_fit(records: &[DiagnosticsRecord], theta: f64, t_end: f64) -> Option<ComparisonFit> {
    let (times, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| r.energy.map(|f| (r.t, -f - 1.0)))
        .unzip();
    let fit = fit_constants(&times, &ys, theta)?;
    let y0 = *ys.first()?;
    let predicted = OdeSpec::new(y0, fit.c2, fit.c3, theta, 1e3 * t_end)
        .ok()
        .and_then(|spec| match ode_blowup(&spec) {
            OdeOutcome::Finite(t) => Some(t),
            OdeOutcome::Survives(_) => None,
        });
    Some(ComparisonFit {
        fit,
        y0,
        predicted_blowup_time: predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::BaseSignal;

    const MINIMAL: &str = r#"
name = "minimal"
[params]
a = 4.0
b = 0.0
c = 1.0
d = 1.0
[grid]
cells = 32
[initial]
kind = "transformed"
w = { kind = "cosine", amplitude = 0.5, offset = 1.0 }
z = { kind = "constant", value = 0.0 }
[sim]
t_end = 0.01
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.system, "transformed");
        assert_eq!(s.grid.radius, 1.0);
        assert_eq!(s.grid.dim, 3);
        assert_eq!(s.output, OutputSpec::default());
        let run = s.execute().unwrap();
        assert_eq!(run.summary.status, RunStatus::ReachedHorizon);
        assert_eq!(run.summary.monotone_f, Some(true));
    }

    #[test]
    fn scenario_round_trips_through_toml() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_keys_and_names_are_config_errors() {
        let typo = MINIMAL.replace("t_end", "t_ned");
        assert_eq!(Scenario::from_toml_str(&typo).unwrap_err().exit_code(), 1);
        let system = MINIMAL.replace("name = \"minimal\"", "name = \"m\"\nsystem = \"nope\"");
        let err = Scenario::from_toml_str(&system).unwrap_err();
        assert!(err.to_string().contains("available"), "{err}");
        let scheme = MINIMAL.replace("t_end = 0.01", "t_end = 0.01\nadvection_scheme = \"weno\"");
        assert_eq!(Scenario::from_toml_str(&scheme).unwrap_err().exit_code(), 1);
        let bad_name = MINIMAL.replace("\"minimal\"", "\"a/b\"");
        assert_eq!(Scenario::from_toml_str(&bad_name).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn original_system_needs_original_parameters() {
        let s = MINIMAL.replace("name = \"minimal\"", "name = \"m\"\nsystem = \"original\"");
        assert_eq!(Scenario::from_toml_str(&s).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn family_data_lifts_to_the_original_system() {
        let mut s = Scenario::from_toml_str(MINIMAL).unwrap();
        let p = OriginalParams::new(2.0, 1.0, 3.0, 1.0, 1.0, 4.0).unwrap();
        s.params = ModelParams::Original(p);
        s.grid.cells = 64;
        let mut family = FamilySpec::new(1.0, Profile::Constant { value: 1.0 }, 4);
        family.base_z = BaseSignal::Profile(Profile::Constant { value: 0.2 });
        s.initial = InitialSpec::Family {
            family,
            lift: None,
            base_v2: Some(Profile::Constant { value: 0.5 }),
        };
        let g = s.build_grid().unwrap();
        let SystemState::Transformed(t) = s.initial_state(&g, Formulation::Transformed).unwrap() else {
            panic!("expected transformed data");
        };
        let SystemState::Original(o) = s.initial_state(&g, Formulation::Original).unwrap() else {
            panic!("expected original data");
        };
        let back = transform_state(&o, &p).unwrap();
        for (x, y) in back.z.values().iter().zip(t.z.values()) {
            assert!((x - y).abs() < 1e-14);
        }
        for (x, y) in back.w.values().iter().zip(t.w.values()) {
            assert!((x - y).abs() < 1e-13 * y.abs().max(1.0));
        }
    }

    #[test]
    fn mass_rescaling_applies_to_the_density() {
        let text = MINIMAL.replace("z = {", "mass = 3.0\nz = {");
        let s = Scenario::from_toml_str(&text).unwrap();
        let g = s.build_grid().unwrap();
        let state = s.initial_state(&g, Formulation::Transformed).unwrap();
        assert!((crate::geometry::integrate(state.density()) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = Scenario::load(Path::new("/nonexistent/scenario.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
