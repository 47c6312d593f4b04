//! IMEX Euler time stepping for both formulations, adaptive step control and
//! blow-up detection.
//!
//! Each step treats diffusion and linear decay implicitly (one tridiagonal
//! solve per unknown) and the chemotactic flux and cross sources explicitly
//! with beginning-of-step values. A step that produces a negative density or
//! signal is rejected and retried with half the step.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advection::{scheme_registry, AdvectionScheme};
use crate::functionals::{
    diagnose_monitors_only, diagnose_transformed, face_mean_registry, fill_residuals,
    DiagnosticsRecord, FaceMean, MonitorConfig,
};
use crate::geometry::{integrate, RadialField, RadialGrid};
use crate::model::{
    transform_state, ModelError, OriginalParams, OriginalState, Regime, TransformedParams,
    TransformedState,
};
use crate::registry::{Registry, UnknownEntry};
use crate::tridiag::{solve_shifted_diffusion_many, SolverFailure};

/// Number of trailing accepted steps whose sup-norms must increase strictly
/// before step starvation counts as blow-up.
pub const MONOTONE_WINDOW: usize = 10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StepError {
    #[error("component {component} lost positivity at cell {cell} ({value})")]
    PositivityLoss {
        component: &'static str,
        cell: usize,
        value: f64,
    },
    #[error(transparent)]
    Solver(#[from] SolverFailure),
    #[error("stepper `{stepper}` cannot advance a {found} state")]
    StateMismatch {
        stepper: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

impl From<UnknownEntry> for ConfigError {
    fn from(e: UnknownEntry) -> Self {
        ConfigError(e.to_string())
    }
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The step size fell below `dt_min` without the sup-norm growing
    /// monotonically, so the run neither reached the horizon nor blew up.
    #[error("step size starved at t = {t} (dt = {dt}) without monotone sup-norm growth")]
    StepStarvation { t: f64, dt: f64 },
    #[error("step limit of {0} accepted steps exhausted")]
    StepLimit(u64),
}

fn default_dt_init() -> f64 {
    1e-5
}
fn default_dt_min() -> f64 {
    1e-14
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_cfl() -> f64 {
    0.9
}
fn default_threshold() -> f64 {
    1e6
}
fn default_stride() -> u64 {
    1
}
fn default_scheme() -> String {
    "upwind".into()
}
fn default_face_mean() -> String {
    "harmonic".into()
}
fn default_max_steps() -> u64 {
    200_000_000
}

/// Time stepping and detection settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub t_end: f64,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    /// Absolute sup-norm of the density at which blow-up is declared.
    #[serde(default = "default_threshold")]
    pub blowup_supnorm_threshold: f64,
    #[serde(default = "default_stride")]
    pub output_stride: u64,
    #[serde(default = "default_scheme")]
    pub advection_scheme: String,
    #[serde(default = "default_face_mean")]
    pub face_mean: String,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

impl SimConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            dt_init: default_dt_init(),
            dt_min: default_dt_min(),
            dt_max: default_dt_max(),
            cfl_safety: default_cfl(),
            blowup_supnorm_threshold: default_threshold(),
            output_stride: default_stride(),
            advection_scheme: default_scheme(),
            face_mean: default_face_mean(),
            monitor: MonitorConfig::default(),
            max_steps: default_max_steps(),
        }
    }

    /// Uses `dt` for every step (as long as the stability bound allows it).
    pub fn with_fixed_dt(mut self, dt: f64) -> Self {
        self.dt_init = dt;
        self.dt_max = dt;
        self.dt_min = self.dt_min.min(dt);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("t_end", self.t_end)?;
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        positive("blowup_supnorm_threshold", self.blowup_supnorm_threshold)?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(ConfigError(format!(
                "need dt_min ≤ dt_init ≤ dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(ConfigError(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.output_stride == 0 {
            return Err(ConfigError("output_stride must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(ConfigError("max_steps must be at least 1".into()));
        }
        if !(self.monitor.p > 1.0 && self.monitor.p.is_finite()) {
            return Err(ConfigError(format!("monitor.p must exceed 1, got {}", self.monitor.p)));
        }
        positive("monitor.kappa", self.monitor.kappa)?;
        scheme_registry().get(&self.advection_scheme)?;
        face_mean_registry().get(&self.face_mean)?;
        Ok(())
    }
}

/// Parameters in either formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelParams {
    Original(OriginalParams),
    Transformed(TransformedParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Original,
    Transformed,
}

/// State in either formulation.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemState {
    Original(OriginalState),
    Transformed(TransformedState),
}

impl SystemState {
    pub fn formulation(&self) -> Formulation {
        match self {
            SystemState::Original(_) => Formulation::Original,
            SystemState::Transformed(_) => Formulation::Transformed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SystemState::Original(_) => "original",
            SystemState::Transformed(_) => "transformed",
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        match self {
            SystemState::Original(s) => s.u.grid(),
            SystemState::Transformed(s) => s.w.grid(),
        }
    }

    /// The chemotactic density (`u` or `w`).
    pub fn density(&self) -> &RadialField {
        match self {
            SystemState::Original(s) => &s.u,
            SystemState::Transformed(s) => &s.w,
        }
    }

    /// The signal whose mean obeys the linear balance (`v₁` or `v`).
    pub fn signal(&self) -> &RadialField {
        match self {
            SystemState::Original(s) => &s.v1,
            SystemState::Transformed(s) => &s.v,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SystemState::Original(s) => s.u.is_finite() && s.v1.is_finite() && s.v2.is_finite(),
            SystemState::Transformed(s) => s.w.is_finite() && s.z.is_finite() && s.v.is_finite(),
        }
    }
}

fn require_nonnegative(component: &'static str, values: &[f64]) -> Result<(), StepError> {
    for (cell, &value) in values.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(StepError::PositivityLoss {
                component,
                cell,
                value,
            });
        }
    }
    Ok(())
}

/// Explicit part of the density update, `ρ − dt·Σ_i ∇·(ρ·c_i∇s_i)`, for
/// drifts `c_i∇s_i` given as `(c_i, s_i)`. Each flux is evaluated with its
/// own velocity, so upwinding follows each drift separately.
fn transported<const K: usize>(
    grid: &RadialGrid,
    density: &[f64],
    drifts: [(f64, &[f64]); K],
    scheme: Option<&dyn AdvectionScheme>,
    dt: f64,
) -> Vec<f64> {
    let mut rhs = density.to_vec();
    let Some(scheme) = scheme else {
        return rhs;
    };
    let n = density.len();
    let inv_h = 1.0 / grid.h();
    let mut flux = vec![0.0; n + 1];
    let mut vel = vec![0.0; n + 1];
    for (c, signal) in drifts {
        for f in 1..n {
            vel[f] = c * (signal[f] - signal[f - 1]) * inv_h;
        }
        scheme.accumulate_fluxes(density, &vel, grid.face_areas(), &mut flux);
    }
    for (j, (r, vol)) in rhs.iter_mut().zip(grid.volumes()).enumerate() {
        *r -= dt * (flux[j + 1] - flux[j]) / vol;
    }
    rhs
}

/// `max_f Σ_i |c_i·∇s_i|` over interior faces.
fn max_drift<const K: usize>(grid: &RadialGrid, drifts: [(f64, &[f64]); K]) -> f64 {
    let mut max = 0.0_f64;
    for f in 1..grid.cells() {
        let mut speed = 0.0;
        for (c, s) in &drifts {
            speed += (c * (s[f] - s[f - 1])).abs();
        }
        max = max.max(speed);
    }
    max / grid.h()
}

fn step_transformed_impl(
    s: &TransformedState,
    p: &TransformedParams,
    dt: f64,
    scheme: Option<&dyn AdvectionScheme>,
) -> Result<TransformedState, StepError> {
    let grid = Arc::clone(s.w.grid());
    let (w, z, v) = (s.w.values(), s.z.values(), s.v.values());
    let w_rhs = transported(&grid, w, [(1.0, z)], scheme, dt);
    let z_rhs: Vec<f64> = (0..w.len()).map(|j| z[j] + dt * (p.b * v[j] + w[j])).collect();
    let v_rhs: Vec<f64> = (0..w.len()).map(|j| v[j] + dt * p.d * w[j]).collect();
    let [w_new, z_new, v_new] = solve_shifted_diffusion_many(
        &grid,
        [1.0, 1.0 + p.a * dt, 1.0 + p.c * dt],
        dt,
        [&w_rhs, &z_rhs, &v_rhs],
    )?;
    require_nonnegative("w", &w_new)?;
    require_nonnegative("v", &v_new)?;
    Ok(TransformedState {
        w: RadialField::from_vec_unchecked(Arc::clone(&grid), w_new),
        z: RadialField::from_vec_unchecked(Arc::clone(&grid), z_new),
        v: RadialField::from_vec_unchecked(grid, v_new),
    })
}

fn step_original_impl(
    s: &OriginalState,
    p: &OriginalParams,
    dt: f64,
    scheme: Option<&dyn AdvectionScheme>,
) -> Result<OriginalState, StepError> {
    let grid = Arc::clone(s.u.grid());
    let (u, v1, v2) = (s.u.values(), s.v1.values(), s.v2.values());
    // Attraction drifts up ∇v₁, repulsion down ∇v₂.
    let u_rhs = transported(&grid, u, [(p.chi, v1), (-p.xi, v2)], scheme, dt);
    let v1_rhs: Vec<f64> = (0..u.len()).map(|j| v1[j] + dt * p.alpha * u[j]).collect();
    let v2_rhs: Vec<f64> = (0..u.len()).map(|j| v2[j] + dt * p.gamma * u[j]).collect();
    let [u_new, v1_new, v2_new] = solve_shifted_diffusion_many(
        &grid,
        [1.0, 1.0 + p.beta * dt, 1.0 + p.delta * dt],
        dt,
        [&u_rhs, &v1_rhs, &v2_rhs],
    )?;
    require_nonnegative("u", &u_new)?;
    require_nonnegative("v1", &v1_new)?;
    require_nonnegative("v2", &v2_new)?;
    Ok(OriginalState {
        u: RadialField::from_vec_unchecked(Arc::clone(&grid), u_new),
        v1: RadialField::from_vec_unchecked(Arc::clone(&grid), v1_new),
        v2: RadialField::from_vec_unchecked(grid, v2_new),
    })
}

/// One IMEX Euler step of the transformed system.
pub fn step_transformed(
    s: &TransformedState,
    p: &TransformedParams,
    dt: f64,
    scheme: &dyn AdvectionScheme,
) -> Result<TransformedState, StepError> {
    step_transformed_impl(s, p, dt, Some(scheme))
}

/// One IMEX Euler step of the original system.
pub fn step_original(
    s: &OriginalState,
    p: &OriginalParams,
    dt: f64,
    scheme: &dyn AdvectionScheme,
) -> Result<OriginalState, StepError> {
    step_original_impl(s, p, dt, Some(scheme))
}

/// A time integrator for one formulation.
pub trait Stepper: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    /// Formulation of the states this stepper advances.
    fn formulation(&self) -> Formulation;
    fn step(&self, state: &SystemState, dt: f64) -> Result<SystemState, StepError>;
    /// Largest face drift speed, which sets the advective step restriction.
    fn drift_speed(&self, state: &SystemState) -> f64;
    fn diagnose(
        &self,
        t: f64,
        state: &SystemState,
        monitor: &MonitorConfig,
        mean: &dyn FaceMean,
    ) -> DiagnosticsRecord;
    /// `(∫s_new − ∫s_old)/dt + k∫s_new − d∫ρ_old` for the signal `s` fed by
    /// the density `ρ`; vanishes up to rounding for the implicit Euler update.
    fn signal_balance_defect(&self, old: &SystemState, new: &SystemState, dt: f64) -> f64;
}

#[derive(Debug, Clone)]
pub struct TransformedStepper {
    pub params: TransformedParams,
    /// `None` switches chemotaxis off.
    pub scheme: Option<Arc<dyn AdvectionScheme>>,
}

impl TransformedStepper {
    fn unpack<'a>(&self, s: &'a SystemState) -> Result<&'a TransformedState, StepError> {
        match s {
            SystemState::Transformed(t) => Ok(t),
            other => Err(StepError::StateMismatch {
                stepper: self.name(),
                found: other.kind(),
            }),
        }
    }
}

impl Stepper for TransformedStepper {
    fn formulation(&self) -> Formulation {
        Formulation::Transformed
    }

    fn name(&self) -> &'static str {
        if self.scheme.is_some() {
            "transformed"
        } else {
            "diffusion-only"
        }
    }

    fn step(&self, state: &SystemState, dt: f64) -> Result<SystemState, StepError> {
        let s = self.unpack(state)?;
        step_transformed_impl(s, &self.params, dt, self.scheme.as_deref()).map(SystemState::Transformed)
    }

    fn drift_speed(&self, state: &SystemState) -> f64 {
        match (self.scheme.is_some(), state) {
            (true, SystemState::Transformed(s)) => max_drift(s.z.grid(), [(1.0, s.z.values())]),
            _ => 0.0,
        }
    }

    fn diagnose(
        &self,
        t: f64,
        state: &SystemState,
        monitor: &MonitorConfig,
        mean: &dyn FaceMean,
    ) -> DiagnosticsRecord {
        match state {
            SystemState::Transformed(s) => diagnose_transformed(t, s, &self.params, monitor, mean),
            SystemState::Original(s) => diagnose_monitors_only(t, &s.u, &s.v1, &s.v1, monitor),
        }
    }

    fn signal_balance_defect(&self, old: &SystemState, new: &SystemState, dt: f64) -> f64 {
        let (vo, vn) = (integrate(old.signal()), integrate(new.signal()));
        (vn - vo) / dt + self.params.c * vn - self.params.d * integrate(old.density())
    }
}

#[derive(Debug, Clone)]
pub struct OriginalStepper {
    pub params: OriginalParams,
    pub scheme: Option<Arc<dyn AdvectionScheme>>,
}

impl OriginalStepper {
    fn unpack<'a>(&self, s: &'a SystemState) -> Result<&'a OriginalState, StepError> {
        match s {
            SystemState::Original(o) => Ok(o),
            other => Err(StepError::StateMismatch {
                stepper: self.name(),
                found: other.kind(),
            }),
        }
    }
}

impl Stepper for OriginalStepper {
    fn formulation(&self) -> Formulation {
        Formulation::Original
    }

    fn name(&self) -> &'static str {
        if self.scheme.is_some() {
            "original"
        } else {
            "diffusion-only"
        }
    }

    fn step(&self, state: &SystemState, dt: f64) -> Result<SystemState, StepError> {
        let s = self.unpack(state)?;
        step_original_impl(s, &self.params, dt, self.scheme.as_deref()).map(SystemState::Original)
    }

    fn drift_speed(&self, state: &SystemState) -> f64 {
        match (self.scheme.is_some(), state) {
            (true, SystemState::Original(s)) => max_drift(
                s.u.grid(),
                [(self.params.chi, s.v1.values()), (self.params.xi, s.v2.values())],
            ),
            _ => 0.0,
        }
    }

    /// Attraction-dominated states are diagnosed through the transformed
    /// variables; otherwise only the monitors are available, evaluated on
    /// `u`, `z = χv₁ − ξv₂` and `v₁`.
    fn diagnose(
        &self,
        t: f64,
        state: &SystemState,
        monitor: &MonitorConfig,
        mean: &dyn FaceMean,
    ) -> DiagnosticsRecord {
        let s = match state {
            SystemState::Original(s) => s,
            SystemState::Transformed(s) => {
                return diagnose_monitors_only(t, &s.w, &s.z, &s.v, monitor)
            }
        };
        if self.params.classify() == Regime::AttractionDominated {
            let tp = self.params.transform().expect("attraction-dominated");
            let ts = transform_state(s, &self.params).expect("attraction-dominated");
            return diagnose_transformed(t, &ts, &tp, monitor, mean);
        }
        let p = &self.params;
        let z = s.v1.zip_map(&s.v2, |a, b| p.chi * a - p.xi * b);
        diagnose_monitors_only(t, &s.u, &z, &s.v1, monitor)
    }

    fn signal_balance_defect(&self, old: &SystemState, new: &SystemState, dt: f64) -> f64 {
        let (vo, vn) = (integrate(old.signal()), integrate(new.signal()));
        (vn - vo) / dt + self.params.beta * vn - self.params.alpha * integrate(old.density())
    }
}

/// Builds a stepper from model parameters and an advection scheme.
pub type StepperFactory =
    fn(&ModelParams, Arc<dyn AdvectionScheme>) -> Result<Box<dyn Stepper>, ConfigError>;

fn build_transformed(
    params: &ModelParams,
    scheme: Arc<dyn AdvectionScheme>,
) -> Result<Box<dyn Stepper>, ConfigError> {
    let params = match params {
        ModelParams::Transformed(p) => *p,
        ModelParams::Original(p) => p.transform()?,
    };
    Ok(Box::new(TransformedStepper {
        params,
        scheme: Some(scheme),
    }))
}

fn build_original(
    params: &ModelParams,
    scheme: Arc<dyn AdvectionScheme>,
) -> Result<Box<dyn Stepper>, ConfigError> {
    match params {
        ModelParams::Original(p) => Ok(Box::new(OriginalStepper {
            params: *p,
            scheme: Some(scheme),
        })),
        ModelParams::Transformed(_) => Err(ConfigError(
            "the original system needs parameters chi, xi, alpha, beta, gamma, delta".into(),
        )),
    }
}

fn build_diffusion_only(
    params: &ModelParams,
    _scheme: Arc<dyn AdvectionScheme>,
) -> Result<Box<dyn Stepper>, ConfigError> {
    Ok(match params {
        ModelParams::Original(p) => Box::new(OriginalStepper {
            params: *p,
            scheme: None,
        }),
        ModelParams::Transformed(p) => Box::new(TransformedStepper {
            params: *p,
            scheme: None,
        }),
    })
}

pub fn stepper_registry() -> Registry<StepperFactory> {
    Registry::new("system")
        .with(
            "transformed",
            "transformed (w, z, v) system; original parameters are mapped when attraction-dominated",
            build_transformed as StepperFactory,
        )
        .with("original", "original (u, v1, v2) system", build_original)
        .with(
            "diffusion-only",
            "either formulation with the chemotactic flux switched off",
            build_diffusion_only,
        )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    ReachedHorizon,
    BlowUpDetected,
}

/// Which signal declared blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpSignal {
    SupnormThreshold,
    StepStarvation,
}

/// Conservation and positivity statistics over every accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub initial_mass: f64,
    /// `max |∫ρ − ∫ρ₀| / ∫ρ₀` over accepted steps.
    pub max_relative_mass_drift: f64,
    pub min_density: f64,
    pub min_signal: f64,
    /// Largest `|signal balance defect|` relative to `1 + |d∫ρ|`.
    pub max_signal_balance_defect: f64,
    pub min_dt: f64,
    pub max_dt: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub blowup_signal: Option<BlowUpSignal>,
    pub t_final: f64,
    pub supnorm_final: f64,
    pub steps: u64,
    pub rejections: u64,
    pub trajectory: Vec<DiagnosticsRecord>,
    pub stats: RunStats,
    pub final_state: SystemState,
}

fn strictly_increasing(window: &VecDeque<f64>) -> bool {
    window.len() > MONOTONE_WINDOW && window.iter().zip(window.iter().skip(1)).all(|(a, b)| b > a)
}

/// Stability-limited step `cfl·h²/(2n + h·n·drift)`.
pub fn proposed_dt(grid: &RadialGrid, drift: f64, cfl_safety: f64) -> f64 {
    let (h, n) = (grid.h(), grid.dim() as f64);
    cfl_safety * h * h / (2.0 * n + h * n * drift)
}

/// Bookkeeping of a run in progress.
struct Progress<'a> {
    stepper: &'a dyn Stepper,
    config: &'a SimConfig,
    mean: Arc<dyn FaceMean>,
    t: f64,
    steps: u64,
    rejections: u64,
    stats: RunStats,
    trajectory: Vec<DiagnosticsRecord>,
    /// Whether the current state already has a trajectory record.
    recorded: bool,
}

impl Progress<'_> {
    fn record(&mut self, state: &SystemState) {
        let rec = self
            .stepper
            .diagnose(self.t, state, &self.config.monitor, self.mean.as_ref());
        self.trajectory.push(rec);
        self.recorded = true;
    }

    fn accept(&mut self, old: &SystemState, new: &SystemState, dt: f64) {
        let stats = &mut self.stats;
        let defect = self.stepper.signal_balance_defect(old, new, dt);
        let feed = integrate(old.density()).abs();
        stats.max_signal_balance_defect = stats.max_signal_balance_defect.max(defect.abs() / (1.0 + feed));
        stats.min_dt = stats.min_dt.min(dt);
        stats.max_dt = stats.max_dt.max(dt);
        let drift = (integrate(new.density()) - stats.initial_mass).abs();
        stats.max_relative_mass_drift = stats
            .max_relative_mass_drift
            .max(drift / stats.initial_mass.abs().max(f64::MIN_POSITIVE));
        stats.min_density = stats.min_density.min(new.density().min());
        stats.min_signal = stats.min_signal.min(new.signal().min());
        self.t += dt;
        self.steps += 1;
        self.recorded = false;
    }

    fn finish(
        mut self,
        status: RunStatus,
        signal: Option<BlowUpSignal>,
        state: SystemState,
    ) -> RunOutcome {
        if !self.recorded {
            self.record(&state);
        }
        fill_residuals(&mut self.trajectory);
        RunOutcome {
            status,
            blowup_signal: signal,
            t_final: self.t,
            supnorm_final: state.density().max(),
            steps: self.steps,
            rejections: self.rejections,
            trajectory: self.trajectory,
            stats: self.stats,
            final_state: state,
        }
    }
}

/// Advances `initial` to `config.t_end` or until blow-up is detected.
///
/// Blow-up is declared when the density sup-norm reaches
/// `blowup_supnorm_threshold`, or when the step size falls below `dt_min`
/// while the sup-norm rose strictly over the last [`MONOTONE_WINDOW`]
/// accepted steps. Starvation without that growth is an error.
pub fn run(
    initial: SystemState,
    stepper: &dyn Stepper,
    config: &SimConfig,
) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let mean = Arc::clone(face_mean_registry().get(&config.face_mean).map_err(ConfigError::from)?);
    if !initial.is_finite() {
        return Err(ConfigError("initial state has non-finite values".into()).into());
    }
    if initial.density().min() < 0.0 || initial.signal().min() < 0.0 {
        return Err(ConfigError("initial density and signal must be nonnegative".into()).into());
    }
    let grid = Arc::clone(initial.grid());
    let mut progress = Progress {
        stepper,
        config,
        mean,
        t: 0.0,
        steps: 0,
        rejections: 0,
        stats: RunStats {
            initial_mass: integrate(initial.density()),
            max_relative_mass_drift: 0.0,
            min_density: initial.density().min(),
            min_signal: initial.signal().min(),
            max_signal_balance_defect: 0.0,
            min_dt: f64::INFINITY,
            max_dt: 0.0,
        },
        trajectory: Vec::new(),
        recorded: false,
    };
    let mut state = initial;
    progress.record(&state);
    if state.density().max() >= config.blowup_supnorm_threshold {
        return Ok(progress.finish(RunStatus::BlowUpDetected, Some(BlowUpSignal::SupnormThreshold), state));
    }

    let mut recent = VecDeque::with_capacity(MONOTONE_WINDOW + 2);
    recent.push_back(state.density().max());
    let mut limit = config.dt_init;
    let horizon_slack = 1e-12 * config.t_end;
    while config.t_end - progress.t > horizon_slack {
        if progress.steps >= config.max_steps {
            return Err(RunError::StepLimit(config.max_steps));
        }
        let stable = proposed_dt(&grid, stepper.drift_speed(&state), config.cfl_safety);
        let remaining = config.t_end - progress.t;
        let mut dt = stable.min(config.dt_max).min(limit);
        if dt >= remaining || remaining - dt < config.dt_min {
            dt = remaining;
        }
        let starved = dt < config.dt_min;
        let next = if starved {
            None
        } else {
            match stepper.step(&state, dt) {
                Ok(next) if next.is_finite() => Some(next),
                Ok(_) | Err(StepError::PositivityLoss { .. }) => None,
                Err(e) => {
                    log::warn!("step failed at t = {}: {e}", progress.t);
                    None
                }
            }
        };
        let Some(next) = next else {
            progress.rejections += 1;
            limit = 0.5 * dt;
            if starved || limit < config.dt_min {
                if strictly_increasing(&recent) {
                    return Ok(progress.finish(
                        RunStatus::BlowUpDetected,
                        Some(BlowUpSignal::StepStarvation),
                        state,
                    ));
                }
                return Err(RunError::StepStarvation { t: progress.t, dt });
            }
            continue;
        };

        progress.accept(&state, &next, dt);
        state = next;
        limit = (2.0 * limit).min(config.dt_max).max(dt);
        let sup = state.density().max();
        recent.push_back(sup);
        if recent.len() > MONOTONE_WINDOW + 1 {
            recent.pop_front();
        }
        if progress.steps.is_multiple_of(config.output_stride) {
            progress.record(&state);
        }
        if sup >= config.blowup_supnorm_threshold {
            return Ok(progress.finish(RunStatus::BlowUpDetected, Some(BlowUpSignal::SupnormThreshold), state));
        }
    }
    Ok(progress.finish(RunStatus::ReachedHorizon, None, state))
}
