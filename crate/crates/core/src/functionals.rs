//! Energy, dissipation and the trajectory monitors.
//!
//! For a transformed state `(w, z, v)` with parameters `(a, b, c, d)`:
//!
//! ```text
//! F = ∫ w ln w + (a/2)∫ z² + (1/2)∫ |∇z|² − ∫ w z
//! D = ∫ w |∇(ln w − z)|² + ∫ f²,      f = a z − Δz − w
//! dF/dt + D = b ∫ v f
//! ```
//!
//! `f` is the stationarity defect of the `z` equation: `z_t = −f + b v`.
//! The source `b∫vf` has no sign, and `b∫vf ≤ D/2 + (b²/2)∫v²` holds cell by
//! cell because `D` contains `∫f²`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{grad_faces, integrate, laplacian, RadialField};
use crate::model::{TransformedParams, TransformedState};
use crate::registry::Registry;

/// Densities at or below this value count as zero: `x ln x → 0` and no
/// contribution to the weighted gradient term.
pub const W_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FunctionalsError {
    #[error("record times must be strictly increasing (got {0}, {1}, {2})")]
    Spacing(f64, f64, f64),
    #[error("record at t = {0} carries no energy values")]
    MissingEnergy(f64),
}

/// Face value of `w` in the first dissipation term.
pub trait FaceMean: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn mean(&self, a: f64, b: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicMean;

impl FaceMean for HarmonicMean {
    fn name(&self) -> &'static str {
        "harmonic"
    }
    fn mean(&self, a: f64, b: f64) -> f64 {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArithmeticMean;

impl FaceMean for ArithmeticMean {
    fn name(&self) -> &'static str {
        "arithmetic"
    }
    fn mean(&self, a: f64, b: f64) -> f64 {
        0.5 * (a + b)
    }
}

pub fn face_mean_registry() -> Registry<Arc<dyn FaceMean>> {
    Registry::new("face mean")
        .with(
            "harmonic",
            "harmonic mean of neighbouring densities (default)",
            Arc::new(HarmonicMean) as Arc<dyn FaceMean>,
        )
        .with("arithmetic", "arithmetic mean of neighbouring densities", Arc::new(ArithmeticMean))
}

fn entropy_density(w: f64) -> f64 {
    if w <= W_FLOOR {
        0.0
    } else {
        w * w.ln()
    }
}

/// `f = a z − Δz − w`, cellwise.
pub fn stationarity_defect(w: &RadialField, z: &RadialField, a: f64) -> RadialField {
    let lap = laplacian(z);
    let vals = z
        .values()
        .iter()
        .zip(lap.values())
        .zip(w.values())
        .map(|((&z, &lz), &w)| a * z - lz - w)
        .collect();
    RadialField::new(Arc::clone(z.grid()), vals).expect("same grid")
}

pub fn energy_f(w: &RadialField, z: &RadialField, a: f64) -> f64 {
    let grid = w.grid();
    let per_cell: Vec<f64> = w
        .values()
        .iter()
        .zip(z.values())
        .map(|(&w, &z)| entropy_density(w) + 0.5 * a * z * z - w * z)
        .collect();
    let g = grad_faces(z);
    let g2: Vec<f64> = g.iter().map(|g| g * g).collect();
    grid.integrate_slice(&per_cell) + 0.5 * grid.integrate_faces(&g2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    /// `∫ w |∇(ln w − z)|²`
    pub gradient: f64,
    /// `∫ (a z − Δz − w)²`
    pub stationarity: f64,
}

impl Dissipation {
    pub fn total(&self) -> f64 {
        self.gradient + self.stationarity
    }
}

pub fn dissipation_parts(
    w: &RadialField,
    z: &RadialField,
    a: f64,
    mean: &dyn FaceMean,
) -> Dissipation {
    let grid = w.grid();
    let h = grid.h();
    let wv = w.values();
    let zv = z.values();
    let n = grid.cells();
    let mut phi = vec![0.0; n + 1];
    for face in 1..n {
        let (wl, wr) = (wv[face - 1], wv[face]);
        if wl <= W_FLOOR || wr <= W_FLOOR {
            continue;
        }
        let dlog = (wr.ln() - wl.ln()) / h;
        let dz = (zv[face] - zv[face - 1]) / h;
        phi[face] = mean.mean(wl, wr) * (dlog - dz).powi(2);
    }
    let defect = stationarity_defect(w, z, a);
    let sq: Vec<f64> = defect.values().iter().map(|f| f * f).collect();
    Dissipation {
        gradient: grid.integrate_faces(&phi),
        stationarity: grid.integrate_slice(&sq),
    }
}

/// `D` with harmonic face means.
pub fn dissipation_d(w: &RadialField, z: &RadialField, a: f64) -> f64 {
    dissipation_parts(w, z, a, &HarmonicMean).total()
}

/// `b ∫ v (a z − Δz − w)`.
pub fn source_term(w: &RadialField, z: &RadialField, v: &RadialField, a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let defect = stationarity_defect(w, z, a);
    b * integrate(&defect.zip_map(v, |f, v| f * v))
}

/// Defect of the energy identity at the middle of three samples,
/// `|F'(t₁) + D(t₁) − S(t₁)|`, with `F'` the three-point derivative for
/// possibly unequal spacing (the centered difference when equal).
pub fn energy_residual_from(
    times: [f64; 3],
    energies: [f64; 3],
    dissipation: f64,
    source: f64,
) -> Result<f64, FunctionalsError> {
    let [t0, t1, t2] = times;
    let (h1, h2) = (t1 - t0, t2 - t1);
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(FunctionalsError::Spacing(t0, t1, t2));
    }
    let [f0, f1, f2] = energies;
    let deriv = -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2;
    Ok((deriv + dissipation - source).abs())
}

pub fn energy_residual(
    prev: &DiagnosticsRecord,
    cur: &DiagnosticsRecord,
    next: &DiagnosticsRecord,
) -> Result<f64, FunctionalsError> {
    let energy = |r: &DiagnosticsRecord| r.energy.ok_or(FunctionalsError::MissingEnergy(r.t));
    let e = cur.energy.ok_or(FunctionalsError::MissingEnergy(cur.t))?;
    energy_residual_from(
        [prev.t, cur.t, next.t],
        [energy(prev)?, e, energy(next)?],
        cur.dissipation.ok_or(FunctionalsError::MissingEnergy(cur.t))?,
        cur.source.ok_or(FunctionalsError::MissingEnergy(cur.t))?,
    )
}

/// Fills `residual` on every interior record whose neighbours carry energy
/// values. The first and last records have no centered derivative.
pub fn fill_residuals(records: &mut [DiagnosticsRecord]) {
    for i in 1..records.len().saturating_sub(1) {
        let r = energy_residual(&records[i - 1], &records[i], &records[i + 1]).ok();
        records[i].residual = r;
    }
}

/// Time integral (trapezoidal) of the absolute recorded residual over `[t_start, t_end]`.
pub fn integrated_residual(records: &[DiagnosticsRecord], t_start: f64, t_end: f64) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= t_start && r.t <= t_end)
        .filter_map(|r| r.residual.map(|res| (r.t, res.abs())))
        .collect();
    pts.windows(2)
        .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// Largest observed `F(t_{k+1}) − F(t_k)`.
    pub max_increase: f64,
    /// Largest recorded energy residual, the per-unit-time slack allowed.
    pub residual_bound: f64,
}

/// `F(t_{k+1}) ≤ F(t_k) + (t_{k+1} − t_k)·max residual + 1e−12(1 + |F|)`.
pub fn check_monotone_energy(records: &[DiagnosticsRecord]) -> Option<MonotonicityReport> {
    let with_energy: Vec<&DiagnosticsRecord> = records.iter().filter(|r| r.energy.is_some()).collect();
    if with_energy.len() < 2 {
        return None;
    }
    let residual_bound = records
        .iter()
        .filter_map(|r| r.residual)
        .fold(0.0, f64::max);
    let mut monotone = true;
    let mut max_increase = f64::NEG_INFINITY;
    for pair in with_energy.windows(2) {
        let (f0, f1) = (pair[0].energy?, pair[1].energy?);
        let dt = pair[1].t - pair[0].t;
        let increase = f1 - f0;
        max_increase = max_increase.max(increase);
        if increase > dt * residual_bound + 1e-12 * (1.0 + f0.abs()) {
            monotone = false;
        }
    }
    Some(MonotonicityReport {
        monotone,
        max_increase,
        residual_bound,
    })
}

/// Exponents used by the trajectory monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Lebesgue exponent of the `∇z` monitor; admissible in `(1, n/(n−1))`.
    pub p: f64,
    /// Decay exponent of the pointwise envelope; admissible above `n − 2`.
    pub kappa: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { p: 1.25, kappa: 1.5 }
    }
}

impl MonitorConfig {
    pub fn p_admissible(&self, dim: usize) -> bool {
        let n = dim as f64;
        self.p > 1.0 && self.p < n / (n - 1.0)
    }

    pub fn kappa_admissible(&self, dim: usize) -> bool {
        self.kappa > dim as f64 - 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    pub z_l1: f64,
    pub grad_z_lp: f64,
    pub decay_envelope: f64,
    pub v_l2: f64,
    pub p_admissible: bool,
}

/// `‖∇z‖_{Lᵖ}` by face quadrature.
pub fn grad_lp_norm(z: &RadialField, p: f64) -> f64 {
    let g = grad_faces(z);
    let gp: Vec<f64> = g.iter().map(|g| g.abs().powf(p)).collect();
    z.grid().integrate_faces(&gp).powf(1.0 / p)
}

/// `max_j r_j^κ |z_j|`.
pub fn decay_envelope(z: &RadialField, kappa: f64) -> f64 {
    z.grid()
        .centers()
        .iter()
        .zip(z.values())
        .fold(0.0, |m, (&r, &z)| m.max(r.powf(kappa) * z.abs()))
}

pub fn monitors(z: &RadialField, v: &RadialField, cfg: &MonitorConfig) -> Monitors {
    Monitors {
        z_l1: integrate(&z.map(f64::abs)),
        grad_z_lp: grad_lp_norm(z, cfg.p),
        decay_envelope: decay_envelope(z, cfg.kappa),
        v_l2: integrate(&v.map(|v| v * v)).sqrt(),
        p_admissible: cfg.p_admissible(z.grid().dim()),
    }
}

/// Parameters of the admissible set: mass `m`, L¹ budget for `z`, and the
/// pointwise decay bound `|z(x)| ≤ B|x|^{−κ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SMembershipSpec {
    pub m: f64,
    #[serde(rename = "l1_budget")]
    pub l1_budget: f64,
    #[serde(rename = "decay_amplitude")]
    pub decay_amplitude: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid S-set specification: {0}")]
pub struct SpecError(pub String);

impl SMembershipSpec {
    pub fn new(m: f64, l1_budget: f64, decay_amplitude: f64, kappa: f64) -> Result<Self, SpecError> {
        for (name, v) in [("m", m), ("l1_budget", l1_budget), ("decay_amplitude", decay_amplitude), ("kappa", kappa)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpecError(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            m,
            l1_budget,
            decay_amplitude,
            kappa,
        })
    }

    pub fn validate_for(&self, dim: usize) -> Result<(), SpecError> {
        if self.kappa <= dim as f64 - 2.0 {
            return Err(SpecError(format!(
                "kappa = {} must exceed n − 2 = {}",
                self.kappa,
                dim as f64 - 2.0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMembershipReport {
    pub mass_err: f64,
    pub z_l1: f64,
    pub envelope: f64,
    pub w_positive: bool,
    pub mass_ok: bool,
    pub l1_ok: bool,
    pub envelope_ok: bool,
    pub kappa_admissible: bool,
}

impl SMembershipReport {
    pub fn passes(&self) -> bool {
        self.w_positive && self.mass_ok && self.l1_ok && self.envelope_ok && self.kappa_admissible
    }
}

pub fn s_membership(w: &RadialField, z: &RadialField, spec: &SMembershipSpec) -> SMembershipReport {
    let mass_err = (integrate(w) - spec.m).abs();
    let z_l1 = integrate(&z.map(f64::abs));
    let envelope = decay_envelope(z, spec.kappa);
    SMembershipReport {
        mass_err,
        z_l1,
        envelope,
        w_positive: w.values().iter().all(|&w| w > 0.0),
        mass_ok: mass_err <= 1e-10 * spec.m.max(1.0),
        l1_ok: z_l1 <= spec.l1_budget,
        envelope_ok: envelope <= spec.decay_amplitude,
        kappa_admissible: spec.kappa > w.grid().dim() as f64 - 2.0,
    }
}

/// Interpolation exponent `θ = 1/(1 + n/((2n+4)κ))`, in `(1/2, 1)` for `κ > n−2`.
pub fn theta(dim: usize, kappa: f64) -> f64 {
    let n = dim as f64;
    1.0 / (1.0 + n / ((2.0 * n + 4.0) * kappa))
}

/// Ingredients of the estimate `∫w|z| ≤ C(‖f‖^{2θ} + ‖√w∇(ln w − z)‖ + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma31 {
    /// `∫ w|z|`
    pub lhs: f64,
    /// `‖Δz − az + w‖_{L²}`
    pub q1: f64,
    /// `‖√w ∇(ln w − z)‖_{L²}`
    pub q2: f64,
}

impl Lemma31 {
    /// Empirical surrogate for the constant: `lhs / (q1^{2θ} + q2 + 1)`.
    pub fn ratio(&self, theta: f64) -> f64 {
        self.lhs / (self.q1.powf(2.0 * theta) + self.q2 + 1.0)
    }
}

pub fn lemma31_quantities(w: &RadialField, z: &RadialField, a: f64) -> Lemma31 {
    let parts = dissipation_parts(w, z, a, &HarmonicMean);
    Lemma31 {
        lhs: integrate(&w.zip_map(z, |w, z| w * z.abs())),
        q1: parts.stationarity.sqrt(),
        q2: parts.gradient.sqrt(),
    }
}

/// One row of the diagnostics time series.
///
/// Energy quantities are `None` for states that have no transformed
/// counterpart (original-system runs outside the attraction-dominated
/// regime) and `residual` is `None` at the ends of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_w: f64,
    pub supnorm_w: f64,
    pub energy: Option<f64>,
    pub dissipation: Option<f64>,
    pub source: Option<f64>,
    pub residual: Option<f64>,
    /// `D/2 + (b²/2)∫v² − source`; nonnegative by Young's inequality.
    pub young_slack: Option<f64>,
    pub z_l1: f64,
    pub grad_z_lp: f64,
    pub decay_envelope: f64,
    pub v_l2: f64,
    pub lemma31: Option<Lemma31>,
    pub lemma31_ratio: Option<f64>,
}

impl DiagnosticsRecord {
    /// Column names in output order.
    pub const COLUMNS: [&'static str; 16] = [
        "t",
        "mass_w",
        "supnorm_w",
        "F",
        "D",
        "source",
        "residual",
        "young_slack",
        "z_l1",
        "grad_z_lp",
        "decay_envelope",
        "v_l2",
        "lemma31_lhs",
        "lemma31_q1",
        "lemma31_q2",
        "lemma31_ratio",
    ];

    pub fn columns(&self) -> [Option<f64>; 16] {
        [
            Some(self.t),
            Some(self.mass_w),
            Some(self.supnorm_w),
            self.energy,
            self.dissipation,
            self.source,
            self.residual,
            self.young_slack,
            Some(self.z_l1),
            Some(self.grad_z_lp),
            Some(self.decay_envelope),
            Some(self.v_l2),
            self.lemma31.map(|l| l.lhs),
            self.lemma31.map(|l| l.q1),
            self.lemma31.map(|l| l.q2),
            self.lemma31_ratio,
        ]
    }
}

/// Full record for a transformed state.
pub fn diagnose_transformed(
    t: f64,
    state: &TransformedState,
    params: &TransformedParams,
    cfg: &MonitorConfig,
    mean: &dyn FaceMean,
) -> DiagnosticsRecord {
    let TransformedState { w, z, v } = state;
    let mon = monitors(z, v, cfg);
    let energy = energy_f(w, z, params.a);
    let parts = dissipation_parts(w, z, params.a, mean);
    let d = parts.total();
    let source = source_term(w, z, v, params.a, params.b);
    let lemma = Lemma31 {
        lhs: integrate(&w.zip_map(z, |w, z| w * z.abs())),
        q1: parts.stationarity.sqrt(),
        q2: parts.gradient.sqrt(),
    };
    let th = theta(w.grid().dim(), cfg.kappa);
    DiagnosticsRecord {
        t,
        mass_w: integrate(w),
        supnorm_w: w.max(),
        energy: Some(energy),
        dissipation: Some(d),
        source: Some(source),
        residual: None,
        young_slack: Some(0.5 * d + 0.5 * params.b * params.b * mon.v_l2 * mon.v_l2 - source),
        z_l1: mon.z_l1,
        grad_z_lp: mon.grad_z_lp,
        decay_envelope: mon.decay_envelope,
        v_l2: mon.v_l2,
        lemma31: Some(lemma),
        lemma31_ratio: Some(lemma.ratio(th)),
    }
}

/// Monitor-only record for states without energy structure.
pub fn diagnose_monitors_only(
    t: f64,
    density: &RadialField,
    z: &RadialField,
    v: &RadialField,
    cfg: &MonitorConfig,
) -> DiagnosticsRecord {
    let mon = monitors(z, v, cfg);
    DiagnosticsRecord {
        t,
        mass_w: integrate(density),
        supnorm_w: density.max(),
        energy: None,
        dissipation: None,
        source: None,
        residual: None,
        young_slack: None,
        z_l1: mon.z_l1,
        grad_z_lp: mon.grad_z_lp,
        decay_envelope: mon.decay_envelope,
        v_l2: mon.v_l2,
        lemma31: None,
        lemma31_ratio: None,
    }
}
