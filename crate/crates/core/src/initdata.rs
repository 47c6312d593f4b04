//! Initial data: baseline profiles, concentration families that drive the
//! energy to −∞ at fixed mass, random members of the admissible set, and
//! the Neumann–Helmholtz solve.
//!
//! The concentration family with index `k` on a ball of radius `R` is
//!
//! ```text
//! w_k = (1 − ε_k)·m·ŵ + ε_k·m·ρ_k,      ε_k = ε₀ k^{−σ}
//! z_k = z_base + λ_k ζ_k,              λ_k = Λ k^{μ}
//! ```
//!
//! with `ŵ` the unit-mass baseline, `ρ_k` the unit-mass plateau on `B_{R/k}`
//! (smoothed over one cell) and `ζ_k = (1 − k r/R)₊`. In three dimensions
//!
//! * `‖ε_k m ρ_k‖_{Lᵖ} ~ k^{3(1−1/p) − σ}`, so `w_k → m ŵ` in `Lᵖ` when
//!   `σ > 3(1 − 1/p)` (`0.2727…` for `p = 1.1`);
//! * `‖λ_k ζ_k‖_{W^{1,2}} ~ k^{μ − 1/2}`, so `z_k → z_base` when `μ < 1/2`;
//! * `−∫w_k z_k` gains `~ ε₀ m Λ k^{μ−σ}` while the entropy only pays
//!   `~ ε_k m ln k`, so `F(w_k, z_k) → −∞` when `μ > σ`.
//!
//! The defaults `σ = 0.3`, `μ = 0.45` sit inside all three windows.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::{decay_envelope, SMembershipSpec};
use crate::geometry::{grad_faces, integrate, RadialField, RadialGrid};
use crate::model::{OriginalParams, OriginalState, TransformedState};
use crate::tridiag::solve_shifted_diffusion;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InitError {
    #[error("concentration core B_(R/{k}) covers {cells:.2} cells; at least 3 are needed")]
    GridTooCoarse { k: u32, cells: f64 },
    #[error("invalid initial data: {0}")]
    Invalid(String),
}

/// Analytic radial profiles usable as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `offset + amplitude·exp(−r²/(2σ²))`
    Gaussian {
        amplitude: f64,
        sigma: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude` on `B_{r_in}`, `offset` outside, with a linear
    /// ramp one cell wide.
    Plateau {
        amplitude: f64,
        r_in: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude·cos(π r/R)`; satisfies the Neumann condition.
    Cosine {
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
}

/// Cell fraction of `B_{r_in}` with a one-cell linear ramp.
fn smoothed_indicator(r: f64, r_in: f64, h: f64) -> f64 {
    ((r_in - r) / h + 0.5).clamp(0.0, 1.0)
}

impl Profile {
    pub fn validate(&self) -> Result<(), InitError> {
        let finite = match *self {
            Profile::Constant { value } => value.is_finite(),
            Profile::Gaussian {
                amplitude,
                sigma,
                offset,
            } => amplitude.is_finite() && offset.is_finite() && sigma > 0.0 && sigma.is_finite(),
            Profile::Plateau {
                amplitude,
                r_in,
                offset,
            } => amplitude.is_finite() && offset.is_finite() && r_in > 0.0 && r_in.is_finite(),
            Profile::Cosine { amplitude, offset } => amplitude.is_finite() && offset.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(InitError::Invalid(format!("bad profile {self:?}")))
        }
    }

    pub fn sample(&self, grid: &Arc<RadialGrid>) -> RadialField {
        let (h, radius) = (grid.h(), grid.radius());
        match *self {
            Profile::Constant { value } => RadialField::constant(grid, value),
            Profile::Gaussian {
                amplitude,
                sigma,
                offset,
            } => RadialField::from_fn(grid, |r| offset + amplitude * (-r * r / (2.0 * sigma * sigma)).exp()),
            Profile::Plateau {
                amplitude,
                r_in,
                offset,
            } => RadialField::from_fn(grid, |r| offset + amplitude * smoothed_indicator(r, r_in, h)),
            Profile::Cosine { amplitude, offset } => RadialField::from_fn(grid, |r| {
                offset + amplitude * (std::f64::consts::PI * r / radius).cos()
            }),
        }
    }
}

fn default_epsilon() -> f64 {
    0.5
}
fn default_epsilon_exponent() -> f64 {
    0.3
}
fn default_lambda_scale() -> f64 {
    1.0
}
fn default_lambda_exponent() -> f64 {
    0.45
}
fn default_zero() -> Profile {
    Profile::Constant { value: 0.0 }
}
fn default_zero_signal() -> BaseSignal {
    BaseSignal::Profile(default_zero())
}

/// Baseline of the signal `z`: an analytic profile, or the solution of
/// `−Δz + s z = m ŵ`. The latter makes the baseline pair stationary for the
/// `z` equation with `a = s`, so the cross terms between the baseline and the
/// tent cancel in `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseSignal {
    Profile(Profile),
    Helmholtz { helmholtz_shift: f64 },
}

impl BaseSignal {
    pub fn validate(&self) -> Result<(), InitError> {
        match *self {
            BaseSignal::Profile(p) => p.validate(),
            BaseSignal::Helmholtz { helmholtz_shift } if helmholtz_shift > 0.0 && helmholtz_shift.is_finite() => Ok(()),
            BaseSignal::Helmholtz { helmholtz_shift } => Err(InitError::Invalid(format!(
                "helmholtz_shift must be positive, got {helmholtz_shift}"
            ))),
        }
    }

    /// Samples the baseline; `base_w` is the mass-normalized baseline density.
    pub fn sample(&self, base_w: &RadialField) -> Result<RadialField, InitError> {
        match *self {
            BaseSignal::Profile(p) => Ok(p.sample(base_w.grid())),
            BaseSignal::Helmholtz { helmholtz_shift } => helmholtz_solve(base_w, helmholtz_shift),
        }
    }
}

/// Concentration family member; see the module documentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub mass: f64,
    pub base_w: Profile,
    #[serde(default = "default_zero_signal")]
    pub base_z: BaseSignal,
    #[serde(default = "default_zero")]
    pub base_v: Profile,
    pub k: u32,
    /// `ε₀`; zero switches both perturbations off.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `σ` in `ε_k = ε₀ k^{−σ}`.
    #[serde(default = "default_epsilon_exponent")]
    pub epsilon_exponent: f64,
    /// `Λ` in `λ_k = Λ k^{μ}`.
    #[serde(default = "default_lambda_scale")]
    pub lambda_scale: f64,
    /// `μ` in `λ_k = Λ k^{μ}`.
    #[serde(default = "default_lambda_exponent")]
    pub lambda_exponent: f64,
}

impl FamilySpec {
    pub fn new(mass: f64, base_w: Profile, k: u32) -> Self {
        Self {
            mass,
            base_w,
            base_z: default_zero_signal(),
            base_v: default_zero(),
            k,
            epsilon: default_epsilon(),
            epsilon_exponent: default_epsilon_exponent(),
            lambda_scale: default_lambda_scale(),
            lambda_exponent: default_lambda_exponent(),
        }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<(), InitError> {
        let bad = |msg: String| Err(InitError::Invalid(msg));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        for (name, v) in [
            ("epsilon_exponent", self.epsilon_exponent),
            ("lambda_scale", self.lambda_scale),
            ("lambda_exponent", self.lambda_exponent),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        self.base_w.validate()?;
        self.base_z.validate()?;
        self.base_v.validate()
    }

    pub fn epsilon_k(&self) -> f64 {
        self.epsilon * (self.k as f64).powf(-self.epsilon_exponent)
    }

    pub fn lambda_k(&self) -> f64 {
        if self.epsilon == 0.0 {
            0.0
        } else {
            self.lambda_scale * (self.k as f64).powf(self.lambda_exponent)
        }
    }
}

/// `m·f/∫f`.
fn with_mass(f: &RadialField, mass: f64) -> RadialField {
    f.scaled(mass / integrate(f))
}

/// The baseline `m·ŵ` the family converges to.
pub fn family_base_w(spec: &FamilySpec, grid: &Arc<RadialGrid>) -> Result<RadialField, InitError> {
    spec.validate()?;
    let base = spec.base_w.sample(grid);
    if base.min() <= 0.0 {
        return Err(InitError::Invalid("base_w must be strictly positive".into()));
    }
    Ok(with_mass(&base, spec.mass))
}

/// `(w_k, z_k, v)` with `v` the sampled `base_v`.
pub fn concentration_family(
    spec: &FamilySpec,
    grid: &Arc<RadialGrid>,
) -> Result<TransformedState, InitError> {
    let base_w = family_base_w(spec, grid)?;
    let v = spec.base_v.sample(grid);
    if v.min() < 0.0 {
        return Err(InitError::Invalid("base_v must be nonnegative".into()));
    }
    let base_z = spec.base_z.sample(&base_w)?;
    let eps = spec.epsilon_k();
    if eps == 0.0 {
        return Ok(TransformedState { w: base_w, z: base_z, v });
    }
    let core_radius = grid.radius() / spec.k as f64;
    let core_cells = core_radius / grid.h();
    if core_cells < 3.0 {
        return Err(InitError::GridTooCoarse {
            k: spec.k,
            cells: core_cells,
        });
    }
    let h = grid.h();
    let core = with_mass(&RadialField::from_fn(grid, |r| smoothed_indicator(r, core_radius, h)), spec.mass);
    let w = base_w.zip_map(&core, |b, c| (1.0 - eps) * b + eps * c);
    let w = with_mass(&w, spec.mass);
    let lambda = spec.lambda_k();
    let k = spec.k as f64;
    let radius = grid.radius();
    let tent = RadialField::from_fn(grid, |r| (1.0 - k * r / radius).max(0.0));
    let z = base_z.zip_map(&tent, |b, t| b + lambda * t);
    Ok(TransformedState { w, z, v })
}

/// Original-system data reproducing `(w, z)` through the change of
/// variables of `params`: `u = w/(χα − ξγ)`, `v₁ = (ξv₂⁰ + z)₊/χ`,
/// `v₂ = (χv₁ − z)/ξ`, where `v₂⁰ ≥ 0` is a baseline for the repulsive
/// signal. Then `χv₁ − ξv₂ = z` exactly and both signals are nonnegative.
pub fn lift_to_original(
    w: &RadialField,
    z: &RadialField,
    v2_base: &RadialField,
    params: &OriginalParams,
) -> Result<OriginalState, InitError> {
    let k = params.dominance();
    if k <= 0.0 {
        return Err(InitError::Invalid(format!(
            "lifting needs attraction-dominated parameters (χα − ξγ = {k})"
        )));
    }
    if v2_base.min() < 0.0 {
        return Err(InitError::Invalid("v2 baseline must be nonnegative".into()));
    }
    let (chi, xi) = (params.chi, params.xi);
    let v1 = z.zip_map(v2_base, |z, v2| (xi * v2 + z).max(0.0) / chi);
    let v2 = v1.zip_map(z, |v1, z| ((chi * v1 - z) / xi).max(0.0));
    Ok(OriginalState {
        u: w.scaled(1.0 / k),
        v1,
        v2,
    })
}

/// Solves `−Δz + a z = w` with homogeneous Neumann data.
pub fn helmholtz_solve(w: &RadialField, a: f64) -> Result<RadialField, InitError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(InitError::Invalid(format!("Helmholtz shift must be positive, got {a}")));
    }
    let grid = w.grid();
    let n = grid.cells();
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    solve_shifted_diffusion(grid, a, 1.0, w.values(), &mut out, &mut scratch)
        .map_err(|e| InitError::Invalid(e.to_string()))?;
    Ok(RadialField::new(Arc::clone(grid), out).expect("grid length"))
}

/// A random member of `S(m, M, B, κ)`, deterministic in `seed`.
///
/// `w` is a strictly positive mixture of a uniform floor and up to four
/// smoothed plateaus, normalized to mass `m`. `z` is a signed sum of up to
/// three profiles `(r² + s²)^{−κ'/2}` with `κ' ∈ [κ, κ + 1]`, scaled so that
/// `∫|z| ≤ M` and `max r^κ|z| ≤ B` hold with random slack.
pub fn sample_s(
    spec: &SMembershipSpec,
    seed: u64,
    grid: &Arc<RadialGrid>,
) -> Result<(RadialField, RadialField), InitError> {
    spec.validate_for(grid.dim())
        .map_err(|e| InitError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, radius) = (grid.h(), grid.radius());

    let bumps = rng.gen_range(1..=4);
    let floor: f64 = rng.gen_range(0.05..0.5);
    let mut w = RadialField::constant(grid, floor / grid.ball_volume());
    for _ in 0..bumps {
        let r_in = rng.gen_range(3.0 * h..=radius);
        let weight: f64 = -rng.gen_range(f64::EPSILON..1.0f64).ln();
        let bump = with_mass(&RadialField::from_fn(grid, |r| smoothed_indicator(r, r_in, h)), weight);
        w = w.zip_map(&bump, |a, b| a + b);
    }
    let w = with_mass(&w, spec.m);

    let terms = rng.gen_range(1..=3);
    let mut z = RadialField::zeros(grid);
    for _ in 0..terms {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let amp: f64 = rng.gen_range(0.1..1.0);
        let s: f64 = rng.gen_range(h..0.5 * radius);
        let kappa = spec.kappa + rng.gen_range(0.0..1.0);
        let term = RadialField::from_fn(grid, |r| sign * amp * (r * r + s * s).powf(-0.5 * kappa));
        z = z.zip_map(&term, |a, b| a + b);
    }
    let l1 = integrate(&z.map(f64::abs));
    let env = decay_envelope(&z, spec.kappa);
    let slack_l1: f64 = rng.gen_range(0.2..1.0);
    let slack_env: f64 = rng.gen_range(0.2..1.0);
    let mut scale: f64 = 1.0;
    if l1 > 0.0 {
        scale = scale.min(slack_l1 * spec.l1_budget / l1);
    }
    if env > 0.0 {
        scale = scale.min(slack_env * spec.decay_amplitude / env);
    }
    Ok((w, z.scaled(scale)))
}

/// `‖f‖_{Lᵖ}`.
pub fn lp_norm(f: &RadialField, p: f64) -> f64 {
    integrate(&f.map(|x| x.abs().powf(p))).powf(1.0 / p)
}

/// `‖f‖_{W^{1,2}} = (∫f² + ∫|∇f|²)^{1/2}`.
pub fn w12_norm(f: &RadialField) -> f64 {
    let g = grad_faces(f);
    let g2: Vec<f64> = g.iter().map(|g| g * g).collect();
    (integrate(&f.map(|x| x * x)) + f.grid().integrate_faces(&g2)).sqrt()
}

/// Distances of a family member from its limit: `‖w_k − mŵ‖_{Lᵖ}` and
/// `‖z_k − z_base‖_{W^{1,2}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyDistances {
    pub w_lp: f64,
    pub z_w12: f64,
}

pub fn family_distances(
    spec: &FamilySpec,
    grid: &Arc<RadialGrid>,
    member: &TransformedState,
    p: f64,
) -> Result<FamilyDistances, InitError> {
    let base_w = family_base_w(spec, grid)?;
    let base_z = spec.base_z.sample(&base_w)?;
    Ok(FamilyDistances {
        w_lp: lp_norm(&member.w.zip_map(&base_w, |a, b| a - b), p),
        z_w12: w12_norm(&member.z.zip_map(&base_z, |a, b| a - b)),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
