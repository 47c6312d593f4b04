//! The scalar comparison problem `y' = C₂·y₊^{1/θ} − C₃`, `y(0) = y₀`.
//!
//! With `y = −F/C₁ − 1` this is the template for the energy along a blow-up
//! trajectory: once `C₂y₀^{1/θ} > C₃` the superlinear power forces `y` to
//! diverge in finite time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integration switches to the analytic tail once `y` passes this value.
pub const TAIL_SWITCH: f64 = 1e12;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid comparison problem: {0}")]
pub struct OdeSpecError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOdeSpec")]
pub struct OdeSpec {
    pub y0: f64,
    pub c2: f64,
    pub c3: f64,
    pub theta: f64,
    pub t_cap: f64,
    /// Normalization between `y` and the energy; only used by [`threshold`].
    pub c1: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOdeSpec {
    y0: f64,
    c2: f64,
    c3: f64,
    theta: f64,
    t_cap: f64,
    #[serde(default)]
    c1: Option<f64>,
}

impl TryFrom<RawOdeSpec> for OdeSpec {
    type Error = OdeSpecError;
    fn try_from(r: RawOdeSpec) -> Result<Self, Self::Error> {
        let spec = OdeSpec::new(r.y0, r.c2, r.c3, r.theta, r.t_cap)?;
        match r.c1 {
            Some(c1) => spec.with_c1(c1),
            None => Ok(spec),
        }
    }
}

impl OdeSpec {
    pub fn new(y0: f64, c2: f64, c3: f64, theta: f64, t_cap: f64) -> Result<Self, OdeSpecError> {
        if !y0.is_finite() {
            return Err(OdeSpecError(format!("y0 must be finite, got {y0}")));
        }
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(OdeSpecError(format!("C2 must be positive, got {c2}")));
        }
        if !(c3 >= 0.0 && c3.is_finite()) {
            return Err(OdeSpecError(format!("C3 must be nonnegative, got {c3}")));
        }
        if !(theta > 0.5 && theta < 1.0) {
            return Err(OdeSpecError(format!("theta must lie in (1/2, 1), got {theta}")));
        }
        if !(t_cap > 0.0) {
            return Err(OdeSpecError(format!("t_cap must be positive, got {t_cap}")));
        }
        Ok(Self {
            y0,
            c2,
            c3,
            theta,
            t_cap,
            c1: None,
        })
    }

    pub fn with_c1(mut self, c1: f64) -> Result<Self, OdeSpecError> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(OdeSpecError(format!("C1 must be positive, got {c1}")));
        }
        self.c1 = Some(c1);
        Ok(self)
    }

    /// Equilibrium `(C₃/C₂)^θ`; blow-up occurs exactly for `y₀` above it.
    pub fn equilibrium(&self) -> f64 {
        (self.c3 / self.c2).powf(self.theta)
    }

    fn rhs(&self, y: f64) -> f64 {
        self.c2 * y.max(0.0).powf(1.0 / self.theta) - self.c3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t", rename_all = "kebab-case")]
pub enum OdeOutcome {
    Finite(f64),
    Survives(f64),
}

impl OdeOutcome {
    pub fn blowup_time(&self) -> Option<f64> {
        match *self {
            OdeOutcome::Finite(t) => Some(t),
            OdeOutcome::Survives(_) => None,
        }
    }
}

/// Closed-form blow-up time for `C₃ = 0`: `θ·y₀^{−(1−θ)/θ} / (C₂(1−θ))`.
pub fn closed_form_blowup(y0: f64, c2: f64, theta: f64) -> f64 {
    theta * y0.powf(-(1.0 - theta) / theta) / (c2 * (1.0 - theta))
}

/// `∫_Y^∞ dy / (C₂y^q − C₃)` to second order in `C₃/(C₂Y^q)`.
fn tail_time(spec: &OdeSpec, y: f64) -> f64 {
    let q = 1.0 / spec.theta;
    y.powf(1.0 - q) / (spec.c2 * (q - 1.0))
        + spec.c3 * y.powf(1.0 - 2.0 * q) / (spec.c2 * spec.c2 * (2.0 * q - 1.0))
}

// Dormand–Prince 5(4) tableau; the ODE is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One embedded step; returns the fifth-order value and the error estimate.
fn dopri_step(f: &impl Fn(f64) -> f64, s: f64, dt: f64) -> (f64, f64) {
    let mut k = [0.0; 7];
    for i in 0..7 {
        let inc: f64 = (0..i).map(|j| A[i][j] * k[j]).sum();
        k[i] = f(s + dt * inc);
    }
    let hi: f64 = (0..7).map(|i| B5[i] * k[i]).sum();
    let lo: f64 = (0..7).map(|i| B4[i] * k[i]).sum();
    (s + dt * hi, dt * (hi - lo).abs())
}

/// Blow-up time of the comparison problem, or survival up to `t_cap`.
///
/// `y₀` at or below the equilibrium cannot grow, so such problems survive
/// without integration. Otherwise `s = ln y` is integrated adaptively until
/// `y` passes [`TAIL_SWITCH`], and the remaining time is added analytically.
pub fn ode_blowup(spec: &OdeSpec) -> OdeOutcome {
    if spec.rhs(spec.y0) <= 0.0 {
        return OdeOutcome::Survives(spec.t_cap);
    }
    let q = 1.0 / spec.theta;
    // ds/dt = C₂ e^{(q−1)s} − C₃ e^{−s}
    let f = |s: f64| spec.c2 * ((q - 1.0) * s).exp() - spec.c3 * (-s).exp();
    let s_switch = TAIL_SWITCH.ln();
    let tol = 1e-12;
    let mut s = spec.y0.ln();
    let mut t = 0.0;
    let mut dt = (0.01 / f(s).abs().max(1e-300)).min(spec.t_cap);
    while s < s_switch {
        if t >= spec.t_cap {
            return OdeOutcome::Survives(spec.t_cap);
        }
        let dt_try = dt.min(spec.t_cap - t);
        let (s_new, err) = dopri_step(&f, s, dt_try);
        let scale = tol * (1.0 + s.abs().max(s_new.abs()));
        if err <= scale && s_new.is_finite() {
            t += dt_try;
            s = s_new;
        }
        let ratio = if err > 0.0 { (scale / err).powf(0.2) } else { 5.0 };
        dt = dt_try * (0.9 * ratio).clamp(0.2, 5.0);
        // At most a unit change in s per step.
        dt = dt.min(1.0 / f(s).abs().max(1e-300));
    }
    let t_total = t + tail_time(spec, s.exp());
    if t_total > spec.t_cap {
        OdeOutcome::Survives(spec.t_cap)
    } else {
        OdeOutcome::Finite(t_total)
    }
}

/// `K = C₁((C₃/C₂)^θ + 1)`: energies below `−K` force blow-up. `C₁`
/// defaults to one when the spec carries none.
pub fn threshold(spec: &OdeSpec) -> f64 {
    spec.c1.unwrap_or(1.0) * (spec.equilibrium() + 1.0)
}

/// Least-squares fit of `y' ≈ C₂y₊^{1/θ} − C₃` to a sampled trajectory,
/// with `y'` from centered differences. The fitted constants are empirical
/// stand-ins; nothing forces them to bound the true constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalFit {
    pub c2: f64,
    pub c3: f64,
    pub samples: usize,
}

pub fn fit_constants(times: &[f64], ys: &[f64], theta: f64) -> Option<EmpiricalFit> {
    if times.len() != ys.len() || times.len() < 4 {
        return None;
    }
    let q = 1.0 / theta;
    // Regress y' on (x = y₊^q, 1): y' = C₂x − C₃.
    let mut pts = Vec::new();
    for i in 1..times.len() - 1 {
        let dt = times[i + 1] - times[i - 1];
        if dt <= 0.0 {
            return None;
        }
        pts.push((ys[i].max(0.0).powf(q), (ys[i + 1] - ys[i - 1]) / dt));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let c2 = sxy / sxx;
    Some(EmpiricalFit {
        c2,
        c3: c2 * mx - my,
        samples: pts.len(),
    })
}
