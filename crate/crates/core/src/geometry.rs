//! Radial finite-volume grid on the ball `B_R ⊂ ℝⁿ`.
//!
//! Cells are the spherical shells between faces `r = j·h`, `j = 0..=N`.
//! The face at the origin has zero area, which is how the symmetry
//! condition enters: no flux can ever cross `r = 0`. The outer face carries
//! the homogeneous Neumann condition, implemented as a zero flux.
//!
//! All discrete operators are written in flux form, so that the volume
//! weighted sum of any divergence telescopes to zero.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::advection::AdvectionScheme;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("domain radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("spatial dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("grid needs at least 8 cells, got {0}")]
    TooFewCells(usize),
    #[error("field has {got} values but the grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
}

/// Surface measure `ω_{n−1} = 2π^{n/2} / Γ(n/2)` of the unit sphere in ℝⁿ.
pub fn unit_sphere_area(dim: usize) -> f64 {
    // Γ(n/2) via the recurrence Γ(x+1) = xΓ(x) from Γ(1) or Γ(1/2).
    let target = dim as f64 / 2.0;
    let (mut x, mut gamma) = if dim.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, PI.sqrt())
    };
    while x < target {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(target) / gamma
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    radius: f64,
    dim: usize,
    h: f64,
    faces: Vec<f64>,
    centers: Vec<f64>,
    face_areas: Vec<f64>,
    volumes: Vec<f64>,
    /// `A_{j+1/2} / (h V_j)` and `A_{j−1/2} / (h V_j)`: diffusion couplings.
    outer_coupling: Vec<f64>,
    inner_coupling: Vec<f64>,
}

impl RadialGrid {
    pub fn new(radius: f64, dim: usize, cells: usize) -> Result<Arc<Self>, GridError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GridError::Radius(radius));
        }
        if dim < 2 {
            return Err(GridError::Dimension(dim));
        }
        if cells < 8 {
            return Err(GridError::TooFewCells(cells));
        }
        let h = radius / cells as f64;
        let omega = unit_sphere_area(dim);
        let n = dim as i32;

        let mut faces: Vec<f64> = (0..=cells).map(|j| j as f64 * h).collect();
        faces[cells] = radius;
        let centers: Vec<f64> = faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
        let face_areas: Vec<f64> = faces.iter().map(|&r| omega * r.powi(n - 1)).collect();
        let volumes: Vec<f64> = faces
            .windows(2)
            .map(|f| omega * (f[1].powi(n) - f[0].powi(n)) / dim as f64)
            .collect();
        let outer_coupling = (0..cells)
            .map(|j| {
                if j + 1 == cells {
                    0.0
                } else {
                    face_areas[j + 1] / (h * volumes[j])
                }
            })
            .collect();
        let inner_coupling = (0..cells)
            .map(|j| face_areas[j] / (h * volumes[j]))
            .collect();

        Ok(Arc::new(Self {
            radius,
            dim,
            h,
            faces,
            centers,
            face_areas,
            volumes,
            outer_coupling,
            inner_coupling,
        }))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    /// Uniform cell width.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Face radii `r_{j+1/2}`, `N + 1` entries starting at 0.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub(crate) fn outer_coupling(&self) -> &[f64] {
        &self.outer_coupling
    }

    pub(crate) fn inner_coupling(&self) -> &[f64] {
        &self.inner_coupling
    }

    /// `|B_R|` from the closed form `ω_{n−1} Rⁿ / n`.
    pub fn ball_volume(&self) -> f64 {
        unit_sphere_area(self.dim) * self.radius.powi(self.dim as i32) / self.dim as f64
    }

    /// Σ_j f_j V_j.
    pub fn integrate_slice(&self, f: &[f64]) -> f64 {
        let (mut acc, mut tail) = ([0.0; 4], 0.0);
        let (fc, vc) = (f.chunks_exact(4), self.volumes.chunks_exact(4));
        for (&f, &v) in fc.remainder().iter().zip(vc.remainder()) {
            tail += f * v;
        }
        for (f, v) in fc.zip(vc) {
            for i in 0..4 {
                acc[i] += f[i] * v[i];
            }
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }

    /// Σ over interior faces of `A·h·φ_f`; boundary faces carry no weight
    /// because every face quantity used here vanishes there.
    pub fn integrate_faces(&self, phi: &[f64]) -> f64 {
        debug_assert_eq!(phi.len(), self.faces.len());
        let n = self.cells();
        (1..n).map(|f| self.face_areas[f] * self.h * phi[f]).sum()
    }

    pub fn laplacian_into(&self, f: &[f64], out: &mut [f64]) {
        let n = self.cells();
        debug_assert!(f.len() == n && out.len() == n);
        for j in 0..n {
            let up = if j + 1 < n {
                self.outer_coupling[j] * (f[j + 1] - f[j])
            } else {
                0.0
            };
            let down = if j > 0 {
                self.inner_coupling[j] * (f[j] - f[j - 1])
            } else {
                0.0
            };
            out[j] = up - down;
        }
    }

    pub fn grad_faces_into(&self, f: &[f64], out: &mut [f64]) {
        let n = self.cells();
        debug_assert!(f.len() == n && out.len() == n + 1);
        out[0] = 0.0;
        out[n] = 0.0;
        for face in 1..n {
            out[face] = (f[face] - f[face - 1]) / self.h;
        }
    }

    /// Writes `∇·(w·vel)` in conservative form. `velocity` lives on faces and
    /// is ignored at the two boundary faces.
    pub fn advective_divergence_into(
        &self,
        w: &[f64],
        velocity: &[f64],
        scheme: &dyn AdvectionScheme,
        out: &mut [f64],
    ) {
        let n = self.cells();
        debug_assert!(w.len() == n && velocity.len() == n + 1 && out.len() == n);
        let mut inner_flux = 0.0;
        for j in 0..n {
            let outer_flux = if j + 1 < n {
                let vel = velocity[j + 1];
                self.face_areas[j + 1] * scheme.face_value(w[j], w[j + 1], vel) * vel
            } else {
                0.0
            };
            out[j] = (outer_flux - inner_flux) / self.volumes[j];
            inner_flux = outer_flux;
        }
    }
}

/// Cell-centered values on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.cells() {
            return Err(GridError::LengthMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cells());
        Self { grid, values }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<RadialGrid>, value: f64) -> Self {
        Self {
            values: vec![value; grid.cells()],
            grid: Arc::clone(grid),
        }
    }

    /// Samples `f(r)` at the cell centers.
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid.centers().iter().map(|&r| f(r)).collect(),
            grid: Arc::clone(grid),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        reduce4(&self.values, f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        reduce4(&self.values, f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        reduce4(&self.values, 0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(
            Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid,
            "fields live on different grids"
        );
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Fold with four independent accumulators, so the loop is not bound by
/// the latency of a single dependency chain.
fn reduce4(xs: &[f64], init: f64, op: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = [init; 4];
    let chunks = xs.chunks_exact(4);
    let tail = chunks.remainder().iter().fold(init, |a, &x| op(a, x));
    for c in chunks {
        for i in 0..4 {
            acc[i] = op(acc[i], c[i]);
        }
    }
    op(op(op(acc[0], acc[1]), op(acc[2], acc[3])), tail)
}

/// Discrete `∫_Ω f`.
pub fn integrate(f: &RadialField) -> f64 {
    f.grid.integrate_slice(&f.values)
}

/// Conservative finite-volume Laplacian with zero flux at `r = 0` and `r = R`.
pub fn laplacian(f: &RadialField) -> RadialField {
    let mut out = vec![0.0; f.len()];
    f.grid.laplacian_into(&f.values, &mut out);
    RadialField::from_vec_unchecked(Arc::clone(&f.grid), out)
}

/// Radial derivative on the `N + 1` faces; zero on both boundary faces.
pub fn grad_faces(f: &RadialField) -> Vec<f64> {
    let mut out = vec![0.0; f.len() + 1];
    f.grid.grad_faces_into(&f.values, &mut out);
    out
}

/// `∫|∇f|²` by face quadrature.
pub fn grad_norm_squared(f: &RadialField) -> f64 {
    let g = grad_faces(f);
    let sq: Vec<f64> = g.iter().map(|g| g * g).collect();
    f.grid.integrate_faces(&sq)
}

/// `∇·(w∇z)` with face values of `w` chosen by `scheme`.
pub fn advective_divergence(
    w: &RadialField,
    z: &RadialField,
    scheme: &dyn AdvectionScheme,
) -> RadialField {
    let g = grad_faces(z);
    let mut out = vec![0.0; w.len()];
    w.grid
        .advective_divergence_into(&w.values, &g, scheme, &mut out);
    RadialField::from_vec_unchecked(Arc::clone(&w.grid), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advection::{Centered, Upwind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_ball(cells: usize) -> Arc<RadialGrid> {
        RadialGrid::new(1.0, 3, cells).unwrap()
    }

    #[test]
    fn sphere_areas_match_closed_forms() {
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn volumes_sum_to_ball_volume() {
        // π^{n/2} Rⁿ / Γ(n/2 + 1), written out per dimension.
        let cases = [
            (2, 1.7, PI * 1.7f64.powi(2)),
            (3, 2.5, 4.0 / 3.0 * PI * 2.5f64.powi(3)),
            (4, 0.8, PI * PI / 2.0 * 0.8f64.powi(4)),
        ];
        for (dim, radius, exact) in cases {
            for cells in [8, 100, 1000] {
                let grid = RadialGrid::new(radius, dim, cells).unwrap();
                let total: f64 = grid.volumes().iter().sum();
                assert_relative_eq!(total, exact, max_relative = 1e-12);
                assert_relative_eq!(grid.ball_volume(), exact, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn grid_structure() {
        let grid = unit_ball(16);
        assert_eq!(grid.face_areas()[0], 0.0);
        assert!(grid.faces().windows(2).all(|f| f[1] > f[0]));
        assert!(grid.volumes().iter().all(|&v| v > 0.0));
        assert_eq!(grid.faces()[16], 1.0);
        assert_relative_eq!(grid.centers()[0], 1.0 / 32.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(RadialGrid::new(0.0, 3, 10), Err(GridError::Radius(0.0)));
        assert_eq!(RadialGrid::new(1.0, 1, 10), Err(GridError::Dimension(1)));
        assert_eq!(RadialGrid::new(1.0, 3, 7), Err(GridError::TooFewCells(7)));
        let grid = unit_ball(8);
        assert!(matches!(
            RadialField::new(grid, vec![0.0; 3]),
            Err(GridError::LengthMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn integrate_constants() {
        let grid = RadialGrid::new(2.0, 3, 64).unwrap();
        assert_relative_eq!(
            integrate(&RadialField::constant(&grid, 1.0)),
            4.0 * PI * 8.0 / 3.0,
            max_relative = 1e-13
        );
        assert_eq!(integrate(&RadialField::zeros(&grid)), 0.0);
    }

    #[test]
    fn integrate_r_squared_converges_at_second_order() {
        let exact = 4.0 * PI / 5.0;
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let grid = unit_ball(n);
                (integrate(&RadialField::from_fn(&grid, |r| r * r)) - exact).abs()
            })
            .collect();
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order > 1.95, "observed order {order}");
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let grid = unit_ball(40);
        let lap = laplacian(&RadialField::constant(&grid, 3.7));
        assert!(lap.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_of_r_squared_is_2n_in_interior() {
        // f = r² violates the Neumann condition at r = R, so only interior
        // cells converge to Δr² = 2n.
        let grid = unit_ball(200);
        let lap = laplacian(&RadialField::from_fn(&grid, |r| r * r));
        for &v in &lap.values()[..199] {
            assert_relative_eq!(v, 6.0, max_relative = 1e-3);
        }
    }

    #[test]
    fn laplacian_converges_for_neumann_field() {
        // φ = cos(πr): φ'(0) = φ'(1) = 0, Δφ = −π² cos(πr) − 2π sin(πr)/r.
        let exact = |r: f64| -PI * PI * (PI * r).cos() - 2.0 * PI * (PI * r).sin() / r;
        let mut interior = Vec::new();
        let mut full = Vec::new();
        for n in [64, 128, 256, 512] {
            let grid = unit_ball(n);
            let lap = laplacian(&RadialField::from_fn(&grid, |r| (PI * r).cos()));
            let errs: Vec<f64> = lap
                .values()
                .iter()
                .zip(grid.centers())
                .map(|(v, &r)| (v - exact(r)).abs())
                .collect();
            interior.push(errs[1..n - 1].iter().cloned().fold(0.0, f64::max));
            full.push(errs.iter().cloned().fold(0.0, f64::max));
        }
        for k in 1..interior.len() {
            let p_int = (interior[k - 1] / interior[k]).log2();
            let p_full = (full[k - 1] / full[k]).log2();
            assert!(p_int >= 1.9, "interior order {p_int}");
            assert!(p_full >= 0.9, "full order {p_full}");
        }
    }

    #[test]
    fn grad_faces_examples() {
        let grid = RadialGrid::new(1.0, 3, 10).unwrap();
        let g = grad_faces(&RadialField::constant(&grid, 2.0));
        assert!(g.iter().all(|&v| v == 0.0));
        let g = grad_faces(&RadialField::from_fn(&grid, |r| r));
        assert_eq!(g[0], 0.0);
        assert_eq!(g[10], 0.0);
        for &v in &g[1..10] {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_energy_of_r_converges_to_ball_volume() {
        let exact = 4.0 * PI / 3.0;
        let mut prev = f64::INFINITY;
        for n in [64, 256, 1024] {
            let err = (grad_norm_squared(&RadialField::from_fn(&unit_ball(n), |r| r)) - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev / exact < 5e-3);
    }

    #[test]
    fn advective_divergence_trivial_cases() {
        let grid = unit_ball(32);
        let w = RadialField::from_fn(&grid, |r| 1.0 + r);
        let flat = RadialField::constant(&grid, 5.0);
        for scheme in [&Upwind as &dyn AdvectionScheme, &Centered] {
            assert!(advective_divergence(&w, &flat, scheme)
                .values()
                .iter()
                .all(|&v| v == 0.0));
            let z = RadialField::from_fn(&grid, |r| (3.0 * r).sin());
            assert!(advective_divergence(&RadialField::zeros(&grid), &z, scheme)
                .values()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn upwind_takes_value_from_outflow_cell() {
        let grid = RadialGrid::new(1.0, 3, 8).unwrap();
        let w = RadialField::from_fn(&grid, |r| 1.0 + 10.0 * r);
        // z increasing outward: drift points outward, so face values come
        // from the inner cell.
        let z = RadialField::from_fn(&grid, |r| r);
        let div = advective_divergence(&w, &z, &Upwind);
        let h = grid.h();
        let a1 = grid.face_areas()[1];
        let expected0 = a1 * w.values()[0] * ((z.values()[1] - z.values()[0]) / h) / grid.volumes()[0];
        assert_relative_eq!(div.values()[0], expected0, max_relative = 1e-14);
    }

    fn field_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, len)
    }

    proptest! {
        #[test]
        fn discrete_divergence_theorem(f in field_strategy(24), z in field_strategy(24)) {
            let grid = unit_ball(24);
            let f = RadialField::new(grid.clone(), f).unwrap();
            let w = f.map(f64::abs);
            let z = RadialField::new(grid.clone(), z).unwrap();
            let scale: f64 = 1.0 + f.max_abs() + w.max_abs() * z.max_abs() * grid.cells() as f64;
            prop_assert!(integrate(&laplacian(&f)).abs() <= 1e-12 * scale * grid.cells() as f64);
            for scheme in [&Upwind as &dyn AdvectionScheme, &Centered] {
                let div = advective_divergence(&w, &z, scheme);
                prop_assert!(integrate(&div).abs() <= 1e-12 * scale * grid.cells() as f64);
            }
        }
    }
}
