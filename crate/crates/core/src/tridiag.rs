//! Implicit solves for `(σ − τΔ) x = rhs` on a radial grid.
//!
//! With σ > 0 and τ ≥ 0 the matrix is an irreducible M-matrix, so the Thomas
//! sweep below never pivots on zero and maps nonnegative right-hand sides to
//! nonnegative solutions.

use thiserror::Error;

use crate::geometry::RadialGrid;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("tridiagonal solve degenerated at row {row} (pivot {pivot})")]
pub struct SolverFailure {
    pub row: usize,
    pub pivot: f64,
}

/// Solves `σ·x_j − τ·(Δx)_j = rhs_j` with the conservative Laplacian of
/// `grid`. `scratch` must have the grid's length.
pub fn solve_shifted_diffusion(
    grid: &RadialGrid,
    shift: f64,
    diffusion: f64,
    rhs: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<(), SolverFailure> {
    let n = grid.cells();
    debug_assert!(rhs.len() == n && out.len() == n && scratch.len() == n);
    let outer = grid.outer_coupling();
    let inner = grid.inner_coupling();

    // Row j: lower = −τ·inner_j, diag = σ + τ(inner_j + outer_j), upper = −τ·outer_j.
    // Forward sweep stores the modified upper coefficient in `scratch`.
    let mut prev_upper = 0.0;
    let mut prev_x = 0.0;
    for j in 0..n {
        let lower = -diffusion * inner[j];
        let diag = shift + diffusion * (inner[j] + outer[j]);
        let pivot = diag - lower * prev_upper;
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Err(SolverFailure { row: j, pivot });
        }
        let upper = -diffusion * outer[j];
        prev_upper = upper / pivot;
        prev_x = (rhs[j] - lower * prev_x) / pivot;
        scratch[j] = prev_upper;
        out[j] = prev_x;
    }
    for j in (0..n - 1).rev() {
        out[j] -= scratch[j] * out[j + 1];
    }
    Ok(())
}

/// Solves `K` systems `σ_k·x − τ·Δx = rhs_k` that share the grid and `τ`.
///
/// The `K` elimination chains are independent and are swept together, which
/// overlaps their divisions.
pub fn solve_shifted_diffusion_many<const K: usize>(
    grid: &RadialGrid,
    shifts: [f64; K],
    diffusion: f64,
    rhs: [&[f64]; K],
) -> Result<[Vec<f64>; K], SolverFailure> {
    let n = grid.cells();
    debug_assert!(rhs.iter().all(|r| r.len() == n));
    let outer = grid.outer_coupling();
    let inner = grid.inner_coupling();
    let mut modified_upper = vec![[0.0; K]; n];
    let mut out: [Vec<f64>; K] = std::array::from_fn(|_| vec![0.0; n]);
    let mut prev_upper = [0.0; K];
    let mut prev_x = [0.0; K];
    for j in 0..n {
        let lower = -diffusion * inner[j];
        let upper = -diffusion * outer[j];
        let coupling = diffusion * (inner[j] + outer[j]);
        for k in 0..K {
            let pivot = shifts[k] + coupling - lower * prev_upper[k];
            if !(pivot > 0.0 && pivot.is_finite()) {
                return Err(SolverFailure { row: j, pivot });
            }
            let inv = 1.0 / pivot;
            prev_upper[k] = upper * inv;
            prev_x[k] = (rhs[k][j] - lower * prev_x[k]) * inv;
            modified_upper[j][k] = prev_upper[k];
            out[k][j] = prev_x[k];
        }
    }
    for j in (0..n - 1).rev() {
        for k in 0..K {
            out[k][j] -= modified_upper[j][k] * out[k][j + 1];
        }
    }
    Ok(out)
}
