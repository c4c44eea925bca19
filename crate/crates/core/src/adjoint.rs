//! Backward integration of the adjoint fragmentation equation
//! `∂φ/∂t = S(x) φ(x) − S(x) ∫_0^x b(y, x) φ(y) dy`, `φ(T) = f(T) − f*`,
//! discretised with the same finite-volume layout as the forward problem:
//!
//! ```text
//! φ_i^n = φ_i^{n+1} + dt (B̂_i − D̂_i)
//! B̂_i = (1/Δx_i) Σ_{j ≤ i} φ_j Δx_j Ŝ[i][j],   D̂_i = S(x_i) φ_i
//! Ŝ[i][j] = ∫_{q}^{x_{i+1/2}} S(x) b(x_j, x) dx,  q = x_{i-1/2} (j ≠ i), x_i (j = i)
//! ```
//!
//! The module also provides the exact discrete adjoint of either forward
//! scheme (the Δx-weighted transpose of the forward steps), used as a
//! gradient oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::forward::{ForwardOperator, Scheme};
use crate::grid::{Grid, TimeGrid};
use crate::kernels::{
    weighted_selection_daughter_integral, weighted_selection_daughter_quadrature,
    DaughterDistribution, SelectionFunction,
};

/// Adjoint values at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointVector {
    pub values: Vec<f64>,
    pub time: f64,
}

impl AdjointVector {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        Self { values, time }
    }
}

/// How the entries of an [`AdjointTable`] are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integration {
    /// Closed forms where available.
    #[default]
    Exact,
    /// 8-point Gauss–Legendre on every entry.
    Quadrature,
}

/// Lower-triangular table `Ŝ[i][j]` (zero for `j > i`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTable {
    size: usize,
    entries: Vec<f64>,
}

impl AdjointTable {
    pub fn new(grid: &Grid, selection: &SelectionFunction, daughter: &DaughterDistribution) -> Result<Self> {
        Self::with_integration(grid, selection, daughter, Integration::Exact)
    }

    pub fn with_integration(
        grid: &Grid,
        selection: &SelectionFunction,
        daughter: &DaughterDistribution,
        integration: Integration,
    ) -> Result<Self> {
        let size = grid.len();
        let x = grid.centers();
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..=i {
                let lower = if i == j { x[i] } else { grid.lower(i) };
                let value = match integration {
                    Integration::Exact => {
                        weighted_selection_daughter_integral(selection, daughter, x[j], lower, grid.upper(i))?
                    }
                    Integration::Quadrature => {
                        weighted_selection_daughter_quadrature(selection, daughter, x[j], lower, grid.upper(i))?
                    }
                };
                entries[i * size + j] = value;
            }
        }
        Ok(Self { size, entries })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }
}

/// Precomputed backward step of the continuous-adjoint scheme.
#[derive(Debug, Clone)]
pub struct AdjointOperator {
    size: usize,
    /// `Ŝ[i][j] Δx_j / Δx_i` for `j ≤ i`.
    birth: Vec<f64>,
    death: Vec<f64>,
}

impl AdjointOperator {
    pub fn new(grid: &Grid, selection: &SelectionFunction, daughter: &DaughterDistribution) -> Result<Self> {
        let table = AdjointTable::new(grid, selection, daughter)?;
        Ok(Self::from_table(grid, selection, &table))
    }

    pub fn from_table(grid: &Grid, selection: &SelectionFunction, table: &AdjointTable) -> Self {
        let size = grid.len();
        let dx = grid.widths();
        let mut birth = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..=i {
                birth[i * size + j] = table.get(i, j) * dx[j] / dx[i];
            }
        }
        let death = grid.centers().iter().map(|&x| selection.eval(x)).collect();
        Self { size, birth, death }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn step_into(&self, phi: &[f64], dt: f64, out: &mut [f64]) {
        let n = self.size;
        for i in 0..n {
            let row = &self.birth[i * n..(i + 1) * n];
            let gain: f64 = (0..=i).map(|j| row[j] * phi[j]).sum();
            out[i] = phi[i] + dt * (gain - self.death[i] * phi[i]);
        }
    }

    /// Integrates from `t = T` down to `t = 0`.
    pub fn propagate(&self, terminal: &[f64], time: &TimeGrid) -> Result<Vec<f64>> {
        check_len(self.size, terminal.len())?;
        let mut cur = terminal.to_vec();
        let mut next = vec![0.0; self.size];
        let h = time.substep_dt();
        for n in (0..time.steps()).rev() {
            for _ in 0..time.substeps() {
                self.step_into(&cur, h, &mut next);
                core::mem::swap(&mut cur, &mut next);
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { step: n });
            }
        }
        Ok(cur)
    }
}

/// One backward step from `t` to `t − dt`.
pub fn adjoint_step_backward(
    phi: &AdjointVector,
    grid: &Grid,
    selection: &SelectionFunction,
    table: &AdjointTable,
    dt: f64,
) -> Result<AdjointVector> {
    check_len(grid.len(), phi.values.len())?;
    check_len(grid.len(), table.len())?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", "must be finite and positive"));
    }
    let op = AdjointOperator::from_table(grid, selection, table);
    let mut out = vec![0.0; grid.len()];
    op.step_into(&phi.values, dt, &mut out);
    Ok(AdjointVector::new(out, phi.time - dt))
}

/// Solves the adjoint equation backward from `terminal` at `t = T` and
/// returns `φ(0)`.
pub fn run_adjoint(
    grid: &Grid,
    time: &TimeGrid,
    selection: &SelectionFunction,
    daughter: &DaughterDistribution,
    terminal: &AdjointVector,
) -> Result<AdjointVector> {
    let op = AdjointOperator::new(grid, selection, daughter)?;
    let values = op.propagate(&terminal.values, time)?;
    Ok(AdjointVector::new(values, 0.0))
}

/// Exact gradient of `J_Δx(f0) = ½ Σ (f_i(T) − f*_i)² Δx_i` under the chosen
/// forward scheme, as the representative with respect to `⟨·,·⟩_Δx`.
#[allow(clippy::too_many_arguments)]
pub fn transpose_adjoint_gradient(
    grid: &Grid,
    time: &TimeGrid,
    selection: &SelectionFunction,
    daughter: &DaughterDistribution,
    scheme: Scheme,
    f0: &[f64],
    target: &[f64],
) -> Result<Vec<f64>> {
    check_len(grid.len(), target.len())?;
    let op = ForwardOperator::new(grid, selection, daughter, scheme)?;
    let final_state = op.propagate(f0, time)?;
    let residual: Vec<f64> = final_state.iter().zip(target).map(|(f, t)| f - t).collect();
    op.propagate_transpose(&residual, time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const B: DaughterDistribution = DaughterDistribution::PowerLawBinary;

    #[test]
    fn table_hand_values() {
        let g = Grid::geometric(8.0, 3, 2.0).unwrap();
        let t = AdjointTable::new(&g, &SelectionFunction::linear(), &B).unwrap();
        assert_eq!(t.get(2, 0), 8.0);
        assert_eq!(t.get(1, 1), 2.0);
        assert_eq!(t.get(0, 2), 0.0);
        assert_eq!(t.get(1, 2), 0.0);
    }

    #[test]
    fn quadrature_table_matches_exact_on_benchmark_kernels() {
        let g = Grid::geometric(5.0, 35, 1.4).unwrap();
        for s in [SelectionFunction::linear(), SelectionFunction::quadratic()] {
            let exact = AdjointTable::new(&g, &s, &B).unwrap();
            let quad = AdjointTable::with_integration(&g, &s, &B, Integration::Quadrature).unwrap();
            for i in 0..35 {
                for j in 0..=i {
                    let (e, q) = (exact.get(i, j), quad.get(i, j));
                    assert!((e - q).abs() <= 1e-12 * e.abs().max(1e-300), "{i},{j}: {e} vs {q}");
                }
            }
        }
    }

    #[test]
    fn single_cell_step() {
        let g = Grid::geometric(2.0, 1, 1.4).unwrap();
        let t = AdjointTable::new(&g, &SelectionFunction::linear(), &B).unwrap();
        assert_eq!(t.get(0, 0), 2.0);
        let phi = AdjointVector::new(vec![1.0], 2.0);
        let out = adjoint_step_backward(&phi, &g, &SelectionFunction::linear(), &t, 0.1).unwrap();
        assert_relative_eq!(out.values[0], 1.1, max_relative = 1e-15);
        assert_relative_eq!(out.time, 1.9);
    }

    #[test]
    fn trivial_cases() {
        let g = Grid::geometric(5.0, 6, 1.4).unwrap();
        let zero_sel = SelectionFunction::zero();
        let t = AdjointTable::new(&g, &zero_sel, &B).unwrap();
        let phi = AdjointVector::new(vec![0.5, -1.0, 2.0, 0.0, 1.0, 3.0], 1.0);
        let out = adjoint_step_backward(&phi, &g, &zero_sel, &t, 0.1).unwrap();
        assert_eq!(out.values, phi.values);

        let lin = SelectionFunction::linear();
        let tl = AdjointTable::new(&g, &lin, &B).unwrap();
        let zero = AdjointVector::new(vec![0.0; 6], 1.0);
        assert_eq!(adjoint_step_backward(&zero, &g, &lin, &tl, 0.1).unwrap().values, vec![0.0; 6]);

        let tg = TimeGrid::frozen(2.0).unwrap();
        assert_eq!(run_adjoint(&g, &tg, &lin, &B, &phi).unwrap().values, phi.values);
        let tg = TimeGrid::new(2.0, 20).unwrap();
        assert_eq!(run_adjoint(&g, &tg, &lin, &B, &zero).unwrap().values, vec![0.0; 6]);
    }

    #[test]
    fn transpose_gradient_without_dynamics() {
        let g = Grid::geometric(5.0, 6, 1.4).unwrap();
        let f0 = [1.0, 0.5, 0.25, 0.1, 0.0, 2.0];
        let target = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let expected: Vec<f64> = f0.iter().zip(&target).map(|(a, b)| a - b).collect();
        let frozen = TimeGrid::frozen(2.0).unwrap();
        let g0 = transpose_adjoint_gradient(&g, &frozen, &SelectionFunction::linear(), &B, Scheme::Wfvs, &f0, &target).unwrap();
        assert_eq!(g0, expected);
        let tg = TimeGrid::new(2.0, 20).unwrap();
        let g1 = transpose_adjoint_gradient(&g, &tg, &SelectionFunction::zero(), &B, Scheme::Fvs, &f0, &target).unwrap();
        assert_eq!(g1, expected);
    }

    #[test]
    fn dimension_mismatch() {
        let g = Grid::geometric(5.0, 3, 1.4).unwrap();
        let lin = SelectionFunction::linear();
        let t = AdjointTable::new(&g, &lin, &B).unwrap();
        let phi = AdjointVector::new(vec![1.0; 4], 1.0);
        assert!(adjoint_step_backward(&phi, &g, &lin, &t, 0.1).is_err());
    }
}
