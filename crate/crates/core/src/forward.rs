//! Explicit finite-volume time stepping of the truncated fragmentation
//! equation.
//!
//! Both schemes update cell averages with
//! `f_i ← f_i + dt (B_i − D_i)` where
//!
//! ```text
//! B_i = (1/Δx_i) Σ_{j ≥ i} w^b_j S(x_j) f_j Δx_j N[i][j]
//! D_i = w^d_i S(x_i) f_i
//! ```
//!
//! and `N[i][j] = ∫_{x_{i-1/2}}^{p} b(x, x_j) dx` with `p = x_{i+1/2}` for
//! `j ≠ i` and `p = x_i` on the diagonal. The plain scheme (FVS) uses unit
//! weights; the weighted scheme (WFVS) picks `w^b`, `w^d` so that every
//! breakage event conserves both particle number and mass exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::grid::{Grid, TimeGrid};
use crate::kernels::{DaughterDistribution, SelectionFunction};

/// Forward discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Finite volume scheme with unit weights.
    Fvs,
    /// Weighted, mass-conserving finite volume scheme.
    Wfvs,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Fvs => "fvs",
            Scheme::Wfvs => "wfvs",
        }
    }
}

impl core::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fvs" | "FVS" => Ok(Scheme::Fvs),
            "wfvs" | "WFVS" => Ok(Scheme::Wfvs),
            _ => Err(Error::InvalidArgument(alloc::format!(
                "unknown scheme `{s}` (expected fvs or wfvs)"
            ))),
        }
    }
}

/// Cell-averaged number density at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub time: f64,
}

impl StateVector {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        Self { values, time }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Lower-triangular daughter-count table `N[i][j]` (daughter cell `i`,
/// parent cell `j`, zero for `i > j`).
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentTable {
    size: usize,
    entries: Vec<f64>,
}

impl FragmentTable {
    pub fn new(grid: &Grid, daughter: &DaughterDistribution) -> Self {
        let size = grid.len();
        let x = grid.centers();
        let mut entries = vec![0.0; size * size];
        for j in 0..size {
            for i in 0..=j {
                let upper = if i == j { x[j] } else { grid.upper(i) };
                entries[i * size + j] =
                    daughter.number_integral_unchecked(grid.lower(i), upper, x[j]);
            }
        }
        Self { size, entries }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Entry for daughter cell `i` and parent cell `j` (0-based).
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// `Σ_{i ≤ j} N[i][j]`, the discrete fragment count of parent `j`.
    pub fn column_sum(&self, j: usize) -> f64 {
        (0..=j).map(|i| self.get(i, j)).sum()
    }
}

/// Birth and death weights of the weighted scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
}

impl WeightPair {
    /// ```text
    /// w^b_j = x_j (ν(x_j) − 1) / Σ_{i<j} (x_j − x_i) N[i][j]
    /// w^d_j = (w^b_j / x_j) Σ_{i≤j} x_i N[i][j]
    /// ```
    /// for `j ≥ 2` (1-based); both vanish on the first cell.
    pub fn new(grid: &Grid, table: &FragmentTable, daughter: &DaughterDistribution) -> Result<Self> {
        check_len(grid.len(), table.len())?;
        let size = grid.len();
        let x = grid.centers();
        let mut birth = vec![0.0; size];
        let mut death = vec![0.0; size];
        for j in 1..size {
            let denom: f64 = (0..j).map(|i| (x[j] - x[i]) * table.get(i, j)).sum();
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(Error::DegenerateGrid { cell: j + 1 });
            }
            birth[j] = x[j] * (daughter.fragments(x[j]) - 1.0) / denom;
            let first_moment: f64 = (0..=j).map(|i| x[i] * table.get(i, j)).sum();
            death[j] = birth[j] / x[j] * first_moment;
        }
        Ok(Self { birth, death })
    }
}

/// Precomputed linear step `f ↦ f + dt (B − D)` for one scheme on one grid.
///
/// `birth[i * I + j]` holds `w^b_j S(x_j) Δx_j N[i][j] / Δx_i` for `j ≥ i`.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    size: usize,
    birth: Vec<f64>,
    death: Vec<f64>,
    widths: Vec<f64>,
    max_selection: f64,
}

impl ForwardOperator {
    pub fn new(
        grid: &Grid,
        selection: &SelectionFunction,
        daughter: &DaughterDistribution,
        scheme: Scheme,
    ) -> Result<Self> {
        let table = FragmentTable::new(grid, daughter);
        match scheme {
            Scheme::Fvs => Ok(Self::fvs(grid, selection, &table)),
            Scheme::Wfvs => {
                let weights = WeightPair::new(grid, &table, daughter)?;
                Self::wfvs(grid, selection, &table, &weights)
            }
        }
    }

    pub fn fvs(grid: &Grid, selection: &SelectionFunction, table: &FragmentTable) -> Self {
        let ones = vec![1.0; grid.len()];
        Self::assemble(grid, selection, table, &ones, &ones)
    }

    pub fn wfvs(
        grid: &Grid,
        selection: &SelectionFunction,
        table: &FragmentTable,
        weights: &WeightPair,
    ) -> Result<Self> {
        check_len(grid.len(), weights.birth.len())?;
        check_len(grid.len(), weights.death.len())?;
        Ok(Self::assemble(
            grid,
            selection,
            table,
            &weights.birth,
            &weights.death,
        ))
    }

    fn assemble(
        grid: &Grid,
        selection: &SelectionFunction,
        table: &FragmentTable,
        birth_weight: &[f64],
        death_weight: &[f64],
    ) -> Self {
        let size = grid.len();
        let x = grid.centers();
        let dx = grid.widths();
        let rates: Vec<f64> = x.iter().map(|&xi| selection.eval(xi)).collect();
        let mut birth = vec![0.0; size * size];
        for i in 0..size {
            for j in i..size {
                birth[i * size + j] = birth_weight[j] * rates[j] * dx[j] * table.get(i, j) / dx[i];
            }
        }
        let death = (0..size).map(|i| death_weight[i] * rates[i]).collect();
        Self {
            size,
            birth,
            death,
            widths: dx.to_vec(),
            max_selection: rates.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// `max_i S(x_i)`.
    pub fn max_selection(&self) -> f64 {
        self.max_selection
    }

    /// One Euler step of length `dt`, written into `out`.
    pub fn step_into(&self, f: &[f64], dt: f64, out: &mut [f64]) {
        let n = self.size;
        for i in 0..n {
            let row = &self.birth[i * n..(i + 1) * n];
            let gain: f64 = (i..n).map(|j| row[j] * f[j]).sum();
            out[i] = f[i] + dt * (gain - self.death[i] * f[i]);
        }
    }

    pub fn step(&self, f: &[f64], dt: f64) -> Result<Vec<f64>> {
        check_len(self.size, f.len())?;
        let mut out = vec![0.0; self.size];
        self.step_into(f, dt, &mut out);
        Ok(out)
    }

    /// Adjoint of one Euler step with respect to `⟨u, v⟩ = Σ u_i v_i Δx_i`:
    /// `(M^† φ)_i = φ_i + dt [ (1/Δx_i) Σ_{j ≤ i} birth[j][i] Δx_j φ_j − D_i φ_i ]`.
    pub fn transpose_step_into(&self, phi: &[f64], dt: f64, out: &mut [f64]) {
        let n = self.size;
        let dx = &self.widths;
        for i in 0..n {
            let gain: f64 = (0..=i).map(|j| self.birth[j * n + i] * dx[j] * phi[j]).sum::<f64>() / dx[i];
            out[i] = phi[i] + dt * (gain - self.death[i] * phi[i]);
        }
    }

    /// Final state after all steps of `time`, without storing the trajectory.
    pub fn propagate(&self, f0: &[f64], time: &TimeGrid) -> Result<Vec<f64>> {
        check_len(self.size, f0.len())?;
        let mut cur = f0.to_vec();
        let mut next = vec![0.0; self.size];
        let h = time.substep_dt();
        for n in 0..time.steps() {
            for _ in 0..time.substeps() {
                self.step_into(&cur, h, &mut next);
                core::mem::swap(&mut cur, &mut next);
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { step: n + 1 });
            }
        }
        Ok(cur)
    }

    /// Applies the adjoint of [`propagate`](Self::propagate) to `phi`.
    pub fn propagate_transpose(&self, phi: &[f64], time: &TimeGrid) -> Result<Vec<f64>> {
        check_len(self.size, phi.len())?;
        let mut cur = phi.to_vec();
        let mut next = vec![0.0; self.size];
        let h = time.substep_dt();
        for n in (0..time.steps()).rev() {
            for _ in 0..time.substeps() {
                self.transpose_step_into(&cur, h, &mut next);
                core::mem::swap(&mut cur, &mut next);
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { step: n });
            }
        }
        Ok(cur)
    }
}

fn check_step_inputs(state: &StateVector, grid: &Grid, table: &FragmentTable, dt: f64) -> Result<()> {
    check_len(grid.len(), state.len())?;
    check_len(grid.len(), table.len())?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(crate::error::invalid("dt", "must be finite and positive"));
    }
    Ok(())
}

/// One FVS step.
pub fn fvs_step(
    state: &StateVector,
    grid: &Grid,
    selection: &SelectionFunction,
    table: &FragmentTable,
    dt: f64,
) -> Result<StateVector> {
    check_step_inputs(state, grid, table, dt)?;
    let op = ForwardOperator::fvs(grid, selection, table);
    Ok(StateVector::new(op.step(&state.values, dt)?, state.time + dt))
}

/// One WFVS step.
pub fn wfvs_step(
    state: &StateVector,
    grid: &Grid,
    selection: &SelectionFunction,
    table: &FragmentTable,
    weights: &WeightPair,
    dt: f64,
) -> Result<StateVector> {
    check_step_inputs(state, grid, table, dt)?;
    let op = ForwardOperator::wfvs(grid, selection, table, weights)?;
    Ok(StateVector::new(op.step(&state.values, dt)?, state.time + dt))
}

/// Run-level diagnostics of an explicit integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardDiagnostics {
    /// `dt_sub · max_i S(x_i)`; values above 1 may produce undershoots.
    pub stability_number: f64,
    /// Smallest density seen over all stored levels.
    pub min_value: f64,
}

impl ForwardDiagnostics {
    pub fn is_stable(&self) -> bool {
        self.stability_number <= 1.0
    }
}

/// States at every time level `t_0 .. t_N`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
    pub diagnostics: ForwardDiagnostics,
}

impl Trajectory {
    pub fn initial(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        &self.states[self.states.len() - 1]
    }
}

/// Integrates from `f0` over all levels of `time`.
pub fn run_forward(
    grid: &Grid,
    time: &TimeGrid,
    selection: &SelectionFunction,
    daughter: &DaughterDistribution,
    scheme: Scheme,
    f0: &[f64],
) -> Result<Trajectory> {
    check_len(grid.len(), f0.len())?;
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    let op = ForwardOperator::new(grid, selection, daughter, scheme)?;
    run_with_operator(&op, time, f0)
}

pub(crate) fn run_with_operator(op: &ForwardOperator, time: &TimeGrid, f0: &[f64]) -> Result<Trajectory> {
    let h = time.substep_dt();
    let mut states = Vec::with_capacity(time.steps() + 1);
    states.push(StateVector::new(f0.to_vec(), 0.0));
    let mut min_value = f0.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cur = f0.to_vec();
    let mut next = vec![0.0; f0.len()];
    for n in 0..time.steps() {
        for _ in 0..time.substeps() {
            op.step_into(&cur, h, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: n + 1 });
        }
        min_value = cur.iter().copied().fold(min_value, f64::min);
        states.push(StateVector::new(cur.clone(), time.time(n + 1)));
    }
    Ok(Trajectory {
        states,
        diagnostics: ForwardDiagnostics {
            stability_number: h * op.max_selection(),
            min_value,
        },
    })
}

/// Discrete moment `M_p = Σ_i x_i^p f_i Δx_i`.
pub fn moment(values: &[f64], grid: &Grid, order: f64) -> Result<f64> {
    check_len(grid.len(), values.len())?;
    if !(order >= 0.0) {
        return Err(crate::error::invalid("order", "moment order must be nonnegative"));
    }
    Ok(grid
        .centers()
        .iter()
        .zip(grid.widths())
        .zip(values)
        .map(|((&x, &dx), &f)| {
            let w = if order == 0.0 {
                1.0
            } else if order == 1.0 {
                x
            } else if order == 2.0 {
                x * x
            } else {
                libm::pow(x, order)
            };
            w * f * dx
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn doubling() -> Grid {
        Grid::geometric(8.0, 3, 2.0).unwrap()
    }

    const B: DaughterDistribution = DaughterDistribution::PowerLawBinary;

    #[test]
    fn fragment_table_hand_values() {
        let t = FragmentTable::new(&doubling(), &B);
        assert_relative_eq!(t.get(0, 1), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(t.get(1, 1), 2.0 / 3.0, max_relative = 1e-15);
        for i in 0..3 {
            assert_relative_eq!(t.get(i, 2), 2.0 / 3.0, max_relative = 1e-15);
        }
        assert_eq!(t.get(2, 1), 0.0);
        assert_eq!(t.get(1, 0), 0.0);
        for j in 0..3 {
            assert_relative_eq!(t.column_sum(j), 2.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn weights_hand_values() {
        let g = doubling();
        let t = FragmentTable::new(&g, &B);
        let w = WeightPair::new(&g, &t, &B).unwrap();
        assert_eq!((w.birth[0], w.death[0]), (0.0, 0.0));
        assert_relative_eq!(w.birth[1], 1.125, max_relative = 1e-15);
        assert_relative_eq!(w.death[1], 1.25, max_relative = 1e-15);
        assert_relative_eq!(w.birth[2], 1.125, max_relative = 1e-15);
        assert_relative_eq!(w.death[2], 1.25, max_relative = 1e-15);
        // per-parent mass balance
        let x = g.centers();
        for j in 1..3 {
            let lhs = w.death[j] * x[j];
            let rhs = w.birth[j] * (0..=j).map(|i| x[i] * t.get(i, j)).sum::<f64>();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-15);
        }
    }

    #[test]
    fn zero_selection_is_identity() {
        let g = doubling();
        let t = FragmentTable::new(&g, &B);
        let w = WeightPair::new(&g, &t, &B).unwrap();
        let s = StateVector::new(vec![0.3, 1.0, 2.5], 0.0);
        let zero = SelectionFunction::zero();
        assert_eq!(fvs_step(&s, &g, &zero, &t, 0.1).unwrap().values, s.values);
        assert_eq!(wfvs_step(&s, &g, &zero, &t, &w, 0.1).unwrap().values, s.values);
    }

    #[test]
    fn single_cell_steps() {
        let g = Grid::geometric(2.0, 1, 1.4).unwrap();
        let t = FragmentTable::new(&g, &B);
        assert_eq!(t.get(0, 0), 2.0);
        let s = StateVector::new(vec![1.0], 0.0);
        let out = fvs_step(&s, &g, &SelectionFunction::linear(), &t, 0.1).unwrap();
        assert_relative_eq!(out.values[0], 1.1, max_relative = 1e-15);
        assert_relative_eq!(out.time, 0.1);
        let w = WeightPair::new(&g, &t, &B).unwrap();
        let out = wfvs_step(&s, &g, &SelectionFunction::linear(), &t, &w, 0.1).unwrap();
        assert_eq!(out.values, vec![1.0]);
    }

    #[test]
    fn wfvs_step_conserves_mass_on_hand_grid() {
        let g = doubling();
        let t = FragmentTable::new(&g, &B);
        let w = WeightPair::new(&g, &t, &B).unwrap();
        let s = StateVector::new(vec![0.0, 0.0, 1.0], 0.0);
        let out = wfvs_step(&s, &g, &SelectionFunction::linear(), &t, &w, 0.1).unwrap();
        let before = moment(&s.values, &g, 1.0).unwrap();
        let after = moment(&out.values, &g, 1.0).unwrap();
        assert!((after - before).abs() <= 1e-15 * before.max(1.0));
    }

    #[test]
    fn moments_on_hand_grid() {
        let g = doubling();
        let ones = [1.0, 1.0, 1.0];
        assert_eq!(moment(&ones, &g, 0.0).unwrap(), 8.0);
        assert_eq!(moment(&ones, &g, 1.0).unwrap(), 32.0);
        assert_eq!(moment(&[0.0; 3], &g, 2.0).unwrap(), 0.0);
        assert!(moment(&ones, &g, -1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = doubling();
        let t = FragmentTable::new(&g, &B);
        let s = StateVector::new(vec![1.0, 2.0], 0.0);
        assert!(matches!(
            fvs_step(&s, &g, &SelectionFunction::linear(), &t, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frozen_time_grid_keeps_initial_state() {
        let g = doubling();
        let tg = TimeGrid::frozen(2.0).unwrap();
        let tr = run_forward(&g, &tg, &SelectionFunction::linear(), &B, Scheme::Fvs, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert_eq!(tr.last().values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn huge_time_step_blows_up() {
        let g = Grid::geometric(5.0, 10, 1.4).unwrap();
        let tg = TimeGrid::new(1e300, 50).unwrap();
        let err = run_forward(&g, &tg, &SelectionFunction::quadratic(), &B, Scheme::Fvs, &[1.0; 10]).unwrap_err();
        assert!(err.is_blowup());
    }

    #[test]
    fn transpose_step_is_weighted_adjoint() {
        let g = Grid::geometric(5.0, 7, 1.5).unwrap();
        for scheme in [Scheme::Fvs, Scheme::Wfvs] {
            let op = ForwardOperator::new(&g, &SelectionFunction::quadratic(), &B, scheme).unwrap();
            let u: Vec<f64> = (0..7).map(|k| 0.3 + 0.1 * k as f64).collect();
            let v: Vec<f64> = (0..7).map(|k| 1.0 - 0.2 * k as f64).collect();
            let mu = op.step(&u, 0.07).unwrap();
            let mut mtv = vec![0.0; 7];
            op.transpose_step_into(&v, 0.07, &mut mtv);
            let dx = g.widths();
            let lhs: f64 = (0..7).map(|i| mu[i] * v[i] * dx[i]).sum();
            let rhs: f64 = (0..7).map(|i| u[i] * mtv[i] * dx[i]).sum();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("fvs".parse::<Scheme>().unwrap(), Scheme::Fvs);
        assert_eq!("WFVS".parse::<Scheme>().unwrap(), Scheme::Wfvs);
        assert!("rk4".parse::<Scheme>().is_err());
    }
}
