//! Nonuniform cell partition of the truncated size domain `(0, R]` and the
//! uniform time grid.
//!
//! Cells are `Λ_i = [edges[i], edges[i+1]]`, `i = 0..I`, with the
//! representative size at the cell midpoint. The geometric family places the
//! first interior edge at `R / ratio^(I-1)` so that exactly `I` cells end at `R`.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Grid {
    /// Geometric grid on `(0, length]` with `cells` cells and edge ratio `ratio`.
    pub fn geometric(length: f64, cells: usize, ratio: f64) -> Result<Self> {
        check_length(length)?;
        check_cells(cells)?;
        if !ratio.is_finite() || ratio <= 1.0 {
            return Err(invalid("ratio", "must be finite and greater than 1"));
        }
        let mut edges = Vec::with_capacity(cells + 1);
        edges.push(0.0);
        let exponent = i32::try_from(cells - 1).map_err(|_| invalid("cells", "too many cells"))?;
        let first = length / libm::pow(ratio, f64::from(exponent));
        if !(first > 0.0) {
            return Err(invalid(
                "cells",
                "first edge underflows; reduce the cell count or the ratio",
            ));
        }
        edges.push(first);
        for k in 1..cells {
            let next = ratio * edges[k];
            edges.push(next);
        }
        // Pin the right end exactly; the recurrence lands on it up to rounding.
        edges[cells] = length;
        Self::from_edges(edges)
    }

    /// Geometric grid whose first interior edge is fixed; the ratio is derived
    /// so that `cells` cells end at `length`.
    pub fn geometric_from_first_edge(length: f64, cells: usize, first_edge: f64) -> Result<Self> {
        check_length(length)?;
        check_cells(cells)?;
        if !first_edge.is_finite() || first_edge <= 0.0 || first_edge >= length && cells > 1 {
            return Err(invalid(
                "first_edge",
                "must lie strictly inside (0, length) when cells > 1",
            ));
        }
        if cells == 1 {
            return Self::from_edges(alloc::vec![0.0, length]);
        }
        let ratio = libm::pow(length / first_edge, 1.0 / (cells - 1) as f64);
        let mut edges = Vec::with_capacity(cells + 1);
        edges.push(0.0);
        edges.push(first_edge);
        for k in 1..cells {
            let next = ratio * edges[k];
            edges.push(next);
        }
        edges[cells] = length;
        Self::from_edges(edges)
    }

    /// Grid from explicit edges; they must start at 0 and increase strictly.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(invalid("edges", "need at least two edges"));
        }
        if edges[0] != 0.0 {
            return Err(invalid("edges", "first edge must be 0"));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(invalid("edges", "edges must be finite"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("edges", "edges must be strictly increasing"));
        }
        let centers = edges.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            edges,
            centers,
            widths,
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Number of cells `I`.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Right end `R` of the domain.
    pub fn length(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    /// Lower edge `x_{i-1/2}` of cell `i` (0-based).
    #[inline]
    pub fn lower(&self, i: usize) -> f64 {
        self.edges[i]
    }

    /// Upper edge `x_{i+1/2}` of cell `i` (0-based).
    #[inline]
    pub fn upper(&self, i: usize) -> f64 {
        self.edges[i + 1]
    }
}

fn check_length(length: f64) -> Result<()> {
    if !length.is_finite() || length <= 0.0 {
        return Err(invalid("length", "domain length must be finite and positive"));
    }
    Ok(())
}

fn check_cells(cells: usize) -> Result<()> {
    if cells == 0 {
        return Err(invalid("cells", "need at least one cell"));
    }
    Ok(())
}

/// Uniform partition of `[0, T]` into `steps` intervals. Each interval may be
/// integrated with `substeps` equal Euler sub-steps (default 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
    dt: f64,
    substeps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !final_time.is_finite() || final_time <= 0.0 {
            return Err(invalid("final_time", "must be finite and positive"));
        }
        if steps == 0 {
            return Err(invalid("steps", "need at least one time step"));
        }
        Ok(Self {
            final_time,
            steps,
            dt: final_time / steps as f64,
            substeps: 1,
        })
    }

    pub fn with_substeps(mut self, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(invalid("substeps", "need at least one sub-step"));
        }
        self.substeps = substeps;
        Ok(self)
    }

    /// Zero-step grid: the dynamics is never applied and `dt` is reported as 0.
    pub fn frozen(final_time: f64) -> Result<Self> {
        if !final_time.is_finite() || final_time < 0.0 {
            return Err(invalid("final_time", "must be finite and nonnegative"));
        }
        Ok(Self {
            final_time,
            steps: 0,
            dt: 0.0,
            substeps: 1,
        })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Euler step actually applied: `dt / substeps`.
    pub fn substep_dt(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    /// Time of level `n`.
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps && self.steps > 0 {
            self.final_time
        } else {
            n as f64 * self.dt
        }
    }
}
