//! Exact Green functions, hitting times, resistances and relaxation times.
//!
//! Two independent routes compute hitting times: the spectral route through
//! the Green function and grounded sparse linear solves. Each is used to
//! check the other.

mod lanczos;
mod solve;
mod spectral;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lanczos::{relaxation_time_lanczos, second_eigenvalue};
pub use solve::{
    effective_resistance, green_column, hitting_linear_solve, hitting_residual, network_resistance,
    return_time, return_time_from_hitting, solve_grounded, solve_pcg, GroundedSolution, HittingColumn,
    SolverKind, ACCEPT_RELATIVE_RESIDUAL, DIRECT_SOLVE_CAP,
};
pub use spectral::{
    green_function, hitting_from_green, hitting_matrix, relaxation_time, spectral_decomposition,
    GreenFunction, SpectralData, SPECTRAL_CAP,
};

use crate::error::Result;
use crate::kernel::{MarkovKernel, Vertex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    Cholesky,
    ConjugateGradient,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::Cholesky => "cholesky",
            Method::ConjugateGradient => "conjugate_gradient",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl From<SolverKind> for Method {
    fn from(kind: SolverKind) -> Self {
        match kind {
            SolverKind::Cholesky => Method::Cholesky,
            SolverKind::ConjugateGradient => Method::ConjugateGradient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Spectral up to [`SPECTRAL_CAP`] vertices, linear solves above.
    Auto,
    Spectral,
    LinearSolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingEntry {
    pub source: Vertex,
    pub target: Vertex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub pairs: Vec<HittingEntry>,
    pub method: Method,
    /// Largest `|(I − K)h − 1|` over the targets involved.
    pub residual: f64,
}

/// `H(x, y)` for every requested pair.
pub fn hitting_times(kernel: &MarkovKernel, pairs: &[(Vertex, Vertex)], route: Route) -> Result<HittingReport> {
    let spectral = match route {
        Route::Spectral => true,
        Route::LinearSolve => false,
        Route::Auto => kernel.vertex_count() <= SPECTRAL_CAP,
    };
    let mut targets: Vec<Vertex> = pairs.iter().map(|p| p.1).collect();
    targets.sort_unstable();
    targets.dedup();
    if spectral {
        let h = HittingTable::spectral(kernel)?;
        let residual = targets
            .iter()
            .map(|&y| hitting_residual(kernel, y, &h.column(y)))
            .fold(0.0, f64::max);
        let pairs = pairs
            .iter()
            .map(|&(x, y)| HittingEntry {
                source: x,
                target: y,
                value: h.get(x, y),
            })
            .collect();
        return Ok(HittingReport {
            pairs,
            method: Method::Spectral,
            residual,
        });
    }
    let columns: Vec<HittingColumn> = targets
        .par_iter()
        .map(|&y| hitting_linear_solve(kernel, y))
        .collect::<Result<_>>()?;
    let by_target: BTreeMap<Vertex, &HittingColumn> = columns.iter().map(|c| (c.target, c)).collect();
    let method = columns
        .iter()
        .map(|c| Method::from(c.solver))
        .find(|m| *m == Method::ConjugateGradient)
        .unwrap_or(Method::Cholesky);
    Ok(HittingReport {
        pairs: pairs
            .iter()
            .map(|&(x, y)| HittingEntry {
                source: x,
                target: y,
                value: by_target[&y].values[x],
            })
            .collect(),
        method,
        residual: columns.iter().map(|c| c.residual).fold(0.0, f64::max),
    })
}

/// Dense all-pairs hitting times.
#[derive(Debug, Clone)]
pub struct HittingTable {
    n: usize,
    values: Vec<f64>,
    pub method: Method,
}

impl HittingTable {
    pub fn spectral(kernel: &MarkovKernel) -> Result<HittingTable> {
        let info = kernel.periodicity();
        let spec = spectral_decomposition(kernel)?;
        let green = green_function(&spec, &info);
        Ok(HittingTable {
            n: kernel.vertex_count(),
            values: hitting_matrix(&green, &info),
            method: Method::Spectral,
        })
    }

    /// One grounded solve per target.
    pub fn linear_solve(kernel: &MarkovKernel) -> Result<HittingTable> {
        let n = kernel.vertex_count();
        let columns: Vec<HittingColumn> = (0..n)
            .into_par_iter()
            .map(|y| hitting_linear_solve(kernel, y))
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; n * n];
        for col in &columns {
            for x in 0..n {
                values[x * n + col.target] = col.values[x];
            }
        }
        Ok(HittingTable {
            n,
            values,
            method: columns.first().map(|c| c.solver.into()).unwrap_or(Method::Cholesky),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: Vertex, y: Vertex) -> f64 {
        self.values[x * self.n + y]
    }

    pub fn column(&self, y: Vertex) -> Vec<f64> {
        (0..self.n).map(|x| self.get(x, y)).collect()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// `1/(1 − β_1)` of the kernel, dense up to [`SPECTRAL_CAP`], Lanczos above.
pub fn relaxation_time_of(kernel: &MarkovKernel) -> Result<f64> {
    if kernel.vertex_count() <= SPECTRAL_CAP {
        relaxation_time(&spectral_decomposition(kernel)?)
    } else {
        relaxation_time_lanczos(kernel)
    }
}
