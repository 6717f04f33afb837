use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{MarkovKernel, PeriodicityInfo, Vertex};

/// Largest grounded system handed to the sparse Cholesky factorization.
pub const DIRECT_SOLVE_CAP: usize = 50_000;
pub const TARGET_RELATIVE_RESIDUAL: f64 = 1e-10;
pub const ACCEPT_RELATIVE_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Cholesky,
    ConjugateGradient,
}

/// Solution of a grounded Laplacian system on `V ∖ {ground}`.
#[derive(Debug, Clone)]
pub struct GroundedSolution {
    /// Full-length vector with zero at the ground vertex.
    pub values: Vec<f64>,
    pub solver: SolverKind,
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Solves `L u = b` on `V ∖ {ground}` with `u(ground) = 0`, where `L` is the
/// weighted Laplacian `L(x, x) = Σ_{y≠x} w(x, y)`, `L(x, y) = −w(x, y)`.
///
/// Grounding one vertex of a connected network makes the system symmetric
/// positive definite.
pub fn solve_grounded(kernel: &MarkovKernel, ground: Vertex, rhs: &[f64]) -> Result<GroundedSolution> {
    let n = kernel.vertex_count();
    if ground >= n {
        return Err(Error::VertexOutOfRange {
            vertex: ground,
            vertex_count: n,
        });
    }
    if n == 1 {
        return Ok(GroundedSolution {
            values: vec![0.0],
            solver: SolverKind::Cholesky,
            relative_residual: 0.0,
            iterations: 0,
        });
    }
    let m = n - 1;
    if m <= DIRECT_SOLVE_CAP {
        solve_cholesky(kernel, ground, rhs)
    } else {
        solve_pcg(kernel, ground, rhs, TARGET_RELATIVE_RESIDUAL, 20 * m + 1_000)
    }
}

fn reduced(v: Vertex, ground: Vertex) -> usize {
    if v < ground {
        v
    } else {
        v - 1
    }
}

fn laplacian_apply(kernel: &MarkovKernel, ground: Vertex, u: &[f64], out: &mut [f64]) {
    for x in 0..kernel.vertex_count() {
        if x == ground {
            out[x] = 0.0;
            continue;
        }
        let mut acc = 0.0;
        for (y, w) in kernel.weighted_neighbors(x) {
            acc += w * (u[x] - u[y]);
        }
        out[x] = acc;
    }
}

fn relative_residual(kernel: &MarkovKernel, ground: Vertex, u: &[f64], rhs: &[f64]) -> f64 {
    let mut lu = vec![0.0; u.len()];
    laplacian_apply(kernel, ground, u, &mut lu);
    let mut num = 0.0;
    let mut den = 0.0;
    for x in 0..u.len() {
        if x == ground {
            continue;
        }
        num += (rhs[x] - lu[x]).powi(2);
        den += rhs[x].powi(2);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn solve_cholesky(kernel: &MarkovKernel, ground: Vertex, rhs: &[f64]) -> Result<GroundedSolution> {
    let n = kernel.vertex_count();
    let m = n - 1;
    let mut triplets = Vec::with_capacity(m + kernel.edge_count());
    for x in 0..n {
        if x == ground {
            continue;
        }
        let rx = reduced(x, ground);
        let mut diag = 0.0;
        for (y, w) in kernel.weighted_neighbors(x) {
            diag += w;
            if y != ground && y < x {
                triplets.push(Triplet::new(rx, reduced(y, ground), -w));
            }
        }
        triplets.push(Triplet::new(rx, rx, diag));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &triplets)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let mut b = Mat::<f64>::zeros(m, 1);
    for x in 0..n {
        if x != ground {
            b[(reduced(x, ground), 0)] = rhs[x];
        }
    }
    llt.solve_in_place(b.as_mut());
    let mut values = vec![0.0; n];
    for x in 0..n {
        if x != ground {
            values[x] = b[(reduced(x, ground), 0)];
        }
    }
    let res = relative_residual(kernel, ground, &values, rhs);
    if !(res <= ACCEPT_RELATIVE_RESIDUAL) {
        return Err(Error::NonConvergence {
            residual: res,
            iterations: 0,
        });
    }
    Ok(GroundedSolution {
        values,
        solver: SolverKind::Cholesky,
        relative_residual: res,
        iterations: 0,
    })
}

/// Jacobi-preconditioned conjugate gradients on the grounded system.
pub fn solve_pcg(
    kernel: &MarkovKernel,
    ground: Vertex,
    rhs: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<GroundedSolution> {
    let n = kernel.vertex_count();
    let diag: Vec<f64> = (0..n)
        .map(|x| kernel.weighted_neighbors(x).map(|(_, w)| w).sum::<f64>())
        .collect();
    let mut b = rhs.to_vec();
    b[ground] = 0.0;
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut u = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GroundedSolution {
            values: u,
            solver: SolverKind::ConjugateGradient,
            relative_residual: 0.0,
            iterations: 0,
        });
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = (0..n).map(|x| if x == ground { 0.0 } else { r[x] / diag[x] }).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iterations {
        laplacian_apply(kernel, ground, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for x in 0..n {
            u[x] += alpha * p[x];
            r[x] -= alpha * ap[x];
        }
        iterations += 1;
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if rel <= tolerance {
            break;
        }
        for x in 0..n {
            z[x] = if x == ground { 0.0 } else { r[x] / diag[x] };
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for x in 0..n {
            p[x] = z[x] + beta * p[x];
        }
    }
    let res = relative_residual(kernel, ground, &u, rhs);
    if !(res <= ACCEPT_RELATIVE_RESIDUAL) {
        return Err(Error::NonConvergence {
            residual: res.max(rel),
            iterations,
        });
    }
    Ok(GroundedSolution {
        values: u,
        solver: SolverKind::ConjugateGradient,
        relative_residual: res,
        iterations,
    })
}

/// `H(·, target)` together with the residual `max_{x≠target} |(I − K)h(x) − 1|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingColumn {
    pub target: Vertex,
    pub values: Vec<f64>,
    pub residual: f64,
    pub solver: SolverKind,
}

/// Solves `(I − K)h = 1` on `V ∖ {target}`, `h(target) = 0`, in the
/// symmetric form `L h = deg`.
pub fn hitting_linear_solve(kernel: &MarkovKernel, target: Vertex) -> Result<HittingColumn> {
    let n = kernel.vertex_count();
    let rhs: Vec<f64> = (0..n).map(|x| kernel.degree(x)).collect();
    let sol = solve_grounded(kernel, target, &rhs)?;
    let residual = hitting_residual(kernel, target, &sol.values);
    if residual > ACCEPT_RELATIVE_RESIDUAL * (1.0 + sol.values.iter().cloned().fold(0.0, f64::max)) {
        return Err(Error::NonConvergence {
            residual,
            iterations: sol.iterations,
        });
    }
    Ok(HittingColumn {
        target,
        values: sol.values,
        residual,
        solver: sol.solver,
    })
}

/// `max_{x ≠ target} |h(x) − Σ_y K(x, y) h(y) − 1|`.
pub fn hitting_residual(kernel: &MarkovKernel, target: Vertex, h: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for x in 0..kernel.vertex_count() {
        if x == target {
            continue;
        }
        let mut kh = kernel.holding(x) * h[x];
        for (y, q) in kernel.neighbors(x) {
            kh += q * h[y];
        }
        worst = worst.max((h[x] - kh - 1.0).abs());
    }
    worst
}

/// Expected return time `E_a[τ_a⁺] = 1/π(a)`.
pub fn return_time(kernel: &MarkovKernel, a: Vertex) -> f64 {
    1.0 / kernel.pi(a)
}

/// `1 + Σ_z K(a, z) H(z, a)` from a column of hitting times into `a`.
pub fn return_time_from_hitting(kernel: &MarkovKernel, a: Vertex, column: &[f64]) -> f64 {
    let mut s = 1.0;
    for (z, q) in kernel.neighbors(a) {
        s += q * column[z];
    }
    s
}

/// Effective resistance in the network `c(x, y) = π(x) K(x, y)`: ground `y`,
/// inject a unit current at `x` and read the potential at `x`.
pub fn effective_resistance(kernel: &MarkovKernel, x: Vertex, y: Vertex) -> Result<f64> {
    let n = kernel.vertex_count();
    for v in [x, y] {
        if v >= n {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                vertex_count: n,
            });
        }
    }
    if x == y {
        return Ok(0.0);
    }
    // Kernel weights are conductances scaled by Σ deg.
    let total: f64 = (0..n).map(|v| kernel.degree(v)).sum();
    let mut rhs = vec![0.0; n];
    rhs[x] = total;
    let sol = solve_grounded(kernel, y, &rhs)?;
    Ok(sol.values[x])
}

/// Effective resistance measured in the kernel's own edge weights `w(x, y)`
/// rather than in `c(x, y) = w(x, y) / Σ deg`. For a kernel built from unit
/// weights this is the resistance of the unit-resistor network.
pub fn network_resistance(kernel: &MarkovKernel, x: Vertex, y: Vertex) -> Result<f64> {
    let total: f64 = (0..kernel.vertex_count()).map(|v| kernel.degree(v)).sum();
    Ok(effective_resistance(kernel, x, y)? / total)
}

/// One column `𝒢(·, y)` of the Green function from a hitting column, fixed
/// by the gauge `Σ_x π(x) 𝒢(x, y) = 0`.
pub fn green_column(
    kernel: &MarkovKernel,
    periodicity: &PeriodicityInfo,
    y: Vertex,
) -> Result<Vec<f64>> {
    let column = hitting_linear_solve(kernel, y)?;
    let n = kernel.vertex_count();
    // 𝒢(x,y) = 𝒢(y,y) − H(x,y) + 1{x, y in opposite classes}.
    let shifted: Vec<f64> = (0..n)
        .map(|x| -column.values[x] + if periodicity.opposite_classes(x, y) { 1.0 } else { 0.0 })
        .collect();
    let mean: f64 = (0..n).map(|x| kernel.pi(x) * shifted[x]).sum();
    Ok(shifted.into_iter().map(|v| v - mean).collect())
}
