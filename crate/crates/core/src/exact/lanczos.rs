use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::kernel::MarkovKernel;

/// `y = S x` with `S = Π^{1/2} K Π^{-1/2}`.
fn apply_symmetrized(kernel: &MarkovKernel, sqrt_pi: &[f64], x: &[f64], y: &mut [f64]) {
    for u in 0..kernel.vertex_count() {
        let mut acc = kernel.holding(u) * x[u];
        for (v, q) in kernel.neighbors(u) {
            acc += q * sqrt_pi[u] / sqrt_pi[v] * x[v];
        }
        y[u] = acc;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue of the kernel below the trivial `β_0 = 1`, by Lanczos
/// with full reorthogonalization on the complement of `√π`.
///
/// For a lazy kernel this is `β_1`. Deterministic: the start vector is a
/// fixed function of the vertex index.
pub fn second_eigenvalue(kernel: &MarkovKernel, max_steps: usize, tolerance: f64) -> Result<f64> {
    let n = kernel.vertex_count();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two vertices".into()));
    }
    let sqrt_pi: Vec<f64> = kernel.stationary().iter().map(|p| p.sqrt()).collect();
    let steps = max_steps.min(n - 1).max(1);
    let deflate = |v: &mut [f64]| {
        let c = dot(v, &sqrt_pi);
        v.iter_mut().zip(&sqrt_pi).for_each(|(a, s)| *a -= c * s);
    };
    let mut q: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5)
        .collect();
    deflate(&mut q);
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    for j in 0..steps {
        apply_symmetrized(kernel, &sqrt_pi, &basis[j], &mut w);
        deflate(&mut w);
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(a, v)| *a -= c * v);
            }
            deflate(&mut w);
        }
        let beta = dot(&w, &w).sqrt();
        let (theta, residual) = top_ritz(&alphas, &betas, beta)?;
        if (residual <= tolerance && j >= 1) || beta <= 1e-14 {
            return Ok(theta);
        }
        betas.push(beta);
        basis.push(w.iter().map(|v| v / beta).collect());
    }
    let (theta, residual) = top_ritz(&alphas, &betas[..alphas.len() - 1], *betas.last().unwrap_or(&0.0))?;
    if residual > 1e-6 {
        return Err(Error::Eigen(format!(
            "Lanczos stopped after {steps} steps with Ritz residual {residual:e}"
        )));
    }
    Ok(theta)
}

/// Largest Ritz value of the tridiagonal matrix and its residual bound
/// `|β_k e_k^T s|`.
fn top_ritz(alphas: &[f64], betas: &[f64], next_beta: f64) -> Result<(f64, f64)> {
    let k = alphas.len();
    let mut t = Mat::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i + 1, i)] = betas[i];
            t[(i, i + 1)] = betas[i];
        }
    }
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let theta = evd.S().column_vector()[k - 1];
    let last = evd.U()[(k - 1, k - 1)];
    Ok((theta, (next_beta * last).abs()))
}

/// `1/(1 − β_1)` without a dense eigendecomposition.
pub fn relaxation_time_lanczos(kernel: &MarkovKernel) -> Result<f64> {
    let beta = second_eigenvalue(kernel, 600, 1e-10)?;
    if beta >= 1.0 {
        return Err(Error::Eigen(format!("second eigenvalue {beta} is not below 1")));
    }
    Ok(1.0 / (1.0 - beta))
}
