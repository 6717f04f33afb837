use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{MarkovKernel, PeriodicityInfo, Vertex};

/// Largest vertex count for dense eigendecomposition.
pub const SPECTRAL_CAP: usize = 4_000;

/// Eigenpairs of a reversible kernel in the `π`-weighted inner product.
///
/// `eigenvalues` are sorted from `β_0 = 1` downward; `phi(i, x)` is the
/// `i`-th eigenfunction, with `φ_0 ≡ 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    n: usize,
    /// Row-major, one eigenfunction per row.
    phi: Vec<f64>,
    pub stationary: Vec<f64>,
}

impl SpectralData {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn phi(&self, i: usize, x: Vertex) -> f64 {
        self.phi[i * self.n + x]
    }

    pub fn eigenfunction(&self, i: usize) -> &[f64] {
        &self.phi[i * self.n..(i + 1) * self.n]
    }

    /// `1 − β_1`.
    pub fn gap(&self) -> f64 {
        if self.n < 2 {
            return 1.0;
        }
        1.0 - self.eigenvalues[1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// `Σ_i β_i^t φ_i(x) φ_i(y) π(y) = K^t(x, y)`.
    pub fn power_entry(&self, t: u32, x: Vertex, y: Vertex) -> f64 {
        let mut s = 0.0;
        for (i, &b) in self.eigenvalues.iter().enumerate() {
            s += b.powi(t as i32) * self.phi(i, x) * self.phi(i, y);
        }
        s * self.stationary[y]
    }

    /// Indices contributing to the Green function: every `i ≥ 1` except the
    /// single eigenvalue `−1` of a bipartite chain.
    pub fn green_indices(&self, periodicity: &PeriodicityInfo) -> std::ops::Range<usize> {
        let end = if periodicity.is_bipartite { self.n - 1 } else { self.n };
        1..end
    }
}

pub fn spectral_decomposition(kernel: &MarkovKernel) -> Result<SpectralData> {
    let n = kernel.vertex_count();
    if n > SPECTRAL_CAP {
        return Err(Error::SizeCap {
            what: "spectral decomposition vertices",
            size: n,
            cap: SPECTRAL_CAP,
        });
    }
    let pi = kernel.stationary();
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    // S = Π^{1/2} K Π^{-1/2}, symmetric because π(x)K(x,y) = π(y)K(y,x).
    let mut s = Mat::<f64>::zeros(n, n);
    for x in 0..n {
        s[(x, x)] = kernel.holding(x);
        for (y, q) in kernel.neighbors(x) {
            s[(x, y)] += 0.5 * q * sqrt_pi[x] / sqrt_pi[y];
            s[(y, x)] += 0.5 * q * sqrt_pi[x] / sqrt_pi[y];
        }
    }
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = evd.S().column_vector();
    let u = evd.U();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut phi = vec![0.0; n * n];
    for (row, col) in (0..n).rev().enumerate() {
        eigenvalues.push(values[col]);
        for x in 0..n {
            phi[row * n + x] = u[(x, col)] / sqrt_pi[x];
        }
    }
    if phi[..n].iter().sum::<f64>() < 0.0 {
        phi[..n].iter_mut().for_each(|v| *v = -*v);
    }
    if (eigenvalues[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Eigen(format!(
            "leading eigenvalue {} differs from 1",
            eigenvalues[0]
        )));
    }
    Ok(SpectralData {
        eigenvalues,
        n,
        phi,
        stationary: pi.to_vec(),
    })
}

/// `𝒢(x, y) = Σ_n (k^n(x, y) − 1)`, stored densely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenFunction {
    n: usize,
    values: Vec<f64>,
    pub periodic: bool,
}

impl GreenFunction {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: Vertex, y: Vertex) -> f64 {
        self.values[x * self.n + y]
    }

    pub fn row(&self, x: Vertex) -> &[f64] {
        &self.values[x * self.n..(x + 1) * self.n]
    }
}

/// Spectral form `Σ φ_i(x) φ_i(y) / (1 − β_i)` over [`SpectralData::green_indices`].
/// For bipartite chains this is the regrouped series `Σ (k^{2n} + k^{2n+1} − 2)`.
pub fn green_function(spec: &SpectralData, periodicity: &PeriodicityInfo) -> GreenFunction {
    let n = spec.n;
    let range = spec.green_indices(periodicity);
    let m = range.len();
    let mut a = Mat::<f64>::zeros(n, m);
    let mut b = Mat::<f64>::zeros(n, m);
    for (j, i) in range.enumerate() {
        let scale = 1.0 / (1.0 - spec.eigenvalues[i]);
        for x in 0..n {
            let p = spec.phi(i, x);
            a[(x, j)] = p * scale;
            b[(x, j)] = p;
        }
    }
    let g = &a * b.transpose();
    let mut values = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            values[x * n + y] = 0.5 * (g[(x, y)] + g[(y, x)]);
        }
    }
    GreenFunction {
        n,
        values,
        periodic: periodicity.is_bipartite,
    }
}

/// `H(x, y) = 𝒢(y, y) − 𝒢(x, y)`, plus one when a bipartite chain must
/// cross between classes.
pub fn hitting_from_green(green: &GreenFunction, periodicity: &PeriodicityInfo, x: Vertex, y: Vertex) -> f64 {
    if x == y {
        return 0.0;
    }
    let base = green.get(y, y) - green.get(x, y);
    if periodicity.opposite_classes(x, y) {
        base + 1.0
    } else {
        base
    }
}

/// All-pairs `H`, row-major with `H[x·n + y] = H(x, y)`.
pub fn hitting_matrix(green: &GreenFunction, periodicity: &PeriodicityInfo) -> Vec<f64> {
    let n = green.n;
    let mut h = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            h[x * n + y] = hitting_from_green(green, periodicity, x, y);
        }
    }
    h
}

/// `1 / (1 − β_1)`. Meaningful for lazy kernels, where `β_1` is the second
/// largest eigenvalue in absolute value.
pub fn relaxation_time(spec: &SpectralData) -> Result<f64> {
    let gap = spec.gap();
    if gap <= 0.0 {
        return Err(Error::Eigen(format!("nonpositive spectral gap {gap}")));
    }
    Ok(1.0 / gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{complete_graph, cycle};
    use crate::kernel::build_kernel;

    #[test]
    fn complete_graph_spectrum() {
        let k = complete_graph(4).unwrap().kernel;
        let spec = spectral_decomposition(&k).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-12);
        for &b in &spec.eigenvalues[1..] {
            assert!((b + 1.0 / 3.0).abs() < 1e-12);
        }
        for x in 0..4 {
            assert!((spec.phi(0, x) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn two_cycle_is_periodic() {
        let k = build_kernel(2, &[(0, 1, 1.0)]).unwrap();
        let spec = spectral_decomposition(&k).unwrap();
        assert!((spec.eigenvalues[1] + 1.0).abs() < 1e-12);
        let info = k.periodicity();
        assert_eq!(spec.green_indices(&info).len(), 0);
    }

    #[test]
    fn orthonormal_and_reconstructs() {
        let k = build_kernel(5, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 4, 1.5), (4, 0, 1.0), (2, 2, 0.3)]).unwrap();
        let spec = spectral_decomposition(&k).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dot: f64 = (0..5).map(|x| spec.phi(i, x) * spec.phi(j, x) * k.pi(x)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-8);
            }
        }
        for x in 0..5 {
            for y in 0..5 {
                assert!((spec.power_entry(1, x, y) - k.prob(x, y)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lazy_spectrum_is_affine_image() {
        let k = cycle(7).unwrap().kernel;
        let a = spectral_decomposition(&k).unwrap();
        for eps in [0.25, 0.5] {
            let b = spectral_decomposition(&k.lazify(eps).unwrap()).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((eps + (1.0 - eps) * x - y).abs() < 1e-10);
            }
            assert!(b.min_eigenvalue() >= 2.0 * eps - 1.0 - 1e-12);
        }
    }

    /// Partial sums of `k^n(x, y) − 1` by repeated multiplication.
    fn brute_green(k: &MarkovKernel, terms: usize) -> Vec<f64> {
        let n = k.vertex_count();
        let mut g = vec![0.0; n * n];
        for x in 0..n {
            let mut row = vec![0.0; n];
            row[x] = 1.0;
            for _ in 0..terms {
                for y in 0..n {
                    g[x * n + y] += row[y] / k.pi(y) - 1.0;
                }
                let mut next = vec![0.0; n];
                for u in 0..n {
                    next[u] += row[u] * k.holding(u);
                    for (v, q) in k.neighbors(u) {
                        next[v] += row[u] * q;
                    }
                }
                row = next;
            }
        }
        g
    }

    #[test]
    fn green_of_complete_graph_matches_series() {
        let k = complete_graph(4).unwrap().kernel;
        let spec = spectral_decomposition(&k).unwrap();
        let g = green_function(&spec, &k.periodicity());
        let brute = brute_green(&k, 200);
        for x in 0..4 {
            // 𝒢(x,x) = Σ 3(−1/3)^n = 9/4, and G(x,x) = 𝒢(x,x)π(x) = 9/16.
            assert!((g.get(x, x) - 9.0 / 4.0).abs() < 1e-9);
            assert!((g.get(x, x) * k.pi(x) - 9.0 / 16.0).abs() < 1e-9);
            for y in 0..4 {
                assert!((g.get(x, y) - brute[x * 4 + y]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn periodic_green_matches_paired_series() {
        let k = cycle(4).unwrap().kernel;
        let info = k.periodicity();
        assert!(info.is_bipartite);
        let spec = spectral_decomposition(&k).unwrap();
        let g = green_function(&spec, &info);
        // Paired series Σ (k^{2n} + k^{2n+1} − 2) over n < 200.
        let brute = brute_green(&k, 400);
        for x in 0..4 {
            for y in 0..4 {
                assert!((g.get(x, y) - brute[x * 4 + y]).abs() < 1e-9, "({x},{y})");
            }
        }
    }

    #[test]
    fn hitting_examples() {
        let k = cycle(5).unwrap().kernel;
        let info = k.periodicity();
        let g = green_function(&spectral_decomposition(&k).unwrap(), &info);
        assert!((hitting_from_green(&g, &info, 0, 2) - 6.0).abs() < 1e-9);
        assert_eq!(hitting_from_green(&g, &info, 3, 3), 0.0);

        let k = cycle(4).unwrap().kernel;
        let info = k.periodicity();
        let g = green_function(&spectral_decomposition(&k).unwrap(), &info);
        assert!((hitting_from_green(&g, &info, 0, 2) - 4.0).abs() < 1e-9);
        assert!((hitting_from_green(&g, &info, 0, 1) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn relaxation_examples() {
        let k = complete_graph(4).unwrap().kernel.lazify(0.5).unwrap();
        let t = relaxation_time(&spectral_decomposition(&k).unwrap()).unwrap();
        assert!((t - 1.5).abs() < 1e-10);
        let k = build_kernel(2, &[(0, 1, 1.0)]).unwrap().lazify(0.5).unwrap();
        let t = relaxation_time(&spectral_decomposition(&k).unwrap()).unwrap();
        assert!((t - 1.0).abs() < 1e-10);
    }
}
