//! Numerical certificates for ellipticity, volume doubling, the Poincaré
//! inequality, the spectral gap and sub-Gaussian heat kernel envelopes.

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{relaxation_time_of, spectral_decomposition, SpectralData, SPECTRAL_CAP};
use crate::kernel::{MarkovKernel, MetricProfile, Vertex};

pub const ENVELOPE_C2_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];
/// Balls larger than this are skipped by [`poincare_profile`].
pub const POINCARE_BALL_CAP: usize = 3_000;

/// `p₀ = min K(x, y)` over off-diagonal edges.
pub fn ellipticity(kernel: &MarkovKernel) -> f64 {
    (0..kernel.vertex_count())
        .flat_map(|x| kernel.neighbors(x).map(|(_, q)| q).collect::<Vec<_>>())
        .fold(f64::INFINITY, f64::min)
}

/// Radii `1, 2, 4, …` not exceeding `diameter`.
pub fn dyadic_radii(diameter: usize) -> Vec<usize> {
    let mut radii = Vec::new();
    let mut r = 1;
    while r <= diameter.max(1) {
        radii.push(r);
        r *= 2;
    }
    radii
}

/// `max V(x, 2r)/V(x, r)` over the profiles and the given radii.
pub fn doubling_constant(profiles: &[MetricProfile], radii: &[usize]) -> f64 {
    profiles
        .iter()
        .flat_map(|p| radii.iter().map(move |&r| p.volume(2 * r) / p.volume(r)))
        .fold(1.0, f64::max)
}

/// [`doubling_constant`] over all sources and dyadic radii, computing one
/// profile at a time.
pub fn doubling_from_kernel(kernel: &MarkovKernel, diameter: usize) -> f64 {
    let radii = dyadic_radii(diameter);
    (0..kernel.vertex_count())
        .into_par_iter()
        .map(|x| {
            let p = kernel.metric_profile(x).expect("vertex in range");
            doubling_constant(std::slice::from_ref(&p), &radii)
        })
        .reduce(|| 1.0, f64::max)
}

/// `count` balls with evenly spread centres and log-spaced radii in `[1, D]`.
pub fn sample_balls(kernel: &MarkovKernel, count: usize, diameter: usize) -> Vec<(Vertex, usize)> {
    let n = kernel.vertex_count();
    let d = diameter.max(1) as f64;
    (0..count)
        .map(|i| {
            let centre = (i * n) / count.max(1);
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            let r = d.powf(t).round().max(1.0) as usize;
            (centre, r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPoincare {
    pub centre: Vertex,
    pub radius: usize,
    pub size: usize,
    pub lambda1: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    /// Largest `C_P(B)` over the evaluated balls.
    pub constant: f64,
    pub balls: Vec<BallPoincare>,
    pub skipped: usize,
}

/// Smallest nonzero eigenvalue of `Π_B^{-1/2} (2 L_B) Π_B^{-1/2}`, where
/// `L_B` is the Laplacian of the conductances `π(z)K(z, w)` inside `B`.
/// With this normalization
/// `Σ_B |f − f_B|² π ≤ λ₁^{-1} Σ_{ξ,ζ ∈ B} |f(ξ) − f(ζ)|² π(ξ)K(ξ, ζ)`
/// is sharp.
pub fn ball_lambda1(kernel: &MarkovKernel, ball: &[Vertex]) -> Result<f64> {
    let m = ball.len();
    if m < 2 {
        return Err(Error::InvalidParameter("ball needs at least two vertices".into()));
    }
    let mut local = std::collections::HashMap::with_capacity(m);
    for (i, &v) in ball.iter().enumerate() {
        local.insert(v, i);
    }
    let mut a = Mat::<f64>::zeros(m, m);
    for (i, &z) in ball.iter().enumerate() {
        let pz = kernel.pi(z);
        for (w, q) in kernel.neighbors(z) {
            if let Some(&j) = local.get(&w) {
                let c = 2.0 * pz * q;
                let scaled = c / (pz * kernel.pi(w)).sqrt();
                a[(i, j)] -= scaled;
                a[(i, i)] += c / pz;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let values = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(values[1])
}

/// `C_P(B) = 1/(r^θ λ₁(B))` for each sampled ball; returns the maximum.
pub fn poincare_profile(kernel: &MarkovKernel, theta: f64, balls: &[(Vertex, usize)]) -> Result<PoincareReport> {
    let results: Vec<Option<BallPoincare>> = balls
        .par_iter()
        .map(|&(centre, radius)| {
            let profile = kernel.metric_profile(centre).ok()?;
            let ball = profile.ball(radius);
            if ball.len() < 2 || ball.len() > POINCARE_BALL_CAP {
                return None;
            }
            let lambda1 = ball_lambda1(kernel, &ball).ok()?;
            if !(lambda1 > 0.0) {
                return None;
            }
            Some(BallPoincare {
                centre,
                radius,
                size: ball.len(),
                lambda1,
                constant: 1.0 / ((radius as f64).powf(theta) * lambda1),
            })
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::warn!("poincare_profile skipped {skipped} of {} balls", balls.len());
    }
    let balls: Vec<BallPoincare> = results.into_iter().flatten().collect();
    if balls.is_empty() {
        return Err(Error::Eigen("no ball could be evaluated".into()));
    }
    Ok(PoincareReport {
        constant: balls.iter().map(|b| b.constant).fold(0.0, f64::max),
        balls,
        skipped,
    })
}

/// `(1 − β₁)·D^θ` from the spectrum of a lazy kernel.
pub fn spectral_gap_check(spec: &SpectralData, diameter: usize, theta: f64) -> f64 {
    spec.gap() * (diameter as f64).powf(theta)
}

/// `(1 − β₁)·D^θ` for the kernel made lazy if needed; dense eigensolver up to
/// the spectral cap, Lanczos above.
pub fn gap_product(kernel: &MarkovKernel, diameter: usize, theta: f64) -> Result<f64> {
    let lazy = kernel.ensure_lazy()?;
    if lazy.vertex_count() <= SPECTRAL_CAP {
        Ok(spectral_gap_check(&spectral_decomposition(&lazy)?, diameter, theta))
    } else {
        Ok((diameter as f64).powf(theta) / relaxation_time_of(&lazy)?)
    }
}

/// `μ ↦ μK` for a row vector.
fn step_measure(kernel: &MarkovKernel, mu: &[f64], out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate() {
        *o = mu[x] * kernel.holding(x);
    }
    for x in 0..kernel.vertex_count() {
        let m = mu[x];
        if m == 0.0 {
            continue;
        }
        for (y, q) in kernel.neighbors(x) {
            out[y] += m * q;
        }
    }
}

/// Evolves `δ_x` and records `k^n(x, ·) = K^n(x, ·)/π` at each requested time
/// (sorted ascending) and at the time after it.
pub fn heat_kernel_rows(kernel: &MarkovKernel, x: Vertex, times: &[u64]) -> Vec<(u64, Vec<f64>, Vec<f64>)> {
    let n = kernel.vertex_count();
    let mut mu = vec![0.0; n];
    mu[x] = 1.0;
    let mut next = vec![0.0; n];
    let mut t = 0u64;
    let mut rows = Vec::with_capacity(times.len());
    let normalize = |m: &[f64]| -> Vec<f64> { m.iter().enumerate().map(|(y, v)| v / kernel.pi(y)).collect() };
    for &target in times {
        while t < target {
            step_measure(kernel, &mu, &mut next);
            std::mem::swap(&mut mu, &mut next);
            t += 1;
        }
        step_measure(kernel, &mu, &mut next);
        rows.push((t, normalize(&mu), normalize(&next)));
    }
    rows
}

/// Distinct integer times log-spaced over `[1, max]`.
pub fn log_times(max: u64, count: usize) -> Vec<u64> {
    let max = max.max(1);
    let mut times: Vec<u64> = (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 1.0 };
            (max as f64).powf(t).round().max(1.0) as u64
        })
        .collect();
    times.sort_unstable();
    times.dedup();
    times
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c2: f64,
    /// Smallest `C₁` with `k^n ≤ C₁/V · exp(−C₂ (d^θ/n)^{1/(θ−1)})` on the sample.
    pub upper_c1: f64,
    /// Largest `c₁` with `k^n + k^{n+1} ≥ c₁/V · exp(−c₂ (d^θ/n)^{1/(θ−1)})`
    /// over samples with `d ≤ n`, here with `c₂ = C₂`.
    pub lower_c1: f64,
    pub upper_violations: usize,
    pub lower_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub fits: Vec<EnvelopeFit>,
    pub samples: usize,
    pub sources: Vec<Vertex>,
    pub times: Vec<u64>,
}

impl EnvelopeReport {
    pub fn violations(&self) -> usize {
        self.fits.iter().map(|f| f.upper_violations + f.lower_violations).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub sources: usize,
    pub times: usize,
    /// Largest time as a multiple of `D^θ`.
    pub horizon: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            sources: 4,
            times: 16,
            horizon: 10.0,
        }
    }
}

/// Fits the two-sided sub-Gaussian envelope on all targets `y` for a few
/// sources `x` and log-spaced times `n ≤ horizon·D^θ`. A fitted constant
/// that is zero or not finite counts as a violation.
pub fn heat_kernel_envelope(kernel: &MarkovKernel, theta: f64, diameter: usize, config: &EnvelopeConfig) -> Result<EnvelopeReport> {
    if !(theta > 1.0) {
        return Err(Error::InvalidParameter(format!("theta {theta} must exceed 1")));
    }
    let n = kernel.vertex_count();
    let count = config.sources.clamp(1, n);
    let sources: Vec<Vertex> = (0..count).map(|i| i * n / count).collect();
    let horizon = (config.horizon * (diameter as f64).powf(theta)).ceil() as u64;
    let times = log_times(horizon, config.times);
    let exponent = 1.0 / (theta - 1.0);
    // Per source: (V(x, ·), rows).
    let per_source: Vec<(MetricProfile, Vec<(u64, Vec<f64>, Vec<f64>)>)> = sources
        .par_iter()
        .map(|&x| (kernel.metric_profile(x).expect("vertex in range"), heat_kernel_rows(kernel, x, &times)))
        .collect();
    let mut samples = 0;
    let mut fits: Vec<EnvelopeFit> = ENVELOPE_C2_GRID
        .iter()
        .map(|&c2| EnvelopeFit {
            c2,
            upper_c1: 0.0,
            lower_c1: f64::INFINITY,
            upper_violations: 0,
            lower_violations: 0,
        })
        .collect();
    for (profile, rows) in &per_source {
        for (t, k_now, k_next) in rows {
            let tf = *t as f64;
            let v = profile.volume(tf.powf(1.0 / theta).floor() as usize);
            for y in 0..n {
                let d = profile.distances[y] as f64;
                let gauss = (d.powf(theta) / tf).powf(exponent);
                samples += 1;
                for fit in fits.iter_mut() {
                    let weight = (fit.c2 * gauss).exp();
                    if k_now[y] > 0.0 {
                        fit.upper_c1 = fit.upper_c1.max(k_now[y] * v * weight);
                    }
                    if d <= tf {
                        let lower = (k_now[y] + k_next[y]) * v * weight;
                        if lower > 0.0 {
                            fit.lower_c1 = fit.lower_c1.min(lower);
                        } else {
                            fit.lower_violations += 1;
                        }
                    }
                }
            }
        }
    }
    for fit in fits.iter_mut() {
        if !(fit.upper_c1.is_finite() && fit.upper_c1 > 0.0) {
            fit.upper_violations += 1;
        }
        if !(fit.lower_c1.is_finite() && fit.lower_c1 > 0.0) {
            fit.lower_violations += 1;
        }
    }
    Ok(EnvelopeReport {
        fits,
        samples,
        sources,
        times,
    })
}

/// `|k^n(x, y) − 1| ≤ C e^{−c n / D^θ}` for `n ≥ D^θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c: f64,
    /// Smallest prefactor covering every sampled point at the fitted rate.
    pub prefactor: f64,
    pub points: Vec<(u64, f64)>,
}

/// Least-squares fit of `ln max_y |k^n(x, y) − 1|` against `n/D^θ` on the
/// lazy version of the kernel, for `n` log-spaced in `[D^θ, horizon·D^θ]`.
pub fn decay_fit(kernel: &MarkovKernel, source: Vertex, theta: f64, diameter: usize, horizon: f64) -> Result<DecayFit> {
    let lazy = kernel.ensure_lazy()?;
    let scale = (diameter.max(1) as f64).powf(theta);
    let start = scale.ceil() as u64;
    let end = (horizon * scale).ceil() as u64;
    let times: Vec<u64> = log_times(end, 24).into_iter().filter(|&t| t >= start).collect();
    let rows = heat_kernel_rows(&lazy, source, &times);
    let points: Vec<(u64, f64)> = rows
        .iter()
        .map(|(t, k, _)| (*t, k.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)))
        .filter(|&(_, dev)| dev > 1e-13)
        .collect();
    if points.len() < 3 {
        return Err(Error::InvalidParameter(
            "too few resolvable points for a decay fit".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| t as f64 / scale).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    let c = -slope;
    let prefactor = points
        .iter()
        .map(|&(t, d)| d * (c * t as f64 / scale).exp())
        .fold(0.0, f64::max);
    Ok(DecayFit { c, prefactor, points })
}

/// Slope and intercept of the ordinary least-squares line.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub balls: usize,
    pub envelope: EnvelopeConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            balls: 20,
            envelope: EnvelopeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackCertificate {
    pub theta: f64,
    pub diameter: usize,
    pub p0: f64,
    pub doubling: f64,
    pub poincare: f64,
    pub poincare_skipped: usize,
    pub gap_product: f64,
    pub envelope: EnvelopeReport,
    pub envelope_violations: usize,
}

impl HarnackCertificate {
    pub fn is_finite(&self) -> bool {
        [self.p0, self.doubling, self.poincare, self.gap_product]
            .iter()
            .all(|v| v.is_finite())
    }
}

pub fn certify(kernel: &MarkovKernel, theta: f64, diameter: usize, config: &CertifyConfig) -> Result<HarnackCertificate> {
    let balls = sample_balls(kernel, config.balls, diameter);
    let poincare = poincare_profile(kernel, theta, &balls)?;
    let envelope = heat_kernel_envelope(kernel, theta, diameter, &config.envelope)?;
    Ok(HarnackCertificate {
        theta,
        diameter,
        p0: ellipticity(kernel),
        doubling: doubling_from_kernel(kernel, diameter),
        poincare: poincare.constant,
        poincare_skipped: poincare.skipped,
        gap_product: gap_product(kernel, diameter, theta)?,
        envelope_violations: envelope.violations(),
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{birth_death_metropolis, complete_graph, cycle, rectangular_torus, sierpinski, vicsek};
    use crate::kernel::build_kernel;

    #[test]
    fn ellipticity_examples() {
        let t = rectangular_torus(&[5, 5]).unwrap().kernel;
        assert_eq!(ellipticity(&t), 0.25);
        assert_eq!(ellipticity(&t.lazify(0.5).unwrap()), 0.125);
        let b = birth_death_metropolis(2.0, 10).unwrap().kernel;
        // q_1 = π(0)/(2π(1)) = 1/8 is the smallest of the 20 edge probabilities.
        assert!((ellipticity(&b) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn doubling_on_cycle() {
        let n = 64;
        let k = cycle(n).unwrap().kernel;
        let profiles = k.all_profiles();
        let radii: Vec<usize> = (1..n / 4).collect();
        let c = doubling_constant(&profiles, &radii);
        assert!(c <= 2.0 && c > 1.5);
    }

    #[test]
    fn doubling_on_fractals() {
        let s = sierpinski(5).unwrap();
        let c = doubling_from_kernel(&s.kernel, s.spec.diameter.hops);
        assert!((2.5..=9.0).contains(&c), "{c}");
        let v = vicsek(3).unwrap();
        let c = doubling_from_kernel(&v.kernel, v.spec.diameter.hops);
        assert!(c <= 6.0, "{c}");
    }

    #[test]
    fn two_point_ball() {
        let k = build_kernel(2, &[(0, 1, 1.0)]).unwrap();
        // Π^{-1/2}(2L)Π^{-1/2} = [[2, −2], [−2, 2]] has eigenvalues 0 and 4.
        let l = ball_lambda1(&k, &[0, 1]).unwrap();
        assert!((l - 4.0).abs() < 1e-12);
        let rep = poincare_profile(&k, 2.0, &[(0, 1)]).unwrap();
        assert!((rep.constant - 0.25).abs() < 1e-12);
    }

    #[test]
    fn poincare_variational_check() {
        // Any mean-zero test function obeys the inequality at C_P r^θ = 1/λ₁.
        let k = sierpinski(3).unwrap().kernel;
        let ball = k.metric_profile(0).unwrap().ball(2);
        let l = ball_lambda1(&k, &ball).unwrap();
        let f: Vec<f64> = ball.iter().map(|&v| ((v * 37 % 11) as f64).sin()).collect();
        let mass: f64 = ball.iter().map(|&v| k.pi(v)).sum();
        let mean: f64 = ball.iter().zip(&f).map(|(&v, x)| k.pi(v) * x).sum::<f64>() / mass;
        let lhs: f64 = ball.iter().zip(&f).map(|(&v, x)| k.pi(v) * (x - mean).powi(2)).sum();
        let mut rhs = 0.0;
        for (i, &a) in ball.iter().enumerate() {
            for (j, &b) in ball.iter().enumerate() {
                rhs += (f[i] - f[j]).powi(2) * k.pi(a) * k.prob(a, b);
            }
        }
        assert!(lhs <= rhs / l * (1.0 + 1e-10));
    }

    #[test]
    fn poincare_uniform_on_cycles() {
        let mut values = Vec::new();
        for n in [32, 64, 128] {
            let k = cycle(n).unwrap().kernel;
            let rep = poincare_profile(&k, 2.0, &[(0, n / 8), (3, n / 4)]).unwrap();
            values.push(rep.constant);
        }
        let max = values.iter().cloned().fold(0.0, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.5, "{values:?}");
    }

    #[test]
    fn poincare_wrong_theta_on_vicsek_grows() {
        let v = vicsek(3).unwrap();
        let small = poincare_profile(&v.kernel, 2.0, &[(v.origin(), 2)]).unwrap().constant;
        let large = poincare_profile(&v.kernel, 2.0, &[(v.origin(), 18)]).unwrap().constant;
        assert!(large > 1.5 * small, "{small} {large}");
    }

    #[test]
    fn lazy_cycle_gap_product() {
        let n = 64;
        let k = cycle(n).unwrap().kernel.lazify(0.5).unwrap();
        let spec = spectral_decomposition(&k).unwrap();
        let product = spectral_gap_check(&spec, n / 2, 2.0);
        let expected = (1.0 - (2.0 * std::f64::consts::PI / n as f64).cos()) / 2.0 * (n as f64 / 2.0).powi(2);
        assert!((product - expected).abs() < 1e-9);
        assert!((product - std::f64::consts::PI.powi(2) / 4.0).abs() < 0.01);
        let k4 = complete_graph(4).unwrap().kernel;
        assert!(gap_product(&k4, 1, 2.0).unwrap() <= 2.0);
    }

    #[test]
    fn envelope_on_torus() {
        let t = rectangular_torus(&[16, 16]).unwrap();
        let rep = heat_kernel_envelope(&t.kernel, 2.0, t.spec.diameter.hops, &EnvelopeConfig::default()).unwrap();
        assert_eq!(rep.violations(), 0);
        for fit in rep.fits.iter().filter(|f| f.c2 <= 0.2) {
            assert!(fit.upper_c1 >= 1.0 && fit.upper_c1 < 100.0, "{fit:?}");
            assert!(fit.lower_c1 > 0.0);
        }
    }

    #[test]
    fn decay_on_cycle() {
        let k = cycle(32).unwrap().kernel;
        let fit = decay_fit(&k, 0, 2.0, 16, 10.0).unwrap();
        assert!(fit.c > 0.0);
        for &(t, d) in &fit.points {
            assert!(d <= fit.prefactor * (-fit.c * t as f64 / 256.0).exp() * (1.0 + 1e-9));
        }
    }
}
