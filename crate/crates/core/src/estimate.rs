//! Volume-sum estimates and closed-form asymptotics for hitting times.
//!
//! The central quantity is `Σ_{0 ≤ n ≤ 2D^θ} 1/V(y, n^{1/θ})` with the real
//! radius read as its floor, which is of the same order as `H(x, y)` for
//! `x` at distance of order `D` from `y` on Harnack graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::FamilyParams;
use crate::kernel::{MarkovKernel, MetricProfile, Vertex};

/// Tolerance below which two exponents are treated as equal.
pub const EXPONENT_TIE: f64 = 1e-9;

/// `ln(max(x, e))`, so that logarithmic factors never drop below 1.
pub fn ln_clip(x: f64) -> f64 {
    x.max(std::f64::consts::E).ln()
}

/// `ln ln` clipped the same way.
pub fn lnln_clip(x: f64) -> f64 {
    ln_clip(ln_clip(x))
}

fn radius_of(n: u64, inv_theta: f64) -> u64 {
    (n as f64).powf(inv_theta).floor() as u64
}

/// Smallest `n` with `⌊n^{1/θ}⌋ ≥ r`, consistent with [`radius_of`].
fn first_index(r: u64, theta: f64) -> u64 {
    if r == 0 {
        return 0;
    }
    let inv = 1.0 / theta;
    let mut n = (r as f64).powf(theta).ceil() as u64;
    while n > 0 && radius_of(n - 1, inv) >= r {
        n -= 1;
    }
    while radius_of(n, inv) < r {
        n += 1;
    }
    n
}

/// `Σ_{n=0}^{⌊2D^θ⌋} 1/V(y, ⌊n^{1/θ}⌋)`, evaluated by grouping the indices
/// that share a radius.
pub fn volume_sum(profile: &MetricProfile, theta: f64, diameter: usize) -> Result<f64> {
    if !(theta >= 2.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta {theta} must be at least 2")));
    }
    let top = (2.0 * (diameter as f64).powf(theta)).floor() as u64;
    let ecc = profile.eccentricity as u64;
    let mut sum = 0.0;
    let mut r = 0u64;
    loop {
        let lo = first_index(r, theta);
        if lo > top {
            break;
        }
        if r >= ecc {
            sum += (top - lo + 1) as f64 / profile.volume(ecc as usize);
            break;
        }
        let hi = first_index(r + 1, theta).min(top + 1);
        sum += (hi - lo) as f64 / profile.volume(r as usize);
        r += 1;
    }
    Ok(sum)
}

/// `max{Π a_i, a_N a_{N−1} ln(a_{N−1}/a_{N−2}), a_N²}` with sides sorted and
/// padded by leading ones to at least three.
pub fn rect_torus_closed_form(sides: &[usize]) -> f64 {
    let mut a: Vec<f64> = sides.iter().map(|&s| s as f64).collect();
    a.sort_by(f64::total_cmp);
    while a.len() < 3 {
        a.insert(0, 1.0);
    }
    let k = a.len();
    let product: f64 = a.iter().product();
    let middle = a[k - 1] * a[k - 2] * ln_clip(a[k - 2] / a[k - 3]);
    let square = a[k - 1] * a[k - 1];
    product.max(middle).max(square)
}

/// Order of `H` on an Ahlfors `α`-regular graph of walk dimension `θ`.
pub fn ahlfors_closed_form(alpha: f64, theta: f64, diameter: usize) -> f64 {
    let d = diameter as f64;
    if (alpha - theta).abs() <= EXPONENT_TIE {
        d.powf(theta) * ln_clip(d)
    } else if alpha > theta {
        d.powf(alpha)
    } else {
        d.powf(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `H(o, p)`: start at the origin, hit the far vertex.
    OriginToFar,
    /// `H(p, o)`.
    FarToOrigin,
}

/// Trace-graph orders. In 3D the `p → o` cases follow the volume growth
/// around `o`; the `o → p` order is `max(|V|, N²)` with
/// `|V| ≍ N^{1+2α}(ln N)^{2β}`. The `α = 1/2` cases are orders of the volume sum.
pub fn trace_closed_form(params: &FamilyParams, direction: Direction) -> Result<f64> {
    match *params {
        FamilyParams::Trace2d { alpha, n } => {
            let n = n as f64;
            Ok(if (alpha - 1.0).abs() <= EXPONENT_TIE {
                n * n * ln_clip(n)
            } else {
                n * n
            })
        }
        FamilyParams::Trace3d { alpha, beta, n } => {
            let nf = n as f64;
            let bulk = nf.powf(1.0 + 2.0 * alpha) * ln_clip(nf).powf(2.0 * beta);
            Ok(match direction {
                Direction::OriginToFar => bulk.max(nf * nf),
                Direction::FarToOrigin => {
                    if (alpha - 0.5).abs() <= EXPONENT_TIE {
                        if (beta - 0.5).abs() <= EXPONENT_TIE {
                            nf * nf * ln_clip(nf) * lnln_clip(nf)
                        } else if beta > 0.5 {
                            nf * nf * ln_clip(nf).powf(2.0 * beta)
                        } else {
                            nf * nf * ln_clip(nf)
                        }
                    } else if alpha < 0.5 {
                        nf * nf
                    } else {
                        bulk
                    }
                }
            })
        }
        _ => Err(Error::InvalidParameter(format!(
            "trace closed form requested for {}",
            params.tag()
        ))),
    }
}

/// Metropolis birth-death orders for `w_k = (1+k)^α`. `FarToOrigin` is
/// `H(N, 0)`, `OriginToFar` is `H(0, N)`.
pub fn birth_death_closed_form(alpha: f64, n: usize, direction: Direction) -> f64 {
    let nf = n as f64;
    match direction {
        Direction::OriginToFar => nf * nf,
        Direction::FarToOrigin => {
            if (alpha - 1.0).abs() <= EXPONENT_TIE {
                nf * nf * ln_clip(nf)
            } else if alpha > 1.0 {
                nf.powf(alpha + 1.0)
            } else {
                nf * nf
            }
        }
    }
}

/// Family prediction for `H(o, p)` or `H(p, o)`, when one is known.
pub fn closed_form(params: &FamilyParams, direction: Direction, diameter: usize) -> Option<f64> {
    match params {
        FamilyParams::Torus { sides } => Some(rect_torus_closed_form(sides)),
        FamilyParams::Sierpinski { .. } => Some(ahlfors_closed_form(3f64.ln() / 2f64.ln(), params.theta(), diameter)),
        FamilyParams::Vicsek { .. } => Some(ahlfors_closed_form(5f64.ln() / 3f64.ln(), params.theta(), diameter)),
        FamilyParams::Trace2d { .. } | FamilyParams::Trace3d { .. } => trace_closed_form(params, direction).ok(),
        FamilyParams::BirthDeath { alpha, n } => Some(birth_death_closed_form(*alpha, *n, direction)),
        FamilyParams::Heisenberg { n } => Some((*n as f64).powi(3)),
        FamilyParams::Complete { m } => Some(*m as f64),
        FamilyParams::Lamplighter { .. } => None,
    }
}

pub const THETA_FAST_GRID: [f64; 5] = [0.05, 0.1, 0.25, 0.5, 1.0];
pub const THETA_FAST_MIN_C0: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFastVerdict {
    pub target: Vertex,
    /// Largest grid value for which the growth bound holds.
    pub epsilon: Option<f64>,
    /// `min_{1≤r≤ecc} V(r) / (π(y) r^{θ+ε})` at that `ε`, or at the smallest
    /// grid value when none passes.
    pub c0: f64,
    /// `1/π(y)` when the bound holds.
    pub estimate: Option<f64>,
}

/// Tests `V(y, r)/π(y) ≥ c₀ r^{θ+ε}` for `1 ≤ r ≤ ecc(y)`.
pub fn theta_fast_check(profile: &MetricProfile, theta: f64, grid: &[f64]) -> ThetaFastVerdict {
    let pi_y = profile.volume(0);
    let c0_at = |eps: f64| -> f64 {
        (1..=profile.eccentricity)
            .map(|r| profile.volume(r) / (pi_y * (r as f64).powf(theta + eps)))
            .fold(f64::INFINITY, f64::min)
    };
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let best = sorted
        .iter()
        .rev()
        .map(|&e| (e, c0_at(e)))
        .find(|&(_, c)| c >= THETA_FAST_MIN_C0);
    match best {
        Some((eps, c0)) => ThetaFastVerdict {
            target: profile.source,
            epsilon: Some(eps),
            c0,
            estimate: Some(1.0 / pi_y),
        },
        None => ThetaFastVerdict {
            target: profile.source,
            epsilon: None,
            c0: sorted.first().map(|&e| c0_at(e)).unwrap_or(f64::NAN),
            estimate: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub target: Vertex,
    pub theta: f64,
    pub diameter: usize,
    pub volume_sum: f64,
    pub closed_form: Option<f64>,
    pub exact_h: Option<f64>,
    pub ratio: Option<f64>,
}

impl EstimateReport {
    pub fn new(kernel: &MarkovKernel, target: Vertex, theta: f64, diameter: usize) -> Result<EstimateReport> {
        let profile = kernel.metric_profile(target)?;
        Ok(EstimateReport {
            target,
            theta,
            diameter,
            volume_sum: volume_sum(&profile, theta, diameter)?,
            closed_form: None,
            exact_h: None,
            ratio: None,
        })
    }

    pub fn with_closed_form(mut self, value: Option<f64>) -> Self {
        self.closed_form = value;
        self
    }

    pub fn with_exact(mut self, h: f64) -> Self {
        self.exact_h = Some(h);
        self.ratio = Some(h / self.volume_sum);
        self
    }
}

/// `max` of the two volume sums, the order of the commute time and hence of
/// `R(x ↔ y)` times the total conductance.
pub fn resistance_estimate(x: &EstimateReport, y: &EstimateReport) -> Result<f64> {
    if (x.theta - y.theta).abs() > EXPONENT_TIE || x.diameter != y.diameter {
        return Err(Error::InvalidParameter(format!(
            "volume sums use different (theta, D): ({}, {}) vs ({}, {})",
            x.theta, x.diameter, y.theta, y.diameter
        )));
    }
    Ok(x.volume_sum.max(y.volume_sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{birth_death_metropolis, complete_graph, cycle, heisenberg_cayley, rectangular_torus, sierpinski};
    use proptest::prelude::*;

    fn literal_sum(profile: &MetricProfile, theta: f64, d: usize) -> f64 {
        let top = (2.0 * (d as f64).powf(theta)).floor() as u64;
        (0..=top)
            .map(|n| 1.0 / profile.volume((n as f64).powf(1.0 / theta).floor() as usize))
            .sum()
    }

    #[test]
    fn complete_graph_sum() {
        let k = complete_graph(4).unwrap().kernel;
        let p = k.metric_profile(0).unwrap();
        assert!((volume_sum(&p, 2.0, 1).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_sum() {
        let k = cycle(5).unwrap().kernel;
        let p = k.metric_profile(0).unwrap();
        assert!((volume_sum(&p, 2.0, 2).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_theta() {
        let p = cycle(5).unwrap().kernel.metric_profile(0).unwrap();
        assert!(volume_sum(&p, 1.5, 2).is_err());
    }

    #[test]
    fn grouped_matches_literal_on_fractals() {
        for (k, theta) in [
            (sierpinski(4).unwrap(), crate::families::SIERPINSKI_THETA),
            (rectangular_torus(&[3, 7]).unwrap(), 2.0),
            (birth_death_metropolis(2.0, 9).unwrap(), 2.0),
        ] {
            let d = k.spec.diameter.hops;
            for y in 0..k.kernel.vertex_count() {
                let p = k.kernel.metric_profile(y).unwrap();
                let a = volume_sum(&p, theta, d).unwrap();
                let b = literal_sum(&p, theta, d);
                assert!((a - b).abs() <= 1e-9 * b, "{a} vs {b}");
                assert!(a >= 1.0 / k.kernel.pi(y));
            }
        }
    }

    proptest! {
        #[test]
        fn grouped_matches_literal(theta in 2.0f64..3.5, n in 3usize..15, y in 0usize..15) {
            let k = cycle(n).unwrap().kernel;
            let d = n / 2;
            let p = k.metric_profile(y % n).unwrap();
            let a = volume_sum(&p, theta, d).unwrap();
            let b = literal_sum(&p, theta, d);
            prop_assert!((a - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn torus_closed_forms() {
        assert_eq!(rect_torus_closed_form(&[5, 5, 5]), 125.0);
        assert_eq!(rect_torus_closed_form(&[1, 1, 9]), 81.0);
        assert_eq!(rect_torus_closed_form(&[9]), 81.0);
        let (a, b) = (400.0f64, 20.0f64);
        let v = rect_torus_closed_form(&[1, 20, 400]);
        assert!((v - (a * b * b.ln()).max(a * a)).abs() < 1e-9);
        let v = rect_torus_closed_form(&[64, 64]);
        assert!((v - 64.0 * 64.0 * 64f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn ahlfors_cases() {
        let st = ahlfors_closed_form(3f64.ln() / 2f64.ln(), crate::families::SIERPINSKI_THETA, 16);
        assert!((st - 5f64.powi(4)).abs() < 1e-6);
        let vic = ahlfors_closed_form(5f64.ln() / 3f64.ln(), crate::families::VICSEK_THETA, 27);
        assert!((vic - 15f64.powi(3)).abs() < 1e-6);
        assert!((ahlfors_closed_form(2.0, 2.0, 10) - 100.0 * 10f64.ln()).abs() < 1e-9);
        assert_eq!(ahlfors_closed_form(3.0, 2.0, 10), 1000.0);
    }

    #[test]
    fn trace_cases() {
        let n = 100.0f64;
        let t = trace_closed_form(&FamilyParams::Trace2d { alpha: 1.0, n: 100 }, Direction::FarToOrigin).unwrap();
        assert!((t - n * n * n.ln()).abs() < 1e-6);
        let t = trace_closed_form(&FamilyParams::Trace3d { alpha: 0.25, beta: 3.0, n: 100 }, Direction::FarToOrigin).unwrap();
        assert_eq!(t, n * n);
        let t = trace_closed_form(&FamilyParams::Trace3d { alpha: 0.5, beta: 0.5, n: 100 }, Direction::FarToOrigin).unwrap();
        assert!((t - n * n * n.ln() * n.ln().ln()).abs() < 1e-6);
        assert!(trace_closed_form(&FamilyParams::Complete { m: 3 }, Direction::FarToOrigin).is_err());
    }

    #[test]
    fn birth_death_cases() {
        assert_eq!(birth_death_closed_form(2.0, 10, Direction::FarToOrigin), 1000.0);
        assert_eq!(birth_death_closed_form(2.0, 10, Direction::OriginToFar), 100.0);
        assert_eq!(birth_death_closed_form(0.0, 10, Direction::FarToOrigin), 100.0);
        assert!((birth_death_closed_form(1.0, 10, Direction::FarToOrigin) - 100.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn theta_fast_examples() {
        let t = rectangular_torus(&[6, 6, 6]).unwrap();
        let v = theta_fast_check(&t.kernel.metric_profile(0).unwrap(), 2.0, &THETA_FAST_GRID);
        assert_eq!(v.epsilon, Some(1.0));
        assert!((v.estimate.unwrap() - 216.0).abs() < 1e-9);
        let c = cycle(2000).unwrap();
        let v = theta_fast_check(&c.kernel.metric_profile(0).unwrap(), 2.0, &THETA_FAST_GRID);
        assert_eq!(v.epsilon, None);
        let h = heisenberg_cayley(6).unwrap();
        let v = theta_fast_check(&h.kernel.metric_profile(0).unwrap(), 2.0, &THETA_FAST_GRID);
        assert!(v.epsilon.is_some());
        assert!((v.estimate.unwrap() - 216.0).abs() < 1e-9);
    }

    #[test]
    fn resistance_estimate_takes_max() {
        let f = birth_death_metropolis(2.0, 20).unwrap();
        let d = f.spec.diameter.hops;
        let a = EstimateReport::new(&f.kernel, 0, 2.0, d).unwrap();
        let b = EstimateReport::new(&f.kernel, 20, 2.0, d).unwrap();
        assert!(a.volume_sum > b.volume_sum);
        assert_eq!(resistance_estimate(&a, &b).unwrap(), a.volume_sum);
        let c = EstimateReport::new(&f.kernel, 20, 2.5, d).unwrap();
        assert!(resistance_estimate(&a, &c).is_err());
    }
}
