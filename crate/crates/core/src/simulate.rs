//! Seeded Monte Carlo estimates of hitting times and exit times.
//!
//! Trials are split into fixed-size chunks. Chunk `c` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `c`, so results do not depend
//! on the number of worker threads, and chunk moments are merged in chunk
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{MarkovKernel, Vertex};

pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64/stream=chunk";
pub const CHUNK_TRIALS: u64 = 1_024;
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;
pub const MIN_TRIALS: u64 = 100;
/// Largest tolerated fraction of truncated trajectories.
pub const UNRELIABLE_CAP_FRACTION: f64 = 0.001;
const Z95: f64 = 1.959_963_984_540_054;

/// Per-vertex cumulative transition distributions, holding first.
#[derive(Debug, Clone)]
pub struct RowSampler {
    row_ptr: Vec<usize>,
    next: Vec<Vertex>,
    cumulative: Vec<f64>,
}

impl RowSampler {
    pub fn new(kernel: &MarkovKernel) -> RowSampler {
        let n = kernel.vertex_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut next = Vec::new();
        let mut cumulative = Vec::new();
        row_ptr.push(0);
        for x in 0..n {
            let start = next.len();
            let mut acc = 0.0;
            if kernel.holding(x) > 0.0 {
                acc += kernel.holding(x);
                next.push(x);
                cumulative.push(acc);
            }
            for (y, q) in kernel.neighbors(x) {
                acc += q;
                next.push(y);
                cumulative.push(acc);
            }
            // Guard against round-off leaving the last bucket short of 1.
            if let Some(last) = cumulative[start..].last_mut() {
                *last = f64::INFINITY;
            }
            row_ptr.push(next.len());
        }
        RowSampler {
            row_ptr,
            next,
            cumulative,
        }
    }

    #[inline]
    pub fn step<R: Rng>(&self, x: Vertex, rng: &mut R) -> Vertex {
        let lo = self.row_ptr[x];
        let hi = self.row_ptr[x + 1];
        let u: f64 = rng.random();
        let row = &self.cumulative[lo..hi];
        let k = row.partition_point(|&c| c <= u);
        self.next[lo + k.min(row.len() - 1)]
    }
}

/// Streaming mean and variance with the pairwise merge rule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub trials: u64,
    pub mean: f64,
    pub variance: f64,
    /// 95% normal-approximation half-width `1.96·sqrt(var/trials)`.
    pub ci_half_width: f64,
    pub cap_hits: u64,
    pub reliable: bool,
    pub seed: u64,
    pub rng: String,
}

impl SampleStats {
    fn from_moments(m: Moments, cap_hits: u64, seed: u64) -> SampleStats {
        let variance = m.variance();
        let trials = m.count;
        SampleStats {
            trials,
            mean: m.mean,
            variance,
            ci_half_width: Z95 * (variance / trials.max(1) as f64).sqrt(),
            cap_hits,
            reliable: (cap_hits as f64) <= UNRELIABLE_CAP_FRACTION * trials as f64,
            seed,
            rng: RNG_ALGORITHM.to_string(),
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunks(trials: u64) -> Vec<(u64, u64)> {
    let count = trials.div_ceil(CHUNK_TRIALS);
    (0..count)
        .map(|c| (c, CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS)))
        .collect()
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!("trials {trials} below {MIN_TRIALS}")));
    }
    Ok(())
}

fn check_vertex(kernel: &MarkovKernel, v: Vertex) -> Result<()> {
    if v >= kernel.vertex_count() {
        return Err(Error::VertexOutOfRange {
            vertex: v,
            vertex_count: kernel.vertex_count(),
        });
    }
    Ok(())
}

/// Estimates `H(x, y) = E_x[τ_y]`. Trajectories longer than `cap` steps are
/// truncated at `cap` and counted in `cap_hits`.
pub fn sample_hitting(kernel: &MarkovKernel, x: Vertex, y: Vertex, trials: u64, seed: u64, cap: u64) -> Result<SampleStats> {
    check_trials(trials)?;
    check_vertex(kernel, x)?;
    check_vertex(kernel, y)?;
    let sampler = RowSampler::new(kernel);
    let parts: Vec<(Moments, u64)> = chunks(trials)
        .into_par_iter()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut m = Moments::default();
            let mut capped = 0;
            for _ in 0..size {
                let mut v = x;
                let mut t = 0u64;
                while v != y && t < cap {
                    v = sampler.step(v, &mut rng);
                    t += 1;
                }
                if v != y {
                    capped += 1;
                }
                m.push(t as f64);
            }
            (m, capped)
        })
        .collect();
    let (m, capped) = parts
        .into_iter()
        .fold((Moments::default(), 0), |(a, ca), (b, cb)| (a.merge(b), ca + cb));
    Ok(SampleStats::from_moments(m, capped, seed))
}

/// Estimates `H(x, y)` for every target `y` at once: each trajectory runs
/// until it has visited every vertex (or reaches `cap`) and the first visit
/// time of each vertex is recorded.
pub fn sample_hitting_all_targets(kernel: &MarkovKernel, x: Vertex, trials: u64, seed: u64, cap: u64) -> Result<Vec<SampleStats>> {
    check_trials(trials)?;
    check_vertex(kernel, x)?;
    let n = kernel.vertex_count();
    let sampler = RowSampler::new(kernel);
    let parts: Vec<(Vec<Moments>, Vec<u64>)> = chunks(trials)
        .into_par_iter()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut m = vec![Moments::default(); n];
            let mut capped = vec![0u64; n];
            let mut first = vec![u64::MAX; n];
            for _ in 0..size {
                first.iter_mut().for_each(|f| *f = u64::MAX);
                let mut v = x;
                first[x] = 0;
                let mut unseen = n - 1;
                let mut t = 0u64;
                while unseen > 0 && t < cap {
                    v = sampler.step(v, &mut rng);
                    t += 1;
                    if first[v] == u64::MAX {
                        first[v] = t;
                        unseen -= 1;
                    }
                }
                for y in 0..n {
                    if first[y] == u64::MAX {
                        capped[y] += 1;
                        m[y].push(cap as f64);
                    } else {
                        m[y].push(first[y] as f64);
                    }
                }
            }
            (m, capped)
        })
        .collect();
    let mut total = vec![Moments::default(); n];
    let mut capped = vec![0u64; n];
    for (m, c) in parts {
        for y in 0..n {
            total[y] = total[y].merge(m[y]);
            capped[y] += c[y];
        }
    }
    Ok((0..n)
        .map(|y| SampleStats::from_moments(total[y], capped[y], seed))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub trials: u64,
    pub exceedances: u64,
    pub probability: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub seed: u64,
    pub rng: String,
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    if k == 0 {
        return (0.0, Z95 * Z95 / (n as f64 + Z95 * Z95));
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Estimates `P_x(d(x, X_s) > R)`.
pub fn exit_tail(kernel: &MarkovKernel, x: Vertex, radius: usize, steps: u64, trials: u64, seed: u64) -> Result<TailEstimate> {
    check_trials(trials)?;
    check_vertex(kernel, x)?;
    let dist = kernel.bfs_distances(x);
    let ecc = dist.iter().copied().max().unwrap_or(0);
    if radius > ecc {
        return Err(Error::InvalidParameter(format!("radius {radius} exceeds eccentricity {ecc}")));
    }
    let sampler = RowSampler::new(kernel);
    let counts: Vec<u64> = chunks(trials)
        .into_par_iter()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut hits = 0;
            for _ in 0..size {
                let mut v = x;
                for _ in 0..steps {
                    let w = sampler.step(v, &mut rng);
                    debug_assert!(dist[w].abs_diff(dist[v]) <= 1, "walk jumped more than one hop");
                    v = w;
                }
                if dist[v] > radius {
                    hits += 1;
                }
            }
            hits
        })
        .collect();
    let exceedances: u64 = counts.iter().sum();
    let (wilson_low, wilson_high) = wilson_interval(exceedances, trials);
    Ok(TailEstimate {
        trials,
        exceedances,
        probability: exceedances as f64 / trials as f64,
        wilson_low,
        wilson_high,
        seed,
        rng: RNG_ALGORITHM.to_string(),
    })
}

/// Exit time `T_B = min{t : X_t ∉ B(x, R)}` from `x`.
pub fn exit_time_stats(kernel: &MarkovKernel, x: Vertex, radius: usize, trials: u64, seed: u64, cap: u64) -> Result<SampleStats> {
    check_trials(trials)?;
    check_vertex(kernel, x)?;
    let dist = kernel.bfs_distances(x);
    if dist.iter().all(|&d| d <= radius) {
        return Err(Error::InvalidParameter(format!(
            "ball of radius {radius} around {x} is the whole vertex set"
        )));
    }
    let sampler = RowSampler::new(kernel);
    let parts: Vec<(Moments, u64)> = chunks(trials)
        .into_par_iter()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut m = Moments::default();
            let mut capped = 0;
            for _ in 0..size {
                let mut v = x;
                let mut t = 0u64;
                while dist[v] <= radius && t < cap {
                    v = sampler.step(v, &mut rng);
                    t += 1;
                }
                if dist[v] <= radius {
                    capped += 1;
                }
                m.push(t as f64);
            }
            (m, capped)
        })
        .collect();
    let (m, capped) = parts
        .into_iter()
        .fold((Moments::default(), 0), |(a, ca), (b, cb)| (a.merge(b), ca + cb));
    Ok(SampleStats::from_moments(m, capped, seed))
}
