//! Deterministic generators for the example graph families.
//!
//! Every generator returns a [`Family`]: the kernel plus a [`FamilySpec`]
//! recording the walk dimension, the canonical pair `(o, p)`, exact counts
//! and the diameter. Vertex numbering is a pure function of the parameters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{argmax, build_kernel, Diameter, MarkovKernel, Vertex};

/// Largest vertex count any generator will emit.
pub const SIZE_CAP: usize = 250_000;
/// Largest base for the lamplighter construction.
pub const LAMPLIGHTER_BASE_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Torus { sides: Vec<usize> },
    Sierpinski { k: u32 },
    Vicsek { k: u32 },
    Trace2d { alpha: f64, n: usize },
    Trace3d { alpha: f64, beta: f64, n: usize },
    BirthDeath { alpha: f64, n: usize },
    Heisenberg { n: usize },
    Complete { m: usize },
    Lamplighter { base: Box<FamilyParams> },
}

impl FamilyParams {
    pub fn tag(&self) -> &'static str {
        match self {
            FamilyParams::Torus { .. } => "torus",
            FamilyParams::Sierpinski { .. } => "sierpinski",
            FamilyParams::Vicsek { .. } => "vicsek",
            FamilyParams::Trace2d { .. } => "trace2d",
            FamilyParams::Trace3d { .. } => "trace3d",
            FamilyParams::BirthDeath { .. } => "birth_death",
            FamilyParams::Heisenberg { .. } => "heisenberg",
            FamilyParams::Complete { .. } => "complete",
            FamilyParams::Lamplighter { .. } => "lamplighter",
        }
    }

    /// Walk dimension of the family.
    pub fn theta(&self) -> f64 {
        match self {
            FamilyParams::Sierpinski { .. } => SIERPINSKI_THETA,
            FamilyParams::Vicsek { .. } => VICSEK_THETA,
            _ => 2.0,
        }
    }

    /// Linear size used as the abscissa of scaling fits.
    pub fn scale(&self) -> f64 {
        match self {
            FamilyParams::Torus { sides } => sides.iter().copied().max().unwrap_or(1) as f64,
            FamilyParams::Sierpinski { k } => 2f64.powi(*k as i32),
            FamilyParams::Vicsek { k } => 3f64.powi(*k as i32),
            FamilyParams::Trace2d { n, .. }
            | FamilyParams::Trace3d { n, .. }
            | FamilyParams::BirthDeath { n, .. }
            | FamilyParams::Heisenberg { n } => *n as f64,
            FamilyParams::Complete { m } => *m as f64,
            FamilyParams::Lamplighter { base } => base.scale(),
        }
    }

    /// Compact `key=value` rendering, used in CSV rows.
    pub fn describe(&self) -> String {
        match self {
            FamilyParams::Torus { sides } => {
                let s: Vec<String> = sides.iter().map(|a| a.to_string()).collect();
                format!("sides={}", s.join("x"))
            }
            FamilyParams::Sierpinski { k } | FamilyParams::Vicsek { k } => format!("k={k}"),
            FamilyParams::Trace2d { alpha, n } => format!("alpha={alpha};n={n}"),
            FamilyParams::Trace3d { alpha, beta, n } => format!("alpha={alpha};beta={beta};n={n}"),
            FamilyParams::BirthDeath { alpha, n } => format!("alpha={alpha};n={n}"),
            FamilyParams::Heisenberg { n } => format!("n={n}"),
            FamilyParams::Complete { m } => format!("m={m}"),
            FamilyParams::Lamplighter { base } => format!("base={}[{}]", base.tag(), base.describe()),
        }
    }

    /// Parses `key=val,...` as accepted by the CLI. Torus sides are given as
    /// `sides=4x4x8`; a lamplighter base as `base=torus`, `base=complete`
    /// together with that family's keys.
    pub fn parse(family: &str, params: &str) -> Result<FamilyParams> {
        let mut map = BTreeMap::new();
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{item}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| -> Result<&String> {
            map.get(key)
                .ok_or_else(|| Error::InvalidParameter(format!("{family} requires `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("{key}: {e}")))
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?
                .parse::<usize>()
                .map_err(|e| Error::InvalidParameter(format!("{key}: {e}")))
        };
        Ok(match family {
            "torus" => FamilyParams::Torus {
                sides: get("sides")?
                    .split('x')
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::InvalidParameter(format!("sides: {e}")))?,
            },
            "sierpinski" => FamilyParams::Sierpinski { k: int("k")? as u32 },
            "vicsek" => FamilyParams::Vicsek { k: int("k")? as u32 },
            "trace2d" => FamilyParams::Trace2d {
                alpha: num("alpha")?,
                n: int("n")?,
            },
            "trace3d" => FamilyParams::Trace3d {
                alpha: num("alpha")?,
                beta: num("beta")?,
                n: int("n")?,
            },
            "birth_death" => FamilyParams::BirthDeath {
                alpha: num("alpha")?,
                n: int("n")?,
            },
            "heisenberg" => FamilyParams::Heisenberg { n: int("n")? },
            "complete" => FamilyParams::Complete { m: int("m")? },
            "lamplighter" => {
                let base_tag = get("base")?.clone();
                let rest: Vec<String> = map
                    .iter()
                    .filter(|(k, _)| k.as_str() != "base")
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                FamilyParams::Lamplighter {
                    base: Box::new(FamilyParams::parse(&base_tag, &rest.join(","))?),
                }
            }
            other => return Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        })
    }
}

pub const SIERPINSKI_THETA: f64 = 2.321_928_094_887_362; // ln 5 / ln 2
pub const VICSEK_THETA: f64 = 2.464_973_520_717_927; // 1 + ln 5 / ln 3

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub params: FamilyParams,
    pub theta: f64,
    pub canonical_pair: (Vertex, Vertex),
    pub vertex_count: usize,
    pub edge_count: usize,
    pub diameter: Diameter,
    pub canonical_distance: usize,
    /// Volume growth exponent for Ahlfors-regular families.
    pub ahlfors_alpha: Option<f64>,
    pub lazy: bool,
}

#[derive(Debug, Clone)]
pub struct Family {
    pub kernel: MarkovKernel,
    pub spec: FamilySpec,
}

impl Family {
    fn finish(
        kernel: MarkovKernel,
        params: FamilyParams,
        pair: (Vertex, Vertex),
        ahlfors_alpha: Option<f64>,
    ) -> Result<Family> {
        let diameter = kernel.diameter();
        let canonical_distance = kernel.bfs_distances(pair.0)[pair.1];
        if 3 * canonical_distance < diameter.hops {
            return Err(Error::InvalidKernel(format!(
                "canonical pair {pair:?} at distance {canonical_distance} is closer than D/3 (D = {})",
                diameter.hops
            )));
        }
        let spec = FamilySpec {
            theta: params.theta(),
            params,
            canonical_pair: pair,
            vertex_count: kernel.vertex_count(),
            edge_count: kernel.edge_count(),
            diameter,
            canonical_distance,
            ahlfors_alpha,
            lazy: kernel.is_lazy(),
        };
        Ok(Family { kernel, spec })
    }

    pub fn origin(&self) -> Vertex {
        self.spec.canonical_pair.0
    }

    pub fn far(&self) -> Vertex {
        self.spec.canonical_pair.1
    }
}

pub fn generate(params: &FamilyParams) -> Result<Family> {
    match params {
        FamilyParams::Torus { sides } => rectangular_torus(sides),
        FamilyParams::Sierpinski { k } => sierpinski(*k),
        FamilyParams::Vicsek { k } => vicsek(*k),
        FamilyParams::Trace2d { alpha, n } => trace_2d(*alpha, *n),
        FamilyParams::Trace3d { alpha, beta, n } => trace_3d(*alpha, *beta, *n),
        FamilyParams::BirthDeath { alpha, n } => birth_death_metropolis(*alpha, *n),
        FamilyParams::Heisenberg { n } => heisenberg_cayley(*n),
        FamilyParams::Complete { m } => complete_graph(*m),
        FamilyParams::Lamplighter { base } => lamplighter(&generate(base)?),
    }
}

fn check_size(what: &'static str, size: usize) -> Result<()> {
    if size > SIZE_CAP {
        return Err(Error::SizeCap {
            what,
            size,
            cap: SIZE_CAP,
        });
    }
    Ok(())
}

/// Simple random walk on `Z_{a_1} × … × Z_{a_N}`. A side of length 1 adds
/// nothing; a side of length 2 adds one edge of doubled weight.
pub fn rectangular_torus(sides: &[usize]) -> Result<Family> {
    if sides.is_empty() || sides.contains(&0) {
        return Err(Error::InvalidParameter("torus sides must be positive".into()));
    }
    if sides.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(format!("torus sides {sides:?} must be nondecreasing")));
    }
    let n = sides
        .iter()
        .try_fold(1usize, |acc, &a| acc.checked_mul(a))
        .ok_or(Error::SizeCap {
            what: "torus vertices",
            size: usize::MAX,
            cap: SIZE_CAP,
        })?;
    check_size("torus vertices", n)?;
    if n == 1 {
        return Err(Error::InvalidParameter("torus needs at least two vertices".into()));
    }
    let dims = sides.len();
    let mut stride = vec![1usize; dims];
    for i in (0..dims.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * sides[i + 1];
    }
    let mut edges = Vec::with_capacity(n * dims);
    for v in 0..n {
        for i in 0..dims {
            let a = sides[i];
            let c = (v / stride[i]) % a;
            match a {
                1 => {}
                2 => {
                    if c == 0 {
                        edges.push((v, v + stride[i], 2.0));
                    }
                }
                _ => {
                    let next = if c + 1 == a { v + stride[i] - a * stride[i] } else { v + stride[i] };
                    edges.push((v, next, 1.0));
                }
            }
        }
    }
    let kernel = build_kernel(n, &edges)?;
    let far: usize = (0..dims).map(|i| (sides[i] / 2) * stride[i]).sum();
    let nontrivial = sides.iter().filter(|&&a| a > 1).count();
    let ahlfors = if sides.iter().filter(|&&a| a > 1).all(|&a| a == sides[dims - 1]) {
        Some(nontrivial as f64)
    } else {
        None
    };
    Family::finish(
        kernel,
        FamilyParams::Torus {
            sides: sides.to_vec(),
        },
        (0, far),
        ahlfors,
    )
}

pub fn cycle(n: usize) -> Result<Family> {
    rectangular_torus(&[n])
}

pub fn complete_graph(m: usize) -> Result<Family> {
    if m < 2 {
        return Err(Error::InvalidParameter("complete graph needs m >= 2".into()));
    }
    check_size("complete graph vertices", m)?;
    let mut edges = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            edges.push((i, j, 1.0));
        }
    }
    Family::finish(build_kernel(m, &edges)?, FamilyParams::Complete { m }, (0, 1), None)
}

type Point2 = (i64, i64);

fn segments_to_kernel<P: Ord + Copy>(segments: &BTreeSet<(P, P)>) -> Result<(MarkovKernel, BTreeMap<P, Vertex>)> {
    let mut ids = BTreeMap::new();
    for &(a, b) in segments {
        ids.insert(a, 0);
        ids.insert(b, 0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let edges: Vec<_> = segments.iter().map(|(a, b)| (ids[a], ids[b], 1.0)).collect();
    Ok((build_kernel(ids.len(), &edges)?, ids))
}

fn shifted(seg: &(Point2, Point2), off: Point2) -> (Point2, Point2) {
    let a = (seg.0 .0 + off.0, seg.0 .1 + off.1);
    let b = (seg.1 .0 + off.0, seg.1 .1 + off.1);
    (a.min(b), a.max(b))
}

/// Sierpinski gasket graph `ST_k` in axial coordinates: `ST_1` is the unit
/// triangle and each level glues three copies at their corners.
pub fn sierpinski(k: u32) -> Result<Family> {
    if !(1..=8).contains(&k) {
        return Err(Error::InvalidParameter(format!("sierpinski level {k} outside 1..=8")));
    }
    let mut segments: BTreeSet<(Point2, Point2)> =
        [((0, 0), (1, 0)), ((0, 0), (0, 1)), ((0, 1), (1, 0))].into_iter().collect();
    let mut side = 1i64;
    for _ in 1..k {
        let mut next = BTreeSet::new();
        for off in [(0, 0), (side, 0), (0, side)] {
            next.extend(segments.iter().map(|s| shifted(s, off)));
        }
        segments = next;
        side *= 2;
    }
    let (kernel, ids) = segments_to_kernel(&segments)?;
    let expected = (3usize.pow(k) + 3) / 2;
    if kernel.vertex_count() != expected {
        return Err(Error::InvalidKernel(format!(
            "ST_{k} has {} vertices, expected {expected}",
            kernel.vertex_count()
        )));
    }
    Family::finish(
        kernel,
        FamilyParams::Sierpinski { k },
        (ids[&(0, 0)], ids[&(side, 0)]),
        Some(3f64.ln() / 2f64.ln()),
    )
}

/// Vicsek tree `Vic_k`: `Vic_0` is a star with four diagonal arms and each
/// level places five copies, the outer four glued to the centre copy at its
/// diagonal corners.
pub fn vicsek(k: u32) -> Result<Family> {
    if k > 6 {
        return Err(Error::InvalidParameter(format!("vicsek level {k} outside 0..=6")));
    }
    let mut segments: BTreeSet<(Point2, Point2)> = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        .into_iter()
        .map(|c| shifted(&((0, 0), c), (0, 0)))
        .collect();
    let mut half = 1i64;
    for _ in 0..k {
        let d = 2 * half;
        let mut next = BTreeSet::new();
        for off in [(0, 0), (d, d), (d, -d), (-d, d), (-d, -d)] {
            next.extend(segments.iter().map(|s| shifted(s, off)));
        }
        segments = next;
        half *= 3;
    }
    let (kernel, ids) = segments_to_kernel(&segments)?;
    let expected = (0..k).fold(5usize, |v, _| 5 * v - 4);
    if kernel.vertex_count() != expected || kernel.edge_count() + 1 != expected {
        return Err(Error::InvalidKernel(format!(
            "Vic_{k} has {} vertices and {} edges, expected a tree on {expected}",
            kernel.vertex_count(),
            kernel.edge_count()
        )));
    }
    Family::finish(
        kernel,
        FamilyParams::Vicsek { k },
        (ids[&(half, half)], ids[&(-half, -half)]),
        Some(5f64.ln() / 3f64.ln()),
    )
}

/// Recognizes `alpha = p/q` with small denominator.
fn as_rational(alpha: f64) -> Option<(u32, u32)> {
    (1u32..=64).find_map(|q| {
        let p = (alpha * q as f64).round();
        if p >= 0.0 && (alpha * q as f64 - p).abs() <= 1e-12 * q as f64 {
            Some((p as u32, q))
        } else {
            None
        }
    })
}

/// Decides `s <= x^(2 alpha) * ln(1 + x)^(2 beta)`, i.e. `sqrt(s)` within the
/// trace radius. Exact for rational `alpha` and `beta = 0` while the powers fit
/// in `u128`; otherwise a float comparison in which ties count as inside.
fn within_radius(s: u64, x: u64, alpha: f64, beta: f64) -> bool {
    if x == 0 {
        return s == 0;
    }
    if beta == 0.0 {
        if let Some((p, q)) = as_rational(alpha) {
            let lhs = (s as u128).checked_pow(q);
            let rhs = (x as u128).checked_pow(2 * p);
            if let (Some(l), Some(r)) = (lhs, rhs) {
                return l <= r;
            }
        }
    }
    let r2 = (x as f64).powf(2.0 * alpha) * (1.0 + x as f64).ln().powf(2.0 * beta);
    s as f64 <= r2 * (1.0 + 1e-12)
}

/// Largest `m >= 0` with `m^2 <= R(x)^2`, searched around the float guess.
fn max_offset(x: u64, alpha: f64, beta: f64) -> i64 {
    let guess = if x == 0 {
        0.0
    } else {
        (x as f64).powf(alpha) * (1.0 + x as f64).ln().powf(beta)
    };
    let mut m = if guess.is_finite() { guess.floor().max(0.0) as i64 } else { 0 };
    while m > 0 && !within_radius((m * m) as u64, x, alpha, beta) {
        m -= 1;
    }
    while within_radius(((m + 1) * (m + 1)) as u64, x, alpha, beta) {
        m += 1;
    }
    m
}

fn lattice_kernel<const D: usize>(points: &BTreeMap<[i64; D], Vertex>) -> Result<MarkovKernel> {
    let mut edges = Vec::with_capacity(points.len() * D);
    for (p, &i) in points {
        for axis in 0..D {
            let mut q = *p;
            q[axis] += 1;
            if let Some(&j) = points.get(&q) {
                edges.push((i, j, 1.0));
            }
        }
    }
    build_kernel(points.len(), &edges)
}

fn number<const D: usize>(points: &mut BTreeMap<[i64; D], Vertex>) {
    for (i, v) in points.values_mut().enumerate() {
        *v = i;
    }
}

/// Induced subgraph of `Z^2` on `{0 <= x <= N, |y| <= x^alpha}`.
pub fn trace_2d(alpha: f64, n: usize) -> Result<Family> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("trace_2d alpha {alpha} outside (0, 1]")));
    }
    if n < 5 {
        return Err(Error::InvalidParameter(format!("trace_2d extent {n} below 5")));
    }
    let mut points = BTreeMap::new();
    for x in 0..=n as i64 {
        let m = max_offset(x as u64, alpha, 0.0);
        for y in -m..=m {
            points.insert([x, y], 0);
        }
        check_size("trace_2d vertices", points.len())?;
    }
    number(&mut points);
    let kernel = lattice_kernel(&points)?;
    let pair = (points[&[0, 0]], points[&[n as i64, 0]]);
    Family::finish(kernel, FamilyParams::Trace2d { alpha, n }, pair, None)
}

/// Induced subgraph of `Z^3` on `{0 <= x <= N, y^2 + z^2 <= x^(2 alpha) ln(1+x)^(2 beta)}`
/// together with the whole `x`-axis.
pub fn trace_3d(alpha: f64, beta: f64, n: usize) -> Result<Family> {
    if !(alpha > 0.0 && alpha < 1.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "trace_3d needs alpha in (0, 1) and finite beta, got ({alpha}, {beta})"
        )));
    }
    if n < 5 {
        return Err(Error::InvalidParameter(format!("trace_3d extent {n} below 5")));
    }
    let mut points: BTreeMap<[i64; 3], Vertex> = BTreeMap::new();
    for x in 0..=n as i64 {
        let m = max_offset(x as u64, alpha, beta);
        for y in -m..=m {
            for z in -m..=m {
                let s = (y * y + z * z) as u64;
                if s == 0 || within_radius(s, x as u64, alpha, beta) {
                    points.insert([x, y, z], 0);
                }
            }
        }
        check_size("trace_3d vertices", points.len())?;
    }
    number(&mut points);
    let kernel = lattice_kernel(&points)?;
    let pair = (points[&[0, 0, 0]], points[&[n as i64, 0, 0]]);
    Family::finish(kernel, FamilyParams::Trace3d { alpha, beta, n }, pair, None)
}

/// Metropolis chain on `{0..N}` for weights `w_k = (1+k)^alpha`:
/// `pi(i) p_i = pi(i+1) q_{i+1} = min(pi(i), pi(i+1)) / 2`.
pub fn birth_death_metropolis(alpha: f64, n: usize) -> Result<Family> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("birth-death alpha {alpha} must be >= 0")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("birth-death extent must be >= 1".into()));
    }
    check_size("birth-death vertices", n + 1)?;
    let w: Vec<f64> = (0..=n).map(|k| (1.0 + k as f64).powf(alpha)).collect();
    let mut used = vec![0.0; n + 1];
    let mut edges = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        let c = 0.5 * w[i].min(w[i + 1]);
        edges.push((i, i + 1, c));
        used[i] += c;
        used[i + 1] += c;
    }
    for i in 0..=n {
        let rest = w[i] - used[i];
        if rest > 1e-14 * w[i] {
            edges.push((i, i, rest));
        }
    }
    Family::finish(
        build_kernel(n + 1, &edges)?,
        FamilyParams::BirthDeath { alpha, n },
        (0, n),
        None,
    )
}

/// Cayley graph of the discrete Heisenberg group mod `N`, element
/// `(a, b, c)` at index `a N^2 + b N + c`, generators `(a ± 1, b, c)` and
/// `(a, b ± 1, c ± a)`. Emitted with laziness 1/2.
pub fn heisenberg_cayley(n: usize) -> Result<Family> {
    if n < 2 {
        return Err(Error::InvalidParameter("heisenberg modulus must be >= 2".into()));
    }
    let size = n.checked_pow(3).unwrap_or(usize::MAX);
    check_size("heisenberg vertices", size)?;
    let idx = |a: usize, b: usize, c: usize| (a % n) * n * n + (b % n) * n + (c % n);
    let mut edges = Vec::with_capacity(4 * size);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let v = idx(a, b, c);
                edges.push((v, idx(a + 1, b, c), 1.0));
                edges.push((v, idx(a + n - 1, b, c), 1.0));
                edges.push((v, idx(a, b + 1, c + a), 1.0));
                edges.push((v, idx(a, b + n - 1, c + n - a), 1.0));
            }
        }
    }
    let kernel = build_kernel(size, &edges)?.lazify(0.5)?;
    let far = argmax(&kernel.bfs_distances(0));
    Family::finish(kernel, FamilyParams::Heisenberg { n }, (0, far), None)
}

/// Lamplighter kernel over `base`. State `(f, v)` has index `f·|V| + v`,
/// with bit `u` of `f` the lamp at `u`. A move `v → w ≠ v` re-randomizes the
/// lamps at `v` and `w` (probability `K(v, w)/4` each); a stay re-randomizes
/// the lamp at `v` (probability `K(v, v)/2` each).
pub fn lamplighter_kernel(base: &MarkovKernel) -> Result<MarkovKernel> {
    let n = base.vertex_count();
    if n > LAMPLIGHTER_BASE_CAP {
        return Err(Error::SizeCap {
            what: "lamplighter base vertices",
            size: n,
            cap: LAMPLIGHTER_BASE_CAP,
        });
    }
    let configs = 1usize << n;
    let states = configs * n;
    check_size("lamplighter states", states)?;
    let mut edges = Vec::new();
    for f in 0..configs {
        for v in 0..n {
            let from = f * n + v;
            let scale = base.degree(v);
            for (w, q) in base.neighbors(v) {
                let c = scale * q / 4.0;
                let cleared = f & !(1 << v) & !(1 << w);
                for bits in 0..4usize {
                    let h = cleared | ((bits & 1) << v) | ((bits >> 1) << w);
                    edges.push((from, h * n + w, c));
                }
            }
            let hold = base.holding(v);
            if hold > 0.0 {
                let c = scale * hold / 2.0;
                edges.push((from, from, c));
                edges.push((from, (f ^ (1 << v)) * n + v, c));
            }
        }
    }
    // Every off-diagonal pair is listed from both endpoints with equal weight,
    // which the builder reads as one symmetric conductance.
    build_kernel(states, &edges)
}

pub fn lamplighter(base: &Family) -> Result<Family> {
    let kernel = lamplighter_kernel(&base.kernel)?;
    let o = base.origin();
    let far = argmax(&kernel.bfs_distances(o));
    Family::finish(
        kernel,
        FamilyParams::Lamplighter {
            base: Box::new(base.spec.params.clone()),
        },
        (o, far),
        None,
    )
}
