//! Finite reversible Markov kernels and their metric structure.
//!
//! A [`MarkovKernel`] is stored as a symmetric conductance network: every
//! off-diagonal entry carries a weight `c(x, y) = c(y, x)`, every vertex may
//! carry a self-loop weight, and the transition probabilities are
//! `K(x, y) = c(x, y) / deg(x)` with `deg(x) = Σ_y c(x, y)` (self-loop
//! included). The stationary measure is `π(x) = deg(x) / Σ deg`, so
//! reversibility holds by construction and is re-checked numerically.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = usize;

/// Row-sum tolerance for stochasticity.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Relative tolerance for detailed balance.
pub const REVERSIBILITY_TOLERANCE: f64 = 1e-10;
/// Largest vertex count for which [`MarkovKernel::diameter`] runs all-source BFS.
pub const DIAMETER_EXACT_THRESHOLD: usize = 20_000;

const UNREACHED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    row_ptr: Vec<usize>,
    cols: Vec<Vertex>,
    weights: Vec<f64>,
    probs: Vec<f64>,
    self_weight: Vec<f64>,
    hold: Vec<f64>,
    degree: Vec<f64>,
    stationary: Vec<f64>,
}

/// Builds a kernel from symmetric conductances.
///
/// Each entry `(x, y, w)` adds conductance `w` between `x` and `y`; `x == y`
/// adds holding weight. A pair may be listed in one direction or in both, in
/// which case the two weights must agree. Repeated entries in the same
/// direction are summed as parallel conductances.
pub fn build_kernel(vertex_count: usize, edges: &[(Vertex, Vertex, f64)]) -> Result<MarkovKernel> {
    if vertex_count == 0 {
        return Err(Error::InvalidParameter("vertex_count must be positive".into()));
    }
    let mut self_weight = vec![0.0; vertex_count];
    let mut directed: Vec<(Vertex, Vertex, f64)> = Vec::with_capacity(edges.len());
    for &(x, y, w) in edges {
        for v in [x, y] {
            if v >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    vertex: v,
                    vertex_count,
                });
            }
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidWeight { x, y, weight: w });
        }
        if x == y {
            self_weight[x] += w;
        } else {
            directed.push((x, y, w));
        }
    }
    directed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut merged: Vec<(Vertex, Vertex, f64)> = Vec::with_capacity(directed.len());
    for (x, y, w) in directed {
        match merged.last_mut() {
            Some(last) if last.0 == x && last.1 == y => last.2 += w,
            _ => merged.push((x, y, w)),
        }
    }
    let lookup = |x: Vertex, y: Vertex| -> Option<f64> {
        merged
            .binary_search_by(|e| (e.0, e.1).cmp(&(x, y)))
            .ok()
            .map(|i| merged[i].2)
    };
    let mut symmetric: Vec<(Vertex, Vertex, f64)> = Vec::with_capacity(2 * merged.len());
    for &(x, y, w) in &merged {
        match lookup(y, x) {
            Some(back) => {
                if (w - back).abs() > 1e-12 * w.abs().max(back.abs()) {
                    let (a, b, f, r) = if x < y { (x, y, w, back) } else { (y, x, back, w) };
                    return Err(Error::AsymmetricWeight {
                        x: a,
                        y: b,
                        forward: f,
                        backward: r,
                    });
                }
                if x < y {
                    symmetric.push((x, y, w));
                    symmetric.push((y, x, w));
                }
            }
            None => {
                symmetric.push((x, y, w));
                symmetric.push((y, x, w));
            }
        }
    }
    symmetric.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut row_ptr = vec![0usize; vertex_count + 1];
    for &(x, _, _) in &symmetric {
        row_ptr[x + 1] += 1;
    }
    for i in 0..vertex_count {
        row_ptr[i + 1] += row_ptr[i];
    }
    let cols = symmetric.iter().map(|e| e.1).collect();
    let weights = symmetric.iter().map(|e| e.2).collect();
    MarkovKernel::from_conductances(row_ptr, cols, weights, self_weight)
}

impl MarkovKernel {
    /// Normalizes a symmetric CSR conductance network into a kernel and
    /// validates every invariant.
    fn from_conductances(
        row_ptr: Vec<usize>,
        cols: Vec<Vertex>,
        weights: Vec<f64>,
        self_weight: Vec<f64>,
    ) -> Result<Self> {
        let n = self_weight.len();
        let mut degree = vec![0.0; n];
        for x in 0..n {
            let mut d = 0.0;
            for k in row_ptr[x]..row_ptr[x + 1] {
                d += weights[k];
            }
            degree[x] = d + self_weight[x];
            if degree[x] <= 0.0 {
                if n == 1 {
                    return Err(Error::ZeroDegree(x));
                }
                return Err(Error::Disconnected {
                    components: count_components(n, &row_ptr, &cols),
                });
            }
        }
        let total: f64 = degree.iter().sum();
        let mut probs = vec![0.0; weights.len()];
        for x in 0..n {
            for k in row_ptr[x]..row_ptr[x + 1] {
                probs[k] = weights[k] / degree[x];
            }
        }
        let hold = (0..n).map(|x| self_weight[x] / degree[x]).collect();
        let stationary = degree.iter().map(|d| d / total).collect();
        let kernel = MarkovKernel {
            row_ptr,
            cols,
            weights,
            probs,
            self_weight,
            hold,
            degree,
            stationary,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Checks stochasticity, detailed balance, positivity of π and connectivity.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertex_count();
        let mut mass = 0.0;
        for x in 0..n {
            let p = self.stationary[x];
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidKernel(format!("π({x}) = {p} is not positive")));
            }
            mass += p;
            let row: f64 = self.hold[x] + self.neighbors(x).map(|(_, q)| q).sum::<f64>();
            if (row - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidKernel(format!("row {x} sums to {row}")));
            }
            for (y, q) in self.neighbors(x) {
                if q < 0.0 {
                    return Err(Error::InvalidKernel(format!("K({x},{y}) = {q} < 0")));
                }
                let back = self.prob(y, x);
                let lhs = p * q;
                let rhs = self.stationary[y] * back;
                if (lhs - rhs).abs() > REVERSIBILITY_TOLERANCE * lhs.abs().max(rhs.abs()) {
                    return Err(Error::InvalidKernel(format!(
                        "detailed balance fails on ({x},{y}): {lhs} vs {rhs}"
                    )));
                }
            }
        }
        if (mass - 1.0).abs() > ROW_SUM_TOLERANCE * (n as f64).max(1.0) {
            return Err(Error::InvalidKernel(format!("π sums to {mass}")));
        }
        let components = count_components(n, &self.row_ptr, &self.cols);
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.stationary.len()
    }

    /// Number of undirected off-diagonal edges.
    pub fn edge_count(&self) -> usize {
        self.cols.len() / 2
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn pi(&self, x: Vertex) -> f64 {
        self.stationary[x]
    }

    /// Holding probability `K(x, x)`.
    pub fn holding(&self, x: Vertex) -> f64 {
        self.hold[x]
    }

    pub fn degree(&self, x: Vertex) -> f64 {
        self.degree[x]
    }

    /// Off-diagonal transitions `(y, K(x, y))` out of `x`, in increasing `y`.
    pub fn neighbors(&self, x: Vertex) -> impl Iterator<Item = (Vertex, f64)> + '_ {
        let range = self.row_ptr[x]..self.row_ptr[x + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.probs[range].iter().copied())
    }

    /// Off-diagonal conductances `(y, w(x, y))` in the kernel's own weight scale.
    pub fn weighted_neighbors(&self, x: Vertex) -> impl Iterator<Item = (Vertex, f64)> + '_ {
        let range = self.row_ptr[x]..self.row_ptr[x + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn out_degree(&self, x: Vertex) -> usize {
        self.row_ptr[x + 1] - self.row_ptr[x]
    }

    /// `K(x, y)`, including the diagonal.
    pub fn prob(&self, x: Vertex, y: Vertex) -> f64 {
        if x == y {
            return self.hold[x];
        }
        let row = &self.cols[self.row_ptr[x]..self.row_ptr[x + 1]];
        match row.binary_search(&y) {
            Ok(k) => self.probs[self.row_ptr[x] + k],
            Err(_) => 0.0,
        }
    }

    /// Electrical conductance `c(x, y) = π(x) K(x, y)`.
    pub fn conductance(&self, x: Vertex, y: Vertex) -> f64 {
        self.stationary[x] * self.prob(x, y)
    }

    /// `Σ_{u,v} c(u, v)` over all ordered pairs, holding included.
    pub fn total_conductance(&self) -> f64 {
        (0..self.vertex_count())
            .map(|x| {
                let row: f64 = self.hold[x] + self.neighbors(x).map(|(_, q)| q).sum::<f64>();
                self.stationary[x] * row
            })
            .sum()
    }

    pub fn is_lazy(&self) -> bool {
        self.hold.iter().all(|&h| h >= 0.5)
    }

    /// `K_ε = εI + (1 − ε)K`. The stationary measure is carried over unchanged.
    pub fn lazify(&self, epsilon: f64) -> Result<MarkovKernel> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidLaziness(epsilon));
        }
        let keep = 1.0 - epsilon;
        let n = self.vertex_count();
        let kernel = MarkovKernel {
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            weights: self.weights.iter().map(|w| keep * w).collect(),
            probs: self.probs.iter().map(|p| keep * p).collect(),
            self_weight: (0..n)
                .map(|x| epsilon * self.degree[x] + keep * self.self_weight[x])
                .collect(),
            hold: self.hold.iter().map(|h| epsilon + keep * h).collect(),
            degree: self.degree.clone(),
            stationary: self.stationary.clone(),
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Returns the kernel itself if every holding probability is at least 1/2,
    /// otherwise its ε = 1/2 lazy version.
    pub fn ensure_lazy(&self) -> Result<MarkovKernel> {
        if self.is_lazy() {
            Ok(self.clone())
        } else {
            self.lazify(0.5)
        }
    }

    fn check_vertex(&self, v: Vertex) -> Result<()> {
        if v >= self.vertex_count() {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                vertex_count: self.vertex_count(),
            });
        }
        Ok(())
    }

    /// Hop distances from `source` on the support graph.
    pub fn bfs_distances(&self, source: Vertex) -> Vec<usize> {
        let n = self.vertex_count();
        let mut dist = vec![UNREACHED; n];
        let mut queue = VecDeque::with_capacity(n);
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u] + 1;
            for &v in &self.cols[self.row_ptr[u]..self.row_ptr[u + 1]] {
                if dist[v] == UNREACHED {
                    dist[v] = next;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, source: Vertex) -> usize {
        self.bfs_distances(source).into_iter().max().unwrap_or(0)
    }

    pub fn metric_profile(&self, source: Vertex) -> Result<MetricProfile> {
        self.check_vertex(source)?;
        let distances = self.bfs_distances(source);
        let eccentricity = distances.iter().copied().max().unwrap_or(0);
        let mut shell_mass = vec![0.0; eccentricity + 1];
        let mut shell_count = vec![0usize; eccentricity + 1];
        for (y, &d) in distances.iter().enumerate() {
            shell_mass[d] += self.stationary[y];
            shell_count[d] += 1;
        }
        let mut volumes = Vec::with_capacity(eccentricity + 1);
        let mut ball_counts = Vec::with_capacity(eccentricity + 1);
        let (mut mass, mut count) = (0.0, 0usize);
        for r in 0..=eccentricity {
            mass += shell_mass[r];
            count += shell_count[r];
            volumes.push(mass);
            ball_counts.push(count);
        }
        Ok(MetricProfile {
            source,
            distances,
            volumes,
            ball_counts,
            eccentricity,
        })
    }

    /// Profiles from every vertex, computed in parallel.
    pub fn all_profiles(&self) -> Vec<MetricProfile> {
        (0..self.vertex_count())
            .into_par_iter()
            .map(|x| self.metric_profile(x).expect("vertex in range"))
            .collect()
    }

    pub fn diameter(&self) -> Diameter {
        self.diameter_with_threshold(DIAMETER_EXACT_THRESHOLD)
    }

    /// Exact all-source maximum eccentricity up to `threshold` vertices,
    /// double-sweep lower bound above it.
    pub fn diameter_with_threshold(&self, threshold: usize) -> Diameter {
        let n = self.vertex_count();
        if n <= threshold {
            let hops = (0..n)
                .into_par_iter()
                .map(|x| self.eccentricity(x))
                .max()
                .unwrap_or(0);
            return Diameter { hops, exact: true };
        }
        let first = self.bfs_distances(0);
        let far = argmax(&first);
        let hops = self.eccentricity(far);
        log::warn!("diameter of {n}-vertex chain estimated by double sweep ({hops} hops, lower bound)");
        Diameter { hops, exact: false }
    }

    /// Decides periodicity combinatorially: positive holding or an odd cycle
    /// certifies aperiodicity, otherwise the support graph is 2-colored.
    pub fn periodicity(&self) -> PeriodicityInfo {
        if let Some(v) = self.hold.iter().position(|&h| h > 0.0) {
            return PeriodicityInfo {
                is_bipartite: false,
                class_of: None,
                witness: Some(AperiodicityWitness::PositiveHolding(v)),
            };
        }
        let n = self.vertex_count();
        let mut depth = vec![UNREACHED; n];
        let mut parent = vec![UNREACHED; n];
        let mut queue = VecDeque::new();
        depth[0] = 0;
        queue.push_back(0);
        while let Some(u) = queue.pop_front() {
            for &v in &self.cols[self.row_ptr[u]..self.row_ptr[u + 1]] {
                if depth[v] == UNREACHED {
                    depth[v] = depth[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if depth[v] % 2 == depth[u] % 2 {
                    let cycle = odd_cycle(u, v, &parent);
                    return PeriodicityInfo {
                        is_bipartite: false,
                        class_of: None,
                        witness: Some(AperiodicityWitness::OddCycle(cycle)),
                    };
                }
            }
        }
        PeriodicityInfo {
            is_bipartite: true,
            class_of: Some(depth.iter().map(|d| (d % 2) as u8).collect()),
            witness: None,
        }
    }

    /// Writes the `vertices N` header followed by one `x y weight` line per
    /// stored conductance with `x <= y`, in increasing `(x, y)` order.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "vertices {}", self.vertex_count())?;
        for x in 0..self.vertex_count() {
            let mut wrote_self = false;
            for (y, w) in self.weighted_neighbors(x) {
                if y < x {
                    continue;
                }
                if !wrote_self && self.self_weight[x] > 0.0 {
                    writeln!(out, "{x} {x} {}", self.self_weight[x])?;
                    wrote_self = true;
                }
                writeln!(out, "{x} {y} {w}")?;
            }
            if !wrote_self && self.self_weight[x] > 0.0 {
                writeln!(out, "{x} {x} {}", self.self_weight[x])?;
            }
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<MarkovKernel> {
        let mut vertex_count = None;
        let mut edges = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if vertex_count.is_none() {
                if fields.len() != 2 || fields[0] != "vertices" {
                    return Err(parse_err(format!("expected `vertices N`, found `{line}`")));
                }
                let n = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(e.to_string()))?;
                vertex_count = Some(n);
                continue;
            }
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `x y weight`, found `{line}`")));
            }
            let x = fields[0].parse::<usize>().map_err(|e| parse_err(e.to_string()))?;
            let y = fields[1].parse::<usize>().map_err(|e| parse_err(e.to_string()))?;
            let w = fields[2].parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
            edges.push((x, y, w));
        }
        let n = vertex_count.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing `vertices N` header".into(),
        })?;
        build_kernel(n, &edges)
    }
}

fn count_components(n: usize, row_ptr: &[usize], cols: &[Vertex]) -> usize {
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &cols[row_ptr[u]..row_ptr[u + 1]] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    components
}

fn odd_cycle(u: Vertex, v: Vertex, parent: &[Vertex]) -> Vec<Vertex> {
    // u and v sit at the same BFS depth, so climbing in lockstep meets at their LCA.
    let (mut a, mut b) = (u, v);
    let mut left = vec![a];
    let mut right = vec![b];
    while a != b {
        a = parent[a];
        b = parent[b];
        left.push(a);
        right.push(b);
    }
    right.pop();
    right.reverse();
    left.extend(right);
    left
}

pub(crate) fn argmax(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diameter {
    pub hops: usize,
    pub exact: bool,
}

/// BFS distances and cumulative π-volumes of balls around one vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub source: Vertex,
    pub distances: Vec<usize>,
    /// `volumes[r] = V(source, r)`.
    pub volumes: Vec<f64>,
    /// `ball_counts[r] = #B(source, r)`.
    pub ball_counts: Vec<usize>,
    pub eccentricity: usize,
}

impl MetricProfile {
    /// `V(source, r)`, saturating at the eccentricity.
    pub fn volume(&self, r: usize) -> f64 {
        self.volumes[r.min(self.eccentricity)]
    }

    pub fn ball_count(&self, r: usize) -> usize {
        self.ball_counts[r.min(self.eccentricity)]
    }

    /// Vertices of the closed ball `B(source, r)`.
    pub fn ball(&self, r: usize) -> Vec<Vertex> {
        self.distances
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= r)
            .map(|(y, _)| y)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AperiodicityWitness {
    PositiveHolding(Vertex),
    /// Closed walk of odd length; consecutive entries are adjacent and the
    /// last vertex is adjacent to the first.
    OddCycle(Vec<Vertex>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicityInfo {
    pub is_bipartite: bool,
    /// 2-coloring when bipartite.
    pub class_of: Option<Vec<u8>>,
    pub witness: Option<AperiodicityWitness>,
}

impl PeriodicityInfo {
    /// True when `x` and `y` lie in different periodic classes. Always false
    /// for aperiodic chains.
    pub fn opposite_classes(&self, x: Vertex, y: Vertex) -> bool {
        match &self.class_of {
            Some(c) => c[x] != c[y],
            None => false,
        }
    }

    /// The class-comparison sign `I_±(x, y)`; `+1` for aperiodic chains.
    pub fn class_sign(&self, x: Vertex, y: Vertex) -> f64 {
        if self.opposite_classes(x, y) {
            -1.0
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> MarkovKernel {
        build_kernel(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn cycle(n: usize) -> MarkovKernel {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        build_kernel(n, &edges).unwrap()
    }

    fn torus(a: usize, b: usize) -> MarkovKernel {
        let mut edges = Vec::new();
        for i in 0..a {
            for j in 0..b {
                edges.push((i * b + j, ((i + 1) % a) * b + j, 1.0));
                edges.push((i * b + j, i * b + (j + 1) % b, 1.0));
            }
        }
        build_kernel(a * b, &edges).unwrap()
    }

    #[test]
    fn triangle_is_uniform() {
        let k = triangle();
        for x in 0..3 {
            assert!((k.pi(x) - 1.0 / 3.0).abs() < 1e-15);
            for y in 0..3 {
                let expected = if x == y { 0.0 } else { 0.5 };
                assert_eq!(k.prob(x, y), expected);
            }
        }
    }

    #[test]
    fn single_edge_is_bipartite() {
        let k = build_kernel(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(k.prob(0, 1), 1.0);
        assert_eq!(k.prob(1, 0), 1.0);
        assert_eq!(k.stationary(), &[0.5, 0.5]);
        assert!(k.periodicity().is_bipartite);
    }

    #[test]
    fn star_masses_follow_degree_weights() {
        let k = build_kernel(3, &[(0, 1, 1.0), (0, 2, 2.0)]).unwrap();
        assert!((k.pi(0) - 0.5).abs() < 1e-15);
        assert!((k.pi(1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((k.pi(2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_disconnected_support() {
        let err = build_kernel(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }));
        let err = build_kernel(3, &[(0, 1, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Disconnected { components: 2 }));
    }

    #[test]
    fn rejects_asymmetric_pair() {
        let err = build_kernel(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap_err();
        match err {
            Error::AsymmetricWeight { x, y, forward, backward } => {
                assert_eq!((x, y), (0, 1));
                assert_eq!((forward, backward), (1.0, 2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mirrored_listing_is_one_edge() {
        let k = build_kernel(2, &[(0, 1, 3.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(k.edge_count(), 1);
        assert_eq!(k.prob(0, 1), 1.0);
    }

    #[test]
    fn rejects_bad_weights_and_vertices() {
        assert!(matches!(
            build_kernel(2, &[(0, 1, -1.0)]),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            build_kernel(2, &[(0, 5, 1.0)]),
            Err(Error::VertexOutOfRange { vertex: 5, .. })
        ));
    }

    #[test]
    fn lazify_two_cycle() {
        let k = build_kernel(2, &[(0, 1, 1.0)]).unwrap().lazify(0.5).unwrap();
        assert_eq!(k.holding(0), 0.5);
        assert_eq!(k.holding(1), 0.5);
        assert_eq!(k.prob(0, 1), 0.5);
        assert!(!k.periodicity().is_bipartite);
    }

    #[test]
    fn lazify_triangle_quarter() {
        let k = triangle().lazify(0.25).unwrap();
        assert!((k.prob(0, 1) - 3.0 / 8.0).abs() < 1e-15);
        assert_eq!(k.holding(2), 0.25);
    }

    #[test]
    fn lazify_rejects_out_of_range() {
        for eps in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(triangle().lazify(eps), Err(Error::InvalidLaziness(_))));
        }
    }

    #[test]
    fn lazify_keeps_pi_exactly() {
        let k = build_kernel(3, &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 0.3)]).unwrap();
        let lazy = k.lazify(0.3).unwrap();
        assert_eq!(k.stationary(), lazy.stationary());
        for x in 0..3 {
            assert!(lazy.holding(x) >= 0.3);
        }
    }

    #[test]
    fn torus_four_by_four_profile() {
        let k = torus(4, 4);
        let p = k.metric_profile(5).unwrap();
        assert_eq!(p.eccentricity, 4);
        assert!((p.volume(1) - 5.0 / 16.0).abs() < 1e-15);
        assert!((p.volume(4) - 1.0).abs() < 1e-12);
        assert_eq!(k.diameter(), Diameter { hops: 4, exact: true });
    }

    #[test]
    fn complete_graph_profile() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j, 1.0));
            }
        }
        let k = build_kernel(4, &edges).unwrap();
        let p = k.metric_profile(0).unwrap();
        assert_eq!(p.volume(0), 0.25);
        assert!((p.volume(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_distances() {
        let edges: Vec<_> = (0..4).map(|i| (i, i + 1, 1.0)).collect();
        let k = build_kernel(5, &edges).unwrap();
        assert_eq!(k.metric_profile(0).unwrap().distances, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn cycle_diameter_and_double_sweep() {
        let k = cycle(6);
        assert_eq!(k.diameter().hops, 3);
        let approx = k.diameter_with_threshold(1);
        assert!(!approx.exact);
        assert!(approx.hops <= 3);
    }

    #[test]
    fn periodicity_of_cycles() {
        let even = cycle(6).periodicity();
        assert!(even.is_bipartite);
        let classes = even.class_of.as_ref().unwrap();
        for i in 0..6 {
            assert_ne!(classes[i], classes[(i + 1) % 6]);
        }
        let odd = cycle(7).periodicity();
        assert!(!odd.is_bipartite);
        match odd.witness {
            Some(AperiodicityWitness::OddCycle(c)) => {
                assert_eq!(c.len() % 2, 1);
                let k = cycle(7);
                for i in 0..c.len() {
                    assert!(k.prob(c[i], c[(i + 1) % c.len()]) > 0.0);
                }
            }
            other => panic!("expected odd cycle, got {other:?}"),
        }
        let lazy = cycle(6).lazify(0.5).unwrap().periodicity();
        assert_eq!(lazy.witness, Some(AperiodicityWitness::PositiveHolding(0)));
    }

    #[test]
    fn bipartite_class_masses_are_half() {
        let k = build_kernel(4, &[(0, 1, 1.0), (1, 2, 3.0), (2, 3, 0.5)]).unwrap();
        let info = k.periodicity();
        let classes = info.class_of.unwrap();
        let mass: f64 = (0..4).filter(|&x| classes[x] == 0).map(|x| k.pi(x)).sum();
        assert!((mass - 0.5).abs() < 1e-10);
    }

    #[test]
    fn edge_list_round_trip_is_bit_stable() {
        let k = build_kernel(4, &[(0, 1, 0.1), (1, 2, 1.0 / 3.0), (2, 3, 7.0), (3, 0, 2.5), (2, 2, 0.7)])
            .unwrap()
            .lazify(0.3)
            .unwrap();
        let mut first = Vec::new();
        k.write_edge_list(&mut first).unwrap();
        let back = MarkovKernel::read_edge_list(first.as_slice()).unwrap();
        let mut second = Vec::new();
        back.write_edge_list(&mut second).unwrap();
        assert_eq!(first, second);
        for x in 0..4 {
            for y in 0..4 {
                assert!((k.prob(x, y) - back.prob(x, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let err = MarkovKernel::read_edge_list("vertices 2\n0 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = MarkovKernel::read_edge_list("0 1 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (2usize..30).prop_flat_map(|n| {
            let tree = proptest::collection::vec((0usize..1000, 0.1f64..10.0), n - 1);
            let extra = proptest::collection::vec((0..n, 0..n, 0.1f64..10.0), 0..2 * n);
            (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
                let mut edges: Vec<_> = tree
                    .into_iter()
                    .enumerate()
                    .map(|(i, (p, w))| (p % (i + 1), i + 1, w))
                    .collect();
                edges.extend(extra.into_iter().map(|(a, b, w)| (a.min(b), a.max(b), w)));
                (n, edges)
            })
        })
    }

    proptest! {
        #[test]
        fn random_conductance_graphs_are_valid((n, edges) in random_graph()) {
            let k = build_kernel(n, &edges).unwrap();
            prop_assert!(k.validate().is_ok());
            let p = k.metric_profile(0).unwrap();
            prop_assert!((p.volume(p.eccentricity) - 1.0).abs() < 1e-12);
            for w in p.volumes.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for x in 0..n {
                for (y, _) in k.neighbors(x) {
                    prop_assert!(p.distances[x].abs_diff(p.distances[y]) <= 1);
                }
            }
            let lazy = k.lazify(0.25).unwrap();
            prop_assert_eq!(lazy.stationary(), k.stationary());
        }
    }
}
