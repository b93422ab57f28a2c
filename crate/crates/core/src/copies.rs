//! Copies of a pattern inside `K_n`: the edge universe, edge configurations,
//! the copy index with its dependency neighborhoods, chain sums and copy counting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{falling_factorial, CompensatedSum};
use crate::pattern::{automorphisms, PatternGraph};

/// Default cap on `|J|` for materialized copy indices.
pub const DEFAULT_COPY_LIMIT: u128 = 10_000_000;
/// Default cap on `|J| * D̄²` for the triple sum.
pub const DEFAULT_TRIPLE_BUDGET: u128 = 100_000_000;
/// Default cap on `|J| * D̄⁵` for the six-chain sum.
pub const DEFAULT_CHAIN6_BUDGET: u128 = 1_000_000_000;

/// All `C(n, 2)` vertex pairs of `K_n`, indexed colexicographically:
/// `(u, v)` with `u < v` maps to `v (v - 1) / 2 + u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeUniverse {
    n: usize,
}

impl EdgeUniverse {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a != b && a < self.n && b < self.n);
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        v * (v - 1) / 2 + u
    }

    pub fn endpoints(&self, idx: usize) -> (usize, usize) {
        debug_assert!(idx < self.edge_count());
        // largest v with v (v - 1) / 2 <= idx
        let mut v = ((1.0 + (1.0 + 8.0 * idx as f64).sqrt()) / 2.0) as usize;
        while v * (v - 1) / 2 > idx {
            v -= 1;
        }
        while (v + 1) * v / 2 <= idx {
            v += 1;
        }
        (idx - v * (v - 1) / 2, v)
    }
}

/// One realization of the edge indicators, stored as a bitmask over edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeConfiguration {
    universe: EdgeUniverse,
    bits: Vec<u64>,
}

impl EdgeConfiguration {
    pub fn empty(universe: EdgeUniverse) -> Self {
        let words = universe.edge_count().div_ceil(64);
        Self {
            universe,
            bits: vec![0; words],
        }
    }

    pub fn full(universe: EdgeUniverse) -> Self {
        let mut c = Self::empty(universe);
        for e in 0..universe.edge_count() {
            c.set(e, true);
        }
        c
    }

    /// Configuration whose first 64 edges follow `mask` (bit e = edge e).
    pub fn from_mask(universe: EdgeUniverse, mask: u64) -> Self {
        let mut c = Self::empty(universe);
        let e = universe.edge_count();
        if let Some(w) = c.bits.first_mut() {
            *w = if e >= 64 { mask } else { mask & ((1u64 << e) - 1) };
        }
        c
    }

    pub fn from_edges<I: IntoIterator<Item = usize>>(universe: EdgeUniverse, edges: I) -> Self {
        let mut c = Self::empty(universe);
        for e in edges {
            c.set(e, true);
        }
        c
    }

    pub fn universe(&self) -> EdgeUniverse {
        self.universe
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.bits
    }

    #[inline]
    pub fn contains(&self, e: usize) -> bool {
        self.bits[e / 64] >> (e % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, e: usize, present: bool) {
        let (w, b) = (e / 64, e % 64);
        if present {
            self.bits[w] |= 1 << b;
        } else {
            self.bits[w] &= !(1 << b);
        }
    }

    pub fn present_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn present_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    #[inline]
    pub fn contains_all(&self, edges: &[u32]) -> bool {
        edges.iter().all(|&e| self.contains(e as usize))
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_configuration(self)
    }
}

/// Per-vertex neighbor bitsets of a configuration.
#[derive(Debug, Clone)]
pub struct Adjacency {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl Adjacency {
    pub fn from_configuration(config: &EdgeConfiguration) -> Self {
        let n = config.universe().n();
        let words = n.div_ceil(64).max(1);
        let mut rows = vec![0u64; n * words];
        let u = config.universe();
        for e in config.present_edges() {
            let (a, b) = u.endpoints(e);
            rows[a * words + b / 64] |= 1 << (b % 64);
            rows[b * words + a / 64] |= 1 << (a % 64);
        }
        Self { n, words, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.words..(v + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.rows[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// The set `J` of copies of a pattern in `K_n` plus dependency structure.
///
/// Neighborhoods are open (`j ∉ N_j`); the closed accessors add `j`.
#[derive(Debug, Clone)]
pub struct CopyIndex {
    universe: EdgeUniverse,
    pattern: PatternGraph,
    edges_per_copy: usize,
    copy_edges: Vec<u32>,
    edge_offsets: Vec<usize>,
    edge_copies: Vec<u32>,
    nbr_offsets: Vec<usize>,
    nbrs: Vec<u32>,
    max_degree: usize,
}

/// Number of copies of `pattern` (isolated vertices stripped) in `K_n`.
pub fn copy_count(n: usize, pattern: &PatternGraph) -> u128 {
    let pattern = pattern.stripped();
    let aut = automorphisms(&pattern).len() as u128;
    falling_factorial(n as u64, pattern.vertex_count() as u64) / aut
}

pub fn enumerate_copies(n: usize, pattern: &PatternGraph) -> Result<CopyIndex> {
    enumerate_copies_with_limit(n, pattern, DEFAULT_COPY_LIMIT)
}

/// Builds `J` by walking injective vertex maps and keeping the one map per
/// copy that is lexicographically smallest among its automorphic images.
pub fn enumerate_copies_with_limit(
    n: usize,
    pattern: &PatternGraph,
    limit: u128,
) -> Result<CopyIndex> {
    let pattern = pattern.stripped();
    let v = pattern.vertex_count();
    if n < v {
        return Err(Error::InvalidArgument(format!(
            "n = {n} is smaller than the pattern's {v} vertices"
        )));
    }
    let needed = copy_count(n, &pattern);
    if needed > limit {
        return Err(Error::BudgetExceeded {
            what: "copy enumeration",
            needed,
            limit,
        });
    }
    let universe = EdgeUniverse::new(n);
    let auts: Vec<Vec<usize>> = automorphisms(&pattern)
        .into_iter()
        .filter(|a| a.iter().enumerate().any(|(i, &x)| i != x))
        .collect();
    let e = pattern.edge_count();

    let mut copies: Vec<Vec<u32>> = Vec::with_capacity(needed as usize);
    let mut map = Vec::with_capacity(v);
    let mut used = vec![false; n];
    fn rec(
        n: usize,
        v: usize,
        map: &mut Vec<usize>,
        used: &mut [bool],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if map.len() == v {
            visit(map);
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                map.push(x);
                rec(n, v, map, used, visit);
                map.pop();
                used[x] = false;
            }
        }
    }
    let mut visit = |m: &[usize]| {
        let minimal = auts.iter().all(|a| {
            // compare m∘a against m
            for i in 0..v {
                let lhs = m[a[i]];
                if lhs != m[i] {
                    return lhs > m[i];
                }
            }
            true
        });
        if minimal {
            let mut es: Vec<u32> = pattern
                .edges()
                .iter()
                .map(|&(a, b)| universe.index(m[a], m[b]) as u32)
                .collect();
            es.sort_unstable();
            copies.push(es);
        }
    };
    rec(n, v, &mut map, &mut used, &mut visit);
    copies.sort_unstable();
    debug_assert_eq!(copies.len() as u128, needed);

    let copy_edges: Vec<u32> = copies.into_iter().flatten().collect();
    Ok(CopyIndex::from_flat(universe, pattern, e, copy_edges))
}

impl CopyIndex {
    fn from_flat(
        universe: EdgeUniverse,
        pattern: PatternGraph,
        edges_per_copy: usize,
        copy_edges: Vec<u32>,
    ) -> Self {
        let ne = universe.edge_count();
        let nj = copy_edges.len() / edges_per_copy;

        let mut edge_offsets = vec![0usize; ne + 1];
        for &e in &copy_edges {
            edge_offsets[e as usize + 1] += 1;
        }
        for i in 0..ne {
            edge_offsets[i + 1] += edge_offsets[i];
        }
        let mut fill = edge_offsets.clone();
        let mut edge_copies = vec![0u32; copy_edges.len()];
        for j in 0..nj {
            for &e in &copy_edges[j * edges_per_copy..(j + 1) * edges_per_copy] {
                edge_copies[fill[e as usize]] = j as u32;
                fill[e as usize] += 1;
            }
        }

        let per_copy: Vec<Vec<u32>> = (0..nj)
            .into_par_iter()
            .map(|j| {
                let mut nb: Vec<u32> = copy_edges[j * edges_per_copy..(j + 1) * edges_per_copy]
                    .iter()
                    .flat_map(|&e| {
                        edge_copies[edge_offsets[e as usize]..edge_offsets[e as usize + 1]]
                            .iter()
                            .copied()
                    })
                    .filter(|&k| k as usize != j)
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        let mut nbr_offsets = Vec::with_capacity(nj + 1);
        nbr_offsets.push(0);
        let mut nbrs = Vec::new();
        let mut max_degree = 0;
        for nb in per_copy {
            max_degree = max_degree.max(nb.len());
            nbrs.extend(nb);
            nbr_offsets.push(nbrs.len());
        }
        Self {
            universe,
            pattern,
            edges_per_copy,
            copy_edges,
            edge_offsets,
            edge_copies,
            nbr_offsets,
            nbrs,
            max_degree,
        }
    }

    pub fn universe(&self) -> EdgeUniverse {
        self.universe
    }

    pub fn n(&self) -> usize {
        self.universe.n()
    }

    /// The stripped pattern the copies are isomorphic to.
    pub fn pattern(&self) -> &PatternGraph {
        &self.pattern
    }

    pub fn len(&self) -> usize {
        self.copy_edges.len() / self.edges_per_copy
    }

    pub fn is_empty(&self) -> bool {
        self.copy_edges.is_empty()
    }

    pub fn edges_per_copy(&self) -> usize {
        self.edges_per_copy
    }

    /// Sorted edge ids of copy `j`.
    #[inline]
    pub fn copy(&self, j: usize) -> &[u32] {
        &self.copy_edges[j * self.edges_per_copy..(j + 1) * self.edges_per_copy]
    }

    /// Copies containing edge `e`.
    #[inline]
    pub fn copies_with_edge(&self, e: usize) -> &[u32] {
        &self.edge_copies[self.edge_offsets[e]..self.edge_offsets[e + 1]]
    }

    /// Open neighborhood `N_j`: copies other than `j` sharing an edge with it.
    #[inline]
    pub fn neighbors(&self, j: usize) -> &[u32] {
        &self.nbrs[self.nbr_offsets[j]..self.nbr_offsets[j + 1]]
    }

    /// `N_j ∪ {j}`, sorted.
    pub fn closed_neighbors(&self, j: usize) -> Vec<u32> {
        let open = self.neighbors(j);
        let pos = open.partition_point(|&k| (k as usize) < j);
        let mut out = Vec::with_capacity(open.len() + 1);
        out.extend_from_slice(&open[..pos]);
        out.push(j as u32);
        out.extend_from_slice(&open[pos..]);
        out
    }

    /// `D = max_j |N_j|` over open neighborhoods.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `max_j |N_j ∪ {j}| = D + 1`.
    pub fn closed_max_degree(&self) -> usize {
        self.max_degree + 1
    }

    /// Number of shared edges `|j ∩ k|`.
    pub fn overlap(&self, j: usize, k: usize) -> usize {
        let (a, b) = (self.copy(j), self.copy(k));
        let (mut i, mut m, mut c) = (0, 0, 0);
        while i < a.len() && m < b.len() {
            match a[i].cmp(&b[m]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => m += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    m += 1;
                }
            }
        }
        c
    }

    /// Number of copies fully present in `config`.
    pub fn count_present(&self, config: &EdgeConfiguration) -> u64 {
        (0..self.len())
            .filter(|&j| config.contains_all(self.copy(j)))
            .count() as u64
    }

    /// `Σ_j Σ_{k,l ∈ N̄_j} p^{|j ∪ k ∪ l|}` with closed neighborhoods.
    pub fn triple_sum(&self, p: f64) -> Result<f64> {
        self.triple_sum_with_budget(p, DEFAULT_TRIPLE_BUDGET)
    }

    pub fn triple_sum_with_budget(&self, p: f64, budget: u128) -> Result<f64> {
        let dbar = self.closed_max_degree() as u128;
        let needed = self.len() as u128 * dbar * dbar;
        if needed > budget {
            return Err(Error::BudgetExceeded {
                what: "triple sum",
                needed,
                limit: budget,
            });
        }
        let pow = power_table(p, 3 * self.edges_per_copy);
        let partials: Vec<CompensatedSum> = (0..self.len())
            .into_par_iter()
            .map_init(
                || EdgeTally::new(self.universe.edge_count()),
                |tally, j| {
                    let mut s = CompensatedSum::new();
                    let nb = self.closed_neighbors(j);
                    tally.push(self.copy(j));
                    for &k in &nb {
                        tally.push(self.copy(k as usize));
                        for &l in &nb {
                            tally.push(self.copy(l as usize));
                            s.add(pow[tally.distinct]);
                            tally.pop(self.copy(l as usize));
                        }
                        tally.pop(self.copy(k as usize));
                    }
                    tally.pop(self.copy(j));
                    s
                },
            )
            .collect();
        Ok(merge(&partials))
    }

    /// `Σ_{J_c} p^{|j₁ ∪ … ∪ j₆|}` where each `j_{m+1}` lies in the union of the
    /// closed neighborhoods of `j₁, …, j_m`.
    pub fn chain6_sum(&self, p: f64) -> Result<f64> {
        self.chain6_sum_with_budget(p, DEFAULT_CHAIN6_BUDGET)
    }

    pub fn chain6_sum_with_budget(&self, p: f64, budget: u128) -> Result<f64> {
        // the m-th follower ranges over at most min(m·D̄, |J|) candidates
        let dbar = self.closed_max_degree() as u128;
        let nj = self.len() as u128;
        let needed = (1..=5u128).fold(nj, |acc, m| acc.saturating_mul((m * dbar).min(nj)));
        if needed > budget {
            return Err(Error::BudgetExceeded {
                what: "six-chain sum",
                needed,
                limit: budget,
            });
        }
        let pow = power_table(p, 6 * self.edges_per_copy);
        let closed: Vec<Vec<u32>> = (0..self.len()).map(|j| self.closed_neighbors(j)).collect();
        let partials: Vec<CompensatedSum> = (0..self.len())
            .into_par_iter()
            .map_init(
                || EdgeTally::new(self.universe.edge_count()),
                |tally, j1| {
                    let mut s = CompensatedSum::new();
                    tally.push(self.copy(j1));
                    self.chain_rec(&closed, &closed[j1], 1, tally, &pow, &mut s);
                    tally.pop(self.copy(j1));
                    s
                },
            )
            .collect();
        Ok(merge(&partials))
    }

    fn chain_rec(
        &self,
        closed: &[Vec<u32>],
        candidates: &[u32],
        depth: usize,
        tally: &mut EdgeTally,
        pow: &[f64],
        acc: &mut CompensatedSum,
    ) {
        if depth == 6 {
            acc.add(pow[tally.distinct]);
            return;
        }
        for &k in candidates {
            let k = k as usize;
            tally.push(self.copy(k));
            if depth == 5 {
                acc.add(pow[tally.distinct]);
            } else {
                let next = sorted_union(candidates, &closed[k]);
                self.chain_rec(closed, &next, depth + 1, tally, pow, acc);
            }
            tally.pop(self.copy(k));
        }
    }

    /// Number of chain tuples (the six-chain sum at `p = 1`), for tests.
    pub fn chain6_count(&self) -> Result<f64> {
        self.chain6_sum(1.0)
    }
}

fn merge(partials: &[CompensatedSum]) -> f64 {
    let mut total = CompensatedSum::new();
    for s in partials {
        total.merge(s);
    }
    total.value()
}

fn power_table(p: f64, max: usize) -> Vec<f64> {
    (0..=max).map(|k| p.powi(k as i32)).collect()
}

pub(crate) fn sorted_union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Multiset of edges with a running count of distinct members.
struct EdgeTally {
    counts: Vec<u8>,
    distinct: usize,
}

impl EdgeTally {
    fn new(edges: usize) -> Self {
        Self {
            counts: vec![0; edges],
            distinct: 0,
        }
    }

    #[inline]
    fn push(&mut self, edges: &[u32]) {
        for &e in edges {
            let c = &mut self.counts[e as usize];
            if *c == 0 {
                self.distinct += 1;
            }
            *c += 1;
        }
    }

    #[inline]
    fn pop(&mut self, edges: &[u32]) {
        for &e in edges {
            let c = &mut self.counts[e as usize];
            *c -= 1;
            if *c == 0 {
                self.distinct -= 1;
            }
        }
    }
}

/// Which J-free counting routine [`CopyCounter`] dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Edge,
    Path2,
    Triangle,
    Generic,
}

/// Counts copies of a pattern directly in a configuration without building `J`.
#[derive(Debug, Clone)]
pub struct CopyCounter {
    pattern: PatternGraph,
    kernel: Kernel,
    aut: u64,
    /// for each position in `order`, earlier positions adjacent in the pattern
    back_edges: Vec<Vec<usize>>,
}

impl CopyCounter {
    pub fn new(pattern: &PatternGraph) -> Self {
        let pattern = pattern.stripped();
        let aut = automorphisms(&pattern).len() as u64;
        let shape = (pattern.vertex_count(), pattern.edge_count());
        let kernel = match shape {
            (2, 1) => Kernel::Edge,
            (3, 2) => Kernel::Path2,
            (3, 3) => Kernel::Triangle,
            _ => Kernel::Generic,
        };
        // greedy order: next vertex maximizes links to already placed ones
        let adj = pattern.adjacency();
        let v = pattern.vertex_count();
        let mut order: Vec<usize> = Vec::with_capacity(v);
        let mut placed = 0u64;
        while order.len() < v {
            let best = (0..v)
                .filter(|&x| placed >> x & 1 == 0)
                .max_by_key(|&x| ((adj[x] & placed).count_ones(), adj[x].count_ones(), v - x))
                .expect("unplaced vertex");
            order.push(best);
            placed |= 1 << best;
        }
        let back_edges = (0..v)
            .map(|i| {
                (0..i)
                    .filter(|&k| adj[order[i]] >> order[k] & 1 == 1)
                    .collect()
            })
            .collect();
        Self {
            pattern,
            kernel,
            aut,
            back_edges,
        }
    }

    pub fn pattern(&self) -> &PatternGraph {
        &self.pattern
    }

    pub fn count(&self, config: &EdgeConfiguration) -> u64 {
        match self.kernel {
            Kernel::Edge => config.present_count() as u64,
            _ => self.count_adjacency(&config.adjacency()),
        }
    }

    pub fn count_adjacency(&self, adj: &Adjacency) -> u64 {
        match self.kernel {
            Kernel::Edge => (0..adj.n()).map(|v| adj.degree(v) as u64).sum::<u64>() / 2,
            Kernel::Path2 => (0..adj.n())
                .map(|v| {
                    let d = adj.degree(v) as u64;
                    d * d.saturating_sub(1) / 2
                })
                .sum(),
            Kernel::Triangle => triangle_count(adj),
            Kernel::Generic => self.generic(adj),
        }
    }

    fn generic(&self, adj: &Adjacency) -> u64 {
        let n = adj.n();
        let v = self.pattern.vertex_count();
        if n < v {
            return 0;
        }
        let mut image = vec![0usize; v];
        let mut used = vec![false; n];
        let mut total = 0u64;
        self.embed(adj, 0, &mut image, &mut used, &mut total);
        total / self.aut
    }

    fn embed(
        &self,
        adj: &Adjacency,
        pos: usize,
        image: &mut [usize],
        used: &mut [bool],
        total: &mut u64,
    ) {
        if pos == image.len() {
            *total += 1;
            return;
        }
        let back = &self.back_edges[pos];
        // candidates: neighbors of the first placed neighbor, else everything
        let try_candidate = |x: usize, image: &mut [usize], used: &mut [bool], total: &mut u64| {
            if used[x] || !back.iter().all(|&k| adj.has_edge(image[k], x)) {
                return;
            }
            used[x] = true;
            image[pos] = x;
            self.embed(adj, pos + 1, image, used, total);
            used[x] = false;
        };
        match back.first() {
            Some(&k) => {
                let anchor = image[k];
                for (wi, &w) in adj.row(anchor).iter().enumerate() {
                    let mut w = w;
                    while w != 0 {
                        let x = wi * 64 + w.trailing_zeros() as usize;
                        w &= w - 1;
                        try_candidate(x, image, used, total);
                    }
                }
            }
            None => {
                for x in 0..adj.n() {
                    try_candidate(x, image, used, total);
                }
            }
        }
    }
}

/// Triangles `u < v < w`: for each edge `(u, v)`, popcount of the common
/// neighborhood restricted to labels above `v`.
pub fn triangle_count(adj: &Adjacency) -> u64 {
    let n = adj.n();
    let mut total = 0u64;
    for v in 0..n {
        let rv = adj.row(v);
        let start_word = (v + 1) / 64;
        let start_mask = !0u64 << ((v + 1) % 64);
        for u in 0..v {
            if !adj.has_edge(u, v) {
                continue;
            }
            let ru = adj.row(u);
            for wi in start_word..rv.len() {
                let mut w = rv[wi] & ru[wi];
                if wi == start_word {
                    w &= start_mask;
                }
                total += w.count_ones() as u64;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tri() -> PatternGraph {
        PatternGraph::preset("triangle").unwrap()
    }

    #[test]
    fn universe_index_round_trips() {
        let u = EdgeUniverse::new(9);
        let mut seen = vec![false; u.edge_count()];
        for (a, b) in (0..9).tuple_combinations() {
            let i = u.index(a, b);
            assert_eq!(u.index(b, a), i);
            assert_eq!(u.endpoints(i), (a, b));
            assert!(!std::mem::replace(&mut seen[i], true));
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn triangle_copies_in_k4() {
        let idx = enumerate_copies(4, &tri()).unwrap();
        assert_eq!(idx.len(), 4);
        // brute force pairwise intersections
        let mut d = 0;
        for j in 0..4 {
            let deg = (0..4).filter(|&k| k != j && idx.overlap(j, k) > 0).count();
            d = d.max(deg);
            assert_eq!(deg, idx.neighbors(j).len());
        }
        assert_eq!(d, 3);
        assert_eq!(idx.max_degree(), 3);
    }

    #[test]
    fn triangle_degree_formula() {
        for n in 4..=20 {
            let idx = enumerate_copies(n, &tri()).unwrap();
            // brute-force D
            let d = (0..idx.len())
                .map(|j| {
                    (0..idx.len())
                        .filter(|&k| k != j && idx.overlap(j, k) > 0)
                        .count()
                })
                .max()
                .unwrap();
            assert_eq!(d, 3 * (n - 3));
            assert_eq!(idx.max_degree(), d);
        }
    }

    #[test]
    fn copies_are_isomorphic_and_distinct() {
        for name in ["path2", "c4", "k4", "edge"] {
            let g = PatternGraph::preset(name).unwrap();
            let code = crate::pattern::canonicalize(&g).unwrap();
            let idx = enumerate_copies(6, &g).unwrap();
            let u = idx.universe();
            let mut seen = std::collections::HashSet::new();
            for j in 0..idx.len() {
                assert_eq!(idx.copy(j).len(), g.edge_count());
                assert!(seen.insert(idx.copy(j).to_vec()));
                let edges = idx.copy(j).iter().map(|&e| u.endpoints(e as usize));
                let h = PatternGraph::with_cap(6, edges, 64).unwrap().stripped();
                assert_eq!(crate::pattern::canonicalize(&h).unwrap(), code);
            }
            // |J| · |Aut| = number of injective maps (all are embeddings in K_n)
            let aut = crate::pattern::automorphism_count(&g) as u128;
            assert_eq!(
                idx.len() as u128 * aut,
                falling_factorial(6, g.vertex_count() as u64)
            );
        }
    }

    #[test]
    fn neighborhoods_are_symmetric_and_exact() {
        for name in ["triangle", "path2", "c4"] {
            let g = PatternGraph::preset(name).unwrap();
            for n in g.vertex_count()..=8 {
                let idx = enumerate_copies(n, &g).unwrap();
                for j in 0..idx.len() {
                    for k in 0..idx.len() {
                        let in_n = idx.neighbors(j).contains(&(k as u32));
                        assert_eq!(in_n, idx.neighbors(k).contains(&(j as u32)));
                        assert_eq!(in_n, j != k && idx.overlap(j, k) > 0);
                    }
                }
            }
        }
    }

    #[test]
    fn degree_bound_constant_holds_up_to_50() {
        // D / C(n, v-2) fitted at n = v + 2 and checked for larger n
        for name in ["triangle", "path2"] {
            let g = PatternGraph::preset(name).unwrap();
            let v = g.vertex_count() as u64;
            let ratio = |n: usize| {
                let idx = enumerate_copies(n, &g).unwrap();
                idx.max_degree() as f64 / crate::numeric::binomial(n as u64, v - 2) as f64
            };
            let fitted = ratio(v as usize + 2);
            for n in (v as usize + 3..=50).step_by(7) {
                assert!(ratio(n) <= fitted * 3.0 + 1e-12, "{name} n={n}");
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate_copies_with_limit(10, &tri(), 100).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { needed: 120, .. }));
        let idx = enumerate_copies(8, &tri()).unwrap();
        assert!(matches!(
            idx.chain6_sum_with_budget(0.5, 10),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn chain_sums_at_p_one() {
        let idx = enumerate_copies(5, &tri()).unwrap();
        let expect: f64 = (0..idx.len())
            .map(|j| (idx.neighbors(j).len() as f64 + 1.0).powi(2))
            .sum();
        assert_eq!(idx.triple_sum(1.0).unwrap(), expect);

        // brute-force count of chain tuples over J⁶
        let idx = enumerate_copies(4, &tri()).unwrap();
        let nbar = |j: usize| idx.closed_neighbors(j);
        let m = idx.len();
        let mut count = 0u64;
        for t in (0..6).map(|_| 0..m).multi_cartesian_product() {
            let ok = (1..6).all(|d| (0..d).any(|i| nbar(t[i]).contains(&(t[d] as u32))));
            if ok {
                count += 1;
            }
        }
        assert_eq!(idx.chain6_count().unwrap(), count as f64);
    }

    #[test]
    fn chain6_matches_brute_force_at_half() {
        let idx = enumerate_copies(4, &PatternGraph::preset("path2").unwrap()).unwrap();
        let m = idx.len();
        let mut s = 0.0;
        for t in (0..6).map(|_| 0..m).multi_cartesian_product() {
            let ok = (1..6).all(|d| {
                (0..d).any(|i| idx.closed_neighbors(t[i]).contains(&(t[d] as u32)))
            });
            if ok {
                let union: std::collections::BTreeSet<u32> =
                    t.iter().flat_map(|&j| idx.copy(j).iter().copied()).collect();
                s += 0.5f64.powi(union.len() as i32);
            }
        }
        let got = idx.chain6_sum(0.5).unwrap();
        assert!((got - s).abs() <= 1e-9 * s, "{got} vs {s}");
    }

    #[test]
    fn counts_on_full_and_empty() {
        let u = EdgeUniverse::new(5);
        let idx = enumerate_copies(5, &tri()).unwrap();
        let counter = CopyCounter::new(&tri());
        assert_eq!(idx.count_present(&EdgeConfiguration::full(u)), 10);
        assert_eq!(counter.count(&EdgeConfiguration::full(u)), 10);
        assert_eq!(idx.count_present(&EdgeConfiguration::empty(u)), 0);
        assert_eq!(counter.count(&EdgeConfiguration::empty(u)), 0);
    }

    fn random_config(n: usize, p: f64, rng: &mut ChaCha8Rng) -> EdgeConfiguration {
        let u = EdgeUniverse::new(n);
        EdgeConfiguration::from_edges(u, (0..u.edge_count()).filter(|_| rng.random::<f64>() < p))
    }

    #[test]
    fn backends_agree_on_triangles_n30() {
        let idx = enumerate_copies(30, &tri()).unwrap();
        let counter = CopyCounter::new(&tri());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..100 {
            let c = random_config(30, 0.1 + 0.008 * i as f64, &mut rng);
            assert_eq!(idx.count_present(&c), counter.count(&c));
        }
    }

    #[test]
    fn backends_agree_on_other_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["edge", "path2", "c4", "k4"] {
            let g = PatternGraph::preset(name).unwrap();
            let idx = enumerate_copies(12, &g).unwrap();
            let counter = CopyCounter::new(&g);
            for _ in 0..20 {
                let c = random_config(12, 0.5, &mut rng);
                assert_eq!(idx.count_present(&c), counter.count(&c), "{name}");
            }
        }
        // disconnected pattern: two disjoint edges
        let g = PatternGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        let idx = enumerate_copies(9, &g).unwrap();
        let counter = CopyCounter::new(&g);
        for _ in 0..20 {
            let c = random_config(9, 0.4, &mut rng);
            assert_eq!(idx.count_present(&c), counter.count(&c));
        }
    }

    #[test]
    fn triangle_kernel_past_word_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_config(140, 0.1, &mut rng);
        let adj = c.adjacency();
        let mut brute = 0u64;
        for (a, b, d) in (0..140).tuple_combinations() {
            if adj.has_edge(a, b) && adj.has_edge(b, d) && adj.has_edge(a, d) {
                brute += 1;
            }
        }
        assert_eq!(triangle_count(&adj), brute);
    }

    proptest! {
        #[test]
        fn triple_sum_is_monotone_in_p(p in 0.05f64..0.95, dp in 0.0f64..0.05) {
            let idx = enumerate_copies(5, &tri()).unwrap();
            let a = idx.triple_sum(p).unwrap();
            let b = idx.triple_sum((p + dp).min(1.0)).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }
}
