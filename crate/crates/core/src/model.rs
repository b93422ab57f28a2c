//! Exact first and second moments of the copy count at any `n`.
//!
//! A pair of copies `(j, k)` is classified by how many vertices `u` and edges
//! `s` they share. The number of `k` per class, for fixed `j`, is a table
//! computed once on `2 v` vertices times a binomial in `n`.

use serde::{Deserialize, Serialize};

use crate::copies::copy_count;
use crate::error::{Error, Result};
use crate::numeric::{binomial, one_minus_pow, CompensatedSum};
use crate::pattern::{automorphism_count, PatternGraph};

/// Cap on `2^v · v!`, the work of building an [`OverlapTable`].
pub const OVERLAP_WORK_LIMIT: u128 = 500_000_000;

/// `a[u][s]`: copies meeting a fixed copy `j` in `u` vertices and `s` edges,
/// with the `v - u` remaining vertices drawn from one fixed outside set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapTable {
    vertices: usize,
    edges: usize,
    table: Vec<Vec<u64>>,
}

impl OverlapTable {
    pub fn new(pattern: &PatternGraph) -> Result<Self> {
        let g = pattern.stripped();
        let v = g.vertex_count();
        let e = g.edge_count();
        let work = (1u128 << v) * (1..=v as u128).product::<u128>();
        if work > OVERLAP_WORK_LIMIT {
            return Err(Error::BudgetExceeded {
                what: "overlap table",
                needed: work,
                limit: OVERLAP_WORK_LIMIT,
            });
        }
        let adj = g.adjacency();
        let aut = automorphism_count(&g);
        let mut table = vec![vec![0u64; e + 1]; v + 1];
        // labels 0..v are j's vertices, v..2v the outside pool
        for shared in 0u64..(1 << v) {
            let u = shared.count_ones() as usize;
            let targets: Vec<usize> = (0..v)
                .filter(|&x| shared >> x & 1 == 1)
                .chain(v..2 * v - u)
                .collect();
            let mut counts = vec![0u64; e + 1];
            permute(&targets, &mut Vec::new(), &mut vec![false; v], &mut |img| {
                let s = g
                    .edges()
                    .iter()
                    .filter(|&&(a, b)| {
                        let (x, y) = (img[a], img[b]);
                        x < v && y < v && adj[x] >> y & 1 == 1
                    })
                    .count();
                counts[s] += 1;
            });
            for s in 0..=e {
                table[u][s] += counts[s];
            }
        }
        for row in &mut table {
            for c in row.iter_mut() {
                debug_assert_eq!(*c % aut, 0);
                *c /= aut;
            }
        }
        Ok(Self {
            vertices: v,
            edges: e,
            table,
        })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> usize {
        self.edges
    }

    pub fn entry(&self, shared_vertices: usize, shared_edges: usize) -> u64 {
        self.table[shared_vertices][shared_edges]
    }

    /// `c_s(n)`: for a fixed copy, how many copies (itself included) share
    /// exactly `s` edges with it, as an exact float.
    pub fn shared_edge_profile(&self, n: usize) -> Vec<f64> {
        let v = self.vertices;
        let mut c = vec![0.0; self.edges + 1];
        for u in 0..=v {
            if n < 2 * v - u {
                continue;
            }
            let ways = binomial((n - v) as u64, (v - u) as u64) as f64;
            for (s, cs) in c.iter_mut().enumerate() {
                *cs += self.table[u][s] as f64 * ways;
            }
        }
        c
    }
}

fn permute(targets: &[usize], img: &mut Vec<usize>, used: &mut [bool], f: &mut dyn FnMut(&[usize])) {
    if img.len() == targets.len() {
        f(img);
        return;
    }
    for i in 0..targets.len() {
        if !used[i] {
            used[i] = true;
            img.push(targets[i]);
            permute(targets, img, used, f);
            img.pop();
            used[i] = false;
        }
    }
}

/// Exact mean and variance of the copy count `S` in `G(n, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphModel {
    pub n: usize,
    pub p: f64,
    pub pattern: PatternGraph,
    pub copies: u128,
    /// open neighborhood size `D` (same for every copy by symmetry)
    pub max_degree: u128,
    pub mean: f64,
    pub variance: f64,
    pub sigma: f64,
    pub overlap: OverlapTable,
}

impl SubgraphModel {
    /// Builds the model for `p ∈ (0, 1]`. At `p = 1` the variance is zero and
    /// [`SubgraphModel::require_variance`] fails.
    pub fn new(n: usize, p: f64, pattern: &PatternGraph) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::DegenerateProbability(p));
        }
        let pattern = pattern.stripped();
        let v = pattern.vertex_count();
        if n < v {
            return Err(Error::InvalidArgument(format!(
                "n = {n} is smaller than the pattern's {v} vertices"
            )));
        }
        let overlap = OverlapTable::new(&pattern)?;
        let e = pattern.edge_count() as i32;
        let copies = copy_count(n, &pattern);
        let profile = overlap.shared_edge_profile(n);
        let mut per_copy = CompensatedSum::new();
        for (s, &cs) in profile.iter().enumerate().skip(1) {
            per_copy.add(cs * p.powi(2 * e - s as i32) * one_minus_pow(p, s as u32));
        }
        let jf = copies as f64;
        let variance = jf * per_copy.value();
        let neighbors: f64 = profile.iter().skip(1).sum::<f64>() - 1.0;
        Ok(Self {
            n,
            p,
            copies,
            max_degree: neighbors.round() as u128,
            mean: jf * p.powi(e),
            sigma: variance.sqrt(),
            variance,
            overlap,
            pattern,
        })
    }

    pub fn require_variance(&self) -> Result<()> {
        if self.variance > 0.0 && self.p < 1.0 {
            Ok(())
        } else {
            Err(Error::DegenerateVariance)
        }
    }

    pub fn edges(&self) -> usize {
        self.pattern.edge_count()
    }

    pub fn vertices(&self) -> usize {
        self.pattern.vertex_count()
    }

    /// `W = (S - E S) / σ`.
    #[inline]
    pub fn standardize(&self, count: u64) -> f64 {
        (count as f64 - self.mean) / self.sigma
    }

    /// `E|X_j| = 2 q (1 - q) / σ` with `q = p^e`.
    pub fn abs_x_mean(&self) -> f64 {
        let q = self.p.powi(self.edges() as i32);
        2.0 * q * one_minus_pow(self.p, self.edges() as u32) / self.sigma
    }
}
