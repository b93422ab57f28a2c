//! Small pattern graphs: validation, canonical codes, automorphisms, the
//! catalog of subgraph isomorphism classes and the `Ψ` functional.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on pattern vertices. Canonicalization is factorial in it.
pub const MAX_PATTERN_VERTICES: usize = 10;

/// Catalog enumeration walks every edge subset, so it is capped by edge count.
pub const MAX_CATALOG_EDGES: usize = 22;

/// Names accepted by [`PatternGraph::preset`].
pub const PRESETS: [&str; 5] = ["edge", "path2", "triangle", "c4", "k4"];

/// A simple undirected graph on `0..vertex_count` with at least one edge.
///
/// Edges are stored normalized (`u < v`) and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl PatternGraph {
    pub fn new<I>(vertex_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::with_cap(vertex_count, edges, MAX_PATTERN_VERTICES)
    }

    /// Like [`PatternGraph::new`] with a caller-chosen vertex cap (at most 64).
    pub fn with_cap<I>(vertex_count: usize, edges: I, cap: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let cap = cap.min(64);
        if vertex_count > cap {
            return Err(Error::PatternTooLarge {
                vertices: vertex_count,
                cap,
            });
        }
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidPattern(format!("self-loop at vertex {a}")));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidPattern(format!(
                    "edge ({a}, {b}) out of range for {vertex_count} vertices"
                )));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPattern("duplicate edge".into()));
        }
        if normalized.is_empty() {
            return Err(Error::InvalidPattern("pattern needs at least one edge".into()));
        }
        Ok(Self {
            vertex_count,
            edges: normalized,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "edge" => Self::new(2, [(0, 1)]),
            "path2" => Self::new(3, [(0, 1), (1, 2)]),
            "triangle" => Self::new(3, [(0, 1), (1, 2), (0, 2)]),
            "c4" => Self::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
            "k4" => Self::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
            other => Err(Error::InvalidPattern(format!(
                "unknown preset {other:?} (known: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Parses an edge list: one `u v` pair per line, 0-based. Blank lines and
    /// `#` comments are ignored. The vertex count is one past the largest label.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_vertex = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let next = |fields: &mut std::str::SplitWhitespace<'_>| -> Result<usize> {
                let tok = fields.next().ok_or_else(|| Error::PatternParse {
                    line: lineno + 1,
                    message: "expected two vertex labels".into(),
                })?;
                tok.parse::<usize>().map_err(|_| Error::PatternParse {
                    line: lineno + 1,
                    message: format!("not a vertex label: {tok:?}"),
                })
            };
            let u = next(&mut fields)?;
            let v = next(&mut fields)?;
            if fields.next().is_some() {
                return Err(Error::PatternParse {
                    line: lineno + 1,
                    message: "trailing tokens after edge".into(),
                });
            }
            max_vertex = max_vertex.max(u).max(v);
            edges.push((u, v));
        }
        if edges.is_empty() {
            return Err(Error::InvalidPattern("edge list is empty".into()));
        }
        Self::new(max_vertex + 1, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Row bitmasks of the adjacency matrix.
    pub fn adjacency(&self) -> Vec<u64> {
        let mut rows = vec![0u64; self.vertex_count];
        for &(a, b) in &self.edges {
            rows[a] |= 1 << b;
            rows[b] |= 1 << a;
        }
        rows
    }

    pub fn has_isolated_vertices(&self) -> bool {
        self.degrees().contains(&0)
    }

    /// Removes isolated vertices, relabelling the rest in increasing order.
    pub fn stripped(&self) -> PatternGraph {
        let deg = self.degrees();
        let mut relabel = vec![usize::MAX; self.vertex_count];
        let mut next = 0;
        for (v, &d) in deg.iter().enumerate() {
            if d > 0 {
                relabel[v] = next;
                next += 1;
            }
        }
        let mut edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(a, b)| (relabel[a], relabel[b]))
            .collect();
        edges.sort_unstable();
        PatternGraph {
            vertex_count: next,
            edges,
        }
    }

    /// Applies `perm` (old label -> new label).
    pub fn relabel(&self, perm: &[usize]) -> Result<PatternGraph> {
        if perm.len() != self.vertex_count {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &x in perm {
            if x >= perm.len() || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b]));
        PatternGraph::with_cap(self.vertex_count, edges, 64)
    }

    /// The subgraph formed by the edges selected in `mask` (bit i = edge i),
    /// isolated vertices stripped. `None` for the empty selection.
    pub fn edge_subgraph(&self, mask: u64) -> Option<PatternGraph> {
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        if edges.is_empty() {
            return None;
        }
        Some(
            PatternGraph {
                vertex_count: self.vertex_count,
                edges,
            }
            .stripped(),
        )
    }
}

impl fmt::Display for PatternGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G(v={}; ", self.vertex_count)?;
        for (i, (a, b)) in self.edges.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{a}-{b}")?;
        }
        write!(f, ")")
    }
}

/// Isomorphism-invariant byte string; equal iff the graphs are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalCode(pub Vec<u8>);

/// Computes the canonical code of `g`.
///
/// The code is the lexicographically largest upper-triangle adjacency string
/// over all vertex orders that list vertices by non-increasing degree. The
/// search places one vertex per position and abandons a branch as soon as
/// its prefix falls below the best prefix found so far.
pub fn canonicalize(g: &PatternGraph) -> Result<CanonicalCode> {
    canonicalize_with_cap(g, MAX_PATTERN_VERTICES)
}

pub fn canonicalize_with_cap(g: &PatternGraph, cap: usize) -> Result<CanonicalCode> {
    let n = g.vertex_count();
    if n > cap {
        return Err(Error::PatternTooLarge { vertices: n, cap });
    }
    let adj = g.adjacency();
    let deg = g.degrees();
    let mut deg_seq = deg.clone();
    deg_seq.sort_unstable_by(|a, b| b.cmp(a));

    let mut search = CanonSearch {
        n,
        adj: &adj,
        deg: &deg,
        deg_seq: &deg_seq,
        order: Vec::with_capacity(n),
        bits: Vec::with_capacity(n * n.saturating_sub(1) / 2),
        best: None,
    };
    search.descend(0);
    let best = search.best.expect("at least one degree-respecting order exists");

    let mut code = Vec::with_capacity(2 + n + best.len() / 8 + 1);
    code.push(n as u8);
    code.push(g.edge_count() as u8);
    code.extend(deg_seq.iter().map(|&d| d as u8));
    for chunk in best.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)));
        code.push(byte);
    }
    Ok(CanonicalCode(code))
}

struct CanonSearch<'a> {
    n: usize,
    adj: &'a [u64],
    deg: &'a [usize],
    deg_seq: &'a [usize],
    order: Vec<usize>,
    bits: Vec<bool>,
    best: Option<Vec<bool>>,
}

impl CanonSearch<'_> {
    /// Compares the current prefix with the same prefix of the best code.
    fn versus_best(&self) -> std::cmp::Ordering {
        match &self.best {
            None => std::cmp::Ordering::Greater,
            Some(best) => self.bits.as_slice().cmp(&best[..self.bits.len()]),
        }
    }

    fn descend(&mut self, used: u64) {
        let pos = self.order.len();
        if pos == self.n {
            if self.versus_best().is_gt() {
                self.best = Some(self.bits.clone());
            }
            return;
        }
        for cand in 0..self.n {
            if used >> cand & 1 == 1 || self.deg[cand] != self.deg_seq[pos] {
                continue;
            }
            let start = self.bits.len();
            for &prev in &self.order {
                self.bits.push(self.adj[prev] >> cand & 1 == 1);
            }
            // a prefix that is already smaller cannot recover
            if !self.versus_best().is_lt() {
                self.order.push(cand);
                self.descend(used | 1 << cand);
                self.order.pop();
            }
            self.bits.truncate(start);
        }
    }
}

/// All automorphisms of `g`, each as the image vector `v -> perm[v]`.
pub fn automorphisms(g: &PatternGraph) -> Vec<Vec<usize>> {
    let adj = g.adjacency();
    let deg = g.degrees();
    let n = g.vertex_count();
    let mut out = Vec::new();
    let mut perm = Vec::with_capacity(n);
    fn rec(
        n: usize,
        adj: &[u64],
        deg: &[usize],
        used: u64,
        perm: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let v = perm.len();
        if v == n {
            out.push(perm.clone());
            return;
        }
        for c in 0..n {
            if used >> c & 1 == 1 || deg[c] != deg[v] {
                continue;
            }
            let consistent = perm
                .iter()
                .enumerate()
                .all(|(u, &img)| (adj[v] >> u & 1) == (adj[c] >> img & 1));
            if consistent {
                perm.push(c);
                rec(n, adj, deg, used | 1 << c, perm, out);
                perm.pop();
            }
        }
    }
    rec(n, &adj, &deg, 0, &mut perm, &mut out);
    out
}

pub fn automorphism_count(g: &PatternGraph) -> u64 {
    automorphisms(g).len() as u64
}

/// One isomorphism class of subgraphs `H ⊂ 𝒢` with at least one edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphClass {
    pub representative: PatternGraph,
    pub vertices: usize,
    pub edges: usize,
    pub code: CanonicalCode,
    /// How many edge subsets of the pattern fall in this class.
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphCatalog {
    pattern: PatternGraph,
    classes: Vec<SubgraphClass>,
}

impl SubgraphCatalog {
    /// The (isolated-vertex-free) pattern the catalog was built from.
    pub fn pattern(&self) -> &PatternGraph {
        &self.pattern
    }

    /// Classes sorted by `(v_H, e_H, code)`; the last one is the pattern itself.
    pub fn classes(&self) -> &[SubgraphClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Index of the class isomorphic to `g`, if any.
    pub fn find(&self, g: &PatternGraph) -> Option<usize> {
        let code = canonicalize_with_cap(&g.stripped(), 64).ok()?;
        self.classes.iter().position(|c| c.code == code)
    }
}

/// All isomorphism classes of non-empty edge subsets of `pattern`.
pub fn subgraph_catalog(pattern: &PatternGraph) -> Result<SubgraphCatalog> {
    let pattern = pattern.stripped();
    let e = pattern.edge_count();
    if e > MAX_CATALOG_EDGES {
        return Err(Error::BudgetExceeded {
            what: "catalog edge-subset",
            needed: 1u128 << e,
            limit: 1u128 << MAX_CATALOG_EDGES,
        });
    }
    let mut by_code: BTreeMap<(usize, usize, CanonicalCode), SubgraphClass> = BTreeMap::new();
    for mask in 1u64..(1u64 << e) {
        let sub = pattern.edge_subgraph(mask).expect("non-empty mask");
        let code = canonicalize_with_cap(&sub, 64)?;
        let key = (sub.vertex_count(), sub.edge_count(), code.clone());
        by_code
            .entry(key)
            .and_modify(|c| c.multiplicity += 1)
            .or_insert_with(|| SubgraphClass {
                vertices: sub.vertex_count(),
                edges: sub.edge_count(),
                representative: sub,
                code,
                multiplicity: 1,
            });
    }
    Ok(SubgraphCatalog {
        pattern,
        classes: by_code.into_values().collect(),
    })
}

/// `Ψ_H = n^{v_H} p^{e_H}` for every class and their minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReport {
    pub psi_min: f64,
    /// Index into the catalog of the minimizing class.
    pub argmin: usize,
    /// `Ψ_H` per catalog class, same order as [`SubgraphCatalog::classes`].
    pub per_class: Vec<f64>,
}

impl PsiReport {
    /// `Ψ_𝒢` for the full pattern.
    pub fn psi_pattern(&self) -> f64 {
        *self.per_class.last().expect("catalog is never empty")
    }

    /// `Σ_h Ψ_h^{-1}` over catalog classes.
    pub fn inverse_sum(&self) -> f64 {
        self.per_class.iter().map(|x| 1.0 / x).sum()
    }
}

pub fn psi_value(n: f64, p: f64, vertices: usize, edges: usize) -> f64 {
    n.powi(vertices as i32) * p.powi(edges as i32)
}

pub fn psi(n: usize, p: f64, catalog: &SubgraphCatalog) -> Result<PsiReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::DegenerateProbability(p));
    }
    let v = catalog.pattern().vertex_count();
    if n < v {
        return Err(Error::InvalidArgument(format!(
            "n = {n} is smaller than the pattern's {v} vertices"
        )));
    }
    let per_class: Vec<f64> = catalog
        .classes()
        .iter()
        .map(|c| psi_value(n as f64, p, c.vertices, c.edges))
        .collect();
    // classes are already sorted by (v, e, code), so the first strict minimum
    // is the lexicographic tie-break
    let mut argmin = 0;
    for (i, &x) in per_class.iter().enumerate() {
        if x < per_class[argmin] {
            argmin = i;
        }
    }
    Ok(PsiReport {
        psi_min: per_class[argmin],
        argmin,
        per_class,
    })
}
