//! Exhaustive enumeration of all edge configurations for tiny `n`.
//!
//! Configurations are visited in Gray-code order inside each partition of
//! the high mask bits, so each step flips one edge and only the copies
//! through that edge change state.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copies::{enumerate_copies, CopyIndex, EdgeConfiguration, EdgeUniverse};
use crate::error::{check_open_probability, Error, Result};
use crate::model::SubgraphModel;
use crate::numeric::{CompensatedSum, ComplexSum};
use crate::pattern::PatternGraph;
use crate::stein::std_normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Largest `C(n, 2)` accepted; the sweep visits `2^max_edges` configurations.
    pub max_edges: usize,
    /// Number of high mask bits fixed per worker partition.
    pub partition_bits: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_edges: 22,
            partition_bits: 4,
        }
    }
}

/// State of one configuration during a sweep.
pub struct ConfigView<'a> {
    universe: EdgeUniverse,
    pub mask: u64,
    /// number of present edges
    pub present: u32,
    /// number of fully present copies
    pub count: u64,
    missing: &'a [u8],
}

impl ConfigView<'_> {
    /// `Y_j`: whether copy `j` is fully present.
    #[inline]
    pub fn y(&self, j: usize) -> bool {
        self.missing[j] == 0
    }

    pub fn configuration(&self) -> EdgeConfiguration {
        EdgeConfiguration::from_mask(self.universe, self.mask)
    }
}

/// A model small enough for exhaustive enumeration.
#[derive(Debug)]
pub struct ExactModel {
    model: SubgraphModel,
    index: CopyIndex,
    options: OracleOptions,
    distribution: OnceLock<ExactDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean_enumerated: f64,
    pub mean_formula: f64,
    pub variance_enumerated: f64,
    pub variance_formula: f64,
    /// true when the count is almost surely constant
    pub degenerate: bool,
}

/// One support point of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub count: u64,
    pub w: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    /// sorted by `w`
    pub atoms: Vec<Atom>,
    pub kolmogorov: f64,
    /// support point where the Kolmogorov gap is attained
    pub argsup: f64,
}

impl ExactDistribution {
    /// `P(W ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.w <= x)
            .map(|a| a.probability)
            .sum()
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability).collect::<CompensatedSum>().value()
    }

    /// `E e^{itW}`.
    pub fn cf(&self, t: f64) -> Complex64 {
        let mut s = ComplexSum::new();
        for a in &self.atoms {
            s.add(Complex64::from_polar(a.probability, t * a.w));
        }
        s.value()
    }
}

/// Kolmogorov distance of a discrete law (atoms sorted by location) to Φ.
pub fn kolmogorov_discrete(atoms: &[(f64, f64)]) -> (f64, f64) {
    let mut cum = CompensatedSum::new();
    let mut best = (0.0, f64::NAN);
    for &(w, prob) in atoms {
        let before = cum.value();
        cum.add(prob);
        let after = cum.value();
        let phi = std_normal_cdf(w);
        let gap = (after - phi).abs().max((before - phi).abs());
        if gap > best.0 {
            best = (gap, w);
        }
    }
    best
}

impl ExactModel {
    pub fn new(n: usize, p: f64, pattern: &PatternGraph) -> Result<Self> {
        Self::with_options(n, p, pattern, OracleOptions::default())
    }

    /// Accepts `p ∈ (0, 1]`; everything involving `W` requires `p < 1`.
    pub fn with_options(
        n: usize,
        p: f64,
        pattern: &PatternGraph,
        options: OracleOptions,
    ) -> Result<Self> {
        let universe = EdgeUniverse::new(n);
        let cap = options.max_edges.min(63);
        if universe.edge_count() > cap {
            return Err(Error::OracleTooLarge {
                edges: universe.edge_count(),
                cap,
            });
        }
        let model = SubgraphModel::new(n, p, pattern)?;
        let index = enumerate_copies(n, pattern)?;
        Ok(Self {
            model,
            index,
            options,
            distribution: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &SubgraphModel {
        &self.model
    }

    pub fn index(&self) -> &CopyIndex {
        &self.index
    }

    pub fn options(&self) -> OracleOptions {
        self.options
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn p(&self) -> f64 {
        self.model.p
    }

    pub fn sigma(&self) -> f64 {
        self.model.sigma
    }

    /// Number of worker partitions actually used.
    pub fn partitions(&self) -> usize {
        1 << self.partition_bits()
    }

    fn partition_bits(&self) -> u32 {
        (self.options.partition_bits as usize).min(self.index.universe().edge_count()) as u32
    }

    fn weights(&self) -> Vec<f64> {
        let e = self.index.universe().edge_count() as i32;
        let p = self.model.p;
        (0..=e).map(|k| p.powi(k) * (1.0 - p).powi(e - k)).collect()
    }

    /// Folds `visit` over every configuration, one accumulator per partition,
    /// returned in partition order.
    pub fn fold_configs<A, I, F>(&self, init: I, visit: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &ConfigView<'_>, f64) + Sync,
    {
        let universe = self.index.universe();
        let e = universe.edge_count();
        let hi_bits = self.partition_bits();
        let lo_bits = e as u32 - hi_bits;
        let weights = self.weights();
        let index = &self.index;
        let nj = index.len();
        (0u64..1 << hi_bits)
            .into_par_iter()
            .map(|hi| {
                let mut acc = init();
                let mut mask = hi << lo_bits;
                let mut missing: Vec<u8> = (0..nj)
                    .map(|j| {
                        index
                            .copy(j)
                            .iter()
                            .filter(|&&ed| mask >> ed & 1 == 0)
                            .count() as u8
                    })
                    .collect();
                let mut count = missing.iter().filter(|&&m| m == 0).count() as u64;
                for i in 0u64..1 << lo_bits {
                    if i > 0 {
                        let bit = i.trailing_zeros() as usize;
                        mask ^= 1 << bit;
                        let adding = mask >> bit & 1 == 1;
                        for &j in index.copies_with_edge(bit) {
                            let m = &mut missing[j as usize];
                            if adding {
                                *m -= 1;
                                if *m == 0 {
                                    count += 1;
                                }
                            } else {
                                if *m == 0 {
                                    count -= 1;
                                }
                                *m += 1;
                            }
                        }
                    }
                    let present = mask.count_ones();
                    let view = ConfigView {
                        universe,
                        mask,
                        present,
                        count,
                        missing: &missing,
                    };
                    visit(&mut acc, &view, weights[present as usize]);
                }
                acc
            })
            .collect()
    }

    /// `E f` over all configurations.
    pub fn exact_functional<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(&ConfigView<'_>) -> Complex64 + Sync,
    {
        check_open_probability(self.model.p)?;
        let parts = self.fold_configs(ComplexSum::new, |acc, view, w| acc.add(f(view) * w));
        let mut total = ComplexSum::new();
        for part in &parts {
            total.merge(part);
        }
        Ok(total.value())
    }

    /// Several real expectations in one sweep.
    pub fn exact_expectations<F, const K: usize>(&self, f: F) -> Result<[f64; K]>
    where
        F: Fn(&ConfigView<'_>) -> [f64; K] + Sync,
    {
        check_open_probability(self.model.p)?;
        let parts = self.fold_configs(
            || [CompensatedSum::new(); K],
            |acc, view, w| {
                let v = f(view);
                for i in 0..K {
                    acc[i].add(v[i] * w);
                }
            },
        );
        let mut total = [CompensatedSum::new(); K];
        for part in &parts {
            for i in 0..K {
                total[i].merge(&part[i]);
            }
        }
        Ok(total.map(|s| s.value()))
    }

    /// `Var S` by the pair formula over the materialized copies.
    pub fn pair_formula_variance(&self) -> f64 {
        let p = self.model.p;
        let e = self.model.edges() as i32;
        let parts: Vec<CompensatedSum> = (0..self.index.len())
            .into_par_iter()
            .map(|j| {
                let mut s = CompensatedSum::new();
                for k in self.index.closed_neighbors(j) {
                    let shared = self.index.overlap(j, k as usize) as i32;
                    s.add(p.powi(2 * e - shared) - p.powi(2 * e));
                }
                s
            })
            .collect();
        let mut total = CompensatedSum::new();
        for s in &parts {
            total.merge(s);
        }
        total.value()
    }

    /// Mean and variance of `S` by enumeration and by the pair formula.
    pub fn exact_moments(&self) -> Result<ExactMoments> {
        let mean_formula = self.model.mean;
        let variance_formula = self.pair_formula_variance();
        if self.model.p == 1.0 {
            return Ok(ExactMoments {
                mean_enumerated: self.index.len() as f64,
                mean_formula,
                variance_enumerated: 0.0,
                variance_formula,
                degenerate: true,
            });
        }
        let [d1, d2] = self.exact_expectations(|v| {
            let d = v.count as f64 - mean_formula;
            [d, d * d]
        })?;
        let mean_enumerated = mean_formula + d1;
        let variance_enumerated = d2 - d1 * d1;
        let scale = variance_formula.abs().max(1.0);
        if (variance_enumerated - variance_formula).abs() > 1e-10 * scale
            || (d1.abs() > 1e-10 * mean_formula.max(1.0))
        {
            return Err(Error::Inconsistent(format!(
                "enumerated moments ({mean_enumerated}, {variance_enumerated}) disagree with \
                 pair formula ({mean_formula}, {variance_formula})"
            )));
        }
        Ok(ExactMoments {
            mean_enumerated,
            mean_formula,
            variance_enumerated,
            variance_formula,
            degenerate: variance_formula == 0.0,
        })
    }

    /// Exact law of `W` and its Kolmogorov distance to the standard normal.
    pub fn exact_distribution(&self) -> Result<&ExactDistribution> {
        check_open_probability(self.model.p)?;
        self.model.require_variance()?;
        if let Some(d) = self.distribution.get() {
            return Ok(d);
        }
        let nj = self.index.len();
        let parts = self.fold_configs(
            || vec![CompensatedSum::new(); nj + 1],
            |acc, view, w| acc[view.count as usize].add(w),
        );
        let mut mass = vec![CompensatedSum::new(); nj + 1];
        for part in &parts {
            for (m, s) in mass.iter_mut().zip(part) {
                m.merge(s);
            }
        }
        let atoms: Vec<Atom> = mass
            .iter()
            .enumerate()
            .filter(|(_, s)| s.value() > 0.0)
            .map(|(c, s)| Atom {
                count: c as u64,
                w: self.model.standardize(c as u64),
                probability: s.value(),
            })
            .collect();
        let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.w, a.probability)).collect();
        let (kolmogorov, argsup) = kolmogorov_discrete(&pairs);
        let dist = ExactDistribution {
            atoms,
            kolmogorov,
            argsup,
        };
        Ok(self.distribution.get_or_init(|| dist))
    }

    /// `φ(t) = E e^{itW}`.
    pub fn exact_cf(&self, t: f64) -> Result<Complex64> {
        Ok(self.exact_distribution()?.cf(t))
    }

    /// `|E[(iW + t) e^{itW}] − t² E[H_t e^{itW}]|` for each `t`.
    pub fn verify_ht_identity(&self, ts: &[f64]) -> Result<Vec<f64>> {
        let moments = crate::bkr::oracle_ht_moments(self, ts)?;
        Ok(moments.iter().map(|m| m.identity_residual()).collect())
    }
}
