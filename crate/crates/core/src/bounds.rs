//! Right-hand sides of the moment bounds behind the main rate theorem, the
//! `Ψ`-shaped bounds, and the theorem's two rates.
//!
//! Constants the theory only asserts to exist are fitted from exact sums on
//! small `n` and always labelled as fitted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copies::{enumerate_copies, CopyIndex, DEFAULT_CHAIN6_BUDGET, DEFAULT_TRIPLE_BUDGET};
use crate::error::{check_open_probability, Error, Result};
use crate::model::SubgraphModel;
use crate::pattern::{psi, PatternGraph, SubgraphCatalog};

/// Dense/sparse threshold used when none is configured.
pub const DEFAULT_P0: f64 = 0.5;

/// How a bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rigor {
    /// from exact sums over copies
    Exact,
    /// from a `Ψ` shape times a constant fitted at small `n`; not a proven bound
    FittedShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub bound1: f64,
    pub bound2: f64,
    pub bound2_rigor: Rigor,
}

impl BoundPair {
    pub fn min(&self) -> f64 {
        self.bound1.min(self.bound2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma44 {
    /// `(2/σ) n^{v} e (1 − p)`
    pub end1: f64,
    /// `Ψ_𝒢³ (Σ_h Ψ_h⁻¹)²`, without its constant
    pub end2_shape: f64,
    /// `Ψ_𝒢⁶ (Σ_h Ψ_h⁻¹)⁵`, without its constant
    pub end3_shape: f64,
}

/// Constants fitted as the largest ratio of an exact sum to its shape over a
/// small-`n` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub p: f64,
    /// max over `n_grid_triple` of `triple_sum / end2_shape`
    pub c_triple_fitted: f64,
    /// max over `n_grid_chain` of `chain6_sum / end3_shape`
    pub c_chain_fitted: f64,
    pub n_grid_triple: Vec<usize>,
    pub n_grid_chain: Vec<usize>,
}

/// `Σ_j E|X_j| = |J| · 2 p^e (1 − p^e) / σ`.
pub fn abs_x_sum(model: &SubgraphModel) -> f64 {
    model.copies as f64 * model.abs_x_mean()
}

/// Closed neighborhood size `|N_j ∪ {j}|`, the `D` of the bounds.
pub fn closed_degree(model: &SubgraphModel) -> f64 {
    (model.max_degree + 1) as f64
}

fn checked(model: &SubgraphModel) -> Result<()> {
    check_open_probability(model.p)?;
    model.require_variance()
}

fn exact_or_fitted(
    exact: Option<Result<f64>>,
    fitted: impl FnOnce() -> Option<f64>,
    what: &'static str,
) -> Result<(f64, Rigor)> {
    match exact {
        Some(Ok(v)) => Ok((v, Rigor::Exact)),
        Some(Err(e @ Error::BudgetExceeded { .. })) | Some(Err(e @ Error::OracleTooLarge { .. })) => {
            fitted().map(|v| (v, Rigor::FittedShape)).ok_or(e)
        }
        Some(Err(e)) => Err(e),
        None => fitted()
            .map(|v| (v, Rigor::FittedShape))
            .ok_or_else(|| Error::InvalidArgument(format!("{what}: no copy index and no fitted constant"))),
    }
}

/// `9D²/(2σ²) Σ E|X_j|` and `36/σ³ Σ_j Σ_{k,l ∈ N_j} E[Y_jY_kY_l]`.
///
/// The triple sum is exact when `index` is given and within `budget`;
/// otherwise the fitted shape is used.
pub fn lemma41_rhs(
    model: &SubgraphModel,
    index: Option<&CopyIndex>,
    fitted: Option<&FittedConstants>,
    budget: u128,
) -> Result<BoundPair> {
    checked(model)?;
    let d = closed_degree(model);
    let s = model.sigma;
    let bound1 = 9.0 * d * d / (2.0 * s * s) * abs_x_sum(model);
    let (triple, rigor) = exact_or_fitted(
        index.map(|i| i.triple_sum_with_budget(model.p, budget)),
        || Some(fitted_for(fitted, model.p)?.c_triple_fitted * lemma44_shapes(model).ok()?.end2_shape),
        "triple sum",
    )?;
    Ok(BoundPair {
        bound1,
        bound2: 36.0 / s.powi(3) * triple,
        bound2_rigor: rigor,
    })
}

/// `20 D^{5/2}/σ^{5/2} (Σ E|X_j|)^{1/2}` and `113/σ³ (Σ_{J_c} E[Y_{j₁}⋯Y_{j₆}])^{1/2}`.
pub fn lemma42_rhs(
    model: &SubgraphModel,
    index: Option<&CopyIndex>,
    fitted: Option<&FittedConstants>,
    budget: u128,
) -> Result<BoundPair> {
    checked(model)?;
    let d = closed_degree(model);
    let s = model.sigma;
    let bound1 = 20.0 * d.powf(2.5) / s.powf(2.5) * abs_x_sum(model).sqrt();
    let (chain, rigor) = exact_or_fitted(
        index.map(|i| i.chain6_sum_with_budget(model.p, budget)),
        || Some(fitted_for(fitted, model.p)?.c_chain_fitted * lemma44_shapes(model).ok()?.end3_shape),
        "six-chain sum",
    )?;
    Ok(BoundPair {
        bound1,
        bound2: 113.0 / s.powi(3) * chain.sqrt(),
        bound2_rigor: rigor,
    })
}

fn fitted_for(fitted: Option<&FittedConstants>, p: f64) -> Option<&FittedConstants> {
    // constants are fitted per p; refuse to transfer them
    fitted.filter(|f| f.p == p)
}

fn lemma44_shapes(model: &SubgraphModel) -> Result<Lemma44> {
    let cat = crate::pattern::subgraph_catalog(&model.pattern)?;
    lemma44_rhs(model, &cat)
}

/// The three right-hand sides of the `Ψ`-form lemma, the last two as shapes.
pub fn lemma44_rhs(model: &SubgraphModel, catalog: &SubgraphCatalog) -> Result<Lemma44> {
    checked(model)?;
    let n = model.n as f64;
    let v = model.vertices() as i32;
    let e = model.edges() as f64;
    let end1 = 2.0 / model.sigma * n.powi(v) * e * (1.0 - model.p);
    let r = psi(model.n, model.p, catalog)?;
    let pg = r.psi_pattern();
    let inv = r.inverse_sum();
    Ok(Lemma44 {
        end1,
        end2_shape: pg.powi(3) * inv.powi(2),
        end3_shape: pg.powi(6) * inv.powi(5),
    })
}

/// Fits the shape constants at probability `p` from exact sums.
pub fn fit_constants(
    pattern: &PatternGraph,
    p: f64,
    n_grid_triple: &[usize],
    n_grid_chain: &[usize],
) -> Result<FittedConstants> {
    check_open_probability(p)?;
    if n_grid_triple.is_empty() || n_grid_chain.is_empty() {
        return Err(Error::InsufficientData("empty fitting grid".into()));
    }
    let cat = crate::pattern::subgraph_catalog(pattern)?;
    let ratio = |n: usize, chain: bool| -> Result<f64> {
        let model = SubgraphModel::new(n, p, pattern)?;
        let index = enumerate_copies(n, pattern)?;
        let shapes = lemma44_rhs(&model, &cat)?;
        Ok(if chain {
            index.chain6_sum_with_budget(p, DEFAULT_CHAIN6_BUDGET)? / shapes.end3_shape
        } else {
            index.triple_sum_with_budget(p, DEFAULT_TRIPLE_BUDGET)? / shapes.end2_shape
        })
    };
    let max_of = |grid: &[usize], chain: bool| -> Result<f64> {
        let rs: Vec<f64> = grid.par_iter().map(|&n| ratio(n, chain)).collect::<Result<_>>()?;
        Ok(rs.into_iter().fold(0.0, f64::max))
    };
    Ok(FittedConstants {
        p,
        c_triple_fitted: max_of(n_grid_triple, false)?,
        c_chain_fitted: max_of(n_grid_chain, true)?,
        n_grid_triple: n_grid_triple.to_vec(),
        n_grid_chain: n_grid_chain.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Dense,
    Sparse,
}

/// `1/(n√(1−p))` when `p > p0`, else `Ψ^{−1/2}`.
pub fn theorem11_rate(n: usize, p: f64, catalog: &SubgraphCatalog, p0: f64) -> Result<(f64, Regime)> {
    check_open_probability(p)?;
    check_open_probability(p0)?;
    if p > p0 {
        Ok((crate::mc::rate_dense(n, p)?, Regime::Dense))
    } else {
        Ok((crate::mc::rate_sparse(n, p, catalog)?, Regime::Sparse))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceShape {
    /// `(n, σ² Ψ / ((1 − p) Ψ_𝒢²))`
    pub ratios: Vec<(usize, f64)>,
    /// fitted lower constant
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Variance lower-bound shape ratio for each model.
pub fn variance_shape_check(models: &[SubgraphModel], catalog: &SubgraphCatalog) -> Result<VarianceShape> {
    if models.is_empty() {
        return Err(Error::InsufficientData("no models".into()));
    }
    let ratios: Vec<(usize, f64)> = models
        .iter()
        .map(|m| {
            check_open_probability(m.p)?;
            let r = psi(m.n, m.p, catalog)?;
            let pg = r.psi_pattern();
            Ok((m.n, m.variance * r.psi_min / ((1.0 - m.p) * pg * pg)))
        })
        .collect::<Result<_>>()?;
    let min_ratio = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(VarianceShape {
        ratios,
        min_ratio,
        max_ratio,
    })
}

/// Everything known about one `(n, p)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub p: f64,
    pub pattern: String,
    pub sigma: f64,
    pub psi: f64,
    /// open neighborhood size
    pub d: u64,
    /// `d + 1`, the neighborhood size entering the bounds
    pub d_closed: u64,
    pub a: Option<f64>,
    pub a_method: Option<String>,
    pub b_grid_max: Option<f64>,
    pub lemma41: BoundPair,
    pub lemma42: BoundPair,
    pub lemma44: Lemma44,
    pub fitted: Option<FittedConstants>,
    pub rate_dense: f64,
    pub rate_sparse: f64,
    pub regime: Regime,
    pub p0: f64,
    pub d_hat: Option<f64>,
    pub dkw_eps: Option<f64>,
}

impl BoundReport {
    /// Bound-only report; `A`, `B` and the Monte Carlo fields start empty.
    pub fn new(
        model: &SubgraphModel,
        catalog: &SubgraphCatalog,
        index: Option<&CopyIndex>,
        fitted: Option<&FittedConstants>,
        p0: f64,
        triple_budget: u128,
        chain_budget: u128,
    ) -> Result<Self> {
        checked(model)?;
        let r = psi(model.n, model.p, catalog)?;
        let (_, regime) = theorem11_rate(model.n, model.p, catalog, p0)?;
        Ok(Self {
            n: model.n,
            p: model.p,
            pattern: model.pattern.to_string(),
            sigma: model.sigma,
            psi: r.psi_min,
            d: model.max_degree as u64,
            d_closed: model.max_degree as u64 + 1,
            a: None,
            a_method: None,
            b_grid_max: None,
            lemma41: lemma41_rhs(model, index, fitted, triple_budget)?,
            lemma42: lemma42_rhs(model, index, fitted, chain_budget)?,
            lemma44: lemma44_rhs(model, catalog)?,
            fitted: fitted.cloned(),
            rate_dense: crate::mc::rate_dense(model.n, model.p)?,
            rate_sparse: r.psi_min.sqrt().recip(),
            regime,
            p0,
            d_hat: None,
            dkw_eps: None,
        })
    }

    pub fn reduced_rigor(&self) -> bool {
        self.lemma41.bound2_rigor == Rigor::FittedShape || self.lemma42.bound2_rigor == Rigor::FittedShape
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::subgraph_catalog;

    fn triangle() -> (PatternGraph, SubgraphCatalog) {
        let g = PatternGraph::preset("triangle").unwrap();
        let c = subgraph_catalog(&g).unwrap();
        (g, c)
    }

    #[test]
    fn dense_and_sparse_rates() {
        let (_, cat) = triangle();
        let (r, reg) = theorem11_rate(100, 0.5, &cat, 0.3).unwrap();
        assert_eq!(reg, Regime::Dense);
        assert!((r - 0.014_142_135_623_730_95).abs() < 1e-16);
        let (r, reg) = theorem11_rate(100, 0.01, &cat, 0.3).unwrap();
        assert_eq!(reg, Regime::Sparse);
        assert!((r - 1.0).abs() < 1e-12);
        assert!(theorem11_rate(100, 1.0, &cat, 0.3).is_err());
        assert!(theorem11_rate(100, 0.0, &cat, 0.3).is_err());
    }

    #[test]
    fn abs_x_sum_closed_form() {
        let (g, _) = triangle();
        let m = SubgraphModel::new(6, 0.4, &g).unwrap();
        let q = 0.4f64.powi(3);
        assert!((abs_x_sum(&m) - 20.0 * 2.0 * q * (1.0 - q) / m.sigma).abs() < 1e-14);
    }

    #[test]
    fn degenerate_gates() {
        let (g, cat) = triangle();
        let m = SubgraphModel::new(5, 1.0, &g).unwrap();
        let idx = enumerate_copies(5, &g).unwrap();
        assert!(lemma41_rhs(&m, Some(&idx), None, DEFAULT_TRIPLE_BUDGET).is_err());
        assert!(lemma42_rhs(&m, Some(&idx), None, DEFAULT_CHAIN6_BUDGET).is_err());
        assert!(lemma44_rhs(&m, &cat).is_err());
    }

    #[test]
    fn budget_falls_back_to_fitted_shape() {
        let (g, _) = triangle();
        let fit = fit_constants(&g, 0.5, &[4, 5, 6], &[4, 5]).unwrap();
        let m = SubgraphModel::new(7, 0.5, &g).unwrap();
        let idx = enumerate_copies(7, &g).unwrap();
        let b = lemma42_rhs(&m, Some(&idx), Some(&fit), 10).unwrap();
        assert_eq!(b.bound2_rigor, Rigor::FittedShape);
        assert!(lemma42_rhs(&m, Some(&idx), None, 10).is_err());
        // a constant fitted at another p is not reused
        let other = SubgraphModel::new(7, 0.3, &g).unwrap();
        assert!(lemma42_rhs(&other, Some(&idx), Some(&fit), 10).is_err());
        let b = lemma41_rhs(&m, Some(&idx), Some(&fit), DEFAULT_TRIPLE_BUDGET).unwrap();
        assert_eq!(b.bound2_rigor, Rigor::Exact);
    }
}
