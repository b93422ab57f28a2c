//! The subcommands. Each one sweeps the configured `n` grid, records points it
//! could not compute as gaps, and writes its reports.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use subgraph_stein::bkr::{default_t_grid, estimate_ab, oracle_analysis, r_l, taylor_residual, EstimationMethod};
use subgraph_stein::bounds::{fit_constants, BoundReport, FittedConstants};
use subgraph_stein::copies::{enumerate_copies_with_limit, CopyIndex};
use subgraph_stein::exact::ExactModel;
use subgraph_stein::mc::{
    normalization_check, rate_dense, rate_fit, rate_sparse, sample_w_model, NormalizationCheck, Predictor, RateFit,
    RatePoint,
};
use subgraph_stein::model::SubgraphModel;
use subgraph_stein::pattern::{automorphism_count, psi, subgraph_catalog, PsiReport, SubgraphCatalog};
use subgraph_stein::rng::GENERATOR;
use subgraph_stein::stein::{normal_density_bound, ode_bound, smoothing_bound, st_bound, CfDifference};

use crate::config::{LoadedConfig, TGridSpec};
use crate::report::{csv_bytes, float, opt_float, write_file, write_json, Envelope, Gap};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Catalog,
    Chains,
    OracleVerify,
    Bounds,
    McRun,
    RateFit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Catalog => "catalog",
            Command::Chains => "chains",
            Command::OracleVerify => "oracle-verify",
            Command::Bounds => "bounds",
            Command::McRun => "mc-run",
            Command::RateFit => "rate-fit",
        }
    }
}

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub budget_configs: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// some points were skipped for budget reasons
    BudgetGaps,
    /// a verification check failed
    VerifyFailed,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Success => 0,
            Status::BudgetGaps => 3,
            Status::VerifyFailed => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Ctx {
    cfg: LoadedConfig,
    hash: String,
    out: PathBuf,
    catalog: SubgraphCatalog,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.cfg.config.seed
    }

    fn points(&self) -> Vec<(usize, f64)> {
        self.cfg.config.n_grid.iter().map(|&n| (n, self.cfg.p_at(n))).collect()
    }

    fn provenance(&self, command: Command) -> String {
        format!(
            "tool={} version={} command={} config_sha256={} seed={} generator={}",
            crate::report::TOOL,
            crate::report::VERSION,
            command.name(),
            self.hash,
            self.seed(),
            GENERATOR
        )
    }

    fn envelope<'a, T: Serialize>(&'a self, command: Command, results: T, gaps: &'a [Gap]) -> Envelope<'a, T> {
        Envelope {
            tool: crate::report::TOOL,
            version: crate::report::VERSION,
            command: command.name(),
            config_sha256: &self.hash,
            seed: self.seed(),
            pattern: &self.cfg.pattern_name,
            generator: GENERATOR,
            results,
            gaps,
        }
    }

    fn index(&self, n: usize) -> Result<CopyIndex, subgraph_stein::Error> {
        enumerate_copies_with_limit(n, &self.cfg.pattern, self.cfg.config.budgets.copies)
    }
}

pub fn run(mut cfg: LoadedConfig, command: Command, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    if let Some(seed) = opts.seed {
        cfg.config.seed = seed;
    }
    if let Some(b) = opts.budget_configs {
        cfg.config.budgets.configs = b;
    }
    let out = opts
        .out_dir
        .clone()
        .or_else(|| cfg.config.out_dir.as_ref().map(|d| cfg.base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let catalog = subgraph_catalog(&cfg.pattern)?;
    let ctx = Ctx {
        hash: cfg.hash(),
        cfg,
        out,
        catalog,
    };
    match command {
        Command::Catalog => catalog_cmd(&ctx),
        Command::Chains => chains_cmd(&ctx),
        Command::OracleVerify => oracle_verify_cmd(&ctx),
        Command::Bounds => bounds_cmd(&ctx),
        Command::McRun => mc_run_cmd(&ctx).map(|(o, _)| o),
        Command::RateFit => rate_fit_cmd(&ctx),
    }
}

fn status_of(gaps: &[Gap]) -> Status {
    if gaps.is_empty() {
        Status::Success
    } else {
        Status::BudgetGaps
    }
}

fn split<T>(results: Vec<Result<T, Gap>>) -> (Vec<T>, Vec<Gap>) {
    let mut ok = Vec::new();
    let mut gaps = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(g) => gaps.push(g),
        }
    }
    (ok, gaps)
}

/// Non-budget errors abort the run; budget errors become gaps.
fn gap_or_abort<T>(results: Vec<Result<T, Gap>>) -> Result<(Vec<T>, Vec<Gap>), CliError> {
    let (ok, gaps) = split(results);
    if let Some(g) = gaps.iter().find(|g| !g.budget) {
        return Err(CliError::Core(subgraph_stein::Error::InvalidArgument(format!(
            "n = {}, p = {}: {}",
            g.n, g.p, g.error
        ))));
    }
    Ok((ok, gaps))
}

#[derive(Debug, Serialize)]
struct ClassRow {
    vertices: usize,
    edges: usize,
    multiplicity: u64,
    edge_list: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize)]
struct CatalogPoint {
    n: usize,
    p: f64,
    psi: PsiReport,
    copies: u128,
    d: u128,
    mean: f64,
    sigma: f64,
}

#[derive(Debug, Serialize)]
struct CatalogReport {
    vertices: usize,
    edges: usize,
    automorphisms: u64,
    classes: Vec<ClassRow>,
    points: Vec<CatalogPoint>,
}

fn catalog_cmd(ctx: &Ctx) -> Result<RunOutcome, CliError> {
    let g = ctx.catalog.pattern();
    let results: Vec<Result<CatalogPoint, Gap>> = ctx
        .points()
        .into_par_iter()
        .map(|(n, p)| {
            let m = SubgraphModel::new(n, p, g).map_err(|e| Gap::new(n, p, &e))?;
            Ok(CatalogPoint {
                n,
                p,
                psi: psi(n, p, &ctx.catalog).map_err(|e| Gap::new(n, p, &e))?,
                copies: m.copies,
                d: m.max_degree,
                mean: m.mean,
                sigma: m.sigma,
            })
        })
        .collect();
    let (points, gaps) = gap_or_abort(results)?;
    let report = CatalogReport {
        vertices: g.vertex_count(),
        edges: g.edge_count(),
        automorphisms: automorphism_count(g),
        classes: ctx
            .catalog
            .classes()
            .iter()
            .map(|c| ClassRow {
                vertices: c.vertices,
                edges: c.edges,
                multiplicity: c.multiplicity,
                edge_list: c.representative.edges().to_vec(),
            })
            .collect(),
        points,
    };
    let file = write_json(&ctx.out, "catalog.json", &ctx.envelope(Command::Catalog, report, &gaps))?;
    Ok(RunOutcome {
        status: status_of(&gaps),
        files: vec![file],
        warnings: vec![],
    })
}

#[derive(Debug, Serialize)]
struct ChainPoint {
    n: usize,
    p: f64,
    copies: usize,
    d_closed: usize,
    triple_sum: Option<f64>,
    chain6_sum: Option<f64>,
    errors: Vec<String>,
}

fn chains_cmd(ctx: &Ctx) -> Result<RunOutcome, CliError> {
    let b = ctx.cfg.config.budgets;
    let results: Vec<Result<ChainPoint, Gap>> = ctx
        .points()
        .into_iter()
        .map(|(n, p)| {
            let idx = ctx.index(n).map_err(|e| Gap::new(n, p, &e))?;
            let mut errors = vec![];
            let mut keep = |r: Result<f64, subgraph_stein::Error>| match r {
                Ok(v) => Some(v),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            };
            let triple_sum = keep(idx.triple_sum_with_budget(p, b.triple));
            let chain6_sum = keep(idx.chain6_sum_with_budget(p, b.chain6));
            Ok(ChainPoint {
                n,
                p,
                copies: idx.len(),
                d_closed: idx.closed_max_degree(),
                triple_sum,
                chain6_sum,
                errors,
            })
        })
        .collect();
    let (points, mut gaps) = gap_or_abort(results)?;
    for pt in &points {
        for e in &pt.errors {
            gaps.push(Gap {
                n: pt.n,
                p: pt.p,
                budget: true,
                error: e.clone(),
            });
        }
    }
    let file = write_json(&ctx.out, "chains.json", &ctx.envelope(Command::Chains, &points, &gaps))?;
    Ok(RunOutcome {
        status: status_of(&gaps),
        files: vec![file],
        warnings: vec![],
    })
}

/// Tolerances of the verification suite.
pub const HT_TOLERANCE: f64 = 1e-9;
pub const W3_TOLERANCE: f64 = 1e-10;
pub const VARIANCE_TOLERANCE: f64 = 1e-10;
pub const R_L_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Serialize)]
struct RlCheck {
    points: usize,
    max_taylor_residual: f64,
    max_excess_over_sup: f64,
    values_at_zero_exact: bool,
    passed: bool,
}

fn r_l_check() -> Result<RlCheck, CliError> {
    let mut max_res: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut at_zero = true;
    let mut points = 0;
    for l in 1..=3u32 {
        let fact: f64 = (1..=l).map(f64::from).product();
        at_zero &= r_l(0.0, l)?.re == 1.0 / fact && r_l(0.0, l)?.im == 0.0;
        for i in 0..=1000 {
            let z = -100.0 + 0.2 * i as f64;
            max_res = max_res.max(taylor_residual(z, l)?);
            max_excess = max_excess.max(r_l(z, l)?.norm() - 1.0 / fact);
            points += 1;
        }
    }
    Ok(RlCheck {
        points,
        max_taylor_residual: max_res,
        max_excess_over_sup: max_excess,
        values_at_zero_exact: at_zero,
        passed: max_res <= R_L_TOLERANCE && max_excess <= R_L_TOLERANCE && at_zero,
    })
}

#[derive(Debug, Serialize)]
struct VerifyPoint {
    n: usize,
    p: f64,
    /// worker partitions of the configuration sweep; results are bit-stable for a fixed count
    partitions: usize,
    variance_enumerated: f64,
    variance_formula: f64,
    variance_residual: f64,
    ht_residual_max: f64,
    w3_residual_max: f64,
    a: f64,
    epsilon: f64,
    b_grid_max: f64,
    t_max: f64,
    grid: Vec<f64>,
    /// `max_t (E|H_t| − A)`
    abs_h_excess: f64,
    /// `max_t (|Cov(H_t, e^{−itW})| − B(t))`
    cov_excess: f64,
    lemma41_excess: f64,
    lemma42_excess: f64,
    /// `max (|φ(t) − e^{−t²/2}| − ode_bound)` over the grid inside the validity range
    ode_excess: f64,
    kolmogorov_exact: f64,
    smoothing_bound: f64,
    st_bound: f64,
    passed: bool,
}

fn verify_point(ctx: &Ctx, n: usize, p: f64) -> Result<VerifyPoint, subgraph_stein::Error> {
    let b = ctx.cfg.config.budgets;
    let ex = ExactModel::with_options(n, p, &ctx.cfg.pattern, b.oracle_options())?;
    let mom = ex.exact_moments();
    let (venum, vform) = match &mom {
        Ok(m) => (m.variance_enumerated, m.variance_formula),
        Err(_) => (f64::NAN, ex.pair_formula_variance()),
    };
    let vmodel = ex.model().variance;
    let variance_residual = if mom.is_ok() {
        (venum - vmodel).abs().max((vform - vmodel).abs()) / vmodel.max(1.0)
    } else {
        f64::INFINITY
    };
    let a = oracle_analysis(&ex, &[])?.a;
    let grid = match &ctx.cfg.config.t_grid {
        TGridSpec::Default => default_t_grid(a),
        TGridSpec::Points(ts) => ts.clone(),
    };
    let r = oracle_analysis(&ex, &grid)?;
    let l41 = subgraph_stein::bounds::lemma41_rhs(ex.model(), Some(ex.index()), None, b.triple)?;
    let l42 = subgraph_stein::bounds::lemma42_rhs(ex.model(), Some(ex.index()), None, b.chain6)?;
    let b_grid_max = r.per_t.iter().map(|h| h.b()).fold(0.0, f64::max);
    let t_max = subgraph_stein::stein::ode_range(r.a);
    let dist = ex.exact_distribution()?;
    let mut ode_excess = f64::NEG_INFINITY;
    for &t in &grid {
        if t.abs() <= t_max {
            ode_excess = ode_excess.max(dist.diff(t).norm() - ode_bound(r.a, b_grid_max, t)?);
        }
    }
    let max_over = |f: &dyn Fn(&subgraph_stein::bkr::HtMoments) -> f64| {
        r.per_t.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    };
    let ht_residual_max = max_over(&|h| h.identity_residual());
    let abs_h_excess = max_over(&|h| h.mean_abs_h - r.a);
    let cov_excess = max_over(&|h| h.covariance().norm() - h.b());
    let lemma41_excess = max_over(&|h| h.mean_h.norm() - l41.min());
    let lemma42_excess = max_over(&|h| h.covariance().norm() - l42.min());
    let sb = smoothing_bound(dist, t_max, normal_density_bound())?.value;
    let stb = st_bound(r.a, b_grid_max)?;
    // relative slack for roundoff in the inequality checks
    let slack = 1e-12;
    let passed = variance_residual <= VARIANCE_TOLERANCE
        && ht_residual_max <= HT_TOLERANCE
        && r.max_w3_residual <= W3_TOLERANCE
        && abs_h_excess <= slack * r.a
        && cov_excess <= slack
        && lemma41_excess <= 0.0
        && lemma42_excess <= 0.0
        && ode_excess <= slack
        && dist.kolmogorov <= sb
        && dist.kolmogorov <= stb;
    Ok(VerifyPoint {
        n,
        p,
        partitions: ex.partitions(),
        variance_enumerated: venum,
        variance_formula: vform,
        variance_residual,
        ht_residual_max,
        w3_residual_max: r.max_w3_residual,
        a: r.a,
        epsilon: r.epsilon,
        b_grid_max,
        t_max,
        grid,
        abs_h_excess,
        cov_excess,
        lemma41_excess,
        lemma42_excess,
        ode_excess,
        kolmogorov_exact: dist.kolmogorov,
        smoothing_bound: sb,
        st_bound: stb,
        passed,
    })
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    r_l: RlCheck,
    points: Vec<VerifyPoint>,
    passed: bool,
}

fn oracle_verify_cmd(ctx: &Ctx) -> Result<RunOutcome, CliError> {
    let results: Vec<Result<VerifyPoint, Gap>> = ctx
        .points()
        .into_iter()
        .map(|(n, p)| verify_point(ctx, n, p).map_err(|e| Gap::new(n, p, &e)))
        .collect();
    let (points, gaps) = gap_or_abort(results)?;
    let r_l = r_l_check()?;
    let passed = r_l.passed && points.iter().all(|p| p.passed);
    let mut warnings = vec![];
    for p in points.iter().filter(|p| !p.passed) {
        warnings.push(format!("verification failed at n = {}, p = {}", p.n, p.p));
    }
    if !r_l.passed {
        warnings.push("R_l checks failed".into());
    }
    let report = VerifyReport { r_l, points, passed };
    let file = write_json(&ctx.out, "oracle_verify.json", &ctx.envelope(Command::OracleVerify, report, &gaps))?;
    Ok(RunOutcome {
        status: if passed { status_of(&gaps) } else { Status::VerifyFailed },
        files: vec![file],
        warnings,
    })
}

fn fitted_at(ctx: &Ctx, p: f64) -> Option<FittedConstants> {
    let v = ctx.catalog.pattern().vertex_count();
    let fit = &ctx.cfg.config.fit;
    let triple = fit.triple_n.clone().unwrap_or_else(|| (v..=v + 4).collect());
    let chain = fit.chain_n.clone().unwrap_or_else(|| vec![v, v + 1]);
    fit_constants(&ctx.cfg.pattern, p, &triple, &chain).ok()
}

fn bound_point(ctx: &Ctx, n: usize, p: f64) -> Result<BoundReport, subgraph_stein::Error> {
    let c = &ctx.cfg.config;
    let model = SubgraphModel::new(n, p, &ctx.cfg.pattern)?;
    let index = ctx.index(n).ok();
    let fitted = fitted_at(ctx, p);
    let mut rep = BoundReport::new(
        &model,
        &ctx.catalog,
        index.as_ref(),
        fitted.as_ref(),
        c.p0,
        c.budgets.triple,
        c.budgets.chain6,
    )?;
    let grid = match &c.t_grid {
        TGridSpec::Default => None,
        TGridSpec::Points(ts) => Some(ts.as_slice()),
    };
    let opts = c.budgets.oracle_options();
    let method = if subgraph_stein::copies::EdgeUniverse::new(n).edge_count() <= opts.max_edges.min(63) {
        Some(EstimationMethod::ExactOracle { options: opts })
    } else if c.bounds_samples > 0 {
        Some(EstimationMethod::MonteCarlo {
            samples: c.bounds_samples,
            seed: c.seed,
        })
    } else {
        None
    };
    if let (Some(method), Some(idx)) = (method, index.as_ref()) {
        let ab = estimate_ab(idx, &model, grid, method)?;
        rep.a = Some(ab.a);
        rep.b_grid_max = Some(ab.b_grid_max);
        rep.a_method = Some(
            match method {
                EstimationMethod::ExactOracle { .. } => "exact-oracle",
                EstimationMethod::MonteCarlo { .. } => "monte-carlo",
            }
            .into(),
        );
    }
    let batch = sample_w_model(&model, c.m, c.seed)?;
    let pt = RatePoint::from_batch(&batch)?;
    rep.d_hat = Some(pt.d_hat);
    rep.dkw_eps = Some(pt.dkw_eps);
    Ok(rep)
}

const BOUNDS_HEADER: [&str; 20] = [
    "n",
    "p",
    "pattern",
    "sigma",
    "psi",
    "d",
    "a",
    "b_grid_max",
    "lemma41_b1",
    "lemma41_b2",
    "lemma42_b1",
    "lemma42_b2",
    "end1",
    "end2_shape",
    "end3_shape",
    "rate_dense",
    "rate_sparse",
    "d_hat",
    "dkw_eps",
    "reduced_rigor",
];

fn bounds_cmd(ctx: &Ctx) -> Result<RunOutcome, CliError> {
    let results: Vec<Result<BoundReport, Gap>> = ctx
        .points()
        .into_iter()
        .map(|(n, p)| bound_point(ctx, n, p).map_err(|e| Gap::new(n, p, &e)))
        .collect();
    let (reports, gaps) = gap_or_abort(results)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                float(r.p),
                ctx.cfg.pattern_name.clone(),
                float(r.sigma),
                float(r.psi),
                r.d.to_string(),
                opt_float(r.a),
                opt_float(r.b_grid_max),
                float(r.lemma41.bound1),
                float(r.lemma41.bound2),
                float(r.lemma42.bound1),
                float(r.lemma42.bound2),
                float(r.lemma44.end1),
                float(r.lemma44.end2_shape),
                float(r.lemma44.end3_shape),
                float(r.rate_dense),
                float(r.rate_sparse),
                opt_float(r.d_hat),
                opt_float(r.dkw_eps),
                r.reduced_rigor().to_string(),
            ]
        })
        .collect();
    let warnings = reports
        .iter()
        .filter(|r| r.reduced_rigor())
        .map(|r| format!("n = {}: exact chain sums over budget, fitted shape used", r.n))
        .collect();
    let json = write_json(&ctx.out, "bounds.json", &ctx.envelope(Command::Bounds, &reports, &gaps))?;
    let csv = write_file(
        &ctx.out,
        "bounds.csv",
        &csv_bytes(&ctx.provenance(Command::Bounds), &BOUNDS_HEADER, &rows),
    )?;
    Ok(RunOutcome {
        status: status_of(&gaps),
        files: vec![json, csv],
        warnings,
    })
}

/// One row of the Monte Carlo table.
#[derive(Debug, Clone, Serialize)]
pub struct McRow {
    pub n: usize,
    pub p: f64,
    pub pattern: String,
    pub m: usize,
    pub seed: u64,
    pub d_hat: f64,
    pub dkw_eps: f64,
    pub sigma: f64,
    pub psi: f64,
    pub rate_dense: f64,
    pub rate_sparse: f64,
    pub normalization: NormalizationCheck,
}

impl McRow {
    pub fn rate_point(&self) -> RatePoint {
        RatePoint {
            n: self.n,
            p: self.p,
            d_hat: self.d_hat,
            dkw_eps: self.dkw_eps,
            m: self.m,
        }
    }
}

pub const MC_HEADER: [&str; 11] = [
    "n",
    "p",
    "pattern",
    "m",
    "seed",
    "d_hat",
    "dkw_eps",
    "sigma",
    "psi",
    "rate_dense",
    "rate_sparse",
];

fn mc_point(ctx: &Ctx, n: usize, p: f64) -> Result<McRow, subgraph_stein::Error> {
    let c = &ctx.cfg.config;
    let model = SubgraphModel::new(n, p, &ctx.cfg.pattern)?;
    let batch = sample_w_model(&model, c.m, c.seed)?;
    let pt = RatePoint::from_batch(&batch)?;
    Ok(McRow {
        n,
        p,
        pattern: ctx.cfg.pattern_name.clone(),
        m: c.m,
        seed: c.seed,
        d_hat: pt.d_hat,
        dkw_eps: pt.dkw_eps,
        sigma: model.sigma,
        psi: psi(n, p, &ctx.catalog)?.psi_min,
        rate_dense: rate_dense(n, p)?,
        rate_sparse: rate_sparse(n, p, &ctx.catalog)?,
        normalization: normalization_check(&batch),
    })
}

fn mc_run_cmd(ctx: &Ctx) -> Result<(RunOutcome, Vec<McRow>), CliError> {
    let results: Vec<Result<McRow, Gap>> = ctx
        .points()
        .into_iter()
        .map(|(n, p)| mc_point(ctx, n, p).map_err(|e| Gap::new(n, p, &e)))
        .collect();
    let (rows, gaps) = gap_or_abort(results)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                float(r.p),
                r.pattern.clone(),
                r.m.to_string(),
                r.seed.to_string(),
                float(r.d_hat),
                float(r.dkw_eps),
                float(r.sigma),
                float(r.psi),
                float(r.rate_dense),
                float(r.rate_sparse),
            ]
        })
        .collect();
    let warnings = rows
        .iter()
        .filter(|r| !r.normalization.passed)
        .map(|r| format!("n = {}: batch failed the normalization gate", r.n))
        .collect();
    let csv = write_file(
        &ctx.out,
        "mc_run.csv",
        &csv_bytes(&ctx.provenance(Command::McRun), &MC_HEADER, &table),
    )?;
    let json = write_json(&ctx.out, "mc_run.json", &ctx.envelope(Command::McRun, &rows, &gaps))?;
    Ok((
        RunOutcome {
            status: status_of(&gaps),
            files: vec![csv, json],
            warnings,
        },
        rows,
    ))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum FitResult {
    Fit(RateFit),
    Error(String),
}

#[derive(Debug, Serialize)]
struct RateFitReport {
    inv_n_sqrt_1mp: FitResult,
    inv_sqrt_psi: FitResult,
    /// points left out because their batch failed the normalization gate
    rejected_n: Vec<usize>,
}

fn rate_fit_cmd(ctx: &Ctx) -> Result<RunOutcome, CliError> {
    let (mut outcome, rows) = mc_run_cmd(ctx)?;
    let (good, bad): (Vec<&McRow>, Vec<&McRow>) = rows.iter().partition(|r| r.normalization.passed);
    let points: Vec<RatePoint> = good.iter().map(|r| r.rate_point()).collect();
    let fit = |pred: Predictor<'_>| match rate_fit(&points, pred) {
        Ok(f) => FitResult::Fit(f),
        Err(e) => FitResult::Error(e.to_string()),
    };
    let report = RateFitReport {
        inv_n_sqrt_1mp: fit(Predictor::InvNSqrt1mp),
        inv_sqrt_psi: fit(Predictor::InvSqrtPsi(&ctx.catalog)),
        rejected_n: bad.iter().map(|r| r.n).collect(),
    };
    for (name, f) in [("inv_n_sqrt_1mp", &report.inv_n_sqrt_1mp), ("inv_sqrt_psi", &report.inv_sqrt_psi)] {
        match f {
            FitResult::Fit(f) => {
                for q in &f.filtered {
                    outcome
                        .warnings
                        .push(format!("{name}: n = {} is within its DKW band and was left out", q.n));
                }
            }
            FitResult::Error(e) => outcome.warnings.push(format!("{name}: {e}")),
        }
    }
    let gaps: Vec<Gap> = vec![];
    let file = write_json(&ctx.out, "rate_fit.json", &ctx.envelope(Command::RateFit, &report, &gaps))?;
    outcome.files.push(file);
    Ok(outcome)
}
