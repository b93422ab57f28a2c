use subgraph_stein::bkr::{estimate_ab, EstimationMethod};
use subgraph_stein::exact::ExactModel;
use subgraph_stein::pattern::PatternGraph;
use subgraph_stein::stein::*;

#[test]
fn oracle_models_satisfy_every_link_of_the_chain() {
    let g = PatternGraph::preset("triangle").unwrap();
    for n in [4, 5] {
        for p in [0.3, 0.5, 0.7] {
            let ex = ExactModel::new(n, p, &g).unwrap();
            let ab = estimate_ab(ex.index(), ex.model(), None, EstimationMethod::oracle()).unwrap();
            let dist = ex.exact_distribution().unwrap();
            let t_max = ode_range(ab.a);
            assert_eq!(t_max, ab.t_max);

            // the ODE bound dominates the characteristic-function gap on its range
            for i in 0..=400 {
                let t = -t_max + 2.0 * t_max * i as f64 / 400.0;
                let gap = dist.diff(t).norm();
                let bound = ode_bound(ab.a, ab.b_grid_max, t).unwrap();
                assert!(gap <= bound + 1e-14, "n={n} p={p} t={t}: {gap} > {bound}");
            }

            let sb = smoothing_bound(dist, t_max, normal_density_bound()).unwrap();
            assert!(dist.kolmogorov <= sb.value, "n={n} p={p}");
            assert!(sb.quadrature_error < 1e-6);
            assert_eq!(sb.propagated_std_error, 0.0);
            assert!(dist.kolmogorov <= st_bound(ab.a, ab.b_grid_max).unwrap(), "n={n} p={p}");
        }
    }
}

#[test]
fn ode_bound_refuses_outside_range() {
    assert!(matches!(
        ode_bound(0.5, 0.1, 1.0 + 1e-9),
        Err(subgraph_stein::Error::OutOfRange { .. })
    ));
    assert!(ode_bound(0.5, 0.1, 1.0).is_ok());
}

#[test]
fn exact_kolmogorov_brackets_cdf_gaps() {
    // independent check: scan a fine grid plus both sides of every atom
    let g = PatternGraph::preset("triangle").unwrap();
    let ex = ExactModel::new(5, 0.5, &g).unwrap();
    let dist = ex.exact_distribution().unwrap();
    let mut best: f64 = 0.0;
    for a in &dist.atoms {
        for x in [a.w, a.w - 1e-9] {
            best = best.max((dist.cdf(x) - std_normal_cdf(x)).abs());
        }
    }
    for i in 0..=2000 {
        let x = -6.0 + 12.0 * i as f64 / 2000.0;
        assert!((dist.cdf(x) - std_normal_cdf(x)).abs() <= dist.kolmogorov + 1e-12);
    }
    assert!((best - dist.kolmogorov).abs() < 1e-8);
}
