use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use subgraph_stein::copies::{enumerate_copies, CopyCounter, EdgeUniverse};
use subgraph_stein::exact::ExactModel;
use subgraph_stein::mc::*;
use subgraph_stein::model::SubgraphModel;
use subgraph_stein::pattern::PatternGraph;
use subgraph_stein::rng::{replicate_rng, GnpSampler};

fn triangle() -> PatternGraph {
    PatternGraph::preset("triangle").unwrap()
}

#[test]
fn batches_are_standardized() {
    let b = sample_w(20, 0.3, &triangle(), 100_000, 7).unwrap();
    let m = b.len() as f64;
    assert!(b.mean().abs() <= 4.0 / m.sqrt(), "{}", b.mean());
    assert!((b.variance() - 1.0).abs() <= 10.0 / m.sqrt(), "{}", b.variance());
    assert!(normalization_check(&b).passed);
}

#[test]
fn sample_variance_within_four_standard_errors() {
    let b = sample_w(30, 0.3, &triangle(), 100_000, 11).unwrap();
    let m = b.len() as f64;
    let mu = b.mean();
    let m4 = b.values.iter().map(|v| (v - mu).powi(4)).sum::<f64>() / m;
    let se = ((m4 - b.variance().powi(2)) / m).sqrt();
    assert!((b.variance() - 1.0).abs() <= 4.0 * se, "var {} se {se}", b.variance());
}

#[test]
fn same_seed_same_bits() {
    let a = sample_w(15, 0.4, &triangle(), 5000, 99).unwrap();
    let b = sample_w(15, 0.4, &triangle(), 5000, 99).unwrap();
    assert_eq!(
        a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(kolmogorov_estimate(&a).unwrap(), kolmogorov_estimate(&b).unwrap());
    let c = sample_w(15, 0.4, &triangle(), 5000, 100).unwrap();
    assert_ne!(a.values, c.values);
}

#[test]
fn thread_count_does_not_change_samples() {
    let g = triangle();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_w(12, 0.5, &g, 9000, 5).unwrap())
    };
    let one = run(1);
    assert_eq!(one.values, run(3).values);
    // and each replicate is exactly what its own stream gives, drawn serially
    let model = SubgraphModel::new(12, 0.5, &g).unwrap();
    let sampler = GnpSampler::new(EdgeUniverse::new(12), 0.5).unwrap();
    let counter = CopyCounter::new(&g);
    for r in [0usize, 1, 2047, 2048, 8999] {
        let c = sampler.sample(&mut replicate_rng(5, r as u64));
        assert_eq!(one.values[r], model.standardize(counter.count(&c)));
    }
}

#[test]
fn copy_counts_average_to_expected() {
    let g = triangle();
    let idx = enumerate_copies(20, &g).unwrap();
    let sampler = GnpSampler::new(idx.universe(), 0.3).unwrap();
    let reps = 10_000;
    let counts: Vec<f64> = (0..reps)
        .map(|r| idx.count_present(&sampler.sample(&mut replicate_rng(3, r))) as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let expect = idx.len() as f64 * 0.027;
    assert!((mean - expect).abs() <= 4.0 * (var / reps as f64).sqrt());
}

#[test]
fn gaussian_null_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let values: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b = SampleBatch::new(
        values,
        BatchMeta {
            n: 0,
            p: 0.5,
            pattern: "normal".into(),
            seed: 2024,
            m: 100_000,
        },
    )
    .unwrap();
    let (d, eps) = kolmogorov_estimate(&b).unwrap();
    assert!(d <= eps, "{d} > {eps}");
}

#[test]
fn small_n_histogram_and_distance_match_oracle() {
    let g = triangle();
    let m = 1_000_000;
    let b = sample_w(4, 0.5, &g, m, 314).unwrap();
    let exact = ExactModel::new(4, 0.5, &g).unwrap();
    let dist = exact.exact_distribution().unwrap();
    let eps = dkw_epsilon(m);
    let mut sorted = b.values.clone();
    sorted.sort_by(f64::total_cmp);
    for a in &dist.atoms {
        let below = sorted.partition_point(|&x| x <= a.w + 1e-9) as f64 / m as f64;
        assert!((below - dist.cdf(a.w)).abs() <= eps);
    }
    let (d_hat, _) = kolmogorov_estimate(&b).unwrap();
    assert!((d_hat - dist.kolmogorov).abs() <= eps, "{d_hat} vs {}", dist.kolmogorov);

    let cf = empirical_cf(&b, &[1.0]).unwrap()[0];
    let exact_cf = exact.exact_cf(1.0).unwrap();
    assert!((cf.value - exact_cf).norm() <= 4.0 / (m as f64).sqrt());
    assert!(cf.std_error <= 1.0 / (m as f64).sqrt());
}

#[test]
fn sparse_sampler_path_standardizes() {
    let n = 60;
    let p = (n as f64).powf(-0.7);
    let b = sample_w(n, p, &triangle(), 50_000, 17).unwrap();
    let chk = normalization_check(&b);
    assert!(chk.passed, "{chk:?}");
}
