use std::collections::BTreeMap;

use itertools::Itertools;
use proptest::prelude::*;
use subgraph_stein::copies::{enumerate_copies, CopyIndex};
use subgraph_stein::pattern::*;

fn random_graph() -> impl Strategy<Value = PatternGraph> {
    (2usize..=7).prop_flat_map(|v| {
        let pairs: Vec<(usize, usize)> = (0..v).tuple_combinations().collect();
        let k = pairs.len();
        prop::collection::vec(any::<bool>(), k).prop_filter_map("needs an edge", move |keep| {
            let edges: Vec<(usize, usize)> =
                pairs.iter().zip(&keep).filter(|(_, &b)| b).map(|(&e, _)| e).collect();
            if edges.is_empty() {
                None
            } else {
                PatternGraph::new(v, edges).ok()
            }
        })
    })
}

fn isomorphic_brute(a: &PatternGraph, b: &PatternGraph) -> bool {
    if a.vertex_count() != b.vertex_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    let v = a.vertex_count();
    let mut eb: Vec<(usize, usize)> = b.edges().to_vec();
    eb.sort_unstable();
    (0..v).permutations(v).any(|perm| {
        let mut ea: Vec<(usize, usize)> = a
            .edges()
            .iter()
            .map(|&(x, y)| (perm[x].min(perm[y]), perm[x].max(perm[y])))
            .collect();
        ea.sort_unstable();
        ea == eb
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn canonical_code_ignores_labels(g in random_graph(), seed in any::<u64>()) {
        let v = g.vertex_count();
        let mut perm: Vec<usize> = (0..v).collect();
        // deterministic shuffle from the seed
        let mut s = seed;
        for i in (1..v).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let h = g.relabel(&perm).unwrap();
        prop_assert_eq!(canonicalize(&g).unwrap(), canonicalize(&h).unwrap());
        prop_assert_eq!(automorphism_count(&g), automorphism_count(&h));
    }
}

proptest! {
    #[test]
    fn psi_monotone_and_below_n2p(
        name in prop::sample::select(PRESETS.to_vec()),
        n in 4usize..500,
        p in 0.0001f64..1.0,
        dp in 0.0f64..0.5,
    ) {
        let g = PatternGraph::preset(name).unwrap();
        let cat = subgraph_catalog(&g).unwrap();
        let lo = psi(n, p, &cat).unwrap();
        let p2 = (p + dp).min(1.0);
        let hi = psi(n, p2, &cat).unwrap();
        for (a, b) in lo.per_class.iter().zip(&hi.per_class) {
            prop_assert!(a <= b);
        }
        prop_assert!(lo.psi_min <= hi.psi_min);
        prop_assert!(lo.psi_min <= (n * n) as f64 * p * (1.0 + 1e-12));
    }

    #[test]
    fn code_equality_is_isomorphism(a in random_graph(), b in random_graph()) {
        prop_assume!(a.vertex_count() <= 6 && b.vertex_count() <= 6);
        let a = a.stripped();
        let b = b.stripped();
        prop_assert_eq!(canonicalize(&a).unwrap() == canonicalize(&b).unwrap(), isomorphic_brute(&a, &b));
    }
}

#[test]
fn catalog_matches_brute_force_for_small_patterns() {
    let pairs: Vec<(usize, usize)> = (0..4).tuple_combinations().collect();
    for mask in 1u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = PatternGraph::new(4, edges.clone()).unwrap().stripped();
        // brute force: every edge subset, deduplicated by explicit isomorphism
        let mut reps: Vec<(PatternGraph, u64)> = vec![];
        for sub in 1u64..(1 << g.edge_count()) {
            let h = g.edge_subgraph(sub).unwrap();
            match reps.iter_mut().find(|(r, _)| isomorphic_brute(r, &h)) {
                Some((_, c)) => *c += 1,
                None => reps.push((h, 1)),
            }
        }
        let cat = subgraph_catalog(&g).unwrap();
        assert_eq!(cat.len(), reps.len(), "{g}");
        for (h, c) in &reps {
            let i = cat.find(h).expect("class present");
            assert_eq!(cat.classes()[i].multiplicity, *c);
        }
        assert!(isomorphic_brute(&cat.classes().last().unwrap().representative, &g));
    }
}

fn brute_neighbors(idx: &CopyIndex) -> BTreeMap<usize, Vec<u32>> {
    (0..idx.len())
        .map(|j| {
            let nb = (0..idx.len())
                .filter(|&k| k != j && idx.copy(j).iter().any(|e| idx.copy(k).contains(e)))
                .map(|k| k as u32)
                .collect();
            (j, nb)
        })
        .collect()
}

#[test]
fn neighborhoods_symmetric_up_to_n8() {
    for name in ["triangle", "path2", "c4"] {
        let g = PatternGraph::preset(name).unwrap();
        for n in g.vertex_count()..=8 {
            let idx = enumerate_copies(n, &g).unwrap();
            let brute = brute_neighbors(&idx);
            for j in 0..idx.len() {
                assert_eq!(idx.neighbors(j), brute[&j].as_slice());
                for &k in idx.neighbors(j) {
                    assert!(idx.neighbors(k as usize).contains(&(j as u32)));
                }
            }
        }
    }
}
