mod support;

use std::collections::BTreeSet;

use bleproof_core::slicer::{default_anchor_tokens, slice, slice_app, DEFAULT_DEPTH_CAP};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use support::graphs::{brute_force, random_graph, sliced, wrapper_app, WRAPPER_METHODS};

#[test]
fn twenty_random_graphs_match_brute_force() {
    let mut rng = StdRng::seed_from_u64(0x511ce);
    for i in 0..20 {
        let g = random_graph(&mut rng, 50);
        assert!(g.names.len() <= 50);
        for cap in [1, 2, DEFAULT_DEPTH_CAP, 64] {
            assert_eq!(sliced(&g, cap), brute_force(&g, cap), "graph {i} cap {cap}");
        }
    }
}

#[test]
fn slice_order_is_distance_then_name() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 50);
        let s = slice("app", &g.graph, &g.anchors, 64).unwrap();
        let keys: Vec<(usize, &str)> = s.methods.iter().map(|m| (m.distance, m.name.as_str())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(s.anchors, g.anchors.iter().cloned().collect::<Vec<_>>());
    }
}

#[test]
fn encryption_wrapper_layers_are_all_sliced() {
    let (s, warnings) = slice_app(&wrapper_app(), &default_anchor_tokens(), DEFAULT_DEPTH_CAP).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(s.method_names(), WRAPPER_METHODS);
    assert_eq!(s.anchors, ["SecureChannel.encryptAndWrite"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slicing_matches_brute_force(seed in any::<u64>(), cap in 1usize..12) {
        let g = random_graph(&mut StdRng::seed_from_u64(seed), 30);
        prop_assert_eq!(sliced(&g, cap), brute_force(&g, cap));
    }

    #[test]
    fn deeper_caps_only_add_members(seed in any::<u64>(), cap in 1usize..8) {
        let g = random_graph(&mut StdRng::seed_from_u64(seed), 30);
        let small: BTreeSet<String> = sliced(&g, cap).into_keys().collect();
        let big: BTreeSet<String> = sliced(&g, cap + 1).into_keys().collect();
        prop_assert!(small.is_subset(&big));
    }
}
