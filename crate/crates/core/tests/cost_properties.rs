use std::collections::HashMap;

use proptest::prelude::*;
use q2o_core::costmodel::{
    estimate_cardinality, plan_cost_cout, plan_cost_logproduct, RelationSubset,
};
use q2o_core::joingraph::{connected_components, parse_join_graph};
use q2o_core::testing::{chain3, random_graph, Topology};
use q2o_core::JoinGraphF64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent evaluator keyed by alias strings.
fn brute_card(g: &JoinGraphF64, members: &[&str]) -> f64 {
    let cards: HashMap<&str, f64> = g
        .relations()
        .iter()
        .map(|r| (r.alias.as_str(), r.cardinality))
        .collect();
    let mut rows: f64 = members.iter().map(|m| cards[m]).product();
    for e in g.edges() {
        let (l, r) = (g.alias(e.left), g.alias(e.right));
        if members.contains(&l) && members.contains(&r) {
            rows *= e.selectivity;
        }
    }
    rows
}

fn subset_of(g: &JoinGraphF64, members: &[&str]) -> RelationSubset {
    RelationSubset::from_positions(members.iter().map(|a| g.position(a).unwrap()))
}

#[test]
fn chain3_matches_brute_force() {
    let g = chain3();
    for members in [
        vec!["A"],
        vec!["A", "B"],
        vec!["A", "C"],
        vec!["B", "C"],
        vec!["A", "B", "C"],
    ] {
        let est = estimate_cardinality(&g, subset_of(&g, &members)).unwrap();
        let brute = brute_card(&g, &members);
        assert!((est - brute).abs() <= 1e-12 * brute, "{members:?}");
    }
    // brute-force C_out over all six orders: optima ABC, BAC, BCA, CBA at 200
    let orders = [
        (["A", "B", "C"], 200.0),
        (["A", "C", "B"], 300.0),
        (["B", "A", "C"], 200.0),
        (["B", "C", "A"], 200.0),
        (["C", "A", "B"], 300.0),
        (["C", "B", "A"], 200.0),
    ];
    for (order, expected) in orders {
        let brute = brute_card(&g, &order[..2]) + brute_card(&g, &order);
        assert!((brute - expected).abs() < 1e-9);
        assert!((plan_cost_cout(&g, &order).unwrap() - expected).abs() < 1e-9);
    }
}

fn graph_strategy() -> impl Strategy<Value = (JoinGraphF64, u64)> {
    (any::<u64>(), 1usize..9, 0usize..4).prop_map(|(seed, n, t)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (random_graph(&mut rng, n, Topology::ALL[t]), seed)
    })
}

proptest! {
    #[test]
    fn cardinality_is_order_independent((g, seed) in graph_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut members: Vec<&str> = g.aliases().filter(|_| rng.gen_bool(0.6)).collect();
        prop_assume!(!members.is_empty());
        let a = estimate_cardinality(&g, subset_of(&g, &members)).unwrap();
        members.shuffle(&mut rng);
        let b = brute_card(&g, &members);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
    }

    #[test]
    fn components_multiply(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: JoinGraphF64 = random_graph(&mut rng, n, Topology::Random);
        // drop every edge touching the last relation to force a second component
        let last = a.alias(n - 1).to_string();
        let text = a.to_canonical_json();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["joins"].as_array_mut().unwrap().retain(|j| j["left"] != last.as_str() && j["right"] != last.as_str());
        let g: JoinGraphF64 = parse_join_graph(&doc.to_string()).unwrap();
        let comps = connected_components(&g);
        prop_assert!(comps.len() >= 2);
        let s1: Vec<&str> = comps[0].iter().map(String::as_str).collect();
        let s2: Vec<&str> = comps[1].iter().map(String::as_str).collect();
        let both: Vec<&str> = s1.iter().chain(s2.iter()).copied().collect();
        let joint = estimate_cardinality(&g, subset_of(&g, &both)).unwrap();
        let split = estimate_cardinality(&g, subset_of(&g, &s1)).unwrap()
            * estimate_cardinality(&g, subset_of(&g, &s2)).unwrap();
        prop_assert!((joint - split).abs() <= 1e-9 * joint);
    }

    #[test]
    fn cout_bounds_and_logproduct((g, seed) in graph_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<String> = g.aliases().map(str::to_string).collect();
        order.shuffle(&mut rng);
        let cout = plan_cost_cout(&g, &order).unwrap();
        let lp = plan_cost_logproduct(&g, &order).unwrap();
        if g.len() >= 2 {
            let full = estimate_cardinality(&g, RelationSubset::full(g.len())).unwrap();
            prop_assert!(cout >= full * (1.0 - 1e-12));
        } else {
            prop_assert_eq!(cout, 0.0);
        }
        let refs: Vec<&str> = order.iter().map(String::as_str).collect();
        let expected: f64 = (2..=refs.len()).map(|s| brute_card(&g, &refs[..s]).log2()).sum();
        prop_assert!((lp - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }

    #[test]
    fn canonical_round_trip((g, _) in graph_strategy()) {
        let text = g.to_canonical_json();
        let again: JoinGraphF64 = parse_join_graph(&text).unwrap();
        prop_assert_eq!(again.to_canonical_json(), text);
        for r in again.relations() {
            prop_assert!(r.cardinality >= 1.0);
        }
        for e in again.edges() {
            prop_assert!(e.selectivity > 0.0 && e.selectivity <= 1.0);
        }
    }
}
