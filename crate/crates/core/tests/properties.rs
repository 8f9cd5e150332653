//! Property tests over randomly generated graphs, walks, and value
//! sequences.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use exprank_core::kg::{EntityIdx, GraphBuilder, KnowledgeGraph};
use exprank_core::path::{decompose_path, Path, PathEdge};
use exprank_core::props::{etd_from_unique, ewma, min_max_normalize, sen, EtdContext};

/// A random layered graph (user -> products -> attributes -> products) and
/// one random valid user-product walk over it. The walk shape is
/// `u -used-> p0 -has-> a_s [-near-> a_{s+1}]* <-has- p_end`.
fn random_graph_and_walk(seed: u64) -> (KnowledgeGraph, Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_products = rng.random_range(3..=8usize);
    let n_attrs = rng.random_range(2..=5usize);
    let extra_hops = rng.random_range(0..=2usize.min(n_attrs - 1));
    let start = rng.random_range(0..n_attrs - extra_hops);
    let end_attr = start + extra_hops;
    let end_product = rng.random_range(1..n_products);

    let mut b = GraphBuilder::new();
    b.declare_entity("u", "user").unwrap();
    for i in 0..n_products {
        b.declare_entity(&format!("p{i}"), "product").unwrap();
    }
    for i in 0..n_attrs {
        b.declare_entity(&format!("a{i}"), "attr").unwrap();
    }
    // the walk's own triples
    b.add_triple("u", "used", "p0").unwrap();
    b.add_triple("p0", "has", &format!("a{start}")).unwrap();
    for a in start..end_attr {
        b.add_triple(&format!("a{a}"), "near", &format!("a{}", a + 1)).unwrap();
    }
    b.add_triple(&format!("p{end_product}"), "has", &format!("a{end_attr}")).unwrap();
    // noise triples
    for i in 0..n_products {
        for j in 0..n_attrs {
            if rng.random_bool(0.4) {
                b.add_triple(&format!("p{i}"), "has", &format!("a{j}")).unwrap();
            }
        }
    }
    let g = b.finish().unwrap();

    let entity = |id: String| g.entity(&id).unwrap();
    let used = g.relation("used").unwrap();
    let has = g.relation("has").unwrap();
    let mut nodes = vec![entity("u".into()), entity("p0".into()), entity(format!("a{start}"))];
    let mut edges = vec![
        PathEdge { relation: used, forward: true },
        PathEdge { relation: has, forward: true },
    ];
    for a in start..end_attr {
        nodes.push(entity(format!("a{}", a + 1)));
        edges.push(PathEdge { relation: g.relation("near").unwrap(), forward: true });
    }
    nodes.push(entity(format!("p{end_product}")));
    edges.push(PathEdge { relation: has, forward: false });

    let path = Path::new(nodes, edges).unwrap();
    path.validate(&g).expect("constructed walk must validate");
    (g, path)
}

proptest! {
    /// The shared entity of any valid walk is its penultimate node, and the
    /// path type is the last pattern element.
    #[test]
    fn decomposition_pins_shared_entity_and_type(seed in 0u64..1000) {
        let (g, path) = random_graph_and_walk(seed);
        let d = decompose_path(&path, &g).unwrap();
        let nodes = path.nodes();
        prop_assert_eq!(d.shared_entity, nodes[nodes.len() - 2]);
        prop_assert_eq!(d.recommendation_relation, path.path_type());
        let last_pattern = path.pattern().last().unwrap();
        prop_assert_eq!(path.path_type(), last_pattern);
        prop_assert_eq!(d.user, nodes[0]);
    }

    /// Smoothed values stay inside the input range and preserve order for
    /// sorted inputs; normalization maps extremes to 0 and 1.
    #[test]
    fn smoothing_stays_in_bounds(
        mut values in prop::collection::vec(0.0f64..1e9, 1..60),
        beta in 0.0f64..=1.0,
    ) {
        values.sort_by(f64::total_cmp);
        let raw = ewma(&values, beta);
        let lo = values[0];
        let hi = values[values.len() - 1];
        for w in raw.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-9);
        }
        for &v in &raw {
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
        let normalized = min_max_normalize(&raw);
        for &v in &normalized {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(sen(v) + v, 1.0);
        }
    }

    /// Diversity is a coverage function: adding an uncovered type always
    /// gains exactly 1/min(k, total), and a covered type gains nothing.
    #[test]
    fn diversity_marginal_gains_are_flat(
        seed in 0u64..500,
        k in 1usize..12,
        n_types in 1usize..8,
    ) {
        let mut b = GraphBuilder::new();
        b.declare_entity("u", "user").unwrap();
        b.declare_entity("p", "product").unwrap();
        for t in 0..n_types {
            b.add_triple("u", &format!("r{t}"), "p").unwrap();
        }
        let g = b.finish().unwrap();
        let all: Vec<_> = (0..n_types).map(|t| g.relation(&format!("r{t}")).unwrap()).collect();
        let ctx = EtdContext::new(all.iter().copied().collect(), k).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut covered = std::collections::BTreeSet::new();
        let mut value = 0.0;
        for _ in 0..k {
            let next = all[rng.random_range(0..all.len())];
            let before = etd_from_unique(covered.len(), &ctx);
            prop_assert_eq!(before, value);
            let is_new = covered.insert(next);
            let after = etd_from_unique(covered.len(), &ctx);
            let gain = after - before;
            if is_new {
                let expected = 1.0 / ctx.denominator() as f64;
                prop_assert!((gain - expected).abs() < 1e-12);
            } else {
                prop_assert_eq!(gain, 0.0);
            }
            prop_assert!(after >= before, "monotone");
            value = after;
        }
    }
}

/// Loading identical records twice produces an identical graph.
#[test]
fn graph_loading_is_idempotent_on_random_data() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..20usize);
        let mut records: Vec<(String, String, String)> = Vec::new();
        for i in 0..n {
            let h = format!("p{}", rng.random_range(0..5u8));
            let t = format!("a{}", rng.random_range(0..4u8));
            records.push((h, format!("r{}", i % 3), t));
        }
        let build = |times: usize| {
            let mut b = GraphBuilder::new();
            b.declare_entity("u", "user").unwrap();
            for _ in 0..times {
                for i in 0..5 {
                    b.declare_entity(&format!("p{i}"), "product").unwrap();
                }
                for i in 0..4 {
                    b.declare_entity(&format!("a{i}"), "attr").unwrap();
                }
                for (h, r, t) in &records {
                    b.add_triple(h, r, t).unwrap();
                }
            }
            b.finish().unwrap()
        };
        assert_eq!(build(1), build(2));
    }
}

/// Exercising EntityIdx ordering used throughout: indices are assigned in
/// declaration order.
#[test]
fn entity_indices_follow_declaration_order() {
    let mut b = GraphBuilder::new();
    let first = b.declare_entity("z-user", "user").unwrap();
    let second = b.declare_entity("a-product", "product").unwrap();
    assert!(first < second);
    let again: EntityIdx = b.declare_entity("z-user", "user").unwrap();
    assert_eq!(first, again);
}
