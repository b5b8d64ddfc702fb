mod common;

use std::collections::{BTreeSet, HashSet};

use common::{brute_force_walks, random_graph, reachability, Edge, Walk, SMALL};
use informledge::{
    cone_level, encode_signature, retrieve_threads, thread_stats, Graph, InferenceRule, KnnId,
    KnowledgeThread, LinkProperties, LinkProposal, Performance, PerformancePolarity,
    RetrievalOptions, Retriever, Sign, Validation,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every (P21, P22, P23) configuration, each axis absent / + / -.
fn all_configurations() -> Vec<[Option<Sign>; 3]> {
    let choices = [None, Some(Sign::Positive), Some(Sign::Negative)];
    let mut out = Vec::new();
    for a in choices {
        for b in choices {
            for c in choices {
                out.push([a, b, c]);
            }
        }
    }
    out
}

#[test]
fn signature_is_injective_and_follows_the_bit_layout() {
    let configs = all_configurations();
    assert_eq!(configs.len(), 27);
    let mut seen = HashSet::new();
    for config in configs {
        let polarities = [
            PerformancePolarity::ADDITIVE.axis,
            PerformancePolarity::INCLUSIVE.axis,
            PerformancePolarity::INTEGRATIVE.axis,
        ]
        .into_iter()
        .zip(config)
        .filter_map(|(axis, sign)| sign.map(|s| PerformancePolarity::new(axis, s)));
        let perf = Performance::from_polarities(polarities).unwrap();
        let props = LinkProperties::new(KnnId(1), KnnId(2), perf, 1).unwrap();
        let bits = encode_signature(&props).bits();

        let field = |s: Option<Sign>| match s {
            None => 0u8,
            Some(Sign::Positive) => 1,
            Some(Sign::Negative) => 2,
        };
        let expected = field(config[0]) | field(config[1]) << 2 | field(config[2]) << 4;
        assert_eq!(bits, expected);
        assert_eq!(bits & 0b1100_0000, 0);
        assert!(seen.insert(bits), "signature {bits:#010b} repeated");
        assert_eq!(
            Performance::from_signature(encode_signature(&props)),
            Some(perf)
        );
    }
    // The example with all three axes set.
    let mixed = Performance::from_polarities([
        PerformancePolarity::SUBTRACTIVE,
        PerformancePolarity::INCLUSIVE,
        PerformancePolarity::DIFFERENTIATIVE,
    ])
    .unwrap();
    assert_eq!(mixed.signature().bits(), 0b0010_0110);
    // Only those 27 bytes decode.
    let decodable = (0..=255u8)
        .filter(|b| Performance::from_signature(informledge::LinkSignature(*b)).is_some())
        .count();
    assert_eq!(decodable, 27);
}

fn edges_of(retriever: &Retriever<'_>) -> Vec<Edge> {
    retriever
        .graph()
        .links()
        .chain(retriever.transient_links())
        .map(Edge::from)
        .collect()
}

fn as_walks(threads: &[KnowledgeThread]) -> Vec<Walk> {
    let mut walks: Vec<Walk> = threads
        .iter()
        .map(|t| Walk {
            nodes: t.nodes().to_vec(),
            links: t.links().to_vec(),
        })
        .collect();
    walks.sort();
    walks
}

#[test]
fn retrieval_matches_brute_force_with_unnatural_links() {
    let mut r = rng(7);
    for _ in 0..150 {
        let g = random_graph(&mut r, &SMALL, common::inference_heavy_performance);
        let retriever = Retriever::new(&g, true);
        let edges = edges_of(&retriever);
        for seed in g.knns().map(|k| k.id) {
            for maximal_only in [true, false] {
                for max_depth in [2, 4, 16] {
                    let options = RetrievalOptions {
                        max_depth,
                        include_unnatural: true,
                        maximal_only,
                    };
                    let got = retriever.threads(seed, &options).unwrap();
                    let want = brute_force_walks(&edges, seed, max_depth, maximal_only);
                    assert_eq!(as_walks(&got), want);
                }
            }
        }
    }
}

#[test]
fn retrieval_order_is_lexicographic_by_temporal_stamps() {
    let mut r = rng(11);
    for _ in 0..100 {
        let g = random_graph(&mut r, &SMALL, common::random_performance);
        for seed in g.knns().map(|k| k.id) {
            let options = RetrievalOptions {
                maximal_only: false,
                ..Default::default()
            };
            let threads = retrieve_threads(&g, seed, &options).unwrap();
            let keys: Vec<Vec<u64>> = threads
                .iter()
                .map(|t| {
                    t.links()
                        .iter()
                        .map(|id| g.link(*id).unwrap().temporal())
                        .collect()
                })
                .collect();
            assert!(keys.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn inclusive_transitivity_matches_closure_oracle() {
    let mut r = rng(3);
    let spec = common::GraphSpec {
        max_nodes: 8,
        max_links: 16,
        domains: 2,
    };
    for _ in 0..300 {
        let g = random_graph(&mut r, &spec, common::inference_heavy_performance);
        let n = g.knn_count();
        let inclusive_edges: Vec<(KnnId, KnnId)> = g
            .links()
            .filter(|l| l.performance().contains(PerformancePolarity::INCLUSIVE))
            .map(|l| (l.source(), l.destination()))
            .collect();
        let reach = reachability(n, inclusive_edges.iter().copied());
        let inclusive = Performance::single(PerformancePolarity::INCLUSIVE);

        let mut want = BTreeSet::new();
        for &(a, b) in &inclusive_edges {
            for c in 1..=n {
                let c = KnnId(c as u64);
                let identical_exists = g.links().any(|l| {
                    l.source() == a && l.destination() == c && l.performance() == inclusive
                });
                if reach[b.0 as usize][c.0 as usize] && c != a && !identical_exists {
                    want.insert((a, c));
                }
            }
        }
        let got: BTreeSet<(KnnId, KnnId)> = g
            .infer_unnatural_links()
            .iter()
            .filter(|p| p.rule == InferenceRule::InclusiveTransitivity)
            .map(|p| (p.candidate.source(), p.candidate.destination()))
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn inference_reaches_a_fixed_point_after_materializing() {
    let mut r = rng(5);
    for _ in 0..200 {
        let mut g = random_graph(&mut r, &SMALL, common::inference_heavy_performance);
        let first = g.infer_unnatural_links();
        let mut rejected = Vec::new();
        for p in &first {
            if g.validate_link(p).unwrap().is_accepted() {
                g.materialize(p).unwrap();
            } else {
                rejected.push(*p);
            }
        }
        g.audit().unwrap();
        let second = g.infer_unnatural_links();
        assert_eq!(second, rejected);
        // Output ordering contract.
        let keys: Vec<_> = first
            .iter()
            .map(|p| {
                (
                    p.candidate.source(),
                    p.candidate.destination(),
                    p.rule.name(),
                )
            })
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn validation_unordered_pair_rule_exhaustive() {
    // Three nodes a, b, c; every ordered pair carries no link or one of five
    // performance sets. The proposal under test is a -> c, inclusive.
    let options: [Option<Performance>; 5] = [
        None,
        Some(Performance::single(PerformancePolarity::SUBTRACTIVE)),
        Some(Performance::single(PerformancePolarity::EXCLUSIVE)),
        Some(Performance::single(PerformancePolarity::INCLUSIVE)),
        Some(Performance::single(PerformancePolarity::ADDITIVE)),
    ];
    let pairs = [(1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)];
    let mut checked = 0;
    for code in 0..5usize.pow(pairs.len() as u32) {
        let mut g = Graph::new();
        for label in ["a", "b", "c"] {
            g.add_knn(label, "d", &[]).unwrap();
        }
        let mut rest = code;
        let mut placed = Vec::new();
        for &(from, to) in &pairs {
            if let Some(perf) = options[rest % 5] {
                g.add_link(KnnId(from), KnnId(to), perf).unwrap();
                placed.push((from, to, perf));
            }
            rest /= 5;
        }
        let proposal = LinkProposal::new(
            KnnId(1),
            KnnId(3),
            Performance::single(PerformancePolarity::INCLUSIVE),
            InferenceRule::InclusiveTransitivity,
        )
        .unwrap();

        let between = |p: &&(u64, u64, Performance)| (p.0, p.1) == (1, 3) || (p.0, p.1) == (3, 1);
        let identical = placed
            .iter()
            .any(|p| (p.0, p.1) == (1, 3) && p.2 == proposal.candidate.performance);
        let contradicted = placed.iter().filter(between).any(|p| {
            p.2.contains(PerformancePolarity::SUBTRACTIVE)
                || p.2.contains(PerformancePolarity::EXCLUSIVE)
        });
        let expect_accept = !identical && !contradicted;
        let got = g.validate_link(&proposal).unwrap();
        assert_eq!(
            got == Validation::Accepted,
            expect_accept,
            "links {placed:?} gave {got:?}"
        );
        checked += 1;
    }
    assert_eq!(checked, 15_625);
}

#[test]
fn cone_level_matches_reachability_matrix() {
    let mut r = rng(13);
    for _ in 0..200 {
        let g = random_graph(&mut r, &SMALL, common::random_performance);
        let n = g.knn_count();
        let reach = reachability(n, g.links().map(|l| (l.source(), l.destination())));
        for (i, row) in reach.iter().enumerate().skip(1) {
            let expected = (1..=n).filter(|&j| j != i && row[j]).count();
            assert_eq!(cone_level(&g, KnnId(i as u64)).unwrap(), expected);
        }
    }
}

fn reachable_edges(g: &Graph, seed: KnnId) -> BTreeSet<u64> {
    let n = g.knn_count();
    let reach = reachability(n, g.links().map(|l| (l.source(), l.destination())));
    g.links()
        .filter(|l| l.source() == seed || reach[seed.0 as usize][l.source().0 as usize])
        .map(|l| l.id.0)
        .collect()
}

#[test]
fn seed_containment_in_acyclic_graphs() {
    // Links only go from lower to higher ids. When A links straight to B,
    // A's reachable edge set strictly contains B's, and each maximal
    // thread from B extends to a distinct maximal thread from A.
    let mut r = rng(17);
    let mut pairs = 0;
    for _ in 0..300 {
        let mut g = random_graph(&mut r, &SMALL, |_| Performance::EMPTY);
        let n = g.knn_count() as u64;
        let mut acyclic = Graph::new();
        for knn in g.knns() {
            acyclic.add_knn(&knn.label, &knn.domain, &[]).unwrap();
        }
        for l in g.links() {
            let (a, b) = (
                l.source().min(l.destination()),
                l.source().max(l.destination()),
            );
            let _ = acyclic.add_link(a, b, l.performance());
        }
        g = acyclic;
        let edges: Vec<Edge> = g.links().map(Edge::from).collect();
        let options = RetrievalOptions::default();
        for a in 1..=n {
            for b in 1..=n {
                let (a, b) = (KnnId(a), KnnId(b));
                let ea = reachable_edges(&g, a);
                let eb = reachable_edges(&g, b);
                if !(ea.is_superset(&eb) && ea.len() > eb.len()) {
                    continue;
                }
                let direct = g.links().any(|l| l.source() == a && l.destination() == b);
                if !direct {
                    continue;
                }
                pairs += 1;
                let count_a = thread_stats(&g, a, &options).unwrap().thread_count;
                let count_b = thread_stats(&g, b, &options).unwrap().thread_count;
                assert!(count_a >= count_b);
                assert_eq!(count_a, brute_force_walks(&edges, a, 16, true).len());
                assert_eq!(count_b, brute_force_walks(&edges, b, 16, true).len());
            }
        }
    }
    assert!(pairs > 100, "only {pairs} containment pairs generated");
}

#[test]
fn cross_plane_equals_domain_inequality() {
    let mut r = rng(19);
    for _ in 0..200 {
        let g = random_graph(&mut r, &SMALL, common::random_performance);
        for l in g.links() {
            let a = g.knn(l.source()).unwrap();
            let b = g.knn(l.destination()).unwrap();
            assert_eq!(l.cross_plane, a.domain != b.domain);
        }
    }
}

proptest! {
    #[test]
    fn append_link_invariants(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, &SMALL, common::random_performance);
        let start = KnnId(1);
        for thread in retrieve_threads(&g, start, &RetrievalOptions { maximal_only: false, ..Default::default() }).unwrap() {
            let distinct: HashSet<_> = thread.nodes().iter().collect();
            prop_assert_eq!(distinct.len(), thread.nodes().len());
            prop_assert_eq!(thread.strength(), distinct.len() - 1);
            for l in g.links() {
                match thread.append_link(l) {
                    Ok(longer) => {
                        prop_assert_eq!(longer.strength(), thread.strength() + 1);
                        prop_assert_eq!(l.source(), thread.endpoint());
                        prop_assert!(!thread.visits(l.destination()));
                    }
                    Err(_) => prop_assert!(
                        l.source() != thread.endpoint() || thread.visits(l.destination())
                    ),
                }
            }
        }
    }

    #[test]
    fn audit_holds_after_random_operations(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let mut g = random_graph(&mut r, &SMALL, common::inference_heavy_performance);
        prop_assert!(g.audit().is_ok());
        for p in g.infer_unnatural_links() {
            let _ = g.materialize(&p);
        }
        prop_assert!(g.audit().is_ok());
        common::add_random_links(&mut r, &mut g, 5);
        prop_assert!(g.audit().is_ok());
        let before_strip: Vec<_> = g.links().filter(|l| l.kind == informledge::LinkKind::Natural).copied().collect();
        g.strip_unnatural();
        prop_assert!(g.audit().is_ok());
        prop_assert_eq!(g.links().copied().collect::<Vec<_>>(), before_strip);
        let stamps: HashSet<u64> = g.links().map(|l| l.temporal()).collect();
        prop_assert_eq!(stamps.len(), g.link_count());
    }
}
