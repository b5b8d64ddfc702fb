#![allow(dead_code)]

use informledge::{Axis, Graph, KnnId, Link, LinkId, Performance, PerformancePolarity, Sign};
use rand::Rng;

/// Random performance set: each axis independently absent, positive or
/// negative.
pub fn random_performance<R: Rng>(rng: &mut R) -> Performance {
    let mut perf = Performance::EMPTY;
    for axis in Axis::ALL {
        let sign = match rng.gen_range(0..3) {
            0 => continue,
            1 => Sign::Positive,
            _ => Sign::Negative,
        };
        perf = perf.with(PerformancePolarity::new(axis, sign)).unwrap();
    }
    perf
}

/// Random performance biased towards the two inference triggers and the two
/// contradiction markers.
pub fn inference_heavy_performance<R: Rng>(rng: &mut R) -> Performance {
    match rng.gen_range(0..6) {
        0 | 1 => Performance::single(PerformancePolarity::INCLUSIVE),
        2 | 3 => Performance::single(PerformancePolarity::INTEGRATIVE),
        4 => Performance::single(PerformancePolarity::SUBTRACTIVE),
        _ => random_performance(rng),
    }
}

pub struct GraphSpec {
    pub max_nodes: usize,
    pub max_links: usize,
    pub domains: usize,
}

pub const SMALL: GraphSpec = GraphSpec {
    max_nodes: 12,
    max_links: 25,
    domains: 3,
};

/// Builds a random graph. Self-links and duplicate triples are skipped, so
/// the link count is at most `max_links`.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    spec: &GraphSpec,
    perf: fn(&mut R) -> Performance,
) -> Graph {
    let mut g = Graph::new();
    let n = rng.gen_range(1..=spec.max_nodes);
    for i in 0..n {
        let domain = format!("d{}", rng.gen_range(0..spec.domains));
        g.add_knn(&format!("k{i}"), &domain, &[]).unwrap();
    }
    let m = rng.gen_range(0..=spec.max_links);
    for _ in 0..m {
        let a = KnnId(rng.gen_range(1..=n as u64));
        let b = KnnId(rng.gen_range(1..=n as u64));
        let p = perf(rng);
        let _ = g.add_link(a, b, p);
    }
    g
}

/// Random links between existing nodes; returns how many were added.
pub fn add_random_links<R: Rng>(rng: &mut R, g: &mut Graph, count: usize) -> usize {
    let n = g.knn_count() as u64;
    let mut added = 0;
    for _ in 0..count {
        let a = KnnId(rng.gen_range(1..=n));
        let b = KnnId(rng.gen_range(1..=n));
        if g.add_link(a, b, random_performance(rng)).is_ok() {
            added += 1;
        }
    }
    added
}

/// Bare edge record used by the oracles, detached from any graph index.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub id: LinkId,
    pub temporal: u64,
    pub from: KnnId,
    pub to: KnnId,
}

impl From<&Link> for Edge {
    fn from(l: &Link) -> Self {
        Edge {
            id: l.id,
            temporal: l.temporal(),
            from: l.source(),
            to: l.destination(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Walk {
    pub nodes: Vec<KnnId>,
    pub links: Vec<LinkId>,
}

/// Exhaustive simple-walk enumeration, built level by level from a flat
/// edge list. A walk below the depth cap is maximal when no walk one level
/// deeper has it as a prefix. Returned sorted.
pub fn brute_force_walks(
    edges: &[Edge],
    seed: KnnId,
    max_depth: usize,
    maximal_only: bool,
) -> Vec<Walk> {
    let mut levels: Vec<Vec<Walk>> = vec![vec![Walk {
        nodes: vec![seed],
        links: vec![],
    }]];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for walk in levels.last().unwrap() {
            let end = *walk.nodes.last().unwrap();
            for e in edges {
                if e.from == end && !walk.nodes.contains(&e.to) {
                    let mut w = walk.clone();
                    w.nodes.push(e.to);
                    w.links.push(e.id);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }

    let mut out = Vec::new();
    for (depth, level) in levels.iter().enumerate() {
        for walk in level {
            let keep = if !maximal_only || depth == max_depth {
                true
            } else {
                let deeper = levels.get(depth + 1);
                !deeper.is_some_and(|d| d.iter().any(|w| w.links.starts_with(&walk.links)))
            };
            if keep {
                out.push(walk.clone());
            }
        }
    }
    out.sort();
    out
}

/// Boolean reachability matrix (paths of one or more links), indexed by
/// knn ordinal, via Floyd-Warshall.
pub fn reachability(n: usize, edges: impl IntoIterator<Item = (KnnId, KnnId)>) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n + 1]; n + 1];
    for (a, b) in edges {
        r[a.0 as usize][b.0 as usize] = true;
    }
    for k in 1..=n {
        for i in 1..=n {
            if r[i][k] {
                let via = r[k].clone();
                for (cell, &step) in r[i].iter_mut().zip(&via) {
                    *cell |= step;
                }
            }
        }
    }
    r
}

/// Max thread strength from `seed` by the oracle, natural links only.
pub fn oracle_max_strength(g: &Graph, seed: KnnId, max_depth: usize) -> usize {
    let edges: Vec<Edge> = g.links().map(Edge::from).collect();
    brute_force_walks(&edges, seed, max_depth, true)
        .iter()
        .map(|w| w.links.len())
        .max()
        .unwrap_or(0)
}
