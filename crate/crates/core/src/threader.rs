//! Knowledge-thread retrieval.
//!
//! A thread is a simple directed walk from a seed. Retrieval is a
//! depth-first enumeration that takes outgoing links in ascending temporal
//! order, so the emitted threads come out sorted lexicographically by the
//! temporal stamps of the links they take.
//!
//! With `include_unnatural`, the graph's accepted inference proposals are
//! added as transient links for the duration of one [`Retriever`]. They are
//! numbered past the end of the graph and never written back.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::linkdb::Graph;
use crate::model::{KnnId, KnowledgeThread, Link, LinkId};

pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalOptions {
    /// Cap on links per thread. Must be at least 1.
    pub max_depth: usize,
    pub include_unnatural: bool,
    /// Emit only threads that no usable link can extend. When false, every
    /// prefix is emitted too, starting with the empty thread.
    pub maximal_only: bool,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            include_unnatural: false,
            maximal_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("unknown seed {0}")]
    UnknownKnn(KnnId),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
}

/// One row of the thread statistics table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadStats {
    pub seed: KnnId,
    pub thread_count: usize,
    /// Thread strengths, ascending.
    pub lengths: Vec<usize>,
    pub cone_level: usize,
}

impl ThreadStats {
    pub fn max_length(&self) -> usize {
        self.lengths.last().copied().unwrap_or(0)
    }
}

/// A read-only traversal view over a graph, optionally widened with the
/// graph's accepted unnatural links.
#[derive(Debug)]
pub struct Retriever<'g> {
    graph: &'g Graph,
    transient: Vec<Link>,
    transient_out: HashMap<KnnId, Vec<usize>>,
}

impl<'g> Retriever<'g> {
    pub fn new(graph: &'g Graph, include_unnatural: bool) -> Self {
        let transient = if include_unnatural {
            graph.transient_unnatural_links()
        } else {
            Vec::new()
        };
        let mut transient_out: HashMap<KnnId, Vec<usize>> = HashMap::new();
        for (i, link) in transient.iter().enumerate() {
            transient_out.entry(link.source()).or_default().push(i);
        }
        Self {
            graph,
            transient,
            transient_out,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Unnatural links visible only through this retriever.
    pub fn transient_links(&self) -> &[Link] {
        &self.transient
    }

    /// Resolves a link id against the graph first, then the transient set.
    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.graph
            .link(id)
            .or_else(|| self.transient.iter().find(|l| l.id == id))
    }

    /// Outgoing links of `node` in ascending temporal order. Transient links
    /// always carry later stamps than stored ones.
    fn outgoing(&self, node: KnnId) -> impl Iterator<Item = &Link> {
        let stored = self
            .graph
            .outgoing_ids(node)
            .iter()
            .filter_map(|id| self.graph.link(*id));
        let transient = self
            .transient_out
            .get(&node)
            .into_iter()
            .flatten()
            .map(|&i| &self.transient[i]);
        stored.chain(transient)
    }

    pub fn threads(
        &self,
        seed: KnnId,
        options: &RetrievalOptions,
    ) -> Result<Vec<KnowledgeThread>, RetrievalError> {
        if options.max_depth == 0 {
            return Err(RetrievalError::ZeroDepth);
        }
        if !self.graph.contains_knn(seed) {
            return Err(RetrievalError::UnknownKnn(seed));
        }
        let mut out = Vec::new();
        let mut thread = KnowledgeThread::new(seed);
        self.walk(&mut thread, options, &mut out);
        Ok(out)
    }

    fn walk(
        &self,
        thread: &mut KnowledgeThread,
        options: &RetrievalOptions,
        out: &mut Vec<KnowledgeThread>,
    ) {
        if !options.maximal_only {
            out.push(thread.clone());
        }
        if thread.strength() >= options.max_depth {
            if options.maximal_only {
                out.push(thread.clone());
            }
            return;
        }
        let mut extended = false;
        for link in self.outgoing(thread.endpoint()) {
            if thread.visits(link.destination()) {
                continue;
            }
            extended = true;
            thread
                .push(link)
                .expect("link leaves the endpoint towards an unvisited node");
            self.walk(thread, options, out);
            thread.pop();
        }
        if options.maximal_only && !extended {
            out.push(thread.clone());
        }
    }

    pub fn stats(
        &self,
        seed: KnnId,
        options: &RetrievalOptions,
    ) -> Result<ThreadStats, RetrievalError> {
        let threads = self.threads(seed, options)?;
        let mut lengths: Vec<usize> = threads.iter().map(KnowledgeThread::strength).collect();
        lengths.sort_unstable();
        Ok(ThreadStats {
            seed,
            thread_count: threads.len(),
            lengths,
            cone_level: cone_level(self.graph, seed)?,
        })
    }
}

/// Enumerates the threads starting at `seed`.
pub fn retrieve_threads(
    graph: &Graph,
    seed: KnnId,
    options: &RetrievalOptions,
) -> Result<Vec<KnowledgeThread>, RetrievalError> {
    Retriever::new(graph, options.include_unnatural).threads(seed, options)
}

pub fn thread_stats(
    graph: &Graph,
    seed: KnnId,
    options: &RetrievalOptions,
) -> Result<ThreadStats, RetrievalError> {
    Retriever::new(graph, options.include_unnatural).stats(seed, options)
}

/// Number of KNNs reachable from `knn` along stored links, excluding `knn`
/// itself. Zero puts the node at the base of its cone.
pub fn cone_level(graph: &Graph, knn: KnnId) -> Result<usize, RetrievalError> {
    if !graph.contains_knn(knn) {
        return Err(RetrievalError::UnknownKnn(knn));
    }
    let mut seen = vec![false; graph.knn_count() + 1];
    seen[knn.0 as usize] = true;
    let mut queue = VecDeque::from([knn]);
    let mut reached = 0;
    while let Some(node) = queue.pop_front() {
        for id in graph.outgoing_ids(node) {
            let next = graph.link(*id).map(Link::destination);
            if let Some(next) = next {
                if !seen[next.0 as usize] {
                    seen[next.0 as usize] = true;
                    reached += 1;
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(reached)
}

/// One row per seed, in input order. Every seed is checked before any
/// retrieval runs.
pub fn stats_table(
    graph: &Graph,
    seeds: &[KnnId],
    options: &RetrievalOptions,
) -> Result<Vec<ThreadStats>, RetrievalError> {
    if let Some(&missing) = seeds.iter().find(|s| !graph.contains_knn(**s)) {
        return Err(RetrievalError::UnknownKnn(missing));
    }
    if seeds.is_empty() {
        return Ok(Vec::new());
    }
    let retriever = Retriever::new(graph, options.include_unnatural);
    seeds.iter().map(|&s| retriever.stats(s, options)).collect()
}
