//! The graph store: KNN registry, link database and link manager.
//!
//! Natural links are written by [`Graph::add_link`]. Unnatural links are
//! proposed by [`Graph::infer_unnatural_links`] from two rules over the
//! existing links, screened by [`Graph::validate_link`], and only then
//! either materialized into the graph or handed out transiently to the
//! thread retriever.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::model::{
    validate_name, Knn, KnnId, Link, LinkId, LinkKind, LinkProperties, NameError, Performance,
    PerformancePolarity, SelfLink,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkDbError {
    #[error("invalid name: {0}")]
    InvalidName(#[from] NameError),
    #[error("unknown {0}")]
    UnknownKnn(KnnId),
    #[error("{0} cannot link to itself")]
    SelfLink(KnnId),
    #[error("{from} -> {to} already carries a link with properties [{performance}]")]
    DuplicateLink {
        from: KnnId,
        to: KnnId,
        performance: Performance,
    },
    #[error("proposal rejected: {0}")]
    Rejected(RejectReason),
}

impl From<SelfLink> for LinkDbError {
    fn from(err: SelfLink) -> Self {
        LinkDbError::SelfLink(err.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Outgoing,
    Incoming,
    Both,
}

/// The interconnectivity pattern that produced a [`LinkProposal`].
///
/// Variant order matches the alphabetical order of [`InferenceRule::name`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InferenceRule {
    /// A reaches C through two or more inclusive links: propose A -> C,
    /// inclusive.
    InclusiveTransitivity,
    /// A and B both integrate into the same whole: propose an association
    /// from the lower id to the higher one, with no performance entries.
    IntegrativeLift,
}

impl InferenceRule {
    pub fn name(self) -> &'static str {
        match self {
            InferenceRule::InclusiveTransitivity => "inclusive-transitivity",
            InferenceRule::IntegrativeLift => "integrative-lift",
        }
    }
}

impl fmt::Display for InferenceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A candidate unnatural link. The candidate's temporal stamp is zero until
/// the proposal is materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkProposal {
    pub candidate: LinkProperties,
    pub rule: InferenceRule,
}

impl LinkProposal {
    pub fn new(
        source: KnnId,
        destination: KnnId,
        performance: Performance,
        rule: InferenceRule,
    ) -> Result<Self, SelfLink> {
        Ok(Self {
            candidate: LinkProperties::new(source, destination, performance, 0)?,
            rule,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    AlreadyNatural,
    AlreadyMaterialized,
    SubtractiveContradiction,
    ExclusiveContradiction,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::AlreadyNatural => "already-natural",
            RejectReason::AlreadyMaterialized => "already-materialized",
            RejectReason::SubtractiveContradiction => "subtractive-contradiction",
            RejectReason::ExclusiveContradiction => "exclusive-contradiction",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Validation {
    Accepted,
    Rejected(RejectReason),
}

impl Validation {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Validation::Accepted)
    }
}

/// Problems found by [`Graph::audit`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("consistency audit failed: {}", .problems.join("; "))]
pub struct AuditError {
    pub problems: Vec<String>,
}

/// KNN registry plus link database.
///
/// KNN ids are dense (`1..=knn_count`). Link ids increase monotonically but
/// may have gaps once unnatural links are stripped.
#[derive(Debug, Clone)]
pub struct Graph {
    knns: Vec<Knn>,
    by_name: HashMap<(String, String), KnnId>,
    links: BTreeMap<LinkId, Link>,
    outgoing: Vec<Vec<LinkId>>,
    incoming: Vec<Vec<LinkId>>,
    next_link: u64,
    next_temporal: u64,
}

impl Default for Graph {
    fn default() -> Self {
        Self {
            knns: Vec::new(),
            by_name: HashMap::new(),
            links: BTreeMap::new(),
            outgoing: Vec::new(),
            incoming: Vec::new(),
            next_link: 1,
            next_temporal: 1,
        }
    }
}

/// Two graphs are equal when their KNNs, links (ids, properties, kinds) and
/// temporal counters match. Indexes are derived state.
impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.knns == other.knns
            && self.links == other.links
            && self.next_temporal == other.next_temporal
    }
}

impl Eq for Graph {}

fn validate_attribute_key(key: &str) -> Result<(), NameError> {
    validate_name(key)?;
    if key.contains('=') {
        return Err(NameError::Reserved {
            name: key.to_string(),
            ch: '=',
        });
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn knn_count(&self) -> usize {
        self.knns.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn next_temporal(&self) -> u64 {
        self.next_temporal
    }

    pub fn knn(&self, id: KnnId) -> Option<&Knn> {
        let index = usize::try_from(id.0).ok()?.checked_sub(1)?;
        self.knns.get(index)
    }

    pub fn contains_knn(&self, id: KnnId) -> bool {
        self.knn(id).is_some()
    }

    /// KNNs in id order.
    pub fn knns(&self) -> impl ExactSizeIterator<Item = &Knn> {
        self.knns.iter()
    }

    pub fn find(&self, domain: &str, label: &str) -> Option<KnnId> {
        self.by_name
            .get(&(domain.to_string(), label.to_string()))
            .copied()
    }

    /// Looks up a `domain/label` name.
    pub fn find_qualified(&self, qualified: &str) -> Option<KnnId> {
        let (domain, label) = qualified.split_once('/')?;
        self.find(domain, label)
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.get(&id)
    }

    /// Links in id order.
    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    fn require(&self, id: KnnId) -> Result<&Knn, LinkDbError> {
        self.knn(id).ok_or(LinkDbError::UnknownKnn(id))
    }

    fn slot(id: KnnId) -> usize {
        (id.0 - 1) as usize
    }

    /// Registers a concept, or returns the existing one for the same
    /// `(domain, label)`. On reuse, attribute keys not yet present are
    /// added; existing keys keep their values.
    pub fn add_knn(
        &mut self,
        label: &str,
        domain: &str,
        attributes: &[(String, String)],
    ) -> Result<KnnId, LinkDbError> {
        validate_name(label)?;
        validate_name(domain)?;
        for (key, _) in attributes {
            validate_attribute_key(key)?;
        }

        let id = match self.find(domain, label) {
            Some(id) => id,
            None => {
                let id = KnnId(self.knns.len() as u64 + 1);
                self.knns.push(Knn {
                    id,
                    label: label.to_string(),
                    domain: domain.to_string(),
                    attributes: Vec::new(),
                });
                self.by_name
                    .insert((domain.to_string(), label.to_string()), id);
                self.outgoing.push(Vec::new());
                self.incoming.push(Vec::new());
                id
            }
        };

        let knn = &mut self.knns[Self::slot(id)];
        for (key, value) in attributes {
            if knn.attribute(key).is_none() {
                knn.attributes.push((key.clone(), value.clone()));
            }
        }
        Ok(id)
    }

    fn links_between(&self, source: KnnId, destination: KnnId) -> impl Iterator<Item = &Link> {
        self.outgoing
            .get(Self::slot(source))
            .into_iter()
            .flatten()
            .map(|id| &self.links[id])
            .filter(move |l| l.destination() == destination)
    }

    fn find_identical(
        &self,
        source: KnnId,
        destination: KnnId,
        performance: Performance,
    ) -> Option<&Link> {
        self.links_between(source, destination)
            .find(|l| l.performance() == performance)
    }

    fn insert_link(
        &mut self,
        source: KnnId,
        destination: KnnId,
        performance: Performance,
        kind: LinkKind,
    ) -> Result<Link, LinkDbError> {
        let properties = LinkProperties::new(source, destination, performance, self.next_temporal)?;
        let cross_plane = self.require(source)?.domain != self.require(destination)?.domain;
        if self
            .find_identical(source, destination, performance)
            .is_some()
        {
            return Err(LinkDbError::DuplicateLink {
                from: source,
                to: destination,
                performance,
            });
        }
        let link = Link {
            id: LinkId(self.next_link),
            properties,
            kind,
            cross_plane,
        };
        self.next_link += 1;
        self.next_temporal += 1;
        self.links.insert(link.id, link);
        self.outgoing[Self::slot(source)].push(link.id);
        self.incoming[Self::slot(destination)].push(link.id);
        Ok(link)
    }

    /// Creates a natural link stamped with the next temporal value.
    pub fn add_link(
        &mut self,
        source: KnnId,
        destination: KnnId,
        performance: Performance,
    ) -> Result<Link, LinkDbError> {
        self.require(source)?;
        self.require(destination)?;
        self.insert_link(source, destination, performance, LinkKind::Natural)
    }

    /// Links touching `knn`, ascending by temporal stamp.
    pub fn links_of(&self, knn: KnnId, direction: Direction) -> Result<Vec<Link>, LinkDbError> {
        self.require(knn)?;
        let slot = Self::slot(knn);
        let collect = |ids: &[LinkId]| ids.iter().map(|id| self.links[id]).collect::<Vec<_>>();
        let mut links = match direction {
            Direction::Outgoing => collect(&self.outgoing[slot]),
            Direction::Incoming => collect(&self.incoming[slot]),
            Direction::Both => {
                let mut all = collect(&self.outgoing[slot]);
                all.extend(collect(&self.incoming[slot]));
                all
            }
        };
        links.sort_by_key(Link::temporal);
        Ok(links)
    }

    /// Outgoing link ids of `knn` in temporal order. Empty for unknown ids.
    pub(crate) fn outgoing_ids(&self, knn: KnnId) -> &[LinkId] {
        self.outgoing
            .get(Self::slot(knn))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Proposes unnatural links, sorted by source, destination, then rule
    /// name. Nothing already present in the graph is proposed.
    pub fn infer_unnatural_links(&self) -> Vec<LinkProposal> {
        let mut proposals = BTreeSet::new();
        let inclusive = Performance::single(PerformancePolarity::INCLUSIVE);

        // Inclusive transitivity over paths of two or more inclusive links.
        let mut inclusive_succ: Vec<BTreeSet<KnnId>> = vec![BTreeSet::new(); self.knns.len()];
        for link in self.links.values() {
            if link.performance().contains(PerformancePolarity::INCLUSIVE) {
                inclusive_succ[Self::slot(link.source())].insert(link.destination());
            }
        }
        for knn in &self.knns {
            let origin = knn.id;
            let mut seen = BTreeSet::new();
            let mut queue: VecDeque<KnnId> =
                inclusive_succ[Self::slot(origin)].iter().copied().collect();
            while let Some(node) = queue.pop_front() {
                for &next in &inclusive_succ[Self::slot(node)] {
                    if seen.insert(next) {
                        queue.push_back(next);
                    }
                }
            }
            for target in seen {
                if target != origin && self.find_identical(origin, target, inclusive).is_none() {
                    proposals.insert((
                        origin,
                        target,
                        InferenceRule::InclusiveTransitivity,
                        inclusive,
                    ));
                }
            }
        }

        // Integrative lift between parts of the same whole.
        for knn in &self.knns {
            let parts: BTreeSet<KnnId> = self.incoming[Self::slot(knn.id)]
                .iter()
                .map(|id| &self.links[id])
                .filter(|l| l.performance().contains(PerformancePolarity::INTEGRATIVE))
                .map(Link::source)
                .collect();
            for (i, &a) in parts.iter().enumerate() {
                for &b in parts.iter().skip(i + 1) {
                    if self.find_identical(a, b, Performance::EMPTY).is_none() {
                        proposals.insert((
                            a,
                            b,
                            InferenceRule::IntegrativeLift,
                            Performance::EMPTY,
                        ));
                    }
                }
            }
        }

        proposals
            .into_iter()
            .map(|(source, destination, rule, performance)| {
                LinkProposal::new(source, destination, performance, rule)
                    .expect("inference never pairs a node with itself")
            })
            .collect()
    }

    /// The validation sphere: a proposal is rejected when it already exists,
    /// or when a natural link between the same two nodes, in either
    /// direction, is subtractive or exclusive.
    pub fn validate_link(&self, proposal: &LinkProposal) -> Result<Validation, LinkDbError> {
        let source = proposal.candidate.source();
        let destination = proposal.candidate.destination();
        self.require(source)?;
        self.require(destination)?;

        if let Some(existing) =
            self.find_identical(source, destination, proposal.candidate.performance)
        {
            let reason = match existing.kind {
                LinkKind::Natural => RejectReason::AlreadyNatural,
                LinkKind::Unnatural => RejectReason::AlreadyMaterialized,
            };
            return Ok(Validation::Rejected(reason));
        }

        let natural_between: Vec<&Link> = self
            .links_between(source, destination)
            .chain(self.links_between(destination, source))
            .filter(|l| l.kind == LinkKind::Natural)
            .collect();
        if natural_between
            .iter()
            .any(|l| l.performance().contains(PerformancePolarity::SUBTRACTIVE))
        {
            return Ok(Validation::Rejected(RejectReason::SubtractiveContradiction));
        }
        if natural_between
            .iter()
            .any(|l| l.performance().contains(PerformancePolarity::EXCLUSIVE))
        {
            return Ok(Validation::Rejected(RejectReason::ExclusiveContradiction));
        }
        Ok(Validation::Accepted)
    }

    /// Validates and then stores a proposal as an unnatural link.
    pub fn materialize(&mut self, proposal: &LinkProposal) -> Result<Link, LinkDbError> {
        match self.validate_link(proposal)? {
            Validation::Accepted => self.insert_link(
                proposal.candidate.source(),
                proposal.candidate.destination(),
                proposal.candidate.performance,
                LinkKind::Unnatural,
            ),
            Validation::Rejected(reason) => Err(LinkDbError::Rejected(reason)),
        }
    }

    /// Accepted proposals as unnatural links numbered past the end of the
    /// graph, without storing them. Ids and temporal stamps follow proposal
    /// order, so they sort after every stored link.
    pub fn transient_unnatural_links(&self) -> Vec<Link> {
        let mut next_link = self.next_link;
        let mut next_temporal = self.next_temporal;
        self.infer_unnatural_links()
            .into_iter()
            .filter(|p| matches!(self.validate_link(p), Ok(Validation::Accepted)))
            .map(|p| {
                let mut properties = p.candidate;
                properties.temporal = next_temporal;
                let link = Link {
                    id: LinkId(next_link),
                    properties,
                    kind: LinkKind::Unnatural,
                    cross_plane: self.knns[Self::slot(properties.source())].domain
                        != self.knns[Self::slot(properties.destination())].domain,
                };
                next_link += 1;
                next_temporal += 1;
                link
            })
            .collect()
    }

    /// Drops every unnatural link. The temporal counter is not rewound.
    pub fn strip_unnatural(&mut self) {
        self.links.retain(|_, l| l.kind == LinkKind::Natural);
        let links = &self.links;
        for list in self.outgoing.iter_mut().chain(self.incoming.iter_mut()) {
            list.retain(|id| links.contains_key(id));
        }
    }

    /// Rebuilds a graph from stored records. Callers are expected to have
    /// checked referential integrity; [`Graph::audit`] catches the rest.
    pub(crate) fn restore(knns: Vec<Knn>, links: Vec<Link>, next_temporal: u64) -> Self {
        let mut graph = Graph {
            by_name: knns
                .iter()
                .map(|k| ((k.domain.clone(), k.label.clone()), k.id))
                .collect(),
            outgoing: vec![Vec::new(); knns.len()],
            incoming: vec![Vec::new(); knns.len()],
            knns,
            next_link: links.iter().map(|l| l.id.0 + 1).max().unwrap_or(1),
            links: BTreeMap::new(),
            next_temporal,
        };
        let mut by_time = links;
        by_time.sort_by_key(Link::temporal);
        for link in by_time {
            if let Some(list) = graph.outgoing.get_mut(Self::slot(link.source())) {
                list.push(link.id);
            }
            if let Some(list) = graph.incoming.get_mut(Self::slot(link.destination())) {
                list.push(link.id);
            }
            graph.links.insert(link.id, link);
        }
        graph
    }

    /// Full consistency check of registry, indexes and counters.
    pub fn audit(&self) -> Result<(), AuditError> {
        let mut problems = Vec::new();

        if self.by_name.len() != self.knns.len() {
            problems.push(format!(
                "name index holds {} entries for {} knns",
                self.by_name.len(),
                self.knns.len()
            ));
        }
        for (i, knn) in self.knns.iter().enumerate() {
            if knn.id.0 != i as u64 + 1 {
                problems.push(format!("{} stored at ordinal {}", knn.id, i + 1));
            }
            for name in [&knn.label, &knn.domain] {
                if let Err(e) = validate_name(name) {
                    problems.push(format!("{}: {e}", knn.id));
                }
            }
            if self.find(&knn.domain, &knn.label) != Some(knn.id) {
                problems.push(format!("{} missing from name index", knn.id));
            }
        }
        if self.outgoing.len() != self.knns.len() || self.incoming.len() != self.knns.len() {
            problems.push("adjacency table size differs from knn count".to_string());
            return Err(AuditError { problems });
        }

        let mut expected_out = vec![Vec::new(); self.knns.len()];
        let mut expected_in = vec![Vec::new(); self.knns.len()];
        let mut stamps = BTreeSet::new();
        let mut triples = BTreeSet::new();
        for (id, link) in &self.links {
            if *id != link.id {
                problems.push(format!("{} stored under key {id}", link.id));
            }
            if link.id.0 >= self.next_link {
                problems.push(format!("{} is not below the next link id", link.id));
            }
            let (Some(src), Some(dst)) = (self.knn(link.source()), self.knn(link.destination()))
            else {
                problems.push(format!("{} references a missing knn", link.id));
                continue;
            };
            if src.id == dst.id {
                problems.push(format!("{} is a self-link", link.id));
            }
            if link.cross_plane != (src.domain != dst.domain) {
                problems.push(format!("{} has a stale cross_plane flag", link.id));
            }
            if link.temporal() >= self.next_temporal {
                problems.push(format!(
                    "{} has temporal {} at or past the counter",
                    link.id,
                    link.temporal()
                ));
            }
            if !stamps.insert(link.temporal()) {
                problems.push(format!("temporal {} used twice", link.temporal()));
            }
            if !triples.insert((link.source(), link.destination(), link.performance())) {
                problems.push(format!("{} duplicates another link", link.id));
            }
            expected_out[Self::slot(link.source())].push(*link);
            expected_in[Self::slot(link.destination())].push(*link);
        }

        for (label, actual, expected) in [
            ("outgoing", &self.outgoing, &mut expected_out),
            ("incoming", &self.incoming, &mut expected_in),
        ] {
            for (slot, (have, want)) in actual.iter().zip(expected.iter_mut()).enumerate() {
                want.sort_by_key(Link::temporal);
                let want: Vec<LinkId> = want.iter().map(|l| l.id).collect();
                if *have != want {
                    problems.push(format!(
                        "{label} index of {} does not mirror the link registry",
                        KnnId(slot as u64 + 1)
                    ));
                }
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(AuditError { problems })
        }
    }
}
