//! Value types shared by every other module: node and link identity, the
//! three signed performance axes, the packed link signature, and knowledge
//! threads.
//!
//! Nothing in here owns storage. A [`Link`] only refers to its endpoints by
//! [`KnnId`]; resolving those ids is the job of [`crate::linkdb::Graph`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Characters that may never appear in a label or domain name.
pub const RESERVED_CHARS: [char; 3] = ['/', ':', '#'];

/// Identity of a knowledge network node. Ordinals start at 1 and follow
/// creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KnnId(pub u64);

impl fmt::Display for KnnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "knn{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u64);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "link{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("name is empty")]
    Empty,
    #[error("name {0:?} contains whitespace")]
    Whitespace(String),
    #[error("name {name:?} contains reserved character {ch:?}")]
    Reserved { name: String, ch: char },
}

/// Checks the character rules shared by labels, domains and attribute keys.
pub fn validate_name(name: &str) -> Result<(), NameError> {
    if name.is_empty() {
        return Err(NameError::Empty);
    }
    if name.chars().any(char::is_whitespace) {
        return Err(NameError::Whitespace(name.to_string()));
    }
    if let Some(ch) = name.chars().find(|c| RESERVED_CHARS.contains(c)) {
        return Err(NameError::Reserved {
            name: name.to_string(),
            ch,
        });
    }
    Ok(())
}

/// One concept. The `(domain, label)` pair is unique within a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Knn {
    pub id: KnnId,
    pub label: String,
    pub domain: String,
    pub attributes: Vec<(String, String)>,
}

impl Knn {
    /// `domain/label`, the form used by the DSL and the command line.
    pub fn qualified_name(&self) -> String {
        format!("{}/{}", self.domain, self.label)
    }

    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// The three performance axes a link can carry a value on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    /// Additive / subtractive.
    P21,
    /// Inclusive / exclusive.
    P22,
    /// Integrative / differentiative.
    P23,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::P21, Axis::P22, Axis::P23];

    fn index(self) -> usize {
        match self {
            Axis::P21 => 0,
            Axis::P22 => 1,
            Axis::P23 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// A value on one axis, e.g. `(P21, Negative)` is "subtractive".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PerformancePolarity {
    pub axis: Axis,
    pub sign: Sign,
}

impl PerformancePolarity {
    pub const ADDITIVE: Self = Self::new(Axis::P21, Sign::Positive);
    pub const SUBTRACTIVE: Self = Self::new(Axis::P21, Sign::Negative);
    pub const INCLUSIVE: Self = Self::new(Axis::P22, Sign::Positive);
    pub const EXCLUSIVE: Self = Self::new(Axis::P22, Sign::Negative);
    pub const INTEGRATIVE: Self = Self::new(Axis::P23, Sign::Positive);
    pub const DIFFERENTIATIVE: Self = Self::new(Axis::P23, Sign::Negative);

    /// All six polarities, axis-major, positive first.
    pub const ALL: [Self; 6] = [
        Self::ADDITIVE,
        Self::SUBTRACTIVE,
        Self::INCLUSIVE,
        Self::EXCLUSIVE,
        Self::INTEGRATIVE,
        Self::DIFFERENTIATIVE,
    ];

    pub const fn new(axis: Axis, sign: Sign) -> Self {
        Self { axis, sign }
    }

    /// The DSL token naming this polarity.
    pub fn token(self) -> &'static str {
        match (self.axis, self.sign) {
            (Axis::P21, Sign::Positive) => "additive",
            (Axis::P21, Sign::Negative) => "subtractive",
            (Axis::P22, Sign::Positive) => "inclusive",
            (Axis::P22, Sign::Negative) => "exclusive",
            (Axis::P23, Sign::Positive) => "integrative",
            (Axis::P23, Sign::Negative) => "differentiative",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.token() == token)
    }
}

impl fmt::Display for PerformancePolarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PerformancePolarity {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_token(s).ok_or_else(|| UnknownToken(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown property token {0:?}")]
pub struct UnknownToken(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("axis {0:?} already carries a value")]
pub struct DuplicateAxis(pub Axis);

/// The performance part of a link: at most one sign per axis, so anywhere
/// from zero to three entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Performance([Option<Sign>; 3]);

impl Performance {
    pub const EMPTY: Performance = Performance([None; 3]);

    pub fn single(polarity: PerformancePolarity) -> Self {
        let mut slots = [None; 3];
        slots[polarity.axis.index()] = Some(polarity.sign);
        Performance(slots)
    }

    pub fn from_polarities<I>(polarities: I) -> Result<Self, DuplicateAxis>
    where
        I: IntoIterator<Item = PerformancePolarity>,
    {
        polarities
            .into_iter()
            .try_fold(Self::EMPTY, |acc, p| acc.with(p))
    }

    /// Adds a polarity, failing if its axis is already set.
    pub fn with(self, polarity: PerformancePolarity) -> Result<Self, DuplicateAxis> {
        let slot = polarity.axis.index();
        if self.0[slot].is_some() {
            return Err(DuplicateAxis(polarity.axis));
        }
        let mut slots = self.0;
        slots[slot] = Some(polarity.sign);
        Ok(Performance(slots))
    }

    pub fn get(&self, axis: Axis) -> Option<Sign> {
        self.0[axis.index()]
    }

    pub fn contains(&self, polarity: PerformancePolarity) -> bool {
        self.get(polarity.axis) == Some(polarity.sign)
    }

    /// Entries in axis order.
    pub fn iter(&self) -> impl Iterator<Item = PerformancePolarity> + '_ {
        Axis::ALL.into_iter().filter_map(|axis| {
            self.get(axis)
                .map(|sign| PerformancePolarity { axis, sign })
        })
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn signature(&self) -> LinkSignature {
        let bits = self.0.iter().enumerate().fold(0u8, |acc, (slot, sign)| {
            let field = match sign {
                None => 0b00,
                Some(Sign::Positive) => 0b01,
                Some(Sign::Negative) => 0b10,
            };
            acc | (field << (2 * slot))
        });
        LinkSignature(bits)
    }

    /// Inverse of [`Performance::signature`]. `None` for bytes that no
    /// performance set encodes to.
    pub fn from_signature(signature: LinkSignature) -> Option<Self> {
        let bits = signature.0;
        if bits & 0b1100_0000 != 0 {
            return None;
        }
        let mut slots = [None; 3];
        for (slot, entry) in slots.iter_mut().enumerate() {
            *entry = match (bits >> (2 * slot)) & 0b11 {
                0b00 => None,
                0b01 => Some(Sign::Positive),
                0b10 => Some(Sign::Negative),
                _ => return None,
            };
        }
        Some(Performance(slots))
    }
}

impl fmt::Display for Performance {
    /// Comma-separated DSL tokens in axis order; empty for no entries.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(p.token())?;
        }
        Ok(())
    }
}

/// Packed 8-bit form of a performance set. Axes P21, P22, P23 occupy bits
/// 0-1, 2-3 and 4-5; each field is `00` absent, `01` positive, `10`
/// negative. Bits 6-7 are always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkSignature(pub u8);

impl LinkSignature {
    pub fn bits(self) -> u8 {
        self.0
    }
}

impl fmt::Display for LinkSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{0} cannot link to itself")]
pub struct SelfLink(pub KnnId);

/// Direction, performance and temporal stamp of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkProperties {
    source: KnnId,
    destination: KnnId,
    pub performance: Performance,
    /// Logical embed-order counter, not wall-clock time.
    pub temporal: u64,
}

impl LinkProperties {
    pub fn new(
        source: KnnId,
        destination: KnnId,
        performance: Performance,
        temporal: u64,
    ) -> Result<Self, SelfLink> {
        if source == destination {
            return Err(SelfLink(source));
        }
        Ok(Self {
            source,
            destination,
            performance,
            temporal,
        })
    }

    pub fn source(&self) -> KnnId {
        self.source
    }

    pub fn destination(&self) -> KnnId {
        self.destination
    }
}

pub fn encode_signature(properties: &LinkProperties) -> LinkSignature {
    properties.performance.signature()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkKind {
    /// Written at embed time.
    Natural,
    /// Inferred from interconnectivity and admitted by validation.
    Unnatural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Link {
    pub id: LinkId,
    pub properties: LinkProperties,
    pub kind: LinkKind,
    /// Endpoints live in different domains.
    pub cross_plane: bool,
}

impl Link {
    pub fn source(&self) -> KnnId {
        self.properties.source
    }

    pub fn destination(&self) -> KnnId {
        self.properties.destination
    }

    pub fn performance(&self) -> Performance {
        self.properties.performance
    }

    pub fn temporal(&self) -> u64 {
        self.properties.temporal
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThreadError {
    #[error("{link} starts at {found}, but the thread ends at {expected}")]
    DisconnectedLink {
        link: LinkId,
        expected: KnnId,
        found: KnnId,
    },
    #[error("{link} returns to {node}, which the thread already visited")]
    CycleViolation { link: LinkId, node: KnnId },
}

/// A simple directed walk starting at `seed`, kept as the ordered list of
/// links taken. The visited node sequence is tracked alongside it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KnowledgeThread {
    seed: KnnId,
    links: Vec<LinkId>,
    nodes: Vec<KnnId>,
}

impl KnowledgeThread {
    pub fn new(seed: KnnId) -> Self {
        Self {
            seed,
            links: Vec::new(),
            nodes: vec![seed],
        }
    }

    pub fn seed(&self) -> KnnId {
        self.seed
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    /// Seed followed by the destination of every link.
    pub fn nodes(&self) -> &[KnnId] {
        &self.nodes
    }

    pub fn endpoint(&self) -> KnnId {
        *self.nodes.last().expect("a thread always holds its seed")
    }

    pub fn visits(&self, node: KnnId) -> bool {
        self.nodes.contains(&node)
    }

    pub fn strength(&self) -> usize {
        thread_strength(self)
    }

    /// Returns a new thread extended by `link`; `self` is left untouched.
    pub fn append_link(&self, link: &Link) -> Result<Self, ThreadError> {
        let mut next = self.clone();
        next.push(link)?;
        Ok(next)
    }

    pub(crate) fn push(&mut self, link: &Link) -> Result<(), ThreadError> {
        let expected = self.endpoint();
        if link.source() != expected {
            return Err(ThreadError::DisconnectedLink {
                link: link.id,
                expected,
                found: link.source(),
            });
        }
        if self.visits(link.destination()) {
            return Err(ThreadError::CycleViolation {
                link: link.id,
                node: link.destination(),
            });
        }
        self.links.push(link.id);
        self.nodes.push(link.destination());
        Ok(())
    }

    pub(crate) fn pop(&mut self) {
        if self.links.pop().is_some() {
            self.nodes.pop();
        }
    }
}

/// Number of links in the thread, i.e. the number of summands when the
/// thread is written as a sum of its links.
pub fn thread_strength(thread: &KnowledgeThread) -> usize {
    thread.links.len()
}
