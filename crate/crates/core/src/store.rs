//! Snapshot persistence (`ILSv1`) and Graphviz export.
//!
//! ```text
//! ILSv1
//! #NODES
//! N<TAB>id<TAB>domain<TAB>label<TAB>key=value[;key=value...]
//! #LINKS
//! L<TAB>id<TAB>srcId<TAB>dstId<TAB>sig<TAB>temporal
//! #END<TAB>next_temporal
//! ```
//!
//! Records are sorted by id, lines end in LF, and `sig` is the two-digit
//! lowercase hex link signature. In attribute keys and values the bytes
//! `%`, `;`, `=`, TAB, LF and CR are written as `%XX`. Only natural links
//! are stored.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::linkdb::{AuditError, Graph};
use crate::model::{
    validate_name, Knn, KnnId, Link, LinkId, LinkKind, LinkProperties, LinkSignature, Performance,
};

pub const FORMAT_TAG: &str = "ILSv1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unsupported snapshot version {0:?}")]
    BadVersion(String),
    #[error("line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("line {line}: {link} references unknown {knn}")]
    DanglingLink {
        line: usize,
        link: LinkId,
        knn: KnnId,
    },
    #[error("snapshot fails the consistency audit: {0}")]
    Inconsistent(#[from] AuditError),
    #[error("write failed: {0}")]
    SinkFailure(#[source] io::Error),
    #[error("read failed: {0}")]
    SourceFailure(#[source] io::Error),
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '%' | ';' | '=' | '\t' | '\n' | '\r' => {
                let _ = write!(out, "%{:02X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = text.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// Canonical snapshot text for the natural part of `graph`.
pub fn to_snapshot_string(graph: &Graph) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_TAG);
    out.push_str("\n#NODES\n");
    for knn in graph.knns() {
        let attributes: Vec<String> = knn
            .attributes
            .iter()
            .map(|(k, v)| format!("{}={}", escape(k), escape(v)))
            .collect();
        let _ = writeln!(
            out,
            "N\t{}\t{}\t{}\t{}",
            knn.id.0,
            knn.domain,
            knn.label,
            attributes.join(";")
        );
    }
    out.push_str("#LINKS\n");
    for link in graph.links().filter(|l| l.kind == LinkKind::Natural) {
        let _ = writeln!(
            out,
            "L\t{}\t{}\t{}\t{}\t{}",
            link.id.0,
            link.source().0,
            link.destination().0,
            link.performance().signature(),
            link.temporal()
        );
    }
    let _ = writeln!(out, "#END\t{}", graph.next_temporal());
    out
}

/// Writes the snapshot and returns the number of bytes written.
pub fn save<W: Write>(graph: &Graph, sink: &mut W) -> Result<usize, StoreError> {
    let text = to_snapshot_string(graph);
    sink.write_all(text.as_bytes())
        .and_then(|()| sink.flush())
        .map_err(StoreError::SinkFailure)?;
    Ok(text.len())
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn save_to_path(graph: &Graph, path: &Path) -> Result<usize, StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(StoreError::SinkFailure)?;
    let written = save(graph, &mut tmp)?;
    tmp.as_file().sync_all().map_err(StoreError::SinkFailure)?;
    tmp.persist(path)
        .map_err(|e| StoreError::SinkFailure(e.error))?;
    Ok(written)
}

pub fn load_from_path(path: &Path) -> Result<Graph, StoreError> {
    let file = std::fs::File::open(path).map_err(StoreError::SourceFailure)?;
    load(io::BufReader::new(file))
}

fn corrupt(line: usize, reason: impl Into<String>) -> StoreError {
    StoreError::CorruptRecord {
        line,
        reason: reason.into(),
    }
}

fn number(field: &str, line: usize, what: &str) -> Result<u64, StoreError> {
    // `u64::from_str` accepts a leading '+', which is not canonical.
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(corrupt(line, format!("{what} {field:?} is not a number")));
    }
    field
        .parse()
        .map_err(|_| corrupt(line, format!("{what} {field:?} is out of range")))
}

fn parse_attributes(field: &str, line: usize) -> Result<Vec<(String, String)>, StoreError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| corrupt(line, format!("attribute {pair:?} is not key=value")))?;
            let key = unescape(k).ok_or_else(|| corrupt(line, "bad escape in attribute key"))?;
            let value =
                unescape(v).ok_or_else(|| corrupt(line, "bad escape in attribute value"))?;
            validate_name(&key).map_err(|e| corrupt(line, format!("attribute key: {e}")))?;
            Ok((key, value))
        })
        .collect()
}

/// Parses an `ILSv1` snapshot into a fresh graph. Nothing is returned
/// unless the whole file is valid.
pub fn load<R: Read>(mut source: R) -> Result<Graph, StoreError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(StoreError::SourceFailure)?;

    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .unwrap_or(bytes.len());
    if &bytes[..header_end] != FORMAT_TAG.as_bytes() {
        let found = String::from_utf8_lossy(&bytes[..header_end.min(64)]).into_owned();
        return Err(StoreError::BadVersion(found));
    }
    let text = String::from_utf8(bytes).map_err(|_| corrupt(0, "snapshot is not UTF-8"))?;
    let Some(body) = text.strip_suffix('\n') else {
        return Err(corrupt(text.lines().count(), "missing final newline"));
    };
    let mut lines = body
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .skip(1);

    match lines.next() {
        Some((_, "#NODES")) => {}
        Some((n, other)) => return Err(corrupt(n, format!("expected #NODES, found {other:?}"))),
        None => return Err(corrupt(2, "missing #NODES")),
    }

    let mut knns: Vec<Knn> = Vec::new();
    let mut names = HashSet::new();
    loop {
        let Some((n, line)) = lines.next() else {
            return Err(corrupt(0, "missing #LINKS"));
        };
        if line == "#LINKS" {
            break;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let ["N", id, domain, label, attributes] = fields.as_slice() else {
            return Err(corrupt(n, "expected a 5-field N record"));
        };
        let id = number(id, n, "knn id")?;
        if id != knns.len() as u64 + 1 {
            return Err(corrupt(n, format!("knn id {id} out of sequence")));
        }
        for name in [domain, label] {
            validate_name(name).map_err(|e| corrupt(n, e.to_string()))?;
        }
        if !names.insert((domain.to_string(), label.to_string())) {
            return Err(corrupt(n, format!("{domain}/{label} appears twice")));
        }
        knns.push(Knn {
            id: KnnId(id),
            label: label.to_string(),
            domain: domain.to_string(),
            attributes: parse_attributes(attributes, n)?,
        });
    }

    let mut links: Vec<Link> = Vec::new();
    let mut stamps: BTreeMap<u64, usize> = BTreeMap::new();
    let mut triples = HashSet::new();
    let next_temporal = loop {
        let Some((n, line)) = lines.next() else {
            return Err(corrupt(0, "missing #END"));
        };
        if let Some(counter) = line.strip_prefix("#END\t") {
            break number(counter, n, "temporal counter")?;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let ["L", id, src, dst, sig, temporal] = fields.as_slice() else {
            return Err(corrupt(n, "expected a 6-field L record"));
        };
        let id = LinkId(number(id, n, "link id")?);
        if links.last().is_some_and(|prev| prev.id >= id) {
            return Err(corrupt(n, format!("{id} out of order")));
        }
        let source = KnnId(number(src, n, "source id")?);
        let destination = KnnId(number(dst, n, "destination id")?);
        for knn in [source, destination] {
            if knn.0 == 0 || knn.0 > knns.len() as u64 {
                return Err(StoreError::DanglingLink {
                    line: n,
                    link: id,
                    knn,
                });
            }
        }
        let well_formed =
            sig.len() == 2 && sig.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        let performance = well_formed
            .then(|| u8::from_str_radix(sig, 16).ok())
            .flatten()
            .and_then(|bits| Performance::from_signature(LinkSignature(bits)))
            .ok_or_else(|| corrupt(n, format!("bad signature {sig:?}")))?;
        let temporal = number(temporal, n, "temporal")?;
        if let Some(first) = stamps.insert(temporal, n) {
            return Err(corrupt(
                n,
                format!("temporal {temporal} already used on line {first}"),
            ));
        }
        if !triples.insert((source, destination, performance)) {
            return Err(corrupt(n, "duplicate link"));
        }
        let properties = LinkProperties::new(source, destination, performance, temporal)
            .map_err(|e| corrupt(n, e.to_string()))?;
        let cross_plane =
            knns[source.0 as usize - 1].domain != knns[destination.0 as usize - 1].domain;
        links.push(Link {
            id,
            properties,
            kind: LinkKind::Natural,
            cross_plane,
        });
    };

    if let Some((n, _)) = lines.next() {
        return Err(corrupt(n, "content after #END"));
    }
    if let Some((&max, &n)) = stamps.last_key_value() {
        if max >= next_temporal {
            return Err(corrupt(
                n,
                format!("temporal {max} is not below the counter {next_temporal}"),
            ));
        }
    }
    if next_temporal == 0 {
        return Err(corrupt(0, "temporal counter must be positive"));
    }

    let graph = Graph::restore(knns, links, next_temporal);
    graph.audit()?;
    Ok(graph)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DotOptions {
    pub include_unnatural: bool,
}

fn dot_quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz digraph with one `cluster_<domain>` subgraph per plane. Edges
/// are labelled with their property tokens; unnatural edges, when included,
/// are dashed.
pub fn export_dot(graph: &Graph, options: DotOptions) -> String {
    let mut out = String::from("digraph ils {\n");

    let mut planes: BTreeMap<&str, Vec<&Knn>> = BTreeMap::new();
    for knn in graph.knns() {
        planes.entry(knn.domain.as_str()).or_default().push(knn);
    }
    for (domain, knns) in &planes {
        let _ = writeln!(
            out,
            "  subgraph {} {{",
            dot_quote(&format!("cluster_{domain}"))
        );
        let _ = writeln!(out, "    label={};", dot_quote(domain));
        for knn in knns {
            let _ = writeln!(
                out,
                "    n{} [label={}];",
                knn.id.0,
                dot_quote(&knn.qualified_name())
            );
        }
        out.push_str("  }\n");
    }

    let transient = if options.include_unnatural {
        graph.transient_unnatural_links()
    } else {
        Vec::new()
    };
    let edges = graph
        .links()
        .copied()
        .filter(|l| options.include_unnatural || l.kind == LinkKind::Natural)
        .chain(transient);
    for link in edges {
        let style = match link.kind {
            LinkKind::Natural => "",
            LinkKind::Unnatural => ", style=dashed",
        };
        let _ = writeln!(
            out,
            "  n{} -> n{} [label={}{style}];",
            link.source().0,
            link.destination().0,
            dot_quote(&link.performance().to_string())
        );
    }
    out.push_str("}\n");
    out
}
