//! The knowledge encoder: a line-oriented fact DSL and its compiler into
//! KNNs and natural links.
//!
//! ```text
//! domain <name>
//! knn <label-or-qualified> [<key>=<value> ...]
//! link <label-or-qualified> -> <label-or-qualified> [: <prop>[,<prop>...]]
//! ```
//!
//! `#` starts a comment that runs to the end of the line. Attribute values
//! may be double-quoted; inside quotes `\"`, `\\`, `\n` and `\r` are
//! escapes. A qualified name is `<domain>/<label>`; a bare label binds to the
//! most recent `domain` line.
//!
//! A conjunction ("X can store, retrieve and process") is written as one
//! `link` line per conjunct sharing the same subject.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::linkdb::{Graph, LinkDbError};
use crate::model::{validate_name, Axis, KnnId, NameError, Performance, PerformancePolarity};

/// The six DSL property tokens and the polarities they stand for.
pub fn property_tokens() -> [(&'static str, PerformancePolarity); 6] {
    PerformancePolarity::ALL.map(|p| (p.token(), p))
}

/// A concept reference as written: bare `label` or `domain/label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConceptRef {
    pub domain: Option<String>,
    pub label: String,
}

impl ConceptRef {
    pub fn bare(label: impl Into<String>) -> Self {
        Self {
            domain: None,
            label: label.into(),
        }
    }

    pub fn qualified(domain: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            domain: Some(domain.into()),
            label: label.into(),
        }
    }

    fn parse(text: &str) -> Result<Self, NameError> {
        match text.split_once('/') {
            Some((domain, label)) => {
                validate_name(domain)?;
                validate_name(label)?;
                Ok(Self::qualified(domain, label))
            }
            None => {
                validate_name(text)?;
                Ok(Self::bare(text))
            }
        }
    }

    /// `(domain, label)` under the given domain context.
    pub fn resolve<'a>(&'a self, context: Option<&'a str>) -> Option<(&'a str, &'a str)> {
        let domain = self.domain.as_deref().or(context)?;
        Some((domain, &self.label))
    }
}

impl fmt::Display for ConceptRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.domain {
            Some(domain) => write!(f, "{domain}/{}", self.label),
            None => f.write_str(&self.label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementKind {
    DomainDecl(String),
    ConceptDecl {
        concept: ConceptRef,
        attributes: Vec<(String, String)>,
    },
    LinkDecl {
        subject: ConceptRef,
        object: ConceptRef,
        performance: Performance,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedStatement {
    /// 1-based source line.
    pub line: usize,
    pub kind: StatementKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown keyword {0:?}")]
    UnknownKeyword(String),
    #[error("bad property token {0:?}")]
    BadProperty(String),
    #[error("property list sets axis {0:?} twice")]
    ConflictingProperty(Axis),
    #[error("missing '->' between subject and object")]
    MissingArrow,
    #[error("unterminated quote")]
    UnterminatedQuote,
    #[error("{0} cannot link to itself")]
    SelfLink(String),
    #[error("{0}")]
    InvalidName(#[from] NameError),
    #[error("missing {0}")]
    MissingArgument(&'static str),
    #[error("unexpected {0:?}")]
    UnexpectedArgument(String),
    #[error("attribute {0:?} is not key=value")]
    BadAttribute(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

/// Every error found in one input, in line order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, err) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{err}")?;
        }
        Ok(())
    }
}

/// Splits a line into whitespace-separated tokens, dropping any comment.
/// Quotes group text (including whitespace and `#`) into the current token.
fn lex(line: &str) -> Result<Vec<String>, ParseErrorKind> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_token = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '#' => break,
            '"' => {
                in_token = true;
                loop {
                    match chars.next() {
                        None => return Err(ParseErrorKind::UnterminatedQuote),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('"') => current.push('"'),
                            Some('\\') => current.push('\\'),
                            Some('n') => current.push('\n'),
                            Some('r') => current.push('\r'),
                            Some(other) => {
                                current.push('\\');
                                current.push(other);
                            }
                            None => return Err(ParseErrorKind::UnterminatedQuote),
                        },
                        Some(other) => current.push(other),
                    }
                }
            }
            c if c.is_whitespace() => {
                if in_token {
                    tokens.push(std::mem::take(&mut current));
                    in_token = false;
                }
            }
            c => {
                in_token = true;
                current.push(c);
            }
        }
    }
    if in_token {
        tokens.push(current);
    }
    Ok(tokens)
}

fn parse_performance(list: &str) -> Result<Performance, ParseErrorKind> {
    list.split(',')
        .map(str::trim)
        .try_fold(Performance::EMPTY, |acc, token| {
            let polarity = PerformancePolarity::from_token(token)
                .ok_or_else(|| ParseErrorKind::BadProperty(token.to_string()))?;
            acc.with(polarity)
                .map_err(|dup| ParseErrorKind::ConflictingProperty(dup.0))
        })
}

fn single_name(text: &str, what: &'static str) -> Result<ConceptRef, ParseErrorKind> {
    let mut parts = text.split_whitespace();
    let name = parts.next().ok_or(ParseErrorKind::MissingArgument(what))?;
    if let Some(extra) = parts.next() {
        return Err(ParseErrorKind::UnexpectedArgument(extra.to_string()));
    }
    Ok(ConceptRef::parse(name)?)
}

fn parse_line(tokens: &[String], context: Option<&str>) -> Result<StatementKind, ParseErrorKind> {
    let (keyword, args) = tokens.split_first().expect("caller skips blank lines");
    match keyword.as_str() {
        "domain" => match args {
            [] => Err(ParseErrorKind::MissingArgument("domain name")),
            [name] => {
                validate_name(name)?;
                Ok(StatementKind::DomainDecl(name.clone()))
            }
            [_, extra, ..] => Err(ParseErrorKind::UnexpectedArgument(extra.clone())),
        },
        "knn" => {
            let (concept, attrs) = args
                .split_first()
                .ok_or(ParseErrorKind::MissingArgument("concept label"))?;
            let concept = ConceptRef::parse(concept)?;
            let attributes = attrs
                .iter()
                .map(|attr| {
                    let (key, value) = attr
                        .split_once('=')
                        .ok_or_else(|| ParseErrorKind::BadAttribute(attr.clone()))?;
                    validate_name(key)?;
                    Ok((key.to_string(), value.to_string()))
                })
                .collect::<Result<Vec<_>, ParseErrorKind>>()?;
            Ok(StatementKind::ConceptDecl {
                concept,
                attributes,
            })
        }
        "link" => {
            let rest = args.join(" ");
            let (ends, props) = match rest.split_once(':') {
                Some((ends, props)) => (ends, Some(props)),
                None => (rest.as_str(), None),
            };
            let (subject, object) = ends.split_once("->").ok_or(ParseErrorKind::MissingArrow)?;
            let subject = single_name(subject, "subject")?;
            let object = single_name(object, "object")?;
            let performance = match props {
                Some(list) => parse_performance(list)?,
                None => Performance::EMPTY,
            };
            let same = match (subject.resolve(context), object.resolve(context)) {
                (Some(a), Some(b)) => a == b,
                _ => subject == object,
            };
            if same {
                return Err(ParseErrorKind::SelfLink(subject.to_string()));
            }
            Ok(StatementKind::LinkDecl {
                subject,
                object,
                performance,
            })
        }
        other => Err(ParseErrorKind::UnknownKeyword(other.to_string())),
    }
}

/// Parses DSL text. Blank and comment-only lines are skipped; on failure
/// every erroneous line is reported, not just the first.
pub fn parse_statements(text: &str) -> Result<Vec<EmbedStatement>, ParseErrors> {
    let mut statements = Vec::new();
    let mut errors = Vec::new();
    let mut context: Option<String> = None;

    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let tokens = match lex(line) {
            Ok(tokens) if tokens.is_empty() => continue,
            Ok(tokens) => tokens,
            Err(kind) => {
                errors.push(ParseError {
                    line: line_no,
                    kind,
                });
                continue;
            }
        };
        match parse_line(&tokens, context.as_deref()) {
            Ok(kind) => {
                if let StatementKind::DomainDecl(name) = &kind {
                    context = Some(name.clone());
                }
                statements.push(EmbedStatement {
                    line: line_no,
                    kind,
                });
            }
            Err(kind) => errors.push(ParseError {
                line: line_no,
                kind,
            }),
        }
    }

    if errors.is_empty() {
        Ok(statements)
    } else {
        Err(ParseErrors(errors))
    }
}

fn render_value(value: &str) -> String {
    let plain = !value.is_empty()
        && !value
            .chars()
            .any(|c| c.is_whitespace() || c == '"' || c == '#');
    if plain {
        return value.to_string();
    }
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Writes one statement as a DSL line, without the trailing newline.
pub fn render_statement(kind: &StatementKind) -> String {
    match kind {
        StatementKind::DomainDecl(name) => format!("domain {name}"),
        StatementKind::ConceptDecl {
            concept,
            attributes,
        } => {
            let mut line = format!("knn {concept}");
            for (key, value) in attributes {
                line.push_str(&format!(" {key}={}", render_value(value)));
            }
            line
        }
        StatementKind::LinkDecl {
            subject,
            object,
            performance,
        } => {
            if performance.is_empty() {
                format!("link {subject} -> {object}")
            } else {
                format!("link {subject} -> {object} : {performance}")
            }
        }
    }
}

/// Serializes statements one per line. Parsing the result yields the same
/// statements, renumbered `1..=n`.
pub fn render(statements: &[EmbedStatement]) -> String {
    statements
        .iter()
        .map(|s| render_statement(&s.kind) + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("{0} has no domain: qualify it or declare a domain first")]
    UnknownDomain(ConceptRef),
    #[error(transparent)]
    Graph(#[from] LinkDbError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {error}")]
pub struct EmbedIssue {
    pub line: usize,
    pub error: EmbedError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmbedReport {
    pub knns_created: usize,
    pub knns_reused: usize,
    pub links_created: usize,
    pub statements: usize,
    pub errors: Vec<EmbedIssue>,
}

impl fmt::Display for EmbedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "knns_created={} links_created={} knns_reused={} statements={} errors={}",
            self.knns_created,
            self.links_created,
            self.knns_reused,
            self.statements,
            self.errors.len()
        )
    }
}

struct Embedder<'g> {
    graph: &'g mut Graph,
    context: Option<String>,
    /// Every KNN referenced in this run, and whether this run created it.
    touched: BTreeMap<KnnId, bool>,
}

impl Embedder<'_> {
    fn resolve(&self, concept: &ConceptRef) -> Result<(String, String), EmbedError> {
        concept
            .resolve(self.context.as_deref())
            .map(|(d, l)| (d.to_string(), l.to_string()))
            .ok_or_else(|| EmbedError::UnknownDomain(concept.clone()))
    }

    fn ensure(
        &mut self,
        (domain, label): &(String, String),
        attributes: &[(String, String)],
    ) -> Result<KnnId, EmbedError> {
        let existed = self.graph.find(domain, label).is_some();
        let id = self.graph.add_knn(label, domain, attributes)?;
        self.touched.entry(id).or_insert(!existed);
        Ok(id)
    }

    fn apply(&mut self, kind: &StatementKind) -> Result<bool, EmbedError> {
        match kind {
            StatementKind::DomainDecl(name) => {
                self.context = Some(name.clone());
                Ok(false)
            }
            StatementKind::ConceptDecl {
                concept,
                attributes,
            } => {
                let name = self.resolve(concept)?;
                self.ensure(&name, attributes)?;
                Ok(false)
            }
            StatementKind::LinkDecl {
                subject,
                object,
                performance,
            } => {
                // Resolve both ends before creating either KNN.
                let from = self.resolve(subject)?;
                let to = self.resolve(object)?;
                let source = self.ensure(&from, &[])?;
                let destination = self.ensure(&to, &[])?;
                self.graph.add_link(source, destination, *performance)?;
                Ok(true)
            }
        }
    }
}

/// Compiles parsed statements into the graph. Per-statement failures are
/// collected in the report and do not stop the run.
pub fn embed(graph: &mut Graph, statements: &[EmbedStatement]) -> EmbedReport {
    let mut embedder = Embedder {
        graph,
        context: None,
        touched: BTreeMap::new(),
    };
    let mut report = EmbedReport::default();
    for statement in statements {
        report.statements += 1;
        match embedder.apply(&statement.kind) {
            Ok(true) => report.links_created += 1,
            Ok(false) => {}
            Err(error) => report.errors.push(EmbedIssue {
                line: statement.line,
                error,
            }),
        }
    }
    report.knns_created = embedder
        .touched
        .values()
        .filter(|created| **created)
        .count();
    report.knns_reused = embedder.touched.len() - report.knns_created;
    report
}

/// Parses and embeds in one step.
pub fn embed_text(graph: &mut Graph, text: &str) -> Result<EmbedReport, ParseErrors> {
    let statements = parse_statements(text)?;
    Ok(embed(graph, &statements))
}
