//! The `ils` command-line front end.
//!
//! Results go to standard output and diagnostics to standard error. The
//! exit code is 0 on success, 1 on domain errors (parse errors, unknown
//! seeds, unreadable snapshots) and 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::encoder::{embed, parse_statements};
use crate::linkdb::Graph;
use crate::model::KnnId;
use crate::store::{export_dot, load_from_path, save_to_path, DotOptions};
use crate::threader::{stats_table, RetrievalOptions, Retriever, ThreadStats, DEFAULT_MAX_DEPTH};

pub const DB_ENV: &str = "ILS_DB";
pub const DEFAULT_DB: &str = "./kb.ils";

#[derive(Debug, Parser)]
#[command(
    name = "ils",
    version,
    about = "Embed facts into a knowledge network and pull threads out of it"
)]
struct Cli {
    /// Snapshot file (falls back to $ILS_DB, then ./kb.ils)
    #[arg(long, global = true, value_name = "PATH")]
    db: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RetrievalArgs {
    /// Maximum links per thread
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH, value_parser = parse_depth)]
    max_depth: usize,
    /// Also follow validated unnatural links
    #[arg(long)]
    include_unnatural: bool,
    /// Emit every prefix instead of only maximal threads
    #[arg(long)]
    all_prefixes: bool,
}

fn parse_depth(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(0) => Err("must be at least 1".to_string()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

impl RetrievalArgs {
    fn options(&self) -> RetrievalOptions {
        RetrievalOptions {
            max_depth: self.max_depth,
            include_unnatural: self.include_unnatural,
            maximal_only: !self.all_prefixes,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embed DSL files into the snapshot, creating it if needed
    Embed {
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
    },
    /// List the knowledge threads starting at a seed
    Threads {
        /// Seed as domain/label
        #[arg(long, value_name = "QUALIFIED")]
        seed: String,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// Thread statistics per seed (all KNNs when --seeds is absent)
    Stats {
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        seeds: Option<Vec<String>>,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// Write the graph as Graphviz DOT
    Export {
        #[arg(long)]
        include_unnatural: bool,
    },
    /// Run the consistency audit
    Audit,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    fn domain(err: impl std::fmt::Display) -> Self {
        Failure::Domain(err.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Runs `ils` with the process's standard streams and environment.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(
        argv,
        std::env::var_os(DB_ENV),
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}

/// Runs `ils` against explicit streams. `env_db` stands in for `$ILS_DB`.
pub fn run_with<I, T>(
    argv: I,
    env_db: Option<OsString>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    2
                }
            };
        }
    };
    let db = cli
        .db
        .clone()
        .or_else(|| env_db.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DB));

    let result = match &cli.command {
        Command::Embed { files } => cmd_embed(&db, files, out, err),
        Command::Threads { seed, retrieval } => cmd_threads(&db, seed, retrieval, out),
        Command::Stats { seeds, retrieval } => cmd_stats(&db, seeds.as_deref(), retrieval, out),
        Command::Export { include_unnatural } => cmd_export(&db, *include_unnatural, out),
        Command::Audit => cmd_audit(&db, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Domain(msg)) => {
            let _ = writeln!(err, "ils: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "ils: {msg}");
            2
        }
    }
}

fn open(db: &Path) -> Result<Graph, Failure> {
    if !db.exists() {
        return Err(Failure::Domain(format!("no snapshot at {}", db.display())));
    }
    load_from_path(db).map_err(|e| Failure::Domain(format!("{}: {e}", db.display())))
}

fn resolve_seed(graph: &Graph, qualified: &str) -> Result<KnnId, Failure> {
    if qualified.split_once('/').is_none() {
        return Err(Failure::Usage(format!(
            "seed {qualified:?} must be written as domain/label"
        )));
    }
    graph
        .find_qualified(qualified)
        .ok_or_else(|| Failure::Domain(format!("unknown seed {qualified}")))
}

fn name_of(graph: &Graph, id: KnnId) -> String {
    graph
        .knn(id)
        .map(|k| k.qualified_name())
        .unwrap_or_else(|| id.to_string())
}

fn cmd_embed(db: &Path, files: &[PathBuf], out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut graph = if db.exists() { open(db)? } else { Graph::new() };

    let mut parsed = Vec::new();
    let mut parse_failed = false;
    for file in files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| Failure::Domain(format!("{}: {e}", file.display())))?;
        match parse_statements(&text) {
            Ok(statements) => parsed.push((file, statements)),
            Err(errors) => {
                parse_failed = true;
                for e in errors.0 {
                    let _ = writeln!(err, "{}:{}: {}", file.display(), e.line, e.kind);
                }
            }
        }
    }
    if parse_failed {
        return Err(Failure::Domain(
            "parse errors; snapshot left unchanged".into(),
        ));
    }

    let mut embed_failed = false;
    for (file, statements) in &parsed {
        let report = embed(&mut graph, statements);
        for issue in &report.errors {
            embed_failed = true;
            let _ = writeln!(err, "{}:{}: {}", file.display(), issue.line, issue.error);
        }
        let _ = writeln!(out, "{}: {report}", file.display());
    }
    save_to_path(&graph, db).map_err(|e| Failure::Domain(format!("{}: {e}", db.display())))?;
    if embed_failed {
        return Err(Failure::Domain("some statements were not embedded".into()));
    }
    Ok(())
}

fn cmd_threads(db: &Path, seed: &str, args: &RetrievalArgs, out: &mut dyn Write) -> CmdResult {
    let graph = open(db)?;
    let seed = resolve_seed(&graph, seed)?;
    let options = args.options();
    let retriever = Retriever::new(&graph, options.include_unnatural);
    let threads = retriever.threads(seed, &options).map_err(Failure::domain)?;
    let mut text = String::new();
    for thread in &threads {
        let names: Vec<String> = thread.nodes().iter().map(|&n| name_of(&graph, n)).collect();
        text.push_str(&format!(
            "{}  [strength={}]\n",
            names.join(" -> "),
            thread.strength()
        ));
    }
    out.write_all(text.as_bytes()).map_err(Failure::domain)
}

/// Aligned text table: seed, thread count, cone level, ascending lengths.
pub fn render_stats(graph: &Graph, rows: &[ThreadStats]) -> String {
    let header = ["seed", "threads", "cone_level", "lengths"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            let lengths: Vec<String> = r.lengths.iter().map(usize::to_string).collect();
            [
                name_of(graph, r.seed),
                r.thread_count.to_string(),
                r.cone_level.to_string(),
                lengths.join(","),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut text = String::new();
    let mut line = |cells: [&str; 4]| {
        for (i, cell) in cells.iter().enumerate() {
            if i == 3 {
                text.push_str(cell);
            } else {
                text.push_str(&format!("{cell:<w$}  ", w = widths[i]));
            }
        }
        text.push('\n');
    };
    line(header);
    for row in &body {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    text
}

fn cmd_stats(
    db: &Path,
    seeds: Option<&[String]>,
    args: &RetrievalArgs,
    out: &mut dyn Write,
) -> CmdResult {
    let graph = open(db)?;
    let ids = match seeds {
        Some(names) => names
            .iter()
            .map(|s| resolve_seed(&graph, s.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        None => graph.knns().map(|k| k.id).collect(),
    };
    let rows = stats_table(&graph, &ids, &args.options()).map_err(Failure::domain)?;
    out.write_all(render_stats(&graph, &rows).as_bytes())
        .map_err(Failure::domain)
}

fn cmd_export(db: &Path, include_unnatural: bool, out: &mut dyn Write) -> CmdResult {
    let graph = open(db)?;
    let dot = export_dot(&graph, DotOptions { include_unnatural });
    out.write_all(dot.as_bytes()).map_err(Failure::domain)
}

fn cmd_audit(db: &Path, out: &mut dyn Write) -> CmdResult {
    let graph = open(db)?;
    graph.audit().map_err(Failure::domain)?;
    writeln!(
        out,
        "audit ok: {} knns, {} links",
        graph.knn_count(),
        graph.link_count()
    )
    .map_err(Failure::domain)
}
