//! Command-line entry point.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use canonlab_core::{Error, Result};

use crate::pipeline;
use crate::server::{self, AppState, ServiceState};
use crate::sessions::LexiconState;
use crate::workspace::Workspace;

/// Exit status for missing or stale upstream artifacts.
pub const EXIT_DEPENDENCY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "canonlab", version, about = "Canon lexicon, disclosure classification and engagement analysis")]
pub struct Cli {
    /// Workspace root.
    #[arg(short, long, global = true, default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create the workspace layout, a default config and an empty registry.
    Init,
    /// Load a comment dump into the corpus snapshot.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Resolve pronouns, learn the phrase vocabulary and tokenize.
    Vocab,
    /// Build phrase embeddings and the document-embedding table.
    Embed,
    /// Import the seed lexicon or make expansion decisions.
    Lexicon {
        #[command(subcommand)]
        action: Option<LexiconAction>,
    },
    /// Serve the lexicon expansion endpoints.
    LexiconServe {
        #[arg(long)]
        addr: Option<SocketAddr>,
    },
    /// Extract the feature matrix.
    Features,
    /// Draw the random and biased annotation pools.
    Pool,
    /// Import labels for a pool from `comment_id<TAB>label` lines.
    Annotate {
        #[arg(long)]
        pool: String,
        #[arg(long)]
        input: PathBuf,
    },
    /// Serve the annotation endpoints for the configured pool.
    AnnotateServe {
        #[arg(long)]
        addr: Option<SocketAddr>,
    },
    /// Tune and fit the two final classifiers and the stacker.
    Train,
    /// Label every comment with the pooled ensemble.
    Predict,
    /// Multitask elastic-net feature importance on predicted labels.
    Importance,
    /// Interrupted time series around first disclosures.
    Its,
    /// Tenure regressions.
    Tenure,
    /// List registered artifacts and whether each is current.
    Status,
}

#[derive(Subcommand, Debug)]
pub enum LexiconAction {
    /// Import the configured seed and rebuild the canon.
    Import,
    /// Print ranked suggestions, for a query phrase or the whole lexicon.
    Suggest {
        #[arg(short, long)]
        query: Option<String>,
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Add a phrase under one or more comma-separated dimensions.
    Accept {
        phrase: String,
        #[arg(short, long, value_delimiter = ',', required = true)]
        dimensions: Vec<String>,
    },
    /// Exclude a phrase from future suggestions.
    Reject { phrase: String },
}

/// Parse arguments, run one subcommand and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(msg) => {
            if !msg.is_empty() {
                println!("{msg}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::MissingArtifact(_) | Error::Stale { .. } => EXIT_DEPENDENCY,
                _ => 1,
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<String> {
    let root = cli.workspace;
    if let Command::Init = cli.command {
        Workspace::init(&root)?;
        return Ok(format!("initialized workspace at {}", root.display()));
    }
    let mut ws = Workspace::open(&root)?;
    match cli.command {
        Command::Init => unreachable!("handled above"),
        Command::Ingest { input } => pipeline::ingest(&mut ws, input.as_deref()),
        Command::Vocab => pipeline::vocab(&mut ws),
        Command::Embed => pipeline::embed(&mut ws),
        Command::Lexicon { action } => lexicon(&mut ws, action.unwrap_or(LexiconAction::Import)),
        Command::LexiconServe { addr } => serve(ws, addr, true, false),
        Command::Features => pipeline::features(&mut ws),
        Command::Pool => pipeline::pool(&mut ws),
        Command::Annotate { pool, input } => pipeline::annotate_import(&mut ws, &pool, &input),
        Command::AnnotateServe { addr } => serve(ws, addr, false, true),
        Command::Train => pipeline::train(&mut ws),
        Command::Predict => pipeline::predict(&mut ws),
        Command::Importance => pipeline::importance(&mut ws),
        Command::Its => pipeline::its(&mut ws),
        Command::Tenure => pipeline::tenure(&mut ws),
        Command::Status => Ok(status(&ws)),
    }
}

fn lexicon(ws: &mut Workspace, action: LexiconAction) -> Result<String> {
    if let LexiconAction::Import = action {
        return pipeline::lexicon_import(ws);
    }
    let mut state = LexiconState::open(ws)?;
    match action {
        LexiconAction::Import => unreachable!("handled above"),
        LexiconAction::Suggest { query, n } => {
            let n = n.unwrap_or(state.suggestions);
            Ok(serde_json::to_string_pretty(&state.suggest(query.as_deref(), n))?)
        }
        LexiconAction::Accept { phrase, dimensions } => {
            let added = state.accept(ws, &phrase, &dimensions)?;
            Ok(if added { format!("accepted {phrase}") } else { format!("{phrase} is already in the lexicon") })
        }
        LexiconAction::Reject { phrase } => {
            state.reject(ws, &phrase)?;
            Ok(format!("rejected {phrase}"))
        }
    }
}

fn serve(ws: Workspace, addr: Option<SocketAddr>, lexicon: bool, annotate: bool) -> Result<String> {
    let addr = match addr {
        Some(a) => a,
        None => ws.config.server.addr.parse().map_err(|e| Error::invalid(format!("server.addr: {e}")))?,
    };
    let state = AppState::new(ServiceState::load(ws, lexicon, annotate)?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(server::serve(state, addr))?;
    Ok(String::new())
}

fn status(ws: &Workspace) -> String {
    ws.registry
        .artifacts
        .iter()
        .map(|(name, e)| match ws.require(name) {
            Ok(_) => format!("{name:<28} current  {}", e.path),
            Err(err) => format!("{name:<28} STALE    {err}"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}
