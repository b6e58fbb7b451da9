use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};

use musicscaffold::api::{router, rule_list};
use musicscaffold::{App, Settings};

#[derive(Debug, Parser)]
#[command(name = "musicscaffold", version, about = "Text-to-music co-creation service")]
struct Cli {
    /// Corpus, library and audit log live here.
    #[arg(long, env = "MUSICSCAFFOLD_DATA", default_value = "musicscaffold-data", global = true)]
    data_dir: PathBuf,
    /// Replacement lexicon registry (needs --templates too).
    #[arg(long, env = "MUSICSCAFFOLD_LEXICON", global = true, requires = "templates")]
    lexicon: Option<PathBuf>,
    /// Replacement template registry (needs --lexicon too).
    #[arg(long, env = "MUSICSCAFFOLD_TEMPLATES", global = true, requires = "lexicon")]
    templates: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "MUSICSCAFFOLD_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Add a corpus directory to the segment corpus.
    Ingest { dir: PathBuf },
    /// Add the built-in 20-segment starter corpus.
    SeedCorpus,
    /// Interpret, sketch, render and save one intent, printing the result as JSON.
    Run {
        #[arg(long)]
        text: String,
        /// Use the lexicon interpreter and the local renderer only.
        #[arg(long)]
        local: bool,
        /// Store the session as a revision of this one.
        #[arg(long)]
        parent: Option<String>,
    },
    /// Refinement rule registry.
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
    /// Write a session (plan, MIDI sketches, reports) as a zip.
    Export {
        session: String,
        /// Defaults to <session>.zip in the current directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum RulesCommand {
    List {
        #[arg(long)]
        json: bool,
    },
}

fn open(cli: &Cli) -> anyhow::Result<App> {
    let mut settings = Settings::from_env(&cli.data_dir);
    if let (Some(lexicon), Some(templates)) = (&cli.lexicon, &cli.templates) {
        settings.registries = Some((lexicon.clone(), templates.clone()));
    }
    App::open(settings).with_context(|| format!("opening data directory {}", cli.data_dir.display()))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let app = open(&cli)?;

    match cli.command {
        Command::Serve { addr } => {
            if app.corpus_len() == 0 {
                tracing::warn!("segment corpus is empty; /sketch will answer 409 until one is ingested");
            }
            let listener = tokio::net::TcpListener::bind(addr)
                .await
                .with_context(|| format!("binding {addr}"))?;
            tracing::info!("listening on {}", listener.local_addr()?);
            axum::serve(listener, router(Arc::new(app)))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::Ingest { dir } => {
            let added = app.ingest(&dir).with_context(|| format!("ingesting {}", dir.display()))?;
            println!("ingested {added} segments; corpus now holds {}", app.corpus_len());
        }
        Command::SeedCorpus => {
            let added = app.seed_corpus()?;
            println!("added {added} seed segments; corpus now holds {}", app.corpus_len());
        }
        Command::Run { text, local, parent } => {
            let report = app.run(&text, local, parent).await?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Rules {
            command: RulesCommand::List { json },
        } => {
            let rules = rule_list(&app);
            if json {
                println!("{}", serde_json::to_string_pretty(&rules)?);
            } else {
                for r in rules {
                    println!("{:<20} {:<18} {}", r.name, r.applies_to.as_str(), r.description);
                }
            }
        }
        Command::Export { session, output } => {
            let bytes = app.library.export_session(&session)?;
            let path = output.unwrap_or_else(|| PathBuf::from(format!("{session}.zip")));
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
