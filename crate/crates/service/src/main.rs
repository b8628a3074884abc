use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use datamate_core::config::Config;
use datamate_core::corpus::{bundled, load_corpus};
use datamate_core::datamation::{generate_with, render_svg};
use datamate_core::decomposer::resolve;
use datamate_core::eval::{run_eval, EvalOptions, EvalRecord, IdentitySystem, SystemUnderTest};
use datamate_core::ingest::{ingest_csv, load_dataset_dir, CsvFile, TypeHints};
use datamate_core::linker::serialize_schema;
use datamate_core::session::{suggestions_for, SessionStore};
use datamate_core::sql::transpile_to_sql;
use datamate_core::text::validate;
use datamate_core::{execute_with, parse, serialize, Dataset, QdmrPipeline};
use datamate_service::{serve, AppState};

#[derive(Parser)]
#[command(
    name = "datamate",
    version,
    about = "Question decompositions over CSV data, with animated explanations"
)]
struct Cli {
    /// TOML config file; DATAMATE_* environment variables override it.
    #[arg(long, global = true, env = "DATAMATE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct DataArg {
    /// CSV file, directory of CSV files, or bundled:<name>.
    #[arg(short, long)]
    data: String,
    /// JSON object of column type hints.
    #[arg(long)]
    types: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PipelineArgs {
    #[command(flatten)]
    data: DataArg,
    /// Pipeline text, or @file to read it from a file.
    pipeline: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    /// Return each record's gold pipeline (harness sanity check).
    Identity,
    /// Link and decompose the question with the configured strategy.
    Resolve,
}

#[derive(Subcommand)]
enum Command {
    /// Load CSV data and print the inferred schema.
    Ingest {
        #[command(flatten)]
        data: DataArg,
    },
    /// Answer a question: pipeline, answer and optionally the datamation.
    Ask {
        #[command(flatten)]
        data: DataArg,
        question: String,
        /// Write the datamation document here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Execute a pipeline and print its answer.
    Exec {
        #[command(flatten)]
        args: PipelineArgs,
        /// Print every step result as well.
        #[arg(long)]
        trace: bool,
    },
    /// Check a pipeline against the schema; exits 1 when invalid.
    Validate {
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Compile a pipeline into a datamation/v1 document.
    Compile {
        #[command(flatten)]
        args: PipelineArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write one SVG per key frame.
    RenderFrames {
        #[command(flatten)]
        args: PipelineArgs,
        #[arg(short, long, default_value = "frames")]
        out_dir: PathBuf,
    },
    /// Print the SQL equivalent of a pipeline.
    Transpile {
        #[command(flatten)]
        args: PipelineArgs,
    },
    /// Score a system on a JSONL corpus.
    Eval {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "resolve")]
        system: System,
        /// Also require the reference SQL engine to agree.
        #[arg(long)]
        sql_check: bool,
        /// Print the full report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        /// Overrides server.bind from the config.
        #[arg(long)]
        bind: Option<String>,
    },
}

fn load_data(arg: &DataArg) -> Result<Dataset> {
    let hints: TypeHints = match &arg.types {
        Some(p) => {
            serde_json::from_str(&std::fs::read_to_string(p)?).context("reading type hints")?
        }
        None => TypeHints::new(),
    };
    if let Some(name) = arg.data.strip_prefix("bundled:") {
        return bundled(name).with_context(|| format!("no bundled dataset named '{name}'"));
    }
    let path = Path::new(&arg.data);
    if path.is_dir() {
        return Ok(load_dataset_dir(path)?);
    }
    let contents = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("data.csv");
    Ok(ingest_csv(
        &[CsvFile {
            name,
            contents: &contents,
        }],
        &hints,
    )?)
}

fn load_pipeline(text: &str) -> Result<QdmrPipeline> {
    let text = match text.strip_prefix('@') {
        Some(file) => std::fs::read_to_string(file).with_context(|| format!("reading {file}"))?,
        None => text.to_string(),
    };
    Ok(parse(text.trim())?)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let engine = config.engine();
    match cli.command {
        Command::Ingest { data } => {
            let ds = load_data(&data)?;
            println!("{}", serialize_schema(ds.schema()).text);
            for (t, table) in ds.schema().tables().iter().enumerate() {
                println!("{}: {} rows", table.name, ds.row_count(t));
            }
            for q in suggestions_for(&ds, &engine.resolve) {
                println!("try: {q}");
            }
        }
        Command::Ask {
            data,
            question,
            out,
        } => {
            let ds = load_data(&data)?;
            let res = resolve(&question, &ds, &engine.resolve)?;
            let doc = generate_with(&res.pipeline, &ds, &engine.datamation)?;
            println!("{}", serialize(&res.pipeline));
            println!("{}", serde_json::to_string(&doc.answer)?);
            if let Some(p) = out {
                std::fs::write(&p, doc.to_json_pretty())?;
            }
        }
        Command::Exec { args, trace } => {
            let ds = load_data(&args.data)?;
            let p = load_pipeline(&args.pipeline)?;
            let t = execute_with(&p, &ds, engine.datamation.exec)?;
            if trace {
                print_json(&t)?;
            } else {
                print_json(&t.answer)?;
            }
        }
        Command::Validate { args } => {
            let ds = load_data(&args.data)?;
            let report = validate(&load_pipeline(&args.pipeline)?, ds.schema());
            println!("{report}");
            if !report.valid {
                std::process::exit(1);
            }
        }
        Command::Compile { args, out } => {
            let ds = load_data(&args.data)?;
            let doc = generate_with(&load_pipeline(&args.pipeline)?, &ds, &engine.datamation)?;
            write_or_print(out.as_deref(), &doc.to_json_pretty())?;
        }
        Command::RenderFrames { args, out_dir } => {
            let ds = load_data(&args.data)?;
            let doc = generate_with(&load_pipeline(&args.pipeline)?, &ds, &engine.datamation)?;
            std::fs::create_dir_all(&out_dir)?;
            for i in 0..doc.keyframes.len() {
                let path = out_dir.join(format!("frame_{i:02}.svg"));
                std::fs::write(&path, render_svg(&doc, i).expect("index in range"))?;
                println!("{}", path.display());
            }
        }
        Command::Transpile { args } => {
            let ds = load_data(&args.data)?;
            println!(
                "{}",
                transpile_to_sql(&load_pipeline(&args.pipeline)?, ds.schema())?
            );
        }
        Command::Eval {
            corpus,
            system,
            sql_check,
            json,
        } => {
            let loaded =
                load_corpus(&corpus).with_context(|| format!("reading {}", corpus.display()))?;
            for e in &loaded.errors {
                eprintln!("line {}: {}", e.line, e.message);
            }
            let resolver = |r: &EvalRecord, d: &Dataset| {
                resolve(&r.question, d, &engine.resolve)
                    .map(|res| serialize(&res.pipeline))
                    .map_err(|e| e.to_string())
            };
            let sut: &dyn SystemUnderTest = match system {
                System::Identity => &IdentitySystem,
                System::Resolve => &resolver,
            };
            let report = run_eval(&loaded.cases, sut, EvalOptions { sql_check });
            if json {
                print_json(&report)?;
            } else {
                print!("{}", report.summary.to_table());
            }
            if !loaded.errors.is_empty() {
                bail!("{} corpus lines could not be loaded", loaded.errors.len());
            }
        }
        Command::Serve { bind } => {
            let bind = bind.unwrap_or(config.server.bind.clone());
            let state = AppState {
                store: SessionStore::new(engine),
                snapshot_dir: config.server.snapshot_dir.clone(),
            };
            let restored = state.restore_snapshots()?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&bind).await?;
                tracing::info!(addr = %listener.local_addr()?, restored, "listening");
                serve(listener, Arc::new(state)).await
            })?;
        }
    }
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}
