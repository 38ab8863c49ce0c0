use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sheetqa_core::engine::{Ablation, AnswerStatus};
use sheetqa_core::eval::{ablation_table, run_eval, run_eval_all};
use sheetqa_core::grid::{load_workbook_with, LoadOptions, Sheet, Workbook};
use sheetqa_core::sql::{execute, parse_sql, validate, RelationalTable};
use sheetqa_core::structure::compute_profile;
use sheetqa_core::{Engine, EngineConfig};

/// Exit code for an abstained query.
const EXIT_ABSTAINED: u8 = 3;

#[derive(Parser)]
#[command(name = "sheetqa", version, about = "Question answering over spreadsheets")]
struct Cli {
    /// Field delimiter for CSV input (a single character, or `tab`).
    #[arg(long, global = true, default_value = ",")]
    delimiter: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationArg {
    Full,
    NoFallback,
    ChunkOnly,
    SqlOnly,
    All,
}

impl AblationArg {
    fn single(self) -> Result<Ablation> {
        Ok(match self {
            AblationArg::Full => Ablation::Full,
            AblationArg::NoFallback => Ablation::NoFallback,
            AblationArg::ChunkOnly => Ablation::ChunkOnly,
            AblationArg::SqlOnly => Ablation::SqlOnly,
            AblationArg::All => bail!("`all` is only accepted by eval"),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the structural profile of every sheet as JSON.
    Profile {
        #[arg(long)]
        file: PathBuf,
    },
    /// Validate and run a SQL query against a flat sheet.
    Sql {
        #[arg(long)]
        file: PathBuf,
        /// Defaults to the first sheet.
        #[arg(long)]
        sheet: Option<String>,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = sheetqa_core::sql::DEFAULT_ROW_CAP)]
        row_cap: usize,
    },
    /// Answer a question about one sheet.
    Query {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        sheet: Option<String>,
        #[arg(long)]
        question: String,
        #[arg(long, value_enum)]
        ablation: Option<AblationArg>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run a JSONL dataset and report accuracy and recall.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        ablation: AblationArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and persist block and relational indexes for every workbook in a directory.
    Index {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_delimiter(s: &str) -> Result<u8> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => bail!("delimiter must be a single ASCII character, got {s:?}"),
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => Ok(EngineConfig::default()),
    }
}

fn pick_sheet<'a>(wb: &'a Workbook, name: Option<&str>) -> Result<&'a Sheet> {
    match name {
        Some(n) => wb.sheet(n).ok_or_else(|| {
            let names: Vec<&str> = wb.sheets().iter().map(|s| s.name()).collect();
            anyhow!("no sheet {n:?}; available: {}", names.join(", "))
        }),
        None => Ok(&wb.sheets()[0]),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_profile(wb: &Workbook, config: &EngineConfig) -> Result<()> {
    let mut out = Vec::new();
    for s in wb.sheets() {
        let p = compute_profile(s, &config.complexity)?;
        out.push(json!({ "sheet": s.name(), "profile": p }));
    }
    print_json(&serde_json::Value::Array(out))
}

fn cmd_sql(sheet: &Sheet, query: &str, row_cap: usize, config: &EngineConfig) -> Result<()> {
    let profile = compute_profile(sheet, &config.complexity)?;
    let table = RelationalTable::from_sheet(sheet, &profile)?;
    let validated = validate(parse_sql(query)?, &table.schema, row_cap)?;
    let rows = execute(&validated, &table)?;
    print_json(&json!({ "sql": validated.text(), "result": rows }))
}

fn cmd_query(sheet: &Sheet, question: &str, config: EngineConfig, as_json: bool) -> Result<ExitCode> {
    let engine = Engine::from_config(config)?;
    let index = engine.index_sheet(sheet)?;
    let answer = engine.run_query(&index, question)?;
    if as_json {
        let s_ctx: Vec<_> = answer
            .path_taken
            .iter()
            .filter_map(|r| r.s_ctx.map(|v| json!({ "stage": r.to_string(), "s_ctx": v })))
            .collect();
        print_json(&json!({
            "status": answer.status,
            "answer": answer.answer,
            "evidence": answer.evidence,
            "path_taken": answer.path_labels(),
            "s_ctx": s_ctx,
            "confidence": answer.confidence,
            "sql": answer.sql,
            "budget": answer.budget,
        }))?;
    } else {
        match &answer.answer {
            Some(a) => println!("{a}"),
            None => println!("(abstained)"),
        }
        println!("path: {}", answer.path_labels().join(" -> "));
        if let Some(sql) = &answer.sql {
            println!("sql: {sql}");
        }
        for item in &answer.evidence.items {
            println!("  row {}: {}", item.row + 1, item.cells.join(" | "));
        }
    }
    Ok(match answer.status {
        AnswerStatus::Answered => ExitCode::SUCCESS,
        AnswerStatus::Abstained => ExitCode::from(EXIT_ABSTAINED),
    })
}

fn cmd_eval(dataset: &Path, ablation: AblationArg, config: EngineConfig, out: Option<&Path>) -> Result<()> {
    let gateway = Arc::new(config.llm.build()?);
    let value = if let AblationArg::All = ablation {
        let reports = run_eval_all(dataset, &config, gateway)?;
        print!("{}", ablation_table(&reports));
        serde_json::to_value(&reports)?
    } else {
        let cfg = EngineConfig { ablation: ablation.single()?, ..config };
        let report = run_eval(dataset, &cfg, gateway)?;
        print!("{}", report.to_table());
        serde_json::to_value(&report)?
    };
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&value)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// File-system safe version of a sheet name.
fn safe_name(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn cmd_index(dir: &Path, out: &Path, config: EngineConfig, opts: LoadOptions) -> Result<()> {
    let engine = Engine::from_config(config)?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "xlsx" | "csv" | "tsv" | "txt"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no workbooks found in {}", dir.display());
    }
    for file in files {
        let wb = load_workbook_with(&file, opts)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("workbook");
        let target = out.join(safe_name(stem));
        fs::create_dir_all(&target)?;
        for idx in engine.index_workbook(&wb)? {
            let base = safe_name(idx.sheet.name());
            let chunks = target.join(format!("{base}.chunks.jsonl"));
            let mut w = BufWriter::new(File::create(&chunks)?);
            idx.chunks.write_jsonl(&mut w)?;
            w.flush()?;
            fs::write(target.join(format!("{base}.profile.json")), serde_json::to_string_pretty(&idx.profile)?)?;
            let table = match &idx.relational {
                Some(t) => {
                    fs::write(target.join(format!("{base}.table.json")), serde_json::to_string(t)?)?;
                    "table"
                }
                None => "no table",
            };
            println!("{}: {} blocks, {table}", chunks.display(), idx.chunks.len());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let opts = LoadOptions { delimiter: parse_delimiter(&cli.delimiter)? };
    let load = |p: &Path| load_workbook_with(p, opts).with_context(|| format!("loading {}", p.display()));
    match cli.command {
        Command::Profile { file } => cmd_profile(&load(&file)?, &EngineConfig::default())?,
        Command::Sql { file, sheet, query, row_cap } => {
            let wb = load(&file)?;
            cmd_sql(pick_sheet(&wb, sheet.as_deref())?, &query, row_cap, &EngineConfig::default())?
        }
        Command::Query { file, sheet, question, ablation, config, json } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(a) = ablation {
                cfg.ablation = a.single()?;
            }
            let wb = load(&file)?;
            return cmd_query(pick_sheet(&wb, sheet.as_deref())?, &question, cfg, json);
        }
        Command::Eval { dataset, ablation, config, out } => {
            cmd_eval(&dataset, ablation, load_config(config.as_deref())?, out.as_deref())?
        }
        Command::Index { dir, out, config } => cmd_index(&dir, &out, load_config(config.as_deref())?, opts)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
