use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use countlab::harness::{emit_report, localize_records, run_experiment, ExperimentConfig, ROOT_ENV};
use countlab::intervention::StrategyName;
use countlab::metrics::{read_records_jsonl, PredictionRecord};
use countlab::prompt::{ladder_for, resolve_ladders, PromptCategory};
use countlab::relevance::LocalizationRecord;
use countlab::scene::{generate_dataset, DatasetConfig, DatasetIndex, SceneManifest};

#[derive(Parser)]
#[command(name = "countlab", version, about = "Synthetic counting benchmark and attention intervention harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the dataset: PNG images, JSON manifests and index.json.
    Generate(GenerateArgs),
    /// Print prompt ladders, either as templates or resolved against a dataset.
    Prompts(PromptsArgs),
    /// Ask a backend every question of an experiment config and append JSONL records.
    Run(RunArgs),
    /// Relevance IoU readouts for records that carry attention captures.
    Relevance(RelevanceArgs),
    /// Aggregate records into report.json, report.csv and a bar plot.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Dataset config JSON; defaults to the full benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to $COUNTLAB_ROOT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PromptsArgs {
    /// Restrict to one ladder.
    #[arg(long)]
    category: Option<PromptCategory>,
    /// Resolve against every manifest of this dataset instead of printing templates.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's backend id.
    #[arg(long)]
    backend: Option<String>,
    /// Strategy name, or a path to a plan JSON file.
    #[arg(long)]
    plan: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Expected dataset master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct RelevanceArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Number of final layers to compose.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// JSONL output for localization rows.
    #[arg(long)]
    out: PathBuf,
    /// Directory for heatmap overlays.
    #[arg(long)]
    overlays: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Localization JSONL from the relevance command.
    #[arg(long)]
    localization: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn dataset_root(arg: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = arg {
        return Ok(p);
    }
    match std::env::var_os(ROOT_ENV) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => bail!("no dataset directory given (use --dataset or set {ROOT_ENV})"),
    }
}

fn load_manifests(root: &Path) -> Result<Vec<SceneManifest>> {
    let index = DatasetIndex::load(root).with_context(|| format!("reading {}", root.display()))?;
    Ok(index.load_manifests(root)?)
}

fn load_records(path: &Path) -> Result<Vec<PredictionRecord>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_records_jsonl(BufReader::new(f))?)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut cfg: DatasetConfig = match &a.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => DatasetConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    let root = dataset_root(a.out)?;
    let index = generate_dataset(&cfg, &root)?;
    eprintln!("wrote {} images to {}", index.images.len(), root.display());
    Ok(())
}

fn prompts(a: PromptsArgs) -> Result<()> {
    let cats: Vec<PromptCategory> = a.category.map_or(PromptCategory::ALL.to_vec(), |c| vec![c]);
    let mut out = io::stdout().lock();
    match a.dataset {
        None => {
            for c in cats {
                for spec in ladder_for(c) {
                    writeln!(out, "{}", serde_json::to_string(&spec)?)?;
                }
            }
        }
        Some(root) => {
            for m in load_manifests(&root)? {
                let own = PromptCategory::for_variation(m.variation_tag).unwrap_or(PromptCategory::ObjColor);
                let wanted: Vec<PromptCategory> = if a.category.is_some() { cats.clone() } else { vec![own] };
                for p in resolve_ladders(&m, &wanted)? {
                    let row = serde_json::json!({"image_id": m.image_id, "category": p.category, "ladder_id": p.ladder_id, "text": p.text});
                    writeln!(out, "{row}")?;
                }
            }
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(b) = a.backend {
        cfg.backend = b;
    }
    if let Some(p) = a.plan {
        match p.parse::<StrategyName>() {
            Ok(name) => {
                cfg.plan = name;
                cfg.plan_file = None;
            }
            Err(_) if Path::new(&p).is_file() => cfg.plan_file = Some(PathBuf::from(p)),
            Err(e) => bail!("{e}"),
        }
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if a.seed.is_some() {
        cfg.master_seed = a.seed;
    }
    cfg.resume |= a.resume;
    let s = run_experiment(&cfg)?;
    eprintln!(
        "{} planned, {} skipped, {} written ({} with errors), {} remaining",
        s.planned, s.skipped, s.written, s.errors, s.remaining
    );
    Ok(())
}

fn relevance(a: RelevanceArgs) -> Result<()> {
    let manifests = load_manifests(&dataset_root(a.dataset)?)?;
    let records = load_records(&a.records)?;
    let run_dir = a.records.parent().unwrap_or(Path::new(""));
    let rows = localize_records(&records, &manifests, run_dir, a.depth, a.threshold, a.overlays.as_deref())?;
    let mut f = io::BufWriter::new(fs::File::create(&a.out)?);
    for r in &rows {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    f.flush()?;
    eprintln!("{} localization rows", rows.len());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let manifests = load_manifests(&dataset_root(a.dataset)?)?;
    let records = load_records(&a.records)?;
    let loc: Vec<LocalizationRecord> = match &a.localization {
        Some(p) => fs::read_to_string(p)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let rep = emit_report(&records, &manifests, &loc, &a.out)?;
    eprintln!(
        "n={} accuracy={:.4} mrce={}",
        rep.n,
        rep.accuracy,
        rep.mrce.map_or("n/a".to_string(), |m| format!("{m:.4}"))
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Prompts(a) => prompts(a),
        Command::Run(a) => run(a),
        Command::Relevance(a) => relevance(a),
        Command::Report(a) => report(a),
    }
}
