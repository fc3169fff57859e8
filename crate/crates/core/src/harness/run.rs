use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{backend_answer, Backend, BackendRequest};
use super::config::ExperimentConfig;
use super::HarnessError;
use crate::intervention::capture::write_captures;
use crate::intervention::InterventionPlan;
use crate::metrics::{parse_count, read_records_jsonl, write_records_jsonl, PredictionRecord};
use crate::prompt::{build_prompt, ladder_for, AttributeBindings, PromptCategory};
use crate::scene::{DatasetIndex, SceneManifest, VariationTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    /// Work items the config describes.
    pub planned: usize,
    /// Items already present in the output.
    pub skipped: usize,
    pub written: usize,
    /// Written records carrying a backend error.
    pub errors: usize,
    /// Items still missing after this run.
    pub remaining: usize,
}

/// One (image, prompt rung) question.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkItem {
    pub manifest: usize,
    pub prompt_id: String,
    pub prompt: String,
    pub key: String,
}

/// Loaded dataset slice for a run.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub manifests: Vec<SceneManifest>,
    pub image_paths: Vec<Option<PathBuf>>,
}

pub fn load_inputs(config: &ExperimentConfig) -> Result<RunInputs, HarnessError> {
    config.validate()?;
    let root = &config.dataset_root;
    let index = DatasetIndex::load(root)?;
    if let Some(seed) = config.master_seed {
        if seed != index.master_seed {
            return Err(HarnessError::Config(format!("dataset was generated with seed {}, config says {seed}", index.master_seed)));
        }
    }
    let wanted = |t: VariationTag| config.variations.is_empty() || config.variations.contains(&t);
    let mut manifests = Vec::new();
    let mut image_paths = Vec::new();
    for e in index.images.iter().filter(|e| wanted(e.variation_tag)) {
        manifests.push(index.load_manifest(root, e)?);
        let p = root.join(&e.image_path);
        image_paths.push(p.is_file().then_some(p));
    }
    Ok(RunInputs { manifests, image_paths })
}

/// Work in a fixed order: image, then category, then rung.
pub fn plan_work(
    config: &ExperimentConfig,
    manifests: &[SceneManifest],
    backend_id: &str,
    plan_id: &str,
) -> Result<Vec<WorkItem>, HarnessError> {
    let mut out = Vec::new();
    for (mi, m) in manifests.iter().enumerate() {
        let categories = if config.categories.is_empty() {
            vec![PromptCategory::for_variation(m.variation_tag).unwrap_or(PromptCategory::ObjColor)]
        } else {
            config.categories.clone()
        };
        let bindings = AttributeBindings::from_manifest(m);
        for cat in categories {
            for spec in ladder_for(cat) {
                if !config.rungs.is_empty() && !config.rungs.contains(&spec.ladder_id) {
                    continue;
                }
                let prompt = build_prompt(&spec, &bindings)?;
                let key = PredictionRecord::key_for(&m.image_id, &prompt, backend_id, plan_id);
                out.push(WorkItem { manifest: mi, prompt_id: spec.id(), prompt, key });
            }
        }
    }
    Ok(out)
}

/// Reads finished records, dropping a trailing partial line left by an interrupted write.
pub fn load_existing(path: &Path) -> Result<Vec<PredictionRecord>, HarnessError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    Ok(read_records_jsonl(&bytes[..complete])?)
}

fn captures_rel(output: &Path, key: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    PathBuf::from(format!("{stem}.captures")).join(&key[..16])
}

fn ask(
    backend: &dyn Backend,
    config: &ExperimentConfig,
    plan: &InterventionPlan,
    inputs: &RunInputs,
    item: &WorkItem,
) -> PredictionRecord {
    let m = &inputs.manifests[item.manifest];
    let mut rec = PredictionRecord {
        key: item.key.clone(),
        image_id: m.image_id.clone(),
        prompt_id: item.prompt_id.clone(),
        prompt: item.prompt.clone(),
        backend_id: backend.descriptor().id.clone(),
        plan_id: plan.name.to_string(),
        raw_text: String::new(),
        parsed_count: None,
        true_count: m.true_count,
        error: None,
        captures: None,
    };
    let req = BackendRequest {
        manifest: m,
        image_path: inputs.image_paths[item.manifest].as_deref(),
        prompt: &item.prompt,
        plan: Some(plan),
        capture: config.capture,
        options: &config.options,
    };
    match backend_answer(backend, &req) {
        Ok(ans) => {
            rec.parsed_count = parse_count(&ans.raw_text);
            rec.raw_text = ans.raw_text;
            if let Some(bundle) = ans.captures {
                let rel = captures_rel(&config.output, &item.key);
                let dir = config.output.parent().unwrap_or(Path::new("")).join(&rel);
                match write_captures(&dir, &bundle.sidecar, &bundle.layers) {
                    Ok(_) => rec.captures = Some(rel.to_string_lossy().replace('\\', "/")),
                    Err(e) => rec.error = Some(format!("writing captures: {e}")),
                }
            }
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Asks the backend every pending question and appends records to `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let backend = config.backend()?;
    run_with_backend(config, backend.as_ref())
}

pub fn run_with_backend(config: &ExperimentConfig, backend: &dyn Backend) -> Result<RunSummary, HarnessError> {
    let inputs = load_inputs(config)?;
    let plan = config.resolve_plan(backend.descriptor().model_family)?;
    let items = plan_work(config, &inputs.manifests, &backend.descriptor().id, plan.name.name())?;

    if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let existing = if config.resume {
        load_existing(&config.output)?
    } else {
        fs::write(&config.output, b"")?;
        Vec::new()
    };
    let done: HashSet<&str> = existing.iter().map(|r| r.key.as_str()).collect();
    let pending: Vec<&WorkItem> = items.iter().filter(|i| !done.contains(i.key.as_str())).collect();
    let limit = config.max_records.unwrap_or(usize::MAX).min(pending.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let file = OpenOptions::new().create(true).append(true).open(&config.output)?;
    let mut out = BufWriter::new(file);
    let mut summary = RunSummary { planned: items.len(), skipped: items.len() - pending.len(), ..Default::default() };
    for batch in pending[..limit].chunks(config.batch_size) {
        let recs: Vec<PredictionRecord> =
            pool.install(|| batch.par_iter().map(|item| ask(backend, config, &plan, &inputs, item)).collect());
        write_records_jsonl(&mut out, &recs)?;
        out.flush()?;
        summary.written += recs.len();
        summary.errors += recs.iter().filter(|r| r.error.is_some()).count();
    }
    summary.remaining = pending.len() - limit;
    Ok(summary)
}
