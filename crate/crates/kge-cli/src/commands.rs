//! Command implementations: `pmi`, `train`, `eval`, `intrude`, `report`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use kge::{
    aggregate, build_intrusion_tasks, compute_pmi, evaluate_model, export_entity_tsv,
    export_pmi_tsv, extract_cooccurrences_from_path, link_prediction, load_model, load_pmi,
    parse_annotation_file, qualitative_report, read_intrusion_tasks, save_model, save_pmi,
    score_manual_intrusion, write_intrusion_tasks, write_trace, Dataset, EvalOptions, EvalReport,
    PmiMatrix, SavedModel, TrainConfig,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// Wall-clock creation time; the only non-reproducible field.
    pub created_unix_ms: u128,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: Vec<SeedEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedEntry {
    pub seed: u64,
    pub model: String,
    pub trace: String,
    pub validation_mrr: f64,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn load_dataset(config: &ExperimentConfig) -> Result<Dataset, CliError> {
    Ok(Dataset::load(
        &config.paths.train,
        &config.paths.valid,
        &config.paths.test,
    )?)
}

fn load_pmi_checked(config: &ExperimentConfig, data: &Dataset) -> Result<PmiMatrix, CliError> {
    let path = config.pmi_path();
    if !path.exists() {
        return Err(CliError::Config(format!(
            "PMI file {} not found; run `kge pmi` first",
            path.display()
        )));
    }
    let pmi = load_pmi(&path)?;
    if pmi.n() != data.n_entities() {
        return Err(CliError::Data(format!(
            "PMI matrix covers {} entities but the dataset has {}",
            pmi.n(),
            data.n_entities()
        )));
    }
    Ok(pmi)
}

fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("manifest {}: {e}", path.display())))?;
    Ok(manifest)
}

/// The manifest must echo exactly the config in force now; anything else
/// means the outputs were produced under different settings.
fn check_manifest_config(manifest: &Manifest, config: &ExperimentConfig) -> Result<(), CliError> {
    if manifest.config != config.canonical_json() {
        return Err(CliError::Config(format!(
            "manifest config (hash {}) does not match the supplied config (hash {}); \
             re-train or supply the original config",
            manifest.config_hash,
            config.hash()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pmi
// ---------------------------------------------------------------------------

pub fn run_pmi(config: &ExperimentConfig) -> Result<(), CliError> {
    config.require_inputs(true)?;
    fs::create_dir_all(&config.paths.output_dir)?;
    let data = load_dataset(config)?;
    let textual = config.paths.textual.as_ref().expect("checked above");
    let stats = extract_cooccurrences_from_path(textual, &data.entities, config.pmi.count_multiplicity)?;
    if stats.records.is_empty() {
        return Err(CliError::Data(format!(
            "no co-occurrences extracted from {} ({} of {} lines skipped)",
            textual.display(),
            stats.skipped_lines,
            stats.total_lines
        )));
    }
    let pmi = compute_pmi(
        &stats.records,
        data.n_entities(),
        config.pmi.smoothing,
        config.pmi.clip_negative,
    )?;
    save_pmi(&pmi, &config.pmi_path())?;
    export_pmi_tsv(&pmi, &config.paths.output_dir.join("pmi.tsv"))?;

    let summary = pmi_summary(&stats, &pmi);
    fs::write(config.paths.output_dir.join("pmi_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn pmi_summary(stats: &kge::CooccurrenceStats, pmi: &PmiMatrix) -> String {
    let entries = pmi.sorted_entries();
    let values: Vec<f64> = entries.iter().map(|&(_, _, p)| p).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::new();
    out.push_str(&format!("textual_lines\t{}\n", stats.total_lines));
    out.push_str(&format!("skipped_lines\t{}\n", stats.skipped_lines));
    out.push_str(&format!("pairs\t{}\n", entries.len()));
    out.push_str(&format!("entities_covered\t{}\n", stats.entities_covered()));
    out.push_str(&format!("total_pair_mass\t{}\n", pmi.total_pairs()));
    out.push_str(&format!("pmi_min\t{}\n", min));
    out.push_str(&format!("pmi_max\t{}\n", max));
    // Ten-bin histogram of the stored PMI values.
    let bins = 10usize;
    let width = if max > min { (max - min) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in &values {
        let mut idx = ((v - min) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let lo = min + i as f64 * width;
        let hi = lo + width;
        out.push_str(&format!("hist\t{:.4}\t{:.4}\t{}\n", lo, hi, c));
    }
    out
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct SeedOutcome {
    entry: SeedEntry,
}

pub fn run_train(config: &ExperimentConfig, grid: bool) -> Result<(), CliError> {
    config.require_inputs(false)?;
    if grid {
        return run_grid(config);
    }
    fs::create_dir_all(&config.paths.output_dir)?;
    let data = load_dataset(config)?;
    let pmi = if config.train.lambda_c != 0.0 {
        load_pmi_checked(config, &data)?
    } else {
        PmiMatrix::empty(data.n_entities())
    };
    let entries = train_seeds(config, &data, &pmi, &config.paths.output_dir)?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        created_unix_ms: now_ms(),
        config_hash: config.hash(),
        config: config.canonical_json(),
        seeds: entries,
    };
    fs::write(
        config.manifest_path(),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for entry in &manifest.seeds {
        println!(
            "seed {}\tvalidation_mrr {:.4}\t{}",
            entry.seed, entry.validation_mrr, entry.model
        );
    }
    Ok(())
}

/// Train every configured seed, in parallel worker slots, writing model,
/// entity-TSV, and trace files into `out_dir`.
fn train_seeds(
    config: &ExperimentConfig,
    data: &Dataset,
    pmi: &PmiMatrix,
    out_dir: &Path,
) -> Result<Vec<SeedEntry>, CliError> {
    let seeds = config.seeds();
    let job = |seed: u64| -> Result<SeedOutcome, CliError> {
        let train_config: TrainConfig = config.train.to_train_config(seed)?;
        let outcome = kge::train(data, pmi, &train_config).map_err(|e| {
            let wrapped: CliError = e.into();
            match wrapped {
                CliError::Divergence(m) => CliError::Divergence(format!("seed {seed}: {m}")),
                other => other,
            }
        })?;
        let model_name = format!("model_seed{seed}.bin");
        let trace_name = format!("trace_seed{seed}.tsv");
        save_model(
            &outcome.model,
            seed,
            &train_config.echo_string(),
            &out_dir.join(&model_name),
        )?;
        export_entity_tsv(
            &outcome.model,
            data.entities.names(),
            &out_dir.join(format!("model_seed{seed}.tsv")),
        )?;
        write_trace(&outcome.trace, &out_dir.join(&trace_name))?;
        let validation = link_prediction(
            &outcome.model,
            data,
            &data.valid,
            config.eval.filtered_ranking,
        )?;
        Ok(SeedOutcome {
            entry: SeedEntry {
                seed,
                model: model_name,
                trace: trace_name,
                validation_mrr: validation.mrr,
            },
        })
    };

    let outcomes = run_jobs(&seeds, config.run.workers, &job);
    let mut entries = Vec::with_capacity(seeds.len());
    for outcome in outcomes {
        entries.push(outcome?.entry);
    }
    Ok(entries)
}

/// Run `job` over `items` on up to `workers` threads, preserving item order
/// in the returned results.
fn run_jobs<T: Send>(
    items: &[u64],
    workers: usize,
    job: &(impl Fn(u64) -> Result<T, CliError> + Sync),
) -> Vec<Result<T, CliError>> {
    let slots: Vec<Mutex<Option<Result<T, CliError>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = job(items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("job ran for every item")
        })
        .collect()
}

fn run_grid(config: &ExperimentConfig) -> Result<(), CliError> {
    let grid = config
        .grid
        .clone()
        .ok_or_else(|| CliError::Config("--grid requires a [grid] section".to_string()))?;
    fs::create_dir_all(&config.paths.output_dir)?;
    let data = load_dataset(config)?;
    let needs_pmi = grid.lambda_c.iter().any(|&lc| lc != 0.0);
    let pmi = if needs_pmi {
        load_pmi_checked(config, &data)?
    } else {
        PmiMatrix::empty(data.n_entities())
    };

    let mut rows = Vec::new();
    let mut best: Option<(f64, String)> = None;
    for &lc in &grid.lambda_c {
        for &lr in &grid.lambda_r {
            for &dim in &grid.dim {
                let mut combo = config.clone();
                combo.train.lambda_c = lc;
                combo.train.lambda_r = lr;
                combo.train.dim = dim;
                combo.grid = None;
                let sub = config
                    .paths
                    .output_dir
                    .join("grid")
                    .join(format!("lc{lc}_lr{lr}_d{dim}"));
                combo.paths.output_dir = sub.clone();
                fs::create_dir_all(&sub)?;
                let entries = train_seeds(&combo, &data, &pmi, &sub)?;
                let mean_mrr = entries.iter().map(|e| e.validation_mrr).sum::<f64>()
                    / entries.len() as f64;
                let manifest = Manifest {
                    format_version: MANIFEST_VERSION,
                    created_unix_ms: now_ms(),
                    config_hash: combo.hash(),
                    config: combo.canonical_json(),
                    seeds: entries,
                };
                fs::write(
                    combo.manifest_path(),
                    serde_json::to_string_pretty(&manifest)?,
                )?;
                rows.push(format!("{lc}\t{lr}\t{dim}\t{mean_mrr}"));
                let label = format!("lambda_c={lc} lambda_r={lr} dim={dim}");
                if best.as_ref().is_none_or(|(b, _)| mean_mrr > *b) {
                    best = Some((mean_mrr, label));
                }
            }
        }
    }
    let mut table = String::from("# lambda_c\tlambda_r\tdim\tmean_validation_mrr\n");
    for row in &rows {
        table.push_str(row);
        table.push('\n');
    }
    fs::write(config.paths.output_dir.join("grid_results.tsv"), &table)?;
    let (mrr, label) = best.expect("grid has at least one combination");
    println!("best by validation MRR: {label} (mrr {mrr:.4})");
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub fn run_eval(config: &ExperimentConfig, models: &[PathBuf]) -> Result<(), CliError> {
    config.require_inputs(false)?;
    fs::create_dir_all(&config.paths.output_dir)?;
    let data = load_dataset(config)?;
    let pmi = load_pmi_checked(config, &data)?;

    let manifest_path = config.manifest_path();
    let model_paths: Vec<PathBuf> = if models.is_empty() {
        let manifest = read_manifest(&manifest_path)?;
        check_manifest_config(&manifest, config)?;
        manifest
            .seeds
            .iter()
            .map(|e| config.paths.output_dir.join(&e.model))
            .collect()
    } else {
        if manifest_path.exists() {
            let manifest = read_manifest(&manifest_path)?;
            check_manifest_config(&manifest, config)?;
        }
        models.to_vec()
    };

    let opts = EvalOptions {
        k: config.eval.k,
        filtered_ranking: config.eval.filtered_ranking,
    };
    let manual_wi = read_manual_wi(&config.paths.output_dir)?;

    let mut reports = Vec::new();
    for path in &model_paths {
        let saved = load_saved_model(path, &data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(saved.seed);
        let mut report = evaluate_model(&saved.model, &data, &pmi, &opts, &mut rng)?;
        if let Some(value) = manual_wi {
            report.push("manual_wi", value);
        }
        let stem = format!("report_seed{}", saved.seed);
        fs::write(
            config.paths.output_dir.join(format!("{stem}.tsv")),
            report.to_machine_tsv(),
        )?;
        fs::write(
            config.paths.output_dir.join(format!("{stem}.txt")),
            report.to_text(),
        )?;
        let qualitative = qualitative_report(
            &saved.model.entity,
            &data.entities,
            5.min(saved.model.dim()),
            config.eval.k,
            &mut rng,
        );
        fs::write(
            config
                .paths
                .output_dir
                .join(format!("qualitative_seed{}.txt", saved.seed)),
            qualitative,
        )?;
        println!("evaluated seed {} ({})", saved.seed, path.display());
        reports.push(report);
    }

    let agg = aggregate(&reports);
    fs::write(
        config.paths.output_dir.join("report_aggregate.tsv"),
        agg.to_machine_tsv(),
    )?;
    fs::write(
        config.paths.output_dir.join("report_aggregate.txt"),
        agg.to_text(),
    )?;
    print!("{}", agg.to_text());
    Ok(())
}

fn load_saved_model(path: &Path, data: &Dataset) -> Result<SavedModel, CliError> {
    let saved = load_model(path)?;
    if saved.model.n_entities() != data.n_entities()
        || saved.model.n_relations() != data.n_relations()
    {
        return Err(CliError::Data(format!(
            "model {} has {} entities / {} relations but the dataset has {} / {}",
            path.display(),
            saved.model.n_entities(),
            saved.model.n_relations(),
            data.n_entities(),
            data.n_relations()
        )));
    }
    Ok(saved)
}

fn read_manual_wi(out_dir: &Path) -> Result<Option<f64>, CliError> {
    let path = out_dir.join("manual_wi.tsv");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let report = EvalReport::parse_machine_tsv(&text)?;
    Ok(report.get("manual_wi"))
}

// ---------------------------------------------------------------------------
// intrude
// ---------------------------------------------------------------------------

pub fn run_intrude(
    config: &ExperimentConfig,
    model: Option<&Path>,
    annotations: &[PathBuf],
) -> Result<(), CliError> {
    fs::create_dir_all(&config.paths.output_dir)?;
    let tasks_path = config.paths.output_dir.join("intrusion_tasks.tsv");
    let key_path = config.paths.output_dir.join("intrusion_key.tsv");

    if annotations.is_empty() {
        config.require_inputs(false)?;
        let data = load_dataset(config)?;
        let model_path = match model {
            Some(p) => p.to_path_buf(),
            None => {
                let manifest = read_manifest(&config.manifest_path())?;
                check_manifest_config(&manifest, config)?;
                config.paths.output_dir.join(
                    &manifest
                        .seeds
                        .first()
                        .ok_or_else(|| CliError::Data("manifest lists no seeds".to_string()))?
                        .model,
                )
            }
        };
        let saved = load_saved_model(&model_path, &data)?;
        if config.eval.intrusion_dims > saved.model.dim() {
            return Err(CliError::Config(format!(
                "eval.intrusion_dims = {} exceeds the model dimension {}",
                config.eval.intrusion_dims,
                saved.model.dim()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(saved.seed);
        let set = build_intrusion_tasks(
            &saved.model.entity,
            config.eval.k,
            config.eval.intrusion_dims,
            &mut rng,
        );
        write_intrusion_tasks(&set, &data.entities, &tasks_path, &key_path)?;
        println!(
            "exported {} tasks to {} (answer key: {})",
            set.tasks.len(),
            tasks_path.display(),
            key_path.display()
        );
        Ok(())
    } else {
        let tasks = read_intrusion_tasks(&tasks_path, &key_path)?;
        let mut parsed = Vec::with_capacity(annotations.len());
        for path in annotations {
            parsed.push(parse_annotation_file(path, &tasks)?);
        }
        let value = score_manual_intrusion(&tasks, &parsed);
        fs::write(
            config.paths.output_dir.join("manual_wi.tsv"),
            format!("manual_wi\t{}\n", value),
        )?;
        println!("manual_wi\t{}", value);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn run_report(config: &ExperimentConfig) -> Result<(), CliError> {
    let dir = &config.paths.output_dir;
    let mut seed_reports: Vec<(u64, EvalReport)> = Vec::new();
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(seed_text) = name
            .strip_prefix("report_seed")
            .and_then(|rest| rest.strip_suffix(".tsv"))
        {
            let seed: u64 = seed_text.parse().map_err(|_| {
                CliError::Data(format!("unparseable report file name {name}"))
            })?;
            let text = fs::read_to_string(entry.path())?;
            seed_reports.push((seed, EvalReport::parse_machine_tsv(&text)?));
        }
    }
    if seed_reports.is_empty() {
        return Err(CliError::Data(format!(
            "no report_seed*.tsv files in {}; run `kge eval` first",
            dir.display()
        )));
    }
    seed_reports.sort_by_key(|&(seed, _)| seed);
    let reports: Vec<EvalReport> = seed_reports.into_iter().map(|(_, r)| r).collect();
    let agg = aggregate(&reports);
    fs::write(dir.join("report_aggregate.tsv"), agg.to_machine_tsv())?;
    fs::write(dir.join("report_aggregate.txt"), agg.to_text())?;
    print!("{}", agg.to_text());
    Ok(())
}

