//! The subcommands as library functions. Each reads its inputs fully before
//! creating the output directory, so a failing command leaves nothing behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use distill_core::dataset::{split, Dataset, Prepared};
use distill_core::evaluation::{
    compare as compare_reports, evaluate, histogram, permutation_importance, reconstruct_profiles, Comparison,
    EvalReport, Importance, TrayProfile,
};
use distill_core::sensors::{generate_dataset, GeneratedData, SensorRecord};
use distill_core::training::{Mode, Trainer, TrainerState};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{file_sha256, Checkpoint};
use crate::config::{RunConfig, SNAPSHOT_NAME};
use crate::csvio;
use crate::error::{Result, TwinError};

pub const DATASET_NAME: &str = "dataset.csv";
pub const CHECKPOINT_NAME: &str = "checkpoint.bin";
pub const HISTORY_NAME: &str = "history.csv";
pub const METRICS_NAME: &str = "metrics.json";
pub const PREDICTIONS_NAME: &str = "predictions.csv";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| TwinError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| TwinError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    write_text(path, &s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| TwinError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| TwinError::Data(format!("{}: {e}", path.display())))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(TwinError::MissingFile(path.to_path_buf()))
    }
}

/// Simulate, add noise and write `dataset.csv`, its `.clean.csv` sidecar and
/// the config snapshot. Returns the dataset path.
pub fn generate(cfg: &RunConfig, out_dir: &Path) -> Result<(PathBuf, GeneratedData)> {
    let data = generate_dataset(&cfg.column, &cfg.schedule, &cfg.system, &cfg.generation, &cfg.noise, cfg.seed)?;
    create_dir(out_dir)?;
    let path = out_dir.join(DATASET_NAME);
    csvio::write_records(&path, &data.noisy)?;
    csvio::write_records(&csvio::clean_sidecar(&path), &data.clean)?;
    write_text(&out_dir.join(SNAPSHOT_NAME), &cfg.to_toml())?;
    Ok((path, data))
}

/// Split and scale a dataset file according to the config.
pub fn prepare(cfg: &RunConfig, data_path: &Path) -> Result<Prepared> {
    let (records, clean) = csvio::read_dataset(data_path)?;
    let ds = Dataset::new(records)?;
    Ok(Prepared::new(ds, clean, cfg.dataset.split, cfg.training.train_fraction)?)
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Continue from this checkpoint instead of starting fresh.
    pub resume: Option<PathBuf>,
    /// Stop (and save) once this many epochs are complete.
    pub stop_after: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: Mode,
    pub epochs_completed: u32,
    pub best_epoch: u32,
    pub best_val_score: f64,
    pub wall_s: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Train on `data_path`, writing the checkpoint, history, summary and
/// config snapshot to `out_dir`.
pub fn train(cfg: &RunConfig, data_path: &Path, out_dir: &Path, opts: &TrainOptions) -> Result<Checkpoint> {
    let data_sha256 = file_sha256(data_path)?;
    let prep = prepare(cfg, data_path)?;
    let config = cfg.to_toml();
    let mut state = match &opts.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.config != config || ck.data_sha256 != data_sha256 {
                return Err(TwinError::Config(
                    "resume checkpoint was produced with a different config or dataset".into(),
                ));
            }
            ck.state
        }
        None => TrainerState::new(cfg.seed),
    };
    let ctx = cfg.physics_context(&prep.stats);
    let mut trainer = Trainer::new(&prep, ctx.clone(), cfg.training.clone(), cfg.seed)?;
    let start = Instant::now();
    let mut clock = || start.elapsed().as_secs_f64();
    let end = opts.stop_after.unwrap_or(cfg.training.epochs);
    trainer.train_until(&mut state, end, &mut clock)?;

    let ck = Checkpoint {
        mode: cfg.training.mode,
        config,
        data_sha256,
        stats: prep.stats.clone(),
        scaling: ctx.scaling,
        t_max: prep.data.t_max,
        state,
    };
    create_dir(out_dir)?;
    ck.save(&out_dir.join(CHECKPOINT_NAME))?;
    csvio::write_history(&out_dir.join(HISTORY_NAME), &ck.state.history)?;
    write_text(&out_dir.join(SNAPSHOT_NAME), &ck.config)?;
    write_json(
        &out_dir.join("train_summary.json"),
        &TrainSummary {
            mode: ck.mode,
            epochs_completed: ck.state.next_epoch,
            best_epoch: ck.state.best_epoch,
            best_val_score: ck.state.best_score,
            wall_s: ck.state.elapsed_s,
            n_train: prep.bounds.train.len(),
            n_val: prep.bounds.val.len(),
            n_test: prep.bounds.test.len(),
        },
    )?;
    Ok(ck)
}

/// Loaded checkpoint, its config and the test block of a dataset.
pub struct Loaded {
    pub ck: Checkpoint,
    pub cfg: RunConfig,
    pub test: Vec<SensorRecord>,
    pub test_clean: Option<Vec<SensorRecord>>,
    pub all: Vec<SensorRecord>,
}

pub fn load(ckpt_path: &Path, data_path: &Path) -> Result<Loaded> {
    require(ckpt_path)?;
    require(data_path)?;
    let ck = Checkpoint::load(ckpt_path)?;
    let cfg = RunConfig::parse(&ck.config)?;
    let (records, clean) = csvio::read_dataset(data_path)?;
    let b = split(records.len(), cfg.dataset.split)?.test;
    Ok(Loaded {
        test: records[b.clone()].to_vec(),
        test_clean: clean.map(|c| c[b].to_vec()),
        all: records,
        cfg,
        ck,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mode: Mode,
    pub best_epoch: u32,
    pub report: EvalReport,
}

/// Test-block metrics and physics consistency.
pub fn eval(ckpt_path: &Path, data_path: &Path, out_dir: &Path) -> Result<EvalSummary> {
    let l = load(ckpt_path, data_path)?;
    let model = l.ck.model();
    let ctx = l.cfg.physics_context(&l.ck.stats);
    let ev = evaluate(&model, &ctx, &l.test, l.test_clean.as_deref(), l.cfg.evaluation.vle_threshold)?;
    let summary = EvalSummary {
        mode: l.ck.mode,
        best_epoch: l.ck.state.best_epoch,
        report: ev.report.clone(),
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join(METRICS_NAME), &summary)?;
    csvio::write_predictions(&out_dir.join(PREDICTIONS_NAME), &l.test, &ev.predictions, &ev.vle)?;
    let bins = l.cfg.evaluation.histogram_bins;
    csvio::write_histograms(
        &out_dir.join("residual_histogram.csv"),
        &[("residual_hx", &histogram(&ev.residuals_hx, bins)), ("vle_residual", &histogram(&ev.vle, bins))],
    )?;
    write_text(&out_dir.join(SNAPSHOT_NAME), &l.ck.config)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub a: EvalSummary,
    pub b: EvalSummary,
    pub comparison: Comparison,
}

fn read_residuals(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join(PREDICTIONS_NAME);
    let mut rd = csv::Reader::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => TwinError::io(&path, io),
        k => TwinError::Data(format!("{k:?}")),
    })?;
    let col = rd
        .headers()
        .ok()
        .and_then(|h| h.iter().position(|c| c == "residual_hx"))
        .ok_or_else(|| TwinError::Data(format!("{}: no residual_hx column", path.display())))?;
    rd.records()
        .map(|r| {
            r.ok()
                .and_then(|r| r.get(col).and_then(|s| s.parse().ok()))
                .ok_or_else(|| TwinError::Data(format!("{}: bad residual", path.display())))
        })
        .collect()
}

/// Side-by-side report of two `eval` output directories (`a` is the
/// reference: relative changes are `(b - a) / a`).
pub fn compare(a_dir: &Path, b_dir: &Path, out_dir: &Path, bins: usize) -> Result<CompareReport> {
    let a: EvalSummary = read_json(&a_dir.join(METRICS_NAME))?;
    let b: EvalSummary = read_json(&b_dir.join(METRICS_NAME))?;
    let ra = read_residuals(a_dir)?;
    let rb = read_residuals(b_dir)?;
    let report = CompareReport {
        comparison: compare_reports(&a.report, &b.report),
        a,
        b,
    };
    // shared bin edges so the two series are directly comparable
    let all: Vec<f64> = ra.iter().chain(&rb).copied().collect();
    let edges = histogram(&all, bins);
    let count = |v: &[f64]| {
        let mut h = edges.clone();
        h.iter_mut().for_each(|b| b.count = 0);
        let (lo, w) = (edges[0].lo, edges[0].hi - edges[0].lo);
        for x in v {
            let k = (((x - lo) / w) as usize).min(h.len() - 1);
            h[k].count += 1;
        }
        h
    };
    create_dir(out_dir)?;
    write_json(&out_dir.join("comparison.json"), &report)?;
    if !edges.is_empty() {
        csvio::write_histograms(
            &out_dir.join("residual_histograms.csv"),
            &[("a", &count(&ra)), ("b", &count(&rb))],
        )?;
    }
    let snap = a_dir.join(SNAPSHOT_NAME);
    if snap.exists() {
        std::fs::copy(&snap, out_dir.join(SNAPSHOT_NAME)).map_err(|e| TwinError::io(&snap, e))?;
    }
    Ok(report)
}

/// Tray profiles at the records closest to each requested time.
pub fn profiles(ckpt_path: &Path, data_path: &Path, times: &[f64], out_dir: &Path) -> Result<Vec<TrayProfile>> {
    let l = load(ckpt_path, data_path)?;
    let model = l.ck.model();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let rec = l
            .all
            .iter()
            .min_by(|a, b| (a.time_s - t).abs().total_cmp(&(b.time_s - t).abs()))
            .ok_or_else(|| TwinError::Data("empty dataset".into()))?;
        out.push(reconstruct_profiles(&model, rec, l.cfg.column.n_trays, l.cfg.column.feed_tray, &l.cfg.system)?);
    }
    create_dir(out_dir)?;
    csvio::write_profiles(&out_dir.join("profiles.csv"), &out)?;
    write_text(&out_dir.join(SNAPSHOT_NAME), &l.ck.config)?;
    Ok(out)
}

/// Permutation importance on the test block.
pub fn importance(ckpt_path: &Path, data_path: &Path, out_dir: &Path) -> Result<Vec<Importance>> {
    let l = load(ckpt_path, data_path)?;
    let imp = permutation_importance(&l.ck.model(), &l.test, l.cfg.evaluation.permutation_repeats, l.cfg.seed);
    create_dir(out_dir)?;
    csvio::write_importance(&out_dir.join("importance.csv"), &imp)?;
    write_text(&out_dir.join(SNAPSHOT_NAME), &l.ck.config)?;
    Ok(imp)
}
