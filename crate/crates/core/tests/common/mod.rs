#![allow(dead_code)]

use std::path::PathBuf;

use distill_core::column::{ColumnConfig, PerturbationSchedule};
use distill_core::sensors::{GenerationConfig, NoiseConfig};
use distill_core::thermo::{AntoineCoeffs, BinarySystem};
use distill_core::training::TrainingConfig;
use serde::Deserialize;

/// The sections of `config/default.toml` the core crate understands.
#[derive(Debug, Clone, Deserialize)]
pub struct Defaults {
    pub seed: u64,
    pub system: BinarySystem,
    pub column: ColumnConfig,
    pub schedule: PerturbationSchedule,
    pub generation: GenerationConfig,
    pub noise: NoiseConfig,
    pub training: TrainingConfig,
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn defaults() -> Defaults {
    let text = std::fs::read_to_string(repo_root().join("config/default.toml")).unwrap();
    toml::from_str(&text).unwrap()
}

pub fn water() -> AntoineCoeffs {
    #[derive(Deserialize)]
    struct Fluid {
        antoine: AntoineCoeffs,
    }
    #[derive(Deserialize)]
    struct Fluids {
        water: Fluid,
    }
    let text = std::fs::read_to_string(repo_root().join("config/reference_fluids.toml")).unwrap();
    toml::from_str::<Fluids>(&text).unwrap().water.antoine
}

/// Frozen oracle values written by `oracles/core_fixtures.py`.
pub fn fixtures() -> serde_json::Value {
    let text = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/core.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn f(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// One hour of the default column with a reflux ramp and a feed step,
/// 121 records, split 70/15/15.
pub fn short_run(seed: u64) -> distill_core::dataset::Prepared {
    short_run_with_step(seed, defaults().column.dt)
}

/// [`short_run`] with a given simulator step, s.
pub fn short_run_with_step(seed: u64, dt: f64) -> distill_core::dataset::Prepared {
    use distill_core::column::PerturbationEvent;
    use distill_core::dataset::{Dataset, Prepared, DEFAULT_FRACTIONS};
    let mut d = defaults();
    d.column.dt = dt;
    let schedule = PerturbationSchedule {
        events: vec![
            PerturbationEvent::RefluxRamp {
                start: 0.0,
                end: 3600.0,
                from: 0.55,
                to: 0.8,
            },
            PerturbationEvent::FeedCompStep { t: 1200.0, z_heavy: 0.55 },
        ],
    };
    let gen = GenerationConfig {
        duration_s: 3600.0,
        sample_interval_s: 30.0,
    };
    let g = distill_core::sensors::generate_dataset(&d.column, &schedule, &d.system, &gen, &d.noise, seed).unwrap();
    Prepared::new(Dataset::new(g.noisy).unwrap(), Some(g.clean), DEFAULT_FRACTIONS, 1.0).unwrap()
}
