#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use distill_core::column::{PerturbationEvent, PerturbationSchedule};
use distill_twin::RunConfig;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn default_config_path() -> PathBuf {
    repo_root().join("config/default.toml")
}

pub fn default_config() -> RunConfig {
    RunConfig::load(&default_config_path()).expect("default config loads")
}

/// Half an hour of plant time, a reflux ramp and a few epochs: enough to
/// drive every subcommand in seconds.
pub fn tiny_config() -> RunConfig {
    let mut cfg = default_config();
    cfg.generation.duration_s = 1800.0;
    cfg.schedule = PerturbationSchedule {
        events: vec![PerturbationEvent::RefluxRamp {
            start: 0.0,
            end: 1800.0,
            from: 0.55,
            to: 0.8,
        }],
    };
    cfg.training.epochs = 4;
    cfg.training.collocation_n = 64;
    cfg.evaluation.permutation_repeats = 2;
    cfg
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, cfg.to_toml()).unwrap();
    p
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_distill-twin"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}
