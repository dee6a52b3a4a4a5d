//! CSV formats: the dataset (plus its noise-free sidecar), training history
//! and the plot-ready evaluation exports.

use std::path::{Path, PathBuf};

use distill_core::evaluation::{HistogramBin, Importance, TrayProfile};
use distill_core::network::ModelOutput;
use distill_core::sensors::{SensorRecord, N_SENSORS, SENSOR_NAMES, TARGET_NAMES, TIME_NAME};
use distill_core::training::EpochRecord;

use crate::error::{Result, TwinError};

/// Dataset header: time, the sixteen sensors, then the two targets.
pub fn dataset_header() -> Vec<&'static str> {
    let mut h = vec![TIME_NAME];
    h.extend_from_slice(&SENSOR_NAMES);
    h.extend_from_slice(&TARGET_NAMES);
    h
}

/// `dir/name.csv` -> `dir/name.clean.csv`.
pub fn clean_sidecar(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.clean.csv"))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> TwinError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TwinError::io(path, io),
        other => TwinError::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Shortest representation that parses back to the same bits.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_records(path: &Path, records: &[SensorRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(dataset_header()).map_err(|e| csv_err(path, e))?;
    for r in records {
        let mut row = Vec::with_capacity(N_SENSORS + 3);
        row.push(num(r.time_s));
        row.extend(r.sensors.iter().map(|v| num(*v)));
        row.push(num(r.x_tx));
        row.push(num(r.x_hx));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| TwinError::io(path, e))
}

/// Reads records by column name; extra columns are ignored.
pub fn read_records(path: &Path) -> Result<Vec<SensorRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    let idx: Vec<usize> = dataset_header()
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| TwinError::Data(format!("{}: missing column {name}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let field = |k: usize| -> Result<f64> {
            let s = row.get(idx[k]).unwrap_or("");
            s.trim().parse::<f64>().map_err(|_| {
                TwinError::Data(format!("{}: row {}: bad number {s:?} in {}", path.display(), line + 2, dataset_header()[k]))
            })
        };
        let mut sensors = [0.0; N_SENSORS];
        for (j, s) in sensors.iter_mut().enumerate() {
            *s = field(1 + j)?;
        }
        out.push(SensorRecord {
            time_s: field(0)?,
            sensors,
            x_tx: field(N_SENSORS + 1)?,
            x_hx: field(N_SENSORS + 2)?,
        });
    }
    Ok(out)
}

/// Dataset plus its noise-free sidecar when present.
pub fn read_dataset(path: &Path) -> Result<(Vec<SensorRecord>, Option<Vec<SensorRecord>>)> {
    let records = read_records(path)?;
    let side = clean_sidecar(path);
    let clean = if side.exists() {
        let c = read_records(&side)?;
        if c.len() != records.len() {
            return Err(TwinError::Data(format!("{} has {} rows, expected {}", side.display(), c.len(), records.len())));
        }
        Some(c)
    } else {
        None
    };
    Ok((records, clean))
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let terms = ["l_data", "l_vle", "l_mass", "l_energy", "l_mccabe", "l_bc", "l_reg", "total"];
    let mut header = vec!["epoch".to_string()];
    header.extend(terms.iter().map(|t| format!("train_{t}")));
    header.extend(terms.iter().map(|t| format!("val_{t}")));
    header.extend(["val_score", "lambda_d", "lambda_p", "lambda_b", "lr", "wall_s"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for h in history {
        let parts = |b: &distill_core::physics::LossBreakdown| {
            [b.l_data, b.l_vle, b.l_mass, b.l_energy, b.l_mccabe, b.l_bc, b.l_reg, b.total]
        };
        let mut row = vec![h.epoch.to_string()];
        row.extend(parts(&h.train).iter().map(|v| num(*v)));
        row.extend(parts(&h.val).iter().map(|v| num(*v)));
        row.extend(
            [h.val_score, h.train.lambda_d, h.train.lambda_p, h.train.lambda_b, h.lr, h.wall_s]
                .iter()
                .map(|v| num(*v)),
        );
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| TwinError::io(path, e))
}

pub fn write_predictions(path: &Path, records: &[SensorRecord], pred: &[ModelOutput], vle: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "time_s",
        "target_hx",
        "pred_hx",
        "target_tx",
        "pred_tx",
        "residual_hx",
        "t_tray_scaled",
        "p_tray_scaled",
        "vle_residual",
    ])
    .map_err(|e| csv_err(path, e))?;
    for ((r, p), v) in records.iter().zip(pred).zip(vle) {
        let row = [r.time_s, r.x_hx, p.x_hx, r.x_tx, p.x_tx, p.x_hx - r.x_hx, p.t_tray, p.p_tray, *v].map(num);
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| TwinError::io(path, e))
}

pub fn write_histograms(path: &Path, columns: &[(&str, &[HistogramBin])]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["series", "bin_lo", "bin_hi", "count"]).map_err(|e| csv_err(path, e))?;
    for (name, bins) in columns {
        for b in bins.iter() {
            w.write_record([name.to_string(), num(b.lo), num(b.hi), b.count.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| TwinError::io(path, e))
}

pub fn write_profiles(path: &Path, profiles: &[TrayProfile]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time_s", "tray", "x_heavy", "y_heavy", "temperature_c", "pressure_kpa", "feed_tray", "truncated"])
        .map_err(|e| csv_err(path, e))?;
    for p in profiles {
        for t in &p.trays {
            w.write_record([
                num(p.time_s),
                t.index.to_string(),
                num(t.x_heavy),
                num(t.y_heavy),
                num(t.t_c),
                num(t.p_kpa),
                (t.is_feed as u8).to_string(),
                (p.truncated as u8).to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| TwinError::io(path, e))
}

pub fn feature_name(j: usize) -> &'static str {
    if j < N_SENSORS {
        SENSOR_NAMES[j]
    } else {
        "normalized_time"
    }
}

pub fn write_importance(path: &Path, imp: &[Importance]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["rank", "feature_index", "feature", "rmse_increase", "std_err"])
        .map_err(|e| csv_err(path, e))?;
    for (rank, i) in imp.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            i.feature.to_string(),
            feature_name(i.feature).to_string(),
            num(i.score),
            num(i.std_err),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| TwinError::io(path, e))
}
