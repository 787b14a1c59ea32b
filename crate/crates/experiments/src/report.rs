//! Plain CSV and JSON tables for external plotting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use autoec_training::EpochLog;

use crate::error::Result;
use crate::eval::EvalResult;
use crate::importance::ImportanceMatrix;
use crate::stats::{Mark, ALPHA};
use crate::SCHEMA_VERSION;

pub const SIGNIFICANCE_NOTE: &str = "marks compare the first method with each other method per instance: \
two-sided Wilcoxon rank-sum, normal approximation with tie correction, alpha = 0.05; \
'+' first method significantly lower, '-' significantly higher, '=' no significant difference";

/// One cell of the per-instance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub schema_version: u32,
    pub instance: usize,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    /// Empty for the reference method.
    pub mark: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub schema_version: u32,
    pub kind: String,
    #[serde(rename = "Dimension")]
    pub dimension: Option<f64>,
    #[serde(rename = "maxFEs")]
    pub max_fes: Option<f64>,
    #[serde(rename = "Search Range")]
    pub search_range: Option<f64>,
    #[serde(rename = "Modality")]
    pub modality: Option<f64>,
    #[serde(rename = "Global Structure")]
    pub global_structure: Option<f64>,
    #[serde(rename = "Conditioning")]
    pub conditioning: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub schema_version: u32,
    pub stage: u8,
    pub epoch: usize,
    pub episodes: usize,
    pub updates: usize,
    pub mean_return: f64,
    pub mean_loss: f64,
    pub mean_grad_norm: f64,
    pub ppo_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub schema_version: u32,
    pub methods: Vec<String>,
    pub rows: Vec<TableRow>,
    pub overall: Vec<TableRow>,
    pub note: String,
}

/// Per-instance mean ± std of every method, marked against the first.
pub fn table_rows(results: &[EvalResult]) -> Vec<TableRow> {
    let Some(reference) = results.first() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for s in &reference.instances {
        let ref_vals = reference.values_of(s.instance);
        for (k, r) in results.iter().enumerate() {
            let Some(summary) = r.instances.iter().find(|x| x.instance == s.instance) else {
                continue;
            };
            let mark = (k > 0).then(|| Mark::compare(&ref_vals, &r.values_of(s.instance), ALPHA).symbol().to_string());
            rows.push(TableRow {
                schema_version: SCHEMA_VERSION,
                instance: s.instance,
                method: r.method.clone(),
                mean: summary.mean,
                std: summary.std,
                mark,
            });
        }
    }
    rows
}

/// Mean ± std over all instances and runs.
pub fn overall_rows(results: &[EvalResult]) -> Vec<TableRow> {
    let Some(reference) = results.first() else {
        return Vec::new();
    };
    results
        .iter()
        .enumerate()
        .map(|(k, r)| TableRow {
            schema_version: SCHEMA_VERSION,
            instance: usize::MAX,
            method: r.method.clone(),
            mean: r.mean,
            std: r.std,
            mark: (k > 0).then(|| Mark::compare(&reference.all_values(), &r.all_values(), ALPHA).symbol().to_string()),
        })
        .collect()
}

pub fn heatmap_rows(m: &ImportanceMatrix, standardized: bool) -> Vec<HeatmapRow> {
    let data = if standardized { &m.standardized } else { &m.raw };
    m.kinds
        .iter()
        .zip(data)
        .map(|(kind, v)| HeatmapRow {
            schema_version: SCHEMA_VERSION,
            kind: kind.clone(),
            dimension: v[0],
            max_fes: v[1],
            search_range: v[2],
            modality: v[3],
            global_structure: v[4],
            conditioning: v[5],
        })
        .collect()
}

pub fn curve_rows(logs: &[EpochLog]) -> Vec<CurveRow> {
    logs.iter()
        .map(|l| CurveRow {
            schema_version: SCHEMA_VERSION,
            stage: l.stage,
            epoch: l.epoch,
            episodes: l.episodes,
            updates: l.updates,
            mean_return: l.mean_return,
            mean_loss: l.mean_loss,
            mean_grad_norm: l.mean_grad_norm,
            ppo_passes: l.ppo_passes,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Raw run dump of one evaluation: `runs_<method>.csv`.
pub fn write_runs(dir: &Path, result: &EvalResult) -> Result<PathBuf> {
    let path = dir.join(format!("runs_{}.csv", result.method));
    write_csv(&path, &result.runs)?;
    Ok(path)
}

/// Writes whichever tables the inputs allow and returns the file paths.
pub fn write_report(
    dir: &Path,
    results: &[EvalResult],
    importance: Option<&ImportanceMatrix>,
    curves: &[EpochLog],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    if !results.is_empty() {
        let rows = table_rows(results);
        let p = dir.join("table.csv");
        write_csv(&p, &rows)?;
        out.push(p);
        let doc = TableDocument {
            schema_version: SCHEMA_VERSION,
            methods: results.iter().map(|r| r.method.clone()).collect(),
            rows,
            overall: overall_rows(results),
            note: SIGNIFICANCE_NOTE.to_string(),
        };
        let p = dir.join("table.json");
        write_json(&p, &doc)?;
        out.push(p);
        for r in results {
            out.push(write_runs(dir, r)?);
        }
    }
    if let Some(m) = importance {
        for (name, std) in [("heatmap.csv", true), ("heatmap_raw.csv", false)] {
            let p = dir.join(name);
            write_csv(&p, &heatmap_rows(m, std))?;
            out.push(p);
        }
        let p = dir.join("heatmap.json");
        write_json(&p, m)?;
        out.push(p);
    }
    if !curves.is_empty() {
        let rows = curve_rows(curves);
        let p = dir.join("curves.csv");
        write_csv(&p, &rows)?;
        out.push(p);
        let p = dir.join("curves.json");
        write_json(&p, &rows)?;
        out.push(p);
    }
    Ok(out)
}
