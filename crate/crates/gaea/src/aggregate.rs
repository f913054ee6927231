//! Reduces record documents to per-group medians, quartiles and curves.
//!
//! The reduction sorts its input first, so the summary does not depend on
//! the order in which runs finished or files were listed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::runner::{metric, RecordDocument};

pub const SUMMARY_SUFFIX: &str = ".summary.json";
pub const FINALS_SUFFIX: &str = ".finals.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub entropy_log_base: String,
    pub groups: Vec<GroupSummary>,
    /// Mean final stationarity against the horizon, one curve per variant
    /// that was swept over several horizons.
    pub curves: Vec<Curve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub name: String,
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    /// Pointwise quartiles over seeds, truncated to the shortest run.
    pub series: BTreeMap<String, Band>,
    pub metrics: BTreeMap<String, Stat>,
    /// How often each discretized architecture was found, keyed `"2,0,1"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub architectures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub q1: Vec<f64>,
    pub median: Vec<f64>,
    pub q3: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    /// Standard error of the mean; absent with fewer than two values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub variant: String,
    pub metric: String,
    pub points: Vec<CurvePoint>,
    /// Least-squares slope of log(mean) against log(horizon).
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub horizon: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    stat(values).median
}

pub fn stat(values: &[f64]) -> Stat {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = if values.is_empty() { f64::NAN } else { values.iter().sum::<f64>() / n };
    let std_err = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) / n).sqrt());
    Stat {
        count: values.len(),
        mean,
        std_err,
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// All record documents below `dir`, skipping summaries.
pub fn load_records(dir: &Path) -> Result<Vec<RecordDocument>> {
    let mut files = Vec::new();
    collect_json(dir, &mut files)?;
    files.sort();
    files.iter().map(|p| crate::io::read_json(p)).collect()
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.ends_with(".json") && !name.ends_with(SUMMARY_SUFFIX) {
                out.push(path);
            }
        }
    }
    Ok(())
}

/// One summary per experiment, in name order.
pub fn aggregate(records: &[RecordDocument]) -> Vec<Summary> {
    let mut sorted: Vec<&RecordDocument> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.experiment, &a.variant, a.horizon, a.seed).cmp(&(&b.experiment, &b.variant, b.horizon, b.seed)));
    let mut by_experiment: BTreeMap<&str, Vec<&RecordDocument>> = BTreeMap::new();
    for r in sorted {
        by_experiment.entry(r.experiment.as_str()).or_default().push(r);
    }
    by_experiment.into_iter().map(|(name, docs)| summarize(name, &docs)).collect()
}

fn summarize(experiment: &str, docs: &[&RecordDocument]) -> Summary {
    let mut groups: BTreeMap<(String, Option<usize>), Vec<&RecordDocument>> = BTreeMap::new();
    for d in docs {
        groups.entry((d.variant.clone(), d.horizon)).or_default().push(d);
    }
    let groups: Vec<GroupSummary> = groups.into_iter().map(|((variant, horizon), docs)| group(variant, horizon, &docs)).collect();

    let mut curves: BTreeMap<&str, Vec<CurvePoint>> = BTreeMap::new();
    for g in &groups {
        if let (Some(t), Some(s)) = (g.horizon, g.metrics.get(metric::STATIONARITY)) {
            curves.entry(g.variant.as_str()).or_default().push(CurvePoint {
                horizon: t,
                mean: s.mean,
                q1: s.q1,
                median: s.median,
                q3: s.q3,
            });
        }
    }
    let curves = curves
        .into_iter()
        .filter(|(_, pts)| pts.len() > 1)
        .map(|(variant, mut points)| {
            points.sort_by_key(|p| p.horizon);
            let xs: Vec<f64> = points.iter().map(|p| p.horizon as f64).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
            Curve { variant: variant.to_string(), metric: metric::STATIONARITY.to_string(), slope: log_log_slope(&xs, &ys), points }
        })
        .collect();

    Summary {
        schema_version: crate::experiment::SCHEMA_VERSION,
        experiment: experiment.to_string(),
        entropy_log_base: docs.first().map(|d| d.entropy_log_base.clone()).unwrap_or_default(),
        groups,
        curves,
    }
}

fn group(variant: String, horizon: Option<usize>, docs: &[&RecordDocument]) -> GroupSummary {
    let name = docs[0].group();
    let mut names: Vec<&String> = docs.iter().flat_map(|d| d.record.series.keys()).collect();
    names.sort();
    names.dedup();
    let mut series = BTreeMap::new();
    for n in names {
        let runs: Vec<&[f64]> = docs.iter().filter_map(|d| d.record.series(n)).collect();
        if runs.len() != docs.len() {
            continue;
        }
        let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
        let mut band = Band { q1: Vec::with_capacity(len), median: Vec::with_capacity(len), q3: Vec::with_capacity(len) };
        for i in 0..len {
            let s = stat(&runs.iter().map(|r| r[i]).collect::<Vec<_>>());
            band.q1.push(s.q1);
            band.median.push(s.median);
            band.q3.push(s.q3);
        }
        series.insert(n.clone(), band);
    }
    let mut metric_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for d in docs {
        for (k, v) in &d.metrics {
            metric_values.entry(k.clone()).or_default().push(*v);
        }
    }
    let metrics = metric_values.into_iter().map(|(k, v)| (k, stat(&v))).collect();
    let mut architectures = BTreeMap::new();
    for d in docs {
        if let Some(a) = &d.architecture {
            let key = a.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",");
            *architectures.entry(key).or_insert(0) += 1;
        }
    }
    GroupSummary { name, variant, horizon, seeds: docs.iter().map(|d| d.seed).collect(), series, metrics, architectures }
}

/// `experiment,group,metric,count,mean,q1,median,q3`
pub fn finals_csv(summary: &Summary) -> String {
    let mut out = String::from("experiment,group,metric,count,mean,std_err,q1,median,q3\n");
    for g in &summary.groups {
        for (name, s) in &g.metrics {
            out.push_str(&format!(
                "{},{},{},{},{:?},{},{:?},{:?},{:?}\n",
                summary.experiment,
                g.name,
                name,
                s.count,
                s.mean,
                s.std_err.map(|e| format!("{e:?}")).unwrap_or_default(),
                s.q1,
                s.median,
                s.q3
            ));
        }
    }
    out
}

/// Writes `<experiment>.summary.json` and `<experiment>.finals.csv` into
/// `dir` for every experiment and returns the summary paths.
pub fn write_summaries(dir: &Path, summaries: &[Summary]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for s in summaries {
        let path = dir.join(format!("{}{SUMMARY_SUFFIX}", s.experiment));
        crate::io::write_json(&path, s)?;
        crate::io::write_text(&dir.join(format!("{}{FINALS_SUFFIX}", s.experiment)), &finals_csv(s))?;
        paths.push(path);
    }
    Ok(paths)
}
