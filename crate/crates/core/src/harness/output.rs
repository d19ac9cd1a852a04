use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentOutput, GofScores};
use crate::error::{Error, Result};
use crate::simulate::PathStatistics;

pub const REPLICATE_HEADER: [&str; 7] = ["rep_id", "S", "V_raikov", "V_path", "T_D", "T_self", "ratio_LLN"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn replicate_csv(rows: &[PathStatistics]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPLICATE_HEADER)?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.s.to_string(),
            r.v_raikov.to_string(),
            opt(r.v_path),
            opt(r.t_d),
            opt(r.t_self),
            opt(r.ratio_lln),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Equal-width histogram over `[min, max]` of the defined values.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts.into_iter().enumerate().map(|(k, c)| (lo + (k as f64 + 0.5) * width, c)).collect()
}

fn histogram_csv(values: &[f64], bins: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_center", "count"])?;
    for (center, count) in histogram(values, bins) {
        w.write_record([center.to_string(), count.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `report.json`, one `replicates_n{n}.csv` per n and, with `hist_bins`,
/// one `hist_n{n}.csv` per n. Either every file lands or none does.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path, hist_bins: Option<usize>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut report = serde_json::to_string_pretty(&out.report)?;
    report.push('\n');
    files.push((dir.join("report.json"), report.into_bytes()));
    for ((n, rows), stat) in out.replicates.iter().zip(&out.statistic) {
        files.push((dir.join(format!("replicates_n{n}.csv")), replicate_csv(rows)?));
        if let Some(bins) = hist_bins {
            let defined: Vec<f64> = stat.iter().flatten().copied().collect();
            files.push((dir.join(format!("hist_n{n}.csv")), histogram_csv(&defined, bins)?));
        }
    }

    fs::create_dir_all(dir)?;
    let tmp = |p: &Path| p.with_extension("tmp");
    let staged: Result<()> = files.iter().try_for_each(|(p, bytes)| Ok(fs::write(tmp(p), bytes)?));
    if let Err(e) = staged {
        for (p, _) in &files {
            let _ = fs::remove_file(tmp(p));
        }
        return Err(e);
    }
    for (p, _) in &files {
        fs::rename(tmp(p), p)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Re-scores one column of a replicate CSV against Φ; blank cells count as undefined.
pub fn rescore_csv(path: &Path, column: &str) -> Result<GofScores> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Config(format!("no column '{column}' in {}", path.display())))?;
    let mut values = Vec::new();
    let mut undefined = 0;
    for rec in r.records() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("").trim();
        if cell.is_empty() {
            undefined += 1;
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| Error::Config(format!("'{cell}' in column '{column}' is not a number")))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Empty("column values"));
    }
    GofScores::from_samples(&values, undefined)
}
