//! File formats.
//!
//! * Panels: CSV with a header `time,<location ids...>` and one row per time.
//! * Matrices: headerless CSV, `n` rows of `n` values. Weight matrices carry a
//!   JSON sidecar `<stem>.meta.json` recording how they were built.
//! * Regime paths: CSV `time,state` with 1-based states.
//! * Smoothing output: CSV `time,xi1_filtered,xi2_filtered,xi1_smoothed,xi2_smoothed`.
//!
//! Floats are written in shortest round-trip form, so write-then-read is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterOutput, SmoothedPath};
use crate::model::{LogSquaredPanel, Panel, RegimePath};
use crate::weights::{Construction, DistanceMatrix, WeightMatrix};

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, what: impl Fn() -> String) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{}: `{s}` is not a number", what())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path)?)))
}

fn write_labelled(path: &Path, ids: &[String], times: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["time".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in times.iter().zip(rows) {
        let mut rec = vec![t.clone()];
        rec.extend(row.iter().map(|&v| fmt(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

type Labelled = (Vec<String>, Vec<String>, Vec<Vec<f64>>);

fn read_labelled(path: &Path) -> Result<Labelled> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse(format!(
            "{}: panel needs a time column and at least one location",
            path.display()
        )));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                line + 2,
                rec.len(),
                header.len()
            )));
        }
        times.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(i, s)| parse_f64(s, || format!("{} row {} column {}", path.display(), line + 2, ids[i])))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((ids, times, rows))
}

pub fn write_panel_csv(path: impl AsRef<Path>, panel: &Panel) -> Result<()> {
    write_labelled(path.as_ref(), panel.location_ids(), panel.time_ids(), panel.rows())
}

pub fn read_panel_csv(path: impl AsRef<Path>) -> Result<Panel> {
    let (ids, times, rows) = read_labelled(path.as_ref())?;
    Panel::new(ids, times, rows)
}

pub fn write_log_squared_csv(path: impl AsRef<Path>, panel: &LogSquaredPanel) -> Result<()> {
    write_labelled(path.as_ref(), panel.location_ids(), panel.time_ids(), panel.rows())
}

pub fn read_log_squared_csv(path: impl AsRef<Path>) -> Result<LogSquaredPanel> {
    let (ids, times, rows) = read_labelled(path.as_ref())?;
    LogSquaredPanel::new(ids, times, rows, 0)
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(path.as_ref())?));
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|&v| fmt(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| parse_f64(s, || format!("{} entry ({}, {})", path.display(), i + 1, j + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "{}: matrix has {n} rows but row {} has {} columns",
            path.display(),
            i + 1,
            rows[i].len()
        )));
    }
    Ok(rows)
}

/// Sidecar metadata of a weight CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsMeta {
    pub n: usize,
    pub row_normalized: bool,
    pub construction: Construction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_rows: Vec<usize>,
}

/// `dir/stem.csv` -> `dir/stem.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_weights(path: impl AsRef<Path>, w: &WeightMatrix, construction: Construction) -> Result<PathBuf> {
    let path = path.as_ref();
    write_matrix_csv(path, w.values())?;
    let meta = WeightsMeta {
        n: w.n(),
        row_normalized: w.is_row_normalized(),
        construction,
        zero_rows: w.zero_rows(),
    };
    let mp = meta_path(path);
    write_json(&mp, &meta)?;
    Ok(mp)
}

/// Reads a weight CSV. Row normalization is detected from the values; the
/// sidecar, when present, must agree on the dimension.
pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightMatrix> {
    let path = path.as_ref();
    let rows = read_matrix_csv(path)?;
    let w = WeightMatrix::from_rows(&rows)?;
    let mp = meta_path(path);
    if mp.exists() {
        let meta: WeightsMeta = read_json(&mp)?;
        if meta.n != w.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} says n = {}, matrix is {}x{}",
                mp.display(),
                meta.n,
                w.n(),
                w.n()
            )));
        }
    }
    Ok(w)
}

pub fn write_distances(path: impl AsRef<Path>, d: &DistanceMatrix) -> Result<()> {
    write_matrix_csv(path, d.values())
}

pub fn read_distances(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let rows = read_matrix_csv(path)?;
    let n = rows.len();
    DistanceMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn write_regime_path(path: impl AsRef<Path>, time_ids: &[String], regimes: &RegimePath) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["time", "state"])?;
    for (t, s) in time_ids.iter().zip(regimes.labels()) {
        w.write_record([t.as_str(), &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regime_path(path: impl AsRef<Path>) -> Result<(Vec<String>, RegimePath)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path.as_ref())?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        times.push(rec[0].to_string());
        let s: u8 = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("regime state `{}`", &rec[1])))?;
        if !(1..=2).contains(&s) {
            return Err(Error::Parse(format!("regime state {s} must be 1 or 2")));
        }
        states.push(s - 1);
    }
    Ok((times, RegimePath::new(states)?))
}

pub fn write_smoothing_csv(
    path: impl AsRef<Path>,
    time_ids: &[String],
    filter: &FilterOutput,
    smoothed: &SmoothedPath,
) -> Result<()> {
    if filter.len() != time_ids.len() || smoothed.smoothed.len() != time_ids.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} time labels, {} filtered rows, {} smoothed rows",
            time_ids.len(),
            filter.len(),
            smoothed.smoothed.len()
        )));
    }
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["time", "xi1_filtered", "xi2_filtered", "xi1_smoothed", "xi2_smoothed"])?;
    for ((t, f), s) in time_ids.iter().zip(&filter.filtered).zip(&smoothed.smoothed) {
        w.write_record([t.clone(), fmt(f[0]), fmt(f[1]), fmt(s[0]), fmt(s[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a smoothing CSV: `(time, [filtered1, filtered2, smoothed1, smoothed2])`.
pub fn read_smoothing_csv(path: impl AsRef<Path>) -> Result<Vec<(String, [f64; 4])>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = parse_f64(&rec[k + 1], || format!("{} column {}", path.display(), k + 2))?;
        }
        out.push((rec[0].to_string(), v));
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::simulate::simulate;
    use crate::weights::{build_queen_grid, row_normalize};
    use proptest::prelude::*;

    #[test]
    fn panel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = row_normalize(&build_queen_grid(2, 3).unwrap()).matrix;
        let sim = simulate(&ModelParams::reference_dgp(), &w, 20, 5, 1).unwrap();
        let p = dir.path().join("panel.csv");
        write_panel_csv(&p, &sim.panel).unwrap();
        assert_eq!(read_panel_csv(&p).unwrap(), sim.panel);
        let q = dir.path().join("logsq.csv");
        write_log_squared_csv(&q, &sim.log_squared).unwrap();
        assert_eq!(read_log_squared_csv(&q).unwrap().rows(), sim.log_squared.rows());
        let r = dir.path().join("regimes.csv");
        write_regime_path(&r, sim.panel.time_ids(), &sim.regimes).unwrap();
        assert_eq!(read_regime_path(&r).unwrap().1, sim.regimes);
    }

    #[test]
    fn weights_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let w = row_normalize(&build_queen_grid(3, 3).unwrap()).matrix;
        let p = dir.path().join("w.csv");
        let mp = write_weights(&p, &w, Construction::QueenGrid { rows: 3, cols: 3 }).unwrap();
        assert_eq!(mp, dir.path().join("w.meta.json"));
        let meta: WeightsMeta = read_json(&mp).unwrap();
        assert!(meta.row_normalized);
        let back = read_weights(&p).unwrap();
        assert_eq!(back, w);
        let header = std::fs::read_to_string(&p).unwrap();
        assert_eq!(header.lines().count(), 9);
    }

    #[test]
    fn malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "time,a,b\n1,0.5,x\n").unwrap();
        assert!(read_panel_csv(&p).unwrap_err().to_string().contains("not a number"));
        std::fs::write(&p, "0,1\n1,0\n0,1\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matrix_round_trip_is_exact(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 9)) {
            let dir = tempfile::tempdir().unwrap();
            let m = DMatrix::from_row_slice(3, 3, &vals);
            let p = dir.path().join("m.csv");
            write_matrix_csv(&p, &m).unwrap();
            let back = read_matrix_csv(&p).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(back[i][j].to_bits(), m[(i, j)].to_bits());
                }
            }
        }
    }
}
