//! File formats: point patterns, per-pixel tables and summary JSON.
//!
//! A pattern is stored as a CSV file with header `x,y` plus a sidecar
//! `<stem>.window.json` holding the window bounds.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calib::{BandKind, CalibrationReport, DispersionVerdict, PitKind};
use crate::error::{Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::models::ModelParams;
use crate::rng::RngStream;

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
}

pub fn write_pattern_csv<W: Write>(pattern: &PointPattern, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    // header is written explicitly so empty patterns still carry it
    w.write_record(["x", "y"])?;
    for p in pattern.points() {
        w.write_record([format!("{}", p.x), format!("{}", p.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pattern_csv<R: Read>(input: R, window: Window) -> Result<PointPattern> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::InvalidConfig(format!(
            "pattern CSV must have header `x,y`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    for row in r.deserialize() {
        let row: PointRow = row?;
        points.push(Point::new(row.x, row.y));
    }
    PointPattern::new(window, points)
}

/// `<dir>/<stem>.window.json` for a pattern file `<dir>/<stem>.csv`.
pub fn window_sidecar(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pattern");
    path.with_file_name(format!("{stem}.window.json"))
}

/// Writes the CSV and its window sidecar.
pub fn save_pattern(pattern: &PointPattern, path: &Path) -> Result<()> {
    write_pattern_csv(pattern, BufWriter::new(File::create(path)?))?;
    let side = BufWriter::new(File::create(window_sidecar(path))?);
    serde_json::to_writer_pretty(side, pattern.window())?;
    Ok(())
}

/// Reads a pattern; the window comes from `window` if given, otherwise from
/// the sidecar.
pub fn load_pattern(path: &Path, window: Option<Window>) -> Result<PointPattern> {
    let window = match window {
        Some(w) => w,
        None => {
            let side = window_sidecar(path);
            let file = File::open(&side).map_err(|e| {
                Error::InvalidConfig(format!(
                    "window: no window given and sidecar {} unreadable ({e})",
                    side.display()
                ))
            })?;
            let w: Window = serde_json::from_reader(BufReader::new(file))?;
            Window::new(w.x_min, w.x_max, w.y_min, w.y_max)?
        }
    };
    read_pattern_csv(BufReader::new(File::open(path)?), window)
}

/// One row of the per-pixel report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelRow {
    pub s: usize,
    pub x_index: usize,
    pub y_index: usize,
    pub count: u64,
    pub pit: f64,
    pub rank: Option<u64>,
}

pub fn pixel_rows(report: &CalibrationReport) -> Vec<PixelRow> {
    let pit = &report.pit;
    (0..pit.len())
        .map(|s| PixelRow {
            s,
            x_index: pit.grid.column(s),
            y_index: pit.grid.row(s),
            count: pit.counts[s],
            pit: pit.values[s],
            rank: pit.ranks.as_ref().map(|r| r[s]),
        })
        .collect()
}

pub fn write_pixel_csv<W: Write>(rows: &[PixelRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pixel_csv<R: Read>(input: R) -> Result<Vec<PixelRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Compact JSON summary of one calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: ModelParams,
    pub pit_kind: PitKind,
    pub n_points: u64,
    pub n_values: usize,
    pub replicates: Option<usize>,
    pub delta: f64,
    pub n_test_inconsistent: bool,
    pub chi_square_p: f64,
    pub ks_p: f64,
    pub dependence_caveat: bool,
    pub bin_counts: Vec<u64>,
    pub bin_edges: Vec<f64>,
    pub band_kind: Option<BandKind>,
    pub band_level: Option<f64>,
    pub lower_band: Option<Vec<f64>>,
    pub upper_band: Option<Vec<f64>>,
    pub bins_outside_band: Vec<usize>,
    pub outer_bin_count: Option<u64>,
    pub dispersion: Option<DispersionVerdict>,
    pub column_trend_rho: f64,
    pub column_trend_p: f64,
    /// Short labels such as `underdispersed` or `n_test_inconsistent`.
    pub flags: Vec<String>,
    pub seed: u64,
    pub randomization: RngStream,
}

impl Summary {
    pub fn new(report: &CalibrationReport, model: ModelParams) -> Self {
        let hist = &report.histogram;
        let band = hist.band.as_ref();
        let disp = report.dispersion.as_ref();
        let mut flags = Vec::new();
        match disp.map(|d| d.verdict) {
            Some(DispersionVerdict::Underdispersed) => flags.push("underdispersed".to_string()),
            Some(DispersionVerdict::Overdispersed) => flags.push("overdispersed".to_string()),
            _ => {}
        }
        if report.n_test.inconsistent {
            flags.push("n_test_inconsistent".to_string());
        }
        let outside = hist.bins_outside();
        if !outside.is_empty() {
            flags.push("bins_outside_band".to_string());
        }
        Self {
            model,
            pit_kind: report.pit.kind,
            n_points: report.n_test.observed,
            n_values: report.pit.len(),
            replicates: report.n_test.replicates,
            delta: report.n_test.delta,
            n_test_inconsistent: report.n_test.inconsistent,
            chi_square_p: report.uniformity.chi_square.p_value,
            ks_p: report.uniformity.ks.p_value,
            dependence_caveat: report.uniformity.dependence_caveat,
            bin_counts: hist.bin_counts.clone(),
            bin_edges: hist.bin_edges.clone(),
            band_kind: band.map(|b| b.kind),
            band_level: band.map(|b| b.level),
            lower_band: band.map(|b| b.lower.clone()),
            upper_band: band.map(|b| b.upper.clone()),
            bins_outside_band: outside,
            outer_bin_count: disp.map(|d| d.outer_count),
            dispersion: disp.map(|d| d.verdict),
            column_trend_rho: report.column_trend.statistic,
            column_trend_p: report.column_trend.p_value,
            flags,
            seed: report.seed,
            randomization: report.pit.randomization,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
