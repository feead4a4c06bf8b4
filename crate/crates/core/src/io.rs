//! CSV readers and writers for traces, series, point tracks and ROI polygons.
//!
//! Floats are written in Rust's shortest round-trip form, so write followed by
//! load reproduces every value bit-for-bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::RoiPolygon;
use crate::rr::PsdEstimate;
use crate::series::{uniform_rate, HrCurve, PulseSignal, RgbTrace, UnevenSeries, Unit};

pub const RGB_HEADER: [&str; 5] = ["frame", "t_s", "r", "g", "b"];
pub const SERIES_HEADER: [&str; 2] = ["t_s", "value"];
pub const TRACK_HEADER: [&str; 4] = ["frame", "point_id", "x", "y"];
pub const ROI_HEADER: [&str; 4] = ["frame", "vertex_id", "x", "y"];
pub const PSD_HEADER: [&str; 2] = ["brpm", "power"];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct RgbRow {
    #[allow(dead_code)]
    frame: i64,
    t_s: f64,
    r: f64,
    g: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct SeriesRow {
    t_s: f64,
    value: f64,
}

/// One tracked feature point observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: i64,
    pub point_id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct RoiRow {
    frame: i64,
    vertex_id: u64,
    x: f64,
    y: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn read_rows<T: DeserializeOwned, R: Read>(
    reader: R,
    path: &Path,
    header: &[&str],
) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path))
}

struct CsvOut {
    inner: csv::Writer<File>,
}

impl CsvOut {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header).map_err(|e| csv_err(path, e))?;
        Ok(Self { inner })
    }

    fn row(&mut self, path: &Path, fields: &[String]) -> Result<()> {
        self.inner.write_record(fields).map_err(|e| csv_err(path, e))
    }

    fn finish(mut self, path: &Path) -> Result<()> {
        self.inner.flush().map_err(io_err(path))
    }
}

/// Parses an RGB trace from any reader; `path` is only used in error messages.
pub fn parse_rgb_trace<R: Read>(reader: R, path: &Path) -> Result<RgbTrace> {
    let rows: Vec<RgbRow> = read_rows(reader, path, &RGB_HEADER)?;
    let (timestamps, samples) = rows.iter().map(|r| (r.t_s, [r.r, r.g, r.b])).unzip();
    RgbTrace::new(timestamps, samples)
}

pub fn load_rgb_trace(path: &Path) -> Result<RgbTrace> {
    parse_rgb_trace(open(path)?, path)
}

pub fn write_rgb_trace(path: &Path, trace: &RgbTrace) -> Result<()> {
    let mut out = CsvOut::create(path, &RGB_HEADER)?;
    for (i, (t, s)) in trace.timestamps().iter().zip(trace.samples()).enumerate() {
        out.row(
            path,
            &[
                i.to_string(),
                t.to_string(),
                s[0].to_string(),
                s[1].to_string(),
                s[2].to_string(),
            ],
        )?;
    }
    out.finish(path)
}

/// Anything that can be written as a `t_s,value` series.
pub trait SeriesRows {
    fn rows(&self) -> Vec<(f64, f64)>;
}

impl SeriesRows for UnevenSeries {
    fn rows(&self) -> Vec<(f64, f64)> {
        self.times().iter().copied().zip(self.values().iter().copied()).collect()
    }
}

impl SeriesRows for PulseSignal {
    fn rows(&self) -> Vec<(f64, f64)> {
        self.values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.time_at(i), v))
            .collect()
    }
}

impl SeriesRows for HrCurve {
    fn rows(&self) -> Vec<(f64, f64)> {
        self.times().iter().copied().zip(self.hr_bpm().iter().copied()).collect()
    }
}

pub fn write_series(path: &Path, series: &impl SeriesRows) -> Result<()> {
    let mut out = CsvOut::create(path, &SERIES_HEADER)?;
    for (t, v) in series.rows() {
        out.row(path, &[t.to_string(), v.to_string()])?;
    }
    out.finish(path)
}

fn load_series_rows(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<SeriesRow> = read_rows(open(path)?, path, &SERIES_HEADER)?;
    Ok(rows.iter().map(|r| (r.t_s, r.value)).unzip())
}

pub fn load_uneven(path: &Path, unit: Unit) -> Result<UnevenSeries> {
    let (t, v) = load_series_rows(path)?;
    UnevenSeries::new(t, v, unit)
}

/// Loads a uniformly sampled pulse; the rate is inferred from the timestamps.
pub fn load_pulse(path: &Path) -> Result<PulseSignal> {
    let (t, v) = load_series_rows(path)?;
    let rate = uniform_rate(&t)?;
    PulseSignal::new(t[0], rate, v)
}

pub fn load_hr_curve(path: &Path) -> Result<HrCurve> {
    let (t, v) = load_series_rows(path)?;
    HrCurve::new(t, v)
}

pub fn write_psd(path: &Path, psd: &PsdEstimate) -> Result<()> {
    let mut out = CsvOut::create(path, &PSD_HEADER)?;
    for (f, p) in psd.freqs_brpm().iter().zip(psd.power()) {
        out.row(path, &[f.to_string(), p.to_string()])?;
    }
    out.finish(path)
}

pub fn parse_point_tracks<R: Read>(reader: R, path: &Path) -> Result<Vec<TrackRow>> {
    let rows: Vec<TrackRow> = read_rows(reader, path, &TRACK_HEADER)?;
    if let Some(r) = rows.iter().find(|r| !(r.x.is_finite() && r.y.is_finite())) {
        return Err(Error::validation(format!(
            "non-finite coordinate for point {} in frame {}",
            r.point_id, r.frame
        )));
    }
    Ok(rows)
}

pub fn load_point_tracks(path: &Path) -> Result<Vec<TrackRow>> {
    parse_point_tracks(open(path)?, path)
}

pub fn write_point_tracks(path: &Path, rows: &[TrackRow]) -> Result<()> {
    let mut out = CsvOut::create(path, &TRACK_HEADER)?;
    for r in rows {
        out.row(
            path,
            &[r.frame.to_string(), r.point_id.to_string(), r.x.to_string(), r.y.to_string()],
        )?;
    }
    out.finish(path)
}

/// Loads one or more ROI polygons keyed by frame. Vertices are ordered by `vertex_id`.
pub fn load_roi_polygons(path: &Path) -> Result<Vec<(i64, RoiPolygon)>> {
    let rows: Vec<RoiRow> = read_rows(open(path)?, path, &ROI_HEADER)?;
    let mut frames: BTreeMap<i64, BTreeMap<u64, [f64; 2]>> = BTreeMap::new();
    for r in rows {
        if frames.entry(r.frame).or_default().insert(r.vertex_id, [r.x, r.y]).is_some() {
            return Err(Error::validation(format!(
                "duplicate vertex {} in frame {}",
                r.vertex_id, r.frame
            )));
        }
    }
    frames
        .into_iter()
        .map(|(f, verts)| Ok((f, RoiPolygon::new(verts.into_values().collect())?)))
        .collect()
}

pub fn write_roi_polygons(path: &Path, polygons: &[(i64, RoiPolygon)]) -> Result<()> {
    let mut out = CsvOut::create(path, &ROI_HEADER)?;
    for (frame, poly) in polygons {
        for (i, v) in poly.vertices().iter().enumerate() {
            out.row(
                path,
                &[frame.to_string(), i.to_string(), v[0].to_string(), v[1].to_string()],
            )?;
        }
    }
    out.finish(path)
}

/// Writes any serialisable value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    file.write_all(b"\n").map_err(io_err(path))
}
