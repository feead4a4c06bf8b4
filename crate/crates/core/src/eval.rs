//! Corpus evaluation: segment discovery, ground truth lookup and parallel runs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::load_rgb_trace;
use crate::metrics::SegmentResult;
use crate::pipeline::run_segment;
use crate::series::RgbTrace;
use crate::synth::TruthFile;

/// Suffix of per-segment ground-truth files written by `synth`.
pub const TRUTH_SUFFIX: &str = ".truth.json";

#[derive(Debug, Clone)]
pub struct Segment {
    pub id: String,
    pub trace: RgbTrace,
    pub rr_ground_truth_brpm: f64,
}

#[derive(Debug, Deserialize)]
struct GtRow {
    segment_id: String,
    rr_brpm: f64,
}

/// Reads a `segment_id,rr_brpm` ground-truth table.
pub fn load_gt_csv(path: &Path) -> Result<HashMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let mut out = HashMap::new();
    for row in rdr.deserialize::<GtRow>() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if out.insert(row.segment_id.clone(), row.rr_brpm).is_some() {
            return Err(Error::validation(format!("duplicate ground truth for {}", row.segment_id)));
        }
    }
    Ok(out)
}

pub fn load_truth(path: &Path) -> Result<TruthFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// Lists `(segment_id, trace_path, rr_gt)` for every `*.csv` trace in `dir`,
/// sorted by id. Ground truth comes from `gt` when given, otherwise from the
/// sibling `<id>.truth.json`.
pub fn discover_corpus(dir: &Path, gt: Option<&HashMap<String, f64>>) -> Result<Vec<(String, PathBuf, f64)>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            continue;
        };
        let rr = match gt {
            Some(map) => *map
                .get(&id)
                .ok_or_else(|| Error::validation(format!("no ground truth for segment {id}")))?,
            None => load_truth(&dir.join(format!("{id}{TRUTH_SUFFIX}")))?.rr_brpm,
        };
        out.push((id, path, rr));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    if out.is_empty() {
        return Err(Error::validation(format!("no *.csv traces in {}", dir.display())));
    }
    Ok(out)
}

pub fn load_corpus(dir: &Path, gt: Option<&HashMap<String, f64>>) -> Result<Vec<Segment>> {
    discover_corpus(dir, gt)?
        .into_iter()
        .map(|(id, path, rr)| {
            Ok(Segment {
                id,
                trace: load_rgb_trace(&path)?,
                rr_ground_truth_brpm: rr,
            })
        })
        .collect()
}

pub fn evaluate_segment(segment: &Segment, config: &PipelineConfig) -> Result<SegmentResult> {
    let out = run_segment(Some(&segment.id), &segment.trace, config)?;
    Ok(SegmentResult::new(
        segment.id.clone(),
        out.rr.rr_brpm,
        segment.rr_ground_truth_brpm,
        out.diagnostics.n_hrv_samples(),
        out.diagnostics.n_outliers_removed(),
    ))
}

/// Runs every segment in parallel; the output order matches `segments`.
pub fn evaluate_segments(segments: &[Segment], config: &PipelineConfig) -> Vec<Result<SegmentResult>> {
    segments.par_iter().map(|s| evaluate_segment(s, config)).collect()
}
