//! `rrpipe`: respiratory rate estimation from rPPG traces.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when a processing stage
//! cannot produce a result.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rrpipe::eval::{evaluate_segments, load_corpus, load_gt_csv};
use rrpipe::filter::zero_phase_bandpass;
use rrpipe::hr::{bandpass_hr, spectrogram, trace_ridge};
use rrpipe::hrv::{compute_ibi, design_second_band, detect_peaks, detrend_hrv, ibi_to_hrv, refine_peaks};
use rrpipe::io::{
    load_hr_curve, load_point_tracks, load_pulse, load_rgb_trace, load_roi_polygons, load_uneven, write_json,
    write_psd, write_rgb_trace, write_roi_polygons, write_series,
};
use rrpipe::metrics::{bland_altman, compute_metrics, MetricsReport, SegmentResult};
use rrpipe::motion::track_roi;
use rrpipe::outlier::{fit_gaussian, prune};
use rrpipe::pos::pos_extract;
use rrpipe::rr::estimate_rr;
use rrpipe::synth::{gen_rgb_trace, SynthFile, TruthFile};
use rrpipe::{load_config, run_pipeline, Error, PipelineConfig, Stage, Unit};

#[derive(Parser)]
#[command(name = "rrpipe", version, about = "Respiratory rate from remote-PPG traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON file overriding pipeline defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use raw peak times instead of quadratic refinement.
    #[arg(long)]
    no_interp: bool,
    /// Skip Gaussian outlier pruning.
    #[arg(long)]
    no_outlier_removal: bool,
}

impl PipelineArgs {
    fn config(&self) -> rrpipe::Result<PipelineConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        cfg.enable_interp &= !self.no_interp;
        cfg.enable_outlier_removal &= !self.no_outlier_removal;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate RR for one RGB trace; prints a JSON summary.
    Estimate {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Write every intermediate series into this directory.
        #[arg(long)]
        dump_intermediates: Option<PathBuf>,
    },
    /// Run a corpus of traces and score them against ground truth.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// `segment_id,rr_brpm` table; defaults to `<id>.truth.json` files.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        bland_altman: Option<PathBuf>,
    },
    /// Generate a synthetic RGB trace with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_trace: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
    },
    /// Propagate an ROI polygon through tracked feature points.
    TrackRoi {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        roi: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// POS pulse extraction.
    Rppg {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.6)]
        window_s: f64,
    },
    /// Track the HR curve of a pulse signal.
    Hr {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        lambda: f64,
    },
    /// Detrended HRV from a pulse signal and its HR curve.
    Hrv {
        #[arg(long)]
        pulse: PathBuf,
        #[arg(long)]
        hr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_interp: bool,
    },
    /// Drop HRV samples outside mean ± alpha·sigma.
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
    },
    /// Lomb-Scargle RR from an HRV series.
    Rr {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        psd: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct EstimateSummary {
    rr_brpm: f64,
    peak_power: f64,
    n_samples: usize,
    n_hrv_samples: usize,
    n_outliers_removed: usize,
}

#[derive(Serialize)]
struct RrSummary {
    rr_brpm: f64,
    peak_power: f64,
    n_samples: usize,
}

#[derive(Serialize)]
struct FailedSegment {
    segment_id: String,
    stage: Option<&'static str>,
    error: String,
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    metrics: MetricsReport,
    segments: Vec<SegmentResult>,
    failed: Vec<FailedSegment>,
}

/// Failure tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_validation() { 2 } else { 3 },
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

fn stage_failure(stage: Stage, e: Error) -> Failure {
    if e.is_validation() {
        return e.into();
    }
    Error::Stage {
        stage,
        segment: None,
        source: Box::new(e),
    }
    .into()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn estimate(trace: &Path, pipeline: &PipelineArgs, dump: Option<&Path>) -> Result<(), Failure> {
    let cfg = pipeline.config()?;
    let trace = load_rgb_trace(trace)?;
    let out = run_pipeline(&trace, &cfg)?;
    if let Some(dir) = dump {
        out.diagnostics.dump(dir, &out.rr)?;
    }
    let summary = EstimateSummary {
        rr_brpm: out.rr.rr_brpm,
        peak_power: out.rr.peak_power,
        n_samples: trace.len(),
        n_hrv_samples: out.diagnostics.n_hrv_samples(),
        n_outliers_removed: out.diagnostics.n_outliers_removed(),
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("plain struct"));
    Ok(())
}

fn evaluate(
    corpus: &Path,
    gt: Option<&Path>,
    pipeline: &PipelineArgs,
    report: &Path,
    ba: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = pipeline.config()?;
    let gt = gt.map(load_gt_csv).transpose()?;
    let segments = load_corpus(corpus, gt.as_ref())?;
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (seg, res) in segments.iter().zip(evaluate_segments(&segments, &cfg)) {
        match res {
            Ok(r) => ok.push(r),
            Err(e) => {
                eprintln!("warning: {e}");
                failed.push(FailedSegment {
                    segment_id: seg.id.clone(),
                    stage: e.stage().map(Stage::name),
                    error: e.to_string(),
                });
            }
        }
    }
    if ok.is_empty() {
        return Err(Failure {
            code: 3,
            error: anyhow::anyhow!("all {} segments failed", failed.len()),
        });
    }
    let metrics = compute_metrics(&ok)?;
    eprintln!("{}", metrics.table_row());
    if let Some(path) = ba {
        bland_altman(&ok)?.write_csv(path)?;
    }
    write_json(
        report,
        &EvalReport {
            metrics,
            segments: ok,
            failed,
        },
    )?;
    Ok(())
}

fn synth(spec: &Path, out_trace: &Path, out_truth: &Path) -> Result<(), Failure> {
    let file: SynthFile = read_json(spec)?;
    let (trace, truth) = gen_rgb_trace(&file.spec, file.pulse_strength, file.drift)?;
    write_rgb_trace(out_trace, &trace)?;
    write_json(out_truth, &TruthFile::from(&truth))?;
    Ok(())
}

fn track(tracks: &Path, roi: &Path, out: &Path) -> Result<(), Failure> {
    let rows = load_point_tracks(tracks)?;
    let polys = load_roi_polygons(roi)?;
    let Some((_, initial)) = polys.first() else {
        return Err(Error::Validation(format!("{} holds no polygon", roi.display())).into());
    };
    let result = track_roi(initial, &rows)?;
    let frames: Vec<_> = result.frames.into_iter().zip(result.polygons).collect();
    write_roi_polygons(out, &frames)?;
    Ok(())
}

fn hr(input: &Path, out: &Path, lambda: f64) -> Result<(), Failure> {
    let cfg = PipelineConfig {
        ridge_transition_penalty: lambda,
        ..PipelineConfig::default()
    };
    cfg.validate()?;
    let pulse = load_pulse(input)?;
    let filtered =
        bandpass_hr(&pulse, cfg.hr_band_hz, cfg.filter_order).map_err(|e| stage_failure(Stage::BandpassHr, e))?;
    let map = spectrogram(&filtered, cfg.stft_window_s, cfg.stft_hop_s, cfg.hr_band_hz)
        .map_err(|e| stage_failure(Stage::Spectrogram, e))?;
    let curve = trace_ridge(&map, lambda).map_err(|e| stage_failure(Stage::RidgeTracking, e))?;
    write_series(out, &curve)?;
    Ok(())
}

fn hrv(pulse: &Path, hr: &Path, out: &Path, no_interp: bool) -> Result<(), Failure> {
    let cfg = PipelineConfig::default();
    let pulse = load_pulse(pulse)?;
    let curve = load_hr_curve(hr)?;
    let band = design_second_band(&curve, cfg.second_filter_offset_bpm, pulse.sample_rate())
        .map_err(|e| stage_failure(Stage::SecondBand, e))?;
    let filtered =
        zero_phase_bandpass(&pulse, band, cfg.filter_order).map_err(|e| stage_failure(Stage::SecondFilter, e))?;
    let mut peaks = detect_peaks(&filtered, band).map_err(|e| stage_failure(Stage::PeakDetection, e))?;
    if !no_interp {
        peaks = refine_peaks(&filtered, &peaks).map_err(|e| stage_failure(Stage::PeakDetection, e))?;
    }
    let ibi = compute_ibi(&peaks).map_err(|e| stage_failure(Stage::Ibi, e))?;
    let series = ibi_to_hrv(&ibi).map_err(|e| stage_failure(Stage::Hrv, e))?;
    let detrended = detrend_hrv(&series, &curve).map_err(|e| stage_failure(Stage::Detrend, e))?;
    write_series(out, &detrended)?;
    Ok(())
}

fn prune_cmd(input: &Path, out: &Path, alpha: f64) -> Result<(), Failure> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Validation(format!("alpha must be positive, got {alpha}")).into());
    }
    let series = load_uneven(input, Unit::Bpm)?;
    let fit = fit_gaussian(&series).map_err(|e| stage_failure(Stage::OutlierRemoval, e))?;
    let pruned = prune(&series, &fit, alpha).map_err(|e| stage_failure(Stage::OutlierRemoval, e))?;
    write_series(out, &pruned)?;
    Ok(())
}

fn rr(input: &Path, out: &Path, psd: Option<&Path>) -> Result<(), Failure> {
    let series = load_uneven(input, Unit::Bpm)?;
    let est = estimate_rr(&series, &PipelineConfig::default()).map_err(|e| stage_failure(Stage::RrEstimation, e))?;
    if let Some(path) = psd {
        write_psd(path, &est.psd)?;
    }
    write_json(
        out,
        &RrSummary {
            rr_brpm: est.rr_brpm,
            peak_power: est.peak_power,
            n_samples: series.len(),
        },
    )?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate {
            trace,
            pipeline,
            dump_intermediates,
        } => estimate(&trace, &pipeline, dump_intermediates.as_deref()),
        Command::Evaluate {
            corpus,
            gt,
            pipeline,
            report,
            bland_altman,
        } => evaluate(&corpus, gt.as_deref(), &pipeline, &report, bland_altman.as_deref()),
        Command::Synth {
            spec,
            out_trace,
            out_truth,
        } => synth(&spec, &out_trace, &out_truth),
        Command::TrackRoi { tracks, roi, out } => track(&tracks, &roi, &out),
        Command::Rppg { input, out, window_s } => {
            let trace = load_rgb_trace(&input)?;
            let pulse = pos_extract(&trace, window_s).map_err(|e| stage_failure(Stage::Pos, e))?;
            write_series(&out, &pulse)?;
            Ok(())
        }
        Command::Hr { input, out, lambda } => hr(&input, &out, lambda),
        Command::Hrv {
            pulse,
            hr,
            out,
            no_interp,
        } => hrv(&pulse, &hr, &out, no_interp),
        Command::Prune { input, out, alpha } => prune_cmd(&input, &out, alpha),
        Command::Rr { input, out, psd } => rr(&input, &out, psd.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
