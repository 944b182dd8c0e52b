//! Method x threshold grid evaluation with CSV output.

use std::io::Write;

use crowdnms_core::density::DensitySource;
use crowdnms_core::evaluation::{EvalReport, NUM_DENSITY_BINS};
use crowdnms_core::suppression::{RescoreMethod, SuppressionConfig};

use crate::formats::{AnnotationSet, DetectionSet};
use crate::pipeline::{evaluate_set, suppress_set, PipelineError};

/// A suppression method choice as exposed on the command line: the rescore
/// weight plus whether the threshold adapts to density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub method: RescoreMethod,
    pub adaptive: bool,
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match (self.adaptive, self.method) {
            (false, RescoreMethod::Greedy) => "greedy",
            (false, RescoreMethod::SoftLinear) => "soft-linear",
            (false, RescoreMethod::SoftGaussian) => "soft-gaussian",
            (true, RescoreMethod::Greedy) => "adaptive",
            (true, RescoreMethod::SoftLinear) => "adaptive-soft-linear",
            (true, RescoreMethod::SoftGaussian) => "adaptive-soft-gaussian",
        }
    }
}

/// One grid cell's metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: MethodSpec,
    pub nt: f64,
    pub kept: usize,
    pub suppressed: usize,
    pub report: EvalReport,
}

/// Fixed sweep-wide settings.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub sigma: f64,
    pub score_floor: f64,
    pub iou_thresh: f64,
    pub density_source: DensitySource,
    pub jobs: usize,
}

/// Runs every `(method, nt)` cell over the same raw detections.
///
/// Rows come back in grid order: methods outer, thresholds inner. Densities
/// are attached once per cell from the configured source so adaptive and
/// non-adaptive cells see identical inputs.
pub fn run_sweep(
    annotations: &AnnotationSet,
    detections: &DetectionSet,
    methods: &[MethodSpec],
    thresholds: &[f64],
    options: &SweepOptions,
) -> Result<Vec<SweepRow>, PipelineError> {
    let mut rows = Vec::with_capacity(methods.len() * thresholds.len());
    for spec in methods {
        for &nt in thresholds {
            let config = SuppressionConfig {
                method: spec.method,
                adaptive: spec.adaptive,
                nt,
                sigma: options.sigma,
                score_floor: options.score_floor,
            };
            let source = spec.adaptive.then_some(&options.density_source);
            let (kept_set, stats) = suppress_set(
                detections,
                Some(annotations),
                source,
                &config,
                options.jobs,
            )?;
            let (report, _) = evaluate_set(
                annotations,
                &kept_set,
                options.iou_thresh,
                true,
                options.jobs,
            )?;
            rows.push(SweepRow {
                method: *spec,
                nt,
                kept: stats.kept,
                suppressed: stats.suppressed,
                report,
            });
        }
    }
    Ok(rows)
}

/// CSV layout: one row per cell, empty cells for absent bins.
pub fn write_sweep_csv(writer: &mut impl Write, rows: &[SweepRow]) -> std::io::Result<()> {
    write!(writer, "method,nt,kept,suppressed,mr2,ap,recall")?;
    for bin in 1..=NUM_DENSITY_BINS {
        write!(writer, ",mr2_bin{bin}")?;
    }
    writeln!(writer)?;
    for row in rows {
        write!(
            writer,
            "{},{},{},{},{},{},{}",
            row.method.label(),
            row.nt,
            row.kept,
            row.suppressed,
            row.report.mr2,
            row.report.ap,
            row.report.recall
        )?;
        let bins = row.report.bin_mr2.unwrap_or_default();
        for bin in bins {
            match bin {
                Some(v) => write!(writer, ",{v}")?,
                None => write!(writer, ",")?,
            }
        }
        writeln!(writer)?;
    }
    Ok(())
}
