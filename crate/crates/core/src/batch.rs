//! Batch verification and CSV reporting.
//!
//! `summary.csv` has one row per instance:
//! `instance_id,verdict,delta_final,time_ms,rn_percent`.
//! `layers.csv` has one row per hidden activation layer and instance:
//! `instance_id,layer_index,original_neurons,remaining_neurons,buckets_used`.
//!
//! A `delta_final` field is empty when the verdict comes from the unreduced
//! network; failed instances have verdict `error` and empty numeric fields.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::Network;
use crate::spec::Instance;
use crate::verifier::{verify, Verdict, VerificationReport, VerifierConfig};

#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub id: String,
    pub outcome: std::result::Result<VerificationReport, String>,
}

/// Verifies every instance on up to `threads` workers; results keep the
/// input order.
pub fn run_batch(
    net: &Network,
    instances: &[(String, std::result::Result<Instance, String>)],
    config: &VerifierConfig,
    threads: usize,
) -> Result<Vec<InstanceResult>> {
    config.validate()?;
    let job = |(id, instance): &(String, std::result::Result<Instance, String>)| InstanceResult {
        id: id.clone(),
        outcome: instance.clone().and_then(|inst| {
            verify(net, &inst.input, &inst.unsafe_set, config).map_err(|e| e.to_string())
        }),
    };
    if threads <= 1 {
        return Ok(instances.iter().map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::InvalidSpec(format!("thread pool: {e}")))?;
    Ok(pool.install(|| instances.par_iter().map(job).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub instances: usize,
    pub verified: usize,
    pub errors: usize,
    /// Verified share of all instances, in percent.
    pub vr_percent: f64,
    /// Mean remaining-neuron percentage over successfully processed instances.
    pub mean_rn_percent: f64,
    /// Mean remaining neurons per hidden layer, keyed by layer index.
    pub mean_remaining: BTreeMap<usize, f64>,
    pub total_ms: f64,
    pub mean_ms: f64,
}

impl BatchSummary {
    pub fn from_results(results: &[InstanceResult]) -> Self {
        let reports: Vec<&VerificationReport> =
            results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let verified = reports
            .iter()
            .filter(|r| r.verdict == Verdict::Verified)
            .count();
        let ok = reports.len();
        let mean = |sum: f64| if ok == 0 { 0.0 } else { sum / ok as f64 };
        let mut per_layer: BTreeMap<usize, f64> = BTreeMap::new();
        for report in &reports {
            for layer in report.layers.iter().filter(|l| l.hidden) {
                *per_layer.entry(layer.layer_index).or_default() += layer.remaining_neurons as f64;
            }
        }
        for v in per_layer.values_mut() {
            *v = mean(*v);
        }
        let total_ms: f64 = reports.iter().map(|r| r.total_time.as_secs_f64() * 1e3).sum();
        Self {
            instances: results.len(),
            verified,
            errors: results.len() - ok,
            vr_percent: if results.is_empty() {
                0.0
            } else {
                100.0 * verified as f64 / results.len() as f64
            },
            mean_rn_percent: mean(reports.iter().map(|r| r.rn_percent).sum()),
            mean_remaining: per_layer,
            total_ms,
            mean_ms: mean(total_ms),
        }
    }
}

/// Formats `x` with 12 significant digits, without trailing zeros.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=15).contains(&magnitude) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_summary_csv<W: Write>(out: W, results: &[InstanceResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance_id", "verdict", "delta_final", "time_ms", "rn_percent"])?;
    for r in results {
        match &r.outcome {
            Ok(report) => w.write_record([
                r.id.clone(),
                report.verdict.to_string(),
                report.delta.map(format_sig12).unwrap_or_default(),
                format_sig12(report.total_time.as_secs_f64() * 1e3),
                format_sig12(report.rn_percent),
            ])?,
            Err(_) => w.write_record([r.id.as_str(), "error", "", "", ""])?,
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_layers_csv<W: Write>(out: W, results: &[InstanceResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "instance_id",
        "layer_index",
        "original_neurons",
        "remaining_neurons",
        "buckets_used",
    ])?;
    for r in results {
        let Ok(report) = &r.outcome else { continue };
        for layer in report.layers.iter().filter(|l| l.hidden) {
            w.write_record([
                r.id.clone(),
                layer.layer_index.to_string(),
                layer.original_neurons.to_string(),
                layer.remaining_neurons.to_string(),
                layer.buckets_used.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
