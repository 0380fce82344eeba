//! Zonotope verification with on-the-fly network reduction.
//!
//! Before a linear/activation pair is enclosed with zonotopes, cheap interval
//! bounds are pushed one nonlinear layer ahead. Neurons whose look-ahead
//! bounds fall into a common merge bucket are removed from the working copy
//! of the network, so the expensive zonotope enclosure only ever sees the
//! reduced layers.

use std::time::{Duration, Instant};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::enclosure::{enclose_activation, EnclosureConfig};
use crate::error::{check_dim, Error, Result};
use crate::interval::IntervalVector;
use crate::network::{ActivationKind, Layer, Network};
use crate::reduction::{dynamic_buckets, merge, static_buckets, BucketMode, ReducedLinear};
use crate::spec::{InputSpec, UnsafeSpec};
use crate::zonotope::Zonotope;

pub const DEFAULT_SCHEDULE: [f64; 5] = [0.1, 0.05, 0.01, 0.005, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Verified,
    Unknown,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Verified => "verified",
            Verdict::Unknown => "unknown",
        })
    }
}

/// Neuron accounting for one activation layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    /// 1-based position of the activation layer in the network.
    pub layer_index: usize,
    pub kind: ActivationKind,
    pub original_neurons: usize,
    pub remaining_neurons: usize,
    pub buckets_used: usize,
    /// Whether the layer is followed by a linear layer and may be reduced.
    pub hidden: bool,
}

/// Remaining-neuron percentage over the hidden activation layers.
pub fn remaining_percent(layers: &[LayerStats]) -> f64 {
    let (orig, rem) = layers
        .iter()
        .filter(|l| l.hidden)
        .fold((0usize, 0usize), |(o, r), l| {
            (o + l.original_neurons, r + l.remaining_neurons)
        });
    if orig == 0 {
        100.0
    } else {
        100.0 * rem as f64 / orig as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    #[serde(with = "millis")]
    pub lookahead: Duration,
    #[serde(with = "millis")]
    pub enclosure: Duration,
    #[serde(with = "millis")]
    pub check: Duration,
}

/// Durations as fractional milliseconds in reports.
pub(crate) mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.lookahead + self.enclosure + self.check
    }
}

/// Look-ahead bounds of one layer, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadTrace {
    pub layer_index: usize,
    /// Output bounds of the layer before merging (full width).
    pub bounds: IntervalVector,
    pub kept: Vec<usize>,
}

/// Output of a single propagation at a fixed tolerance.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: Zonotope,
    pub layers: Vec<LayerStats>,
    pub timings: PhaseTimings,
    pub trace: Vec<LookaheadTrace>,
}

/// Propagates `input` through `net`, merging neurons with tolerance `delta`.
///
/// `BucketMode::None` skips the look-ahead entirely and is plain layer-by-layer
/// zonotope propagation.
pub fn run_once(
    net: &Network,
    input: &Zonotope,
    delta: f64,
    mode: BucketMode,
    config: &EnclosureConfig,
) -> Result<RunOutcome> {
    check_dim("network input", net.input_dim(), input.dim())?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidSpec(format!("bucket tolerance must be >= 0, got {delta}")));
    }
    let layers = net.layers();
    let mut linears: Vec<Option<ReducedLinear>> = layers
        .iter()
        .map(|layer| match layer {
            Layer::Linear(l) => Some(ReducedLinear::from(l)),
            Layer::Activation { .. } => None,
        })
        .collect();
    let mut stats = Vec::new();
    let mut trace = Vec::new();
    let mut timings = PhaseTimings::default();
    let mut h = input.clone();
    // Pre-activation bounds of the previous activation layer, from its enclosure.
    let mut previous: Option<(ActivationKind, IntervalVector)> = None;

    for idx in 0..layers.len() {
        let Layer::Activation { kind, width } = layers[idx] else {
            continue;
        };
        let mut width = width;
        let hidden = idx + 1 < layers.len();
        let mut buckets_used = 0;

        if hidden && mode != BucketMode::None {
            let start = Instant::now();
            let mut bounds_in = h.interval_hull();
            if let Some((prev_kind, pre)) = &previous {
                bounds_in = bounds_in.tighten_with(&pre.activation_map(*prev_kind));
            }
            let linear = linears[idx - 1].as_ref().expect("linear before activation");
            let bounds = linear.map_interval(&bounds_in)?.activation_map(kind);
            let buckets = match mode {
                BucketMode::Static => static_buckets(kind, &bounds, delta),
                BucketMode::Dynamic => dynamic_buckets(&bounds, delta),
                BucketMode::None => unreachable!(),
            };
            let next = linears[idx + 1].as_ref().expect("linear after hidden activation");
            let outcome = merge(linear, next, &bounds, &buckets)?;
            buckets_used = buckets.used().count();
            width = outcome.kept.len();
            linears[idx - 1] = Some(outcome.prev);
            linears[idx + 1] = Some(outcome.next);
            trace.push(LookaheadTrace {
                layer_index: idx + 1,
                bounds,
                kept: outcome.kept,
            });
            timings.lookahead += start.elapsed();
        }

        let start = Instant::now();
        let linear = linears[idx - 1].as_ref().expect("linear before activation");
        let pre = linear.map_zonotope(&h)?;
        let (out, pre_bounds) = enclose_activation(kind, width, &pre, config)?;
        h = out;
        previous = Some((kind, pre_bounds));
        timings.enclosure += start.elapsed();

        stats.push(LayerStats {
            layer_index: idx + 1,
            kind,
            original_neurons: layers[idx].output_dim(),
            remaining_neurons: width,
            buckets_used,
            hidden,
        });
    }

    if let Some(Some(last)) = linears.last() {
        let start = Instant::now();
        h = last.map_zonotope(&h)?;
        timings.enclosure += start.elapsed();
    }

    Ok(RunOutcome {
        output: h,
        layers: stats,
        timings,
        trace,
    })
}

/// Sufficient check that the output set misses the unsafe set.
///
/// Boundary contact counts as `Unknown`.
pub fn check(output: &Zonotope, unsafe_set: &UnsafeSpec) -> Result<Verdict> {
    unsafe_set.validate(output.dim())?;
    let verified = match unsafe_set {
        UnsafeSpec::Halfspaces { a, b } => {
            let mut any = false;
            for (row, &bi) in a.outer_iter().zip(b.iter()) {
                if output.halfspace_lower_bound(&row.to_owned())? > bi {
                    any = true;
                    break;
                }
            }
            any
        }
        UnsafeSpec::Classification { label } => {
            let n = output.dim();
            let mut all = true;
            for j in (0..n).filter(|&j| j != *label) {
                let mut direction = Array1::zeros(n);
                direction[*label] = 1.0;
                direction[j] = -1.0;
                if output.halfspace_lower_bound(&direction)? <= 0.0 {
                    all = false;
                    break;
                }
            }
            all
        }
    };
    Ok(if verified {
        Verdict::Verified
    } else {
        Verdict::Unknown
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// Strictly decreasing bucket tolerances tried in order.
    pub schedule: Vec<f64>,
    pub mode: BucketMode,
    pub enclosure: EnclosureConfig,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            mode: BucketMode::Dynamic,
            enclosure: EnclosureConfig::default(),
        }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidSpec("empty tolerance schedule".into()));
        }
        if self.schedule.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidSpec(
                "tolerances must be finite and non-negative".into(),
            ));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidSpec(
                "tolerance schedule must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    /// Tolerance of the reported run; `None` for the unreduced run.
    pub delta: Option<f64>,
    pub mode: BucketMode,
    /// Number of propagations performed, including the fallback.
    pub attempts: usize,
    pub layers: Vec<LayerStats>,
    pub rn_percent: f64,
    pub timings: PhaseTimings,
    #[serde(with = "millis")]
    pub total_time: Duration,
    pub output_hull: IntervalVector,
}

/// Tries each tolerance of the schedule until the property is verified, then
/// falls back to the unreduced network.
pub fn verify(
    net: &Network,
    input: &InputSpec,
    unsafe_set: &UnsafeSpec,
    config: &VerifierConfig,
) -> Result<VerificationReport> {
    config.validate()?;
    check_dim("instance input", net.input_dim(), input.dim())?;
    unsafe_set.validate(net.output_dim())?;
    let started = Instant::now();
    let zonotope = input.to_zonotope();

    let mut attempts = 0;
    let tolerances: Vec<Option<f64>> = match config.mode {
        BucketMode::None => vec![None],
        _ => config.schedule.iter().copied().map(Some).chain([None]).collect(),
    };
    let mut last = None;
    for delta in tolerances {
        attempts += 1;
        let (d, mode) = match delta {
            Some(d) => (d, config.mode),
            None => (0.0, BucketMode::None),
        };
        let mut run = run_once(net, &zonotope, d, mode, &config.enclosure)?;
        let start = Instant::now();
        let verdict = check(&run.output, unsafe_set)?;
        run.timings.check = start.elapsed();
        let done = verdict == Verdict::Verified;
        last = Some((verdict, delta, mode, run));
        if done {
            break;
        }
    }
    let (verdict, delta, mode, run) = last.expect("at least one attempt");
    Ok(VerificationReport {
        verdict,
        delta,
        mode,
        attempts,
        rn_percent: remaining_percent(&run.layers),
        layers: run.layers,
        timings: run.timings,
        total_time: started.elapsed(),
        output_hull: run.output.interval_hull(),
    })
}
