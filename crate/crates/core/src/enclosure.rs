//! Layer-wise image enclosures.
//!
//! Linear layers map zonotopes exactly. An activation layer is enclosed neuron
//! by neuron: take the neuron's input bounds from the interval hull, fit a
//! line to the activation over those bounds, bound the residual, apply the
//! line to the zonotope row and finally add the residual intervals as fresh
//! generators.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::interval::IntervalVector;
use crate::network::{ActivationKind, LinearLayer};
use crate::zonotope::Zonotope;

/// Sampling resolution for the per-neuron linear approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnclosureConfig {
    /// Evenly spaced points (endpoints included) used for the least-squares fit.
    pub regression_samples: usize,
    /// Evenly spaced points used to bound the error of smooth activations.
    pub error_samples: usize,
}

impl Default for EnclosureConfig {
    fn default() -> Self {
        Self {
            regression_samples: 20,
            error_samples: 100,
        }
    }
}

/// `σ(x) ∈ slope · x + intercept + [error_lower, error_upper]` on `input_bounds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronApproximation {
    pub slope: f64,
    pub intercept: f64,
    pub error_lower: f64,
    pub error_upper: f64,
    pub input_bounds: (f64, f64),
}

impl NeuronApproximation {
    pub fn residual(&self, kind: ActivationKind, x: f64) -> f64 {
        kind.apply(x) - (self.slope * x + self.intercept)
    }
}

/// Evenly spaced points on `[lower, upper]` with both endpoints hit exactly.
fn linspace(lower: f64, upper: f64, count: usize) -> impl Iterator<Item = f64> {
    let last = count - 1;
    let step = (upper - lower) / last as f64;
    (0..count).map(move |j| {
        if j == last {
            upper
        } else {
            lower + step * j as f64
        }
    })
}

/// Fits and bounds a linear approximation of `kind` over `[lower, upper]`.
pub fn approximate_neuron(
    kind: ActivationKind,
    lower: f64,
    upper: f64,
    config: &EnclosureConfig,
) -> Result<NeuronApproximation> {
    if !(lower <= upper) {
        return Err(Error::InvalidInterval {
            index: 0,
            lower,
            upper,
        });
    }
    if lower == upper {
        return Ok(NeuronApproximation {
            slope: 0.0,
            intercept: kind.apply(lower),
            error_lower: 0.0,
            error_upper: 0.0,
            input_bounds: (lower, upper),
        });
    }
    let (slope, intercept) = regression(kind, lower, upper, config.regression_samples.max(2));
    let mut approx = NeuronApproximation {
        slope,
        intercept,
        error_lower: 0.0,
        error_upper: 0.0,
        input_bounds: (lower, upper),
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut track = |x: f64| {
        let d = approx.residual(kind, x);
        lo = lo.min(d);
        hi = hi.max(d);
    };
    match kind {
        ActivationKind::Relu => {
            // The residual is piecewise linear with a single kink at 0.
            track(lower);
            track(upper);
            if lower < 0.0 && upper > 0.0 {
                track(0.0);
            }
        }
        ActivationKind::Sigmoid | ActivationKind::Tanh => {
            let count = config.error_samples.max(2);
            linspace(lower, upper, count).for_each(&mut track);
            // Between neighbouring samples the residual moves by at most
            // Lipschitz · spacing / 2 away from the nearest sample.
            let spacing = (upper - lower) / (count - 1) as f64;
            let margin = (kind.lipschitz() + slope.abs()) * spacing / 2.0;
            lo -= margin;
            hi += margin;
        }
    }
    approx.error_lower = lo;
    approx.error_upper = hi;
    Ok(approx)
}

/// Least-squares line through evenly spaced samples of `kind`.
///
/// The fit is done in the normalized coordinate `t ∈ [-1, 1]` so that very
/// narrow input ranges stay well conditioned.
fn regression(kind: ActivationKind, lower: f64, upper: f64, count: usize) -> (f64, f64) {
    let mid = (lower + upper) / 2.0;
    let half = (upper - lower) / 2.0;
    let last = (count - 1) as f64;
    let ts: Vec<f64> = (0..count).map(|j| 2.0 * j as f64 / last - 1.0).collect();
    let ys: Vec<f64> = linspace(lower, upper, count).map(|x| kind.apply(x)).collect();
    let n = count as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (&t, &y) in ts.iter().zip(&ys) {
        sty += (t - t_mean) * (y - y_mean);
        stt += (t - t_mean) * (t - t_mean);
    }
    let slope = (sty / stt) / half;
    let x_mean = mid + half * t_mean;
    (slope, y_mean - slope * x_mean)
}

/// Exact image of a linear layer.
pub fn enclose_linear(layer: &LinearLayer, input: &Zonotope) -> Result<Zonotope> {
    input.linear_map(&layer.weights, &layer.bias)
}

/// Encloses `σ(H)` for an element-wise activation.
///
/// Returns the output zonotope together with the input bounds of every
/// neuron (the interval hull of `input`).
pub fn enclose_activation(
    kind: ActivationKind,
    width: usize,
    input: &Zonotope,
    config: &EnclosureConfig,
) -> Result<(Zonotope, IntervalVector)> {
    check_dim("activation layer input", width, input.dim())?;
    let bounds = input.interval_hull();
    let mut slopes = Array1::zeros(width);
    let mut intercepts = Array1::zeros(width);
    let mut err_lower = Array1::zeros(width);
    let mut err_upper = Array1::zeros(width);
    for i in 0..width {
        let (l, u) = bounds.bounds(i);
        let approx = approximate_neuron(kind, l, u, config).map_err(|_| Error::InvalidInterval {
            index: i,
            lower: l,
            upper: u,
        })?;
        slopes[i] = approx.slope;
        intercepts[i] = approx.intercept;
        err_lower[i] = approx.error_lower;
        err_upper[i] = approx.error_upper;
    }
    let errors = IntervalVector::new(err_lower, err_upper)?;
    let mut output = input
        .diagonal_map(&slopes, &intercepts)
        .add_interval_pruned(&errors)?;
    output.prune_zero_generators();
    Ok((output, bounds))
}
