//! Merge buckets and the conservative neuron-merging transformation.
//!
//! Neurons of an activation layer whose output bounds all lie within
//! `[y − δ, y + δ]` form a merge bucket. Merging a bucket removes its neurons
//! from the layer: their rows disappear from the preceding linear layer, their
//! columns from the following one, and their contribution `W(·, B) · I(B)` is
//! folded into an interval-valued bias of the following layer.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::interval::IntervalVector;
use crate::network::{ActivationKind, LinearLayer};
use crate::zonotope::Zonotope;

/// How merge buckets are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketMode {
    /// Centered at the activation's saturation values.
    Static,
    /// Centered at the neurons' own bound midpoints.
    Dynamic,
    /// No reduction.
    None,
}

impl std::str::FromStr for BucketMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(BucketMode::Static),
            "dynamic" => Ok(BucketMode::Dynamic),
            "none" => Ok(BucketMode::None),
            _ => Err(Error::InvalidSpec(format!(
                "unknown bucket mode {s:?} (expected static, dynamic or none)"
            ))),
        }
    }
}

impl std::fmt::Display for BucketMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BucketMode::Static => "static",
            BucketMode::Dynamic => "dynamic",
            BucketMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeBucket {
    pub center: f64,
    pub tolerance: f64,
    /// 0-based neuron indices, ascending.
    pub members: Vec<usize>,
}

impl MergeBucket {
    pub fn admits(&self, lower: f64, upper: f64) -> bool {
        fits(self.center, self.tolerance, lower, upper)
    }
}

fn fits(center: f64, tolerance: f64, lower: f64, upper: f64) -> bool {
    lower >= center - tolerance && upper <= center + tolerance
}

/// Merge buckets of one layer; member sets are pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketSet {
    pub buckets: Vec<MergeBucket>,
}

impl BucketSet {
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Total number of neurons covered by buckets with more than one member.
    pub fn merged_count(&self) -> usize {
        self.used().map(|b| b.members.len()).sum()
    }

    /// Buckets that take part in merging.
    pub fn used(&self) -> impl Iterator<Item = &MergeBucket> {
        self.buckets.iter().filter(|b| b.members.len() > 1)
    }

    fn from_candidates(buckets: Vec<MergeBucket>) -> Self {
        Self {
            buckets: buckets.into_iter().filter(|b| b.members.len() > 1).collect(),
        }
    }
}

/// Buckets centered at the saturation values of `kind`.
///
/// A neuron that fits several centers goes to the one nearest its bound
/// midpoint; ties go to the smaller center.
pub fn static_buckets(kind: ActivationKind, bounds: &IntervalVector, tolerance: f64) -> BucketSet {
    let centers = kind.saturation_values();
    let mut buckets: Vec<MergeBucket> = centers
        .iter()
        .map(|&center| MergeBucket {
            center,
            tolerance,
            members: Vec::new(),
        })
        .collect();
    for w in 0..bounds.dim() {
        let (l, u) = bounds.bounds(w);
        let mid = (l + u) / 2.0;
        let mut best: Option<(usize, f64)> = None;
        for (b, &center) in centers.iter().enumerate() {
            if !fits(center, tolerance, l, u) {
                continue;
            }
            let dist = (mid - center).abs();
            // centers are ascending, so strict `<` keeps the smaller one on ties
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((b, dist));
            }
        }
        if let Some((b, _)) = best {
            buckets[b].members.push(w);
        }
    }
    BucketSet::from_candidates(buckets)
}

/// Buckets centered at bound midpoints, assigned greedily in index order.
///
/// Neuron `w`, if still unassigned, seeds a bucket at its own midpoint that
/// takes every unassigned neuron `w' ≥ w` whose bounds fit.
pub fn dynamic_buckets(bounds: &IntervalVector, tolerance: f64) -> BucketSet {
    let n = bounds.dim();
    let lower = bounds.lower();
    let upper = bounds.upper();
    let mut assigned = vec![false; n];
    let mut buckets = Vec::new();
    for w in 0..n {
        if assigned[w] {
            continue;
        }
        let center = (lower[w] + upper[w]) / 2.0;
        let members: Vec<usize> = (w..n)
            .filter(|&v| !assigned[v] && fits(center, tolerance, lower[v], upper[v]))
            .collect();
        if members.len() > 1 {
            for &v in &members {
                assigned[v] = true;
            }
            buckets.push(MergeBucket {
                center,
                tolerance,
                members,
            });
        }
    }
    BucketSet { buckets }
}

/// A linear layer whose bias may be an interval `bias ± bias_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedLinear {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub bias_radius: Array1<f64>,
}

impl From<&LinearLayer> for ReducedLinear {
    fn from(layer: &LinearLayer) -> Self {
        Self {
            weights: layer.weights.clone(),
            bias: layer.bias.clone(),
            bias_radius: Array1::zeros(layer.bias.len()),
        }
    }
}

impl ReducedLinear {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn has_interval_bias(&self) -> bool {
        self.bias_radius.iter().any(|&r| r != 0.0)
    }

    pub fn bias_interval(&self) -> IntervalVector {
        IntervalVector::new_unchecked(&self.bias - &self.bias_radius, &self.bias + &self.bias_radius)
    }

    /// Interval image of a box.
    pub fn map_interval(&self, input: &IntervalVector) -> Result<IntervalVector> {
        let mapped = input.affine_map(&self.weights, &self.bias)?;
        if self.has_interval_bias() {
            Ok(IntervalVector::new_unchecked(
                mapped.lower() - &self.bias_radius,
                mapped.upper() + &self.bias_radius,
            ))
        } else {
            Ok(mapped)
        }
    }

    /// Zonotope image: exact map with the bias center, then the residual
    /// bias interval is added as fresh generators.
    pub fn map_zonotope(&self, input: &Zonotope) -> Result<Zonotope> {
        let mapped = input.linear_map(&self.weights, &self.bias)?;
        if self.has_interval_bias() {
            Ok(mapped.add_symmetric_pruned(&self.bias_radius))
        } else {
            Ok(mapped)
        }
    }

    pub fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(x) + &self.bias
    }
}

/// Result of merging the neurons of one activation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    /// The preceding linear layer restricted to the kept rows.
    pub prev: ReducedLinear,
    /// The following linear layer restricted to the kept columns, with the
    /// merged neurons folded into its interval bias.
    pub next: ReducedLinear,
    /// Kept neuron indices, ascending.
    pub kept: Vec<usize>,
}

/// Removes every neuron of the used buckets from the layer between `prev` and
/// `next`, given sound output bounds `bounds` of that layer.
pub fn merge(
    prev: &ReducedLinear,
    next: &ReducedLinear,
    bounds: &IntervalVector,
    buckets: &BucketSet,
) -> Result<MergeOutcome> {
    let width = prev.output_dim();
    check_dim("merge: layer bounds", width, bounds.dim())?;
    check_dim("merge: next layer input", width, next.input_dim())?;

    let mut in_bucket = vec![false; width];
    for bucket in buckets.used() {
        for &w in &bucket.members {
            if w >= width {
                return Err(Error::IndexOutOfRange {
                    index: w,
                    dim: width,
                });
            }
            if in_bucket[w] {
                return Err(Error::BucketOverlap { neuron: w });
            }
            in_bucket[w] = true;
        }
    }
    let merged: Vec<usize> = (0..width).filter(|&w| in_bucket[w]).collect();
    if merged.is_empty() {
        return Ok(MergeOutcome {
            prev: prev.clone(),
            next: next.clone(),
            kept: (0..width).collect(),
        });
    }
    let kept: Vec<usize> = (0..width).filter(|&w| !in_bucket[w]).collect();

    let merged_bounds = bounds.select(&merged);
    let merged_cols = next.weights.select(Axis(1), &merged);
    let bias = &next.bias + &merged_cols.dot(&merged_bounds.center());
    let bias_radius = &next.bias_radius + &merged_cols.mapv(f64::abs).dot(&merged_bounds.radius());

    Ok(MergeOutcome {
        prev: ReducedLinear {
            weights: prev.weights.select(Axis(0), &kept),
            bias: prev.bias.select(Axis(0), &kept),
            bias_radius: prev.bias_radius.select(Axis(0), &kept),
        },
        next: ReducedLinear {
            weights: next.weights.select(Axis(1), &kept),
            bias,
            bias_radius,
        },
        kept,
    })
}
