//! Interval vectors: per-dimension `[lower, upper]` boxes.
//!
//! These carry the cheap look-ahead bounds used to decide which neurons to
//! merge, and the interval-valued biases that merging leaves behind.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{check_dim, Error, Result};
use crate::network::ActivationKind;

/// Components whose intersection is empty by at most this much are treated as
/// rounding jitter between two enclosures of the same nonempty set.
pub const EMPTY_INTERSECTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalVector {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl IntervalVector {
    pub fn new(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        check_dim("interval bounds", lower.len(), upper.len())?;
        for (index, (&l, &u)) in lower.iter().zip(upper.iter()).enumerate() {
            // Written so that NaN bounds are rejected too.
            if !(l <= u) {
                return Err(Error::InvalidInterval {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let lower = bounds.iter().map(|b| b.0).collect();
        let upper = bounds.iter().map(|b| b.1).collect();
        Self::new(lower, upper)
    }

    /// Degenerate box `[x, x]`.
    pub fn point(x: Array1<f64>) -> Self {
        Self {
            lower: x.clone(),
            upper: x,
        }
    }

    /// Box with the given center and non-negative radius.
    pub fn from_center_radius(center: &Array1<f64>, radius: &Array1<f64>) -> Result<Self> {
        check_dim("interval center/radius", center.len(), radius.len())?;
        Self::new(center - radius, center + radius)
    }

    pub(crate) fn new_unchecked(lower: Array1<f64>, upper: Array1<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Array1<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<f64> {
        &self.upper
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.lower[i], self.upper[i])
    }

    pub fn center(&self) -> Array1<f64> {
        Zip::from(&self.lower)
            .and(&self.upper)
            .map_collect(|&l, &u| (l + u) / 2.0)
    }

    pub fn radius(&self) -> Array1<f64> {
        Zip::from(&self.lower)
            .and(&self.upper)
            .map_collect(|&l, &u| (u - l) / 2.0)
    }

    pub fn contains(&self, x: &Array1<f64>, slack: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(&v, (&l, &u))| v >= l - slack && v <= u + slack)
    }

    /// Whether `self ⊆ other` component-wise.
    pub fn is_subset_of(&self, other: &IntervalVector, slack: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                self.lower[i] >= other.lower[i] - slack && self.upper[i] <= other.upper[i] + slack
            })
    }

    /// Restricts to the components in `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> IntervalVector {
        Self {
            lower: indices.iter().map(|&i| self.lower[i]).collect(),
            upper: indices.iter().map(|&i| self.upper[i]).collect(),
        }
    }

    /// Component-wise intersection.
    ///
    /// Components that come out empty by no more than
    /// [`EMPTY_INTERSECTION_TOLERANCE`] collapse to their midpoint; larger gaps
    /// are reported as [`Error::EmptyIntersection`].
    pub fn intersect(&self, other: &IntervalVector) -> Result<IntervalVector> {
        check_dim("interval intersection", self.dim(), other.dim())?;
        let n = self.dim();
        let mut lower = Array1::zeros(n);
        let mut upper = Array1::zeros(n);
        for i in 0..n {
            let lo = self.lower[i].max(other.lower[i]);
            let hi = self.upper[i].min(other.upper[i]);
            if lo <= hi {
                lower[i] = lo;
                upper[i] = hi;
            } else if lo - hi <= EMPTY_INTERSECTION_TOLERANCE {
                let mid = (lo + hi) / 2.0;
                lower[i] = mid;
                upper[i] = mid;
            } else {
                return Err(Error::EmptyIntersection {
                    index: i,
                    lower: lo,
                    upper: hi,
                    gap: lo - hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Intersection that falls back to `self` (and logs) if it comes out empty.
    pub fn tighten_with(&self, other: &IntervalVector) -> IntervalVector {
        match self.intersect(other) {
            Ok(tight) => tight,
            Err(err) => {
                warn!(%err, "bound tightening failed, keeping the un-tightened bounds");
                self.clone()
            }
        }
    }

    /// Minkowski sum of two boxes.
    pub fn add(&self, other: &IntervalVector) -> Result<IntervalVector> {
        check_dim("interval addition", self.dim(), other.dim())?;
        Ok(Self {
            lower: &self.lower + &other.lower,
            upper: &self.upper + &other.upper,
        })
    }

    /// Tight box around `{W x + b : x ∈ self}`.
    pub fn affine_map(
        &self,
        weights: &Array2<f64>,
        bias: &Array1<f64>,
    ) -> Result<IntervalVector> {
        check_dim("affine map input", weights.ncols(), self.dim())?;
        check_dim("affine map bias", weights.nrows(), bias.len())?;
        let center = weights.dot(&self.center()) + bias;
        let radius = weights.mapv(f64::abs).dot(&self.radius());
        Ok(Self {
            lower: &center - &radius,
            upper: center + radius,
        })
    }

    /// Image under an element-wise monotone activation.
    pub fn activation_map(&self, kind: ActivationKind) -> IntervalVector {
        Self {
            lower: self.lower.mapv(|x| kind.apply(x)),
            upper: self.upper.mapv(|x| kind.apply(x)),
        }
    }
}
