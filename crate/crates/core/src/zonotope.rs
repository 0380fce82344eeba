//! Zonotopes `⟨c, G⟩ = { c + G β : β ∈ [-1, 1]^q }`.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::interval::IntervalVector;

/// A zonotope with a dense `n × q` generator matrix. `q` may be zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    center: Array1<f64>,
    generators: Array2<f64>,
}

impl Zonotope {
    pub fn new(center: Array1<f64>, generators: Array2<f64>) -> Result<Self> {
        check_dim("zonotope generator rows", center.len(), generators.nrows())?;
        Ok(Self { center, generators })
    }

    /// Degenerate zonotope without generators.
    pub fn point(center: Array1<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            generators: Array2::zeros((n, 0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn generators(&self) -> &Array2<f64> {
        &self.generators
    }

    /// The point `c + G β` for a factor vector `β`.
    pub fn point_at(&self, beta: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim("zonotope factors", self.num_generators(), beta.len())?;
        Ok(&self.center + &self.generators.dot(beta))
    }

    /// Tight axis-aligned box: `c ± Σ_j |G(·, j)|`.
    pub fn interval_hull(&self) -> IntervalVector {
        let delta = self.generators.map_axis(Axis(1), |row| abs_sum(row));
        IntervalVector::new_unchecked(&self.center - &delta, &self.center + &delta)
    }

    /// Minkowski sum with a box: `⟨c + c_I, [G diag(u − c_I)]⟩`.
    ///
    /// One column is appended per dimension, including zero-width ones.
    pub fn add_interval(&self, interval: &IntervalVector) -> Result<Zonotope> {
        check_dim("zonotope + interval", self.dim(), interval.dim())?;
        let n = self.dim();
        let q = self.num_generators();
        let offset = interval.center();
        let radius = interval.upper() - &offset;
        let mut generators = Array2::zeros((n, q + n));
        generators.slice_mut(s![.., ..q]).assign(&self.generators);
        for i in 0..n {
            generators[[i, q + i]] = radius[i];
        }
        Ok(Self {
            center: &self.center + &offset,
            generators,
        })
    }

    /// Like [`Zonotope::add_interval`] but only appends columns for
    /// components of nonzero width. The interval hull is unchanged.
    pub fn add_interval_pruned(&self, interval: &IntervalVector) -> Result<Zonotope> {
        check_dim("zonotope + interval", self.dim(), interval.dim())?;
        let offset = interval.center();
        let radius = interval.upper() - &offset;
        let center = &self.center + &offset;
        Ok(Self {
            center,
            generators: self.append_diagonal(&radius),
        })
    }

    /// Adds the symmetric box `[-radius, radius]`, skipping zero radii.
    pub(crate) fn add_symmetric_pruned(&self, radius: &Array1<f64>) -> Zonotope {
        debug_assert_eq!(radius.len(), self.dim());
        Self {
            center: self.center.clone(),
            generators: self.append_diagonal(radius),
        }
    }

    fn append_diagonal(&self, radius: &Array1<f64>) -> Array2<f64> {
        let q = self.num_generators();
        let fresh: Vec<usize> = (0..self.dim()).filter(|&i| radius[i] != 0.0).collect();
        let mut generators = Array2::zeros((self.dim(), q + fresh.len()));
        generators.slice_mut(s![.., ..q]).assign(&self.generators);
        for (j, &i) in fresh.iter().enumerate() {
            generators[[i, q + j]] = radius[i].abs();
        }
        generators
    }

    /// Exact image `⟨W c + b, W G⟩`.
    pub fn linear_map(&self, weights: &Array2<f64>, bias: &Array1<f64>) -> Result<Zonotope> {
        check_dim("linear map input", weights.ncols(), self.dim())?;
        check_dim("linear map bias", weights.nrows(), bias.len())?;
        Ok(Self {
            center: weights.dot(&self.center) + bias,
            generators: weights.dot(&self.generators),
        })
    }

    /// Row-wise affine map `z_i ↦ scale_i · z_i + offset_i`.
    pub(crate) fn diagonal_map(&self, scale: &Array1<f64>, offset: &Array1<f64>) -> Zonotope {
        let center = Zip::from(&self.center)
            .and(scale)
            .and(offset)
            .map_collect(|&c, &s, &o| s * c + o);
        let mut generators = self.generators.clone();
        for (mut row, &s) in generators.axis_iter_mut(Axis(0)).zip(scale.iter()) {
            row.mapv_inplace(|g| g * s);
        }
        Self { center, generators }
    }

    /// The one-dimensional zonotope along dimension `index` (0-based).
    pub fn project(&self, index: usize) -> Result<Zonotope> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim(),
            });
        }
        Ok(Self {
            center: Array1::from_elem(1, self.center[index]),
            generators: self.generators.slice(s![index..index + 1, ..]).to_owned(),
        })
    }

    /// `min { a · y : y ∈ Z } = a · c − Σ_j |a · G(·, j)|`.
    pub fn halfspace_lower_bound(&self, direction: &Array1<f64>) -> Result<f64> {
        check_dim("halfspace direction", self.dim(), direction.len())?;
        let projected = direction.dot(&self.generators);
        Ok(direction.dot(&self.center) - abs_sum(projected.view()))
    }

    /// Drops generator columns that are entirely zero.
    pub fn prune_zero_generators(&mut self) {
        let keep: Vec<usize> = self
            .generators
            .axis_iter(Axis(1))
            .enumerate()
            .filter(|(_, col)| col.iter().any(|&g| g != 0.0))
            .map(|(j, _)| j)
            .collect();
        if keep.len() != self.num_generators() {
            self.generators = self.generators.select(Axis(1), &keep);
        }
    }
}

fn abs_sum(values: ArrayView1<f64>) -> f64 {
    values.iter().map(|v| v.abs()).sum()
}
