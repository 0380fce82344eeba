//! Brute-force reference computations, independent of the library's
//! closed-form kernels.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use nnreduce::{enclose_activation, enclose_linear, EnclosureConfig, Layer, Network, Zonotope};

/// All `2^q` sign vectors in `{-1, 1}^q`.
pub fn sign_vectors(q: usize) -> impl Iterator<Item = Array1<f64>> {
    (0u64..(1u64 << q)).map(move |mask| {
        (0..q)
            .map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 })
            .collect()
    })
}

/// `c + G β` for every sign vector `β`.
pub fn zonotope_vertices(center: &Array1<f64>, generators: &Array2<f64>) -> Vec<Array1<f64>> {
    sign_vectors(generators.ncols())
        .map(|beta| {
            let mut p = center.clone();
            for (j, b) in beta.iter().enumerate() {
                for i in 0..p.len() {
                    p[i] += b * generators[[i, j]];
                }
            }
            p
        })
        .collect()
}

/// Component-wise min/max over a point cloud.
pub fn bounding_box(points: &[Array1<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = points[0].len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in points {
        for i in 0..n {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

/// Corners of the box `[lower, upper]`.
pub fn box_vertices(lower: &[f64], upper: &[f64]) -> Vec<Array1<f64>> {
    (0u64..(1u64 << lower.len()))
        .map(|mask| {
            (0..lower.len())
                .map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] })
                .collect()
        })
        .collect()
}

/// Interval matrix-vector product via positive/negative weight parts.
pub fn interval_matvec(
    w: &Array2<f64>,
    lower: &[f64],
    upper: &[f64],
    bias_lo: &[f64],
    bias_hi: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = bias_lo.to_vec();
    let mut hi = bias_hi.to_vec();
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let a = w[[i, j]];
            if a >= 0.0 {
                lo[i] += a * lower[j];
                hi[i] += a * upper[j];
            } else {
                lo[i] += a * upper[j];
                hi[i] += a * lower[j];
            }
        }
    }
    (lo, hi)
}

/// Layer-by-layer zonotope enclosure without any look-ahead or merging.
pub fn plain_propagation(net: &Network, input: &Zonotope, config: &EnclosureConfig) -> Zonotope {
    let mut h = input.clone();
    for layer in net.layers() {
        h = match layer {
            Layer::Linear(l) => enclose_linear(l, &h).unwrap(),
            Layer::Activation { kind, width } => enclose_activation(*kind, *width, &h, config).unwrap().0,
        };
    }
    h
}

/// Uniform sample from a box.
pub fn sample_box(rng: &mut impl rand::Rng, lower: &[f64], upper: &[f64]) -> Array1<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| if l < u { rng.random_range(l..=u) } else { l })
        .collect()
}

/// Uniform factor vector in `[-1, 1]^q`.
pub fn sample_factors(rng: &mut impl rand::Rng, q: usize) -> Array1<f64> {
    (0..q).map(|_| rng.random_range(-1.0..=1.0)).collect()
}
