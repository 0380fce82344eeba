//! Sampling-based falsification used as a runtime self-check.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::interval::IntervalVector;
use crate::network::Network;
use crate::spec::{InputSpec, UnsafeSpec};

/// Slack when testing whether a concrete output lies in a computed hull.
pub const HULL_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub samples: usize,
    /// Sampled inputs whose output lies in the unsafe set.
    pub unsafe_hits: usize,
    /// Sampled outputs outside the computed output hull.
    pub hull_escapes: usize,
    pub counterexample: Option<Vec<f64>>,
}

/// Evaluates the network on the box corners along each axis and on `samples`
/// uniformly drawn inputs.
pub fn sample_check(
    net: &Network,
    input: &InputSpec,
    unsafe_set: &UnsafeSpec,
    output_hull: &IntervalVector,
    samples: usize,
    seed: u64,
) -> Result<SampleCheck> {
    let bx = input.to_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = SampleCheck::default();
    let center = bx.center();
    let mut points: Vec<Array1<f64>> = Vec::with_capacity(2 * bx.dim() + 1);
    points.push(center.clone());
    for i in 0..bx.dim() {
        let (l, u) = bx.bounds(i);
        for v in [l, u] {
            let mut p = center.clone();
            p[i] = v;
            points.push(p);
        }
    }
    let drawn = (0..samples).map(|_| {
        (0..bx.dim())
            .map(|i| {
                let (l, u) = bx.bounds(i);
                if l < u {
                    rng.random_range(l..=u)
                } else {
                    l
                }
            })
            .collect::<Array1<f64>>()
    });
    for x in points.into_iter().chain(drawn) {
        let y = net.eval(&x)?;
        result.samples += 1;
        if !output_hull.contains(&y, HULL_SLACK) {
            result.hull_escapes += 1;
        }
        if unsafe_set.contains(&y) {
            result.unsafe_hits += 1;
            if result.counterexample.is_none() {
                result.counterexample = Some(x.to_vec());
            }
        }
    }
    Ok(result)
}
