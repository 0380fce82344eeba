//! Verification of feed-forward neural networks with zonotopes, reducing the
//! network on the fly by merging neurons with similar output bounds.
//!
//! The reduction is conservative: if the reduced network is verified, so is
//! the original one.

// NaN must fail range checks, so `!(a <= b)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod enclosure;
pub mod error;
pub mod interval;
pub mod network;
pub mod reduction;
pub mod sampling;
pub mod spec;
pub mod verifier;
pub mod zonotope;

pub use enclosure::{approximate_neuron, enclose_activation, enclose_linear, EnclosureConfig, NeuronApproximation};
pub use error::{Error, Result};
pub use interval::IntervalVector;
pub use network::{ActivationKind, Layer, LayerSpec, LinearLayer, Network};
pub use reduction::{dynamic_buckets, merge, static_buckets, BucketMode, BucketSet, MergeBucket, ReducedLinear};
pub use spec::{InputSpec, Instance, UnsafeSpec};
pub use verifier::{check, run_once, verify, Verdict, VerificationReport, VerifierConfig};
pub use zonotope::Zonotope;
