//! Acceptance criteria, parameterised by size so that the regular test suite
//! can run them small and the acceptance target at full scale.
//!
//! Each check returns a one-line summary on success and a description of the
//! first violation on failure.

#![allow(dead_code)]

use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use nnreduce::{
    approximate_neuron, check, enclose_activation, merge, run_once, verify, ActivationKind,
    BucketMode, BucketSet, EnclosureConfig, InputSpec, Instance, IntervalVector, Layer,
    LinearLayer, MergeBucket, Network, ReducedLinear, UnsafeSpec, Verdict,
    VerifierConfig, Zonotope,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle::{
    bounding_box, box_vertices, interval_matvec, plain_propagation, sample_box, sample_factors,
    zonotope_vertices,
};
use super::synth::{argmax, random_network, rng};

pub type Outcome = Result<String, String>;

const KINDS: [ActivationKind; 3] = [ActivationKind::Relu, ActivationKind::Sigmoid, ActivationKind::Tanh];

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..=scale))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array1<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

fn random_box(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> IntervalVector {
    let c = random_vector(rng, n, scale);
    let r: Array1<f64> = (0..n).map(|_| rng.random_range(0.0..=scale)).collect();
    IntervalVector::from_center_radius(&c, &r).unwrap()
}

fn random_zonotope(rng: &mut ChaCha8Rng, n: usize, q: usize, scale: f64) -> Zonotope {
    Zonotope::new(random_vector(rng, n, scale), random_matrix(rng, n, q, scale)).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Concrete output of every layer for input `x`.
pub fn layer_outputs(net: &Network, x: &Array1<f64>) -> Vec<Array1<f64>> {
    let mut h = x.clone();
    net.layers()
        .iter()
        .map(|layer| {
            h = match layer {
                Layer::Linear(l) => l.apply(&h),
                Layer::Activation { kind, .. } => h.mapv(|v| kind.apply(v)),
            };
            h.clone()
        })
        .collect()
}

/// Zonotope and interval kernels against vertex enumeration.
pub fn kernel_oracles(cases: usize, seed: u64) -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = rng(seed);
    for case in 0..cases {
        let n = rng.random_range(1..=4);
        let q = rng.random_range(0..=10);
        let z = random_zonotope(&mut rng, n, q, 3.0);
        let verts = zonotope_vertices(z.center(), z.generators());

        let hull = z.interval_hull();
        let (lo, hi) = bounding_box(&verts);
        for i in 0..n {
            if !close(hull.lower()[i], lo[i], TOL) || !close(hull.upper()[i], hi[i], TOL) {
                return Err(format!("case {case}: hull row {i} {:?} vs [{}, {}]", hull.bounds(i), lo[i], hi[i]));
            }
        }

        let a = random_vector(&mut rng, n, 2.0);
        let brute = verts.iter().map(|v| a.dot(v)).fold(f64::INFINITY, f64::min);
        let got = z.halfspace_lower_bound(&a).unwrap();
        if !close(got, brute, TOL) {
            return Err(format!("case {case}: halfspace bound {got} vs {brute}"));
        }

        let bx = random_box(&mut rng, n, 2.0);
        let sum = z.add_interval(&bx).unwrap().interval_hull();
        let expected = hull.add(&bx).unwrap();
        if !sum.is_subset_of(&expected, TOL) || !expected.is_subset_of(&sum, TOL) {
            return Err(format!("case {case}: interval addition hull differs"));
        }

        let m = rng.random_range(1..=4);
        let w = random_matrix(&mut rng, m, n, 2.0);
        let b = random_vector(&mut rng, m, 1.0);
        let mapped = bx.affine_map(&w, &b).unwrap();
        let images: Vec<Array1<f64>> = box_vertices(&bx.lower().to_vec(), &bx.upper().to_vec())
            .iter()
            .map(|v| w.dot(v) + &b)
            .collect();
        let (lo, hi) = bounding_box(&images);
        let (olo, ohi) = interval_matvec(&w, &bx.lower().to_vec(), &bx.upper().to_vec(), &b.to_vec(), &b.to_vec());
        for i in 0..m {
            let (l, u) = mapped.bounds(i);
            if !close(l, lo[i], TOL) || !close(u, hi[i], TOL) || !close(l, olo[i], TOL) || !close(u, ohi[i], TOL) {
                return Err(format!("case {case}: affine image row {i} [{l}, {u}] vs [{}, {}]", lo[i], hi[i]));
            }
        }

        let zm = z.linear_map(&w, &b).unwrap();
        let mverts: Vec<Array1<f64>> = verts.iter().map(|v| w.dot(v) + &b).collect();
        let (lo, hi) = bounding_box(&mverts);
        let mh = zm.interval_hull();
        for i in 0..m {
            if !close(mh.lower()[i], lo[i], TOL) || !close(mh.upper()[i], hi[i], TOL) {
                return Err(format!("case {case}: linear map hull row {i}"));
            }
        }
    }
    Ok(format!("{cases} cases"))
}

/// Activation enclosures contain sampled activations, and ReLU error bounds
/// are attained.
pub fn enclosure_soundness(layers: usize, samples: usize, dense: usize, seed: u64) -> Outcome {
    const SLACK: f64 = 1e-9;
    let config = EnclosureConfig::default();
    let mut rng = rng(seed);
    let mut relu_neurons = 0;
    for case in 0..layers {
        let kind = KINDS[case % 3];
        let n = rng.random_range(1..=8);
        let q = rng.random_range(1..=8);
        let scale = [0.01, 0.3, 2.0, 8.0][rng.random_range(0..4)];
        let input = random_zonotope(&mut rng, n, q, scale);
        let (out, bounds) = enclose_activation(kind, n, &input, &config).unwrap();
        let directions: Vec<Array1<f64>> = (0..16).map(|_| random_vector(&mut rng, n, 1.0)).collect();
        let support: Vec<f64> = directions.iter().map(|a| out.halfspace_lower_bound(a).unwrap()).collect();
        let upper: Vec<f64> = directions.iter().map(|a| -out.halfspace_lower_bound(&-a).unwrap()).collect();
        let hull = out.interval_hull();
        for s in 0..samples {
            let beta = sample_factors(&mut rng, q);
            let x = input.point_at(&beta).unwrap();
            let y = x.mapv(|v| kind.apply(v));
            if !hull.contains(&y, SLACK) {
                return Err(format!("case {case} ({kind}) sample {s}: output outside hull"));
            }
            for (k, a) in directions.iter().enumerate() {
                let v = a.dot(&y);
                if v < support[k] - SLACK || v > upper[k] + SLACK {
                    return Err(format!("case {case} ({kind}) sample {s}: support function violated"));
                }
            }
        }

        if kind == ActivationKind::Relu {
            for i in 0..n {
                let (l, u) = bounds.bounds(i);
                let approx = approximate_neuron(kind, l, u, &config).unwrap();
                let step = (u - l) / (dense - 1) as f64;
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for j in 0..dense {
                    let x = if j + 1 == dense { u } else { l + step * j as f64 };
                    let d = x.max(0.0) - approx.slope * x - approx.intercept;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                // a sampled grid can miss the kink by at most one step
                let gap = (1.0 + approx.slope.abs()) * step + SLACK;
                if lo < approx.error_lower - SLACK || hi > approx.error_upper + SLACK {
                    return Err(format!("case {case} neuron {i}: residual escapes error interval"));
                }
                if approx.error_lower < lo - gap || approx.error_upper > hi + gap {
                    return Err(format!(
                        "case {case} neuron {i}: error [{}, {}] looser than sampled [{lo}, {hi}]",
                        approx.error_lower, approx.error_upper
                    ));
                }
                relu_neurons += 1;
            }
        }
    }
    Ok(format!("{layers} layers x {samples} samples, {relu_neurons} ReLU error intervals tight"))
}

/// Merging with arbitrary buckets over sound bounds never loses a concrete
/// output of the original layer pair.
pub fn merge_containment(networks: usize, samples: usize, seed: u64) -> Outcome {
    const SLACK: f64 = 1e-9;
    let mut rng = rng(seed);
    let mut merged_total = 0;
    for case in 0..networks {
        let kind = KINDS[rng.random_range(0..3)];
        let n = rng.random_range(1..=4);
        let m = rng.random_range(2..=6);
        let p = rng.random_range(1..=3);
        let w1 = random_matrix(&mut rng, m, n, 2.0);
        let b1 = random_vector(&mut rng, m, 2.0);
        let w2 = random_matrix(&mut rng, p, m, 2.0);
        let b2 = random_vector(&mut rng, p, 1.0);
        let bx = random_box(&mut rng, n, 1.0);

        let (lo, hi) = interval_matvec(&w1, &bx.lower().to_vec(), &bx.upper().to_vec(), &b1.to_vec(), &b1.to_vec());
        let bounds = IntervalVector::new(
            lo.iter().map(|&v| kind.apply(v)).collect(),
            hi.iter().map(|&v| kind.apply(v)).collect(),
        )
        .unwrap();

        // random disjoint buckets, regardless of how tight they are
        let mut order: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let take = rng.random_range(2..=m);
        let split = rng.random_range(1..take);
        let mut buckets = BucketSet::default();
        for part in [&order[..split], &order[split..take]] {
            let mut members = part.to_vec();
            members.sort_unstable();
            buckets.buckets.push(MergeBucket { center: 0.0, tolerance: 0.0, members });
        }
        merged_total += buckets.merged_count();

        let prev = ReducedLinear::from(&LinearLayer::new(w1.clone(), b1.clone()).unwrap());
        let next = ReducedLinear::from(&LinearLayer::new(w2.clone(), b2.clone()).unwrap());
        let outcome = merge(&prev, &next, &bounds, &buckets).unwrap();
        if outcome.kept.len() + buckets.merged_count() != m {
            return Err(format!("case {case}: width accounting {} + {} != {m}", outcome.kept.len(), buckets.merged_count()));
        }
        for s in 0..samples {
            let x = sample_box(&mut rng, &bx.lower().to_vec(), &bx.upper().to_vec());
            let hidden = (w1.dot(&x) + &b1).mapv(|v| kind.apply(v));
            let y = w2.dot(&hidden) + &b2;
            let kept = outcome.prev.apply(&x).mapv(|v| kind.apply(v));
            let reduced = outcome.next.map_interval(&IntervalVector::point(kept)).unwrap();
            if !reduced.contains(&y, SLACK) {
                return Err(format!("case {case} sample {s}: output {y} outside reduced enclosure"));
            }
        }
    }
    Ok(format!("{networks} networks, {merged_total} neurons merged, no violations"))
}

/// A random verification instance for `net` with a small input dimension.
pub fn random_instance(net: &Network, rng: &mut ChaCha8Rng) -> Instance {
    let n = net.input_dim();
    let center = random_vector(rng, n, 1.0);
    let radius = [0.001, 0.01, 0.05, 0.2][rng.random_range(0..4)];
    let input = InputSpec::ball(center.clone(), radius).unwrap();
    let y = net.eval(&center).unwrap();
    let unsafe_set = if net.output_dim() > 1 && rng.random_bool(0.5) {
        UnsafeSpec::Classification { label: argmax(&y) }
    } else {
        // a halfspace cut slightly beyond the nominal output
        let rows = rng.random_range(1..=2);
        let a = random_matrix(rng, rows, net.output_dim(), 1.0);
        let b = a.dot(&y) - rng.random_range(0.0..1.0);
        UnsafeSpec::Halfspaces { a, b }
    };
    Instance { input, unsafe_set }
}

pub struct EndToEnd {
    pub runs: usize,
    pub verified: usize,
    pub networks: Vec<Network>,
}

/// Reduced propagation contains every sampled concrete output, look-ahead
/// bounds contain every sampled concrete activation, and `Verified` is never
/// reported for an instance with an unsafe sample.
pub fn end_to_end(networks: usize, samples: usize, seed: u64) -> Result<EndToEnd, String> {
    const SLACK: f64 = 1e-7;
    let config = EnclosureConfig::default();
    let verifier = VerifierConfig::default();
    let mut rng = rng(seed);
    let mut result = EndToEnd { runs: 0, verified: 0, networks: Vec::new() };
    for case in 0..networks {
        let input_dim = rng.random_range(1..=6);
        let net = random_network(&mut rng, input_dim, 8, 20);
        let instance = random_instance(&net, &mut rng);
        let bx = instance.input.to_box();
        let mut points = box_vertices(&bx.lower().to_vec(), &bx.upper().to_vec());
        points.extend((0..samples).map(|_| sample_box(&mut rng, &bx.lower().to_vec(), &bx.upper().to_vec())));
        let traces: Vec<Vec<Array1<f64>>> = points.iter().map(|x| layer_outputs(&net, x)).collect();
        let unsafe_hit = traces.iter().any(|t| instance.unsafe_set.contains(t.last().unwrap()));
        let zonotope = instance.input.to_zonotope();

        for mode in [BucketMode::Static, BucketMode::Dynamic] {
            for &delta in &verifier.schedule {
                let run = run_once(&net, &zonotope, delta, mode, &config).map_err(|e| format!("case {case}: {e}"))?;
                let hull = run.output.interval_hull();
                for (s, t) in traces.iter().enumerate() {
                    if !hull.contains(t.last().unwrap(), SLACK) {
                        return Err(format!("case {case} {mode} delta {delta}: sample {s} escapes the output hull"));
                    }
                    for entry in &run.trace {
                        if !entry.bounds.contains(&t[entry.layer_index - 1], SLACK) {
                            return Err(format!(
                                "case {case} {mode} delta {delta}: sample {s} escapes look-ahead bounds of layer {}",
                                entry.layer_index
                            ));
                        }
                    }
                }
                let verdict = check(&run.output, &instance.unsafe_set).unwrap();
                result.runs += 1;
                if verdict == Verdict::Verified {
                    result.verified += 1;
                    if unsafe_hit {
                        return Err(format!("case {case} {mode} delta {delta}: verified but a sample is unsafe"));
                    }
                }
            }
        }
        let report = verify(&net, &instance.input, &instance.unsafe_set, &verifier).unwrap();
        for t in &traces {
            if !report.output_hull.contains(t.last().unwrap(), SLACK) {
                return Err(format!("case {case}: sample escapes the verify() output hull"));
            }
        }
        result.runs += 1;
        if report.verdict == Verdict::Verified {
            result.verified += 1;
            if unsafe_hit {
                return Err(format!("case {case}: verify() reported verified with an unsafe sample"));
            }
        }
        result.networks.push(net);
    }
    Ok(result)
}

/// Without buckets the verifier is exactly plain layer-by-layer propagation.
pub fn mode_none_identity(nets: &[Network], seed: u64) -> Outcome {
    let config = EnclosureConfig::default();
    let mut rng = rng(seed);
    for (i, net) in nets.iter().enumerate() {
        let instance = random_instance(net, &mut rng);
        let z = instance.input.to_zonotope();
        let run = run_once(net, &z, 0.0, BucketMode::None, &config).unwrap();
        let plain = plain_propagation(net, &z, &config);
        if run.output.center() != plain.center() || run.output.generators() != plain.generators() {
            return Err(format!("network {i} ({}): outputs differ", net.name()));
        }
    }
    Ok(format!("{} networks bit-identical", nets.len()))
}

pub fn load_manifest(dir: &Path) -> (Network, Vec<Instance>) {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let model = manifest["model"].as_str().unwrap_or("model.json");
    let net = Network::load(dir.join(model)).unwrap();
    let instances = manifest["instances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| Instance::load(dir.join(p.as_str().unwrap())).unwrap())
        .collect();
    (net, instances)
}

pub struct Comparison {
    pub mean_rn: f64,
    pub mismatches: usize,
    pub verified: usize,
    pub reduced_time: Duration,
    pub full_time: Duration,
    pub outcomes: Vec<(nnreduce::verifier::RunOutcome, Verdict, Verdict)>,
}

/// One reduced run against one full run per instance, without any schedule
/// or fallback.
pub fn compare_reduced(net: &Network, instances: &[Instance], delta: f64, mode: BucketMode) -> Comparison {
    let config = EnclosureConfig::default();
    let mut cmp = Comparison {
        mean_rn: 0.0,
        mismatches: 0,
        verified: 0,
        reduced_time: Duration::ZERO,
        full_time: Duration::ZERO,
        outcomes: Vec::new(),
    };
    for instance in instances {
        let z = instance.input.to_zonotope();
        let start = Instant::now();
        let reduced = run_once(net, &z, delta, mode, &config).unwrap();
        let reduced_verdict = check(&reduced.output, &instance.unsafe_set).unwrap();
        cmp.reduced_time += start.elapsed();

        let start = Instant::now();
        let full = run_once(net, &z, 0.0, BucketMode::None, &config).unwrap();
        let full_verdict = check(&full.output, &instance.unsafe_set).unwrap();
        cmp.full_time += start.elapsed();

        cmp.mean_rn += nnreduce::verifier::remaining_percent(&reduced.layers);
        cmp.mismatches += usize::from(reduced_verdict != full_verdict);
        cmp.verified += usize::from(reduced_verdict == Verdict::Verified);
        cmp.outcomes.push((reduced, reduced_verdict, full_verdict));
    }
    cmp.mean_rn /= instances.len() as f64;
    cmp
}

/// The saturated sigmoid fixture shrinks well below half its size at the
/// same verdicts and in a fraction of the time.
pub fn saturated_sigmoid(dir: &Path, limit: usize) -> Outcome {
    let (net, mut instances) = load_manifest(dir);
    instances.truncate(limit);
    let cmp = compare_reduced(&net, &instances, 0.01, BucketMode::Dynamic);
    let ratio = cmp.reduced_time.as_secs_f64() / cmp.full_time.as_secs_f64();
    let summary = format!(
        "mean RN {:.2}%, {} verdict mismatches, {}/{} verified, time ratio {ratio:.3}",
        cmp.mean_rn,
        cmp.mismatches,
        cmp.verified,
        instances.len()
    );
    if cmp.mean_rn <= 50.0 && cmp.mismatches == 0 && ratio <= 0.6 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

/// Static buckets at zero tolerance remove exactly the dead half of every
/// hidden layer.
pub fn dead_relu(dir: &Path, limit: usize) -> Outcome {
    let (net, mut instances) = load_manifest(dir);
    instances.truncate(limit);
    let cmp = compare_reduced(&net, &instances, 0.0, BucketMode::Static);
    for (i, (run, _, _)) in cmp.outcomes.iter().enumerate() {
        for entry in &run.trace {
            let width = net.layers()[entry.layer_index - 1].output_dim();
            let alive: Vec<usize> = (0..width / 2).collect();
            if entry.kept != alive {
                return Err(format!("instance {i} layer {}: kept {:?}", entry.layer_index, entry.kept));
            }
        }
    }
    let summary = format!("mean RN {:.2}%, {} verdict mismatches", cmp.mean_rn, cmp.mismatches);
    if (cmp.mean_rn - 50.0).abs() <= 2.0 && cmp.mismatches == 0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

/// Benchmark reproduction on externally supplied networks (`manifest.json`
/// layout); expects every instance verified at δ = 0.0001.
pub fn external_benchmark(dir: &Path) -> Outcome {
    let (net, instances) = load_manifest(dir);
    let config = VerifierConfig { schedule: vec![1e-4], mode: BucketMode::Dynamic, ..VerifierConfig::default() };
    let (mut verified, mut rn) = (0, 0.0);
    for instance in &instances {
        let report = verify(&net, &instance.input, &instance.unsafe_set, &config).unwrap();
        verified += usize::from(report.verdict == Verdict::Verified && report.delta.is_some());
        rn += report.rn_percent;
    }
    let vr = 100.0 * verified as f64 / instances.len() as f64;
    let rn = rn / instances.len() as f64;
    let summary = format!("VR {vr:.1}%, mean RN {rn:.2}%");
    if vr == 100.0 && (rn - 38.59).abs() <= 10.0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}
