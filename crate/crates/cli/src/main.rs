use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nnreduce::batch::{run_batch, write_layers_csv, write_summary_csv, BatchSummary};
use nnreduce::sampling::{sample_check, SampleCheck};
use nnreduce::verifier::DEFAULT_SCHEDULE;
use nnreduce::{
    verify, BucketMode, EnclosureConfig, Instance, Network, Verdict, VerificationReport,
    VerifierConfig,
};

#[derive(Parser, Debug)]
#[command(name = "nnreduce", version, about = "Zonotope verification with on-the-fly neuron merging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify a single instance.
    Verify(VerifyArgs),
    /// Verify every instance of a directory or manifest and write CSV reports.
    Batch(BatchArgs),
}

#[derive(Args, Debug, Clone)]
struct VerifierFlags {
    /// Comma-separated, strictly decreasing bucket tolerances.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SCHEDULE.to_vec())]
    delta_schedule: Vec<f64>,

    /// Merge-bucket construction: static, dynamic or none.
    #[arg(long, default_value = "dynamic")]
    buckets: BucketMode,

    /// Regression samples per neuron.
    #[arg(long, default_value_t = EnclosureConfig::default().regression_samples)]
    regression_samples: usize,

    /// Error-bound samples per smooth neuron.
    #[arg(long, default_value_t = EnclosureConfig::default().error_samples)]
    error_samples: usize,
}

impl VerifierFlags {
    fn config(&self) -> Result<VerifierConfig> {
        let config = VerifierConfig {
            schedule: self.delta_schedule.clone(),
            mode: self.buckets,
            enclosure: EnclosureConfig {
                regression_samples: self.regression_samples,
                error_samples: self.error_samples,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,

    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,

    #[command(flatten)]
    flags: VerifierFlags,

    /// Write the machine-readable report here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Number of random inputs to evaluate as a soundness self-check.
    #[arg(long)]
    samples_check: Option<usize>,

    /// Seed for the sampling self-check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,

    /// Directory of instance files, or a JSON manifest listing them.
    #[arg(long)]
    instances: PathBuf,

    #[command(flatten)]
    flags: VerifierFlags,

    /// Directory for summary.csv and layers.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (1 = sequential).
    #[arg(long, env = "NNREDUCE_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    model: &'a Path,
    instance: &'a Path,
    #[serde(flatten)]
    report: &'a VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_check: Option<SampleCheck>,
}

#[derive(Deserialize)]
struct Manifest {
    instances: Vec<PathBuf>,
}

fn load_model(path: &Path) -> Result<Network> {
    Network::load(path).with_context(|| format!("failed to load model {}", path.display()))
}

fn print_report(report: &VerificationReport) {
    println!("verdict: {}", report.verdict);
    match report.delta {
        Some(d) => println!("delta: {d} ({} buckets)", report.mode),
        None => println!("delta: none (unreduced network)"),
    }
    println!("attempts: {}", report.attempts);
    println!("remaining neurons: {:.2}%", report.rn_percent);
    for layer in report.layers.iter().filter(|l| l.hidden) {
        println!(
            "  layer {:>3} ({}): {} / {} neurons, {} buckets",
            layer.layer_index,
            layer.kind,
            layer.remaining_neurons,
            layer.original_neurons,
            layer.buckets_used
        );
    }
    println!(
        "time: {:.3} ms (look-ahead {:.3}, enclosure {:.3}, check {:.3})",
        report.total_time.as_secs_f64() * 1e3,
        report.timings.lookahead.as_secs_f64() * 1e3,
        report.timings.enclosure.as_secs_f64() * 1e3,
        report.timings.check.as_secs_f64() * 1e3
    );
}

fn cmd_verify(args: &VerifyArgs) -> Result<Verdict> {
    let config = args.flags.config()?;
    let net = load_model(&args.model)?;
    let instance = Instance::load(&args.instance)
        .with_context(|| format!("failed to load instance {}", args.instance.display()))?;
    let report = verify(&net, &instance.input, &instance.unsafe_set, &config)?;
    print_report(&report);

    let samples = match args.samples_check {
        Some(n) => {
            let check = sample_check(
                &net,
                &instance.input,
                &instance.unsafe_set,
                &report.output_hull,
                n,
                args.seed,
            )?;
            println!(
                "sample check: {} samples, {} unsafe, {} outside the output hull",
                check.samples, check.unsafe_hits, check.hull_escapes
            );
            if report.verdict == Verdict::Verified && check.unsafe_hits > 0 {
                bail!("sample check found a counterexample to a verified property");
            }
            Some(check)
        }
        None => None,
    };

    if let Some(out) = &args.out {
        let output = VerifyOutput {
            model: &args.model,
            instance: &args.instance,
            report: &report,
            samples_check: samples,
        };
        fs::write(out, serde_json::to_string_pretty(&output)?)
            .with_context(|| format!("failed to write {}", out.display()))?;
    }
    Ok(report.verdict)
}

/// Instance files in order: a manifest's list, `manifest.json` inside a
/// directory, or every other `*.json` file of the directory sorted by name.
fn collect_instances(path: &Path, model: &Path) -> Result<Vec<PathBuf>> {
    let manifest = if path.is_dir() {
        let m = path.join("manifest.json");
        m.is_file().then_some(m)
    } else {
        Some(path.to_path_buf())
    };
    if let Some(manifest) = manifest {
        let text = fs::read_to_string(&manifest)
            .with_context(|| format!("failed to read manifest {}", manifest.display()))?;
        let parsed: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("failed to parse manifest {}", manifest.display()))?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        return Ok(parsed.instances.into_iter().map(|p| base.join(p)).collect());
    }
    let model = model.canonicalize().ok();
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("failed to list {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| p.canonicalize().ok() != model)
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_batch(args: &BatchArgs) -> Result<()> {
    let config = args.flags.config()?;
    let net = load_model(&args.model)?;
    let paths = collect_instances(&args.instances, &args.model)?;
    if paths.is_empty() {
        bail!("no instances found in {}", args.instances.display());
    }
    let instances: Vec<_> = paths
        .iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            (id, Instance::load(p).map_err(|e| e.to_string()))
        })
        .collect();
    let results = run_batch(&net, &instances, &config, args.jobs.max(1))?;

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("failed to create {}", args.out_dir.display()))?;
    let summary_path = args.out_dir.join("summary.csv");
    let layers_path = args.out_dir.join("layers.csv");
    write_summary_csv(
        fs::File::create(&summary_path)
            .with_context(|| format!("failed to create {}", summary_path.display()))?,
        &results,
    )?;
    write_layers_csv(
        fs::File::create(&layers_path)
            .with_context(|| format!("failed to create {}", layers_path.display()))?,
        &results,
    )?;

    for r in &results {
        if let Err(e) = &r.outcome {
            eprintln!("warning: instance {}: {e}", r.id);
        }
    }
    let s = BatchSummary::from_results(&results);
    println!("instances: {} ({} errors)", s.instances, s.errors);
    println!("verified: {} (VR {:.2}%)", s.verified, s.vr_percent);
    println!("mean remaining neurons: {:.2}%", s.mean_rn_percent);
    for (layer, mean) in &s.mean_remaining {
        println!("  layer {layer:>3}: {mean:.2}");
    }
    println!("time: {:.1} ms total, {:.3} ms mean", s.total_ms, s.mean_ms);
    println!("wrote {} and {}", summary_path.display(), layers_path.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(args) => cmd_verify(args).map(|v| match v {
            Verdict::Verified => ExitCode::SUCCESS,
            Verdict::Unknown => ExitCode::from(2),
        }),
        Command::Batch(args) => cmd_batch(args).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|err| {
        eprintln!("error: {err:#}");
        ExitCode::FAILURE
    })
}
