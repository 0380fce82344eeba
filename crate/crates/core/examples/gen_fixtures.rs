//! Regenerates the committed test fixtures under `tests/fixtures`.
//!
//! Usage: `cargo run -p nnreduce --example gen_fixtures [OUT_DIR]`

#[path = "../tests/common/synth.rs"]
mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use nnreduce::{ActivationKind, Instance, Network};

fn write_corpus(dir: &Path, net: &Network, instances: &[Instance]) -> std::io::Result<()> {
    fs::create_dir_all(dir.join("instances"))?;
    net.save(dir.join("model.json")).expect("write model");
    let mut names = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let name = format!("instances/{i:03}.json");
        inst.save(dir.join(&name)).expect("write instance");
        names.push(name);
    }
    let manifest = serde_json::json!({ "model": "model.json", "instances": names });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
}

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));

    let sigmoid = synth::saturated_network(1, 16, &[200; 6], 10, ActivationKind::Sigmoid, 10.0);
    let instances = synth::classification_instances(&sigmoid, 2, 100, 0.001);
    write_corpus(&out.join("sigmoid_6x200"), &sigmoid, &instances)?;

    let relu = synth::dead_relu_network(3, 16, &[64; 4], 10);
    let instances = synth::classification_instances(&relu, 4, 50, 0.001);
    write_corpus(&out.join("dead_relu_4x64"), &relu, &instances)?;

    println!("fixtures written to {}", out.display());
    Ok(())
}
