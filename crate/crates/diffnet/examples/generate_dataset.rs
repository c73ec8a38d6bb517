//! Generate a ground-truth multilayer network plus a cascade set and
//! write both to disk in the formats the CLI consumes.
//!
//! Run with: cargo run --release --example generate_dataset

use diffnet::io::{write_cascades, write_network};
use diffnet::{CascadeGenConfig, NetworkGenConfig, generate_dataset};

fn main() -> diffnet::Result<()> {
    let net_cfg = NetworkGenConfig {
        n_nodes: 250,
        n_layers: 2,
        overlap: 0.5,
        seed: 42,
        ..NetworkGenConfig::default()
    };
    let casc_cfg = CascadeGenConfig {
        n_cascades: 4000,
        recovery_rate: 2.0,
        eps_max: 0.1,
        seed: 43,
        ..CascadeGenConfig::default()
    };
    // Cascades with a single activation carry no edge information and are
    // always dropped; s_c raises that bar.
    let s_c = 2;
    let (net, cascades) = generate_dataset(&net_cfg, &casc_cfg, s_c)?;

    println!("nodes: {}", net.n_nodes());
    for k in 0..net.n_layers() as usize {
        println!("layer {k}: {} edges", net.layer_edges(k).len());
    }
    println!("aggregated: {} edges", net.union_edges().len());
    if let Some(overlap) = net.pairwise_overlap() {
        println!("realized overlap: {overlap:.3} (requested {})", net_cfg.overlap);
    }
    println!(
        "cascades kept: {} of {} simulated (size >= {s_c})",
        cascades.len(),
        casc_cfg.n_cascades
    );
    let mut sizes: Vec<usize> = cascades.iter().map(|c| c.size()).collect();
    sizes.sort_unstable();
    println!(
        "cascade sizes: median {}, p90 {}, max {}",
        sizes[sizes.len() / 2],
        sizes[sizes.len() * 9 / 10],
        sizes.last().unwrap()
    );

    let dir = std::path::Path::new("target/example-out");
    std::fs::create_dir_all(dir).expect("create output dir");
    write_network(&net, &dir.join("network.tsv"))?;
    write_cascades(&cascades, &dir.join("cascades.jsonl"))?;
    println!("wrote {}/network.tsv and {}/cascades.jsonl", dir.display(), dir.display());
    Ok(())
}
