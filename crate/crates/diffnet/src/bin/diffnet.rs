//! Command-line front end: dataset generation, inference, evaluation,
//! experiment grids, and figure-data reshaping.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when an
//! experiment grid finished with failed cells, 1 for anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use diffnet::harness::{self, ExperimentConfig};
use diffnet::inference::{
    InferenceResult, OptimizerConfig, Provenance, RestartSelection, default_budget, run_pipeline,
};
use diffnet::io::{format_rate, read_cascades, read_network, write_cascades, write_network};
use diffnet::metrics::{MetricsReport, compute_metrics};
use diffnet::rng::derive_seed;
use diffnet::synthgen::{
    CascadeGenConfig, DegreeParams, NetworkGenConfig, generate_network, simulate_cascades,
};
use diffnet::{CascadeSet, Edge, Error, filter_cascades};

#[derive(Parser)]
#[command(
    name = "diffnet",
    version,
    about = "Multilayer diffusion network inference from cascades"
)]
struct Cli {
    /// Base seed for dataset generation (network and cascade seeds are
    /// derived from it).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multilayer network plus cascades.
    Generate(GenerateArgs),
    /// Run two-phase inference on a cascade file.
    Infer(InferArgs),
    /// Score an inference result against ground truth.
    Evaluate(EvaluateArgs),
    /// Run a config-driven experiment grid.
    Experiment(ExperimentArgs),
    /// Reshape grid results into tidy per-figure tables.
    FigureData(FigureDataArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 250)]
    nodes: u32,
    #[arg(long, default_value_t = 2)]
    layers: u32,
    /// Edge overlap between layers: 0, 0.5, or 1.
    #[arg(long, default_value_t = 0.0)]
    overlap: f64,
    /// Cascade count; mutually exclusive with --ce-ratio.
    #[arg(long, conflicts_with = "ce_ratio")]
    cascades: Option<u64>,
    /// Cascade count as a multiple of the realized aggregated edge count.
    #[arg(long)]
    ce_ratio: Option<f64>,
    /// Recovery rate of the simulated epidemic.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Upper bound of the per-cascade layer-mixing draw.
    #[arg(long, default_value_t = 0.0)]
    eps_max: f64,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Per-node seeding probability (default 1/nodes).
    #[arg(long)]
    seed_prob: Option<f64>,
    /// Keep only cascades with at least this many activations.
    #[arg(long, default_value_t = 1)]
    s_c: usize,
    #[arg(long, default_value_t = 0.5)]
    mu_in: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_in: f64,
    #[arg(long, default_value_t = 0.0)]
    mu_out: f64,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    sigma_out: f64,
    #[arg(long, default_value_t = 0.01)]
    rate_low: f64,
    #[arg(long, default_value_t = 1.0)]
    rate_high: f64,
}

#[derive(Args)]
struct InferArgs {
    /// Cascade file (JSON lines).
    #[arg(long)]
    cascades: PathBuf,
    /// Number of layers to infer.
    #[arg(short = 'K', long, default_value_t = 2)]
    layers: usize,
    /// Selection budget; required unless --truth supplies the edge count.
    #[arg(long)]
    budget: Option<usize>,
    /// Ground-truth network file; sets the default budget to
    /// round(1.1 * |E_A|).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    p1_learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    p1_max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    p1_rel_tol: f64,
    #[arg(long, default_value_t = 0.1)]
    p2_learning_rate: f64,
    #[arg(long, default_value_t = 3000)]
    p2_max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    p2_rel_tol: f64,
    /// Restart seeds for the multilayer phase.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    restarts: Vec<u64>,
    /// Cascade size threshold: cascades of size <= s_c are excluded from
    /// the multilayer phase (phase 1 always uses everything).
    #[arg(long, default_value_t = 1)]
    s_c: usize,
    /// Pick the restart with the best membership accuracy against the
    /// cascades' ground truth instead of the lowest objective.
    #[arg(long)]
    truth_aware: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// result.json from `infer`.
    #[arg(long)]
    result: PathBuf,
    /// Ground-truth network file.
    #[arg(long)]
    network: PathBuf,
    /// Cascade file with ground-truth memberships.
    #[arg(long)]
    cascades: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Grid configuration (JSON; see docs/experiment-config.schema.json).
    #[arg(long)]
    config: PathBuf,
    /// Reuse finished cells found in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct FigureDataArgs {
    /// results.csv produced by `experiment`.
    #[arg(long)]
    results: PathBuf,
    /// One of: cascade-size, filtering, density, size, layers, overlap,
    /// mixing.
    #[arg(long)]
    family: String,
    /// Output file (default: figure_<family>.csv in --out-dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Inference artifact: the result plus how it was produced.
#[derive(Serialize, Deserialize)]
struct ResultFile {
    result: InferenceResult,
    provenance: Provenance,
}

/// One evaluation row: provenance echo plus every metric.
#[derive(Serialize)]
struct EvaluationRow<'a> {
    n_layers: usize,
    n_candidates: usize,
    n_selected: usize,
    budget: usize,
    selection: &'a str,
    chosen_seed: u64,
    final_nll: f64,
    auc: f64,
    pi_accuracy: f64,
    alpha_spearman: f64,
    pr_auc_mean: f64,
    pr_auc_per_layer: String,
    recovery_hits: usize,
    recovery_total: usize,
    recovery_rate: f64,
    matched_perm: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } | Error::Invariant(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: &Cli) -> diffnet::Result<ExitCode> {
    fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Error::io(cli.out_dir.display().to_string(), e))?;
    match &cli.command {
        Command::Generate(args) => generate(cli, args),
        Command::Infer(args) => infer(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::Experiment(args) => experiment(cli, args),
        Command::FigureData(args) => figure_data(cli, args),
    }
}

/// Inputs named on the command line map to the config exit code when
/// unreadable; io failures on the output side keep the generic code.
fn input<T>(r: diffnet::Result<T>) -> diffnet::Result<T> {
    r.map_err(|e| match e {
        Error::Io { path, source } => Error::Config(format!("cannot read {path}: {source}")),
        other => other,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> diffnet::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invariant(format!("serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[derive(Serialize)]
struct DatasetManifest {
    network: NetworkGenConfig,
    cascades: CascadeGenConfig,
    s_c: usize,
    n_edges_union: usize,
    n_edges_per_layer: Vec<usize>,
    realized_overlap: Option<f64>,
    c_requested: u64,
    c_nontrivial: usize,
    c_kept: usize,
    network_file: String,
    cascade_file: String,
}

fn generate(cli: &Cli, args: &GenerateArgs) -> diffnet::Result<ExitCode> {
    let net_cfg = NetworkGenConfig {
        n_nodes: args.nodes,
        n_layers: args.layers,
        overlap: args.overlap,
        degrees: DegreeParams {
            mu_in: args.mu_in,
            sigma_in: args.sigma_in,
            mu_out: args.mu_out,
            sigma_out: args.sigma_out,
        },
        rate_low: args.rate_low,
        rate_high: args.rate_high,
        seed: derive_seed(cli.seed, 1),
    };
    let net = generate_network(&net_cfg)?;
    let n_union = net.union_edges().len();
    let c_requested = match (args.cascades, args.ce_ratio) {
        (Some(c), None) => c,
        (None, Some(r)) if r > 0.0 && r.is_finite() => {
            (r * n_union as f64).round().max(1.0) as u64
        }
        (None, Some(r)) => {
            return Err(Error::Config(format!("cascade-edge ratio {r} outside (0, inf)")));
        }
        (None, None) => {
            return Err(Error::Config("one of --cascades or --ce-ratio is required".into()));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let casc_cfg = CascadeGenConfig {
        n_cascades: c_requested,
        horizon: args.horizon,
        recovery_rate: args.gamma,
        eps_max: args.eps_max,
        seed_prob: args.seed_prob,
        seed: derive_seed(cli.seed, 2),
    };
    casc_cfg.validate()?;
    let simulated = simulate_cascades(&net, &casc_cfg)?;
    let kept = filter_cascades(&simulated, args.s_c);

    let network_path = cli.out_dir.join("network.tsv");
    let cascade_path = cli.out_dir.join("cascades.jsonl");
    write_network(&net, &network_path)?;
    write_cascades(&kept, &cascade_path)?;
    let manifest = DatasetManifest {
        network: net_cfg,
        cascades: casc_cfg,
        s_c: args.s_c,
        n_edges_union: n_union,
        n_edges_per_layer: (0..net.n_layers() as usize)
            .map(|k| net.layer_edges(k).len())
            .collect(),
        realized_overlap: net.pairwise_overlap(),
        c_requested,
        c_nontrivial: simulated.len(),
        c_kept: kept.len(),
        network_file: "network.tsv".into(),
        cascade_file: "cascades.jsonl".into(),
    };
    write_json(&cli.out_dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} edges across {} layers and {} cascades to {}",
        n_union,
        net.n_layers(),
        kept.len(),
        cli.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn infer(cli: &Cli, args: &InferArgs) -> diffnet::Result<ExitCode> {
    let cascades = input(read_cascades(&args.cascades))?;
    let budget = match (args.budget, &args.truth) {
        (Some(b), _) => b,
        (None, Some(path)) => default_budget(input(read_network(path))?.union_edges().len()),
        (None, None) => {
            return Err(Error::Config(
                "a selection budget is required: pass --budget, or --truth to use \
                 round(1.1 * |E_A|)"
                    .into(),
            ));
        }
    };
    let phase1 = OptimizerConfig {
        learning_rate: args.p1_learning_rate,
        max_iters: args.p1_max_iters,
        rel_tol: args.p1_rel_tol,
        restarts: args.restarts.clone(),
        ..OptimizerConfig::phase1_default()
    };
    let phase2 = OptimizerConfig {
        learning_rate: args.p2_learning_rate,
        max_iters: args.p2_max_iters,
        rel_tol: args.p2_rel_tol,
        restarts: args.restarts.clone(),
        ..OptimizerConfig::phase2_default()
    };
    let selection = if args.truth_aware {
        RestartSelection::TruthPiAccuracy
    } else {
        RestartSelection::LowestObjective
    };
    let (result, provenance) = run_pipeline(
        &cascades,
        args.layers,
        &phase1,
        &phase2,
        budget,
        args.s_c,
        selection,
    )?;

    let scores_path = cli.out_dir.join("edge_scores.tsv");
    write_edge_scores(&scores_path, &result)?;
    let result_path = cli.out_dir.join("result.json");
    write_json(&result_path, &ResultFile { result, provenance })?;
    println!(
        "wrote {} and {}",
        result_path.display(),
        scores_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Phase-1 score table: one row per candidate edge, with per-layer rate
/// estimates filled in for selected edges.
fn write_edge_scores(path: &Path, result: &InferenceResult) -> diffnet::Result<()> {
    use std::io::Write;
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let k = result.n_layers;
    let n_selected = result.alpha_edges.len();
    let mut header = String::from("src\tdst\tscore\tselected");
    for layer in 0..k {
        header.push_str(&format!("\talpha_{layer}"));
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for (edge, score) in result
        .phase1
        .candidate_edges
        .iter()
        .zip(&result.phase1.edge_scores)
    {
        let selected = result.alpha_edges.binary_search(edge).ok();
        let mut line = format!(
            "{}\t{}\t{}\t{}",
            edge.0,
            edge.1,
            format_rate(*score),
            u8::from(selected.is_some())
        );
        for layer in 0..k {
            match selected {
                Some(e) => {
                    line.push('\t');
                    line.push_str(&format_rate(result.alpha_hat[layer * n_selected + e]));
                }
                None => line.push('\t'),
            }
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn selection_name(selection: RestartSelection) -> &'static str {
    match selection {
        RestartSelection::LowestObjective => "lowest-objective",
        RestartSelection::TruthPiAccuracy => "truth-pi-accuracy",
    }
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> diffnet::Result<ExitCode> {
    let text = fs::read_to_string(&args.result)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.result.display())))?;
    let file: ResultFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: args.result.display().to_string(),
        line: 1,
        msg: e.to_string(),
    })?;
    let net = input(read_network(&args.network))?;
    let cascades = input(read_cascades(&args.cascades))?;
    // The mixture rows describe only the cascades the multilayer phase
    // saw (size filtering may have dropped some); line the set up with
    // the recorded ids.
    let mut by_id: std::collections::HashMap<u64, diffnet::Cascade> =
        cascades.cascades.into_iter().map(|c| (c.id, c)).collect();
    let mut aligned = Vec::with_capacity(file.result.cascade_ids.len());
    for id in &file.result.cascade_ids {
        aligned.push(by_id.remove(id).ok_or_else(|| {
            Error::Config(format!(
                "result refers to cascade id {id} absent from {}",
                args.cascades.display()
            ))
        })?);
    }
    let aligned = CascadeSet::new(aligned);
    let scored: Vec<(Edge, f64)> = file
        .result
        .phase1
        .candidate_edges
        .iter()
        .copied()
        .zip(file.result.phase1.edge_scores.iter().copied())
        .collect();
    let report: MetricsReport = compute_metrics(
        &net,
        &aligned,
        &scored,
        &file.result.alpha_edges,
        &file.result.alpha_hat,
        &file.result.pi_hat,
    )?;
    let join = |items: Vec<String>| items.join(";");
    let row = EvaluationRow {
        n_layers: file.result.n_layers,
        n_candidates: file.provenance.n_candidates,
        n_selected: file.provenance.n_selected,
        budget: file.provenance.budget,
        selection: selection_name(file.provenance.selection),
        chosen_seed: file.result.chosen_seed,
        final_nll: file.result.final_nll,
        auc: report.auc,
        pi_accuracy: report.pi_accuracy,
        alpha_spearman: report.alpha_spearman,
        pr_auc_mean: report.pr_auc_mean,
        pr_auc_per_layer: join(
            report
                .pr_auc_per_layer
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect(),
        ),
        recovery_hits: report.edge_recovery.hits,
        recovery_total: report.edge_recovery.total,
        recovery_rate: report.edge_recovery.rate,
        matched_perm: join(
            report
                .matched_permutation
                .iter()
                .map(|p| p.to_string())
                .collect(),
        ),
    };
    let out = cli.out_dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&out)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", out.display())))?;
    w.serialize(&row)
        .map_err(|e| Error::Invariant(format!("csv serialization: {e}")))?;
    w.flush().map_err(|e| Error::io(out.display().to_string(), e))?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> diffnet::Result<ExitCode> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!(
        "{}: {e}",
        args.config.display()
    )))?;
    let outcome = harness::run_grid(&cfg, &cli.out_dir, args.resume)?;
    println!(
        "{} cells ({} reused, {} failed) -> {}",
        outcome.n_cells,
        outcome.n_reused,
        outcome.n_failed,
        outcome.results_path.display()
    );
    if outcome.n_failed > 0 {
        Ok(ExitCode::from(3))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn figure_data(cli: &Cli, args: &FigureDataArgs) -> diffnet::Result<ExitCode> {
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.out_dir.join(format!("figure_{}.csv", args.family)));
    harness::emit_figure_data(&args.results, &args.family, &out)?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}
