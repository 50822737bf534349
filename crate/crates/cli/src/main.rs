mod config;
mod error;
mod files;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use treespace::{
    anneal_search, distance_matrix, greedy_search, majority_consensus, normalize_lengths,
    parse_newick, simulate_correlated, simulate_mixture, write_newick, MixtureSpec, PcaConfig,
    PcaResult, ScaleMap, TaxonSet,
};

use config::{objective_name, Algorithm, FileConfig, ObjectiveArg};
use error::{CliError, CliResult};
use files::{emit, read_text, read_trees, write_atomic};
use report::{sig12, ConfigEcho, InputSummary, RunReport};

/// Geodesic distances, consensus trees and principal paths in tree space.
#[derive(Parser)]
#[command(name = "treespace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise geodesic distance matrix as CSV.
    Distance {
        /// Newick file, one tree per line.
        trees: PathBuf,
        /// Output CSV (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Majority-rule consensus tree.
    Consensus {
        trees: PathBuf,
        /// Rescale each split to mean length one before taking the consensus.
        #[arg(long)]
        normalize: bool,
        /// Output Newick (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Where to write the rescaled trees when normalizing.
        #[arg(long, requires = "normalize")]
        scaled: Option<PathBuf>,
        /// Where to write the per-split scale factors when normalizing.
        #[arg(long, requires = "normalize")]
        scales: Option<PathBuf>,
    },
    /// Fit a principal path through the trees.
    Pca(PcaArgs),
    /// Sample trees from a two-topology mixture.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct PcaArgs {
    trees: PathBuf,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    /// Rescale each split to mean length one before the search.
    #[arg(long)]
    normalize: bool,
    /// Newick file holding the midpoint (default: majority consensus).
    #[arg(long)]
    midpoint: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with search settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Newick file holding the base tree.
    #[arg(long)]
    base: PathBuf,
    /// Split of the base tree to exchange, e.g. `A,B`.
    #[arg(long)]
    p: String,
    /// Replacement split, e.g. `A,C`.
    #[arg(long)]
    p_prime: String,
    /// Probability that a tree keeps `p`.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Standard deviation of the log-normal branch jitter.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(short, long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Second exchange, on a part of the tree disjoint from the first.
    #[arg(long, requires_all = ["q_prime", "rho"])]
    q: Option<String>,
    #[arg(long)]
    q_prime: Option<String>,
    /// Correlation between the two topology indicators.
    #[arg(long)]
    rho: Option<f64>,
    /// Output Newick file.
    #[arg(short, long)]
    out: PathBuf,
    /// Output CSV of per-tree topology indicators.
    #[arg(long)]
    truth: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    let run = match cli.command {
        Command::Distance { trees, out } => cmd_distance(&trees, out.as_deref()),
        Command::Consensus {
            trees,
            normalize,
            out,
            scaled,
            scales,
        } => cmd_consensus(
            &trees,
            normalize,
            out.as_deref(),
            scaled.as_deref(),
            scales.as_deref(),
        ),
        Command::Pca(args) => cmd_pca(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!(
        "error: {}: {}",
        e.category(),
        e.to_string().replace('\n', " ")
    );
    ExitCode::FAILURE
}

fn init_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("TREESPACE_THREADS") else {
        return Ok(());
    };
    let n: usize = text.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "TREESPACE_THREADS must be a positive integer, got `{text}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn cmd_distance(path: &Path, out: Option<&Path>) -> CliResult<()> {
    let trees = read_trees(path)?;
    if trees.len() < 2 {
        return Err(CliError::Input("need at least 2 trees".into()));
    }
    let d = distance_matrix(&trees)?;
    let n = trees.len();
    let mut csv = String::from("tree");
    for j in 1..=n {
        csv.push_str(&format!(",{j}"));
    }
    csv.push('\n');
    for (i, row) in d.iter().enumerate() {
        csv.push_str(&(i + 1).to_string());
        for v in row {
            csv.push_str(&format!(",{v:.12}"));
        }
        csv.push('\n');
    }
    emit(out, &csv)
}

fn scales_csv(scales: &ScaleMap, taxa: &TaxonSet) -> String {
    let mut csv = String::from("split,factor\n");
    for (p, f) in scales.iter() {
        csv.push_str(&format!("\"{}\",{f}\n", taxa.format_split(p)));
    }
    csv
}

fn cmd_consensus(
    path: &Path,
    normalize: bool,
    out: Option<&Path>,
    scaled_out: Option<&Path>,
    scales_out: Option<&Path>,
) -> CliResult<()> {
    let mut trees = read_trees(path)?;
    if normalize {
        let (scaled, scales) = normalize_lengths(&trees)?;
        if let Some(dest) = scaled_out {
            let text: String = scaled.iter().map(|t| write_newick(t) + "\n").collect();
            write_atomic(dest, &text)?;
        }
        if let Some(dest) = scales_out {
            write_atomic(dest, &scales_csv(&scales, trees[0].taxa()))?;
        }
        trees = scaled;
    }
    let c = majority_consensus(&trees)?;
    emit(out, &(write_newick(&c) + "\n"))
}

fn pca_config(args: &PcaArgs) -> CliResult<(PcaConfig, Algorithm)> {
    let mut config = PcaConfig::default();
    let mut algorithm = Algorithm::Greedy;
    if let Some(path) = &args.config {
        let file = FileConfig::load(path)?;
        file.apply(&mut config);
        algorithm = file.algorithm.unwrap_or(algorithm);
    }
    if let Some(o) = args.objective {
        config.objective = o.objective();
    }
    if let Some(a) = args.algorithm {
        algorithm = a;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.normalize |= args.normalize;
    config.validate()?;
    Ok((config, algorithm))
}

/// Parameter values for the path export: every breakpoint plus 20 evenly
/// spaced values from the first breakpoint minus a margin to the last plus
/// the margin. The margin reaches every projected tree, and at least one
/// root-mean-square data distance.
fn path_parameters(result: &PcaResult, n: usize) -> Vec<f64> {
    let line = &result.analysis_line;
    if line.is_empty() {
        return vec![0.0];
    }
    let breaks: Vec<f64> = line.pairs().iter().map(|pr| pr.s_break).collect();
    let lo = breaks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = breaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reach = result
        .projections
        .iter()
        .map(|pj| (lo - pj.s_star).max(pj.s_star - hi))
        .fold(0.0, f64::max);
    let margin = reach.max((result.d2_0 / n as f64).sqrt() / line.weight_norm());
    let (a, b) = (lo - margin, hi + margin);
    let mut s: Vec<f64> = (0..20)
        .map(|k| a + (b - a) * k as f64 / 19.0)
        .chain(breaks)
        .collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn cmd_pca(args: &PcaArgs) -> CliResult<()> {
    let started = Instant::now();
    let (config, algorithm) = pca_config(args)?;
    let trees = read_trees(&args.trees)?;
    let (x0, midpoint_source) = match &args.midpoint {
        Some(path) => {
            let text = read_text(path)?;
            let first = text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty() && !l.starts_with('#'))
                .ok_or_else(|| CliError::Input(format!("{}: no tree", path.display())))?;
            (
                parse_newick(first, Some(trees[0].taxa()))?,
                path.display().to_string(),
            )
        }
        None => (majority_consensus(&trees)?, "consensus".to_string()),
    };
    let result = match algorithm {
        Algorithm::Greedy => greedy_search(&trees, &x0, &config)?,
        Algorithm::Anneal => anneal_search(&trees, &x0, &config)?,
    };
    if result.proportion.is_none() {
        return Err(treespace::Error::Degenerate(
            "every tree equals the midpoint (d2_0 = 0)".into(),
        )
        .into());
    }

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let a = &config.annealing;
    let echo = ConfigEcho {
        objective: objective_name(config.objective),
        algorithm,
        normalize: config.normalize,
        midpoint: midpoint_source,
        weight_cap: config.weight_cap,
        weight_tol: config.weight_tol,
        golden_tol: config.golden_tol,
        iterations: a.iterations,
        tau0: a.tau0,
        decay: a.decay,
        birth_floor: a.birth_floor,
    };
    let input = InputSummary {
        file: args.trees.display().to_string(),
        n: trees.len(),
        m: x0.n_taxa(),
        taxa: x0.taxa().names().to_vec(),
    };
    let mut report = RunReport::new(input, &x0, &result, echo, config.seed);

    let mut csv = String::from("index,s_star,d_perp,d_par\n");
    for (i, pj) in result.projections.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            sig12(pj.s_star),
            sig12(pj.d_perp),
            sig12(pj.d_par)
        ));
    }
    let mut path = String::new();
    for s in path_parameters(&result, trees.len()) {
        path.push_str(&format!(
            "# s={}\n{}\n",
            sig12(s),
            write_newick(&result.line.evaluate(s))
        ));
    }
    if let Some(scales) = &result.scale_map {
        write_atomic(&args.out.join("scales.csv"), &scales_csv(scales, x0.taxa()))?;
    }
    write_atomic(&args.out.join("projections.csv"), &csv)?;
    write_atomic(&args.out.join("path.nwk"), &path)?;
    write_atomic(&args.out.join("report.txt"), &report.to_table())?;
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    write_atomic(&args.out.join("report.json"), &report.to_json())?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let text = read_text(&args.base)?;
    let base = parse_newick(text.trim(), None)?;
    let taxa = base.taxa().clone();
    let pair = (taxa.parse_split(&args.p)?, taxa.parse_split(&args.p_prime)?);
    let second_pair = match (&args.q, &args.q_prime) {
        (Some(q), Some(qp)) => Some((taxa.parse_split(q)?, taxa.parse_split(qp)?)),
        _ => None,
    };
    let spec = MixtureSpec {
        base,
        pair,
        theta: args.theta,
        jitter_sigma: args.sigma,
        n: args.n,
        seed: args.seed,
        second_pair,
        rho: args.rho,
    };
    let samples = if spec.second_pair.is_some() {
        simulate_correlated(&spec)?
    } else {
        simulate_mixture(&spec)?
    };
    let mut nwk = String::new();
    let mut truth = String::from(if spec.second_pair.is_some() {
        "index,first,second\n"
    } else {
        "index,first\n"
    });
    for (i, s) in samples.iter().enumerate() {
        nwk.push_str(&write_newick(&s.tree));
        nwk.push('\n');
        truth.push_str(&format!("{},{}", i + 1, u8::from(s.first)));
        if let Some(b) = s.second {
            truth.push_str(&format!(",{}", u8::from(b)));
        }
        truth.push('\n');
    }
    write_atomic(&args.out, &nwk)?;
    write_atomic(&args.truth, &truth)
}
