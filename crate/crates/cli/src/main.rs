//! `bop`: compute bag-of-paths probabilities, node distances, kernels,
//! embeddings, oracle self-checks and semi-supervised evaluation from an
//! edge-list file.
//!
//! Exit codes: 0 success, 1 validation error (bad input, bad arguments),
//! 2 numerical failure (singular system, no convergence, failed check).

use bagofpaths::distance::{
    distance_via_recurrence, potential_distance, potential_to_target, surprisal_distance,
    DistanceMatrix, Measure, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE,
};
use bagofpaths::error::Error;
use bagofpaths::graph::Graph;
use bagofpaths::kernel::{distance_to_kernel, top_eigenvectors};
use bagofpaths::model::BopModel;
use bagofpaths::oracle::enumerate_path_mass;
use bagofpaths::ssl::{self, LabeledGraphDataset};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "bop", version, about = "Bag-of-paths graph analysis", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Surprisal,
    Potential,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Measure {
        match m {
            MeasureArg::Surprisal => Measure::Surprisal,
            MeasureArg::Potential => Measure::Potential,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ZeroPathsArg {
    Include,
    Exclude,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathFamilyArg {
    Regular,
    Hitting,
}

#[derive(Subcommand)]
enum Command {
    /// Write one of the four path-probability matrices as TSV
    Probs {
        /// Edge-list input file: lines `i j a [c]`
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        theta: f64,
        /// Keep or drop zero-length paths
        #[arg(long, value_enum, default_value = "include")]
        zero_paths: ZeroPathsArg,
        /// Regular (non-hitting) or hitting paths
        #[arg(long, value_enum, default_value = "regular")]
        paths: PathFamilyArg,
        /// Output file; stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
        /// Re-verify normalization of the produced matrix
        #[arg(long)]
        self_test: bool,
    },
    /// Write a distance matrix (surprisal or potential) as TSV
    Dist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum, default_value = "potential")]
        measure: MeasureArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the centered kernel of a distance matrix as TSV
    Kernel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum, default_value = "potential")]
        measure: MeasureArg,
        /// Zero out negative eigenvalues in the kernel
        #[arg(long)]
        clip_negative: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a spectral embedding (top eigenvectors of the kernel) as TSV
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum, default_value = "potential")]
        measure: MeasureArg,
        #[arg(long, default_value_t = ssl::DEFAULT_DIMS)]
        dims: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the oracle comparison table and print PASS/FAIL per check
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        theta: f64,
    },
    /// Semi-supervised evaluation with nested cross-validation
    Ssl {
        #[arg(long)]
        input: PathBuf,
        /// Label file: lines `node_id class_id`
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value = "potential")]
        measure: MeasureArg,
        #[arg(long, default_value_t = 0.1)]
        labeling_rate: f64,
        #[arg(long, default_value_t = ssl::DEFAULT_DIMS)]
        dims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("bop: {err}");
            exit_code(&err)
        }
    });
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SingularSystem { .. } | Error::NoConvergence { .. } | Error::DegeneratePartition => {
            2
        }
        _ => 1,
    }
}

fn load_graph(path: &Path) -> Result<Graph, Error> {
    let file = File::open(path)?;
    Graph::load_edge_list(BufReader::new(file))
}

fn with_output<F>(output: Option<&Path>, write: F) -> Result<(), Error>
where
    F: FnOnce(&mut dyn Write) -> Result<(), Error>,
{
    match output {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            write(&mut out)?;
            out.flush()?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

/// The dense pipeline silently drops arcs once exp(-theta c) underflows;
/// switch to the log-domain recurrence well before that.
fn use_recurrence(g: &Graph, theta: f64) -> bool {
    let min_cost = g
        .costs()
        .iter()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, |a, &c| a.min(c));
    theta * min_cost > 500.0
}

fn compute_distance(g: &Graph, theta: f64, measure: Measure) -> Result<DistanceMatrix, Error> {
    let model = BopModel::build(g.clone(), theta)?;
    if model.underflowed_arcs() > 0 {
        eprintln!(
            "bop: {} arc weight(s) underflowed at theta={theta}; using the log-domain recurrence",
            model.underflowed_arcs()
        );
    }
    if use_recurrence(g, theta) || model.underflowed_arcs() > 0 {
        distance_via_recurrence(&model, measure, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)
    } else {
        Ok(match measure {
            Measure::Surprisal => surprisal_distance(&model),
            Measure::Potential => potential_distance(&model),
        })
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Probs {
            input,
            theta,
            zero_paths,
            paths,
            output,
            self_test,
        } => {
            let g = load_graph(&input)?;
            let model = BopModel::build(g, theta)?;
            let include = matches!(zero_paths, ZeroPathsArg::Include);
            let p = match paths {
                PathFamilyArg::Regular => model.regular_probabilities(include)?,
                PathFamilyArg::Hitting => model.hitting_probabilities(include)?,
            };
            if self_test {
                let total = p.total();
                if (total - 1.0).abs() > 1e-10 {
                    eprintln!("bop: self-test failed, entries sum to {total:.17} instead of 1");
                    std::process::exit(2);
                }
                eprintln!("bop: self-test passed, entries sum to 1 within 1e-10");
            }
            with_output(output.as_deref(), |mut out| p.write_tsv(&mut out))
        }
        Command::Dist {
            input,
            theta,
            measure,
            output,
        } => {
            let g = load_graph(&input)?;
            let d = compute_distance(&g, theta, measure.into())?;
            with_output(output.as_deref(), |mut out| d.write_tsv(&mut out))
        }
        Command::Kernel {
            input,
            theta,
            measure,
            clip_negative,
            output,
        } => {
            let g = load_graph(&input)?;
            let d = compute_distance(&g, theta, measure.into())?;
            let k = distance_to_kernel(&d, clip_negative)?;
            with_output(output.as_deref(), |mut out| k.write_tsv(&mut out))
        }
        Command::Embed {
            input,
            theta,
            measure,
            dims,
            output,
        } => {
            let g = load_graph(&input)?;
            let d = compute_distance(&g, theta, measure.into())?;
            let k = distance_to_kernel(&d, false)?;
            let e = top_eigenvectors(&k, dims)?;
            with_output(output.as_deref(), |mut out| e.write_tsv(&mut out))
        }
        Command::Check { input, theta } => {
            let g = load_graph(&input)?;
            let failed = run_checks(&g, theta)?;
            if failed > 0 {
                eprintln!("bop: {failed} check(s) failed");
                std::process::exit(2);
            }
            Ok(())
        }
        Command::Ssl {
            input,
            labels,
            measure,
            labeling_rate,
            dims,
            seed,
            output,
        } => {
            let g = load_graph(&input)?;
            let labels_file = File::open(&labels)?;
            let ds = LabeledGraphDataset::load_labels(g, BufReader::new(labels_file))?;
            let report = ssl::evaluate(
                &ds,
                measure.into(),
                labeling_rate,
                &ssl::default_theta_grid(),
                &ssl::default_reg_grid(),
                dims,
                seed,
            )?;
            match output {
                Some(path) => {
                    let mut out = BufWriter::new(File::create(&path)?);
                    report.write_record(&mut out)?;
                    out.flush()?;
                    let detail_path = fold_details_path(&path);
                    let mut detail = BufWriter::new(File::create(detail_path)?);
                    report.write_fold_details(&mut detail)?;
                    detail.flush()?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    report.write_record(&mut lock)?;
                    report.write_fold_details(&mut lock)?;
                }
            }
            Ok(())
        }
    }
}

/// `out.tsv` -> `out.folds.tsv`; extensionless paths get `.folds` appended.
fn fold_details_path(record: &Path) -> PathBuf {
    match record.extension() {
        Some(ext) => {
            let mut stem = record.with_extension("");
            let mut name = stem
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            name.push_str(".folds.");
            name.push_str(&ext.to_string_lossy());
            stem.set_file_name(name);
            stem
        }
        None => record.with_extension("folds"),
    }
}

struct CheckTable {
    failed: usize,
}

impl CheckTable {
    fn row(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "CHECK {name}: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        );
    }

    fn skip(&self, name: &str, reason: &str) {
        println!("CHECK {name}: SKIP ({reason})");
    }
}

fn run_checks(g: &Graph, theta: f64) -> Result<usize, Error> {
    let n = g.n();
    let model = BopModel::build(g.clone(), theta)?;
    let mut table = CheckTable { failed: 0 };

    let p = g.reference_transitions();
    let worst = (0..n)
        .map(|i| ((0..n).map(|j| p.prob(i, j)).sum::<f64>() - 1.0).abs())
        .fold(0.0f64, f64::max);
    table.row(
        "transition-row-sums",
        worst <= 1e-12,
        format!("max |sum - 1| = {worst:.3e}"),
    );

    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut entry = model.z()[(i, j)];
            for k in 0..n {
                entry -= model.w()[(i, k)] * model.z()[(k, j)];
            }
            if i == j {
                entry -= 1.0;
            }
            residual = residual.max(entry.abs());
        }
    }
    table.row(
        "fundamental-residual",
        residual <= 1e-6,
        format!("max residual = {residual:.3e}"),
    );

    if n <= 5 {
        let sigma = (0..n)
            .map(|i| (0..n).map(|j| model.w()[(i, j)]).sum::<f64>())
            .fold(0.0f64, f64::max);
        let bound = n as f64 * sigma.powi(16) / (1.0 - sigma);
        let mut worst_reg = 0.0f64;
        let mut worst_hit = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let e = enumerate_path_mass(g, theta, i, j, 15, false)?;
                worst_reg = worst_reg.max((model.z()[(i, j)] - e.mass).abs());
                let h = enumerate_path_mass(g, theta, i, j, 15, true)?;
                worst_hit = worst_hit.max((model.z_h()[(i, j)] - h.mass).abs());
            }
        }
        table.row(
            "z-vs-enumeration",
            worst_reg <= bound,
            format!("max gap = {worst_reg:.3e}, tail bound = {bound:.3e}"),
        );
        table.row(
            "hitting-vs-enumeration",
            worst_hit <= bound,
            format!("max gap = {worst_hit:.3e}, tail bound = {bound:.3e}"),
        );
    } else {
        table.skip("z-vs-enumeration", "graph has more than 5 nodes");
        table.skip("hitting-vs-enumeration", "graph has more than 5 nodes");
    }

    let mut worst = 0.0f64;
    for j in 0..n {
        let col = model.hitting_column_direct(j)?;
        for i in 0..n {
            worst = worst.max((col[i] - model.z_h()[(i, j)]).abs());
        }
    }
    table.row(
        "hitting-identity",
        worst <= 1e-9,
        format!("max |direct - z_h| = {worst:.3e}"),
    );

    let worst = (0..n)
        .map(|i| (model.z_h()[(i, i)] - 1.0).abs())
        .fold(0.0f64, f64::max);
    table.row(
        "z-h-diagonal",
        worst <= 1e-12,
        format!("max |z_h_ii - 1| = {worst:.3e}"),
    );

    let mut worst = 0.0f64;
    for include in [true, false] {
        for hitting in [false, true] {
            let result = if hitting {
                model.hitting_probabilities(include)
            } else {
                model.regular_probabilities(include)
            };
            match result {
                Ok(pm) => worst = worst.max((pm.total() - 1.0).abs()),
                Err(Error::DegeneratePartition) => {}
                Err(other) => return Err(other),
            }
        }
    }
    table.row(
        "probability-sums",
        worst <= 1e-10,
        format!("max |sum - 1| = {worst:.3e}"),
    );

    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            if i == k {
                continue;
            }
            let rhs: f64 = (0..n)
                .map(|j| model.w()[(i, j)] * model.z_h()[(j, k)])
                .sum();
            worst = worst.max((model.z_h()[(i, k)] - rhs).abs());
        }
    }
    table.row(
        "backward-recurrence",
        worst <= 1e-9,
        format!("max residual = {worst:.3e}"),
    );

    let mut worst = 0.0f64;
    for k in 0..n {
        let phi = potential_to_target(&model, k, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)?;
        for i in 0..n {
            let z = model.z_h()[(i, k)];
            if z > 0.0 {
                worst = worst.max((phi[i] + z.ln() / theta).abs());
            }
        }
    }
    table.row(
        "recurrence-vs-dense",
        worst <= 1e-8,
        format!("max |phi - dense| = {worst:.3e}"),
    );

    let mut worst = f64::NEG_INFINITY;
    for d in [surprisal_distance(&model), potential_distance(&model)] {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (d.get(i, k), d.get(i, j), d.get(j, k));
                    if b.is_finite() && c.is_finite() && a.is_finite() {
                        worst = worst.max(a - b - c);
                    }
                }
            }
        }
    }
    table.row(
        "triangle-inequality",
        worst <= 1e-9,
        format!("max violation = {worst:.3e}"),
    );

    let mut monotone = true;
    let mut prev = 0.0;
    let mut level = 0.0;
    for t in 0..=10 {
        let (bounded, total) = model.bounded_partition_check(t);
        monotone &= bounded >= prev - 1e-12 && bounded <= total * (1.0 + 1e-12);
        prev = bounded;
        level = bounded / total;
    }
    table.row(
        "series-monotone",
        monotone,
        format!("bounded/total after 10 steps = {level:.6}"),
    );

    Ok(table.failed)
}
