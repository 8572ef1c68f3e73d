//! `nehari` command-line tool.
//!
//! Exit codes: 0 success, 1 failed validation or audit, 2 bad input
//! (config, file or parse errors), 3 spectral failure, 4 solver failure.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nehari::experiments::{audit_inequalities, bifurcation_sweep};
use nehari::graph::{example_line_graph, path_graph, random_connected_graph, PotentialMode, ValidationReport};
use nehari::io::{
    eigenvectors_to_csv, graph_to_json, load_graph, parse_run_config, parse_sweep_config, read_file, resolve_relative,
    sha256_hex, spectrum_to_json, sweep_plot_data, sweep_to_csv, to_json, write_atomic, RunManifest,
};
use nehari::solver::{
    check_critical_value_bounds, verify_no_solution, CriticalValueBounds, NoSolutionReport, Problem, Status,
};
use nehari::spectral::{default_split_tol, DENSE_LIMIT};
use nehari::{
    assemble, eigensolve, EigenMethod, EigenOptions, ExperimentError, GraphBuilder, GroundStateResult, IoError, Kappa,
    NonlinearityError, SolverError, SpectralData, SpectralError, WeightedGraph,
};

#[derive(Parser)]
#[command(name = "nehari", version, about = "Nehari-manifold ground states on weighted graphs")]
struct Cli {
    /// Seed for every randomized step; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to NEHARI_THREADS, then all cores).
    #[arg(long, global = true, env = "NEHARI_THREADS")]
    threads: Option<usize>,
    /// Directory for result files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Solver gradient tolerance (eigen residual tolerance for `spectrum`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a graph file: weights, measure, potential, connectivity and
    /// the finite-diameter and summability conditions.
    Validate { graph: PathBuf },
    /// Lowest k eigenpairs of the graph operator.
    Spectrum {
        graph: PathBuf,
        /// Number of eigenpairs (default: all).
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Ground state for a run config.
    Solve { config: PathBuf },
    /// Bifurcation sweep toward an eigenvalue.
    Sweep { config: PathBuf },
    /// Randomized audit of the form and embedding inequalities.
    Audit(AuditArgs),
    /// Print a built-in graph as JSON.
    Example(ExampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Args)]
struct AuditArgs {
    graph: PathBuf,
    /// Values of lambda to test (default: midpoints of the first three gaps).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Vertex ids forming K for the embedding bounds (default: all).
    #[arg(long, value_delimiter = ',')]
    subset: Vec<String>,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 200)]
    n_random: usize,
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(value_enum)]
    name: ExampleName,
    /// Vertex count for `path` and `random`.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Negative half length of the line graph.
    #[arg(long, default_value_t = 5)]
    n_minus: usize,
    /// Positive half length of the line graph.
    #[arg(long, default_value_t = 5)]
    n_plus: usize,
    /// Keep the line graph's literal potential (V = 0 on the negative half).
    #[arg(long)]
    literal: bool,
    /// Write to a file instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Line,
    Path,
    Single,
    P3,
    Random,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::new(2, e)
    }
}

impl From<NonlinearityError> for Failure {
    fn from(e: NonlinearityError) -> Self {
        Failure::new(2, e)
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Graph(g) => Failure::new(1, g),
            e => Failure::new(3, e),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Spectral(s) => s.into(),
            SolverError::Graph(g) => Failure::new(1, g),
            SolverError::Config(_) => Failure::new(2, e),
            e => Failure::new(4, e),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Solver(s) => s.into(),
            ExperimentError::Spectral(s) => s.into(),
            ExperimentError::Graph(g) => Failure::new(1, g),
            ExperimentError::BadSweep(_) => Failure::new(2, e),
            ExperimentError::TooFewRows { .. } => Failure::new(4, e),
            ExperimentError::Violation(_) => Failure::new(1, e),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let res = match &cli.command {
        Command::Validate { graph } => cmd_validate(graph),
        Command::Spectrum { graph, k, method } => cmd_spectrum(&cli, graph, *k, *method),
        Command::Solve { config } => cmd_solve(&cli, config),
        Command::Sweep { config } => cmd_sweep(&cli, config),
        Command::Audit(args) => cmd_audit(&cli, args),
        Command::Example(args) => cmd_example(&cli, args),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Loads a graph and refuses to go on if it fails validation.
fn load_valid_graph(path: &Path) -> Result<WeightedGraph, Failure> {
    let g = load_graph(path)?;
    let report = g.validate();
    if !report.passed() {
        return Err(Failure::new(
            1,
            format!("{}: {}", path.display(), failure_summary(&report)),
        ));
    }
    Ok(g)
}

fn failure_summary(report: &ValidationReport) -> String {
    let parts: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    parts.join("; ")
}

fn full_spectrum(g: &WeightedGraph, seed: u64) -> Result<SpectralData, Failure> {
    if g.len() > DENSE_LIMIT {
        return Err(SolverError::TooLarge {
            n: g.len(),
            limit: DENSE_LIMIT,
        }
        .into());
    }
    let fm = assemble(g)?;
    let opts = EigenOptions {
        seed,
        ..EigenOptions::default()
    };
    Ok(eigensolve(&fm, g.len(), &opts)?)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> CmdResult {
    write_atomic(&dir.join(name), contents.as_bytes())?;
    Ok(())
}

fn cmd_validate(path: &Path) -> CmdResult {
    let g = load_graph(path)?;
    let report = g.validate();
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if !report.passed() {
        return Err(Failure::new(1, failure_summary(&report)));
    }
    let all: Vec<usize> = (0..g.len()).collect();
    let diam = g.diameter(&all).map_err(|e| Failure::new(1, e))?;
    let sum = g.summability(&all).map_err(|e| Failure::new(1, e))?;
    let diam_ok = diam.is_finite();
    let sum_ok = sum.is_finite();
    println!(
        "{} finite_diameter: diam = {diam}",
        if diam_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "{} summability: sum of 1/b over ordered pairs = {sum}",
        if sum_ok { "PASS" } else { "FAIL" }
    );
    if !(diam_ok && sum_ok) {
        return Err(Failure::new(1, "compactifiability conditions fail"));
    }
    Ok(())
}

fn cmd_spectrum(cli: &Cli, path: &Path, k: Option<usize>, method: Method) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("spectrum", seed);
    manifest.add_input(path)?;
    let g = load_valid_graph(path)?;
    let fm = assemble(&g)?;
    let mut opts = EigenOptions {
        seed,
        method: match method {
            Method::Auto => EigenMethod::Auto,
            Method::Dense => EigenMethod::Dense,
            Method::Lanczos => EigenMethod::Lanczos,
        },
        ..EigenOptions::default()
    };
    if let Some(t) = cli.tol {
        opts.tol = t;
    }
    let spec = eigensolve(&fm, k.unwrap_or(g.len()), &opts)?;
    write_out(&cli.out_dir, "spectrum.json", &spectrum_to_json(&spec))?;
    write_out(&cli.out_dir, "eigenvectors.csv", &eigenvectors_to_csv(&g, &spec))?;
    manifest.finish(&cli.out_dir, &["spectrum.json", "eigenvectors.csv"])?;
    let shown: Vec<String> = spec.eigenvalues.iter().take(8).map(|l| format!("{l:.12}")).collect();
    println!(
        "{} eigenvalues: {}{}",
        spec.k(),
        shown.join(" "),
        if spec.k() > 8 { " ..." } else { "" }
    );
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    #[serde(flatten)]
    result: &'a GroundStateResult,
    critical_value_bounds: Option<CriticalValueBounds>,
    no_solution_certificate: Option<NoSolutionReport>,
}

fn cmd_solve(cli: &Cli, path: &Path) -> CmdResult {
    let bytes = read_file(path)?;
    let run = parse_run_config(&bytes, &path.display().to_string())?;
    let mut cfg = run.solver_config();
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.tol_grad = t;
    }
    cfg.validate()?;
    let mut manifest = RunManifest::new("solve", cfg.seed);
    manifest.config_sha256 = Some(sha256_hex(&bytes));
    let graph_path = resolve_relative(path, &run.graph);
    manifest.add_input(&graph_path)?;
    let g = load_valid_graph(&graph_path)?;
    let nl = run.nonlinearity.build(&g)?;
    let spec = full_spectrum(&g, cfg.seed)?;
    let prob = Problem::new(&g, &nl, &cfg, &spec)?;
    let result = prob.ground_state(None)?;

    let mut bounds = None;
    let mut certificate = None;
    match result.status {
        Status::Converged => bounds = Some(check_critical_value_bounds(&g, &result, &nl, prob.splitting())?),
        Status::NoNontrivial => {
            let lambda_1 = spec.eigenvalues[0];
            if cfg.kappa == Kappa::Defocusing && cfg.lambda <= lambda_1 + default_split_tol(lambda_1) {
                let report = verify_no_solution(&g, &nl, &spec, cfg.lambda, cfg.n_starts, cfg.seed)?;
                certificate = Some(report);
            }
        }
    }
    let out = SolveOutput {
        result: &result,
        critical_value_bounds: bounds,
        no_solution_certificate: certificate,
    };
    write_out(&cli.out_dir, "result.json", &to_json(&out))?;
    manifest.finish(&cli.out_dir, &["result.json"])?;
    match result.status {
        Status::Converged => println!(
            "converged: J = {:.15e}, level = {:.15e}, ||grad|| = {:.3e}",
            result.energy, result.level, result.residual_grad
        ),
        Status::NoNontrivial => println!("no_nontrivial: u = 0 is the only critical point"),
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, path: &Path) -> CmdResult {
    let bytes = read_file(path)?;
    let file = parse_sweep_config(&bytes, &path.display().to_string())?;
    let mut cfg = file.sweep_config()?;
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.solver.tol_grad = t;
    }
    let mut manifest = RunManifest::new("sweep", cfg.solver.seed);
    manifest.config_sha256 = Some(sha256_hex(&bytes));
    let graph_path = resolve_relative(path, &file.graph);
    manifest.add_input(&graph_path)?;
    let g = load_valid_graph(&graph_path)?;
    let nl = file.nonlinearity.build(&g)?;
    let spec = full_spectrum(&g, cfg.solver.seed)?;
    let res = bifurcation_sweep(&g, &nl, &spec, &cfg)?;
    write_out(&cli.out_dir, "sweep.csv", &sweep_to_csv(&res))?;
    write_out(&cli.out_dir, "sweep.json", &to_json(&res))?;
    write_out(&cli.out_dir, "sweep_plot.csv", &sweep_plot_data(&res))?;
    manifest.finish(&cli.out_dir, &["sweep.csv", "sweep.json", "sweep_plot.csv"])?;
    println!(
        "slope {:.6} (r^2 = {:.6}, expected >= {:.6}), scaling_ok = {}",
        res.fit.slope, res.fit.r_squared, res.expected_slope, res.scaling_ok
    );
    Ok(())
}

fn cmd_audit(cli: &Cli, args: &AuditArgs) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let mut manifest = RunManifest::new("audit", seed);
    manifest.add_input(&args.graph)?;
    let g = load_valid_graph(&args.graph)?;
    let spec = full_spectrum(&g, seed)?;
    let lambdas = if args.lambda.is_empty() {
        gap_midpoints(&spec, 3)
    } else {
        args.lambda.clone()
    };
    if lambdas.is_empty() {
        return Err(Failure::new(2, "no spectral gap to place lambda in; pass --lambda"));
    }
    let subset = if args.subset.is_empty() {
        None
    } else {
        let ids: Vec<_> = args.subset.iter().map(|s| parse_id(s)).collect();
        Some(g.indices_of(&ids).map_err(|e| Failure::new(2, e))?)
    };
    let report = audit_inequalities(&g, &spec, &lambdas, subset.as_deref(), args.p, args.n_random, seed)?;
    write_out(&cli.out_dir, "audit.json", &to_json(&report))?;
    manifest.finish(&cli.out_dir, &["audit.json"])?;
    for c in &report.counts {
        println!("{}: {}/{}", c.name, c.passed, c.total);
    }
    if !report.passed() {
        return Err(Failure::new(1, "audit failed"));
    }
    Ok(())
}

fn gap_midpoints(spec: &SpectralData, max: usize) -> Vec<f64> {
    let ev = &spec.eigenvalues;
    let mut out = vec![0.5 * ev[0]];
    for w in ev.windows(2) {
        if out.len() >= max {
            break;
        }
        if w[1] - w[0] > default_split_tol(w[1]) * 1e3 {
            out.push(0.5 * (w[0] + w[1]));
        }
    }
    out
}

fn parse_id(s: &str) -> nehari::VertexId {
    match s.parse::<i64>() {
        Ok(i) => nehari::VertexId::Int(i),
        Err(_) => nehari::VertexId::Name(s.to_string()),
    }
}

fn cmd_example(cli: &Cli, args: &ExampleArgs) -> CmdResult {
    let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Failure::new(2, what)) };
    let g = match args.name {
        ExampleName::Line => {
            need(
                args.n_minus >= 1 && args.n_plus >= 1,
                "--n-minus and --n-plus must be >= 1",
            )?;
            let mode = if args.literal {
                PotentialMode::Literal
            } else {
                PotentialMode::Clamped
            };
            example_line_graph(args.n_minus, args.n_plus, mode)
        }
        ExampleName::Path => {
            need(args.n >= 1, "--n must be >= 1")?;
            path_graph(args.n, 1.0, 1.0, 0.0)
        }
        ExampleName::Single => {
            let mut gb = GraphBuilder::new();
            gb.add_vertex(0, 1.0, 0.0).map_err(|e| Failure::new(2, e))?;
            gb.build().map_err(|e| Failure::new(2, e))?
        }
        ExampleName::P3 => path_graph(3, 1.0, 1.0, 0.0),
        ExampleName::Random => {
            need(args.n >= 1, "--n must be >= 1")?;
            random_connected_graph(args.n, 0.2, cli.seed.unwrap_or(0))
        }
    };
    let json = graph_to_json(&g);
    match &args.output {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}
