//! Command-line front end: builds a worked example or a fuzz campaign, runs
//! the full check registry, and emits a JSON or plain-text report. Exit code
//! 0 means no check failed (not-applicable never fails a run), 1 means at
//! least one check failed, 2 means the run could not be carried out.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use quasimat::linalg::{Operator, Tolerance};
use quasimat::report;
use quasimat::scenario::{run_example, run_fuzz, ExampleId, ExampleParams, FuzzParams};

#[derive(Parser)]
#[command(
    name = "quasimat",
    about = "Numerical laboratory for automorphism groups and quasi-invariant states on matrix algebras"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Absolute tolerance for all checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_abs: f64,
    /// Relative tolerance for all checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rel: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Build a worked example and run every registered check on it.
    Verify {
        /// One of ex1, ex2, ex3, ex4.
        #[arg(long)]
        example: String,
        /// Inverse temperature for ex2 (default ln 2).
        #[arg(long)]
        beta: Option<f64>,
        /// First density eigenvalue for ex4 (default 0.7).
        #[arg(long)]
        lambda: Option<f64>,
        /// Second density eigenvalue for ex4 (default 0.3).
        #[arg(long)]
        mu: Option<f64>,
        /// Tensor factors for ex3 (default 2).
        #[arg(long)]
        sites: Option<usize>,
        /// Matrix JSON file: for ex1 a single positive 3x3 matrix, for ex3 an
        /// array of positive diagonal 2x2 site matrices.
        #[arg(long)]
        k_file: Option<PathBuf>,
    },
    /// Run randomized instances and aggregate worst deviations per check.
    Fuzz {
        /// Matrix algebra dimension (2..=8).
        #[arg(long)]
        dim: usize,
        /// Group specification, currently cyclic:N.
        #[arg(long)]
        group: String,
        /// Number of random instances.
        #[arg(long)]
        trials: usize,
        /// Seed for the deterministic trial stream.
        #[arg(long)]
        seed: u64,
    },
}

fn parse_group(spec: &str) -> Result<usize, String> {
    let order = spec
        .strip_prefix("cyclic:")
        .ok_or_else(|| format!("unsupported group spec {spec:?}; expected cyclic:N"))?;
    let order: usize = order
        .parse()
        .map_err(|_| format!("group order in {spec:?} is not a positive integer"))?;
    if order == 0 {
        return Err(format!("group order in {spec:?} must be positive"));
    }
    Ok(order)
}

fn load_k_matrix(path: &PathBuf) -> Result<Operator, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

fn load_site_diagonals(path: &PathBuf) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let matrices: Vec<Operator> = serde_json::from_str(&text)
        .map_err(|e| format!("cannot parse {} as an array of matrices: {e}", path.display()))?;
    let mut diagonals = Vec::with_capacity(matrices.len());
    for (index, m) in matrices.iter().enumerate() {
        if m.dim() != 2 {
            return Err(format!("site matrix {index} must be 2x2, got {}x{0}", m.dim()));
        }
        let mat = m.mat();
        let off = mat[(0, 1)].norm().max(mat[(1, 0)].norm());
        let imag = mat[(0, 0)].im.abs().max(mat[(1, 1)].im.abs());
        if off > 1e-12 || imag > 1e-12 {
            return Err(format!("site matrix {index} must be real diagonal"));
        }
        diagonals.push(vec![mat[(0, 0)].re, mat[(1, 1)].re]);
    }
    Ok(diagonals)
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

fn run(cli: Cli) -> Result<i32, String> {
    let tol = Tolerance::new(cli.tol_abs, cli.tol_rel).map_err(|e| e.to_string())?;
    let (kind, outcome, parameters, seed) = match cli.command {
        Command::Verify { example, beta, lambda, mu, sites, k_file } => {
            let id = ExampleId::parse(&example)
                .ok_or_else(|| format!("unknown example {example:?}; expected ex1..ex4"))?;
            let mut params = ExampleParams::default();
            if let Some(beta) = beta {
                params.beta = beta;
            }
            if let Some(lambda) = lambda {
                params.lambda = lambda;
            }
            if let Some(mu) = mu {
                params.mu = mu;
            }
            if let Some(sites) = sites {
                params.sites = sites;
            }
            let mut parameters = Vec::new();
            match id {
                ExampleId::Ex1 => {
                    if let Some(path) = &k_file {
                        params.k_matrix = Some(load_k_matrix(path)?);
                        parameters.push(("k_file".to_string(), path.display().to_string()));
                    } else {
                        parameters.push(("k_file".to_string(), "builtin".to_string()));
                    }
                }
                ExampleId::Ex2 => {
                    parameters.push(("beta".to_string(), format_float(params.beta)));
                }
                ExampleId::Ex3 => {
                    if let Some(path) = &k_file {
                        params.site_diagonals = Some(load_site_diagonals(path)?);
                        parameters.push(("k_file".to_string(), path.display().to_string()));
                    }
                    parameters.push(("sites".to_string(), params.sites.to_string()));
                }
                ExampleId::Ex4 => {
                    parameters.push(("lambda".to_string(), format_float(params.lambda)));
                    parameters.push(("mu".to_string(), format_float(params.mu)));
                }
            }
            let outcome = run_example(id, &params, tol).map_err(|e| e.to_string())?;
            ("example", outcome, parameters, None)
        }
        Command::Fuzz { dim, group, trials, seed } => {
            let group_order = parse_group(&group)?;
            let params = FuzzParams { dim, group_order, trials, seed };
            let outcome = run_fuzz(&params, tol).map_err(|e| e.to_string())?;
            let parameters = vec![
                ("dim".to_string(), dim.to_string()),
                ("group".to_string(), group.clone()),
                ("trials".to_string(), trials.to_string()),
                ("seed".to_string(), seed.to_string()),
            ];
            ("fuzz", outcome, parameters, Some(seed))
        }
    };
    let report =
        report::assemble(kind, outcome, parameters, tol, seed).map_err(|e| e.to_string())?;
    match cli.format {
        Format::Json => print!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    Ok(if report.has_failures() { 1 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
