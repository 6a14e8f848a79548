//! Argument handling and subcommand drivers for the `mecat` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use mecat_core::expm::{
    fast_z_apply, fast_ztilde_apply, propagate, write_solution_csv, ztilde_dense, Arithmetic, PropagateOptions,
    PropagationMethod,
};
use mecat_core::generators::{build_a0, build_a1, build_tasep_generator, RateFunction, DEFAULT_STATE_CAP};
use mecat_core::io::{parse_coordinates, write_coordinates, write_tasep_states};
use mecat_core::magnus::{sigma_table, write_sigma_csv, SigmaMethod};
use mecat_core::matrix::Matrix;
use mecat_core::parallel::with_threads;
use mecat_core::pseudospectra::{
    a0_report, a1_report, contour_levels, eig_sensitivity_report, grid_with, write_contour_csv, GridOptions, Preset,
    SminMethod, SminOptions,
};
use mecat_core::quadrature::QuadratureSpec;
use mecat_core::stochastic::{empirical_marginal, rre_theta, ssa_path, tv_distance};
use mecat_core::{ErrorKind, IBig};

#[derive(Debug, Parser)]
#[command(name = "mecat", version, about = "Isomerisation master equation toolkit")]
pub struct Cli {
    /// Worker threads for grid and path evaluation (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON file whose keys mirror the flag names, plus "subcommand".
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generator in coordinate text format.
    Matrix(MatrixArgs),
    /// Tabulate σ(t) for several methods.
    Sigma(SigmaArgs),
    /// Propagate a point mass and write p(t).
    Solve(SolveArgs),
    /// Sample log10 s_min(zI - A) on a grid, optionally with ε-contours.
    Pseudospectrum(PseudospectrumArgs),
    /// Compare floating-point eigenvalues with the exact spectrum.
    Eigcheck(EigcheckArgs),
    /// Simulate jump paths and write the empirical marginal.
    Ssa(SsaArgs),
    /// Time the fast transforms against dense products.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Matrix(_) => "matrix",
            Command::Sigma(_) => "sigma",
            Command::Solve(_) => "solve",
            Command::Pseudospectrum(_) => "pseudospectrum",
            Command::Eigcheck(_) => "eigcheck",
            Command::Ssa(_) => "ssa",
            Command::Bench(_) => "bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    A0,
    A1,
    Tasep,
    File,
}

#[derive(Debug, Clone, Args)]
pub struct MatrixSelector {
    /// Which matrix to use.
    #[arg(long = "matrix", visible_alias = "which", value_enum)]
    pub matrix: Option<MatrixKind>,
    /// Number of molecules N (a0, a1).
    #[arg(long)]
    pub n: Option<usize>,
    /// TASEP particle count K.
    #[arg(long)]
    pub k: Option<usize>,
    /// TASEP displacement budget D.
    #[arg(long)]
    pub d: Option<usize>,
    /// Abort TASEP enumeration beyond this many states.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    /// Coordinate-format input (file).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub select: MatrixSelector,
    /// Output path, `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
    /// TASEP state table (`index,positions`).
    #[arg(long)]
    pub states_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SigmaArgs {
    /// Rate function: const:C, sin, cos, poly:a0,a1,...
    #[arg(long)]
    pub f: RateFunction,
    #[arg(long)]
    pub t_max: f64,
    /// Number of intervals; the table has steps + 1 rows per method.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Comma-separated subset of full, order1, order2, reference.
    #[arg(long, value_delimiter = ',', default_value = "full,order1,order2,reference")]
    pub methods: Vec<SigmaMethod>,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct QuadArgs {
    /// Absolute and relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_subdivisions: usize,
    /// Half-width of the series patch of the kernel near zero.
    #[arg(long, default_value_t = 1e-3)]
    pub guard: f64,
}

impl QuadArgs {
    fn spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            abs_tol: self.tol,
            rel_tol: self.tol,
            max_subdivisions: self.max_subdivisions,
            singularity_guard: self.guard,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SolveArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: RateFunction,
    #[arg(long)]
    pub t: f64,
    /// split, ode or spectral.
    #[arg(long, default_value = "split")]
    pub method: PropagationMethod,
    /// auto, double or hp.
    #[arg(long, default_value = "auto")]
    pub arithmetic: Arithmetic,
    /// Initial S1 count (default N).
    #[arg(long)]
    pub i0: Option<usize>,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Local error tolerance of the ode method.
    #[arg(long, default_value_t = 1e-10)]
    pub ode_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PseudospectrumArgs {
    #[command(flatten)]
    pub select: MatrixSelector,
    /// almond, track or seedpod; box flags override the preset box.
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub n_re: usize,
    #[arg(long, default_value_t = 200)]
    pub n_im: usize,
    /// svd or inverse.
    #[arg(long, default_value = "inverse")]
    pub smin_method: SminMethod,
    /// Reduce dense matrices to Schur form before the sweep.
    #[arg(long)]
    pub schur: bool,
    /// Contour levels ε, descending, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<f64>,
    /// Grid CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Contour CSV output (needs --levels).
    #[arg(long)]
    pub contours_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EigcheckArgs {
    #[command(flatten)]
    pub select: MatrixSelector,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SsaArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: RateFunction,
    /// Initial S1 count (default N).
    #[arg(long)]
    pub i0: Option<usize>,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: u64,
    #[arg(long, env = "MECAT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Histogram CSV (`state,count,frequency`).
    #[arg(long)]
    pub out: PathBuf,
    /// Trajectory CSV of path 0.
    #[arg(long)]
    pub trajectory_out: Option<PathBuf>,
    /// JSON comparison with the exact marginal and the RRE mean.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchOp {
    Ztilde,
    Z,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "ztilde")]
    pub op: BenchOp,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, env = "MECAT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] mecat_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Numeric => 2,
                ErrorKind::Invariant => 3,
            },
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Turn a JSON config object into `(subcommand, flags)`.
pub fn config_to_args(text: &str) -> CliResult<(String, Vec<String>)> {
    let value: Value = serde_json::from_str(text).map_err(|e| usage(format!("--config: invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| usage("--config: top level must be an object"))?;
    let sub = obj
        .get("subcommand")
        .and_then(Value::as_str)
        .ok_or_else(|| usage("--config: missing string key \"subcommand\""))?
        .to_string();
    let mut args = Vec::new();
    for (key, v) in obj {
        if key == "subcommand" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> CliResult<String> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(usage(format!(
                    "--config: key \"{key}\" must hold a string, number, bool or list"
                ))),
            }
        };
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => args.push(flag),
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<CliResult<Vec<_>>>()?;
                args.push(format!("{flag}={}", parts.join(",")));
            }
            other => args.push(format!("{flag}={}", scalar(other)?)),
        }
    }
    Ok((sub, args))
}

/// Split off the global flags that precede the subcommand.
fn split_globals(args: &[OsString]) -> (Vec<OsString>, Option<PathBuf>, Vec<OsString>) {
    let mut globals = vec![];
    let mut config = None;
    let mut k = 1;
    while k < args.len() {
        let s = args[k].to_string_lossy().into_owned();
        let (name, inline) = match s.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (s.clone(), None),
        };
        if name != "--threads" && name != "--config" {
            break;
        }
        let (value, used) = match inline {
            Some(v) => (Some(OsString::from(v)), 1),
            None => (args.get(k + 1).cloned(), 2),
        };
        if name == "--config" {
            config = value.map(PathBuf::from);
        } else {
            globals.push(OsString::from("--threads"));
            globals.extend(value);
        }
        k += used;
    }
    (globals, config, args[k.min(args.len())..].to_vec())
}

/// Parse the command line, expanding `--config` into flags. Flags given on
/// the command line after the config take precedence over config values.
pub fn parse_with_config(args: Vec<OsString>, read: impl Fn(&Path) -> CliResult<String>) -> CliResult<Cli> {
    let (globals, config, rest) = split_globals(&args);
    let Some(path) = config else {
        return Cli::try_parse_from(&args).map_err(clap_error);
    };
    let (sub, flags) = config_to_args(&read(&path)?)?;
    let mut merged: Vec<OsString> = args.first().cloned().into_iter().collect();
    merged.extend(globals);
    merged.push(sub.clone().into());
    merged.extend(flags.into_iter().map(OsString::from));
    let mut rest = rest.into_iter().peekable();
    if let Some(first) = rest.peek() {
        let first = first.to_string_lossy();
        if !first.starts_with('-') {
            if first != sub {
                return Err(usage(format!(
                    "--config names subcommand '{sub}' but the command line uses '{first}'"
                )));
            }
            rest.next();
        }
    }
    merged.extend(rest);
    let mut cli = Cli::try_parse_from(&merged).map_err(clap_error)?;
    cli.config = Some(path);
    Ok(cli)
}

fn clap_error(e: clap::Error) -> CliError {
    let text = e.to_string();
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("invalid arguments");
    let detail: Vec<&str> = text
        .lines()
        .skip(1)
        .map(str::trim)
        .filter(|l| l.starts_with("--") || l.starts_with('<'))
        .collect();
    let mut msg = first.trim_start_matches("error: ").to_string();
    if !detail.is_empty() {
        msg = format!("{msg} {}", detail.join(", "));
    }
    CliError::Usage(msg)
}

fn create(path: &Path) -> CliResult<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufWriter::new(std::io::stdout())));
    }
    let f = File::create(path).map_err(|e| usage(format!("cannot create '{}': {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn finish(mut w: Box<dyn Write>) -> CliResult<()> {
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.into()))?;
    writeln!(w)?;
    finish(w)
}

struct Selected {
    matrix: Matrix<f64>,
    entries: Vec<(usize, usize, f64)>,
    label: String,
    tasep: Option<mecat_core::generators::SparseGenerator>,
}

fn require<T: Copy>(v: Option<T>, flag: &str, kind: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("{flag} is required for --matrix {kind}")))
}

fn select(s: &MatrixSelector) -> CliResult<Selected> {
    let kind = s.matrix.ok_or_else(|| usage("--matrix (or --which) is required"))?;
    Ok(match kind {
        MatrixKind::A0 | MatrixKind::A1 => {
            let name = if kind == MatrixKind::A0 { "a0" } else { "a1" };
            let n = require(s.n, "--n", name)?;
            let g = if kind == MatrixKind::A0 {
                build_a0(n)?
            } else {
                build_a1(n)?
            }
            .to_f64();
            Selected {
                matrix: g.to_dense(),
                entries: g.to_coordinates(),
                label: format!("{} N={n}", name.to_uppercase()),
                tasep: None,
            }
        }
        MatrixKind::Tasep => {
            let k = require(s.k, "--k", "tasep")?;
            let d = require(s.d, "--d", "tasep")?;
            let g = build_tasep_generator(k, d, s.state_cap)?;
            Selected {
                matrix: g.to_dense(),
                entries: g.entries.clone(),
                label: format!("TASEP K={k} D={d}"),
                tasep: Some(g),
            }
        }
        MatrixKind::File => {
            let path = s
                .input
                .as_ref()
                .ok_or_else(|| usage("--input is required for --matrix file"))?;
            let text =
                std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read '{}': {e}", path.display())))?;
            let m = parse_coordinates(&text)?;
            if m.rows != m.cols {
                return Err(usage(format!("--input matrix is {}x{}, not square", m.rows, m.cols)));
            }
            Selected {
                matrix: m.to_dense()?,
                entries: m.entries,
                label: format!("file {}", path.display()),
                tasep: None,
            }
        }
    })
}

fn run_matrix(a: &MatrixArgs) -> CliResult<()> {
    let s = select(&a.select)?;
    if a.states_out.is_some() && s.tasep.is_none() {
        return Err(usage("--states-out only applies to --matrix tasep"));
    }
    let mut w = create(&a.out)?;
    write_coordinates(&mut w, s.matrix.rows(), s.matrix.cols(), &s.entries)?;
    finish(w)?;
    if let (Some(path), Some(g)) = (&a.states_out, &s.tasep) {
        let mut w = create(path)?;
        write_tasep_states(&mut w, g)?;
        finish(w)?;
    }
    Ok(())
}

fn run_sigma(a: &SigmaArgs, threads: Option<usize>) -> CliResult<()> {
    if a.methods.is_empty() {
        return Err(usage("--methods must name at least one method"));
    }
    let q = a.quad.spec();
    let rows = with_threads(threads, || sigma_table(&a.f, a.t_max, a.steps, &a.methods, &q))??;
    let mut w = create(&a.out)?;
    write_sigma_csv(&mut w, &rows)?;
    finish(w)
}

fn point_mass(n: usize, i0: Option<usize>) -> CliResult<(usize, Vec<f64>)> {
    let i0 = i0.unwrap_or(n);
    if i0 > n {
        return Err(usage(format!("--i0 {i0} exceeds --n {n}")));
    }
    let mut p = vec![0.0; n + 1];
    p[i0] = 1.0;
    Ok((i0, p))
}

fn run_solve(a: &SolveArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let (_, p0) = point_mass(a.n, a.i0)?;
    let opts = PropagateOptions {
        method: a.method,
        arithmetic: a.arithmetic,
        quadrature: a.quad.spec(),
        ode_tol: a.ode_tol,
    };
    let p = propagate(&a.f, &p0, a.t, &opts)?;
    let mut w = create(&a.out)?;
    write_solution_csv(&mut w, &p)?;
    finish(w)
}

fn run_pseudospectrum(a: &PseudospectrumArgs, threads: Option<usize>) -> CliResult<()> {
    let (matrix, label, re0, im0) = match (a.preset, a.select.matrix) {
        (Some(_), Some(_)) => return Err(usage("--preset and --matrix are mutually exclusive")),
        (Some(p), None) => {
            let s = p.setup()?;
            (s.matrix, s.label, Some(s.re_range), Some(s.im_range))
        }
        (None, Some(_)) => {
            let s = select(&a.select)?;
            (s.matrix, s.label, None, None)
        }
        (None, None) => return Err(usage("one of --preset or --matrix is required")),
    };
    let pick = |v: Option<f64>, preset: Option<f64>, flag: &str| -> CliResult<f64> {
        v.or(preset)
            .ok_or_else(|| usage(format!("{flag} is required without --preset")))
    };
    let re = (
        pick(a.re_min, re0.map(|r| r.0), "--re-min")?,
        pick(a.re_max, re0.map(|r| r.1), "--re-max")?,
    );
    let im = (
        pick(a.im_min, im0.map(|r| r.0), "--im-min")?,
        pick(a.im_max, im0.map(|r| r.1), "--im-max")?,
    );
    if a.contours_out.is_some() && a.levels.is_empty() {
        return Err(usage("--contours-out needs --levels"));
    }
    let opts = GridOptions {
        smin: SminOptions {
            method: a.smin_method,
            schur: a.schur,
            ..SminOptions::default()
        },
        threads,
        svd_fallback: true,
    };
    let g = grid_with(&matrix, re, im, a.n_re, a.n_im, &label, &opts)?;
    let mut w = create(&a.out)?;
    g.write_csv(&mut w)?;
    finish(w)?;
    if let Some(path) = &a.contours_out {
        let lines = contour_levels(&g, &a.levels)?;
        let mut w = create(path)?;
        write_contour_csv(&mut w, &lines)?;
        finish(w)?;
    }
    Ok(())
}

fn run_eigcheck(a: &EigcheckArgs) -> CliResult<()> {
    let report = match a.select.matrix {
        Some(MatrixKind::A0) => a0_report(require(a.select.n, "--n", "a0")?)?,
        Some(MatrixKind::A1) => a1_report(require(a.select.n, "--n", "a1")?)?,
        _ => {
            // triangular matrices carry their exact spectrum on the diagonal
            let s = select(&a.select)?;
            let m = &s.matrix;
            let n = m.rows();
            let lower = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == 0.0));
            let upper = (0..n).all(|i| (0..i).all(|j| m[(i, j)] == 0.0));
            if !(lower || upper) {
                return Err(usage("eigcheck needs --matrix a0, a1 or a triangular matrix"));
            }
            let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
            eig_sensitivity_report(m, &diag, &[])?
        }
    };
    write_json(&a.out, &report)
}

#[derive(Debug, Serialize)]
struct SsaSummary {
    n: usize,
    i0: usize,
    t: f64,
    paths: u64,
    seed: u64,
    tv_distance: f64,
    scaled_mean: f64,
    rre_theta: f64,
    mean_error: f64,
}

fn run_ssa(a: &SsaArgs, threads: Option<usize>) -> CliResult<()> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let (i0, p0) = point_mass(a.n, a.i0)?;
    let m = with_threads(threads, || empirical_marginal(&a.f, a.n, i0, a.t, a.paths, a.seed))??;
    let mut w = create(&a.out)?;
    m.write_csv(&mut w)?;
    finish(w)?;
    if let Some(path) = &a.trajectory_out {
        let tr = ssa_path(&a.f, a.n, i0, a.t, a.seed)?;
        let mut w = create(path)?;
        tr.write_csv(&mut w)?;
        finish(w)?;
    }
    if let Some(path) = &a.summary_out {
        let exact = propagate(&a.f, &p0, a.t, &PropagateOptions::default())?;
        let theta = rre_theta(&a.f, i0 as f64 / a.n as f64, a.t)?;
        let scaled_mean = m.mean() / a.n as f64;
        let summary = SsaSummary {
            n: a.n,
            i0,
            t: a.t,
            paths: a.paths,
            seed: a.seed,
            tv_distance: tv_distance(&m.frequencies(), &exact)?,
            scaled_mean,
            rre_theta: theta,
            mean_error: (scaled_mean - theta).abs(),
        };
        write_json(path, &summary)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub op: String,
    pub n: usize,
    pub reps: usize,
    pub equal: bool,
    pub fast_seconds: f64,
    pub dense_seconds: f64,
    pub speedup: f64,
}

pub fn bench(op: BenchOp, n: usize, reps: usize, seed: u64) -> CliResult<BenchReport> {
    if n == 0 || reps == 0 {
        return Err(usage("--n and --reps must be at least 1"));
    }
    let zt = ztilde_dense(n);
    let dense = match op {
        BenchOp::Ztilde => zt,
        BenchOp::Z => signed_alternating(&zt),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<IBig>> = (0..reps)
        .map(|_| {
            (0..=n)
                .map(|_| IBig::from(rng.gen_range(-1_000_000i64..=1_000_000)))
                .collect()
        })
        .collect();
    let start = Instant::now();
    let fast: Vec<Vec<IBig>> = inputs
        .iter()
        .map(|u| match op {
            BenchOp::Ztilde => fast_ztilde_apply(u),
            BenchOp::Z => fast_z_apply(u),
        })
        .collect::<Result<_, _>>()?;
    let fast_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let slow: Vec<Vec<IBig>> = inputs.iter().map(|u| dense.mul_vec(u)).collect::<Result<_, _>>()?;
    let dense_seconds = start.elapsed().as_secs_f64();
    let equal = fast == slow;
    if !equal {
        return Err(CliError::Core(mecat_core::Error::Invariant(format!(
            "fast {op:?} transform differs from the dense product at N={n}"
        ))));
    }
    Ok(BenchReport {
        op: format!("{op:?}").to_lowercase(),
        n,
        reps,
        equal,
        fast_seconds,
        dense_seconds,
        speedup: dense_seconds / fast_seconds.max(1e-12),
    })
}

/// `(-1)^(i+j)` times each entry; turns `Z~` into `Z`.
fn signed_alternating(m: &Matrix<IBig>) -> Matrix<IBig> {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        if (i + j) % 2 == 1 {
            -m[(i, j)].clone()
        } else {
            m[(i, j)].clone()
        }
    })
}

fn run_bench(a: &BenchArgs) -> CliResult<()> {
    let report = bench(a.op, a.n, a.reps, a.seed)?;
    write_json(&a.out, &report)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if cli.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let threads = cli.threads;
    match cli
        .command
        .as_ref()
        .ok_or_else(|| usage("a subcommand is required (see --help)"))?
    {
        Command::Matrix(a) => run_matrix(a),
        Command::Sigma(a) => run_sigma(a, threads),
        Command::Solve(a) => run_solve(a),
        Command::Pseudospectrum(a) => run_pseudospectrum(a, threads),
        Command::Eigcheck(a) => run_eigcheck(a),
        Command::Ssa(a) => run_ssa(a, threads),
        Command::Bench(a) => run_bench(a),
    }
}

/// Full entry point; returns the process exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    if let Err(e) = Cli::try_parse_from(&args) {
        use clap::error::ErrorKind as K;
        if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
            print!("{e}");
            return 0;
        }
    }
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read --config '{}': {e}", p.display())))
    };
    let result = parse_with_config(args, read).and_then(|cli| run(&cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
