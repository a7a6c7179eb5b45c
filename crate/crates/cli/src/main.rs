//! `landau`: predictions, operators, spectra and p-sweeps from config files.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use landau_core::discretize::assemble::sup_field;
use landau_core::discretize::{build_operator, read_matrix, write_matrix, SparseHermitian};
use landau_core::harness::{ldos_check, run_sweep, Check, ExperimentConfig, GridRule, PhiSpec};
use landau_core::model::{sample_fields, validate_model, Grid, ModelConfig, ModelSpec};
use landau_core::predictor::weyl::f0_pairing;
use landau_core::predictor::{sigma_bands, weyl_count_prediction};
use landau_core::spectral::{eigenpairs_with, trace_phi, EigsOptions, Slicer};
use landau_core::{Error, Result};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "LANDAU_THREADS";

#[derive(Parser)]
#[command(
    name = "landau",
    version,
    about = "Landau-level spectra of magnetic Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and print its band set, Weyl counts and trace pairing.
    Predict(Common),
    /// Assemble H_p and write it as Matrix Market.
    Assemble(Common),
    /// Count eigenvalues in an interval by inertia.
    Count(Common),
    /// Compute eigenpairs in an interval.
    Eigs(Common),
    /// Compute tr φ(H_p) for a bump φ and compare with the leading term.
    Trace(Common),
    /// Run an experiment config and write its report.
    Sweep(Common),
    /// Compare the local density of states with f_0 at selected points.
    Ldos(Common),
}

#[derive(Args)]
struct Common {
    /// Model or experiment JSON (an experiment has a "model" key).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tensor power; defaults to the first p of an experiment.
    #[arg(long)]
    p: Option<u32>,
    /// Cells per axis, `N` or `N1xN2`; defaults to the experiment's grid rule.
    #[arg(long)]
    grid: Option<String>,
    /// Matrix Market input instead of assembling from a model.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Spectral interval `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Bump support `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Largest number of eigenpairs to compute.
    #[arg(long)]
    max_m: Option<usize>,
    /// LDOS point `x1,x2`; repeatable.
    #[arg(long = "node", allow_hyphen_values = true)]
    nodes: Vec<String>,
    /// Band-set energy cutoff for `predict`.
    #[arg(long, default_value_t = 4.0)]
    k_max: f64,
}

fn parse_pair(text: &str, sep: char) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("expected `a{sep}b`, got `{text}`"));
    let (a, b) = text.split_once(sep).ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a < b) {
        return Err(Error::Config(format!("empty interval `{text}`")));
    }
    Ok((a, b))
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad coordinate in `{text}`")))
        })
        .collect()
}

fn parse_cells(text: &str, dim: usize) -> Result<Vec<usize>> {
    let parts: Vec<usize> = text
        .split('x')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad grid `{text}`")))
        })
        .collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        n if n == dim => Ok(parts),
        _ => Err(Error::Config(format!("grid `{text}` does not have {dim} axes"))),
    }
}

/// What a `--config` file turned out to be.
enum Loaded {
    Model(ModelConfig),
    Experiment(Box<ExperimentConfig>),
}

fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if value.get("model").is_some() {
        Ok(Loaded::Experiment(Box::new(ExperimentConfig::from_path(path)?)))
    } else {
        Ok(Loaded::Model(ModelConfig::from_json_str(&text)?))
    }
}

/// A model with the defaults an experiment config supplies.
struct Setup {
    model: ModelConfig,
    experiment: Option<Box<ExperimentConfig>>,
}

impl Setup {
    fn from(args: &Common) -> Result<Setup> {
        let path = args
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("--config is required".into()))?;
        Ok(match load(path)? {
            Loaded::Model(model) => Setup {
                model,
                experiment: None,
            },
            Loaded::Experiment(e) => Setup {
                model: e.model_config()?,
                experiment: Some(e),
            },
        })
    }

    fn p(&self, args: &Common) -> Result<u32> {
        args.p
            .or_else(|| self.experiment.as_ref().map(|e| e.p[0]))
            .ok_or_else(|| Error::Config("--p is required with a model config".into()))
    }

    fn interval(&self, args: &Common) -> Result<(f64, f64)> {
        match &args.interval {
            Some(s) => parse_pair(s, ':'),
            None => self
                .experiment
                .as_ref()
                .and_then(|e| e.intervals.first().copied())
                .ok_or_else(|| Error::Config("--interval is required".into())),
        }
    }

    fn phi(&self, args: &Common) -> Result<PhiSpec> {
        match &args.phi {
            Some(s) => parse_pair(s, ':').map(|(alpha, beta)| PhiSpec { alpha, beta }),
            None => self
                .experiment
                .as_ref()
                .and_then(|e| e.phi.first().copied())
                .ok_or_else(|| Error::Config("--phi is required".into())),
        }
    }

    fn eigs(&self, args: &Common) -> EigsOptions {
        let mut opts = self.experiment.as_ref().map(|e| e.eigs.clone()).unwrap_or_default();
        if let Some(m) = args.max_m {
            opts.max_m = m;
        }
        opts
    }

    fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::from_config(&self.model)
    }

    fn grid(&self, spec: &ModelSpec, args: &Common, p: u32) -> Result<Grid> {
        let cells = match &args.grid {
            Some(g) => parse_cells(g, spec.dim())?,
            None => {
                let rule = self.experiment.as_ref().map(|e| e.grid.clone()).unwrap_or_default();
                let probe = Grid::new(&spec.domain, &GridRule::default().cells_for(&spec.domain, p, 1.0))?;
                rule.cells_for(&spec.domain, p, sup_field(spec, &probe)?)
            }
        };
        Grid::new(&spec.domain, &cells)
    }
}

/// The operator named by `--matrix`, or assembled from the model.
fn operator(args: &Common) -> Result<(SparseHermitian, Option<u32>)> {
    if let Some(path) = &args.matrix {
        return Ok((read_matrix(path)?, None));
    }
    let setup = Setup::from(args)?;
    let spec = setup.spec()?;
    let p = setup.p(args)?;
    let grid = setup.grid(&spec, args, p)?;
    Ok((build_operator(&spec, &grid, p)?.matrix, Some(p)))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))? + "\n";
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            std::fs::write(&path, &text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            println!("{}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn predict(args: &Common) -> Result<i32> {
    let setup = Setup::from(args)?;
    let spec = setup.spec()?;
    let cells = setup.experiment.as_ref().map_or(512, |e| e.prediction_cells);
    let grid = Grid::new(&spec.domain, &vec![cells; spec.dim()])?;
    let validation = validate_model(&spec, &grid)?;
    let samples = sample_fields(&spec, &grid)?;
    let bands = sigma_bands(&samples, &vec![true; samples.len()], args.k_max)?;
    let p = args
        .p
        .or_else(|| setup.experiment.as_ref().map(|e| e.p[0]))
        .unwrap_or(1);
    let weyl = setup
        .interval(args)
        .ok()
        .map(|iv| weyl_count_prediction(&samples, iv, p as f64));
    let pairing = setup
        .phi(args)
        .ok()
        .map(|phi| json!({"phi": phi, "pairing": f0_pairing(&samples, &phi.test_function())}));
    emit(
        &json!({"validation": validation, "bands": bands, "weyl": weyl, "f0": pairing}),
        args.out.as_deref(),
        "predict.json",
    )?;
    Ok(0)
}

fn assemble(args: &Common) -> Result<i32> {
    let (h, p) = operator(args)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    let name = p.map_or("operator.mtx".to_string(), |p| format!("operator_p{p}.mtx"));
    let path = dir.join(name);
    write_matrix(&h, &path)?;
    println!("{}", path.display());
    Ok(0)
}

fn count(args: &Common) -> Result<i32> {
    let interval = match &args.interval {
        Some(s) => parse_pair(s, ':')?,
        None => Setup::from(args)?.interval(args)?,
    };
    let (h, _) = operator(args)?;
    let slice = Slicer::new(&h).count_interval(interval)?;
    emit(&slice, args.out.as_deref(), "count.json")?;
    Ok(0)
}

fn eigs(args: &Common) -> Result<i32> {
    let (interval, opts) = match &args.interval {
        Some(s) if args.config.is_none() => {
            let mut o = EigsOptions::default();
            if let Some(m) = args.max_m {
                o.max_m = m;
            }
            (parse_pair(s, ':')?, o)
        }
        _ => {
            let setup = Setup::from(args)?;
            (setup.interval(args)?, setup.eigs(args))
        }
    };
    let (h, _) = operator(args)?;
    let slice = eigenpairs_with(&Slicer::new(&h), interval, &opts)?;
    emit(&slice, args.out.as_deref(), "eigs.json")?;
    Ok(0)
}

fn trace(args: &Common) -> Result<i32> {
    let setup = Setup::from(args)?;
    let phi = setup.phi(args)?;
    let spec = setup.spec()?;
    let p = setup.p(args)?;
    let grid = setup.grid(&spec, args, p)?;
    let op = build_operator(&spec, &grid, p)?;
    let result = trace_phi(&Slicer::new(&op.matrix), &phi.test_function(), None, &setup.eigs(args))?;
    let cells = setup.experiment.as_ref().map_or(512, |e| e.prediction_cells);
    let pgrid = Grid::new(&spec.domain, &vec![cells; spec.dim()])?;
    let pairing = f0_pairing(&sample_fields(&spec, &pgrid)?, &phi.test_function());
    let predicted = (p as f64).powi(spec.dim() as i32 / 2) * pairing;
    emit(
        &json!({
            "p": p,
            "phi": phi,
            "measured": result,
            "predicted": predicted,
            "relative_error": (result.value - predicted).abs() / predicted.abs(),
        }),
        args.out.as_deref(),
        "trace.json",
    )?;
    Ok(0)
}

fn experiment(args: &Common) -> Result<ExperimentConfig> {
    match Setup::from(args)?.experiment {
        Some(e) => Ok(*e),
        None => Err(Error::Config("this command needs an experiment config".into())),
    }
}

fn sweep(args: &Common) -> Result<i32> {
    let config = experiment(args)?;
    let report = run_sweep(&config)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    for v in &report.verdicts {
        eprintln!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    match args.out.clone().or(config.output.dir.clone()) {
        Some(dir) => {
            for path in report.write(&dir, config.output.csv)? {
                println!("{}", path.display());
            }
        }
        None => print!("{}", report.to_json()?),
    }
    Ok(report.exit_code())
}

fn ldos(args: &Common) -> Result<i32> {
    let mut config = experiment(args)?;
    if !config.has(Check::Ldos) && config.ldos_phi().is_none() {
        config.phi = vec![Setup::from(args)?.phi(args)?];
    }
    if let Some(p) = &args.phi {
        let (alpha, beta) = parse_pair(p, ':')?;
        config.ldos.phi = Some(PhiSpec { alpha, beta });
    }
    let points = if args.nodes.is_empty() {
        config.ldos.nodes.clone()
    } else {
        args.nodes.iter().map(|n| parse_point(n)).collect::<Result<_>>()?
    };
    let report = ldos_check(&config, &points)?;
    emit(&report, args.out.as_deref(), "ldos.json")?;
    Ok(0)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads = value
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Predict(a) => predict(a),
        Command::Assemble(a) => assemble(a),
        Command::Count(a) => count(a),
        Command::Eigs(a) => eigs(a),
        Command::Trace(a) => trace(a),
        Command::Sweep(a) => sweep(a),
        Command::Ldos(a) => ldos(a),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
