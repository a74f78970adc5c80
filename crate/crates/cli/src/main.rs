//! `geothresh`: sampling, thresholds, theory values and Monte Carlo
//! experiments for random geometric graphs.
//!
//! Every subcommand echoes its resolved configuration to standard error
//! before computing. Exit codes: 0 success, 1 I/O failure, 2 invalid or
//! infeasible input, 3 root-solver failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geothresh::experiments::{
    replication_rng, sample_points, write_outputs, Experiment, ExperimentConfig, Model,
};
use geothresh::theory::{
    cdk, centring_radius, expected_isolated, expected_isolated_expansion, gumbel_median,
    slln_constant, solve_rn, unit_ball_volume, Family, LimitSpec, SampleSize,
};
use geothresh::{
    oracle, thresholds, Density, DensitySpec, Domain, Error, PointSet, ThresholdResult,
};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "geothresh", version, about)]
struct Cli {
    /// Worker threads for experiment replications; never changes results.
    #[arg(long, global = true, env = "GEOTHRESH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one point process and write it as CSV.
    Sample(SampleArgs),
    /// Compute L_k and M_k of a point set.
    Threshold(PointsArgs),
    /// Brute-force L_k and M_k (at most 14 points).
    Oracle(PointsArgs),
    /// Constants, limit laws and r_n for a domain and density.
    Theory(TheoryArgs),
    /// Run a replicated experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Poisson,
    Binomial,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Poisson => Model::Poisson,
            ModelArg::Binomial => Model::Binomial,
        }
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Domain as JSON, a JSON file, or one of `square`, `disk`, `ball3`.
    #[arg(long)]
    domain: String,
    /// Density as JSON, a JSON file, or `uniform`.
    #[arg(long, default_value = "uniform")]
    density: String,
    #[arg(long, value_enum, default_value_t = ModelArg::Poisson)]
    model: ModelArg,
    /// Intensity (poisson) or number of points (binomial).
    #[arg(long)]
    n: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PointsArgs {
    /// Point-set CSV with header `x,y` or `x,y,z`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long)]
    domain: String,
    #[arg(long, default_value = "uniform")]
    density: String,
    /// Dimension; must match the domain when given.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    /// Sample size for finite-n values (centring, corrections, r_n).
    #[arg(long)]
    n: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Config as a JSON file or inline JSON.
    #[arg(long)]
    config: String,
    /// Directory for records.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::NoBracket(_) => 3,
                Error::Io(_) => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = configure_threads(cli.threads)?;
    match cli.command {
        Command::Sample(a) => sample(a, threads),
        Command::Threshold(a) => threshold(a, threads, false),
        Command::Oracle(a) => threshold(a, threads, true),
        Command::Theory(a) => theory(a, threads),
        Command::Experiment(a) => experiment(a, threads),
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<usize> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(rayon::current_num_threads())
}

fn echo(command: &str, threads: usize, config: Value) {
    let line = json!({ "command": command, "threads": threads, "config": config });
    eprintln!("config: {line}");
}

/// Inline JSON, or the contents of a file.
fn json_text(arg: &str) -> anyhow::Result<String> {
    let t = arg.trim_start();
    if t.starts_with('{') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn parse_domain(arg: &str) -> anyhow::Result<Domain> {
    Ok(match arg {
        "square" => Domain::unit_square(),
        "disk" => Domain::disk(1.0)?,
        "ball3" => Domain::ball3(1.0)?,
        _ => Domain::from_json(&json_text(arg)?).context("parsing the domain")?,
    })
}

fn parse_density(arg: &str) -> anyhow::Result<DensitySpec> {
    if arg == "uniform" {
        return Ok(DensitySpec::Uniform {});
    }
    let spec = serde_json::from_str(&json_text(arg)?).context("parsing the density")?;
    Ok(spec)
}

fn sample(a: SampleArgs, threads: usize) -> anyhow::Result<()> {
    let domain = parse_domain(&a.domain)?;
    let spec = parse_density(&a.density)?;
    let model = Model::from(a.model);
    echo(
        "sample",
        threads,
        json!({
            "domain": domain, "density": spec, "model": model, "n": a.n,
            "seed": a.seed, "out": a.out,
        }),
    );
    if !(a.n.is_finite() && a.n >= 0.0) || (matches!(model, Model::Binomial) && a.n.fract() != 0.0)
    {
        return Err(Error::InvalidArgument(format!("bad sample size {}", a.n)).into());
    }
    let density = Density::new(spec, &domain)?;
    let points = sample_points(&density, model, a.n, &mut replication_rng(a.seed, 0))?;
    match &a.out {
        Some(path) => {
            let file =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            PointSet::write_csv(&points, domain.dim(), io::BufWriter::new(file))?;
        }
        None => PointSet::write_csv(&points, domain.dim(), io::stdout().lock())?,
    }
    Ok(())
}

fn read_points(path: &Path) -> anyhow::Result<(Vec<geothresh::Point>, usize)> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(PointSet::read_csv(io::BufReader::new(file))?)
}

fn threshold(a: PointsArgs, threads: usize, brute_force: bool) -> anyhow::Result<()> {
    let name = if brute_force { "oracle" } else { "threshold" };
    echo(name, threads, json!({ "in": a.input, "k": a.k }));
    let (points, dim) = read_points(&a.input)?;
    let result = if brute_force {
        if points.len() > oracle::MAX_ORACLE_POINTS {
            return Err(Error::TooManyPoints {
                max: oracle::MAX_ORACLE_POINTS,
                got: points.len(),
            }
            .into());
        }
        let l = oracle::knn_link(&points, a.k);
        let m = oracle::connectivity_threshold(&points, a.k)
            .with_context(|| format!("M_{} is undefined (L = {l})", a.k))?;
        ThresholdResult {
            l,
            m,
            coincide: l == m,
            k: a.k,
            n_points: points.len(),
        }
    } else {
        let ps = PointSet::new(points, dim)?;
        thresholds::thresholds(&ps, a.k)?
    };
    println!("{}", serde_json::to_string(&result)?);
    Ok(())
}

fn theory(a: TheoryArgs, threads: usize) -> anyhow::Result<()> {
    let domain = parse_domain(&a.domain)?;
    let spec = parse_density(&a.density)?;
    echo(
        "theory",
        threads,
        json!({
            "domain": domain, "density": spec, "d": a.d.unwrap_or(domain.dim()),
            "k": a.k, "beta": a.beta, "n": a.n,
        }),
    );
    let d = domain.dim();
    if a.d.is_some_and(|given| given != d) {
        bail!(Error::InvalidArgument(format!(
            "--d {} does not match the domain dimension {d}",
            a.d.unwrap()
        )));
    }
    if a.k == 0 {
        bail!(Error::InvalidArgument("--k must be at least 1".into()));
    }
    let density = Density::new(spec, &domain)?;
    let limit = if density.is_uniform() {
        LimitSpec::uniform(&domain, a.k)?
    } else {
        LimitSpec::non_uniform(&density, a.k)?
    };
    let mut notes: Vec<String> = Vec::new();
    let limit_cdf = match limit.family {
        Family::NonUniformGumbel { alpha } => {
            Some(geothresh::theory::nonuniform_limit_cdf(alpha, a.beta))
        }
        _ => match limit.limit_cdf(a.beta, SampleSize::Infinite) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        },
    };
    let mut out = json!({
        "d": d,
        "k": a.k,
        "beta": a.beta,
        "theta_d": unit_ball_volume(d),
        "volume": domain.volume(),
        "sigma_A": domain.isoperimetric_sigma(),
        "c_dk": cdk(d, a.k),
        "f0": density.f0(),
        "f1": density.f1(),
        "regime": density.regime(d),
        "gumbel_median": gumbel_median(),
        "slln_constant": slln_constant(&density, d)?,
        "limit": limit,
        "limit_cdf": limit_cdf,
    });
    if let Some(n) = a.n {
        let o = out.as_object_mut().expect("object");
        o.insert("n".into(), json!(n));
        o.insert("centring_offset".into(), json!(limit.centring(n)));
        if density.is_uniform() {
            let corrected = match limit.limit_cdf(a.beta, SampleSize::Finite(n)) {
                Ok(v) => Some(v),
                Err(e) => {
                    notes.push(e.to_string());
                    None
                }
            };
            let r = centring_radius(d, a.k, n, density.f0(), a.beta)?;
            o.insert("limit_cdf_finite_n".into(), json!(corrected));
            o.insert("centring_radius".into(), json!(r));
            o.insert(
                "expected_isolated_at_centring".into(),
                json!(expected_isolated(&density, n, r, a.k)),
            );
            o.insert(
                "expansion_at_centring".into(),
                json!(expected_isolated_expansion(
                    d,
                    a.k,
                    domain.isoperimetric_sigma(),
                    n,
                    a.beta
                )),
            );
        }
        let rn = solve_rn(&density, n, a.k, a.beta)?;
        o.insert("r_n".into(), json!(rn));
        o.insert(
            "expected_isolated_at_r_n".into(),
            json!(expected_isolated(&density, n, rn, a.k)),
        );
    }
    out.as_object_mut()
        .expect("object")
        .insert("notes".into(), json!(notes));
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn experiment(a: ExperimentArgs, threads: usize) -> anyhow::Result<()> {
    let config =
        ExperimentConfig::from_json(&json_text(&a.config)?).context("parsing the config")?;
    echo(
        "experiment",
        threads,
        json!({ "experiment": config, "out": a.out }),
    );
    let exp = Experiment::prepare(&config)?;
    eprintln!(
        "running {} replications (n = {}, k = {})",
        config.replications, config.n, config.k
    );
    let t = Instant::now();
    let records = exp.run()?;
    let summary = exp.summarise(&records)?;
    eprintln!("finished in {:.1}s", t.elapsed().as_secs_f64());
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_outputs(&a.out, &records, &summary)?;
    let mut err = io::stderr().lock();
    writeln!(err, "wrote {}", a.out.join("records.csv").display())?;
    writeln!(err, "wrote {}", a.out.join("summary.json").display())?;
    Ok(())
}
