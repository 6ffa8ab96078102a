use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use fracsys::eigensolver::{init_cone, minimize_with};
use fracsys::energy::SystemEnergy;
use fracsys::harness::selftest;
use fracsys::harness::sweep::{limit_summary, write_outputs, write_pair_fields};
use fracsys::harness::{run_sweep, ExperimentConfig};
use fracsys::infinity::{extremal, limit_residual};
use fracsys::Error;

#[derive(Parser, Debug)]
#[command(name = "fracsys", version, about = "First eigenpairs of coupled fractional p-Laplacian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for one p (default: the first sweep value) and write the fields.
    Solve {
        #[arg(long)]
        p: Option<f64>,
    },
    /// Run the p-sweep and write sweep.csv, fields and limit.json.
    Sweep,
    /// Print the limit eigenvalue and the residuals of the extremal pair.
    Limit,
    /// Run the built-in property suites.
    Selftest,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidDomain(_) | Error::InvalidParameter(_) => 2,
        _ => 1,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

fn solve(cli: &Cli, p: Option<f64>) -> Result<bool, Error> {
    let cfg = load(cli)?;
    let p = p.unwrap_or(cfg.sweep[0]);
    let params = cfg.params(p).map_err(|e| Error::Config(e.to_string()))?;
    params.check_exponents().map_err(|e| Error::Config(e.to_string()))?;
    let domain = cfg.build_domain()?;
    let sys = SystemEnergy::new(domain.clone(), params)?;
    let (u0, v0) = init_cone(&domain, &params);
    let start = Instant::now();
    let pair = minimize_with(&sys, (&u0, &v0), &cfg.solver)?;
    let secs = start.elapsed().as_secs_f64();
    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir)?;
    write_pair_fields(dir, &pair)?;
    if !cli.quiet {
        println!("p            {p}");
        println!("nodes        {}", domain.len());
        println!("lambda       {:.12e}", pair.lambda);
        println!("lambda^(1/p) {:.12}", pair.lambda_root());
        println!("kkt_u        {:.3e}", pair.kkt_u);
        println!("kkt_v        {:.3e}", pair.kkt_v);
        println!("kkt_relative {:.3e}", pair.kkt_relative);
        println!("iterations   {}", pair.iterations);
        println!("converged    {}", pair.converged);
        println!("wall_time_s  {secs:.3}");
    }
    Ok(pair.converged)
}

fn sweep(cli: &Cli) -> Result<bool, Error> {
    let cfg = load(cli)?;
    let outcome = run_sweep(&cfg)?;
    write_outputs(&cfg.output.directory, &cfg.output.formats, &outcome)?;
    if !cli.quiet {
        let stdout = std::io::stdout();
        let mut w = csv::Writer::from_writer(stdout.lock());
        for r in &outcome.records {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        println!("successive sup distances: {:?}", outcome.successive_distances);
        println!(
            "limit residual of last pair: u {:.4e}, v {:.4e} (Lambda = {:.6})",
            outcome.limit.residual_u, outcome.limit.residual_v, outcome.limit.lambda_inf_geometric
        );
    }
    Ok(outcome.records.iter().all(|r| r.converged))
}

fn limit(cli: &Cli) -> Result<bool, Error> {
    let cfg = load(cli)?;
    let domain = cfg.build_domain()?;
    let f = cfg.fractional;
    let res = extremal(&domain, f.gamma, f.r, f.s)?;
    let (ru, rv) = limit_residual(&res.u0, &res.v0, f.gamma, f.r, f.s, res.lambda_inf_geometric)?;
    let summary = fracsys::harness::sweep::LimitSummary {
        residual_u: ru,
        residual_v: rv,
        ..limit_summary(&domain, &res.u0, &res.v0, f.gamma, f.r, f.s)?
    };
    if !cli.quiet {
        println!("inradius               {:.6}", res.inradius);
        println!("lambda_inf_geometric   {:.6}", res.lambda_inf_geometric);
        println!("lambda_inf_variational {:.6}", res.lambda_inf_variational);
        println!("residual_u             {:.6e}", ru);
        println!("residual_v             {:.6e}", rv);
    }
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out)?;
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(out.join("limit.json"), text + "\n")?;
    }
    Ok(true)
}

fn run_selftest(cli: &Cli) -> bool {
    let reports = selftest::run_all(cli.seed.unwrap_or(0));
    for r in &reports {
        if !cli.quiet || !r.passed {
            println!("{:<10} {}  {}", r.name, if r.passed { "ok" } else { "FAILED" }, r.detail);
        }
    }
    reports.iter().all(|r| r.passed)
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("FRACSYS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| Error::Config(format!("FRACSYS_THREADS = {value:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = init_threads().and_then(|_| match &cli.command {
        Command::Solve { p } => solve(&cli, *p),
        Command::Sweep => sweep(&cli),
        Command::Limit => limit(&cli),
        Command::Selftest => Ok(run_selftest(&cli)),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fracsys: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
