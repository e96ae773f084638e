use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use resilient_dlms::analysis::{spectral_radius, NetworkMatrices};
use resilient_dlms::attacks::validate_a1;
use resilient_dlms::config::{AlgorithmName, AttackName, SimConfig};
use resilient_dlms::diffusion::AdaptWeights;
use resilient_dlms::harness::{run_monte_carlo, theory_table, write_outputs, write_theory};

#[derive(Parser)]
#[command(name = "rdlms", version, about = "Attack-resilient clustered diffusion LMS simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSV output.
    Run(Common),
    /// Print the mean-stability step-size bound.
    Bound(Common),
    /// Simulate attack-free M-DLMS and compare its mean error with theory.
    Theory(Common),
    /// Check the configuration and the majority-trust assumption.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; the built-in reference experiment when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    algo: Option<AlgorithmName>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    attack: Option<AttackName>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the long per-node trace.
    #[arg(long)]
    trace: bool,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
            None => SimConfig::reference(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if let Some(v) = self.algo {
            cfg.algorithm = v;
        }
        if let Some(v) = self.ratio {
            cfg.params.ratio = v;
        }
        if let Some(v) = self.attack {
            cfg.attack.kind = v;
        }
        if let Some(v) = &self.out {
            cfg.output.dir = v.display().to_string();
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        cfg.output.trace |= self.trace;
        Ok(cfg)
    }
}

fn run(args: &Common) -> Result<bool> {
    let cfg = args.load()?;
    let exp = cfg.build()?;
    let result = run_monte_carlo(&exp)?;
    let files = write_outputs(&result, &exp.output.dir)?;
    println!("steady-state MSD: {:.3} dB", result.steady_state_db());
    println!("events per node: {:.2}", result.average_events());
    println!("communication load: {:.1}%", 100.0 * result.load_fraction());
    if let Some(r) = result.detection.detection_rate() {
        println!("detection rate: {:.4}", r);
    }
    if let Some(r) = result.detection.false_positive_rate() {
        println!("false-positive rate: {:.4}", r);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(true)
}

fn bound(args: &Common) -> Result<bool> {
    let cfg = args.load()?;
    let exp = cfg.build()?;
    let mats = NetworkMatrices::from_scenario(&exp.scenario, AdaptWeights::Identity);
    let eta = exp.params.regularization;
    let mu_max = mats.step_bound(eta);
    let rho = spectral_radius(&mats.transition(exp.params.step_size, eta));
    println!("eta,mu,mu_max,spectral_radius");
    println!("{},{},{},{}", eta, exp.params.step_size, mu_max, rho);
    Ok(rho < 1.0)
}

fn theory(args: &Common) -> Result<bool> {
    let mut cfg = args.load()?;
    cfg.algorithm = AlgorithmName::Mdlms;
    cfg.attack.kind = AttackName::None;
    let exp = cfg.build()?;
    let result = run_monte_carlo(&exp)?;
    let rows = theory_table(&exp, &result, exp.params.adapt_weights)?;
    std::fs::create_dir_all(&exp.output.dir)?;
    let path = PathBuf::from(&exp.output.dir).join("theory.csv");
    write_theory(&rows, &path)?;
    println!("node,component,theory,mc_mean,mc_se");
    for r in &rows {
        println!("{},{},{},{},{}", r.node, r.component, r.theory, r.mc_mean, r.mc_se);
    }
    Ok(true)
}

fn validate(args: &Common) -> Result<bool> {
    let cfg = args.load()?;
    let exp = cfg.build()?;
    for w in exp.scenario.topology.warnings() {
        println!("warning: {w}");
    }
    let mut ok = true;
    for run in 0..exp.runs {
        let schedule = exp.plan.resolve(&exp.scenario.topology, &exp.streams, run)?;
        let report = validate_a1(&exp.scenario.topology, &schedule);
        for v in report.violations() {
            println!("run {run}: node {} has {} of {} neighbors compromised", v.node + 1, v.attacked, v.neighborhood);
        }
        ok &= report.passed();
    }
    println!("{}", if ok { "config ok" } else { "config invalid" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Bound(a) => bound(a),
        Command::Theory(a) => theory(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
