//! marginlab CLI.
//!
//! Every subcommand reads one JSON config (`--config path`) and accepts
//! `--key=value` overrides for any field, including nested ones
//! (`--solver.tol=1e-10`). Numbers, booleans and arrays parse as JSON;
//! anything else is taken as a string.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use marginlab::harness::config::{apply_override, ExperimentConfig, Problem};
use marginlab::harness::{acceptance, demos, emit, io, trial};
use marginlab::linear_margin::solve_max_margin_with;
use marginlab::opt_chain::{
    self, construct_network, kappa_gen_xor, opposite_margin_audit, opt5_oracle, solve_opt5,
    ConstructMode,
};
use marginlab::synthdata::{sample_linear, sample_xor};
use marginlab::xor_net::{normalized_margin, train_max_margin, xor_test_error};
use marginlab::{rng, Error};

#[derive(Parser)]
#[command(name = "marginlab", version, about = "max-margin phase-diagram laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key=value` overrides applied on top of the config.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset and write it as a flat binary file.
    Gen(CommonArgs),
    /// Solve the hard-margin problem on a linear instance.
    SolveLinear(CommonArgs),
    /// Train a near-max-margin two-layer network on an XOR instance.
    TrainXor(CommonArgs),
    /// Build the explicit network constructions (optimal / no_gen / scaled).
    Construct(CommonArgs),
    /// Solve the trivariate program and cross-check against the oracle.
    Opt5(CommonArgs),
    /// Print the signal-to-noise thresholds.
    Thresholds(CommonArgs),
    /// Run a phase sweep over (kappa, d/n [, h]) and emit records.
    Sweep(CommonArgs),
    /// Uniform-convergence failure demonstration.
    UcDemo(CommonArgs),
    /// Margin-bound vacuity demonstration.
    MarginDemo(CommonArgs),
    /// Run the acceptance suite.
    Accept(CommonArgs),
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut doc = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => serde_json::to_value(ExperimentConfig::default())?,
    };
    // Fill defaults for fields the file omitted, then apply overrides.
    let filled: ExperimentConfig = serde_json::from_value(doc)?;
    doc = serde_json::to_value(&filled)?;
    for raw in &args.overrides {
        let stripped = raw
            .strip_prefix("--")
            .ok_or_else(|| Error::invalid(format!("override `{raw}` must look like --key=value")))?;
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override `{raw}` must look like --key=value")))?;
        apply_override(&mut doc, key, value)?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc)?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(cfg: &ExperimentConfig, default: &str) -> PathBuf {
    PathBuf::from(cfg.out.clone().unwrap_or_else(|| default.to_string()))
}

fn emit_records(
    cfg: &ExperimentConfig,
    records: &[marginlab::harness::TrialRecord],
    default: &str,
) -> Result<(), Error> {
    let path = out_path(cfg, default);
    emit::emit(records, cfg.format, &path)?;
    println!(
        "wrote {} records to {} (determinism hash {:016x})",
        records.len(),
        path.display(),
        emit::determinism_hash(records)
    );
    Ok(())
}

fn construct_mode(cfg: &ExperimentConfig) -> Result<ConstructMode, Error> {
    match cfg.mode.as_str() {
        "optimal" => Ok(ConstructMode::Optimal),
        "no_gen" => Ok(ConstructMode::NoGen),
        "scaled" => Ok(ConstructMode::Scaled(cfg.alpha)),
        other => Err(Error::invalid(format!(
            "unknown mode `{other}` (expected optimal | no_gen | scaled)"
        ))),
    }
}

fn cmd_gen(cfg: &ExperimentConfig) -> Result<(), Error> {
    let seed = rng::derive_seed(cfg.trials[0], rng::tags::DATA);
    let (ds, spec) = match cfg.problem {
        Problem::Linear => {
            let spec = cfg.linear_spec()?;
            (sample_linear(&spec, seed)?, io::ProblemSpec::Linear(spec))
        }
        Problem::Xor => {
            let spec = cfg.xor_spec()?;
            (sample_xor(&spec, seed)?, io::ProblemSpec::Xor(spec))
        }
    };
    let path = out_path(cfg, "dataset.mlds");
    io::write_dataset(&path, &ds, &spec)?;
    println!(
        "wrote {} dataset (d = {}, n = {}, sigma = {:.6}, kappa = {:.4}) to {}",
        cfg.problem.name(),
        ds.d(),
        ds.n(),
        cfg.resolved_sigma()?,
        cfg.resolved_kappa()?,
        path.display()
    );
    Ok(())
}

fn cmd_solve_linear(cfg: &ExperimentConfig) -> Result<(), Error> {
    let spec = cfg.linear_spec()?;
    for &seed in &cfg.trials {
        let ds = sample_linear(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
        let mut opts = cfg.solver.to_opts();
        opts.seed = seed;
        let sol = solve_max_margin_with(&ds, &opts)?;
        println!(
            "seed {seed}: gamma*(S) = {:.10}, margin = {:.10}, duality gap = {:.2e}, epochs = {}",
            sol.gamma_star(),
            sol.report.normalized_margin,
            sol.gap,
            sol.epochs
        );
    }
    Ok(())
}

fn cmd_train_xor(cfg: &ExperimentConfig) -> Result<(), Error> {
    let spec = cfg.xor_spec()?;
    for &seed in &cfg.trials {
        let ds = sample_xor(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
        let constructed = construct_network(&ds, &spec, ConstructMode::Optimal)?;
        let reference = normalized_margin(&constructed, &ds).normalized_margin;
        let opts = cfg.trainer.to_opts(seed, cfg.epsilon, Some(reference));
        let out = train_max_margin(&ds, &spec, &opts)?;
        let err = xor_test_error(&out.net, &spec, cfg.mc_samples, seed)?;
        println!(
            "seed {seed}: trained margin = {:.6} (reference {:.6}, ratio {:.4}, target reached: {}), test err = {:.4}",
            out.report.normalized_margin,
            reference,
            out.report.optimality_ratio.unwrap_or(f64::NAN),
            out.trace.target_reached.map(|b| b.to_string()).unwrap_or_default(),
            err
        );
        if let Some(path) = &cfg.out {
            let path = PathBuf::from(format!("{path}.seed{seed}.mlnt"));
            io::write_net(&path, &out.net)?;
            println!("  wrote network to {}", path.display());
        }
    }
    Ok(())
}

fn cmd_construct(cfg: &ExperimentConfig) -> Result<(), Error> {
    let spec = cfg.xor_spec()?;
    let mode = construct_mode(cfg)?;
    for &seed in &cfg.trials {
        let ds = sample_xor(&spec, rng::derive_seed(seed, rng::tags::DATA))?;
        let net = construct_network(&ds, &spec, mode)?;
        let report = normalized_margin(&net, &ds);
        let audit = opposite_margin_audit(&net, &ds, &spec, cfg.mc_samples, seed)?;
        let err = xor_test_error(&net, &spec, cfg.mc_samples, seed)?;
        println!(
            "seed {seed} mode {}: margin = {:.6}, test err = {:.4}, margin on psi(S) = {:.6}, err on psi(S) = {:.4}, err on psi(D) = {:.4}",
            cfg.mode, report.normalized_margin, err, audit.margin_psi_s, audit.err_psi_s, audit.err_psi_d
        );
        if let Some(path) = &cfg.out {
            let path = PathBuf::from(format!("{path}.seed{seed}.mlnt"));
            io::write_net(&path, &net)?;
            println!("  wrote network to {}", path.display());
        }
    }
    Ok(())
}

fn cmd_opt5(cfg: &ExperimentConfig) -> Result<(), Error> {
    let closed = solve_opt5(cfg.k, cfg.p5, cfg.h)?;
    let oracle = opt5_oracle(cfg.k, cfg.p5, cfg.h, cfg.grid)?;
    println!(
        "closed form: b = {:.9}, c = {:.9}, d = {:.9}, objective = {:.12}{}",
        closed.b,
        closed.c,
        closed.d,
        closed.objective,
        if closed.boundary { " (regime boundary, b > 0 branch)" } else { "" }
    );
    println!(
        "oracle (grid {}): b = {:.9}, c = {:.9}, d = {:.9}, objective = {:.12}",
        cfg.grid, oracle.b, oracle.c, oracle.d, oracle.objective
    );
    println!("objective difference = {:.3e}", (closed.objective - oracle.objective).abs());
    Ok(())
}

fn cmd_thresholds(cfg: &ExperimentConfig) -> Result<(), Error> {
    println!(
        "linear: kappa_gen = {}, kappa_uc = {}",
        opt_chain::KAPPA_GEN_LINEAR,
        opt_chain::KAPPA_UC_LINEAR
    );
    println!("xor:    kappa_uc = {} (any h)", opt_chain::KAPPA_UC_XOR);
    let mut hs = cfg.sweep.hs.clone();
    if !hs.contains(&cfg.h) {
        hs.push(cfg.h);
    }
    hs.sort_by(f64::total_cmp);
    for h in hs {
        println!("xor:    kappa_gen({h:.3}) = {:.10}", kappa_gen_xor(h)?);
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), Error> {
    let records = trial::phase_sweep(cfg)?;
    emit_records(cfg, &records, "sweep.csv")
}

fn cmd_uc_demo(cfg: &ExperimentConfig) -> Result<(), Error> {
    let demo = demos::uc_failure_demo(cfg)?;
    println!("{}", serde_json::to_string_pretty(&demo)?);
    println!("one-sided UC witness (min over seeds): {:.4}", demo.witness_min);
    Ok(())
}

fn cmd_margin_demo(cfg: &ExperimentConfig) -> Result<(), Error> {
    let demo = demos::margin_vacuity_demo(cfg)?;
    println!("{}", serde_json::to_string_pretty(&demo)?);
    Ok(())
}

fn cmd_accept() -> Result<bool, Error> {
    let results = acceptance::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria passed", results.len());
    Ok(passed == results.len())
}

type CmdFn = fn(&ExperimentConfig) -> Result<(), Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, CmdFn) = match &cli.cmd {
        Cmd::Gen(a) => (a, cmd_gen),
        Cmd::SolveLinear(a) => (a, cmd_solve_linear),
        Cmd::TrainXor(a) => (a, cmd_train_xor),
        Cmd::Construct(a) => (a, cmd_construct),
        Cmd::Opt5(a) => (a, cmd_opt5),
        Cmd::Thresholds(a) => (a, cmd_thresholds),
        Cmd::Sweep(a) => (a, cmd_sweep),
        Cmd::UcDemo(a) => (a, cmd_uc_demo),
        Cmd::MarginDemo(a) => (a, cmd_margin_demo),
        Cmd::Accept(a) => {
            return match load_config(a).and_then(|_| cmd_accept()) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::FAILURE,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    };
    match load_config(args).and_then(|cfg| run(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
