use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use exhaust_core::exact::exact_joint;
use exhaust_core::harness::experiments::{self as exp, Engine, RunOptions};
use exhaust_core::harness::{verify, ExperimentReport, DEFAULT_SEED};
use exhaust_core::ldp::{composite_rate_f, contracted_rate_g, decay_rate_argmin, fmt_csv, rate_surface};
use exhaust_core::limits::AsymptoticSummary;
use exhaust_core::markov::TracePoint;
use exhaust_core::numeric::linspace;
use exhaust_core::CapitalLaw;

#[derive(Parser)]
#[command(name = "exhaust", version, about = "Broadcast until the capital runs out: simulation, exact laws, limits and rates")]
struct Cli {
    /// Capital law, e.g. `const:2`, `bernoulli:0.6`, `poisson:1.4998`, `geom:0.5`, `pmf:0:0.3,2:0.7`, `ptail:1:0.5`.
    #[arg(long, global = true)]
    law: Option<String>,
    /// Number of servers; experiments accept a comma-separated list.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Vec<u64>,
    #[arg(long, global = true)]
    reps: Option<u64>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Survival-proxy threshold: a run counts as surviving when tau >= eps n.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; 0 picks the machine default. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Markov,
    Gw,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Markov => Engine::Markov,
            EngineArg::Gw => Engine::Coupled,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Lln,
    Clt,
    Decay,
    HeavyTail,
    CriticalTail,
    Gumbel,
    Coupling,
    Subcritical,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicates of one engine and print tau and N(tau) per run.
    Simulate {
        #[arg(long, value_enum, default_value_t = EngineArg::Markov)]
        engine: EngineArg,
        /// Emit the (t, N, S, R) trajectory of replicate 0 instead.
        #[arg(long)]
        trace: bool,
    },
    /// Exact joint law of (N(tau), tau) for a bounded law.
    Exact,
    /// theta, p, survival probability and the CLT variances.
    Limits,
    /// F(r, t) at a point, or on a grid with --surface.
    Rate {
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        surface: bool,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = 3.0)]
        t_max: f64,
    },
    /// Decay rate of P(full transmission), and G(r) if --r is given.
    Decay {
        #[arg(long)]
        r: Option<f64>,
    },
    /// Run one Monte Carlo experiment and write its JSON report.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[arg(long, value_enum, default_value_t = EngineArg::Gw)]
        engine: EngineArg,
        /// Tail constant for the heavy-tail experiments.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Run the full acceptance suite.
    Verify,
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> CliResult<ExitCode> {
    let opts = RunOptions { seed: cli.seed, workers: cli.workers, epsilon: cli.epsilon };
    match &cli.command {
        Command::Simulate { engine, trace } => simulate(cli, (*engine).into(), *trace),
        Command::Exact => {
            let law = law(cli)?;
            let table = exact_joint(&law, single_n(cli)?).map_err(|e| e.to_string())?;
            if table.leaked_mass > 1e-12 {
                eprintln!("warning: {:.3e} of the mass was still live when the recursion stopped", table.leaked_mass);
            }
            emit(cli, &table.to_csv(), &table.summary_json())
        }
        Command::Limits => {
            let s = AsymptoticSummary::of(&law(cli)?);
            match cli.format {
                Format::Json => write_out(cli, &pretty(&s.to_json())),
                Format::Csv => write_out(cli, &s.to_table()),
            }
        }
        Command::Rate { r, t, surface, points, t_max } => {
            let law = law(cli)?;
            if *surface {
                let r_grid = linspace(0.0, 1.0, *points);
                let t_grid = linspace(0.0, *t_max, *points);
                let s = rate_surface(&law, &r_grid, &t_grid, cli.workers).map_err(|e| e.to_string())?;
                return write_out(cli, &s.to_csv());
            }
            let (r, t) = r.zip(*t).ok_or("rate needs --r and --t, or --surface")?;
            let p = composite_rate_f(&law, r, t).map_err(|e| e.to_string())?;
            let csv = format!("r,t,rho,J,I_component,F\n{},{},{},{},{},{}\n", p.r, p.t, fmt_csv(p.rho), fmt_csv(p.j), fmt_csv(p.i_component), fmt_csv(p.f));
            emit(cli, &csv, &p.to_json())
        }
        Command::Decay { r } => {
            let law = law(cli)?;
            let (rate, s) = decay_rate_argmin(&law).map_err(|e| e.to_string())?;
            let mut v = json!({ "law": law.to_string(), "decay_rate": rate, "argmin_s": s });
            let mut csv = format!("decay_rate,argmin_s\n{},{}\n", fmt_csv(rate), s);
            if let Some(r) = r {
                let g = contracted_rate_g(&law, *r).map_err(|e| e.to_string())?;
                v["r"] = json!(r);
                v["G"] = json!(g);
                csv = format!("decay_rate,argmin_s,r,G\n{},{},{},{}\n", fmt_csv(rate), s, r, fmt_csv(g));
            }
            emit(cli, &csv, &v)
        }
        Command::Experiment { name, engine, c, alpha } => {
            let report = experiment(cli, &opts, *name, (*engine).into(), *c, *alpha)?;
            write_out(cli, &report.to_json())?;
            for v in &report.verdicts {
                eprintln!("{}", v.line());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if report.all_tight_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Verify => {
            let results = verify::run_all(&opts, |r| {
                println!("{}", r.line());
                let _ = std::io::stdout().flush();
            });
            let failed = results.iter().filter(|r| !r.pass).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn experiment(cli: &Cli, opts: &RunOptions, name: ExperimentName, engine: Engine, c: f64, alpha: f64) -> CliResult<ExperimentReport> {
    let reps = |default: u64| cli.reps.unwrap_or(default);
    let ns = |default: &[u64]| if cli.n.is_empty() { default.to_vec() } else { cli.n.clone() };
    let law_or = |default: &str| CapitalLaw::parse(cli.law.as_deref().unwrap_or(default)).map_err(|e| e.to_string());
    let r = match name {
        ExperimentName::Lln => exp::lln_experiment(&law_or("const:2")?, &ns(&[100_000]), reps(100), engine, opts),
        ExperimentName::Clt => exp::clt_experiment(&law_or("const:2")?, ns(&[10_000])[0], reps(10_000), engine, opts),
        ExperimentName::Decay => exp::decay_experiment(&law_or("bernoulli:0.6")?, &ns(&[8, 16, 25, 50, 100, 200, 400]), opts),
        ExperimentName::HeavyTail => exp::heavy_tail_experiment(c, alpha, &ns(&[1000, 10_000]), reps(10_000), opts),
        ExperimentName::CriticalTail => exp::critical_tail_experiment(c, ns(&[10_000])[0], reps(10_000), opts),
        ExperimentName::Gumbel => exp::gumbel_experiment(ns(&[100_000])[0], reps(5000), opts),
        ExperimentName::Coupling => exp::coupling_experiment(&law_or("bernoulli:0.7")?, ns(&[6])[0], reps(100_000), opts),
        ExperimentName::Subcritical => exp::subcritical_experiment(&law_or("bernoulli:0.5")?, ns(&[10_000])[0], reps(100_000), opts),
    };
    r.map_err(|e| e.to_string())
}

fn simulate(cli: &Cli, engine: Engine, trace: bool) -> CliResult<ExitCode> {
    let law = law(cli)?;
    let n = single_n(cli)?;
    if trace {
        let config = exhaust_core::markov::SimConfig::new(n, law, cli.seed).with_trace();
        let out = match engine {
            Engine::Markov => exhaust_core::markov::run_markov(&config),
            Engine::Coupled => exhaust_core::pruning::run_coupled(&config).map(|o| o.outcome),
        }
        .map_err(|e| e.to_string())?;
        let points: Vec<TracePoint> = out.trace.clone().unwrap_or_default();
        let mut csv = String::from("t,informed,capital,revealed\n");
        for p in &points {
            csv.push_str(&format!("{},{},{},{}\n", p.t, p.informed, p.capital, p.revealed));
        }
        return emit(cli, &csv, &json!(out));
    }
    let reps = cli.reps.unwrap_or(1000);
    let outs = exp::simulate(&law, n, reps, cli.seed, engine, cli.workers).map_err(|e| e.to_string())?;
    let mut csv = String::from("rep,tau,informed,full_transmission\n");
    for (i, o) in outs.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", o.tau, o.informed, o.full_transmission as u8));
    }
    let hits = outs.iter().filter(|o| o.full_transmission).count();
    let v = json!({
        "law": law.to_string(),
        "n": n,
        "reps": reps,
        "seed": cli.seed,
        "full_transmission_fraction": hits as f64 / reps as f64,
        "mean_tau": outs.iter().map(|o| o.tau as f64).sum::<f64>() / reps as f64,
        "mean_informed": outs.iter().map(|o| o.informed as f64).sum::<f64>() / reps as f64,
        "runs": outs,
    });
    emit(cli, &csv, &v)
}

fn law(cli: &Cli) -> CliResult<CapitalLaw> {
    let spec = cli.law.as_deref().ok_or("--law is required")?;
    CapitalLaw::parse(spec).map_err(|e| e.to_string())
}

fn single_n(cli: &Cli) -> CliResult<u64> {
    match cli.n.as_slice() {
        [n] => Ok(*n),
        [] => Err("--n is required".into()),
        _ => Err("this command takes a single --n".into()),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn emit(cli: &Cli, csv: &str, json: &serde_json::Value) -> CliResult<ExitCode> {
    match cli.format {
        Format::Csv => write_out(cli, csv),
        Format::Json => write_out(cli, &pretty(json)),
    }
}

fn write_out(cli: &Cli, text: &str) -> CliResult<ExitCode> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
