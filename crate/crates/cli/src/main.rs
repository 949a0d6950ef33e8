use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moneyflow_cli::config::ScenarioConfig;
use moneyflow_cli::error::{CliError, Result};
use moneyflow_cli::{lattice_cmd, preset, recompute, scenario, sweep};

#[derive(Parser)]
#[command(name = "moneyflow", version, about = "Fast money flow exchange-rate model: runs, sweeps and lattice checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory.csv, indicators.csv, SVG plots and report.json.
    Run(ScenarioArgs),
    /// Run a scenario once per value of one parameter and write summary.csv.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Parameter key, e.g. model.alpha1 or alpha1.
        #[arg(long)]
        axis: String,
        /// Comma-separated list, or start:stop:count.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Plaquette, discrete action and matrix checks on the lattice (JSON on stdout).
    Lattice {
        #[command(subcommand)]
        check: LatticeCheck,
    },
    /// Recompute PVI/NVI from the tau, V, R and S columns of a trajectory CSV.
    Indicators {
        input: PathBuf,
        #[arg(long, default_value = "indicators")]
        out: PathBuf,
        #[arg(long, default_value_t = moneyflow_core::indicators::DEFAULT_BASE)]
        base: f64,
        #[arg(long)]
        no_svg: bool,
    },
    /// List the named presets.
    Presets,
}

#[derive(Subcommand)]
enum LatticeCheck {
    /// Round-trip returns around the plaquette between two rates.
    Plaquette { s_n: f64, s_next: f64 },
    /// Discrete action of the sine test path with the given number of steps on [0, 1].
    Action {
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Transition and Hamiltonian matrices.
    Matrix { s: f64, beta: f64, dt: f64 },
    /// Convergence of the sine-path action to pi^2 and its log-log order.
    Convergence {
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 400])]
        steps: Vec<usize>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Named preset (see `moneyflow presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any setting, e.g. --set model.alpha1=0.5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    set: Vec<String>,
    /// Relative and optional absolute tolerance.
    #[arg(long, value_name = "REL[,ABS]")]
    tol: Option<String>,
    #[arg(long, value_name = "TAU")]
    t_end: Option<f64>,
    /// Indicator sampling step in tau.
    #[arg(long, value_name = "DTAU")]
    sample: Option<f64>,
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,
    #[arg(long, overrides_with = "svg")]
    no_svg: bool,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), _) => ScenarioConfig::from_preset(name)?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                ScenarioConfig::from_toml_str(&text)?
            }
            (None, None) => ScenarioConfig::default(),
        };
        for s in &self.set {
            cfg.set_str(s)?;
        }
        if let Some(tol) = &self.tol {
            let mut parts = tol.split(',');
            let rel = parts.next().unwrap_or_default();
            cfg.set_str(&format!("integrator.rel_tol={rel}"))?;
            if let Some(abs) = parts.next() {
                cfg.set_str(&format!("integrator.abs_tol={abs}"))?;
            }
            if parts.next().is_some() {
                return Err(CliError::Config(format!("--tol: expected REL[,ABS], got `{tol}`")));
            }
        }
        if let Some(t) = self.t_end {
            cfg.set("integrator.t_end", &toml::Value::Float(t))?;
        }
        if let Some(dt) = self.sample {
            cfg.set("sampling.dtau", &toml::Value::Float(dt))?;
        }
        if self.svg || self.no_svg {
            cfg.set("output.svg", &toml::Value::Boolean(self.svg))?;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Invariant(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let outcome = scenario::run_scenario(&cfg)?;
            let r = &outcome.report;
            println!(
                "{}: {} samples to tau = {}, {:?}, regime {}",
                outcome.dir.display(),
                r.samples,
                r.t_end,
                r.termination,
                r.regime.name()
            );
            if let Some(e) = &r.envelope {
                println!("  damping {:.6e}, omega {:.6}, eta drift {:.6}", e.damping, e.omega, e.drift);
            }
            println!(
                "  energy drift {:.3e}, max closure residual {} ulps",
                r.energy_drift, r.max_closure_ulps
            );
            Ok(outcome.exit_code())
        }
        Command::Sweep { scenario, axis, values } => {
            let cfg = scenario.resolve()?;
            let values = sweep::parse_values(&values)?;
            let root = cfg.output.dir.clone();
            let rows = sweep::sweep(&cfg, &axis, &values, &root)?;
            for r in &rows {
                println!(
                    "{} = {}: {} (damping {})",
                    axis,
                    r.value,
                    r.status,
                    r.damping.map_or("-".into(), |d| format!("{d:.3e}"))
                );
            }
            println!("summary: {}", root.join(sweep::SUMMARY_CSV).display());
            Ok(rows.iter().map(|r| r.exit_code).max().unwrap_or(0))
        }
        Command::Lattice { check } => {
            match check {
                LatticeCheck::Plaquette { s_n, s_next } => print_json(&lattice_cmd::plaquette(s_n, s_next)?)?,
                LatticeCheck::Action { steps } => print_json(&serde_json::json!({
                    "steps": steps,
                    "dt": 1.0 / steps as f64,
                    "action": lattice_cmd::sine_action(steps)?,
                    "limit": std::f64::consts::PI.powi(2),
                }))?,
                LatticeCheck::Matrix { s, beta, dt } => print_json(&lattice_cmd::matrices(s, beta, dt)?)?,
                LatticeCheck::Convergence { steps } => print_json(&lattice_cmd::sine_convergence(&steps)?)?,
            }
            Ok(0)
        }
        Command::Indicators { input, out, base, no_svg } => {
            let report = recompute::recompute(&input, &out, base, !no_svg)?;
            print_json(&report)?;
            Ok(0)
        }
        Command::Presets => {
            for (name, description) in preset::PRESETS {
                println!("{name:<20} {description}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Integration { partial: Some(p), .. } = &e {
                eprintln!("partial trajectory written to {}", p.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
