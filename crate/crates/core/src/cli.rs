//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Result, SimError};
use crate::experiments::{self, figure_config, ScenarioConfig, ScenarioReport};
use crate::scattering::Model;
use crate::selftest;
use crate::spin::SpinQuantum;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "spinsim", version, about = "Entangle two static spins by scattering mediators through them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct Overrides {
    /// Output file (CSV, or JSON for fixedpoint)
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// exchange or raman
    #[arg(long)]
    model: Option<String>,
    /// Coupling grid, comma separated
    #[arg(long, value_delimiter = ',')]
    g: Option<Vec<f64>>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Mediator polarization grid, comma separated
    #[arg(long, value_delimiter = ',')]
    rpol: Option<Vec<f64>>,
    /// Static spin quantum number (0.5, 1, 1.5, ...)
    #[arg(long)]
    s: Option<f64>,
    /// Monte Carlo trajectories
    #[arg(long)]
    trajectories: Option<usize>,
    /// Also write a gnuplot script
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario from a JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Regenerate the data for one figure from the bundled config
    Figure {
        #[arg(long, value_parser = ["2", "3b", "4", "5"])]
        id: String,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Report the fixed states of the transmitted map
    Fixedpoint {
        #[arg(long)]
        model: String,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        rpol: f64,
        #[arg(long, default_value_t = 1)]
        q: u32,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Also write the JSON report here
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the core invariants
    Selftest,
}

fn apply(cfg: &mut ScenarioConfig, o: Overrides, base: &Path) -> Result<()> {
    let cfg_err = |e: SimError| SimError::Config(e.to_string());
    if let Some(path) = o.output {
        cfg.output_path = base.join(path);
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(m) = o.model {
        cfg.model = Model::parse(&m).map_err(cfg_err)?;
    }
    if let Some(g) = o.g {
        cfg.g_grid = g;
    }
    if let Some(q) = o.q {
        cfg.q = q;
    }
    if let Some(n) = o.n_max {
        cfg.n_max = n;
    }
    if let Some(r) = o.rpol {
        cfg.r_pol_grid = r;
    }
    if let Some(s) = o.s {
        cfg.s = SpinQuantum::from_value(s).map_err(cfg_err)?;
    }
    if let Some(t) = o.trajectories {
        match cfg.noise.as_mut() {
            Some(noise) => noise.trajectories = t,
            None => return Err(SimError::Config("--trajectories needs a noise block".into())),
        }
    }
    cfg.plot_script |= o.plot;
    cfg.validate()
}

fn print_report(out: &mut dyn Write, cfg: &ScenarioConfig, report: &ScenarioReport) {
    let _ = writeln!(out, "scenario {} ({}, s = {})", cfg.scenario.id(), cfg.model.name(), cfg.s);
    for line in &report.summary {
        let _ = writeln!(out, "  {line}");
    }
    for f in &report.files {
        let _ = writeln!(out, "  wrote {}", f.display());
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run { config, overrides } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            apply(&mut cfg, overrides, Path::new("."))?;
            let report = experiments::run_scenario(&cfg)?;
            print_report(out, &cfg, &report);
            Ok(EXIT_OK)
        }
        Command::Figure { id, out: dir, overrides } => {
            let text = figure_config(&id)
                .ok_or_else(|| SimError::Config(format!("no bundled config for figure {id}")))?;
            let mut cfg = ScenarioConfig::from_json(text, &dir)?;
            apply(&mut cfg, overrides, &dir)?;
            let report = experiments::run_scenario(&cfg)?;
            print_report(out, &cfg, &report);
            Ok(EXIT_OK)
        }
        Command::Fixedpoint { model, g, rpol, q, s, output } => {
            let mut cfg = ScenarioConfig::from_json(r#"{"scenario": "fixedpoint", "model": "exchange", "g_grid": [1.0]}"#, Path::new("."))?;
            cfg.model = Model::parse(&model).map_err(|e| SimError::Config(e.to_string()))?;
            cfg.g_grid = vec![g];
            cfg.r_pol_grid = vec![rpol];
            cfg.q = q;
            cfg.s = SpinQuantum::from_value(s).map_err(|e| SimError::Config(e.to_string()))?;
            cfg.validate()?;
            let (dim, states) = experiments::fixed_point_states(cfg.model, g, q, rpol, cfg.s)?;
            let _ = writeln!(
                out,
                "{} g={g} q={q} r_pol={rpol} s={}: fixed operator space dim {dim}, {} fixed state(s)",
                cfg.model.name(),
                cfg.s,
                states.len()
            );
            for (i, rho) in states.iter().enumerate() {
                let f = crate::spin::fidelity_with_singlet(rho)?;
                let _ = writeln!(out, "  state {i}: singlet fidelity {f:.12}, purity {:.12}", (rho.matrix() * rho.matrix()).trace().re);
                let m = rho.matrix();
                for r in 0..m.nrows() {
                    let row: Vec<String> = (0..m.ncols())
                        .map(|c| format!("{:+.6}{:+.6}i", m[(r, c)].re, m[(r, c)].im))
                        .collect();
                    let _ = writeln!(out, "    {}", row.join(" "));
                }
            }
            if let Some(path) = output {
                cfg.output_path = path;
                let report = experiments::run_scenario(&cfg)?;
                for f in &report.files {
                    let _ = writeln!(out, "  wrote {}", f.display());
                }
            }
            Ok(EXIT_OK)
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            let mut failed = 0;
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "[{tag}] {}: {}", c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            let _ = writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len());
            Ok(if failed == 0 { EXIT_OK } else { EXIT_RUNTIME })
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
