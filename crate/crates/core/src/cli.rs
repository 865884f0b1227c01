//! Command-line interface: `run`, `plot` and `validate`.
//!
//! Exit codes: 0 on success, 2 for configuration, scenario or input errors,
//! 3 when a run aborts on a non-finite value.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Backend, ExperimentConfig, System};
use crate::error::{Error, Result};
use crate::experiment::run_experiment;
use crate::plot::plot_dirs;
use crate::world::{builtin_scenario, ScenarioSpec};

pub const OUT_ENV: &str = "GOALCHAIN_OUT";

#[derive(Debug, Parser)]
#[command(name = "goalchain", version, about = "Intrinsically motivated goal selection experiments")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write CSV outputs.
    Run(RunArgs),
    /// Render SVG charts from the aggregate CSVs of one or more runs.
    Plot(PlotArgs),
    /// Check a scenario and print its dependency graph.
    Validate(ScenarioArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Built-in scenario id (1, 2 or 3).
    #[arg(long, conflicts_with = "scenario_file")]
    pub scenario: Option<u8>,
    /// Scenario description in TOML.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Experiment configuration in TOML; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// grail, c_grail or m_grail.
    #[arg(long)]
    pub system: Option<String>,
    /// idealized or actor_critic.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Parallel replications; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write goal-selector tables at every evaluation point.
    #[arg(long)]
    pub dump_values: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Run output directories; one panel each.
    #[arg(long = "input", short, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Directory for the SVG files.
    #[arg(long, default_value = "figures")]
    pub out: PathBuf,
}

impl RunArgs {
    /// Config file (or defaults) with every flag applied, then validated.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(id) = self.scenario.scenario {
            cfg.scenario = id;
            cfg.scenario_file = None;
        }
        if let Some(path) = &self.scenario.scenario_file {
            cfg.scenario_file = Some(path.clone());
        }
        if let Some(s) = &self.system {
            cfg.system = s.parse::<System>()?;
        }
        if let Some(b) = &self.backend {
            cfg.backend = b.parse::<Backend>()?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.replications {
            cfg.replications = n;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        cfg.dump_values |= self.dump_values;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioSpec> {
    match (&args.scenario_file, args.scenario) {
        (Some(path), _) => ScenarioSpec::from_path(path),
        (None, Some(id)) => builtin_scenario(id),
        (None, None) => Err(Error::Config("give --scenario or --scenario-file".into())),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            if args.print_config {
                print!("{}", cfg.to_toml_string());
                return Ok(());
            }
            log::info!(
                "running {} / {} on scenario {}, {} replications",
                cfg.system,
                cfg.backend,
                cfg.scenario_file
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| cfg.scenario.to_string()),
                cfg.replications
            );
            let result = run_experiment(&cfg)?;
            result.write_outputs(&cfg.out)?;
            let agg = result.competence_aggregate();
            let last = agg.last().map(|(t, _, _)| *t).unwrap_or(0);
            println!("wrote {}", cfg.out.display());
            for (t, g, s) in agg.iter().filter(|(t, _, _)| *t == last) {
                println!(
                    "  {} competence at trial {t}: {:.3} [{:.3}, {:.3}]",
                    result.scenario.label(*g),
                    s.mean,
                    s.ci_low,
                    s.ci_high
                );
            }
            Ok(())
        }
        Command::Plot(args) => {
            for path in plot_dirs(&args.inputs, &args.out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Validate(args) => {
            let spec = load_scenario(args)?;
            spec.validate()?;
            println!("scenario `{}`: {} goals, valid", spec.name, spec.num_goals());
            print!("{}", spec.describe_dependencies());
            Ok(())
        }
    }
}

/// Parses `args`, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("goalchain").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let cli = parse(&[
            "run", "--scenario", "3", "--system", "m_grail", "--seed", "42", "--replications", "3",
            "--out", "x",
        ]);
        let Command::Run(args) = cli.command else { panic!() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.scenario, 3);
        assert_eq!(cfg.system, System::MGrail);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.out, PathBuf::from("x"));
    }

    #[test]
    fn unknown_system_is_a_config_error() {
        let cli = parse(&["run", "--system", "q_grail"]);
        let Command::Run(args) = cli.command else { panic!() };
        let err = args.resolve().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("c_grail"));
    }

    #[test]
    fn scenario_flags_conflict() {
        let r = Cli::try_parse_from(["goalchain", "validate", "--scenario", "1", "--scenario-file", "s.toml"]);
        assert!(r.is_err());
    }
}
