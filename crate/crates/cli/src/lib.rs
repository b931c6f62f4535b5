//! Command-line front end for `droopvolt`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use droopvolt::config::{self, CheckName, ScenarioConfig};
use droopvolt::run::{self, RunBundle};
use droopvolt::{certify, model, Error};

/// Exit code when every requested check holds.
pub const EXIT_OK: i32 = 0;
/// Exit code when at least one check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit code for usage, configuration and I/O errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "droopvolt", version, about = "Voltage dynamics of droop-controlled power networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate every initial condition, run the scenario's checks and write
    /// CSVs plus bundle.json.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the structural certificates listed in the scenario.
    Certify {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Solve for the decoupled equilibrium and print it with its residual.
    Equilibrium {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run trajectory property checks on fresh runs or on supplied CSVs.
    Verify {
        config: PathBuf,
        /// Trajectory CSV to check instead of integrating (repeatable).
        #[arg(long = "trajectory")]
        trajectories: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a bundled scenario end to end and write plot-ready CSVs.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Recording stride.
    #[arg(long)]
    stride: Option<f64>,
}

impl Overrides {
    fn apply(&self, mut c: ScenarioConfig, origin: &str) -> droopvolt::Result<ScenarioConfig> {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(x) = self.rel_tol {
            c.sim.rel_tol = x;
        }
        if let Some(x) = self.abs_tol {
            c.sim.abs_tol = x;
        }
        if let Some(x) = self.t_end {
            c.sim.t_end = x;
        }
        if let Some(x) = self.stride {
            c.sim.record_stride = x;
        }
        c.validate(origin)?;
        Ok(c)
    }
}

fn load(path: &Path, overrides: &Overrides) -> droopvolt::Result<ScenarioConfig> {
    overrides.apply(config::parse_config(path)?, &path.display().to_string())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Network(_) | Error::Io { .. } | Error::Csv { .. } | Error::Invalid(_) | Error::Dimension { .. } => {
            EXIT_USAGE
        }
        _ => EXIT_CHECK_FAILED,
    }
}

fn report(bundle: &RunBundle, out: &mut dyn Write) -> std::io::Result<i32> {
    for w in &bundle.warnings {
        writeln!(out, "warning: {w}")?;
    }
    for o in bundle.outcomes() {
        writeln!(out, "{}", o.summary())?;
    }
    let failed = bundle.outcomes().filter(|o| !o.holds).count();
    if failed == 0 {
        writeln!(out, "{}: all {} checks hold", bundle.scenario, bundle.outcomes().count())?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "{}: {failed} check(s) failed", bundle.scenario)?;
        Ok(EXIT_CHECK_FAILED)
    }
}

fn default_dir(name: &str) -> PathBuf {
    PathBuf::from("out").join(name)
}

fn simulate(config: &ScenarioConfig, checks: &[CheckName], dir: &Path, out: &mut dyn Write) -> droopvolt::Result<i32> {
    let mut output = run::run_scenario(config, checks)?;
    let files = run::write_outputs(&mut output, dir)?;
    for t in &output.bundle.trajectories {
        writeln!(out, "run {}: V({}) = {:?}", t.index, t.final_time, t.final_state).map_err(stdout_err)?;
    }
    let code = report(&output.bundle, out).map_err(stdout_err)?;
    writeln!(out, "wrote {} files to {}", files.len(), dir.display()).map_err(stdout_err)?;
    Ok(code)
}

fn stdout_err(source: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source,
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> droopvolt::Result<i32> {
    match cmd {
        Command::Simulate { config, out: dir, overrides } => {
            let c = load(&config, &overrides)?;
            let dir = dir.unwrap_or_else(|| default_dir(&c.name));
            simulate(&c, &c.checks.clone(), &dir, out)
        }
        Command::Reproduce { figure, out: dir, overrides } => {
            let c = overrides.apply(config::bundled(figure.name())?, figure.name())?;
            let dir = dir.unwrap_or_else(|| default_dir(figure.name()));
            simulate(&c, &c.checks.clone(), &dir, out)
        }
        Command::Certify { config, overrides } => {
            let c = load(&config, &overrides)?;
            let mut checks: Vec<CheckName> = c.checks.iter().copied().filter(|x| x.is_structural()).collect();
            if checks.is_empty() {
                checks = vec![CheckName::Metzler, CheckName::Gershgorin, CheckName::Hurwitz];
            }
            let bundle = run::certify_scenario(&c, &checks)?;
            report(&bundle, out).map_err(stdout_err)
        }
        Command::Equilibrium { config, overrides } => {
            let c = load(&config, &overrides)?;
            let net = config::build_network(&c)?;
            let frozen = droopvolt::signals::freeze(&net, c.sim.t0)?;
            let eq = certify::solve_equilibrium(&net, &frozen.k, &frozen.v_star)?;
            let b = model::drive_vector(&frozen.k, &frozen.v_star)?;
            let ok = eq.converged(&b) && eq.interior;
            (|| {
                writeln!(out, "v_bar = {:?}", eq.v_bar)?;
                writeln!(out, "residual = {:e}", eq.residual)?;
                writeln!(out, "interior = {}", eq.interior)
            })()
            .map_err(stdout_err)?;
            Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Verify {
            config,
            trajectories,
            out: dir,
            overrides,
        } => {
            let c = load(&config, &overrides)?;
            let mut checks: Vec<CheckName> = c.checks.iter().copied().filter(|x| !x.is_structural()).collect();
            if checks.is_empty() {
                checks.push(CheckName::Positivity);
            }
            if trajectories.is_empty() {
                let dir = dir.unwrap_or_else(|| default_dir(&c.name));
                return simulate(&c, &checks, &dir, out);
            }
            if checks.contains(&CheckName::L1DescentFrozen) {
                writeln!(out, "note: l1_descent_frozen integrates its own drift-only runs").map_err(stdout_err)?;
            }
            let trajs = trajectories
                .iter()
                .map(config::read_trajectory_csv)
                .collect::<droopvolt::Result<Vec<_>>>()?;
            let output = run::check_trajectories(&c, trajs, &checks)?;
            if let Some(dir) = dir {
                std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
                    path: dir.display().to_string(),
                    source,
                })?;
                let path = dir.join("bundle.json");
                std::fs::write(&path, output.bundle.to_json()? + "\n").map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
            report(&output.bundle, out).map_err(stdout_err)
        }
    }
}

/// Runs the CLI on `argv` (program name first), writing normal output to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI against the process's standard streams.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
