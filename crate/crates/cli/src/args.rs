use std::path::PathBuf;

use archflow::{ArchKind, ArchSystem, Direction, Method, Point, PortraitSpec, Rect};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand as ClapSubcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "archflow",
    version,
    about = "Arch ridge-flow analysis and phase portraits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, ClapSubcommand)]
pub enum CliCommand {
    /// Equilibria, linearization and sector census.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        theta: ThetaArgs,
        #[arg(long, value_name = "XMIN,XMAX,YMIN,YMAX", allow_hyphen_values = true)]
        window: Option<String>,
    },
    /// Integrate one trajectory and write it as CSV.
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        theta: ThetaArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_name = "XMIN,XMAX,YMIN,YMAX", allow_hyphen_values = true)]
        window: Option<String>,
        /// Initial point.
        #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
        start: Option<String>,
        /// Stop after this much time; otherwise run until the trajectory leaves the window.
        #[arg(long, value_name = "T")]
        time: Option<f64>,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a phase portrait as SVG.
    Portrait {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        theta: ThetaArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_name = "XMIN,XMAX,YMIN,YMAX", allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long, value_name = "N")]
        seeds_above: Option<usize>,
        #[arg(long, value_name = "N")]
        seeds_below: Option<usize>,
        /// SVG destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Arch category and crest opening angle.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        theta: ThetaArgs,
    },
    /// Classify a geometric range of parameters.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "THETA", allow_negative_numbers = true)]
        theta_from: Option<f64>,
        #[arg(long, value_name = "THETA", allow_negative_numbers = true)]
        theta_to: Option<f64>,
        #[arg(long, value_name = "N")]
        steps: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat TOML file with default values; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long, allow_negative_numbers = true, conflicts_with = "preset")]
    pub theta: Option<f64>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Fixed step (rk4) or initial step (rk45).
    #[arg(long, value_name = "H")]
    pub step: Option<f64>,
    /// Relative and absolute tolerance for rk45.
    #[arg(long, value_name = "T")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Plain,
    Tented,
    Strong,
}

impl Preset {
    pub fn theta(self) -> f64 {
        let kind = match self {
            Preset::Plain => ArchKind::Plain,
            Preset::Tented => ArchKind::Tented,
            Preset::Strong => ArchKind::Strong,
        };
        kind.preset_theta()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionArg {
    Forward,
    Backward,
}

/// Keys accepted in a `--config` file. Keys a subcommand has no use for are
/// ignored so one file can serve every subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub theta: Option<f64>,
    pub preset: Option<Preset>,
    pub theta_from: Option<f64>,
    pub theta_to: Option<f64>,
    pub steps: Option<usize>,
    pub window: Option<[f64; 4]>,
    pub seeds_above: Option<usize>,
    pub seeds_below: Option<usize>,
    pub method: Option<MethodArg>,
    pub step: Option<f64>,
    pub tol: Option<f64>,
    pub format: Option<Format>,
    pub start: Option<[f64; 2]>,
    pub time: Option<f64>,
    pub direction: Option<DirectionArg>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Analyze,
    Trace,
    Portrait,
    Classify,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSpec {
    Single(f64),
    /// `steps` geometrically spaced values from `from` to `to` inclusive.
    Range {
        from: f64,
        to: f64,
        steps: usize,
    },
}

impl ThetaSpec {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ThetaSpec::Single(t) => vec![t],
            ThetaSpec::Range { from, steps: 1, .. } => vec![from],
            ThetaSpec::Range { from, to, steps } => {
                let ratio = (to / from).ln() / (steps - 1) as f64;
                (0..steps)
                    .map(|k| match k {
                        0 => from,
                        k if k == steps - 1 => to,
                        k => from * (ratio * k as f64).exp(),
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solver {
    pub method: Method,
    pub step: Option<f64>,
    pub tol: Option<f64>,
}

/// A fully resolved, validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub subcommand: Subcommand,
    pub theta: ThetaSpec,
    pub window: Rect,
    pub seeds_above: usize,
    pub seeds_below: usize,
    pub solver: Solver,
    pub start: Option<Point>,
    pub time: Option<f64>,
    pub direction: Direction,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_HALF_WIDTH: f64 = 4.0;

pub fn usage_error(msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(ErrorKind::ValueValidation, msg)
}

/// Parses command-line arguments (program name first) without reading any
/// config file.
pub fn parse_args<I, S>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}

/// Parses arguments and merges them over `config_text` (TOML) and the
/// built-in defaults. Any `--config` path among the arguments is not read
/// here; pass its contents as `config_text`.
pub fn parse_invocation<I, S>(args: I, config_text: Option<&str>) -> Result<Command, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    resolve(parse_args(args)?, config_text)
}

impl Cli {
    pub fn config_path(&self) -> Option<&PathBuf> {
        let common = match &self.command {
            CliCommand::Analyze { common, .. }
            | CliCommand::Trace { common, .. }
            | CliCommand::Portrait { common, .. }
            | CliCommand::Classify { common, .. }
            | CliCommand::Sweep { common, .. } => common,
        };
        common.config.as_ref()
    }
}

pub fn parse_config(text: &str) -> Result<FileConfig, clap::Error> {
    toml::from_str(text).map_err(|e| usage_error(format!("invalid config file: {}", e.message())))
}

pub fn resolve(cli: Cli, config_text: Option<&str>) -> Result<Command, clap::Error> {
    let file = match config_text {
        Some(text) => parse_config(text)?,
        None => FileConfig::default(),
    };
    let mut cmd = Command {
        subcommand: Subcommand::Classify,
        theta: ThetaSpec::Single(1.0),
        window: match file.window {
            Some(w) => parse_window_values(w)?,
            None => Rect::symmetric(DEFAULT_HALF_WIDTH).expect("static window"),
        },
        seeds_above: file.seeds_above.unwrap_or(8),
        seeds_below: file.seeds_below.unwrap_or(4),
        solver: Solver {
            method: method(file.method.unwrap_or(MethodArg::Rk45)),
            step: file.step,
            tol: file.tol,
        },
        start: file.start.map(|[x, y]| Point::new(x, y)),
        time: file.time,
        direction: direction(file.direction.unwrap_or(DirectionArg::Forward)),
        out: file.out.clone(),
        format: file.format.unwrap_or(Format::Human),
    };

    let common = match cli.command {
        CliCommand::Analyze {
            common,
            theta,
            window,
        } => {
            cmd.subcommand = Subcommand::Analyze;
            cmd.theta = single_theta(&theta, &file)?;
            set_window(&mut cmd, window.as_deref())?;
            common
        }
        CliCommand::Trace {
            common,
            theta,
            solver,
            window,
            start,
            time,
            direction: dir,
            out,
        } => {
            cmd.subcommand = Subcommand::Trace;
            cmd.theta = single_theta(&theta, &file)?;
            set_solver(&mut cmd, &solver);
            set_window(&mut cmd, window.as_deref())?;
            if let Some(s) = start {
                cmd.start = Some(parse_point(&s)?);
            }
            cmd.time = time.or(cmd.time);
            if let Some(d) = dir {
                cmd.direction = direction(d);
            }
            cmd.out = out.or(cmd.out);
            match cmd.start {
                None => return Err(usage_error("trace needs --start X,Y")),
                Some(p) if !p.is_finite() => return Err(usage_error("--start must be finite")),
                _ => {}
            }
            if let Some(t) = cmd.time {
                if !(t.is_finite() && t > 0.0) {
                    return Err(usage_error(format!("--time must be > 0, got {t}")));
                }
            }
            common
        }
        CliCommand::Portrait {
            common,
            theta,
            solver,
            window,
            seeds_above,
            seeds_below,
            out,
        } => {
            cmd.subcommand = Subcommand::Portrait;
            cmd.theta = single_theta(&theta, &file)?;
            set_solver(&mut cmd, &solver);
            set_window(&mut cmd, window.as_deref())?;
            cmd.seeds_above = seeds_above.unwrap_or(cmd.seeds_above);
            cmd.seeds_below = seeds_below.unwrap_or(cmd.seeds_below);
            cmd.out = out.or(cmd.out);
            common
        }
        CliCommand::Classify { common, theta } => {
            cmd.subcommand = Subcommand::Classify;
            cmd.theta = single_theta(&theta, &file)?;
            common
        }
        CliCommand::Sweep {
            common,
            theta_from,
            theta_to,
            steps,
        } => {
            cmd.subcommand = Subcommand::Sweep;
            let from = theta_from.or(file.theta_from);
            let to = theta_to.or(file.theta_to);
            let steps = steps.or(file.steps);
            let (Some(from), Some(to), Some(steps)) = (from, to, steps) else {
                return Err(usage_error(
                    "sweep needs --theta-from, --theta-to and --steps",
                ));
            };
            check_theta(from)?;
            check_theta(to)?;
            if steps == 0 {
                return Err(usage_error("--steps must be at least 1"));
            }
            if from > to {
                return Err(usage_error(format!(
                    "--theta-from ({from}) exceeds --theta-to ({to})"
                )));
            }
            cmd.theta = ThetaSpec::Range { from, to, steps };
            common
        }
    };
    cmd.format = common.format.unwrap_or(cmd.format);
    check_solver(&cmd.solver)?;
    if cmd.subcommand == Subcommand::Portrait {
        if let Err(e) = portrait_spec(&cmd).validate() {
            return Err(usage_error(e));
        }
    }
    Ok(cmd)
}

/// The portrait described by a resolved command.
pub fn portrait_spec(cmd: &Command) -> PortraitSpec<f64> {
    let theta = match cmd.theta {
        ThetaSpec::Single(t) => t,
        ThetaSpec::Range { from, .. } => from,
    };
    let mut spec = PortraitSpec::new(ArchSystem::new(theta).expect("validated theta"));
    spec.window = cmd.window;
    spec.seeds_above = cmd.seeds_above;
    spec.seeds_below = cmd.seeds_below;
    spec.integrator.method = cmd.solver.method;
    if let Some(h) = cmd.solver.step {
        spec.integrator.step = h;
    }
    if let Some(t) = cmd.solver.tol {
        spec.integrator.rel_tol = t;
        spec.integrator.abs_tol = t;
    }
    spec
}

fn single_theta(args: &ThetaArgs, file: &FileConfig) -> Result<ThetaSpec, clap::Error> {
    let theta = match (args.theta, args.preset) {
        (Some(t), _) => t,
        (None, Some(p)) => p.theta(),
        (None, None) => match (file.theta, file.preset) {
            (Some(_), Some(_)) => {
                return Err(usage_error("config file sets both theta and preset"))
            }
            (Some(t), None) => t,
            (None, Some(p)) => p.theta(),
            (None, None) => return Err(usage_error("missing --theta or --preset")),
        },
    };
    check_theta(theta)?;
    Ok(ThetaSpec::Single(theta))
}

fn check_theta(theta: f64) -> Result<(), clap::Error> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(usage_error(format!(
            "theta must be a finite number > 0, got {theta}"
        )))
    }
}

fn check_solver(s: &Solver) -> Result<(), clap::Error> {
    if let Some(h) = s.step {
        if !(h.is_finite() && h > 0.0) {
            return Err(usage_error(format!("--step must be > 0, got {h}")));
        }
    }
    if let Some(t) = s.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(usage_error(format!("--tol must be > 0, got {t}")));
        }
    }
    Ok(())
}

fn set_solver(cmd: &mut Command, args: &SolverArgs) {
    if let Some(m) = args.method {
        cmd.solver.method = method(m);
    }
    cmd.solver.step = args.step.or(cmd.solver.step);
    cmd.solver.tol = args.tol.or(cmd.solver.tol);
}

fn set_window(cmd: &mut Command, flag: Option<&str>) -> Result<(), clap::Error> {
    if let Some(text) = flag {
        let values = parse_list::<4>(text, "--window")?;
        cmd.window = parse_window_values(values)?;
    }
    Ok(())
}

fn parse_window_values([x_min, x_max, y_min, y_max]: [f64; 4]) -> Result<Rect, clap::Error> {
    Rect::new(x_min, x_max, y_min, y_max).map_err(usage_error)
}

fn parse_point(text: &str) -> Result<Point, clap::Error> {
    let [x, y] = parse_list::<2>(text, "--start")?;
    Ok(Point::new(x, y))
}

fn parse_list<const N: usize>(text: &str, flag: &str) -> Result<[f64; N], clap::Error> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage_error(format!("{flag}: {e} in `{text}`")))?;
    values.try_into().map_err(|v: Vec<f64>| {
        usage_error(format!(
            "{flag} expects {N} comma-separated numbers, got {}",
            v.len()
        ))
    })
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Rk4 => Method::Rk4,
        MethodArg::Rk45 => Method::Rk45,
    }
}

fn direction(d: DirectionArg) -> Direction {
    match d {
        DirectionArg::Forward => Direction::Forward,
        DirectionArg::Backward => Direction::Backward,
    }
}
