use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use archflow::{
    analyze_arch, build_portrait, classify_arch, export_trajectory_csv, format_sig17, integrate,
    render_svg, Arch, Config, EquilibriumPoint, Method,
};

use crate::args::{portrait_spec, Command, Format, Subcommand, ThetaSpec};

/// Radius of the circle the sector census samples.
pub const CENSUS_RADIUS: f64 = 0.1;
pub const CENSUS_SAMPLES: usize = 720;
pub const SVG_WIDTH: u32 = 800;
const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] archflow::Error<f64>),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write report: {0}")]
    Report(#[from] std::io::Error),
}

/// Runs a resolved command, writing its report (or the document itself when
/// no `--out` is given) to `stdout`.
pub fn execute(cmd: &Command, stdout: &mut dyn Write) -> Result<(), RunError> {
    match cmd.subcommand {
        Subcommand::Analyze => analyze(cmd, stdout),
        Subcommand::Trace => trace(cmd, stdout),
        Subcommand::Portrait => portrait(cmd, stdout),
        Subcommand::Classify | Subcommand::Sweep => classify(cmd, stdout),
    }
}

/// `%.17g` with negative zero folded into zero.
fn num(v: f64) -> String {
    format_sig17(if v == 0.0 { 0.0 } else { v })
}

fn angle(deg: f64) -> String {
    format!("{deg:.6}")
}

fn single(cmd: &Command) -> f64 {
    match cmd.theta {
        ThetaSpec::Single(t) => t,
        ThetaSpec::Range { from, .. } => from,
    }
}

fn analyze(cmd: &Command, stdout: &mut dyn Write) -> Result<(), RunError> {
    let theta = single(cmd);
    let system = Arch::new(theta)?;
    let eqs = analyze_arch(&system, &cmd.window, CENSUS_RADIUS, CENSUS_SAMPLES)?;
    let text = match cmd.format {
        Format::Machine => analyze_machine(theta, &eqs),
        Format::Human => analyze_human(theta, &eqs),
    };
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

fn analyze_machine(theta: f64, eqs: &[EquilibriumPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "theta={}", num(theta));
    let _ = writeln!(out, "equilibria={}", eqs.len());
    for (i, e) in eqs.iter().enumerate() {
        let j = &e.jacobian;
        let fields = [
            ("x", num(e.location.x)),
            ("y", num(e.location.y)),
            ("j11", num(j.a11)),
            ("j12", num(j.a12)),
            ("j21", num(j.a21)),
            ("j22", num(j.a22)),
            ("lambda1_re", num(e.eigen.re[0])),
            ("lambda1_im", num(e.eigen.im[0])),
            ("lambda2_re", num(e.eigen.re[1])),
            ("lambda2_im", num(e.eigen.im[1])),
            ("class", e.class.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(out, "eq{i}.{k}={v}");
        }
        if let Some(c) = e.census {
            let _ = writeln!(out, "eq{i}.hyperbolic={}", c.hyperbolic);
            let _ = writeln!(out, "eq{i}.elliptic={}", c.elliptic);
            let _ = writeln!(out, "eq{i}.parabolic={}", c.parabolic);
            let _ = writeln!(out, "eq{i}.separatrices={}", c.separatrices);
            let _ = writeln!(out, "eq{i}.is_cusp={}", c.is_cusp);
        }
    }
    out
}

fn analyze_human(theta: f64, eqs: &[EquilibriumPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "arch system, theta = {}", num(theta));
    let _ = writeln!(out, "{} equilibrium point(s)", eqs.len());
    for e in eqs {
        let j = &e.jacobian;
        let _ = writeln!(out, "\n({}, {})", num(e.location.x), num(e.location.y));
        let _ = writeln!(
            out,
            "  jacobian     [[{}, {}], [{}, {}]]",
            num(j.a11),
            num(j.a12),
            num(j.a21),
            num(j.a22)
        );
        let eig = |k: usize| match e.eigen.im[k] {
            0.0 => num(e.eigen.re[k]),
            im => format!(
                "{} {} {}i",
                num(e.eigen.re[k]),
                if im < 0.0 { '-' } else { '+' },
                num(im.abs())
            ),
        };
        let _ = writeln!(out, "  eigenvalues  {}, {}", eig(0), eig(1));
        let _ = writeln!(out, "  class        {}", e.class);
        if let Some(c) = e.census {
            let _ = writeln!(
                out,
                "  sectors      {} hyperbolic, {} elliptic, {} parabolic; {} separatrices",
                c.hyperbolic, c.elliptic, c.parabolic, c.separatrices
            );
            let _ = writeln!(
                out,
                "  cusp         {}",
                if c.is_cusp { "yes" } else { "no" }
            );
        }
    }
    out
}

fn classify(cmd: &Command, stdout: &mut dyn Write) -> Result<(), RunError> {
    let thetas = cmd.theta.values();
    let mut out = String::new();
    for (i, &theta) in thetas.iter().enumerate() {
        let c = classify_arch(theta)?;
        let deg = angle(c.opening_angle_deg);
        match (cmd.format, cmd.subcommand) {
            (Format::Machine, Subcommand::Sweep) => {
                let _ = writeln!(
                    out,
                    "row={i} theta={} category={} opening_angle_deg={deg}",
                    num(theta),
                    c.kind
                );
            }
            (Format::Machine, _) => {
                let _ = writeln!(
                    out,
                    "theta={}\ncategory={}\nopening_angle_deg={deg}",
                    num(theta),
                    c.kind
                );
            }
            (Format::Human, _) => {
                let _ = writeln!(
                    out,
                    "theta {:<12} {:<7} opening angle {deg} deg",
                    num(theta),
                    c.kind
                );
            }
        }
    }
    stdout.write_all(out.as_bytes())?;
    Ok(())
}

fn trace(cmd: &Command, stdout: &mut dyn Write) -> Result<(), RunError> {
    let theta = single(cmd);
    let system = Arch::new(theta)?;
    let mut config = match cmd.solver.method {
        Method::Rk4 => Config::rk4(cmd.solver.step.unwrap_or(1e-2)),
        Method::Rk45 => {
            let mut c = Config::rk45(cmd.solver.tol.unwrap_or(TRACE_TOL));
            if let Some(h) = cmd.solver.step {
                c.step = h;
            }
            c
        }
    };
    config = config
        .with_stop_box(cmd.window)
        .with_direction(cmd.direction);
    if let Some(t) = cmd.time {
        config = config.with_stop_time(t);
    }
    let start = cmd.start.expect("validated start");
    let traj = integrate(&system, start, &config)?;
    let csv = export_trajectory_csv(&traj, theta)?;
    match &cmd.out {
        None => stdout.write_all(csv.as_bytes())?,
        Some(path) => {
            write_file(path, &csv)?;
            let last = traj.last();
            let report = match cmd.format {
                Format::Machine => format!(
                    "out={}\nsamples={}\nstop_reason={}\nt_end={}\n",
                    path.display(),
                    traj.len(),
                    traj.stop_reason.as_str(),
                    num(last.t)
                ),
                Format::Human => format!(
                    "wrote {} samples to {} (stopped: {}, t = {})\n",
                    traj.len(),
                    path.display(),
                    traj.stop_reason.as_str(),
                    num(last.t)
                ),
            };
            stdout.write_all(report.as_bytes())?;
        }
    }
    Ok(())
}

/// Pixel size of the SVG: fixed width, height following the window aspect.
pub fn svg_size(window: &archflow::Rect) -> (u32, u32) {
    let h = (f64::from(SVG_WIDTH) * window.height() / window.width()).round();
    (SVG_WIDTH, h.clamp(1.0, 100_000.0) as u32)
}

fn portrait(cmd: &Command, stdout: &mut dyn Write) -> Result<(), RunError> {
    let spec = portrait_spec(cmd);
    let scene = build_portrait(&spec)?;
    let (w, h) = svg_size(&spec.window);
    let svg = render_svg(&scene, w, h);
    match &cmd.out {
        None => stdout.write_all(svg.as_bytes())?,
        Some(path) => {
            write_file(path, &svg)?;
            let report = match cmd.format {
                Format::Machine => format!(
                    "out={}\npaths={}\nbytes={}\n",
                    path.display(),
                    scene.paths.len(),
                    svg.len()
                ),
                Format::Human => {
                    format!("wrote {} paths to {}\n", scene.paths.len(), path.display())
                }
            };
            stdout.write_all(report.as_bytes())?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}
