//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

// `ensure!` negates comparisons on purpose so that NaN fails.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use archflow::*;
use archflow_cli::run::svg_size;
use common::*;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const THETAS: [f64; 3] = [0.001, 0.5, 5.0];

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn arch(theta: f64) -> Arch {
    ArchSystem::new(theta).unwrap()
}

fn equilibrium_analysis() -> Outcome {
    for theta in THETAS {
        let s = arch(theta);
        let eqs = analyze_arch(&s, &Window::symmetric(4.0).unwrap(), 0.1, 720)
            .map_err(|e| e.to_string())?;
        ensure!(eqs.len() == 1, "theta {theta}: {} equilibria", eqs.len());
        let e = &eqs[0];
        ensure!(
            e.location.distance(&Point2::origin()) <= 1e-10,
            "location {}",
            e.location
        );
        ensure!(
            e.jacobian == Mat2::new(0.0, 0.0, -theta, 0.0),
            "jacobian {:?}",
            e.jacobian
        );
        let lambda = e
            .eigen
            .re
            .iter()
            .chain(&e.eigen.im)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        ensure!(lambda <= 1e-12, "eigenvalues {:?}", e.eigen);
        ensure!(
            e.class == EquilibriumClass::DegenerateNonhyperbolic,
            "class {}",
            e.class
        );
        let census = e.census.ok_or("missing census")?;
        ensure!(
            census == SectorCensus::new(2, 0, 0, 2) && census.is_cusp,
            "census {census:?}"
        );
    }
    Ok("unique cusp at the origin, nilpotent Jacobian, 2 hyperbolic sectors".into())
}

fn conservation() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    let bounds = Window::symmetric(4.0).unwrap();
    let cfg = IntegratorConfig::rk45(1e-10).with_stop_box(bounds);
    let mut worst = 0.0f64;
    for theta in THETAS {
        let s = arch(theta);
        for _ in 0..50 {
            let start = Point2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let traj = integrate(&s, start, &cfg).map_err(|e| format!("{start}: {e}"))?;
            ensure!(
                traj.stop_reason == StopReason::BoxExit,
                "{start}: stopped by {}",
                traj.stop_reason.as_str()
            );
            let h0 = s.first_integral(start);
            // The final sample is the refined exit point, still on the orbit.
            let drift = traj
                .points()
                .map(|p| (s.first_integral(p) - h0).abs())
                .fold(0.0, f64::max);
            ensure!(
                drift <= 1e-8,
                "theta {theta} start {start}: drift {drift:e}"
            );
            worst = worst.max(drift);
        }
    }
    Ok(format!("150 trajectories, max |H(t) - H(0)| = {worst:.1e}"))
}

fn convergence_order() -> Outcome {
    let s = arch(0.5);
    let start = Point2::new(0.0, 1.0);
    let run = |cfg: Config| integrate(&s, start, &cfg.with_stop_time(1.0)).map(|t| t.last().p);
    let reference = run(IntegratorConfig::rk45(1e-12)).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        errors.push(
            run(IntegratorConfig::rk4(h))
                .map_err(|e| e.to_string())?
                .distance(&reference),
        );
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    ensure!(
        ratios.iter().all(|r| (12.0..=20.0).contains(r)),
        "ratios {ratios:?}"
    );
    Ok(format!("error ratios {:.2}, {:.2}", ratios[0], ratios[1]))
}

fn separatrix() -> Outcome {
    for theta in THETAS {
        let seps = trace_separatrix(theta, &Window::symmetric(4.0).unwrap(), 100)
            .map_err(|e| e.to_string())?;
        for branch in [&seps.left, &seps.right] {
            ensure!(branch.len() == 100, "{} points", branch.len());
            for p in branch {
                let h = arch_first_integral(theta, *p).unwrap();
                let closed = -(1.5 * theta * p.x * p.x).cbrt();
                ensure!(h.abs() <= 1e-10, "theta {theta}: H = {h:e} at {p}");
                ensure!(
                    (p.y - closed).abs() <= 1e-10,
                    "theta {theta}: {p} off the curve"
                );
            }
        }
        let s = arch(theta);
        let start = Point2::new(-2.0, arch_separatrix_height(theta, -2.0).unwrap());
        let big = 2.0 * start.y.abs().max(4.0);
        let cfg = IntegratorConfig::rk45(1e-10)
            .with_stop_box(Window::symmetric(big).unwrap())
            .with_equilibrium_radius(1e-3);
        let traj = integrate(&s, start, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            traj.stop_reason == StopReason::EquilibriumReached,
            "theta {theta}: stopped by {}",
            traj.stop_reason.as_str()
        );
    }
    Ok("200 points per preset on H = 0; stable branch reaches the cusp".into())
}

fn angle_regimes() -> Outcome {
    let (a, h) = (DEFAULT_APEX, DEFAULT_FRACTION);
    let closed = |theta: f64| {
        let m = (2.0 * theta * (1.0 - h * h * h) / (3.0 * a)).sqrt() / (h * h);
        180.0 - 2.0 * m.atan().to_degrees()
    };
    let thetas = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    let mut angles = Vec::new();
    for theta in thetas {
        let deg = opening_angle(theta, a, h).map_err(|e| e.to_string())?;
        ensure!(
            (deg - closed(theta)).abs() <= 1e-4,
            "theta {theta}: {deg} vs {}",
            closed(theta)
        );
        angles.push(deg);
    }
    ensure!(angles[0] > 150.0, "plain angle {}", angles[0]);
    ensure!(angles[6] < 30.0, "strong angle {}", angles[6]);
    ensure!(
        angles.windows(2).all(|w| w[1] < w[0]),
        "not decreasing: {angles:?}"
    );
    Ok(format!(
        "{:.3} deg at 0.001, {:.3} deg at 5",
        angles[0], angles[6]
    ))
}

fn category_presets() -> Outcome {
    for (theta, kind) in [
        (0.001, ArchKind::Plain),
        (0.5, ArchKind::Tented),
        (5.0, ArchKind::Strong),
    ] {
        let got = classify_arch(theta).map_err(|e| e.to_string())?.kind;
        ensure!(got == kind, "theta {theta}: {got}");
    }
    Ok("plain, tented, strong".into())
}

fn portrait_fidelity() -> Outcome {
    for name in PRESETS {
        let cmd = archflow_cli::parse_invocation(["archflow", "portrait", "--preset", name], None)
            .map_err(|e| e.to_string())?;
        let spec = archflow_cli::args::portrait_spec(&cmd);
        let scene = build_portrait(&spec).map_err(|e| e.to_string())?;
        let count = |role| scene.paths.iter().filter(|p| p.role == role).count();
        ensure!(
            count(Role::Separatrix) == 2,
            "{name}: {} separatrices",
            count(Role::Separatrix)
        );
        ensure!(
            count(Role::UpperSector) == spec.seeds_above
                && count(Role::LowerSector) == spec.seeds_below,
            "{name}: seed path counts"
        );
        for path in &scene.paths {
            for p in &path.points {
                let h = spec.system.first_integral(*p);
                let ok = match path.role {
                    Role::UpperSector => h > -1e-9,
                    Role::LowerSector => h < 1e-9,
                    Role::Separatrix => h.abs() <= 1e-10,
                };
                ensure!(
                    ok,
                    "{name}: {} vertex {p} has H = {h:e}",
                    path.role.as_str()
                );
            }
            if path.role == Role::UpperSector {
                let pts = &path.points;
                let top = (0..pts.len())
                    .max_by(|&i, &j| pts[i].y.total_cmp(&pts[j].y))
                    .unwrap();
                let axis = (0..pts.len())
                    .min_by(|&i, &j| pts[i].x.abs().total_cmp(&pts[j].x.abs()))
                    .unwrap();
                ensure!(
                    top.abs_diff(axis) <= 1,
                    "{name}: apex at {} but axis nearest {}",
                    pts[top],
                    pts[axis]
                );
            }
        }
        let (w, h) = svg_size(&spec.window);
        let svg = render_svg(&scene, w, h);
        let doc = roxmltree::Document::parse(&svg).map_err(|e| format!("{name}: {e}"))?;
        let polylines = doc
            .descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count();
        ensure!(
            polylines == scene.paths.len(),
            "{name}: {polylines} polylines"
        );
        let again = render_svg(&build_portrait(&spec).map_err(|e| e.to_string())?, w, h);
        ensure!(again == svg, "{name}: repeated render differs");
        let cli = run(&["portrait", "--preset", name]);
        ensure!(
            stdout(&cli) == svg,
            "{name}: CLI output differs from library render"
        );
        check_golden(&format!("portrait_{name}.svg"), &svg)?;
    }
    Ok("3 presets: path counts, role signs, apexes, golden SVGs".into())
}

fn reversal_symmetry() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let cfg = IntegratorConfig::rk45(1e-11).with_stop_time(1.0);
    let s = arch(0.5);
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    while checked < 20 {
        let p0 = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let there = integrate(&s, p0, &cfg).map_err(|e| e.to_string())?;
        // Orbits escaping toward finite-time blow-up are not comparable.
        if there.points().any(|p| p.x.abs().max(p.y.abs()) > 10.0) {
            skipped += 1;
            continue;
        }
        let p1 = there.last().p;
        let back = integrate(&s, Point2::new(-p1.x, p1.y), &cfg)
            .map_err(|e| e.to_string())?
            .last()
            .p;
        let err = back.distance(&Point2::new(-p0.x, p0.y));
        ensure!(err <= 1e-6, "{p0}: mirrored return off by {err:e}");
        worst = worst.max(err);
        checked += 1;
    }
    Ok(format!(
        "20 starts, max error {worst:.1e} ({skipped} unbounded skipped)"
    ))
}

fn cli_black_box() -> Outcome {
    let code = |args: &[&str]| run(args).status.code();
    ensure!(
        code(&["classify", "--preset", "plain"]) == Some(0),
        "success is not 0"
    );
    ensure!(
        code(&["classify", "--theta", "-1"]) == Some(2),
        "bad theta is not 2"
    );
    ensure!(
        code(&["classify", "--nope"]) == Some(2),
        "unknown flag is not 2"
    );
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let blocked = dir.path().join("missing").join("arch.svg");
    ensure!(
        code(&[
            "portrait",
            "--preset",
            "plain",
            "--out",
            blocked.to_str().unwrap()
        ]) == Some(1),
        "I/O failure is not 1"
    );
    for name in PRESETS {
        let analyze = run(&["analyze", "--preset", name, "--format", "machine"]);
        check_golden(&format!("analyze_{name}.txt"), &stdout(&analyze))?;
        let classify = run(&["classify", "--preset", name, "--format", "machine"]);
        check_golden(&format!("classify_{name}.txt"), &stdout(&classify))?;
    }
    Ok("exit codes 0/1/2, machine goldens for 3 presets".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("equilibrium analysis", equilibrium_analysis),
        ("conservation oracle", conservation),
        ("rk4 convergence order", convergence_order),
        ("separatrix correctness", separatrix),
        ("opening angle regimes", angle_regimes),
        ("category presets", category_presets),
        ("portrait fidelity", portrait_fidelity),
        ("reversal symmetry", reversal_symmetry),
        ("cli black box", cli_black_box),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
