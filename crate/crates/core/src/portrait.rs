//! Styled phase portraits of the arch system and their SVG / CSV encodings.
//!
//! A portrait draws the two separatrices of the cusp in red, a bundle of
//! upper-sector trajectories (`H > 0`) in green and a bundle of lower-sector
//! trajectories (`H < 0`) in brown. Every seed is integrated in both time
//! directions until it leaves the frame, so each line spans the window.

use std::fmt::Write as _;

use crate::analyze::trace_separatrix;
use crate::error::{domain, Error, Result};
use crate::integrate::{integrate, Direction, IntegratorConfig, Method, Trajectory};
use crate::scalar::Real;
use crate::sysdef::{arch_first_integral, ArchSystem, Point2};

pub use crate::sysdef::Window;

/// Fraction by which the stop box exceeds the drawing window.
pub const FRAME_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Separatrix,
    UpperSector,
    LowerSector,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Separatrix => "separatrix",
            Role::UpperSector => "upper_sector",
            Role::LowerSector => "lower_sector",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub color: String,
    pub width: f64,
}

impl Stroke {
    pub fn new(color: impl Into<String>, width: f64) -> Self {
        Self {
            color: color.into(),
            width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    pub separatrix: Stroke,
    pub upper: Stroke,
    pub lower: Stroke,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            separatrix: Stroke::new("#cc0000", 2.4),
            upper: Stroke::new("#1a7f1a", 1.2),
            lower: Stroke::new("#8b5a2b", 1.2),
        }
    }
}

impl Style {
    pub fn stroke(&self, role: Role) -> &Stroke {
        match role {
            Role::Separatrix => &self.separatrix,
            Role::UpperSector => &self.upper,
            Role::LowerSector => &self.lower,
        }
    }
}

/// Everything needed to draw one portrait.
#[derive(Debug, Clone, PartialEq)]
pub struct PortraitSpec<T> {
    pub system: ArchSystem<T>,
    pub window: Window<T>,
    pub seeds_above: usize,
    pub seeds_below: usize,
    /// Fraction of each seed level range left empty at both ends, in `[0, 0.5)`.
    pub seed_edge_inset: T,
    /// Direction and stop box are set per seed; a missing stop box defaults
    /// to the window inflated by [`FRAME_MARGIN`].
    pub integrator: IntegratorConfig<T>,
    pub separatrix_resolution: usize,
    pub arrowheads: bool,
    pub style: Style,
}

impl<T: Real> PortraitSpec<T> {
    /// Defaults: window `[-4, 4]²`, 8 upper and 4 lower seeds, RK45 at 1e-9.
    pub fn new(system: ArchSystem<T>) -> Self {
        Self {
            system,
            window: Window::symmetric(T::lit(4.0)).expect("static window"),
            seeds_above: 8,
            seeds_below: 4,
            seed_edge_inset: T::lit(0.05),
            integrator: IntegratorConfig::rk45(T::lit(1e-9)),
            separatrix_resolution: 200,
            arrowheads: true,
            style: Style::default(),
        }
    }

    pub fn validate(&self) -> Result<(), T> {
        self.window.validate()?;
        let w = &self.window;
        if !(w.x_min < T::zero()
            && w.x_max > T::zero()
            && w.y_min < T::zero()
            && w.y_max > T::zero())
        {
            return Err(domain(
                "portrait window must contain the origin in its interior",
            ));
        }
        if !(self.seed_edge_inset >= T::zero() && self.seed_edge_inset < T::lit(0.5)) {
            return Err(domain(format!(
                "seed_edge_inset must lie in [0, 0.5), got {}",
                self.seed_edge_inset
            )));
        }
        if self.separatrix_resolution < 2 {
            return Err(domain("separatrix_resolution must be at least 2"));
        }
        self.seed_config(Direction::Forward).validate()
    }

    /// The window the trajectories are integrated in.
    pub fn stop_box(&self) -> Window<T> {
        self.integrator
            .stop_box
            .unwrap_or_else(|| self.window.inflate(T::lit(FRAME_MARGIN)))
    }

    fn seed_config(&self, direction: Direction) -> IntegratorConfig<T> {
        let mut cfg = self.integrator.clone();
        cfg.stop_box = Some(self.stop_box());
        cfg.direction = direction;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyledPath<T> {
    pub role: Role,
    pub points: Vec<Point2<T>>,
    pub color: String,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneMetadata {
    pub theta: f64,
    pub seeds: String,
    pub integrator: String,
}

/// A drawable portrait: separatrices first, then upper paths by seed index,
/// then lower paths by seed index.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T> {
    pub window: Window<T>,
    pub paths: Vec<StyledPath<T>>,
    pub metadata: SceneMetadata,
    pub arrowheads: bool,
}

/// Where the level set `H = h` meets the window boundary on its far side.
///
/// Level sets of `H` are even in `x` and, on either side of the vertical axis,
/// move monotonically away from the origin's height as `|x|` grows. Walking
/// outward along the wider half of the window, the curve leaves through that
/// half's side edge or through the bottom edge.
fn boundary_entry<T: Real>(system: &ArchSystem<T>, w: &Window<T>, h: T) -> Point2<T> {
    let theta = system.theta();
    let three = T::lit(3.0);
    let far = if -w.x_min >= w.x_max {
        w.x_min
    } else {
        w.x_max
    };
    let y_far = (three * h - T::lit(1.5) * theta * far * far).cbrt();
    if y_far >= w.y_min {
        return Point2::new(far, y_far.min(w.y_max));
    }
    let x = (T::lit(2.0) * (h - w.y_min.powi(3) / three) / theta)
        .max(T::zero())
        .sqrt();
    Point2::new(x.copysign(far), w.y_min)
}

/// Initial conditions of the portrait's trajectory bundles.
///
/// Upper seeds sit on orbits whose crests `(3H)^(1/3)` are evenly spaced up
/// to the highest crest that still enters the window; lower seeds on orbits
/// whose troughs are evenly spaced down to the bottom edge. A fraction
/// `seed_edge_inset` of each range is left empty at both ends. Each seed is
/// placed where its orbit crosses the window boundary, so no two seeds share
/// an orbit.
pub fn seed_points<T: Real>(spec: &PortraitSpec<T>) -> Vec<(Point2<T>, Role)> {
    let w = &spec.window;
    let system = &spec.system;
    let three = T::lit(3.0);
    let far = w.x_min.abs().max(w.x_max.abs());
    let top_crest = (three * system.first_integral(Point2::new(far, w.y_max))).cbrt();
    let bottom_trough = -w.y_min;

    let inset = spec.seed_edge_inset;
    let span = T::one() - inset - inset;
    let levels = move |n: usize, extent: T| {
        let denom = T::from_usize(n + 1).unwrap();
        (0..n).map(move |k| extent * (inset + span * T::from_usize(k + 1).unwrap() / denom))
    };
    let upper = levels(spec.seeds_above, top_crest).map(|a| {
        let h = a * a * a / three;
        (boundary_entry(system, w, h), Role::UpperSector)
    });
    let lower = levels(spec.seeds_below, bottom_trough).map(|d| {
        let h = -d * d * d / three;
        (boundary_entry(system, w, h), Role::LowerSector)
    });
    upper.chain(lower).collect()
}

fn integrator_summary<T: Real>(cfg: &IntegratorConfig<T>) -> String {
    match cfg.method {
        Method::Rk4 => format!("rk4 step={}", cfg.step),
        Method::Rk45 => format!(
            "rk45 rel_tol={:e} abs_tol={:e} initial_step={}",
            cfg.rel_tol, cfg.abs_tol, cfg.step
        ),
    }
}

/// Integrates every seed both ways and assembles the scene.
///
/// Per-seed integrations run on scoped threads; results are gathered in seed
/// order, so the scene does not depend on scheduling.
pub fn build_portrait<T: Real>(spec: &PortraitSpec<T>) -> Result<Scene<T>, T> {
    spec.validate()?;
    let theta = spec.system.theta();
    let stop_box = spec.stop_box();
    let mut paths = Vec::new();

    let seps = trace_separatrix(theta, &spec.window, spec.separatrix_resolution)?;
    for branch in [seps.left, seps.right] {
        let s = spec.style.stroke(Role::Separatrix);
        paths.push(StyledPath {
            role: Role::Separatrix,
            points: branch,
            color: s.color.clone(),
            width: s.width,
        });
    }

    let seeds = seed_points(spec);
    let forward = spec.seed_config(Direction::Forward);
    let backward = spec.seed_config(Direction::Backward);
    let trace = |&(seed, role): &(Point2<T>, Role)| -> Result<StyledPath<T>, T> {
        let run = |cfg: &IntegratorConfig<T>| {
            integrate(&spec.system, seed, cfg).map_err(|e| Error::Seed {
                seed,
                reason: e.to_string(),
            })
        };
        let back = run(&backward)?;
        let fwd = run(&forward)?;
        let points: Vec<Point2<T>> = back
            .samples
            .iter()
            .rev()
            .chain(fwd.samples.iter().skip(1))
            .map(|s| stop_box.clamp(&s.p))
            .collect();
        let s = spec.style.stroke(role);
        Ok(StyledPath {
            role,
            points,
            color: s.color.clone(),
            width: s.width,
        })
    };

    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let chunk = seeds.len().div_ceil(workers).max(1);
    let traced: Vec<Result<StyledPath<T>, T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|group| scope.spawn(move || group.iter().map(trace).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("seed worker panicked"))
            .collect()
    });
    for path in traced {
        paths.push(path?);
    }

    Ok(Scene {
        window: spec.window,
        paths,
        metadata: SceneMetadata {
            theta: theta.to_f64().unwrap_or(f64::NAN),
            seeds: format!(
                "{} upper, {} lower, inset {}",
                spec.seeds_above, spec.seeds_below, spec.seed_edge_inset
            ),
            integrator: integrator_summary(&spec.integrator),
        },
        arrowheads: spec.arrowheads,
    })
}

fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Standalone SVG 1.1 document with one `<polyline>` per path, in scene order.
///
/// World coordinates map affinely onto `[0, width] × [0, height]` with the
/// y axis flipped, and drawing is clipped to the window frame.
pub fn render_svg<T: Real>(scene: &Scene<T>, width_px: u32, height_px: u32) -> String {
    let w = scene.window;
    let (x0, y1) = (w.x_min.to_f64().unwrap(), w.y_max.to_f64().unwrap());
    let sx = f64::from(width_px) / w.width().to_f64().unwrap();
    let sy = f64::from(height_px) / w.height().to_f64().unwrap();
    let to_px = |p: &Point2<T>| {
        (
            (p.x.to_f64().unwrap() - x0) * sx,
            (y1 - p.y.to_f64().unwrap()) * sy,
        )
    };

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width_px}\" height=\"{height_px}\" viewBox=\"0 0 {width_px} {height_px}\">"
    );
    let _ = writeln!(
        out,
        "  <title>arch flow, theta = {}</title>",
        scene.metadata.theta
    );
    let _ = writeln!(
        out,
        "  <desc>seeds: {}; integrator: {}</desc>",
        escape_xml(&scene.metadata.seeds),
        escape_xml(&scene.metadata.integrator)
    );
    let _ = writeln!(
        out,
        "  <defs><clipPath id=\"frame\"><rect x=\"0\" y=\"0\" width=\"{width_px}\" height=\"{height_px}\"/></clipPath></defs>"
    );
    let _ = writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{width_px}\" height=\"{height_px}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        out,
        "  <g clip-path=\"url(#frame)\" fill=\"none\" stroke-linecap=\"round\" stroke-linejoin=\"round\">"
    );
    for path in &scene.paths {
        let pts: Vec<String> = path
            .points
            .iter()
            .map(|p| {
                let (x, y) = to_px(p);
                format!("{},{}", px(x), px(y))
            })
            .collect();
        let _ = writeln!(
            out,
            "    <polyline class=\"{}\" stroke=\"{}\" stroke-width=\"{}\" points=\"{}\"/>",
            path.role.as_str(),
            escape_xml(&path.color),
            path.width,
            pts.join(" ")
        );
    }
    if scene.arrowheads {
        for path in &scene.paths {
            if let Some(d) = arrowhead(path, &to_px) {
                let _ = writeln!(
                    out,
                    "    <path class=\"arrow\" fill=\"{}\" stroke=\"none\" d=\"{}\"/>",
                    escape_xml(&path.color),
                    d
                );
            }
        }
    }
    out.push_str("  </g>\n");
    let _ = writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{width_px}\" height=\"{height_px}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>"
    );
    out.push_str("</svg>\n");
    out
}

/// Triangle at the path vertex nearest to the middle of its pixel length,
/// pointing along the path order.
fn arrowhead<T: Real, F: Fn(&Point2<T>) -> (f64, f64)>(
    path: &StyledPath<T>,
    to_px: &F,
) -> Option<String> {
    if path.points.len() < 3 {
        return None;
    }
    let pts: Vec<(f64, f64)> = path.points.iter().map(to_px).collect();
    let seg = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0).hypot(b.1 - a.1);
    let total: f64 = pts.windows(2).map(|w| seg(w[0], w[1])).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    let mut mid = 1;
    for i in 1..pts.len() - 1 {
        acc += seg(pts[i - 1], pts[i]);
        mid = i;
        if acc >= total / 2.0 {
            break;
        }
    }
    let (a, c, b) = (pts[mid - 1], pts[mid], pts[mid + 1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return None;
    }
    let (ux, uy) = (dx / len, dy / len);
    let size = 4.0 + 2.0 * path.width;
    let tip = (c.0 + ux * size / 2.0, c.1 + uy * size / 2.0);
    let base = (c.0 - ux * size / 2.0, c.1 - uy * size / 2.0);
    let (nx, ny) = (-uy * size / 2.5, ux * size / 2.5);
    Some(format!(
        "M{},{} L{},{} L{},{} Z",
        px(tip.0),
        px(tip.1),
        px(base.0 + nx),
        px(base.1 + ny),
        px(base.0 - nx),
        px(base.1 - ny)
    ))
}

/// Shortest decimal with 17 significant digits (`%.17g`); round-trips `f64`.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..17).contains(&exp) {
        strip(&format!("{:.*}", (16 - exp) as usize, v))
    } else {
        let (mantissa, _) = sci.split_at(sci.find('e').unwrap());
        format!("{}e{}", strip(mantissa), exp)
    }
}

/// CSV with header `t,x,y,H` and one row per sample in time order.
pub fn export_trajectory_csv<T: Real>(trajectory: &Trajectory<T>, theta: T) -> Result<String, T> {
    let mut out = String::from("t,x,y,H\n");
    for s in &trajectory.samples {
        let h = arch_first_integral(theta, s.p)?;
        let cols = [s.t, s.p.x, s.p.y, h].map(|v| format_sig17(v.to_f64().unwrap()));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{Sample, StopReason};

    fn spec(theta: f64) -> PortraitSpec<f64> {
        PortraitSpec::new(ArchSystem::new(theta).unwrap())
    }

    #[test]
    fn no_seeds_requested() {
        let mut s = spec(0.5);
        s.seeds_above = 0;
        s.seeds_below = 0;
        assert!(seed_points(&s).is_empty());
    }

    #[test]
    fn seeds_lie_in_their_sectors() {
        for theta in [0.001, 0.5, 5.0] {
            let mut s = spec(theta);
            s.seeds_above = 5;
            s.seeds_below = 3;
            let seeds = seed_points(&s);
            let h = |p: Point2<f64>| s.system.first_integral(p);
            let upper: Vec<_> = seeds
                .iter()
                .filter(|(_, r)| *r == Role::UpperSector)
                .collect();
            let lower: Vec<_> = seeds
                .iter()
                .filter(|(_, r)| *r == Role::LowerSector)
                .collect();
            assert_eq!(upper.len(), 5);
            assert_eq!(lower.len(), 3);
            assert!(upper.iter().all(|(p, _)| h(*p) > 0.0), "theta {theta}");
            assert!(lower.iter().all(|(p, _)| h(*p) < 0.0), "theta {theta}");
            assert!(seeds.iter().all(|(p, _)| s.window.contains(p)));
        }
    }

    #[test]
    fn seeds_never_share_an_orbit() {
        for theta in [0.001, 0.5, 5.0] {
            let s = spec(theta);
            let mut levels: Vec<f64> = seed_points(&s)
                .iter()
                .map(|(p, _)| s.system.first_integral(*p))
                .collect();
            levels.sort_by(f64::total_cmp);
            assert!(levels.windows(2).all(|w| w[1] - w[0] > 1e-3), "{levels:?}");
            for (p, _) in seed_points(&s) {
                let on_edge =
                    p.x == s.window.x_min || p.x == s.window.x_max || p.y == s.window.y_min;
                assert!(on_edge, "{p}");
            }
        }
    }

    #[test]
    fn seeds_are_deterministic_and_ordered() {
        let s = spec(0.5);
        assert_eq!(seed_points(&s), seed_points(&s));
        let roles: Vec<Role> = seed_points(&s).into_iter().map(|(_, r)| r).collect();
        assert!(roles
            .windows(2)
            .all(|w| !(w[0] == Role::LowerSector && w[1] == Role::UpperSector)));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(0.5);
        s.seed_edge_inset = 0.5;
        assert!(build_portrait(&s).is_err());
        let mut s = spec(0.5);
        s.window = Window::new(1.0, 2.0, -1.0, 1.0).unwrap();
        assert!(build_portrait(&s).is_err());
        let mut s = spec(0.5);
        s.integrator.step = 0.0;
        assert!(build_portrait(&s).is_err());
    }

    #[test]
    fn empty_bundle_leaves_separatrices() {
        let mut s = spec(0.5);
        s.seeds_above = 0;
        s.seeds_below = 0;
        let scene = build_portrait(&s).unwrap();
        assert_eq!(scene.paths.len(), 2);
        assert!(scene.paths.iter().all(|p| p.role == Role::Separatrix));
    }

    #[test]
    fn flat_flow_for_small_theta() {
        let scene = build_portrait(&spec(0.001)).unwrap();
        for path in scene.paths.iter().filter(|p| p.role == Role::UpperSector) {
            let ys = path.points.iter().map(|p| p.y);
            let (lo, hi) = ys.fold((f64::MAX, f64::MIN), |(a, b), y| (a.min(y), b.max(y)));
            if path.points.iter().any(|p| p.x < 0.0) && path.points.iter().any(|p| p.x > 0.0) {
                assert!(hi - lo < 0.5, "rise {}", hi - lo);
            }
        }
    }

    #[test]
    fn steep_apex_for_large_theta() {
        let s = spec(5.0);
        let scene = build_portrait(&s).unwrap();
        for path in scene.paths.iter().filter(|p| p.role == Role::UpperSector) {
            let entry = path.points[0];
            let apex = (3.0 * s.system.first_integral(entry)).cbrt();
            if (entry.y - 1.0).abs() < 1.0 && entry.x <= s.window.x_min {
                assert!(apex >= 2.0 * entry.y.max(0.5), "seed {entry} apex {apex}");
            }
        }
    }

    #[test]
    fn svg_of_empty_scene_is_frame_only() {
        let scene: Scene<f64> = Scene {
            window: Window::symmetric(1.0).unwrap(),
            paths: vec![],
            metadata: SceneMetadata {
                theta: 1.0,
                seeds: String::new(),
                integrator: String::new(),
            },
            arrowheads: true,
        };
        let svg = render_svg(&scene, 200, 100);
        roxmltree::Document::parse(&svg).unwrap();
        assert!(!svg.contains("<polyline"));
        assert!(svg.contains("<rect"));
    }

    #[test]
    fn svg_transform_flips_y() {
        let scene = Scene {
            window: Window::new(0.0, 10.0, 0.0, 5.0).unwrap(),
            paths: vec![StyledPath {
                role: Role::UpperSector,
                points: vec![Point2::new(0.0, 0.0), Point2::new(10.0, 5.0)],
                color: "#00ff00".into(),
                width: 1.0,
            }],
            metadata: SceneMetadata {
                theta: 1.0,
                seeds: "a < b & c".into(),
                integrator: String::new(),
            },
            arrowheads: false,
        };
        let svg = render_svg(&scene, 100, 50);
        assert!(svg.contains("points=\"0.00,50.00 100.00,0.00\""), "{svg}");
        roxmltree::Document::parse(&svg).unwrap();
    }

    #[test]
    fn sig17_formatting() {
        assert_eq!(format_sig17(0.0), "0");
        assert_eq!(format_sig17(-0.0), "0");
        assert_eq!(format_sig17(1.0), "1");
        assert_eq!(format_sig17(-2.5), "-2.5");
        assert_eq!(format_sig17(0.1), "0.10000000000000001");
        assert_eq!(format_sig17(1e-7), "9.9999999999999995e-8");
        assert_eq!(format_sig17(1e20), "1e20");
        for v in [
            std::f64::consts::PI,
            -1.0 / 3.0,
            123456.789e-3,
            6.02e23,
            1e-300,
        ] {
            assert_eq!(format_sig17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_single_origin_sample() {
        let traj = Trajectory {
            samples: vec![Sample {
                t: 0.0,
                p: Point2::origin(),
            }],
            stop_reason: StopReason::MaxSteps,
            direction: Direction::Forward,
            method: Method::Rk45,
        };
        assert_eq!(
            export_trajectory_csv(&traj, 0.5).unwrap(),
            "t,x,y,H\n0,0,0,0\n"
        );
        assert!(export_trajectory_csv(&traj, -1.0).is_err());
    }
}
