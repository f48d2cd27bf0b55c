//! Equilibrium finding and classification, cusp sector census, separatrix
//! tracing, and the crest-angle metric used to grade arch categories.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::integrate::{crossing, integrate, Direction, IntegratorConfig, Line};
use crate::scalar::Real;
use crate::sysdef::{
    eval_field, field_jacobian, ArchSystem, Mat2, Point2, Vec2, VectorField2D, Window,
};

/// Roots closer than this are merged by [`find_equilibria`].
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Largest residual component accepted for an equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EigenKind {
    RealDistinct,
    RealRepeated,
    ComplexConjugate,
}

/// Eigenvalues `re[i] + i·im[i]` of a 2×2 matrix.
///
/// Real pairs are ordered with the larger value first; complex pairs carry
/// the positive imaginary part first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair<T> {
    pub kind: EigenKind,
    pub re: [T; 2],
    pub im: [T; 2],
}

/// Eigenvalues of `m` as roots of `λ² − tr·λ + det`.
///
/// Real roots use the cancellation-free form `q = tr/2 + sign(tr)·√disc`,
/// `λ₁ = q`, `λ₂ = det/q`.
pub fn eigen_2x2<T: Real>(m: &Mat2<T>) -> EigenPair<T> {
    let half = m.trace() / T::lit(2.0);
    let det = m.det();
    let disc = half * half - det;
    let scale = half * half + det.abs();
    let zero = T::zero();

    if disc.abs() <= T::lit(4.0) * T::epsilon() * scale {
        return EigenPair {
            kind: EigenKind::RealRepeated,
            re: [half, half],
            im: [zero, zero],
        };
    }
    if disc > zero {
        let s = disc.sqrt();
        let q = if half >= zero { half + s } else { half - s };
        let other = if q != zero { det / q } else { half - s };
        let (a, b) = if q >= other { (q, other) } else { (other, q) };
        EigenPair {
            kind: EigenKind::RealDistinct,
            re: [a, b],
            im: [zero, zero],
        }
    } else {
        let w = (-disc).sqrt();
        EigenPair {
            kind: EigenKind::ComplexConjugate,
            re: [half, half],
            im: [w, -w],
        }
    }
}

/// Linear type of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumClass {
    Saddle,
    StableNode,
    UnstableNode,
    StableFocus,
    UnstableFocus,
    CenterLinear,
    DegenerateNonhyperbolic,
}

impl EquilibriumClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EquilibriumClass::Saddle => "saddle",
            EquilibriumClass::StableNode => "stable_node",
            EquilibriumClass::UnstableNode => "unstable_node",
            EquilibriumClass::StableFocus => "stable_focus",
            EquilibriumClass::UnstableFocus => "unstable_focus",
            EquilibriumClass::CenterLinear => "center_linear",
            EquilibriumClass::DegenerateNonhyperbolic => "degenerate_nonhyperbolic",
        }
    }
}

impl fmt::Display for EquilibriumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies an equilibrium from its eigenvalues alone.
///
/// Real parts below `√ε·max(1, |λ|)` count as zero. A zero real part makes
/// the point degenerate unless the pair is purely imaginary (linear center);
/// nilpotent and zero Jacobians both land in `DegenerateNonhyperbolic`.
pub fn classify_linear<T: Real>(e: &EigenPair<T>) -> EquilibriumClass {
    let magnitude = e.re[0]
        .abs()
        .max(e.re[1].abs())
        .max(e.im[0].abs())
        .max(T::one());
    let tol = T::epsilon().sqrt() * magnitude;
    let sign = |v: T| {
        if v.abs() <= tol {
            0
        } else if v > T::zero() {
            1
        } else {
            -1
        }
    };
    match e.kind {
        EigenKind::ComplexConjugate if sign(e.im[0]) != 0 => match sign(e.re[0]) {
            0 => EquilibriumClass::CenterLinear,
            1 => EquilibriumClass::UnstableFocus,
            _ => EquilibriumClass::StableFocus,
        },
        _ => match (sign(e.re[0]), sign(e.re[1])) {
            (0, _) | (_, 0) => EquilibriumClass::DegenerateNonhyperbolic,
            (1, 1) => EquilibriumClass::UnstableNode,
            (-1, -1) => EquilibriumClass::StableNode,
            _ => EquilibriumClass::Saddle,
        },
    }
}

/// Sector structure of a deleted neighbourhood of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SectorCensus {
    pub hyperbolic: usize,
    pub elliptic: usize,
    pub parabolic: usize,
    pub separatrices: usize,
    pub is_cusp: bool,
}

impl SectorCensus {
    pub fn new(hyperbolic: usize, elliptic: usize, parabolic: usize, separatrices: usize) -> Self {
        Self {
            hyperbolic,
            elliptic,
            parabolic,
            separatrices,
            is_cusp: hyperbolic == 2 && elliptic == 0 && parabolic == 0 && separatrices == 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium<T> {
    pub location: Point2<T>,
    pub jacobian: Mat2<T>,
    pub eigen: EigenPair<T>,
    pub class: EquilibriumClass,
    pub census: Option<SectorCensus>,
}

impl<T: Real> Equilibrium<T> {
    /// Linearizes `system` at `location`.
    pub fn at<S: VectorField2D<T> + ?Sized>(system: &S, location: Point2<T>) -> Result<Self, T> {
        let jacobian = field_jacobian(system, location)?;
        let eigen = eigen_2x2(&jacobian);
        Ok(Self {
            location,
            jacobian,
            eigen,
            class: classify_linear(&eigen),
            census: None,
        })
    }
}

/// Equilibria of `system` inside `window`.
///
/// Systems that enumerate their equilibria analytically are answered
/// directly. Otherwise damped Gauss–Newton runs from a `grid × grid` lattice
/// of seeds, and roots within [`DEDUP_RADIUS`] of one another are merged.
/// Results are sorted by `(x, y)`.
pub fn find_equilibria<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    window: &Window<T>,
    grid: usize,
) -> Result<Vec<Equilibrium<T>>, T> {
    window.validate()?;
    if grid < 2 {
        return Err(domain(format!("grid must be at least 2, got {grid}")));
    }

    let mut roots: Vec<Point2<T>> = Vec::new();
    if let Some(known) = system.known_equilibria() {
        roots.extend(known.into_iter().filter(|p| window.contains(p)));
    } else {
        let last = T::from_usize(grid - 1).unwrap();
        for i in 0..grid {
            for j in 0..grid {
                let fx = T::from_usize(i).unwrap() / last;
                let fy = T::from_usize(j).unwrap() / last;
                let seed = Point2::new(
                    window.x_min + fx * window.width(),
                    window.y_min + fy * window.height(),
                );
                if let Some(root) = gauss_newton(system, seed) {
                    if window.contains(&root)
                        && !roots
                            .iter()
                            .any(|r| r.distance(&root) < T::lit(DEDUP_RADIUS))
                    {
                        roots.push(root);
                    }
                }
            }
        }
    }
    roots.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
    });

    let mut out = Vec::with_capacity(roots.len());
    for r in roots {
        let f = eval_field(system, r)?;
        if f.max_abs() <= T::lit(RESIDUAL_TOL) {
            out.push(Equilibrium::at(system, r)?);
        }
    }
    Ok(out)
}

/// Moore–Penrose pseudo-inverse of a 2×2 matrix via the eigen-decomposition
/// of `JᵀJ`; singular values below `√ε·σ_max` are dropped.
fn pseudo_inverse<T: Real>(j: &Mat2<T>) -> Mat2<T> {
    let jtj = j.transpose().mul(j);
    let (a, b, c) = (jtj.a11, jtj.a12, jtj.a22);
    let half_tr = (a + c) / T::lit(2.0);
    let r = ((a - c) / T::lit(2.0)).hypot(b);
    let l1 = half_tr + r;
    let l2 = (half_tr - r).max(T::zero());
    if l1 <= T::zero() {
        return Mat2::default();
    }
    // Unit eigenvector of the larger eigenvalue; the other is its normal.
    let (vx, vy) = if b != T::zero() {
        let (vx, vy) = (l1 - c, b);
        let n = vx.hypot(vy);
        (vx / n, vy / n)
    } else if a >= c {
        (T::one(), T::zero())
    } else {
        (T::zero(), T::one())
    };
    let (wx, wy) = (-vy, vx);
    let cutoff = T::epsilon() * l1;
    let inv1 = T::one() / l1;
    let inv2 = if l2 > cutoff {
        T::one() / l2
    } else {
        T::zero()
    };
    let inv_jtj = Mat2::new(
        inv1 * vx * vx + inv2 * wx * wx,
        inv1 * vx * vy + inv2 * wx * wy,
        inv1 * vy * vx + inv2 * wy * wx,
        inv1 * vy * vy + inv2 * wy * wy,
    );
    inv_jtj.mul(&j.transpose())
}

/// Damped Gauss–Newton with a pseudo-inverse step and residual-decrease
/// backtracking. Converges (linearly) at singular roots such as `y² = 0`.
fn gauss_newton<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    seed: Point2<T>,
) -> Option<Point2<T>> {
    let sq = |v: Vec2<T>| v.dx * v.dx + v.dy * v.dy;
    let mut p = seed;
    let mut r = system.field(p);
    if !r.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let norm = sq(r);
        if norm == T::zero() {
            break;
        }
        let j = system.jacobian(p);
        if !j.is_finite() {
            return None;
        }
        let d = pseudo_inverse(&j).mul_vec(r);
        if d.is_zero() {
            break;
        }
        let mut alpha = T::one();
        let mut accepted = None;
        while alpha > T::lit(1e-10) {
            let q = p.offset(d, -alpha);
            let rq = system.field(q);
            if rq.is_finite() && sq(rq) < norm {
                accepted = Some((q, rq));
                break;
            }
            alpha = alpha / T::lit(2.0);
        }
        match accepted {
            Some((q, rq)) => {
                p = q;
                r = rq;
            }
            None => break,
        }
    }
    (p.is_finite() && r.max_abs() <= T::lit(RESIDUAL_TOL)).then_some(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Band {
    Upper,
    Lower,
    Separatrix,
}

/// Sector census of an arch-system equilibrium from the sign of the first
/// integral on a circle of `radius` around it.
///
/// Each of `samples` equally spaced circle points is labelled upper
/// (`H > band`), lower (`H < −band`) or separatrix (`|H| ≤ band`) with
/// `band = 1e-3·radius³`. Maximal cyclic runs of upper or lower labels are
/// hyperbolic sectors. Separatrices are the separatrix runs plus any direct
/// upper/lower adjacency, where the curve slipped between two samples.
/// Sign classification of `H` cannot produce elliptic or parabolic sectors.
pub fn sector_census<T: Real>(
    system: &ArchSystem<T>,
    eq: &Equilibrium<T>,
    radius: T,
    samples: usize,
) -> Result<SectorCensus, T> {
    if !(radius.is_finite() && radius > T::zero()) {
        return Err(domain(format!("census radius must be > 0, got {radius}")));
    }
    if samples < 16 {
        return Err(domain(format!(
            "census needs at least 16 samples, got {samples}"
        )));
    }
    if !eq.location.is_finite() {
        return Err(domain("equilibrium location is not finite"));
    }
    let band = T::lit(1e-3) * radius * radius * radius;
    let n = T::from_usize(samples).unwrap();
    let labels: Vec<Band> = (0..samples)
        .map(|k| {
            let phi = T::TAU() * T::from_usize(k).unwrap() / n;
            let p = Point2::new(
                eq.location.x + radius * phi.cos(),
                eq.location.y + radius * phi.sin(),
            );
            let h = system.first_integral(p) - system.first_integral(eq.location);
            if h > band {
                Band::Upper
            } else if h < -band {
                Band::Lower
            } else {
                Band::Separatrix
            }
        })
        .collect();

    // Rotate so the sequence starts at a run boundary, then collapse runs.
    let start = (0..samples).find(|&i| labels[i] != labels[(i + samples - 1) % samples]);
    let runs: Vec<Band> = match start {
        None => vec![labels[0]],
        Some(s) => {
            let mut runs = Vec::new();
            for k in 0..samples {
                let l = labels[(s + k) % samples];
                if runs.last() != Some(&l) {
                    runs.push(l);
                }
            }
            runs
        }
    };

    let hyperbolic = runs.iter().filter(|&&b| b != Band::Separatrix).count();
    let mut separatrices = runs.iter().filter(|&&b| b == Band::Separatrix).count();
    if runs.len() > 1 {
        for i in 0..runs.len() {
            let (a, b) = (runs[i], runs[(i + 1) % runs.len()]);
            if a != Band::Separatrix && b != Band::Separatrix {
                separatrices += 1;
            }
        }
    }
    Ok(SectorCensus::new(hyperbolic, 0, 0, separatrices))
}

/// Equilibria of the arch system in `window`, each with its sector census.
pub fn analyze_arch<T: Real>(
    system: &ArchSystem<T>,
    window: &Window<T>,
    census_radius: T,
    census_samples: usize,
) -> Result<Vec<Equilibrium<T>>, T> {
    let mut eqs = find_equilibria(system, window, 2)?;
    for eq in &mut eqs {
        eq.census = Some(sector_census(system, eq, census_radius, census_samples)?);
    }
    Ok(eqs)
}

/// The two separatrix branches of the cusp, clipped to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Separatrices<T> {
    /// Stable branch (`x ≤ 0`), ordered along the flow: ends at the origin.
    pub left: Vec<Point2<T>>,
    /// Unstable branch (`x ≥ 0`), ordered along the flow: starts at the origin.
    pub right: Vec<Point2<T>>,
}

/// Samples both separatrix branches `y = −(3θx²/2)^(1/3)` at `resolution`
/// abscissae each, spanning the part of the window the curve stays inside.
pub fn trace_separatrix<T: Real>(
    theta: T,
    window: &Window<T>,
    resolution: usize,
) -> Result<Separatrices<T>, T> {
    let system = ArchSystem::new(theta)?;
    window.validate()?;
    if !window.contains(&Point2::origin()) {
        return Err(domain("separatrices need a window containing the origin"));
    }
    if resolution < 2 {
        return Err(domain(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    let reach = system.separatrix_half_width(window.y_min);
    let left_end = window.x_min.max(-reach);
    let right_end = window.x_max.min(reach);
    let last = T::from_usize(resolution - 1).unwrap();
    let point = |x: T| Point2::new(x, system.separatrix_height(x));

    let left = (0..resolution)
        .map(|k| {
            let f = T::from_usize(resolution - 1 - k).unwrap() / last;
            point(left_end * f)
        })
        .collect();
    let right = (0..resolution)
        .map(|k| {
            let f = T::from_usize(k).unwrap() / last;
            point(right_end * f)
        })
        .collect();
    Ok(Separatrices { left, right })
}

/// Crest angle, in degrees, of the arch-system trajectory through `(0, apex)`.
///
/// The trajectory is integrated both ways from its crest until it crosses
/// the line `y = fraction·apex`. At each crossing the tangent makes an angle
/// `atan(|dy/dx|)` with the horizontal, and the crest angle is 180° minus
/// the two of them.
pub fn opening_angle<T: Real>(theta: T, apex: T, fraction: T) -> Result<T, T> {
    let system = ArchSystem::new(theta)?;
    if !(apex.is_finite() && apex > T::zero()) {
        return Err(domain(format!("apex height must be > 0, got {apex}")));
    }
    if !(fraction > T::zero() && fraction < T::one()) {
        return Err(domain(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let level = fraction * apex;
    let far = T::lit(1e12);
    let bounds = Window::new(-far, far, level / T::lit(2.0), apex * T::lit(2.0))?;
    let crest = Point2::new(T::zero(), apex);
    let tol = if T::epsilon() < T::lit(1e-10) {
        T::lit(1e-12)
    } else {
        T::lit(1e-6)
    };

    let mut total = T::lit(180.0);
    for direction in [Direction::Forward, Direction::Backward] {
        let cfg = IntegratorConfig::rk45(tol)
            .with_stop_box(bounds)
            .with_direction(direction);
        let traj = integrate(&system, crest, &cfg)?;
        let hit = crossing(&system, &traj, Line::horizontal(level)).map_err(|_| {
            Error::NotFound(format!(
                "trajectory through (0, {apex}) never reaches y = {level} ({})",
                traj.stop_reason.as_str()
            ))
        })?;
        let v = eval_field(&system, hit)?;
        let slope = (v.dy / v.dx).abs();
        total = total - slope.atan().to_degrees();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchKind {
    Plain,
    Tented,
    Strong,
}

impl ArchKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArchKind::Plain => "plain",
            ArchKind::Tented => "tented",
            ArchKind::Strong => "strong",
        }
    }

    /// Representative parameter of each category.
    pub fn preset_theta(&self) -> f64 {
        match self {
            ArchKind::Plain => 0.001,
            ArchKind::Tented => 0.5,
            ArchKind::Strong => 5.0,
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ArchKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "plain" => Ok(ArchKind::Plain),
            "tented" => Ok(ArchKind::Tented),
            "strong" => Ok(ArchKind::Strong),
            other => Err(format!(
                "unknown arch category `{other}` (expected plain, tented or strong)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchCategory<T> {
    pub kind: ArchKind,
    /// Crest angle at the default apex and fraction.
    pub opening_angle_deg: T,
}

/// Category boundaries: plain below `tented`, strong from `strong` upward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchThresholds<T> {
    pub tented: T,
    pub strong: T,
}

impl<T: Real> Default for ArchThresholds<T> {
    fn default() -> Self {
        Self {
            tented: T::lit(0.1),
            strong: T::lit(2.0),
        }
    }
}

pub const DEFAULT_APEX: f64 = 1.0;
pub const DEFAULT_FRACTION: f64 = 0.5;

pub fn classify_arch<T: Real>(theta: T) -> Result<ArchCategory<T>, T> {
    classify_arch_with(theta, &ArchThresholds::default())
}

pub fn classify_arch_with<T: Real>(
    theta: T,
    thresholds: &ArchThresholds<T>,
) -> Result<ArchCategory<T>, T> {
    ArchSystem::new(theta)?;
    if !(thresholds.tented > T::zero()
        && thresholds.tented < thresholds.strong
        && thresholds.strong.is_finite())
    {
        return Err(domain("thresholds must satisfy 0 < tented < strong"));
    }
    let kind = if theta < thresholds.tented {
        ArchKind::Plain
    } else if theta < thresholds.strong {
        ArchKind::Tented
    } else {
        ArchKind::Strong
    };
    Ok(ArchCategory {
        kind,
        opening_angle_deg: opening_angle(theta, T::lit(DEFAULT_APEX), T::lit(DEFAULT_FRACTION))?,
    })
}
