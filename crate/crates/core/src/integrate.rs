//! Fixed-step RK4 and adaptive Dormand–Prince 5(4) integration of planar
//! autonomous systems, with stop conditions and axis-aligned line crossings.

use crate::error::{domain, Error, Result};
use crate::scalar::Real;
use crate::sysdef::{Point2, Vec2, VectorField2D, Window};

/// Smallest step the adaptive integrator will attempt.
pub const MIN_STEP: f64 = 1e-12;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign<T: Real>(self) -> T {
        match self {
            Direction::Forward => T::one(),
            Direction::Backward => -T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    TimeHorizon,
    BoxExit,
    MaxSteps,
    EquilibriumReached,
    StepUnderflow,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::TimeHorizon => "time_horizon",
            StopReason::BoxExit => "box_exit",
            StopReason::MaxSteps => "max_steps",
            StopReason::EquilibriumReached => "equilibrium_reached",
            StopReason::StepUnderflow => "step_underflow",
        }
    }
}

/// Integration settings.
///
/// `step` is the fixed step for RK4 and the initial step for RK45. The
/// tolerances only matter for RK45. At least one of `stop_box`, `stop_time`
/// or `equilibrium_radius` must be set.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    pub step: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_steps: usize,
    pub direction: Direction,
    /// Stop as soon as the state leaves this rectangle. The last sample is
    /// placed just outside the boundary.
    pub stop_box: Option<Window<T>>,
    /// Stop after this much elapsed time.
    pub stop_time: Option<T>,
    /// Stop once within this distance of an equilibrium.
    pub equilibrium_radius: Option<T>,
    /// Equilibria for `equilibrium_radius`; when empty, the system's known
    /// equilibria are used.
    pub equilibria: Vec<Point2<T>>,
    /// Upper bound on any single step.
    pub max_step: Option<T>,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            step: T::lit(1e-2),
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-10),
            max_steps: 1_000_000,
            direction: Direction::Forward,
            stop_box: None,
            stop_time: None,
            equilibrium_radius: None,
            equilibria: Vec::new(),
            max_step: None,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    /// Adaptive RK45 with `rel_tol = abs_tol = tol`.
    pub fn rk45(tol: T) -> Self {
        Self {
            rel_tol: tol,
            abs_tol: tol,
            ..Self::default()
        }
    }

    /// Fixed-step RK4.
    pub fn rk4(step: T) -> Self {
        Self {
            method: Method::Rk4,
            step,
            ..Self::default()
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_stop_box(mut self, window: Window<T>) -> Self {
        self.stop_box = Some(window);
        self
    }

    pub fn with_stop_time(mut self, t: T) -> Self {
        self.stop_time = Some(t);
        self
    }

    pub fn with_equilibrium_radius(mut self, r: T) -> Self {
        self.equilibrium_radius = Some(r);
        self
    }

    pub fn with_max_step(mut self, h: T) -> Self {
        self.max_step = Some(h);
        self
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn validate(&self) -> Result<(), T> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(self.step) {
            return Err(domain(format!("step must be > 0, got {}", self.step)));
        }
        if self.method == Method::Rk45 && !(positive(self.rel_tol) && positive(self.abs_tol)) {
            return Err(domain("tolerances must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(domain("max_steps must be at least 1"));
        }
        if let Some(t) = self.stop_time {
            if !positive(t) {
                return Err(domain(format!("stop_time must be > 0, got {t}")));
            }
        }
        if let Some(r) = self.equilibrium_radius {
            if !positive(r) {
                return Err(domain(format!("equilibrium_radius must be > 0, got {r}")));
            }
        }
        if let Some(h) = self.max_step {
            if !positive(h) {
                return Err(domain(format!("max_step must be > 0, got {h}")));
            }
        }
        if let Some(b) = &self.stop_box {
            b.validate()?;
        }
        if self.stop_box.is_none() && self.stop_time.is_none() && self.equilibrium_radius.is_none()
        {
            return Err(domain(
                "at least one of stop_box, stop_time or equilibrium_radius is required",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub p: Point2<T>,
}

/// Time-ordered samples of one solution curve.
///
/// Times increase for forward runs and decrease for backward runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<Sample<T>>,
    pub stop_reason: StopReason,
    pub direction: Direction,
    pub method: Method,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Sample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<T> {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn points(&self) -> impl Iterator<Item = Point2<T>> + '_ {
        self.samples.iter().map(|s| s.p)
    }
}

/// One accepted adaptive step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult<T> {
    pub state: Point2<T>,
    /// Max-norm of the embedded error estimate for the accepted step.
    pub error_estimate: T,
    /// Step actually taken (may be smaller than requested after rejections).
    pub step_taken: T,
    /// Proposed size of the following step.
    pub next_step: T,
}

/// Time-reversed view of a field.
struct Reversed<S>(S);

impl<T: Real, S: VectorField2D<T>> VectorField2D<T> for Reversed<S> {
    fn field(&self, p: Point2<T>) -> Vec2<T> {
        -self.0.field(p)
    }
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    p: Point2<T>,
    h: T,
) -> Result<Point2<T>, T> {
    if h == T::zero() || !h.is_finite() {
        return Err(domain(format!(
            "rk4 step must be finite and non-zero, got {h}"
        )));
    }
    if !p.is_finite() {
        return Err(domain(format!("rk4 step from non-finite point {p}")));
    }
    let next = rk4_raw(system, p, h);
    if !next.is_finite() {
        return Err(Error::NonFinite {
            state: p,
            partial: None,
        });
    }
    Ok(next)
}

fn rk4_raw<T: Real, S: VectorField2D<T> + ?Sized>(system: &S, p: Point2<T>, h: T) -> Point2<T> {
    let half = h / T::lit(2.0);
    let k1 = system.field(p);
    let k2 = system.field(p.offset(k1, half));
    let k3 = system.field(p.offset(k2, half));
    let k4 = system.field(p.offset(k3, h));
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    Point2::new(
        p.x + h / six * (k1.dx + two * k2.dx + two * k3.dx + k4.dx),
        p.y + h / six * (k1.dy + two * k2.dy + two * k3.dy + k4.dy),
    )
}

// Dormand–Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last row of DP_A (FSAL).
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// b5 - b4
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Returns the 5th-order state and the embedded error vector.
fn dopri_raw<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    p: Point2<T>,
    h: T,
) -> (Point2<T>, Vec2<T>) {
    let mut k = [Vec2::default(); 7];
    k[0] = system.field(p);
    for stage in 1..7 {
        let row = &DP_A[stage - 1];
        let (mut sx, mut sy) = (T::zero(), T::zero());
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = T::lit(row[j]);
            sx = sx + a * kj.dx;
            sy = sy + a * kj.dy;
        }
        k[stage] = system.field(Point2::new(p.x + h * sx, p.y + h * sy));
    }
    let (mut bx, mut by, mut ex, mut ey) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (i, ki) in k.iter().enumerate() {
        let b = T::lit(DP_B5[i]);
        let e = T::lit(DP_E[i]);
        bx = bx + b * ki.dx;
        by = by + b * ki.dy;
        ex = ex + e * ki.dx;
        ey = ey + e * ki.dy;
    }
    (
        Point2::new(p.x + h * bx, p.y + h * by),
        Vec2::new(h * ex, h * ey),
    )
}

fn step_factor<T: Real>(err_norm: T) -> T {
    if err_norm == T::zero() {
        return T::lit(MAX_FACTOR);
    }
    let f = T::lit(SAFETY) * err_norm.powf(T::lit(-0.2));
    f.max(T::lit(MIN_FACTOR)).min(T::lit(MAX_FACTOR))
}

/// One adaptive Dormand–Prince step starting with trial size `h`.
///
/// Rejected trials shrink the step until the scaled error
/// `max_i |e_i| / (abs_tol + rel_tol·max(|p_i|, |p'_i|))` is at most one.
/// Fails with [`Error::StepUnderflow`] once the step would drop below
/// [`MIN_STEP`].
pub fn rk45_step<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    p: Point2<T>,
    h: T,
    rel_tol: T,
    abs_tol: T,
) -> Result<StepResult<T>, T> {
    if !(h > T::zero() && h.is_finite()) {
        return Err(domain(format!("rk45 step must be > 0, got {h}")));
    }
    if !(rel_tol > T::zero() && abs_tol > T::zero()) {
        return Err(domain("tolerances must be > 0"));
    }
    if !p.is_finite() {
        return Err(domain(format!("rk45 step from non-finite point {p}")));
    }
    let h_min = T::lit(MIN_STEP);
    let mut h = h;
    loop {
        let (next, err) = dopri_raw(system, p, h);
        let sx = abs_tol + rel_tol * p.x.abs().max(next.x.abs());
        let sy = abs_tol + rel_tol * p.y.abs().max(next.y.abs());
        let norm = (err.dx.abs() / sx).max(err.dy.abs() / sy);
        if next.is_finite() && norm.is_finite() && norm <= T::one() {
            return Ok(StepResult {
                state: next,
                error_estimate: err.max_abs(),
                step_taken: h,
                next_step: h * step_factor(norm),
            });
        }
        let shrink = if norm.is_finite() {
            step_factor(norm).min(T::one())
        } else {
            T::lit(MIN_FACTOR)
        };
        h = h * shrink;
        if h < h_min {
            return Err(Error::StepUnderflow { state: p, step: h });
        }
    }
}

/// Single step of `method` without error control; used to re-integrate
/// inside an already accepted step.
fn substep<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    method: Method,
    p: Point2<T>,
    h: T,
) -> Point2<T> {
    match method {
        Method::Rk4 => rk4_raw(system, p, h),
        Method::Rk45 => dopri_raw(system, p, h).0,
    }
}

/// Integrates from `start` until the first stop condition fires.
///
/// Backward runs integrate the negated field and record decreasing times.
/// A start at which the field vanishes exactly is stationary: the result is
/// a single sample, or two samples when a time horizon is configured.
pub fn integrate<T: Real, S: VectorField2D<T>>(
    system: &S,
    start: Point2<T>,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>, T> {
    config.validate()?;
    if !start.is_finite() {
        return Err(domain(format!("integration start {start} is not finite")));
    }
    match config.direction {
        Direction::Forward => run(system, start, config),
        Direction::Backward => run(&Reversed(system), start, config),
    }
}

fn run<T: Real, S: VectorField2D<T>>(
    system: &S,
    start: Point2<T>,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>, T> {
    let sign: T = config.direction.sign();
    let equilibria = if config.equilibrium_radius.is_some() && config.equilibria.is_empty() {
        system.known_equilibria().unwrap_or_default()
    } else {
        config.equilibria.clone()
    };
    let near_equilibrium = |p: &Point2<T>| match config.equilibrium_radius {
        Some(r) => equilibria.iter().any(|e| e.distance(p) <= r),
        None => false,
    };
    let mut traj = Trajectory {
        samples: vec![Sample {
            t: T::zero(),
            p: start,
        }],
        stop_reason: StopReason::MaxSteps,
        direction: config.direction,
        method: config.method,
    };
    let finish = |mut traj: Trajectory<T>, reason| {
        traj.stop_reason = reason;
        Ok(traj)
    };

    if near_equilibrium(&start) {
        return finish(traj, StopReason::EquilibriumReached);
    }
    if let Some(b) = &config.stop_box {
        if !b.contains(&start) {
            return finish(traj, StopReason::BoxExit);
        }
    }
    if system.field(start).is_zero() {
        if let Some(horizon) = config.stop_time {
            traj.samples.push(Sample {
                t: sign * horizon,
                p: start,
            });
            return finish(traj, StopReason::TimeHorizon);
        }
        return finish(traj, StopReason::MaxSteps);
    }

    let mut elapsed = T::zero();
    let mut p = start;
    let mut h = config.step;
    for _ in 0..config.max_steps {
        if let Some(hmax) = config.max_step {
            h = h.min(hmax);
        }
        let mut last_step = false;
        if let Some(horizon) = config.stop_time {
            let remaining = horizon - elapsed;
            let slack = T::lit(16.0) * T::epsilon() * horizon;
            if h >= remaining - slack {
                h = remaining;
                last_step = true;
            }
        }

        let (mut next, taken, proposal) = match config.method {
            Method::Rk4 => (rk4_raw(system, p, h), h, h),
            Method::Rk45 => match rk45_step(system, p, h, config.rel_tol, config.abs_tol) {
                Ok(r) => {
                    if r.step_taken < h {
                        last_step = false;
                    }
                    (r.state, r.step_taken, r.next_step)
                }
                Err(Error::StepUnderflow { .. }) => return finish(traj, StopReason::StepUnderflow),
                Err(e) => return Err(e),
            },
        };
        if !next.is_finite() {
            return Err(Error::NonFinite {
                state: p,
                partial: Some(Box::new(traj)),
            });
        }

        let mut taken = taken;
        if let Some(b) = &config.stop_box {
            if !b.contains(&next) {
                let (h_out, p_out) = refine_exit(system, config.method, b, p, taken);
                taken = h_out;
                next = p_out;
                elapsed = elapsed + taken;
                traj.samples.push(Sample {
                    t: sign * elapsed,
                    p: next,
                });
                return finish(traj, StopReason::BoxExit);
            }
        }

        elapsed = if last_step {
            config.stop_time.unwrap_or(elapsed + taken)
        } else {
            elapsed + taken
        };
        traj.samples.push(Sample {
            t: sign * elapsed,
            p: next,
        });
        p = next;

        if near_equilibrium(&p) {
            return finish(traj, StopReason::EquilibriumReached);
        }
        if last_step {
            return finish(traj, StopReason::TimeHorizon);
        }
        h = proposal;
    }
    finish(traj, StopReason::MaxSteps)
}

/// Shrinks an exiting step so that its endpoint lies just outside `bounds`.
fn refine_exit<T: Real, S: VectorField2D<T>>(
    system: &S,
    method: Method,
    bounds: &Window<T>,
    p: Point2<T>,
    h: T,
) -> (T, Point2<T>) {
    let (mut lo, mut hi) = (T::zero(), h);
    let mut outside = substep(system, method, p, h);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = substep(system, method, p, mid);
        if bounds.contains(&q) {
            lo = mid;
        } else {
            hi = mid;
            outside = q;
        }
    }
    (hi, outside)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// The line `y = value`.
    Horizontal,
    /// The line `x = value`.
    Vertical,
}

/// Axis-aligned line used for event detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line<T> {
    pub axis: Axis,
    pub value: T,
}

impl<T: Real> Line<T> {
    pub fn horizontal(y: T) -> Self {
        Self {
            axis: Axis::Horizontal,
            value: y,
        }
    }

    pub fn vertical(x: T) -> Self {
        Self {
            axis: Axis::Vertical,
            value: x,
        }
    }

    fn coord(&self, p: &Point2<T>) -> T {
        match self.axis {
            Axis::Horizontal => p.y,
            Axis::Vertical => p.x,
        }
    }
}

/// First point where `trajectory` meets `line`.
///
/// The bracketing step is re-integrated and bisected on its length.
pub fn crossing<T: Real, S: VectorField2D<T>>(
    system: &S,
    trajectory: &Trajectory<T>,
    line: Line<T>,
) -> Result<Point2<T>, T> {
    match trajectory.direction {
        Direction::Forward => first_crossing(system, trajectory, line),
        Direction::Backward => first_crossing(&Reversed(system), trajectory, line),
    }
}

/// Every point where `trajectory` meets `line`, in time order.
pub fn crossings<T: Real, S: VectorField2D<T>>(
    system: &S,
    trajectory: &Trajectory<T>,
    line: Line<T>,
) -> Vec<Point2<T>> {
    match trajectory.direction {
        Direction::Forward => all_crossings(system, trajectory, line),
        Direction::Backward => all_crossings(&Reversed(system), trajectory, line),
    }
}

fn first_crossing<T: Real, S: VectorField2D<T>>(
    system: &S,
    trajectory: &Trajectory<T>,
    line: Line<T>,
) -> Result<Point2<T>, T> {
    scan(system, trajectory, line, true)
        .into_iter()
        .next()
        .ok_or_else(|| {
            Error::NotFound(format!(
                "trajectory never reaches the {:?} line at {}",
                line.axis, line.value
            ))
        })
}

fn all_crossings<T: Real, S: VectorField2D<T>>(
    system: &S,
    trajectory: &Trajectory<T>,
    line: Line<T>,
) -> Vec<Point2<T>> {
    scan(system, trajectory, line, false)
}

fn scan<T: Real, S: VectorField2D<T>>(
    system: &S,
    trajectory: &Trajectory<T>,
    line: Line<T>,
    first_only: bool,
) -> Vec<Point2<T>> {
    let mut found = Vec::new();
    let samples = &trajectory.samples;
    let offset = |p: &Point2<T>| line.coord(p) - line.value;
    if let Some(s) = samples.first() {
        if offset(&s.p) == T::zero() {
            found.push(s.p);
            if first_only {
                return found;
            }
        }
    }
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (fa, fb) = (offset(&a.p), offset(&b.p));
        if fb == T::zero() {
            found.push(b.p);
        } else if fa * fb < T::zero() {
            found.push(bisect_crossing(
                system,
                trajectory.method,
                a.p,
                (b.t - a.t).abs(),
                fa,
                &offset,
            ));
        } else {
            continue;
        }
        if first_only {
            break;
        }
    }
    found
}

fn bisect_crossing<T: Real, S: VectorField2D<T>, F: Fn(&Point2<T>) -> T>(
    system: &S,
    method: Method,
    p: Point2<T>,
    h: T,
    f_start: T,
    offset: &F,
) -> Point2<T> {
    let (mut lo, mut hi) = (T::zero(), h);
    let mut best = p;
    let mut best_off = f_start.abs();
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = substep(system, method, p, mid);
        let f = offset(&q);
        if f.abs() < best_off {
            best = q;
            best_off = f.abs();
        }
        if f == T::zero() {
            break;
        }
        if (f < T::zero()) == (f_start < T::zero()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}
