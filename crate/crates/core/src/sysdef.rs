//! Planar vector fields: geometry primitives, the [`VectorField2D`]
//! abstraction, and the arch system `ẋ = y², ẏ = −θx`.

use std::fmt;

use crate::error::{domain, Result};
use crate::scalar::Real;

/// A point of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `self + h·v`
    #[inline]
    pub fn offset(&self, v: Vec2<T>, h: T) -> Self {
        Self::new(self.x + h * v.dx, self.y + h * v.dy)
    }
}

impl<T: Real> fmt::Display for Point2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A velocity (rate of change) in the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub dx: T,
    pub dy: T,
}

impl<T: Real> Vec2<T> {
    pub const fn new(dx: T, dy: T) -> Self {
        Self { dx, dy }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.dx == T::zero() && self.dy == T::zero()
    }

    pub fn max_abs(&self) -> T {
        self.dx.abs().max(self.dy.abs())
    }
}

impl<T: Real> std::ops::Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.dx, -self.dy)
    }
}

/// Row-major 2×2 matrix `[[a11, a12], [a21, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

impl<T: Real> Mat2<T> {
    pub const fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.a11 * v.dx + self.a12 * v.dy,
            self.a21 * v.dx + self.a22 * v.dy,
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn entries(&self) -> [T; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Real> Window<T> {
    /// Builds a window, rejecting empty or non-finite extents.
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T) -> Result<Self, T> {
        let w = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        w.validate()?;
        Ok(w)
    }

    /// Square window `[-half, half]²`.
    pub fn symmetric(half: T) -> Result<Self, T> {
        Self::new(-half, half, -half, half)
    }

    pub fn validate(&self) -> Result<(), T> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(domain("window bounds must be finite"));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(domain(format!(
                "window must satisfy x_min < x_max and y_min < y_max, got [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Point2<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    /// Grows every side by `fraction` of the corresponding extent.
    pub fn inflate(&self, fraction: T) -> Self {
        let dx = self.width() * fraction;
        let dy = self.height() * fraction;
        Self {
            x_min: self.x_min - dx,
            x_max: self.x_max + dx,
            y_min: self.y_min - dy,
            y_max: self.y_max + dy,
        }
    }

    /// Nearest point of the window.
    pub fn clamp(&self, p: &Point2<T>) -> Point2<T> {
        Point2::new(
            p.x.max(self.x_min).min(self.x_max),
            p.y.max(self.y_min).min(self.y_max),
        )
    }
}

/// An autonomous planar vector field.
///
/// Implementations must be deterministic and free of side effects.
pub trait VectorField2D<T: Real> {
    /// Right-hand side at `p`. Callers are responsible for finiteness checks;
    /// see [`eval_field`] for the validated entry point.
    fn field(&self, p: Point2<T>) -> Vec2<T>;

    /// Jacobian at `p`. Defaults to [`central_difference_jacobian`].
    fn jacobian(&self, p: Point2<T>) -> Mat2<T> {
        central_difference_jacobian(|q| self.field(q), p)
    }

    /// Equilibria known in closed form, if the system can enumerate them.
    fn known_equilibria(&self) -> Option<Vec<Point2<T>>> {
        None
    }
}

impl<T: Real, S: VectorField2D<T> + ?Sized> VectorField2D<T> for &S {
    fn field(&self, p: Point2<T>) -> Vec2<T> {
        (**self).field(p)
    }

    fn jacobian(&self, p: Point2<T>) -> Mat2<T> {
        (**self).jacobian(p)
    }

    fn known_equilibria(&self) -> Option<Vec<Point2<T>>> {
        (**self).known_equilibria()
    }
}

/// Central-difference Jacobian with per-coordinate step
/// `δ = max(1e-6, 1e-6·|coordinate|)`.
pub fn central_difference_jacobian<T, F>(f: F, p: Point2<T>) -> Mat2<T>
where
    T: Real,
    F: Fn(Point2<T>) -> Vec2<T>,
{
    let base = T::lit(1e-6);
    let two = T::lit(2.0);
    let hx = base.max(base * p.x.abs());
    let hy = base.max(base * p.y.abs());

    let fxp = f(Point2::new(p.x + hx, p.y));
    let fxm = f(Point2::new(p.x - hx, p.y));
    let fyp = f(Point2::new(p.x, p.y + hy));
    let fym = f(Point2::new(p.x, p.y - hy));

    Mat2::new(
        (fxp.dx - fxm.dx) / (two * hx),
        (fyp.dx - fym.dx) / (two * hy),
        (fxp.dy - fxm.dy) / (two * hx),
        (fyp.dy - fym.dy) / (two * hy),
    )
}

/// Evaluates the field at `p`, rejecting non-finite inputs and outputs.
pub fn eval_field<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    p: Point2<T>,
) -> Result<Vec2<T>, T> {
    if !p.is_finite() {
        return Err(domain(format!("field evaluated at non-finite point {p}")));
    }
    let v = system.field(p);
    if !v.is_finite() {
        return Err(domain(format!("field is non-finite at {p}")));
    }
    Ok(v)
}

/// Evaluates the Jacobian at `p`, rejecting non-finite inputs and outputs.
pub fn field_jacobian<T: Real, S: VectorField2D<T> + ?Sized>(
    system: &S,
    p: Point2<T>,
) -> Result<Mat2<T>, T> {
    if !p.is_finite() {
        return Err(domain(format!(
            "jacobian evaluated at non-finite point {p}"
        )));
    }
    let j = system.jacobian(p);
    if !j.is_finite() {
        return Err(domain(format!("jacobian is non-finite at {p}")));
    }
    Ok(j)
}

/// Adapts a closure into a [`VectorField2D`] with a finite-difference Jacobian.
#[derive(Clone, Copy)]
pub struct FnField<F>(pub F);

impl<T: Real, F: Fn(Point2<T>) -> Vec2<T>> VectorField2D<T> for FnField<F> {
    fn field(&self, p: Point2<T>) -> Vec2<T> {
        (self.0)(p)
    }
}

/// The arch ridge-flow system `ẋ = y²`, `ẏ = −θx` with `θ > 0`.
///
/// Its only equilibrium is the origin, a cusp whose two separatrices are the
/// branches of the zero level set of the first integral
/// `H(x, y) = θx²/2 + y³/3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchSystem<T> {
    theta: T,
}

impl<T: Real> ArchSystem<T> {
    /// Fails unless `theta` is finite and strictly positive.
    pub fn new(theta: T) -> Result<Self, T> {
        check_theta(theta)?;
        Ok(Self { theta })
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// `H(x, y) = θx²/2 + y³/3`, constant along every trajectory.
    pub fn first_integral(&self, p: Point2<T>) -> T {
        self.theta * p.x * p.x / T::lit(2.0) + p.y * p.y * p.y / T::lit(3.0)
    }

    /// Height of the separatrix (the `H = 0` curve) above `x`:
    /// `y = −(3θx²/2)^(1/3)`.
    pub fn separatrix_height(&self, x: T) -> T {
        if x == T::zero() {
            return T::zero();
        }
        -(T::lit(1.5) * self.theta * x * x).cbrt()
    }

    /// Half-width of the lower sector on the horizontal line at height `y < 0`,
    /// i.e. the `|x|` where the separatrix reaches `y`. Zero for `y ≥ 0`.
    pub fn separatrix_half_width(&self, y: T) -> T {
        if y >= T::zero() {
            return T::zero();
        }
        (-(y * y * y) / (T::lit(1.5) * self.theta)).sqrt()
    }
}

impl<T: Real> VectorField2D<T> for ArchSystem<T> {
    #[inline]
    fn field(&self, p: Point2<T>) -> Vec2<T> {
        Vec2::new(p.y * p.y, -self.theta * p.x)
    }

    fn jacobian(&self, p: Point2<T>) -> Mat2<T> {
        Mat2::new(T::zero(), T::lit(2.0) * p.y, -self.theta, T::zero())
    }

    fn known_equilibria(&self) -> Option<Vec<Point2<T>>> {
        Some(vec![Point2::origin()])
    }
}

fn check_theta<T: Real>(theta: T) -> Result<(), T> {
    if !theta.is_finite() || theta <= T::zero() {
        return Err(domain(format!("theta must be finite and > 0, got {theta}")));
    }
    Ok(())
}

/// First integral `θx²/2 + y³/3` of the arch system.
pub fn arch_first_integral<T: Real>(theta: T, p: Point2<T>) -> Result<T, T> {
    if !p.is_finite() {
        return Err(domain(format!("non-finite point {p}")));
    }
    Ok(ArchSystem::new(theta)?.first_integral(p))
}

/// Separatrix height `−(3θx²/2)^(1/3)`; zero at the cusp.
pub fn arch_separatrix_height<T: Real>(theta: T, x: T) -> Result<T, T> {
    if !x.is_finite() {
        return Err(domain(format!("non-finite abscissa {x}")));
    }
    Ok(ArchSystem::new(theta)?.separatrix_height(x))
}
