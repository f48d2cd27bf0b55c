//! Planar dynamical-systems engine built around the arch ridge-flow model
//! `ẋ = y²`, `ẏ = −θx` (θ > 0).
//!
//! Every routine is generic over the scalar type through [`Real`]; the
//! aliases at the crate root fix it to `f64` (or `f32`).

pub mod analyze;
pub mod error;
pub mod integrate;
pub mod portrait;
pub mod scalar;
pub mod sysdef;

pub use analyze::{
    analyze_arch, classify_arch, classify_arch_with, classify_linear, eigen_2x2, find_equilibria,
    opening_angle, sector_census, trace_separatrix, ArchCategory, ArchKind, ArchThresholds,
    EigenKind, EigenPair, Equilibrium, EquilibriumClass, SectorCensus, Separatrices, DEFAULT_APEX,
    DEFAULT_FRACTION,
};
pub use error::Error;
pub use integrate::{
    crossing, crossings, integrate, rk45_step, rk4_step, Axis, Direction, IntegratorConfig, Line,
    Method, Sample, StepResult, StopReason, Trajectory,
};
pub use portrait::{
    build_portrait, export_trajectory_csv, format_sig17, render_svg, seed_points, PortraitSpec,
    Role, Scene, SceneMetadata, Stroke, Style, StyledPath,
};
pub use scalar::Real;
pub use sysdef::{
    arch_first_integral, arch_separatrix_height, eval_field, field_jacobian, ArchSystem, FnField,
    Mat2, Point2, Vec2, VectorField2D, Window,
};

pub type Point = Point2<f64>;
pub type Velocity = Vec2<f64>;
pub type Matrix = Mat2<f64>;
pub type Rect = Window<f64>;
pub type Arch = ArchSystem<f64>;
pub type Config = IntegratorConfig<f64>;
pub type Path = Trajectory<f64>;
pub type Portrait = PortraitSpec<f64>;
pub type PortraitScene = Scene<f64>;
pub type EquilibriumPoint = Equilibrium<f64>;

pub type Arch32 = ArchSystem<f32>;
pub type Point32 = Point2<f32>;
pub type Config32 = IntegratorConfig<f32>;
