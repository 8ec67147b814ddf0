//! Numerical laboratory for random transcendental dynamics.
//!
//! A random system here is a skew product: an invertible ergodic base map
//! `θ : X → X` drives a family of transcendental fiber maps
//! `f_x : ℂ → Ĉ`, and orbits are compositions
//! `f_x^n = f_{θ^{n-1}(x)} ∘ ⋯ ∘ f_x`. The crate builds, on truncated point
//! clouds approximating the random Julia sets `𝒥_x`, the whole thermodynamic
//! tool chain for such systems:
//!
//! * [`driving`] — the base system (rotations, two-sided Bernoulli shifts)
//!   and the measurable assignment of fiber parameters;
//! * [`maps`] — concrete fiber families (`η·e^z`, `λ·tan z`, polynomial
//!   fixtures) with exact derivatives and branch-indexed inverses;
//! * [`nevanlinna`] — spherical characteristic `T̊(r)`, counting functions,
//!   first/second main theorem checks and the preimage tail sums that make
//!   the transfer operator summable;
//! * [`julia`] — backward-orbit approximation of `𝒥_x`, expansion constants
//!   and mixing times;
//! * [`transfer`] — the transfer operator `ℒ_{x,t}` in the rescaled metric
//!   `|dz|/(1+|z|)^τ`, its normalized version, dual action on measures,
//!   distortion and two-norm diagnostics;
//! * [`gibbs`] — fiberwise conformal measures `ν_x`, normalizers `λ_x`,
//!   invariant densities `ρ_x` and convergence gauges;
//! * [`cones`] — the invariant positive cones, their constant ledger and the
//!   Bowen-style contraction diagnostics;
//! * [`stats`] — decay of correlations and central-limit statistics for the
//!   invariant family `μ_x = ρ_x ν_x`;
//! * [`config`] / [`pipeline`] — experiment configs, named pipelines and
//!   deterministic CSV artifacts.
//!
//! Everything is deterministic given a config and a seed: summation orders
//! are fixed and parallel sections only distribute work whose results are
//! reassembled in a fixed order.

pub mod artifacts;
pub mod cones;
pub mod config;
pub mod driving;
pub mod fit;
pub mod gibbs;
pub mod grid;
pub mod julia;
pub mod maps;
pub mod nevanlinna;
pub mod pipeline;
pub mod quad;
pub mod stats;
pub mod transfer;

pub use driving::{BasePoint, DrivingSystem};
pub use maps::FiberMap;

/// Errors surfaced by the numeric layers.
///
/// Precondition violations (pole proximity, omitted values, divergent
/// exponents) are reported as errors rather than NaNs so that pipelines can
/// name the failed hypothesis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("orbit length overflow: |{requested}| exceeds configured maximum {max}")]
    OrbitOverflow { requested: i64, max: i64 },
    #[error("evaluation too close to a pole of the fiber map (|z - pole| < {tol:e})")]
    PoleProximity { tol: f64 },
    #[error("{0} is an omitted value of this family; it has no preimages")]
    OmittedValue(String),
    #[error("empty branch range")]
    EmptyBranchRange,
    #[error("singular value inside the requested branch disk: {0}")]
    SingularValueInDisk(String),
    #[error("inverse branch lost continuity tracking: {0}")]
    BranchMismatch(String),
    #[error("need at least {need} sample points, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("no normalization base point within tolerance (radius {radius}); the truncation radius may violate the base-point condition for these parameters")]
    NoBasePoint { radius: f64 },
    #[error("quadrature failed to converge: {0}")]
    QuadratureNonConvergence(String),
    #[error("tail exponent {s} does not exceed the declared order bound {rho}; the preimage series diverges")]
    TailDivergence { s: f64, rho: f64 },
    #[error("radius {r} below the admissible minimum {r0} for the error term")]
    RadiusBelowR0 { r: f64, r0: f64 },
    #[error("targets must be pairwise distinct")]
    CoincidentTargets,
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("radii grid must span at least {need} decades, got {got:.3}")]
    InsufficientSpan { need: f64, got: f64 },
    #[error("julia approximation produced an empty cloud (wrong parameter regime or truncation radius too small)")]
    EmptyCloud,
    #[error("regression fit failed: {0}")]
    FitFailure(String),
    #[error("no grid registered for fiber {0}")]
    UnregisteredGrid(usize),
    #[error("grid mismatch: density lives on fiber {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("truncation tail bound {bound:e} exceeds the configured budget {budget:e}; increase the branch cutoff")]
    TailBudgetExceeded { bound: f64, budget: f64 },
    #[error("normalizer is not positive: {0}")]
    NonPositiveNormalizer(f64),
    #[error("measure has zero mass")]
    ZeroMass,
    #[error("invariant density degenerate (value below {min:e} on the grid)")]
    DegenerateDensity { min: f64 },
    #[error("expansion did not exceed 1 (γ = {gamma}); no finite cone iteration depth exists")]
    NoExpansion { gamma: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    ConfigParse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
