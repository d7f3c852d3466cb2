//! Crate-wide error type shared by every solver stage.
//!
//! Each variant names a specific failure mode of one pipeline stage, so
//! callers (and the command-line frontend) can map failures to stable
//! error codes without string matching.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A radial coordinate outside the profile's domain was requested.
    #[error("domain error: radius {r} is outside the admissible range")]
    DomainError { r: f64 },

    /// The swirl ratio q(r) = -(rV)'/W' is undefined because W'(r) = 0.
    #[error("singular profile: W'({r}) = 0, swirl ratio q(r) undefined")]
    SingularProfile { r: f64 },

    /// The potential was evaluated at a point where gamma = n*Lambda - omega
    /// is numerically zero (only possible for real omega).
    #[error("pole error: |gamma({r})| = {gamma_abs:.3e} below the pole guard")]
    PoleError { r: f64, gamma_abs: f64 },

    /// No concentration ring exists for this swirl ratio.
    #[error("no ring: the locator found no admissible beta in ({lo}, {hi}) for q = {q}")]
    NoRing { q: f64, lo: f64, hi: f64 },

    /// An iterative locator failed to converge within its iteration budget.
    #[error("convergence failure in {what} after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// A converged point violates one of the structural ring conditions.
    #[error("assumption violated: {which}")]
    AssumptionViolated { which: String },

    /// The mode grid truncates too much Gaussian tail mass.
    #[error("grid too narrow: tail mass {tail_mass:.3e} exceeds 1e-12")]
    GridTooNarrow { tail_mass: f64 },

    /// Asymptotic formulas were requested outside their validity regime.
    #[error("out of regime: {reason}")]
    OutOfRegime { reason: String },

    /// The ODE integrator exceeded its step budget.
    #[error("stiffness error: integrator exceeded {steps} steps")]
    StiffnessError { steps: usize },

    /// Newton iteration on the matching function did not converge.
    #[error("no convergence after {iterations} iterations (|F| = {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The shooting iteration converged to a decaying (stable-side) root.
    #[error(
        "converged frequency {omega_re}{omega_im:+}i has non-positive imaginary part \
         (not an unstable mode)"
    )]
    LeftSemicirclePlane { omega_re: f64, omega_im: f64 },

    /// The iteration left the uniqueness ball around its seed.
    #[error("seed escape: |omega - seed| = {distance:.3e} exceeds the trust radius {radius:.3e}")]
    SeedEscape { distance: f64, radius: f64 },

    /// A linear system that is provably invertible came out singular.
    #[error("singular matrix in {context}")]
    SingularMatrix { context: String },

    /// A spectral basis change is numerically rank-deficient.
    #[error("ill-conditioned basis change: condition number {cond:.3e} exceeds 1e12")]
    IllConditioned { cond: f64 },

    /// The outer boundary-value operator lost coercivity (frequency outside
    /// the admissible ball).
    #[error("coercivity loss: {detail}")]
    CoercivityLoss { detail: String },

    /// The glued fixed-point iteration is diverging.
    #[error("no contraction: fixed-point iterates grew on {iterations} consecutive sweeps")]
    NoContraction { iterations: usize },

    /// The winding number of the reduced function around the search circle is
    /// zero: no root inside.
    #[error("winding zero on |omega_hat| = {radius:.3e}: no root inside the disc")]
    WindingZero { radius: f64 },

    /// More than one root inside the search circle.
    #[error("winding {winding} on |omega_hat| = {radius:.3e}: search disc too large")]
    WindingMultiple { winding: i64, radius: f64 },

    /// The discrete curl system of the Biot-Savart solver is rank-deficient.
    #[error("singular Biot-Savart system: {detail}")]
    SingularBS { detail: String },

    /// No eigenvalue with positive real part was found.
    #[error("no unstable eigenvalue: max Re lambda = {max_real:.3e} below threshold")]
    NoUnstable { max_real: f64 },

    /// A growth-bound maximization came out negative.
    #[error("negative bound: maximum of the bound integrand is {max_value:.3e} < 0")]
    NegativeBound { max_value: f64 },

    /// A reporting step was invoked before its prerequisite stage ran.
    #[error("missing prerequisite: {what}")]
    MissingPrerequisite { what: String },

    /// A run configuration failed validation.
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },

    /// Filesystem failure while reading or writing run outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
