use thiserror::Error;

/// Crate-wide error type.
///
/// Every fallible operation in this crate reports through this enum so that
/// pipelines (metric -> geodesic -> chart construction) can propagate causes
/// without wrapping layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    // --- signed powers -------------------------------------------------
    #[error("t^[0] is the sign function; call eps() instead of spow(t, 0)")]
    SpowZeroExponent,
    #[error("spow(0, {alpha}) diverges for non-positive exponent")]
    SpowAtZero { alpha: f64 },
    #[error("derivative of spow(., {alpha}) does not exist at t = 0")]
    SpowDerivativeAtZero { alpha: f64 },

    // --- expressions ----------------------------------------------------
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), found {found} (byte {offset})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("spow exponent at byte {offset} must be a constant")]
    NonConstantExponent { offset: usize },
    #[error("missing binding for variable `{name}`")]
    MissingBinding { name: String },
    #[error("domain error: {what}")]
    Domain { what: String },

    // --- root finding / quadrature --------------------------------------
    #[error("no sign change bracketed along the probe segment")]
    NoBracket,
    #[error("quadrature did not reach tolerance {requested} (error estimate {achieved})")]
    QuadratureNonConvergence { requested: f64, achieved: f64 },
    #[error("exponent r = {r} is outside the supported range r > -1")]
    BadExponent { r: f64 },
    #[error("psi(lambda, 0) = {value} violates the positivity requirement")]
    Positivity { value: f64 },
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    // --- metric ----------------------------------------------------------
    #[error("rank deficit exceeds one: |lambda_1| = {smallest:.3e}, |lambda_2| = {second:.3e}")]
    RankDeficit { smallest: f64, second: f64 },
    #[error("metric is near-singular here (|det| = {det:.3e} <= floor {floor:.3e})")]
    NearSingular { det: f64, floor: f64 },
    #[error("<grad sigma, grad sigma> vanishes away from the singular set")]
    ZeroGradient,
    #[error("matrix of expressions is not structurally symmetric at ({row},{col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    // --- integration -----------------------------------------------------
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("trajectory left the domain box at t = {t}")]
    DomainExit { t: f64, point: Vec<f64> },

    // --- charts ------------------------------------------------------------
    #[error("field is tangent to the hypersurface at {point:?}")]
    NotTransverse { point: Vec<f64> },
    #[error("chart folds over itself: {detail}")]
    FoldDetected { detail: String },
    #[error("speed-squared signed power does not vanish to first order: {detail}")]
    NotSimpleEquation { detail: String },
    #[error("extracted psi is not positive: psi({t}) = {value}")]
    NonPositivePsi { t: f64, value: f64 },
    #[error("field is not radical: angle to kernel direction {angle:.3e} exceeds {tol:.3e}")]
    NotRadical { angle: f64, tol: f64 },
    #[error("field lines are not geodesic: residual {residual:.3e} exceeds {tol:.3e}")]
    NotGeodesicField { residual: f64, tol: f64 },
    #[error("field does not extend across the singular set: {detail}")]
    ExtensionFailed { detail: String },
    #[error("integrand changed sign inside a one-sided segment at t = {t}")]
    SignChange { t: f64 },

    // --- catalog / space files --------------------------------------------
    #[error("unknown builtin space `{name}`")]
    UnknownSpace { name: String },
    #[error("bad parameter: {detail}")]
    BadParams { detail: String },
    #[error("space file rejected: {detail}")]
    Schema { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
