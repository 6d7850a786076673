use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IfsError {
    #[error("degenerate derivative: |d_z| = {dz_abs}, |d_zbar| = {dzbar_abs} coincide within tolerance")]
    DegenerateDerivative { dz_abs: f64, dzbar_abs: f64 },

    #[error("power-modulus map is singular at the origin")]
    OriginSingularity,

    #[error("Newton iteration for inverse branch {branch} diverged at w = {w}")]
    NewtonDivergence { branch: usize, w: Complex64 },

    #[error("point {point} lies outside the working region")]
    OutsideRegion { point: Complex64 },

    #[error("branch {branch} is not contracting: l = {l} at z = {point}")]
    NotContracting { branch: usize, point: Complex64, l: f64 },

    #[error("branch {branch} maps {point} to {image}, which escapes the region")]
    RegionNotInvariant {
        branch: usize,
        point: Complex64,
        image: Complex64,
    },

    #[error("images of branches {first} and {second} are not disjoint")]
    BranchOverlap { first: usize, second: usize },

    #[error("enumeration needs {needed} words, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("fixed-point iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("no sign change for the pressure on [0, {t_hi}]; potential is not strictly negative")]
    NoSignChange { t_hi: f64 },

    #[error("system is not regular: {detail}")]
    NotRegular { detail: String },

    #[error("beta = {beta} is not below alpha = {alpha}")]
    BetaNotBelowAlpha { beta: f64, alpha: f64 },

    #[error("no delta >= {floor} satisfies the distortion conditions")]
    DeltaUnderflow { floor: f64 },

    #[error("degenerate box-count fit: {reason}")]
    DegenerateFit { reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IfsError>;
