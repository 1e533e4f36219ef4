use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("need at least {needed} samples for a degree-{degree} fit, got {got}")]
    TooFewSamples {
        degree: usize,
        needed: usize,
        got: usize,
    },

    #[error("rank-deficient least-squares system (coincident or degenerate nodes)")]
    RankDeficient,

    #[error("the zero polynomial has no well-defined roots")]
    ZeroPolynomial,

    #[error("x-basis projection needs an even-degree polynomial, got degree {0}")]
    OddDegree(usize),

    #[error("evaluation point {re}{im:+}i is within {radius} of the pole at u = -1/2")]
    NearPole { re: f64, im: f64, radius: f64 },

    #[error("evaluation point {re}{im:+}i is too close to a zero of Q")]
    NearQZero { re: f64, im: f64 },

    #[error("Bethe root {re}{im:+}i sits on a pole of the energy summand")]
    PoleRoot { re: f64, im: f64 },

    #[error("energy has non-negligible imaginary part {im:e} (real part {re})")]
    ComplexEnergy { re: f64, im: f64 },

    #[error("invalid boundary parameters: {0}")]
    InvalidParams(String),

    #[error("chain length {n} outside the supported range 1..={cap}")]
    ChainLength { n: usize, cap: usize },

    #[error("diagonal boundaries (xi = 0) are not supported by the inhomogeneous T-Q solve")]
    DiagonalBoundary,

    #[error("state index {index} out of range for {len} levels")]
    StateIndex { index: usize, len: usize },

    #[error(
        "transfer-matrix eigenvalue reconstruction failed for state {state}: held-out residual {residual:e}"
    )]
    LambdaFit { state: usize, residual: f64 },

    #[error("T-Q equation unsolved for state {state}: residual {residual:e} exceeds {tol:e}")]
    Unsolved { state: usize, residual: f64, tol: f64 },

    #[error("list length mismatch: {0}")]
    LengthMismatch(String),
}
