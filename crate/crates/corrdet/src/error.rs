//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension {d} outside supported range 1..={max}")]
    DimensionOutOfRange { d: usize, max: usize },

    #[error("coordinate subset must be nonempty")]
    EmptySubset,

    #[error("coordinate index {index} out of range for dimension {d}")]
    IndexOutOfRange { index: usize, d: usize },

    #[error("subset collection members must be distinct")]
    DuplicateSubset,

    #[error("{name} = {value} outside required range {expected}")]
    ArgOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("need at least {min} hypotheses, got {got}")]
    TooFewHypotheses { got: usize, min: usize },

    #[error("hypothesis index {index} out of range for family of size {k}")]
    HypothesisOutOfRange { index: usize, k: usize },

    #[error("probability mass at atom {index} is negative ({mass})")]
    NegativeMass { index: usize, mass: f64 },

    #[error("probability masses sum to {total}, expected 1 within {tol}")]
    MassNotNormalized { total: f64, tol: f64 },

    #[error("mass vector length {len} does not match space size {size}")]
    MassLengthMismatch { len: usize, size: usize },

    #[error("operands live on different sample spaces")]
    SpaceMismatch,

    #[error("base distribution has zero mass at atom {index}; full support required")]
    ZeroBaseMass { index: usize },

    #[error(
        "distribution {i} deviates from the base by {deviation} at atom {index}, beyond radius {rho}"
    )]
    NotCentered {
        i: usize,
        index: usize,
        deviation: f64,
        rho: f64,
    },

    #[error("exact enumeration needs {required} atoms, budget is {budget}")]
    AtomBudgetExceeded { required: u128, budget: u64 },

    #[error("enumeration would visit {required} collections, budget is {budget}")]
    EnumerationBudgetExceeded { required: u128, budget: u64 },

    #[error("tail bound needs n >= {required_n:.3}, got n = {n}")]
    TailBoundPrecondition { required_n: f64, n: u64 },

    #[error("family has no subset labels; fast path unavailable")]
    NotParityFamily,

    #[error("fast-path moment {fast} and brute-force moment {brute} disagree beyond {tol}")]
    CollectionMomentMismatch { fast: f64, brute: f64, tol: f64 },

    #[error("channel row {row} sums to {total}, expected 1 within {tol}")]
    RowNotNormalized { row: usize, total: f64, tol: f64 },

    #[error("channel row count {rows} does not match input space size {size}")]
    RowCountMismatch { rows: usize, size: usize },

    #[error("coordinate must be binary (2 atoms), got {size}")]
    NotBinary { size: usize },

    #[error("first marginal must be uniform on 2 atoms (got Pr = {p0}); use zzi_margin instead")]
    MarginalNotUniform { p0: f64 },

    #[error("first marginal is degenerate (one side has zero mass)")]
    DegenerateMarginal,

    #[error("coordinate blocks {i} and {j} are dependent (deviation {deviation})")]
    DependentFactors { i: usize, j: usize, deviation: f64 },

    #[error("factor sizes multiply to {product}, joint second coordinate has {size} atoms")]
    FactorSizeMismatch { product: u128, size: usize },

    #[error("correlation rho = {rho} exceeds the admissible maximum {max_rho} for k = {k}, n = {n}")]
    RhoGateViolated {
        rho: f64,
        max_rho: f64,
        k: usize,
        n: usize,
    },

    #[error("sigma = {sigma} exceeds the admissible maximum {max_sigma} for the stack gate")]
    SigmaGateViolated { sigma: f64, max_sigma: f64 },

    #[error("truncation gate sigma*R^2/(1-sigma^2) = {value} exceeds 1")]
    TruncationGateViolated { value: f64 },

    #[error("pair coordinates must differ, got ({index}, {index})")]
    DegeneratePair { index: usize },

    #[error("coordinate pairs must be distinct")]
    PairsNotDistinct,

    #[error("pair count {r} outside supported range {min}..={max}")]
    PairCountOutOfRange { r: usize, min: usize, max: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix inversion failed")]
    SingularMatrix,

    #[error("adaptive quadrature failed to reach tolerance {tol} ({detail})")]
    QuadratureFailed { tol: f64, detail: &'static str },

    #[error("state budget {budget} bits too small: need at least {min_bits} bits ({detail})")]
    MemoryTooSmall {
        budget: usize,
        min_bits: usize,
        detail: &'static str,
    },

    #[error("state grew to {bits} bits at step {step}, budget is {budget}")]
    StateSizeViolation {
        step: u64,
        bits: usize,
        budget: usize,
    },

    #[error("transcript used {used} bits, declared worst case is {declared}")]
    ProtocolBudgetExceeded { used: usize, declared: usize },

    #[error("need at least {min_m} machines for this configuration, got {m}")]
    MachinesTooFew { m: usize, min_m: usize },

    #[error("need at least {needed} samples, got {available}")]
    SamplesTooFew { needed: usize, available: usize },

    #[error("per-machine budget {budget} bits holds no counter (one needs {min_bits} bits)")]
    MachineBudgetTooSmall { budget: usize, min_bits: usize },

    #[error("internal consistency check failed: {detail}")]
    Internal { detail: String },
}
