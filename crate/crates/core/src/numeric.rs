//! Numeric tolerances shared across the crate.

/// Tolerance and size limits for the dense linear-algebra layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed deviation of a squared norm (or probability total) from one.
    pub normalization: f64,
    /// Hermiticity, idempotence, orthogonality and unitarity checks.
    pub structure: f64,
    /// Elementwise arithmetic comparisons.
    pub arithmetic: f64,
    /// Largest Hilbert-space dimension accepted by [`crate::hilbert::tensor`].
    pub max_dim: usize,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        normalization: 1e-9,
        structure: 1e-10,
        arithmetic: 1e-12,
        max_dim: 64,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Tolerance on the total of a classical probability table.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Default tolerance for the measurement-independence test.
pub const MEASUREMENT_INDEPENDENCE_TOL: f64 = 1e-9;

/// Negative residue of a mutual-information sum that is clamped to zero.
pub const MI_NEGATIVE_CLAMP: f64 = 1e-12;
