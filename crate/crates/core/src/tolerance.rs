//! Numerical tolerances shared by the library, the CLI and the tests.

use serde::{Deserialize, Serialize};

/// Every threshold the library compares against, with its default value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Max entry of `|M - M^dagger|` accepted as Hermitian.
    pub hermitian: f64,
    /// Allowed deviation of a state's trace from one.
    pub trace: f64,
    /// Most negative eigenvalue accepted for a PSD state.
    pub psd: f64,
    /// Relative SLD support cut: eigenvalue sums below `rank_rel * lambda_max` are kernel.
    pub rank_rel: f64,
    /// Agreement required between the two QFIm formulas.
    pub qfim_consistency: f64,
    /// Default tolerance of the privacy verdicts.
    pub privacy: f64,
    /// Outcome probabilities at or below this are skipped in the CFIm sum.
    pub probability_floor: f64,
    /// Relative singular-value cut for the Cramer-Rao pseudo-inverse.
    pub pinv_rel: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Commutator norm below which two operators are said to commute.
    pub commutation: f64,
    /// Absolute zero threshold of the structural matrix predicates.
    pub structural_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            trace: 1e-10,
            psd: 1e-10,
            rank_rel: 1e-10,
            qfim_consistency: 1e-7,
            privacy: 1e-8,
            probability_floor: 1e-12,
            pinv_rel: 1e-10,
            fd_step: 1e-5,
            commutation: 1e-10,
            structural_zero: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn with_privacy(mut self, tol: f64) -> Self {
        self.privacy = tol;
        self
    }
}
