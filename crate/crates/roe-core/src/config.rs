//! Central numeric tolerances.
//!
//! Every approximate comparison in the crate reads its threshold from a
//! [`Tolerances`] value, so a run is reproducible from its configuration
//! alone and no module invents ad-hoc epsilons.  The defaults are deliberate:
//!
//! * `residual` (1e-8) — acceptance threshold for algebraic residuals such as
//!   `‖F·F⁻¹ − Id‖`, unitarity defects at homotopy endpoints, and loop
//!   closure.  Dense LU and Jacobi on windows of a few hundred points leave
//!   residuals around 1e-12; 1e-8 keeps four orders of headroom without
//!   accepting garbage.
//! * `eigen` (1e-12) — convergence threshold for the Jacobi eigensolver and
//!   the power iteration, and the pivot floor below which LU declares a
//!   matrix singular.  This is close to what f64 arithmetic can resolve.
//! * `norm` (1e-6) — relative accuracy requested from operator-norm
//!   estimates, and the threshold for endpoint claims of assembled homotopy
//!   paths, whose errors accumulate over several composed stages.
//!
//! The three are ordered `eigen < residual < norm`: solver convergence must
//! out-resolve the residuals we accept, which in turn must out-resolve the
//! end-to-end claims.

use serde::{Deserialize, Serialize};

/// Numeric thresholds used across the workbench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Acceptance threshold for algebraic residuals (inverse checks,
    /// unitarity defects, junction agreement of path segments).
    pub residual: f64,
    /// Convergence threshold for eigen/singular value iterations and the LU
    /// pivot floor.
    pub eigen: f64,
    /// Relative accuracy of operator-norm estimates and end-to-end endpoint
    /// claims of assembled paths.
    pub norm: f64,
    /// Numerical-rank threshold used when counting defect directions of
    /// compressed operators.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-8,
            eigen: 1e-12,
            norm: 1e-6,
            rank: 1e-8,
        }
    }
}

impl Tolerances {
    /// Sanity check used by constructors that accept user overrides: all
    /// thresholds positive and ordered as documented above.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eigen > 0.0 && self.residual > 0.0 && self.norm > 0.0 && self.rank > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if !(self.eigen <= self.residual && self.residual <= self.norm) {
            return Err("tolerances must satisfy eigen <= residual <= norm".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_ordered() {
        let t = Tolerances::default();
        assert!(t.validate().is_ok());
        assert!(t.eigen < t.residual);
        assert!(t.residual < t.norm);
    }

    #[test]
    fn rejects_unordered_overrides() {
        let t = Tolerances {
            residual: 1e-14,
            ..Tolerances::default()
        };
        assert!(t.validate().is_err());
    }
}
