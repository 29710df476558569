//! Rotations that straighten selected columns, and the collapse stage.
//!
//! For a selected pair `(y, z)` with column vector `a = F δ_y`, the first
//! rotation acts on `span{δ_z} ⊕ span(supp a)` by
//!
//! ```text
//!     | cos θ          sin θ · u*      |
//!     | -sin θ · u     cos θ·P + (1-P) |         u = a / ‖a‖,  P = u u*
//! ```
//!
//! which is unitary for every θ and at θ = π/2 sends `a` to `‖a‖ δ_z`.
//! The second rotation is a plane rotation in `span{δ_z, δ_y}` sending
//! `δ_z` to `δ_y` at π/2, so the two together straighten column `y` onto
//! `‖a‖ δ_y`.  Because ledger supports are pairwise disjoint and avoid
//! all partner points, the per-pair blocks commute and one sparse unitary
//! handles every pair at once.
//!
//! After straightening, the operator is block triangular with respect to
//! the selected points: [`collapse_cross`] scales away the remaining
//! coupling row block (constant determinant, so invertibility is free),
//! and [`normalize_diagonal`] walks each straightened diagonal entry to 1
//! along a polar path.

use num_complex::Complex64;

use super::selection::SelectionLedger;
use super::HomotopyError;
use crate::operator::SparseOperator;
use crate::space::PointId;

/// Cosine and sine of `t·π/2` with exact values at the endpoints, so that
/// stage junctions compare bit for bit.
fn quarter_turn(t: f64) -> (f64, f64) {
    if t == 0.0 {
        (1.0, 0.0)
    } else if t == 1.0 {
        (0.0, 1.0)
    } else {
        let theta = t * std::f64::consts::FRAC_PI_2;
        (theta.cos(), theta.sin())
    }
}

/// Interpolate `value` to 1 along the polar path
/// `|value|^(1-t) · exp(i·(1-t)·arg value)`, never passing through zero.
pub fn polar_path(value: Complex64, t: f64) -> Complex64 {
    if t == 1.0 {
        return Complex64::new(1.0, 0.0);
    }
    if t == 0.0 {
        return value;
    }
    let (r, arg) = value.to_polar();
    Complex64::from_polar(r.powf(1.0 - t), (1.0 - t) * arg)
}

/// The unitary whose quarter turn moves every selected column onto its
/// partner point's basis vector.  `t` runs over `[0, 1]`.
pub fn first_rotation(
    op: &SparseOperator,
    ledger: &SelectionLedger,
    t: f64,
) -> Result<SparseOperator, HomotopyError> {
    let window = op.window();
    let (c, s) = quarter_turn(t);
    let mut rot = SparseOperator::identity(std::sync::Arc::clone(window));
    for pair in &ledger.pairs {
        let column = op.column(pair.y);
        if column.is_empty() {
            return Err(HomotopyError::ZeroColumn { column: pair.y });
        }
        for (row, _) in &column {
            if !pair.support.contains(row) {
                return Err(HomotopyError::LedgerStale(format!(
                    "column {} has support at {} outside its ledger entry",
                    window.label(pair.y),
                    window.label(*row)
                )));
            }
        }
        let norm = column
            .iter()
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let u: Vec<(PointId, Complex64)> =
            column.iter().map(|&(p, v)| (p, v / norm)).collect();
        rot.set(pair.z, pair.z, Complex64::new(c, 0.0))?;
        for &(p, up) in &u {
            rot.set(pair.z, p, s * up.conj())?;
            rot.set(p, pair.z, -s * up)?;
            for &(q, uq) in &u {
                let kronecker = if p == q {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                rot.set(p, q, kronecker + (c - 1.0) * up * uq.conj())?;
            }
        }
    }
    Ok(rot)
}

/// The plane rotation in each `(z, y)` pair sending `δ_z` to `δ_y` (and
/// `δ_y` to `-δ_z`) at the quarter turn.
pub fn second_rotation(
    op: &SparseOperator,
    ledger: &SelectionLedger,
    t: f64,
) -> Result<SparseOperator, HomotopyError> {
    let window = op.window();
    let (c, s) = quarter_turn(t);
    let mut rot = SparseOperator::identity(std::sync::Arc::clone(window));
    for pair in &ledger.pairs {
        rot.set(pair.z, pair.z, Complex64::new(c, 0.0))?;
        rot.set(pair.y, pair.y, Complex64::new(c, 0.0))?;
        rot.set(pair.z, pair.y, Complex64::new(-s, 0.0))?;
        rot.set(pair.y, pair.z, Complex64::new(s, 0.0))?;
    }
    Ok(rot)
}

/// Outcome of one collapse sample.
#[derive(Debug, Clone)]
pub struct CollapseOutcome {
    pub operator: SparseOperator,
    /// Frobenius mass of the coupling block at `t = 0`.
    pub cross_mass: f64,
    /// Mass of numerical residue discarded from the straightened columns.
    pub dropped: f64,
}

/// Scale the coupling rows of a straightened operator by `1 - t`.
///
/// Expects every selected column to be within `corner_tol` of a multiple
/// of its own basis vector (the rotations guarantee this up to roundoff);
/// the residue is discarded and reported.  The block-triangular shape
/// keeps the determinant constant along the whole collapse.
pub fn collapse_cross(
    op: &SparseOperator,
    ledger: &SelectionLedger,
    t: f64,
    corner_tol: f64,
) -> Result<CollapseOutcome, HomotopyError> {
    let selected: std::collections::BTreeSet<PointId> =
        ledger.pairs.iter().map(|p| p.y).collect();
    let scale = op.to_dense().max_abs().max(1.0);
    let mut out = op.clone();
    let mut dropped_sq = 0.0f64;
    let mut cross_sq = 0.0f64;
    for pair in &ledger.pairs {
        // Straightened column: keep the diagonal, drop the residue.
        for (row, value) in op.column(pair.y) {
            if row == pair.y {
                continue;
            }
            if value.norm() > corner_tol * scale {
                return Err(HomotopyError::NotTriangular {
                    row,
                    col: pair.y,
                });
            }
            dropped_sq += value.norm_sqr();
            out.set(row, pair.y, Complex64::new(0.0, 0.0))?;
        }
        if out.entry(pair.y, pair.y) == Complex64::new(0.0, 0.0) {
            return Err(HomotopyError::ZeroColumn { column: pair.y });
        }
        // Coupling row: scale off-diagonal entries towards zero.
        let row_entries: Vec<(PointId, Complex64)> = op
            .support()
            .filter(|(&(r, c), _)| r == pair.y && c != pair.y && !selected.contains(&c))
            .map(|(&(_, c), &v)| (c, v))
            .collect();
        for (col, value) in row_entries {
            cross_sq += value.norm_sqr();
            let scaled = if t == 1.0 {
                Complex64::new(0.0, 0.0)
            } else {
                value * (1.0 - t)
            };
            out.set(pair.y, col, scaled)?;
        }
    }
    Ok(CollapseOutcome {
        operator: out,
        cross_mass: cross_sq.sqrt(),
        dropped: dropped_sq.sqrt(),
    })
}

/// Walk each straightened diagonal entry to 1 along its polar path.
///
/// Expects the collapse to have finished: selected rows and columns must
/// already be diagonal, otherwise the sample would not be a homotopy of
/// the claimed shape and `NotTriangular` is returned.
pub fn normalize_diagonal(
    op: &SparseOperator,
    ledger: &SelectionLedger,
    t: f64,
) -> Result<SparseOperator, HomotopyError> {
    let mut out = op.clone();
    for pair in &ledger.pairs {
        for (row, _) in op.column(pair.y) {
            if row != pair.y {
                return Err(HomotopyError::NotTriangular {
                    row,
                    col: pair.y,
                });
            }
        }
        if let Some((_, col)) = op
            .support()
            .map(|(&rc, _)| rc)
            .find(|&(r, c)| r == pair.y && c != pair.y)
        {
            return Err(HomotopyError::NotTriangular { row: pair.y, col });
        }
        let value = op.entry(pair.y, pair.y);
        if value == Complex64::new(0.0, 0.0) {
            return Err(HomotopyError::ZeroColumn { column: pair.y });
        }
        out.set(pair.y, pair.y, polar_path(value, t))?;
    }
    Ok(out)
}
