//! Band-dominated operators on a window.
//!
//! A [`SparseOperator`] is a finitely supported matrix indexed by window
//! points, with its *propagation* — the largest distance between a row and
//! column index carrying a nonzero entry — tracked exactly through every
//! algebraic operation.  Propagation is the quantity the whole workbench
//! revolves around: products add it, adjoints preserve it, and all homotopy
//! constructions promise explicit bounds on it.
//!
//! Entries are never rounded away implicitly; only exact zeros are pruned.
//! Deliberate truncation goes through [`SparseOperator::truncate_to_band`],
//! which measures and bounds the perturbation it introduces.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::config::Tolerances;
use crate::linalg::{self, CMat, LinalgError};
use crate::rational::Dist;
use crate::space::{is_r_sparse, PointId, Window};

#[derive(Debug, Error)]
pub enum OperatorError {
    /// Two operands live on different windows.
    #[error("operators live on different windows")]
    WindowMismatch,
    /// A matrix index fell outside the window.
    #[error("entry index {index} out of range for a window of {size} points")]
    IndexOutOfRange { index: usize, size: usize },
    /// Inversion failed; the operator is singular at working precision.
    #[error("operator is not invertible: {0}")]
    NotInvertible(#[source] LinalgError),
    /// A requested truncation would change the operator more than allowed.
    #[error("truncation perturbs by {perturbation:.3e}, allowed {allowed:.3e}")]
    PerturbationTooLarge { perturbation: f64, allowed: f64 },
    /// The sparse-corner hypothesis failed: the set is not sparse enough
    /// for this operator's propagation, witnessed by an off-diagonal entry.
    #[error("corner over the given set is not diagonal: entry ({row},{col}) survives")]
    LemmaViolated { row: PointId, col: PointId },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A finitely supported operator on `ℓ²(window)`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    window: Arc<Window>,
    entries: BTreeMap<(PointId, PointId), Complex64>,
}

impl SparseOperator {
    pub fn zero(window: Arc<Window>) -> SparseOperator {
        SparseOperator {
            window,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(window: Arc<Window>) -> SparseOperator {
        let entries = (0..window.n())
            .map(|i| ((i, i), Complex64::new(1.0, 0.0)))
            .collect();
        SparseOperator { window, entries }
    }

    pub fn from_entries(
        window: Arc<Window>,
        entries: impl IntoIterator<Item = (PointId, PointId, Complex64)>,
    ) -> Result<SparseOperator, OperatorError> {
        let mut op = SparseOperator::zero(window);
        for (row, col, value) in entries {
            op.set(row, col, value)?;
        }
        Ok(op)
    }

    pub fn from_dense(window: Arc<Window>, m: &CMat) -> Result<SparseOperator, OperatorError> {
        let n = window.n();
        if m.rows != n || m.cols != n {
            return Err(OperatorError::IndexOutOfRange {
                index: m.rows.max(m.cols),
                size: n,
            });
        }
        let mut entries = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    entries.insert((i, j), v);
                }
            }
        }
        Ok(SparseOperator {
            window,
            entries,
        })
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn n(&self) -> usize {
        self.window.n()
    }

    pub fn entry(&self, row: PointId, col: PointId) -> Complex64 {
        self.entries
            .get(&(row, col))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Set one entry; exact zeros are removed from the support.
    pub fn set(
        &mut self,
        row: PointId,
        col: PointId,
        value: Complex64,
    ) -> Result<(), OperatorError> {
        let n = self.window.n();
        if row >= n || col >= n {
            return Err(OperatorError::IndexOutOfRange {
                index: row.max(col),
                size: n,
            });
        }
        if value == Complex64::new(0.0, 0.0) {
            self.entries.remove(&(row, col));
        } else {
            self.entries.insert((row, col), value);
        }
        Ok(())
    }

    pub fn support(&self) -> impl Iterator<Item = (&(PointId, PointId), &Complex64)> {
        self.entries.iter()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Nonzero entries of one column, as (row, value).
    pub fn column(&self, col: PointId) -> Vec<(PointId, Complex64)> {
        self.entries
            .iter()
            .filter(|((_, c), _)| *c == col)
            .map(|((r, _), v)| (*r, *v))
            .collect()
    }

    /// Largest distance between a row and column index in the support;
    /// zero for diagonal (and empty) operators.
    pub fn propagation(&self) -> Dist {
        self.entries
            .keys()
            .map(|&(r, c)| self.window.dist(r, c))
            .max()
            .unwrap_or(Dist::ZERO)
    }

    pub fn adjoint(&self) -> SparseOperator {
        let entries = self
            .entries
            .iter()
            .map(|(&(r, c), v)| ((c, r), v.conj()))
            .collect();
        SparseOperator {
            window: Arc::clone(&self.window),
            entries,
        }
    }

    pub fn add(&self, rhs: &SparseOperator) -> Result<SparseOperator, OperatorError> {
        self.same_window(rhs)?;
        let mut out = self.clone();
        for (&(r, c), v) in &rhs.entries {
            let sum = out.entry(r, c) + v;
            out.set(r, c, sum)?;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &SparseOperator) -> Result<SparseOperator, OperatorError> {
        self.same_window(rhs)?;
        let mut out = self.clone();
        for (&(r, c), v) in &rhs.entries {
            let diff = out.entry(r, c) - v;
            out.set(r, c, diff)?;
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> SparseOperator {
        if s == Complex64::new(0.0, 0.0) {
            return SparseOperator::zero(Arc::clone(&self.window));
        }
        let entries = self.entries.iter().map(|(&k, v)| (k, v * s)).collect();
        SparseOperator {
            window: Arc::clone(&self.window),
            entries,
        }
    }

    /// Operator product.  Propagation is subadditive — the product's is at
    /// most the sum of the factors' — because a surviving entry `(i,j)`
    /// passes through some `k` with `d(i,j) ≤ d(i,k) + d(k,j)`; this holds
    /// unconditionally once the window metric is valid, so it is asserted.
    pub fn compose(&self, rhs: &SparseOperator) -> Result<SparseOperator, OperatorError> {
        self.same_window(rhs)?;
        // Group lhs entries by column so each rhs entry touches only the
        // rows that can meet it.
        let mut by_col: BTreeMap<PointId, Vec<(PointId, Complex64)>> = BTreeMap::new();
        for (&(r, c), &v) in &self.entries {
            by_col.entry(c).or_default().push((r, v));
        }
        let mut acc: BTreeMap<(PointId, PointId), Complex64> = BTreeMap::new();
        for (&(k, j), &w) in &rhs.entries {
            if let Some(rows) = by_col.get(&k) {
                for &(i, v) in rows {
                    *acc.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += v * w;
                }
            }
        }
        acc.retain(|_, v| *v != Complex64::new(0.0, 0.0));
        let out = SparseOperator {
            window: Arc::clone(&self.window),
            entries: acc,
        };
        debug_assert!(
            out.propagation() <= self.propagation() + rhs.propagation(),
            "propagation must be subadditive under composition"
        );
        Ok(out)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n()];
        for (&(r, c), &a) in &self.entries {
            out[r] += a * v[c];
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.n();
        let mut m = CMat::zeros(n, n);
        for (&(r, c), &v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// Operator norm via power iteration on `F*F`, using sparse products.
    pub fn operator_norm(&self, tol: &Tolerances, seed: u64) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let adj = self.adjoint();
        let top = linalg::power_largest_eig(
            self.n(),
            |v| adj.apply(&self.apply(v)),
            tol,
            seed,
        );
        top.max(0.0).sqrt()
    }

    /// Smallest singular value (0 when singular at working precision).
    pub fn sigma_min(&self, tol: &Tolerances, seed: u64) -> f64 {
        linalg::sigma_min_dense(&self.to_dense(), tol, seed)
    }

    /// Frobenius norm of the difference, a cheap upper-bound-free distance
    /// used for exactness checks.
    pub fn frobenius_distance(&self, rhs: &SparseOperator) -> Result<f64, OperatorError> {
        Ok(self.sub(rhs)?.to_dense().frobenius_norm())
    }

    /// `‖F F* − 1‖` and `‖F* F − 1‖`, the unitarity defects.
    pub fn unitarity_defect(&self, tol: &Tolerances, seed: u64) -> Result<f64, OperatorError> {
        let id = SparseOperator::identity(Arc::clone(&self.window));
        let left = self.compose(&self.adjoint())?.sub(&id)?;
        let right = self.adjoint().compose(self)?.sub(&id)?;
        Ok(left
            .operator_norm(tol, seed)
            .max(right.operator_norm(tol, seed)))
    }

    /// Invert, returning the inverse together with a checkable certificate.
    pub fn invert(&self, tol: &Tolerances, seed: u64) -> Result<Inversion, OperatorError> {
        let dense = self.to_dense();
        let lu = linalg::lu_factor(&dense, tol).map_err(OperatorError::NotInvertible)?;
        let inverse = SparseOperator::from_dense(Arc::clone(&self.window), &lu.inverse())?;
        let id = SparseOperator::identity(Arc::clone(&self.window));
        let residual = self
            .compose(&inverse)?
            .sub(&id)?
            .operator_norm(tol, seed)
            .max(inverse.compose(self)?.sub(&id)?.operator_norm(tol, seed));
        let sigma_min = linalg::sigma_min_dense(&dense, tol, seed);
        Ok(Inversion {
            inverse,
            witness: InvertibilityWitness {
                residual,
                sigma_min,
                norm: self.operator_norm(tol, seed),
            },
        })
    }

    /// Drop all entries with `d(row, col) > radius`, provided doing so
    /// perturbs the operator by at most `max_perturbation` in norm.
    pub fn truncate_to_band(
        &self,
        radius: Dist,
        max_perturbation: f64,
        tol: &Tolerances,
        seed: u64,
    ) -> Result<BandTruncation, OperatorError> {
        let mut kept = self.clone();
        let mut dropped = SparseOperator::zero(Arc::clone(&self.window));
        let victims: Vec<(PointId, PointId, Complex64)> = self
            .entries
            .iter()
            .filter(|(&(r, c), _)| self.window.dist(r, c) > radius)
            .map(|(&(r, c), &v)| (r, c, v))
            .collect();
        for (r, c, v) in victims {
            kept.set(r, c, Complex64::new(0.0, 0.0))?;
            dropped.set(r, c, v)?;
        }
        let perturbation = dropped.operator_norm(tol, seed);
        if perturbation > max_perturbation {
            return Err(OperatorError::PerturbationTooLarge {
                perturbation,
                allowed: max_perturbation,
            });
        }
        Ok(BandTruncation {
            operator: kept,
            perturbation,
        })
    }

    fn same_window(&self, rhs: &SparseOperator) -> Result<(), OperatorError> {
        if Arc::ptr_eq(&self.window, &rhs.window)
            || self.window.points() == rhs.window.points()
        {
            Ok(())
        } else {
            Err(OperatorError::WindowMismatch)
        }
    }
}

/// Inverse plus the evidence that it is one.
#[derive(Debug, Clone)]
pub struct Inversion {
    pub inverse: SparseOperator,
    pub witness: InvertibilityWitness,
}

/// Numerical certificate for an inversion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvertibilityWitness {
    /// `max(‖F F⁻¹ − 1‖, ‖F⁻¹ F − 1‖)`.
    pub residual: f64,
    /// Smallest singular value of `F`.
    pub sigma_min: f64,
    /// `‖F‖`.
    pub norm: f64,
}

/// Result of a deliberate band truncation.
#[derive(Debug, Clone)]
pub struct BandTruncation {
    pub operator: SparseOperator,
    /// Norm of what was dropped.
    pub perturbation: f64,
}

/// Split of an operator against a sparse set: the corner over the set is
/// diagonal, everything else is returned unchanged.
#[derive(Debug, Clone)]
pub struct CornerSplit {
    /// Diagonal entries of the corner, one per set point.
    pub corner_diagonal: Vec<(PointId, Complex64)>,
    /// `F` minus the (diagonal) corner.
    pub off_corner: SparseOperator,
}

/// Compress to the corner over an `r`-sparse set and split off its diagonal.
///
/// When the set is `r`-sparse and the operator has propagation ≤ `r`, the
/// corner `P F P` is automatically diagonal: an off-diagonal corner entry
/// would join two set points at distance ≤ `r`.  Violations are reported
/// with the offending entry rather than silently zeroed.
pub fn sparse_corner_split(
    op: &SparseOperator,
    set: &[PointId],
    r: Dist,
) -> Result<CornerSplit, OperatorError> {
    let hypothesis_holds =
        is_r_sparse(op.window(), set, r).sparse && op.propagation() <= r;
    let in_set: std::collections::BTreeSet<PointId> = set.iter().copied().collect();
    let mut corner_diagonal = Vec::new();
    let mut off_corner = op.clone();
    for (&(row, col), &v) in &op.entries {
        if in_set.contains(&row) && in_set.contains(&col) {
            if row == col {
                corner_diagonal.push((row, v));
                off_corner.set(row, col, Complex64::new(0.0, 0.0))?;
            } else {
                debug_assert!(
                    !hypothesis_holds,
                    "a sparse set cannot carry off-diagonal corner entries"
                );
                return Err(OperatorError::LemmaViolated { row, col });
            }
        }
    }
    // Points of the set the operator does not touch still own a (zero)
    // diagonal slot so the caller sees the full corner.
    for &p in set {
        if !corner_diagonal.iter().any(|&(q, _)| q == p) {
            corner_diagonal.push((p, Complex64::new(0.0, 0.0)));
        }
    }
    corner_diagonal.sort_by_key(|&(p, _)| p);
    corner_diagonal.dedup_by_key(|&mut (p, _)| p);
    Ok(CornerSplit {
        corner_diagonal,
        off_corner,
    })
}

/// Point on the straight-line retraction of an invertible operator onto its
/// unitary part: `((1−t)·1 + t·(F F*)^{−1/2})·F`.
///
/// At `t = 0` this is `F`; at `t = 1` it is the unitary `(F F*)^{−1/2} F`.
/// Every point of the path is invertible because `(1−t) + t·s > 0` for all
/// singular values `s > 0` of `(F F*)^{−1/2}`.
pub fn unitary_retraction(
    op: &SparseOperator,
    t: f64,
    tol: &Tolerances,
) -> Result<SparseOperator, OperatorError> {
    let dense = op.to_dense();
    let gram = dense.mul(&dense.adjoint());
    let inv_sqrt = linalg::hermitian_inv_sqrt(&gram, tol)?;
    let n = op.n();
    let mut blend = CMat::identity(n).scale(Complex64::new(1.0 - t, 0.0));
    for i in 0..n {
        for j in 0..n {
            blend[(i, j)] += inv_sqrt[(i, j)] * Complex64::new(t, 0.0);
        }
    }
    SparseOperator::from_dense(Arc::clone(op.window()), &blend.mul(&dense))
}

/// The shift along an explicit successor map: `δ_x ↦ δ_{succ(x)}` for every
/// pair present in the window, a partial isometry in general.
pub fn shift_operator(
    window: Arc<Window>,
    pairs: impl IntoIterator<Item = (PointId, PointId)>,
) -> Result<SparseOperator, OperatorError> {
    let one = Complex64::new(1.0, 0.0);
    SparseOperator::from_entries(window, pairs.into_iter().map(|(from, to)| (to, from, one)))
}

/// Random operator supported on the band `d(row, col) ≤ radius`, entries
/// uniform in the complex unit square, deterministic in the seed.
pub fn random_band(window: Arc<Window>, radius: Dist, seed: u64) -> SparseOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = window.n();
    let mut entries = BTreeMap::new();
    for r in 0..n {
        for c in 0..n {
            if window.dist(r, c) <= radius {
                let re = rng.gen_range(-1.0..1.0);
                let im = rng.gen_range(-1.0..1.0);
                let v = Complex64::new(re, im);
                if v != Complex64::new(0.0, 0.0) {
                    entries.insert((r, c), v);
                }
            }
        }
    }
    SparseOperator { window, entries }
}

/// Random *unitary* band operator: one sweep of complex Givens rotations on
/// disjoint pairs at distance ≤ `radius`, so the result is exactly a
/// product of commuting unitaries with propagation ≤ `radius`.
pub fn random_band_unitary(window: Arc<Window>, radius: Dist, seed: u64) -> SparseOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = window.n();
    let mut used = vec![false; n];
    let mut op = SparseOperator::identity(Arc::clone(&window));
    for p in 0..n {
        if used[p] {
            continue;
        }
        let partner = (p + 1..n).find(|&q| !used[q] && window.dist(p, q) <= radius);
        let Some(q) = partner else {
            // Leave an identity slot, possibly with a random phase.
            let phase = Complex64::from_polar(1.0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
            op.set(p, p, phase).expect("index in range");
            used[p] = true;
            continue;
        };
        used[p] = true;
        used[q] = true;
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
        let phi: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (c, s) = (theta.cos(), theta.sin());
        let e = Complex64::from_polar(1.0, phi);
        op.set(p, p, Complex64::new(c, 0.0)).expect("index in range");
        op.set(p, q, e * s).expect("index in range");
        op.set(q, p, -e.conj() * s).expect("index in range");
        op.set(q, q, Complex64::new(c, 0.0)).expect("index in range");
    }
    op
}

// --- JSON: {"window": ..., "entries": [[row, col, re, im], ...]} ----------

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    window: Window,
    entries: Vec<(usize, usize, f64, f64)>,
}

impl Serialize for SparseOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        OperatorJson {
            window: (*self.window).clone(),
            entries: self
                .entries
                .iter()
                .map(|(&(r, c), v)| (r, c, v.re, v.im))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<SparseOperator, D::Error> {
        let raw = OperatorJson::deserialize(deserializer)?;
        let window = Arc::new(raw.window);
        let mut op = SparseOperator::zero(window);
        for (r, c, re, im) in raw.entries {
            op.set(r, c, Complex64::new(re, im))
                .map_err(D::Error::custom)?;
        }
        Ok(op)
    }
}
