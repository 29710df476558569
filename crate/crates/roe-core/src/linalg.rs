//! Dense complex linear algebra for window-sized matrices.
//!
//! Windows top out around two thousand points, so plain dense kernels are the
//! right tool: LU with partial pivoting for inversion and determinants, a
//! cyclic Jacobi eigensolver for Hermitian matrices (simple, accurate, and
//! free of external dependencies), and power iteration for extremal singular
//! values.  All routines are deterministic: the power iteration starts from a
//! seeded SplitMix64 vector, never from entropy.

use num_complex::Complex64;
use thiserror::Error;

use crate::config::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    /// LU hit a pivot below the singularity floor at the given elimination
    /// step.
    #[error("matrix numerically singular at elimination step {step} (pivot {pivot:.3e})")]
    Singular { step: usize, pivot: f64 },
    /// A routine that needs a positive (semi)definite matrix saw a negative
    /// eigenvalue.
    #[error("matrix not positive definite (eigenvalue {eigenvalue:.3e})")]
    NotPositive { eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> CMat {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(rhs.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..self.cols {
                acc += self[(r, c)] * v[c];
            }
            out[r] = acc;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest column-wise entry magnitude; cheap scale estimate.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    /// Row permutation: `perm[k]` is the original row now in position `k`.
    perm: Vec<usize>,
    /// Sign of the permutation (+1/-1), needed for determinants.
    perm_sign: f64,
}

/// Factor a square matrix, failing if a pivot falls below
/// `tol.eigen * max_abs` (absolute floor `tol.eigen` for zero matrices).
pub fn lu_factor(a: &CMat, tol: &Tolerances) -> Result<Lu, LinalgError> {
    assert!(a.is_square(), "LU needs a square matrix");
    let n = a.rows;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut perm_sign = 1.0;
    let floor = tol.eigen * a.max_abs().max(1.0);
    for k in 0..n {
        // Partial pivoting: bring the largest remaining entry of column k up.
        let mut best = k;
        let mut best_mag = lu[(k, k)].norm();
        for r in (k + 1)..n {
            let mag = lu[(r, k)].norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag < floor {
            return Err(LinalgError::Singular {
                step: k,
                pivot: best_mag,
            });
        }
        if best != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(best, c)];
                lu[(best, c)] = tmp;
            }
            perm.swap(k, best);
            perm_sign = -perm_sign;
        }
        let pivot = lu[(k, k)];
        for r in (k + 1)..n {
            let factor = lu[(r, k)] / pivot;
            lu[(r, k)] = factor;
            for c in (k + 1)..n {
                let sub = factor * lu[(k, c)];
                lu[(r, c)] -= sub;
            }
        }
    }
    Ok(Lu {
        lu,
        perm,
        perm_sign,
    })
}

impl Lu {
    pub fn n(&self) -> usize {
        self.lu.rows
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        assert_eq!(b.len(), n);
        // Forward substitution on the permuted right-hand side.
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = b[self.perm[i]];
            for j in 0..i {
                acc -= self.lu[(i, j)] * y[j];
            }
            y[i] = acc;
        }
        // Back substitution.
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> CMat {
        let n = self.n();
        let mut inv = CMat::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            e[c] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            e[c] = Complex64::new(0.0, 0.0);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        inv
    }

    /// Determinant as `(argument, log-magnitude)`; the split representation
    /// survives windows large enough to overflow a plain product of pivots.
    pub fn det_arg_logmag(&self) -> (f64, f64) {
        let mut arg = if self.perm_sign < 0.0 {
            std::f64::consts::PI
        } else {
            0.0
        };
        let mut logmag = 0.0;
        for i in 0..self.n() {
            let p = self.lu[(i, i)];
            arg += p.arg();
            logmag += p.norm().ln();
        }
        // Normalise the argument into (-pi, pi].
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut a = arg % two_pi;
        if a > std::f64::consts::PI {
            a -= two_pi;
        }
        if a <= -std::f64::consts::PI {
            a += two_pi;
        }
        (a, logmag)
    }
}

/// Deterministic pseudo-random start vector (SplitMix64 stream).
fn seeded_vector(n: usize, seed: u64) -> Vec<Complex64> {
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            let re = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let im = (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            Complex64::new(re + 1.0, im)
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given as
/// a matrix-vector closure.  Runs at least 200 iterations unless the Rayleigh
/// quotient stabilises below `tol.eigen` relative change first.
pub fn power_largest_eig<F>(n: usize, apply: F, tol: &Tolerances, seed: u64) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    if n == 0 {
        return 0.0;
    }
    let mut v = seeded_vector(n, seed);
    let mut lambda = 0.0f64;
    let max_iters = 200.max(8 * n);
    for iter in 0..max_iters {
        let w = apply(&v);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let new_lambda = norm;
        v = w.into_iter().map(|z| z / norm).collect();
        let rel = (new_lambda - lambda).abs() / new_lambda.max(1e-300);
        lambda = new_lambda;
        if iter >= 200 && rel < tol.eigen {
            break;
        }
    }
    lambda
}

/// Operator (spectral) norm via power iteration on `A*A`.
pub fn operator_norm_dense(a: &CMat, tol: &Tolerances, seed: u64) -> f64 {
    let at = a.adjoint();
    power_largest_eig(
        a.cols,
        |v| {
            let av = a.matvec(v);
            at.matvec(&av)
        },
        tol,
        seed,
    )
    .sqrt()
}

/// Smallest singular value via power iteration on `(A*A)⁻¹`, i.e. on
/// `A⁻¹ A⁻*`.  Returns 0 when the matrix is numerically singular.
pub fn sigma_min_dense(a: &CMat, tol: &Tolerances, seed: u64) -> f64 {
    assert!(a.is_square());
    let lu = match lu_factor(a, tol) {
        Ok(lu) => lu,
        Err(_) => return 0.0,
    };
    let at_lu = match lu_factor(&a.adjoint(), tol) {
        Ok(lu) => lu,
        Err(_) => return 0.0,
    };
    let inv_largest = power_largest_eig(
        a.rows,
        |v| {
            let w = at_lu.solve(v);
            lu.solve(&w)
        },
        tol,
        seed,
    );
    if inv_largest <= 0.0 {
        0.0
    } else {
        1.0 / inv_largest.sqrt()
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` with `A = V · diag(λ) · V*` and the columns of
/// `V` orthonormal.  Off-diagonal mass below `threshold · ‖A‖_F` is ignored;
/// the sweep count is capped at 30, by which point Jacobi has long converged
/// for window-sized Hermitian matrices.
pub fn hermitian_eig(a: &CMat, tol: &Tolerances) -> (Vec<f64>, CMat) {
    assert!(a.is_square());
    let n = a.rows;
    let mut m = a.clone();
    let mut v = CMat::identity(n);
    let scale = a.frobenius_norm().max(1e-300);
    let threshold = tol.eigen * scale;
    const MAX_SWEEPS: usize = 30;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = m[(p, q)];
                let bmag = b.norm();
                if bmag <= threshold / (n as f64) {
                    continue;
                }
                // Phase that makes the pivot entry real, then a real Jacobi
                // rotation on the 2x2 [[alpha, |b|], [|b|, gamma]].
                let u = b / bmag;
                let alpha = m[(p, p)].re;
                let gamma = m[(q, q)].re;
                let tau = (gamma - alpha) / (2.0 * bmag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Column update: [col_p, col_q] <- [col_p, col_q] * R with
                // R = [[c, s·u], [-s·conj(u), c]] ... applied as A <- R* A R.
                let su = Complex64::new(s, 0.0) * u;
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = mp * c - mq * su.conj();
                    m[(r, q)] = mp * su + mq * c;
                }
                for cidx in 0..n {
                    let mp = m[(p, cidx)];
                    let mq = m[(q, cidx)];
                    m[(p, cidx)] = mp * c - mq * su;
                    m[(q, cidx)] = mp * su.conj() + mq * c;
                }
                for r in 0..n {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * c - vq * su.conj();
                    v[(r, q)] = vp * su + vq * c;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    (eigenvalues, v)
}

/// `A^{-1/2}` for a Hermitian positive definite matrix, via Jacobi.
pub fn hermitian_inv_sqrt(a: &CMat, tol: &Tolerances) -> Result<CMat, LinalgError> {
    let (eigs, v) = hermitian_eig(a, tol);
    let floor = tol.eigen * a.frobenius_norm().max(1.0);
    for &l in &eigs {
        if l <= floor {
            return Err(LinalgError::NotPositive { eigenvalue: l });
        }
    }
    let n = a.rows;
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(1.0 / eigs[i].sqrt(), 0.0);
    }
    Ok(v.mul(&d).mul(&v.adjoint()))
}

/// All singular values of a square matrix, ascending, via Jacobi on `A*A`.
pub fn singular_values(a: &CMat, tol: &Tolerances) -> Vec<f64> {
    let ata = a.adjoint().mul(a);
    let (mut eigs, _) = hermitian_eig(&ata, tol);
    for e in eigs.iter_mut() {
        *e = e.max(0.0).sqrt();
    }
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}
