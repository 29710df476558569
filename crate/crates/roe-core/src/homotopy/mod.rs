//! Contraction machinery for families of invertible band operators.
//!
//! Given a simplex of invertibles (up to three vertices, affinely
//! interpolated) on one window, the pipeline in [`contract`] produces a
//! certified homotopy taking every member of the family to an operator
//! that is the identity on a designated interior region, through stages
//! with explicit propagation bounds:
//!
//! 1. **Selection** — pick column/partner point pairs inside partition
//!    blocks whose operator columns have pairwise disjoint supports.
//! 2. **Rotations** — unitary rotations that straighten each selected
//!    column onto its own basis vector.
//! 3. **Collapse** — kill the residual cross block and normalise the
//!    straightened diagonal by a polar path.
//! 4. **Whirls** — cancel what remains against identity copies parked on
//!    partner layers, telescoping it onto the outermost layer.
//!
//! Everything is measured: each stage reports observed versus declared
//! propagation, sampled smallest singular values, and junction defects,
//! and the final certificate quantifies the endpoint residual and where
//! it lives.  A shortcut for operators concentrated over a sparse set —
//! where the corner is automatically diagonal and a polar path finishes
//! the job — lives in [`contract::kuiper_via_sparse`].

pub mod contract;
pub mod rotation;
pub mod selection;
pub mod whirl;

pub use contract::{
    contract, kuiper_via_sparse, CertificateVerdict, ContractParams, ContractionCertificate,
    ContractionOutcome, SparseContractionCertificate, StageReport,
};
pub use selection::{select_sequences, zero_out, SelectedPair, SelectionLedger, ZeroOutOutcome};

use std::sync::Arc;

use thiserror::Error;

use crate::config::Tolerances;
use crate::linalg::LinalgError;
use crate::operator::{OperatorError, SparseOperator};
use crate::partition::PartitionError;
use crate::rational::Dist;
use crate::space::{PointId, SpaceError, Window};

#[derive(Debug, Error)]
pub enum HomotopyError {
    /// A family member is singular (or too close to it) at a grid sample.
    #[error("family member at grid sample {sample} has sigma_min {sigma:.3e}")]
    NotInvertibleAt { sample: usize, sigma: f64 },
    /// A selected column is numerically zero and cannot be rotated.
    #[error("column {column} is zero; nothing to rotate")]
    ZeroColumn { column: PointId },
    /// The operator is not in the block-triangular shape a stage requires.
    #[error("triangular shape violated at entry ({row},{col})")]
    NotTriangular { row: PointId, col: PointId },
    /// The operator no longer satisfies what the selection ledger promised.
    #[error("selection ledger is stale: {0}")]
    LedgerStale(String),
    /// The window cannot host the requested selection.
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    /// A partition block ran out of partner points for its layers.
    #[error("block {block} has too few free partner points")]
    InsufficientVisits { block: usize },
    /// Two layers that must be in bijection have different sizes.
    #[error("layer mismatch: {0}")]
    LayerMismatch(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// An affine family of invertible operators over a simplex of dimension
/// `vertices.len() - 1` (at most 2).
#[derive(Debug, Clone)]
pub struct VertexFamily {
    window: Arc<Window>,
    vertices: Vec<SparseOperator>,
}

impl VertexFamily {
    pub fn new(vertices: Vec<SparseOperator>) -> Result<VertexFamily, HomotopyError> {
        if vertices.is_empty() || vertices.len() > 3 {
            return Err(HomotopyError::BadParams(
                "a family has one, two, or three vertices".into(),
            ));
        }
        let window = Arc::clone(vertices[0].window());
        for v in &vertices[1..] {
            if v.window().points() != window.points() {
                return Err(HomotopyError::BadParams(
                    "family vertices live on different windows".into(),
                ));
            }
        }
        Ok(VertexFamily { window, vertices })
    }

    pub fn window(&self) -> &Arc<Window> {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[SparseOperator] {
        &self.vertices
    }

    /// Every member's propagation is at most the largest vertex
    /// propagation, since supports only ever combine.
    pub fn max_propagation(&self) -> Dist {
        self.vertices
            .iter()
            .map(|v| v.propagation())
            .max()
            .unwrap_or(Dist::ZERO)
    }

    /// The member at the given barycentric weights.
    pub fn at(&self, weights: &[f64]) -> Result<SparseOperator, HomotopyError> {
        if weights.len() != self.vertices.len() {
            return Err(HomotopyError::BadParams(format!(
                "{} weights for {} vertices",
                weights.len(),
                self.vertices.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(0.0..=1.0 + 1e-12).contains(&w))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(HomotopyError::BadParams(
                "weights must be barycentric (nonnegative, summing to 1)".into(),
            ));
        }
        let mut out = SparseOperator::zero(Arc::clone(&self.window));
        for (v, &w) in self.vertices.iter().zip(weights) {
            if w != 0.0 {
                out = out.add(&v.scale(num_complex::Complex64::new(w, 0.0)))?;
            }
        }
        Ok(out)
    }

    /// Barycentric sample grid at the given resolution: all weight tuples
    /// with denominators `resolution`, covering the simplex uniformly
    /// (vertices and edges included).
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let r = resolution.max(1);
        match self.vertices.len() {
            1 => vec![vec![1.0]],
            2 => (0..=r)
                .map(|i| {
                    let t = i as f64 / r as f64;
                    vec![1.0 - t, t]
                })
                .collect(),
            _ => {
                let mut out = Vec::new();
                for i in 0..=r {
                    for j in 0..=(r - i) {
                        let k = r - i - j;
                        out.push(vec![
                            i as f64 / r as f64,
                            j as f64 / r as f64,
                            k as f64 / r as f64,
                        ]);
                    }
                }
                out
            }
        }
    }
}

/// Uniform invertibility margin of a family over its sample grid.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EpsilonMargin {
    /// Half the smallest sampled singular value.
    pub epsilon: f64,
    pub min_sigma: f64,
    pub samples: usize,
}

/// Sample the family over its grid and return half the worst smallest
/// singular value — the perturbation budget every later stage must respect
/// to keep the whole family invertible.
pub fn epsilon_margin(
    family: &VertexFamily,
    resolution: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<EpsilonMargin, HomotopyError> {
    let grid = family.grid(resolution);
    let mut min_sigma = f64::INFINITY;
    for (i, weights) in grid.iter().enumerate() {
        let member = family.at(weights)?;
        let sigma = member.sigma_min(tol, seed);
        if sigma <= tol.rank {
            return Err(HomotopyError::NotInvertibleAt { sample: i, sigma });
        }
        min_sigma = min_sigma.min(sigma);
    }
    Ok(EpsilonMargin {
        epsilon: 0.5 * min_sigma,
        min_sigma,
        samples: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{SpaceSpec, WindowExtent};
    use num_complex::Complex64;

    fn small_window() -> Arc<Window> {
        Arc::new(
            Window::realize(
                &SpaceSpec::IntegerLine,
                &WindowExtent {
                    half_width: Some(3),
                    ..Default::default()
                },
            )
            .unwrap(),
        )
    }

    #[test]
    fn family_interpolates_and_grids() {
        let w = small_window();
        let id = SparseOperator::identity(Arc::clone(&w));
        let mut phase = SparseOperator::identity(Arc::clone(&w));
        phase.set(0, 0, Complex64::new(0.0, 1.0)).unwrap();
        let family = VertexFamily::new(vec![id.clone(), phase]).unwrap();
        assert_eq!(family.dim(), 1);
        assert_eq!(family.grid(8).len(), 9);
        let mid = family.at(&[0.5, 0.5]).unwrap();
        assert_eq!(mid.entry(0, 0), Complex64::new(0.5, 0.5));
        assert_eq!(mid.entry(1, 1), Complex64::new(1.0, 0.0));
        // Triangle grid at resolution 8 has 45 samples.
        let tri = VertexFamily::new(vec![
            id.clone(),
            id.clone(),
            id,
        ])
        .unwrap();
        assert_eq!(tri.grid(8).len(), 45);
        for weights in tri.grid(8) {
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_flags_singular_members() {
        let w = small_window();
        let id = SparseOperator::identity(Arc::clone(&w));
        let minus = id.scale(Complex64::new(-1.0, 0.0));
        // The segment from 1 to -1 passes through 0 at its midpoint.
        let family = VertexFamily::new(vec![id.clone(), minus]).unwrap();
        let err = epsilon_margin(&family, 8, &Tolerances::default(), 1);
        assert!(matches!(err, Err(HomotopyError::NotInvertibleAt { .. })));
        // A phase family keeps a uniform margin.
        let mut phase = SparseOperator::identity(Arc::clone(&w));
        phase
            .set(0, 0, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3))
            .unwrap();
        let ok = VertexFamily::new(vec![id, phase]).unwrap();
        let margin = epsilon_margin(&ok, 8, &Tolerances::default(), 1).unwrap();
        // Worst member is the chord midpoint: |(1 + e^{iπ/3})/2| = √3/2.
        assert!((margin.min_sigma - 3.0f64.sqrt() / 2.0).abs() < 1e-6);
        assert!((margin.epsilon - margin.min_sigma / 2.0).abs() < 1e-15);
    }
}
