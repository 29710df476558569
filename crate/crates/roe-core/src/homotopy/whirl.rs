//! Layer bookkeeping and the whirl rotations that cancel the residue.
//!
//! After the collapse stage the operator is the identity except on a
//! small *cover* set.  The whirl trick parks `layer_count` identity
//! copies of the cover on reserved partner points inside the same
//! partition blocks, then rotates inverse/forward pairs against each
//! other so the residue telescopes onto the outermost layer:
//!
//! * odd layers first: `W(t) = R(t)(G_m ⊕ 1)R(-t)(G_m⁻¹ ⊕ 1)` runs from
//!   the identity at `t = 0` to `diag(G_m⁻¹, G_{m+1})` at the quarter
//!   turn, planting an inverse next to every forward copy;
//! * even layers second: the same rotation multiplies the planted state
//!   `diag(G_m, G_{m+1}⁻¹)` back to the identity.
//!
//! Every rotation factor is a product of plane rotations between points
//! of the same block, so propagation stays bounded by the layer spacing,
//! and the conjugated copies `G_m` are exact entry-for-entry transports
//! of the cover operator.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::selection::SelectionLedger;
use super::HomotopyError;
use crate::config::Tolerances;
use crate::linalg;
use crate::operator::SparseOperator;
use crate::partition::BoundedPartition;
use crate::rational::Dist;
use crate::space::{PointId, Window};

/// Where the residue lives and where its identity copies are parked.
#[derive(Debug, Clone, Serialize)]
pub struct LayerPlan {
    /// Points carrying the residual operator, in label order.
    pub cover: Vec<PointId>,
    /// `layers[m][j]` hosts the copy of `cover[j]` on layer `m + 1`.
    pub layers: Vec<Vec<PointId>>,
    /// Reserved partner points that were not needed.
    pub leftovers: Vec<PointId>,
    /// Largest distance between consecutive hosts of the same residue
    /// point (including the cover point itself to its first host).
    pub max_step: Dist,
}

impl LayerPlan {
    /// Hosts of layer `m`, where layer 0 is the cover itself.
    pub fn layer(&self, m: usize) -> &[PointId] {
        if m == 0 {
            &self.cover
        } else {
            &self.layers[m - 1]
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }
}

fn identity_entry(r: PointId, c: PointId) -> Complex64 {
    if r == c {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Points where the operator differs from the identity.
pub fn cover_of(op: &SparseOperator) -> Vec<PointId> {
    let mut cover: BTreeSet<PointId> = BTreeSet::new();
    for (&(r, c), &v) in op.support() {
        if v != identity_entry(r, c) {
            cover.insert(r);
            cover.insert(c);
        }
    }
    // A missing diagonal entry is a zero diagonal, which also differs.
    for p in 0..op.n() {
        if op.entry(p, p) == Complex64::new(0.0, 0.0) {
            cover.insert(p);
        }
    }
    cover.into_iter().collect()
}

/// Assign layer hosts for the residue of `op` from the partner points the
/// ledger reserved, block by block, in reservation order.
pub fn layer_decomposition(
    op: &SparseOperator,
    ledger: &SelectionLedger,
    partition: &BoundedPartition,
    layer_count: usize,
) -> Result<LayerPlan, HomotopyError> {
    let window = op.window();
    let cover = cover_of(op);
    if layer_count == 0 {
        return Ok(LayerPlan {
            cover,
            layers: Vec::new(),
            leftovers: ledger
                .pairs
                .iter()
                .filter(|p| p.role == super::selection::PairRole::Partner)
                .map(|p| p.y)
                .collect(),
            max_step: Dist::ZERO,
        });
    }
    let mut pools: std::collections::BTreeMap<usize, Vec<PointId>> =
        std::collections::BTreeMap::new();
    for pair in &ledger.pairs {
        if pair.role == super::selection::PairRole::Partner {
            pools.entry(pair.block).or_default().push(pair.y);
        }
    }
    let mut layers: Vec<Vec<PointId>> = vec![Vec::new(); layer_count];
    let mut max_step = Dist::ZERO;
    for &u in &cover {
        let block = partition.block_of(u).ok_or_else(|| {
            HomotopyError::BadParams(format!(
                "residue point {} is not covered by the partition",
                window.label(u)
            ))
        })?;
        let pool = pools.entry(block).or_default();
        let mut previous = u;
        for layer in layers.iter_mut() {
            let host = pool
                .iter()
                .position(|p| !cover.contains(p))
                .map(|i| pool.remove(i))
                .ok_or(HomotopyError::InsufficientVisits { block })?;
            max_step = max_step.max(window.dist(previous, host));
            layer.push(host);
            previous = host;
        }
    }
    let leftovers: Vec<PointId> = pools.into_values().flatten().collect();
    // Hosts must be genuinely idle in the operator itself.
    for layer in &layers {
        for &host in layer {
            let col = op.column(host);
            if col != vec![(host, Complex64::new(1.0, 0.0))]
                || op
                    .support()
                    .any(|(&(r, c), &v)| r == host && c != host && v != Complex64::new(0.0, 0.0))
            {
                return Err(HomotopyError::LedgerStale(format!(
                    "layer host {} is not idle in the operator",
                    window.label(host)
                )));
            }
        }
    }
    Ok(LayerPlan {
        cover,
        layers,
        leftovers,
        max_step,
    })
}

/// The partial isometry sending `δ_{from[j]}` to `δ_{to[j]}`.
pub fn shift_isometry(
    window: &Arc<Window>,
    from: &[PointId],
    to: &[PointId],
) -> Result<SparseOperator, HomotopyError> {
    if from.len() != to.len() {
        return Err(HomotopyError::LayerMismatch(format!(
            "{} source points against {} targets",
            from.len(),
            to.len()
        )));
    }
    let distinct: BTreeSet<PointId> = from.iter().chain(to).copied().collect();
    if distinct.len() != from.len() + to.len() {
        return Err(HomotopyError::LayerMismatch(
            "layer hosts are not pairwise distinct".into(),
        ));
    }
    let mut j = SparseOperator::zero(Arc::clone(window));
    for (&f, &t) in from.iter().zip(to) {
        j.set(t, f, Complex64::new(1.0, 0.0))?;
    }
    Ok(j)
}

/// Transport an operator that is the identity off `from` onto `to`,
/// copying entries exactly.
pub fn conjugate_between_layers(
    op: &SparseOperator,
    from: &[PointId],
    to: &[PointId],
) -> Result<SparseOperator, HomotopyError> {
    if from.len() != to.len() {
        return Err(HomotopyError::LayerMismatch(format!(
            "{} source points against {} targets",
            from.len(),
            to.len()
        )));
    }
    let index_of = |p: PointId| from.iter().position(|&q| q == p);
    let mut out = SparseOperator::identity(Arc::clone(op.window()));
    for (&(r, c), &v) in op.support() {
        let same = identity_entry(r, c);
        if v == same {
            continue;
        }
        let (Some(ri), Some(ci)) = (index_of(r), index_of(c)) else {
            return Err(HomotopyError::LayerMismatch(format!(
                "operator acts at ({r},{c}) outside its declared layer"
            )));
        };
        out.set(to[ri], to[ci], v)?;
    }
    // Zero diagonals inside the layer must transport too.
    for (i, &f) in from.iter().enumerate() {
        if op.entry(f, f) == Complex64::new(0.0, 0.0) {
            out.set(to[i], to[i], Complex64::new(0.0, 0.0))?;
        }
    }
    Ok(out)
}

/// The block rotation pairing `lower[j]` with `upper[j]`:
/// `δ_l ↦ cos θ·δ_l − sin θ·δ_u`, `δ_u ↦ sin θ·δ_l + cos θ·δ_u`,
/// with `θ = t·π/2` and exact endpoint values.
pub fn layer_rotation(
    window: &Arc<Window>,
    lower: &[PointId],
    upper: &[PointId],
    t: f64,
) -> Result<SparseOperator, HomotopyError> {
    if lower.len() != upper.len() {
        return Err(HomotopyError::LayerMismatch(format!(
            "{} lower hosts against {} upper",
            lower.len(),
            upper.len()
        )));
    }
    let (c, s) = if t == 0.0 {
        (1.0, 0.0)
    } else if t == 1.0 {
        (0.0, 1.0)
    } else if t == -1.0 {
        (0.0, -1.0)
    } else {
        let theta = t * std::f64::consts::FRAC_PI_2;
        (theta.cos(), theta.sin())
    };
    let mut rot = SparseOperator::identity(Arc::clone(window));
    for (&l, &u) in lower.iter().zip(upper) {
        rot.set(l, l, Complex64::new(c, 0.0))?;
        rot.set(u, u, Complex64::new(c, 0.0))?;
        rot.set(l, u, Complex64::new(s, 0.0))?;
        rot.set(u, l, Complex64::new(-s, 0.0))?;
    }
    Ok(rot)
}

/// One whirl sample `R(t)(g ⊕ 1)R(−t)(g_inv ⊕ 1)` on the subspace pair
/// `(lower, upper)`.  Both `g` and `g_inv` must be the identity off
/// `lower`.  At `t = 0` this is `g·g_inv ≈ 1`; at `t = 1` it is
/// `diag(g_inv, g↑)` with `g↑` the exact transport of `g` onto `upper`.
pub fn whirl_pair(
    g: &SparseOperator,
    g_inv: &SparseOperator,
    lower: &[PointId],
    upper: &[PointId],
    t: f64,
) -> Result<SparseOperator, HomotopyError> {
    let window = Arc::clone(g.window());
    for op in [g, g_inv] {
        for &p in cover_of(op).iter() {
            if !lower.contains(&p) {
                return Err(HomotopyError::LayerMismatch(format!(
                    "whirl factor acts at {} outside its layer",
                    window.label(p)
                )));
            }
        }
    }
    if t == 1.0 {
        // Exact endpoint: diag(g_inv, transport of g), no roundoff from
        // the four-factor product.
        let lifted = conjugate_between_layers(g, lower, upper)?;
        return Ok(g_inv.compose(&lifted)?);
    }
    let r_fwd = layer_rotation(&window, lower, upper, t)?;
    let r_bwd = layer_rotation(&window, lower, upper, -t)?;
    let w = r_fwd
        .compose(g)?
        .compose(&r_bwd)?
        .compose(g_inv)?;
    Ok(w)
}

/// Invert the restriction of `op` to `cover` (it must be the identity
/// elsewhere), re-embed, and truncate to the given band, keeping the
/// truncation error within `budget`.
pub fn inverse_on_cover(
    op: &SparseOperator,
    cover: &[PointId],
    band_radius: Dist,
    budget: f64,
    tol: &Tolerances,
    seed: u64,
) -> Result<(SparseOperator, f64), HomotopyError> {
    let window = Arc::clone(op.window());
    for &p in cover_of(op).iter() {
        if !cover.contains(&p) {
            return Err(HomotopyError::LayerMismatch(format!(
                "operator acts at {} outside its declared cover",
                window.label(p)
            )));
        }
    }
    let k = cover.len();
    let mut dense = linalg::CMat::zeros(k, k);
    for (i, &r) in cover.iter().enumerate() {
        for (j, &c) in cover.iter().enumerate() {
            dense[(i, j)] = op.entry(r, c);
        }
    }
    let inv = linalg::lu_factor(&dense, tol)?.inverse();
    let mut out = SparseOperator::identity(Arc::clone(&window));
    for (i, &r) in cover.iter().enumerate() {
        for (j, &c) in cover.iter().enumerate() {
            out.set(r, c, inv[(i, j)])?;
        }
    }
    let truncation = out.truncate_to_band(band_radius, budget, tol, seed)?;
    Ok((truncation.operator, truncation.perturbation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::selection::{PairRole, SelectedPair};
    use crate::space::{Label, SpaceSpec, WindowExtent};

    fn window() -> Arc<Window> {
        Arc::new(
            Window::realize(
                &SpaceSpec::IntegerLine,
                &WindowExtent {
                    half_width: Some(19),
                    ..Default::default()
                },
            )
            .unwrap(),
        )
    }

    fn point(w: &Window, n: i64) -> PointId {
        w.id(&Label::Int(n)).unwrap()
    }

    fn thirteen_blocks(w: &Arc<Window>) -> BoundedPartition {
        let ids = |lo: i64, hi: i64| -> Vec<PointId> {
            (lo..=hi).map(|n| point(w, n)).collect()
        };
        BoundedPartition::from_blocks(
            w,
            Dist::integer(6),
            vec![
                (point(w, -13), ids(-19, -7)),
                (point(w, 0), ids(-6, 6)),
                (point(w, 13), ids(7, 19)),
            ],
        )
        .unwrap()
    }

    /// Identity plus an invertible 2x2 block on the points -1 and 0.
    fn residue(w: &Arc<Window>) -> SparseOperator {
        let mut g = SparseOperator::identity(Arc::clone(w));
        let a = point(w, -1);
        let b = point(w, 0);
        g.set(a, a, Complex64::new(0.6, 0.2)).unwrap();
        g.set(a, b, Complex64::new(0.1, 0.0)).unwrap();
        g.set(b, a, Complex64::new(-0.3, 0.1)).unwrap();
        g.set(b, b, Complex64::new(0.9, -0.1)).unwrap();
        g
    }

    /// A ledger whose partner pool holds `per_point` hosts for every
    /// residue point, taken from the top of its block.
    fn ledger_with_partners(
        partition: &BoundedPartition,
        cover: &[PointId],
        per_point: usize,
    ) -> SelectionLedger {
        let mut pairs = Vec::new();
        let blocks: BTreeSet<usize> = cover
            .iter()
            .map(|&u| partition.block_of(u).unwrap())
            .collect();
        for block in blocks {
            let need = per_point
                * cover
                    .iter()
                    .filter(|&&u| partition.block_of(u) == Some(block))
                    .count();
            for &p in partition.blocks[block]
                .members
                .iter()
                .rev()
                .filter(|p| !cover.contains(p))
                .take(need)
            {
                pairs.push(SelectedPair {
                    y: p,
                    z: p,
                    block,
                    role: PairRole::Partner,
                    support: vec![p],
                });
            }
        }
        SelectionLedger {
            pairs,
            layer_count: per_point,
            estimated_cover: cover.to_vec(),
            max_pair_distance: Dist::ZERO,
            support_pair_count: 0,
        }
    }

    #[test]
    fn cover_and_layers_are_detected_and_assigned() {
        let w = window();
        let g = residue(&w);
        assert_eq!(cover_of(&g), vec![point(&w, -1), point(&w, 0)]);
        let partition = thirteen_blocks(&w);
        let ledger = ledger_with_partners(&partition, &cover_of(&g), 2);
        let plan = layer_decomposition(&g, &ledger, &partition, 2).unwrap();
        assert_eq!(plan.cover.len(), 2);
        assert_eq!(plan.layers.len(), 2);
        assert_eq!(plan.layers[0].len(), 2);
        // Hosts come from the same block as their residue point.
        for (m, layer) in plan.layers.iter().enumerate() {
            for (j, &host) in layer.iter().enumerate() {
                assert_eq!(
                    partition.block_of(host),
                    partition.block_of(plan.cover[j]),
                    "layer {m} host {j}"
                );
            }
        }
        // Hosts stay within the block spread of their residue point.
        assert!(plan.max_step <= Dist::integer(12));
        // Demanding more layers than the pools can host fails loudly.
        assert!(matches!(
            layer_decomposition(&g, &ledger, &partition, 3),
            Err(HomotopyError::InsufficientVisits { .. })
        ));
    }

    #[test]
    fn shift_and_conjugation_transport_exactly() {
        let w = window();
        let g = residue(&w);
        let from = vec![point(&w, -1), point(&w, 0)];
        let to = vec![point(&w, -3), point(&w, 2)];
        let j = shift_isometry(&w, &from, &to).unwrap();
        assert_eq!(j.entry(to[0], from[0]), Complex64::new(1.0, 0.0));
        assert_eq!(j.support_len(), 2);
        assert!(matches!(
            shift_isometry(&w, &from, &to[..1]),
            Err(HomotopyError::LayerMismatch(_))
        ));
        let lifted = conjugate_between_layers(&g, &from, &to).unwrap();
        assert_eq!(lifted.entry(to[0], to[1]), g.entry(from[0], from[1]));
        assert_eq!(lifted.entry(to[1], to[1]), g.entry(from[1], from[1]));
        assert_eq!(lifted.entry(from[0], from[0]), Complex64::new(1.0, 0.0));
        // Conjugation mirrors the shift: J g J* + (1 - J J*).
        let via_shift = j
            .compose(&g)
            .unwrap()
            .compose(&j.adjoint())
            .unwrap();
        for (&(r, c), &v) in lifted.support() {
            let expected = if r == c && !to.contains(&r) {
                Complex64::new(1.0, 0.0)
            } else {
                via_shift.entry(r, c)
            };
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn whirl_runs_identity_to_planted_inverse_pair() {
        let w = window();
        let tol = Tolerances::default();
        let g = residue(&w);
        let lower = vec![point(&w, -1), point(&w, 0)];
        let upper = vec![point(&w, -3), point(&w, 2)];
        let (g_inv, dropped) =
            inverse_on_cover(&g, &lower, Dist::integer(4), 1e-12, &tol, 7).unwrap();
        assert_eq!(dropped, 0.0);
        // Start: g·g⁻¹, identity within inversion roundoff.
        let id = SparseOperator::identity(Arc::clone(&w));
        let start = whirl_pair(&g, &g_inv, &lower, &upper, 0.0).unwrap();
        assert!(start.frobenius_distance(&id).unwrap() < 1e-12);
        // End: diag(g⁻¹ on lower, g on upper), exactly.
        let end = whirl_pair(&g, &g_inv, &lower, &upper, 1.0).unwrap();
        assert_eq!(end.entry(upper[0], upper[1]), g.entry(lower[0], lower[1]));
        assert_eq!(end.entry(lower[0], lower[1]), g_inv.entry(lower[0], lower[1]));
        // Midway it stays invertible and within the layer span.
        for &t in &[0.25, 0.5, 0.75] {
            let mid = whirl_pair(&g, &g_inv, &lower, &upper, t).unwrap();
            assert!(mid.sigma_min(&tol, 5) > 0.1, "t={t}");
            assert!(mid.propagation() <= Dist::integer(5));
        }
        // Factors acting off their layer are rejected.
        assert!(matches!(
            whirl_pair(&g, &g_inv, &upper, &lower, 0.5),
            Err(HomotopyError::LayerMismatch(_))
        ));
    }
}
