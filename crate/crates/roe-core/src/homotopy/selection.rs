//! Selection of column/partner point pairs for the contraction pipeline.
//!
//! The rotations that straighten an operator act on one selected column
//! at a time, so the selected columns must not interfere: their supports
//! (unioned over the whole family) have to be pairwise disjoint, and each
//! column needs a spare partner point in the same partition block that no
//! selected support touches.  Selection runs in two passes:
//!
//! * **Pass 1** walks the window in label order and greedily picks every
//!   non-trivial column whose support is disjoint from the supports
//!   already taken, then assigns each one a partner point from its block.
//! * **Pass 2** reserves layer points — per block, enough trivial points
//!   to park `layer_count` identity copies next to every residual point
//!   the later stages are expected to produce — and finally pads with
//!   further trivial pairs until exactly `length` pairs are selected.
//!
//! [`zero_out`] afterwards forces an individual family member to honour
//! the ledger exactly, by deleting stray entries whose total mass must
//! stay within a geometrically shrinking budget per column.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::{HomotopyError, VertexFamily};
use crate::operator::SparseOperator;
use crate::partition::BoundedPartition;
use crate::rational::Dist;
use crate::space::PointId;

/// Why a pair was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairRole {
    /// Pass 1: the column at `y` genuinely moves under the family.
    Support,
    /// Pass 2: `y` is reserved as a layer point for the whirl stage.
    Partner,
    /// Pass 2: filler to reach the requested selection length.
    Padding,
}

/// One selected pair: a column point `y` and a partner point `z` in the
/// same partition block.
#[derive(Debug, Clone, Serialize)]
pub struct SelectedPair {
    pub y: PointId,
    pub z: PointId,
    pub block: usize,
    pub role: PairRole,
    /// Union of the supports of column `y` over all family vertices,
    /// always containing `y` itself.
    pub support: Vec<PointId>,
}

/// The full selection, with the data later stages need to stay honest.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionLedger {
    pub pairs: Vec<SelectedPair>,
    /// Number of identity layers the whirl stage will build.
    pub layer_count: usize,
    /// Points predicted to carry the residual operator after collapse.
    pub estimated_cover: Vec<PointId>,
    /// Largest in-pair distance `d(y, z)`.
    pub max_pair_distance: Dist,
    pub support_pair_count: usize,
}

impl SelectionLedger {
    /// Partner-role points available in a block, in reservation order.
    pub fn partner_pool(&self, block: usize) -> Vec<PointId> {
        self.pairs
            .iter()
            .filter(|p| p.role == PairRole::Partner && p.block == block)
            .map(|p| p.y)
            .collect()
    }

    pub fn y_points(&self) -> Vec<PointId> {
        self.pairs.iter().map(|p| p.y).collect()
    }

    pub fn z_points(&self) -> Vec<PointId> {
        self.pairs.iter().map(|p| p.z).collect()
    }
}

/// Union support of column `c` over all vertices, plus `c` itself.
fn column_support(family: &VertexFamily, c: PointId) -> Vec<PointId> {
    let mut rows: BTreeSet<PointId> = BTreeSet::new();
    rows.insert(c);
    for v in family.vertices() {
        for (row, _) in v.column(c) {
            rows.insert(row);
        }
    }
    rows.into_iter().collect()
}

/// A point is trivial when every vertex has both column and row there
/// exactly equal to the identity's.
fn is_trivial(family: &VertexFamily, p: PointId) -> bool {
    let one = Complex64::new(1.0, 0.0);
    for v in family.vertices() {
        let col = v.column(p);
        if col.len() != 1 || col[0].0 != p || col[0].1 != one {
            return false;
        }
        for (&(r, c), _) in v.support() {
            if r == p && c != p {
                return false;
            }
        }
    }
    true
}

/// Select `length` pairs for a family over a partition.
///
/// `layer_count` is the number of identity layers the whirl stage will
/// use (it scales the partner reservation), and `interior_margin` is the
/// index margin defining the designated interior; partner points are
/// preferred outside it so the final residual lands away from the region
/// the certificate makes claims about.
pub fn select_sequences(
    family: &VertexFamily,
    partition: &BoundedPartition,
    length: usize,
    layer_count: usize,
    interior_margin: i64,
) -> Result<SelectionLedger, HomotopyError> {
    let window = family.window();
    let n = window.n();
    if length == 0 {
        return Err(HomotopyError::BadParams("selection length is zero".into()));
    }
    let interior: BTreeSet<PointId> =
        window.index_interior(interior_margin).into_iter().collect();
    let block_of = |p: PointId| -> Result<usize, HomotopyError> {
        partition.block_of(p).ok_or_else(|| {
            HomotopyError::BadParams(format!("point {p} is not covered by the partition"))
        })
    };

    let trivial: Vec<bool> = (0..n).map(|p| is_trivial(family, p)).collect();
    let mut used: BTreeSet<PointId> = BTreeSet::new();
    let mut used_rows: BTreeSet<PointId> = BTreeSet::new();
    let mut pairs: Vec<SelectedPair> = Vec::new();

    // Pass 1: support pairs, in label order.
    for c in 0..n {
        if trivial[c] || used.contains(&c) {
            continue;
        }
        let support = column_support(family, c);
        if support.iter().any(|p| used_rows.contains(p) || used.contains(p)) {
            continue;
        }
        used.insert(c);
        for &p in &support {
            used_rows.insert(p);
        }
        pairs.push(SelectedPair {
            y: c,
            z: c, // partner assigned below
            block: block_of(c)?,
            role: PairRole::Support,
            support,
        });
    }
    let support_pair_count = pairs.len();

    // Partner points for pass-1 pairs: smallest free trivial point in the
    // same block, preferring one outside the designated interior.
    let pick_z = |block: usize,
                  used: &BTreeSet<PointId>,
                  used_rows: &BTreeSet<PointId>|
     -> Option<PointId> {
        let members = &partition.blocks[block].members;
        let free = |p: &&PointId| -> bool {
            trivial[**p] && !used.contains(*p) && !used_rows.contains(*p)
        };
        members
            .iter()
            .filter(free)
            .find(|p| !interior.contains(p))
            .or_else(|| members.iter().filter(free).next())
            .copied()
    };
    for i in 0..support_pair_count {
        let block = pairs[i].block;
        let z = pick_z(block, &used, &used_rows).ok_or_else(|| {
            HomotopyError::WindowTooSmall(format!(
                "block {block} has no free partner point for column {}",
                pairs[i].y
            ))
        })?;
        pairs[i].z = z;
        used.insert(z);
    }

    // Predicted residual support: the partner of every support pair plus
    // the rest of its column support become the collapse-stage residue.
    let mut estimated_cover: BTreeSet<PointId> = BTreeSet::new();
    for p in &pairs[..support_pair_count] {
        estimated_cover.insert(p.z);
        for &s in &p.support {
            if s != p.y {
                estimated_cover.insert(s);
            }
        }
    }

    // Pass 2a: reserve layer points per block: `layer_count` trivial
    // points for every predicted residual point, largest labels first.
    let mut demand: Vec<(usize, usize)> = Vec::new(); // (block, count)
    for &u in &estimated_cover {
        let b = block_of(u)?;
        match demand.iter_mut().find(|(block, _)| *block == b) {
            Some((_, count)) => *count += layer_count,
            None => demand.push((b, layer_count)),
        }
    }
    demand.sort_unstable();
    for &(block, count) in &demand {
        let members = &partition.blocks[block].members;
        let mut picked = 0;
        for &p in members.iter().rev() {
            if picked == count {
                break;
            }
            if trivial[p] && !used.contains(&p) && !used_rows.contains(&p) {
                used.insert(p);
                picked += 1;
                pairs.push(SelectedPair {
                    y: p,
                    z: p,
                    block,
                    role: PairRole::Partner,
                    support: vec![p],
                });
            }
        }
        if picked < count {
            return Err(HomotopyError::WindowTooSmall(format!(
                "block {block} offers {picked} of the {count} layer points needed"
            )));
        }
    }
    // Partner points for the reserved pairs.
    for i in support_pair_count..pairs.len() {
        let block = pairs[i].block;
        let z = pick_z(block, &used, &used_rows).ok_or_else(|| {
            HomotopyError::WindowTooSmall(format!(
                "block {block} has no free partner point for layer point {}",
                pairs[i].y
            ))
        })?;
        pairs[i].z = z;
        used.insert(z);
    }

    if pairs.len() > length {
        return Err(HomotopyError::WindowTooSmall(format!(
            "selection needs {} pairs but only {length} were requested",
            pairs.len()
        )));
    }

    // Pass 2b: pad with trivial pairs, blocks in order, largest labels.
    'pad: for block in 0..partition.blocks.len() {
        while pairs.len() < length {
            let members = &partition.blocks[block].members;
            let y = members
                .iter()
                .rev()
                .find(|p| trivial[**p] && !used.contains(*p) && !used_rows.contains(*p))
                .copied();
            let Some(y) = y else { continue 'pad };
            used.insert(y);
            let Some(z) = pick_z(block, &used, &used_rows) else {
                used.remove(&y);
                continue 'pad;
            };
            used.insert(z);
            pairs.push(SelectedPair {
                y,
                z,
                block,
                role: PairRole::Padding,
                support: vec![y],
            });
        }
        break;
    }
    if pairs.len() < length {
        return Err(HomotopyError::WindowTooSmall(format!(
            "only {} of {length} pairs fit in the window",
            pairs.len()
        )));
    }

    let max_pair_distance = pairs
        .iter()
        .map(|p| window.dist(p.y, p.z))
        .max()
        .unwrap_or(Dist::ZERO);
    Ok(SelectionLedger {
        pairs,
        layer_count,
        estimated_cover: estimated_cover.into_iter().collect(),
        max_pair_distance,
        support_pair_count,
    })
}

/// Result of forcing a member onto its selection ledger.
#[derive(Debug, Clone)]
pub struct ZeroOutOutcome {
    pub operator: SparseOperator,
    /// Frobenius mass of everything deleted.
    pub perturbation: f64,
    pub entries_removed: usize,
}

/// Delete the entries of `op` that contradict the ledger: anything in a
/// selected column outside its recorded support, and anything in a
/// partner point's row or column beyond the identity.
///
/// The mass removed from the `j`-th selected column must stay below
/// `epsilon / 2^(j+1)`, so the total perturbation stays below
/// `epsilon / 2` and invertibility of the whole family survives.
pub fn zero_out(
    op: &SparseOperator,
    ledger: &SelectionLedger,
    epsilon: f64,
) -> Result<ZeroOutOutcome, HomotopyError> {
    let window = Arc::clone(op.window());
    let mut out = op.clone();
    let mut removed_sq = 0.0f64;
    let mut entries_removed = 0usize;

    let z_rows: BTreeSet<PointId> = ledger.z_points().into_iter().collect();
    for (j, pair) in ledger.pairs.iter().enumerate() {
        let allowed: BTreeSet<PointId> = pair.support.iter().copied().collect();
        let mut column_sq = 0.0f64;
        for (row, value) in op.column(pair.y) {
            let keep = allowed.contains(&row) && !z_rows.contains(&row);
            if !keep {
                column_sq += value.norm_sqr();
                entries_removed += 1;
                out.set(row, pair.y, Complex64::new(0.0, 0.0))?;
            }
        }
        let budget = epsilon / 2f64.powi(j as i32 + 1);
        if column_sq.sqrt() > budget {
            return Err(HomotopyError::LedgerStale(format!(
                "column {} needs a perturbation of {:.3e}, over its budget {:.3e}",
                window.label(pair.y),
                column_sq.sqrt(),
                budget
            )));
        }
        removed_sq += column_sq;
        if out.column(pair.y).is_empty() {
            return Err(HomotopyError::ZeroColumn { column: pair.y });
        }
    }

    // Partner points must be exactly untouched: column and row identity.
    for pair in &ledger.pairs {
        let col = out.column(pair.z);
        if col.len() != 1 || col[0].0 != pair.z {
            return Err(HomotopyError::LedgerStale(format!(
                "partner point {} no longer carries an identity column",
                window.label(pair.z)
            )));
        }
        let stray: Vec<(PointId, PointId)> = out
            .support()
            .filter(|(&(r, c), _)| r == pair.z && c != pair.z && c != pair.y)
            .map(|(&rc, _)| rc)
            .collect();
        for (r, c) in stray {
            let value = out.entry(r, c);
            removed_sq += value.norm_sqr();
            entries_removed += 1;
            out.set(r, c, Complex64::new(0.0, 0.0))?;
        }
    }

    // Supports must still be pairwise disjoint.
    let mut seen: BTreeSet<PointId> = BTreeSet::new();
    for pair in &ledger.pairs {
        for &p in &pair.support {
            if !seen.insert(p) {
                return Err(HomotopyError::LedgerStale(format!(
                    "supports overlap at {}",
                    window.label(p)
                )));
            }
        }
    }

    Ok(ZeroOutOutcome {
        operator: out,
        perturbation: removed_sq.sqrt(),
        entries_removed,
    })
}
