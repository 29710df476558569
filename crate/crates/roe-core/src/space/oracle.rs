//! Ball cardinality and enumeration in the ambient (unwindowed) space.
//!
//! Windowed computations need to know whether a ball is genuinely finite in
//! the full space — a window always makes everything look finite.  The
//! oracle answers from the symbolic spec alone, exactly.

use serde::Serialize;

use super::{block_index, block_members, Label, SpaceError, SpaceSpec};
use crate::rational::Dist;

/// Cardinality of a closed ball in the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BallCardinality {
    Finite(u64),
    Infinite,
}

impl BallCardinality {
    pub fn is_finite(&self) -> bool {
        matches!(self, BallCardinality::Finite(_))
    }
}

/// Number of points of the ambient space within distance `r` of `center`
/// (closed ball; negative `r` gives the empty ball).
pub fn ball_cardinality(
    spec: &SpaceSpec,
    center: &Label,
    r: Dist,
) -> Result<BallCardinality, SpaceError> {
    spec.check_label(center)?;
    if r < Dist::ZERO {
        return Ok(BallCardinality::Finite(0));
    }
    let card = cardinality_u128(spec, center, r)?;
    match card {
        None => Ok(BallCardinality::Infinite),
        Some(c) => u64::try_from(c)
            .map(BallCardinality::Finite)
            .map_err(|_| SpaceError::BadParams(format!("ball cardinality {c} overflows"))),
    }
}

/// The members of a closed ball, sorted, or `None` if the ball is infinite.
pub fn enumerate_ball(
    spec: &SpaceSpec,
    center: &Label,
    r: Dist,
) -> Result<Option<Vec<Label>>, SpaceError> {
    const ENUMERATION_CAP: u64 = 1_000_000;
    match ball_cardinality(spec, center, r)? {
        BallCardinality::Infinite => Ok(None),
        BallCardinality::Finite(c) if c > ENUMERATION_CAP => Err(SpaceError::BadParams(format!(
            "ball has {c} points, beyond the enumeration cap"
        ))),
        BallCardinality::Finite(_) => {
            let mut points = members(spec, center, r)?;
            points.sort();
            points.dedup();
            Ok(Some(points))
        }
    }
}

/// `None` means infinite.
fn cardinality_u128(
    spec: &SpaceSpec,
    center: &Label,
    r: Dist,
) -> Result<Option<u128>, SpaceError> {
    if r < Dist::ZERO {
        return Ok(Some(0));
    }
    match spec {
        SpaceSpec::ExplicitFinite { dist } => {
            let i = spec.explicit_index(center)?;
            let c = dist[i].iter().filter(|d| **d <= r).count();
            Ok(Some(c as u128))
        }
        SpaceSpec::BoundedInfinite { diameter } => {
            if r < *diameter {
                Ok(Some(1))
            } else {
                Ok(None)
            }
        }
        SpaceSpec::IntegerLine => {
            let m = r.floor_int() as u128;
            Ok(Some(2 * m + 1))
        }
        SpaceSpec::IntegerLattice { dim } => {
            let m = r.floor_int() as u128;
            Ok(Some(l1_ball_count(*dim as u128, m)))
        }
        SpaceSpec::ExponentialBlocks => {
            let x = match center {
                Label::Int(n) => *n,
                _ => unreachable!("label checked above"),
            };
            if r < Dist::integer(1) {
                return Ok(Some(1));
            }
            // d = |Δk| + 1 ≤ r  ⟺  |Δk| ≤ ⌊r − 1⌋.
            let m = (r - Dist::integer(1)).floor_int();
            let k0 = block_index(x);
            let mut total: u128 = 0;
            for k in (k0 - m)..=(k0 + m) {
                let size = if k == 0 { 1u128 } else { 1u128 << k.unsigned_abs().min(100) };
                total += size;
            }
            Ok(Some(total))
        }
        SpaceSpec::FiberedLine => {
            if r >= Dist::integer(1) {
                Ok(None)
            } else {
                Ok(Some(1))
            }
        }
        SpaceSpec::DisjointPower { base, copies } => {
            let (i, p) = match center {
                Label::Copy { copy, point } => (*copy, point.as_ref()),
                _ => unreachable!("label checked above"),
            };
            let mut total: u128 = 0;
            for j in 1..=(*copies as i64) {
                let slack = r - Dist::integer((i - j).abs());
                if slack < Dist::ZERO {
                    continue;
                }
                match cardinality_u128(base, p, slack)? {
                    None => return Ok(None),
                    Some(c) => total += c,
                }
            }
            Ok(Some(total))
        }
        SpaceSpec::SparseAugmented { base, spacing } => {
            let s = Dist::integer(*spacing);
            match center {
                Label::Base(x) => {
                    let base_part = cardinality_u128(base, x, r)?;
                    let Some(base_part) = base_part else {
                        return Ok(None);
                    };
                    // Tails t with s·(t+1) + d(x, anchor) ≤ r.
                    let through = base.distance(x, &base.anchor())?;
                    let tail_part = if r - through >= s {
                        (((r - through) / s) - Dist::integer(1)).floor_int() as u128 + 1
                    } else {
                        0
                    };
                    Ok(Some(base_part + tail_part))
                }
                Label::Tail(t) => {
                    // Tails u with s·|t − u| ≤ r and 0 ≤ u.
                    let reach = (r / s).floor_int();
                    let lo = (t - reach).max(0);
                    let hi = t + reach;
                    let tail_part = (hi - lo + 1) as u128;
                    // Base points x with s·(t+1) + d(x, anchor) ≤ r.
                    let slack = r - s * Dist::integer(t + 1);
                    let base_part = if slack >= Dist::ZERO {
                        match cardinality_u128(base, &base.anchor(), slack)? {
                            None => return Ok(None),
                            Some(c) => c,
                        }
                    } else {
                        0
                    };
                    Ok(Some(tail_part + base_part))
                }
                _ => unreachable!("label checked above"),
            }
        }
    }
}

/// |{x ∈ ℤⁿ : Σ|xᵢ| ≤ m}| = Σ_k 2^k · C(n,k) · C(m,k).
fn l1_ball_count(n: u128, m: u128) -> u128 {
    let mut total = 0u128;
    for k in 0..=n.min(m) {
        total += (1u128 << k) * binomial(n, k) * binomial(m, k);
    }
    total
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut result = 1u128;
    for i in 0..k {
        result = result * (n - i) / (i + 1);
    }
    result
}

fn members(spec: &SpaceSpec, center: &Label, r: Dist) -> Result<Vec<Label>, SpaceError> {
    match spec {
        SpaceSpec::ExplicitFinite { dist } => {
            let i = spec.explicit_index(center)?;
            Ok(dist[i]
                .iter()
                .enumerate()
                .filter(|(_, d)| **d <= r)
                .map(|(j, _)| Label::Int(j as i64))
                .collect())
        }
        SpaceSpec::BoundedInfinite { .. } => Ok(vec![center.clone()]),
        SpaceSpec::IntegerLine => {
            let c = match center {
                Label::Int(n) => *n,
                _ => unreachable!(),
            };
            let m = r.floor_int();
            Ok(((c - m)..=(c + m)).map(Label::Int).collect())
        }
        SpaceSpec::IntegerLattice { dim } => {
            let c = match center {
                Label::Tuple(v) => v.clone(),
                _ => unreachable!(),
            };
            let m = r.floor_int();
            let mut out = Vec::new();
            let mut current = vec![0i64; *dim as usize];
            enumerate_l1(&c, m, 0, &mut current, &mut out);
            Ok(out)
        }
        SpaceSpec::ExponentialBlocks => {
            let x = match center {
                Label::Int(n) => *n,
                _ => unreachable!(),
            };
            if r < Dist::integer(1) {
                return Ok(vec![center.clone()]);
            }
            let m = (r - Dist::integer(1)).floor_int();
            let k0 = block_index(x);
            let mut out = Vec::new();
            for k in (k0 - m)..=(k0 + m) {
                out.extend(block_members(k).into_iter().map(Label::Int));
            }
            Ok(out)
        }
        SpaceSpec::FiberedLine => Ok(vec![center.clone()]),
        SpaceSpec::DisjointPower { base, copies } => {
            let (i, p) = match center {
                Label::Copy { copy, point } => (*copy, point.as_ref()),
                _ => unreachable!(),
            };
            let mut out = Vec::new();
            for j in 1..=(*copies as i64) {
                let slack = r - Dist::integer((i - j).abs());
                if slack < Dist::ZERO {
                    continue;
                }
                for q in members(base, p, slack)? {
                    out.push(Label::Copy {
                        copy: j,
                        point: Box::new(q),
                    });
                }
            }
            Ok(out)
        }
        SpaceSpec::SparseAugmented { base, spacing } => {
            let s = Dist::integer(*spacing);
            let mut out = Vec::new();
            match center {
                Label::Base(x) => {
                    for q in members(base, x, r)? {
                        out.push(Label::Base(Box::new(q)));
                    }
                    let through = base.distance(x, &base.anchor())?;
                    let mut t = 0i64;
                    while s * Dist::integer(t + 1) + through <= r {
                        out.push(Label::Tail(t));
                        t += 1;
                    }
                }
                Label::Tail(t) => {
                    let reach = (r / s).floor_int();
                    for u in (t - reach).max(0)..=(t + reach) {
                        out.push(Label::Tail(u));
                    }
                    let slack = r - s * Dist::integer(t + 1);
                    if slack >= Dist::ZERO {
                        for q in members(base, &base.anchor(), slack)? {
                            out.push(Label::Base(Box::new(q)));
                        }
                    }
                }
                _ => unreachable!(),
            }
            Ok(out)
        }
    }
}

fn enumerate_l1(center: &[i64], budget: i64, coord: usize, current: &mut Vec<i64>, out: &mut Vec<Label>) {
    if coord == center.len() {
        out.push(Label::Tuple(current.clone()));
        return;
    }
    for delta in -budget..=budget {
        current[coord] = center[coord] + delta;
        enumerate_l1(center, budget - delta.abs(), coord + 1, current, out);
    }
}
