//! Discrete metric spaces, their finite windows, and the symbolic oracle.
//!
//! A [`SpaceSpec`] is a symbolic description of a (usually infinite) discrete
//! metric space.  Distances are exact rationals — every built-in space in
//! fact produces integers — and are computed from labels alone, so a window
//! is just a chosen finite set of labels together with its cached distance
//! matrix.  Cardinality questions about balls ("is `B_r(x)` finite in the
//! full space?") are answered by a per-spec oracle rather than by inspecting
//! the window, which is what lets windowed code reason honestly about
//! truncation.
//!
//! Built-in spaces:
//!
//! * `ExplicitFinite` — a finite space given by its distance matrix.
//! * `BoundedInfinite` — countably many points, all at a fixed diameter from
//!   each other.
//! * `IntegerLine` / `IntegerLattice(n)` — `ℤ` and `ℤⁿ` with the ℓ¹ metric.
//! * `ExponentialBlocks` — `ℤ` regrouped into blocks `X_k` of size `2^|k|`
//!   with `d(n, m) = |k(n) − k(m)| + 1` for distinct points; every ball is
//!   finite but block sizes grow exponentially.
//! * `FiberedLine` — `ℤ × ℕ` where each fiber `{n} × ℕ` has diameter 1 and
//!   distinct fibers are at their base distance; every ball of radius ≥ 1 is
//!   infinite.
//! * `DisjointPower` — `n` labelled copies of a base space at pairwise copy
//!   distance `|i − j|`.
//! * `SparseAugmented` — a base space together with a ray of tail points
//!   spaced `spacing` apart; the tail is `r`-sparse for every `r < spacing`.

mod label;
mod oracle;
mod window;

pub use label::Label;
pub use oracle::{ball_cardinality, enumerate_ball, BallCardinality};
pub use window::{
    boundary_set, is_r_sparse, validate_metric, BallView, BoundaryView, MetricReport,
    MetricViolation, PointId, SparsenessVerdict, Window, WindowExtent,
};

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::Dist;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    /// A realisation request produced no points.
    #[error("window realisation produced no points")]
    EmptyWindow,
    /// Extent or spec parameters are missing, inconsistent, or out of range.
    #[error("bad parameters: {0}")]
    BadParams(String),
    /// A label does not belong to the space (wrong shape or out of range).
    #[error("label {label} not valid here: {reason}")]
    BadLabel { label: String, reason: String },
    /// The cardinality oracle cannot reason about the query; only possible
    /// for `ExplicitFinite` labels outside the declared matrix.
    #[error("cardinality oracle unavailable for label {label}")]
    OracleUnavailable { label: String },
}

/// Symbolic description of a discrete metric space.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    /// Finite space given by an explicit symmetric distance matrix; point
    /// labels are `0..n`.
    ExplicitFinite { dist: Vec<Vec<Dist>> },
    /// Infinitely many points, every pair at distance `diameter`.
    BoundedInfinite { diameter: Dist },
    /// `ℤ` with `d(a, b) = |a − b|`.
    IntegerLine,
    /// `ℤ^dim` with the ℓ¹ metric.
    IntegerLattice { dim: u32 },
    /// `ℤ` in exponential blocks, `d(n, m) = |k(n) − k(m)| + 1` for `n ≠ m`.
    ExponentialBlocks,
    /// `ℤ × ℕ`; fibers have diameter 1, fibers at base distance otherwise.
    FiberedLine,
    /// `copies` labelled copies of `base`, copy separation `|i − j|`.
    DisjointPower { base: Box<SpaceSpec>, copies: u32 },
    /// `base` plus a ray of tail points `spacing` apart, attached past the
    /// anchor point of the base.
    SparseAugmented { base: Box<SpaceSpec>, spacing: i64 },
}

impl SpaceSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SpaceSpec::ExplicitFinite { .. } => "explicit_finite",
            SpaceSpec::BoundedInfinite { .. } => "bounded_infinite",
            SpaceSpec::IntegerLine => "integer_line",
            SpaceSpec::IntegerLattice { .. } => "integer_lattice",
            SpaceSpec::ExponentialBlocks => "exponential_blocks",
            SpaceSpec::FiberedLine => "fibered_line",
            SpaceSpec::DisjointPower { .. } => "disjoint_power",
            SpaceSpec::SparseAugmented { .. } => "sparse_augmented",
        }
    }

    /// The canonical reference point used when a construction needs a fixed
    /// point of the space (e.g. attaching the sparse tail).
    pub fn anchor(&self) -> Label {
        match self {
            SpaceSpec::ExplicitFinite { .. }
            | SpaceSpec::BoundedInfinite { .. }
            | SpaceSpec::IntegerLine
            | SpaceSpec::ExponentialBlocks => Label::Int(0),
            SpaceSpec::IntegerLattice { dim } => Label::Tuple(vec![0; *dim as usize]),
            SpaceSpec::FiberedLine => Label::Fiber { base: 0, level: 0 },
            SpaceSpec::DisjointPower { base, .. } => Label::Copy {
                copy: 1,
                point: Box::new(base.anchor()),
            },
            SpaceSpec::SparseAugmented { base, .. } => Label::Base(Box::new(base.anchor())),
        }
    }

    /// Structural sanity of the spec itself (matrix symmetry is checked by
    /// `validate_metric`, not here).
    pub fn validate_params(&self) -> Result<(), SpaceError> {
        match self {
            SpaceSpec::ExplicitFinite { dist } => {
                let n = dist.len();
                if n == 0 {
                    return Err(SpaceError::BadParams("empty distance matrix".into()));
                }
                if dist.iter().any(|row| row.len() != n) {
                    return Err(SpaceError::BadParams("distance matrix not square".into()));
                }
                Ok(())
            }
            SpaceSpec::BoundedInfinite { diameter } => {
                if *diameter <= Dist::ZERO {
                    return Err(SpaceError::BadParams("diameter must be positive".into()));
                }
                Ok(())
            }
            SpaceSpec::IntegerLine | SpaceSpec::ExponentialBlocks | SpaceSpec::FiberedLine => {
                Ok(())
            }
            SpaceSpec::IntegerLattice { dim } => {
                if *dim == 0 || *dim > 8 {
                    return Err(SpaceError::BadParams("lattice dim must be in 1..=8".into()));
                }
                Ok(())
            }
            SpaceSpec::DisjointPower { base, copies } => {
                if *copies == 0 {
                    return Err(SpaceError::BadParams("copies must be >= 1".into()));
                }
                base.validate_params()
            }
            SpaceSpec::SparseAugmented { base, spacing } => {
                if *spacing <= 0 {
                    return Err(SpaceError::BadParams("spacing must be positive".into()));
                }
                base.validate_params()
            }
        }
    }

    /// Exact distance between two labels of this space.
    pub fn distance(&self, a: &Label, b: &Label) -> Result<Dist, SpaceError> {
        if a == b {
            // Still validate the label shape so bad queries never succeed.
            self.check_label(a)?;
            return Ok(Dist::ZERO);
        }
        match self {
            SpaceSpec::ExplicitFinite { dist } => {
                let i = self.explicit_index(a)?;
                let j = self.explicit_index(b)?;
                Ok(dist[i][j])
            }
            SpaceSpec::BoundedInfinite { diameter } => {
                self.check_label(a)?;
                self.check_label(b)?;
                Ok(*diameter)
            }
            SpaceSpec::IntegerLine => {
                let x = int_label(self, a)?;
                let y = int_label(self, b)?;
                Ok(Dist::integer((x - y).abs()))
            }
            SpaceSpec::IntegerLattice { dim } => {
                let x = tuple_label(a, *dim)?;
                let y = tuple_label(b, *dim)?;
                let sum: i64 = x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()).sum();
                Ok(Dist::integer(sum))
            }
            SpaceSpec::ExponentialBlocks => {
                let x = int_label(self, a)?;
                let y = int_label(self, b)?;
                let dk = (block_index(x) - block_index(y)).abs();
                Ok(Dist::integer(dk + 1))
            }
            SpaceSpec::FiberedLine => {
                let (nb, _) = fiber_label(a)?;
                let (mb, _) = fiber_label(b)?;
                if nb == mb {
                    Ok(Dist::integer(1))
                } else {
                    Ok(Dist::integer((nb - mb).abs()))
                }
            }
            SpaceSpec::DisjointPower { base, copies } => {
                let (i, p) = copy_label(a, *copies)?;
                let (j, q) = copy_label(b, *copies)?;
                let inner = base.distance(p, q)?;
                Ok(inner + Dist::integer((i - j).abs()))
            }
            SpaceSpec::SparseAugmented { base, spacing } => {
                let s = Dist::integer(*spacing);
                match (a, b) {
                    (Label::Base(p), Label::Base(q)) => base.distance(p, q),
                    (Label::Tail(t), Label::Tail(u)) => Ok(s * Dist::integer((t - u).abs())),
                    (Label::Base(p), Label::Tail(t)) | (Label::Tail(t), Label::Base(p)) => {
                        if *t < 0 {
                            return Err(bad_label(b, "tail index must be nonnegative"));
                        }
                        let through_anchor = base.distance(p, &base.anchor())?;
                        Ok(s * Dist::integer(t + 1) + through_anchor)
                    }
                    _ => Err(bad_label(a, "expected a base or tail label")),
                }
            }
        }
    }

    /// Validate that a label denotes a point of this space.
    pub fn check_label(&self, l: &Label) -> Result<(), SpaceError> {
        match self {
            SpaceSpec::ExplicitFinite { .. } => self.explicit_index(l).map(|_| ()),
            SpaceSpec::BoundedInfinite { .. } => match l {
                Label::Int(i) if *i >= 0 => Ok(()),
                _ => Err(bad_label(l, "expected a nonnegative integer label")),
            },
            SpaceSpec::IntegerLine | SpaceSpec::ExponentialBlocks => {
                int_label(self, l).map(|_| ())
            }
            SpaceSpec::IntegerLattice { dim } => tuple_label(l, *dim).map(|_| ()),
            SpaceSpec::FiberedLine => fiber_label(l).map(|_| ()),
            SpaceSpec::DisjointPower { base, copies } => {
                let (_, p) = copy_label(l, *copies)?;
                base.check_label(p)
            }
            SpaceSpec::SparseAugmented { base, .. } => match l {
                Label::Base(p) => base.check_label(p),
                Label::Tail(t) if *t >= 0 => Ok(()),
                _ => Err(bad_label(l, "expected a base or tail label")),
            },
        }
    }

    fn explicit_index(&self, l: &Label) -> Result<usize, SpaceError> {
        let SpaceSpec::ExplicitFinite { dist } = self else {
            unreachable!("explicit_index on non-explicit spec");
        };
        match l {
            Label::Int(i) if *i >= 0 && (*i as usize) < dist.len() => Ok(*i as usize),
            Label::Int(_) => Err(SpaceError::OracleUnavailable {
                label: l.to_string(),
            }),
            _ => Err(bad_label(l, "expected an integer index")),
        }
    }
}

fn bad_label(l: &Label, reason: &str) -> SpaceError {
    SpaceError::BadLabel {
        label: l.to_string(),
        reason: reason.to_string(),
    }
}

fn int_label(spec: &SpaceSpec, l: &Label) -> Result<i64, SpaceError> {
    match l {
        Label::Int(i) => Ok(*i),
        _ => Err(bad_label(
            l,
            match spec {
                SpaceSpec::IntegerLine => "integer line labels are integers",
                SpaceSpec::ExponentialBlocks => "block space labels are integers",
                _ => "expected an integer label",
            },
        )),
    }
}

fn tuple_label<'a>(l: &'a Label, dim: u32) -> Result<&'a [i64], SpaceError> {
    match l {
        Label::Tuple(v) if v.len() == dim as usize => Ok(v),
        _ => Err(bad_label(l, "expected a lattice tuple of matching length")),
    }
}

fn fiber_label(l: &Label) -> Result<(i64, i64), SpaceError> {
    match l {
        Label::Fiber { base, level } if *level >= 0 => Ok((*base, *level)),
        _ => Err(bad_label(l, "expected a fiber label with level >= 0")),
    }
}

fn copy_label<'a>(l: &'a Label, copies: u32) -> Result<(i64, &'a Label), SpaceError> {
    match l {
        Label::Copy { copy, point } if *copy >= 1 && *copy <= copies as i64 => Ok((*copy, point)),
        Label::Copy { .. } => Err(bad_label(l, "copy index out of range")),
        _ => Err(bad_label(l, "expected a copy label")),
    }
}

/// Block index for the exponential block space: block `k ≥ 0` holds
/// `{2^k − 1, …, 2^{k+1} − 2}` and block `−k` is its mirror image.
pub fn block_index(n: i64) -> i64 {
    if n == 0 {
        return 0;
    }
    let m = n.unsigned_abs();
    let k = (64 - (m + 1).leading_zeros() - 1) as i64;
    if n > 0 {
        k
    } else {
        -k
    }
}

/// All members of block `k` of the exponential block space.
pub fn block_members(k: i64) -> Vec<i64> {
    if k == 0 {
        return vec![0];
    }
    let a = k.unsigned_abs() as u32;
    let lo = (1i64 << a) - 1;
    let hi = (1i64 << (a + 1)) - 2;
    let range: Vec<i64> = (lo..=hi).collect();
    if k > 0 {
        range
    } else {
        range.into_iter().map(|n| -n).rev().collect()
    }
}

// --- JSON shape: {"kind": "...", "params": {...}} -------------------------

#[derive(Serialize, Deserialize)]
struct SpecJson {
    kind: String,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
}

impl Serialize for SpaceSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut params = serde_json::Map::new();
        match self {
            SpaceSpec::ExplicitFinite { dist } => {
                let rows: Vec<Vec<String>> = dist
                    .iter()
                    .map(|row| row.iter().map(|d| d.to_string()).collect())
                    .collect();
                params.insert("dist".into(), serde_json::json!(rows));
            }
            SpaceSpec::BoundedInfinite { diameter } => {
                params.insert("diameter".into(), serde_json::json!(diameter.to_string()));
            }
            SpaceSpec::IntegerLine | SpaceSpec::ExponentialBlocks | SpaceSpec::FiberedLine => {}
            SpaceSpec::IntegerLattice { dim } => {
                params.insert("dim".into(), serde_json::json!(dim));
            }
            SpaceSpec::DisjointPower { base, copies } => {
                params.insert("base".into(), serde_json::to_value(base).unwrap());
                params.insert("copies".into(), serde_json::json!(copies));
            }
            SpaceSpec::SparseAugmented { base, spacing } => {
                params.insert("base".into(), serde_json::to_value(base).unwrap());
                params.insert("spacing".into(), serde_json::json!(spacing));
            }
        }
        SpecJson {
            kind: self.kind_name().to_string(),
            params,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpaceSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<SpaceSpec, D::Error> {
        let raw = SpecJson::deserialize(deserializer)?;
        let get = |key: &str| {
            raw.params
                .get(key)
                .cloned()
                .ok_or_else(|| D::Error::custom(format!("missing param {key}")))
        };
        match raw.kind.as_str() {
            "explicit_finite" => {
                let rows: Vec<Vec<String>> =
                    serde_json::from_value(get("dist")?).map_err(D::Error::custom)?;
                let dist: Result<Vec<Vec<Dist>>, String> = rows
                    .iter()
                    .map(|row| row.iter().map(|s| s.parse()).collect())
                    .collect();
                Ok(SpaceSpec::ExplicitFinite {
                    dist: dist.map_err(D::Error::custom)?,
                })
            }
            "bounded_infinite" => {
                let s: String = serde_json::from_value(get("diameter")?).map_err(D::Error::custom)?;
                Ok(SpaceSpec::BoundedInfinite {
                    diameter: s.parse().map_err(D::Error::custom)?,
                })
            }
            "integer_line" => Ok(SpaceSpec::IntegerLine),
            "integer_lattice" => Ok(SpaceSpec::IntegerLattice {
                dim: serde_json::from_value(get("dim")?).map_err(D::Error::custom)?,
            }),
            "exponential_blocks" => Ok(SpaceSpec::ExponentialBlocks),
            "fibered_line" => Ok(SpaceSpec::FiberedLine),
            "disjoint_power" => Ok(SpaceSpec::DisjointPower {
                base: serde_json::from_value(get("base")?).map_err(D::Error::custom)?,
                copies: serde_json::from_value(get("copies")?).map_err(D::Error::custom)?,
            }),
            "sparse_augmented" => Ok(SpaceSpec::SparseAugmented {
                base: serde_json::from_value(get("base")?).map_err(D::Error::custom)?,
                spacing: serde_json::from_value(get("spacing")?).map_err(D::Error::custom)?,
            }),
            other => Err(D::Error::custom(format!("unknown space kind {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_indexing_matches_block_contents() {
        assert_eq!(block_index(0), 0);
        assert_eq!(block_members(1), vec![1, 2]);
        assert_eq!(block_members(2), vec![3, 4, 5, 6]);
        assert_eq!(block_members(3), (7..=14).collect::<Vec<_>>());
        assert_eq!(block_members(-1), vec![-2, -1]);
        for k in -5..=5 {
            for n in block_members(k) {
                assert_eq!(block_index(n), k, "point {n} should sit in block {k}");
            }
        }
    }

    #[test]
    fn exponential_block_distances() {
        let spec = SpaceSpec::ExponentialBlocks;
        // 7 sits in block 3, 0 in block 0: distance |3-0|+1.
        assert_eq!(
            spec.distance(&Label::Int(7), &Label::Int(0)).unwrap(),
            Dist::integer(4)
        );
        // 1 and 3 sit in adjacent blocks.
        assert_eq!(
            spec.distance(&Label::Int(1), &Label::Int(3)).unwrap(),
            Dist::integer(2)
        );
        // Same block, distinct points: distance 1.
        assert_eq!(
            spec.distance(&Label::Int(3), &Label::Int(6)).unwrap(),
            Dist::integer(1)
        );
        assert_eq!(
            spec.distance(&Label::Int(5), &Label::Int(5)).unwrap(),
            Dist::ZERO
        );
    }

    #[test]
    fn fibered_line_distances() {
        let spec = SpaceSpec::FiberedLine;
        let p = |base, level| Label::Fiber { base, level };
        assert_eq!(spec.distance(&p(0, 0), &p(0, 1)).unwrap(), Dist::integer(1));
        assert_eq!(spec.distance(&p(0, 0), &p(1, 1)).unwrap(), Dist::integer(1));
        assert_eq!(spec.distance(&p(0, 3), &p(4, 9)).unwrap(), Dist::integer(4));
        assert!(spec.distance(&p(0, 0), &Label::Int(3)).is_err());
    }

    #[test]
    fn disjoint_power_distances() {
        let spec = SpaceSpec::DisjointPower {
            base: Box::new(SpaceSpec::IntegerLine),
            copies: 4,
        };
        let c = |copy, n| Label::Copy {
            copy,
            point: Box::new(Label::Int(n)),
        };
        // Same base point in copies 1 and 3.
        assert_eq!(spec.distance(&c(1, 5), &c(3, 5)).unwrap(), Dist::integer(2));
        assert_eq!(spec.distance(&c(2, 0), &c(2, 7)).unwrap(), Dist::integer(7));
        assert_eq!(spec.distance(&c(1, 0), &c(2, 3)).unwrap(), Dist::integer(4));
        assert!(spec.distance(&c(0, 0), &c(1, 0)).is_err(), "copy 0 invalid");
        assert!(spec.distance(&c(5, 0), &c(1, 0)).is_err(), "copy 5 invalid");
    }

    #[test]
    fn sparse_augmented_distances() {
        let spec = SpaceSpec::SparseAugmented {
            base: Box::new(SpaceSpec::IntegerLine),
            spacing: 10,
        };
        let b = |n| Label::Base(Box::new(Label::Int(n)));
        let t = Label::Tail;
        assert_eq!(spec.distance(&t(0), &t(3)).unwrap(), Dist::integer(30));
        // Tail 0 attaches 10 past the anchor.
        assert_eq!(spec.distance(&b(0), &t(0)).unwrap(), Dist::integer(10));
        assert_eq!(spec.distance(&b(4), &t(1)).unwrap(), Dist::integer(24));
        assert_eq!(spec.distance(&b(-3), &b(4)).unwrap(), Dist::integer(7));
    }

    #[test]
    fn bounded_infinite_is_constant_diameter() {
        let spec = SpaceSpec::BoundedInfinite {
            diameter: Dist::integer(3),
        };
        assert_eq!(
            spec.distance(&Label::Int(0), &Label::Int(99)).unwrap(),
            Dist::integer(3)
        );
        assert!(spec.distance(&Label::Int(-1), &Label::Int(0)).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let specs = vec![
            SpaceSpec::IntegerLine,
            SpaceSpec::IntegerLattice { dim: 2 },
            SpaceSpec::ExponentialBlocks,
            SpaceSpec::FiberedLine,
            SpaceSpec::BoundedInfinite {
                diameter: Dist::integer(5),
            },
            SpaceSpec::DisjointPower {
                base: Box::new(SpaceSpec::IntegerLine),
                copies: 3,
            },
            SpaceSpec::SparseAugmented {
                base: Box::new(SpaceSpec::IntegerLattice { dim: 2 }),
                spacing: 10,
            },
            SpaceSpec::ExplicitFinite {
                dist: vec![
                    vec![Dist::ZERO, Dist::integer(1)],
                    vec![Dist::integer(1), Dist::ZERO],
                ],
            },
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: SpaceSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(spec, back, "round trip through {json}");
        }
    }

    #[test]
    fn json_shape_has_kind_and_params() {
        let v = serde_json::to_value(SpaceSpec::IntegerLattice { dim: 2 }).unwrap();
        assert_eq!(v["kind"], "integer_lattice");
        assert_eq!(v["params"]["dim"], 2);
    }
}
