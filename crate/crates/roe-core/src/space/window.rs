//! Finite windows: a chosen finite set of labels with exact cached distances.
//!
//! A window is honest about being a truncation.  Distances between window
//! points are ambient-exact (they are computed from labels, not clipped),
//! but set-level questions — boundaries, interiors, ball membership — can
//! be distorted near the window edge.  Every such operation here either
//! consults the ambient oracle or reports a `clipped`/`truncated` flag.

use std::collections::BTreeMap;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::oracle::{ball_cardinality, enumerate_ball, BallCardinality};
use super::{block_index, block_members, Label, SpaceError, SpaceSpec};
use crate::rational::Dist;

/// Index of a point inside one window's sorted point list.
pub type PointId = usize;

/// Realisation parameters: which finite chunk of the space to take.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowExtent {
    /// Half-width for line-like coordinates: labels with `|x| ≤ half_width`.
    pub half_width: Option<i64>,
    /// Highest fiber level for the fibered line: levels `0..=levels`.
    pub levels: Option<i64>,
    /// Highest block index for the block space: blocks `-blocks..=blocks`.
    pub blocks: Option<i64>,
    /// Point count for spaces realised as an initial segment.
    pub count: Option<i64>,
    /// Number of tail points for sparse augmentations.
    pub tail_count: Option<i64>,
}

/// Hard cap on window size: the distance matrix is dense.
pub const MAX_WINDOW_POINTS: usize = 2500;

/// A finite window of a space: sorted labels plus the exact distance matrix.
#[derive(Debug, Clone)]
pub struct Window {
    spec: SpaceSpec,
    points: Vec<Label>,
    index: BTreeMap<Label, PointId>,
    dist: Vec<Dist>,
}

impl Window {
    /// Realise the window described by `extent`.
    pub fn realize(spec: &SpaceSpec, extent: &WindowExtent) -> Result<Window, SpaceError> {
        spec.validate_params()?;
        let labels = realize_labels(spec, extent)?;
        Window::from_labels(spec.clone(), labels)
    }

    /// Build a window from an explicit label set (sorted and deduplicated
    /// here; every label is validated against the spec).
    pub fn from_labels(spec: SpaceSpec, mut labels: Vec<Label>) -> Result<Window, SpaceError> {
        labels.sort();
        labels.dedup();
        if labels.is_empty() {
            return Err(SpaceError::EmptyWindow);
        }
        if labels.len() > MAX_WINDOW_POINTS {
            return Err(SpaceError::BadParams(format!(
                "window has {} points, cap is {MAX_WINDOW_POINTS}",
                labels.len()
            )));
        }
        for l in &labels {
            spec.check_label(l)?;
        }
        let n = labels.len();
        let mut dist = vec![Dist::ZERO; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = spec.distance(&labels[i], &labels[j])?;
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let index = labels
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        Ok(Window {
            spec,
            points: labels,
            index,
            dist,
        })
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Label] {
        &self.points
    }

    pub fn label(&self, p: PointId) -> &Label {
        &self.points[p]
    }

    pub fn id(&self, l: &Label) -> Option<PointId> {
        self.index.get(l).copied()
    }

    /// Exact distance between two window points.
    pub fn dist(&self, a: PointId, b: PointId) -> Dist {
        self.dist[a * self.points.len() + b]
    }

    /// True if the closed ambient ball of radius `margin` around `p` lies
    /// entirely inside the window, i.e. nothing within `margin` of `p` has
    /// been truncated away.  An infinite ambient ball never fits.
    pub fn is_metric_interior(&self, p: PointId, margin: Dist) -> Result<bool, SpaceError> {
        match enumerate_ball(&self.spec, &self.points[p], margin)? {
            None => Ok(false),
            Some(ball) => Ok(ball.iter().all(|l| self.index.contains_key(l))),
        }
    }

    /// All points metric-interior at the given margin.
    pub fn metric_interior(&self, margin: Dist) -> Result<Vec<PointId>, SpaceError> {
        (0..self.n())
            .filter_map(|p| match self.is_metric_interior(p, margin) {
                Ok(true) => Some(Ok(p)),
                Ok(false) => None,
                Err(e) => Some(Err(e)),
            })
            .collect()
    }

    /// Structural interior: points at least `margin` index steps away from
    /// every truncated coordinate direction of this window's point set.
    ///
    /// Unlike [`Self::metric_interior`], this ignores the metric and only
    /// retreats from coordinate bounds that the windowing introduced;
    /// coordinate bounds the ambient space itself imposes (fiber level 0,
    /// tail index 0) are kept.  Spaces whose windows never truncate
    /// (explicit finite spaces) keep all points.
    pub fn index_interior(&self, margin: i64) -> Vec<PointId> {
        if margin <= 0 {
            return (0..self.n()).collect();
        }
        let bounds = IndexBounds::of(&self.spec, &self.points);
        (0..self.n())
            .filter(|&p| bounds.is_interior(&self.spec, &self.points[p], margin))
            .collect()
    }

    /// Window points within `r` of `center`, with the ambient cardinality
    /// alongside so callers can see truncation.
    pub fn ball(&self, center: PointId, r: Dist) -> Result<BallView, SpaceError> {
        let members: Vec<PointId> = (0..self.n())
            .filter(|&q| self.dist(center, q) <= r)
            .collect();
        let ambient = ball_cardinality(&self.spec, &self.points[center], r)?;
        let truncated = match ambient {
            BallCardinality::Infinite => true,
            BallCardinality::Finite(c) => c as usize != members.len(),
        };
        Ok(BallView {
            members,
            ambient,
            truncated,
        })
    }
}

/// A windowed ball plus what the ambient space says about it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallView {
    pub members: Vec<PointId>,
    pub ambient: BallCardinality,
    /// True when the window is missing ambient members of this ball.
    pub truncated: bool,
}

/// Result of a windowed two-sided boundary computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryView {
    pub members: Vec<PointId>,
    /// True when window truncation may have distorted the answer: some
    /// point of the input set, or some window point within `r` of it, is
    /// closer than `r` to the window edge.
    pub clipped: bool,
}

/// Two-sided boundary inside a window: points within `r` of the set *and*
/// within `r` of its complement (both sides closed; distances to the empty
/// set count as infinite, so the boundary of the empty or full set is
/// empty).
pub fn boundary_set(
    window: &Window,
    set: &[PointId],
    r: Dist,
) -> Result<BoundaryView, SpaceError> {
    if r < Dist::ZERO {
        return Err(SpaceError::BadParams("boundary radius must be >= 0".into()));
    }
    let n = window.n();
    let mut in_set = vec![false; n];
    for &p in set {
        if p >= n {
            return Err(SpaceError::BadParams(format!("point id {p} out of range")));
        }
        in_set[p] = true;
    }
    let mut members = Vec::new();
    let mut near_set = Vec::new();
    for x in 0..n {
        let close_to_set = (0..n).any(|y| in_set[y] && window.dist(x, y) <= r);
        let close_to_complement = (0..n).any(|y| !in_set[y] && window.dist(x, y) <= r);
        if close_to_set {
            near_set.push(x);
            if close_to_complement {
                members.push(x);
            }
        }
    }
    // The window answer equals the ambient answer when every point of the
    // set (so the ambient r-neighbourhood stays inside the window) and every
    // window point near the set (so its complement test is uncontaminated)
    // has its full r-ball present.
    let mut clipped = false;
    for &p in set.iter().chain(near_set.iter()) {
        if !window.is_metric_interior(p, r)? {
            clipped = true;
            break;
        }
    }
    Ok(BoundaryView { members, clipped })
}

/// Verdict of a pairwise sparseness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsenessVerdict {
    pub sparse: bool,
    /// A pair at distance ≤ r, when not sparse.
    pub violating_pair: Option<(PointId, PointId)>,
}

/// A set is `r`-sparse when all its distinct points are at distance > `r`.
/// Distances are ambient-exact, so the window never distorts this check.
pub fn is_r_sparse(window: &Window, set: &[PointId], r: Dist) -> SparsenessVerdict {
    for (a, &p) in set.iter().enumerate() {
        for &q in &set[a + 1..] {
            if p != q && window.dist(p, q) <= r {
                return SparsenessVerdict {
                    sparse: false,
                    violating_pair: Some((p, q)),
                };
            }
        }
    }
    SparsenessVerdict {
        sparse: true,
        violating_pair: None,
    }
}

/// One metric axiom failure found by [`validate_metric`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MetricViolation {
    SelfDistanceNonzero { point: PointId, value: Dist },
    NegativeDistance { a: PointId, b: PointId, value: Dist },
    ZeroDistanceDistinct { a: PointId, b: PointId },
    NotSymmetric { a: PointId, b: PointId },
    TriangleViolation { a: PointId, b: PointId, c: PointId },
}

/// Exhaustive exact check of the metric axioms on a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub violations: Vec<MetricViolation>,
}

impl MetricReport {
    pub fn is_metric(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_metric(window: &Window) -> MetricReport {
    let n = window.n();
    let mut violations = Vec::new();
    for a in 0..n {
        if !window.dist(a, a).is_zero() {
            violations.push(MetricViolation::SelfDistanceNonzero {
                point: a,
                value: window.dist(a, a),
            });
        }
        for b in (a + 1)..n {
            let d = window.dist(a, b);
            if d < Dist::ZERO {
                violations.push(MetricViolation::NegativeDistance { a, b, value: d });
            } else if d.is_zero() {
                violations.push(MetricViolation::ZeroDistanceDistinct { a, b });
            }
            if window.dist(b, a) != d {
                violations.push(MetricViolation::NotSymmetric { a, b });
            }
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let dab = window.dist(a, b);
            for c in 0..n {
                if c == a || c == b {
                    continue;
                }
                if dab > window.dist(a, c) + window.dist(c, b) {
                    violations.push(MetricViolation::TriangleViolation { a, b, c });
                }
            }
        }
    }
    MetricReport { violations }
}

fn realize_labels(spec: &SpaceSpec, extent: &WindowExtent) -> Result<Vec<Label>, SpaceError> {
    let need = |opt: Option<i64>, what: &str| {
        opt.ok_or_else(|| SpaceError::BadParams(format!("extent field {what} required")))
    };
    match spec {
        SpaceSpec::ExplicitFinite { dist } => {
            let n = dist.len() as i64;
            let take = extent.count.unwrap_or(n).min(n);
            if take <= 0 {
                return Err(SpaceError::EmptyWindow);
            }
            Ok((0..take).map(Label::Int).collect())
        }
        SpaceSpec::BoundedInfinite { .. } => {
            let c = need(extent.count, "count")?;
            if c <= 0 {
                return Err(SpaceError::EmptyWindow);
            }
            Ok((0..c).map(Label::Int).collect())
        }
        SpaceSpec::IntegerLine => {
            let n = need(extent.half_width, "half_width")?;
            if n < 0 {
                return Err(SpaceError::BadParams("half_width must be >= 0".into()));
            }
            Ok((-n..=n).map(Label::Int).collect())
        }
        SpaceSpec::IntegerLattice { dim } => {
            let n = need(extent.half_width, "half_width")?;
            if n < 0 {
                return Err(SpaceError::BadParams("half_width must be >= 0".into()));
            }
            let side = (2 * n + 1) as u128;
            if side.pow(*dim) > MAX_WINDOW_POINTS as u128 {
                return Err(SpaceError::BadParams(format!(
                    "lattice box of side {} in dim {dim} exceeds the window cap",
                    2 * n + 1
                )));
            }
            let mut out = Vec::new();
            let mut current = vec![0i64; *dim as usize];
            fill_box(n, 0, &mut current, &mut out);
            Ok(out)
        }
        SpaceSpec::ExponentialBlocks => {
            let b = need(extent.blocks, "blocks")?;
            if b < 0 {
                return Err(SpaceError::BadParams("blocks must be >= 0".into()));
            }
            let mut out = Vec::new();
            for k in -b..=b {
                out.extend(block_members(k).into_iter().map(Label::Int));
            }
            Ok(out)
        }
        SpaceSpec::FiberedLine => {
            let n = need(extent.half_width, "half_width")?;
            let k = need(extent.levels, "levels")?;
            if n < 0 || k < 0 {
                return Err(SpaceError::BadParams(
                    "half_width and levels must be >= 0".into(),
                ));
            }
            let mut out = Vec::new();
            for base in -n..=n {
                for level in 0..=k {
                    out.push(Label::Fiber { base, level });
                }
            }
            Ok(out)
        }
        SpaceSpec::DisjointPower { base, copies } => {
            let inner = realize_labels(base, extent)?;
            let mut out = Vec::new();
            for copy in 1..=(*copies as i64) {
                for p in &inner {
                    out.push(Label::Copy {
                        copy,
                        point: Box::new(p.clone()),
                    });
                }
            }
            Ok(out)
        }
        SpaceSpec::SparseAugmented { base, .. } => {
            let t = need(extent.tail_count, "tail_count")?;
            if t < 0 {
                return Err(SpaceError::BadParams("tail_count must be >= 0".into()));
            }
            let mut out: Vec<Label> = realize_labels(base, extent)?
                .into_iter()
                .map(|p| Label::Base(Box::new(p)))
                .collect();
            out.extend((0..t).map(Label::Tail));
            Ok(out)
        }
    }
}

fn fill_box(n: i64, coord: usize, current: &mut Vec<i64>, out: &mut Vec<Label>) {
    if coord == current.len() {
        out.push(Label::Tuple(current.clone()));
        return;
    }
    for x in -n..=n {
        current[coord] = x;
        fill_box(n, coord + 1, current, out);
    }
}

/// Coordinate bounds actually present in a point set, used to decide which
/// directions the windowing truncated.
struct IndexBounds {
    // (min, max) per role; meaning depends on the spec kind.
    primary: (i64, i64),
    secondary: (i64, i64),
    inner: Option<Box<IndexBounds>>,
}

impl IndexBounds {
    fn of(spec: &SpaceSpec, points: &[Label]) -> IndexBounds {
        let mut primary = (i64::MAX, i64::MIN);
        let mut secondary = (i64::MAX, i64::MIN);
        let track = |slot: &mut (i64, i64), v: i64| {
            slot.0 = slot.0.min(v);
            slot.1 = slot.1.max(v);
        };
        let mut inner_points = Vec::new();
        for l in points {
            match (spec, l) {
                (SpaceSpec::IntegerLine, Label::Int(x)) => track(&mut primary, *x),
                (SpaceSpec::ExponentialBlocks, Label::Int(x)) => {
                    track(&mut primary, block_index(*x))
                }
                (SpaceSpec::IntegerLattice { .. }, Label::Tuple(v)) => {
                    for x in v {
                        track(&mut primary, *x);
                    }
                }
                (SpaceSpec::FiberedLine, Label::Fiber { base, level }) => {
                    track(&mut primary, *base);
                    track(&mut secondary, *level);
                }
                (SpaceSpec::DisjointPower { .. }, Label::Copy { point, .. }) => {
                    inner_points.push((**point).clone());
                }
                (SpaceSpec::SparseAugmented { .. }, Label::Base(p)) => {
                    inner_points.push((**p).clone());
                }
                (SpaceSpec::SparseAugmented { .. }, Label::Tail(t)) => {
                    track(&mut secondary, *t)
                }
                _ => {}
            }
        }
        let inner = match spec {
            SpaceSpec::DisjointPower { base, .. } | SpaceSpec::SparseAugmented { base, .. } => {
                Some(Box::new(IndexBounds::of(base, &inner_points)))
            }
            _ => None,
        };
        IndexBounds {
            primary,
            secondary,
            inner,
        }
    }

    fn is_interior(&self, spec: &SpaceSpec, l: &Label, m: i64) -> bool {
        let inside = |slot: (i64, i64), v: i64| v >= slot.0 + m && v <= slot.1 - m;
        match (spec, l) {
            // Finite explicit spaces are fully realised: nothing truncated.
            (SpaceSpec::ExplicitFinite { .. }, _) => true,
            // Every omitted point is at the full diameter; a positive index
            // margin cannot be honoured.
            (SpaceSpec::BoundedInfinite { .. }, _) => false,
            (SpaceSpec::IntegerLine, Label::Int(x)) => inside(self.primary, *x),
            (SpaceSpec::ExponentialBlocks, Label::Int(x)) => {
                inside(self.primary, block_index(*x))
            }
            (SpaceSpec::IntegerLattice { .. }, Label::Tuple(v)) => {
                v.iter().all(|x| inside(self.primary, *x))
            }
            // Fiber level 0 is a genuine edge of the space, so only the top
            // of the level range counts as truncated.
            (SpaceSpec::FiberedLine, Label::Fiber { base, level }) => {
                inside(self.primary, *base) && *level <= self.secondary.1 - m
            }
            (SpaceSpec::DisjointPower { base, .. }, Label::Copy { point, .. }) => self
                .inner
                .as_ref()
                .is_some_and(|b| b.is_interior(base, point, m)),
            (SpaceSpec::SparseAugmented { base, .. }, Label::Base(p)) => self
                .inner
                .as_ref()
                .is_some_and(|b| b.is_interior(base, p, m)),
            // Tail index 0 is a genuine edge (the attachment end).
            (SpaceSpec::SparseAugmented { .. }, Label::Tail(t)) => *t <= self.secondary.1 - m,
            _ => false,
        }
    }
}

// --- JSON: {"spec", "points", "dist" (strict lower triangle, rationals)} --

#[derive(Serialize, Deserialize)]
struct WindowJson {
    spec: SpaceSpec,
    points: Vec<Label>,
    dist: Vec<Vec<String>>,
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n = self.n();
        let dist: Vec<Vec<String>> = (0..n)
            .map(|i| (0..i).map(|j| self.dist(i, j).to_string()).collect())
            .collect();
        WindowJson {
            spec: self.spec.clone(),
            points: self.points.clone(),
            dist,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Window, D::Error> {
        let raw = WindowJson::deserialize(deserializer)?;
        let window =
            Window::from_labels(raw.spec, raw.points.clone()).map_err(D::Error::custom)?;
        if raw.points != window.points {
            return Err(D::Error::custom(
                "window points must be sorted and duplicate-free",
            ));
        }
        // The stored matrix is a cache of spec-derived distances; reject a
        // file whose cache disagrees with the spec.
        let n = window.n();
        if raw.dist.len() != n || raw.dist.iter().enumerate().any(|(i, row)| row.len() != i) {
            return Err(D::Error::custom("distance triangle has the wrong shape"));
        }
        for (i, row) in raw.dist.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                let d: Dist = s
                    .parse()
                    .map_err(|e| D::Error::custom(format!("bad distance {s}: {e}")))?;
                if d != window.dist(i, j) {
                    return Err(D::Error::custom(format!(
                        "stored distance {s} between points {j} and {i} contradicts the spec"
                    )));
                }
            }
        }
        Ok(window)
    }
}
