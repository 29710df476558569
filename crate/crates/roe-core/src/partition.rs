//! Covers, partitions, Følner ratios, and paradoxical decompositions.
//!
//! The central construction turns a cover by radius-`r` balls into a
//! partition into uniformly bounded sets, constructively and with an
//! explicit sandwich: every partition block `D` contains the `r`-ball of
//! its anchor centre and sits inside the `3r`-ball.  Følner ratios are
//! computed in the ambient space through the ball oracle with exact
//! rational arithmetic, so window truncation can never fake amenability.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::rational::Dist;
use crate::space::{
    ball_cardinality, block_index, enumerate_ball, BallCardinality, Label, PointId, SpaceError,
    SpaceSpec, Window,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    /// The proposed centers fail to cover the window at the stated radius.
    #[error("point {uncovered} is not within the cover radius of any center")]
    NotCovering { uncovered: PointId },
    /// The block-building recursion stopped making progress (defensive;
    /// mathematically unreachable for verified covers).
    #[error("block construction stalled at step {step}")]
    InductionStalled { step: usize },
    /// A supplied partition is malformed.
    #[error("bad partition: {0}")]
    BadBlock(String),
    /// A chosen cover ball is finite in the ambient space, so the cover
    /// cannot consist of uniformly infinite balls.
    #[error("the ball of radius {radius} around {center} has only {cardinality} ambient points")]
    NotCiubb {
        center: String,
        radius: Dist,
        cardinality: u64,
    },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A cover of a window by balls of one radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCover {
    pub radius: Dist,
    /// Centers in window order.
    pub centers: Vec<PointId>,
}

/// Greedy cover: walk points in window (label) order and promote every
/// point not yet within `radius` of a chosen center.  Always succeeds and
/// is deterministic.
pub fn find_ball_cover(window: &Window, radius: Dist) -> Result<BallCover, PartitionError> {
    if radius < Dist::ZERO {
        return Err(PartitionError::BadParams("radius must be >= 0".into()));
    }
    let mut centers: Vec<PointId> = Vec::new();
    for p in 0..window.n() {
        if !centers.iter().any(|&c| window.dist(p, c) <= radius) {
            centers.push(p);
        }
    }
    Ok(BallCover { radius, centers })
}

/// Check that every window point lies within the cover radius of a center.
pub fn verify_ball_cover(window: &Window, cover: &BallCover) -> Result<(), PartitionError> {
    for p in 0..window.n() {
        if !cover
            .centers
            .iter()
            .any(|&c| window.dist(p, c) <= cover.radius)
        {
            return Err(PartitionError::NotCovering { uncovered: p });
        }
    }
    Ok(())
}

/// A ball cover together with the ambient cardinality of every ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiubbCover {
    pub cover: BallCover,
    /// Ambient-space verdict for each centre's ball; all infinite.
    pub verdicts: Vec<BallCardinality>,
}

/// Greedy cover by balls that are *infinite in the ambient space*.
///
/// The window part never fails; the construction fails precisely when one
/// of the greedily chosen balls is finite in the full space, and then the
/// offending centre is the witness.
pub fn find_ciubb(window: &Window, radius: Dist) -> Result<CiubbCover, PartitionError> {
    if radius <= Dist::ZERO {
        return Err(PartitionError::BadParams("radius must be > 0".into()));
    }
    let cover = find_ball_cover(window, radius)?;
    let mut verdicts = Vec::with_capacity(cover.centers.len());
    for &c in &cover.centers {
        let verdict = ball_cardinality(window.spec(), window.label(c), radius)?;
        if let BallCardinality::Finite(cardinality) = verdict {
            return Err(PartitionError::NotCiubb {
                center: window.label(c).to_string(),
                radius,
                cardinality,
            });
        }
        verdicts.push(verdict);
    }
    Ok(CiubbCover { cover, verdicts })
}

/// One block of a partition into uniformly bounded sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionBlock {
    /// The cover center this block was carved around.
    pub anchor: PointId,
    /// Sorted members.
    pub members: Vec<PointId>,
}

/// A partition of a window into uniformly bounded blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundedPartition {
    /// The cover radius the sandwich bounds refer to.
    pub radius: Dist,
    pub blocks: Vec<PartitionBlock>,
}

impl BoundedPartition {
    /// Build directly from explicit blocks (validated: disjoint, covering,
    /// anchors inside their blocks).
    pub fn from_blocks(
        window: &Window,
        radius: Dist,
        blocks: Vec<(PointId, Vec<PointId>)>,
    ) -> Result<BoundedPartition, PartitionError> {
        let mut seen = vec![false; window.n()];
        let mut out = Vec::new();
        for (anchor, mut members) in blocks {
            members.sort_unstable();
            members.dedup();
            if !members.contains(&anchor) {
                return Err(PartitionError::BadBlock(format!(
                    "anchor {anchor} is not a member of its block"
                )));
            }
            for &m in &members {
                if m >= window.n() {
                    return Err(PartitionError::BadBlock(format!(
                        "member {m} out of range"
                    )));
                }
                if seen[m] {
                    return Err(PartitionError::BadBlock(format!(
                        "point {m} appears in two blocks"
                    )));
                }
                seen[m] = true;
            }
            out.push(PartitionBlock { anchor, members });
        }
        if let Some(p) = seen.iter().position(|covered| !covered) {
            return Err(PartitionError::NotCovering { uncovered: p });
        }
        Ok(BoundedPartition {
            radius,
            blocks: out,
        })
    }

    pub fn block_of(&self, p: PointId) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.members.binary_search(&p).is_ok())
    }
}

/// Turn a verified ball cover into a partition with the sandwich property:
/// each block contains its anchor's `r`-ball and sits inside the `3r`-ball.
///
/// The construction keeps a *residual* set of center indices.  At each step
/// the smallest residual center `k` is taken; the next residual set keeps
/// only centers whose balls are disjoint from `k`'s ball; and the block of
/// `k` is everything the current residual balls cover that the next ones do
/// not.  Each step retires at least center `k` itself, so the recursion
/// terminates after at most one step per center.
pub fn cover_to_partition(
    window: &Window,
    cover: &BallCover,
) -> Result<BoundedPartition, PartitionError> {
    verify_ball_cover(window, cover)?;
    let r = cover.radius;
    let balls: Vec<BTreeSet<PointId>> = cover
        .centers
        .iter()
        .map(|&c| {
            (0..window.n())
                .filter(|&p| window.dist(c, p) <= r)
                .collect()
        })
        .collect();
    let union_of = |idxs: &BTreeSet<usize>| -> BTreeSet<PointId> {
        idxs.iter().flat_map(|&i| balls[i].iter().copied()).collect()
    };
    let mut residual: BTreeSet<usize> = (0..cover.centers.len()).collect();
    let mut blocks = Vec::new();
    let mut step = 0usize;
    while let Some(&k) = residual.iter().next() {
        step += 1;
        if step > cover.centers.len() {
            return Err(PartitionError::InductionStalled { step });
        }
        let next: BTreeSet<usize> = residual
            .iter()
            .copied()
            .filter(|&m| balls[m].is_disjoint(&balls[k]))
            .collect();
        let current_union = union_of(&residual);
        let next_union = union_of(&next);
        let members: Vec<PointId> = current_union.difference(&next_union).copied().collect();
        if members.is_empty() {
            return Err(PartitionError::InductionStalled { step });
        }
        blocks.push(PartitionBlock {
            anchor: cover.centers[k],
            members,
        });
        residual = next;
    }
    let partition = BoundedPartition { radius: r, blocks };
    debug_assert!(verify_partition(window, &partition).sandwich_holds);
    Ok(partition)
}

/// Exact audit of a partition: disjointness, coverage, block diameters,
/// and the sandwich bounds relative to each block's anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionAudit {
    pub disjoint_and_covering: bool,
    /// Largest distance between two members of one block.
    pub max_diameter: Dist,
    /// Every block contains its anchor's `r`-ball (within the window).
    pub lower_sandwich_holds: bool,
    /// Every block sits inside its anchor's `3r`-ball.
    pub upper_sandwich_holds: bool,
    pub sandwich_holds: bool,
}

pub fn verify_partition(window: &Window, partition: &BoundedPartition) -> PartitionAudit {
    let n = window.n();
    let r = partition.radius;
    let mut counts = vec![0usize; n];
    let mut max_diameter = Dist::ZERO;
    let mut lower = true;
    let mut upper = true;
    for block in &partition.blocks {
        for &m in &block.members {
            counts[m] += 1;
            if window.dist(block.anchor, m) > Dist::integer(3) * r {
                upper = false;
            }
            for &m2 in &block.members {
                max_diameter = max_diameter.max(window.dist(m, m2));
            }
        }
        for p in 0..n {
            if window.dist(block.anchor, p) <= r && block.members.binary_search(&p).is_err() {
                lower = false;
            }
        }
    }
    let disjoint_and_covering = counts.iter().all(|&c| c == 1);
    PartitionAudit {
        disjoint_and_covering,
        max_diameter,
        lower_sandwich_holds: lower,
        upper_sandwich_holds: upper,
        sandwich_holds: disjoint_and_covering && lower && upper,
    }
}

/// Full certificate for a partition into uniformly bounded sets: the exact
/// window audit plus, per block, whether the ambient set the block stands
/// in for is infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiubsCertificate {
    pub audit: PartitionAudit,
    /// Ambient cardinality of each anchor's `r`-ball.  A block contains
    /// its anchor ball, so an infinite verdict means the ambient block is
    /// infinite; window counts alone could never show this.
    pub anchor_ball_verdicts: Vec<BallCardinality>,
    pub all_blocks_infinite: bool,
    pub ok: bool,
}

/// Check the three defining properties of a bounded partition: exact
/// disjoint cover, ball sandwich per block, and ambient infiniteness of
/// every block (through the cardinality oracle).
pub fn verify_piubs(
    window: &Window,
    partition: &BoundedPartition,
) -> Result<PiubsCertificate, PartitionError> {
    let audit = verify_partition(window, partition);
    let mut anchor_ball_verdicts = Vec::with_capacity(partition.blocks.len());
    for block in &partition.blocks {
        anchor_ball_verdicts.push(ball_cardinality(
            window.spec(),
            window.label(block.anchor),
            partition.radius,
        )?);
    }
    let all_blocks_infinite = anchor_ball_verdicts
        .iter()
        .all(|v| *v == BallCardinality::Infinite);
    let ok = audit.sandwich_holds && all_blocks_infinite;
    Ok(PiubsCertificate {
        audit,
        anchor_ball_verdicts,
        all_blocks_infinite,
        ok,
    })
}

/// One Følner-style measurement: the exact two-sided boundary size of a
/// finite set in the *ambient* space, against the set's size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FolnerSample {
    pub set_size: u64,
    pub boundary_size: u64,
}

impl FolnerSample {
    pub fn ratio_f64(&self) -> f64 {
        self.boundary_size as f64 / self.set_size as f64
    }

    /// Exact comparison `boundary/size ≤ threshold`.
    pub fn ratio_at_most(&self, threshold: Dist) -> bool {
        // boundary ≤ threshold · size, in exact arithmetic.
        Dist::integer(self.boundary_size as i64)
            <= threshold * Dist::integer(self.set_size as i64)
    }

    pub fn exact_ratio(&self) -> Dist {
        Dist::new(self.boundary_size as i64, self.set_size as i64)
    }
}

/// Exact ambient boundary ratio of a finite label set.
///
/// The boundary is two-sided and closed: ambient points within `r` of the
/// set *and* within `r` of its complement.  Needs every ambient `r`-ball it
/// touches to be finite; spaces with infinite balls (the fibered line at
/// `r ≥ 1`, bounded-infinite spaces at `r ≥` diameter) are refused rather
/// than silently clipped.
pub fn folner_sample(
    spec: &SpaceSpec,
    set: &[Label],
    r: Dist,
) -> Result<FolnerSample, PartitionError> {
    if set.is_empty() {
        return Err(PartitionError::BadParams("empty set".into()));
    }
    if r < Dist::ZERO {
        return Err(PartitionError::BadParams("radius must be >= 0".into()));
    }
    let members: BTreeSet<Label> = set.iter().cloned().collect();
    // Candidates: anything within r of the set.
    let mut candidates: BTreeSet<Label> = BTreeSet::new();
    for y in &members {
        match enumerate_ball(spec, y, r)? {
            Some(ball) => candidates.extend(ball),
            None => {
                return Err(PartitionError::BadParams(format!(
                    "the ball of radius {r} around {y} is infinite; \
                     boundary ratios are not finite here"
                )))
            }
        }
    }
    let mut boundary_size = 0u64;
    for x in &candidates {
        // d(x, set) ≤ r holds by construction; test the complement side.
        let ball = enumerate_ball(spec, x, r)?
            .expect("candidate balls are finite: they were enumerated above");
        if ball.iter().any(|z| !members.contains(z)) {
            boundary_size += 1;
        }
    }
    Ok(FolnerSample {
        set_size: members.len() as u64,
        boundary_size,
    })
}

/// The families of candidate Følner sets the search walks through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FolnerFamily {
    /// Boxes `{-L..L}^dim`, `L = 1, 2, …` — for line and lattice spaces.
    Boxes,
    /// Unions of consecutive whole blocks — for the exponential block space.
    BlockIntervals,
    /// Balls of growing radius around the anchor — generic fallback.
    Balls,
}

impl FolnerFamily {
    pub fn natural_for(spec: &SpaceSpec) -> FolnerFamily {
        match spec {
            SpaceSpec::IntegerLine | SpaceSpec::IntegerLattice { .. } => FolnerFamily::Boxes,
            SpaceSpec::ExponentialBlocks => FolnerFamily::BlockIntervals,
            _ => FolnerFamily::Balls,
        }
    }
}

/// One candidate measured by [`folner_search`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FolnerCandidate {
    /// Family parameter: box half-width, interval as (lo, hi), or ball radius.
    pub parameter: (i64, i64),
    pub sample: FolnerSample,
}

/// Outcome of a search for a small-boundary set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FolnerSearch {
    pub family: FolnerFamily,
    pub radius: Dist,
    pub threshold: Dist,
    /// First candidate meeting the threshold, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub found: Option<FolnerCandidate>,
    /// The smallest ratio seen across the whole family budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best: Option<FolnerCandidate>,
    pub tried: usize,
}

/// Walk a canonical family of candidate sets and measure each one exactly.
///
/// For boxes and balls the family parameter runs `1..=budget` and the
/// search stops early at the first success.  For block intervals every
/// interval `[lo, hi] ⊆ [-budget, budget]` is measured, so a negative
/// result means *no* union of consecutive blocks in that range works.
pub fn folner_search(
    spec: &SpaceSpec,
    family: FolnerFamily,
    r: Dist,
    threshold: Dist,
    budget: i64,
) -> Result<FolnerSearch, PartitionError> {
    if budget < 1 {
        return Err(PartitionError::BadParams("budget must be >= 1".into()));
    }
    let mut found = None;
    let mut best: Option<FolnerCandidate> = None;
    let mut tried = 0usize;
    let mut consider = |parameter: (i64, i64), set: Vec<Label>| -> Result<bool, PartitionError> {
        let sample = folner_sample(spec, &set, r)?;
        tried += 1;
        let candidate = FolnerCandidate { parameter, sample };
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.sample.exact_ratio() < b.sample.exact_ratio()
            }
        };
        if better {
            best = Some(candidate.clone());
        }
        if found.is_none() && candidate.sample.ratio_at_most(threshold) {
            found = Some(candidate);
            return Ok(true);
        }
        Ok(false)
    };
    match family {
        FolnerFamily::Boxes => {
            let dim = match spec {
                SpaceSpec::IntegerLine => 1,
                SpaceSpec::IntegerLattice { dim } => *dim,
                _ => {
                    return Err(PartitionError::BadParams(
                        "box family applies to line and lattice spaces".into(),
                    ))
                }
            };
            for l in 1..=budget {
                let set = box_labels(dim, l);
                if consider((l, l), set)? {
                    break;
                }
            }
        }
        FolnerFamily::BlockIntervals => {
            if !matches!(spec, SpaceSpec::ExponentialBlocks) {
                return Err(PartitionError::BadParams(
                    "block intervals apply to the exponential block space".into(),
                ));
            }
            'outer: for lo in -budget..=budget {
                for hi in lo..=budget {
                    let mut set = Vec::new();
                    for k in lo..=hi {
                        set.extend(
                            crate::space::block_members(k).into_iter().map(Label::Int),
                        );
                    }
                    if consider((lo, hi), set)? {
                        break 'outer;
                    }
                }
            }
        }
        FolnerFamily::Balls => {
            let anchor = spec.anchor();
            for l in 1..=budget {
                match enumerate_ball(spec, &anchor, Dist::integer(l))? {
                    None => {
                        return Err(PartitionError::BadParams(format!(
                            "anchor ball of radius {l} is infinite"
                        )))
                    }
                    Some(set) => {
                        if consider((l, l), set)? {
                            break;
                        }
                    }
                }
            }
        }
    }
    Ok(FolnerSearch {
        family,
        radius: r,
        threshold,
        found,
        best,
        tried,
    })
}

fn box_labels(dim: u32, l: i64) -> Vec<Label> {
    if dim == 1 {
        return (-l..=l).map(Label::Int).collect();
    }
    let mut out = Vec::new();
    let mut current = vec![0i64; dim as usize];
    fn rec(l: i64, coord: usize, current: &mut Vec<i64>, out: &mut Vec<Label>) {
        if coord == current.len() {
            out.push(Label::Tuple(current.clone()));
            return;
        }
        for x in -l..=l {
            current[coord] = x;
            rec(l, coord + 1, current, out);
        }
    }
    rec(l, 0, &mut current, &mut out);
    out
}

/// Evidence that the exponential block space duplicates itself: the halving
/// map sends the even and the odd points *each* bijectively onto the whole
/// space, moving every point by at most 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParadoxicalReport {
    /// Largest observed `d(x, β(x))`.
    pub max_displacement: Dist,
    /// Window points whose both halves (`2y` and `2y+1`) lie in the window.
    pub decidable_points: usize,
    /// Decidable points receiving exactly one even and one odd preimage.
    pub doubled_points: usize,
    /// The halving map restricted to evens and to odds is injective.
    pub injective: bool,
    /// Evens and odds partition the window.
    pub partitioned: bool,
    /// Everything above held and at least one point was decidable.
    pub holds: bool,
}

/// Check the paradoxical self-duplication on a window of the exponential
/// block space: `β(n) = ⌊n/2⌋` restricted to evens and to odds.
pub fn paradoxical_check(window: &Window) -> Result<ParadoxicalReport, PartitionError> {
    if !matches!(window.spec(), SpaceSpec::ExponentialBlocks) {
        return Err(PartitionError::BadParams(
            "the duplication argument is specific to the exponential block space".into(),
        ));
    }
    let values: Vec<i64> = window
        .points()
        .iter()
        .map(|l| match l {
            Label::Int(n) => *n,
            _ => unreachable!("exponential block labels are integers"),
        })
        .collect();
    let present: BTreeSet<i64> = values.iter().copied().collect();
    let mut max_displacement = Dist::ZERO;
    let mut even_images: BTreeMap<i64, usize> = BTreeMap::new();
    let mut odd_images: BTreeMap<i64, usize> = BTreeMap::new();
    let mut evens = 0usize;
    let mut odds = 0usize;
    for &n in &values {
        let image = n.div_euclid(2);
        let d = window
            .spec()
            .distance(&Label::Int(n), &Label::Int(image))?;
        max_displacement = max_displacement.max(d);
        if n.rem_euclid(2) == 0 {
            evens += 1;
            *even_images.entry(image).or_insert(0) += 1;
        } else {
            odds += 1;
            *odd_images.entry(image).or_insert(0) += 1;
        }
    }
    let injective = even_images.values().all(|&c| c == 1)
        && odd_images.values().all(|&c| c == 1);
    let partitioned = evens + odds == window.n();
    let mut decidable_points = 0usize;
    let mut doubled_points = 0usize;
    for &y in &present {
        let both_in = match (y.checked_mul(2), y.checked_mul(2).and_then(|e| e.checked_add(1))) {
            (Some(e), Some(o)) => present.contains(&e) && present.contains(&o),
            _ => false,
        };
        if both_in {
            decidable_points += 1;
            let hits = even_images.get(&y).copied().unwrap_or(0)
                + odd_images.get(&y).copied().unwrap_or(0);
            if hits == 2 {
                doubled_points += 1;
            }
        }
    }
    let holds = injective
        && partitioned
        && decidable_points > 0
        && doubled_points == decidable_points
        && max_displacement <= Dist::integer(2);
    Ok(ParadoxicalReport {
        max_displacement,
        decidable_points,
        doubled_points,
        injective,
        partitioned,
        holds,
    })
}

/// Sizes of the ambient balls around a set of labels — a helper for
/// reporting how uniform a cover's ball masses are.
pub fn ball_profile(
    spec: &SpaceSpec,
    centers: &[Label],
    r: Dist,
) -> Result<Vec<BallCardinality>, PartitionError> {
    centers
        .iter()
        .map(|c| ball_cardinality(spec, c, r).map_err(PartitionError::from))
        .collect()
}

/// Block index of an integer point of the exponential block space — pure
/// re-export for callers that shape sets by blocks.
pub fn exponential_block_of(n: i64) -> i64 {
    block_index(n)
}
