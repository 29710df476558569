//! Acceptance gate: thirteen scripted end-to-end checks, one per headline
//! guarantee of the workbench.  Each test prints exactly one
//! `criterion NN (...): pass|fail` line (visible with `--nocapture`; the test
//! name carries the same verdict in the default listing), pins its numeric
//! tolerances as constants, and enforces a wall-clock budget.  The final
//! check replays the other twelve and demands byte-identical canonical
//! reports, so every quantity asserted here is reproducible bit for bit.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use roe_core::homotopy::whirl::whirl_pair;
use roe_core::homotopy::{contract, CertificateVerdict, ContractParams, VertexFamily};
use roe_core::obstruction::{
    assemble_from_copies, block_compose, corner_index, det_winding, shift_from_bijection,
    split_into_copies,
};
use roe_core::operator::{
    random_band, sparse_corner_split, unitary_retraction, OperatorError, SparseOperator,
};
use roe_core::partition::{
    cover_to_partition, find_ciubb, folner_search, paradoxical_check, verify_piubs,
    BoundedPartition, FolnerFamily, PartitionError,
};
use roe_core::report::canonical_json;
use roe_core::space::{is_r_sparse, validate_metric, Label, PointId, SpaceSpec, Window, WindowExtent};
use roe_core::{Dist, Tolerances};

// ---------------------------------------------------------------------------
// Pinned tolerances and budgets.
// ---------------------------------------------------------------------------

/// Unitarity defect allowed at the retraction endpoint `t = 1`.
const RETRACTION_UNITARY_TOL: f64 = 1e-8;
/// A sampled path point below this `sigma_min` counts as singular.
const PATH_INVERTIBILITY_FLOOR: f64 = 1e-8;
/// Screening margin for the random invertible operators fed to the retraction.
const RETRACTION_SCREEN_SIGMA: f64 = 0.05;
/// One-point whirl endpoints must match their algebraic targets this closely.
const WHIRL_ENDPOINT_TOL: f64 = 1e-10;
/// Two-layer whirl endpoints inside the contraction pipeline.
const PIPELINE_WHIRL_TOL: f64 = 1e-8;
/// Allowed distance of the pipeline endpoint from the identity, measured on
/// the declared interior sub-window.
const PIPELINE_INTERIOR_TOL: f64 = 1e-6;

const METRIC_BUDGET: Duration = Duration::from_secs(10);
const SUBADDITIVITY_BUDGET: Duration = Duration::from_secs(30);
const CORNER_BUDGET: Duration = Duration::from_secs(10);
const RETRACTION_BUDGET: Duration = Duration::from_secs(60);
const PARTITION_BUDGET: Duration = Duration::from_secs(10);
const PIPELINE_BUDGET: Duration = Duration::from_secs(300);
const WHIRL_BUDGET: Duration = Duration::from_secs(5);
const INDEX_BUDGET: Duration = Duration::from_secs(30);
const FOLNER_BUDGET: Duration = Duration::from_secs(60);
const PARADOX_BUDGET: Duration = Duration::from_secs(5);
const WINDING_BUDGET: Duration = Duration::from_secs(5);
const AMPLIFICATION_BUDGET: Duration = Duration::from_secs(10);

// ---------------------------------------------------------------------------
// Harness.
// ---------------------------------------------------------------------------

fn run(number: usize, name: &str, budget: Duration, criterion: fn() -> (Vec<String>, Value)) {
    let t0 = Instant::now();
    let (mut failures, _witness) = criterion();
    let elapsed = t0.elapsed();
    if elapsed > budget {
        failures.push(format!(
            "runtime {:.2}s exceeded the {:.0}s budget",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ));
    }
    let status = if failures.is_empty() { "pass" } else { "fail" };
    println!(
        "criterion {number:>2} ({name}): {status}  [{:.2}s]",
        elapsed.as_secs_f64()
    );
    assert!(
        failures.is_empty(),
        "criterion {number} ({name}) failed:\n  {}",
        failures.join("\n  ")
    );
}

fn realize(spec: &SpaceSpec, extent: &WindowExtent) -> Arc<Window> {
    Arc::new(Window::realize(spec, extent).unwrap())
}

fn half(h: i64) -> WindowExtent {
    WindowExtent {
        half_width: Some(h),
        ..Default::default()
    }
}

fn half_levels(h: i64, l: i64) -> WindowExtent {
    WindowExtent {
        half_width: Some(h),
        levels: Some(l),
        ..Default::default()
    }
}

fn blocks(b: i64) -> WindowExtent {
    WindowExtent {
        blocks: Some(b),
        ..Default::default()
    }
}

fn count(c: i64) -> WindowExtent {
    WindowExtent {
        count: Some(c),
        ..Default::default()
    }
}

fn half_tail(h: i64, t: i64) -> WindowExtent {
    WindowExtent {
        half_width: Some(h),
        tail_count: Some(t),
        ..Default::default()
    }
}

fn line_window(h: i64) -> Arc<Window> {
    realize(&SpaceSpec::IntegerLine, &half(h))
}

fn fibered(h: i64, l: i64) -> Arc<Window> {
    realize(&SpaceSpec::FiberedLine, &half_levels(h, l))
}

/// `0..n` with `d(i, j) = |i − j|` given as an explicit matrix.
fn path_metric(n: usize) -> SpaceSpec {
    let dist = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Dist::integer((i as i64 - j as i64).abs()))
                .collect()
        })
        .collect();
    SpaceSpec::ExplicitFinite { dist }
}

/// Entries as bit patterns, for exact (not approximate) operator comparison.
fn support_map(op: &SparseOperator) -> BTreeMap<(PointId, PointId), (u64, u64)> {
    op.support()
        .map(|(&(r, c), v)| ((r, c), (v.re.to_bits(), v.im.to_bits())))
        .collect()
}

// ---------------------------------------------------------------------------
// Criterion 1: every built-in space realises to genuine metric windows.
// ---------------------------------------------------------------------------

fn metric_axioms() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let suites: Vec<(SpaceSpec, Vec<WindowExtent>)> = vec![
        (SpaceSpec::IntegerLine, (1..=5).map(half).collect()),
        (
            SpaceSpec::IntegerLattice { dim: 2 },
            (1..=5).map(half).collect(),
        ),
        (SpaceSpec::ExponentialBlocks, (1..=5).map(blocks).collect()),
        (
            SpaceSpec::FiberedLine,
            (1..=5).map(|k| half_levels(k, k)).collect(),
        ),
        (
            SpaceSpec::BoundedInfinite {
                diameter: Dist::new(3, 2),
            },
            [2, 4, 8, 16, 32].into_iter().map(count).collect(),
        ),
        (
            SpaceSpec::DisjointPower {
                base: Box::new(SpaceSpec::IntegerLine),
                copies: 3,
            },
            (1..=5).map(half).collect(),
        ),
        (
            SpaceSpec::SparseAugmented {
                base: Box::new(SpaceSpec::IntegerLine),
                spacing: 10,
            },
            (1..=5).map(|h| half_tail(h, 3)).collect(),
        ),
        (path_metric(6), (2..=6).map(count).collect()),
    ];
    for (spec, extents) in suites {
        for extent in extents {
            let w = realize(&spec, &extent);
            let report = validate_metric(&w);
            if !report.is_metric() {
                failures.push(format!(
                    "{} window of {} points violates the metric axioms ({} violations)",
                    spec.kind_name(),
                    w.n(),
                    report.violations.len()
                ));
            }
            rows.push(json!({
                "space": spec.kind_name(),
                "points": w.n(),
                "metric": report.is_metric(),
            }));
        }
    }
    (failures, json!({ "windows": rows }))
}

#[test]
fn criterion_01_metric_axioms_hold_on_every_builtin_space() {
    run(1, "metric axioms", METRIC_BUDGET, metric_axioms);
}

// ---------------------------------------------------------------------------
// Criterion 2: propagation is subadditive under composition, exactly.
// ---------------------------------------------------------------------------

fn propagation_subadditivity() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let int_radii = vec![Dist::integer(1), Dist::integer(2), Dist::integer(3)];
    let suites: Vec<(SpaceSpec, WindowExtent, Vec<Dist>)> = vec![
        (SpaceSpec::IntegerLine, half(12), int_radii.clone()),
        (SpaceSpec::IntegerLattice { dim: 2 }, half(3), int_radii.clone()),
        (SpaceSpec::ExponentialBlocks, blocks(3), int_radii.clone()),
        (SpaceSpec::FiberedLine, half_levels(4, 6), int_radii.clone()),
        (
            SpaceSpec::BoundedInfinite {
                diameter: Dist::new(3, 2),
            },
            count(16),
            vec![Dist::new(3, 2), Dist::integer(1)],
        ),
        (
            SpaceSpec::DisjointPower {
                base: Box::new(SpaceSpec::IntegerLine),
                copies: 3,
            },
            half(6),
            int_radii.clone(),
        ),
        (
            SpaceSpec::SparseAugmented {
                base: Box::new(SpaceSpec::IntegerLine),
                spacing: 10,
            },
            half_tail(8, 4),
            vec![
                Dist::integer(1),
                Dist::integer(2),
                Dist::integer(3),
                Dist::integer(4),
            ],
        ),
        (path_metric(25), WindowExtent::default(), int_radii.clone()),
    ];
    for (spec_idx, (spec, extent, radii)) in suites.into_iter().enumerate() {
        let w = realize(&spec, &extent);
        let base_seed = 2_000 + 1_000 * spec_idx as u64;
        let mut violations = 0usize;
        for i in 0..200u64 {
            let rf = radii[(i as usize) % radii.len()];
            let rg = radii[(i as usize + 1) % radii.len()];
            let f = random_band(Arc::clone(&w), rf, base_seed + 2 * i);
            let g = random_band(Arc::clone(&w), rg, base_seed + 2 * i + 1);
            let fg = f.compose(&g).unwrap();
            if fg.propagation() > f.propagation() + g.propagation() {
                violations += 1;
                failures.push(format!(
                    "{} pair {i}: P(FG) = {} exceeds P(F)+P(G) = {}",
                    spec.kind_name(),
                    fg.propagation(),
                    f.propagation() + g.propagation()
                ));
            }
        }
        rows.push(json!({
            "space": spec.kind_name(),
            "points": w.n(),
            "pairs": 200,
            "violations": violations,
        }));
    }
    (failures, json!({ "spaces": rows }))
}

#[test]
fn criterion_02_propagation_is_subadditive_under_composition() {
    run(
        2,
        "propagation subadditivity",
        SUBADDITIVITY_BUDGET,
        propagation_subadditivity,
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: corners over a sparse set are exactly diagonal.
// ---------------------------------------------------------------------------

fn sparse_corner_diagonal() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let spec = SpaceSpec::SparseAugmented {
        base: Box::new(SpaceSpec::IntegerLine),
        spacing: 10,
    };
    let w = realize(&spec, &half_tail(15, 5));
    let tails: Vec<PointId> = (0..5).map(|t| w.id(&Label::Tail(t)).unwrap()).collect();
    let sparse_r = Dist::integer(5);
    if !is_r_sparse(&w, &tails, sparse_r).sparse {
        failures.push("the tail set is not 5-sparse".into());
    }
    let in_tails = |p: PointId| tails.contains(&p);
    let mut cross_entries = 0usize;
    for i in 0..50u64 {
        let op = random_band(Arc::clone(&w), Dist::integer(4), 3_000 + i);
        if op.propagation() > Dist::integer(4) {
            failures.push(format!("operator {i} exceeds the declared band radius"));
        }
        for (&(r, c), _) in op.support() {
            if in_tails(r) != in_tails(c) {
                cross_entries += 1;
                failures.push(format!(
                    "operator {i} couples the tail to the base at ({r}, {c})"
                ));
            }
        }
        match sparse_corner_split(&op, &tails, sparse_r) {
            Ok(split) => {
                if split.corner_diagonal.len() != tails.len() {
                    failures.push(format!(
                        "operator {i}: corner has {} diagonal slots, expected {}",
                        split.corner_diagonal.len(),
                        tails.len()
                    ));
                }
                for &(p, v) in &split.corner_diagonal {
                    let direct = op.entry(p, p);
                    if v != direct {
                        failures.push(format!(
                            "operator {i}: corner diagonal at {p} is {v}, operator has {direct}"
                        ));
                    }
                }
                let mut rebuilt = split.off_corner.clone();
                for &(p, v) in &split.corner_diagonal {
                    rebuilt.set(p, p, v).unwrap();
                }
                if support_map(&rebuilt) != support_map(&op) {
                    failures.push(format!(
                        "operator {i}: corner + off-corner does not reassemble exactly"
                    ));
                }
            }
            Err(e) => failures.push(format!("operator {i}: corner split failed: {e}")),
        }
    }
    // Negative control: an entry joining two tail points breaks the band
    // hypothesis and must be reported, not zeroed.
    let mut planted = SparseOperator::identity(Arc::clone(&w));
    planted
        .set(tails[1], tails[0], Complex64::new(1.0, 0.0))
        .unwrap();
    let planted_verdict = match sparse_corner_split(&planted, &tails, sparse_r) {
        Err(OperatorError::LemmaViolated { row, col }) => {
            if (row, col) != (tails[1], tails[0]) {
                failures.push(format!(
                    "planted violation reported at ({row}, {col}) instead of ({}, {})",
                    tails[1], tails[0]
                ));
            }
            format!("lemma violated at ({row}, {col})")
        }
        Ok(_) => {
            failures.push("planted off-diagonal corner entry was not rejected".into());
            "accepted".into()
        }
        Err(e) => {
            failures.push(format!("planted violation raised the wrong error: {e}"));
            format!("{e}")
        }
    };
    let witness = json!({
        "points": w.n(),
        "tail_points": tails.len(),
        "operators": 50,
        "cross_entries": cross_entries,
        "planted": planted_verdict,
    });
    (failures, witness)
}

#[test]
fn criterion_03_sparse_set_corners_are_exactly_diagonal() {
    run(3, "sparse-corner diagonality", CORNER_BUDGET, sparse_corner_diagonal);
}

// ---------------------------------------------------------------------------
// Criterion 4: the straight-line retraction onto unitaries stays invertible.
// ---------------------------------------------------------------------------

fn unitary_retraction_paths() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let w = line_window(10);
    let tol = Tolerances::default();
    let mut min_path_sigma = f64::INFINITY;
    let mut max_endpoint_defect = 0.0f64;
    let mut accepted = 0usize;
    for k in 0..50u64 {
        let mut op = None;
        for attempt in 0..64u64 {
            let cand = random_band(Arc::clone(&w), Dist::integer(2), 4_000 + 101 * k + attempt);
            if cand.sigma_min(&tol, 1) > RETRACTION_SCREEN_SIGMA {
                op = Some(cand);
                break;
            }
        }
        let Some(op) = op else {
            failures.push(format!("no invertible band found for slot {k}"));
            continue;
        };
        accepted += 1;
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            match unitary_retraction(&op, t, &tol) {
                Ok(path) => {
                    let sigma = path.sigma_min(&tol, 2);
                    min_path_sigma = min_path_sigma.min(sigma);
                    if sigma <= PATH_INVERTIBILITY_FLOOR {
                        failures.push(format!(
                            "slot {k}: path point t={t:.1} is numerically singular (sigma {sigma:.3e})"
                        ));
                    }
                    if j == 10 {
                        match path.unitarity_defect(&tol, 3) {
                            Ok(defect) => {
                                max_endpoint_defect = max_endpoint_defect.max(defect);
                                if defect > RETRACTION_UNITARY_TOL {
                                    failures.push(format!(
                                        "slot {k}: endpoint unitarity defect {defect:.3e}"
                                    ));
                                }
                            }
                            Err(e) => failures.push(format!("slot {k}: defect check failed: {e}")),
                        }
                    }
                }
                Err(e) => failures.push(format!("slot {k}: retraction failed at t={t:.1}: {e}")),
            }
        }
    }
    let witness = json!({
        "operators": accepted,
        "samples_per_path": 11,
        "min_path_sigma": min_path_sigma,
        "max_endpoint_defect": max_endpoint_defect,
    });
    (failures, witness)
}

#[test]
fn criterion_04_retraction_onto_unitaries_stays_invertible() {
    run(4, "unitary retraction", RETRACTION_BUDGET, unitary_retraction_paths);
}

// ---------------------------------------------------------------------------
// Criterion 5: infinite ball covers refine to sandwiched partitions; spaces
// with finite balls are refused with a witness.
// ---------------------------------------------------------------------------

fn ball_cover_to_partition() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    let r = Dist::integer(1);
    for (h, l) in [(3i64, 4i64), (4, 5), (6, 13)] {
        let w = fibered(h, l);
        let ciubb = match find_ciubb(&w, r) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("fibered window ({h},{l}): cover construction failed: {e}"));
                continue;
            }
        };
        if ciubb.verdicts.iter().any(|v| v.is_finite()) {
            failures.push(format!("fibered window ({h},{l}): a chosen ball is ambiently finite"));
        }
        let partition = match cover_to_partition(&w, &ciubb.cover) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("fibered window ({h},{l}): refinement failed: {e}"));
                continue;
            }
        };
        match verify_piubs(&w, &partition) {
            Ok(cert) => {
                if !cert.audit.disjoint_and_covering {
                    failures.push(format!("fibered window ({h},{l}): blocks do not partition"));
                }
                if !cert.audit.sandwich_holds {
                    failures.push(format!(
                        "fibered window ({h},{l}): a block escapes its anchor's ball sandwich"
                    ));
                }
                if !cert.all_blocks_infinite {
                    failures.push(format!("fibered window ({h},{l}): a block is ambiently finite"));
                }
                if !cert.ok {
                    failures.push(format!("fibered window ({h},{l}): certificate not ok"));
                }
                rows.push(json!({
                    "points": w.n(),
                    "centers": ciubb.cover.centers.len(),
                    "blocks": partition.blocks.len(),
                    "ok": cert.ok,
                }));
            }
            Err(e) => failures.push(format!("fibered window ({h},{l}): verification failed: {e}")),
        }
    }
    let wb = realize(&SpaceSpec::ExponentialBlocks, &blocks(4));
    let negative = match find_ciubb(&wb, r) {
        Err(PartitionError::NotCiubb {
            center,
            cardinality,
            ..
        }) => {
            json!({ "center": center, "ball_cardinality": cardinality })
        }
        Ok(_) => {
            failures.push("block space accepted as an infinite-ball cover".into());
            json!({ "accepted": true })
        }
        Err(e) => {
            failures.push(format!("block space failed with the wrong error: {e}"));
            json!({ "error": format!("{e}") })
        }
    };
    (failures, json!({ "fibered": rows, "blocks_refusal": negative }))
}

#[test]
fn criterion_05_infinite_ball_covers_refine_to_sandwiched_partitions() {
    run(5, "cover-to-partition sandwich", PARTITION_BUDGET, ball_cover_to_partition);
}

// ---------------------------------------------------------------------------
// Criterion 6: the full contraction pipeline on a fibered-line window.
// ---------------------------------------------------------------------------

fn fiber_blocks(w: &Arc<Window>, h: i64, levels: i64) -> BoundedPartition {
    let block_list = (-h..=h)
        .map(|b| {
            let anchor = w.id(&Label::Fiber { base: b, level: 0 }).unwrap();
            let members = (0..=levels)
                .map(|l| w.id(&Label::Fiber { base: b, level: l }).unwrap())
                .collect::<Vec<_>>();
            (anchor, members)
        })
        .collect();
    BoundedPartition::from_blocks(w, Dist::integer(1), block_list).unwrap()
}

/// The identity with a phased swap on levels 0 and 1 of one fiber.
fn swap_at(w: &Arc<Window>, base: i64) -> SparseOperator {
    let a = w.id(&Label::Fiber { base, level: 0 }).unwrap();
    let b = w.id(&Label::Fiber { base, level: 1 }).unwrap();
    let mut v = SparseOperator::identity(Arc::clone(w));
    v.set(a, a, Complex64::new(0.0, 0.0)).unwrap();
    v.set(b, b, Complex64::new(0.0, 0.0)).unwrap();
    v.set(b, a, Complex64::new(0.0, 1.0)).unwrap();
    v.set(a, b, Complex64::new(0.0, 1.0)).unwrap();
    v
}

fn contraction_pipeline() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let (h, levels) = (10i64, 13i64);
    let w = fibered(h, levels);
    if !(250..=350).contains(&w.n()) {
        failures.push(format!("window has {} points, wanted roughly 300", w.n()));
    }
    let partition = fiber_blocks(&w, h, levels);
    let family =
        VertexFamily::new(vec![swap_at(&w, -4), swap_at(&w, 0), swap_at(&w, 4)]).unwrap();
    if family.max_propagation() > Dist::integer(2) {
        failures.push(format!(
            "vertex propagation {} exceeds 2",
            family.max_propagation()
        ));
    }
    let params = ContractParams {
        sequence_length: 24,
        layer_count: 2,
        interior_margin: 5,
        grid_resolution: 4,
        t_samples: 11,
        ..ContractParams::default()
    };
    let tol = Tolerances::default();
    let outcome = match contract(&family, &partition, &params, &tol, 1) {
        Ok(o) => o,
        Err(e) => {
            failures.push(format!("pipeline failed outright: {e}"));
            return (failures, json!({ "error": format!("{e}") }));
        }
    };
    let cert = outcome.certificate;
    if cert.verdict != CertificateVerdict::BoundsMet {
        failures.push(format!("verdict {:?}; violations: {:?}", cert.verdict, cert.violations));
    }
    if cert.zero_out_perturbation >= cert.epsilon {
        failures.push(format!(
            "column zeroing moved mass {:.3e}, not below epsilon {:.3e}",
            cert.zero_out_perturbation, cert.epsilon
        ));
    }
    // Stage-by-stage observed propagations against the declared bounds for
    // radius 1 and vertex propagation at most 2.
    let stage_caps = [
        ("first_rotation", Dist::integer(6)),
        ("second_rotation", Dist::integer(2)),
        ("composite_rotation", Dist::integer(10)),
        ("layer_shifts", Dist::integer(4)),
    ];
    for (name, cap) in stage_caps {
        match cert.stages.iter().find(|s| s.name == name) {
            Some(stage) => {
                if stage.observed_propagation > cap {
                    failures.push(format!(
                        "stage {name}: observed propagation {} exceeds {cap}",
                        stage.observed_propagation
                    ));
                }
            }
            None => failures.push(format!("stage {name} missing from the certificate")),
        }
    }
    if cert.whirl_endpoint_defect > PIPELINE_WHIRL_TOL {
        failures.push(format!(
            "whirl endpoints off their targets by {:.3e}",
            cert.whirl_endpoint_defect
        ));
    }
    if cert.endpoint_interior_residual > PIPELINE_INTERIOR_TOL {
        failures.push(format!(
            "endpoint differs from the identity by {:.3e} on the interior",
            cert.endpoint_interior_residual
        ));
    }
    if cert.min_sigma <= 0.0 {
        failures.push(format!("sampled sigma_min dropped to {:.3e}", cert.min_sigma));
    }
    if cert.interior_size == 0 {
        failures.push("certificate covers an empty interior".into());
    }
    let witness = serde_json::to_value(&cert).unwrap();
    (failures, witness)
}

#[test]
fn criterion_06_contraction_pipeline_certifies_a_fibered_family() {
    run(6, "contraction pipeline", PIPELINE_BUDGET, contraction_pipeline);
}

// ---------------------------------------------------------------------------
// Criterion 7: whirl endpoints against the closed-form one-point answer.
// ---------------------------------------------------------------------------

fn whirl_endpoint_oracle() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let w = line_window(2);
    let p0 = w.id(&Label::Int(0)).unwrap();
    let p1 = w.id(&Label::Int(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7_000);
    let mut max_defect = 0.0f64;
    for trial in 0..20 {
        let modulus = rng.gen_range(0.5..=2.0);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let lambda = Complex64::from_polar(modulus, angle);
        let inv = Complex64::new(1.0, 0.0) / lambda;
        let mut g = SparseOperator::identity(Arc::clone(&w));
        g.set(p0, p0, lambda).unwrap();
        let mut g_inv = SparseOperator::identity(Arc::clone(&w));
        g_inv.set(p0, p0, inv).unwrap();
        let mut expected = SparseOperator::identity(Arc::clone(&w));
        expected.set(p0, p0, inv).unwrap();
        expected.set(p1, p1, lambda).unwrap();
        match whirl_pair(&g, &g_inv, &[p0], &[p1], 1.0) {
            Ok(end) => {
                let defect = end.frobenius_distance(&expected).unwrap();
                max_defect = max_defect.max(defect);
                if defect > WHIRL_ENDPOINT_TOL {
                    failures.push(format!(
                        "trial {trial}: endpoint off diag(1/λ, λ) by {defect:.3e} for |λ| = {modulus:.3}"
                    ));
                }
            }
            Err(e) => failures.push(format!("trial {trial}: whirl failed: {e}")),
        }
    }
    (failures, json!({ "trials": 20, "max_defect": max_defect }))
}

#[test]
fn criterion_07_whirl_endpoints_match_the_one_point_oracle() {
    run(7, "whirl endpoint oracle", WHIRL_BUDGET, whirl_endpoint_oracle);
}

// ---------------------------------------------------------------------------
// Criterion 8: the compressed shift carries a stable, nonzero index.
// ---------------------------------------------------------------------------

fn shift_step(w: &Arc<Window>, h: i64, k: i64) -> SparseOperator {
    let pairs: Vec<(Label, Label)> = (-h..=h - k)
        .map(|i| (Label::Int(i), Label::Int(i + k)))
        .collect();
    shift_from_bijection(Arc::clone(w), &pairs, Dist::integer(k)).unwrap()
}

fn shift_index_obstruction() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let tol = Tolerances::default();
    let mut indices: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    let mut rows = Vec::new();
    for h in [64i64, 128] {
        let w = line_window(h);
        let nonneg: Vec<PointId> = (0..=h).map(|i| w.id(&Label::Int(i)).unwrap()).collect();
        for k in [1i64, 2] {
            let op = shift_step(&w, h, k);
            match corner_index(&op, &nonneg, &tol) {
                Ok(report) => {
                    indices.insert((h, k), report.index);
                    rows.push(json!({
                        "half_width": h,
                        "step": k,
                        "index": report.index,
                        "genuine_kernel": report.genuine_kernel,
                        "genuine_cokernel": report.genuine_cokernel,
                        "spurious_kernel": report.spurious_kernel,
                        "spurious_cokernel": report.spurious_cokernel,
                        "smallest_kept_sigma": report.smallest_kept_sigma,
                    }));
                }
                Err(e) => failures.push(format!("shift {k} on half-width {h}: {e}")),
            }
        }
        if h == 128 {
            match corner_index(&SparseOperator::identity(Arc::clone(&w)), &nonneg, &tol) {
                Ok(report) => {
                    if report.index != 0 {
                        failures.push(format!("identity carries index {}", report.index));
                    }
                    rows.push(json!({
                        "half_width": h,
                        "step": 0,
                        "index": report.index,
                    }));
                }
                Err(e) => failures.push(format!("identity on half-width {h}: {e}")),
            }
        }
    }
    for k in [1i64, 2] {
        match (indices.get(&(64, k)), indices.get(&(128, k))) {
            (Some(a), Some(b)) => {
                if a != b {
                    failures.push(format!(
                        "shift {k}: index changed from {a} to {b} as the window grew"
                    ));
                }
                if b.unsigned_abs() != k as u64 {
                    failures.push(format!("shift {k}: |index| = {}, wanted {k}", b.abs()));
                }
            }
            _ => failures.push(format!("shift {k}: missing index measurements")),
        }
    }
    if let (Some(one), Some(two)) = (indices.get(&(128, 1)), indices.get(&(128, 2))) {
        if *two != 2 * one {
            failures.push(format!(
                "index is not additive in the step: shift 1 gives {one}, shift 2 gives {two}"
            ));
        }
    }
    (failures, json!({ "measurements": rows }))
}

#[test]
fn criterion_08_compressed_shifts_carry_a_stable_index() {
    run(8, "shift index obstruction", INDEX_BUDGET, shift_index_obstruction);
}

// ---------------------------------------------------------------------------
// Criterion 9: boundary ratios — exhaustively large on the block space,
// small boxes exist on the lattice.
// ---------------------------------------------------------------------------

fn folner_ratios() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let block_search = folner_search(
        &SpaceSpec::ExponentialBlocks,
        FolnerFamily::BlockIntervals,
        Dist::integer(2),
        Dist::new(1, 5),
        8,
    )
    .unwrap();
    // 17 choices of lower block, paired with each upper block above it.
    if block_search.tried != 153 {
        failures.push(format!(
            "block-interval search tried {} candidates, expected all 153",
            block_search.tried
        ));
    }
    if block_search.found.is_some() {
        failures.push("a block interval fell below the ratio threshold".into());
    }
    match &block_search.best {
        Some(best) => {
            if best.sample.exact_ratio() < Dist::new(1, 4) {
                failures.push(format!(
                    "interval {:?} has boundary ratio {} below 1/4",
                    best.parameter,
                    best.sample.exact_ratio()
                ));
            }
        }
        None => failures.push("block-interval search measured nothing".into()),
    }
    let box_search = folner_search(
        &SpaceSpec::IntegerLattice { dim: 2 },
        FolnerFamily::Boxes,
        Dist::integer(1),
        Dist::new(1, 5),
        32,
    )
    .unwrap();
    match &box_search.found {
        Some(found) => {
            if found.parameter.0 > 32 {
                failures.push(format!("box half-width {} beyond the budget", found.parameter.0));
            }
            if !(found.sample.exact_ratio() < Dist::new(1, 5)) {
                failures.push(format!(
                    "box ratio {} is not strictly below 1/5",
                    found.sample.exact_ratio()
                ));
            }
        }
        None => failures.push("no lattice box with ratio below 1/5 up to half-width 32".into()),
    }
    let witness = json!({
        "block_intervals": serde_json::to_value(&block_search).unwrap(),
        "lattice_boxes": serde_json::to_value(&box_search).unwrap(),
    });
    (failures, witness)
}

#[test]
fn criterion_09_boundary_ratios_separate_the_block_space_from_the_lattice() {
    run(9, "boundary ratios", FOLNER_BUDGET, folner_ratios);
}

// ---------------------------------------------------------------------------
// Criterion 10: the block space doubles itself by a displacement-2 map.
// ---------------------------------------------------------------------------

fn paradoxical_duplication() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let w = realize(&SpaceSpec::ExponentialBlocks, &blocks(6));
    let report = match paradoxical_check(&w) {
        Ok(r) => r,
        Err(e) => {
            failures.push(format!("duplication check failed: {e}"));
            return (failures, json!({ "error": format!("{e}") }));
        }
    };
    if !report.holds {
        failures.push("the duplication certificate does not hold".into());
    }
    if report.max_displacement > Dist::integer(2) {
        failures.push(format!(
            "a point moved {} , beyond displacement 2",
            report.max_displacement
        ));
    }
    if report.decidable_points == 0 {
        failures.push("no point of the window was decidable".into());
    }
    if report.doubled_points != report.decidable_points {
        failures.push(format!(
            "{} of {} decidable points received exactly two preimages",
            report.doubled_points, report.decidable_points
        ));
    }
    if !report.injective {
        failures.push("the halving map is not injective on either parity class".into());
    }
    if !report.partitioned {
        failures.push("the parity classes do not partition the window".into());
    }
    let witness = json!({
        "points": w.n(),
        "max_displacement": format!("{}", report.max_displacement),
        "decidable_points": report.decidable_points,
        "doubled_points": report.doubled_points,
        "injective": report.injective,
        "partitioned": report.partitioned,
        "holds": report.holds,
    });
    (failures, witness)
}

#[test]
fn criterion_10_the_block_space_duplicates_itself_boundedly() {
    run(10, "paradoxical duplication", PARADOX_BUDGET, paradoxical_duplication);
}

// ---------------------------------------------------------------------------
// Criterion 11: determinant winding is integral, orientation-odd, additive.
// ---------------------------------------------------------------------------

fn phase_loop(w: &Arc<Window>, ks: &[i64], steps: usize) -> Vec<SparseOperator> {
    (0..=steps)
        .map(|j| {
            let theta = j as f64 / steps as f64;
            let mut u = SparseOperator::identity(Arc::clone(w));
            for (slot, &k) in ks.iter().enumerate() {
                if k != 0 {
                    let phase =
                        Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 * theta);
                    u.set(slot, slot, phase).unwrap();
                }
            }
            u
        })
        .collect()
}

fn determinant_winding() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let w = line_window(6);
    let tol = Tolerances::default();
    let slots = w.n();
    let mut generator_ks = vec![0i64; slots];
    generator_ks[0] = 1;
    let generator = phase_loop(&w, &generator_ks, 48);
    match det_winding(&generator, &tol, 21) {
        Ok(report) => {
            if report.winding != 1 {
                failures.push(format!("generator loop winds {}", report.winding));
            }
        }
        Err(e) => failures.push(format!("generator loop: {e}")),
    }
    let mut reversed = generator.clone();
    reversed.reverse();
    match det_winding(&reversed, &tol, 22) {
        Ok(report) => {
            if report.winding != -1 {
                failures.push(format!("reversed generator winds {}", report.winding));
            }
        }
        Err(e) => failures.push(format!("reversed loop: {e}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11_000);
    let mut rows = Vec::new();
    for pair in 0..10 {
        let ks_a: Vec<i64> = (0..slots).map(|_| rng.gen_range(-1..=1)).collect();
        let ks_b: Vec<i64> = (0..slots).map(|_| rng.gen_range(-1..=1)).collect();
        let a = phase_loop(&w, &ks_a, 64);
        let b = phase_loop(&w, &ks_b, 64);
        let concat: Vec<SparseOperator> = a.iter().chain(b[1..].iter()).cloned().collect();
        let wa = match det_winding(&a, &tol, 23) {
            Ok(r) => r.winding,
            Err(e) => {
                failures.push(format!("pair {pair}, first loop: {e}"));
                continue;
            }
        };
        let wb = match det_winding(&b, &tol, 24) {
            Ok(r) => r.winding,
            Err(e) => {
                failures.push(format!("pair {pair}, second loop: {e}"));
                continue;
            }
        };
        let wc = match det_winding(&concat, &tol, 25) {
            Ok(r) => r.winding,
            Err(e) => {
                failures.push(format!("pair {pair}, concatenation: {e}"));
                continue;
            }
        };
        let expected_a: i64 = ks_a.iter().sum();
        if wa != expected_a {
            failures.push(format!(
                "pair {pair}: diagonal loop with phase sum {expected_a} wound {wa}"
            ));
        }
        if wc != wa + wb {
            failures.push(format!(
                "pair {pair}: concatenation wound {wc}, parts wound {wa} and {wb}"
            ));
        }
        rows.push(json!({ "first": wa, "second": wb, "concatenated": wc }));
    }
    (failures, json!({ "generator": 1, "reversed": -1, "pairs": rows }))
}

#[test]
fn criterion_11_determinant_winding_is_integral_and_additive() {
    run(11, "determinant winding", WINDING_BUDGET, determinant_winding);
}

// ---------------------------------------------------------------------------
// Criterion 12: the copy-block picture of operators multiplies bit-for-bit.
// ---------------------------------------------------------------------------

fn matrix_amplification() -> (Vec<String>, Value) {
    let mut failures = Vec::new();
    let spec = SpaceSpec::DisjointPower {
        base: Box::new(SpaceSpec::IntegerLine),
        copies: 3,
    };
    let w = realize(&spec, &half(5));
    let mut round_trips_exact = true;
    let mut products_exact = true;
    for i in 0..20u64 {
        let f = random_band(Arc::clone(&w), Dist::integer(2), 12_000 + 2 * i);
        let g = random_band(Arc::clone(&w), Dist::integer(2), 12_001 + 2 * i);
        let fs = split_into_copies(&f).unwrap();
        let gs = split_into_copies(&g).unwrap();
        let rebuilt = assemble_from_copies(Arc::clone(&w), &fs).unwrap();
        if support_map(&rebuilt) != support_map(&f) {
            round_trips_exact = false;
            failures.push(format!("pair {i}: split/assemble altered the operator"));
        }
        let blockwise = block_compose(&fs, &gs).unwrap();
        let assembled = assemble_from_copies(Arc::clone(&w), &blockwise).unwrap();
        let direct = f.compose(&g).unwrap();
        if support_map(&assembled) != support_map(&direct) {
            products_exact = false;
            failures.push(format!(
                "pair {i}: block product differs from the direct product"
            ));
        }
    }
    let witness = json!({
        "points": w.n(),
        "pairs": 20,
        "round_trips_exact": round_trips_exact,
        "products_exact": products_exact,
    });
    (failures, witness)
}

#[test]
fn criterion_12_copy_block_amplification_is_bit_exact() {
    run(12, "matrix amplification", AMPLIFICATION_BUDGET, matrix_amplification);
}

// ---------------------------------------------------------------------------
// Criterion 13: every criterion's report is byte-identical across two runs.
// ---------------------------------------------------------------------------

#[test]
fn criterion_13_reports_are_byte_identical_across_reruns() {
    let t0 = Instant::now();
    let criteria: Vec<(&str, fn() -> (Vec<String>, Value))> = vec![
        ("metric axioms", metric_axioms),
        ("propagation subadditivity", propagation_subadditivity),
        ("sparse-corner diagonality", sparse_corner_diagonal),
        ("unitary retraction", unitary_retraction_paths),
        ("cover-to-partition sandwich", ball_cover_to_partition),
        ("contraction pipeline", contraction_pipeline),
        ("whirl endpoint oracle", whirl_endpoint_oracle),
        ("shift index obstruction", shift_index_obstruction),
        ("boundary ratios", folner_ratios),
        ("paradoxical duplication", paradoxical_duplication),
        ("determinant winding", determinant_winding),
        ("matrix amplification", matrix_amplification),
    ];
    let mut failures = Vec::new();
    for (name, criterion) in criteria {
        let (failures_a, witness_a) = criterion();
        let (failures_b, witness_b) = criterion();
        let bytes_a = canonical_json(&witness_a).unwrap();
        let bytes_b = canonical_json(&witness_b).unwrap();
        if bytes_a != bytes_b || failures_a != failures_b {
            failures.push(format!("{name}: two runs with equal seeds produced different reports"));
        }
    }
    let status = if failures.is_empty() { "pass" } else { "fail" };
    println!(
        "criterion 13 (report determinism): {status}  [{:.2}s]",
        t0.elapsed().as_secs_f64()
    );
    assert!(
        failures.is_empty(),
        "criterion 13 (report determinism) failed:\n  {}",
        failures.join("\n  ")
    );
}
