//! The certified contraction pipeline and its sparse-set shortcut.
//!
//! [`contract`] chains the stages of the homotopy — straightening
//! rotations, collapse, diagonal normalization, and the whirl cancellation
//! — over every member of a vertex family, sampling each stage along its
//! time parameter.  The result is a [`ContractionCertificate`] recording,
//! per stage, the declared propagation bound next to the observed one,
//! the smallest sampled singular value, and the junction defect against
//! the previous stage, plus global endpoint measurements: how far the
//! final operator is from the identity on the designated interior and
//! where the unavoidable residue was parked.
//!
//! Nothing is asserted silently: a violated bound flips the certificate
//! verdict and is listed in `violations`, while structural impossibilities
//! (a window too small to host the selection, a block without enough
//! layer points) surface as errors before any homotopy is built.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::rotation::{
    collapse_cross, first_rotation, normalize_diagonal, polar_path, second_rotation,
};
use super::selection::{select_sequences, zero_out, SelectionLedger};
use super::whirl::{
    conjugate_between_layers, inverse_on_cover, layer_decomposition, shift_isometry, whirl_pair,
    LayerPlan,
};
use super::{epsilon_margin, HomotopyError, VertexFamily};
use crate::config::Tolerances;
use crate::operator::SparseOperator;
use crate::partition::BoundedPartition;
use crate::rational::Dist;
use crate::space::PointId;

/// Knobs of the contraction pipeline.  All tolerances are fixed here so a
/// certificate is comparable across runs.
#[derive(Debug, Clone, Serialize)]
pub struct ContractParams {
    /// Number of column/partner pairs to select.
    pub sequence_length: usize,
    /// Number of identity layers for the whirl stage; must be even.
    pub layer_count: usize,
    /// Index margin defining the designated interior.
    pub interior_margin: i64,
    /// Barycentric grid resolution for sampling the family.
    pub grid_resolution: usize,
    /// Time samples per stage before refinement.
    pub t_samples: usize,
    /// How often a rough stage may double its sampling.
    pub max_refinements: u32,
    /// Allowed operator distance at stage junctions.
    pub junction_tol: f64,
    /// Allowed defect in the whirl cancellations.
    pub whirl_endpoint_tol: f64,
    /// Allowed distance from the identity on the interior at the end.
    pub endpoint_tol: f64,
    /// Allowed unitarity defect of the rotation factors.
    pub unitary_tol: f64,
    /// Allowed residue when reading off straightened corners.
    pub corner_tol: f64,
}

impl Default for ContractParams {
    fn default() -> Self {
        ContractParams {
            sequence_length: 24,
            layer_count: 2,
            interior_margin: 4,
            grid_resolution: 8,
            t_samples: 11,
            max_refinements: 2,
            junction_tol: 1e-10,
            whirl_endpoint_tol: 1e-8,
            endpoint_tol: 1e-6,
            unitary_tol: 1e-10,
            corner_tol: 1e-8,
        }
    }
}

/// Measurements of one pipeline stage, aggregated over the family.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub name: String,
    /// Propagation bound the construction promises.
    pub declared_propagation: Dist,
    /// Largest propagation actually observed.
    pub observed_propagation: Dist,
    /// Smallest singular value over all samples of the stage.
    pub min_sigma: f64,
    /// Largest operator distance between this stage's start and the
    /// previous stage's end.
    pub junction_defect: f64,
    /// Stage-specific exactness measure at its endpoint.
    pub endpoint_defect: f64,
    /// Time samples used (after refinement).
    pub t_samples: usize,
    pub refined: bool,
}

/// Verdict of a contraction run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CertificateVerdict {
    BoundsMet,
    BoundsViolated,
}

/// Everything `contract` measured.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionCertificate {
    pub family_dim: usize,
    pub grid_samples: usize,
    /// Half the family's uniform invertibility margin.
    pub epsilon: f64,
    /// Largest mass removed by forcing members onto the ledger.
    pub zero_out_perturbation: f64,
    /// Largest mass dropped when banding the residue inverses.
    pub inverse_band_perturbation: f64,
    pub stages: Vec<StageReport>,
    pub min_sigma: f64,
    pub max_junction_defect: f64,
    pub whirl_endpoint_defect: f64,
    /// Largest endpoint entry differing from the identity on rows or
    /// columns of the designated interior.
    pub endpoint_interior_residual: f64,
    /// Frobenius distance of the endpoint from the identity, window-wide.
    pub endpoint_full_residual: f64,
    /// Labels of points still carrying the residue at the end.
    pub residual_points: Vec<String>,
    pub interior_size: usize,
    pub violations: Vec<String>,
    pub verdict: CertificateVerdict,
}

/// The certificate plus the discrete data that produced it.
#[derive(Debug, Clone)]
pub struct ContractionOutcome {
    pub certificate: ContractionCertificate,
    pub ledger: SelectionLedger,
    pub plan: LayerPlan,
}

/// Samples of one stage of one family member.
struct PathStats {
    min_sigma: f64,
    max_prop: Dist,
    samples: usize,
    refined: bool,
}

/// Sample `build(t)` for `t` in a uniform grid on `[0, 1]`, measuring
/// singular values and propagation; refine the grid while adjacent
/// singular values jump by more than 20%.
fn sample_path<F>(
    build: &F,
    base_samples: usize,
    max_refinements: u32,
    tol: &Tolerances,
    seed: u64,
) -> Result<PathStats, HomotopyError>
where
    F: Fn(f64) -> Result<SparseOperator, HomotopyError>,
{
    let mut count = base_samples.max(2);
    let mut rounds = 0u32;
    loop {
        let mut min_sigma = f64::INFINITY;
        let mut max_prop = Dist::ZERO;
        let mut sigmas = Vec::with_capacity(count);
        for k in 0..count {
            let t = k as f64 / (count - 1) as f64;
            let op = build(t)?;
            let sigma = op.sigma_min(tol, seed);
            sigmas.push(sigma);
            min_sigma = min_sigma.min(sigma);
            max_prop = max_prop.max(op.propagation());
        }
        let rough = sigmas.windows(2).any(|w| {
            let hi = w[0].max(w[1]);
            hi > 0.0 && w[0].min(w[1]) < 0.8 * hi
        });
        if rough && rounds < max_refinements {
            // Doubling keeps the old grid points: 11 -> 21 -> 41.
            count = count * 2 - 1;
            rounds += 1;
            continue;
        }
        return Ok(PathStats {
            min_sigma,
            max_prop,
            samples: count,
            refined: rounds > 0,
        });
    }
}

struct StageAccumulator {
    name: &'static str,
    declared: Dist,
    observed: Dist,
    min_sigma: f64,
    junction: f64,
    endpoint: f64,
    samples: usize,
    refined: bool,
}

impl StageAccumulator {
    fn new(name: &'static str, declared: Dist) -> StageAccumulator {
        StageAccumulator {
            name,
            declared,
            observed: Dist::ZERO,
            min_sigma: f64::INFINITY,
            junction: 0.0,
            endpoint: 0.0,
            samples: 0,
            refined: false,
        }
    }

    fn absorb_path(&mut self, stats: &PathStats) {
        self.min_sigma = self.min_sigma.min(stats.min_sigma);
        self.observed = self.observed.max(stats.max_prop);
        self.samples = self.samples.max(stats.samples);
        self.refined |= stats.refined;
    }

    fn into_report(self) -> StageReport {
        StageReport {
            name: self.name.to_string(),
            declared_propagation: self.declared,
            observed_propagation: self.observed,
            min_sigma: if self.min_sigma.is_finite() {
                self.min_sigma
            } else {
                0.0
            },
            junction_defect: self.junction,
            endpoint_defect: self.endpoint,
            t_samples: self.samples,
            refined: self.refined,
        }
    }
}

/// Run the full contraction over a family and certify every stage.
pub fn contract(
    family: &VertexFamily,
    partition: &BoundedPartition,
    params: &ContractParams,
    tol: &Tolerances,
    seed: u64,
) -> Result<ContractionOutcome, HomotopyError> {
    if params.layer_count % 2 != 0 {
        return Err(HomotopyError::BadParams(
            "the whirl cancellation needs an even layer count".into(),
        ));
    }
    if params.t_samples < 2 {
        return Err(HomotopyError::BadParams(
            "at least two time samples per stage".into(),
        ));
    }
    let window = family.window();
    let r = partition.radius;
    let p = family.max_propagation();
    let two = Dist::integer(2);

    // Uniform margin and selection, shared by every member.
    let margin = epsilon_margin(family, params.grid_resolution, tol, seed)?;
    let epsilon = margin.epsilon;
    let ledger = select_sequences(
        family,
        partition,
        params.sequence_length,
        params.layer_count,
        params.interior_margin,
    )?;
    let interior: BTreeSet<PointId> = window
        .index_interior(params.interior_margin)
        .into_iter()
        .collect();

    let mut violations: Vec<String> = Vec::new();
    if ledger.max_pair_distance > two * r {
        violations.push(format!(
            "selected pairs reach distance {} beyond the block bound {}",
            ledger.max_pair_distance,
            two * r
        ));
    }

    let mut stage_first = StageAccumulator::new("first_rotation", two * r + two * p);
    let mut stage_second = StageAccumulator::new("second_rotation", two * r);
    let mut stage_composite = StageAccumulator::new(
        "composite_rotation",
        Dist::integer(4) * r + Dist::integer(3) * p,
    );
    let mut stage_collapse =
        StageAccumulator::new("collapse", Dist::integer(4) * r + Dist::integer(3) * p);
    let mut stage_normalize =
        StageAccumulator::new("normalize", Dist::integer(4) * r + Dist::integer(3) * p);
    let mut max_unitary_defect = 0.0f64;
    let mut zero_out_perturbation = 0.0f64;
    let mut min_sigma_overall = f64::INFINITY;

    // First pass: straighten every member and collect the endpoints.
    let grid = family.grid(params.grid_resolution);
    let mut collapsed: Vec<SparseOperator> = Vec::with_capacity(grid.len());
    for weights in &grid {
        let member = family.at(weights)?;
        let forced = zero_out(&member, &ledger, epsilon)?;
        zero_out_perturbation = zero_out_perturbation.max(forced.perturbation);
        let f = forced.operator;
        let sigma_base = f.sigma_min(tol, seed);
        min_sigma_overall = min_sigma_overall.min(sigma_base);

        // Rotation stages: the factors are unitary, so the singular values
        // of the moving state equal those of `f` for the whole stage.
        stage_first.min_sigma = stage_first.min_sigma.min(sigma_base);
        stage_second.min_sigma = stage_second.min_sigma.min(sigma_base);
        stage_composite.min_sigma = stage_composite.min_sigma.min(sigma_base);
        let mut composite_prop = Dist::ZERO;
        for k in 0..params.t_samples {
            let t = k as f64 / (params.t_samples - 1) as f64;
            let r1 = first_rotation(&f, &ledger, t)?;
            max_unitary_defect = max_unitary_defect.max(r1.unitarity_defect(tol, seed)?);
            stage_first.observed = stage_first.observed.max(r1.propagation());
            composite_prop = composite_prop.max(r1.compose(&f)?.propagation());
        }
        stage_first.samples = stage_first.samples.max(params.t_samples);
        let straight_half = first_rotation(&f, &ledger, 1.0)?.compose(&f)?;
        // Exact identity factor at t = 0 keeps the junction at zero.
        let junction_first = first_rotation(&f, &ledger, 0.0)?
            .compose(&f)?
            .frobenius_distance(&f)?;
        stage_first.junction = stage_first.junction.max(junction_first);

        for k in 0..params.t_samples {
            let t = k as f64 / (params.t_samples - 1) as f64;
            let r2 = second_rotation(&f, &ledger, t)?;
            max_unitary_defect = max_unitary_defect.max(r2.unitarity_defect(tol, seed)?);
            stage_second.observed = stage_second.observed.max(r2.propagation());
            composite_prop = composite_prop.max(r2.compose(&straight_half)?.propagation());
        }
        stage_second.samples = stage_second.samples.max(params.t_samples);
        let junction_second = second_rotation(&f, &ledger, 0.0)?
            .compose(&straight_half)?
            .frobenius_distance(&straight_half)?;
        stage_second.junction = stage_second.junction.max(junction_second);
        stage_composite.observed = stage_composite.observed.max(composite_prop);
        stage_composite.samples = stage_composite.samples.max(params.t_samples);
        let straight = second_rotation(&f, &ledger, 1.0)?.compose(&straight_half)?;

        // Collapse of the coupling block.
        let collapse_start = collapse_cross(&straight, &ledger, 0.0, params.corner_tol)?;
        stage_collapse.junction = stage_collapse
            .junction
            .max(collapse_start.operator.frobenius_distance(&straight)?);
        stage_collapse.endpoint = stage_collapse.endpoint.max(collapse_start.dropped);
        let collapse_path = |t: f64| -> Result<SparseOperator, HomotopyError> {
            Ok(collapse_cross(&straight, &ledger, t, params.corner_tol)?.operator)
        };
        let stats = sample_path(
            &collapse_path,
            params.t_samples,
            params.max_refinements,
            tol,
            seed,
        )?;
        stage_collapse.absorb_path(&stats);
        let uncoupled = collapse_cross(&straight, &ledger, 1.0, params.corner_tol)?.operator;

        // Polar normalization of the straightened diagonal.
        let norm_path = |t: f64| -> Result<SparseOperator, HomotopyError> {
            normalize_diagonal(&uncoupled, &ledger, t)
        };
        stage_normalize.junction = stage_normalize
            .junction
            .max(norm_path(0.0)?.frobenius_distance(&uncoupled)?);
        let stats = sample_path(
            &norm_path,
            params.t_samples,
            params.max_refinements,
            tol,
            seed,
        )?;
        stage_normalize.absorb_path(&stats);
        collapsed.push(norm_path(1.0)?);
    }
    if max_unitary_defect > params.unitary_tol {
        violations.push(format!(
            "rotation unitarity defect {max_unitary_defect:.3e} exceeds {:.1e}",
            params.unitary_tol
        ));
    }

    // Shared residue geography: union of all member residues.
    let mut union_cover: BTreeSet<PointId> = BTreeSet::new();
    for d in &collapsed {
        union_cover.extend(super::whirl::cover_of(d));
    }
    let union_cover: Vec<PointId> = union_cover.into_iter().collect();
    let mut union_carrier = SparseOperator::identity(Arc::clone(window));
    for &u in &union_cover {
        union_carrier.set(u, u, Complex64::new(0.0, 0.0))?;
    }
    let plan = layer_decomposition(&union_carrier, &ledger, partition, params.layer_count)?;
    debug_assert_eq!(plan.cover, union_cover);

    // Shift isometries between consecutive layers.
    let mut stage_shifts = StageAccumulator::new("layer_shifts", Dist::integer(4) * r);
    stage_shifts.min_sigma = 1.0;
    stage_shifts.samples = params.layer_count;
    for m in 0..params.layer_count {
        let j = shift_isometry(window, plan.layer(m), plan.layer(m + 1))?;
        stage_shifts.observed = stage_shifts.observed.max(j.propagation());
    }

    // Residue propagation over the family, for the whirl bound.
    let residue_prop = collapsed
        .iter()
        .map(|d| d.propagation())
        .max()
        .unwrap_or(Dist::ZERO);
    let layer_reach = Dist::integer(2 * params.layer_count as i64) * plan.max_step;

    let mut stage_ascent = StageAccumulator::new("whirl_ascent", Dist::ZERO);
    let mut stage_descent = StageAccumulator::new("whirl_descent", Dist::ZERO);
    let mut inverse_band_perturbation = 0.0f64;
    let mut whirl_endpoint_defect = 0.0f64;
    let mut endpoint_interior_residual = 0.0f64;
    let mut endpoint_full_residual = 0.0f64;
    let mut residual_points: BTreeSet<PointId> = BTreeSet::new();
    let mut band_radius_used = residue_prop;

    for d in &collapsed {
        // Inverse of the residue, banded on a doubling schedule.
        let mut schedule = vec![residue_prop];
        let mut widened = residue_prop;
        for _ in 0..3 {
            widened = widened + widened.max(Dist::integer(1));
            schedule.push(widened);
        }
        let mut banded = None;
        let mut last_err = None;
        for radius in schedule {
            match inverse_on_cover(
                d,
                &union_cover,
                radius,
                params.whirl_endpoint_tol / 4.0,
                tol,
                seed,
            ) {
                Ok((inv, dropped)) => {
                    banded = Some((inv, dropped));
                    band_radius_used = band_radius_used.max(radius);
                    break;
                }
                Err(HomotopyError::Operator(
                    e @ crate::operator::OperatorError::PerturbationTooLarge { .. },
                )) => {
                    last_err = Some(HomotopyError::Operator(e));
                }
                Err(other) => return Err(other),
            }
        }
        let Some((g_inv, dropped)) = banded else {
            return Err(last_err.expect("band schedule cannot be empty"));
        };
        inverse_band_perturbation = inverse_band_perturbation.max(dropped);

        // Conjugated copies of residue and inverse on every layer.
        let mut g_at: Vec<SparseOperator> = vec![d.clone()];
        let mut g_inv_at: Vec<SparseOperator> = vec![g_inv.clone()];
        for m in 1..=params.layer_count {
            g_at.push(conjugate_between_layers(d, &union_cover, plan.layer(m))?);
            g_inv_at.push(conjugate_between_layers(
                &g_inv,
                &union_cover,
                plan.layer(m),
            )?);
        }

        // Cancellation quality of each planted pair.
        let id = SparseOperator::identity(Arc::clone(window));
        for m in 0..=params.layer_count {
            let defect = g_inv_at[m]
                .compose(&g_at[m])?
                .frobenius_distance(&id)?;
            whirl_endpoint_defect = whirl_endpoint_defect.max(defect);
        }

        let ascent_pairs: Vec<usize> = (1..params.layer_count).step_by(2).collect();
        let descent_pairs: Vec<usize> = (0..params.layer_count).step_by(2).collect();

        let ascent_state = |t: f64| -> Result<SparseOperator, HomotopyError> {
            let mut state = d.clone();
            for &m in &ascent_pairs {
                let w = whirl_pair(&g_at[m], &g_inv_at[m], plan.layer(m), plan.layer(m + 1), t)?;
                state = w.compose(&state)?;
            }
            Ok(state)
        };
        stage_ascent.junction = stage_ascent
            .junction
            .max(ascent_state(0.0)?.frobenius_distance(d)?);
        let stats = sample_path(
            &ascent_state,
            params.t_samples,
            params.max_refinements,
            tol,
            seed,
        )?;
        stage_ascent.absorb_path(&stats);
        let after_ascent = ascent_state(1.0)?;

        let descent_state = |t: f64| -> Result<SparseOperator, HomotopyError> {
            let mut state = after_ascent.clone();
            for &m in &descent_pairs {
                let w = whirl_pair(&g_at[m], &g_inv_at[m], plan.layer(m), plan.layer(m + 1), t)?;
                state = w.compose(&state)?;
            }
            Ok(state)
        };
        stage_descent.junction = stage_descent
            .junction
            .max(descent_state(0.0)?.frobenius_distance(&after_ascent)?);
        let stats = sample_path(
            &descent_state,
            params.t_samples,
            params.max_refinements,
            tol,
            seed,
        )?;
        stage_descent.absorb_path(&stats);
        let end = descent_state(1.0)?;

        // Expected endpoint: identity everywhere except the residue copy
        // parked on the outermost layer.
        let expected = if params.layer_count == 0 {
            d.clone()
        } else {
            conjugate_between_layers(d, &union_cover, plan.layer(params.layer_count))?
        };
        stage_descent.endpoint = stage_descent
            .endpoint
            .max(end.frobenius_distance(&expected)?);

        // Endpoint residual measurements.
        let mut full_sq = 0.0f64;
        for (&(row, col), &v) in end.support() {
            let expected_entry = if row == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            let dev = (v - expected_entry).norm();
            if dev == 0.0 {
                continue;
            }
            full_sq += dev * dev;
            if dev > 1e-14 {
                residual_points.insert(row);
                residual_points.insert(col);
            }
            if interior.contains(&row) || interior.contains(&col) {
                endpoint_interior_residual = endpoint_interior_residual.max(dev);
            }
        }
        for q in 0..end.n() {
            if end.entry(q, q) == Complex64::new(0.0, 0.0) {
                full_sq += 1.0;
                residual_points.insert(q);
                if interior.contains(&q) {
                    endpoint_interior_residual = endpoint_interior_residual.max(1.0);
                }
            }
        }
        endpoint_full_residual = endpoint_full_residual.max(full_sq.sqrt());
    }

    // Declared whirl bound: two plane rotations across the layer spacing,
    // a residue copy, and a banded inverse copy, both reached over at most
    // `layer_count` steps, on top of the incoming state.
    let whirl_declared =
        Dist::integer(2) * plan.max_step + residue_prop + band_radius_used + layer_reach + layer_reach + residue_prop;
    stage_ascent.declared = whirl_declared;
    stage_descent.declared = whirl_declared;
    stage_ascent.endpoint = whirl_endpoint_defect;

    // Aggregate and judge.
    let stages: Vec<StageReport> = vec![
        stage_first,
        stage_second,
        stage_composite,
        stage_collapse,
        stage_normalize,
        stage_shifts,
        stage_ascent,
        stage_descent,
    ]
    .into_iter()
    .map(StageAccumulator::into_report)
    .collect();

    let mut max_junction_defect = 0.0f64;
    for stage in &stages {
        if stage.observed_propagation > stage.declared_propagation {
            violations.push(format!(
                "stage {} observed propagation {} over its declared {}",
                stage.name, stage.observed_propagation, stage.declared_propagation
            ));
        }
        if stage.junction_defect > params.junction_tol {
            violations.push(format!(
                "stage {} junction defect {:.3e} exceeds {:.1e}",
                stage.name, stage.junction_defect, params.junction_tol
            ));
        }
        max_junction_defect = max_junction_defect.max(stage.junction_defect);
        min_sigma_overall = min_sigma_overall.min(stage.min_sigma);
    }
    if whirl_endpoint_defect > params.whirl_endpoint_tol {
        violations.push(format!(
            "whirl cancellation defect {whirl_endpoint_defect:.3e} exceeds {:.1e}",
            params.whirl_endpoint_tol
        ));
    }
    if endpoint_interior_residual > params.endpoint_tol {
        violations.push(format!(
            "endpoint differs from the identity by {endpoint_interior_residual:.3e} on the interior"
        ));
    }
    if !(min_sigma_overall > tol.rank) {
        violations.push(format!(
            "a sampled operator came within {min_sigma_overall:.3e} of singularity"
        ));
    }

    let verdict = if violations.is_empty() {
        CertificateVerdict::BoundsMet
    } else {
        CertificateVerdict::BoundsViolated
    };
    let certificate = ContractionCertificate {
        family_dim: family.dim(),
        grid_samples: grid.len(),
        epsilon,
        zero_out_perturbation,
        inverse_band_perturbation,
        stages,
        min_sigma: min_sigma_overall,
        max_junction_defect,
        whirl_endpoint_defect,
        endpoint_interior_residual,
        endpoint_full_residual,
        residual_points: residual_points
            .iter()
            .map(|&q| window.label(q).to_string())
            .collect(),
        interior_size: interior.len(),
        violations,
        verdict,
    };
    Ok(ContractionOutcome {
        certificate,
        ledger,
        plan,
    })
}

/// Certificate of the sparse-set shortcut.
#[derive(Debug, Clone, Serialize)]
pub struct SparseContractionCertificate {
    /// Points of the sparse set carrying the diagonal corner.
    pub corner_points: usize,
    /// Smallest modulus among the corner diagonal entries.
    pub min_modulus: f64,
    /// Smallest singular value along the whole polar path.
    pub path_min_sigma: f64,
    /// Propagation of every operator on the path (the corner is diagonal).
    pub path_propagation: Dist,
    /// Distance of the path's endpoint from the identity.
    pub endpoint_residual: f64,
    pub samples: usize,
}

/// Contract an operator that is the identity away from an `r`-sparse set.
///
/// Over a sparse set the corner is automatically diagonal, so the polar
/// path `λ ↦ |λ|^(1-t)·exp(i(1-t)·arg λ)` on the diagonal entries is a
/// homotopy to the identity that never leaves the invertibles and never
/// increases propagation.
pub fn kuiper_via_sparse(
    op: &SparseOperator,
    set: &[PointId],
    r: Dist,
    tol: &Tolerances,
    seed: u64,
    samples: usize,
) -> Result<SparseContractionCertificate, HomotopyError> {
    let window = Arc::clone(op.window());
    let in_set: BTreeSet<PointId> = set.iter().copied().collect();
    for (&(row, col), &v) in op.support() {
        let off_set = !in_set.contains(&row) || !in_set.contains(&col);
        let identity_entry = if row == col {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        if off_set && v != identity_entry {
            return Err(HomotopyError::BadParams(format!(
                "operator acts at ({}, {}) away from the sparse set",
                window.label(row),
                window.label(col)
            )));
        }
    }
    let split = crate::operator::sparse_corner_split(op, set, r)?;
    let mut diagonal: Vec<(PointId, Complex64)> = split.corner_diagonal;
    for &q in set {
        if !diagonal.iter().any(|&(p, _)| p == q) {
            diagonal.push((q, Complex64::new(0.0, 0.0)));
        }
    }
    let min_modulus = diagonal
        .iter()
        .map(|(_, v)| v.norm())
        .fold(f64::INFINITY, f64::min)
        .min(if diagonal.is_empty() { 1.0 } else { f64::INFINITY });
    if min_modulus <= tol.rank {
        return Err(HomotopyError::NotInvertibleAt {
            sample: 0,
            sigma: min_modulus,
        });
    }

    let steps = samples.max(2);
    let mut path_min_sigma = f64::INFINITY;
    let mut path_propagation = Dist::ZERO;
    let mut endpoint_residual = 0.0;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let mut sample = op.clone();
        for &(q, v) in &diagonal {
            sample.set(q, q, polar_path(v, t))?;
        }
        path_min_sigma = path_min_sigma.min(sample.sigma_min(tol, seed));
        path_propagation = path_propagation.max(sample.propagation());
        if k == steps - 1 {
            endpoint_residual = sample
                .frobenius_distance(&SparseOperator::identity(Arc::clone(&window)))?;
        }
    }
    Ok(SparseContractionCertificate {
        corner_points: diagonal.len(),
        min_modulus,
        path_min_sigma,
        path_propagation,
        endpoint_residual,
        samples: steps,
    })
}
