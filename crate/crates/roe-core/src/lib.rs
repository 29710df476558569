//! Finite-window workbench for uniform Roe algebras of discrete metric spaces.
//!
//! A uniform Roe algebra is generated by bounded operators on `ℓ²(X)` whose
//! matrix entries vanish beyond a fixed distance (finite *propagation*).  This
//! crate realises finite windows of such spaces exactly — distances are stored
//! as rationals and every built-in space produces integer distances — and lets
//! you experiment with the operator-level constructions that make these
//! algebras interesting:
//!
//! * [`space`] — symbolic space descriptions (`ℤ`, `ℤⁿ`, exponential block
//!   spaces, fibered lines, disjoint powers, sparse augmentations), window
//!   realisation, ball/boundary queries backed by a symbolic cardinality
//!   oracle, and exhaustive metric validation.
//! * [`operator`] — sparse finite-propagation operators: composition with
//!   propagation accounting, adjoints, dense inversion with invertibility
//!   witnesses, the unitary retraction `((1−t)·Id + t·(FF*)^{-1/2})F`, corner
//!   splitting over sparse subsets, and column finitisation.
//! * [`partition`] — covers by infinite uniformly bounded balls (CIUBB),
//!   partitions by infinite uniformly bounded sets (PIUBS), the constructive
//!   conversion between them, Følner-style boundary ratios (exact rationals)
//!   and a paradoxical-decomposition checker for the exponential block space.
//! * [`homotopy`] — the contraction pipeline for invertible vertex families:
//!   sequence selection, column zeroing, generalised rotation blocks,
//!   triangular collapse, layer decompositions with shift isometries, and the
//!   two-layer whirl paths, certified segment by segment.
//! * [`obstruction`] — why naive contractions must fail: compressed-shift
//!   index counts, determinant winding numbers of invertible loops, traces
//!   along Følner families, matrix amplification `C*_u(⊔ⁿX) ≅ Mₙ(C*_u(X))`,
//!   and transport along coarse bijections.
//! * [`report`] — canonical JSON reports (sorted keys, fixed float format,
//!   atomic writes) so equal inputs produce byte-identical artifacts.
//!
//! Everything is windowed: claims hold on the realised finite window, and
//! operations that are only meaningful away from the truncation edge state
//! which sub-window they certify.

#![forbid(unsafe_code)]
#![warn(missing_debug_implementations)]

pub mod config;
pub mod homotopy;
pub mod linalg;
pub mod obstruction;
pub mod operator;
pub mod partition;
pub mod rational;
pub mod report;
pub mod space;

pub use config::Tolerances;
pub use rational::Dist;
