//! Desk-scale computational laboratory for `Z^k` shift systems.
//!
//! The crate builds and certifies, by exact enumeration or seeded Monte
//! Carlo, the geometric and simplicial machinery used to estimate
//! dimension-like invariants of `Z^k` shift systems:
//!
//! * [`lattice`] — exact finite-lattice geometry: cube windows, Euclidean
//!   balls, `R`-shells and `R`-interiors, Folner-ratio diagnostics.
//! * [`systems`] — finite-window representations of shift systems, windowed
//!   metrics, and marker construction (clopen markers, marker fields).
//! * [`voronoi`] — flat and lifted Voronoi cells as nearest-center
//!   predicates, cell-size checkers, and boundary-fraction estimators.
//! * [`simplicial`] — simplicial complexes, linear maps, nerve-based
//!   certified `eps`-embeddings, and exact generic-position certificates.
//! * [`dimension`] — covering numbers, entropy-at-scale profiles,
//!   `widim`/`mdim` upper bounds, and orbit-capacity estimators.
//! * [`perturbation`] — the constructive pipelines that paint window
//!   embeddings into Voronoi tiles and verify the resulting maps.
//!
//! Everything is deterministic given a seed: Monte Carlo estimators use a
//! splittable counter-based generator keyed by `(seed, sample index)`, so
//! results do not depend on thread count.

pub mod dimension;
pub mod lattice;
pub mod perturbation;
pub mod rng;
pub mod simplicial;
pub mod systems;
pub mod voronoi;

mod error;

pub use error::{Error, Result};
