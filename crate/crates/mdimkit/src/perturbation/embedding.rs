//! Certified window embeddings: nerve-based eps-embeddings of a sample pool
//! under a windowed metric, composed with a (generically perturbed) linear
//! map into a window of cell values.
//!
//! This is the shared engine behind the painting pipelines: a pool of
//! shifted windows is covered at scale eps, the nerve carries the
//! eps-embedding certificate, a linear map approximates the windowed
//! evaluation of an observable within delta, and an optional generic
//! perturbation adds an exact general-position certificate while keeping the
//! approximation budget.

use serde::{Deserialize, Serialize};

use crate::lattice::{LatticePoint, LatticeSet};
use crate::simplicial::cover::{greedy_cover, nerve_embedding, NerveMap, SampleMetric};
use crate::simplicial::generic::{perturb_generic, GenericCert, TargetTag};
use crate::simplicial::{approximate_by_linear, Barycentric, LinearMap, Norm};
use crate::systems::metric::{weighted_offsets, MetricParams};
use crate::systems::PointWindow;
use crate::{Error, Result};

/// Cell-wise observables `f` with `f(T^m x)` evaluated from a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    /// The vector value of the cell at the evaluation point.
    CellVector { dim: usize },
    /// Coordinate-wise affine image of the cell vector (e.g. `2 x - 1` for
    /// real-valued targets).
    CellAffine { dim: usize, scale: f64, offset: f64 },
}

impl Observable {
    pub fn dim(&self) -> usize {
        match self {
            Observable::CellVector { dim } => *dim,
            Observable::CellAffine { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, x: &PointWindow, at: &LatticePoint) -> Result<Vec<f64>> {
        let cell = x.require_cell(at, "observable")?;
        let v = cell
            .vector
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("observable needs vector cells".into()))?;
        Ok(match self {
            Observable::CellVector { .. } => v.clone(),
            Observable::CellAffine { scale, offset, .. } => {
                v.iter().map(|c| scale * c + offset).collect()
            }
        })
    }

    /// `I_f(x)|_{at + cells}` flattened cell-major.
    pub fn eval_block(
        &self,
        x: &PointWindow,
        at: &LatticePoint,
        cells: &[LatticePoint],
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(cells.len() * self.dim());
        for c in cells {
            out.extend(self.eval(x, &at.add(c))?);
        }
        Ok(out)
    }
}

/// Windowed metric over a pool of point windows, all read at a common
/// anchor: `d(i, j) = d_Omega(pool_i, pool_j)` with the truncated base
/// metric.
pub struct PoolMetric<'a> {
    pool: &'a [PointWindow],
    omega: &'a LatticeSet,
    offsets: Vec<(LatticePoint, f64)>,
}

impl<'a> PoolMetric<'a> {
    pub fn new(pool: &'a [PointWindow], omega: &'a LatticeSet, params: &MetricParams) -> Result<Self> {
        Ok(PoolMetric {
            pool,
            omega,
            offsets: weighted_offsets(params.truncation_radius, omega.k())?,
        })
    }

    fn dist_windows(&self, x: &PointWindow, x_at: &LatticePoint, j: usize) -> f64 {
        let y = &self.pool[j];
        let mut sup: f64 = 0.0;
        for n in self.omega.iter() {
            let mut total = 0.0;
            for (m, w) in &self.offsets {
                let cell = n.add(m);
                let a = x
                    .cell(&x_at.add(&cell))
                    .expect("window covers omega + W_t around the anchor");
                let b = y.cell(&cell).expect("pool covers omega + W_t");
                total += w * a.distance(b);
            }
            sup = sup.max(total);
        }
        sup
    }
}

impl SampleMetric for PoolMetric<'_> {
    fn len(&self) -> usize {
        self.pool.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist_windows(&self.pool[i], &LatticePoint::origin(self.omega.k()), j)
    }
}

/// A certified map `F = g ∘ pi : X -> target^{cells}`.
///
/// `pi` is the nerve map of the pool under `d_Omega` at scale `eps`; `g` is
/// linear with `|g(pi(x)) - I_f(x)|_cells|_inf < delta` certified on the
/// pool, optionally perturbed into general position with an exact
/// certificate.
pub struct WindowEmbedding {
    pub omega: LatticeSet,
    pub target_cells: Vec<LatticePoint>,
    pub value_dim: usize,
    pub eps: f64,
    pub delta: f64,
    pub nerve: NerveMap,
    pub gmap: LinearMap,
    pub pool: Vec<PointWindow>,
    pub params: MetricParams,
    pub observable: Observable,
    /// Achieved sup error of `g(pi(x))` against the block values, over the
    /// pool.
    pub sup_err: f64,
    pub generic_cert: Option<GenericCert>,
}

/// Build a certified window map from a pool.
///
/// `gamma_tag`: when present, the linear map is perturbed toward a fresh
/// generic draw with budget `gamma = (delta - approx_err) / (2 * spread)`
/// and the tag is certified exactly; the final sup error is re-measured and
/// must stay below `delta`.
#[allow(clippy::too_many_arguments)]
pub fn certified_window_map(
    pool: Vec<PointWindow>,
    omega: LatticeSet,
    target_cells: Vec<LatticePoint>,
    observable: Observable,
    eps: f64,
    delta: f64,
    params: MetricParams,
    gamma_tag: Option<(&TargetTag, u64, u64)>,
    replicate_copies: usize,
) -> Result<WindowEmbedding> {
    if pool.is_empty() {
        return Err(Error::InvalidParameter("empty pool".into()));
    }
    let metric = PoolMetric::new(&pool, &omega, &params)?;
    let cover = greedy_cover(&metric, eps)?;
    let nerve = nerve_embedding(&metric, &cover)?;
    if !nerve.cert.ok() {
        return Err(Error::CertificationFailed(
            "pool nerve is not an eps-embedding".into(),
        ));
    }

    let origin = LatticePoint::origin(omega.k());
    let values: Vec<Vec<f64>> = pool
        .iter()
        .map(|w| observable.eval_block(w, &origin, &target_cells))
        .collect::<Result<_>>()?;
    let (base, approx_err) = approximate_by_linear(&nerve, &metric, &values, delta, Norm::Linf)?;

    let (gmap, sup_err, generic_cert) = match gamma_tag {
        None => {
            if replicate_copies > 1 {
                return Err(Error::InvalidParameter(
                    "replication requires a generic tag".into(),
                ));
            }
            (base, approx_err, None)
        }
        Some((tag, seed, cap)) => {
            // Spread of a fresh draw in [0,1) against the base values.
            let spread = values
                .iter()
                .flatten()
                .fold(1.0f64, |m, &v| m.max(v.abs() + 1.0));
            let gamma = ((delta - approx_err) / (2.0 * spread)).min(0.25);
            if gamma <= 0.0 {
                return Err(Error::CertificationFailed(format!(
                    "no perturbation budget: approx err {approx_err} >= delta {delta}"
                )));
            }
            let complex = if replicate_copies > 1 {
                nerve.complex.replicate(replicate_copies)
            } else {
                nerve.complex.clone()
            };
            let base_images: Vec<Vec<f64>> = (0..replicate_copies.max(1))
                .flat_map(|_| {
                    (0..nerve.complex.vertex_count())
                        .map(|v| base.vertex_image_f64(v).to_vec())
                })
                .collect();
            let (gmap, cert) = perturb_generic(&complex, &base_images, gamma, tag, seed, cap)?;

            // Re-measure the sup error over pool x copies.
            let mut sup_err = 0.0f64;
            for (i, val) in values.iter().enumerate() {
                let b = nerve.project_sample(i);
                for copy in 0..replicate_copies.max(1) {
                    let shifted = Barycentric {
                        weights: b
                            .weights
                            .iter()
                            .map(|&(v, w)| (copy * nerve.complex.vertex_count() + v, w))
                            .collect(),
                    };
                    let img = gmap.eval_f64(&shifted);
                    sup_err = sup_err.max(Norm::Linf.dist(&img, val));
                }
            }
            if sup_err >= delta {
                return Err(Error::CertificationFailed(format!(
                    "perturbed map error {sup_err} >= delta {delta}"
                )));
            }
            (gmap, sup_err, Some(cert))
        }
    };

    Ok(WindowEmbedding {
        omega,
        target_cells,
        value_dim: observable.dim(),
        eps,
        delta,
        nerve,
        gmap,
        pool,
        params,
        observable,
        sup_err,
        generic_cert,
    })
}

impl WindowEmbedding {
    pub fn k(&self) -> usize {
        self.omega.k()
    }

    /// `pi(T^at x)` via the nerve's fresh-point projection.
    pub fn project(&self, x: &PointWindow, at: &LatticePoint) -> Result<Barycentric> {
        let metric = PoolMetric::new(&self.pool, &self.omega, &self.params)?;
        self.nerve
            .project_new(&|j| metric.dist_windows(x, at, j))
    }

    /// `d_Omega(T^a x, T^b y)` under the pool's truncated metric.
    pub fn window_distance(
        &self,
        x: &PointWindow,
        a: &LatticePoint,
        y: &PointWindow,
        b: &LatticePoint,
    ) -> Result<f64> {
        let offsets = weighted_offsets(self.params.truncation_radius, self.k())?;
        let mut sup: f64 = 0.0;
        for n in self.omega.iter() {
            let mut total = 0.0;
            for (m, w) in &offsets {
                let cell = n.add(m);
                let xa = x.require_cell(&a.add(&cell), "window_distance")?;
                let yb = y.require_cell(&b.add(&cell), "window_distance")?;
                total += w * xa.distance(yb);
            }
            sup = sup.max(total);
        }
        Ok(sup)
    }

    /// `F(T^at x)` flattened cell-major, optionally through a replicated
    /// copy of the complex.
    pub fn eval_copy(&self, x: &PointWindow, at: &LatticePoint, copy: usize) -> Result<Vec<f64>> {
        let b = self.project(x, at)?;
        let base_vertices = self.nerve.complex.vertex_count();
        let shifted = Barycentric {
            weights: b
                .weights
                .iter()
                .map(|&(v, w)| (copy * base_vertices + v, w))
                .collect(),
        };
        Ok(self.gmap.eval_f64(&shifted))
    }

    pub fn eval(&self, x: &PointWindow, at: &LatticePoint) -> Result<Vec<f64>> {
        self.eval_copy(x, at, 0)
    }

    /// One cell of `F(T^at x)`.
    pub fn eval_cell(
        &self,
        x: &PointWindow,
        at: &LatticePoint,
        cell: &LatticePoint,
    ) -> Result<Vec<f64>> {
        let idx = self
            .target_cells
            .iter()
            .position(|c| c == cell)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("{:?} is not a target cell", cell.0))
            })?;
        let full = self.eval(x, at)?;
        Ok(full[idx * self.value_dim..(idx + 1) * self.value_dim].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::cube_window;
    use crate::systems::{ShiftSystem, SystemSpec};

    fn block_pool(system: &ShiftSystem, omega: &LatticeSet, count: u64) -> Vec<PointWindow> {
        (0..count).map(|i| system.sample(omega, i).unwrap()).collect()
    }

    #[test]
    fn certified_map_reproduces_blocks_on_identity_observable() {
        // Quantized cube shift, W_t = 0: distinct blocks are >= 1/4 apart,
        // so at eps = 0.2 the nerve has one vertex per block and F
        // reproduces the block values up to the approximation error.
        let sys = ShiftSystem::new(SystemSpec::quantized_cube_shift(1, 1, 4, 3)).unwrap();
        let omega = cube_window(2, 1).unwrap();
        let pool = block_pool(&sys, &omega, 12);
        let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
        let emb = certified_window_map(
            pool.clone(),
            omega.clone(),
            cells,
            Observable::CellVector { dim: 1 },
            0.2,
            0.1,
            MetricParams::new(0.0, 1.0),
            None,
            1,
        )
        .unwrap();
        assert_eq!(emb.sup_err, 0.0); // vertices take exact block values
        for (i, w) in pool.iter().enumerate() {
            let img = emb.eval(w, &LatticePoint(vec![0])).unwrap();
            let expect = emb
                .observable
                .eval_block(w, &LatticePoint(vec![0]), &emb.target_cells)
                .unwrap();
            assert_eq!(img, expect, "pool window {i}");
        }
    }

    #[test]
    fn eval_is_shift_consistent() {
        // Evaluating at a shifted anchor equals evaluating the shifted
        // window at the origin, bit for bit. The pool holds every block, so
        // no shift can miss the nerve.
        let sys = ShiftSystem::new(SystemSpec::quantized_cube_shift(1, 1, 4, 7)).unwrap();
        let omega = cube_window(2, 1).unwrap();
        let mut pool = Vec::new();
        for a in 0..=4u32 {
            for b in 0..=4u32 {
                let mut w = PointWindow::new(1, sys.id());
                w.insert(LatticePoint(vec![0]), crate::systems::CellValue::vector(vec![a as f64 / 4.0]));
                w.insert(LatticePoint(vec![1]), crate::systems::CellValue::vector(vec![b as f64 / 4.0]));
                pool.push(w);
            }
        }
        let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
        let emb = certified_window_map(
            pool,
            omega,
            cells,
            Observable::CellVector { dim: 1 },
            0.2,
            0.1,
            MetricParams::new(0.0, 1.0),
            None,
            1,
        )
        .unwrap();
        let big = cube_window(12, 1).unwrap();
        let x = sys.sample(&big, 99).unwrap();
        for a in 0..8i64 {
            let at = LatticePoint(vec![a]);
            let direct = emb.eval(&x, &at).unwrap();
            let shifted = emb.eval(&x.shift(&at), &LatticePoint(vec![0])).unwrap();
            assert_eq!(direct, shifted);
        }
    }

    #[test]
    fn perturbed_map_keeps_budget_and_certificate() {
        let sys = ShiftSystem::new(SystemSpec::quantized_cube_shift(1, 1, 2, 5)).unwrap();
        let omega = cube_window(2, 1).unwrap();
        let pool = block_pool(&sys, &omega, 20);
        let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
        let tag = TargetTag::EmbeddingCube { n: 2 };
        let emb = certified_window_map(
            pool,
            omega,
            cells,
            Observable::CellVector { dim: 1 },
            0.2,
            0.3,
            MetricParams::new(0.0, 1.0),
            Some((&tag, 11, 10_000)),
            1,
        )
        .unwrap();
        assert!(emb.sup_err < 0.3);
        let cert = emb.generic_cert.as_ref().unwrap();
        assert_eq!(cert.resamples, 0);
    }

    #[test]
    fn affine_observable_recenters_values() {
        let obs = Observable::CellAffine {
            dim: 1,
            scale: 2.0,
            offset: -1.0,
        };
        let sys = ShiftSystem::new(SystemSpec::quantized_cube_shift(1, 1, 2, 5)).unwrap();
        let w = sys.sample(&cube_window(4, 1).unwrap(), 0).unwrap();
        for n in 0..4i64 {
            let at = LatticePoint(vec![n]);
            let raw = w.cell(&at).unwrap().vector.as_ref().unwrap()[0];
            assert_eq!(obs.eval(&w, &at).unwrap(), vec![2.0 * raw - 1.0]);
        }
    }
}
