//! Painting a window map into the lifted Voronoi tiles: the blended
//! perturbation `g = (1 - alpha(dist)) f + alpha(dist) F(T^a x)_{-a}` with
//! `alpha(t) = min(1, t)` and `a` the block anchor of the owning center, and
//! the two quantitative checkers built on it: the zero-set orbit-capacity
//! decomposition and the covering-number chain for the payload.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_points, LatticePoint, LatticeSet};
use crate::perturbation::embedding::{Observable, WindowEmbedding};

use crate::simplicial::cover::DenseMetric;
use crate::simplicial::{polytope_cover_count, Norm};
use crate::systems::FieldedWindow;
use crate::voronoi::LiftedCenters;
use crate::{dimension, Error, Result};

/// `alpha(t) = min(1, t)`: 0 on the boundary, 1 one step inside.
pub fn alpha_cutoff(t: f64) -> f64 {
    t.min(1.0)
}

/// Anchor of the block lattice through `n`: `a ≡ n (mod N)` with
/// `0 ∈ a + [N]` (coordinates in `(-N, 0]`).
pub fn block_anchor(n: &LatticePoint, n_block: usize) -> LatticePoint {
    let nb = n_block as i64;
    LatticePoint(
        n.0.iter()
            .map(|&c| {
                let r = c.rem_euclid(nb);
                if r == 0 {
                    0
                } else {
                    r - nb
                }
            })
            .collect(),
    )
}

/// Per-cell paint record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaintedCell {
    pub value: Vec<f64>,
    pub owner: Vec<i64>,
    pub boundary_dist: f64,
    /// Anchor of the painted block when `alpha > 0`.
    pub anchor: Option<Vec<i64>>,
}

/// The painted map over a window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TilePaintedMap {
    pub cells: BTreeMap<LatticePoint, PaintedCell>,
}

impl TilePaintedMap {
    pub fn value(&self, m: &LatticePoint) -> Option<&Vec<f64>> {
        self.cells.get(m).map(|c| &c.value)
    }

    pub fn block(&self, anchor: &LatticePoint, cells: &[LatticePoint]) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for c in cells {
            out.extend(self.cells.get(&anchor.add(c))?.value.iter().copied());
        }
        Some(out)
    }
}

/// Evaluate the blended perturbation over `out_window`.
///
/// At each cell `m` (in the frame of `T^m x` the origin sits in
/// `W(T^m x, n - m)`): distance 0 to the slice boundary keeps `f`; otherwise
/// the block anchor `a' = anchor(n - m)` selects the painted coordinate
/// `F(T^{a'+m} x)_{-a'}` and the cutoff blends.
pub fn paint_tiles(
    x: &FieldedWindow,
    lifted: &LiftedCenters,
    embed: &WindowEmbedding,
    n_block: usize,
    observable: &Observable,
    out_window: &LatticeSet,
) -> Result<TilePaintedMap> {
    let mut cells = BTreeMap::new();
    for m in out_window.iter() {
        let u = m.as_f64();
        let owner = lifted.owner_at(&u, -lifted.h_plane)?;
        let dist = lifted.w_boundary_distance(&owner, &u)?;
        let f_val = observable.eval(&x.point, m)?;
        let record = if dist <= 0.0 {
            PaintedCell {
                value: f_val,
                owner: owner.0.clone(),
                boundary_dist: dist,
                anchor: None,
            }
        } else {
            let shifted_owner = owner.sub(m);
            let a = block_anchor(&shifted_owner, n_block);
            let eval_at = a.add(m);
            let cell_idx = a.neg();
            let f_block = embed.eval_cell(&x.point, &eval_at, &cell_idx)?;
            let alpha = alpha_cutoff(dist);
            let value = f_val
                .iter()
                .zip(&f_block)
                .map(|(fv, bv)| (1.0 - alpha) * fv + alpha * bv)
                .collect();
            PaintedCell {
                value,
                owner: owner.0.clone(),
                boundary_dist: dist,
                anchor: Some(eval_at.0.clone()),
            }
        };
        cells.insert(m.clone(), record);
    }
    Ok(TilePaintedMap { cells })
}

/// Blocks `a + [N] ⊆ int_1 W(x, n)` with `a ≡ n (mod N)`, enumerated per
/// center: every block cell must be owned by `n` with boundary distance
/// >= 1 (then `alpha = 1` exactly and the paint is pure `F`).
pub fn deep_blocks(
    lifted: &LiftedCenters,
    n_block: usize,
    region: &LatticeSet,
) -> Result<Vec<(LatticePoint, LatticePoint)>> {
    let k = lifted.k();
    let a_reach = lifted.l_syn + (k as f64).sqrt();
    let mut out = Vec::new();
    let block_cells = crate::lattice::cube_window(n_block, k)?;
    for (n, _) in lifted.support_points() {
        // Anchors a ≡ n (mod N) near the tile: a = n + N j.
        let reach = ((a_reach + n_block as f64) / n_block as f64).ceil() as i64;
        for j in crate::lattice::box_points(&vec![-reach; k], &vec![reach; k]) {
            let a = LatticePoint(
                n.0.iter()
                    .zip(&j.0)
                    .map(|(&ni, &ji)| ni + ji * n_block as i64)
                    .collect(),
            );
            let mut inside = true;
            for c in block_cells.iter() {
                let cell = a.add(c);
                if !region.contains(&cell) {
                    inside = false;
                    break;
                }
                let u = cell.as_f64();
                let owner = match lifted.owner_at(&u, -lifted.h_plane) {
                    Ok(o) => o,
                    Err(_) => {
                        inside = false;
                        break;
                    }
                };
                if owner != n || lifted.w_boundary_distance(&owner, &u)? < 1.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                out.push((n.clone(), a));
            }
        }
    }
    Ok(out)
}

/// Block-identity report for the tile paint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TileClaimReport {
    pub blocks_checked: usize,
    pub max_abs_diff: f64,
}

/// Check `I_g(x)|_{a+[N]} = F(T^a x)` on every deep block inside the painted
/// region.
pub fn claim_check_tiles(
    painted: &TilePaintedMap,
    x: &FieldedWindow,
    lifted: &LiftedCenters,
    embed: &WindowEmbedding,
    n_block: usize,
    region: &LatticeSet,
) -> Result<TileClaimReport> {
    let mut max_diff = 0.0f64;
    let mut blocks = 0;
    for (_, a) in deep_blocks(lifted, n_block, region)? {
        let direct = embed.eval(&x.point, &a)?;
        let painted_block = painted
            .block(&a, &embed.target_cells)
            .ok_or_else(|| Error::InvalidParameter("block outside painted window".into()))?;
        blocks += 1;
        for (p, d) in painted_block.iter().zip(&direct) {
            max_diff = max_diff.max((p - d).abs());
        }
    }
    Ok(TileClaimReport {
        blocks_checked: blocks,
        max_abs_diff: max_diff,
    })
}

/// Volume of the Euclidean ball of radius `r` in dimension `k` (desk scale:
/// `k <= 4`).
pub fn ball_volume(k: usize, r: f64) -> f64 {
    match k {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
        4 => std::f64::consts::PI.powi(2) / 2.0 * r.powi(4),
        _ => panic!("ball_volume implemented for k <= 4"),
    }
}

/// One radius row of the zero-set decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroSetRow {
    pub r: f64,
    pub lattice_cells: usize,
    pub zeros: usize,
    /// Cells within `sqrt k * N` of a tile boundary.
    pub boundary_cells: usize,
    /// `eps * vol(B_{R + 2L + 2 sqrt k})`.
    pub eps_volume_term: f64,
    pub decomposition_ok: bool,
    pub normalized: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroSetReport {
    pub rows: Vec<ZeroSetRow>,
    pub per_block_zero_cap: f64,
    pub max_block_zeros: usize,
    pub blocks_checked: usize,
    /// Normalized zero count at the largest radius.
    pub final_normalized: f64,
}

impl ZeroSetReport {
    pub fn decomposition_holds(&self) -> bool {
        self.rows.iter().all(|r| r.decomposition_ok)
    }
}

const ZERO_TOL: f64 = 1e-12;

/// Count zeros of the painted map over lattice balls and check the
/// decomposition `zeros <= |boundary cells| + eps * vol(B_{R+2L+2 sqrt k})`,
/// the per-block zero cap `< eps N^k`, and the normalized count.
pub fn zero_set_ocap_check(
    painted: &TilePaintedMap,
    x: &FieldedWindow,
    lifted: &LiftedCenters,
    embed: &WindowEmbedding,
    n_block: usize,
    eps: f64,
    r_grid: &[f64],
) -> Result<ZeroSetReport> {
    if embed.generic_cert.is_none() {
        return Err(Error::CertificateMissing(
            "zero_set_ocap_check needs the zero-coordinate certificate on F".into(),
        ));
    }
    let k = lifted.k();
    let sqrt_k = (k as f64).sqrt();
    let is_zero = |m: &LatticePoint| -> Result<bool> {
        let cell = painted
            .cells
            .get(m)
            .ok_or_else(|| Error::InvalidParameter(format!("cell {:?} unpainted", m.0)))?;
        Ok(cell.value.iter().all(|v| v.abs() <= ZERO_TOL))
    };

    let mut rows = Vec::new();
    for &r in r_grid {
        let ball = ball_points(r, k)?;
        let mut zeros = 0usize;
        let mut boundary_cells = 0usize;
        for m in ball.iter() {
            if is_zero(m)? {
                zeros += 1;
            }
            let cell = &painted.cells[m];
            if cell.boundary_dist <= sqrt_k * n_block as f64 {
                boundary_cells += 1;
            }
        }
        let eps_volume_term =
            eps * ball_volume(k, r + 2.0 * lifted.l_syn + 2.0 * sqrt_k);
        rows.push(ZeroSetRow {
            r,
            lattice_cells: ball.len(),
            zeros,
            boundary_cells,
            eps_volume_term,
            decomposition_ok: (zeros as f64) <= boundary_cells as f64 + eps_volume_term,
            normalized: zeros as f64 / ball.len() as f64,
        });
    }

    // Per-block zero counts on deep blocks.
    let largest = r_grid.iter().cloned().fold(0.0f64, f64::max);
    let region = ball_points(largest, k)?;
    let blocks = deep_blocks(lifted, n_block, &region)?;
    let mut max_block_zeros = 0usize;
    for (_, a) in &blocks {
        let vals = embed.eval(&x.point, a)?;
        let zeros = vals.iter().filter(|v| v.abs() <= ZERO_TOL).count();
        max_block_zeros = max_block_zeros.max(zeros);
    }

    let final_normalized = rows.last().map(|r| r.normalized).unwrap_or(0.0);
    Ok(ZeroSetReport {
        rows,
        per_block_zero_cap: eps * (n_block as f64).powi(k as i32),
        max_block_zeros,
        blocks_checked: blocks.len(),
        final_normalized,
    })
}

/// One radius row of the covering-number chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmdimRow {
    pub r: f64,
    pub lattice_cells: usize,
    pub block_count: usize,
    pub residual_cells: usize,
    pub residual_budget: f64,
    pub residual_ok: bool,
    /// Measured `log A` of the sampled painted images under l-infinity.
    pub measured_log_a: f64,
    pub chain_bound: f64,
    pub chain_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MmdimReport {
    pub rows: Vec<MmdimRow>,
    /// `log A(F(X), eps)` from the explicit lattice cover.
    pub payload_log_a: f64,
    /// `eps^{-N^k (mdim_est + tau)}` spanning bound, logged.
    pub payload_log_bound: f64,
    pub log_a_unit: f64,
    pub gates_ok: bool,
}

impl MmdimReport {
    pub fn all_ok(&self) -> bool {
        self.gates_ok
            && self.payload_log_a < self.payload_log_bound
            && self.rows.iter().all(|r| r.residual_ok && r.chain_ok)
    }
}

/// `A(K, eps)` for `K = [0,1]^D` under the value norm: `(floor(1/eps)+1)^D`
/// intervals of length just under `eps` per axis.
pub fn cube_covering_number(d: usize, eps: f64) -> f64 {
    ((1.0 / eps).floor() + 1.0).powi(d as i32)
}

/// The covering-number chain for the painted system:
/// per sampled point and radius, the deep blocks must cover all but a
/// `tau vol(B_R) / log A(K, eps)` residual of the lattice ball, and the
/// measured `log A` of the painted images must stay below
/// `|B_R ∩ Z^k| (mdim_est + 2 tau) |log eps| + tau vol(B_R)`.
#[allow(clippy::too_many_arguments)]
pub fn mmdim_payload_check(
    painted_samples: &[(TilePaintedMap, FieldedWindow)],
    lifted_per_sample: &[LiftedCenters],
    embed: &WindowEmbedding,
    n_block: usize,
    eps: f64,
    tau: f64,
    mdim_est: f64,
    r_grid: &[f64],
) -> Result<MmdimReport> {
    let k = embed.k();
    let log_eps = (1.0 / eps).ln();
    let gates_ok = 2.0f64.ln() < tau * log_eps && log_eps > 1.0;
    let log_a_unit = cube_covering_number(embed.value_dim, eps).ln();

    // Spanning bound for the payload image.
    let cover = polytope_cover_count(&embed.gmap, eps, Norm::Linf)?;
    if !cover.coverage_ok {
        return Err(Error::CertificationFailed(
            "payload lattice cover failed its coverage check".into(),
        ));
    }
    let payload_log_a = (cover.count as f64).ln();
    let payload_log_bound =
        (n_block as f64).powi(k as i32) * (mdim_est + tau) * log_eps;

    let mut rows = Vec::new();
    for &r in r_grid {
        let ball = ball_points(r, k)?;
        let cells = ball.len();
        let budget = tau * ball_volume(k, r) / log_a_unit;

        // Residual per sample, taking the worst.
        let mut residual_cells = 0usize;
        let mut block_count = 0usize;
        for (si, _) in painted_samples.iter().enumerate() {
            let lifted = &lifted_per_sample[si];
            // Blocks with W(x, n) ⊆ B_R: |n| + L + sqrt k <= R suffices.
            let blocks: Vec<(LatticePoint, LatticePoint)> = deep_blocks(lifted, n_block, &ball)?
                .into_iter()
                .filter(|(n, _)| n.norm() + lifted.l_syn + (k as f64).sqrt() <= r)
                .collect();
            let mut covered = LatticeSet::new(k);
            let block_cells = crate::lattice::cube_window(n_block, k)?;
            for (_, a) in &blocks {
                for c in block_cells.iter() {
                    covered.insert(a.add(c));
                }
            }
            let residual = ball.iter().filter(|m| !covered.contains(m)).count();
            if residual >= residual_cells {
                residual_cells = residual;
                block_count = blocks.len();
            }
        }
        let residual_ok = (residual_cells as f64) < budget;

        // Measured covering number of the painted images over the ball.
        let images: Vec<Vec<f64>> = painted_samples
            .iter()
            .map(|(painted, _)| {
                let mut v = Vec::with_capacity(cells * embed.value_dim);
                for m in ball.iter() {
                    v.extend(painted.cells[m].value.iter().copied());
                }
                v
            })
            .collect();
        let metric = DenseMetric::from_points(&images, Norm::Linf);
        let a_measured = dimension::covering_number(&metric, eps)?;
        let measured_log_a = (a_measured.exact.unwrap_or(a_measured.greedy) as f64).ln();
        let chain_bound = cells as f64 * (mdim_est + 2.0 * tau) * log_eps
            + tau * ball_volume(k, r);

        rows.push(MmdimRow {
            r,
            lattice_cells: cells,
            block_count,
            residual_cells,
            residual_budget: budget,
            residual_ok,
            measured_log_a,
            chain_bound,
            chain_ok: measured_log_a < chain_bound,
        });
    }

    Ok(MmdimReport {
        rows,
        payload_log_a,
        payload_log_bound,
        log_a_unit,
        gates_ok,
    })
}
