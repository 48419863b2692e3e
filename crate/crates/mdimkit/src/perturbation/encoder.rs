//! The two-channel construction: a first channel that paints a
//! position-indexed window map into the lifted Voronoi tiles (encoding the
//! tiling into the trajectory), a decoder that recovers a pseudo-tiling of
//! `[0,1]`-valued lattice functions from any trajectory window, and a second
//! channel painted through the decoded pseudo-tiling. Verification re-runs
//! the decoding chain on sampled pairs.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_points, LatticePoint, LatticeSet};
use crate::perturbation::embedding::{certified_window_map, Observable, WindowEmbedding};
use crate::perturbation::palette::PairReport;
use crate::perturbation::tiles::{alpha_cutoff, block_anchor, PaintedCell, TilePaintedMap};

use crate::simplicial::generic::{perturb_generic, GenericCert, TargetTag};
use crate::simplicial::qp::{image_distance, maps_min_distance};
use crate::simplicial::{Barycentric, LinearMap, Norm, SimplicialComplex};
use crate::systems::metric::MetricParams;
use crate::systems::{CellValue, FieldedWindow, PointWindow};
use crate::voronoi::LiftedCenters;
use crate::{Error, Result};

/// The first-channel apparatus: `F : P x {|n| < L + sqrt k N} -> K^{[N]}`
/// with the closeness condition certified on the pool and the
/// window-restriction general-position certificate, plus the separation
/// margin `tau` of the decoder sets.
pub struct Encoder {
    pub n_block: usize,
    pub n_prime: usize,
    pub eps: f64,
    pub delta: f64,
    pub tau: f64,
    /// `L + sqrt k * N`.
    pub q_range: f64,
    /// Index positions `|n| < q_range`, sorted; copy `j` of the replicated
    /// complex encodes position `q_index[j]`.
    pub q_index: Vec<LatticePoint>,
    pub embed: WindowEmbedding,
    /// Per-position image maps `Q_n` (the decoder sets).
    q_maps: Vec<LinearMap>,
    /// Minimum pairwise distance between restricted decoder sets.
    pub q_separation: f64,
}

impl Encoder {
    pub fn k(&self) -> usize {
        self.embed.k()
    }

    pub fn q_position(&self, n: &LatticePoint) -> Option<usize> {
        self.q_index.iter().position(|p| p == n)
    }

    /// `beta(t) = max(0, 1 - t / tau)`.
    pub fn beta_cutoff(&self, t: f64) -> f64 {
        (1.0 - t / self.tau).max(0.0)
    }
}

/// Build the first-channel apparatus.
///
/// The pool is covered at `eps` under `d_{[N]}`; the base linear map
/// approximates the block observable within `delta`; the replicated,
/// perturbed map carries the window-restriction certificate (restrictions of
/// side `N/2` affinely independent in tuples of size `(N/2)^k D + 1`). `tau`
/// is 90% of the measured minimum distance between distinct restricted
/// decoder sets, and must be positive.
#[allow(clippy::too_many_arguments)]
pub fn build_encoder(
    pool: Vec<PointWindow>,
    k: usize,
    n_block: usize,
    l_syn: f64,
    s_overshoot: f64,
    observable: Observable,
    eps: f64,
    delta: f64,
    params: MetricParams,
    seed: u64,
    cap: u64,
) -> Result<Encoder> {
    if n_block % 2 != 0 || n_block == 0 {
        return Err(Error::InvalidParameter(format!(
            "the block side N must be even and positive, got {n_block}"
        )));
    }
    let sqrt_k = (k as f64).sqrt();
    let q_range = l_syn + sqrt_k * n_block as f64;
    let q_index: Vec<LatticePoint> = ball_points((q_range - 1e-9).max(0.0), k)?
        .iter()
        .filter(|p| p.norm() < q_range)
        .cloned()
        .collect();

    let omega = crate::lattice::cube_window(n_block, k)?;
    let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
    let dim_v = observable.dim();
    let tag = TargetTag::WindowRestriction {
        n_small: n_block / 2,
        n_big: n_block,
        dim_v,
        k,
    };
    let embed = certified_window_map(
        pool,
        omega,
        cells,
        observable,
        eps,
        delta,
        params,
        Some((&tag, seed, cap)),
        q_index.len(),
    )?;

    // Per-position decoder maps Q_n (copy slices of the replicated map).
    let base_vertices = embed.nerve.complex.vertex_count();
    let q_maps: Vec<LinearMap> = (0..q_index.len())
        .map(|j| {
            let images: Vec<Vec<num_rational::BigRational>> = (0..base_vertices)
                .map(|v| embed.gmap.vertex_image(j * base_vertices + v).to_vec())
                .collect();
            LinearMap::new(embed.nerve.complex.clone(), images)
        })
        .collect::<Result<_>>()?;

    // tau: minimum distance between distinct restricted decoder sets
    // Q_m|_{a+[N/2]}, over offsets a in [N/2+1]^k.
    let half = n_block / 2;
    let big_cells = crate::lattice::box_points(&vec![0; k], &vec![n_block as i64 - 1; k]);
    let offsets = crate::lattice::box_points(&vec![0; k], &vec![half as i64; k]);
    let coord_sets: Vec<Vec<usize>> = offsets
        .iter()
        .map(|a| {
            let small = crate::lattice::box_points(&vec![0; k], &vec![half as i64 - 1; k]);
            small
                .iter()
                .flat_map(|c| {
                    let shifted: Vec<i64> = c.0.iter().zip(&a.0).map(|(x, o)| x + o).collect();
                    let ci = big_cells
                        .iter()
                        .position(|b| b.0 == shifted)
                        .expect("cell in range");
                    (0..dim_v).map(move |d| ci * dim_v + d)
                })
                .collect()
        })
        .collect();

    let mut q_separation = f64::INFINITY;
    let items: Vec<(usize, usize)> = (0..q_maps.len())
        .flat_map(|j| (0..coord_sets.len()).map(move |a| (j, a)))
        .collect();
    use rayon::prelude::*;
    let mins: Vec<f64> = (0..items.len())
        .into_par_iter()
        .map(|i| {
            let (ja, aa) = items[i];
            let mut local = f64::INFINITY;
            for &(jb, ab) in &items[i + 1..] {
                let d = maps_min_distance(
                    &q_maps[ja],
                    Some(&coord_sets[aa]),
                    &q_maps[jb],
                    Some(&coord_sets[ab]),
                );
                local = local.min(d);
            }
            local
        })
        .collect();
    for m in mins {
        q_separation = q_separation.min(m);
    }
    if !(q_separation > 1e-9) {
        return Err(Error::CertificationFailed(format!(
            "decoder sets are not separated: min restricted distance {q_separation}"
        )));
    }

    Ok(Encoder {
        n_block,
        n_prime: (s_overshoot * n_block as f64).ceil() as usize,
        eps,
        delta,
        tau: 0.9 * q_separation,
        q_range,
        q_index,
        embed,
        q_maps,
        q_separation,
    })
}

/// First channel: paint `F(pi(T^a x), n - a)` into the tiles.
pub fn encode_g1(
    x: &FieldedWindow,
    lifted: &LiftedCenters,
    enc: &Encoder,
    out_window: &LatticeSet,
) -> Result<TilePaintedMap> {
    let mut cells = BTreeMap::new();
    for m in out_window.iter() {
        let u = m.as_f64();
        let owner = lifted.owner_at(&u, -lifted.h_plane)?;
        let dist = lifted.w_boundary_distance(&owner, &u)?;
        let f_val = enc.embed.observable.eval(&x.point, m)?;
        let record = if dist <= 0.0 {
            PaintedCell {
                value: f_val,
                owner: owner.0.clone(),
                boundary_dist: dist,
                anchor: None,
            }
        } else {
            let n_shift = owner.sub(m);
            let a = block_anchor(&n_shift, enc.n_block);
            let pos = n_shift.sub(&a);
            let copy = enc.q_position(&pos).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "|n - a| = {} exceeds the index range {}",
                    pos.norm(),
                    enc.q_range
                ))
            })?;
            let eval_at = a.add(m);
            let full = enc.embed.eval_copy(&x.point, &eval_at, copy)?;
            let cell_idx = enc
                .embed
                .target_cells
                .iter()
                .position(|c| *c == a.neg())
                .expect("block cell");
            let dim = enc.embed.value_dim;
            let f_block = full[cell_idx * dim..(cell_idx + 1) * dim].to_vec();
            let alpha = alpha_cutoff(dist);
            PaintedCell {
                value: f_val
                    .iter()
                    .zip(&f_block)
                    .map(|(fv, bv)| (1.0 - alpha) * fv + alpha * bv)
                    .collect(),
                owner: owner.0.clone(),
                boundary_dist: dist,
                anchor: Some(eval_at.0.clone()),
            }
        };
        cells.insert(m.clone(), record);
    }
    Ok(TilePaintedMap { cells })
}

/// View a painted map as a trajectory window of vector cells.
pub fn painted_to_window(painted: &TilePaintedMap, k: usize, id: &str) -> PointWindow {
    let mut w = PointWindow::new(k, id);
    for (m, cell) in &painted.cells {
        w.insert(m.clone(), CellValue::vector(cell.value.clone()));
    }
    w
}

/// A decoded pseudo-tiling: per index `n`, a `[0,1]`-valued lattice function
/// supported near `n + [N]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoTiling {
    pub w: BTreeMap<LatticePoint, BTreeMap<LatticePoint, f64>>,
}

impl PseudoTiling {
    pub fn value(&self, n: &LatticePoint, t: &LatticePoint) -> f64 {
        self.w
            .get(n)
            .and_then(|row| row.get(t))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Decode the pseudo-tiling of a trajectory window:
/// `W_n(t) = min(1, sum_{|a-n| < L + sqrt k N} beta(dist(omega|_{a+[N]},
/// Q_{n-a})) 1_{[N]}(t-a))`, with the distance computed by the QP point-to-
/// image routine.
pub fn decode_pseudo_tiling(
    omega: &PointWindow,
    enc: &Encoder,
    n_region: &LatticeSet,
    t_region: &LatticeSet,
) -> Result<PseudoTiling> {
    let k = enc.k();
    let block_cells: Vec<LatticePoint> = crate::lattice::cube_window(enc.n_block, k)?
        .iter()
        .cloned()
        .collect();
    let dim = enc.embed.value_dim;

    // beta(dist(omega|_{a+[N]}, Q_j)) cached per (a, j).
    let mut beta_cache: HashMap<(Vec<i64>, usize), f64> = HashMap::new();
    let mut beta_at = |a: &LatticePoint, j: usize| -> Result<f64> {
        if let Some(&b) = beta_cache.get(&(a.0.clone(), j)) {
            return Ok(b);
        }
        let mut block = Vec::with_capacity(block_cells.len() * dim);
        for c in &block_cells {
            let cell = omega.require_cell(&a.add(c), "decode_pseudo_tiling")?;
            let v = cell
                .vector
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("decoder needs vector cells".into()))?;
            block.extend(v.iter().copied());
        }
        let d = image_distance(&enc.q_maps[j], &block);
        let b = enc.beta_cutoff(d);
        beta_cache.insert((a.0.clone(), j), b);
        Ok(b)
    };

    let mut w = BTreeMap::new();
    for n in n_region.iter() {
        let mut row = BTreeMap::new();
        for t in t_region.iter() {
            // Contributing anchors: t - [N], restricted to |a - n| < range.
            let mut total = 0.0f64;
            for c in &block_cells {
                let a = t.sub(c);
                let rel = n.sub(&a);
                if rel.norm() >= enc.q_range {
                    continue;
                }
                if let Some(j) = enc.q_position(&rel) {
                    total += beta_at(&a, j)?;
                    if total >= 1.0 {
                        break;
                    }
                }
            }
            let v = total.min(1.0);
            if v > 0.0 {
                row.insert(t.clone(), v);
            }
        }
        w.insert(n.clone(), row);
    }
    Ok(PseudoTiling { w })
}

/// Second-channel apparatus: per-position eps-embeddings `pi_n` of the
/// elongated windows `[N] ∪ (ceil((1-s)n) + [N'])`, and a linear map `G` on
/// their disjoint union into `K^{[N]}` close to the block observable, with
/// an embedding certificate.
pub struct G2Apparatus {
    /// `L + 3 sqrt k N`.
    pub range3: f64,
    pub pi_index: Vec<LatticePoint>,
    pub pi_family: Vec<WindowEmbedding>,
    pub union_complex: SimplicialComplex,
    pub vertex_offsets: Vec<usize>,
    pub g_map: LinearMap,
    pub g_cert: GenericCert,
    pub sup_err: f64,
    pub n_block: usize,
}

/// The elongated metric window of position `n`: `[N] ∪ (ceil((1-s)n) + [N'])`.
pub fn elongated_window(
    n: &LatticePoint,
    n_block: usize,
    n_prime: usize,
    s: f64,
) -> Result<LatticeSet> {
    let k = n.dim();
    let base = crate::lattice::cube_window(n_block, k)?;
    let offset = LatticePoint(
        n.0.iter()
            .map(|&c| ((1.0 - s) * c as f64).ceil() as i64)
            .collect(),
    );
    let far = crate::lattice::cube_window(n_prime, k)?.translate(&offset);
    Ok(base.union(&far))
}

/// Build the second-channel apparatus from per-position pools.
#[allow(clippy::too_many_arguments)]
pub fn build_g2(
    pool_for: &dyn Fn(&LatticeSet) -> Result<Vec<PointWindow>>,
    k: usize,
    enc: &Encoder,
    l_syn: f64,
    s_overshoot: f64,
    observable: Observable,
    params: MetricParams,
    seed: u64,
    cap: u64,
) -> Result<G2Apparatus> {
    let sqrt_k = (k as f64).sqrt();
    let n_block = enc.n_block;
    let range3 = l_syn + 3.0 * sqrt_k * n_block as f64;
    let pi_index: Vec<LatticePoint> = ball_points((range3 - 1e-9).max(0.0), k)?
        .iter()
        .filter(|p| p.norm() < range3)
        .cloned()
        .collect();

    let block = crate::lattice::cube_window(n_block, k)?;
    let block_cells: Vec<LatticePoint> = block.iter().cloned().collect();
    let dim_v = observable.dim();
    let target_n = dim_v * block_cells.len();

    let mut pi_family = Vec::with_capacity(pi_index.len());
    for n in &pi_index {
        let omega = elongated_window(n, n_block, enc.n_prime, s_overshoot)?;
        let pool = pool_for(&omega)?;
        let emb = certified_window_map(
            pool,
            omega,
            block_cells.clone(),
            observable.clone(),
            enc.eps,
            enc.delta,
            params.clone(),
            None,
            1,
        )?;
        if emb.nerve.complex.dim() * 2 >= target_n {
            return Err(Error::InvalidParameter(format!(
                "dim R_n = {} too large for a linear embedding into {target_n} coordinates",
                emb.nerve.complex.dim()
            )));
        }
        pi_family.push(emb);
    }

    // Disjoint union of the nerves, with the per-vertex base images.
    let complexes: Vec<&SimplicialComplex> = pi_family.iter().map(|e| &e.nerve.complex).collect();
    let (union_complex, vertex_offsets) = SimplicialComplex::disjoint_union(&complexes);
    let mut base_images: Vec<Vec<f64>> = Vec::with_capacity(union_complex.vertex_count());
    let mut max_base_err = 0.0f64;
    for emb in &pi_family {
        max_base_err = max_base_err.max(emb.sup_err);
        for v in 0..emb.nerve.complex.vertex_count() {
            base_images.push(emb.gmap.vertex_image_f64(v).to_vec());
        }
    }
    let gamma = ((enc.delta - max_base_err) / 4.0).min(0.25);
    if gamma <= 0.0 {
        return Err(Error::CertificationFailed(
            "no budget left for the generic perturbation of G".into(),
        ));
    }
    let tag = TargetTag::EmbeddingCube { n: target_n };
    let (g_map, g_cert) = perturb_generic(&union_complex, &base_images, gamma, &tag, seed, cap)?;

    // Re-measure |G(pi_n(x)) - I_f(x)|_[N]|_inf over the pools.
    let mut sup_err = 0.0f64;
    for (j, emb) in pi_family.iter().enumerate() {
        let origin = LatticePoint::origin(k);
        for w in &emb.pool {
            let b = emb.project(w, &origin)?;
            let shifted = Barycentric {
                weights: b
                    .weights
                    .iter()
                    .map(|&(v, wt)| (vertex_offsets[j] + v, wt))
                    .collect(),
            };
            let img = g_map.eval_f64(&shifted);
            let expect = emb.observable.eval_block(w, &origin, &block_cells)?;
            sup_err = sup_err.max(Norm::Linf.dist(&img, &expect));
        }
    }
    if sup_err >= enc.delta {
        return Err(Error::CertificationFailed(format!(
            "G misses the closeness budget: {sup_err} >= {}",
            enc.delta
        )));
    }

    Ok(G2Apparatus {
        range3,
        pi_index,
        pi_family,
        union_complex,
        vertex_offsets,
        g_map,
        g_cert,
        sup_err,
        n_block,
    })
}

impl G2Apparatus {
    pub fn pi_position(&self, n: &LatticePoint) -> Option<usize> {
        self.pi_index.iter().position(|p| p == n)
    }

    /// `G(pi_j(T^at x))` flattened.
    pub fn eval(&self, j: usize, x: &PointWindow, at: &LatticePoint) -> Result<Vec<f64>> {
        let b = self.pi_family[j].project(x, at)?;
        let shifted = Barycentric {
            weights: b
                .weights
                .iter()
                .map(|&(v, w)| (self.vertex_offsets[j] + v, w))
                .collect(),
        };
        Ok(self.g_map.eval_f64(&shifted))
    }

    /// Barycentric image of `pi_j(T^at x)`.
    pub fn project(&self, j: usize, x: &PointWindow, at: &LatticePoint) -> Result<Barycentric> {
        self.pi_family[j].project(x, at)
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Second channel: blend the decoded pseudo-tiling weights into the payload,
/// `g_2(x) = <f_2(x) + sum_n W_n(0) (G(pi_{n-a_n}(T^{a_n} x))_{-a_n} - f_2)
/// / max(1, sum_n W_n(0))>`.
pub fn encode_g2(
    x: &FieldedWindow,
    enc: &Encoder,
    g2: &G2Apparatus,
    tiling: &PseudoTiling,
    observable: &Observable,
    out_window: &LatticeSet,
) -> Result<TilePaintedMap> {
    let k = enc.k();
    let sqrt_k = (k as f64).sqrt();
    let dim = observable.dim();
    let a_reach = enc.q_range + sqrt_k * enc.n_block as f64; // |n| < L + 2 sqrt k N
    let candidates: Vec<LatticePoint> = ball_points(a_reach, k)?.iter().cloned().collect();

    let mut cells = BTreeMap::new();
    for b in out_window.iter() {
        let f_val = observable.eval(&x.point, b)?;
        // A(T^b x) = {n : W_{n+b}(b) > 0}.
        let mut total = 0.0f64;
        let mut payload_sum = vec![0.0f64; dim];
        for n in &candidates {
            let weight = tiling.value(&n.add(b), b);
            if weight <= 0.0 {
                continue;
            }
            let a_n = block_anchor(n, enc.n_block);
            let rel = n.sub(&a_n);
            let j = g2.pi_position(&rel).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "|n - a_n| = {} exceeds the family range {}",
                    rel.norm(),
                    g2.range3
                ))
            })?;
            let at = a_n.add(b);
            let full = g2.eval(j, &x.point, &at)?;
            let cell_idx = enc
                .embed
                .target_cells
                .iter()
                .position(|c| *c == a_n.neg())
                .expect("block cell");
            for d in 0..dim {
                payload_sum[d] += weight * (full[cell_idx * dim + d] - f_val[d]);
            }
            total += weight;
        }
        let denom = total.max(1.0);
        let value: Vec<f64> = f_val
            .iter()
            .zip(&payload_sum)
            .map(|(fv, ps)| clamp01(fv + ps / denom))
            .collect();
        cells.insert(
            b.clone(),
            PaintedCell {
                value,
                owner: vec![],
                boundary_dist: total,
                anchor: None,
            },
        );
    }
    Ok(TilePaintedMap { cells })
}

/// Find the proof's distinguished block for a pseudo-tiling decoded from the
/// point `x`: the index `n` owning `(0, -sH)`, and the anchor `a ≡ n (mod
/// N)` whose block contains `(1-1/s) n`. Also verifies the index
/// bookkeeping `ceil((1-s)(n-a)) + a = -floor(s t) ∈ -[N']`.
pub fn distinguished_block(
    lifted: &LiftedCenters,
    enc: &Encoder,
) -> Result<(LatticePoint, LatticePoint)> {
    let k = lifted.k();
    let origin = vec![0.0; k];
    let n = lifted.owner_at(&origin, -lifted.s_overshoot * lifted.h_plane)?;
    let s = lifted.s_overshoot;
    let nb = enc.n_block as i64;
    let a = LatticePoint(
        n.0.iter()
            .map(|&c| {
                let t = -(c as f64) / s; // (1-1/s) c - c
                c + nb * (t / nb as f64).floor() as i64
            })
            .collect(),
    );
    // (1-1/s) n ∈ a + [0, N)^k.
    for (i, &ai) in a.0.iter().enumerate() {
        let target = (1.0 - 1.0 / s) * n.0[i] as f64;
        if !(ai as f64 <= target && target < (ai + nb) as f64) {
            return Err(Error::CertificationFailed(format!(
                "anchor {:?} does not capture (1-1/s) n at axis {i}",
                a.0
            )));
        }
    }
    // Index bookkeeping: the origin lies in ceil((1-s)(n-a)) + a + [N'].
    for (i, &ai) in a.0.iter().enumerate() {
        let lhs = ((1.0 - s) * (n.0[i] - ai) as f64).ceil() as i64 + ai;
        if !(lhs <= 0 && 0 < lhs + enc.n_prime as i64) {
            return Err(Error::CertificationFailed(format!(
                "origin outside the elongated window at axis {i}: start {lhs}"
            )));
        }
    }
    Ok((n, a))
}

/// Decode-window geometry derived from one radius: the second channel is
/// painted on `B_r`, the pseudo-tiling is decoded on index/support regions
/// wide enough for every lookup, and the first channel is painted wide
/// enough for every decoder block.
pub struct DecodeRegions {
    pub g1_window: LatticeSet,
    pub g2_window: LatticeSet,
    pub t_region: LatticeSet,
    pub n_region: LatticeSet,
}

pub fn decode_regions(enc: &Encoder, r: f64, k: usize) -> Result<DecodeRegions> {
    let sqrt_k = (k as f64).sqrt();
    let nb = enc.n_block as f64;
    let t_region = ball_points(r, k)?;
    let n_region = ball_points(r + enc.q_range + sqrt_k * nb + 2.0, k)?;
    let g1_window = ball_points(r + 2.0 * sqrt_k * nb + 1.0, k)?;
    let g2_window = ball_points(r, k)?;
    Ok(DecodeRegions {
        g1_window,
        g2_window,
        t_region,
        n_region,
    })
}

/// Two-channel verification: for each pair, compare the painted images of
/// both channels over the decode window; when they agree (to 1e-10), re-run
/// the decoding chain — pseudo-tiling indicator at the distinguished block,
/// payload extraction, injectivity of `G`, the eps-embedding inequality of
/// `pi_n`, and the final windowed distance — and require `d(x, y) < eps`.
/// Image gaps in `(1e-10, 1e-6)` are flagged indeterminate.
pub fn verify_two_channel_pairs(
    pairs: &[(u64, FieldedWindow, FieldedWindow)],
    enc: &Encoder,
    g2: &G2Apparatus,
    decode_radius: f64,
) -> Result<Vec<PairReport>> {
    let k = enc.k();
    let sqrt_k = (k as f64).sqrt();
    let regions = decode_regions(enc, decode_radius, k)?;
    let (out_window, n_region, t_region) = (
        &regions.g2_window,
        &regions.n_region,
        &regions.t_region,
    );
    let mut out = Vec::new();
    for (pair_id, x, y) in pairs {
        let lifted_x = LiftedCenters::from_field(&x.field)?;
        let lifted_y = LiftedCenters::from_field(&y.field)?;
        let g1x = encode_g1(x, &lifted_x, enc, &regions.g1_window)?;
        let g1y = encode_g1(y, &lifted_y, enc, &regions.g1_window)?;
        let wx = painted_to_window(&g1x, k, "g1x");
        let wy = painted_to_window(&g1y, k, "g1y");
        let tiling_x = decode_pseudo_tiling(&wx, enc, n_region, t_region)?;
        let g2x = encode_g2(x, enc, g2, &tiling_x, &enc.embed.observable, out_window)?;
        let tiling_y = decode_pseudo_tiling(&wy, enc, n_region, t_region)?;
        let g2y = encode_g2(y, enc, g2, &tiling_y, &enc.embed.observable, out_window)?;

        let gap1 = image_gap(&g1x, &g1y);
        let gap2 = image_gap(&g2x, &g2y);
        let gap = gap1.max(gap2);
        let mut trace = vec![format!("g1 gap {gap1:.3e}, g2 gap {gap2:.3e}")];

        if gap > 1e-6 {
            let channel = if gap1 > 1e-6 { "g1-differ" } else { "g2-differ" };
            out.push(PairReport {
                pair_id: (*pair_id, 0),
                channel: channel.into(),
                decode_trace: trace,
                verdict: "distinguished".into(),
            });
            continue;
        }
        if gap > 1e-10 {
            out.push(PairReport {
                pair_id: (*pair_id, 0),
                channel: "guard-band".into(),
                decode_trace: trace,
                verdict: "indeterminate".into(),
            });
            continue;
        }

        // Images agree: run the chain on x's apparatus.
        let (n_star, a) = distinguished_block(&lifted_x, enc)?;
        trace.push(format!("distinguished n = {:?}, anchor a = {:?}", n_star.0, a.0));

        // Pseudo-tiling indicator on B_{sqrt k N}((1-1/s) n).
        let s = lifted_x.s_overshoot;
        let center: Vec<f64> = n_star.0.iter().map(|&c| (1.0 - 1.0 / s) * c as f64).collect();
        let mut indicator_ok = true;
        for t in t_region.iter() {
            let dist_c: f64 = t
                .0
                .iter()
                .zip(&center)
                .map(|(&a, &b)| (a as f64 - b) * (a as f64 - b))
                .sum::<f64>()
                .sqrt();
            if dist_c > sqrt_k * enc.n_block as f64 {
                continue;
            }
            if tiling_x.value(&n_star, t) != 1.0 {
                indicator_ok = false;
                trace.push(format!("W_n({:?}) = {} != 1", t.0, tiling_x.value(&n_star, t)));
            }
            for other in n_region.iter() {
                if other != &n_star && tiling_x.value(other, t) != 0.0 {
                    indicator_ok = false;
                    trace.push(format!("W_{:?}({:?}) != 0", other.0, t.0));
                }
            }
        }
        if !indicator_ok {
            out.push(PairReport {
                pair_id: (*pair_id, 0),
                channel: "pseudo-tiling".into(),
                decode_trace: trace,
                verdict: "FAILURE".into(),
            });
            continue;
        }

        // Extract the payload block and check G-injectivity concretely.
        let rel = n_star.sub(&a);
        let j = g2.pi_position(&rel).ok_or_else(|| {
            Error::InvalidParameter(format!("position {:?} outside the family", rel.0))
        })?;
        let px = g2.project(j, &x.point, &a)?;
        let py = g2.project(j, &y.point, &a)?;
        let gx_val = g2.eval(j, &x.point, &a)?;
        let gy_val = g2.eval(j, &y.point, &a)?;

        // Block identity on the distinguished block: the painted second
        // channel equals the payload exactly where the weights are 1/0.
        let block_cells: Vec<LatticePoint> = crate::lattice::cube_window(enc.n_block, k)?
            .iter()
            .cloned()
            .collect();
        if let Some(painted_block) = g2x.block(&a, &block_cells) {
            let claim_gap = Norm::Linf.dist(&painted_block, &gx_val);
            trace.push(format!("g2 block identity gap {claim_gap:.3e}"));
            if claim_gap > 1e-10 {
                out.push(PairReport {
                    pair_id: (*pair_id, 0),
                    channel: "g2-block-identity".into(),
                    decode_trace: trace,
                    verdict: "FAILURE".into(),
                });
                continue;
            }
        }
        let g_gap = Norm::Linf.dist(&gx_val, &gy_val);
        trace.push(format!("G values gap {g_gap:.3e}"));
        if g_gap <= 1e-10 && px.linf_distance(&py) > 1e-9 {
            trace.push("G not injective on the evaluated pair".into());
            out.push(PairReport {
                pair_id: (*pair_id, 0),
                channel: "g2-injectivity".into(),
                decode_trace: trace,
                verdict: "FAILURE".into(),
            });
            continue;
        }

        // eps-embedding inequality of pi_j and the final distance.
        let emb = &g2.pi_family[j];
        let d_omega = emb.window_distance(&x.point, &a, &y.point, &a)?;
        trace.push(format!("d_(elongated window)(T^a x, T^a y) = {d_omega:.3e}"));
        let origin = LatticePoint::origin(k);
        let d_xy = emb.window_distance(&x.point, &origin, &y.point, &origin)?;
        trace.push(format!("d(x, y) <= {d_xy:.3e}"));
        let verdict = if d_omega < enc.eps && d_xy < enc.eps {
            "close-pair-ok"
        } else {
            "FAILURE"
        };
        out.push(PairReport {
            pair_id: (*pair_id, 0),
            channel: "decoded".into(),
            decode_trace: trace,
            verdict: verdict.into(),
        });
    }
    Ok(out)
}

fn image_gap(a: &TilePaintedMap, b: &TilePaintedMap) -> f64 {
    let mut sup = 0.0f64;
    for (m, cell) in &a.cells {
        if let Some(other) = b.cells.get(m) {
            for (x, y) in cell.value.iter().zip(&other.value) {
                sup = sup.max((x - y).abs());
            }
        }
    }
    sup
}
