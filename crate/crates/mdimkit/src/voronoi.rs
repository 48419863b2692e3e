//! Flat and lifted Voronoi cells as nearest-center predicates.
//!
//! Cells are never materialized as polytopes. Membership, boundary distance,
//! and cell enumeration all reduce to nearest-center comparisons, with
//! candidate sets pruned to a provably sufficient radius (documented at each
//! site; no silent truncation). Lattice-cell enumeration is exact integer
//! arithmetic; ties in ownership go to the lexicographically smallest center,
//! turning the overlapping closed cells into a partition.
//!
//! The flat picture has centers in `Z^k`. The lifted picture raises a marker
//! field's support to `(n, 1/phi(n))` in `R^{k+1}` and looks at ownership on
//! the horizontal plane at height `-H`; `W(n)` denotes the slice of the cell
//! of `n` at that height.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_around, box_points, shell, LatticePoint, LatticeSet};
use crate::rng::CounterRng;
use crate::systems::marker::MarkerField;
use crate::{Error, Result};

/// Bucket grid over center points for range queries.
#[derive(Debug, Clone)]
struct Buckets {
    size: i64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    k: usize,
}

impl Buckets {
    fn build(points: &[LatticePoint], size: i64, k: usize) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key: Vec<i64> = p.0.iter().map(|c| c.div_euclid(size)).collect();
            cells.entry(key).or_default().push(i);
        }
        Buckets { size, cells, k }
    }

    /// Indices of points within `radius` of `u` (superset; exact filtering is
    /// the caller's).
    fn near(&self, u: &[f64], radius: f64) -> Vec<usize> {
        debug_assert_eq!(u.len(), self.k);
        let lo: Vec<i64> = u
            .iter()
            .map(|c| ((c - radius).floor() as i64).div_euclid(self.size))
            .collect();
        let hi: Vec<i64> = u
            .iter()
            .map(|c| ((c + radius).ceil() as i64).div_euclid(self.size))
            .collect();
        let mut out = Vec::new();
        for cell in box_points(&lo, &hi) {
            if let Some(ids) = self.cells.get(&cell.0) {
                out.extend_from_slice(ids);
            }
        }
        out
    }
}

fn dist_sq_to(p: &LatticePoint, u: &[f64]) -> f64 {
    p.0.iter()
        .zip(u)
        .map(|(&a, &b)| (a as f64 - b) * (a as f64 - b))
        .sum()
}

// ---------------------------------------------------------------------------
// Flat centers (marker positions in Z^k)
// ---------------------------------------------------------------------------

/// Marker positions `C(x)` with their separation/syndeticity radius `L`.
#[derive(Debug, Clone)]
pub struct FlatCenters {
    centers: Vec<LatticePoint>,
    pub l: f64,
    k: usize,
    buckets: Buckets,
    bbox: (Vec<i64>, Vec<i64>),
}

impl FlatCenters {
    pub fn new(centers: &LatticeSet, l: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("no centers".into()));
        }
        let k = centers.k();
        let pts: Vec<LatticePoint> = centers.iter().cloned().collect();
        let buckets = Buckets::build(&pts, (l.ceil() as i64).max(1), k);
        for (i, a) in pts.iter().enumerate() {
            for j in buckets.near(&a.as_f64(), l) {
                let b = &pts[j];
                if j != i && (a.dist_sq(b) as f64) < l * l {
                    return Err(Error::MarkerSeparation {
                        a: a.0.clone(),
                        b: b.0.clone(),
                        dist: a.dist(b),
                        min: l,
                    });
                }
            }
        }
        let bbox = centers.bounding_box().expect("nonempty");
        Ok(FlatCenters {
            centers: pts,
            l,
            k,
            buckets,
            bbox,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn centers(&self) -> &[LatticePoint] {
        &self.centers
    }

    /// Nearest center to `u`, lexicographically smallest on ties.
    ///
    /// Syndeticity puts a center within `L` of `u`, so only centers with
    /// `|c - u| <= L + 1` can win or tie; the bucket scan uses that radius.
    pub fn owner(&self, u: &[f64]) -> Result<LatticePoint> {
        let mut best: Option<(f64, &LatticePoint)> = None;
        for i in self.buckets.near(u, self.l + 1.0) {
            let c = &self.centers[i];
            let d = dist_sq_to(c, u);
            best = match best {
                None => Some((d, c)),
                Some((bd, bc)) => {
                    if d < bd || (d == bd && c < bc) {
                        Some((d, c))
                    } else {
                        Some((bd, bc))
                    }
                }
            };
        }
        match best {
            Some((d, c)) if d <= self.l * self.l => Ok(c.clone()),
            _ => Err(Error::WindowTooSmall {
                context: "flat_owner".into(),
                required: format!("a center within L = {} of {:?}", self.l, u),
            }),
        }
    }

    /// Exact closed-cell membership of a lattice point: `|m - n| <= |m - c|`
    /// for every center `c`, in integer arithmetic.
    pub fn cell_contains(&self, n: &LatticePoint, m: &LatticePoint) -> bool {
        let dn = m.dist_sq(n);
        // Any center beating n satisfies |c - m| <= |m - n|, so scanning the
        // bucket radius |m - n| + 1 sees every competitor.
        let m_f64 = m.as_f64();
        for i in self.buckets.near(&m_f64, (dn as f64).sqrt() + 1.0) {
            if m.dist_sq(&self.centers[i]) < dn {
                return false;
            }
        }
        true
    }

    /// Lattice points of the closed cell of `n`, enumerated over
    /// `B_{L + sqrt k}(n)`. Sufficiency: syndeticity gives every `u` a center
    /// within `L`, so the cell of `n` lies in `B_L(n)` and its lattice points
    /// in `B_{L + sqrt k}(n)`.
    pub fn cell_lattice_points(&self, n: &LatticePoint) -> Result<LatticeSet> {
        let reach = self.l + (self.k as f64).sqrt();
        let mut out = LatticeSet::new(self.k);
        for m in ball_around(n, reach)?.iter() {
            if self.cell_contains(n, m) {
                out.insert(m.clone());
            }
        }
        Ok(out)
    }

    /// The unique center whose cell contains `m` one step deep
    /// (`B_1(m) ∩ Z^k` inside the closed cell), if any. Interiors of
    /// distinct cells are disjoint: a point of two closed cells lies on
    /// their bisector, and some axis neighbor then leaves one of them.
    pub fn interior1_owner(&self, m: &LatticePoint) -> Result<Option<LatticePoint>> {
        let probe = ball_around(m, 1.0)?;
        let m_f64 = m.as_f64();
        for i in self.buckets.near(&m_f64, self.l + 1.0) {
            let n = &self.centers[i];
            if probe.iter().all(|q| self.cell_contains(n, q)) {
                return Ok(Some(n.clone()));
            }
        }
        // Distinguish "deep in no cell" from "outside the certified window".
        self.owner(&m_f64)?;
        Ok(None)
    }

    /// Distance from `u` (inside the cell of `n`) to the cell boundary: the
    /// minimum over competing centers of the distance to the bisector
    /// hyperplane, `(|m-u|^2 - |n-u|^2) / (2|m-n|)`. For an intersection of
    /// half-spaces this is the exact inradius at `u`, redundant constraints
    /// included.
    ///
    /// Competitors with `|m - u| > 5L` are provably slack: their bisector
    /// distance exceeds `((5L)^2 - L^2) / (2 * 6L) = 2L`, while the true
    /// boundary distance is at most `L` (cells sit inside `B_L(center)`).
    pub fn boundary_distance(&self, n: &LatticePoint, u: &[f64]) -> Result<f64> {
        if self.owner(u)? != *n {
            return Err(Error::InvalidParameter(format!(
                "point {u:?} is not owned by {:?}",
                n.0
            )));
        }
        let mut best = f64::INFINITY;
        for i in self.buckets.near(u, 5.0 * self.l + 1.0) {
            let m = &self.centers[i];
            if m == n {
                continue;
            }
            let num = dist_sq_to(m, u) - dist_sq_to(n, u);
            let den = 2.0 * m.dist(n);
            best = best.min(num / den);
        }
        Ok(best.max(0.0))
    }

    fn require_interior(&self, n: &LatticePoint) -> Result<()> {
        let (lo, hi) = &self.bbox;
        let margin = (2.0 * self.l).ceil() as i64;
        let inside = n
            .0
            .iter()
            .zip(lo.iter().zip(hi.iter()))
            .all(|(&c, (&a, &b))| c - a > margin && b - c > margin);
        if inside {
            Ok(())
        } else {
            Err(Error::WindowTooSmall {
                context: "flat_cell_check".into(),
                required: format!("center {:?} more than 2L from the window edge", n.0),
            })
        }
    }
}

/// Per-cell report of the flat-cell size check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub center: Vec<i64>,
    pub lattice_points: usize,
    pub boundary_total: usize,
    pub boundary_inside: usize,
    pub ratio: f64,
    /// `((1+2(R+sqrt k)/L)^k - (1-2(R+sqrt k)/L)^k) / (1-2 sqrt k/L)^k`.
    pub bound_value: f64,
    pub ratio_le_bound: bool,
    pub ratio_lt_inv_r: bool,
}

/// The displayed cell-size bound.
pub fn flat_ratio_bound(k: usize, l: f64, r: f64) -> f64 {
    let sqrt_k = (k as f64).sqrt();
    let a = 2.0 * (r + sqrt_k) / l;
    ((1.0 + a).powi(k as i32) - (1.0 - a).powi(k as i32)) / (1.0 - 2.0 * sqrt_k / l).powi(k as i32)
}

/// Enumerate a flat cell and its `R`-shell exactly and compare the ratio
/// against the displayed bound.
pub fn flat_cell_check(centers: &FlatCenters, n: &LatticePoint, r: f64) -> Result<CellReport> {
    let k = centers.k();
    let sqrt_k = (k as f64).sqrt();
    if centers.l <= 2.0 * sqrt_k {
        return Err(Error::InvalidParameter(format!(
            "flat_cell_check needs L > 2 sqrt k, got L = {}",
            centers.l
        )));
    }
    centers.require_interior(n)?;
    let cell = centers.cell_lattice_points(n)?;
    let (boundary, _) = shell(&cell, r)?;
    let boundary_inside = boundary.iter().filter(|p| cell.contains(p)).count();
    let ratio = boundary.len() as f64 / cell.len() as f64;
    let bound_value = flat_ratio_bound(k, centers.l, r);
    Ok(CellReport {
        center: n.0.clone(),
        lattice_points: cell.len(),
        boundary_total: boundary.len(),
        boundary_inside,
        ratio,
        bound_value,
        ratio_le_bound: ratio <= bound_value,
        ratio_lt_inv_r: ratio < 1.0 / r,
    })
}

// ---------------------------------------------------------------------------
// Lifted centers (marker field raised to R^{k+1})
// ---------------------------------------------------------------------------

/// The lifted center set `{(n, 1/phi(n)) : phi(n) > 0}` of a marker field.
#[derive(Debug, Clone)]
pub struct LiftedCenters {
    k: usize,
    positions: Vec<LatticePoint>,
    /// Heights `1/phi(n) >= 1`, aligned with `positions`.
    heights: Vec<f64>,
    pub m_sep: f64,
    pub l_syn: f64,
    pub h_plane: f64,
    pub s_overshoot: f64,
    buckets: Buckets,
    window_bbox: (Vec<i64>, Vec<i64>),
}

impl LiftedCenters {
    pub fn from_field(field: &MarkerField) -> Result<Self> {
        field.validate()?;
        let mut positions = Vec::new();
        let mut heights = Vec::new();
        for (p, &phi) in field.support() {
            positions.push(p.clone());
            heights.push(1.0 / phi);
        }
        if positions.is_empty() {
            return Err(Error::InvalidParameter("empty marker support".into()));
        }
        let buckets = Buckets::build(&positions, (field.m_sep.ceil() as i64).max(1), field.k);
        let window_bbox = field
            .window
            .bounding_box()
            .ok_or_else(|| Error::InvalidParameter("empty field window".into()))?;
        Ok(LiftedCenters {
            k: field.k,
            positions,
            heights,
            m_sep: field.m_sep,
            l_syn: field.l_syn,
            h_plane: field.h_height,
            s_overshoot: field.s_overshoot,
            buckets,
            window_bbox,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn height_of(&self, n: &LatticePoint) -> Option<f64> {
        self.positions
            .iter()
            .position(|p| p == n)
            .map(|i| self.heights[i])
    }

    /// Support positions with their lifted heights.
    pub fn support_points(&self) -> Vec<(LatticePoint, f64)> {
        self.positions
            .iter()
            .cloned()
            .zip(self.heights.iter().copied())
            .collect()
    }

    /// Horizontal pruning radius for ownership queries at height `h`.
    ///
    /// A phi = 1 center sits within `A = L + sqrt k` of any certified `u`
    /// (syndeticity at the nearest lattice point), at squared lifted distance
    /// at most `A^2 + (h-1)^2`. A competitor at horizontal distance `rho` and
    /// height `t >= 1` is at squared distance `>= rho^2 + g(h)^2` with
    /// `g(h) = min_{t >= 1} |h - t|`, so it loses strictly once
    /// `rho^2 > A^2 + (h-1)^2 - g(h)^2`. (For `h = -H` this is
    /// `A^2 + 2H + 1`, far smaller than the naive `A^2 + (H+1)^2`.)
    fn owner_radius(&self, h: f64) -> f64 {
        let a = self.l_syn + (self.k as f64).sqrt();
        let g = if h >= 1.0 { 0.0 } else { 1.0 - h };
        (a * a + (h - 1.0) * (h - 1.0) - g * g).max(0.0).sqrt() + 1.0
    }

    /// Nearest lifted center to `(u, h)`, lexicographically smallest on ties.
    pub fn owner_at(&self, u: &[f64], h: f64) -> Result<LatticePoint> {
        let radius = self.owner_radius(h);
        let mut best: Option<(f64, &LatticePoint)> = None;
        for i in self.buckets.near(u, radius) {
            let c = &self.positions[i];
            let dh = h - self.heights[i];
            let d = dist_sq_to(c, u) + dh * dh;
            best = match best {
                None => Some((d, c)),
                Some((bd, bc)) => {
                    if d < bd || (d == bd && c < bc) {
                        Some((d, c))
                    } else {
                        Some((bd, bc))
                    }
                }
            };
        }
        // Coverage: a phi = 1 center within A of u certifies the query.
        let a = self.l_syn + (self.k as f64).sqrt();
        let covered = self
            .buckets
            .near(u, a)
            .into_iter()
            .any(|i| self.heights[i] == 1.0 && dist_sq_to(&self.positions[i], u) <= a * a);
        match best {
            Some((_, c)) if covered => Ok(c.clone()),
            _ => Err(Error::WindowTooSmall {
                context: "lifted_owner".into(),
                required: format!(
                    "a phi = 1 center within L + sqrt k = {a} of {u:?} (point outside the certified window)"
                ),
            }),
        }
    }

    /// Distance from `u` in `W(n)` (the height `-H` slice of the cell of
    /// `n`) to the slice boundary: minimum over competing centers `m` of
    /// `(|m-u|^2 - |n-u|^2 + (H+t_m)^2 - (H+t_n)^2) / (2|m-n|)`, which is the
    /// exact inradius of the constraint intersection at `u` (redundant
    /// constraints can only be slack).
    ///
    /// Pruning: with `A = L + sqrt k`, `|n - u| < A`, `t_n <= 2` for cells
    /// meeting the plane, and `t_m >= 1`, the numerator is at least
    /// `|m-u|^2 - A^2 - (2H + 3)`; a competitor with
    /// `|m-u| > 2A + sqrt(9A^2 + 2H + 3)` therefore has bisector distance
    /// `> 2A`, beyond the diameter of `W(n)`.
    pub fn w_boundary_distance(&self, n: &LatticePoint, u: &[f64]) -> Result<f64> {
        let owner = self.owner_at(u, -self.h_plane)?;
        if owner != *n {
            return Err(Error::InvalidParameter(format!(
                "point {u:?} at height -H is owned by {:?}, not {:?}",
                owner.0, n.0
            )));
        }
        let t_n = self
            .height_of(n)
            .ok_or_else(|| Error::InvalidParameter(format!("{:?} is not a lifted center", n.0)))?;
        let a = self.l_syn + (self.k as f64).sqrt();
        let radius = 2.0 * a + (9.0 * a * a + 2.0 * self.h_plane + 3.0).sqrt() + 1.0;
        let h = self.h_plane;
        let mut best = f64::INFINITY;
        for i in self.buckets.near(u, radius) {
            let m = &self.positions[i];
            if m == n {
                continue;
            }
            let t_m = self.heights[i];
            let num = dist_sq_to(m, u) - dist_sq_to(n, u) + (h + t_m) * (h + t_m)
                - (h + t_n) * (h + t_n);
            let den = 2.0 * m.dist(n);
            best = best.min(num / den);
        }
        Ok(best.max(0.0))
    }

    /// Horizontal box in which ownership queries never hit a coverage error
    /// (window bounding box shrunk by `margin`).
    pub fn safe_box(&self, margin: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = &self.window_bbox;
        let lo: Vec<f64> = lo.iter().map(|&c| c as f64 + margin).collect();
        let hi: Vec<f64> = hi.iter().map(|&c| c as f64 - margin).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::WindowTooSmall {
                context: "safe_box".into(),
                required: format!("window wider than twice the margin {margin}"),
            });
        }
        Ok((lo, hi))
    }
}

// ---------------------------------------------------------------------------
// Lifted-cell checks
// ---------------------------------------------------------------------------

/// One sub-check outcome: probes run, probes gated (hypothesis unsatisfiable
/// at the probe, e.g. "M below threshold"), and violations with witnesses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub probes: u64,
    pub gated: u64,
    pub violations: Vec<ProbeWitness>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeWitness {
    pub point: Vec<f64>,
    pub detail: String,
}

impl ProbeOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Report of the four lifted-cell properties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma41Report {
    /// Balls of radius `M/2` around lifted centers stay in their cell.
    pub ball_in_cell: ProbeOutcome,
    /// Cells meeting height `-H` have `1 <= 1/phi <= 2`.
    pub height_range: ProbeOutcome,
    /// Owners at height `-H` satisfy `|u - n| < L + sqrt k`.
    pub owner_close: ProbeOutcome,
    /// Pulled-down ball: `(a, -sH)` in the cell of `n` implies
    /// `B_r(a/s + (1 - 1/s) n)` lies in `W(n)`, with
    /// `r = (s-1)HM / (2(sH+t)) - 4(L + sqrt k)/H`.
    pub pulled_ball: ProbeOutcome,
}

impl Lemma41Report {
    pub fn all_passed(&self) -> bool {
        self.ball_in_cell.passed()
            && self.height_range.passed()
            && self.owner_close.passed()
            && self.pulled_ball.passed()
    }
}

/// The explicit pulled-down ball radius minus the explicit center-offset
/// bound: `(s-1)HM / (2(sH+t)) - 4(L + sqrt k)/H`.
pub fn pulled_ball_radius(m: f64, l: f64, h: f64, s: f64, k: usize, t: f64) -> f64 {
    let a = l + (k as f64).sqrt();
    (s - 1.0) * h * m / (2.0 * (s * h + t)) - 4.0 * a / h
}

/// Seeded probe suite for the four lifted-cell properties. `demanded_r` caps
/// the pulled-ball radius; probes where even the formula radius is
/// nonpositive are gated ("M below threshold"), not failed.
pub fn lemma41_check(
    centers: &LiftedCenters,
    probes_per_check: u64,
    demanded_r: Option<f64>,
    seed: u64,
) -> Result<Lemma41Report> {
    use rayon::prelude::*;

    let k = centers.k();
    let sqrt_k = (k as f64).sqrt();
    let a_bound = centers.l_syn + sqrt_k;
    let h = centers.h_plane;
    let s = centers.s_overshoot;
    let m = centers.m_sep;

    // Support points far enough from the window edge that every probe is
    // certified.
    let margin = m / 2.0 + a_bound + 2.0;
    let (lo, hi) = centers.safe_box(margin)?;
    let safe: Vec<usize> = (0..centers.positions.len())
        .filter(|&i| {
            centers.positions[i]
                .0
                .iter()
                .zip(lo.iter().zip(&hi))
                .all(|(&c, (&a, &b))| (c as f64) >= a && (c as f64) <= b)
        })
        .collect();
    if safe.is_empty() {
        return Err(Error::WindowTooSmall {
            context: "lemma41_check".into(),
            required: format!("window with interior margin {margin}"),
        });
    }

    // (1) B_{M/2}(n, 1/phi(n)) stays in the cell of n.
    let check1: Vec<Option<ProbeWitness>> = (0..probes_per_check)
        .into_par_iter()
        .map(|p| {
            let mut rng = CounterRng::new(&[seed, 1, p]);
            let i = safe[rng.next_below(safe.len() as u64) as usize];
            let n = &centers.positions[i];
            let mut lifted_center = n.as_f64();
            lifted_center.push(centers.heights[i]);
            let q = rng.next_in_ball(&lifted_center, m / 2.0);
            let (u, height) = q.split_at(k);
            let owner = centers.owner_at(u, height[0]).expect("certified");
            if owner != *n {
                Some(ProbeWitness {
                    point: q.clone(),
                    detail: format!("owned by {:?}, expected {:?}", owner.0, n.0),
                })
            } else {
                None
            }
        })
        .collect();
    let ball_in_cell = ProbeOutcome {
        probes: probes_per_check,
        gated: 0,
        violations: check1.into_iter().flatten().collect(),
    };

    // (2) + (3): scan height -H.
    let scan: Vec<(Option<ProbeWitness>, Option<ProbeWitness>)> = (0..probes_per_check)
        .into_par_iter()
        .map(|p| {
            let mut rng = CounterRng::new(&[seed, 2, p]);
            let u: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(&a, &b)| a + (b - a) * rng.next_f64())
                .collect();
            let n = centers.owner_at(&u, -h).expect("certified");
            let t = centers.height_of(&n).expect("owner is a center");
            let w2 = if !(1.0 - 1e-9..=2.0 + 1e-9).contains(&t) {
                Some(ProbeWitness {
                    point: u.clone(),
                    detail: format!("owner {:?} has height {t} outside [1, 2]", n.0),
                })
            } else {
                None
            };
            let d = n.dist_to(&u);
            let w3 = if d >= a_bound {
                Some(ProbeWitness {
                    point: u.clone(),
                    detail: format!("|u - n| = {d} >= L + sqrt k = {a_bound}"),
                })
            } else {
                None
            };
            (w2, w3)
        })
        .collect();
    let height_range = ProbeOutcome {
        probes: probes_per_check,
        gated: 0,
        violations: scan.iter().filter_map(|(a, _)| a.clone()).collect(),
    };
    let owner_close = ProbeOutcome {
        probes: probes_per_check,
        gated: 0,
        violations: scan.into_iter().filter_map(|(_, b)| b).collect(),
    };

    // (4): pull down to height -sH.
    let check4: Vec<Option<Option<ProbeWitness>>> = (0..probes_per_check)
        .into_par_iter()
        .map(|p| {
            let mut rng = CounterRng::new(&[seed, 4, p]);
            let a_pt: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(&a, &b)| a + (b - a) * rng.next_f64())
                .collect();
            let n = centers.owner_at(&a_pt, -s * h).expect("certified");
            let t = centers.height_of(&n).expect("owner is a center");
            let r_formula = pulled_ball_radius(m, centers.l_syn, h, s, k, t);
            let r_use = match demanded_r {
                Some(r) => r.min(r_formula),
                None => r_formula,
            };
            if r_use <= 0.0 {
                return None; // gated: M below threshold for this (s, r)
            }
            let center: Vec<f64> = a_pt
                .iter()
                .zip(&n.0)
                .map(|(&ai, &ni)| ai / s + (1.0 - 1.0 / s) * ni as f64)
                .collect();
            let w = rng.next_in_ball(&center, r_use);
            let owner = centers.owner_at(&w, -h).expect("certified");
            if owner != n {
                Some(Some(ProbeWitness {
                    point: w.clone(),
                    detail: format!(
                        "pulled ball point owned by {:?}, expected {:?} (r = {r_use})",
                        owner.0, n.0
                    ),
                }))
            } else {
                Some(None)
            }
        })
        .collect();
    let gated = check4.iter().filter(|o| o.is_none()).count() as u64;
    let pulled_ball = ProbeOutcome {
        probes: probes_per_check,
        gated,
        violations: check4.into_iter().flatten().flatten().collect(),
    };

    Ok(Lemma41Report {
        ball_in_cell,
        height_range,
        owner_close,
        pulled_ball,
    })
}

// ---------------------------------------------------------------------------
// Boundary fraction (Monte Carlo)
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of a volume fraction with its binomial standard
/// error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractionEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
    pub seed: u64,
}

/// Probe net inside `B_E(0)`: the lattice `pitch * Z^k` restricted to the
/// ball, plus the origin.
fn probe_net(e: f64, pitch: f64, k: usize) -> Vec<Vec<f64>> {
    let reach = (e / pitch).floor() as i64;
    let mut out = vec![vec![0.0; k]];
    for q in box_points(&vec![-reach; k], &vec![reach; k]) {
        let p: Vec<f64> = q.0.iter().map(|&c| c as f64 * pitch).collect();
        let norm_sq: f64 = p.iter().map(|c| c * c).sum();
        if norm_sq > 0.0 && norm_sq <= e * e {
            out.push(p);
        }
    }
    out
}

/// Fraction of `B_R` within `E` of a tile boundary at height `-H`.
///
/// A sample `u` counts as boundary when the probe net inside `B_E(u)` sees
/// two distinct owners. Detection through a net is conservative (it can only
/// under-report). `pitch` defaults to `E/4`; passing a shared finer pitch
/// makes the probe nets across an `E`-grid nested, hence the estimates
/// monotone in `E`.
pub fn boundary_fraction(
    centers: &LiftedCenters,
    e: f64,
    r: f64,
    n_samples: u64,
    seed: u64,
    pitch: Option<f64>,
) -> Result<FractionEstimate> {
    use rayon::prelude::*;

    if !(e > 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter("need E > 0 and R > 0".into()));
    }
    let k = centers.k();
    let sqrt_k = (k as f64).sqrt();
    // Certify the whole probed region up front.
    let needed = r + e + centers.l_syn + sqrt_k;
    let (lo, hi) = centers.safe_box(0.0)?;
    if lo.iter().any(|&c| c > -needed) || hi.iter().any(|&c| c < needed) {
        return Err(Error::WindowTooSmall {
            context: "boundary_fraction".into(),
            required: format!("field window out to R + E + L + sqrt k = {needed}"),
        });
    }

    let net = probe_net(e, pitch.unwrap_or(e / 4.0), k);
    let h = centers.h_plane;
    let origin = vec![0.0; k];

    let flags: Vec<bool> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(&[seed, i]);
            let u = rng.next_in_ball(&origin, r);
            let mut first: Option<LatticePoint> = None;
            for offset in &net {
                let q: Vec<f64> = u.iter().zip(offset).map(|(a, b)| a + b).collect();
                let owner = centers.owner_at(&q, -h).expect("certified region");
                match &first {
                    None => first = Some(owner),
                    Some(f) if *f != owner => return true,
                    _ => {}
                }
            }
            false
        })
        .collect();

    let hits = flags.iter().filter(|&&b| b).count() as u64;
    let p = hits as f64 / n_samples as f64;
    Ok(FractionEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
        hits,
        samples: n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ball_points, cube_window};
    use crate::systems::marker::{
        grid_marker_field, min_lift_height, synthetic_marker_field, HeightSpec,
    };

    fn p(coords: &[i64]) -> LatticePoint {
        LatticePoint(coords.to_vec())
    }

    fn grid_centers(spacing: i64, reach: i64, k: usize) -> LatticeSet {
        let lo = vec![-reach; k];
        let hi = vec![reach; k];
        let pts = box_points(&lo, &hi)
            .into_iter()
            .map(|q| LatticePoint(q.0.iter().map(|c| c * spacing).collect()));
        LatticeSet::from_points(k, pts).unwrap()
    }

    #[test]
    fn flat_owner_nearest_and_ties() {
        let centers = FlatCenters::new(&grid_centers(4, 8, 2), 4.0).unwrap();
        assert_eq!(centers.owner(&[1.0, 0.0]).unwrap(), p(&[0, 0]));
        // Equidistant between (0,0) and (4,0): lexicographically smaller wins.
        assert_eq!(centers.owner(&[2.0, 0.0]).unwrap(), p(&[0, 0]));
        assert_eq!(centers.owner(&[-2.0, 0.0]).unwrap(), p(&[-4, 0]));
    }

    #[test]
    fn flat_owner_reports_coverage_violation() {
        let single = LatticeSet::from_points(2, [p(&[0, 0])]).unwrap();
        let centers = FlatCenters::new(&single, 4.0).unwrap();
        assert_eq!(centers.owner(&[1.0, 1.0]).unwrap(), p(&[0, 0]));
        assert!(centers.owner(&[40.0, 0.0]).is_err());
    }

    #[test]
    fn flat_cell_of_grid_is_cube() {
        let centers = FlatCenters::new(&grid_centers(4, 10, 2), 4.0).unwrap();
        let cell = centers.cell_lattice_points(&p(&[0, 0])).unwrap();
        // Closed cell [-2, 2]^2: 25 lattice points (ties included).
        assert_eq!(cell.len(), 25);
        assert!(cell.contains(&p(&[2, 2])));
        assert!(!cell.contains(&p(&[3, 0])));
    }

    #[test]
    fn flat_cell_check_grid_ratio_below_bound() {
        let centers = FlatCenters::new(&grid_centers(12, 8, 2), 12.0).unwrap();
        let report = flat_cell_check(&centers, &p(&[0, 0]), 2.0).unwrap();
        assert!(
            report.ratio_le_bound,
            "ratio {} > bound {}",
            report.ratio, report.bound_value
        );
        assert!(report.lattice_points >= 12 * 12);
        // Ball containment: B_{L/2}(n) inside the cell.
        let mut rng = CounterRng::new(&[3]);
        for _ in 0..1000 {
            let u = rng.next_in_ball(&[0.0, 0.0], 6.0 - 1e-9);
            assert_eq!(centers.owner(&u).unwrap(), p(&[0, 0]));
        }
    }

    #[test]
    fn flat_cell_check_rejects_edge_cells() {
        let centers = FlatCenters::new(&grid_centers(12, 3, 2), 12.0).unwrap();
        assert!(flat_cell_check(&centers, &p(&[36, 36]), 2.0).is_err());
    }

    #[test]
    fn flat_boundary_distance_on_grid() {
        let centers = FlatCenters::new(&grid_centers(8, 8, 2), 8.0).unwrap();
        let d = centers.boundary_distance(&p(&[0, 0]), &[0.0, 0.0]).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        let d2 = centers.boundary_distance(&p(&[0, 0]), &[4.0, 0.0]).unwrap();
        assert!(d2.abs() < 1e-12); // on the bisector
    }

    #[test]
    fn lifted_equal_heights_reduce_to_flat() {
        let w = cube_window(64, 2).unwrap();
        let field = grid_marker_field(&w, 8, &p(&[0, 0]), min_lift_height(8.0, 2), 1.2).unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let flat = FlatCenters::new(&grid_centers(8, 16, 2), 8.0).unwrap();
        let mut rng = CounterRng::new(&[9]);
        for _ in 0..300 {
            let u = [16.0 + 32.0 * rng.next_f64(), 16.0 + 32.0 * rng.next_f64()];
            assert_eq!(
                lifted.owner_at(&u, -field.h_height).unwrap(),
                flat.owner(&u).unwrap()
            );
        }
    }

    #[test]
    fn lower_center_wins_past_midpoint() {
        // One phi = 1 center and one phi = 0.4 center (lifted height 2.5) at
        // distance 10: at the bottom plane the higher center is farther, so
        // the phi = 1 cell extends past the horizontal midpoint.
        use std::collections::BTreeMap;
        let mut support = BTreeMap::new();
        support.insert(p(&[0]), 1.0);
        support.insert(p(&[10]), 0.4);
        let window = cube_window(9, 1).unwrap().translate(&p(&[-4]));
        let field = crate::systems::marker::MarkerField::new(
            1,
            window,
            support,
            10.0,
            6.0,
            min_lift_height(6.0, 1),
            1.2,
        );
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let h = field.h_height;
        let u = [5.4];
        let d0 = 5.4f64 * 5.4 + (h + 1.0) * (h + 1.0);
        let d1 = 4.6f64 * 4.6 + (h + 2.5) * (h + 2.5);
        assert!(d0 < d1);
        assert_eq!(lifted.owner_at(&u, -h).unwrap(), p(&[0]));
    }

    #[test]
    fn lifted_w_boundary_distance_on_grid() {
        let w = cube_window(96, 2).unwrap();
        let field = grid_marker_field(&w, 8, &p(&[0, 0]), min_lift_height(8.0, 2), 1.2).unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let n = p(&[48, 48]);
        // Equal heights: W cells are the flat cubes, dist from center = N/2.
        let d = lifted.w_boundary_distance(&n, &[48.0, 48.0]).unwrap();
        assert!((d - 4.0).abs() < 1e-9, "d = {d}");
        // 1-Lipschitz along a segment toward the boundary.
        let mut prev = d;
        for i in 1..=8 {
            let u = [48.0 + i as f64 * 0.5, 48.0];
            let di = lifted.w_boundary_distance(&n, &u).unwrap();
            assert!((prev - di).abs() <= 0.5 + 1e-9);
            prev = di;
        }
    }

    #[test]
    fn lemma41_grid_field_passes() {
        let w = cube_window(96, 2).unwrap();
        let field = grid_marker_field(&w, 16, &p(&[0, 0]), min_lift_height(16.0, 2), 1.2).unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let report = lemma41_check(&lifted, 2000, None, 5).unwrap();
        assert!(report.all_passed(), "{report:?}");
        assert_eq!(report.pulled_ball.gated, 0);
    }

    #[test]
    fn lemma41_small_m_gates_pulled_ball() {
        let w = cube_window(48, 2).unwrap();
        let field = grid_marker_field(&w, 2, &p(&[0, 0]), min_lift_height(3.0, 2), 1.01).unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let report = lemma41_check(&lifted, 200, Some(5.0), 6).unwrap();
        // (s-1) H M / (2(sH+t)) is far below the offset bound at M = 2.
        assert_eq!(report.pulled_ball.gated, 200);
        assert!(report.pulled_ball.passed());
    }

    #[test]
    fn owner_field_is_translation_equivariant() {
        let w = cube_window(72, 2).unwrap();
        let field = synthetic_marker_field(
            8,
            8,
            min_lift_height(8.0, 2),
            1.2,
            &w,
            17,
            &HeightSpec::Uniform {
                prob_one: 0.6,
                min: 0.5,
            },
        )
        .unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let shift = p(&[3, -2]);
        let shifted = LiftedCenters::from_field(&field.shift(&shift)).unwrap();
        let mut rng = CounterRng::new(&[21]);
        for _ in 0..200 {
            let u = [30.0 + 12.0 * rng.next_f64(), 30.0 + 12.0 * rng.next_f64()];
            let v = [u[0] - shift.0[0] as f64, u[1] - shift.0[1] as f64];
            let a = lifted.owner_at(&u, -field.h_height).unwrap();
            let b = shifted.owner_at(&v, -field.h_height).unwrap();
            assert_eq!(a.sub(&shift), b);
        }
    }

    #[test]
    fn boundary_fraction_grid_matches_slab_formula() {
        // phi = 1 on N Z^2: boundary strips of width 2E around cube faces,
        // fraction ~ 1 - (1 - 2E/N)^2.
        let n_spacing = 8i64;
        let window =
            LatticeSet::from_points(2, ball_points(60.0, 2).unwrap().iter().cloned()).unwrap();
        let field =
            grid_marker_field(&window, n_spacing, &p(&[0, 0]), min_lift_height(8.0, 2), 1.2)
                .unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let e = 0.5;
        let est = boundary_fraction(&lifted, e, 40.0, 4000, 11, None).unwrap();
        let expect = 1.0 - (1.0 - 2.0 * e / n_spacing as f64).powi(2);
        assert!(
            (est.estimate - expect).abs() < 0.03 + 4.0 * est.std_error,
            "estimate {} vs closed form {expect}",
            est.estimate
        );
    }

    #[test]
    fn boundary_fraction_deterministic_and_monotone_in_e() {
        let window =
            LatticeSet::from_points(2, ball_points(45.0, 2).unwrap().iter().cloned()).unwrap();
        let field =
            grid_marker_field(&window, 8, &p(&[0, 0]), min_lift_height(8.0, 2), 1.2).unwrap();
        let lifted = LiftedCenters::from_field(&field).unwrap();
        let a = boundary_fraction(&lifted, 0.5, 25.0, 1500, 3, None).unwrap();
        let b = boundary_fraction(&lifted, 0.5, 25.0, 1500, 3, None).unwrap();
        assert_eq!(a.hits, b.hits);

        // Shared pitch across the E-grid nests the probe nets.
        let pitch = Some(0.25 / 4.0);
        let mut prev = 0.0;
        for e in [0.25, 0.5, 1.0] {
            let est = boundary_fraction(&lifted, e, 25.0, 1500, 3, pitch).unwrap();
            assert!(est.estimate >= prev, "not monotone at E = {e}");
            prev = est.estimate;
        }
    }

    #[test]
    fn dilated_cell_keeps_bisector_margin() {
        // Points of the dilation c V (about the center) lie at distance
        // >= (1 - c) L / 2 from every bisector.
        let l = 8.0;
        let centers = FlatCenters::new(&grid_centers(8, 8, 2), l).unwrap();
        let n = p(&[0, 0]);
        let c = 0.5;
        let mut rng = CounterRng::new(&[33]);
        let mut tested = 0;
        while tested < 300 {
            let u = rng.next_in_ball(&[0.0, 0.0], l + 1.0);
            if centers.owner(&u).unwrap() != n {
                continue;
            }
            let dilated = [u[0] * c, u[1] * c];
            let d = centers.boundary_distance(&n, &dilated).unwrap();
            assert!(d >= (1.0 - c) * l / 2.0 - 1e-9, "margin {d} at {dilated:?}");
            tested += 1;
        }
    }
}
