//! Exact finite-lattice geometry in `Z^k`.
//!
//! Windows, Euclidean balls, `R`-shells and `R`-interiors of finite subsets,
//! and the Folner ratio `|shell| / |set|`. Everything here is enumerated
//! exactly over a provably sufficient bounding box; there is no sampling.
//!
//! Norm convention: the Euclidean norm throughout. The shell of a set
//! contains lattice points on both sides of the set's boundary; the interior
//! is defined only inside the set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of `Z^k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn origin(k: usize) -> Self {
        LatticePoint(vec![0; k])
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|&c| -c).collect())
    }

    pub fn dist_sq(&self, other: &LatticePoint) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &LatticePoint) -> f64 {
        (self.dist_sq(other) as f64).sqrt()
    }

    /// Euclidean distance to a real vector.
    pub fn dist_to(&self, u: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(u)
            .map(|(&a, &b)| (a as f64 - b) * (a as f64 - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

/// A finite subset of `Z^k`, kept sorted for deterministic iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSet {
    points: BTreeSet<LatticePoint>,
    k: usize,
}

impl LatticeSet {
    pub fn new(k: usize) -> Self {
        LatticeSet {
            points: BTreeSet::new(),
            k,
        }
    }

    pub fn from_points<I: IntoIterator<Item = LatticePoint>>(k: usize, pts: I) -> Result<Self> {
        let mut set = LatticeSet::new(k);
        for p in pts {
            if p.dim() != k {
                return Err(Error::InvalidParameter(format!(
                    "point {:?} has dimension {} in a {}-dimensional set",
                    p.0,
                    p.dim(),
                    k
                )));
            }
            set.points.insert(p);
        }
        Ok(set)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.points.contains(p)
    }

    pub fn insert(&mut self, p: LatticePoint) -> bool {
        debug_assert_eq!(p.dim(), self.k);
        self.points.insert(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticePoint> + Clone {
        self.points.iter()
    }

    pub fn translate(&self, a: &LatticePoint) -> LatticeSet {
        LatticeSet {
            points: self.points.iter().map(|p| p.add(a)).collect(),
            k: self.k,
        }
    }

    pub fn union(&self, other: &LatticeSet) -> LatticeSet {
        LatticeSet {
            points: self.points.union(&other.points).cloned().collect(),
            k: self.k,
        }
    }

    pub fn difference(&self, other: &LatticeSet) -> LatticeSet {
        LatticeSet {
            points: self.points.difference(&other.points).cloned().collect(),
            k: self.k,
        }
    }

    pub fn is_subset(&self, other: &LatticeSet) -> bool {
        self.points.is_subset(&other.points)
    }

    /// Axis-aligned bounding box as `(min, max)` per coordinate.
    pub fn bounding_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let first = self.points.iter().next()?;
        let mut lo = first.0.clone();
        let mut hi = first.0.clone();
        for p in &self.points {
            for i in 0..self.k {
                lo[i] = lo[i].min(p.0[i]);
                hi[i] = hi[i].max(p.0[i]);
            }
        }
        Some((lo, hi))
    }

    /// Canonical translate placing the bounding-box minimum corner at the
    /// origin; returns the shape and the applied anchor (`self = anchor + shape`).
    pub fn canonical_shape(&self) -> Option<(LatticeSet, LatticePoint)> {
        let (lo, _) = self.bounding_box()?;
        let anchor = LatticePoint(lo);
        Some((self.translate(&anchor.neg()), anchor))
    }
}

/// Iterate over all integer points of the box `[lo, hi]` (inclusive).
pub fn box_points(lo: &[i64], hi: &[i64]) -> Vec<LatticePoint> {
    let k = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = lo.to_vec();
    'outer: loop {
        out.push(LatticePoint(cur.clone()));
        for i in (0..k).rev() {
            if cur[i] < hi[i] {
                cur[i] += 1;
                for (j, c) in cur.iter_mut().enumerate().skip(i + 1) {
                    *c = lo[j];
                }
                continue 'outer;
            }
        }
        break;
    }
    out
}

/// The cube window `[N] = {0, 1, ..., N-1}^k`.
pub fn cube_window(n: usize, k: usize) -> Result<LatticeSet> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "cube_window needs N >= 1 and k >= 1, got N = {n}, k = {k}"
        )));
    }
    let lo = vec![0i64; k];
    let hi = vec![n as i64 - 1; k];
    LatticeSet::from_points(k, box_points(&lo, &hi))
}

/// All lattice points with Euclidean norm at most `R` (closed inclusion).
pub fn ball_points(r: f64, k: usize) -> Result<LatticeSet> {
    if !(r >= 0.0) || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "ball_points needs R >= 0 and k >= 1, got R = {r}, k = {k}"
        )));
    }
    let reach = r.floor() as i64;
    let lo = vec![-reach; k];
    let hi = vec![reach; k];
    let pts = box_points(&lo, &hi)
        .into_iter()
        .filter(|p| p.norm_sq() as f64 <= r * r);
    LatticeSet::from_points(k, pts)
}

/// Ball of radius `R` around a center.
pub fn ball_around(center: &LatticePoint, r: f64) -> Result<LatticeSet> {
    Ok(ball_points(r, center.dim())?.translate(center))
}

/// The `R`-shell and `R`-interior of a finite set.
///
/// `boundary` is the set of `n` in `Z^k` having both a point of `omega` and a
/// point of its complement within Euclidean distance `R`; it extends outside
/// `omega`. `interior = omega \ boundary`. Enumeration runs over the bounding
/// box of `omega` inflated by `ceil(R)`, which is sufficient: any point
/// farther out has no point of `omega` within `R`.
pub fn shell(omega: &LatticeSet, r: f64) -> Result<(LatticeSet, LatticeSet)> {
    if omega.is_empty() {
        return Err(Error::InvalidParameter("shell of an empty set".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shell needs R > 0, got R = {r}"
        )));
    }
    let k = omega.k();
    let offsets = ball_points(r, k)?;
    let (lo, hi) = omega.bounding_box().expect("nonempty");
    let inflate = r.ceil() as i64;
    let lo: Vec<i64> = lo.iter().map(|c| c - inflate).collect();
    let hi: Vec<i64> = hi.iter().map(|c| c + inflate).collect();

    let mut boundary = LatticeSet::new(k);
    for n in box_points(&lo, &hi) {
        let mut hits_inside = false;
        let mut hits_outside = false;
        for o in offsets.iter() {
            if omega.contains(&n.add(o)) {
                hits_inside = true;
            } else {
                hits_outside = true;
            }
            if hits_inside && hits_outside {
                break;
            }
        }
        if hits_inside && hits_outside {
            boundary.insert(n);
        }
    }
    let interior = omega.difference(&boundary);
    Ok((boundary, interior))
}

/// Shell statistics of a finite set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellCounts {
    /// `|shell_R(omega)|`, counting points on both sides of the boundary.
    pub boundary_total: usize,
    /// `|shell_R(omega) ∩ omega|`.
    pub boundary_inside: usize,
    /// `|interior_R(omega)|`.
    pub interior: usize,
    /// `|omega|`.
    pub set_size: usize,
    /// `boundary_total / set_size`, the Folner ratio.
    pub ratio: f64,
}

/// Folner-ratio diagnostics: `|shell_R(omega)| / |omega|` with both shell
/// counts exposed.
pub fn shell_counts(omega: &LatticeSet, r: f64) -> Result<ShellCounts> {
    let (boundary, interior) = shell(omega, r)?;
    let boundary_inside = boundary
        .iter()
        .filter(|p| omega.contains(p))
        .count();
    Ok(ShellCounts {
        boundary_total: boundary.len(),
        boundary_inside,
        interior: interior.len(),
        set_size: omega.len(),
        ratio: boundary.len() as f64 / omega.len() as f64,
    })
}

/// The Folner ratio `|shell_R(omega)| / |omega|`.
pub fn folner_ratio(omega: &LatticeSet, r: f64) -> Result<f64> {
    Ok(shell_counts(omega, r)?.ratio)
}
