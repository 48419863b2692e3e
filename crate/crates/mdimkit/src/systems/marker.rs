//! Marker construction: clopen marker predicates on symbolic systems and
//! marker fields (phi-values on a window) with machine-checked invariants.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_points, box_points, LatticePoint, LatticeSet};
use crate::rng::{coords_key, mix_words, CounterRng};
use crate::systems::{inflate, PointWindow, ShiftSystem};
use crate::{Error, Result};

/// The window of values `phi(T^n x)` of a marker cutoff, with its declared
/// separation / syndeticity / lift parameters.
///
/// Invariants (checked by [`MarkerField::validate`]):
/// * the support is `M`-separated;
/// * every interior window point has a `phi = 1` support point strictly
///   within `L` (interior means the `L`-ball around the point lies in the
///   window);
/// * `H >= (L + sqrt k)^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerField {
    pub k: usize,
    pub window: LatticeSet,
    /// phi on its support; absent cells have phi = 0.
    support: BTreeMap<LatticePoint, f64>,
    pub m_sep: f64,
    pub l_syn: f64,
    pub h_height: f64,
    pub s_overshoot: f64,
}

impl MarkerField {
    pub fn new(
        k: usize,
        window: LatticeSet,
        support: BTreeMap<LatticePoint, f64>,
        m_sep: f64,
        l_syn: f64,
        h_height: f64,
        s_overshoot: f64,
    ) -> Self {
        MarkerField {
            k,
            window,
            support,
            m_sep,
            l_syn,
            h_height,
            s_overshoot,
        }
    }

    pub fn phi(&self, n: &LatticePoint) -> f64 {
        self.support.get(n).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&LatticePoint, &f64)> {
        self.support.iter()
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// Field of the shifted point: `phi'(n) = phi(n + a)`.
    pub fn shift(&self, a: &LatticePoint) -> MarkerField {
        MarkerField {
            k: self.k,
            window: self.window.translate(&a.neg()),
            support: self
                .support
                .iter()
                .map(|(n, v)| (n.sub(a), *v))
                .collect(),
            m_sep: self.m_sep,
            l_syn: self.l_syn,
            h_height: self.h_height,
            s_overshoot: self.s_overshoot,
        }
    }

    /// Window points whose `L`-ball lies inside the window (the region where
    /// syndeticity is certifiable).
    pub fn interior(&self) -> Result<LatticeSet> {
        let margin = ball_points(self.l_syn, self.k)?;
        let mut out = LatticeSet::new(self.k);
        for p in self.window.iter() {
            if margin.iter().all(|o| self.window.contains(&p.add(o))) {
                out.insert(p.clone());
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let sqrt_k = (self.k as f64).sqrt();
        if self.h_height < (self.l_syn + sqrt_k).powi(2) {
            return Err(Error::InvalidParameter(format!(
                "H = {} < (L + sqrt k)^2 = {}",
                self.h_height,
                (self.l_syn + sqrt_k).powi(2)
            )));
        }
        for (_, &v) in &self.support {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "phi value {v} outside (0, 1]"
                )));
            }
        }

        // M-separation, via a bucket grid to avoid the full pairwise scan.
        let bucket = (self.m_sep.ceil() as i64).max(1);
        let mut grid: HashMap<Vec<i64>, Vec<&LatticePoint>> = HashMap::new();
        for p in self.support.keys() {
            let cell: Vec<i64> = p.0.iter().map(|c| c.div_euclid(bucket)).collect();
            grid.entry(cell).or_default().push(p);
        }
        for p in self.support.keys() {
            let cell: Vec<i64> = p.0.iter().map(|c| c.div_euclid(bucket)).collect();
            for delta in box_points(&vec![-1; self.k], &vec![1; self.k]) {
                let ncell: Vec<i64> = cell.iter().zip(&delta.0).map(|(c, d)| c + d).collect();
                if let Some(neighbors) = grid.get(&ncell) {
                    for q in neighbors {
                        if *q != p && (p.dist_sq(q) as f64) < self.m_sep * self.m_sep {
                            return Err(Error::MarkerSeparation {
                                a: p.0.clone(),
                                b: q.0.clone(),
                                dist: p.dist(q),
                                min: self.m_sep,
                            });
                        }
                    }
                }
            }
        }

        // L-syndeticity of the phi = 1 sub-support, on the window interior.
        let ones: Vec<&LatticePoint> = self
            .support
            .iter()
            .filter(|(_, &v)| v == 1.0)
            .map(|(p, _)| p)
            .collect();
        let l_sq = self.l_syn * self.l_syn;
        for p in self.interior()?.iter() {
            let covered = ones.iter().any(|q| (p.dist_sq(q) as f64) < l_sq);
            if !covered {
                return Err(Error::MarkerSyndeticity {
                    point: p.0.clone(),
                    radius: self.l_syn,
                });
            }
        }
        Ok(())
    }
}

/// A clopen marker predicate: a ranked dictionary of local patterns plus the
/// greedy carving rule. Membership of a position is decided by its pattern's
/// rank and the ranks of nearby members, exactly the accumulation
/// `U_1 = V_1`, `U_{i+1} = U_i ∪ (V_{i+1} \ union of L-shifts of U_i)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerPredicate {
    pub l: f64,
    /// Box radius of the pattern shape.
    pub radius: i64,
    /// Shape offsets in lexicographic order.
    offsets: Vec<LatticePoint>,
    /// Ranked patterns (rank = index, lexicographically sorted).
    patterns: Vec<Vec<u32>>,
}

impl MarkerPredicate {
    fn shape(radius: i64, k: usize) -> Vec<LatticePoint> {
        box_points(&vec![-radius; k], &vec![radius; k])
    }

    fn pattern_at(&self, z: &PointWindow, t: &LatticePoint) -> Option<Vec<u32>> {
        let mut pat = Vec::with_capacity(self.offsets.len());
        for o in &self.offsets {
            match z.cell(&t.add(o)).and_then(|c| c.symbol) {
                Some(s) => pat.push(s),
                None => return None,
            }
        }
        Some(pat)
    }

    fn rank_of(&self, pat: &[u32]) -> Option<usize> {
        self.patterns.binary_search_by(|p| p.as_slice().cmp(pat)).ok()
    }

    /// Marker positions of a configuration window.
    ///
    /// Returns `(markers, evaluated)`: the greedy member set and the set of
    /// positions whose pattern was visible. By construction the members are
    /// pairwise at distance >= L and every evaluated position has a member
    /// strictly within L.
    pub fn support(&self, z: &PointWindow) -> Result<(LatticeSet, LatticeSet)> {
        let k = z.k;
        let mut ranked: Vec<(usize, LatticePoint)> = Vec::new();
        let mut evaluated = LatticeSet::new(k);
        for (t, _) in z.cells() {
            if let Some(pat) = self.pattern_at(z, t) {
                let rank = self.rank_of(&pat).ok_or_else(|| {
                    Error::CertificationFailed(format!(
                        "pattern at {:?} not in the marker dictionary (sample-based predicate)",
                        t.0
                    ))
                })?;
                ranked.push((rank, t.clone()));
                evaluated.insert(t.clone());
            }
        }
        ranked.sort();

        let l_sq = self.l * self.l;
        let mut members: Vec<LatticePoint> = Vec::new();
        'next: for (_, t) in &ranked {
            for m in &members {
                if (t.dist_sq(m) as f64) < l_sq {
                    continue 'next;
                }
            }
            members.push(t.clone());
        }
        Ok((LatticeSet::from_points(k, members)?, evaluated))
    }
}

/// Build a clopen marker predicate for separation `L` from sampled windows
/// of an aperiodic symbolic system.
///
/// The cylinder radius is the smallest box radius whose patterns separate
/// `L`-close positions on every sample, capped at a quarter of the window
/// extent. A sample that repeats a pattern at two `L`-close positions for
/// every radius up to the cap is reported as a periodic obstruction with the
/// witnessing positions.
pub fn clopen_marker(
    system: &ShiftSystem,
    l: f64,
    window: &LatticeSet,
    n_samples: u64,
) -> Result<MarkerPredicate> {
    let k = system.k();
    let (lo, hi) = window
        .bounding_box()
        .ok_or_else(|| Error::InvalidParameter("empty window".into()))?;
    let extent = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a + 1)
        .min()
        .unwrap_or(1);
    let r_cap = (extent / 4).max(0);

    let samples: Vec<PointWindow> = (0..n_samples)
        .map(|i| system.sample(window, i))
        .collect::<Result<_>>()?;
    let near = near_offsets(l, k)?;

    let mut witness: Option<(u64, LatticePoint, LatticePoint)> = None;
    for radius in 0..=r_cap {
        let offsets = MarkerPredicate::shape(radius, k);
        match try_radius(&samples, &offsets, &near) {
            Ok(mut patterns) => {
                patterns.sort();
                patterns.dedup();
                return Ok(MarkerPredicate {
                    l,
                    radius,
                    offsets,
                    patterns,
                });
            }
            Err((idx, a, b)) => {
                witness = Some((idx, a, b));
            }
        }
    }
    let (sample, a, b) = witness.expect("r_cap >= 0 ran at least once");
    let dist = a.dist(&b);
    Err(Error::PeriodicObstruction {
        sample,
        a: a.0,
        b: b.0,
        dist,
        l,
    })
}

/// Nonzero offsets with `0 < |n| < L`.
fn near_offsets(l: f64, k: usize) -> Result<Vec<LatticePoint>> {
    Ok(ball_points((l - 1e-9).max(0.0), k)?
        .iter()
        .filter(|p| p.norm_sq() > 0 && (p.norm_sq() as f64) < l * l)
        .cloned()
        .collect())
}

type Violation = (u64, LatticePoint, LatticePoint);

fn try_radius(
    samples: &[PointWindow],
    offsets: &[LatticePoint],
    near: &[LatticePoint],
) -> std::result::Result<Vec<Vec<u32>>, Violation> {
    let mut all_patterns: Vec<Vec<u32>> = Vec::new();
    for (si, z) in samples.iter().enumerate() {
        // Pattern id per visible position.
        let mut ids: BTreeMap<LatticePoint, u64> = BTreeMap::new();
        for (t, _) in z.cells() {
            let mut pat: Vec<u32> = Vec::with_capacity(offsets.len());
            let mut visible = true;
            for o in offsets {
                match z.cell(&t.add(o)).and_then(|c| c.symbol) {
                    Some(s) => pat.push(s),
                    None => {
                        visible = false;
                        break;
                    }
                }
            }
            if visible {
                let words: Vec<u64> = pat.iter().map(|&s| s as u64).collect();
                ids.insert(t.clone(), mix_words(&words));
                all_patterns.push(pat);
            }
        }
        for (t, id) in &ids {
            for o in near {
                let u = t.add(o);
                if let Some(other) = ids.get(&u) {
                    if other == id {
                        return Err((si as u64, t.clone(), u));
                    }
                }
            }
        }
    }
    Ok(all_patterns)
}

/// Derive a `{0,1}`-valued marker field from a configuration window and a
/// marker predicate (the zero-dimensional case: `phi` is an indicator).
pub fn marker_field_from_system(
    z: &PointWindow,
    pred: &MarkerPredicate,
    m_sep: f64,
    l_syn: f64,
    h_height: f64,
    s_overshoot: f64,
    window: &LatticeSet,
) -> Result<MarkerField> {
    let (markers, evaluated) = pred.support(z)?;
    let needed = inflate(window, l_syn)?;
    if !needed.is_subset(&evaluated) {
        return Err(Error::WindowTooSmall {
            context: "marker_field_from_system".into(),
            required: format!("configuration window inflated by L = {l_syn} plus the pattern radius"),
        });
    }
    let support: BTreeMap<LatticePoint, f64> = markers
        .iter()
        .filter(|p| needed.contains(p))
        .map(|p| (p.clone(), 1.0))
        .collect();
    let field = MarkerField::new(z.k, window.clone(), support, m_sep, l_syn, h_height, s_overshoot);
    field.validate()?;
    Ok(field)
}

/// Height distribution for synthetic marker fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeightSpec {
    /// phi = 1 on the whole support.
    AllOnes,
    /// phi = 1 with probability `prob_one`, otherwise uniform in `[min, 1)`.
    Uniform { prob_one: f64, min: f64 },
}

/// Greedy-random M-separated, L-syndetic marker field, deterministic in the
/// seed. The support is a maximal M-separated subset of the window (so it is
/// automatically M-syndetic); a promotion pass then forces a phi = 1 point
/// strictly within L of every interior point.
pub fn synthetic_marker_field(
    m: i64,
    l: i64,
    h: f64,
    s: f64,
    window: &LatticeSet,
    seed: u64,
    heights: &HeightSpec,
) -> Result<MarkerField> {
    let k = window.k();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need M >= 2, got {m}")));
    }
    if m > 2 * l {
        return Err(Error::InvalidParameter(format!(
            "infeasible (M, L) = ({m}, {l}): an M-separated set cannot be L-syndetic when M > 2L"
        )));
    }
    if let HeightSpec::Uniform { prob_one, min } = heights {
        if !(0.0..=1.0).contains(prob_one) || !(*min > 0.0 && *min <= 1.0) {
            return Err(Error::InvalidParameter("bad heights spec".into()));
        }
    }

    let mut points: Vec<LatticePoint> = window.iter().cloned().collect();
    let mut rng = CounterRng::new(&[seed, 0x6d61726b]);
    rng.shuffle(&mut points);

    // Maximal M-separated subset, greedily.
    let bucket = m.max(1);
    let mut grid: HashMap<Vec<i64>, Vec<LatticePoint>> = HashMap::new();
    let mut chosen: Vec<LatticePoint> = Vec::new();
    let m_sq = (m * m) as f64;
    'candidates: for p in points {
        let cell: Vec<i64> = p.0.iter().map(|c| c.div_euclid(bucket)).collect();
        for delta in box_points(&vec![-1; k], &vec![1; k]) {
            let ncell: Vec<i64> = cell.iter().zip(&delta.0).map(|(c, d)| c + d).collect();
            if let Some(near) = grid.get(&ncell) {
                for q in near {
                    if (p.dist_sq(q) as f64) < m_sq {
                        continue 'candidates;
                    }
                }
            }
        }
        grid.entry(cell).or_default().push(p.clone());
        chosen.push(p);
    }
    chosen.sort();

    let mut support: BTreeMap<LatticePoint, f64> = BTreeMap::new();
    for p in &chosen {
        let value = match heights {
            HeightSpec::AllOnes => 1.0,
            HeightSpec::Uniform { prob_one, min } => {
                let mut r = CounterRng::new(&[seed, 0x68, coords_key(&p.0)]);
                if r.next_f64() < *prob_one {
                    1.0
                } else {
                    min + (1.0 - min) * r.next_f64()
                }
            }
        };
        support.insert(p.clone(), value);
    }

    let mut field = MarkerField::new(k, window.clone(), support, m as f64, l as f64, h, s);

    // Promotion pass: every interior point needs a phi = 1 marker strictly
    // within L; promote the nearest support point where one is missing.
    let l_sq = (l * l) as f64;
    let interior = field.interior()?;
    let support_points: Vec<LatticePoint> = field.support.keys().cloned().collect();
    for p in interior.iter() {
        let covered = field
            .support
            .iter()
            .any(|(q, &v)| v == 1.0 && (p.dist_sq(q) as f64) < l_sq);
        if !covered {
            let nearest = support_points
                .iter()
                .min_by(|a, b| {
                    (p.dist_sq(a), a.0.clone())
                        .partial_cmp(&(p.dist_sq(b), b.0.clone()))
                        .unwrap()
                })
                .cloned();
            if let Some(q) = nearest {
                field.support.insert(q, 1.0);
            }
        }
    }

    field.validate()?;
    Ok(field)
}

/// phi = 1 exactly on `offset + spacing * Z^k`: the all-tiles-congruent
/// fixture. Support extends one spacing beyond the window so edge cells see
/// their neighbors.
pub fn grid_marker_field(
    window: &LatticeSet,
    spacing: i64,
    offset: &LatticePoint,
    h: f64,
    s: f64,
) -> Result<MarkerField> {
    let k = window.k();
    if spacing < 2 {
        return Err(Error::InvalidParameter("grid spacing must be >= 2".into()));
    }
    let (m, l) = grid_marker_params(spacing, k);
    let (lo, hi) = window
        .bounding_box()
        .ok_or_else(|| Error::InvalidParameter("empty window".into()))?;
    let mut support = BTreeMap::new();
    let lo: Vec<i64> = lo
        .iter()
        .zip(&offset.0)
        .map(|(c, o)| (c - 2 * spacing - o).div_euclid(spacing))
        .collect();
    let hi: Vec<i64> = hi
        .iter()
        .zip(&offset.0)
        .map(|(c, o)| (c + 2 * spacing - o).div_euclid(spacing))
        .collect();
    for q in box_points(&lo, &hi) {
        let p = LatticePoint(
            q.0.iter()
                .zip(&offset.0)
                .map(|(c, o)| c * spacing + o)
                .collect(),
        );
        support.insert(p, 1.0);
    }
    let field = MarkerField::new(k, window.clone(), support, m as f64, l as f64, h, s);
    field.validate()?;
    Ok(field)
}

/// `(M, L)` for a grid of the given spacing: separation is the spacing, and
/// the syndeticity radius must exceed the covering radius `sqrt k * M / 2`.
pub fn grid_marker_params(spacing: i64, k: usize) -> (i64, i64) {
    let covering = ((k as f64).sqrt() * spacing as f64 / 2.0).floor() as i64 + 1;
    (spacing, covering.max(spacing))
}

/// Smallest admissible lift height for syndeticity radius `l`.
pub fn min_lift_height(l: f64, k: usize) -> f64 {
    (l + (k as f64).sqrt()).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::cube_window;
    use crate::systems::SystemSpec;

    #[test]
    fn grid_field_passes_invariants() {
        let w = cube_window(40, 2).unwrap();
        let (m, l) = grid_marker_params(8, 2);
        assert_eq!((m, l), (8, 8));
        let field = grid_marker_field(&w, 8, &LatticePoint(vec![3, 5]), min_lift_height(l as f64, 2), 1.2).unwrap();
        field.validate().unwrap();
        assert!(field.phi(&LatticePoint(vec![3, 5])) == 1.0);
        assert!(field.phi(&LatticePoint(vec![4, 5])) == 0.0);
    }

    #[test]
    fn synthetic_field_is_deterministic_and_valid() {
        let w = cube_window(64, 2).unwrap();
        let h = min_lift_height(8.0, 2);
        let f1 = synthetic_marker_field(8, 8, h, 1.2, &w, 1, &HeightSpec::AllOnes).unwrap();
        let f2 = synthetic_marker_field(8, 8, h, 1.2, &w, 1, &HeightSpec::AllOnes).unwrap();
        assert_eq!(
            f1.support().collect::<Vec<_>>(),
            f2.support().collect::<Vec<_>>()
        );
        f1.validate().unwrap();

        let f3 = synthetic_marker_field(8, 8, h, 1.2, &w, 2, &HeightSpec::AllOnes).unwrap();
        assert_ne!(
            f1.support().collect::<Vec<_>>(),
            f3.support().collect::<Vec<_>>()
        );
    }

    #[test]
    fn synthetic_field_heights_stay_in_range() {
        let w = cube_window(48, 2).unwrap();
        let h = min_lift_height(10.0, 2);
        let heights = HeightSpec::Uniform {
            prob_one: 0.5,
            min: 0.5,
        };
        let f = synthetic_marker_field(8, 10, h, 1.2, &w, 3, &heights).unwrap();
        for (_, &v) in f.support() {
            assert!(v >= 0.5 && v <= 1.0);
        }
    }

    #[test]
    fn infeasible_separation_is_rejected() {
        let w = cube_window(32, 1).unwrap();
        let err = synthetic_marker_field(12, 5, 1000.0, 1.2, &w, 0, &HeightSpec::AllOnes);
        assert!(err.is_err());
    }

    #[test]
    fn separation_violation_names_the_pair() {
        let mut support = BTreeMap::new();
        support.insert(LatticePoint(vec![0, 0]), 1.0);
        support.insert(LatticePoint(vec![3, 0]), 1.0);
        let field = MarkerField::new(
            2,
            cube_window(8, 2).unwrap(),
            support,
            4.0,
            4.0,
            min_lift_height(4.0, 2),
            1.2,
        );
        match field.validate() {
            Err(Error::MarkerSeparation { a, b, .. }) => {
                assert_eq!((a, b), (vec![0, 0], vec![3, 0]));
            }
            other => panic!("expected separation error, got {other:?}"),
        }
    }

    #[test]
    fn all_zero_field_fails_syndeticity() {
        let field = MarkerField::new(
            1,
            cube_window(32, 1).unwrap(),
            BTreeMap::new(),
            4.0,
            4.0,
            min_lift_height(4.0, 1),
            1.2,
        );
        assert!(matches!(
            field.validate(),
            Err(Error::MarkerSyndeticity { .. })
        ));
    }

    #[test]
    fn clopen_marker_on_sturmian_sample() {
        let sys = ShiftSystem::new(SystemSpec::sturmian(7)).unwrap();
        let w = cube_window(200, 1).unwrap();
        let pred = clopen_marker(&sys, 4.0, &w, 20).unwrap();

        // Direct verification on fresh samples: members pairwise >= L apart,
        // every evaluated position within < L of a member.
        for idx in 50..100 {
            let z = sys.sample(&w, idx).unwrap();
            let (markers, evaluated) = pred.support(&z).unwrap();
            let members: Vec<_> = markers.iter().cloned().collect();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    assert!(a.dist(b) >= 4.0, "members {:?} {:?} too close", a.0, b.0);
                }
            }
            for t in evaluated.iter() {
                assert!(
                    members.iter().any(|m| m.dist(t) < 4.0),
                    "no marker within L of {:?}",
                    t.0
                );
            }
        }
    }

    #[test]
    fn clopen_marker_rejects_periodic_samples() {
        // A fixed point: the all-zero configuration of a full shift with a
        // one-letter alphabet.
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 1, 0)).unwrap();
        let w = cube_window(64, 1).unwrap();
        match clopen_marker(&sys, 2.0, &w, 3) {
            Err(Error::PeriodicObstruction { dist, l, .. }) => {
                assert!(dist < l);
            }
            other => panic!("expected periodic obstruction, got {other:?}"),
        }
    }

    #[test]
    fn l_at_most_one_is_trivial() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 1, 0)).unwrap();
        let w = cube_window(32, 1).unwrap();
        let pred = clopen_marker(&sys, 1.0, &w, 3).unwrap();
        let z = sys.sample(&w, 0).unwrap();
        let (markers, evaluated) = pred.support(&z).unwrap();
        assert_eq!(markers.len(), evaluated.len()); // everything is a marker
    }

    #[test]
    fn marker_field_from_grid_like_system() {
        // Sturmian markers with L = 4 give an (M, L) = (4, 4) field.
        let sys = ShiftSystem::new(SystemSpec::sturmian(9)).unwrap();
        let w = cube_window(240, 1).unwrap();
        let pred = clopen_marker(&sys, 4.0, &w, 10).unwrap();
        let z = sys.sample(&w, 0).unwrap();
        let inner = cube_window(180, 1)
            .unwrap()
            .translate(&LatticePoint(vec![30]));
        let field =
            marker_field_from_system(&z, &pred, 4.0, 4.0, min_lift_height(4.0, 1), 1.5, &inner)
                .unwrap();
        field.validate().unwrap();
    }
}
