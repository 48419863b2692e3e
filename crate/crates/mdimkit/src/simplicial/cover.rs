//! Greedy covers, nerves with partition-of-unity maps, and the
//! approximation of continuous maps by linear maps on the nerve.

use serde::{Deserialize, Serialize};

use crate::simplicial::{Barycentric, LinearMap, Norm, SimplicialComplex};
use crate::{Error, Result};

/// A finite metric sample.
pub trait SampleMetric: Sync {
    fn len(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
}

/// Dense distance matrix.
#[derive(Debug, Clone)]
pub struct DenseMetric {
    n: usize,
    d: Vec<f64>,
}

impl DenseMetric {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DenseMetric { n, d }
    }

    pub fn from_points(points: &[Vec<f64>], norm: Norm) -> Self {
        Self::from_fn(points.len(), |i, j| norm.dist(&points[i], &points[j]))
    }
}

impl SampleMetric for DenseMetric {
    fn len(&self) -> usize {
        self.n
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

const COVER_TOL: f64 = 1e-9;

/// A cover of the sample by sets of diameter < eps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cover {
    /// Member sample indices per set, sorted.
    pub sets: Vec<Vec<usize>>,
    /// Primary seed per set (the farthest-first pick owning the set).
    pub seeds: Vec<usize>,
    /// Ball radius used in the farthest-first phase.
    pub radius: f64,
    pub eps: f64,
    /// Max number of sets meeting one sample point, after the merge pass.
    pub multiplicity: usize,
}

fn set_diameter(metric: &dyn SampleMetric, set: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            d = d.max(metric.dist(i, j));
        }
    }
    d
}

/// Cover the sample by sets of diameter < eps: farthest-first seeding with
/// balls of radius `eps/2 * (1 - tol)`, then a local merge pass joining sets
/// whose union still has diameter < eps. Deterministic; ties in the
/// farthest-first phase go to the smallest index.
pub fn greedy_cover(metric: &dyn SampleMetric, eps: f64) -> Result<Cover> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("greedy_cover needs eps > 0".into()));
    }
    let n = metric.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let radius = eps / 2.0 * (1.0 - COVER_TOL);

    // Farthest-first seeds.
    let mut seeds = vec![0usize];
    let mut min_dist: Vec<f64> = (0..n).map(|i| metric.dist(0, i)).collect();
    loop {
        let (far, &d) = min_dist
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.partial_cmp(b).unwrap().then(j.cmp(i)))
            .expect("nonempty");
        if d <= radius {
            break;
        }
        seeds.push(far);
        for i in 0..n {
            min_dist[i] = min_dist[i].min(metric.dist(far, i));
        }
    }

    let mut sets: Vec<Vec<usize>> = seeds
        .iter()
        .map(|&s| (0..n).filter(|&i| metric.dist(s, i) <= radius).collect())
        .collect();

    // Merge pass: union two sets when the union's diameter stays strictly
    // under eps (with margin), until stable.
    let mut set_seeds = seeds.clone();
    let mut changed = true;
    while changed {
        changed = false;
        'outer: for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                let mut union = sets[i].clone();
                union.extend_from_slice(&sets[j]);
                union.sort_unstable();
                union.dedup();
                if set_diameter(metric, &union) < eps * (1.0 - COVER_TOL) {
                    sets[i] = union;
                    sets.remove(j);
                    set_seeds.remove(j);
                    changed = true;
                    break 'outer;
                }
            }
        }
    }

    let mut multiplicity = 0usize;
    for p in 0..n {
        let count = sets.iter().filter(|s| s.binary_search(&p).is_ok()).count();
        multiplicity = multiplicity.max(count);
    }

    Ok(Cover {
        sets,
        seeds: set_seeds,
        radius,
        eps,
        multiplicity,
    })
}

/// Certificate of an eps-embedding on a finite sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsEmbeddingCert {
    pub epsilon: f64,
    /// Max sample distance over pairs with images equal to 1e-12.
    pub max_fiber_diam: f64,
    pub equal_image_pairs: usize,
    /// Pairs with equal images but sample distance >= eps.
    pub violations: Vec<(usize, usize)>,
    /// Max diameter of a vertex-star preimage (must be < eps).
    pub max_star_diam: f64,
}

impl EpsEmbeddingCert {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.max_star_diam < self.epsilon
    }
}

/// The nerve of a cover with a partition-of-unity map into it.
///
/// Each set `v` carries a blend radius `r_v = (eps' - diam_v) / 2` (with
/// `eps' = eps (1 - tol)`); a point gets weight
/// `max(0, 1 - d(point, set_v) / r_v)` on `v`, so the extended support
/// `{z : d(z, set_v) <= r_v}` has diameter `< eps`. Members have distance 0
/// and weight 1, so the map restricted to the sample is subordinate to the
/// cover.
#[derive(Debug, Clone)]
pub struct NerveMap {
    pub complex: SimplicialComplex,
    pub eps: f64,
    pub cover: Cover,
    pub set_diams: Vec<f64>,
    blends: Vec<f64>,
    sample_proj: Vec<Barycentric>,
    pub cert: EpsEmbeddingCert,
}

/// Build the nerve of a cover and the partition-of-unity map of the sample
/// into it. Faces are witnessed by sample points; `dim P = multiplicity - 1`.
pub fn nerve_embedding(metric: &dyn SampleMetric, cover: &Cover) -> Result<NerveMap> {
    let n = metric.len();
    let eps = cover.eps;
    let strict = eps * (1.0 - COVER_TOL);

    let set_diams: Vec<f64> = cover
        .sets
        .iter()
        .map(|s| set_diameter(metric, s))
        .collect();
    if let Some((i, &d)) = set_diams
        .iter()
        .enumerate()
        .find(|(_, &d)| d >= strict)
    {
        return Err(Error::InvalidParameter(format!(
            "cover mesh >= eps: set {i} has diameter {d}"
        )));
    }
    let blends: Vec<f64> = set_diams.iter().map(|d| (strict - d) / 2.0).collect();

    // Membership lists per point, in set order; these are the nerve faces.
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, set) in cover.sets.iter().enumerate() {
        for &p in set {
            membership[p].push(v);
        }
    }
    if let Some(p) = membership.iter().position(|m| m.is_empty()) {
        return Err(Error::InvalidParameter(format!(
            "cover misses sample point {p}"
        )));
    }
    let complex =
        SimplicialComplex::from_maximal_faces(cover.sets.len(), membership.clone())?;

    // Project the sample: weight 1 on each containing set (distance 0).
    let sample_proj: Vec<Barycentric> = membership
        .iter()
        .map(|sets| {
            Barycentric::normalized(sets.iter().map(|&v| (v, 1.0)).collect()).expect("nonempty")
        })
        .collect();

    // Certificate: star preimage diameters and equal-image fiber diameters.
    let mut max_star_diam = 0.0f64;
    for v in 0..cover.sets.len() {
        let star: Vec<usize> = (0..n)
            .filter(|&p| sample_proj[p].weights.iter().any(|&(w, x)| w == v && x > 0.0))
            .collect();
        max_star_diam = max_star_diam.max(set_diameter(metric, &star));
    }
    let mut max_fiber_diam = 0.0f64;
    let mut equal_image_pairs = 0;
    let mut violations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if sample_proj[i].linf_distance(&sample_proj[j]) <= 1e-12 {
                equal_image_pairs += 1;
                let d = metric.dist(i, j);
                max_fiber_diam = max_fiber_diam.max(d);
                if d >= eps {
                    violations.push((i, j));
                }
            }
        }
    }

    let cert = EpsEmbeddingCert {
        epsilon: eps,
        max_fiber_diam,
        equal_image_pairs,
        violations,
        max_star_diam,
    };
    Ok(NerveMap {
        complex,
        eps,
        cover: cover.clone(),
        set_diams,
        blends,
        sample_proj,
        cert,
    })
}

impl NerveMap {
    pub fn project_sample(&self, i: usize) -> &Barycentric {
        &self.sample_proj[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.cover.sets
    }

    /// Witness sample index for a vertex (its primary seed).
    pub fn witness(&self, v: usize) -> usize {
        self.cover.seeds[v]
    }

    /// Project a point given only its distances to the sample.
    ///
    /// Candidate sets are those with `d(point, set) < r_v`; candidates are
    /// then greedily restricted (nearest first) to a face of the nerve, so
    /// the image is a point of the complex. Every positive weight keeps the
    /// point inside the set's extended support, whose diameter is < eps.
    pub fn project_new(&self, dist_to_sample: &dyn Fn(usize) -> f64) -> Result<Barycentric> {
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        for (v, set) in self.cover.sets.iter().enumerate() {
            let d = set
                .iter()
                .map(|&p| dist_to_sample(p))
                .fold(f64::INFINITY, f64::min);
            if d < self.blends[v] {
                candidates.push((d, v));
            }
        }
        if candidates.is_empty() {
            return Err(Error::WindowTooSmall {
                context: "nerve projection".into(),
                required: "a sample point within the blend radius of the point".into(),
            });
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut face: Vec<usize> = Vec::new();
        let mut weights: Vec<(usize, f64)> = Vec::new();
        for (d, v) in candidates {
            let mut attempt = face.clone();
            attempt.push(v);
            attempt.sort_unstable();
            if self.complex.is_face(&attempt) {
                face = attempt;
                let w = (1.0 - d / self.blends[v]).max(1e-12);
                weights.push((v, w));
            }
        }
        Barycentric::normalized(weights)
    }
}

/// Approximate a sampled map `f` by a linear map on the nerve.
///
/// Requires the modulus `d(x, y) < eps  =>  |f(x) - f(y)| < delta` on the
/// sample. Vertices take the value of `f` at their witness; a vertex whose
/// star preimage is empty takes the barycenter of all sampled values (a
/// point of the convex target). The certificate re-evaluates
/// `|f(x) - g(pi(x))| < delta` at every sample point.
pub fn approximate_by_linear(
    nerve: &NerveMap,
    metric: &dyn SampleMetric,
    values: &[Vec<f64>],
    delta: f64,
    norm: Norm,
) -> Result<(LinearMap, f64)> {
    let n = metric.len();
    if values.len() != n {
        return Err(Error::InvalidParameter("values/sample length mismatch".into()));
    }
    // Modulus check with witnesses.
    for i in 0..n {
        for j in i + 1..n {
            let d = metric.dist(i, j);
            if d < nerve.eps {
                let gap = norm.dist(&values[i], &values[j]);
                if gap >= delta {
                    return Err(Error::ModulusViolation {
                        i,
                        j,
                        dist: d,
                        eps: nerve.eps,
                        gap,
                        delta,
                    });
                }
            }
        }
    }

    let target_dim = values.first().map(|v| v.len()).unwrap_or(0);
    let barycenter: Vec<f64> = (0..target_dim)
        .map(|c| values.iter().map(|v| v[c]).sum::<f64>() / n as f64)
        .collect();

    let images: Vec<Vec<f64>> = (0..nerve.complex.vertex_count())
        .map(|v| {
            let star_nonempty = nerve
                .sample_proj
                .iter()
                .any(|b| b.weights.iter().any(|&(w, x)| w == v && x > 0.0));
            if star_nonempty {
                values[nerve.witness(v)].clone()
            } else {
                barycenter.clone()
            }
        })
        .collect();
    let map = LinearMap::from_f64_images(nerve.complex.clone(), images)?;

    let mut max_err = 0.0f64;
    for i in 0..n {
        let img = map.eval_f64(nerve.project_sample(i));
        max_err = max_err.max(norm.dist(&img, &values[i]));
    }
    if max_err >= delta {
        return Err(Error::CertificationFailed(format!(
            "linear approximation error {max_err} >= delta {delta}"
        )));
    }
    Ok((map, max_err))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_metric(points: &[f64]) -> DenseMetric {
        DenseMetric::from_fn(points.len(), |i, j| (points[i] - points[j]).abs())
    }

    #[test]
    fn greedy_cover_merges_to_two_sets() {
        let metric = line_metric(&[0.0, 0.5, 1.0]);
        let cover = greedy_cover(&metric, 0.6).unwrap();
        assert_eq!(cover.sets.len(), 2);
        assert_eq!(cover.multiplicity, 1);
        let mut sizes: Vec<usize> = cover.sets.iter().map(|s| s.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]);
    }

    #[test]
    fn greedy_cover_single_set_cases() {
        let metric = line_metric(&[0.1, 0.2, 0.3]);
        let cover = greedy_cover(&metric, 1.0).unwrap();
        assert_eq!(cover.sets.len(), 1);

        let single = line_metric(&[42.0]);
        let cover = greedy_cover(&single, 0.5).unwrap();
        assert_eq!(cover.sets.len(), 1);
        assert_eq!(cover.multiplicity, 1);
    }

    #[test]
    fn nerve_of_far_clusters_is_discrete() {
        let metric = line_metric(&[0.0, 0.01, 5.0, 5.01]);
        let cover = greedy_cover(&metric, 0.5).unwrap();
        let nerve = nerve_embedding(&metric, &cover).unwrap();
        assert_eq!(nerve.complex.dim(), 0);
        assert_eq!(nerve.complex.vertex_count(), 2);
        assert!(nerve.cert.ok());
        // Points in the same cluster map to the same vertex.
        assert_eq!(nerve.project_sample(0), nerve.project_sample(1));
        assert_ne!(nerve.project_sample(1), nerve.project_sample(2));
    }

    #[test]
    fn nerve_matches_brute_force_on_overlaps() {
        // Three points pairwise within eps: cover merges them into one set,
        // so the nerve is a single vertex; with a finer eps the sets split.
        let metric = line_metric(&[0.0, 0.3, 0.6]);
        let cover = greedy_cover(&metric, 0.7).unwrap();
        let nerve = nerve_embedding(&metric, &cover).unwrap();
        // Brute-force nerve: faces = membership sets of the points.
        for p in 0..3 {
            let face: Vec<usize> = (0..cover.sets.len())
                .filter(|&v| cover.sets[v].binary_search(&p).is_ok())
                .collect();
            assert!(nerve.complex.is_face(&face));
        }
        assert!(nerve.cert.ok());
        assert!(nerve.cert.max_star_diam < 0.7);
    }

    #[test]
    fn project_new_agrees_near_sample_points() {
        let points = [0.0, 0.5, 1.0, 1.5, 2.0];
        let metric = line_metric(&points);
        let cover = greedy_cover(&metric, 0.8).unwrap();
        let nerve = nerve_embedding(&metric, &cover).unwrap();
        // A fresh point exactly at a sample lands on a face containing the
        // sample's sets with positive weight.
        let fresh = nerve.project_new(&|i| (points[i] - 0.5).abs()).unwrap();
        assert!(fresh.weights.iter().all(|&(_, w)| w > 0.0));
        assert!(nerve.complex.is_face(&fresh.support()));
        // A point far from every sample is rejected.
        assert!(nerve.project_new(&|i| (points[i] - 50.0).abs()).is_err());
    }

    #[test]
    fn approximate_constant_map_is_exact() {
        let metric = line_metric(&[0.0, 0.2, 0.4, 0.6]);
        let cover = greedy_cover(&metric, 0.5).unwrap();
        let nerve = nerve_embedding(&metric, &cover).unwrap();
        let values = vec![vec![0.7]; 4];
        let (map, err) = approximate_by_linear(&nerve, &metric, &values, 0.1, Norm::Linf).unwrap();
        assert_eq!(err, 0.0);
        for i in 0..4 {
            assert_eq!(map.eval_f64(nerve.project_sample(i)), vec![0.7]);
        }
    }

    #[test]
    fn approximate_identity_within_mesh() {
        let points: Vec<f64> = (0..21).map(|i| i as f64 * 0.05).collect();
        let metric = line_metric(&points);
        let eps = 0.15;
        let cover = greedy_cover(&metric, eps).unwrap();
        let nerve = nerve_embedding(&metric, &cover).unwrap();
        let values: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
        // Modulus: d(x, y) < eps => |x - y| < eps <= delta.
        let delta = eps + 1e-9;
        let (_, err) = approximate_by_linear(&nerve, &metric, &values, delta, Norm::Linf).unwrap();
        assert!(err < delta);
    }

    #[test]
    fn modulus_violation_names_pair() {
        let metric = line_metric(&[0.0, 0.1]);
        let cover = greedy_cover(&metric, 0.5).unwrap();
        let nerve = nerve_embedding(&metric, &cover).unwrap();
        let values = vec![vec![0.0], vec![0.9]];
        match approximate_by_linear(&nerve, &metric, &values, 0.5, Norm::Linf) {
            Err(Error::ModulusViolation { i, j, .. }) => assert_eq!((i, j), (0, 1)),
            other => panic!("expected modulus violation, got {other:?}"),
        }
    }
}
