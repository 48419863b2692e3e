//! Seeded generic linear maps with exact-arithmetic general-position
//! certificates.
//!
//! Vertex images are dyadic rationals (53-bit numerators over 2^53), drawn
//! deterministically from a seed. Three certificate tags cover the uses:
//!
//! * `EmbeddingCube { n }`: every `(n+1)`-tuple of vertex images in
//!   `[0,1]^n` is affinely independent; with `2 dim P + 2 <= n + 1` the
//!   linear map is injective on the complex.
//! * `ZeroCoordinate { n }`: for every coordinate subset `A` and every
//!   `|A|`-tuple of vertex images, the convex hull of the restrictions to
//!   `A` avoids the origin; then no point of the complex has more than
//!   `dim P` exactly-zero output coordinates.
//! * `WindowRestriction { .. }`: images live in `(R^dim_v)^{[n_big]^k}`; any
//!   `n_small^k * dim_v + 1` distinct restrictions `u|_{b + [n_small]}` are
//!   affinely independent, so equal restricted blocks force equal points and
//!   equal offsets.
//!
//! Certificates enumerate tuples exhaustively up to a cap and otherwise
//! certify a seeded random sub-family, recording the cap; a failed
//! certificate triggers a resample with the next seed, with the count
//! reported (expected zero).

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::box_points;
use crate::rng::CounterRng;
use crate::simplicial::exact::{
    affinely_independent, combination_count, for_each_combination, hull_contains_origin,
};
use crate::simplicial::{LinearMap, SimplicialComplex};
use crate::{Error, Result};

/// Target space and property to certify.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetTag {
    /// Linear embedding into `[0,1]^n`; requires `dim P < n/2`.
    EmbeddingCube { n: usize },
    /// Into `R^n`, with at most `dim P` zero coordinates anywhere.
    ZeroCoordinate { n: usize },
    /// Into `(R^dim_v)^{[n_big]^k}` with affinely independent window
    /// restrictions of side `n_small`; requires
    /// `dim P < n_small^k * dim_v / 2`.
    WindowRestriction {
        n_small: usize,
        n_big: usize,
        dim_v: usize,
        k: usize,
    },
}

impl TargetTag {
    pub fn target_dim(&self) -> usize {
        match self {
            TargetTag::EmbeddingCube { n } => *n,
            TargetTag::ZeroCoordinate { n } => *n,
            TargetTag::WindowRestriction {
                n_big, dim_v, k, ..
            } => n_big.pow(*k as u32) * dim_v,
        }
    }

    fn check_dimension_hypothesis(&self, dim_p: usize) -> Result<()> {
        let ok = match self {
            TargetTag::EmbeddingCube { n } => (dim_p as f64) < *n as f64 / 2.0,
            TargetTag::ZeroCoordinate { .. } => true,
            TargetTag::WindowRestriction {
                n_small, dim_v, k, ..
            } => (dim_p as f64) < (n_small.pow(*k as u32) * dim_v) as f64 / 2.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "dimension hypothesis fails: dim P = {dim_p} too large for {self:?}"
            )))
        }
    }
}

/// Outcome of a general-position certification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericCert {
    pub tag: TargetTag,
    pub tuples_checked: u64,
    pub tuples_total: u64,
    pub cap: u64,
    pub subsampled: bool,
    pub resamples: u32,
}

/// Draw a seeded generic linear map and certify the tag, resampling with the
/// next seed on certification failure (up to 16 attempts).
pub fn sample_generic_linear(
    complex: &SimplicialComplex,
    tag: &TargetTag,
    seed: u64,
    cap: u64,
) -> Result<(LinearMap, GenericCert)> {
    tag.check_dimension_hypothesis(complex.dim())?;
    let target_dim = tag.target_dim();
    for attempt in 0..16u32 {
        let images = draw_images(complex.vertex_count(), target_dim, seed + attempt as u64);
        let map = LinearMap::new(complex.clone(), images)?;
        if let Some(mut cert) = certify(&map, tag, seed, cap) {
            cert.resamples = attempt;
            return Ok((map, cert));
        }
    }
    Err(Error::CertificationFailed(format!(
        "no certified draw in 16 attempts for {tag:?}"
    )))
}

/// Perturb given images toward fresh generic draws:
/// `u = (1 - gamma) base + gamma fresh`, staying in the convex target, then
/// certify the tag. The result is within `gamma * max|fresh - base|` of the
/// base in every coordinate.
pub fn perturb_generic(
    complex: &SimplicialComplex,
    base: &[Vec<f64>],
    gamma: f64,
    tag: &TargetTag,
    seed: u64,
    cap: u64,
) -> Result<(LinearMap, GenericCert)> {
    tag.check_dimension_hypothesis(complex.dim())?;
    if base.len() != complex.vertex_count() {
        return Err(Error::InvalidParameter("base image count mismatch".into()));
    }
    let target_dim = tag.target_dim();
    if base.iter().any(|v| v.len() != target_dim) {
        return Err(Error::InvalidParameter(format!(
            "base images must have dimension {target_dim}"
        )));
    }
    let gamma_rat = super::exact::rat_from_f64(gamma);
    let one_minus = super::exact::rat_from_f64(1.0 - gamma);
    for attempt in 0..16u32 {
        let fresh = draw_images(complex.vertex_count(), target_dim, seed + attempt as u64);
        let images: Vec<Vec<BigRational>> = base
            .iter()
            .zip(&fresh)
            .map(|(b, f)| {
                b.iter()
                    .zip(f)
                    .map(|(&bc, fc)| {
                        &one_minus * super::exact::rat_from_f64(bc) + &gamma_rat * fc
                    })
                    .collect()
            })
            .collect();
        let map = LinearMap::new(complex.clone(), images)?;
        if let Some(mut cert) = certify(&map, tag, seed, cap) {
            cert.resamples = attempt;
            return Ok((map, cert));
        }
    }
    Err(Error::CertificationFailed(format!(
        "no certified perturbation in 16 attempts for {tag:?}"
    )))
}

fn draw_images(vertices: usize, target_dim: usize, seed: u64) -> Vec<Vec<BigRational>> {
    let denom: num_bigint::BigInt = (1u64 << 53).into();
    (0..vertices)
        .map(|v| {
            let mut rng = CounterRng::new(&[seed, v as u64, 0x696d67]);
            (0..target_dim)
                .map(|_| BigRational::new(rng.next_dyadic_numerator().into(), denom.clone()))
                .collect()
        })
        .collect()
}

/// Run the tag's exact certificate; `None` on failure (caller resamples).
fn certify(map: &LinearMap, tag: &TargetTag, seed: u64, cap: u64) -> Option<GenericCert> {
    let ok = match tag {
        TargetTag::EmbeddingCube { n } => {
            let images: Vec<&[BigRational]> = (0..map.complex.vertex_count())
                .map(|v| map.vertex_image(v))
                .collect();
            tuples_affinely_independent(&images, n + 1, seed, cap)
        }
        TargetTag::ZeroCoordinate { n } => {
            let images: Vec<&[BigRational]> = (0..map.complex.vertex_count())
                .map(|v| map.vertex_image(v))
                .collect();
            zero_coordinate_cert(&images, *n, seed, cap)
        }
        TargetTag::WindowRestriction {
            n_small,
            n_big,
            dim_v,
            k,
        } => {
            let restrictions = window_restrictions(map, *n_small, *n_big, *dim_v, *k);
            let refs: Vec<&[BigRational]> = restrictions.iter().map(|r| r.as_slice()).collect();
            let tuple = n_small.pow(*k as u32) * dim_v + 1;
            tuples_affinely_independent(&refs, tuple, seed, cap)
        }
    };
    ok.map(|(tuples_checked, tuples_total, subsampled)| GenericCert {
        tag: tag.clone(),
        tuples_checked,
        tuples_total,
        cap,
        subsampled,
        resamples: 0,
    })
}

/// All distinct restrictions `u_a|_{b + [n_small]}` of the vertex images,
/// laid out cell-major (`[n_big]^k` cells in lexicographic order, `dim_v`
/// coordinates per cell).
pub fn window_restrictions(
    map: &LinearMap,
    n_small: usize,
    n_big: usize,
    dim_v: usize,
    k: usize,
) -> Vec<Vec<BigRational>> {
    let big_cells = box_points(&vec![0; k], &vec![n_big as i64 - 1; k]);
    let cell_index = |coords: &[i64]| -> usize {
        big_cells
            .iter()
            .position(|c| c.0 == coords)
            .expect("cell in range")
    };
    let small_cells = box_points(&vec![0; k], &vec![n_small as i64 - 1; k]);
    let offsets = box_points(&vec![0; k], &vec![(n_big - n_small) as i64; k]);

    let mut out: Vec<Vec<BigRational>> = Vec::new();
    for v in 0..map.complex.vertex_count() {
        let img = map.vertex_image(v);
        for b in &offsets {
            let mut restricted = Vec::with_capacity(small_cells.len() * dim_v);
            for cell in &small_cells {
                let shifted: Vec<i64> = cell.0.iter().zip(&b.0).map(|(a, o)| a + o).collect();
                let ci = cell_index(&shifted);
                for d in 0..dim_v {
                    restricted.push(img[ci * dim_v + d].clone());
                }
            }
            out.push(restricted);
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Verify that every `tuple_size`-subset (or the full set when smaller) is
/// affinely independent; exhaustive up to `cap` tuples, seeded subsample
/// beyond. Returns `(checked, total, subsampled)` on success.
fn tuples_affinely_independent(
    points: &[&[BigRational]],
    tuple_size: usize,
    seed: u64,
    cap: u64,
) -> Option<(u64, u64, bool)> {
    let n = points.len();
    if n <= tuple_size {
        let all: Vec<&[BigRational]> = points.to_vec();
        return if affinely_independent(&all) {
            Some((1, 1, false))
        } else {
            None
        };
    }
    let total = combination_count(n, tuple_size);
    if total <= cap {
        let found_dependent = for_each_combination(n, tuple_size, |idx| {
            let tuple: Vec<&[BigRational]> = idx.iter().map(|&i| points[i]).collect();
            !affinely_independent(&tuple)
        });
        if found_dependent {
            None
        } else {
            Some((total, total, false))
        }
    } else {
        // Seeded random sub-family of `cap` tuples, in parallel.
        let ok = (0..cap)
            .into_par_iter()
            .map(|t| {
                let mut rng = CounterRng::new(&[seed, 0x74757065, t]);
                let mut idx: Vec<usize> = Vec::with_capacity(tuple_size);
                while idx.len() < tuple_size {
                    let c = rng.next_below(n as u64) as usize;
                    if !idx.contains(&c) {
                        idx.push(c);
                    }
                }
                let tuple: Vec<&[BigRational]> = idx.iter().map(|&i| points[i]).collect();
                affinely_independent(&tuple)
            })
            .all(|b| b);
        if ok {
            Some((cap, total, true))
        } else {
            None
        }
    }
}

/// The zero-coordinate certificate: for every nonempty coordinate subset `A`
/// and every `min(|A|, s)`-tuple of images, the hull of the restrictions to
/// `A` avoids the origin.
fn zero_coordinate_cert(
    points: &[&[BigRational]],
    n: usize,
    seed: u64,
    cap: u64,
) -> Option<(u64, u64, bool)> {
    let s = points.len();
    let mut checked = 0u64;
    let mut total = 0u64;
    let mut subsampled = false;
    // Coordinate subsets by bitmask.
    for mask in 1u64..(1u64 << n) {
        let coords: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let tuple_size = coords.len().min(s);
        let restrict = |i: usize| -> Vec<BigRational> {
            coords.iter().map(|&c| points[i][c].clone()).collect()
        };
        let count = combination_count(s, tuple_size);
        total = total.saturating_add(count);
        if count <= cap {
            let mut bad = false;
            for_each_combination(s, tuple_size, |idx| {
                checked += 1;
                let restricted: Vec<Vec<BigRational>> =
                    idx.iter().map(|&i| restrict(i)).collect();
                let refs: Vec<&[BigRational]> = restricted.iter().map(|r| r.as_slice()).collect();
                if hull_contains_origin(&refs) {
                    bad = true;
                    true
                } else {
                    false
                }
            });
            if bad {
                return None;
            }
        } else {
            subsampled = true;
            for t in 0..cap {
                checked += 1;
                let mut rng = CounterRng::new(&[seed, mask, t]);
                let mut idx: Vec<usize> = Vec::with_capacity(tuple_size);
                while idx.len() < tuple_size {
                    let c = rng.next_below(s as u64) as usize;
                    if !idx.contains(&c) {
                        idx.push(c);
                    }
                }
                let restricted: Vec<Vec<BigRational>> =
                    idx.iter().map(|&i| restrict(i)).collect();
                let refs: Vec<&[BigRational]> = restricted.iter().map(|r| r.as_slice()).collect();
                if hull_contains_origin(&refs) {
                    return None;
                }
            }
        }
    }
    Some((checked, total, subsampled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use num_traits::Zero;

    #[test]
    fn single_vertex_embedding_certifies() {
        let p = SimplicialComplex::discrete(1);
        let (map, cert) = sample_generic_linear(&p, &TargetTag::EmbeddingCube { n: 1 }, 3, 1000).unwrap();
        assert_eq!(cert.resamples, 0);
        assert_eq!(map.target_dim, 1);
        // Zero-coordinate tag: the sampled coordinate is nonzero a.s.
        let (map, _) = sample_generic_linear(&p, &TargetTag::ZeroCoordinate { n: 1 }, 3, 1000).unwrap();
        assert!(!map.vertex_image(0)[0].is_zero());
    }

    #[test]
    fn segment_into_cube3_embeds() {
        let p = SimplicialComplex::simplex(1); // dim 1 < 3/2
        let (map, cert) =
            sample_generic_linear(&p, &TargetTag::EmbeddingCube { n: 3 }, 5, 1000).unwrap();
        assert_eq!(cert.resamples, 0);
        assert!(!cert.subsampled);
        // Injectivity on a dense rational sample of the segment, exactly.
        let denom = 64i64;
        let mut seen: Vec<Vec<BigRational>> = Vec::new();
        for t in 0..=denom {
            let lam = BigRational::new(t.into(), denom.into());
            let mu = BigRational::new((denom - t).into(), denom.into());
            let img = map.eval_exact(&[(0, lam), (1, mu)]);
            assert!(!seen.contains(&img));
            seen.push(img);
        }
    }

    #[test]
    fn embedding_dimension_hypothesis_enforced() {
        let p = SimplicialComplex::simplex(2); // dim 2, needs n > 4
        assert!(sample_generic_linear(&p, &TargetTag::EmbeddingCube { n: 3 }, 1, 100).is_err());
    }

    #[test]
    fn zero_coordinate_bound_holds_on_samples() {
        let p = SimplicialComplex::simplex(1); // dim 1
        let (map, _) =
            sample_generic_linear(&p, &TargetTag::ZeroCoordinate { n: 3 }, 9, 10_000).unwrap();
        // Random rational points of the segment: at most dim P = 1 zero
        // coordinates, exactly.
        let mut rng = CounterRng::new(&[40]);
        for _ in 0..200 {
            let t = rng.next_below(97) as i64;
            let lam = BigRational::new(t.into(), 97.into());
            let mu = BigRational::new((97 - t).into(), 97.into());
            let img = map.eval_exact(&[(0, lam), (1, mu)]);
            let zeros = img.iter().filter(|c| c.is_zero()).count();
            assert!(zeros <= 1);
        }
    }

    #[test]
    fn window_restrictions_certify_and_separate() {
        // k = 1, N = 4, n = 2, V = R: restrictions are length-2 windows of
        // length-4 vectors; tuples of size 3 must be affinely independent.
        let p = SimplicialComplex::discrete(3);
        let tag = TargetTag::WindowRestriction {
            n_small: 2,
            n_big: 4,
            dim_v: 1,
            k: 1,
        };
        let (map, cert) = sample_generic_linear(&p, &tag, 11, 100_000).unwrap();
        assert_eq!(cert.resamples, 0);
        let restrictions = window_restrictions(&map, 2, 4, 1, 1);
        // 3 vertices x 3 offsets, all distinct almost surely.
        assert_eq!(restrictions.len(), 9);
        // Equal restrictions would have forced dedup; distinctness is the
        // window-injectivity conclusion for points = vertices.
    }

    #[test]
    fn perturbation_stays_close_and_certifies() {
        let p = SimplicialComplex::discrete(4);
        let base = vec![vec![0.5, 0.5]; 4];
        let (map, cert) =
            perturb_generic(&p, &base, 0.125, &TargetTag::EmbeddingCube { n: 2 }, 7, 10_000)
                .unwrap();
        assert_eq!(cert.resamples, 0);
        for v in 0..4 {
            for c in 0..2 {
                let delta = (map.vertex_image_f64(v)[c] - 0.5).abs();
                assert!(delta <= 0.125 + 1e-12);
            }
        }
    }

    #[test]
    fn capped_certification_subsamples() {
        let p = SimplicialComplex::discrete(30);
        let (_, cert) =
            sample_generic_linear(&p, &TargetTag::EmbeddingCube { n: 2 }, 13, 500).unwrap();
        assert!(cert.subsampled);
        assert_eq!(cert.tuples_checked, 500);
        assert!(cert.tuples_total > 500);
    }
}
