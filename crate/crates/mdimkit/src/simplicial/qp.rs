//! Euclidean distances to simplex images via small quadratic programs, and
//! the explicit barycentric-lattice covering count for linear images.
//!
//! The QP solver enumerates faces of the simplex (subsets of active
//! vertices), solves the equality-constrained least-squares problem on each
//! face's affine hull, and keeps feasible solutions; the optimum of the
//! convex program lies on some face, where the equality-constrained solution
//! is feasible, so the minimum over feasible face solutions is exact up to
//! floating-point arithmetic.

use serde::{Deserialize, Serialize};

use crate::simplicial::{Barycentric, LinearMap, Norm};
use crate::rng::CounterRng;
use crate::{Error, Result};

const FEAS_TOL: f64 = 1e-10;

/// Solve a dense linear system in place; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u64..(1 << n)).map(move |mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
}

/// Euclidean distance from `p` to the simplex spanned by `vertices`, with
/// the optimal barycentric coordinates.
pub fn point_to_simplex_distance(vertices: &[Vec<f64>], p: &[f64]) -> (f64, Vec<f64>) {
    assert!(
        vertices.len() <= 16,
        "face too large for exhaustive QP ({} vertices)",
        vertices.len()
    );
    let dim = p.len();
    let mut best = f64::INFINITY;
    let mut best_lambda = vec![0.0; vertices.len()];
    for subset in subsets(vertices.len()) {
        let m = subset.len();
        if m == 1 {
            // Single vertex: distance is direct (and exactly zero for a
            // bitwise-equal point, which the decoders rely on).
            let v = &vertices[subset[0]];
            let d = v
                .iter()
                .zip(p)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if d < best {
                best = d;
                best_lambda = vec![0.0; vertices.len()];
                best_lambda[subset[0]] = 1.0;
            }
            continue;
        }
        // KKT of: minimize |V l - p|^2 subject to sum l = 1.
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (i, &vi) in subset.iter().enumerate() {
            for (j, &vj) in subset.iter().enumerate() {
                a[i][j] = 2.0
                    * vertices[vi]
                        .iter()
                        .zip(&vertices[vj])
                        .map(|(x, y)| x * y)
                        .sum::<f64>();
            }
            a[i][m] = 1.0;
            a[m][i] = 1.0;
            b[i] = 2.0 * vertices[vi].iter().zip(p).map(|(x, y)| x * y).sum::<f64>();
        }
        b[m] = 1.0;
        let Some(sol) = solve(a, b) else { continue };
        if sol[..m].iter().any(|&l| l < -FEAS_TOL) {
            continue;
        }
        let mut img = vec![0.0; dim];
        for (i, &vi) in subset.iter().enumerate() {
            for (o, c) in img.iter_mut().zip(&vertices[vi]) {
                *o += sol[i] * c;
            }
        }
        let d = img
            .iter()
            .zip(p)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        if d < best {
            best = d;
            best_lambda = vec![0.0; vertices.len()];
            for (i, &vi) in subset.iter().enumerate() {
                best_lambda[vi] = sol[i].max(0.0);
            }
        }
    }
    (best, best_lambda)
}

/// Euclidean distance from a point to the image of a linear map: the minimum
/// over maximal faces of the distance to the face's image simplex.
pub fn image_distance(map: &LinearMap, p: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for face in map.complex.maximal_faces() {
        let vertices: Vec<Vec<f64>> = face
            .iter()
            .map(|&v| map.vertex_image_f64(v).to_vec())
            .collect();
        let (d, _) = point_to_simplex_distance(&vertices, p);
        best = best.min(d);
    }
    best
}

/// Minimum Euclidean distance between two simplices.
pub fn simplex_pair_distance(va: &[Vec<f64>], vb: &[Vec<f64>]) -> f64 {
    assert!(va.len() <= 12 && vb.len() <= 12, "faces too large");
    let mut best = f64::INFINITY;
    for sa in subsets(va.len()) {
        for sb in subsets(vb.len()) {
            let ma = sa.len();
            let mb = sb.len();
            let n = ma + mb + 2;
            // Variables: lambda (ma), mu (mb), alpha, beta.
            // KKT of: minimize |A l - B m|^2, sum l = 1, sum m = 1.
            let mut a = vec![vec![0.0; n]; n];
            let mut b = vec![0.0; n];
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
            for (i, &ai) in sa.iter().enumerate() {
                for (j, &aj) in sa.iter().enumerate() {
                    a[i][j] = 2.0 * dot(&va[ai], &va[aj]);
                }
                for (j, &bj) in sb.iter().enumerate() {
                    a[i][ma + j] = -2.0 * dot(&va[ai], &vb[bj]);
                }
                a[i][ma + mb] = 1.0;
                a[ma + mb][i] = 1.0;
            }
            for (i, &bi) in sb.iter().enumerate() {
                for (j, &aj) in sa.iter().enumerate() {
                    a[ma + i][j] = -2.0 * dot(&vb[bi], &va[aj]);
                }
                for (j, &bj) in sb.iter().enumerate() {
                    a[ma + i][ma + j] = 2.0 * dot(&vb[bi], &vb[bj]);
                }
                a[ma + i][ma + mb + 1] = 1.0;
                a[ma + mb + 1][ma + i] = 1.0;
            }
            b[ma + mb] = 1.0;
            b[ma + mb + 1] = 1.0;
            let Some(sol) = solve(a, b) else { continue };
            if sol[..ma + mb].iter().any(|&l| l < -FEAS_TOL) {
                continue;
            }
            let dim = va[0].len();
            let mut diff = vec![0.0; dim];
            for (i, &ai) in sa.iter().enumerate() {
                for (o, c) in diff.iter_mut().zip(&va[ai]) {
                    *o += sol[i] * c;
                }
            }
            for (i, &bi) in sb.iter().enumerate() {
                for (o, c) in diff.iter_mut().zip(&vb[bi]) {
                    *o -= sol[ma + i] * c;
                }
            }
            let d = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Minimum distance between the images of two linear maps (optionally
/// restricted to coordinate subsets), over all pairs of maximal faces.
pub fn maps_min_distance(
    a: &LinearMap,
    coords_a: Option<&[usize]>,
    b: &LinearMap,
    coords_b: Option<&[usize]>,
) -> f64 {
    let restrict = |img: &[f64], coords: Option<&[usize]>| -> Vec<f64> {
        match coords {
            Some(cs) => cs.iter().map(|&c| img[c]).collect(),
            None => img.to_vec(),
        }
    };
    let mut best = f64::INFINITY;
    for fa in a.complex.maximal_faces() {
        let va: Vec<Vec<f64>> = fa
            .iter()
            .map(|&v| restrict(a.vertex_image_f64(v), coords_a))
            .collect();
        for fb in b.complex.maximal_faces() {
            let vb: Vec<Vec<f64>> = fb
                .iter()
                .map(|&v| restrict(b.vertex_image_f64(v), coords_b))
                .collect();
            best = best.min(simplex_pair_distance(&va, &vb));
        }
    }
    best
}

/// Result of the barycentric-lattice covering construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverCount {
    pub count: u64,
    /// Rescale factor applied so the image has diameter <= 1.
    pub scale: f64,
    pub coverage_checked: usize,
    pub coverage_ok: bool,
}

/// Cover the image of a linear map by balls of radius `eps/2` around the
/// explicit barycentric lattice: per maximal face with base vertex `v_0` and
/// edges `u_i`, grid points `a + sum x_i u_i` with `x_i` running over
/// multiples of `eps / (2n)`, `n = dim P`. Returns the lattice size and
/// verifies on a dense sample that every image point is within `eps/2` of a
/// grid point. The image is rescaled to diameter <= 1 first (scale
/// reported).
pub fn polytope_cover_count(map: &LinearMap, eps: f64, norm: Norm) -> Result<CoverCount> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter("need 0 < eps <= 1".into()));
    }
    let vcount = map.complex.vertex_count();
    // Image diameter is attained at vertex images.
    let mut diam = 0.0f64;
    for i in 0..vcount {
        for j in i + 1..vcount {
            diam = diam.max(norm.dist(map.vertex_image_f64(i), map.vertex_image_f64(j)));
        }
    }
    let scale = if diam > 1.0 { 1.0 / diam } else { 1.0 };
    let image = |v: usize| -> Vec<f64> {
        map.vertex_image_f64(v).iter().map(|c| c * scale).collect()
    };

    let n = map.complex.dim();
    let steps = if n == 0 {
        0
    } else {
        (2.0 * n as f64 / eps).floor() as u64
    };

    let mut grid: Vec<Vec<f64>> = Vec::new();
    let mut count = 0u64;
    for face in map.complex.maximal_faces() {
        let base = image(face[0]);
        let edges: Vec<Vec<f64>> = face[1..]
            .iter()
            .map(|&v| {
                image(v)
                    .iter()
                    .zip(&base)
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let m = edges.len();
        count += (steps + 1).pow(m as u32);
        // Materialize the face grid for the coverage check.
        let mut coeffs = vec![0u64; m];
        loop {
            let mut point = base.clone();
            for (i, edge) in edges.iter().enumerate() {
                let x = if n == 0 {
                    0.0
                } else {
                    coeffs[i] as f64 * eps / (2.0 * n as f64)
                };
                for (o, c) in point.iter_mut().zip(edge) {
                    *o += x * c;
                }
            }
            grid.push(point);
            // Odometer.
            let mut i = 0;
            loop {
                if i == m {
                    break;
                }
                if coeffs[i] < steps {
                    coeffs[i] += 1;
                    for c in coeffs.iter_mut().take(i) {
                        *c = 0;
                    }
                    break;
                }
                i += 1;
            }
            if i == m {
                break;
            }
        }
    }

    // Dense-sample coverage: vertices, midpoints, and seeded random
    // barycentric points of every maximal face.
    let mut checked = 0usize;
    let mut ok = true;
    let mut rng = CounterRng::new(&[0x636f76, vcount as u64]);
    'faces: for face in map.complex.maximal_faces() {
        let verts: Vec<Vec<f64>> = face.iter().map(|&v| image(v)).collect();
        let mut samples: Vec<Vec<f64>> = verts.clone();
        let m = verts.len();
        if m > 1 {
            let centroid: Vec<f64> = (0..verts[0].len())
                .map(|c| verts.iter().map(|v| v[c]).sum::<f64>() / m as f64)
                .collect();
            samples.push(centroid);
            for _ in 0..50 {
                let mut w: Vec<f64> = (0..m).map(|_| rng.next_f64()).collect();
                let total: f64 = w.iter().sum();
                for wi in &mut w {
                    *wi /= total;
                }
                let pt: Vec<f64> = (0..verts[0].len())
                    .map(|c| w.iter().zip(&verts).map(|(wi, v)| wi * v[c]).sum())
                    .collect();
                samples.push(pt);
            }
        }
        for s in &samples {
            checked += 1;
            let near = grid
                .iter()
                .map(|g| norm.dist(g, s))
                .fold(f64::INFINITY, f64::min);
            if near > eps / 2.0 + 1e-9 {
                ok = false;
                break 'faces;
            }
        }
    }

    Ok(CoverCount {
        count,
        scale,
        coverage_checked: checked,
        coverage_ok: ok,
    })
}

/// Evaluate a map at a barycentric point and return the Euclidean distance
/// to a target vector (helper for decoders).
pub fn eval_distance(map: &LinearMap, at: &Barycentric, target: &[f64]) -> f64 {
    let img = map.eval_f64(at);
    img.iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplicial::SimplicialComplex;

    #[test]
    fn distance_to_segment() {
        // Segment [0,1] x {0} in R^2; point (2,1) is sqrt 2 away.
        let verts = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let (d, lambda) = point_to_simplex_distance(&verts, &[2.0, 1.0]);
        assert!((d - 2.0f64.sqrt()).abs() < 1e-10);
        assert!((lambda[1] - 1.0).abs() < 1e-10); // nearest point is the endpoint

        // Interior point projects orthogonally.
        let (d, _) = point_to_simplex_distance(&verts, &[0.5, 0.3]);
        assert!((d - 0.3).abs() < 1e-10);

        // A point of the image has distance ~ 0.
        let (d, _) = point_to_simplex_distance(&verts, &[0.25, 0.0]);
        assert!(d < 1e-10);
    }

    #[test]
    fn distance_to_triangle() {
        let verts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let (d, _) = point_to_simplex_distance(&verts, &[1.0, 1.0]);
        // Nearest point on the hypotenuse is (0.5, 0.5).
        assert!((d - 0.5f64 * 2.0f64.sqrt()).abs() < 1e-10);
        let (d, _) = point_to_simplex_distance(&verts, &[0.2, 0.2]);
        assert!(d < 1e-12);
    }

    #[test]
    fn image_distance_over_faces() {
        let p = SimplicialComplex::from_maximal_faces(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let map = LinearMap::from_f64_images(
            p,
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![5.0, 0.0],
                vec![5.0, 1.0],
            ],
        )
        .unwrap();
        let d = image_distance(&map, &[4.8, 0.5]);
        assert!((d - 0.2).abs() < 1e-10);
        // Symmetric under relabeling: same value from the other face's side.
        let d2 = image_distance(&map, &[2.0, 0.0]);
        assert!((d2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pair_distance_between_segments() {
        let a = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let b = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!((simplex_pair_distance(&a, &b) - 1.0).abs() < 1e-10);

        // Crossing segments: distance 0.
        let c = vec![vec![0.5, -1.0], vec![0.5, 1.0]];
        assert!(simplex_pair_distance(&a, &c) < 1e-10);

        // Corner-to-corner.
        let d = vec![vec![2.0, 1.0], vec![3.0, 1.0]];
        assert!((simplex_pair_distance(&a, &d) - 2.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn cover_count_segment_bound() {
        // n = 1 segment of length 1, eps = 0.5: count <= (2*1+1)/0.5 = 6.
        let p = SimplicialComplex::simplex(1);
        let map = LinearMap::from_f64_images(p, vec![vec![0.0], vec![1.0]]).unwrap();
        let cc = polytope_cover_count(&map, 0.5, Norm::Linf).unwrap();
        assert!(cc.count <= 6);
        assert!(cc.coverage_ok);
        assert_eq!(cc.scale, 1.0);

        // eps = 1: count <= (2n+1)^n = 3.
        let cc1 = polytope_cover_count(&map, 1.0, Norm::Linf).unwrap();
        assert!(cc1.count <= 3);
        assert!(cc1.coverage_ok);
    }

    #[test]
    fn cover_count_triangle_bound() {
        let p = SimplicialComplex::simplex(2);
        let map = LinearMap::from_f64_images(
            p,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        for eps in [1.0, 0.5, 0.25] {
            let cc = polytope_cover_count(&map, eps, Norm::Linf).unwrap();
            let bound = (5.0f64 / eps).powi(2); // (2n+1)^n / eps^n at n = 2
            assert!(
                (cc.count as f64) <= bound,
                "count {} > bound {bound} at eps {eps}",
                cc.count
            );
            assert!(cc.coverage_ok);
        }
    }

    #[test]
    fn cover_count_rescales_large_images() {
        let p = SimplicialComplex::simplex(1);
        let map = LinearMap::from_f64_images(p, vec![vec![0.0], vec![4.0]]).unwrap();
        let cc = polytope_cover_count(&map, 0.5, Norm::Linf).unwrap();
        assert_eq!(cc.scale, 0.25);
        assert!(cc.coverage_ok);
    }
}
