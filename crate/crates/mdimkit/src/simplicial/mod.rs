//! Simplicial complexes, linear maps into cubes, nerve-based certified
//! eps-embeddings, and exact generic-position certificates.
//!
//! Linear maps carry exact rational vertex images (every `f64` is a
//! rational, so float-sourced images are represented exactly) next to `f64`
//! mirrors for fast evaluation. General-position certificates are verified
//! in exact rational arithmetic; floating point appears only inside the
//! small quadratic programs that compute distances to simplex images.

pub mod cover;
pub mod exact;
pub mod generic;
pub mod qp;

use std::collections::BTreeSet;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cover::{
    approximate_by_linear, greedy_cover, nerve_embedding, Cover, EpsEmbeddingCert, NerveMap,
};
pub use exact::rat_from_f64;
pub use generic::{perturb_generic, sample_generic_linear, GenericCert, TargetTag};
pub use qp::{image_distance, point_to_simplex_distance, polytope_cover_count, simplex_pair_distance, CoverCount};

/// Norms used for image-space distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    Linf,
    L2,
}

impl Norm {
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::Linf => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            Norm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// A finite abstract simplicial complex on vertices `0..vertex_count`,
/// closed under taking subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplicialComplex {
    vertex_count: usize,
    maximal: Vec<Vec<usize>>,
    faces: BTreeSet<Vec<usize>>,
}

impl SimplicialComplex {
    pub fn from_maximal_faces(vertex_count: usize, maximal: Vec<Vec<usize>>) -> Result<Self> {
        let mut sorted_max: Vec<Vec<usize>> = Vec::new();
        let mut faces = BTreeSet::new();
        for f in &maximal {
            let mut face = f.clone();
            face.sort_unstable();
            face.dedup();
            if face.iter().any(|&v| v >= vertex_count) {
                return Err(Error::InvalidParameter(format!(
                    "face {face:?} uses a vertex >= {vertex_count}"
                )));
            }
            if face.is_empty() {
                continue;
            }
            // Downward closure.
            let m = face.len();
            for mask in 1u64..(1 << m) {
                let sub: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| face[i]).collect();
                faces.insert(sub);
            }
            sorted_max.push(face);
        }
        // Every vertex is a face (isolated vertices allowed).
        for v in 0..vertex_count {
            faces.insert(vec![v]);
        }
        // Drop maximal faces contained in others.
        sorted_max.sort();
        sorted_max.dedup();
        let max_filtered: Vec<Vec<usize>> = sorted_max
            .iter()
            .filter(|f| {
                !sorted_max
                    .iter()
                    .any(|g| g.len() > f.len() && f.iter().all(|v| g.contains(v)))
            })
            .cloned()
            .collect();
        Ok(SimplicialComplex {
            vertex_count,
            maximal: max_filtered,
            faces,
        })
    }

    /// Complex with `n` isolated vertices.
    pub fn discrete(n: usize) -> Self {
        SimplicialComplex::from_maximal_faces(n, (0..n).map(|v| vec![v]).collect()).expect("valid")
    }

    /// The full `n`-simplex on `n + 1` vertices.
    pub fn simplex(n: usize) -> Self {
        SimplicialComplex::from_maximal_faces(n + 1, vec![(0..=n).collect()]).expect("valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn dim(&self) -> usize {
        self.faces.iter().map(|f| f.len()).max().unwrap_or(1) - 1
    }

    pub fn faces(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.faces.iter()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn maximal_faces(&self) -> &[Vec<usize>] {
        &self.maximal
    }

    pub fn is_face(&self, face: &[usize]) -> bool {
        self.faces.contains(face)
    }

    /// Disjoint union of `copies` relabeled copies of the complex (the
    /// product with a finite index set); copy `j`'s vertex `v` becomes
    /// `j * vertex_count + v`.
    pub fn replicate(&self, copies: usize) -> SimplicialComplex {
        let mut maximal = Vec::new();
        for j in 0..copies {
            for f in &self.maximal {
                maximal.push(f.iter().map(|v| j * self.vertex_count + v).collect());
            }
        }
        SimplicialComplex::from_maximal_faces(self.vertex_count * copies, maximal).expect("valid")
    }

    /// Disjoint union of distinct complexes; returns vertex offsets.
    pub fn disjoint_union(parts: &[&SimplicialComplex]) -> (SimplicialComplex, Vec<usize>) {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0usize;
        let mut maximal = Vec::new();
        for p in parts {
            offsets.push(total);
            for f in &p.maximal {
                maximal.push(f.iter().map(|v| total + v).collect());
            }
            total += p.vertex_count;
        }
        (
            SimplicialComplex::from_maximal_faces(total, maximal).expect("valid"),
            offsets,
        )
    }
}

/// A point of a complex: sparse barycentric weights over vertices,
/// nonnegative and summing to one, supported on a face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barycentric {
    /// `(vertex, weight)` pairs sorted by vertex.
    pub weights: Vec<(usize, f64)>,
}

impl Barycentric {
    pub fn vertex(v: usize) -> Self {
        Barycentric {
            weights: vec![(v, 1.0)],
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.weights.iter().map(|&(v, _)| v).collect()
    }

    pub fn normalized(mut weights: Vec<(usize, f64)>) -> Result<Self> {
        weights.sort_by_key(|&(v, _)| v);
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("zero total weight".into()));
        }
        for w in &mut weights {
            w.1 /= total;
        }
        Ok(Barycentric { weights })
    }

    /// l-infinity distance between sparse weight vectors.
    pub fn linf_distance(&self, other: &Barycentric) -> f64 {
        let mut d = 0.0f64;
        let mut i = 0;
        let mut j = 0;
        while i < self.weights.len() || j < other.weights.len() {
            match (self.weights.get(i), other.weights.get(j)) {
                (Some(&(va, wa)), Some(&(vb, wb))) => {
                    if va == vb {
                        d = d.max((wa - wb).abs());
                        i += 1;
                        j += 1;
                    } else if va < vb {
                        d = d.max(wa.abs());
                        i += 1;
                    } else {
                        d = d.max(wb.abs());
                        j += 1;
                    }
                }
                (Some(&(_, wa)), None) => {
                    d = d.max(wa.abs());
                    i += 1;
                }
                (None, Some(&(_, wb))) => {
                    d = d.max(wb.abs());
                    j += 1;
                }
                (None, None) => break,
            }
        }
        d
    }
}

/// A linear map from a complex into `R^target_dim`: vertex images extended
/// barycentrically over every face. Images are exact rationals with `f64`
/// mirrors.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub complex: SimplicialComplex,
    images: Vec<Vec<BigRational>>,
    images_f64: Vec<Vec<f64>>,
    pub target_dim: usize,
}

impl LinearMap {
    pub fn new(complex: SimplicialComplex, images: Vec<Vec<BigRational>>) -> Result<Self> {
        if images.len() != complex.vertex_count() {
            return Err(Error::InvalidParameter(format!(
                "{} images for {} vertices",
                images.len(),
                complex.vertex_count()
            )));
        }
        let target_dim = images.first().map(|v| v.len()).unwrap_or(0);
        if images.iter().any(|v| v.len() != target_dim) {
            return Err(Error::InvalidParameter("ragged vertex images".into()));
        }
        let images_f64 = images
            .iter()
            .map(|v| v.iter().map(exact::rat_to_f64).collect())
            .collect();
        Ok(LinearMap {
            complex,
            images,
            images_f64,
            target_dim,
        })
    }

    pub fn from_f64_images(complex: SimplicialComplex, images: Vec<Vec<f64>>) -> Result<Self> {
        let exact_images = images
            .iter()
            .map(|v| v.iter().map(|&c| rat_from_f64(c)).collect())
            .collect();
        LinearMap::new(complex, exact_images)
    }

    pub fn vertex_image_f64(&self, v: usize) -> &[f64] {
        &self.images_f64[v]
    }

    pub fn vertex_image(&self, v: usize) -> &[BigRational] {
        &self.images[v]
    }

    pub fn eval_f64(&self, point: &Barycentric) -> Vec<f64> {
        let mut out = vec![0.0; self.target_dim];
        for &(v, w) in &point.weights {
            for (o, c) in out.iter_mut().zip(&self.images_f64[v]) {
                *o += w * c;
            }
        }
        out
    }

    pub fn eval_exact(&self, point: &[(usize, BigRational)]) -> Vec<BigRational> {
        let zero = BigRational::new(0.into(), 1.into());
        let mut out = vec![zero; self.target_dim];
        for (v, w) in point {
            for (o, c) in out.iter_mut().zip(&self.images[*v]) {
                *o += w * c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn closure_and_dim() {
        let p = SimplicialComplex::from_maximal_faces(4, vec![vec![0, 1, 2], vec![2, 3]]).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.is_face(&[0, 2]));
        assert!(p.is_face(&[3]));
        assert!(!p.is_face(&[0, 3]));
        assert_eq!(p.maximal_faces().len(), 2);
        // 7 faces of the triangle + edge {2,3} + vertex {3}.
        assert_eq!(p.face_count(), 9);
    }

    #[test]
    fn replicate_offsets_vertices() {
        let p = SimplicialComplex::simplex(1); // an edge
        let q = p.replicate(3);
        assert_eq!(q.vertex_count(), 6);
        assert!(q.is_face(&[2, 3]));
        assert!(!q.is_face(&[1, 2]));
        assert_eq!(q.dim(), 1);
    }

    #[test]
    fn linear_map_commutes_with_barycentric_combination() {
        let p = SimplicialComplex::simplex(1);
        let map = LinearMap::from_f64_images(p, vec![vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
        let mid = Barycentric::normalized(vec![(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(map.eval_f64(&mid), vec![0.5, 1.0]);

        // Exact rational evaluation on rational inputs.
        let half = BigRational::new(1.into(), 2.into());
        let exact = map.eval_exact(&[(0, half.clone()), (1, half)]);
        assert_eq!(exact[1], BigRational::one());
    }

    #[test]
    fn barycentric_linf() {
        let a = Barycentric::normalized(vec![(0, 1.0), (2, 1.0)]).unwrap();
        let b = Barycentric::normalized(vec![(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(a.linf_distance(&b), 0.5);
        assert_eq!(a.linf_distance(&a), 0.0);
    }
}
