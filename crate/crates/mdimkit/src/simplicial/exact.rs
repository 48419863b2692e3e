//! Exact rational linear algebra for general-position certificates.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Exact rational representation of an `f64` (every finite float is a
/// dyadic rational).
pub fn rat_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    let num = x.numer();
    let den = x.denom();
    // Good enough for mirrors of values that came from f64 or 53-bit draws.
    let nf = bigint_to_f64(num);
    let df = bigint_to_f64(den);
    nf / df
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    let (sign, digits) = x.to_u64_digits();
    let mut v = 0.0f64;
    for d in digits.iter().rev() {
        v = v * 18446744073709551616.0 + *d as f64;
    }
    match sign {
        num_bigint::Sign::Minus => -v,
        _ => v,
    }
}

pub fn rat_zero() -> BigRational {
    BigRational::zero()
}

/// Rank of a rational matrix, exactly: rows are cleared of denominators
/// (row scaling preserves rank) and reduced by fraction-free Bareiss
/// elimination over the integers, which avoids per-operation gcds.
pub fn rank(rows: Vec<Vec<BigRational>>) -> usize {
    let nrows = rows.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m: Vec<Vec<BigInt>> = rows
        .into_iter()
        .map(|row| {
            let lcm = row
                .iter()
                .fold(BigInt::from(1), |acc, e| num_integer::lcm(acc, e.denom().clone()));
            row.iter()
                .map(|e| e.numer() * (&lcm / e.denom()))
                .collect()
        })
        .collect();

    let mut rank = 0;
    let mut row = 0;
    let mut prev = BigInt::from(1);
    for col in 0..ncols {
        if row >= nrows {
            break;
        }
        let Some(p) = (row..nrows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let pivot = m[row][col].clone();
        for r in row + 1..nrows {
            for c in col + 1..ncols {
                let num = &m[r][c] * &pivot - &m[r][col] * &m[row][c];
                let v = &num / &prev;
                debug_assert!((&v * &prev) == num, "Bareiss division must be exact");
                m[r][c] = v;
            }
            m[r][col] = BigInt::from(0);
        }
        prev = pivot;
        row += 1;
        rank += 1;
    }
    rank
}

/// Affine independence of a tuple of points: the difference vectors from the
/// first point have full rank `len - 1`.
pub fn affinely_independent(points: &[&[BigRational]]) -> bool {
    if points.len() <= 1 {
        return true;
    }
    let base = points[0];
    let rows: Vec<Vec<BigRational>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(a, b)| a - b).collect())
        .collect();
    rank(rows) == points.len() - 1
}

/// Solve the square-ish system `A x = b` exactly; `None` when inconsistent
/// or underdetermined.
fn solve_exact(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let nrows = a.len();
    let ncols = if nrows == 0 { 0 } else { a[0].len() };
    let mut aug: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row >= nrows {
            break;
        }
        let pivot = (row..nrows).find(|&r| !aug[r][col].is_zero());
        let Some(p) = pivot else { continue };
        aug.swap(row, p);
        for r in 0..nrows {
            if r != row && !aug[r][col].is_zero() {
                let factor = &aug[r][col] / &aug[row][col];
                for c in col..=ncols {
                    let sub = &factor * &aug[row][c];
                    aug[r][c] -= sub;
                }
            }
        }
        pivot_cols.push((row, col));
        row += 1;
    }
    // Inconsistent?
    for r in row..nrows {
        if !aug[r][ncols].is_zero() {
            return None;
        }
    }
    // Underdetermined?
    if pivot_cols.len() < ncols {
        return None;
    }
    let mut x = vec![BigRational::zero(); ncols];
    for &(r, c) in &pivot_cols {
        x[c] = &aug[r][ncols] / &aug[r][c];
    }
    Some(x)
}

/// Visit all `size`-subsets of `0..n` in lexicographic order until the
/// visitor returns `true`; returns whether any visit did.
pub fn for_each_combination<F: FnMut(&[usize]) -> bool>(n: usize, size: usize, mut f: F) -> bool {
    if size > n || size == 0 {
        return false;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        if f(&idx) {
            return true;
        }
        // Advance to the next combination.
        let mut i = size;
        while i > 0 {
            i -= 1;
            if idx[i] < i + n - size {
                idx[i] += 1;
                for j in i + 1..size {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return false;
            }
        }
    }
}

/// Number of `size`-subsets of `0..n`, saturating at `u64::MAX`.
pub fn combination_count(n: usize, size: usize) -> u64 {
    if size > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..size {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Does the convex hull of the points contain the origin? Exact, via
/// Caratheodory: the origin lies in the hull iff some affinely independent
/// subset carries it with nonnegative barycentric weights.
pub fn hull_contains_origin(points: &[&[BigRational]]) -> bool {
    if points.is_empty() {
        return false;
    }
    let dim = points[0].len();
    let n = points.len();
    let max_size = (dim + 1).min(n);
    for size in 1..=max_size {
        let found = for_each_combination(n, size, |idx| {
            let subset: Vec<&[BigRational]> = idx.iter().map(|&i| points[i]).collect();
            if !affinely_independent(&subset) {
                return false;
            }
            // Solve sum lambda_i p_i = 0, sum lambda_i = 1.
            let mut a: Vec<Vec<BigRational>> = Vec::with_capacity(dim + 1);
            for c in 0..dim {
                a.push(subset.iter().map(|p| p[c].clone()).collect());
            }
            a.push(vec![BigRational::new(1.into(), 1.into()); size]);
            let mut b = vec![BigRational::zero(); dim];
            b.push(BigRational::new(1.into(), 1.into()));
            match solve_exact(&a, &b) {
                Some(lambda) => lambda.iter().all(|l| !l.is_negative()),
                None => false,
            }
        });
        if found {
            return true;
        }
    }
    false
}
