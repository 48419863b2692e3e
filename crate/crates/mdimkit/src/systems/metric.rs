//! Windowed metrics on point windows.
//!
//! The base distance between two points is the weighted sum
//! `d(x, y) = sum_m 2^{-|m|} rho(x_m, y_m)` over lattice offsets, truncated
//! at a radius `W_t`, with the discarded tail reported through a closed-form
//! bound. The windowed metric is `d_Omega(x, y) = sup_{n in Omega} d(T^n x,
//! T^n y)`.

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_points, LatticePoint, LatticeSet};
use crate::systems::PointWindow;
use crate::{Error, Result};

/// Parameters of the truncated base metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricParams {
    /// Truncation radius `W_t`; offsets with `|m| <= W_t` contribute.
    pub truncation_radius: f64,
    /// Diameter of the per-cell value space, for the tail bound.
    pub cell_diameter: f64,
}

impl MetricParams {
    pub fn new(truncation_radius: f64, cell_diameter: f64) -> Self {
        MetricParams {
            truncation_radius,
            cell_diameter,
        }
    }

    pub fn tail_bound(&self, k: usize) -> f64 {
        weight_tail_bound(self.truncation_radius, k) * self.cell_diameter
    }
}

/// A distance value together with the truncation error of the base metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistanceValue {
    pub value: f64,
    pub truncation_error: f64,
}

/// Upper bound on `sum_{|m| > W} 2^{-|m|}` over `Z^k`.
///
/// Points with `j < |m| <= j+1` contribute at most `2^{-j}` each and number
/// at most `(2j+3)^k`, so the tail is dominated by
/// `sum_{j >= floor(W)} (2j+3)^k 2^{-j}`. The series is summed until its
/// terms decay by at least a factor `0.6` per step (which holds once
/// `(1 + 2/(2j+3))^k <= 1.2`), and the remainder is closed off by the
/// geometric bound `term * 0.6 / (1 - 0.6)`.
pub fn weight_tail_bound(w: f64, k: usize) -> f64 {
    let mut j = w.max(0.0).floor() as i64;
    let mut total = 0.0f64;
    loop {
        let term = (2.0 * j as f64 + 3.0).powi(k as i32) * 2.0f64.powi(-(j as i32));
        let growth = (1.0 + 2.0 / (2.0 * j as f64 + 3.0)).powi(k as i32);
        if growth <= 1.2 {
            // ratio of consecutive terms <= growth / 2 <= 0.6 from here on
            total += term / (1.0 - 0.6);
            return total;
        }
        total += term;
        j += 1;
    }
}

/// Offsets `|m| <= W_t` with their weights `2^{-|m|}`, in deterministic order.
pub fn weighted_offsets(w_t: f64, k: usize) -> Result<Vec<(LatticePoint, f64)>> {
    Ok(ball_points(w_t, k)?
        .iter()
        .map(|m| (m.clone(), 2.0f64.powf(-m.norm())))
        .collect())
}

/// Base distance `d(T^at x, T^at y)` of the truncated weighted-sum metric.
pub fn base_distance_at(
    x: &PointWindow,
    y: &PointWindow,
    at: &LatticePoint,
    offsets: &[(LatticePoint, f64)],
) -> Result<f64> {
    let mut total = 0.0;
    for (m, w) in offsets {
        let cell = at.add(m);
        let a = x.require_cell(&cell, "base_distance")?;
        let b = y.require_cell(&cell, "base_distance")?;
        total += w * a.distance(b);
    }
    Ok(total)
}

/// `d_Omega(x, y) = sup_{n in Omega} d(T^n x, T^n y)` with the truncation
/// error of the base metric attached.
///
/// Both windows must contain `Omega` inflated by the truncation radius; the
/// error otherwise names the missing inflation.
pub fn window_distance(
    x: &PointWindow,
    y: &PointWindow,
    omega: &LatticeSet,
    params: &MetricParams,
) -> Result<DistanceValue> {
    if omega.is_empty() {
        return Err(Error::InvalidParameter("window_distance over empty Omega".into()));
    }
    let k = omega.k();
    let offsets = weighted_offsets(params.truncation_radius, k)?;
    let mut sup: f64 = 0.0;
    for n in omega.iter() {
        let d = base_distance_at(x, y, n, &offsets).map_err(|e| match e {
            Error::WindowTooSmall { .. } => Error::WindowTooSmall {
                context: "window_distance".into(),
                required: format!(
                    "Omega inflated by the truncation radius W_t = {}",
                    params.truncation_radius
                ),
            },
            other => other,
        })?;
        sup = sup.max(d);
    }
    Ok(DistanceValue {
        value: sup,
        truncation_error: params.tail_bound(k),
    })
}
