//! Estimators over finite-window samples: covering numbers, entropy at a
//! scale, `widim` upper bounds, mean-dimension profiles along Folner
//! sequences, and orbit capacity.
//!
//! Desk scale cannot certify limits, so every limit quantity is reported as
//! grid values plus a running-inf structure and sensitivity diagnostics.
//! The inf-forms are one-sided certificates: a sup over sampled points lower
//! bounds the true sup, and an inf over tested windows upper bounds nothing
//! it should not.

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_points, cube_window, LatticePoint, LatticeSet};
use crate::simplicial::cover::{greedy_cover, nerve_embedding, NerveMap, SampleMetric};
use crate::systems::metric::{weight_tail_bound, weighted_offsets, MetricParams};
use crate::systems::{inflate, CellValue, PointWindow, ShiftSystem};
use crate::{Error, Result};

/// Greedy (and, for small samples, exact) covering number at mesh `eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringNumber {
    pub greedy: usize,
    /// Exact minimum by branch-and-bound over maximal cliques; computed for
    /// samples of at most [`EXACT_COVER_LIMIT`] points.
    pub exact: Option<usize>,
}

/// Largest sample size for which the exact set-cover search runs.
pub const EXACT_COVER_LIMIT: usize = 14;

/// Minimum number of diameter-< eps sets covering the sample: greedy upper
/// bound, plus the exact value for small samples.
pub fn covering_number(metric: &dyn SampleMetric, eps: f64) -> Result<CoveringNumber> {
    let cover = greedy_cover(metric, eps)?;
    let greedy = cover.sets.len();
    let n = metric.len();
    let exact = if n <= EXACT_COVER_LIMIT {
        Some(exact_cover(metric, eps))
    } else {
        None
    };
    if let Some(e) = exact {
        debug_assert!(e <= greedy);
    }
    Ok(CoveringNumber { greedy, exact })
}

/// Exact minimum clique cover of the diameter-< eps graph (sets of diameter
/// < eps are exactly cliques), by branch and bound over maximal cliques.
fn exact_cover(metric: &dyn SampleMetric, eps: f64) -> usize {
    let n = metric.len();
    let adj: Vec<u32> = (0..n)
        .map(|i| {
            let mut row = 0u32;
            for j in 0..n {
                if i != j && metric.dist(i, j) < eps {
                    row |= 1 << j;
                }
            }
            row
        })
        .collect();

    // Bron-Kerbosch for maximal cliques.
    let mut cliques: Vec<u32> = Vec::new();
    fn bk(r: u32, mut p: u32, mut x: u32, adj: &[u32], out: &mut Vec<u32>) {
        if p == 0 && x == 0 {
            out.push(r);
            return;
        }
        let pivot = (p | x).trailing_zeros() as usize;
        let candidates = p & !adj[pivot];
        let mut cand = candidates;
        while cand != 0 {
            let v = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            bk(r | (1 << v), p & adj[v], x & adj[v], adj, out);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }
    bk(0, (1u32 << n) - 1, 0, &adj, &mut cliques);

    let full: u32 = (1u32 << n) - 1;
    let mut best = n; // singletons always cover
    fn search(covered: u32, used: usize, full: u32, cliques: &[u32], best: &mut usize) {
        if used >= *best {
            return;
        }
        if covered == full {
            *best = used;
            return;
        }
        let v = (!covered & full).trailing_zeros() as usize;
        for c in cliques.iter().filter(|c| *c & (1 << v) != 0) {
            search(covered | c, used + 1, full, cliques, best);
        }
    }
    search(0, 0, full, &cliques, &mut best);
    best
}

/// Metric `d_Omega` over a fixed sample of point windows, computed lazily
/// (no dense matrix; large samples stay affordable).
pub struct WindowedSampleMetric<'a> {
    pub windows: &'a [PointWindow],
    omega: &'a LatticeSet,
    offsets: Vec<(LatticePoint, f64)>,
}

impl<'a> WindowedSampleMetric<'a> {
    pub fn new(
        windows: &'a [PointWindow],
        omega: &'a LatticeSet,
        params: &MetricParams,
    ) -> Result<Self> {
        let offsets = weighted_offsets(params.truncation_radius, omega.k())?;
        Ok(WindowedSampleMetric {
            windows,
            omega,
            offsets,
        })
    }
}

impl SampleMetric for WindowedSampleMetric<'_> {
    fn len(&self) -> usize {
        self.windows.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        let (x, y) = (&self.windows[i], &self.windows[j]);
        let mut sup: f64 = 0.0;
        for n in self.omega.iter() {
            let mut total = 0.0;
            for (m, w) in &self.offsets {
                let cell = n.add(m);
                let a = x.cell(&cell).expect("window inflated by W_t");
                let b = y.cell(&cell).expect("window inflated by W_t");
                total += w * a.distance(b);
            }
            sup = sup.max(total);
        }
        sup
    }
}

/// One row of a scale profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub epsilon: f64,
    /// Window size: `N` for cubes, `R` for balls.
    pub window: f64,
    pub window_cells: usize,
    /// Raw quantity: `log A` or `widim` bound.
    pub raw: f64,
    /// Raw normalized by the cell count.
    pub normalized: f64,
    /// Running inf of `normalized` along the window grid at this epsilon.
    pub running_inf: f64,
    /// Sensitivity: |value at half the sample - value|.
    pub sensitivity: f64,
}

/// Grid values with running-inf structure; never a bare scalar.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ScaleProfile {
    pub rows: Vec<ProfileRow>,
}

impl ScaleProfile {
    /// Final running inf per epsilon, in epsilon order.
    pub fn inf_per_epsilon(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for row in &self.rows {
            match out.iter_mut().find(|(e, _)| *e == row.epsilon) {
                Some((_, v)) => *v = v.min(row.running_inf),
                None => out.push((row.epsilon, row.running_inf)),
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,window,cells,raw,normalized,running_inf,sensitivity\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epsilon, r.window, r.window_cells, r.raw, r.normalized, r.running_inf, r.sensitivity
            ));
        }
        s
    }
}

/// How entropy/mdim profiles obtain their samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SampleSpec {
    /// `sample_size` seeded draws from the system.
    Seeded { sample_size: u64 },
    /// Every legal symbolic block on the window (full shifts only; the
    /// sampler errors beyond `cap` blocks).
    ExhaustiveBlocks { cap: u64 },
}

fn gather_samples(
    system: &ShiftSystem,
    window: &LatticeSet,
    spec: &SampleSpec,
    seed: u64,
) -> Result<Vec<PointWindow>> {
    match spec {
        SampleSpec::Seeded { sample_size } => (0..*sample_size)
            .map(|i| system.sample(window, crate::rng::mix_words(&[seed, i])))
            .collect(),
        SampleSpec::ExhaustiveBlocks { cap } => {
            let alphabet = match (system.spec().kind.as_str(), system.spec().alphabet) {
                ("full", Some(a)) => a,
                _ => {
                    return Err(Error::InvalidParameter(
                        "exhaustive enumeration needs a symbolic full shift".into(),
                    ))
                }
            };
            let cells: Vec<LatticePoint> = window.iter().cloned().collect();
            let total = (alphabet as u64).checked_pow(cells.len() as u32);
            match total {
                Some(t) if t <= *cap => {}
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "exhaustive enumeration over {} cells exceeds the cap",
                        cells.len()
                    )))
                }
            }
            let total = total.unwrap();
            let mut out = Vec::with_capacity(total as usize);
            for code in 0..total {
                let mut w = PointWindow::new(window.k(), system.id());
                let mut c = code;
                for cell in &cells {
                    w.insert(cell.clone(), CellValue::symbol((c % alphabet as u64) as u32));
                    c /= alphabet as u64;
                }
                out.push(w);
            }
            Ok(out)
        }
    }
}

/// Entropy-at-scale profile: `(1/N^k) log A(sample, eps, d_{[N]})` per `N`,
/// with the running inf (the limit's inf-form) and a sample-halving
/// sensitivity.
pub fn entropy_profile(
    system: &ShiftSystem,
    eps: f64,
    n_grid: &[usize],
    samples: &SampleSpec,
    params: &MetricParams,
    seed: u64,
) -> Result<ScaleProfile> {
    let k = system.k();
    let mut rows = Vec::new();
    let mut running = f64::INFINITY;
    for &n in n_grid {
        let omega = cube_window(n, k)?;
        let window = inflate(&omega, params.truncation_radius)?;
        let ws = gather_samples(system, &window, samples, seed)?;
        let metric = WindowedSampleMetric::new(&ws, &omega, params)?;
        let a = covering_number(&metric, eps)?;
        let count = a.exact.unwrap_or(a.greedy);
        let cells = omega.len();
        let raw = (count as f64).ln();
        let normalized = raw / cells as f64;

        // Sensitivity: rerun on the first half of the sample.
        let half = &ws[..ws.len().div_ceil(2)];
        let half_metric = WindowedSampleMetric::new(half, &omega, params)?;
        let a_half = covering_number(&half_metric, eps)?;
        let half_norm = (a_half.exact.unwrap_or(a_half.greedy) as f64).ln() / cells as f64;

        running = running.min(normalized);
        rows.push(ProfileRow {
            epsilon: eps,
            window: n as f64,
            window_cells: cells,
            raw,
            normalized,
            running_inf: running,
            sensitivity: (normalized - half_norm).abs(),
        });
    }
    Ok(ScaleProfile { rows })
}

/// Certified `widim` upper bound at scale `eps`: the dimension of a nerve
/// carrying an explicit eps-embedding of the sample.
pub fn widim_upper(metric: &dyn SampleMetric, eps: f64) -> Result<(usize, NerveMap)> {
    let cover = greedy_cover(metric, eps)?;
    let nerve = nerve_embedding(metric, &cover)?;
    if !nerve.cert.ok() {
        return Err(Error::CertificationFailed(format!(
            "nerve embedding certificate failed: {:?}",
            nerve.cert.violations
        )));
    }
    Ok((nerve.complex.dim(), nerve))
}

/// Certified bounds over an eps grid, with monotonicity enforced soundly: an
/// embedding with fibers < eps' also certifies at every eps >= eps', so each
/// bound inherits the best finer-scale nerve.
pub fn widim_upper_grid(metric: &dyn SampleMetric, eps_grid: &[f64]) -> Result<Vec<(f64, usize)>> {
    let mut raw: Vec<(f64, usize)> = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let (bound, _) = widim_upper(metric, eps)?;
        raw.push((eps, bound));
    }
    let out = raw
        .iter()
        .map(|&(eps, bound)| {
            let inherited = raw
                .iter()
                .filter(|&&(e, _)| e <= eps)
                .map(|&(_, b)| b)
                .min()
                .unwrap_or(bound);
            (eps, bound.min(inherited))
        })
        .collect();
    Ok(out)
}

/// Mean-dimension profile along two Folner sequences (cubes `[N]` and balls
/// `B_R`), with their agreement at the end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdimProfile {
    pub cubes: ScaleProfile,
    pub balls: ScaleProfile,
    /// Per epsilon: (inf over cubes, inf over balls, |difference|).
    pub folner_agreement: Vec<(f64, f64, f64, f64)>,
}

/// `widim_eps(sample, d_Omega) / |Omega|` over an `(eps, window)` grid, for
/// cube windows and lattice-ball windows.
pub fn mdim_profile(
    system: &ShiftSystem,
    eps_grid: &[f64],
    n_grid: &[usize],
    r_grid: &[f64],
    samples: &SampleSpec,
    params: &MetricParams,
    seed: u64,
) -> Result<MdimProfile> {
    let k = system.k();
    let mut cubes = ScaleProfile::default();
    let mut balls = ScaleProfile::default();
    for &eps in eps_grid {
        let mut running = f64::INFINITY;
        for &n in n_grid {
            let omega = cube_window(n, k)?;
            let row = widim_row(system, eps, n as f64, &omega, samples, params, seed, &mut running)?;
            cubes.rows.push(row);
        }
        let mut running = f64::INFINITY;
        for &r in r_grid {
            let omega = ball_points(r, k)?;
            let row = widim_row(system, eps, r, &omega, samples, params, seed, &mut running)?;
            balls.rows.push(row);
        }
    }
    let folner_agreement = cubes
        .inf_per_epsilon()
        .into_iter()
        .zip(balls.inf_per_epsilon())
        .map(|((e, a), (_, b))| (e, a, b, (a - b).abs()))
        .collect();
    Ok(MdimProfile {
        cubes,
        balls,
        folner_agreement,
    })
}

#[allow(clippy::too_many_arguments)]
fn widim_row(
    system: &ShiftSystem,
    eps: f64,
    window_label: f64,
    omega: &LatticeSet,
    samples: &SampleSpec,
    params: &MetricParams,
    seed: u64,
    running: &mut f64,
) -> Result<ProfileRow> {
    let window = inflate(omega, params.truncation_radius)?;
    let ws = gather_samples(system, &window, samples, seed)?;
    let metric = WindowedSampleMetric::new(&ws, omega, params)?;
    let (bound, _) = widim_upper(&metric, eps)?;
    let cells = omega.len();
    let normalized = bound as f64 / cells as f64;

    let half = &ws[..ws.len().div_ceil(2)];
    let half_metric = WindowedSampleMetric::new(half, omega, params)?;
    let (half_bound, _) = widim_upper(&half_metric, eps)?;

    *running = running.min(normalized);
    Ok(ProfileRow {
        epsilon: eps,
        window: window_label,
        window_cells: cells,
        raw: bound as f64,
        normalized,
        running_inf: *running,
        sensitivity: (normalized - half_bound as f64 / cells as f64).abs(),
    })
}

/// Cell-wise predicates for orbit capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellPredicate {
    Never,
    SymbolIs(u32),
    /// Vector coordinate `idx` lies in `[lo, hi]`.
    VectorCoordIn { idx: usize, lo: f64, hi: f64 },
}

impl CellPredicate {
    pub fn eval(&self, cell: &CellValue) -> bool {
        match self {
            CellPredicate::Never => false,
            CellPredicate::SymbolIs(s) => cell.symbol == Some(*s),
            CellPredicate::VectorCoordIn { idx, lo, hi } => cell
                .vector
                .as_ref()
                .and_then(|v| v.get(*idx))
                .map(|&c| c >= *lo && c <= *hi)
                .unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcapRow {
    /// `N` for cube windows, `R` for ball windows.
    pub window: f64,
    pub window_cells: usize,
    /// Max hit count over the sample (a lower bound on the true sup).
    pub sup_count: usize,
    pub normalized: f64,
    pub running_inf: f64,
}

/// Orbit-capacity estimate: per-window sup-counts over the sample (sup is a
/// lower bound on the true sup), normalized, with the inf over tested
/// windows (the inf-form's upper-bound structure).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcapEstimate {
    pub cube_rows: Vec<OcapRow>,
    pub ball_rows: Vec<OcapRow>,
    pub inf_over_cubes: f64,
}

pub fn ocap_estimate(
    system: &ShiftSystem,
    predicate: &CellPredicate,
    n_grid: &[usize],
    r_grid: &[f64],
    sample_size: u64,
    seed: u64,
    extra: &[PointWindow],
) -> Result<OcapEstimate> {
    let k = system.k();
    let count_hits = |w: &PointWindow, omega: &LatticeSet| -> Result<usize> {
        let mut hits = 0;
        for n in omega.iter() {
            if predicate.eval(w.require_cell(n, "ocap_estimate")?) {
                hits += 1;
            }
        }
        Ok(hits)
    };

    let run = |omega: &LatticeSet, label: f64, running: &mut f64| -> Result<OcapRow> {
        let mut sup = 0usize;
        for i in 0..sample_size {
            let w = system.sample(omega, crate::rng::mix_words(&[seed, i]))?;
            sup = sup.max(count_hits(&w, omega)?);
        }
        for w in extra {
            if w.covers(omega) {
                sup = sup.max(count_hits(w, omega)?);
            }
        }
        let normalized = sup as f64 / omega.len() as f64;
        *running = running.min(normalized);
        Ok(OcapRow {
            window: label,
            window_cells: omega.len(),
            sup_count: sup,
            normalized,
            running_inf: *running,
        })
    };

    let mut running = f64::INFINITY;
    let mut cube_rows = Vec::new();
    for &n in n_grid {
        cube_rows.push(run(&cube_window(n, k)?, n as f64, &mut running)?);
    }
    let inf_over_cubes = running;
    let mut running_b = f64::INFINITY;
    let mut ball_rows = Vec::new();
    for &r in r_grid {
        ball_rows.push(run(&ball_points(r, k)?, r, &mut running_b)?);
    }
    Ok(OcapEstimate {
        cube_rows,
        ball_rows,
        inf_over_cubes,
    })
}

/// The truncated weight sum `c = sum_{|n| <= trunc} 2^{-|n|}` with its tail
/// bound; the scale constant of the windowed-metric comparison is
/// `kappa = 1 / (2c)`.
pub fn weight_sum_constant(k: usize, trunc: f64) -> (f64, f64) {
    let c: f64 = weighted_offsets(trunc, k)
        .expect("valid truncation")
        .iter()
        .map(|(_, w)| w)
        .sum();
    (c, weight_tail_bound(trunc, k))
}

#[cfg(test)]
mod tests {
    use crate::simplicial::cover::DenseMetric;
    use super::*;
    use crate::systems::SystemSpec;

    fn line_metric(points: &[f64]) -> DenseMetric {
        DenseMetric::from_fn(points.len(), |i, j| (points[i] - points[j]).abs())
    }

    #[test]
    fn covering_number_oracles() {
        let m = line_metric(&[0.0, 0.5, 1.0]);
        let c = covering_number(&m, 0.6).unwrap();
        assert_eq!(c.exact, Some(2));
        assert!(c.greedy >= 2);

        // eps > diameter: one set.
        let c1 = covering_number(&m, 2.0).unwrap();
        assert_eq!(c1.exact, Some(1));
        assert_eq!(c1.greedy, 1);

        // Two separated clusters.
        let m2 = line_metric(&[0.0, 0.05, 3.0, 3.05]);
        let c2 = covering_number(&m2, 0.5).unwrap();
        assert_eq!(c2.exact, Some(2));
    }

    #[test]
    fn exact_cover_beats_or_matches_greedy() {
        // A configuration where greedy can overshoot: exact <= greedy always.
        let pts = [0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 0.1, 1.1];
        let m = line_metric(&pts);
        let c = covering_number(&m, 0.45).unwrap();
        assert!(c.exact.unwrap() <= c.greedy);
    }

    #[test]
    fn log_covering_subadditive_over_window_unions() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 2, 3)).unwrap();
        let params = MetricParams::new(0.0, 1.0);
        let omega1 = cube_window(2, 1).unwrap();
        let omega2 = cube_window(2, 1).unwrap().translate(&LatticePoint(vec![2]));
        let union = omega1.union(&omega2);
        let window = inflate(&union, 0.0).unwrap();
        let ws: Vec<PointWindow> = (0..10).map(|i| sys.sample(&window, i).unwrap()).collect();
        let eps = 0.5;
        let a1 = {
            let m = WindowedSampleMetric::new(&ws, &omega1, &params).unwrap();
            covering_number(&m, eps).unwrap().exact.unwrap()
        };
        let a2 = {
            let m = WindowedSampleMetric::new(&ws, &omega2, &params).unwrap();
            covering_number(&m, eps).unwrap().exact.unwrap()
        };
        let au = {
            let m = WindowedSampleMetric::new(&ws, &union, &params).unwrap();
            covering_number(&m, eps).unwrap().exact.unwrap()
        };
        assert!((au as f64).ln() <= (a1 as f64).ln() + (a2 as f64).ln() + 1e-12);
    }

    #[test]
    fn entropy_profile_full_shift_reaches_log2() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 2, 1)).unwrap();
        let params = MetricParams::new(0.0, 1.0);
        let profile = entropy_profile(
            &sys,
            0.5,
            &[2, 4, 6],
            &SampleSpec::ExhaustiveBlocks { cap: 1 << 20 },
            &params,
            0,
        )
        .unwrap();
        for row in &profile.rows {
            // Exhaustive blocks: A = 2^N exactly, so log A / N = log 2.
            assert!((row.normalized - 2.0f64.ln()).abs() < 1e-12, "{row:?}");
        }
    }

    #[test]
    fn entropy_profile_single_point_system_is_zero() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 1, 0)).unwrap();
        let params = MetricParams::new(4.0, 0.0);
        let profile = entropy_profile(
            &sys,
            0.5,
            &[2, 4],
            &SampleSpec::Seeded { sample_size: 8 },
            &params,
            0,
        )
        .unwrap();
        for row in &profile.rows {
            assert_eq!(row.raw, 0.0);
        }
    }

    #[test]
    fn widim_bound_monotone_in_eps() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 6) as f64 * 0.2, (i / 6) as f64 * 0.2])
            .collect();
        let metric = DenseMetric::from_points(&pts, crate::simplicial::Norm::Linf);
        let bounds = widim_upper_grid(&metric, &[0.3, 0.5, 0.9, 2.0]).unwrap();
        let mut prev = usize::MAX;
        for (eps, bound) in bounds {
            assert!(bound <= prev, "widim bound increased at eps = {eps}");
            prev = bound;
        }
        // At eps beyond the diameter the whole sample is one set.
        assert_eq!(prev, 0);
        // Separated points at small eps: dimension 0.
        let far = DenseMetric::from_points(
            &[vec![0.0], vec![1.0], vec![2.0]],
            crate::simplicial::Norm::Linf,
        );
        let (b, _) = widim_upper(&far, 0.5).unwrap();
        assert_eq!(b, 0);
    }

    #[test]
    fn ocap_oracles() {
        // Empty set: 0.
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 2, 9)).unwrap();
        let est = ocap_estimate(&sys, &CellPredicate::Never, &[4, 8], &[3.0], 10, 1, &[]).unwrap();
        assert_eq!(est.inf_over_cubes, 0.0);

        // Full shift with the all-ones configuration in the sample: estimate 1.
        let mut ones = PointWindow::new(1, sys.id());
        for n in cube_window(8, 1).unwrap().iter() {
            ones.insert(n.clone(), CellValue::symbol(1));
        }
        let est = ocap_estimate(
            &sys,
            &CellPredicate::SymbolIs(1),
            &[4, 8],
            &[],
            10,
            1,
            &[ones],
        )
        .unwrap();
        assert_eq!(est.cube_rows.last().unwrap().sup_count, 8);
        assert_eq!(est.inf_over_cubes, 1.0);
    }

    #[test]
    fn ocap_golden_mean_max_density() {
        // No two adjacent ones: max count over [N] is ceil(N/2), achieved by
        // the alternating configuration.
        let sys = ShiftSystem::new(SystemSpec::golden_mean(1, 4)).unwrap();
        let mut alternating = PointWindow::new(1, sys.id());
        for n in cube_window(12, 1).unwrap().iter() {
            alternating.insert(n.clone(), CellValue::symbol((n.0[0] % 2 == 0) as u32));
        }
        let est = ocap_estimate(
            &sys,
            &CellPredicate::SymbolIs(1),
            &[4, 8, 12],
            &[],
            30,
            2,
            &[alternating],
        )
        .unwrap();
        for row in &est.cube_rows {
            let n = row.window as usize;
            assert_eq!(row.sup_count, n.div_ceil(2), "window {n}");
        }
        let last = est.cube_rows.last().unwrap();
        assert!((last.normalized - 0.5).abs() <= 1.0 / last.window);
    }

    #[test]
    fn ocap_window_subadditivity_on_samples() {
        let sys = ShiftSystem::new(SystemSpec::golden_mean(1, 6)).unwrap();
        let omega1 = cube_window(4, 1).unwrap();
        let omega2 = cube_window(4, 1).unwrap().translate(&LatticePoint(vec![3]));
        let union = omega1.union(&omega2);
        let pred = CellPredicate::SymbolIs(1);
        let mut sup1 = 0;
        let mut sup2 = 0;
        let mut supu = 0;
        for i in 0..40 {
            let w = sys.sample(&union, i).unwrap();
            let count = |omega: &LatticeSet| {
                omega
                    .iter()
                    .filter(|n| pred.eval(w.cell(n).unwrap()))
                    .count()
            };
            sup1 = sup1.max(count(&omega1));
            sup2 = sup2.max(count(&omega2));
            supu = supu.max(count(&union));
        }
        assert!(supu <= sup1 + sup2);
    }

    #[test]
    fn mdim_profile_folner_sequences_agree_on_trivial_system() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 1, 0)).unwrap();
        let params = MetricParams::new(2.0, 0.0);
        let profile = mdim_profile(
            &sys,
            &[0.5, 0.25],
            &[2, 4],
            &[1.0, 2.0],
            &SampleSpec::Seeded { sample_size: 6 },
            &params,
            3,
        )
        .unwrap();
        for (_, a, b, diff) in &profile.folner_agreement {
            assert_eq!(*a, 0.0);
            assert_eq!(*b, 0.0);
            assert_eq!(*diff, 0.0);
        }
    }

    #[test]
    fn kappa_route_comparison_holds_on_sampled_pairs() {
        // D_{B_R}(x, y) < c * |pi(x) - pi(y)|_inf + eps/2 with pi the
        // projection to B_{R+L} and L chosen so the tail is below eps/2.
        let k = 1usize;
        let sys = ShiftSystem::new(SystemSpec::cube_shift(k, 1, 5)).unwrap();
        let eps = 0.25;
        let diam = 1.0;
        let mut l = 1.0f64;
        while weight_tail_bound(l, k) * diam >= eps / 2.0 {
            l += 1.0;
        }
        let r = 4.0f64;
        let (c, _) = weight_sum_constant(k, l);

        let omega = ball_points(r, k).unwrap();
        let proj = ball_points(r + l, k).unwrap();
        let window = inflate(&omega, l).unwrap();
        let params = MetricParams::new(l, diam);
        let offsets = weighted_offsets(l, k).unwrap();
        for i in 0..10 {
            let x = sys.sample(&window, 2 * i).unwrap();
            let y = sys.sample(&window, 2 * i + 1).unwrap();
            // Left side: sup over n in B_R of the truncated base distance.
            let mut lhs: f64 = 0.0;
            for n in omega.iter() {
                let mut t = 0.0;
                for (m, w) in &offsets {
                    let cell = n.add(m);
                    t += w * x.cell(&cell).unwrap().distance(y.cell(&cell).unwrap());
                }
                lhs = lhs.max(t);
            }
            // Right side: c * sup over the projection window of cell dist.
            let mut sup_cell: f64 = 0.0;
            for n in proj.iter() {
                sup_cell = sup_cell.max(x.cell(n).unwrap().distance(y.cell(n).unwrap()));
            }
            assert!(
                lhs < c * sup_cell + eps / 2.0,
                "lhs {lhs} vs {} (pair {i})",
                c * sup_cell + eps / 2.0
            );
            let _ = params.tail_bound(k);
        }
    }
}
