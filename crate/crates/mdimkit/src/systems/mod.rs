//! Finite-window representations of `Z^k` shift systems.
//!
//! A point of a system is never materialized as an infinite configuration;
//! operations work on [`PointWindow`]s, finite windows of cell values, and
//! declare the window inflation they need. Samplers are pure functions of
//! `(spec seed, sample index, window)`, so overlapping windows of the same
//! sample index agree cell-by-cell wherever the kind permits, and reruns are
//! bit-identical.

pub mod marker;
pub mod metric;
pub mod spec;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lattice::{ball_around, box_points, LatticePoint, LatticeSet};
use crate::rng::{coords_key, mix_words, CounterRng};
use crate::{Error, Result};

pub use spec::{FactorMapSpec, Pattern, PatternSpec, SystemSpec};

/// The value of one lattice cell: a symbol, a vector in `[0,1]^D`, or both
/// (product systems carry both).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellValue {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

impl CellValue {
    pub fn symbol(s: u32) -> Self {
        CellValue {
            symbol: Some(s),
            vector: None,
        }
    }

    pub fn vector(v: Vec<f64>) -> Self {
        debug_assert!(v.iter().all(|c| (0.0..=1.0).contains(c)));
        CellValue {
            symbol: None,
            vector: Some(v),
        }
    }

    pub fn both(s: u32, v: Vec<f64>) -> Self {
        CellValue {
            symbol: Some(s),
            vector: Some(v),
        }
    }

    /// Per-cell distance: discrete on symbols, Euclidean on vectors, the max
    /// when both are present.
    pub fn distance(&self, other: &CellValue) -> f64 {
        let sym: f64 = match (self.symbol, other.symbol) {
            (Some(a), Some(b)) => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            _ => 0.0,
        };
        let vec = match (&self.vector, &other.vector) {
            (Some(a), Some(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            _ => 0.0,
        };
        sym.max(vec)
    }
}

/// A finite window of cell values of one point of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointWindow {
    pub k: usize,
    pub system_id: String,
    values: BTreeMap<LatticePoint, CellValue>,
}

impl PointWindow {
    pub fn new(k: usize, system_id: impl Into<String>) -> Self {
        PointWindow {
            k,
            system_id: system_id.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, at: LatticePoint, value: CellValue) {
        debug_assert_eq!(at.dim(), self.k);
        self.values.insert(at, value);
    }

    pub fn cell(&self, at: &LatticePoint) -> Option<&CellValue> {
        self.values.get(at)
    }

    pub fn require_cell(&self, at: &LatticePoint, context: &str) -> Result<&CellValue> {
        self.cell(at).ok_or_else(|| Error::WindowTooSmall {
            context: context.to_string(),
            required: format!("cell {:?}", at.0),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&LatticePoint, &CellValue)> {
        self.values.iter()
    }

    pub fn window_set(&self) -> LatticeSet {
        LatticeSet::from_points(self.k, self.values.keys().cloned()).expect("consistent dims")
    }

    /// The shifted point `T^a x`: its value at `n` is `x` at `n + a`.
    pub fn shift(&self, a: &LatticePoint) -> PointWindow {
        let mut out = PointWindow::new(self.k, self.system_id.clone());
        for (n, v) in &self.values {
            out.insert(n.sub(a), v.clone());
        }
        out
    }

    pub fn restrict(&self, window: &LatticeSet) -> PointWindow {
        let mut out = PointWindow::new(self.k, self.system_id.clone());
        for (n, v) in &self.values {
            if window.contains(n) {
                out.insert(n.clone(), v.clone());
            }
        }
        out
    }

    /// True if every cell of `window` is present.
    pub fn covers(&self, window: &LatticeSet) -> bool {
        window.iter().all(|n| self.values.contains_key(n))
    }
}

/// A shift system with a seeded window sampler.
#[derive(Debug, Clone)]
pub struct ShiftSystem {
    spec: SystemSpec,
    id: String,
}

impl ShiftSystem {
    pub fn new(spec: SystemSpec) -> Result<Self> {
        spec.validate()?;
        let id = format!("sys-{:016x}", mix_words(&[hash_json(&spec)]));
        Ok(ShiftSystem { spec, id })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    /// Diameter of the per-cell value space, used in metric tail bounds.
    pub fn cell_diameter(&self) -> f64 {
        cell_diameter_of(&self.spec)
    }

    /// Sample the `idx`-th point of the system on the given window.
    pub fn sample(&self, window: &LatticeSet, idx: u64) -> Result<PointWindow> {
        let mut out = PointWindow::new(self.spec.k, self.id.clone());
        sample_into(&self.spec, window, idx, &mut out)?;
        Ok(out)
    }
}

fn hash_json(spec: &SystemSpec) -> u64 {
    let text = spec.to_canonical_json();
    let words: Vec<u64> = text.as_bytes().chunks(8).map(|c| {
        let mut w = [0u8; 8];
        w[..c.len()].copy_from_slice(c);
        u64::from_le_bytes(w)
    }).collect();
    mix_words(&words)
}

fn cell_diameter_of(spec: &SystemSpec) -> f64 {
    match spec.kind.as_str() {
        "full" | "sft" | "sturmian" => {
            let sym: f64 = match spec.alphabet {
                Some(a) if a >= 2 => 1.0,
                _ => 0.0,
            };
            let vec = spec.cube_d.map(|d| (d as f64).sqrt()).unwrap_or(0.0);
            sym.max(vec)
        }
        "product" => spec
            .factors
            .as_ref()
            .map(|fs| fs.iter().map(cell_diameter_of).fold(0.0, f64::max))
            .unwrap_or(0.0),
        "factor" => match spec.map.as_ref() {
            Some(FactorMapSpec::Named(name)) if name == "symbols_to_unit_cube" => 1.0,
            Some(FactorMapSpec::Named(name)) if name == "project_vector" => spec
                .base
                .as_ref()
                .map(|b| cell_diameter_of(b))
                .unwrap_or(0.0),
            _ => spec
                .base
                .as_ref()
                .map(|b| cell_diameter_of(b))
                .unwrap_or(0.0),
        },
        _ => 1.0,
    }
}

fn sample_into(
    spec: &SystemSpec,
    window: &LatticeSet,
    idx: u64,
    out: &mut PointWindow,
) -> Result<()> {
    match spec.kind.as_str() {
        "full" => sample_full(spec, window, idx, out),
        "sft" => sample_sft(spec, window, idx, out),
        "sturmian" => sample_sturmian(spec, window, idx, out),
        "product" => {
            for (fi, f) in spec.factors.as_ref().unwrap().iter().enumerate() {
                let mut part = PointWindow::new(spec.k, "");
                let mut sub = f.clone();
                // Derive independent per-factor seeds from the product seed.
                sub.seed = mix_words(&[spec.seed, fi as u64, f.seed]);
                sample_into(&sub, window, idx, &mut part)?;
                merge_cells(out, &part, window)?;
            }
            Ok(())
        }
        "factor" => {
            let base = spec.base.as_ref().unwrap();
            let mut raw = PointWindow::new(spec.k, "");
            sample_into(base, window, idx, &mut raw)?;
            let map = spec.map.as_ref().unwrap();
            for n in window.iter() {
                let v = raw.cell(n).expect("sampled");
                out.insert(n.clone(), apply_factor_map(map, v, base)?);
            }
            Ok(())
        }
        other => Err(Error::SystemSpec(format!("unknown kind {other:?}"))),
    }
}

fn merge_cells(out: &mut PointWindow, part: &PointWindow, window: &LatticeSet) -> Result<()> {
    for n in window.iter() {
        let add = part.cell(n).expect("sampled");
        let merged = match out.cell(n) {
            None => add.clone(),
            Some(prev) => {
                if prev.symbol.is_some() && add.symbol.is_some() {
                    return Err(Error::SystemSpec(
                        "product of two symbolic factors is not supported; relabel one into the cube".into(),
                    ));
                }
                if prev.vector.is_some() && add.vector.is_some() {
                    return Err(Error::SystemSpec(
                        "product of two cube factors is not supported".into(),
                    ));
                }
                CellValue {
                    symbol: prev.symbol.or(add.symbol),
                    vector: prev.vector.clone().or(add.vector.clone()),
                }
            }
        };
        out.insert(n.clone(), merged);
    }
    Ok(())
}

fn apply_factor_map(map: &FactorMapSpec, v: &CellValue, base: &SystemSpec) -> Result<CellValue> {
    match map {
        FactorMapSpec::Named(name) => match name.as_str() {
            "project_symbol" => Ok(CellValue {
                symbol: v.symbol,
                vector: None,
            }),
            "project_vector" => Ok(CellValue {
                symbol: None,
                vector: v.vector.clone(),
            }),
            "symbols_to_unit_cube" => {
                let sym = v.symbol.ok_or_else(|| {
                    Error::SystemSpec("symbols_to_unit_cube needs a symbolic base".into())
                })?;
                let a = base.alphabet.unwrap_or(2).max(2);
                Ok(CellValue::vector(vec![sym as f64 / (a - 1) as f64]))
            }
            other => Err(Error::SystemSpec(format!("unknown factor map {other:?}"))),
        },
        FactorMapSpec::Relabel { relabel } => {
            let sym = v
                .symbol
                .ok_or_else(|| Error::SystemSpec("relabel needs a symbolic base".into()))?;
            let new = *relabel
                .get(sym as usize)
                .ok_or_else(|| Error::SystemSpec("relabel table too short".into()))?;
            Ok(CellValue {
                symbol: Some(new),
                vector: v.vector.clone(),
            })
        }
    }
}

fn cell_rng(seed: u64, idx: u64, n: &LatticePoint) -> CounterRng {
    CounterRng::new(&[seed, idx, coords_key(&n.0)])
}

fn sample_full(
    spec: &SystemSpec,
    window: &LatticeSet,
    idx: u64,
    out: &mut PointWindow,
) -> Result<()> {
    for n in window.iter() {
        let mut rng = cell_rng(spec.seed, idx, n);
        let symbol = spec.alphabet.map(|a| rng.next_below(a as u64) as u32);
        let vector = spec.cube_d.map(|d| {
            (0..d)
                .map(|_| match spec.quantize {
                    Some(q) if q >= 1 => {
                        rng.next_below(q as u64 + 1) as f64 / q as f64
                    }
                    _ => rng.next_f64(),
                })
                .collect()
        });
        out.insert(n.clone(), CellValue { symbol, vector });
    }
    Ok(())
}

/// Golden-rotation coding `x_n = floor((n+1)a + b) - floor(na + b)` with
/// `a = (sqrt 5 - 1)/2` and a seeded phase `b`. Aperiodic on every window.
fn sample_sturmian(
    spec: &SystemSpec,
    window: &LatticeSet,
    idx: u64,
    out: &mut PointWindow,
) -> Result<()> {
    let alpha = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut rng = CounterRng::new(&[spec.seed, idx, 0x5742]);
    let beta = rng.next_f64();
    for n in window.iter() {
        let t = n.0[0] as f64;
        let sym = (((t + 1.0) * alpha + beta).floor() - (t * alpha + beta).floor()) as i64;
        out.insert(n.clone(), CellValue::symbol(sym.clamp(0, 1) as u32));
    }
    Ok(())
}

/// Fill the window's bounding box in lexicographic cell order, choosing each
/// symbol uniformly among those that complete no forbidden pattern, with
/// backtracking. Desk-scale SFTs (golden mean and friends) never backtrack.
fn sample_sft(
    spec: &SystemSpec,
    window: &LatticeSet,
    idx: u64,
    out: &mut PointWindow,
) -> Result<()> {
    let alphabet = spec.alphabet.unwrap();
    let patterns: Vec<Pattern> = spec
        .forbidden
        .as_ref()
        .unwrap()
        .iter()
        .map(|p| Pattern::from_spec(p, spec.k))
        .collect::<Result<_>>()?;
    if window.is_empty() {
        return Ok(());
    }
    let (lo, hi) = window.bounding_box().expect("nonempty");
    let cells = box_points(&lo, &hi);

    let mut assigned: BTreeMap<LatticePoint, u32> = BTreeMap::new();
    let mut order: Vec<Vec<u32>> = Vec::with_capacity(cells.len());
    for n in &cells {
        let mut choices: Vec<u32> = (0..alphabet).collect();
        cell_rng(spec.seed, idx, n).shuffle(&mut choices);
        order.push(choices);
    }

    let violates = |assigned: &BTreeMap<LatticePoint, u32>, at: &LatticePoint| -> bool {
        for pat in &patterns {
            for (anchor_cell, _) in &pat.cells {
                // Anchor the pattern so that `anchor_cell` lands on `at`.
                let base = at.sub(anchor_cell);
                let mut all = true;
                for (off, sym) in &pat.cells {
                    match assigned.get(&base.add(off)) {
                        Some(s) if s == sym => {}
                        _ => {
                            all = false;
                            break;
                        }
                    }
                }
                if all {
                    return true;
                }
            }
        }
        false
    };

    let mut depth = 0usize;
    let mut cursor: Vec<usize> = vec![0; cells.len()];
    let mut steps = 0u64;
    let step_cap = 200 * cells.len() as u64 + 10_000;
    while depth < cells.len() {
        steps += 1;
        if steps > step_cap {
            return Err(Error::SystemSpec(
                "sft sampler exceeded its backtracking budget; the forbidden set is too constrained".into(),
            ));
        }
        let cell = &cells[depth];
        let mut placed = false;
        while cursor[depth] < order[depth].len() {
            let sym = order[depth][cursor[depth]];
            cursor[depth] += 1;
            assigned.insert(cell.clone(), sym);
            if violates(&assigned, cell) {
                assigned.remove(cell);
            } else {
                placed = true;
                break;
            }
        }
        if placed {
            depth += 1;
        } else {
            cursor[depth] = 0;
            if depth == 0 {
                return Err(Error::SystemSpec("sft has no legal configuration".into()));
            }
            depth -= 1;
            assigned.remove(&cells[depth]);
        }
    }

    for n in window.iter() {
        out.insert(n.clone(), CellValue::symbol(assigned[n]));
    }
    Ok(())
}

/// A sampled point window paired with the marker field certifying its
/// Voronoi apparatus.
#[derive(Debug, Clone)]
pub struct FieldedWindow {
    pub point: PointWindow,
    pub field: marker::MarkerField,
}

impl FieldedWindow {
    pub fn shift(&self, a: &LatticePoint) -> FieldedWindow {
        FieldedWindow {
            point: self.point.shift(a),
            field: self.field.shift(a),
        }
    }
}

/// How a [`FieldedSystem`] attaches marker fields to its samples.
#[derive(Debug, Clone)]
pub enum FieldKind {
    /// phi = 1 exactly on `offset + spacing * Z^k`, with a seeded per-sample
    /// offset. Every tile is a congruent cube.
    Grid { spacing: i64 },
    /// Greedy-random M-separated, L-syndetic support.
    Synthetic {
        m: i64,
        l: i64,
        heights: marker::HeightSpec,
    },
}

/// A system bundled with a marker-field rule, for the painting pipelines.
#[derive(Debug, Clone)]
pub struct FieldedSystem {
    pub system: ShiftSystem,
    pub kind: FieldKind,
    pub h: f64,
    pub s: f64,
    pub seed: u64,
}

impl FieldedSystem {
    pub fn sample(&self, window: &LatticeSet, idx: u64) -> Result<FieldedWindow> {
        let point = self.system.sample(window, idx)?;
        let field = match &self.kind {
            FieldKind::Grid { spacing } => {
                let mut rng = CounterRng::new(&[self.seed, idx, 0x6f66]);
                let offset = LatticePoint(
                    (0..self.system.k())
                        .map(|_| rng.next_below(*spacing as u64) as i64)
                        .collect(),
                );
                marker::grid_marker_field(window, *spacing, &offset, self.h, self.s)?
            }
            FieldKind::Synthetic { m, l, heights } => marker::synthetic_marker_field(
                *m,
                *l,
                self.h,
                self.s,
                window,
                mix_words(&[self.seed, idx]),
                heights,
            )?,
        };
        Ok(FieldedWindow { point, field })
    }
}

/// Window inflated to hold every cell within distance `r` of `window`.
pub fn inflate(window: &LatticeSet, r: f64) -> Result<LatticeSet> {
    let k = window.k();
    let mut out = LatticeSet::new(k);
    for p in window.iter() {
        for q in ball_around(p, r)?.iter() {
            out.insert(q.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::cube_window;

    #[test]
    fn full_shift_sampling_is_consistent_across_windows() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(2, 4, 9)).unwrap();
        let small = cube_window(3, 2).unwrap();
        let big = cube_window(6, 2).unwrap();
        let xs = sys.sample(&small, 0).unwrap();
        let xb = sys.sample(&big, 0).unwrap();
        for (n, v) in xs.cells() {
            assert_eq!(xb.cell(n), Some(v));
        }
        // Distinct sample indices differ somewhere.
        let other = sys.sample(&big, 1).unwrap();
        assert_ne!(xb, other);
    }

    #[test]
    fn golden_mean_sample_has_no_adjacent_ones() {
        let sys = ShiftSystem::new(SystemSpec::golden_mean(2, 5)).unwrap();
        let w = cube_window(12, 2).unwrap();
        let x = sys.sample(&w, 3).unwrap();
        for (n, v) in x.cells() {
            if v.symbol == Some(1) {
                for axis in 0..2 {
                    let mut step = vec![0i64; 2];
                    step[axis] = 1;
                    let m = n.add(&LatticePoint(step));
                    if let Some(u) = x.cell(&m) {
                        assert_ne!(u.symbol, Some(1), "adjacent ones at {:?}", n.0);
                    }
                }
            }
        }
    }

    #[test]
    fn sturmian_windows_are_aperiodic() {
        let sys = ShiftSystem::new(SystemSpec::sturmian(5)).unwrap();
        let w = cube_window(200, 1).unwrap();
        let x = sys.sample(&w, 0).unwrap();
        // No period p < 8 survives on a 200-window.
        for p in 1..8i64 {
            let mut all_equal = true;
            for n in 0..(200 - p) {
                let a = x.cell(&LatticePoint(vec![n])).unwrap();
                let b = x.cell(&LatticePoint(vec![n + p])).unwrap();
                if a != b {
                    all_equal = false;
                    break;
                }
            }
            assert!(!all_equal, "period {p} found");
        }
    }

    #[test]
    fn product_and_factor_maps_commute_with_shift() {
        let z = SystemSpec::sturmian(3);
        let cube = SystemSpec::quantized_cube_shift(1, 1, 4, 8);
        let prod = SystemSpec::product(vec![z, cube], 1).unwrap();
        let proj = SystemSpec::factor(prod.clone(), FactorMapSpec::Named("project_symbol".into()), 2);

        let psys = ShiftSystem::new(prod).unwrap();
        let fsys = ShiftSystem::new(proj).unwrap();
        let w = cube_window(30, 1).unwrap();
        let x = psys.sample(&w, 0).unwrap();
        let y = fsys.sample(&w, 0).unwrap();

        // factor(T^a x) = T^a factor(x) cell-wise on the overlap.
        let a = LatticePoint(vec![7]);
        let shifted_then_project = x.shift(&a);
        for n in 0..20i64 {
            let n = LatticePoint(vec![n]);
            let lhs = y.shift(&a);
            let lhs = lhs.cell(&n).unwrap();
            let rhs = shifted_then_project.cell(&n).unwrap();
            assert_eq!(lhs.symbol, rhs.symbol);
        }

        // The product carries both parts.
        let v = x.cell(&LatticePoint(vec![0])).unwrap();
        assert!(v.symbol.is_some() && v.vector.is_some());
    }

    #[test]
    fn quantized_cube_values_lie_on_grid() {
        let sys = ShiftSystem::new(SystemSpec::quantized_cube_shift(1, 2, 8, 3)).unwrap();
        let w = cube_window(16, 1).unwrap();
        let x = sys.sample(&w, 0).unwrap();
        for (_, v) in x.cells() {
            for &c in v.vector.as_ref().unwrap() {
                let scaled = c * 8.0;
                assert!((scaled - scaled.round()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_of_window_relocates_cells() {
        let sys = ShiftSystem::new(SystemSpec::full_shift(1, 3, 2)).unwrap();
        let w = cube_window(10, 1).unwrap();
        let x = sys.sample(&w, 0).unwrap();
        let a = LatticePoint(vec![4]);
        let y = x.shift(&a);
        assert_eq!(
            y.cell(&LatticePoint(vec![0])),
            x.cell(&LatticePoint(vec![4]))
        );
    }
}
