//! Subcommand implementations: each builds its apparatus from the config,
//! writes machine-readable rows, and reports how many asserted invariants
//! failed (witnesses stay in the output rows).

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use mdimkit::dimension::{entropy_profile, mdim_profile, ocap_estimate, CellPredicate, SampleSpec};
use mdimkit::lattice::{ball_points, LatticePoint, LatticeSet};
use mdimkit::perturbation::{
    build_encoder, build_g2, build_palette, claim_check_symbolic, decode_pseudo_tiling,
    decode_regions, encode_g1, paint_symbolic, painted_to_window, verify_two_channel_pairs,
    Observable,
};
use mdimkit::simplicial::generic::{sample_generic_linear, TargetTag};
use mdimkit::simplicial::SimplicialComplex;
use mdimkit::systems::marker::{min_lift_height, synthetic_marker_field, HeightSpec};
use mdimkit::systems::metric::MetricParams;
use mdimkit::systems::{
    FactorMapSpec, FieldKind, FieldedSystem, PointWindow, ShiftSystem, SystemSpec,
};
use mdimkit::voronoi::{boundary_fraction, flat_cell_check, lemma41_check, FlatCenters, LiftedCenters};

use crate::config::ExperimentConfig;

pub struct RunOutput {
    pub rows: Vec<Value>,
    pub csv: Option<String>,
    pub failures: usize,
}

fn ball_set(r: f64, k: usize) -> Result<LatticeSet> {
    Ok(LatticeSet::from_points(
        k,
        ball_points(r, k)?.iter().cloned(),
    )?)
}

fn require<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("config is missing params.{name}"))
}

/// Random L-separated, L-syndetic centers over a ball window, via a
/// synthetic marker field with all heights 1.
fn random_centers(k: usize, l: i64, window_radius: f64, seed: u64) -> Result<FlatCenters> {
    let window = ball_set(window_radius, k)?;
    let field = synthetic_marker_field(
        l,
        l,
        min_lift_height(l as f64, k),
        1.5,
        &window,
        seed,
        &HeightSpec::AllOnes,
    )?;
    let centers = LatticeSet::from_points(k, field.support().map(|(p, _)| p.clone()))?;
    Ok(FlatCenters::new(&centers, l as f64)?)
}

/// `tile-check`: enumerate interior flat cells of random center sets and
/// compare the exact shell ratio against the displayed bound.
pub fn tile_check(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let l = require(p.l, "L")?;
    let r = require(p.r, "R")?;
    let centers = random_centers(p.k, l, 6.0 * l as f64, p.seed)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for n in centers.centers() {
        match flat_cell_check(&centers, n, r) {
            Ok(report) => {
                if !report.ratio_le_bound {
                    failures += 1;
                }
                rows.push(json!({"seed": p.seed, "report": report}));
            }
            Err(mdimkit::Error::WindowTooSmall { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if rows.is_empty() {
        bail!("no fully interior cells; enlarge the window");
    }
    Ok(RunOutput {
        rows,
        csv: None,
        failures,
    })
}

fn field_system_from(cfg: &ExperimentConfig) -> Result<FieldedSystem> {
    let p = &cfg.params;
    let m = require(p.m, "M")?;
    let l = require(p.l, "L")?;
    let h = p.h.unwrap_or_else(|| min_lift_height(l as f64, p.k));
    let s = require(p.s, "s")?;
    let system = match &cfg.system {
        Some(spec) => ShiftSystem::new(spec.clone())?,
        None => ShiftSystem::new(SystemSpec::full_shift(p.k, 2, p.seed))?,
    };
    Ok(FieldedSystem {
        system,
        kind: FieldKind::Synthetic {
            m,
            l,
            heights: p
                .heights
                .clone()
                .unwrap_or(HeightSpec::Uniform {
                    prob_one: 0.5,
                    min: 0.5,
                }),
        },
        h,
        s,
        seed: p.seed,
    })
}

/// `lemma41`: seeded synthetic fields, four lifted-cell checks.
pub fn lemma41(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let fs = field_system_from(cfg)?;
    let probes = p.sample_size.unwrap_or(10_000);
    let window_r = p.r.unwrap_or(5.0 * require(p.l, "L")? as f64);
    let window = ball_set(window_r, p.k)?;
    let fielded = fs.sample(&window, 0)?;
    let lifted = LiftedCenters::from_field(&fielded.field)?;
    let report = lemma41_check(&lifted, probes, p.e, p.seed)?;
    let failures = [
        &report.ball_in_cell,
        &report.height_range,
        &report.owner_close,
        &report.pulled_ball,
    ]
    .iter()
    .map(|o| o.violations.len())
    .sum();
    let rows = vec![
        json!({"check": "ball_in_cell", "outcome": report.ball_in_cell, "seed": p.seed}),
        json!({"check": "height_range", "outcome": report.height_range, "seed": p.seed}),
        json!({"check": "owner_close", "outcome": report.owner_close, "seed": p.seed}),
        json!({"check": "pulled_ball", "outcome": report.pulled_ball, "seed": p.seed}),
    ];
    Ok(RunOutput {
        rows,
        csv: None,
        failures,
    })
}

/// `boundary-fraction`: Monte Carlo fraction of `B_R` near tile boundaries.
pub fn boundary_fraction_cmd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let e = require(p.e, "E")?;
    let r = require(p.r, "R")?;
    let samples = p.sample_size.unwrap_or(10_000);
    let fs = field_system_from(cfg)?;
    let l = require(p.l, "L")? as f64;
    let window = ball_set(r + e + l + (p.k as f64).sqrt() + 2.0, p.k)?;
    let fielded = fs.sample(&window, 0)?;
    let lifted = LiftedCenters::from_field(&fielded.field)?;
    let est = boundary_fraction(&lifted, e, r, samples, p.seed, None)?;
    let s = require(p.s, "s")?;
    let bound = 1.0
        - s.powi(-(p.k as i32))
            * (((r - 2.0 * l - 2.0 * (p.k as f64).sqrt()) / r).max(0.0)).powi(p.k as i32);
    let ok = est.estimate <= bound + 3.0 * est.std_error;
    Ok(RunOutput {
        rows: vec![json!({"estimate": est, "bound": bound, "within_bound": ok})],
        csv: None,
        failures: usize::from(!ok),
    })
}

/// `dims`: entropy and widim profiles along two Folner sequences.
pub fn dims(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let spec = cfg
        .system
        .clone()
        .ok_or_else(|| anyhow!("dims needs a system"))?;
    let system = ShiftSystem::new(spec)?;
    let eps_grid = cfg
        .params
        .grids
        .eps_grid
        .clone()
        .unwrap_or_else(|| vec![0.5, 0.25]);
    let n_grid = cfg.params.grids.n_grid.clone().unwrap_or_else(|| vec![2, 4]);
    let r_grid = cfg
        .params
        .grids
        .r_grid
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0]);
    let samples = SampleSpec::Seeded {
        sample_size: p.sample_size.unwrap_or(30),
    };
    let params = MetricParams::new(2.0, system.cell_diameter());
    let mut csv = String::from("kind,epsilon,window,cells,raw,normalized,running_inf,sensitivity\n");
    let mut rows = Vec::new();
    for &eps in &eps_grid {
        let profile = entropy_profile(&system, eps, &n_grid, &samples, &params, p.seed)?;
        for row in &profile.rows {
            csv.push_str(&format!(
                "entropy,{},{},{},{},{},{},{}\n",
                row.epsilon,
                row.window,
                row.window_cells,
                row.raw,
                row.normalized,
                row.running_inf,
                row.sensitivity
            ));
        }
        rows.push(json!({"profile": "entropy", "eps": eps, "rows": profile.rows}));
    }
    let mdim = mdim_profile(&system, &eps_grid, &n_grid, &r_grid, &samples, &params, p.seed)?;
    for row in mdim.cubes.rows.iter() {
        csv.push_str(&format!(
            "widim-cubes,{},{},{},{},{},{},{}\n",
            row.epsilon, row.window, row.window_cells, row.raw, row.normalized, row.running_inf, row.sensitivity
        ));
    }
    for row in mdim.balls.rows.iter() {
        csv.push_str(&format!(
            "widim-balls,{},{},{},{},{},{},{}\n",
            row.epsilon, row.window, row.window_cells, row.raw, row.normalized, row.running_inf, row.sensitivity
        ));
    }
    rows.push(json!({"profile": "mdim", "folner_agreement": mdim.folner_agreement}));
    Ok(RunOutput {
        rows,
        csv: Some(csv),
        failures: 0,
    })
}

/// `ocap`: orbit-capacity estimate for a cell predicate.
pub fn ocap(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let spec = cfg
        .system
        .clone()
        .ok_or_else(|| anyhow!("ocap needs a system"))?;
    let system = ShiftSystem::new(spec)?;
    let predicate = p
        .predicate
        .clone()
        .unwrap_or(CellPredicate::SymbolIs(1));
    let n_grid = p.grids.n_grid.clone().unwrap_or_else(|| vec![4, 8]);
    let r_grid = p.grids.r_grid.clone().unwrap_or_default();
    let est = ocap_estimate(
        &system,
        &predicate,
        &n_grid,
        &r_grid,
        p.sample_size.unwrap_or(50),
        p.seed,
        &[],
    )?;
    Ok(RunOutput {
        rows: vec![json!({"estimate": est})],
        csv: None,
        failures: 0,
    })
}

fn binary_in_cube(k: usize, seed: u64) -> Result<ShiftSystem> {
    Ok(ShiftSystem::new(SystemSpec::factor(
        SystemSpec::full_shift(k, 2, seed),
        FactorMapSpec::Named("symbols_to_unit_cube".into()),
        seed,
    ))?)
}

fn grid_centers(spacing: i64, reach: i64, k: usize, offset: &LatticePoint) -> Result<FlatCenters> {
    let pts = mdimkit::lattice::box_points(&vec![-reach; k], &vec![reach; k])
        .into_iter()
        .map(|q| {
            LatticePoint(
                q.0.iter()
                    .zip(&offset.0)
                    .map(|(c, o)| c * spacing + o)
                    .collect(),
            )
        });
    Ok(FlatCenters::new(
        &LatticeSet::from_points(k, pts)?,
        spacing as f64,
    )?)
}

/// `paint`: flat-tile painting on a grid fixture with the block-identity
/// check.
pub fn paint(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let n_spacing = require(p.n_block, "N")? as i64;
    let eps = p.eps.unwrap_or(0.4);
    let delta = p.delta.unwrap_or(0.45);
    let system = match &cfg.system {
        Some(spec) => ShiftSystem::new(spec.clone())?,
        None => ShiftSystem::new(SystemSpec::quantized_cube_shift(p.k, 1, 2, p.seed))?,
    };
    let obs = Observable::CellVector { dim: 1 };
    let params = MetricParams::new(0.0, system.cell_diameter());
    let sample_r = 4.0 * n_spacing as f64;
    let window = ball_set(sample_r, p.k)?;
    let centers = grid_centers(n_spacing, 8, p.k, &LatticePoint(vec![1; p.k]))?;
    let n_samples = p.sample_size.unwrap_or(4);
    let xs: Vec<PointWindow> = (0..n_samples)
        .map(|i| system.sample(&window, i))
        .collect::<mdimkit::Result<_>>()?;
    let observations: Vec<(&PointWindow, &FlatCenters)> =
        xs.iter().map(|x| (x, &centers)).collect();
    let palette = build_palette(
        &observations,
        &|_| window.clone(),
        &obs,
        eps,
        delta,
        &params,
        p.seed,
        p.cert_cap.unwrap_or(2_000),
    )?;
    let out_window = ball_set(sample_r - n_spacing as f64, p.k)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, x) in xs.iter().enumerate() {
        let painted = paint_symbolic(x, &centers, &palette, &out_window, &obs)?;
        let report = claim_check_symbolic(&painted, x, &centers, &palette, &out_window)?;
        if report.max_abs_diff > 1e-10 {
            failures += 1;
        }
        rows.push(json!({"sample": i, "claim": report, "palette_pieces": palette.entries.len()}));
    }
    Ok(RunOutput {
        rows,
        csv: None,
        failures,
    })
}

fn encoder_fixture(
    cfg: &ExperimentConfig,
) -> Result<(FieldedSystem, mdimkit::perturbation::Encoder, mdimkit::perturbation::G2Apparatus)> {
    let p = &cfg.params;
    let k = p.k;
    let n_block = require(p.n_block, "N")?;
    let m = require(p.m, "M")?;
    let l = require(p.l, "L")? as f64;
    let s = require(p.s, "s")?;
    let h = p.h.unwrap_or_else(|| min_lift_height(l, k));
    let eps = p.eps.unwrap_or(0.3);
    let delta = p.delta.unwrap_or(0.4);
    let cap = p.cert_cap.unwrap_or(60_000);
    let params = MetricParams::new(0.0, 1.0);
    let obs = Observable::CellVector { dim: 1 };

    let fs = FieldedSystem {
        system: binary_in_cube(k, p.seed)?,
        kind: FieldKind::Grid { spacing: m },
        h,
        s,
        seed: p.seed,
    };
    let block = mdimkit::lattice::cube_window(n_block, k)?;
    let pool = exhaustive_binary_blocks(&block);
    let enc = build_encoder(
        pool,
        k,
        n_block,
        l,
        s,
        obs.clone(),
        eps,
        delta,
        params.clone(),
        p.seed + 1,
        cap,
    )?;
    let pool_for = |omega: &LatticeSet| -> mdimkit::Result<Vec<PointWindow>> {
        Ok(exhaustive_binary_blocks(omega))
    };
    let g2 = build_g2(&pool_for, k, &enc, l, s, obs, params, p.seed + 2, cap)?;
    Ok((fs, enc, g2))
}

fn exhaustive_binary_blocks(omega: &LatticeSet) -> Vec<PointWindow> {
    let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
    let total = 1usize << cells.len();
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut w = PointWindow::new(omega.k(), "blocks");
        for (i, cell) in cells.iter().enumerate() {
            let bit = (code >> i) & 1;
            w.insert(
                cell.clone(),
                mdimkit::systems::CellValue::vector(vec![bit as f64]),
            );
        }
        out.push(w);
    }
    out
}

/// `encode-decode`: first channel plus decoder, with the indicator check on
/// deep cells.
pub fn encode_decode(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let (fs, enc, _g2) = encoder_fixture(cfg)?;
    let k = p.k;
    let regions = decode_regions(&enc, p.r.unwrap_or(16.0), k)?;
    let window = ball_set(6.0 * require(p.m, "M")? as f64, k)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for i in 0..p.sample_size.unwrap_or(3) {
        let x = fs.sample(&window, i)?;
        let lifted = LiftedCenters::from_field(&x.field)?;
        let g1 = encode_g1(&x, &lifted, &enc, &regions.g1_window)?;
        let omega = painted_to_window(&g1, k, "g1");
        let tiling = decode_pseudo_tiling(&omega, &enc, &regions.n_region, &regions.t_region)?;
        let mut deep = 0usize;
        let mut exact = 0usize;
        for t in regions.t_region.iter() {
            let u = t.as_f64();
            let owner = lifted.owner_at(&u, -lifted.h_plane)?;
            if lifted.w_boundary_distance(&owner, &u)?
                < 2.0 * (k as f64).sqrt() * enc.n_block as f64
            {
                continue;
            }
            deep += 1;
            if tiling.value(&owner, t) == 1.0 {
                exact += 1;
            }
        }
        if exact != deep {
            failures += 1;
        }
        rows.push(json!({"sample": i, "deep_cells": deep, "indicator_exact": exact, "tau": enc.tau}));
    }
    Ok(RunOutput {
        rows,
        csv: None,
        failures,
    })
}

/// `verify-embed`: the full two-channel chain on sampled pairs.
pub fn verify_embed(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let (fs, enc, g2) = encoder_fixture(cfg)?;
    let window = ball_set(6.0 * require(p.m, "M")? as f64, p.k)?;
    let n_pairs = p.sample_size.unwrap_or(8);
    let mut pairs = Vec::new();
    for i in 0..n_pairs {
        let x = fs.sample(&window, 2 * i)?;
        if i % 2 == 0 {
            pairs.push((i, x.clone(), x));
        } else {
            let y = fs.sample(&window, 2 * i + 1)?;
            pairs.push((i, x, y));
        }
    }
    let reports = verify_two_channel_pairs(&pairs, &enc, &g2, p.r.unwrap_or(16.0))?;
    let failures = reports.iter().filter(|r| r.failed()).count();
    let rows = reports
        .iter()
        .map(|r| serde_json::to_value(r).expect("report serializes"))
        .collect();
    Ok(RunOutput {
        rows,
        csv: None,
        failures,
    })
}

/// `lemmas-simplicial`: the generic-position certificate battery.
pub fn lemmas_simplicial(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let runs = p.sample_size.unwrap_or(100);
    let cap = p.cert_cap.unwrap_or(5_000);
    let mut rows = Vec::new();
    let mut failures = 0;
    for i in 0..runs {
        let seed = p.seed.wrapping_add(i * 1009);
        let configs: Vec<(&str, SimplicialComplex, TargetTag)> = vec![
            (
                "embedding",
                SimplicialComplex::simplex(1),
                TargetTag::EmbeddingCube { n: 3 },
            ),
            (
                "zero-coordinate",
                SimplicialComplex::simplex(2),
                TargetTag::ZeroCoordinate { n: 3 },
            ),
            (
                "window-restriction",
                SimplicialComplex::discrete(3),
                TargetTag::WindowRestriction {
                    n_small: 2,
                    n_big: 4,
                    dim_v: 1,
                    k: 1,
                },
            ),
        ];
        for (name, complex, tag) in configs {
            let (_, cert) = sample_generic_linear(&complex, &tag, seed, cap)?;
            if cert.resamples > 0 {
                failures += 1;
            }
            rows.push(json!({"run": i, "lemma": name, "cert": cert}));
        }
    }
    Ok(RunOutput {
        rows,
        csv: None,
        failures,
    })
}

/// `sweep`: cartesian sweep over small grids, one CSV row per cell.
pub fn sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.params;
    let eps_grid = p.grids.eps_grid.clone().unwrap_or_else(|| vec![0.5]);
    let e_grid = p.grids.e_grid.clone().unwrap_or_else(|| vec![1.0]);
    let m_grid = p.grids.m_grid.clone().unwrap_or(vec![require(p.m, "M")?]);
    let cells = eps_grid.len() * e_grid.len() * m_grid.len();
    if cells > 10_000 {
        bail!("sweep grid too large: {cells} cells > 10000");
    }
    let mut csv = String::from("eps,E,M,estimate,std_error,normalizer\n");
    let mut rows = Vec::new();
    for &eps in &eps_grid {
        for &e in &e_grid {
            for &m in &m_grid {
                let mut sub = cfg.clone();
                sub.params.m = Some(m);
                sub.params.l = Some(sub.params.l.unwrap_or(m).max(m));
                sub.params.h = None;
                sub.params.e = Some(e);
                sub.params.eps = Some(eps);
                let l = sub.params.l.unwrap();
                sub.params.h = Some(min_lift_height(l as f64, p.k));
                let est = boundary_fraction_cmd(&sub)?;
                let row = &est.rows[0];
                let estimate = row["estimate"]["estimate"].as_f64().unwrap_or(f64::NAN);
                let std_error = row["estimate"]["std_error"].as_f64().unwrap_or(f64::NAN);
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    eps,
                    e,
                    m,
                    estimate,
                    std_error,
                    (1.0f64 / eps).ln()
                ));
                rows.push(json!({"eps": eps, "E": e, "M": m, "row": row}));
            }
        }
    }
    Ok(RunOutput {
        rows,
        csv: Some(csv),
        failures: 0,
    })
}

/// Write result rows, optional CSV, and the manifest.
pub fn write_outputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    command: &str,
    output: &RunOutput,
    wall_ms: u128,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut jsonl = String::new();
    for row in &output.rows {
        jsonl.push_str(&serde_json::to_string(row)?);
        jsonl.push('\n');
    }
    std::fs::write(out_dir.join("result.jsonl"), jsonl)?;
    if let Some(csv) = &output.csv {
        std::fs::write(out_dir.join("result.csv"), csv)?;
    }

    use sha2::Digest;
    let config_text = cfg.canonical_json();
    let hash = sha2::Sha256::digest(config_text.as_bytes());
    let manifest = json!({
        "command": command,
        "config_hash": format!("{hash:x}"),
        "seed": cfg.params.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": wall_ms,
        "failures": output.failures,
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}
