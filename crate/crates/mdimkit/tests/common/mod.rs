//! Shared fixtures for the pipeline and acceptance tests.

#![allow(dead_code)]

use mdimkit::lattice::LatticeSet;
use mdimkit::lattice::LatticePoint;
use mdimkit::perturbation::{
    build_encoder, build_g2, certified_window_map, Encoder, G2Apparatus, Observable,
    WindowEmbedding,
};
use mdimkit::simplicial::generic::TargetTag;
use mdimkit::systems::marker::min_lift_height;
use mdimkit::systems::metric::MetricParams;
use mdimkit::systems::{
    CellValue, FactorMapSpec, FieldKind, FieldedSystem, PointWindow, ShiftSystem, SystemSpec,
};

/// Every assignment of the given levels to the cells of `omega`, as vector
/// windows (the exhaustive block dictionary).
pub fn exhaustive_vector_blocks(
    omega: &LatticeSet,
    levels: &[f64],
    id: &str,
) -> Vec<PointWindow> {
    let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
    let total = levels.len().pow(cells.len() as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut w = PointWindow::new(omega.k(), id);
        let mut c = code;
        for cell in &cells {
            w.insert(cell.clone(), CellValue::vector(vec![levels[c % levels.len()]]));
            c /= levels.len();
        }
        out.push(w);
    }
    out
}

/// The binary shift embedded in the unit interval (values {0, 1}), as a
/// factor of the full 2-shift.
pub fn binary_in_cube_system(k: usize, seed: u64) -> ShiftSystem {
    let base = SystemSpec::full_shift(k, 2, seed);
    ShiftSystem::new(SystemSpec::factor(
        base,
        FactorMapSpec::Named("symbols_to_unit_cube".into()),
        seed,
    ))
    .unwrap()
}

/// Parameters of the one-dimensional two-channel fixture: grid markers with
/// all tiles congruent, the binary shift in the cube, N = 2, s = 2.
pub struct EncoderFixture {
    pub system: FieldedSystem,
    pub enc: Encoder,
    pub g2: G2Apparatus,
    pub spacing: i64,
}

pub fn build_encoder_fixture(seed: u64, cap: u64) -> EncoderFixture {
    let k = 1usize;
    let n_block = 2usize;
    let spacing = 26i64;
    let l = spacing as f64;
    let s = 2.0;
    let h = min_lift_height(l, k);
    let eps = 0.3;
    let delta = 0.4;
    let params = MetricParams::new(0.0, 1.0);
    let obs = Observable::CellVector { dim: 1 };

    let system = FieldedSystem {
        system: binary_in_cube_system(k, seed),
        kind: FieldKind::Grid { spacing },
        h,
        s,
        seed,
    };

    let block = mdimkit::lattice::cube_window(n_block, k).unwrap();
    let pool = exhaustive_vector_blocks(&block, &[0.0, 1.0], "enc-pool");
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
        seed + 1,
        cap,
    )
    .unwrap();

    let pool_for = |omega: &LatticeSet| -> mdimkit::Result<Vec<PointWindow>> {
        Ok(exhaustive_vector_blocks(omega, &[0.0, 1.0], "g2-pool"))
    };
    let g2 = build_g2(
        &pool_for,
        k,
        &enc,
        l,
        s,
        obs,
        params,
        seed + 2,
        cap,
    )
    .unwrap();

    EncoderFixture {
        system,
        enc,
        g2,
        spacing,
    }
}

/// A zero-avoiding payload map for the real-valued pipeline: the observable
/// `2 x - 1` on a quantized cube shift, approximated on a pool of all shifts
/// of the given samples and perturbed with the zero-coordinate certificate.
pub struct ZeroPipelineFixture {
    pub system: FieldedSystem,
    pub embed: WindowEmbedding,
    pub n_block: usize,
    pub eps: f64,
    pub delta: f64,
}

pub fn build_zero_pipeline(spacing: i64, n_block: usize, seed: u64, cap: u64) -> ZeroPipelineFixture {
    let k = 1usize;
    let eps = 0.05;
    let delta = 0.5;
    let s = 1.05;
    let l = spacing as f64;
    let system = FieldedSystem {
        system: ShiftSystem::new(SystemSpec::quantized_cube_shift(k, 1, 4, seed)).unwrap(),
        kind: FieldKind::Grid { spacing },
        h: min_lift_height(l, k),
        s,
        seed,
    };

    // Exhaustive block dictionary: every evaluation lands on a cluster.
    let omega = mdimkit::lattice::cube_window(n_block, k).unwrap();
    let pool = exhaustive_vector_blocks(&omega, &[0.0, 0.25, 0.5, 0.75, 1.0], "zero-pool");
    let cells: Vec<LatticePoint> = omega.iter().cloned().collect();
    let obs = Observable::CellAffine {
        dim: 1,
        scale: 2.0,
        offset: -1.0,
    };
    let tag = TargetTag::ZeroCoordinate { n: cells.len() };
    let embed = certified_window_map(
        pool,
        omega,
        cells,
        obs,
        eps,
        delta,
        MetricParams::new(0.0, 2.0),
        Some((&tag, seed + 9, cap)),
        1,
    )
    .unwrap();

    ZeroPipelineFixture {
        system,
        embed,
        n_block,
        eps,
        delta,
    }
}
