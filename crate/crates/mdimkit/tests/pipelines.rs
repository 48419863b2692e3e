//! End-to-end pipeline tests: tile painting with its block identities and
//! zero-set decomposition, and the two-channel encode/decode round trip.

mod common;

use common::{build_encoder_fixture, build_zero_pipeline};
use mdimkit::lattice::{ball_points, LatticePoint, LatticeSet};
use mdimkit::perturbation::{
    claim_check_tiles, decode_pseudo_tiling, decode_regions, distinguished_block, encode_g1,
    encode_g2, paint_tiles, painted_to_window, verify_two_channel_pairs, zero_set_ocap_check,
};
use mdimkit::voronoi::LiftedCenters;

fn ball_set(r: f64, k: usize) -> LatticeSet {
    LatticeSet::from_points(k, ball_points(r, k).unwrap().iter().cloned()).unwrap()
}

#[test]
fn tile_paint_blends_and_block_identities_hold() {
    let fx = build_zero_pipeline(64, 4, 5, 600);
    let x = fx.system.sample(&ball_set(120.0, 1), 0).unwrap();
    let lifted = LiftedCenters::from_field(&x.field).unwrap();
    let out = ball_set(60.0, 1);
    let painted = paint_tiles(&x, &lifted, &fx.embed, fx.n_block, &fx.embed.observable, &out)
        .unwrap();

    // Perturbation size |g - f| < delta everywhere; boundary cells keep f.
    let mut boundary_cells = 0;
    let mut deep_cells = 0;
    for m in out.iter() {
        let cell = &painted.cells[m];
        let f_val = fx.embed.observable.eval(&x.point, m).unwrap()[0];
        assert!(
            (cell.value[0] - f_val).abs() < fx.delta,
            "delta bound violated at {:?}",
            m.0
        );
        if cell.boundary_dist <= 0.0 {
            boundary_cells += 1;
            assert_eq!(cell.value[0], f_val, "boundary cell must keep f");
        }
        if cell.boundary_dist >= 1.0 {
            deep_cells += 1;
        }
    }
    assert!(deep_cells > 0);
    // Grid spacing 64 with integer offset puts bisectors on lattice points.
    assert!(boundary_cells > 0, "expected on-bisector cells in this fixture");

    let report = claim_check_tiles(&painted, &x, &lifted, &fx.embed, fx.n_block, &out).unwrap();
    assert!(report.blocks_checked >= 4, "{report:?}");
    assert_eq!(report.max_abs_diff, 0.0, "{report:?}");
}

#[test]
fn zero_set_decomposition_and_block_caps() {
    let fx = build_zero_pipeline(64, 4, 7, 600);
    let x = fx.system.sample(&ball_set(130.0, 1), 1).unwrap();
    let lifted = LiftedCenters::from_field(&x.field).unwrap();
    let out = ball_set(45.0, 1);
    let painted = paint_tiles(&x, &lifted, &fx.embed, fx.n_block, &fx.embed.observable, &out)
        .unwrap();
    let report =
        zero_set_ocap_check(&painted, &x, &lifted, &fx.embed, fx.n_block, fx.eps, &[25.0, 45.0])
            .unwrap();
    assert!(report.decomposition_holds(), "{report:?}");
    assert!(report.blocks_checked > 0);
    assert!(
        (report.max_block_zeros as f64) < report.per_block_zero_cap,
        "deep blocks must avoid zeros: {report:?}"
    );
    // Zeros can only sit on tile boundaries here, so the count is far below
    // the final target.
    assert!(report.final_normalized < 2.0 * fx.eps, "{report:?}");
}

#[test]
fn two_channel_round_trip_reproduces_indicators() {
    let fx = build_encoder_fixture(11, 60_000);
    let k = 1usize;
    let x = fx.system.sample(&ball_set(170.0, k), 3).unwrap();
    let lifted = LiftedCenters::from_field(&x.field).unwrap();

    let regions = decode_regions(&fx.enc, 16.0, k).unwrap();
    let g1 = encode_g1(&x, &lifted, &fx.enc, &regions.g1_window).unwrap();
    let omega = painted_to_window(&g1, k, "g1");
    let tiling =
        decode_pseudo_tiling(&omega, &fx.enc, &regions.n_region, &regions.t_region).unwrap();

    // Indicator behavior on nice tiles: cells with B_{2 sqrt k N}(m) inside
    // the tile get W_n(m) = 1 exactly and W_n'(m) = 0 for n' != n.
    let sqrt_k = 1.0f64;
    let nb = fx.enc.n_block as f64;
    let mut checked = 0;
    for t in regions.t_region.iter() {
        let u = t.as_f64();
        let owner = lifted.owner_at(&u, -lifted.h_plane).unwrap();
        let dist = lifted.w_boundary_distance(&owner, &u).unwrap();
        if dist < 2.0 * sqrt_k * nb {
            continue;
        }
        checked += 1;
        assert_eq!(tiling.value(&owner, t), 1.0, "W_n({:?}) != 1", t.0);
        for n in regions.n_region.iter() {
            if n != &owner {
                assert_eq!(tiling.value(n, t), 0.0, "W_{:?}({:?}) != 0", n.0, t.0);
            }
        }
    }
    assert!(checked > 10, "too few deep cells checked: {checked}");

    // The distinguished block of the overshoot plane is marked the same way.
    let (n_star, a) = distinguished_block(&lifted, &fx.enc).unwrap();
    let s = lifted.s_overshoot;
    for i in 0..k {
        let target = (1.0 - 1.0 / s) * n_star.0[i] as f64;
        assert!(a.0[i] as f64 <= target && target < (a.0[i] + fx.enc.n_block as i64) as f64);
    }
    let block_cells = mdimkit::lattice::cube_window(fx.enc.n_block, k).unwrap();
    for c in block_cells.iter() {
        let m = a.add(c);
        assert_eq!(tiling.value(&n_star, &m), 1.0);
    }
}

#[test]
fn two_channel_g2_extracts_payload() {
    let fx = build_encoder_fixture(13, 60_000);
    let k = 1usize;
    let x = fx.system.sample(&ball_set(170.0, k), 1).unwrap();
    let lifted = LiftedCenters::from_field(&x.field).unwrap();
    let regions = decode_regions(&fx.enc, 16.0, k).unwrap();
    let g1 = encode_g1(&x, &lifted, &fx.enc, &regions.g1_window).unwrap();
    let omega = painted_to_window(&g1, k, "g1");
    let tiling =
        decode_pseudo_tiling(&omega, &fx.enc, &regions.n_region, &regions.t_region).unwrap();
    let g2map = encode_g2(
        &x,
        &fx.enc,
        &fx.g2,
        &tiling,
        &fx.enc.embed.observable,
        &regions.g2_window,
    )
    .unwrap();

    // |g2 - f2| < delta everywhere.
    for (m, cell) in &g2map.cells {
        let f_val = fx.enc.embed.observable.eval(&x.point, m).unwrap()[0];
        assert!((cell.value[0] - f_val).abs() < fx.enc.delta);
    }

    // On the distinguished block the painted channel equals the payload.
    let (n_star, a) = distinguished_block(&lifted, &fx.enc).unwrap();
    let rel = n_star.sub(&a);
    let j = fx.g2.pi_position(&rel).unwrap();
    let payload = fx.g2.eval(j, &x.point, &a).unwrap();
    let block_cells: Vec<LatticePoint> = mdimkit::lattice::cube_window(fx.enc.n_block, k)
        .unwrap()
        .iter()
        .cloned()
        .collect();
    let painted_block = g2map.block(&a, &block_cells).unwrap();
    for (p, q) in painted_block.iter().zip(&payload) {
        assert_eq!(p, q, "block identity must be exact on the nice tile");
    }
}

#[test]
fn two_channel_pair_verification() {
    let fx = build_encoder_fixture(17, 60_000);
    let k = 1usize;
    let w = ball_set(170.0, k);
    let x = fx.system.sample(&w, 0).unwrap();
    let y = fx.system.sample(&w, 1).unwrap();
    let pairs = vec![(0u64, x.clone(), x.clone()), (1u64, x, y)];
    let reports = verify_two_channel_pairs(&pairs, &fx.enc, &fx.g2, 16.0).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].verdict, "close-pair-ok", "{:?}", reports[0]);
    assert!(
        reports[1].verdict == "distinguished",
        "independent samples should differ: {:?}",
        reports[1]
    );
    assert!(reports.iter().all(|r| !r.failed()));
}
