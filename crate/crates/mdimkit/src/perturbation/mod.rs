//! The constructive pipelines: certified window embeddings painted into
//! Voronoi tiles, the zero-set and covering-number checkers built on them,
//! and the two-channel encoder with its pseudo-tiling decoder and pair
//! verification.

pub mod embedding;
pub mod encoder;
pub mod palette;
pub mod tiles;

pub use embedding::{certified_window_map, Observable, PoolMetric, WindowEmbedding};
pub use encoder::{
    build_encoder, build_g2, decode_pseudo_tiling, decode_regions, distinguished_block,
    elongated_window,
    encode_g1, encode_g2, painted_to_window, verify_two_channel_pairs, DecodeRegions, Encoder,
    G2Apparatus,
    PseudoTiling,
};
pub use palette::{
    build_palette, claim_check_symbolic, observed_tiles, paint_symbolic, verify_symbolic_pairs,
    BlockIdentityReport, PaintedMap, PairReport, PaletteEntry, TilePalette,
};
pub use tiles::{
    alpha_cutoff, ball_volume, block_anchor, claim_check_tiles, cube_covering_number, deep_blocks,
    mmdim_payload_check, paint_tiles, zero_set_ocap_check, MmdimReport, MmdimRow, PaintedCell,
    TileClaimReport, TilePaintedMap, ZeroSetReport, ZeroSetRow,
};
