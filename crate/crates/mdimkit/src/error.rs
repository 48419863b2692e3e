use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("window too small: {context} requires the window inflated by {required}")]
    WindowTooSmall { context: String, required: String },

    #[error("marker separation violated: support points {a:?} and {b:?} at distance {dist} < {min}")]
    MarkerSeparation {
        a: Vec<i64>,
        b: Vec<i64>,
        dist: f64,
        min: f64,
    },

    #[error("marker syndeticity violated: no value-1 support within {radius} of {point:?}")]
    MarkerSyndeticity { point: Vec<i64>, radius: f64 },

    #[error("periodic obstruction: sample {sample} repeats its pattern at {a:?} and {b:?} (distance {dist} < {l})")]
    PeriodicObstruction {
        sample: u64,
        a: Vec<i64>,
        b: Vec<i64>,
        dist: f64,
        l: f64,
    },

    #[error("modulus violation: d(x,y) = {dist} < {eps} but the images differ by {gap} >= {delta} (pair {i}, {j})")]
    ModulusViolation {
        i: usize,
        j: usize,
        dist: f64,
        eps: f64,
        gap: f64,
        delta: f64,
    },

    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("certificate missing: {0}")]
    CertificateMissing(String),

    #[error("palette miss: no piece for cell shape with {cells} cells (anchor {anchor:?})")]
    PaletteMiss { cells: usize, anchor: Vec<i64> },

    #[error("system spec error: {0}")]
    SystemSpec(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
