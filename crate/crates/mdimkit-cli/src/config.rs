//! Experiment configuration: one JSON file per run, with every parameter
//! gate checked before anything executes.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use mdimkit::dimension::CellPredicate;
use mdimkit::systems::marker::HeightSpec;
use mdimkit::systems::SystemSpec;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub k: usize,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_block: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<u64>,
    #[serde(default, skip_serializing_if = "is_default_grids")]
    pub grids: Grids,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heights: Option<HeightSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicate: Option<CellPredicate>,
    /// Tuple cap for exact certificates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cert_cap: Option<u64>,
}

fn is_default_grids(g: &Grids) -> bool {
    g.n_grid.is_none()
        && g.r_grid.is_none()
        && g.eps_grid.is_none()
        && g.e_grid.is_none()
        && g.m_grid.is_none()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).context("config does not match the schema")?;
        if let Some(sys) = &cfg.system {
            sys.validate().context("system spec invalid")?;
        }
        Ok(cfg)
    }

    /// Enforce every parameter inequality before running; the error names
    /// the gate that failed.
    pub fn check_gates(&self, needs_even_n: bool) -> anyhow::Result<()> {
        let p = &self.params;
        if p.k == 0 {
            bail!("k gate: k must be positive");
        }
        let sqrt_k = (p.k as f64).sqrt();
        if let (Some(l), Some(h)) = (p.l, p.h) {
            let min_h = (l as f64 + sqrt_k).powi(2);
            if h < min_h {
                bail!("H gate: H = {h} < (L + sqrt k)^2 = {min_h}");
            }
        }
        if let (Some(m), Some(l)) = (p.m, p.l) {
            if l < m {
                bail!("L gate: L = {l} < M = {m}");
            }
        }
        if let Some(s) = p.s {
            if s <= 1.0 {
                bail!("s gate: s = {s} must be > 1");
            }
        }
        if let (Some(eps), Some(delta)) = (p.eps, p.delta) {
            if !(0.0 < eps && eps < delta) {
                bail!("eps gate: need 0 < eps = {eps} < delta = {delta}");
            }
        }
        if needs_even_n {
            match p.n_block {
                Some(n) if n % 2 == 0 && n > 0 => {}
                other => bail!("N gate: this pipeline needs an even block side, got {other:?}"),
            }
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
