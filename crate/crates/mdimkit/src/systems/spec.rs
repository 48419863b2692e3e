//! JSON system specifications.
//!
//! The on-disk format is
//! `{"k":int, "kind":"full|sft|product|factor|sturmian", "alphabet":int or
//! "cube_D":int, "forbidden":[patterns], "seed":int}` with patterns written
//! as `{offset: symbol}` maps whose keys are comma-separated coordinates.
//! Serialization is canonical (sorted pattern keys, fixed field order), so
//! spec files round-trip byte-exactly through [`SystemSpec::to_canonical_json`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lattice::LatticePoint;
use crate::{Error, Result};

/// A forbidden (or matched) local pattern: offset -> symbol.
pub type PatternSpec = BTreeMap<String, u32>;

/// Parsed pattern with lattice offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub cells: Vec<(LatticePoint, u32)>,
}

pub fn parse_offset(key: &str, k: usize) -> Result<LatticePoint> {
    let coords: std::result::Result<Vec<i64>, _> =
        key.split(',').map(|c| c.trim().parse::<i64>()).collect();
    let coords = coords.map_err(|e| Error::SystemSpec(format!("bad offset key {key:?}: {e}")))?;
    if coords.len() != k {
        return Err(Error::SystemSpec(format!(
            "offset key {key:?} has {} coordinates, expected {k}",
            coords.len()
        )));
    }
    Ok(LatticePoint(coords))
}

pub fn format_offset(p: &LatticePoint) -> String {
    p.0.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl Pattern {
    pub fn from_spec(spec: &PatternSpec, k: usize) -> Result<Self> {
        let mut cells = Vec::new();
        for (key, &sym) in spec {
            cells.push((parse_offset(key, k)?, sym));
        }
        Ok(Pattern { cells })
    }
}

/// Cell-wise factor maps (all radius zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorMapSpec {
    /// "project_symbol", "project_vector", or "symbols_to_unit_cube".
    Named(String),
    /// Symbol relabeling by table lookup.
    Relabel { relabel: Vec<u32> },
}

/// Declarative description of a shift system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub k: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<u32>,
    #[serde(rename = "cube_D", skip_serializing_if = "Option::is_none")]
    pub cube_d: Option<usize>,
    /// For cube-valued systems: restrict coordinates to the grid
    /// `{0, 1/q, ..., 1}`. A closed shift-invariant subsystem of the cube
    /// shift, convenient for exact fixtures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantize: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forbidden: Option<Vec<PatternSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<SystemSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<SystemSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<FactorMapSpec>,
    pub seed: u64,
}

impl SystemSpec {
    pub fn full_shift(k: usize, alphabet: u32, seed: u64) -> Self {
        SystemSpec {
            k,
            kind: "full".into(),
            alphabet: Some(alphabet),
            cube_d: None,
            quantize: None,
            forbidden: None,
            factors: None,
            base: None,
            map: None,
            seed,
        }
    }

    pub fn cube_shift(k: usize, cube_d: usize, seed: u64) -> Self {
        SystemSpec {
            k,
            kind: "full".into(),
            alphabet: None,
            cube_d: Some(cube_d),
            quantize: None,
            forbidden: None,
            factors: None,
            base: None,
            map: None,
            seed,
        }
    }

    pub fn quantized_cube_shift(k: usize, cube_d: usize, levels_minus_one: u32, seed: u64) -> Self {
        let mut spec = Self::cube_shift(k, cube_d, seed);
        spec.quantize = Some(levels_minus_one);
        spec
    }

    pub fn sft(k: usize, alphabet: u32, forbidden: Vec<PatternSpec>, seed: u64) -> Self {
        SystemSpec {
            k,
            kind: "sft".into(),
            alphabet: Some(alphabet),
            cube_d: None,
            quantize: None,
            forbidden: Some(forbidden),
            factors: None,
            base: None,
            map: None,
            seed,
        }
    }

    /// The golden-mean shift: binary, no two adjacent 1s along any axis.
    pub fn golden_mean(k: usize, seed: u64) -> Self {
        let mut forbidden = Vec::new();
        for axis in 0..k {
            let mut pat = PatternSpec::new();
            let origin = vec![0i64; k];
            let mut step = vec![0i64; k];
            step[axis] = 1;
            pat.insert(format_offset(&LatticePoint(origin)), 1);
            pat.insert(format_offset(&LatticePoint(step)), 1);
            forbidden.push(pat);
        }
        Self::sft(k, 2, forbidden, seed)
    }

    /// One-dimensional Sturmian-like aperiodic sequences (golden rotation
    /// codings with a seeded phase).
    pub fn sturmian(seed: u64) -> Self {
        SystemSpec {
            k: 1,
            kind: "sturmian".into(),
            alphabet: Some(2),
            cube_d: None,
            quantize: None,
            forbidden: None,
            factors: None,
            base: None,
            map: None,
            seed,
        }
    }

    pub fn product(factors: Vec<SystemSpec>, seed: u64) -> Result<Self> {
        let k = factors.first().map(|f| f.k).unwrap_or(0);
        if factors.is_empty() || factors.iter().any(|f| f.k != k) {
            return Err(Error::SystemSpec(
                "product needs at least one factor, all with the same k".into(),
            ));
        }
        Ok(SystemSpec {
            k,
            kind: "product".into(),
            alphabet: None,
            cube_d: None,
            quantize: None,
            forbidden: None,
            factors: Some(factors),
            base: None,
            map: None,
            seed,
        })
    }

    pub fn factor(base: SystemSpec, map: FactorMapSpec, seed: u64) -> Self {
        SystemSpec {
            k: base.k,
            kind: "factor".into(),
            alphabet: None,
            cube_d: None,
            quantize: None,
            forbidden: None,
            factors: None,
            base: Some(Box::new(base)),
            map: Some(map),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::SystemSpec("k must be positive".into()));
        }
        match self.kind.as_str() {
            "full" => {
                if self.alphabet.is_none() && self.cube_d.is_none() {
                    return Err(Error::SystemSpec(
                        "full shift needs alphabet or cube_D".into(),
                    ));
                }
                if let Some(a) = self.alphabet {
                    if a < 1 {
                        return Err(Error::SystemSpec("alphabet must be >= 1".into()));
                    }
                }
            }
            "sft" => {
                let a = self
                    .alphabet
                    .ok_or_else(|| Error::SystemSpec("sft needs alphabet".into()))?;
                if a < 1 {
                    return Err(Error::SystemSpec("alphabet must be >= 1".into()));
                }
                let pats = self
                    .forbidden
                    .as_ref()
                    .ok_or_else(|| Error::SystemSpec("sft needs forbidden patterns".into()))?;
                for p in pats {
                    Pattern::from_spec(p, self.k)?;
                }
            }
            "sturmian" => {
                if self.k != 1 {
                    return Err(Error::SystemSpec("sturmian systems are 1-dimensional".into()));
                }
            }
            "product" => {
                let fs = self
                    .factors
                    .as_ref()
                    .ok_or_else(|| Error::SystemSpec("product needs factors".into()))?;
                if fs.is_empty() {
                    return Err(Error::SystemSpec("product needs at least one factor".into()));
                }
                for f in fs {
                    if f.k != self.k {
                        return Err(Error::SystemSpec("product factors must share k".into()));
                    }
                    f.validate()?;
                }
            }
            "factor" => {
                let base = self
                    .base
                    .as_ref()
                    .ok_or_else(|| Error::SystemSpec("factor needs base".into()))?;
                if self.map.is_none() {
                    return Err(Error::SystemSpec("factor needs map".into()));
                }
                base.validate()?;
            }
            other => {
                return Err(Error::SystemSpec(format!("unknown kind {other:?}")));
            }
        }
        Ok(())
    }

    /// Canonical serialization used for spec files and config hashes.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SystemSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_mean_spec_round_trips_byte_exactly() {
        let spec = SystemSpec::golden_mean(2, 11);
        let text = spec.to_canonical_json();
        let back = SystemSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_canonical_json(), text);
    }

    #[test]
    fn nested_specs_round_trip() {
        let z = SystemSpec::sturmian(3);
        let cube = SystemSpec::quantized_cube_shift(1, 1, 8, 4);
        let prod = SystemSpec::product(vec![z, cube], 5).unwrap();
        let factored = SystemSpec::factor(prod, FactorMapSpec::Named("project_symbol".into()), 6);
        let text = factored.to_canonical_json();
        let back = SystemSpec::from_json(&text).unwrap();
        assert_eq!(back.to_canonical_json(), text);
    }

    #[test]
    fn validation_rejects_malformed_specs() {
        let mut spec = SystemSpec::full_shift(1, 2, 0);
        spec.kind = "sft".into();
        assert!(spec.validate().is_err()); // missing forbidden list

        let text = r#"{"k":1,"kind":"full","alphabet":2,"seed":0,"extra":1}"#;
        assert!(SystemSpec::from_json(text).is_err()); // unknown field

        let text = r#"{"k":2,"kind":"sturmian","seed":0}"#;
        assert!(SystemSpec::from_json(text).is_err()); // sturmian is k=1 only
    }

    #[test]
    fn pattern_offsets_parse() {
        let p = parse_offset("-1,3", 2).unwrap();
        assert_eq!(p, LatticePoint(vec![-1, 3]));
        assert!(parse_offset("1", 2).is_err());
        assert_eq!(format_offset(&LatticePoint(vec![-1, 3])), "-1,3");
    }
}
