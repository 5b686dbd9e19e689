//! Experiment configuration: a strict JSON document (unknown keys are
//! rejected) naming the problem, the study and its parameters.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use emx_core::analysis::{PathNorm, ReferenceMode, Scheme, StudyConfig};
use emx_core::SdeProblem64;
use serde::Deserialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Validate,
    TransformCheck,
    Simulate,
    Convergence,
    Occupation,
}

impl std::fmt::Display for StudyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StudyKind::Validate => "validate",
            StudyKind::TransformCheck => "transform-check",
            StudyKind::Simulate => "simulate",
            StudyKind::Convergence => "convergence",
            StudyKind::Occupation => "occupation",
        })
    }
}

/// Grid for the `transform-check` table.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "defaults::grid_min")]
    pub min: f64,
    #[serde(default = "defaults::grid_max")]
    pub max: f64,
    #[serde(default = "defaults::grid_points")]
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: defaults::grid_min(),
            max: defaults::grid_max(),
            points: defaults::grid_points(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: SdeProblem64,
    /// Optional; when present it must match the CLI subcommand.
    #[serde(default)]
    pub study: Option<StudyKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "defaults::n_fine")]
    pub n_fine: usize,
    #[serde(default = "defaults::m")]
    pub m: usize,
    #[serde(default = "defaults::p")]
    pub p: f64,
    #[serde(default = "defaults::q")]
    pub q: PathNorm<f64>,
    #[serde(default = "defaults::scheme")]
    pub scheme: Scheme,
    #[serde(default = "defaults::reference")]
    pub reference: ReferenceMode,
    #[serde(default = "defaults::nu_fraction")]
    pub nu_fraction: f64,
    #[serde(default = "defaults::zero_tol")]
    pub zero_tol: f64,
    /// Paths emitted by `simulate`.
    #[serde(default = "defaults::sim_paths")]
    pub sim_paths: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

mod defaults {
    use emx_core::analysis::{PathNorm, ReferenceMode, Scheme};

    pub fn n_list() -> Vec<usize> {
        (4..=10).map(|e| 1usize << e).collect()
    }
    pub fn n_fine() -> usize {
        1 << 14
    }
    pub fn m() -> usize {
        2000
    }
    pub fn p() -> f64 {
        2.0
    }
    pub fn q() -> PathNorm<f64> {
        PathNorm::LInfinity
    }
    pub fn scheme() -> Scheme {
        Scheme::Em
    }
    pub fn reference() -> ReferenceMode {
        ReferenceMode::TransformedFine
    }
    pub fn nu_fraction() -> f64 {
        0.5
    }
    pub fn zero_tol() -> f64 {
        emx_core::sde_model::DEFAULT_ZERO_TOL
    }
    pub fn sim_paths() -> usize {
        1
    }
    pub fn grid_min() -> f64 {
        -2.0
    }
    pub fn grid_max() -> f64 {
        2.0
    }
    pub fn grid_points() -> usize {
        401
    }
}

impl ExperimentConfig {
    pub fn study_config(&self) -> StudyConfig<f64> {
        StudyConfig {
            n_list: self.n_list.clone(),
            n_fine: self.n_fine,
            m: self.m,
            p: self.p,
            q: self.q,
            scheme: self.scheme,
            reference: self.reference,
            nu_fraction: self.nu_fraction,
        }
    }
}

/// Parse the config document, apply `key=value` overrides (dotted keys
/// descend into objects; values are parsed as JSON, falling back to strings),
/// then deserialize strictly.
pub fn load_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut document: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    for entry in overrides {
        let (key, raw) = entry
            .split_once('=')
            .with_context(|| format!("override {entry:?} is not of the form key=value"))?;
        apply_override(&mut document, key, raw)
            .with_context(|| format!("cannot apply override {entry:?}"))?;
    }
    let config: ExperimentConfig =
        serde_json::from_value(document).context("config does not match the expected schema")?;
    Ok(config)
}

fn apply_override(document: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts = key.split('.').peekable();
    let mut cursor = document;
    loop {
        let part = parts.next().context("empty override key")?;
        let object = match cursor {
            Value::Object(map) => map,
            other => bail!("{part:?} cannot index into {other}"),
        };
        if parts.peek().is_none() {
            object.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = object
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {
            "x0": 0.0,
            "drift": {
                "breakpoints": [0.0],
                "pieces": [
                    {"form": "constant", "params": [1.0]},
                    {"form": "constant", "params": [-1.0]}
                ]
            },
            "diffusion": {"form": "constant", "params": [1.0]}
        }
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let config = load_config(MINIMAL, &[]).unwrap();
        assert_eq!(config.n_fine, 1 << 14);
        assert_eq!(config.n_list.first(), Some(&16));
        assert_eq!(config.m, 2000);
        assert_eq!(config.reference, ReferenceMode::TransformedFine);
        assert!(config.study.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replacen("{", "{\"surprise\": 1,", 1);
        assert!(load_config(&text, &[]).is_err());
    }

    #[test]
    fn overrides_descend_into_objects() {
        let config = load_config(
            MINIMAL,
            &["m=500".into(), "problem.x0=2.5".into(), "q=1.5".into()],
        )
        .unwrap();
        assert_eq!(config.m, 500);
        assert_eq!(config.problem.x0(), 2.5);
        assert_eq!(config.q, PathNorm::Lq(1.5));
    }

    #[test]
    fn override_with_bad_key_fails() {
        assert!(load_config(MINIMAL, &["problem.x0.deep=1".into()]).is_err());
        assert!(load_config(MINIMAL, &["m".into()]).is_err());
    }
}
