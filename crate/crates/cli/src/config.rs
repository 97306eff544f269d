//! Optional TOML defaults. Keys are flag names with `-` replaced by `_`;
//! a few settings (prompt templates, `[synth]`) exist only here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kc_eval::synth::SynthConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub kcdb: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub hints: Option<PathBuf>,
    pub term: Option<String>,
    pub linkage_window: Option<i64>,

    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_parallel: Option<usize>,
    pub retry_limit: Option<u32>,
    pub cache: Option<PathBuf>,
    pub api_key_env: Option<String>,
    pub timeout: Option<u64>,
    pub auth_header: Option<String>,
    pub response_text_pointer: Option<String>,
    pub prompt_template_code: Option<String>,
    pub prompt_template_hint: Option<String>,
    pub prompt_template_judge: Option<String>,
    pub problem_statements: BTreeMap<String, String>,

    pub extractions: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub in_dir: Option<PathBuf>,
    pub drop_report: Option<PathBuf>,

    pub idle_cap: Option<f64>,
    pub baseline_dataset: Option<PathBuf>,
    pub baseline_extractions: Option<PathBuf>,
    pub welch: Option<bool>,

    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub overlap_fraction: Option<f64>,
    pub sample: Option<PathBuf>,
    pub raters: Vec<PathBuf>,

    pub n_students: Option<usize>,
    pub q_top3: Option<f64>,
    pub synth: Option<SynthConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}
