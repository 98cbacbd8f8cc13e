//! Flat `key=value` configuration files.
//!
//! One key per line, `#` starts a comment, unknown keys are rejected.
//! Every key has a default, so an empty (or absent) file is a valid
//! config. The same file carries training, synthesis, and evaluation
//! settings; manifests reuse the exact same format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use mooc_embed::corpus::SyntheticConfig;
use mooc_embed::eval::EvalConfig;
use mooc_embed::textenc::fnv1a;
use mooc_embed::trainer::{Precision, TrainConfig};

/// Fully resolved settings for every pipeline stage.
#[derive(Debug, Clone)]
pub struct Settings {
    pub train: TrainConfig,
    pub synth: SyntheticConfig,
    pub eval: EvalConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            synth: SyntheticConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Settings {
    pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> Result<Self> {
        let mut settings = Settings::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            settings.apply(&text)?;
        }
        if let Some(seed) = seed_override {
            settings.train.seed = seed;
            settings.eval.seed = seed;
        }
        Ok(settings)
    }

    fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected key=value, got `{raw}`", lineno + 1);
            };
            self.set(key.trim(), value.trim())
                .with_context(|| format!("config line {}", lineno + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| anyhow::anyhow!("bad value `{value}` for {key}: {e}"))
        }
        let t = &mut self.train;
        let s = &mut self.synth;
        let e = &mut self.eval;
        match key {
            "dim" => t.dim = parse(key, value)?,
            "layers" => t.layers = parse(key, value)?,
            "heads" => t.heads = parse(key, value)?,
            "max_lectures" => t.max_lectures = parse(key, value)?,
            "max_modules" => t.max_modules = parse(key, value)?,
            "margin" => t.margin = parse(key, value)?,
            "lambda1" => t.lambda1 = parse(key, value)?,
            "negatives" => t.negatives = parse(key, value)?,
            "implicit_threshold" => t.implicit_threshold = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "seed" => {
                t.seed = parse(key, value)?;
                e.seed = t.seed;
            }
            "text_dim" => t.text_dim = parse(key, value)?,
            "mse_mean" => t.mse_mean = parse(key, value)?,
            "precision" => {
                t.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    other => bail!("precision must be f32 or f64, got `{other}`"),
                }
            }
            "synth_concepts" => s.concepts = parse(key, value)?,
            "synth_chain_len" => s.chain_len = parse(key, value)?,
            "synth_courses" => s.courses = parse(key, value)?,
            "synth_lectures_per_course" => s.lectures_per_course = parse(key, value)?,
            "synth_users" => s.users = parse(key, value)?,
            "synth_module_len" => s.module_len = parse(key, value)?,
            "synth_noise" => s.noise = parse(key, value)?,
            "eval_hidden" => e.hidden = parse(key, value)?,
            "eval_epochs" => e.epochs = parse(key, value)?,
            "eval_lr" => e.lr = parse(key, value)?,
            "eval_window" => e.window = parse(key, value)?,
            "eval_k" => e.k = parse(key, value)?,
            "split_train" => e.proportions[0] = parse(key, value)?,
            "split_valid" => e.proportions[1] = parse(key, value)?,
            "split_test" => e.proportions[2] = parse(key, value)?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// The resolved configuration as sorted `key=value` lines.
    pub fn render(&self) -> String {
        let t = &self.train;
        let s = &self.synth;
        let e = &self.eval;
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("dim", t.dim.to_string());
        map.insert("layers", t.layers.to_string());
        map.insert("heads", t.heads.to_string());
        map.insert("max_lectures", t.max_lectures.to_string());
        map.insert("max_modules", t.max_modules.to_string());
        map.insert("margin", t.margin.to_string());
        map.insert("lambda1", t.lambda1.to_string());
        map.insert("negatives", t.negatives.to_string());
        map.insert("implicit_threshold", t.implicit_threshold.to_string());
        map.insert("lr", t.lr.to_string());
        map.insert("epochs", t.epochs.to_string());
        map.insert("batch_size", t.batch_size.to_string());
        map.insert("seed", t.seed.to_string());
        map.insert("precision", t.precision.to_string());
        map.insert("text_dim", t.text_dim.to_string());
        map.insert("mse_mean", t.mse_mean.to_string());
        map.insert("synth_concepts", s.concepts.to_string());
        map.insert("synth_chain_len", s.chain_len.to_string());
        map.insert("synth_courses", s.courses.to_string());
        map.insert(
            "synth_lectures_per_course",
            s.lectures_per_course.to_string(),
        );
        map.insert("synth_users", s.users.to_string());
        map.insert("synth_module_len", s.module_len.to_string());
        map.insert("synth_noise", s.noise.to_string());
        map.insert("eval_hidden", e.hidden.to_string());
        map.insert("eval_epochs", e.epochs.to_string());
        map.insert("eval_lr", e.lr.to_string());
        map.insert("eval_window", e.window.to_string());
        map.insert("eval_k", e.k.to_string());
        map.insert("split_train", e.proportions[0].to_string());
        map.insert("split_valid", e.proportions[1].to_string());
        map.insert("split_test", e.proportions[2].to_string());
        let mut out = String::new();
        for (k, v) in map {
            writeln!(out, "{k}={v}").expect("string write");
        }
        out
    }

    /// Stable short hash of the resolved configuration.
    pub fn hash(&self) -> String {
        format!("{:016x}", fnv1a(self.render().as_bytes(), 0xcbf2_9ce4_8422_2325))
    }
}
