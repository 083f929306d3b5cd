//! `key = value` run configuration shared by every pipeline stage.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::phrase::PhraseConfig;
use crate::trainer::{LossKind, TrainerConfig};
use crate::xmap::{FitMethod, MappingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub lowercase: bool,
    pub min_count: u64,
    pub min_doc_words: usize,
    pub phrase_delta: f64,
    pub phrase_threshold: f64,
    pub phrase_decay: f64,
    pub phrase_passes: usize,
    pub trainer: TrainerConfig,
    pub mapping: MappingConfig,
    pub map_method: FitMethod,
    pub ks: Vec<usize>,
    pub translate_k: usize,
    pub export_sample: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            lowercase: true,
            min_count: 5,
            min_doc_words: 50,
            phrase_delta: PhraseConfig::DEFAULT_DELTA,
            phrase_threshold: 1e-3,
            phrase_decay: PhraseConfig::DEFAULT_DECAY,
            phrase_passes: 3,
            trainer: TrainerConfig::default(),
            mapping: MappingConfig::default(),
            map_method: FitMethod::GradientDescent,
            ks: vec![1, 2, 3, 4, 5],
            translate_k: 5,
            export_sample: 75,
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "workers",
    "lowercase",
    "min_count",
    "min_doc_words",
    "phrase_delta",
    "phrase_threshold",
    "phrase_decay",
    "phrase_passes",
    "embedding_size",
    "negative_samples",
    "max_context",
    "subsample_threshold",
    "epochs",
    "lr_start",
    "lr_end",
    "loss",
    "noise_power",
    "map_method",
    "map_lr",
    "map_epochs",
    "map_batch",
    "map_train_size",
    "map_test_size",
    "map_halve_on_increase",
    "map_tolerance",
    "ks",
    "translate_k",
    "export_sample",
];

fn parse<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("expected {what}, got {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got {value:?}"))),
    }
}

impl Config {
    pub fn seed(&self) -> u64 {
        self.trainer.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.trainer.seed = seed;
        self.mapping.seed = seed;
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = "a non-negative integer";
        let real = "a number";
        match key {
            "seed" => self.set_seed(parse(key, value, int)?),
            "workers" => self.trainer.workers = parse(key, value, int)?,
            "lowercase" => self.lowercase = parse_bool(key, value)?,
            "min_count" => self.min_count = parse(key, value, int)?,
            "min_doc_words" => self.min_doc_words = parse(key, value, int)?,
            "phrase_delta" => self.phrase_delta = parse(key, value, real)?,
            "phrase_threshold" => self.phrase_threshold = parse(key, value, real)?,
            "phrase_decay" => self.phrase_decay = parse(key, value, real)?,
            "phrase_passes" => self.phrase_passes = parse(key, value, int)?,
            "embedding_size" => self.trainer.embedding_size = parse(key, value, int)?,
            "negative_samples" => self.trainer.negative_samples = parse(key, value, int)?,
            "max_context" => self.trainer.max_context = parse(key, value, int)?,
            "subsample_threshold" => self.trainer.subsample_threshold = parse(key, value, real)?,
            "epochs" => self.trainer.epochs = parse(key, value, int)?,
            "lr_start" => self.trainer.lr_start = parse(key, value, real)?,
            "lr_end" => self.trainer.lr_end = parse(key, value, real)?,
            "loss" => self.trainer.loss = LossKind::from_str(value)?,
            "noise_power" => self.trainer.noise_power = parse(key, value, real)?,
            "map_method" => self.map_method = FitMethod::from_str(value)?,
            "map_lr" => self.mapping.lr = parse(key, value, real)?,
            "map_epochs" => self.mapping.epochs = parse(key, value, int)?,
            "map_batch" => {
                self.mapping.batch = match value {
                    "full" => None,
                    v => Some(parse(key, v, "\"full\" or a positive integer")?),
                }
            }
            "map_train_size" => self.mapping.train_size = parse(key, value, int)?,
            "map_test_size" => self.mapping.test_size = parse(key, value, int)?,
            "map_halve_on_increase" => self.mapping.halve_on_increase = parse_bool(key, value)?,
            "map_tolerance" => self.mapping.tolerance = parse(key, value, real)?,
            "ks" => {
                self.ks = value
                    .split(',')
                    .map(|k| parse(key, k.trim(), "a comma-separated list of integers"))
                    .collect::<Result<_>>()?
            }
            "translate_k" => self.translate_k = parse(key, value, int)?,
            "export_sample" => self.export_sample = parse(key, value, int)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(i + 1, "expected key = value"));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_owned()) {
                return Err(Error::config(key, format!("set more than once (line {})", i + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn phrase_config(&self) -> Result<PhraseConfig> {
        if self.phrase_passes == 0 {
            return Err(Error::config("phrase_passes", "must be >= 1"));
        }
        if !(self.phrase_threshold > 0.0) {
            return Err(Error::config("phrase_threshold", "must be > 0"));
        }
        PhraseConfig::geometric(self.phrase_delta, self.phrase_threshold, self.phrase_decay, self.phrase_passes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_count == 0 {
            return Err(Error::config("min_count", "must be >= 1"));
        }
        self.phrase_config()?;
        self.trainer.validate()?;
        self.mapping.validate()?;
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::config("ks", "every k must be >= 1"));
        }
        if self.translate_k == 0 {
            return Err(Error::config("translate_k", "must be >= 1"));
        }
        Ok(())
    }

    /// Every key with its effective value, in `KEYS` order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.trainer;
        let m = &self.mapping;
        let ks: Vec<String> = self.ks.iter().map(|k| k.to_string()).collect();
        let values = [
            t.seed.to_string(),
            t.workers.to_string(),
            self.lowercase.to_string(),
            self.min_count.to_string(),
            self.min_doc_words.to_string(),
            self.phrase_delta.to_string(),
            self.phrase_threshold.to_string(),
            self.phrase_decay.to_string(),
            self.phrase_passes.to_string(),
            t.embedding_size.to_string(),
            t.negative_samples.to_string(),
            t.max_context.to_string(),
            t.subsample_threshold.to_string(),
            t.epochs.to_string(),
            t.lr_start.to_string(),
            t.lr_end.to_string(),
            t.loss.to_string(),
            t.noise_power.to_string(),
            self.map_method.as_str().to_owned(),
            m.lr.to_string(),
            m.epochs.to_string(),
            m.batch.map_or_else(|| "full".to_owned(), |b| b.to_string()),
            m.train_size.to_string(),
            m.test_size.to_string(),
            m.halve_on_increase.to_string(),
            m.tolerance.to_string(),
            ks.join(","),
            self.translate_k.to_string(),
            self.export_sample.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Text that parses back to an equal configuration.
    pub fn render(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_size_parses() {
        let cfg = Config::parse("embedding_size = 200\n").unwrap();
        assert_eq!(cfg.trainer.embedding_size, 200);
    }

    #[test]
    fn zero_negative_samples_is_a_range_error() {
        let err = Config::parse("negative_samples = 0").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "negative_samples"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        assert!(matches!(Config::parse("colour = red"), Err(Error::Config { .. })));
        assert!(Config::parse("epochs = 2\nepochs = 3").is_err());
        assert!(matches!(Config::parse("epochs 2"), Err(Error::Parse { line: 1, .. })));
        let err = Config::parse("epochs = two").unwrap_err();
        assert!(err.to_string().contains("epochs"));
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = Config::parse("# header\n\nloss = nce # trailing\nmap_batch = 32\nks = 1, 5\n").unwrap();
        assert_eq!(cfg.trainer.loss, LossKind::Nce);
        assert_eq!(cfg.mapping.batch, Some(32));
        assert_eq!(cfg.ks, [1, 5]);
    }

    #[test]
    fn render_round_trips_and_covers_every_key() {
        let mut cfg = Config::default();
        cfg.set_seed(99);
        cfg.trainer.lr_end = 1e-4;
        let back = Config::parse(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.entries().len(), KEYS.len());
        assert_eq!(back.mapping.seed, 99);
    }
}
