//! Run manifests: `key<TAB>value` lines closed by a content digest.

use std::fs;
use std::path::Path;

use crate::config::Config;
use crate::digest::{file_sha256, sha256_hex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunManifest {
    pub entries: Vec<(String, String)>,
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = RunManifest::default();
        m.push("subcommand", subcommand);
        m.push("tool_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: &str, value: impl AsRef<str>) {
        self.entries.push((clean(key), clean(value.as_ref())));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn config(&mut self, cfg: &Config) {
        for (k, v) in cfg.entries() {
            self.push(&format!("config.{k}"), v);
        }
    }

    fn file(&mut self, kind: &str, label: &str, path: &Path) -> Result<()> {
        let digest = file_sha256(path)?;
        self.push(&format!("{kind}.{label}"), path.display().to_string());
        self.push(&format!("{kind}.{label}.sha256"), digest);
        Ok(())
    }

    pub fn input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.file("input", label, path)
    }

    pub fn output(&mut self, label: &str, path: &Path) -> Result<()> {
        self.file("output", label, path)
    }

    /// Entries followed by `digest<TAB>sha256` of everything above it.
    pub fn render(&self) -> String {
        let mut body: String = self.entries.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect();
        let digest = sha256_hex(body.as_bytes());
        body.push_str(&format!("digest\t{digest}\n"));
        body
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    /// Parse and verify the trailing digest.
    pub fn parse(text: &str) -> Result<Self> {
        let pos = text.trim_end_matches('\n').rfind('\n').map_or(0, |p| p + 1);
        let (body, last) = text.split_at(pos);
        let digest = last
            .trim_end()
            .strip_prefix("digest\t")
            .ok_or_else(|| Error::parse(text.lines().count(), "missing trailing digest line"))?;
        if digest != sha256_hex(body.as_bytes()) {
            return Err(Error::Mismatch("manifest digest does not match its contents".into()));
        }
        let mut m = RunManifest::default();
        for (i, line) in body.lines().enumerate() {
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected key<TAB>value"))?;
            m.entries.push((k.to_owned(), v.to_owned()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
