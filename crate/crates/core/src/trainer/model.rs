use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::WordId;
use crate::error::{Error, Result};
use crate::rng;
use crate::store::EmbeddingMatrix;

/// Input (`v_w`) and output (`u_w`) tables, both `|V| × D`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    vocab_size: usize,
    dim: usize,
    pub(crate) input: Vec<f64>,
    pub(crate) output: Vec<f64>,
    pub trained_tokens: u64,
}

/// Inputs uniform in `(-0.5/D, 0.5/D)`, outputs zero.
pub fn init_model(vocab_size: usize, dim: usize, seed: u64) -> ModelState {
    assert!(dim >= 1, "embedding size must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(rng::derive(seed, rng::tags::INIT));
    let half = 0.5 / dim as f64;
    let input = (0..vocab_size * dim).map(|_| rng.random_range(-half..half)).collect();
    ModelState {
        vocab_size,
        dim,
        input,
        output: vec![0.0; vocab_size * dim],
        trained_tokens: 0,
    }
}

impl ModelState {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        ModelState {
            vocab_size,
            dim,
            input: vec![0.0; vocab_size * dim],
            output: vec![0.0; vocab_size * dim],
            trained_tokens: 0,
        }
    }

    pub fn from_tables(vocab_size: usize, dim: usize, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        if input.len() != vocab_size * dim || output.len() != vocab_size * dim {
            return Err(Error::Mismatch(format!(
                "tables of {} and {} values do not match {vocab_size}x{dim}",
                input.len(),
                output.len()
            )));
        }
        Ok(ModelState {
            vocab_size,
            dim,
            input,
            output,
            trained_tokens: 0,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_row(&self, id: WordId) -> &[f64] {
        let s = id as usize * self.dim;
        &self.input[s..s + self.dim]
    }

    pub fn output_row(&self, id: WordId) -> &[f64] {
        let s = id as usize * self.dim;
        &self.output[s..s + self.dim]
    }

    pub fn input_row_mut(&mut self, id: WordId) -> &mut [f64] {
        let s = id as usize * self.dim;
        &mut self.input[s..s + self.dim]
    }

    pub fn output_row_mut(&mut self, id: WordId) -> &mut [f64] {
        let s = id as usize * self.dim;
        &mut self.output[s..s + self.dim]
    }

    pub fn input_table(&self) -> &[f64] {
        &self.input
    }

    pub fn output_table(&self) -> &[f64] {
        &self.output
    }

    /// Name of the first table holding a NaN or infinity.
    pub fn first_non_finite_table(&self) -> Option<&'static str> {
        if self.input.iter().any(|x| !x.is_finite()) {
            Some("input_vectors")
        } else if self.output.iter().any(|x| !x.is_finite()) {
            Some("output_vectors")
        } else {
            None
        }
    }

    /// The input vectors as word embeddings.
    pub fn embeddings(&self, words: &[String]) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(words.to_vec(), self.dim, self.input.clone())
    }
}

const CHECKPOINT_MAGIC: &str = "xlate-checkpoint 1";

/// Serialized training state plus the identity of what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab_digest: String,
    pub manifest: Option<String>,
    pub config: Vec<(String, String)>,
    pub state: ModelState,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let s = &self.state;
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "vocab_digest\t{}", self.vocab_digest)?;
        writeln!(w, "vocab_size\t{}", s.vocab_size)?;
        writeln!(w, "dim\t{}", s.dim)?;
        writeln!(w, "trained_tokens\t{}", s.trained_tokens)?;
        if let Some(m) = &self.manifest {
            writeln!(w, "manifest\t{m}")?;
        }
        for (k, v) in &self.config {
            writeln!(w, "config.{k}\t{v}")?;
        }
        writeln!(w, "tables")?;
        let mut buf = Vec::with_capacity(8 * (s.input.len() + s.output.len()));
        for x in s.input.iter().chain(&s.output) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        let mut lineno = 0;
        let mut next_line = |r: &mut R, line: &mut String| -> Result<()> {
            line.clear();
            lineno += 1;
            if r.read_line(line)? == 0 {
                return Err(Error::parse(lineno, "unexpected end of checkpoint header"));
            }
            while line.ends_with('\n') || line.ends_with('\r') {
                line.pop();
            }
            Ok(())
        };
        next_line(&mut r, &mut line)?;
        if line != CHECKPOINT_MAGIC {
            return Err(Error::parse(1, "not a checkpoint file"));
        }
        let mut digest = None;
        let mut vocab_size = None;
        let mut dim = None;
        let mut trained = 0u64;
        let mut manifest = None;
        let mut config = Vec::new();
        let mut n = 1;
        loop {
            next_line(&mut r, &mut line)?;
            n += 1;
            if line == "tables" {
                break;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n, "expected key<TAB>value"))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| Error::parse(n, format!("bad number {v:?}")));
            match k {
                "vocab_digest" => digest = Some(v.to_owned()),
                "vocab_size" => vocab_size = Some(num(v)? as usize),
                "dim" => dim = Some(num(v)? as usize),
                "trained_tokens" => trained = num(v)?,
                "manifest" => manifest = Some(v.to_owned()),
                _ => match k.strip_prefix("config.") {
                    Some(key) => config.push((key.to_owned(), v.to_owned())),
                    None => return Err(Error::parse(n, format!("unknown key {k:?}"))),
                },
            }
        }
        let (Some(vocab_digest), Some(vocab_size), Some(dim)) = (digest, vocab_size, dim) else {
            return Err(Error::parse(n, "checkpoint header lacks vocab_digest, vocab_size or dim"));
        };
        let len = vocab_size * dim;
        let mut bytes = vec![0u8; 16 * len];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Mismatch(format!("checkpoint tables shorter than 2x{vocab_size}x{dim}")))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Mismatch("trailing bytes after checkpoint tables".into()));
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let input: Vec<f64> = values.by_ref().take(len).collect();
        let output: Vec<f64> = values.collect();
        let mut state = ModelState::from_tables(vocab_size, dim, input, output)?;
        state.trained_tokens = trained;
        Ok(Checkpoint {
            vocab_digest,
            manifest,
            config,
            state,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_range_and_zero_outputs() {
        let s = init_model(50, 100, 3);
        assert!(s.input.iter().all(|x| x.abs() < 0.005));
        assert!(s.input.iter().any(|x| *x != 0.0));
        assert_eq!(s.output.iter().map(|x| x * x).sum::<f64>(), 0.0);
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(init_model(20, 8, 42), init_model(20, 8, 42));
        assert_ne!(init_model(20, 8, 42), init_model(20, 8, 43));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut s = init_model(4, 3, 1);
        s.output_row_mut(2)[1] = -0.25;
        s.trained_tokens = 99;
        let ck = Checkpoint {
            vocab_digest: "abc".into(),
            manifest: Some("manifest.tsv".into()),
            config: vec![("embedding_size".into(), "3".into())],
            state: s,
        };
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = Checkpoint::read(buf.as_slice()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn truncated_checkpoint_fails() {
        let ck = Checkpoint {
            vocab_digest: "d".into(),
            manifest: None,
            config: vec![],
            state: init_model(3, 2, 1),
        };
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Checkpoint::read(buf.as_slice()).is_err());
    }
}
