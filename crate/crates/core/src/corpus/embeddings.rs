//! Pretrained word embeddings, frozen after load.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CorpusError, Vocabulary, PAD_ID, UNK_ID};

/// |V| × d embedding matrix. Rows never receive gradient updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    // flat row-major |V| × dim
    table: Vec<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.table.len() / self.dim
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.table[id * self.dim..(id + 1) * self.dim]
    }

    pub fn raw(&self) -> &[f64] {
        &self.table
    }

    /// Random table N(0, 0.1²) with zero pad/unk rows, for corpora without
    /// a pretrained embedding file.
    pub fn random(vocab: &Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut table = vec![0.0; vocab.len() * dim];
        for id in 0..vocab.len() {
            if id == PAD_ID || id == UNK_ID {
                continue;
            }
            for v in &mut table[id * dim..(id + 1) * dim] {
                *v = normal.sample(&mut rng);
            }
        }
        EmbeddingTable { dim, table }
    }

    /// Load embeddings from a whitespace-separated text file
    /// (`token v1 v2 … vd` per line). Vocabulary tokens present in the
    /// file get their file vector verbatim; pad and unknown rows are zero;
    /// remaining vocabulary tokens are drawn from N(0, 0.1²) with the
    /// given seed, in vocabulary id order, so loads are reproducible.
    pub fn load(path: &Path, vocab: &Vocabulary, seed: u64) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = BufReader::new(file);

        let mut dim: Option<usize> = None;
        let mut found: HashMap<usize, Vec<f64>> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().ok_or_else(|| CorpusError::Format {
                line: i + 1,
                message: "empty embedding line".into(),
            })?;
            let values: Vec<f64> = parts
                .map(|p| {
                    p.parse::<f64>().map_err(|e| CorpusError::Format {
                        line: i + 1,
                        message: format!("bad float {p:?}: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(CorpusError::EmbeddingDim {
                        line: i + 1,
                        expected: d,
                        found: values.len(),
                    })
                }
                _ => {}
            }
            if let Some(id) = vocab.id(token) {
                found.insert(id, values);
            }
        }
        let dim = dim.ok_or_else(|| CorpusError::Format {
            line: 0,
            message: "embedding file has no rows".into(),
        })?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut table = vec![0.0; vocab.len() * dim];
        for id in 0..vocab.len() {
            let dst = &mut table[id * dim..(id + 1) * dim];
            if id == PAD_ID || id == UNK_ID {
                continue; // zero by convention
            }
            if let Some(v) = found.get(&id) {
                dst.copy_from_slice(v);
            } else {
                for x in dst {
                    *x = normal.sample(&mut rng);
                }
            }
        }
        Ok(EmbeddingTable { dim, table })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab_of(tokens: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::new();
        for t in tokens {
            v.add(t);
        }
        v
    }

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn in_vocabulary_vectors_pass_through_verbatim() {
        let f = write_file("dog 0.25 -1.5 3.0\ncat 1.0 2.0 3.0\n");
        let vocab = vocab_of(&["dog", "cat"]);
        let table = EmbeddingTable::load(f.path(), &vocab, 42).unwrap();
        assert_eq!(table.dim(), 3);
        assert_eq!(table.row(vocab.id("dog").unwrap()), &[0.25, -1.5, 3.0]);
        assert_eq!(table.row(vocab.id("cat").unwrap()), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn pad_and_unk_rows_are_zero() {
        let f = write_file("dog 1.0 1.0\n");
        let vocab = vocab_of(&["dog"]);
        let table = EmbeddingTable::load(f.path(), &vocab, 42).unwrap();
        assert_eq!(table.row(PAD_ID), &[0.0, 0.0]);
        assert_eq!(table.row(UNK_ID), &[0.0, 0.0]);
    }

    #[test]
    fn out_of_file_vectors_are_deterministic_across_loads() {
        let f = write_file("dog 1.0 1.0\n");
        let vocab = vocab_of(&["dog", "zebra"]);
        let a = EmbeddingTable::load(f.path(), &vocab, 42).unwrap();
        let b = EmbeddingTable::load(f.path(), &vocab, 42).unwrap();
        let id = vocab.id("zebra").unwrap();
        assert_eq!(a.row(id), b.row(id), "same seed must give identical rows");
        assert!(a.row(id).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn inconsistent_dimension_reports_line_number() {
        let f = write_file("dog 1.0 2.0\ncat 1.0 2.0 3.0\n");
        let vocab = vocab_of(&["dog", "cat"]);
        let err = EmbeddingTable::load(f.path(), &vocab, 42).unwrap_err();
        match err {
            CorpusError::EmbeddingDim {
                line,
                expected,
                found,
            } => {
                assert_eq!((line, expected, found), (2, 2, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn random_table_zeroes_reserved_rows_and_is_seed_stable() {
        let vocab = vocab_of(&["a", "b"]);
        let t1 = EmbeddingTable::random(&vocab, 4, 7);
        let t2 = EmbeddingTable::random(&vocab, 4, 7);
        assert_eq!(t1, t2);
        assert_eq!(t1.row(PAD_ID), &[0.0; 4]);
        assert_eq!(t1.row(UNK_ID), &[0.0; 4]);
    }
}
