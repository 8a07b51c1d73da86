//! Corpus ingestion: tokenization, vocabulary construction, the internal
//! line-delimited instance format, the e-SNLI CSV converter, and
//! pretrained word embedding loading.

mod embeddings;
mod esnli;

pub use embeddings::EmbeddingTable;
pub use esnli::{load_esnli, parse_marked_sentence, EsnliLoad};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("embedding dimension changed from {expected} to {found} at line {line}")]
    EmbeddingDim {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("instance invalid: {0}")]
    InvalidInstance(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

/// The three-way entailment relation between a premise and a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entails,
    Contradicts,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entails, Label::Contradicts, Label::Neutral];

    pub fn index(self) -> usize {
        match self {
            Label::Entails => 0,
            Label::Contradicts => 1,
            Label::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Label {
        Self::ALL[i]
    }

    /// Accepts both our short names and the e-SNLI gold label spellings.
    /// Returns None for the unlabeled marker "-".
    pub fn parse(s: &str) -> Result<Option<Label>, CorpusError> {
        match s.trim().to_lowercase().as_str() {
            "entails" | "entailment" => Ok(Some(Label::Entails)),
            "contradicts" | "contradiction" => Ok(Some(Label::Contradicts)),
            "neutral" => Ok(Some(Label::Neutral)),
            "-" | "" => Ok(None),
            other => Err(CorpusError::UnknownLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Entails => "entails",
            Label::Contradicts => "contradicts",
            Label::Neutral => "neutral",
        };
        f.write_str(s)
    }
}

/// One sentence pair with its gold label and optional gold token
/// highlights (indices into the token lists).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePairInstance {
    pub label: Label,
    pub premise_tokens: Vec<String>,
    pub hypothesis_tokens: Vec<String>,
    #[serde(default)]
    pub premise_highlights: BTreeSet<usize>,
    #[serde(default)]
    pub hypothesis_highlights: BTreeSet<usize>,
}

impl SentencePairInstance {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.premise_tokens.is_empty() || self.hypothesis_tokens.is_empty() {
            return Err(CorpusError::InvalidInstance(
                "empty premise or hypothesis".into(),
            ));
        }
        if let Some(&i) = self
            .premise_highlights
            .iter()
            .find(|&&i| i >= self.premise_tokens.len())
        {
            return Err(CorpusError::InvalidInstance(format!(
                "premise highlight {i} out of bounds for {} tokens",
                self.premise_tokens.len()
            )));
        }
        if let Some(&i) = self
            .hypothesis_highlights
            .iter()
            .find(|&&i| i >= self.hypothesis_tokens.len())
        {
            return Err(CorpusError::InvalidInstance(format!(
                "hypothesis highlight {i} out of bounds for {} tokens",
                self.hypothesis_tokens.len()
            )));
        }
        Ok(())
    }
}

/// Lowercased whitespace-and-punctuation tokenizer. Alphanumeric runs
/// become tokens; every other non-whitespace character becomes a
/// single-character token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Exact union of per-annotator highlight sets.
pub fn union_annotations(sets: &[BTreeSet<usize>]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for s in sets {
        out.extend(s.iter().copied());
    }
    out
}

/// Token-to-id mapping with reserved padding (0) and unknown (1) slots.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.add(PAD_TOKEN);
        v.add(UNK_TOKEN);
        v
    }

    pub fn add(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in insertion order (ids ascend with position).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_or_unk(t)).collect()
    }

    /// Stable FNV-1a hash of the ordered token list; used to detect
    /// checkpoint/vocabulary mismatches.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        for token in &self.tokens {
            for b in token.as_bytes() {
                hash ^= u64::from(*b);
                hash = hash.wrapping_mul(0x100000001b3);
            }
            hash ^= 0xff;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }
}

/// Vocabulary over every token in the corpus, ids assigned in first-seen
/// order (premise before hypothesis, instance order preserved).
pub fn build_vocab(instances: &[SentencePairInstance]) -> Vocabulary {
    let mut vocab = Vocabulary::new();
    for inst in instances {
        for tok in inst.premise_tokens.iter().chain(&inst.hypothesis_tokens) {
            vocab.add(tok);
        }
    }
    vocab
}

/// Write instances in the internal line-delimited format (one JSON record
/// per line: label, token lists, highlight index sets).
pub fn write_instances(path: &Path, instances: &[SentencePairInstance]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for inst in instances {
        let line = serde_json::to_string(inst).expect("instance serialization cannot fail");
        writeln!(w, "{line}").map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Read instances from the internal line-delimited format, validating
/// highlight bounds on every record.
pub fn read_instances(path: &Path) -> Result<Vec<SentencePairInstance>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: SentencePairInstance =
            serde_json::from_str(&line).map_err(|e| CorpusError::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
        inst.validate().map_err(|e| CorpusError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_lowercases_and_splits_whitespace() {
        assert_eq!(
            tokenize("The kids are frowning"),
            toks(&["the", "kids", "are", "frowning"])
        );
    }

    #[test]
    fn tokenize_empty_string_is_empty() {
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn tokenize_splits_punctuation_into_tokens() {
        assert_eq!(
            tokenize("A man, smiling."),
            toks(&["a", "man", ",", "smiling", "."])
        );
    }

    #[test]
    fn union_annotations_examples() {
        let a: BTreeSet<usize> = [1].into();
        let b: BTreeSet<usize> = [2].into();
        assert_eq!(union_annotations(&[a, b]), [1, 2].into());
        assert_eq!(
            union_annotations(&[BTreeSet::new(), BTreeSet::new()]),
            BTreeSet::new()
        );
        let sets: Vec<BTreeSet<usize>> = vec![[0, 3].into(), [3].into(), [0].into()];
        assert_eq!(union_annotations(&sets), [0, 3].into());
    }

    #[test]
    fn vocab_counts_reserved_slots() {
        let inst = SentencePairInstance {
            label: Label::Entails,
            premise_tokens: toks(&["a", "b", "c"]),
            hypothesis_tokens: toks(&["d", "e", "f"]),
            premise_highlights: BTreeSet::new(),
            hypothesis_highlights: BTreeSet::new(),
        };
        let vocab = build_vocab(&[inst]);
        assert_eq!(vocab.len(), 8);
        assert_eq!(vocab.id(PAD_TOKEN), Some(PAD_ID));
        assert_eq!(vocab.id(UNK_TOKEN), Some(UNK_ID));
    }

    #[test]
    fn vocab_dedups_across_sides_and_is_deterministic() {
        let inst = SentencePairInstance {
            label: Label::Neutral,
            premise_tokens: toks(&["dog", "runs"]),
            hypothesis_tokens: toks(&["dog", "sits"]),
            premise_highlights: BTreeSet::new(),
            hypothesis_highlights: BTreeSet::new(),
        };
        let v1 = build_vocab(&[inst.clone()]);
        let v2 = build_vocab(&[inst]);
        assert_eq!(v1.tokens(), v2.tokens());
        assert_eq!(v1.id("dog"), Some(2));
        assert_eq!(v1.len(), 5); // pad, unk, dog, runs, sits
    }

    #[test]
    fn label_parsing_accepts_esnli_spellings() {
        assert_eq!(Label::parse("entailment").unwrap(), Some(Label::Entails));
        assert_eq!(
            Label::parse("contradiction").unwrap(),
            Some(Label::Contradicts)
        );
        assert_eq!(Label::parse("neutral").unwrap(), Some(Label::Neutral));
        assert_eq!(Label::parse("-").unwrap(), None);
        assert!(Label::parse("maybe").is_err());
    }

    #[test]
    fn instance_round_trip_through_internal_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("instances.jsonl");
        let instances = vec![
            SentencePairInstance {
                label: Label::Contradicts,
                premise_tokens: toks(&["children", "smiling", "and", "waving"]),
                hypothesis_tokens: toks(&["the", "kids", "are", "frowning"]),
                premise_highlights: [1].into(),
                hypothesis_highlights: [3].into(),
            },
            SentencePairInstance {
                label: Label::Neutral,
                premise_tokens: toks(&["a", "dog"]),
                hypothesis_tokens: toks(&["a", "pet"]),
                premise_highlights: BTreeSet::new(),
                hypothesis_highlights: [1].into(),
            },
        ];
        write_instances(&path, &instances).unwrap();
        let back = read_instances(&path).unwrap();
        assert_eq!(back, instances);
    }

    #[test]
    fn reader_rejects_out_of_bounds_highlights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"label\":\"entails\",\"premise_tokens\":[\"a\"],\"hypothesis_tokens\":[\"b\"],\"premise_highlights\":[4],\"hypothesis_highlights\":[]}\n",
        )
        .unwrap();
        assert!(matches!(
            read_instances(&path),
            Err(CorpusError::Format { line: 1, .. })
        ));
    }
}
