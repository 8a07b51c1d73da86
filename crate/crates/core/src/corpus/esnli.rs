//! Converter from the e-SNLI CSV layout to internal instances.
//!
//! Highlight columns carry the sentence text with `*word*` markers around
//! annotator-highlighted words. Markers are aligned positionally against
//! the tokenization of the unmarked sentence; rows whose marked text
//! tokenizes differently are skipped with a warning.

use std::collections::BTreeSet;
use std::path::Path;

use super::{tokenize, union_annotations, CorpusError, Label, SentencePairInstance};

/// Result of converting an e-SNLI CSV file.
#[derive(Debug)]
pub struct EsnliLoad {
    pub instances: Vec<SentencePairInstance>,
    /// Rows dropped because the gold label was "-".
    pub dropped_unlabeled: usize,
    /// Rows skipped because of malformed fields or marked-text divergence.
    pub skipped: usize,
    /// First few skip reasons, for diagnostics.
    pub warnings: Vec<String>,
}

const MAX_WARNINGS: usize = 20;

/// Extract highlighted token positions from a `*word*`-marked sentence.
///
/// Returns None when the marker count is unbalanced or when the marked
/// text tokenizes differently from `plain_tokens`.
pub fn parse_marked_sentence(marked: &str, plain_tokens: &[String]) -> Option<BTreeSet<usize>> {
    let segments: Vec<&str> = marked.split('*').collect();
    if segments.len() % 2 == 0 {
        return None; // unbalanced markers
    }
    let mut tokens: Vec<String> = Vec::new();
    let mut highlights = BTreeSet::new();
    for (i, segment) in segments.iter().enumerate() {
        let inside = i % 2 == 1;
        for tok in tokenize(segment) {
            if inside {
                highlights.insert(tokens.len());
            }
            tokens.push(tok);
        }
    }
    if tokens != plain_tokens {
        return None;
    }
    Some(highlights)
}

/// Load an e-SNLI CSV file (header row with gold label, both sentences,
/// and one or more per-annotator marked-sentence columns per side).
pub fn load_esnli(path: &Path) -> Result<EsnliLoad, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CorpusError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => CorpusError::Format {
                line: 0,
                message: e.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Format {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| -> Option<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let col_label = find("gold_label").ok_or_else(|| CorpusError::Format {
        line: 1,
        message: "missing gold_label column".into(),
    })?;
    let col_s1 = find("Sentence1").ok_or_else(|| CorpusError::Format {
        line: 1,
        message: "missing Sentence1 column".into(),
    })?;
    let col_s2 = find("Sentence2").ok_or_else(|| CorpusError::Format {
        line: 1,
        message: "missing Sentence2 column".into(),
    })?;
    let marked_cols = |prefix: &str| -> Vec<usize> {
        headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim().to_lowercase().starts_with(&prefix.to_lowercase()))
            .map(|(i, _)| i)
            .collect()
    };
    let cols_m1 = marked_cols("Sentence1_marked");
    let cols_m2 = marked_cols("Sentence2_marked");

    let mut load = EsnliLoad {
        instances: Vec::new(),
        dropped_unlabeled: 0,
        skipped: 0,
        warnings: Vec::new(),
    };
    let mut warn = |load: &mut EsnliLoad, line: usize, msg: String| {
        load.skipped += 1;
        if load.warnings.len() < MAX_WARNINGS {
            load.warnings.push(format!("line {line}: {msg}"));
        }
    };

    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // 1-based, after header
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                warn(&mut load, line, format!("unreadable row: {e}"));
                continue;
            }
        };
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        let label = match Label::parse(field(col_label)) {
            Ok(Some(l)) => l,
            Ok(None) => {
                load.dropped_unlabeled += 1;
                continue;
            }
            Err(e) => {
                warn(&mut load, line, e.to_string());
                continue;
            }
        };
        let premise_tokens = tokenize(field(col_s1));
        let hypothesis_tokens = tokenize(field(col_s2));
        if premise_tokens.is_empty() || hypothesis_tokens.is_empty() {
            warn(&mut load, line, "empty premise or hypothesis".into());
            continue;
        }

        let collect_side = |cols: &[usize], plain: &[String]| -> Result<Vec<BTreeSet<usize>>, String> {
            let mut sets = Vec::new();
            for &c in cols {
                let marked = field(c);
                if marked.is_empty() {
                    continue;
                }
                match parse_marked_sentence(marked, plain) {
                    Some(set) => sets.push(set),
                    None => {
                        return Err(format!(
                            "marked text diverges from sentence tokenization in column {}",
                            headers.get(c).unwrap_or("?")
                        ))
                    }
                }
            }
            Ok(sets)
        };

        let premise_sets = match collect_side(&cols_m1, &premise_tokens) {
            Ok(s) => s,
            Err(msg) => {
                warn(&mut load, line, msg);
                continue;
            }
        };
        let hypothesis_sets = match collect_side(&cols_m2, &hypothesis_tokens) {
            Ok(s) => s,
            Err(msg) => {
                warn(&mut load, line, msg);
                continue;
            }
        };

        let inst = SentencePairInstance {
            label,
            premise_tokens,
            hypothesis_tokens,
            premise_highlights: union_annotations(&premise_sets),
            hypothesis_highlights: union_annotations(&hypothesis_sets),
        };
        debug_assert!(inst.validate().is_ok());
        load.instances.push(inst);
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn marked_word_maps_to_token_position() {
        let plain = toks("Children smiling and waving at a camera");
        let set =
            parse_marked_sentence("Children *smiling* and waving at a camera", &plain).unwrap();
        assert_eq!(set, [1].into());
    }

    #[test]
    fn unmarked_sentence_yields_empty_set() {
        let plain = toks("a dog runs");
        let set = parse_marked_sentence("a dog runs", &plain).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn multi_word_span_marks_every_token() {
        let plain = toks("the kids are frowning");
        let set = parse_marked_sentence("the kids *are frowning*", &plain).unwrap();
        assert_eq!(set, [2, 3].into());
    }

    #[test]
    fn divergent_marked_text_is_rejected() {
        let plain = toks("a dog runs");
        assert!(parse_marked_sentence("a cat *runs*", &plain).is_none());
        assert!(parse_marked_sentence("a dog *runs", &plain).is_none()); // unbalanced
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    const HEADER: &str = "gold_label,Sentence1,Sentence2,Sentence1_marked_1,Sentence2_marked_1,Sentence1_marked_2,Sentence2_marked_2,Sentence1_marked_3,Sentence2_marked_3\n";

    #[test]
    fn loads_highlights_and_takes_annotator_union() {
        let csv = format!(
            "{HEADER}contradiction,Children smiling and waving,The kids are frowning,Children *smiling* and waving,The kids are *frowning*,Children *smiling and* waving,The kids are *frowning*,,\n"
        );
        let f = write_csv(&csv);
        let load = load_esnli(f.path()).unwrap();
        assert_eq!(load.instances.len(), 1);
        let inst = &load.instances[0];
        assert_eq!(inst.label, Label::Contradicts);
        // union of {1} and {1,2}
        assert_eq!(inst.premise_highlights, [1, 2].into());
        assert_eq!(inst.hypothesis_highlights, [3].into());
    }

    #[test]
    fn row_without_asterisks_has_empty_highlights() {
        let csv = format!("{HEADER}entailment,A dog runs,A dog moves,A dog runs,A dog moves,,,,\n");
        let f = write_csv(&csv);
        let load = load_esnli(f.path()).unwrap();
        assert_eq!(load.instances.len(), 1);
        assert!(load.instances[0].premise_highlights.is_empty());
        assert!(load.instances[0].hypothesis_highlights.is_empty());
    }

    #[test]
    fn unlabeled_rows_are_dropped_and_counted() {
        let csv = format!(
            "{HEADER}-,A dog runs,A dog moves,,,,,,\nneutral,A dog runs,A dog might run,,,,,,\n"
        );
        let f = write_csv(&csv);
        let load = load_esnli(f.path()).unwrap();
        assert_eq!(load.instances.len(), 1);
        assert_eq!(load.dropped_unlabeled, 1);
    }

    #[test]
    fn divergent_rows_are_skipped_with_warning() {
        let csv = format!(
            "{HEADER}entailment,A dog runs,A dog moves,A *cat* runs,A dog moves,,,,\n"
        );
        let f = write_csv(&csv);
        let load = load_esnli(f.path()).unwrap();
        assert!(load.instances.is_empty());
        assert_eq!(load.skipped, 1);
        assert_eq!(load.warnings.len(), 1);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_esnli(Path::new("/nonexistent/esnli.csv")).unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }
}
