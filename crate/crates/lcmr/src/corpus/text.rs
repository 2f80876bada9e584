//! Per-item word lists over a fixed vocabulary.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::corpus::vocab::Vocabulary;

/// Per-item distinct word-index lists. Items with no in-vocabulary words
/// are kept (their list is empty) and flagged.
#[derive(Debug, Clone, Default)]
pub struct ItemCorpus {
    vocab_size: usize,
    words: Vec<Vec<u32>>,
    /// Total token count per item before collapsing to distinct words.
    token_counts: Vec<u64>,
}

impl ItemCorpus {
    pub fn from_lists(mut words: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self> {
        for (i, list) in words.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&max) = list.last() {
                if max as usize >= vocab_size {
                    return Err(Error::Format(format!(
                        "item {i} references word index {max} >= vocabulary size {vocab_size}"
                    )));
                }
            }
        }
        let token_counts = words.iter().map(|w| w.len() as u64).collect();
        Ok(ItemCorpus {
            vocab_size,
            words,
            token_counts,
        })
    }

    pub fn num_items(&self) -> usize {
        self.words.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn words_of(&self, item: u32) -> &[u32] {
        &self.words[item as usize]
    }

    pub fn is_empty_item(&self, item: u32) -> bool {
        self.words[item as usize].is_empty()
    }

    pub fn empty_items(&self) -> impl Iterator<Item = u32> + '_ {
        self.words
            .iter()
            .enumerate()
            .filter(|(_, w)| w.is_empty())
            .map(|(i, _)| i as u32)
    }

    /// Total tokens across items (counts before distinct-collapse).
    pub fn total_tokens(&self) -> u64 {
        self.token_counts.iter().sum()
    }

    pub fn avg_tokens_per_item(&self) -> f64 {
        if self.words.is_empty() {
            0.0
        } else {
            self.total_tokens() as f64 / self.words.len() as f64
        }
    }

    /// Writes bag-of-words lines: "count idx:cnt idx:cnt ...".
    pub fn write_bow(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        for list in &self.words {
            write!(out, "{}", list.len()).map_err(|e| Error::io(path, e))?;
            for &w in list {
                write!(out, " {w}:1").map_err(|e| Error::io(path, e))?;
            }
            writeln!(out).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Input layout of an item-text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    /// One "count idx:cnt idx:cnt ..." line per item.
    BowCounts,
    /// Whitespace-separated tokens per item line; requires a vocabulary.
    RawTokens,
}

impl std::str::FromStr for TextFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow-counts" => Ok(TextFormat::BowCounts),
            "raw-tokens" => Ok(TextFormat::RawTokens),
            other => Err(Error::InvalidArgument(format!(
                "unknown text format '{other}' (expected bow-counts | raw-tokens)"
            ))),
        }
    }
}

/// Reads item text into distinct word-index lists. Word counts are
/// collapsed; out-of-vocabulary tokens are dropped.
pub fn parse_item_text(
    path: &Path,
    format: TextFormat,
    vocab: Option<&Vocabulary>,
) -> Result<ItemCorpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        TextFormat::BowCounts => parse_bow(path, reader, vocab),
        TextFormat::RawTokens => {
            let vocab = vocab.ok_or_else(|| {
                Error::InvalidArgument("raw-tokens format requires a vocabulary".into())
            })?;
            parse_raw(path, reader, vocab)
        }
    }
}

fn parse_bow(
    path: &Path,
    reader: impl BufRead,
    vocab: Option<&Vocabulary>,
) -> Result<ItemCorpus> {
    let mut words: Vec<Vec<u32>> = Vec::new();
    let mut token_counts: Vec<u64> = Vec::new();
    let mut max_idx = 0u32;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let count: usize = fields.next().unwrap().parse().map_err(|_| Error::Parse {
            path: path.into(),
            line: lineno + 1,
            msg: "leading entry count is not an integer".into(),
        })?;
        let mut list = Vec::with_capacity(count);
        let mut tokens = 0u64;
        for f in fields {
            let (idx_s, cnt_s) = f.split_once(':').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                msg: format!("expected 'index:count', got '{f}'"),
            })?;
            let idx: u32 = idx_s.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                msg: format!("'{idx_s}' is not a word index"),
            })?;
            let cnt: u64 = cnt_s.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: lineno + 1,
                msg: format!("'{cnt_s}' is not a count"),
            })?;
            if let Some(v) = vocab {
                if idx as usize >= v.size() {
                    return Err(Error::Format(format!(
                        "{}:{}: word index {idx} >= vocabulary size {}",
                        path.display(),
                        lineno + 1,
                        v.size()
                    )));
                }
            }
            max_idx = max_idx.max(idx);
            tokens += cnt;
            list.push(idx);
        }
        if list.len() != count {
            return Err(Error::Format(format!(
                "{}:{}: declared {count} entries but found {}",
                path.display(),
                lineno + 1,
                list.len()
            )));
        }
        if list.is_empty() {
            log::warn!("{}:{}: item with no words", path.display(), lineno + 1);
        }
        list.sort_unstable();
        list.dedup();
        words.push(list);
        token_counts.push(tokens);
    }
    let vocab_size = match vocab {
        Some(v) => v.size(),
        None => max_idx as usize + 1,
    };
    let mut corpus = ItemCorpus::from_lists(words, vocab_size)?;
    corpus.token_counts = token_counts;
    Ok(corpus)
}

fn parse_raw(path: &Path, reader: impl BufRead, vocab: &Vocabulary) -> Result<ItemCorpus> {
    let mut words: Vec<Vec<u32>> = Vec::new();
    let mut token_counts: Vec<u64> = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut list = Vec::new();
        let mut tokens = 0u64;
        for tok in line.split_whitespace() {
            tokens += 1;
            if let Some(idx) = vocab.lookup(&tok.to_lowercase()) {
                list.push(idx);
            }
        }
        list.sort_unstable();
        list.dedup();
        words.push(list);
        token_counts.push(tokens);
    }
    let mut corpus = ItemCorpus::from_lists(words, vocab.size())?;
    corpus.token_counts = token_counts;
    Ok(corpus)
}

/// Splits raw item lines into lowercase token streams for vocabulary
/// building (letters and digits, everything else is a separator).
pub fn tokenize_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let toks: Vec<String> = line
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect();
        docs.push(toks);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn bow_counts_collapse_to_distinct() {
        let f = write_tmp("2 5:1 9:3\n");
        let c = parse_item_text(f.path(), TextFormat::BowCounts, None).unwrap();
        assert_eq!(c.words_of(0), &[5, 9]);
        assert_eq!(c.total_tokens(), 4);
    }

    #[test]
    fn bow_zero_word_item_is_flagged() {
        let f = write_tmp("1 2:1\n0\n");
        let c = parse_item_text(f.path(), TextFormat::BowCounts, None).unwrap();
        assert_eq!(c.num_items(), 2);
        assert!(c.is_empty_item(1));
        assert_eq!(c.empty_items().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn bow_index_beyond_vocab_is_error() {
        let v = Vocabulary::from_words(vec!["a".into(), "b".into()], vec![1, 1]).unwrap();
        let f = write_tmp("1 2:1\n");
        assert!(parse_item_text(f.path(), TextFormat::BowCounts, Some(&v)).is_err());
    }

    #[test]
    fn bow_count_mismatch_is_error() {
        let f = write_tmp("3 1:1 2:1\n");
        assert!(parse_item_text(f.path(), TextFormat::BowCounts, None).is_err());
    }

    #[test]
    fn raw_tokens_require_vocab_and_drop_oov() {
        let f = write_tmp("Alpha beta UNKNOWN beta\n\n");
        assert!(parse_item_text(f.path(), TextFormat::RawTokens, None).is_err());
        let v = Vocabulary::from_words(vec!["alpha".into(), "beta".into()], vec![1, 1]).unwrap();
        let c = parse_item_text(f.path(), TextFormat::RawTokens, Some(&v)).unwrap();
        assert_eq!(c.words_of(0), &[0, 1]);
        assert!(c.is_empty_item(1));
        assert_eq!(c.num_items(), 2);
    }

    #[test]
    fn bow_write_read_round_trip() {
        let f = write_tmp("2 5:2 9:1\n0\n1 3:4\n");
        let c = parse_item_text(f.path(), TextFormat::BowCounts, None).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        c.write_bow(out.path()).unwrap();
        let d = parse_item_text(out.path(), TextFormat::BowCounts, None).unwrap();
        for i in 0..c.num_items() as u32 {
            assert_eq!(c.words_of(i), d.words_of(i));
        }
    }
}
