//! Vocabulary construction by tf-idf ranking.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A fixed word list with index lookup and per-word document frequency.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    doc_freq: Vec<u32>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>, doc_freq: Vec<u32>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary word '{w}'")));
            }
        }
        Ok(Vocabulary {
            words,
            index,
            doc_freq,
        })
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn word(&self, idx: u32) -> &str {
        &self.words[idx as usize]
    }

    pub fn lookup(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn doc_freq(&self, idx: u32) -> u32 {
        self.doc_freq.get(idx as usize).copied().unwrap_or(0)
    }

    /// One word per line; document frequency appended when known.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        for (i, w) in self.words.iter().enumerate() {
            let df = self.doc_freq.get(i).copied().unwrap_or(0);
            writeln!(out, "{w} {df}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a vocabulary file: one word per line, optional trailing
    /// document frequency (the CiteULike release ships bare words).
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        let mut doc_freq = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap().to_string();
            let df = match fields.next() {
                Some(f) => f.parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno + 1,
                    msg: format!("'{f}' is not a document frequency"),
                })?,
                None => 0,
            };
            words.push(word);
            doc_freq.push(df);
        }
        Vocabulary::from_words(words, doc_freq)
    }
}

/// Ranks non-stopword words by their best per-document tf-idf score
/// (tf = raw count in the document, idf = ln(num_docs / doc_freq)) and
/// keeps the `top_k` best, ties broken lexicographically.
pub fn build_vocab(
    docs: &[Vec<String>],
    top_k: usize,
    stopwords: &HashSet<String>,
) -> Result<Vocabulary> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("build_vocab: top_k must be >= 1".into()));
    }
    let num_docs = docs.len().max(1) as f64;
    let mut doc_freq: HashMap<&str, u32> = HashMap::new();
    let mut best_tf: HashMap<&str, u32> = HashMap::new();
    let mut per_doc: HashMap<&str, u32> = HashMap::new();
    for doc in docs {
        per_doc.clear();
        for tok in doc {
            if stopwords.contains(tok.as_str()) {
                continue;
            }
            *per_doc.entry(tok.as_str()).or_insert(0) += 1;
        }
        for (&w, &tf) in &per_doc {
            *doc_freq.entry(w).or_insert(0) += 1;
            let best = best_tf.entry(w).or_insert(0);
            if tf > *best {
                *best = tf;
            }
        }
    }
    if doc_freq.is_empty() {
        log::warn!("build_vocab: no non-stopword tokens; vocabulary is empty");
        return Vocabulary::from_words(Vec::new(), Vec::new());
    }

    let mut scored: Vec<(&str, f64)> = doc_freq
        .keys()
        .map(|&w| {
            let idf = (num_docs / doc_freq[w] as f64).ln();
            (w, best_tf[w] as f64 * idf)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));

    if scored.len() < top_k {
        log::warn!(
            "build_vocab: only {} distinct words for requested top_k {}",
            scored.len(),
            top_k
        );
    }
    scored.truncate(top_k);
    let words: Vec<String> = scored.iter().map(|(w, _)| w.to_string()).collect();
    let freqs: Vec<u32> = scored.iter().map(|(w, _)| doc_freq[*w]).collect();
    Vocabulary::from_words(words, freqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|d| d.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn unique_words_outrank_ubiquitous_one() {
        // A word in every document has idf = ln(3/3) = 0 and loses to the
        // per-document unique words.
        let d = docs(&[
            &["shared", "alpha"],
            &["shared", "beta"],
            &["shared", "gamma"],
        ]);
        let v = build_vocab(&d, 3, &HashSet::new()).unwrap();
        let mut got: Vec<&str> = (0..3).map(|i| v.word(i)).collect();
        got.sort();
        assert_eq!(got, vec!["alpha", "beta", "gamma"]);
        assert!(v.lookup("shared").is_none());
    }

    #[test]
    fn all_stopwords_yield_empty_vocab() {
        let d = docs(&[&["the", "of"], &["the"]]);
        let stop: HashSet<String> = ["the", "of"].iter().map(|s| s.to_string()).collect();
        let v = build_vocab(&d, 10, &stop).unwrap();
        assert_eq!(v.size(), 0);
    }

    #[test]
    fn top_k_larger_than_distinct_keeps_all() {
        let d = docs(&[&["x", "y"], &["y", "z"]]);
        let v = build_vocab(&d, 99, &HashSet::new()).unwrap();
        assert_eq!(v.size(), 3);
    }

    #[test]
    fn ties_break_lexicographically() {
        let d = docs(&[&["b", "a"], &["c", "d"]]);
        let v = build_vocab(&d, 2, &HashSet::new()).unwrap();
        assert_eq!(v.word(0), "a");
        assert_eq!(v.word(1), "b");
    }

    #[test]
    fn write_read_round_trip() {
        let d = docs(&[&["alpha", "beta"], &["beta"]]);
        let v = build_vocab(&d, 2, &HashSet::new()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        v.write(f.path()).unwrap();
        let w = Vocabulary::read(f.path()).unwrap();
        assert_eq!(w.size(), v.size());
        for i in 0..v.size() as u32 {
            assert_eq!(v.word(i), w.word(i));
            assert_eq!(v.doc_freq(i), w.doc_freq(i));
        }
    }
}
