use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use super::{CorpusError, OOV};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabularyEntry {
    pub word: String,
    pub count: u64,
}

/// Frequency-ordered word list; a word's id is its position.
///
/// Entries are sorted by descending count, ties by ascending word bytes.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    entries: Vec<VocabularyEntry>,
    index: HashMap<String, u32>,
    /// Token count of the whole corpus before any filtering. Used for
    /// target-word frequencies.
    total_tokens: u64,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.total_tokens == other.total_tokens
    }
}

impl Vocabulary {
    pub fn build<'a, I>(tokens: I, min_count: u64, max_size: usize) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if min_count == 0 {
            return Err(CorpusError::InvalidParameter("min_count must be >= 1".into()));
        }
        if max_size == 0 {
            return Err(CorpusError::InvalidParameter("max_size must be >= 1".into()));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut total = 0u64;
        for t in tokens {
            *counts.entry(t).or_default() += 1;
            total += 1;
        }
        let mut entries: Vec<VocabularyEntry> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(w, c)| VocabularyEntry {
                word: w.to_string(),
                count: c,
            })
            .collect();
        entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.as_bytes().cmp(b.word.as_bytes())));
        entries.truncate(max_size);
        if entries.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        Ok(Self::from_entries(entries, total))
    }

    /// `total_tokens` below the entry count sum is raised to that sum.
    pub fn from_entries(entries: Vec<VocabularyEntry>, total_tokens: u64) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i as u32))
            .collect();
        let sum: u64 = entries.iter().map(|e| e.count).sum();
        Vocabulary {
            entries,
            index,
            total_tokens: total_tokens.max(sum),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabularyEntry] {
        &self.entries
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        if id == OOV {
            return None;
        }
        self.entries.get(id as usize).map(|e| e.word.as_str())
    }

    pub fn count(&self, id: u32) -> u64 {
        self.entries.get(id as usize).map_or(0, |e| e.count)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn set_total_tokens(&mut self, total: u64) {
        let sum: u64 = self.entries.iter().map(|e| e.count).sum();
        self.total_tokens = total.max(sum);
    }

    /// `count / total_tokens`.
    pub fn frequency(&self, id: u32) -> f64 {
        self.count(id) as f64 / self.total_tokens as f64
    }

    /// One `word<TAB>count` line per entry, in id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(w, "{}\t{}", e.word, e.count)?;
        }
        w.flush()
    }

    /// Reads the TSV form. The corpus total is unknown from the file alone, so
    /// it defaults to the sum of counts.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: &str| CorpusError::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let (word, count) = line.split_once('\t').ok_or_else(|| parse_err("expected word<TAB>count"))?;
            let count: u64 = count.trim().parse().map_err(|_| parse_err("count is not an integer"))?;
            if word.is_empty() || count == 0 {
                return Err(parse_err("empty word or zero count"));
            }
            entries.push(VocabularyEntry {
                word: word.to_string(),
                count,
            });
        }
        if entries.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        let vocab = Self::from_entries(entries, 0);
        if vocab.index.len() != vocab.entries.len() {
            return Err(CorpusError::Parse {
                line: 0,
                message: "duplicate word in vocabulary".into(),
            });
        }
        Ok(vocab)
    }
}
