//! Raw text preprocessing, vocabulary construction and id encoding.
//!
//! The canonical corpus file holds one sentence per line with tokens
//! separated by single spaces; a blank line terminates a paragraph.

mod tokenize;
mod vocab;

use std::io::{self, BufRead, Write};

use thiserror::Error;

pub use tokenize::{is_punctuation, split_sentences, tokenize};
pub use vocab::{Vocabulary, VocabularyEntry};

/// Id reserved for tokens outside the vocabulary.
pub const OOV: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: u64 },
    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Sentence = Vec<String>;
pub type Paragraph = Vec<Sentence>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenizedCorpus {
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub min_sentences: usize,
    /// Measured in Unicode scalar values on the raw paragraph text.
    pub min_chars: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_sentences: 3,
            min_chars: 140,
        }
    }
}

impl TokenizedCorpus {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flatten()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences().flatten().map(String::as_str)
    }

    pub fn num_sentences(&self) -> usize {
        self.paragraphs.iter().map(Vec::len).sum()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences().map(Vec::len).sum()
    }

    /// Reads the canonical corpus format.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut corpus = TokenizedCorpus::default();
        let mut current: Paragraph = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| match e.kind() {
                io::ErrorKind::InvalidData => CorpusError::Parse {
                    line: n + 1,
                    message: "invalid UTF-8".into(),
                },
                _ => CorpusError::Io(e),
            })?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                if !current.is_empty() {
                    corpus.paragraphs.push(std::mem::take(&mut current));
                }
            } else {
                current.push(line.split(' ').filter(|t| !t.is_empty()).map(String::from).collect());
            }
        }
        if !current.is_empty() {
            corpus.paragraphs.push(current);
        }
        Ok(corpus)
    }

    /// Writes the canonical corpus format; every paragraph, including the
    /// last, is followed by a blank line.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for para in &self.paragraphs {
            for sentence in para {
                writeln!(w, "{}", sentence.join(" "))?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Lowercases, splits sentences, tokenizes and drops short paragraphs.
///
/// Paragraphs are separated by blank lines. A paragraph survives only if it
/// has at least `min_sentences` sentences and `min_chars` characters.
pub fn preprocess_corpus<R: BufRead>(
    mut reader: R,
    config: &PreprocessConfig,
) -> Result<TokenizedCorpus, CorpusError> {
    let mut corpus = TokenizedCorpus::default();
    let mut lines: Vec<String> = Vec::new();
    let mut buf = Vec::new();
    let mut offset: u64 = 0;

    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf).map_err(|e| CorpusError::Decode {
            offset: offset + e.valid_up_to() as u64,
        })?;
        offset += n as u64;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            flush_paragraph(&mut lines, config, &mut corpus);
        } else {
            lines.push(line.to_string());
        }
    }
    flush_paragraph(&mut lines, config, &mut corpus);
    Ok(corpus)
}

fn flush_paragraph(lines: &mut Vec<String>, config: &PreprocessConfig, corpus: &mut TokenizedCorpus) {
    if lines.is_empty() {
        return;
    }
    let raw = lines.join("\n");
    let chars = raw.chars().count();
    let lowered = raw.to_lowercase();
    let line_refs: Vec<&str> = lowered.lines().collect();
    let sentences: Vec<Sentence> = split_sentences(&line_refs)
        .into_iter()
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect();
    lines.clear();

    if sentences.len() >= config.min_sentences && chars >= config.min_chars {
        corpus.paragraphs.push(sentences);
    }
}

/// Same paragraph/sentence structure as the source corpus, with ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodedCorpus {
    pub paragraphs: Vec<Vec<Vec<u32>>>,
}

impl EncodedCorpus {
    pub fn sentences(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.paragraphs.iter().flatten()
    }

    pub fn num_sentences(&self) -> usize {
        self.paragraphs.iter().map(Vec::len).sum()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences().map(Vec::len).sum()
    }

    /// Maps ids back to words; OOV positions become `None`.
    pub fn decode<'v>(&self, vocab: &'v Vocabulary) -> Vec<Vec<Vec<Option<&'v str>>>> {
        self.paragraphs
            .iter()
            .map(|p| {
                p.iter()
                    .map(|s| s.iter().map(|&id| vocab.word(id)).collect())
                    .collect()
            })
            .collect()
    }
}

pub fn encode_corpus(corpus: &TokenizedCorpus, vocab: &Vocabulary) -> EncodedCorpus {
    EncodedCorpus {
        paragraphs: corpus
            .paragraphs
            .iter()
            .map(|p| {
                p.iter()
                    .map(|s| s.iter().map(|t| vocab.id(t).unwrap_or(OOV)).collect())
                    .collect()
            })
            .collect(),
    }
}

pub fn build_vocabulary(
    corpus: &TokenizedCorpus,
    min_count: u64,
    max_size: usize,
) -> Result<Vocabulary, CorpusError> {
    Vocabulary::build(corpus.tokens(), min_count, max_size)
}
