//! Word-indexed embedding sets and their file formats.
//!
//! Text format (word2vec style): a `<count> <dim>` line, then one line per
//! word: the word followed by `dim` values with 9 significant digits, space
//! separated. Nine digits round-trip every f32 exactly.
//!
//! Binary checkpoint: `dim` u32, `rows` u32, then `rows * dim` f32, all
//! little-endian. Words are not stored; pair it with the vocabulary file.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum EmbeddingsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0} words for {1} rows")]
    Shape(usize, usize),
    #[error("duplicate word {0:?}")]
    Duplicate(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Matrix<f32>,
}

impl Embeddings {
    pub fn new(words: Vec<String>, matrix: Matrix<f32>) -> Result<Self, EmbeddingsError> {
        if words.len() != matrix.rows() {
            return Err(EmbeddingsError::Shape(words.len(), matrix.rows()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(EmbeddingsError::Duplicate(w.clone()));
            }
        }
        Ok(Embeddings { words, index, matrix })
    }

    /// Rows in vocabulary id order.
    pub fn from_vocabulary(vocab: &Vocabulary, matrix: Matrix<f32>) -> Result<Self, EmbeddingsError> {
        Self::new(vocab.words().map(String::from).collect(), matrix)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Matrix<f32> {
        &self.matrix
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.matrix.row(i))
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        let mut line = String::new();
        for (word, row) in self.words.iter().zip(self.matrix.iter_rows()) {
            line.clear();
            line.push_str(word);
            for &x in row {
                line.push(' ');
                format_sig9(x, &mut line);
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        w.flush()
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, EmbeddingsError> {
        let mut lines = reader.lines();
        let err = |line: usize, message: &str| EmbeddingsError::Parse {
            line,
            message: message.to_string(),
        };
        let header = lines.next().ok_or_else(|| err(1, "missing header"))??;
        let mut parts = header.split_whitespace();
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(1, "bad word count"))?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(1, "bad dimension"))?;
        if parts.next().is_some() {
            return Err(err(1, "trailing fields in header"));
        }

        let mut words = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let lineno = n + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let word = fields.next().filter(|w| !w.is_empty()).ok_or_else(|| err(lineno, "missing word"))?;
            let before = data.len();
            for f in fields {
                let x: f32 = f.trim_end().parse().map_err(|_| err(lineno, "bad value"))?;
                data.push(x);
            }
            if data.len() - before != dim {
                return Err(err(lineno, &format!("expected {dim} values, got {}", data.len() - before)));
            }
            words.push(word.to_string());
        }
        if words.len() != count {
            return Err(err(0, &format!("header promises {count} words, found {}", words.len())));
        }
        Self::new(words, Matrix::from_vec(count, dim, data))
    }
}

/// `%.9g`-style formatting: fixed notation for decimal exponents in
/// `[-4, 9)`, scientific otherwise, trailing zeros trimmed.
pub fn format_sig9(x: f32, out: &mut String) {
    let x = x as f64;
    if x == 0.0 {
        out.push_str(if x.is_sign_negative() { "-0" } else { "0" });
        return;
    }
    if !x.is_finite() {
        let _ = write!(out, "{x}");
        return;
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        out.push_str(trim_zeros(&fixed));
    } else {
        let _ = write!(out, "{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs());
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_checkpoint<W: Write>(matrix: &Matrix<f32>, mut w: W) -> io::Result<()> {
    w.write_u32::<LittleEndian>(matrix.dim() as u32)?;
    w.write_u32::<LittleEndian>(matrix.rows() as u32)?;
    for &x in matrix.as_slice() {
        w.write_f32::<LittleEndian>(x)?;
    }
    w.flush()
}

pub fn read_checkpoint<R: Read>(mut r: R) -> io::Result<Matrix<f32>> {
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let mut data = vec![0f32; rows * dim];
    r.read_f32_into::<LittleEndian>(&mut data)?;
    Ok(Matrix::from_vec(rows, dim, data))
}
