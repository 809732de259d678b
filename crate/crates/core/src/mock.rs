//! Deterministic stand-in for a contextual teacher.
//!
//! `Hash` mode gives every token a pseudo-random vector made of a per-word
//! base plus a perturbation keyed on the surrounding text, so the same word
//! differs between contexts. `Planted` mode emits the word's planted row
//! plus optional per-occurrence noise of fixed norm. Output is a pure
//! function of the corpus and the teacher's parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{EncodedCorpus, Vocabulary, OOV};
use crate::matrix::Matrix;
use crate::planted::{CoverageError, PlantedSpace};
use crate::stream::{RecordSource, Scope, SentenceRecord, StreamError, StreamHeader, Dtype};

const POSITION_BUCKET: usize = 4;
const CONTEXT_WEIGHT: f32 = 0.5;

#[derive(Clone, Debug)]
pub enum MockMode {
    Hash,
    Planted {
        /// Planted rows in vocabulary id order.
        rows: Matrix<f32>,
        /// Norm of the per-occurrence noise vector; 0 disables noise.
        noise: f32,
    },
}

#[derive(Clone, Debug)]
pub struct MockTeacher {
    mode: MockMode,
    scope: Scope,
    dim: usize,
    seed: u64,
}

impl MockTeacher {
    pub fn hash(dim: usize, scope: Scope, seed: u64) -> Self {
        assert!(dim >= 1);
        MockTeacher {
            mode: MockMode::Hash,
            scope,
            dim,
            seed,
        }
    }

    /// Fails if any vocabulary word lacks a planted row.
    pub fn planted(
        space: &PlantedSpace,
        vocab: &Vocabulary,
        scope: Scope,
        noise: f32,
        seed: u64,
    ) -> Result<Self, CoverageError> {
        let rows = space.aligned_to(vocab)?;
        Ok(MockTeacher {
            dim: rows.dim(),
            mode: MockMode::Planted { rows, noise },
            scope,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn header(&self, dtype: Dtype) -> StreamHeader {
        StreamHeader::new(self.dim as u32, self.scope, dtype)
    }

    /// One record per non-empty sentence, in corpus order.
    pub fn encode<'a>(&'a self, corpus: &'a EncodedCorpus) -> impl Iterator<Item = SentenceRecord> + 'a {
        corpus.paragraphs.iter().enumerate().flat_map(move |(pid, para)| {
            let para_hash = match self.scope {
                Scope::Paragraph => Some(hash_ids(para.iter().flatten())),
                Scope::Sentence => None,
            };
            let mut offset = 0usize;
            para.iter()
                .enumerate()
                .filter_map(move |(sid, sentence)| {
                    let start = offset;
                    offset += sentence.len();
                    if sentence.is_empty() {
                        return None;
                    }
                    Some(self.encode_sentence(pid as u32, sid as u32, sentence, start, para_hash))
                })
                .collect::<Vec<_>>()
        })
    }

    fn encode_sentence(
        &self,
        paragraph_id: u32,
        sentence_index: u32,
        ids: &[u32],
        paragraph_offset: usize,
        paragraph_hash: Option<u64>,
    ) -> SentenceRecord {
        let dim = self.dim;
        let mut vectors = Vec::with_capacity(ids.len() * dim);
        let record_key = mix(&[self.seed, paragraph_id as u64, sentence_index as u64]);
        match &self.mode {
            MockMode::Hash => {
                let (ctx_hash, base_pos) = match paragraph_hash {
                    Some(h) => (h, paragraph_offset),
                    None => (hash_ids(ids), 0),
                };
                for (pos, &id) in ids.iter().enumerate() {
                    let bucket = ((base_pos + pos) / POSITION_BUCKET) as u64;
                    let word_key = mix(&[self.seed, id as u64]);
                    let ctx_key = mix(&[self.seed, id as u64, bucket, ctx_hash]);
                    for j in 0..dim as u64 {
                        let base = unit_interval(mix(&[word_key, j]));
                        let ctx = unit_interval(mix(&[ctx_key, j]));
                        vectors.push(base + CONTEXT_WEIGHT * ctx);
                    }
                }
            }
            MockMode::Planted { rows, noise } => {
                let mut rng = ChaCha8Rng::seed_from_u64(record_key);
                let mut scratch = vec![0f64; dim];
                for &id in ids {
                    if id == OOV {
                        gaussian_direction(&mut rng, &mut scratch);
                        vectors.extend(scratch.iter().map(|&x| x as f32));
                        continue;
                    }
                    let row = rows.row(id as usize);
                    if *noise > 0.0 {
                        gaussian_direction(&mut rng, &mut scratch);
                        let n = *noise as f64;
                        vectors.extend(row.iter().zip(&scratch).map(|(&r, &e)| (r as f64 + n * e) as f32));
                    } else {
                        vectors.extend_from_slice(row);
                    }
                }
            }
        }
        SentenceRecord {
            paragraph_id,
            sentence_index,
            token_ids: ids.to_vec(),
            vectors,
        }
    }
}

/// A mock teacher bound to a corpus, regenerated lazily on every pass.
pub struct MockSource<'a> {
    teacher: &'a MockTeacher,
    corpus: &'a EncodedCorpus,
}

impl<'a> MockSource<'a> {
    pub fn new(teacher: &'a MockTeacher, corpus: &'a EncodedCorpus) -> Self {
        MockSource { teacher, corpus }
    }
}

impl RecordSource for MockSource<'_> {
    fn header(&self) -> StreamHeader {
        self.teacher.header(Dtype::F32)
    }

    fn records(&self) -> Result<Box<dyn Iterator<Item = Result<SentenceRecord, StreamError>> + '_>, StreamError> {
        Ok(Box::new(self.teacher.encode(self.corpus).map(Ok)))
    }
}

fn gaussian_direction(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |h, &p| splitmix64(h ^ p))
}

fn hash_ids<'a>(ids: impl IntoIterator<Item = &'a u32>) -> u64 {
    ids.into_iter().fold(0x1319_8A2E_0370_7344, |h, &id| splitmix64(h ^ id as u64))
}

/// Uniform in `[-1, 1)` from the top 24 bits.
fn unit_interval(h: u64) -> f32 {
    ((h >> 40) as f32) / (1u64 << 23) as f32 - 1.0
}
