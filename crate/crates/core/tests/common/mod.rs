#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use x2static::corpus::{build_vocabulary, encode_corpus};
use x2static::eval::SimilarityDataset;
use x2static::mock::MockTeacher;
use x2static::planted::{random_pairs, synthesize_corpus, synthetic_words, PlantedSpace, SynthConfig};
use x2static::stream::{Dtype, Scope, StreamWriter};
use x2static::{EncodedCorpus, Vocabulary};

/// A planted space, a Zipf-weighted corpus over its words and the matching
/// vocabulary.
pub struct PlantedFixture {
    pub space: PlantedSpace,
    pub vocab: Vocabulary,
    pub corpus: EncodedCorpus,
}

impl PlantedFixture {
    pub fn new(words: usize, dim: usize, sentences: usize, seed: u64) -> Self {
        Self::with_min_count(words, dim, sentences, seed, 1)
    }

    pub fn with_min_count(words: usize, dim: usize, sentences: usize, seed: u64, min_count: u64) -> Self {
        let names = synthetic_words(words);
        let space = PlantedSpace::generate(names.clone(), dim, seed);
        let text = synthesize_corpus(
            &names,
            &SynthConfig {
                sentences,
                seed: seed.wrapping_add(1),
                ..SynthConfig::default()
            },
        );
        let vocab = build_vocabulary(&text, min_count, usize::MAX).unwrap();
        let corpus = encode_corpus(&text, &vocab);
        PlantedFixture { space, vocab, corpus }
    }

    pub fn teacher(&self, noise: f32, seed: u64) -> MockTeacher {
        MockTeacher::planted(&self.space, &self.vocab, Scope::Sentence, noise, seed).unwrap()
    }

    /// Streams the planted mock teacher output to `path`; returns bytes written.
    pub fn export(&self, noise: f32, seed: u64, path: &Path) -> u64 {
        let teacher = self.teacher(noise, seed);
        let sink = BufWriter::new(File::create(path).unwrap());
        let mut w = StreamWriter::new(sink, teacher.header(Dtype::F32)).unwrap();
        for r in teacher.encode(&self.corpus) {
            w.write_record(&r).unwrap();
        }
        let n = w.bytes_written();
        w.finish().unwrap();
        n
    }

    /// Gold dataset of `pairs` random word pairs scored by planted cosine.
    pub fn gold(&self, pairs: usize, seed: u64) -> SimilarityDataset {
        let pairs = random_pairs(self.space.words().len(), pairs, seed);
        self.space.similarity_dataset("planted", &pairs)
    }
}
