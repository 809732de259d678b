mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use common::PlantedFixture;
use x2static::corpus::{build_vocabulary, encode_corpus};
use x2static::mock::{MockSource, MockTeacher};
use x2static::stream::{MemorySource, Scope, StreamFile};
use x2static::train::{
    distill, evaluate_loss, lazy_adam_step, target_init_seed, AdamConfig, AdamState, SparseGrad, TrainError,
    TrainingInput,
};
use x2static::{Dtype, Matrix, Mode, SentenceRecord, StreamHeader, TokenizedCorpus, TrainerConfig, Vocabulary, OOV};

fn small_fixture() -> PlantedFixture {
    PlantedFixture::new(300, 16, 6_000, 5)
}

fn memory_source(fx: &PlantedFixture, noise: f32) -> MemorySource {
    let teacher = fx.teacher(noise, 1);
    MemorySource::new(teacher.header(Dtype::F32), teacher.encode(&fx.corpus).collect())
}

fn bits(m: &Matrix<f32>) -> Vec<u32> {
    m.as_slice().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn same_seed_gives_bit_identical_embeddings() {
    let fx = small_fixture();
    let src = memory_source(&fx, 0.2);
    let cfg = TrainerConfig {
        seed: 9,
        epochs: 2,
        ..TrainerConfig::default()
    };
    let a = distill(TrainingInput::Teacher(&src), &fx.vocab, &cfg).unwrap();
    let b = distill(TrainingInput::Teacher(&src), &fx.vocab, &cfg).unwrap();
    assert_eq!(bits(&a.target), bits(&b.target));
    assert_eq!(a.stats, b.stats);

    let c = distill(TrainingInput::Teacher(&src), &fx.vocab, &TrainerConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(bits(&a.target), bits(&c.target));
}

#[test]
fn untouched_rows_keep_their_initialization() {
    let fx = small_fixture();
    // a short prefix of the stream leaves many rows untouched
    let teacher = fx.teacher(0.0, 1);
    let records: Vec<SentenceRecord> = teacher.encode(&fx.corpus).take(3).collect();
    let src = MemorySource::new(teacher.header(Dtype::F32), records);
    let cfg = TrainerConfig {
        seed: 4,
        negatives: 1,
        ..TrainerConfig::default()
    };
    let out = distill(TrainingInput::Teacher(&src), &fx.vocab, &cfg).unwrap();
    let init = Matrix::uniform_init(fx.vocab.len(), 16, target_init_seed(4));

    let untouched: Vec<usize> = (0..fx.vocab.len()).filter(|&i| out.target_steps[i] == 0).collect();
    assert!(untouched.len() > fx.vocab.len() / 2);
    for &i in &untouched {
        assert_eq!(bits_row(out.target.row(i)), bits_row(init.row(i)), "row {i}");
    }
    for i in (0..fx.vocab.len()).filter(|&i| out.target_steps[i] > 0) {
        assert_ne!(out.target.row(i), init.row(i));
    }
}

fn bits_row(r: &[f32]) -> Vec<u32> {
    r.iter().map(|x| x.to_bits()).collect()
}

/// Textbook dense Adam with one global step counter.
fn dense_adam(params: &mut [f64], m: &mut [f64], v: &mut [f64], t: i32, g: &[f64], cfg: &AdamConfig) {
    for i in 0..params.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / (1.0 - cfg.beta1.powi(t));
        let v_hat = v[i] / (1.0 - cfg.beta2.powi(t));
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[test]
fn lazy_adam_matches_dense_reference_when_every_row_is_touched() {
    let (rows, dim) = (5, 7);
    let cfg = AdamConfig {
        learning_rate: 0.01,
        ..AdamConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let init: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut lazy = Matrix::from_vec(rows, dim, init.clone());
    let mut state = AdamState::new(rows, dim);
    let mut dense = init;
    let (mut m, mut v) = (vec![0.0; rows * dim], vec![0.0; rows * dim]);
    let mut grads = SparseGrad::new(rows, dim);

    for t in 1..=200 {
        let g: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        grads.clear();
        // touch rows in a shuffled order; the result must not depend on it
        for r in [3, 0, 4, 1, 2] {
            grads.row_mut(r).copy_from_slice(&g[r as usize * dim..(r as usize + 1) * dim]);
        }
        lazy_adam_step(&mut lazy, &mut state, &grads, &cfg, t as u64).unwrap();
        dense_adam(&mut dense, &mut m, &mut v, t, &g, &cfg);
    }
    let err = lazy
        .as_slice()
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "max deviation {err:e}");
}

#[test]
fn loss_decreases_on_planted_corpus() {
    let fx = PlantedFixture::with_min_count(2000, 32, 200_000, 2024, 10);
    let teacher = fx.teacher(0.0, 2024);
    let src = MockSource::new(&teacher, &fx.corpus);
    let cfg = TrainerConfig {
        epochs: 3,
        ..TrainerConfig::default()
    };
    let out = distill(TrainingInput::Teacher(&src), &fx.vocab, &cfg).unwrap();
    let losses = &out.stats.epoch_losses;
    let initial = out.stats.initial_loss.unwrap();
    assert_eq!(losses.len(), 3);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    assert!(losses[2] <= 0.8 * initial, "initial {initial}, epochs {losses:?}");
    // (k + 1) ln 2 at near-zero initialization
    assert!((initial - 11.0 * std::f64::consts::LN_2).abs() < 0.05);
}

#[test]
fn trained_loss_is_below_initial_loss_on_held_out_pass() {
    let fx = small_fixture();
    let src = memory_source(&fx, 0.0);
    let cfg = TrainerConfig {
        epochs: 3,
        learning_rate: 0.01,
        ..TrainerConfig::default()
    };
    let out = distill(TrainingInput::Teacher(&src), &fx.vocab, &cfg).unwrap();
    let init = Matrix::uniform_init(fx.vocab.len(), 16, target_init_seed(cfg.seed));
    let eval_cfg = TrainerConfig { seed: 99, ..cfg };
    let before = evaluate_loss(&src, &fx.vocab, &init, &eval_cfg).unwrap();
    let after = evaluate_loss(&src, &fx.vocab, &out.target, &eval_cfg).unwrap();
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn training_leaves_the_stream_file_untouched() {
    let fx = small_fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.x2s");
    fx.export(0.1, 3, &path);
    let digest = || Sha256::digest(std::fs::read(&path).unwrap());
    let before = digest();
    let src = StreamFile::open(&path).unwrap();
    distill(
        TrainingInput::Teacher(&src),
        &fx.vocab,
        &TrainerConfig {
            epochs: 2,
            ..TrainerConfig::default()
        },
    )
    .unwrap();
    assert_eq!(before, digest());
}

#[test]
fn mode_and_dim_mismatches_are_errors() {
    let fx = small_fixture();
    let src = memory_source(&fx, 0.0);
    let static_cfg = TrainerConfig {
        mode: Mode::StaticBaseline,
        dim: Some(16),
        ..TrainerConfig::default()
    };
    assert!(matches!(
        distill(TrainingInput::Teacher(&src), &fx.vocab, &static_cfg),
        Err(TrainError::ModeMismatch(Mode::StaticBaseline))
    ));
    assert!(matches!(
        distill(TrainingInput::Corpus(&fx.corpus), &fx.vocab, &TrainerConfig::default()),
        Err(TrainError::ModeMismatch(Mode::Teacher))
    ));
    let wrong_dim = TrainerConfig {
        dim: Some(8),
        ..TrainerConfig::default()
    };
    assert!(matches!(
        distill(TrainingInput::Teacher(&src), &fx.vocab, &wrong_dim),
        Err(TrainError::DimMismatch { stream: 16, config: 8 })
    ));
}

#[test]
fn invalid_records_and_configs_are_rejected() {
    let vocab = Vocabulary::build(["a", "b", "c"], 1, 10).unwrap();
    let header = StreamHeader::new(2, Scope::Sentence, Dtype::F32);
    let rec = |ids: &[u32]| SentenceRecord {
        paragraph_id: 0,
        sentence_index: 0,
        token_ids: ids.to_vec(),
        vectors: vec![0.5; ids.len() * 2],
    };
    let bad_id = MemorySource::new(header, vec![rec(&[0, 1]), rec(&[2, 7])]);
    assert!(matches!(
        distill(TrainingInput::Teacher(&bad_id), &vocab, &TrainerConfig::default()),
        Err(TrainError::IdOutOfRange { record: 1, id: 7, .. })
    ));

    let mut short = rec(&[0, 1]);
    short.vectors.pop();
    let bad_width = MemorySource::new(header, vec![short]);
    assert!(matches!(
        distill(TrainingInput::Teacher(&bad_width), &vocab, &TrainerConfig::default()),
        Err(TrainError::Stream(_))
    ));

    let only_oov = MemorySource::new(header, vec![rec(&[OOV, OOV])]);
    assert!(matches!(
        distill(TrainingInput::Teacher(&only_oov), &vocab, &TrainerConfig::default()),
        Err(TrainError::EmptyTrainingSet { .. })
    ));

    let ok = MemorySource::new(header, vec![rec(&[0, 1, 2])]);
    for cfg in [
        TrainerConfig { epochs: 0, ..TrainerConfig::default() },
        TrainerConfig { negatives: 0, ..TrainerConfig::default() },
        TrainerConfig { batch_size: 0, ..TrainerConfig::default() },
        TrainerConfig { learning_rate: -1.0, ..TrainerConfig::default() },
        TrainerConfig { subsample_t: 0.0, ..TrainerConfig::default() },
        TrainerConfig { threads: 0, ..TrainerConfig::default() },
    ] {
        assert!(matches!(
            distill(TrainingInput::Teacher(&ok), &vocab, &cfg),
            Err(TrainError::InvalidConfig(_))
        ));
    }

    let single = Vocabulary::build(["a"], 1, 10).unwrap();
    let one_word = MemorySource::new(header, vec![rec(&[0])]);
    assert!(matches!(
        distill(TrainingInput::Teacher(&one_word), &single, &TrainerConfig::default()),
        Err(TrainError::Sampling(_))
    ));
}

#[test]
fn oov_targets_are_counted_and_skipped() {
    let vocab = Vocabulary::build(["a", "b", "c"], 1, 10).unwrap();
    let header = StreamHeader::new(2, Scope::Sentence, Dtype::F32);
    let rec = SentenceRecord {
        paragraph_id: 0,
        sentence_index: 0,
        token_ids: vec![0, OOV, 1, OOV, 2],
        vectors: (0..10).map(|i| i as f32 * 0.1).collect(),
    };
    let src = MemorySource::new(header, vec![rec]);
    let cfg = TrainerConfig {
        subsample_t: 1e6,
        ..TrainerConfig::default()
    };
    let out = distill(TrainingInput::Teacher(&src), &vocab, &cfg).unwrap();
    assert_eq!(out.stats.oov_targets, 2);
    assert_eq!(out.stats.examples, 3);
    assert_eq!(out.stats.batches, 1);
}

#[test]
fn static_baseline_trains_both_matrices() {
    let fx = small_fixture();
    let cfg = TrainerConfig {
        mode: Mode::StaticBaseline,
        dim: Some(12),
        epochs: 3,
        learning_rate: 0.005,
        seed: 21,
        ..TrainerConfig::default()
    };
    let a = distill(TrainingInput::Corpus(&fx.corpus), &fx.vocab, &cfg).unwrap();
    let b = distill(TrainingInput::Corpus(&fx.corpus), &fx.vocab, &cfg).unwrap();
    assert_eq!(bits(&a.target), bits(&b.target));
    let ctx = a.context.as_ref().unwrap();
    assert_eq!((ctx.rows(), ctx.dim()), (fx.vocab.len(), 12));
    assert_eq!(bits(ctx), bits(b.context.as_ref().unwrap()));
    assert!(a.target.is_finite() && ctx.is_finite());
    let l = &a.stats.epoch_losses;
    assert!(l[2] < l[0], "{l:?}");
}

#[test]
fn static_baseline_skips_targets_without_context() {
    let corpus: TokenizedCorpus = TokenizedCorpus {
        paragraphs: vec![vec![
            vec!["a".into()],
            vec!["a".into(), "zz".into()],
            vec!["a".into(), "b".into(), "c".into()],
        ]],
    };
    let vocab = build_vocabulary(&corpus, 1, 10).unwrap();
    let vocab = Vocabulary::from_entries(
        vocab.entries().iter().filter(|e| e.word != "zz").cloned().collect(),
        vocab.total_tokens(),
    );
    let encoded = encode_corpus(&corpus, &vocab);
    let cfg = TrainerConfig {
        mode: Mode::StaticBaseline,
        dim: Some(4),
        subsample_t: 1e6,
        ..TrainerConfig::default()
    };
    let out = distill(TrainingInput::Corpus(&encoded), &vocab, &cfg).unwrap();
    // "a" alone and "a" next to an OOV word have no static context
    assert_eq!(out.stats.skipped, 2);
    assert_eq!(out.stats.oov_targets, 1);
    assert_eq!(out.stats.examples, 3);

    let no_dim = TrainerConfig { dim: None, ..cfg };
    assert!(matches!(
        distill(TrainingInput::Corpus(&encoded), &vocab, &no_dim),
        Err(TrainError::InvalidConfig(_))
    ));
}

#[test]
fn parallel_training_runs_and_covers_the_stream() {
    let fx = small_fixture();
    let src = memory_source(&fx, 0.1);
    let cfg = TrainerConfig {
        threads: 4,
        epochs: 2,
        ..TrainerConfig::default()
    };
    let single = distill(
        TrainingInput::Teacher(&src),
        &fx.vocab,
        &TrainerConfig {
            threads: 1,
            ..cfg.clone()
        },
    )
    .unwrap();
    let out = distill(TrainingInput::Teacher(&src), &fx.vocab, &cfg).unwrap();
    assert!(out.target.is_finite());
    assert_eq!(out.stats.epoch_losses.len(), 2);
    assert!(out.stats.examples + out.stats.subsampled == single.stats.examples + single.stats.subsampled);
    assert!(out.target_steps.iter().any(|&s| s > 0));
}

#[test]
fn hash_teacher_stream_trains() {
    let text = x2static::planted::synthesize_corpus(
        &x2static::planted::synthetic_words(100),
        &x2static::planted::SynthConfig {
            sentences: 2000,
            ..Default::default()
        },
    );
    let vocab = build_vocabulary(&text, 1, 1000).unwrap();
    let corpus = encode_corpus(&text, &vocab);
    let teacher = MockTeacher::hash(8, Scope::Paragraph, 3);
    let src = MockSource::new(&teacher, &corpus);
    let out = distill(TrainingInput::Teacher(&src), &vocab, &TrainerConfig::default()).unwrap();
    assert_eq!(out.target.dim(), 8);
    assert!(out.stats.examples > 0);
}
