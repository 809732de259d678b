//! Subcommand implementations.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::json;
use x2static::ase::ase_from_source;
use x2static::corpus::{build_vocabulary, encode_corpus, preprocess_corpus};
use x2static::embeddings::write_checkpoint;
use x2static::eval::{evaluate_dataset, nearest_neighbors, report_tsv, SimilarityDataset};
use x2static::mock::MockTeacher;
use x2static::planted::{random_pairs, synthesize_corpus, synthetic_words, PlantedSpace, SynthConfig};
use x2static::stream::{StreamFile, StreamWriter};
use x2static::sweep::{rows_tsv, sweep, SweepConfig};
use x2static::train::{distill, TrainOutput, TrainingInput};
use x2static::{Dtype, Embeddings, Mode, Scope, TokenizedCorpus, TrainerConfig, Vocabulary};

use crate::args::*;
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::{manifest_path, Recorder, RunManifest};

type Result<T> = std::result::Result<T, CliError>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(CliError::at(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(CliError::at(path))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(CliError::at(p))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn read_corpus(path: &Path) -> Result<TokenizedCorpus> {
    TokenizedCorpus::read(open(path)?).map_err(CliError::at(path))
}

/// Reads a vocabulary file. The corpus token total, which subsampling needs,
/// comes from the manifest the `vocab` subcommand wrote next to it; without
/// one it falls back to the sum of the listed counts.
pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let mut vocab = Vocabulary::read_tsv(open(path)?).map_err(CliError::at(path))?;
    let mpath = manifest_path(path);
    if mpath.exists() {
        let manifest = RunManifest::read(&mpath)?;
        if let Some(total) = manifest.stats.get("total_tokens").and_then(|v| v.as_u64()) {
            vocab.set_total_tokens(total);
        }
    }
    Ok(vocab)
}

fn read_embeddings(path: &Path) -> Result<Embeddings> {
    Embeddings::read_text(open(path)?).map_err(CliError::at(path))
}

fn read_datasets(paths: &[std::path::PathBuf]) -> Result<Vec<SimilarityDataset>> {
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            SimilarityDataset::parse(name, open(p)?).map_err(CliError::at(p))
        })
        .collect()
}

fn open_stream(path: &Path) -> Result<StreamFile> {
    StreamFile::open(path).map_err(CliError::at(path))
}

fn write_embeddings(emb: &Embeddings, path: &Path) -> Result<()> {
    emb.write_text(create(path)?).map_err(CliError::at(path))
}

pub fn preprocess(args: PreprocessArgs, file: &ConfigFile, argv: &[OsString]) -> Result<()> {
    let config = file.preprocess(args.min_sentences, args.min_chars);
    let mut rec = Recorder::new("preprocess", argv);
    rec.config = json!({"min_sentences": config.min_sentences, "min_chars": config.min_chars});
    rec.input("text", &args.input);
    rec.output("corpus", &args.output);
    rec.check_outputs()?;

    let corpus = preprocess_corpus(open(&args.input)?, &config).map_err(CliError::at(&args.input))?;
    corpus.write(create(&args.output)?).map_err(CliError::at(&args.output))?;
    eprintln!(
        "preprocess: {} paragraphs, {} sentences, {} tokens",
        corpus.paragraphs.len(),
        corpus.num_sentences(),
        corpus.num_tokens()
    );
    rec.stat("paragraphs", corpus.paragraphs.len());
    rec.stat("sentences", corpus.num_sentences());
    rec.stat("tokens", corpus.num_tokens());
    rec.finish()?;
    Ok(())
}

pub fn vocab(args: VocabArgs, file: &ConfigFile, argv: &[OsString]) -> Result<()> {
    let (min_count, max_size) = file.vocab(args.min_count, args.max_size);
    let mut rec = Recorder::new("vocab", argv);
    rec.config = json!({"min_count": min_count, "max_size": max_size});
    rec.input("corpus", &args.input);
    rec.output("vocab", &args.output);
    rec.check_outputs()?;

    let corpus = read_corpus(&args.input)?;
    let vocab = build_vocabulary(&corpus, min_count, max_size).map_err(|e| match e {
        x2static::corpus::CorpusError::InvalidParameter(m) => CliError::Usage(m),
        e => CliError::Data(format!("{}: {e}", args.input.display())),
    })?;
    vocab.write_tsv(create(&args.output)?).map_err(CliError::at(&args.output))?;
    eprintln!("vocab: {} words over {} tokens", vocab.len(), vocab.total_tokens());
    rec.stat("words", vocab.len());
    rec.stat("total_tokens", vocab.total_tokens());
    rec.finish()?;
    Ok(())
}

pub fn synth(args: SynthArgs, argv: &[OsString]) -> Result<()> {
    if args.words == 0 || args.sentences == 0 || !args.zipf.is_finite() || args.zipf < 0.0 {
        return Err(CliError::Usage("--words and --sentences must be positive and --zipf non-negative".into()));
    }
    let config = SynthConfig {
        sentences: args.sentences,
        zipf_exponent: args.zipf,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let mut rec = Recorder::new("synth", argv);
    rec.config = json!({
        "words": args.words,
        "sentences": config.sentences,
        "min_len": config.min_len,
        "max_len": config.max_len,
        "paragraph_sentences": [config.paragraph_sentences.0, config.paragraph_sentences.1],
        "zipf_exponent": config.zipf_exponent,
    });
    rec.seed = Some(args.seed);
    rec.output("corpus", &args.output);

    let corpus = synthesize_corpus(&synthetic_words(args.words), &config);
    corpus.write(create(&args.output)?).map_err(CliError::at(&args.output))?;
    rec.stat("tokens", corpus.num_tokens());
    rec.finish()?;
    Ok(())
}

pub fn mock_teacher(args: MockTeacherArgs, argv: &[OsString]) -> Result<()> {
    if args.dim == 0 {
        return Err(CliError::Usage("--dim must be positive".into()));
    }
    if !args.noise.is_finite() || args.noise < 0.0 {
        return Err(CliError::Usage("--noise must be a non-negative number".into()));
    }
    if args.gold.is_some() && args.teacher != TeacherKind::Planted {
        return Err(CliError::Usage("--gold needs --teacher planted".into()));
    }
    let scope: Scope = args.scope.into();
    let dtype: Dtype = args.dtype.into();
    let mut rec = Recorder::new("mock-teacher", argv);
    rec.config = json!({
        "teacher": format!("{:?}", args.teacher).to_lowercase(),
        "dim": args.dim,
        "scope": scope,
        "dtype": dtype,
        "noise": args.noise,
        "pairs": args.gold.as_ref().map(|_| args.pairs),
    });
    rec.seed = Some(args.seed);
    rec.input("corpus", &args.input);
    rec.input("vocab", &args.vocab);
    rec.output("stream", &args.output);
    if let Some(g) = &args.gold {
        rec.output("gold", g);
    }
    rec.check_outputs()?;

    let vocab = read_vocab(&args.vocab)?;
    let corpus = encode_corpus(&read_corpus(&args.input)?, &vocab);
    let (teacher, space) = match args.teacher {
        TeacherKind::Hash => (MockTeacher::hash(args.dim, scope, args.seed), None),
        TeacherKind::Planted => {
            let space = PlantedSpace::generate(vocab.words().map(String::from).collect(), args.dim, args.seed);
            let teacher = MockTeacher::planted(&space, &vocab, scope, args.noise, args.seed)
                .expect("planted space is built over the vocabulary");
            (teacher, Some(space))
        }
    };

    let mut w = StreamWriter::new(create(&args.output)?, teacher.header(dtype)).map_err(CliError::at(&args.output))?;
    for record in teacher.encode(&corpus) {
        w.write_record(&record).map_err(CliError::at(&args.output))?;
    }
    let records = w.records_written();
    w.finish().map_err(CliError::at(&args.output))?;
    eprintln!("mock-teacher: {records} records");
    rec.stat("records", records);

    if let (Some(path), Some(space)) = (&args.gold, &space) {
        let n = vocab.len();
        let max_pairs = n * n.saturating_sub(1) / 2;
        if args.pairs == 0 || args.pairs > max_pairs {
            return Err(CliError::Usage(format!("--pairs must be in 1..={max_pairs} for {n} words")));
        }
        let ds = space.similarity_dataset("planted", &random_pairs(n, args.pairs, args.seed.wrapping_add(1)));
        let mut text = String::new();
        for (a, b, score) in &ds.pairs {
            text.push_str(&format!("{a}\t{b}\t{score}\n"));
        }
        write_text(Some(path), &text)?;
    }
    rec.finish()?;
    Ok(())
}

fn announce(config: &TrainerConfig) {
    eprintln!(
        "train: epochs={} negatives={} subsample_t={:e} lr={} batch={} seed={} threads={}",
        config.epochs,
        config.negatives,
        config.subsample_t,
        config.learning_rate,
        config.batch_size,
        config.seed,
        config.threads
    );
}

fn report_training(out: &TrainOutput) {
    let s = &out.stats;
    let losses: Vec<String> = s.epoch_losses.iter().map(|l| format!("{l:.6}")).collect();
    eprintln!(
        "train: {} examples, {} subsampled, {} oov targets, {} skipped; epoch losses [{}]",
        s.examples,
        s.subsampled,
        s.oov_targets,
        s.skipped,
        losses.join(", ")
    );
}

pub fn train(args: TrainArgs, file: &ConfigFile, argv: &[OsString]) -> Result<()> {
    let mut config = file.trainer(&args.trainer);
    if let Some(m) = args.mode {
        config.mode = m.into();
    }
    let mut rec = Recorder::new("train", argv);
    rec.config = serde_json::to_value(&config).expect("config serializes");
    rec.seed = Some(config.seed);
    rec.input("vocab", &args.vocab);
    rec.output("embeddings", &args.output);
    if let Some(c) = &args.checkpoint {
        rec.output("checkpoint", c);
    }
    match config.mode {
        Mode::Teacher => {
            let stream = args.stream.as_ref().ok_or_else(|| CliError::Usage("teacher mode needs --stream".into()))?;
            rec.input("stream", stream);
        }
        Mode::StaticBaseline => {
            let corpus = args.input.as_ref().ok_or_else(|| CliError::Usage("static mode needs --input".into()))?;
            rec.input("corpus", corpus);
        }
    }
    rec.check_outputs()?;
    announce(&config);

    let vocab = read_vocab(&args.vocab)?;
    let out = match config.mode {
        Mode::Teacher => {
            let src = open_stream(args.stream.as_deref().expect("checked above"))?;
            distill(TrainingInput::Teacher(&src), &vocab, &config)?
        }
        Mode::StaticBaseline => {
            let corpus = encode_corpus(&read_corpus(args.input.as_deref().expect("checked above"))?, &vocab);
            distill(TrainingInput::Corpus(&corpus), &vocab, &config)?
        }
    };
    report_training(&out);
    rec.stat("examples", out.stats.examples);
    rec.stat("epoch_losses", out.stats.epoch_losses.clone());

    if let Some(path) = &args.checkpoint {
        write_checkpoint(&out.target, create(path)?).map_err(CliError::at(path))?;
    }
    let emb = Embeddings::from_vocabulary(&vocab, out.target).expect("matrix has one row per word");
    write_embeddings(&emb, &args.output)?;
    rec.finish()?;
    Ok(())
}

pub fn ase(args: AseArgs, argv: &[OsString]) -> Result<()> {
    let mut rec = Recorder::new("ase", argv);
    rec.config = json!({"cap": args.cap});
    rec.input("stream", &args.stream);
    rec.input("vocab", &args.vocab);
    rec.output("embeddings", &args.output);
    if let Some(c) = &args.coverage {
        rec.output("coverage", c);
    }
    rec.check_outputs()?;
    if args.cap == Some(0) {
        return Err(CliError::Usage("--cap must be positive".into()));
    }

    let vocab = read_vocab(&args.vocab)?;
    let src = open_stream(&args.stream)?;
    let result = ase_from_source(&src, vocab.len(), args.cap).map_err(CliError::at(&args.stream))?;
    eprintln!("ase: {} of {} words seen", result.seen(), vocab.len());
    rec.stat("words_seen", result.seen());

    let emb = result.to_embeddings(&vocab).map_err(CliError::at(&args.stream))?;
    write_embeddings(&emb, &args.output)?;
    if let Some(path) = &args.coverage {
        result.write_coverage(&vocab, create(path)?).map_err(CliError::at(path))?;
    }
    rec.finish()?;
    Ok(())
}

pub fn eval_sim(args: EvalSimArgs, argv: &[OsString]) -> Result<()> {
    let mut rec = Recorder::new("eval-sim", argv);
    rec.config = json!({});
    rec.input("embeddings", &args.input);
    for (i, d) in args.dataset.iter().enumerate() {
        rec.input(&format!("dataset{i}"), d);
    }
    if let Some(o) = &args.output {
        rec.output("report", o);
    }
    rec.check_outputs()?;

    let emb = read_embeddings(&args.input)?;
    let datasets = read_datasets(&args.dataset)?;
    let reports = datasets
        .iter()
        .map(|ds| evaluate_dataset(&emb, ds).map_err(|e| CliError::Data(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    write_text(args.output.as_deref(), &report_tsv(&reports))?;
    if args.output.is_some() {
        rec.finish()?;
    }
    Ok(())
}

pub fn nn(args: NnArgs) -> Result<()> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be positive".into()));
    }
    let emb = read_embeddings(&args.input)?;
    let mut text = String::new();
    for q in &args.queries {
        let neighbors = nearest_neighbors(&emb, &q.to_lowercase(), args.k).map_err(|e| CliError::Data(e.to_string()))?;
        for (word, cos) in neighbors {
            text.push_str(&format!("{q}\t{word}\t{cos:.6}\n"));
        }
    }
    write_text(None, &text)
}

pub fn run_sweep(args: SweepArgs, file: &ConfigFile, argv: &[OsString]) -> Result<()> {
    let mut trainer = file.trainer(&args.trainer);
    trainer.mode = Mode::Teacher;
    let mut rec = Recorder::new("sweep", argv);
    rec.config = json!({
        "fractions": args.fractions,
        "ase_cap": args.cap,
        "trainer": trainer,
    });
    rec.seed = Some(trainer.seed);
    rec.input("stream", &args.stream);
    rec.input("vocab", &args.vocab);
    for (i, d) in args.dataset.iter().enumerate() {
        rec.input(&format!("dataset{i}"), d);
    }
    if let Some(o) = &args.output {
        rec.output("table", o);
    }
    rec.check_outputs()?;
    announce(&trainer);

    let vocab = read_vocab(&args.vocab)?;
    let datasets = read_datasets(&args.dataset)?;
    let src = open_stream(&args.stream)?;
    let config = SweepConfig {
        fractions: args.fractions,
        trainer,
        ase_cap: args.cap,
    };
    let rows = sweep(&src, &vocab, &datasets, &config)?;
    write_text(args.output.as_deref(), &rows_tsv(&rows))?;
    if args.output.is_some() {
        rec.finish()?;
    }
    Ok(())
}

/// The recorded argv, with the program name restored.
pub fn replay_argv(args: &ReplayArgs) -> Result<Vec<OsString>> {
    let manifest = RunManifest::read(&args.input)?;
    if manifest.subcommand == "replay" {
        return Err(CliError::Data(format!("{}: cannot replay a replay", args.input.display())));
    }
    Ok(std::iter::once("x2static".to_string())
        .chain(manifest.argv)
        .map(OsString::from)
        .collect())
}
