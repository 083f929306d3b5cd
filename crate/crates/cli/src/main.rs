use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use xlate::analogy::{evaluate, filter_testable, AnalogySet};
use xlate::config::Config;
use xlate::corpus::{corpus_stats, read_lines, tokenize_line, Corpus, Vocabulary};
use xlate::manifest::RunManifest;
use xlate::phrase::run_phrase_pipeline;
use xlate::store::EmbeddingMatrix;
use xlate::trainer::{train_with, Checkpoint};
use xlate::xmap::{
    build_seed_lexicon, evaluate_translation, export_paired_projection, fit_gradient_descent, fit_least_squares,
    load_pairs, sample_pairs, translate, Aligned, FitMethod, Lexicon, ProjectionMatrix,
};
use xlate::{Error, Result};

#[derive(Parser)]
#[command(name = "xlate", version, about = "Train, evaluate and align word embeddings")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random choice
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training threads
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for outputs and run manifests
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override one configuration key, e.g. `--set epochs=1`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count words and write the vocabulary
    BuildVocab(InputArgs),
    /// Join collocations into underscore phrases
    Phrases(InputArgs),
    /// Train skip-gram vectors
    Train(TrainArgs),
    /// Score vectors on analogy questions
    EvalAnalogy(EvalAnalogyArgs),
    /// Fit a projection from source to target vectors
    FitMap(FitMapArgs),
    /// Translate words through a fitted projection
    Translate(TranslateArgs),
    /// Score a projection on a held-out lexicon
    EvalTranslation(MappedArgs),
    /// Export projected source and target vectors for plotting
    ExportProjection(MappedArgs),
    /// Report article, sentence, token and word-form counts
    CorpusStats(CorpusStatsArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Plain text, one sentence per line
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Existing vocabulary; built from the input when omitted
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Analogy questions scored after every epoch
    #[arg(long)]
    analogies: Option<PathBuf>,
}

#[derive(Args)]
struct EvalAnalogyArgs {
    #[arg(long)]
    questions: PathBuf,
    /// Word-vector text file
    #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    vectors: Option<PathBuf>,
    /// Training checkpoint; needs --vocab
    #[arg(long, requires = "vocab")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct FitMapArgs {
    /// Source-language vectors
    #[arg(long)]
    source: PathBuf,
    /// Target-language vectors
    #[arg(long)]
    target: PathBuf,
    /// `source<TAB>target` translation pairs
    #[arg(long)]
    lexicon: PathBuf,
}

#[derive(Args)]
struct MappedArgs {
    #[arg(long)]
    projection: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    projection: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Candidates per word
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(required = true)]
    words: Vec<String>,
}

#[derive(Args)]
struct CorpusStatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Drop articles with fewer words than this
    #[arg(long)]
    min_doc_words: Option<usize>,
    /// Also write the surviving articles to `filtered.txt`
    #[arg(long)]
    write_filtered: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BuildVocab(_) => "build-vocab",
            Command::Phrases(_) => "phrases",
            Command::Train(_) => "train",
            Command::EvalAnalogy(_) => "eval-analogy",
            Command::FitMap(_) => "fit-map",
            Command::Translate(_) => "translate",
            Command::EvalTranslation(_) => "eval-translation",
            Command::ExportProjection(_) => "export-projection",
            Command::CorpusStats(_) => "corpus-stats",
        }
    }
}

struct Run {
    cfg: Config,
    out: PathBuf,
    manifest: RunManifest,
    manifest_name: String,
}

impl Run {
    fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&mut self, label: &str, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.output(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest.output(label, &path)?;
        Ok(path)
    }

    fn record(&mut self, label: &str, path: &Path) -> Result<()> {
        self.manifest.output(label, path)
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config { key: kv.clone(), message: "expected KEY=VALUE".into() })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(w) = cli.workers {
        cfg.trainer.workers = w;
    }
    if let Command::CorpusStats(a) = &cli.command {
        if let Some(m) = a.min_doc_words {
            cfg.min_doc_words = m;
        }
    }
    if let Command::Translate(a) = &cli.command {
        if let Some(k) = a.k {
            cfg.translate_k = k;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let cfg = load_config(&cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let name = cli.command.name();
    let mut manifest = RunManifest::new(name);
    manifest.push("seed", cfg.seed().to_string());
    manifest.config(&cfg);
    if let Some(path) = &cli.config {
        manifest.input("config", path)?;
    }
    let mut run = Run {
        cfg,
        out: cli.out.clone(),
        manifest,
        manifest_name: format!("{name}.manifest.tsv"),
    };
    match &cli.command {
        Command::BuildVocab(a) => build_vocab(&mut run, a),
        Command::Phrases(a) => phrases(&mut run, a),
        Command::Train(a) => train_cmd(&mut run, a),
        Command::EvalAnalogy(a) => eval_analogy(&mut run, a),
        Command::FitMap(a) => fit_map(&mut run, a),
        Command::Translate(a) => translate_cmd(&mut run, a),
        Command::EvalTranslation(a) => eval_translation(&mut run, a),
        Command::ExportProjection(a) => export_projection(&mut run, a),
        Command::CorpusStats(a) => stats_cmd(&mut run, a),
    }?;
    run.manifest
        .push("wall_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    let path = run.output(&run.manifest_name);
    run.manifest.save(&path)
}

fn build_vocab_from(run: &mut Run, input: &Path) -> Result<(Vec<String>, Vocabulary)> {
    run.manifest.input("corpus", input)?;
    let lines = read_lines(input)?;
    let vocab = Vocabulary::build_from_lines(&lines, run.cfg.lowercase, run.cfg.min_count)?;
    Ok((lines, vocab))
}

fn build_vocab(run: &mut Run, a: &InputArgs) -> Result<()> {
    let (_, vocab) = build_vocab_from(run, &a.input)?;
    let path = run.output("vocab.txt");
    vocab.save(&path)?;
    run.record("vocab", &path)?;
    println!("{} words, {} tokens -> {}", vocab.len(), vocab.total_tokens(), path.display());
    Ok(())
}

fn phrases(run: &mut Run, a: &InputArgs) -> Result<()> {
    run.manifest.input("corpus", &a.input)?;
    let pcfg = run.cfg.phrase_config()?;
    let lines: Vec<Vec<String>> = read_lines(&a.input)?
        .iter()
        .map(|l| tokenize_line(l, run.cfg.lowercase))
        .collect();
    let output = run_phrase_pipeline(lines, &pcfg)?;
    let text: String = output.lines.iter().map(|l| l.join(" ") + "\n").collect();
    run.write("phrased", "phrased.txt", text)?;
    run.write("report", "phrases.tsv", output.render_report())?;
    println!("pass\tthreshold\tmerges\tngram_fraction");
    for p in &output.passes {
        println!("{}\t{}\t{}\t{:.4}", p.pass, p.threshold, p.merges, p.ngram_fraction());
    }
    Ok(())
}

fn train_cmd(run: &mut Run, a: &TrainArgs) -> Result<()> {
    let (lines, vocab) = match &a.vocab {
        Some(path) => {
            run.manifest.input("corpus", &a.input)?;
            run.manifest.input("vocab", path)?;
            (read_lines(&a.input)?, Vocabulary::load(path)?)
        }
        None => build_vocab_from(run, &a.input)?,
    };
    let questions = match &a.analogies {
        Some(path) => {
            run.manifest.input("analogies", path)?;
            Some(AnalogySet::load(path)?)
        }
        None => None,
    };
    let corpus = Corpus::encode(&lines, &vocab, run.cfg.lowercase);
    let ks = run.cfg.ks.clone();
    let mut log = String::from("epoch\tmean_loss\ttokens_per_sec");
    if questions.is_some() {
        ks.iter().for_each(|k| log.push_str(&format!("\tp@{k}")));
    }
    log.push('\n');
    let result = train_with(&corpus, &vocab, &run.cfg.trainer, |m, state| {
        let mut line = m.log_line();
        if let Some(q) = &questions {
            let matrix = state.embeddings(vocab.words())?;
            let report = evaluate(&filter_testable(q, &matrix), &matrix, &ks)?;
            for j in 0..report.ks.len() {
                match report.overall.precision(j) {
                    Some(p) => line.push_str(&format!("\t{p:.4}")),
                    None => line.push_str("\tn/a"),
                }
            }
        }
        eprintln!("{line}");
        log.push_str(&line);
        log.push('\n');
        Ok(())
    })?;
    let vocab_path = run.output("vocab.txt");
    vocab.save(&vocab_path)?;
    run.record("vocab", &vocab_path)?;
    let ckpt = Checkpoint {
        vocab_digest: vocab.digest(),
        manifest: Some(run.manifest_name.clone()),
        config: run.cfg.entries().into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        state: result.state,
    };
    let ckpt_path = run.output("model.ckpt");
    ckpt.save(&ckpt_path)?;
    run.record("checkpoint", &ckpt_path)?;
    let matrix = ckpt.state.embeddings(vocab.words())?;
    let vec_path = run.output("vectors.txt");
    matrix.save_text(&vec_path)?;
    run.record("vectors", &vec_path)?;
    let bin_path = run.output("vectors.bin");
    let f = fs::File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    matrix.write_binary(f)?;
    run.record("vectors_bin", &bin_path)?;
    run.write("train_log", "train_log.tsv", log)?;
    println!(
        "{} words, {} tokens per epoch, {} epochs -> {}",
        vocab.len(),
        corpus.token_count(),
        run.cfg.trainer.epochs,
        ckpt_path.display()
    );
    Ok(())
}

fn load_vectors(run: &mut Run, label: &str, path: &Path) -> Result<EmbeddingMatrix> {
    run.manifest.input(label, path)?;
    EmbeddingMatrix::load_text(path)
}

fn eval_analogy(run: &mut Run, a: &EvalAnalogyArgs) -> Result<()> {
    run.manifest.input("questions", &a.questions)?;
    let matrix = match (&a.vectors, &a.checkpoint, &a.vocab) {
        (Some(v), _, _) => load_vectors(run, "vectors", v)?,
        (None, Some(c), Some(v)) => {
            run.manifest.input("checkpoint", c)?;
            run.manifest.input("vocab", v)?;
            let ckpt = Checkpoint::load(c)?;
            let vocab = Vocabulary::load(v)?;
            if ckpt.vocab_digest != vocab.digest() {
                return Err(Error::Mismatch(format!(
                    "checkpoint {} was trained on a different vocabulary than {}",
                    c.display(),
                    v.display()
                )));
            }
            ckpt.state.embeddings(vocab.words())?
        }
        _ => unreachable!("clap enforces --vectors or --checkpoint with --vocab"),
    };
    let set = AnalogySet::load(&a.questions)?;
    let report = evaluate(&filter_testable(&set, &matrix), &matrix, &run.cfg.ks)?;
    run.write("report", "analogy.tsv", report.render_tsv())?;
    print!("{}", report.render_table());
    Ok(())
}

fn fit_map(run: &mut Run, a: &FitMapArgs) -> Result<()> {
    let src = load_vectors(run, "source", &a.source)?;
    let tgt = load_vectors(run, "target", &a.target)?;
    run.manifest.input("lexicon", &a.lexicon)?;
    let pairs = load_pairs(&a.lexicon)?;
    let m = &run.cfg.mapping;
    let split = build_seed_lexicon(&pairs, &src, &tgt, m.train_size, m.test_size)?;
    eprintln!(
        "{} train / {} test pairs; dropped {} out-of-vocabulary, {} duplicate",
        split.train.len(),
        split.test.len(),
        split.dropped_oov,
        split.dropped_duplicate
    );
    let data = Aligned::from_lexicon(&split.train, &src, &tgt)?;
    let mut proj = match run.cfg.map_method {
        FitMethod::GradientDescent => fit_gradient_descent(&data, m)?,
        FitMethod::LeastSquares => fit_least_squares(&data)?,
    };
    proj.source_digest = src.digest();
    proj.target_digest = tgt.digest();
    proj.manifest = Some(run.manifest_name.clone());
    let d = &proj.diagnostics;
    run.manifest.push("fit.initial_loss", d.initial_loss.to_string());
    run.manifest.push("fit.final_loss", d.final_loss.to_string());
    run.manifest.push("fit.iterations", d.iterations.to_string());
    run.manifest.push("fit.ridge", d.ridge.to_string());
    println!(
        "{}: loss {:.6e} -> {:.6e} after {} iterations",
        d.method.as_str(),
        d.initial_loss,
        d.final_loss,
        d.iterations
    );
    let path = run.output("projection.txt");
    proj.save(&path)?;
    run.record("projection", &path)?;
    for (label, lex) in [("train_lexicon", &split.train), ("test_lexicon", &split.test)] {
        let path = run.output(&format!("{label}.tsv"));
        lex.save(&path)?;
        run.record(label, &path)?;
    }
    Ok(())
}

fn load_mapped(run: &mut Run, projection: &Path, source: &Path, target: &Path) -> Result<(ProjectionMatrix, EmbeddingMatrix, EmbeddingMatrix)> {
    run.manifest.input("projection", projection)?;
    let proj = ProjectionMatrix::load(projection)?;
    let src = load_vectors(run, "source", source)?;
    let tgt = load_vectors(run, "target", target)?;
    for (side, expected, m) in [("source", &proj.source_digest, &src), ("target", &proj.target_digest, &tgt)] {
        if !expected.is_empty() && *expected != m.digest() {
            return Err(Error::Mismatch(format!("projection was fit on a different {side} vocabulary")));
        }
    }
    Ok((proj, src, tgt))
}

fn translate_cmd(run: &mut Run, a: &TranslateArgs) -> Result<()> {
    let (proj, src, tgt) = load_mapped(run, &a.projection, &a.source, &a.target)?;
    let mut out = String::from("word\trank\tcandidate\tcosine\n");
    for word in &a.words {
        for (rank, (cand, cos)) in translate(word, &proj, &src, &tgt, run.cfg.translate_k)?.iter().enumerate() {
            out.push_str(&format!("{word}\t{}\t{cand}\t{cos:.6}\n", rank + 1));
        }
    }
    run.write("translations", "translations.tsv", &out)?;
    print!("{out}");
    Ok(())
}

fn eval_translation(run: &mut Run, a: &MappedArgs) -> Result<()> {
    let (proj, src, tgt) = load_mapped(run, &a.projection, &a.source, &a.target)?;
    run.manifest.input("lexicon", &a.lexicon)?;
    let lex = Lexicon::load(&a.lexicon)?;
    let report = evaluate_translation(&lex, &proj, &src, &tgt, &run.cfg.ks)?;
    if report.unresolved > 0 {
        eprintln!("{} test pairs skipped: word not in the embeddings", report.unresolved);
    }
    run.write("report", "translation.tsv", report.render())?;
    print!("{}", report.render());
    Ok(())
}

fn export_projection(run: &mut Run, a: &MappedArgs) -> Result<()> {
    let (proj, src, tgt) = load_mapped(run, &a.projection, &a.source, &a.target)?;
    run.manifest.input("lexicon", &a.lexicon)?;
    let lex = Lexicon::load(&a.lexicon)?;
    let sample = sample_pairs(&lex, run.cfg.export_sample, run.cfg.mapping.seed);
    let path = run.output("projection_pairs.tsv");
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    export_paired_projection(&sample, &proj, &src, &tgt, f)?;
    run.record("pairs", &path)?;
    println!("{} pairs -> {}", sample.len(), path.display());
    Ok(())
}

fn stats_cmd(run: &mut Run, a: &CorpusStatsArgs) -> Result<()> {
    run.manifest.input("corpus", &a.input)?;
    let lines = read_lines(&a.input)?;
    let min = run.cfg.min_doc_words as u64;
    let stats = if a.write_filtered {
        let mut buf = Vec::new();
        let stats = corpus_stats(&lines, run.cfg.lowercase, min, Some(&mut buf))?;
        run.write("filtered", "filtered.txt", buf)?;
        stats
    } else {
        corpus_stats(&lines, run.cfg.lowercase, min, None)?
    };
    run.write("stats", "corpus_stats.tsv", stats.render())?;
    print!("{}", stats.render());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
