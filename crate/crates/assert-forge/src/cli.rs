//! Command-line pipeline: mine -> build-vocab -> pretrain-prep -> pretrain ->
//! finetune -> generate -> evaluate -> augment. Every run writes a manifest
//! into its output directory for reproducibility.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::augmentation::{self, AugmentReportRow, CandidateRecord};
use crate::evaluation;
use crate::generation::{self, GenerationConfig, GenerationRecord};
use crate::manifest::RunManifest;
use crate::mining::{self, SourceMode};
use crate::model::{ModelConfig, Parameters, Scalar};
use crate::noising::{self, CorruptionConfig, NoiseMode};
use crate::textprep::{self, Vocabulary};
use crate::training::{self, OptimizerConfig, RunConfig};

#[derive(Parser)]
#[command(
    name = "assert-forge",
    version,
    about = "Mine Java test-assert pairs, train a denoising seq2seq model, and generate asserts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine Test-Assert Pairs from a tree of Java files
    Mine(MineArgs),
    /// Train the shared byte-level BPE vocabulary
    BuildVocab(BuildVocabArgs),
    /// Corrupt a corpus into (source, target) denoising pairs
    PretrainPrep(PretrainPrepArgs),
    /// Denoising pretraining on prepared pairs
    Pretrain(TrainCommandArgs),
    /// Finetune on mined Test-Assert Pairs as a translation task
    Finetune(FinetuneArgs),
    /// Beam-search decode ranked assert candidates
    Generate(GenerateArgs),
    /// Score candidates: top-k accuracy, BLEU4, syntax correctness
    Evaluate(EvaluateArgs),
    /// Insert generated asserts into existing test methods
    Augment(AugmentArgs),
}

#[derive(Args)]
struct MineArgs {
    /// Directory tree of .java files to mine
    #[arg(long)]
    src_dir: PathBuf,
    /// Output directory for train/valid/test JSONL
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra directory of production classes for focal-method lookup
    #[arg(long)]
    focal_dir: Option<PathBuf>,
    /// Emit sources without the focal method (auto-completion corpus)
    #[arg(long, default_value_t = false)]
    no_focal: bool,
}

#[derive(Args)]
struct BuildVocabArgs {
    /// Corpus: a directory of text files, a JSONL of source/target records,
    /// or a plain file of one document per line
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 8192)]
    vocab_size: u32,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PretrainPrepArgs {
    /// Corpus: directory (one document per file) or file (one per line)
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.30)]
    mask_rate: f64,
    #[arg(long = "lambda", default_value_t = 3.0)]
    poisson_lambda: f64,
    #[arg(long, default_value_t = 0.20)]
    delete_rate: f64,
    #[arg(long, default_value_t = 0.50)]
    rotate_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    max_len: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    English,
    Code,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Scratch,
    English,
    Code,
    #[value(name = "english+code")]
    EnglishCode,
}

#[derive(Args)]
struct TrainCommonArgs {
    /// Flat key=value config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    /// Checkpoint to initialize from (enables pretrained variants)
    #[arg(long)]
    init_checkpoint: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    micro_batch: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    base_lr: Option<f64>,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    precision: PrecisionArg,
}

#[derive(Args)]
struct TrainCommandArgs {
    #[command(flatten)]
    common: TrainCommonArgs,
}

#[derive(Args)]
struct FinetuneArgs {
    #[command(flatten)]
    common: TrainCommonArgs,
    /// Pretraining lineage of the initialization checkpoint
    #[arg(long, value_enum, default_value_t = VariantArg::Scratch)]
    variant: VariantArg,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// JSONL with a `source` field per line
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    beam: usize,
    #[arg(long, default_value_t = 96)]
    max_decode_len: usize,
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
    precision: PrecisionArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Generation output JSONL (source, candidates[])
    #[arg(long)]
    candidates: PathBuf,
    /// Reference JSONL with a `target` field per line, aligned by line
    #[arg(long)]
    targets: PathBuf,
    /// Validation loss to record in the report, when known
    #[arg(long)]
    valid_loss: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Directory of .java files holding the tests to augment
    #[arg(long)]
    tests_dir: PathBuf,
    /// JSONL of {method, candidates[]} records
    #[arg(long)]
    candidates: PathBuf,
    /// Directory of focal classes used for identifier-scope checks
    #[arg(long)]
    focal_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Report file name written into the output directory
    #[arg(long, default_value = "report.json")]
    report: String,
}

/// Parse and run. Exit status: 0 success, 1 domain error, 2 usage error.
pub fn dispatch<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let argv = std::iter::once("assert-forge".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    let result = match cli.command {
        Command::Mine(a) => run_mine(a),
        Command::BuildVocab(a) => run_build_vocab(a),
        Command::PretrainPrep(a) => run_pretrain_prep(a),
        Command::Pretrain(a) => run_train(a.common, "pretrain", None),
        Command::Finetune(a) => {
            let variant = match a.variant {
                VariantArg::Scratch => "scratch",
                VariantArg::English => "english",
                VariantArg::Code => "code",
                VariantArg::EnglishCode => "english+code",
            };
            run_train(a.common, "finetune", Some(variant))
        }
        Command::Generate(a) => run_generate(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Augment(a) => run_augment(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run_mine(args: MineArgs) -> Result<()> {
    let mut manifest = RunManifest::new("mine");
    manifest.digest_input("src_dir", &args.src_dir)?;
    if let Some(focal) = &args.focal_dir {
        manifest.digest_input("focal_dir", focal)?;
    }
    manifest.set_display("seed", args.seed);
    manifest.set_display("no_focal", args.no_focal);

    let report = mining::mine_directory(&args.src_dir, args.focal_dir.as_deref())?;
    let split = mining::split_corpus(report.taps, (0.80, 0.10, 0.10), args.seed)?;
    fs::create_dir_all(&args.out_dir)?;
    let mode = if args.no_focal {
        SourceMode::TestOnly
    } else {
        SourceMode::WithFocal
    };
    mining::write_jsonl(&split.train, &args.out_dir.join("train.jsonl"), mode)?;
    mining::write_jsonl(&split.valid, &args.out_dir.join("valid.jsonl"), mode)?;
    mining::write_jsonl(&split.test, &args.out_dir.join("test.jsonl"), mode)?;

    manifest.set_display("files_parsed", report.files_parsed);
    manifest.set_display("files_skipped", report.files_skipped);
    manifest.set_display("candidates", report.candidates);
    manifest.set_display("unresolved_focal", report.unresolved_focal);
    manifest.set_display(
        "pairs",
        split.train.len() + split.valid.len() + split.test.len(),
    );
    manifest.finish(&args.out_dir)?;
    println!(
        "mined {} pairs ({} train / {} valid / {} test), {} unmappable",
        split.train.len() + split.valid.len() + split.test.len(),
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        report.unresolved_focal
    );
    Ok(())
}

fn corpus_texts(input: &Path) -> Result<Vec<String>> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = walkdir::WalkDir::new(input)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .collect();
        files.sort();
        let mut texts = Vec::new();
        for f in files {
            texts.push(fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?);
        }
        Ok(texts)
    } else if input.extension().map(|e| e == "jsonl").unwrap_or(false) {
        let records = mining::read_jsonl(input)?;
        let mut texts = Vec::new();
        for r in records {
            texts.push(r.source);
            texts.push(r.target);
        }
        Ok(texts)
    } else {
        let text = fs::read_to_string(input)?;
        Ok(text.lines().map(|l| l.to_string()).collect())
    }
}

fn run_build_vocab(args: BuildVocabArgs) -> Result<()> {
    let mut manifest = RunManifest::new("build-vocab");
    manifest.digest_input("input", &args.input)?;
    manifest.set_display("vocab_size", args.vocab_size);

    let texts = corpus_texts(&args.input)?;
    let vocab = textprep::train_vocab(texts.iter(), args.vocab_size)?;
    fs::create_dir_all(&args.out_dir)?;
    vocab.save(&args.out_dir.join("vocab.txt"))?;
    manifest.set("vocab_digest", &vocab.digest());
    manifest.set_display("learned_merges", vocab.merges().len());
    manifest.finish(&args.out_dir)?;
    println!(
        "trained vocabulary: {} tokens ({} merges), digest {}",
        vocab.size(),
        vocab.merges().len(),
        &vocab.digest()[..12]
    );
    Ok(())
}

fn run_pretrain_prep(args: PretrainPrepArgs) -> Result<()> {
    let mut manifest = RunManifest::new("pretrain-prep");
    manifest.digest_input("input", &args.input)?;
    manifest.digest_input("vocab", &args.vocab)?;
    let cfg = CorruptionConfig {
        mode: match args.mode {
            ModeArg::English => NoiseMode::English,
            ModeArg::Code => NoiseMode::Code,
        },
        mask_rate: args.mask_rate,
        poisson_lambda: args.poisson_lambda,
        delete_rate: args.delete_rate,
        rotate_fraction: args.rotate_fraction,
        permute_sentences: matches!(args.mode, ModeArg::English),
        seed: args.seed,
    };
    cfg.validate().map_err(|e| anyhow!(e))?;
    for (k, v) in [
        ("mask_rate", cfg.mask_rate),
        ("poisson_lambda", cfg.poisson_lambda),
        ("delete_rate", cfg.delete_rate),
        ("rotate_fraction", cfg.rotate_fraction),
    ] {
        manifest.set_display(k, v);
    }
    manifest.set_display("seed", args.seed);
    manifest.set_display("max_len", args.max_len);

    let vocab = Vocabulary::load(&args.vocab)?;
    let texts = corpus_texts(&args.input)?;
    let docs: Vec<_> = texts
        .iter()
        .filter(|t| !t.trim().is_empty())
        .map(|t| textprep::encode(t, &vocab))
        .collect();
    let pairs = noising::noise_corpus(&docs, &vocab, &cfg, args.max_len);
    fs::create_dir_all(&args.out_dir)?;
    noising::write_pairs_jsonl(&pairs, &args.out_dir.join("pairs.jsonl"))?;
    manifest.set_display("documents", pairs.len());
    manifest.finish(&args.out_dir)?;
    println!("prepared {} denoising pairs", pairs.len());
    Ok(())
}

fn load_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("bad config line `{line}` (expected key=value)"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn kv_parse<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Option<T> {
    kv.get(key).and_then(|v| v.parse().ok())
}

/// Training entry shared by `pretrain` and `finetune`; the two differ only
/// in corpus format and manifest labeling.
fn run_train(args: TrainCommonArgs, subcommand: &str, variant: Option<&str>) -> Result<()> {
    let mut manifest = RunManifest::new(subcommand);
    manifest.digest_input("train", &args.train)?;
    if let Some(valid) = &args.valid {
        manifest.digest_input("valid", valid)?;
    }
    manifest.digest_input("vocab", &args.vocab)?;
    if let Some(ckpt) = &args.init_checkpoint {
        manifest.digest_input("init_checkpoint", ckpt)?;
    }
    if let Some(variant) = variant {
        manifest.set("variant", variant);
        if variant != "scratch" && args.init_checkpoint.is_none() {
            bail!("--variant {variant} requires --init-checkpoint with the matching pretraining lineage");
        }
    }
    manifest.set_display("seed", args.seed);

    let vocab = Vocabulary::load(&args.vocab)?;
    let kv = match &args.config {
        Some(path) => load_kv(path)?,
        None => BTreeMap::new(),
    };

    // model configuration: the init checkpoint pins the architecture,
    // otherwise config-file keys override desk defaults
    let mcfg = if let Some(ckpt) = &args.init_checkpoint {
        let m = crate::model::checkpoint::read_manifest(ckpt)?;
        let cfg = training::config_from_manifest(&m)?;
        if let Some(digest) = m.get("vocab_digest") {
            if digest != &vocab.digest() {
                bail!(
                    "vocabulary digest mismatch: checkpoint has {digest}, --vocab is {}",
                    vocab.digest()
                );
            }
        }
        cfg
    } else {
        let mut cfg = ModelConfig::desk(vocab.size());
        if let Some(v) = kv_parse(&kv, "enc_layers") {
            cfg.enc_layers = v;
        }
        if let Some(v) = kv_parse(&kv, "dec_layers") {
            cfg.dec_layers = v;
        }
        if let Some(v) = kv_parse(&kv, "d_model") {
            cfg.d_model = v;
        }
        if let Some(v) = kv_parse(&kv, "n_heads") {
            cfg.n_heads = v;
        }
        if let Some(v) = kv_parse(&kv, "d_ff") {
            cfg.d_ff = v;
        }
        if let Some(v) = kv_parse(&kv, "max_len") {
            cfg.max_len = v;
        }
        if let Some(v) = kv_parse(&kv, "dropout") {
            cfg.dropout = v;
        }
        cfg
    };
    mcfg.validate()?;

    let mut opt = OptimizerConfig::default();
    if let Some(v) = kv_parse(&kv, "base_lr") {
        opt.base_lr = v;
    }
    if let Some(v) = kv_parse(&kv, "warmup_steps") {
        opt.warmup_steps = v;
    }
    if let Some(v) = kv_parse(&kv, "accum_freq") {
        opt.accum_freq = v;
    }
    if let Some(v) = kv_parse(&kv, "patience") {
        opt.patience = v;
    }
    if let Some(v) = args.base_lr {
        opt.base_lr = v;
    }
    if let Some(v) = args.warmup {
        opt.warmup_steps = v;
    }
    if let Some(v) = args.patience {
        opt.patience = v;
    }
    opt.validate().map_err(|e| anyhow!(e))?;

    let mut run = RunConfig {
        seed: args.seed,
        ..RunConfig::default()
    };
    if let Some(v) = kv_parse(&kv, "micro_batch") {
        run.micro_batch = v;
    }
    if let Some(v) = args.micro_batch {
        run.micro_batch = v;
    }
    run.max_steps = args.max_steps.or_else(|| kv_parse(&kv, "max_steps"));
    run.max_epochs = args.max_epochs.or_else(|| kv_parse(&kv, "max_epochs"));

    for (k, v) in [
        ("d_model", mcfg.d_model.to_string()),
        ("enc_layers", mcfg.enc_layers.to_string()),
        ("dec_layers", mcfg.dec_layers.to_string()),
        ("micro_batch", run.micro_batch.to_string()),
        ("base_lr", opt.base_lr.to_string()),
        ("warmup_steps", opt.warmup_steps.to_string()),
        ("accum_freq", opt.accum_freq.to_string()),
        ("patience", opt.patience.to_string()),
    ] {
        manifest.set(k, &v);
    }

    let (train_set, valid_set) = load_examples(subcommand, &args, &vocab, &mcfg)?;
    let report = match args.precision {
        PrecisionArg::F32 => {
            manifest.set("precision", "f32");
            train_typed::<f32>(&args, &mcfg, &opt, &run, &vocab, train_set, valid_set)?
        }
        PrecisionArg::F64 => {
            manifest.set("precision", "f64");
            train_typed::<f64>(&args, &mcfg, &opt, &run, &vocab, train_set, valid_set)?
        }
    };
    manifest.set_display("steps", report.steps);
    manifest.set_display("epochs", report.epochs);
    manifest.set_display("best_val_loss", report.best_val_loss);
    manifest.set("stop_reason", &format!("{:?}", report.stop_reason));
    manifest.finish(&args.out_dir)?;
    println!(
        "{subcommand} finished: {} steps, {} epochs, best validation loss {:.4} ({:?})",
        report.steps, report.epochs, report.best_val_loss, report.stop_reason
    );
    Ok(())
}

fn load_examples(
    subcommand: &str,
    args: &TrainCommonArgs,
    vocab: &Vocabulary,
    mcfg: &ModelConfig,
) -> Result<(Vec<crate::model::Example>, Vec<crate::model::Example>)> {
    let load = |path: &Path| -> Result<Vec<crate::model::Example>> {
        if subcommand == "pretrain" {
            let records = noising::read_pairs_jsonl(path)?;
            let pairs: Vec<(Vec<u32>, Vec<u32>)> = records
                .into_iter()
                .map(|r| (r.source_ids, r.target_ids))
                .collect();
            Ok(training::examples_from_id_pairs(&pairs, mcfg.max_len))
        } else {
            let records = mining::read_jsonl(path)?;
            let pairs: Vec<(String, String)> =
                records.into_iter().map(|r| (r.source, r.target)).collect();
            Ok(training::examples_from_text_pairs(
                &pairs,
                vocab,
                mcfg.max_len,
            ))
        }
    };
    let train_set = load(&args.train)?;
    let valid_set = match &args.valid {
        Some(path) => load(path)?,
        None => Vec::new(),
    };
    Ok((train_set, valid_set))
}

fn train_typed<T: Scalar>(
    args: &TrainCommonArgs,
    mcfg: &ModelConfig,
    opt: &OptimizerConfig,
    run: &RunConfig,
    vocab: &Vocabulary,
    train_set: Vec<crate::model::Example>,
    valid_set: Vec<crate::model::Example>,
) -> Result<training::TrainReport> {
    let mut params: Parameters<T> = match &args.init_checkpoint {
        Some(ckpt) => {
            let (_, params, _, _) = training::load_train_checkpoint::<T>(ckpt)?;
            params
        }
        None => Parameters::init(mcfg, args.seed),
    };
    let (report, _best) = training::train(
        mcfg,
        &mut params,
        opt,
        run,
        &train_set,
        &valid_set,
        Some(&args.out_dir),
        &vocab.digest(),
    )?;
    Ok(report)
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let parent = out_parent(&args.out);
    let mut manifest = RunManifest::new("generate");
    manifest.digest_input("checkpoint", &args.checkpoint)?;
    manifest.digest_input("vocab", &args.vocab)?;
    manifest.digest_input("input", &args.input)?;
    for (k, v) in [
        ("k", args.k),
        ("beam", args.beam),
        ("max_decode_len", args.max_decode_len),
    ] {
        manifest.set_display(k, v);
    }
    manifest.set_display("alpha", args.alpha);

    let vocab = Vocabulary::load(&args.vocab)?;
    let gen_cfg = GenerationConfig {
        beam_width: args.beam,
        k: args.k,
        max_decode_len: args.max_decode_len,
        length_penalty: args.alpha,
    };
    let records = mining::read_jsonl(&args.input)?;
    let sources: Vec<String> = records.into_iter().map(|r| r.source).collect();

    let outputs = match args.precision {
        PrecisionArg::F32 => generate_typed::<f32>(&args, &vocab, &gen_cfg, &sources)?,
        PrecisionArg::F64 => generate_typed::<f64>(&args, &vocab, &gen_cfg, &sources)?,
    };
    let mut w = std::io::BufWriter::new(fs::File::create(&args.out)?);
    for record in &outputs {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    manifest.set_display("sources", outputs.len());
    manifest.finish(&parent)?;
    println!("generated candidates for {} sources", outputs.len());
    Ok(())
}

fn out_parent(out: &Path) -> PathBuf {
    out.parent()
        .map(|p| p.to_path_buf())
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn generate_typed<T: Scalar>(
    args: &GenerateArgs,
    vocab: &Vocabulary,
    gen_cfg: &GenerationConfig,
    sources: &[String],
) -> Result<Vec<GenerationRecord>> {
    let (mcfg, params, _, manifest) = training::load_train_checkpoint::<T>(&args.checkpoint)?;
    if let Some(digest) = manifest.get("vocab_digest") {
        if digest != &vocab.digest() {
            bail!(
                "vocabulary digest mismatch: checkpoint has {digest}, --vocab is {}",
                vocab.digest()
            );
        }
    }
    let mut out = Vec::with_capacity(sources.len());
    for source in sources {
        let candidates = generation::generate_top_k(&mcfg, &params, source, vocab, gen_cfg)?;
        out.push(GenerationRecord {
            source: source.clone(),
            candidates,
        });
    }
    Ok(out)
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let parent = out_parent(&args.out);
    let mut manifest = RunManifest::new("evaluate");
    manifest.digest_input("candidates", &args.candidates)?;
    manifest.digest_input("targets", &args.targets)?;

    let cand_text = fs::read_to_string(&args.candidates)?;
    let mut candidates: Vec<Vec<String>> = Vec::new();
    for line in cand_text.lines().filter(|l| !l.trim().is_empty()) {
        let record: GenerationRecord = serde_json::from_str(line)?;
        candidates.push(record.candidates);
    }
    let targets: Vec<String> = mining::read_jsonl(&args.targets)?
        .into_iter()
        .map(|r| r.target)
        .collect();

    let report = evaluation::evaluate(&candidates, &targets, args.valid_loss)?;
    fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    print!("{}", evaluation::render_report(&report));
    manifest.set_display("n", report.n);
    manifest.finish(&parent)?;
    Ok(())
}

fn run_augment(args: AugmentArgs) -> Result<()> {
    let mut manifest = RunManifest::new("augment");
    manifest.digest_input("tests_dir", &args.tests_dir)?;
    manifest.digest_input("candidates", &args.candidates)?;
    if let Some(focal) = &args.focal_dir {
        manifest.digest_input("focal_dir", focal)?;
    }

    let cand_text = fs::read_to_string(&args.candidates)?;
    let mut by_method: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in cand_text.lines().filter(|l| !l.trim().is_empty()) {
        let record: CandidateRecord = serde_json::from_str(line)?;
        by_method.insert(record.method, record.candidates);
    }

    let focal_source = match &args.focal_dir {
        Some(dir) => {
            let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
                .into_iter()
                .filter_map(|e| e.ok())
                .filter(|e| e.file_type().is_file())
                .map(|e| e.into_path())
                .collect();
            files.sort();
            let mut text = String::new();
            for f in files {
                text.push_str(&fs::read_to_string(f)?);
                text.push('\n');
            }
            text
        }
        None => String::new(),
    };

    fs::create_dir_all(&args.out_dir)?;
    let mut rows: Vec<AugmentReportRow> = Vec::new();
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(&args.tests_dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().map(|x| x == "java").unwrap_or(false))
        .collect();
    files.sort();
    for path in files {
        let source = fs::read_to_string(&path)?;
        let classes =
            mining::parse_java(&source).with_context(|| format!("parsing {}", path.display()))?;
        // splice augmented methods back, last span first so offsets hold
        let mut edits: Vec<(crate::java::Span, String)> = Vec::new();
        for class in &classes {
            for method in &class.methods {
                let Some(cands) = by_method.get(&method.name) else {
                    continue;
                };
                let result = augmentation::augment_test(&method.body_text, cands, &focal_source)?;
                rows.push(AugmentReportRow {
                    method: method.name.clone(),
                    chosen: result.chosen_assert.clone(),
                    augmented: result.augmented_test.is_some(),
                    rejected: result.rejected,
                });
                if let Some(new_text) = result.augmented_test {
                    edits.push((method.span, new_text));
                }
            }
        }
        let mut out_source = source.clone();
        edits.sort_by_key(|(span, _)| std::cmp::Reverse(span.start));
        for (span, text) in edits {
            out_source.replace_range(span.start..span.end, &text);
        }
        let file_name = path.file_name().expect("file has a name");
        fs::write(args.out_dir.join(file_name), out_source)?;
    }

    fs::write(
        args.out_dir.join(&args.report),
        serde_json::to_string_pretty(&rows)?,
    )?;
    let augmented = rows.iter().filter(|r| r.augmented).count();
    manifest.set_display("tests_seen", rows.len());
    manifest.set_display("tests_augmented", augmented);
    manifest.finish(&args.out_dir)?;
    println!("augmented {augmented} of {} tests", rows.len());
    Ok(())
}
