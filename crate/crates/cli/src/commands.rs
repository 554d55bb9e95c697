use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tasc::corpus::{load_corpus, tokenize_corpus, Side, TaskCorpus};
use tasc::drafter::{build_corpus_drafter, build_prompt_drafter, CorpusDrafter, MixedDrafter};
use tasc::metrics::{predictor_report, variability_report, Normalization, PredictorSeries, VariabilityReport};
use tasc::specdec::{
    generate_batch, greedy_decode, modeled_speedup, read_requests, read_responses, write_responses, write_trace,
    AccelerationReport, AdversarialDrafter, DecodeConfig, DraftSource, Generation, NGramTarget, OfflineTarget,
    OracleDrafter, RandomLogitTarget, TargetModel,
};
use tasc::tokenizer::{
    budget_sweep, compression_report, enrich_vocabulary, BaseKind, BaseTokenizer, CompressionReport, MergeCandidate,
};
use tasc::{TokenId, Vocabulary};

use crate::config::RunConfig;
use crate::Failure;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::input(format!("stdout: {e}")))
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| io_failure(path, e))
}

fn load(path: &Path, cfg: &RunConfig) -> Result<TaskCorpus, Failure> {
    Ok(load_corpus(path, cfg.corpus_format)?)
}

fn load_vocab(path: Option<&Path>) -> Result<Vocabulary, Failure> {
    Ok(match path {
        Some(p) => Vocabulary::load(p)?,
        None => Vocabulary::bytes(),
    })
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Corpus file.
    pub corpus: PathBuf,
    /// Word n-gram order.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// `none`, `lower` or `lower+strip-punct`.
    #[arg(long, default_value = "none")]
    pub normalization: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    corpus: &'a str,
    documents: usize,
    report: VariabilityReport,
}

pub fn analyze(cfg: &RunConfig, args: &AnalyzeArgs) -> Result<(), Failure> {
    let corpus = load(&args.corpus, cfg)?;
    let norm: Normalization = args.normalization.parse()?;
    let report = variability_report(&corpus, args.n, norm, cfg.mass)?;
    eprintln!(
        "{}: H_in {:.3} bits, H_out {:.3} bits, cov_in {} / cov_out {}",
        corpus.id, report.input_entropy, report.output_entropy, report.input_cov80, report.output_cov80
    );
    emit(
        args.out.as_deref(),
        &json(&AnalyzeOutput {
            corpus: &corpus.id,
            documents: corpus.len(),
            report,
        }),
    )
}

#[derive(Args)]
pub struct AugmentArgs {
    /// Corpus file; merges are mined from the output side.
    pub corpus: PathBuf,
    /// Base tokenizer: `bytes`, `whitespace` or `bpe`.
    #[arg(long, default_value = "bytes")]
    pub base: String,
    /// BPE `vocab.json` (with `--base bpe`).
    #[arg(long)]
    pub bpe_vocab: Option<PathBuf>,
    /// BPE `merges.txt` (with `--base bpe`).
    #[arg(long)]
    pub bpe_merges: Option<PathBuf>,
    /// Minimum piece count for the whitespace base.
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
    /// Write the enriched vocabulary here.
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    /// Comma-separated budgets; emits one CSV row per budget instead of the
    /// JSON report.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LedgerEntry {
    id: Option<TokenId>,
    ngram: Vec<TokenId>,
    string: String,
    freq: u64,
    reward: u64,
    pcs: f64,
}

#[derive(Serialize)]
struct AugmentOutput<'a> {
    corpus: &'a str,
    config: &'a RunConfig,
    base_kind: BaseKind,
    base_size: usize,
    vocab_size: usize,
    requested: usize,
    added: usize,
    exhausted: bool,
    compression: CompressionReport,
    accepted: Vec<LedgerEntry>,
    rejected: Vec<LedgerEntry>,
    total_tokens: Vec<u64>,
}

fn base_tokenizer(args: &AugmentArgs, corpus: &TaskCorpus) -> Result<BaseTokenizer, Failure> {
    let kind: BaseKind = args.base.parse()?;
    Ok(match kind {
        BaseKind::Bytes => BaseTokenizer::bytes(),
        BaseKind::Whitespace => {
            BaseTokenizer::whitespace_from_texts(corpus.texts(Side::Output).map(str::as_bytes), args.min_count)
        }
        BaseKind::Bpe => match (&args.bpe_vocab, &args.bpe_merges) {
            (Some(v), Some(m)) => BaseTokenizer::load_bpe(v, m)?,
            _ => return Err(Failure::input("--base bpe needs --bpe-vocab and --bpe-merges")),
        },
    })
}

fn ledger(vocab: &Vocabulary, items: &[MergeCandidate]) -> Result<Vec<LedgerEntry>, Failure> {
    items
        .iter()
        .map(|c| {
            let bytes = vocab.decode(&c.ngram)?;
            Ok(LedgerEntry {
                id: vocab.find_added(&c.ngram),
                ngram: c.ngram.clone(),
                string: String::from_utf8_lossy(&bytes).into_owned(),
                freq: c.freq,
                reward: c.reward,
                pcs: c.pcs,
            })
        })
        .collect()
}

/// Lossless round trip on every output, and per-merge savings within the
/// reward bound when counts are refreshed after each merge.
fn check_augmentation(
    corpus: &TaskCorpus,
    vocab: &Vocabulary,
    accepted: &[MergeCandidate],
    totals: &[u64],
    fresh_counts: bool,
) -> Result<(), Failure> {
    for (i, text) in corpus.texts(Side::Output).enumerate() {
        let tokens = vocab.encode(text.as_bytes())?;
        if vocab.decode(&tokens)? != text.as_bytes() {
            return Err(Failure::invariant(format!("document {i} does not round-trip")));
        }
    }
    for (i, w) in totals.windows(2).enumerate() {
        if w[1] > w[0] {
            return Err(Failure::invariant(format!("merge {i} increased the token count")));
        }
        if fresh_counts && w[0] - w[1] > accepted[i].reward {
            return Err(Failure::invariant(format!("merge {i} saved more than its reward")));
        }
    }
    Ok(())
}

pub fn augment(cfg: &RunConfig, args: &AugmentArgs, check: bool) -> Result<(), Failure> {
    let corpus = load(&args.corpus, cfg)?;
    let base = Vocabulary::new(base_tokenizer(args, &corpus)?);
    let mut aug = cfg.augmentation();
    if let Some(&max) = args.sweep.iter().max() {
        aug.budget = max.max(1);
    }
    let outcome = enrich_vocabulary(&corpus, &base, &aug)?;
    let vocab = &outcome.vocab;
    let added = vocab.added_tokens().len();
    if added < aug.budget {
        eprintln!(
            "tasc: warning: only {added} of {} tokens added; candidate pool exhausted",
            aug.budget
        );
    }
    if check {
        check_augmentation(
            &corpus,
            vocab,
            &outcome.accepted,
            &outcome.total_tokens,
            aug.recount_interval == 1,
        )?;
    }
    if let Some(path) = &args.vocab_out {
        vocab.save(path)?;
    }

    if !args.sweep.is_empty() {
        let rows = budget_sweep(&corpus, vocab, &args.sweep)?;
        let mut text = String::from("M,added,avg_len,bytes_per_token,normalized_entropy,h2\n");
        for r in rows {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.budget, r.added, r.avg_len, r.bytes_per_token, r.normalized_entropy, r.h2
            ));
        }
        return emit(args.out.as_deref(), &text);
    }

    let compression = compression_report(&corpus, &base, vocab)?;
    eprintln!(
        "{}: {added} tokens added, average output length {:.2} -> {:.2} (x{:.3})",
        corpus.id, compression.avg_len_before, compression.avg_len_after, compression.compression_ratio
    );
    let out = AugmentOutput {
        corpus: &corpus.id,
        config: cfg,
        base_kind: base.base().kind(),
        base_size: base.size(),
        vocab_size: vocab.size(),
        requested: aug.budget,
        added,
        exhausted: outcome.exhausted,
        compression,
        accepted: ledger(vocab, &outcome.accepted)?,
        rejected: ledger(vocab, &outcome.rejected)?,
        total_tokens: outcome.total_tokens.clone(),
    };
    emit(args.out.as_deref(), &json(&out))
}

#[derive(Args)]
pub struct BuildDrafterArgs {
    /// Corpus file; tables are built from the output side.
    pub corpus: PathBuf,
    /// Vocabulary file (default: raw bytes).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Destination of the binary tables.
    #[arg(long)]
    pub out: PathBuf,
}

fn corpus_drafter(corpus: &TaskCorpus, vocab: &Vocabulary, cfg: &RunConfig) -> Result<CorpusDrafter, Failure> {
    let seqs = tokenize_corpus(corpus, vocab, Side::Output)?;
    Ok(build_corpus_drafter(&seqs, cfg.n_max, cfg.p_min)?.with_vocab_size(vocab.size() as u32))
}

pub fn build_drafter(cfg: &RunConfig, args: &BuildDrafterArgs) -> Result<(), Failure> {
    let corpus = load(&args.corpus, cfg)?;
    let vocab = load_vocab(args.vocab.as_deref())?;
    let drafter = corpus_drafter(&corpus, &vocab, cfg)?;
    let file = File::create(&args.out).map_err(|e| io_failure(&args.out, e))?;
    drafter.write_to(BufWriter::new(file))?;
    let entries: usize = drafter.tables().models().iter().map(|m| m.entries()).sum();
    eprintln!(
        "{}: {entries} n-gram entries written to {}",
        corpus.id,
        args.out.display()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Backoff n-gram model over a held-out corpus.
    Ngram,
    /// Seeded random-logit model.
    Random,
    /// Replays a finished request/response exchange.
    Offline,
}

#[derive(Args)]
pub struct TargetArgs {
    #[arg(long, value_enum, default_value = "ngram")]
    pub target: TargetKind,
    /// Corpus for the n-gram target (default: the main corpus).
    #[arg(long)]
    pub target_corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub target_order: usize,
    /// Context tokens the random target conditions on.
    #[arg(long, default_value_t = 3)]
    pub target_window: usize,
    /// Vocabulary size of the random target (default: the vocabulary's).
    #[arg(long)]
    pub target_vocab_size: Option<usize>,
    /// Offline request file.
    #[arg(long)]
    pub requests: Option<PathBuf>,
    /// Offline response file.
    #[arg(long)]
    pub responses: Option<PathBuf>,
}

fn build_target(
    args: &TargetArgs,
    cfg: &RunConfig,
    vocab: &Vocabulary,
    default_corpus: Option<&TaskCorpus>,
) -> Result<Box<dyn TargetModel>, Failure> {
    Ok(match args.target {
        TargetKind::Ngram => {
            let owned;
            let corpus = match (&args.target_corpus, default_corpus) {
                (Some(p), _) => {
                    owned = load(p, cfg)?;
                    &owned
                }
                (None, Some(c)) => c,
                (None, None) => return Err(Failure::input("the n-gram target needs --target-corpus")),
            };
            let inputs = tokenize_corpus(corpus, vocab, Side::Input)?;
            let outputs = tokenize_corpus(corpus, vocab, Side::Output)?;
            let seqs: Vec<Vec<TokenId>> = inputs.into_iter().zip(outputs).map(|(i, o)| [i, o].concat()).collect();
            Box::new(NGramTarget::build(&seqs, args.target_order, vocab.size())?)
        }
        TargetKind::Random => Box::new(RandomLogitTarget::new(
            args.target_vocab_size.unwrap_or(vocab.size()),
            args.target_window,
            cfg.seed,
        )?),
        TargetKind::Offline => match (&args.requests, &args.responses) {
            (Some(q), Some(r)) => {
                let requests = read_requests(open(q)?)?;
                let responses = read_responses(open(r)?)?;
                let vocab_size = args.target_vocab_size.unwrap_or(vocab.size());
                Box::new(OfflineTarget::new(vocab_size, &requests, &responses)?)
            }
            _ => return Err(Failure::input("the offline target needs --requests and --responses")),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DrafterKind {
    /// Corpus and prompt n-gram mixture.
    Mixed,
    /// The target's own greedy choices.
    Perfect,
    /// Never the target's greedy choice.
    Adversarial,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Corpus file: outputs train the corpus drafter, inputs are prompts.
    pub corpus: PathBuf,
    /// Vocabulary file (default: raw bytes).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Prebuilt corpus drafter tables.
    #[arg(long)]
    pub drafter_tables: Option<PathBuf>,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_enum, default_value = "mixed")]
    pub drafter: DrafterKind,
    /// Number of prompts, sampled from the corpus with the seed.
    #[arg(long, default_value_t = 20)]
    pub prompts: usize,
    #[arg(long, default_value_t = 64)]
    pub max_tokens: usize,
    /// Stop token id.
    #[arg(long)]
    pub stop: Option<TokenId>,
    /// Keep prompt drafter tables fixed during generation.
    #[arg(long)]
    pub no_refresh: bool,
    /// Comma-separated lambdas; emits one CSV row per value.
    #[arg(long, value_delimiter = ',')]
    pub lambda_sweep: Vec<f64>,
    /// Cost of one drafted token relative to one target pass.
    #[arg(long, default_value_t = 0.0)]
    pub cost_draft: f64,
    /// Write the per-step trace (JSONL) here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    config: &'a RunConfig,
    target: TargetKind,
    drafter: DrafterKind,
    prompts: usize,
    max_tokens: usize,
    report: AccelerationReport,
    modeled_speedup: f64,
    oracle_check: bool,
}

fn sample_prompts(
    corpus: &TaskCorpus,
    vocab: &Vocabulary,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<TokenId>>, Failure> {
    let n = corpus.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, count.min(n)).into_vec();
    idx.sort_unstable();
    idx.into_iter()
        .map(|i| Ok(vocab.encode(corpus.documents()[i].input.as_bytes())?))
        .collect()
}

fn check_sessions(
    target: &dyn TargetModel,
    prompts: &[Vec<TokenId>],
    runs: &[Generation],
    decode: &DecodeConfig,
    report: &AccelerationReport,
) -> Result<(), Failure> {
    for (i, (p, g)) in prompts.iter().zip(runs).enumerate() {
        let reference = greedy_decode(target, p, decode.max_tokens, decode.stop)?;
        if reference != g.tokens {
            return Err(Failure::invariant(format!(
                "session {i}: speculative output differs from greedy decoding"
            )));
        }
    }
    if report.acceptance_by_position.windows(2).any(|w| w[1] > w[0]) {
        return Err(Failure::invariant("acceptance rate increases with position"));
    }
    if report.target_passes > 0 && report.tokens_per_pass < 1.0 {
        return Err(Failure::invariant("fewer than one token per target pass"));
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs, check: bool) -> Result<(), Failure> {
    if args.trace.is_some() && !args.lambda_sweep.is_empty() {
        return Err(Failure::input("--trace cannot be combined with --lambda-sweep"));
    }
    if let Some(bad) = args.lambda_sweep.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Failure::input(format!("--lambda-sweep value {bad} outside [0, 1]")));
    }
    let corpus = load(&args.corpus, cfg)?;
    let vocab = load_vocab(args.vocab.as_deref())?;
    let target = build_target(&args.target, cfg, &vocab, Some(&corpus))?;
    let target: &dyn TargetModel = target.as_ref();
    let corpus_tables = match &args.drafter_tables {
        Some(p) => CorpusDrafter::read_from(open(p)?)?,
        None => corpus_drafter(&corpus, &vocab, cfg)?,
    };
    let prompts = sample_prompts(&corpus, &vocab, args.prompts, cfg.seed)?;
    let decode = DecodeConfig {
        gamma: cfg.gamma,
        max_tokens: args.max_tokens,
        stop: args.stop,
    };
    decode.validate()?;

    let run = |lambda: f64| -> Result<(Vec<Generation>, AccelerationReport), Failure> {
        let runs = generate_batch(
            target,
            &prompts,
            &decode,
            |p| -> tasc::Result<Box<dyn DraftSource + '_>> {
                Ok(match args.drafter {
                    DrafterKind::Mixed => {
                        let prompt = build_prompt_drafter(p, cfg.n_max)?.with_refresh(!args.no_refresh);
                        Box::new(MixedDrafter::new(&corpus_tables, prompt, lambda)?)
                    }
                    DrafterKind::Perfect => Box::new(OracleDrafter::new(target)),
                    DrafterKind::Adversarial => Box::new(AdversarialDrafter::new(target)),
                })
            },
        )?;
        let report = AccelerationReport::aggregate(decode.gamma, &runs);
        if check {
            check_sessions(target, &prompts, &runs, &decode, &report)?;
        }
        Ok((runs, report))
    };

    if !args.lambda_sweep.is_empty() {
        let mut text = String::from("lambda,gamma,tokens_per_pass,first_position_rate,target_passes,total_tokens\n");
        for &lambda in &args.lambda_sweep {
            let (_, r) = run(lambda)?;
            text.push_str(&format!(
                "{lambda},{},{},{},{},{}\n",
                r.gamma, r.tokens_per_pass, r.first_position_rate, r.target_passes, r.total_tokens
            ));
        }
        return emit(args.out.as_deref(), &text);
    }

    let (runs, report) = run(cfg.lambda)?;
    if let Some(path) = &args.trace {
        let file = File::create(path).map_err(|e| io_failure(path, e))?;
        let mut w = BufWriter::new(file);
        write_trace(&mut w, &runs)?;
        w.flush().map_err(|e| io_failure(path, e))?;
    }
    let speedup = if report.target_passes == 0 {
        0.0
    } else {
        modeled_speedup(&report, 1.0, args.cost_draft)?
    };
    eprintln!(
        "{} sessions, {} tokens in {} target passes ({:.3} tokens/pass, first-position acceptance {:.3})",
        prompts.len(),
        report.total_tokens,
        report.target_passes,
        report.tokens_per_pass,
        report.first_position_rate
    );
    let out = SimulateOutput {
        config: cfg,
        target: args.target.target,
        drafter: args.drafter,
        prompts: prompts.len(),
        max_tokens: args.max_tokens,
        report,
        modeled_speedup: speedup,
        oracle_check: check,
    };
    emit(args.out.as_deref(), &json(&out))
}

#[derive(Args)]
pub struct RespondArgs {
    /// Request file (JSONL).
    #[arg(id = "request_file", value_name = "REQUESTS")]
    pub request_file: PathBuf,
    /// Vocabulary file (default: raw bytes).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn respond(cfg: &RunConfig, args: &RespondArgs) -> Result<(), Failure> {
    if args.target.target == TargetKind::Offline {
        return Err(Failure::input("respond needs a reference target (ngram or random)"));
    }
    let vocab = load_vocab(args.vocab.as_deref())?;
    let target = build_target(&args.target, cfg, &vocab, None)?;
    let requests = read_requests(open(&args.request_file)?)?;
    let responses = tasc::specdec::respond(target.as_ref(), &requests)?;
    let mut buf = Vec::new();
    write_responses(&mut buf, &responses)?;
    emit(args.out.as_deref(), &String::from_utf8(buf).expect("JSON is UTF-8"))
}

#[derive(Args)]
pub struct PredictArgs {
    /// CSV with header `config_id,M,h2,runtime`.
    pub series: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn predict(args: &PredictArgs) -> Result<(), Failure> {
    let series = PredictorSeries::from_csv(open(&args.series)?)?;
    let report = predictor_report(&series);
    for (id, reason) in &report.excluded {
        eprintln!("tasc: warning: configuration {id} excluded: {reason}");
    }
    match (&report.mean_tau, &report.directional) {
        (Some(t), Some(d)) => eprintln!(
            "mean tau {t:.3}; directional success {}/{} = {:.3}",
            d.successes, d.transitions_used, d.rate
        ),
        _ => eprintln!("tasc: warning: not enough data for a full report"),
    }
    emit(args.out.as_deref(), &json(&report))
}
