//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentRecipe, DictionaryTranslator, IdentityTranslator, Translator};
use crate::bleu::{self, BleuOptions};
use crate::captioner::{Captioner, HistogramIndex, Metric, ProcessCaptioner, DEFAULT_BINS};
use crate::corpus::{self, Label, LabeledText, SplitSpec, TextFormat};
use crate::metrics::{self, EvalReport};
use crate::nbayes::{NbConfig, NbModel, TextClassifier, Variant};
use crate::pipeline::{self, CaptionerKind, PipelineConfig, Screener};
use crate::textprep::{clean_with, tokenize, Stopwords};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(
    crate::corpus::CorpusError,
    crate::textprep::TextError,
    crate::augment::AugmentError,
    crate::nbayes::NbError,
    crate::captioner::CaptionError,
    crate::bleu::BleuError,
    crate::metrics::MetricsError,
    crate::pipeline::PipelineError,
    crate::image::ImageError
);

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "postscreen",
    version,
    about = "Caption, fuse and classify social-media posts"
)]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splits and augmentation draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted and the command allows it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a labeled text corpus into JSONL.
    Prep(PrepArgs),
    /// Augment an image corpus (image ops + caption back-translation).
    Augment(AugmentArgs),
    /// Train a Naive Bayes model.
    Train(TrainArgs),
    /// Evaluate a trained model on labeled text.
    Eval(EvalArgs),
    /// Build a retrieval captioner index, caption images, or score captions.
    #[command(subcommand)]
    Caption(CaptionCommand),
    /// Corpus BLEU-1/BLEU-2 of hypotheses against references.
    Bleu(BleuArgs),
    /// Screen posts and write verdicts.
    Classify(ClassifyArgs),
    /// Evaluation tables from labeled verdicts.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Post,
    Caption,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Mnb,
    Cnb,
    Bnb,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Mnb => Variant::Multinomial,
            VariantArg::Cnb => Variant::Complement,
            VariantArg::Bnb => Variant::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    L2,
    Chi2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TranslatorArg {
    /// Bundled English/pseudo-French word tables.
    PseudoFr,
    Identity,
    /// Tables given by --dict-forward and --dict-reverse.
    Dict,
}

#[derive(Debug, Args)]
struct TextInput {
    /// Labeled text corpus (CSV with `label,text` header, or JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
struct PrepArgs {
    #[command(flatten)]
    input: TextInput,
    #[arg(long, value_enum, default_value = "post")]
    preset: PresetArg,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Image corpus directory containing manifest.jsonl.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    recipe: PathBuf,
    #[arg(long, value_enum, default_value = "pseudo-fr")]
    translator: TranslatorArg,
    #[arg(long, requires = "dict_reverse")]
    dict_forward: Option<PathBuf>,
    #[arg(long, requires = "dict_forward")]
    dict_reverse: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: TextInput,
    #[arg(long, value_enum, default_value = "cnb")]
    variant: VariantArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Hold out this fraction as a test set before training.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 1)]
    min_df: usize,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    weight_norm: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    input: TextInput,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evaluate on the held-out part of this split (same --seed as training).
    #[arg(long)]
    split: Option<f64>,
    /// Write ROC points as `fpr,tpr` CSV.
    #[arg(long)]
    roc_csv: Option<PathBuf>,
    #[arg(long, default_value = "Results")]
    title: String,
}

#[derive(Debug, Subcommand)]
enum CaptionCommand {
    /// Build a histogram retrieval index from an image corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long, value_enum, default_value = "chi2")]
        metric: MetricArg,
    },
    /// Caption images, one `path<TAB>caption` line each.
    Run {
        #[arg(long)]
        index: Option<PathBuf>,
        images: Vec<PathBuf>,
    },
    /// Caption every corpus image and score against its references.
    Eval {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
    },
}

#[derive(Debug, Args)]
struct BleuArgs {
    /// JSONL `{"id": .., "references": [..]}`.
    #[arg(long)]
    refs: PathBuf,
    /// JSONL `{"id": .., "caption": ".."}`.
    #[arg(long)]
    hyps: PathBuf,
    #[arg(long)]
    smooth: bool,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// JSONL posts `{"id", "text", "image"?, "label"?}`.
    #[arg(long)]
    posts: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    verdicts: PathBuf,
    #[arg(long)]
    roc_csv: Option<PathBuf>,
    #[arg(long, default_value = "Results")]
    title: String,
}

/// Runs the CLI and returns the process exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

struct Ctx {
    config: PipelineConfig,
    seed: u64,
    /// `--seed` as given; overrides seeds stored in recipes.
    seed_override: Option<u64>,
    out: Option<PathBuf>,
    stopwords: Stopwords,
}

impl Ctx {
    fn new(cli: &Cli) -> CliResult<Self> {
        let config = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let stopwords = match &config.stopwords {
            Some(p) => Stopwords::load(p)?,
            None => Stopwords::english().clone(),
        };
        Ok(Self {
            seed: cli.seed.unwrap_or(config.seed),
            seed_override: cli.seed,
            out: cli.out.clone(),
            config,
            stopwords,
        })
    }

    fn require_out(&self, what: &str) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{what} needs --out")))
    }

    /// Writes to --out if given, else to stdout.
    fn emit(&self, stdout: &mut dyn Write, content: &str) -> CliResult {
        match &self.out {
            Some(p) => write_file(p, content),
            None => stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Internal(format!("stdout: {e}"))),
        }
    }

    fn model_path(&self, arg: &Option<PathBuf>) -> CliResult<PathBuf> {
        arg.clone()
            .or_else(|| self.config.model.clone())
            .ok_or_else(|| {
                CliError::Usage("no model given (use --model or `model` in --config)".into())
            })
    }
}

fn write_file(path: &Path, content: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, content).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Prep(a) => prep(&ctx, a, stdout),
        Command::Augment(a) => augment(&ctx, a, stderr),
        Command::Train(a) => train(&ctx, a, stderr),
        Command::Eval(a) => eval(&ctx, a, stdout),
        Command::Caption(c) => caption(&ctx, c, stdout),
        Command::Bleu(a) => bleu_cmd(&ctx, a, stdout),
        Command::Classify(a) => classify(&ctx, a, stdout),
        Command::Report(a) => report(&ctx, a, stdout),
    }
}

fn load_text(input: &TextInput) -> CliResult<Vec<LabeledText>> {
    let format = match input.format {
        Some(FormatArg::Csv) => TextFormat::Csv,
        Some(FormatArg::Jsonl) => TextFormat::Jsonl,
        None => TextFormat::from_path(&input.data).ok_or_else(|| {
            CliError::Usage(format!(
                "cannot infer format of {}; pass --format",
                input.data.display()
            ))
        })?,
    };
    Ok(corpus::load_text_corpus(&input.data, format)?)
}

fn to_docs(ctx: &Ctx, rows: &[LabeledText]) -> Vec<(Vec<String>, Label)> {
    rows.iter()
        .map(|r| {
            (
                tokenize(&clean_with(&r.text, &ctx.config.text_clean, &ctx.stopwords)),
                r.label,
            )
        })
        .collect()
}

fn prep(ctx: &Ctx, a: PrepArgs, stdout: &mut dyn Write) -> CliResult {
    let rows = load_text(&a.input)?;
    let preset = match a.preset {
        PresetArg::Post => ctx.config.text_clean,
        PresetArg::Caption => ctx.config.caption_clean,
    };
    let mut out = String::new();
    for r in rows {
        let cleaned = LabeledText {
            text: clean_with(&r.text, &preset, &ctx.stopwords),
            ..r
        };
        out.push_str(&serde_json::to_string(&cleaned).expect("record serializes"));
        out.push('\n');
    }
    ctx.emit(stdout, &out)
}

fn augment(ctx: &Ctx, a: AugmentArgs, stderr: &mut dyn Write) -> CliResult {
    let out_dir = ctx.require_out("augment")?.to_path_buf();
    let items = corpus::load_image_corpus(&a.corpus)?;
    let mut recipe = AugmentRecipe::load(&a.recipe)?;
    if let Some(seed) = ctx.seed_override {
        recipe.seed = seed;
    }
    let translator: Box<dyn Translator> = match a.translator {
        TranslatorArg::PseudoFr => Box::new(DictionaryTranslator::pseudo_french()),
        TranslatorArg::Identity => Box::new(IdentityTranslator),
        TranslatorArg::Dict => {
            let (Some(f), Some(r)) = (&a.dict_forward, &a.dict_reverse) else {
                return Err(CliError::Usage(
                    "--translator dict needs --dict-forward and --dict-reverse".into(),
                ));
            };
            Box::new(DictionaryTranslator::load("en", &recipe.pivot, f, r)?)
        }
    };
    let augmented = recipe.run(&items, translator.as_ref())?;
    let n_aug = augmented.len();
    let mut all = items;
    all.extend(augmented);
    corpus::write_image_corpus(&out_dir, &all).map_err(|e| CliError::Internal(e.to_string()))?;
    let _ = writeln!(
        stderr,
        "wrote {} images ({n_aug} augmented) to {}",
        all.len(),
        out_dir.display()
    );
    Ok(())
}

fn split_rows(
    ctx: &Ctx,
    rows: Vec<LabeledText>,
    fraction: Option<f64>,
) -> CliResult<(Vec<LabeledText>, Vec<LabeledText>)> {
    match fraction {
        None => Ok((rows, Vec::new())),
        Some(f) => {
            let spec = SplitSpec::new(f, ctx.seed)?;
            Ok(corpus::split(&rows, spec)?)
        }
    }
}

fn train(ctx: &Ctx, a: TrainArgs, stderr: &mut dyn Write) -> CliResult {
    let out = ctx.require_out("train")?.to_path_buf();
    let rows = load_text(&a.input)?;
    let (train_rows, test_rows) = split_rows(ctx, rows, a.split)?;
    let docs = to_docs(ctx, &train_rows);
    let mut config = NbConfig::new(a.variant.into()).alpha(a.alpha);
    config.cnb_weight_norm = a.weight_norm;
    if let Some(t) = a.threshold.or(ctx.config.threshold) {
        config = config.threshold(t);
    }
    let token_lists: Vec<&[String]> = docs.iter().map(|(d, _)| d.as_slice()).collect();
    let vocab = crate::textprep::Vocabulary::build(&token_lists, a.min_df)?;
    let model = NbModel::train_with_vocabulary(&docs, vocab, config)?;
    write_file(&out, &model.to_json())?;
    let _ = writeln!(
        stderr,
        "trained {} on {} documents (|V| = {}), held out {}",
        model.variant(),
        train_rows.len(),
        model.vocabulary.len(),
        test_rows.len()
    );
    Ok(())
}

fn eval(ctx: &Ctx, a: EvalArgs, stdout: &mut dyn Write) -> CliResult {
    let mut model = NbModel::load(&ctx.model_path(&a.model)?)?;
    if let Some(t) = ctx.config.threshold {
        model.set_threshold(t)?;
    }
    let rows = load_text(&a.input)?;
    let (_, test_rows) = split_rows(ctx, rows, a.split)?;
    let test_rows = if a.split.is_some() {
        test_rows
    } else {
        load_text(&a.input)?
    };
    let docs = to_docs(ctx, &test_rows);
    let preds: Vec<_> = docs.iter().map(|(d, _)| model.predict(d)).collect();
    let gold: Vec<Label> = docs.iter().map(|(_, l)| *l).collect();
    let predicted: Vec<Label> = preds.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let mut report = metrics::evaluate(&gold, &predicted)?;
    if let Ok(roc) = metrics::roc(&gold, &scores) {
        if let Some(p) = &a.roc_csv {
            write_file(p, &roc.to_csv())?;
        }
        report = report.with_roc(roc);
    }
    write_report(ctx, &report, &a.title, stdout)
}

fn write_report(ctx: &Ctx, report: &EvalReport, title: &str, stdout: &mut dyn Write) -> CliResult {
    stdout
        .write_all(report.to_table(title).as_bytes())
        .map_err(|e| CliError::Internal(format!("stdout: {e}")))?;
    if let Some(p) = &ctx.out {
        let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
        write_file(p, &json)?;
    }
    Ok(())
}

fn open_captioner(ctx: &Ctx, index: &Option<PathBuf>) -> CliResult<Option<Box<dyn Captioner>>> {
    match ctx.config.captioner {
        CaptionerKind::Process if index.is_none() => {
            let (prog, args) = ctx
                .config
                .captioner_command
                .split_first()
                .expect("validated non-empty");
            Ok(Some(Box::new(ProcessCaptioner::spawn(prog, args)?)))
        }
        _ => match index.clone().or_else(|| ctx.config.index.clone()) {
            Some(p) => Ok(Some(Box::new(HistogramIndex::load(&p)?))),
            None => Ok(None),
        },
    }
}

fn caption(ctx: &Ctx, c: CaptionCommand, stdout: &mut dyn Write) -> CliResult {
    match c {
        CaptionCommand::Index {
            corpus: dir,
            bins,
            metric,
        } => {
            let out = ctx.require_out("caption index")?;
            let items = corpus::load_image_corpus(&dir)?;
            let metric = match metric {
                MetricArg::L2 => Metric::L2,
                MetricArg::Chi2 => Metric::Chi2,
            };
            let index = HistogramIndex::build(&items, bins, metric)?;
            write_file(out, &index.to_json())
        }
        CaptionCommand::Run { index, images } => {
            let captioner = open_captioner(ctx, &index)?
                .ok_or_else(|| CliError::Usage("no captioner (use --index or --config)".into()))?;
            let mut out = String::new();
            for path in images {
                let img = crate::image::ImageBuffer::load(&path)?;
                out.push_str(&format!(
                    "{}\t{}\n",
                    path.display(),
                    captioner.caption(&img)?
                ));
            }
            ctx.emit(stdout, &out)
        }
        CaptionCommand::Eval { index, corpus: dir } => {
            let captioner = open_captioner(ctx, &index)?
                .ok_or_else(|| CliError::Usage("no captioner (use --index or --config)".into()))?;
            let items = corpus::load_image_corpus(&dir)?;
            let mut pairs = Vec::with_capacity(items.len());
            for item in &items {
                let hyp = bleu::bleu_tokens(&captioner.caption(&item.image)?);
                let refs = item
                    .captions()
                    .iter()
                    .map(|c| bleu::bleu_tokens(c))
                    .collect();
                pairs.push((hyp, refs));
            }
            let report = bleu::corpus_bleu(&pairs, 2)?;
            emit_bleu(ctx, &report, stdout)
        }
    }
}

fn emit_bleu(ctx: &Ctx, report: &bleu::BleuReport, stdout: &mut dyn Write) -> CliResult {
    writeln!(stdout, "{}", bleu::format_scores(report))
        .map_err(|e| CliError::Internal(format!("stdout: {e}")))?;
    if let Some(p) = &ctx.out {
        write_file(
            p,
            &(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefRecord {
    id: serde_json::Value,
    references: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypRecord {
    id: serde_json::Value,
    caption: String,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let content =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn bleu_cmd(ctx: &Ctx, a: BleuArgs, stdout: &mut dyn Write) -> CliResult {
    let refs: Vec<RefRecord> = read_jsonl(&a.refs)?;
    let hyps: Vec<HypRecord> = read_jsonl(&a.hyps)?;
    let mut by_id = std::collections::HashMap::new();
    for r in &refs {
        if by_id.insert(r.id.to_string(), &r.references).is_some() {
            return Err(CliError::Data(format!("duplicate reference id {}", r.id)));
        }
    }
    let mut pairs = Vec::with_capacity(hyps.len());
    for h in &hyps {
        let r = by_id
            .remove(&h.id.to_string())
            .ok_or_else(|| CliError::Data(format!("no references for id {}", h.id)))?;
        pairs.push((
            bleu::bleu_tokens(&h.caption),
            r.iter().map(|s| bleu::bleu_tokens(s)).collect(),
        ));
    }
    if let Some(id) = by_id.keys().next() {
        return Err(CliError::Data(format!("no hypothesis for id {id}")));
    }
    let report = bleu::corpus_bleu_with(&pairs, 2, BleuOptions { smooth: a.smooth })?;
    emit_bleu(ctx, &report, stdout)
}

fn classify(ctx: &Ctx, a: ClassifyArgs, stdout: &mut dyn Write) -> CliResult {
    let model = NbModel::load(&ctx.model_path(&a.model)?)?;
    let posts = pipeline::load_posts(&a.posts)?;
    let captioner = if posts.iter().any(|p| p.image.is_some()) {
        open_captioner(ctx, &a.index)?
    } else {
        None
    };
    let mut screener = Screener::new(&model, captioner.as_deref())
        .configure(&ctx.config)
        .stopwords(&ctx.stopwords);
    if let Some(t) = a.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("threshold {t} outside [0, 1]")));
        }
        screener.threshold = t;
    }
    let verdicts = screener.batch_classify(&posts)?;
    ctx.emit(stdout, &pipeline::verdicts_to_jsonl(&verdicts))
}

fn report(ctx: &Ctx, a: ReportArgs, stdout: &mut dyn Write) -> CliResult {
    let content = fs::read_to_string(&a.verdicts)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.verdicts.display())))?;
    let verdicts = pipeline::parse_verdicts(&content, &a.verdicts.display().to_string())?;
    let report = pipeline::evaluate_verdicts(&verdicts)?;
    if let (Some(p), Some(roc)) = (&a.roc_csv, &report.roc) {
        write_file(p, &roc.to_csv())?;
    }
    write_report(ctx, &report, &a.title, stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("postscreen").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_one() {
        let (code, _, err) = run_capture(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"), "{err}");
        let (code, _, _) = run_capture(&["train", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("classify"));
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let (code, _, err) = run_capture(&["prep", "--data", "/nonexistent/x.csv"]);
        assert_eq!(code, EXIT_DATA, "{err}");
    }

    #[test]
    fn train_without_out_is_usage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "label,text\n1,gun\n0,cat\n").unwrap();
        let (code, _, _) = run_capture(&["train", "--data", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
    }
}
