use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qglab_core::data::{
    build_qg_input, corpus_stats, filter_nq_examples, filter_qa_pairs, read_jsonl, read_jsonl_lenient, write_jsonl,
    CorpusStats, CorpusStatsReport, Malformed, QAPair, QGExample, SummarizationExample,
};
use qglab_core::decoding::{DecoderRegistry, DecodingStrategy};
use qglab_core::eval::{
    bws_scores, bws_tallies, evaluate_generation, evaluate_predictions, pairwise_permutation_test, write_pvalues_csv,
    BWSJudgment, EvalItem, EvalMode, EvalReport, MetricRegistry, ModelGenerator,
};
use qglab_core::model::{save_checkpoint, warm_start, Checkpoint, SeqToSeqParams};
use qglab_core::tokenizer::{train_bpe, Vocabulary};
use qglab_core::training::{
    finetune, pretrain_question_generation, write_sweep_csv, Sweep, Task, TaskData, TrainingReport,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::*;
use crate::failure::Failure;
use crate::manifest::RunRecorder;
use crate::settings::Settings;

pub type Outcome = Result<(), Failure>;

/// Everything a subcommand needs besides its own flags.
pub struct Context {
    pub seed: u64,
    pub threads: usize,
    pub settings: Settings,
}

impl Context {
    fn recorder(&self, name: &'static str) -> RunRecorder {
        RunRecorder::new(name, self.seed, self.threads)
    }
}

/// Existing relative paths are used as is; otherwise they are looked up
/// under `QGLAB_DATA_DIR` when it is set.
pub fn resolve_input(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(root) = std::env::var_os("QGLAB_DATA_DIR") {
            let candidate = Path::new(&root).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn default_vocab(explicit: &Option<PathBuf>, ckpt: Option<&Path>) -> Result<PathBuf, Failure> {
    match (explicit, ckpt) {
        (Some(v), _) => Ok(resolve_input(v)),
        (None, Some(c)) => Ok(c.with_file_name("vocab.json")),
        (None, None) => Err(Failure::invalid("--vocab is required without --ckpt")),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::io(path, e))
}

fn load_vocab(path: &Path, rec: &mut RunRecorder) -> Result<Vocabulary, Failure> {
    rec.input(path);
    Ok(Vocabulary::load(path)?)
}

fn check_vocab(params: &SeqToSeqParams<f32>, vocab: &Vocabulary) -> Outcome {
    let want = params.config().vocab_size;
    if want != vocab.len() {
        return Err(Failure::invalid(format!(
            "model expects {want} tokens but the vocabulary has {}",
            vocab.len()
        )));
    }
    Ok(())
}

fn decoder<'r>(registry: &'r DecoderRegistry, settings: &Settings) -> Result<&'r dyn DecodingStrategy, Failure> {
    Ok(registry.get(&settings.decode.decoder)?)
}

/// Loads a full model, or warm-starts a fresh one from a partial checkpoint.
/// Sequence limits shrink to what the checkpoint's position table allows.
fn load_model(path: &Path, ctx: &mut Context, rec: &mut RunRecorder) -> Result<SeqToSeqParams<f32>, Failure> {
    rec.input(path);
    let ck = Checkpoint::read(path)?;
    let cfg = ck.config.clone();
    let t = &mut ctx.settings.training;
    t.max_src_len = t.max_src_len.min(cfg.max_src_len);
    t.max_tgt_len = t.max_tgt_len.min(cfg.max_tgt_len);
    let fresh = SeqToSeqParams::<f32>::init(&cfg, ctx.seed)?;
    if ck.tensors.len() == fresh.len() {
        Ok(ck.into_params()?)
    } else {
        log::info!("{} holds {} of {} tensors; warm-starting", path.display(), ck.tensors.len(), fresh.len());
        Ok(warm_start(fresh, &ck)?)
    }
}

fn finish(mut rec: RunRecorder, settings: &Settings) -> Outcome {
    rec.config = serde_json::to_value(settings)?;
    let path = rec.finish()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct NqStats {
    count: usize,
    drops: BTreeMap<String, usize>,
}

pub fn mine(args: &MineArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("mine");
    let input = resolve_input(&args.input);
    rec.input(&input);
    let stats_path = args.stats.clone().unwrap_or_else(|| sibling(&args.out, ".stats.json"));
    match args.kind {
        MineKind::Qa => {
            let vocab = match &args.vocab {
                Some(v) => Some(load_vocab(&resolve_input(v), &mut rec)?),
                None => None,
            };
            let outcome = filter_qa_pairs(read_jsonl_lenient::<QAPair>(&input)?);
            let stats = if outcome.kept.is_empty() {
                log::warn!("no record survived filtering");
                CorpusStats {
                    avg_question_tokens: 0.0,
                    avg_answer_tokens: 0.0,
                    count: 0,
                }
            } else {
                corpus_stats(&outcome.kept, vocab.as_ref())?
            };
            write_jsonl(&args.out, &outcome.kept)?;
            write_json(&stats_path, &CorpusStatsReport::new(stats, outcome.drops))?;
            log::info!("kept {} of {} records", outcome.kept.len(), outcome.total);
        }
        MineKind::Nq => {
            let mut malformed = 0;
            let records: Vec<QGExample> = read_jsonl_lenient::<QGExample>(&input)?
                .into_iter()
                .filter_map(|r: Result<QGExample, Malformed>| r.map_err(|_| malformed += 1).ok())
                .collect();
            let mut outcome = filter_nq_examples(records);
            if malformed > 0 {
                outcome.drops.insert("malformed".into(), malformed);
            }
            write_jsonl(&args.out, &outcome.kept)?;
            write_json(
                &stats_path,
                &NqStats {
                    count: outcome.kept.len(),
                    drops: outcome.drops,
                },
            )?;
        }
    }
    rec.output(&args.out);
    rec.output(&stats_path);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

/// Every string field a corpus record may carry.
const TEXT_FIELDS: [&str; 6] = ["question", "answer", "document", "summary", "passage", "source"];

pub fn build_vocab(args: &BuildVocabArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("build-vocab");
    let mut texts = Vec::new();
    for p in &args.inputs {
        let p = resolve_input(p);
        rec.input(&p);
        for v in read_jsonl::<Value>(&p)? {
            for f in TEXT_FIELDS {
                if let Some(s) = v.get(f).and_then(Value::as_str) {
                    texts.push(s.to_string());
                }
            }
        }
    }
    let vocab = train_bpe(&texts, args.size)?;
    vocab.save(&args.out)?;
    log::info!("vocabulary of {} tokens", vocab.len());
    rec.output(&args.out);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

fn write_training_outputs(
    params: &SeqToSeqParams<f32>,
    mut report: TrainingReport,
    out: &Path,
    rec: &mut RunRecorder,
) -> Outcome {
    save_checkpoint(params, out)?;
    report.checkpoint = Some(out.display().to_string());
    let report_path = sibling(out, ".report.json");
    write_json(&report_path, &report)?;
    log::info!("final loss {:.4} after {} steps", report.final_loss, report.steps);
    rec.output(out);
    rec.output(&report_path);
    Ok(())
}

pub fn pretrain(args: &PretrainArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("pretrain");
    ctx.settings.apply_train(&args.train, ctx.seed);
    let vocab = load_vocab(&resolve_input(&args.vocab), &mut rec)?;
    let pairs_path = resolve_input(&args.pairs);
    rec.input(&pairs_path);
    let pairs: Vec<QAPair> = read_jsonl(&pairs_path)?;
    let mut params = match &args.init {
        Some(init) => {
            let init = resolve_input(init);
            rec.input(&init);
            let fresh = SeqToSeqParams::init(&ctx.settings.model_config(vocab.len())?, ctx.seed)?;
            warm_start(fresh, &Checkpoint::read(&init)?)?
        }
        None => SeqToSeqParams::init(&ctx.settings.model_config(vocab.len())?, ctx.seed)?,
    };
    check_vocab(&params, &vocab)?;
    let report = pretrain_question_generation(&mut params, &vocab, &pairs, &ctx.settings.training)?;
    write_training_outputs(&params, report, &args.out, &mut rec)?;
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

fn task_of(arg: TaskArg) -> Task {
    match arg {
        TaskArg::Summarization => Task::Summarization,
        TaskArg::QuestionGeneration => Task::QuestionGeneration,
    }
}

/// Records of either fine-tuning kind, read strictly.
enum Records {
    Summarization(Vec<SummarizationExample>),
    QuestionGeneration(Vec<QGExample>),
}

impl Records {
    fn read(path: &Path, task: TaskArg) -> Result<Self, Failure> {
        Ok(match task {
            TaskArg::Summarization => Records::Summarization(read_jsonl(path)?),
            TaskArg::QuestionGeneration => Records::QuestionGeneration(read_jsonl(path)?),
        })
    }

    fn as_task_data(&self) -> TaskData<'_> {
        match self {
            Records::Summarization(d) => TaskData::Summarization(d),
            Records::QuestionGeneration(d) => TaskData::QuestionGeneration(d),
        }
    }
}

pub fn finetune_cmd(args: &FinetuneArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("finetune");
    ctx.settings.apply_train(&args.train, ctx.seed);
    let ckpt = args.ckpt.as_ref().map(|p| resolve_input(p));
    let vocab = load_vocab(&default_vocab(&args.vocab, ckpt.as_deref())?, &mut rec)?;
    let data_path = resolve_input(&args.data);
    rec.input(&data_path);
    let records = Records::read(&data_path, args.task)?;
    let mut params = match &ckpt {
        Some(c) => load_model(c, ctx, &mut rec)?,
        None => SeqToSeqParams::init(&ctx.settings.model_config(vocab.len())?, ctx.seed)?,
    };
    check_vocab(&params, &vocab)?;
    let report = finetune(
        &mut params,
        &vocab,
        task_of(args.task),
        records.as_task_data(),
        &ctx.settings.training,
    )?;
    write_training_outputs(&params, report, &args.out, &mut rec)?;
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

#[derive(Serialize, Deserialize)]
struct GeneratedLine {
    source: String,
    prediction: String,
    score: f64,
}

/// Source text and encoded ids for one generation input line. Records may
/// be question-generation examples, documents, answers or bare sources.
fn source_of(v: &Value, vocab: &Vocabulary, max_src_len: usize) -> Result<(String, Vec<u32>), String> {
    if v.get("passage").is_some() {
        let ex: QGExample = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let ids = build_qg_input(&ex, vocab, max_src_len).map_err(|e| e.to_string())?;
        return Ok((ex.passage, ids.ids));
    }
    for field in ["document", "answer", "source"] {
        if let Some(x) = v.get(field) {
            let text = x.as_str().ok_or_else(|| format!("field `{field}` must be a string"))?;
            let ids = vocab.encode(text, max_src_len).map_err(|e| e.to_string())?;
            return Ok((text.to_string(), ids.ids));
        }
    }
    Err("record has none of passage, document, answer, source".into())
}

fn read_sources(path: &Path, vocab: &Vocabulary, max_src_len: usize) -> Result<Vec<(String, Vec<u32>)>, Failure> {
    read_jsonl::<Value>(path)?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            source_of(v, vocab, max_src_len).map_err(|m| Failure::data(format!("{}:{}: {m}", path.display(), i + 1)))
        })
        .collect()
}

pub fn generate(args: &GenerateArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("generate");
    ctx.settings.apply_decode(&args.decode);
    let ckpt = resolve_input(&args.ckpt);
    let vocab = load_vocab(&default_vocab(&args.vocab, Some(&ckpt))?, &mut rec)?;
    let input = resolve_input(&args.input);
    rec.input(&input);
    let params = load_model(&ckpt, ctx, &mut rec)?;
    check_vocab(&params, &vocab)?;
    let sources = read_sources(&input, &vocab, ctx.settings.training.max_src_len)?;
    let registry = DecoderRegistry::default();
    let mut generator = ModelGenerator {
        params: &params,
        vocab: &vocab,
        strategy: decoder(&registry, &ctx.settings)?,
        config: ctx.settings.decode.config.clone(),
    };
    let items: Vec<EvalItem> = sources
        .iter()
        .map(|(_, ids)| EvalItem {
            src: ids.clone(),
            reference: String::new(),
        })
        .collect();
    let mut lines = Vec::with_capacity(items.len());
    for ((text, _), item) in sources.iter().zip(&items) {
        use qglab_core::eval::Generator;
        let g = generator.generate(&item.src)?;
        lines.push(GeneratedLine {
            source: text.clone(),
            prediction: g.text,
            score: g.score,
        });
    }
    write_jsonl(&args.out, &lines)?;
    rec.output(&args.out);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

#[derive(Serialize)]
struct EvaluateOutput {
    mode: EvalMode,
    #[serde(flatten)]
    report: EvalReport,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metrics: BTreeMap<String, f64>,
}

fn references(records: &Records) -> Vec<String> {
    match records {
        Records::Summarization(d) => d.iter().map(|e| e.summary.clone()).collect(),
        Records::QuestionGeneration(d) => d.iter().map(|e| e.question.clone()).collect(),
    }
}

pub fn evaluate(args: &EvaluateArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("evaluate");
    ctx.settings.apply_decode(&args.decode);
    let data_path = resolve_input(&args.data);
    rec.input(&data_path);
    let records = Records::read(&data_path, args.task)?;
    let refs = references(&records);
    let mode = match args.mode {
        ModeArg::Finetuned => EvalMode::Finetuned,
        ModeArg::ZeroShot => EvalMode::ZeroShot,
    };
    let predictions: Vec<String> = match (&args.predictions, &args.ckpt) {
        (Some(p), _) => {
            let p = resolve_input(p);
            rec.input(&p);
            let lines: Vec<GeneratedLine> = read_jsonl(&p)?;
            if lines.len() != refs.len() {
                return Err(Failure::data(format!(
                    "{} predictions for {} references",
                    lines.len(),
                    refs.len()
                )));
            }
            lines.into_iter().map(|l| l.prediction).collect()
        }
        (None, Some(c)) => {
            let c = resolve_input(c);
            let vocab = load_vocab(&default_vocab(&args.vocab, Some(&c))?, &mut rec)?;
            let params = load_model(&c, ctx, &mut rec)?;
            check_vocab(&params, &vocab)?;
            let items = records
                .as_task_data()
                .eval_items(&vocab, ctx.settings.training.max_src_len)?;
            let registry = DecoderRegistry::default();
            let mut generator = ModelGenerator {
                params: &params,
                vocab: &vocab,
                strategy: decoder(&registry, &ctx.settings)?,
                config: ctx.settings.decode.config.clone(),
            };
            let out = evaluate_generation(&mut generator, &items, mode)?;
            out.predictions.into_iter().map(|g| g.text).collect()
        }
        (None, None) => return Err(Failure::invalid("give --ckpt or --predictions")),
    };
    let report = evaluate_predictions(&predictions, &refs)?;
    let names: Vec<&str> = args.metrics.iter().map(String::as_str).collect();
    let metrics = MetricRegistry::default().score_all(&names, &predictions, &refs)?;
    write_json(&args.out, &EvaluateOutput { mode, report, metrics })?;
    rec.output(&args.out);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

pub fn sweep(args: &SweepArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("sweep");
    ctx.settings.apply_train(&args.train, ctx.seed);
    ctx.settings.apply_decode(&args.decode);
    for &f in &args.fractions {
        if !(f > 0.0 && f <= 100.0) {
            return Err(Failure::invalid(format!("fraction {f}% is outside (0, 100]")));
        }
    }
    let fractions: Vec<f64> = args.fractions.iter().map(|p| p / 100.0).collect();
    let pretrained_path = resolve_input(&args.pretrained);
    let vocab = load_vocab(&default_vocab(&args.vocab, Some(&pretrained_path))?, &mut rec)?;
    let train_path = resolve_input(&args.train_data);
    let heldout_path = resolve_input(&args.heldout);
    rec.input(&train_path);
    rec.input(&heldout_path);
    let train: Vec<SummarizationExample> = read_jsonl(&train_path)?;
    let heldout: Vec<SummarizationExample> = read_jsonl(&heldout_path)?;
    let pretrained = load_model(&pretrained_path, ctx, &mut rec)?;
    check_vocab(&pretrained, &vocab)?;
    let baseline = match &args.baseline {
        Some(b) => load_model(&resolve_input(b), ctx, &mut rec)?,
        None => SeqToSeqParams::init(pretrained.config(), ctx.seed)?,
    };
    check_vocab(&baseline, &vocab)?;
    let registry = DecoderRegistry::default();
    let sweep = Sweep {
        vocab: &vocab,
        train: &train,
        heldout: &heldout,
        fractions,
        training: ctx.settings.training.clone(),
        min_epochs: args.min_epochs,
        strategy: decoder(&registry, &ctx.settings)?,
        decode: ctx.settings.decode.config.clone(),
    };
    let rows = sweep.run(&[("pretrained", &pretrained), ("baseline", &baseline)])?;
    write_sweep_csv(&args.out, &rows)?;
    rec.output(&args.out);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

#[derive(Serialize)]
struct BwsOutput {
    scores: BTreeMap<String, f64>,
    tallies: BTreeMap<String, qglab_core::eval::BwsTally>,
    judgments: usize,
}

pub fn bws(args: &BwsArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("bws");
    let input = resolve_input(&args.input);
    rec.input(&input);
    let judgments: Vec<BWSJudgment> = read_jsonl(&input)?;
    for (i, j) in judgments.iter().enumerate() {
        if !j.tie && j.system_best == j.system_worst {
            return Err(Failure::data(format!(
                "{}:{}: best and worst are both `{}` but the judgment is not a tie",
                input.display(),
                i + 1,
                j.system_best
            )));
        }
    }
    let out = BwsOutput {
        scores: bws_scores(&judgments, &args.systems),
        tallies: bws_tallies(&judgments),
        judgments: judgments.len(),
    };
    write_json(&args.out, &out)?;
    rec.output(&args.out);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}

pub fn significance(args: &SignificanceArgs, ctx: &mut Context) -> Outcome {
    let mut rec = ctx.recorder("significance");
    let input = resolve_input(&args.input);
    rec.input(&input);
    let text = std::fs::read_to_string(&input).map_err(|e| Failure::io(&input, e))?;
    let scores: BTreeMap<String, Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", input.display())))?;
    let rows = pairwise_permutation_test(&scores, args.permutations, ctx.seed)?;
    write_pvalues_csv(&args.out, &rows)?;
    rec.output(&args.out);
    let settings = ctx.settings.clone();
    finish(rec, &settings)
}
