use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use depchain::chain::{extraction_record, ReprKind};
use depchain::corpus::{
    generate_synthetic, load_events, parse_conllu, write_conllu, write_events, DepSentence, EventMention,
    SentenceIndex, SynthConfig,
};
use depchain::harness::{
    cross_validate, evaluate, prepare_examples, render_table, resolve_embeddings, train_examples, CvReport,
    EmbeddingSource, Metrics, TrainConfig, TrainedModel,
};
use depchain::models::{probe_gradients, ModelKind};
use depchain::nncore::{read_checkpoint, write_checkpoint};
use depchain::saliency::{explain, heatmap_file_name, to_csv, to_html};

use crate::manifest::RunManifest;
use crate::{DataArgs, EvalArgs, ExtractArgs, GenArgs, GradcheckArgs, HeatmapFormat, SaliencyArgs, TrainArgs};
use crate::{CvArgs, TrainFlags};

pub const CORPUS_FILE: &str = "corpus.conllu";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Invalid flag combinations; reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// `<path>.<suffix>` next to a file artifact.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

struct Data {
    corpus: Vec<DepSentence>,
    mentions: Vec<EventMention>,
}

fn load_data(data_dir: &Path, args: &DataArgs, manifest: &mut RunManifest) -> Result<Data> {
    let conllu_path = args.conllu.clone().unwrap_or_else(|| data_dir.join(CORPUS_FILE));
    let events_path = args.events.clone().unwrap_or_else(|| data_dir.join(EVENTS_FILE));
    let conllu = read(&conllu_path)?;
    let events = read(&events_path)?;
    manifest.input("conllu", conllu.as_bytes());
    manifest.input("events", events.as_bytes());
    let corpus = parse_conllu(&conllu).with_context(|| format!("parsing {}", conllu_path.display()))?;
    let mentions = load_events(&events, &corpus).with_context(|| format!("loading {}", events_path.display()))?;
    Ok(Data { corpus, mentions })
}

pub fn gen(data_dir: &Path, args: GenArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_sentences: args.n,
        label_weights: args.weights,
        distractor_len: args.distractor_len,
        seed: args.seed,
    };
    let (corpus, mentions) = generate_synthetic(&cfg)?;
    let out = args.out.unwrap_or_else(|| data_dir.to_path_buf());
    create_dir(&out)?;
    let mut manifest = RunManifest::new("gen", &cfg, cfg.seed)?;
    for (name, text) in [(CORPUS_FILE, write_conllu(&corpus)), (EVENTS_FILE, write_events(&mentions))] {
        write(&out.join(name), text.as_bytes())?;
        manifest.output(name, text.as_bytes());
    }
    manifest.write(&out.join(MANIFEST_FILE))?;
    println!("wrote {} sentences and {} mentions to {}", corpus.len(), mentions.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct ExtractConfig {
    mode: ReprKind,
    half_width: usize,
}

pub fn extract(data_dir: &Path, args: ExtractArgs) -> Result<()> {
    let config = ExtractConfig {
        mode: args.mode.into(),
        half_width: args.half_width,
    };
    let mut manifest = RunManifest::new("extract", &config, 0)?;
    let data = load_data(data_dir, &args.data, &mut manifest)?;
    let index = SentenceIndex::new(&data.corpus);
    let mut out = String::new();
    let mut total_len = 0usize;
    for m in &data.mentions {
        let sent = index
            .position(&m.doc_id, &m.sent_id)
            .map(|p| &data.corpus[p])
            .with_context(|| format!("mention {}/{}/{} does not resolve", m.doc_id, m.sent_id, m.token_id))?;
        let record = extraction_record(sent, m.token_id, config.mode, config.half_width)
            .with_context(|| format!("mention {}/{}/{}", m.doc_id, m.sent_id, m.token_id))?;
        total_len += record.ids.len();
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    write(&args.out, out.as_bytes())?;
    manifest.output(&file_name(&args.out), out.as_bytes());
    manifest.write(&sidecar(&args.out, "manifest.json"))?;
    let mean = if data.mentions.is_empty() {
        0.0
    } else {
        total_len as f64 / data.mentions.len() as f64
    };
    println!("records: {}, mean length: {mean:.6}", data.mentions.len());
    Ok(())
}

/// Resolves the training config: `--config` (or defaults), then explicit flags.
fn train_config(flags: &TrainFlags) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &flags.config {
        Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(m) = flags.model {
        cfg.model = m.into();
        if cfg.model == ModelKind::TreeLstm {
            cfg.representation = ReprKind::Tree;
        } else if cfg.representation == ReprKind::Tree {
            cfg.representation = ReprKind::Chain;
        }
    }
    macro_rules! take {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = flags.$flag { cfg.$field = v.into(); })*
        };
    }
    take!(epochs => epochs, lr => learning_rate, dropout => dropout, hidden => hidden,
        half_width => half_width, batch_size => batch_size, seed => seed,
        activation => activation, readout => readout);
    if let Some(path) = &flags.embeddings {
        cfg.embeddings = EmbeddingSource::File { path: path.clone() };
    } else if let Some(dim) = flags.emb_dim {
        cfg.embeddings = EmbeddingSource::Random { dim };
    }
    cfg.finetune_embeddings |= flags.finetune_embeddings;
    Ok(cfg)
}

fn record_embeddings(cfg: &TrainConfig, manifest: &mut RunManifest) -> Result<()> {
    if let EmbeddingSource::File { path } = &cfg.embeddings {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        manifest.input("embeddings", &bytes);
    }
    Ok(())
}

fn label(cfg: &TrainConfig) -> String {
    format!("{}/{}", cfg.model, cfg.representation)
}

pub fn train(data_dir: &Path, args: TrainArgs) -> Result<()> {
    let mut cfg = train_config(&args.flags)?;
    if let Some(r) = args.repr {
        cfg.representation = r.into();
    }
    cfg.validate().map_err(usage)?;
    let mut manifest = RunManifest::new("train", &cfg, cfg.seed)?;
    let data = load_data(data_dir, &args.data, &mut manifest)?;
    record_embeddings(&cfg, &mut manifest)?;
    let emb = resolve_embeddings(&cfg.embeddings, &data.corpus, cfg.seed)?;
    let examples = prepare_examples(&cfg, &data.corpus, &data.mentions, &emb)?;
    let outcome = train_examples(&cfg, &examples, &emb)?;
    let text = write_checkpoint(&outcome.model.to_checkpoint());
    write(&args.out, text.as_bytes())?;
    manifest.output(&file_name(&args.out), text.as_bytes());
    manifest.write(&sidecar(&args.out, "manifest.json"))?;
    match outcome.history.last() {
        Some(loss) => println!(
            "trained {} on {} mentions for {} epochs, final loss {loss:.6}",
            label(&cfg),
            examples.len(),
            cfg.epochs
        ),
        None => println!("wrote untrained {} model", label(&cfg)),
    }
    Ok(())
}

fn load_model(path: &Path, manifest: &mut RunManifest) -> Result<TrainedModel> {
    let text = read(path)?;
    manifest.input("model", text.as_bytes());
    let ckpt = read_checkpoint(&text).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(TrainedModel::from_checkpoint(ckpt)?)
}

#[derive(Serialize)]
struct EvalReport<'a> {
    model: String,
    count: usize,
    metrics: &'a Metrics,
}

pub fn eval(data_dir: &Path, args: EvalArgs) -> Result<()> {
    let mut manifest = RunManifest::new("eval", &serde_json::Value::Null, 0)?;
    let model = load_model(&args.model, &mut manifest)?;
    manifest.config = serde_json::to_value(&model.config)?;
    manifest.seed = model.config.seed;
    let data = load_data(data_dir, &args.data, &mut manifest)?;
    let examples = prepare_examples(&model.config, &data.corpus, &data.mentions, &model.embeddings)?;
    let (metrics, _) = evaluate(&model, &examples)?;
    let name = label(&model.config);
    print!("{}", render_table([(name.as_str(), &metrics)]));
    let report = EvalReport {
        model: name,
        count: examples.len(),
        metrics: &metrics,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    let path = args.report.unwrap_or_else(|| sidecar(&args.model, "eval.json"));
    write(&path, text.as_bytes())?;
    manifest.output(&file_name(&path), text.as_bytes());
    manifest.write(&sidecar(&path, "manifest.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct CvRuns {
    runs: Vec<CvReport>,
}

pub fn cv(data_dir: &Path, args: CvArgs) -> Result<()> {
    let base = train_config(&args.flags)?;
    let reprs: Vec<ReprKind> = if args.repr.is_empty() {
        vec![base.representation]
    } else {
        args.repr.iter().map(|&r| r.into()).collect()
    };
    let configs: Vec<TrainConfig> = reprs
        .iter()
        .map(|&representation| TrainConfig {
            representation,
            ..base.clone()
        })
        .collect();
    for cfg in &configs {
        cfg.validate().map_err(usage)?;
    }
    if args.folds < 2 {
        return Err(usage(format!("--folds must be at least 2, got {}", args.folds)));
    }
    let mut manifest = RunManifest::new("cv", &configs, base.seed)?;
    let data = load_data(data_dir, &args.data, &mut manifest)?;
    record_embeddings(&base, &mut manifest)?;
    create_dir(&args.out)?;
    let emb = resolve_embeddings(&base.embeddings, &data.corpus, base.seed)?;

    let mut runs = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let examples = prepare_examples(cfg, &data.corpus, &data.mentions, &emb)?;
        let outcome = cross_validate(cfg, &examples, &emb, args.folds, args.jobs)?;
        let dir_name = cfg.representation.as_str();
        create_dir(&args.out.join(dir_name))?;
        for fold in &outcome.folds {
            let name = format!("{dir_name}/fold_{:02}.ckpt", fold.fold);
            let text = write_checkpoint(&fold.model.to_checkpoint());
            write(&args.out.join(&name), text.as_bytes())?;
            manifest.output(&name, text.as_bytes());
        }
        runs.push(outcome.report(cfg));
    }

    let names: Vec<String> = configs.iter().map(label).collect();
    print!(
        "{}",
        render_table(names.iter().map(String::as_str).zip(runs.iter().map(|r| &r.pooled)))
    );
    let report = CvRuns { runs };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write(&args.out.join("report.json"), text.as_bytes())?;
    manifest.output("report.json", text.as_bytes());
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn saliency(data_dir: &Path, args: SaliencyArgs) -> Result<()> {
    let mut manifest = RunManifest::new("saliency", &serde_json::Value::Null, 0)?;
    let model = load_model(&args.model, &mut manifest)?;
    manifest.config = serde_json::json!({
        "model": &model.config,
        "format": match args.format { HeatmapFormat::Csv => "csv", HeatmapFormat::Html => "html" },
    });
    manifest.seed = model.config.seed;
    let data = load_data(data_dir, &args.data, &mut manifest)?;
    let examples = prepare_examples(&model.config, &data.corpus, &data.mentions, &model.embeddings)?;
    create_dir(&args.out)?;
    for ex in &examples {
        let map = explain(&model, ex)
            .with_context(|| format!("mention {}/{}/{}", ex.doc_id, ex.sent_id, ex.token_id))?;
        let (ext, text) = match args.format {
            HeatmapFormat::Csv => ("csv", to_csv(&map)?),
            HeatmapFormat::Html => ("html", to_html(&map)?),
        };
        let name = heatmap_file_name(&ex.doc_id, &ex.sent_id, ex.token_id, ext);
        if manifest.outputs.contains_key(&name) {
            bail!("two mentions map to the heatmap file {name}");
        }
        write(&args.out.join(&name), text.as_bytes())?;
        manifest.output(&name, text.as_bytes());
    }
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    println!("wrote {} heatmaps to {}", examples.len(), args.out.display());
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let kind: ModelKind = args.model.into();
    let err = probe_gradients(kind, args.seed, args.eps)?;
    println!("{kind} seed {}: max relative error {err:.3e}", args.seed);
    ensure!(
        err < GRADCHECK_TOLERANCE,
        "max relative error {err:.3e} is not below {GRADCHECK_TOLERANCE:e}"
    );
    Ok(())
}
