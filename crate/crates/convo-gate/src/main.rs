use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use convo_gate::config::{CounterKind, RunConfig};
use convo_gate::corpus::{load_corpus, read_corpus, write_corpus, MalformedPolicy};
use convo_gate::gateway::{decide_snippet, effective_thresholds, serve, Gateway};
use convo_gate::manifest::{ingest, CorpusManifest, DatasetEntry, Role};
use convo_gate::model::{ClassifierModel, Counter};
use convo_gate::pipeline::train_artifact;
use convo_gate::report::{build_report, render_text, write_jsonl};
use convo_gate::teacher_http::{label_corpus, HttpTeacher};
use convo_gate::{GateError, Result};
use convo_gate_core::augment::sample_windows;
use convo_gate_core::conversation::render_model_input;
use convo_gate_core::filter::{Predicate, SegmentationConfig};
use convo_gate_core::rng::SplitMix64;
use convo_gate_core::sampling::sample_balanced;
use convo_gate_core::stats::compute_stats;
use convo_gate_core::synth::{build_desk_corpus, split_corpus};
use convo_gate_core::teacher::{
    generate_from_seeds, generate_persona_conversation, MockTeacher, PersonaOptions, PromptTemplates, Teacher,
};
use convo_gate_core::tokens::conversation_tokens;
use convo_gate_core::{Conversation, IntentSchema};

#[derive(Parser)]
#[command(name = "convo-gate", version, about = "Intent-based conversation filter")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TeacherKind {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize the datasets of a manifest into a corpus directory.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Label distribution and token totals of a corpus file.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum)]
        counter: Option<CounterKind>,
        /// External bundle whose tokenizer backs `--counter external`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Shuffle a corpus and write train/validation/test files.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        val: usize,
        #[arg(long)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw a label-balanced subset.
    Balance {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print window segments sampled from a corpus.
    AugmentPreview {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Conversations to show.
        #[arg(long, default_value_t = 5)]
        limit: usize,
    },
    /// Generate unlabeled synthetic conversations.
    Generate {
        #[command(subcommand)]
        source: GenerateSource,
    },
    /// Label every turn of a corpus with the teacher.
    Label {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "http")]
        teacher: TeacherKind,
        #[arg(long)]
        concurrency: Option<usize>,
    },
    /// Build a labeled synthetic corpus with the mock teacher and split it.
    DeskCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        val: usize,
        #[arg(long, default_value_t = 300)]
        test: usize,
    },
    /// Train the baseline classifier.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the training log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a model on every dataset of a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "any")]
        predicates: String,
        #[arg(long, value_enum)]
        counter: Option<CounterKind>,
        /// Only datasets with this role.
        #[arg(long)]
        role: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Batch filtering: keep the snippets the predicate forwards.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "any")]
        predicate: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        counter: Option<CounterKind>,
    },
    /// Run the filtering web service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Subcommand)]
enum GenerateSource {
    /// One conversation per seed line.
    Seeds {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        intent: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "http")]
        teacher: TeacherKind,
    },
    /// Persona-driven small-group conversations.
    Personas {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        speakers: usize,
        #[arg(long)]
        topic: Option<String>,
        #[arg(long, default_value_t = 6)]
        min_turns: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "http")]
        teacher: TeacherKind,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn teacher(kind: TeacherKind, cfg: &RunConfig) -> Result<Box<dyn Teacher + Sync>> {
    Ok(match kind {
        TeacherKind::Mock => Box::new(MockTeacher),
        TeacherKind::Http => Box::new(HttpTeacher::new(cfg.teacher.clone())?),
    })
}

fn load_model(path: &Path, schema: &IntentSchema) -> Result<Arc<ClassifierModel>> {
    let model = ClassifierModel::load_for(path, schema)?;
    log::info!("loaded {} model from {}", model.kind(), path.display());
    Ok(Arc::new(model))
}

/// Segmentation from the run configuration, rendered with the model's
/// separator.
fn segmentation_for(cfg: &RunConfig, model: &ClassifierModel) -> SegmentationConfig {
    SegmentationConfig { separator: model.separator().into(), ..cfg.segmentation.clone() }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    let schema = cfg.schema()?;
    let templates = PromptTemplates::default();
    match cli.command {
        Command::Ingest { manifest, out, schema: schema_path } => {
            let schema = match schema_path {
                Some(p) => convo_gate::config::load_schema(p)?,
                None => schema,
            };
            for s in ingest(&manifest, &out, &schema)? {
                println!(
                    "{:<32} {:<10} {:>8} conversations  {:>6} empty turns dropped  {:>4} empty conversations dropped",
                    s.name,
                    s.role.as_str(),
                    s.conversations,
                    s.dropped_turns,
                    s.dropped_conversations
                );
            }
        }
        Command::Stats { input, schema: schema_path, counter, model } => {
            let schema = match schema_path {
                Some(p) => convo_gate::config::load_schema(p)?,
                None => schema,
            };
            let model = model.map(|p| load_model(&p, &schema)).transpose()?;
            let counter = Counter::new(counter.unwrap_or(cfg.counter), model.as_ref())?;
            let convs = load_corpus(&input, &schema)?;
            let stats = compute_stats(&convs, schema.len(), &counter)?;
            println!("{}: {} conversations, {} tokens", input.display(), stats.total, stats.total_tokens);
            for (k, id) in schema.ids().enumerate() {
                println!(
                    "  {id:<24} positive {:>8}  negative {:>8}",
                    stats.per_intent_positive[k], stats.per_intent_negative[k]
                );
            }
        }
        Command::Split { input, out, val, test, seed } => {
            let convs = load_corpus(&input, &schema)?;
            let (train, val, test) = split_corpus(convs, val, test, seed)?;
            write_splits(&out, &schema, train, val, test)?;
        }
        Command::Balance { input, out, size, seed } => {
            let convs = load_corpus(&input, &schema)?;
            let picked = sample_balanced(&convs, size, seed)?;
            let stats = compute_stats(&picked, schema.len(), &convo_gate_core::tokens::WhitespaceCounter)?;
            let n = write_corpus(&picked, &out, &schema)?;
            println!("wrote {n} conversations to {}", out.display());
            for (k, id) in schema.ids().enumerate() {
                println!("  {id:<24} positive {:>8}", stats.per_intent_positive[k]);
            }
        }
        Command::AugmentPreview { input, seed, limit } => {
            let window = convo_gate_core::augment::WindowConfig { seed, ..cfg.train.window.clone() };
            let mut rng = SplitMix64::new(seed);
            for conv in read_corpus(&input, &schema, MalformedPolicy::Abort)?.take(limit) {
                let conv = conv?;
                println!("{} ({} turns)", conv.id, conv.turns.len());
                for s in sample_windows(&conv, &window, &mut rng)? {
                    let text = render_model_input(&conv, s.range, &cfg.segmentation.separator)?;
                    println!("  turns {}..{} labels {:?}: {text}", s.range.start, s.range.end, s.labels.to_bits());
                }
            }
        }
        Command::Generate { source } => generate(source, &cfg, &schema, &templates)?,
        Command::Label { input, out, teacher: kind, concurrency } => {
            let convs = read_corpus(&input, &schema, MalformedPolicy::Abort)?.collect::<Result<Vec<_>>>()?;
            let t = teacher(kind, &cfg)?;
            let concurrency = concurrency.unwrap_or(cfg.teacher.concurrency);
            let labeled = label_corpus(convs, &schema, t.as_ref(), &templates, concurrency)
                .map_err(|(id, e)| GateError::Usage(format!("labeling {id}: {e}")))?;
            let n = write_corpus(&labeled, &out, &schema)?;
            println!("labeled {n} conversations into {}", out.display());
        }
        Command::DeskCorpus { out, val, test } => {
            let convs = build_desk_corpus(&MockTeacher, &schema, &cfg.desk, &templates)?;
            let (train, val, test) = split_corpus(convs, val, test, cfg.desk.seed)?;
            write_splits(&out, &schema, train, val, test)?;
        }
        Command::Train { train, val, out, log: log_path } => {
            let train_convs = load_corpus(&train, &schema)?;
            let val_convs = load_corpus(&val, &schema)?;
            let counter = Counter::new(cfg.counter, None)?;
            let trained_on = train.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let (artifact, train_log) = train_artifact(
                &train_convs,
                &val_convs,
                &schema,
                &cfg.train,
                &cfg.segmentation,
                &counter,
                &trained_on,
            )?;
            artifact.save(&out).map_err(GateError::io(&out))?;
            if let Some(best) = train_log.best() {
                println!("best step {} mean F1 {:.4}", best.step, best.mean_f1);
                for (id, m) in schema.ids().zip(&best.per_intent) {
                    println!("  {id:<24} P {:.4}  R {:.4}  F1 {:.4}", m.precision, m.recall, m.f1);
                }
            }
            if let Some(p) = log_path {
                let json = serde_json::to_string_pretty(&train_log).expect("training log serializes");
                std::fs::write(&p, json).map_err(GateError::io(&p))?;
            }
            println!("saved {}", out.display());
        }
        Command::Eval { manifest, model, predicates, counter, role, report } => {
            let model = load_model(&model, &schema)?;
            let counter = Counter::new(counter.unwrap_or(cfg.counter), Some(&model))?;
            let predicates = Predicate::parse_list(&predicates, &schema)?;
            let thresholds = effective_thresholds(&model, &schema, &cfg.gateway.thresholds)?;
            let seg = segmentation_for(&cfg, &model);
            let role = role.map(|r| parse_role(&r)).transpose()?;
            let manifest = CorpusManifest::load(&manifest)?;
            let mut datasets = Vec::new();
            for d in manifest.datasets.iter().filter(|d| role.is_none_or(|r| d.role == r)) {
                datasets.push((d.name.clone(), load_corpus(&d.path, &schema)?));
            }
            let reports = build_report(&datasets, model.as_ref(), &schema, &thresholds, &predicates, &seg, &counter)?;
            print!("{}", render_text(&reports));
            if let Some(p) = report {
                write_jsonl(&reports, &p)?;
            }
        }
        Command::Filter { input, model, predicate, out, counter } => {
            let model = load_model(&model, &schema)?;
            let counter = Counter::new(counter.unwrap_or(cfg.counter), Some(&model))?;
            let predicate = Predicate::parse(&predicate, &schema)?;
            let thresholds = effective_thresholds(&model, &schema, &cfg.gateway.thresholds)?;
            let seg = segmentation_for(&cfg, &model);
            let (mut total, mut forwarded_tokens) = (0u64, 0u64);
            let mut kept = Vec::new();
            let mut seen = 0usize;
            for conv in read_corpus(&input, &schema, MalformedPolicy::Abort)? {
                let conv = conv?;
                seen += 1;
                let tokens = conversation_tokens(&conv, &counter) as u64;
                total += tokens;
                let (_, forward) = decide_snippet(&model, &conv, &seg, &counter, &thresholds, predicate)?;
                if forward {
                    forwarded_tokens += tokens;
                    kept.push(conv);
                }
            }
            write_corpus(&kept, &out, &schema)?;
            let reduction = convo_gate_core::reduction::reduction_pct(forwarded_tokens, total)?;
            println!(
                "forwarded {} of {seen} snippets, {forwarded_tokens} of {total} tokens ({reduction:.2}% reduction)",
                kept.len()
            );
        }
        Command::Serve { listen } => {
            let path = cfg
                .gateway
                .model
                .clone()
                .ok_or_else(|| GateError::Usage("gateway.model is not set in the configuration".into()))?;
            let model = load_model(&path, &schema)?;
            let listen = listen.unwrap_or_else(|| cfg.gateway.listen.clone());
            let runtime = tokio::runtime::Runtime::new().map_err(|e| GateError::Usage(format!("runtime: {e}")))?;
            runtime.block_on(async {
                let gateway = Gateway::new(model, schema, &cfg.gateway, cfg.segmentation.clone()).await?;
                serve(Arc::new(gateway), &listen).await
            })?;
        }
    }
    Ok(())
}

fn parse_role(s: &str) -> Result<Role> {
    match s {
        "train" => Ok(Role::Train),
        "validation" => Ok(Role::Validation),
        "test" => Ok(Role::Test),
        _ => Err(GateError::Usage(format!("unknown role {s:?} (train, validation, test)"))),
    }
}

fn write_splits(
    out: &Path,
    schema: &IntentSchema,
    train: Vec<Conversation>,
    val: Vec<Conversation>,
    test: Vec<Conversation>,
) -> Result<()> {
    let mut manifest = CorpusManifest::default();
    for (name, role, convs) in
        [("train", Role::Train, train), ("validation", Role::Validation, val), ("test", Role::Test, test)]
    {
        let file = PathBuf::from(format!("{name}.jsonl"));
        let n = write_corpus(&convs, out.join(&file), schema)?;
        println!("{name:<10} {n:>8} conversations");
        manifest.datasets.push(DatasetEntry { name: name.into(), path: file, role, notes: String::new() });
    }
    manifest.save(out.join("manifest.toml"))
}

fn generate(source: GenerateSource, cfg: &RunConfig, schema: &IntentSchema, templates: &PromptTemplates) -> Result<()> {
    match source {
        GenerateSource::Seeds { seeds, intent, out, teacher: kind } => {
            let descriptor = schema
                .get(&intent)
                .ok_or_else(|| GateError::Usage(format!("intent {intent:?} is not in the schema")))?;
            let text = std::fs::read_to_string(&seeds).map_err(GateError::io(&seeds))?;
            let lines: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
            let t = teacher(kind, cfg)?;
            let convs =
                generate_from_seeds(&lines, descriptor, t.as_ref(), templates).collect::<Result<Vec<_>, _>>()?;
            let n = write_corpus(&convs, &out, schema)?;
            println!("generated {n} conversations into {}", out.display());
        }
        GenerateSource::Personas { count, speakers, topic, min_turns, seed, out, teacher: kind } => {
            let t = teacher(kind, cfg)?;
            let mut rng = SplitMix64::new(seed);
            let mut convs = Vec::with_capacity(count);
            for _ in 0..count {
                let opts =
                    PersonaOptions { n_speakers: speakers, topic_hint: topic.clone(), min_turns, seed: rng.next_u64() };
                convs.push(generate_persona_conversation(&opts, t.as_ref(), templates)?);
            }
            let n = write_corpus(&convs, &out, schema)?;
            println!("generated {n} conversations into {}", out.display());
        }
    }
    Ok(())
}
