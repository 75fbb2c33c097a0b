use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use d2t_core::corpus::{
    generate_synthetic, load_corpus, save_corpus, tokenize, CorpusPair, SyntheticSpec, Vocabulary, PATTERN_SET_VERSION,
};
use d2t_core::dataprep::{
    align_records, find_entities, load_filter_rules, words_to_number, AlignConfig, DataprepError, FilterRule, ScoreTable,
    TableRow,
};
use d2t_core::metrics::{distance_table, evaluate_by_distance, evaluate_detailed, ContentLexicon, Generation, NUMERAL_RULE};
use d2t_core::model::Model;
use d2t_core::numeric::{Precision, Real};
use d2t_core::retrieval::{load_triple_refs, save_triple_refs, ExemplarIndex, RetrievalConfig, RetrievalError, TripleRef};
use d2t_core::seed;
use d2t_core::slotfill::slot_fill;
use d2t_core::training::{
    gradcheck_model, gradient_check, resolve_triples, retrieve_triples, train_model, CoverageMode, EpochLog, LossWeights,
    TrainConfig, TrainingTriple,
};

use crate::manifest::{sibling, PipelineManifest};
use crate::{
    EvaluateArgs, GenSyntheticArgs, GenerateArgs, GradcheckArgs, PrepareNbaArgs, RetrieveArgs, SlotfillArgs, Sources,
    TrainArgs, TrainOverrides,
};

/// A failure inside one module, tied to the instance (or file) being processed.
#[derive(Debug)]
pub struct CliError {
    module: &'static str,
    instance: String,
    message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: instance {}: {}", self.module, self.instance, self.message)
    }
}

fn fail(module: &'static str, instance: impl fmt::Display, err: impl fmt::Display) -> CliError {
    CliError {
        module,
        instance: instance.to_string(),
        message: err.to_string(),
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn args_of(argv: &[String]) -> Vec<String> {
    argv.iter().skip(1).cloned().collect()
}

fn finish(manifest: &PipelineManifest, out: &Path) -> Result<()> {
    manifest.write(out).map_err(|e| fail("cli", out.display(), e))?;
    Ok(())
}

fn write_file(module: &'static str, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| fail(module, path.display(), e))
}

fn load_pairs(path: &Path) -> Result<Vec<CorpusPair>> {
    load_corpus(path).map_err(|e| fail("corpus", path.display(), e))
}

struct Loaded {
    corpus: Vec<CorpusPair>,
    pool: Option<Vec<CorpusPair>>,
}

impl Loaded {
    fn pool(&self) -> &[CorpusPair] {
        self.pool.as_deref().unwrap_or(&self.corpus)
    }
}

fn load_sources(sources: &Sources, manifest: &mut PipelineManifest) -> Result<Loaded> {
    manifest.input("corpus", &sources.corpus);
    let corpus = load_pairs(&sources.corpus)?;
    let pool = match &sources.pool {
        Some(p) => {
            manifest.input("pool", p);
            Some(load_pairs(p)?)
        }
        None => None,
    };
    Ok(Loaded { corpus, pool })
}

fn load_triples(path: &Path, loaded: &Loaded, manifest: &mut PipelineManifest) -> Result<Vec<TrainingTriple>> {
    manifest.input("triples", path);
    let refs = load_triple_refs(path).map_err(|e| fail("retrieval", path.display(), e))?;
    resolve_triples(&refs, &loaded.corpus, loaded.pool()).map_err(|e| {
        let instance = match &e {
            RetrievalError::UnknownId(id) | RetrievalError::DistanceMismatch { id, .. } => id.clone(),
            _ => path.display().to_string(),
        };
        fail("retrieval", instance, e)
    })
}

fn lexicon_of_triples(triples: &[TrainingTriple], path: &Path) -> Result<ContentLexicon> {
    ContentLexicon::from_triples(triples).map_err(|e| fail("metrics", path.display(), e))
}

#[derive(Serialize, Deserialize)]
struct GenerationLine {
    id: String,
    text: String,
}

fn write_generations(path: &Path, gens: &[Generation]) -> Result<()> {
    let mut buf = Vec::new();
    for g in gens {
        let line = GenerationLine {
            id: g.id.clone(),
            text: g.tokens.join(" "),
        };
        writeln!(buf, "{}", serde_json::to_string(&line).expect("generation serializes")).expect("write to memory");
    }
    write_file("cli", path, buf)
}

fn read_generations(path: &Path) -> Result<Vec<Generation>> {
    let text = fs::read_to_string(path).map_err(|e| fail("metrics", path.display(), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let g: GenerationLine =
                serde_json::from_str(l).map_err(|e| fail("metrics", format!("{}:{}", path.display(), i + 1), e))?;
            Ok(Generation {
                id: g.id,
                tokens: g.text.split_whitespace().map(str::to_string).collect(),
            })
        })
        .collect()
}

pub fn gen_synthetic(a: GenSyntheticArgs, argv: &[String]) -> Result<()> {
    let mut spec = SyntheticSpec::restaurant(a.pairs, a.seed);
    if let Some(n) = a.min_fields {
        spec.min_fields = n;
    }
    if let Some(n) = a.max_fields {
        spec.max_fields = n;
    }
    let pairs = generate_synthetic(&spec).map_err(|e| fail("corpus", "synthetic", e))?;
    save_corpus(&a.out, &pairs).map_err(|e| fail("corpus", a.out.display(), e))?;

    let mut m = PipelineManifest::new("gen-synthetic", &args_of(argv));
    m.seed = Some(a.seed);
    m.config = json!({
        "pairs": a.pairs,
        "min_fields": spec.min_fields,
        "max_fields": spec.max_fields,
        "pattern_set_version": PATTERN_SET_VERSION,
    });
    m.output(&a.out);
    m.lexicon_hash = ContentLexicon::from_pairs(&pairs).ok().map(|l| l.hash());
    finish(&m, &a.out)
}

#[derive(Deserialize)]
struct Game {
    id: String,
    table: Vec<TableRow>,
    sentences: Vec<String>,
}

/// Entity names collapsed to single tokens and spelled-out numbers
/// rewritten as digits, so record values occur verbatim in the text.
fn normalize_sentence(sentence: &str, table: &ScoreTable) -> Vec<String> {
    let (tokens, mentions) = find_entities(&tokenize(sentence), table.lexicon());
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let is_entity = mentions.iter().any(|(p, _)| *p == i);
        match words_to_number(&tokens[i..]).filter(|_| !is_entity) {
            Some((n, k)) => {
                out.push(n.to_string());
                i += k;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

pub fn prepare_nba(a: PrepareNbaArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("prepare-nba", &args_of(argv));
    m.input("games", &a.corpus);
    let rules = match &a.rules {
        Some(p) => {
            m.input("rules", p);
            load_filter_rules(p).map_err(|e| fail("dataprep", p.display(), e))?
        }
        None => FilterRule::starter_set(),
    };
    let text = fs::read_to_string(&a.corpus).map_err(|e| fail("dataprep", a.corpus.display(), e))?;
    let config = AlignConfig::default();
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let game: Game =
            serde_json::from_str(line).map_err(|e| fail("dataprep", format!("{}:{}", a.corpus.display(), line_no + 1), e))?;
        let table = ScoreTable::new(game.table, Vec::<String>::new()).map_err(|e| fail("dataprep", &game.id, e))?;
        for (k, sentence) in game.sentences.iter().enumerate() {
            let id = format!("{}-{k}", game.id);
            let tokens = normalize_sentence(sentence, &table);
            match align_records(&tokens, &table, &rules, &config) {
                Ok(record) => pairs.push(CorpusPair::new(id.clone(), record, tokens).map_err(|e| fail("dataprep", &id, e))?),
                Err(DataprepError::NoScoreEntries | DataprepError::EmptySentence) => skipped += 1,
                Err(e) => return Err(fail("dataprep", &id, e)),
            }
        }
    }
    save_corpus(&a.out, &pairs).map_err(|e| fail("corpus", a.out.display(), e))?;

    m.config = json!({
        "entity_field": config.entity_field,
        "max_entries": config.max_entries,
        "rules": rules,
        "pairs": pairs.len(),
        "skipped_sentences": skipped,
    });
    m.output(&a.out);
    m.lexicon_hash = ContentLexicon::from_pairs(&pairs).ok().map(|l| l.hash());
    finish(&m, &a.out)
}

pub fn retrieve(a: RetrieveArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("retrieve", &args_of(argv));
    let loaded = load_sources(&a.sources, &mut m)?;
    let config = RetrievalConfig {
        max_distance: a.max_distance,
        prefer_equal_size: true,
    };
    let index = ExemplarIndex::new(loaded.pool()).map_err(|e| fail("retrieval", "pool", e))?;
    let draw = seed::derive(a.seed, "retrieval", 0);
    let triples = retrieve_triples(&loaded.corpus, &index, &config, draw).map_err(|e| fail("retrieval", "corpus", e))?;
    if triples.is_empty() {
        return Err(fail("retrieval", a.sources.corpus.display(), "no query has an exemplar within range"));
    }
    let refs: Vec<TripleRef> = triples
        .iter()
        .map(|t| TripleRef {
            id: t.id.clone(),
            exemplar_id: t.exemplar_id.clone(),
            distance: t.distance,
        })
        .collect();
    for q in loaded.corpus.iter().filter(|q| !refs.iter().any(|r| r.id == q.id)) {
        eprintln!("retrieval: instance {}: no exemplar within distance {}, skipped", q.id, a.max_distance);
    }
    save_triple_refs(&a.out, &refs).map_err(|e| fail("retrieval", a.out.display(), e))?;

    m.seed = Some(a.seed);
    m.config = json!({
        "max_distance": config.max_distance,
        "prefer_equal_size": config.prefer_equal_size,
        "queries": loaded.corpus.len(),
        "triples": refs.len(),
    });
    m.output(&a.out);
    m.lexicon_hash = Some(lexicon_of_triples(&triples, &a.out)?.hash());
    finish(&m, &a.out)
}

fn resolve_config(path: Option<&Path>, o: &TrainOverrides) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| fail("training", p.display(), e))?;
            TrainConfig::parse(&text).map_err(|e| fail("training", p.display(), e))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.max_distance {
        cfg.max_distance = v;
    }
    if let Some(v) = o.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = o.eta {
        cfg.eta = v;
    }
    if let Some(v) = o.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = o.epochs_pretrain {
        cfg.epochs_pretrain = v;
    }
    if let Some(v) = o.epochs_full {
        cfg.epochs_full = v;
    }
    if let Some(v) = o.precision {
        cfg.precision = v;
    }
    cfg.validate().map_err(|e| fail("training", "config", e))?;
    Ok(cfg)
}

fn run_training<T: Real>(a: &TrainArgs, cfg: &TrainConfig, loaded: &Loaded) -> Result<Vec<EpochLog>> {
    let model: Model<T> = match &a.init {
        Some(p) => Model::load(p).map_err(|e| fail("model", p.display(), e))?,
        None => {
            let vocab = d2t_core::training::build_vocab(&loaded.corpus, loaded.pool(), cfg.min_count)
                .map_err(|e| fail("training", "vocabulary", e))?;
            Model::init(vocab, cfg.embed_dim, cfg.hidden_dim, seed::derive(cfg.seed, "init", 0))
        }
    };
    let (model, log) = train_model(model, &loaded.corpus, loaded.pool(), cfg, |e, _| {
        eprintln!(
            "epoch {:>3} {:?}: content {:.4} style {:.4} coverage {:.4} total {:.4}",
            e.epoch, e.phase, e.content_nll, e.style_nll, e.coverage, e.total
        );
    })
    .map_err(|e| match e {
        d2t_core::training::TrainError::Diverged { epoch, reason, .. } => {
            fail("training", format!("epoch {epoch}"), format!("diverged: {reason}"))
        }
        other => fail("training", a.sources.corpus.display(), other),
    })?;
    model.save(&a.out).map_err(|e| fail("model", a.out.display(), e))?;
    Ok(log)
}

pub fn train(a: TrainArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("train", &args_of(argv));
    let cfg = resolve_config(a.config.as_deref(), &a.overrides)?;
    if let Some(p) = &a.config {
        m.input("config", p);
    }
    if let Some(p) = &a.init {
        m.input("init", p);
    }
    let loaded = load_sources(&a.sources, &mut m)?;
    let log = match cfg.precision {
        Precision::F64 => run_training::<f64>(&a, &cfg, &loaded)?,
        Precision::F32 => run_training::<f32>(&a, &cfg, &loaded)?,
    };
    let log_path = sibling(&a.out, ".log.jsonl");
    let mut buf = String::new();
    for e in &log {
        buf.push_str(&serde_json::to_string(e).expect("log serializes"));
        buf.push('\n');
    }
    write_file("training", &log_path, buf)?;

    m.seed = Some(cfg.seed);
    m.config = serde_json::to_value(&cfg).expect("config serializes");
    m.output(&a.out);
    m.output(d2t_core::model::vocab_path(&a.out));
    m.output(log_path);
    m.lexicon_hash = ContentLexicon::from_pairs(&loaded.corpus).ok().map(|l| l.hash());
    finish(&m, &a.out)
}

fn decode_all<T: Real>(model: &Model<T>, triples: &[TrainingTriple], width: usize, max_len: usize) -> Result<Vec<Generation>> {
    triples
        .iter()
        .map(|t| {
            let tokens = model.beam_search(&t.x, &t.y_e, width, max_len).map_err(|e| fail("model", &t.id, e))?;
            Ok(Generation { id: t.id.clone(), tokens })
        })
        .collect()
}

pub fn generate(a: GenerateArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("generate", &args_of(argv));
    let base = resolve_config(a.config.as_deref(), &TrainOverrides::default())?;
    if let Some(p) = &a.config {
        m.input("config", p);
    }
    let width = a.width.unwrap_or(base.beam_width);
    let max_len = a.max_len.unwrap_or(base.max_len);
    let precision = a.precision.unwrap_or(base.precision);
    if width == 0 {
        return Err(fail("model", "config", "beam width must be positive"));
    }
    let loaded = load_sources(&a.sources, &mut m)?;
    let triples = load_triples(&a.triples, &loaded, &mut m)?;
    m.input("model", &a.model);
    let gens = match precision {
        Precision::F64 => {
            let model: Model<f64> = Model::load(&a.model).map_err(|e| fail("model", a.model.display(), e))?;
            decode_all(&model, &triples, width, max_len)?
        }
        Precision::F32 => {
            let model: Model<f32> = Model::load(&a.model).map_err(|e| fail("model", a.model.display(), e))?;
            decode_all(&model, &triples, width, max_len)?
        }
    };
    write_generations(&a.out, &gens)?;

    m.config = json!({ "width": width, "max_len": max_len, "precision": precision });
    m.output(&a.out);
    m.lexicon_hash = Some(lexicon_of_triples(&triples, &a.triples)?.hash());
    finish(&m, &a.out)
}

pub fn slotfill(a: SlotfillArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("slotfill", &args_of(argv));
    let loaded = load_sources(&a.sources, &mut m)?;
    let triples = load_triples(&a.triples, &loaded, &mut m)?;
    let gens: Vec<Generation> = triples
        .iter()
        .map(|t| Generation {
            id: t.id.clone(),
            tokens: slot_fill(t),
        })
        .collect();
    write_generations(&a.out, &gens)?;

    m.config = json!({ "rules": FilterRule::starter_set() });
    m.output(&a.out);
    m.lexicon_hash = Some(lexicon_of_triples(&triples, &a.triples)?.hash());
    finish(&m, &a.out)
}

pub fn evaluate(a: EvaluateArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("evaluate", &args_of(argv));
    let loaded = load_sources(&a.sources, &mut m)?;
    let triples = load_triples(&a.triples, &loaded, &mut m)?;
    m.input("generations", &a.gen);
    let gens = read_generations(&a.gen)?;
    let lexicon = lexicon_of_triples(&triples, &a.triples)?;
    let metric_err = |e: d2t_core::metrics::MetricsError| {
        let instance = match &e {
            d2t_core::metrics::MetricsError::MissingGeneration(id)
            | d2t_core::metrics::MetricsError::UnexpectedGeneration(id) => id.clone(),
            _ => a.gen.display().to_string(),
        };
        fail("metrics", instance, e)
    };
    let (report, instances) = evaluate_detailed(&triples, &gens, &lexicon).map_err(metric_err)?;

    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file("metrics", &a.out, &text)?;
    let inst_path = sibling(&a.out, ".instances.jsonl");
    let mut buf = String::new();
    for i in &instances {
        buf.push_str(&serde_json::to_string(i).expect("scores serialize"));
        buf.push('\n');
    }
    write_file("metrics", &inst_path, buf)?;
    let lex_path = sibling(&a.out, ".lexicon.txt");
    let mut lex = format!("# numeral rule: {NUMERAL_RULE}\n");
    for v in lexicon.values() {
        lex.push_str(v);
        lex.push('\n');
    }
    write_file("metrics", &lex_path, lex)?;
    m.output(&a.out);
    m.output(inst_path);
    m.output(lex_path);
    if let Some(plot) = &a.plot {
        let rows = evaluate_by_distance(&triples, &gens, &lexicon).map_err(metric_err)?;
        write_file("metrics", plot, distance_table(&rows))?;
        m.output(plot);
    }
    print!("{text}");

    m.config = json!({ "numeral_rule": NUMERAL_RULE, "reference": "exemplar" });
    m.lexicon_hash = Some(lexicon.hash());
    finish(&m, &a.out)
}

/// At most `cap` tokens, reserved ones included; the rest of the corpus
/// vocabulary is left to the unknown token and the copy channel.
fn capped_vocab(pairs: &[CorpusPair], cap: usize) -> Result<Vocabulary> {
    let full = Vocabulary::build(pairs, 1).map_err(|e| fail("corpus", "vocabulary", e))?;
    let reserved = (0..full.len()).filter(|&i| Vocabulary::is_reserved(i)).count();
    let keep: Vec<&str> = full
        .tokens()
        .iter()
        .enumerate()
        .filter(|(i, _)| !Vocabulary::is_reserved(*i))
        .take(cap.saturating_sub(reserved))
        .map(|(_, t)| t.as_str())
        .collect();
    Vocabulary::from_tokens(keep).map_err(|e| fail("corpus", "vocabulary", e))
}

pub fn gradcheck(a: GradcheckArgs, argv: &[String]) -> Result<()> {
    let mut m = PipelineManifest::new("gradcheck", &args_of(argv));
    let pairs = match &a.corpus {
        Some(p) => {
            m.input("corpus", p);
            load_pairs(p)?
        }
        None => {
            let mut spec = SyntheticSpec::restaurant(60, a.seed);
            spec.min_fields = 3;
            spec.max_fields = 3;
            generate_synthetic(&spec).map_err(|e| fail("corpus", "synthetic", e))?
        }
    };
    let vocab = capped_vocab(&pairs, 50)?;
    let model = gradcheck_model(vocab, 8, 8, seed::derive(a.seed, "init", 0));
    let index = ExemplarIndex::new(&pairs).map_err(|e| fail("retrieval", "pool", e))?;
    let rcfg = RetrievalConfig {
        max_distance: 3,
        prefer_equal_size: true,
    };
    let triples = retrieve_triples(&pairs, &index, &rcfg, seed::derive(a.seed, "retrieval", 0))
        .map_err(|e| fail("retrieval", "corpus", e))?;
    let weights = [
        LossWeights::new(0.2, 1.0),
        LossWeights::new(0.0, 0.0),
        LossWeights {
            coverage: CoverageMode::Content,
            ..LossWeights::new(0.7, 0.5)
        },
    ];
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut worst_id = String::new();
    for (i, t) in triples.iter().take(a.instances).enumerate() {
        let w = weights[i % weights.len()];
        let r = gradient_check(&model, t, &w, a.epsilon, 200, seed::derive(a.seed, "gradcheck", i as u64))
            .map_err(|e| fail("training", &t.id, e))?;
        if r.max_relative_error >= worst {
            worst = r.max_relative_error;
            worst_id = t.id.clone();
        }
        rows.push(json!({ "id": t.id, "weights": w, "report": r }));
    }
    let report = json!({
        "max_relative_error": worst,
        "tolerance": a.tolerance,
        "epsilon": a.epsilon,
        "instances": rows,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file("training", &a.out, text)?;
    println!("max relative error {worst:.3e} over {} instances", rows.len());

    m.seed = Some(a.seed);
    m.config = json!({ "embed_dim": 8, "hidden_dim": 8, "vocab_cap": 50, "epsilon": a.epsilon, "tolerance": a.tolerance });
    m.output(&a.out);
    finish(&m, &a.out)?;
    if worst > a.tolerance {
        return Err(fail(
            "training",
            worst_id,
            format!("gradient relative error {worst:.3e} exceeds {:.1e}", a.tolerance),
        ));
    }
    Ok(())
}
