//! Acceptance checks for the whole toolkit. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use d2t_core::corpus::{generate_synthetic, save_corpus, CorpusPair, Record, SyntheticSpec, Vocabulary};
use d2t_core::dataprep::words_to_number;
use d2t_core::metrics::{evaluate, ContentLexicon, EvalReport, Generation};
use d2t_core::model::Model;
use d2t_core::retrieval::{
    build_triple_refs, field_set_distance, save_triple_refs, ExemplarIndex, RetrievalConfig,
};
use d2t_core::seed;
use d2t_core::slotfill::slot_fill;
use d2t_core::training::{
    build_vocab, coverage_penalty, gradcheck_model, gradient_check, resolve_triples, retrieve_triples,
    teacher_forced_accuracy, train, train_model, CoverageMode, LossWeights, TrainConfig, TrainingTriple,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synthetic(n: usize, seed: u64) -> Vec<CorpusPair> {
    generate_synthetic(&SyntheticSpec::restaurant(n, seed)).unwrap()
}

fn test_set(n: usize, seed: u64) -> Vec<CorpusPair> {
    synthetic(n, seed)
        .into_iter()
        .map(|mut p| {
            p.id = format!("test-{}", p.id);
            p
        })
        .collect()
}

fn triples_at(queries: &[CorpusPair], pool: &[CorpusPair], max_distance: usize) -> Vec<TrainingTriple> {
    let index = ExemplarIndex::new(pool).unwrap();
    let cfg = RetrievalConfig {
        max_distance,
        prefer_equal_size: true,
    };
    retrieve_triples(queries, &index, &cfg, seed::derive(7, "retrieval", 0)).unwrap()
}

fn decode(model: &Model<f64>, ts: &[TrainingTriple], width: usize) -> Vec<Generation> {
    ts.iter()
        .map(|t| Generation {
            id: t.id.clone(),
            tokens: model.beam_search(&t.x, &t.y_e, width, 50).unwrap(),
        })
        .collect()
}

fn slot_filled(ts: &[TrainingTriple]) -> Vec<Generation> {
    ts.iter()
        .map(|t| Generation {
            id: t.id.clone(),
            tokens: slot_fill(t),
        })
        .collect()
}

/// Models shared by the training criteria.
struct Trained {
    train: Vec<CorpusPair>,
    test: Vec<CorpusPair>,
    pretrained: Model<f64>,
    pretrain_time: Duration,
    with_coverage: Model<f64>,
    without_coverage: Model<f64>,
    untrained: Model<f64>,
}

fn full_config(eta: f64) -> TrainConfig {
    TrainConfig {
        lambda: 0.2,
        eta,
        epochs_pretrain: 0,
        epochs_full: 10,
        max_distance: 2,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn trained() -> Trained {
    let train_pairs = synthetic(2000, 7);
    let test = test_set(500, 8);
    let start = Instant::now();
    let pre_cfg = TrainConfig {
        epochs_pretrain: 10,
        epochs_full: 0,
        ..full_config(1.0)
    };
    let (pretrained, _) = train::<f64>(&train_pairs, &train_pairs, &pre_cfg, |_, _| {}).unwrap();
    let pretrain_time = start.elapsed();
    let full = |eta: f64| train_model(pretrained.clone(), &train_pairs, &train_pairs, &full_config(eta), |_, _| {}).unwrap().0;
    let with_coverage = full(1.0);
    let without_coverage = full(0.0);
    let untrained = Model::init(
        build_vocab(&train_pairs, &train_pairs, pre_cfg.min_count).unwrap(),
        pre_cfg.embed_dim,
        pre_cfg.hidden_dim,
        seed::derive(7, "init", 0),
    );
    Trained {
        train: train_pairs,
        test,
        pretrained,
        pretrain_time,
        with_coverage,
        without_coverage,
        untrained,
    }
}

fn lexicon(t: &Trained) -> ContentLexicon {
    ContentLexicon::from_pairs(&[t.train.clone(), t.test.clone()].concat()).unwrap()
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut spec = SyntheticSpec::restaurant(60, 3);
    spec.min_fields = 3;
    spec.max_fields = 3;
    let pairs = generate_synthetic(&spec).unwrap();
    let full = Vocabulary::build(&pairs, 1).unwrap();
    let vocab = Vocabulary::from_tokens(full.tokens().iter().skip(5).take(45).cloned()).unwrap();
    let model = gradcheck_model(vocab, 8, 8, 11);
    assert!(model.vocab.len() <= 50);
    let ts = triples_at(&pairs, &pairs, 3);
    let weights = [
        LossWeights::new(0.2, 1.0),
        LossWeights::new(0.0, 0.0),
        LossWeights {
            coverage: CoverageMode::Content,
            ..LossWeights::new(0.7, 0.5)
        },
    ];
    let mut worst = 0.0f64;
    for (i, t) in ts.iter().take(12).enumerate() {
        let r = gradient_check(&model, t, &weights[i % 3], 1e-5, 200, i as u64).unwrap();
        worst = worst.max(r.max_relative_error);
    }
    let took = start.elapsed();
    ensure(
        worst <= 1e-4 && took < Duration::from_secs(120),
        format!("max relative error {worst:.2e} over 12 triples in {took:.1?}"),
    )
}

fn distribution_normalization() -> Outcome {
    let pairs = synthetic(120, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut steps = 0;
    for model_seed in 0..50u64 {
        let full = Vocabulary::build(&pairs, 1).unwrap();
        let keep = 20 + (model_seed as usize % 40);
        let vocab = Vocabulary::from_tokens(full.tokens().iter().skip(5).take(keep).cloned()).unwrap();
        let model: Model<f64> = Model::init(vocab, 6, 7, model_seed);
        let q = pairs.choose(&mut rng).unwrap();
        let e = pairs.choose(&mut rng).unwrap();
        let src = model.encode(&q.record, &e.text).unwrap();
        let union: BTreeSet<&str> =
            model.vocab.tokens().iter().map(String::as_str).chain(q.record.values()).collect();
        let mut state = src.initial_state.clone();
        let mut prev = "<s>".to_string();
        for _ in 0..20 {
            let (step, next) = model.decode_step(&state, &prev, &src).unwrap();
            let sv: f64 = step.p_vocab.iter().sum();
            let sx: f64 = step.p_copy.iter().sum();
            let st: f64 = union.iter().map(|t| model.token_probability(&step, &src, t)).sum();
            for s in [sv, sx, st] {
                worst = worst.max((s - 1.0).abs());
            }
            prev = if rng.gen_bool(0.5) {
                model.vocab.tokens()[rng.gen_range(0..model.vocab.len())].clone()
            } else {
                q.record.values().nth(rng.gen_range(0..q.record.len())).unwrap().to_string()
            };
            state = next;
            steps += 1;
        }
    }
    ensure(worst <= 1e-6, format!("{steps} steps, max deviation {worst:.2e}"))
}

fn coverage_zero_case() -> Outcome {
    let exact = vec![vec![0.25, 0.5, 0.0], vec![0.75, 0.25, 0.0], vec![0.0, 0.25, 1.0]];
    let zero = coverage_penalty(&exact);
    let hand = [
        (vec![vec![0.9, 0.1], vec![0.8, 0.2]], 0.7f64 * 0.7 + 0.7 * 0.7),
        (vec![vec![1.0, 0.0, 0.0]], 0.0 + 1.0 + 1.0),
        (vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]], 0.25 + 0.25),
    ];
    let err = hand.iter().map(|(d, want)| (coverage_penalty(d) - want).abs()).fold(0.0f64, f64::max);
    ensure(zero == 0.0 && err <= 1e-12, format!("exact case {zero}, hand cases max error {err:.1e}"))
}

fn slot_fill_identity() -> Outcome {
    let pool = synthetic(2000, 7);
    let ts = triples_at(&test_set(1000, 8), &pool, 5);
    let start = Instant::now();
    let lex = ContentLexicon::from_triples(&ts).unwrap();
    let r = evaluate(&ts, &slot_filled(&ts), &lex).unwrap();
    let took = start.elapsed();
    ensure(
        r.m_bleu == 100.0 && ts.len() == 1000 && took < Duration::from_secs(10),
        format!("m-BLEU {} on {} instances in {took:.2?}", r.m_bleu, ts.len()),
    )
}

fn style_auto_encoding(t: &Trained) -> Outcome {
    let index = ExemplarIndex::new(&t.train).unwrap();
    let cfg = RetrievalConfig {
        max_distance: 2,
        prefer_equal_size: true,
    };
    let ts = retrieve_triples(&t.train, &index, &cfg, seed::derive(7, "retrieval", 0)).unwrap();
    let (mut correct, mut total) = (0, 0);
    for tr in &ts {
        let (c, n) = teacher_forced_accuracy(&t.pretrained, &tr.x_e, &tr.y_e, &tr.y_e).unwrap();
        correct += c;
        total += n;
    }
    let acc = correct as f64 / total as f64;
    ensure(
        acc >= 0.95 && t.pretrain_time < Duration::from_secs(15 * 60),
        format!("accuracy {acc:.4} after 10 epochs in {:.1?}", t.pretrain_time),
    )
}

fn report_line(name: &str, r: &EvalReport) -> String {
    format!("{name} incl_new {:.2} m-BLEU {:.2}", r.incl_new, r.m_bleu)
}

fn joint_training_balance(t: &Trained) -> Outcome {
    let ts = triples_at(&t.test, &t.train, 2);
    let lex = lexicon(t);
    let full = evaluate(&ts, &decode(&t.with_coverage, &ts, 5), &lex).unwrap();
    let plain = evaluate(&ts, &decode(&t.without_coverage, &ts, 5), &lex).unwrap();
    let untrained = evaluate(&ts, &decode(&t.untrained, &ts, 5), &lex).unwrap();
    let sf = evaluate(&ts, &slot_filled(&ts), &lex).unwrap();
    let checks = [
        ("beats untrained", full.incl_new > untrained.incl_new),
        ("beats slot-filling", full.incl_new > sf.incl_new),
        ("m-BLEU >= 50", full.m_bleu >= 50.0),
        ("coverage >= no coverage", full.incl_new >= plain.incl_new),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let detail = format!(
        "{}; {}; {}; {}{}",
        report_line("eta=1", &full),
        report_line("eta=0", &plain),
        report_line("untrained", &untrained),
        report_line("slot-fill", &sf),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) },
    );
    ensure(failed.is_empty(), detail)
}

fn distance_sweep(t: &Trained) -> Outcome {
    let lex = lexicon(t);
    let (mut sf, mut model) = (Vec::new(), Vec::new());
    for d in 1..=4 {
        let ts = triples_at(&t.test, &t.train, d);
        sf.push(evaluate(&ts, &slot_filled(&ts), &lex).unwrap().excl_old);
        model.push(evaluate(&ts, &decode(&t.with_coverage, &ts, 5), &lex).unwrap().excl_old);
    }
    let monotone = sf.windows(2).all(|w| w[1] <= w[0]);
    let sf_drop = sf[0] - sf[3];
    let model_drop = model[0] - model[3];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ");
    ensure(
        monotone && model_drop < sf_drop,
        format!("slot-fill excl_old {} (drop {sf_drop:.1}); model {} (drop {model_drop:.1})", fmt(&sf), fmt(&model)),
    )
}

fn retrieval_oracle() -> Outcome {
    let pool = synthetic(10_000, 17);
    let index = ExemplarIndex::new(&pool).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for k in 0..100 {
        let q = &pool[rng.gen_range(0..pool.len())];
        let cfg = RetrievalConfig {
            max_distance: k % 6,
            prefer_equal_size: k % 2 == 0,
        };
        let fq: BTreeSet<&str> = q.record.fields().collect();
        let in_range: Vec<usize> = (0..pool.len())
            .filter(|&i| {
                let fp: BTreeSet<&str> = pool[i].record.fields().collect();
                pool[i].id != q.id && fq.symmetric_difference(&fp).count() <= cfg.max_distance
            })
            .collect();
        let equal: Vec<usize> =
            in_range.iter().copied().filter(|&i| pool[i].record.len() == q.record.len()).collect();
        let want = if cfg.prefer_equal_size && !equal.is_empty() { equal } else { in_range };
        if index.candidates(&q.id, &q.record, &cfg) != want {
            mismatches += 1;
        }
    }
    let fields: Vec<String> = (0..12).map(|i| format!("f{i}")).collect();
    let record = |mask: u16| {
        Record::from_pairs((0..12).filter(|i| mask & (1 << i) != 0).map(|i| (fields[i].clone(), "v"))).unwrap()
    };
    let mut wrong = 0;
    for _ in 0..10_000 {
        let (a, b): (u16, u16) = (rng.gen_range(1..0x1000), rng.gen_range(1..0x1000));
        if field_set_distance(&record(a), &record(b)) != (a ^ b).count_ones() as usize {
            wrong += 1;
        }
    }
    ensure(
        mismatches == 0 && wrong == 0,
        format!("{mismatches}/100 candidate sets differ on a 10k pool; {wrong}/10000 distances wrong"),
    )
}

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 10] = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];

fn cardinal(n: u32) -> Vec<String> {
    let mut out = Vec::new();
    if n >= 100 {
        out.push(ONES[(n / 100) as usize].to_string());
        out.push("hundred".to_string());
        if n % 100 == 0 {
            return out;
        }
        out.push("and".to_string());
    }
    let r = n % 100;
    out.push(match r {
        0..=19 => ONES[r as usize].to_string(),
        _ if r % 10 == 0 => TENS[(r / 10) as usize].to_string(),
        _ => format!("{}-{}", TENS[(r / 10) as usize], ONES[(r % 10) as usize]),
    });
    out
}

fn number_words() -> Outcome {
    let bad: Vec<u32> = (0..=999u32)
        .filter(|&n| {
            let mut w = cardinal(n);
            let len = w.len();
            w.push("points".to_string());
            words_to_number(&w) != Some((n, len))
        })
        .collect();
    ensure(bad.is_empty(), format!("{} of 1000 cardinals wrong {:?}", bad.len(), &bad[..bad.len().min(5)]))
}

/// Every artifact of one small end-to-end run, as bytes.
fn pipeline_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let train_pairs = synthetic(300, 11);
    let test = test_set(40, 12);
    save_corpus(dir.join("train.jsonl"), &train_pairs).unwrap();
    save_corpus(dir.join("test.jsonl"), &test).unwrap();
    let cfg = RetrievalConfig {
        max_distance: 3,
        prefer_equal_size: true,
    };
    let refs = build_triple_refs(&test, &train_pairs, &cfg, 4).unwrap();
    save_triple_refs(dir.join("triples.jsonl"), &refs).unwrap();
    let tcfg = TrainConfig {
        epochs_pretrain: 1,
        epochs_full: 1,
        embed_dim: 16,
        hidden_dim: 16,
        seed: 4,
        ..TrainConfig::default()
    };
    let (model, log) = train::<f64>(&train_pairs, &train_pairs, &tcfg, |_, _| {}).unwrap();
    model.save(dir.join("m.ckpt")).unwrap();
    let ts = resolve_triples(&refs, &test, &train_pairs).unwrap();
    let gens = decode(&model, &ts, 3);
    let lex = ContentLexicon::from_triples(&ts).unwrap();
    let report = evaluate(&ts, &gens, &lex).unwrap();
    let mut out: Vec<(String, Vec<u8>)> = ["train.jsonl", "test.jsonl", "triples.jsonl", "m.ckpt", "m.ckpt.vocab"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect();
    out.push(("log".into(), serde_json::to_vec(&log).unwrap()));
    out.push(("generations".into(), serde_json::to_vec(&gens).unwrap()));
    out.push(("report".into(), serde_json::to_vec(&report).unwrap()));
    out
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = (pipeline_artifacts(a.path()), pipeline_artifacts(b.path()));
    let differing: Vec<&str> =
        first.iter().zip(&second).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    ensure(
        differing.is_empty() && first.len() == second.len(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", first.len())
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    )
}

fn main() {
    let start = Instant::now();
    let mut shared: Option<Trained> = None;
    let mut failures = 0;
    let criteria: [(&str, &dyn Fn(&mut Option<Trained>) -> Outcome); 10] = [
        ("gradient correctness", &|_| gradient_correctness()),
        ("distribution normalization", &|_| distribution_normalization()),
        ("coverage zero case", &|_| coverage_zero_case()),
        ("slot-filling m-BLEU identity", &|_| slot_fill_identity()),
        ("style auto-encoding", &|s| style_auto_encoding(s.get_or_insert_with(trained))),
        ("joint-training balance", &|s| joint_training_balance(s.get_or_insert_with(trained))),
        ("distance-sweep trend", &|s| distance_sweep(s.get_or_insert_with(trained))),
        ("retrieval oracle", &|_| retrieval_oracle()),
        ("number-word oracle", &|_| number_words()),
        ("determinism", &|_| determinism()),
    ];
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut shared)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status} {name}: {detail} [{:.1?}]", i + 1, t0.elapsed());
    }
    println!("{} of 10 criteria passed in {:.1?}", 10 - failures, start.elapsed());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".to_string())
}
