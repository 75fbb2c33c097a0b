use std::time::Instant;

use d2t_core::corpus::{generate_synthetic, CorpusPair, Record, SyntheticSpec, Vocabulary};
use d2t_core::model::Model;
use d2t_core::retrieval::{ExemplarIndex, RetrievalConfig};
use d2t_core::training::{
    coverage_penalty, gradcheck_model, gradient_check, gradients, retrieve_triples, sequence_nll, total_loss, train, with_eos,
    CopyMass, CoverageMode, LossWeights, Phase, TrainConfig, TrainError, TrainingTriple,
};

fn corpus(n: usize, seed: u64) -> Vec<CorpusPair> {
    generate_synthetic(&SyntheticSpec::restaurant(n, seed)).unwrap()
}

/// A vocabulary of at most `cap` tokens from the given pairs; everything
/// else maps to the unknown token or is copied as an out-of-vocabulary value.
fn small_vocab(pairs: &[CorpusPair], cap: usize) -> Vocabulary {
    let full = Vocabulary::build(pairs, 1).unwrap();
    let keep: Vec<&str> = full.tokens().iter().skip(5).take(cap - 5).map(String::as_str).collect();
    Vocabulary::from_tokens(keep).unwrap()
}

fn triples(pairs: &[CorpusPair], max_distance: usize, seed: u64) -> Vec<TrainingTriple> {
    let index = ExemplarIndex::new(pairs).unwrap();
    let cfg = RetrievalConfig {
        max_distance,
        prefer_equal_size: true,
    };
    retrieve_triples(pairs, &index, &cfg, seed).unwrap()
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut spec = SyntheticSpec::restaurant(60, 3);
    spec.min_fields = 3;
    spec.max_fields = 3;
    let pairs = generate_synthetic(&spec).unwrap();
    let vocab = small_vocab(&pairs, 50);
    assert!(vocab.len() <= 50);
    let model = gradcheck_model(vocab, 8, 8, 11);
    let ts = triples(&pairs, 3, 5);
    let weights = [
        LossWeights::new(0.2, 1.0),
        LossWeights::new(0.0, 0.0),
        LossWeights {
            coverage: CoverageMode::Content,
            ..LossWeights::new(0.7, 0.5)
        },
        LossWeights {
            copy_mass: CopyMass::Gated,
            ..LossWeights::new(0.4, 2.0)
        },
        LossWeights {
            coverage: CoverageMode::Content,
            copy_mass: CopyMass::Gated,
            ..LossWeights::new(0.6, 1.0)
        },
    ];
    let mut worst = 0.0f64;
    for (i, t) in ts.iter().take(10).enumerate() {
        let w = weights[i % weights.len()];
        let r = gradient_check(&model, t, &w, 1e-5, 200, i as u64).unwrap();
        assert!(r.checked >= 200);
        assert_eq!(r.per_tensor.len(), d2t_core::model::ModelParams::<f64>::TENSOR_NAMES.len());
        assert!(r.max_relative_error <= 1e-4, "triple {i}: {r:?}");
        worst = worst.max(r.max_relative_error);
    }
    eprintln!("max relative error {worst:.3e} in {:?}", start.elapsed());
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn loss_identity_and_pass_weights() {
    let pairs = corpus(40, 9);
    let vocab = Vocabulary::build(&pairs, 1).unwrap();
    let model: Model<f64> = Model::init(vocab, 6, 7, 2);
    let t = &triples(&pairs, 5, 1)[0];
    for (lambda, eta) in [(0.2, 1.0), (0.0, 0.0), (1.0, 0.3)] {
        let w = LossWeights::new(lambda, eta);
        let b = total_loss(&model, t, &w).unwrap();
        assert_eq!(b.total, lambda * b.content_nll + (1.0 - lambda) * b.style_nll + eta * b.coverage);
    }
    let (c, _) = sequence_nll(&model, &t.x, &t.y_e, &with_eos(&t.y_x), 1e-12).unwrap();
    let (s, _) = sequence_nll(&model, &t.x_e, &t.y_e, &with_eos(&t.y_e), 1e-12).unwrap();
    let b = total_loss(&model, t, &LossWeights::new(0.2, 0.0)).unwrap();
    assert_eq!((b.content_nll, b.style_nll), (c, s));

    // lambda = 1 trains on the content pass only, lambda = 0 on the style pass only
    let (_, g1) = gradients(&model, t, &LossWeights::new(1.0, 0.0)).unwrap();
    let (_, g0) = gradients(&model, t, &LossWeights::new(0.0, 0.0)).unwrap();
    assert_ne!(g1, g0);
}

#[test]
fn target_without_end_token_is_rejected() {
    let pairs = corpus(10, 1);
    let model: Model<f64> = Model::init(Vocabulary::build(&pairs, 1).unwrap(), 4, 4, 1);
    let p = &pairs[0];
    assert!(matches!(
        sequence_nll(&model, &p.record, &p.text, &p.text, 1e-12),
        Err(TrainError::MissingEos)
    ));
}

#[test]
fn floor_clamps_impossible_targets() {
    let pairs = corpus(10, 1);
    let model: Model<f64> = Model::init(Vocabulary::build(&pairs, 1).unwrap(), 4, 4, 1);
    let p = &pairs[0];
    // a token absent from both the vocabulary and the record has p = 0
    let target = with_eos(&["zzzz".to_string()]);
    let (nll, _) = sequence_nll(&model, &p.record, &p.text, &target, 1e-12).unwrap();
    assert!(nll.is_finite());
    assert!(nll >= -(1e-12f64).ln());
}

#[test]
fn coverage_closed_form() {
    let exact = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    assert_eq!(coverage_penalty(&exact), 0.0);
    let skew = vec![vec![0.9, 0.1], vec![0.8, 0.2]];
    // (1.7 - 1)² + (0.3 - 1)²
    let want: f64 = 0.7f64.powi(2) + 0.7f64.powi(2);
    assert!((coverage_penalty(&skew) - want).abs() < 1e-12);
}

#[test]
fn training_is_deterministic_and_lowers_style_loss() {
    let pairs = corpus(64, 4);
    let cfg = TrainConfig {
        epochs_pretrain: 3,
        epochs_full: 1,
        embed_dim: 8,
        hidden_dim: 12,
        learning_rate: 0.01,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut seen = Vec::new();
    let (m1, log1) = train::<f64>(&pairs, &pairs, &cfg, |e, _| seen.push(e.epoch)).unwrap();
    let (m2, log2) = train::<f64>(&pairs, &pairs, &cfg, |_, _| {}).unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4]);
    assert_eq!(log1, log2);
    assert_eq!(m1, m2);
    assert_eq!(log1[0].phase, Phase::Pretrain);
    assert_eq!(log1[3].phase, Phase::Full);
    assert!(log1[2].style_nll < log1[0].style_nll, "{log1:?}");
    for e in &log1[..3] {
        assert_eq!(e.total, e.style_nll);
    }
}

#[test]
fn single_precision_training_runs() {
    let pairs = corpus(32, 4);
    let cfg = TrainConfig {
        epochs_pretrain: 1,
        epochs_full: 1,
        embed_dim: 6,
        hidden_dim: 6,
        ..TrainConfig::default()
    };
    let (m, log) = train::<f32>(&pairs, &pairs, &cfg, |_, _| {}).unwrap();
    assert_eq!(log.len(), 2);
    assert!(m.params.first_non_finite().is_none());
    let x = Record::from_pairs([("name", "zizzi")]).unwrap();
    assert!(m.greedy_decode(&x, &pairs[0].text, 10).is_ok());
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let pairs = corpus(32, 4);
    let cfg = TrainConfig {
        epochs_pretrain: 4,
        epochs_full: 0,
        embed_dim: 4,
        hidden_dim: 4,
        learning_rate: 1e300,
        ..TrainConfig::default()
    };
    match train::<f64>(&pairs, &pairs, &cfg, |_, _| {}) {
        Err(TrainError::Diverged { last_good, .. }) => assert!(last_good.first_non_finite().is_none()),
        other => panic!("expected divergence, got {:?}", other.map(|(_, l)| l)),
    }
}
