use std::time::Instant;

use d2t_core::corpus::{generate_synthetic, CorpusPair, Record, SyntheticSpec, MASK_TOKEN};
use d2t_core::metrics::{
    content_fidelity, corpus_bleu, evaluate, m_bleu, mask_content, ContentLexicon, Generation,
};
use d2t_core::retrieval::{ExemplarIndex, RetrievalConfig};
use d2t_core::slotfill::{extract_template, fill_template, slot_fill};
use d2t_core::training::{retrieve_triples, TrainingTriple};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Textbook corpus BLEU-4: clipped n-gram precisions pooled over the corpus,
/// uniform weights, brevity penalty on total lengths.
fn bleu_oracle(cands: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let grams = |s: &[String], n: usize| -> Vec<Vec<String>> {
        if s.len() < n {
            return Vec::new();
        }
        (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
    };
    let mut logs = Vec::new();
    for n in 1..=4 {
        let (mut hit, mut all) = (0usize, 0usize);
        for (c, r) in cands.iter().zip(refs) {
            let mut pool = grams(r, n);
            for g in grams(c, n) {
                all += 1;
                if let Some(k) = pool.iter().position(|p| *p == g) {
                    pool.swap_remove(k);
                    hit += 1;
                }
            }
        }
        if all > 0 {
            if hit == 0 {
                return 0.0;
            }
            logs.push((hit as f64 / all as f64).ln());
        }
    }
    let c: usize = cands.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

#[test]
fn bleu_hand_cases() {
    let r = vec![toks("the cat is on the mat")];
    // precisions 5/6, 3/5, 2/4, 1/3 at equal length
    let b = corpus_bleu(&[toks("the cat is on a mat")], &r).unwrap();
    assert!((b - 100.0 * (1.0f64 / 12.0).powf(0.25)).abs() < 1e-12, "{b}");
    // every n-gram matches; only the brevity penalty applies
    let b = corpus_bleu(&[toks("the cat is on")], &r).unwrap();
    assert!((b - 100.0 * (-0.5f64).exp()).abs() < 1e-12, "{b}");
    assert_eq!(corpus_bleu(&[toks("dog dog")], &r).unwrap(), 0.0);
    assert!(corpus_bleu(&[toks("a")], &[]).is_err());
}

#[test]
fn bleu_matches_oracle_on_random_corpora() {
    let words = ["a", "b", "c", "d", "e"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let n = rng.gen_range(1..6);
        let sent = |rng: &mut ChaCha8Rng| -> Vec<String> {
            (0..rng.gen_range(4..12)).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect()
        };
        let cands: Vec<Vec<String>> = (0..n).map(|_| sent(&mut rng)).collect();
        let refs: Vec<Vec<String>> = (0..n).map(|_| sent(&mut rng)).collect();
        let got = corpus_bleu(&cands, &refs).unwrap();
        let want = bleu_oracle(&cands, &refs);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn content_fidelity_hand_case() {
    let lex = ContentLexicon::new(["cocum", "zizzi", "thai", "cheap"]).unwrap();
    let x = Record::from_pairs([("name", "cocum"), ("food", "thai")]).unwrap();
    let x_e = Record::from_pairs([("name", "zizzi"), ("food", "thai"), ("price", "cheap")]).unwrap();
    let s = content_fidelity(&toks("cocum serves cheap food near zizzi"), &x, &x_e, &lex);
    assert_eq!(s.incl_new, 50.0);
    // old values are zizzi and cheap; both leak
    assert_eq!(s.excl_old, 0.0);
    assert!((s.precision - 100.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.recall, s.incl_new);
}

fn test_triples(n: usize, max_distance: usize) -> Vec<TrainingTriple> {
    let pool = generate_synthetic(&SyntheticSpec::restaurant(2000, 7)).unwrap();
    let queries: Vec<CorpusPair> = generate_synthetic(&SyntheticSpec::restaurant(n, 8))
        .unwrap()
        .into_iter()
        .map(|mut p| {
            p.id = format!("q{}", p.id);
            p
        })
        .collect();
    let index = ExemplarIndex::new(&pool).unwrap();
    let cfg = RetrievalConfig {
        max_distance,
        prefer_equal_size: true,
    };
    retrieve_triples(&queries, &index, &cfg, 1).unwrap()
}

#[test]
fn slot_fill_scores_perfect_m_bleu_on_1000_instances() {
    let ts = test_triples(1000, 5);
    assert_eq!(ts.len(), 1000);
    let start = Instant::now();
    let gens: Vec<Generation> = ts
        .iter()
        .map(|t| Generation {
            id: t.id.clone(),
            tokens: slot_fill(t),
        })
        .collect();
    let lex = ContentLexicon::from_triples(&ts).unwrap();
    let report = evaluate(&ts, &gens, &lex).unwrap();
    assert_eq!(report.m_bleu, 100.0);
    assert!(start.elapsed().as_secs_f64() < 10.0, "{:?}", start.elapsed());
}

#[test]
fn report_ignores_instance_order() {
    let ts = test_triples(300, 3);
    let lex = ContentLexicon::from_triples(&ts).unwrap();
    let gens: Vec<Generation> = ts
        .iter()
        .map(|t| Generation {
            id: t.id.clone(),
            tokens: slot_fill(t),
        })
        .collect();
    let base = evaluate(&ts, &gens, &lex).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let mut ts2 = ts.clone();
        let mut gens2 = gens.clone();
        ts2.shuffle(&mut rng);
        gens2.shuffle(&mut rng);
        let r = evaluate(&ts2, &gens2, &lex).unwrap();
        assert_eq!(r.count, base.count);
        assert!((r.incl_new - base.incl_new).abs() < 1e-9);
        assert!((r.excl_old - base.excl_old).abs() < 1e-9);
        assert!((r.precision - base.precision).abs() < 1e-9);
        assert!((r.m_bleu - base.m_bleu).abs() < 1e-9);
    }
    // a missing or duplicated generation is an error
    assert!(evaluate(&ts, &gens[1..], &lex).is_err());
    let mut dup = gens.clone();
    dup.push(gens[0].clone());
    assert!(evaluate(&ts, &dup, &lex).is_err());
}

const WORDS: [&str; 8] = ["is", "a", "the", "near", "serves", ".", ",", "food"];
const VALUES: [&str; 8] = ["cocum", "zizzi", "thai", "cheap", "12", "7", "riverside", "loch_fyne"];

fn arb_record() -> impl Strategy<Value = Record> {
    prop::collection::btree_map(0usize..6, 0usize..VALUES.len(), 1..5).prop_map(|m| {
        Record::from_pairs(m.into_iter().map(|(f, v)| (format!("f{f}"), VALUES[v]))).unwrap()
    })
}

fn arb_text() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![
            (0usize..WORDS.len()).prop_map(|i| WORDS[i].to_string()),
            (0usize..VALUES.len()).prop_map(|i| VALUES[i].to_string()),
            (0u32..200).prop_map(|n| n.to_string()),
        ],
        1..20,
    )
}

proptest! {
    #[test]
    fn masking_is_idempotent(text in arb_text()) {
        let lex = ContentLexicon::new(VALUES).unwrap();
        let once = mask_content(&text, &lex);
        prop_assert_eq!(once.len(), text.len());
        prop_assert_eq!(mask_content(&once, &lex), once.clone());
        for (a, b) in text.iter().zip(&once) {
            prop_assert!(a == b || b == MASK_TOKEN);
        }
    }

    #[test]
    fn m_bleu_of_a_corpus_against_itself_is_100(texts in prop::collection::vec(arb_text(), 1..6)) {
        let lex = ContentLexicon::new(VALUES).unwrap();
        prop_assert_eq!(m_bleu(&texts, &texts, &lex).unwrap(), 100.0);
    }

    /// On any triple, filling only swaps content for content: the masked
    /// output is the masked exemplar.
    #[test]
    fn slot_fill_preserves_the_masked_exemplar(x in arb_record(), x_e in arb_record(), y_e in arb_text()) {
        let lex = ContentLexicon::from_records([&x, &x_e]).unwrap();
        let template = extract_template(&x_e, &y_e);
        prop_assert_eq!(template.len(), y_e.len());
        let out = fill_template(&template, &x);
        prop_assert_eq!(out.len(), y_e.len());
        prop_assert_eq!(mask_content(&out, &lex), mask_content(&y_e, &lex));
        prop_assert_eq!(fill_template(&template, &x_e), y_e.clone());
        prop_assert_eq!(m_bleu(&[out], &[y_e], &lex).unwrap(), 100.0);
    }
}
