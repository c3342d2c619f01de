use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenecomp_core::align::train_ibm1;
use scenecomp_core::corpus::LabelId;
use scenecomp_core::oracle::{exhaustive_decode, random_hmm, random_pairs};
use scenecomp_core::tagger::HmmModel;

fn words_for(rng: &mut ChaCha8Rng, vocab: usize, len: usize) -> Vec<String> {
    // one index past the vocabulary exercises the unknown-word floor
    (0..len).map(|_| format!("w{}", rng.random_range(0..=vocab))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn viterbi_matches_enumeration(seed in any::<u64>(), labels in 1..=4usize, vocab in 1..=5usize, len in 1..=7usize, exp in prop::sample::select(vec![1.0, 3.0, 10.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hmm = random_hmm(&mut rng, labels, vocab, exp);
        let words = words_for(&mut rng, vocab, len);
        let fast = hmm.viterbi(&words, None).unwrap();
        let (slow, best) = exhaustive_decode(&hmm, &words, None).unwrap();
        prop_assert_eq!(hmm.sequence_score(&words, &fast), best);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn constrained_decoding_stays_in_the_allowed_set(seed in any::<u64>(), labels in 2..=4usize, len in 1..=6usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hmm = random_hmm(&mut rng, labels, 4, 10.0);
        let words = words_for(&mut rng, 4, len);
        let allowed: BTreeSet<LabelId> = (0..labels as u8).filter(|_| rng.random_bool(0.5)).map(LabelId).collect();
        prop_assume!(!allowed.is_empty());
        let tags = hmm.viterbi(&words, Some(&allowed)).unwrap();
        prop_assert!(tags.iter().all(|t| allowed.contains(t)));
        let (slow, _) = exhaustive_decode(&hmm, &words, Some(&allowed)).unwrap();
        prop_assert_eq!(tags, slow);
    }

    #[test]
    fn decoded_score_beats_random_sequences(seed in any::<u64>(), labels in 1..=6usize, len in 1..=20usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hmm = random_hmm(&mut rng, labels, 8, 10.0);
        let words = words_for(&mut rng, 8, len);
        let best = hmm.sequence_score(&words, &hmm.viterbi(&words, None).unwrap());
        for _ in 0..20 {
            let seq: Vec<LabelId> = (0..len).map(|_| LabelId(rng.random_range(0..labels as u8))).collect();
            prop_assert!(hmm.sequence_score(&words, &seq) <= best);
        }
    }

    #[test]
    fn uniform_emission_shift_keeps_the_path(seed in any::<u64>(), len in 1..=12usize, delta in -5.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hmm = random_hmm(&mut rng, 4, 6, 10.0);
        let words: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..6))).collect();
        let before = hmm.viterbi(&words, None).unwrap();
        hmm.shift_emissions(delta);
        prop_assert_eq!(hmm.viterbi(&words, None).unwrap(), before);
    }

    #[test]
    fn em_log_likelihood_never_decreases(seed in any::<u64>(), docs in 1..40usize, vocab in 1..10usize, labels in 1..5u8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = random_pairs(&mut rng, docs, vocab, labels);
        let (table, ll) = train_ibm1(&pairs, 20).unwrap();
        prop_assert_eq!(ll.len(), 20);
        for w in ll.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
        for &l in table.labels() {
            let sum: f64 = table.row(l).iter().map(|r| r.1).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }
    }
}

/// Diagonal-dominant transitions: with a huge exponent the path is the
/// constant run of the label with the largest self-transition.
#[test]
fn large_exponent_follows_the_strongest_self_transition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(2..=4usize);
        let trans: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let stay = rng.random_range(0.6..0.95);
                let rest = (1.0 - stay) / (n - 1) as f64;
                (0..n).map(|j| if i == j { stay } else { rest }.ln()).collect()
            })
            .collect();
        let emis: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
                let z: f64 = raw.iter().sum();
                raw.iter().map(|v| (v / z).ln()).collect()
            })
            .collect();
        let strongest = (0..n).max_by(|&a, &b| trans[a][a].total_cmp(&trans[b][b])).unwrap();
        let hmm = HmmModel::from_log_tables(
            (0..n as u8).map(LabelId).collect(),
            vec!["w0".into(), "w1".into(), "w2".into()],
            emis,
            vec![-4f64.ln(); n],
            trans,
            vec![-(n as f64).ln(); n],
            1e6,
            BTreeSet::new(),
        )
        .unwrap();
        let words: Vec<String> = (0..12).map(|_| format!("w{}", rng.random_range(0..3))).collect();
        assert_eq!(hmm.viterbi(&words, None).unwrap(), vec![LabelId(strongest as u8); 12]);
    }
}

#[test]
fn separable_corpus_learns_one_word_per_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<(Vec<String>, Vec<LabelId>)> = (0..200)
        .map(|_| {
            let mut bag: Vec<u8> = (0..4).filter(|_| rng.random_bool(0.5)).collect();
            if bag.is_empty() {
                bag.push(rng.random_range(0..4));
            }
            let words = bag.iter().map(|l| format!("w{l}")).collect();
            (words, bag.into_iter().map(LabelId).collect())
        })
        .collect();
    let (table, _) = train_ibm1(&pairs, 20).unwrap();
    for l in 0..4u8 {
        let p = table.prob(LabelId(l), &format!("w{l}"));
        assert!(p > 0.9, "P(w{l}|{l}) = {p}");
    }
}

#[test]
fn empty_narrative_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let hmm = random_hmm(&mut rng, 2, 2, 10.0);
    assert!(hmm.viterbi::<String>(&[], None).is_err());
    assert!(exhaustive_decode::<String>(&hmm, &[], None).is_err());
}
