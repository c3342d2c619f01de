//! Slow reference implementations the fast paths are checked against, plus
//! random model generators for those checks.

use std::collections::BTreeSet;

use rand::Rng;

use crate::corpus::{LabelId, LabelMap};
use crate::error::{Error, Result};
use crate::geometry::BinaryMask;
use crate::tagger::HmmModel;

/// Best sequence by full enumeration. Among equal scores the winner is the
/// one that is smallest read from the last position backwards, which is the
/// sequence the decoder's lowest-id backpointer rule produces when sums are
/// exact (see [`dyadic_ln`]). Prefix scores fold in the same order as
/// [`HmmModel::sequence_score`].
pub fn exhaustive_decode<S: AsRef<str>>(
    hmm: &HmmModel,
    words: &[S],
    allowed: Option<&BTreeSet<LabelId>>,
) -> Result<(Vec<LabelId>, f64)> {
    if words.is_empty() {
        return Err(Error::EmptyInput("decode over zero words"));
    }
    let active: Vec<LabelId> = hmm
        .labels()
        .iter()
        .copied()
        .filter(|l| !hmm.excluded().contains(l) && allowed.is_none_or(|a| a.contains(l)))
        .collect();
    if active.is_empty() {
        return Err(Error::NoLabels("every candidate label is excluded or disallowed".into()));
    }
    let exp = hmm.transition_exponent();
    let emit: Vec<Vec<f64>> = words.iter().map(|w| active.iter().map(|&l| hmm.log_emission(l, w.as_ref())).collect()).collect();
    let trans: Vec<Vec<f64>> = active.iter().map(|&a| active.iter().map(|&b| exp * hmm.log_transition(a, b)).collect()).collect();
    let init: Vec<f64> = active.iter().map(|&l| hmm.initial_log_prob(l)).collect();

    struct Search<'a> {
        emit: &'a [Vec<f64>],
        trans: &'a [Vec<f64>],
        digits: Vec<usize>,
        best: Option<(Vec<usize>, f64)>,
    }
    impl Search<'_> {
        fn visit(&mut self, t: usize, score: f64) {
            if t == self.emit.len() {
                let better = match &self.best {
                    None => true,
                    Some((b, s)) => score > *s || (score == *s && self.digits.iter().rev().lt(b.iter().rev())),
                };
                if better {
                    self.best = Some((self.digits.clone(), score));
                }
                return;
            }
            let prev = self.digits[t - 1];
            for d in 0..self.emit[t].len() {
                self.digits[t] = d;
                self.visit(t + 1, score + self.trans[prev][d] + self.emit[t][d]);
            }
        }
    }

    let mut search = Search { emit: &emit, trans: &trans, digits: vec![0; words.len()], best: None };
    for d in 0..active.len() {
        search.digits[0] = d;
        search.visit(1, init[d] + emit[0][d]);
    }
    let (d, s) = search.best.expect("at least one sequence");
    Ok((d.into_iter().map(|i| active[i]).collect(), s))
}

/// Nearest labeled pixel for every hole by scanning all sources; ties go to
/// the smaller source y, then x.
pub fn brute_force_fill(grid: &LabelMap, fallback: LabelId) -> LabelMap {
    let (w, h) = (grid.width(), grid.height());
    let sources: Vec<(u32, u32, LabelId)> =
        (0..h).flat_map(|y| (0..w).filter_map(move |x| grid.get(x, y).map(|l| (x, y, l)))).collect();
    let mut out = grid.clone();
    for y in 0..h {
        for x in 0..w {
            if grid.get(x, y).is_some() {
                continue;
            }
            let label = sources
                .iter()
                .min_by_key(|&&(sx, sy, _)| {
                    let (dx, dy) = (sx as i64 - x as i64, sy as i64 - y as i64);
                    (dx * dx + dy * dy, sy, sx)
                })
                .map_or(fallback, |s| s.2);
            out.set(x, y, Some(label));
        }
    }
    out
}

/// Intersection over union by visiting every pixel; two empty masks give 0.
pub fn pixel_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.get(x, y), b.get(x, y));
            inter += (p && q) as u64;
            union += (p || q) as u64;
        }
    }
    if union == 0 { 0.0 } else { inter as f64 / union as f64 }
}

/// `ln p` rounded to a multiple of 2^-20. Sums of a few dozen such values,
/// each scaled by an integer, are exact in `f64`, so equal-scoring sequences
/// tie exactly whatever order their terms are added in.
pub fn dyadic_ln(p: f64) -> f64 {
    const SCALE: f64 = (1u64 << 20) as f64;
    (p.ln() * SCALE).round() / SCALE
}

/// Normalized distribution from positive weights, as [`dyadic_ln`] values.
pub fn dyadic_log_row(weights: &[f64]) -> Vec<f64> {
    let z: f64 = weights.iter().sum();
    weights.iter().map(|v| dyadic_ln(v / z)).collect()
}

fn random_log_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    dyadic_log_row(&raw)
}

/// HMM with `labels` states over words `w0..w{vocab-1}`, random normalized
/// rows in [`dyadic_ln`] form and the given transition exponent.
pub fn random_hmm<R: Rng>(rng: &mut R, labels: usize, vocab: usize, exponent: f64) -> HmmModel {
    let ids: Vec<LabelId> = (0..labels as u8).map(LabelId).collect();
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}")).collect();
    let emissions = (0..labels).map(|_| random_log_row(rng, vocab)).collect();
    let transitions = (0..labels).map(|_| random_log_row(rng, labels)).collect();
    let initial = random_log_row(rng, labels);
    let oov = vec![dyadic_ln(1.0 / (vocab + 1) as f64); labels];
    HmmModel::from_log_tables(ids, words, emissions, oov, transitions, initial, exponent, BTreeSet::new())
        .expect("consistent random tables")
}

/// Random `(words, label bag)` pairs for alignment training.
pub fn random_pairs<R: Rng>(rng: &mut R, docs: usize, vocab: usize, labels: u8) -> Vec<(Vec<String>, Vec<LabelId>)> {
    (0..docs)
        .map(|_| {
            let len = rng.random_range(1..=8);
            let words = (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect();
            let mut bag: Vec<LabelId> = (0..rng.random_range(1..=3)).map(|_| LabelId(rng.random_range(0..labels))).collect();
            bag.sort();
            bag.dedup();
            (words, bag)
        })
        .collect()
}
