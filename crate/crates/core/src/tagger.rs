//! Constrained HMM tagger built from the alignment model.
//!
//! States are taxonomy labels in ascending id order. Emissions are
//! `e(w|c) ∝ α_w·P(w|c) + λ_e`, transitions `t(c'|c) ∝ α_c'·(Count(c→c') + 1) + λ_t`,
//! and a decoding step scores `log e(w|c') + exponent · log t(c'|c)`.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{TfIdfWeights, TranslationTable, TransitionCounts};
use crate::corpus::{Corpus, LabelId, LabelTaxonomy};
use crate::error::{Error, Result};

pub const HMM_FORMAT: &str = "scenecomp.hmm/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub transition_exponent: f64,
    /// Additive floor on emission scores (λ_e).
    pub emission_floor: f64,
    /// Additive floor on transition scores (λ_t).
    pub transition_floor: f64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig { transition_exponent: 10.0, emission_floor: 1e-6, transition_floor: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmmModel {
    labels: Vec<LabelId>,
    label_names: Vec<String>,
    vocab: Vec<String>,
    word_index: HashMap<String, usize>,
    /// `[state][word]`
    log_emissions: Vec<Vec<f64>>,
    oov_log_prob: Vec<f64>,
    /// `[from][to]`
    log_transitions: Vec<Vec<f64>>,
    initial_log_probs: Vec<f64>,
    transition_exponent: f64,
    excluded: BTreeSet<LabelId>,
}

fn normalized_log(raw: &[f64]) -> Vec<f64> {
    let z: f64 = raw.iter().sum();
    raw.iter().map(|&v| (v / z).ln()).collect()
}

pub fn build_hmm(
    table: &TranslationTable,
    weights: &TfIdfWeights,
    counts: &TransitionCounts,
    taxonomy: &LabelTaxonomy,
    config: &HmmConfig,
) -> Result<HmmModel> {
    if taxonomy.is_empty() {
        return Err(Error::EmptyInput("HMM over an empty label set"));
    }
    if config.transition_exponent <= 0.0 || !config.transition_exponent.is_finite() {
        return Err(Error::Invalid(format!("transition exponent must be > 0, got {}", config.transition_exponent)));
    }
    if config.emission_floor < 0.0 || config.transition_floor < 0.0 {
        return Err(Error::Invalid("smoothing floors must be non-negative".into()));
    }
    let vocab = table.vocab().to_vec();
    let word_weights: Vec<f64> = vocab
        .iter()
        .map(|w| {
            weights
                .words
                .get(w)
                .copied()
                .ok_or_else(|| Error::InconsistentVocabulary(format!("no tf-idf weight for `{w}`")))
        })
        .collect::<Result<_>>()?;
    if let Some(l) = table.labels().iter().find(|l| !taxonomy.contains(**l)) {
        return Err(Error::InconsistentVocabulary(format!("translation label {l} not in taxonomy")));
    }

    let labels: Vec<LabelId> = taxonomy.ids().collect();
    let log_emissions = labels
        .iter()
        .map(|&c| {
            let mut raw = vec![config.emission_floor; vocab.len()];
            for (w, p) in table.row(c) {
                let i = table.word_index(w).expect("row words are in the vocabulary");
                raw[i] += word_weights[i] * p;
            }
            normalized_log(&raw)
        })
        .collect();

    let label_weight = |c: LabelId| weights.labels.get(&c).copied().unwrap_or(0.0);
    let log_transitions = labels
        .iter()
        .map(|&from| {
            let raw: Vec<f64> = labels
                .iter()
                .map(|&to| label_weight(to) * (counts.get(from, to) + 1) as f64 + config.transition_floor)
                .collect();
            if raw.iter().sum::<f64>() > 0.0 {
                normalized_log(&raw)
            } else {
                vec![-(labels.len() as f64).ln(); labels.len()]
            }
        })
        .collect();

    let excluded = taxonomy.excluded();
    let permitted = labels.iter().filter(|l| !excluded.contains(l)).count();
    let initial_log_probs = labels
        .iter()
        .map(|l| if excluded.contains(l) { f64::NEG_INFINITY } else { -(permitted as f64).ln() })
        .collect();
    let word_index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    Ok(HmmModel {
        label_names: labels.iter().map(|&l| taxonomy.name(l)).collect(),
        labels,
        oov_log_prob: vec![-((vocab.len() + 1) as f64).ln(); taxonomy.len()],
        vocab,
        word_index,
        log_emissions,
        log_transitions,
        initial_log_probs,
        transition_exponent: config.transition_exponent,
        excluded,
    })
}

impl HmmModel {
    /// Assembles a model from log-space tables. Rows are not renormalized.
    #[allow(clippy::too_many_arguments)]
    pub fn from_log_tables(
        labels: Vec<LabelId>,
        vocab: Vec<String>,
        log_emissions: Vec<Vec<f64>>,
        oov_log_prob: Vec<f64>,
        log_transitions: Vec<Vec<f64>>,
        initial_log_probs: Vec<f64>,
        transition_exponent: f64,
        excluded: BTreeSet<LabelId>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyInput("HMM over an empty label set"));
        }
        if labels.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Invalid("HMM labels must be strictly ascending".into()));
        }
        let shape_ok = log_emissions.len() == n
            && log_emissions.iter().all(|r| r.len() == vocab.len())
            && oov_log_prob.len() == n
            && log_transitions.len() == n
            && log_transitions.iter().all(|r| r.len() == n)
            && initial_log_probs.len() == n;
        if !shape_ok {
            return Err(Error::DimensionMismatch("HMM table shapes disagree".into()));
        }
        if transition_exponent <= 0.0 {
            return Err(Error::Invalid("transition exponent must be > 0".into()));
        }
        let word_index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(HmmModel {
            label_names: labels.iter().map(|l| format!("#{l}")).collect(),
            labels,
            vocab,
            word_index,
            log_emissions,
            oov_log_prob,
            log_transitions,
            initial_log_probs,
            transition_exponent,
            excluded,
        })
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn transition_exponent(&self) -> f64 {
        self.transition_exponent
    }

    pub fn set_transition_exponent(&mut self, exponent: f64) {
        assert!(exponent > 0.0, "transition exponent must be > 0");
        self.transition_exponent = exponent;
    }

    pub fn excluded(&self) -> &BTreeSet<LabelId> {
        &self.excluded
    }

    fn state(&self, label: LabelId) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    /// `log e(word | label)`, falling back to the OOV floor.
    pub fn log_emission(&self, label: LabelId, word: &str) -> f64 {
        let s = self.state(label).expect("label in model");
        self.emission_at(s, self.word_index.get(word).copied())
    }

    pub fn log_transition(&self, from: LabelId, to: LabelId) -> f64 {
        self.log_transitions[self.state(from).expect("label in model")][self.state(to).expect("label in model")]
    }

    pub fn initial_log_prob(&self, label: LabelId) -> f64 {
        self.initial_log_probs[self.state(label).expect("label in model")]
    }

    #[inline]
    fn emission_at(&self, state: usize, word: Option<usize>) -> f64 {
        word.map_or(self.oov_log_prob[state], |w| self.log_emissions[state][w])
    }

    /// Probability-space sums of every emission and transition row.
    pub fn row_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let sum = |r: &Vec<f64>| r.iter().map(|v| v.exp()).sum::<f64>();
        (self.log_emissions.iter().map(sum).collect(), self.log_transitions.iter().map(sum).collect())
    }

    /// Adds `delta` to every log emission, OOV floor included.
    pub fn shift_emissions(&mut self, delta: f64) {
        for row in &mut self.log_emissions {
            for v in row {
                *v += delta;
            }
        }
        for v in &mut self.oov_log_prob {
            *v += delta;
        }
    }

    /// Decoding objective of `labels` for `words`:
    /// `initial(c₁) + Σ log e(wᵢ|cᵢ) + exponent · Σ log t(cᵢ₊₁|cᵢ)`, folded left
    /// in the same order as the decoder.
    pub fn sequence_score<S: AsRef<str>>(&self, words: &[S], labels: &[LabelId]) -> f64 {
        assert_eq!(words.len(), labels.len());
        let mut prev: Option<usize> = None;
        let mut score = 0.0;
        for (w, &l) in words.iter().zip(labels) {
            let s = self.state(l).expect("label in model");
            let e = self.emission_at(s, self.word_index.get(w.as_ref()).copied());
            score = match prev {
                None => self.initial_log_probs[s] + e,
                Some(p) => score + self.transition_exponent * self.log_transitions[p][s] + e,
            };
            prev = Some(s);
        }
        score
    }

    /// Max-score label sequence, restricted to `allowed` when given; excluded
    /// labels are never produced. Ties go to the lowest label id at every
    /// backpointer and at the final step.
    pub fn viterbi<S: AsRef<str>>(&self, words: &[S], allowed: Option<&BTreeSet<LabelId>>) -> Result<Vec<LabelId>> {
        if words.is_empty() {
            return Err(Error::EmptyInput("viterbi over zero words"));
        }
        let active: Vec<usize> = (0..self.labels.len())
            .filter(|&s| {
                let l = self.labels[s];
                !self.excluded.contains(&l) && allowed.is_none_or(|a| a.contains(&l))
            })
            .collect();
        if active.is_empty() {
            return Err(Error::NoLabels("every candidate label is excluded or disallowed".into()));
        }
        let obs: Vec<Option<usize>> = words.iter().map(|w| self.word_index.get(w.as_ref()).copied()).collect();
        let k = active.len();
        let exp = self.transition_exponent;
        let mut delta: Vec<f64> = active.iter().map(|&s| self.initial_log_probs[s] + self.emission_at(s, obs[0])).collect();
        let mut back = vec![0u32; k * (obs.len() - 1)];
        let mut next = vec![0.0; k];
        for (t, &o) in obs.iter().enumerate().skip(1) {
            let bp = &mut back[(t - 1) * k..t * k];
            for (j, &s) in active.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (i, &p) in active.iter().enumerate() {
                    let cand = delta[i] + exp * self.log_transitions[p][s];
                    if cand > best {
                        best = cand;
                        arg = i;
                    }
                }
                bp[j] = arg as u32;
                next[j] = best + self.emission_at(s, o);
            }
            std::mem::swap(&mut delta, &mut next);
        }
        let mut cur = 0;
        for j in 1..k {
            if delta[j] > delta[cur] {
                cur = j;
            }
        }
        let mut path = vec![0usize; obs.len()];
        path[obs.len() - 1] = cur;
        for t in (1..obs.len()).rev() {
            cur = back[(t - 1) * k + cur] as usize;
            path[t - 1] = cur;
        }
        Ok(path.into_iter().map(|j| self.labels[active[j]]).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = HmmFile::from(self);
        let text = serde_json::to_string(&file).map_err(|e| Error::json("hmm model", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: HmmFile = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct LabelRef {
    id: LabelId,
    name: String,
}

/// On-disk model. Non-finite log probabilities are written as `null`.
#[derive(Serialize, Deserialize)]
struct HmmFile {
    format: String,
    labels: Vec<LabelRef>,
    vocab: Vec<String>,
    transition_exponent: f64,
    excluded: Vec<LabelId>,
    initial_log_probs: Vec<Option<f64>>,
    oov_log_prob: Vec<Option<f64>>,
    log_emissions: Vec<Vec<Option<f64>>>,
    log_transitions: Vec<Vec<Option<f64>>>,
}

fn encode(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|&x| x.is_finite().then_some(x)).collect()
}

fn decode(v: Vec<Option<f64>>) -> Vec<f64> {
    v.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect()
}

impl From<&HmmModel> for HmmFile {
    fn from(m: &HmmModel) -> Self {
        HmmFile {
            format: HMM_FORMAT.into(),
            labels: m.labels.iter().zip(&m.label_names).map(|(&id, n)| LabelRef { id, name: n.clone() }).collect(),
            vocab: m.vocab.clone(),
            transition_exponent: m.transition_exponent,
            excluded: m.excluded.iter().copied().collect(),
            initial_log_probs: encode(&m.initial_log_probs),
            oov_log_prob: encode(&m.oov_log_prob),
            log_emissions: m.log_emissions.iter().map(|r| encode(r)).collect(),
            log_transitions: m.log_transitions.iter().map(|r| encode(r)).collect(),
        }
    }
}

impl TryFrom<HmmFile> for HmmModel {
    type Error = Error;

    fn try_from(f: HmmFile) -> Result<Self> {
        if f.format != HMM_FORMAT {
            return Err(Error::Format { expected: HMM_FORMAT, found: f.format });
        }
        let names: Vec<String> = f.labels.iter().map(|l| l.name.clone()).collect();
        let mut m = HmmModel::from_log_tables(
            f.labels.iter().map(|l| l.id).collect(),
            f.vocab,
            f.log_emissions.into_iter().map(decode).collect(),
            decode(f.oov_log_prob),
            f.log_transitions.into_iter().map(decode).collect(),
            decode(f.initial_log_probs),
            f.transition_exponent,
            f.excluded.into_iter().collect(),
        )?;
        m.label_names = names;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedExample {
    pub id: String,
    pub words: Vec<String>,
    pub tags: Vec<LabelId>,
}

/// Decodes every example. Constrained mode restricts each example to the
/// labels present in its own label map, falling back to unconstrained
/// decoding when none of those labels is decodable.
pub fn tag_corpus(corpus: &Corpus, hmm: &HmmModel, constrained: bool) -> Vec<TaggedExample> {
    corpus
        .examples()
        .par_iter()
        .map(|e| {
            let words = e.words();
            let allowed = constrained.then(|| e.label_map.labels_present());
            let tags = match hmm.viterbi(&words, allowed.as_ref()) {
                Ok(t) => t,
                Err(err) => {
                    log::warn!("`{}`: {err}; decoding unconstrained", e.id);
                    hmm.viterbi(&words, None).expect("unconstrained decode over a non-empty narrative")
                }
            };
            TaggedExample { id: e.id.clone(), words, tags }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct AutosupRecord {
    id: String,
    words: Vec<String>,
    tags: Vec<String>,
}

/// Writes `{id, words, tags}` JSON lines with tags as label names.
pub fn export_autosupervision(tagged: &[TaggedExample], taxonomy: &LabelTaxonomy, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in tagged {
        let rec = AutosupRecord {
            id: t.id.clone(),
            words: t.words.clone(),
            tags: t.tags.iter().map(|&l| taxonomy.name(l)).collect(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::json("autosupervision", e))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_autosupervision(path: &Path, taxonomy: &LabelTaxonomy) -> Result<Vec<TaggedExample>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AutosupRecord =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?;
        if rec.words.len() != rec.tags.len() {
            return Err(Error::InvalidRecord(format!("{}: words and tags differ in length", rec.id)));
        }
        let tags = rec.tags.iter().map(|t| taxonomy.require(t)).collect::<Result<_>>()?;
        out.push(TaggedExample { id: rec.id, words: rec.words, tags });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::corpus::{LabelEntry, LabelKind};

    fn taxonomy(n: u8) -> LabelTaxonomy {
        LabelTaxonomy::new(
            (0..n)
                .map(|i| LabelEntry { id: LabelId(i), name: format!("l{i}"), kind: LabelKind::Stuff, excluded: false })
                .collect(),
        )
        .unwrap()
    }

    /// 2 labels, 3 words, evaluated by hand:
    /// α = {a: 0.5, b: 1.0, c: 0.0}, P(·|0) = {a: .6, b: .4}, P(·|1) = {b: .3, c: .7},
    /// α_c = {0: 0.2, 1: 0.8}, counts {0→0: 3, 0→1: 1}, floors 0.
    fn hand_model() -> (TranslationTable, TfIdfWeights, TransitionCounts) {
        let mut rows = BTreeMap::new();
        rows.insert(LabelId(0), BTreeMap::from([("a".to_string(), 0.6), ("b".to_string(), 0.4)]));
        rows.insert(LabelId(1), BTreeMap::from([("b".to_string(), 0.3), ("c".to_string(), 0.7)]));
        let weights = TfIdfWeights {
            words: BTreeMap::from([("a".into(), 0.5), ("b".into(), 1.0), ("c".into(), 0.0)]),
            labels: BTreeMap::from([(LabelId(0), 0.2), (LabelId(1), 0.8)]),
        };
        let counts = TransitionCounts {
            counts: BTreeMap::from([((LabelId(0), LabelId(0)), 3), ((LabelId(0), LabelId(1)), 1)]),
        };
        (TranslationTable::from_rows(rows), weights, counts)
    }

    #[test]
    fn hand_built_rows() {
        let (t, w, c) = hand_model();
        let cfg = HmmConfig { transition_exponent: 10.0, emission_floor: 0.0, transition_floor: 0.0 };
        let m = build_hmm(&t, &w, &c, &taxonomy(2), &cfg).unwrap();
        let (l0, l1) = (LabelId(0), LabelId(1));
        // label 0: a 0.3, b 0.4, c 0 -> Z 0.7
        assert!((m.log_emission(l0, "a").exp() - 0.3 / 0.7).abs() < 1e-12);
        assert!((m.log_emission(l0, "b").exp() - 0.4 / 0.7).abs() < 1e-12);
        assert_eq!(m.log_emission(l0, "c"), f64::NEG_INFINITY);
        // label 1: a 0, b 0.3, c 0 -> only b
        assert!((m.log_emission(l1, "b").exp() - 1.0).abs() < 1e-12);
        // transitions from 0: 0.2*4 = 0.8, 0.8*2 = 1.6 -> 1/3, 2/3
        assert!((m.log_transition(l0, l0).exp() - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.log_transition(l0, l1).exp() - 2.0 / 3.0).abs() < 1e-12);
        // from 1: 0.2*1, 0.8*1 -> 0.2, 0.8
        assert!((m.log_transition(l1, l0).exp() - 0.2).abs() < 1e-12);
        assert!((m.log_transition(l1, l1).exp() - 0.8).abs() < 1e-12);
        assert_eq!(m.initial_log_prob(l0), -(2f64.ln()));
    }

    #[test]
    fn zero_word_weight_hits_floor() {
        let (t, w, c) = hand_model();
        let m = build_hmm(&t, &w, &c, &taxonomy(2), &HmmConfig::default()).unwrap();
        // α_c = 0 so e(c|·) is λ_e / Z for every label
        for l in [LabelId(0), LabelId(1)] {
            let z: f64 = 0.5 * t.prob(l, "a") + 1.0 * t.prob(l, "b") + 3.0 * 1e-6;
            assert!((m.log_emission(l, "c").exp() - 1e-6 / z).abs() < 1e-12);
        }
        let (es, ts) = m.row_sums();
        assert!(es.iter().chain(&ts).all(|s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn symmetric_inputs_give_symmetric_model() {
        let mut rows = BTreeMap::new();
        rows.insert(LabelId(0), BTreeMap::from([("x".to_string(), 0.9), ("y".to_string(), 0.1)]));
        rows.insert(LabelId(1), BTreeMap::from([("x".to_string(), 0.1), ("y".to_string(), 0.9)]));
        let w = TfIdfWeights {
            words: BTreeMap::from([("x".into(), 0.4), ("y".into(), 0.4)]),
            labels: BTreeMap::from([(LabelId(0), 0.3), (LabelId(1), 0.3)]),
        };
        let c = TransitionCounts {
            counts: BTreeMap::from([
                ((LabelId(0), LabelId(0)), 5),
                ((LabelId(1), LabelId(1)), 5),
                ((LabelId(0), LabelId(1)), 2),
                ((LabelId(1), LabelId(0)), 2),
            ]),
        };
        let m = build_hmm(&TranslationTable::from_rows(rows), &w, &c, &taxonomy(2), &HmmConfig::default()).unwrap();
        let (a, b) = (LabelId(0), LabelId(1));
        assert!((m.log_emission(a, "x") - m.log_emission(b, "y")).abs() < 1e-12);
        assert!((m.log_transition(a, a) - m.log_transition(b, b)).abs() < 1e-12);
        assert!((m.log_transition(a, b) - m.log_transition(b, a)).abs() < 1e-12);
    }

    #[test]
    fn missing_word_weight_is_inconsistent() {
        let (t, mut w, c) = hand_model();
        w.words.remove("a");
        let err = build_hmm(&t, &w, &c, &taxonomy(2), &HmmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InconsistentVocabulary(_)));
    }

    #[test]
    fn single_word_is_emission_argmax() {
        let (t, w, c) = hand_model();
        let m = build_hmm(&t, &w, &c, &taxonomy(2), &HmmConfig::default()).unwrap();
        assert_eq!(m.viterbi(&["a"], None).unwrap(), vec![LabelId(0)]);
        assert_eq!(m.viterbi(&["c"], None).unwrap(), vec![LabelId(1)]);
    }

    #[test]
    fn excluded_labels_are_never_decoded() {
        let (t, w, c) = hand_model();
        let mut tax = taxonomy(2).entries().to_vec();
        tax[1].excluded = true;
        let tax = LabelTaxonomy::new(tax).unwrap();
        let m = build_hmm(&t, &w, &c, &tax, &HmmConfig::default()).unwrap();
        assert_eq!(m.viterbi(&["c", "c"], None).unwrap(), vec![LabelId(0); 2]);
        let only1 = BTreeSet::from([LabelId(1)]);
        assert!(matches!(m.viterbi(&["c"], Some(&only1)), Err(Error::NoLabels(_))));
    }

    #[test]
    fn model_file_round_trip() {
        let (t, w, c) = hand_model();
        let cfg = HmmConfig { emission_floor: 0.0, ..HmmConfig::default() };
        let m = build_hmm(&t, &w, &c, &taxonomy(2), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hmm.json");
        m.save(&path).unwrap();
        assert_eq!(HmmModel::load(&path).unwrap(), m);
    }
}
