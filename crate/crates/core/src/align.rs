//! Word-label alignment ingredients for the tagger: hull-based noisy word
//! assignments, tf-idf term weights, IBM Model 1 translation probabilities and
//! label transition counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{segment_phrases, Corpus, Example, LabelId, LabelMap, LabelTaxonomy, PhraseSegment, DEFAULT_GAP_MS};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, trace_hull, BinaryMask};

pub const ALIGNMENT_FORMAT: &str = "scenecomp.alignment/1";
pub const DEFAULT_EM_ITERATIONS: usize = 20;

/// One label per narrative word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAssignment {
    pub id: String,
    pub labels: Vec<LabelId>,
}

fn modal(counts: &BTreeMap<LabelId, u64>) -> Option<LabelId> {
    // BTreeMap iterates by ascending id, so strict `>` keeps the lowest id on ties
    let mut best: Option<(LabelId, u64)> = None;
    for (&l, &c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map(|(l, _)| l)
}

/// Most frequent labeled pixel under `mask`; lowest id wins ties.
pub fn modal_label(map: &LabelMap, mask: &BinaryMask) -> Option<LabelId> {
    let mut counts = BTreeMap::new();
    for (x, y) in mask.iter_set() {
        if let Some(l) = map.get(x, y) {
            *counts.entry(l).or_insert(0u64) += 1;
        }
    }
    modal(&counts)
}

/// Tags every word of a segment with the modal label inside the convex hull
/// of that segment's trace slice. Segments whose hull covers no labeled pixel
/// (or that have no trace) take the modal label of the whole image.
pub fn noisy_assign(example: &Example, segments: &[PhraseSegment]) -> Result<RawAssignment> {
    let map = &example.label_map;
    let image_modal = modal(&map.histogram()).ok_or_else(|| Error::Unlabeled(example.id.clone()))?;
    let mut labels = vec![image_modal; example.narrative.len()];
    for seg in segments {
        let points = &example.trace[seg.trace.clone()];
        let label = if points.is_empty() {
            image_modal
        } else {
            let hull = trace_hull(points)?;
            let mask = rasterize(&hull, map.width(), map.height())?;
            modal_label(map, &mask).unwrap_or(image_modal)
        };
        for l in &mut labels[seg.words.clone()] {
            *l = label;
        }
    }
    Ok(RawAssignment { id: example.id.clone(), labels })
}

/// Collapses per-document tf-idf to one score per term:
/// the mean, over documents containing the term, of `tf / |d|`, times
/// `ln(N / df)`. Terms occurring in every document score 0.
pub fn compute_tfidf<T: Ord + Clone>(documents: &[Vec<T>]) -> Result<BTreeMap<T, f64>> {
    if documents.is_empty() {
        return Err(Error::EmptyInput("tf-idf over zero documents"));
    }
    let n = documents.len() as f64;
    // term -> (sum of normalized tf, document frequency)
    let mut acc: BTreeMap<T, (f64, usize)> = BTreeMap::new();
    for doc in documents {
        if doc.is_empty() {
            continue;
        }
        let mut tf: BTreeMap<&T, usize> = BTreeMap::new();
        for t in doc {
            *tf.entry(t).or_insert(0) += 1;
        }
        let len = doc.len() as f64;
        for (t, c) in tf {
            let e = acc.entry(t.clone()).or_insert((0.0, 0));
            e.0 += c as f64 / len;
            e.1 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(t, (tf_sum, df))| {
            let mean_tf = tf_sum / df as f64;
            (t, mean_tf * (n / df as f64).ln())
        })
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TfIdfWeights {
    pub words: BTreeMap<String, f64>,
    pub labels: BTreeMap<LabelId, f64>,
}

/// P(w | c), stored sparsely: only co-occurring (label, word) pairs can be
/// non-zero after the first EM step.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationTable {
    vocab: Vec<String>,
    word_index: HashMap<String, usize>,
    labels: Vec<LabelId>,
    // per label row: sorted word indices and their probabilities
    rows: Vec<(Vec<usize>, Vec<f64>)>,
}

impl TranslationTable {
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    fn label_pos(&self, label: LabelId) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn prob(&self, label: LabelId, word: &str) -> f64 {
        match (self.label_pos(label), self.word_index(word)) {
            (Some(r), Some(w)) => {
                let (idx, p) = &self.rows[r];
                idx.binary_search(&w).map_or(0.0, |k| p[k])
            }
            _ => 0.0,
        }
    }

    /// Non-zero entries of the row for `label`, as `(word, probability)`.
    pub fn row(&self, label: LabelId) -> Vec<(&str, f64)> {
        self.label_pos(label).map_or_else(Vec::new, |r| {
            let (idx, p) = &self.rows[r];
            idx.iter().zip(p).map(|(&w, &p)| (self.vocab[w].as_str(), p)).collect()
        })
    }

    pub fn from_rows(rows: BTreeMap<LabelId, BTreeMap<String, f64>>) -> Self {
        let vocab: Vec<String> = rows
            .values()
            .flat_map(|r| r.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let word_index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let labels = rows.keys().copied().collect();
        let rows = rows
            .values()
            .map(|r| {
                let mut entries: Vec<(usize, f64)> = r.iter().map(|(w, &p)| (word_index[w], p)).collect();
                entries.sort_by_key(|e| e.0);
                entries.into_iter().unzip()
            })
            .collect();
        TranslationTable { vocab, word_index, labels, rows }
    }

    pub fn to_rows(&self) -> BTreeMap<LabelId, BTreeMap<String, f64>> {
        self.labels
            .iter()
            .map(|&l| (l, self.row(l).into_iter().map(|(w, p)| (w.to_string(), p)).collect()))
            .collect()
    }
}

/// IBM Model 1 EM with labels as the source side and words as the target,
/// uniform initialization and no NULL source. Returns the table and the
/// corpus log-likelihood after each iteration.
pub fn train_ibm1(pairs: &[(Vec<String>, Vec<LabelId>)], iterations: usize) -> Result<(TranslationTable, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("IBM Model 1 over zero pairs"));
    }
    if iterations == 0 {
        return Err(Error::Invalid("IBM Model 1 needs at least one iteration".into()));
    }
    let vocab: Vec<String> = pairs
        .iter()
        .filter(|(_, bag)| !bag.is_empty())
        .flat_map(|(ws, _)| ws.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyInput("IBM Model 1 vocabulary"));
    }
    let word_index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let labels: Vec<LabelId> = pairs
        .iter()
        .filter(|(ws, _)| !ws.is_empty())
        .flat_map(|(_, b)| b.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // encoded pairs: word indices, deduplicated label positions
    let encoded: Vec<(Vec<usize>, Vec<usize>)> = pairs
        .iter()
        .filter(|(ws, b)| !ws.is_empty() && !b.is_empty())
        .map(|(ws, bag)| {
            let w = ws.iter().map(|w| word_index[w]).collect();
            let b: BTreeSet<usize> = bag.iter().map(|l| labels.binary_search(l).unwrap()).collect();
            (w, b.into_iter().collect())
        })
        .collect();

    // sparse support: words co-occurring with each label
    let mut support: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); labels.len()];
    for (ws, bag) in &encoded {
        for &c in bag {
            support[c].extend(ws.iter().copied());
        }
    }
    let row_idx: Vec<Vec<usize>> = support.into_iter().map(|s| s.into_iter().collect()).collect();
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(row_idx.iter().scan(0, |acc, r| {
            *acc += r.len();
            Some(*acc)
        }))
        .collect();
    let nnz = *offsets.last().unwrap();
    let flat = |c: usize, w: usize| offsets[c] + row_idx[c].binary_search(&w).unwrap();

    let mut probs = vec![1.0 / vocab.len() as f64; nnz];
    // fixed chunking keeps the floating-point reduction order independent of
    // the thread pool
    let chunk = encoded.len().div_ceil(32).max(1);
    let e_step = |probs: &[f64]| -> (Vec<f64>, f64) {
        let partials: Vec<(Vec<f64>, f64)> = encoded
            .par_chunks(chunk)
            .map(|part| {
                let mut counts = vec![0.0; nnz];
                let mut ll = 0.0;
                let mut slots = Vec::new();
                for (ws, bag) in part {
                    let inv_bag = 1.0 / bag.len() as f64;
                    for &w in ws {
                        slots.clear();
                        slots.extend(bag.iter().map(|&c| flat(c, w)));
                        let z: f64 = slots.iter().map(|&s| probs[s]).sum();
                        ll += (z * inv_bag).ln();
                        for &s in &slots {
                            counts[s] += probs[s] / z;
                        }
                    }
                }
                (counts, ll)
            })
            .collect();
        let mut counts = vec![0.0; nnz];
        let mut ll = 0.0;
        for (c, l) in partials {
            for (a, b) in counts.iter_mut().zip(c) {
                *a += b;
            }
            ll += l;
        }
        (counts, ll)
    };

    let mut trace = Vec::with_capacity(iterations);
    for it in 0..=iterations {
        let (counts, ll) = e_step(&probs);
        if it > 0 {
            trace.push(ll);
        }
        if it == iterations {
            break;
        }
        for c in 0..labels.len() {
            let row = &counts[offsets[c]..offsets[c + 1]];
            let total: f64 = row.iter().sum();
            for (k, &v) in row.iter().enumerate() {
                probs[offsets[c] + k] = v / total;
            }
        }
    }

    let rows = (0..labels.len())
        .map(|c| (row_idx[c].clone(), probs[offsets[c]..offsets[c + 1]].to_vec()))
        .collect();
    Ok((TranslationTable { vocab, word_index, labels, rows }, trace))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub counts: BTreeMap<(LabelId, LabelId), u64>,
}

impl TransitionCounts {
    pub fn get(&self, from: LabelId, to: LabelId) -> u64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Counts label pairs at adjacent word positions within each assignment.
pub fn count_transitions(assignments: &[RawAssignment]) -> TransitionCounts {
    let mut counts = BTreeMap::new();
    for a in assignments {
        for pair in a.labels.windows(2) {
            *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
        }
    }
    TransitionCounts { counts }
}

/// Serialized alignment model; all keys are label names or words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentModel {
    pub format: String,
    pub word_weights: BTreeMap<String, f64>,
    pub label_weights: BTreeMap<String, f64>,
    pub translation: BTreeMap<String, BTreeMap<String, f64>>,
    pub transitions: BTreeMap<String, BTreeMap<String, u64>>,
    pub log_likelihood: Vec<f64>,
}

impl AlignmentModel {
    pub fn from_parts(
        weights: &TfIdfWeights,
        table: &TranslationTable,
        counts: &TransitionCounts,
        log_likelihood: Vec<f64>,
        taxonomy: &LabelTaxonomy,
    ) -> Self {
        let name = |l: LabelId| taxonomy.name(l);
        let mut transitions: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (&(a, b), &n) in &counts.counts {
            transitions.entry(name(a)).or_default().insert(name(b), n);
        }
        AlignmentModel {
            format: ALIGNMENT_FORMAT.to_string(),
            word_weights: weights.words.clone(),
            label_weights: weights.labels.iter().map(|(&l, &w)| (name(l), w)).collect(),
            translation: table.to_rows().into_iter().map(|(l, r)| (name(l), r)).collect(),
            transitions,
            log_likelihood,
        }
    }

    pub fn to_parts(&self, taxonomy: &LabelTaxonomy) -> Result<(TranslationTable, TfIdfWeights, TransitionCounts)> {
        let id = |n: &str| taxonomy.require(n);
        let mut rows = BTreeMap::new();
        for (l, r) in &self.translation {
            rows.insert(id(l)?, r.clone());
        }
        let mut labels = BTreeMap::new();
        for (l, &w) in &self.label_weights {
            labels.insert(id(l)?, w);
        }
        let mut counts = BTreeMap::new();
        for (a, row) in &self.transitions {
            for (b, &n) in row {
                counts.insert((id(a)?, id(b)?), n);
            }
        }
        Ok((
            TranslationTable::from_rows(rows),
            TfIdfWeights { words: self.word_weights.clone(), labels },
            TransitionCounts { counts },
        ))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: AlignmentModel =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if model.format != ALIGNMENT_FORMAT {
            return Err(Error::Format { expected: ALIGNMENT_FORMAT, found: model.format });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("alignment model", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlignConfig {
    pub gap_ms: u64,
    pub iterations: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { gap_ms: DEFAULT_GAP_MS, iterations: DEFAULT_EM_ITERATIONS }
    }
}

/// Noisy assignments for every example; examples with fully unlabeled maps
/// are skipped with a warning.
pub fn assign_corpus(corpus: &Corpus, gap_ms: u64) -> Vec<RawAssignment> {
    corpus
        .examples()
        .par_iter()
        .filter_map(|e| {
            let segs = segment_phrases(&e.narrative, &e.trace, gap_ms);
            match noisy_assign(e, &segs) {
                Ok(a) => Some(a),
                Err(err) => {
                    log::warn!("skipping `{}`: {err}", e.id);
                    None
                }
            }
        })
        .collect()
}

pub struct AlignmentOutput {
    pub model: AlignmentModel,
    pub assignments: Vec<RawAssignment>,
    pub weights: TfIdfWeights,
    pub table: TranslationTable,
    pub counts: TransitionCounts,
}

/// Runs noisy assignment, both tf-idf passes, IBM Model 1 and transition
/// counting over a corpus.
pub fn train_alignment(corpus: &Corpus, config: &AlignConfig) -> Result<AlignmentOutput> {
    let assignments = assign_corpus(corpus, config.gap_ms);
    let narratives: Vec<Vec<String>> = corpus.iter().map(Example::words).collect();
    let bags: Vec<Vec<LabelId>> = corpus.iter().map(|e| e.label_map.labels_present().into_iter().collect()).collect();
    let weights = TfIdfWeights { words: compute_tfidf(&narratives)?, labels: compute_tfidf(&bags)? };
    let pairs: Vec<(Vec<String>, Vec<LabelId>)> = narratives.into_iter().zip(bags).collect();
    let (table, ll) = train_ibm1(&pairs, config.iterations)?;
    let counts = count_transitions(&assignments);
    let model = AlignmentModel::from_parts(&weights, &table, &counts, ll, &corpus.taxonomy);
    Ok(AlignmentOutput { model, assignments, weights, table, counts })
}
