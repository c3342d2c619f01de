//! Metrics: tagging agreement, retrieval recall@k, class-set F1, canvas
//! statistics and the retrieval-depth sweep.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::compose::{extract_instances, Canvas, CanvasMeta, Layer};
use crate::corpus::{segment_phrases, Corpus, Example, LabelId, LabelKind, LabelTaxonomy};
use crate::error::{Error, Result};
use crate::geometry::{iou, BinaryMask};
use crate::retrieval::{candidate_ious, extract_masks, ClassInstance, Query, RetrievalIndex};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: u64,
}

impl Prf {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Prf { precision: p, recall: r, f1, support: tp + fn_ }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaggingReport {
    pub tokens: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: BTreeMap<String, Prf>,
}

fn macro_avg(per_class: &BTreeMap<String, Prf>) -> (f64, f64, f64) {
    if per_class.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = per_class.len() as f64;
    let sum = per_class.values().fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.precision, a.1 + p.recall, a.2 + p.f1));
    (sum.0 / n, sum.1 / n, sum.2 / n)
}

/// Token accuracy plus per-class and macro precision/recall/F1 over every
/// class seen in either sequence set.
pub fn tagging_accuracy(predicted: &[Vec<LabelId>], gold: &[Vec<LabelId>], taxonomy: &LabelTaxonomy) -> Result<TaggingReport> {
    if predicted.len() != gold.len() {
        return Err(Error::DimensionMismatch(format!("{} predicted vs {} gold sequences", predicted.len(), gold.len())));
    }
    let mut counts: BTreeMap<LabelId, (u64, u64, u64)> = BTreeMap::new();
    let (mut correct, mut total) = (0u64, 0u64);
    for (i, (p, g)) in predicted.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::DimensionMismatch(format!("sequence {i}: {} predicted vs {} gold tags", p.len(), g.len())));
        }
        for (&a, &b) in p.iter().zip(g) {
            total += 1;
            if a == b {
                correct += 1;
                counts.entry(a).or_default().0 += 1;
            } else {
                counts.entry(a).or_default().1 += 1;
                counts.entry(b).or_default().2 += 1;
            }
        }
    }
    let per_class: BTreeMap<String, Prf> =
        counts.into_iter().map(|(c, (tp, fp, fn_))| (taxonomy.name(c), Prf::from_counts(tp, fp, fn_))).collect();
    let (mp, mr, mf) = macro_avg(&per_class);
    Ok(TaggingReport {
        tokens: total,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        macro_precision: mp,
        macro_recall: mr,
        macro_f1: mf,
        per_class,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassSetReport {
    pub examples: usize,
    /// Mean over classes of per-class F1, each class treated as a binary
    /// per-example detection.
    pub macro_f1: f64,
    pub micro_f1: f64,
    /// Mean over examples of set F1.
    pub mean_example_f1: f64,
    pub per_class: BTreeMap<String, Prf>,
}

/// Agreement between detected and gold class sets, one pair per example.
pub fn class_set_f1(pairs: &[(BTreeSet<LabelId>, BTreeSet<LabelId>)], taxonomy: &LabelTaxonomy) -> ClassSetReport {
    let mut counts: BTreeMap<LabelId, (u64, u64, u64)> = BTreeMap::new();
    let mut example_sum = 0.0;
    for (detected, gold) in pairs {
        for c in detected.union(gold) {
            let e = counts.entry(*c).or_default();
            match (detected.contains(c), gold.contains(c)) {
                (true, true) => e.0 += 1,
                (true, false) => e.1 += 1,
                _ => e.2 += 1,
            }
        }
        let tp = detected.intersection(gold).count() as u64;
        example_sum += if detected.is_empty() && gold.is_empty() {
            1.0
        } else {
            Prf::from_counts(tp, detected.len() as u64 - tp, gold.len() as u64 - tp).f1
        };
    }
    let (tp, fp, fn_) = counts.values().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let per_class: BTreeMap<String, Prf> =
        counts.into_iter().map(|(c, (tp, fp, fn_))| (taxonomy.name(c), Prf::from_counts(tp, fp, fn_))).collect();
    ClassSetReport {
        examples: pairs.len(),
        macro_f1: macro_avg(&per_class).2,
        micro_f1: Prf::from_counts(tp, fp, fn_).f1,
        mean_example_f1: if pairs.is_empty() { 0.0 } else { example_sum / pairs.len() as f64 },
        per_class,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecallRow {
    pub k: usize,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecallTable {
    pub queries: usize,
    pub rows: Vec<RecallRow>,
    /// One-based rank of each gold id.
    pub ranks: Vec<usize>,
}

/// Fraction of queries whose gold id is among the top `k`, for each `k`.
pub fn recall_at_k(index: &RetrievalIndex, pairs: &[(Query, String)], ks: &[usize]) -> Result<RecallTable> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("ks must be positive and strictly ascending".into()));
    }
    if let Some((_, id)) = pairs.iter().find(|(_, id)| !index.contains(id)) {
        return Err(Error::Invalid(format!("gold id `{id}` is not in the index")));
    }
    let ranks: Vec<usize> = pairs
        .par_iter()
        .map(|(q, gold)| {
            let hits = index.scores(q)?;
            Ok(hits.iter().position(|h| &h.id == gold).expect("gold id is indexed") + 1)
        })
        .collect::<Result<_>>()?;
    let n = pairs.len().max(1) as f64;
    let rows = ks
        .iter()
        .map(|&k| RecallRow { k, recall: ranks.iter().filter(|&&r| r <= k).count() as f64 / n })
        .collect();
    Ok(RecallTable { queries: pairs.len(), rows, ranks })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CanvasStats {
    pub width: u32,
    pub height: u32,
    pub histogram: BTreeMap<String, u64>,
    pub thing_share: f64,
    pub stuff_share: f64,
    pub fill_share: f64,
    pub unlabeled_share: f64,
    /// Placements with at least one visible pixel.
    pub instances: usize,
}

pub fn canvas_stats(canvas: &Canvas, taxonomy: &LabelTaxonomy) -> CanvasStats {
    let total = (canvas.width() as u64 * canvas.height() as u64) as f64;
    let mut layers = [0u64; 3];
    let mut visible = BTreeSet::new();
    for p in canvas.provenances() {
        layers[p.layer as usize] += 1;
        if let Some(i) = p.instance {
            visible.insert(i);
        }
    }
    let histogram = canvas.label_map().histogram().into_iter().map(|(id, n)| (taxonomy.name(id), n)).collect();
    CanvasStats {
        width: canvas.width(),
        height: canvas.height(),
        histogram,
        thing_share: layers[Layer::Thing as usize] as f64 / total,
        stuff_share: layers[Layer::Stuff as usize] as f64 / total,
        fill_share: layers[Layer::Fill as usize] as f64 / total,
        unlabeled_share: canvas.unlabeled_pixels() as f64 / total,
        instances: visible.len(),
    }
}

/// Classes a composition detected from its narrative: things that received a
/// mask, plus mentioned stuff that is visible on the canvas.
pub fn detected_classes(meta: &CanvasMeta, taxonomy: &LabelTaxonomy) -> BTreeSet<LabelId> {
    let visible: BTreeSet<&str> = meta.classes.iter().map(String::as_str).collect();
    meta.instances
        .iter()
        .filter(|i| match i.kind {
            LabelKind::Thing => i.mask_source.is_some(),
            LabelKind::Stuff => visible.contains(i.class.as_str()),
        })
        .filter_map(|i| taxonomy.id_of(&i.class))
        .collect()
}

/// Sweep query for an example under the given tags: thing instances from its
/// own trace, each paired with all of the example's pixels of that class
/// resampled to `canvas`.
pub fn sweep_query(example: &Example, tags: &[LabelId], taxonomy: &LabelTaxonomy, canvas: (u32, u32), gap_ms: u64) -> Result<SweepQuery> {
    let segments = segment_phrases(&example.narrative, &example.trace, gap_ms);
    let (instances, _) = extract_instances(tags, &segments, &example.trace, taxonomy);
    let map = &example.label_map;
    let instances = instances
        .into_iter()
        .filter(|i| i.kind == LabelKind::Thing)
        .map(|i| {
            let full = BinaryMask::from_fn(map.width(), map.height(), |x, y| map.get(x, y) == Some(i.class_id))?;
            Ok((i, Some(full.resample(canvas.0, canvas.1)?)))
        })
        .collect::<Result<_>>()?;
    Ok(SweepQuery { query: Query::Words(example.words()), instances })
}

/// One query of the retrieval-depth sweep: its thing instances and, when
/// known, each instance's true mask at canvas resolution.
#[derive(Clone, Debug)]
pub struct SweepQuery {
    pub query: Query,
    pub instances: Vec<(ClassInstance, Option<BinaryMask>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    /// Mean over instances of the selected mask's IOU with the hull; an
    /// instance with no candidate scores 0.
    pub mean_hull_iou: f64,
    /// Same selection scored against the true mask.
    pub mean_gold_iou: Option<f64>,
    /// Share of instances with at least one candidate.
    pub coverage: f64,
    pub instances: usize,
}

/// Mean selected-mask IOU as a function of retrieval depth. Candidates are
/// scored once at the largest `k`; shallower depths use rank prefixes.
pub fn k_sweep(
    corpus: &Corpus,
    index: &RetrievalIndex,
    queries: &[SweepQuery],
    ks: &[usize],
    canvas: (u32, u32),
    min_pixels: u64,
) -> Result<Vec<SweepRow>> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("ks must be positive and strictly ascending".into()));
    }
    let kmax = *ks.last().expect("non-empty");
    // per instance, per k: (hull iou, gold iou, has candidate)
    type PerK = Vec<(f64, Option<f64>, bool)>;
    let per_query: Vec<Vec<PerK>> = queries
        .par_iter()
        .map(|q| {
            let hits = index.top_k(&q.query, kmax)?;
            q.instances
                .iter()
                .map(|(inst, gold)| {
                    let mut cands = Vec::new();
                    let mut rank_of = Vec::new();
                    for (r, h) in hits.iter().enumerate() {
                        if let Some(e) = corpus.get(&h.id) {
                            for m in extract_masks(e, inst.class_id, min_pixels) {
                                cands.push(m);
                                rank_of.push(r);
                            }
                        }
                    }
                    let ious = candidate_ious(&inst.hull, &cands, canvas)?;
                    ks.iter()
                        .map(|&k| {
                            let n = rank_of.iter().take_while(|&&r| r < k).count();
                            match crate::retrieval::best_candidate(&cands[..n], &ious[..n]) {
                                None => Ok((0.0, gold.as_ref().map(|_| 0.0), false)),
                                Some(sel) => {
                                    let g = match gold {
                                        Some(g) => Some(iou(&cands[sel.index].mask.resample(canvas.0, canvas.1)?, g)?),
                                        None => None,
                                    };
                                    Ok((sel.iou, g, true))
                                }
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let all: Vec<&Vec<(f64, Option<f64>, bool)>> = per_query.iter().flatten().collect();
    let n = all.len();
    Ok(ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let hull: f64 = all.iter().map(|v| v[j].0).sum();
            let golds: Vec<f64> = all.iter().filter_map(|v| v[j].1).collect();
            let covered = all.iter().filter(|v| v[j].2).count();
            let d = n.max(1) as f64;
            SweepRow {
                k,
                mean_hull_iou: hull / d,
                mean_gold_iou: if golds.is_empty() { None } else { Some(golds.iter().sum::<f64>() / golds.len() as f64) },
                coverage: covered as f64 / d,
                instances: n,
            }
        })
        .collect())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveShape {
    Flat,
    Rising,
    RisesThenPlateaus,
    RisesThenFalls,
    Other,
}

/// Qualitative shape of a curve: steps within `tol` count as flat.
pub fn curve_shape(values: &[f64], tol: f64) -> CurveShape {
    if values.len() < 2 {
        return CurveShape::Flat;
    }
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak_at = values.iter().position(|&v| v == peak).expect("peak exists");
    if peak - values[0] <= tol {
        return CurveShape::Flat;
    }
    let rises = values[..=peak_at].windows(2).all(|w| w[1] >= w[0] - tol);
    if !rises {
        return CurveShape::Other;
    }
    let after = &values[peak_at..];
    if after.len() == 1 {
        let last_step = values[values.len() - 1] - values[values.len() - 2];
        return if last_step <= tol { CurveShape::RisesThenPlateaus } else { CurveShape::Rising };
    }
    if after.iter().all(|&v| peak - v <= tol) {
        CurveShape::RisesThenPlateaus
    } else if after.windows(2).all(|w| w[1] <= w[0] + tol) {
        CurveShape::RisesThenFalls
    } else {
        CurveShape::Other
    }
}

/// Left-aligned plain-text table with a header rule.
pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn recall_table_text(t: &RecallTable) -> String {
    let rows: Vec<Vec<String>> = t.rows.iter().map(|r| vec![r.k.to_string(), format!("{:.4}", r.recall)]).collect();
    text_table(&["k", "recall"], &rows)
}

pub fn sweep_table_text(rows: &[SweepRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                format!("{:.4}", r.mean_hull_iou),
                r.mean_gold_iou.map_or("-".into(), |g| format!("{g:.4}")),
                format!("{:.3}", r.coverage),
                r.instances.to_string(),
            ]
        })
        .collect();
    text_table(&["k", "hull_iou", "gold_iou", "coverage", "instances"], &body)
}
