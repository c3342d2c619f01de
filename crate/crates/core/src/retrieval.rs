//! Narrative-keyed retrieval index and spatially aligned mask selection.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Example, LabelId, LabelKind};
use crate::error::{Error, Result};
use crate::geometry::{iou, rasterize, BinaryMask, Polygon};

pub const INDEX_FORMAT: &str = "scenecomp.index/1";
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MIN_PIXELS: u64 = 16;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Tfidf,
    External,
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(EncoderKind::Tfidf),
            "external" => Ok(EncoderKind::External),
            other => Err(Error::Invalid(format!("unknown encoder `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Words(Vec<String>),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

/// Unit-norm vector per example id with exhaustive cosine search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    format: String,
    encoder: EncoderKind,
    dimension: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    /// tf-idf encoder state: term -> (dimension, idf)
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    terms: BTreeMap<String, (usize, f64)>,
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    for x in &mut v {
        *x /= norm;
    }
    Some(v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: String,
    vec: Vec<f64>,
}

/// Reads `{"id", "vec"}` JSON lines; every vector must share one dimension.
pub fn load_embeddings(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?;
        match dim {
            None => dim = Some(rec.vec.len()),
            Some(d) if d != rec.vec.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "embedding `{}` has {} dimensions, expected {d}",
                    rec.id,
                    rec.vec.len()
                )))
            }
            _ => {}
        }
        out.insert(rec.id, rec.vec);
    }
    Ok(out)
}

impl RetrievalIndex {
    /// L2-normalized tf-idf bags of words over the corpus narratives, with
    /// smoothed idf `ln((1 + N) / (1 + df)) + 1`.
    pub fn tfidf(corpus: &Corpus) -> Result<Self> {
        let docs: Vec<(String, Vec<String>)> = corpus.iter().map(|e| (e.id.clone(), e.words())).collect();
        Self::tfidf_from_docs(&docs)
    }

    pub fn tfidf_from_docs(docs: &[(String, Vec<String>)]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyInput("index over zero documents"));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, words) in docs {
            for w in words.iter().map(String::as_str).collect::<BTreeSet<_>>() {
                *df.entry(w).or_insert(0) += 1;
            }
        }
        let n = docs.len() as f64;
        let terms: BTreeMap<String, (usize, f64)> = df
            .iter()
            .enumerate()
            .map(|(i, (t, &d))| (t.to_string(), (i, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)))
            .collect();
        let mut index = RetrievalIndex {
            format: INDEX_FORMAT.into(),
            encoder: EncoderKind::Tfidf,
            dimension: terms.len(),
            ids: Vec::with_capacity(docs.len()),
            vectors: Vec::with_capacity(docs.len()),
            terms,
        };
        for (id, words) in docs {
            let v = index.encode_words(words)?;
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidRecord(format!("`{id}` has an empty narrative")));
            }
            index.ids.push(id.clone());
            index.vectors.push(v);
        }
        Ok(index)
    }

    /// Externally computed embeddings; every corpus id must be covered.
    pub fn external(corpus: &Corpus, embeddings: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut ids = Vec::with_capacity(corpus.len());
        let mut vectors = Vec::with_capacity(corpus.len());
        let mut dimension = None;
        for e in corpus.iter() {
            let v = embeddings.get(&e.id).ok_or_else(|| Error::MissingEmbedding(e.id.clone()))?;
            if *dimension.get_or_insert(v.len()) != v.len() {
                return Err(Error::DimensionMismatch(format!("embedding `{}` has {} dimensions", e.id, v.len())));
            }
            let v = normalize(v.clone())
                .ok_or_else(|| Error::InvalidRecord(format!("embedding `{}` has zero norm", e.id)))?;
            ids.push(e.id.clone());
            vectors.push(v);
        }
        Ok(RetrievalIndex {
            format: INDEX_FORMAT.into(),
            encoder: EncoderKind::External,
            dimension: dimension.unwrap_or(0),
            ids,
            vectors,
            terms: BTreeMap::new(),
        })
    }

    pub fn encoder(&self) -> EncoderKind {
        self.encoder
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|i| i == id).map(|p| self.vectors[p].as_slice())
    }

    /// tf-idf encoding of a word list; unknown words are ignored and an
    /// all-unknown query encodes to the zero vector.
    pub fn encode_words<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<f64>> {
        if self.encoder != EncoderKind::Tfidf {
            return Err(Error::Invalid("text queries need a tf-idf index; pass a query vector".into()));
        }
        let mut v = vec![0.0; self.dimension];
        for w in words {
            if let Some(&(i, idf)) = self.terms.get(w.as_ref()) {
                v[i] += idf;
            }
        }
        Ok(normalize(v.clone()).unwrap_or(v))
    }

    fn query_vector(&self, query: &Query) -> Result<Vec<f64>> {
        match query {
            Query::Words(w) => self.encode_words(w),
            Query::Vector(v) => {
                if v.len() != self.dimension {
                    return Err(Error::DimensionMismatch(format!(
                        "query has {} dimensions, index has {}",
                        v.len(),
                        self.dimension
                    )));
                }
                Ok(normalize(v.clone()).unwrap_or_else(|| v.clone()))
            }
        }
    }

    pub fn scores(&self, query: &Query) -> Result<Vec<Hit>> {
        let q = self.query_vector(query)?;
        let mut hits: Vec<Hit> =
            self.ids.iter().zip(&self.vectors).map(|(id, v)| Hit { id: id.clone(), score: dot(&q, v) }).collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        Ok(hits)
    }

    /// The `k` most similar ids, descending by cosine, ties by id. `k` larger
    /// than the index is clamped.
    pub fn top_k(&self, query: &Query, k: usize) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::Invalid("k must be >= 1".into()));
        }
        if k > self.len() {
            log::warn!("k = {k} exceeds index size {}; clamping", self.len());
        }
        let mut hits = self.scores(query)?;
        hits.truncate(k);
        Ok(hits)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json("index", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: RetrievalIndex =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if index.format != INDEX_FORMAT {
            return Err(Error::Format { expected: INDEX_FORMAT, found: index.format });
        }
        Ok(index)
    }
}

pub fn build_index(corpus: &Corpus, kind: EncoderKind, embedding_file: Option<&Path>) -> Result<RetrievalIndex> {
    match kind {
        EncoderKind::Tfidf => RetrievalIndex::tfidf(corpus),
        EncoderKind::External => {
            let path = embedding_file.ok_or_else(|| Error::Invalid("external encoder needs an embedding file".into()))?;
            RetrievalIndex::external(corpus, &load_embeddings(path)?)
        }
    }
}

/// A detected class mention with the hull of the traces that ground it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassInstance {
    pub class_id: LabelId,
    pub kind: LabelKind,
    /// Half-open word range of the run.
    pub token_span: (usize, usize),
    pub hull: Polygon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskInstance {
    pub class_id: LabelId,
    pub mask: BinaryMask,
    pub source_id: String,
}

/// One instance per 4-connected component of `class` pixels, in scan order
/// of each component's first pixel; components under `min_pixels` are dropped.
pub fn extract_masks(example: &Example, class: LabelId, min_pixels: u64) -> Vec<MaskInstance> {
    let map = &example.label_map;
    let (w, h) = (map.width(), map.height());
    let mut seen = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for y0 in 0..h {
        for x0 in 0..w {
            let i0 = (y0 * w + x0) as usize;
            if seen[i0] || map.get(x0, y0) != Some(class) {
                continue;
            }
            let mut mask = BinaryMask::new(w, h).expect("label map dimensions are positive");
            seen[i0] = true;
            queue.push_back((x0, y0));
            while let Some((x, y)) = queue.pop_front() {
                mask.set(x, y);
                let neighbors = [
                    (x.wrapping_sub(1), y),
                    (x + 1, y),
                    (x, y.wrapping_sub(1)),
                    (x, y + 1),
                ];
                for (nx, ny) in neighbors {
                    if nx >= w || ny >= h {
                        continue;
                    }
                    let ni = (ny * w + nx) as usize;
                    if !seen[ni] && map.get(nx, ny) == Some(class) {
                        seen[ni] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            if mask.count() >= min_pixels {
                out.push(MaskInstance {
                    class_id: class,
                    mask: mask.with_class(class).with_source(example.id.clone()),
                    source_id: example.id.clone(),
                });
            }
        }
    }
    out
}

/// Components of `class` from every listed example, in list order.
pub fn gather_candidates<'a>(
    corpus: &Corpus,
    ids: impl IntoIterator<Item = &'a str>,
    class: LabelId,
    min_pixels: u64,
) -> Vec<MaskInstance> {
    ids.into_iter()
        .filter_map(|id| corpus.get(id))
        .flat_map(|e| extract_masks(e, class, min_pixels))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub iou: f64,
}

/// IOU of every candidate (resampled to the canvas) against the rasterized hull.
pub fn candidate_ious(hull: &Polygon, candidates: &[MaskInstance], canvas: (u32, u32)) -> Result<Vec<f64>> {
    let target = rasterize(hull, canvas.0, canvas.1)?;
    candidates.iter().map(|c| iou(&c.mask.resample(canvas.0, canvas.1)?, &target)).collect()
}

/// Candidate with the highest IOU against the instance hull, at the
/// candidates' own normalized positions. Ties go to the lower source id,
/// then the earlier candidate.
pub fn select_mask(instance: &ClassInstance, candidates: &[MaskInstance], canvas: (u32, u32)) -> Result<Option<Selection>> {
    let ious = candidate_ious(&instance.hull, candidates, canvas)?;
    Ok(best_candidate(candidates, &ious))
}

pub(crate) fn best_candidate(candidates: &[MaskInstance], ious: &[f64]) -> Option<Selection> {
    let mut best: Option<Selection> = None;
    for (i, &v) in ious.iter().enumerate() {
        let better = match &best {
            None => true,
            Some(b) => v > b.iou || (v == b.iou && candidates[i].source_id < candidates[b.index].source_id),
        };
        if better {
            best = Some(Selection { index: i, iou: v });
        }
    }
    best
}

/// Lookup from corpus id to rank among `hits`.
pub fn rank_map(hits: &[Hit]) -> HashMap<&str, usize> {
    hits.iter().enumerate().map(|(i, h)| (h.id.as_str(), i)).collect()
}
