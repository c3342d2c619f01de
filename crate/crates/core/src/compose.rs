//! Canvas composition: a stuff background from the best-matching retrieved
//! image, holes filled from the nearest stuff pixel, then thing masks placed
//! on their traces in reverse narrative order.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus_strict, segment_phrases, Corpus, Example, LabelId, LabelKind, LabelMap, LabelTaxonomy, PhraseSegment, Scene, TracePoint, UNLABELED};
use crate::error::{Error, Result};
use crate::geometry::{centroid, convex_hull, iou, rasterize, BinaryMask, Point};
use crate::render::{colorize, save_rgb, LegendRow, Palette};
use crate::retrieval::{gather_candidates, select_mask, ClassInstance, Hit, MaskInstance, Query, RetrievalIndex};
use crate::tagger::{build_hmm, HmmConfig, HmmModel};
use crate::align::{train_alignment, AlignConfig};

pub const CANVAS_FORMAT: &str = "scenecomp.canvas/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposeConfig {
    pub gap_ms: u64,
    pub k: usize,
    pub width: u32,
    pub height: u32,
    pub min_pixels: u64,
    /// Label used when the background has no stuff pixels at all.
    pub fallback_label: String,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            gap_ms: crate::corpus::DEFAULT_GAP_MS,
            k: crate::retrieval::DEFAULT_K,
            width: 256,
            height: 256,
            min_pixels: crate::retrieval::DEFAULT_MIN_PIXELS,
            fallback_label: "sky".into(),
        }
    }
}

impl ComposeConfig {
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Thing,
    Stuff,
    Fill,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub layer: Layer,
    /// Placement index, for thing pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
}

/// Composed label grid with per-pixel provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Canvas {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    origin: Vec<u32>,
    sources: Vec<Provenance>,
}

impl Canvas {
    /// Background canvas: pixels labeled in `partial` are stuff, the rest fill.
    pub fn from_background(full: &LabelMap, partial: &LabelMap, source_id: &str) -> Result<Self> {
        if (full.width(), full.height()) != (partial.width(), partial.height()) {
            return Err(Error::DimensionMismatch("background and partial grid differ in size".into()));
        }
        if full.raw().contains(&UNLABELED) {
            return Err(Error::Invalid("background has unlabeled pixels".into()));
        }
        let sources = vec![
            Provenance { source_id: source_id.into(), layer: Layer::Stuff, instance: None },
            Provenance { source_id: source_id.into(), layer: Layer::Fill, instance: None },
        ];
        let origin = partial.raw().iter().map(|&v| u32::from(v == UNLABELED)).collect();
        Ok(Canvas { width: full.width(), height: full.height(), labels: full.raw().to_vec(), origin, sources })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn label(&self, x: u32, y: u32) -> LabelId {
        LabelId(self.labels[self.index(x, y)])
    }

    pub fn provenance(&self, x: u32, y: u32) -> &Provenance {
        &self.sources[self.origin[self.index(x, y)] as usize]
    }

    pub fn raw_labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_map(&self) -> LabelMap {
        LabelMap::new(self.width, self.height, self.labels.clone()).expect("canvas dimensions are valid")
    }

    /// Per-pixel provenance in row-major order.
    pub fn provenances(&self) -> impl Iterator<Item = &Provenance> + '_ {
        self.origin.iter().map(|&o| &self.sources[o as usize])
    }

    pub fn unlabeled_pixels(&self) -> usize {
        self.labels.iter().filter(|&&v| v == UNLABELED).count()
    }

    fn intern(&mut self, p: Provenance) -> u32 {
        match self.sources.iter().position(|s| *s == p) {
            Some(i) => i as u32,
            None => {
                self.sources.push(p);
                (self.sources.len() - 1) as u32
            }
        }
    }

    /// Run-length encoding of the provenance grid, row-major.
    pub fn provenance_runs(&self) -> ProvenanceFile {
        let mut runs: Vec<[u64; 2]> = Vec::new();
        for &o in &self.origin {
            match runs.last_mut() {
                Some(r) if r[0] == o as u64 => r[1] += 1,
                _ => runs.push([o as u64, 1]),
            }
        }
        ProvenanceFile { width: self.width, height: self.height, sources: self.sources.clone(), runs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceFile {
    pub width: u32,
    pub height: u32,
    pub sources: Vec<Provenance>,
    /// `[source index, run length]` pairs.
    pub runs: Vec<[u64; 2]>,
}

/// Maximal runs of one non-excluded tag become instances, hulled over the
/// trace points of every segment overlapping the run. Runs with no trace
/// points are dropped with a warning.
pub fn extract_instances(
    tags: &[LabelId],
    segments: &[PhraseSegment],
    trace: &[TracePoint],
    taxonomy: &LabelTaxonomy,
) -> (Vec<ClassInstance>, Vec<String>) {
    let mut instances = Vec::new();
    let mut warnings = Vec::new();
    let mut start = 0;
    while start < tags.len() {
        let tag = tags[start];
        let mut end = start + 1;
        while end < tags.len() && tags[end] == tag {
            end += 1;
        }
        let run = start..end;
        start = end;
        if taxonomy.is_excluded(tag) {
            continue;
        }
        let Some(kind) = taxonomy.kind(tag) else {
            warnings.push(format!("tag {tag} is not in the taxonomy; dropped"));
            continue;
        };
        let points: Vec<Point> = segments
            .iter()
            .filter(|s| s.words.start < run.end && run.start < s.words.end)
            .flat_map(|s| trace[s.trace.clone()].iter().map(Point::from))
            .collect();
        match convex_hull(&points) {
            Ok(hull) => instances.push(ClassInstance { class_id: tag, kind, token_span: (run.start, run.end), hull }),
            Err(_) => warnings.push(format!(
                "`{}` at words {}..{} has no trace points; dropped",
                taxonomy.name(tag),
                run.start,
                run.end
            )),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    (instances, warnings)
}

/// All pixels of `class` in `map`, resampled to the canvas.
fn class_mask(map: &LabelMap, class: LabelId, dims: (u32, u32)) -> Result<BinaryMask> {
    BinaryMask::from_fn(map.width(), map.height(), |x, y| map.get(x, y) == Some(class))?.resample(dims.0, dims.1)
}

/// Mean IOU over stuff instances between each candidate's class pixels and
/// the instance hulls, in candidate order.
pub fn background_scores(
    stuff: &[ClassInstance],
    candidates: &[&Example],
    dims: (u32, u32),
) -> Result<Vec<f64>> {
    let hulls: Vec<BinaryMask> = stuff.iter().map(|s| rasterize(&s.hull, dims.0, dims.1)).collect::<Result<_>>()?;
    candidates
        .iter()
        .map(|e| {
            if stuff.is_empty() {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for (inst, hull) in stuff.iter().zip(&hulls) {
                sum += iou(&class_mask(&e.label_map, inst.class_id, dims)?, hull)?;
            }
            Ok(sum / stuff.len() as f64)
        })
        .collect()
}

/// Candidate whose stuff pixels best match the stuff hulls (mean IOU), ties
/// by retrieval rank. Without stuff instances the top-ranked id wins.
pub fn choose_background(
    stuff: &[ClassInstance],
    candidates: &[&str],
    corpus: &Corpus,
    dims: (u32, u32),
) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("background choice over zero candidates"));
    }
    let examples: Vec<&Example> = candidates
        .iter()
        .map(|id| corpus.get(id).ok_or_else(|| Error::Invalid(format!("candidate `{id}` is not in the corpus"))))
        .collect::<Result<_>>()?;
    let scores = background_scores(stuff, &examples, dims)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(candidates[best].to_string())
}

/// Stuff pixels of `example`; thing and unlabeled pixels become holes.
pub fn build_background(example: &Example, taxonomy: &LabelTaxonomy) -> LabelMap {
    let data = example
        .label_map
        .raw()
        .iter()
        .map(|&v| if v != UNLABELED && taxonomy.is_stuff(LabelId(v)) { v } else { UNLABELED })
        .collect();
    LabelMap::new(example.label_map.width(), example.label_map.height(), data).expect("same dimensions")
}

/// `num / den` with `den > 0`.
#[derive(Copy, Clone, Debug)]
struct Ratio {
    num: i128,
    den: i128,
}

impl Ratio {
    fn cmp_int(self, x: i128) -> Ordering {
        self.num.cmp(&(x * self.den))
    }

    fn lt(self, other: Ratio) -> bool {
        self.num * other.den < other.num * self.den
    }
}

/// Fills every hole with the label of the nearest labeled pixel (squared
/// Euclidean distance between pixel centers), ties to the source with the
/// smaller y, then smaller x. Linear time: a column pass followed by a lower
/// envelope of parabolas per row, in exact integer arithmetic. A grid with
/// no labeled pixel fills with `fallback`.
pub fn nearest_fill(grid: &LabelMap, fallback: LabelId) -> LabelMap {
    let (w, h) = (grid.width() as usize, grid.height() as usize);
    let raw = grid.raw();
    if !raw.contains(&UNLABELED) {
        return grid.clone();
    }
    if raw.iter().all(|&v| v == UNLABELED) {
        return LabelMap::filled(grid.width(), grid.height(), fallback).expect("valid dimensions");
    }
    // Column pass: nearest labeled row in the same column, upper on ties.
    const NONE: u32 = u32::MAX;
    let mut src_row = vec![NONE; w * h];
    for x in 0..w {
        let mut above = NONE;
        for y in 0..h {
            if raw[y * w + x] != UNLABELED {
                above = y as u32;
            }
            src_row[y * w + x] = above;
        }
        let mut below = NONE;
        for y in (0..h).rev() {
            if raw[y * w + x] != UNLABELED {
                below = y as u32;
            }
            let up = src_row[y * w + x];
            let pick_below = below != NONE && (up == NONE || below as usize - y < y - up as usize);
            if pick_below {
                src_row[y * w + x] = below;
            }
        }
    }
    let mut out = raw.to_vec();
    let mut v: Vec<usize> = Vec::with_capacity(w);
    let mut z: Vec<Option<Ratio>> = Vec::with_capacity(w);
    for y in 0..h {
        let row = &src_row[y * w..(y + 1) * w];
        let g2 = |q: usize| -> i128 {
            let d = row[q] as i128 - y as i128;
            d * d
        };
        v.clear();
        z.clear();
        for q in (0..w).filter(|&q| row[q] != NONE) {
            let hq = g2(q) + (q * q) as i128;
            loop {
                let Some(&p) = v.last() else {
                    v.push(q);
                    z.push(None);
                    break;
                };
                let hp = g2(p) + (p * p) as i128;
                let s = Ratio { num: hq - hp, den: 2 * (q - p) as i128 };
                match z.last().copied().flatten() {
                    Some(zk) if s.lt(zk) => {
                        v.pop();
                        z.pop();
                    }
                    _ => {
                        v.push(q);
                        z.push(Some(s));
                        break;
                    }
                }
            }
        }
        if v.is_empty() {
            continue;
        }
        let mut k = 0;
        for x in 0..w {
            if raw[y * w + x] != UNLABELED {
                continue;
            }
            let xi = x as i128;
            while k + 1 < v.len() && z[k + 1].expect("interior boundary").cmp_int(xi) == Ordering::Less {
                k += 1;
            }
            let key = |q: usize| {
                let dx = xi - q as i128;
                (dx * dx + g2(q), row[q], q)
            };
            let mut best = key(v[k]);
            let mut j = k + 1;
            while j < v.len() && z[j].expect("interior boundary").cmp_int(xi) == Ordering::Equal {
                best = best.min(key(v[j]));
                j += 1;
            }
            let (_, sy, sx) = best;
            out[y * w + x] = raw[sy as usize * w + sx];
        }
    }
    LabelMap::new(grid.width(), grid.height(), out).expect("same dimensions")
}

/// Integer translation taking the mask centroid onto the hull-raster
/// centroid, clamped so the mask stays on the canvas when it fits.
pub fn placement_offset(hull_raster: &BinaryMask, mask: &BinaryMask) -> Result<(i64, i64)> {
    let (w, h) = mask.dims();
    let ch = centroid(hull_raster)?;
    let cm = centroid(mask)?;
    let mut dx = ((ch.x - cm.x) * w as f64).round() as i64;
    let mut dy = ((ch.y - cm.y) * h as f64).round() as i64;
    let (x0, y0, x1, y1) = mask.bbox().expect("non-empty mask");
    let clamp = |d: i64, lo: u32, hi: u32, n: u32| {
        let (min, max) = (-(lo as i64), n as i64 - 1 - hi as i64);
        if min <= max {
            d.clamp(min, max)
        } else {
            d
        }
    };
    dx = clamp(dx, x0, x1, w);
    dy = clamp(dy, y0, y1, h);
    Ok((dx, dy))
}

/// Paints the masks centered on their hulls, last-mentioned first, so
/// earlier-mentioned instances end on top. Returns the per-placement offsets.
pub fn place_things(mut canvas: Canvas, placements: &[(ClassInstance, MaskInstance)]) -> Result<(Canvas, Vec<(i64, i64)>)> {
    let (w, h) = (canvas.width, canvas.height);
    let mut offsets = vec![(0, 0); placements.len()];
    for (i, (inst, m)) in placements.iter().enumerate().rev() {
        let mask = m.mask.resample(w, h)?;
        if mask.is_empty() {
            continue;
        }
        let hull = rasterize(&inst.hull, w, h)?;
        let (dx, dy) = placement_offset(&hull, &mask)?;
        offsets[i] = (dx, dy);
        let o = canvas.intern(Provenance { source_id: m.source_id.clone(), layer: Layer::Thing, instance: Some(i) });
        for (x, y) in mask.iter_set() {
            let (tx, ty) = (x as i64 + dx, y as i64 + dy);
            if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
                continue;
            }
            let idx = canvas.index(tx as u32, ty as u32);
            canvas.labels[idx] = inst.class_id.0;
            canvas.origin[idx] = o;
        }
    }
    Ok((canvas, offsets))
}

/// Immutable models a composition reads.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub corpus: Corpus,
    pub hmm: HmmModel,
    pub index: RetrievalIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub class: String,
    pub kind: LabelKind,
    pub token_span: [usize; 2],
    pub words: String,
    pub hull: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<[i64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanvasMeta {
    pub format: String,
    pub canvas_id: String,
    pub width: u32,
    pub height: u32,
    pub config: ComposeConfig,
    pub words: Vec<String>,
    pub tags: Vec<String>,
    pub retrieved: Vec<Hit>,
    pub background_id: String,
    pub instances: Vec<InstanceMeta>,
    /// Classes present on the canvas, by id.
    pub classes: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Composition {
    pub canvas: Canvas,
    pub meta: CanvasMeta,
}

impl Pipeline {
    pub fn new(corpus: Corpus, hmm: HmmModel, index: RetrievalIndex) -> Result<Self> {
        if let Some(id) = index.ids().iter().find(|id| corpus.get(id).is_none()) {
            return Err(Error::Invalid(format!("index id `{id}` is not in the corpus")));
        }
        Ok(Pipeline { corpus, hmm, index })
    }

    /// Corpus manifest (taxonomy beside it), HMM and index files.
    pub fn load(manifest: &Path, hmm: &Path, index: &Path) -> Result<Self> {
        let corpus = load_corpus_strict(manifest, None)?;
        Pipeline::new(corpus, HmmModel::load(hmm)?, RetrievalIndex::load(index)?)
    }

    /// Alignment, HMM and tf-idf index trained on `corpus`.
    pub fn train(corpus: Corpus, align: &AlignConfig, hmm: &HmmConfig) -> Result<Self> {
        let out = train_alignment(&corpus, align)?;
        let hmm = build_hmm(&out.table, &out.weights, &out.counts, &corpus.taxonomy, hmm)?;
        let index = RetrievalIndex::tfidf(&corpus)?;
        Pipeline::new(corpus, hmm, index)
    }

    pub fn taxonomy(&self) -> &LabelTaxonomy {
        &self.corpus.taxonomy
    }

    pub fn tag(&self, words: &[String]) -> Result<Vec<LabelId>> {
        self.hmm.viterbi(words, None)
    }

    /// segment → tag → instances → retrieve → background → fill → things.
    pub fn compose(&self, scene: &Scene, config: &ComposeConfig) -> Result<Composition> {
        let taxonomy = self.taxonomy();
        let dims = config.dims();
        if dims.0 == 0 || dims.1 == 0 {
            return Err(Error::Invalid("canvas dimensions must be positive".into()));
        }
        let words: Vec<String> = scene.narrative.iter().map(|w| w.text.clone()).collect();
        if words.is_empty() {
            return Err(Error::EmptyInput("composition needs a non-empty narrative"));
        }
        let segments = segment_phrases(&scene.narrative, &scene.trace, config.gap_ms);
        let tags = self.tag(&words)?;
        let (instances, mut warnings) = extract_instances(&tags, &segments, &scene.trace, taxonomy);

        let query = match &scene.embedding {
            Some(v) => Query::Vector(v.clone()),
            None => Query::Words(words.clone()),
        };
        let hits = self.index.top_k(&query, config.k)?;
        let ids: Vec<&str> = hits.iter().map(|h| h.id.as_str()).collect();

        let stuff: Vec<ClassInstance> = instances.iter().filter(|i| i.kind == LabelKind::Stuff).cloned().collect();
        let background_id = choose_background(&stuff, &ids, &self.corpus, dims)?;
        let partial = build_background(self.corpus.get(&background_id).expect("checked"), taxonomy).resample(dims.0, dims.1)?;
        let fallback = if partial.histogram().is_empty() {
            let id = taxonomy.require(&config.fallback_label)?;
            warnings.push(format!("background `{background_id}` has no stuff pixels; filling with `{}`", config.fallback_label));
            id
        } else {
            LabelId(0)
        };
        let full = nearest_fill(&partial, fallback);
        let canvas = Canvas::from_background(&full, &partial, &background_id)?;

        let mut metas: Vec<InstanceMeta> = instances
            .iter()
            .map(|inst| InstanceMeta {
                class: taxonomy.name(inst.class_id),
                kind: inst.kind,
                token_span: [inst.token_span.0, inst.token_span.1],
                words: words[inst.token_span.0..inst.token_span.1].join(" "),
                hull: inst.hull.vertices().iter().map(|p| [p.x, p.y]).collect(),
                mask_source: None,
                iou: None,
                offset: None,
            })
            .collect();
        let mut placements = Vec::new();
        let mut placed_meta = Vec::new();
        for (i, inst) in instances.iter().enumerate().filter(|(_, i)| i.kind == LabelKind::Thing) {
            let candidates = gather_candidates(&self.corpus, ids.iter().copied(), inst.class_id, config.min_pixels);
            match select_mask(inst, &candidates, dims)? {
                Some(sel) => {
                    let m = candidates[sel.index].clone();
                    metas[i].mask_source = Some(m.source_id.clone());
                    metas[i].iou = Some(sel.iou);
                    placements.push((inst.clone(), m));
                    placed_meta.push(i);
                }
                None => {
                    let msg = format!("no `{}` mask among the top {} images; skipped", metas[i].class, ids.len());
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        let (canvas, offsets) = place_things(canvas, &placements)?;
        for (&i, (dx, dy)) in placed_meta.iter().zip(offsets) {
            metas[i].offset = Some([dx, dy]);
        }

        let classes = canvas.label_map().histogram().into_keys().map(|id| taxonomy.name(id)).collect();
        let mut meta = CanvasMeta {
            format: CANVAS_FORMAT.into(),
            canvas_id: String::new(),
            width: dims.0,
            height: dims.1,
            config: config.clone(),
            words,
            tags: tags.iter().map(|&t| taxonomy.name(t)).collect(),
            retrieved: hits,
            background_id,
            instances: metas,
            classes,
            warnings,
        };
        meta.canvas_id = canvas_id(&canvas, &meta)?;
        Ok(Composition { canvas, meta })
    }
}

/// Content hash of labels, provenance and metadata.
fn canvas_id(canvas: &Canvas, meta: &CanvasMeta) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(canvas.width.to_le_bytes());
    hasher.update(canvas.height.to_le_bytes());
    hasher.update(&canvas.labels);
    hasher.update(serde_json::to_vec(&canvas.provenance_runs()).map_err(|e| Error::json("provenance", e))?);
    hasher.update(serde_json::to_vec(meta).map_err(|e| Error::json("canvas meta", e))?);
    Ok(hex::encode(&hasher.finalize()[..8]))
}

#[derive(Serialize)]
struct MetaFile<'a> {
    #[serde(flatten)]
    meta: &'a CanvasMeta,
    legend: Vec<LegendRow>,
}

pub const CANVAS_FILES: [&str; 4] = ["labels.png", "color.png", "provenance.json", "meta.json"];

/// Writes `labels.png`, `color.png`, `provenance.json` and `meta.json`.
pub fn write_canvas(dir: &Path, composition: &Composition, taxonomy: &LabelTaxonomy, palette: &Palette) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let map = composition.canvas.label_map();
    map.save_png(&dir.join("labels.png"))?;
    let (img, legend) = colorize(&map, palette, taxonomy)?;
    save_rgb(&img, &dir.join("color.png"))?;
    let prov = serde_json::to_string(&composition.canvas.provenance_runs()).map_err(|e| Error::json("provenance", e))?;
    let path = dir.join("provenance.json");
    fs::write(&path, prov + "\n").map_err(|e| Error::io(&path, e))?;
    let meta = serde_json::to_string_pretty(&MetaFile { meta: &composition.meta, legend })
        .map_err(|e| Error::json("canvas meta", e))?;
    let path = dir.join("meta.json");
    fs::write(&path, meta + "\n").map_err(|e| Error::io(&path, e))
}
