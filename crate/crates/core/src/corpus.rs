//! Narrative, trace and label-map corpus: taxonomy, manifest loading with
//! per-record validation, and time-based phrase segmentation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel value used for unlabeled pixels in label-map PNGs.
pub const UNLABELED: u8 = 255;

/// Default temporal gap that splits a trace into phrase slices.
pub const DEFAULT_GAP_MS: u64 = 300;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(pub u8);

impl std::fmt::Display for LabelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Thing,
    Stuff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub id: LabelId,
    pub name: String,
    pub kind: LabelKind,
    #[serde(default)]
    pub excluded: bool,
}

/// Dense label set with a thing/stuff kind per label.
///
/// Excluded labels stay addressable (label maps and raw assignments may use
/// them) but are never produced by the decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LabelEntry>", into = "Vec<LabelEntry>")]
pub struct LabelTaxonomy {
    entries: Vec<LabelEntry>,
    by_name: HashMap<String, LabelId>,
}

impl TryFrom<Vec<LabelEntry>> for LabelTaxonomy {
    type Error = Error;

    fn try_from(entries: Vec<LabelEntry>) -> Result<Self> {
        LabelTaxonomy::new(entries)
    }
}

impl From<LabelTaxonomy> for Vec<LabelEntry> {
    fn from(t: LabelTaxonomy) -> Self {
        t.entries
    }
}

impl LabelTaxonomy {
    pub fn new(mut entries: Vec<LabelEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.id);
        if entries.len() >= UNLABELED as usize {
            return Err(Error::InvalidTaxonomy(format!(
                "{} labels; at most {} supported",
                entries.len(),
                UNLABELED
            )));
        }
        let mut by_name = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.id.0 as usize != i {
                return Err(Error::InvalidTaxonomy(format!(
                    "ids must be unique and dense from 0; found id {} at position {i}",
                    e.id
                )));
            }
            if e.name.is_empty() {
                return Err(Error::InvalidTaxonomy(format!("label {} has an empty name", e.id)));
            }
            if by_name.insert(e.name.clone(), e.id).is_some() {
                return Err(Error::InvalidTaxonomy(format!("duplicate name `{}`", e.name)));
            }
        }
        Ok(LabelTaxonomy { entries, by_name })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("taxonomy", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LabelEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn get(&self, id: LabelId) -> Option<&LabelEntry> {
        self.entries.get(id.0 as usize)
    }

    pub fn contains(&self, id: LabelId) -> bool {
        (id.0 as usize) < self.entries.len()
    }

    pub fn id_of(&self, name: &str) -> Option<LabelId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<LabelId> {
        self.id_of(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// Name of `id`, or `"#<id>"` for ids outside the taxonomy.
    pub fn name(&self, id: LabelId) -> String {
        self.get(id).map_or_else(|| format!("#{id}"), |e| e.name.clone())
    }

    pub fn kind(&self, id: LabelId) -> Option<LabelKind> {
        self.get(id).map(|e| e.kind)
    }

    pub fn is_thing(&self, id: LabelId) -> bool {
        self.kind(id) == Some(LabelKind::Thing)
    }

    pub fn is_stuff(&self, id: LabelId) -> bool {
        self.kind(id) == Some(LabelKind::Stuff)
    }

    pub fn is_excluded(&self, id: LabelId) -> bool {
        self.get(id).is_some_and(|e| e.excluded)
    }

    pub fn excluded(&self) -> BTreeSet<LabelId> {
        self.entries.iter().filter(|e| e.excluded).map(|e| e.id).collect()
    }
}

/// Row-major H×W grid of label ids; `UNLABELED` marks unlabeled pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch("label map dimensions must be > 0".into()));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} label map",
                data.len()
            )));
        }
        Ok(LabelMap { width, height, data })
    }

    pub fn filled(width: u32, height: u32, label: LabelId) -> Result<Self> {
        Self::new(width, height, vec![label.0; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn raw(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> Option<LabelId> {
        let v = self.data[(y * self.width + x) as usize];
        (v != UNLABELED).then_some(LabelId(v))
    }

    pub fn set(&mut self, x: u32, y: u32, label: Option<LabelId>) {
        self.data[(y * self.width + x) as usize] = label.map_or(UNLABELED, |l| l.0);
    }

    /// Pixel counts per label, unlabeled pixels excluded.
    pub fn histogram(&self) -> BTreeMap<LabelId, u64> {
        let mut counts = [0u64; 256];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
            .iter()
            .enumerate()
            .filter(|&(v, &c)| c > 0 && v != UNLABELED as usize)
            .map(|(v, &c)| (LabelId(v as u8), c))
            .collect()
    }

    pub fn labels_present(&self) -> BTreeSet<LabelId> {
        self.histogram().into_keys().collect()
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "missing file"),
            ));
        }
        let img = image::open(path)
            .map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?
            .into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    /// Nearest-neighbor resampling by pixel center.
    pub fn resample(&self, width: u32, height: u32) -> Result<Self> {
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("cannot resample to {width}x{height}")));
        }
        let xs: Vec<u32> = (0..width).map(|i| crate::geometry::source_index(i, width, self.width)).collect();
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for j in 0..height {
            let row = crate::geometry::source_index(j, height, self.height) as usize * self.width as usize;
            data.extend(xs.iter().map(|&x| self.data[row + x as usize]));
        }
        LabelMap::new(width, height, data)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width, self.height, self.data.clone())
            .expect("dimensions checked at construction");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image { path: path.to_path_buf(), source: e })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedWord {
    #[serde(rename = "word")]
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start_ms: u64, end_ms: u64) -> Self {
        TimedWord { text: text.into(), start_ms, end_ms }
    }

    fn midpoint(&self) -> f64 {
        (self.start_ms as f64 + self.end_ms as f64) / 2.0
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub x: f64,
    pub y: f64,
    pub t_ms: u64,
}

impl TracePoint {
    pub fn new(x: f64, y: f64, t_ms: u64) -> Self {
        TracePoint { x, y, t_ms }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub narrative: Vec<TimedWord>,
    pub trace: Vec<TracePoint>,
    pub label_map: LabelMap,
}

impl Example {
    pub fn words(&self) -> Vec<String> {
        self.narrative.iter().map(|w| w.text.clone()).collect()
    }

    pub fn text(&self) -> String {
        joined_text(&self.narrative)
    }
}

pub fn joined_text(narrative: &[TimedWord]) -> String {
    narrative.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Narrative and trace without a label map: the input to composition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub narrative: Vec<TimedWord>,
    #[serde(default)]
    pub trace: Vec<TracePoint>,
    /// Query vector for indexes built from external embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl Scene {
    /// Normalizes the words and validates both streams; the narrative must
    /// keep at least one word.
    pub fn new(narrative: Vec<TimedWord>, trace: Vec<TracePoint>, embedding: Option<Vec<f64>>) -> Result<Self> {
        let narrative = normalize_narrative(narrative);
        validate_narrative(&narrative, true)?;
        validate_trace(&trace)?;
        Ok(Scene { narrative, trace, embedding })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scene: Scene = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Scene::new(scene.narrative, scene.trace, scene.embedding)
    }
}

impl From<&Example> for Scene {
    fn from(e: &Example) -> Self {
        Scene { narrative: e.narrative.clone(), trace: e.trace.clone(), embedding: None }
    }
}

/// One manifest line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub label_map: PathBuf,
    pub width: u32,
    pub height: u32,
    pub narrative: Vec<TimedWord>,
    pub trace: Vec<TracePoint>,
}

/// Lowercases, strips terminal punctuation; `None` when nothing is left.
pub fn normalize_word(raw: &str) -> Option<String> {
    let w = raw.trim().to_lowercase();
    let w = w.trim_end_matches(|c: char| c.is_ascii_punctuation());
    (!w.is_empty()).then(|| w.to_string())
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_word).collect()
}

/// Normalizes every word, dropping the ones that normalize to nothing.
pub fn normalize_narrative(words: Vec<TimedWord>) -> Vec<TimedWord> {
    words
        .into_iter()
        .filter_map(|w| normalize_word(&w.text).map(|text| TimedWord { text, ..w }))
        .collect()
}

pub fn validate_narrative(words: &[TimedWord], require_non_empty: bool) -> Result<()> {
    if require_non_empty && words.is_empty() {
        return Err(Error::InvalidRecord("empty narrative".into()));
    }
    let mut prev_start = 0;
    for (i, w) in words.iter().enumerate() {
        if w.start_ms > w.end_ms {
            return Err(Error::InvalidRecord(format!(
                "non-monotone timestamps: word {i} starts after it ends"
            )));
        }
        if w.start_ms < prev_start {
            return Err(Error::InvalidRecord(format!(
                "non-monotone timestamps: word {i} starts before word {}",
                i - 1
            )));
        }
        prev_start = w.start_ms;
    }
    Ok(())
}

pub fn validate_trace(points: &[TracePoint]) -> Result<()> {
    let mut prev = 0;
    for (i, p) in points.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
            return Err(Error::InvalidRecord(format!(
                "coordinate out of range at trace point {i}: ({}, {})",
                p.x, p.y
            )));
        }
        if p.t_ms < prev {
            return Err(Error::InvalidRecord(format!(
                "non-monotone timestamps at trace point {i}"
            )));
        }
        prev = p.t_ms;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub taxonomy: LabelTaxonomy,
    examples: Vec<Example>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(taxonomy: LabelTaxonomy, examples: Vec<Example>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(examples.len());
        for (i, e) in examples.iter().enumerate() {
            validate_example(e, &taxonomy)?;
            if by_id.insert(e.id.clone(), i).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate id `{}`", e.id)));
            }
        }
        Ok(Corpus { taxonomy, examples, by_id })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.by_id.get(id).map(|&i| &self.examples[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    /// Writes `manifest.jsonl`, `taxonomy.json` and `labels/<id>.png` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        self.save_as(dir, "manifest.jsonl")
    }

    pub fn save_as(&self, dir: &Path, manifest_name: &str) -> Result<PathBuf> {
        let labels_dir = dir.join("labels");
        fs::create_dir_all(&labels_dir).map_err(|e| Error::io(&labels_dir, e))?;
        self.taxonomy.save(&dir.join("taxonomy.json"))?;
        let manifest = dir.join(manifest_name);
        let file = fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let mut out = BufWriter::new(file);
        for e in &self.examples {
            let rel = PathBuf::from("labels").join(format!("{}.png", file_stem(&e.id)));
            e.label_map.save_png(&dir.join(&rel))?;
            let record = ManifestRecord {
                id: e.id.clone(),
                label_map: rel,
                width: e.width,
                height: e.height,
                narrative: e.narrative.clone(),
                trace: e.trace.clone(),
            };
            let line = serde_json::to_string(&record).map_err(|e| Error::json("manifest", e))?;
            writeln!(out, "{line}").map_err(|e| Error::io(&manifest, e))?;
        }
        out.flush().map_err(|e| Error::io(&manifest, e))?;
        Ok(manifest)
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn validate_example(e: &Example, taxonomy: &LabelTaxonomy) -> Result<()> {
    if e.id.is_empty() {
        return Err(Error::InvalidRecord("empty id".into()));
    }
    validate_narrative(&e.narrative, true)?;
    validate_trace(&e.trace)?;
    if e.label_map.width() != e.width || e.label_map.height() != e.height {
        return Err(Error::DimensionMismatch(format!(
            "label map is {}x{}, record declares {}x{}",
            e.label_map.width(),
            e.label_map.height(),
            e.width,
            e.height
        )));
    }
    if let Some(bad) = e
        .label_map
        .raw()
        .iter()
        .find(|&&v| v != UNLABELED && !taxonomy.contains(LabelId(v)))
    {
        return Err(Error::InvalidRecord(format!("label id {bad} not in taxonomy")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RecordError {
    /// 1-based manifest line.
    pub line: usize,
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub errors: Vec<RecordError>,
}

/// Loads a JSON-lines manifest. Label-map paths resolve relative to the
/// manifest's directory. Invalid records are skipped and reported.
pub fn load_corpus(manifest: &Path, taxonomy: LabelTaxonomy) -> Result<LoadReport> {
    let file = fs::File::open(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut examples = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(manifest, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut id = None;
        let result = serde_json::from_str::<ManifestRecord>(&line)
            .map_err(|e| Error::InvalidRecord(format!("malformed record: {e}")))
            .and_then(|rec| {
                id = Some(rec.id.clone());
                if !seen.insert(rec.id.clone()) {
                    return Err(Error::InvalidRecord(format!("duplicate id `{}`", rec.id)));
                }
                record_to_example(rec, base, &taxonomy)
            });
        match result {
            Ok(e) => examples.push(e),
            Err(err) => errors.push(RecordError { line: i + 1, id, message: err.to_string() }),
        }
    }
    let corpus = Corpus::new(taxonomy, examples)?;
    Ok(LoadReport { corpus, errors })
}

/// Loads a manifest with `taxonomy.json` from the same directory and fails on
/// the first invalid record.
pub fn load_corpus_strict(manifest: &Path, taxonomy: Option<&Path>) -> Result<Corpus> {
    let default_tax = manifest.parent().unwrap_or(Path::new(".")).join("taxonomy.json");
    let taxonomy = LabelTaxonomy::load(taxonomy.unwrap_or(&default_tax))?;
    let report = load_corpus(manifest, taxonomy)?;
    if let Some(e) = report.errors.first() {
        return Err(Error::InvalidRecord(format!(
            "{}:{}: {}",
            manifest.display(),
            e.line,
            e.message
        )));
    }
    Ok(report.corpus)
}

fn record_to_example(rec: ManifestRecord, base: &Path, taxonomy: &LabelTaxonomy) -> Result<Example> {
    let narrative = normalize_narrative(rec.narrative);
    validate_narrative(&narrative, true)?;
    validate_trace(&rec.trace)?;
    let path = if rec.label_map.is_absolute() { rec.label_map } else { base.join(rec.label_map) };
    let label_map = LabelMap::load_png(&path)?;
    let example = Example {
        id: rec.id,
        width: rec.width,
        height: rec.height,
        narrative,
        trace: rec.trace,
        label_map,
    };
    validate_example(&example, taxonomy)?;
    Ok(example)
}

/// A run of words bound to one contiguous slice of the trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhraseSegment {
    pub words: Range<usize>,
    pub trace: Range<usize>,
}

impl PhraseSegment {
    /// Inclusive `[first, last]` word indices.
    pub fn token_span(&self) -> [usize; 2] {
        [self.words.start, self.words.end - 1]
    }
}

/// Splits the trace at temporal gaps longer than `gap_ms` and binds each word
/// to the slice whose time window contains its midpoint (nearest window
/// otherwise, earlier window on ties). Slices that receive no words are
/// dropped. An empty trace yields one segment spanning every word.
pub fn segment_phrases(narrative: &[TimedWord], trace: &[TracePoint], gap_ms: u64) -> Vec<PhraseSegment> {
    if narrative.is_empty() {
        return Vec::new();
    }
    if trace.is_empty() {
        return vec![PhraseSegment { words: 0..narrative.len(), trace: 0..0 }];
    }
    let mut slices = Vec::new();
    let mut start = 0;
    for i in 1..trace.len() {
        if trace[i].t_ms.saturating_sub(trace[i - 1].t_ms) > gap_ms {
            slices.push(start..i);
            start = i;
        }
    }
    slices.push(start..trace.len());

    let windows: Vec<(f64, f64)> = slices
        .iter()
        .map(|s| (trace[s.start].t_ms as f64, trace[s.end - 1].t_ms as f64))
        .collect();
    let mut owner = Vec::with_capacity(narrative.len());
    let mut floor = 0;
    for w in narrative {
        let m = w.midpoint();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &(a, b)) in windows.iter().enumerate() {
            let d = if m < a { a - m } else if m > b { m - b } else { 0.0 };
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        // words are time-ordered, so slice ownership never moves backwards
        floor = floor.max(best);
        owner.push(floor);
    }

    let mut segments: Vec<PhraseSegment> = Vec::new();
    for (i, &s) in owner.iter().enumerate() {
        match segments.last_mut() {
            Some(seg) if seg.trace == slices[s] => seg.words.end = i + 1,
            _ => segments.push(PhraseSegment { words: i..i + 1, trace: slices[s].clone() }),
        }
    }
    segments
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub examples: usize,
    pub mean_narrative_length: f64,
    /// Labeled pixels per class name.
    pub class_pixels: BTreeMap<String, u64>,
    /// Number of examples whose label map contains the class.
    pub class_images: BTreeMap<String, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut class_pixels = BTreeMap::new();
    let mut class_images = BTreeMap::new();
    let mut words = 0usize;
    for e in corpus.iter() {
        words += e.narrative.len();
        for (label, count) in e.label_map.histogram() {
            let name = corpus.taxonomy.name(label);
            *class_pixels.entry(name.clone()).or_insert(0) += count;
            *class_images.entry(name).or_insert(0) += 1;
        }
    }
    let mean = if corpus.is_empty() { 0.0 } else { words as f64 / corpus.len() as f64 };
    CorpusStats {
        examples: corpus.len(),
        mean_narrative_length: mean,
        class_pixels,
        class_images,
    }
}
