//! Seeded synthetic corpus: banded stuff layouts with thing shapes, narratives
//! built phrase by phrase, and one trace stroke per phrase inside the region
//! the phrase describes. Gold per-word tags and class sets come for free.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Example, LabelEntry, LabelId, LabelKind, LabelMap, LabelTaxonomy, TimedWord, TracePoint};
use crate::error::{Error, Result};

pub const TRAIN_MANIFEST: &str = "train.jsonl";
pub const HELDOUT_MANIFEST: &str = "heldout.jsonl";
pub const GOLD_FILE: &str = "gold.jsonl";

const WORD_MS: u64 = 250;
const WORD_STEP_MS: u64 = 300;
const CHUNK_GAP_MS: u64 = 450;
const PHRASE_GAP_MS: u64 = 600;
const POINT_STEP_MS: u64 = 50;
const MAX_DRAWS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub heldout: usize,
    pub seed: u64,
    pub size: u32,
    pub preset: Preset,
    /// Share of skiers drawn with skis under their feet.
    pub ski_rate: f64,
    /// Share of examples whose thing masks sit away from their stroke's
    /// typical position and scale.
    pub distractor_rate: f64,
    /// Share of trace chunks drawn over another phrase's region.
    pub drift_rate: f64,
    /// Most words spoken per stroke chunk.
    pub chunk_words: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n: 500, heldout: 100, seed: 0, size: 64, preset: Preset::Mixed, ski_rate: 0.5, distractor_rate: 0.1, drift_rate: 0.3, chunk_words: 2 }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Ground {
    Snow,
    Grass,
    Road,
    Sand,
    Water,
}

impl Ground {
    fn class(self) -> &'static str {
        match self {
            Ground::Snow => "snow",
            Ground::Grass => "grass",
            Ground::Road => "road",
            Ground::Sand => "sand",
            Ground::Water => "water",
        }
    }

    /// Each thing shows up on two or three grounds so that thing and ground
    /// labels are not confounded in the label bags.
    fn things(self) -> &'static [&'static str] {
        match self {
            Ground::Snow => &["person", "dog", "horse", "car"],
            Ground::Grass => &["dog", "cat", "horse", "kite", "bench"],
            Ground::Road => &["person", "cat", "car", "bench", "umbrella"],
            Ground::Sand => &["person", "horse", "kite", "umbrella", "boat"],
            Ground::Water => &["boat", "kite", "dog"],
        }
    }
}

const THINGS: [&str; 10] = ["person", "dog", "cat", "horse", "car", "skis", "kite", "bench", "umbrella", "boat"];
const STUFF: [&str; 9] = ["sky", "snow", "grass", "road", "sand", "water", "tree", "mountain", "wall"];

/// Things first, then stuff, then the excluded catch-all `other`.
pub fn synth_taxonomy() -> LabelTaxonomy {
    let mut entries = Vec::new();
    for name in THINGS {
        entries.push((name, LabelKind::Thing, false));
    }
    for name in STUFF {
        entries.push((name, LabelKind::Stuff, false));
    }
    entries.push(("other", LabelKind::Stuff, true));
    LabelTaxonomy::new(
        entries
            .into_iter()
            .enumerate()
            .map(|(i, (name, kind, excluded))| LabelEntry { id: LabelId(i as u8), name: name.into(), kind, excluded })
            .collect(),
    )
    .expect("static taxonomy is valid")
}

type Words = &'static [&'static str];

/// Class-specific nouns, attributes and trailing details; function words
/// come from the link tables.
fn lexicon(class: &str) -> (Words, Words, Words) {
    match class {
        "person" => (&["person", "man", "woman"], &["young", "tall", "smiling"], &["wearing jacket", "wearing cap"]),
        "dog" => (&["dog", "puppy"], &["brown", "furry", "barking"], &["with floppy ears", "wagging tail"]),
        "cat" => (&["cat", "kitten"], &["grey", "striped", "sleepy"], &["with whiskers", "licking paws"]),
        "horse" => (&["horse", "pony"], &["chestnut", "galloping", "saddled"], &["with flowing mane", "with hooves"]),
        "car" => (&["car", "sedan"], &["red", "parked", "shiny"], &["with headlights", "with tyres"]),
        "skis" => (&["skis"], &["long", "narrow", "waxed"], &["with bindings"]),
        "kite" => (&["kite"], &["flying", "colorful", "diamond"], &["with string", "with ribbons"]),
        "bench" => (&["bench"], &["wooden", "empty", "slatted"], &["with armrests", "with backrest"]),
        "umbrella" => (&["umbrella", "parasol"], &["open", "striped", "big"], &["with canopy", "with pole"]),
        "boat" => (&["boat", "sailboat"], &["sailing", "fishing", "white"], &["with sails", "with oars"]),
        "sky" => (&["sky"], &["blue", "cloudy", "clear"], &["with clouds", "with sunshine"]),
        "snow" => (&["snow"], &["fresh", "deep", "powdery"], &["with ski tracks", "with snowdrifts"]),
        "grass" => (&["grass", "lawn"], &["green", "lush", "mowed"], &["with weeds", "with clover"]),
        "road" => (&["road", "street"], &["paved", "wide", "asphalt"], &["with lane markings", "with potholes"]),
        "sand" => (&["sand", "beach"], &["golden", "dry", "sunny"], &["with footprints", "with seashells"]),
        "water" => (&["water", "lake"], &["calm", "rippling", "shallow"], &["with waves", "with reflections"]),
        "tree" => (&["trees", "forest"], &["leafy", "dense", "pine"], &["with branches", "with foliage"]),
        "mountain" => (&["mountains", "hills"], &["rocky", "distant", "snowy"], &["with peaks", "with cliffs"]),
        "wall" => (&["wall", "building"], &["brick", "painted", "concrete"], &["with graffiti", "with windows"]),
        _ => (&["thing"], &[], &[]),
    }
}

const OPENERS: [&str; 5] = ["this picture shows", "in this image we can see", "we can see", "here is", "there is"];
const THING_LINKS: [&str; 3] = ["and", "beside", "near"];
const GROUND_LINKS: [&str; 3] = ["on", "in", "over"];
const TOP_LINKS: [&str; 3] = ["under", "below", "and"];
const SKIING: [&str; 2] = ["skiing on the", "skiing in the"];
const PERSON_EXTRAS: [&str; 2] = ["he wore a helmet on his head", "she wore a helmet on her head"];
const SKI_PHRASES: [&str; 3] = ["ski pads", "long skis", "narrow skis"];
const SKI_LINKS: [&str; 3] = ["and he wore", "and she wore", "with"];

/// Scene families the generator draws from.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Snow, grass, road, sand and water scenes in equal measure.
    #[default]
    Mixed,
    /// Mixed scenes with extra snow scenes, most of them with skiers.
    Winter,
}

#[derive(Clone, Debug)]
struct Phrase {
    words: Vec<String>,
    class: LabelId,
    /// Where the stroke goes, in pixels.
    region: Region,
}

#[derive(Copy, Clone, Debug)]
enum Region {
    /// Loop around the center of a shape's box.
    Loop { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Zigzag over a band.
    Band { x0: f64, x1: f64, y0: f64, y1: f64 },
}

/// Gold annotation for one generated example.
#[derive(Clone, Debug, PartialEq)]
pub struct Gold {
    pub tags: Vec<LabelId>,
    pub classes: BTreeSet<LabelId>,
}

#[derive(Serialize, Deserialize)]
struct GoldRecord {
    id: String,
    tags: Vec<String>,
    classes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub train: Corpus,
    pub heldout: Corpus,
    pub gold: BTreeMap<String, Gold>,
}

struct Painter<'a> {
    map: LabelMap,
    taxonomy: &'a LabelTaxonomy,
}

impl Painter<'_> {
    fn id(&self, name: &str) -> LabelId {
        self.taxonomy.id_of(name).expect("synthetic class")
    }

    fn rect(&mut self, b: &BoxF, label: LabelId) {
        let (w, h) = (self.map.width() as i64, self.map.height() as i64);
        let (x0, y0, x1, y1) = (b.x0.round() as i64, b.y0.round() as i64, b.x1.round() as i64, b.y1.round() as i64);
        for y in y0.max(0)..y1.min(h) {
            for x in x0.max(0)..x1.min(w) {
                self.map.set(x as u32, y as u32, Some(label));
            }
        }
    }

    /// Fills pixels whose center satisfies `|dx|^p + |dy|^p <= 1` in box
    /// coordinates: p = 1 a diamond, p = 2 an ellipse.
    fn blob(&mut self, b: &BoxF, p: i32, label: LabelId) {
        let (cx, cy, rx, ry) = ((b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0, (b.x1 - b.x0) / 2.0, (b.y1 - b.y0) / 2.0);
        let (w, h) = (self.map.width(), self.map.height());
        for y in 0..h {
            for x in 0..w {
                let dx = ((x as f64 + 0.5 - cx) / rx).abs();
                let dy = ((y as f64 + 0.5 - cy) / ry).abs();
                if dx.powi(p) + dy.powi(p) <= 1.0 {
                    self.map.set(x, y, Some(label));
                }
            }
        }
    }
}

#[derive(Copy, Clone, Debug)]
struct BoxF {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl BoxF {
    fn overlap(&self, o: &BoxF) -> f64 {
        let w = (self.x1.min(o.x1) - self.x0.max(o.x0)).max(0.0);
        let h = (self.y1.min(o.y1) - self.y0.max(o.y0)).max(0.0);
        w * h
    }

    fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn stroke(&self, shrink: f64) -> Region {
        Region::Loop {
            cx: (self.x0 + self.x1) / 2.0,
            cy: (self.y0 + self.y1) / 2.0,
            rx: (self.x1 - self.x0) / 2.0 * shrink,
            ry: (self.y1 - self.y0) / 2.0 * shrink,
        }
    }
}

struct Draft {
    map: LabelMap,
    phrases: Vec<Phrase>,
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty choice")
}

fn words_of(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// `link det attr attr [attr] noun [tail]`.
fn mention<R: Rng>(rng: &mut R, class: &str, link: &str, det: &str) -> Vec<String> {
    let (nouns, attrs, tails) = lexicon(class);
    let mut w = words_of(link);
    w.push(det.into());
    let n = rng.random_range(2..=3).min(attrs.len());
    w.extend(attrs.choose_multiple(rng, n).map(|a| a.to_string()));
    w.push(pick(rng, nouns).into());
    if !tails.is_empty() && rng.random_bool(0.5) {
        w.extend(words_of(pick(rng, tails)));
    }
    w
}

fn thing_size<R: Rng>(rng: &mut R, class: &str) -> (f64, f64) {
    match class {
        "person" => (rng.random_range(0.1..0.18), rng.random_range(0.25..0.4)),
        "car" | "boat" | "bench" => (rng.random_range(0.25..0.4), rng.random_range(0.12..0.2)),
        "horse" => (rng.random_range(0.25..0.35), rng.random_range(0.2..0.3)),
        "kite" => (rng.random_range(0.1..0.16), rng.random_range(0.1..0.16)),
        "umbrella" => (rng.random_range(0.2..0.3), rng.random_range(0.15..0.22)),
        _ => (rng.random_range(0.15..0.25), rng.random_range(0.1..0.16)),
    }
}

fn draft<R: Rng>(rng: &mut R, taxonomy: &LabelTaxonomy, size: u32, cfg: &SynthConfig) -> Draft {
    let s = size as f64;
    let mut p = Painter { map: LabelMap::filled(size, size, LabelId(0)).expect("positive size"), taxonomy };
    let winter = cfg.preset == Preset::Winter;
    let ground = if winter && rng.random_bool(0.2) {
        Ground::Snow
    } else {
        *[Ground::Snow, Ground::Grass, Ground::Road, Ground::Sand, Ground::Water].choose(rng).unwrap()
    };
    let top = pick(rng, &["sky", "wall", "tree", "mountain"]);
    let horizon = s * rng.random_range(0.3..0.5);
    let top_id = p.id(top);
    let ground_id = p.id(ground.class());
    p.rect(&BoxF { x0: 0.0, y0: 0.0, x1: s, y1: horizon }, top_id);
    p.rect(&BoxF { x0: 0.0, y0: horizon, x1: s, y1: s }, ground_id);
    if rng.random_bool(0.2) {
        let other = p.id("other");
        let x = rng.random_range(0.0..s * 0.8);
        let y = rng.random_range(horizon..s * 0.95);
        p.rect(&BoxF { x0: x, y0: y, x1: x + s * 0.08, y1: y + s * 0.05 + 1.0 }, other);
    }

    let distractor = rng.random_bool(cfg.distractor_rate);
    let mut wanted: Vec<&str> = ground.things().to_vec();
    wanted.shuffle(rng);
    if winter && ground == Ground::Snow {
        wanted.sort_by_key(|&c| c != "person");
    }
    wanted.truncate(rng.random_range(1..=2));
    let mut things: Vec<(&str, BoxF)> = Vec::new();
    for class in wanted {
        let (wf, hf) = thing_size(rng, class);
        let scale = if distractor { rng.random_range(0.5..1.6) } else { 1.0 };
        let (w, h) = ((wf * s * scale).min(s * 0.6), (hf * s * scale).min(s * 0.6));
        for _ in 0..20 {
            let cx = rng.random_range(w / 2.0..s - w / 2.0);
            let cy = if class == "kite" {
                rng.random_range(h / 2.0..(horizon - h / 2.0).max(h / 2.0 + 1.0))
            } else {
                // feet on the ground band
                rng.random_range((horizon + h * 0.3).min(s - 2.0)..s - 1.0) - h / 2.0
            };
            let b = BoxF { x0: cx - w / 2.0, y0: cy - h / 2.0, x1: cx + w / 2.0, y1: cy + h / 2.0 };
            if things.iter().all(|(_, o)| o.overlap(&b) < 0.1 * b.area().min(o.area())) {
                things.push((class, b));
                break;
            }
        }
    }

    let ground_band = Region::Band { x0: 0.05 * s, x1: 0.95 * s, y0: horizon, y1: s };
    let top_band = Region::Band { x0: 0.05 * s, x1: 0.95 * s, y0: 0.0, y1: horizon };
    let mut phrases = Vec::new();
    let mut opener = Some(pick(rng, &OPENERS));
    let mut ground_said = false;
    for &(class, b) in &things {
        let id = p.id(class);
        match class {
            "person" | "car" | "bench" | "boat" => p.rect(&b, id),
            "kite" => p.blob(&b, 1, id),
            _ => p.blob(&b, 2, id),
        }
        let link = opener.take().unwrap_or_else(|| pick(rng, &THING_LINKS));
        phrases.push(Phrase { words: mention(rng, class, link, "a"), class: id, region: b.stroke(0.6) });
        let skiing = class == "person" && ground == Ground::Snow && !ground_said && rng.random_bool(if winter { 0.9 } else { 0.5 });
        if !skiing {
            if winter && class == "person" && rng.random_bool(0.6) {
                phrases.push(Phrase { words: words_of(pick(rng, &PERSON_EXTRAS)), class: id, region: b.stroke(0.5) });
            }
            continue;
        }
        ground_said = true;
        let mut words = words_of(pick(rng, &SKIING));
        if rng.random_bool(0.5) {
            words.push(pick(rng, lexicon("snow").1).into());
            words.push(pick(rng, lexicon("snow").1).into());
        }
        words.push("snow".into());
        let mut rest = vec![Phrase { words, class: ground_id, region: ground_band }];
        if rng.random_bool(0.5) {
            rest.push(Phrase { words: words_of(pick(rng, &PERSON_EXTRAS)), class: id, region: b.stroke(0.5) });
        }
        if rng.random_bool(cfg.ski_rate) {
            let (cx, sw) = ((b.x0 + b.x1) / 2.0, (b.x1 - b.x0) * 1.8);
            let sb = BoxF { x0: cx - sw / 2.0, y0: b.y1 - 1.0, x1: cx + sw / 2.0, y1: (b.y1 + 3.0).min(s) };
            let sid = p.id("skis");
            p.rect(&sb, sid);
            rest.push(Phrase { words: words_of(pick(rng, &SKI_LINKS)), class: id, region: b.stroke(0.5) });
            rest.push(Phrase { words: words_of(pick(rng, &SKI_PHRASES)), class: sid, region: sb.stroke(0.7) });
        }
        phrases.extend(rest);
    }

    let mut stuff = Vec::new();
    if !ground_said && (phrases.is_empty() || rng.random_bool(0.9)) {
        let link = opener.take().unwrap_or_else(|| pick(rng, &GROUND_LINKS));
        stuff.push(Phrase { words: mention(rng, ground.class(), link, "the"), class: ground_id, region: ground_band });
    }
    if rng.random_bool(0.8) {
        let link = opener.take().unwrap_or_else(|| pick(rng, &TOP_LINKS));
        stuff.push(Phrase { words: mention(rng, top, link, "the"), class: top_id, region: top_band });
    }
    phrases.extend(stuff);
    Draft { map: p.map, phrases }
}

/// Speech comes in chunks of one to three words, each with its own stroke
/// and a pause long enough to split the trace.
fn chunks<R: Rng>(rng: &mut R, n: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = n;
    while left > 0 {
        let c = rng.random_range(1..=max.max(1)).min(left);
        out.push(c);
        left -= c;
    }
    out
}

fn stroke<R: Rng>(rng: &mut R, region: Region, start: u64, end: u64, size: f64, trace: &mut Vec<TracePoint>) {
    let n = ((end - start) / POINT_STEP_MS + 1) as usize;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    for i in 0..n {
        let f = i as f64 / (n.max(2) - 1) as f64;
        let (x, y) = match region {
            Region::Loop { cx, cy, rx, ry } => {
                let a = phase + f * 1.3 * std::f64::consts::TAU;
                let j = rng.random_range(0.85..1.1);
                (cx + rx * j * a.cos(), cy + ry * j * a.sin())
            }
            Region::Band { x0, x1, y0, y1 } => {
                let (mid, half) = ((y0 + y1) / 2.0, (y1 - y0) * 0.3);
                let span = rng.random_range(0.3..0.7);
                let left = x0 + (x1 - x0) * (1.0 - span) * phase / std::f64::consts::TAU;
                let zig = (f * 4.0 * std::f64::consts::PI).sin();
                (left + (x1 - x0) * span * f, mid + half * zig * rng.random_range(0.8..1.0))
            }
        };
        let q = |v: f64| ((v / size).clamp(0.0, 1.0) * 1e4).round() / 1e4;
        trace.push(TracePoint::new(q(x), q(y), start + (i as u64 * POINT_STEP_MS).min(end - start)));
    }
}

/// Lays phrases out in time and draws one stroke per chunk.
fn realize<R: Rng>(rng: &mut R, id: String, d: Draft, cfg: &SynthConfig) -> (Example, Gold) {
    let size = d.map.width() as f64;
    let mut narrative = Vec::new();
    let mut trace = Vec::new();
    let mut tags = Vec::new();
    let mut t = 0u64;
    for (pi, ph) in d.phrases.iter().enumerate() {
        let mut words = ph.words.iter();
        for c in chunks(rng, ph.words.len(), cfg.chunk_words) {
            let start = t;
            for w in words.by_ref().take(c) {
                narrative.push(TimedWord::new(w.clone(), t, t + WORD_MS));
                tags.push(ph.class);
                t += WORD_STEP_MS;
            }
            let end = t - WORD_STEP_MS + WORD_MS;
            let region = if d.phrases.len() > 1 && rng.random_bool(cfg.drift_rate) {
                let other = (pi + rng.random_range(1..d.phrases.len())) % d.phrases.len();
                d.phrases[other].region
            } else {
                ph.region
            };
            stroke(rng, region, start, end, size, &mut trace);
            t = end + CHUNK_GAP_MS;
        }
        t += PHRASE_GAP_MS - CHUNK_GAP_MS;
    }
    let classes = tags.iter().copied().collect();
    let (w, h) = (d.map.width(), d.map.height());
    let example = Example { id, width: w, height: h, narrative, trace, label_map: d.map };
    (example, Gold { tags, classes })
}

fn bag_key(e: &Example) -> String {
    let mut w = e.words();
    w.sort();
    w.join(" ")
}

/// Generates `n` training and `heldout` evaluation examples with distinct
/// word bags.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.size < 8 {
        return Err(Error::Invalid("synthetic images need size >= 8".into()));
    }
    let taxonomy = synth_taxonomy();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen = HashSet::new();
    let mut gold = BTreeMap::new();
    let mut make = |prefix: &str, count: usize, rng: &mut ChaCha8Rng| -> Result<Vec<Example>> {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let id = format!("{prefix}{i:05}");
            let mut attempt = 0;
            loop {
                let d = draft(rng, &taxonomy, cfg.size, cfg);
                let (e, g) = realize(rng, id.clone(), d, cfg);
                attempt += 1;
                if seen.insert(bag_key(&e)) || attempt >= MAX_DRAWS {
                    gold.insert(e.id.clone(), g);
                    out.push(e);
                    break;
                }
            }
        }
        Ok(out)
    };
    let train = make("s", cfg.n, &mut rng)?;
    let heldout = make("h", cfg.heldout, &mut rng)?;
    Ok(SynthCorpus {
        train: Corpus::new(taxonomy.clone(), train)?,
        heldout: Corpus::new(taxonomy, heldout)?,
        gold,
    })
}

impl SynthCorpus {
    /// Writes `taxonomy.json`, `labels/`, `train.jsonl`, `heldout.jsonl`
    /// and `gold.jsonl` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let manifest = self.train.save_as(dir, TRAIN_MANIFEST)?;
        self.heldout.save_as(dir, HELDOUT_MANIFEST)?;
        let tax = &self.train.taxonomy;
        let path = dir.join(GOLD_FILE);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for (id, g) in &self.gold {
            let rec = GoldRecord {
                id: id.clone(),
                tags: g.tags.iter().map(|&t| tax.name(t)).collect(),
                classes: g.classes.iter().map(|&c| tax.name(c)).collect(),
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::json("gold", e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        Ok(manifest)
    }
}

pub fn load_gold(path: &Path, taxonomy: &LabelTaxonomy) -> Result<BTreeMap<String, Gold>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: GoldRecord =
            serde_json::from_str(line).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?;
        let ids = |names: &[String]| names.iter().map(|n| taxonomy.require(n)).collect::<Result<Vec<_>>>();
        out.insert(rec.id, Gold { tags: ids(&rec.tags)?, classes: ids(&rec.classes)?.into_iter().collect() });
    }
    Ok(out)
}
