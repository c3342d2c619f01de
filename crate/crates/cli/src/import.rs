//! Conversion of public Localized Narratives JSON lines into a manifest.
//!
//! Each input line carries `image_id`, `annotator_id`, `timed_caption`
//! (utterances with start and end times in seconds) and `traces` (strokes of
//! `{x, y, t}` points, `t` in seconds). Label maps are looked up as
//! `{label_dir}/{image_id}.png`.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use scenecomp_core::corpus::{tokenize, LabelMap, ManifestRecord, TimedWord, TracePoint};
use serde::Deserialize;

#[derive(Deserialize)]
struct LnRecord {
    image_id: String,
    #[serde(default)]
    annotator_id: Option<serde_json::Value>,
    timed_caption: Vec<LnUtterance>,
    traces: Vec<Vec<LnPoint>>,
}

#[derive(Deserialize)]
struct LnUtterance {
    utterance: String,
    start_time: f64,
    end_time: f64,
}

#[derive(Deserialize)]
struct LnPoint {
    x: f64,
    y: f64,
    t: f64,
}

#[derive(Debug, Default, serde::Serialize)]
pub struct ImportReport {
    pub written: usize,
    pub skipped: Vec<String>,
}

fn ms(seconds: f64) -> u64 {
    (seconds.max(0.0) * 1000.0).round() as u64
}

/// Utterances holding several tokens share their interval evenly.
fn narrative(utterances: &[LnUtterance]) -> Vec<TimedWord> {
    let mut out = Vec::new();
    for u in utterances {
        let tokens = tokenize(&u.utterance);
        let (a, b) = (ms(u.start_time), ms(u.end_time).max(ms(u.start_time)));
        let n = tokens.len() as u64;
        for (i, t) in tokens.into_iter().enumerate() {
            let i = i as u64;
            out.push(TimedWord::new(t, a + (b - a) * i / n, a + (b - a) * (i + 1) / n));
        }
    }
    out
}

/// Strokes concatenated in time order; coordinates slightly outside the
/// image are clamped onto it.
fn trace(strokes: &[Vec<LnPoint>]) -> Vec<TracePoint> {
    let mut pts: Vec<TracePoint> =
        strokes.iter().flatten().map(|p| TracePoint::new(p.x.clamp(0.0, 1.0), p.y.clamp(0.0, 1.0), ms(p.t))).collect();
    pts.sort_by_key(|p| p.t_ms);
    pts
}

pub fn import(input: &Path, label_dir: &Path, out: &Path) -> Result<ImportReport> {
    let reader = BufReader::new(fs::File::open(input).with_context(|| format!("opening {}", input.display()))?);
    let mut sink = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = ImportReport::default();
    let mut ids = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LnRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.skipped.push(format!("line {}: {e}", n + 1));
                continue;
            }
        };
        let png: PathBuf = label_dir.join(format!("{}.png", rec.image_id));
        let map = match LabelMap::load_png(&png) {
            Ok(m) => m,
            Err(e) => {
                report.skipped.push(format!("line {}: {e}", n + 1));
                continue;
            }
        };
        let mut id = rec.image_id.clone();
        if !ids.insert(id.clone()) {
            let annotator = rec.annotator_id.as_ref().map_or_else(|| (n + 1).to_string(), |a| a.to_string().trim_matches('"').to_string());
            id = format!("{}_{annotator}", rec.image_id);
            ids.insert(id.clone());
        }
        let words = narrative(&rec.timed_caption);
        if words.is_empty() {
            report.skipped.push(format!("line {}: empty narrative", n + 1));
            continue;
        }
        let label_map = fs::canonicalize(&png).unwrap_or(png);
        let record = ManifestRecord { id, label_map, width: map.width(), height: map.height(), narrative: words, trace: trace(&rec.traces) };
        writeln!(sink, "{}", serde_json::to_string(&record)?)?;
        report.written += 1;
    }
    Ok(report)
}
