//! Command-line entry points for every pipeline stage. JSON reports go to
//! stdout (or `--out`); `--format text` prints aligned tables instead.

pub mod import;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use scenecomp_core::align::{assign_corpus, train_alignment, AlignConfig, AlignmentModel, DEFAULT_EM_ITERATIONS};
use scenecomp_core::compose::{write_canvas, CanvasMeta, ComposeConfig, Pipeline};
use scenecomp_core::corpus::{
    corpus_stats, load_corpus_strict, tokenize, Corpus, LabelMap, LabelTaxonomy, ManifestRecord, Scene, DEFAULT_GAP_MS,
    UNLABELED,
};
use scenecomp_core::eval::{
    class_set_f1, detected_classes, k_sweep, recall_at_k, recall_table_text, sweep_query, sweep_table_text,
    tagging_accuracy, text_table, ClassSetReport,
};
use scenecomp_core::render::Palette;
use scenecomp_core::retrieval::{build_index, EncoderKind, Query, RetrievalIndex, DEFAULT_K, DEFAULT_MIN_PIXELS};
use scenecomp_core::synth::{generate, load_gold, Preset, SynthConfig};
use scenecomp_core::tagger::{build_hmm, export_autosupervision, load_autosupervision, tag_corpus, HmmConfig, HmmModel};
use serde::Serialize;

pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const HMM_FILE: &str = "hmm.json";
pub const INDEX_FILE: &str = "index.json";

#[derive(Parser, Debug)]
#[command(name = "scenecomp", version, about = "Compose segmentation canvases from grounded narratives")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Mixed,
    Winter,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Mixed => Preset::Mixed,
            PresetArg::Winter => Preset::Winter,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Manifest of JSON lines.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Taxonomy file; defaults to `taxonomy.json` beside the manifest.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        load_corpus_strict(&self.corpus, self.taxonomy.as_deref()).with_context(|| format!("loading {}", self.corpus.display()))
    }
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// HMM file from `build-hmm` or `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Index file from `index` or `train`.
    #[arg(long)]
    pub index: PathBuf,
    /// Palette JSON `{"id": [r, g, b]}`; defaults to the built-in palette.
    #[arg(long)]
    pub palette: Option<PathBuf>,
}

impl PipelineArgs {
    fn load(&self) -> Result<(Pipeline, Palette)> {
        let corpus = self.corpus.load()?;
        let hmm = HmmModel::load(&self.model).with_context(|| format!("loading {}", self.model.display()))?;
        let index = RetrievalIndex::load(&self.index).with_context(|| format!("loading {}", self.index.display()))?;
        let pipeline = Pipeline::new(corpus, hmm, index)?;
        let palette = match &self.palette {
            Some(p) => Palette::load(p, pipeline.taxonomy())?,
            None => Palette::default_for(pipeline.taxonomy()),
        };
        Ok((pipeline, palette))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ComposeArgs {
    /// Retrieved images per query.
    #[arg(long)]
    pub k: Option<usize>,
    /// Trace pause that separates phrases, in milliseconds.
    #[arg(long)]
    pub gap_ms: Option<u64>,
    /// Square canvas side; `--width`/`--height` override either side.
    #[arg(long)]
    pub canvas_size: Option<u32>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Smallest mask component, in source pixels, eligible for retrieval.
    #[arg(long)]
    pub min_pixels: Option<u64>,
    /// Label used when a background has no stuff at all.
    #[arg(long)]
    pub fallback_label: Option<String>,
}

impl ComposeArgs {
    pub fn config(&self) -> ComposeConfig {
        let d = ComposeConfig::default();
        ComposeConfig {
            gap_ms: self.gap_ms.unwrap_or(d.gap_ms),
            k: self.k.unwrap_or(d.k),
            width: self.width.or(self.canvas_size).unwrap_or(d.width),
            height: self.height.or(self.canvas_size).unwrap_or(d.height),
            min_pixels: self.min_pixels.unwrap_or(d.min_pixels),
            fallback_label: self.fallback_label.clone().unwrap_or(d.fallback_label),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct HmmArgs {
    #[arg(long, default_value_t = 10.0)]
    pub exponent: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub emission_floor: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub transition_floor: f64,
}

impl HmmArgs {
    fn config(&self) -> HmmConfig {
        HmmConfig { transition_exponent: self.exponent, emission_floor: self.emission_floor, transition_floor: self.transition_floor }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert Localized Narratives JSON lines into a manifest.
    Import {
        #[arg(long)]
        input: PathBuf,
        /// Directory of `{image_id}.png` label maps.
        #[arg(long)]
        label_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-word labels from the label map under each phrase's trace hull.
    Assign {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_GAP_MS)]
        gap_ms: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tf-idf weights, IBM Model 1 and transition counts.
    TrainAlign {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_GAP_MS)]
        gap_ms: u64,
        #[arg(long, default_value_t = DEFAULT_EM_ITERATIONS)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// HMM tables from an alignment model.
    BuildHmm {
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[command(flatten)]
        hmm: HmmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// `train-align`, `build-hmm` and a tf-idf `index` in one step.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = DEFAULT_GAP_MS)]
        gap_ms: u64,
        #[arg(long, default_value_t = DEFAULT_EM_ITERATIONS)]
        iterations: usize,
        #[command(flatten)]
        hmm: HmmArgs,
        /// Receives alignment.json, hmm.json and index.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode every narrative of a corpus.
    Tag {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        model: PathBuf,
        /// Restrict each example to the labels present in its label map.
        #[arg(long)]
        constrained: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constrained tags of a training corpus as `{id, words, tags}` lines.
    ExportAutosup {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a narrative retrieval index.
    Index {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = "tfidf")]
        encoder: EncoderKind,
        /// `{id: [f64]}` JSON for the external encoder.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k indexed narratives for a query text or scene file.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
        text: Option<String>,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Compose canvases for one scene file or every record of a manifest.
    Compose {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Scene JSON `{narrative, trace}`.
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        input: Option<PathBuf>,
        /// Manifest whose records are composed into `{out}/{id}/`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        opts: ComposeArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Token agreement of predicted tags with gold tags.
    EvalTagging {
        /// `{id, words, tags}` lines from `tag`.
        #[arg(long)]
        predicted: PathBuf,
        /// Generator `gold.jsonl`.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
    },
    /// Self-retrieval recall@k of a corpus against an index.
    EvalRecall {
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
    },
    /// Mean selected-mask IOU as a function of retrieval depth.
    EvalKsweep {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        index: PathBuf,
        /// Manifest of query examples, tagged with their gold tags.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10,20,50")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        canvas_size: u32,
        #[arg(long, default_value_t = DEFAULT_MIN_PIXELS)]
        min_pixels: u64,
        #[arg(long, default_value_t = DEFAULT_GAP_MS)]
        gap_ms: u64,
    },
    /// Class-set F1 and completeness of composed canvases against gold.
    EvalClasses {
        /// Directory of `{id}/` canvases from `compose --manifest`.
        #[arg(long)]
        canvases: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
    },
    /// Write a procedural corpus with held-out split and gold tags.
    GenSynth {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        heldout: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PresetArg::Mixed)]
        preset: PresetArg,
        /// Label map side in pixels.
        #[arg(long, default_value_t = 64)]
        size: u32,
        #[arg(long)]
        ski_rate: Option<f64>,
        #[arg(long)]
        distractor_rate: Option<f64>,
        #[arg(long)]
        drift_rate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Example count, narrative length and class frequencies.
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Serve the HTTP API and the authoring UI.
    Serve {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Port 0 picks a free port; the bound address is printed first.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[command(flatten)]
        opts: ComposeArgs,
        #[arg(long, default_value = "canvases")]
        canvas_dir: PathBuf,
    },
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn report<T: Serialize>(format: Format, value: &T, table: impl FnOnce() -> String) -> Result<()> {
    match format {
        Format::Json => emit(value, None),
        Format::Text => {
            print!("{}", table());
            Ok(())
        }
    }
}

fn read_records(manifest: &Path) -> Result<Vec<ManifestRecord>> {
    let f = fs::File::open(manifest).with_context(|| format!("opening {}", manifest.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", manifest.display(), i + 1))?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AssignmentLine<'a> {
    id: &'a str,
    words: Vec<String>,
    labels: Vec<String>,
}

#[derive(Serialize)]
struct ComposedLine {
    id: String,
    canvas_id: String,
    classes: Vec<String>,
    warnings: usize,
}

#[derive(Serialize)]
pub struct ClassEval {
    pub canvases: usize,
    /// Canvases with no unlabeled pixel.
    pub complete: usize,
    pub missing: Vec<String>,
    pub class_sets: ClassSetReport,
}

/// Scores `{dir}/{id}/` canvases against the generator's gold class sets.
pub fn eval_classes(dir: &Path, gold: &Path, taxonomy: &LabelTaxonomy) -> Result<ClassEval> {
    let gold = load_gold(gold, taxonomy)?;
    let (mut pairs, mut missing, mut complete) = (Vec::new(), Vec::new(), 0);
    for (id, g) in &gold {
        let meta_path = dir.join(id).join("meta.json");
        if !meta_path.exists() {
            missing.push(id.clone());
            continue;
        }
        let meta: CanvasMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?).with_context(|| format!("{}", meta_path.display()))?;
        let labels = LabelMap::load_png(&dir.join(id).join("labels.png"))?;
        complete += usize::from(!labels.raw().contains(&UNLABELED));
        pairs.push((detected_classes(&meta, taxonomy), g.classes.clone()));
    }
    Ok(ClassEval { canvases: pairs.len(), complete, missing, class_sets: class_set_f1(&pairs, taxonomy) })
}

fn class_eval_text(e: &ClassEval) -> String {
    let mut rows: Vec<Vec<String>> = e
        .class_sets
        .per_class
        .iter()
        .map(|(c, p)| vec![c.clone(), format!("{:.3}", p.precision), format!("{:.3}", p.recall), format!("{:.3}", p.f1)])
        .collect();
    rows.push(vec!["macro".into(), String::new(), String::new(), format!("{:.3}", e.class_sets.macro_f1)]);
    format!("canvases {} complete {}\n{}", e.canvases, e.complete, text_table(&["class", "precision", "recall", "f1"], &rows))
}

/// Writes the trained artifacts for `corpus` into `out`.
pub fn train_to(corpus: &Corpus, align: &AlignConfig, hmm: &HmmConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let trained = train_alignment(corpus, align)?;
    trained.model.save(&out.join(ALIGNMENT_FILE))?;
    build_hmm(&trained.table, &trained.weights, &trained.counts, &corpus.taxonomy, hmm)?.save(&out.join(HMM_FILE))?;
    RetrievalIndex::tfidf(corpus)?.save(&out.join(INDEX_FILE))?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let format = cli.format;
    match cli.command {
        Command::Import { input, label_dir, out } => {
            let r = import::import(&input, &label_dir, &out)?;
            for s in &r.skipped {
                log::warn!("skipped {s}");
            }
            emit(&r, None)
        }
        Command::Assign { corpus, gap_ms, out } => {
            let corpus = corpus.load()?;
            let mut text = String::new();
            for a in assign_corpus(&corpus, gap_ms) {
                let words = corpus.get(&a.id).expect("assigned ids come from the corpus").words();
                let labels = a.labels.iter().map(|&l| corpus.taxonomy.name(l)).collect();
                text += &serde_json::to_string(&AssignmentLine { id: &a.id, words, labels })?;
                text.push('\n');
            }
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::TrainAlign { corpus, gap_ms, iterations, out } => {
            let corpus = corpus.load()?;
            let trained = train_alignment(&corpus, &AlignConfig { gap_ms, iterations })?;
            trained.model.save(&out)?;
            emit(&serde_json::json!({ "log_likelihood": trained.model.log_likelihood }), None)
        }
        Command::BuildHmm { alignment, taxonomy, hmm, out } => {
            let taxonomy = LabelTaxonomy::load(&taxonomy)?;
            let (table, weights, counts) = AlignmentModel::load(&alignment)?.to_parts(&taxonomy)?;
            build_hmm(&table, &weights, &counts, &taxonomy, &hmm.config())?.save(&out)?;
            Ok(())
        }
        Command::Train { corpus, gap_ms, iterations, hmm, out } => {
            train_to(&corpus.load()?, &AlignConfig { gap_ms, iterations }, &hmm.config(), &out)
        }
        Command::Tag { corpus, model, constrained, out } => {
            let corpus = corpus.load()?;
            let hmm = HmmModel::load(&model)?;
            let tagged = tag_corpus(&corpus, &hmm, constrained);
            match out {
                Some(p) => Ok(export_autosupervision(&tagged, &corpus.taxonomy, &p)?),
                None => {
                    for t in &tagged {
                        let tags: Vec<String> = t.tags.iter().map(|&l| corpus.taxonomy.name(l)).collect();
                        println!("{}", serde_json::json!({ "id": t.id, "words": t.words, "tags": tags }));
                    }
                    Ok(())
                }
            }
        }
        Command::ExportAutosup { corpus, model, out } => {
            let corpus = corpus.load()?;
            let tagged = tag_corpus(&corpus, &HmmModel::load(&model)?, true);
            Ok(export_autosupervision(&tagged, &corpus.taxonomy, &out)?)
        }
        Command::Index { corpus, encoder, embeddings, out } => {
            let corpus = corpus.load()?;
            Ok(build_index(&corpus, encoder, embeddings.as_deref())?.save(&out)?)
        }
        Command::Retrieve { index, text, scene, k } => {
            let index = RetrievalIndex::load(&index)?;
            let query = match (text, scene) {
                (Some(t), _) => Query::Words(tokenize(&t)),
                (None, Some(p)) => {
                    let s = Scene::load(&p)?;
                    match s.embedding {
                        Some(v) => Query::Vector(v),
                        None => Query::Words(s.narrative.into_iter().map(|w| w.text).collect()),
                    }
                }
                (None, None) => bail!("either --text or --scene is required"),
            };
            let hits = index.top_k(&query, k)?;
            report(format, &hits, || {
                let rows: Vec<Vec<String>> =
                    hits.iter().enumerate().map(|(i, h)| vec![(i + 1).to_string(), h.id.clone(), format!("{:.4}", h.score)]).collect();
                text_table(&["rank", "id", "score"], &rows)
            })
        }
        Command::Compose { pipeline, input, manifest, opts, out } => {
            let (pipeline, palette) = pipeline.load()?;
            let config = opts.config();
            if let Some(p) = input {
                let scene = Scene::load(&p).with_context(|| format!("reading scene {}", p.display()))?;
                let c = pipeline.compose(&scene, &config)?;
                write_canvas(&out, &c, pipeline.taxonomy(), &palette)?;
                for w in &c.meta.warnings {
                    log::warn!("{w}");
                }
                return emit(&ComposedLine { id: p.display().to_string(), canvas_id: c.meta.canvas_id, classes: c.meta.classes, warnings: c.meta.warnings.len() }, None);
            }
            let manifest = manifest.expect("clap requires one of --input and --manifest");
            fs::create_dir_all(&out)?;
            let mut summary = String::new();
            for rec in read_records(&manifest)? {
                let scene = Scene::new(rec.narrative, rec.trace, None).with_context(|| format!("record `{}`", rec.id))?;
                let c = pipeline.compose(&scene, &config).with_context(|| format!("composing `{}`", rec.id))?;
                write_canvas(&out.join(&rec.id), &c, pipeline.taxonomy(), &palette)?;
                let line = ComposedLine { id: rec.id, canvas_id: c.meta.canvas_id, classes: c.meta.classes, warnings: c.meta.warnings.len() };
                summary += &serde_json::to_string(&line)?;
                summary.push('\n');
            }
            fs::write(out.join("composed.jsonl"), summary)?;
            Ok(())
        }
        Command::EvalTagging { predicted, gold, taxonomy } => {
            let taxonomy = LabelTaxonomy::load(&taxonomy)?;
            let gold = load_gold(&gold, &taxonomy)?;
            let (mut p, mut g) = (Vec::new(), Vec::new());
            for t in load_autosupervision(&predicted, &taxonomy)? {
                let Some(gt) = gold.get(&t.id) else { bail!("no gold tags for `{}`", t.id) };
                p.push(t.tags);
                g.push(gt.tags.clone());
            }
            let r = tagging_accuracy(&p, &g, &taxonomy)?;
            report(format, &r, || {
                let mut rows: Vec<Vec<String>> = r
                    .per_class
                    .iter()
                    .map(|(c, m)| vec![c.clone(), format!("{:.3}", m.precision), format!("{:.3}", m.recall), format!("{:.3}", m.f1)])
                    .collect();
                rows.push(vec!["accuracy".into(), String::new(), String::new(), format!("{:.3}", r.accuracy)]);
                text_table(&["class", "precision", "recall", "f1"], &rows)
            })
        }
        Command::EvalRecall { index, corpus, ks } => {
            let index = RetrievalIndex::load(&index)?;
            let corpus = corpus.load()?;
            let pairs: Vec<(Query, String)> = corpus.iter().map(|e| (Query::Words(e.words()), e.id.clone())).collect();
            let t = recall_at_k(&index, &pairs, &ks)?;
            report(format, &t, || recall_table_text(&t))
        }
        Command::EvalKsweep { corpus, index, queries, gold, ks, canvas_size, min_pixels, gap_ms } => {
            let corpus = corpus.load()?;
            let index = RetrievalIndex::load(&index)?;
            let queries = load_corpus_strict(&queries, None)?;
            let gold = load_gold(&gold, &corpus.taxonomy)?;
            let canvas = (canvas_size, canvas_size);
            let mut qs = Vec::new();
            for e in queries.iter() {
                let Some(g) = gold.get(&e.id) else { bail!("no gold tags for `{}`", e.id) };
                qs.push(sweep_query(e, &g.tags, &corpus.taxonomy, canvas, gap_ms)?);
            }
            let rows = k_sweep(&corpus, &index, &qs, &ks, canvas, min_pixels)?;
            report(format, &rows, || sweep_table_text(&rows))
        }
        Command::EvalClasses { canvases, gold, taxonomy } => {
            let e = eval_classes(&canvases, &gold, &LabelTaxonomy::load(&taxonomy)?)?;
            report(format, &e, || class_eval_text(&e))
        }
        Command::GenSynth { n, heldout, seed, preset, size, ski_rate, distractor_rate, drift_rate, out } => {
            let d = SynthConfig::default();
            let cfg = SynthConfig {
                n,
                heldout,
                seed,
                size,
                preset: preset.into(),
                ski_rate: ski_rate.unwrap_or(d.ski_rate),
                distractor_rate: distractor_rate.unwrap_or(d.distractor_rate),
                drift_rate: drift_rate.unwrap_or(d.drift_rate),
                ..d
            };
            ensure!(n > 0, "--n must be positive");
            fs::create_dir_all(&out)?;
            let manifest = generate(&cfg)?.save(&out)?;
            emit(&serde_json::json!({ "manifest": manifest, "config": cfg }), None)
        }
        Command::Stats { corpus } => {
            let s = corpus_stats(&corpus.load()?);
            report(format, &s, || {
                let rows: Vec<Vec<String>> = s
                    .class_images
                    .iter()
                    .map(|(c, n)| vec![c.clone(), n.to_string(), s.class_pixels.get(c).copied().unwrap_or(0).to_string()])
                    .collect();
                format!(
                    "examples {} mean narrative length {:.2}\n{}",
                    s.examples,
                    s.mean_narrative_length,
                    text_table(&["class", "images", "pixels"], &rows)
                )
            })
        }
        Command::Serve { pipeline, host, port, opts, canvas_dir } => {
            let (pipeline, palette) = pipeline.load()?;
            fs::create_dir_all(&canvas_dir)?;
            let state = scenecomp_service::AppState::new(pipeline, palette, opts.config(), canvas_dir);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                println!("listening on http://{}", listener.local_addr()?);
                std::io::stdout().flush()?;
                scenecomp_service::serve(listener, state).await?;
                Ok(())
            })
        }
    }
}
