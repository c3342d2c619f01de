use scenecomp_core::align::{assign_corpus, AlignConfig};
use scenecomp_core::compose::{write_canvas, ComposeConfig, Pipeline, CANVAS_FILES};
use scenecomp_core::corpus::{Scene, DEFAULT_GAP_MS};
use scenecomp_core::eval::{class_set_f1, detected_classes};
use scenecomp_core::render::Palette;
use scenecomp_core::synth::{generate, SynthConfig};
use scenecomp_core::tagger::HmmConfig;

fn trained(seed: u64) -> (Pipeline, scenecomp_core::synth::SynthCorpus) {
    let synth = generate(&SynthConfig { n: 200, heldout: 12, seed, ..Default::default() }).unwrap();
    let p = Pipeline::train(synth.train.clone(), &AlignConfig::default(), &HmmConfig::default()).unwrap();
    (p, synth)
}

#[test]
fn compositions_are_complete_and_deterministic() {
    let (p, synth) = trained(2);
    let cfg = ComposeConfig { width: 64, height: 64, ..Default::default() };
    let mut pairs = Vec::new();
    for e in synth.heldout.iter() {
        let scene = Scene::from(e);
        let a = p.compose(&scene, &cfg).unwrap();
        let b = p.compose(&scene, &cfg).unwrap();
        assert_eq!(a.canvas.unlabeled_pixels(), 0);
        assert_eq!(a.canvas, b.canvas);
        assert_eq!(a.meta, b.meta);
        pairs.push((detected_classes(&a.meta, p.taxonomy()), synth.gold[&e.id].classes.clone()));
    }
    let report = class_set_f1(&pairs, p.taxonomy());
    assert!(report.macro_f1 > 0.5, "macro F1 {}", report.macro_f1);
}

#[test]
fn canvas_files_are_byte_identical_across_runs() {
    let (p, synth) = trained(4);
    let cfg = ComposeConfig { width: 48, height: 48, ..Default::default() };
    let scene = Scene::from(&synth.heldout.examples()[0]);
    let palette = Palette::default_for(p.taxonomy());
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_canvas(d.path(), &p.compose(&scene, &cfg).unwrap(), p.taxonomy(), &palette).unwrap();
    }
    for f in CANVAS_FILES {
        assert_eq!(std::fs::read(dirs[0].path().join(f)).unwrap(), std::fs::read(dirs[1].path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn empty_narrative_cannot_be_composed() {
    let (p, synth) = trained(1);
    let scene = Scene { narrative: vec![], trace: synth.heldout.examples()[0].trace.clone(), embedding: None };
    assert!(p.compose(&scene, &ComposeConfig::default()).is_err());
}

/// Without drift every stroke stays in its phrase's region. Thing words
/// always land on their thing; a ground stroke's hull can reach over the
/// things standing on it, so stuff words only mostly land on their ground.
#[test]
fn drift_free_traces_assign_words_to_their_regions() {
    let synth = generate(&SynthConfig { n: 80, heldout: 0, seed: 9, drift_rate: 0.0, ..Default::default() }).unwrap();
    let tax = &synth.train.taxonomy;
    let assignments = assign_corpus(&synth.train, DEFAULT_GAP_MS);
    assert_eq!(assignments.len(), 80);
    let (mut agree, mut total) = (0usize, 0usize);
    for a in &assignments {
        let gold = &synth.gold[&a.id].tags;
        assert_eq!(a.labels.len(), gold.len());
        for (got, want) in a.labels.iter().zip(gold) {
            if tax.is_thing(*want) {
                assert_eq!(got, want, "`{}`", a.id);
            }
            agree += (got == want) as usize;
            total += 1;
        }
    }
    assert!(agree as f64 >= 0.98 * total as f64, "{agree}/{total}");
}
