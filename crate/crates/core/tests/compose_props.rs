use proptest::prelude::*;
use scenecomp_core::compose::{nearest_fill, place_things, placement_offset, Canvas, Layer};
use scenecomp_core::corpus::{LabelId, LabelKind, LabelMap, UNLABELED};
use scenecomp_core::geometry::{convex_hull, rasterize, BinaryMask, Point};
use scenecomp_core::oracle::brute_force_fill;
use scenecomp_core::retrieval::{ClassInstance, MaskInstance};

fn sparse_grid() -> impl Strategy<Value = LabelMap> {
    (1..=64u32, 1..=64u32, 0.0..0.3f64, any::<u64>()).prop_map(|(w, h, density, seed)| {
        // tiny LCG keeps the grid a pure function of the drawn parameters
        let mut s = seed | 1;
        let data = (0..w * h)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (s >> 11) as f64 / (1u64 << 53) as f64;
                if u < density { ((s >> 3) % 4) as u8 } else { UNLABELED }
            })
            .collect();
        LabelMap::new(w, h, data).unwrap()
    })
}

fn instance(class: u8, pts: &[(f64, f64)]) -> ClassInstance {
    let pts: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
    ClassInstance { class_id: LabelId(class), kind: LabelKind::Thing, token_span: (0, 1), hull: convex_hull(&pts).unwrap() }
}

#[allow(clippy::too_many_arguments)]
fn rect_mask(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32, class: u8, src: &str) -> MaskInstance {
    let mask = BinaryMask::from_fn(w, h, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y)).unwrap();
    MaskInstance { class_id: LabelId(class), mask, source_id: src.into() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nearest_fill_matches_brute_force(grid in sparse_grid()) {
        let fast = nearest_fill(&grid, LabelId(9));
        prop_assert_eq!(&fast, &brute_force_fill(&grid, LabelId(9)));
        prop_assert!(!fast.raw().contains(&UNLABELED));
    }
}

proptest! {
    #[test]
    fn placed_masks_follow_narrative_order(
        a in (0.1..0.5f64, 0.1..0.5f64), b in (0.3..0.8f64, 0.3..0.8f64),
        ra in (2..20u32, 2..20u32), rb in (2..20u32, 2..20u32),
    ) {
        let (w, h) = (32, 32);
        let bg = LabelMap::filled(w, h, LabelId(0)).unwrap();
        let canvas = Canvas::from_background(&bg, &bg, "bg").unwrap();
        let hull_a = instance(1, &[(a.0, a.1), (a.0 + 0.2, a.1), (a.0, a.1 + 0.2)]);
        let hull_b = instance(2, &[(b.0, b.1), (b.0 + 0.1, b.1 + 0.1), (b.0 - 0.05, b.1 + 0.15)]);
        let ma = rect_mask(w, h, 0, 0, ra.0, ra.1, 1, "ma");
        let mb = rect_mask(w, h, 32 - rb.0, 32 - rb.1, 32, 32, 2, "mb");
        let (out, offsets) = place_things(canvas, &[(hull_a.clone(), ma.clone()), (hull_b.clone(), mb.clone())]).unwrap();

        let shifted = |inst: &ClassInstance, m: &MaskInstance| {
            let hull = rasterize(&inst.hull, w, h).unwrap();
            let (dx, dy) = placement_offset(&hull, &m.mask).unwrap();
            let cover: Vec<(u32, u32)> = m.mask.iter_set().map(|(x, y)| ((x as i64 + dx) as u32, (y as i64 + dy) as u32)).collect();
            ((dx, dy), cover)
        };
        let (oa, cover_a) = shifted(&hull_a, &ma);
        let (ob, cover_b) = shifted(&hull_b, &mb);
        prop_assert_eq!(offsets, vec![oa, ob]);
        for y in 0..h {
            for x in 0..w {
                let expect = if cover_a.contains(&(x, y)) { 1 } else if cover_b.contains(&(x, y)) { 2 } else { 0 };
                prop_assert_eq!(out.label(x, y), LabelId(expect));
                let layer = out.provenance(x, y).layer;
                prop_assert_eq!(layer, if expect == 0 { Layer::Stuff } else { Layer::Thing });
            }
        }
    }
}

#[test]
fn fill_ties_prefer_the_upper_source() {
    // hole at (1,1) is equidistant from (1,0) and (1,2)
    let mut g = LabelMap::new(3, 3, vec![UNLABELED; 9]).unwrap();
    g.set(1, 0, Some(LabelId(4)));
    g.set(1, 2, Some(LabelId(5)));
    let f = nearest_fill(&g, LabelId(0));
    assert_eq!(f.get(1, 1), Some(LabelId(4)));
    assert_eq!(f, brute_force_fill(&g, LabelId(0)));
}

#[test]
fn canvas_marks_filled_pixels() {
    let mut partial = LabelMap::new(2, 1, vec![UNLABELED; 2]).unwrap();
    partial.set(0, 0, Some(LabelId(3)));
    let full = nearest_fill(&partial, LabelId(0));
    let c = Canvas::from_background(&full, &partial, "x").unwrap();
    assert_eq!(c.provenance(0, 0).layer, Layer::Stuff);
    assert_eq!(c.provenance(1, 0).layer, Layer::Fill);
    assert_eq!(c.label(1, 0), LabelId(3));
    assert_eq!(c.unlabeled_pixels(), 0);
}
