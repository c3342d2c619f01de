use proptest::prelude::*;
use scenecomp_core::geometry::{convex_hull, iou, rasterize, BinaryMask, Point};
use scenecomp_core::oracle::pixel_iou;

fn points() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| Point::new(x, y)), 1..40)
}

fn grid_points() -> impl Strategy<Value = Vec<Point>> {
    // coarse lattice to exercise duplicates and collinear runs
    prop::collection::vec((0..6u8, 0..6u8).prop_map(|(x, y)| Point::new(x as f64 / 5.0, y as f64 / 5.0)), 1..30)
}

fn mask(w: u32, h: u32) -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(any::<bool>(), (w * h) as usize)
        .prop_map(move |bits| BinaryMask::from_fn(w, h, |x, y| bits[(y * w + x) as usize]).unwrap())
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn check_hull(pts: &[Point]) -> Result<(), TestCaseError> {
    let hull = convex_hull(pts).unwrap();
    for p in pts {
        prop_assert!(hull.contains(*p, 1e-9), "{p:?} outside {:?}", hull.vertices());
    }
    let again = convex_hull(hull.vertices()).unwrap();
    prop_assert_eq!(&again, &hull);
    let vs = hull.vertices();
    for v in vs {
        prop_assert!(pts.contains(v));
    }
    if vs.len() >= 3 {
        for i in 0..vs.len() {
            let (a, b, c) = (vs[i], vs[(i + 1) % vs.len()], vs[(i + 2) % vs.len()]);
            prop_assert!(cross(a, b, c) > 0.0, "not strictly counter-clockwise");
        }
    }
    Ok(())
}

proptest! {
    #[test]
    fn hull_contains_points_and_is_idempotent(pts in points()) {
        check_hull(&pts)?;
    }

    #[test]
    fn hull_on_lattice_drops_collinear_points(pts in grid_points()) {
        check_hull(&pts)?;
    }

    #[test]
    fn iou_matches_pixel_count(a in mask(13, 7), b in mask(13, 7)) {
        let fast = iou(&a, &b).unwrap();
        prop_assert_eq!(fast, pixel_iou(&a, &b));
        prop_assert_eq!(fast, iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn raster_area_tracks_polygon_area(pts in prop::collection::vec((0.05..0.95f64, 0.05..0.95f64), 3..12)) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let hull = convex_hull(&pts).unwrap();
        prop_assume!(!hull.is_degenerate());
        let vs = hull.vertices();
        let perimeter: f64 = (0..vs.len())
            .map(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
                ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt()
            })
            .sum();
        for n in [64u32, 256] {
            let m = rasterize(&hull, n, n).unwrap();
            let share = m.count() as f64 / (n * n) as f64;
            // every misclassified pixel lies within half a diagonal of the boundary
            let bound = perimeter * std::f64::consts::SQRT_2 / n as f64 + 4.0 / (n * n) as f64;
            prop_assert!((share - hull.area()).abs() <= bound, "n={n} share={share} area={}", hull.area());
        }
    }
}

#[test]
fn iou_rejects_mismatched_dimensions() {
    let a = BinaryMask::new(4, 4).unwrap();
    let b = BinaryMask::new(4, 5).unwrap();
    assert!(iou(&a, &b).is_err());
}

#[test]
fn unit_square_hull_has_four_vertices() {
    let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.5, 0.0)].map(|(x, y)| Point::new(x, y));
    let hull = convex_hull(&pts).unwrap();
    assert_eq!(hull.vertices().len(), 4);
    assert_eq!(hull.area(), 1.0);
}
