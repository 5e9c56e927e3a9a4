mod common;

use deliver::geometry::{
    compute_voronoi, locate, project_clamp, relay_point, shared_edge, Point, RobotId, SharedEdge,
    Workspace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point_in(w: f64, h: f64) -> impl Strategy<Value = Point> {
    (0.0..w, 0.0..h).prop_map(|(x, y)| Point::new(x, y))
}

fn configuration() -> impl Strategy<Value = (Vec<(RobotId, Point)>, u64)> {
    (1usize..=12, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (common::random_sites(&mut rng, n, 20.0, 20.0, 1e-3), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn locate_matches_nearest_site((sites, _) in configuration(), probes in prop::collection::vec(point_in(20.0, 20.0), 50)) {
        let ws = Workspace::unit_grid(20, 20).unwrap();
        let d = compute_voronoi(&sites, &ws).unwrap();
        for p in probes {
            prop_assert_eq!(locate(p, &d).unwrap(), common::nearest_site(p, &sites));
        }
    }

    #[test]
    fn cells_tile_the_workspace((sites, _) in configuration()) {
        let ws = Workspace::unit_grid(20, 20).unwrap();
        let d = compute_voronoi(&sites, &ws).unwrap();
        let total: f64 = d.cells.iter().map(|c| c.area()).sum();
        prop_assert!((total - 400.0).abs() < 1e-6, "area {}", total);
        for cell in &d.cells {
            prop_assert!(cell.contains(cell.site));
        }
    }

    #[test]
    fn shared_edges_are_equidistant_and_symmetric((sites, _) in configuration()) {
        let ws = Workspace::unit_grid(20, 20).unwrap();
        let d = compute_voronoi(&sites, &ws).unwrap();
        for &(a, pa) in &sites {
            for &(b, pb) in &sites {
                if a >= b {
                    continue;
                }
                let ab = shared_edge(&d, a, b).unwrap();
                let ba = shared_edge(&d, b, a).unwrap();
                prop_assert_eq!(ab.is_some(), ba.is_some());
                if let (Some(e), Some(f)) = (ab, ba) {
                    prop_assert_eq!((e.p1, e.p2), (f.p1, f.p2));
                    for t in [0.0, 0.25, 0.5, 1.0] {
                        let z = e.p1.lerp(e.p2, t);
                        prop_assert!((z.distance(pa) - z.distance(pb)).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn relay_point_is_minimax(a in point_in(20.0, 20.0), b in point_in(20.0, 20.0), p1 in point_in(20.0, 20.0), p2 in point_in(20.0, 20.0)) {
        prop_assume!(a.distance(b) > 1e-3 && p1.distance(p2) > 1e-3);
        let edge = SharedEdge { site_a: RobotId(0), site_b: RobotId(1), p1, p2 };
        let r = relay_point(a, b, &edge).unwrap();
        let oracle = common::ternary_minimax(a, b, p1, p2);
        prop_assert!(r.max_distance <= oracle + 1e-7, "{} vs {}", r.max_distance, oracle);
        prop_assert!((r.max_distance - a.distance(r.point).max(b.distance(r.point))).abs() < 1e-12);
        // the point is on the segment
        let along = (r.point - p1).cross(p2 - p1).abs() / p1.distance(p2);
        prop_assert!(along < 1e-9);
    }

    #[test]
    fn relay_point_on_bisector_is_equidistant(a in point_in(20.0, 20.0), b in point_in(20.0, 20.0), s in -10.0..10.0f64, len in 0.01..10.0f64) {
        prop_assume!(a.distance(b) > 1e-3);
        let m = a.midpoint(b);
        let dir = (b - a).perp() * (1.0 / a.distance(b));
        let p1 = m + dir * s;
        let p2 = p1 + dir * len;
        let edge = SharedEdge { site_a: RobotId(0), site_b: RobotId(1), p1, p2 };
        let r = relay_point(a, b, &edge).unwrap();
        prop_assert!((r.point.distance(a) - r.point.distance(b)).abs() <= 1e-9);
        prop_assert!(r.max_distance <= common::ternary_minimax(a, b, p1, p2) + 1e-7);
    }

    #[test]
    fn project_clamp_matches_sampling(p in point_in(20.0, 20.0), p1 in point_in(20.0, 20.0), p2 in point_in(20.0, 20.0)) {
        prop_assume!(p1.distance(p2) > 1e-2);
        let q = project_clamp(p, p1, p2).unwrap();
        let s = common::sampled_closest(p, p1, p2, 20_000);
        prop_assert!(q.distance(p) <= s.distance(p) + 1e-12);
        prop_assert!(q.distance(s) <= p1.distance(p2) / 20_000.0 + 1e-9);
    }
}
