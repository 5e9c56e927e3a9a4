mod common;

use deliver::geometry::{compute_voronoi, locate, Point, Workspace};
use deliver::nlu::TaskSpec;
use deliver::planning::{
    astar, build_relay_plan, single_agent_baseline, sites, PlanningError, Robot, Role, TransferKind,
};
use deliver::world::{center_of, GridCell, OccupancyGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(rng: &mut impl Rng, density: f64) -> OccupancyGrid {
    let ws = Workspace::unit_grid(20, 20).unwrap();
    let blocked: Vec<GridCell> = (0..20)
        .flat_map(|r| (0..20).map(move |c| GridCell::new(c, r)))
        .filter(|_| rng.gen_bool(density))
        .collect();
    OccupancyGrid::with_blocked(ws, blocked).unwrap()
}

fn cell_center(i: u32) -> Point {
    Point::new((i % 20) as f64 + 0.5, (i / 20) as f64 + 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn astar_matches_bfs(seed in any::<u64>(), sc in 0u32..20, sr in 0u32..20, gc in 0u32..20, gr in 0u32..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, 0.25);
        let (s, g) = (GridCell::new(sc, sr), GridCell::new(gc, gr));
        match (astar(&grid, s, g), common::bfs_len(&grid, s, g)) {
            (Ok(path), Some(len)) => {
                prop_assert_eq!(path.length, len);
                prop_assert_eq!(path.start(), s);
                prop_assert_eq!(path.goal(), g);
                for w in path.cells.windows(2) {
                    prop_assert_eq!(w[0].manhattan(w[1]), 1);
                    prop_assert!(!grid.is_blocked(w[1]));
                }
            }
            (Err(PlanningError::NoPath { .. }), None) => {}
            (Err(PlanningError::BlockedEndpoint(_)), None) => {
                prop_assert!(grid.is_blocked(s) || grid.is_blocked(g));
            }
            (a, b) => prop_assert!(false, "astar {:?} vs bfs {:?}", a, b),
        }
    }

    #[test]
    fn relay_plan_structure(cells in prop::sample::subsequence((0u32..400).collect::<Vec<_>>(), 1..=10), p in 0u32..400, d in 0u32..400) {
        prop_assume!(p != d);
        let robots: Vec<Robot> = cells
            .iter()
            .enumerate()
            .map(|(i, &c)| Robot { id: deliver::geometry::RobotId(i as u32), position: cell_center(c) })
            .collect();
        let ws = Workspace::unit_grid(20, 20).unwrap();
        let grid = OccupancyGrid::empty(ws);
        let diagram = compute_voronoi(&sites(&robots), &ws).unwrap();
        let task = TaskSpec { pickup: cell_center(p), drop: cell_center(d), item: "box".into(), source_text: String::new() };
        let plan = build_relay_plan(&task, &robots, &diagram, &grid).unwrap();
        prop_assert_eq!(plan.validate(&diagram), Ok(()));

        let k = plan.active.len();
        prop_assert_eq!(plan.transfers.len(), k - 1);
        prop_assert_eq!(plan.active[0], locate(task.pickup, &diagram).unwrap());
        prop_assert_eq!(*plan.active.last().unwrap(), {
            // the last robot whose cell the path enters for the first time
            let owners: Vec<_> = plan.path.cells.iter().map(|&c| locate(center_of(c, &grid).unwrap(), &diagram).unwrap()).collect();
            let mut seen = Vec::new();
            for o in owners { if !seen.contains(&o) { seen.push(o); } }
            *seen.last().unwrap()
        });
        for (j, (z, kind)) in plan.transfers.iter().zip(&plan.transfer_kinds).enumerate() {
            let (a, b) = (diagram.site(plan.active[j]).unwrap(), diagram.site(plan.active[j + 1]).unwrap());
            if *kind == TransferKind::SharedEdge {
                prop_assert!((z.distance(a) - z.distance(b)).abs() < 1e-7, "transfer {} not on the bisector", j);
            }
        }
        for r in &robots {
            let expect = if !plan.active.contains(&r.id) { Role::Bystander }
                else if r.id == plan.active[0] { Role::Initiator }
                else if Some(&r.id) == plan.active.last() { Role::Final }
                else { Role::Intermediate };
            prop_assert_eq!(plan.role_of(r.id), expect);
        }

        if robots.len() == 1 {
            let baseline = single_agent_baseline(&task, &robots, &diagram, &grid).unwrap();
            prop_assert!(plan.same_route(&baseline));
        }
    }
}
