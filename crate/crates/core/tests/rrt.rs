use srm_core::geometry::{GridSpec, Pose};
use srm_core::occupancy::{OccupancyGrid, OccupancyParams};
use srm_core::rng::substream;
use srm_core::rrt::{rrt_star_plan, RrtConfig};
use srm_core::srm::check_edge_validity;

#[test]
fn open_map_cost_is_near_straight_line() {
    let spec = GridSpec::new(100, 100, 0.2);
    let mut grid = OccupancyGrid::new(spec, OccupancyParams::default()).unwrap();
    for i in 0..spec.len() {
        grid.set_log_odds(spec.cell_of_index(i), -7.0);
    }
    let (start, goal) = (Pose::new(1.0, 1.0), Pose::new(19.0, 19.0));
    let straight = start.distance(&goal);
    let cfg = RrtConfig { max_samples: 5000, ..Default::default() };
    for seed in 1..=20 {
        let plan = rrt_star_plan(&grid, start, goal, &cfg, &mut substream(seed, "rrt-open", &[])).unwrap();
        let t = &plan.trajectory;
        assert!((plan.cost - t.length()).abs() < 1e-9);
        assert!(plan.cost <= 1.15 * straight, "seed {seed}: {} vs {straight}", plan.cost);
        assert!(t.waypoints().windows(2).all(|w| check_edge_validity(&grid, &w[0], &w[1], cfg.r_robot)));
        assert_eq!((t.start(), t.end()), (start, goal));
    }
}
