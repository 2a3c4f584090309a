pub mod ce_planner;
pub mod decision;
pub mod frontier;
pub mod geometry;
pub mod harness;
pub mod occupancy;
pub mod rng;
pub mod rrt;
pub mod scenario;
pub mod srm;
pub mod trajectory;
pub mod world;
