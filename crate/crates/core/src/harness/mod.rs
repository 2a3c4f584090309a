//! Episode loop, multi-run comparison, benchmarks and plotting.

pub mod bench;
pub mod compare;
pub mod episode;
pub mod plot;

pub use bench::{benchmark_frontier, benchmark_planner, FrontierBench, PlannerBench, PlannerBenchConfig};
pub use compare::{compare, compare_with, CompareCase, CompareReport};
pub use episode::{
    run_episode, run_episode_observed, EpisodeConfig, EpisodeError, EpisodeMetrics, EpisodeOutcome, MetricsRow,
    StepView, TerminalStatus,
};
pub use plot::{emit_plots, PlotError};
