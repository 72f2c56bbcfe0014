//! Query strategies, the active-learning episode and hosting-capacity
//! extraction.

pub mod capacity;
pub mod episode;
pub mod strategy;

pub use capacity::{hosting_capacity, write_frontier_csv, FrontierRow, HostingCapacity};
pub use episode::{run_episode, Budget, EpisodeConfig, EpisodeHistory, EpisodeResult, PoolItem, RoundRecord};
pub use strategy::{
    binary_entropy, mean_cosine_similarity, score_entropy, score_info_density, score_uniform,
    select_top, QueryStrategy, StrategyKind,
};
