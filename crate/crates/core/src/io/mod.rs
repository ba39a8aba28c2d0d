//! Review ingestion, edge-list dumps and pipeline configuration.

pub mod config;
pub mod edges;
pub mod reviews;

pub use config::{
    ingest_reviews, load_domains, DataConfig, Domain, KCoreConfig, LoadedDomains, PipelineConfig,
};
pub use edges::{load_edge_list, read_edge_list, save_edge_list, write_edge_list};
pub use reviews::{parse_reviews, parse_reviews_from, ParsedReviews, ReviewFormat};
