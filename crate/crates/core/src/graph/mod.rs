//! Bipartite interaction graphs, k-core peeling, ego networks, random-walk
//! subgraph sampling, structural features and synthetic data.

pub mod bipartite;
pub mod ego;
pub mod features;
pub mod ids;
pub mod sampler;
pub mod synth;

pub use bipartite::{build_graph, k_core, BipartiteGraph, Filtered, NodeId};
pub use ego::{bfs_ball, ego_network, induced_subgraph, EgoSubgraph};
pub use features::subgraph_features;
pub use ids::{align_common_users, id_order, CommonUserAlignment, IdMap};
pub use sampler::{make_positive_pair, sample_rw_subgraph, SamplerConfig, SubgraphPair};
pub use synth::{density, generate_synthetic_pair, SynthConfig, SynthPair};
