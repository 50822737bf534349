//! Geometry of phylogenetic tree-space: geodesic distances between unrooted
//! trees, majority-consensus midpoints, simple geodesic lines through a
//! midpoint, and first principal geodesic paths found by greedy or annealing
//! search.

pub mod consensus;
pub mod error;
mod flow;
pub mod geodesic;
pub mod line;
pub mod newick;
mod optim;
pub mod pca;
pub mod simulate;
pub mod split;
pub mod tree;

pub use consensus::{back_transform_weights, majority_consensus, normalize_lengths, ScaleMap};
pub use error::{Error, Result};
pub use geodesic::{
    cone_path_distance, distance, distance_matrix, geodesic, GeodesicPath, Support,
};
pub use line::{project, sums_of_squares, Projection, Sign, SimpleLine, SplitPair, WeightRange};
pub use newick::{parse_newick, parse_newick_lines, write_newick};
pub use pca::{
    anneal_search, feasible_splits, greedy_search, optimize_weight, proportion_of_variance,
    AnnealConfig, Objective, PcaConfig, PcaResult,
};
pub use simulate::{simulate_correlated, simulate_mixture, MixtureSpec, Sample};
pub use split::{Split, TaxonSet, Topology};
pub use tree::{euclidean_distance, Tree};
