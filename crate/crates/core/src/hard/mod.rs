//! Hard clustering: GMoM-HC and the k-means baseline.

pub(crate) mod gmom;
pub(crate) mod kmeans;

pub use gmom::{
    assign_step, cugmom_objective, fit_gmom, fit_gmom_from, initial_lambda, moment_blocks, moment_vector,
    optimize_lambda, standardized, weight_matrix, GmomConfig, GmomResult, MomentBlock, MomentForm, PseudoSamples, KAPPA_MAX,
    KAPPA_MIN, RIDGE,
};
pub use kmeans::{fit_kmeans, kmeans_pp_init, lloyd, nearest, KMeansConfig, KMeansResult};
