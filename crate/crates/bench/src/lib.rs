//! Shared fixtures for the benchmarks.

use adaclust_core::data::{generate_heterogeneous, GeneratorSpec};
use adaclust_core::FamilySpec;

/// Prepared values and families of a default-shaped synthetic mixture.
pub fn synthetic(n: usize, seed: u64) -> (adaclust_core::data::Dataset, Vec<FamilySpec>) {
    let g = generate_heterogeneous(&GeneratorSpec {
        n,
        seed,
        ..GeneratorSpec::default()
    })
    .expect("default spec generates");
    let (_, fams) = g.dataset.prepare().expect("generated data is valid");
    (g.dataset, fams)
}
