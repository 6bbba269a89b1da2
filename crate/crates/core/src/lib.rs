pub mod data;
pub mod edm;
pub mod error;
pub mod evaluation;
pub mod hard;
pub mod numopt;
pub mod rng;
pub mod soft;

pub use edm::{AttributeKind, FamilyClass, FamilySpec};
pub use error::{Error, Result};
pub use soft::{FitResult, MixtureParams, Mode, Priors, SoftConfig};
