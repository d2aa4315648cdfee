pub mod blocks;
pub mod engine;
pub mod error;
pub mod material;
pub mod oracle;
pub mod potentials;
pub mod source;
pub mod validation;

pub use blocks::{BlockKey, BlockMatrix, Parity, SpectralBlock};
pub use engine::{Classification, FieldSample, Problem, SolutionState, SourceClass, SweepResult};
pub use error::{CalrError, Result};
pub use material::{CoatedDiskConfig, ElasticConstants, LameParams, Material, ResonanceSign};
pub use potentials::{BasisIndex, BasisKind, DipoleSource, PolarPoint};
pub use source::{InnerMethod, SourceCoefficients};
pub use validation::{ValidationCheck, ValidationConfig, ValidationReport};
