//! Hyperspectral band selection: mutual-information relevance filtering,
//! symmetric-uncertainty redundancy pruning, and a steepest-ascent search
//! over the threshold couple guided by a wrapper classifier.

pub mod ascent;
pub mod bandselect;
pub mod commands;
pub mod config;
pub mod datacube;
pub mod error;
pub mod infotheory;
pub mod wrapper;

pub use ascent::{multistart, steepest_ascent, CoupleEvaluator, GridPoint, ThresholdGrid};
pub use bandselect::{select_bands, BandSelector, BandSubset, RedundancyMode, SelectionThresholds};
pub use datacube::{GroundTruthMap, HyperCube, LabeledSplit};
pub use error::{Error, Result};
pub use wrapper::{EvaluationCache, EvaluationRecord, WrapperEvaluator};
