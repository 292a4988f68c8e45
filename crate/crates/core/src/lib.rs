//! Statistical tools for loophole-free Bell tests: the CH-E inequality and
//! its variants, supermartingale p-values, adversarial trial sources,
//! space-time separation checks and detection-efficiency optimization.

pub mod adversary;
pub mod cli;
pub mod config;
pub mod error;
pub mod inequality;
pub mod martingale;
pub mod optimizer;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod spacetime;
pub mod trial_csv;
pub mod types;

pub use error::{Error, Result};
pub use types::{Fate, Outcome, PredictabilityMode, Setting, SettingsProfile, TrialRecord};
