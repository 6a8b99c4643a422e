//! Day-ahead bid planning for a battery trading frequency reserves and spot
//! energy under scenario uncertainty.

pub mod droop;
pub mod error;
pub mod formulation;
pub mod market;
pub mod report;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use market::{BessConfig, Compat, MarketId};
pub use scenario::{Scenario, ScenarioSet};
