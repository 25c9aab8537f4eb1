//! Backward feature elimination on two models at once, tracking how much
//! their predictions agree as features are removed.

pub mod agreeability;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod report;
pub mod search;
pub mod seeds;
pub mod stat_tests;
pub mod telco;

pub use error::{Error, Result};
