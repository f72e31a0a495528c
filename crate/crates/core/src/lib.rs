pub mod assortment;
pub mod error;
pub mod experiment;
pub mod lp;
pub mod model;
pub mod mwu;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod simulator;
pub mod suite;

pub use error::{Error, Result};
