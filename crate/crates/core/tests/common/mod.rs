#![allow(dead_code)]
pub mod embed_checks;
pub mod metric_fixtures;
pub mod oracles;
pub mod primitives;
pub mod ssi_checks;
pub mod toy_checks;
