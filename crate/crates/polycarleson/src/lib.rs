//! Experiment runner for Carleson-box boundedness tests of composition
//! operators with polynomial symbols on weighted Bergman spaces of the
//! polydisc.

pub mod battery;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;
pub mod runs;
pub mod svg;
pub mod symbols;
