//! Command-line driver: config handling, the end-to-end pipeline, figure
//! reproduction and hashed output bundles.

pub mod app;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod reproduce;
