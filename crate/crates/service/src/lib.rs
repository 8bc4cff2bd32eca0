//! HTTP service, file-backed store and command-line front end for the
//! emobase pipeline.

pub mod api;
pub mod cli;
pub mod error;
pub mod runs;
pub mod store;
