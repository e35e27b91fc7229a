//! Library surface of the `mcqa` binary, split out so integration tests
//! can drive commands in-process.

pub mod commands;
pub mod config;
pub mod error;
