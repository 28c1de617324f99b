//! Library surface behind the `servesim` binary: file formats, run
//! configuration, synthetic traces, and the command dispatcher.

pub mod app;
pub mod config;
pub mod gen;
pub mod io;
