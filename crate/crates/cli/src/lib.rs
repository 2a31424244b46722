//! Library side of the `hjblab` binary: config parsing, output handling and
//! the experiment runners.

pub mod config;
pub mod experiments;
pub mod output;
pub mod run;
