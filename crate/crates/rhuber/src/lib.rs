//! File formats, experiment harness and command-line front end for the
//! two-step robust regression estimator in `rhuber-core`.

pub mod cli;
pub mod harness;
pub mod io;
