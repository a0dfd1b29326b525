//! File formats, experiment drivers and command implementations on top of
//! [`ssnmf_core`].

pub mod cli;
pub mod experiment;
pub mod format;
pub mod parallel;
pub mod store;
