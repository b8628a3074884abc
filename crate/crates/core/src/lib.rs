//! Question decompositions as executable pipelines, plus the animation
//! compiler that turns them into frame-by-frame unit visualizations.

pub mod config;
pub mod corpus;
pub mod datamation;
pub mod decomposer;
pub mod eval;
pub mod executor;
pub mod ingest;
pub mod linker;
pub mod model;
pub mod plan;
pub mod session;
pub mod sql;
pub mod text;

pub use datamation::{generate, DatamationDoc};
pub use executor::{execute, execute_with, ExecError, ExecOptions, TiePolicy, Trace};
pub use model::*;
pub use text::{parse, serialize};
