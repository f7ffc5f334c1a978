//! Analysis of doubly nonnegative matrices: decides, where possible,
//! whether `A` is completely positive with cp-rank equal to its rank, and
//! produces verified nonnegative factors `A = C^T C`.

pub mod cones;
pub mod error;
pub mod fixtures;
pub mod graphcond;
pub mod io;
pub mod matcore;
pub mod nnq;
pub mod pipeline;
pub mod report;
pub mod rotate;
pub mod srfactor;

pub use error::{CpError, Result};
pub use matcore::{SymmetricMatrix, Tolerances};
pub use pipeline::{analyze, AnalysisReport, AnalyzeConfig, Verdict};
pub use srfactor::{CpCertificate, SrFactor};
