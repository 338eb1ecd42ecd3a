pub mod a2;
pub mod config;
pub mod decomposition;
pub mod dyadic;
pub mod ensemble;
pub mod envelopes;
pub mod error;
pub mod hardy;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod poisson;
pub mod positive;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
