//! Dense vectors, seeded random streams and the Lanczos eigensolver.

mod lanczos;
mod rng;
mod tridiag;
mod vector;

pub use lanczos::{
    lanczos_deflated, lanczos_top, orient, EigenPair, LanczosDiagnostics, LanczosOptions,
    DEGENERATE_GAP,
};
pub use rng::RngStream;
pub use vector::Vector;

pub(crate) use vector::dot_slices;
