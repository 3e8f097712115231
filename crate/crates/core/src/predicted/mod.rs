//! Predicted displacement dynamics around the reference trajectory: the
//! scalar `(x̂, ŷ)` recursion and the full vector recursion.

mod reduced;
mod vector;

pub use reduced::{
    equilibrium_gap, reduced_step, simulate_ensemble, simulate_reduced, stationary_stats,
    stationary_stats_ensemble, ReducedCoeffs, ReducedRun, ReducedState, StationaryStats,
};
pub use vector::{
    full_predicted_step, propagation_factor, unroll_yhat, CurvatureFrame, DenseFrame,
    PredictedVectorState,
};

use crate::scalar::Real;

/// Mean computed as `a₀ + mean(a_i − a₀)`, which is exact for constant input.
pub(crate) fn shifted_mean<T: Real>(values: impl Iterator<Item = T> + Clone) -> Option<T> {
    let mut it = values.clone();
    let first = it.next()?;
    let mut n = 1usize;
    let mut acc = T::zero();
    for v in it {
        acc += v - first;
        n += 1;
    }
    Some(first + acc / T::from_usize_lossy(n))
}
