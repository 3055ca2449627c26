//! Monte Carlo estimators over the disorder: IDS, DOS, Wegner ratios,
//! spectral averaging, Lifshitz exponents, and local eigenvalue statistics.
//!
//! Every estimator is a map over independent realizations followed by an
//! exact (order-free) merge, so results do not depend on the worker count.

mod accumulator;
mod dos;
mod ids;
mod lifshitz;
mod minami;
mod wegner;

pub use accumulator::{ExactSum, McAccumulator, McVector};
pub use dos::{estimate_dos, uniform_edges, DosEstimate};
pub use ids::{estimate_ids, IdsCurve};
pub use lifshitz::{lifshitz_exponent_fit, lifshitz_fit_points, LifshitzFit, LifshitzPoint};
pub use minami::{
    lower_band_peak, minami_statistics, poisson_diagnostics, poisson_reference, MinamiParams, MinamiReport,
    PoissonDiagnostics, POISSON_SPACING_RATIO,
};
pub use wegner::{spectral_averaging_audit, wegner_ratio, wegner_ratios, SpectralAveragingReport, WegnerReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{assemble_hamiltonian, sample_disorder, DistributionSpec, Lattice};
use crate::spectral::{eigensolve, EigenSystem};

/// Monte Carlo sample size, master seed, and worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Sampling {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(LabError::InvalidArgument("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Map every realization index through `task` on a pool of `workers` threads
/// and fold the tallies with `merge`. `merge` must be exact for the result to
/// be independent of scheduling.
pub fn map_reduce<T, F, M>(sampling: &Sampling, identity: impl Fn() -> T + Sync + Send, task: F, merge: M) -> Result<T>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    sampling.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sampling.workers.max(1))
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..sampling.samples)
            .into_par_iter()
            .map(&task)
            .try_reduce(&identity, |a, b| Ok(merge(a, b)))
    })
}

/// Like [`map_reduce`] but keeps every per-realization output, in order.
pub fn map_collect<T, F>(sampling: &Sampling, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    sampling.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sampling.workers.max(1))
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| (0..sampling.samples).into_par_iter().map(task).collect())
}

/// Sorted eigenvalues (and optionally vectors) of realization `r`.
pub fn realization_spectrum(
    lattice: &Lattice,
    dist: &DistributionSpec,
    seed: u64,
    realization: u64,
    need_vectors: bool,
) -> Result<EigenSystem> {
    let field = sample_disorder(dist, lattice, seed, realization);
    let h = assemble_hamiltonian(lattice, &field)?;
    eigensolve(&h, need_vectors, lattice.volume_cap)
}

/// Upper edge `4d + sup supp μ` of the almost-sure spectrum.
pub fn spectral_top(lattice: &Lattice, dist: &DistributionSpec) -> f64 {
    4.0 * lattice.dim() as f64 + dist.support_sup()
}
