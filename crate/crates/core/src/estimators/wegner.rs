use serde::Serialize;

use super::{map_reduce, realization_spectrum, McAccumulator, McVector, Sampling};
use crate::error::{LabError, Result};
use crate::lattice::{assemble_hamiltonian, sample_disorder, DistributionSpec, Lattice};
use crate::quadrature::gauss_legendre_on;
use crate::spectral::{count_in, eigensolve, local_spectral_weight, EnergyInterval};

/// Nodes per density piece for the inner `ω_site` integral.
pub const SPECTRAL_AVERAGING_NODES: usize = 64;

/// `𝔼{tr P(I)}` and the normalized ratio `K̂ = 𝔼{tr P(I)} / (‖ρ‖∞ |I| |Λ|)`.
#[derive(Debug, Clone, Serialize)]
pub struct WegnerReport {
    pub interval: EnergyInterval,
    pub mean_trace: f64,
    pub mean_trace_stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// `K̂ − 3σ > 1`: the Wegner bound with constant 1 would be contradicted.
    pub flagged: bool,
    pub samples: u64,
    pub volume: usize,
}

impl WegnerReport {
    pub fn band(&self) -> (f64, f64) {
        let s = 3.0 * self.ratio_stderr.max(0.0);
        (self.ratio - s, self.ratio + s)
    }
}

/// Wegner ratios for several intervals from one pass over the realizations.
pub fn wegner_ratios(
    lattice: &Lattice,
    dist: &DistributionSpec,
    intervals: &[EnergyInterval],
    sampling: &Sampling,
) -> Result<Vec<WegnerReport>> {
    for iv in intervals {
        if !(iv.width() > 0.0) || !iv.width().is_finite() {
            return Err(LabError::InvalidInterval(format!(
                "Wegner ratio needs a finite interval of positive width, got [{}, {}]",
                iv.lower(),
                iv.upper()
            )));
        }
    }
    let acc = map_reduce(
        sampling,
        || McVector::new(intervals.len()),
        |r| {
            let sys = realization_spectrum(lattice, dist, sampling.seed, r, false)?;
            let counts: Vec<f64> = intervals.iter().map(|iv| count_in(&sys.values, iv) as f64).collect();
            let mut v = McVector::new(intervals.len());
            v.push(&counts);
            Ok(v)
        },
        |mut a, b| {
            a.merge(&b);
            a
        },
    )?;
    let rho = dist.density_sup();
    let volume = lattice.volume() as f64;
    Ok(intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let scale = rho * iv.width() * volume;
            let a = acc.get(i);
            let ratio = a.mean() / scale;
            let ratio_stderr = a.stderr() / scale;
            WegnerReport {
                interval: *iv,
                mean_trace: a.mean(),
                mean_trace_stderr: a.stderr(),
                ratio,
                ratio_stderr,
                flagged: ratio - 3.0 * ratio_stderr > 1.0,
                samples: sampling.samples,
                volume: lattice.volume(),
            }
        })
        .collect())
}

pub fn wegner_ratio(
    lattice: &Lattice,
    dist: &DistributionSpec,
    interval: EnergyInterval,
    sampling: &Sampling,
) -> Result<WegnerReport> {
    Ok(wegner_ratios(lattice, dist, &[interval], sampling)?.remove(0))
}

/// Conditional average `𝔼_{ω_site}⟨δ_site, P(I) δ_site⟩` against `‖ρ‖∞ |I|`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralAveragingReport {
    pub site: usize,
    pub interval: EnergyInterval,
    pub average: f64,
    pub stderr: f64,
    pub bound: f64,
    /// Average exceeds the bound by more than three standard errors.
    pub violated: bool,
    pub samples: u64,
}

/// For each outer realization the couplings away from `site` are redrawn,
/// and the average over `ω_site` is a Gauss–Legendre integral against `ρ`.
pub fn spectral_averaging_audit(
    lattice: &Lattice,
    dist: &DistributionSpec,
    site: usize,
    intervals: &[EnergyInterval],
    sampling: &Sampling,
) -> Result<Vec<SpectralAveragingReport>> {
    if site >= lattice.volume() {
        return Err(LabError::InvalidArgument(format!("site {site} outside the box")));
    }
    let rule: Vec<(f64, f64)> = dist
        .pieces()
        .into_iter()
        .flat_map(|(lo, hi, p)| {
            gauss_legendre_on(SPECTRAL_AVERAGING_NODES, lo, hi)
                .into_iter()
                .map(move |(x, w)| (x, w * p))
        })
        .collect();
    let acc = map_reduce(
        sampling,
        || McVector::new(intervals.len()),
        |r| {
            let mut field = sample_disorder(dist, lattice, sampling.seed, r);
            let mut inner = vec![0.0; intervals.len()];
            for &(x, w) in &rule {
                field.values[site] = x;
                let h = assemble_hamiltonian(lattice, &field)?;
                let sys = eigensolve(&h, true, lattice.volume_cap)?;
                for (slot, iv) in inner.iter_mut().zip(intervals) {
                    *slot += w * local_spectral_weight(&sys, site, iv)?;
                }
            }
            let mut v = McVector::new(intervals.len());
            v.push(&inner);
            Ok(v)
        },
        |mut a, b| {
            a.merge(&b);
            a
        },
    )?;
    let rho = dist.density_sup();
    Ok(intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let a: &McAccumulator = acc.get(i);
            let bound = rho * iv.width();
            let stderr = a.stderr();
            SpectralAveragingReport {
                site,
                interval: *iv,
                average: a.mean(),
                stderr,
                bound,
                violated: a.mean() - 3.0 * stderr.max(0.0) > bound,
                samples: sampling.samples,
            }
        })
        .collect())
}
