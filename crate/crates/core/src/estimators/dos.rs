use serde::Serialize;

use super::{map_reduce, realization_spectrum, spectral_top, McVector, Sampling};
use crate::error::{LabError, Result};
use crate::lattice::{DistributionSpec, Lattice};

// Eigenvalues within this distance outside the histogram range are roundoff
// of spectral edges (e.g. the zero mode of the free Laplacian).
const EDGE_SLACK: f64 = 1e-9;

/// Histogram estimate of the density of states `n(E) = N'(E)`.
///
/// Bin `i` is `(edges[i], edges[i+1]]`, except the first, which is closed.
#[derive(Debug, Clone, Serialize)]
pub struct DosEstimate {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Eigenvalues pooled over all realizations, per bin.
    pub pooled_counts: Vec<u64>,
    /// 95% upper bound for bins that saw no eigenvalue (rule of three).
    pub zero_count_upper: Vec<Option<f64>>,
    /// Gaussian-kernel smoothing of the histogram at bin centers (advisory).
    pub smoothed: Vec<f64>,
    pub bandwidth: f64,
    pub samples: u64,
    pub volume: usize,
}

impl DosEstimate {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `Σ n̂ Δ`.
    pub fn total_mass(&self) -> f64 {
        self.density.iter().zip(self.widths()).map(|(n, w)| n * w).sum()
    }

    /// Bin containing `e`, if any.
    pub fn bin_of(&self, e: f64) -> Option<usize> {
        bin_index(&self.edges, e)
    }
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if x < edges[0] - EDGE_SLACK || x > edges[last] + EDGE_SLACK {
        return None;
    }
    // first i with x <= edges[i+1]
    let i = edges[1..].partition_point(|&e| e < x);
    Some(i.min(last - 1))
}

fn smooth(centers: &[f64], masses: &[f64], bandwidth: f64) -> Vec<f64> {
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    centers
        .iter()
        .map(|&x| {
            centers
                .iter()
                .zip(masses)
                .map(|(&c, &m)| m * norm * (-0.5 * ((x - c) / bandwidth).powi(2)).exp())
                .sum()
        })
        .collect()
}

pub fn estimate_dos(
    lattice: &Lattice,
    dist: &DistributionSpec,
    edges: &[f64],
    sampling: &Sampling,
    bandwidth: Option<f64>,
) -> Result<DosEstimate> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidArgument("bin edges must be strictly increasing".into()));
    }
    let top = spectral_top(lattice, dist);
    if edges[0] > 0.0 || edges[edges.len() - 1] < top {
        return Err(LabError::InvalidArgument(format!(
            "bins must cover [0, {top}] (got [{}, {}])",
            edges[0],
            edges[edges.len() - 1]
        )));
    }
    let nbins = edges.len() - 1;
    let widths: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let volume = lattice.volume() as f64;

    let (acc, pooled) = map_reduce(
        sampling,
        || (McVector::new(nbins), vec![0u64; nbins]),
        |r| {
            let sys = realization_spectrum(lattice, dist, sampling.seed, r, false)?;
            let mut counts = vec![0u64; nbins];
            for &l in &sys.values {
                let b = bin_index(edges, l).ok_or_else(|| {
                    LabError::InvalidArgument(format!("eigenvalue {l} outside the histogram range"))
                })?;
                counts[b] += 1;
            }
            let dens: Vec<f64> = counts
                .iter()
                .zip(&widths)
                .map(|(&c, &w)| c as f64 / (volume * w))
                .collect();
            let mut v = McVector::new(nbins);
            v.push(&dens);
            Ok((v, counts))
        },
        |(mut a, mut ca), (b, cb)| {
            a.merge(&b);
            for (x, y) in ca.iter_mut().zip(cb) {
                *x += y;
            }
            (a, ca)
        },
    )?;

    let density = acc.means();
    let trials = sampling.samples as f64 * volume;
    let zero_count_upper = pooled
        .iter()
        .zip(&widths)
        .map(|(&c, &w)| (c == 0).then(|| 3.0 / (trials * w)))
        .collect();
    let bandwidth = bandwidth.unwrap_or_else(|| 2.0 * widths.iter().copied().fold(0.0, f64::max));
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let masses: Vec<f64> = density.iter().zip(&widths).map(|(n, w)| n * w).collect();
    let smoothed = smooth(&centers, &masses, bandwidth);

    Ok(DosEstimate {
        edges: edges.to_vec(),
        density,
        stderr: acc.stderrs(),
        pooled_counts: pooled,
        zero_count_upper,
        smoothed,
        bandwidth,
        samples: sampling.samples,
        volume: lattice.volume(),
    })
}
