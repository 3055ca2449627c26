use serde::Serialize;

use super::{map_reduce, realization_spectrum, McVector, Sampling};
use crate::error::{LabError, Result};
use crate::lattice::{DistributionSpec, Lattice};
use crate::spectral::count_below;

/// Monte Carlo estimate of `N^{(Λ)}(E) = 𝔼{|Λ|^{-1} tr χ_{(-∞,E]}(H)}` on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
    pub volume: usize,
    pub dim: usize,
    pub side: usize,
    pub distribution: String,
    pub seed: u64,
}

pub fn estimate_ids(lattice: &Lattice, dist: &DistributionSpec, grid: &[f64], sampling: &Sampling) -> Result<IdsCurve> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidArgument("energy grid must be non-empty and strictly increasing".into()));
    }
    if lattice.volume() > lattice.volume_cap {
        return Err(LabError::VolumeCap { volume: lattice.volume(), cap: lattice.volume_cap });
    }
    let volume = lattice.volume() as f64;
    let acc = map_reduce(
        sampling,
        || McVector::new(grid.len()),
        |r| {
            let sys = realization_spectrum(lattice, dist, sampling.seed, r, false)?;
            let fractions: Vec<f64> = grid.iter().map(|&e| count_below(&sys.values, e) as f64 / volume).collect();
            let mut v = McVector::new(grid.len());
            v.push(&fractions);
            Ok(v)
        },
        |mut a, b| {
            a.merge(&b);
            a
        },
    )?;
    Ok(IdsCurve {
        energies: grid.to_vec(),
        values: acc.means(),
        stderr: acc.stderrs(),
        samples: sampling.samples,
        volume: lattice.volume(),
        dim: lattice.dim(),
        side: lattice.side(),
        distribution: dist.to_string(),
        seed: sampling.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;
    use std::f64::consts::PI;

    fn free_counting(l: usize, e: f64) -> f64 {
        let n = (0..l)
            .filter(|&k| 2.0 - 2.0 * (2.0 * PI * k as f64 / l as f64).cos() <= e)
            .count();
        n as f64 / l as f64
    }

    #[test]
    fn near_zero_disorder_matches_free_counting() {
        let lat = build_box(1, 64, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1e-12).unwrap();
        // grid points away from the free eigenvalues
        let grid: Vec<f64> = (0..20).map(|i| 0.013 + 0.2 * i as f64).collect();
        let curve = estimate_ids(&lat, &dist, &grid, &Sampling::new(4, 1)).unwrap();
        for (e, v) in grid.iter().zip(&curve.values) {
            assert_eq!(*v, free_counting(64, *e), "E = {e}");
        }
    }

    #[test]
    fn edges_of_the_spectrum() {
        let lat = build_box(1, 16, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let curve = estimate_ids(&lat, &dist, &[-0.1, 5.0], &Sampling::new(10, 3)).unwrap();
        assert_eq!(curve.values, vec![0.0, 1.0]);
    }

    #[test]
    fn monotone_and_worker_independent() {
        let lat = build_box(1, 32, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..50).map(|i| 0.1 * i as f64).collect();
        let one = estimate_ids(&lat, &dist, &grid, &Sampling::new(40, 9)).unwrap();
        let four = estimate_ids(&lat, &dist, &grid, &Sampling::new(40, 9).with_workers(4)).unwrap();
        assert!(one.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(one.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for (a, b) in one.values.iter().zip(&four.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in one.stderr.iter().zip(&four.stderr) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let lat = build_box(1, 8, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1.0).unwrap();
        assert!(estimate_ids(&lat, &dist, &[0.2, 0.1], &Sampling::new(1, 0)).is_err());
        assert!(estimate_ids(&lat, &dist, &[0.2], &Sampling::new(0, 0)).is_err());
    }
}
