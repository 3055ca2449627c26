use serde::Serialize;

use super::cutoff::make_cutoff;
use crate::error::{LabError, Result};
use crate::estimators::{map_reduce, McVector, Sampling};
use crate::lattice::{assemble_hamiltonian, sample_disorder, DistributionSpec, Lattice};
use crate::spectral::eigensolve;

/// Averaged kernel `|⟨δ₀, f_E(H_{ω₀^⊥}) δ_k⟩|` over all torus offsets.
#[derive(Debug, Clone, Serialize)]
pub struct DecayProfile {
    pub energy: f64,
    /// Offset of each site from the origin (minimal image), by site index.
    pub offsets: Vec<Vec<i64>>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Distinct `|k|` shells, ascending, with the shell maximum and its
    /// non-increasing envelope `max_{|k'| ≥ |k|}`.
    pub shells: Vec<(f64, f64, f64)>,
    /// Fit window in `|k|`.
    pub fit_window: (f64, f64),
    /// `−slope` of `log envelope` against `log ⟨k⟩`.
    pub exponent: f64,
    pub samples: u64,
}

/// `⟨k⟩ = sqrt(1 + |k|²)`.
pub fn japanese_bracket(norm: f64) -> f64 {
    (1.0 + norm * norm).sqrt()
}

pub fn kernel_decay_profile(
    lattice: &Lattice,
    dist: &DistributionSpec,
    energy: f64,
    sampling: &Sampling,
) -> Result<DecayProfile> {
    let cutoff = make_cutoff(energy)?;
    let zero = lattice.zero_site();
    let n = lattice.volume();
    let acc = map_reduce(
        sampling,
        || McVector::new(n),
        |r| {
            let mut field = sample_disorder(dist, lattice, sampling.seed, r);
            field.values[zero] = 0.0;
            let h = assemble_hamiltonian(lattice, &field)?;
            let sys = eigensolve(&h, true, lattice.volume_cap)?;
            let row: Vec<f64> = sys.function_row(zero, &cutoff)?.into_iter().map(f64::abs).collect();
            let mut v = McVector::new(n);
            v.push(&row);
            Ok(v)
        },
        |mut a, b| {
            a.merge(&b);
            a
        },
    )?;
    let values = acc.means();
    let offsets: Vec<Vec<i64>> = (0..n).map(|s| lattice.index.displacement(zero, s)).collect();
    let norms: Vec<f64> = offsets
        .iter()
        .map(|k| (k.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt())
        .collect();

    let mut shells: Vec<(f64, f64, f64)> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
    for &s in &order {
        match shells.last_mut() {
            Some(last) if last.0 == norms[s] => last.1 = last.1.max(values[s]),
            _ => shells.push((norms[s], values[s], 0.0)),
        }
    }
    let mut running: f64 = 0.0;
    for shell in shells.iter_mut().rev() {
        running = running.max(shell.1);
        shell.2 = running;
    }

    let fit_window = (2.0, lattice.side() as f64 / 4.0);
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .filter(|s| s.0 >= fit_window.0 && s.0 <= fit_window.1)
        .map(|s| (japanese_bracket(s.0).ln(), s.2.ln()))
        .collect();
    if pts.len() < 2 || pts.iter().any(|p| !p.1.is_finite()) {
        return Err(LabError::InsufficientData(format!(
            "decay fit over |k| in [{}, {}] has {} usable shells",
            fit_window.0,
            fit_window.1,
            pts.iter().filter(|p| p.1.is_finite()).count()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();

    Ok(DecayProfile {
        energy,
        offsets,
        values,
        stderr: acc.stderrs(),
        shells,
        fit_window,
        exponent: -sxy / sxx,
        samples: sampling.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;
    use crate::spectral::SpectralFn;
    use std::f64::consts::PI;

    #[test]
    fn free_kernel_matches_fourier_sum() {
        // ω ≡ 0 up to 1e-12: f_E(−Δ)(0, k) = L^{-1} Σ_q f_E(2 − 2cos q) cos(qk)
        let l = 32;
        let lat = build_box(1, l, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1e-12).unwrap();
        let e = 0.7;
        let prof = kernel_decay_profile(&lat, &dist, e, &Sampling::new(1, 0)).unwrap();
        let f = make_cutoff(e).unwrap();
        for (s, k) in prof.offsets.iter().enumerate() {
            let exact: f64 = (0..l)
                .map(|j| {
                    let q = 2.0 * PI * j as f64 / l as f64;
                    f.eval(2.0 - 2.0 * q.cos()) * (q * k[0] as f64).cos()
                })
                .sum::<f64>()
                / l as f64;
            assert!((prof.values[s] - exact.abs()).abs() < 1e-10, "k = {k:?}");
        }
    }

    #[test]
    fn diagonal_entry_is_a_contraction() {
        let lat = build_box(1, 32, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let prof = kernel_decay_profile(&lat, &dist, 0.5, &Sampling::new(5, 2)).unwrap();
        assert!(prof.values[lat.zero_site()] <= 1.0);
        assert!(prof.values.iter().all(|&v| v >= 0.0));
        assert!(prof.shells.windows(2).all(|w| w[1].2 <= w[0].2));
        assert_eq!(prof.shells[0].0, 0.0);
    }

    #[test]
    fn degenerate_window() {
        let lat = build_box(1, 8, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 1.0).unwrap();
        assert!(matches!(
            kernel_decay_profile(&lat, &dist, 0.5, &Sampling::new(1, 0)),
            Err(LabError::InsufficientData(_))
        ));
    }
}
