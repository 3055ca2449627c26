use serde::Serialize;

use super::{map_collect, realization_spectrum, spectral_top, Sampling};
use crate::error::{LabError, Result};
use crate::lattice::{DistributionSpec, Lattice};
use crate::rng::{stream, unit_f64, DOMAIN_SYNTHETIC};

/// Mean of `min(s_i, s_{i+1}) / max(s_i, s_{i+1})` for independent exponential spacings.
pub const POISSON_SPACING_RATIO: f64 = 2.0 * std::f64::consts::LN_2 - 1.0;

const MIN_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinamiParams {
    /// Reference energy; `None` picks the DOS peak of the lower band.
    pub energy: Option<f64>,
    /// Window half-width in expected spacings `1 / n̂(E)`.
    pub window_spacings: f64,
    /// Histogram bins over `[0, top]` used for `n̂`.
    pub bins: usize,
}

impl Default for MinamiParams {
    fn default() -> Self {
        Self { energy: None, window_spacings: 5.0, bins: 100 }
    }
}

/// Count and spacing statistics of rescaled points.
#[derive(Debug, Clone, Serialize)]
pub struct PoissonDiagnostics {
    pub realizations: usize,
    pub points: usize,
    pub count_mean: f64,
    pub count_variance: f64,
    /// Variance over mean of the window counts; 1 for a Poisson process.
    pub variance_ratio: f64,
    /// Kolmogorov distance of the spacings to `Exp(intensity)`.
    pub ks_distance: f64,
    pub spacing_ratio_mean: f64,
    pub spacing_ratio_stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinamiReport {
    pub energy: f64,
    pub intensity: f64,
    /// Rescaled half-width `W`; points are kept in `[−W, W]`.
    pub half_width: f64,
    pub rescale: f64,
    /// `|Λ|(λ − E)` in the window, sorted, per realization.
    pub points: Vec<Vec<f64>>,
    pub diagnostics: PoissonDiagnostics,
    /// Same diagnostics on i.i.d. uniform points with matching size and intensity.
    pub reference: PoissonDiagnostics,
    pub samples: u64,
}

/// Diagnostics of sorted rescaled spectra.
///
/// Counts use the window `[−W, W]`. Spacings and spacing ratios are taken at
/// every point in the window, against its neighbours in the whole sequence,
/// so for a Poisson process they are exactly exponential (no window bias).
pub fn poisson_diagnostics(sequences: &[Vec<f64>], half_width: f64, intensity: f64) -> Result<PoissonDiagnostics> {
    if !(half_width > 0.0) || !(intensity > 0.0) {
        return Err(LabError::InvalidArgument("window and intensity must be positive".into()));
    }
    let mut counts = Vec::with_capacity(sequences.len());
    let mut spacings = Vec::new();
    let mut ratios = Vec::new();
    for seq in sequences {
        let lo = seq.partition_point(|&x| x < -half_width);
        let hi = seq.partition_point(|&x| x <= half_width);
        counts.push((hi - lo) as f64);
        for i in lo..hi {
            if i + 1 < seq.len() {
                spacings.push(seq[i + 1] - seq[i]);
            }
            if i > 0 && i + 1 < seq.len() {
                let (a, b) = (seq[i] - seq[i - 1], seq[i + 1] - seq[i]);
                let r = a.min(b) / a.max(b);
                ratios.push(if r.is_nan() { 1.0 } else { r });
            }
        }
    }
    let points: usize = counts.iter().map(|&c| c as usize).sum();
    if points < MIN_POINTS {
        return Err(LabError::InsufficientData(format!(
            "{points} points in the window over all realizations, need at least {MIN_POINTS}"
        )));
    }
    let (count_mean, count_variance) = mean_var(&counts);
    let (spacing_ratio_mean, ratio_var) = mean_var(&ratios);

    spacings.sort_by(f64::total_cmp);
    let n = spacings.len() as f64;
    let ks_distance = spacings
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = 1.0 - (-intensity * s).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);

    Ok(PoissonDiagnostics {
        realizations: sequences.len(),
        points,
        count_mean,
        count_variance,
        variance_ratio: count_variance / count_mean,
        ks_distance,
        spacing_ratio_mean,
        spacing_ratio_stderr: (ratio_var / ratios.len() as f64).sqrt(),
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// I.i.d. uniform sequences of `points` each, with density `intensity`,
/// centred at 0.
pub fn poisson_reference(seed: u64, realizations: u64, points: usize, intensity: f64) -> Vec<Vec<f64>> {
    let half = points as f64 / (2.0 * intensity);
    (0..realizations)
        .map(|r| {
            let mut rng = stream(seed, DOMAIN_SYNTHETIC, r);
            let mut v: Vec<f64> = (0..points).map(|_| half * (2.0 * unit_f64(&mut rng) - 1.0)).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect()
}

fn histogram(pooled: &[Vec<f64>], top: f64, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    let width = top / bins as f64;
    for x in pooled.iter().flatten() {
        let b = ((x / width).floor().max(0.0) as usize).min(bins - 1);
        h[b] += 1;
    }
    h
}

/// Center of the most populated bin in `[0, top/2]`.
pub fn lower_band_peak(counts: &[u64], top: f64) -> f64 {
    let width = top / counts.len() as f64;
    let half = (counts.len() / 2).max(1);
    let (best, _) = counts[..half]
        .iter()
        .enumerate()
        .fold((0, 0), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) });
    (best as f64 + 0.5) * width
}

pub fn minami_statistics(
    lattice: &Lattice,
    dist: &DistributionSpec,
    params: &MinamiParams,
    sampling: &Sampling,
) -> Result<MinamiReport> {
    if params.bins == 0 || !(params.window_spacings > 0.0) {
        return Err(LabError::InvalidArgument("bins and window must be positive".into()));
    }
    let spectra = map_collect(sampling, |r| Ok(realization_spectrum(lattice, dist, sampling.seed, r, false)?.values))?;
    let top = spectral_top(lattice, dist);
    let counts = histogram(&spectra, top, params.bins);
    let width = top / params.bins as f64;
    let energy = params.energy.unwrap_or_else(|| lower_band_peak(&counts, top));
    if !(0.0..=top).contains(&energy) {
        return Err(LabError::InvalidArgument(format!("energy {energy} outside [0, {top}]")));
    }
    let bin = ((energy / width) as usize).min(params.bins - 1);
    let volume = lattice.volume() as f64;
    let intensity = counts[bin] as f64 / (sampling.samples as f64 * volume * width);
    if intensity == 0.0 {
        return Err(LabError::InsufficientData(format!("no eigenvalues near E = {energy}")));
    }
    let half_width = params.window_spacings / intensity;

    let rescaled: Vec<Vec<f64>> = spectra
        .iter()
        .map(|vals| vals.iter().map(|&l| volume * (l - energy)).collect())
        .collect();
    let diagnostics = poisson_diagnostics(&rescaled, half_width, intensity)?;
    let reference = poisson_diagnostics(
        &poisson_reference(sampling.seed, sampling.samples, lattice.volume(), intensity),
        half_width,
        intensity,
    )?;
    let points = rescaled
        .into_iter()
        .map(|seq| seq.into_iter().filter(|x| x.abs() <= half_width).collect())
        .collect();

    Ok(MinamiReport {
        energy,
        intensity,
        half_width,
        rescale: volume,
        points,
        diagnostics,
        reference,
        samples: sampling.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_box;

    #[test]
    fn uniform_points_look_poisson() {
        let seqs = poisson_reference(3, 400, 2000, 1.0);
        let d = poisson_diagnostics(&seqs, 5.0, 1.0).unwrap();
        // binomial counts: variance / mean = 1 − 10/2000
        assert!((d.variance_ratio - 0.995).abs() < 0.15, "{}", d.variance_ratio);
        assert!((d.spacing_ratio_mean - POISSON_SPACING_RATIO).abs() < 4.0 * d.spacing_ratio_stderr);
        assert!(d.ks_distance < 1.63 / (d.points as f64).sqrt());
    }

    #[test]
    fn picket_fence_has_no_count_variance() {
        // lattice offset by 1/2 so no point sits on the window edge
        let seq: Vec<f64> = (-50..50).map(|i| i as f64 + 0.5).collect();
        let seqs = vec![seq; 30];
        let d = poisson_diagnostics(&seqs, 5.0, 1.0).unwrap();
        assert_eq!(d.count_mean, 10.0);
        assert_eq!(d.count_variance, 0.0);
        assert_eq!(d.spacing_ratio_mean, 1.0);
        // every spacing equals 1: distance is max(F(1), 1 − F(1))
        assert!((d.ks_distance - (1.0 - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let seqs = vec![vec![-1.0, 0.0, 1.0]; 10];
        assert!(matches!(poisson_diagnostics(&seqs, 2.0, 1.0), Err(LabError::InsufficientData(_))));
    }

    #[test]
    fn peak_search_stays_in_lower_half() {
        let counts = [1, 5, 3, 2, 9, 9];
        assert_eq!(lower_band_peak(&counts, 6.0), 1.5);
    }

    #[test]
    fn strong_disorder_statistics() {
        let lat = build_box(1, 128, None, 4096).unwrap();
        let dist = DistributionSpec::uniform(0.0, 5.0).unwrap();
        let rep = minami_statistics(&lat, &dist, &MinamiParams::default(), &Sampling::new(200, 8)).unwrap();
        assert!(rep.energy < 4.5);
        assert!((rep.half_width * rep.intensity - 5.0).abs() < 1e-12);
        for p in &rep.points {
            assert!(p.windows(2).all(|w| w[0] <= w[1]));
            assert!(p.iter().all(|x| x.abs() <= rep.half_width));
        }
        // counts at this size are sub-Poisson (level repulsion within a localization
        // length); the spacing ratio is already close to the Poisson value
        assert!(rep.diagnostics.variance_ratio < 1.2);
        assert!((rep.reference.variance_ratio - 1.0).abs() < 0.25);
        assert!((rep.diagnostics.spacing_ratio_mean - rep.reference.spacing_ratio_mean).abs() < 0.06);
    }
}
