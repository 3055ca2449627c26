use serde::Serialize;

use super::cutoff::make_cutoff;
use crate::error::{LabError, Result};
use crate::estimators::{map_collect, McAccumulator, Sampling};
use crate::lattice::{
    assemble_hamiltonian, choose_decoupling_sublattice, mask_potential, sample_disorder, DistributionSpec, Lattice,
};
use crate::spectral::{eigensolve, EigenSystem, EnergyInterval, Heat, SpectralFn};

/// Slack for the per-realization Cauchy–Schwarz chain.
pub const CHAIN_TOLERANCE: f64 = 1e-9;

/// `(ε, E)` and the heat time `t_E = (4E)^{−d/2−1+ε} − (1+2d) ln 2 / (4E)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecouplingParams {
    pub dim: usize,
    pub epsilon: f64,
    pub energy: f64,
    pub t_e: f64,
    /// `t_E > 0`.
    pub valid: bool,
}

impl DecouplingParams {
    pub fn new(dim: usize, epsilon: f64, energy: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < dim as f64 / 2.0) {
            return Err(LabError::InvalidArgument(format!("ε must lie in (0, {}), got {epsilon}", dim as f64 / 2.0)));
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(LabError::InvalidArgument(format!("E must be positive, got {energy}")));
        }
        let d = dim as f64;
        let x = 4.0 * energy;
        let t_e = x.powf(-d / 2.0 - 1.0 + epsilon) - (1.0 + 2.0 * d) * std::f64::consts::LN_2 / x;
        Ok(Self { dim, epsilon, energy, t_e, valid: t_e > 0.0 })
    }

    /// `4^{d+1} e^{−(4E)^{−d/2+ε}}`, equal to `2 e^{−4 t_E E}`.
    pub fn sublattice_bound(&self) -> f64 {
        let d = self.dim as f64;
        4f64.powf(d + 1.0) * (-(4.0 * self.energy).powf(-d / 2.0 + self.epsilon)).exp()
    }

    /// Relative gap in `e^{−4 t_E E} = 2·4^d e^{−(4E)^{−d/2+ε}}`; zero up to roundoff.
    pub fn identity_residual(&self) -> f64 {
        let lhs = (-4.0 * self.t_e * self.energy).exp();
        let rhs = 0.5 * self.sublattice_bound();
        (lhs - rhs).abs() / rhs
    }

    /// Relative gap when the exponent is written `−d/2−1+ε`, which the
    /// formula for `t_E` does not satisfy.
    pub fn printed_identity_residual(&self) -> f64 {
        let d = self.dim as f64;
        let lhs = (-4.0 * self.t_e * self.energy).exp();
        let rhs = 2.0 * 4f64.powf(d) * (-(4.0 * self.energy).powf(-d / 2.0 - 1.0 + self.epsilon)).exp();
        (lhs - rhs).abs() / rhs
    }
}

/// One realization of the chain
/// `tr P(I)Π₀ ≤ tr P(I)Π₀P̃₀ ≤ Σ_k ‖P(I)Π₀‖₂‖P(I)Π_k‖₂‖Π₀P̃₀Π_k‖ ≤ ½Σ_k (P₀₀ + P_kk)‖Π₀P̃₀Π_k‖`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainTerms {
    pub levels: [f64; 4],
}

impl ChainTerms {
    /// Smallest `levels[i+1] − levels[i]`.
    pub fn min_gap(&self) -> f64 {
        self.levels.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct SiteTerms {
    pub site: usize,
    /// `⟨δ_r, P̃₀ δ_r⟩`.
    pub cutoff: McAccumulator,
    /// `⟨δ_r, e^{−t_E H_{ω_Γ}} δ_r⟩`, when `t_E > 0`.
    pub heat: McAccumulator,
    /// `⟨δ_r, χ_{(−∞,4E]}(H_{ω_Γ}) δ_r⟩`.
    pub projection: McAccumulator,
    /// Average of the same over the orbit `r + (4ℤ)^d`.
    pub orbit_average: McAccumulator,
    /// Paired difference `projection − orbit_average`.
    pub translation_gap: McAccumulator,
    /// Per-realization failures of the heat-time chain, when `t_E > 0`.
    pub heat_violations: usize,
}

impl SiteTerms {
    /// The translation identity holds in mean within three standard errors.
    pub fn translation_consistent(&self) -> bool {
        let se = self.translation_gap.stderr();
        let mean = self.translation_gap.mean();
        if se.is_nan() || se == 0.0 {
            return mean.abs() <= 1e-12;
        }
        mean.abs() <= 3.0 * se
    }
}

#[derive(Debug, Clone)]
pub struct DecouplingReport {
    pub params: DecouplingParams,
    pub interval: EnergyInterval,
    pub offset: Vec<i64>,
    pub sublattice_offset: Vec<i64>,
    pub chains: Vec<ChainTerms>,
    pub chain_violations: usize,
    pub min_chain_gap: f64,
    /// `N̂_Γ(4E) = 𝔼 |Λ|^{-1} tr χ_{(−∞,4E]}(H_{ω_Γ})`.
    pub sublattice_ids: McAccumulator,
    pub sites: Vec<SiteTerms>,
    /// Per-realization failures of `Σ_{orbit} ≤ tr`.
    pub ergodic_violations: usize,
    pub samples: u64,
}

impl DecouplingReport {
    /// `4^d N̂_Γ(4E)`.
    pub fn ergodic_bound(&self) -> f64 {
        4f64.powi(self.params.dim as i32) * self.sublattice_ids.mean()
    }
}

fn chain(sys: &EigenSystem, sys0: &EigenSystem, zero: usize, interval: &EnergyInterval, cutoff: &impl SpectralFn) -> Result<ChainTerms> {
    let p_row = sys.function_row(zero, interval)?;
    let pt_row = sys0.function_row(zero, cutoff)?;
    let v = sys.vectors.as_ref().ok_or(LabError::MissingVectors)?;
    let inside: Vec<usize> = (0..sys.dim()).filter(|&i| interval.contains(sys.values[i])).collect();
    let p_diag: Vec<f64> = (0..sys.dim())
        .map(|k| inside.iter().map(|&i| v[(k, i)] * v[(k, i)]).sum())
        .collect();
    let p00 = p_diag[zero];
    let l1: f64 = p_row.iter().zip(&pt_row).map(|(a, b)| a * b).sum();
    let l2: f64 = (0..sys.dim()).map(|k| (p00 * p_diag[k]).sqrt() * pt_row[k].abs()).sum();
    let l3: f64 = (0..sys.dim()).map(|k| 0.5 * (p00 + p_diag[k]) * pt_row[k].abs()).sum();
    Ok(ChainTerms { levels: [p00, l1, l2, l3] })
}

#[derive(Debug, Clone)]
struct Realization {
    chain: ChainTerms,
    ids: f64,
    ergodic_ok: bool,
    // per site: cutoff, heat, projection, orbit average, heat chain ok
    sites: Vec<(f64, f64, f64, f64, bool)>,
}

/// Chain, heat and translation checks on `Γ = Γ_k` with `k = e₁`.
pub fn evaluate_decoupling_bound(
    lattice: &Lattice,
    dist: &DistributionSpec,
    params: &DecouplingParams,
    interval: Option<EnergyInterval>,
    sampling: &Sampling,
) -> Result<DecouplingReport> {
    lattice.spec.require_divisible_by_four()?;
    if params.dim != lattice.dim() {
        return Err(LabError::Mismatch(format!("params for d = {}, box has d = {}", params.dim, lattice.dim())));
    }
    let e = params.energy;
    let interval = interval.unwrap_or(EnergyInterval::new(0.0, e)?);
    if !interval.is_subset_of(&EnergyInterval::new(f64::NEG_INFINITY, e)?) {
        return Err(LabError::InvalidInterval(format!("I must lie below E = {e}")));
    }
    let cutoff = make_cutoff(e)?;
    let d = lattice.dim();
    let zero = lattice.zero_site();
    let mut offset = vec![0i64; d];
    offset[0] = 1;
    let k = lattice.index.translate(zero, &offset);
    let gamma = choose_decoupling_sublattice(lattice, &offset)?;
    let gamma_sites = gamma.sites(lattice);
    let low = EnergyInterval::below(4.0 * e);
    let t = params.t_e;
    let volume = lattice.volume() as f64;
    let orbits: Vec<Vec<usize>> = [zero, k]
        .iter()
        .map(|&r| {
            let base = lattice.index.coords(r);
            (0..lattice.volume())
                .filter(|&s| {
                    let c = lattice.index.coords(s);
                    c.iter().zip(&base).all(|(a, b)| (a - b).rem_euclid(4) == 0)
                })
                .collect()
        })
        .collect();

    let rows = map_collect(sampling, |r| {
        let field = sample_disorder(dist, lattice, sampling.seed, r);
        let sys = eigensolve(&assemble_hamiltonian(lattice, &field)?, true, lattice.volume_cap)?;
        let mut perp = field.clone();
        perp.values[zero] = 0.0;
        let sys0 = eigensolve(&assemble_hamiltonian(lattice, &perp)?, true, lattice.volume_cap)?;
        let masked = mask_potential(&field, &gamma_sites)?;
        let sys_g = eigensolve(&assemble_hamiltonian(lattice, &masked)?, true, lattice.volume_cap)?;

        let chain = chain(&sys, &sys0, zero, &interval, &cutoff)?;
        let proj_diag: Vec<f64> = {
            let v = sys_g.vectors.as_ref().ok_or(LabError::MissingVectors)?;
            let n = sys_g.values.partition_point(|&l| l <= 4.0 * e);
            (0..sys_g.dim()).map(|s| (0..n).map(|i| v[(s, i)] * v[(s, i)]).sum()).collect()
        };
        let trace = sys_g.trace_of(&low);
        let mut ergodic_ok = true;
        let mut sites = Vec::new();
        for (&r, orbit) in [zero, k].iter().zip(&orbits) {
            let cut = sys0.function_row(r, &cutoff)?[r];
            let orbit_sum: f64 = orbit.iter().map(|&s| proj_diag[s]).sum();
            ergodic_ok &= orbit_sum <= trace + CHAIN_TOLERANCE;
            let (heat, heat_ok) = if params.valid {
                let w = (2.0 * t * e).exp();
                let heat_perp = crate::spectral::local_spectral_weight(&sys0, r, &Heat { t })?;
                let heat_g = crate::spectral::local_spectral_weight(&sys_g, r, &Heat { t })?;
                let ok = cut <= w * heat_perp * (1.0 + CHAIN_TOLERANCE) + CHAIN_TOLERANCE
                    && heat_perp <= heat_g + CHAIN_TOLERANCE
                    && heat_g <= proj_diag[r] + (-4.0 * t * e).exp() + CHAIN_TOLERANCE;
                (heat_g, ok)
            } else {
                (f64::NAN, true)
            };
            sites.push((cut, heat, proj_diag[r], orbit_sum / orbit.len() as f64, heat_ok));
        }
        Ok(Realization { chain, ids: trace / volume, ergodic_ok, sites })
    })?;

    let mut sublattice_ids = McAccumulator::default();
    let mut sites: Vec<SiteTerms> = [zero, k]
        .iter()
        .map(|&site| SiteTerms {
            site,
            cutoff: McAccumulator::default(),
            heat: McAccumulator::default(),
            projection: McAccumulator::default(),
            orbit_average: McAccumulator::default(),
            translation_gap: McAccumulator::default(),
            heat_violations: 0,
        })
        .collect();
    for row in &rows {
        sublattice_ids.push(row.ids);
        for (acc, &(cut, heat, proj, orbit, ok)) in sites.iter_mut().zip(&row.sites) {
            acc.cutoff.push(cut);
            if params.valid {
                acc.heat.push(heat);
            }
            acc.projection.push(proj);
            acc.orbit_average.push(orbit);
            acc.translation_gap.push(proj - orbit);
            acc.heat_violations += usize::from(!ok);
        }
    }
    let chains: Vec<ChainTerms> = rows.iter().map(|r| r.chain).collect();
    Ok(DecouplingReport {
        params: *params,
        interval,
        offset,
        sublattice_offset: gamma.offset.clone(),
        chain_violations: chains.iter().filter(|c| c.min_gap() < -CHAIN_TOLERANCE).count(),
        min_chain_gap: chains.iter().map(|c| c.min_gap()).fold(f64::INFINITY, f64::min),
        chains,
        sublattice_ids,
        sites,
        ergodic_violations: rows.iter().filter(|r| !r.ergodic_ok).count(),
        samples: sampling.samples,
    })
}
