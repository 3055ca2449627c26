use rand::Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::estimators::{map_collect, Sampling};
use crate::lattice::{
    assemble_hamiltonian, choose_decoupling_sublattice, mask_potential, sample_disorder, DisorderField,
    DistributionSpec, Lattice, SublatticeSpec,
};
use crate::rng::{stream, DOMAIN_AUX};
use crate::spectral::{eigensolve, local_spectral_weight, EigenSystem, EnergyInterval, Heat};

/// Per-entry slack allowed in the exact heat-kernel inequalities.
pub const HEAT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HeatComparison {
    pub site: usize,
    pub t: f64,
    /// `⟨δ_r, e^{−tH_ω} δ_r⟩`.
    pub heat_full: f64,
    /// `⟨δ_r, e^{−tH_{ω_Γ}} δ_r⟩`.
    pub heat_masked: f64,
    /// `⟨δ_r, χ_{(−∞,4E]}(H_{ω_Γ}) δ_r⟩`.
    pub projection: f64,
    /// `heat_masked − heat_full`, non-negative in exact arithmetic.
    pub monotone_slack: f64,
    /// `projection + e^{−4tE} − heat_masked`, non-negative in exact arithmetic.
    pub split_slack: f64,
}

impl HeatComparison {
    pub fn holds(&self) -> bool {
        self.monotone_slack >= -HEAT_TOLERANCE && self.split_slack >= -HEAT_TOLERANCE
    }
}

fn masked_field(lattice: &Lattice, field: &DisorderField, gamma: &SublatticeSpec) -> Result<DisorderField> {
    mask_potential(field, &gamma.sites(lattice))
}

fn compare(full: &EigenSystem, masked: &EigenSystem, site: usize, t: f64, energy: f64) -> Result<HeatComparison> {
    let heat_full = local_spectral_weight(full, site, &Heat { t })?;
    let heat_masked = local_spectral_weight(masked, site, &Heat { t })?;
    let projection = local_spectral_weight(masked, site, &EnergyInterval::below(4.0 * energy))?;
    Ok(HeatComparison {
        site,
        t,
        heat_full,
        heat_masked,
        projection,
        monotone_slack: heat_masked - heat_full,
        split_slack: projection + (-4.0 * t * energy).exp() - heat_masked,
    })
}

/// Heat kernel at `r ∉ Γ` before and after masking the potential off `Γ`,
/// and the split of the masked kernel at energy `4E`.
pub fn heat_comparison(
    lattice: &Lattice,
    field: &DisorderField,
    gamma: &SublatticeSpec,
    site: usize,
    t: f64,
    energy: f64,
) -> Result<HeatComparison> {
    lattice.spec.require_divisible_by_four()?;
    if site >= lattice.volume() {
        return Err(LabError::InvalidArgument(format!("site {site} outside the box")));
    }
    if gamma.contains_site(lattice, site) {
        return Err(LabError::InvalidArgument(format!(
            "site {:?} lies on the sublattice Γ",
            lattice.index.coords(site)
        )));
    }
    if !(t >= 0.0) {
        return Err(LabError::InvalidArgument(format!("t must be non-negative, got {t}")));
    }
    if field.values.iter().any(|&w| w < 0.0) {
        return Err(LabError::InvalidArgument("potential must be non-negative".into()));
    }
    let full = eigensolve(&assemble_hamiltonian(lattice, field)?, true, lattice.volume_cap)?;
    let masked_h = assemble_hamiltonian(lattice, &masked_field(lattice, field, gamma)?)?;
    let masked = eigensolve(&masked_h, true, lattice.volume_cap)?;
    compare(&full, &masked, site, t, energy)
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatCasesReport {
    pub energy: f64,
    pub times: Vec<f64>,
    pub comparisons: Vec<HeatComparison>,
    pub violations: usize,
    pub min_monotone_slack: f64,
    pub min_split_slack: f64,
}

/// For each realization: a random offset `k ≠ 0`, `Γ = Γ_k`, and the
/// comparison at `r ∈ {0, k}` for every `t`.
pub fn heat_cases(
    lattice: &Lattice,
    dist: &DistributionSpec,
    times: &[f64],
    energy: f64,
    sampling: &Sampling,
) -> Result<HeatCasesReport> {
    lattice.spec.require_divisible_by_four()?;
    let zero = lattice.zero_site();
    let per = map_collect(sampling, |r| {
        let mut aux = stream(sampling.seed, DOMAIN_AUX, r);
        let k = loop {
            let s = aux.random_range(0..lattice.volume());
            if s != zero {
                break s;
            }
        };
        let gamma = choose_decoupling_sublattice(lattice, &lattice.index.displacement(zero, k))?;
        let field = sample_disorder(dist, lattice, sampling.seed, r);
        let full = eigensolve(&assemble_hamiltonian(lattice, &field)?, true, lattice.volume_cap)?;
        let masked_h = assemble_hamiltonian(lattice, &masked_field(lattice, &field, &gamma)?)?;
        let masked = eigensolve(&masked_h, true, lattice.volume_cap)?;
        let mut out = Vec::new();
        for site in [zero, k] {
            for &t in times {
                out.push(compare(&full, &masked, site, t, energy)?);
            }
        }
        Ok(out)
    })?;
    let comparisons: Vec<HeatComparison> = per.into_iter().flatten().collect();
    Ok(HeatCasesReport {
        energy,
        times: times.to_vec(),
        violations: comparisons.iter().filter(|c| !c.holds()).count(),
        min_monotone_slack: comparisons.iter().map(|c| c.monotone_slack).fold(f64::INFINITY, f64::min),
        min_split_slack: comparisons.iter().map(|c| c.split_slack).fold(f64::INFINITY, f64::min),
        comparisons,
    })
}
