use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Lattice;
use crate::error::{LabError, Result};
use crate::rng;

const NORMALIZATION_TOL: f64 = 1e-10;

/// Single-site law `μ` with bounded density `ρ` and `inf supp μ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DistributionSpec {
    /// Uniform on `[0, upper]`.
    Uniform { upper: f64 },
    /// Density `densities[i]` on `[edges[i], edges[i+1])`.
    PiecewiseConstant { edges: Vec<f64>, densities: Vec<f64> },
}

impl DistributionSpec {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(LabError::InvalidDistribution("bounds must be finite".into()));
        }
        if lower != 0.0 {
            return Err(LabError::InvalidDistribution(format!(
                "support infimum must be 0 (got {lower})"
            )));
        }
        if upper <= lower {
            return Err(LabError::InvalidDistribution(format!(
                "upper bound {upper} must exceed lower bound {lower}"
            )));
        }
        Ok(Self::Uniform { upper })
    }

    pub fn piecewise(edges: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || densities.len() + 1 != edges.len() {
            return Err(LabError::InvalidDistribution(
                "piecewise density needs n+1 edges for n densities (n >= 1)".into(),
            ));
        }
        if edges.iter().chain(&densities).any(|x| !x.is_finite()) {
            return Err(LabError::InvalidDistribution("edges and densities must be finite".into()));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidDistribution("edges must be strictly increasing".into()));
        }
        if densities.iter().any(|&p| p < 0.0) {
            return Err(LabError::InvalidDistribution("densities must be nonnegative".into()));
        }
        let first = densities.iter().position(|&p| p > 0.0).ok_or_else(|| {
            LabError::InvalidDistribution("density vanishes identically".into())
        })?;
        if edges[first] != 0.0 {
            return Err(LabError::InvalidDistribution(format!(
                "support infimum must be 0 (got {})",
                edges[first]
            )));
        }
        let mass: f64 = densities
            .iter()
            .zip(edges.windows(2))
            .map(|(p, w)| p * (w[1] - w[0]))
            .sum();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(LabError::InvalidDistribution(format!(
                "density integrates to {mass}, expected 1"
            )));
        }
        Ok(Self::PiecewiseConstant { edges, densities })
    }

    /// `‖ρ‖∞`.
    pub fn density_sup(&self) -> f64 {
        match self {
            Self::Uniform { upper } => 1.0 / upper,
            Self::PiecewiseConstant { densities, .. } => densities.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn support_inf(&self) -> f64 {
        0.0
    }

    pub fn support_sup(&self) -> f64 {
        match self {
            Self::Uniform { upper } => *upper,
            Self::PiecewiseConstant { edges, densities } => {
                let last = densities.iter().rposition(|&p| p > 0.0).expect("validated");
                edges[last + 1]
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { upper } => {
                if (0.0..=*upper).contains(&x) {
                    1.0 / upper
                } else {
                    0.0
                }
            }
            Self::PiecewiseConstant { edges, densities } => {
                if x < edges[0] || x > edges[edges.len() - 1] {
                    return 0.0;
                }
                let i = edges.partition_point(|&e| e <= x).saturating_sub(1);
                densities[i.min(densities.len() - 1)]
            }
        }
    }

    /// Pieces `(lo, hi, density)` with positive density.
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        match self {
            Self::Uniform { upper } => vec![(0.0, *upper, 1.0 / upper)],
            Self::PiecewiseConstant { edges, densities } => densities
                .iter()
                .zip(edges.windows(2))
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, w)| (w[0], w[1], p))
                .collect(),
        }
    }

    /// Inverse distribution function on `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { upper } => u * upper,
            Self::PiecewiseConstant { .. } => {
                let mut acc = 0.0;
                let pieces = self.pieces();
                for (i, &(lo, hi, p)) in pieces.iter().enumerate() {
                    let mass = p * (hi - lo);
                    if u < acc + mass || i + 1 == pieces.len() {
                        return (lo + (u - acc) / p).clamp(lo, hi);
                    }
                    acc += mass;
                }
                unreachable!("validated distributions have at least one piece")
            }
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        match self {
            Self::Uniform { upper } => write!(f, "uniform:0,{upper:?}"),
            Self::PiecewiseConstant { edges, densities } => {
                write!(f, "piecewise:{};{}", join(edges), join(densities))
            }
        }
    }
}

/// Parses `uniform:a,b` or `piecewise:e0,e1,...;p0,p1,...`.
impl FromStr for DistributionSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let parse_list = |body: &str| -> Result<Vec<f64>> {
            body.split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|_| {
                        LabError::InvalidDistribution(format!("cannot parse number '{}'", x.trim()))
                    })
                })
                .collect()
        };
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| LabError::InvalidDistribution(format!("expected kind:params, got '{s}'")))?;
        match kind.trim() {
            "uniform" => {
                let v = parse_list(body)?;
                if v.len() != 2 {
                    return Err(LabError::InvalidDistribution("uniform takes two bounds".into()));
                }
                Self::uniform(v[0], v[1])
            }
            "piecewise" => {
                let (e, p) = body.split_once(';').ok_or_else(|| {
                    LabError::InvalidDistribution("piecewise expects 'edges;densities'".into())
                })?;
                Self::piecewise(parse_list(e)?, parse_list(p)?)
            }
            other => Err(LabError::InvalidDistribution(format!("unknown distribution kind '{other}'"))),
        }
    }
}

impl TryFrom<String> for DistributionSpec {
    type Error = LabError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DistributionSpec> for String {
    fn from(d: DistributionSpec) -> String {
        d.to_string()
    }
}

/// One realization `ω = (ω_n)_{n∈Λ}` of the i.i.d. potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderField {
    pub values: Vec<f64>,
    pub seed: u64,
    pub realization: u64,
}

impl DisorderField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// A field with prescribed values (tests, synthetic cases).
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, seed: 0, realization: 0 }
    }
}

/// The uniform variate that drives site `site` of realization `realization`.
pub fn site_uniform(seed: u64, realization: u64, site: usize) -> f64 {
    let mut rng = rng::stream(seed, rng::DOMAIN_DISORDER, realization);
    rng.set_word_pos(2 * site as u128);
    rng::unit_f64(&mut rng)
}

pub fn sample_disorder(dist: &DistributionSpec, lattice: &Lattice, seed: u64, realization: u64) -> DisorderField {
    // Sequential draws from word 0 coincide with `site_uniform` for each site.
    let mut rng = rng::stream(seed, rng::DOMAIN_DISORDER, realization);
    let values = (0..lattice.volume())
        .map(|_| dist.quantile(rng::unit_f64(&mut rng)))
        .collect();
    DisorderField { values, seed, realization }
}

/// Keep `ω` on `keep_sites` and zero it elsewhere.
pub fn mask_potential(field: &DisorderField, keep_sites: &[usize]) -> Result<DisorderField> {
    let mut values = vec![0.0; field.len()];
    for &s in keep_sites {
        let v = field.values.get(s).ok_or_else(|| {
            LabError::InvalidArgument(format!("site {s} outside a field of {} sites", field.len()))
        })?;
        values[s] = *v;
    }
    Ok(DisorderField {
        values,
        seed: field.seed,
        realization: field.realization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_box, DEFAULT_VOLUME_CAP};

    #[test]
    fn rejects_shifted_support() {
        let err = DistributionSpec::uniform(0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("support infimum must be 0"));
        let err = "piecewise:0.2,1;1.25".parse::<DistributionSpec>().unwrap_err();
        assert!(err.to_string().contains("support infimum must be 0"));
    }

    #[test]
    fn rejects_unnormalized_density() {
        assert!(DistributionSpec::piecewise(vec![0.0, 1.0, 2.0], vec![1.0, 1.0]).is_err());
        // a leading zero-density piece shifts the infimum
        assert!(DistributionSpec::piecewise(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["uniform:0,1", "uniform:0,5", "piecewise:0,0.5,1;1.5,0.5"] {
            let d: DistributionSpec = s.parse().unwrap();
            let again: DistributionSpec = d.to_string().parse().unwrap();
            assert_eq!(d, again);
        }
        let d: DistributionSpec = "piecewise:0,0.5,1;1.5,0.5".parse().unwrap();
        assert_eq!(d.density_sup(), 1.5);
        assert_eq!(d.support_sup(), 1.0);
        assert_eq!(d.density(0.7), 0.5);
    }

    #[test]
    fn piecewise_quantile_inverts_cdf() {
        let d: DistributionSpec = "piecewise:0,0.5,1;1.5,0.5".parse().unwrap();
        assert!((d.quantile(0.75) - 0.5).abs() < 1e-15);
        assert!((d.quantile(0.375) - 0.25).abs() < 1e-15);
        assert!((d.quantile(0.875) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn uniform_values_stay_in_support() {
        let lat = build_box(2, 16, None, DEFAULT_VOLUME_CAP).unwrap();
        let d = DistributionSpec::uniform(0.0, 1.0).unwrap();
        for r in 0..10 {
            let f = sample_disorder(&d, &lat, 7, r);
            assert!(f.values.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn replay_is_exact_and_site_addressable() {
        let lat = build_box(1, 64, None, DEFAULT_VOLUME_CAP).unwrap();
        let d = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let a = sample_disorder(&d, &lat, 42, 3);
        let b = sample_disorder(&d, &lat, 42, 3);
        assert_eq!(a, b);
        for site in [0, 1, 17, 63] {
            assert_eq!(a.values[site], site_uniform(42, 3, site));
        }
        assert_ne!(a, sample_disorder(&d, &lat, 42, 4));
        assert_ne!(a, sample_disorder(&d, &lat, 43, 3));
    }

    #[test]
    fn law_of_large_numbers() {
        let lat = build_box(1, 1_000_000, None, usize::MAX).unwrap();
        let d = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let f = sample_disorder(&d, &lat, 1, 0);
        assert_eq!(f.len(), 1_000_000);
        let mean = f.values.iter().sum::<f64>() / f.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn masking() {
        let field = DisorderField::from_values(vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(mask_potential(&field, &[0, 1, 2, 3]).unwrap().values, field.values);
        assert_eq!(mask_potential(&field, &[]).unwrap().values, vec![0.0; 4]);
        assert_eq!(mask_potential(&field, &[1, 3]).unwrap().values, vec![0.0, 0.2, 0.0, 0.4]);
        assert!(mask_potential(&field, &[4]).is_err());
    }
}
