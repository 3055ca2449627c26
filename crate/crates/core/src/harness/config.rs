use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::lattice::{build_box, DistributionSpec, Lattice, DEFAULT_VOLUME_CAP};
use crate::LabError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ANDERSON_LAB_OUT";
const FALLBACK_OUTPUT_DIR: &str = "results";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Ids,
    Dos,
    Wegner,
    SpectralAveraging,
    LifshitzFit,
    Minami,
    ProbeLemma,
    ProbeCutoff,
    ProbeDecay,
    ProbeHeat,
    ProbeDecoupling,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Ids,
        Experiment::Dos,
        Experiment::Wegner,
        Experiment::SpectralAveraging,
        Experiment::LifshitzFit,
        Experiment::Minami,
        Experiment::ProbeLemma,
        Experiment::ProbeCutoff,
        Experiment::ProbeDecay,
        Experiment::ProbeHeat,
        Experiment::ProbeDecoupling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Ids => "ids",
            Experiment::Dos => "dos",
            Experiment::Wegner => "wegner",
            Experiment::SpectralAveraging => "spectral-averaging",
            Experiment::LifshitzFit => "lifshitz-fit",
            Experiment::Minami => "minami",
            Experiment::ProbeLemma => "probe-lemma",
            Experiment::ProbeCutoff => "probe-cutoff",
            Experiment::ProbeDecay => "probe-decay",
            Experiment::ProbeHeat => "probe-heat",
            Experiment::ProbeDecoupling => "probe-decoupling",
        }
    }

    fn needs_divisible_side(&self) -> bool {
        matches!(self, Experiment::ProbeHeat | Experiment::ProbeDecoupling)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("experiment: unknown experiment name '{s}'")))
    }
}

/// Partially specified settings, from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub dim: Option<usize>,
    pub side: Option<usize>,
    pub dist: Option<String>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub max_volume: Option<usize>,
    pub emin: Option<f64>,
    pub emax: Option<f64>,
    pub npoints: Option<usize>,
    pub energy: Option<f64>,
    pub intervals: Option<Vec<(f64, f64)>>,
    pub bins: Option<usize>,
    pub bandwidth: Option<f64>,
    pub window_spacings: Option<f64>,
    pub epsilon: Option<f64>,
    pub times: Option<Vec<f64>>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged_with(self, other: Overrides) -> Overrides {
        Overrides {
            experiment: other.experiment.or(self.experiment),
            dim: other.dim.or(self.dim),
            side: other.side.or(self.side),
            dist: other.dist.or(self.dist),
            samples: other.samples.or(self.samples),
            seed: other.seed.or(self.seed),
            workers: other.workers.or(self.workers),
            out: other.out.or(self.out),
            max_volume: other.max_volume.or(self.max_volume),
            emin: other.emin.or(self.emin),
            emax: other.emax.or(self.emax),
            npoints: other.npoints.or(self.npoints),
            energy: other.energy.or(self.energy),
            intervals: other.intervals.or(self.intervals),
            bins: other.bins.or(self.bins),
            bandwidth: other.bandwidth.or(self.bandwidth),
            window_spacings: other.window_spacings.or(self.window_spacings),
            epsilon: other.epsilon.or(self.epsilon),
            times: other.times.or(self.times),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeSection {
    dim: Option<usize>,
    #[serde(rename = "L")]
    side: Option<usize>,
    max_volume: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisorderSection {
    dist: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingSection {
    samples: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnergySection {
    emin: Option<f64>,
    emax: Option<f64>,
    npoints: Option<usize>,
    energy: Option<f64>,
    intervals: Option<Vec<(f64, f64)>>,
    bins: Option<usize>,
    bandwidth: Option<f64>,
    window_spacings: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeSection {
    epsilon: Option<f64>,
    times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    lattice: LatticeSection,
    #[serde(default)]
    disorder: DisorderSection,
    #[serde(default)]
    sampling: SamplingSection,
    #[serde(default)]
    energy: EnergySection,
    #[serde(default)]
    probe: ProbeSection,
    #[serde(default)]
    output: OutputSection,
}

/// Parse a sectioned TOML config.
pub fn parse_config_text(text: &str) -> Result<Overrides, HarnessError> {
    let f: FileConfig = toml::from_str(text).map_err(|e| HarnessError::Config(format!("config file: {e}")))?;
    Ok(Overrides {
        experiment: f.experiment.name,
        dim: f.lattice.dim,
        side: f.lattice.side,
        dist: f.disorder.dist,
        samples: f.sampling.samples,
        seed: f.sampling.seed,
        workers: f.sampling.workers,
        out: f.output.dir,
        max_volume: f.lattice.max_volume,
        emin: f.energy.emin,
        emax: f.energy.emax,
        npoints: f.energy.npoints,
        energy: f.energy.energy,
        intervals: f.energy.intervals,
        bins: f.energy.bins,
        bandwidth: f.energy.bandwidth,
        window_spacings: f.energy.window_spacings,
        epsilon: f.probe.epsilon,
        times: f.probe.times,
    })
}

/// `"a,b;c,d"` → `[(a, b), (c, d)]`.
pub fn parse_intervals(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v = parse_list(p)?;
            match v.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(format!("interval '{p}' must be 'lo,hi'")),
            }
        })
        .collect()
}

/// `"0.5,2,8"` → `[0.5, 2.0, 8.0]`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect()
}

/// A validated experiment description. Everything except `workers` and
/// `out` enters the config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub dist: DistributionSpec,
    pub samples: u64,
    pub seed: u64,
    pub max_volume: usize,
    pub emin: f64,
    pub emax: f64,
    pub npoints: usize,
    pub energy: Option<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub bins: usize,
    pub bandwidth: Option<f64>,
    pub window_spacings: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

fn config_error(field: &str, e: impl fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{field}: {e}"))
}

impl ExperimentConfig {
    /// Resolve defaults and validate.
    pub fn resolve(o: Overrides) -> Result<Self, HarnessError> {
        let experiment: Experiment = o
            .experiment
            .as_deref()
            .ok_or_else(|| config_error("experiment", "no experiment named"))?
            .parse()?;
        let dist_text = o.dist.unwrap_or_else(|| "uniform:0,1".into());
        let dist: DistributionSpec = dist_text.parse().map_err(|e: LabError| config_error("dist", e))?;
        let dim = o.dim.unwrap_or(1);
        let side = o.side.unwrap_or(64);
        let top = 4.0 * dim as f64 + dist.support_sup();
        use Experiment::*;
        let (emin, emax, npoints) = match experiment {
            LifshitzFit => (0.05, 0.3, 26),
            _ => (0.0, top, 50),
        };
        let energy = o.energy.or(match experiment {
            ProbeCutoff => Some(0.1),
            ProbeDecay => Some(0.5),
            ProbeHeat => Some(0.25),
            ProbeDecoupling => Some(0.2),
            _ => None,
        });
        let intervals = o.intervals.unwrap_or_else(|| match experiment {
            SpectralAveraging => vec![(0.0, 0.05), (0.0, 0.2), (1.0, 1.3)],
            _ => vec![(0.0, 0.4), (0.0, 0.2), (0.0, 0.1), (0.0, 0.05)],
        });
        let cfg = ExperimentConfig {
            experiment,
            dim,
            side,
            dist,
            samples: o.samples.unwrap_or(if experiment == ProbeLemma { 10_000 } else { 100 }),
            seed: o.seed.unwrap_or(0),
            max_volume: o.max_volume.unwrap_or(DEFAULT_VOLUME_CAP),
            emin: o.emin.unwrap_or(emin),
            emax: o.emax.unwrap_or(emax),
            npoints: o.npoints.unwrap_or(npoints),
            energy,
            intervals,
            bins: o.bins.unwrap_or(100),
            bandwidth: o.bandwidth,
            window_spacings: o.window_spacings.unwrap_or(5.0),
            epsilon: o.epsilon.unwrap_or(0.1),
            times: o.times.unwrap_or_else(|| vec![0.5, 2.0, 8.0]),
            workers: o.workers.unwrap_or(1).max(1),
            out: o
                .out
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.experiment != Experiment::ProbeLemma && self.experiment != Experiment::ProbeCutoff {
            let lat = self.lattice()?;
            if self.experiment.needs_divisible_side() {
                lat.spec.require_divisible_by_four().map_err(|e| config_error("L", e))?;
            }
        }
        if self.samples == 0 {
            return Err(config_error("samples", "must be at least 1"));
        }
        if !(self.emin < self.emax) || self.npoints < 2 {
            return Err(config_error("emin/emax/npoints", "need emin < emax and at least 2 points"));
        }
        if self.bins == 0 {
            return Err(config_error("bins", "must be at least 1"));
        }
        if let Some(e) = self.energy {
            if !e.is_finite() || (self.experiment != Experiment::Minami && e <= 0.0) {
                return Err(config_error("energy", format!("must be positive, got {e}")));
            }
        }
        if self.intervals.iter().any(|(a, b)| !(a <= b)) {
            return Err(config_error("intervals", "each interval needs lo <= hi"));
        }
        if self.times.iter().any(|t| !(*t >= 0.0)) {
            return Err(config_error("times", "must be non-negative"));
        }
        if self.experiment == Experiment::ProbeDecoupling {
            let half = self.dim as f64 / 2.0;
            if !(self.epsilon > 0.0 && self.epsilon < half) {
                return Err(config_error("epsilon", format!("must lie in (0, {half})")));
            }
        }
        Ok(())
    }

    /// The box, centred at the origin.
    pub fn lattice(&self) -> Result<Lattice, HarnessError> {
        build_box(self.dim, self.side, None, self.max_volume).map_err(|e| match e {
            LabError::VolumeCap { .. } => HarnessError::Resource(e.to_string()),
            LabError::InvalidBox(m) => config_error("L", m),
            other => config_error("L", other),
        })
    }

    /// Energy grid `emin + i (emax − emin)/(npoints − 1)`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.npoints;
        (0..n)
            .map(|i| self.emin + (self.emax - self.emin) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Canonical JSON of every result-relevant field.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json), hex.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Read an optional config file and apply flag overrides on top.
pub fn parse_config(file: Option<&Path>, flags: Overrides) -> Result<ExperimentConfig, HarnessError> {
    let base = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| HarnessError::Config(format!("config file {}: {e}", p.display())))?;
            parse_config_text(&text)?
        }
        None => Overrides::default(),
    };
    ExperimentConfig::resolve(base.merged_with(flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(exp: &str) -> Overrides {
        Overrides { experiment: Some(exp.into()), out: Some("x".into()), ..Default::default() }
    }

    #[test]
    fn documented_ids_example() {
        let o = Overrides {
            dim: Some(1),
            side: Some(256),
            dist: Some("uniform:0,1".into()),
            samples: Some(5000),
            seed: Some(42),
            emin: Some(0.02),
            emax: Some(0.5),
            npoints: Some(40),
            ..flags("ids")
        };
        let c = ExperimentConfig::resolve(o).unwrap();
        assert_eq!(c.grid().len(), 40);
        assert_eq!(c.grid()[0], 0.02);
        assert_eq!(c.grid()[39], 0.5);
    }

    #[test]
    fn error_messages_name_the_field() {
        let e = ExperimentConfig::resolve(Overrides { dist: Some("uniform:0.5,1".into()), ..flags("ids") }).unwrap_err();
        assert!(e.to_string().contains("support infimum must be 0"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::resolve(Overrides { side: Some(30), ..flags("probe-decoupling") }).unwrap_err();
        assert!(e.to_string().contains("L must be divisible by 4"), "{e}");
        let e = ExperimentConfig::resolve(Overrides { side: Some(31), ..flags("ids") }).unwrap_err();
        assert!(e.to_string().starts_with("L:"), "{e}");
        let e = ExperimentConfig::resolve(flags("nonsense")).unwrap_err();
        assert!(e.to_string().contains("unknown experiment"));
    }

    #[test]
    fn volume_cap_is_a_resource_error() {
        let e = ExperimentConfig::resolve(Overrides { dim: Some(2), side: Some(128), ..flags("ids") }).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn flags_override_file() {
        let text = r#"
            [experiment]
            name = "wegner"
            [lattice]
            dim = 1
            L = 32
            [sampling]
            samples = 7
            seed = 3
            [energy]
            intervals = [[0.0, 0.1], [0.0, 0.2]]
        "#;
        let file = parse_config_text(text).unwrap();
        let c = ExperimentConfig::resolve(file.merged_with(Overrides { seed: Some(9), ..Default::default() })).unwrap();
        assert_eq!(c.experiment, Experiment::Wegner);
        assert_eq!(c.samples, 7);
        assert_eq!(c.seed, 9);
        assert_eq!(c.intervals, vec![(0.0, 0.1), (0.0, 0.2)]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config_text("[lattice]\nside = 4\n").is_err());
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = ExperimentConfig::resolve(flags("ids")).unwrap();
        let b = ExperimentConfig::resolve(Overrides { workers: Some(8), out: Some("elsewhere".into()), ..flags("ids") })
            .unwrap();
        let c = ExperimentConfig::resolve(Overrides { seed: Some(1), ..flags("ids") }).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn list_syntax() {
        assert_eq!(parse_intervals("0,0.05;1,1.3").unwrap(), vec![(0.0, 0.05), (1.0, 1.3)]);
        assert_eq!(parse_list("0.5, 2,8").unwrap(), vec![0.5, 2.0, 8.0]);
        assert!(parse_intervals("0,1,2").is_err());
    }
}
