use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;

use super::config::{Experiment, ExperimentConfig};
use super::output::{emit_results, write_atomic, Cell, ResultFile, RunManifest, Table};
use super::HarnessError;
use crate::estimators::{
    estimate_dos, estimate_ids, lifshitz_exponent_fit, minami_statistics, spectral_averaging_audit, spectral_top,
    uniform_edges, wegner_ratios, MinamiParams, Sampling, POISSON_SPACING_RATIO,
};
use crate::lattice::Lattice;
use crate::probes::{
    audit_cutoff, evaluate_decoupling_bound, heat_cases, kernel_decay_profile, make_cutoff, run_lemma_corpus,
    DecouplingParams, CHAIN_TOLERANCE, HEAT_TOLERANCE, LEMMA_TOLERANCE,
};
use crate::spectral::EnergyInterval;

/// Bounds for the Minami diagnostics.
pub const MINAMI_VARIANCE_TOLERANCE: f64 = 0.2;
pub const MINAMI_RATIO_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub table: Table,
    pub summary: serde_json::Value,
    pub tripped: bool,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.tripped)
    }
}

struct Computed {
    table: Table,
    summary: serde_json::Value,
    tripped: bool,
}

fn sampling(cfg: &ExperimentConfig) -> Sampling {
    Sampling::new(cfg.samples, cfg.seed).with_workers(cfg.workers)
}

fn intervals(cfg: &ExperimentConfig) -> Result<Vec<EnergyInterval>, HarnessError> {
    cfg.intervals
        .iter()
        .map(|&(a, b)| EnergyInterval::new(a, b).map_err(HarnessError::from))
        .collect()
}

fn ids(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let curve = estimate_ids(lat, &cfg.dist, &cfg.grid(), &sampling(cfg))?;
    let mut t = Table::new(&["E", "N_hat", "stderr", "samples", "volume"]);
    for i in 0..curve.energies.len() {
        t.push(vec![
            curve.energies[i].into(),
            curve.values[i].into(),
            curve.stderr[i].into(),
            curve.samples.into(),
            curve.volume.into(),
        ]);
    }
    let summary = json!({ "points": curve.energies.len(), "N_hat_last": curve.values.last() });
    Ok(Computed { table: t, summary, tripped: false })
}

fn dos(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let edges = uniform_edges(0.0, spectral_top(lat, &cfg.dist), cfg.bins);
    let est = estimate_dos(lat, &cfg.dist, &edges, &sampling(cfg), cfg.bandwidth)?;
    let mut t = Table::new(&["E_lo", "E_hi", "n_hat", "stderr", "pooled_count", "zero_count_upper", "smoothed"]);
    for i in 0..est.density.len() {
        t.push(vec![
            edges[i].into(),
            edges[i + 1].into(),
            est.density[i].into(),
            est.stderr[i].into(),
            est.pooled_counts[i].into(),
            est.zero_count_upper[i].into(),
            est.smoothed[i].into(),
        ]);
    }
    let summary = json!({ "total_mass": est.total_mass(), "bandwidth": est.bandwidth });
    Ok(Computed { table: t, summary, tripped: false })
}

fn wegner(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let reps = wegner_ratios(lat, &cfg.dist, &intervals(cfg)?, &sampling(cfg))?;
    let mut t = Table::new(&["E_lo", "E_hi", "mean_trace", "mean_trace_stderr", "K_hat", "K_stderr", "flagged"]);
    for r in &reps {
        t.push(vec![
            r.interval.lower().into(),
            r.interval.upper().into(),
            r.mean_trace.into(),
            r.mean_trace_stderr.into(),
            r.ratio.into(),
            r.ratio_stderr.into(),
            r.flagged.into(),
        ]);
    }
    let flagged = reps.iter().filter(|r| r.flagged).count();
    let summary = json!({ "intervals": reps.len(), "flagged": flagged });
    Ok(Computed { table: t, summary, tripped: flagged > 0 })
}

fn spectral_averaging(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let site = lat.zero_site();
    let reps = spectral_averaging_audit(lat, &cfg.dist, site, &intervals(cfg)?, &sampling(cfg))?;
    let mut t = Table::new(&["site", "E_lo", "E_hi", "average", "stderr", "bound", "violated"]);
    for r in &reps {
        t.push(vec![
            r.site.into(),
            r.interval.lower().into(),
            r.interval.upper().into(),
            r.average.into(),
            r.stderr.into(),
            r.bound.into(),
            r.violated.into(),
        ]);
    }
    let violated = reps.iter().filter(|r| r.violated).count();
    Ok(Computed { table: t, summary: json!({ "violated": violated }), tripped: violated > 0 })
}

fn lifshitz(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let curve = estimate_ids(lat, &cfg.dist, &cfg.grid(), &sampling(cfg))?;
    let fit = lifshitz_exponent_fit(&curve, (cfg.emin, cfg.emax))?;
    let mut t = Table::new(&["E", "ell_hat", "usable", "note"]);
    for p in &fit.points {
        let note = match fit.substitutes.iter().find(|s| s.0 == p.energy) {
            Some(s) => format!("{}; N <= {:.3e} gives ell_hat <= {:.6}", p.note, s.1, s.2),
            None => p.note.clone(),
        };
        t.push(vec![p.energy.into(), p.exponent.into(), p.usable.into(), Cell::Text(note)]);
    }
    let summary = json!({
        "usable": fit.usable().count(),
        "max_ell_hat": fit.max_exponent,
        "slope_vs_log_E": fit.slope,
        "intercept": fit.intercept,
    });
    Ok(Computed { table: t, summary, tripped: false })
}

fn minami(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let params = MinamiParams { energy: cfg.energy, window_spacings: cfg.window_spacings, bins: cfg.bins };
    let rep = minami_statistics(lat, &cfg.dist, &params, &sampling(cfg))?;
    let d = &rep.diagnostics;
    let r = &rep.reference;
    let mut t = Table::stats();
    t.stat("energy", rep.energy, None, None, None);
    t.stat("intensity", rep.intensity, None, None, None);
    t.stat("half_width", rep.half_width, None, None, None);
    t.stat("points", d.points, None, None, None);
    t.stat("count_mean", d.count_mean, Some(2.0 * cfg.window_spacings), None, None);
    let vr_ok = (d.variance_ratio - 1.0).abs() <= MINAMI_VARIANCE_TOLERANCE;
    t.stat("variance_ratio", d.variance_ratio, Some(1.0), Some(MINAMI_VARIANCE_TOLERANCE), Some(vr_ok));
    let sr_ok = (d.spacing_ratio_mean - r.spacing_ratio_mean).abs() <= MINAMI_RATIO_TOLERANCE;
    t.stat(
        "spacing_ratio_mean",
        d.spacing_ratio_mean,
        Some(r.spacing_ratio_mean),
        Some(MINAMI_RATIO_TOLERANCE),
        Some(sr_ok),
    );
    t.stat("spacing_ratio_stderr", d.spacing_ratio_stderr, None, None, None);
    t.stat("reference_spacing_ratio_mean", r.spacing_ratio_mean, Some(POISSON_SPACING_RATIO), None, None);
    t.stat("reference_variance_ratio", r.variance_ratio, Some(1.0), None, None);
    t.stat("ks_distance", d.ks_distance, Some(0.0), None, None);
    t.stat("reference_ks_distance", r.ks_distance, Some(0.0), None, None);
    let summary = json!({
        "energy": rep.energy,
        "variance_ratio": d.variance_ratio,
        "spacing_ratio_mean": d.spacing_ratio_mean,
        "reference_spacing_ratio_mean": r.spacing_ratio_mean,
    });
    Ok(Computed { tripped: t.any_failed(), table: t, summary })
}

fn probe_lemma(cfg: &ExperimentConfig) -> Result<Computed, HarnessError> {
    let rep = run_lemma_corpus(&sampling(cfg))?;
    let mut t = Table::stats();
    for f in &rep.families {
        let name = match f.family {
            crate::probes::PerturbationFamily::NonnegativeDiagonal => "diagonal",
            crate::probes::PerturbationFamily::Symmetric => "symmetric",
        };
        t.stat(&format!("{name}_cases"), f.cases, None, None, None);
        t.stat(&format!("{name}_rejected"), f.rejected, None, None, None);
        t.stat(
            &format!("{name}_min_margin"),
            f.min_margin,
            Some(0.0),
            Some(LEMMA_TOLERANCE),
            Some(f.min_margin >= -LEMMA_TOLERANCE),
        );
        t.stat(&format!("{name}_violations"), f.violations, Some(0.0), None, Some(f.violations == 0));
        t.stat(
            &format!("{name}_equality_max_abs"),
            f.equality_max_abs,
            Some(0.0),
            Some(1e-12),
            Some(f.equality_max_abs <= 1e-12),
        );
    }
    let summary = json!({ "cases": rep.cases, "violations": rep.violations() });
    Ok(Computed { tripped: t.any_failed(), table: t, summary })
}

fn probe_cutoff(cfg: &ExperimentConfig) -> Result<Computed, HarnessError> {
    let e = cfg.energy.unwrap_or(0.1);
    let grid = 2001;
    let a = audit_cutoff(&make_cutoff(e)?, cfg.dim, grid)?;
    let b = audit_cutoff(&make_cutoff(e / 10.0)?, cfg.dim, grid)?;
    let mut t = Table::stats();
    t.stat("scale", e, None, None, None);
    for (i, &j) in a.orders.iter().enumerate() {
        t.stat(&format!("scaled_sup_order_{j}"), a.scaled_sup[i], None, None, None);
        let gap = (a.scaled_sup[i] - b.scaled_sup[i]).abs() / a.scaled_sup[i];
        t.stat(&format!("scale_invariance_gap_order_{j}"), gap, Some(0.0), Some(1e-9), Some(gap <= 1e-9));
        let fd = a.finite_difference_error[i];
        t.stat(&format!("finite_difference_error_order_{j}"), fd, Some(0.0), Some(1e-6), Some(fd <= 1e-6));
    }
    t.stat("monotone", a.monotone, None, None, Some(a.monotone));
    t.stat("unit_range", a.in_unit_range, None, None, Some(a.in_unit_range));
    t.stat("plateaus_exact", a.plateaus_exact, None, None, Some(a.plateaus_exact));
    let summary = json!({ "orders": a.orders, "scaled_sup": a.scaled_sup });
    Ok(Computed { tripped: t.any_failed(), table: t, summary })
}

fn probe_decay(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let e = cfg.energy.unwrap_or(0.5);
    let prof = kernel_decay_profile(lat, &cfg.dist, e, &sampling(cfg))?;
    let mut t = Table::new(&["k", "norm", "bracket", "value", "stderr"]);
    for (s, k) in prof.offsets.iter().enumerate() {
        let norm = k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
        let label = k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        t.push(vec![
            Cell::Text(label),
            norm.into(),
            crate::probes::japanese_bracket(norm).into(),
            prof.values[s].into(),
            prof.stderr[s].into(),
        ]);
    }
    let diag = prof.values[lat.zero_site()];
    let summary = json!({
        "exponent": prof.exponent,
        "fit_window": [prof.fit_window.0, prof.fit_window.1],
        "diagonal": diag,
    });
    Ok(Computed { table: t, summary, tripped: diag > 1.0 + 1e-12 })
}

fn probe_heat(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let e = cfg.energy.unwrap_or(0.25);
    let rep = heat_cases(lat, &cfg.dist, &cfg.times, e, &sampling(cfg))?;
    let mut t = Table::stats();
    t.stat("comparisons", rep.comparisons.len(), None, None, None);
    t.stat("violations", rep.violations, Some(0.0), None, Some(rep.violations == 0));
    t.stat(
        "min_monotone_slack",
        rep.min_monotone_slack,
        Some(0.0),
        Some(HEAT_TOLERANCE),
        Some(rep.min_monotone_slack >= -HEAT_TOLERANCE),
    );
    t.stat(
        "min_split_slack",
        rep.min_split_slack,
        Some(0.0),
        Some(HEAT_TOLERANCE),
        Some(rep.min_split_slack >= -HEAT_TOLERANCE),
    );
    let summary = json!({ "violations": rep.violations, "comparisons": rep.comparisons.len() });
    Ok(Computed { tripped: t.any_failed(), table: t, summary })
}

fn probe_decoupling(cfg: &ExperimentConfig, lat: &Lattice) -> Result<Computed, HarnessError> {
    let e = cfg.energy.unwrap_or(0.2);
    let params = DecouplingParams::new(cfg.dim, cfg.epsilon, e)?;
    let rep = evaluate_decoupling_bound(lat, &cfg.dist, &params, None, &sampling(cfg))?;
    let mut t = Table::stats();
    t.stat("t_E", params.t_e, None, None, None);
    t.stat("regime", if params.valid { "t_E > 0" } else { "outside E'_eps regime" }, None, None, None);
    if params.valid {
        let res = params.identity_residual();
        t.stat("t_E_identity_residual", res, Some(0.0), Some(1e-10), Some(res <= 1e-10));
        t.stat("sublattice_bound", params.sublattice_bound(), None, None, None);
    }
    t.stat("chain_violations", rep.chain_violations, Some(0.0), None, Some(rep.chain_violations == 0));
    t.stat(
        "min_chain_gap",
        rep.min_chain_gap,
        Some(0.0),
        Some(CHAIN_TOLERANCE),
        Some(rep.min_chain_gap >= -CHAIN_TOLERANCE),
    );
    t.stat("N_gamma_4E", rep.sublattice_ids.mean(), None, None, None);
    t.stat("N_gamma_4E_stderr", rep.sublattice_ids.stderr(), None, None, None);
    t.stat("ergodic_violations", rep.ergodic_violations, Some(0.0), None, Some(rep.ergodic_violations == 0));
    let bound = rep.ergodic_bound();
    for (label, s) in ["r0", "rk"].iter().zip(&rep.sites) {
        t.stat(&format!("{label}_cutoff_mean"), s.cutoff.mean(), None, None, None);
        t.stat(&format!("{label}_projection_mean"), s.projection.mean(), None, None, None);
        t.stat(
            &format!("{label}_projection_vs_ergodic_bound"),
            s.projection.mean(),
            Some(bound),
            Some(3.0 * s.projection.stderr()),
            Some(s.projection.mean() <= bound + 3.0 * s.projection.stderr().max(0.0)),
        );
        t.stat(
            &format!("{label}_translation_gap"),
            s.translation_gap.mean(),
            Some(0.0),
            Some(3.0 * s.translation_gap.stderr()),
            Some(s.translation_consistent()),
        );
        if params.valid {
            t.stat(&format!("{label}_heat_mean"), s.heat.mean(), None, None, None);
            t.stat(&format!("{label}_heat_violations"), s.heat_violations, Some(0.0), None, Some(s.heat_violations == 0));
        }
    }
    let summary = json!({
        "t_E": params.t_e,
        "valid": params.valid,
        "chain_violations": rep.chain_violations,
        "min_chain_gap": rep.min_chain_gap,
        "sublattice_offset": rep.sublattice_offset,
    });
    Ok(Computed { tripped: t.any_failed(), table: t, summary })
}

fn compute(cfg: &ExperimentConfig) -> Result<Computed, HarnessError> {
    use Experiment::*;
    match cfg.experiment {
        ProbeLemma => probe_lemma(cfg),
        ProbeCutoff => probe_cutoff(cfg),
        exp => {
            let lat = cfg.lattice()?;
            match exp {
                Ids => ids(cfg, &lat),
                Dos => dos(cfg, &lat),
                Wegner => wegner(cfg, &lat),
                SpectralAveraging => spectral_averaging(cfg, &lat),
                LifshitzFit => lifshitz(cfg, &lat),
                Minami => minami(cfg, &lat),
                ProbeDecay => probe_decay(cfg, &lat),
                ProbeHeat => probe_heat(cfg, &lat),
                ProbeDecoupling => probe_decoupling(cfg, &lat),
                ProbeLemma | ProbeCutoff => unreachable!(),
            }
        }
    }
}

/// Run, then write `<out>/<experiment>.csv` and `<out>/<experiment>.manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let start = Instant::now();
    let computed = compute(cfg)?;
    let name = cfg.experiment.name();
    let csv_path = cfg.out.join(format!("{name}.csv"));
    let sha256 = emit_results(&computed.table, &csv_path)?;
    let manifest = RunManifest {
        experiment: name.to_string(),
        config_hash: cfg.hash(),
        config: serde_json::from_str(&cfg.canonical_json()).expect("valid json"),
        workers: cfg.workers,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        flags_tripped: computed.tripped,
        summary: computed.summary.clone(),
        results: vec![ResultFile { path: PathBuf::from(format!("{name}.csv")), sha256 }],
    };
    let manifest_path = cfg.out.join(format!("{name}.manifest.json"));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&manifest_path, text.as_bytes())?;
    Ok(RunOutcome {
        table: computed.table,
        summary: computed.summary,
        tripped: computed.tripped,
        csv_path,
        manifest_path,
        manifest,
    })
}
