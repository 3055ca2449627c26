use serde::Serialize;

use super::IdsCurve;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct LifshitzPoint {
    pub energy: f64,
    pub value: f64,
    /// `log(−log value) / log E`, when usable.
    pub exponent: Option<f64>,
    pub usable: bool,
    pub note: String,
}

/// Per-energy Lifshitz exponents `ℓ̂(E) = log(−log N̂(E)) / log E` on a window.
#[derive(Debug, Clone, Serialize)]
pub struct LifshitzFit {
    pub window: (f64, f64),
    pub points: Vec<LifshitzPoint>,
    pub max_exponent: f64,
    /// Least-squares slope of `ℓ̂` against `log E`.
    pub slope: f64,
    pub intercept: f64,
    /// `(E, upper confidence value, exponent bound)` for excluded zero counts.
    pub substitutes: Vec<(f64, f64, f64)>,
}

impl LifshitzFit {
    pub fn usable(&self) -> impl Iterator<Item = &LifshitzPoint> {
        self.points.iter().filter(|p| p.usable)
    }
}

fn exponent(value: f64, energy: f64) -> f64 {
    (-value.ln()).ln() / energy.ln()
}

/// Exponents for an arbitrary curve.
///
/// `reliable[i] == false` excludes a point (e.g. too few pooled counts);
/// `zero_upper` is the upper-confidence value substituted for zero estimates.
pub fn lifshitz_fit_points(
    energies: &[f64],
    values: &[f64],
    reliable: Option<&[bool]>,
    zero_upper: Option<f64>,
    window: (f64, f64),
) -> Result<LifshitzFit> {
    let (lo, hi) = window;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "fit window must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
        )));
    }
    if energies.len() != values.len() || reliable.is_some_and(|r| r.len() != values.len()) {
        return Err(LabError::Mismatch("curve arrays differ in length".into()));
    }
    let mut points = Vec::new();
    let mut substitutes = Vec::new();
    for (i, (&e, &v)) in energies.iter().zip(values).enumerate() {
        if !(lo..=hi).contains(&e) {
            continue;
        }
        let ok = reliable.is_none_or(|r| r[i]);
        let (usable, note, ell) = if v <= 0.0 {
            if let Some(b) = zero_upper {
                substitutes.push((e, b, exponent(b, e)));
            }
            (false, "zero estimate", None)
        } else if v >= 1.0 {
            (false, "estimate >= 1", None)
        } else if !ok {
            (false, "below count threshold", None)
        } else {
            (true, "ok", Some(exponent(v, e)))
        };
        points.push(LifshitzPoint { energy: e, value: v, exponent: ell, usable, note: note.into() });
    }

    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.exponent.map(|l| (p.energy.ln(), l)))
        .collect();
    if xy.len() < 3 {
        return Err(LabError::InsufficientData(format!(
            "{} usable points in the window, need at least 3",
            xy.len()
        )));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let max_exponent = xy.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    Ok(LifshitzFit {
        window,
        points,
        max_exponent,
        slope,
        intercept: my - slope * mx,
        substitutes,
    })
}

/// Fit of an IDS curve. Zero estimates are replaced, in the substitute list,
/// by the one-sided 95% bound `1 − 0.05^{1/(S·|Λ|)}`.
pub fn lifshitz_exponent_fit(curve: &IdsCurve, window: (f64, f64)) -> Result<LifshitzFit> {
    let trials = curve.samples as f64 * curve.volume as f64;
    let zero_upper = 1.0 - 0.05f64.powf(1.0 / trials);
    lifshitz_fit_points(&curve.energies, &curve.values, None, Some(zero_upper), window)
}
