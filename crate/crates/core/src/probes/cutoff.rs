use std::ops::{Add, Mul};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::spectral::SpectralFn;

/// Highest derivative order carried by [`Jet`].
pub const MAX_DERIVATIVE: usize = 7;

/// Truncated Taylor series `c_k = f^{(k)}(x) / k!`, `k ≤ 7`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; MAX_DERIVATIVE + 1]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; MAX_DERIVATIVE + 1];
        a[0] = c;
        Jet(a)
    }

    pub fn variable(x: f64) -> Self {
        let mut a = Self::constant(x);
        a.0[1] = 1.0;
        a
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `f^{(k)}(x)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * (1..=k).map(|i| i as f64).product::<f64>()
    }

    pub fn scale(self, s: f64) -> Jet {
        Jet(self.0.map(|c| c * s))
    }

    pub fn recip(self) -> Jet {
        let a = self.0;
        let mut b = [0.0; MAX_DERIVATIVE + 1];
        b[0] = 1.0 / a[0];
        for k in 1..=MAX_DERIVATIVE {
            let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
            b[k] = -s * b[0];
        }
        Jet(b)
    }

    pub fn exp(self) -> Jet {
        let a = self.0;
        let mut e = [0.0; MAX_DERIVATIVE + 1];
        e[0] = a[0].exp();
        for k in 1..=MAX_DERIVATIVE {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Jet(e)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Mul for Jet {
    type Output = Jet;
    /// Truncated Cauchy product.
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()))
    }
}

/// The step `h(x) = σ(1−x) / (σ(x) + σ(1−x))`, `σ(x) = e^{−1/x}` for `x > 0`:
/// 1 for `x ≤ 0`, 0 for `x ≥ 1`, smooth and decreasing in between.
pub fn unit_step(x: Jet) -> Jet {
    let t = x.value();
    if t <= 0.0 {
        return Jet::constant(1.0);
    }
    if t >= 1.0 {
        return Jet::constant(0.0);
    }
    if t > 0.5 {
        // h(x) = 1 − h(1 − x) keeps the exponent below non-positive
        let mirrored = unit_step(Jet::constant(1.0).add(x.scale(-1.0)));
        return Jet::constant(1.0).add(mirrored.scale(-1.0));
    }
    // h = 1 / (1 + exp(1/(1−x) − 1/x))
    let one_minus = Jet::constant(1.0).add(x.scale(-1.0));
    let u = one_minus.recip().add(x.recip().scale(-1.0));
    Jet::constant(1.0).add(u.exp()).recip()
}

/// Smooth non-increasing step from 1 (at and below `one_below`) to 0 (at and above `zero_above`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothStep {
    pub one_below: f64,
    pub zero_above: f64,
}

impl SmoothStep {
    pub fn new(one_below: f64, zero_above: f64) -> Result<Self> {
        if !(one_below < zero_above) || !one_below.is_finite() || !zero_above.is_finite() {
            return Err(LabError::InvalidArgument(format!(
                "smooth step needs finite a < b, got ({one_below}, {zero_above})"
            )));
        }
        Ok(Self { one_below, zero_above })
    }

    pub fn jet(&self, t: f64) -> Jet {
        let w = self.zero_above - self.one_below;
        let x = Jet::variable((t - self.one_below) / w);
        let h = unit_step(x);
        // chain rule for the affine change of variable
        Jet(std::array::from_fn(|k| h.0[k] / w.powi(k as i32)))
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t).value()
    }
}

impl SpectralFn for SmoothStep {
    fn eval(&self, x: f64) -> f64 {
        self.value(x)
    }
}

/// `f_E(t) = h((t − E) / E)`: 1 on `(−∞, E]`, 0 on `[2E, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothCutoff {
    pub scale: f64,
    step: SmoothStep,
}

pub fn make_cutoff(energy: f64) -> Result<SmoothCutoff> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(LabError::InvalidArgument(format!("cutoff scale E must be positive, got {energy}")));
    }
    Ok(SmoothCutoff { scale: energy, step: SmoothStep::new(energy, 2.0 * energy)? })
}

impl SmoothCutoff {
    pub fn value(&self, t: f64) -> f64 {
        self.step.value(t)
    }

    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        self.step.jet(t).derivative(order)
    }

    pub fn step(&self) -> SmoothStep {
        self.step
    }
}

impl SpectralFn for SmoothCutoff {
    fn eval(&self, x: f64) -> f64 {
        self.value(x)
    }
}

/// Scaled derivative bounds `sup_t |f_E^{(j)}(t)| E^j` on `[E, 2E]`.
#[derive(Debug, Clone, Serialize)]
pub struct CutoffAudit {
    pub scale: f64,
    pub grid_points: usize,
    pub orders: Vec<usize>,
    pub scaled_sup: Vec<f64>,
    /// Max relative gap between `f^{(j)}` and a central difference of `f^{(j−1)}`.
    pub finite_difference_error: Vec<f64>,
    pub monotone: bool,
    pub in_unit_range: bool,
    pub plateaus_exact: bool,
}

pub fn audit_cutoff(cutoff: &SmoothCutoff, dim: usize, grid_points: usize) -> Result<CutoffAudit> {
    if grid_points < 3 {
        return Err(LabError::InvalidArgument("audit grid needs at least 3 points".into()));
    }
    let e = cutoff.scale;
    let top = (2 * dim + 3).min(MAX_DERIVATIVE);
    let orders: Vec<usize> = (1..=top).collect();
    let grid: Vec<f64> = (0..grid_points).map(|i| e + e * i as f64 / (grid_points - 1) as f64).collect();
    let jets: Vec<Jet> = grid.iter().map(|&t| cutoff.step.jet(t)).collect();

    let scaled_sup = orders
        .iter()
        .map(|&j| jets.iter().map(|z| z.derivative(j).abs()).fold(0.0, f64::max) * e.powi(j as i32))
        .collect();

    let step = 2e-5 * e;
    let finite_difference_error = orders
        .iter()
        .map(|&j| {
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for &t in grid.iter().skip(1).take(grid_points - 2) {
                let exact = cutoff.derivative(t, j);
                let fd = (cutoff.derivative(t + step, j - 1) - cutoff.derivative(t - step, j - 1)) / (2.0 * step);
                worst = worst.max((exact - fd).abs());
                scale = scale.max(exact.abs());
            }
            worst / scale
        })
        .collect();

    let values: Vec<f64> = jets.iter().map(|z| z.value()).collect();
    Ok(CutoffAudit {
        scale: e,
        grid_points,
        orders,
        scaled_sup,
        finite_difference_error,
        monotone: values.windows(2).all(|w| w[1] <= w[0]),
        in_unit_range: values.iter().all(|v| (0.0..=1.0).contains(v)),
        plateaus_exact: [0.0, 0.5 * e, e].iter().all(|&t| cutoff.value(t) == 1.0)
            && [2.0 * e, 3.0 * e].iter().all(|&t| cutoff.value(t) == 0.0),
    })
}
