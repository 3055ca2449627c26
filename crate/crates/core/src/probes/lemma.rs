use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::cutoff::SmoothStep;
use crate::error::{LabError, Result};
use crate::estimators::{map_collect, Sampling};
use crate::rng::{stream, DOMAIN_LEMMA};
use crate::spectral::{eigensolve_dense, SpectralFn};

pub const MAX_LEMMA_DIM: usize = 16;
/// Allowed negative margin, for roundoff.
pub const LEMMA_TOLERANCE: f64 = 1e-9;
const HYPOTHESIS_GRID: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpectralFunction {
    Constant(f64),
    /// `χ_{(−∞, upper]}`.
    Indicator { upper: f64 },
    Step(SmoothStep),
}

impl SpectralFn for SpectralFunction {
    fn eval(&self, x: f64) -> f64 {
        match self {
            SpectralFunction::Constant(c) => *c,
            SpectralFunction::Indicator { upper } => {
                if x <= *upper {
                    1.0
                } else {
                    0.0
                }
            }
            SpectralFunction::Step(s) => s.value(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PerturbationFamily {
    NonnegativeDiagonal,
    Symmetric,
}

/// `H = H₀ + W` with `f = χ_{(−∞,E₀]} f ≥ 0` and `χ_{(−∞,E₀]} ≤ g ≤ 1`.
#[derive(Debug, Clone)]
pub struct LemmaCase {
    pub h0: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub threshold: f64,
    pub f: SpectralFunction,
    pub g: SpectralFunction,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LemmaOutcome {
    /// `tr f(H) W`.
    pub lhs: f64,
    /// `tr f(H) W g(H₀)`.
    pub rhs: f64,
    pub margin: f64,
}

fn check_hypotheses(case: &LemmaCase, points: &[f64]) -> Result<()> {
    let e0 = case.threshold;
    for &x in points {
        let (f, g) = (case.f.eval(x), case.g.eval(x));
        if !(f >= 0.0) || (x > e0 && f != 0.0) {
            return Err(LabError::Hypothesis(format!("f({x}) = {f} violates 0 ≤ f = χ_(−∞,{e0}] f")));
        }
        if !(0.0..=1.0).contains(&g) || (x <= e0 && g != 1.0) {
            return Err(LabError::Hypothesis(format!("g({x}) = {g} violates χ_(−∞,{e0}] ≤ g ≤ 1")));
        }
    }
    Ok(())
}

/// Margin `tr f(H)Wg(H₀) − tr f(H)W`, both traces from full eigendecompositions.
pub fn check_trace_lemma(case: &LemmaCase) -> Result<LemmaOutcome> {
    let n = case.h0.nrows();
    if n == 0 || n > MAX_LEMMA_DIM {
        return Err(LabError::InvalidArgument(format!("case dimension {n} outside 1..={MAX_LEMMA_DIM}")));
    }
    if case.w.shape() != case.h0.shape() {
        return Err(LabError::Mismatch("H₀ and W differ in shape".into()));
    }
    let h = &case.h0 + &case.w;
    let sys = eigensolve_dense(h, true)?;
    let sys0 = eigensolve_dense(case.h0.clone(), true)?;

    let lo = sys.values[0].min(sys0.values[0]) - 1.0;
    let hi = sys.values[n - 1].max(sys0.values[n - 1]) + 1.0;
    let mut points: Vec<f64> = (0..HYPOTHESIS_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (HYPOTHESIS_GRID - 1) as f64)
        .collect();
    points.extend(&sys.values);
    points.extend(&sys0.values);
    points.push(case.threshold);
    check_hypotheses(case, &points)?;

    let fw = sys.apply_function(&case.f)? * &case.w;
    let lhs = fw.trace();
    let rhs = match case.g {
        // g(H₀) = c·1 exactly, no roundoff from the eigenbasis
        SpectralFunction::Constant(c) => c * lhs,
        g => {
            let gm = sys0.apply_function(&g)?;
            fw.component_mul(&gm.transpose()).sum()
        }
    };
    Ok(LemmaOutcome { lhs, rhs, margin: rhs - lhs })
}

fn symmetric_gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let x: f64 = rng.sample(StandardNormal);
            let v = if i == j { x * scale } else { x * scale / std::f64::consts::SQRT_2 };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Case `index` of the generated corpus. Even indices use a nonnegative
/// diagonal `W`, odd ones a general symmetric `W`. Every tenth case has `g ≡ 1`.
pub fn generate_case(seed: u64, index: u64) -> (PerturbationFamily, LemmaCase) {
    let mut rng = stream(seed, DOMAIN_LEMMA, index);
    let n = rng.random_range(2..=12usize);
    // GOE-type, spectral radius about 1
    let h0 = symmetric_gaussian(&mut rng, n, 1.0 / (2.0 * n as f64).sqrt());
    let family = if index.is_multiple_of(2) {
        PerturbationFamily::NonnegativeDiagonal
    } else {
        PerturbationFamily::Symmetric
    };
    let amplitude = rng.random_range(0.05..2.0);
    let w = match family {
        PerturbationFamily::NonnegativeDiagonal => {
            DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| amplitude * rng.random::<f64>()))
        }
        PerturbationFamily::Symmetric => symmetric_gaussian(&mut rng, n, amplitude / (2.0 * n as f64).sqrt()),
    };
    let threshold = rng.random_range(-1.0..1.5);
    let fw = rng.random_range(0.05..1.0);
    let gw = rng.random_range(0.05..1.0);
    let f = if index % 10 == 5 {
        SpectralFunction::Indicator { upper: threshold }
    } else {
        SpectralFunction::Step(SmoothStep { one_below: threshold - fw, zero_above: threshold })
    };
    let g = if index.is_multiple_of(10) {
        SpectralFunction::Constant(1.0)
    } else {
        SpectralFunction::Step(SmoothStep { one_below: threshold, zero_above: threshold + gw })
    };
    (family, LemmaCase { h0, w, threshold, f, g })
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub family: PerturbationFamily,
    pub cases: usize,
    pub rejected: usize,
    pub min_margin: f64,
    pub violations: usize,
    /// Largest `|margin|` among `g ≡ 1` cases.
    pub equality_max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaCorpusReport {
    pub cases: u64,
    pub families: Vec<FamilySummary>,
}

impl LemmaCorpusReport {
    pub fn violations(&self) -> usize {
        self.families.iter().map(|f| f.violations).sum()
    }
}

/// Check `sampling.samples` generated cases.
pub fn run_lemma_corpus(sampling: &Sampling) -> Result<LemmaCorpusReport> {
    let outcomes = map_collect(sampling, |i| {
        let (family, case) = generate_case(sampling.seed, i);
        let equality = matches!(case.g, SpectralFunction::Constant(_));
        Ok((family, equality, check_trace_lemma(&case).ok()))
    })?;
    let families = [PerturbationFamily::NonnegativeDiagonal, PerturbationFamily::Symmetric]
        .into_iter()
        .map(|family| {
            let mine: Vec<_> = outcomes.iter().filter(|o| o.0 == family).collect();
            let accepted: Vec<(bool, LemmaOutcome)> = mine.iter().filter_map(|o| o.2.map(|m| (o.1, m))).collect();
            FamilySummary {
                family,
                cases: accepted.len(),
                rejected: mine.len() - accepted.len(),
                min_margin: accepted.iter().map(|a| a.1.margin).fold(f64::INFINITY, f64::min),
                violations: accepted.iter().filter(|a| a.1.margin < -LEMMA_TOLERANCE).count(),
                equality_max_abs: accepted
                    .iter()
                    .filter(|a| a.0)
                    .map(|a| a.1.margin.abs())
                    .fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(LemmaCorpusReport { cases: sampling.samples, families })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_case() -> LemmaCase {
        let h0 = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, -1.0, 0.5, -1.0, 0.0, -1.0, 1.0]);
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, 0.0, 1.2]));
        LemmaCase {
            h0,
            w,
            threshold: 0.2,
            f: SpectralFunction::Step(SmoothStep { one_below: -0.5, zero_above: 0.2 }),
            g: SpectralFunction::Step(SmoothStep { one_below: 0.2, zero_above: 0.9 }),
        }
    }

    #[test]
    fn unit_g_gives_equality() {
        let mut case = small_case();
        case.g = SpectralFunction::Constant(1.0);
        let out = check_trace_lemma(&case).unwrap();
        assert_eq!(out.margin, 0.0);
    }

    #[test]
    fn f_vanishing_on_spectrum_gives_zero() {
        let mut case = small_case();
        case.threshold = -5.0;
        case.f = SpectralFunction::Indicator { upper: -5.0 };
        case.g = SpectralFunction::Step(SmoothStep { one_below: -5.0, zero_above: -4.0 });
        let out = check_trace_lemma(&case).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.margin, 0.0);
    }

    #[test]
    fn margin_matches_dense_oracle() {
        // independent evaluation through the full matrices
        let case = small_case();
        let out = check_trace_lemma(&case).unwrap();
        let h = &case.h0 + &case.w;
        let eig = nalgebra::SymmetricEigen::new(h);
        let fh = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| case.f.eval(x)))
            * eig.eigenvectors.transpose();
        let eig0 = nalgebra::SymmetricEigen::new(case.h0.clone());
        let gh0 = &eig0.eigenvectors
            * DMatrix::from_diagonal(&eig0.eigenvalues.map(|x| case.g.eval(x)))
            * eig0.eigenvectors.transpose();
        let direct = (&fh * &case.w * &gh0).trace() - (&fh * &case.w).trace();
        assert!((out.margin - direct).abs() < 1e-13);
        assert!(out.margin >= -LEMMA_TOLERANCE);
    }

    #[test]
    fn hypothesis_violations_are_rejected() {
        let mut case = small_case();
        case.f = SpectralFunction::Indicator { upper: 0.5 };
        assert!(matches!(check_trace_lemma(&case), Err(LabError::Hypothesis(_))));
        let mut case = small_case();
        case.g = SpectralFunction::Step(SmoothStep { one_below: 0.0, zero_above: 0.9 });
        assert!(matches!(check_trace_lemma(&case), Err(LabError::Hypothesis(_))));
        let mut case = small_case();
        case.g = SpectralFunction::Constant(1.5);
        assert!(matches!(check_trace_lemma(&case), Err(LabError::Hypothesis(_))));
    }

    #[test]
    fn generated_cases_are_valid_and_symmetric() {
        for i in 0..200 {
            let (family, case) = generate_case(11, i);
            let n = case.h0.nrows();
            assert!((2..=12).contains(&n));
            assert_eq!(case.h0, case.h0.transpose());
            assert_eq!(case.w, case.w.transpose());
            if family == PerturbationFamily::NonnegativeDiagonal {
                assert!(case.w.iter().all(|&x| x >= 0.0));
            }
            let out = check_trace_lemma(&case).unwrap();
            assert!(out.margin >= -LEMMA_TOLERANCE, "case {i}: {}", out.margin);
        }
    }

    #[test]
    fn corpus_summary() {
        let rep = run_lemma_corpus(&Sampling::new(400, 3)).unwrap();
        assert_eq!(rep.violations(), 0);
        assert_eq!(rep.families.iter().map(|f| f.cases + f.rejected).sum::<usize>(), 400);
        for f in &rep.families {
            assert_eq!(f.equality_max_abs, 0.0);
        }
    }
}
