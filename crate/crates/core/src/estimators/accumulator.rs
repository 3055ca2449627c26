//! Monte Carlo accumulators whose merge is exactly commutative and associative.
//!
//! Sums are kept as non-overlapping floating-point expansions and rounded
//! once, correctly, when read. The reported mean and variance therefore do not
//! depend on the order in which realizations are added or on how a parallel
//! reduction groups them.

/// Error-free running sum of `f64` values (Shewchuk expansion).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let bv = hi - a;
    let lo = (a - (hi - bv)) + (b - bv);
    (hi, lo)
}

#[inline]
fn two_product(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite(), "non-finite value in ExactSum");
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn partials(&self) -> &[f64] {
        &self.partials
    }

    /// The exact sum rounded to nearest, ties to even.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            let (h, l) = two_sum(x, y);
            hi = h;
            lo = l;
            if lo != 0.0 {
                break;
            }
        }
        // half-way correction when the remaining partials push past the tie
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// Sample count, mean and sum of squared deviations of a scalar observable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct McAccumulator {
    n: u64,
    sum: ExactSum,
    sum_sq: ExactSum,
}

impl McAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &McAccumulator) {
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.n as f64
    }

    /// `M2 = Σ (x_i − x̄)² = (n Σx² − (Σx)²) / n`, with the bracket evaluated exactly
    /// from the stored expansions.
    pub fn m2(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let mut acc = ExactSum::new();
        for &q in self.sum_sq.partials() {
            let (p, e) = two_product(n, q);
            acc.add(p);
            acc.add(e);
        }
        let s = self.sum.partials();
        for &a in s {
            for &b in s {
                let (p, e) = two_product(a, b);
                acc.add(-p);
                acc.add(-e);
            }
        }
        (acc.value() / n).max(0.0)
    }

    /// Sample variance with the `n − 1` denominator.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2() / (self.n - 1) as f64
    }

    /// `sqrt(M2 / (n (n − 1)))`; NaN below two samples.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2() / (self.n as f64 * (self.n - 1) as f64)).sqrt()
    }
}

/// One accumulator per component of a vector-valued observable.
#[derive(Debug, Clone, PartialEq)]
pub struct McVector {
    parts: Vec<McAccumulator>,
}

impl McVector {
    pub fn new(len: usize) -> Self {
        Self { parts: vec![McAccumulator::new(); len] }
    }

    pub fn push(&mut self, xs: &[f64]) {
        assert_eq!(xs.len(), self.parts.len(), "observable length");
        for (acc, &x) in self.parts.iter_mut().zip(xs) {
            acc.push(x);
        }
    }

    pub fn merge(&mut self, other: &McVector) {
        for (a, b) in self.parts.iter_mut().zip(&other.parts) {
            a.merge(b);
        }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn get(&self, i: usize) -> &McAccumulator {
        &self.parts[i]
    }

    pub fn means(&self) -> Vec<f64> {
        self.parts.iter().map(McAccumulator::mean).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        self.parts.iter().map(McAccumulator::stderr).collect()
    }
}
