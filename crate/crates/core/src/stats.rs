//! Small statistics helpers.

use serde::{Deserialize, Serialize};

/// Mean with standard error of the mean.
/// Whether `successes / trials` is within `z` null standard errors of `p0`.
/// A zero-probability point must never be observed.
pub fn binomial_within(successes: u64, trials: u64, p0: f64, z: f64) -> bool {
    let f = successes as f64 / trials as f64;
    if p0 <= 0.0 || p0 >= 1.0 {
        return f == p0;
    }
    (f - p0).abs() <= z * (p0 * (1.0 - p0) / trials as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: u64,
}

impl MeanSe {
    pub fn exact(value: f64) -> Self {
        MeanSe { mean: value, se: 0.0, count: 0 }
    }

    /// `|self - target| <= z * se`, treating equal infinities as agreement.
    pub fn within(&self, target: f64, z: f64) -> bool {
        if self.mean == target {
            return true;
        }
        (self.mean - target).abs() <= z * self.se
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accum {
    pub count: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl Accum {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, other: &Accum) {
        self.count += other.count;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        ((self.sumsq - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn finish(&self) -> MeanSe {
        if self.count == 0 {
            return MeanSe { mean: f64::NAN, se: f64::NAN, count: 0 };
        }
        MeanSe {
            mean: self.mean(),
            se: (self.variance() / self.count as f64).sqrt(),
            count: self.count,
        }
    }
}

impl FromIterator<f64> for Accum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut a = Accum::default();
        for x in iter {
            a.push(x);
        }
        a
    }
}

/// Binomial proportion with its standard error.
pub fn proportion(successes: u64, trials: u64) -> MeanSe {
    if trials == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, count: 0 };
    }
    let f = successes as f64 / trials as f64;
    MeanSe { mean: f, se: (f * (1.0 - f) / trials as f64).sqrt(), count: trials }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn ols(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accum_matches_direct() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let a: Accum = xs.iter().copied().collect();
        let m = a.finish();
        assert_eq!(m.mean, 3.5);
        let var = xs.iter().map(|x| (x - 3.5) * (x - 3.5)).sum::<f64>() / 3.0;
        assert!((m.se - (var / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = ols(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn within_handles_infinities() {
        let m = MeanSe::exact(f64::NEG_INFINITY);
        assert!(m.within(f64::NEG_INFINITY, 3.0));
        assert!(!m.within(0.0, 3.0));
    }
}
