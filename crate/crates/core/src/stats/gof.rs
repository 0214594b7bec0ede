//! Goodness-of-fit and dependence checks used on simulated and measured samples.

use crate::error::{Error, Result};

use super::special::{chi_square_cdf, kolmogorov_sf};
use super::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult<F> {
    pub statistic: F,
    pub p_value: F,
    pub dof: u64,
}

impl<F: Real> GofResult<F> {
    pub fn passes(&self, significance: F) -> bool {
        self.p_value >= significance
    }
}

pub fn mean<F: Real>(xs: &[F]) -> F {
    let n = F::from_usize(xs.len()).unwrap();
    xs.iter().fold(F::zero(), |a, &x| a + x) / n
}

/// Unbiased sample variance.
pub fn variance<F: Real>(xs: &[F]) -> F {
    let m = mean(xs);
    let n = F::from_usize(xs.len()).unwrap();
    xs.iter().fold(F::zero(), |a, &x| a + (x - m) * (x - m)) / (n - F::one())
}

/// One-sample Kolmogorov-Smirnov test against `cdf`, asymptotic p-value with
/// the Stephens small-sample correction.
pub fn ks_test<F: Real>(samples: &[F], cdf: impl Fn(F) -> F) -> Result<GofResult<F>> {
    if samples.is_empty() {
        return Err(Error::param("KS test on empty sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = F::from_usize(xs.len()).unwrap();
    let mut d = F::zero();
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let i = F::from_usize(i).unwrap();
        d = d.max(f - i / n).max((i + F::one()) / n - f);
    }
    let sqrt_n = n.sqrt();
    let adj = sqrt_n + F::from_f64(0.12).unwrap() + F::from_f64(0.11).unwrap() / sqrt_n;
    Ok(GofResult {
        statistic: d,
        p_value: kolmogorov_sf(adj * d),
        dof: 0,
    })
}

pub fn ks_exponential<F: Real>(samples: &[F], rate: F) -> Result<GofResult<F>> {
    ks_test(samples, |x| {
        if x <= F::zero() {
            F::zero()
        } else {
            F::one() - (-rate * x).exp()
        }
    })
}

pub fn ks_uniform<F: Real>(samples: &[F], lo: F, hi: F) -> Result<GofResult<F>> {
    ks_test(samples, |x| ((x - lo) / (hi - lo)).max(F::zero()).min(F::one()))
}

/// Pearson chi-square over paired observed/expected counts.
/// `fitted` parameters reduce the degrees of freedom.
pub fn chi_square_gof<F: Real>(observed: &[u64], expected: &[F], fitted: u64) -> Result<GofResult<F>> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::param("chi-square needs matching bins, at least two"));
    }
    if expected.iter().any(|&e| !(e > F::zero())) {
        return Err(Error::param("expected bin counts must be positive"));
    }
    let stat = observed.iter().zip(expected).fold(F::zero(), |acc, (&o, &e)| {
        let o = F::from_u64(o).unwrap();
        acc + (o - e) * (o - e) / e
    });
    let dof = (observed.len() as u64 - 1)
        .checked_sub(fitted)
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::param("no degrees of freedom left"))?;
    Ok(GofResult {
        statistic: stat,
        p_value: F::one() - chi_square_cdf(dof, stat),
        dof,
    })
}

/// Chi-square fit of attempt counts (support 1, 2, ...) to geometric(p).
/// Adjacent values merge until each bin expects at least `min_expected`;
/// the tail is pooled into the last bin.
pub fn geometric_gof<F: Real>(attempts: &[u64], p: F, min_expected: F) -> Result<GofResult<F>> {
    if attempts.is_empty() || !(p > F::zero() && p <= F::one()) {
        return Err(Error::param("geometric fit needs samples and p in (0, 1]"));
    }
    let n = F::from_usize(attempts.len()).unwrap();
    let q = F::one() - p;
    let pow_q = |k: u64| q.powf(F::from_u64(k).unwrap());
    // inclusive ranges [lo, hi]; the last one is the open tail
    let mut edges: Vec<(u64, u64)> = Vec::new();
    let mut expected: Vec<F> = Vec::new();
    let mut lo: u64 = 1;
    loop {
        let rest = n * pow_q(lo - 1);
        let mut hi = lo;
        let mut e = F::zero();
        while e < min_expected && e < rest {
            e = e + n * p * pow_q(hi - 1);
            hi += 1;
        }
        if rest - e < min_expected {
            edges.push((lo, u64::MAX));
            expected.push(rest);
            break;
        }
        edges.push((lo, hi - 1));
        expected.push(e);
        lo = hi;
    }
    let mut observed = vec![0u64; edges.len()];
    for &a in attempts {
        if a == 0 {
            return Err(Error::param("attempt counts start at 1"));
        }
        let idx = edges.iter().position(|&(lo, hi)| a >= lo && a <= hi).unwrap();
        observed[idx] += 1;
    }
    chi_square_gof(&observed, &expected, 0)
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation<F: Real>(xs: &[F]) -> Result<F> {
    if xs.len() < 3 {
        return Err(Error::param("autocorrelation needs at least three samples"));
    }
    let m = mean(xs);
    let denom = xs.iter().fold(F::zero(), |a, &x| a + (x - m) * (x - m));
    if denom <= F::zero() {
        return Err(Error::param("constant series"));
    }
    let num = xs
        .windows(2)
        .fold(F::zero(), |a, w| a + (w[0] - m) * (w[1] - m));
    Ok(num / denom)
}
