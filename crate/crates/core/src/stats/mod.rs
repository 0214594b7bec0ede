//! Solve-time models and the hypothesis tests that turn timings into verdicts.
//!
//! Everything here is generic over the floating-point type; `f64` aliases
//! live at the crate root.

use std::collections::BTreeMap;
use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::TimingSample;

pub mod detection;
pub mod gof;
pub mod special;

pub use detection::{detection_curve, DetectionGrid, DetectionPoint};
pub use gof::{
    chi_square_gof, geometric_gof, ks_exponential, ks_test, ks_uniform, lag1_autocorrelation, mean, variance,
    GofResult,
};
pub use special::{chi_square_cdf, chi_square_quantile, poisson_cdf, poisson_quantile};

/// Scalar type accepted by the statistics layer.
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

fn lit<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("constant representable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn from_accept(accept: bool) -> Self {
        if accept {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }

    pub fn is_accept(&self) -> bool {
        *self == Verdict::Accept
    }

    /// Process exit status: 0 accept, 1 reject.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Accept => 0,
            Verdict::Reject => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision<F> {
    pub verdict: Verdict,
    pub statistic: F,
    pub threshold: F,
    pub samples_used: usize,
}

/// Aggregate solution rate `lambda = r * p * M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel<F> {
    pub hash_rate: F,
    pub threads: u32,
    pub success_p: F,
}

impl<F: Real> RateModel<F> {
    pub fn new(hash_rate: F, threads: u32, success_p: F) -> Result<Self> {
        if !(hash_rate > F::zero()) || threads == 0 || !(success_p > F::zero() && success_p <= F::one()) {
            return Err(Error::param("rate model needs positive r, M and p in (0, 1]"));
        }
        Ok(Self {
            hash_rate,
            threads,
            success_p,
        })
    }

    pub fn for_difficulty(hash_rate: F, threads: u32, difficulty: u32) -> Result<Self> {
        Self::new(hash_rate, threads, lit::<F>(2.0).powi(-(difficulty as i32)))
    }

    pub fn lambda(&self) -> F {
        self.hash_rate * self.success_p * F::from_u32(self.threads).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestWindow<F> {
    /// Fixed number of solutions.
    Samples(usize),
    /// Fixed observation window in seconds.
    Seconds(F),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig<F> {
    pub lambda_min: F,
    pub alpha: F,
    pub window: TestWindow<F>,
    pub t0_ns: u64,
}

impl<F: Real> TestConfig<F> {
    pub fn fixed_sample(lambda_min: F, alpha: F, n: usize, t0_ns: u64) -> Result<Self> {
        let cfg = Self {
            lambda_min,
            alpha,
            window: TestWindow::Samples(n),
            t0_ns,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fixed_time(lambda_min: F, alpha: F, t_window_s: F) -> Result<Self> {
        let cfg = Self {
            lambda_min,
            alpha,
            window: TestWindow::Seconds(t_window_s),
            t0_ns: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > F::zero() && self.alpha < F::one()) {
            return Err(Error::param("alpha must lie in (0, 1)"));
        }
        if !(self.lambda_min > F::zero()) || !self.lambda_min.is_finite() {
            return Err(Error::param("lambda_min must be positive"));
        }
        match self.window {
            TestWindow::Samples(0) => Err(Error::param("sample count must be at least 1")),
            TestWindow::Seconds(t) if !(t > F::zero()) => Err(Error::param("time window must be positive")),
            _ => Ok(()),
        }
    }

    fn t0_secs(&self) -> F {
        F::from_u64(self.t0_ns).unwrap() * lit(1e-9)
    }
}

/// `tau = chi2_{2n, 1-alpha} / (2 lambda_min) + n t0`, seconds.
pub fn fixed_sample_threshold<F: Real>(cfg: &TestConfig<F>) -> Result<F> {
    cfg.validate()?;
    let TestWindow::Samples(n) = cfg.window else {
        return Err(Error::param("fixed-sample test needs a sample-count window"));
    };
    let q = chi_square_quantile(2 * n as u64, F::one() - cfg.alpha)?;
    let nf = F::from_usize(n).unwrap();
    Ok(q / (lit::<F>(2.0) * cfg.lambda_min) + nf * cfg.t0_secs())
}

/// Accept iff the summed raw solve time stays within the threshold.
pub fn fixed_sample_test<F: Real>(samples: &[TimingSample], cfg: &TestConfig<F>) -> Result<Decision<F>> {
    if samples.is_empty() {
        return Err(Error::param("fixed-sample test on empty sample"));
    }
    let TestWindow::Samples(n) = cfg.window else {
        return Err(Error::param("fixed-sample test needs a sample-count window"));
    };
    if samples.len() != n {
        return Err(Error::param(format!("expected {n} samples, got {}", samples.len())));
    }
    let tau = fixed_sample_threshold(cfg)?;
    let total_ns: u128 = samples.iter().map(|s| s.total_time_ns as u128).sum();
    let s = F::from_u128(total_ns).unwrap() * lit(1e-9);
    Ok(Decision {
        verdict: Verdict::from_accept(s <= tau),
        statistic: s,
        threshold: tau,
        samples_used: n,
    })
}

/// Critical count `k_crit = poisson_quantile(lambda_min t, alpha)`.
pub fn fixed_time_critical<F: Real>(cfg: &TestConfig<F>) -> Result<u64> {
    cfg.validate()?;
    let TestWindow::Seconds(t) = cfg.window else {
        return Err(Error::param("fixed-time test needs a time window"));
    };
    poisson_quantile(cfg.lambda_min * t, cfg.alpha)
}

/// Accept iff at least `k_crit` solutions arrived in the window.
pub fn fixed_time_test<F: Real>(solutions: u64, cfg: &TestConfig<F>) -> Result<Decision<F>> {
    let k_crit = fixed_time_critical(cfg)?;
    Ok(Decision {
        verdict: Verdict::from_accept(solutions >= k_crit),
        statistic: F::from_u64(solutions).unwrap(),
        threshold: F::from_u64(k_crit).unwrap(),
        samples_used: solutions as usize,
    })
}

/// One-sided lower confidence bound `chi2_{2K, alpha} / (2t)`; zero when `K = 0`.
pub fn rate_lower_bound<F: Real>(solutions: u64, t_secs: F, alpha: F) -> Result<F> {
    if !(t_secs > F::zero()) {
        return Err(Error::param("observation window must be positive"));
    }
    if solutions == 0 {
        return Ok(F::zero());
    }
    Ok(chi_square_quantile(2 * solutions, alpha)? / (lit::<F>(2.0) * t_secs))
}

/// Continuous-measurement rule: accept iff the mean adjusted round time is at
/// most `1 / lambda_min`.
pub fn mean_round_decision<F: Real>(adjusted_secs: &[F], lambda_min: F) -> Result<Decision<F>> {
    if !(lambda_min > F::zero()) {
        return Err(Error::param("lambda_min must be positive"));
    }
    if adjusted_secs.is_empty() {
        return Err(Error::Inconclusive("no valid rounds".into()));
    }
    let mean = gof::mean(adjusted_secs);
    let tau = F::one() / lambda_min;
    Ok(Decision {
        verdict: Verdict::from_accept(mean <= tau),
        statistic: mean,
        threshold: tau,
        samples_used: adjusted_secs.len(),
    })
}

/// `Util(M) = (M / t(M)) / max_M (M / t(M))`.
pub fn utilization_proxy<F: Real>(batch_times: &BTreeMap<u32, F>) -> Result<BTreeMap<u32, F>> {
    if batch_times.is_empty() {
        return Err(Error::param("utilization needs at least one batch size"));
    }
    if batch_times.values().any(|&t| !(t > F::zero())) {
        return Err(Error::param("batch times must be positive"));
    }
    let throughput: BTreeMap<u32, F> = batch_times
        .iter()
        .map(|(&m, &t)| (m, F::from_u32(m).unwrap() / t))
        .collect();
    let best = throughput.values().fold(F::zero(), |a, &b| a.max(b));
    Ok(throughput.into_iter().map(|(m, x)| (m, x / best)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn secs(v: &[f64]) -> Vec<TimingSample> {
        v.iter()
            .map(|&s| TimingSample::new((s * 1e9) as u64, 0, 0).unwrap())
            .collect()
    }

    #[test]
    fn fixed_sample_examples() {
        let cfg = TestConfig::fixed_sample(1.0, 0.05, 20, 0).unwrap();
        let accept = fixed_sample_test(&secs(&[1.0; 20]), &cfg).unwrap();
        assert_eq!(accept.verdict, Verdict::Accept);
        assert!((accept.threshold - 27.879).abs() < 1e-3);
        let reject = fixed_sample_test(&secs(&[1.5; 20]), &cfg).unwrap();
        assert_eq!(reject.verdict, Verdict::Reject);

        let shifted = TestConfig::fixed_sample(1.0, 0.05, 20, 500_000_000).unwrap();
        let delta = fixed_sample_threshold(&shifted).unwrap() - fixed_sample_threshold(&cfg).unwrap();
        assert!((delta - 10.0).abs() < 1e-9);

        assert!(fixed_sample_test::<f64>(&[], &cfg).is_err());
        assert!(fixed_sample_test(&secs(&[1.0; 3]), &cfg).is_err());
        assert!(TestConfig::fixed_sample(1.0, 0.0, 20, 0).is_err());
        assert!(TestConfig::fixed_sample(0.0, 0.05, 20, 0).is_err());
        assert!(TestConfig::fixed_sample(1.0, 0.05, 0, 0).is_err());
    }

    #[test]
    fn fixed_time_examples() {
        let cfg = TestConfig::fixed_time(1.0, 0.05, 10.0).unwrap();
        assert_eq!(fixed_time_critical(&cfg).unwrap(), 5);
        assert_eq!(fixed_time_test(5, &cfg).unwrap().verdict, Verdict::Accept);
        assert_eq!(fixed_time_test(4, &cfg).unwrap().verdict, Verdict::Reject);
        assert_eq!(fixed_time_test(0, &cfg).unwrap().verdict, Verdict::Reject);
        assert!(TestConfig::fixed_time(1.0, 0.05, 0.0).is_err());
    }

    #[test]
    fn rate_bound_examples() {
        assert_eq!(rate_lower_bound(0, 10.0, 0.05).unwrap(), 0.0);
        let b = rate_lower_bound(20, 10.0f64, 0.05).unwrap();
        assert!((b - 1.3255).abs() < 1e-3, "{b}");
        let half = rate_lower_bound(20, 20.0f64, 0.05).unwrap();
        assert!((half * 2.0 - b).abs() < 1e-12);
        assert!(rate_lower_bound(3, 0.0f64, 0.05).is_err());
    }

    #[test]
    fn mean_round_rule() {
        let d = mean_round_decision(&[1.5, 1.8, 2.1], 0.5).unwrap();
        assert_eq!(d.verdict, Verdict::Accept);
        assert!((d.statistic - 1.8).abs() < 1e-12);
        assert_eq!(mean_round_decision(&[2.5, 2.5, 2.5], 0.5).unwrap().verdict, Verdict::Reject);
        assert!(matches!(mean_round_decision::<f64>(&[], 0.5), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn utilization_examples() {
        let single = utilization_proxy(&BTreeMap::from([(4, 3.0)])).unwrap();
        assert_eq!(single[&4], 1.0);
        let two = utilization_proxy(&BTreeMap::from([(1, 1.0), (2, 1.0)])).unwrap();
        assert_eq!((two[&1], two[&2]), (0.5, 1.0));
        assert!(utilization_proxy::<f64>(&BTreeMap::new()).is_err());
        assert!(utilization_proxy(&BTreeMap::from([(1, 0.0)])).is_err());
    }

    #[test]
    fn rate_model() {
        let m = RateModel::for_difficulty(1024.0, 4, 10).unwrap();
        assert_eq!(m.lambda(), 4.0);
        assert!(RateModel::new(1.0, 0, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn utilization_max_is_one(times in prop::collection::btree_map(1u32..512, 0.001f64..100.0, 1..20)) {
            let u = utilization_proxy(&times).unwrap();
            let max = u.values().cloned().fold(0.0, f64::max);
            prop_assert_eq!(max, 1.0);
            prop_assert!(u.values().all(|&v| v > 0.0 && v <= 1.0));
        }

        #[test]
        fn threshold_monotone_in_alpha(n in 1usize..200, a in 0.001f64..0.4) {
            let lo = fixed_sample_threshold(&TestConfig::fixed_sample(1.0, a, n, 0).unwrap()).unwrap();
            let hi = fixed_sample_threshold(&TestConfig::fixed_sample(1.0, a / 2.0, n, 0).unwrap()).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn chi_square_quantile_inverts_cdf(dof in 1u64..300, p in 0.001f64..0.999) {
            let q = chi_square_quantile(dof, p).unwrap();
            prop_assert!((chi_square_cdf(dof, q) - p).abs() < 1e-9);
        }

        #[test]
        fn poisson_quantile_is_minimal(mu in 0.01f64..200.0, p in 0.001f64..0.999) {
            let k = poisson_quantile(mu, p).unwrap();
            prop_assert!(poisson_cdf(k, mu) >= p);
            if k > 0 {
                prop_assert!(poisson_cdf(k - 1, mu) < p);
            }
        }
    }
}
