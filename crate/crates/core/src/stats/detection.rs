//! Monte-Carlo power curves for the fixed-sample test.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::TimingSample;
use crate::worksim::{simulate_pow_time, WorkerProfile};

use super::{fixed_sample_threshold, TestConfig};

pub const MIN_TRIALS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionGrid {
    pub lambda_min: f64,
    pub alpha: f64,
    pub difficulty: u32,
    pub sample_counts: Vec<usize>,
    pub trials: usize,
    pub t0_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionPoint {
    pub n: usize,
    pub honest_accept: f64,
    pub deviant_accept: f64,
}

fn accept_rate(profile: &WorkerProfile, grid: &DetectionGrid, n: usize, seed: u64) -> Result<f64> {
    let cfg = TestConfig::fixed_sample(grid.lambda_min, grid.alpha, n, grid.t0_ns)?;
    let tau = fixed_sample_threshold(&cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut accepted = 0usize;
    for _ in 0..grid.trials {
        let total_ns: u128 = (0..n)
            .map(|_| {
                let l = simulate_pow_time(profile, grid.difficulty, &mut rng);
                TimingSample::new(l.total_ns, l.kernel_ns, grid.t0_ns).map(|s| s.total_time_ns as u128)
            })
            .sum::<Result<u128>>()?;
        if total_ns as f64 * 1e-9 <= tau {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / grid.trials as f64)
}

/// Empirical accept probability of each profile at every grid point.
pub fn detection_curve(
    honest: &WorkerProfile,
    deviant: &WorkerProfile,
    grid: &DetectionGrid,
    seed: u64,
) -> Result<Vec<DetectionPoint>> {
    if grid.trials < MIN_TRIALS {
        return Err(Error::param(format!("detection curves need at least {MIN_TRIALS} trials")));
    }
    honest.validate()?;
    deviant.validate()?;
    grid.sample_counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if n == 0 {
                return Err(Error::param("grid point n = 0"));
            }
            let base = seed.wrapping_add(2 * i as u64);
            Ok(DetectionPoint {
                n,
                honest_accept: accept_rate(honest, grid, n, base)?,
                deviant_accept: accept_rate(deviant, grid, n, base.wrapping_add(1))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ns: Vec<usize>) -> DetectionGrid {
        DetectionGrid {
            lambda_min: 1.0,
            alpha: 0.05,
            difficulty: 8,
            sample_counts: ns,
            trials: MIN_TRIALS,
            t0_ns: 0,
        }
    }

    #[test]
    fn separates_at_n50() {
        let honest = WorkerProfile::with_pow_rate(2.0, 8);
        let deviant = WorkerProfile::with_pow_rate(0.5, 8);
        let pts = detection_curve(&honest, &deviant, &grid(vec![5, 50]), 1).unwrap();
        assert!(pts[1].honest_accept >= 0.99, "{:?}", pts[1]);
        assert!(pts[1].deviant_accept <= 0.01, "{:?}", pts[1]);
        // power grows with n
        assert!(pts[1].deviant_accept <= pts[0].deviant_accept);
    }

    #[test]
    fn rejects_bad_grids() {
        let p = WorkerProfile::default();
        assert!(detection_curve(&p, &p, &grid(vec![0]), 1).is_err());
        let mut few = grid(vec![5]);
        few.trials = 10;
        assert!(detection_curve(&p, &p, &few, 1).is_err());
    }
}
