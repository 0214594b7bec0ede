//! Simulated worker: real puzzle solving with latencies drawn from a
//! configurable device profile.

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envelope::{Challenge, ChallengeParams, PreChallenge, PreResponse, Response, ResponsePayload};
use crate::error::{Error, Result};
use crate::fingerprint::{fingerprint_of, mask_chal_in_place, DeviceClassProfile};
use crate::gemm::solve_gemm_puzzle;
use crate::measurement::{Clock, WorkerSession};
use crate::pow::solve_pow;
use crate::primitives::{secs_to_ns, Digest};
use crate::residency::{expected_gap, residency_probe, BandwidthModel, ChalDataset, ResidencyMode};
use crate::vdf::{eval, prove_batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ResidencyState {
    Hot,
    Cold,
    /// Resident for rounds `1..=n`, evicted afterwards.
    EvictAfter { round: u64 },
}

impl ResidencyState {
    pub fn mode_at(&self, round: u64) -> ResidencyMode {
        match *self {
            ResidencyState::Hot => ResidencyMode::Hot,
            ResidencyState::Cold => ResidencyMode::Cold,
            ResidencyState::EvictAfter { round: n } if round <= n => ResidencyMode::Hot,
            ResidencyState::EvictAfter { .. } => ResidencyMode::Cold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Behavior {
    Honest,
    /// Forwards work elsewhere; solutions stay valid but arrive late.
    Outsourced { extra_latency_ns: u64 },
    /// Caches per-challenge work and replays it when a challenge repeats.
    PrecomputeAttempt,
}

/// Slowdown factors per hardware pathway (1 = idle device).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Contention {
    pub memory: f64,
    pub scalar: f64,
    pub tensor: f64,
}

impl Default for Contention {
    fn default() -> Self {
        Self {
            memory: 1.0,
            scalar: 1.0,
            tensor: 1.0,
        }
    }
}

impl Contention {
    pub fn uniform(factor: f64) -> Self {
        Self {
            memory: factor,
            scalar: factor,
            tensor: factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkerProfile {
    /// Argon2id evaluations per second per thread.
    pub hash_rate: f64,
    pub threads: u32,
    pub contention: Contention,
    pub residency: ResidencyState,
    pub network_t0_ns: u64,
    /// Modular squarings per second for one VDF instance.
    pub squaring_rate: f64,
    /// Field multiply-adds per second for GEMM.
    pub gemm_rate: f64,
    pub jitter_rel: f64,
    pub behavior: Behavior,
    /// Concurrent VDF instances before the device saturates.
    pub vdf_capacity: u32,
    pub bandwidth: BandwidthModel,
    /// Dataset size the timing law represents; defaults to the real CHAL size.
    pub modeled_chal_bytes: Option<u64>,
    /// Fraction of the cold-path transfer still paid with pre-touch enabled.
    pub pretouch_factor: f64,
}

impl Default for WorkerProfile {
    fn default() -> Self {
        Self {
            hash_rate: 4096.0,
            threads: 1,
            contention: Contention::default(),
            residency: ResidencyState::Hot,
            network_t0_ns: 0,
            squaring_rate: 1.0e6,
            gemm_rate: 1.0e9,
            jitter_rel: 0.02,
            behavior: Behavior::Honest,
            vdf_capacity: 128,
            bandwidth: BandwidthModel::default(),
            modeled_chal_bytes: None,
            pretouch_factor: 1.0,
        }
    }
}

impl WorkerProfile {
    /// Profile whose PoW solution rate at difficulty `d` is `lambda` per second.
    pub fn with_pow_rate(lambda: f64, difficulty: u32) -> Self {
        Self {
            hash_rate: lambda * 2f64.powi(difficulty as i32),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.contention;
        if [c.memory, c.scalar, c.tensor].iter().any(|&f| !(f >= 1.0) || !f.is_finite()) {
            return Err(Error::param("contention factors must be at least 1"));
        }
        if !(0.0..=0.2).contains(&self.jitter_rel) {
            return Err(Error::param("jitter_rel must lie in [0, 0.2]"));
        }
        if [self.hash_rate, self.squaring_rate, self.gemm_rate]
            .iter()
            .any(|&r| !(r > 0.0) || !r.is_finite())
            || self.threads == 0
            || self.vdf_capacity == 0
        {
            return Err(Error::param("rates, threads and capacity must be positive"));
        }
        if !(self.pretouch_factor > 0.0 && self.pretouch_factor <= 1.0) {
            return Err(Error::param("pretouch_factor must lie in (0, 1]"));
        }
        self.bandwidth.validate()
    }

    /// Expected PoW solutions per second at difficulty `d`.
    pub fn pow_lambda(&self, difficulty: u32) -> f64 {
        self.hash_rate * self.threads as f64 * 2f64.powi(-(difficulty as i32)) / self.contention.memory
    }

    /// Multiplicative Gaussian factor, truncated at three standard deviations.
    pub fn jitter<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.jitter_rel == 0.0 {
            return 1.0;
        }
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= 3.0 {
                return 1.0 + self.jitter_rel * z;
            }
        }
    }

    fn extra_latency_ns(&self) -> u64 {
        match self.behavior {
            Behavior::Outsourced { extra_latency_ns } => extra_latency_ns,
            _ => 0,
        }
    }

    /// Jitter applies to compute time; `t0` and outsourcing delay are added after.
    fn finish<R: RngCore + ?Sized>(&self, core_secs: f64, rng: &mut R) -> SimulatedLatency {
        let kernel_ns = secs_to_ns(core_secs * self.jitter(rng));
        SimulatedLatency {
            kernel_ns,
            total_ns: kernel_ns + self.network_t0_ns + self.extra_latency_ns(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedLatency {
    /// Device compute time as the worker would report it.
    pub kernel_ns: u64,
    /// What the challenger's clock observes.
    pub total_ns: u64,
}

/// Exponential solve time at rate `r M 2^-d / contention`.
pub fn simulate_pow_time<R: RngCore + ?Sized>(profile: &WorkerProfile, difficulty: u32, rng: &mut R) -> SimulatedLatency {
    let exp = Exp::new(profile.pow_lambda(difficulty)).expect("positive rate");
    let core: f64 = exp.sample(rng);
    profile.finish(core, rng)
}

/// Sequential squaring time; saturates once `instances` exceeds capacity.
pub fn simulate_vdf_time<R: RngCore + ?Sized>(
    profile: &WorkerProfile,
    delay: u64,
    instances: u32,
    rng: &mut R,
) -> SimulatedLatency {
    let occupancy = (instances as f64 / profile.vdf_capacity as f64).max(1.0);
    let core = delay as f64 / profile.squaring_rate * profile.contention.scalar * occupancy;
    profile.finish(core, rng)
}

/// Exponential in the number of `n^3` multiplications before success.
pub fn simulate_gemm_time<R: RngCore + ?Sized>(
    profile: &WorkerProfile,
    dimension: usize,
    difficulty: u32,
    rng: &mut R,
) -> SimulatedLatency {
    let per_attempt = (dimension as f64).powi(3) / profile.gemm_rate;
    let rate = 2f64.powi(-(difficulty as i32)) / (per_attempt * profile.contention.tensor);
    let core: f64 = Exp::new(rate).expect("positive rate").sample(rng);
    profile.finish(core, rng)
}

/// Hot: base latency plus a device-memory scan of `bytes`. Cold adds the
/// interconnect transfer `bytes / pci_bw`, scaled by the pre-touch factor.
pub fn simulate_residency_time<R: RngCore + ?Sized>(
    profile: &WorkerProfile,
    round: u64,
    bytes: u64,
    rng: &mut R,
) -> Result<(SimulatedLatency, ResidencyMode)> {
    let model = &profile.bandwidth;
    let mode = profile.residency.mode_at(round);
    let mut core_ns = model.hot_estimate_ns(bytes) as f64;
    if mode == ResidencyMode::Cold {
        core_ns += expected_gap(bytes, model)? as f64 * profile.pretouch_factor;
    }
    let core = core_ns * 1e-9 * profile.contention.memory;
    Ok((profile.finish(core, rng), mode))
}

/// Real computation behind a simulated device.
#[derive(Debug)]
pub struct WorkerEngine {
    profile: WorkerProfile,
    device: Option<DeviceClassProfile>,
    dataset: Option<ChalDataset>,
    residency_round: u64,
    seen: HashSet<Digest>,
}

impl WorkerEngine {
    pub fn new(profile: WorkerProfile, device: Option<DeviceClassProfile>) -> Result<Self> {
        profile.validate()?;
        if let Some(d) = &device {
            d.validate()?;
        }
        Ok(Self {
            profile,
            device,
            dataset: None,
            residency_round: 0,
            seen: HashSet::new(),
        })
    }

    pub fn profile(&self) -> &WorkerProfile {
        &self.profile
    }

    pub fn handle_pre(&mut self, pre: &PreChallenge) -> Result<PreResponse> {
        let mut chal = ChalDataset::init(pre.size_bytes, pre.block_size, pre.chal_seed)?;
        let r_gpu = match &self.device {
            Some(d) => Some(fingerprint_of(d)?),
            None => None,
        };
        if pre.fingerprint_masked {
            let r = r_gpu.ok_or(Error::Capability("worker has no device class profile"))?;
            mask_chal_in_place(&mut chal, &r)?;
        }
        self.dataset = Some(chal);
        self.residency_round = 0;
        Ok(PreResponse {
            session_id: pre.session_id.clone(),
            blocks: self.dataset.as_ref().map_or(0, |d| d.block_count()),
            r_gpu,
        })
    }

    /// Solves `challenge` for real.
    pub fn solve(&self, challenge: &Challenge) -> Result<ResponsePayload> {
        challenge.validate()?;
        let sid = challenge.sid();
        Ok(match &challenge.params {
            ChallengeParams::Pow(p) => ResponsePayload::Pow(solve_pow(challenge, p)?),
            ChallengeParams::Vdf(p) => {
                let insts = challenge.vdf_instances()?;
                let outputs = insts
                    .iter()
                    .map(|i| eval(&i.generator, i.delay, &p.modulus))
                    .collect::<Result<Vec<_>>>()?;
                ResponsePayload::Vdf {
                    proofs: prove_batch(&insts, &outputs, &p.modulus, sid.as_bytes())?,
                }
            }
            ChallengeParams::Gemm(p) => ResponsePayload::Gemm(solve_gemm_puzzle(sid.as_bytes(), p)?),
            ChallengeParams::Residency(p) => {
                let chal = self
                    .dataset
                    .as_ref()
                    .ok_or(Error::Capability("no challenge dataset; send a pre-challenge first"))?;
                ResponsePayload::Residency {
                    digest: residency_probe(chal, &challenge.salt, p)?,
                }
            }
        })
    }

    /// Latency this device would exhibit for `challenge`.
    pub fn latency<R: RngCore + ?Sized>(&mut self, challenge: &Challenge, rng: &mut R) -> Result<SimulatedLatency> {
        let p = &self.profile;
        let replay = matches!(p.behavior, Behavior::PrecomputeAttempt) && !self.seen.insert(challenge.sid());
        let lat = match &challenge.params {
            ChallengeParams::Pow(pp) => simulate_pow_time(p, pp.difficulty, rng),
            ChallengeParams::Vdf(vp) => {
                let longest = challenge
                    .vdf_instances()?
                    .iter()
                    .map(|i| i.delay)
                    .max()
                    .unwrap_or(0);
                simulate_vdf_time(p, longest, vp.instances, rng)
            }
            ChallengeParams::Gemm(gp) => simulate_gemm_time(p, gp.dimension, gp.difficulty, rng),
            ChallengeParams::Residency(_) => {
                self.residency_round += 1;
                let bytes = p
                    .modeled_chal_bytes
                    .or(self.dataset.as_ref().map(|d| d.size_bytes()))
                    .unwrap_or(0);
                simulate_residency_time(p, self.residency_round, bytes, rng)?.0
            }
        };
        if replay {
            // a repeated challenge is answered from the cache
            return Ok(SimulatedLatency {
                kernel_ns: 0,
                total_ns: p.network_t0_ns,
            });
        }
        Ok(lat)
    }

    pub fn respond<R: RngCore + ?Sized>(&mut self, challenge: &Challenge, rng: &mut R) -> Result<(Response, SimulatedLatency)> {
        let payload = self.solve(challenge)?;
        let lat = self.latency(challenge, rng)?;
        Ok((
            Response::new(challenge.session_id.clone(), payload, lat.kernel_ns),
            lat,
        ))
    }
}

/// In-process worker whose responses arrive after the simulated latency on a
/// clock shared with the challenger.
pub struct InProcessWorker<C: Clock> {
    engine: WorkerEngine,
    clock: C,
    rng: ChaCha20Rng,
}

impl<C: Clock> InProcessWorker<C> {
    pub fn new(profile: WorkerProfile, device: Option<DeviceClassProfile>, clock: C, seed: u64) -> Result<Self> {
        Ok(Self {
            engine: WorkerEngine::new(profile, device)?,
            clock,
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    pub fn engine(&self) -> &WorkerEngine {
        &self.engine
    }
}

impl<C: Clock> WorkerSession for InProcessWorker<C> {
    fn pre_challenge(&mut self, pre: &PreChallenge) -> Result<PreResponse> {
        self.engine.handle_pre(pre)
    }

    fn exchange(&mut self, challenge: &Challenge) -> Result<Response> {
        let start = self.clock.now_ns();
        let (response, lat) = self.engine.respond(challenge, &mut self.rng)?;
        self.clock.sleep_until(start + lat.total_ns);
        Ok(response)
    }
}

/// Draws `n` seeds for independent sessions from one master seed.
pub fn session_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    (0..n).map(|_| rng.gen()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::VdfParams;
    use crate::measurement::{continuous_measurement, ContinuousConfig, VirtualClock, WallClock};
    use crate::pow::{verify_pow, PowParams};
    use crate::primitives::{ns_to_secs, Salt};
    use crate::residency::{default_threshold_ns, ProbeParams};
    use crate::stats::{fixed_sample_test, ks_exponential, lag1_autocorrelation, mean, TestConfig, Verdict};
    use num_bigint::BigUint;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn secs(l: SimulatedLatency) -> f64 {
        ns_to_secs(l.total_ns)
    }

    #[test]
    fn pow_time_mean_and_contention() {
        let p = WorkerProfile {
            jitter_rel: 0.0,
            ..WorkerProfile::with_pow_rate(1.0, 8)
        };
        let mut r = rng(1);
        let xs: Vec<f64> = (0..100_000).map(|_| secs(simulate_pow_time(&p, 8, &mut r))).collect();
        assert!((mean(&xs) - 1.0).abs() < 0.01);
        let slow = WorkerProfile {
            contention: Contention::uniform(2.0),
            ..p.clone()
        };
        let ys: Vec<f64> = (0..100_000).map(|_| secs(simulate_pow_time(&slow, 8, &mut r))).collect();
        assert!((mean(&ys) / mean(&xs) - 2.0).abs() < 0.03);
        assert!(ks_exponential(&xs[..10_000], 1.0).unwrap().passes(0.01));
        assert!(lag1_autocorrelation(&xs[..10_000]).unwrap().abs() < 0.03);
    }

    #[test]
    fn pow_memorylessness() {
        // mean residual life E[X - s | X > s] is flat across elapsed-time deciles
        let p = WorkerProfile {
            jitter_rel: 0.0,
            ..WorkerProfile::with_pow_rate(1.0, 4)
        };
        let mut r = rng(2);
        let mut xs: Vec<f64> = (0..100_000).map(|_| secs(simulate_pow_time(&p, 4, &mut r))).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for decile in 0..9 {
            let s = xs[decile * xs.len() / 10];
            let tail: Vec<f64> = xs.iter().filter(|&&x| x > s).map(|&x| x - s).collect();
            let mrl = mean(&tail);
            assert!((mrl - 1.0).abs() <= 0.10, "decile {decile}: {mrl}");
        }
    }

    #[test]
    fn vdf_time_laws() {
        let p = WorkerProfile {
            jitter_rel: 0.0,
            ..WorkerProfile::default()
        };
        let mut r = rng(3);
        let a = simulate_vdf_time(&p, 1000, 1, &mut r).kernel_ns;
        assert_eq!(simulate_vdf_time(&p, 2000, 1, &mut r).kernel_ns, 2 * a);
        assert_eq!(simulate_vdf_time(&p, 1000, 64, &mut r).kernel_ns, a);
        assert_eq!(simulate_vdf_time(&p, 1000, 256, &mut r).kernel_ns, 2 * a);
        let j = WorkerProfile::default();
        let xs: Vec<f64> = (0..1000).map(|_| secs(simulate_vdf_time(&j, 1 << 14, 8, &mut r))).collect();
        let cv = crate::stats::variance(&xs).sqrt() / mean(&xs);
        assert!(cv < j.jitter_rel * 1.1, "cv {cv}");
    }

    #[test]
    fn jitter_truncated() {
        let p = WorkerProfile {
            jitter_rel: 0.2,
            ..WorkerProfile::default()
        };
        let mut r = rng(4);
        for _ in 0..10_000 {
            let j = p.jitter(&mut r);
            assert!((0.4..=1.6).contains(&j));
        }
    }

    #[test]
    fn residency_laws() {
        let p = WorkerProfile {
            jitter_rel: 0.0,
            residency: ResidencyState::EvictAfter { round: 10 },
            ..WorkerProfile::default()
        };
        let mut r = rng(5);
        let s = 256 << 20;
        let (hot, m1) = simulate_residency_time(&p, 10, s, &mut r).unwrap();
        let (cold, m2) = simulate_residency_time(&p, 11, s, &mut r).unwrap();
        assert_eq!((m1, m2), (ResidencyMode::Hot, ResidencyMode::Cold));
        let gap = expected_gap(s, &p.bandwidth).unwrap();
        assert!((cold.kernel_ns - hot.kernel_ns).abs_diff(gap) <= 1);

        let datacenter = WorkerProfile {
            bandwidth: BandwidthModel::datacenter(),
            residency: ResidencyState::Cold,
            ..p.clone()
        };
        let (c, _) = simulate_residency_time(&datacenter, 1, 60_000_000_000, &mut r).unwrap();
        let h = datacenter.bandwidth.hot_estimate_ns(60_000_000_000);
        assert!(c.kernel_ns - h > 350_000_000);
        let threshold = default_threshold_ns(60_000_000_000, &datacenter.bandwidth).unwrap();
        assert!(c.kernel_ns > threshold && h < threshold);
    }

    #[test]
    fn profile_validation() {
        assert!(WorkerProfile::default().validate().is_ok());
        let bad = [
            WorkerProfile { jitter_rel: 0.3, ..Default::default() },
            WorkerProfile { contention: Contention::uniform(0.5), ..Default::default() },
            WorkerProfile { hash_rate: 0.0, ..Default::default() },
            WorkerProfile { pretouch_factor: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err());
        }
    }

    fn pow_cfg(lambda_min: f64, rounds: usize) -> ContinuousConfig {
        ContinuousConfig {
            session_id: b"sim".to_vec(),
            rounds,
            interval_ns: 0,
            lambda_min,
            t0_ns: 0,
            params: ChallengeParams::Pow(PowParams {
                argon_memory_kib: 8,
                ..PowParams::with_difficulty(2)
            }),
        }
    }

    #[test]
    fn honest_worker_solutions_verify() {
        let clock = VirtualClock::new();
        let mut w = InProcessWorker::new(WorkerProfile::with_pow_rate(10.0, 2), None, clock.clone(), 7).unwrap();
        let c = Challenge::new(
            b"h".to_vec(),
            Salt::from_bytes([3; 32]),
            0,
            ChallengeParams::Pow(PowParams {
                argon_memory_kib: 8,
                ..PowParams::with_difficulty(2)
            }),
        )
        .unwrap();
        let resp = w.exchange(&c).unwrap();
        let ResponsePayload::Pow(sol) = &resp.payload else { panic!() };
        let ChallengeParams::Pow(p) = &c.params else { panic!() };
        assert!(verify_pow(&c, sol, p));
        assert!(clock.now_ns() >= resp.kernel_time_ns);
    }

    #[test]
    fn outsourcing_raises_rejection() {
        let lambda = 10.0;
        let cfg = TestConfig::fixed_sample(lambda, 0.05, 20, 0).unwrap();
        let honest = WorkerProfile::with_pow_rate(lambda * 2.0, 8);
        let outsourced = WorkerProfile {
            behavior: Behavior::Outsourced {
                extra_latency_ns: 100_000_000,
            },
            ..honest.clone()
        };
        let mut r = rng(9);
        let reject_rate = |p: &WorkerProfile, r: &mut ChaCha20Rng| {
            (0..500)
                .filter(|_| {
                    let s: Vec<_> = (0..20)
                        .map(|_| {
                            let l = simulate_pow_time(p, 8, r);
                            crate::primitives::TimingSample::new(l.total_ns, l.kernel_ns, 0).unwrap()
                        })
                        .collect();
                    fixed_sample_test(&s, &cfg).unwrap().verdict == Verdict::Reject
                })
                .count() as f64
                / 500.0
        };
        let h = reject_rate(&honest, &mut r);
        let o = reject_rate(&outsourced, &mut r);
        assert!(o > h + 0.5, "honest {h} outsourced {o}");
    }

    #[test]
    fn precompute_gains_nothing_on_fresh_salts() {
        let clock = VirtualClock::new();
        let profile = WorkerProfile {
            behavior: Behavior::PrecomputeAttempt,
            ..WorkerProfile::with_pow_rate(10.0, 2)
        };
        let mut cheat = WorkerEngine::new(profile.clone(), None).unwrap();
        let mut honest = WorkerEngine::new(WorkerProfile::with_pow_rate(10.0, 2), None).unwrap();
        let params = ChallengeParams::Pow(PowParams {
            argon_memory_kib: 8,
            ..PowParams::with_difficulty(2)
        });
        let (mut r1, mut r2) = (rng(11), rng(11));
        let mut salt_rng = rng(12);
        for _ in 0..50 {
            let c = Challenge::new(b"p".to_vec(), crate::primitives::generate_salt(&mut salt_rng), 0, params.clone()).unwrap();
            assert_eq!(cheat.latency(&c, &mut r1).unwrap(), honest.latency(&c, &mut r2).unwrap());
        }
        // a reused salt is where the cache would pay off
        let c = Challenge::new(b"p".to_vec(), Salt::from_bytes([0; 32]), 0, params).unwrap();
        cheat.latency(&c, &mut r1).unwrap();
        assert_eq!(cheat.latency(&c, &mut r1).unwrap().kernel_ns, 0);
        drop(clock);
    }

    #[test]
    fn virtual_and_wall_clock_agree() {
        let lambda_min = 200.0;
        let decide = |wall: bool, rate: f64| {
            let profile = WorkerProfile::with_pow_rate(rate, 2);
            let mut r = rng(21);
            let cfg = pow_cfg(lambda_min, 10);
            if wall {
                let clock = WallClock::new();
                let mut w = InProcessWorker::new(profile, None, clock, 5).unwrap();
                continuous_measurement(&mut w, &clock, &cfg, &mut r).unwrap().decision.verdict
            } else {
                let clock = VirtualClock::new();
                let mut w = InProcessWorker::new(profile, None, clock.clone(), 5).unwrap();
                continuous_measurement(&mut w, &clock, &cfg, &mut r).unwrap().decision.verdict
            }
        };
        for rate in [lambda_min * 4.0, lambda_min / 4.0] {
            assert_eq!(decide(true, rate), decide(false, rate));
        }
    }

    #[test]
    fn vdf_and_gemm_round_trip_in_process() {
        let clock = VirtualClock::new();
        let mut w = InProcessWorker::new(WorkerProfile::default(), None, clock.clone(), 1).unwrap();
        let vdf = ChallengeParams::Vdf(VdfParams {
            // 23 * 47
            modulus: BigUint::from(1081u32),
            instances: 3,
            t_min: 8,
            t_max: 32,
        });
        let gemm = ChallengeParams::Gemm(crate::gemm::GemmParams {
            dimension: 8,
            difficulty: 2,
            ..Default::default()
        });
        for params in [vdf, gemm] {
            let c = Challenge::new(b"x".to_vec(), Salt::from_bytes([5; 32]), 0, params).unwrap();
            let resp = w.exchange(&c).unwrap();
            assert!(crate::measurement::verify_response(&c, &resp, None));
        }
        let probe = Challenge::new(
            b"x".to_vec(),
            Salt::from_bytes([5; 32]),
            0,
            ChallengeParams::Residency(ProbeParams::default()),
        )
        .unwrap();
        assert!(matches!(w.exchange(&probe), Err(Error::Capability(_))));
    }
}
