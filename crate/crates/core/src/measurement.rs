//! Clocks, the worker-session abstraction and the continuous measurement loop.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::envelope::{Challenge, ChallengeKind, ChallengeParams, PreChallenge, PreResponse, Response, ResponsePayload};
use crate::error::{Error, Result};
use crate::gemm::verify_gemm_puzzle;
use crate::pow::verify_pow;
use crate::primitives::{generate_salt, ns_to_secs, TimingSample};
use crate::residency::{residency_probe, ChalDataset};
use crate::stats::{mean_round_decision, Decision};
use crate::vdf::batch_verify;

pub trait Clock: Send + Sync {
    fn now_ns(&self) -> u64;
    /// Blocks (or advances) until `now_ns() >= deadline_ns`.
    fn sleep_until(&self, deadline_ns: u64);
}

/// Shared simulated time; clones observe the same instant.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock(Arc<AtomicU64>);

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, ns: u64) {
        self.0.fetch_add(ns, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ns(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    fn sleep_until(&self, deadline_ns: u64) {
        self.0.fetch_max(deadline_ns, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }

    fn sleep_until(&self, deadline_ns: u64) {
        let now = self.now_ns();
        if deadline_ns > now {
            std::thread::sleep(Duration::from_nanos(deadline_ns - now));
        }
    }
}

/// A worker reachable by the challenger, in-process or over the network.
pub trait WorkerSession {
    fn pre_challenge(&mut self, pre: &PreChallenge) -> Result<PreResponse>;
    fn exchange(&mut self, challenge: &Challenge) -> Result<Response>;
}

impl<W: WorkerSession + ?Sized> WorkerSession for Box<W> {
    fn pre_challenge(&mut self, pre: &PreChallenge) -> Result<PreResponse> {
        (**self).pre_challenge(pre)
    }

    fn exchange(&mut self, challenge: &Challenge) -> Result<Response> {
        (**self).exchange(challenge)
    }
}

/// Full correctness check of a response against the challenge that produced it.
/// Residency responses need the challenger's reference dataset.
pub fn verify_response(challenge: &Challenge, response: &Response, reference: Option<&ChalDataset>) -> bool {
    if response.session_id != challenge.session_id
        || response.kind != challenge.kind
        || !response.aggregate_matches()
        || challenge.validate().is_err()
    {
        return false;
    }
    let sid = challenge.sid();
    match (&challenge.params, &response.payload) {
        (ChallengeParams::Pow(p), ResponsePayload::Pow(sol)) => verify_pow(challenge, sol, p),
        (ChallengeParams::Vdf(p), ResponsePayload::Vdf { proofs }) => match challenge.vdf_instances() {
            Ok(insts) => batch_verify(&insts, proofs, &p.modulus, sid.as_bytes()).unwrap_or(false),
            Err(_) => false,
        },
        (ChallengeParams::Gemm(p), ResponsePayload::Gemm(proof)) => verify_gemm_puzzle(sid.as_bytes(), p, proof),
        (ChallengeParams::Residency(p), ResponsePayload::Residency { digest }) => reference
            .and_then(|chal| residency_probe(chal, &challenge.salt, p).ok())
            .is_some_and(|expected| expected == *digest),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousConfig {
    pub session_id: Vec<u8>,
    pub rounds: usize,
    /// Round spacing: the next round starts no earlier than `t_start + interval`.
    pub interval_ns: u64,
    pub lambda_min: f64,
    pub t0_ns: u64,
    pub params: ChallengeParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub kind: ChallengeKind,
    pub total_time_ns: u64,
    pub kernel_time_ns: u64,
    pub adjusted_ns: u64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub records: Vec<RoundRecord>,
    pub decision: Decision<f64>,
    pub invalid_rounds: usize,
}

/// Issues `rounds` fresh challenges, times each exchange, and accepts iff the
/// mean adjusted time over valid rounds is at most `1 / lambda_min`.
pub fn continuous_measurement<W, C, R>(
    worker: &mut W,
    clock: &C,
    cfg: &ContinuousConfig,
    rng: &mut R,
) -> Result<MeasurementOutcome>
where
    W: WorkerSession + ?Sized,
    C: Clock + ?Sized,
    R: RngCore + ?Sized,
{
    if cfg.rounds == 0 {
        return Err(Error::param("at least one round is required"));
    }
    if cfg.params.kind() == ChallengeKind::Residency {
        return Err(Error::param("residency uses the residency session driver"));
    }
    let mut records = Vec::with_capacity(cfg.rounds);
    let mut adjusted = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let start = clock.now_ns();
        let challenge = Challenge::new(cfg.session_id.clone(), generate_salt(rng), start, cfg.params.clone())?;
        let response = worker.exchange(&challenge)?;
        let total = clock.now_ns() - start;
        let timing = TimingSample::new(total, response.kernel_time_ns.min(total), cfg.t0_ns)?;
        let valid = verify_response(&challenge, &response, None);
        if valid {
            adjusted.push(ns_to_secs(timing.adjusted_ns()));
        }
        records.push(RoundRecord {
            round,
            kind: challenge.kind,
            total_time_ns: timing.total_time_ns,
            kernel_time_ns: timing.kernel_time_ns,
            adjusted_ns: timing.adjusted_ns(),
            valid,
        });
        clock.sleep_until(start + cfg.interval_ns);
    }
    let decision = mean_round_decision(&adjusted, cfg.lambda_min)?;
    Ok(MeasurementOutcome {
        invalid_rounds: records.iter().filter(|r| !r.valid).count(),
        records,
        decision,
    })
}
