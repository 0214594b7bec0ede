//! Challenger: drives one measurement session against any worker.

use gputel_core::measurement::{continuous_measurement, Clock, ContinuousConfig, WorkerSession};
use gputel_core::primitives::generate_salt;
use gputel_core::residency::{default_threshold_ns, run_residency_session, ResidencyConfig};
use gputel_core::vdf::setup_group;
use gputel_core::{ChallengeKind, ChallengeParams, VdfParams};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::ChallengerConfig;
use crate::report::{RoundRow, SessionReport};
use crate::session::TcpWorkerSession;
use crate::CliError;

fn vdf_params(cfg: &ChallengerConfig, rng: &mut ChaCha20Rng) -> Result<VdfParams, CliError> {
    let v = &cfg.vdf;
    let modulus = match &v.modulus {
        Some(hex) => BigUint::parse_bytes(hex.trim_start_matches("0x").as_bytes(), 16)
            .ok_or_else(|| CliError::Config("vdf.modulus is not hex".into()))?,
        None => setup_group(v.bits, rng, false)?.modulus,
    };
    Ok(VdfParams {
        modulus,
        instances: v.instances,
        t_min: v.t_min,
        t_max: v.t_max,
    })
}

/// Residency probe threshold in force for `cfg`.
pub fn residency_threshold(cfg: &ChallengerConfig) -> Result<u64, CliError> {
    let r = &cfg.residency;
    match r.threshold_ns {
        Some(t) => Ok(t),
        None => Ok(default_threshold_ns(r.modeled_bytes.unwrap_or(r.size_bytes), &r.bandwidth)?),
    }
}

/// Runs a `mode` session against `worker` on `clock`.
pub fn run_session<W, C>(
    worker: &mut W,
    clock: &C,
    cfg: &ChallengerConfig,
    mode: ChallengeKind,
    seed: u64,
) -> Result<SessionReport, CliError>
where
    W: WorkerSession + ?Sized,
    C: Clock + ?Sized,
{
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sid_text = cfg.session_id.clone();
    let session_id = sid_text.as_bytes().to_vec();
    if mode == ChallengeKind::Residency {
        let r = &cfg.residency;
        let threshold_ns = residency_threshold(cfg)?;
        let rcfg = ResidencyConfig {
            session_id,
            rounds: u32::try_from(cfg.rounds).map_err(|_| CliError::Config("too many rounds".into()))?,
            t_max_ns: r.t_max_ms.max(1) * 1_000_000,
            chal_seed: r.chal_seed.unwrap_or_else(|| generate_salt(&mut rng)),
            size_bytes: r.size_bytes,
            block_size: r.block_size,
            probe: r.probe,
            threshold_ns,
            t0_ns: cfg.t0_ns(),
            expected_class: r.expected_class.as_ref().map(|d| d.to_profile()),
        };
        let report = run_residency_session(worker, clock, &rcfg, &mut rng)?;
        return Ok(SessionReport::from_residency(&sid_text, seed, cfg.clone(), threshold_ns, &report));
    }
    let params = match mode {
        ChallengeKind::Pow => ChallengeParams::Pow(cfg.pow),
        ChallengeKind::Gemm => ChallengeParams::Gemm(cfg.gemm),
        ChallengeKind::Vdf => ChallengeParams::Vdf(vdf_params(cfg, &mut rng)?),
        ChallengeKind::Residency => unreachable!(),
    };
    let ccfg = ContinuousConfig {
        session_id,
        rounds: cfg.rounds,
        interval_ns: cfg.interval_ms * 1_000_000,
        lambda_min: cfg.lambda_min,
        t0_ns: cfg.t0_ns(),
        params,
    };
    let outcome = continuous_measurement(worker, clock, &ccfg, &mut rng)?;
    Ok(SessionReport {
        session_id: sid_text.clone(),
        kind: mode,
        seed,
        config: cfg.clone(),
        rounds: outcome.records.iter().map(|r| RoundRow::from_record(&sid_text, r)).collect(),
        decision: outcome.decision,
        residency: None,
        aborted: None,
    })
}

/// Connects to the configured worker and runs one session on the wall clock.
pub fn run_challenger(cfg: &ChallengerConfig, mode: ChallengeKind, seed: u64) -> Result<SessionReport, CliError> {
    cfg.validate()?;
    let mut worker = TcpWorkerSession::connect(&cfg.worker, cfg.timeout())?;
    let clock = gputel_core::measurement::WallClock::new();
    run_session(&mut worker, &clock, cfg, mode, seed)
}
