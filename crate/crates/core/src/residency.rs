//! Device-residency inference: a seed-reproducible challenge dataset (CHAL),
//! nonce-keyed probes over it, randomly timed challenges and a hot/cold
//! timing classifier.

use argon2::{Algorithm, Argon2, Block, ParamsBuilder, Version};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::envelope::{Challenge, ChallengeKind, ChallengeParams, PreChallenge, ResponsePayload};
use crate::error::{Error, Result};
use crate::fingerprint::{fingerprint_of, mask_chal_in_place, DeviceClassProfile};
use crate::measurement::{Clock, WorkerSession};
use crate::primitives::{generate_salt, hash, keyed_stream, xor_keyed_stream, Canonical, Digest, Salt, TimingSample};

pub const DEFAULT_BLOCK_SIZE: u64 = 1 << 20;
pub const DEFAULT_CHAL_BYTES: u64 = 256 << 20;

/// Pseudorandom dataset; block `j` is the keyed stream of `(seed, j)`.
#[derive(Clone, PartialEq, Eq)]
pub struct ChalDataset {
    seed: Salt,
    size_bytes: u64,
    block_size: u64,
    blocks: Vec<Vec<u8>>,
    digests: Vec<Digest>,
}

impl std::fmt::Debug for ChalDataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChalDataset")
            .field("seed", &self.seed)
            .field("size_bytes", &self.size_bytes)
            .field("block_size", &self.block_size)
            .field("blocks", &self.blocks.len())
            .finish()
    }
}

impl ChalDataset {
    pub fn init(size_bytes: u64, block_size: u64, seed: Salt) -> Result<Self> {
        if block_size == 0 || size_bytes == 0 {
            return Err(Error::param("CHAL needs at least one non-empty block"));
        }
        let count = size_bytes.div_ceil(block_size);
        let mut blocks: Vec<Vec<u8>> = Vec::new();
        blocks
            .try_reserve_exact(count as usize)
            .map_err(|e| Error::Resource(format!("CHAL allocation: {e}")))?;
        for j in 0..count {
            let len = block_size.min(size_bytes - j * block_size) as usize;
            let mut block = Vec::new();
            block
                .try_reserve_exact(len)
                .map_err(|e| Error::Resource(format!("CHAL allocation: {e}")))?;
            block.resize(len, 0);
            keyed_stream(seed.as_bytes(), j, &mut block)?;
            blocks.push(block);
        }
        let mut chal = Self {
            seed,
            size_bytes,
            block_size,
            blocks,
            digests: Vec::new(),
        };
        chal.refresh_digests();
        Ok(chal)
    }

    /// Regenerates block `j` from the seed alone.
    pub fn generate_block(seed: &Salt, size_bytes: u64, block_size: u64, j: u64) -> Result<Vec<u8>> {
        let start = j
            .checked_mul(block_size)
            .filter(|&s| s < size_bytes)
            .ok_or_else(|| Error::param("block index out of range"))?;
        let mut block = vec![0u8; block_size.min(size_bytes - start) as usize];
        keyed_stream(seed.as_bytes(), j, &mut block)?;
        Ok(block)
    }

    pub fn seed(&self) -> &Salt {
        &self.seed
    }

    pub fn size_bytes(&self) -> u64 {
        self.size_bytes
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    pub fn block_count(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn block(&self, j: u64) -> &[u8] {
        &self.blocks[j as usize]
    }

    pub fn block_digest(&self, j: u64) -> &Digest {
        &self.digests[j as usize]
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Vec<u8>] {
        &mut self.blocks
    }

    pub(crate) fn refresh_digests(&mut self) {
        self.digests = self.blocks.iter().map(|b| hash(b)).collect();
    }
}

/// Probe shape carried in a residency challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeParams {
    /// Argon2id instances per probe; `None` means `ceil(sqrt(blocks))`.
    #[serde(default)]
    pub touched_blocks: Option<u32>,
    pub argon_memory_kib: u32,
    pub argon_passes: u32,
    pub argon_lanes: u32,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            touched_blocks: None,
            argon_memory_kib: 1024,
            argon_passes: 1,
            argon_lanes: 1,
        }
    }
}

impl ProbeParams {
    pub fn validate(&self) -> Result<()> {
        if self.touched_blocks == Some(0) {
            return Err(Error::param("probe must touch at least one block"));
        }
        if self.argon_memory_kib == 0 || self.argon_passes == 0 || self.argon_lanes == 0 {
            return Err(Error::param("Argon2 parameters must be at least 1"));
        }
        Ok(())
    }

    pub fn instances(&self, block_count: u64) -> u64 {
        self.touched_blocks
            .map(u64::from)
            .unwrap_or_else(|| (block_count as f64).sqrt().ceil() as u64)
            .max(1)
    }
}

/// Masks each touched block with the nonce stream, then runs a keyed Argon2id
/// over it. The next block index is drawn from the running state, so the
/// access pattern is data dependent and unknown before the nonce arrives.
pub fn residency_probe(chal: &ChalDataset, nonce: &Salt, params: &ProbeParams) -> Result<Digest> {
    params.validate()?;
    let argon_params = ParamsBuilder::new()
        .m_cost(params.argon_memory_kib)
        .t_cost(params.argon_passes)
        .p_cost(params.argon_lanes)
        .output_len(32)
        .build()
        .map_err(|e| Error::param(format!("Argon2 rejected parameters: {e}")))?;
    let mut memory = vec![Block::default(); argon_params.block_count()];
    let argon = Argon2::new_with_secret(nonce.as_bytes(), Algorithm::Argon2id, Version::V0x13, argon_params)
        .map_err(|e| Error::param(format!("Argon2 rejected secret: {e}")))?;

    let count = chal.block_count();
    let mut state = {
        let mut enc = Canonical::new();
        enc.label("residency-probe").field(nonce.as_bytes()).u64(count);
        enc.digest()
    };
    let mut masked = vec![0u8; chal.block_size() as usize];
    let mut tag = [0u8; 32];
    for _ in 0..params.instances(count) {
        let idx = state.reduce_u64(count);
        let src = chal.block(idx);
        let buf = &mut masked[..src.len()];
        buf.copy_from_slice(src);
        xor_keyed_stream(nonce.as_bytes(), idx, buf)?;
        argon
            .hash_password_into_with_memory(&*buf, state.as_bytes(), &mut tag, &mut memory)
            .map_err(|e| Error::param(format!("Argon2 failure: {e}")))?;
        let mut enc = Canonical::new();
        enc.field(state.as_bytes()).u64(idx).field(&tag);
        state = enc.digest();
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidencyMode {
    Hot,
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidencyProbeResult {
    pub response_digest: Digest,
    pub timing: TimingSample,
    pub mode_truth: Option<ResidencyMode>,
}

/// Device and interconnect bandwidths, bytes per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandwidthModel {
    pub hbm_bw: f64,
    pub pci_bw: f64,
    pub base_latency_ns: u64,
}

impl Default for BandwidthModel {
    fn default() -> Self {
        Self {
            hbm_bw: 320e9,
            pci_bw: 32e9,
            base_latency_ns: 5_000_000,
        }
    }
}

impl BandwidthModel {
    /// HBM3-class device behind a PCIe 5 x16 link.
    pub fn datacenter() -> Self {
        Self {
            hbm_bw: 3.35e12,
            pci_bw: 64e9,
            base_latency_ns: 5_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pci_bw > 0.0 && self.hbm_bw > self.pci_bw) || !self.hbm_bw.is_finite() {
            return Err(Error::param("bandwidth model needs hbm_bw > pci_bw > 0"));
        }
        Ok(())
    }

    /// Resident probe time estimate: base latency plus a device-memory scan.
    pub fn hot_estimate_ns(&self, bytes: u64) -> u64 {
        self.base_latency_ns + (bytes as f64 / self.hbm_bw * 1e9).round() as u64
    }
}

/// `S / B_pci`, nanoseconds.
pub fn expected_gap(bytes: u64, model: &BandwidthModel) -> Result<u64> {
    model.validate()?;
    Ok((bytes as f64 / model.pci_bw * 1e9).round() as u64)
}

/// Hot estimate plus half the expected gap.
pub fn default_threshold_ns(bytes: u64, model: &BandwidthModel) -> Result<u64> {
    Ok(model.hot_estimate_ns(bytes) + expected_gap(bytes, model)? / 2)
}

/// Uniform wait on `[0, t_max_ns)`.
pub fn schedule_next<R: RngCore + ?Sized>(t_max_ns: u64, rng: &mut R) -> Result<u64> {
    if t_max_ns == 0 {
        return Err(Error::param("T_max must be positive"));
    }
    Ok(rng.gen_range(0..t_max_ns))
}

/// Hot iff the adjusted time is strictly below the threshold.
pub fn classify_residency(timing: &TimingSample, threshold_ns: u64) -> Result<ResidencyMode> {
    if threshold_ns == 0 {
        return Err(Error::param("threshold must be positive"));
    }
    Ok(if timing.adjusted_ns() < threshold_ns {
        ResidencyMode::Hot
    } else {
        ResidencyMode::Cold
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidencyConfig {
    pub session_id: Vec<u8>,
    pub rounds: u32,
    pub t_max_ns: u64,
    pub chal_seed: Salt,
    pub size_bytes: u64,
    pub block_size: u64,
    pub probe: ProbeParams,
    pub threshold_ns: u64,
    pub t0_ns: u64,
    /// Expected device class; when set the dataset is fingerprint-masked.
    pub expected_class: Option<DeviceClassProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidencyRound {
    pub round: u32,
    pub nonce_digest: Digest,
    pub total_ns: u64,
    pub kernel_ns: u64,
    pub adjusted_ns: u64,
    pub mode: ResidencyMode,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidencyReport {
    pub rounds: Vec<ResidencyRound>,
    pub fingerprint_ok: Option<bool>,
    /// Set when a round failed in transport; the rounds above are partial.
    pub aborted: Option<String>,
    pub flagged: bool,
}

impl ResidencyReport {
    fn finish(mut self) -> Self {
        self.flagged = self.aborted.is_some()
            || self.fingerprint_ok == Some(false)
            || self.rounds.iter().any(|r| !r.valid || r.mode == ResidencyMode::Cold);
        self
    }

    pub fn cold_rounds(&self) -> Vec<u32> {
        self.rounds
            .iter()
            .filter(|r| r.mode == ResidencyMode::Cold)
            .map(|r| r.round)
            .collect()
    }
}

/// Challenger-side reference dataset, masked under the expected class when one is configured.
pub fn reference_dataset(cfg: &ResidencyConfig) -> Result<(ChalDataset, Option<Digest>)> {
    let mut chal = ChalDataset::init(cfg.size_bytes, cfg.block_size, cfg.chal_seed)?;
    let expected = match &cfg.expected_class {
        Some(profile) => {
            let r = fingerprint_of(profile)?;
            mask_chal_in_place(&mut chal, &r)?;
            Some(r)
        }
        None => None,
    };
    Ok((chal, expected))
}

/// Pre-challenge, then `rounds` probes at uniform random times.
pub fn run_residency_session<W, C, R>(worker: &mut W, clock: &C, cfg: &ResidencyConfig, rng: &mut R) -> Result<ResidencyReport>
where
    W: WorkerSession + ?Sized,
    C: Clock + ?Sized,
    R: RngCore + ?Sized,
{
    let (reference, expected) = reference_dataset(cfg)?;
    run_residency_session_with(worker, clock, cfg, &reference, expected, rng)
}

/// As [`run_residency_session`] with a prepared reference dataset.
pub fn run_residency_session_with<W, C, R>(
    worker: &mut W,
    clock: &C,
    cfg: &ResidencyConfig,
    reference: &ChalDataset,
    expected_fingerprint: Option<Digest>,
    rng: &mut R,
) -> Result<ResidencyReport>
where
    W: WorkerSession + ?Sized,
    C: Clock + ?Sized,
    R: RngCore + ?Sized,
{
    cfg.probe.validate()?;
    let pre = PreChallenge {
        session_id: cfg.session_id.clone(),
        chal_seed: cfg.chal_seed,
        size_bytes: cfg.size_bytes,
        block_size: cfg.block_size,
        fingerprint_masked: expected_fingerprint.is_some(),
    };
    let pre_resp = worker.pre_challenge(&pre)?;
    let mut report = ResidencyReport {
        rounds: Vec::with_capacity(cfg.rounds as usize),
        fingerprint_ok: expected_fingerprint.map(|r| pre_resp.r_gpu == Some(r)),
        aborted: None,
        flagged: false,
    };
    for round in 1..=cfg.rounds {
        let wait = schedule_next(cfg.t_max_ns, rng)?;
        clock.sleep_until(clock.now_ns() + wait);
        let nonce = generate_salt(rng);
        let start = clock.now_ns();
        let challenge = Challenge::new(cfg.session_id.clone(), nonce, start, ChallengeParams::Residency(cfg.probe))?;
        let response = match worker.exchange(&challenge) {
            Ok(r) => r,
            Err(e) => {
                report.aborted = Some(e.to_string());
                break;
            }
        };
        let total = clock.now_ns() - start;
        let timing = TimingSample::new(total, response.kernel_time_ns.min(total), cfg.t0_ns)?;
        let valid = response.session_id == cfg.session_id
            && response.kind == ChallengeKind::Residency
            && response.aggregate_matches()
            && match &response.payload {
                ResponsePayload::Residency { digest } => residency_probe(reference, &nonce, &cfg.probe)? == *digest,
                _ => false,
            };
        report.rounds.push(ResidencyRound {
            round,
            nonce_digest: hash(nonce.as_bytes()),
            total_ns: timing.total_time_ns,
            kernel_ns: timing.kernel_time_ns,
            adjusted_ns: timing.adjusted_ns(),
            mode: classify_residency(&timing, cfg.threshold_ns)?,
            valid,
        });
    }
    Ok(report.finish())
}
