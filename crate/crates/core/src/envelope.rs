//! Challenge and response envelopes exchanged between challenger and worker.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gemm::{GemmParams, GemmProof};
use crate::pow::{PowParams, PowSolution};
use crate::primitives::{Canonical, Digest, Salt};
use crate::residency::ProbeParams;
use crate::serde_hex;
use crate::vdf::{VdfInstance, VdfProof};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChallengeKind {
    Pow,
    Vdf,
    Gemm,
    Residency,
}

impl ChallengeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChallengeKind::Pow => "pow",
            ChallengeKind::Vdf => "vdf",
            ChallengeKind::Gemm => "gemm",
            ChallengeKind::Residency => "residency",
        }
    }
}

impl std::str::FromStr for ChallengeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pow" => Ok(ChallengeKind::Pow),
            "vdf" => Ok(ChallengeKind::Vdf),
            "gemm" => Ok(ChallengeKind::Gemm),
            "residency" => Ok(ChallengeKind::Residency),
            other => Err(Error::param(format!("unknown challenge kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ChallengeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One round of `instances` VDF evaluations over a shared modulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VdfParams {
    #[serde(with = "serde_hex::biguint")]
    pub modulus: BigUint,
    pub instances: u32,
    pub t_min: u64,
    pub t_max: u64,
}

impl VdfParams {
    pub fn validate(&self) -> Result<()> {
        if self.modulus < BigUint::from(3u8) {
            return Err(Error::param("VDF modulus too small"));
        }
        if self.instances == 0 {
            return Err(Error::param("VDF batch needs at least one instance"));
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            return Err(Error::param("VDF delay bounds must satisfy 1 <= t_min <= t_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChallengeParams {
    Pow(PowParams),
    Vdf(VdfParams),
    Gemm(GemmParams),
    Residency(ProbeParams),
}

impl ChallengeParams {
    pub fn kind(&self) -> ChallengeKind {
        match self {
            ChallengeParams::Pow(_) => ChallengeKind::Pow,
            ChallengeParams::Vdf(_) => ChallengeKind::Vdf,
            ChallengeParams::Gemm(_) => ChallengeKind::Gemm,
            ChallengeParams::Residency(_) => ChallengeKind::Residency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChallengeParams::Pow(p) => p.validate(),
            ChallengeParams::Vdf(p) => p.validate(),
            ChallengeParams::Gemm(p) => p.validate(),
            ChallengeParams::Residency(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    #[serde(with = "serde_hex::bytes")]
    pub session_id: Vec<u8>,
    pub kind: ChallengeKind,
    pub salt: Salt,
    /// Challenger clock at issue, nanoseconds.
    pub issued_at: u64,
    pub params: ChallengeParams,
}

impl Challenge {
    pub fn new(session_id: Vec<u8>, salt: Salt, issued_at: u64, params: ChallengeParams) -> Result<Self> {
        let c = Self {
            session_id,
            kind: params.kind(),
            salt,
            issued_at,
            params,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.session_id.is_empty() {
            return Err(Error::param("empty session id"));
        }
        if self.params.kind() != self.kind {
            return Err(Error::param("challenge kind tag does not match its parameters"));
        }
        self.params.validate()
    }

    /// Per-challenge identifier `H(session_id || salt)`; the fresh salt makes
    /// every derived puzzle new.
    pub fn sid(&self) -> Digest {
        let mut enc = Canonical::new();
        enc.field(&self.session_id).field(self.salt.as_bytes());
        enc.digest()
    }

    /// VDF instances derived from this challenge, in index order.
    pub fn vdf_instances(&self) -> Result<Vec<VdfInstance>> {
        let ChallengeParams::Vdf(p) = &self.params else {
            return Err(Error::param("challenge is not a VDF challenge"));
        };
        let sid = self.sid();
        (0..p.instances as u64)
            .map(|i| VdfInstance::derive(sid.as_bytes(), i, &p.modulus, p.t_min, p.t_max))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResponsePayload {
    Pow(PowSolution),
    Vdf { proofs: Vec<VdfProof> },
    Gemm(GemmProof),
    Residency { digest: Digest },
}

impl ResponsePayload {
    pub fn kind(&self) -> ChallengeKind {
        match self {
            ResponsePayload::Pow(_) => ChallengeKind::Pow,
            ResponsePayload::Vdf { .. } => ChallengeKind::Vdf,
            ResponsePayload::Gemm(_) => ChallengeKind::Gemm,
            ResponsePayload::Residency { .. } => ChallengeKind::Residency,
        }
    }

    /// Per-instance solution bytes in ascending instance order.
    pub fn solution_bytes(&self) -> Vec<Vec<u8>> {
        match self {
            ResponsePayload::Pow(s) => {
                let mut b = s.nonce.to_be_bytes().to_vec();
                b.extend_from_slice(s.digest.as_bytes());
                vec![b]
            }
            ResponsePayload::Vdf { proofs } => proofs.iter().map(|p| p.output.to_bytes_be()).collect(),
            ResponsePayload::Gemm(p) => {
                let mut enc = Canonical::new();
                enc.u64(p.index)
                    .field(p.chain_state.as_bytes())
                    .field(&p.product.canonical_bytes());
                vec![enc.into_bytes()]
            }
            ResponsePayload::Residency { digest } => vec![digest.as_bytes().to_vec()],
        }
    }

    pub fn aggregate(&self) -> Digest {
        let mut enc = Canonical::new();
        for b in self.solution_bytes() {
            enc.field(&b);
        }
        enc.digest()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    #[serde(with = "serde_hex::bytes")]
    pub session_id: Vec<u8>,
    pub kind: ChallengeKind,
    pub payload: ResponsePayload,
    pub aggregate: Digest,
    /// Worker-reported compute-only time.
    pub kernel_time_ns: u64,
}

impl Response {
    pub fn new(session_id: Vec<u8>, payload: ResponsePayload, kernel_time_ns: u64) -> Self {
        Self {
            session_id,
            kind: payload.kind(),
            aggregate: payload.aggregate(),
            payload,
            kernel_time_ns,
        }
    }

    pub fn aggregate_matches(&self) -> bool {
        self.kind == self.payload.kind() && self.aggregate == self.payload.aggregate()
    }
}

/// Dataset initialisation request sent before a residency session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreChallenge {
    #[serde(with = "serde_hex::bytes")]
    pub session_id: Vec<u8>,
    pub chal_seed: Salt,
    pub size_bytes: u64,
    pub block_size: u64,
    /// Ask the worker to mask CHAL under its device-class fingerprint.
    #[serde(default)]
    pub fingerprint_masked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreResponse {
    #[serde(with = "serde_hex::bytes")]
    pub session_id: Vec<u8>,
    pub blocks: u64,
    #[serde(default)]
    pub r_gpu: Option<Digest>,
}
