//! Memory-hard proof of work: brute-force nonce search over a keyed Argon2id
//! inner hash, verified by one recomputation and a threshold check.

use argon2::{Algorithm, Argon2, AssociatedData, Block, ParamsBuilder, Version};
use serde::{Deserialize, Serialize};

use crate::envelope::{Challenge, ChallengeKind, ChallengeParams};
use crate::error::{Error, Result};
use crate::primitives::{digest_below_target, hash, Digest};

/// Highest difficulty accepted at desk scale.
pub const MAX_POW_DIFFICULTY: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowParams {
    /// Expected attempts are `2^difficulty`.
    pub difficulty: u32,
    pub argon_passes: u32,
    pub argon_lanes: u32,
    pub argon_memory_kib: u32,
    /// Attempt budget; `None` means `2^(difficulty + 8)`.
    pub attempt_cap: Option<u64>,
}

impl Default for PowParams {
    fn default() -> Self {
        Self {
            difficulty: 12,
            argon_passes: 1,
            argon_lanes: 1,
            argon_memory_kib: 1024,
            attempt_cap: None,
        }
    }
}

impl PowParams {
    pub fn with_difficulty(difficulty: u32) -> Self {
        Self {
            difficulty,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.difficulty > MAX_POW_DIFFICULTY {
            return Err(Error::param(format!(
                "PoW difficulty {} exceeds {MAX_POW_DIFFICULTY}",
                self.difficulty
            )));
        }
        if self.argon_passes == 0 || self.argon_lanes == 0 || self.argon_memory_kib == 0 {
            return Err(Error::param("Argon2 parameters must be at least 1"));
        }
        Ok(())
    }

    pub fn cap(&self) -> u64 {
        self.attempt_cap
            .unwrap_or_else(|| 1u64.checked_shl(self.difficulty + 8).unwrap_or(u64::MAX))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowSolution {
    pub nonce: u64,
    pub digest: Digest,
    pub attempts: u64,
}

/// Reusable Argon2id context for one challenge: the session id is the secret
/// key, the issue timestamp is associated data and the salt is the challenge
/// salt.
pub struct PowHasher<'a> {
    argon: Argon2<'a>,
    salt: [u8; 32],
    memory: Vec<Block>,
}

impl<'a> PowHasher<'a> {
    pub fn new(challenge: &'a Challenge, params: &PowParams) -> Result<Self> {
        params.validate()?;
        let ad = challenge.issued_at.to_be_bytes();
        let argon_params = ParamsBuilder::new()
            .m_cost(params.argon_memory_kib)
            .t_cost(params.argon_passes)
            .p_cost(params.argon_lanes)
            .output_len(32)
            .data(AssociatedData::new(&ad).map_err(|e| Error::param(e.to_string()))?)
            .build()
            .map_err(|e| Error::param(format!("Argon2 rejected parameters: {e}")))?;
        let blocks = argon_params.block_count();
        let argon = Argon2::new_with_secret(
            &challenge.session_id,
            Algorithm::Argon2id,
            Version::V0x13,
            argon_params,
        )
        .map_err(|e| Error::param(format!("Argon2 rejected secret: {e}")))?;
        Ok(Self {
            argon,
            salt: *challenge.salt.as_bytes(),
            memory: vec![Block::default(); blocks],
        })
    }

    /// `SHA-256(Argon2id(nonce))`.
    pub fn digest(&mut self, nonce: u64) -> Result<Digest> {
        let mut tag = [0u8; 32];
        self.argon
            .hash_password_into_with_memory(&nonce.to_be_bytes(), &self.salt, &mut tag, &mut self.memory)
            .map_err(|e| Error::param(format!("Argon2 failure: {e}")))?;
        Ok(hash(&tag))
    }
}

pub fn pow_hash(challenge: &Challenge, nonce: u64, params: &PowParams) -> Result<Digest> {
    PowHasher::new(challenge, params)?.digest(nonce)
}

fn expect_pow(challenge: &Challenge) -> Result<()> {
    if challenge.kind != ChallengeKind::Pow || !matches!(challenge.params, ChallengeParams::Pow(_)) {
        return Err(Error::param("challenge is not a PoW challenge"));
    }
    Ok(())
}

/// Lowest nonce (counting up from 0) whose digest meets the target.
pub fn solve_pow(challenge: &Challenge, params: &PowParams) -> Result<PowSolution> {
    expect_pow(challenge)?;
    let mut hasher = PowHasher::new(challenge, params)?;
    let cap = params.cap();
    for nonce in 0..cap {
        let digest = hasher.digest(nonce)?;
        if digest_below_target(&digest, params.difficulty)? {
            return Ok(PowSolution {
                nonce,
                digest,
                attempts: nonce + 1,
            });
        }
    }
    Err(Error::Exhausted { attempts: cap })
}

pub fn verify_pow(challenge: &Challenge, solution: &PowSolution, params: &PowParams) -> bool {
    if params.validate().is_err() || solution.attempts == 0 {
        return false;
    }
    match pow_hash(challenge, solution.nonce, params) {
        Ok(d) => d == solution.digest && digest_below_target(&d, params.difficulty).unwrap_or(false),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{generate_salt, Salt};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small(d: u32) -> PowParams {
        PowParams {
            difficulty: d,
            argon_memory_kib: 8,
            ..PowParams::default()
        }
    }

    fn challenge(salt: Salt, params: PowParams) -> Challenge {
        Challenge::new(b"pow-test".to_vec(), salt, 42, ChallengeParams::Pow(params)).unwrap()
    }

    /// RFC 9106 section 5.3 Argon2id test vector.
    #[test]
    fn argon2id_rfc9106_vector() {
        let params = ParamsBuilder::new()
            .m_cost(32)
            .t_cost(3)
            .p_cost(4)
            .output_len(32)
            .data(AssociatedData::new(&[4u8; 12]).unwrap())
            .build()
            .unwrap();
        let secret = [3u8; 8];
        let argon = Argon2::new_with_secret(&secret, Algorithm::Argon2id, Version::V0x13, params).unwrap();
        let mut out = [0u8; 32];
        argon.hash_password_into(&[1u8; 32], &[2u8; 16], &mut out).unwrap();
        assert_eq!(
            hex::encode(out),
            "0d640df58d78766c08c037a34a8b53c9d01ef0452d75b65eb52520e96b01e659"
        );
    }

    #[test]
    fn pow_hash_deterministic_and_nonce_sensitive() {
        let c = challenge(Salt::from_bytes([9; 32]), small(4));
        let p = small(4);
        assert_eq!(pow_hash(&c, 5, &p).unwrap(), pow_hash(&c, 5, &p).unwrap());
        assert_ne!(pow_hash(&c, 5, &p).unwrap(), pow_hash(&c, 5 ^ (1 << 8), &p).unwrap());
    }

    #[test]
    fn default_memory_parameter_is_honoured() {
        let p = PowParams::default();
        let c = challenge(Salt::from_bytes([1; 32]), p);
        let h = PowHasher::new(&c, &p).unwrap();
        assert_eq!(h.memory.len(), 1024);
    }

    #[test]
    fn zero_difficulty_solves_first_try() {
        let p = small(0);
        let c = challenge(Salt::from_bytes([7; 32]), p);
        let s = solve_pow(&c, &p).unwrap();
        assert_eq!((s.nonce, s.attempts), (0, 1));
        assert!(verify_pow(&c, &s, &p));
    }

    #[test]
    fn solve_is_deterministic_and_verifies() {
        let p = small(6);
        let c = challenge(Salt::from_bytes([5; 32]), p);
        let a = solve_pow(&c, &p).unwrap();
        let b = solve_pow(&c, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.attempts, a.nonce + 1);
        assert!(verify_pow(&c, &a, &p));

        let mut flipped = a;
        let mut bytes = *flipped.digest.as_bytes();
        bytes[31] ^= 1;
        flipped.digest = Digest::from_bytes(bytes);
        assert!(!verify_pow(&c, &flipped, &p));
    }

    #[test]
    fn mean_attempts_near_expectation() {
        let p = small(8);
        let mut rng = ChaCha20Rng::seed_from_u64(1234);
        let n = 2000;
        let mut total = 0u64;
        let mut raised_pass = 0;
        for _ in 0..n {
            let c = challenge(generate_salt(&mut rng), p);
            let s = solve_pow(&c, &p).unwrap();
            total += s.attempts;
            let harder = PowParams { difficulty: 16, ..p };
            if verify_pow(&c, &s, &harder) {
                raised_pass += 1;
            }
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 256.0).abs() <= 0.2 * 256.0, "mean {mean}");
        // Raising the target by 8 bits keeps ~1/256 of solutions valid.
        assert!(raised_pass <= 25, "raised_pass {raised_pass}");
    }

    #[test]
    fn exhaustion_reported() {
        let p = PowParams {
            attempt_cap: Some(3),
            ..small(40)
        };
        let c = challenge(Salt::from_bytes([2; 32]), p);
        assert_eq!(solve_pow(&c, &p), Err(Error::Exhausted { attempts: 3 }));
    }

    #[test]
    fn parameter_validation() {
        assert!(PowParams::with_difficulty(65).validate().is_err());
        assert!(PowParams { argon_lanes: 0, ..PowParams::default() }.validate().is_err());
        let p = PowParams { argon_memory_kib: 1, ..PowParams::default() };
        let c = challenge(Salt::from_bytes([0; 32]), p);
        assert!(matches!(pow_hash(&c, 0, &p), Err(Error::Parameter(_))));
    }
}
