//! Wesolowski-style verifiable delay function over the quadratic residues of
//! an RSA modulus with safe-prime factors.
//!
//! Evaluation is `T` sequential squarings. Proofs use a Fiat-Shamir prime
//! `q` of 128 bits: `pi = g^floor(2^T / q)`, `r = 2^T mod q`, and the
//! verifier checks `pi^q * g^r == y (mod N)`. Batches share one prime and
//! fold the proofs with transcript-derived 128-bit scalars.

pub mod prime;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::{hash, Canonical, Digest};
use prime::{is_safe_prime, next_prime_u128, random_safe_prime};

/// Candidate budget per safe-prime search before reporting a resource error.
const SAFE_PRIME_BUDGET: u64 = 50_000_000;

/// Factorisation of the modulus. Only test fixtures keep it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trapdoor {
    pub p: BigUint,
    pub q: BigUint,
    pub p_prime: BigUint,
    pub q_prime: BigUint,
}

impl Trapdoor {
    /// `|QR_N| = p' q'`.
    pub fn group_order(&self) -> BigUint {
        &self.p_prime * &self.q_prime
    }

    /// Carmichael exponent `lcm(p - 1, q - 1) = 2 p' q'`.
    pub fn exponent(&self) -> BigUint {
        (&self.p - 1u8).lcm(&(&self.q - 1u8))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    pub modulus: BigUint,
    pub bits: u32,
    trapdoor: Option<Trapdoor>,
}

impl GroupParams {
    /// Group with no known factorisation.
    pub fn public(modulus: BigUint) -> Result<Self> {
        if modulus < BigUint::from(3u8) || modulus.is_even() {
            return Err(Error::param("modulus must be odd and at least 3"));
        }
        Ok(Self {
            bits: modulus.bits() as u32,
            modulus,
            trapdoor: None,
        })
    }

    /// Builds `N = p q` from two distinct safe primes, keeping the trapdoor.
    pub fn from_safe_primes(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q {
            return Err(Error::param("factors must be distinct"));
        }
        if !is_safe_prime(&p) || !is_safe_prime(&q) {
            return Err(Error::param("factors must be safe primes"));
        }
        let modulus = &p * &q;
        let trapdoor = Trapdoor {
            p_prime: (&p - 1u8) >> 1,
            q_prime: (&q - 1u8) >> 1,
            p,
            q,
        };
        Ok(Self {
            bits: modulus.bits() as u32,
            modulus,
            trapdoor: Some(trapdoor),
        })
    }

    pub fn trapdoor(&self) -> Option<&Trapdoor> {
        self.trapdoor.as_ref()
    }

    /// Drops the factorisation.
    pub fn without_trapdoor(&self) -> Self {
        Self {
            modulus: self.modulus.clone(),
            bits: self.bits,
            trapdoor: None,
        }
    }
}

/// Generates a `bits`-bit modulus from two fresh safe primes.
///
/// `keep_trapdoor` is for test fixtures; production setups drop it.
pub fn setup_group<R: Rng + ?Sized>(bits: u32, rng: &mut R, keep_trapdoor: bool) -> Result<GroupParams> {
    if !matches!(bits, 128 | 512 | 1024 | 2048) {
        return Err(Error::param(format!("unsupported modulus size {bits}")));
    }
    let p = random_safe_prime(bits / 2, rng, SAFE_PRIME_BUDGET)?;
    let q = loop {
        let q = random_safe_prime(bits / 2, rng, SAFE_PRIME_BUDGET)?;
        if q != p {
            break q;
        }
    };
    let group = GroupParams::from_safe_primes(p, q)?;
    debug_assert_eq!(group.bits, bits);
    Ok(if keep_trapdoor { group } else { group.without_trapdoor() })
}

/// `x^2 mod N`.
pub fn square_into_qr(x: &BigUint, modulus: &BigUint) -> BigUint {
    (x * x) % modulus
}

/// `(int(H(sid || index [|| counter])) mod N)^2 mod N`, re-hashing with an
/// appended counter while the result is 0, 1 or N - 1.
pub fn hash_to_qr(sid: &[u8], index: u64, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(3u8) {
        return Err(Error::param("modulus must be at least 3"));
    }
    let minus_one = modulus - 1u8;
    for counter in 0u64.. {
        let mut enc = Canonical::new();
        enc.field(sid).u64(index);
        if counter > 0 {
            enc.u64(counter);
        }
        let x = enc.digest().to_biguint() % modulus;
        let g = square_into_qr(&x, modulus);
        if !g.is_zero() && !g.is_one() && g != minus_one {
            return Ok(g);
        }
    }
    unreachable!("counter space exhausted")
}

/// `T_min + int(H(sid || "delay" || index)) mod (T_max - T_min + 1)`.
pub fn derive_delay(sid: &[u8], index: u64, t_min: u64, t_max: u64) -> Result<u64> {
    if t_min == 0 || t_min > t_max {
        return Err(Error::param("delay bounds must satisfy 1 <= T_min <= T_max"));
    }
    let span = t_max - t_min;
    if span == 0 {
        return Ok(t_min);
    }
    let mut enc = Canonical::new();
    enc.field(sid).label("delay").u64(index);
    let h = enc.digest();
    let offset = match span.checked_add(1) {
        Some(width) => h.reduce_u64(width),
        None => h.high_u64(),
    };
    Ok(t_min + offset)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VdfInstance {
    #[serde(with = "crate::serde_hex::biguint")]
    pub generator: BigUint,
    pub delay: u64,
    #[serde(with = "crate::serde_hex::bytes")]
    pub sid: Vec<u8>,
    pub index: u64,
}

impl VdfInstance {
    /// Re-derivable by both parties from `(sid, index)`.
    pub fn derive(sid: &[u8], index: u64, modulus: &BigUint, t_min: u64, t_max: u64) -> Result<Self> {
        Ok(Self {
            generator: hash_to_qr(sid, index, modulus)?,
            delay: derive_delay(sid, index, t_min, t_max)?,
            sid: sid.to_vec(),
            index,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VdfProof {
    #[serde(with = "crate::serde_hex::biguint")]
    pub output: BigUint,
    #[serde(with = "crate::serde_hex::biguint")]
    pub pi: BigUint,
    #[serde(with = "crate::serde_hex::u128_hex")]
    pub remainder: u128,
    #[serde(with = "crate::serde_hex::u128_hex")]
    pub challenge_prime: u128,
}

/// `y = g^(2^T) mod N` by `T` sequential squarings.
pub fn eval(g: &BigUint, delay: u64, modulus: &BigUint) -> Result<BigUint> {
    if *g < BigUint::from(2u8) || g >= modulus {
        return Err(Error::param("generator must lie in [2, N-1]"));
    }
    let mut y = g.clone();
    for _ in 0..delay {
        y = &y * &y % modulus;
    }
    Ok(y)
}

/// Shortcut evaluation through the group exponent; the test oracle for [`eval`].
pub fn trapdoor_eval(g: &BigUint, delay: u64, group: &GroupParams) -> Result<BigUint> {
    let td = group
        .trapdoor()
        .ok_or(Error::Capability("trapdoor evaluation needs the factorisation"))?;
    let lambda = td.exponent();
    let mut e = BigUint::from(2u8).modpow(&BigUint::from(delay), &lambda);
    // N is squarefree, so g^a == g^b whenever a == b (mod lambda) and a, b >= 1.
    if e.is_zero() {
        e = lambda;
    }
    Ok(g.modpow(&e, &group.modulus))
}

/// Returns `(g^floor(2^T / q), 2^T mod q)` by long division over the bits of
/// `2^T`, keeping memory constant in `T`.
pub fn prove_with_prime(g: &BigUint, delay: u64, modulus: &BigUint, q: u128) -> (BigUint, u128) {
    assert!(q >= 2, "challenge prime must be at least 2");
    let mut pi = BigUint::one();
    let mut r: u128 = 1 % q;
    for _ in 0..delay {
        // b = floor(2r / q), r = 2r mod q, without overflowing u128
        let carry = r >= q - r;
        r = if carry { r - (q - r) } else { r + r };
        pi = &pi * &pi % modulus;
        if carry {
            pi = pi * g % modulus;
        }
    }
    (pi, r)
}

fn transcript(modulus: &BigUint, sid: &[u8], items: &[(&VdfInstance, &BigUint)]) -> Vec<u8> {
    let mut enc = Canonical::new();
    enc.label("vdf-transcript")
        .field(&modulus.to_bytes_be())
        .field(sid)
        .u64(items.len() as u64);
    for (inst, y) in items {
        enc.u64(inst.index)
            .field(&inst.generator.to_bytes_be())
            .field(&y.to_bytes_be())
            .u64(inst.delay);
    }
    enc.into_bytes()
}

/// Fiat-Shamir prime (top bit forced, smallest prime at or above) and
/// per-instance 128-bit scalars.
pub fn hash_to_prime_and_scalars(transcript: &[u8], count: usize) -> Result<(u128, Vec<u128>)> {
    if count == 0 {
        return Err(Error::param("need at least one instance"));
    }
    let mut enc = Canonical::new();
    enc.field(transcript).label("prime");
    let start = enc.digest().high_u128() | (1u128 << 127);
    let prime = next_prime_u128(start);
    let scalars = (0..count as u64)
        .map(|i| {
            let mut enc = Canonical::new();
            enc.field(transcript).label("alpha").u64(i);
            enc.digest().high_u128()
        })
        .collect();
    Ok((prime, scalars))
}

fn pow2_mod(delay: u64, q: u128) -> u128 {
    let r = BigUint::from(2u8).modpow(&BigUint::from(delay), &BigUint::from(q));
    u128::try_from(r).expect("remainder below q")
}

fn in_group_range(x: &BigUint, modulus: &BigUint) -> bool {
    !x.is_zero() && x < modulus
}

/// Single-instance proof; the transcript binds `(N, sid, index, g, y, T)`.
pub fn prove(instance: &VdfInstance, output: &BigUint, modulus: &BigUint) -> Result<VdfProof> {
    let t = transcript(modulus, &instance.sid, &[(instance, output)]);
    let (q, _) = hash_to_prime_and_scalars(&t, 1)?;
    let (pi, remainder) = prove_with_prime(&instance.generator, instance.delay, modulus, q);
    Ok(VdfProof {
        output: output.clone(),
        pi,
        remainder,
        challenge_prime: q,
    })
}

/// Checks `pi^q * g^r == y` against a known challenge prime.
pub fn verify_member(instance: &VdfInstance, proof: &VdfProof, modulus: &BigUint, q: u128) -> bool {
    if proof.challenge_prime != q
        || proof.remainder >= q
        || !in_group_range(&proof.output, modulus)
        || !in_group_range(&proof.pi, modulus)
        || !in_group_range(&instance.generator, modulus)
    {
        return false;
    }
    if proof.remainder != pow2_mod(instance.delay, q) {
        return false;
    }
    let lhs = proof.pi.modpow(&BigUint::from(q), modulus)
        * instance.generator.modpow(&BigUint::from(proof.remainder), modulus)
        % modulus;
    lhs == proof.output
}

pub fn verify(instance: &VdfInstance, proof: &VdfProof, modulus: &BigUint) -> bool {
    let t = transcript(modulus, &instance.sid, &[(instance, &proof.output)]);
    match hash_to_prime_and_scalars(&t, 1) {
        Ok((q, _)) => verify_member(instance, proof, modulus, q),
        Err(_) => false,
    }
}

/// Shared challenge prime and folding scalars for a batch.
pub fn batch_challenge(
    instances: &[VdfInstance],
    outputs: &[&BigUint],
    modulus: &BigUint,
    sid: &[u8],
) -> Result<(u128, Vec<u128>)> {
    if instances.len() != outputs.len() {
        return Err(Error::param("instance and output counts differ"));
    }
    let items: Vec<_> = instances.iter().zip(outputs.iter().copied()).collect();
    hash_to_prime_and_scalars(&transcript(modulus, sid, &items), instances.len())
}

/// Proofs for a batch, all under the shared transcript prime.
pub fn prove_batch(
    instances: &[VdfInstance],
    outputs: &[BigUint],
    modulus: &BigUint,
    sid: &[u8],
) -> Result<Vec<VdfProof>> {
    let refs: Vec<&BigUint> = outputs.iter().collect();
    let (q, _) = batch_challenge(instances, &refs, modulus, sid)?;
    Ok(instances
        .iter()
        .zip(outputs)
        .map(|(inst, y)| {
            let (pi, remainder) = prove_with_prime(&inst.generator, inst.delay, modulus, q);
            VdfProof {
                output: y.clone(),
                pi,
                remainder,
                challenge_prime: q,
            }
        })
        .collect())
}

/// `(prod pi_i^a_i)^q * prod g_i^(a_i r_i) == prod y_i^a_i (mod N)`.
pub fn batch_verify(
    instances: &[VdfInstance],
    proofs: &[VdfProof],
    modulus: &BigUint,
    sid: &[u8],
) -> Result<bool> {
    if instances.len() != proofs.len() {
        return Err(Error::param("instance and proof counts differ"));
    }
    if instances.is_empty() {
        return Err(Error::param("empty batch"));
    }
    let outputs: Vec<&BigUint> = proofs.iter().map(|p| &p.output).collect();
    let (q, alphas) = batch_challenge(instances, &outputs, modulus, sid)?;
    let mut folded_pi = BigUint::one();
    let mut g_part = BigUint::one();
    let mut rhs = BigUint::one();
    for ((inst, proof), alpha) in instances.iter().zip(proofs).zip(&alphas) {
        if proof.challenge_prime != q
            || proof.remainder >= q
            || !in_group_range(&proof.output, modulus)
            || !in_group_range(&proof.pi, modulus)
            || !in_group_range(&inst.generator, modulus)
            || proof.remainder != pow2_mod(inst.delay, q)
        {
            return Ok(false);
        }
        let alpha = BigUint::from(*alpha);
        folded_pi = folded_pi * proof.pi.modpow(&alpha, modulus) % modulus;
        let e = &alpha * BigUint::from(proof.remainder);
        g_part = g_part * inst.generator.modpow(&e, modulus) % modulus;
        rhs = rhs * proof.output.modpow(&alpha, modulus) % modulus;
    }
    let lhs = folded_pi.modpow(&BigUint::from(q), modulus) * g_part % modulus;
    Ok(lhs == rhs)
}

/// Aggregation digest over batch outputs in index order.
pub fn outputs_digest(proofs: &[VdfProof]) -> Digest {
    let mut enc = Canonical::new();
    for p in proofs {
        enc.field(&p.output.to_bytes_be());
    }
    hash(enc.as_bytes())
}
