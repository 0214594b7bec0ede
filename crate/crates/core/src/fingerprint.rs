//! Device-class fingerprints and fingerprint-keyed CHAL masking.
//!
//! Real accelerators leak class-specific floating-point drift; here each class
//! is a simulated profile whose "drift" is a keyed pseudorandom error vector.
//! Same profile, same vector; different seeds, unrelated vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::{blake2b_256, keyed_hash, xor_keyed_stream, Canonical, Digest, Salt};
use crate::residency::ChalDataset;

/// Fixed reference input evaluated by every device class.
pub const CANONICAL_INPUT: &[u8] = b"gputel/fingerprint/canonical-input/v1";

/// Simulated per-reshape deviation is drawn from `[-2^15, 2^15)` units of `2^-32`.
const DRIFT_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceClassProfile {
    pub class_id: String,
    pub drift_seed: Salt,
    /// Linear layers as `(inputs, outputs)`.
    pub layer_spec: Vec<(u32, u32)>,
    /// Batch shapes the layers are re-evaluated under.
    pub reshape_schedule: Vec<u32>,
}

impl DeviceClassProfile {
    pub fn new(class_id: impl Into<String>, drift_seed: Salt) -> Self {
        Self {
            class_id: class_id.into(),
            drift_seed,
            layer_spec: vec![(64, 32), (32, 32), (32, 16)],
            reshape_schedule: vec![1, 4, 16],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reshape_schedule.is_empty() || self.reshape_schedule.contains(&0) {
            return Err(Error::param("reshape schedule needs non-zero batch shapes"));
        }
        if self.layer_spec.iter().any(|&(i, o)| i == 0 || o == 0) {
            return Err(Error::param("layer dimensions must be non-zero"));
        }
        Ok(())
    }
}

/// Signed fixed-point deviations in units of `2^-32`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorVector {
    pub entries: Vec<i64>,
}

impl ErrorVector {
    /// Big-endian 8-byte two's-complement entries.
    pub fn encode(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|e| e.to_be_bytes()).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| e as f64 / 4_294_967_296.0).collect()
    }
}

/// One entry per layer output; each sums the simulated drift of every reshape.
pub fn device_error_vector(profile: &DeviceClassProfile, canonical_input: &[u8]) -> Result<ErrorVector> {
    profile.validate()?;
    let half = 1i64 << (DRIFT_BITS - 1);
    let mut entries = Vec::with_capacity(profile.layer_spec.iter().map(|&(_, o)| o as usize).sum());
    for (layer, &(_, outputs)) in profile.layer_spec.iter().enumerate() {
        for index in 0..outputs {
            let mut acc = 0i64;
            for &batch in &profile.reshape_schedule {
                let mut enc = Canonical::new();
                enc.field(canonical_input)
                    .u64(layer as u64)
                    .u64(batch as u64)
                    .u64(index as u64);
                let d = keyed_hash(profile.drift_seed.as_bytes(), enc.as_bytes())?;
                acc += (d.high_u64() >> (64 - DRIFT_BITS)) as i64 - half;
            }
            entries.push(acc);
        }
    }
    Ok(ErrorVector { entries })
}

/// `R_GPU = BLAKE2b-256(encode(E))`.
pub fn fingerprint_digest(e: &ErrorVector) -> Digest {
    blake2b_256(&e.encode())
}

pub fn fingerprint_of(profile: &DeviceClassProfile) -> Result<Digest> {
    Ok(fingerprint_digest(&device_error_vector(profile, CANONICAL_INPUT)?))
}

/// XORs block `j` with the `R_GPU`-keyed stream for `j`, for every block.
pub fn mask_blocks(blocks: &mut [Vec<u8>], r_gpu: &Digest) -> Result<()> {
    for (j, block) in blocks.iter_mut().enumerate() {
        xor_keyed_stream(r_gpu.as_bytes(), j as u64, block)?;
    }
    Ok(())
}

pub fn mask_chal_in_place(chal: &mut ChalDataset, r_gpu: &Digest) -> Result<()> {
    mask_blocks(chal.blocks_mut(), r_gpu)?;
    chal.refresh_digests();
    Ok(())
}

pub fn mask_chal(chal: &ChalDataset, r_gpu: &Digest) -> Result<ChalDataset> {
    let mut out = chal.clone();
    mask_chal_in_place(&mut out, r_gpu)?;
    Ok(out)
}

pub fn verify_fingerprint_profile(claimed: &Digest, expected: &DeviceClassProfile) -> Result<bool> {
    Ok(fingerprint_of(expected)? == *claimed)
}

/// Device classes known to a challenger, by class id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRegistry {
    classes: BTreeMap<String, DeviceClassProfile>,
}

impl ProfileRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, profile: DeviceClassProfile) -> Result<()> {
        profile.validate()?;
        self.classes.insert(profile.class_id.clone(), profile);
        Ok(())
    }

    pub fn get(&self, class_id: &str) -> Result<&DeviceClassProfile> {
        self.classes
            .get(class_id)
            .ok_or_else(|| Error::Lookup(format!("no device class {class_id:?}")))
    }

    pub fn verify_fingerprint(&self, claimed: &Digest, class_id: &str) -> Result<bool> {
        verify_fingerprint_profile(claimed, self.get(class_id)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use crate::primitives::generate_salt;

    #[test]
    fn error_vector_shape_and_stability() {
        let p = DeviceClassProfile::new("sim-hopper", Salt::from_bytes([1; 32]));
        let e = device_error_vector(&p, CANONICAL_INPUT).unwrap();
        assert_eq!(e.entries.len(), 32 + 32 + 16);
        assert_eq!(e, device_error_vector(&p.clone(), CANONICAL_INPUT).unwrap());
        // class id is a label only
        let renamed = DeviceClassProfile {
            class_id: "other".into(),
            ..p.clone()
        };
        assert_eq!(fingerprint_of(&p).unwrap(), fingerprint_of(&renamed).unwrap());
        let tiny = e.as_f64().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(tiny < 1e-4);
    }

    #[test]
    fn distinct_seeds_diverge() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = DeviceClassProfile::new("a", generate_salt(&mut rng));
            let b = DeviceClassProfile::new("a", generate_salt(&mut rng));
            let ea = device_error_vector(&a, CANONICAL_INPUT).unwrap();
            let eb = device_error_vector(&b, CANONICAL_INPUT).unwrap();
            let differ = ea.entries.iter().zip(&eb.entries).filter(|(x, y)| x != y).count();
            assert!(differ as f64 >= 0.99 * ea.entries.len() as f64);
            assert_ne!(fingerprint_digest(&ea), fingerprint_digest(&eb));
        }
    }

    #[test]
    fn empty_and_single_change() {
        let p = DeviceClassProfile {
            layer_spec: vec![],
            ..DeviceClassProfile::new("x", Salt::from_bytes([0; 32]))
        };
        let e = device_error_vector(&p, CANONICAL_INPUT).unwrap();
        assert!(e.entries.is_empty());
        assert_eq!(fingerprint_digest(&e), blake2b_256(b""));
        let v = ErrorVector { entries: vec![1, 2, 3] };
        let mut w = v.clone();
        w.entries[1] += 1;
        assert_ne!(fingerprint_digest(&v), fingerprint_digest(&w));
        let bad = DeviceClassProfile {
            reshape_schedule: vec![],
            ..p
        };
        assert!(device_error_vector(&bad, CANONICAL_INPUT).is_err());
    }

    #[test]
    fn masking_is_an_involution() {
        let chal = ChalDataset::init(40_000, 4096, Salt::from_bytes([7; 32])).unwrap();
        let k1 = blake2b_256(b"k1");
        let k2 = blake2b_256(b"k2");
        let once = mask_chal(&chal, &k1).unwrap();
        assert_ne!(once, chal);
        assert_ne!(once, mask_chal(&chal, &k2).unwrap());
        assert_eq!(mask_chal(&once, &k1).unwrap(), chal);
        let mut empty: Vec<Vec<u8>> = vec![];
        mask_blocks(&mut empty, &k1).unwrap();
        let mut zero_len = vec![Vec::new()];
        mask_blocks(&mut zero_len, &k1).unwrap();
        assert!(zero_len[0].is_empty());
    }

    #[test]
    fn registry_verification() {
        let mut reg = ProfileRegistry::new();
        let hopper = DeviceClassProfile::new("sim-hopper", Salt::from_bytes([1; 32]));
        let turing = DeviceClassProfile::new("sim-turing", Salt::from_bytes([2; 32]));
        reg.register(hopper.clone()).unwrap();
        reg.register(turing.clone()).unwrap();
        let r = fingerprint_of(&hopper).unwrap();
        assert!(reg.verify_fingerprint(&r, "sim-hopper").unwrap());
        assert!(!reg.verify_fingerprint(&r, "sim-turing").unwrap());
        let mut bytes = *r.as_bytes();
        bytes[0] ^= 0x80;
        assert!(!reg.verify_fingerprint(&Digest::from_bytes(bytes), "sim-hopper").unwrap());
        assert!(matches!(reg.verify_fingerprint(&r, "sim-volta"), Err(Error::Lookup(_))));
    }
}
