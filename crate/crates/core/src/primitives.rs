//! Shared hashing contracts, byte encodings and the timing atom.
//!
//! `hash` is SHA-256 and `keyed_hash` is keyed BLAKE2b-256. Digests are read
//! as big-endian unsigned integers in `[0, 2^256)`.

use std::fmt;

use blake2::digest::{consts::U32, Mac};
use blake2::{Blake2b, Blake2bMac, Digest as _};
use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::Sha256;

use crate::error::{Error, Result};

/// Bit width of every digest.
pub const KAPPA: u32 = 256;

/// Longest key accepted by [`keyed_hash`].
pub const MAX_KEY_LEN: usize = 64;

macro_rules! fixed_bytes {
    ($name:ident) => {
        impl $name {
            pub const LEN: usize = 32;

            pub const fn from_bytes(bytes: [u8; 32]) -> Self {
                Self(bytes)
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self> {
                let arr: [u8; 32] = bytes.try_into().map_err(|_| {
                    Error::param(format!(
                        "{} must be 32 bytes, got {}",
                        stringify!($name),
                        bytes.len()
                    ))
                })?;
                Ok(Self(arr))
            }

            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self> {
                let raw = hex::decode(s).map_err(|e| Error::param(e.to_string()))?;
                Self::from_slice(&raw)
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

/// Per-challenge random salt.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Salt([u8; 32]);
fixed_bytes!(Salt);

/// A 256-bit hash output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest([u8; 32]);
fixed_bytes!(Digest);

impl Digest {
    /// Big-endian integer value.
    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    /// Inverse of [`Digest::to_biguint`]; fails for values `>= 2^256`.
    pub fn from_biguint(value: &BigUint) -> Result<Self> {
        let raw = value.to_bytes_be();
        if raw.len() > 32 {
            return Err(Error::param("integer exceeds 256 bits"));
        }
        let mut out = [0u8; 32];
        out[32 - raw.len()..].copy_from_slice(&raw);
        Ok(Self(out))
    }

    /// The leading 128 bits as an integer.
    pub fn high_u128(&self) -> u128 {
        u128::from_be_bytes(self.0[..16].try_into().expect("16 bytes"))
    }

    /// The leading 64 bits as an integer.
    pub fn high_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().expect("8 bytes"))
    }

    /// Number of leading zero bits.
    pub fn leading_zeros(&self) -> u32 {
        let mut count = 0;
        for b in self.0 {
            if b == 0 {
                count += 8;
            } else {
                count += b.leading_zeros();
                break;
            }
        }
        count
    }

    /// Reduces the integer value modulo a 64-bit modulus.
    pub fn reduce_u64(&self, modulus: u64) -> u64 {
        assert!(modulus > 0);
        let m = modulus as u128;
        self.0
            .iter()
            .fold(0u128, |acc, &b| ((acc << 8) | b as u128) % m) as u64
    }
}

/// SHA-256.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Keyed BLAKE2b with a 256-bit output. An empty key gives plain BLAKE2b-256.
pub fn keyed_hash(key: &[u8], data: &[u8]) -> Result<Digest> {
    if key.len() > MAX_KEY_LEN {
        return Err(Error::param(format!(
            "BLAKE2b key is {} bytes, limit is {MAX_KEY_LEN}",
            key.len()
        )));
    }
    if key.is_empty() {
        return Ok(blake2b_256(data));
    }
    let mut mac = Blake2bMac::<U32>::new_from_slice(key).map_err(|e| Error::param(e.to_string()))?;
    mac.update(data);
    Ok(Digest(mac.finalize().into_bytes().into()))
}

/// Unkeyed BLAKE2b-256.
pub fn blake2b_256(data: &[u8]) -> Digest {
    Digest(Blake2b::<U32>::digest(data).into())
}

/// Draws 32 fresh bytes from `rng`.
pub fn generate_salt<R: RngCore + ?Sized>(rng: &mut R) -> Salt {
    let mut bytes = [0u8; 32];
    rng.fill_bytes(&mut bytes);
    Salt(bytes)
}

/// True iff `d < 2^(256 - difficulty)`.
pub fn digest_below_target(d: &Digest, difficulty: u32) -> Result<bool> {
    if difficulty > KAPPA {
        return Err(Error::param(format!("difficulty {difficulty} exceeds {KAPPA}")));
    }
    Ok(d.leading_zeros() >= difficulty)
}

/// Fills `out` with the keyed stream for block `index`:
/// chunk `c` is `keyed_hash(key, be64(index) || be64(c))`.
pub fn keyed_stream(key: &[u8], index: u64, out: &mut [u8]) -> Result<()> {
    stream_apply(key, index, out, |dst, src| dst.copy_from_slice(src))
}

/// XORs the keyed stream for block `index` into `data`.
pub fn xor_keyed_stream(key: &[u8], index: u64, data: &mut [u8]) -> Result<()> {
    stream_apply(key, index, data, |dst, src| {
        for (d, s) in dst.iter_mut().zip(src) {
            *d ^= s;
        }
    })
}

fn stream_apply(
    key: &[u8],
    index: u64,
    data: &mut [u8],
    mut apply: impl FnMut(&mut [u8], &[u8]),
) -> Result<()> {
    if key.is_empty() || key.len() > MAX_KEY_LEN {
        return Err(Error::param("stream key must be 1..=64 bytes"));
    }
    let base = Blake2bMac::<U32>::new_from_slice(key).map_err(|e| Error::param(e.to_string()))?;
    let mut msg = [0u8; 16];
    msg[..8].copy_from_slice(&index.to_be_bytes());
    for (c, chunk) in data.chunks_mut(32).enumerate() {
        msg[8..].copy_from_slice(&(c as u64).to_be_bytes());
        let mut mac = base.clone();
        mac.update(&msg);
        let block = mac.finalize().into_bytes();
        apply(chunk, &block[..chunk.len()]);
    }
    Ok(())
}

/// Length-prefixed field encoder: each field is `be32(len) || bytes`, in call order.
///
/// This is the byte layout fed to every hash over a structured record.
#[derive(Debug, Default, Clone)]
pub struct Canonical {
    buf: Vec<u8>,
}

impl Canonical {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_be_bytes())
    }

    pub fn label(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn digest(&self) -> Digest {
        hash(&self.buf)
    }
}

/// One observed round latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSample {
    pub total_time_ns: u64,
    pub kernel_time_ns: u64,
    pub t0_ns: u64,
}

impl TimingSample {
    pub fn new(total_time_ns: u64, kernel_time_ns: u64, t0_ns: u64) -> Result<Self> {
        if kernel_time_ns > total_time_ns {
            return Err(Error::param("kernel time exceeds total time"));
        }
        Ok(Self {
            total_time_ns,
            kernel_time_ns,
            t0_ns,
        })
    }

    /// `max(total - t0, 0)`.
    pub fn adjusted_ns(&self) -> u64 {
        self.total_time_ns.saturating_sub(self.t0_ns)
    }

    pub fn total_secs(&self) -> f64 {
        ns_to_secs(self.total_time_ns)
    }
}

pub fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 * 1e-9
}

pub fn secs_to_ns(secs: f64) -> u64 {
    if secs <= 0.0 {
        0
    } else {
        (secs * 1e9).round() as u64
    }
}
