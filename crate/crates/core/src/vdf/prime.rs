//! Primality testing and prime search.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::primitives::hash;

/// Rounds used wherever a prime is accepted.
pub const MR_ROUNDS: u32 = 64;

pub(crate) fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        const LIMIT: usize = 2000;
        let mut sieve = vec![true; LIMIT];
        sieve[0] = false;
        sieve[1] = false;
        let mut i = 2;
        while i * i < LIMIT {
            if sieve[i] {
                let mut j = i * i;
                while j < LIMIT {
                    sieve[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        (0..LIMIT).filter(|&k| sieve[k]).map(|k| k as u32).collect()
    })
}

/// Miller-Rabin with `rounds` bases drawn deterministically from `n`.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    for &p in small_primes() {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u8;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    let mut rng = ChaCha20Rng::from_seed(*hash(&n.to_bytes_be()).as_bytes());
    let byte_len = n.to_bytes_be().len() + 8;
    let mut buf = vec![0u8; byte_len];
    'witness: for _ in 0..rounds {
        rng.fill_bytes(&mut buf);
        // base in [2, n-2]
        let a = BigUint::from_bytes_be(&buf) % (n - 3u8) + 2u8;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn is_prime_u128(n: u128) -> bool {
    is_probable_prime(&BigUint::from(n), MR_ROUNDS)
}

/// Smallest prime `>= start`; when none fits below `2^128`, the largest
/// prime below `2^128`.
pub fn next_prime_u128(start: u128) -> u128 {
    let mut c = start.max(2);
    loop {
        if is_prime_u128(c) {
            return c;
        }
        match c.checked_add(1) {
            Some(n) => c = n,
            None => break,
        }
    }
    let mut c = u128::MAX;
    while !is_prime_u128(c) {
        c -= 2;
    }
    c
}

/// True iff `p` and `(p - 1) / 2` are both prime.
pub fn is_safe_prime(p: &BigUint) -> bool {
    if *p < BigUint::from(5u8) || p.is_even() {
        return false;
    }
    let half: BigUint = (p - 1u8) >> 1;
    is_probable_prime(&half, MR_ROUNDS) && is_probable_prime(p, MR_ROUNDS)
}

/// Random safe prime with exactly `bits` bits and the top two bits set.
pub fn random_safe_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R, max_candidates: u64) -> Result<BigUint> {
    if bits < 8 {
        return Err(Error::param("safe primes need at least 8 bits"));
    }
    let primes = small_primes();
    let qbits = bits - 1;
    'restart: loop {
        let mut bytes = vec![0u8; qbits.div_ceil(8) as usize];
        rng.fill_bytes(&mut bytes);
        let mut half = BigUint::from_bytes_be(&bytes);
        half &= (BigUint::one() << qbits) - 1u8;
        half |= BigUint::from(3u8) << (qbits - 2);
        half |= BigUint::one();
        let mut residues: Vec<u32> = primes
            .iter()
            .map(|&s| (&half % s).to_u32().expect("residue fits"))
            .collect();
        let mut tried = 0u64;
        loop {
            if tried >= max_candidates {
                return Err(Error::Resource(format!(
                    "no {bits}-bit safe prime within {max_candidates} candidates"
                )));
            }
            if half.bits() as u32 != qbits {
                continue 'restart;
            }
            tried += 1;
            let sieved = primes.iter().zip(&residues).all(|(&s, &r)| {
                // reject when s divides half or 2*half + 1 (ignoring half == s)
                (r != 0 || half == BigUint::from(s)) && (2 * r as u64 + 1) % s as u64 != 0
            });
            if sieved {
                let p: BigUint = (&half << 1) + 1u8;
                let two = BigUint::from(2u8);
                let fermat = two.modpow(&(&p - 1u8), &p).is_one();
                if fermat && is_probable_prime(&half, MR_ROUNDS) && is_probable_prime(&p, MR_ROUNDS) {
                    return Ok(p);
                }
            }
            half += 2u8;
            for (r, &s) in residues.iter_mut().zip(primes) {
                *r = (*r + 2) % s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn agrees_with_trial_division() {
        for n in 0u64..20_000 {
            assert_eq!(is_probable_prime(&BigUint::from(n), 16), trial_division(n), "n={n}");
        }
        // Carmichael numbers and a strong pseudoprime to base 2
        for n in [561u64, 1105, 1729, 2047, 3215031751, 4759123141] {
            assert_eq!(is_probable_prime(&BigUint::from(n), MR_ROUNDS), trial_division(n), "n={n}");
        }
    }

    #[test]
    fn known_large_values() {
        assert!(is_prime_u128((1u128 << 127) - 1));
        assert!(!is_prime_u128((1u128 << 127) + 1));
        assert_eq!(next_prime_u128(u128::MAX - 10), u128::MAX - 158);
        assert_eq!(next_prime_u128(24), 29);
    }

    #[test]
    fn safe_primes() {
        assert!(is_safe_prime(&BigUint::from(23u8)));
        assert!(is_safe_prime(&BigUint::from(47u8)));
        assert!(!is_safe_prime(&BigUint::from(13u8)));
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let p = random_safe_prime(64, &mut rng, 1_000_000).unwrap();
        assert_eq!(p.bits(), 64);
        assert!(is_safe_prime(&p));
    }
}
