//! Hash-chained GEMM puzzle over the Mersenne field `2^61 - 1`.
//!
//! Attempt `j` expands the chain state `sigma_j` into matrices `(A_j, B_j)`,
//! multiplies them, and succeeds when `H(sid || sigma_j || C_j)` meets the
//! difficulty target. Verification replays the chain and checks the claimed
//! product with Freivalds' test instead of a full multiplication.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::{digest_below_target, hash, Canonical, Digest};

/// `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[inline]
fn reduce128(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let folded = (x & p) + (x >> 61);
    let folded = (folded & p) + (folded >> 61);
    let r = folded as u64;
    if r >= MERSENNE_61 {
        r - MERSENNE_61
    } else {
        r
    }
}

#[inline]
pub fn field_mul(a: u64, b: u64) -> u64 {
    reduce128(a as u128 * b as u128)
}

#[inline]
pub fn field_add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MERSENNE_61 {
        s - MERSENNE_61
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GemmParams {
    pub dimension: usize,
    pub difficulty: u32,
    pub freivalds_rounds: u32,
    pub attempt_cap: Option<u64>,
}

impl Default for GemmParams {
    fn default() -> Self {
        Self {
            dimension: 64,
            difficulty: 4,
            freivalds_rounds: 5,
            attempt_cap: None,
        }
    }
}

impl GemmParams {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::param("matrix dimension must be at least 1"));
        }
        if self.difficulty > 32 {
            return Err(Error::param("GEMM difficulty capped at 32"));
        }
        if self.freivalds_rounds == 0 {
            return Err(Error::param("Freivalds needs at least one round"));
        }
        Ok(())
    }

    pub fn cap(&self) -> u64 {
        self.attempt_cap.unwrap_or(1u64 << (self.difficulty + 8))
    }
}

/// Square matrix over the field, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[&[u64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::param("matrix must be square"));
        }
        if rows.iter().flat_map(|r| r.iter()).any(|&v| v >= MERSENNE_61) {
            return Err(Error::param("entry outside the field"));
        }
        Ok(Self {
            n,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: u64) {
        self.data[row * self.n + col] = v;
    }

    /// Row-major, 8-byte big-endian per element.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_be_bytes()).collect()
    }

    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                dot(row, v)
            })
            .collect()
    }

    fn is_field_valued(&self) -> bool {
        self.data.len() == self.n * self.n && self.data.iter().all(|&v| v < MERSENNE_61)
    }
}

fn dot(a: &[u64], b: &[u64]) -> u64 {
    let mut acc: u128 = 0;
    for (chunk_a, chunk_b) in a.chunks(32).zip(b.chunks(32)) {
        for (&x, &y) in chunk_a.iter().zip(chunk_b) {
            acc += x as u128 * y as u128;
        }
        acc = reduce128(acc) as u128;
    }
    reduce128(acc)
}

/// Entry `(tag, row, col)` is `int(H(sigma || tag || row || col)) mod p`.
pub fn derive_matrices(sigma: &Digest, n: usize) -> (Matrix, Matrix) {
    let derive = |tag: &str| {
        let mut m = Matrix::zeros(n);
        for row in 0..n {
            for col in 0..n {
                let mut enc = Canonical::new();
                enc.field(sigma.as_bytes()).label(tag).u64(row as u64).u64(col as u64);
                m.set(row, col, enc.digest().reduce_u64(MERSENNE_61));
            }
        }
        m
    };
    (derive("A"), derive("B"))
}

pub fn field_matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.n != b.n {
        return Err(Error::param("matrices are not conformable"));
    }
    let n = a.n;
    let mut bt = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            bt.set(j, i, b.get(i, j));
        }
    }
    let mut c = Matrix::zeros(n);
    for i in 0..n {
        let row = &a.data[i * n..(i + 1) * n];
        for j in 0..n {
            c.data[i * n + j] = dot(row, &bt.data[j * n..(j + 1) * n]);
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GemmProof {
    pub index: u64,
    pub product: Matrix,
    pub chain_state: Digest,
}

impl GemmProof {
    /// Aggregation bytes: `j* || sigma_j* || C_j*`.
    pub fn solution_digest(&self) -> Digest {
        let mut enc = Canonical::new();
        enc.u64(self.index)
            .field(self.chain_state.as_bytes())
            .field(&self.product.canonical_bytes());
        enc.digest()
    }
}

pub fn chain_start(sid: &[u8]) -> Digest {
    hash(sid)
}

pub fn attempt_digest(sid: &[u8], sigma: &Digest, product: &Matrix) -> Digest {
    let mut enc = Canonical::new();
    enc.field(sid)
        .field(sigma.as_bytes())
        .field(&product.canonical_bytes());
    enc.digest()
}

pub fn solve_gemm_puzzle(sid: &[u8], params: &GemmParams) -> Result<GemmProof> {
    params.validate()?;
    let mut sigma = chain_start(sid);
    for j in 0..params.cap() {
        let (a, b) = derive_matrices(&sigma, params.dimension);
        let c = field_matmul(&a, &b)?;
        if digest_below_target(&attempt_digest(sid, &sigma, &c), params.difficulty)? {
            return Ok(GemmProof {
                index: j,
                product: c,
                chain_state: sigma,
            });
        }
        sigma = hash(sigma.as_bytes());
    }
    Err(Error::Exhausted { attempts: params.cap() })
}

/// `k` rounds of `A (B r) == C r` with `r` drawn from `{0,1}^n`.
pub fn freivalds_check<R: RngCore + ?Sized>(a: &Matrix, b: &Matrix, c: &Matrix, rounds: u32, rng: &mut R) -> bool {
    let n = a.n;
    if b.n != n || c.n != n || !c.is_field_valued() {
        return false;
    }
    let mut r = vec![0u64; n];
    for _ in 0..rounds {
        for x in r.iter_mut() {
            *x = rng.gen_range(0..2);
        }
        let x = b.mul_vec(&r);
        let y = a.mul_vec(&x);
        let z = c.mul_vec(&r);
        if y != z {
            return false;
        }
    }
    true
}

/// Verifier randomness seeded from `(sid, solution digest)`.
pub fn verifier_rng(sid: &[u8], proof: &GemmProof) -> ChaCha20Rng {
    let mut enc = Canonical::new();
    enc.label("freivalds").field(sid).field(proof.solution_digest().as_bytes());
    ChaCha20Rng::from_seed(*enc.digest().as_bytes())
}

pub fn verify_gemm_puzzle(sid: &[u8], params: &GemmParams, proof: &GemmProof) -> bool {
    verify_gemm_puzzle_with_rng(sid, params, proof, &mut verifier_rng(sid, proof))
}

pub fn verify_gemm_puzzle_with_rng<R: RngCore + ?Sized>(
    sid: &[u8],
    params: &GemmParams,
    proof: &GemmProof,
    rng: &mut R,
) -> bool {
    if params.validate().is_err()
        || proof.index >= params.cap()
        || proof.product.n != params.dimension
        || !proof.product.is_field_valued()
    {
        return false;
    }
    let mut sigma = chain_start(sid);
    for _ in 0..proof.index {
        sigma = hash(sigma.as_bytes());
    }
    if sigma != proof.chain_state {
        return false;
    }
    let (a, b) = derive_matrices(&sigma, params.dimension);
    let h = attempt_digest(sid, &sigma, &proof.product);
    if !digest_below_target(&h, params.difficulty).unwrap_or(false) {
        return false;
    }
    freivalds_check(&a, &b, &proof.product, params.freivalds_rounds, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    /// Independent product oracle in arbitrary precision.
    fn naive_bigint(a: &Matrix, b: &Matrix) -> Matrix {
        let n = a.n;
        let p = BigUint::from(MERSENNE_61);
        let mut c = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigUint::from(0u8);
                for k in 0..n {
                    acc += BigUint::from(a.get(i, k)) * BigUint::from(b.get(k, j));
                }
                let r = acc % &p;
                c.set(i, j, r.to_u64_digits().first().copied().unwrap_or(0));
            }
        }
        c
    }

    #[test]
    fn small_products() {
        let a = Matrix::from_rows(&[&[1, 2], &[3, 4]]).unwrap();
        let b = Matrix::from_rows(&[&[5, 6], &[7, 8]]).unwrap();
        assert_eq!(
            field_matmul(&a, &b).unwrap(),
            Matrix::from_rows(&[&[19, 22], &[43, 50]]).unwrap()
        );
        assert_eq!(field_matmul(&Matrix::identity(2), &b).unwrap(), b);
        assert!(field_matmul(&a, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn random_product_matches_oracle() {
        let (a, b) = derive_matrices(&hash(b"oracle"), 64);
        assert_eq!(field_matmul(&a, &b).unwrap(), naive_bigint(&a, &b));
    }

    #[test]
    fn reduction_edges() {
        let max = MERSENNE_61 - 1;
        assert_eq!(field_mul(max, max), 1);
        assert_eq!(field_add(max, 1), 0);
        assert_eq!(reduce128(MERSENNE_61 as u128), 0);
    }

    #[test]
    fn derivation_determinism_and_range() {
        let s = hash(b"sigma");
        assert_eq!(derive_matrices(&s, 3), derive_matrices(&s, 3));
        let (a, b) = derive_matrices(&s, 1);
        assert!(a.data[0] < MERSENNE_61 && b.data[0] < MERSENNE_61);
    }

    #[test]
    fn derived_entries_uniform() {
        // 10^5 entries across 64 buckets
        let mut buckets = [0u64; 64];
        let mut total = 0;
        let mut sigma = hash(b"uniform");
        while total < 100_000 {
            let (a, b) = derive_matrices(&sigma, 50);
            for v in a.data.iter().chain(&b.data) {
                buckets[(*v as u128 * 64 / MERSENNE_61 as u128) as usize] += 1;
                total += 1;
            }
            sigma = hash(sigma.as_bytes());
        }
        let expected = total as f64 / 64.0;
        let stat: f64 = buckets.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // chi-square(63) upper 1% point
        assert!(stat < 92.010, "stat {stat}");
    }

    #[test]
    fn freivalds_forced_mismatch() {
        let a = Matrix::identity(2);
        let b = Matrix::from_rows(&[&[2, 3], &[4, 5]]).unwrap();
        let mut c = b.clone();
        c.set(0, 0, 99);
        let r = [1u64, 0];
        assert_eq!(a.mul_vec(&b.mul_vec(&r)), vec![2, 4]);
        assert_eq!(c.mul_vec(&r), vec![99, 4]);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(freivalds_check(&a, &b, &b, 10, &mut rng));
        // with k = 30 the corrupted product is caught
        assert!(!freivalds_check(&a, &b, &c, 30, &mut rng));
    }

    #[test]
    fn solve_verify_round_trip() {
        let params = GemmParams {
            dimension: 8,
            difficulty: 3,
            ..GemmParams::default()
        };
        for i in 0..20 {
            let sid = format!("gemm-{i}");
            let proof = solve_gemm_puzzle(sid.as_bytes(), &params).unwrap();
            assert_eq!(proof, solve_gemm_puzzle(sid.as_bytes(), &params).unwrap());
            assert!(verify_gemm_puzzle(sid.as_bytes(), &params, &proof));
            let mut bad = proof.clone();
            bad.product.data[5] = field_add(bad.product.data[5], 1);
            let mut rng = ChaCha20Rng::seed_from_u64(i);
            assert!(!verify_gemm_puzzle_with_rng(
                sid.as_bytes(),
                &GemmParams { freivalds_rounds: 40, ..params },
                &bad,
                &mut rng
            ));
        }
        let zero = GemmParams {
            dimension: 4,
            difficulty: 0,
            ..GemmParams::default()
        };
        assert_eq!(solve_gemm_puzzle(b"z", &zero).unwrap().index, 0);
    }

    #[test]
    fn decremented_index_rejected() {
        let params = GemmParams {
            dimension: 4,
            difficulty: 8,
            ..GemmParams::default()
        };
        let mut rejected = 0;
        let mut total = 0;
        for i in 0..100 {
            let sid = format!("dec-{i}");
            let proof = solve_gemm_puzzle(sid.as_bytes(), &params).unwrap();
            if proof.index == 0 {
                continue;
            }
            total += 1;
            let bad = GemmProof {
                index: proof.index - 1,
                ..proof
            };
            if !verify_gemm_puzzle(sid.as_bytes(), &params, &bad) {
                rejected += 1;
            }
        }
        assert_eq!(rejected, total);
    }

    #[test]
    fn mean_attempts_and_validation() {
        let params = GemmParams {
            dimension: 32,
            difficulty: 4,
            ..GemmParams::default()
        };
        let mut sum = 0u64;
        let count = 2000;
        for i in 0..count {
            sum += solve_gemm_puzzle(format!("mean-{i}").as_bytes(), &params).unwrap().index + 1;
        }
        let mean = sum as f64 / count as f64;
        assert!((mean - 16.0).abs() <= 0.2 * 16.0, "mean {mean}");
        assert!(GemmParams { dimension: 0, ..params }.validate().is_err());
        assert!(GemmParams { freivalds_rounds: 0, ..params }.validate().is_err());
        let capped = GemmParams {
            difficulty: 30,
            attempt_cap: Some(2),
            dimension: 2,
            ..params
        };
        assert_eq!(solve_gemm_puzzle(b"cap", &capped), Err(Error::Exhausted { attempts: 2 }));
    }
}
