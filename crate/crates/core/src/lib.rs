//! Challenge-response telemetry: puzzles whose solve times expose how much
//! compute a remote worker really delivers, plus the tests that judge them.
//!
//! The statistics layer is generic over the float type; the aliases below fix
//! it to `f64`.

pub mod envelope;
pub mod error;
pub mod fingerprint;
pub mod gemm;
pub mod measurement;
pub mod pow;
pub mod primitives;
pub mod residency;
mod serde_hex;
pub mod stats;
pub mod vdf;
pub mod worksim;

pub use envelope::{Challenge, ChallengeKind, ChallengeParams, PreChallenge, PreResponse, Response, ResponsePayload, VdfParams};
pub use error::{Error, Result};
pub use primitives::{Digest, Salt, TimingSample};
pub use stats::Verdict;

pub type Decision = stats::Decision<f64>;
pub type TestConfig = stats::TestConfig<f64>;
pub type RateModel = stats::RateModel<f64>;
pub type GofResult = stats::GofResult<f64>;
