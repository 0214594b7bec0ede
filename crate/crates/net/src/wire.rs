//! Framed messages: `version (1) | type (1) | be32 length | payload`.
//!
//! The payload is JSON with keys sorted at every level and byte fields in
//! lowercase hex, so two implementations agree on the exact bytes.

use std::io::{self, Read, Write};

use gputel_core::{Challenge, PreChallenge, PreResponse, Response};
use serde::{de::DeserializeOwned, Serialize};
use thiserror::Error;

pub const WIRE_VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
pub const MAX_PAYLOAD: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageType {
    ChallengeBatch = 1,
    ResponseBatch = 2,
    PreChallenge = 3,
    PreResponse = 4,
    Error = 5,
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        Ok(match b {
            1 => MessageType::ChallengeBatch,
            2 => MessageType::ResponseBatch,
            3 => MessageType::PreChallenge,
            4 => MessageType::PreResponse,
            5 => MessageType::Error,
            other => return Err(WireError::UnknownType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    ChallengeBatch(Challenge),
    ResponseBatch(Response),
    PreChallenge(PreChallenge),
    PreResponse(PreResponse),
    Error(String),
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("truncated frame: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unsupported wire version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the 256 MiB limit")]
    Oversize(usize),
    #[error("{0} trailing bytes after frame")]
    Trailing(usize),
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(serde::Deserialize, Serialize)]
struct ErrorBody {
    message: String,
}

impl WireMessage {
    pub fn message_type(&self) -> MessageType {
        match self {
            WireMessage::ChallengeBatch(_) => MessageType::ChallengeBatch,
            WireMessage::ResponseBatch(_) => MessageType::ResponseBatch,
            WireMessage::PreChallenge(_) => MessageType::PreChallenge,
            WireMessage::PreResponse(_) => MessageType::PreResponse,
            WireMessage::Error(_) => MessageType::Error,
        }
    }

    /// Canonical payload bytes.
    pub fn payload(&self) -> Result<Vec<u8>, WireError> {
        match self {
            WireMessage::ChallengeBatch(c) => canonical_json(c),
            WireMessage::ResponseBatch(r) => canonical_json(r),
            WireMessage::PreChallenge(p) => canonical_json(p),
            WireMessage::PreResponse(p) => canonical_json(p),
            WireMessage::Error(m) => canonical_json(&ErrorBody { message: m.clone() }),
        }
    }
}

/// JSON with object keys in sorted order.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, WireError> {
    // serde_json's Value map is ordered by key
    let v = serde_json::to_value(value).map_err(|e| WireError::Payload(e.to_string()))?;
    serde_json::to_vec(&v).map_err(|e| WireError::Payload(e.to_string()))
}

fn parse<T: DeserializeOwned>(payload: &[u8]) -> Result<T, WireError> {
    serde_json::from_slice(payload).map_err(|e| WireError::Payload(e.to_string()))
}

pub fn encode_message(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    let payload = msg.payload()?;
    if payload.len() > MAX_PAYLOAD {
        return Err(WireError::Oversize(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.push(WIRE_VERSION);
    out.push(msg.message_type() as u8);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Validates a header and returns `(type, payload length)`.
pub fn decode_header(header: &[u8]) -> Result<(MessageType, usize), WireError> {
    if header.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            have: header.len(),
        });
    }
    if header[0] != WIRE_VERSION {
        return Err(WireError::UnsupportedVersion(header[0]));
    }
    let kind = MessageType::try_from(header[1])?;
    let len = u32::from_be_bytes([header[2], header[3], header[4], header[5]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::Oversize(len));
    }
    Ok((kind, len))
}

pub fn decode_payload(kind: MessageType, payload: &[u8]) -> Result<WireMessage, WireError> {
    Ok(match kind {
        MessageType::ChallengeBatch => WireMessage::ChallengeBatch(parse(payload)?),
        MessageType::ResponseBatch => WireMessage::ResponseBatch(parse(payload)?),
        MessageType::PreChallenge => WireMessage::PreChallenge(parse(payload)?),
        MessageType::PreResponse => WireMessage::PreResponse(parse(payload)?),
        MessageType::Error => WireMessage::Error(parse::<ErrorBody>(payload)?.message),
    })
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, WireError> {
    let (kind, len) = decode_header(bytes)?;
    let total = HEADER_LEN + len;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            have: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(WireError::Trailing(bytes.len() - total));
    }
    decode_payload(kind, &bytes[HEADER_LEN..])
}

pub fn write_message<W: Write>(w: &mut W, msg: &WireMessage) -> Result<(), WireError> {
    w.write_all(&encode_message(msg)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_message<R: Read>(r: &mut R) -> Result<WireMessage, WireError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    let (kind, len) = decode_header(&header)?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    decode_payload(kind, &payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gputel_core::gemm::{GemmParams, GemmProof, Matrix};
    use gputel_core::pow::{PowParams, PowSolution};
    use gputel_core::primitives::hash;
    use gputel_core::residency::ProbeParams;
    use gputel_core::vdf::VdfProof;
    use gputel_core::{ChallengeParams, ResponsePayload, Salt, VdfParams};
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn samples() -> Vec<WireMessage> {
        let params = [
            ChallengeParams::Pow(PowParams::default()),
            ChallengeParams::Vdf(VdfParams {
                modulus: BigUint::from(1081u32),
                instances: 2,
                t_min: 4,
                t_max: 9,
            }),
            ChallengeParams::Gemm(GemmParams::default()),
            ChallengeParams::Residency(ProbeParams::default()),
        ];
        let mut out: Vec<WireMessage> = params
            .into_iter()
            .map(|p| WireMessage::ChallengeBatch(Challenge::new(b"sess".to_vec(), Salt::from_bytes([7; 32]), 99, p).unwrap()))
            .collect();
        let payloads = [
            ResponsePayload::Pow(PowSolution {
                nonce: 3,
                digest: hash(b"a"),
                attempts: 4,
            }),
            ResponsePayload::Vdf {
                proofs: vec![VdfProof {
                    output: BigUint::from(836u32),
                    pi: BigUint::from(729u32),
                    remainder: 1,
                    challenge_prime: u128::MAX - 158,
                }],
            },
            ResponsePayload::Gemm(GemmProof {
                index: 2,
                product: Matrix::from_rows(&[&[1, 2], &[3, (1 << 61) - 2]]).unwrap(),
                chain_state: hash(b"s"),
            }),
            ResponsePayload::Residency { digest: hash(b"r") },
        ];
        out.extend(
            payloads
                .into_iter()
                .map(|p| WireMessage::ResponseBatch(Response::new(b"sess".to_vec(), p, 12))),
        );
        out.push(WireMessage::PreChallenge(PreChallenge {
            session_id: b"sess".to_vec(),
            chal_seed: Salt::from_bytes([1; 32]),
            size_bytes: 1 << 20,
            block_size: 1 << 16,
            fingerprint_masked: true,
        }));
        out.push(WireMessage::PreResponse(PreResponse {
            session_id: b"sess".to_vec(),
            blocks: 16,
            r_gpu: Some(hash(b"g")),
        }));
        out.push(WireMessage::Error("bad params".into()));
        out
    }

    #[test]
    fn round_trip_every_type() {
        for m in samples() {
            let bytes = encode_message(&m).unwrap();
            assert_eq!(bytes[0], WIRE_VERSION);
            assert_eq!(bytes[1], m.message_type() as u8);
            assert_eq!(decode_message(&bytes).unwrap(), m);
            let mut cursor = std::io::Cursor::new(bytes);
            assert_eq!(read_message(&mut cursor).unwrap(), m);
        }
    }

    #[test]
    fn payload_is_key_sorted_hex() {
        let m = &samples()[0];
        let text = String::from_utf8(m.payload().unwrap()).unwrap();
        assert!(text.starts_with("{\"issued_at\":99,\"kind\":\"pow\""), "{text}");
        assert!(text.contains(&format!("\"session_id\":\"{}\"", hex::encode(b"sess"))));
    }

    #[test]
    fn framing_errors() {
        let bytes = encode_message(&samples()[0]).unwrap();
        for cut in [0, 1, 5, bytes.len() - 1] {
            assert!(matches!(decode_message(&bytes[..cut]), Err(WireError::Truncated { .. })));
        }
        let mut v2 = bytes.clone();
        v2[0] = 0x02;
        assert!(matches!(decode_message(&v2), Err(WireError::UnsupportedVersion(2))));
        let mut bad_type = bytes.clone();
        bad_type[1] = 9;
        assert!(matches!(decode_message(&bad_type), Err(WireError::UnknownType(9))));
        let mut huge = bytes.clone();
        huge[2..6].copy_from_slice(&((MAX_PAYLOAD as u32) + 1).to_be_bytes());
        assert!(matches!(decode_message(&huge), Err(WireError::Oversize(_))));
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(decode_message(&trailing), Err(WireError::Trailing(1))));
        let mut wrong_body = bytes;
        wrong_body[1] = MessageType::PreResponse as u8;
        assert!(matches!(decode_message(&wrong_body), Err(WireError::Payload(_))));
    }

    /// 10^6 random inputs up to 1 MiB. Half carry a well-formed header so the
    /// payload parser sees garbage too.
    #[test]
    fn million_random_inputs() {
        use rand::{Rng, RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xF022);
        let mut buf = vec![0u8; 1 << 20];
        let mut decoded = 0usize;
        for i in 0..1_000_000u32 {
            let len = if i % 4096 == 0 { rng.gen_range(0..=1 << 20) } else { rng.gen_range(0..=256) };
            let bytes = &mut buf[..len];
            rng.fill_bytes(bytes);
            if len >= HEADER_LEN && rng.gen_bool(0.5) {
                bytes[0] = WIRE_VERSION;
                bytes[1] = rng.gen_range(1..=5);
                bytes[2..6].copy_from_slice(&((len - HEADER_LEN) as u32).to_be_bytes());
            }
            decoded += usize::from(decode_message(bytes).is_ok());
        }
        // random JSON is essentially never valid
        assert!(decoded < 10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn decode_is_total(bytes in prop::collection::vec(any::<u8>(), 0..4096)) {
            let _ = decode_message(&bytes);
        }

        #[test]
        fn decode_is_total_with_valid_header(kind in 1u8..=5, body in prop::collection::vec(any::<u8>(), 0..1024)) {
            let mut frame = vec![WIRE_VERSION, kind];
            frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
            frame.extend_from_slice(&body);
            let _ = decode_message(&frame);
        }
    }
}
