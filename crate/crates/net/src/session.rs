//! Challenger side of a TCP connection to a worker daemon.

use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use gputel_core::measurement::WorkerSession;
use gputel_core::{Challenge, Error, PreChallenge, PreResponse, Response};

use crate::wire::{read_message, write_message, WireMessage};

pub struct TcpWorkerSession {
    stream: TcpStream,
}

fn transport(e: impl std::fmt::Display) -> Error {
    Error::Transport(e.to_string())
}

impl TcpWorkerSession {
    /// Connects to `addr`; `timeout` bounds the connect and every read.
    pub fn connect(addr: &str, timeout: Duration) -> gputel_core::Result<Self> {
        let resolved = addr
            .to_socket_addrs()
            .map_err(|e| transport(format!("{addr}: {e}")))?
            .next()
            .ok_or_else(|| transport(format!("{addr}: no address")))?;
        let stream = TcpStream::connect_timeout(&resolved, timeout).map_err(|e| transport(format!("{addr}: {e}")))?;
        stream.set_nodelay(true).map_err(transport)?;
        stream.set_read_timeout(Some(timeout)).map_err(transport)?;
        Ok(Self { stream })
    }

    fn round_trip(&mut self, msg: &WireMessage) -> gputel_core::Result<WireMessage> {
        write_message(&mut self.stream, msg).map_err(transport)?;
        match read_message(&mut self.stream).map_err(transport)? {
            WireMessage::Error(m) => Err(transport(format!("worker error: {m}"))),
            reply => Ok(reply),
        }
    }
}

impl WorkerSession for TcpWorkerSession {
    fn pre_challenge(&mut self, pre: &PreChallenge) -> gputel_core::Result<PreResponse> {
        match self.round_trip(&WireMessage::PreChallenge(pre.clone()))? {
            WireMessage::PreResponse(r) => Ok(r),
            other => Err(transport(format!("expected PreResponse, got {:?}", other.message_type()))),
        }
    }

    fn exchange(&mut self, challenge: &Challenge) -> gputel_core::Result<Response> {
        match self.round_trip(&WireMessage::ChallengeBatch(challenge.clone()))? {
            WireMessage::ResponseBatch(r) => Ok(r),
            other => Err(transport(format!("expected ResponseBatch, got {:?}", other.message_type()))),
        }
    }
}
