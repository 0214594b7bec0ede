//! Worker daemon: one thread and one simulated device per connection.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread;

use gputel_core::measurement::{Clock, WallClock};
use gputel_core::worksim::WorkerEngine;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::WorkerConfig;
use crate::wire::{read_message, write_message, WireError, WireMessage};
use crate::CliError;

pub struct WorkerServer {
    listener: TcpListener,
    config: WorkerConfig,
    seed: u64,
}

impl WorkerServer {
    pub fn bind(addr: &str, config: WorkerConfig, seed: u64) -> Result<Self, CliError> {
        // fail on a bad profile before taking the port
        engine_for(&config)?;
        let listener = TcpListener::bind(addr).map_err(|e| CliError::Core(gputel_core::Error::Resource(format!("bind {addr}: {e}"))))?;
        Ok(Self { listener, config, seed })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the process ends.
    pub fn serve(self) -> Result<(), CliError> {
        for (i, conn) in self.listener.incoming().enumerate() {
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("accept failed: {e}");
                    continue;
                }
            };
            let config = self.config.clone();
            let seed = self.seed.wrapping_add(i as u64);
            thread::spawn(move || {
                if let Err(e) = serve_connection(stream, &config, seed) {
                    eprintln!("connection {i}: {e}");
                }
            });
        }
        Ok(())
    }
}

fn engine_for(config: &WorkerConfig) -> Result<WorkerEngine, CliError> {
    let device = config.device.as_ref().map(|d| d.to_profile());
    Ok(WorkerEngine::new(config.profile.clone(), device)?)
}

/// Answers messages on one connection until the peer hangs up.
pub fn serve_connection(stream: TcpStream, config: &WorkerConfig, seed: u64) -> Result<(), CliError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut engine = engine_for(config)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let clock = WallClock::new();
    loop {
        let msg = match read_message(&mut reader) {
            Ok(m) => m,
            Err(WireError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(WireError::Io(e)) => return Err(e.into()),
            Err(e @ WireError::Payload(_)) => {
                // the whole frame was consumed, so the stream is still in sync
                write_message(&mut writer, &WireMessage::Error(e.to_string()))?;
                continue;
            }
            Err(e) => {
                let _ = write_message(&mut writer, &WireMessage::Error(e.to_string()));
                return Err(e.into());
            }
        };
        let reply = match msg {
            WireMessage::ChallengeBatch(challenge) => {
                let start = clock.now_ns();
                match engine.respond(&challenge, &mut rng) {
                    Ok((response, lat)) => {
                        clock.sleep_until(start + lat.total_ns);
                        WireMessage::ResponseBatch(response)
                    }
                    Err(e) => WireMessage::Error(e.to_string()),
                }
            }
            WireMessage::PreChallenge(pre) => match engine.handle_pre(&pre) {
                Ok(r) => WireMessage::PreResponse(r),
                Err(e) => WireMessage::Error(e.to_string()),
            },
            other => WireMessage::Error(format!("unexpected {:?} from challenger", other.message_type())),
        };
        write_message(&mut writer, &reply)?;
    }
}
