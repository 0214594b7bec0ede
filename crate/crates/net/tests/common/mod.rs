#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_gputel");

/// A `gputel worker serve` child, killed on drop.
pub struct WorkerProc {
    child: Child,
    pub addr: String,
}

impl WorkerProc {
    pub fn spawn(profile: &Path, seed: u64) -> Self {
        let mut child = Command::new(BIN)
            .args(["worker", "serve", "--listen", "127.0.0.1:0", "--seed", &seed.to_string(), "--profile"])
            .arg(profile)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn worker");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected worker banner {line:?}"))
            .to_owned();
        Self { child, addr }
    }
}

impl Drop for WorkerProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    path
}

pub fn challenger(mode: &str, config: &Path, out: &Path, seed: u64) -> Output {
    Command::new(BIN)
        .args(["challenger", "run", "--mode", mode, "--seed", &seed.to_string(), "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run challenger")
}

/// Worker profile whose PoW rate at difficulty `d` is `lambda` per second.
pub fn pow_profile(lambda: f64, d: u32) -> String {
    format!("[profile]\nhash_rate = {}\n", lambda * 2f64.powi(d as i32))
}

/// One line per acceptance criterion, written past the test harness capture.
pub fn verdict(n: u32, what: &str, ok: bool, detail: &str) {
    let mark = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{mark}] criterion {n}: {what} ({detail})");
}
