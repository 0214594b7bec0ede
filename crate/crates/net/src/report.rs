//! Session reports: a JSON document plus a per-round CSV.
//!
//! CSV header: `session_id,round,kind,total_time_ns,kernel_time_ns,adjusted_ns,valid,mode`.
//! `mode` is only filled for residency rounds.

use std::fs;
use std::path::{Path, PathBuf};

use gputel_core::measurement::RoundRecord;
use gputel_core::primitives::ns_to_secs;
use gputel_core::residency::{ResidencyMode, ResidencyReport};
use gputel_core::stats::mean_round_decision;
use gputel_core::{ChallengeKind, Decision, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::ChallengerConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRow {
    pub session_id: String,
    pub round: usize,
    pub kind: ChallengeKind,
    pub total_time_ns: u64,
    pub kernel_time_ns: u64,
    pub adjusted_ns: u64,
    pub valid: bool,
    pub mode: Option<ResidencyMode>,
}

impl RoundRow {
    pub fn from_record(session_id: &str, r: &RoundRecord) -> Self {
        Self {
            session_id: session_id.to_owned(),
            round: r.round,
            kind: r.kind,
            total_time_ns: r.total_time_ns,
            kernel_time_ns: r.kernel_time_ns,
            adjusted_ns: r.adjusted_ns,
            valid: r.valid,
            mode: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidencySummary {
    pub threshold_ns: u64,
    pub fingerprint_ok: Option<bool>,
    pub cold_rounds: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub kind: ChallengeKind,
    pub seed: u64,
    pub config: ChallengerConfig,
    pub rounds: Vec<RoundRow>,
    pub decision: Decision,
    pub residency: Option<ResidencySummary>,
    /// Transport failure that cut the session short.
    pub aborted: Option<String>,
}

/// Residency sessions accept only when every round was valid and resident.
pub fn residency_decision(report: &ResidencyReport) -> Decision {
    let bad = report
        .rounds
        .iter()
        .filter(|r| !r.valid || r.mode == ResidencyMode::Cold)
        .count();
    Decision {
        verdict: Verdict::from_accept(!report.flagged),
        statistic: bad as f64,
        threshold: 0.0,
        samples_used: report.rounds.len(),
    }
}

impl SessionReport {
    pub fn from_residency(session_id: &str, seed: u64, config: ChallengerConfig, threshold_ns: u64, report: &ResidencyReport) -> Self {
        let rounds = report
            .rounds
            .iter()
            .map(|r| RoundRow {
                session_id: session_id.to_owned(),
                round: r.round as usize,
                kind: ChallengeKind::Residency,
                total_time_ns: r.total_ns,
                kernel_time_ns: r.kernel_ns,
                adjusted_ns: r.adjusted_ns,
                valid: r.valid,
                mode: Some(r.mode),
            })
            .collect();
        Self {
            session_id: session_id.to_owned(),
            kind: ChallengeKind::Residency,
            seed,
            config,
            rounds,
            decision: residency_decision(report),
            residency: Some(ResidencySummary {
                threshold_ns,
                fingerprint_ok: report.fingerprint_ok,
                cold_rounds: report.cold_rounds(),
            }),
            aborted: report.aborted.clone(),
        }
    }

    /// 0 accept, 1 reject, 2 when the session did not complete.
    pub fn exit_code(&self) -> i32 {
        if self.aborted.is_some() {
            2
        } else {
            self.decision.verdict.exit_code()
        }
    }

    /// Rebuilds the decision from the rows and the config snapshot alone.
    pub fn recompute_decision(&self) -> Result<Decision, CliError> {
        if self.kind == ChallengeKind::Residency {
            let summary = self.residency.as_ref().ok_or_else(|| CliError::Config("residency summary missing".into()))?;
            let bad = self.rounds.iter().filter(|r| !r.valid || r.mode != Some(ResidencyMode::Hot)).count();
            let accept = bad == 0
                && self.aborted.is_none()
                && summary.fingerprint_ok != Some(false)
                && self.rounds.iter().all(|r| r.adjusted_ns < summary.threshold_ns);
            return Ok(Decision {
                verdict: Verdict::from_accept(accept),
                statistic: bad as f64,
                threshold: 0.0,
                samples_used: self.rounds.len(),
            });
        }
        let adjusted: Vec<f64> = self
            .rounds
            .iter()
            .filter(|r| r.valid)
            .map(|r| ns_to_secs(r.adjusted_ns))
            .collect();
        Ok(mean_round_decision(&adjusted, self.config.lambda_min)?)
    }

    pub fn verdict_line(&self) -> String {
        let d = &self.decision;
        let verdict = match (&self.aborted, d.verdict) {
            (Some(_), _) => "ERROR",
            (None, Verdict::Accept) => "ACCEPT",
            (None, Verdict::Reject) => "REJECT",
        };
        format!(
            "{verdict} kind={} rounds={} statistic={:.6} threshold={:.6}",
            self.kind, d.samples_used, d.statistic, d.threshold
        )
    }

    /// Writes the JSON report to `path` and the rows next to it as `.csv`.
    pub fn write(&self, path: &Path) -> Result<PathBuf, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        let csv_path = path.with_extension("csv");
        write_rows(&csv_path, &self.rounds)?;
        Ok(csv_path)
    }
}

pub fn write_rows(path: &Path, rows: &[RoundRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["session_id", "round", "kind", "total_time_ns", "kernel_time_ns", "adjusted_ns", "valid", "mode"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
