//! Named simulation scenarios, each writing a histogram-ready CSV and a row
//! of pass/fail flags to the suite summary.
//!
//! Everything runs on virtual time from seeded RNGs, so the same file and
//! seed produce byte-identical output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gputel_core::measurement::{continuous_measurement, ContinuousConfig, VirtualClock};
use gputel_core::pow::PowParams;
use gputel_core::primitives::{hash, ns_to_secs};
use gputel_core::residency::{classify_residency, default_threshold_ns, ResidencyMode, DEFAULT_CHAL_BYTES};
use gputel_core::stats::detection::MIN_TRIALS;
use gputel_core::stats::{detection_curve, ks_exponential, mean, utilization_proxy, DetectionGrid};
use gputel_core::worksim::{simulate_pow_time, simulate_residency_time, simulate_vdf_time, Contention, InProcessWorker, ResidencyState, WorkerProfile};
use gputel_core::{ChallengeParams, TimingSample};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCENARIOS: &[&str] = &[
    "fig4-pow-hist",
    "fig5-pow-difficulty",
    "fig6-pow-contention",
    "fig8-vdf-steps",
    "fig9-residency",
    "fig13-residency-pretouch",
    "fig16-vdf-saturation",
    "detection-curve",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub scenario: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Samples per series; each scenario has its own default.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Base worker profile; each scenario varies the field it studies.
    #[serde(default)]
    pub profile: Option<WorkerProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub flag: String,
    pub passed: bool,
    pub value: f64,
    pub criterion: String,
}

impl SummaryRow {
    fn new(scenario: &str, flag: &str, passed: bool, value: f64, criterion: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            flag: flag.into(),
            passed,
            value,
            criterion: criterion.into(),
        }
    }
}

struct Ctx<'a> {
    spec: &'a ScenarioSpec,
    rng: ChaCha20Rng,
    seed: u64,
}

impl Ctx<'_> {
    fn samples(&self, default: usize) -> usize {
        self.spec.samples.unwrap_or(default)
    }

    fn profile(&self) -> WorkerProfile {
        self.spec.profile.clone().unwrap_or_default()
    }

    fn row(&self, flag: &str, passed: bool, value: f64, criterion: impl Into<String>) -> SummaryRow {
        SummaryRow::new(&self.spec.name, flag, passed, value, criterion)
    }
}

type Table = (Vec<&'static str>, Vec<Vec<String>>);

fn fig4_pow_hist(cx: &mut Ctx) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let n = cx.samples(1000);
    let d = 6;
    let lambda = 4.0;
    let profile = WorkerProfile {
        hash_rate: lambda * 2f64.powi(d as i32),
        ..cx.profile()
    };
    // real solves; the virtual clock carries the modeled latency
    let clock = VirtualClock::new();
    let mut worker = InProcessWorker::new(profile.clone(), None, clock.clone(), cx.seed)?;
    let cfg = ContinuousConfig {
        session_id: b"fig4".to_vec(),
        rounds: n,
        interval_ns: 0,
        lambda_min: lambda,
        t0_ns: 0,
        params: ChallengeParams::Pow(PowParams {
            argon_memory_kib: 8,
            ..PowParams::with_difficulty(d)
        }),
    };
    let out = continuous_measurement(&mut worker, &clock, &cfg, &mut cx.rng)?;
    let times: Vec<f64> = out.records.iter().map(|r| ns_to_secs(r.adjusted_ns)).collect();
    let ks = ks_exponential(&times, profile.pow_lambda(d))?;
    let rows = out
        .records
        .iter()
        .map(|r| vec![r.round.to_string(), ns_to_secs(r.adjusted_ns).to_string(), r.valid.to_string()])
        .collect();
    Ok((
        (vec!["round", "time_s", "valid"], rows),
        vec![
            cx.row("all_valid", out.invalid_rounds == 0, out.invalid_rounds as f64, "invalid rounds = 0"),
            cx.row("ks_exponential", ks.passes(0.01), ks.p_value, "KS p-value >= 0.01"),
        ],
    ))
}

fn fig5_pow_difficulty(cx: &mut Ctx) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let n = cx.samples(4000);
    let base = cx.profile();
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for d in 6..=9u32 {
        let times: Vec<f64> = (0..n)
            .map(|_| ns_to_secs(simulate_pow_time(&base, d, &mut cx.rng).kernel_ns))
            .collect();
        rows.extend(times.iter().enumerate().map(|(i, t)| vec![d.to_string(), i.to_string(), t.to_string()]));
        means.push(mean(&times));
    }
    let ratios: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    let worst = ratios.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
    Ok((
        (vec!["difficulty", "sample", "time_s"], rows),
        vec![cx.row("mean_ratio_doubles", worst <= 0.2, worst, "|mean(d+1)/mean(d) - 2| <= 0.2")],
    ))
}

fn fig6_pow_contention(cx: &mut Ctx) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let n = cx.samples(2000);
    let base = cx.profile();
    let d = 8;
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for factor in [1.0, 1.5, 2.5] {
        let p = WorkerProfile {
            contention: Contention::uniform(factor),
            ..base.clone()
        };
        let mut times: Vec<f64> = (0..n)
            .map(|_| ns_to_secs(simulate_pow_time(&p, d, &mut cx.rng).kernel_ns))
            .collect();
        rows.extend(times.iter().enumerate().map(|(i, t)| vec![factor.to_string(), i.to_string(), t.to_string()]));
        times.sort_by(f64::total_cmp);
        medians.push(times[n / 2]);
    }
    let shifted = medians.windows(2).all(|w| w[1] > w[0]);
    Ok((
        (vec!["contention", "sample", "time_s"], rows),
        vec![cx.row("shifts_right", shifted, medians[2] / medians[0], "median strictly increases with contention")],
    ))
}

fn fig8_vdf_steps(cx: &mut Ctx) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let n = cx.samples(200);
    let p = cx.profile();
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for k in 10..=16 {
        let t = 1u64 << k;
        let times: Vec<f64> = (0..n)
            .map(|_| ns_to_secs(simulate_vdf_time(&p, t, 1, &mut cx.rng).kernel_ns))
            .collect();
        rows.extend(times.iter().enumerate().map(|(i, s)| vec![t.to_string(), i.to_string(), s.to_string()]));
        pts.push((t as f64, mean(&times)));
    }
    let r2 = r_squared(&pts);
    Ok((
        (vec!["delay", "sample", "time_s"], rows),
        vec![cx.row("linear_in_delay", r2 >= 0.99, r2, "R^2 of mean time vs T >= 0.99")],
    ))
}

/// Coefficient of determination of the least-squares line through `pts`.
pub fn r_squared(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

fn residency_clusters(cx: &mut Ctx, pretouch: f64) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let n = cx.samples(500);
    let base = WorkerProfile {
        pretouch_factor: pretouch,
        ..cx.profile()
    };
    let bytes = base.modeled_chal_bytes.unwrap_or(DEFAULT_CHAL_BYTES);
    let threshold = default_threshold_ns(bytes, &base.bandwidth)?;
    let mut rows = Vec::new();
    let mut errors = 0usize;
    let (mut max_hot, mut min_cold) = (0u64, u64::MAX);
    for state in [ResidencyState::Hot, ResidencyState::Cold] {
        let p = WorkerProfile {
            residency: state,
            ..base.clone()
        };
        for i in 0..n {
            let (lat, truth) = simulate_residency_time(&p, i as u64 + 1, bytes, &mut cx.rng)?;
            let timing = TimingSample::new(lat.total_ns, lat.kernel_ns, p.network_t0_ns)?;
            let seen = classify_residency(&timing, threshold)?;
            errors += usize::from(seen != truth);
            match truth {
                ResidencyMode::Hot => max_hot = max_hot.max(timing.adjusted_ns()),
                ResidencyMode::Cold => min_cold = min_cold.min(timing.adjusted_ns()),
            }
            let label = if truth == ResidencyMode::Hot { "hot" } else { "cold" };
            rows.push(vec![label.to_string(), i.to_string(), ns_to_secs(timing.adjusted_ns()).to_string()]);
        }
    }
    Ok((
        (vec!["truth", "sample", "time_s"], rows),
        vec![
            cx.row("separated", max_hot < min_cold, ns_to_secs(min_cold.saturating_sub(max_hot)), "max hot < min cold"),
            cx.row("classified", errors == 0, errors as f64, "misclassified probes = 0"),
        ],
    ))
}

fn fig16_vdf_saturation(cx: &mut Ctx) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let n = cx.samples(200);
    let p = cx.profile();
    let delay = 1 << 12;
    let mut times = BTreeMap::new();
    for k in 0..=10 {
        let m = 1u32 << k;
        let draws: Vec<f64> = (0..n)
            .map(|_| ns_to_secs(simulate_vdf_time(&p, delay, m, &mut cx.rng).kernel_ns))
            .collect();
        times.insert(m, mean(&draws));
    }
    let util = utilization_proxy(&times)?;
    let cap = p.vdf_capacity;
    let beyond: Vec<f64> = util.iter().filter(|(&m, _)| m >= cap).map(|(_, &u)| u).collect();
    let spread = beyond.iter().fold(0.0f64, |a, &u| a.max(1.0 - u));
    let below_rising = util
        .iter()
        .filter(|(&m, _)| m <= cap)
        .map(|(_, &u)| u)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] > w[0]);
    let rows = util
        .iter()
        .map(|(m, u)| vec![m.to_string(), times[m].to_string(), u.to_string()])
        .collect();
    Ok((
        (vec!["instances", "batch_time_s", "util"], rows),
        vec![
            cx.row("flat_beyond_capacity", !beyond.is_empty() && spread <= 0.05, spread, "1 - Util(M) <= 0.05 for M >= capacity"),
            cx.row("rising_below_capacity", below_rising, util.values().next().copied().unwrap_or(0.0), "Util increasing up to capacity"),
        ],
    ))
}

fn detection(cx: &mut Ctx) -> Result<(Table, Vec<SummaryRow>), CliError> {
    let lambda_min = 1.0;
    let d = 8;
    let base = cx.profile();
    let at = |rate: f64| WorkerProfile {
        hash_rate: rate * 2f64.powi(d as i32),
        ..base.clone()
    };
    let grid = DetectionGrid {
        lambda_min,
        alpha: 0.05,
        difficulty: d,
        sample_counts: vec![5, 10, 20, 50],
        trials: cx.samples(MIN_TRIALS),
        t0_ns: 0,
    };
    let pts = detection_curve(&at(2.0 * lambda_min), &at(lambda_min / 2.0), &grid, cx.seed)?;
    let last = pts.last().expect("non-empty grid");
    let rows = pts
        .iter()
        .map(|p| vec![p.n.to_string(), p.honest_accept.to_string(), p.deviant_accept.to_string()])
        .collect();
    Ok((
        (vec!["n", "honest_accept", "deviant_accept"], rows),
        vec![
            cx.row("honest_accepted", last.honest_accept >= 0.99, last.honest_accept, "honest accept >= 0.99 at n = 50"),
            cx.row("deviant_rejected", last.deviant_accept <= 0.01, last.deviant_accept, "deviant accept <= 0.01 at n = 50"),
        ],
    ))
}

fn unknown(name: &str) -> CliError {
    CliError::Config(format!("unknown scenario {name:?}; available: {}", SCENARIOS.join(", ")))
}

/// Runs every scenario in `file`, writing `<name>.csv` per scenario plus
/// `summary.csv` and `summary.json` into `out`.
pub fn run_scenarios(file: &ScenarioFile, out: &Path, seed: u64) -> Result<Vec<SummaryRow>, CliError> {
    // validate names before doing any work
    if let Some(bad) = file.scenario.iter().find(|s| !SCENARIOS.contains(&s.name.as_str())) {
        return Err(unknown(&bad.name));
    }
    fs::create_dir_all(out)?;
    let mut summary = Vec::new();
    for spec in &file.scenario {
        // per-name seeds keep each scenario's output independent of its neighbours
        let own_seed = seed ^ hash(spec.name.as_bytes()).high_u64();
        let mut cx = Ctx {
            spec,
            rng: ChaCha20Rng::seed_from_u64(own_seed),
            seed: own_seed,
        };
        let ((header, rows), flags) = match spec.name.as_str() {
            "fig4-pow-hist" => fig4_pow_hist(&mut cx)?,
            "fig5-pow-difficulty" => fig5_pow_difficulty(&mut cx)?,
            "fig6-pow-contention" => fig6_pow_contention(&mut cx)?,
            "fig8-vdf-steps" => fig8_vdf_steps(&mut cx)?,
            "fig9-residency" => residency_clusters(&mut cx, 1.0)?,
            "fig13-residency-pretouch" => residency_clusters(&mut cx, 0.75)?,
            "fig16-vdf-saturation" => fig16_vdf_saturation(&mut cx)?,
            "detection-curve" => detection(&mut cx)?,
            other => return Err(unknown(other)),
        };
        let mut w = csv::Writer::from_path(out.join(format!("{}.csv", spec.name)))?;
        w.write_record(&header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        summary.extend(flags);
    }
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    if summary.is_empty() {
        w.write_record(["scenario", "flag", "passed", "value", "criterion"])?;
    }
    for r in &summary {
        w.serialize(r)?;
    }
    w.flush()?;
    fs::write(out.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

/// 0 when every flag passed, 1 otherwise.
pub fn summary_exit_code(summary: &[SummaryRow]) -> i32 {
    i32::from(!summary.iter().all(|r| r.passed))
}
