//! Deterministic discrete-event simulator of a continuous-batching engine.
//!
//! The engine runs iterations back to back while work exists. An iteration
//! with `b` running requests, of which the set `P` was just admitted, lasts
//! `c0 + c1·b + c2·Σ_{P} prompt_tokens`; every running request emits one
//! token at its end. Admission happens only at iteration boundaries, and an
//! idle engine starts a new iteration as soon as a request is waiting.
//! Events at equal times are processed as arrivals, then prediction
//! results, then the iteration end, then admission.

mod metrics;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::predictor::{batch_schedule, BatcherConfig, PredictorError, PredictorKind};
use crate::sched::{policy_next, McSettings, Policy, SchedError, ScoreConfig, Scorer, WaitingQueue};
use crate::workload::Request;

pub use metrics::{
    completion_length_correlation, events_to_csv, heatmap, summarize, write_events_csv, Aggregates, Heatmap,
    MetricsConfig, WindowThroughput, EVENTS_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub batch_capacity: usize,
    pub iter_base_s: f64,
    pub iter_per_req_s: f64,
    pub prefill_per_token_s: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { batch_capacity: 8, iter_base_s: 0.02, iter_per_req_s: 0.002, prefill_per_token_s: 0.0001 }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.batch_capacity < 1 {
            return Err(SimError::Config("batch_capacity must be ≥ 1".into()));
        }
        if !(self.iter_base_s.is_finite() && self.iter_base_s > 0.0) {
            return Err(SimError::Config("iter_base_s must be > 0".into()));
        }
        if !(self.iter_per_req_s >= 0.0 && self.prefill_per_token_s >= 0.0)
            || !self.iter_per_req_s.is_finite()
            || !self.prefill_per_token_s.is_finite()
        {
            return Err(SimError::Config("iteration cost coefficients must be finite and ≥ 0".into()));
        }
        Ok(())
    }

    pub fn iteration_s(&self, running: usize, prefill_tokens: u64) -> f64 {
        self.iter_base_s + self.iter_per_req_s * running as f64 + self.prefill_per_token_s * prefill_tokens as f64
    }
}

/// Predictor, prediction batching, and the family used to score predictions.
/// Without a batcher predictions are available at arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub batcher: Option<BatcherConfig>,
    pub scoring: McSettings,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { kind: PredictorKind::Oracle, batcher: Some(BatcherConfig::default()), scoring: McSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestEvent {
    pub req_id: u64,
    pub arrival_s: f64,
    /// When the prediction reached the queue; absent if the request was
    /// admitted first or the policy ignores predictions.
    pub predict_ready_s: Option<f64>,
    pub admit_s: f64,
    pub first_token_s: f64,
    pub completion_s: f64,
    pub emitted_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: Policy,
    pub events: Vec<RequestEvent>,
    /// Request ids in admission order.
    pub dispatch_order: Vec<u64>,
    #[serde(flatten)]
    pub aggregates: Aggregates,
    pub heatmap: Option<Heatmap>,
    pub config_digest: String,
    pub seed: u64,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One engine iteration, for work-conservation and occupancy checks.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub start_s: f64,
    pub end_s: f64,
    pub running: usize,
    pub admitted: usize,
    /// Waiting requests left after admission.
    pub waiting_after: usize,
}

/// Everything that determines a run, hashed into `config_digest`.
#[derive(Serialize)]
struct DigestInput<'a> {
    workload: &'a [Request],
    policy: Policy,
    score: &'a ScoreConfig,
    engine: &'a EngineConfig,
    predictor: &'a PredictorConfig,
    metrics: &'a MetricsConfig,
    seed: u64,
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SimSetup<'a> {
    pub policy: Policy,
    pub score: &'a ScoreConfig,
    pub engine: &'a EngineConfig,
    pub predictor: &'a PredictorConfig,
    pub metrics: &'a MetricsConfig,
    /// Recorded in the report; all randomness lives in the workload and the
    /// predictor's own noise seed.
    pub seed: u64,
}

pub fn run_sim(workload: &[Request], setup: &SimSetup) -> Result<SimReport, SimError> {
    simulate(workload, setup, None)
}

pub fn run_sim_traced(workload: &[Request], setup: &SimSetup) -> Result<(SimReport, Vec<IterationRecord>), SimError> {
    let mut trace = Vec::new();
    let report = simulate(workload, setup, Some(&mut trace))?;
    Ok((report, trace))
}

fn validate_workload(workload: &[Request]) -> Result<(), SimError> {
    let mut ids = HashSet::with_capacity(workload.len());
    for (i, r) in workload.iter().enumerate() {
        if !r.arrival_s.is_finite() || r.arrival_s < 0.0 {
            return Err(SimError::Workload(format!("request {} has invalid arrival {}", r.id, r.arrival_s)));
        }
        if i > 0 && r.arrival_s < workload[i - 1].arrival_s {
            return Err(SimError::Workload("arrivals must be sorted".into()));
        }
        if r.emitted_tokens() < 1 {
            return Err(SimError::Workload(format!("request {} emits no tokens", r.id)));
        }
        if !ids.insert(r.id) {
            return Err(SimError::Workload(format!("duplicate request id {}", r.id)));
        }
    }
    Ok(())
}

fn simulate(
    workload: &[Request],
    setup: &SimSetup,
    mut trace: Option<&mut Vec<IterationRecord>>,
) -> Result<SimReport, SimError> {
    let SimSetup { policy, score, engine, predictor, metrics, seed } = *setup;
    engine.validate()?;
    score.validate()?;
    metrics.validate()?;
    validate_workload(workload)?;
    let n = workload.len();

    let scorer = if policy.uses_predictions() { Some(Scorer::new(&predictor.scoring, score.cvar_alpha)?) } else { None };
    // queue ids are workload positions, so equal keys break FIFO by arrival
    let preds: Vec<(u64, f64)> = match (policy.uses_predictions(), &predictor.batcher) {
        (false, _) => Vec::new(),
        (true, None) => workload.iter().enumerate().map(|(i, r)| (i as u64, r.arrival_s)).collect(),
        (true, Some(b)) => {
            let subs: Vec<(u64, f64)> = workload.iter().enumerate().map(|(i, r)| (i as u64, r.arrival_s)).collect();
            let mut ready = batch_schedule(&subs, b)?;
            ready.sort_by(|a, b| a.1.total_cmp(&b.1));
            ready
        }
    };

    let mut queue = WaitingQueue::new(score.rebuild_drift)?;
    let mut predict_ready = vec![None; n];
    let mut admit = vec![f64::NAN; n];
    let mut first_token = vec![f64::NAN; n];
    let mut completion = vec![f64::NAN; n];
    let mut emitted = vec![0u32; n];
    let mut dispatch_order = Vec::with_capacity(n);
    let mut running: Vec<usize> = Vec::with_capacity(engine.batch_capacity);
    let mut iter_end: Option<f64> = None;
    let (mut ai, mut pi) = (0usize, 0usize);

    loop {
        let candidates = [workload.get(ai).map(|r| r.arrival_s), preds.get(pi).map(|p| p.1), iter_end];
        let Some(t) = candidates.into_iter().flatten().min_by(f64::total_cmp) else { break };

        while ai < n && workload[ai].arrival_s == t {
            let r = &workload[ai];
            if policy == Policy::Fcfs {
                queue.push_keyed(ai as u64, r.arrival_s)?;
            } else {
                queue.push(ai as u64, r.max_tokens)?;
            }
            ai += 1;
        }

        while pi < preds.len() && preds[pi].1 == t {
            let i = preds[pi].0 as usize;
            pi += 1;
            if !queue.contains(i as u64) {
                continue;
            }
            let r = &workload[i];
            let pd = predictor.kind.predict(r)?;
            let (e, cv) = scorer.as_ref().expect("scorer present").moments(&pd, r.max_tokens)?;
            queue.update(i as u64, e, cv, policy.beta(queue.len(), score))?;
            predict_ready[i] = Some(t);
        }

        if iter_end == Some(t) {
            running.retain(|&i| {
                emitted[i] += 1;
                if emitted[i] == 1 {
                    first_token[i] = t;
                }
                if emitted[i] == workload[i].emitted_tokens() {
                    completion[i] = t;
                    false
                } else {
                    true
                }
            });
            iter_end = None;
        }

        if iter_end.is_none() && (!running.is_empty() || !queue.is_empty()) {
            let mut prefill = 0u64;
            let mut admitted = 0;
            while running.len() < engine.batch_capacity {
                let Some(e) = policy_next(policy, &mut queue, score) else { break };
                let i = e.req_id as usize;
                admit[i] = t;
                prefill += u64::from(workload[i].prompt_tokens);
                running.push(i);
                dispatch_order.push(workload[i].id);
                admitted += 1;
            }
            let end = t + engine.iteration_s(running.len(), prefill);
            iter_end = Some(end);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(IterationRecord { start_s: t, end_s: end, running: running.len(), admitted, waiting_after: queue.len() });
            }
        }
    }

    let events: Vec<RequestEvent> = workload
        .iter()
        .enumerate()
        .map(|(i, r)| RequestEvent {
            req_id: r.id,
            arrival_s: r.arrival_s,
            predict_ready_s: predict_ready[i],
            admit_s: admit[i],
            first_token_s: first_token[i],
            completion_s: completion[i],
            emitted_tokens: emitted[i],
        })
        .collect();
    let aggregates = summarize(&events, &metrics.ks, &metrics.windows_s);
    let heatmap = metrics::auto_heatmap(&events, metrics)?;
    let config_digest = config_digest(&DigestInput {
        workload,
        policy,
        score,
        engine,
        predictor,
        metrics,
        seed,
    });
    Ok(SimReport { policy, events, dispatch_order, aggregates, heatmap, config_digest, seed })
}
