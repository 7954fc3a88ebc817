use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RequestEvent, SimError};
use crate::fit::nearest_rank;

pub const EVENTS_CSV_HEADER: &str = "req_id,arrival_s,admit_s,first_token_s,completion_s,emitted_tokens";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Completion counts for time@K.
    pub ks: Vec<usize>,
    /// Windows for throughput@W, in seconds from time zero.
    pub windows_s: Vec<f64>,
    /// Zero disables the heatmap.
    pub heat_time_bins: usize,
    pub heat_len_bins: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { ks: vec![100, 1000, 3000], windows_s: vec![10.0, 30.0, 60.0, 180.0], heat_time_bins: 20, heat_len_bins: 16 }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.ks.contains(&0) {
            return Err(SimError::Config("time@K needs K ≥ 1".into()));
        }
        if self.windows_s.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SimError::Config("throughput windows must be finite and ≥ 0".into()));
        }
        if (self.heat_time_bins == 0) != (self.heat_len_bins == 0) {
            return Err(SimError::Config("heatmap bins must both be zero or both positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowThroughput {
    pub window_s: f64,
    pub completed: usize,
}

/// Latency aggregates; averages and percentiles are zero for an empty run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_completed: usize,
    pub ttft_avg: f64,
    pub ttft_p90: f64,
    /// Per-token latency `(completion − arrival) / emitted_tokens`.
    pub ptla_avg: f64,
    pub ptla_p90: f64,
    /// Absent for K above the number of completions.
    pub time_at_k: BTreeMap<usize, f64>,
    pub throughput_at_w: Vec<WindowThroughput>,
}

fn mean_p90(mut xs: Vec<f64>) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    xs.sort_by(f64::total_cmp);
    (xs.iter().sum::<f64>() / xs.len() as f64, nearest_rank(&xs, 0.9))
}

pub fn summarize(events: &[RequestEvent], ks: &[usize], ws: &[f64]) -> Aggregates {
    let (ttft_avg, ttft_p90) = mean_p90(events.iter().map(|e| e.first_token_s - e.arrival_s).collect());
    let (ptla_avg, ptla_p90) =
        mean_p90(events.iter().map(|e| (e.completion_s - e.arrival_s) / f64::from(e.emitted_tokens)).collect());
    let mut done: Vec<f64> = events.iter().map(|e| e.completion_s).collect();
    done.sort_by(f64::total_cmp);
    let time_at_k = ks.iter().filter(|&&k| k >= 1 && k <= done.len()).map(|&k| (k, done[k - 1])).collect();
    let throughput_at_w = ws
        .iter()
        .map(|&w| WindowThroughput { window_s: w, completed: done.partition_point(|&c| c <= w) })
        .collect();
    Aggregates { n_completed: done.len(), ttft_avg, ttft_p90, ptla_avg, ptla_p90, time_at_k, throughput_at_w }
}

/// Event counts over (completion time × emitted length) cells; rows are time bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub time_edges: Vec<f64>,
    pub len_edges: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl Heatmap {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_lo,time_hi,len_lo,len_hi,count\n");
        for (ti, row) in self.counts.iter().enumerate() {
            for (li, c) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    self.time_edges[ti],
                    self.time_edges[ti + 1],
                    self.len_edges[li],
                    self.len_edges[li + 1],
                    c
                ));
            }
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

fn check_edges(edges: &[f64], what: &str) -> Result<(), SimError> {
    if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::Config(format!("{what} bin edges must be ≥ 2 finite, strictly increasing values")));
    }
    Ok(())
}

/// Out-of-range values land in the first or last bin.
fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v).saturating_sub(1).min(edges.len() - 2)
}

pub fn heatmap(events: &[RequestEvent], time_edges: &[f64], len_edges: &[f64]) -> Result<Heatmap, SimError> {
    check_edges(time_edges, "time")?;
    check_edges(len_edges, "length")?;
    let mut counts = vec![vec![0u64; len_edges.len() - 1]; time_edges.len() - 1];
    for e in events {
        counts[bin_of(time_edges, e.completion_s)][bin_of(len_edges, f64::from(e.emitted_tokens))] += 1;
    }
    Ok(Heatmap { time_edges: time_edges.to_vec(), len_edges: len_edges.to_vec(), counts })
}

/// Linear time bins up to the last completion, log-spaced length bins.
pub(super) fn auto_heatmap(events: &[RequestEvent], cfg: &MetricsConfig) -> Result<Option<Heatmap>, SimError> {
    if events.is_empty() || cfg.heat_time_bins == 0 {
        return Ok(None);
    }
    let t_max = events.iter().map(|e| e.completion_s).fold(0.0, f64::max);
    let l_max = events.iter().map(|e| e.emitted_tokens).max().unwrap_or(1).max(1);
    let tb = cfg.heat_time_bins;
    let time_edges: Vec<f64> = (0..=tb).map(|i| t_max * i as f64 / tb as f64).collect();
    let hi = f64::from(l_max + 1).ln();
    let lb = cfg.heat_len_bins;
    let len_edges: Vec<f64> = (0..=lb).map(|i| (hi * i as f64 / lb as f64).exp()).collect();
    heatmap(events, &time_edges, &len_edges).map(Some)
}

/// Pearson correlation of completion time with emitted length.
pub fn completion_length_correlation(events: &[RequestEvent]) -> f64 {
    let n = events.len() as f64;
    if events.len() < 2 {
        return 0.0;
    }
    let mx = events.iter().map(|e| e.completion_s).sum::<f64>() / n;
    let my = events.iter().map(|e| f64::from(e.emitted_tokens)).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for e in events {
        let (dx, dy) = (e.completion_s - mx, f64::from(e.emitted_tokens) - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[derive(Serialize)]
struct EventRow {
    req_id: u64,
    arrival_s: f64,
    admit_s: f64,
    first_token_s: f64,
    completion_s: f64,
    emitted_tokens: u32,
}

pub fn events_to_csv(events: &[RequestEvent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if events.is_empty() {
        w.write_record(EVENTS_CSV_HEADER.split(',')).expect("in-memory write");
    }
    for e in events {
        w.serialize(EventRow {
            req_id: e.req_id,
            arrival_s: e.arrival_s,
            admit_s: e.admit_s,
            first_token_s: e.first_token_s,
            completion_s: e.completion_s,
            emitted_tokens: e.emitted_tokens,
        })
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_events_csv(events: &[RequestEvent], path: &Path) -> Result<(), SimError> {
    std::fs::write(path, events_to_csv(events))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: u64, arrival: f64, first: f64, done: f64, len: u32) -> RequestEvent {
        RequestEvent {
            req_id: id,
            arrival_s: arrival,
            predict_ready_s: None,
            admit_s: arrival,
            first_token_s: first,
            completion_s: done,
            emitted_tokens: len,
        }
    }

    #[test]
    fn single_event_aggregates() {
        let a = summarize(&[ev(0, 0.0, 0.1, 1.0, 10)], &[1, 2], &[0.5, 1.0]);
        assert_eq!((a.ttft_avg, a.ttft_p90), (0.1, 0.1));
        assert_eq!(a.time_at_k.get(&1), Some(&1.0));
        assert_eq!(a.time_at_k.get(&2), None);
        assert_eq!(a.throughput_at_w[0].completed, 0);
        assert_eq!(a.throughput_at_w[1].completed, 1);
    }

    #[test]
    fn time_at_k_is_kth_completion() {
        let evs: Vec<RequestEvent> = (1..=10).rev().map(|c| ev(c, 0.0, 0.0, c as f64, 1)).collect();
        let a = summarize(&evs, &[3], &[]);
        assert_eq!(a.time_at_k[&3], 3.0);
        assert!(a.ttft_p90 >= 0.0);
    }

    #[test]
    fn heatmap_mass_and_clipping() {
        let evs = vec![ev(0, 0.0, 0.0, 0.5, 3), ev(1, 0.0, 0.0, 99.0, 5000), ev(2, 0.0, 0.0, -1.0, 0)];
        let h = heatmap(&evs, &[0.0, 1.0, 2.0], &[1.0, 10.0, 100.0]).unwrap();
        assert_eq!(h.total(), 3);
        assert_eq!(h.counts[0][0], 2);
        assert_eq!(h.counts[1][1], 1);
        let one = heatmap(&evs[..1], &[0.0, 1.0, 2.0], &[1.0, 10.0, 100.0]).unwrap();
        assert_eq!(one.counts.iter().flatten().filter(|&&c| c == 1).count(), 1);
        assert!(heatmap(&evs, &[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(heatmap(&evs, &[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_header() {
        let csv = events_to_csv(&[ev(3, 0.0, 0.1, 0.2, 2)]);
        assert!(csv.starts_with(EVENTS_CSV_HEADER));
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(events_to_csv(&[]).trim(), EVENTS_CSV_HEADER);
    }

    #[test]
    fn correlation_bounds() {
        let evs: Vec<RequestEvent> = (1..20).map(|i| ev(i, 0.0, 0.0, i as f64, i as u32)).collect();
        assert!((completion_length_correlation(&evs) - 1.0).abs() < 1e-12);
    }
}
