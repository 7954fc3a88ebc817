//! Indexed binary min-heap of waiting requests.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{compute_score, SchedError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub req_id: u64,
    pub expectation: Option<f64>,
    pub cvar: Option<f64>,
    pub key: f64,
    pub predicted: bool,
}

impl QueueEntry {
    fn before(&self, other: &Self) -> bool {
        match self.key.total_cmp(&other.key) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.req_id < other.req_id,
        }
    }
}

/// Min-heap ordered by `(key, req_id)` with an id → slot index.
#[derive(Debug, Clone)]
pub struct WaitingQueue {
    heap: Vec<QueueEntry>,
    index: HashMap<u64, usize>,
    beta_at_build: f64,
    rebuild_drift: f64,
}

impl WaitingQueue {
    pub fn new(rebuild_drift: f64) -> Result<Self, SchedError> {
        if !(rebuild_drift.is_finite() && rebuild_drift > 0.0) {
            return Err(SchedError::Config("rebuild_drift must be > 0".into()));
        }
        Ok(Self { heap: Vec::new(), index: HashMap::new(), beta_at_build: 0.0, rebuild_drift })
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn contains(&self, req_id: u64) -> bool {
        self.index.contains_key(&req_id)
    }

    pub fn get(&self, req_id: u64) -> Option<&QueueEntry> {
        self.index.get(&req_id).map(|&i| &self.heap[i])
    }

    pub fn peek(&self) -> Option<&QueueEntry> {
        self.heap.first()
    }

    pub fn beta_at_build(&self) -> f64 {
        self.beta_at_build
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.heap
    }

    /// Unpredicted entry keyed by `max_tokens`.
    pub fn push(&mut self, req_id: u64, max_tokens: u32) -> Result<(), SchedError> {
        self.push_keyed(req_id, f64::from(max_tokens))
    }

    /// Unpredicted entry under an arbitrary static key, e.g. arrival time for FCFS.
    pub fn push_keyed(&mut self, req_id: u64, key: f64) -> Result<(), SchedError> {
        if self.index.contains_key(&req_id) {
            return Err(SchedError::Usage(format!("request {req_id} already queued")));
        }
        if key.is_nan() {
            return Err(SchedError::Usage("queue key is NaN".into()));
        }
        let slot = self.heap.len();
        self.heap.push(QueueEntry { req_id, expectation: None, cvar: None, key, predicted: false });
        self.index.insert(req_id, slot);
        self.sift_up(slot);
        Ok(())
    }

    pub fn update(&mut self, req_id: u64, expectation: f64, cvar: f64, beta_now: f64) -> Result<(), SchedError> {
        let &slot = self.index.get(&req_id).ok_or_else(|| SchedError::Usage(format!("request {req_id} not queued")))?;
        if self.heap[slot].predicted {
            return Err(SchedError::Usage(format!("request {req_id} already predicted")));
        }
        let key = compute_score(expectation, cvar, beta_now)?;
        let e = &mut self.heap[slot];
        e.expectation = Some(expectation);
        e.cvar = Some(cvar);
        e.key = key;
        e.predicted = true;
        self.restore(slot);
        Ok(())
    }

    pub fn pop_min(&mut self) -> Option<QueueEntry> {
        if self.heap.is_empty() {
            return None;
        }
        let last = self.heap.len() - 1;
        self.swap(0, last);
        let top = self.heap.pop().expect("non-empty");
        self.index.remove(&top.req_id);
        if !self.heap.is_empty() {
            self.sift_down(0);
        }
        Some(top)
    }

    /// Re-keys every predicted entry with `beta_now` when β has drifted by
    /// more than the threshold since the last build.
    pub fn rebuild_if_drifted(&mut self, beta_now: f64) -> bool {
        if (beta_now - self.beta_at_build).abs() <= self.rebuild_drift {
            return false;
        }
        for e in &mut self.heap {
            if let (Some(ex), Some(cv)) = (e.expectation, e.cvar) {
                e.key = ex + beta_now * cv;
            }
        }
        for i in (0..self.heap.len() / 2).rev() {
            self.sift_down(i);
        }
        for (i, e) in self.heap.iter().enumerate() {
            self.index.insert(e.req_id, i);
        }
        self.beta_at_build = beta_now;
        true
    }

    /// Full scan of the heap and index invariants.
    pub fn check_invariants(&self) -> bool {
        let heap_ok = (1..self.heap.len()).all(|i| !self.heap[i].before(&self.heap[(i - 1) / 2]));
        let index_ok = self.index.len() == self.heap.len()
            && self.heap.iter().enumerate().all(|(i, e)| self.index.get(&e.req_id) == Some(&i));
        heap_ok && index_ok
    }

    fn restore(&mut self, slot: usize) {
        let moved = self.sift_up(slot);
        if moved == slot {
            self.sift_down(slot);
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.index.insert(self.heap[a].req_id, a);
        self.index.insert(self.heap[b].req_id, b);
    }

    fn sift_up(&mut self, mut i: usize) -> usize {
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.heap[i].before(&self.heap[parent]) {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
        i
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < n && self.heap[l].before(&self.heap[best]) {
                best = l;
            }
            if r < n && self.heap[r].before(&self.heap[best]) {
                best = r;
            }
            if best == i {
                return;
            }
            self.swap(i, best);
            i = best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> WaitingQueue {
        WaitingQueue::new(0.1).unwrap()
    }

    #[test]
    fn push_pop_order() {
        let mut q = q();
        for (id, k) in [(0, 5), (1, 3), (2, 9)] {
            q.push(id, k).unwrap();
        }
        assert_eq!(q.pop_min().unwrap().key, 3.0);
        assert_eq!(q.pop_min().unwrap().key, 5.0);
        assert_eq!(q.pop_min().unwrap().key, 9.0);
        assert!(q.pop_min().is_none());
    }

    #[test]
    fn unpredicted_sinks_below_predicted() {
        let mut q = q();
        q.push(1, 2048).unwrap();
        q.update(1, 100.0, 166.0, 0.3).unwrap();
        assert_eq!(q.peek().unwrap().key, 149.8);
        q.push(2, 2048).unwrap();
        assert_eq!(q.peek().unwrap().req_id, 1);
    }

    #[test]
    fn equal_keys_break_by_id() {
        let mut q = q();
        q.push(7, 512).unwrap();
        q.push(3, 512).unwrap();
        assert_eq!(q.pop_min().unwrap().req_id, 3);
    }

    #[test]
    fn update_moves_to_top() {
        let mut q = q();
        for id in 0..10 {
            q.push(id, 500 + id as u32).unwrap();
        }
        q.update(9, 120.0, 300.0, 0.0).unwrap();
        let top = q.peek().unwrap();
        assert_eq!((top.req_id, top.key), (9, 120.0));
        assert!(q.check_invariants());
    }

    #[test]
    fn usage_errors() {
        let mut q = q();
        q.push(1, 10).unwrap();
        assert!(matches!(q.push(1, 10), Err(SchedError::Usage(_))));
        assert!(matches!(q.update(2, 1.0, 2.0, 0.0), Err(SchedError::Usage(_))));
        q.update(1, 1.0, 2.0, 0.0).unwrap();
        assert!(matches!(q.update(1, 1.0, 2.0, 0.0), Err(SchedError::Usage(_))));
        assert!(WaitingQueue::new(0.0).is_err());
    }

    #[test]
    fn rebuild_threshold() {
        let mut q = q();
        for id in 0..5 {
            q.push(id, 1000).unwrap();
            q.update(id, 100.0 + id as f64, 900.0 - 100.0 * id as f64, 0.0).unwrap();
        }
        q.push(99, 1000).unwrap();
        assert!(!q.rebuild_if_drifted(0.05));
        assert!(q.rebuild_if_drifted(0.2));
        assert_eq!(q.beta_at_build(), 0.2);
        let mut ids: Vec<u64> = q.entries().iter().map(|e| e.req_id).collect();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 99]);
        for e in q.entries() {
            match (e.expectation, e.cvar) {
                (Some(ex), Some(cv)) => assert_eq!(e.key, ex + 0.2 * cv),
                _ => assert_eq!(e.key, 1000.0),
            }
        }
        assert!(q.check_invariants());
        assert_eq!(q.pop_min().unwrap().req_id, 4);
    }
}
