//! Tail-aware scheduling of LLM inference requests.
//!
//! Output lengths are modeled per prompt as log-t distributions censored at
//! `max_tokens`. Requests are ranked by `E[X̃] + β·CVaR_α(X̃)` in a min-heap
//! waiting queue, and policies are compared inside a deterministic
//! continuous-batching simulator.

pub mod dist;
pub mod rng;
pub mod fit;
pub mod workload;
pub mod predictor;
pub mod sched;
pub mod sim;
