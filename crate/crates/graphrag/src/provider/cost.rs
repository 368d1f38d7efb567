//! Token and wall-time cost accounting for provider calls.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    /// Componentwise sum; wall time adds up.
    Sequential,
    /// Componentwise sum for tokens and calls; wall time is the max.
    Parallel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub llm_calls: u64,
    pub wall_time: f64,
}

impl CostReport {
    pub fn merge(self, other: CostReport, mode: MergeMode) -> CostReport {
        CostReport {
            prompt_tokens: self.prompt_tokens + other.prompt_tokens,
            completion_tokens: self.completion_tokens + other.completion_tokens,
            llm_calls: self.llm_calls + other.llm_calls,
            wall_time: match mode {
                MergeMode::Sequential => self.wall_time + other.wall_time,
                MergeMode::Parallel => self.wall_time.max(other.wall_time),
            },
        }
    }

    /// Token/call delta since an earlier snapshot of the same accumulator.
    pub fn delta_since(self, earlier: CostReport) -> CostReport {
        CostReport {
            prompt_tokens: self.prompt_tokens - earlier.prompt_tokens,
            completion_tokens: self.completion_tokens - earlier.completion_tokens,
            llm_calls: self.llm_calls - earlier.llm_calls,
            wall_time: (self.wall_time - earlier.wall_time).max(0.0),
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Race-free accumulator shared across concurrent provider calls.
#[derive(Debug, Default)]
pub struct CostTracker {
    inner: Mutex<CostReport>,
}

impl CostTracker {
    pub fn record(&self, prompt_tokens: u64, completion_tokens: u64, wall_time: f64) {
        let mut report = self.inner.lock().expect("cost tracker poisoned");
        report.prompt_tokens += prompt_tokens;
        report.completion_tokens += completion_tokens;
        report.llm_calls += 1;
        report.wall_time += wall_time;
    }

    pub fn snapshot(&self) -> CostReport {
        *self.inner.lock().expect("cost tracker poisoned")
    }
}

/// Whitespace token count, the scripted providers' tokenizer. Only
/// additivity matters for the cost invariants, not parity with any real
/// tokenizer.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_zero_is_identity() {
        let r = CostReport {
            prompt_tokens: 100,
            completion_tokens: 20,
            llm_calls: 3,
            wall_time: 1.5,
        };
        assert_eq!(CostReport::default().merge(r, MergeMode::Sequential), r);
    }

    #[test]
    fn parallel_merge_takes_max_wall_time() {
        let a = CostReport {
            wall_time: 3.0,
            ..Default::default()
        };
        let b = CostReport {
            wall_time: 5.0,
            ..Default::default()
        };
        assert_eq!(a.merge(b, MergeMode::Parallel).wall_time, 5.0);
        assert_eq!(a.merge(b, MergeMode::Sequential).wall_time, 8.0);
    }

    #[test]
    fn sequential_merge_sums_tokens() {
        let a = CostReport {
            prompt_tokens: 100,
            ..Default::default()
        };
        let b = CostReport {
            prompt_tokens: 250,
            ..Default::default()
        };
        assert_eq!(a.merge(b, MergeMode::Sequential).prompt_tokens, 350);
    }

    #[test]
    fn whitespace_token_count() {
        assert_eq!(whitespace_tokens("one two  three\nfour"), 4);
        assert_eq!(whitespace_tokens(""), 0);
    }
}
