//! Deterministic hierarchical random streams.
//!
//! One root seed is split into independent named substreams by hashing a
//! textual path (`rep0/test/task3/noise`) together with the root seed into a
//! ChaCha key. Streams therefore depend only on their name, never on the
//! order in which they are created or consumed, so task runs can be executed
//! in any order (or in parallel) without changing a single draw.
//!
//! Stream naming discipline used by the simulation harness:
//!
//! - task draws, action sets, and reward noise are keyed by
//!   `(replication, phase, task, purpose)` only — every policy sees
//!   bit-identical tasks, action sets, and noise within a scenario;
//! - exploration coin flips are additionally keyed by the policy name, the
//!   one source of randomness that is legitimately per-policy.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Purposes a stream can serve within one task run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    TaskDraw,
    Actions,
    Noise,
    ExplorationChoice,
}

impl StreamPurpose {
    pub fn name(self) -> &'static str {
        match self {
            StreamPurpose::TaskDraw => "task-draw",
            StreamPurpose::Actions => "actions",
            StreamPurpose::Noise => "noise",
            StreamPurpose::ExplorationChoice => "exploration-choice",
        }
    }
}

/// Factory for named substreams of one scenario run.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    root_seed: u64,
    scenario: String,
}

impl StreamFactory {
    pub fn new(root_seed: u64, scenario: impl Into<String>) -> Self {
        Self {
            root_seed,
            scenario: scenario.into(),
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    /// Derives the substream named by `path` segments.
    pub fn stream(&self, path: &[&str]) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.root_seed.to_le_bytes());
        hasher.update(self.scenario.as_bytes());
        for segment in path {
            hasher.update([0x1f]); // segment separator, cannot appear in names
            hasher.update(segment.as_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }

    /// Stream for one purpose of one task. `phase` is `"train"` or `"test"`,
    /// `scope` further qualifies the task (environment index for training).
    pub fn task_stream(
        &self,
        replication: usize,
        phase: &str,
        scope: &str,
        task: usize,
        purpose: StreamPurpose,
    ) -> ChaCha12Rng {
        let rep = format!("rep{replication}");
        let task = format!("task{task}");
        self.stream(&[&rep, phase, scope, &task, purpose.name()])
    }
}
