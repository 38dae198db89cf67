use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Default seed for the number generator. Chosen so that the first faked
/// number drawn is at least 4.
pub const DEFAULT_SEED: u64 = 0x5eed_f0ce;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// Wall-clock limit for one execution of a `while`/`for` loop.
    #[serde(with = "millis")]
    pub loop_budget: Duration,
    /// Deepest user-function call stack; deeper calls are skipped.
    pub recursion_cap: usize,
    /// Limit for the whole exploration of one sample.
    #[serde(with = "millis")]
    pub sample_timeout: Duration,
    pub max_events_per_run: usize,
    pub max_callbacks_per_run: usize,
    pub max_trace_per_run: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            loop_budget: Duration::from_secs(2),
            recursion_cap: 512,
            sample_timeout: Duration::from_secs(300),
            max_events_per_run: 10_000,
            max_callbacks_per_run: 10_000,
            max_trace_per_run: 10_000,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// What `ActiveXObject` does when constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveXMode {
    /// Record the probe and throw, as a browser without the control would.
    #[default]
    Throw,
    /// Record the probe and hand back a faked object.
    Fake,
}

/// Worklist discipline for choosing which predicate flips to schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// A flip is scheduled at most once per exploration, so the number of runs
    /// stays linear in the number of distinct branch directions.
    #[default]
    Linear,
    /// Every run schedules every uncovered flip after its prefix, even if the
    /// same flip is already waiting in the worklist.
    AsWritten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub seed: u64,
    pub budgets: Budgets,
    pub activex: ActiveXMode,
    /// Treat `c ? a : b` as a flippable branch instead of evaluating both arms.
    pub ternary_as_branch: bool,
    pub strategy: Strategy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: DEFAULT_SEED,
            budgets: Budgets::default(),
            activex: ActiveXMode::Throw,
            ternary_as_branch: false,
            strategy: Strategy::Linear,
        }
    }
}
