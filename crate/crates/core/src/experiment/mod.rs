//! Recognition-experiment protocol: study plans, counterbalancing, trial
//! queues and the per-participant session state machine.

mod latin;
mod queue;
mod session;
mod synthetic;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Phase, Posture, Study};
use crate::cue::{AxisConfig, Method};
use crate::pattern::{PatternError, PatternSet, ReferenceFrame, TimingParams};

pub use latin::balanced_latin_square;
pub use queue::{build_trial_queue, build_trial_queue_for, QueueEntry, BREAK_EVERY};
pub use session::{Effect, Event, Feedback, Session, SessionView, StepError};
pub use synthetic::{simulate_session, SyntheticParticipant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("{study} expects a set of {expected} patterns, `{set}` has {got}")]
    SetSize { study: Study, set: String, expected: usize, got: usize },
    #[error("answer mode `corners` needs patterns of equal length")]
    CornerMode,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the participant enters a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerMode {
    /// One key per pattern label.
    Label,
    /// Clicking the grid corners in order.
    Corners,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub phase: Phase,
    pub blocks: u32,
    /// Presentations of each pattern per block.
    pub reps: u32,
    /// Suggested duration for untimed practice.
    pub minutes: Option<u32>,
}

impl PhaseSpec {
    pub fn trials_per_block(&self, set_len: usize) -> usize {
        self.reps as usize * set_len
    }
}

impl Study {
    pub fn default_set(self) -> &'static str {
        match self {
            Study::Prelim => "prelim11",
            Study::Study1 => "tps24",
            Study::Study2Alphabet => "alphabet26",
            Study::Study2Digit => "digit10",
        }
    }

    pub fn set_size(self) -> usize {
        match self {
            Study::Prelim => 11,
            Study::Study1 => 24,
            Study::Study2Alphabet => 26,
            Study::Study2Digit => 10,
        }
    }

    pub fn plan(self) -> Vec<PhaseSpec> {
        let spec = |phase, blocks, reps| PhaseSpec { phase, blocks, reps, minutes: None };
        match self {
            Study::Prelim => vec![
                PhaseSpec { phase: Phase::Learning, blocks: 0, reps: 0, minutes: Some(15) },
                spec(Phase::Training, 1, 3),
                spec(Phase::Testing, 1, 5),
            ],
            Study::Study1 => vec![spec(Phase::Training, 2, 2), spec(Phase::Testing, 2, 2)],
            Study::Study2Alphabet => vec![spec(Phase::Training, 1, 2), spec(Phase::Testing, 1, 4)],
            Study::Study2Digit => vec![spec(Phase::Training, 1, 2), spec(Phase::Testing, 1, 5)],
        }
    }

    pub fn default_answer_mode(self) -> AnswerMode {
        match self {
            Study::Study1 => AnswerMode::Corners,
            _ => AnswerMode::Label,
        }
    }

    pub fn repeat_play_in_training(self) -> bool {
        matches!(self, Study::Study2Alphabet | Study::Study2Digit)
    }

    pub fn feedback_in_testing(self) -> bool {
        matches!(self, Study::Study2Alphabet | Study::Study2Digit)
    }
}

/// One participant under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub study: Study,
    pub participant: String,
    /// Position of this condition in the participant's counterbalanced order.
    #[serde(default)]
    pub condition_index: u32,
    /// Built-in set name or path; defaults to the study's set.
    #[serde(default)]
    pub pattern_set: Option<String>,
    pub method: Method,
    #[serde(default)]
    pub posture: Posture,
    #[serde(default)]
    pub rf: ReferenceFrame,
    #[serde(default)]
    pub timing: TimingParams,
    #[serde(default)]
    pub axis: AxisConfig,
    #[serde(default)]
    pub answer_mode: Option<AnswerMode>,
    /// Overrides the study's testing-phase feedback default.
    #[serde(default)]
    pub feedback_in_testing: Option<bool>,
    /// Mixed into every derived shuffle seed.
    #[serde(default)]
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(study: Study, participant: &str, method: Method) -> Self {
        SessionConfig {
            study,
            participant: participant.to_string(),
            condition_index: 0,
            pattern_set: None,
            method,
            posture: Posture::Forward,
            rf: ReferenceFrame::Rf1,
            timing: TimingParams::default(),
            axis: AxisConfig::default(),
            answer_mode: None,
            feedback_in_testing: None,
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// TOML unless the file ends in `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn set_name(&self) -> &str {
        self.pattern_set.as_deref().unwrap_or(self.study.default_set())
    }

    pub fn answer_mode(&self) -> AnswerMode {
        self.answer_mode.unwrap_or(self.study.default_answer_mode())
    }

    pub fn feedback(&self, phase: Phase) -> bool {
        match phase {
            Phase::Learning | Phase::Training => true,
            Phase::Testing => self.feedback_in_testing.unwrap_or(self.study.feedback_in_testing()),
        }
    }

    pub fn plan(&self) -> Vec<PhaseSpec> {
        self.study.plan()
    }

    /// Resolve the pattern set and check it against the study.
    pub fn resolve(&self) -> Result<PatternSet, ConfigError> {
        self.timing.validate()?;
        let set = PatternSet::resolve(self.set_name())?;
        if set.len() != self.study.set_size() {
            return Err(ConfigError::SetSize {
                study: self.study,
                set: set.name().to_string(),
                expected: self.study.set_size(),
                got: set.len(),
            });
        }
        if self.answer_mode() == AnswerMode::Corners && set.iter().any(|p| p.len() != set.patterns()[0].len()) {
            return Err(ConfigError::CornerMode);
        }
        Ok(set)
    }

    /// Shuffle seed for one block of one phase of this participant and
    /// condition.
    pub fn block_seed(&self, phase: Phase, block: u32) -> u64 {
        let mut h = Fnv1a::new();
        h.write(self.participant.as_bytes());
        h.write(&[0xff]);
        h.write(&self.condition_index.to_le_bytes());
        h.write(phase.to_string().as_bytes());
        h.write(&block.to_le_bytes());
        h.write(&self.seed.to_le_bytes());
        h.finish()
    }
}

/// 64-bit FNV-1a; stable across platforms and toolchains, unlike std's
/// `DefaultHasher`.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
