use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_trial_queue, AnswerMode, ConfigError, PhaseSpec, QueueEntry, SessionConfig};
use crate::analysis::{Phase, TrialRecord};
use crate::cue::{assign_cues, CueMap};
use crate::pattern::{Corner, PatternSet, StrokePattern};

/// Inputs to [`Session::step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// Play the current trial's pattern.
    Play,
    /// Play an arbitrary pattern for familiarization (training only).
    ManualPlay { label: String },
    /// Append to the answer buffer: pattern labels, or corner names in
    /// corner mode.
    Answer { labels: Vec<String> },
    Backspace,
    Confirm,
    /// Leave a break, or move on from a finished (or practice) phase.
    Advance,
    /// Actual end of the most recent playback, when known.
    PlaybackFinished { at_ms: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("session is finished")]
    Finished,
    #[error("on a break; advance to continue")]
    OnBreak,
    #[error("phase complete; advance to continue")]
    PhaseComplete,
    #[error("nothing to advance past")]
    NotAtBoundary,
    #[error("pattern already played in this trial")]
    AlreadyPlayed,
    #[error("pattern not played yet")]
    NotPlayed,
    #[error("playback in progress")]
    Busy,
    #[error("playback has not finished")]
    PlaybackInProgress,
    #[error("no playback to finish")]
    NoPlayback,
    #[error("answer is empty")]
    EmptyAnswer,
    #[error("answer is incomplete")]
    IncompleteAnswer,
    #[error("answer is full")]
    AnswerFull,
    #[error("invalid answer `{0}`")]
    InvalidAnswer(String),
    #[error("unknown pattern `{0}`")]
    UnknownLabel(String),
    #[error("{event} is not allowed in the {phase} phase")]
    NotAllowed { event: &'static str, phase: Phase },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub stimulus: String,
    pub response: String,
    pub correct: bool,
}

/// Outputs of a successful step, in the order they occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    Play { label: String, manual: bool, duration_ms: u64 },
    Feedback(Feedback),
    Record(TrialRecord),
    Break,
    PhaseComplete { phase: Phase },
    PhaseStarted { phase: Phase },
    Finished,
}

#[derive(Debug, Clone, PartialEq)]
struct Trial {
    block: u32,
    trial: u32,
    stimulus: String,
    plays: u32,
    /// End of the latest playback of the stimulus; the RT origin.
    end_ms: Option<f64>,
    buffer: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct Playback {
    start_ms: f64,
    end_ms: f64,
    manual: bool,
}

/// State of one participant's run through one condition. Time is supplied
/// by the caller as milliseconds on any monotonic clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    cfg: SessionConfig,
    set: PatternSet,
    cues: CueMap,
    plan: Vec<PhaseSpec>,
    epoch_ms: u64,
    phase_idx: usize,
    queue: Vec<QueueEntry>,
    /// Index of the current entry in `queue`.
    pos: usize,
    trial: Option<Trial>,
    playback: Option<Playback>,
    on_break: bool,
    phase_done: bool,
    finished: bool,
    records: Vec<TrialRecord>,
    feedback: Option<Feedback>,
}

/// What a participant-facing client may see. The stimulus of an
/// unanswered trial is never included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub study: crate::analysis::Study,
    pub participant: String,
    pub condition_index: u32,
    pub method: crate::cue::Method,
    pub posture: crate::analysis::Posture,
    pub rf: crate::pattern::ReferenceFrame,
    pub phase: Phase,
    pub answer_mode: AnswerMode,
    pub labels: Vec<String>,
    pub block: u32,
    /// 1-based position within the block.
    pub trial: u32,
    pub trials_in_phase: usize,
    pub completed_in_phase: usize,
    pub played: bool,
    pub playing: bool,
    pub can_play: bool,
    pub can_manual_play: bool,
    pub answer: Vec<String>,
    /// Target pattern during untimed practice.
    pub prompt: Option<String>,
    pub feedback: Option<Feedback>,
    pub on_break: bool,
    pub phase_complete: bool,
    pub finished: bool,
    pub phase_accuracy: Option<f64>,
}

fn duration_ms(p: &StrokePattern, cfg: &SessionConfig) -> u64 {
    let n = p.len() as u64;
    (n - 1) * cfg.timing.stride_ms() + cfg.timing.burst_ms()
}

impl Session {
    /// `epoch_ms` is wall-clock milliseconds since the Unix epoch at time
    /// zero of the caller's clock; it only feeds record timestamps.
    pub fn new(cfg: SessionConfig, epoch_ms: u64) -> Result<Self, ConfigError> {
        let set = cfg.resolve()?;
        let cues = assign_cues(cfg.method, cfg.axis);
        let plan = cfg.plan();
        let mut s = Session {
            cfg,
            set,
            cues,
            plan,
            epoch_ms,
            phase_idx: 0,
            queue: Vec::new(),
            pos: 0,
            trial: None,
            playback: None,
            on_break: false,
            phase_done: false,
            finished: false,
            records: Vec::new(),
            feedback: None,
        };
        s.enter_phase(0);
        Ok(s)
    }

    fn enter_phase(&mut self, idx: usize) {
        self.phase_idx = idx;
        let phase = self.plan[idx].phase;
        self.queue = if phase == Phase::Learning {
            let mut labels: Vec<&str> = self.set.labels();
            labels.shuffle(&mut ChaCha8Rng::seed_from_u64(self.cfg.block_seed(phase, 0)));
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| QueueEntry::Trial { block: 0, trial: i as u32 + 1, stimulus: l.to_string() })
                .collect()
        } else {
            build_trial_queue(&self.cfg, &self.set, phase)
        };
        self.pos = 0;
        self.phase_done = false;
        self.on_break = false;
        self.feedback = None;
        self.load_trial();
    }

    fn load_trial(&mut self) {
        self.trial = match self.queue.get(self.pos) {
            Some(QueueEntry::Trial { block, trial, stimulus }) => Some(Trial {
                block: *block,
                trial: *trial,
                stimulus: stimulus.clone(),
                plays: 0,
                end_ms: None,
                buffer: Vec::new(),
            }),
            _ => None,
        };
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn pattern_set(&self) -> &PatternSet {
        &self.set
    }

    pub fn cues(&self) -> &CueMap {
        &self.cues
    }

    pub fn phase(&self) -> Phase {
        self.plan[self.phase_idx].phase
    }

    /// Stimulus of the current trial; for operators and simulation only.
    pub fn current_stimulus(&self) -> Option<&str> {
        self.trial.as_ref().map(|t| t.stimulus.as_str())
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Fraction correct among confirmed trials of `phase`.
    pub fn accuracy(&self, phase: Phase) -> Option<f64> {
        let rs: Vec<&TrialRecord> = self.records.iter().filter(|r| r.phase == phase).collect();
        if rs.is_empty() {
            return None;
        }
        Some(rs.iter().filter(|r| r.correct).count() as f64 / rs.len() as f64)
    }

    fn trials_in_phase(&self) -> usize {
        self.queue.iter().filter(|e| matches!(e, QueueEntry::Trial { .. })).count()
    }

    pub fn view(&self, now_ms: f64) -> SessionView {
        let phase = self.phase();
        let trial = self.trial.as_ref();
        let playing = self.playback.as_ref().is_some_and(|p| now_ms < p.end_ms);
        let idle = !self.finished && !self.on_break && !self.phase_done && !playing;
        let played = trial.is_some_and(|t| t.plays > 0);
        SessionView {
            study: self.cfg.study,
            participant: self.cfg.participant.clone(),
            condition_index: self.cfg.condition_index,
            method: self.cfg.method,
            posture: self.cfg.posture,
            rf: self.cfg.rf,
            phase,
            answer_mode: self.cfg.answer_mode(),
            labels: self.set.labels().into_iter().map(String::from).collect(),
            block: trial.map_or(0, |t| t.block),
            trial: trial.map_or(0, |t| t.trial),
            trials_in_phase: self.trials_in_phase(),
            completed_in_phase: self.records.iter().filter(|r| r.phase == phase).count(),
            played,
            playing,
            can_play: idle && trial.is_some() && (!played || self.replay_allowed()),
            can_manual_play: idle && phase == Phase::Training && !played,
            answer: trial.map_or_else(Vec::new, |t| t.buffer.clone()),
            prompt: if phase == Phase::Learning { trial.map(|t| t.stimulus.clone()) } else { None },
            feedback: self.feedback.clone(),
            on_break: self.on_break,
            phase_complete: self.phase_done,
            finished: self.finished,
            phase_accuracy: self.accuracy(phase),
        }
    }

    fn replay_allowed(&self) -> bool {
        match self.phase() {
            Phase::Learning => true,
            Phase::Training => self.cfg.study.repeat_play_in_training(),
            Phase::Testing => false,
        }
    }

    /// Apply one event at time `now_ms`. On error the session is unchanged.
    pub fn step(&mut self, event: Event, now_ms: f64) -> Result<Vec<Effect>, StepError> {
        if self.finished {
            return Err(StepError::Finished);
        }
        if let Event::Advance = event {
            return self.advance();
        }
        if let Event::PlaybackFinished { at_ms } = event {
            return self.playback_finished(at_ms);
        }
        if self.on_break {
            return Err(StepError::OnBreak);
        }
        if self.phase_done {
            return Err(StepError::PhaseComplete);
        }
        match event {
            Event::Play => self.play(now_ms),
            Event::ManualPlay { label } => self.manual_play(&label, now_ms),
            Event::Answer { labels } => self.answer(labels),
            Event::Backspace => {
                let t = self.trial.as_mut().ok_or(StepError::NotPlayed)?;
                t.buffer.pop().ok_or(StepError::EmptyAnswer)?;
                Ok(Vec::new())
            }
            Event::Confirm => self.confirm(now_ms),
            Event::Advance | Event::PlaybackFinished { .. } => unreachable!(),
        }
    }

    fn busy(&self, now_ms: f64) -> bool {
        self.playback.as_ref().is_some_and(|p| now_ms < p.end_ms)
    }

    fn play(&mut self, now_ms: f64) -> Result<Vec<Effect>, StepError> {
        let replay = self.replay_allowed();
        let busy = self.busy(now_ms);
        let t = self.trial.as_ref().ok_or(StepError::NotPlayed)?;
        if t.plays > 0 && !replay {
            return Err(StepError::AlreadyPlayed);
        }
        if busy {
            return Err(StepError::Busy);
        }
        let p = self.set.get(&t.stimulus).expect("queued stimuli come from the set");
        let dur = duration_ms(p, &self.cfg);
        let label = t.stimulus.clone();
        let end = now_ms + dur as f64;
        let t = self.trial.as_mut().unwrap();
        t.plays += 1;
        t.end_ms = Some(end);
        self.playback = Some(Playback { start_ms: now_ms, end_ms: end, manual: false });
        Ok(vec![Effect::Play { label, manual: false, duration_ms: dur }])
    }

    fn manual_play(&mut self, label: &str, now_ms: f64) -> Result<Vec<Effect>, StepError> {
        let phase = self.phase();
        if phase != Phase::Training {
            return Err(StepError::NotAllowed { event: "manual play", phase });
        }
        let t = self.trial.as_ref().ok_or(StepError::NotPlayed)?;
        if t.plays > 0 {
            return Err(StepError::AlreadyPlayed);
        }
        let p = self.set.get(label).ok_or_else(|| StepError::UnknownLabel(label.to_string()))?;
        if self.busy(now_ms) {
            return Err(StepError::Busy);
        }
        let dur = duration_ms(p, &self.cfg);
        self.playback = Some(Playback { start_ms: now_ms, end_ms: now_ms + dur as f64, manual: true });
        Ok(vec![Effect::Play { label: label.to_string(), manual: true, duration_ms: dur }])
    }

    fn playback_finished(&mut self, at_ms: f64) -> Result<Vec<Effect>, StepError> {
        let p = self.playback.as_ref().ok_or(StepError::NoPlayback)?;
        if !(at_ms >= p.start_ms && at_ms.is_finite()) {
            return Err(StepError::NoPlayback);
        }
        let manual = p.manual;
        self.playback.as_mut().unwrap().end_ms = at_ms;
        if !manual {
            if let Some(t) = self.trial.as_mut() {
                t.end_ms = Some(at_ms);
            }
        }
        Ok(Vec::new())
    }

    fn answer(&mut self, tokens: Vec<String>) -> Result<Vec<Effect>, StepError> {
        let mode = self.cfg.answer_mode();
        let t = self.trial.as_ref().ok_or(StepError::NotPlayed)?;
        if t.plays == 0 {
            return Err(StepError::NotPlayed);
        }
        if tokens.is_empty() {
            return Err(StepError::EmptyAnswer);
        }
        let mut buffer = t.buffer.clone();
        match mode {
            AnswerMode::Label => {
                for tok in tokens {
                    if self.set.get(&tok).is_none() {
                        return Err(StepError::InvalidAnswer(tok));
                    }
                    buffer = vec![tok];
                }
            }
            AnswerMode::Corners => {
                let cap = self.set.patterns()[0].len();
                for tok in tokens {
                    let c: Corner = tok.parse().map_err(|_| StepError::InvalidAnswer(tok.clone()))?;
                    if buffer.len() == cap {
                        return Err(StepError::AnswerFull);
                    }
                    buffer.push(c.to_string());
                }
            }
        }
        self.trial.as_mut().unwrap().buffer = buffer;
        Ok(Vec::new())
    }

    fn response_label(&self, buffer: &[String]) -> Result<String, StepError> {
        match self.cfg.answer_mode() {
            AnswerMode::Label => Ok(buffer.last().expect("non-empty").clone()),
            AnswerMode::Corners => {
                if buffer.len() < self.set.patterns()[0].len() {
                    return Err(StepError::IncompleteAnswer);
                }
                let corners: Vec<Corner> = buffer.iter().map(|c| c.parse().expect("validated on entry")).collect();
                self.set
                    .find_by_corners(&corners)
                    .map(|p| p.label().to_string())
                    .ok_or_else(|| StepError::InvalidAnswer(buffer.join(" ")))
            }
        }
    }

    fn confirm(&mut self, now_ms: f64) -> Result<Vec<Effect>, StepError> {
        let t = self.trial.as_ref().ok_or(StepError::NotPlayed)?;
        let end = t.end_ms.ok_or(StepError::NotPlayed)?;
        if now_ms < end {
            return Err(StepError::PlaybackInProgress);
        }
        if t.buffer.is_empty() {
            return Err(StepError::EmptyAnswer);
        }
        let response = self.response_label(&t.buffer)?;
        let phase = self.phase();
        let correct = response == t.stimulus;
        let fb = Feedback { stimulus: t.stimulus.clone(), response: response.clone(), correct };

        let mut effects = Vec::new();
        if phase != Phase::Learning {
            let rec = TrialRecord {
                participant: self.cfg.participant.clone(),
                study: self.cfg.study,
                pattern_set: self.set.name().to_string(),
                method: self.cfg.method,
                posture: self.cfg.posture,
                rf: self.cfg.rf,
                phase,
                block: t.block,
                trial: t.trial,
                stimulus: t.stimulus.clone(),
                response,
                correct,
                rt_s: (now_ms - end) / 1000.0,
                timestamp_ms: self.epoch_ms + now_ms.max(0.0) as u64,
            };
            self.records.push(rec.clone());
            effects.push(Effect::Record(rec));
        }
        if self.cfg.feedback(phase) {
            effects.push(Effect::Feedback(fb.clone()));
            self.feedback = Some(fb);
        } else {
            self.feedback = None;
        }
        self.playback = None;

        if phase == Phase::Learning {
            self.pos = (self.pos + 1) % self.queue.len();
            self.load_trial();
            return Ok(effects);
        }
        self.pos += 1;
        match self.queue.get(self.pos) {
            None => {
                self.trial = None;
                self.phase_done = true;
                effects.push(Effect::PhaseComplete { phase });
            }
            Some(QueueEntry::Break) => {
                self.trial = None;
                self.on_break = true;
                effects.push(Effect::Break);
            }
            Some(QueueEntry::Trial { .. }) => self.load_trial(),
        }
        Ok(effects)
    }

    fn advance(&mut self) -> Result<Vec<Effect>, StepError> {
        if self.on_break {
            self.on_break = false;
            self.feedback = None;
            self.pos += 1;
            self.load_trial();
            return Ok(Vec::new());
        }
        if !(self.phase_done || self.phase() == Phase::Learning) {
            return Err(StepError::NotAtBoundary);
        }
        self.playback = None;
        if self.phase_idx + 1 == self.plan.len() {
            self.finished = true;
            self.phase_done = false;
            self.trial = None;
            return Ok(vec![Effect::Finished]);
        }
        self.enter_phase(self.phase_idx + 1);
        Ok(vec![Effect::PhaseStarted { phase: self.phase() }])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Study;
    use crate::cue::Method;
    use rand::Rng;

    fn answer(l: &str) -> Event {
        Event::Answer { labels: vec![l.to_string()] }
    }

    fn current(s: &Session) -> String {
        s.trial.as_ref().unwrap().stimulus.clone()
    }

    fn to_phase(s: &mut Session, phase: Phase) {
        while s.phase() != phase {
            if s.phase() == Phase::Learning {
                s.step(Event::Advance, 0.0).unwrap();
                continue;
            }
            let mut t = 0.0;
            while !s.phase_done {
                if s.on_break {
                    s.step(Event::Advance, t).unwrap();
                    continue;
                }
                let st = current(s);
                s.step(Event::Play, t).unwrap();
                t += 5000.0;
                s.step(answer(&st), t).unwrap();
                s.step(Event::Confirm, t).unwrap();
            }
            s.step(Event::Advance, t).unwrap();
        }
    }

    #[test]
    fn happy_path_records_rt() {
        let mut s = Session::new(SessionConfig::new(Study::Study2Alphabet, "P01", Method::FourHetero), 1_000).unwrap();
        assert_eq!(s.phase(), Phase::Training);
        let v = s.view(0.0);
        assert_eq!((v.trial, v.played, v.trials_in_phase), (1, false, 52));
        let stim = current(&s);
        let effects = s.step(Event::Play, 100.0).unwrap();
        let Effect::Play { duration_ms, .. } = effects[0] else { panic!() };
        let end = 100.0 + duration_ms as f64;
        assert_eq!(s.step(Event::Confirm, end - 1.0), Err(StepError::PlaybackInProgress));
        s.step(answer("u"), 200.0).unwrap();
        let out = s.step(Event::Confirm, end + 1500.0).unwrap();
        let Effect::Record(rec) = &out[0] else { panic!("{out:?}") };
        assert_eq!(rec.response, "u");
        assert_eq!(rec.stimulus, stim);
        assert!((rec.rt_s - 1.5).abs() < 1e-12);
        assert_eq!(rec.timestamp_ms, 1_000 + (end + 1500.0) as u64);
        assert!(matches!(out[1], Effect::Feedback(_)));
        assert_eq!(s.view(end + 1500.0).trial, 2);
    }

    #[test]
    fn single_play_in_testing() {
        let mut s = Session::new(SessionConfig::new(Study::Prelim, "P01", Method::Baseline), 0).unwrap();
        to_phase(&mut s, Phase::Testing);
        s.step(Event::Play, 0.0).unwrap();
        let before = s.clone();
        assert_eq!(s.step(Event::Play, 10_000.0), Err(StepError::AlreadyPlayed));
        assert_eq!(s, before);
        assert!(matches!(s.step(Event::ManualPlay { label: "u".into() }, 10_000.0), Err(StepError::NotAllowed { .. })));
    }

    #[test]
    fn study2_training_replays() {
        let mut s = Session::new(SessionConfig::new(Study::Study2Digit, "P01", Method::TwoHetero), 0).unwrap();
        s.step(Event::Play, 0.0).unwrap();
        assert_eq!(s.step(Event::Play, 10.0), Err(StepError::Busy));
        s.step(Event::Play, 5_000.0).unwrap();
        let stim = current(&s);
        s.step(answer(&stim), 9_000.0).unwrap();
        let out = s.step(Event::Confirm, 12_000.0).unwrap();
        let Effect::Record(rec) = &out[0] else { panic!() };
        let dur = duration_ms(s.set.get(&stim).unwrap(), &s.cfg) as f64;
        assert!((rec.rt_s - (12_000.0 - 5_000.0 - dur) / 1000.0).abs() < 1e-12);

        let mut p = Session::new(SessionConfig::new(Study::Prelim, "P01", Method::Baseline), 0).unwrap();
        to_phase(&mut p, Phase::Training);
        p.step(Event::Play, 0.0).unwrap();
        assert_eq!(p.step(Event::Play, 10_000.0), Err(StepError::AlreadyPlayed));
    }

    #[test]
    fn manual_play_rules() {
        let mut s = Session::new(SessionConfig::new(Study::Prelim, "P01", Method::Baseline), 0).unwrap();
        assert!(matches!(s.step(Event::ManualPlay { label: "u".into() }, 0.0), Err(StepError::NotAllowed { .. })));
        to_phase(&mut s, Phase::Training);
        assert!(matches!(s.step(Event::ManualPlay { label: "q".into() }, 0.0), Err(StepError::UnknownLabel(_))));
        let out = s.step(Event::ManualPlay { label: "u".into() }, 0.0).unwrap();
        assert_eq!(out, vec![Effect::Play { label: "u".into(), manual: true, duration_ms: 2000 }]);
        assert_eq!(s.step(Event::Play, 1000.0), Err(StepError::Busy));
        // the demo does not arm the trial
        assert_eq!(s.step(Event::Confirm, 3000.0), Err(StepError::NotPlayed));
        s.step(Event::Play, 3000.0).unwrap();
        assert_eq!(s.step(Event::ManualPlay { label: "u".into() }, 9000.0), Err(StepError::AlreadyPlayed));
    }

    #[test]
    fn answer_buffer_editing() {
        let mut s = Session::new(SessionConfig::new(Study::Study2Alphabet, "P01", Method::Baseline), 0).unwrap();
        assert_eq!(s.step(answer("a"), 0.0), Err(StepError::NotPlayed));
        s.step(Event::Play, 0.0).unwrap();
        assert_eq!(s.step(Event::Backspace, 0.0), Err(StepError::EmptyAnswer));
        assert_eq!(s.step(answer("A"), 0.0), Err(StepError::InvalidAnswer("A".into())));
        s.step(answer("a"), 0.0).unwrap();
        s.step(answer("b"), 0.0).unwrap();
        assert_eq!(s.view(0.0).answer, vec!["b"]);
        s.step(Event::Backspace, 0.0).unwrap();
        assert_eq!(s.step(Event::Confirm, 1e6), Err(StepError::EmptyAnswer));
    }

    #[test]
    fn corner_mode() {
        let mut s = Session::new(SessionConfig::new(Study::Study1, "P01", Method::FourHetero), 0).unwrap();
        s.step(Event::Play, 0.0).unwrap();
        let corners = |xs: &[&str]| Event::Answer { labels: xs.iter().map(|x| x.to_string()).collect() };
        s.step(corners(&["TL", "TR"]), 0.0).unwrap();
        assert_eq!(s.step(Event::Confirm, 1e6), Err(StepError::IncompleteAnswer));
        assert!(s.step(corners(&["XX"]), 0.0).is_err());
        s.step(corners(&["TR"]), 0.0).unwrap();
        assert_eq!(s.step(corners(&["BL"]), 0.0), Err(StepError::AnswerFull));
        assert!(matches!(s.step(Event::Confirm, 1e6), Err(StepError::InvalidAnswer(_))));
        s.step(Event::Backspace, 0.0).unwrap();
        s.step(corners(&["BR"]), 0.0).unwrap();
        let out = s.step(Event::Confirm, 1e6).unwrap();
        let Effect::Record(rec) = &out[0] else { panic!() };
        assert_eq!(s.set.get(&rec.response).unwrap().corners(), &[Corner::TL, Corner::TR, Corner::BR]);
    }

    #[test]
    fn breaks_and_phases() {
        let mut s = Session::new(SessionConfig::new(Study::Prelim, "P01", Method::Baseline), 0).unwrap();
        assert_eq!(s.phase(), Phase::Learning);
        let prompt = s.view(0.0).prompt.unwrap();
        s.step(Event::Play, 0.0).unwrap();
        s.step(Event::Play, 5000.0).unwrap();
        s.step(answer(&prompt), 9000.0).unwrap();
        let out = s.step(Event::Confirm, 9000.0).unwrap();
        assert!(matches!(&out[..], [Effect::Feedback(f)] if f.correct));
        assert!(s.records.is_empty());
        assert_eq!(s.step(Event::Advance, 9000.0).unwrap(), vec![Effect::PhaseStarted { phase: Phase::Training }]);
        assert_eq!(s.step(Event::Advance, 0.0), Err(StepError::NotAtBoundary));
        to_phase(&mut s, Phase::Testing);

        let mut t = 0.0;
        let mut breaks = Vec::new();
        let mut n = 0;
        loop {
            let st = current(&s);
            s.step(Event::Play, t).unwrap();
            t += 4000.0;
            s.step(answer(&st), t).unwrap();
            let out = s.step(Event::Confirm, t).unwrap();
            n += 1;
            assert!(!out.iter().any(|e| matches!(e, Effect::Feedback(_))), "no feedback in prelim testing");
            if out.contains(&Effect::Break) {
                breaks.push(n);
                assert!(s.view(t).on_break);
                assert_eq!(s.step(Event::Play, t), Err(StepError::OnBreak));
                s.step(Event::Advance, t).unwrap();
            }
            if out.contains(&Effect::PhaseComplete { phase: Phase::Testing }) {
                break;
            }
        }
        assert_eq!(n, 55);
        assert_eq!(breaks, vec![20, 40]);
        assert_eq!(s.step(Event::Play, t), Err(StepError::PhaseComplete));
        assert_eq!(s.accuracy(Phase::Testing), Some(1.0));
        assert_eq!(s.step(Event::Advance, t).unwrap(), vec![Effect::Finished]);
        assert_eq!(s.step(Event::Advance, t), Err(StepError::Finished));
        assert_eq!(s.records.len(), 33 + 55);
    }

    #[test]
    fn playback_finished_moves_rt_origin() {
        let mut s = Session::new(SessionConfig::new(Study::Study2Digit, "P01", Method::Baseline), 0).unwrap();
        assert_eq!(s.step(Event::PlaybackFinished { at_ms: 5.0 }, 5.0), Err(StepError::NoPlayback));
        s.step(Event::Play, 100.0).unwrap();
        assert_eq!(s.step(Event::PlaybackFinished { at_ms: 50.0 }, 50.0), Err(StepError::NoPlayback));
        let predicted = s.trial.as_ref().unwrap().end_ms.unwrap();
        s.step(Event::PlaybackFinished { at_ms: predicted + 3.0 }, predicted + 3.0).unwrap();
        let stim = current(&s);
        s.step(answer(&stim), 0.0).unwrap();
        assert_eq!(s.step(Event::Confirm, predicted + 1.0), Err(StepError::PlaybackInProgress));
        let out = s.step(Event::Confirm, predicted + 1003.0).unwrap();
        let Effect::Record(rec) = &out[0] else { panic!() };
        assert!((rec.rt_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn view_hides_stimulus() {
        let s = Session::new(SessionConfig::new(Study::Study2Digit, "P01", Method::Baseline), 0).unwrap();
        let v = serde_json::to_value(s.view(0.0)).unwrap();
        assert!(v.get("stimulus").is_none());
        assert_eq!(v["prompt"], serde_json::Value::Null);
        assert_eq!(v["phase"], "training");
    }

    #[test]
    fn random_events_never_corrupt_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for study in Study::ALL {
            let mut s = Session::new(SessionConfig::new(study, "F", Method::TwoHetero), 0).unwrap();
            let labels: Vec<String> = s.set.labels().into_iter().map(String::from).collect();
            let mut t = 0.0;
            for _ in 0..2_000 {
                t += rng.gen_range(0.0..1500.0);
                let ev = match rng.gen_range(0..8) {
                    0 => Event::Play,
                    1 => Event::ManualPlay { label: labels[rng.gen_range(0..labels.len())].clone() },
                    2 => Event::Answer { labels: vec![labels[rng.gen_range(0..labels.len())].clone()] },
                    3 => Event::Answer { labels: vec![["TL", "TR", "BL", "BR", "?"][rng.gen_range(0..5)].into()] },
                    4 => Event::Backspace,
                    5 => Event::Confirm,
                    6 => Event::Advance,
                    _ => Event::PlaybackFinished { at_ms: t },
                };
                let before = s.clone();
                if s.step(ev, t).is_err() {
                    assert_eq!(s, before);
                }
            }
        }
    }
}
