use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnswerMode, ConfigError, Effect, Event, Session, SessionConfig};
use crate::pattern::Corner;
use crate::perception::{burst_confusion, ConfusionKernel, Decoder};

/// Simulated participant: perceives each burst through a confusion kernel,
/// answers with the decoded pattern and takes a burst-dependent time to
/// respond.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParticipant {
    pub kernel: ConfusionKernel,
    pub rt_base_s: f64,
    pub rt_per_burst_s: f64,
    /// Mean of the exponential component of the response time.
    pub rt_jitter_s: f64,
}

impl Default for SyntheticParticipant {
    fn default() -> Self {
        SyntheticParticipant { kernel: ConfusionKernel::default(), rt_base_s: 1.0, rt_per_burst_s: 0.5, rt_jitter_s: 0.5 }
    }
}

fn sample(dist: &[f64; 4], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    3
}

/// Run a whole session on a virtual clock. Breaks last one minute and the
/// learning phase is skipped.
pub fn simulate_session(cfg: SessionConfig, who: &SyntheticParticipant, seed: u64) -> Result<Session, ConfigError> {
    who.kernel.validate().map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut s = Session::new(cfg, 0)?;
    let set = s.pattern_set().clone();
    let cues = s.cues().clone();
    let rf = s.config().rf;
    let mode = s.config().answer_mode();
    let decoder = Decoder::new(&set);
    let physical_to_logical: [Corner; 4] = {
        let mut m = [Corner::TL; 4];
        for c in Corner::ALL {
            m[rf.to_physical(c).index()] = c;
        }
        m
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0f64;
    let step = |s: &mut Session, ev: Event, t: f64| s.step(ev, t).expect("synthetic participant follows the protocol");

    while !s.is_finished() {
        let Some(stim) = s.current_stimulus().map(String::from) else {
            step(&mut s, Event::Advance, t);
            t += 60_000.0;
            continue;
        };
        if s.phase() == crate::analysis::Phase::Learning {
            step(&mut s, Event::Advance, t);
            continue;
        }
        let effects = step(&mut s, Event::Play, t);
        let Some(Effect::Play { duration_ms, .. }) = effects.first() else { unreachable!() };
        t += *duration_ms as f64;

        let perceived: Vec<Corner> = set
            .get(&stim)
            .expect("stimulus in set")
            .corners()
            .iter()
            .map(|&c| {
                let d = burst_confusion(rf.to_physical(c), &cues, &who.kernel);
                physical_to_logical[sample(&d, &mut rng)]
            })
            .collect();
        let chosen = &set.patterns()[decoder.decode_with(&perceived, &mut rng)];
        let tokens = match mode {
            AnswerMode::Label => vec![chosen.label().to_string()],
            AnswerMode::Corners => chosen.corners().iter().map(|c| c.to_string()).collect(),
        };
        let u: f64 = rng.gen();
        let rt = who.rt_base_s + who.rt_per_burst_s * perceived.len() as f64 - who.rt_jitter_s * (1.0 - u).ln();
        t += rt * 1000.0;
        step(&mut s, Event::Answer { labels: tokens }, t);
        step(&mut s, Event::Confirm, t);
        t += 500.0;
    }
    Ok(s)
}
