use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConfigError, SessionConfig};
use crate::analysis::Phase;
use crate::pattern::PatternSet;

/// Trials between rest breaks within a block.
pub const BREAK_EVERY: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueueEntry {
    Trial { block: u32, trial: u32, stimulus: String },
    Break,
}

/// Stimulus order for every block of `phase`, each block shuffled with its
/// own derived seed. A break follows every [`BREAK_EVERY`] trials and every
/// block except the last; the phase never ends on a break. The learning
/// phase and phases absent from the plan yield an empty queue.
pub fn build_trial_queue(cfg: &SessionConfig, set: &PatternSet, phase: Phase) -> Vec<QueueEntry> {
    let Some(spec) = cfg.plan().into_iter().find(|p| p.phase == phase) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for block in 1..=spec.blocks {
        let mut labels: Vec<&str> = Vec::with_capacity(spec.trials_per_block(set.len()));
        for _ in 0..spec.reps {
            labels.extend(set.labels());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.block_seed(phase, block));
        labels.shuffle(&mut rng);
        for (i, l) in labels.iter().enumerate() {
            if i > 0 && i % BREAK_EVERY == 0 {
                out.push(QueueEntry::Break);
            }
            out.push(QueueEntry::Trial { block, trial: i as u32 + 1, stimulus: l.to_string() });
        }
        if block < spec.blocks {
            out.push(QueueEntry::Break);
        }
    }
    out
}

/// Convenience for callers holding only a config.
pub fn build_trial_queue_for(cfg: &SessionConfig, phase: Phase) -> Result<Vec<QueueEntry>, ConfigError> {
    Ok(build_trial_queue(cfg, &cfg.resolve()?, phase))
}
