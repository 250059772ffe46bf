//! Predicted recognition confusion under a per-burst tactor-swap model.
//!
//! Each burst is perceived at its own tactor unless it is displaced along
//! the wrist's longitudinal axis, the transverse axis, or both. The two
//! displacements are independent. A swap toward a neighbor whose cue differs
//! from the actual tactor's cue is made less likely by the kernel's
//! distinctness discount: the more perceptual dimensions separate the two
//! cues, the smaller the effective swap probability.
//!
//! The perceived corner sequence is then mapped to a pattern by a closed-set
//! forced-choice decoder (see [`Decoder`]).
//!
//! Simulation runs in device coordinates, i.e. with patterns shown in RF1.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{cue_distinctness, CueMap};
use crate::pattern::{Corner, PatternSet};

/// Longest pattern the exact enumeration accepts (4^8 perceived sequences).
pub const MAX_EXACT_LEN: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("pattern `{label}` has {len} bursts; exact enumeration is limited to {MAX_EXACT_LEN}")]
    TooLong { label: String, len: usize },
    #[error("n_trials must be at least 1")]
    NoTrials,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionKernel {
    pub p_axis_swap_longitudinal: f64,
    pub p_axis_swap_transverse: f64,
    /// Swap-probability multiplier indexed by cue distinctness 0, 1, 2.
    #[serde(default = "default_discount")]
    pub cue_discount: [f64; 3],
}

fn default_discount() -> [f64; 3] {
    [1.0, 0.35, 0.15]
}

impl Default for ConfusionKernel {
    /// Illustrative values: longitudinal localization is the weaker one.
    fn default() -> Self {
        ConfusionKernel { p_axis_swap_longitudinal: 0.3, p_axis_swap_transverse: 0.15, cue_discount: default_discount() }
    }
}

impl ConfusionKernel {
    pub fn zero() -> Self {
        ConfusionKernel { p_axis_swap_longitudinal: 0.0, p_axis_swap_transverse: 0.0, ..Default::default() }
    }

    /// Every burst equally likely to land anywhere when cues are identical.
    pub fn uniform() -> Self {
        ConfusionKernel { p_axis_swap_longitudinal: 0.5, p_axis_swap_transverse: 0.5, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [("longitudinal", self.p_axis_swap_longitudinal), ("transverse", self.p_axis_swap_transverse)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Kernel(format!("{name} swap probability {p} outside [0, 1]")));
            }
        }
        let d = self.cue_discount;
        if d.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(SimError::Kernel("discounts must lie in [0, 1]".into()));
        }
        if d[0] != 1.0 {
            return Err(SimError::Kernel("discount for identical cues must be 1".into()));
        }
        if d[1] > d[0] || d[2] > d[1] {
            return Err(SimError::Kernel("discount must be non-increasing in distinctness".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let k: ConfusionKernel = toml::from_str(text).map_err(|e| SimError::Kernel(e.to_string()))?;
        k.validate()?;
        Ok(k)
    }
}

/// Distribution over perceived corners, indexed by [`Corner::index`].
pub type CornerDist = [f64; 4];

pub fn burst_confusion(actual: Corner, cues: &CueMap, k: &ConfusionKernel) -> CornerDist {
    let long_axis = cues.axis.longitudinal;
    let trans_axis = cues.axis.transverse();
    let here = cues.cue(actual);
    let long_nb = long_axis.neighbor(actual);
    let trans_nb = trans_axis.neighbor(actual);
    let discount = |c: Corner| k.cue_discount[cue_distinctness(here, cues.cue(c)) as usize];
    let pl = k.p_axis_swap_longitudinal * discount(long_nb);
    let pt = k.p_axis_swap_transverse * discount(trans_nb);

    let mut dist = [0.0; 4];
    dist[actual.index()] += (1.0 - pl) * (1.0 - pt);
    dist[long_nb.index()] += pl * (1.0 - pt);
    dist[trans_nb.index()] += (1.0 - pl) * pt;
    dist[trans_axis.neighbor(long_nb).index()] += pl * pt;
    dist
}

/// Closed-set forced choice over a pattern set.
///
/// Patterns with the same number of bursts as the perceived sequence compete
/// on the count of positions where corners agree. If no pattern has that
/// length, every pattern competes on its overlapping prefix. Ties are
/// reported as a candidate list and broken uniformly at random by callers.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    set: &'a PatternSet,
    /// Candidate lists per sequence length, indexed by the base-4 code of
    /// the perceived sequence.
    tables: BTreeMap<usize, Vec<Vec<u16>>>,
}

fn seq_code(seq: &[Corner]) -> usize {
    seq.iter().fold(0, |acc, c| acc * 4 + c.index())
}

fn seq_from_code(mut code: usize, len: usize) -> Vec<Corner> {
    let mut out = vec![Corner::TL; len];
    for slot in out.iter_mut().rev() {
        *slot = Corner::ALL[code % 4];
        code /= 4;
    }
    out
}

impl<'a> Decoder<'a> {
    pub fn new(set: &'a PatternSet) -> Self {
        Decoder { set, tables: BTreeMap::new() }
    }

    /// Precompute candidate lists for every sequence of the set's pattern
    /// lengths up to [`MAX_EXACT_LEN`].
    pub fn with_tables(set: &'a PatternSet) -> Self {
        let mut d = Decoder::new(set);
        let lengths: std::collections::BTreeSet<usize> =
            set.iter().map(|p| p.len()).filter(|&n| n <= MAX_EXACT_LEN).collect();
        for n in lengths {
            let table = (0..4usize.pow(n as u32))
                .map(|code| {
                    let seq = seq_from_code(code, n);
                    d.compute(&seq).into_iter().map(|i| i as u16).collect()
                })
                .collect();
            d.tables.insert(n, table);
        }
        d
    }

    pub fn set(&self) -> &PatternSet {
        self.set
    }

    fn compute(&self, perceived: &[Corner]) -> Vec<usize> {
        let same_len = self.set.iter().any(|p| p.len() == perceived.len());
        let mut best = 0usize;
        let mut out = Vec::new();
        for (i, p) in self.set.iter().enumerate() {
            if same_len && p.len() != perceived.len() {
                continue;
            }
            let score = p.corners().iter().zip(perceived).filter(|(a, b)| a == b).count();
            if out.is_empty() || score > best {
                best = score;
                out.clear();
                out.push(i);
            } else if score == best {
                out.push(i);
            }
        }
        out
    }

    /// Indices (into the set) of the best-scoring patterns.
    pub fn candidates(&self, perceived: &[Corner]) -> Vec<usize> {
        match self.tables.get(&perceived.len()) {
            Some(t) => t[seq_code(perceived)].iter().map(|&i| i as usize).collect(),
            None => self.compute(perceived),
        }
    }

    fn candidates_by_code(&self, len: usize, code: usize) -> &[u16] {
        &self.tables[&len][code]
    }

    pub fn decode_with<R: Rng>(&self, perceived: &[Corner], rng: &mut R) -> usize {
        let c = self.candidates(perceived);
        c[rng.gen_range(0..c.len())]
    }
}

/// Label of the closest pattern, ties broken uniformly under `seed`.
pub fn decode(perceived: &[Corner], set: &PatternSet, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = Decoder::new(set).decode_with(perceived, &mut rng);
    set.patterns()[i].label().to_string()
}

/// Row-stochastic stimulus-by-response prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedConfusion {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub accuracy: f64,
}

impl PredictedConfusion {
    fn from_matrix(set: &PatternSet, matrix: Vec<Vec<f64>>) -> Self {
        let k = matrix.len();
        let accuracy = (0..k).map(|i| matrix[i][i]).sum::<f64>() / k as f64;
        PredictedConfusion { labels: set.labels().into_iter().map(String::from).collect(), matrix, accuracy }
    }

    pub fn max_abs_diff(&self, other: &PredictedConfusion) -> f64 {
        self.matrix
            .iter()
            .flatten()
            .zip(other.matrix.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with a header row and a label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stimulus");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            out.push_str(l);
            for p in row {
                out.push_str(&format!(",{p:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn burst_tables(cues: &CueMap, k: &ConfusionKernel) -> [CornerDist; 4] {
    Corner::ALL.map(|c| burst_confusion(c, cues, k))
}

/// Exact expected confusion by enumerating every per-burst perception.
pub fn exact_confusion(set: &PatternSet, cues: &CueMap, k: &ConfusionKernel) -> Result<PredictedConfusion, SimError> {
    k.validate()?;
    if let Some(p) = set.iter().find(|p| p.len() > MAX_EXACT_LEN) {
        return Err(SimError::TooLong { label: p.label().to_string(), len: p.len() });
    }
    let dists = burst_tables(cues, k);
    let decoder = Decoder::with_tables(set);
    let n_pat = set.len();
    let matrix = set
        .iter()
        .map(|stim| {
            let n = stim.len();
            let mut row = vec![0.0; n_pat];
            // probability of each perceived prefix, built one burst at a time
            let mut probs = vec![1.0f64];
            for &c in stim.corners() {
                let d = &dists[c.index()];
                let mut next = Vec::with_capacity(probs.len() * 4);
                for &p in &probs {
                    next.extend(d.iter().map(|q| p * q));
                }
                probs = next;
            }
            for (code, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let cands = decoder.candidates_by_code(n, code);
                let share = p / cands.len() as f64;
                for &j in cands {
                    row[j as usize] += share;
                }
            }
            row
        })
        .collect();
    Ok(PredictedConfusion::from_matrix(set, matrix))
}

fn row_seed(seed: u64, row: usize) -> u64 {
    seed ^ (row as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sampled analogue of [`exact_confusion`] with `n_trials` presentations of
/// every stimulus. Rows are simulated in parallel with independent seeded
/// streams, so the result depends only on `seed`.
pub fn monte_carlo_confusion(
    set: &PatternSet,
    cues: &CueMap,
    k: &ConfusionKernel,
    n_trials: usize,
    seed: u64,
) -> Result<PredictedConfusion, SimError> {
    k.validate()?;
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    if let Some(p) = set.iter().find(|p| p.len() > MAX_EXACT_LEN) {
        return Err(SimError::TooLong { label: p.label().to_string(), len: p.len() });
    }
    let dists = burst_tables(cues, k);
    let decoder = Decoder::with_tables(set);
    let n_pat = set.len();

    let simulate_row = |row: usize| -> Vec<f64> {
        let stim = &set.patterns()[row];
        let mut rng = ChaCha8Rng::seed_from_u64(row_seed(seed, row));
        let mut counts = vec![0u64; n_pat];
        for _ in 0..n_trials {
            let mut code = 0;
            for &c in stim.corners() {
                let d = &dists[c.index()];
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = 3;
                for (i, &p) in d.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                code = code * 4 + pick;
            }
            let cands = decoder.candidates_by_code(stim.len(), code);
            let j = if cands.len() == 1 { cands[0] } else { cands[rng.gen_range(0..cands.len())] };
            counts[j as usize] += 1;
        }
        counts.into_iter().map(|c| c as f64 / n_trials as f64).collect()
    };

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n_pat);
    let mut matrix = vec![Vec::new(); n_pat];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let simulate_row = &simulate_row;
                s.spawn(move || (t..n_pat).step_by(threads).map(|r| (r, simulate_row(r))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (r, row) in h.join().expect("simulation thread panicked") {
                matrix[r] = row;
            }
        }
    });
    Ok(PredictedConfusion::from_matrix(set, matrix))
}
