//! Recognition metrics over trial logs: accuracy, information transfer,
//! reaction time and participant screening.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::Method;
use crate::pattern::ReferenceFrame;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("empty selection")]
    Empty,
    #[error("records mix pattern sets `{0}` and `{1}`")]
    MixedSets(String, String),
    #[error("need at least two participants, got {0}")]
    TooFewParticipants(usize),
    #[error("unknown grouping field `{0}`")]
    Field(String),
    #[error("log line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("invalid record on line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Posture {
    #[default]
    Forward,
    Right,
    Down,
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Posture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Posture::Forward),
            "right" => Ok(Posture::Right),
            "down" => Ok(Posture::Down),
            _ => Err(format!("unknown posture `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Prelim,
    Study1,
    Study2Alphabet,
    Study2Digit,
}

impl Study {
    pub const ALL: [Study; 4] = [Study::Prelim, Study::Study1, Study::Study2Alphabet, Study::Study2Digit];

    pub fn as_str(self) -> &'static str {
        match self {
            Study::Prelim => "prelim",
            Study::Study1 => "study1",
            Study::Study2Alphabet => "study2_alphabet",
            Study::Study2Digit => "study2_digit",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Study {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Study::ALL.into_iter().find(|st| st.as_str() == norm).ok_or_else(|| format!("unknown study `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Learning,
    Training,
    Testing,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Learning => "learning",
            Phase::Training => "training",
            Phase::Testing => "testing",
        })
    }
}

/// One confirmed answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant: String,
    pub study: Study,
    pub pattern_set: String,
    pub method: Method,
    pub posture: Posture,
    pub rf: ReferenceFrame,
    pub phase: Phase,
    /// 1-based block within the phase.
    pub block: u32,
    /// 1-based trial within the block.
    pub trial: u32,
    pub stimulus: String,
    pub response: String,
    pub correct: bool,
    pub rt_s: f64,
    /// Milliseconds since the Unix epoch at confirmation.
    pub timestamp_ms: u64,
}

impl TrialRecord {
    /// Value of a condition field by name, as used for grouping.
    pub fn field(&self, name: &str) -> Result<String, AnalysisError> {
        Ok(match name {
            "participant" => self.participant.clone(),
            "study" => self.study.to_string(),
            "pattern_set" | "set" => self.pattern_set.clone(),
            "method" => self.method.to_string(),
            "posture" => self.posture.to_string(),
            "rf" => self.rf.to_string(),
            "phase" => self.phase.to_string(),
            "block" => self.block.to_string(),
            _ => return Err(AnalysisError::Field(name.to_string())),
        })
    }
}

/// Parse a JSONL trial log. Blank lines are skipped.
pub fn parse_log<R: BufRead>(r: R) -> Result<Vec<TrialRecord>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord =
            serde_json::from_str(&line).map_err(|source| AnalysisError::Json { line: i + 1, source })?;
        if !(rec.rt_s >= 0.0 && rec.rt_s.is_finite()) {
            return Err(AnalysisError::Record { line: i + 1, msg: format!("rt_s {} is not a non-negative number", rec.rt_s) });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Rows are stimuli, columns responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        ConfusionMatrix { labels, counts: vec![vec![0; k]; k] }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Option<Self> {
        let k = labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return None;
        }
        Some(ConfusionMatrix { labels, counts })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Returns false if either label is not in the matrix.
    pub fn add(&mut self, stimulus: &str, response: &str) -> bool {
        match (self.index(stimulus), self.index(response)) {
            (Some(i), Some(j)) => {
                self.counts[i][j] += 1;
                true
            }
            _ => false,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Cell-wise sum; labels must agree.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> bool {
        if self.labels != other.labels {
            return false;
        }
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        true
    }

    pub fn accuracy(&self) -> Result<f64, AnalysisError> {
        let total = self.total();
        if total == 0 {
            return Err(AnalysisError::Empty);
        }
        let trace: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        Ok(trace as f64 / total as f64)
    }

    /// Maximum-likelihood estimate of transmitted information in bits.
    pub fn information_transfer(&self) -> Result<f64, AnalysisError> {
        let n = self.total();
        if n == 0 {
            return Err(AnalysisError::Empty);
        }
        let n = n as f64;
        let k = self.labels.len();
        let row: Vec<f64> = self.counts.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
        let col: Vec<f64> = (0..k).map(|j| self.counts.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
        let mut it = 0.0;
        for (r, counts) in row.iter().zip(&self.counts) {
            for (c, &nij) in col.iter().zip(counts) {
                if nij > 0 {
                    let nij = nij as f64;
                    it += nij / n * (nij * n / (r * c)).log2();
                }
            }
        }
        Ok(it.max(0.0))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stimulus");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Counts over the records matching `filter`. Labels are the sorted union of
/// every stimulus and response in `records`, so matrices built from
/// different filters over the same records are directly comparable.
pub fn build_confusion<F>(records: &[TrialRecord], filter: F) -> Result<ConfusionMatrix, AnalysisError>
where
    F: Fn(&TrialRecord) -> bool,
{
    if let Some(first) = records.first() {
        if let Some(other) = records.iter().find(|r| r.pattern_set != first.pattern_set) {
            return Err(AnalysisError::MixedSets(first.pattern_set.clone(), other.pattern_set.clone()));
        }
    }
    let labels: BTreeSet<&str> = records.iter().flat_map(|r| [r.stimulus.as_str(), r.response.as_str()]).collect();
    let mut cm = ConfusionMatrix::new(labels.into_iter().map(String::from).collect());
    for r in records.iter().filter(|r| filter(r)) {
        cm.add(&r.stimulus, &r.response);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtStats {
    pub mean_s: f64,
    /// Sample standard deviation; 0 for a single record.
    pub sd_s: f64,
    pub n: usize,
}

pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

pub fn rt_stats<F>(records: &[TrialRecord], filter: F) -> Result<RtStats, AnalysisError>
where
    F: Fn(&TrialRecord) -> bool,
{
    let rts: Vec<f64> = records.iter().filter(|r| filter(r)).map(|r| r.rt_s).collect();
    let (mean_s, sd_s) = mean_sd(&rts).ok_or(AnalysisError::Empty)?;
    Ok(RtStats { mean_s, sd_s, n: rts.len() })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Screening {
    pub included: BTreeSet<String>,
    pub excluded: BTreeSet<String>,
}

/// `accuracies[participant][condition]`. A participant is excluded if in any
/// condition their accuracy lies more than `sigma` sample SDs from that
/// condition's mean. Conditions with zero spread exclude nobody.
pub fn exclude_outliers(
    accuracies: &BTreeMap<String, BTreeMap<String, f64>>,
    sigma: f64,
) -> Result<Screening, AnalysisError> {
    if accuracies.len() < 2 {
        return Err(AnalysisError::TooFewParticipants(accuracies.len()));
    }
    let conditions: BTreeSet<&String> = accuracies.values().flat_map(|m| m.keys()).collect();
    let mut excluded = BTreeSet::new();
    for cond in conditions {
        let values: Vec<(&String, f64)> =
            accuracies.iter().filter_map(|(p, m)| m.get(cond).map(|&a| (p, a))).collect();
        let xs: Vec<f64> = values.iter().map(|v| v.1).collect();
        let Some((mean, sd)) = mean_sd(&xs) else { continue };
        if sd == 0.0 {
            continue;
        }
        for (p, a) in values {
            if (a - mean).abs() > sigma * sd {
                excluded.insert(p.clone());
            }
        }
    }
    let included = accuracies.keys().filter(|p| !excluded.contains(*p)).cloned().collect();
    Ok(Screening { included, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Metrics per participant, then averaged.
    #[default]
    PerParticipant,
    /// Metrics on the matrix pooled over participants.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// (field, value) for each grouping field.
    pub key: Vec<(String, String)>,
    pub n_trials: usize,
    pub n_participants: usize,
    pub ac_pct: f64,
    pub it_bits: f64,
    pub rt_s: f64,
    pub confusion: ConfusionMatrix,
}

impl ReportRow {
    pub fn key_string(&self) -> String {
        self.key.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join("_")
    }
}

/// One row per distinct combination of `by` fields, in sorted order.
pub fn report(records: &[TrialRecord], by: &[&str], agg: Aggregation) -> Result<Vec<ReportRow>, AnalysisError> {
    let mut groups: BTreeMap<Vec<String>, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = by.iter().map(|f| r.field(f)).collect::<Result<Vec<_>, _>>()?;
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (key, recs) in groups {
        let owned: Vec<TrialRecord> = recs.iter().map(|r| (*r).clone()).collect();
        let pooled = build_confusion(&owned, |_| true)?;
        let participants: BTreeSet<&str> = owned.iter().map(|r| r.participant.as_str()).collect();
        let (ac, it, rt) = match agg {
            Aggregation::Pooled => (pooled.accuracy()?, pooled.information_transfer()?, rt_stats(&owned, |_| true)?.mean_s),
            Aggregation::PerParticipant => {
                let mut acc = (0.0, 0.0, 0.0);
                for p in &participants {
                    let own = |r: &TrialRecord| r.participant == *p;
                    let cm = build_confusion(&owned, own)?;
                    acc.0 += cm.accuracy()?;
                    acc.1 += cm.information_transfer()?;
                    acc.2 += rt_stats(&owned, own)?.mean_s;
                }
                let n = participants.len() as f64;
                (acc.0 / n, acc.1 / n, acc.2 / n)
            }
        };
        rows.push(ReportRow {
            key: by.iter().map(|f| f.to_string()).zip(key).collect(),
            n_trials: owned.len(),
            n_participants: participants.len(),
            ac_pct: ac * 100.0,
            it_bits: it,
            rt_s: rt,
            confusion: pooled,
        });
    }
    Ok(rows)
}

/// AC and RT to one decimal, IT to two.
pub fn report_csv(rows: &[ReportRow], by: &[&str]) -> String {
    let mut out = by.join(",");
    if !by.is_empty() {
        out.push(',');
    }
    out.push_str("n_trials,n_participants,ac_pct,it_bits,rt_s\n");
    for r in rows {
        for (_, v) in &r.key {
            out.push_str(v);
            out.push(',');
        }
        out.push_str(&format!("{},{},{:.1},{:.2},{:.1}\n", r.n_trials, r.n_participants, r.ac_pct, r.it_bits, r.rt_s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("p{i:02}")).collect()
    }

    fn rec(participant: &str, posture: Posture, stim: &str, resp: &str, rt: f64) -> TrialRecord {
        TrialRecord {
            participant: participant.into(),
            study: Study::Prelim,
            pattern_set: "prelim11".into(),
            method: Method::FourHetero,
            posture,
            rf: ReferenceFrame::Rf1,
            phase: Phase::Testing,
            block: 1,
            trial: 1,
            stimulus: stim.into(),
            response: resp.into(),
            correct: stim == resp,
            rt_s: rt,
            timestamp_ms: 0,
        }
    }

    /// I(X;Y) = H(X) + H(Y) - H(X,Y), computed independently of the
    /// summation in `information_transfer`.
    fn it_by_entropy(counts: &[Vec<u64>]) -> f64 {
        let n: f64 = counts.iter().flatten().sum::<u64>() as f64;
        let h = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
            xs.filter(|&x| x > 0.0).map(|x| -(x / n) * (x / n).log2()).sum()
        };
        let k = counts.len();
        let hx = h(&mut counts.iter().map(|r| r.iter().sum::<u64>() as f64));
        let hy = h(&mut (0..k).map(|j| counts.iter().map(|r| r[j]).sum::<u64>() as f64));
        let hxy = h(&mut counts.iter().flatten().map(|&c| c as f64));
        hx + hy - hxy
    }

    #[test]
    fn accuracy_examples() {
        let mut id = ConfusionMatrix::new(labels(24));
        for l in labels(24) {
            for _ in 0..10 {
                id.add(&l, &l);
            }
        }
        assert_eq!(id.accuracy().unwrap(), 1.0);
        assert!((id.information_transfer().unwrap() - 24f64.log2()).abs() < 1e-12);

        let uni = ConfusionMatrix::from_counts(labels(4), vec![vec![5; 4]; 4]).unwrap();
        assert_eq!(uni.accuracy().unwrap(), 0.25);
        assert!(uni.information_transfer().unwrap().abs() < 1e-12);

        let two = ConfusionMatrix::from_counts(labels(2), vec![vec![90, 10], vec![10, 90]]).unwrap();
        assert!((two.accuracy().unwrap() - 0.9).abs() < 1e-12);
        let h2 = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
        assert!((two.information_transfer().unwrap() - (1.0 - h2)).abs() < 1e-12);
        assert!((two.information_transfer().unwrap() - 0.531).abs() < 5e-4);

        assert!(matches!(ConfusionMatrix::new(labels(3)).accuracy(), Err(AnalysisError::Empty)));
    }

    #[test]
    fn build_and_partition() {
        let mut rs = Vec::new();
        for (i, p) in ["b", "c", "d", "h", "k", "n", "p", "s", "u", "x", "z"].iter().enumerate() {
            for rep in 0..5 {
                let resp = if rep == 0 && i % 2 == 0 { "u" } else { p };
                let posture = if rep % 2 == 0 { Posture::Forward } else { Posture::Down };
                rs.push(rec("P01", posture, p, resp, 3.0));
            }
        }
        let all = build_confusion(&rs, |_| true).unwrap();
        assert_eq!(all.total(), 55);
        let mut fwd = build_confusion(&rs, |r| r.posture == Posture::Forward).unwrap();
        let down = build_confusion(&rs, |r| r.posture == Posture::Down).unwrap();
        assert!(fwd.merge(&down));
        assert_eq!(fwd, all);
        let none = build_confusion(&rs, |r| r.posture == Posture::Right).unwrap();
        assert!(none.is_empty());

        let mut mixed = rs.clone();
        mixed[3].pattern_set = "alphabet26".into();
        assert!(matches!(build_confusion(&mixed, |_| true), Err(AnalysisError::MixedSets(..))));
    }

    #[test]
    fn rt_examples() {
        let one = [rec("a", Posture::Forward, "b", "b", 3.0)];
        assert_eq!(rt_stats(&one, |_| true).unwrap(), RtStats { mean_s: 3.0, sd_s: 0.0, n: 1 });
        let two = [rec("a", Posture::Forward, "b", "b", 2.0), rec("a", Posture::Forward, "b", "b", 4.0)];
        let s = rt_stats(&two, |_| true).unwrap();
        assert_eq!((s.mean_s, s.n), (3.0, 2));
        assert!((s.sd_s - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(rt_stats(&two, |_| false), Err(AnalysisError::Empty)));
    }

    #[test]
    fn outliers() {
        let mut acc: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for i in 0..11 {
            acc.insert(format!("P{i:02}"), [("forward".to_string(), 0.9)].into());
        }
        acc.insert("P11".into(), [("forward".to_string(), 0.2)].into());
        let xs: Vec<f64> = acc.values().map(|m| m["forward"]).collect();
        let (mean, sd) = mean_sd(&xs).unwrap();
        assert!((0.2 - mean).abs() > 2.0 * sd);
        let s = exclude_outliers(&acc, 2.0).unwrap();
        assert_eq!(s.excluded, ["P11".to_string()].into());
        assert_eq!(s.included.len(), 11);
        assert!(exclude_outliers(&acc, f64::INFINITY).unwrap().excluded.is_empty());

        let flat: BTreeMap<_, _> = (0..5).map(|i| (format!("P{i}"), [("c".to_string(), 0.5)].into())).collect();
        assert!(exclude_outliers(&flat, 2.0).unwrap().excluded.is_empty());
        let single: BTreeMap<_, _> = [("P".to_string(), BTreeMap::new())].into();
        assert!(matches!(exclude_outliers(&single, 2.0), Err(AnalysisError::TooFewParticipants(1))));
    }

    #[test]
    fn log_round_trip_and_report() {
        let rs = vec![
            rec("P01", Posture::Forward, "b", "b", 3.0),
            rec("P01", Posture::Forward, "c", "b", 4.0),
            rec("P02", Posture::Forward, "b", "b", 2.0),
            rec("P02", Posture::Down, "c", "c", 5.0),
        ];
        let text: String = rs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
        let back = parse_log(text.as_bytes()).unwrap();
        assert_eq!(back, rs);
        assert!(matches!(parse_log("{}\n".as_bytes()), Err(AnalysisError::Json { line: 1, .. })));

        let rows = report(&rs, &["posture"], Aggregation::PerParticipant).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].key, vec![("posture".to_string(), "Down".to_string())]);
        let fwd = &rows[1];
        // P01 50 %, P02 100 %
        assert!((fwd.ac_pct - 75.0).abs() < 1e-12);
        assert!((fwd.rt_s - 2.75).abs() < 1e-12);
        let pooled = report(&rs, &["posture"], Aggregation::Pooled).unwrap();
        assert!((pooled[1].ac_pct - 200.0 / 3.0).abs() < 1e-9);
        let csv = report_csv(&rows, &["posture"]);
        assert!(csv.starts_with("posture,n_trials,n_participants,ac_pct,it_bits,rt_s\nDown,1,1,100.0,"));
        assert!(csv.contains("\nForward,3,2,75.0,"));
        assert!(matches!(report(&rs, &["colour"], Aggregation::Pooled), Err(AnalysisError::Field(_))));
    }

    fn counts_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (2usize..7).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u64..20, k), k))
            .prop_filter("non-empty", |c| c.iter().flatten().any(|&x| x > 0))
    }

    proptest! {
        #[test]
        fn it_matches_entropy_oracle(counts in counts_strategy()) {
            let k = counts.len();
            let cm = ConfusionMatrix::from_counts(labels(k), counts.clone()).unwrap();
            let it = cm.information_transfer().unwrap();
            prop_assert!((it - it_by_entropy(&counts)).abs() < 1e-9);
            prop_assert!(it >= 0.0 && it <= (k as f64).log2() + 1e-9);
        }

        #[test]
        fn it_scale_and_permutation_invariant(counts in counts_strategy(), scale in 2u64..5, seed in any::<u64>()) {
            let k = counts.len();
            let base = ConfusionMatrix::from_counts(labels(k), counts.clone()).unwrap();
            let scaled = ConfusionMatrix::from_counts(labels(k), counts.iter().map(|r| r.iter().map(|c| c * scale).collect()).collect()).unwrap();
            prop_assert!((base.information_transfer().unwrap() - scaled.information_transfer().unwrap()).abs() < 1e-9);

            let mut perm: Vec<usize> = (0..k).collect();
            let mut s = seed;
            for i in (1..k).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<Vec<u64>> = perm.iter().map(|&i| perm.iter().map(|&j| counts[i][j]).collect()).collect();
            let pm = ConfusionMatrix::from_counts(labels(k), permuted).unwrap();
            prop_assert!((base.information_transfer().unwrap() - pm.information_transfer().unwrap()).abs() < 1e-9);
            prop_assert!((base.accuracy().unwrap() - pm.accuracy().unwrap()).abs() < 1e-12);
        }

        #[test]
        fn permutation_matrix_is_max_it(k in 2usize..8, reps in 1u64..5, shift in 0usize..8) {
            let counts: Vec<Vec<u64>> = (0..k).map(|i| (0..k).map(|j| if j == (i + shift) % k { reps } else { 0 }).collect()).collect();
            let cm = ConfusionMatrix::from_counts(labels(k), counts).unwrap();
            prop_assert!((cm.information_transfer().unwrap() - (k as f64).log2()).abs() < 1e-9);
        }
    }
}
