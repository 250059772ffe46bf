//! Tactor grid, stroke patterns and the shipped pattern sets.
//!
//! A pattern is a unistroke path over the four corners of a 2x2 tactor
//! array. Each visited corner becomes one vibration burst. Patterns live in
//! *logical* coordinates (the glyph as drawn); a [`ReferenceFrame`] decides
//! how that glyph is laid onto the physical device.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const EDGEWRITE_ALNUM: &str = include_str!("../data/edgewrite_alnum.txt");
const PRELIM11: &str = include_str!("../data/prelim11.txt");

/// Names accepted by [`PatternSet::builtin`].
pub const BUILTIN_SETS: [&str; 5] = ["edgewrite_alnum", "prelim11", "tps24", "alphabet26", "digit10"];

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern `{0}` needs at least two corners")]
    TooShort(String),
    #[error("pattern `{label}` repeats a corner consecutively at position {position}")]
    ConsecutiveRepeat { label: String, position: usize },
    #[error("invalid corner token `{0}`")]
    InvalidCorner(String),
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("pattern set is empty")]
    EmptySet,
    #[error("unknown pattern set `{0}`")]
    UnknownSet(String),
    #[error("channel map is not a bijection onto 0..4")]
    ChannelMap,
    #[error("invalid timing: {0}")]
    Timing(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<PatternError>,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PatternError {
    fn at(self, line: usize) -> Self {
        PatternError::AtLine { line, source: Box::new(self) }
    }

    /// Source line of a parse failure, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            PatternError::AtLine { line, .. } | PatternError::Syntax { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Corner of the 2x2 grid. The derived order TL < TR < BL < BR is the
/// canonical sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    TL,
    TR,
    BL,
    BR,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::TL, Corner::TR, Corner::BL, Corner::BR];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Corner> {
        Corner::ALL.get(i).copied()
    }

    /// 0 = top row, 1 = bottom row.
    pub fn row(self) -> u8 {
        (self.index() / 2) as u8
    }

    /// 0 = left column, 1 = right column.
    pub fn col(self) -> u8 {
        (self.index() % 2) as u8
    }

    pub fn from_row_col(row: u8, col: u8) -> Corner {
        Corner::ALL[(row as usize & 1) * 2 + (col as usize & 1)]
    }

    /// Rotate counterclockwise by `quarter_turns` (viewed from above):
    /// TL -> BL -> BR -> TR -> TL.
    pub fn rotate_ccw(self, quarter_turns: u8) -> Corner {
        let mut c = self;
        for _ in 0..quarter_turns % 4 {
            c = match c {
                Corner::TL => Corner::BL,
                Corner::BL => Corner::BR,
                Corner::BR => Corner::TR,
                Corner::TR => Corner::TL,
            };
        }
        c
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Corner::TL => "TL",
            Corner::TR => "TR",
            Corner::BL => "BL",
            Corner::BR => "BR",
        }
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corner {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TL" => Ok(Corner::TL),
            "TR" => Ok(Corner::TR),
            "BL" => Ok(Corner::BL),
            "BR" => Ok(Corner::BR),
            _ => Err(PatternError::InvalidCorner(s.to_string())),
        }
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, ':' | '#' | ','))
}

/// A labeled corner sequence. Non-consecutive revisits are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrokePattern {
    label: String,
    corners: Vec<Corner>,
    tags: BTreeSet<String>,
}

impl StrokePattern {
    pub fn new(
        label: impl Into<String>,
        corners: Vec<Corner>,
        tags: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, PatternError> {
        let label = label.into();
        if !valid_label(&label) {
            return Err(PatternError::InvalidLabel(label));
        }
        if corners.len() < 2 {
            return Err(PatternError::TooShort(label));
        }
        if let Some(i) = corners.windows(2).position(|w| w[0] == w[1]) {
            return Err(PatternError::ConsecutiveRepeat { label, position: i + 1 });
        }
        let tags = tags.into_iter().map(Into::into).collect();
        Ok(StrokePattern { label, corners, tags })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn tags(&self) -> &BTreeSet<String> {
        &self.tags
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains(tag)
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSet {
    name: String,
    version: String,
    patterns: Vec<StrokePattern>,
}

impl PatternSet {
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        patterns: Vec<StrokePattern>,
    ) -> Result<Self, PatternError> {
        if patterns.is_empty() {
            return Err(PatternError::EmptySet);
        }
        let mut seen = HashSet::new();
        for p in &patterns {
            if !seen.insert(p.label.as_str()) {
                return Err(PatternError::DuplicateLabel(p.label.clone()));
            }
        }
        Ok(PatternSet { name: name.into(), version: version.into(), patterns })
    }

    /// Parse the line-oriented text format:
    ///
    /// ```text
    /// # set: prelim11
    /// # version: 1.0
    /// u: TL BL BR TR #alphabet #prelim11
    /// ```
    ///
    /// Lines starting with `#` are comments; `# set:` and `# version:`
    /// comments set the metadata. Tokens after the corners that start with
    /// `#` are tags.
    pub fn parse(text: &str, default_name: &str) -> Result<Self, PatternError> {
        let mut name = default_name.to_string();
        let mut version = String::from("0");
        let mut patterns: Vec<StrokePattern> = Vec::new();
        let mut seen = HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("set:") {
                    name = v.trim().to_string();
                } else if let Some(v) = comment.strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            let (label, rest) = line.split_once(':').ok_or_else(|| PatternError::Syntax {
                line: line_no,
                msg: "expected `label: corners`".into(),
            })?;
            let label = label.trim();
            let mut corners = Vec::new();
            let mut tags = Vec::new();
            for tok in rest.split_whitespace() {
                if let Some(tag) = tok.strip_prefix('#') {
                    if tag.is_empty() {
                        continue;
                    }
                    tags.push(tag.to_string());
                } else if !tags.is_empty() {
                    return Err(PatternError::Syntax {
                        line: line_no,
                        msg: format!("corner `{tok}` after tags"),
                    });
                } else {
                    corners.push(tok.parse::<Corner>().map_err(|e| e.at(line_no))?);
                }
            }
            let pattern = StrokePattern::new(label, corners, tags).map_err(|e| e.at(line_no))?;
            if !seen.insert(pattern.label.clone()) {
                return Err(PatternError::DuplicateLabel(pattern.label).at(line_no));
            }
            patterns.push(pattern);
        }
        if patterns.is_empty() {
            return Err(PatternError::EmptySet);
        }
        Ok(PatternSet { name, version, patterns })
    }

    /// Serialize to the text format accepted by [`PatternSet::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("# set: {}\n# version: {}\n", self.name, self.version);
        for p in &self.patterns {
            out.push_str(&p.label);
            out.push(':');
            for c in &p.corners {
                out.push(' ');
                out.push_str(c.as_str());
            }
            for t in &p.tags {
                out.push_str(" #");
                out.push_str(t);
            }
            out.push('\n');
        }
        out
    }

    pub fn builtin(name: &str) -> Result<Self, PatternError> {
        match name {
            "edgewrite_alnum" => PatternSet::parse(EDGEWRITE_ALNUM, name),
            "prelim11" => PatternSet::parse(PRELIM11, name),
            "tps24" => Ok(enumerate_three_point_strokes()),
            "alphabet26" => PatternSet::builtin("edgewrite_alnum")?.with_tag("alphabet", name),
            "digit10" => PatternSet::builtin("edgewrite_alnum")?.with_tag("digit", name),
            other => Err(PatternError::UnknownSet(other.to_string())),
        }
    }

    /// A builtin set by name, or a pattern-set file otherwise.
    pub fn resolve(name_or_path: &str) -> Result<Self, PatternError> {
        if BUILTIN_SETS.contains(&name_or_path) {
            PatternSet::builtin(name_or_path)
        } else {
            load_pattern_set(name_or_path)
        }
    }

    /// Subset of patterns carrying `tag`.
    pub fn with_tag(&self, tag: &str, name: &str) -> Result<Self, PatternError> {
        let patterns = self.patterns.iter().filter(|p| p.has_tag(tag)).cloned().collect();
        PatternSet::new(name, self.version.clone(), patterns)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn patterns(&self) -> &[StrokePattern] {
        &self.patterns
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StrokePattern> {
        self.patterns.iter()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&StrokePattern> {
        self.patterns.iter().find(|p| p.label == label)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.patterns.iter().position(|p| p.label == label)
    }

    pub fn find_by_corners(&self, corners: &[Corner]) -> Option<&StrokePattern> {
        self.patterns.iter().find(|p| p.corners == corners)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.patterns.iter().map(|p| p.label.as_str()).collect()
    }

    pub fn max_len(&self) -> usize {
        self.patterns.iter().map(StrokePattern::len).max().unwrap_or(0)
    }
}

pub fn load_pattern_set(path: impl AsRef<Path>) -> Result<PatternSet, PatternError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("patterns");
    PatternSet::parse(&text, stem)
}

/// Every ordered triple of pairwise-distinct corners, in lexicographic corner
/// order, labeled `tps_01` ..= `tps_24`.
pub fn enumerate_three_point_strokes() -> PatternSet {
    let mut patterns = Vec::with_capacity(24);
    for a in Corner::ALL {
        for b in Corner::ALL {
            for c in Corner::ALL {
                if a == b || b == c || a == c {
                    continue;
                }
                let label = format!("tps_{:02}", patterns.len() + 1);
                let p = StrokePattern::new(label, vec![a, b, c], ["three-point"])
                    .expect("distinct corners form a valid pattern");
                patterns.push(p);
            }
        }
    }
    PatternSet::new("tps24", "1.0", patterns).expect("24 unique labels")
}

/// Convention mapping a pattern's "top" onto the worn device.
///
/// `Rf1` treats the device edge nearest the hand as the top and is the
/// identity on device coordinates. `Rf2` treats 12 o'clock as the top, which
/// is one quarter turn counterclockwise from `Rf1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum ReferenceFrame {
    #[default]
    #[serde(rename = "RF1", alias = "rf1")]
    Rf1,
    #[serde(rename = "RF2", alias = "rf2")]
    Rf2,
}

impl ReferenceFrame {
    pub fn rotation_quarter_turns(self) -> u8 {
        match self {
            ReferenceFrame::Rf1 => 0,
            ReferenceFrame::Rf2 => 1,
        }
    }

    /// Physical (device-frame) corner that displays logical corner `c`.
    pub fn to_physical(self, c: Corner) -> Corner {
        c.rotate_ccw(self.rotation_quarter_turns())
    }
}

impl fmt::Display for ReferenceFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceFrame::Rf1 => "RF1",
            ReferenceFrame::Rf2 => "RF2",
        })
    }
}

impl FromStr for ReferenceFrame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace(' ', "").as_str() {
            "RF1" => Ok(ReferenceFrame::Rf1),
            "RF2" => Ok(ReferenceFrame::Rf2),
            _ => Err(format!("unknown reference frame `{s}`")),
        }
    }
}

/// Physical layout of the array. Only the 2x2 grid is supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub tactor_spacing_mm: f64,
    pub frame_mm: (f64, f64),
    /// Output channel for each physical corner, indexed by [`Corner::index`].
    channels: [u8; 4],
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry { tactor_spacing_mm: 30.0, frame_mm: (40.0, 40.0), channels: [0, 1, 2, 3] }
    }
}

impl GridGeometry {
    pub fn with_channel_map(channels: [u8; 4]) -> Result<Self, PatternError> {
        let mut seen = [false; 4];
        for &ch in &channels {
            if ch > 3 || std::mem::replace(&mut seen[ch as usize], true) {
                return Err(PatternError::ChannelMap);
            }
        }
        Ok(GridGeometry { channels, ..GridGeometry::default() })
    }

    pub fn channel_of_physical(&self, c: Corner) -> u8 {
        self.channels[c.index()]
    }

    pub fn channel_of(&self, c: Corner, rf: ReferenceFrame) -> u8 {
        self.channel_of_physical(rf.to_physical(c))
    }

    pub fn physical_of_channel(&self, ch: u8) -> Option<Corner> {
        self.channels.iter().position(|&x| x == ch).and_then(Corner::from_index)
    }
}

pub fn map_to_channels(pattern: &StrokePattern, rf: ReferenceFrame, geom: &GridGeometry) -> Vec<u8> {
    pattern.corners.iter().map(|&c| geom.channel_of(c, rf)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    pub burst_s: f64,
    pub isi_s: f64,
}

impl TimingParams {
    /// 0.5 s bursts back to back.
    pub const NO_ISI: TimingParams = TimingParams { burst_s: 0.5, isi_s: 0.0 };
    /// 0.5 s bursts separated by 0.1 s.
    pub const WITH_ISI: TimingParams = TimingParams { burst_s: 0.5, isi_s: 0.1 };

    pub fn new(burst_s: f64, isi_s: f64) -> Result<Self, PatternError> {
        let t = TimingParams { burst_s, isi_s };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if !(self.burst_s > 0.0 && self.burst_s.is_finite()) {
            return Err(PatternError::Timing(format!("burst_s must be > 0, got {}", self.burst_s)));
        }
        if !(self.isi_s >= 0.0 && self.isi_s.is_finite()) {
            return Err(PatternError::Timing(format!("isi_s must be >= 0, got {}", self.isi_s)));
        }
        Ok(())
    }

    pub fn burst_ms(&self) -> u64 {
        (self.burst_s * 1000.0).round() as u64
    }

    /// Onset-to-onset spacing in ms.
    pub fn stride_ms(&self) -> u64 {
        ((self.burst_s + self.isi_s) * 1000.0).round() as u64
    }
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams::NO_ISI
    }
}

pub fn pattern_duration(pattern: &StrokePattern, t: &TimingParams) -> f64 {
    let n = pattern.len() as f64;
    n * t.burst_s + (n - 1.0) * t.isi_s
}
