//! Per-tactor vibration cues for the Baseline, 2-Hetero and 4-Hetero methods.
//!
//! Cue maps are keyed by *physical* corner (device frame), so a cue stays
//! attached to its tactor regardless of the reference frame a pattern is
//! shown in.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pattern::Corner;

/// Resonance carrier and the default palette.
pub const LOW_CARRIER_HZ: f64 = 170.0;
pub const HIGH_CARRIER_HZ: f64 = 300.0;
/// On/off amplitude modulation rate that makes a cue feel rough.
pub const ROUGH_MOD_HZ: f64 = 12.5;

/// One tactor's vibration identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub carrier_hz: f64,
    pub rough: bool,
    /// Modulation rate; ignored when `rough` is false.
    #[serde(default)]
    pub mod_hz: f64,
    /// Normalized amplitude in `0..=1`.
    #[serde(default = "full_scale")]
    pub drive_level: f64,
    /// Nominal motor drive voltage. Metadata only.
    #[serde(default)]
    pub nominal_volts: Option<f64>,
}

fn full_scale() -> f64 {
    1.0
}

impl Cue {
    pub fn smooth(carrier_hz: f64) -> Cue {
        Cue { carrier_hz, rough: false, mod_hz: 0.0, drive_level: 1.0, nominal_volts: nominal_volts(carrier_hz) }
    }

    pub fn rough(carrier_hz: f64, mod_hz: f64) -> Cue {
        Cue { rough: true, mod_hz, ..Cue::smooth(carrier_hz) }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(format!("carrier_hz must be > 0, got {}", self.carrier_hz));
        }
        if self.rough && !(self.mod_hz > 0.0 && self.mod_hz < self.carrier_hz) {
            return Err(format!("mod_hz must lie in (0, carrier_hz), got {}", self.mod_hz));
        }
        if !(0.0..=1.0).contains(&self.drive_level) {
            return Err(format!("drive_level must lie in [0, 1], got {}", self.drive_level));
        }
        Ok(())
    }

    /// Perceptual identity: same carrier and same roughness.
    pub fn same_identity(&self, other: &Cue) -> bool {
        cue_distinctness(self, other) == 0
    }
}

fn nominal_volts(carrier_hz: f64) -> Option<f64> {
    if carrier_hz == LOW_CARRIER_HZ {
        Some(5.0)
    } else if carrier_hz == HIGH_CARRIER_HZ {
        Some(9.0)
    } else {
        None
    }
}

impl fmt::Display for Cue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.carrier_hz)?;
        if self.rough {
            write!(f, " rough ({} Hz on/off)", self.mod_hz)?;
        } else {
            f.write_str(" smooth")?;
        }
        write!(f, " level {:.2}", self.drive_level)?;
        if let Some(v) = self.nominal_volts {
            write!(f, " [{v} V]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "2-hetero")]
    TwoHetero,
    #[serde(rename = "4-hetero")]
    FourHetero,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Baseline, Method::TwoHetero, Method::FourHetero];

    pub fn distinct_cues(self) -> usize {
        match self {
            Method::Baseline => 1,
            Method::TwoHetero => 2,
            Method::FourHetero => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::TwoHetero => "2-hetero",
            Method::FourHetero => "4-hetero",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Method::Baseline),
            "2-hetero" | "2hetero" | "twohetero" => Ok(Method::TwoHetero),
            "4-hetero" | "4hetero" | "fourhetero" => Ok(Method::FourHetero),
            _ => Err(format!("unknown method `{s}` (baseline, 2-hetero, 4-hetero)")),
        }
    }
}

/// Axis of the device-frame grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAxis {
    /// Top-bottom: corners differ in row.
    Vertical,
    /// Left-right: corners differ in column.
    Horizontal,
}

impl GridAxis {
    pub fn coordinate(self, c: Corner) -> u8 {
        match self {
            GridAxis::Vertical => c.row(),
            GridAxis::Horizontal => c.col(),
        }
    }

    pub fn other(self) -> GridAxis {
        match self {
            GridAxis::Vertical => GridAxis::Horizontal,
            GridAxis::Horizontal => GridAxis::Vertical,
        }
    }

    /// The corner reached by flipping `c` along this axis.
    pub fn neighbor(self, c: Corner) -> Corner {
        match self {
            GridAxis::Vertical => Corner::from_row_col(1 - c.row(), c.col()),
            GridAxis::Horizontal => Corner::from_row_col(c.row(), 1 - c.col()),
        }
    }
}

/// How the grid sits on the wrist.
///
/// With the device worn on the dorsal left wrist and the hand-side edge as
/// the top, the vertical axis runs along the forearm and row 0 is distal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisConfig {
    pub longitudinal: GridAxis,
    /// Longitudinal coordinate (0 or 1) whose tactors are rough.
    pub rough_side: u8,
    /// Transverse coordinate (0 or 1) whose tactors use the high carrier.
    pub high_carrier_side: u8,
}

impl Default for AxisConfig {
    fn default() -> Self {
        AxisConfig { longitudinal: GridAxis::Vertical, rough_side: 0, high_carrier_side: 1 }
    }
}

impl AxisConfig {
    pub fn transverse(&self) -> GridAxis {
        self.longitudinal.other()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueMap {
    pub method: Method,
    pub axis: AxisConfig,
    by_corner: [Cue; 4],
}

impl CueMap {
    pub fn cue(&self, physical: Corner) -> &Cue {
        &self.by_corner[physical.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Corner, &Cue)> {
        Corner::ALL.into_iter().zip(self.by_corner.iter())
    }

    /// Number of perceptually distinct cues across the four tactors.
    pub fn distinct_count(&self) -> usize {
        let mut reps: Vec<&Cue> = Vec::new();
        for c in &self.by_corner {
            if !reps.iter().any(|r| r.same_identity(c)) {
                reps.push(c);
            }
        }
        reps.len()
    }

    /// Replace individual tactor cues (the `cue_overrides` config key).
    pub fn with_overrides(mut self, overrides: &BTreeMap<Corner, Cue>) -> Result<Self, String> {
        for (corner, cue) in overrides {
            cue.validate().map_err(|e| format!("{corner}: {e}"))?;
            self.by_corner[corner.index()] = *cue;
        }
        Ok(self)
    }

    /// Scale every tactor's drive level by a per-corner gain, clamped to 1.
    pub fn with_gains(mut self, gains: &BTreeMap<Corner, f64>) -> Self {
        for (corner, g) in gains {
            let cue = &mut self.by_corner[corner.index()];
            cue.drive_level = (cue.drive_level * g).clamp(0.0, 1.0);
        }
        self
    }
}

pub fn assign_cues(method: Method, axis: AxisConfig) -> CueMap {
    let by_corner = Corner::ALL.map(|c| {
        let rough = axis.longitudinal.coordinate(c) == axis.rough_side;
        let high = axis.transverse().coordinate(c) == axis.high_carrier_side;
        match method {
            Method::Baseline => Cue::smooth(LOW_CARRIER_HZ),
            Method::TwoHetero if rough => Cue::rough(LOW_CARRIER_HZ, ROUGH_MOD_HZ),
            Method::TwoHetero => Cue::smooth(LOW_CARRIER_HZ),
            Method::FourHetero => {
                let carrier = if high { HIGH_CARRIER_HZ } else { LOW_CARRIER_HZ };
                if rough {
                    Cue::rough(carrier, ROUGH_MOD_HZ)
                } else {
                    Cue::smooth(carrier)
                }
            }
        }
    });
    CueMap { method, axis, by_corner }
}

/// Number of perceptual dimensions (carrier class, roughness) on which two
/// cues differ.
pub fn cue_distinctness(a: &Cue, b: &Cue) -> u8 {
    let carrier = (a.carrier_hz - b.carrier_hz).abs() > 1e-9;
    let rough = a.rough != b.rough;
    carrier as u8 + rough as u8
}
