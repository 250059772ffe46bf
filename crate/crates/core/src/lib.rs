//! Heterogeneous-cue spatiotemporal tactile patterns for a 2x2 wrist-worn
//! tactor array: pattern sets, per-tactor cue assignment, waveform and
//! device-schedule rendering, a perceptual confusion simulator, recognition
//! analytics and the recognition-experiment session engine.

pub mod analysis;
pub mod cue;
pub mod device;
pub mod experiment;
pub mod pattern;
pub mod perception;
pub mod synth;

pub use cue::{assign_cues, cue_distinctness, AxisConfig, Cue, CueMap, GridAxis, Method};
pub use pattern::{
    enumerate_three_point_strokes, load_pattern_set, map_to_channels, pattern_duration, Corner, GridGeometry,
    PatternError, PatternSet, ReferenceFrame, StrokePattern, TimingParams,
};
pub use perception::{
    burst_confusion, decode, exact_confusion, monte_carlo_confusion, ConfusionKernel, Decoder, PredictedConfusion,
};
pub use analysis::{
    build_confusion, exclude_outliers, parse_log, rt_stats, ConfusionMatrix, Phase, Posture,
    Study, TrialRecord,
};
