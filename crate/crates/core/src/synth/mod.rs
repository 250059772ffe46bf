//! Sample-accurate waveform rendering of stroke patterns.
//!
//! A burst is a sine at the cue's carrier scaled by the drive level. Rough
//! cues multiply it by an on/off square envelope at the modulation rate.
//! Raised-cosine ramps of `ramp_s` shape the burst onset and offset; the
//! modulation edges use transitions of the same width centered on the edge,
//! which keeps the on-fraction of the envelope at the nominal duty.

mod schedule;
mod wav;

pub use schedule::{compile_schedule, Action, Command, DeviceSchedule, ScheduleError, ScheduleEvent};
pub use wav::{decode_wav, encode_wav, export_wav, read_wav, WavError};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{Cue, CueMap};
use crate::pattern::{pattern_duration, GridGeometry, ReferenceFrame, StrokePattern, TimingParams};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("sample rate {sample_rate_hz} Hz is below 4x the {carrier_hz} Hz carrier")]
    SampleRate { sample_rate_hz: u32, carrier_hz: f64 },
    #[error("invalid render parameters: {0}")]
    Params(String),
    #[error("invalid cue: {0}")]
    Cue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub sample_rate_hz: u32,
    pub ramp_s: f64,
    /// Fraction of each modulation period spent "on". Each period starts on.
    pub mod_duty: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams { sample_rate_hz: 48_000, ramp_s: 0.005, mod_duty: 0.5 }
    }
}

impl RenderParams {
    fn check(&self, cue: &Cue, t: &TimingParams) -> Result<(), RenderError> {
        cue.validate().map_err(RenderError::Cue)?;
        if (self.sample_rate_hz as f64) < 4.0 * cue.carrier_hz {
            return Err(RenderError::SampleRate { sample_rate_hz: self.sample_rate_hz, carrier_hz: cue.carrier_hz });
        }
        if !(self.ramp_s >= 0.0 && self.ramp_s <= t.burst_s / 2.0) {
            return Err(RenderError::Params(format!("ramp_s {} outside [0, burst_s/2]", self.ramp_s)));
        }
        if !(self.mod_duty > 0.0 && self.mod_duty < 1.0) {
            return Err(RenderError::Params(format!("mod_duty {} outside (0, 1)", self.mod_duty)));
        }
        Ok(())
    }

    fn samples(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate_hz as f64).round() as usize
    }
}

/// Multichannel sampled waveform, samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveBuffer {
    pub sample_rate_hz: u32,
    channels: Vec<Vec<f32>>,
}

impl WaveBuffer {
    pub fn zeros(n_channels: usize, samples_per_channel: usize, sample_rate_hz: u32) -> Self {
        WaveBuffer { sample_rate_hz, channels: vec![vec![0.0; samples_per_channel]; n_channels] }
    }

    /// Panics if the channels differ in length.
    pub fn from_channels(channels: Vec<Vec<f32>>, sample_rate_hz: u32) -> Self {
        if let Some(first) = channels.first() {
            assert!(channels.iter().all(|c| c.len() == first.len()), "channels must be equal length");
        }
        WaveBuffer { sample_rate_hz, channels }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn duration_s(&self) -> f64 {
        self.samples_per_channel() as f64 / self.sample_rate_hz as f64
    }

    pub fn peak(&self) -> f32 {
        self.channels.iter().flatten().fold(0.0f32, |m, &x| m.max(x.abs()))
    }

    /// Sum of squared samples over all channels.
    pub fn energy(&self) -> f64 {
        self.channels.iter().flatten().map(|&x| (x as f64) * (x as f64)).sum()
    }
}

fn raised_cosine(x: f64) -> f64 {
    0.5 * (1.0 - (PI * x.clamp(0.0, 1.0)).cos())
}

/// Gain at time `t` into a burst of length `len` with onset/offset ramps.
fn burst_ramp(t: f64, len: f64, ramp: f64) -> f64 {
    if ramp <= 0.0 {
        return 1.0;
    }
    if t < ramp {
        raised_cosine(t / ramp)
    } else if t > len - ramp {
        raised_cosine((len - t) / ramp)
    } else {
        1.0
    }
}

/// Square on/off envelope with smoothed edges, starting in the "on" half.
fn mod_envelope(t: f64, mod_hz: f64, duty: f64, ramp: f64) -> f64 {
    let period = 1.0 / mod_hz;
    let on = duty * period;
    let half = (ramp / 2.0).min(on / 2.0).min((period - on) / 2.0);
    let tau = t.rem_euclid(period);
    if half <= 0.0 {
        return if tau < on { 1.0 } else { 0.0 };
    }
    if tau < half {
        // second half of the rising edge centered on the period start
        raised_cosine(0.5 + tau / (2.0 * half))
    } else if tau < on - half {
        1.0
    } else if tau < on + half {
        raised_cosine(1.0 - (tau - (on - half)) / (2.0 * half))
    } else if tau < period - half {
        0.0
    } else {
        raised_cosine((tau - (period - half)) / (2.0 * half))
    }
}

fn burst_samples(cue: &Cue, n: usize, rp: &RenderParams) -> Vec<f32> {
    let sr = rp.sample_rate_hz as f64;
    let len = n as f64 / sr;
    let ramp = rp.ramp_s.min(len / 2.0);
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let mut g = cue.drive_level * burst_ramp(t, len, ramp);
            if cue.rough {
                g *= mod_envelope(t, cue.mod_hz, rp.mod_duty, rp.ramp_s);
            }
            (g * (2.0 * PI * cue.carrier_hz * t).sin()) as f32
        })
        .collect()
}

/// One burst of `cue`, as a single-channel buffer of `burst_s` seconds.
pub fn render_burst(cue: &Cue, t: &TimingParams, rp: &RenderParams) -> Result<WaveBuffer, RenderError> {
    rp.check(cue, t)?;
    let n = rp.samples(t.burst_s);
    Ok(WaveBuffer::from_channels(vec![burst_samples(cue, n, rp)], rp.sample_rate_hz))
}

/// Four-channel rendering of a whole pattern. Burst `k` occupies
/// `[k*(burst+isi), k*(burst+isi)+burst)` on the channel of its corner.
pub fn render_pattern(
    pattern: &StrokePattern,
    cues: &CueMap,
    rf: ReferenceFrame,
    t: &TimingParams,
    rp: &RenderParams,
    geom: &GridGeometry,
) -> Result<WaveBuffer, RenderError> {
    t.validate().map_err(|e| RenderError::Params(e.to_string()))?;
    let total = rp.samples(pattern_duration(pattern, t));
    let burst_len = rp.samples(t.burst_s);
    let stride = t.burst_s + t.isi_s;
    let mut buf = WaveBuffer::zeros(4, total, rp.sample_rate_hz);
    for (k, &logical) in pattern.corners().iter().enumerate() {
        let physical = rf.to_physical(logical);
        let cue = cues.cue(physical);
        rp.check(cue, t)?;
        let ch = geom.channel_of_physical(physical) as usize;
        let start = rp.samples(k as f64 * stride);
        let end = (start + burst_len).min(total);
        let burst = burst_samples(cue, end - start, rp);
        buf.channels[ch][start..end].copy_from_slice(&burst);
    }
    Ok(buf)
}

/// Render a device schedule back into the commanded waveform, using the cue
/// parameters carried by each ON event.
pub fn render_schedule(schedule: &DeviceSchedule, rp: &RenderParams) -> Result<WaveBuffer, RenderError> {
    let total = rp.samples(schedule.duration_ms() as f64 / 1000.0);
    let mut buf = WaveBuffer::zeros(4, total, rp.sample_rate_hz);
    for (on, off) in schedule.bursts() {
        let cue = on.cmd.to_cue();
        let burst_s = (off.t_ms - on.t_ms) as f64 / 1000.0;
        rp.check(&cue, &TimingParams { burst_s, isi_s: 0.0 })?;
        let start = rp.samples(on.t_ms as f64 / 1000.0);
        let end = rp.samples(off.t_ms as f64 / 1000.0).min(total);
        let burst = burst_samples(&cue, end - start, rp);
        buf.channels[on.cmd.channel as usize][start..end].copy_from_slice(&burst);
    }
    Ok(buf)
}
