use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cue::{Cue, CueMap};
use crate::pattern::{GridGeometry, ReferenceFrame, StrokePattern, TimingParams};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("events out of order at index {0}")]
    Unordered(usize),
    #[error("channel {channel} switched {action} twice in a row at index {index}")]
    Alternation { channel: u8, action: Action, index: usize },
    #[error("channel {0} left on at end of schedule")]
    Dangling(u8),
    #[error("channel {0} out of range")]
    Channel(u8),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "OFF")]
    Off,
    #[serde(rename = "ON")]
    On,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::On => "ON",
            Action::Off => "OFF",
        })
    }
}

/// What a tactor should do, in the integer units the wire protocol carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Command {
    #[serde(rename = "ch")]
    pub channel: u8,
    pub action: Action,
    pub carrier_hz: u16,
    pub rough: bool,
    #[serde(rename = "mod_hz", serialize_with = "ser_tenths", deserialize_with = "de_tenths")]
    pub mod_hz_x10: u16,
    /// Drive level, 0..=255 full scale.
    pub level: u8,
}

fn ser_tenths<S: Serializer>(v: &u16, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*v as f64 / 10.0)
}

fn de_tenths<'de, D: Deserializer<'de>>(d: D) -> Result<u16, D::Error> {
    let hz = f64::deserialize(d)?;
    let x10 = (hz * 10.0).round();
    if !(0.0..=u16::MAX as f64).contains(&x10) {
        return Err(serde::de::Error::custom(format!("mod_hz {hz} out of range")));
    }
    Ok(x10 as u16)
}

impl Command {
    pub fn from_cue(channel: u8, action: Action, cue: &Cue) -> Command {
        Command {
            channel,
            action,
            carrier_hz: cue.carrier_hz.round().clamp(0.0, u16::MAX as f64) as u16,
            rough: cue.rough,
            mod_hz_x10: if cue.rough { (cue.mod_hz * 10.0).round().clamp(0.0, u16::MAX as f64) as u16 } else { 0 },
            level: (cue.drive_level.clamp(0.0, 1.0) * 255.0).round() as u8,
        }
    }

    pub fn to_cue(&self) -> Cue {
        let mut cue = if self.rough {
            Cue::rough(self.carrier_hz as f64, self.mod_hz_x10 as f64 / 10.0)
        } else {
            Cue::smooth(self.carrier_hz as f64)
        };
        cue.drive_level = self.level as f64 / 255.0;
        cue
    }

    pub fn all_off(channel: u8) -> Command {
        Command { channel, action: Action::Off, carrier_hz: 0, rough: false, mod_hz_x10: 0, level: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    /// Milliseconds from schedule start.
    pub t_ms: u64,
    #[serde(flatten)]
    pub cmd: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DeviceSchedule {
    events: Vec<ScheduleEvent>,
}

impl DeviceSchedule {
    /// Checks ordering, per-channel ON/OFF alternation and that every channel
    /// ends OFF.
    pub fn new(events: Vec<ScheduleEvent>) -> Result<Self, ScheduleError> {
        let mut on = [false; 4];
        for (i, e) in events.iter().enumerate() {
            if i > 0 && events[i - 1].t_ms > e.t_ms {
                return Err(ScheduleError::Unordered(i));
            }
            let ch = e.cmd.channel;
            if ch > 3 {
                return Err(ScheduleError::Channel(ch));
            }
            let want_on = e.cmd.action == Action::On;
            if on[ch as usize] == want_on {
                return Err(ScheduleError::Alternation { channel: ch, action: e.cmd.action, index: i });
            }
            on[ch as usize] = want_on;
        }
        if let Some(ch) = on.iter().position(|&x| x) {
            return Err(ScheduleError::Dangling(ch as u8));
        }
        Ok(DeviceSchedule { events })
    }

    pub fn events(&self) -> &[ScheduleEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time of the final event.
    pub fn duration_ms(&self) -> u64 {
        self.events.last().map_or(0, |e| e.t_ms)
    }

    /// Matched (ON, OFF) pairs in onset order.
    pub fn bursts(&self) -> Vec<(ScheduleEvent, ScheduleEvent)> {
        let mut open: [Option<ScheduleEvent>; 4] = [None; 4];
        let mut out = Vec::new();
        for e in &self.events {
            let ch = e.cmd.channel as usize;
            match e.cmd.action {
                Action::On => open[ch] = Some(*e),
                Action::Off => {
                    if let Some(on) = open[ch].take() {
                        out.push((on, *e));
                    }
                }
            }
        }
        out.sort_by_key(|(on, _)| on.t_ms);
        out
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, ScheduleError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|source| ScheduleError::Json { line: i + 1, source })?;
            events.push(e);
        }
        DeviceSchedule::new(events)
    }
}

/// One ON and one OFF per burst. ON at `k*(burst+isi)`, OFF `burst` later.
/// Simultaneous events are ordered OFF before ON.
pub fn compile_schedule(
    pattern: &StrokePattern,
    cues: &CueMap,
    rf: ReferenceFrame,
    t: &TimingParams,
    geom: &GridGeometry,
) -> DeviceSchedule {
    let stride = t.stride_ms();
    let burst = t.burst_ms();
    let mut events = Vec::with_capacity(pattern.len() * 2);
    for (k, &logical) in pattern.corners().iter().enumerate() {
        let physical = rf.to_physical(logical);
        let ch = geom.channel_of_physical(physical);
        let cue = cues.cue(physical);
        let on = k as u64 * stride;
        events.push(ScheduleEvent { t_ms: on, cmd: Command::from_cue(ch, Action::On, cue) });
        events.push(ScheduleEvent { t_ms: on + burst, cmd: Command::from_cue(ch, Action::Off, cue) });
    }
    events.sort_by_key(|e| (e.t_ms, e.cmd.action));
    DeviceSchedule::new(events).expect("compiled schedules are well formed")
}
