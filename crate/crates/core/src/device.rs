//! Delivering device schedules to output sinks.
//!
//! The serial protocol is one-way and fire-and-forget: the host streams one
//! fixed-size frame per schedule event at the event's timestamp.
//!
//! ```text
//! byte  0     magic 0xA5
//!       1     sequence number (mod 256)
//!       2     channel 0..=3
//!       3     flags: bit 0 = ON, bit 1 = rough
//!       4..6  carrier Hz, u16 LE
//!       6     drive level 0..=255
//!       7..9  modulation rate x10, u16 LE (125 = 12.5 Hz)
//!       9     XOR of bytes 0..9
//! ```

use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::synth::{export_wav, render_schedule, Action, Command, DeviceSchedule, RenderError, RenderParams, WavError};

pub const FRAME_MAGIC: u8 = 0xA5;
pub const FRAME_LEN: usize = 10;
pub const SERIAL_BAUD: u32 = 115_200;

const FLAG_ON: u8 = 0x01;
const FLAG_ROUGH: u8 = 0x02;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame is {0} bytes, expected {FRAME_LEN}")]
    Short(usize),
    #[error("bad magic byte {0:#04x}")]
    BadMagic(u8),
    #[error("checksum mismatch: computed {computed:#04x}, frame has {found:#04x}")]
    BadChecksum { computed: u8, found: u8 },
    #[error("channel {0} out of range")]
    BadChannel(u8),
    #[error("unknown flag bits {0:#04x}")]
    BadFlags(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireFrame {
    pub seq: u8,
    pub cmd: Command,
}

fn xor(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

/// Panics if `cmd.channel > 3`; schedules never carry such channels.
pub fn encode_frame(frame: &WireFrame) -> [u8; FRAME_LEN] {
    let cmd = &frame.cmd;
    assert!(cmd.channel <= 3, "channel {} out of range", cmd.channel);
    let mut flags = 0;
    if cmd.action == Action::On {
        flags |= FLAG_ON;
    }
    if cmd.rough {
        flags |= FLAG_ROUGH;
    }
    let carrier = cmd.carrier_hz.to_le_bytes();
    let modulation = cmd.mod_hz_x10.to_le_bytes();
    let mut out = [
        FRAME_MAGIC,
        frame.seq,
        cmd.channel,
        flags,
        carrier[0],
        carrier[1],
        cmd.level,
        modulation[0],
        modulation[1],
        0,
    ];
    out[9] = xor(&out[..9]);
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<WireFrame, FrameError> {
    if bytes.len() != FRAME_LEN {
        return Err(FrameError::Short(bytes.len()));
    }
    if bytes[0] != FRAME_MAGIC {
        return Err(FrameError::BadMagic(bytes[0]));
    }
    let computed = xor(&bytes[..9]);
    if computed != bytes[9] {
        return Err(FrameError::BadChecksum { computed, found: bytes[9] });
    }
    if bytes[2] > 3 {
        return Err(FrameError::BadChannel(bytes[2]));
    }
    let flags = bytes[3];
    if flags & !(FLAG_ON | FLAG_ROUGH) != 0 {
        return Err(FrameError::BadFlags(flags));
    }
    Ok(WireFrame {
        seq: bytes[1],
        cmd: Command {
            channel: bytes[2],
            action: if flags & FLAG_ON != 0 { Action::On } else { Action::Off },
            carrier_hz: u16::from_le_bytes([bytes[4], bytes[5]]),
            rough: flags & FLAG_ROUGH != 0,
            level: bytes[6],
            mod_hz_x10: u16::from_le_bytes([bytes[7], bytes[8]]),
        },
    })
}

/// Pull every valid frame out of a byte stream, resynchronizing on the magic
/// byte after garbage or corrupt frames.
pub fn decode_stream(bytes: &[u8]) -> Vec<WireFrame> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + FRAME_LEN <= bytes.len() {
        if bytes[pos] == FRAME_MAGIC {
            if let Ok(f) = decode_frame(&bytes[pos..pos + FRAME_LEN]) {
                out.push(f);
                pos += FRAME_LEN;
                continue;
            }
        }
        pos += 1;
    }
    out
}

/// Serial transport. Any byte writer works; [`SerialSink::open`] configures a
/// tty at 115200 8N1, raw mode.
pub struct SerialSink {
    port: Box<dyn Write + Send>,
}

impl SerialSink {
    #[cfg(unix)]
    pub fn open(path: &str) -> io::Result<Self> {
        use std::os::fd::AsRawFd;
        use std::os::unix::fs::OpenOptionsExt;

        let file = std::fs::OpenOptions::new()
            .read(true)
            .write(true)
            .custom_flags(libc::O_NOCTTY)
            .open(path)?;
        let fd = file.as_raw_fd();
        // SAFETY: `fd` is a valid open descriptor for the lifetime of `file`,
        // and `tio` is fully initialized by tcgetattr before use.
        unsafe {
            let mut tio: libc::termios = std::mem::zeroed();
            if libc::tcgetattr(fd, &mut tio) != 0 {
                return Err(io::Error::last_os_error());
            }
            libc::cfmakeraw(&mut tio);
            tio.c_cflag &= !(libc::PARENB | libc::CSTOPB | libc::CSIZE | libc::CRTSCTS);
            tio.c_cflag |= libc::CS8 | libc::CLOCAL | libc::CREAD;
            if libc::cfsetispeed(&mut tio, libc::B115200) != 0 || libc::cfsetospeed(&mut tio, libc::B115200) != 0 {
                return Err(io::Error::last_os_error());
            }
            if libc::tcsetattr(fd, libc::TCSANOW, &tio) != 0 {
                return Err(io::Error::last_os_error());
            }
        }
        Ok(SerialSink { port: Box::new(file) })
    }

    #[cfg(not(unix))]
    pub fn open(_path: &str) -> io::Result<Self> {
        Err(io::Error::new(io::ErrorKind::Unsupported, "serial ports are only supported on unix"))
    }

    pub fn from_writer(w: impl Write + Send + 'static) -> Self {
        SerialSink { port: Box::new(w) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualRecord {
    pub at: Instant,
    pub frame: WireFrame,
}

/// Records what would have been sent, with wall-clock send times.
#[derive(Debug, Default)]
pub struct VirtualSink {
    records: Vec<VirtualRecord>,
}

impl VirtualSink {
    pub fn records(&self) -> &[VirtualRecord] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<VirtualRecord> {
        std::mem::take(&mut self.records)
    }
}

/// Renders the schedule offline into a WAV file instead of driving hardware.
#[derive(Debug, Clone)]
pub struct WavFileSink {
    pub path: PathBuf,
    pub render: RenderParams,
}

pub enum Sink {
    Serial(SerialSink),
    WavFile(WavFileSink),
    Virtual(VirtualSink),
}

impl Sink {
    pub fn virtual_sink() -> Sink {
        Sink::Virtual(VirtualSink::default())
    }

    pub fn as_virtual(&self) -> Option<&VirtualSink> {
        match self {
            Sink::Virtual(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_virtual_mut(&mut self) -> Option<&mut VirtualSink> {
        match self {
            Sink::Virtual(v) => Some(v),
            _ => None,
        }
    }

    fn send(&mut self, frame: &WireFrame) -> io::Result<()> {
        match self {
            Sink::Serial(s) => {
                s.port.write_all(&encode_frame(frame))?;
                s.port.flush()
            }
            Sink::Virtual(v) => {
                v.records.push(VirtualRecord { at: Instant::now(), frame: *frame });
                Ok(())
            }
            Sink::WavFile(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlayOptions {
    pub timing_tolerance_ms: u64,
}

impl Default for PlayOptions {
    fn default() -> Self {
        PlayOptions { timing_tolerance_ms: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventTiming {
    pub t_ms: u64,
    pub lateness: Duration,
}

#[derive(Debug, Clone)]
pub struct PlaybackReport {
    pub started: Instant,
    pub finished: Instant,
    pub events: Vec<EventTiming>,
    /// Indices of events sent later than the tolerance. Not fatal.
    pub overruns: Vec<usize>,
}

impl PlaybackReport {
    pub fn max_lateness(&self) -> Duration {
        self.events.iter().map(|e| e.lateness).max().unwrap_or_default()
    }
}

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("sink write failed at event {index}: {source} (all-off {})", if *all_off_sent { "sent" } else { "failed" })]
    Sink {
        index: usize,
        source: io::Error,
        all_off_sent: bool,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Wav(#[from] WavError),
}

fn wait_until(due: Instant) {
    loop {
        let now = Instant::now();
        if now >= due {
            return;
        }
        let left = due - now;
        if left > Duration::from_millis(2) {
            std::thread::sleep(left - Duration::from_millis(1));
        } else {
            std::hint::spin_loop();
        }
    }
}

/// Emit every event at its timestamp, relative to the moment `play` starts.
/// Blocks until the final OFF has been sent.
pub fn play(schedule: &DeviceSchedule, sink: &mut Sink, opts: PlayOptions) -> Result<PlaybackReport, PlayError> {
    let started = Instant::now();
    if let Sink::WavFile(w) = sink {
        let buf = render_schedule(schedule, &w.render)?;
        export_wav(&buf, &w.path)?;
        let events = schedule.events().iter().map(|e| EventTiming { t_ms: e.t_ms, lateness: Duration::ZERO }).collect();
        return Ok(PlaybackReport { started, finished: Instant::now(), events, overruns: Vec::new() });
    }

    let tolerance = Duration::from_millis(opts.timing_tolerance_ms);
    let mut events = Vec::with_capacity(schedule.len());
    let mut overruns = Vec::new();
    for (i, e) in schedule.events().iter().enumerate() {
        let due = started + Duration::from_millis(e.t_ms);
        wait_until(due);
        let frame = WireFrame { seq: (i % 256) as u8, cmd: e.cmd };
        if let Err(source) = sink.send(&frame) {
            let all_off_sent = (0..4u8).all(|ch| {
                let off = WireFrame { seq: ((i + 1 + ch as usize) % 256) as u8, cmd: Command::all_off(ch) };
                sink.send(&off).is_ok()
            });
            return Err(PlayError::Sink { index: i, source, all_off_sent });
        }
        let lateness = Instant::now().saturating_duration_since(due);
        if lateness > tolerance {
            overruns.push(i);
        }
        events.push(EventTiming { t_ms: e.t_ms, lateness });
    }
    Ok(PlaybackReport { started, finished: Instant::now(), events, overruns })
}

/// Run [`play`] on a dedicated thread, holding the sink for the whole
/// playback.
pub fn spawn_play(
    schedule: DeviceSchedule,
    sink: Arc<Mutex<Sink>>,
    opts: PlayOptions,
) -> JoinHandle<Result<PlaybackReport, PlayError>> {
    std::thread::Builder::new()
        .name("tactokit-playback".into())
        .spawn(move || {
            let mut guard = sink.lock().unwrap_or_else(|p| p.into_inner());
            play(&schedule, &mut guard, opts)
        })
        .expect("spawn playback thread")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cue::{assign_cues, AxisConfig, Cue, Method};
    use crate::pattern::{GridGeometry, PatternSet, ReferenceFrame, TimingParams};
    use crate::synth::{compile_schedule, ScheduleEvent};

    fn on_ch2() -> WireFrame {
        WireFrame { seq: 7, cmd: Command::from_cue(2, Action::On, &Cue::smooth(170.0)) }
    }

    #[test]
    fn frame_layout() {
        let bytes = encode_frame(&on_ch2());
        assert_eq!(bytes.len(), 10);
        assert_eq!(bytes[0], 0xA5);
        assert_eq!(bytes[2], 2);
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 170);
        assert_eq!(bytes[6], 255);
        assert_eq!(bytes[9], bytes[..9].iter().fold(0, |a, b| a ^ b));
        assert_eq!(decode_frame(&bytes).unwrap(), on_ch2());

        let rough = WireFrame { seq: 0, cmd: Command::from_cue(1, Action::On, &Cue::rough(300.0, 12.5)) };
        let bytes = encode_frame(&rough);
        assert_eq!(u16::from_le_bytes([bytes[7], bytes[8]]), 125);
    }

    #[test]
    fn decode_errors() {
        let good = encode_frame(&on_ch2());
        assert_eq!(decode_frame(&good[..9]), Err(FrameError::Short(9)));
        let mut bad = good;
        bad[0] = 0x5A;
        assert!(matches!(decode_frame(&bad), Err(FrameError::BadMagic(0x5A))));
        let mut bad = good;
        bad[4] ^= 0x01;
        assert!(matches!(decode_frame(&bad), Err(FrameError::BadChecksum { .. })));
        let mut bad = good;
        bad[2] = 9;
        bad[9] = xor(&bad[..9]);
        assert_eq!(decode_frame(&bad), Err(FrameError::BadChannel(9)));
        let mut bad = good;
        bad[3] = 0x80;
        bad[9] = xor(&bad[..9]);
        assert_eq!(decode_frame(&bad), Err(FrameError::BadFlags(0x80)));
    }

    #[test]
    fn stream_resync() {
        let a = encode_frame(&on_ch2());
        let b = encode_frame(&WireFrame { seq: 8, cmd: Command::all_off(3) });
        let mut stream = vec![0x00, 0xA5, 0x13];
        stream.extend_from_slice(&a);
        stream.extend_from_slice(&[0xA5; 3]);
        stream.extend_from_slice(&b);
        let frames = decode_stream(&stream);
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].cmd.channel, 3);
    }

    #[test]
    fn empty_schedule_plays_nothing() {
        let mut sink = Sink::virtual_sink();
        let report = play(&DeviceSchedule::default(), &mut sink, PlayOptions::default()).unwrap();
        assert!(report.events.is_empty());
        assert!(sink.as_virtual().unwrap().records().is_empty());
    }

    struct FailAfter(usize);

    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            if self.0 == 0 {
                return Err(io::Error::new(io::ErrorKind::BrokenPipe, "unplugged"));
            }
            self.0 -= 1;
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_aborts() {
        let set = PatternSet::builtin("tps24").unwrap();
        let cues = assign_cues(Method::Baseline, AxisConfig::default());
        let timing = TimingParams { burst_s: 0.01, isi_s: 0.0 };
        let s = compile_schedule(&set.patterns()[0], &cues, ReferenceFrame::Rf1, &timing, &GridGeometry::default());
        let mut sink = Sink::Serial(SerialSink::from_writer(FailAfter(2)));
        let err = play(&s, &mut sink, PlayOptions::default()).unwrap_err();
        assert!(matches!(err, PlayError::Sink { index: 2, all_off_sent: false, .. }));
    }

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn serial_bytes_decode_back_to_schedule() {
        let set = PatternSet::builtin("edgewrite_alnum").unwrap();
        let cues = assign_cues(Method::FourHetero, AxisConfig::default());
        let timing = TimingParams { burst_s: 0.005, isi_s: 0.001 };
        let s = compile_schedule(set.get("7").unwrap(), &cues, ReferenceFrame::Rf1, &timing, &GridGeometry::default());
        let wire = Shared::default();
        let mut sink = Sink::Serial(SerialSink::from_writer(wire.clone()));
        play(&s, &mut sink, PlayOptions::default()).unwrap();
        let bytes = wire.0.lock().unwrap().clone();
        assert_eq!(bytes.len(), s.len() * FRAME_LEN);
        let cmds: Vec<Command> = decode_stream(&bytes).into_iter().map(|f| f.cmd).collect();
        let expected: Vec<Command> = s.events().iter().map(|e: &ScheduleEvent| e.cmd).collect();
        assert_eq!(cmds, expected);
    }

    #[test]
    fn wav_sink_renders_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let set = PatternSet::builtin("tps24").unwrap();
        let cues = assign_cues(Method::TwoHetero, AxisConfig::default());
        let s = compile_schedule(&set.patterns()[0], &cues, ReferenceFrame::Rf1, &TimingParams::NO_ISI, &GridGeometry::default());
        let mut sink = Sink::WavFile(WavFileSink { path: path.clone(), render: RenderParams::default() });
        play(&s, &mut sink, PlayOptions::default()).unwrap();
        let buf = crate::synth::read_wav(&path).unwrap();
        assert_eq!(buf.samples_per_channel(), 72_000);
    }
}
