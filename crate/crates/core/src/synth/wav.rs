//! 16-bit PCM RIFF/WAVE, one channel per tactor.

use std::path::Path;

use thiserror::Error;

use super::WaveBuffer;

const HEADER_LEN: usize = 44;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("truncated file")]
    Truncated,
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn quantize(x: f32) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

pub fn encode_wav(buf: &WaveBuffer) -> Vec<u8> {
    let channels = buf.n_channels() as u16;
    let frames = buf.samples_per_channel();
    let data_len = (frames * channels as usize * 2) as u32;
    let block_align = channels * 2;
    let byte_rate = buf.sample_rate_hz * block_align as u32;

    let mut out = Vec::with_capacity(HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..frames {
        for ch in buf.channels() {
            out.extend_from_slice(&quantize(ch[i]).to_le_bytes());
        }
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> Result<u16, WavError> {
    b.get(at..at + 2).map(|s| u16::from_le_bytes([s[0], s[1]])).ok_or(WavError::Truncated)
}

fn u32_at(b: &[u8], at: usize) -> Result<u32, WavError> {
    b.get(at..at + 4).map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]])).ok_or(WavError::Truncated)
}

/// Parse 16-bit PCM WAVE bytes. Unknown chunks are skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<WaveBuffer, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::NotWave);
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u32)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4)? as usize;
        let body = pos + 8;
        let end = body.checked_add(len).ok_or(WavError::Truncated)?;
        if id == b"fmt " {
            if len < 16 {
                return Err(WavError::Truncated);
            }
            let format = u16_at(bytes, body)?;
            let channels = u16_at(bytes, body + 2)?;
            let rate = u32_at(bytes, body + 4)?;
            let bits = u16_at(bytes, body + 14)?;
            if format != 1 || bits != 16 {
                return Err(WavError::Unsupported(format!("format {format}, {bits} bits")));
            }
            if channels == 0 {
                return Err(WavError::Unsupported("zero channels".into()));
            }
            fmt = Some((channels, rate));
        } else if id == b"data" {
            let (channels, rate) = fmt.ok_or_else(|| WavError::Unsupported("data before fmt".into()))?;
            let data = bytes.get(body..end).ok_or(WavError::Truncated)?;
            let n = channels as usize;
            let frames = data.len() / (2 * n);
            let mut out = vec![Vec::with_capacity(frames); n];
            for f in 0..frames {
                for (c, ch) in out.iter_mut().enumerate() {
                    let at = (f * n + c) * 2;
                    let v = i16::from_le_bytes([data[at], data[at + 1]]);
                    ch.push(v as f32 / 32767.0);
                }
            }
            return Ok(WaveBuffer::from_channels(out, rate));
        }
        pos = end + (len & 1);
    }
    Err(WavError::Truncated)
}

pub fn export_wav(buf: &WaveBuffer, path: impl AsRef<Path>) -> Result<(), WavError> {
    std::fs::write(path, encode_wav(buf))?;
    Ok(())
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveBuffer, WavError> {
    decode_wav(&std::fs::read(path)?)
}
