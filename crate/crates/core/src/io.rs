//! Flat binary frames and CSV writers.
//!
//! A frame is little-endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SIRFRAME` |
//! | 8     | `u64` number of points `n` |
//! | 8     | `u64` dimension `d` |
//! | 8     | `u64` values per point `k` |
//! | 8     | `f64` time |
//! | 8·n·d | `f64` coordinates, point-major |
//! | 8·n·k | `f64` values, point-major |
//!
//! Files are plain concatenations of frames.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::particle::{PopulationState, TrajectoryRecord};

pub const FRAME_MAGIC: [u8; 8] = *b"SIRFRAME";

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub dim: usize,
    pub n_values: usize,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

impl Frame {
    pub fn n_points(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    /// Positions with the compartment index (0 = S, 1 = I, 2 = R) as the single value.
    pub fn from_state(state: &PopulationState) -> Self {
        Frame {
            time: state.time,
            dim: state.dim,
            n_values: 1,
            coords: state.positions.clone(),
            values: state.labels.iter().map(|l| l.index() as f64).collect(),
        }
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    let n = frame.n_points();
    if frame.values.len() != n * frame.n_values {
        return Err(Error::DimensionMismatch { expected: n * frame.n_values, got: frame.values.len() });
    }
    w.write_all(&FRAME_MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&(frame.dim as u64).to_le_bytes())?;
    w.write_all(&(frame.n_values as u64).to_le_bytes())?;
    w.write_all(&frame.time.to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * (frame.coords.len() + frame.values.len()));
    for v in frame.coords.iter().chain(&frame.values) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Reads every frame until end of input.
pub fn read_frames<R: Read>(r: &mut R) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    loop {
        let mut magic = [0u8; 8];
        match r.read(&mut magic[..1])? {
            0 => return Ok(frames),
            _ => r.read_exact(&mut magic[1..])?,
        }
        if magic != FRAME_MAGIC {
            return Err(Error::Format("bad frame magic".into()));
        }
        let n = read_u64(r)? as usize;
        let dim = read_u64(r)? as usize;
        let n_values = read_u64(r)? as usize;
        let time = f64::from_bits(read_u64(r)?);
        let coords = read_f64s(r, n * dim)?;
        let values = read_f64s(r, n * n_values)?;
        frames.push(Frame { time, dim, n_values, coords, values });
    }
}

/// Writes `t,S_count,I_count,R_count` rows.
pub fn write_counts_csv<W: Write>(w: W, record: &TrajectoryRecord) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "S_count", "I_count", "R_count"]).map_err(csv_err)?;
    for (t, c) in record.times.iter().zip(&record.counts) {
        out.write_record([t.to_string(), c[0].to_string(), c[1].to_string(), c[2].to_string()])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let a = Frame { time: 0.5, dim: 2, n_values: 1, coords: vec![1.0, 2.0, 3.0, 4.0], values: vec![0.0, 2.0] };
        let b = Frame { time: 1.5, dim: 1, n_values: 3, coords: vec![-1.0], values: vec![0.1, 0.2, 0.3] };
        let mut buf = Vec::new();
        write_frame(&mut buf, &a).unwrap();
        write_frame(&mut buf, &b).unwrap();
        assert_eq!(buf.len(), 40 + 48 + 40 + 32);
        let back = read_frames(&mut buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let a = Frame { time: 0.0, dim: 1, n_values: 1, coords: vec![1.0], values: vec![0.0] };
        let mut buf = Vec::new();
        write_frame(&mut buf, &a).unwrap();
        buf.pop();
        assert!(read_frames(&mut buf.as_slice()).is_err());
    }
}
