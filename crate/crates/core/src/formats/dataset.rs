//! Binary dataset container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! header:
//!   [0..4)    magic  b"GSP1"
//!   u32       version (= 1)
//!   u32       feature count D
//!   f64       sample rate, Hz
//!   u32       trajectory count
//!   D ×       { u16 byte length, UTF-8 feature name }
//!   D × f64   per-feature mean
//!   D × f64   per-feature population std
//! body, per trajectory:
//!   6 × f64   swing s, full stance s, step height m, vx m/s, vy m/s, yaw rate rad/s
//!   u32       tick count L
//!   L·D × f32 state rows
//!   L·4 × u8  contact flags (0 or 1), LF RF LH RH per tick
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::gait_oracle::state::{feature_names, STATE_DIM};
use crate::gait_oracle::trot::{GaitParams, Trajectory, Twist};

pub const MAGIC: [u8; 4] = *b"GSP1";
pub const VERSION: u32 = 1;
const MAX_FEATURES: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTrajectory {
    pub params: GaitParams,
    /// Row-major `[len × dim]` states at 32-bit precision.
    pub features: Vec<f32>,
    pub contacts: Vec<[bool; 4]>,
}

impl DatasetTrajectory {
    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn row(&self, dim: usize, tick: usize) -> &[f32] {
        &self.features[tick * dim..(tick + 1) * dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample_rate: f64,
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub trajectories: Vec<DatasetTrajectory>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn total_ticks(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn from_trajectories(trajectories: &[Trajectory], sample_rate: f64) -> Self {
        let trajectories: Vec<DatasetTrajectory> = trajectories
            .iter()
            .map(|t| DatasetTrajectory {
                params: t.params,
                features: t
                    .states
                    .iter()
                    .flat_map(|s| s.features().map(|v| v as f32))
                    .collect(),
                contacts: t.states.iter().map(|s| s.contact).collect(),
            })
            .collect();
        let (mean, std) = feature_statistics(&trajectories, STATE_DIM);
        Dataset {
            sample_rate,
            feature_names: feature_names(),
            mean,
            std,
            trajectories,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(64 + self.total_ticks() * (4 * dim + 4));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.trajectories.len() as u32).to_le_bytes());
        for name in &self.feature_names {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for v in self.mean.iter().chain(&self.std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for t in &self.trajectories {
            let p = &t.params;
            for v in [
                p.swing_duration,
                p.full_stance_duration,
                p.step_height,
                p.base_twist_cmd.vx,
                p.base_twist_cmd.vy,
                p.base_twist_cmd.yaw_rate,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            for v in &t.features {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for c in &t.contacts {
                out.extend(c.iter().map(|&b| b as u8));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, in_body: false };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptHeader("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::CorruptHeader(format!("unsupported version {version}")));
        }
        let dim = r.u32()? as usize;
        if dim == 0 || dim > MAX_FEATURES {
            return Err(Error::CorruptHeader(format!("feature count {dim}")));
        }
        let sample_rate = r.f64()?;
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::CorruptHeader(format!("sample rate {sample_rate}")));
        }
        let n_traj = r.u32()? as usize;
        let mut names = Vec::with_capacity(dim);
        for _ in 0..dim {
            let len = r.u16()? as usize;
            let raw = r.take(len)?;
            let name = std::str::from_utf8(raw)
                .map_err(|_| Error::CorruptHeader("feature name is not UTF-8".into()))?;
            names.push(name.to_owned());
        }
        let mean = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let std = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if mean.iter().chain(&std).any(|v| !v.is_finite()) || std.iter().any(|v| *v < 0.0) {
            return Err(Error::CorruptHeader("non-finite or negative statistics".into()));
        }

        r.in_body = true;
        let mut trajectories = Vec::with_capacity(n_traj.min(r.remaining() / 52 + 1));
        for _ in 0..n_traj {
            let mut p = [0.0; 6];
            for v in &mut p {
                *v = r.f64()?;
            }
            let len = r.u32()? as usize;
            let row_bytes = len
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| r.truncated("row count overflows"))?;
            if row_bytes > r.remaining() {
                return Err(r.truncated(&format!("{len} rows of {dim} features announced")));
            }
            let raw = r.take(row_bytes)?;
            let features = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let flags = r.take(4 * len)?;
            let mut contacts = Vec::with_capacity(len);
            for c in flags.chunks_exact(4) {
                let mut cs = [false; 4];
                for (dst, &b) in cs.iter_mut().zip(c) {
                    *dst = match b {
                        0 => false,
                        1 => true,
                        other => {
                            return Err(Error::CorruptHeader(format!("contact byte {other}")))
                        }
                    };
                }
                contacts.push(cs);
            }
            trajectories.push(DatasetTrajectory {
                params: GaitParams {
                    swing_duration: p[0],
                    full_stance_duration: p[1],
                    step_height: p[2],
                    base_twist_cmd: Twist::new(p[3], p[4], p[5]),
                },
                features,
                contacts,
            });
        }
        if r.remaining() != 0 {
            return Err(Error::CorruptHeader(format!("{} trailing bytes", r.remaining())));
        }

        let (m, s) = feature_statistics(&trajectories, dim);
        for f in 0..dim {
            for (stored, computed) in [(mean[f], m[f]), (std[f], s[f])] {
                if (stored - computed).abs() > 1e-5 * stored.abs().max(1.0) {
                    return Err(Error::StatMismatch { feature: f, stored, computed });
                }
            }
        }
        Ok(Dataset {
            sample_rate,
            feature_names: names,
            mean,
            std,
            trajectories,
        })
    }
}

/// Two-pass mean and population standard deviation over every row.
pub fn feature_statistics(trajectories: &[DatasetTrajectory], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let count: usize = trajectories.iter().map(|t| t.len()).sum();
    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    if count == 0 {
        return (mean, std);
    }
    for t in trajectories {
        for row in t.features.chunks_exact(dim) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    for t in trajectories {
        for row in t.features.chunks_exact(dim) {
            for ((s, &m), &v) in std.iter_mut().zip(&mean).zip(row) {
                *s += (v as f64 - m).powi(2);
            }
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / count as f64).sqrt());
    (mean, std)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_bytes(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    in_body: bool,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn truncated(&self, detail: &str) -> Error {
        Error::TruncatedBody { offset: self.pos, detail: detail.to_owned() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(if self.in_body {
                self.truncated(&format!("needed {n} bytes, {} left", self.remaining()))
            } else {
                Error::CorruptHeader(format!("header truncated at byte {}", self.pos))
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_oracle::{synthesize_dataset, GaitParams, OracleOptions, QuadrupedGeometry, TwistRange};

    fn small() -> Dataset {
        let opts = OracleOptions { duration: 2.5, ..Default::default() };
        synthesize_dataset(
            3,
            &TwistRange::default(),
            &GaitParams::default(),
            &QuadrupedGeometry::default(),
            &opts,
            5,
        )
        .unwrap()
    }

    #[test]
    fn roundtrip() {
        let d = small();
        assert_eq!(Dataset::from_bytes(&d.to_bytes()).unwrap(), d);
    }

    #[test]
    fn flipped_magic_is_corrupt_header() {
        let mut bytes = small().to_bytes();
        bytes[1] ^= 0xff;
        assert!(matches!(Dataset::from_bytes(&bytes), Err(Error::CorruptHeader(_))));
    }

    #[test]
    fn truncated_final_row_reports_offset() {
        let bytes = small().to_bytes();
        let cut = bytes.len() - 4 * 3 - 2;
        match Dataset::from_bytes(&bytes[..cut]) {
            Err(Error::TruncatedBody { offset, .. }) => assert!(offset <= cut),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn edited_statistics_are_detected() {
        let mut d = small();
        d.mean[3] += 0.5;
        assert!(matches!(
            Dataset::from_bytes(&d.to_bytes()),
            Err(Error::StatMismatch { feature: 3, .. })
        ));
    }
}
