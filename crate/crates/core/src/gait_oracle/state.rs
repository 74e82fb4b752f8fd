use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_oracle::geometry::Leg;

/// Number of scalar features in a packed [`RobotState`].
pub const STATE_DIM: usize = 60;

/// Offsets of each block inside the packed feature vector.
pub mod layout {
    pub const Q: usize = 0;
    pub const EE: usize = 12;
    pub const TAU: usize = 24;
    pub const LAMBDA: usize = 36;
    pub const TWIST: usize = 48;
    pub const POSE: usize = 54;

    /// `(offset, len)` of every block, each holding one physical quantity.
    pub const GROUPS: [(usize, usize); 6] = [(Q, 12), (EE, 12), (TAU, 12), (LAMBDA, 12), (TWIST, 6), (POSE, 6)];
}

/// One timestep of measured robot state.
///
/// Per-leg blocks follow [`Leg::ALL`] order. `pose_delta` is the base pose
/// relative to the current control frame: translation then roll/pitch/yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub q: [f64; 12],
    pub ee: [[f64; 3]; 4],
    pub tau: [f64; 12],
    pub lambda: [[f64; 3]; 4],
    pub base_twist: [f64; 6],
    pub pose_delta: [f64; 6],
    pub contact: [bool; 4],
}

impl Default for RobotState {
    fn default() -> Self {
        Self {
            q: [0.0; 12],
            ee: [[0.0; 3]; 4],
            tau: [0.0; 12],
            lambda: [[0.0; 3]; 4],
            base_twist: [0.0; 6],
            pose_delta: [0.0; 6],
            contact: [true; 4],
        }
    }
}

impl RobotState {
    pub fn leg_angles(&self, leg: Leg) -> [f64; 3] {
        let i = 3 * leg.index();
        [self.q[i], self.q[i + 1], self.q[i + 2]]
    }

    pub fn set_leg_angles(&mut self, leg: Leg, angles: [f64; 3]) {
        let i = 3 * leg.index();
        self.q[i..i + 3].copy_from_slice(&angles);
    }

    pub fn is_finite(&self) -> bool {
        self.features().iter().all(|v| v.is_finite())
    }

    /// Forces on feet without contact are reported as zero.
    pub fn zero_free_forces(&mut self) {
        for (force, &in_contact) in self.lambda.iter_mut().zip(&self.contact) {
            if !in_contact {
                *force = [0.0; 3];
            }
        }
    }

    pub fn features(&self) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        self.write_features(&mut out);
        out
    }

    pub fn write_features(&self, out: &mut [f64]) {
        out[layout::Q..layout::Q + 12].copy_from_slice(&self.q);
        for leg in 0..4 {
            out[layout::EE + 3 * leg..layout::EE + 3 * leg + 3].copy_from_slice(&self.ee[leg]);
            out[layout::LAMBDA + 3 * leg..layout::LAMBDA + 3 * leg + 3]
                .copy_from_slice(&self.lambda[leg]);
        }
        out[layout::TAU..layout::TAU + 12].copy_from_slice(&self.tau);
        out[layout::TWIST..layout::TWIST + 6].copy_from_slice(&self.base_twist);
        out[layout::POSE..layout::POSE + 6].copy_from_slice(&self.pose_delta);
    }

    pub fn from_features(features: &[f64], contact: [bool; 4]) -> Result<Self> {
        if features.len() != STATE_DIM {
            return Err(Error::DimensionMismatch {
                context: "robot state features",
                expected: STATE_DIM,
                actual: features.len(),
            });
        }
        let mut s = RobotState {
            contact,
            ..Default::default()
        };
        s.q.copy_from_slice(&features[layout::Q..layout::Q + 12]);
        for leg in 0..4 {
            s.ee[leg].copy_from_slice(&features[layout::EE + 3 * leg..layout::EE + 3 * leg + 3]);
            s.lambda[leg]
                .copy_from_slice(&features[layout::LAMBDA + 3 * leg..layout::LAMBDA + 3 * leg + 3]);
        }
        s.tau.copy_from_slice(&features[layout::TAU..layout::TAU + 12]);
        s.base_twist
            .copy_from_slice(&features[layout::TWIST..layout::TWIST + 6]);
        s.pose_delta
            .copy_from_slice(&features[layout::POSE..layout::POSE + 6]);
        Ok(s)
    }
}

pub fn feature_names() -> Vec<String> {
    let joints = ["haa", "hfe", "kfe"];
    let axes = ["x", "y", "z"];
    let mut names = Vec::with_capacity(STATE_DIM);
    for leg in Leg::ALL {
        for j in joints {
            names.push(format!("q_{}_{}", leg.short_name(), j));
        }
    }
    for leg in Leg::ALL {
        for a in axes {
            names.push(format!("ee_{}_{}", leg.short_name(), a));
        }
    }
    for leg in Leg::ALL {
        for j in joints {
            names.push(format!("tau_{}_{}", leg.short_name(), j));
        }
    }
    for leg in Leg::ALL {
        for a in axes {
            names.push(format!("lambda_{}_{}", leg.short_name(), a));
        }
    }
    for n in ["vx", "vy", "vz", "wx", "wy", "wz"] {
        names.push(format!("twist_{n}"));
    }
    for n in ["x", "y", "z", "roll", "pitch", "yaw"] {
        names.push(format!("pose_{n}"));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_roundtrip() {
        let mut s = RobotState::default();
        for (i, v) in s.q.iter_mut().enumerate() {
            *v = i as f64 * 0.1;
        }
        s.lambda[2] = [1.0, 2.0, 3.0];
        s.pose_delta[5] = -0.25;
        let f = s.features();
        let back = RobotState::from_features(&f, s.contact).unwrap();
        assert_eq!(s, back);
        assert_eq!(feature_names().len(), STATE_DIM);
    }

    #[test]
    fn free_feet_carry_no_force() {
        let mut s = RobotState::default();
        s.lambda = [[1.0; 3]; 4];
        s.contact = [true, false, false, true];
        s.zero_free_forces();
        assert_eq!(s.lambda[1], [0.0; 3]);
        assert_eq!(s.lambda[2], [0.0; 3]);
        assert_eq!(s.lambda[0], [1.0; 3]);
    }
}
