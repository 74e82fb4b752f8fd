//! Leg kinematics for an abduction-hip-knee leg.
//!
//! Joint conventions: the abduction joint rotates about the base x axis, hip
//! and knee rotate about the (abducted) y axis. All-zero angles put the foot
//! straight below the hip at depth `thigh + shank`. The solver always returns
//! the non-negative knee branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Leg identifiers in state-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    LeftFront,
    RightFront,
    LeftHind,
    RightHind,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::LeftFront, Leg::RightFront, Leg::LeftHind, Leg::RightHind];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Leg> {
        Leg::ALL.get(index).copied()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Leg::LeftFront => "LF",
            Leg::RightFront => "RF",
            Leg::LeftHind => "LH",
            Leg::RightHind => "RH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupedGeometry {
    /// Hip positions relative to the base origin, indexed by [`Leg::index`].
    pub hip_offsets: [[f64; 3]; 4],
    pub thigh_length: f64,
    pub shank_length: f64,
    pub body_mass: f64,
    pub standing_height: f64,
}

impl Default for QuadrupedGeometry {
    fn default() -> Self {
        Self {
            hip_offsets: [
                [0.3, 0.1, 0.0],
                [0.3, -0.1, 0.0],
                [-0.3, 0.1, 0.0],
                [-0.3, -0.1, 0.0],
            ],
            thigh_length: 0.25,
            shank_length: 0.33,
            body_mass: 35.0,
            standing_height: 0.5,
        }
    }
}

impl QuadrupedGeometry {
    pub fn validate(&self) -> Result<()> {
        let finite = self.hip_offsets.iter().flatten().all(|v| v.is_finite())
            && self.body_mass.is_finite()
            && self.standing_height.is_finite();
        if !finite {
            return Err(Error::Config("geometry contains non-finite values".into()));
        }
        if !(self.thigh_length > 0.0 && self.shank_length > 0.0) {
            return Err(Error::Config("leg link lengths must be positive".into()));
        }
        if !(self.body_mass > 0.0) {
            return Err(Error::Config("body mass must be positive".into()));
        }
        if !(self.standing_height > self.min_reach() && self.standing_height < self.max_reach()) {
            return Err(Error::Config(format!(
                "standing height {} must lie strictly inside the leg reach ({}, {})",
                self.standing_height,
                self.min_reach(),
                self.max_reach()
            )));
        }
        Ok(())
    }

    pub fn max_reach(&self) -> f64 {
        self.thigh_length + self.shank_length
    }

    pub fn min_reach(&self) -> f64 {
        (self.thigh_length - self.shank_length).abs()
    }

    pub fn hip(&self, leg: Leg) -> [f64; 3] {
        self.hip_offsets[leg.index()]
    }

    /// Nominal stance foot position: straight below the hip at standing height.
    pub fn neutral_foot(&self, leg: Leg) -> [f64; 3] {
        let h = self.hip(leg);
        [h[0], h[1], h[2] - self.standing_height]
    }

    pub fn weight(&self) -> f64 {
        self.body_mass * GRAVITY
    }
}

fn sagittal(angles: [f64; 3], g: &QuadrupedGeometry) -> (f64, f64) {
    let [_, hip, knee] = angles;
    let sx = -g.thigh_length * hip.sin() - g.shank_length * (hip + knee).sin();
    let sz = -g.thigh_length * hip.cos() - g.shank_length * (hip + knee).cos();
    (sx, sz)
}

/// Foot position in the base frame for joint angles `[abduction, hip, knee]`.
pub fn leg_fk(angles: [f64; 3], geometry: &QuadrupedGeometry, leg: Leg) -> [f64; 3] {
    let (sx, sz) = sagittal(angles, geometry);
    let (sa, ca) = angles[0].sin_cos();
    let hip = geometry.hip(leg);
    [hip[0] + sx, hip[1] - sz * sa, hip[2] + sz * ca]
}

/// Joint angles placing the foot at `foot` (base frame).
pub fn leg_ik(foot: [f64; 3], geometry: &QuadrupedGeometry, leg: Leg) -> Result<[f64; 3]> {
    let hip = geometry.hip(leg);
    let (px, py, pz) = (foot[0] - hip[0], foot[1] - hip[1], foot[2] - hip[2]);
    let distance = (px * px + py * py + pz * pz).sqrt();
    let (l1, l2) = (geometry.thigh_length, geometry.shank_length);
    let (min, max) = (geometry.min_reach(), geometry.max_reach());
    let slack = 1e-12 * max;
    if !distance.is_finite() || distance > max + slack || distance < min - slack {
        return Err(Error::OutOfReach {
            leg: leg.index(),
            distance,
            min,
            max,
        });
    }
    // Leg plane: the foot hangs below the hip after abduction.
    let radial = (py * py + pz * pz).sqrt();
    let abduction = if radial > 0.0 { py.atan2(-pz) } else { 0.0 };
    let sz = -radial;
    let sx = px;
    let cos_knee = ((sx * sx + sz * sz - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee = cos_knee.acos();
    let target = (-sx).atan2(-sz);
    let hip_angle = target - (l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
    Ok([abduction, hip_angle, knee])
}

/// Analytic Jacobian d(foot)/d(angles); `jac[row][col]` with rows x, y, z.
pub fn leg_jacobian(angles: [f64; 3], geometry: &QuadrupedGeometry) -> [[f64; 3]; 3] {
    let (sx, sz) = sagittal(angles, geometry);
    let (sa, ca) = angles[0].sin_cos();
    let (shk, chk) = (angles[1] + angles[2]).sin_cos();
    let l2 = geometry.shank_length;
    let d_ab = [0.0, -sz * ca, -sz * sa];
    let d_hip = [sz, sx * sa, -sx * ca];
    let d_knee = [-l2 * chk, -l2 * shk * sa, l2 * shk * ca];
    let mut jac = [[0.0; 3]; 3];
    for row in 0..3 {
        jac[row] = [d_ab[row], d_hip[row], d_knee[row]];
    }
    jac
}

/// Joint torques `Jᵀ f` for a foot force expressed in the base frame.
pub fn jacobian_transpose_torque(jac: &[[f64; 3]; 3], force: [f64; 3]) -> [f64; 3] {
    let mut tau = [0.0; 3];
    for (col, t) in tau.iter_mut().enumerate() {
        *t = (0..3).map(|row| jac[row][col] * force[row]).sum();
    }
    tau
}
