//! Constant-parameter trot synthesis.
//!
//! A gait cycle of length `2·(swing + full_stance)` runs: full support, the
//! RF/LH pair swinging (LF/RH in contact), full support, the LF/RH pair
//! swinging (RF/LH in contact). Stance feet slide backwards under the base at
//! the commanded twist, and touch down half a stance-length ahead of the hip.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait_oracle::geometry::{
    jacobian_transpose_torque, leg_fk, leg_ik, leg_jacobian, Leg, QuadrupedGeometry,
};
use crate::gait_oracle::state::RobotState;

/// Margin kept between any oracle foot target and the reach limits.
const REACH_MARGIN: f64 = 0.01;

/// Planar base twist command in the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl Twist {
    pub fn new(vx: f64, vy: f64, yaw_rate: f64) -> Self {
        Self { vx, vy, yaw_rate }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.yaw_rate]
    }

    /// Velocity of the base-frame point `p` relative to the ground.
    pub fn point_velocity(&self, p: [f64; 3]) -> [f64; 2] {
        [self.vx - self.yaw_rate * p[1], self.vy + self.yaw_rate * p[0]]
    }

    /// Centripetal acceleration `ω × v` of the base.
    pub fn centripetal(&self) -> [f64; 2] {
        [-self.yaw_rate * self.vy, self.yaw_rate * self.vx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitParams {
    pub swing_duration: f64,
    pub full_stance_duration: f64,
    pub step_height: f64,
    pub base_twist_cmd: Twist,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            swing_duration: 0.5,
            full_stance_duration: 0.075,
            step_height: 0.10,
            base_twist_cmd: Twist::default(),
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.swing_duration > 0.0 && self.swing_duration.is_finite()) {
            return Err(Error::Config("swing_duration must be positive".into()));
        }
        if !(self.full_stance_duration >= 0.0 && self.full_stance_duration.is_finite()) {
            return Err(Error::Config("full_stance_duration must be non-negative".into()));
        }
        if !(self.step_height >= 0.0 && self.step_height.is_finite()) {
            return Err(Error::Config("step_height must be non-negative".into()));
        }
        let t = self.base_twist_cmd;
        if !(t.vx.is_finite() && t.vy.is_finite() && t.yaw_rate.is_finite()) {
            return Err(Error::Config("twist command must be finite".into()));
        }
        Ok(())
    }

    pub fn cycle_period(&self) -> f64 {
        2.0 * (self.swing_duration + self.full_stance_duration)
    }

    /// Time each foot spends on the ground per cycle.
    pub fn stance_duration(&self) -> f64 {
        self.swing_duration + 2.0 * self.full_stance_duration
    }

    pub fn gait_frequency(&self) -> f64 {
        1.0 / self.cycle_period()
    }

    /// Stance at time `t` into the cycle (wrapped into `[0, period)`).
    pub fn stance_at(&self, t: f64) -> Stance {
        let (s, f) = (self.swing_duration, self.full_stance_duration);
        let tc = t.rem_euclid(self.cycle_period());
        if tc < f {
            Stance::FullSupport
        } else if tc < f + s {
            Stance::LfRhSupport
        } else if tc < 2.0 * f + s {
            Stance::FullSupport
        } else {
            Stance::RfLhSupport
        }
    }

    fn liftoff_time(&self, leg: Leg) -> f64 {
        let (s, f) = (self.swing_duration, self.full_stance_duration);
        match leg {
            Leg::RightFront | Leg::LeftHind => f,
            Leg::LeftFront | Leg::RightHind => 2.0 * f + s,
        }
    }
}

/// The four support patterns a trot may occupy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stance {
    FullSupport,
    /// LF and RH on the ground, RF and LH swinging.
    LfRhSupport,
    /// RF and LH on the ground, LF and RH swinging.
    RfLhSupport,
    /// No feet planted; never produced by the oracle.
    Flight,
}

impl Stance {
    pub fn contacts(self) -> [bool; 4] {
        match self {
            Stance::FullSupport => [true; 4],
            Stance::LfRhSupport => [true, false, false, true],
            Stance::RfLhSupport => [false, true, true, false],
            Stance::Flight => [false; 4],
        }
    }

    /// Classify a contact pattern; `None` if it is not a trot pattern.
    pub fn from_contacts(contacts: [bool; 4]) -> Option<Stance> {
        [
            Stance::FullSupport,
            Stance::LfRhSupport,
            Stance::RfLhSupport,
            Stance::Flight,
        ]
        .into_iter()
        .find(|s| s.contacts() == contacts)
    }

    pub fn class_index(self) -> usize {
        match self {
            Stance::FullSupport => 0,
            Stance::LfRhSupport => 1,
            Stance::RfLhSupport => 2,
            Stance::Flight => 3,
        }
    }
}

/// Foot displacement from lift-off at swing fraction `s`.
pub fn swing_profile(s: f64, step_height: f64, stride: [f64; 3]) -> [f64; 3] {
    let s = s.clamp(0.0, 1.0);
    let horizontal = s - (2.0 * PI * s).sin() / (2.0 * PI);
    let lift = if s == 0.0 || s == 1.0 { 0.0 } else { step_height * (PI * s).sin() };
    [
        stride[0] * horizontal,
        stride[1] * horizontal,
        stride[2] * horizontal + lift,
    ]
}

/// Static support model: weight shared equally by stance feet plus the
/// tangential force that produces the base acceleration `accel_xy`, mapped to
/// joint torques through each leg's Jacobian transpose.
pub fn static_wrench(
    geometry: &QuadrupedGeometry,
    q: &[f64; 12],
    contacts: [bool; 4],
    accel_xy: [f64; 2],
) -> ([f64; 12], [[f64; 3]; 4]) {
    let mut tau = [0.0; 12];
    let mut lambda = [[0.0; 3]; 4];
    let n = contacts.iter().filter(|c| **c).count();
    if n == 0 {
        return (tau, lambda);
    }
    let share = 1.0 / n as f64;
    let m = geometry.body_mass;
    for leg in Leg::ALL {
        let i = leg.index();
        if !contacts[i] {
            continue;
        }
        let force = [
            m * accel_xy[0] * share,
            m * accel_xy[1] * share,
            geometry.weight() * share,
        ];
        lambda[i] = force;
        let angles = [q[3 * i], q[3 * i + 1], q[3 * i + 2]];
        let jac = leg_jacobian(angles, geometry);
        tau[3 * i..3 * i + 3].copy_from_slice(&jacobian_transpose_torque(&jac, force));
    }
    (tau, lambda)
}

/// Planar base pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PlanarPose {
    /// Exact integration of a constant base-frame twist over `dt`.
    pub fn integrate(&self, twist: Twist, dt: f64) -> PlanarPose {
        let (vx, vy, w) = (twist.vx, twist.vy, twist.yaw_rate);
        let yaw1 = self.yaw + w * dt;
        let (dx, dy) = if w.abs() < 1e-12 {
            let (s, c) = self.yaw.sin_cos();
            ((vx * c - vy * s) * dt, (vx * s + vy * c) * dt)
        } else {
            let (s0, c0) = self.yaw.sin_cos();
            let (s1, c1) = yaw1.sin_cos();
            (
                (vx * (s1 - s0) + vy * (c1 - c0)) / w,
                (-vx * (c1 - c0) + vy * (s1 - s0)) / w,
            )
        };
        PlanarPose {
            x: self.x + dx,
            y: self.y + dy,
            yaw: yaw1,
        }
    }

    /// This pose expressed in `frame`, as `[x, y, z, roll, pitch, yaw]`.
    pub fn relative_to(&self, frame: &PlanarPose) -> [f64; 6] {
        let (s, c) = frame.yaw.sin_cos();
        let (dx, dy) = (self.x - frame.x, self.y - frame.y);
        [c * dx + s * dy, -s * dx + c * dy, 0.0, 0.0, 0.0, self.yaw - frame.yaw]
    }
}

/// Sampling options for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    pub duration: f64,
    pub sample_rate: f64,
    /// Period after which the control frame snaps to the current base pose.
    pub frame_reset_period: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            duration: 20.0,
            sample_rate: 100.0,
            frame_reset_period: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: GaitParams,
    pub sample_rate: f64,
    pub states: Vec<RobotState>,
    pub timestamps: Vec<f64>,
    /// World pose of the base at every sample.
    pub base_world: Vec<PlanarPose>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Foot kinematics of one leg under a constant gait.
#[derive(Debug, Clone, Copy)]
pub struct FootPlan {
    neutral: [f64; 3],
    /// Ground-relative velocity of the neutral point (the stance slides by its negative).
    sweep_velocity: [f64; 2],
}

impl FootPlan {
    pub fn new(geometry: &QuadrupedGeometry, leg: Leg, twist: Twist) -> Self {
        let neutral = geometry.neutral_foot(leg);
        Self {
            neutral,
            sweep_velocity: twist.point_velocity(neutral),
        }
    }

    pub fn touchdown(&self, stance_duration: f64) -> [f64; 3] {
        let half = 0.5 * stance_duration;
        [
            self.neutral[0] + self.sweep_velocity[0] * half,
            self.neutral[1] + self.sweep_velocity[1] * half,
            self.neutral[2],
        ]
    }

    pub fn liftoff(&self, stance_duration: f64) -> [f64; 3] {
        let half = 0.5 * stance_duration;
        [
            self.neutral[0] - self.sweep_velocity[0] * half,
            self.neutral[1] - self.sweep_velocity[1] * half,
            self.neutral[2],
        ]
    }

    /// Foot position after `elapsed` seconds on the ground.
    pub fn stance_position(&self, stance_duration: f64, elapsed: f64) -> [f64; 3] {
        let td = self.touchdown(stance_duration);
        [
            td[0] - self.sweep_velocity[0] * elapsed,
            td[1] - self.sweep_velocity[1] * elapsed,
            td[2],
        ]
    }

    pub fn swing_position(&self, stance_duration: f64, fraction: f64, step_height: f64) -> [f64; 3] {
        let lo = self.liftoff(stance_duration);
        let td = self.touchdown(stance_duration);
        let stride = [td[0] - lo[0], td[1] - lo[1], 0.0];
        let d = swing_profile(fraction, step_height, stride);
        [lo[0] + d[0], lo[1] + d[1], lo[2] + d[2]]
    }
}

fn check_feasible(params: &GaitParams, geometry: &QuadrupedGeometry) -> Result<()> {
    let t_st = params.stance_duration();
    for leg in Leg::ALL {
        let plan = FootPlan::new(geometry, leg, params.base_twist_cmd);
        let hip = geometry.hip(leg);
        let probes = [
            plan.touchdown(t_st),
            plan.liftoff(t_st),
            plan.swing_position(t_st, 0.5, params.step_height),
        ];
        for p in probes {
            let d = ((p[0] - hip[0]).powi(2) + (p[1] - hip[1]).powi(2) + (p[2] - hip[2]).powi(2)).sqrt();
            if d > geometry.max_reach() - REACH_MARGIN || d < geometry.min_reach() + REACH_MARGIN {
                return Err(Error::InfeasibleGait(format!(
                    "leg {} needs a foot target {:.3} m from its hip (reach {:.3}..{:.3} m) for twist {:?} and stance {:.3} s",
                    leg.short_name(),
                    d,
                    geometry.min_reach() + REACH_MARGIN,
                    geometry.max_reach() - REACH_MARGIN,
                    params.base_twist_cmd,
                    t_st
                )));
            }
        }
    }
    Ok(())
}

/// Foot positions and contacts at time `t` into the gait.
pub fn foot_targets(
    params: &GaitParams,
    geometry: &QuadrupedGeometry,
    t: f64,
) -> ([[f64; 3]; 4], [bool; 4]) {
    let period = params.cycle_period();
    let t_st = params.stance_duration();
    let mut feet = [[0.0; 3]; 4];
    let mut contact = [true; 4];
    for leg in Leg::ALL {
        let plan = FootPlan::new(geometry, leg, params.base_twist_cmd);
        let u = (t - params.liftoff_time(leg)).rem_euclid(period);
        let i = leg.index();
        if u < params.swing_duration {
            feet[i] = plan.swing_position(t_st, u / params.swing_duration, params.step_height);
            contact[i] = false;
        } else {
            feet[i] = plan.stance_position(t_st, u - params.swing_duration);
        }
    }
    (feet, contact)
}

/// Synthesize a trot trajectory. The seed selects the starting gait phase and
/// the offset of the first control-frame reset.
pub fn generate_trot(
    params: &GaitParams,
    geometry: &QuadrupedGeometry,
    options: &OracleOptions,
    seed: u64,
) -> Result<Trajectory> {
    params.validate()?;
    geometry.validate()?;
    if !(options.sample_rate > 0.0 && options.frame_reset_period > 0.0) {
        return Err(Error::Config("sample rate and frame reset period must be positive".into()));
    }
    if options.duration < 2.0 * params.cycle_period() {
        return Err(Error::Config(format!(
            "duration {} s covers fewer than two gait cycles of {} s",
            options.duration,
            params.cycle_period()
        )));
    }
    check_feasible(params, geometry)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase_offset = rng.random_range(0.0..params.cycle_period());
    let frame_offset = rng.random_range(0.0..options.frame_reset_period);
    trot_from_offsets(params, geometry, options, phase_offset, frame_offset)
}

/// Synthesize a trot whose first sample sits `phase_offset` seconds into the
/// gait cycle and `frame_offset` seconds into the control-frame period.
pub fn generate_trot_at(
    params: &GaitParams,
    geometry: &QuadrupedGeometry,
    options: &OracleOptions,
    phase_offset: f64,
    frame_offset: f64,
) -> Result<Trajectory> {
    params.validate()?;
    geometry.validate()?;
    if !(options.sample_rate > 0.0 && options.frame_reset_period > 0.0) {
        return Err(Error::Config("sample rate and frame reset period must be positive".into()));
    }
    check_feasible(params, geometry)?;
    trot_from_offsets(params, geometry, options, phase_offset, frame_offset.rem_euclid(options.frame_reset_period))
}

fn trot_from_offsets(
    params: &GaitParams,
    geometry: &QuadrupedGeometry,
    options: &OracleOptions,
    phase_offset: f64,
    frame_offset: f64,
) -> Result<Trajectory> {
    let dt = 1.0 / options.sample_rate;
    let n = (options.duration * options.sample_rate).floor() as usize;
    let twist = params.base_twist_cmd;
    let accel = twist.centripetal();

    let mut states = Vec::with_capacity(n);
    let mut timestamps = Vec::with_capacity(n);
    let mut base_world = Vec::with_capacity(n);
    let mut pose = PlanarPose::default();
    let mut frame = pose;
    let mut next_reset = options.frame_reset_period - frame_offset;

    for i in 0..n {
        let t = i as f64 * dt;
        if i > 0 {
            pose = pose.integrate(twist, dt);
        }
        if t >= next_reset - 1e-9 {
            frame = pose;
            next_reset += options.frame_reset_period;
        }
        let (feet, contact) = foot_targets(params, geometry, t + phase_offset);
        let mut state = RobotState {
            contact,
            ..Default::default()
        };
        for leg in Leg::ALL {
            let angles = leg_ik(feet[leg.index()], geometry, leg)?;
            state.set_leg_angles(leg, angles);
            state.ee[leg.index()] = leg_fk(angles, geometry, leg);
        }
        let (tau, lambda) = static_wrench(geometry, &state.q, contact, accel);
        state.tau = tau;
        state.lambda = lambda;
        state.base_twist = [twist.vx, twist.vy, 0.0, 0.0, 0.0, twist.yaw_rate];
        state.pose_delta = pose.relative_to(&frame);
        states.push(state);
        timestamps.push(t);
        base_world.push(pose);
    }

    Ok(Trajectory {
        params: *params,
        sample_rate: options.sample_rate,
        states,
        timestamps,
        base_world,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(duration: f64) -> OracleOptions {
        OracleOptions {
            duration,
            ..Default::default()
        }
    }

    #[test]
    fn swing_profile_anchors() {
        assert_eq!(swing_profile(0.0, 0.1, [0.2, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        let apex = swing_profile(0.5, 0.10, [0.0; 3]);
        assert!((apex[2] - 0.10).abs() < 1e-15);
        let end = swing_profile(1.0, 0.1, [0.2, 0.0, 0.0]);
        assert!((end[0] - 0.2).abs() < 1e-15);
        assert_eq!(end[2], 0.0);
    }

    #[test]
    fn stance_sequence_visits_full_support_between_pair_swings() {
        let params = GaitParams::default();
        let traj = generate_trot(&params, &QuadrupedGeometry::default(), &opts(10.0), 3).unwrap();
        let mut last_pair: Option<Stance> = None;
        let mut saw_full_since_pair = true;
        for s in &traj.states {
            let stance = Stance::from_contacts(s.contact).expect("trot pattern");
            assert_ne!(stance, Stance::Flight);
            match stance {
                Stance::FullSupport => saw_full_since_pair = true,
                pair => {
                    if last_pair != Some(pair) {
                        assert!(saw_full_since_pair, "pair swing without full support");
                        if let Some(prev) = last_pair {
                            assert_ne!(prev, pair);
                        }
                        last_pair = Some(pair);
                        saw_full_since_pair = false;
                    }
                }
            }
        }
    }

    #[test]
    fn zero_twist_touchdown_equals_liftoff() {
        let params = GaitParams::default();
        let g = QuadrupedGeometry::default();
        let traj = generate_trot(&params, &g, &opts(5.0), 1).unwrap();
        let mut liftoff: [Option<[f64; 3]>; 4] = [None; 4];
        let mut checked = 0;
        for w in traj.states.windows(2) {
            for leg in 0..4 {
                if w[0].contact[leg] && !w[1].contact[leg] {
                    liftoff[leg] = Some(w[0].ee[leg]);
                }
                if !w[0].contact[leg] && w[1].contact[leg] {
                    if let Some(lo) = liftoff[leg] {
                        for k in 0..3 {
                            assert!((lo[k] - w[1].ee[leg][k]).abs() < 1e-6);
                        }
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 4);
    }

    #[test]
    fn base_displacement_follows_twist() {
        let params = GaitParams {
            base_twist_cmd: Twist::new(0.3, 0.0, 0.0),
            ..Default::default()
        };
        let traj = generate_trot(&params, &QuadrupedGeometry::default(), &opts(10.01), 5).unwrap();
        // Independent forward-Euler integration of the commanded velocity.
        let dt = 1.0 / traj.sample_rate;
        let expected: f64 = (1..traj.len()).map(|_| 0.3 * dt).sum();
        let stride = 0.3 * params.cycle_period();
        let x = traj.base_world.last().unwrap().x;
        assert!((x - expected).abs() < 1e-9);
        assert!((x - 3.0).abs() <= stride);
    }

    #[test]
    fn full_stance_forces_sum_to_weight() {
        let g = QuadrupedGeometry::default();
        let params = GaitParams {
            base_twist_cmd: Twist::new(0.2, 0.1, 0.2),
            ..Default::default()
        };
        let traj = generate_trot(&params, &g, &opts(6.0), 9).unwrap();
        for s in &traj.states {
            let fz: f64 = s.lambda.iter().map(|l| l[2]).sum();
            assert!((fz - g.weight()).abs() < 1e-9);
            for leg in 0..4 {
                if !s.contact[leg] {
                    assert_eq!(s.lambda[leg], [0.0; 3]);
                }
            }
        }
    }

    #[test]
    fn fast_twist_is_infeasible() {
        let params = GaitParams {
            base_twist_cmd: Twist::new(2.0, 0.0, 0.0),
            ..Default::default()
        };
        let r = generate_trot(&params, &QuadrupedGeometry::default(), &opts(5.0), 0);
        assert!(matches!(r, Err(Error::InfeasibleGait(_))));
    }

    #[test]
    fn pose_delta_resets_with_control_frame() {
        let params = GaitParams {
            base_twist_cmd: Twist::new(0.3, 0.0, 0.0),
            ..Default::default()
        };
        let traj = generate_trot(&params, &QuadrupedGeometry::default(), &opts(5.0), 2).unwrap();
        let resets = traj
            .states
            .windows(2)
            .filter(|w| w[1].pose_delta[0] < w[0].pose_delta[0])
            .count();
        // 5 s at a 0.8 s reset period.
        assert!((5..=7).contains(&resets), "{resets}");
        let max = traj.states.iter().map(|s| s.pose_delta[0]).fold(0.0, f64::max);
        assert!(max <= 0.3 * 0.8 + 1e-9);
    }
}
