//! Kinematic stand-in for the robot and its tracking controller.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gait_oracle::geometry::{leg_fk, leg_ik, Leg, QuadrupedGeometry};
use crate::gait_oracle::state::RobotState;
use crate::gait_oracle::trot::{static_wrench, PlanarPose, Twist};
use crate::planner::PlanTick;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    /// Fraction of the remaining joint error removed per tick.
    pub tracking_gain: f64,
    /// A swinging foot touches down at or below this height above the ground, metres.
    pub contact_threshold: f64,
    /// A planted foot lifts off only once it rises above this height, metres.
    pub liftoff_threshold: f64,
    pub joint_noise_std: f64,
    pub twist_noise_std: f64,
    pub frame_reset_period: f64,
    pub geometry: QuadrupedGeometry,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            tracking_gain: 0.8,
            contact_threshold: 0.005,
            liftoff_threshold: 0.01,
            joint_noise_std: 0.0,
            twist_noise_std: 0.0,
            frame_reset_period: 0.8,
            geometry: QuadrupedGeometry::default(),
        }
    }
}

/// Additive, exponentially decaying base-velocity offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub onset_tick: u64,
    /// Base-frame `(vx, vy, yaw_rate)` offset at onset.
    pub impulse: [f64; 3],
    pub decay_s: f64,
}

impl Disturbance {
    /// Offset `tick` ticks into the run at control rate `hz`.
    pub fn offset_at(&self, tick: u64, hz: f64) -> [f64; 3] {
        if tick < self.onset_tick || !(self.decay_s > 0.0) {
            return [0.0; 3];
        }
        let k = (-((tick - self.onset_tick) as f64 / hz) / self.decay_s).exp();
        self.impulse.map(|v| v * k)
    }
}

/// Ground truth of the simulated robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub tick: u64,
    pub pose: PlanarPose,
    pub twist: Twist,
    pub q: [f64; 12],
    pub contact: [bool; 4],
    pub foot_heights: [f64; 4],
    /// World position of each planted foot at touchdown.
    pub anchors: [Option<[f64; 2]>; 4],
    /// Largest planted-foot slip in the last step, metres.
    pub slip: f64,
    pub fallen: bool,
    frame: PlanarPose,
    next_frame_reset: u64,
}

fn foot_world(pose: &PlanarPose, ee: [f64; 3]) -> [f64; 2] {
    let (s, c) = pose.yaw.sin_cos();
    [pose.x + c * ee[0] - s * ee[1], pose.y + s * ee[0] + c * ee[1]]
}

fn to_base(pose: &PlanarPose, p: [f64; 2]) -> [f64; 2] {
    let (s, c) = pose.yaw.sin_cos();
    let (dx, dy) = (p[0] - pose.x, p[1] - pose.y);
    [c * dx + s * dy, -s * dx + c * dy]
}

impl SimState {
    /// Robot standing on neutral footholds at the origin.
    pub fn standing(options: &SimOptions) -> Self {
        let g = &options.geometry;
        let mut q = [0.0; 12];
        for leg in Leg::ALL {
            let a = leg_ik(g.neutral_foot(leg), g, leg).expect("neutral foothold is reachable");
            q[3 * leg.index()..3 * leg.index() + 3].copy_from_slice(&a);
        }
        Self::from_joints(q, PlanarPose::default(), Twist::default(), options)
    }

    /// Start from given joints and base motion; contacts follow from foot heights.
    pub fn from_joints(q: [f64; 12], pose: PlanarPose, twist: Twist, options: &SimOptions) -> Self {
        let mut s = Self {
            tick: 0,
            pose,
            twist,
            q,
            contact: [false; 4],
            foot_heights: [0.0; 4],
            anchors: [None; 4],
            slip: 0.0,
            fallen: false,
            frame: pose,
            next_frame_reset: 0,
        };
        s.update_contacts(options);
        s
    }

    /// Align the control-frame reset schedule (`ticks_until_reset` from now).
    pub fn set_frame(&mut self, frame: PlanarPose, ticks_until_reset: u64) {
        self.frame = frame;
        self.next_frame_reset = self.tick + ticks_until_reset;
    }

    fn update_contacts(&mut self, options: &SimOptions) {
        let g = &options.geometry;
        let mut slip: f64 = 0.0;
        for leg in Leg::ALL {
            let i = leg.index();
            let ee = leg_fk([self.q[3 * i], self.q[3 * i + 1], self.q[3 * i + 2]], g, leg);
            let height = ee[2] - g.neutral_foot(leg)[2];
            self.foot_heights[i] = height;
            let limit = if self.contact[i] { options.liftoff_threshold.max(options.contact_threshold) } else { options.contact_threshold };
            let now = height <= limit;
            let world = foot_world(&self.pose, ee);
            if now {
                match self.anchors[i] {
                    None => self.anchors[i] = Some(world),
                    Some(a) => {
                        slip = slip.max(((world[0] - a[0]).powi(2) + (world[1] - a[1]).powi(2)).sqrt());
                        let b = to_base(&self.pose, a);
                        let hip = g.hip(leg);
                        let reach = ((b[0] - hip[0]).powi(2) + (b[1] - hip[1]).powi(2) + g.standing_height.powi(2)).sqrt();
                        if reach > g.max_reach() {
                            self.fallen = true;
                        }
                    }
                }
            } else {
                self.anchors[i] = None;
            }
            self.contact[i] = now;
        }
        self.slip = slip;
    }

    /// Measured state synthesised from the ground truth.
    pub fn measure(&self, options: &SimOptions, accel_xy: [f64; 2], rng: Option<&mut ChaCha8Rng>) -> RobotState {
        let g = &options.geometry;
        let mut state = RobotState { contact: self.contact, ..Default::default() };
        let mut q = self.q;
        let mut twist = [self.twist.vx, self.twist.vy, self.twist.yaw_rate];
        if let Some(rng) = rng {
            if options.joint_noise_std > 0.0 {
                q.iter_mut().for_each(|v| *v += options.joint_noise_std * rng.sample::<f64, _>(StandardNormal));
            }
            if options.twist_noise_std > 0.0 {
                twist.iter_mut().for_each(|v| *v += options.twist_noise_std * rng.sample::<f64, _>(StandardNormal));
            }
        }
        state.q = q;
        for leg in Leg::ALL {
            let i = leg.index();
            state.ee[i] = leg_fk([q[3 * i], q[3 * i + 1], q[3 * i + 2]], g, leg);
        }
        let (tau, lambda) = static_wrench(g, &q, self.contact, accel_xy);
        state.tau = tau;
        state.lambda = lambda;
        state.base_twist = [twist[0], twist[1], 0.0, 0.0, 0.0, twist[2]];
        state.pose_delta = self.pose.relative_to(&self.frame);
        state
    }
}

/// Advance one control tick towards `plan` and return the measured state.
///
/// Joints move a fraction `tracking_gain` of the way to the plan's next
/// predicted configuration; the base follows the commanded twist plus all
/// active disturbance offsets.
pub fn step_sim(
    sim: &mut SimState,
    plan: &PlanTick,
    disturbances: &[Disturbance],
    options: &SimOptions,
    control_hz: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> RobotState {
    let dt = 1.0 / control_hz;
    let target = plan.joints.positions.get(1).unwrap_or(&plan.joints.positions[0]);
    for (q, t) in sim.q.iter_mut().zip(target) {
        *q += options.tracking_gain * (t - *q);
    }
    sim.tick += 1;
    let offset = disturbances.iter().fold([0.0; 3], |acc, d| {
        let o = d.offset_at(sim.tick, control_hz);
        [acc[0] + o[0], acc[1] + o[1], acc[2] + o[2]]
    });
    let previous = disturbances.iter().fold([0.0; 3], |acc, d| {
        let o = d.offset_at(sim.tick - 1, control_hz);
        [acc[0] + o[0], acc[1] + o[1], acc[2] + o[2]]
    });
    let cmd = plan.action;
    sim.twist = Twist::new(cmd[0] + offset[0], cmd[1] + offset[1], cmd[2] + offset[2]);
    sim.pose = sim.pose.integrate(sim.twist, dt);
    if sim.tick >= sim.next_frame_reset {
        sim.frame = sim.pose;
        sim.next_frame_reset = sim.tick + (options.frame_reset_period * control_hz).round().max(1.0) as u64;
    }
    sim.update_contacts(options);
    let c = sim.twist.centripetal();
    // Disturbance offsets decay, which the stance feet must resist.
    let decay = [(offset[0] - previous[0]) / dt, (offset[1] - previous[1]) / dt];
    sim.measure(options, [c[0] + decay[0], c[1] + decay[1]], rng)
}
