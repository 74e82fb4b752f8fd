//! Kinematic trot oracle: leg kinematics, constant-parameter trot synthesis
//! and dataset generation.

pub mod dataset;
pub mod geometry;
pub mod state;
pub mod trot;

pub use dataset::{synthesize_dataset, synthesize_trajectories, TwistRange};
pub use geometry::{leg_fk, leg_ik, leg_jacobian, Leg, QuadrupedGeometry, GRAVITY};
pub use state::{feature_names, RobotState, STATE_DIM};
pub use trot::{
    foot_targets, generate_trot, generate_trot_at, static_wrench, swing_profile, GaitParams, OracleOptions,
    PlanarPose, Stance, Trajectory, Twist,
};
