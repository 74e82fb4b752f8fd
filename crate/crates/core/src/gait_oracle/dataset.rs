use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::dataset::Dataset;
use crate::gait_oracle::geometry::QuadrupedGeometry;
use crate::gait_oracle::trot::{generate_trot, GaitParams, OracleOptions, Trajectory, Twist};

/// Closed intervals the twist command is sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistRange {
    pub vx: [f64; 2],
    pub vy: [f64; 2],
    pub yaw_rate: [f64; 2],
}

impl TwistRange {
    pub fn symmetric(vx: f64, vy: f64, yaw_rate: f64) -> Self {
        Self {
            vx: [-vx, vx],
            vy: [-vy, vy],
            yaw_rate: [-yaw_rate, yaw_rate],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("vx", self.vx), ("vy", self.vy), ("yaw_rate", self.yaw_rate)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("twist range {name} = [{lo}, {hi}] is invalid")));
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Twist {
        let draw = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        Twist {
            vx: draw(rng, self.vx),
            vy: draw(rng, self.vy),
            yaw_rate: draw(rng, self.yaw_rate),
        }
    }
}

impl Default for TwistRange {
    fn default() -> Self {
        Self::symmetric(0.4, 0.2, 0.3)
    }
}

/// Generate `n_trajectories` trots with uniformly sampled twist commands.
pub fn synthesize_trajectories(
    n_trajectories: usize,
    twist_range: &TwistRange,
    params: &GaitParams,
    geometry: &QuadrupedGeometry,
    options: &OracleOptions,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    twist_range.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_trajectories)
        .map(|_| {
            let p = GaitParams {
                base_twist_cmd: twist_range.sample(&mut rng),
                ..*params
            };
            let traj_seed = rng.random::<u64>();
            generate_trot(&p, geometry, options, traj_seed)
        })
        .collect()
}

pub fn synthesize_dataset(
    n_trajectories: usize,
    twist_range: &TwistRange,
    params: &GaitParams,
    geometry: &QuadrupedGeometry,
    options: &OracleOptions,
    seed: u64,
) -> Result<Dataset> {
    let trajectories =
        synthesize_trajectories(n_trajectories, twist_range, params, geometry, options, seed)?;
    Ok(Dataset::from_trajectories(&trajectories, options.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_range_gives_station_keeping() {
        let range = TwistRange::symmetric(0.0, 0.0, 0.0);
        let opts = OracleOptions { duration: 3.0, ..Default::default() };
        let trajs = synthesize_trajectories(
            3,
            &range,
            &GaitParams::default(),
            &QuadrupedGeometry::default(),
            &opts,
            4,
        )
        .unwrap();
        for t in &trajs {
            assert_eq!(t.params.base_twist_cmd, Twist::default());
            assert!(t.base_world.iter().all(|p| p.x == 0.0 && p.y == 0.0));
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let opts = OracleOptions { duration: 3.0, ..Default::default() };
        let make = || {
            synthesize_dataset(
                4,
                &TwistRange::default(),
                &GaitParams::default(),
                &QuadrupedGeometry::default(),
                &opts,
                99,
            )
            .unwrap()
        };
        assert_eq!(make(), make());
    }
}
