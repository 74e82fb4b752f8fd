//! Ring buffer of measured states and encoder-window assembly.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::gait_oracle::state::RobotState;
use crate::vae::{ModelConfig, Normalizer};

#[derive(Debug, Clone)]
pub struct StateBuffer {
    capacity: usize,
    states: VecDeque<RobotState>,
    /// Tick of the newest state, if any.
    newest: Option<u64>,
}

impl StateBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), states: VecDeque::with_capacity(capacity.max(1)), newest: None }
    }

    /// A buffer sized for `config` plus room for `extra` older ticks.
    pub fn for_config(config: &ModelConfig, extra: usize) -> Self {
        Self::new(config.history_ticks() + extra)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn newest_tick(&self) -> Option<u64> {
        self.newest
    }

    pub fn clear(&mut self) {
        self.states.clear();
        self.newest = None;
    }

    /// Append the state for the next tick, evicting the oldest when full.
    pub fn push(&mut self, state: RobotState) {
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
        self.newest = Some(self.newest.map_or(0, |t| t + 1));
    }

    /// State `age` ticks before the newest (`0` is the newest).
    pub fn back(&self, age: usize) -> Option<&RobotState> {
        self.states.len().checked_sub(age + 1).and_then(|i| self.states.get(i))
    }

    /// Oldest-first access.
    pub fn get(&self, index: usize) -> Option<&RobotState> {
        self.states.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RobotState> {
        self.states.iter()
    }
}

/// Normalised features of one measured state with free-foot forces zeroed.
pub fn state_features(state: &RobotState, normalizer: &Normalizer, out: &mut [f64]) {
    let mut s = *state;
    s.zero_free_forces();
    s.write_features(out);
    normalizer.normalize_in_place(out);
}

/// Encoder window ending `age` ticks before the newest state.
pub fn build_window_at(
    buffer: &StateBuffer,
    config: &ModelConfig,
    normalizer: &Normalizer,
    age: usize,
) -> Result<Vec<f64>> {
    let needed = config.history_ticks() + age;
    if buffer.len() < needed {
        return Err(Error::InsufficientHistory { needed, available: buffer.len() });
    }
    let (r, n, d) = (config.stride(), config.window_len, config.state_dim);
    let mut out = vec![0.0; n * d];
    for i in 0..n {
        let state = buffer.back(age + r * (n - 1 - i)).expect("length checked");
        state_features(state, normalizer, &mut out[i * d..(i + 1) * d]);
    }
    Ok(out)
}

/// Encoder window ending at the newest state.
pub fn build_window(buffer: &StateBuffer, config: &ModelConfig, normalizer: &Normalizer) -> Result<Vec<f64>> {
    build_window_at(buffer, config, normalizer, 0)
}
