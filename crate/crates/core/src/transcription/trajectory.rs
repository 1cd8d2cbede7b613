use nalgebra::{Vector3, Vector6};

use crate::dynamics::{ScaledVars, State};
use crate::error::{Error, Result};

/// One player's discrete solution: `K` state and input nodes on the
/// normalized grid `τ_k = k/(K−1)` and a final time `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    /// Commanded accelerations, ft/s².
    pub inputs: Vec<Vector3<f64>>,
    /// Final time, s.
    pub final_time: f64,
    pub converged: bool,
}

impl Trajectory {
    pub fn new(states: Vec<State>, inputs: Vec<Vector3<f64>>, final_time: f64) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: states.len(),
            });
        }
        if inputs.len() != states.len() {
            return Err(Error::Dimension {
                expected: states.len(),
                got: inputs.len(),
            });
        }
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::Other(format!("final time must be positive, got {final_time}")));
        }
        Ok(Self {
            states,
            inputs,
            final_time,
            converged: false,
        })
    }

    /// Constant-velocity straight line from `initial` to `target` at the
    /// initial speed, zero inputs, `T = distance / speed`.
    pub fn straight_line(initial: &State, target: &Vector3<f64>, nodes: usize) -> Result<Self> {
        let delta = target - initial.p;
        let dist = delta.norm();
        let speed = initial.speed();
        if speed <= 0.0 {
            return Err(Error::Other("straight-line guess needs a nonzero initial speed".into()));
        }
        if dist <= 0.0 {
            return Err(Error::Other("straight-line guess needs distinct endpoints".into()));
        }
        let t = dist / speed;
        let v = delta / t;
        let states = (0..nodes)
            .map(|k| {
                let tau = k as f64 / (nodes - 1) as f64;
                State {
                    p: initial.p + delta * tau,
                    v,
                }
            })
            .collect();
        Self::new(states, vec![Vector3::zeros(); nodes], t)
    }

    pub fn nodes(&self) -> usize {
        self.states.len()
    }

    pub fn tau(&self, k: usize) -> f64 {
        k as f64 / (self.nodes() - 1) as f64
    }

    /// Physical time of node `k`.
    pub fn node_time(&self, k: usize) -> f64 {
        self.tau(k) * self.final_time
    }

    /// Interval index and fraction for physical time `t` within `[0, T]`.
    pub(crate) fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.nodes() - 1;
        let s = (t / self.final_time * n as f64).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        (k, s - k as f64)
    }

    /// Position at physical time `t`, linear between nodes; beyond `T` the
    /// final velocity is held.
    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        if t > self.final_time {
            let last = self.states.last().unwrap();
            return last.p + last.v * (t - self.final_time);
        }
        let (k, f) = self.locate(t.max(0.0));
        self.states[k].p * (1.0 - f) + self.states[k + 1].p * f
    }

    /// Velocity at physical time `t`, linear between nodes and held outside.
    pub fn velocity_at(&self, t: f64) -> Vector3<f64> {
        let (k, f) = self.locate(t);
        self.states[k].v * (1.0 - f) + self.states[k + 1].v * f
    }

    /// Input at physical time `t` with first-order hold; the last node is held after `T`.
    pub fn input_at(&self, t: f64) -> Vector3<f64> {
        let (k, f) = self.locate(t);
        self.inputs[k] * (1.0 - f) + self.inputs[k + 1] * f
    }

    pub fn scaled_states(&self, scaling: &ScaledVars) -> Vec<Vector6<f64>> {
        self.states.iter().map(|s| scaling.state(&s.to_vector())).collect()
    }

    pub fn scaled_inputs(&self, scaling: &ScaledVars) -> Vec<Vector3<f64>> {
        self.inputs.iter().map(|u| scaling.input(u)).collect()
    }

    pub fn terminal(&self) -> &State {
        self.states.last().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.final_time.is_finite()
            && self.states.iter().all(State::is_finite)
            && self.inputs.iter().all(|u| u.iter().all(|v| v.is_finite()))
    }
}
