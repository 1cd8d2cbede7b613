//! Point-mass-with-drag dynamics.
//!
//! State is position and velocity in an inertial frame with z up (ft, ft/s),
//! the input is a commanded acceleration (ft/s²). The only other force is
//! aerodynamic drag; gravity is not modeled.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::error::{Error, Result};

/// Standard gravity, ft/s².
pub const STANDARD_GRAVITY: f64 = 32.174;

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Matrix6x3 = SMatrix<f64, 6, 3>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl State {
    pub fn new(p: [f64; 3], v: [f64; 3]) -> Self {
        Self {
            p: Vector3::from(p),
            v: Vector3::from(v),
        }
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            p: x.fixed_rows::<3>(0).into_owned(),
            v: x.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn altitude(&self) -> f64 {
        self.p.z
    }

    pub fn speed(&self) -> f64 {
        self.v.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Evader,
    Pursuer,
    Asset,
}

/// Physical and constraint parameters of one body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSpec {
    pub name: String,
    pub role: Role,
    /// slugs
    pub mass: f64,
    /// ft²
    pub area: f64,
    /// Input bound in multiples of standard gravity (per axis).
    pub u_max: f64,
    pub mach_min: f64,
    /// Node count of the player's transcription grid.
    pub nodes: usize,
    pub initial: State,
}

impl PlayerSpec {
    /// Per-axis input bound in ft/s².
    pub fn accel_bound(&self) -> f64 {
        self.u_max * STANDARD_GRAVITY
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(format!("{key}.{field}"), msg))
            }
        };
        check(self.mass > 0.0 && self.mass.is_finite(), "mass", "must be positive")?;
        check(self.area > 0.0 && self.area.is_finite(), "area", "must be positive")?;
        check(self.u_max >= 0.0 && self.u_max.is_finite(), "u_max", "must be non-negative")?;
        check(
            self.mach_min >= 0.0 && self.mach_min.is_finite(),
            "mach_min",
            "must be non-negative",
        )?;
        check(self.nodes >= 2, "nodes", "need at least 2 nodes")?;
        check(self.initial.is_finite(), "initial", "must be finite")?;
        Ok(())
    }
}

pub fn mach(atm: &AtmosphereModel, state: &State) -> f64 {
    state.speed() / atm.speed_of_sound.eval(state.altitude())
}

pub fn drag_accel(atm: &AtmosphereModel, state: &State, spec: &PlayerSpec) -> Vector3<f64> {
    let speed = state.speed();
    if speed == 0.0 {
        return Vector3::zeros();
    }
    let rho = atm.density.eval(state.altitude());
    let cd = atm.drag_coeff.eval(mach(atm, state));
    -0.5 * (spec.area / spec.mass) * rho * cd * speed * state.v
}

/// Time derivative of the state, `(v, u + d)`.
pub fn state_deriv(atm: &AtmosphereModel, state: &State, u: &Vector3<f64>, spec: &PlayerSpec) -> State {
    State {
        p: state.v,
        v: u + drag_accel(atm, state, spec),
    }
}

/// Affine maps between physical and nondimensional variables.
///
/// `scaled = physical / scale + shift`. Time is normalized separately: the
/// decision variable for the final time is `T / time_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledVars {
    pub state_scale: Vector6<f64>,
    pub state_shift: Vector6<f64>,
    pub input_scale: Vector3<f64>,
    pub input_shift: Vector3<f64>,
    pub time_scale: f64,
}

/// ft
pub const CHAR_LENGTH: f64 = 10_000.0;
/// ft/s
pub const CHAR_SPEED: f64 = 3_000.0;
/// s
pub const CHAR_TIME: f64 = 10.0;

impl ScaledVars {
    /// Default scaling for a player: 10,000 ft, 3,000 ft/s, its own input bound, 10 s.
    pub fn for_player(spec: &PlayerSpec) -> Self {
        let a = if spec.accel_bound() > 0.0 {
            spec.accel_bound()
        } else {
            STANDARD_GRAVITY
        };
        Self {
            state_scale: Vector6::new(
                CHAR_LENGTH,
                CHAR_LENGTH,
                CHAR_LENGTH,
                CHAR_SPEED,
                CHAR_SPEED,
                CHAR_SPEED,
            ),
            state_shift: Vector6::zeros(),
            input_scale: Vector3::repeat(a),
            input_shift: Vector3::zeros(),
            time_scale: CHAR_TIME,
        }
    }

    pub fn state(&self, x: &Vector6<f64>) -> Vector6<f64> {
        x.component_div(&self.state_scale) + self.state_shift
    }

    pub fn unstate(&self, chi: &Vector6<f64>) -> Vector6<f64> {
        (chi - self.state_shift).component_mul(&self.state_scale)
    }

    pub fn input(&self, u: &Vector3<f64>) -> Vector3<f64> {
        u.component_div(&self.input_scale) + self.input_shift
    }

    pub fn uninput(&self, mu: &Vector3<f64>) -> Vector3<f64> {
        (mu - self.input_shift).component_mul(&self.input_scale)
    }

    pub fn time(&self, t: f64) -> f64 {
        t / self.time_scale
    }

    pub fn untime(&self, t_scaled: f64) -> f64 {
        t_scaled * self.time_scale
    }

    pub fn scale_state(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = fixed::<6>(x)?;
        Ok(self.state(&x).as_slice().to_vec())
    }

    pub fn unscale_state(&self, chi: &[f64]) -> Result<Vec<f64>> {
        let chi = fixed::<6>(chi)?;
        Ok(self.unstate(&chi).as_slice().to_vec())
    }

    pub fn scale_input(&self, u: &[f64]) -> Result<Vec<f64>> {
        let u = fixed::<3>(u)?;
        Ok(self.input(&u).as_slice().to_vec())
    }

    pub fn unscale_input(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let mu = fixed::<3>(mu)?;
        Ok(self.uninput(&mu).as_slice().to_vec())
    }
}

fn fixed<const N: usize>(x: &[f64]) -> Result<SVector<f64, N>> {
    if x.len() != N {
        return Err(Error::Dimension {
            expected: N,
            got: x.len(),
        });
    }
    Ok(SVector::<f64, N>::from_column_slice(x))
}

/// Finite-difference step on scaled variables.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Dynamics of one player expressed on scaled variables.
#[derive(Debug, Clone, Copy)]
pub struct PlayerModel<'a> {
    pub atm: &'a AtmosphereModel,
    pub spec: &'a PlayerSpec,
    pub scaling: &'a ScaledVars,
}

impl<'a> PlayerModel<'a> {
    pub fn new(atm: &'a AtmosphereModel, spec: &'a PlayerSpec, scaling: &'a ScaledVars) -> Self {
        Self { atm, spec, scaling }
    }

    /// Scaled state rate per physical second.
    pub fn rate(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> Vector6<f64> {
        let x = State::from_vector(&self.scaling.unstate(chi));
        let u = self.scaling.uninput(mu);
        let dx = state_deriv(self.atm, &x, &u, self.spec).to_vector();
        dx.component_div(&self.scaling.state_scale)
    }

    /// Scaled state rate per unit normalized time, for scaled final time `t_scaled`.
    pub fn normalized_rate(&self, chi: &Vector6<f64>, mu: &Vector3<f64>, t_scaled: f64) -> Vector6<f64> {
        self.rate(chi, mu) * (t_scaled * self.scaling.time_scale)
    }

    /// Central-difference Jacobians of [`rate`](Self::rate) on scaled variables.
    pub fn scaled_jacobians(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> (Matrix6, Matrix6x3) {
        let h = JACOBIAN_STEP;
        let mut a = Matrix6::zeros();
        for j in 0..6 {
            let mut xp = *chi;
            let mut xm = *chi;
            xp[j] += h;
            xm[j] -= h;
            let col = (self.rate(&xp, mu) - self.rate(&xm, mu)) / (2.0 * h);
            a.set_column(j, &col);
        }
        let mut b = Matrix6x3::zeros();
        for j in 0..3 {
            let mut up = *mu;
            let mut um = *mu;
            up[j] += h;
            um[j] -= h;
            let col = (self.rate(chi, &up) - self.rate(chi, &um)) / (2.0 * h);
            b.set_column(j, &col);
        }
        (a, b)
    }

    /// Jacobians of the physical dynamics, obtained from the scaled ones.
    pub fn jacobians(&self, state: &State, u: &Vector3<f64>) -> (Matrix6, Matrix6x3) {
        let chi = self.scaling.state(&state.to_vector());
        let mu = self.scaling.input(u);
        let (a, b) = self.scaled_jacobians(&chi, &mu);
        let sx = Matrix6::from_diagonal(&self.scaling.state_scale);
        let sx_inv = Matrix6::from_diagonal(&self.scaling.state_scale.map(|s| 1.0 / s));
        let su_inv = Matrix3::from_diagonal(&self.scaling.input_scale.map(|s| 1.0 / s));
        (sx * a * sx_inv, sx * b * su_inv)
    }
}

/// Physical Jacobians `(∂ẋ/∂x, ∂ẋ/∂u)` by central differences on scaled variables.
pub fn jacobians(atm: &AtmosphereModel, state: &State, u: &Vector3<f64>, spec: &PlayerSpec) -> (Matrix6, Matrix6x3) {
    let scaling = ScaledVars::for_player(spec);
    PlayerModel::new(atm, spec, &scaling).jacobians(state, u)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn table1_player(initial: State, u_max: f64) -> PlayerSpec {
        PlayerSpec {
            name: "test".into(),
            role: Role::Evader,
            mass: 1000.0,
            area: std::f64::consts::PI / 4.0 * 25.0,
            u_max,
            mach_min: 0.5,
            nodes: 30,
            initial,
        }
    }

    #[test]
    fn mach_definitions() {
        let atm = AtmosphereModel::bundled();
        let s = State::new([0.0, 0.0, 30_000.0], [0.0; 3]);
        assert_eq!(mach(&atm, &s), 0.0);
        let a = atm.speed_of_sound.eval(30_000.0);
        let s = State::new([0.0, 0.0, 30_000.0], [0.0, a, 0.0]);
        assert!((mach(&atm, &s) - 1.0).abs() < 1e-15);
        let s = State::new([0.0, 0.0, 30_000.0], [3000.0, 0.0, 0.0]);
        assert_eq!(mach(&atm, &s), 3000.0 / a);
    }

    #[test]
    fn drag_matches_hand_evaluation() {
        let atm = AtmosphereModel::bundled();
        let s = State::new([0.0, 0.0, 30_000.0], [3000.0, 0.0, 0.0]);
        let spec = table1_player(s, 7.0);
        let rho = atm.density.eval(30_000.0);
        let cd = atm.drag_coeff.eval(3000.0 / atm.speed_of_sound.eval(30_000.0));
        let expect = -0.5 * (spec.area / 1000.0) * rho * cd * 3000.0 * 3000.0;
        let d = drag_accel(&atm, &s, &spec);
        assert!((d.x - expect).abs() <= 1e-12 * expect.abs());
        assert_eq!(d.y, 0.0);
        assert_eq!(d.z, 0.0);
        let still = State::new([0.0, 0.0, 30_000.0], [0.0; 3]);
        assert_eq!(drag_accel(&atm, &still, &spec), Vector3::zeros());
        let rest = state_deriv(&atm, &still, &Vector3::zeros(), &spec);
        assert_eq!(rest.to_vector(), Vector6::zeros());
    }

    #[test]
    fn vacuum_derivative_is_kinematic() {
        let atm = AtmosphereModel::bundled().vacuum();
        let s = State::new([1.0, 2.0, 20_000.0], [100.0, -50.0, 3.0]);
        let spec = table1_player(s, 7.0);
        let u = Vector3::new(1.0, 2.0, 3.0);
        let d = state_deriv(&atm, &s, &u, &spec);
        assert_eq!(d.p, s.v);
        assert_eq!(d.v, u);
    }

    #[test]
    fn jacobian_block_structure() {
        let atm = AtmosphereModel::bundled();
        let s = State::new([-10_000.0, 0.0, 31_000.0], [3000.0, 100.0, -50.0]);
        let spec = table1_player(s, 7.0);
        let (a, b) = jacobians(&atm, &s, &Vector3::new(10.0, -20.0, 5.0), &spec);
        for i in 0..3 {
            for j in 0..3 {
                let eye = if i == j { 1.0 } else { 0.0 };
                assert!((a[(i, 3 + j)] - eye).abs() < 1e-9);
                assert!(a[(i, j)].abs() < 1e-9);
                assert_eq!(b[(i, j)], 0.0);
                assert!((b[(3 + i, j)] - eye).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn scaling_round_trip_and_example() {
        let s = State::new([-10_000.0, 0.0, 31_000.0], [3000.0, 0.0, 0.0]);
        let spec = table1_player(s, 7.0);
        let sc = ScaledVars::for_player(&spec);
        let chi = sc.scale_state(&[-10_000.0, 0.0, 31_000.0, 3000.0, 0.0, 0.0]).unwrap();
        assert_eq!(chi, vec![-1.0, 0.0, 3.1, 1.0, 0.0, 0.0]);
        let back = sc.unscale_state(&chi).unwrap();
        assert!((back[2] - 31_000.0).abs() < 1e-12 * 31_000.0);
        assert_eq!(sc.scale_state(&[0.0; 6]).unwrap(), vec![0.0; 6]);
        assert!(matches!(
            sc.scale_input(&[1.0, 2.0]),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
        let mu = sc.scale_input(&[7.0 * STANDARD_GRAVITY, 0.0, -7.0 * STANDARD_GRAVITY]).unwrap();
        assert_eq!(mu, vec![1.0, 0.0, -1.0]);
    }
}
