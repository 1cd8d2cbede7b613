//! Standalone property checks shared by the property suite and the
//! acceptance report. Each returns a short summary or a failure message.

#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ibrscp::atmosphere::{AtmosphereModel, InterpTable};
use ibrscp::conic::{check_kkt, solve, Affine, ConicProblem, SolverSettings, Status};
use ibrscp::dynamics::{jacobians, state_deriv, Matrix6, Matrix6x3, PlayerSpec, Role, State};
use ibrscp::scenario::{examples_dir, Scenario};
use ibrscp::simulation::{integrate, verify_open_loop, EngagementSettings, GuidanceKind, GuidanceLaw};
use ibrscp::transcription::{discretize_foh, ScaledDynamics, Trajectory, DEFAULT_SUBSTEPS};

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn player(initial: State, u_max: f64) -> PlayerSpec {
    PlayerSpec {
        name: "P".into(),
        role: Role::Pursuer,
        mass: 1_000.0,
        area: std::f64::consts::PI * 25.0 / 4.0,
        u_max,
        mach_min: 0.5,
        nodes: 30,
        initial,
    }
}

fn table_read_back_and_c1(name: &str, t: &InterpTable) -> Result<(), String> {
    let (lo, hi) = t.span();
    let range = t.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, (&k, &v)) in t.knots().iter().zip(t.values()).enumerate() {
        let got = t.eval(k);
        ensure((got - v).abs() <= 1e-12 * v.abs().max(1e-300), || {
            format!("{name}: knot {i} reads back {got}, stored {v}")
        })?;
        if k <= lo || k >= hi {
            continue;
        }
        let h = 1e-5 * (t.knots()[i + 1] - t.knots()[i - 1]);
        let left = (t.eval(k) - t.eval(k - h)) / h;
        let right = (t.eval(k + h) - t.eval(k)) / h;
        let scale = left.abs().max(right.abs()).max(range / (hi - lo));
        ensure((left - right).abs() <= 1e-3 * scale, || {
            format!("{name}: slope jump at knot {i}: {left} vs {right}")
        })?;
        let mid = 0.5 * (k + t.knots()[i + 1]);
        let fd = t.eval_derivative(mid);
        let hh = 1e-3 * (t.knots()[i + 1] - k);
        let reference = (t.eval(mid + hh) - t.eval(mid - hh)) / (2.0 * hh);
        ensure((fd - reference).abs() <= 1e-4 * reference.abs().max(range / (hi - lo)), || {
            format!("{name}: derivative {fd} vs {reference} in segment {i}")
        })?;
    }
    Ok(())
}

/// Tables reproduce their samples at the knots and are C¹ across them.
pub fn interpolation() -> Check {
    let atm = AtmosphereModel::bundled();
    let mut knots = 0;
    for (name, t) in [
        ("density", &atm.density),
        ("speed of sound", &atm.speed_of_sound),
        ("drag coefficient", &atm.drag_coeff),
    ] {
        table_read_back_and_c1(name, t)?;
        knots += t.knots().len();
    }
    Ok(format!("{knots} knots read back exactly, slopes continuous"))
}

/// Taylor remainder of the dynamics shrinks quadratically along random
/// directions, so the Jacobians are the true derivatives.
pub fn jacobian_taylor() -> Check {
    let atm = AtmosphereModel::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = f64::INFINITY;
    let cases = 200;
    for c in 0..cases {
        let x = State::new(
            [rng.gen_range(-2e4..2e4), rng.gen_range(-2e4..2e4), rng.gen_range(5e3..6e4)],
            [rng.gen_range(-3e3..3e3), rng.gen_range(-3e3..3e3), rng.gen_range(-1e3..1e3)],
        );
        let spec = player(x.clone(), 8.0);
        let u = Vector3::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0));
        let dx = Vector6::from_fn(|i, _| rng.gen_range(-1.0..1.0) * if i < 3 { 1_000.0 } else { 300.0 });
        let du = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0) * 50.0);
        let (a, b) = jacobians(&atm, &x, &u, &spec);
        let f0 = state_deriv(&atm, &x, &u, &spec).to_vector();
        let remainder = |h: f64| {
            let xs = State::from_vector(&(x.to_vector() + dx * h));
            let f = state_deriv(&atm, &xs, &(u + du * h), &spec).to_vector();
            (f - f0 - (a * dx + b * du) * h).norm()
        };
        let (e1, e2) = (remainder(1e-2), remainder(5e-3));
        let scale = f0.norm().max(1.0);
        if e1 <= 1e-10 * scale {
            continue;
        }
        let ratio = e1 / e2;
        worst = worst.min(ratio);
        ensure(ratio >= 3.0, || format!("case {c}: remainder ratio {ratio:.2} (expected ~4)"))?;
    }
    Ok(format!("{cases} random points, worst halving ratio {worst:.2}"))
}

struct Linear {
    m: Matrix6,
    n: Matrix6x3,
}

impl ScaledDynamics for Linear {
    fn rate(&self, chi: &Vector6<f64>, mu: &Vector3<f64>) -> Vector6<f64> {
        self.m * chi + self.n * mu
    }
    fn rate_jacobians(&self, _: &Vector6<f64>, _: &Vector3<f64>) -> (Matrix6, Matrix6x3) {
        (self.m, self.n)
    }
    fn time_scale(&self) -> f64 {
        10.0
    }
}

/// First-order-hold discretization of a dense LTI system matches the
/// block matrix exponential.
pub fn lti_discretization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sys = Linear {
        m: Matrix6::from_fn(|_, _| rng.gen_range(-0.3..0.3)),
        n: Matrix6x3::from_fn(|_, _| rng.gen_range(-1.0..1.0)),
    };
    let k_nodes = 12;
    let s = 0.8;
    let chi: Vec<Vector6<f64>> = (0..k_nodes).map(|_| Vector6::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect();
    let mu: Vec<Vector3<f64>> = (0..k_nodes).map(|_| Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect();
    let ltv = discretize_foh(&sys, &chi, &mu, s, DEFAULT_SUBSTEPS).map_err(|e| e.to_string())?;
    let dt = s * sys.time_scale() / (k_nodes - 1) as f64;
    // [[A, B, 0], [0, 0, I/dt], [0, 0, 0]] exponentiated over dt
    let mut big = DMatrix::<f64>::zeros(12, 12);
    big.view_mut((0, 0), (6, 6)).copy_from(&sys.m);
    big.view_mut((0, 6), (6, 3)).copy_from(&sys.n);
    for i in 0..3 {
        big[(6 + i, 9 + i)] = 1.0 / dt;
    }
    let e = (big * dt).exp();
    let phi = e.view((0, 0), (6, 6)).clone_owned();
    let g1 = e.view((0, 6), (6, 3)).clone_owned();
    let g2 = e.view((0, 9), (6, 3)).clone_owned();
    let mut err: f64 = 0.0;
    for k in 0..ltv.intervals() {
        let da = (DMatrix::from_column_slice(6, 6, ltv.a[k].as_slice()) - &phi).amax();
        let dm = (DMatrix::from_column_slice(6, 3, ltv.b_minus[k].as_slice()) - (&g1 - &g2)).amax();
        let dp = (DMatrix::from_column_slice(6, 3, ltv.b_plus[k].as_slice()) - &g2).amax();
        err = err.max(da).max(dm).max(dp);
    }
    ensure(err <= 1e-8, || format!("max entry error {err:.2e}"))?;
    Ok(format!("{} intervals, max entry error {err:.1e}", ltv.intervals()))
}

fn random_socp(rng: &mut ChaCha8Rng) -> ConicProblem {
    let n = rng.gen_range(2..6);
    let mut p = ConicProblem::with_vars(n);
    p.cost = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    p.lower = vec![-5.0; n];
    p.upper = vec![5.0; n];
    let centre: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..rng.gen_range(0..4) {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at_centre: f64 = a.iter().zip(&centre).map(|(a, c)| a * c).sum();
        let mut row = Affine::new().plus(-(at_centre + rng.gen_range(0.1..1.0)));
        for (j, aj) in a.iter().enumerate() {
            row.add_term(j, *aj);
        }
        p.add_le(row);
    }
    for _ in 0..rng.gen_range(1..3) {
        let radius = rng.gen_range(0.5..2.0);
        let rest = (0..n).map(|j| Affine::var(j).plus(-centre[j] - rng.gen_range(-0.2..0.2))).collect();
        p.add_soc(Affine::constant(radius), rest);
    }
    if rng.gen_bool(0.3) {
        p.add_eq(Affine::var(0).plus(-centre[0]));
    }
    p
}

/// Interior-point KKT residuals on random feasible SOCPs and the norm
/// epigraph with known optimum 5.
pub fn conic_kkt() -> Check {
    let settings = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let p = random_socp(&mut rng);
        let sol = solve(&p, &settings).map_err(|e| format!("case {k}: {e}"))?;
        ensure(sol.status == Status::Optimal, || format!("case {k}: status {:?}", sol.status))?;
        let r = check_kkt(&p, &sol).max();
        worst = worst.max(r);
        ensure(r <= 1e-6, || format!("case {k}: KKT residual {r:.2e}"))?;
    }
    let mut p = ConicProblem::with_vars(3);
    p.cost[2] = 1.0;
    p.add_eq(Affine::var(0).plus(-3.0));
    p.add_eq(Affine::var(1).plus(-4.0));
    p.add_soc(Affine::var(2), vec![Affine::var(0), Affine::var(1)]);
    let sol = solve(&p, &settings).map_err(|e| e.to_string())?;
    ensure((sol.objective - 5.0).abs() < 1e-7, || format!("epigraph optimum {}", sol.objective))?;
    ensure(check_kkt(&p, &sol).max() <= 1e-6, || "epigraph KKT residual".into())?;
    Ok(format!("50 random SOCPs, worst residual {worst:.1e}; epigraph t* = {:.9}", sol.objective))
}

/// Halving the RK4 step shrinks the error at least twelvefold on a drag
/// and time-varying input case.
pub fn rk4_order() -> Check {
    let atm = AtmosphereModel::bundled();
    let spec = player(State::new([0.0, 0.0, 30_000.0], [2_500.0, 300.0, -100.0]), 7.0);
    let input = |t: f64, _: &State| Vector3::new(-100.0 * (0.7 * t).cos(), 80.0 * (1.3 * t).sin(), 30.0);
    let end = |dt: f64| -> Result<Vector6<f64>, String> {
        let s = integrate(&atm, &spec, &spec.initial, &input, (0.0, 4.0), dt).map_err(|e| e.to_string())?;
        Ok(s.last().unwrap().state.to_vector())
    };
    let reference = end(0.4 / 64.0)?;
    let e1 = (end(0.4)? - reference).norm();
    let e2 = (end(0.2)? - reference).norm();
    let ratio = e1 / e2;
    ensure(ratio >= 12.0, || format!("convergence ratio {ratio:.2}"))?;
    Ok(format!("convergence ratio {ratio:.2}"))
}

/// PN with N' = 3 intercepts a non-maneuvering head-on target flying at
/// the asset.
pub fn pn_head_on() -> Check {
    let atm = AtmosphereModel::bundled();
    let mut s = Scenario::from_path(&examples_dir().join("example1.toml")).map_err(|e| e.to_string())?;
    let mut game = s.game();
    let e = &mut game.evader.initial;
    e.v = (game.asset - e.p).normalize() * e.v.norm();
    s.players[0].velocity = e.v.into();
    let straight = Trajectory::straight_line(&game.evader.initial, &game.asset, 30).map_err(|e| e.to_string())?;
    let law = GuidanceLaw::new(GuidanceKind::Pn, 3.0).map_err(|e| e.to_string())?;
    let res = verify_open_loop(&atm, &game, &straight, &[law], &EngagementSettings::default())
        .map_err(|e| e.to_string())?;
    let miss = res.pursuers[0].min_separation;
    ensure(miss < 1.0, || format!("miss {miss:.3} ft"))?;
    Ok(format!("miss {miss:.3} ft at t = {:.3} s", res.pursuers[0].closest_approach_time))
}

pub const PROPERTY_CHECKS: [(&str, fn() -> Check); 6] = [
    ("interpolation read-back and C1", interpolation),
    ("Jacobian Taylor remainder", jacobian_taylor),
    ("LTI discretization exactness", lti_discretization),
    ("conic KKT residuals", conic_kkt),
    ("RK4 order", rk4_order),
    ("PN head-on intercept", pn_head_on),
];
