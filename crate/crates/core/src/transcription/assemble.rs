//! Assembly of the evader and pursuer convex subproblems.
//!
//! Decision vector, all in scaled units:
//!
//! | block        | size      | meaning                                  |
//! |--------------|-----------|------------------------------------------|
//! | `χ_k, μ_k`   | 9 per node| state and input at node `k`, interleaved |
//! | `s`          | 1         | final time / time scale                  |
//! | `ν_k`        | 6(K−1)    | virtual controls                         |
//! | `e_k`        | 6(K−1)    | epigraph of `|ν_k|`                      |
//! | `t_k`        | K         | trust epigraph `‖(χ_k, μ_k) − nominal‖`  |
//! | `t_s`        | 1         | trust epigraph `|s − s̄|`                |
//!
//! The cost is `T + w_vc Σ e + w_tr (Σ t_k + t_s)` with `T = s·t_c` in seconds.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::convexify::{capture_constraint, convexify_evasion, convexify_min_mach, StateRow};
use super::discretize::{discretize_foh, LtvModel};
use super::trajectory::Trajectory;
use crate::atmosphere::AtmosphereModel;
use crate::conic::{Affine, ConicProblem};
use crate::dynamics::{PlayerModel, PlayerSpec, ScaledVars, State};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubproblemWeights {
    pub w_vc: f64,
    pub w_tr: f64,
    pub eps_vc: f64,
    pub eps_tr: f64,
}

impl Default for SubproblemWeights {
    fn default() -> Self {
        Self {
            w_vc: 1e5,
            w_tr: 1.0,
            eps_vc: 1e-2,
            eps_tr: 1e-5,
        }
    }
}

/// Scenario quantities the subproblems depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameParams {
    /// r_c, ft
    pub capture_radius: f64,
    /// r_e, ft
    pub evasion_radius: f64,
    /// T_lo, s
    pub time_lower: f64,
    /// T_hi = T̄^C, s
    pub time_upper: f64,
    /// δ_t in `T^P ≤ T̄^E − δ_t`, s
    pub pursuer_margin: f64,
    /// RK4 substeps per discretization interval.
    pub substeps: usize,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            capture_radius: 1.0,
            evasion_radius: 500.0,
            time_lower: 1.0,
            time_upper: 60.0,
            pursuer_margin: 0.1,
            substeps: super::discretize::DEFAULT_SUBSTEPS,
        }
    }
}

/// Variable indices of a subproblem with `nodes` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nodes: usize,
}

impl Layout {
    pub fn state(&self, k: usize) -> usize {
        9 * k
    }

    pub fn input(&self, k: usize) -> usize {
        9 * k + 6
    }

    pub fn time(&self) -> usize {
        9 * self.nodes
    }

    pub fn nu(&self, k: usize) -> usize {
        self.time() + 1 + 6 * k
    }

    pub fn nu_abs(&self, k: usize) -> usize {
        self.nu(self.nodes - 1) + 6 * k
    }

    pub fn trust(&self, k: usize) -> usize {
        self.nu_abs(self.nodes - 1) + k
    }

    pub fn time_trust(&self) -> usize {
        self.trust(self.nodes)
    }

    pub fn num_vars(&self) -> usize {
        self.time_trust() + 1
    }
}

/// A convex subproblem together with what is needed to interpret its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub problem: ConicProblem,
    pub layout: Layout,
    pub ltv: LtvModel,
    pub scaling: ScaledVars,
    pub nominal_chi: Vec<Vector6<f64>>,
    pub nominal_mu: Vec<Vector3<f64>>,
    pub nominal_s: f64,
    pub weights: SubproblemWeights,
    /// Diagnostics raised during assembly.
    pub notes: Vec<String>,
}

impl Subproblem {
    fn chi(&self, x: &[f64], k: usize) -> Vector6<f64> {
        Vector6::from_column_slice(&x[self.layout.state(k)..self.layout.state(k) + 6])
    }

    fn mu(&self, x: &[f64], k: usize) -> Vector3<f64> {
        Vector3::from_column_slice(&x[self.layout.input(k)..self.layout.input(k) + 3])
    }

    /// Physical trajectory encoded in `x`; `converged` is left false.
    pub fn extract(&self, x: &[f64]) -> Trajectory {
        let n = self.layout.nodes;
        let states = (0..n)
            .map(|k| State::from_vector(&self.scaling.unstate(&self.chi(x, k))))
            .collect();
        let inputs = (0..n).map(|k| self.scaling.uninput(&self.mu(x, k))).collect();
        Trajectory {
            states,
            inputs,
            final_time: self.scaling.untime(x[self.layout.time()]),
            converged: false,
        }
    }

    /// `w_vc Σ ‖ν_k‖₁`
    pub fn virtual_control_cost(&self, x: &[f64]) -> f64 {
        let l = self.layout;
        let sum: f64 = (0..l.nodes - 1)
            .flat_map(|k| (0..6).map(move |i| l.nu(k) + i))
            .map(|j| x[j].abs())
            .sum();
        self.weights.w_vc * sum
    }

    /// `w_tr (Σ ‖(χ_k, μ_k) − nominal‖₂ + |s − s̄|)`
    pub fn trust_cost(&self, x: &[f64]) -> f64 {
        let mut sum = (x[self.layout.time()] - self.nominal_s).abs();
        for k in 0..self.layout.nodes {
            let dx = self.chi(x, k) - self.nominal_chi[k];
            let du = self.mu(x, k) - self.nominal_mu[k];
            sum += (dx.norm_squared() + du.norm_squared()).sqrt();
        }
        self.weights.w_tr * sum
    }

    /// The objective computed directly from its definition.
    pub fn direct_cost(&self, x: &[f64]) -> f64 {
        self.scaling.untime(x[self.layout.time()]) + self.virtual_control_cost(x) + self.trust_cost(x)
    }

    /// Packs a physical trajectory into a decision vector, with virtual
    /// controls set to the model defects and all epigraphs tight.
    pub fn candidate(&self, traj: &Trajectory) -> Vec<f64> {
        let l = self.layout;
        let mut x = vec![0.0; l.num_vars()];
        let chi = traj.scaled_states(&self.scaling);
        let mu = traj.scaled_inputs(&self.scaling);
        let s = self.scaling.time(traj.final_time);
        for k in 0..l.nodes {
            x[l.state(k)..l.state(k) + 6].copy_from_slice(chi[k].as_slice());
            x[l.input(k)..l.input(k) + 3].copy_from_slice(mu[k].as_slice());
        }
        x[l.time()] = s;
        for k in 0..l.nodes - 1 {
            let nu = chi[k + 1] - self.ltv.step(k, &chi[k], &mu[k], &mu[k + 1], s);
            x[l.nu(k)..l.nu(k) + 6].copy_from_slice(nu.as_slice());
        }
        self.tighten_epigraphs(&mut x);
        x
    }

    /// Sets every epigraph variable to the value of the quantity it bounds.
    pub fn tighten_epigraphs(&self, x: &mut [f64]) {
        let l = self.layout;
        for k in 0..l.nodes - 1 {
            for i in 0..6 {
                x[l.nu_abs(k) + i] = x[l.nu(k) + i].abs();
            }
        }
        for k in 0..l.nodes {
            let dx = self.chi(x, k) - self.nominal_chi[k];
            let du = self.mu(x, k) - self.nominal_mu[k];
            x[l.trust(k)] = (dx.norm_squared() + du.norm_squared()).sqrt();
        }
        x[l.time_trust()] = (x[l.time()] - self.nominal_s).abs();
    }

    /// Largest violation of the affine inequalities and equalities at `x`.
    pub fn max_linear_violation(&self, x: &[f64]) -> f64 {
        let eq = self.problem.equalities.iter().map(|e| e.eval(x).abs());
        let le = self.problem.inequalities.iter().map(|e| e.eval(x).max(0.0));
        eq.chain(le).fold(0.0, f64::max)
    }
}

fn check_nodes(nominal: &Trajectory, spec: &PlayerSpec) -> Result<()> {
    if nominal.nodes() != spec.nodes {
        return Err(Error::Dimension {
            expected: spec.nodes,
            got: nominal.nodes(),
        });
    }
    Ok(())
}

/// Variables, dynamics, bounds, min-Mach rows, penalties and cost shared by
/// both players.
fn base(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    nominal: &Trajectory,
    params: &GameParams,
    weights: &SubproblemWeights,
    time_upper: f64,
) -> Result<Subproblem> {
    check_nodes(nominal, spec)?;
    let scaling = ScaledVars::for_player(spec);
    let model = PlayerModel::new(atm, spec, &scaling);
    let chi = nominal.scaled_states(&scaling);
    let mu = nominal.scaled_inputs(&scaling);
    let s_bar = scaling.time(nominal.final_time);
    let ltv = discretize_foh(&model, &chi, &mu, s_bar, params.substeps)?;
    let layout = Layout { nodes: spec.nodes };
    let n = layout.nodes;
    let mut p = ConicProblem::with_vars(layout.num_vars());

    // cost
    p.cost[layout.time()] = scaling.time_scale;
    for k in 0..n - 1 {
        for i in 0..6 {
            p.cost[layout.nu_abs(k) + i] = weights.w_vc;
        }
    }
    for k in 0..n {
        p.cost[layout.trust(k)] = weights.w_tr;
    }
    p.cost[layout.time_trust()] = weights.w_tr;

    // initial state pinned
    let chi0 = scaling.state(&spec.initial.to_vector());
    for i in 0..6 {
        p.add_eq(Affine::var(layout.state(0) + i).plus(-chi0[i]));
    }

    // dynamics with virtual controls
    for k in 0..n - 1 {
        for i in 0..6 {
            let mut e = Affine::var(layout.state(k + 1) + i);
            for j in 0..6 {
                e.add_term(layout.state(k) + j, -ltv.a[k][(i, j)]);
            }
            for j in 0..3 {
                e.add_term(layout.input(k) + j, -ltv.b_minus[k][(i, j)]);
                e.add_term(layout.input(k + 1) + j, -ltv.b_plus[k][(i, j)]);
            }
            e.add_term(layout.time(), -ltv.sigma[k][i]);
            e.add_term(layout.nu(k) + i, -1.0);
            p.add_eq(e.plus(-ltv.omega[k][i]));
            // |ν| ≤ e
            p.add_le(Affine::var(layout.nu(k) + i).term(layout.nu_abs(k) + i, -1.0));
            p.add_le(Affine::new().term(layout.nu(k) + i, -1.0).term(layout.nu_abs(k) + i, -1.0));
        }
    }

    // input box
    for k in 0..n {
        for i in 0..3 {
            let j = layout.input(k) + i;
            let bound = spec.accel_bound();
            p.lower[j] = scaling.input(&Vector3::repeat(-bound))[i];
            p.upper[j] = scaling.input(&Vector3::repeat(bound))[i];
        }
    }

    // final time
    p.lower[layout.time()] = scaling.time(params.time_lower);
    p.upper[layout.time()] = scaling.time(time_upper);

    // minimum Mach
    for k in 0..n {
        let row = convexify_min_mach(atm, &nominal.states[k], spec, k)?;
        p.add_le(row.to_affine(&scaling, layout.state(k), 1.0));
    }

    // trust penalties
    for k in 0..n {
        let mut rest = Vec::with_capacity(9);
        for i in 0..6 {
            rest.push(Affine::var(layout.state(k) + i).plus(-chi[k][i]));
        }
        for i in 0..3 {
            rest.push(Affine::var(layout.input(k) + i).plus(-mu[k][i]));
        }
        p.add_soc(Affine::var(layout.trust(k)), rest);
    }
    p.add_le(Affine::var(layout.time()).term(layout.time_trust(), -1.0).plus(-s_bar));
    p.add_le(Affine::new().term(layout.time(), -1.0).term(layout.time_trust(), -1.0).plus(s_bar));

    Ok(Subproblem {
        problem: p,
        layout,
        ltv,
        scaling,
        nominal_chi: chi,
        nominal_mu: mu,
        nominal_s: s_bar,
        weights: weights.clone(),
        notes: Vec::new(),
    })
}

/// Evader subproblem: reach the asset within `r_c` in minimum time while
/// keeping `r_e` from every pursuer's fixed trajectory.
pub fn assemble_evader_subproblem(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    nominal: &Trajectory,
    pursuers: &[Trajectory],
    asset: &Vector3<f64>,
    params: &GameParams,
    weights: &SubproblemWeights,
) -> Result<Subproblem> {
    let mut sub = base(atm, spec, nominal, params, weights, params.time_upper)?;
    let layout = sub.layout;
    let n = layout.nodes;
    let length = sub.scaling.state_scale[0];
    sub.problem.socs.push(capture_constraint(
        &sub.scaling,
        layout.state(n - 1),
        asset,
        params.capture_radius,
    ));
    let s_bar = sub.nominal_s;
    let per_second = sub.scaling.time_scale / length;
    // g changes by `dg_dt` per second of final time
    let time_term = |e: &mut Affine, dg_dt: f64| {
        let c = dg_dt * per_second;
        e.add_term(layout.time(), c);
        e.constant -= c * s_bar;
    };
    for (i, pursuer) in pursuers.iter().enumerate() {
        let window = nominal.final_time.min(pursuer.final_time);
        // evader nodes; node k sits at τ_k·T, so the pursuer position moves with T
        for k in 0..n {
            let t = nominal.node_time(k);
            if t > window * (1.0 + 1e-12) {
                break;
            }
            let (row, degenerate) = convexify_evasion(&nominal.states[k], &pursuer.position_at(t), params.evasion_radius);
            if degenerate {
                sub.notes.push(format!(
                    "evasion row at node {k} against pursuer {i}: coincident positions, using +z"
                ));
            }
            let normal = row.grad.fixed_rows::<3>(0).into_owned();
            let mut e = row.to_affine(&sub.scaling, layout.state(k), length);
            time_term(&mut e, -normal.dot(&pursuer.velocity_at(t)) * nominal.tau(k));
            e.compact();
            sub.problem.add_le(e);
        }
        // pursuer nodes; the evader position there is interpolated between its
        // nodes with weights frozen at T̄ and moves with T as −v·t/T̄
        for j in 0..pursuer.nodes() {
            let t = pursuer.node_time(j);
            if t > window * (1.0 + 1e-12) {
                break;
            }
            let (k, f) = nominal.locate(t);
            let p_bar = nominal.states[k].p * (1.0 - f) + nominal.states[k + 1].p * f;
            let at = State {
                p: p_bar,
                v: Vector3::zeros(),
            };
            let (row, degenerate) = convexify_evasion(&at, &pursuer.states[j].p, params.evasion_radius);
            if degenerate {
                sub.notes.push(format!(
                    "evasion row at pursuer {i} node {j}: coincident positions, using +z"
                ));
            }
            let mut e = Affine::new();
            for (node, w) in [(k, 1.0 - f), (k + 1, f)] {
                if w == 0.0 {
                    continue;
                }
                let part = StateRow {
                    grad: row.grad * w,
                    value: row.value * w,
                    nominal: nominal.states[node].to_vector(),
                }
                .to_affine(&sub.scaling, layout.state(node), length);
                for (idx, c) in part.terms {
                    e.add_term(idx, c);
                }
                e.constant += part.constant;
            }
            let normal = row.grad.fixed_rows::<3>(0).into_owned();
            time_term(&mut e, -normal.dot(&nominal.velocity_at(t)) * t / nominal.final_time);
            e.compact();
            sub.problem.add_le(e);
        }
    }
    Ok(sub)
}

/// Pursuer subproblem: bring the fixed evader within `r_c` at the pursuer's
/// own final time, finishing at least `δ_t` before the evader.
pub fn assemble_pursuer_subproblem(
    atm: &AtmosphereModel,
    spec: &PlayerSpec,
    nominal: &Trajectory,
    evader: &Trajectory,
    params: &GameParams,
    weights: &SubproblemWeights,
) -> Result<Subproblem> {
    let bound = evader.final_time - params.pursuer_margin;
    if bound <= params.time_lower {
        return Err(Error::StructurallyInfeasible {
            bound,
            lower: params.time_lower,
        });
    }
    let mut sub = base(atm, spec, nominal, params, weights, bound.min(params.time_upper))?;
    let layout = sub.layout;
    let scaling = &sub.scaling;
    let off = layout.state(layout.nodes - 1);
    let l = scaling.state_scale[0];
    let tc = scaling.time_scale;
    // evader position at the pursuer's final time, first order about T̄^P
    let t_bar = nominal.final_time;
    let pe = evader.position_at(t_bar);
    let ve = evader.velocity_at(t_bar);
    let rest = (0..3)
        .map(|i| {
            let li = scaling.state_scale[i];
            let mut e = Affine::new()
                .term(off + i, li / l)
                .term(layout.time(), -ve[i] * tc / l)
                .plus(-(scaling.state_shift[i] * li + pe[i] - ve[i] * t_bar) / l);
            e.compact();
            e
        })
        .collect();
    sub.problem.add_soc(Affine::constant(params.capture_radius / l), rest);
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{InteriorPoint, ConicBackend};
    use crate::dynamics::tests::table1_player;

    fn atm() -> AtmosphereModel {
        AtmosphereModel::bundled()
    }

    fn evader() -> PlayerSpec {
        table1_player(State::new([-10_000.0, 0.0, 31_000.0], [3_000.0, 0.0, 0.0]), 7.0)
    }

    fn asset() -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 30_000.0)
    }

    #[test]
    fn layout_is_contiguous() {
        let l = Layout { nodes: 4 };
        assert_eq!(l.time(), 36);
        assert_eq!(l.nu(0), 37);
        assert_eq!(l.nu_abs(0), 37 + 18);
        assert_eq!(l.trust(0), 37 + 36);
        assert_eq!(l.time_trust(), 37 + 36 + 4);
        assert_eq!(l.num_vars(), 37 + 36 + 5);
    }

    #[test]
    fn cost_encoding_matches_definition() {
        let atm = atm();
        let spec = evader();
        let nominal = Trajectory::straight_line(&spec.initial, &asset(), spec.nodes).unwrap();
        let sub = assemble_evader_subproblem(&atm, &spec, &nominal, &[], &asset(), &GameParams::default(), &SubproblemWeights::default()).unwrap();
        let mut other = nominal.clone();
        other.final_time *= 1.1;
        for (k, s) in other.states.iter_mut().enumerate() {
            s.p.y += 30.0 * k as f64;
            s.v.z -= 5.0;
        }
        other.inputs[3] = Vector3::new(10.0, -20.0, 5.0);
        let x = sub.candidate(&other);
        let direct = sub.direct_cost(&x);
        assert!((sub.problem.objective(&x) - direct).abs() < 1e-9 * direct.max(1.0));
        // anchor: the nominal itself has zero trust cost and its own true defects
        let x0 = sub.candidate(&nominal);
        assert_eq!(sub.trust_cost(&x0), 0.0);
        let chi = nominal.scaled_states(&sub.scaling);
        for k in 0..spec.nodes - 1 {
            let defect = chi[k + 1] - sub.ltv.propagated[k];
            for i in 0..6 {
                assert!((x0[sub.layout.nu(k) + i] - defect[i]).abs() < 1e-12);
            }
        }
        // dynamics rows hold exactly once ν absorbs the defects
        for e in &sub.problem.equalities[6..] {
            assert!(e.eval(&x0).abs() < 1e-9);
        }
    }

    #[test]
    fn mach_rows_exact_at_nominal() {
        let atm = atm();
        let spec = evader();
        let nominal = Trajectory::straight_line(&spec.initial, &asset(), spec.nodes).unwrap();
        let sub = assemble_evader_subproblem(&atm, &spec, &nominal, &[], &asset(), &GameParams::default(), &SubproblemWeights::default()).unwrap();
        let x0 = sub.candidate(&nominal);
        let first_mach = 6 * (spec.nodes - 1) * 2;
        for k in 0..spec.nodes {
            let row = &sub.problem.inequalities[first_mach + k];
            let expect = spec.mach_min - crate::dynamics::mach(&atm, &nominal.states[k]);
            assert!((row.eval(&x0) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn far_pursuer_does_not_change_optimum() {
        let atm = atm();
        let spec = evader();
        let nominal = Trajectory::straight_line(&spec.initial, &asset(), spec.nodes).unwrap();
        let params = GameParams::default();
        let w = SubproblemWeights::default();
        let far_spec = table1_player(State::new([0.0, 200_000.0, 30_000.0], [0.0, 3_000.0, 0.0]), 8.0);
        let far = Trajectory::straight_line(&far_spec.initial, &Vector3::new(0.0, 300_000.0, 30_000.0), 30).unwrap();
        let a = assemble_evader_subproblem(&atm, &spec, &nominal, &[], &asset(), &params, &w).unwrap();
        let b = assemble_evader_subproblem(&atm, &spec, &nominal, &[far], &asset(), &params, &w).unwrap();
        assert!(b.problem.inequalities.len() > a.problem.inequalities.len());
        let ipm = InteriorPoint::default();
        let sa = ipm.solve(&a.problem).unwrap();
        let sb = ipm.solve(&b.problem).unwrap();
        assert!(sa.is_optimal() && sb.is_optimal());
        assert!((sa.objective - sb.objective).abs() < 1e-6 * sa.objective.abs().max(1.0));
    }

    #[test]
    fn pursuer_time_bound_crossing_is_structural() {
        let atm = atm();
        let spec = table1_player(State::new([4_000.0, 0.0, 30_000.0], [-3_000.0, 0.0, 0.0]), 8.0);
        let ev = evader();
        let mut e_traj = Trajectory::straight_line(&ev.initial, &asset(), ev.nodes).unwrap();
        e_traj.final_time = 1.05;
        let nominal = Trajectory::straight_line(&spec.initial, &ev.initial.p, spec.nodes).unwrap();
        let err = assemble_pursuer_subproblem(&atm, &spec, &nominal, &e_traj, &GameParams::default(), &SubproblemWeights::default());
        assert!(matches!(err, Err(Error::StructurallyInfeasible { .. })));
    }

    #[test]
    fn degenerate_reach_hits_lower_time_bound() {
        let atm = atm();
        let mut spec = evader();
        spec.initial = State::new([0.0, 0.0, 30_000.0], [3_000.0, 0.0, 0.0]);
        // nominal: coast along x for 1 s and come back to the start
        let mut nominal = Trajectory::straight_line(&spec.initial, &Vector3::new(3_000.0, 0.0, 30_000.0), spec.nodes).unwrap();
        nominal.final_time = 1.0;
        let params = GameParams {
            capture_radius: 5_000.0,
            ..GameParams::default()
        };
        let sub = assemble_evader_subproblem(&atm, &spec, &nominal, &[], &spec.initial.p, &params, &SubproblemWeights::default()).unwrap();
        let sol = InteriorPoint::default().solve(&sub.problem).unwrap();
        assert!(sol.is_optimal());
        let traj = sub.extract(&sol.x);
        assert!((traj.final_time - params.time_lower).abs() < 1e-6);
        assert!(sub.virtual_control_cost(&sol.x) < 1e-2);
    }
}
