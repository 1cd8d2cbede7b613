//! Convex subproblems with linear cost, linear equalities, bounds, affine
//! inequalities and second-order cones, plus an interior-point solver.

mod cones;
mod kkt;
mod problem;
mod solver;

pub use problem::{Affine, ConeLayout, ConicProblem, SocConstraint, SparseRows, StandardForm};
pub use solver::{solve_standard, InteriorPoint, SolverSettings};

use crate::error::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    /// Dual infeasibility certificate: the cost decreases without bound.
    Unbounded,
    MaxIter,
    NumericalError,
}

/// Residual norms of a candidate primal-dual point, all Euclidean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KktReport {
    /// `‖Ax − b‖` combined with the distance of `h − Gx` to the cone.
    pub primal: f64,
    /// `‖Aᵀy + Gᵀz + c‖` combined with the distance of `z` to the cone.
    pub dual: f64,
    /// `|(h − Gx)ᵀz|`
    pub complementarity: f64,
    /// `|cᵀx + bᵀy + hᵀz|`
    pub gap: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Equality multipliers.
    pub y: Vec<f64>,
    /// Cone multipliers in standard-form row order: inequalities, lower
    /// bounds, upper bounds, second-order cones.
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    /// Includes the problem's constant cost offset.
    pub objective: f64,
    pub iterations: usize,
    /// Set on a non-optimal status when the returned point is the best
    /// iterate seen and meets the relaxed tolerances.
    pub approximate: bool,
    pub kkt: KktReport,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Optimal, or a stalled solve whose best iterate is close to optimal.
    pub fn is_usable(&self) -> bool {
        self.is_optimal() || self.approximate
    }

    /// Multipliers of the user inequalities `expr ≤ 0`.
    pub fn inequality_duals(&self, problem: &ConicProblem) -> &[f64] {
        &self.z[..problem.inequalities.len()]
    }

    /// Multipliers of each second-order cone.
    pub fn soc_duals<'a>(&'a self, problem: &ConicProblem) -> Vec<&'a [f64]> {
        let layout = problem.standard_form().cones;
        layout.soc_blocks().map(|(s, d)| &self.z[s..s + d]).collect()
    }
}

/// Pluggable conic solver.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution>;
}

/// Solves with the reference interior-point backend.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    InteriorPoint::new(settings.clone()).solve(problem)
}

/// Residuals of `solution`, recomputed from the problem data.
pub fn check_kkt(problem: &ConicProblem, solution: &ConicSolution) -> KktReport {
    kkt_residuals(problem, &solution.x, &solution.y, &solution.z)
}

/// Residuals of an arbitrary point; `y` and `z` may be empty to mean zero.
pub fn kkt_residuals(problem: &ConicProblem, x: &[f64], y: &[f64], z: &[f64]) -> KktReport {
    let sf = problem.standard_form();
    let y = if y.is_empty() { vec![0.0; sf.b.len()] } else { y.to_vec() };
    let z = if z.is_empty() { vec![0.0; sf.h.len()] } else { z.to_vec() };
    check_kkt_standard(&sf, x, &y, &z)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Euclidean distance of `v` to the cone.
fn cone_distance(layout: &ConeLayout, v: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for &a in &v[..layout.nonneg] {
        if a < 0.0 {
            d2 += a * a;
        }
    }
    for (start, dim) in layout.soc_blocks() {
        let b = &v[start..start + dim];
        let t = b[0];
        let r = norm2(&b[1..]);
        if r <= t {
            continue;
        }
        if r <= -t {
            d2 += t * t + r * r;
        } else {
            // projection onto the cone boundary
            let a = (t + r) / 2.0;
            d2 += (t - a).powi(2) + (r - a).powi(2);
        }
    }
    d2.sqrt()
}

pub(crate) fn check_kkt_standard(sf: &StandardForm, x: &[f64], y: &[f64], z: &[f64]) -> KktReport {
    let mut ax: Vec<f64> = sf.b.iter().map(|v| -v).collect();
    sf.a.mul_add(1.0, x, &mut ax);
    let mut s = sf.h.clone();
    sf.g.mul_add(-1.0, x, &mut s);
    let primal = norm2(&ax).hypot(cone_distance(&sf.cones, &s));
    let mut stat = sf.c.clone();
    sf.a.mul_t_add(1.0, y, &mut stat);
    sf.g.mul_t_add(1.0, z, &mut stat);
    let dual = norm2(&stat).hypot(cone_distance(&sf.cones, z));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let complementarity = dot(&s, z).abs();
    let gap = (dot(&sf.c, x) + dot(&sf.b, y) + dot(&sf.h, z)).abs();
    KktReport {
        primal,
        dual,
        complementarity,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ipm() -> InteriorPoint {
        InteriorPoint::default()
    }

    fn norm_epigraph() -> ConicProblem {
        let mut p = ConicProblem::with_vars(3);
        p.cost[2] = 1.0;
        p.add_eq(Affine::var(0).plus(-3.0));
        p.add_eq(Affine::var(1).plus(-4.0));
        p.add_soc(Affine::var(2), vec![Affine::var(0), Affine::var(1)]);
        p
    }

    #[test]
    fn norm_epigraph_is_five() {
        let sol = ipm().solve(&norm_epigraph()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 5.0).abs() < 1e-7);
        assert!(check_kkt(&norm_epigraph(), &sol).max() <= 1e-6);
    }

    #[test]
    fn one_norm_epigraph() {
        let c = [1.5, -2.0, 0.0, 3.25];
        let n = c.len();
        let mut p = ConicProblem::with_vars(2 * n);
        for i in 0..n {
            p.cost[n + i] = 1.0;
            p.add_eq(Affine::var(i).plus(-c[i]));
            p.add_le(Affine::var(i).term(n + i, -1.0));
            p.add_le(Affine::new().term(i, -1.0).term(n + i, -1.0));
        }
        let sol = ipm().solve(&p).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let l1: f64 = c.iter().map(|v| v.abs()).sum();
        assert!((sol.objective - l1).abs() < 1e-7, "{}", sol.objective);
    }

    #[test]
    fn check_kkt_sensitivity() {
        let p = norm_epigraph();
        let mut sol = ipm().solve(&p).unwrap();
        sol.x[0] += 1e-2;
        assert!(check_kkt(&p, &sol).primal >= 1e-3);
        let r = kkt_residuals(&p, &[0.0; 3], &[], &[]);
        assert!((r.primal - 5.0).abs() < 1e-12);
    }

    /// Random SOCP in two variables: min cᵀx over the intersection of a disc
    /// `‖x − a‖ ≤ r`, a few half-planes and a box.
    struct Random2 {
        c: [f64; 2],
        centre: [f64; 2],
        radius: f64,
        planes: Vec<([f64; 2], f64)>,
    }

    impl Random2 {
        fn sample(rng: &mut ChaCha8Rng) -> Self {
            let centre = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let radius = rng.gen_range(0.5..2.0);
            let planes = (0..rng.gen_range(0..3))
                .map(|_| {
                    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let n = [th.cos(), th.sin()];
                    // keep the centre strictly feasible
                    let off = n[0] * centre[0] + n[1] * centre[1] + rng.gen_range(0.1..1.0) * radius;
                    (n, off)
                })
                .collect();
            let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            Self {
                c,
                centre,
                radius,
                planes,
            }
        }

        fn problem(&self) -> ConicProblem {
            let mut p = ConicProblem::with_vars(2);
            p.cost = self.c.to_vec();
            p.lower = vec![-3.0; 2];
            p.upper = vec![3.0; 2];
            for (n, off) in &self.planes {
                p.add_le(Affine::new().term(0, n[0]).term(1, n[1]).plus(-off));
            }
            p.add_soc(
                Affine::constant(self.radius),
                vec![Affine::var(0).plus(-self.centre[0]), Affine::var(1).plus(-self.centre[1])],
            );
            p
        }

        fn feasible(&self, x: [f64; 2]) -> bool {
            let d = ((x[0] - self.centre[0]).powi(2) + (x[1] - self.centre[1]).powi(2)).sqrt();
            d <= self.radius
                && x.iter().all(|v| v.abs() <= 3.0)
                && self.planes.iter().all(|(n, off)| n[0] * x[0] + n[1] * x[1] <= *off)
        }

        /// Zooming grid search over the feasible set.
        fn oracle(&self) -> f64 {
            let f = |x: [f64; 2]| self.c[0] * x[0] + self.c[1] * x[1];
            let mut lo = [self.centre[0] - self.radius, self.centre[1] - self.radius];
            let mut width = 2.0 * self.radius;
            let mut best = (f64::INFINITY, self.centre);
            for _ in 0..40 {
                let m = 60;
                for i in 0..=m {
                    for j in 0..=m {
                        let x = [lo[0] + width * i as f64 / m as f64, lo[1] + width * j as f64 / m as f64];
                        if self.feasible(x) && f(x) < best.0 {
                            best = (f(x), x);
                        }
                    }
                }
                width *= 0.5;
                lo = [best.1[0] - width / 2.0, best.1[1] - width / 2.0];
            }
            best.0
        }
    }

    #[test]
    fn random_socps_match_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..50 {
            let case = Random2::sample(&mut rng);
            let p = case.problem();
            let sol = ipm().solve(&p).unwrap();
            assert_eq!(sol.status, Status::Optimal, "case {k}");
            let oracle = case.oracle();
            assert!((sol.objective - oracle).abs() < 1e-4, "case {k}: {} vs {oracle}", sol.objective);
            let r = check_kkt(&p, &sol);
            assert!(r.max() <= 1e-6, "case {k}: {r:?}");
            assert!(r.gap <= 1e-6 * (1.0 + sol.objective.abs()));
        }
    }

    #[test]
    fn cost_scaling_keeps_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let case = Random2::sample(&mut rng);
            let p = case.problem();
            let mut q = p.clone();
            q.cost.iter_mut().for_each(|c| *c *= 7.5);
            let a = ipm().solve(&p).unwrap();
            let b = ipm().solve(&q).unwrap();
            for i in 0..2 {
                assert!((a.x[i] - b.x[i]).abs() < 1e-6, "{:?} vs {:?}", a.x, b.x);
            }
            assert!((b.objective - 7.5 * a.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Random2::sample(&mut rng).problem();
        let a = ipm().solve(&p).unwrap();
        let b = ipm().solve(&p).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}
