//! Reduced (normal-equations) KKT system of the interior-point method:
//!
//! ```text
//! [ GᵀW⁻²G   Aᵀ ] [dx]   [r₁ + GᵀW⁻²r₃]
//! [ A        0  ] [dy] = [r₂          ]      dz = W⁻²(G dx − r₃)
//! ```
//!
//! The matrix is quasi-definite after a small static regularization, so an
//! LDLᵀ factorization exists for any symmetric permutation. Variables are
//! ordered by reverse Cuthill–McKee with very dense columns (the free final
//! time, typically) moved last, and the factor is stored as a variable-band
//! envelope. Trajectory problems are block-banded, so the cost per factor is
//! roughly linear in the horizon length.

use super::cones::Scaling;
use super::problem::StandardForm;

const STATIC_REG: f64 = 1e-9;
const DYNAMIC_EPS: f64 = 1e-13;
const DYNAMIC_REG: f64 = 1e-7;
const REFINE_STEPS: usize = 8;

#[derive(Debug, Clone)]
pub struct KktSolver {
    n: usize,
    dim: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `iperm[old] = new`
    iperm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    mat_off: Vec<f64>,
    mat_diag: Vec<f64>,
    l: Vec<f64>,
    d: Vec<f64>,
    signs: Vec<f64>,
    /// Per second-order cone: participating variables and, per variable, its
    /// `(row offset, coefficient)` entries.
    soc_vars: Vec<Vec<(usize, Vec<(usize, f64)>)>>,
}

impl KktSolver {
    pub fn new(sf: &StandardForm) -> Self {
        let n = sf.c.len();
        let p = sf.a.nrows();
        let dim = n + p;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
        let clique = |vars: &[usize], adj: &mut Vec<Vec<usize>>| {
            for &i in vars {
                for &j in vars {
                    if i != j {
                        adj[i].push(j);
                    }
                }
            }
        };
        for row in &sf.g.rows[..sf.cones.nonneg] {
            let vars: Vec<usize> = row.iter().map(|e| e.0).collect();
            clique(&vars, &mut adj);
        }
        let mut soc_vars = Vec::new();
        for (start, dim_k) in sf.cones.soc_blocks() {
            let mut by_var: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
            for r in 0..dim_k {
                for &(j, v) in &sf.g.rows[start + r] {
                    by_var.entry(j).or_default().push((r, v));
                }
            }
            let vars: Vec<usize> = by_var.keys().copied().collect();
            clique(&vars, &mut adj);
            soc_vars.push(by_var.into_iter().collect());
        }
        for (r, row) in sf.a.rows.iter().enumerate() {
            for &(j, _) in row {
                adj[n + r].push(j);
                adj[j].push(n + r);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let perm = ordering(&adj);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..dim).collect();
        for old in 0..dim {
            let i = iperm[old];
            for &nb in &adj[old] {
                let j = iperm[nb];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut row_start = vec![0; dim + 1];
        for i in 0..dim {
            row_start[i + 1] = row_start[i] + (i - first[i]);
        }
        let nnz = row_start[dim];
        let mut signs = vec![1.0; dim];
        for old in n..dim {
            signs[iperm[old]] = -1.0;
        }
        Self {
            n,
            dim,
            perm,
            iperm,
            first,
            row_start,
            mat_off: vec![0.0; nnz],
            mat_diag: vec![0.0; dim],
            l: vec![0.0; nnz],
            d: vec![0.0; dim],
            signs,
            soc_vars,
        }
    }

    /// Stored entries of the factor, for diagnostics.
    #[cfg(test)]
    pub fn envelope_size(&self) -> usize {
        self.row_start[self.dim]
    }

    fn add(&mut self, old_i: usize, old_j: usize, v: f64) {
        let (i, j) = (self.iperm[old_i], self.iperm[old_j]);
        if i == j {
            self.mat_diag[i] += v;
        } else {
            let (i, j) = if i > j { (i, j) } else { (j, i) };
            self.mat_off[self.row_start[i] + j - self.first[i]] += v;
        }
    }

    /// Assembles the matrix for scaling `sc` and factors it.
    pub fn factor(&mut self, sf: &StandardForm, sc: &Scaling) -> bool {
        self.mat_off.iter_mut().for_each(|v| *v = 0.0);
        self.mat_diag.iter_mut().for_each(|v| *v = 0.0);
        for (row, w) in sf.g.rows[..sf.cones.nonneg].iter().zip(sc.lp_inv2()) {
            for (a, &(ja, va)) in row.iter().enumerate() {
                self.add(ja, ja, w * va * va);
                for &(jb, vb) in &row[..a] {
                    if jb != ja {
                        self.add(ja, jb, w * va * vb);
                    }
                }
            }
        }
        let soc_vars = std::mem::take(&mut self.soc_vars);
        for (k, ((_, dim_k), vars)) in sf.cones.soc_blocks().zip(&soc_vars).enumerate() {
            let blk = sc.soc_inv2_block(k);
            // t_j = B g_j for each participating variable
            let t: Vec<Vec<f64>> = vars
                .iter()
                .map(|(_, entries)| {
                    let mut tj = vec![0.0; dim_k];
                    for &(r, v) in entries {
                        for (q, tq) in tj.iter_mut().enumerate() {
                            *tq += blk[q * dim_k + r] * v;
                        }
                    }
                    tj
                })
                .collect();
            for (a, (ja, _)) in vars.iter().enumerate() {
                for (b, (jb, entries_b)) in vars.iter().enumerate().take(a + 1) {
                    let v: f64 = entries_b.iter().map(|&(r, g)| t[a][r] * g).sum();
                    let _ = b;
                    self.add(*ja, *jb, v);
                }
            }
        }
        self.soc_vars = soc_vars;
        for (r, row) in sf.a.rows.iter().enumerate() {
            for &(j, v) in row {
                self.add(self.n + r, j, v);
            }
        }
        self.factorize()
    }

    fn factorize(&mut self) -> bool {
        let dim = self.dim;
        let mut w = vec![0.0; dim];
        for i in 0..dim {
            let fi = self.first[i];
            let ri = self.row_start[i];
            for j in fi..i {
                let fj = self.first[j];
                let rj = self.row_start[j];
                let k0 = fi.max(fj);
                let mut s = self.mat_off[ri + j - fi];
                for k in k0..j {
                    s -= w[k] * self.l[rj + k - fj];
                }
                w[j] = s;
                self.l[ri + j - fi] = s / self.d[j];
            }
            let mut di = self.mat_diag[i] + self.signs[i] * STATIC_REG;
            for k in fi..i {
                di -= w[k] * self.l[ri + k - fi];
            }
            if !di.is_finite() {
                return false;
            }
            if self.signs[i] * di <= DYNAMIC_EPS {
                di = self.signs[i] * DYNAMIC_REG;
            }
            self.d[i] = di;
        }
        true
    }

    fn ldl_solve(&self, b: &mut [f64]) {
        let dim = self.dim;
        for i in 0..dim {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let mut s = b[i];
            for k in fi..i {
                s -= self.l[ri + k - fi] * b[k];
            }
            b[i] = s;
        }
        for i in 0..dim {
            b[i] /= self.d[i];
        }
        for i in (0..dim).rev() {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let xi = b[i];
            for k in fi..i {
                b[k] -= self.l[ri + k - fi] * xi;
            }
        }
    }

    /// `y = M x` with the unregularized assembled matrix (permuted indices).
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            y[i] = self.mat_diag[i] * x[i];
        }
        for i in 0..self.dim {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let mut acc = 0.0;
            for j in fi..i {
                let v = self.mat_off[ri + j - fi];
                acc += v * x[j];
                y[j] += v * x[i];
            }
            y[i] += acc;
        }
    }

    /// Solves the reduced system in permuted coordinates with iterative refinement.
    fn solve_reduced(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x = b.clone();
        self.ldl_solve(&mut x);
        let mut r = vec![0.0; self.dim];
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            self.matvec(&x, &mut r);
            for i in 0..self.dim {
                r[i] = b[i] - r[i];
            }
            let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rnorm <= 1e-14 * (1.0 + bnorm) || rnorm >= 0.5 * last {
                break;
            }
            last = rnorm;
            self.ldl_solve(&mut r);
            for i in 0..self.dim {
                x[i] += r[i];
            }
        }
        b.iter_mut().for_each(|v| *v = 0.0);
        let mut out = b;
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    fn solve_once(
        &self,
        sf: &StandardForm,
        sc: &Scaling,
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n;
        let m = sf.h.len();
        let mut w3 = vec![0.0; m];
        sc.apply_w_inv2(r3, &mut w3);
        let mut rhs = vec![0.0; self.dim];
        rhs[..n].copy_from_slice(r1);
        sf.g.mul_t_add(1.0, &w3, &mut rhs[..n]);
        rhs[n..].copy_from_slice(r2);
        let sol = self.solve_reduced(&rhs);
        let dx = sol[..n].to_vec();
        let dy = sol[n..].to_vec();
        let mut gdx: Vec<f64> = r3.iter().map(|v| -v).collect();
        sf.g.mul_add(1.0, &dx, &mut gdx);
        let mut dz = vec![0.0; m];
        sc.apply_w_inv2(&gdx, &mut dz);
        (dx, dy, dz)
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (dx, dy, dz) = (r₁, r₂, r₃)`, refining
    /// against the full system since eliminating `dz` amplifies errors by `W⁻²`.
    pub fn solve(
        &self,
        sf: &StandardForm,
        sc: &Scaling,
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut dx, mut dy, mut dz) = self.solve_once(sf, sc, r1, r2, r3);
        let scale = [r1, r2, r3]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut last = f64::INFINITY;
        let m = sf.h.len();
        let mut w2dz = vec![0.0; m];
        for _ in 0..REFINE_STEPS {
            let mut e1 = r1.to_vec();
            sf.a.mul_t_add(-1.0, &dy, &mut e1);
            sf.g.mul_t_add(-1.0, &dz, &mut e1);
            let mut e2 = r2.to_vec();
            sf.a.mul_add(-1.0, &dx, &mut e2);
            sc.apply_w2(&dz, &mut w2dz);
            let mut e3: Vec<f64> = r3.iter().zip(&w2dz).map(|(r, w)| r + w).collect();
            sf.g.mul_add(-1.0, &dx, &mut e3);
            let err = [&e1, &e2, &e3]
                .iter()
                .flat_map(|v| v.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if err <= 1e-14 * (1.0 + scale) || err >= 0.5 * last {
                break;
            }
            last = err;
            let (cx, cy, cz) = self.solve_once(sf, sc, &e1, &e2, &e3);
            dx.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
            dz.iter_mut().zip(&cz).for_each(|(a, b)| *a += b);
        }
        (dx, dy, dz)
    }
}

/// Reverse Cuthill–McKee on the sparse part of the graph; nodes whose degree
/// exceeds a fifth of the graph go last in increasing-degree order.
fn ordering(adj: &[Vec<usize>]) -> Vec<usize> {
    let dim = adj.len();
    let dense_cut = (dim / 5).max(32);
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_cut).collect();
    let degree: Vec<usize> = adj
        .iter()
        .map(|a| a.iter().filter(|&&j| !dense[j]).count())
        .collect();
    let mut visited = dense.clone();
    let mut order = Vec::with_capacity(dim);
    let mut by_degree: Vec<usize> = (0..dim).filter(|&i| !dense[i]).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(adj, &dense, &degree, start);
        let mut queue = std::collections::VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    let mut tail: Vec<usize> = (0..dim).filter(|&i| dense[i]).collect();
    tail.sort_by_key(|&i| (adj[i].len(), i));
    order.extend(tail);
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], dense: &[bool], degree: &[usize], start: usize) -> usize {
    let mut root = start;
    let mut best_ecc = 0;
    for _ in 0..4 {
        let levels = bfs_levels(adj, dense, root);
        let ecc = *levels.iter().filter(|&&l| l != usize::MAX).max().unwrap_or(&0);
        if ecc <= best_ecc && best_ecc > 0 {
            break;
        }
        best_ecc = ecc;
        let far = (0..adj.len())
            .filter(|&i| levels[i] == ecc)
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(root);
        if far == root {
            break;
        }
        root = far;
    }
    root
}

fn bfs_levels(adj: &[Vec<usize>], dense: &[bool], root: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &j in &adj[v] {
            if !dense[j] && level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    level
}
