use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Sparse linear form `Σ coef·x[idx] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, idx: usize, coef: f64) -> Self {
        self.add_term(idx, coef);
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// Merges repeated indices.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }
}

/// `‖(rest[0], rest[1], ...)‖₂ ≤ head`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub head: Affine,
    pub rest: Vec<Affine>,
}

/// Linear cost, linear equalities, variable bounds, affine inequalities
/// `expr ≤ 0` and second-order cones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProblem {
    pub cost: Vec<f64>,
    pub cost_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `expr = 0`
    pub equalities: Vec<Affine>,
    /// `expr ≤ 0`
    pub inequalities: Vec<Affine>,
    pub socs: Vec<SocConstraint>,
}

/// Cone layout of the standard form: `nonneg` orthant rows first, then the
/// second-order cones in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeLayout {
    pub nonneg: usize,
    pub soc_dims: Vec<usize>,
}

impl ConeLayout {
    pub fn rows(&self) -> usize {
        self.nonneg + self.soc_dims.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant row plus one per cone.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc_dims.len()
    }

    /// `(start, dim)` of each second-order cone.
    pub fn soc_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut start = self.nonneg;
        self.soc_dims.iter().map(move |&d| {
            let s = start;
            start += d;
            (s, d)
        })
    }
}

/// Sparse row-major matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// `y += alpha * M x`
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            y[r] += alpha * row.iter().map(|&(j, v)| v * x[j]).sum::<f64>();
        }
    }

    /// `y += alpha * Mᵀ x`
    pub fn mul_t_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            let xr = alpha * x[r];
            if xr != 0.0 {
                for &(j, v) in row {
                    y[j] += v * xr;
                }
            }
        }
    }
}

/// `min cᵀx  s.t.  Ax = b,  Gx + s = h,  s ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub c: Vec<f64>,
    pub a: SparseRows,
    pub b: Vec<f64>,
    pub g: SparseRows,
    pub h: Vec<f64>,
    pub cones: ConeLayout,
}

impl ConicProblem {
    pub fn with_vars(n: usize) -> Self {
        Self {
            cost: vec![0.0; n],
            cost_offset: 0.0,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    /// Appends a fresh variable and returns its index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_eq(&mut self, expr: Affine) {
        self.equalities.push(expr);
    }

    pub fn add_le(&mut self, expr: Affine) {
        self.inequalities.push(expr);
    }

    pub fn add_soc(&mut self, head: Affine, rest: Vec<Affine>) {
        self.socs.push(SocConstraint { head, rest });
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.cost_offset
    }

    /// Checks that every index is in range and the bound arrays agree.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.lower.len().min(self.upper.len()),
            });
        }
        let check = |e: &Affine| -> Result<()> {
            for &(i, c) in &e.terms {
                if i >= n {
                    return Err(Error::Dimension { expected: n, got: i + 1 });
                }
                if !c.is_finite() {
                    return Err(Error::Solver(format!("non-finite coefficient on variable {i}")));
                }
            }
            if !e.constant.is_finite() {
                return Err(Error::Solver("non-finite constant".into()));
            }
            Ok(())
        };
        for e in self.equalities.iter().chain(&self.inequalities) {
            check(e)?;
        }
        for soc in &self.socs {
            check(&soc.head)?;
            for e in &soc.rest {
                check(e)?;
            }
        }
        if let Some(j) = (0..n).find(|&j| self.lower[j] > self.upper[j]) {
            return Err(Error::Solver(format!("variable {j} has crossed bounds")));
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::Solver("non-finite cost".into()));
        }
        Ok(())
    }

    /// Compiles to standard form. Row order of the cone block: inequalities,
    /// finite lower bounds, finite upper bounds (each in variable order), then
    /// one block per second-order cone.
    pub fn standard_form(&self) -> StandardForm {
        let n = self.num_vars();
        let compact = |e: &Affine| {
            let mut e = e.clone();
            e.compact();
            e
        };
        let mut a = SparseRows {
            ncols: n,
            rows: Vec::new(),
        };
        let mut b = Vec::new();
        for e in &self.equalities {
            let e = compact(e);
            a.rows.push(e.terms.clone());
            b.push(-e.constant);
        }
        let mut g = SparseRows {
            ncols: n,
            rows: Vec::new(),
        };
        let mut h = Vec::new();
        for e in &self.inequalities {
            let e = compact(e);
            g.rows.push(e.terms.clone());
            h.push(-e.constant);
        }
        for j in 0..n {
            if self.lower[j].is_finite() {
                g.rows.push(vec![(j, -1.0)]);
                h.push(-self.lower[j]);
            }
        }
        for j in 0..n {
            if self.upper[j].is_finite() {
                g.rows.push(vec![(j, 1.0)]);
                h.push(self.upper[j]);
            }
        }
        let nonneg = g.rows.len();
        let mut soc_dims = Vec::with_capacity(self.socs.len());
        for soc in &self.socs {
            for e in std::iter::once(&soc.head).chain(&soc.rest) {
                let e = compact(e);
                g.rows.push(e.terms.iter().map(|&(j, v)| (j, -v)).collect());
                h.push(e.constant);
            }
            soc_dims.push(1 + soc.rest.len());
        }
        StandardForm {
            c: self.cost.clone(),
            a,
            b,
            g,
            h,
            cones: ConeLayout { nonneg, soc_dims },
        }
    }

    /// Plain-text dump for offline inspection.
    pub fn debug_dump(&self) -> String {
        let sf = self.standard_form();
        let mut out = String::new();
        let _ = writeln!(out, "# conic problem");
        let _ = writeln!(
            out,
            "vars {} eq {} ineq {} soc {} nonneg_rows {} cone_rows {}",
            self.num_vars(),
            self.equalities.len(),
            self.inequalities.len(),
            self.socs.len(),
            sf.cones.nonneg,
            sf.cones.rows()
        );
        let _ = writeln!(out, "soc_dims {:?}", sf.cones.soc_dims);
        let _ = writeln!(out, "[cost] offset {:e}", self.cost_offset);
        for (j, c) in self.cost.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "{j} {c:e}");
            }
        }
        let dump = |out: &mut String, name: &str, m: &SparseRows, rhs: &[f64]| {
            let _ = writeln!(out, "[{name}] rows {}", m.nrows());
            for (r, row) in m.rows.iter().enumerate() {
                let _ = write!(out, "{r} rhs {:e} :", rhs[r]);
                for (j, v) in row {
                    let _ = write!(out, " {j}:{v:e}");
                }
                out.push('\n');
            }
        };
        dump(&mut out, "A", &sf.a, &sf.b);
        dump(&mut out, "G", &sf.g, &sf.h);
        out
    }

    pub fn write_debug(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.debug_dump()).map_err(|e| Error::io(path, e))
    }
}
