//! Nonnegative orthant and second-order cone algebra with Nesterov–Todd scaling.

use super::problem::ConeLayout;

/// NT scaling of one second-order cone: `W = η [w₀ w₁ᵀ; w₁ I + w₁w₁ᵀ/(1+w₀)]`.
#[derive(Debug, Clone)]
struct SocScaling {
    eta: f64,
    w: Vec<f64>,
}

/// Scaling point `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub struct Scaling {
    layout: ConeLayout,
    /// `sqrt(s/z)` per orthant row.
    lp: Vec<f64>,
    soc: Vec<SocScaling>,
    pub lambda: Vec<f64>,
}

fn soc_det(x: &[f64]) -> f64 {
    let tail: f64 = x[1..].iter().map(|v| v * v).sum();
    x[0] * x[0] - tail
}

impl Scaling {
    /// Identity scaling (`W = I`), used for initialization.
    pub fn identity(layout: &ConeLayout) -> Self {
        let lambda = unit(layout);
        let mut soc = Vec::new();
        for (_, dim) in layout.soc_blocks() {
            let mut w = vec![0.0; dim];
            w[0] = 1.0;
            soc.push(SocScaling { eta: 1.0, w });
        }
        Self {
            layout: layout.clone(),
            lp: vec![1.0; layout.nonneg],
            soc,
            lambda,
        }
    }

    /// NT scaling for interior `s`, `z`. Returns `None` if either left the cone.
    pub fn compute(layout: &ConeLayout, s: &[f64], z: &[f64]) -> Option<Self> {
        let mut lp = Vec::with_capacity(layout.nonneg);
        let mut lambda = vec![0.0; layout.rows()];
        for i in 0..layout.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            lp.push((s[i] / z[i]).sqrt());
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut soc = Vec::with_capacity(layout.soc_dims.len());
        for (start, dim) in layout.soc_blocks() {
            let sb = &s[start..start + dim];
            let zb = &z[start..start + dim];
            let sdet = soc_det(sb);
            let zdet = soc_det(zb);
            if !(sdet > 0.0 && zdet > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return None;
            }
            let sn = sdet.sqrt();
            let zn = zdet.sqrt();
            let sbar: Vec<f64> = sb.iter().map(|v| v / sn).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / zn).collect();
            let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            let mut w = vec![0.0; dim];
            w[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for k in 1..dim {
                w[k] = (sbar[k] - zbar[k]) / (2.0 * gamma);
            }
            // Renormalize so that w₀² − ‖w₁‖² = 1 exactly.
            let wdet = soc_det(&w);
            if wdet > 0.0 {
                let f = 1.0 / wdet.sqrt();
                w.iter_mut().for_each(|v| *v *= f);
            }
            let eta = (sdet / zdet).sqrt().sqrt();
            soc.push(SocScaling { eta, w });
        }
        let mut sc = Self {
            layout: layout.clone(),
            lp,
            soc,
            lambda,
        };
        let mut wz = vec![0.0; layout.rows()];
        sc.apply_w(z, &mut wz);
        sc.lambda[layout.nonneg..].copy_from_slice(&wz[layout.nonneg..]);
        Some(sc)
    }

    fn soc_apply(blk: &SocScaling, v: &[f64], out: &mut [f64], inverse: bool) {
        let w0 = blk.w[0];
        let w1 = &blk.w[1..];
        let v0 = v[0];
        let v1 = &v[1..];
        let w1v1: f64 = w1.iter().zip(v1).map(|(a, b)| a * b).sum();
        let (sign, scale) = if inverse { (-1.0, 1.0 / blk.eta) } else { (1.0, blk.eta) };
        out[0] = scale * (w0 * v0 + sign * w1v1);
        let coef = w1v1 / (1.0 + w0) + sign * v0;
        for k in 0..w1.len() {
            out[k + 1] = scale * (v1[k] + coef * w1[k]);
        }
    }

    pub fn apply_w(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.layout.nonneg {
            out[i] = self.lp[i] * v[i];
        }
        for ((start, dim), blk) in self.layout.soc_blocks().zip(&self.soc) {
            Self::soc_apply(blk, &v[start..start + dim], &mut out[start..start + dim], false);
        }
    }

    pub fn apply_w_inv(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.layout.nonneg {
            out[i] = v[i] / self.lp[i];
        }
        for ((start, dim), blk) in self.layout.soc_blocks().zip(&self.soc) {
            Self::soc_apply(blk, &v[start..start + dim], &mut out[start..start + dim], true);
        }
    }

    /// `W² v`.
    pub fn apply_w2(&self, v: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; v.len()];
        self.apply_w(v, &mut tmp);
        self.apply_w(&tmp, out);
    }

    /// `W⁻² v`.
    pub fn apply_w_inv2(&self, v: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; v.len()];
        self.apply_w_inv(v, &mut tmp);
        self.apply_w_inv(&tmp, out);
    }

    /// Diagonal of `W⁻²` on the orthant rows.
    pub fn lp_inv2(&self) -> impl Iterator<Item = f64> + '_ {
        self.lp.iter().map(|w| 1.0 / (w * w))
    }

    /// Dense `W⁻²` block of cone `k`, row-major `dim × dim`:
    /// `(2 J w wᵀ J − J) / η²`.
    pub fn soc_inv2_block(&self, k: usize) -> Vec<f64> {
        let blk = &self.soc[k];
        let dim = blk.w.len();
        let jw: Vec<f64> = blk
            .w
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 { *v } else { -*v })
            .collect();
        let f = 1.0 / (blk.eta * blk.eta);
        let mut out = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut v = 2.0 * jw[i] * jw[j];
                if i == j {
                    v += if i == 0 { -1.0 } else { 1.0 };
                }
                out[i * dim + j] = f * v;
            }
        }
        out
    }
}

/// Jordan product `u ∘ v`.
pub fn jordan_product(layout: &ConeLayout, u: &[f64], v: &[f64], out: &mut [f64]) {
    for i in 0..layout.nonneg {
        out[i] = u[i] * v[i];
    }
    for (start, dim) in layout.soc_blocks() {
        let ub = &u[start..start + dim];
        let vb = &v[start..start + dim];
        out[start] = ub.iter().zip(vb).map(|(a, b)| a * b).sum();
        for k in 1..dim {
            out[start + k] = ub[0] * vb[k] + vb[0] * ub[k];
        }
    }
}

/// Solves `u ∘ x = v` for `x`.
pub fn jordan_div(layout: &ConeLayout, u: &[f64], v: &[f64], out: &mut [f64]) {
    for i in 0..layout.nonneg {
        out[i] = v[i] / u[i];
    }
    for (start, dim) in layout.soc_blocks() {
        let ub = &u[start..start + dim];
        let vb = &v[start..start + dim];
        let det = soc_det(ub);
        let u1v1: f64 = ub[1..].iter().zip(&vb[1..]).map(|(a, b)| a * b).sum();
        let x0 = (ub[0] * vb[0] - u1v1) / det;
        out[start] = x0;
        for k in 1..dim {
            out[start + k] = (vb[k] - x0 * ub[k]) / ub[0];
        }
    }
}

/// Identity element of the cone product.
pub fn unit(layout: &ConeLayout) -> Vec<f64> {
    let mut e = vec![0.0; layout.rows()];
    e[..layout.nonneg].iter_mut().for_each(|v| *v = 1.0);
    for (start, _) in layout.soc_blocks() {
        e[start] = 1.0;
    }
    e
}

/// Smallest "eigenvalue" of `x` over all blocks: `xᵢ` on the orthant,
/// `x₀ − ‖x₁‖` on each cone. Positive iff `x` is interior.
pub fn min_eig(layout: &ConeLayout, x: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for &v in &x[..layout.nonneg] {
        m = m.min(v);
    }
    for (start, dim) in layout.soc_blocks() {
        let b = &x[start..start + dim];
        let tail = b[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        m = m.min(b[0] - tail);
    }
    m
}

/// Largest `α` such that `x + α d` stays in the closed cone, for interior `x`.
pub fn max_step(layout: &ConeLayout, x: &[f64], d: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..layout.nonneg {
        if d[i] < 0.0 {
            alpha = alpha.min(-x[i] / d[i]);
        }
    }
    for (start, dim) in layout.soc_blocks() {
        alpha = alpha.min(soc_max_step(&x[start..start + dim], &d[start..start + dim]));
    }
    alpha
}

fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    // f(α) = (x₀+αd₀)² − ‖x₁+αd₁‖² = c + 2bα + aα²; first positive root.
    let a = soc_det(d);
    let b = x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(p, q)| p * q).sum::<f64>();
    let c = soc_det(x).max(0.0);
    let mut alpha = f64::INFINITY;
    if d[0] < 0.0 {
        alpha = -x[0] / d[0];
    }
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return alpha;
    }
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            alpha = alpha.min(-c / (2.0 * b));
        }
        return alpha;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return alpha;
    }
    let q = -(b + b.signum() * disc.sqrt());
    for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}
