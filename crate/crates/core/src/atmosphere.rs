//! Tabular atmosphere and aerodynamic data.
//!
//! Density and speed of sound are tabulated against geometric altitude (ft),
//! the drag coefficient against Mach number. Every table is a shape-preserving
//! piecewise cubic Hermite interpolant (Fritsch–Butland slopes), so the
//! interpolant is C¹, reproduces the samples exactly and never overshoots
//! monotone data. Derivatives used for linearization are taken by central
//! finite differences on the interpolant.
//!
//! Out-of-range arguments are clamped to the end knots; every clamp bumps a
//! per-table counter that diagnostics can read back.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Bundled 1976 U.S. Standard Atmosphere density, slug/ft³ vs ft.
pub const BUNDLED_DENSITY: &str = include_str!("../data/us1976_density.dat");
/// Bundled 1976 U.S. Standard Atmosphere speed of sound, ft/s vs ft.
pub const BUNDLED_SPEED_OF_SOUND: &str = include_str!("../data/us1976_speed_of_sound.dat");
/// Bundled V-2-class drag coefficient vs Mach.
pub const BUNDLED_DRAG_COEFF: &str = include_str!("../data/v2_drag_coefficient.dat");

#[derive(Debug)]
pub struct InterpTable {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    clamps: AtomicU64,
}

impl Clone for InterpTable {
    fn clone(&self) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.clone(),
            slopes: self.slopes.clone(),
            clamps: AtomicU64::new(self.clamps.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for InterpTable {
    fn eq(&self, other: &Self) -> bool {
        self.knots == other.knots && self.values == other.values
    }
}

impl InterpTable {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Table(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::Table(format!(
                "need at least 2 samples, got {}",
                knots.len()
            )));
        }
        if let Some(i) = knots.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Table(format!(
                "knots not strictly increasing at index {}",
                i + 1
            )));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        let slopes = pchip_slopes(&knots, &values);
        Ok(Self {
            knots,
            values,
            slopes,
            clamps: AtomicU64::new(0),
        })
    }

    /// Parses the two-column text format (`#` comments, blank lines ignored).
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let tok = cols.next().ok_or_else(|| Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("missing {what} column"),
                })?;
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("bad {what} `{tok}`: {e}"),
                })
            };
            knots.push(next("abscissa")?);
            values.push(next("ordinate")?);
            if cols.next().is_some() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    msg: "expected exactly two columns".into(),
                });
            }
        }
        Self::new(knots, values)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn span(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Number of out-of-range evaluations clamped so far.
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    pub fn reset_clamp_count(&self) {
        self.clamps.store(0, Ordering::Relaxed);
    }

    /// Index `i` of the segment `[knots[i], knots[i+1]]` containing `x`.
    pub fn segment(&self, x: f64) -> usize {
        let n = self.knots.len();
        let i = self.knots.partition_point(|&k| k <= x);
        i.clamp(1, n - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.span();
        if x <= lo || x >= hi || x.is_nan() {
            if x < lo || x > hi || x.is_nan() {
                self.clamps.fetch_add(1, Ordering::Relaxed);
            }
            return if x >= hi {
                *self.values.last().unwrap()
            } else {
                self.values[0]
            };
        }
        let i = self.segment(x);
        let h = self.knots[i + 1] - self.knots[i];
        let t = (x - self.knots[i]) / h;
        if t == 0.0 {
            return self.values[i];
        }
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.slopes[i + 1]
    }

    /// Central finite difference of [`eval`](Self::eval), one-sided at the
    /// span boundaries. Zero outside the span, where the table is clamped flat.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let (lo, hi) = self.span();
        if x < lo || x > hi {
            self.clamps.fetch_add(1, Ordering::Relaxed);
            return 0.0;
        }
        let step = (1e-6 * x.abs()).max(1e-6 * (hi - lo));
        if x - step < lo {
            (self.eval(x + step) - self.eval(x)) / step
        } else if x + step > hi {
            (self.eval(x) - self.eval(x - step)) / step
        } else {
            (self.eval(x + step) - self.eval(x - step)) / (2.0 * step)
        }
    }
}

/// Shape-preserving Hermite slopes: weighted harmonic mean of the adjacent
/// secants at interior knots (zero at local extrema), three-point one-sided
/// estimate at the ends limited to keep the end segments monotone.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 * d1 <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Density, speed of sound and drag coefficient tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmosphereModel {
    pub density: InterpTable,
    pub speed_of_sound: InterpTable,
    pub drag_coeff: InterpTable,
}

impl AtmosphereModel {
    pub fn new(density: InterpTable, speed_of_sound: InterpTable, drag_coeff: InterpTable) -> Result<Self> {
        if density.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Table("density samples must be positive".into()));
        }
        if speed_of_sound.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Table("speed of sound samples must be positive".into()));
        }
        if drag_coeff.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Table("drag coefficient samples must be positive".into()));
        }
        Ok(Self {
            density,
            speed_of_sound,
            drag_coeff,
        })
    }

    /// The tables shipped with the crate.
    pub fn bundled() -> Self {
        let p = Path::new("<bundled>");
        Self::new(
            InterpTable::parse(BUNDLED_DENSITY, p).expect("bundled density table"),
            InterpTable::parse(BUNDLED_SPEED_OF_SOUND, p).expect("bundled speed-of-sound table"),
            InterpTable::parse(BUNDLED_DRAG_COEFF, p).expect("bundled drag table"),
        )
        .expect("bundled tables are positive")
    }

    pub fn from_files(density: &Path, speed_of_sound: &Path, drag_coeff: &Path) -> Result<Self> {
        Self::new(
            InterpTable::from_file(density)?,
            InterpTable::from_file(speed_of_sound)?,
            InterpTable::from_file(drag_coeff)?,
        )
    }

    /// Same tables with the density forced to zero, which removes drag.
    pub fn vacuum(&self) -> Self {
        let (lo, hi) = self.density.span();
        Self {
            density: InterpTable::new(vec![lo, hi], vec![0.0, 0.0]).unwrap(),
            speed_of_sound: self.speed_of_sound.clone(),
            drag_coeff: self.drag_coeff.clone(),
        }
    }

    pub fn clamp_count(&self) -> u64 {
        self.density.clamp_count() + self.speed_of_sound.clamp_count() + self.drag_coeff.clamp_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data_is_constant() {
        let t = InterpTable::new(vec![0.0, 1.0], vec![5.0, 5.0]).unwrap();
        for x in [0.0, 0.25, 0.5, 0.9, 1.0] {
            assert!((t.eval(x) - 5.0).abs() < 1e-14);
            assert!(t.eval_derivative(x).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_data_reproduced() {
        let t = InterpTable::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
        assert!((t.eval(0.5) - 0.5).abs() < 1e-15);
        assert!((t.eval_derivative(0.5) - 1.0).abs() < 1e-8);
        assert!((t.eval_derivative(0.0) - 1.0).abs() < 1e-8);
        assert!((t.eval_derivative(2.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn construction_errors() {
        assert!(InterpTable::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(InterpTable::new(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(InterpTable::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(InterpTable::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn out_of_range_clamps_and_counts() {
        let t = InterpTable::new(vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 4.0]).unwrap();
        assert_eq!(t.clamp_count(), 0);
        assert_eq!(t.eval(-1.0), 3.0);
        assert_eq!(t.eval(5.0), 4.0);
        assert_eq!(t.clamp_count(), 2);
        assert_eq!(t.eval(2.0), 4.0);
        assert_eq!(t.clamp_count(), 2);
    }

    #[test]
    fn extremum_slope_is_zero() {
        let t = InterpTable::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.slopes()[1], 0.0);
        // no overshoot above the peak sample
        for i in 0..=200 {
            assert!(t.eval(i as f64 / 100.0) <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        let p = Path::new("mem");
        assert!(InterpTable::parse("# c\n0 1\n1 x\n", p).is_err());
        assert!(InterpTable::parse("0 1 2\n1 2\n", p).is_err());
        let t = InterpTable::parse("# c\n\n0 1\n  1 2\n", p).unwrap();
        assert_eq!(t.knots(), &[0.0, 1.0]);
    }

    #[test]
    fn bundled_sea_level_and_decay() {
        let atm = AtmosphereModel::bundled();
        assert_eq!(atm.speed_of_sound.eval(0.0), atm.speed_of_sound.values()[0]);
        assert!((atm.speed_of_sound.eval(0.0) - 1116.4505).abs() < 1e-9);
        assert!(atm.density.eval(30_000.0) < atm.density.eval(0.0));
        assert_eq!(atm.density.span(), (0.0, 150_000.0));
        assert_eq!(atm.drag_coeff.span(), (0.0, 5.0));
    }
}
