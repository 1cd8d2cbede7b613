use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceKind {
    Pn,
    Apn,
}

impl GuidanceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GuidanceKind::Pn => "pn",
            GuidanceKind::Apn => "apn",
        }
    }
}

impl FromStr for GuidanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pn" => Ok(GuidanceKind::Pn),
            "apn" => Ok(GuidanceKind::Apn),
            other => Err(Error::validation("laws", format!("unknown guidance law '{other}'"))),
        }
    }
}

/// A guidance law and its navigation ratio `N′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceLaw {
    pub kind: GuidanceKind,
    pub ratio: f64,
}

impl GuidanceLaw {
    pub fn new(kind: GuidanceKind, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::validation("ratios", format!("navigation ratio must be positive, got {ratio}")));
        }
        Ok(Self { kind, ratio })
    }

    /// Every combination of `kinds` and `ratios`, kinds outermost.
    pub fn sweep(kinds: &[GuidanceKind], ratios: &[f64]) -> Result<Vec<Self>> {
        kinds
            .iter()
            .flat_map(|k| ratios.iter().map(move |r| GuidanceLaw::new(*k, *r)))
            .collect()
    }

    /// PN and APN with `N′ = 3, 4, 5`.
    pub fn standard_sweep() -> Vec<Self> {
        Self::sweep(&[GuidanceKind::Pn, GuidanceKind::Apn], &[3.0, 4.0, 5.0]).unwrap()
    }
}

impl fmt::Display for GuidanceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} N'={}", self.kind.as_str().to_uppercase(), self.ratio)
    }
}

/// Per-axis clip to `[-bound, bound]`.
pub fn clip_input(u: &Vector3<f64>, bound: f64) -> Vector3<f64> {
    u.map(|c| c.clamp(-bound, bound))
}

/// True proportional navigation in 3-D.
///
/// With `r = p_E − p_P`, `v = v_E − v_P` and the line-of-sight rate
/// `Ω = (r × v)/(r·r)`, the command is `a = N′ (v × Ω)` with its component
/// along `r` removed. APN adds `(N′/2) a_T⊥`, the evader's acceleration normal
/// to the line of sight. The result is clipped to `bound` per axis.
pub fn pn_accel(
    pursuer: &State,
    evader: &State,
    evader_accel: &Vector3<f64>,
    law: &GuidanceLaw,
    bound: f64,
) -> Result<Vector3<f64>> {
    let r = evader.p - pursuer.p;
    let rr = r.norm_squared();
    if rr == 0.0 {
        return Err(Error::Simulation("zero relative position".into()));
    }
    let v = evader.v - pursuer.v;
    let omega = r.cross(&v) / rr;
    let normal = |a: Vector3<f64>| a - r * (a.dot(&r) / rr);
    let mut a = normal(v.cross(&omega)) * law.ratio;
    if law.kind == GuidanceKind::Apn {
        a += normal(*evader_accel) * (0.5 * law.ratio);
    }
    Ok(clip_input(&a, bound))
}
