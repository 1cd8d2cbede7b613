//! Scenario files: players, asset, engagement radii, and algorithm settings
//! in TOML.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereModel;
use crate::dynamics::{PlayerSpec, Role, State};
use crate::error::{Error, Result};
use crate::ibr::{Game, IbrSettings, DEFAULT_IBR_ITERATIONS};
use crate::scp::{ScpSettings, DEFAULT_SCP_ITERATIONS};
use crate::simulation::{EngagementSettings, GuidanceKind, GuidanceLaw, LqrWeights};
use crate::transcription::{GameParams, SubproblemWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetEntry {
    /// ft
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerEntry {
    pub name: String,
    pub role: Role,
    /// ft
    pub position: [f64; 3],
    /// ft/s
    pub velocity: [f64; 3],
    /// slugs
    pub mass: f64,
    /// ft²
    pub area: f64,
    /// G
    pub u_max: f64,
    pub mach_min: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    30
}

impl PlayerEntry {
    pub fn spec(&self) -> PlayerSpec {
        PlayerSpec {
            name: self.name.clone(),
            role: self.role,
            mass: self.mass,
            area: self.area,
            u_max: self.u_max,
            mach_min: self.mach_min,
            nodes: self.nodes,
            initial: State::new(self.position, self.velocity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmEntry {
    /// N_IBR
    pub ibr_iterations: usize,
    /// N_SCP
    pub scp_iterations: usize,
    pub weights: SubproblemWeights,
}

impl Default for AlgorithmEntry {
    fn default() -> Self {
        Self {
            ibr_iterations: DEFAULT_IBR_ITERATIONS,
            scp_iterations: DEFAULT_SCP_ITERATIONS,
            weights: SubproblemWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationEntry {
    pub laws: Vec<GuidanceKind>,
    pub ratios: Vec<f64>,
    /// Extra input authority available to the tracking evader, G.
    pub headroom: f64,
    pub engagement: EngagementSettings,
    pub lqr: LqrWeights,
}

impl Default for VerificationEntry {
    fn default() -> Self {
        Self {
            laws: vec![GuidanceKind::Pn, GuidanceKind::Apn],
            ratios: vec![3.0, 4.0, 5.0],
            headroom: 1.0,
            engagement: EngagementSettings::default(),
            lqr: LqrWeights::default(),
        }
    }
}

impl VerificationEntry {
    pub fn guidance_laws(&self) -> Result<Vec<GuidanceLaw>> {
        GuidanceLaw::sweep(&self.laws, &self.ratios)
    }
}

/// Table files; relative paths are taken from the scenario file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtmosphereEntry {
    pub density: PathBuf,
    pub speed_of_sound: PathBuf,
    pub drag_coeff: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub asset: AssetEntry,
    #[serde(default)]
    pub engagement: GameParams,
    #[serde(default)]
    pub algorithm: AlgorithmEntry,
    #[serde(default)]
    pub verification: VerificationEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atmosphere: Option<AtmosphereEntry>,
    #[serde(default)]
    pub players: Vec<PlayerEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, path, base)
    }

    /// Parses and validates; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &Path, base_dir: PathBuf) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |r| text[..r.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        s.base_dir = base_dir;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Other(format!("scenario serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must be positive, got {v}")))
            }
        };
        let evaders = self.players.iter().filter(|p| p.role == Role::Evader).count();
        if evaders != 1 {
            return Err(Error::validation(
                "players",
                format!("exactly one evader required, found {evaders}"),
            ));
        }
        for (i, p) in self.players.iter().enumerate() {
            let key = format!("players[{i}]");
            if p.role == Role::Asset {
                return Err(Error::validation(
                    format!("{key}.role"),
                    "the asset is given by the [asset] table",
                ));
            }
            p.spec().validate(&key)?;
            positive(p.u_max, &format!("{key}.u_max"))?;
        }
        if !self.asset.position.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("asset.position", "must be finite"));
        }
        let g = &self.engagement;
        positive(g.capture_radius, "engagement.capture_radius")?;
        positive(g.evasion_radius, "engagement.evasion_radius")?;
        positive(g.time_lower, "engagement.time_lower")?;
        positive(g.time_upper, "engagement.time_upper")?;
        if g.time_upper <= g.time_lower {
            return Err(Error::validation("engagement.time_upper", "must exceed engagement.time_lower"));
        }
        if !(g.pursuer_margin >= 0.0 && g.pursuer_margin.is_finite()) {
            return Err(Error::validation("engagement.pursuer_margin", "must be non-negative"));
        }
        if g.substeps == 0 {
            return Err(Error::validation("engagement.substeps", "must be at least 1"));
        }
        let a = &self.algorithm;
        if a.ibr_iterations == 0 {
            return Err(Error::validation("algorithm.ibr_iterations", "must be at least 1"));
        }
        if a.scp_iterations == 0 {
            return Err(Error::validation("algorithm.scp_iterations", "must be at least 1"));
        }
        positive(a.weights.w_vc, "algorithm.weights.w_vc")?;
        positive(a.weights.w_tr, "algorithm.weights.w_tr")?;
        positive(a.weights.eps_vc, "algorithm.weights.eps_vc")?;
        positive(a.weights.eps_tr, "algorithm.weights.eps_tr")?;
        let v = &self.verification;
        if v.laws.is_empty() {
            return Err(Error::validation("verification.laws", "at least one law required"));
        }
        if v.ratios.is_empty() {
            return Err(Error::validation("verification.ratios", "at least one ratio required"));
        }
        v.guidance_laws()?;
        positive(v.engagement.dt, "verification.engagement.dt")?;
        if !(v.engagement.asset_slack >= 0.0 && v.headroom >= 0.0) {
            return Err(Error::validation(
                "verification",
                "asset_slack and headroom must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn evader(&self) -> &PlayerEntry {
        self.players.iter().find(|p| p.role == Role::Evader).unwrap()
    }

    pub fn pursuers(&self) -> impl Iterator<Item = &PlayerEntry> {
        self.players.iter().filter(|p| p.role == Role::Pursuer)
    }

    pub fn game(&self) -> Game {
        Game {
            evader: self.evader().spec(),
            pursuers: self.pursuers().map(PlayerEntry::spec).collect(),
            asset: Vector3::from(self.asset.position),
            params: self.engagement.clone(),
        }
    }

    pub fn ibr_settings(&self) -> IbrSettings {
        IbrSettings {
            iterations: self.algorithm.ibr_iterations,
            scp: ScpSettings {
                max_iterations: self.algorithm.scp_iterations,
                weights: self.algorithm.weights.clone(),
            },
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The configured tables, or the bundled ones.
    pub fn atmosphere_model(&self) -> Result<AtmosphereModel> {
        match &self.atmosphere {
            None => Ok(AtmosphereModel::bundled()),
            Some(a) => AtmosphereModel::from_files(
                &self.resolve(&a.density),
                &self.resolve(&a.speed_of_sound),
                &self.resolve(&a.drag_coeff),
            ),
        }
    }

    /// Output directory as configured, resolved against the scenario file.
    pub fn resolved_output_dir(&self) -> Option<PathBuf> {
        self.output_dir.as_deref().map(|p| self.resolve(p))
    }
}

/// Directory holding the bundled example scenarios.
pub fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}
