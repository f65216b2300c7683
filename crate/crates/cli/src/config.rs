//! TOML experiment configuration with strict (no-unknown-keys) parsing.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use todalab_core::{Domain, Vec2};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    /// Default output directory; the --out flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Default random seed; the --seed flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// "disk", "rectangle", or "polygon".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub rho2: f64,
    /// Concentration points, or the keyword "auto" to search for them.
    pub points: PointsSpec,
    /// Number of points when `points = "auto"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsSpec {
    Keyword(String),
    Explicit(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h_target: f64,
    /// Mesh-halving levels used by convergence studies.
    pub refinements: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { h_target: 0.08, refinements: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub lambda_start: f64,
    pub lambda_min: f64,
    pub shrink: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Background mesh size away from the concentration wells.
    pub h_background: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            lambda_start: 0.1,
            lambda_min: 1e-5,
            shrink: 0.5,
            newton_tol: 1e-9,
            max_newton: 30,
            h_background: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// λ samples of the residual scan, strictly decreasing.
    pub lambdas: Vec<f64>,
    /// Scale interval and sample count of the configuration scan
    /// ξ(t) = t · points.
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            lambdas: vec![1e-2, 3.162e-3, 1e-3, 3.162e-4, 1e-4, 3.162e-5, 1e-5],
            t_min: 0.0,
            t_max: 0.6,
            samples: 13,
        }
    }
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain()?.validate()?;
        if !(self.model.rho2 >= 0.0) || !self.model.rho2.is_finite() {
            bail!("model.rho2 must be finite and nonnegative");
        }
        match &self.model.points {
            PointsSpec::Keyword(kw) => {
                if kw != "auto" {
                    bail!("model.points must be a coordinate list or the keyword \"auto\"");
                }
                if self.model.k.map_or(true, |k| k < 1) {
                    bail!("model.points = \"auto\" needs model.k >= 1");
                }
            }
            PointsSpec::Explicit(pts) => {
                if pts.is_empty() {
                    bail!("model.points must name at least one point");
                }
            }
        }
        if !(self.mesh.h_target > 0.0) {
            bail!("mesh.h_target must be positive");
        }
        let l = &self.ladder;
        if !(l.lambda_min > 0.0 && l.lambda_start >= l.lambda_min) {
            bail!("ladder needs lambda_start >= lambda_min > 0");
        }
        if !(l.shrink > 0.0 && l.shrink < 1.0) {
            bail!("ladder.shrink must lie in (0, 1)");
        }
        if !(l.h_background > 0.0) {
            bail!("ladder.h_background must be positive");
        }
        if self.scan.lambdas.len() < 2 {
            bail!("scan.lambdas needs at least two samples");
        }
        if !self.scan.lambdas.windows(2).all(|w| w[1] < w[0]) {
            bail!("scan.lambdas must be strictly decreasing");
        }
        if self.scan.samples < 2 {
            bail!("scan.samples must be at least 2");
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = match self.domain.kind.as_str() {
            "disk" => Domain::UnitDisk,
            "rectangle" => Domain::Rectangle {
                width: self.domain.width.context("domain.width required for rectangle")?,
                height: self.domain.height.context("domain.height required for rectangle")?,
            },
            "polygon" => Domain::Polygon {
                vertices: self
                    .domain
                    .vertices
                    .as_ref()
                    .context("domain.vertices required for polygon")?
                    .iter()
                    .map(|&[x, y]| Vec2::new(x, y))
                    .collect(),
            },
            other => bail!("unknown domain.kind {other:?} (disk | rectangle | polygon)"),
        };
        Ok(d)
    }

    /// Explicit concentration points, if the config names them.
    pub fn explicit_points(&self) -> Option<Vec<Vec2>> {
        match &self.model.points {
            PointsSpec::Explicit(pts) => {
                Some(pts.iter().map(|&[x, y]| Vec2::new(x, y)).collect())
            }
            PointsSpec::Keyword(_) => None,
        }
    }

    /// Number of concentration points.
    pub fn k(&self) -> usize {
        match &self.model.points {
            PointsSpec::Explicit(pts) => pts.len(),
            PointsSpec::Keyword(_) => self.model.k.unwrap_or(1),
        }
    }

    /// Canonical serialized form, hashed into every manifest.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
