use std::path::Path;

use anyhow::{bail, Context};
use clap::Args;
use fogdrip::particles::PhaseParams;
use fogdrip::wulff::{SurfaceTension, WulffShape};
use fogdrip::LatticeGeometry;
use serde::{Deserialize, Serialize};

/// Config file layout. Every key is optional; flags win over the file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub geometry: GeometrySection,
    pub model: ModelSection,
    pub run: RunSection,
    pub tension: TensionSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(rename = "N")]
    pub n: Option<u32>,
    #[serde(rename = "R")]
    pub r: Option<u32>,
    pub hmax: Option<i32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub beta: Option<f64>,
    pub pv: Option<f64>,
    pub ps: Option<f64>,
    pub f: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub sweeps: Option<u64>,
    pub burnin: Option<u64>,
    pub thinning: Option<u64>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensionSection {
    pub model: Option<String>,
    pub beta: Option<f64>,
    pub directions: Option<usize>,
    /// Path length of the numeric tension estimate.
    pub length: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Flags shared by the model-level subcommands.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML file with [geometry], [model], [run] and [tension] sections.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Run directory; defaults to runs/<command>-<seed>.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long = "N")]
    pub n: Option<u32>,
    #[arg(long = "R")]
    pub r: Option<u32>,
    #[arg(long)]
    pub hmax: Option<i32>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub pv: Option<f64>,
    #[arg(long)]
    pub ps: Option<f64>,
    #[arg(long)]
    pub f: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sweeps: Option<u64>,
    #[arg(long)]
    pub burnin: Option<u64>,
    #[arg(long)]
    pub thinning: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// lattice-l1, isotropic or numeric-path.
    #[arg(long)]
    pub tension: Option<String>,
    #[arg(long)]
    pub tension_beta: Option<f64>,
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub path_length: Option<usize>,
}

/// Fully resolved settings, as recorded in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "R")]
    pub r: u32,
    pub hmax: i32,
    pub beta: f64,
    pub pv: f64,
    pub ps: f64,
    pub f: f64,
    pub delta: Option<f64>,
    pub sweeps: u64,
    pub burnin: u64,
    pub thinning: u64,
    pub seed: u64,
    pub replicates: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub tension_model: String,
    pub tension_beta: f64,
    pub directions: Option<usize>,
    pub path_length: usize,
}

impl Settings {
    pub fn resolve(o: &Overrides) -> anyhow::Result<Self> {
        let file = match &o.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let beta = o.beta.or(file.model.beta).unwrap_or(2.0);
        let sweeps = o.sweeps.or(file.run.sweeps).unwrap_or(2000);
        let s = Settings {
            n: o.n.or(file.geometry.n).unwrap_or(24),
            r: o.r.or(file.geometry.r).unwrap_or(2),
            hmax: o.hmax.or(file.geometry.hmax).unwrap_or(3),
            beta,
            pv: o.pv.or(file.model.pv).unwrap_or(0.2),
            ps: o.ps.or(file.model.ps).unwrap_or(0.8),
            f: o.f.or(file.model.f).unwrap_or(0.0),
            delta: o.delta.or(file.model.delta),
            sweeps,
            burnin: o.burnin.or(file.run.burnin).unwrap_or(sweeps / 10),
            thinning: o.thinning.or(file.run.thinning).unwrap_or(1),
            seed: o.seed.or(file.run.seed).unwrap_or(1),
            replicates: o.replicates.or(file.run.replicates).unwrap_or(8),
            epsilon: o.epsilon.or(file.run.epsilon).unwrap_or(1.0),
            eta: o.eta.or(file.run.eta).unwrap_or(0.25),
            tension_model: o.tension.clone().or(file.tension.model).unwrap_or_else(|| "isotropic".into()),
            tension_beta: o.tension_beta.or(file.tension.beta).unwrap_or(beta),
            directions: o.directions.or(file.tension.directions),
            path_length: o.path_length.or(file.tension.length).unwrap_or(64),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            bail!("beta must be positive, got {}", self.beta);
        }
        if self.thinning == 0 {
            bail!("thinning must be at least 1");
        }
        if self.burnin > self.sweeps {
            bail!("burnin {} exceeds sweeps {}", self.burnin, self.sweeps);
        }
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if !(self.epsilon > 0.0) {
            bail!("epsilon must be positive");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            bail!("eta must lie in (0, 1)");
        }
        if let Some(d) = self.delta {
            if !d.is_finite() || d < 0.0 {
                bail!("delta must be a non-negative number, got {d}");
            }
        }
        self.geometry()?;
        self.params()?;
        self.tension()?;
        Ok(())
    }

    pub fn geometry(&self) -> anyhow::Result<LatticeGeometry> {
        LatticeGeometry::new(self.n, self.r, self.hmax).map_err(|e| anyhow::anyhow!("geometry: {e}"))
    }

    pub fn params(&self) -> anyhow::Result<PhaseParams> {
        PhaseParams::from_occupations(self.pv, self.ps, self.f).map_err(|e| anyhow::anyhow!("model: {e}"))
    }

    pub fn tension(&self) -> anyhow::Result<SurfaceTension> {
        let beta = self.tension_beta;
        match self.tension_model.as_str() {
            "isotropic" => Ok(SurfaceTension::Isotropic { beta }),
            "lattice-l1" => Ok(SurfaceTension::LatticeL1 { beta }),
            "numeric-path" => {
                SurfaceTension::numeric_path(beta, self.path_length).map_err(|e| anyhow::anyhow!("tension: {e}"))
            }
            other => bail!("unknown tension model {other:?}; expected isotropic, lattice-l1 or numeric-path"),
        }
    }

    pub fn shape(&self) -> anyhow::Result<WulffShape> {
        let t = self.tension()?;
        let shape = match self.directions {
            Some(m) => WulffShape::with_directions(&t, m),
            None => WulffShape::construct(&t),
        };
        shape.map_err(|e| anyhow::anyhow!("tension: {e}"))
    }
}
