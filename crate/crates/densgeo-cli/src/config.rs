//! Run configuration: a TOML file with sections mirroring the library
//! option structs. Every key has a default; unknown keys are rejected.
//! Command-line flags override file values, and the effective config is
//! echoed into every output directory.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use densgeo::datagen::{GenerateOptions, SimpOptions};
use densgeo::fit::FitOptions;
use densgeo::mmc::ProjectionParams;
use densgeo::pipeline::ReverseOptions;
use densgeo::raster::GridSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionCfg {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub literal_length: bool,
}

impl Default for ProjectionCfg {
    fn default() -> Self {
        let p = ProjectionParams::default();
        Self {
            epsilon: p.epsilon,
            alpha: p.alpha,
            beta: p.beta,
            literal_length: p.literal_length,
        }
    }
}

impl ProjectionCfg {
    pub fn to_params(&self) -> Result<ProjectionParams> {
        ProjectionParams::new(self.epsilon, self.alpha, self.beta, self.literal_length)
            .context("invalid [projection] section")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenCfg {
    /// Grid for random-assembly targets.
    pub nx: usize,
    pub ny: usize,
    pub w: f64,
    pub h: f64,
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for DatagenCfg {
    fn default() -> Self {
        Self {
            nx: 128,
            ny: 128,
            w: 1.0,
            h: 1.0,
            n_min: 4,
            n_max: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReverseCfg {
    /// Binarization threshold applied to input grids.
    pub threshold: f64,
    /// Samples per branch for skeleton thickness estimation.
    pub thickness_points: usize,
}

impl Default for ReverseCfg {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            thickness_points: 10,
        }
    }
}

/// Effective run configuration (file defaults plus flag overrides).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub projection: ProjectionCfg,
    pub fit: FitOptions,
    pub simp: SimpOptions,
    pub datagen: DatagenCfg,
    pub reverse: ReverseCfg,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn projection(&self) -> Result<ProjectionParams> {
        self.projection.to_params()
    }

    pub fn reverse_options(&self) -> Result<ReverseOptions> {
        Ok(ReverseOptions {
            projection: self.projection()?,
            fit: self.fit,
            thickness_points: self.reverse.thickness_points,
        })
    }

    pub fn generate_options(&self) -> Result<GenerateOptions> {
        Ok(GenerateOptions {
            simp: self.simp,
            projection: self.projection()?,
            random_spec: GridSpec::new(
                self.datagen.nx,
                self.datagen.ny,
                self.datagen.w,
                self.datagen.h,
            )
            .context("invalid [datagen] grid")?,
            n_components: self.datagen.n_min..=self.datagen.n_max,
        })
    }

    /// Write the effective configuration into an output directory.
    pub fn echo_into(&self, out_dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing effective config")?;
        crate::io::write_atomic(&out_dir.join("config.toml"), text.as_bytes())
    }
}
