use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use densgeo::fit::FitResult;
use densgeo::mmc::{render_set, ComponentSet, GeometryDoc, ProjectionParams};
use densgeo::pipeline::{reverse_fit, reverse_skeleton};
use densgeo::raster::{binarize, encode_pgm};

use crate::config::RunConfig;
use crate::io::{load_binary_grid, write_atomic, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Skeleton,
    Fit,
}

/// On-disk fit record: the component-set schema plus the quality trail.
#[derive(Serialize)]
struct FitResultDoc {
    #[serde(flatten)]
    geometry: GeometryDoc,
    initial_dice: f64,
    final_dice: f64,
    iterations: usize,
    scores: Vec<f64>,
}

fn write_recon(
    out: &Path,
    set: &ComponentSet,
    projection: &ProjectionParams,
) -> Result<()> {
    write_json(&out.join("components.json"), &GeometryDoc::new(set, *projection))?;
    let raster = binarize(&render_set(set, projection, &set.domain), 0.5)?;
    write_atomic(&out.join("recon.pgm"), &encode_pgm(&raster))
}

pub fn run(
    input: PathBuf,
    method: Method,
    out: PathBuf,
    threshold: Option<f64>,
    config: RunConfig,
) -> Result<()> {
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    config.echo_into(&out)?;
    let opts = config.reverse_options()?;
    let threshold = threshold.unwrap_or(config.reverse.threshold);
    let target = load_binary_grid(&input, threshold)?;

    match method {
        Method::Skeleton => {
            let result = reverse_skeleton(&target, opts.thickness_points)?;
            write_json(&out.join("skeleton.json"), &result.skeleton)?;
            write_recon(&out, &result.components, &opts.projection)?;
            println!(
                "skeleton: {} branches -> {} components",
                result.skeleton.branches.len(),
                result.components.len()
            );
        }
        Method::Fit => {
            let result = reverse_fit(&target, &opts)?;
            write_json(&out.join("skeleton.json"), &result.skeleton.skeleton)?;
            write_recon(&out, &result.components, &opts.projection)?;
            let FitResult {
                initial_dice,
                final_dice,
                iterations_used,
                ref per_component_score,
                ..
            } = result.fit;
            write_json(
                &out.join("fit.json"),
                &FitResultDoc {
                    geometry: GeometryDoc::new(&result.components, opts.projection),
                    initial_dice,
                    final_dice,
                    iterations: iterations_used,
                    scores: per_component_score.clone(),
                },
            )?;
            println!(
                "fit: {} components, raster dice {:.4} (seed {:.4}{})",
                result.components.len(),
                result.final_raster_dice,
                result.seed_raster_dice,
                if result.used_seed_fallback {
                    ", kept seed"
                } else {
                    ""
                }
            );
        }
    }
    Ok(())
}
