use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use densgeo::datagen::{BoundaryConditions, Manifest, ManifestRow};
use densgeo::fea::ReconGeometry;
use densgeo::raster::DensityGrid;

use crate::commands::report::{evaluate_row, write_reports, write_summary, ReportRow};
use crate::config::RunConfig;
use crate::io::{load_binary_grid, load_geometry, read_json};

pub fn load_target(manifest_dir: &Path, row: &ManifestRow, threshold: f64) -> Result<DensityGrid> {
    load_binary_grid(&manifest_dir.join(&row.target_path), threshold)
}

pub fn load_bc(manifest_dir: &Path, row: &ManifestRow) -> Result<Option<BoundaryConditions>> {
    row.bc_path
        .as_ref()
        .map(|p| read_json(&manifest_dir.join(p)))
        .transpose()
}

pub fn run(
    manifest_path: PathBuf,
    geometry_dir: PathBuf,
    method_name: String,
    out: PathBuf,
    config: RunConfig,
    jobs: usize,
) -> Result<()> {
    let manifest = Manifest::load(&manifest_path)
        .with_context(|| format!("loading manifest {}", manifest_path.display()))?;
    if manifest.rows.is_empty() {
        anyhow::bail!("manifest {} has no rows", manifest_path.display());
    }
    let manifest_dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    config.echo_into(&out)?;
    let threshold = config.reverse.threshold;

    let eval_one = |row: &ManifestRow| -> ReportRow {
        let result = (|| -> Result<ReportRow> {
            let target = load_target(&manifest_dir, row, threshold)?;
            let geom_path = geometry_dir.join(format!("{}.components.json", row.id));
            if !geom_path.exists() {
                log::warn!("{}: missing geometry {}", row.id, geom_path.display());
                return Ok(ReportRow::missing(&row.id, &method_name));
            }
            let doc = load_geometry(&geom_path)?;
            let bc = load_bc(&manifest_dir, row)?;
            evaluate_row(
                &row.id,
                &method_name,
                &target,
                ReconGeometry::Components {
                    set: doc.component_set(),
                    projection: doc.projection,
                },
                bc.as_ref(),
            )
        })();
        result.unwrap_or_else(|err| {
            log::warn!("{}: evaluation failed: {err:#}", row.id);
            ReportRow::missing(&row.id, &method_name)
        })
    };

    let rows: Vec<ReportRow> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building thread pool")?;
        pool.install(|| {
            use rayon::prelude::*;
            manifest.rows.par_iter().map(eval_one).collect()
        })
    } else {
        manifest.rows.iter().map(eval_one).collect()
    };

    write_reports(&out.join("reports.csv"), &rows)?;
    write_summary(&out.join("summary.csv"), &rows, &[&method_name])?;
    println!("evaluated {} samples into {}", rows.len(), out.display());
    Ok(())
}
