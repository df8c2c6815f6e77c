use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use densgeo::datagen::{Manifest, ManifestRow};
use densgeo::fea::ReconGeometry;
use densgeo::mmc::GeometryDoc;
use densgeo::pipeline::{reverse_fit, reverse_skeleton, ReverseOptions};

use crate::commands::evaluate::{load_bc, load_target};
use crate::commands::report::{evaluate_row, write_reports, write_summary, ReportRow};
use crate::config::RunConfig;
use crate::io::write_json;

const METHODS: [&str; 2] = ["skeleton", "fit"];

fn compare_one(
    row: &ManifestRow,
    manifest_dir: &Path,
    out: &Path,
    opts: &ReverseOptions,
    threshold: f64,
) -> Vec<ReportRow> {
    let run = || -> Result<Vec<ReportRow>> {
        let target = load_target(manifest_dir, row, threshold)?;
        let bc = load_bc(manifest_dir, row)?;

        let skel = reverse_skeleton(&target, opts.thickness_points)?;
        let fit = reverse_fit(&target, opts)?;

        let mut rows = Vec::with_capacity(2);
        for (method, set) in [("skeleton", &skel.components), ("fit", &fit.components)] {
            let doc = GeometryDoc::new(set, opts.projection);
            write_json(
                &out.join(method).join(format!("{}.components.json", row.id)),
                &doc,
            )?;
            rows.push(evaluate_row(
                &row.id,
                method,
                &target,
                ReconGeometry::Components {
                    set: set.clone(),
                    projection: opts.projection,
                },
                bc.as_ref(),
            )?);
        }
        Ok(rows)
    };
    run().unwrap_or_else(|err| {
        log::warn!("{}: comparison failed: {err:#}", row.id);
        METHODS
            .iter()
            .map(|m| ReportRow::missing(&row.id, m))
            .collect()
    })
}

pub fn run(
    manifest_path: PathBuf,
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
    let opts = config.reverse_options()?;
    let threshold = config.reverse.threshold;

    let rows: Vec<ReportRow> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building thread pool")?;
        pool.install(|| {
            use rayon::prelude::*;
            manifest
                .rows
                .par_iter()
                .map(|row| compare_one(row, &manifest_dir, &out, &opts, threshold))
                .collect::<Vec<_>>()
        })
    } else {
        manifest
            .rows
            .iter()
            .map(|row| compare_one(row, &manifest_dir, &out, &opts, threshold))
            .collect()
    }
    .into_iter()
    .flatten()
    .collect();

    write_reports(&out.join("reports.csv"), &rows)?;
    write_summary(&out.join("summary.csv"), &rows, &METHODS)?;
    println!(
        "compared {} samples ({} rows) into {}",
        manifest.rows.len(),
        rows.len(),
        out.display()
    );
    Ok(())
}
