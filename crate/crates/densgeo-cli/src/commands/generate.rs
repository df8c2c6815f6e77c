use std::path::PathBuf;

use anyhow::{Context, Result};

use densgeo::datagen::{generate_sample, sample_seed, DatasetKind, Manifest};

use crate::config::RunConfig;
use crate::io::write_atomic;

#[allow(clippy::too_many_arguments)]
pub fn run(
    kind: DatasetKind,
    count: usize,
    seed: u64,
    out: PathBuf,
    config: RunConfig,
    jobs: usize,
) -> Result<()> {
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    config.echo_into(&out)?;
    let opts = config.generate_options()?;

    let indices: Vec<usize> = (0..count).collect();
    let generate_one = |&index: &usize| {
        let sub = sample_seed(seed, index as u64);
        let id = format!("{kind}_{index:04}");
        match generate_sample(kind, sub, &id, &out, &opts) {
            Ok(row) => Some(row),
            Err(err) => {
                log::warn!("sample {id} failed: {err}");
                None
            }
        }
    };
    let rows: Vec<_> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building thread pool")?;
        pool.install(|| {
            use rayon::prelude::*;
            indices.par_iter().map(generate_one).collect()
        })
    } else {
        indices.iter().map(generate_one).collect()
    };

    let manifest = Manifest {
        rows: rows.into_iter().flatten().collect(),
    };
    write_atomic(&out.join("manifest.csv"), manifest.to_csv().as_bytes())?;
    println!(
        "generated {} of {count} samples into {}",
        manifest.rows.len(),
        out.display()
    );
    Ok(())
}
