use std::path::PathBuf;

use anyhow::{Context, Result};

use densgeo::mmc::render_set;
use densgeo::raster::{binarize, encode_pgm, GridSpec};

use crate::io::{load_geometry, write_atomic};

/// Rasterize a component-set JSON to a PGM, at its own domain grid or an
/// overridden resolution.
pub fn run(
    input: PathBuf,
    out: PathBuf,
    nx: Option<usize>,
    ny: Option<usize>,
    threshold: Option<f64>,
) -> Result<()> {
    let doc = load_geometry(&input)?;
    let set = doc.component_set();
    let spec = match (nx, ny) {
        (None, None) => set.domain,
        (x, y) => GridSpec::new(
            x.unwrap_or(set.domain.nx()),
            y.unwrap_or(set.domain.ny()),
            set.domain.width(),
            set.domain.height(),
        )
        .context("invalid render resolution")?,
    };
    let mut grid = render_set(&set, &doc.projection, &spec);
    if let Some(t) = threshold {
        grid = binarize(&grid, t).context("binarizing render")?;
    }
    write_atomic(&out, &encode_pgm(&grid))?;
    println!("rendered {} components to {}", set.len(), out.display());
    Ok(())
}
