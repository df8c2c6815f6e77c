//! Small file helpers shared by the commands.

use std::path::Path;

use anyhow::{bail, Context, Result};

use densgeo::mmc::GeometryDoc;
use densgeo::raster::{binarize, load_grid, DensityGrid, GridFormat};

/// Write via a temp file and rename so partial output is never visible.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Infer the grid format from the file extension (`.csv` or PGM default).
pub fn grid_format_of(path: &Path) -> GridFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => GridFormat::Csv,
        _ => GridFormat::Pgm,
    }
}

/// Load a grid and binarize it at the given threshold.
pub fn load_binary_grid(path: &Path, threshold: f64) -> Result<DensityGrid> {
    let grid = load_grid(path, grid_format_of(path))
        .with_context(|| format!("loading {}", path.display()))?;
    let binary = binarize(&grid, threshold).context("binarizing input")?;
    if binary.values().iter().all(|&v| v == 0.0) {
        bail!(
            "{}: no material above threshold {threshold}",
            path.display()
        );
    }
    Ok(binary)
}

pub fn load_geometry(path: &Path) -> Result<GeometryDoc> {
    read_json(path)
}
