//! Report rows and Table-style aggregation shared by `evaluate` and
//! `compare`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use densgeo::datagen::BoundaryConditions;
use densgeo::fea::{self, Material, ReconGeometry};
use densgeo::raster::{dice, volume_fraction, DensityGrid};

use crate::io::write_atomic;

/// One evaluation row; metric fields are absent when the sample could not
/// be evaluated (missing geometry) or has no boundary conditions.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub id: String,
    pub method: String,
    pub dice: Option<f64>,
    pub vol_delta_pct: Option<f64>,
    pub comp_delta_pct: Option<f64>,
    pub comp_vol_product: Option<f64>,
    pub connected_support: Option<bool>,
    pub connected_load: Option<bool>,
}

impl ReportRow {
    pub fn missing(id: &str, method: &str) -> Self {
        Self {
            id: id.to_string(),
            method: method.to_string(),
            dice: None,
            vol_delta_pct: None,
            comp_delta_pct: None,
            comp_vol_product: None,
            connected_support: None,
            connected_load: None,
        }
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn opt_bool(v: Option<bool>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn write_reports(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::from(
        "id,method,dice,vol_delta_pct,comp_delta_pct,comp_vol_product,connected_support,connected_load\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.id,
            r.method,
            opt_num(r.dice),
            opt_num(r.vol_delta_pct),
            opt_num(r.comp_delta_pct),
            opt_num(r.comp_vol_product),
            opt_bool(r.connected_support),
            opt_bool(r.connected_load),
        );
    }
    write_atomic(path, out.as_bytes())
}

/// Table-2-style aggregation (mean dice, mean volume delta, median
/// compliance delta) per method, over the rows that carry each metric.
pub fn write_summary(path: &Path, rows: &[ReportRow], methods: &[&str]) -> Result<()> {
    let mut out =
        String::from("method,samples,mean_dice,mean_vol_delta_pct,median_comp_delta_pct\n");
    for method in methods {
        let dices: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == *method)
            .filter_map(|r| r.dice)
            .collect();
        let vols: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == *method)
            .filter_map(|r| r.vol_delta_pct)
            .collect();
        let comps: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == *method)
            .filter_map(|r| r.comp_delta_pct)
            .collect();
        let mean = |xs: &[f64]| {
            if xs.is_empty() {
                None
            } else {
                Some(xs.iter().sum::<f64>() / xs.len() as f64)
            }
        };
        let med = if comps.is_empty() {
            None
        } else {
            Some(fea::median(&comps))
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            method,
            dices.len(),
            opt_num(mean(&dices)),
            opt_num(mean(&vols)),
            opt_num(med),
        );
    }
    write_atomic(path, out.as_bytes())
}

/// Evaluate one reconstruction against its target: the full structural
/// report when boundary conditions exist, image-only metrics otherwise.
pub fn evaluate_row(
    id: &str,
    method: &str,
    target: &DensityGrid,
    geometry: ReconGeometry,
    bc: Option<&BoundaryConditions>,
) -> Result<ReportRow> {
    match bc {
        Some(bc) => {
            let eval = fea::evaluate(target, geometry, bc, Material::default())?;
            Ok(ReportRow {
                id: id.to_string(),
                method: method.to_string(),
                dice: Some(eval.report.dice),
                vol_delta_pct: Some(eval.report.volume_delta_pct),
                comp_delta_pct: Some(eval.report.compliance_delta_pct),
                comp_vol_product: Some(eval.report.compliance_volume_product),
                connected_support: Some(eval.report.connected_support),
                connected_load: Some(eval.report.connected_load),
            })
        }
        None => {
            let raster = geometry.rasterize(target.spec())?;
            let d = dice(target, &raster)?;
            let v_orig = volume_fraction(target);
            let v_recon = volume_fraction(&raster);
            Ok(ReportRow {
                id: id.to_string(),
                method: method.to_string(),
                dice: Some(d),
                vol_delta_pct: Some(100.0 * (v_recon - v_orig) / v_orig),
                comp_delta_pct: None,
                comp_vol_product: None,
                connected_support: None,
                connected_load: None,
            })
        }
    }
}
