use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};

use densgeo::fit;
use densgeo::pipeline::reverse_skeleton;

use crate::config::RunConfig;
use crate::io::{load_binary_grid, write_atomic};

fn parse_list(text: &str, name: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        out.push(
            part.trim()
                .parse::<f64>()
                .with_context(|| format!("{name}: {part:?} is not a number"))?,
        );
    }
    if out.is_empty() {
        anyhow::bail!("{name}: empty list");
    }
    Ok(out)
}

/// Threshold sensitivity sweep: for every (nms threshold, prune tolerance)
/// pair, run the fit pipeline and record the surviving component count and
/// the binarized reconstruction dice.
///
/// Tolerances run in ascending order and each pruning stage continues from
/// the previous one's survivors, so the component count entering the fit
/// is non-increasing in the tolerance by construction.
pub fn run(
    input: PathBuf,
    out: PathBuf,
    nms_thresholds: String,
    prune_tolerances: String,
    threshold: Option<f64>,
    config: RunConfig,
) -> Result<()> {
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    config.echo_into(&out)?;
    let opts = config.reverse_options()?;
    let p = &opts.projection;
    let threshold = threshold.unwrap_or(config.reverse.threshold);
    let target = load_binary_grid(&input, threshold)?;

    let nms_list = parse_list(&nms_thresholds, "--nms-thresholds")?;
    let mut prune_list = parse_list(&prune_tolerances, "--prune-tolerances")?;
    prune_list.sort_by(|a, b| a.total_cmp(b));

    let skel = reverse_skeleton(&target, opts.thickness_points)?;

    let mut csv = String::from("nms_dice_threshold,prune_tolerance,components,dice\n");
    let mut seed = skel.components.clone();
    for &tol in &prune_list {
        let cell = (|| -> Result<(densgeo::mmc::ComponentSet, f64)> {
            seed = fit::prune(&seed, &target, p, tol)?;
            let init = if seed.is_empty() {
                skel.components.clone()
            } else {
                seed.clone()
            };
            let fit_opts = densgeo::fit::FitOptions {
                prune_tolerance: tol,
                ..opts.fit
            };
            let result = fit::fit(&target, &init, p, &fit_opts)?;
            Ok((result.components, 0.0))
        })();
        match cell {
            Ok((fitted, _)) => {
                for &nms in &nms_list {
                    let row = (|| -> Result<(usize, f64)> {
                        let scores: Vec<f64> = fitted
                            .components
                            .iter()
                            .map(|c| {
                                fit::bounded_component_dice(c, &target, p).map(|s| s.dice)
                            })
                            .collect::<Result<_, _>>()?;
                        let kept = fit::mask_nms(&fitted, &scores, p, target.spec(), nms)?;
                        let dice = fit::raster_assembly_dice(&kept, &target, p)?;
                        Ok((kept.len(), dice))
                    })();
                    match row {
                        Ok((count, dice)) => {
                            let _ = writeln!(csv, "{nms},{tol},{count},{dice}");
                        }
                        Err(err) => {
                            log::warn!("cell (nms {nms}, tol {tol}) failed: {err:#}");
                            let _ = writeln!(csv, "{nms},{tol},-,-");
                        }
                    }
                }
            }
            Err(err) => {
                log::warn!("prune/fit at tol {tol} failed: {err:#}");
                for &nms in &nms_list {
                    let _ = writeln!(csv, "{nms},{tol},-,-");
                }
            }
        }
    }
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    println!(
        "swept {} cells into {}",
        nms_list.len() * prune_list.len(),
        out.display()
    );
    Ok(())
}
