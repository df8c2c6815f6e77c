//! End-to-end reverse engineering: skeleton baseline and skeleton-seeded
//! fitting with pruning and mask-dice suppression.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitError, FitOptions, FitResult};
use crate::mmc::{render_set, ComponentSet, ProjectionParams};
use crate::raster::{binarize, dice, DensityGrid, RasterError};
use crate::skeleton::{
    distance_transform, estimate_branch_thickness, skeleton_to_components, skeletonize, Skeleton,
    SkeletonError, DEFAULT_THICKNESS_POINTS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("target has no material after binarization")]
    EmptyMaterial,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Pipeline knobs shared by the CLI and the benchmarks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReverseOptions {
    pub projection: ProjectionParams,
    pub fit: FitOptions,
    /// Samples per branch for thickness estimation.
    pub thickness_points: usize,
}

impl Default for ReverseOptions {
    fn default() -> Self {
        Self {
            projection: ProjectionParams::default(),
            fit: FitOptions::default(),
            thickness_points: DEFAULT_THICKNESS_POINTS,
        }
    }
}

/// Skeleton-only reverse engineering result.
#[derive(Debug, Clone)]
pub struct SkeletonReverse {
    pub skeleton: Skeleton,
    pub components: ComponentSet,
}

/// Thin, build the branch graph, estimate thicknesses, and convert each
/// branch to a bar component.
pub fn reverse_skeleton(
    target: &DensityGrid,
    thickness_points: usize,
) -> Result<SkeletonReverse, PipelineError> {
    if target.values().iter().all(|&v| v == 0.0) {
        return Err(PipelineError::EmptyMaterial);
    }
    let mut skeleton = skeletonize(target)?;
    let dist = distance_transform(target)?;
    skeleton.thicknesses = estimate_branch_thickness(&skeleton, &dist, thickness_points);
    let components = skeleton_to_components(&skeleton)?;
    Ok(SkeletonReverse {
        skeleton,
        components,
    })
}

/// Skeleton-seeded fit outcome.
#[derive(Debug, Clone)]
pub struct FitReverse {
    pub skeleton: SkeletonReverse,
    pub fit: FitResult,
    /// Final component set after suppression (or the seed, see below).
    pub components: ComponentSet,
    /// Binarized-render dice of `components` against the target.
    pub final_raster_dice: f64,
    /// Binarized-render dice of the raw skeleton seed.
    pub seed_raster_dice: f64,
    /// Set when the fitted set scored below the seed and the seed was
    /// returned instead (monotone-improvement guarantee).
    pub used_seed_fallback: bool,
}

/// Full reverse pipeline: skeleton seed, prune, fit, mask-dice NMS.
///
/// The returned set never scores below the raw skeleton seed on binarized
/// dice; if fitting were ever counterproductive the seed itself is
/// returned.
pub fn reverse_fit(
    target: &DensityGrid,
    opts: &ReverseOptions,
) -> Result<FitReverse, PipelineError> {
    let skeleton = reverse_skeleton(target, opts.thickness_points)?;
    if skeleton.components.is_empty() {
        return Err(PipelineError::EmptyMaterial);
    }
    let p = &opts.projection;
    let seed = &skeleton.components;

    let pruned = fit::prune(seed, target, p, opts.fit.prune_tolerance)?;
    let init = if pruned.is_empty() { seed.clone() } else { pruned };
    let fit_result = fit::fit(target, &init, p, &opts.fit)?;
    let suppressed = fit::mask_nms(
        &fit_result.components,
        &fit_result.per_component_score,
        p,
        target.spec(),
        opts.fit.nms_dice_threshold,
    )?;

    let raster_dice = |set: &ComponentSet| -> Result<f64, PipelineError> {
        let render = binarize(&render_set(set, p, target.spec()), 0.5)?;
        Ok(dice(&render, target)?)
    };
    let seed_raster_dice = raster_dice(seed)?;
    let fitted_dice = raster_dice(&suppressed)?;

    let (components, final_raster_dice, used_seed_fallback) = if fitted_dice >= seed_raster_dice {
        (suppressed, fitted_dice, false)
    } else {
        (seed.clone(), seed_raster_dice, true)
    };

    Ok(FitReverse {
        skeleton,
        fit: fit_result,
        components,
        final_raster_dice,
        seed_raster_dice,
        used_seed_fallback,
    })
}
