//! Reverse-engineering engine: the pixel-based bounded dice reconstruction
//! loss, adaptive gradient descent over component parameters, greedy
//! pruning and mask-dice non-max suppression.
//!
//! Everything is self-supervised: the only input is the binary target
//! raster, the objective is `1 - dice(render(assembly), target)` and its
//! analytic gradient flows through the decoder chain in [`crate::mmc`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mmc::{
    component_density_at, grad_params, render_set, support_pixel_range_for_level, Component,
    ComponentSet, GeometryError, ProjectionParams, T_MAX, T_MIN,
};
use crate::raster::{DensityGrid, GridSpec, RasterError};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("target grid is not binary")]
    TargetNotBinary,
    #[error("target shape {0}x{1} does not match the set's domain {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("initial component set is empty")]
    EmptyInit,
    #[error("component {component} has no pixel at coverage {coverage}")]
    EmptyBBox { component: usize, coverage: f64 },
    #[error("scores length {scores} does not match component count {components}")]
    ScoreLength { scores: usize, components: usize },
    #[error("invalid fit options: {0}")]
    BadOptions(String),
    #[error("no material in target")]
    EmptyTarget,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Inclusive pixel-index rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: usize,
    pub ymin: usize,
    pub xmax: usize,
    pub ymax: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.xmax - self.xmin + 1
    }
    pub fn height(&self) -> usize {
        self.ymax - self.ymin + 1
    }
    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let xmin = self.xmin.max(other.xmin);
        let ymin = self.ymin.max(other.ymin);
        let xmax = self.xmax.min(other.xmax);
        let ymax = self.ymax.min(other.ymax);
        if xmin <= xmax && ymin <= ymax {
            Some(BBox {
                xmin,
                ymin,
                xmax,
                ymax,
            })
        } else {
            None
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        match self.intersection(other) {
            Some(inter) => {
                let i = inter.area() as f64;
                i / (self.area() as f64 + other.area() as f64 - i)
            }
            None => 0.0,
        }
    }
}

/// Fitting knobs; defaults follow the artifact's calibrated values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Step scale in normalized domain units (scaled per parameter by the
    /// domain extent or thickness range).
    pub learning_rate: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Stop after this many non-improving iterations.
    pub early_stop_patience: usize,
    pub nms_dice_threshold: f64,
    pub prune_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            learning_rate: 0.02,
            t_min: T_MIN,
            t_max: T_MAX,
            early_stop_patience: 50,
            nms_dice_threshold: 0.9,
            prune_tolerance: 1e-3,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<(), FitError> {
        if !(self.t_min >= T_MIN && self.t_max <= T_MAX && self.t_min <= self.t_max) {
            return Err(FitError::BadOptions(format!(
                "t bounds [{}, {}] must lie within [{T_MIN}, {T_MAX}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.nms_dice_threshold > 0.0 && self.nms_dice_threshold <= 1.0) {
            return Err(FitError::BadOptions(format!(
                "nms_dice_threshold {} outside (0, 1]",
                self.nms_dice_threshold
            )));
        }
        if self.max_iters == 0 {
            return Err(FitError::BadOptions("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fit outcome: the best iterate seen and its quality trail.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub components: ComponentSet,
    /// Assembly dice of the returned (best) iterate.
    pub final_dice: f64,
    /// Assembly dice of the initial set.
    pub initial_dice: f64,
    pub iterations_used: usize,
    /// Bounded per-component dice of the returned set against the target.
    pub per_component_score: Vec<f64>,
}

fn ensure_binary_target(target: &DensityGrid) -> Result<(), FitError> {
    if !target.is_binary() {
        return Err(FitError::TargetNotBinary);
    }
    Ok(())
}

/// Default coverage level for component bounding boxes.
pub const BBOX_COVERAGE: f64 = 0.5;
/// Padding in pixels around the coverage support.
const BBOX_PAD: usize = 2;

/// Tightest pixel rectangle containing every pixel where the component's
/// density reaches `coverage`, padded by 2 px and clipped to the grid.
pub fn component_bbox(
    c: &Component,
    p: &ProjectionParams,
    spec: &GridSpec,
    coverage: f64,
) -> Result<BBox, FitError> {
    assert!(
        coverage > 0.0 && coverage < 1.0,
        "coverage must lie in (0, 1)"
    );
    let range = support_pixel_range_for_level(c, p, spec, coverage);
    let mut found: Option<BBox> = None;
    if let Some((i0, i1, j0, j1)) = range {
        for j in j0..=j1 {
            for i in i0..=i1 {
                let (x, y) = spec.pixel_center(i, j);
                if component_density_at(c, p, x, y) >= coverage {
                    let b = found.get_or_insert(BBox {
                        xmin: i,
                        ymin: j,
                        xmax: i,
                        ymax: j,
                    });
                    b.xmin = b.xmin.min(i);
                    b.xmax = b.xmax.max(i);
                    b.ymin = b.ymin.min(j);
                    b.ymax = b.ymax.max(j);
                }
            }
        }
    }
    let Some(b) = found else {
        return Err(FitError::EmptyBBox {
            component: 0,
            coverage,
        });
    };
    Ok(BBox {
        xmin: b.xmin.saturating_sub(BBOX_PAD),
        ymin: b.ymin.saturating_sub(BBOX_PAD),
        xmax: (b.xmax + BBOX_PAD).min(spec.nx() - 1),
        ymax: (b.ymax + BBOX_PAD).min(spec.ny() - 1),
    })
}

/// Bounded per-component score: dice between the component's density and
/// the target restricted to the component's bounding box.
#[derive(Debug, Clone, Copy)]
pub struct ComponentScore {
    pub dice: f64,
    /// Set when the component had no support pixel and scored 0.
    pub empty_bbox: bool,
}

/// Fig.-14-style bounded reconstruction score: crop the target to the
/// component's bbox, evaluate the component density over the crop, and
/// return the dice of the two.
pub fn bounded_component_dice(
    c: &Component,
    target: &DensityGrid,
    p: &ProjectionParams,
) -> Result<ComponentScore, FitError> {
    ensure_binary_target(target)?;
    let spec = *target.spec();
    let bbox = match component_bbox(c, p, &spec, BBOX_COVERAGE) {
        Ok(b) => b,
        Err(FitError::EmptyBBox { .. }) => {
            return Ok(ComponentScore {
                dice: 0.0,
                empty_bbox: true,
            })
        }
        Err(e) => return Err(e),
    };
    let mut inter = 0.0;
    let mut sum = 0.0;
    for j in bbox.ymin..=bbox.ymax {
        for i in bbox.xmin..=bbox.xmax {
            let (x, y) = spec.pixel_center(i, j);
            let rho = component_density_at(c, p, x, y);
            let m = target.get(i, j);
            inter += rho * m;
            sum += rho + m;
        }
    }
    let dice = if sum == 0.0 { 1.0 } else { 2.0 * inter / sum };
    Ok(ComponentScore {
        dice,
        empty_bbox: false,
    })
}

/// Mean over components of `1 - bounded dice` (the per-image form of the
/// bounded reconstruction loss).
pub fn bounded_reconstruction_loss(
    s: &ComponentSet,
    target: &DensityGrid,
    p: &ProjectionParams,
) -> Result<f64, FitError> {
    if s.is_empty() {
        return Err(FitError::EmptyInit);
    }
    let mut acc = 0.0;
    for c in &s.components {
        acc += 1.0 - bounded_component_dice(c, target, p)?.dice;
    }
    Ok(acc / s.len() as f64)
}

/// Assembly dice objective: `loss = 1 - dice(render_set(s), target)` and
/// its gradient for every component, via the analytic dice cotangent
/// `d dice / d rho = 2 (mask S - I) / S^2`.
pub fn assembly_objective(
    s: &ComponentSet,
    target: &DensityGrid,
    p: &ProjectionParams,
) -> Result<(f64, Vec<[f64; 5]>), FitError> {
    ensure_binary_target(target)?;
    if s.is_empty() {
        return Err(FitError::EmptyInit);
    }
    let spec = *target.spec();
    if !s.domain.same_shape(&spec) {
        return Err(FitError::ShapeMismatch(
            spec.nx(),
            spec.ny(),
            s.domain.nx(),
            s.domain.ny(),
        ));
    }
    let field = render_set(s, p, &spec);
    let mut intersection = 0.0;
    let mut total = 0.0;
    for (&rho, &m) in field.values().iter().zip(target.values()) {
        intersection += rho * m;
        total += rho + m;
    }
    if total == 0.0 {
        return Ok((0.0, vec![[0.0; 5]; s.len()]));
    }
    let dice = 2.0 * intersection / total;
    let scale = 2.0 / (total * total);
    let cot: Vec<f64> = target
        .values()
        .iter()
        .map(|&m| scale * (m * total - intersection))
        .collect();
    let mut grads = grad_params(s, p, &spec, &cot)?;
    for g in &mut grads {
        for v in g.iter_mut() {
            *v = -*v;
        }
    }
    Ok((1.0 - dice, grads))
}

/// Adaptive-moment decay constants.
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First-order refinement of all component parameters against the target.
///
/// Adaptive per-parameter moments, per-step clamping (thickness to its
/// bounds, endpoints to the domain expanded 10% per side), best-iterate
/// return: `final_dice >= initial_dice` always holds. A step that would
/// collapse a component below the minimum length is reverted for that
/// component.
pub fn fit(
    target: &DensityGrid,
    init: &ComponentSet,
    p: &ProjectionParams,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    opts.validate()?;
    ensure_binary_target(target)?;
    if init.is_empty() {
        return Err(FitError::EmptyInit);
    }
    let spec = *target.spec();
    let (w, h) = (spec.width(), spec.height());
    let (x_lo, x_hi) = (-0.1 * w, 1.1 * w);
    let (y_lo, y_hi) = (-0.1 * h, 1.1 * h);
    // Step scale per parameter slot in physical units.
    let step_scale = [
        opts.learning_rate * w,
        opts.learning_rate * h,
        opts.learning_rate * w,
        opts.learning_rate * h,
        opts.learning_rate * (opts.t_max - opts.t_min),
    ];

    let n = init.len();
    let mut params: Vec<[f64; 5]> = init.components.iter().map(|c| c.params()).collect();
    let mut current = init.clone();
    let mut m = vec![[0.0; 5]; n];
    let mut v = vec![[0.0; 5]; n];

    let (init_loss, mut grads) = assembly_objective(&current, target, p)?;
    let initial_dice = 1.0 - init_loss;
    let mut best_dice = initial_dice;
    let mut best_params = params.clone();
    let mut stale = 0usize;
    let mut iterations_used = 0usize;

    for iter in 1..=opts.max_iters {
        iterations_used = iter;
        let b1 = 1.0 - ADAM_BETA1.powi(iter as i32);
        let b2 = 1.0 - ADAM_BETA2.powi(iter as i32);
        for ci in 0..n {
            let old = params[ci];
            for k in 0..5 {
                let g = grads[ci][k];
                m[ci][k] = ADAM_BETA1 * m[ci][k] + (1.0 - ADAM_BETA1) * g;
                v[ci][k] = ADAM_BETA2 * v[ci][k] + (1.0 - ADAM_BETA2) * g * g;
                let mhat = m[ci][k] / b1;
                let vhat = v[ci][k] / b2;
                params[ci][k] -= step_scale[k] * mhat / (vhat.sqrt() + ADAM_EPS);
            }
            params[ci][0] = params[ci][0].clamp(x_lo, x_hi);
            params[ci][2] = params[ci][2].clamp(x_lo, x_hi);
            params[ci][1] = params[ci][1].clamp(y_lo, y_hi);
            params[ci][3] = params[ci][3].clamp(y_lo, y_hi);
            params[ci][4] = params[ci][4].clamp(opts.t_min, opts.t_max);
            match Component::new(
                params[ci][0],
                params[ci][1],
                params[ci][2],
                params[ci][3],
                params[ci][4],
            ) {
                Ok(c) => current.components[ci] = c,
                Err(_) => {
                    // Degenerate after clamping: revert this component.
                    params[ci] = old;
                }
            }
        }

        let (loss, g) = assembly_objective(&current, target, p)?;
        grads = g;
        let dice = 1.0 - loss;
        if dice > best_dice + 1e-12 {
            best_dice = dice;
            best_params = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.early_stop_patience {
                break;
            }
        }
    }

    let components: Vec<Component> = best_params
        .iter()
        .map(|q| Component::new(q[0], q[1], q[2], q[3], q[4]))
        .collect::<Result<_, _>>()?;
    let best_set = ComponentSet::new(components, init.domain);
    let per_component_score = best_set
        .components
        .iter()
        .map(|c| bounded_component_dice(c, target, p).map(|s| s.dice))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FitResult {
        components: best_set,
        final_dice: best_dice,
        initial_dice,
        iterations_used,
        per_component_score,
    })
}

/// Binarized mask of one component over its bbox.
struct ComponentMask {
    bbox: Option<BBox>,
    pixels: Vec<bool>,
    count: usize,
}

fn component_mask(c: &Component, p: &ProjectionParams, spec: &GridSpec) -> ComponentMask {
    let Ok(bbox) = component_bbox(c, p, spec, 0.5) else {
        return ComponentMask {
            bbox: None,
            pixels: Vec::new(),
            count: 0,
        };
    };
    let mut pixels = Vec::with_capacity(bbox.area());
    let mut count = 0;
    for j in bbox.ymin..=bbox.ymax {
        for i in bbox.xmin..=bbox.xmax {
            let (x, y) = spec.pixel_center(i, j);
            let on = component_density_at(c, p, x, y) > 0.5;
            count += on as usize;
            pixels.push(on);
        }
    }
    ComponentMask {
        bbox: Some(bbox),
        pixels,
        count,
    }
}

fn mask_dice(a: &ComponentMask, b: &ComponentMask) -> f64 {
    if a.count == 0 && b.count == 0 {
        return 1.0;
    }
    let (Some(ba), Some(bb)) = (a.bbox, b.bbox) else {
        return if a.count == 0 && b.count == 0 { 1.0 } else { 0.0 };
    };
    let Some(inter) = ba.intersection(&bb) else {
        return 0.0;
    };
    let mut overlap = 0usize;
    for j in inter.ymin..=inter.ymax {
        for i in inter.xmin..=inter.xmax {
            let ka = (j - ba.ymin) * ba.width() + (i - ba.xmin);
            let kb = (j - bb.ymin) * bb.width() + (i - bb.xmin);
            if a.pixels[ka] && b.pixels[kb] {
                overlap += 1;
            }
        }
    }
    2.0 * overlap as f64 / (a.count + b.count) as f64
}

/// Score-ordered greedy suppression shared by the mask and bbox variants:
/// an index survives if it is not a duplicate of any higher-scored
/// survivor. Ties keep the lower index. Survivors return in input order.
fn greedy_nms(
    n: usize,
    scores: &[f64],
    mut duplicate: impl FnMut(usize, usize) -> bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for &idx in &order {
        if kept.iter().all(|&k| !duplicate(idx, k)) {
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    kept
}

/// Mask-based non-max suppression: binarized component masks are compared
/// pairwise and a pair whose mask dice exceeds the threshold keeps only
/// its higher-scored member.
pub fn mask_nms(
    s: &ComponentSet,
    scores: &[f64],
    p: &ProjectionParams,
    spec: &GridSpec,
    dice_threshold: f64,
) -> Result<ComponentSet, FitError> {
    if scores.len() != s.len() {
        return Err(FitError::ScoreLength {
            scores: scores.len(),
            components: s.len(),
        });
    }
    if !(dice_threshold > 0.0 && dice_threshold <= 1.0) {
        return Err(FitError::BadOptions(format!(
            "dice threshold {dice_threshold} outside (0, 1]"
        )));
    }
    let masks: Vec<ComponentMask> = s
        .components
        .iter()
        .map(|c| component_mask(c, p, spec))
        .collect();
    let kept = greedy_nms(s.len(), scores, |a, b| {
        mask_dice(&masks[a], &masks[b]) > dice_threshold
    });
    Ok(ComponentSet::new(
        kept.into_iter().map(|k| s.components[k]).collect(),
        s.domain,
    ))
}

/// Bounding-box IoU suppression (the baseline whose failure mode the mask
/// variant fixes: orthogonal equal-length bars share one bbox).
pub fn bbox_nms(
    s: &ComponentSet,
    scores: &[f64],
    p: &ProjectionParams,
    spec: &GridSpec,
    iou_threshold: f64,
) -> Result<ComponentSet, FitError> {
    if scores.len() != s.len() {
        return Err(FitError::ScoreLength {
            scores: scores.len(),
            components: s.len(),
        });
    }
    let boxes: Vec<Option<BBox>> = s
        .components
        .iter()
        .map(|c| component_bbox(c, p, spec, 0.5).ok())
        .collect();
    let kept = greedy_nms(s.len(), scores, |a, b| match (boxes[a], boxes[b]) {
        (Some(ba), Some(bb)) => ba.iou(&bb) > iou_threshold,
        _ => false,
    });
    Ok(ComponentSet::new(
        kept.into_iter().map(|k| s.components[k]).collect(),
        s.domain,
    ))
}

/// Binarized assembly dice of a set against the target; the probabilistic
/// union is not idempotent in its soft boundary band, so pruning measures
/// the thresholded raster (exact duplicates then cost nothing to remove).
pub fn raster_assembly_dice(
    s: &ComponentSet,
    target: &DensityGrid,
    p: &ProjectionParams,
) -> Result<f64, FitError> {
    let field = crate::raster::binarize(&render_set(s, p, target.spec()), 0.5)?;
    Ok(crate::raster::dice(&field, target)?)
}

/// Greedily drop components whose removal costs at most `tol` assembly
/// dice, visiting candidates in ascending bounded-score order.
pub fn prune(
    s: &ComponentSet,
    target: &DensityGrid,
    p: &ProjectionParams,
    tol: f64,
) -> Result<ComponentSet, FitError> {
    ensure_binary_target(target)?;
    if s.is_empty() {
        return Ok(s.clone());
    }
    let scores: Vec<f64> = s
        .components
        .iter()
        .map(|c| bounded_component_dice(c, target, p).map(|v| v.dice))
        .collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = (0..s.len()).collect();
    let mut current_dice = raster_assembly_dice(s, target, p)?;
    for &cand in &order {
        if kept.len() == 1 {
            break;
        }
        let trial: Vec<Component> = kept
            .iter()
            .filter(|&&k| k != cand)
            .map(|&k| s.components[k])
            .collect();
        let trial_set = ComponentSet::new(trial, s.domain);
        let trial_dice = raster_assembly_dice(&trial_set, target, p)?;
        if current_dice - trial_dice <= tol {
            kept.retain(|&k| k != cand);
            current_dice = trial_dice;
        }
    }
    Ok(ComponentSet::new(
        kept.into_iter().map(|k| s.components[k]).collect(),
        s.domain,
    ))
}
