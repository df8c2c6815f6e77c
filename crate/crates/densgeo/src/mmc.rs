//! Explicit geometry decoder for bar-shaped morphable components.
//!
//! A component is a straight bar given by two endpoints `A`, `B` and a
//! half-thickness `t`. Its material region is the hyperellipse
//!
//! ```text
//! phi(x1, y1) = 1 - ((|x1 / (L/2)| + eps)^6 + (|y1 / t| + eps)^6 + eps)^(1/6)
//! ```
//!
//! in bar-local coordinates `(x1, y1)`, projected to a density in `(0, 1)`
//! through the sigmoid `rho = 1 / (1 + exp(-(phi - alpha) / beta))`. The
//! `x1 / (L/2)` scaling puts the endpoints on the zero level set; the
//! literal `x1 / L` form (tips at `L` on either side of the centroid) is
//! available through [`ProjectionParams::literal_length`].
//!
//! Everything here is pure: rendering evaluates the field at pixel centers,
//! assemblies combine through the smooth union `1 - prod(1 - rho_i)`, and
//! [`grad_params`] provides closed-form derivatives of any pixel-weighted
//! sum of the union field with respect to the five component parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{DensityGrid, GridSpec, RasterError};

/// Component half-thickness bounds (physical units).
pub const T_MIN: f64 = 0.001;
pub const T_MAX: f64 = 0.2;
/// Endpoint pairs closer than this are rejected as degenerate.
pub const MIN_LENGTH: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate component: endpoint distance {length} < {MIN_LENGTH}")]
    Degenerate { length: f64 },
    #[error("thickness {t} outside [{T_MIN}, {T_MAX}]")]
    ThicknessOutOfBounds { t: f64 },
    #[error("non-finite component parameter {name} = {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("invalid projection params: {0}")]
    InvalidProjection(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Bar component: endpoints `A = (ax, ay)`, `B = (bx, by)` and
/// half-thickness `t`, all in physical domain units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent")]
pub struct Component {
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    t: f64,
}

#[derive(Deserialize)]
struct RawComponent {
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    t: f64,
}

impl TryFrom<RawComponent> for Component {
    type Error = GeometryError;
    fn try_from(raw: RawComponent) -> Result<Self, GeometryError> {
        Component::new(raw.ax, raw.ay, raw.bx, raw.by, raw.t)
    }
}

impl Component {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64, t: f64) -> Result<Self, GeometryError> {
        for (name, value) in [("ax", ax), ("ay", ay), ("bx", bx), ("by", by), ("t", t)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { name, value });
            }
        }
        if !(T_MIN..=T_MAX).contains(&t) {
            return Err(GeometryError::ThicknessOutOfBounds { t });
        }
        let length = (bx - ax).hypot(by - ay);
        if length < MIN_LENGTH {
            return Err(GeometryError::Degenerate { length });
        }
        Ok(Self { ax, ay, bx, by, t })
    }

    pub fn ax(&self) -> f64 {
        self.ax
    }
    pub fn ay(&self) -> f64 {
        self.ay
    }
    pub fn bx(&self) -> f64 {
        self.bx
    }
    pub fn by(&self) -> f64 {
        self.by
    }
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Parameters as `[ax, ay, bx, by, t]`.
    pub fn params(&self) -> [f64; 5] {
        [self.ax, self.ay, self.bx, self.by, self.t]
    }

    pub fn swapped(&self) -> Self {
        Self {
            ax: self.bx,
            ay: self.by,
            bx: self.ax,
            by: self.ay,
            t: self.t,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(self.ax + dx, self.ay + dy, self.bx + dx, self.by + dy, self.t)
    }

    fn sort_key(&self) -> [f64; 5] {
        self.params()
    }
}

/// Centroid, length and orientation derived from the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x0: f64,
    pub y0: f64,
    pub length: f64,
    /// Orientation in radians, `(-pi, pi]`, via two-argument arctangent.
    pub theta: f64,
}

/// Derive `(x0, y0, L, theta)` from a component's endpoints.
pub fn derive_pose(c: &Component) -> Pose {
    Pose {
        x0: 0.5 * (c.ax + c.bx),
        y0: 0.5 * (c.ay + c.by),
        length: (c.bx - c.ax).hypot(c.by - c.ay),
        theta: (c.by - c.ay).atan2(c.bx - c.ax),
    }
}

/// Level-set and projection constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProjectionParams")]
pub struct ProjectionParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Use the literal `x1 / L` axial scaling instead of `x1 / (L/2)`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub literal_length: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Deserialize)]
struct RawProjectionParams {
    epsilon: f64,
    alpha: f64,
    beta: f64,
    #[serde(default)]
    literal_length: bool,
}

impl TryFrom<RawProjectionParams> for ProjectionParams {
    type Error = GeometryError;
    fn try_from(raw: RawProjectionParams) -> Result<Self, GeometryError> {
        ProjectionParams::new(raw.epsilon, raw.alpha, raw.beta, raw.literal_length)
    }
}

impl ProjectionParams {
    pub fn new(
        epsilon: f64,
        alpha: f64,
        beta: f64,
        literal_length: bool,
    ) -> Result<Self, GeometryError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(GeometryError::InvalidProjection(format!(
                "epsilon must be finite and > 0, got {epsilon}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(GeometryError::InvalidProjection(format!(
                "beta must be finite and > 0, got {beta}"
            )));
        }
        if !alpha.is_finite() {
            return Err(GeometryError::InvalidProjection(format!(
                "alpha must be finite, got {alpha}"
            )));
        }
        Ok(Self {
            epsilon,
            alpha,
            beta,
            literal_length,
        })
    }

    fn axial_scale(&self) -> f64 {
        if self.literal_length {
            1.0
        } else {
            2.0
        }
    }
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            alpha: 0.0,
            beta: 0.01,
            literal_length: false,
        }
    }
}

/// Ordered list of components over a physical domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    pub components: Vec<Component>,
    pub domain: GridSpec,
}

impl ComponentSet {
    pub fn new(components: Vec<Component>, domain: GridSpec) -> Self {
        Self { components, domain }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// On-disk JSON form of a component set: domain, projection constants and
/// the component list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDoc {
    pub domain: GridSpec,
    pub projection: ProjectionParams,
    pub components: Vec<Component>,
}

impl GeometryDoc {
    pub fn new(set: &ComponentSet, projection: ProjectionParams) -> Self {
        Self {
            domain: set.domain,
            projection,
            components: set.components.clone(),
        }
    }

    pub fn component_set(&self) -> ComponentSet {
        ComponentSet::new(self.components.clone(), self.domain)
    }
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Geometry of a single component prepared for repeated evaluation.
struct Frame {
    x0: f64,
    y0: f64,
    cos_t: f64,
    sin_t: f64,
    half_len: f64,
    thickness: f64,
}

impl Frame {
    fn new(c: &Component, p: &ProjectionParams) -> Frame {
        let dx = c.bx - c.ax;
        let dy = c.by - c.ay;
        let length = dx.hypot(dy);
        Frame {
            x0: 0.5 * (c.ax + c.bx),
            y0: 0.5 * (c.ay + c.by),
            cos_t: dx / length,
            sin_t: dy / length,
            half_len: length / p.axial_scale(),
            thickness: c.t,
        }
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let xr = x - self.x0;
        let yr = y - self.y0;
        (
            self.cos_t * xr + self.sin_t * yr,
            -self.sin_t * xr + self.cos_t * yr,
        )
    }
}

/// Level-set value of a component at a physical point.
pub fn level_set_at(c: &Component, p: &ProjectionParams, x: f64, y: f64) -> f64 {
    let frame = Frame::new(c, p);
    let (x1, y1) = frame.local(x, y);
    phi_from_local(x1 / frame.half_len, y1 / frame.thickness, p.epsilon)
}

fn phi_from_local(u: f64, v: f64, epsilon: f64) -> f64 {
    let au = u.abs() + epsilon;
    let av = v.abs() + epsilon;
    let pw = au.powi(6) + av.powi(6) + epsilon;
    1.0 - pw.powf(1.0 / 6.0)
}

/// Density of a single component at a physical point (Eqs. for the
/// level set followed by the sigmoid projection).
pub fn component_density_at(c: &Component, p: &ProjectionParams, x: f64, y: f64) -> f64 {
    stable_sigmoid((level_set_at(c, p, x, y) - p.alpha) / p.beta)
}

/// Pixel-index rectangle (inclusive) that conservatively contains every
/// pixel where the component's density can exceed `delta`. `None` when the
/// support does not intersect the grid.
pub(crate) fn support_pixel_range(
    c: &Component,
    p: &ProjectionParams,
    spec: &GridSpec,
    delta: f64,
) -> Option<(usize, usize, usize, usize)> {
    let frame = Frame::new(c, p);
    // rho > delta requires phi > alpha + beta * logit(delta), i.e.
    // pw^(1/6) < r; outside |u| <= r and |v| <= r this is impossible.
    let r = 1.0 - p.alpha - p.beta * (delta / (1.0 - delta)).ln();
    if r <= 0.0 {
        return Some((0, spec.nx() - 1, 0, spec.ny() - 1));
    }
    let ax_half = r * frame.half_len;
    let tr_half = r * frame.thickness;
    let ex = ax_half * frame.cos_t.abs() + tr_half * frame.sin_t.abs();
    let ey = ax_half * frame.sin_t.abs() + tr_half * frame.cos_t.abs();
    let (xmin, xmax) = (frame.x0 - ex, frame.x0 + ex);
    let (ymin, ymax) = (frame.y0 - ey, frame.y0 + ey);
    if xmax < 0.0 || xmin > spec.width() || ymax < 0.0 || ymin > spec.height() {
        return None;
    }
    // Physical y decreases with row index, so ymax maps to the top row.
    let (i0, _) = spec.pixel_at(xmin, ymax);
    let (i1, _) = spec.pixel_at(xmax, ymax);
    let (_, j0) = spec.pixel_at(xmin, ymax);
    let (_, j1) = spec.pixel_at(xmin, ymin);
    Some((i0, i1, j0, j1))
}

const CULL_DELTA: f64 = 1e-16;

/// Conservative support range for pixels that can reach density `level`.
pub(crate) fn support_pixel_range_for_level(
    c: &Component,
    p: &ProjectionParams,
    spec: &GridSpec,
    level: f64,
) -> Option<(usize, usize, usize, usize)> {
    support_pixel_range(c, p, spec, (level * 0.999).clamp(1e-300, 0.999_999))
}

/// Render one component: grid value at each pixel is
/// [`component_density_at`] evaluated at the pixel center.
pub fn render_component(c: &Component, p: &ProjectionParams, spec: &GridSpec) -> DensityGrid {
    let frame = Frame::new(c, p);
    DensityGrid::from_fn(*spec, |x, y| {
        let (x1, y1) = frame.local(x, y);
        let phi = phi_from_local(x1 / frame.half_len, y1 / frame.thickness, p.epsilon);
        stable_sigmoid((phi - p.alpha) / p.beta)
    })
    .expect("sigmoid output lies in [0, 1]")
}

/// Pointwise smooth union `1 - prod(1 - rho_i)`. Empty input gives zeros.
pub fn combine_union(fields: &[DensityGrid]) -> Result<DensityGrid, RasterError> {
    let Some(first) = fields.first() else {
        return Err(RasterError::InvalidSpec(
            "combine_union of an empty list has no shape; use combine_union_with".into(),
        ));
    };
    combine_union_with(*first.spec(), fields)
}

/// [`combine_union`] with an explicit output shape so the empty list is
/// well-defined (all zeros).
pub fn combine_union_with(
    spec: GridSpec,
    fields: &[DensityGrid],
) -> Result<DensityGrid, RasterError> {
    let mut out = DensityGrid::zeros(spec);
    for field in fields {
        if !field.spec().same_shape(&spec) {
            return Err(RasterError::ShapeMismatch(
                spec.nx(),
                spec.ny(),
                field.spec().nx(),
                field.spec().ny(),
            ));
        }
        let acc = out.values_mut();
        for (a, &r) in acc.iter_mut().zip(field.values()) {
            *a += (1.0 - *a) * r;
        }
    }
    Ok(out)
}

/// Render an assembly: the smooth union of the per-component renders.
///
/// Components are folded in a canonical parameter order so the output is
/// independent of list order.
pub fn render_set(s: &ComponentSet, p: &ProjectionParams, spec: &GridSpec) -> DensityGrid {
    let mut order: Vec<usize> = (0..s.components.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (s.components[a].sort_key(), s.components[b].sort_key());
        ka.iter()
            .zip(kb.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = DensityGrid::zeros(*spec);
    for &idx in &order {
        let c = &s.components[idx];
        let Some((i0, i1, j0, j1)) = support_pixel_range(c, p, spec, CULL_DELTA) else {
            continue;
        };
        let frame = Frame::new(c, p);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let (x, y) = spec.pixel_center(i, j);
                let (x1, y1) = frame.local(x, y);
                let phi = phi_from_local(x1 / frame.half_len, y1 / frame.thickness, p.epsilon);
                let rho = stable_sigmoid((phi - p.alpha) / p.beta);
                let k = spec.index(i, j);
                let acc = &mut out.values_mut()[k];
                *acc += (1.0 - *acc) * rho;
            }
        }
    }
    out
}

/// Number of grid pixels where the component's density exceeds the 0.5
/// binarization threshold.
pub fn binarized_support_pixels(c: &Component, p: &ProjectionParams, spec: &GridSpec) -> usize {
    let Some((i0, i1, j0, j1)) = support_pixel_range(c, p, spec, CULL_DELTA) else {
        return 0;
    };
    let frame = Frame::new(c, p);
    let mut count = 0;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let (x, y) = spec.pixel_center(i, j);
            let (x1, y1) = frame.local(x, y);
            let phi = phi_from_local(x1 / frame.half_len, y1 / frame.thickness, p.epsilon);
            if stable_sigmoid((phi - p.alpha) / p.beta) > 0.5 {
                count += 1;
            }
        }
    }
    count
}

/// Density and its five parameter partials at one point.
fn density_and_partials(c: &Component, p: &ProjectionParams, x: f64, y: f64) -> (f64, [f64; 5]) {
    let dx = c.bx - c.ax;
    let dy = c.by - c.ay;
    let l2 = dx * dx + dy * dy;
    let l = l2.sqrt();
    let l3 = l2 * l;
    let ct = dx / l;
    let st = dy / l;
    let xr = x - 0.5 * (c.ax + c.bx);
    let yr = y - 0.5 * (c.ay + c.by);
    let x1 = ct * xr + st * yr;
    let y1 = -st * xr + ct * yr;
    let scale = p.axial_scale();
    let u = scale * x1 / l;
    let v = y1 / c.t;

    let au = u.abs() + p.epsilon;
    let av = v.abs() + p.epsilon;
    let pw = au.powi(6) + av.powi(6) + p.epsilon;
    let phi = 1.0 - pw.powf(1.0 / 6.0);
    let rho = stable_sigmoid((phi - p.alpha) / p.beta);

    let srho = rho * (1.0 - rho);
    if srho == 0.0 {
        // Saturated sigmoid: all partials vanish.
        return (rho, [0.0; 5]);
    }

    let pw_m56 = pw.powf(-5.0 / 6.0);
    let dphi_du = -pw_m56 * au.powi(5) * u.signum();
    let dphi_dv = -pw_m56 * av.powi(5) * v.signum();
    let drho_du = srho / p.beta * dphi_du;
    let drho_dv = srho / p.beta * dphi_dv;

    // Partials of intermediate quantities w.r.t. (ax, ay, bx, by).
    let dl = [-dx / l, -dy / l, dx / l, dy / l];
    let dct = [-dy * dy / l3, dx * dy / l3, dy * dy / l3, -dx * dy / l3];
    let dst = [dx * dy / l3, -dx * dx / l3, -dx * dy / l3, dx * dx / l3];
    let dxr = [-0.5, 0.0, -0.5, 0.0];
    let dyr = [0.0, -0.5, 0.0, -0.5];

    let mut grad = [0.0; 5];
    for k in 0..4 {
        let dx1 = dct[k] * xr + dst[k] * yr + ct * dxr[k] + st * dyr[k];
        let dy1 = -dst[k] * xr + dct[k] * yr - st * dxr[k] + ct * dyr[k];
        let du = scale * (dx1 * l - x1 * dl[k]) / l2;
        let dv = dy1 / c.t;
        grad[k] = drho_du * du + drho_dv * dv;
    }
    grad[4] = drho_dv * (-y1 / (c.t * c.t));
    (rho, grad)
}

/// Gradient of `sum_pixels cotangent * rho_union` with respect to every
/// component's `[ax, ay, bx, by, t]`, by the chain rule through the
/// level set, the sigmoid projection and the smooth union.
///
/// The cotangent is one weight per pixel (row-major, unconstrained sign).
pub fn grad_params(
    s: &ComponentSet,
    p: &ProjectionParams,
    spec: &GridSpec,
    cotangent: &[f64],
) -> Result<Vec<[f64; 5]>, RasterError> {
    if cotangent.len() != spec.len() {
        return Err(RasterError::ValueCount {
            nx: spec.nx(),
            ny: spec.ny(),
            expected: spec.len(),
            got: cotangent.len(),
        });
    }
    let n = s.components.len();
    let mut grads = vec![[0.0; 5]; n];
    if n == 0 {
        return Ok(grads);
    }

    // Per-component support ranges and cached densities over those ranges.
    let ranges: Vec<Option<(usize, usize, usize, usize)>> = s
        .components
        .iter()
        .map(|c| support_pixel_range(c, p, spec, CULL_DELTA))
        .collect();
    let fields: Vec<Vec<f64>> = s
        .components
        .iter()
        .zip(&ranges)
        .map(|(c, range)| {
            let Some((i0, i1, j0, j1)) = *range else {
                return Vec::new();
            };
            let frame = Frame::new(c, p);
            let mut vals = Vec::with_capacity((i1 - i0 + 1) * (j1 - j0 + 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let (x, y) = spec.pixel_center(i, j);
                    let (x1, y1) = frame.local(x, y);
                    let phi =
                        phi_from_local(x1 / frame.half_len, y1 / frame.thickness, p.epsilon);
                    vals.push(stable_sigmoid((phi - p.alpha) / p.beta));
                }
            }
            vals
        })
        .collect();

    let rho_at = |comp: usize, i: usize, j: usize| -> f64 {
        match ranges[comp] {
            Some((i0, i1, j0, j1)) if i >= i0 && i <= i1 && j >= j0 && j <= j1 => {
                fields[comp][(j - j0) * (i1 - i0 + 1) + (i - i0)]
            }
            _ => 0.0,
        }
    };

    for (ci, c) in s.components.iter().enumerate() {
        let Some((i0, i1, j0, j1)) = ranges[ci] else {
            continue;
        };
        let g = &mut grads[ci];
        for j in j0..=j1 {
            for i in i0..=i1 {
                let cot = cotangent[spec.index(i, j)];
                if cot == 0.0 {
                    continue;
                }
                let (x, y) = spec.pixel_center(i, j);
                let (_, partials) = density_and_partials(c, p, x, y);
                if partials == [0.0; 5] {
                    continue;
                }
                // d(rho_union)/d(rho_ci) = prod over other components of (1 - rho).
                let mut weight = 1.0;
                for other in 0..s.components.len() {
                    if other != ci {
                        weight *= 1.0 - rho_at(other, i, j);
                    }
                }
                let w = cot * weight;
                for k in 0..5 {
                    g[k] += w * partials[k];
                }
            }
        }
    }
    Ok(grads)
}
