//! Skeletonization baseline: binary thinning, skeleton graph extraction,
//! exact Euclidean distance transform, per-branch thickness estimation and
//! conversion of branches to parametric bar components.
//!
//! The thickness estimator samples equally spaced points along each branch
//! polyline, reads twice the largest distance-transform value in the 3x3
//! neighborhood of each sample as a diameter, averages the diameters per
//! branch, and floors every branch at the 5th percentile of all branch
//! thicknesses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mmc::{Component, ComponentSet, GeometryError, T_MAX, T_MIN};
use crate::raster::{DensityGrid, GridSpec};

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("input grid is not binary (value {value} at index {index})")]
    NotBinary { index: usize, value: f64 },
    #[error("branch thicknesses not estimated (have {have}, need {need})")]
    ThicknessesMissing { have: usize, need: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn ensure_binary(grid: &DensityGrid) -> Result<(), SkeletonError> {
    for (index, &value) in grid.values().iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(SkeletonError::NotBinary { index, value });
        }
    }
    Ok(())
}

/// Pixel coordinates `(column, row)`, row 0 at the top.
pub type Pixel = (usize, usize);

/// Skeleton graph node: a clustered set of junction pixels or a single
/// endpoint / isolated pixel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonNode {
    /// Representative pixel (cluster member nearest the cluster centroid).
    pub pixel: Pixel,
    /// All pixels belonging to this node.
    pub pixels: Vec<Pixel>,
    /// Skeleton-neighbor count of the representative pixel.
    pub degree: usize,
}

/// A maximal path of interior pixels between two nodes. The polyline
/// includes the node-side attachment pixels at both ends.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub polyline: Vec<Pixel>,
    pub node_a: usize,
    pub node_b: usize,
}

impl Branch {
    /// Arc length of the polyline in pixels.
    pub fn arc_length(&self) -> f64 {
        self.polyline
            .windows(2)
            .map(|w| {
                let (x0, y0) = (w[0].0 as f64, w[0].1 as f64);
                let (x1, y1) = (w[1].0 as f64, w[1].1 as f64);
                (x1 - x0).hypot(y1 - y0)
            })
            .sum()
    }
}

/// Pixel skeleton with its branch/junction graph and per-branch thicknesses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Skeleton {
    pub spec: GridSpec,
    pub pixels: Vec<Pixel>,
    pub nodes: Vec<SkeletonNode>,
    pub branches: Vec<Branch>,
    /// Per-branch thickness in pixels; empty until estimated.
    pub thicknesses: Vec<f64>,
}

impl Skeleton {
    pub fn has_thicknesses(&self) -> bool {
        self.thicknesses.len() == self.branches.len()
    }

    fn require_thicknesses(&self) -> Result<(), SkeletonError> {
        if self.has_thicknesses() {
            Ok(())
        } else {
            Err(SkeletonError::ThicknessesMissing {
                have: self.thicknesses.len(),
                need: self.branches.len(),
            })
        }
    }
}

/// Per-pixel Euclidean distance (in pixels) to the nearest void pixel.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub spec: GridSpec,
    pub dist: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[self.spec.index(i, j)]
    }
}

struct Bits {
    nx: usize,
    ny: usize,
    on: Vec<bool>,
}

impl Bits {
    fn from_grid(grid: &DensityGrid) -> Self {
        Self {
            nx: grid.spec().nx(),
            ny: grid.spec().ny(),
            on: grid.values().iter().map(|&v| v == 1.0).collect(),
        }
    }

    fn get(&self, i: isize, j: isize) -> bool {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            false
        } else {
            self.on[j as usize * self.nx + i as usize]
        }
    }

    /// 8-neighborhood in the circular order N, NE, E, SE, S, SW, W, NW.
    fn ring(&self, i: isize, j: isize) -> [bool; 8] {
        [
            self.get(i, j - 1),
            self.get(i + 1, j - 1),
            self.get(i + 1, j),
            self.get(i + 1, j + 1),
            self.get(i, j + 1),
            self.get(i - 1, j + 1),
            self.get(i - 1, j),
            self.get(i - 1, j - 1),
        ]
    }
}

const NBR8: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// 8-connected component labels of the set pixels; returns labels indexed
/// like the grid (usize::MAX for background) and the component count.
fn components8(nx: usize, ny: usize, on: &[bool]) -> (Vec<usize>, usize) {
    let mut labels = vec![usize::MAX; nx * ny];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..nx * ny {
        if !on[start] || labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = ((k % nx) as isize, (k / nx) as isize);
            for (di, dj) in NBR8 {
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni as usize >= nx || nj as usize >= ny {
                    continue;
                }
                let nk = nj as usize * nx + ni as usize;
                if on[nk] && labels[nk] == usize::MAX {
                    labels[nk] = count;
                    stack.push(nk);
                }
            }
        }
        count += 1;
    }
    (labels, count)
}

/// Zhang-Suen iterative thinning to a 1-pixel-wide, 8-connected skeleton.
///
/// The parallel deletion rule can erase a small blob entirely (a solid 2x2
/// block dies in one subiteration); any input component left without a
/// skeleton pixel gets one representative pixel restored so the number of
/// 8-connected components is preserved.
pub fn thin(binary: &DensityGrid) -> Result<Vec<Pixel>, SkeletonError> {
    ensure_binary(binary)?;
    let mut bits = Bits::from_grid(binary);
    let (nx, ny) = (bits.nx, bits.ny);
    let (input_labels, n_components) = components8(nx, ny, &bits.on);

    let mut to_delete: Vec<usize> = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            to_delete.clear();
            for j in 0..ny as isize {
                for i in 0..nx as isize {
                    if !bits.get(i, j) {
                        continue;
                    }
                    let ring = bits.ring(i, j);
                    let b: usize = ring.iter().map(|&v| v as usize).sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8)
                        .filter(|&k| !ring[k] && ring[(k + 1) % 8])
                        .count();
                    if a != 1 {
                        continue;
                    }
                    // ring indices: 0 = N (P2), 2 = E (P4), 4 = S (P6), 6 = W (P8)
                    let (n, e, s, w) = (ring[0], ring[2], ring[4], ring[6]);
                    let ok = if pass == 0 {
                        !(n && e && s) && !(e && s && w)
                    } else {
                        !(n && e && w) && !(n && s && w)
                    };
                    if ok {
                        to_delete.push(j as usize * nx + i as usize);
                    }
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                for &k in &to_delete {
                    bits.on[k] = false;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Restore one pixel for any component the parallel deletion wiped out.
    let mut survivor = vec![false; n_components];
    for k in 0..nx * ny {
        if bits.on[k] {
            survivor[input_labels[k]] = true;
        }
    }
    if survivor.iter().any(|&s| !s) {
        // Pick, per dead component, the member pixel nearest its centroid.
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); n_components];
        for k in 0..nx * ny {
            if input_labels[k] != usize::MAX {
                let c = input_labels[k];
                sums[c].0 += (k % nx) as f64;
                sums[c].1 += (k / nx) as f64;
                sums[c].2 += 1;
            }
        }
        let mut best: Vec<Option<(f64, usize)>> = vec![None; n_components];
        for k in 0..nx * ny {
            let c = input_labels[k];
            if c == usize::MAX || survivor[c] {
                continue;
            }
            let (sx, sy, n) = sums[c];
            let (cx, cy) = (sx / n as f64, sy / n as f64);
            let d = ((k % nx) as f64 - cx).powi(2) + ((k / nx) as f64 - cy).powi(2);
            if best[c].map_or(true, |(bd, _)| d < bd) {
                best[c] = Some((d, k));
            }
        }
        for b in best.into_iter().flatten() {
            bits.on[b.1] = true;
        }
    }

    let mut pixels = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if bits.on[j * nx + i] {
                pixels.push((i, j));
            }
        }
    }
    Ok(pixels)
}

/// Exact Euclidean distance transform (pixel-center metric) to the nearest
/// void pixel, via the two-pass lower-envelope algorithm on squared
/// distances.
pub fn distance_transform(binary: &DensityGrid) -> Result<DistanceField, SkeletonError> {
    ensure_binary(binary)?;
    let spec = *binary.spec();
    let (nx, ny) = (spec.nx(), spec.ny());
    const INF: f64 = 1e20;

    // Column pass: squared distance to nearest void in the same column.
    let mut col = vec![INF; nx * ny];
    for i in 0..nx {
        let f: Vec<f64> = (0..ny)
            .map(|j| if binary.get(i, j) == 0.0 { 0.0 } else { INF })
            .collect();
        let d = dt_1d(&f);
        for j in 0..ny {
            col[j * nx + i] = d[j];
        }
    }
    // Row pass over the column results.
    let mut dist = vec![0.0; nx * ny];
    for j in 0..ny {
        let f: Vec<f64> = (0..nx).map(|i| col[j * nx + i]).collect();
        let d = dt_1d(&f);
        for i in 0..nx {
            dist[j * nx + i] = d[i].sqrt();
        }
    }
    Ok(DistanceField { spec, dist })
}

/// 1D squared-distance transform of a sampled function (lower envelope of
/// parabolas).
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
    d
}

/// Junction clustering radius in pixels.
const CLUSTER_RADIUS: f64 = 2.0;
/// Branches with fewer polyline pixels than this are dropped.
const MIN_BRANCH_PIXELS: usize = 3;

/// Build the branch/node graph of a thin skeleton.
///
/// Pixels are classified by 8-neighbor count (1 endpoint, 2 interior,
/// >= 3 junction); junction pixels within [`CLUSTER_RADIUS`] merge into one
/// node; maximal interior paths between nodes become branches.
pub fn extract_graph(spec: GridSpec, pixels: &[Pixel]) -> Skeleton {
    let (nx, ny) = (spec.nx(), spec.ny());
    let mut on = vec![false; nx * ny];
    for &(i, j) in pixels {
        on[j * nx + i] = true;
    }
    let neighbors = |(i, j): Pixel| -> Vec<Pixel> {
        NBR8.iter()
            .filter_map(|&(di, dj)| {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni >= 0
                    && nj >= 0
                    && (ni as usize) < nx
                    && (nj as usize) < ny
                    && on[nj as usize * nx + ni as usize]
                {
                    Some((ni as usize, nj as usize))
                } else {
                    None
                }
            })
            .collect()
    };

    let degree_of = |p: Pixel| neighbors(p).len();

    // Node pixels: endpoints (degree 1), isolated pixels (degree 0) and
    // junction pixels (degree >= 3).
    let mut node_of_pixel: Vec<usize> = vec![usize::MAX; nx * ny];
    let mut junctions: Vec<Pixel> = Vec::new();
    let mut singles: Vec<Pixel> = Vec::new();
    for &p in pixels {
        match degree_of(p) {
            0 | 1 => singles.push(p),
            2 => {}
            _ => junctions.push(p),
        }
    }

    // Union-find clustering of junction pixels within the radius.
    let mut parent: Vec<usize> = (0..junctions.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for a in 0..junctions.len() {
        for b in a + 1..junctions.len() {
            let (pa, pb) = (junctions[a], junctions[b]);
            let d2 = (pa.0 as f64 - pb.0 as f64).powi(2) + (pa.1 as f64 - pb.1 as f64).powi(2);
            if d2 <= CLUSTER_RADIUS * CLUSTER_RADIUS {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[rb] = ra;
                }
            }
        }
    }

    let mut nodes: Vec<SkeletonNode> = Vec::new();
    let mut cluster_node: std::collections::BTreeMap<usize, usize> = Default::default();
    for idx in 0..junctions.len() {
        let root = find(&mut parent, idx);
        let node_id = *cluster_node.entry(root).or_insert_with(|| {
            nodes.push(SkeletonNode {
                pixel: junctions[idx],
                pixels: Vec::new(),
                degree: 0,
            });
            nodes.len() - 1
        });
        nodes[node_id].pixels.push(junctions[idx]);
        node_of_pixel[junctions[idx].1 * nx + junctions[idx].0] = node_id;
    }
    // Representative pixel: cluster member nearest the centroid.
    for node in &mut nodes {
        let n = node.pixels.len() as f64;
        let cx = node.pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = node.pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        node.pixel = *node
            .pixels
            .iter()
            .min_by(|a, b| {
                let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
                let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
                da.total_cmp(&db).then(a.cmp(b))
            })
            .unwrap();
        node.degree = degree_of(node.pixel);
    }
    for p in singles {
        nodes.push(SkeletonNode {
            pixel: p,
            pixels: vec![p],
            degree: degree_of(p),
        });
        node_of_pixel[p.1 * nx + p.0] = nodes.len() - 1;
    }

    // Trace branches: from each node pixel, walk through interior pixels
    // until another node pixel is reached.
    let mut visited = vec![false; nx * ny];
    let mut branches: Vec<Branch> = Vec::new();
    let node_starts: Vec<Pixel> = nodes.iter().flat_map(|n| n.pixels.clone()).collect();
    for &start in &node_starts {
        for step in neighbors(start) {
            let step_id = node_of_pixel[step.1 * nx + step.0];
            if step_id != usize::MAX {
                continue; // node-node adjacency: shorter than 3 px, dropped
            }
            if visited[step.1 * nx + step.0] {
                continue;
            }
            let mut polyline = vec![start, step];
            visited[step.1 * nx + step.0] = true;
            let mut prev = start;
            let mut cur = step;
            let end_node;
            loop {
                let nexts: Vec<Pixel> = neighbors(cur)
                    .into_iter()
                    .filter(|&q| q != prev)
                    .collect();
                // Prefer an unvisited interior continuation, else a node.
                let node_next = nexts
                    .iter()
                    .copied()
                    .find(|&q| node_of_pixel[q.1 * nx + q.0] != usize::MAX);
                let interior_next = nexts.iter().copied().find(|&q| {
                    node_of_pixel[q.1 * nx + q.0] == usize::MAX && !visited[q.1 * nx + q.0]
                });
                if let Some(q) = interior_next {
                    visited[q.1 * nx + q.0] = true;
                    polyline.push(q);
                    prev = cur;
                    cur = q;
                } else if let Some(q) = node_next {
                    polyline.push(q);
                    end_node = node_of_pixel[q.1 * nx + q.0];
                    break;
                } else {
                    // Dead end among visited pixels (tight cycle back onto
                    // the branch); close at the current pixel.
                    end_node = usize::MAX;
                    break;
                }
            }
            let start_node = node_of_pixel[start.1 * nx + start.0];
            if polyline.len() >= MIN_BRANCH_PIXELS {
                branches.push(Branch {
                    polyline,
                    node_a: start_node,
                    node_b: if end_node == usize::MAX {
                        start_node
                    } else {
                        end_node
                    },
                });
            }
        }
    }

    // Pure cycles have no node pixel; start each at its first pixel in
    // scan order, which becomes a synthetic degree-2 node.
    for &p in pixels {
        let k = p.1 * nx + p.0;
        if node_of_pixel[k] != usize::MAX || visited[k] {
            continue;
        }
        if degree_of(p) != 2 {
            continue;
        }
        let node_id = nodes.len();
        nodes.push(SkeletonNode {
            pixel: p,
            pixels: vec![p],
            degree: 2,
        });
        node_of_pixel[k] = node_id;
        let nbrs = neighbors(p);
        let mut polyline = vec![p];
        visited[k] = true;
        let mut prev = p;
        let mut cur = nbrs[0];
        loop {
            polyline.push(cur);
            if cur == p {
                break;
            }
            visited[cur.1 * nx + cur.0] = true;
            let next = neighbors(cur).into_iter().find(|&q| q != prev && (q == p || !visited[q.1 * nx + q.0]));
            match next {
                Some(q) => {
                    prev = cur;
                    cur = q;
                }
                None => break,
            }
        }
        if polyline.len() >= MIN_BRANCH_PIXELS {
            branches.push(Branch {
                polyline,
                node_a: node_id,
                node_b: node_id,
            });
        }
    }

    Skeleton {
        spec,
        pixels: pixels.to_vec(),
        nodes,
        branches,
        thicknesses: Vec::new(),
    }
}

/// Convenience: thin + graph extraction in one step.
pub fn skeletonize(binary: &DensityGrid) -> Result<Skeleton, SkeletonError> {
    let pixels = thin(binary)?;
    Ok(extract_graph(*binary.spec(), &pixels))
}

/// Linear-interpolation percentile of `values` (between order statistics).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Point at arc-length fraction `s` along a pixel polyline, snapped to the
/// nearest pixel.
fn polyline_point_at(polyline: &[Pixel], s: f64) -> Pixel {
    if polyline.len() == 1 {
        return polyline[0];
    }
    let total: f64 = polyline
        .windows(2)
        .map(|w| (w[1].0 as f64 - w[0].0 as f64).hypot(w[1].1 as f64 - w[0].1 as f64))
        .sum();
    let target = s.clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    for w in polyline.windows(2) {
        let seg = (w[1].0 as f64 - w[0].0 as f64).hypot(w[1].1 as f64 - w[0].1 as f64);
        if acc + seg >= target || seg == 0.0 {
            let f = if seg > 0.0 { (target - acc) / seg } else { 0.0 };
            let x = w[0].0 as f64 + f * (w[1].0 as f64 - w[0].0 as f64);
            let y = w[0].1 as f64 + f * (w[1].1 as f64 - w[0].1 as f64);
            return (x.round() as usize, y.round() as usize);
        }
        acc += seg;
    }
    *polyline.last().unwrap()
}

/// Default number of sample points per branch.
pub const DEFAULT_THICKNESS_POINTS: usize = 10;

/// Estimate a constant thickness (in pixels) per branch.
///
/// For each of `num_points` equally spaced polyline samples (endpoints
/// included) the diameter is twice the maximum distance-transform value in
/// the sample's 3x3 neighborhood; the branch thickness is the mean diameter,
/// floored at the 5th percentile of all branch thicknesses.
pub fn estimate_branch_thickness(
    skel: &Skeleton,
    dist: &DistanceField,
    num_points: usize,
) -> Vec<f64> {
    assert!(num_points >= 1, "num_points must be >= 1");
    let (nx, ny) = (skel.spec.nx(), skel.spec.ny());
    let mut raw = Vec::with_capacity(skel.branches.len());
    for branch in &skel.branches {
        let mut sum = 0.0;
        for k in 0..num_points {
            let s = if num_points == 1 {
                0.5
            } else {
                k as f64 / (num_points - 1) as f64
            };
            let (pi, pj) = polyline_point_at(&branch.polyline, s);
            let mut best = 0.0f64;
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    let (qi, qj) = (pi as isize + di, pj as isize + dj);
                    if qi >= 0 && qj >= 0 && (qi as usize) < nx && (qj as usize) < ny {
                        best = best.max(dist.get(qi as usize, qj as usize));
                    }
                }
            }
            sum += 2.0 * best;
        }
        raw.push(sum / num_points as f64);
    }
    if raw.is_empty() {
        return raw;
    }
    let floor = percentile(&raw, 5.0);
    raw.into_iter().map(|t| t.max(floor)).collect()
}

/// Map each branch to a bar component: endpoints at the polyline's first
/// and last pixel centers, half-thickness from the estimated branch
/// thickness, everything converted to physical units.
///
/// Closed branches (coincident polyline ends, e.g. a traced ring) cannot be
/// a single straight bar; they are split at arc midpoint into two chords.
/// Branches still degenerate after splitting are skipped.
pub fn skeleton_to_components(skel: &Skeleton) -> Result<ComponentSet, SkeletonError> {
    skel.require_thicknesses()?;
    let spec = skel.spec;
    // Non-square pixels get the mean pitch; grids here are near-square.
    let pitch = 0.5 * (spec.pitch_x() + spec.pitch_y());
    let mut components = Vec::new();

    fn chord_to_component(
        polyline: &[Pixel],
        spec: &GridSpec,
        t_phys: f64,
    ) -> Option<Component> {
        let (first, last) = (polyline.first()?, polyline.last()?);
        let a = spec.pixel_center(first.0, first.1);
        let b = spec.pixel_center(last.0, last.1);
        Component::new(a.0, a.1, b.0, b.1, t_phys.clamp(T_MIN, T_MAX)).ok()
    }

    for (branch, &thickness) in skel.branches.iter().zip(&skel.thicknesses) {
        let t_phys = 0.5 * thickness * pitch;
        if let Some(c) = chord_to_component(&branch.polyline, &spec, t_phys) {
            components.push(c);
            continue;
        }
        let n = branch.polyline.len();
        if n >= 4 {
            let mid = n / 2;
            for half in [&branch.polyline[..=mid], &branch.polyline[mid..]] {
                if let Some(c) = chord_to_component(half, &spec, t_phys) {
                    components.push(c);
                }
            }
        }
    }
    Ok(ComponentSet::new(components, spec))
}

/// Rasterize every branch polyline as a stroked path (round caps) of its
/// estimated thickness. Output is binary.
pub fn render_skeleton_reconstruction(
    skel: &Skeleton,
    spec: &GridSpec,
) -> Result<DensityGrid, SkeletonError> {
    skel.require_thicknesses()?;
    let (nx, ny) = (spec.nx(), spec.ny());
    let mut on = vec![0.0; nx * ny];
    // Branch polylines are in skeleton pixel coordinates; scale to the
    // output raster when shapes differ.
    let sx = nx as f64 / skel.spec.nx() as f64;
    let sy = ny as f64 / skel.spec.ny() as f64;
    for (branch, &thickness) in skel.branches.iter().zip(&skel.thicknesses) {
        let radius = 0.5 * thickness * 0.5 * (sx + sy);
        let pts: Vec<(f64, f64)> = branch
            .polyline
            .iter()
            .map(|&(i, j)| ((i as f64 + 0.5) * sx, (j as f64 + 0.5) * sy))
            .collect();
        let pad = radius + 1.0;
        let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - pad;
        let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + pad;
        let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - pad;
        let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + pad;
        let i0 = xmin.floor().max(0.0) as usize;
        let i1 = (xmax.ceil() as usize).min(nx.saturating_sub(1));
        let j0 = ymin.floor().max(0.0) as usize;
        let j1 = (ymax.ceil() as usize).min(ny.saturating_sub(1));
        for j in j0..=j1 {
            for i in i0..=i1 {
                if on[j * nx + i] == 1.0 {
                    continue;
                }
                let p = (i as f64 + 0.5, j as f64 + 0.5);
                let mut d2 = f64::INFINITY;
                if pts.len() == 1 {
                    d2 = (p.0 - pts[0].0).powi(2) + (p.1 - pts[0].1).powi(2);
                }
                for w in pts.windows(2) {
                    d2 = d2.min(point_segment_dist2(p, w[0], w[1]));
                    if d2 == 0.0 {
                        break;
                    }
                }
                // Strict comparison: a radius landing exactly on pixel
                // centers must not widen the stroke by a full row.
                if d2 < radius * radius {
                    on[j * nx + i] = 1.0;
                }
            }
        }
    }
    Ok(DensityGrid::new(*spec, on).expect("stroke raster is binary"))
}

fn point_segment_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    (p.0 - cx).powi(2) + (p.1 - cy).powi(2)
}
