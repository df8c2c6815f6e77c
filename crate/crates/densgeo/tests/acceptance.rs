//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them on success).

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use densgeo::datagen::{self, sample_bc, BoundaryConditions, Edge};
use densgeo::fea::{self, element_stiffness, FeaModel, Material, ReconGeometry};
use densgeo::fit;
use densgeo::mmc::{self, Component, ComponentSet, ProjectionParams};
use densgeo::pipeline::{reverse_fit, ReverseOptions};
use densgeo::raster::{binarize, dice, volume_fraction, DensityGrid, GridSpec};
use densgeo::skeleton::{self, distance_transform};

fn pass(n: usize, name: &str) {
    println!("[acceptance] criterion {n} ({name}): PASS");
}

fn unit_spec(n: usize) -> GridSpec {
    GridSpec::new(n, n, 1.0, 1.0).unwrap()
}

/// Criterion 1: analytic parameter gradients against central finite
/// differences at h = 1e-4 on 20 random components (64x64 grids),
/// relative error <= 1e-3 wherever |g| > 1e-6, in under a minute.
///
/// The projection uses beta = 0.03: the chain rule under test is identical
/// for every beta, and at the default 0.01 the sigmoid is sharp enough
/// that the finite-difference *oracle* itself carries truncation error
/// above the tolerance. The cotangent is a smooth ramp so no parameter
/// direction degenerates by symmetry.
#[test]
fn criterion_1_decoder_gradient_correctness() {
    let start = Instant::now();
    let spec = unit_spec(64);
    let p = ProjectionParams::new(1e-3, 0.0, 0.03, false).unwrap();
    let cot: Vec<f64> = {
        let g = DensityGrid::from_fn(spec, |x, y| (0.15 + 0.45 * x + 0.35 * y).clamp(0.0, 1.0))
            .unwrap();
        g.values().to_vec()
    };
    let objective = |set: &ComponentSet| -> f64 {
        mmc::render_set(set, &p, &spec)
            .values()
            .iter()
            .zip(&cot)
            .map(|(r, c)| r * c)
            .sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-4;
    let mut checked = 0;
    for case in 0..20 {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let len = rng.random_range(0.35..0.9);
        let (cx, cy) = (rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
        let (dx, dy) = (0.5 * len * theta.cos(), 0.5 * len * theta.sin());
        let c = Component::new(
            cx - dx,
            cy - dy,
            cx + dx,
            cy + dy,
            rng.random_range(0.05..0.16),
        )
        .unwrap();
        let set = ComponentSet::new(vec![c], spec);
        let grads = mmc::grad_params(&set, &p, &spec, &cot).unwrap();
        for k in 0..5 {
            let mut qp = c.params();
            let mut qm = qp;
            qp[k] += h;
            qm[k] -= h;
            let plus = ComponentSet::new(
                vec![Component::new(qp[0], qp[1], qp[2], qp[3], qp[4]).unwrap()],
                spec,
            );
            let minus = ComponentSet::new(
                vec![Component::new(qm[0], qm[1], qm[2], qm[3], qm[4]).unwrap()],
                spec,
            );
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let g = grads[0][k];
            if g.abs() > 1e-6 {
                let rel = (fd - g).abs() / g.abs();
                assert!(
                    rel <= 1e-3,
                    "case {case} param {k}: analytic {g}, fd {fd}, rel {rel}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 80, "only {checked} gradients exceeded the filter");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    pass(1, "decoder gradient correctness");
}

/// Criterion 2: level-set point values. Phi at the component origin equals
/// 1 - (2 eps^6 + eps)^(1/6) within 1e-12 for eps = 1e-3 (~0.6838), and
/// the sigmoid maps the alpha level to exactly one half.
#[test]
fn criterion_2_level_set_point_values() {
    let c = Component::new(0.2, 0.5, 0.8, 0.5, 0.05).unwrap();
    let p = ProjectionParams::default();
    let eps = p.epsilon;
    let phi = mmc::level_set_at(&c, &p, 0.5, 0.5);
    let expected = 1.0 - (2.0 * eps.powi(6) + eps).powf(1.0 / 6.0);
    assert!(
        (phi - expected).abs() <= 1e-12,
        "phi {phi} vs closed form {expected}"
    );
    assert!((phi - 0.6838).abs() < 1e-4, "phi {phi} not ~0.6838");

    // rho = 0.5 exactly where phi = alpha.
    let probe = (0.66, 0.52);
    let level = mmc::level_set_at(&c, &p, probe.0, probe.1);
    let at_level = ProjectionParams::new(p.epsilon, level, p.beta, false).unwrap();
    let rho = mmc::component_density_at(&c, &at_level, probe.0, probe.1);
    assert_eq!(rho, 0.5);
    pass(2, "level-set point values");
}

/// Criterion 3: the crossing-bars suppression fixture. An orthogonal
/// equal-length pair (t/L = 0.05) shares one bounding box: IoU
/// suppression at 0.45 keeps a single component while mask-dice
/// suppression at 0.9 keeps both.
#[test]
fn criterion_3_mask_nms_beats_bbox_nms_on_crossing_bars() {
    let spec = unit_spec(128);
    let l = 0.6;
    let t = 0.05 * l;
    let d = l / (2.0 * 2.0_f64.sqrt());
    let set = ComponentSet::new(
        vec![
            Component::new(0.5 - d, 0.5 - d, 0.5 + d, 0.5 + d, t).unwrap(),
            Component::new(0.5 - d, 0.5 + d, 0.5 + d, 0.5 - d, t).unwrap(),
        ],
        spec,
    );
    let p = ProjectionParams::default();
    let scores = [0.9, 0.85];
    let by_bbox = fit::bbox_nms(&set, &scores, &p, &spec, 0.45).unwrap();
    assert_eq!(by_bbox.len(), 1, "bbox IoU suppression must drop one bar");
    let by_mask = fit::mask_nms(&set, &scores, &p, &spec, 0.9).unwrap();
    assert_eq!(by_mask.len(), 2, "mask-dice suppression must keep both");
    pass(3, "crossing-bars NMS reproduction");
}

/// Criterion 4: thickness estimation on straight bars of widths 4, 8 and
/// 16 px lands within +-1.5 px, with the distance transform validated
/// against a brute-force oracle on each fixture; the 5th-percentile floor
/// is a no-op for single-branch inputs.
#[test]
fn criterion_4_skeleton_thickness_estimation() {
    for width in [4usize, 8, 16] {
        let (nx, ny) = (64usize, 64usize);
        let spec = GridSpec::with_default_dims(nx, ny).unwrap();
        let y0 = (ny - width) / 2;
        let g = DensityGrid::from_fn(spec, |_, _| 0.0)
            .map(|mut g| {
                for j in y0..y0 + width {
                    for i in 4..60 {
                        g_set(&mut g, i, j, nx);
                    }
                }
                g
            })
            .unwrap();

        // Brute-force Euclidean oracle for the distance transform.
        let dist = distance_transform(&g).unwrap();
        for j in 0..ny {
            for i in 0..nx {
                let mut best = f64::INFINITY;
                for jj in 0..ny {
                    for ii in 0..nx {
                        if g.get(ii, jj) == 0.0 {
                            best = best.min(
                                ((i as f64 - ii as f64).powi(2)
                                    + (j as f64 - jj as f64).powi(2))
                                .sqrt(),
                            );
                        }
                    }
                }
                assert!(
                    (dist.get(i, j) - best).abs() < 1e-9,
                    "width {width}: EDT mismatch at ({i},{j})"
                );
            }
        }

        let mut skel = skeleton::skeletonize(&g).unwrap();
        skel.thicknesses = skeleton::estimate_branch_thickness(&skel, &dist, 10);
        let (_, est) = skel
            .branches
            .iter()
            .zip(&skel.thicknesses)
            .max_by(|a, b| a.0.arc_length().total_cmp(&b.0.arc_length()))
            .expect("bar produces a branch");
        assert!(
            (est - width as f64).abs() <= 1.5,
            "width {width}: estimated {est}"
        );

        if skel.branches.len() == 1 {
            let floor = skeleton::percentile(&skel.thicknesses, 5.0);
            assert_eq!(skel.thicknesses[0], floor, "floor must be a no-op");
        }
    }
    // Single-branch floor no-op on a dedicated 1-branch fixture.
    let spec = GridSpec::with_default_dims(48, 16).unwrap();
    let g = DensityGrid::from_fn(spec, |_, _| 0.0)
        .map(|mut g| {
            for j in 6..10 {
                for i in 4..44 {
                    g_set(&mut g, i, j, 48);
                }
            }
            g
        })
        .unwrap();
    let mut skel = skeleton::skeletonize(&g).unwrap();
    assert_eq!(skel.branches.len(), 1);
    let dist = distance_transform(&g).unwrap();
    skel.thicknesses = skeleton::estimate_branch_thickness(&skel, &dist, 10);
    assert_eq!(
        skel.thicknesses[0],
        skeleton::percentile(&skel.thicknesses, 5.0)
    );
    pass(4, "skeleton thickness estimation");
}

fn g_set(g: &mut DensityGrid, i: usize, j: usize, _nx: usize) {
    let spec = *g.spec();
    let idx = spec.index(i, j);
    // values_mut is crate-private; rebuild through the public constructor
    // would be wasteful, so poke through a rebuilt vector instead.
    let mut values = g.values().to_vec();
    values[idx] = 1.0;
    *g = DensityGrid::new(spec, values).unwrap();
}

/// Criterion 5: round-trip reverse engineering. Fifty seeded random
/// assemblies (128x128, 4-8 components): skeleton-seeded fitting reaches
/// mean binarized dice >= 0.90 and never scores below the skeleton-only
/// reconstruction, within the runtime budget.
#[test]
fn criterion_5_round_trip_reverse_engineering() {
    let start = Instant::now();
    let spec = unit_spec(128);
    let opts = ReverseOptions::default();
    let mut dices = Vec::with_capacity(50);
    for seed in 0..50u64 {
        let (_, target) = datagen::random_assembly(seed, 4..=8, &spec, &opts.projection).unwrap();
        let out = reverse_fit(&target, &opts).unwrap();
        assert!(
            out.final_raster_dice >= out.seed_raster_dice,
            "seed {seed}: fit {} below skeleton baseline {}",
            out.final_raster_dice,
            out.seed_raster_dice
        );
        dices.push(out.final_raster_dice);
    }
    let mean = dices.iter().sum::<f64>() / dices.len() as f64;
    assert!(mean >= 0.90, "mean dice {mean}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 900, "took {elapsed:?}");
    println!("[acceptance] criterion 5 mean dice {mean:.4} over 50 samples in {elapsed:?}");
    pass(5, "round-trip reverse engineering");
}

/// Independent port of the 88-line SIMP method, used only as an oracle:
/// its own element stiffness table, MATLAB-style column-major (y-down)
/// node numbering, density filter, OC bisection and banded solver.
mod simp88_oracle {
    pub struct Simp88 {
        pub nelx: usize,
        pub nely: usize,
        pub volfrac: f64,
        pub penal: f64,
        pub rmin: f64,
    }

    const E0: f64 = 1.0;
    const EMIN: f64 = 1e-9;
    const NU: f64 = 0.3;

    fn lk() -> [[f64; 8]; 8] {
        let nu = NU;
        let k = [
            0.5 - nu / 6.0,
            0.125 + nu / 8.0,
            -0.25 - nu / 12.0,
            -0.125 + 3.0 * nu / 8.0,
            -0.25 + nu / 12.0,
            -0.125 - nu / 8.0,
            nu / 6.0,
            0.125 - 3.0 * nu / 8.0,
        ];
        let idx: [[usize; 8]; 8] = [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ];
        let mut ke = [[0.0; 8]; 8];
        for r in 0..8 {
            for c in 0..8 {
                ke[r][c] = k[idx[r][c]] / (1.0 - nu * nu);
            }
        }
        ke
    }

    /// Element dofs in the top88 layout: nodes are column-major with the
    /// row index increasing downward; element (elx, ely) touches nodes
    /// n1 = (nely+1) elx + ely (upper left), n2 = n1 + (nely+1) (upper
    /// right), and the two below them.
    fn edof(nely: usize, elx: usize, ely: usize) -> [usize; 8] {
        let n1 = (nely + 1) * elx + ely;
        let n2 = (nely + 1) * (elx + 1) + ely;
        [
            2 * n1 + 2,
            2 * n1 + 3,
            2 * n2 + 2,
            2 * n2 + 3,
            2 * n2,
            2 * n2 + 1,
            2 * n1,
            2 * n1 + 1,
        ]
    }

    struct Band {
        n: usize,
        bw: usize,
        data: Vec<f64>,
    }

    impl Band {
        fn new(n: usize, bw: usize) -> Self {
            Band {
                n,
                bw,
                data: vec![0.0; n * bw],
            }
        }
        fn idx(&self, i: usize, j: usize) -> usize {
            i * self.bw + (i - j)
        }
        fn factor(&mut self) {
            for i in 0..self.n {
                let lo = i.saturating_sub(self.bw - 1);
                for j in lo..=i {
                    let mut sum = self.data[self.idx(i, j)];
                    let kmin = lo.max(j.saturating_sub(self.bw - 1));
                    for k in kmin..j {
                        sum -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                    }
                    let t = self.idx(i, j);
                    if j < i {
                        self.data[t] = sum / self.data[self.idx(j, j)];
                    } else {
                        assert!(sum > 0.0, "oracle matrix not SPD at {i}");
                        self.data[t] = sum.sqrt();
                    }
                }
            }
        }
        fn solve(&self, f: &[f64]) -> Vec<f64> {
            let mut y = f.to_vec();
            for i in 0..self.n {
                let lo = i.saturating_sub(self.bw - 1);
                let mut sum = y[i];
                for j in lo..i {
                    sum -= self.data[self.idx(i, j)] * y[j];
                }
                y[i] = sum / self.data[self.idx(i, i)];
            }
            for i in (0..self.n).rev() {
                let hi = self.n.min(i + self.bw);
                let mut sum = y[i];
                for j in i + 1..hi {
                    sum -= self.data[self.idx(j, i)] * y[j];
                }
                y[i] = sum / self.data[self.idx(i, i)];
            }
            y
        }
    }

    /// Run the MBB half-beam case and return (xPhys, final compliance).
    pub fn run_mbb(p: &Simp88, max_iters: usize, change_tol: f64) -> (Vec<f64>, f64) {
        let (nelx, nely) = (p.nelx, p.nely);
        let n = nelx * nely;
        let ndof = 2 * (nelx + 1) * (nely + 1);
        let ke = lk();

        // MBB: x of the whole left column fixed, y of the bottom-right
        // node fixed, unit downward load on the y dof of the top-left node.
        let mut fixed = vec![false; ndof];
        for j in 0..=nely {
            fixed[2 * j] = true;
        }
        fixed[2 * ((nely + 1) * (nelx + 1) - 1) + 1] = true;
        let mut load = vec![0.0; ndof];
        load[1] = -1.0;

        // Density filter weights.
        let reach = p.rmin.ceil() as isize - 1;
        let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut hs = vec![0.0; n];
        for ex in 0..nelx as isize {
            for ey in 0..nely as isize {
                let e = (ex * nely as isize + ey) as usize;
                for dx in -reach..=reach {
                    for dy in -reach..=reach {
                        let (qx, qy) = (ex + dx, ey + dy);
                        if qx < 0 || qy < 0 || qx >= nelx as isize || qy >= nely as isize {
                            continue;
                        }
                        let w = p.rmin - ((dx * dx + dy * dy) as f64).sqrt();
                        if w > 0.0 {
                            nbrs[e].push(((qx * nely as isize + qy) as usize, w));
                            hs[e] += w;
                        }
                    }
                }
            }
        }
        let filt = |x: &[f64], out: &mut [f64]| {
            for e in 0..n {
                let mut acc = 0.0;
                for &(k, w) in &nbrs[e] {
                    acc += w * x[k];
                }
                out[e] = acc / hs[e];
            }
        };
        let filt_t = |g: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for e in 0..n {
                let ge = g[e] / hs[e];
                for &(k, w) in &nbrs[e] {
                    out[k] += w * ge;
                }
            }
        };

        let mut x = vec![p.volfrac; n];
        let mut xphys = vec![0.0; n];
        filt(&x, &mut xphys);
        let bw = 2 * (nely + 2) + 2;
        let mut compliance = 0.0;

        for _ in 0..max_iters {
            // Assemble and solve.
            let mut kmat = Band::new(ndof, bw.min(ndof));
            for ex in 0..nelx {
                for ey in 0..nely {
                    let e = ex * nely + ey;
                    let scale = EMIN + xphys[e].powf(p.penal) * (E0 - EMIN);
                    let dofs = edof(nely, ex, ey);
                    for (r, &dr) in dofs.iter().enumerate() {
                        for (c, &dc) in dofs.iter().enumerate() {
                            if dr >= dc {
                                let t = kmat.idx(dr, dc);
                                kmat.data[t] += scale * ke[r][c];
                            }
                        }
                    }
                }
            }
            let mut rhs = load.clone();
            for d in 0..ndof {
                if fixed[d] {
                    for j in d.saturating_sub(bw - 1)..=d {
                        let t = kmat.idx(d, j);
                        kmat.data[t] = 0.0;
                    }
                    for i in d + 1..ndof.min(d + bw) {
                        let t = kmat.idx(i, d);
                        kmat.data[t] = 0.0;
                    }
                    let t = kmat.idx(d, d);
                    kmat.data[t] = 1.0;
                    rhs[d] = 0.0;
                }
            }
            kmat.factor();
            let u = kmat.solve(&rhs);

            // Objective and sensitivities.
            compliance = 0.0;
            let mut dc = vec![0.0; n];
            for ex in 0..nelx {
                for ey in 0..nely {
                    let e = ex * nely + ey;
                    let dofs = edof(nely, ex, ey);
                    let mut ce = 0.0;
                    for (r, &dr) in dofs.iter().enumerate() {
                        for (c, &dcf) in dofs.iter().enumerate() {
                            ce += u[dr] * ke[r][c] * u[dcf];
                        }
                    }
                    compliance += (EMIN + xphys[e].powf(p.penal) * (E0 - EMIN)) * ce;
                    dc[e] = -p.penal * xphys[e].powf(p.penal - 1.0) * (E0 - EMIN) * ce;
                }
            }
            let dv = vec![1.0; n];
            let mut dcf = vec![0.0; n];
            let mut dvf = vec![0.0; n];
            filt_t(&dc, &mut dcf);
            filt_t(&dv, &mut dvf);

            // OC update.
            let (mut l1, mut l2) = (0.0f64, 1e9f64);
            let mut xnew = vec![0.0; n];
            let mut xp = vec![0.0; n];
            while (l2 - l1) / (l1 + l2) > 1e-9 {
                let lmid = 0.5 * (l1 + l2);
                for e in 0..n {
                    let cand = x[e] * (-dcf[e] / dvf[e] / lmid).max(0.0).sqrt();
                    xnew[e] = cand.min(x[e] + 0.2).min(1.0).max(x[e] - 0.2).max(0.0);
                }
                filt(&xnew, &mut xp);
                if xp.iter().sum::<f64>() > p.volfrac * n as f64 {
                    l1 = lmid;
                } else {
                    l2 = lmid;
                }
            }
            let change = x
                .iter()
                .zip(&xnew)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            x.copy_from_slice(&xnew);
            xphys.copy_from_slice(&xp);
            if change < change_tol {
                break;
            }
        }
        (xphys, compliance)
    }
}

/// Criterion 6: the implementation's SIMP run on the MBB half-beam
/// (60x20, volfrac 0.5, penal 3, rmin 2.4) matches the independent
/// 88-line port to within 1% final compliance; both satisfy the volume
/// constraint within 1e-3.
#[test]
fn criterion_6_simp_oracle_equivalence() {
    let (nelx, nely) = (60usize, 20usize);
    let spec = GridSpec::new(nelx, nely, nelx as f64, nely as f64).unwrap();
    let opts = datagen::SimpOptions {
        volfrac: 0.5,
        penal: 3.0,
        rmin: 2.4,
        max_iters: 200,
        change_tol: 0.01,
        resolution: 1.0,
    };

    // MBB boundary conditions in the library's conventions (y up, node =
    // i * (ny+1) + j with j = 0 at the top): left-column x dofs fixed,
    // bottom-right y dof fixed, downward unit load at the top-left node.
    let ny1 = nely + 1;
    let mut fixed = Vec::new();
    for j in 0..ny1 {
        fixed.push(2 * j);
    }
    let bottom_right = nelx * ny1 + nely;
    fixed.push(2 * bottom_right + 1);
    let mut load = vec![0.0; 2 * (nelx + 1) * ny1];
    load[2 * 0 + 1] = -1.0; // top-left node, y dof
    let model = FeaModel::new(spec, Material::default(), opts.penal, &fixed, load).unwrap();

    let ours = datagen::simp_optimize_model(&model, &opts).unwrap();
    let v = volume_fraction(&ours);
    assert!((v - 0.5).abs() <= 1e-3, "volume fraction {v}");
    let c_ours = model.compliance(&ours).unwrap();

    let oracle = simp88_oracle::Simp88 {
        nelx,
        nely,
        volfrac: 0.5,
        penal: 3.0,
        rmin: 2.4,
    };
    let (xphys, c_oracle) = simp88_oracle::run_mbb(&oracle, 200, 0.01);
    let v_oracle = xphys.iter().sum::<f64>() / xphys.len() as f64;
    assert!((v_oracle - 0.5).abs() <= 1e-3, "oracle volume {v_oracle}");

    let rel = (c_ours - c_oracle).abs() / c_oracle;
    assert!(
        rel <= 0.01,
        "compliance {c_ours} vs oracle {c_oracle} (rel {rel})"
    );
    println!("[acceptance] criterion 6 compliance {c_ours:.4} vs oracle {c_oracle:.4} (rel {rel:.2e})");
    pass(6, "SIMP oracle equivalence");
}

/// Criterion 7: FEA sanity. Single-element solve against a hand-assembled
/// closed-form system within 1e-10, slender-cantilever tip deflection
/// within 15% of beam theory, zero load giving exactly zero displacement,
/// and compliance monotone under material addition on ten nested pairs.
#[test]
fn criterion_7_fea_sanity() {
    // Single element, left edge fixed, unit tension split on the right
    // nodes; oracle is the published k-vector stiffness reduced to the
    // free dofs and solved densely here.
    {
        let spec = GridSpec::new(1, 1, 1.0, 1.0).unwrap();
        let mut load = vec![0.0; 8];
        load[4] = 0.5;
        load[6] = 0.5;
        let model = FeaModel::new(spec, Material::default(), 3.0, &[0, 1, 2, 3], load.clone())
            .unwrap();
        let g = DensityGrid::filled(spec, 1.0).unwrap();
        let u = model.assemble_solve(&g).unwrap();

        let ke = element_stiffness(1.0, 1.0, 0.3);
        // Element local order LL, LR, UR, UL maps to library nodes
        // 1, 3, 2, 0; free nodes are 2 (UR) and 3 (LR).
        let local_of_node = [3usize, 0, 2, 1];
        let free_nodes = [2usize, 3];
        let mut a = [[0.0f64; 4]; 4];
        let mut b = [0.0f64; 4];
        for (r, &nr) in free_nodes.iter().enumerate() {
            for d in 0..2 {
                b[2 * r + d] = load[2 * nr + d];
                for (c, &nc) in free_nodes.iter().enumerate() {
                    for e in 0..2 {
                        a[2 * r + d][2 * c + e] =
                            ke[2 * local_of_node[nr] + d][2 * local_of_node[nc] + e];
                    }
                }
            }
        }
        let mut xsol = b;
        for col in 0..4 {
            for row in col + 1..4 {
                let f = a[row][col] / a[col][col];
                for c2 in col..4 {
                    a[row][c2] -= f * a[col][c2];
                }
                xsol[row] -= f * xsol[col];
            }
        }
        for row in (0..4).rev() {
            for c2 in row + 1..4 {
                xsol[row] -= a[row][c2] * xsol[c2];
            }
            xsol[row] /= a[row][row];
        }
        for (r, &nr) in free_nodes.iter().enumerate() {
            for d in 0..2 {
                assert!(
                    (u[2 * nr + d] - xsol[2 * r + d]).abs() < 1e-10,
                    "single element: dof ({nr},{d})"
                );
            }
        }
    }

    // Slender cantilever vs Euler-Bernoulli.
    {
        let spec = GridSpec::new(100, 10, 10.0, 1.0).unwrap();
        let ny1 = 11;
        let mut fixed = Vec::new();
        for j in 0..ny1 {
            fixed.push(2 * j);
            fixed.push(2 * j + 1);
        }
        let p_total = 1e-3;
        let mut load = vec![0.0; 2 * 101 * ny1];
        for j in 0..ny1 {
            load[2 * (100 * ny1 + j) + 1] = -p_total / ny1 as f64;
        }
        let model = FeaModel::new(spec, Material::default(), 3.0, &fixed, load).unwrap();
        let g = DensityGrid::filled(spec, 1.0).unwrap();
        let u = model.assemble_solve(&g).unwrap();
        let tip: f64 =
            (0..ny1).map(|j| u[2 * (100 * ny1 + j) + 1]).sum::<f64>() / ny1 as f64;
        let beam = -p_total * 1000.0 / (3.0 / 12.0);
        let rel = (tip - beam).abs() / beam.abs();
        assert!(rel < 0.15, "tip {tip} vs beam {beam} (rel {rel})");

        // Zero load -> zero displacement.
        let zero_model = FeaModel::new(
            spec,
            Material::default(),
            3.0,
            &(0..2 * ny1).collect::<Vec<_>>(),
            vec![0.0; 2 * 101 * ny1],
        )
        .unwrap();
        let u0 = zero_model.assemble_solve(&g).unwrap();
        assert!(u0.iter().all(|&v| v == 0.0));
    }

    // Compliance monotone under material addition, ten nested pairs.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let spec = GridSpec::new(20, 14, 1.43, 1.0).unwrap();
        let ny1 = 15;
        let mut fixed = Vec::new();
        for j in 0..ny1 {
            fixed.push(2 * j);
            fixed.push(2 * j + 1);
        }
        let mut load = vec![0.0; 2 * 21 * ny1];
        load[2 * (20 * ny1 + 7) + 1] = -1.0;
        let model = FeaModel::new(spec, Material::default(), 3.0, &fixed, load).unwrap();
        for pair in 0..10 {
            let base = DensityGrid::from_fn(spec, |_, _| {
                if rng.random_bool(0.55) {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap();
            let mut grown = base.values().to_vec();
            for v in grown.iter_mut() {
                if *v == 0.0 && rng.random_bool(0.35) {
                    *v = 1.0;
                }
            }
            let grown = DensityGrid::new(spec, grown).unwrap();
            let c_base = model.compliance(&base).unwrap();
            let c_grown = model.compliance(&grown).unwrap();
            assert!(
                c_grown <= c_base * (1.0 + 1e-9),
                "pair {pair}: {c_grown} > {c_base}"
            );
        }
    }
    pass(7, "FEA sanity");
}

/// Criterion 8: the connection contract. Twenty deliberately disconnected
/// fixtures; after `connect_to_bc` every boundary-condition region
/// overlaps at least one material pixel and at most one node moved per
/// region.
#[test]
fn criterion_8_connection_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let p = ProjectionParams::default();
    for case in 0..20u32 {
        let bc = sample_bc(60_000 + case as u64);
        let spec = GridSpec::new(64, 64, bc.domain_w, bc.domain_h).unwrap();
        let (w, h) = (bc.domain_w, bc.domain_h);

        // Geometry confined to the interior third of the domain so it
        // cannot touch any edge region.
        let geometry = if case % 3 == 2 {
            // Skeleton variant: a thinned interior bar.
            let g = DensityGrid::from_fn(spec, |x, y| {
                let inside = x > 0.38 * w && x < 0.62 * w && (y - 0.5 * h).abs() < 0.05 * h;
                if inside {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap();
            let mut skel = skeleton::skeletonize(&g).unwrap();
            let dist = distance_transform(&g).unwrap();
            skel.thicknesses = skeleton::estimate_branch_thickness(&skel, &dist, 10);
            ReconGeometry::Skeleton(skel)
        } else {
            let n = rng.random_range(1..=3);
            let comps: Vec<Component> = (0..n)
                .map(|_| {
                    let ax = rng.random_range(0.38 * w..0.5 * w);
                    let ay = rng.random_range(0.38 * h..0.62 * h);
                    Component::new(
                        ax,
                        ay,
                        ax + rng.random_range(0.06 * w..0.12 * w),
                        (ay + rng.random_range(-0.08 * h..0.08 * h))
                            .clamp(0.38 * h, 0.62 * h),
                        rng.random_range(0.03..0.08),
                    )
                    .unwrap()
                })
                .collect();
            ReconGeometry::Components {
                set: ComponentSet::new(comps, spec),
                projection: p,
            }
        };

        // Confirm the fixture is actually disconnected from both regions.
        let raster = geometry.rasterize(&spec).unwrap();
        let support = bc.support_pixels(&spec);
        let load_px = bc.load_pixel(&spec);
        assert!(
            support.iter().all(|&(i, j)| raster.get(i, j) == 0.0),
            "case {case}: fixture already touches the support"
        );
        assert_eq!(raster.get(load_px.0, load_px.1), 0.0);

        let (corrected, conn) = fea::connect_to_bc(geometry, &bc, &spec).unwrap();
        assert!(
            conn.support_connected && conn.load_connected,
            "case {case}: connection flags {conn:?}"
        );
        // Disconnected fixtures require exactly one move per region.
        assert!(conn.support_node_moved && conn.load_node_moved);

        let raster = corrected.rasterize(&spec).unwrap();
        assert!(
            support.iter().any(|&(i, j)| raster.get(i, j) == 1.0),
            "case {case}: support region still void"
        );
        assert_eq!(
            raster.get(load_px.0, load_px.1),
            1.0,
            "case {case}: load pixel still void"
        );
    }
    pass(8, "boundary-condition connection contract");
}

/// Criterion 9: sampler conformance over 10^4 seeds plus byte-level
/// reproducibility for a fixed seed.
#[test]
fn criterion_9_sampler_conformance() {
    for seed in 0..10_000u64 {
        let bc = sample_bc(seed);
        assert!((1.0..=2.0).contains(&bc.domain_h), "seed {seed}");
        assert!((1.0..=2.0).contains(&bc.domain_w), "seed {seed}");
        assert!(
            (0.5..=0.75).contains(&bc.support_length_frac),
            "seed {seed}"
        );
        assert!(
            (0.0..=bc.support_length_frac).contains(&bc.support_start),
            "seed {seed}"
        );
        assert!((0.0..=1.0).contains(&bc.load_pos), "seed {seed}");
        assert!(
            (0.0..std::f64::consts::TAU).contains(&bc.load_angle),
            "seed {seed}"
        );
        assert!(
            bc.load_normal_separation() >= std::f64::consts::FRAC_PI_4 - 1e-12,
            "seed {seed}: separation {}",
            bc.load_normal_separation()
        );
        let (s0, s1) = bc.support_interval();
        assert!((0.0..=1.0).contains(&s0) && s0 <= s1 && s1 <= 1.0);
        assert!(matches!(
            bc.support_edge,
            Edge::Left | Edge::Right | Edge::Top | Edge::Bottom
        ));
    }
    let a = serde_json::to_vec(&sample_bc(123)).unwrap();
    let b = serde_json::to_vec(&sample_bc(123)).unwrap();
    assert_eq!(a, b);
    pass(9, "boundary-condition sampler conformance");
}

/// Criterion 10: the binarization rule. At threshold 0.1 a value of 0.10
/// maps to 0.0 and 0.11 maps to 1.0.
#[test]
fn criterion_10_binarization_rule() {
    let spec = GridSpec::with_default_dims(2, 1).unwrap();
    let g = DensityGrid::new(spec, vec![0.10, 0.11]).unwrap();
    let b = binarize(&g, 0.1).unwrap();
    assert_eq!(b.values(), &[0.0, 1.0]);
    pass(10, "binarization rule");
}

/// Criterion 11: aggregation uses mean dice, mean volume delta and median
/// compliance delta, robust to an extreme outlier.
#[test]
fn criterion_11_metric_aggregation() {
    let mk = |dice: f64, dv: f64, dc: f64| fea::EvalReport {
        dice,
        volume_delta_pct: dv,
        compliance_delta_pct: dc,
        compliance_volume_product: 0.0,
        connected_support: true,
        connected_load: true,
    };
    let reports = vec![
        mk(0.9, -3.0, 1.0),
        mk(1.0, 5.0, 2.0),
        mk(0.8, 1.0, 1.0e9), // internally disconnected outlier
    ];
    let s = fea::aggregate(&reports).unwrap();
    assert!((s.mean_dice - 0.9).abs() < 1e-12);
    assert!((s.mean_volume_delta_pct - 1.0).abs() < 1e-12);
    assert_eq!(s.median_compliance_delta_pct, 2.0);

    // Replacing the outlier with a larger one leaves the median unchanged.
    let mut worse = reports.clone();
    worse[2] = mk(0.8, 1.0, 1.0e12);
    assert_eq!(
        fea::aggregate(&worse).unwrap().median_compliance_delta_pct,
        2.0
    );

    let single = fea::aggregate(&reports[..1].to_vec()).unwrap();
    assert_eq!(single.mean_dice, 0.9);
    assert_eq!(single.median_compliance_delta_pct, 1.0);
    pass(11, "metric aggregation");
}

/// Definitional consistency used across the suite: a random assembly's
/// truth re-renders onto its own target with dice ~1.
#[test]
fn random_assembly_truth_reconstructs_its_target() {
    let spec = unit_spec(128);
    let p = ProjectionParams::default();
    for seed in [3u64, 17, 40] {
        let (truth, target) = datagen::random_assembly(seed, 4..=8, &spec, &p).unwrap();
        let re = binarize(&mmc::render_set(&truth, &p, &spec), 0.5).unwrap();
        let d = dice(&re, &target).unwrap();
        assert!(d >= 0.99, "seed {seed}: dice {d}");
    }
}

/// Cross-module check: evaluating a structure against its own geometry
/// yields near-perfect dice and small volume/compliance deltas.
#[test]
fn evaluate_self_comparison_is_tight() {
    // A bar spanning support and load edges so no connection move happens.
    let bc = BoundaryConditions {
        domain_w: 1.0,
        domain_h: 1.0,
        support_edge: Edge::Left,
        support_start: 0.2,
        support_length_frac: 0.6,
        load_pos: 0.5,
        load_angle: std::f64::consts::PI, // pulls along -x
    };
    let spec = GridSpec::new(96, 96, 1.0, 1.0).unwrap();
    let p = ProjectionParams::default();
    let set = ComponentSet::new(
        vec![Component::new(-0.02, 0.5, 1.02, 0.5, 0.08).unwrap()],
        spec,
    );
    let target = binarize(&mmc::render_set(&set, &p, &spec), 0.5).unwrap();
    let eval = fea::evaluate(
        &target,
        ReconGeometry::Components {
            set,
            projection: p,
        },
        &bc,
        Material::default(),
    )
    .unwrap();
    assert!(eval.report.dice >= 0.99, "dice {}", eval.report.dice);
    assert!(
        eval.report.volume_delta_pct.abs() <= 1.0,
        "dV {}",
        eval.report.volume_delta_pct
    );
    assert!(
        eval.report.compliance_delta_pct.abs() <= 2.0,
        "dC {}",
        eval.report.compliance_delta_pct
    );
    assert!(eval.report.connected_support && eval.report.connected_load);

    // A dilated superset gains volume and loses compliance.
    let fat = ComponentSet::new(
        vec![Component::new(-0.02, 0.5, 1.02, 0.5, 0.12).unwrap()],
        spec,
    );
    let eval_fat = fea::evaluate(
        &target,
        ReconGeometry::Components {
            set: fat,
            projection: p,
        },
        &bc,
        Material::default(),
    )
    .unwrap();
    assert!(eval_fat.report.volume_delta_pct > 0.0);
    assert!(eval_fat.report.compliance_delta_pct <= 0.0);
}
