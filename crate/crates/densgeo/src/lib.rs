//! densgeo: reverse engineering of 2D topology-optimization density fields
//! into parametric bar geometry.
//!
//! The pipeline turns a binarized density image back into an explicit,
//! editable set of straight bar components:
//!
//! 1. [`raster`] — density grids, PGM/CSV I/O, dice and volume metrics.
//! 2. [`skeleton`] — thinning, skeleton graph, distance-transform thickness
//!    estimation, and conversion of branches to bar components.
//! 3. [`mmc`] — the explicit decoder: hyperelliptic level sets with a
//!    sigmoid projection, assembly union, and analytic parameter gradients.
//! 4. [`fit`] — self-supervised refinement: bounded dice reconstruction
//!    loss, adaptive gradient descent over component parameters, pruning
//!    and mask-dice non-max suppression.
//! 5. [`datagen`] — test-target generation: boundary-condition sampling,
//!    SIMP topology optimization, random assemblies.
//! 6. [`fea`] — plane-stress FEA evaluation: compliance, load-path
//!    connection checks, and comparison reports.

pub mod datagen;
pub mod fea;
pub mod fit;
pub mod mmc;
pub mod pipeline;
pub mod raster;
pub mod skeleton;
