//! Density-grid data model, file I/O and image-level metrics.
//!
//! A [`DensityGrid`] is a scalar field in `[0, 1]` on a regular pixel grid
//! with physical domain dimensions. Pixels are stored row-major with row 0
//! at the top of the image; physical y points up, so pixel `(i, j)` has its
//! center at `((i + 0.5) * w / nx, h - (j + 0.5) * h / ny)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid density value {value} at index {index}: must lie in [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("expected {expected} values for a {nx}x{ny} grid, got {got}")]
    ValueCount {
        nx: usize,
        ny: usize,
        expected: usize,
        got: usize,
    },
    #[error("grid shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> RasterError {
    RasterError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Grid file format. PGM stores quantized bytes (maxval 255), CSV is lossless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Pgm,
    Csv,
}

/// Shape and physical extent of a density grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec")]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    w: f64,
    h: f64,
}

#[derive(Deserialize)]
struct RawGridSpec {
    nx: usize,
    ny: usize,
    w: f64,
    h: f64,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = RasterError;
    fn try_from(raw: RawGridSpec) -> Result<Self, RasterError> {
        GridSpec::new(raw.nx, raw.ny, raw.w, raw.h)
    }
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, w: f64, h: f64) -> Result<Self, RasterError> {
        if nx < 1 || ny < 1 {
            return Err(RasterError::InvalidSpec(format!(
                "nx, ny must be >= 1 (got {nx}, {ny})"
            )));
        }
        if !(w > 0.0) || !(h > 0.0) || !w.is_finite() || !h.is_finite() {
            return Err(RasterError::InvalidSpec(format!(
                "w, h must be finite and > 0 (got {w}, {h})"
            )));
        }
        Ok(Self { nx, ny, w, h })
    }

    /// Unit-scaled spec: the longer side maps to physical length 1.
    pub fn with_default_dims(nx: usize, ny: usize) -> Result<Self, RasterError> {
        let m = nx.max(ny) as f64;
        Self::new(nx, ny, nx as f64 / m, ny as f64 / m)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn width(&self) -> f64 {
        self.w
    }
    pub fn height(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical size of one pixel along x.
    pub fn pitch_x(&self) -> f64 {
        self.w / self.nx as f64
    }
    /// Physical size of one pixel along y.
    pub fn pitch_y(&self) -> f64 {
        self.h / self.ny as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Physical center of pixel `(i, j)`; row 0 is the top of the image.
    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) * self.pitch_x(),
            self.h - (j as f64 + 0.5) * self.pitch_y(),
        )
    }

    /// Inverse of [`pixel_center`](Self::pixel_center): the pixel whose cell
    /// contains the physical point, clamped to the grid.
    pub fn pixel_at(&self, x: f64, y: f64) -> (usize, usize) {
        let i = (x / self.pitch_x()).floor();
        let j = ((self.h - y) / self.pitch_y()).floor();
        (
            (i.max(0.0) as usize).min(self.nx - 1),
            (j.max(0.0) as usize).min(self.ny - 1),
        )
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}

/// Scalar field in `[0, 1]` on a [`GridSpec`], row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self, RasterError> {
        if values.len() != spec.len() {
            return Err(RasterError::ValueCount {
                nx: spec.nx,
                ny: spec.ny,
                expected: spec.len(),
                got: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(RasterError::ValueOutOfRange { index, value });
            }
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn filled(spec: GridSpec, value: f64) -> Result<Self, RasterError> {
        Self::new(spec, vec![value; spec.len()])
    }

    /// Evaluate `f` at every pixel center. `f` must return values in `[0, 1]`.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self, RasterError> {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = spec.pixel_center(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// True when every value is exactly 0.0 or 1.0.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Threshold a grid: values strictly greater than `threshold` become 1.0,
/// values equal to or below it become 0.0.
pub fn binarize(grid: &DensityGrid, threshold: f64) -> Result<DensityGrid, RasterError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(RasterError::BadThreshold(threshold));
    }
    let values = grid
        .values
        .iter()
        .map(|&v| if v > threshold { 1.0 } else { 0.0 })
        .collect();
    Ok(DensityGrid {
        spec: grid.spec,
        values,
    })
}

/// Dice overlap `2*sum(a*b) / (sum(a) + sum(b))` between two same-shape
/// grids; 1.0 when both are identically zero.
pub fn dice(a: &DensityGrid, b: &DensityGrid) -> Result<f64, RasterError> {
    if !a.spec.same_shape(&b.spec) {
        return Err(RasterError::ShapeMismatch(
            a.spec.nx, a.spec.ny, b.spec.nx, b.spec.ny,
        ));
    }
    let mut inter = 0.0;
    let mut sum = 0.0;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        inter += x * y;
        sum += x + y;
    }
    if sum == 0.0 {
        Ok(1.0)
    } else {
        Ok(2.0 * inter / sum)
    }
}

/// Material fraction `sum(values) / (nx * ny)`.
pub fn volume_fraction(grid: &DensityGrid) -> f64 {
    grid.values.iter().sum::<f64>() / grid.spec.len() as f64
}

/// Load a grid from a P2/P5 PGM (density = pixel / maxval) or a CSV of
/// floats with one row per grid row.
///
/// Neither format carries physical dimensions; the spec defaults to
/// `w = nx / max(nx, ny)`, `h = ny / max(nx, ny)`.
pub fn load_grid(path: impl AsRef<Path>, format: GridFormat) -> Result<DensityGrid, RasterError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    match format {
        GridFormat::Pgm => parse_pgm(path, &bytes),
        GridFormat::Csv => parse_csv(path, &bytes),
    }
}

/// Write a grid. CSV is lossless; PGM quantizes to maxval 255.
pub fn save_grid(
    grid: &DensityGrid,
    path: impl AsRef<Path>,
    format: GridFormat,
) -> Result<(), RasterError> {
    let path = path.as_ref();
    let bytes = match format {
        GridFormat::Pgm => encode_pgm(grid),
        GridFormat::Csv => encode_csv(grid).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn encode_pgm(grid: &DensityGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.spec.nx, grid.spec.ny).into_bytes();
    out.extend(
        grid.values
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn encode_csv(grid: &DensityGrid) -> String {
    let mut out = String::new();
    for j in 0..grid.spec.ny {
        for i in 0..grid.spec.nx {
            if i > 0 {
                out.push(',');
            }
            // `{}` prints the shortest string that round-trips the f64.
            let _ = write!(out, "{}", grid.get(i, j));
        }
        out.push('\n');
    }
    out
}

/// PGM header tokenizer: whitespace-separated tokens, `#` comments to EOL.
struct PgmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> PgmTokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            line: 1,
        }
    }

    fn next_token(&mut self) -> Option<(&'a [u8], usize)> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                if self.bytes[self.pos] == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((&self.bytes[start..self.pos], self.line))
    }
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<DensityGrid, RasterError> {
    let perr = |line: usize, message: String| RasterError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut tokens = PgmTokens::new(bytes);
    let (magic, line) = tokens
        .next_token()
        .ok_or_else(|| perr(1, "empty file".into()))?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(perr(
                line,
                format!("expected P2 or P5 magic, got {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut header_num = |name: &str| -> Result<(usize, usize), RasterError> {
        let (tok, line) = tokens
            .next_token()
            .ok_or_else(|| perr(0, format!("missing {name}")))?;
        let n = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                perr(
                    line,
                    format!("invalid {name}: {:?}", String::from_utf8_lossy(tok)),
                )
            })?;
        Ok((n, line))
    };
    let (nx, line_nx) = header_num("width")?;
    let (ny, _) = header_num("height")?;
    let (maxval, line_mv) = header_num("maxval")?;
    if nx == 0 || ny == 0 {
        return Err(perr(line_nx, format!("degenerate size {nx}x{ny}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(perr(line_mv, format!("unsupported maxval {maxval}")));
    }
    let n = nx * ny;
    let mut values = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from raster data.
        let offset = tokens.pos + 1;
        let wide = maxval > 255;
        let needed = if wide { 2 * n } else { n };
        let data = bytes
            .get(offset..offset + needed)
            .ok_or_else(|| perr(tokens.line, format!("raster data truncated: need {needed} bytes")))?;
        if wide {
            for chunk in data.chunks_exact(2) {
                let raw = u16::from_be_bytes([chunk[0], chunk[1]]) as f64;
                values.push((raw / maxval as f64).min(1.0));
            }
        } else {
            for &b in data {
                values.push((b as f64 / maxval as f64).min(1.0));
            }
        }
    } else {
        for _ in 0..n {
            let (tok, line) = tokens
                .next_token()
                .ok_or_else(|| perr(tokens.line, format!("raster data truncated: need {n} samples")))?;
            let raw = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| {
                    perr(
                        line,
                        format!("invalid sample {:?}", String::from_utf8_lossy(tok)),
                    )
                })?;
            if raw as usize > maxval {
                return Err(perr(line, format!("sample {raw} exceeds maxval {maxval}")));
            }
            values.push(raw as f64 / maxval as f64);
        }
    }
    let spec = GridSpec::with_default_dims(nx, ny)?;
    DensityGrid::new(spec, values)
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<DensityGrid, RasterError> {
    let perr = |line: usize, message: String| RasterError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| perr(0, format!("not UTF-8: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                perr(lineno + 1, format!("field {} is not a number: {field:?}", col + 1))
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(perr(
                    lineno + 1,
                    format!("value {v} in field {} outside [0, 1]", col + 1),
                ));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(perr(
                    lineno + 1,
                    format!("ragged row: {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(perr(1, "no data rows".into()));
    }
    let nx = rows[0].len();
    let ny = rows.len();
    let spec = GridSpec::with_default_dims(nx, ny)?;
    DensityGrid::new(spec, rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(nx: usize, ny: usize, values: &[f64]) -> DensityGrid {
        DensityGrid::new(GridSpec::with_default_dims(nx, ny).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn pixel_center_round_trips() {
        let spec = GridSpec::new(7, 5, 1.4, 1.0).unwrap();
        for j in 0..5 {
            for i in 0..7 {
                let (x, y) = spec.pixel_center(i, j);
                assert_eq!(spec.pixel_at(x, y), (i, j));
            }
        }
    }

    #[test]
    fn binarize_strictly_greater() {
        let g = grid(2, 1, &[0.10, 0.11]);
        let b = binarize(&g, 0.1).unwrap();
        assert_eq!(b.values(), &[0.0, 1.0]);
    }

    #[test]
    fn binarize_rejects_bad_threshold() {
        let g = grid(1, 1, &[0.5]);
        assert!(binarize(&g, 1.5).is_err());
        assert!(binarize(&g, -0.1).is_err());
    }

    #[test]
    fn dice_basic_values() {
        let ones = grid(10, 10, &[1.0; 100]);
        assert_eq!(dice(&ones, &ones).unwrap(), 1.0);

        let mut half = vec![0.0; 100];
        for j in 0..10 {
            for i in 0..5 {
                half[j * 10 + i] = 1.0;
            }
        }
        let half = grid(10, 10, &half);
        let d = dice(&ones, &half).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-15, "dice = {d}");

        let a = grid(2, 1, &[1.0, 0.0]);
        let b = grid(2, 1, &[0.0, 1.0]);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn dice_empty_vs_empty_is_one() {
        let z = DensityGrid::zeros(GridSpec::with_default_dims(4, 4).unwrap());
        assert_eq!(dice(&z, &z).unwrap(), 1.0);
    }

    #[test]
    fn dice_shape_mismatch_errors() {
        let a = DensityGrid::zeros(GridSpec::with_default_dims(4, 4).unwrap());
        let b = DensityGrid::zeros(GridSpec::with_default_dims(4, 5).unwrap());
        assert!(dice(&a, &b).is_err());
    }

    #[test]
    fn volume_fraction_values() {
        assert_eq!(volume_fraction(&grid(10, 10, &[1.0; 100])), 1.0);
        assert_eq!(volume_fraction(&grid(10, 10, &[0.0; 100])), 0.0);
        let mut half = vec![0.0; 100];
        half[..50].fill(1.0);
        assert_eq!(volume_fraction(&grid(10, 10, &half)), 0.5);
    }

    #[test]
    fn pgm_p2_parses_with_maxval_normalization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, "P2\n# comment\n2 2\n255\n255 0\n0 255\n").unwrap();
        let g = load_grid(&path, GridFormat::Pgm).unwrap();
        assert_eq!(g.values(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pgm_malformed_header_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        std::fs::write(&path, "P2\n2 x\n255\n0 0 0 0\n").unwrap();
        let err = load_grid(&path, GridFormat::Pgm).unwrap_err();
        match err {
            RasterError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pgm_truncated_raster_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\n\x00\x01".as_slice()).unwrap();
        assert!(load_grid(&path, GridFormat::Pgm).is_err());
    }

    #[test]
    fn save_extremes_quantize_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let zeros = DensityGrid::zeros(GridSpec::with_default_dims(3, 2).unwrap());
        let ones = grid(3, 2, &[1.0; 6]);
        for (name, g, byte) in [("z.pgm", &zeros, 0u8), ("o.pgm", &ones, 255u8)] {
            let path = dir.path().join(name);
            save_grid(g, &path, GridFormat::Pgm).unwrap();
            let bytes = std::fs::read(&path).unwrap();
            let data = &bytes[bytes.len() - 6..];
            assert!(data.iter().all(|&b| b == byte));
            let back = load_grid(&path, GridFormat::Pgm).unwrap();
            assert_eq!(back.values(), g.values());
        }
    }

    #[test]
    fn csv_parses_example() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        std::fs::write(&path, "0.5,0.25\n1.0,0.0\n").unwrap();
        let g = load_grid(&path, GridFormat::Csv).unwrap();
        assert_eq!(g.spec().nx(), 2);
        assert_eq!(g.spec().ny(), 2);
        assert_eq!(g.values(), &[0.5, 0.25, 1.0, 0.0]);
    }

    #[test]
    fn csv_range_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "0.5,0.5\n0.5,1.5\n").unwrap();
        match load_grid(&path, GridFormat::Csv).unwrap_err() {
            RasterError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn prop_dice_symmetric_and_bounded(
            values_a in proptest::collection::vec(0.0f64..=1.0, 12),
            values_b in proptest::collection::vec(0.0f64..=1.0, 12),
        ) {
            let a = grid(4, 3, &values_a);
            let b = grid(4, 3, &values_b);
            let dab = dice(&a, &b).unwrap();
            let dba = dice(&b, &a).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert!((0.0..=1.0).contains(&dab));
        }

        #[test]
        fn prop_binary_dice_one_iff_equal(
            bits_a in proptest::collection::vec(proptest::bool::ANY, 12),
            bits_b in proptest::collection::vec(proptest::bool::ANY, 12),
        ) {
            let va: Vec<f64> = bits_a.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let vb: Vec<f64> = bits_b.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let d = dice(&grid(4, 3, &va), &grid(4, 3, &vb)).unwrap();
            prop_assert_eq!(d == 1.0, va == vb);
        }

        #[test]
        fn prop_binarize_idempotent_and_binary(
            values in proptest::collection::vec(0.0f64..=1.0, 16),
            threshold in 0.0f64..=1.0,
        ) {
            let g = grid(4, 4, &values);
            let b1 = binarize(&g, threshold).unwrap();
            prop_assert!(b1.is_binary());
            let b2 = binarize(&b1, threshold).unwrap();
            prop_assert_eq!(b1.values(), b2.values());
        }

        #[test]
        fn prop_volume_nonincreasing_in_threshold(
            values in proptest::collection::vec(0.0f64..=1.0, 16),
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let g = grid(4, 4, &values);
            let v_lo = volume_fraction(&binarize(&g, lo).unwrap());
            let v_hi = volume_fraction(&binarize(&g, hi).unwrap());
            prop_assert!(v_hi <= v_lo);
        }

        #[test]
        fn prop_pgm_round_trip_error_bounded(
            values in proptest::collection::vec(0.0f64..=1.0, 9),
        ) {
            let g = grid(3, 3, &values);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.pgm");
            save_grid(&g, &path, GridFormat::Pgm).unwrap();
            let back = load_grid(&path, GridFormat::Pgm).unwrap();
            for (a, b) in g.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }

        #[test]
        fn prop_csv_round_trip_exact(
            values in proptest::collection::vec(0.0f64..=1.0, 9),
        ) {
            let g = grid(3, 3, &values);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            save_grid(&g, &path, GridFormat::Csv).unwrap();
            let back = load_grid(&path, GridFormat::Csv).unwrap();
            prop_assert_eq!(g.values(), back.values());
        }
    }
}
