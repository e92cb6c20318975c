//! Projected grids and the coordinate side of center-focused feature encoding:
//! point-to-grid scatter, grid-to-point gather, and confidence-gated shifting.

use serde::{Deserialize, Serialize};

use crate::domain::{add, is_finite, Point3};
use crate::error::{Error, Result};

/// Confidence gate applied before shifting points toward predicted centers.
pub const DEFAULT_SHIFT_GATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridView {
    /// rows from x, cols from y (meters)
    BevCartesian,
    /// rows from radius sqrt(x^2 + y^2) (meters), cols from atan2(y, x) (radians)
    Polar,
    /// rows from elevation atan2(z, sqrt(x^2 + y^2)), cols from azimuth atan2(y, x) (radians)
    Range,
}

#[derive(Serialize, Deserialize)]
struct GridSpecDoc {
    view: GridView,
    bounds: [[f64; 2]; 2],
    shape: [usize; 2],
}

/// A 2D projection: which view, the `[min, max)` extent along the row and
/// column axes, and the `[rows, cols]` resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecDoc", into = "GridSpecDoc")]
pub struct GridSpec {
    view: GridView,
    bounds: [[f64; 2]; 2],
    shape: [usize; 2],
}

pub type Cell = [usize; 2];

impl GridSpec {
    pub fn new(view: GridView, bounds: [[f64; 2]; 2], shape: [usize; 2]) -> Result<Self> {
        for (axis, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::param(
                    "bounds",
                    format!("axis {axis} needs finite min < max, got [{lo}, {hi}]"),
                ));
            }
        }
        if shape[0] == 0 || shape[1] == 0 {
            return Err(Error::param("shape", "rows and cols must be at least 1"));
        }
        Ok(Self {
            view,
            bounds,
            shape,
        })
    }

    /// 600 x 600 bird's-eye grid over `[-extent, extent)` in x and y.
    pub fn bev(extent: f64) -> Result<Self> {
        Self::new(
            GridView::BevCartesian,
            [[-extent, extent], [-extent, extent]],
            [600, 600],
        )
    }

    /// 64 x 2048 range image covering the given elevation band and the full azimuth circle.
    pub fn range_image(elevation: [f64; 2]) -> Result<Self> {
        use std::f64::consts::PI;
        Self::new(GridView::Range, [elevation, [-PI, PI]], [64, 2048])
    }

    pub fn view(&self) -> GridView {
        self.view
    }

    pub fn bounds(&self) -> [[f64; 2]; 2] {
        self.bounds
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    fn axis_values(&self, p: Point3) -> [f64; 2] {
        match self.view {
            GridView::BevCartesian => [p[0], p[1]],
            GridView::Polar => [p[0].hypot(p[1]), p[1].atan2(p[0])],
            GridView::Range => [p[2].atan2(p[0].hypot(p[1])), p[1].atan2(p[0])],
        }
    }

    /// Continuous grid coordinates, in cell units, of an in-bounds point.
    /// Cell `(r, c)` spans `[r, r + 1) x [c, c + 1)`; its center is at `(r + 0.5, c + 0.5)`.
    pub fn continuous(&self, p: Point3) -> Option<[f64; 2]> {
        let values = self.axis_values(p);
        let mut out = [0.0; 2];
        for axis in 0..2 {
            let [lo, hi] = self.bounds[axis];
            let v = values[axis];
            if !(v >= lo && v < hi) {
                return None;
            }
            out[axis] = (v - lo) / (hi - lo) * self.shape[axis] as f64;
        }
        Some(out)
    }

    pub fn cell(&self, p: Point3) -> Option<Cell> {
        let [u, v] = self.continuous(p)?;
        // rounding can push u to exactly `rows` for values just below max
        let r = (u.floor() as usize).min(self.shape[0] - 1);
        let c = (v.floor() as usize).min(self.shape[1] - 1);
        Some([r, c])
    }
}

impl TryFrom<GridSpecDoc> for GridSpec {
    type Error = Error;

    fn try_from(doc: GridSpecDoc) -> Result<Self> {
        Self::new(doc.view, doc.bounds, doc.shape)
    }
}

impl From<GridSpec> for GridSpecDoc {
    fn from(s: GridSpec) -> Self {
        GridSpecDoc {
            view: s.view,
            bounds: s.bounds,
            shape: s.shape,
        }
    }
}

/// Cell of each point, `None` where the point falls outside the grid bounds.
pub fn point_to_cell(coords: &[Point3], spec: &GridSpec) -> Vec<Option<Cell>> {
    coords.iter().map(|&p| spec.cell(p)).collect()
}

/// Dense `rows x cols x channels` feature map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Self {
            rows,
            cols,
            channels,
            data: vec![0.0; rows * cols * channels],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        Error::check_len("grid data", rows * cols * channels, data.len())?;
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.rows, self.cols, self.channels]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> &[f32] {
        let start = (r * self.cols + c) * self.channels;
        &self.data[start..start + self.channels]
    }

    fn get_mut(&mut self, r: usize, c: usize) -> &mut [f32] {
        let start = (r * self.cols + c) * self.channels;
        &mut self.data[start..start + self.channels]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub grid: FeatureGrid,
    /// points outside the grid bounds, dropped from the scatter
    pub dropped: usize,
}

/// Point-to-grid projection: every in-bounds point folds its features into
/// its cell with an element-wise max. Cells no point reaches stay zero.
pub fn p2g_scatter(
    features: &[f32],
    channels: usize,
    coords: &[Point3],
    spec: &GridSpec,
) -> Result<Scatter> {
    Error::check_len("point features", coords.len() * channels, features.len())?;
    let mut grid = FeatureGrid::zeros(spec.rows(), spec.cols(), channels);
    let mut occupied = vec![false; spec.rows() * spec.cols()];
    let mut dropped = 0;
    for (i, &p) in coords.iter().enumerate() {
        let Some([r, c]) = spec.cell(p) else {
            dropped += 1;
            continue;
        };
        let src = &features[i * channels..(i + 1) * channels];
        let slot = &mut occupied[r * spec.cols() + c];
        let dst = grid.get_mut(r, c);
        if *slot {
            for (d, &s) in dst.iter_mut().zip(src) {
                if s > *d {
                    *d = s;
                }
            }
        } else {
            dst.copy_from_slice(src);
            *slot = true;
        }
    }
    Ok(Scatter { grid, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gather {
    /// `N x channels`, row-major
    pub features: Vec<f32>,
    pub channels: usize,
    /// points outside the grid bounds, zero-filled
    pub out_of_bounds: usize,
}

/// Grid-to-point projection. Bilinear mode blends the four cell centers around
/// each point, clamping at the grid border; nearest mode reads the containing cell.
pub fn g2p_gather(
    grid: &FeatureGrid,
    coords: &[Point3],
    spec: &GridSpec,
    mode: Interpolation,
) -> Result<Gather> {
    let [rows, cols, channels] = grid.shape();
    if rows != spec.rows() || cols != spec.cols() {
        return Err(Error::param(
            "grid",
            format!(
                "shape {rows}x{cols} does not match spec {}x{}",
                spec.rows(),
                spec.cols()
            ),
        ));
    }
    let mut out = vec![0.0f32; coords.len() * channels];
    let mut out_of_bounds = 0;
    for (i, &p) in coords.iter().enumerate() {
        let dst = &mut out[i * channels..(i + 1) * channels];
        let Some([u, v]) = spec.continuous(p) else {
            out_of_bounds += 1;
            continue;
        };
        match mode {
            Interpolation::Nearest => {
                let [r, c] = spec.cell(p).expect("in-bounds point has a cell");
                dst.copy_from_slice(grid.get(r, c));
            }
            Interpolation::Bilinear => {
                let (r0, r1, fr) = bracket(u - 0.5, rows);
                let (c0, c1, fc) = bracket(v - 0.5, cols);
                let weights = [
                    ((1.0 - fr) * (1.0 - fc), r0, c0),
                    ((1.0 - fr) * fc, r0, c1),
                    (fr * (1.0 - fc), r1, c0),
                    (fr * fc, r1, c1),
                ];
                for (ch, d) in dst.iter_mut().enumerate() {
                    let acc: f64 = weights
                        .iter()
                        .map(|&(w, r, c)| w * grid.get(r, c)[ch] as f64)
                        .sum();
                    *d = acc as f32;
                }
            }
        }
    }
    Ok(Gather {
        features: out,
        channels,
        out_of_bounds,
    })
}

// Neighboring sample indices around `s` (cell-center units) and the blend
// fraction toward the upper one, clamped to [0, n - 1].
fn bracket(s: f64, n: usize) -> (usize, usize, f64) {
    let lo = s.floor();
    let frac = s - lo;
    let clamp = |k: f64| k.max(0.0).min((n - 1) as f64) as usize;
    (clamp(lo), clamp(lo + 1.0), frac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPoints {
    pub coords: Vec<Point3>,
    pub shifted_mask: Vec<bool>,
}

/// Moves each point by its offset when its confidence is strictly above `delta`.
pub fn shift_points(
    coords: &[Point3],
    offsets: &[Point3],
    confidence: &[f64],
    delta: f64,
) -> Result<ShiftedPoints> {
    Error::check_len("offsets", coords.len(), offsets.len())?;
    Error::check_len("confidences", coords.len(), confidence.len())?;
    let mut out = Vec::with_capacity(coords.len());
    let mut mask = Vec::with_capacity(coords.len());
    for (index, ((&p, &o), &c)) in coords.iter().zip(offsets).zip(confidence).enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidConfidence { index, value: c });
        }
        let gated = c > delta;
        if gated && !is_finite(o) {
            return Err(Error::NonFinite {
                what: "offset",
                index,
            });
        }
        out.push(if gated { add(p, o) } else { p });
        mask.push(gated);
    }
    Ok(ShiftedPoints {
        coords: out,
        shifted_mask: mask,
    })
}
