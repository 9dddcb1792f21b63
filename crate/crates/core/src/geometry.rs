//! Observation windows, point patterns, pixel grids and the counting
//! statistics built on top of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned rectangular observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidWindow(format!(
                "[{x_min}, {x_max}] x [{y_min}, {y_max}] is not a proper rectangle"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn unit_square() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Boundary-inclusive membership.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// A finite set of points observed in a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    window: Window,
    points: Vec<Point>,
}

impl PointPattern {
    pub fn new(window: Window, points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::PointOutsideWindow { x: p.x, y: p.y });
        }
        Ok(Self { window, points })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            window,
            points: Vec::new(),
        }
    }

    /// Caller guarantees every point lies in `window`.
    pub(crate) fn from_trusted(window: Window, points: Vec<Point>) -> Self {
        debug_assert!(points.iter().all(|p| window.contains(*p)));
        Self { window, points }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_point(&self, u: Point) -> Result<Self> {
        let mut points = self.points.clone();
        points.push(u);
        Self::new(self.window, points)
    }

    pub fn without_index(&self, i: usize) -> Self {
        let mut points = self.points.clone();
        points.remove(i);
        Self {
            window: self.window,
            points,
        }
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

/// Partition of a window into `nx * ny` equal rectangular pixels.
///
/// Pixel `s` has column `s % nx` and row `s / nx`; row 0 is at `y_min`.
/// Each pixel is half-open `[x_lo, x_hi) x [y_lo, y_hi)` except along the
/// window's right and top edges, which are closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
}

impl PixelGrid {
    pub fn new(window: Window, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!(
                "pixel counts must be positive, got {nx} x {ny}"
            )));
        }
        Ok(Self { window, nx, ny })
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn pixel_width(&self) -> f64 {
        self.window.width() / self.nx as f64
    }

    pub fn pixel_height(&self) -> f64 {
        self.window.height() / self.ny as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.window.area() / self.n_pixels() as f64
    }

    pub fn column(&self, s: usize) -> usize {
        s % self.nx
    }

    pub fn row(&self, s: usize) -> usize {
        s / self.nx
    }

    fn axis_index(v: f64, lo: f64, width: f64, n: usize) -> usize {
        let k = ((v - lo) / width * n as f64).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(n - 1)
        }
    }

    /// Pixel containing `p`, or `None` if `p` is outside the window.
    pub fn pixel_of(&self, p: Point) -> Option<usize> {
        if !self.window.contains(p) {
            return None;
        }
        let w = &self.window;
        let ix = Self::axis_index(p.x, w.x_min, w.width(), self.nx);
        let iy = Self::axis_index(p.y, w.y_min, w.height(), self.ny);
        Some(iy * self.nx + ix)
    }

    pub fn pixel_window(&self, s: usize) -> Window {
        let (ix, iy) = (self.column(s) as f64, self.row(s) as f64);
        let (pw, ph) = (self.pixel_width(), self.pixel_height());
        let w = &self.window;
        let x_max = if self.column(s) + 1 == self.nx {
            w.x_max
        } else {
            w.x_min + (ix + 1.0) * pw
        };
        let y_max = if self.row(s) + 1 == self.ny {
            w.y_max
        } else {
            w.y_min + (iy + 1.0) * ph
        };
        Window {
            x_min: w.x_min + ix * pw,
            x_max,
            y_min: w.y_min + iy * ph,
            y_max,
        }
    }
}

/// Per-pixel point counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountVector {
    pub grid: PixelGrid,
    pub counts: Vec<u64>,
}

impl CountVector {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn pixel_counts(pattern: &PointPattern, grid: &PixelGrid) -> Result<CountVector> {
    if pattern.window() != &grid.window {
        return Err(Error::WindowMismatch);
    }
    let mut counts = vec![0u64; grid.n_pixels()];
    for p in pattern.points() {
        if let Some(s) = grid.pixel_of(*p) {
            counts[s] += 1;
        }
    }
    Ok(CountVector {
        grid: *grid,
        counts,
    })
}

/// Bucket index answering fixed-radius neighbour queries.
///
/// All close-pair queries in the crate go through [`NeighborIndex::for_each_within`].
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    points: &'a [Point],
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    order: Vec<usize>,
}

const MAX_CELLS_PER_AXIS: usize = 1024;

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a [Point], window: &Window, r: f64) -> Self {
        let span = window.width().max(window.height());
        let cell = r.max(span / MAX_CELLS_PER_AXIS as f64);
        let nx = ((window.width() / cell).ceil() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let ny = ((window.height() / cell).ceil() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let mut index = Self {
            points,
            x0: window.x_min,
            y0: window.y_min,
            cell,
            nx,
            ny,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|p| index.cell_of(*p)).collect();
        let mut starts = vec![0usize; nx * ny + 1];
        for &c in &cells {
            starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut order = vec![0usize; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        index.starts = starts;
        index.order = order;
        index
    }

    fn cell_coords(&self, p: Point) -> (usize, usize) {
        let cx = ((p.x - self.x0) / self.cell).floor().max(0.0) as usize;
        let cy = ((p.y - self.y0) / self.cell).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    fn cell_of(&self, p: Point) -> usize {
        let (cx, cy) = self.cell_coords(p);
        cy * self.nx + cx
    }

    /// Calls `f(j)` for every indexed point `j != skip` with `|p_j - u| <= r`.
    pub fn for_each_within(&self, u: Point, r: f64, skip: Option<usize>, mut f: impl FnMut(usize)) {
        let r2 = r * r;
        let reach = (r / self.cell).ceil() as isize;
        let (cx, cy) = self.cell_coords(u);
        let (cx, cy) = (cx as isize, cy as isize);
        for gy in (cy - reach).max(0)..=(cy + reach).min(self.ny as isize - 1) {
            for gx in (cx - reach).max(0)..=(cx + reach).min(self.nx as isize - 1) {
                let c = gy as usize * self.nx + gx as usize;
                for &j in &self.order[self.starts[c]..self.starts[c + 1]] {
                    if Some(j) != skip && self.points[j].dist2(&u) <= r2 {
                        f(j);
                    }
                }
            }
        }
    }

    pub fn count_within(&self, u: Point, r: f64, skip: Option<usize>) -> usize {
        let mut n = 0;
        self.for_each_within(u, r, skip, |_| n += 1);
        n
    }
}

/// Number of other points within distance `r` of each point.
pub fn neighbor_counts(pattern: &PointPattern, r: f64) -> Vec<usize> {
    let index = NeighborIndex::new(pattern.points(), pattern.window(), r);
    pattern
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| index.count_within(*p, r, Some(i)))
        .collect()
}

/// Number of unordered pairs at distance at most `r`.
pub fn pair_count(pattern: &PointPattern, r: f64) -> u64 {
    let total: usize = neighbor_counts(pattern, r).iter().sum();
    (total / 2) as u64
}

/// Sum over points of the neighbour count within `r`, each capped at `alpha`.
pub fn saturation_statistic(pattern: &PointPattern, r: f64, alpha: f64) -> f64 {
    neighbor_counts(pattern, r)
        .into_iter()
        .map(|c| (c as f64).min(alpha))
        .sum()
}
