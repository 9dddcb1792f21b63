//! Pattern simulation: exact draws for Poisson models and birth–death
//! Metropolis–Hastings for Gibbs models.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::models::{LogLinearIntensity, ModelSpec};
use crate::rng::RngStream;

/// Cells per axis of the piecewise-constant rejection envelope.
const ENVELOPE_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Empty,
    PoissonMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_iterations: u64,
    pub p_birth: f64,
    pub initial_state: InitialState,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iterations: 100_000,
            p_birth: 0.5,
            initial_state: InitialState::PoissonMatched,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidConfig("n_iterations must be at least 1".into()));
        }
        if !(self.p_birth > 0.0 && self.p_birth < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_birth must lie strictly between 0 and 1, got {}",
                self.p_birth
            )));
        }
        Ok(())
    }
}

/// Draws independent patterns from a fixed model on a fixed window.
pub trait PatternSampler: Send + Sync {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> PointPattern;

    fn sample_stream(&self, stream: RngStream) -> PointPattern {
        self.sample(&mut stream.rng())
    }
}

/// Exact sampler for an inhomogeneous Poisson process: `N ~ Poisson(Λ(W))`
/// and i.i.d. locations with density `λ / Λ(W)`.
///
/// Locations are drawn by rejection from a piecewise-constant envelope. Each
/// envelope cell bounds `λ` by its value at the cell centre times
/// `exp(G h)`, where `G` bounds `|∇ log λ|` on the window and `h` is the cell
/// half-diagonal, so the envelope dominates `λ` everywhere.
#[derive(Debug, Clone)]
pub struct ExactPoissonSampler {
    intensity: LogLinearIntensity,
    window: Window,
    mass: f64,
    cell_w: f64,
    cell_h: f64,
    bounds: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ExactPoissonSampler {
    pub fn new(intensity: LogLinearIntensity, window: Window) -> Self {
        let mass = crate::models::integrate_log_linear(&intensity, &window);
        let n = ENVELOPE_CELLS;
        let cell_w = window.width() / n as f64;
        let cell_h = window.height() / n as f64;
        let (mut bounds, mut cumulative) = (Vec::new(), Vec::new());
        if mass > 0.0 {
            let slack = log_gradient_bound(&intensity, &window) * 0.5 * cell_w.hypot(cell_h);
            let mut acc = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let c = Point::new(
                        window.x_min + (i as f64 + 0.5) * cell_w,
                        window.y_min + (j as f64 + 0.5) * cell_h,
                    );
                    let b = (intensity.log_value(c) + slack).exp();
                    bounds.push(b);
                    acc += b * cell_w * cell_h;
                    cumulative.push(acc);
                }
            }
        }
        Self {
            intensity,
            window,
            mass,
            cell_w,
            cell_h,
            bounds,
            cumulative,
        }
    }

    pub fn expected_count(&self) -> f64 {
        self.mass
    }

    fn location<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let total = *self.cumulative.last().expect("non-empty envelope");
        loop {
            let target = rng.random::<f64>() * total;
            let c = self.cumulative.partition_point(|&m| m <= target).min(self.bounds.len() - 1);
            let (i, j) = (c % ENVELOPE_CELLS, c / ENVELOPE_CELLS);
            let u = Point::new(
                (self.window.x_min + (i as f64 + rng.random::<f64>()) * self.cell_w).min(self.window.x_max),
                (self.window.y_min + (j as f64 + rng.random::<f64>()) * self.cell_h).min(self.window.y_max),
            );
            if rng.random::<f64>() * self.bounds[c] <= self.intensity.value(u) {
                return u;
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PointPattern {
        if self.mass <= 0.0 {
            return PointPattern::empty(self.window);
        }
        let n = Poisson::new(self.mass).expect("finite positive mean").sample(rng) as usize;
        let points = (0..n).map(|_| self.location(rng)).collect();
        PointPattern::from_trusted(self.window, points)
    }
}

impl PatternSampler for ExactPoissonSampler {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> PointPattern {
        self.draw(rng)
    }

    fn sample_stream(&self, stream: RngStream) -> PointPattern {
        self.draw(&mut stream.rng())
    }
}

/// Upper bound on `|∇ log λ|` over the window, from term-wise bounds on the
/// partial derivatives of each monomial.
fn log_gradient_bound(intensity: &LogLinearIntensity, window: &Window) -> f64 {
    let mx = window.x_min.abs().max(window.x_max.abs());
    let my = window.y_min.abs().max(window.y_max.abs());
    let (mut gx, mut gy) = (0.0, 0.0);
    for (t, c) in intensity.basis().iter().zip(intensity.theta()) {
        if t.is_constant() {
            continue;
        }
        if t.px > 0 {
            gx += c.abs() * t.px as f64 * mx.powi(t.px as i32 - 1) * my.powi(t.py as i32);
        }
        if t.py > 0 {
            gy += c.abs() * t.py as f64 * mx.powi(t.px as i32) * my.powi(t.py as i32 - 1);
        }
    }
    f64::hypot(gx, gy)
}

#[inline]
fn uniform_point<R: Rng + ?Sized>(window: &Window, rng: &mut R) -> Point {
    Point::new(
        window.x_min + rng.random::<f64>() * window.width(),
        window.y_min + rng.random::<f64>() * window.height(),
    )
}

/// Birth–death Metropolis–Hastings sampler for any [`PointProcess`].
///
/// Each call runs one independent chain of `n_iterations` steps and returns
/// its final state.
///
/// [`PointProcess`]: crate::models::PointProcess
#[derive(Debug)]
pub struct BirthDeathSampler {
    model: ModelSpec,
    window: Window,
    cfg: McmcConfig,
    activity: LogLinearIntensity,
    log_gamma: f64,
    initial: Option<ExactPoissonSampler>,
}

impl BirthDeathSampler {
    pub fn new(model: ModelSpec, window: Window, cfg: McmcConfig) -> Result<Self> {
        cfg.validate()?;
        let activity = model.activity();
        let initial = match cfg.initial_state {
            InitialState::Empty => None,
            InitialState::PoissonMatched => Some(ExactPoissonSampler::new(activity.clone(), window)),
        };
        let log_gamma = model.process().log_gamma();
        Ok(Self {
            model,
            window,
            cfg,
            activity,
            log_gamma,
            initial,
        })
    }

    /// Log conditional intensity at `u` given the neighbour counts of its
    /// r-neighbours.
    #[inline]
    fn log_lambda(&self, u: Point, counts: &[u32]) -> f64 {
        let inc = self.model.process().interaction_increment(counts);
        let interaction = if inc == 0.0 { 0.0 } else { inc * self.log_gamma };
        self.activity.log_value(u) + interaction
    }

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let mut state = ChainState::new(self.window, self.model.process().interaction_radius());
        let Some(init) = &self.initial else {
            return state;
        };
        // Poisson draw from the activity, thinned point by point with the
        // interaction factor (capped at 1) so hard-core constraints hold.
        let start = init.draw(rng);
        let mut scratch = Scratch::default();
        for &u in start.points() {
            state.neighbors_of(u, None, &mut scratch);
            let log_ratio = self.log_lambda(u, &scratch.counts) - self.activity.log_value(u);
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                state.insert(u, &scratch.neighbors);
            }
        }
        state
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> PointPattern {
        let mut state = self.initial_state(rng);
        let p = self.cfg.p_birth;
        let log_birth_scale = (self.window.area() * (1.0 - p) / p).ln();
        let mut ln_n = LnTable::default();
        let mut scratch = Scratch::default();
        for _ in 0..self.cfg.n_iterations {
            let n = state.len();
            if rng.random::<f64>() < p {
                let u = uniform_point(&self.window, rng);
                state.neighbors_of(u, None, &mut scratch);
                let log_r = self.log_lambda(u, &scratch.counts) + log_birth_scale - ln_n.get(n + 1);
                if accept(log_r, rng) {
                    state.insert(u, &scratch.neighbors);
                }
            } else {
                if n == 0 {
                    continue;
                }
                let i = rng.random_range(0..n);
                let u = state.points[i];
                state.neighbors_of(u, Some(i), &mut scratch);
                // neighbour counts in the configuration without point i
                for c in scratch.counts.iter_mut() {
                    *c -= 1;
                }
                let log_r = ln_n.get(n) - self.log_lambda(u, &scratch.counts) - log_birth_scale;
                if accept(log_r, rng) {
                    state.remove(i, &scratch.neighbors);
                }
            }
        }
        PointPattern::from_trusted(self.window, state.points)
    }
}

/// Memoised `ln n`.
#[derive(Default)]
struct LnTable(Vec<f64>);

impl LnTable {
    #[inline]
    fn get(&mut self, n: usize) -> f64 {
        while self.0.len() <= n {
            self.0.push((self.0.len() as f64).ln());
        }
        self.0[n]
    }
}

#[inline]
fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio == f64::NEG_INFINITY || log_ratio.is_nan() {
        return false;
    }
    rng.random::<f64>() < log_ratio.exp()
}

impl PatternSampler for BirthDeathSampler {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> PointPattern {
        self.run(rng)
    }

    fn sample_stream(&self, stream: RngStream) -> PointPattern {
        self.run(&mut stream.rng())
    }
}

#[derive(Default)]
struct Scratch {
    neighbors: Vec<u32>,
    counts: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    x: f64,
    y: f64,
    index: u32,
}

/// Mutable configuration with a bucket grid and per-point neighbour counts.
struct ChainState {
    radius: Option<f64>,
    r2: f64,
    x0: f64,
    y0: f64,
    inv_cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<Slot>>,
    points: Vec<Point>,
    counts: Vec<u32>,
    cell_of: Vec<u32>,
    slot_of: Vec<u32>,
}

const MAX_BUCKETS_PER_AXIS: usize = 512;

impl ChainState {
    fn new(window: Window, radius: Option<f64>) -> Self {
        let (cell, nx, ny) = match radius {
            Some(r) => {
                let span = window.width().max(window.height());
                let cell = (r * (1.0 + 1e-9)).max(span / MAX_BUCKETS_PER_AXIS as f64);
                (
                    cell,
                    ((window.width() / cell).ceil() as usize).max(1),
                    ((window.height() / cell).ceil() as usize).max(1),
                )
            }
            None => (window.width().max(window.height()), 1, 1),
        };
        Self {
            radius,
            r2: radius.map_or(0.0, |r| r * r),
            x0: window.x_min,
            y0: window.y_min,
            inv_cell: 1.0 / cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
            points: Vec::new(),
            counts: Vec::new(),
            cell_of: Vec::new(),
            slot_of: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    fn coords(&self, u: Point) -> (usize, usize) {
        let cx = (((u.x - self.x0) * self.inv_cell) as usize).min(self.nx - 1);
        let cy = (((u.y - self.y0) * self.inv_cell) as usize).min(self.ny - 1);
        (cx, cy)
    }

    /// Fills `scratch` with the r-neighbours of `u` (excluding `skip`) and
    /// their current neighbour counts.
    #[inline]
    fn neighbors_of(&self, u: Point, skip: Option<usize>, scratch: &mut Scratch) {
        scratch.neighbors.clear();
        scratch.counts.clear();
        if self.radius.is_none() {
            return;
        }
        // cells are slightly wider than r, so a 3x3 block covers the disc
        let (cx, cy) = self.coords(u);
        let x_lo = cx.saturating_sub(1);
        let x_hi = (cx + 1).min(self.nx - 1);
        let y_lo = cy.saturating_sub(1);
        let y_hi = (cy + 1).min(self.ny - 1);
        let skip = skip.map_or(u32::MAX, |s| s as u32);
        for gy in y_lo..=y_hi {
            let row = gy * self.nx;
            for bucket in &self.buckets[row + x_lo..=row + x_hi] {
                for slot in bucket {
                    let (dx, dy) = (slot.x - u.x, slot.y - u.y);
                    if dx * dx + dy * dy <= self.r2 && slot.index != skip {
                        scratch.neighbors.push(slot.index);
                        scratch.counts.push(self.counts[slot.index as usize]);
                    }
                }
            }
        }
    }

    fn insert(&mut self, u: Point, neighbors: &[u32]) {
        let idx = self.points.len() as u32;
        let (cx, cy) = self.coords(u);
        let c = cy * self.nx + cx;
        self.slot_of.push(self.buckets[c].len() as u32);
        self.buckets[c].push(Slot {
            x: u.x,
            y: u.y,
            index: idx,
        });
        self.cell_of.push(c as u32);
        self.points.push(u);
        self.counts.push(neighbors.len() as u32);
        for &j in neighbors {
            self.counts[j as usize] += 1;
        }
    }

    fn remove(&mut self, i: usize, neighbors: &[u32]) {
        for &j in neighbors {
            self.counts[j as usize] -= 1;
        }
        // detach i from its bucket
        let c = self.cell_of[i] as usize;
        let slot = self.slot_of[i] as usize;
        self.buckets[c].swap_remove(slot);
        if let Some(moved) = self.buckets[c].get(slot) {
            self.slot_of[moved.index as usize] = slot as u32;
        }
        // move the last point into position i
        let last = self.points.len() - 1;
        if i != last {
            let lc = self.cell_of[last] as usize;
            let ls = self.slot_of[last] as usize;
            self.buckets[lc][ls].index = i as u32;
        }
        self.points.swap_remove(i);
        self.counts.swap_remove(i);
        self.cell_of.swap_remove(i);
        self.slot_of.swap_remove(i);
    }
}

/// Builds the sampler appropriate for the model's family.
pub fn sampler_for(
    model: &ModelSpec,
    window: Window,
    cfg: &McmcConfig,
) -> Result<Box<dyn PatternSampler>> {
    Ok(match model {
        ModelSpec::Poisson(m) => Box::new(ExactPoissonSampler::new(m.intensity.clone(), window)),
        gibbs => Box::new(BirthDeathSampler::new(gibbs.clone(), window, *cfg)?),
    })
}

pub fn sample_poisson(model: &ModelSpec, window: Window, stream: RngStream) -> Result<PointPattern> {
    let m = model.as_poisson().ok_or_else(|| {
        Error::InvalidModel(format!("exact sampling needs a Poisson model, got {}", model.family()))
    })?;
    Ok(ExactPoissonSampler::new(m.intensity.clone(), window).sample_stream(stream))
}

pub fn sample_gibbs(
    model: &ModelSpec,
    window: Window,
    cfg: &McmcConfig,
    stream: RngStream,
) -> Result<PointPattern> {
    Ok(BirthDeathSampler::new(model.clone(), window, *cfg)?.sample_stream(stream))
}

/// `k` independent patterns; replicate `i` uses `RngStream(master_seed, i)`,
/// so the output does not depend on scheduling.
pub fn sample_batch(
    model: &ModelSpec,
    window: Window,
    k: usize,
    cfg: &McmcConfig,
    master_seed: u64,
) -> Result<Vec<PointPattern>> {
    if k == 0 {
        return Err(Error::InvalidConfig("replicate count must be at least 1".into()));
    }
    let sampler = sampler_for(model, window, cfg)?;
    Ok(batch_from(sampler.as_ref(), k, master_seed))
}

pub fn batch_from(sampler: &dyn PatternSampler, k: usize, master_seed: u64) -> Vec<PointPattern> {
    (0..k as u64)
        .into_par_iter()
        .map(|i| sampler.sample_stream(RngStream::new(master_seed, i)))
        .collect()
}
