//! Point process models: Poisson, Strauss and Geyer saturation.
//!
//! Every family implements [`PointProcess`]. The conditional intensity of all
//! three families at a location `u` depends on the configuration only through
//! the r-neighbours of `u` and their current neighbour counts, which is what
//! [`PointProcess::log_papangelou_local`] consumes. The MCMC sampler and the
//! pseudolikelihood fit both go through that single entry point.
//!
//! Normalising constants of the Gibbs densities are never computed; their log
//! densities are defined up to an additive constant.

mod basis;
mod json;
pub mod quadrature;

use std::fmt;

pub use basis::{default_basis, parse_basis, LogLinearIntensity, Term};
pub use json::ModelParams;

use crate::error::{Error, Result};
use crate::geometry::{neighbor_counts, NeighborIndex, Point, PointPattern, Window};
use quadrature::{Quadrature, DEFAULT_GL_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Poisson,
    Strauss,
    Geyer,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Strauss => "strauss",
            Family::Geyer => "geyer",
        }
    }

    pub fn is_gibbs(&self) -> bool {
        !matches!(self, Family::Poisson)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Behaviour shared by every model family.
pub trait PointProcess: Send + Sync + fmt::Debug {
    fn family(&self) -> Family;

    /// Log of the first-order (trend / activity) term at `u`.
    fn log_activity(&self, u: Point) -> f64;

    /// Interaction radius, `None` for models without interaction.
    fn interaction_radius(&self) -> Option<f64> {
        None
    }

    fn log_gamma(&self) -> f64 {
        0.0
    }

    /// Change in the interaction statistic (the exponent of gamma) when a
    /// point is added whose r-neighbours currently have the given neighbour
    /// counts.
    fn interaction_increment(&self, _neighbor_counts: &[u32]) -> f64 {
        0.0
    }

    /// Unnormalised log density of `pattern` (exact for Poisson).
    fn log_density(&self, pattern: &PointPattern) -> f64;

    /// Log conditional intensity of adding `u`, given the neighbour counts
    /// of the r-neighbours of `u`.
    #[inline]
    fn log_papangelou_local(&self, u: Point, neighbor_counts: &[u32]) -> f64 {
        let inc = self.interaction_increment(neighbor_counts);
        let interaction = if inc == 0.0 { 0.0 } else { inc * self.log_gamma() };
        self.log_activity(u) + interaction
    }

    /// Conditional intensity `p(pattern + u) / p(pattern)`. If `u` is already
    /// in the pattern, it is removed first.
    fn papangelou(&self, u: Point, pattern: &PointPattern) -> f64 {
        let Some(r) = self.interaction_radius() else {
            return self.log_activity(u).exp();
        };
        let pts = pattern.points();
        let skip = pts.iter().position(|p| *p == u);
        let index = NeighborIndex::new(pts, pattern.window(), r);
        let mut counts = Vec::new();
        index.for_each_within(u, r, skip, |j| {
            let mut c = 0u32;
            index.for_each_within(pts[j], r, Some(j), |k| {
                if Some(k) != skip {
                    c += 1;
                }
            });
            counts.push(c);
        });
        self.log_papangelou_local(u, &counts).exp()
    }
}

/// Inhomogeneous Poisson process with log-linear intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonModel {
    pub intensity: LogLinearIntensity,
}

impl PoissonModel {
    pub fn new(intensity: LogLinearIntensity) -> Self {
        Self { intensity }
    }

    pub fn homogeneous(level: f64) -> Result<Self> {
        Ok(Self::new(LogLinearIntensity::constant(level)?))
    }

    pub fn integrate(&self, region: &Window) -> f64 {
        integrate_log_linear(&self.intensity, region)
    }
}

impl PointProcess for PoissonModel {
    fn family(&self) -> Family {
        Family::Poisson
    }

    fn log_activity(&self, u: Point) -> f64 {
        self.intensity.log_value(u)
    }

    fn log_density(&self, pattern: &PointPattern) -> f64 {
        let w = pattern.window();
        let sum_log: f64 = pattern
            .points()
            .iter()
            .map(|p| self.intensity.log_value(*p))
            .sum();
        w.area() - self.integrate(w) + sum_log
    }
}

/// Strauss process with log-linear activity `b(u)`; `0 <= gamma <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StraussModel {
    pub activity: LogLinearIntensity,
    pub gamma: f64,
    pub r: f64,
}

impl StraussModel {
    pub fn new(activity: LogLinearIntensity, gamma: f64, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!(
                "gamma: Strauss interaction must satisfy 0 <= gamma <= 1, got {gamma}"
            )));
        }
        check_radius(r)?;
        Ok(Self { activity, gamma, r })
    }
}

impl PointProcess for StraussModel {
    fn family(&self) -> Family {
        Family::Strauss
    }

    fn log_activity(&self, u: Point) -> f64 {
        self.activity.log_value(u)
    }

    fn interaction_radius(&self) -> Option<f64> {
        Some(self.r)
    }

    fn log_gamma(&self) -> f64 {
        self.gamma.ln()
    }

    fn interaction_increment(&self, neighbor_counts: &[u32]) -> f64 {
        neighbor_counts.len() as f64
    }

    fn log_density(&self, pattern: &PointPattern) -> f64 {
        let s = crate::geometry::pair_count(pattern, self.r);
        let interaction = if s == 0 { 0.0 } else { s as f64 * self.log_gamma() };
        let trend: f64 = pattern
            .points()
            .iter()
            .map(|p| self.activity.log_value(*p))
            .sum();
        interaction + trend
    }
}

/// Homogeneous Geyer saturation process.
#[derive(Debug, Clone, PartialEq)]
pub struct GeyerModel {
    pub beta: f64,
    pub gamma: f64,
    pub r: f64,
    pub alpha: f64,
}

impl GeyerModel {
    pub fn new(beta: f64, gamma: f64, r: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidModel(format!("beta: must be positive, got {beta}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidModel(format!("gamma: must be positive, got {gamma}")));
        }
        check_radius(r)?;
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::InvalidModel(format!(
                "alpha: saturation threshold must be nonnegative, got {alpha}"
            )));
        }
        Ok(Self {
            beta,
            gamma,
            r,
            alpha,
        })
    }

    #[inline]
    fn capped(&self, c: u32) -> f64 {
        (c as f64).min(self.alpha)
    }
}

impl PointProcess for GeyerModel {
    fn family(&self) -> Family {
        Family::Geyer
    }

    fn log_activity(&self, _u: Point) -> f64 {
        self.beta.ln()
    }

    fn interaction_radius(&self) -> Option<f64> {
        Some(self.r)
    }

    fn log_gamma(&self) -> f64 {
        self.gamma.ln()
    }

    /// Difference of the saturation statistic between the configuration with
    /// and without the new point: the new point's own capped count plus the
    /// change in each neighbour's capped count.
    fn interaction_increment(&self, neighbor_counts: &[u32]) -> f64 {
        let own = self.capped(neighbor_counts.len() as u32);
        let others: f64 = neighbor_counts
            .iter()
            .map(|&c| self.capped(c + 1) - self.capped(c))
            .sum();
        own + others
    }

    fn log_density(&self, pattern: &PointPattern) -> f64 {
        let s: f64 = neighbor_counts(pattern, self.r)
            .into_iter()
            .map(|c| self.capped(c as u32))
            .sum();
        let interaction = if s == 0.0 { 0.0 } else { s * self.log_gamma() };
        pattern.len() as f64 * self.beta.ln() + interaction
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("r: interaction radius must be positive, got {r}")))
    }
}

/// Integral of a log-linear intensity over a rectangle by Gauss–Legendre quadrature.
pub fn integrate_log_linear(intensity: &LogLinearIntensity, region: &Window) -> f64 {
    integrate_log_linear_with(intensity, region, DEFAULT_GL_ORDER)
}

pub fn integrate_log_linear_with(
    intensity: &LogLinearIntensity,
    region: &Window,
    order: usize,
) -> f64 {
    if intensity.log_value(Point::new(region.x_min, region.y_min)) == f64::NEG_INFINITY {
        return 0.0;
    }
    Quadrature::gauss_legendre(region, order, 1).integrate(|u| intensity.value(u))
}

/// A model of one of the supported families.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Poisson(PoissonModel),
    Strauss(StraussModel),
    Geyer(GeyerModel),
}

impl ModelSpec {
    pub fn process(&self) -> &dyn PointProcess {
        match self {
            ModelSpec::Poisson(m) => m,
            ModelSpec::Strauss(m) => m,
            ModelSpec::Geyer(m) => m,
        }
    }

    pub fn family(&self) -> Family {
        self.process().family()
    }

    pub fn as_poisson(&self) -> Option<&PoissonModel> {
        match self {
            ModelSpec::Poisson(m) => Some(m),
            _ => None,
        }
    }

    /// The model's first-order term as a log-linear intensity.
    pub fn activity(&self) -> LogLinearIntensity {
        match self {
            ModelSpec::Poisson(m) => m.intensity.clone(),
            ModelSpec::Strauss(m) => m.activity.clone(),
            ModelSpec::Geyer(m) => LogLinearIntensity::constant(m.beta).unwrap(),
        }
    }
}

impl From<PoissonModel> for ModelSpec {
    fn from(m: PoissonModel) -> Self {
        ModelSpec::Poisson(m)
    }
}

impl From<StraussModel> for ModelSpec {
    fn from(m: StraussModel) -> Self {
        ModelSpec::Strauss(m)
    }
}

impl From<GeyerModel> for ModelSpec {
    fn from(m: GeyerModel) -> Self {
        ModelSpec::Geyer(m)
    }
}

/// `lambda(u)` of a Poisson model, or the activity term of a Gibbs model.
pub fn intensity_at(model: &ModelSpec, u: Point) -> f64 {
    model.process().log_activity(u).exp()
}

/// Expected count of a Poisson model over `region`.
pub fn integrate_intensity(model: &ModelSpec, region: &Window) -> Result<f64> {
    match model {
        ModelSpec::Poisson(m) => Ok(m.integrate(region)),
        other => Err(Error::InvalidModel(format!(
            "intensity integral is only defined for Poisson models, got {}",
            other.family()
        ))),
    }
}

pub fn log_density(model: &ModelSpec, pattern: &PointPattern) -> f64 {
    model.process().log_density(pattern)
}

pub fn papangelou(model: &ModelSpec, u: Point, pattern: &PointPattern) -> f64 {
    model.process().papangelou(u, pattern)
}
