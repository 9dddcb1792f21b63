//! Maximum likelihood for Poisson models and maximum pseudolikelihood for
//! Gibbs models.
//!
//! Both objectives have the same shape once the conditional intensity is
//! written as `exp(eta . x(u))`:
//!
//! ```text
//! L(eta) = sum_i eta . x(xi_i) - sum_q w_q exp(eta . x(u_q))
//! ```
//!
//! with `x(u)` the basis features (plus the interaction increment for Gibbs
//! models) and `(u_q, w_q)` a quadrature rule over the window. `L` is concave,
//! so one damped Newton solver serves every family.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{neighbor_counts, NeighborIndex, PointPattern};
use crate::models::quadrature::{Quadrature, DEFAULT_GL_ORDER};
use crate::models::{
    Family, GeyerModel, LogLinearIntensity, ModelParams, ModelSpec, PoissonModel, PointProcess,
    StraussModel, Term,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Midpoint cells per axis for the pseudolikelihood integral.
    pub quad_grid: usize,
    /// Gauss–Legendre order for the Poisson likelihood integral.
    pub gl_order: usize,
    pub max_iter: usize,
    /// Sup-norm gradient tolerance.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            quad_grid: 64,
            gl_order: DEFAULT_GL_ORDER,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelSpec,
    pub log_objective: f64,
    pub converged: bool,
    pub n_iterations: usize,
    pub gradient_norm: f64,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct FitResultJson {
    #[serde(flatten)]
    model: ModelParams,
    log_objective: f64,
    converged: bool,
    #[serde(default)]
    n_iterations: usize,
    #[serde(default)]
    gradient_norm: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl Serialize for FitResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FitResultJson {
            model: ModelParams::from(&self.model),
            log_objective: self.log_objective,
            converged: self.converged,
            n_iterations: self.n_iterations,
            gradient_norm: self.gradient_norm,
            warnings: self.warnings.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FitResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = FitResultJson::deserialize(d)?;
        Ok(FitResult {
            model: raw.model.build().map_err(serde::de::Error::custom)?,
            log_objective: raw.log_objective,
            converged: raw.converged,
            n_iterations: raw.n_iterations,
            gradient_norm: raw.gradient_norm,
            warnings: raw.warnings,
        })
    }
}

/// Fixed interaction parameters for pseudolikelihood fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub r: f64,
    pub alpha: Option<f64>,
}

/// Design of a log-linear objective: sufficient statistic of the data and
/// feature rows at the quadrature nodes.
struct Design {
    data_sum: DVector<f64>,
    quad_rows: Vec<Vec<f64>>,
    quad_weights: Vec<f64>,
}

impl Design {
    fn dim(&self) -> usize {
        self.data_sum.len()
    }

    fn objective(&self, eta: &DVector<f64>) -> f64 {
        let lin = self.data_sum.dot(eta);
        let integral: f64 = self
            .quad_rows
            .iter()
            .zip(&self.quad_weights)
            .map(|(x, w)| w * dot(x, eta).exp())
            .sum();
        lin - integral
    }

    fn gradient_hessian(&self, eta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.dim();
        let mut g = self.data_sum.clone();
        let mut info = DMatrix::<f64>::zeros(p, p);
        for (x, w) in self.quad_rows.iter().zip(&self.quad_weights) {
            let m = w * dot(x, eta).exp();
            for a in 0..p {
                g[a] -= m * x[a];
                for b in a..p {
                    info[(a, b)] += m * x[a] * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        (g, info)
    }

    /// Keeps only the listed columns, with every dropped column fixed at `fixed`.
    fn restrict(&self, keep: &[usize], fixed: &[(usize, f64)]) -> Design {
        let offset = |x: &[f64]| {
            fixed
                .iter()
                .map(|&(j, v)| if x[j] == 0.0 { 0.0 } else { x[j] * v })
                .sum::<f64>()
        };
        Design {
            data_sum: DVector::from_iterator(keep.len(), keep.iter().map(|&j| self.data_sum[j])),
            quad_rows: self
                .quad_rows
                .iter()
                .map(|x| keep.iter().map(|&j| x[j]).collect())
                .collect(),
            quad_weights: self
                .quad_rows
                .iter()
                .zip(&self.quad_weights)
                .map(|(x, w)| w * offset(x).exp())
                .collect(),
        }
    }
}

#[inline]
fn dot(x: &[f64], eta: &DVector<f64>) -> f64 {
    x.iter().zip(eta.iter()).map(|(a, b)| a * b).sum()
}

struct Solution {
    eta: DVector<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
}

fn maximize(design: &Design, start: DVector<f64>, opts: &FitOptions) -> Solution {
    let mut eta = start;
    let mut value = design.objective(&eta);
    let mut iterations = 0;
    loop {
        let (g, info) = design.gradient_hessian(&eta);
        let gnorm = g.amax();
        if gnorm < opts.tol || iterations >= opts.max_iter || !value.is_finite() {
            return Solution {
                converged: gnorm < opts.tol && value.is_finite(),
                eta,
                objective: value,
                iterations,
                gradient_norm: gnorm,
            };
        }
        iterations += 1;
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            // singular information: fall back to a scaled gradient step
            None => &g / (1.0 + info.diagonal().amax()),
        };
        // Near the optimum the predicted gain drops below the rounding noise
        // of the objective, so a line search can no longer rank the iterates.
        if g.dot(&step) < 1e-9 {
            eta += step;
            value = design.objective(&eta);
            continue;
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let trial = &eta + &step * t;
            let v = design.objective(&trial);
            if v.is_finite() && v >= value {
                eta = trial;
                value = v;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            let gnorm = design.gradient_hessian(&eta).0.amax();
            return Solution {
                converged: gnorm < opts.tol,
                eta,
                objective: value,
                iterations,
                gradient_norm: gnorm,
            };
        }
    }
}

fn zero_intensity(basis: &[Term]) -> Result<LogLinearIntensity> {
    let theta = basis
        .iter()
        .map(|t| if t.is_constant() { f64::NEG_INFINITY } else { 0.0 })
        .collect();
    LogLinearIntensity::new(basis.to_vec(), theta)
}

fn start_point(basis: &[Term], n: usize, area: f64, extra: usize) -> DVector<f64> {
    let level = ((n.max(1)) as f64 / area).ln();
    DVector::from_iterator(
        basis.len() + extra,
        basis
            .iter()
            .map(|t| if t.is_constant() { level } else { 0.0 })
            .chain(std::iter::repeat_n(0.0, extra)),
    )
}

/// Maximum likelihood fit of an inhomogeneous Poisson model.
pub fn fit_poisson(pattern: &PointPattern, basis: &[Term], opts: &FitOptions) -> Result<FitResult> {
    LogLinearIntensity::new(basis.to_vec(), vec![0.0; basis.len()])?;
    let window = pattern.window();
    if pattern.is_empty() {
        return Ok(FitResult {
            model: PoissonModel::new(zero_intensity(basis)?).into(),
            log_objective: 0.0,
            converged: false,
            n_iterations: 0,
            gradient_norm: 0.0,
            warnings: vec!["empty pattern: fitted intensity is identically zero".into()],
        });
    }
    let quad = Quadrature::gauss_legendre(window, opts.gl_order, 1);
    let features = |u| basis.iter().map(|t| t.eval(u)).collect::<Vec<f64>>();
    let mut data_sum = DVector::zeros(basis.len());
    for p in pattern.points() {
        data_sum += DVector::from_vec(features(*p));
    }
    let design = Design {
        data_sum,
        quad_rows: quad.nodes.iter().map(|u| features(*u)).collect(),
        quad_weights: quad.weights,
    };
    let sol = maximize(
        &design,
        start_point(basis, pattern.len(), window.area(), 0),
        opts,
    );
    let mut warnings = Vec::new();
    if !sol.converged {
        warnings.push(format!(
            "optimizer did not converge (gradient {:.3e}); the basis may be unbounded on this pattern",
            sol.gradient_norm
        ));
    }
    Ok(FitResult {
        model: PoissonModel::new(LogLinearIntensity::new(
            basis.to_vec(),
            sol.eta.iter().copied().collect(),
        )?)
        .into(),
        log_objective: sol.objective,
        converged: sol.converged,
        n_iterations: sol.iterations,
        gradient_norm: sol.gradient_norm,
        warnings,
    })
}

/// Maximum pseudolikelihood fit of a Strauss or Geyer model with fixed
/// interaction radius (and saturation threshold for Geyer).
pub fn fit_gibbs_mple(
    pattern: &PointPattern,
    family: Family,
    interaction: Interaction,
    basis: &[Term],
    opts: &FitOptions,
) -> Result<FitResult> {
    LogLinearIntensity::new(basis.to_vec(), vec![0.0; basis.len()])?;
    let template: ModelSpec = match family {
        Family::Strauss => StraussModel::new(
            LogLinearIntensity::new(basis.to_vec(), vec![0.0; basis.len()])?,
            1.0,
            interaction.r,
        )?
        .into(),
        Family::Geyer => {
            if basis.len() != 1 {
                return Err(Error::InvalidModel(
                    "basis: the Geyer family has a constant activity; use basis `1`".into(),
                ));
            }
            let alpha = interaction.alpha.ok_or_else(|| {
                Error::InvalidModel("alpha: required for the geyer family but missing".into())
            })?;
            GeyerModel::new(1.0, 1.0, interaction.r, alpha)?.into()
        }
        Family::Poisson => {
            return Err(Error::InvalidModel(
                "pseudolikelihood fits need a Gibbs family; use fit_poisson".into(),
            ))
        }
    };
    let process = template.process();
    let r = interaction.r;
    let window = pattern.window();
    let n = pattern.len();
    let p = basis.len();

    if n < 2 {
        // the interaction parameter is not identifiable: fit the activity alone with gamma = 1
        let trend = fit_poisson(pattern, basis, opts)?;
        let activity = match &trend.model {
            ModelSpec::Poisson(m) => m.intensity.clone(),
            _ => unreachable!(),
        };
        let model = build_gibbs(family, activity, 0.0, interaction)?;
        let mut warnings = trend.warnings;
        warnings.push(format!(
            "pattern has {n} point(s): interaction not identifiable, gamma fixed at 1"
        ));
        return Ok(FitResult {
            model,
            log_objective: trend.log_objective,
            converged: false,
            n_iterations: trend.n_iterations,
            gradient_norm: trend.gradient_norm,
            warnings,
        });
    }

    let pts = pattern.points();
    let index = NeighborIndex::new(pts, window, r);
    let counts: Vec<u32> = neighbor_counts(pattern, r).into_iter().map(|c| c as u32).collect();
    let mut scratch = Vec::new();
    let mut row = |u, skip: Option<usize>| {
        scratch.clear();
        index.for_each_within(u, r, skip, |j| {
            scratch.push(counts[j] - u32::from(skip.is_some()));
        });
        let mut x: Vec<f64> = basis.iter().map(|t| t.eval(u)).collect();
        x.push(process.interaction_increment(&scratch));
        x
    };

    let mut data_sum = DVector::zeros(p + 1);
    for (i, u) in pts.iter().enumerate() {
        data_sum += DVector::from_vec(row(*u, Some(i)));
    }
    let quad = Quadrature::midpoint(window, opts.quad_grid, opts.quad_grid);
    let design = Design {
        data_sum,
        quad_rows: quad.nodes.iter().map(|u| row(*u, None)).collect(),
        quad_weights: quad.weights,
    };

    let mut warnings = Vec::new();
    let activity_cols: Vec<usize> = (0..p).collect();
    let start = start_point(basis, n, window.area(), 1);
    let stat_in_data = design.data_sum[p];
    let stat_in_quad = design.quad_rows.iter().any(|x| x[p] > 0.0);

    let (eta, sol) = if family == Family::Strauss && stat_in_data == 0.0 && stat_in_quad {
        // no close pairs in the data: the pseudolikelihood is maximised at gamma = 0
        let reduced = design.restrict(&activity_cols, &[(p, f64::NEG_INFINITY)]);
        let sol = maximize(&reduced, start.rows(0, p).into_owned(), opts);
        warnings.push("no r-close pairs in the pattern: hard-core estimate gamma = 0".into());
        (extend(&sol.eta, f64::NEG_INFINITY), sol)
    } else {
        let sol = maximize(&design, start.clone(), opts);
        if family == Family::Strauss && sol.eta[p] > 0.0 {
            let reduced = design.restrict(&activity_cols, &[(p, 0.0)]);
            let sol = maximize(&reduced, start.rows(0, p).into_owned(), opts);
            warnings.push("interaction estimate on the boundary gamma = 1".into());
            (extend(&sol.eta, 0.0), sol)
        } else {
            (sol.eta.clone(), sol)
        }
    };

    if !sol.converged {
        warnings.push(format!(
            "optimizer did not converge (gradient {:.3e}); returning best iterate",
            sol.gradient_norm
        ));
    }
    let activity = LogLinearIntensity::new(basis.to_vec(), eta.rows(0, p).iter().copied().collect())?;
    let model = build_gibbs(family, activity, eta[p], interaction)?;
    Ok(FitResult {
        model,
        log_objective: sol.objective,
        converged: sol.converged,
        n_iterations: sol.iterations,
        gradient_norm: sol.gradient_norm,
        warnings,
    })
}

fn extend(eta: &DVector<f64>, last: f64) -> DVector<f64> {
    DVector::from_iterator(eta.len() + 1, eta.iter().copied().chain(std::iter::once(last)))
}

fn build_gibbs(
    family: Family,
    activity: LogLinearIntensity,
    log_gamma: f64,
    interaction: Interaction,
) -> Result<ModelSpec> {
    Ok(match family {
        Family::Strauss => StraussModel::new(activity, log_gamma.exp(), interaction.r)?.into(),
        Family::Geyer => {
            let beta = activity.log_value(crate::geometry::Point::new(0.0, 0.0)).exp();
            GeyerModel::new(
                beta,
                log_gamma.exp(),
                interaction.r,
                interaction.alpha.unwrap_or_default(),
            )?
            .into()
        }
        Family::Poisson => unreachable!("not a Gibbs family"),
    })
}

/// Log pseudolikelihood of a Gibbs model, evaluated with the same
/// quadrature as [`fit_gibbs_mple`].
pub fn log_pseudolikelihood(model: &dyn PointProcess, pattern: &PointPattern, quad_grid: usize) -> f64 {
    let data: f64 = (0..pattern.len())
        .map(|i| {
            let rest = pattern.without_index(i);
            model.papangelou(pattern.points()[i], &rest).ln()
        })
        .sum();
    let quad = Quadrature::midpoint(pattern.window(), quad_grid, quad_grid);
    data - quad.integrate(|u| model.papangelou(u, pattern))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Window};
    use crate::models::parse_basis;
    use crate::rng::RngStream;
    use crate::sim::{sample_poisson, McmcConfig};

    fn unit() -> Window {
        Window::unit_square()
    }

    fn poisson_truth() -> ModelSpec {
        PoissonModel::new(
            LogLinearIntensity::new(parse_basis("1,u1").unwrap(), vec![300f64.ln(), -3.0]).unwrap(),
        )
        .into()
    }

    #[test]
    fn intercept_only_matches_closed_form() {
        for seed in 0..5 {
            let pp = sample_poisson(&poisson_truth(), unit(), RngStream::new(seed, 0)).unwrap();
            let fit = fit_poisson(&pp, &[Term::CONSTANT], &FitOptions::default()).unwrap();
            assert!(fit.converged);
            let lam = fit.model.as_poisson().unwrap().intensity.value(Point::new(0.5, 0.5));
            assert!((lam - pp.len() as f64).abs() < 1e-8 * pp.len() as f64);
        }
        let w = Window::new(0.0, 1.0, 0.0, 10.0).unwrap();
        let pts = (0..73).map(|i| Point::new(0.5, i as f64 / 10.0)).collect();
        let pp = PointPattern::new(w, pts).unwrap();
        let fit = fit_poisson(&pp, &[Term::CONSTANT], &FitOptions::default()).unwrap();
        let lam = fit.model.as_poisson().unwrap().intensity.value(Point::new(0.5, 0.5));
        assert!((lam - 7.3).abs() < 1e-8);
    }

    #[test]
    fn empty_pattern_gives_zero_sentinel() {
        let fit = fit_poisson(&PointPattern::empty(unit()), &[Term::CONSTANT], &FitOptions::default()).unwrap();
        assert!(!fit.converged);
        let m = fit.model.as_poisson().unwrap();
        assert_eq!(m.intensity.value(Point::new(0.3, 0.3)), 0.0);
        let text = serde_json::to_string(&fit).unwrap();
        let back: FitResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back.model, fit.model);
        assert!(!back.converged);
    }

    #[test]
    fn poisson_optimum_is_stationary_and_concave() {
        let pp = sample_poisson(&poisson_truth(), unit(), RngStream::new(3, 0)).unwrap();
        let basis = parse_basis("1,u1").unwrap();
        let opts = FitOptions::default();
        let fit = fit_poisson(&pp, &basis, &opts).unwrap();
        assert!(fit.converged && fit.gradient_norm < 1e-6);
        let theta = fit.model.as_poisson().unwrap().intensity.theta().to_vec();
        let ll = |t: &[f64]| {
            let m = PoissonModel::new(LogLinearIntensity::new(basis.clone(), t.to_vec()).unwrap());
            m.log_density(&pp)
        };
        // numeric Hessian by central differences
        let h = 1e-4;
        let mut hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut pp_ = theta.clone();
                let mut pm = theta.clone();
                let mut mp = theta.clone();
                let mut mm = theta.clone();
                pp_[a] += h;
                pp_[b] += h;
                pm[a] += h;
                pm[b] -= h;
                mp[a] -= h;
                mp[b] += h;
                mm[a] -= h;
                mm[b] -= h;
                hess[a][b] = (ll(&pp_) - ll(&pm) - ll(&mp) + ll(&mm)) / (4.0 * h * h);
            }
        }
        assert!(hess[0][0] < 0.0);
        assert!(hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0] > 0.0);
    }

    #[test]
    fn gibbs_fit_on_tiny_pattern_fixes_gamma() {
        let pp = PointPattern::new(unit(), vec![Point::new(0.4, 0.4)]).unwrap();
        let fit = fit_gibbs_mple(
            &pp,
            Family::Strauss,
            Interaction { r: 0.05, alpha: None },
            &[Term::CONSTANT],
            &FitOptions::default(),
        )
        .unwrap();
        assert!(!fit.converged);
        match fit.model {
            ModelSpec::Strauss(m) => assert_eq!(m.gamma, 1.0),
            _ => panic!(),
        }
    }

    #[test]
    fn geyer_requires_alpha_and_constant_basis() {
        let pp = sample_poisson(&poisson_truth(), unit(), RngStream::new(1, 0)).unwrap();
        let ia = Interaction { r: 0.05, alpha: None };
        assert!(fit_gibbs_mple(&pp, Family::Geyer, ia, &[Term::CONSTANT], &FitOptions::default()).is_err());
        let ia = Interaction { r: 0.05, alpha: Some(4.5) };
        assert!(fit_gibbs_mple(&pp, Family::Geyer, ia, &parse_basis("1,u1").unwrap(), &FitOptions::default()).is_err());
        assert!(fit_gibbs_mple(&pp, Family::Poisson, ia, &[Term::CONSTANT], &FitOptions::default()).is_err());
    }

    #[test]
    fn hard_core_data_gives_zero_gamma() {
        let m: ModelSpec = StraussModel::new(LogLinearIntensity::constant(200.0).unwrap(), 0.0, 0.05)
            .unwrap()
            .into();
        let cfg = McmcConfig { n_iterations: 20_000, ..Default::default() };
        let pp = crate::sim::sample_gibbs(&m, unit(), &cfg, RngStream::new(5, 0)).unwrap();
        let fit = fit_gibbs_mple(&pp, Family::Strauss, Interaction { r: 0.05, alpha: None }, &[Term::CONSTANT], &FitOptions::default()).unwrap();
        match fit.model {
            ModelSpec::Strauss(s) => assert_eq!(s.gamma, 0.0),
            _ => panic!(),
        }
        assert!(fit.converged);
    }

    #[test]
    fn mple_objective_matches_direct_pseudolikelihood() {
        let truth: ModelSpec = GeyerModel::new(4f64.exp(), 0.4f64.exp(), 0.05, 4.5).unwrap().into();
        let cfg = McmcConfig { n_iterations: 30_000, ..Default::default() };
        let pp = crate::sim::sample_gibbs(&truth, unit(), &cfg, RngStream::new(2, 0)).unwrap();
        let opts = FitOptions { quad_grid: 32, ..Default::default() };
        let fit = fit_gibbs_mple(&pp, Family::Geyer, Interaction { r: 0.05, alpha: Some(4.5) }, &[Term::CONSTANT], &opts).unwrap();
        let direct = log_pseudolikelihood(fit.model.process(), &pp, 32);
        assert!((direct - fit.log_objective).abs() < 1e-6 * direct.abs().max(1.0), "{direct} vs {}", fit.log_objective);
    }
}
