//! Model families registered by name.
//!
//! The CLI and the JSON model format resolve a family string (`"poisson"`,
//! `"strauss"`, `"geyer"`) through a [`FamilyRegistry`]; each entry knows how
//! to build a model from loose parameters and how to fit itself to a pattern.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fit::{fit_gibbs_mple, fit_poisson, FitOptions, FitResult, Interaction};
use crate::geometry::PointPattern;
use crate::models::{
    default_basis, Family, GeyerModel, LogLinearIntensity, ModelParams, ModelSpec, PoissonModel,
    StraussModel, Term,
};

/// What to estimate: the trend basis plus any fixed interaction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRequest {
    pub basis: Vec<Term>,
    pub r: Option<f64>,
    pub alpha: Option<f64>,
}

impl FitRequest {
    pub fn homogeneous() -> Self {
        Self {
            basis: vec![Term::CONSTANT],
            r: None,
            alpha: None,
        }
    }
}

pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &'static str;

    fn family(&self) -> Family;

    fn build(&self, params: &ModelParams) -> Result<ModelSpec>;

    fn fit(&self, pattern: &PointPattern, request: &FitRequest, opts: &FitOptions)
        -> Result<FitResult>;
}

fn activity_from(params: &ModelParams) -> Result<LogLinearIntensity> {
    let theta = params
        .theta
        .clone()
        .ok_or_else(|| Error::InvalidModel(format!("theta: required for the {} family but missing", params.family)))?;
    let basis = match params.basis_terms()? {
        Some(b) => b,
        None => default_basis(theta.len())?,
    };
    LogLinearIntensity::new(basis, theta)
        .map_err(|e| Error::InvalidModel(format!("theta/basis: {e}")))
}

fn radius(request: &FitRequest, family: &str) -> Result<f64> {
    request
        .r
        .ok_or_else(|| Error::InvalidModel(format!("r: the {family} fit needs a fixed interaction radius")))
}

pub struct PoissonFamily;

impl ModelFamily for PoissonFamily {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn family(&self) -> Family {
        Family::Poisson
    }

    fn build(&self, params: &ModelParams) -> Result<ModelSpec> {
        Ok(PoissonModel::new(activity_from(params)?).into())
    }

    fn fit(&self, pattern: &PointPattern, request: &FitRequest, opts: &FitOptions) -> Result<FitResult> {
        fit_poisson(pattern, &request.basis, opts)
    }
}

pub struct StraussFamily;

impl ModelFamily for StraussFamily {
    fn name(&self) -> &'static str {
        "strauss"
    }

    fn family(&self) -> Family {
        Family::Strauss
    }

    fn build(&self, params: &ModelParams) -> Result<ModelSpec> {
        let activity = activity_from(params)?;
        let gamma = params.require(params.gamma, "gamma")?;
        let r = params.require(params.r, "r")?;
        Ok(StraussModel::new(activity, gamma, r)?.into())
    }

    fn fit(&self, pattern: &PointPattern, request: &FitRequest, opts: &FitOptions) -> Result<FitResult> {
        let r = radius(request, self.name())?;
        fit_gibbs_mple(pattern, Family::Strauss, Interaction { r, alpha: None }, &request.basis, opts)
    }
}

pub struct GeyerFamily;

impl ModelFamily for GeyerFamily {
    fn name(&self) -> &'static str {
        "geyer"
    }

    fn family(&self) -> Family {
        Family::Geyer
    }

    fn build(&self, params: &ModelParams) -> Result<ModelSpec> {
        Ok(GeyerModel::new(
            params.require(params.beta, "beta")?,
            params.require(params.gamma, "gamma")?,
            params.require(params.r, "r")?,
            params.require(params.alpha, "alpha")?,
        )?
        .into())
    }

    fn fit(&self, pattern: &PointPattern, request: &FitRequest, opts: &FitOptions) -> Result<FitResult> {
        let r = radius(request, self.name())?;
        let interaction = Interaction {
            r,
            alpha: request.alpha,
        };
        fit_gibbs_mple(pattern, Family::Geyer, interaction, &request.basis, opts)
    }
}

#[derive(Default)]
pub struct FamilyRegistry {
    families: BTreeMap<&'static str, Box<dyn ModelFamily>>,
}

impl FamilyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut reg = Self::new();
        reg.register(Box::new(PoissonFamily));
        reg.register(Box::new(StraussFamily));
        reg.register(Box::new(GeyerFamily));
        reg
    }

    /// Shared registry holding the built-in families.
    pub fn builtin() -> &'static FamilyRegistry {
        static REGISTRY: OnceLock<FamilyRegistry> = OnceLock::new();
        REGISTRY.get_or_init(Self::with_builtin)
    }

    pub fn register(&mut self, family: Box<dyn ModelFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ModelFamily> {
        self.families
            .get(name.trim().to_ascii_lowercase().as_str())
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.keys().copied()
    }

    pub fn build(&self, params: &ModelParams) -> Result<ModelSpec> {
        self.get(&params.family)?.build(params)
    }

    pub fn fit(
        &self,
        family: &str,
        pattern: &PointPattern,
        request: &FitRequest,
        opts: &FitOptions,
    ) -> Result<FitResult> {
        self.get(family)?.fit(pattern, request, opts)
    }
}
