//! Flat JSON representation of a [`ModelSpec`]:
//! `{"family": "poisson"|"strauss"|"geyer", "basis": [...], "theta": [...],
//! "gamma": .., "r": .., "alpha": .., "beta": ..}`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{parse_basis, ModelSpec, Term};
use crate::error::{Error, Result};
use crate::registry::FamilyRegistry;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<String>>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_coefficients",
        deserialize_with = "de_coefficients"
    )]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl ModelParams {
    pub fn new(family: &str) -> Self {
        Self {
            family: family.to_string(),
            ..Default::default()
        }
    }

    pub fn basis_terms(&self) -> Result<Option<Vec<Term>>> {
        self.basis
            .as_ref()
            .map(|b| b.iter().map(|t| t.parse()).collect())
            .transpose()
    }

    pub fn set_basis(&mut self, basis: &str) -> Result<()> {
        let terms = parse_basis(basis)?;
        self.basis = Some(terms.iter().map(Term::to_string).collect());
        Ok(())
    }

    pub fn require(&self, field: Option<f64>, name: &str) -> Result<f64> {
        field.ok_or_else(|| {
            Error::InvalidModel(format!(
                "{name}: required for the {} family but missing",
                self.family
            ))
        })
    }

    pub fn build(&self) -> Result<ModelSpec> {
        FamilyRegistry::builtin().build(self)
    }
}

impl From<&ModelSpec> for ModelParams {
    fn from(spec: &ModelSpec) -> Self {
        let terms = |b: &[Term]| Some(b.iter().map(Term::to_string).collect());
        match spec {
            ModelSpec::Poisson(m) => ModelParams {
                family: "poisson".into(),
                basis: terms(m.intensity.basis()),
                theta: Some(m.intensity.theta().to_vec()),
                ..Default::default()
            },
            ModelSpec::Strauss(m) => ModelParams {
                family: "strauss".into(),
                basis: terms(m.activity.basis()),
                theta: Some(m.activity.theta().to_vec()),
                gamma: Some(m.gamma),
                r: Some(m.r),
                ..Default::default()
            },
            ModelSpec::Geyer(m) => ModelParams {
                family: "geyer".into(),
                beta: Some(m.beta),
                gamma: Some(m.gamma),
                r: Some(m.r),
                alpha: Some(m.alpha),
                ..Default::default()
            },
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelParams::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let params = ModelParams::deserialize(d)?;
        params.build().map_err(serde::de::Error::custom)
    }
}

/// Coefficients are numbers, except that non-finite values are written as
/// the strings `"-inf"`, `"inf"` and `"nan"` so that zero-intensity
/// sentinels survive a round trip.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Coefficient {
    Number(f64),
    Text(String),
}

fn ser_coefficients<S: Serializer>(
    v: &Option<Vec<f64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let out: Option<Vec<Coefficient>> = v.as_ref().map(|v| {
        v.iter()
            .map(|&x| {
                if x.is_finite() {
                    Coefficient::Number(x)
                } else if x.is_nan() {
                    Coefficient::Text("nan".into())
                } else if x > 0.0 {
                    Coefficient::Text("inf".into())
                } else {
                    Coefficient::Text("-inf".into())
                }
            })
            .collect()
    });
    out.serialize(s)
}

fn de_coefficients<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    let raw: Option<Vec<Coefficient>> = Option::deserialize(d)?;
    raw.map(|v| {
        v.into_iter()
            .map(|c| match c {
                Coefficient::Number(x) => Ok(x),
                Coefficient::Text(t) => match t.as_str() {
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "inf" => Ok(f64::INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(serde::de::Error::custom(format!(
                        "theta: `{other}` is not a number"
                    ))),
                },
            })
            .collect()
    })
    .transpose()
}
