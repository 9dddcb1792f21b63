use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Monomial `u1^px * u2^py`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Term {
    pub px: u32,
    pub py: u32,
}

impl Term {
    pub const CONSTANT: Term = Term { px: 0, py: 0 };

    pub const fn new(px: u32, py: u32) -> Self {
        Self { px, py }
    }

    pub fn is_constant(&self) -> bool {
        self.px == 0 && self.py == 0
    }

    #[inline]
    pub fn eval(&self, u: Point) -> f64 {
        small_pow(u.x, self.px) * small_pow(u.y, self.py)
    }
}

#[inline]
fn small_pow(x: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        2 => x * x,
        3 => x * x * x,
        _ => x.powi(p as i32),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn factor(name: &str, p: u32) -> Option<String> {
            match p {
                0 => None,
                1 => Some(name.to_string()),
                _ => Some(format!("{name}^{p}")),
            }
        }
        let parts: Vec<String> = [factor("u1", self.px), factor("u2", self.py)]
            .into_iter()
            .flatten()
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

impl FromStr for Term {
    type Err = Error;

    /// Accepts `1`, `u1`, `u2`, `u1^2`, `u1*u2`, `u1^2*u2^3`, with `x`/`y` as aliases.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTerm(s.to_string());
        let s = s.trim();
        if s == "1" {
            return Ok(Term::CONSTANT);
        }
        let mut term = Term::CONSTANT;
        for factor in s.split('*') {
            let (var, pow) = match factor.trim().split_once('^') {
                Some((v, p)) => (v.trim(), p.trim().parse::<u32>().map_err(|_| bad())?),
                None => (factor.trim(), 1),
            };
            match var {
                "u1" | "x" => term.px += pow,
                "u2" | "y" => term.py += pow,
                _ => return Err(bad()),
            }
        }
        Ok(term)
    }
}

pub fn parse_basis(spec: &str) -> Result<Vec<Term>> {
    spec.split(',').map(str::parse).collect()
}

/// The default basis prefix `{1, u1, u2, u1^2, u1*u2, u2^2}`.
pub fn default_basis(len: usize) -> Result<Vec<Term>> {
    const ORDER: [Term; 6] = [
        Term::new(0, 0),
        Term::new(1, 0),
        Term::new(0, 1),
        Term::new(2, 0),
        Term::new(1, 1),
        Term::new(0, 2),
    ];
    if len == 0 || len > ORDER.len() {
        return Err(Error::InvalidModel(format!(
            "no default basis with {len} terms; pass the basis explicitly"
        )));
    }
    Ok(ORDER[..len].to_vec())
}

/// `lambda(u) = exp(theta . B(u))` over a monomial basis that contains the
/// constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearIntensity {
    basis: Vec<Term>,
    theta: Vec<f64>,
}

impl LogLinearIntensity {
    pub fn new(basis: Vec<Term>, theta: Vec<f64>) -> Result<Self> {
        if basis.len() != theta.len() {
            return Err(Error::InvalidModel(format!(
                "basis has {} terms but theta has {} coefficients",
                basis.len(),
                theta.len()
            )));
        }
        if basis.iter().filter(|t| t.is_constant()).count() != 1 {
            return Err(Error::InvalidModel(
                "basis must contain the constant term exactly once".into(),
            ));
        }
        for (i, t) in basis.iter().enumerate() {
            if basis[..i].contains(t) {
                return Err(Error::InvalidModel(format!("duplicate basis term {t}")));
            }
        }
        // The intercept may be -inf (zero intensity); every other coefficient must be finite.
        for (t, v) in basis.iter().zip(&theta) {
            let ok = if t.is_constant() {
                !v.is_nan() && *v != f64::INFINITY
            } else {
                v.is_finite()
            };
            if !ok {
                return Err(Error::InvalidModel(format!(
                    "coefficient {v} for term {t} is not allowed"
                )));
            }
        }
        Ok(Self { basis, theta })
    }

    pub fn constant(level: f64) -> Result<Self> {
        Self::new(vec![Term::CONSTANT], vec![level.ln()])
    }

    pub fn basis(&self) -> &[Term] {
        &self.basis
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn intercept_index(&self) -> usize {
        self.basis.iter().position(Term::is_constant).unwrap()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.basis.len() == 1
    }

    pub fn features(&self, u: Point) -> Vec<f64> {
        self.basis.iter().map(|t| t.eval(u)).collect()
    }

    #[inline]
    pub fn log_value(&self, u: Point) -> f64 {
        let mut acc = 0.0;
        for (t, c) in self.basis.iter().zip(&self.theta) {
            if t.is_constant() {
                acc += c;
            } else {
                acc += c * t.eval(u);
            }
        }
        acc
    }

    #[inline]
    pub fn value(&self, u: Point) -> f64 {
        self.log_value(u).exp()
    }
}
