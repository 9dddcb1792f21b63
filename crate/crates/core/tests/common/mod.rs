#![allow(dead_code)]

use ppcalib::models::{ModelParams, ModelSpec};

pub fn model(family: &str, basis: &str, theta: &[f64], gamma: Option<f64>, r: Option<f64>) -> ModelSpec {
    let mut p = ModelParams::new(family);
    p.set_basis(basis).unwrap();
    p.theta = Some(theta.to_vec());
    p.gamma = gamma;
    p.r = r;
    p.build().unwrap()
}

/// Poisson with intensity `300 exp(-3 u1)`.
pub fn inhom_poisson() -> ModelSpec {
    model("poisson", "1,u1", &[300f64.ln(), -3.0], None, None)
}

pub fn geyer(beta: f64, gamma: f64) -> ModelSpec {
    let mut p = ModelParams::new("geyer");
    p.beta = Some(beta);
    p.gamma = Some(gamma);
    p.r = Some(0.05);
    p.alpha = Some(4.5);
    p.build().unwrap()
}

/// Mean and standard error of the mean.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 { x[n / 2] } else { 0.5 * (x[n / 2 - 1] + x[n / 2]) }
}
