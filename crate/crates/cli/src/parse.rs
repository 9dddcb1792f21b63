//! Small parsers for command-line values.

use anyhow::{anyhow, bail, Result};
use ppcalib::Window;

/// One coefficient: a number, `log(x)`, `exp(x)` or `-inf`.
pub fn parse_coefficient(s: &str) -> Result<f64> {
    let s = s.trim();
    let inner = |prefix: &str| {
        s.strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(')'))
            .map(|x| x.trim().parse::<f64>())
    };
    let value = if let Some(x) = inner("log(") {
        x.map(f64::ln)
    } else if let Some(x) = inner("exp(") {
        x.map(f64::exp)
    } else {
        s.parse::<f64>()
    };
    value.map_err(|_| anyhow!("theta: cannot read coefficient `{s}`"))
}

pub fn parse_coefficients(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_coefficient).collect()
}

pub fn parse_window(s: &str) -> Result<Window> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| anyhow!("window: expected x_min,x_max,y_min,y_max, got `{s}`"))?;
    let [a, b, c, d] = v[..] else {
        bail!("window: expected four numbers, got `{s}`");
    };
    Ok(Window::new(a, b, c, d)?)
}

/// `20x20`, `20,20` or `20`.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).map(str::trim).collect();
    let n = |p: &str| {
        p.parse::<usize>()
            .map_err(|_| anyhow!("grid: expected NXxNY, got `{s}`"))
    };
    match parts[..] {
        [one] => {
            let k = n(one)?;
            Ok((k, k))
        }
        [a, b] => Ok((n(a)?, n(b)?)),
        _ => bail!("grid: expected NXxNY, got `{s}`"),
    }
}

/// `r=0.05,alpha=4.5` into `(r, alpha)`.
pub fn parse_fixed(s: &str) -> Result<(Option<f64>, Option<f64>)> {
    let (mut r, mut alpha) = (None, None);
    for item in s.split(',').filter(|i| !i.trim().is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("fixed: expected name=value, got `{item}`"))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| anyhow!("fixed: cannot read value of `{}`", key.trim()))?;
        match key.trim() {
            "r" => r = Some(v),
            "alpha" => alpha = Some(v),
            other => bail!("fixed: unknown parameter `{other}` (expected r or alpha)"),
        }
    }
    Ok((r, alpha))
}
