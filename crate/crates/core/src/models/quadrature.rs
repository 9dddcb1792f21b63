//! Tensor-product quadrature rules over rectangles.

use std::f64::consts::PI;

use crate::geometry::{Point, Window};

/// Gauss–Legendre order used for pixel and window integrals.
pub const DEFAULT_GL_ORDER: usize = 16;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// `order x order` Gauss–Legendre rule on each of `panels x panels` sub-rectangles.
    pub fn gauss_legendre(window: &Window, order: usize, panels: usize) -> Self {
        let (t, w) = gauss_legendre(order);
        let pw = window.width() / panels as f64;
        let ph = window.height() / panels as f64;
        let mut nodes = Vec::with_capacity(panels * panels * order * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for py in 0..panels {
            let y0 = window.y_min + py as f64 * ph;
            for px in 0..panels {
                let x0 = window.x_min + px as f64 * pw;
                for (ty, wy) in t.iter().zip(&w) {
                    for (tx, wx) in t.iter().zip(&w) {
                        nodes.push(Point::new(
                            x0 + 0.5 * pw * (tx + 1.0),
                            y0 + 0.5 * ph * (ty + 1.0),
                        ));
                        weights.push(0.25 * pw * ph * wx * wy);
                    }
                }
            }
        }
        Self { nodes, weights }
    }

    /// Midpoint rule on an `nx x ny` grid of equal cells.
    pub fn midpoint(window: &Window, nx: usize, ny: usize) -> Self {
        let cw = window.width() / nx as f64;
        let ch = window.height() / ny as f64;
        let mut nodes = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                nodes.push(Point::new(
                    window.x_min + (ix as f64 + 0.5) * cw,
                    window.y_min + (iy as f64 + 0.5) * ch,
                ));
            }
        }
        let weights = vec![cw * ch; nx * ny];
        Self { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}
