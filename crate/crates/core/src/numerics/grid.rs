use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// Quadrature nodes over a positive parameter together with weights for `∫ f(θ) dθ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    support: (f64, f64),
}

impl Grid {
    /// Builds a grid from explicit nodes and weights. The support is taken to be
    /// `[first node, last node]`.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let support = match (nodes.first(), nodes.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::validation("grid needs at least two nodes")),
        };
        Self::with_support(nodes, weights, support)
    }

    pub(crate) fn with_support(
        nodes: Vec<f64>,
        weights: Vec<f64>,
        support: (f64, f64),
    ) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::validation(format!(
                "grid has {} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.len() < 2 {
            return Err(Error::validation("grid needs at least two nodes"));
        }
        if nodes.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::validation(
                "grid nodes must be finite and strictly positive",
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("grid nodes must be strictly increasing"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation(
                "grid weights must be finite and nonnegative",
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::validation("grid weights sum to zero"));
        }
        Ok(Grid {
            nodes,
            weights,
            support,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Closed interval the grid discretizes.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.support.0 && theta <= self.support.1
    }

    /// `Σ_j w_j f(θ_j)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Index of the node closest to `theta` in log distance.
    pub fn nearest_node(&self, theta: f64) -> usize {
        let lt = theta.ln();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &t) in self.nodes.iter().enumerate() {
            let d = (t.ln() - lt).abs();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Grid for the rescaled parameter `γθ`: nodes and weights (and support) multiplied by γ.
    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::validation(
                "scale factor must be positive and finite",
            ));
        }
        Self::with_support(
            self.nodes.iter().map(|t| t * gamma).collect(),
            self.weights.iter().map(|w| w * gamma).collect(),
            (self.support.0 * gamma, self.support.1 * gamma),
        )
    }

    /// Node-wise comparison with relative tolerance 1e-12.
    pub fn matches(&self, other: &Grid) -> bool {
        self.len() == other.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .chain(self.weights.iter().zip(&other.weights))
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
    }
}

/// Gauss–Legendre abscissae and weights on `[-1, 1]`, abscissae ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre grid in `u = log θ` over `[theta_min, theta_max]`, mapped back to θ.
///
/// Weights carry the Jacobian `dθ = θ du`, so `grid.integrate(f) ≈ ∫ f(θ) dθ`.
pub fn make_log_grid(theta_min: f64, theta_max: f64, n: usize) -> Result<Grid> {
    if !(theta_min.is_finite() && theta_max.is_finite()) {
        return Err(Error::validation("grid bounds must be finite"));
    }
    if theta_min <= 0.0 {
        return Err(Error::validation("theta_min must be strictly positive"));
    }
    if theta_min >= theta_max {
        return Err(Error::validation(format!(
            "empty interval: theta_min = {theta_min} must be below theta_max = {theta_max}"
        )));
    }
    if n < 2 {
        return Err(Error::validation("grid needs n >= 2 nodes"));
    }
    let (a, b) = (theta_min.ln(), theta_max.ln());
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let (x, w) = gauss_legendre(n);
    let nodes: Vec<f64> = x.iter().map(|xi| (mid + half * xi).exp()).collect();
    let weights = w.iter().zip(&nodes).map(|(wi, t)| half * wi * t).collect();
    Grid::with_support(nodes, weights, (theta_min, theta_max))
}
