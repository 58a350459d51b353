//! Polar Gauss–Legendre × uniform-angle quadrature on a disc in `C`.

use crate::linalg::C64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Quadrature for `∫_{|α| ≤ R} f(α) d²α`.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub radius: f64,
    pub n_r: usize,
    pub n_phi: usize,
    pub nodes: Vec<C64>,
    pub weights: Vec<f64>,
}

impl PolarGrid {
    pub fn new(radius: f64, n_r: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_r);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_r * n_phi);
        let mut weights = Vec::with_capacity(n_r * n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let r = 0.5 * radius * (xi + 1.0);
            let wr = 0.5 * radius * wi * r;
            for j in 0..n_phi {
                nodes.push(C64::from_polar(r, j as f64 * dphi));
                weights.push(wr * dphi);
            }
        }
        Self { radius, n_r, n_phi, nodes, weights }
    }

    /// Default disc for Fock truncation `N`: `R = √(3N)`.
    pub fn for_fock(n: usize, n_r: usize, n_phi: usize) -> Self {
        Self::new((3.0 * n as f64).sqrt(), n_r, n_phi)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}
