//! Ideal quantum linear amplifier on the truncated Fock space `span{δ_0, …,
//! δ_{N−1}}`: Kraus operators, coherent states, Q-functions, the closed form
//! of the conjugate channel, the Bargmann measurement and the Gaussian
//! smoothing defect.
//!
//! Truncation is never hidden: Kraus operators are the printed matrix
//! elements restricted to `n + m < N`, and trace-preservation defects are
//! reported rather than renormalised away.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::channels::{KrausChannel, StinespringIsometry};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, C64};

use super::quadrature::PolarGrid;

/// Protected-level trace defect above which a truncation warning is raised.
pub const TRUNCATION_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AmplifierParams {
    pub t: f64,
    pub fock_dim: usize,
    pub kraus_cutoff: usize,
}

impl AmplifierParams {
    pub fn new(t: f64, fock_dim: usize, kraus_cutoff: usize) -> Result<Self> {
        let p = Self { t, fock_dim, kraus_cutoff };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) || self.fock_dim < 2 || self.kraus_cutoff < 1 {
            return Err(Error::Invalid(format!(
                "amplifier needs t > 0, N ≥ 2, M ≥ 1 (got t={}, N={}, M={})",
                self.t, self.fock_dim, self.kraus_cutoff
            )));
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self { t, ..*self }
    }
}

/// `ln k!` for `k < len`.
pub(crate) fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len.max(1));
    out.push(0.0);
    for k in 1..len {
        out.push(out[k - 1] + (k as f64).ln());
    }
    out
}

fn ln_binom(lf: &[f64], n: usize, k: usize) -> f64 {
    lf[n] - lf[k] - lf[n - k]
}

/// `ln(1 − e^{−t})`.
fn ln_one_minus_exp(t: f64) -> f64 {
    (-(-t).exp_m1()).ln()
}

/// `(1−e^{−t})^m e^{−(n+1)t} C(n+m, m)`, in log space.
fn ln_weight(lf: &[f64], t: f64, n: usize, m: usize) -> f64 {
    if m == 0 {
        return -((n + 1) as f64) * t;
    }
    m as f64 * ln_one_minus_exp(t) - ((n + 1) as f64) * t + ln_binom(lf, n + m, m)
}

/// `M_m(t) = Σ_n [(1−e^{−t})^m e^{−(n+1)t} C(n+m,m)]^{1/2} |δ_{n+m}⟩⟨δ_n|`,
/// `m < M`, rows with `n + m ≥ N` dropped. The recorded trace defect is the
/// one on the protected levels `n ≤ N − M`.
pub fn amplifier_kraus(p: &AmplifierParams) -> Result<KrausChannel> {
    p.validate()?;
    let (n_dim, m_cut) = (p.fock_dim, p.kraus_cutoff);
    let lf = ln_factorials(n_dim + m_cut + 1);
    let kraus: Vec<CMatrix> = (0..m_cut)
        .map(|m| {
            let mut k = CMatrix::zeros(n_dim, n_dim);
            for n in 0..n_dim {
                if n + m < n_dim {
                    k[(n + m, n)] = c64((0.5 * ln_weight(&lf, p.t, n, m)).exp(), 0.0);
                }
            }
            k
        })
        .collect();
    let mut ch = KrausChannel::with_defect(kraus)?;
    ch.set_tp_defect(protected_tp_defect(p));
    Ok(ch)
}

/// `‖Σ_m M_m†M_m − I‖_F` restricted to levels `n ≤ N − M` (the levels on
/// which every kept Kraus term is untruncated): the negative-binomial tail
/// `Σ_{m ≥ M}` per level.
pub fn protected_tp_defect(p: &AmplifierParams) -> f64 {
    let lf = ln_factorials(p.fock_dim + p.kraus_cutoff + 1);
    let top = p.fock_dim.saturating_sub(p.kraus_cutoff);
    let mut acc = 0.0;
    for n in 0..=top {
        let kept: f64 = (0..p.kraus_cutoff).map(|m| ln_weight(&lf, p.t, n, m).exp()).sum();
        acc += (1.0 - kept).powi(2);
    }
    acc.sqrt()
}

pub fn truncation_warning(p: &AmplifierParams) -> bool {
    protected_tp_defect(p) > TRUNCATION_WARN
}

/// Untruncated-formula coefficients `e^{−|α|²/2} αⁿ/√n!`, `n < N`.
pub fn coherent_coefficients(alpha: C64, n_dim: usize) -> DVector<C64> {
    let r = alpha.norm();
    let lf = ln_factorials(n_dim);
    DVector::from_fn(n_dim, |n, _| {
        if r == 0.0 {
            return c64(if n == 0 { 1.0 } else { 0.0 }, 0.0);
        }
        let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * lf[n];
        C64::from_polar(ln_mag.exp(), n as f64 * alpha.arg())
    })
}

#[derive(Debug, Clone)]
pub struct CoherentState {
    /// Unit vector (truncated coefficients renormalised).
    pub vector: DVector<C64>,
    /// `1 − Σ_{n<N} |c_n|²`.
    pub truncation_mass: f64,
}

pub fn coherent_state(alpha: C64, n_dim: usize) -> CoherentState {
    let c = coherent_coefficients(alpha, n_dim);
    let kept = c.norm_squared();
    CoherentState { vector: c.unscale(kept.sqrt()), truncation_mass: 1.0 - kept }
}

#[derive(Debug, Clone)]
pub struct QFunctionGrid {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
}

impl QFunctionGrid {
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

/// `π⁻¹⟨ψ_α|ρ|ψ_α⟩` at one point. Exact for `ρ` supported on the first
/// `N` levels (uses the unnormalised coherent coefficients).
pub fn q_value(rho: &CMatrix, alpha: C64) -> f64 {
    let c = coherent_coefficients(alpha, rho.nrows());
    (c.adjoint() * rho * &c)[(0, 0)].re / PI
}

pub fn q_function(rho: &CMatrix, grid: &PolarGrid) -> QFunctionGrid {
    let values = grid.nodes.iter().map(|&a| q_value(rho, a)).collect();
    QFunctionGrid { grid: grid.clone(), values }
}

/// `⟨δ_m|M_k(t)† M_l(t)|δ_n⟩ = δ_{n+l,k+m} (e^t−1)^{(l+k)/2} e^{−(n+l+1)t}
/// [C(n+l,l) C(k+m,k)]^{1/2}`.
pub fn amplifier_conjugate_element(t: f64, k: usize, l: usize, m: usize, n: usize) -> f64 {
    if n + l != k + m {
        return 0.0;
    }
    let lf = ln_factorials(n + l + k + m + 2);
    let ln_c = t + ln_one_minus_exp(t);
    let ln_v = 0.5 * (l + k) as f64 * ln_c - (n + l + 1) as f64 * t
        + 0.5 * (ln_binom(&lf, n + l, l) + ln_binom(&lf, k + m, k));
    ln_v.exp()
}

/// The same elements assembled numerically from the Stinespring isometry
/// of [`amplifier_kraus`]: `V†(I ⊗ |δ_k⟩⟨δ_l|)V = K_k† K_l` with
/// `K_k = (I ⊗ ⟨δ_k|)V`.
pub struct StinespringConjugate {
    blocks: Vec<CMatrix>,
}

impl StinespringConjugate {
    pub fn new(p: &AmplifierParams) -> Result<Self> {
        let v = StinespringIsometry::from_kraus(&amplifier_kraus(p)?);
        Ok(Self { blocks: v.to_kraus().kraus().to_vec() })
    }

    pub fn env_dim(&self) -> usize {
        self.blocks.len()
    }

    /// Matrix with entries `(m, n)`.
    pub fn matrix(&self, k: usize, l: usize) -> CMatrix {
        self.blocks[k].adjoint() * &self.blocks[l]
    }
}

/// Largest deviation between the closed form and the assembled conjugate
/// over `k, l, m, n < window`. The window is clamped so that `n + l < N`,
/// the range where truncation leaves the matrix elements untouched.
pub fn conjugate_closed_form_error(p: &AmplifierParams, window: usize) -> Result<f64> {
    let sc = StinespringConjugate::new(p)?;
    let w = window.min(sc.env_dim()).min(p.fock_dim.div_ceil(2));
    let mut worst = 0.0f64;
    for k in 0..w {
        for l in 0..w {
            let m = sc.matrix(k, l);
            for a in 0..w {
                for b in 0..w {
                    let want = amplifier_conjugate_element(p.t, k, l, a, b);
                    worst = worst.max((m[(a, b)] - c64(want, 0.0)).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// `I − Σ_j w_j π⁻¹|ψ_j⟩⟨ψ_j|` on the first `N` levels.
pub fn bargmann_completion(grid: &PolarGrid, n_dim: usize) -> CMatrix {
    let mut completion = linalg::identity(n_dim);
    for (&a, &w) in grid.nodes.iter().zip(&grid.weights) {
        let c = coherent_coefficients(a, n_dim);
        completion -= (&c * c.adjoint()).scale(w / PI);
    }
    linalg::hermitian_part(&completion)
}

/// Spectral norm of the completion: how far the discretised coherent-state
/// POVM is from resolving the identity.
pub fn overcompleteness_defect(grid: &PolarGrid, n_dim: usize) -> Result<f64> {
    let eig = linalg::herm_eig(&bargmann_completion(grid, n_dim))?;
    Ok(eig.max_eigenvalue().abs().max(eig.min_eigenvalue().abs()))
}

/// Discretised Bargmann measurement on the truncated space: outcome `j`
/// for node `α_j` with POVM element `w_j π⁻¹|ψ_j⟩⟨ψ_j|`, and a final
/// outcome for the completion `I − Σ_j`.
pub fn bargmann_channel(grid: &PolarGrid, n_dim: usize) -> Result<KrausChannel> {
    let outcomes = grid.len() + 1;
    let mut kraus = Vec::new();
    for (&a, &w) in grid.nodes.iter().zip(&grid.weights) {
        let c = coherent_coefficients(a, n_dim);
        let s = (w / PI).sqrt();
        let j = kraus.len();
        let mut k = CMatrix::zeros(outcomes, n_dim);
        for i in 0..n_dim {
            k[(j, i)] = c[i].conj() * s;
        }
        kraus.push(k);
    }
    let eig = linalg::herm_eig(&bargmann_completion(grid, n_dim))?;
    if eig.min_eigenvalue() < -1e-8 {
        return Err(Error::GridTooCoarse { min_eigenvalue: eig.min_eigenvalue() });
    }
    for idx in 0..n_dim {
        let lam = eig.eigenvalues[idx];
        if lam <= 0.0 {
            continue;
        }
        let v = eig.vector(idx);
        let mut k = CMatrix::zeros(outcomes, n_dim);
        for i in 0..n_dim {
            k[(outcomes - 1, i)] = v[i].conj() * lam.sqrt();
        }
        kraus.push(k);
    }
    KrausChannel::with_defect(kraus)
}

/// Gaussian smoothing of `Q_ρ` with kernel `π⁻¹c²e^{−c²|γ|²}`,
/// `c² = e^t − 1`, in closed form: with `s = 1 − e^{−t}`,
/// `S(β) = π⁻¹ s e^{−s|β|²} Σ_j j! e^{−tj} ⟨u_j|ρ|u_j⟩`,
/// `(u_j)_n = C(n,j) (sβ)^{n−j} / √n!`.
pub fn smoothed_q_value(rho: &CMatrix, t: f64, beta: C64) -> f64 {
    let n_dim = rho.nrows();
    let s = -(-t).exp_m1();
    let lf = ln_factorials(n_dim + 1);
    let sb = beta * s;
    let mut total = 0.0;
    for j in 0..n_dim {
        let u = DVector::from_fn(n_dim, |n, _| {
            if n < j {
                return c64(0.0, 0.0);
            }
            let ln_mag = ln_binom(&lf, n, j) - 0.5 * lf[n];
            let pow = if n == j { c64(1.0, 0.0) } else { sb.powu((n - j) as u32) };
            pow * ln_mag.exp()
        });
        let quad = (u.adjoint() * rho * &u)[(0, 0)].re;
        total += (lf[j] - t * j as f64).exp() * quad;
    }
    s * (-s * beta.norm_sqr()).exp() * total / PI
}

/// `D(t) = ∫ |S_t − Q_ρ| d²β` by quadrature on `grid`.
pub fn smoothing_defect(rho: &CMatrix, t: f64, grid: &PolarGrid) -> f64 {
    let diffs: Vec<f64> =
        grid.nodes.iter().map(|&b| (smoothed_q_value(rho, t, b) - q_value(rho, b)).abs()).collect();
    grid.integrate(&diffs)
}

/// `max` over probe states of `‖Λ_{t1}(Λ_{t2}(ρ)) − Λ_{t1+t2}(ρ)‖₁`.
pub fn semigroup_check(p1: &AmplifierParams, p2: &AmplifierParams) -> Result<f64> {
    if p1.fock_dim != p2.fock_dim || p1.kraus_cutoff != p2.kraus_cutoff {
        return Err(Error::ParameterMismatch("semigroup check needs equal N and M".into()));
    }
    let a1 = amplifier_kraus(p1)?;
    let a2 = amplifier_kraus(p2)?;
    let a12 = amplifier_kraus(&p1.with_t(p1.t + p2.t))?;
    let worst = probe_states(p1.fock_dim)
        .iter()
        .map(|rho| linalg::trace_norm(&(a1.apply_operator(&a2.apply_operator(rho)) - a12.apply_operator(rho))))
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Vacuum, `δ_1`, `δ_2` (when present) and two coherent states.
pub fn probe_states(n_dim: usize) -> Vec<CMatrix> {
    let mut out = Vec::new();
    for n in 0..3.min(n_dim) {
        out.push(linalg::matrix_unit(n_dim, n, n));
    }
    for a in [c64(0.5, 0.0), c64(-0.3, 0.4)] {
        out.push(linalg::projector(&coherent_state(a, n_dim).vector));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: f64) -> AmplifierParams {
        AmplifierParams::new(t, 20, 20).unwrap()
    }

    #[test]
    fn kraus_examples() {
        let t = 2f64.ln();
        let k = amplifier_kraus(&params(t)).unwrap();
        assert!((k.kraus()[1][(1, 0)].re - 0.5).abs() < 1e-15);
        let t = 0.7;
        let k = amplifier_kraus(&params(t)).unwrap();
        assert!((k.kraus()[0][(0, 0)].re - (-t / 2.0).exp()).abs() < 1e-15);
        let lf = ln_factorials(400);
        let partial: Vec<f64> = [5, 50, 300]
            .iter()
            .map(|&m_cut| (0..m_cut).map(|m| ln_weight(&lf, 0.4, 3, m).exp()).sum())
            .collect();
        assert!(partial[0] < partial[1] && partial[1] <= partial[2]);
        assert!((partial[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_reported() {
        assert!(truncation_warning(&AmplifierParams::new(2.0, 6, 6).unwrap()));
        assert!(!truncation_warning(&AmplifierParams::new(0.3, 40, 40).unwrap()));
    }

    #[test]
    fn coherent_examples() {
        let v = coherent_state(c64(0.0, 0.0), 5).vector;
        assert_eq!(v[0], c64(1.0, 0.0));
        let (a, b) = (c64(0.3, -0.4), c64(-0.2, 0.5));
        let ca = coherent_coefficients(a, 40);
        let cb = coherent_coefficients(b, 40);
        let overlap = ca.dotc(&cb);
        let want = (-(a.norm_sqr() + b.norm_sqr()) / 2.0 + a.conj() * b).exp();
        assert!((overlap - want).norm() < 1e-12);
        let lf = ln_factorials(10);
        for n in 0..10 {
            let poisson = (-a.norm_sqr() + n as f64 * a.norm_sqr().ln() - lf[n]).exp();
            assert!((ca[n].norm_sqr() - poisson).abs() < 1e-15);
        }
    }

    #[test]
    fn q_examples() {
        let vac = linalg::matrix_unit(20, 0, 0);
        assert!((q_value(&vac, c64(0.0, 0.0)) - 1.0 / PI).abs() < 1e-15);
        let a = c64(0.7, -1.1);
        assert!((q_value(&vac, a) - (-a.norm_sqr()).exp() / PI).abs() < 1e-15);
        let grid = PolarGrid::for_fock(20, 48, 48);
        let q = q_function(&vac, &grid);
        assert!(q.values.iter().all(|&v| v <= 1.0 / PI + 1e-12));
        assert!((q.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_matches_stinespring() {
        assert!(conjugate_closed_form_error(&params(1.0), 8).unwrap() < 1e-12);
        assert!((amplifier_conjugate_element(0.5, 0, 0, 3, 3) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(amplifier_conjugate_element(0.5, 1, 0, 3, 3), 0.0);
    }

    #[test]
    fn smoothing_of_vacuum_is_gaussian() {
        let vac = linalg::matrix_unit(10, 0, 0);
        let t = 1.5;
        let s = 1.0 - (-t as f64).exp();
        let b = c64(0.4, 0.9);
        let want = s * (-s * b.norm_sqr()).exp() / PI;
        assert!((smoothed_q_value(&vac, t, b) - want).abs() < 1e-15);
    }

    #[test]
    fn smoothing_matches_direct_convolution() {
        let rho = {
            let v = coherent_state(c64(0.6, 0.2), 8).vector;
            (linalg::projector(&v) + linalg::matrix_unit(8, 2, 2)).unscale(2.0)
        };
        let t: f64 = 0.8;
        let c2 = t.exp_m1();
        let kernel = PolarGrid::new(9.0 / c2.sqrt(), 80, 64);
        let beta = c64(0.5, -0.3);
        let direct: f64 = kernel
            .nodes
            .iter()
            .zip(&kernel.weights)
            .map(|(&g, &w)| w * c2 / PI * (-c2 * g.norm_sqr()).exp() * q_value(&rho, beta - g))
            .sum();
        assert!((direct - smoothed_q_value(&rho, t, beta)).abs() < 1e-10);
    }

    #[test]
    fn semigroup_is_exact_in_the_block() {
        let p = AmplifierParams::new(0.5, 20, 20).unwrap();
        assert!(semigroup_check(&p, &p).unwrap() < 1e-12);
    }

    #[test]
    fn bargmann_examples() {
        let grid = PolarGrid::for_fock(4, 24, 16);
        let ch = bargmann_channel(&grid, 4).unwrap();
        assert!(ch.tp_defect() < 1e-10);
        let vac = linalg::matrix_unit(4, 0, 0);
        let out = ch.apply_operator(&vac);
        for (j, (&a, &w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
            assert!((out[(j, j)].re - w * (-a.norm_sqr()).exp() / PI).abs() < 1e-14);
        }
        let coarse = PolarGrid::new(4.0, 2, 2);
        assert!(matches!(bargmann_channel(&coarse, 4), Err(Error::GridTooCoarse { .. })));
    }
}
