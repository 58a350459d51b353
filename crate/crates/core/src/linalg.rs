//! Dense complex matrix primitives: Hermitian eigendecomposition, tensor
//! products, partial traces, imaginary powers and nullspace solves.
//!
//! Everything here is dense. The "support" of a positive matrix is the span
//! of eigenvectors whose eigenvalue exceeds `support_cutoff() * λ_max`; that
//! single threshold is shared by every module in the crate.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative symmetry tolerance for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative eigenvalue floor below which a matrix is rejected as not PSD.
pub const PSD_TOL: f64 = 1e-10;

const DEFAULT_SUPPORT_CUTOFF: f64 = 1e-12;
static SUPPORT_CUTOFF: AtomicU64 = AtomicU64::new(0);

/// Relative eigenvalue cutoff defining the support of a PSD matrix.
pub fn support_cutoff() -> f64 {
    match SUPPORT_CUTOFF.load(Ordering::Relaxed) {
        0 => DEFAULT_SUPPORT_CUTOFF,
        bits => f64::from_bits(bits),
    }
}

/// Override the support cutoff for the whole process. Intended to be called
/// once at startup (the CLI exposes it as `--support-cutoff`).
pub fn set_support_cutoff(cutoff: f64) {
    assert!(cutoff > 0.0 && cutoff < 1.0, "support cutoff must lie in (0, 1)");
    SUPPORT_CUTOFF.store(cutoff.to_bits(), Ordering::Relaxed);
}

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// `|i><j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

pub fn from_real_diagonal(diag: &[f64]) -> CMatrix {
    let n = diag.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c64(diag[i], 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn ket_bra(ket: &DVector<C64>, bra: &DVector<C64>) -> CMatrix {
    ket * bra.adjoint()
}

pub fn projector(v: &DVector<C64>) -> CMatrix {
    v * v.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// Hilbert–Schmidt inner product `Tr(X† Y)`.
pub fn hs_inner(x: &CMatrix, y: &CMatrix) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn commutator(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x * y - y * x
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix) -> bool {
    m.nrows() == m.ncols() && hermitian_residual(m) <= HERMITIAN_TOL * max_abs(m).max(f64::MIN_POSITIVE)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix with a reproducible gauge.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.eigenvectors.column(k).into_owned()
    }

    /// `U f(Λ) U†` for a complex spectral function.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let u = &self.eigenvectors;
        let n = self.dim();
        let mut scaled = u.clone();
        for k in 0..n {
            let fk = f(self.eigenvalues[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        scaled * u.adjoint()
    }

    /// Indices of eigenvalues above the support cutoff.
    pub fn support_indices(&self) -> Vec<usize> {
        let top = self.max_eigenvalue().max(0.0);
        let floor = support_cutoff() * top;
        (0..self.dim()).filter(|&k| top > 0.0 && self.eigenvalues[k] > floor).collect()
    }

    /// Columns spanning the support, in ascending eigenvalue order.
    pub fn support_basis(&self) -> CMatrix {
        let idx = self.support_indices();
        let n = self.dim();
        CMatrix::from_fn(n, idx.len(), |i, j| self.eigenvectors[(i, idx[j])])
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues,
/// eigenvectors phase-normalised so that the first significant entry is real
/// positive, near-degenerate eigenvalues ordered lexicographically by their
/// normalised eigenvectors.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    let n = ensure_square(a)?;
    let scale = max_abs(a);
    let residual = hermitian_residual(a);
    if residual > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && residual > 0.0 {
        return Err(Error::NonHermitian { residual });
    }
    if n == 0 {
        return Ok(HermEig { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) });
    }
    let sym = hermitian_part(a);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut vecs = eig.eigenvectors;
    for k in 0..n {
        normalize_phase(&mut vecs, k);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    // lexicographic tie-break inside clusters of numerically equal eigenvalues
    let tie_tol = 1e-10 * scale.max(1e-300);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= tie_tol {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&i, &j| lex_cmp(&vecs, i, j));
        }
        start = end;
    }

    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(HermEig { eigenvalues, eigenvectors })
}

fn normalize_phase(vecs: &mut CMatrix, k: usize) {
    let col_max = vecs.column(k).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if col_max == 0.0 {
        return;
    }
    let pivot = vecs.column(k).iter().copied().find(|z| z.norm() > 1e-8 * col_max);
    if let Some(p) = pivot {
        let phase = p.conj() / p.norm();
        for i in 0..vecs.nrows() {
            vecs[(i, k)] *= phase;
        }
    }
}

fn lex_cmp(vecs: &CMatrix, a: usize, b: usize) -> std::cmp::Ordering {
    for i in 0..vecs.nrows() {
        let (x, y) = (vecs[(i, a)], vecs[(i, b)]);
        let ord = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if (x - y).norm() > 1e-12 && ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigendecomposition of a matrix that must be positive semidefinite.
pub fn psd_eig(rho: &CMatrix) -> Result<HermEig> {
    let eig = herm_eig(rho)?;
    let top = eig.max_eigenvalue().max(0.0);
    let low = eig.min_eigenvalue();
    if low < -PSD_TOL * top.max(f64::MIN_POSITIVE) && low < 0.0 {
        return Err(Error::NotPsd { min_eigenvalue: low });
    }
    Ok(eig)
}

/// Orthogonal projection onto the support of a PSD matrix.
pub fn support_projection(rho: &CMatrix) -> Result<CMatrix> {
    let eig = psd_eig(rho)?;
    let v = eig.support_basis();
    Ok(&v * v.adjoint())
}

/// `ρ^{it}` on the support of `ρ`, zero on its kernel.
pub fn imaginary_power(rho: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = psd_eig(rho)?;
    Ok(imaginary_power_from(&eig, t))
}

pub(crate) fn imaginary_power_from(eig: &HermEig, t: f64) -> CMatrix {
    let top = eig.max_eigenvalue();
    let floor = support_cutoff() * top;
    eig.map(|lambda| {
        if top > 0.0 && lambda > floor {
            C64::from_polar(1.0, t * lambda.ln())
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Generic power of a PSD matrix on its support (`p` may be negative).
pub fn psd_power(rho: &CMatrix, p: f64) -> Result<CMatrix> {
    let eig = psd_eig(rho)?;
    let top = eig.max_eigenvalue();
    let floor = support_cutoff() * top;
    Ok(eig.map(|l| if top > 0.0 && l > floor { c64(l.powf(p), 0.0) } else { C64::new(0.0, 0.0) }))
}

/// Projection onto the PSD cone in Frobenius norm (eigenvalue clipping).
pub fn psd_clip(m: &CMatrix) -> CMatrix {
    let sym = hermitian_part(m);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let u = eig.eigenvectors;
    let n = u.nrows();
    let mut scaled = u.clone();
    for k in 0..n {
        let l = eig.eigenvalues[k].max(0.0);
        for i in 0..n {
            scaled[(i, k)] *= l;
        }
    }
    let out = scaled * u.adjoint();
    hermitian_part(&out)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &CMatrix) -> f64 {
    let sym = hermitian_part(h);
    nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().map(|l| l.abs()).sum()
}

/// Trace tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;

/// Check that `rho` is a `d×d` density matrix (Hermitian, PSD, unit trace).
pub fn check_density(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::ShapeMismatch(format!("expected {d}x{d} state, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let tr = trace(rho);
    if (tr - C64::new(1.0, 0.0)).norm() > STATE_TOL {
        return Err(Error::NotState(format!("trace {tr} differs from 1")));
    }
    if !is_hermitian(rho) {
        return Err(Error::NotState(format!("symmetry residual {:.3e}", hermitian_residual(rho))));
    }
    let low = herm_eig(rho)?.min_eigenvalue();
    if low < -STATE_TOL {
        return Err(Error::NotState(format!("negative eigenvalue {low:.3e}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on `C^dA ⊗ C^dB`, keeping one factor.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    let n = ensure_square(m)?;
    if da * db != n {
        return Err(Error::ShapeMismatch(format!("dims {da}x{db} do not factor a side of {n}")));
    }
    Ok(match keep {
        Subsystem::A => CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()),
        Subsystem::B => CMatrix::from_fn(db, db, |i, j| (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()),
    })
}

/// Orthonormal (Hilbert–Schmidt) basis of the joint nullspace of linear maps
/// acting on `d×d` matrices.
pub fn solve_linear_space(d: usize, constraints: &[&dyn Fn(&CMatrix) -> CMatrix]) -> Vec<CMatrix> {
    let units: Vec<CMatrix> = (0..d * d).map(|k| matrix_unit(d, k / d, k % d)).collect();
    solve_linear_space_in(&units, constraints)
}

/// Nullspace restricted to the span of an orthonormal family `subspace`.
pub fn solve_linear_space_in(subspace: &[CMatrix], constraints: &[&dyn Fn(&CMatrix) -> CMatrix]) -> Vec<CMatrix> {
    let r = subspace.len();
    if r == 0 {
        return vec![];
    }
    if constraints.is_empty() {
        return subspace.to_vec();
    }
    let images: Vec<Vec<CMatrix>> = subspace.iter().map(|y| constraints.iter().map(|c| c(y)).collect()).collect();
    let rows: usize = images[0].iter().map(|m| m.len()).sum();
    let padded = rows.max(r);
    let mut op = CMatrix::zeros(padded, r);
    for (j, imgs) in images.iter().enumerate() {
        let mut row = 0;
        for m in imgs {
            for z in m.iter() {
                op[(row, j)] = *z;
                row += 1;
            }
        }
    }
    let svd = op.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let tol = 1e-10 * smax.max(1.0);
    let mut out = Vec::new();
    for k in 0..vt.nrows() {
        if svd.singular_values[k] <= tol {
            let mut x = CMatrix::zeros(subspace[0].nrows(), subspace[0].ncols());
            for j in 0..r {
                x += &subspace[j] * vt[(k, j)].conj();
            }
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        let diff = (a - b).norm();
        assert!(diff <= tol, "difference {diff:.3e} exceeds {tol:.1e}\n{a}\n{b}");
    }

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
    }

    fn pauli_z() -> CMatrix {
        from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn eig_identity() {
        let e = herm_eig(&identity(2)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0]);
        assert_close(&e.eigenvectors, &identity(2), 1e-14);
    }

    #[test]
    fn eig_diagonal_sorted() {
        let e = herm_eig(&from_real_diagonal(&[3.0, -1.0])).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eig_pauli_x() {
        let e = herm_eig(&pauli_x()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let minus = DVector::from_vec(vec![c64(s, 0.), c64(-s, 0.)]);
        let plus = DVector::from_vec(vec![c64(s, 0.), c64(s, 0.)]);
        assert!((e.vector(0) - minus).norm() < 1e-12);
        assert!((e.vector(1) - plus).norm() < 1e-12);
    }

    #[test]
    fn eig_rejects_bad_input() {
        let m = CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(0., 0.), c64(0., 0.)]);
        assert!(matches!(herm_eig(&m), Err(Error::NonHermitian { .. })));
        assert!(matches!(herm_eig(&CMatrix::zeros(2, 3)), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        let rho = from_real_diagonal(&[0.25, 0.75]);
        let sigma = CMatrix::from_row_slice(2, 2, &[c64(2., 0.), c64(0., 1.), c64(0., -1.), c64(1., 0.)]);
        let prod = kron(&rho, &sigma);
        assert_close(&partial_trace(&prod, (2, 2), Subsystem::A).unwrap(), &rho.scale(3.0), 1e-14);

        let mut omega = DVector::zeros(4);
        omega[0] = c64(std::f64::consts::FRAC_1_SQRT_2, 0.);
        omega[3] = c64(std::f64::consts::FRAC_1_SQRT_2, 0.);
        let bell = projector(&omega);
        assert_close(&partial_trace(&bell, (2, 2), Subsystem::A).unwrap(), &identity(2).scale(0.5), 1e-14);

        assert_close(&partial_trace(&identity(4), (2, 2), Subsystem::B).unwrap(), &identity(2).scale(2.0), 0.0);
        assert!(matches!(partial_trace(&identity(4), (3, 2), Subsystem::A), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn imaginary_power_examples() {
        let d = 3;
        let rho = identity(d).scale(1.0 / d as f64);
        let t = 0.7;
        let expected = identity(d) * C64::from_polar(1.0, -t * (d as f64).ln());
        assert_close(&imaginary_power(&rho, t).unwrap(), &expected, 1e-13);

        let p = from_real_diagonal(&[1.0, 0.0]);
        assert_close(&imaginary_power(&p, 1.0).unwrap(), &p, 1e-14);
        assert_close(&imaginary_power(&p, 0.0).unwrap(), &p, 1e-14);

        // diag(e, 1)/(e+1) at t = π: entries (e/(e+1))^{iπ}, (1/(e+1))^{iπ}
        let e = std::f64::consts::E;
        let rho = from_real_diagonal(&[e / (e + 1.0), 1.0 / (e + 1.0)]);
        let pi = std::f64::consts::PI;
        let a = C64::from_polar(1.0, pi * (1.0 - (e + 1.0).ln()));
        let b = C64::from_polar(1.0, -pi * (e + 1.0).ln());
        let expected = CMatrix::from_row_slice(2, 2, &[a, c64(0., 0.), c64(0., 0.), b]);
        assert_close(&imaginary_power(&rho, pi).unwrap(), &expected, 1e-13);

        assert!(matches!(imaginary_power(&from_real_diagonal(&[1.0, -0.5]), 1.0), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn nullspace_examples() {
        let id = identity(2);
        let all = solve_linear_space(2, &[&|x: &CMatrix| commutator(x, &id)]);
        assert_eq!(all.len(), 4);

        let z = pauli_z();
        let diag = solve_linear_space(2, &[&|x: &CMatrix| commutator(x, &z)]);
        assert_eq!(diag.len(), 2);
        for m in &diag {
            assert!(m[(0, 1)].norm() < 1e-12 && m[(1, 0)].norm() < 1e-12);
            assert!(commutator(m, &z).norm() < 1e-9);
        }

        let x = pauli_x();
        let scalars = solve_linear_space(2, &[&|m: &CMatrix| commutator(m, &x), &|m: &CMatrix| commutator(m, &z)]);
        assert_eq!(scalars.len(), 1);
        let s = &scalars[0];
        assert!((s[(0, 0)] - s[(1, 1)]).norm() < 1e-12);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_and_clip() {
        let h = from_real_diagonal(&[0.5, -0.25]);
        assert!((trace_norm(&h) - 0.75).abs() < 1e-14);
        assert_close(&psd_clip(&h), &from_real_diagonal(&[0.5, 0.0]), 1e-14);
    }
}
