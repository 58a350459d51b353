//! Unital *-subalgebras of `M_d`: generation, commutants, intersections and
//! the block decomposition `U (⊕_i M_{n_i} ⊗ I_{m_i}) U†`.
//!
//! An algebra is stored as a Hilbert–Schmidt orthonormal basis of its span.
//! All equalities and inclusions are decided by span membership at
//! [`SPAN_TOL`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, commutator, hs_inner, CMatrix, C64};

/// Span-membership tolerance (HS norm of the residual of a unit vector).
pub const SPAN_TOL: f64 = 1e-9;
/// Relative residual above which a candidate counts as a new direction
/// while building a span.
const NEW_DIRECTION_TOL: f64 = 1e-7;
const GENERIC_SEED: u64 = 0x5eed_a16e;

#[derive(Debug, Clone)]
pub struct StarAlgebra {
    d: usize,
    basis: Vec<CMatrix>,
    blocks: Option<BlockStructure>,
}

/// `U† A U = ⊕_i M_{n_i} ⊗ I_{m_i}`; `factors[i] = (n_i, m_i)`, columns of
/// `change_of_basis` grouped block by block with index `k·m_i + j`.
#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub factors: Vec<(usize, usize)>,
    pub change_of_basis: CMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct BlockReport(pub Vec<[usize; 2]>);

impl BlockStructure {
    pub fn report(&self) -> BlockReport {
        BlockReport(self.factors.iter().map(|&(n, m)| [n, m]).collect())
    }

    /// Column offsets of each block inside `change_of_basis`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.factors
            .iter()
            .map(|&(n, m)| {
                let o = off;
                off += n * m;
                o
            })
            .collect()
    }

    /// Dimension `Σ n_i` of the reduced (multiplicity-free) picture.
    pub fn reduced_dim(&self) -> usize {
        self.factors.iter().map(|&(n, _)| n).sum()
    }

    pub fn is_commutative(&self) -> bool {
        self.factors.iter().all(|&(n, _)| n == 1)
    }
}

impl StarAlgebra {
    pub fn scalars(d: usize) -> Self {
        Self::from_orthonormal(d, vec![linalg::identity(d).unscale((d as f64).sqrt())])
    }

    pub fn full(d: usize) -> Self {
        Self::from_orthonormal(d, (0..d * d).map(|k| linalg::matrix_unit(d, k / d, k % d)).collect())
    }

    pub fn diagonal(d: usize) -> Self {
        Self::from_orthonormal(d, (0..d).map(|k| linalg::matrix_unit(d, k, k)).collect())
    }

    /// Algebra spanned by `mats`, which must already span a unital *-algebra.
    pub fn from_span(d: usize, mats: &[CMatrix]) -> Self {
        let mut basis = Vec::new();
        for m in mats {
            push_if_new(&mut basis, m.clone());
        }
        Self::from_orthonormal(d, basis)
    }

    pub(crate) fn from_orthonormal(d: usize, basis: Vec<CMatrix>) -> Self {
        Self { d, basis, blocks: None }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn blocks(&self) -> Option<&BlockStructure> {
        self.blocks.as_ref()
    }

    /// HS-orthogonal projection onto the span.
    pub fn project(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.d, self.d);
        for b in &self.basis {
            out += b * hs_inner(b, x);
        }
        out
    }

    /// Distance from `x` to the span.
    pub fn span_residual(&self, x: &CMatrix) -> f64 {
        (x - self.project(x)).norm()
    }

    pub fn contains(&self, x: &CMatrix) -> bool {
        self.span_residual(x) <= SPAN_TOL * x.norm().max(1.0)
    }

    /// Check the unital *-algebra axioms on the basis.
    pub fn verify_closed(&self) -> bool {
        if !self.contains(&linalg::identity(self.d)) {
            return false;
        }
        self.basis.iter().all(|x| {
            self.contains(&x.adjoint()) && self.basis.iter().all(|y| self.contains(&(x * y)))
        })
    }

    fn hermitian_spanning(&self) -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(2 * self.basis.len());
        for b in &self.basis {
            let h = b + b.adjoint();
            let k = (b - b.adjoint()) * c64(0.0, 1.0);
            out.push(h);
            out.push(k);
        }
        out
    }

    /// Random Hermitian element (fixed seed stream so results are
    /// reproducible).
    fn generic_hermitian(&self, rng: &mut ChaCha8Rng) -> CMatrix {
        let mut h = CMatrix::zeros(self.d, self.d);
        for g in self.hermitian_spanning() {
            let c: f64 = rng.random_range(-1.0..1.0);
            h += g.scale(c);
        }
        linalg::hermitian_part(&h)
    }

    fn generic_element(&self, rng: &mut ChaCha8Rng) -> CMatrix {
        let mut a = CMatrix::zeros(self.d, self.d);
        for b in &self.basis {
            let c = c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            a += b * c;
        }
        a
    }
}

/// Gram–Schmidt step (twice, for stability). Returns whether `x` was added.
fn push_if_new(basis: &mut Vec<CMatrix>, x: CMatrix) -> bool {
    let norm = x.norm();
    if norm < 1e-12 {
        return false;
    }
    let mut r = x;
    for _ in 0..2 {
        for b in basis.iter() {
            let c = hs_inner(b, &r);
            r -= b * c;
        }
    }
    let rn = r.norm();
    if rn > NEW_DIRECTION_TOL * norm {
        basis.push(r.unscale(rn));
        true
    } else {
        false
    }
}

/// Smallest unital *-algebra containing `generators`.
pub fn generate_algebra(generators: &[CMatrix], d: usize) -> Result<StarAlgebra> {
    if let Some(g) = generators.iter().find(|g| g.shape() != (d, d)) {
        return Err(Error::ShapeMismatch(format!("generator is {}x{}, expected {d}x{d}", g.nrows(), g.ncols())));
    }
    let mut basis = Vec::new();
    push_if_new(&mut basis, linalg::identity(d));
    for g in generators {
        push_if_new(&mut basis, g.clone());
        push_if_new(&mut basis, g.adjoint());
    }
    let cap = d * d;
    let mut frontier_start = 0;
    loop {
        let before = basis.len();
        let snapshot = basis.clone();
        for (i, x) in snapshot.iter().enumerate() {
            for (j, y) in snapshot.iter().enumerate() {
                if i < frontier_start && j < frontier_start {
                    continue;
                }
                push_if_new(&mut basis, x * y);
            }
            if i >= frontier_start {
                push_if_new(&mut basis, x.adjoint());
            }
        }
        if basis.len() > cap {
            return Err(Error::DegenerateNumerics(format!("closure exceeded dimension {cap}")));
        }
        if basis.len() == before {
            break;
        }
        frontier_start = before;
    }
    Ok(StarAlgebra::from_orthonormal(d, basis))
}

fn eigen_clusters(eig: &linalg::HermEig, rel_tol: f64) -> Vec<Vec<usize>> {
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..eig.dim() {
        match clusters.last_mut() {
            Some(c) if eig.eigenvalues[k] - eig.eigenvalues[*c.last().unwrap()] <= rel_tol * scale => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    clusters
}

/// Commutant `{X : [X, B] = 0 ∀ B ∈ A}`.
///
/// The search is restricted to matrices that are block diagonal in the
/// eigenbasis of a generic Hermitian element of `A`, then two further generic
/// elements are imposed as constraints; the result is checked against every
/// basis element and recomputed against all of them if the check fails.
pub fn commutant(a: &StarAlgebra) -> Result<StarAlgebra> {
    let d = a.d;
    let mut rng = ChaCha8Rng::seed_from_u64(GENERIC_SEED);
    let h1 = a.generic_hermitian(&mut rng);
    let h2 = a.generic_hermitian(&mut rng);
    let h3 = a.generic_hermitian(&mut rng);
    let eig = linalg::herm_eig(&h1)?;
    let mut subspace = Vec::new();
    for cluster in eigen_clusters(&eig, 1e-9) {
        for &p in &cluster {
            for &q in &cluster {
                subspace.push(linalg::ket_bra(&eig.vector(p), &eig.vector(q)));
            }
        }
    }
    let c2 = |x: &CMatrix| commutator(x, &h2);
    let c3 = |x: &CMatrix| commutator(x, &h3);
    let mut basis = linalg::solve_linear_space_in(&subspace, &[&c2, &c3]);
    let ok = basis.iter().all(|x| a.basis.iter().all(|b| commutator(x, b).norm() <= 1e-8));
    if !ok {
        let closures: Vec<Box<dyn Fn(&CMatrix) -> CMatrix>> =
            a.basis.iter().map(|b| Box::new(move |x: &CMatrix| commutator(x, b)) as Box<dyn Fn(&CMatrix) -> CMatrix>).collect();
        let refs: Vec<&dyn Fn(&CMatrix) -> CMatrix> = closures.iter().map(|c| c.as_ref()).collect();
        basis = linalg::solve_linear_space_in(&subspace, &refs);
    }
    let mut ortho = Vec::new();
    for x in basis {
        push_if_new(&mut ortho, x);
    }
    Ok(StarAlgebra::from_orthonormal(d, ortho))
}

fn check_ambient(a: &StarAlgebra, b: &StarAlgebra) -> Result<()> {
    if a.d != b.d {
        return Err(Error::AmbientMismatch { left: a.d, right: b.d });
    }
    Ok(())
}

/// Inclusion `A ⊆ B` of spans.
pub fn algebra_leq(a: &StarAlgebra, b: &StarAlgebra) -> Result<bool> {
    check_ambient(a, b)?;
    Ok(a.basis.iter().all(|x| b.span_residual(x) <= SPAN_TOL))
}

pub fn algebra_eq(a: &StarAlgebra, b: &StarAlgebra) -> Result<bool> {
    Ok(a.dim() == b.dim() && algebra_leq(a, b)? && algebra_leq(b, a)?)
}

/// `A ∩ B` from the unit eigenvectors of `C†C`, `C_jk = ⟨b_j, a_k⟩`.
pub fn intersect(a: &StarAlgebra, b: &StarAlgebra) -> Result<StarAlgebra> {
    check_ambient(a, b)?;
    let (na, nb) = (a.dim(), b.dim());
    let c = CMatrix::from_fn(nb, na, |j, k| hs_inner(&b.basis[j], &a.basis[k]));
    let gram = linalg::hermitian_part(&(c.adjoint() * c));
    let eig = linalg::herm_eig(&gram)?;
    let mut basis = Vec::new();
    for k in 0..na {
        if 1.0 - eig.eigenvalues[k] <= 1e-10 {
            let v = eig.vector(k);
            let mut x = CMatrix::zeros(a.d, a.d);
            for (coef, ak) in v.iter().zip(&a.basis) {
                x += ak * *coef;
            }
            push_if_new(&mut basis, x);
        }
    }
    let out = StarAlgebra::from_orthonormal(a.d, basis);
    if !out.verify_closed() {
        return Err(Error::DegenerateNumerics("intersection of spans is not a *-algebra".into()));
    }
    Ok(out)
}

/// Trace-preserving conditional expectation onto `A` (HS projection).
pub fn conditional_expectation(a: &StarAlgebra, x: &CMatrix) -> Result<CMatrix> {
    if x.shape() != (a.d, a.d) {
        return Err(Error::AmbientMismatch { left: a.d, right: x.nrows() });
    }
    Ok(a.project(x))
}

pub fn center(a: &StarAlgebra) -> Result<StarAlgebra> {
    intersect(a, &commutant(a)?)
}

/// Block decomposition via the minimal central projections and a system of
/// matrix units inside each central summand.
pub fn block_decompose(a: &StarAlgebra) -> Result<BlockStructure> {
    let d = a.d;
    let z = center(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(GENERIC_SEED ^ 0xb10c);
    let zh = z.generic_hermitian(&mut rng);
    let zeig = linalg::herm_eig(&zh)?;

    let mut factors = Vec::new();
    let mut columns: Vec<nalgebra::DVector<C64>> = Vec::new();
    for cluster in eigen_clusters(&zeig, 1e-8) {
        let w = CMatrix::from_fn(d, cluster.len(), |i, j| zeig.eigenvectors[(i, cluster[j])]);
        let p = &w * w.adjoint();
        if (&p * &p - &p).norm() > 1e-8 || a.span_residual(&p) > 1e-8 {
            return Err(Error::DegenerateNumerics("central projection is not idempotent in A".into()));
        }
        let rank = cluster.len();
        let mut cut = Vec::new();
        for b in &a.basis {
            push_if_new(&mut cut, b * &p);
        }
        let n = (cut.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != cut.len() || rank % n != 0 {
            return Err(Error::DegenerateNumerics(format!(
                "central summand of rank {rank} has algebra dimension {}",
                cut.len()
            )));
        }
        let m = rank / n;
        let block = matrix_units(a, &w, n, m, &mut rng)?;
        columns.extend(block);
        factors.push((n, m));
    }
    if columns.len() != d {
        return Err(Error::DegenerateNumerics("central projections do not sum to the identity".into()));
    }
    let u = CMatrix::from_columns(&columns);
    let bs = BlockStructure { factors, change_of_basis: u };
    verify_blocks(a, &bs)?;
    Ok(bs)
}

/// Orthonormal vectors `v_{k,j} = e_{k1} f_j` for one central summand with
/// range `w`, ordered `k·m + j`.
fn matrix_units(
    a: &StarAlgebra,
    w: &CMatrix,
    n: usize,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<nalgebra::DVector<C64>>> {
    for _attempt in 0..4 {
        let h = a.generic_hermitian(rng);
        let hr = linalg::hermitian_part(&(w.adjoint() * &h * w));
        let eig = linalg::herm_eig(&hr)?;
        let clusters = eigen_clusters(&eig, 1e-8);
        if clusters.len() != n || clusters.iter().any(|c| c.len() != m) {
            continue;
        }
        let sub = |c: &Vec<usize>| {
            let local = CMatrix::from_fn(hr.nrows(), c.len(), |i, j| eig.eigenvectors[(i, c[j])]);
            w * local
        };
        let f = sub(&clusters[0]);
        let x = a.generic_element(rng);
        let mut out: Vec<nalgebra::DVector<C64>> = (0..m).map(|j| f.column(j).into_owned()).collect();
        let mut good = true;
        for c in clusters.iter().skip(1) {
            let g = sub(c);
            let t = g.adjoint() * &x * &f;
            let svd = t.svd(true, true);
            let smin = svd.singular_values.iter().fold(f64::INFINITY, |mm, &s| mm.min(s));
            let smax = svd.singular_values.iter().fold(0.0f64, |mm, &s| mm.max(s));
            if smin < 1e-6 * smax.max(1e-300) || smax == 0.0 {
                good = false;
                break;
            }
            let unit = svd.u.unwrap() * svd.v_t.unwrap();
            let v = &g * unit;
            out.extend((0..m).map(|j| v.column(j).into_owned()));
        }
        if good {
            // reorder from (k, j) cluster-major to index k·m + j, which is
            // already the order produced above
            return Ok(out);
        }
    }
    Err(Error::DegenerateNumerics("could not build matrix units for a central summand".into()))
}

fn verify_blocks(a: &StarAlgebra, bs: &BlockStructure) -> Result<()> {
    let u = &bs.change_of_basis;
    if (u.adjoint() * u - linalg::identity(a.d)).norm() > 1e-8 {
        return Err(Error::DegenerateNumerics("change of basis is not unitary".into()));
    }
    let offsets = bs.offsets();
    for b in &a.basis {
        let bp = u.adjoint() * b * u;
        let mut expected = CMatrix::zeros(a.d, a.d);
        for (&(n, m), &off) in bs.factors.iter().zip(&offsets) {
            let blk = bp.view((off, off), (n * m, n * m)).into_owned();
            let x = linalg::partial_trace(&blk, (n, m), linalg::Subsystem::A)?.unscale(m as f64);
            let lifted = linalg::kron(&x, &linalg::identity(m));
            expected.view_mut((off, off), (n * m, n * m)).copy_from(&lifted);
        }
        if (&bp - expected).norm() > 1e-8 * b.norm().max(1.0) {
            return Err(Error::DegenerateNumerics("basis element is not of the form ⊕ X_i ⊗ I".into()));
        }
    }
    Ok(())
}

impl StarAlgebra {
    /// Block-decomposes (if not done yet) and caches the structure.
    pub fn with_blocks(mut self) -> Result<Self> {
        if self.blocks.is_none() {
            self.blocks = Some(block_decompose(&self)?);
        }
        Ok(self)
    }
}

/// Schrödinger form of the inclusion `A ↪ M_d`: a state on `M_d` goes to
/// its restriction to `A`, written block-diagonally on `C^{Σ n_i}` (partial
/// trace over each multiplicity leg).
pub fn restriction_channel(blocks: &BlockStructure) -> KrausChannel {
    let d = blocks.change_of_basis.nrows();
    let out_dim = blocks.reduced_dim();
    let mut kraus = Vec::new();
    let mut out_off = 0;
    for (&(n, m), &off) in blocks.factors.iter().zip(&blocks.offsets()) {
        for j in 0..m {
            let mut k = CMatrix::zeros(out_dim, d);
            for row in 0..n {
                let col = blocks.change_of_basis.column(off + row * m + j);
                for i in 0..d {
                    k[(out_off + row, i)] = col[i].conj();
                }
            }
            kraus.push(k);
        }
        out_off += n;
    }
    KrausChannel::with_defect(kraus).expect("nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_diagonal, kron};

    fn sx() -> CMatrix {
        linalg::matrix_unit(2, 0, 1) + linalg::matrix_unit(2, 1, 0)
    }

    fn sz() -> CMatrix {
        from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn generation_examples() {
        assert_eq!(generate_algebra(&[], 3).unwrap().dim(), 1);
        let diag = generate_algebra(&[sz()], 2).unwrap();
        assert_eq!(diag.dim(), 2);
        assert!(algebra_eq(&diag, &StarAlgebra::diagonal(2)).unwrap());
        let full = generate_algebra(&[sx(), sz()], 2).unwrap();
        assert_eq!(full.dim(), 4);
        assert!(full.verify_closed());
    }

    #[test]
    fn commutant_examples() {
        let c = commutant(&StarAlgebra::full(3)).unwrap();
        assert!(algebra_eq(&c, &StarAlgebra::scalars(3)).unwrap());
        let c = commutant(&StarAlgebra::scalars(3)).unwrap();
        assert_eq!(c.dim(), 9);
        let c = commutant(&StarAlgebra::diagonal(2)).unwrap();
        assert!(algebra_eq(&c, &StarAlgebra::diagonal(2)).unwrap());
    }

    #[test]
    fn blocks_examples() {
        assert_eq!(block_decompose(&StarAlgebra::full(2)).unwrap().factors, vec![(2, 1)]);
        assert_eq!(block_decompose(&StarAlgebra::diagonal(2)).unwrap().factors, vec![(1, 1), (1, 1)]);
        let gens: Vec<CMatrix> = [sx(), sz()].iter().map(|g| kron(g, &linalg::identity(2))).collect();
        let a = generate_algebra(&gens, 4).unwrap();
        assert_eq!(a.dim(), 4);
        let bs = block_decompose(&a).unwrap();
        assert_eq!(bs.factors, vec![(2, 2)]);
        assert_eq!(commutant(&a).unwrap().dim(), 4);
    }

    #[test]
    fn order_and_intersection_examples() {
        let full = StarAlgebra::full(2);
        let diag = StarAlgebra::diagonal(2);
        assert!(algebra_leq(&StarAlgebra::scalars(2), &diag).unwrap());
        assert!(algebra_leq(&diag, &full).unwrap());
        assert!(!algebra_leq(&full, &diag).unwrap());
        assert!(matches!(algebra_leq(&diag, &StarAlgebra::full(3)), Err(Error::AmbientMismatch { .. })));

        assert!(algebra_eq(&intersect(&diag, &diag).unwrap(), &diag).unwrap());
        let xalg = generate_algebra(&[sx()], 2).unwrap();
        assert!(algebra_eq(&intersect(&diag, &xalg).unwrap(), &StarAlgebra::scalars(2)).unwrap());
        assert!(algebra_eq(&intersect(&full, &diag).unwrap(), &diag).unwrap());
    }

    #[test]
    fn conditional_expectation_examples() {
        let diag = StarAlgebra::diagonal(2);
        let x = from_real_diagonal(&[0.3, -2.0]);
        assert!((conditional_expectation(&diag, &x).unwrap() - &x).norm() < 1e-14);
        assert!(conditional_expectation(&diag, &sx()).unwrap().norm() < 1e-14);
        let m = CMatrix::from_row_slice(3, 3, &[c64(1., 0.), c64(2., 1.), c64(0., 0.), c64(0., 0.), c64(5., 0.), c64(0., 0.), c64(1., 0.), c64(0., 0.), c64(-3., 0.)]);
        let s = conditional_expectation(&StarAlgebra::scalars(3), &m).unwrap();
        assert!((s - linalg::identity(3).scale(1.0)).norm() < 1e-13);
        assert!(conditional_expectation(&diag, &linalg::identity(3)).is_err());
    }

    #[test]
    fn restriction_channel_of_tensor_factor_is_partial_trace() {
        let gens: Vec<CMatrix> = [sx(), sz()].iter().map(|g| kron(g, &linalg::identity(2))).collect();
        let a = generate_algebra(&gens, 4).unwrap().with_blocks().unwrap();
        let ch = restriction_channel(a.blocks().unwrap());
        assert!(ch.tp_defect() < 1e-10);
        assert_eq!(ch.d_out(), 2);
    }
}
