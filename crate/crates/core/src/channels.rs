//! Completely positive trace-preserving maps in Kraus, Choi and Stinespring
//! form.
//!
//! Conventions (Schrödinger picture throughout):
//!
//! * a Kraus operator of a channel `C^d_in → C^d_out` is a `d_out×d_in` matrix;
//! * the Choi matrix puts the outcome leg first,
//!   `J = Σ_ij Λ(|i⟩⟨j|) ⊗ |i⟩⟨j|`, so `J[(a,i),(b,j)] = ⟨a|Λ(|i⟩⟨j|)|b⟩`
//!   with composite index `a·d_in + i`;
//! * a Stinespring isometry maps `C^d_in → C^d_out ⊗ C^d_env`, composite row
//!   index `a·d_env + m`, and `V = Σ_m K_m ⊗ |m⟩`.

use crate::error::{Error, Result};
use crate::linalg::{self, c64, check_density, hermitian_part, partial_trace, CMatrix, Subsystem, C64};

/// Default trace-preservation tolerance (Frobenius norm of `Σ K†K − I`).
pub const TP_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct KrausChannel {
    d_in: usize,
    d_out: usize,
    kraus: Vec<CMatrix>,
    tp_defect: f64,
}

fn tp_defect_of(kraus: &[CMatrix], d_in: usize) -> f64 {
    let mut acc = -linalg::identity(d_in);
    for k in kraus {
        acc += k.adjoint() * k;
    }
    acc.norm()
}

impl KrausChannel {
    /// Validated channel: `‖Σ K†K − I‖_F ≤ TP_TOL`.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::with_defect(kraus)?;
        if ch.tp_defect > TP_TOL {
            return Err(Error::Invalid(format!("Kraus set is not trace preserving (defect {:.3e})", ch.tp_defect)));
        }
        Ok(ch)
    }

    /// Channel that is allowed to miss trace preservation; the defect is
    /// recorded in [`KrausChannel::tp_defect`]. Used for truncated channels.
    pub fn with_defect(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Invalid("empty Kraus set".into()))?;
        let (d_out, d_in) = first.shape();
        if d_in == 0 || d_out == 0 {
            return Err(Error::Invalid("zero-dimensional Kraus operator".into()));
        }
        if let Some(bad) = kraus.iter().find(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::ShapeMismatch(format!(
                "Kraus operators must all be {d_out}x{d_in}, found {}x{}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        let tp_defect = tp_defect_of(&kraus, d_in);
        Ok(Self { d_in, d_out, kraus, tp_defect })
    }

    /// Overwrite the recorded defect (e.g. with a defect restricted to
    /// protected levels of a truncated channel).
    pub fn set_tp_defect(&mut self, defect: f64) {
        self.tp_defect = defect;
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn tp_defect(&self) -> f64 {
        self.tp_defect
    }

    pub fn identity(d: usize) -> Self {
        Self::unitary(linalg::identity(d))
    }

    pub fn unitary(u: CMatrix) -> Self {
        Self::with_defect(vec![u]).expect("nonempty")
    }

    /// `ρ ↦ Tr(ρ) I/d`.
    pub fn completely_depolarizing(d: usize) -> Self {
        let s = (1.0 / d as f64).sqrt();
        let kraus = (0..d * d).map(|k| linalg::matrix_unit(d, k / d, k % d).scale(s)).collect();
        Self::with_defect(kraus).expect("nonempty")
    }

    /// Complete dephasing in the computational basis, Kraus set `{|i⟩⟨i|}`.
    pub fn dephasing(d: usize) -> Self {
        let kraus = (0..d).map(|i| linalg::matrix_unit(d, i, i)).collect();
        Self::with_defect(kraus).expect("nonempty")
    }

    /// `ρ ↦ Tr(ρ) σ` for a fixed output state σ.
    pub fn constant(d_in: usize, sigma: &CMatrix) -> Result<Self> {
        let eig = linalg::psd_eig(sigma)?;
        let mut kraus = Vec::new();
        for k in eig.support_indices() {
            let v = eig.vector(k).scale(eig.eigenvalues[k].sqrt());
            for i in 0..d_in {
                let mut e = nalgebra::DVector::zeros(d_in);
                e[i] = c64(1.0, 0.0);
                kraus.push(&v * e.adjoint());
            }
        }
        Self::with_defect(kraus)
    }

    /// Linear action `Σ K X K†` on an arbitrary `d_in×d_in` operator.
    pub fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    pub fn kraus_rank(&self) -> usize {
        kraus_to_choi(self).rank()
    }
}

/// Choi matrix with the outcome leg first.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    d_in: usize,
    d_out: usize,
    j: CMatrix,
}

impl ChoiMatrix {
    /// Validated Choi matrix: PSD and `Tr_out J = I` within `TP_TOL`.
    pub fn new(d_in: usize, d_out: usize, j: CMatrix) -> Result<Self> {
        Self::with_tolerance(d_in, d_out, j, TP_TOL)
    }

    pub fn with_tolerance(d_in: usize, d_out: usize, j: CMatrix, tp_tol: f64) -> Result<Self> {
        if j.shape() != (d_in * d_out, d_in * d_out) {
            return Err(Error::ShapeMismatch(format!(
                "Choi matrix of a {d_in}->{d_out} channel must be {0}x{0}",
                d_in * d_out
            )));
        }
        linalg::psd_eig(&j)?;
        let c = Self { d_in, d_out, j: hermitian_part(&j) };
        let defect = c.tp_defect();
        if defect > tp_tol {
            return Err(Error::Invalid(format!("Choi matrix is not trace preserving (defect {defect:.3e})")));
        }
        Ok(c)
    }

    pub(crate) fn from_raw(d_in: usize, d_out: usize, j: CMatrix) -> Self {
        Self { d_in, d_out, j }
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.j
    }

    /// `‖Tr_out J − I‖_F`.
    pub fn tp_defect(&self) -> f64 {
        let reduced = partial_trace(&self.j, (self.d_out, self.d_in), Subsystem::B).expect("shape checked");
        (reduced - linalg::identity(self.d_in)).norm()
    }

    /// `Λ(X)_{ab} = Σ_ij J[(a,i),(b,j)] X_ij`.
    pub fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        let (di, dout) = (self.d_in, self.d_out);
        CMatrix::from_fn(dout, dout, |a, b| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..di {
                for j in 0..di {
                    acc += self.j[(a * di + i, b * di + j)] * x[(i, j)];
                }
            }
            acc
        })
    }

    /// Number of eigenvalues above the support cutoff.
    pub fn rank(&self) -> usize {
        linalg::herm_eig(&self.j).map(|e| e.support_indices().len()).unwrap_or(0)
    }
}

pub fn kraus_to_choi(k: &KrausChannel) -> ChoiMatrix {
    let n = k.d_out * k.d_in;
    let mut j = CMatrix::zeros(n, n);
    for op in &k.kraus {
        // vec with composite index a·d_in + i
        let v = nalgebra::DVector::from_iterator(n, (0..n).map(|p| op[(p / k.d_in, p % k.d_in)]));
        j += &v * v.adjoint();
    }
    ChoiMatrix::from_raw(k.d_in, k.d_out, j)
}

/// Kraus operators `√λ · unvec(u)` from the eigenvectors of `J` whose
/// eigenvalues lie above the support cutoff.
pub fn choi_to_kraus(c: &ChoiMatrix) -> Result<KrausChannel> {
    let eig = linalg::psd_eig(&c.j)?;
    let (di, dout) = (c.d_in, c.d_out);
    let mut kraus: Vec<CMatrix> = eig
        .support_indices()
        .into_iter()
        .rev()
        .map(|k| {
            let s = eig.eigenvalues[k].sqrt();
            CMatrix::from_fn(dout, di, |a, i| eig.eigenvectors[(a * di + i, k)] * s)
        })
        .collect();
    if kraus.is_empty() {
        kraus.push(CMatrix::zeros(dout, di));
    }
    KrausChannel::with_defect(kraus)
}

pub fn apply(k: &KrausChannel, rho: &CMatrix) -> Result<CMatrix> {
    check_density(rho, k.d_in)?;
    Ok(k.apply_operator(rho))
}

/// Heisenberg picture `Σ K† A K`.
pub fn adjoint_apply(k: &KrausChannel, a: &CMatrix) -> Result<CMatrix> {
    if a.shape() != (k.d_out, k.d_out) {
        return Err(Error::ShapeMismatch(format!(
            "expected {0}x{0} observable, got {1}x{2}",
            k.d_out,
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = CMatrix::zeros(k.d_in, k.d_in);
    for op in &k.kraus {
        out += op.adjoint() * a * op;
    }
    Ok(out)
}

/// `second ∘ first`: apply `first`, then `second`.
pub fn compose(second: &KrausChannel, first: &KrausChannel) -> Result<KrausChannel> {
    if first.d_out != second.d_in {
        return Err(Error::ShapeMismatch(format!(
            "cannot compose {}->{} after {}->{}",
            second.d_in, second.d_out, first.d_in, first.d_out
        )));
    }
    let kraus = second.kraus.iter().flat_map(|a| first.kraus.iter().map(move |b| a * b)).collect();
    KrausChannel::with_defect(kraus)
}

/// Same channel with a Kraus set of minimal cardinality.
pub fn minimal_kraus(k: &KrausChannel) -> Result<KrausChannel> {
    let mut m = choi_to_kraus(&kraus_to_choi(k))?;
    m.tp_defect = k.tp_defect;
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct StinespringIsometry {
    d_in: usize,
    d_out: usize,
    d_env: usize,
    v: CMatrix,
}

impl StinespringIsometry {
    /// `V = Σ_m K_m ⊗ |m⟩`; the environment basis is indexed by the Kraus set.
    pub fn from_kraus(k: &KrausChannel) -> Self {
        let r = k.kraus.len();
        let v = CMatrix::from_fn(k.d_out * r, k.d_in, |row, i| k.kraus[row % r][(row / r, i)]);
        Self { d_in: k.d_in, d_out: k.d_out, d_env: r, v }
    }

    pub fn new(d_in: usize, d_out: usize, d_env: usize, v: CMatrix) -> Result<Self> {
        if v.shape() != (d_out * d_env, d_in) {
            return Err(Error::ShapeMismatch(format!("isometry must be {}x{d_in}", d_out * d_env)));
        }
        let defect = (v.adjoint() * &v - linalg::identity(d_in)).norm();
        if defect > TP_TOL {
            return Err(Error::Invalid(format!("V is not an isometry (defect {defect:.3e})")));
        }
        Ok(Self { d_in, d_out, d_env, v })
    }

    pub fn d_env(&self) -> usize {
        self.d_env
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v
    }

    pub fn to_kraus(&self) -> KrausChannel {
        let r = self.d_env;
        let kraus = (0..r)
            .map(|m| CMatrix::from_fn(self.d_out, self.d_in, |a, i| self.v[(a * r + m, i)]))
            .collect();
        KrausChannel::with_defect(kraus).expect("nonempty")
    }

    /// Complementary channel `ρ ↦ Tr_out(VρV†)` with Kraus operators
    /// `(C_j)_{m,i} = (K_m)_{j,i}`.
    pub fn conjugate(&self) -> KrausChannel {
        let r = self.d_env;
        let kraus = (0..self.d_out)
            .map(|j| CMatrix::from_fn(r, self.d_in, |m, i| self.v[(j * r + m, i)]))
            .collect();
        KrausChannel::with_defect(kraus).expect("nonempty")
    }

    /// Heisenberg-picture conjugate `V†(I_out ⊗ A)V` for an environment
    /// observable `A`.
    pub fn conjugate_heisenberg(&self, a: &CMatrix) -> CMatrix {
        let lifted = linalg::kron(&linalg::identity(self.d_out), a);
        self.v.adjoint() * lifted * &self.v
    }

    /// Heisenberg-picture channel `V†(A ⊗ I_env)V`.
    pub fn heisenberg(&self, a: &CMatrix) -> CMatrix {
        let lifted = linalg::kron(a, &linalg::identity(self.d_env));
        self.v.adjoint() * lifted * &self.v
    }
}

/// Complementary channel built from a minimal Kraus set, so that the
/// environment dimension equals the Kraus rank.
pub fn conjugate_channel(k: &KrausChannel) -> Result<KrausChannel> {
    let minimal = minimal_kraus(k)?;
    Ok(StinespringIsometry::from_kraus(&minimal).conjugate())
}

/// Frobenius distance between the Choi matrices of two channels.
pub fn choi_distance(a: &KrausChannel, b: &KrausChannel) -> Result<f64> {
    if a.d_in != b.d_in || a.d_out != b.d_out {
        return Err(Error::ShapeMismatch("channels have different shapes".into()));
    }
    Ok((kraus_to_choi(a).j - kraus_to_choi(b).j).norm())
}
