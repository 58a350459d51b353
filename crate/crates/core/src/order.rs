//! Feasibility engine for the randomization preorder.
//!
//! `Λ ⪯ Γ` asks for a channel `α` with `Λ = α ∘ Γ` (Schrödinger picture).
//! The unknown is the Choi matrix `J` of `α`; every requirement on `α` is a
//! complex linear equation `tr(C J) = y`. The solver alternates between the
//! PSD cone and the affine solution set of those equations (Dykstra, with a
//! correction term only on the cone since the other set is affine). The
//! affine projection uses a pseudoinverse factorised once per query.
//!
//! Plain alternating projections slow down to `O(1/k)` when the feasible set
//! touches the boundary of the cone (rank-deficient witnesses, which are the
//! rule here), so every so often the iterate is "polished": its numerical
//! support is frozen and the equations are solved exactly inside the face of
//! the cone spanned by that support. If that is not enough, the leading
//! factor `W` of the iterate is refined by Levenberg–Marquardt on
//! `A vec(W W†) = b`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{kraus_to_choi, ChoiMatrix, KrausChannel};
use crate::error::{Error, Result};
use crate::experiments::StatExperiment;
use crate::linalg::{self, c64, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderStatus {
    Holds,
    Fails,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_feas: f64,
    pub tol_fail: f64,
    pub max_iter: usize,
    pub stagnation_window: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol_feas: 1e-7, tol_fail: 1e-4, max_iter: 20_000, stagnation_window: 500, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_feas > 0.0 && self.tol_feas < self.tol_fail) {
            return Err(Error::Invalid(format!(
                "need 0 < tol_feas < tol_fail, got {} and {}",
                self.tol_feas, self.tol_fail
            )));
        }
        if self.max_iter == 0 || self.stagnation_window == 0 {
            return Err(Error::Invalid("max_iter and stagnation_window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OrderVerdict {
    pub status: OrderStatus,
    /// Frobenius norm of the constraint defect at the last PSD iterate.
    pub residual: f64,
    pub iterations: usize,
    pub witness: Option<ChoiMatrix>,
}

impl OrderVerdict {
    pub fn holds(&self) -> bool {
        self.status == OrderStatus::Holds
    }
}

/// `tr(C J) = target` with `C = Σ |b⟩⟨a| ⊗ M` given as `(b, a, M)` triples.
#[derive(Debug, Clone)]
struct Constraint {
    terms: Vec<(usize, usize, CMatrix)>,
    target: C64,
}

/// Linear feasibility problem over Choi matrices of channels
/// `C^d_in → C^d_out`.
struct Problem {
    d_in: usize,
    d_out: usize,
    constraints: Vec<Constraint>,
}

impl Problem {
    fn new(d_in: usize, d_out: usize) -> Self {
        let mut p = Self { d_in, d_out, constraints: Vec::new() };
        // Tr_out J = I
        for g in 0..d_in {
            for h in 0..d_in {
                let unit = linalg::matrix_unit(d_in, h, g);
                let terms = (0..d_out).map(|c| (c, c, unit.clone())).collect();
                p.constraints.push(Constraint { terms, target: c64(if g == h { 1.0 } else { 0.0 }, 0.0) });
            }
        }
        p
    }

    fn side(&self) -> usize {
        self.d_in * self.d_out
    }

    /// `α(input) = output` entrywise.
    fn add_mapping(&mut self, input: &CMatrix, output: &CMatrix) {
        let mt = input.transpose();
        for a in 0..self.d_out {
            for b in 0..self.d_out {
                self.constraints.push(Constraint { terms: vec![(b, a, mt.clone())], target: output[(a, b)] });
            }
        }
    }

    fn dense(&self, c: &Constraint) -> CMatrix {
        let n = self.side();
        let di = self.d_in;
        let mut m = CMatrix::zeros(n, n);
        for (b, a, blk) in &c.terms {
            let mut view = m.view_mut((b * di, a * di), (di, di));
            view += blk;
        }
        m
    }

    /// `U_b† M U_a` summed over terms, `U` with `side` rows.
    fn restricted(&self, c: &Constraint, u: &CMatrix) -> CMatrix {
        let di = self.d_in;
        let s = u.ncols();
        let mut out = CMatrix::zeros(s, s);
        for (b, a, blk) in &c.terms {
            let ub = u.rows(b * di, di);
            let ua = u.rows(a * di, di);
            out += ub.adjoint() * blk * ua;
        }
        out
    }
}

/// Real coordinates of a Hermitian matrix: diagonal, then `√2 Re`, `√2 Im`
/// of the strict upper triangle. Isometric for the Frobenius norm.
fn herm_to_vec(m: &CMatrix) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(n * n);
    for p in 0..n {
        v[p] = m[(p, p)].re;
    }
    let mut k = n;
    let r2 = std::f64::consts::SQRT_2;
    for p in 0..n {
        for q in p + 1..n {
            v[k] = r2 * m[(p, q)].re;
            v[k + 1] = r2 * m[(p, q)].im;
            k += 2;
        }
    }
    v
}

fn vec_to_herm(v: &DVector<f64>, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for p in 0..n {
        m[(p, p)] = c64(v[p], 0.0);
    }
    let mut k = n;
    let r2 = std::f64::consts::SQRT_2;
    for p in 0..n {
        for q in p + 1..n {
            let z = c64(v[k], v[k + 1]) / r2;
            m[(p, q)] = z;
            m[(q, p)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Two real rows (Re, Im) of `x ↦ tr(C·J(x))`.
fn realize(c: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = c.nrows();
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for p in 0..n {
        re[p] = c[(p, p)].re;
        im[p] = c[(p, p)].im;
    }
    let mut k = n;
    let r2 = std::f64::consts::SQRT_2;
    for p in 0..n {
        for q in p + 1..n {
            let plus = (c[(q, p)] + c[(p, q)]) / r2;
            let minus = (c[(q, p)] - c[(p, q)]) / r2;
            re[k] = plus.re;
            re[k + 1] = -minus.im;
            im[k] = plus.im;
            im[k + 1] = minus.re;
            k += 2;
        }
    }
    (re, im)
}

fn stack_rows(rows: Vec<(Vec<f64>, Vec<f64>)>, targets: &[C64], width: usize) -> (DMatrix<f64>, DVector<f64>) {
    let m = 2 * rows.len();
    let mut a = DMatrix::zeros(m, width);
    let mut b = DVector::zeros(m);
    for (k, ((re, im), t)) in rows.into_iter().zip(targets).enumerate() {
        for j in 0..width {
            a[(2 * k, j)] = re[j];
            a[(2 * k + 1, j)] = im[j];
        }
        b[2 * k] = t.re;
        b[2 * k + 1] = t.im;
    }
    (a, b)
}

/// Projection onto `{x : A x = b}` (least-squares set when inconsistent),
/// `x ↦ x − Vᵀ(V x − c)` with the row space `V` and `c = Σ⁻¹ Uᵀ b`.
struct AffineProjector {
    vt: DMatrix<f64>,
    c: DVector<f64>,
}

impl AffineProjector {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-10 * smax.max(1e-300)).collect();
        let r = keep.len();
        let mut vt_r = DMatrix::zeros(r, a.ncols());
        let mut c = DVector::zeros(r);
        for (row, &k) in keep.iter().enumerate() {
            vt_r.row_mut(row).copy_from(&vt.row(k));
            c[row] = u.column(k).dot(b) / svd.singular_values[k];
        }
        Self { vt: vt_r, c }
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let coef = &self.vt * x - &self.c;
        x - self.vt.tr_mul(&coef)
    }
}

struct Solver<'a> {
    problem: &'a Problem,
    a: DMatrix<f64>,
    b: DVector<f64>,
    affine: AffineProjector,
}

/// Above this many real unknowns the polish step is skipped.
const POLISH_MAX_UNKNOWNS: usize = 4096;
const POLISH_EVERY: usize = 50;
/// Real unknowns allowed in the factored refinement.
const FACTORED_MAX_VARS: usize = 2048;
const FACTORED_ITERS: usize = 40;
const FACTORED_DEEP_ITERS: usize = 150;

impl<'a> Solver<'a> {
    fn new(problem: &'a Problem) -> Self {
        let n = problem.side();
        let rows: Vec<_> = problem.constraints.iter().map(|c| realize(&problem.dense(c))).collect();
        let targets: Vec<C64> = problem.constraints.iter().map(|c| c.target).collect();
        let (a, b) = stack_rows(rows, &targets, n * n);
        let affine = AffineProjector::new(&a, &b);
        Self { problem, a, b, affine }
    }

    fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm()
    }

    fn run(&self, start: &CMatrix, cfg: &SolverConfig) -> OrderVerdict {
        let n = self.problem.side();
        let polish = n * n <= POLISH_MAX_UNKNOWNS;
        let mut x = self.affine.project(&herm_to_vec(start));
        let mut corr = DVector::zeros(n * n);
        let mut history: Vec<f64> = Vec::with_capacity(cfg.max_iter.min(1 << 16));
        let mut last = f64::INFINITY;
        for k in 1..=cfg.max_iter {
            let shifted = &x + &corr;
            let y_mat = linalg::psd_clip(&vec_to_herm(&shifted, n));
            let y = herm_to_vec(&y_mat);
            corr = shifted - &y;
            let r = self.residual(&y);
            last = r;
            if r <= cfg.tol_feas {
                return self.verdict(OrderStatus::Holds, r, k, Some(y_mat));
            }
            if polish && k % POLISH_EVERY == 0 {
                let deep = (k / POLISH_EVERY).is_power_of_two() && k >= 4 * POLISH_EVERY;
                if let Some((j, rp)) = self.polish(&y_mat, cfg.tol_feas, deep) {
                    return self.verdict(OrderStatus::Holds, rp, k, Some(j));
                }
            }
            history.push(r);
            let w = cfg.stagnation_window;
            if history.len() > w {
                let old = history[history.len() - 1 - w];
                if old - r < 1e-3 * r {
                    let status = if r >= cfg.tol_fail { OrderStatus::Fails } else { OrderStatus::Indeterminate };
                    return self.verdict(status, r, k, None);
                }
            }
            x = self.affine.project(&y);
        }
        self.verdict(OrderStatus::Indeterminate, last, cfg.max_iter, None)
    }

    fn verdict(&self, status: OrderStatus, residual: f64, iterations: usize, j: Option<CMatrix>) -> OrderVerdict {
        let witness = j.map(|j| ChoiMatrix::from_raw(self.problem.d_in, self.problem.d_out, j));
        OrderVerdict { status, residual, iterations, witness }
    }

    /// Exact solve inside the face spanned by the leading eigenvectors of
    /// the current iterate, for a ladder of relative eigenvalue thresholds;
    /// then factored refinement at the ranks suggested by the spectrum. With
    /// `deep`, a full-rank factored run first moves the iterate close to a
    /// witness of unknown rank.
    fn polish(&self, y: &CMatrix, tol: f64, deep: bool) -> Option<(CMatrix, f64)> {
        let eig = linalg::herm_eig(&linalg::hermitian_part(y)).ok()?;
        let top = eig.max_eigenvalue();
        if top <= 0.0 {
            return None;
        }
        let n = self.problem.side();
        let mut tried = usize::MAX;
        for exp in 2..=9 {
            let thr = 10f64.powi(-exp) * top;
            let idx: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > thr).collect();
            let s = idx.len();
            if s == tried || s == 0 || s * s > 1024 {
                continue;
            }
            tried = s;
            let u = CMatrix::from_fn(n, s, |i, j| eig.eigenvectors[(i, idx[j])]);
            let rows: Vec<_> = self.problem.constraints.iter().map(|c| realize(&self.problem.restricted(c, &u))).collect();
            let targets: Vec<C64> = self.problem.constraints.iter().map(|c| c.target).collect();
            let (a_s, b) = stack_rows(rows, &targets, s * s);
            let z0 = herm_to_vec(&(u.adjoint() * y * &u));
            let defect = &b - &a_s * &z0;
            let svd = a_s.svd(true, true);
            let step = svd.solve(&defect, 1e-12).ok()?;
            let ymat = linalg::psd_clip(&vec_to_herm(&(z0 + step), s));
            let j = linalg::hermitian_part(&(&u * ymat * u.adjoint()));
            let r = self.residual(&herm_to_vec(&j));
            if r <= tol {
                return Some((j, r));
            }
        }
        if let Some(hit) = self.refine_at_ranks(&eig, tol, deep) {
            return Some(hit);
        }
        if !deep || 2 * n * n > FACTORED_MAX_VARS {
            return None;
        }
        let floor = 1e-4 * top;
        let w = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(floor).sqrt());
        let (w, r) = self.refine_factored(w, tol, FACTORED_DEEP_ITERS);
        let j = linalg::hermitian_part(&(&w * w.adjoint()));
        if r <= tol {
            return Some((j, r));
        }
        self.refine_at_ranks(&linalg::herm_eig(&j).ok()?, tol, true)
    }

    /// Factored refinement started from the leading part of the spectrum,
    /// one attempt per distinct rank of the threshold ladder (every rank up
    /// to the numerical rank when `every_rank`).
    fn refine_at_ranks(&self, eig: &linalg::HermEig, tol: f64, every_rank: bool) -> Option<(CMatrix, f64)> {
        let n = eig.dim();
        let top = eig.max_eigenvalue();
        let ladder: Vec<usize> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6]
            .iter()
            .map(|&rel| (0..n).filter(|&k| eig.eigenvalues[k] > rel * top).count())
            .collect();
        let mut ranks: Vec<usize> = if every_rank { (1..=ladder[ladder.len() - 1]).collect() } else { ladder };
        ranks.dedup();
        for s in ranks {
            if s == 0 || 2 * n * s > FACTORED_MAX_VARS {
                continue;
            }
            let idx: Vec<usize> = (n - s..n).collect();
            let w = CMatrix::from_fn(n, idx.len(), |i, j| eig.eigenvectors[(i, idx[j])] * eig.eigenvalues[idx[j]].sqrt());
            let (w, r) = self.refine_factored(w, tol, FACTORED_ITERS);
            if r <= tol {
                return Some((linalg::hermitian_part(&(&w * w.adjoint())), r));
            }
        }
        None
    }

    /// Jacobian of `W ↦ A vec(W W†)`; column `2(q n + p) + {0, 1}` is the
    /// real / imaginary part of `W_pq`. Uses `tr(C dJ) = (W†C)_qp + (CW)_pq`
    /// for `dJ = E_pq W† + W E_qp`.
    fn factored_jacobian(&self, w: &CMatrix) -> DMatrix<f64> {
        let (n, s) = w.shape();
        let i = c64(0.0, 1.0);
        let mut jac = DMatrix::zeros(self.a.nrows(), 2 * n * s);
        for (ci, c) in self.problem.constraints.iter().enumerate() {
            let cm = self.problem.dense(c);
            let cw = &cm * w;
            let wc = w.adjoint() * &cm;
            for q in 0..s {
                for p in 0..n {
                    let col = 2 * (q * n + p);
                    let re = wc[(q, p)] + cw[(p, q)];
                    let im = i * (wc[(q, p)] - cw[(p, q)]);
                    jac[(2 * ci, col)] = re.re;
                    jac[(2 * ci + 1, col)] = re.im;
                    jac[(2 * ci, col + 1)] = im.re;
                    jac[(2 * ci + 1, col + 1)] = im.im;
                }
            }
        }
        jac
    }

    /// Levenberg–Marquardt on `W ↦ A vec(W W†) − b`. Near a witness of rank
    /// `r` with an `n × r` factor the map is a submersion and the iteration
    /// converges quadratically, while `W W†` stays PSD by construction.
    /// Returns the last factor and its residual.
    fn refine_factored(&self, mut w: CMatrix, tol: f64, iters: usize) -> (CMatrix, f64) {
        let (n, s) = w.shape();
        let residual_vec = |w: &CMatrix| &self.a * herm_to_vec(&(w * w.adjoint())) - &self.b;
        let mut res = residual_vec(&w);
        let mut mu = 1e-8;
        let mut checkpoint = res.norm();
        let target = tol * 1e-3;
        for it in 1..=iters {
            let r = res.norm();
            if r <= target {
                break;
            }
            if it % 10 == 0 {
                // linear convergence at best: not the right rank
                if r > 0.1 * checkpoint && iters == FACTORED_ITERS {
                    break;
                }
                checkpoint = r;
            }
            let jac = self.factored_jacobian(&w);
            let gram = &jac * jac.transpose();
            let scale = gram.diagonal().max().max(1e-300);
            let mut improved = false;
            for _ in 0..24 {
                let mut damped = gram.clone();
                for k in 0..damped.nrows() {
                    damped[(k, k)] += mu * scale;
                }
                let Some(chol) = damped.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let step = jac.tr_mul(&chol.solve(&res));
                let trial = CMatrix::from_fn(n, s, |p, q| {
                    let k = 2 * (q * n + p);
                    w[(p, q)] - c64(step[k], step[k + 1])
                });
                let trial_res = residual_vec(&trial);
                if trial_res.norm() < r {
                    w = trial;
                    res = trial_res;
                    mu = (mu * 0.1).max(1e-14);
                    improved = true;
                    break;
                }
                mu *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let r = res.norm();
        (w, r)
    }
}

fn solve(problem: &Problem, cfg: &SolverConfig) -> Result<OrderVerdict> {
    cfg.validate()?;
    let solver = Solver::new(problem);
    let d_out = problem.d_out;
    let start = linalg::identity(problem.side()).unscale(d_out as f64);
    let first = solver.run(&start, cfg);
    if first.status != OrderStatus::Indeterminate {
        return Ok(first);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let restart = kraus_to_choi(&crate::random::random_channel(&mut rng, problem.d_in, d_out, problem.side()));
    let second = solver.run(restart.matrix(), cfg);
    let mut best = if second.residual < first.residual || second.status == OrderStatus::Holds { second } else { first };
    best.iterations = best.iterations.max(1);
    Ok(best)
}

/// `Λ ⪯ Γ`: is there a channel `α` with `Λ = α ∘ Γ`?
pub fn check_randomization(l: &KrausChannel, g: &KrausChannel, cfg: &SolverConfig) -> Result<OrderVerdict> {
    if l.d_in() != g.d_in() {
        return Err(Error::ShapeMismatch(format!("input dimensions differ ({} vs {})", l.d_in(), g.d_in())));
    }
    let d = l.d_in();
    let mut p = Problem::new(g.d_out(), l.d_out());
    for i in 0..d {
        for j in 0..d {
            let unit = linalg::matrix_unit(d, i, j);
            p.add_mapping(&g.apply_operator(&unit), &l.apply_operator(&unit));
        }
    }
    solve(&p, cfg)
}

/// Both directions of [`check_randomization`].
pub fn check_equivalence(
    l: &KrausChannel,
    g: &KrausChannel,
    cfg: &SolverConfig,
) -> Result<(OrderVerdict, OrderVerdict)> {
    Ok((check_randomization(l, g, cfg)?, check_randomization(g, l, cfg)?))
}

fn same_parameters(e: &StatExperiment, f: &StatExperiment) -> Result<()> {
    if e.labels() != f.labels() {
        return Err(Error::ParameterMismatch(format!("{:?} vs {:?}", e.labels(), f.labels())));
    }
    Ok(())
}

fn experiment_problem(e: &StatExperiment, f: &StatExperiment) -> Problem {
    let mut p = Problem::new(f.dim(), e.dim());
    for (rho, sigma) in e.states().iter().zip(f.states()) {
        p.add_mapping(sigma, rho);
    }
    p
}

/// `E ⪯ F`: is there a channel `α` with `ρ_θ = α(σ_θ)` for every `θ`?
pub fn check_experiment_randomization(
    e: &StatExperiment,
    f: &StatExperiment,
    cfg: &SolverConfig,
) -> Result<OrderVerdict> {
    same_parameters(e, f)?;
    solve(&experiment_problem(e, f), cfg)
}

pub fn check_experiment_equivalence(
    e: &StatExperiment,
    f: &StatExperiment,
    cfg: &SolverConfig,
) -> Result<(OrderVerdict, OrderVerdict)> {
    Ok((check_experiment_randomization(e, f, cfg)?, check_experiment_randomization(f, e, cfg)?))
}

/// Replace an almost-CPTP Choi matrix by the exactly trace-preserving
/// `(I ⊗ T^{-1/2}) J (I ⊗ T^{-1/2})`, `T = Tr_out J`.
fn normalize_tp(j: &CMatrix, d_in: usize, d_out: usize) -> Result<CMatrix> {
    let t = linalg::partial_trace(j, (d_out, d_in), linalg::Subsystem::B)?;
    let s = linalg::psd_power(&linalg::hermitian_part(&t), -0.5)?;
    let lift = linalg::kron(&linalg::identity(d_out), &s);
    Ok(linalg::hermitian_part(&(&lift * j * &lift)))
}

/// Frobenius-nearest channel Choi matrix: Dykstra between the PSD cone and
/// `{Tr_out J = I}`.
fn project_cptp(j: &CMatrix, d_in: usize, d_out: usize) -> CMatrix {
    let tp = |m: &CMatrix| -> CMatrix {
        let t = linalg::partial_trace(m, (d_out, d_in), linalg::Subsystem::B).expect("shape");
        let fix = (t - linalg::identity(d_in)).unscale(d_out as f64);
        m - linalg::kron(&linalg::identity(d_out), &fix)
    };
    let mut x = tp(j);
    let mut corr = CMatrix::zeros(j.nrows(), j.ncols());
    let mut y = x.clone();
    for _ in 0..2000 {
        let shifted = &x + &corr;
        y = linalg::psd_clip(&shifted);
        corr = shifted - &y;
        let nx = tp(&y);
        let gap = (&nx - &y).norm();
        x = nx;
        if gap < 1e-13 {
            break;
        }
    }
    normalize_tp(&y, d_in, d_out).unwrap_or(y)
}

fn max_trace_defect(e: &StatExperiment, f: &StatExperiment, alpha: &ChoiMatrix) -> f64 {
    e.states()
        .iter()
        .zip(f.states())
        .map(|(rho, sigma)| linalg::trace_norm(&(rho - alpha.apply_operator(sigma))))
        .fold(0.0, f64::max)
}

/// Upper bound on the deficiency of `E` relative to `F`:
/// `max_θ ‖ρ_θ − α(σ_θ)‖₁` for the channel `α` minimising
/// `Σ_θ ‖ρ_θ − α(σ_θ)‖_F²` (accelerated projected gradient).
pub fn deficiency_upper_bound(e: &StatExperiment, f: &StatExperiment, cfg: &SolverConfig) -> Result<f64> {
    same_parameters(e, f)?;
    let (d_in, d_out) = (f.dim(), e.dim());
    let verdict = check_experiment_randomization(e, f, cfg)?;
    if let Some(w) = &verdict.witness {
        let j = normalize_tp(w.matrix(), d_in, d_out)?;
        let j = linalg::psd_clip(&j);
        return Ok(max_trace_defect(e, f, &ChoiMatrix::from_raw(d_in, d_out, j)));
    }

    let lip = 2.0 * f.states().iter().map(|s| s.norm_squared()).sum::<f64>();
    let step = 1.0 / lip.max(1e-300);
    let grad = |j: &CMatrix| -> CMatrix {
        let ch = ChoiMatrix::from_raw(d_in, d_out, j.clone());
        let mut g = CMatrix::zeros(j.nrows(), j.ncols());
        for (rho, sigma) in e.states().iter().zip(f.states()) {
            let r = ch.apply_operator(sigma) - rho;
            g += linalg::kron(&r, &sigma.transpose()).scale(2.0);
        }
        g
    };
    let objective = |j: &CMatrix| -> f64 {
        let ch = ChoiMatrix::from_raw(d_in, d_out, j.clone());
        e.states().iter().zip(f.states()).map(|(rho, sigma)| (ch.apply_operator(sigma) - rho).norm_squared()).sum()
    };
    let mut cur = linalg::identity(d_in * d_out).unscale(d_out as f64);
    let mut mom = cur.clone();
    let mut tk = 1.0f64;
    let mut best = (objective(&cur), cur.clone());
    for _ in 0..3000 {
        let next = project_cptp(&(&mom - grad(&mom).scale(step)), d_in, d_out);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        mom = &next + (&next - &cur).scale((tk - 1.0) / tn);
        let moved = (&next - &cur).norm();
        cur = next;
        tk = tn;
        let obj = objective(&cur);
        if obj < best.0 {
            best = (obj, cur.clone());
        }
        if moved < 1e-12 {
            break;
        }
    }
    Ok(max_trace_defect(e, f, &ChoiMatrix::from_raw(d_in, d_out, best.1)))
}

/// Broadcastability: a channel `β: C^d → C^d ⊗ C^d` whose two marginals
/// both reproduce every output of `Λ`.
pub fn check_broadcastable(l: &KrausChannel, cfg: &SolverConfig) -> Result<OrderVerdict> {
    let d = l.d_out();
    let mut p = Problem::new(d, d * d);
    let din = l.d_in();
    for i in 0..din {
        for j in 0..din {
            let out = l.apply_operator(&linalg::matrix_unit(din, i, j));
            let mt = out.transpose();
            for a in 0..d {
                for b in 0..d {
                    let first = (0..d).map(|c| (b * d + c, a * d + c, mt.clone())).collect();
                    let second = (0..d).map(|c| (c * d + b, c * d + a, mt.clone())).collect();
                    p.constraints.push(Constraint { terms: first, target: out[(a, b)] });
                    p.constraints.push(Constraint { terms: second, target: out[(a, b)] });
                }
            }
        }
    }
    solve(&p, cfg)
}

/// Channel of a witness Choi matrix composed with `Γ`, for recomposition
/// checks: returns `‖Λ − α∘Γ‖` over matrix-unit inputs (Frobenius).
pub fn recomposition_defect(l: &KrausChannel, g: &KrausChannel, alpha: &ChoiMatrix) -> f64 {
    let d = l.d_in();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            let unit = linalg::matrix_unit(d, i, j);
            acc += (l.apply_operator(&unit) - alpha.apply_operator(&g.apply_operator(&unit))).norm_squared();
        }
    }
    acc.sqrt()
}
