//! Statistical experiments `(ρ_θ : θ ∈ Θ)` on a common `C^d`: averages,
//! support restriction, Connes cocycles, minimal sufficient reductions and
//! canonical fingerprints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{self, StarAlgebra};
use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, C64};

#[derive(Debug, Clone)]
pub struct StatExperiment {
    labels: Vec<String>,
    states: Vec<CMatrix>,
    d: usize,
}

impl StatExperiment {
    pub fn new(labels: Vec<String>, states: Vec<CMatrix>) -> Result<Self> {
        if labels.is_empty() || labels.len() != states.len() {
            return Err(Error::Invalid(format!("{} labels for {} states", labels.len(), states.len())));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::Invalid(format!("duplicate parameter label {l:?}")));
            }
        }
        let d = states[0].nrows();
        for s in &states {
            linalg::check_density(s, d)?;
        }
        let states = states.iter().map(linalg::hermitian_part).collect();
        Ok(Self { labels, states, d })
    }

    /// Labels `"0", "1", …`.
    pub fn from_states(states: Vec<CMatrix>) -> Result<Self> {
        let labels = (0..states.len()).map(|k| k.to_string()).collect();
        Self::new(labels, states)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn state(&self, label: &str) -> Option<&CMatrix> {
        self.labels.iter().position(|l| l == label).map(|k| &self.states[k])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(Λ(ρ_θ))_θ`.
    pub fn push_forward(&self, ch: &KrausChannel) -> Result<Self> {
        if ch.d_in() != self.d {
            return Err(Error::ShapeMismatch(format!("channel input {} vs experiment dimension {}", ch.d_in(), self.d)));
        }
        let states = self.states.iter().map(|s| linalg::hermitian_part(&ch.apply_operator(s))).collect();
        Ok(Self { labels: self.labels.clone(), states, d: ch.d_out() })
    }

    /// `U ρ_θ U†` for an isometry `U`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        if u.ncols() != self.d {
            return Err(Error::ShapeMismatch(format!("isometry has {} columns, experiment dimension {}", u.ncols(), self.d)));
        }
        let states = self.states.iter().map(|s| linalg::hermitian_part(&(u * s * u.adjoint()))).collect();
        Ok(Self { labels: self.labels.clone(), states, d: u.nrows() })
    }

    /// Sub-experiment on the given labels (in the given order).
    pub fn restrict_parameters(&self, keep: &[&str]) -> Result<Self> {
        let mut labels = Vec::new();
        let mut states = Vec::new();
        for &k in keep {
            let s = self.state(k).ok_or_else(|| Error::ParameterMismatch(format!("unknown label {k:?}")))?;
            labels.push(k.to_string());
            states.push(s.clone());
        }
        Self::new(labels, states)
    }
}

pub fn average_state(e: &StatExperiment) -> CMatrix {
    let mut avg = CMatrix::zeros(e.d, e.d);
    for s in &e.states {
        avg += s;
    }
    linalg::hermitian_part(&avg.unscale(e.len() as f64))
}

/// Support basis of the average state (ascending eigenvalue order).
fn support_basis(e: &StatExperiment) -> Result<CMatrix> {
    Ok(linalg::psd_eig(&average_state(e))?.support_basis())
}

/// Compress every state onto the support of the average state.
pub fn restrict_to_support(e: &StatExperiment) -> Result<StatExperiment> {
    let w = support_basis(e)?;
    if w.ncols() == e.d {
        return Ok(e.clone());
    }
    let wa = w.adjoint();
    let states = e.states.iter().map(|s| linalg::hermitian_part(&(&wa * s * &w))).collect();
    Ok(StatExperiment { labels: e.labels.clone(), states, d: w.ncols() })
}

fn ensure_faithful(phi: &CMatrix) -> Result<linalg::HermEig> {
    let eig = linalg::psd_eig(phi)?;
    let floor = linalg::support_cutoff() * eig.max_eigenvalue();
    if eig.max_eigenvalue() <= 0.0 || eig.min_eigenvalue() <= floor {
        return Err(Error::NotFaithful { min_eigenvalue: eig.min_eigenvalue() });
    }
    Ok(eig)
}

/// `u_t = ρ^{it} φ^{−it}`.
pub fn cocycle(rho: &CMatrix, phi: &CMatrix, t: f64) -> Result<CMatrix> {
    let phi_eig = ensure_faithful(phi)?;
    if rho.shape() != phi.shape() {
        return Err(Error::ShapeMismatch("ρ and φ differ in dimension".into()));
    }
    let rho_it = linalg::imaginary_power(rho, t)?;
    Ok(rho_it * linalg::imaginary_power_from(&phi_eig, -t))
}

/// `{±1, ±½, ±⅓}`.
pub fn fixed_t_grid() -> Vec<f64> {
    vec![1.0, -1.0, 0.5, -0.5, 1.0 / 3.0, -1.0 / 3.0]
}

/// [`fixed_t_grid`] plus three seeded uniform draws from `(−2, 2)`.
pub fn default_t_grid(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = fixed_t_grid();
    for _ in 0..3 {
        g.push(rng.random_range(-2.0..2.0));
    }
    g
}

#[derive(Debug, Clone)]
pub struct MinimalSufficient {
    /// Reduced experiment on `C^{Σ n_i}`, block-diagonal.
    pub experiment: StatExperiment,
    /// Cocycle algebra on the support of the average state, with its block
    /// structure attached.
    pub algebra: StarAlgebra,
}

/// Reduce `E` to the algebra generated by its cocycles over `t_grid`.
pub fn minimal_sufficient_experiment(e: &StatExperiment, t_grid: &[f64]) -> Result<MinimalSufficient> {
    let r = restrict_to_support(e)?;
    let phi = average_state(&r);
    let phi_eig = ensure_faithful(&phi)?;
    let mut gens = Vec::new();
    for rho in &r.states {
        let rho_eig = linalg::psd_eig(rho)?;
        for &t in t_grid {
            gens.push(linalg::imaginary_power_from(&rho_eig, t) * linalg::imaginary_power_from(&phi_eig, -t));
        }
    }
    let algebra = algebra::generate_algebra(&gens, r.d)?.with_blocks()?;
    let compress = algebra::restriction_channel(algebra.blocks().expect("attached"));
    let experiment = r.push_forward(&compress)?;
    Ok(MinimalSufficient { experiment, algebra })
}

/// One generator of the free *-monoid: the cocycle of `θ` at time `t`,
/// possibly adjointed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    pub theta: String,
    pub t: f64,
    pub adjoint: bool,
}

#[derive(Debug, Clone)]
pub struct CanonicalFingerprint {
    pub depth: usize,
    pub t_grid: Vec<f64>,
    pub letters: Vec<Letter>,
    /// Words in enumeration order (by length, then lexicographic in letter
    /// indices), starting with the empty word.
    pub values: Vec<(Vec<usize>, C64)>,
}

impl CanonicalFingerprint {
    pub fn value(&self, word: &[usize]) -> Option<C64> {
        self.values.iter().find(|(w, _)| w == word).map(|(_, v)| *v)
    }

    /// Largest entrywise difference, `None` if the word sets differ.
    pub fn distance(&self, other: &Self) -> Option<f64> {
        if self.letters != other.letters || self.values.len() != other.values.len() {
            return None;
        }
        Some(self.values.iter().zip(&other.values).map(|((_, a), (_, b))| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn word_key(word: &[usize]) -> String {
        word.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(".")
    }
}

/// `φ₀(u_1 ⋯ u_k)` for all words of length `≤ depth` over the letters
/// `(θ, t, ∗?)`, evaluated on the minimal sufficient reduction.
pub fn canonical_fingerprint(e: &StatExperiment, depth: usize, t_grid: &[f64]) -> Result<CanonicalFingerprint> {
    let reduced = minimal_sufficient_experiment(e, t_grid)?.experiment;
    let phi = average_state(&reduced);
    let phi_eig = ensure_faithful(&phi)?;
    let mut letters = Vec::new();
    let mut mats = Vec::new();
    for (label, rho) in reduced.labels.iter().zip(&reduced.states) {
        let rho_eig = linalg::psd_eig(rho)?;
        for &t in t_grid {
            let u = linalg::imaginary_power_from(&rho_eig, t) * linalg::imaginary_power_from(&phi_eig, -t);
            letters.push(Letter { theta: label.clone(), t, adjoint: false });
            letters.push(Letter { theta: label.clone(), t, adjoint: true });
            mats.push(u.adjoint());
            mats.insert(mats.len() - 1, u);
        }
    }
    let mut values = vec![(Vec::new(), c64(1.0, 0.0))];
    let d = reduced.d;
    let mut layer: Vec<(Vec<usize>, CMatrix)> = vec![(Vec::new(), linalg::identity(d))];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(layer.len() * mats.len());
        for (word, prod) in &layer {
            for (k, m) in mats.iter().enumerate() {
                let mut w = word.clone();
                w.push(k);
                let p = prod * m;
                values.push((w.clone(), linalg::hs_inner(&phi, &p)));
                next.push((w, p));
            }
        }
        layer = next;
    }
    Ok(CanonicalFingerprint { depth, t_grid: t_grid.to_vec(), letters, values })
}

/// Preparation channel `C^{|Θ|} → C^d`, `|θ⟩⟨θ| ↦ ρ_θ`, with Choi matrix
/// `Σ_θ ρ_θ ⊗ |θ⟩⟨θ|`.
pub fn experiment_to_channel(e: &StatExperiment) -> Result<KrausChannel> {
    let n = e.len();
    let mut kraus = Vec::new();
    for (theta, rho) in e.states.iter().enumerate() {
        let eig = linalg::psd_eig(rho)?;
        for k in eig.support_indices() {
            let v = eig.vector(k).scale(eig.eigenvalues[k].sqrt());
            let mut bra = nalgebra::DVector::zeros(n);
            bra[theta] = c64(1.0, 0.0);
            kraus.push(&v * bra.adjoint());
        }
    }
    KrausChannel::with_defect(kraus)
}

/// Complete dephasing on `C^n`.
pub fn dephasing_reference(n: usize) -> KrausChannel {
    KrausChannel::dephasing(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{choi_distance, compose};
    use crate::linalg::from_real_diagonal;
    use crate::order::{check_experiment_equivalence, check_randomization, SolverConfig};

    fn ket(v: &[C64]) -> CMatrix {
        let k = nalgebra::DVector::from_column_slice(v);
        linalg::projector(&k)
    }

    fn plus() -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ket(&[c64(s, 0.0), c64(s, 0.0)])
    }

    #[test]
    fn average_examples() {
        let rho = from_real_diagonal(&[0.3, 0.7]);
        let e = StatExperiment::from_states(vec![rho.clone(), rho.clone()]).unwrap();
        assert!((average_state(&e) - rho).norm() < 1e-15);
        let p0 = from_real_diagonal(&[1.0, 0.0]);
        let e = StatExperiment::from_states(vec![p0.clone(), plus()]).unwrap();
        let eig = linalg::herm_eig(&average_state(&e)).unwrap();
        let c = (std::f64::consts::PI / 8.0).cos().powi(2);
        assert!((eig.eigenvalues[1] - c).abs() < 1e-12);
        assert!((eig.eigenvalues[0] - (1.0 - c)).abs() < 1e-12);
    }

    #[test]
    fn restriction_examples() {
        let p0 = from_real_diagonal(&[1.0, 0.0, 0.0]);
        let p1 = from_real_diagonal(&[0.0, 1.0, 0.0]);
        let e = StatExperiment::from_states(vec![p0.clone(), p0.clone()]).unwrap();
        assert_eq!(restrict_to_support(&e).unwrap().dim(), 1);
        let e = StatExperiment::from_states(vec![p0, p1]).unwrap();
        let r = restrict_to_support(&e).unwrap();
        assert_eq!(r.dim(), 2);
        let traces: Vec<f64> = r.states().iter().map(|s| linalg::trace(s).re).collect();
        assert!(traces.iter().all(|t| (t - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cocycle_examples() {
        let phi = from_real_diagonal(&[0.25, 0.75]);
        let u = cocycle(&phi, &phi, 0.7).unwrap();
        assert!((u - linalg::identity(2)).norm() < 1e-12);
        let rho = from_real_diagonal(&[0.6, 0.4]);
        let t = 1.3;
        let u = cocycle(&rho, &phi, t).unwrap();
        for (k, (l, m)) in [(0.6f64, 0.25f64), (0.4, 0.75)].iter().enumerate() {
            let want = C64::from_polar(1.0, t * (l / m).ln());
            assert!((u[(k, k)] - want).norm() < 1e-12);
        }
        let pure = from_real_diagonal(&[1.0, 0.0]);
        let u = cocycle(&pure, &phi, 0.4).unwrap();
        assert!((&u * u.adjoint() - &pure).norm() < 1e-9);
        assert!(matches!(cocycle(&phi, &pure, 1.0), Err(Error::NotFaithful { .. })));
    }

    #[test]
    fn minimal_sufficiency_examples() {
        let grid = fixed_t_grid();
        let rho = from_real_diagonal(&[0.3, 0.7]);
        let dup = StatExperiment::from_states(vec![rho.clone(), rho.clone()]).unwrap();
        let m = minimal_sufficient_experiment(&dup, &grid).unwrap();
        assert_eq!(m.algebra.dim(), 1);
        assert_eq!(m.experiment.dim(), 1);

        let diag = StatExperiment::from_states(vec![rho, from_real_diagonal(&[0.8, 0.2])]).unwrap();
        let m = minimal_sufficient_experiment(&diag, &grid).unwrap();
        assert_eq!(m.algebra.blocks().unwrap().factors, vec![(1, 1), (1, 1)]);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let generic = StatExperiment::from_states(vec![
            crate::random::random_state(&mut rng, 2),
            crate::random::random_state(&mut rng, 2),
        ])
        .unwrap();
        let m = minimal_sufficient_experiment(&generic, &grid).unwrap();
        assert_eq!(m.algebra.dim(), 4);
        let (a, b) = check_experiment_equivalence(&m.experiment, &generic, &SolverConfig::default()).unwrap();
        assert!(a.holds() && b.holds());
    }

    #[test]
    fn fingerprint_examples() {
        let grid = fixed_t_grid();
        let rho = from_real_diagonal(&[0.3, 0.7]);
        let dup = StatExperiment::from_states(vec![rho.clone(), rho]).unwrap();
        let fp = canonical_fingerprint(&dup, 2, &grid).unwrap();
        assert_eq!(fp.values[0].1, c64(1.0, 0.0));
        assert!(fp.values.iter().all(|(_, v)| (v - c64(1.0, 0.0)).norm() < 1e-12));
        assert_eq!(fp.values.len(), 1 + 24 + 24 * 24);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = StatExperiment::from_states(vec![
            crate::random::random_state(&mut rng, 2),
            crate::random::random_state(&mut rng, 2),
        ])
        .unwrap();
        let u = crate::random::random_unitary(&mut rng, 2);
        let ue = e.conjugated(&u).unwrap();
        let a = canonical_fingerprint(&e, 3, &grid).unwrap();
        let b = canonical_fingerprint(&ue, 3, &grid).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-9);
        assert!(canonical_fingerprint(&e, 0, &grid).unwrap().values.len() == 1);
    }

    #[test]
    fn preparation_channel_examples() {
        let p0 = from_real_diagonal(&[1.0, 0.0]);
        let p1 = from_real_diagonal(&[0.0, 1.0]);
        let e = StatExperiment::from_states(vec![p0.clone(), p1]).unwrap();
        let ch = experiment_to_channel(&e).unwrap();
        assert_eq!(ch.kraus_rank(), 2);
        let cfg = SolverConfig::default();
        assert!(check_randomization(&ch, &dephasing_reference(2), &cfg).unwrap().holds());
        let single = experiment_to_channel(&StatExperiment::from_states(vec![p0.clone()]).unwrap()).unwrap();
        assert_eq!((single.d_in(), single.d_out()), (1, 2));

        let x = dephasing_reference(2);
        assert!(choi_distance(&compose(&x, &x).unwrap(), &x).unwrap() < 1e-12);
        assert!((x.apply_operator(&plus()) - linalg::identity(2).unscale(2.0)).norm() < 1e-12);
        assert_eq!(dephasing_reference(1).kraus().len(), 1);
    }
}
