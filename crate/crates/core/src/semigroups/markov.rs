//! Markov processes `t ↦ Λ_t(E)` induced by a channel semigroup: step-wise
//! data-processing checks and distance to the conjectured infimum.

use serde::Serialize;

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::experiments::StatExperiment;
use crate::linalg::{self, c64, CMatrix};
use crate::order::{self, OrderStatus, SolverConfig};

use super::amplifier::{self, AmplifierParams};
use super::quadrature::PolarGrid;

#[derive(Debug, Clone, Serialize)]
pub struct MarkovRow {
    pub t: f64,
    /// Previous time in the sorted list (`None` on the first row).
    pub previous_t: Option<f64>,
    /// Verdict of `Λ_t(E) ⪯ Λ_{t′}(E)`.
    pub step_status: Option<OrderStatus>,
    pub step_deficiency: Option<f64>,
    /// Upper bound on the distance to the infimum experiment.
    pub infimum_deficiency: Option<f64>,
    pub tp_defect: f64,
}

fn sorted_times(t_list: &[f64]) -> Result<Vec<f64>> {
    if t_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Invalid("times must be positive and finite".into()));
    }
    let mut ts = t_list.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts)
}

/// Diagnostics for a generic semigroup given as `t ↦ Λ_t`. `infimum`, when
/// supplied, is the channel whose image experiment is the conjectured
/// infimum; the reported number bounds the deficiency of `Λ_t(E)` relative
/// to it.
pub fn markov_diagnostics(
    family: &dyn Fn(f64) -> Result<KrausChannel>,
    e: &StatExperiment,
    t_list: &[f64],
    infimum: Option<&KrausChannel>,
    cfg: &SolverConfig,
) -> Result<Vec<MarkovRow>> {
    let ts = sorted_times(t_list)?;
    let inf_exp = infimum.map(|ch| e.push_forward(ch)).transpose()?;
    let mut rows = Vec::new();
    let mut prev: Option<(f64, StatExperiment)> = None;
    for &t in &ts {
        let ch = family(t)?;
        let et = e.push_forward(&ch)?;
        let (step_status, step_deficiency) = match &prev {
            Some((_, ep)) => (
                Some(order::check_experiment_randomization(&et, ep, cfg)?.status),
                Some(order::deficiency_upper_bound(&et, ep, cfg)?),
            ),
            None => (None, None),
        };
        let infimum_deficiency = inf_exp.as_ref().map(|f| order::deficiency_upper_bound(&et, f, cfg)).transpose()?;
        rows.push(MarkovRow {
            t,
            previous_t: prev.as_ref().map(|(tp, _)| *tp),
            step_status,
            step_deficiency,
            infimum_deficiency,
            tp_defect: ch.tp_defect(),
        });
        prev = Some((t, et));
    }
    Ok(rows)
}

/// `Λ_t = e^{−t} id + (1 − e^{−t}) Ξ` for a channel `Ξ` on `C^d`.
fn mixing_semigroup(xi: &KrausChannel, t: f64) -> Result<KrausChannel> {
    let d = xi.d_in();
    let p = (-t).exp();
    let mut kraus = vec![linalg::identity(d).scale(p.sqrt())];
    kraus.extend(xi.kraus().iter().map(|k| k.scale((1.0 - p).sqrt())));
    KrausChannel::with_defect(kraus)
}

/// Depolarizing semigroup; its infimum is the completely depolarizing
/// channel.
pub fn depolarizing_semigroup(d: usize, t: f64) -> Result<KrausChannel> {
    mixing_semigroup(&KrausChannel::completely_depolarizing(d), t)
}

/// Dephasing semigroup; its infimum is complete dephasing.
pub fn dephasing_semigroup(d: usize, t: f64) -> Result<KrausChannel> {
    mixing_semigroup(&KrausChannel::dephasing(d), t)
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplifierMarkovRow {
    pub t: f64,
    pub previous_t: Option<f64>,
    /// `max_θ ‖Λ_t(ρ_θ) − Λ_{t−t′}(Λ_{t′}(ρ_θ))‖₁`: the semigroup law is
    /// the factorising witness.
    pub step_deficiency: Option<f64>,
    pub step_holds: Option<bool>,
    /// Certified bound on the deficiency between the Bargmann image and the
    /// conjugate image at time `t`.
    pub bargmann_deficiency: f64,
    pub tp_defect: f64,
    pub truncation_warning: bool,
}

/// Amplifier diagnostics on an experiment living in the truncated Fock
/// space. The Bargmann column is the smaller of two explicit bounds: the
/// Gaussian smoothing defect `max_θ D_θ(t)` (the post-processing used in
/// the limit argument) and `max_θ ‖Q_θ − Q_avg‖₁` (prepare the average).
pub fn amplifier_markov_diagnostics(
    e: &StatExperiment,
    t_list: &[f64],
    kraus_cutoff: usize,
    grid: &PolarGrid,
    tol_feas: f64,
) -> Result<Vec<AmplifierMarkovRow>> {
    let n = e.dim();
    let ts = sorted_times(t_list)?;
    let avg = crate::experiments::average_state(e);
    let q_avg = amplifier::q_function(&avg, grid).values;
    let spread = e
        .states()
        .iter()
        .map(|rho| {
            let q = amplifier::q_function(rho, grid).values;
            let diff: Vec<f64> = q.iter().zip(&q_avg).map(|(a, b)| (a - b).abs()).collect();
            grid.integrate(&diff)
        })
        .fold(0.0, f64::max);

    let mut rows = Vec::new();
    let mut prev: Option<(f64, Vec<CMatrix>)> = None;
    for &t in &ts {
        let p = AmplifierParams::new(t, n, kraus_cutoff)?;
        let ch = amplifier::amplifier_kraus(&p)?;
        let outs: Vec<CMatrix> = e.states().iter().map(|r| ch.apply_operator(r)).collect();
        let step_deficiency = match &prev {
            Some((tp, pouts)) => {
                let gap = amplifier::amplifier_kraus(&p.with_t(t - tp))?;
                Some(
                    outs.iter()
                        .zip(pouts)
                        .map(|(o, po)| linalg::trace_norm(&(o - gap.apply_operator(po))))
                        .fold(0.0, f64::max),
                )
            }
            None => None,
        };
        let smoothing = e
            .states()
            .iter()
            .map(|rho| amplifier::smoothing_defect(rho, t, grid))
            .fold(0.0, f64::max);
        rows.push(AmplifierMarkovRow {
            t,
            previous_t: prev.as_ref().map(|(tp, _)| *tp),
            step_deficiency,
            step_holds: step_deficiency.map(|d| d <= tol_feas),
            bargmann_deficiency: smoothing.min(spread),
            tp_defect: ch.tp_defect(),
            truncation_warning: amplifier::truncation_warning(&p),
        });
        prev = Some((t, outs));
    }
    Ok(rows)
}

/// Fock-basis experiment `{δ_0, δ_1}` in dimension `n`.
pub fn fock_pair_experiment(n: usize) -> Result<StatExperiment> {
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    a[(0, 0)] = c64(1.0, 0.0);
    b[(1, 1)] = c64(1.0, 0.0);
    StatExperiment::new(vec!["delta0".into(), "delta1".into()], vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dephasing_semigroup_is_monotone() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = CMatrix::from_element(2, 2, c64(0.5, 0.0));
        let minus = CMatrix::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(-0.5, 0.0), c64(-0.5, 0.0), c64(0.5, 0.0)]);
        let _ = s;
        let e = StatExperiment::from_states(vec![plus, minus]).unwrap();
        let xi = KrausChannel::dephasing(2);
        let rows = markov_diagnostics(&|t| dephasing_semigroup(2, t), &e, &[0.5, 1.0, 3.0], Some(&xi), &SolverConfig::default())
            .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[1..].iter().all(|r| r.step_status == Some(OrderStatus::Holds)));
        let inf: Vec<f64> = rows.iter().map(|r| r.infimum_deficiency.unwrap()).collect();
        assert!(inf[0] > inf[1] && inf[1] > inf[2]);
        // ‖Λ_t(|±⟩⟨±|) − I/2‖₁ = e^{−t}
        assert!((inf[2] - (-3.0f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn constant_experiment_has_zero_diagnostics() {
        let rho = linalg::from_real_diagonal(&[0.2, 0.8]);
        let e = StatExperiment::from_states(vec![rho.clone(), rho]).unwrap();
        let xi = KrausChannel::completely_depolarizing(2);
        let rows = markov_diagnostics(&|t| depolarizing_semigroup(2, t), &e, &[1.0, 2.0], Some(&xi), &SolverConfig::default())
            .unwrap();
        for r in rows {
            assert!(r.infimum_deficiency.unwrap() < 1e-6);
            assert!(r.step_deficiency.unwrap_or(0.0) < 1e-6);
        }
        let mut vac = CMatrix::zeros(6, 6);
        vac[(0, 0)] = c64(1.0, 0.0);
        let e = StatExperiment::from_states(vec![vac.clone(), vac]).unwrap();
        let rows = amplifier_markov_diagnostics(&e, &[1.0, 2.0], 6, &PolarGrid::for_fock(6, 24, 16), 1e-7).unwrap();
        assert!(rows.iter().all(|r| r.bargmann_deficiency < 1e-12 && r.step_deficiency.unwrap_or(0.0) < 1e-12));
    }
}
