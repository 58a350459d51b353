//! Partitions of `[0, 1]` by the fractional parts of `−α, −2α, …` and the
//! finite block-algebra model attached to them.

use serde::Serialize;

use crate::algebra::{self, StarAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Points closer than this are merged.
pub const POINT_TOL: f64 = 1e-12;
/// Gap lengths closer than this count as one length.
pub const GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ThreeGapPartition {
    pub alpha: f64,
    pub k: usize,
    /// `0 = t_0 < … < t_last = 1`.
    pub points: Vec<f64>,
    /// Some fractional parts coincided (only possible for rational `α` up to
    /// rounding).
    pub degenerate: bool,
}

pub fn threegap_partition(alpha: f64, k: usize) -> ThreeGapPartition {
    let mut interior: Vec<f64> = (1..k).map(|j| (-(j as f64) * alpha).rem_euclid(1.0)).collect();
    interior.sort_by(f64::total_cmp);
    let mut points = vec![0.0];
    let mut degenerate = false;
    for x in interior {
        if x - points.last().copied().unwrap_or(0.0) <= POINT_TOL || 1.0 - x <= POINT_TOL {
            degenerate = true;
            continue;
        }
        points.push(x);
    }
    points.push(1.0);
    ThreeGapPartition { alpha, k, points, degenerate }
}

impl ThreeGapPartition {
    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of distinct gap lengths at [`GAP_TOL`].
    pub fn distinct_gaps(&self) -> usize {
        let mut g = self.gaps();
        g.sort_by(f64::total_cmp);
        let mut count = 0;
        let mut last = f64::NEG_INFINITY;
        for x in g {
            if x - last > GAP_TOL {
                count += 1;
                last = x;
            }
        }
        count
    }

    /// Every point of `coarser` is (within [`POINT_TOL`]) a point of `self`.
    pub fn refines(&self, coarser: &ThreeGapPartition) -> bool {
        coarser.points.iter().all(|p| self.points.iter().any(|q| (p - q).abs() <= POINT_TOL))
    }

    /// Index of the cell containing `x ∈ [0, 1)`.
    fn cell_of(&self, x: f64) -> usize {
        match self.points.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => i.min(self.cells() - 1),
            Err(i) => i - 1,
        }
    }
}

pub fn partition_max_gap(p: &ThreeGapPartition) -> f64 {
    p.gaps().into_iter().fold(0.0, f64::max)
}

/// The pair `(M_k, M_k′)` on `C^{W·k}`: one basis vector per cell `(n, l)`,
/// `n ∈ [0, W)`.
pub fn partition_block_algebras(p: &ThreeGapPartition, window: usize) -> Result<(StarAlgebra, StarAlgebra)> {
    partition_block_algebras_in(p, p, window)
}

/// Same model with basis vectors indexed by the cells ("atoms") of a finer
/// `reference` partition. `M_k` is the full matrix algebra on the atoms of
/// each cell of `p`, `M_k′` the span of the cell projectors. Using one
/// reference for consecutive `k` puts both pairs in the same ambient space.
pub fn partition_block_algebras_in(
    p: &ThreeGapPartition,
    reference: &ThreeGapPartition,
    window: usize,
) -> Result<(StarAlgebra, StarAlgebra)> {
    if window == 0 {
        return Err(Error::Invalid("window must be positive".into()));
    }
    if !reference.refines(p) {
        return Err(Error::Invalid("reference partition does not refine the partition".into()));
    }
    let atoms = reference.cells();
    let cell_of_atom: Vec<usize> = reference
        .points
        .windows(2)
        .map(|w| p.cell_of(0.5 * (w[0] + w[1])))
        .collect();
    let d = window * atoms;
    let mut big = Vec::new();
    let mut small = Vec::new();
    for n in 0..window {
        for l in 0..p.cells() {
            let members: Vec<usize> = (0..atoms).filter(|&a| cell_of_atom[a] == l).map(|a| n * atoms + a).collect();
            if members.is_empty() {
                continue;
            }
            for &i in &members {
                for &j in &members {
                    big.push(linalg::matrix_unit(d, i, j));
                }
            }
            let mut proj = CMatrix::zeros(d, d);
            for &i in &members {
                proj[(i, i)] = linalg::c64(1.0, 0.0);
            }
            small.push(proj.unscale((members.len() as f64).sqrt()));
        }
    }
    Ok((StarAlgebra::from_orthonormal(d, big), StarAlgebra::from_orthonormal(d, small)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThreeGapRow {
    pub k: usize,
    pub max_gap: f64,
    pub distinct_gaps: usize,
    pub degenerate: bool,
    /// `M_k′ ⊆ M_{k+1}′` and `M_{k+1} ⊆ M_k`; only evaluated for small `k`.
    pub refinement_ok: Option<bool>,
    /// `commutant(M_k) = M_k′`; only evaluated for small `k`.
    pub commutant_ok: Option<bool>,
}

/// Largest `k` for which the algebra checks are run.
pub const ALGEBRA_CHECK_MAX_K: usize = 12;

/// Algebra checks for `k` against `k + 1`, in the ambient of the `k + 1`
/// partition: returns `(refinement_ok, commutant_ok)`.
pub fn algebra_checks(alpha: f64, k: usize, window: usize) -> Result<(bool, bool)> {
    let p = threegap_partition(alpha, k);
    let q = threegap_partition(alpha, k + 1);
    let (m_k, mp_k) = partition_block_algebras_in(&p, &q, window)?;
    let (m_q, mp_q) = partition_block_algebras_in(&q, &q, window)?;
    let refinement = q.refines(&p) && algebra::algebra_leq(&mp_k, &mp_q)? && algebra::algebra_leq(&m_q, &m_k)?;
    let commutant = algebra::algebra_eq(&algebra::commutant(&m_k)?, &mp_k)?
        && algebra::algebra_eq(&algebra::commutant(&m_q)?, &mp_q)?;
    Ok((refinement, commutant))
}

pub fn threegap_suite(alpha: f64, k_list: &[usize], window: usize) -> Result<Vec<ThreeGapRow>> {
    k_list
        .iter()
        .map(|&k| {
            let p = threegap_partition(alpha, k);
            let (refinement_ok, commutant_ok) = if (1..=ALGEBRA_CHECK_MAX_K).contains(&k) {
                let (r, c) = algebra_checks(alpha, k, window)?;
                (Some(r), Some(c))
            } else {
                (None, None)
            };
            Ok(ThreeGapRow {
                k,
                max_gap: partition_max_gap(&p),
                distinct_gaps: p.distinct_gaps(),
                degenerate: p.degenerate,
                refinement_ok,
                commutant_ok,
            })
        })
        .collect()
}

/// Suite verdict: at most three gap lengths everywhere, max gap
/// non-increasing along increasing `k`, all algebra checks passing.
pub fn threegap_suite_passes(rows: &[ThreeGapRow]) -> bool {
    let mut sorted: Vec<&ThreeGapRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.k);
    let monotone = sorted.windows(2).all(|w| w[1].max_gap <= w[0].max_gap + GAP_TOL);
    monotone
        && rows.iter().all(|r| {
            r.distinct_gaps <= 3 && r.refinement_ok.unwrap_or(true) && r.commutant_ok.unwrap_or(true)
        })
}
