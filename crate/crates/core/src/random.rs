//! Seeded random instances for tests, property checks and the CLI.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::KrausChannel;
use crate::linalg::{self, c64, CMatrix};

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im)
    })
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phases of `R`
/// divided out).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    random_isometry(rng, d, d)
}

/// Isometry `C^cols → C^rows`, `rows ≥ cols`.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols);
    let g = ginibre(rng, rows, cols);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        let p = r[(k, k)];
        if p.norm() > 0.0 {
            let phase = p / p.norm();
            for i in 0..rows {
                q[(i, k)] *= phase;
            }
        }
    }
    q
}

/// Random channel with `rank` Kraus operators from a random Stinespring
/// isometry. `rank` is raised to `⌈d_in / d_out⌉` when smaller, the least
/// number of Kraus operators a channel can have.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, rank: usize) -> KrausChannel {
    let rank = rank.max(d_in.div_ceil(d_out));
    let v = random_isometry(rng, d_out * rank, d_in);
    let kraus = (0..rank)
        .map(|m| CMatrix::from_fn(d_out, d_in, |a, i| v[(a * rank + m, i)]))
        .collect();
    KrausChannel::with_defect(kraus).expect("nonempty")
}

/// Full-rank density matrix `G G† / Tr(G G†)` with square Ginibre `G`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    random_state_of_rank(rng, d, d)
}

pub fn random_state_of_rank<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> CMatrix {
    let g = ginibre(rng, d, rank);
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    linalg::hermitian_part(&m.unscale(tr))
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    random_state_of_rank(rng, d, 1)
}
