use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use randorder::channels::{self, KrausChannel};
use randorder::experiments;
use randorder::io;
use randorder::linalg;
use randorder::random;
use randorder::semigroups::{threegap_partition, AmplifierParams};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn choi_round_trip(seed in any::<u64>(), d_in in 1usize..4, d_out in 1usize..4, rank in 1usize..5) {
        let ch = random::random_channel(&mut rng(seed), d_in, d_out, rank);
        prop_assert!(ch.tp_defect() < 1e-10);
        let back = channels::choi_to_kraus(&channels::kraus_to_choi(&ch)).unwrap();
        prop_assert!(channels::choi_distance(&ch, &back).unwrap() < 1e-9);
        prop_assert!(back.kraus_rank() <= d_in * d_out);
    }

    #[test]
    fn heisenberg_duality(seed in any::<u64>(), d_in in 1usize..4, d_out in 1usize..4) {
        let mut r = rng(seed);
        let ch = random::random_channel(&mut r, d_in, d_out, 2);
        let rho = random::random_state(&mut r, d_in);
        let a = random::ginibre(&mut r, d_out, d_out);
        let lhs = linalg::trace(&(&a * channels::apply(&ch, &rho).unwrap()));
        let rhs = linalg::trace(&(channels::adjoint_apply(&ch, &a).unwrap() * &rho));
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn conjugate_is_a_channel(seed in any::<u64>(), d_in in 1usize..4, d_out in 1usize..4) {
        let ch = random::random_channel(&mut rng(seed), d_in, d_out, 3);
        let c = channels::conjugate_channel(&ch).unwrap();
        prop_assert_eq!(c.d_in(), d_in);
        prop_assert!(c.tp_defect() < 1e-9);
        let rho = random::random_pure_state(&mut rng(seed ^ 1), d_in);
        let out = channels::apply(&ch, &rho).unwrap();
        let env = channels::apply(&c, &rho).unwrap();
        let (a, b) = (linalg::herm_eig(&out).unwrap(), linalg::herm_eig(&env).unwrap());
        let nonzero = |e: &linalg::HermEig| {
            let mut v: Vec<f64> = e.eigenvalues.iter().copied().filter(|x| *x > 1e-9).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (va, vb) = (nonzero(&a), nonzero(&b));
        prop_assert_eq!(va.len(), vb.len());
        for (x, y) in va.iter().zip(&vb) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn channel_json_round_trip(seed in any::<u64>(), d in 1usize..4) {
        let ch = random::random_channel(&mut rng(seed), d, d, 2);
        let text = serde_json::to_string(&io::channel_to_json(&ch)).unwrap();
        let back = io::channel_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert!(channels::choi_distance(&ch, &back).unwrap() < 1e-14);
    }

    #[test]
    fn cocycle_is_unitary(seed in any::<u64>(), d in 1usize..4, t in -2.0f64..2.0) {
        let mut r = rng(seed);
        let rho = random::random_state(&mut r, d);
        let phi = random::random_state(&mut r, d);
        let u = experiments::cocycle(&rho, &phi, t).unwrap();
        prop_assert!(linalg::max_abs(&(&u * u.adjoint() - linalg::identity(d))) < 1e-8);
    }

    #[test]
    fn three_gaps_at_most(alpha in 0.001f64..0.999, k in 1usize..400) {
        let p = threegap_partition(alpha, k);
        prop_assert!(p.distinct_gaps() <= 3);
        let total: f64 = p.gaps().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        if k > 1 {
            prop_assert!(p.refines(&threegap_partition(alpha, k - 1)));
        }
    }

    #[test]
    fn amplifier_preserves_trace_on_protected_levels(t in 0.05f64..0.5, n in 0usize..4) {
        let p = AmplifierParams::new(t, 40, 40).unwrap();
        let ch = randorder::semigroups::amplifier_kraus(&p).unwrap();
        let out = ch.apply_operator(&linalg::matrix_unit(40, n, n));
        prop_assert!((linalg::trace(&out).re - 1.0).abs() < 1e-6);
    }
}

#[test]
fn identity_is_the_top_element() {
    let mut r = rng(5);
    let cfg = randorder::order::SolverConfig::default();
    for _ in 0..3 {
        let ch = random::random_channel(&mut r, 2, 2, 2);
        let v = randorder::order::check_randomization(&ch, &KrausChannel::identity(2), &cfg).unwrap();
        assert_eq!(v.status, randorder::order::OrderStatus::Holds);
    }
}
