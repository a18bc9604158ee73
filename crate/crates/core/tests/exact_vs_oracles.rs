//! Killed-walk DP against closed forms: reflection, ballot/hitting-time,
//! Catalan survival, and the Gaussian limit laws.

use std::f64::consts::FRAC_2_PI;

use approx::assert_relative_eq;
use fluctlab::exactdp::{conditional_pmf, killed_layers_exact, local_limit_error, survival_profile, Window};
use fluctlab::oracles::{
    hitting_time_pmf, rayleigh_cdf, simple_refl_pmf_exact, simple_refl_tail, simple_tau0_survival, simple_tau1_pmf,
    tail_predictor,
};
use fluctlab::universal::ks_rayleigh_exact;
use fluctlab::StepLaw;

#[test]
fn rational_dp_equals_reflection() {
    let ssrw = StepLaw::ssrw();
    for x in [1, 4, 13, 20] {
        let layers = killed_layers_exact(&ssrw, x, 40).unwrap();
        for (n, (off, masses)) in layers.iter().enumerate() {
            for (i, m) in masses.iter().enumerate() {
                let y = off + i as i64;
                assert_eq!(*m, simple_refl_pmf_exact(x, y, n as u64), "x={x} n={n} y={y}");
            }
        }
    }
}

#[test]
fn survival_tail_matches_reflection_tail() {
    let ssrw = StepLaw::ssrw();
    for x in [1i64, 3, 7] {
        let p = survival_profile(&ssrw, x, 200, Window::Full).unwrap();
        for n in [1u64, 2, 17, 100, 200] {
            assert!((p.survival[n as usize] - simple_refl_tail(x, 1, n)).abs() < 1e-13);
        }
    }
}

#[test]
fn catalan_laws_from_zero_and_one() {
    let ssrw = StepLaw::ssrw();
    let from1 = survival_profile(&ssrw, 1, 401, Window::Full).unwrap();
    let from0 = survival_profile(&ssrw, 0, 400, Window::Full).unwrap();
    for k in 0..200u64 {
        assert!((from1.absorbed[2 * k as usize + 1] - simple_tau1_pmf(k)).abs() < 1e-15);
        assert_eq!(from1.absorbed[2 * k as usize + 2], 0.0);
        // the closed form goes through log-gamma beyond n = 60
        assert_relative_eq!(from0.survival[2 * k as usize], simple_tau0_survival(k), max_relative = 1e-12);
    }
}

#[test]
fn hitting_time_theorem_for_left_continuous_laws() {
    let law = StepLaw::lattice(&[(-1, 0.3), (0, 0.2), (1, 0.4), (3, 0.1)]).unwrap();
    let dp = survival_profile(&law, 4, 120, Window::Full).unwrap();
    for n in [4u64, 5, 30, 120] {
        assert!((dp.absorbed[n as usize] - hitting_time_pmf(&law, 4, n).unwrap()).abs() < 1e-14);
    }
}

#[test]
fn tail_ratio_converges_for_several_laws() {
    for law in [StepLaw::ssrw(), StepLaw::uniform3(), StepLaw::sym2()] {
        let p = survival_profile(&law, 3, 20_000, Window::default()).unwrap();
        // V(3) = 3 + E[-S(tau_3)], read off the same DP
        let v = 3.0 + p.overshoot.iter().sum::<f64>();
        let ratio = |n: usize| p.survival[n] / tail_predictor(v, law.sigma(), n as u64).value;
        assert!((ratio(20_000) - 1.0).abs() < 0.01, "{law}: {}", ratio(20_000));
        assert!((ratio(20_000) - 1.0).abs() < (ratio(200) - 1.0).abs());
    }
    let p = survival_profile(&StepLaw::ssrw(), 1, 10_000, Window::default()).unwrap();
    assert_relative_eq!(100.0 * p.survival[10_000], FRAC_2_PI.sqrt(), max_relative = 1e-4);
}

#[test]
fn conditioned_endpoint_approaches_rayleigh() {
    let law = StepLaw::uniform3();
    let (mut prev, mut last) = (f64::INFINITY, 0.0);
    for n in [100u64, 1000, 5000] {
        let ks = ks_rayleigh_exact(&law, 2, n).unwrap();
        assert!(ks < prev);
        prev = ks;
        last = ks;
    }
    assert!(last < 0.03);
    // spot value of the conditional CDF
    let cond = conditional_pmf(&StepLaw::ssrw(), 1, 10_000).unwrap();
    let cdf_at_100: f64 = cond.iter().filter(|&(y, _)| y <= 100).map(|(_, p)| p).sum();
    assert!((cdf_at_100 - rayleigh_cdf(1.0)).abs() < 0.01);
}

#[test]
fn local_limit_error_decays_like_inverse_sqrt() {
    let e2 = local_limit_error(&StepLaw::ssrw(), 1, 100).unwrap().error;
    let e4 = local_limit_error(&StepLaw::ssrw(), 1, 10_000).unwrap().error;
    // one power of n^{-1/2} per decade squared
    assert!(e4 < e2 / 50.0);
    let lazy = local_limit_error(&StepLaw::uniform3(), 2, 4000).unwrap();
    assert!(lazy.error < 0.01);
}
