use fluctlab::exactdp::BoundarySpec;
use fluctlab::harmonic::{
    build_w, cond_cdf_domination_violations, estimate_v, harmonicity_residual, max_drift, uniform_bound_check,
    vh_ratio_check, VTable, DRIFT_TOL,
};
use fluctlab::universal::fkg_check;
use fluctlab::wienerhopf::{ladder_height_law, RenewalFunction};
use fluctlab::{Error, StepLaw};

#[test]
fn v_over_v0_is_h() {
    for law in [StepLaw::ssrw(), StepLaw::uniform3(), StepLaw::left_skew()] {
        let h = RenewalFunction::new(&ladder_height_law(&law, 2000).unwrap(), 20).unwrap();
        let rep = vh_ratio_check(&law, &h, 10, 300).unwrap();
        assert!(rep.max_diff < 1e-6, "{law}: {}", rep.max_diff);
        for row in &rep.rows {
            assert!(row.diff <= row.bound + 1e-12, "{law}: {row:?}");
        }
    }
}

#[test]
fn v_of_the_simple_walk() {
    let t = VTable::build(&StepLaw::ssrw(), 10, 100).unwrap();
    assert_eq!(t.get(0).unwrap().value, 0.5);
    for x in 1..=10 {
        assert_eq!(t.get(x).unwrap().value, x as f64);
    }
    assert!(matches!(t.get(11), Err(Error::GridTooCoarse(_))));
}

#[test]
fn v_bounds_tighten_and_stay_under_w() {
    let law = StepLaw::sym2();
    let w = build_w(&law).unwrap();
    let mut width = f64::INFINITY;
    for n in [50u64, 500, 5000] {
        let v = estimate_v(&law, 4, n).unwrap();
        assert!(v.lower >= 4.0 && v.upper <= w.eval(4.0) + 1e-12);
        assert!(v.half_width() < width);
        width = v.half_width();
    }
    assert!(width < 0.02);
}

#[test]
fn w_superharmonic_on_probe_grids() {
    let real = StepLaw::real(&[(-2.5, 0.2), (-0.5, 0.2), (1.0, 0.6)]).unwrap();
    for law in [StepLaw::ssrw(), StepLaw::uniform3(), StepLaw::left_skew(), StepLaw::sym2(), real] {
        let w = build_w(&law).unwrap();
        let (x, d) = max_drift(&law, &w);
        assert!(d <= DRIFT_TOL, "{law}: drift {d} at {x}");
    }
    assert!(matches!(build_w(&StepLaw::drift()), Err(Error::NonCentered(_))));
}

#[test]
fn v_harmonic_within_truncation_bound() {
    for law in [StepLaw::uniform3(), StepLaw::sym2()] {
        let t = VTable::build(&law, 22, 3000).unwrap();
        for x in 0..=20 {
            let r = harmonicity_residual(&law, &t, x).unwrap();
            assert!(r.residual <= r.bound + 1e-12, "{law} x={x}: {r:?}");
        }
    }
}

#[test]
fn inequality_suites_have_no_violations() {
    for law in [StepLaw::ssrw(), StepLaw::uniform3(), StepLaw::left_skew(), StepLaw::sym2()] {
        for g in [0.0, -1.0, -3.0] {
            let r = fkg_check(&law, &BoundarySpec::constant(g), 300).unwrap();
            assert_eq!(r.violations, 0, "{law} g={g}");
            assert!(r.worst_slack >= -1e-14);
        }
        for x in [1, 3] {
            assert_eq!(cond_cdf_domination_violations(&law, x, 300).unwrap(), 0);
        }
        let h = RenewalFunction::new(&ladder_height_law(&law, 1000).unwrap(), 10 + 300 * law.max_up() as usize).unwrap();
        let v = VTable::build(&law, 10, 200).unwrap();
        let r = uniform_bound_check(&law, 10, &[1, 30, 300], &v, &h).unwrap();
        assert_eq!(r.h_form_violations, 0);
        assert!(r.h_form_max_ratio <= 1.0);
        // sqrt(n) P(tau_x > n) / V(x) stays bounded
        assert!(r.c_v.iter().all(|&(_, c)| c < 2.0));
    }
}
