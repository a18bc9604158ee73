use fluctlab::chain::{
    build_chain_w, chain_profile, chain_survival, chain_v, clt_diagnostic, clt_exact, conditioned_vs_doob_tv,
    doob_chain_step, doob_limit_check, kernel_validate, simulate_doob, ChainKernel, ChainVTable, MajorantY,
};
use fluctlab::oracles::doob_kernel_simple;
use fluctlab::{Error, StepLaw};

#[test]
fn mc_and_dp_agree_on_lattice_kernels() {
    for k in [ChainKernel::iid(&StepLaw::ssrw()).unwrap(), ChainKernel::region_switched()] {
        let n = 800u64;
        let dp = chain_profile(&k, 3.0, n).unwrap().survival[n as usize];
        let v = chain_v(&k, 3.0, 50, None).unwrap();
        let mc = chain_survival(&k, 3.0, n, 50_000, 21, v).unwrap();
        assert!((mc.p - dp).abs() < 4.0 * mc.sigma, "{}: {} vs {dp}", k.name(), mc.p);
    }
}

#[test]
fn region_switched_tail_ratio() {
    let k = ChainKernel::region_switched();
    let w = build_chain_w(&MajorantY::Bounded { m: 6.0 }).unwrap();
    let v = chain_v(&k, 2.0, 4000, Some(&w)).unwrap();
    assert!(v.lower <= v.estimate && v.estimate <= v.upper);
    // exact survival at n = 4000 against sqrt(2/pi) V(x) / sqrt(n)
    let s = chain_profile(&k, 2.0, 4000).unwrap().survival[4000];
    let ratio = s * 4000f64.sqrt() / (std::f64::consts::FRAC_2_PI.sqrt() * v.estimate);
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn variance_two_region_is_rejected() {
    let bad = ChainKernel::region_switched_var2();
    match kernel_validate(&bad, &MajorantY::Bounded { m: 6.0 }, &bad.probe_ticks()) {
        Err(Error::AssumptionViolated(msg)) => assert!(!msg.is_empty()),
        other => panic!("expected a violated assumption, got {other:?}"),
    }
    let good = ChainKernel::region_switched();
    let rep = kernel_validate(&good, &MajorantY::Bounded { m: 6.0 }, &good.probe_ticks()).unwrap();
    assert!(rep.max_variance_error < 1e-12 && rep.max_mean_error < 1e-12);
}

#[test]
fn clt_for_the_unkilled_chain() {
    let k = ChainKernel::region_switched();
    let exact = clt_exact(&k, 0.0, 2000).unwrap();
    assert!((exact.var_ratio - 1.0).abs() < 1e-9 && exact.ks < 0.02, "{exact:?}");
    let mc = clt_diagnostic(&k, 0.0, 500, 20_000, 2).unwrap();
    assert!((mc.var_ratio - 1.0).abs() < 4.0 * mc.var_sigma);
}

#[test]
fn doob_chain_of_the_simple_walk() {
    let k = ChainKernel::iid(&StepLaw::ssrw()).unwrap();
    let v = ChainVTable::build(&k, 12_000, 1);
    for t in 1..20 {
        let step = doob_chain_step(&k, &v, t).unwrap();
        let (up, down) = doob_kernel_simple(t).unwrap();
        let p = |y: i64| step.law.iter().find(|a| a.0 == y).map_or(0.0, |a| a.1);
        assert!((p(t + 1) - up).abs() < 1e-15 && (p(t - 1) - down).abs() < 1e-15);
        assert!(step.normalization_residual < 1e-15);
    }
    let (k3, k4) = (doob_limit_check(&k, &v, 1.0, 1000).unwrap(), doob_limit_check(&k, &v, 1.0, 10_000).unwrap());
    assert!(k4 < k3 && k4 <= 0.02);
    // sampled paths never leave the half-line
    let ends = simulate_doob(&k, &v, 1.0, 400, 2000, 9).unwrap();
    assert!(ends.iter().all(|&e| e > 0.0));
}

#[test]
fn conditioned_law_approaches_doob_law() {
    let k = ChainKernel::region_switched();
    let v = ChainVTable::build(&k, 400, 2000);
    let tv: Vec<f64> = [50u64, 500, 3000].iter().map(|&n| conditioned_vs_doob_tv(&k, &v, 2.0, 5, n).unwrap()).collect();
    assert!(tv[0] > tv[1] && tv[1] > tv[2], "{tv:?}");
    assert!(tv[2] < 0.05);
}
