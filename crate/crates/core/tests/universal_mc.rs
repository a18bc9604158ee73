use fluctlab::exactdp::{boundary_profile, BoundarySpec, Window};
use fluctlab::universal::{
    conditioned_endpoints, divergence_diagnostic, ks_rayleigh, read_batch, simulate_tg, split_endpoints, tail_vs_theorem,
    write_batch, Lindeberg, LawSequence,
};
use fluctlab::StepLaw;

#[test]
fn mc_survival_agrees_with_dp() {
    let seq = LawSequence::Iid(StepLaw::uniform3());
    for g in [BoundarySpec::constant(-2.0), BoundarySpec::Power { scale: 1.0, exponent: 0.2, offset: -1.0 }] {
        let dp = boundary_profile(&StepLaw::uniform3(), &g, 1000, Window::default()).unwrap().survival[1000];
        let est = simulate_tg(&seq, &g, 1000, 100_000, 3).unwrap().survival();
        assert!((est.p - dp).abs() < 4.0 * est.sigma, "{g:?}: {} vs {dp}", est.p);
        assert!(est.lo <= est.p && est.p <= est.hi);
    }
}

#[test]
fn batches_are_reproducible_and_seed_sensitive() {
    let seq = LawSequence::Counterexample;
    let g = BoundarySpec::constant(0.0);
    let a = simulate_tg(&seq, &g, 300, 2000, 11).unwrap();
    let b = simulate_tg(&seq, &g, 300, 2000, 11).unwrap();
    let c = simulate_tg(&seq, &g, 300, 2000, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.records, c.records);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.bin");
    write_batch(&path, &a).unwrap();
    assert_eq!(read_batch(&path).unwrap(), a);
}

#[test]
fn counterexample_endpoints_are_rayleigh() {
    // B_n = sqrt(n) since every step has variance 1
    let n = 10_000u64;
    let s = split_endpoints(&LawSequence::Counterexample, &BoundarySpec::constant(0.0), n, 20_000, 5).unwrap();
    let ks = ks_rayleigh(&s.endpoints, (n as f64).sqrt()).unwrap();
    assert!(ks <= 0.05, "{ks}");
    assert!(s.survival > 0.0 && s.survival < 0.05);
}

#[test]
fn rejection_is_used_when_survival_is_large() {
    let seq = LawSequence::Iid(StepLaw::ssrw());
    let c = conditioned_endpoints(&seq, &BoundarySpec::constant(-5.0), 400, 20_000, 1).unwrap();
    let ks = ks_rayleigh(&c.endpoints, 20.0).unwrap();
    assert!(ks < 0.1, "{ks}");
}

#[test]
fn counterexample_lindeberg_decays_slowly() {
    let l: Vec<f64> = [1_000u64, 10_000, 100_000].iter().map(|&n| Lindeberg::new(&LawSequence::Counterexample, n).eval(0.5)).collect();
    assert!(l[0] > l[1] && l[1] > l[2]);
    // O(1 / log n): L_n log n stays of the same order
    let scaled: Vec<f64> = [1_000f64, 10_000.0, 100_000.0].iter().zip(&l).map(|(n, l)| l * n.ln()).collect();
    assert!(scaled.iter().all(|s| *s > 0.2 && *s < 2.0), "{scaled:?}");
}

#[test]
fn divergence_against_iid_contrast() {
    let cx = divergence_diagnostic(&LawSequence::Counterexample, 100_000, 0.5).unwrap();
    let iid = divergence_diagnostic(&LawSequence::Iid(StepLaw::uniform3()), 200_000, 0.5).unwrap();
    assert!(cx.loglog_slope > 0.0);
    // each decade adds about (1/2) ln(ln 10^{k+1} / ln 10^k)
    let inc = cx.at(100_000).unwrap() - cx.at(10_000).unwrap();
    assert!((inc - 0.5 * (5f64 / 4.0).ln()).abs() < 1e-3, "{inc}");
    assert_eq!(iid.max_late_term, 0.0);
}

#[test]
fn tail_ratio_for_moving_boundary() {
    let g = BoundarySpec::Power { scale: 1.0, exponent: 0.25, offset: -1.0 };
    let rows = tail_vs_theorem(&LawSequence::Iid(StepLaw::sym2()), &g, &[1000, 20_000]).unwrap();
    assert!((rows[1].ratio - 1.0).abs() < 0.05, "{rows:?}");
}
