use mixcara::measures::{sample_random_mixture, SamplerConfig};
use mixcara::moments::{dirac_moments, mixture_moments};
use mixcara::recover::{
    lm_fit, match_components, prony_dirac, recover, recover_shared_sigma_gaussian,
    recover_shared_sigma_lognormal, LmConfig, SigmaSchedule,
};
use mixcara::seed::sub_seed;
use mixcara::{
    AtomicMeasure, Component, Engine, MixtureKind, MixtureMeasure, MomentVector, MonomialBasis,
    RecoveryConfig, RecoveryReport,
};
use proptest::prelude::*;

fn gaussian(comps: &[(f64, f64, f64)]) -> MixtureMeasure {
    MixtureMeasure::new(
        MixtureKind::Gaussian,
        comps
            .iter()
            .map(|&(c, x, s)| Component::univariate(c, x, s))
            .collect(),
    )
    .unwrap()
}

#[test]
fn pearson_two_component_fit() {
    // two Gaussians with distinct widths, six parameters on six moments
    let truth = gaussian(&[(0.6, -0.8, 0.35), (0.4, 0.9, 0.55)]);
    let basis = MonomialBasis::full_univariate(5);
    let s = mixture_moments(&basis, &truth).unwrap();
    let cfg = LmConfig {
        seed: 11,
        ..LmConfig::default()
    };
    let report = lm_fit(&s, MixtureKind::Gaussian, 2, true, &cfg).unwrap();
    assert!(report.success, "{report:?}");
    let found = report.mixture().unwrap();
    let m = match_components(truth.components(), found.components()).unwrap();
    assert!(m.max_location_error <= 1e-5, "{m:?}");
    assert!(m.max_weight_error <= 1e-5, "{m:?}");
    assert!(m.max_sigma_error <= 1e-5, "{m:?}");
}

#[test]
fn shared_sigma_recovers_true_parameters() {
    let truth = gaussian(&[(1.0, -1.0, 0.2), (0.5, 0.1, 0.2), (1.5, 1.1, 0.2)]);
    let basis = MonomialBasis::full_univariate(5);
    let s = mixture_moments(&basis, &truth).unwrap();
    let sched = SigmaSchedule::explicit(vec![0.4, 0.2, 0.1]);
    let report = recover_shared_sigma_gaussian(&s, &sched).unwrap();
    assert!(report.success);
    assert_eq!(report.k, 3);
    // deconvolving past the true width leaves no nonnegative measure
    assert_eq!(report.sigma_used, Some(0.2));
    let m = match_components(truth.components(), report.mixture().unwrap().components()).unwrap();
    assert!(
        m.max_location_error <= 1e-6 && m.max_weight_error <= 1e-6,
        "{m:?}"
    );
}

#[test]
fn lognormal_recovery_matches_moments() {
    let truth = MixtureMeasure::new(
        MixtureKind::Lognormal,
        vec![
            Component::univariate(1.0, 0.7, 0.15),
            Component::univariate(0.8, 1.6, 0.15),
            Component::univariate(0.4, 2.6, 0.15),
        ],
    )
    .unwrap();
    let basis = MonomialBasis::full_univariate(5);
    let s = mixture_moments(&basis, &truth).unwrap();
    let report = recover_shared_sigma_lognormal(&s, &SigmaSchedule::explicit(vec![0.15])).unwrap();
    assert!(report.success);
    let m = match_components(truth.components(), report.mixture().unwrap().components()).unwrap();
    assert!(m.max_location_error <= 1e-6, "{m:?}");
}

#[test]
fn prony_recovers_dirac_atoms() {
    let basis = MonomialBasis::full_univariate(7);
    let atoms = AtomicMeasure::univariate(&[0.3, 1.2, 0.8, 2.0], &[-1.4, -0.2, 0.6, 1.9]).unwrap();
    let s = dirac_moments(&basis, &atoms).unwrap();
    let found = prony_dirac(&s, 4).unwrap();
    assert_eq!(found.len(), 4);
    for ((w, x), (wt, xt)) in found.atoms().zip(atoms.atoms()) {
        assert!((w - wt).abs() <= 1e-8 && (x[0] - xt[0]).abs() <= 1e-8);
    }
}

#[test]
fn dispatch_honours_engine_and_kind() {
    let basis = MonomialBasis::full_univariate(3);
    let s = mixture_moments(&basis, &gaussian(&[(1.0, 0.2, 0.3), (1.0, -0.5, 0.3)])).unwrap();
    let report = recover(
        &s,
        &RecoveryConfig::new(Engine::SharedSigma, MixtureKind::Gaussian),
    )
    .unwrap();
    assert!(report.success);
    assert_eq!(report.engine, "shared-sigma-gaussian");
    assert!(recover(
        &s,
        &RecoveryConfig::new(Engine::Homotopy, MixtureKind::Lognormal)
    )
    .is_err());
}

#[test]
fn homotopy_through_dispatch() {
    let basis = MonomialBasis::univariate(&[0, 2, 3, 5, 6]).unwrap();
    let truth = gaussian(&[(1.0, -0.6, 0.05), (0.7, 0.1, 0.05), (1.2, 0.8, 0.05)]);
    let s = mixture_moments(&basis, &truth).unwrap();
    let mut cfg = RecoveryConfig::new(Engine::Homotopy, MixtureKind::Gaussian);
    cfg.seed = 3;
    let report = recover(&s, &cfg).unwrap();
    assert!(report.success, "{report:?}");
    assert_eq!(report.k, 3);
    assert!(report.sigma_used.unwrap() >= 1e-4);
    assert!(report.residual <= 1e-8);
}

#[test]
fn default_counts() {
    let b5 = MonomialBasis::full_univariate(5);
    let gap = MonomialBasis::univariate(&[0, 2, 3, 5, 6]).unwrap();
    assert_eq!(
        RecoveryConfig::new(Engine::SharedSigma, MixtureKind::Gaussian).default_k(&b5),
        3
    );
    assert_eq!(
        RecoveryConfig::new(Engine::Homotopy, MixtureKind::Gaussian).default_k(&gap),
        3
    );
    let mut lm = RecoveryConfig::new(Engine::Lm, MixtureKind::Gaussian);
    lm.free_sigma = true;
    assert_eq!(lm.default_k(&b5), 2);
}

#[test]
fn report_roundtrips_through_json() {
    let basis = MonomialBasis::full_univariate(3);
    let s = mixture_moments(&basis, &gaussian(&[(1.0, 0.0, 0.5)])).unwrap();
    let report = recover_shared_sigma_gaussian(&s, &SigmaSchedule::default()).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: RecoveryReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}

#[test]
fn exterior_moments_are_not_recovered() {
    // negative variance
    let basis = MonomialBasis::full_univariate(2);
    let s = MomentVector::external(basis, vec![1.0, 0.0, -1.0]).unwrap();
    let report = recover_shared_sigma_gaussian(&s, &SigmaSchedule::default()).unwrap();
    assert!(!report.success);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shared_sigma_count_never_exceeds_bound(d in 1u32..=7, k in 1usize..=4, seed in any::<u64>()) {
        let basis = MonomialBasis::full_univariate(d);
        let cfg = SamplerConfig {
            min_separation: 0.4,
            shared_sigma: true,
            ..SamplerConfig::default()
        };
        let mu = sample_random_mixture(MixtureKind::Gaussian, k, 1, &cfg, sub_seed(seed, 0)).unwrap();
        let s = mixture_moments(&basis, &mu).unwrap();
        let report = recover_shared_sigma_gaussian(&s, &SigmaSchedule::default()).unwrap();
        prop_assert!(report.success);
        prop_assert!(report.k <= (d as usize + 2) / 2);
        prop_assert!(report.residual <= 1e-8);
    }

    #[test]
    fn lognormal_count_never_exceeds_bound(d in 1u32..=5, k in 1usize..=3, seed in any::<u64>()) {
        let basis = MonomialBasis::full_univariate(d);
        let cfg = SamplerConfig {
            xi_range: (0.5, 3.0),
            min_separation: 0.3,
            ..SamplerConfig::default()
        };
        let mu = sample_random_mixture(MixtureKind::Lognormal, k, 1, &cfg, sub_seed(seed, 0)).unwrap();
        let s = mixture_moments(&basis, &mu).unwrap();
        let report = recover_shared_sigma_lognormal(&s, &SigmaSchedule::default()).unwrap();
        prop_assert!(report.success, "{:?}", report.failure_reason);
        prop_assert!(report.k <= basis.m().div_ceil(2));
        for comp in report.mixture().unwrap().components() {
            prop_assert!(comp.xi[0] > 0.0 && comp.c > 0.0);
        }
    }
}
