//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mixcara::conegeo::{
    hankel_classify, infinity_direction, represent_with_prescribed_component, strip_mass,
    ConeStatus, StripConfig,
};
use mixcara::harness::{run_experiment, ExperimentConfig, ExperimentKind, THREADS_ENV};
use mixcara::jacobian::estimate_na;
use mixcara::measures::{sample_random_atoms, sample_random_mixture, SamplerConfig};
use mixcara::moments::{
    dirac_moments, gaussian_smoothed_basis, lognormal_moment, mixture_moments,
    univariate_smoothed_table,
};
use mixcara::recover::{
    homotopy_gap_recovery, recover_shared_sigma_gaussian, recover_shared_sigma_lognormal,
    HomotopyConfig, SigmaSchedule,
};
use mixcara::reduce::{reduce_atoms, reduce_mixture_components};
use mixcara::seed::sub_seed;
use mixcara::{AtomicMeasure, Engine, MixtureKind, MomentVector, MonomialBasis, RecoveryConfig};

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gap_basis() -> MonomialBasis {
    MonomialBasis::univariate(&[0, 2, 3, 5, 6]).unwrap()
}

fn smoothed_table_exact() -> Outcome {
    let start = Instant::now();
    let sb = gaussian_smoothed_basis(&gap_basis()).unwrap();
    // (coefficient, x power, σ² power)
    let expected: [&[(u128, u32, u32)]; 5] = [
        &[(1, 0, 0)],
        &[(1, 2, 0), (1, 0, 1)],
        &[(1, 3, 0), (3, 1, 1)],
        &[(1, 5, 0), (10, 3, 1), (15, 1, 2)],
        &[(1, 6, 0), (15, 4, 1), (45, 2, 2), (15, 0, 3)],
    ];
    let mut mismatches = Vec::new();
    for (i, want) in expected.iter().enumerate() {
        let got: Vec<(u128, u32, u32)> = sb
            .terms(i)
            .iter()
            .map(|t| (t.coeff, t.x_powers[0], t.sigma_sq_power))
            .collect();
        if got.as_slice() != *want {
            mismatches.push(format!("row {i}: {got:?}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(1),
        if mismatches.is_empty() {
            format!("b_0, b_2, b_3, b_5, b_6 match exactly in {elapsed:.2?}")
        } else {
            mismatches.join("; ")
        },
    )
}

fn central_gaussian_moments() -> Outcome {
    let table = univariate_smoothed_table(10).unwrap();
    let mut bad = Vec::new();
    for (i, b) in table.iter().enumerate() {
        // b_i(0, σ) keeps only the term with no power of x
        let constant: u128 = b
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(j, _)| i == 2 * j)
            .map(|(_, &c)| c)
            .sum();
        let want: u128 = if i % 2 == 1 {
            0
        } else {
            (1..i as u128).step_by(2).product()
        };
        if constant != want {
            bad.push(format!("i={i}: {constant} vs {want}"));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "(i-1)!! for even i <= 10, 0 for odd i".to_string()
        } else {
            bad.join("; ")
        },
    )
}

fn lognormal_quadrature() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(SEED, 3));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let i = rng.random_range(0..=8u32);
        let xi = rng.random_range(0.5..3.0);
        let sigma = rng.random_range(0.1..1.0);
        let closed = lognormal_moment(i, xi, sigma).unwrap();
        let quad = common::lognormal_moment_quadrature(i, xi, sigma);
        worst = worst.max((closed - quad).abs() / closed.abs());
    }
    outcome(
        worst <= 1e-6,
        format!("20 triples, worst relative error {worst:.2e}"),
    )
}

fn gaussian_bound() -> Outcome {
    let start = Instant::now();
    let basis = MonomialBasis::full_univariate(5);
    let cfg = SamplerConfig {
        xi_range: (-2.0, 2.0),
        sigma_range: (0.05, 0.3),
        min_separation: 0.5,
        shared_sigma: true,
        ..SamplerConfig::default()
    };
    let (mut ok, mut over) = (0, 0);
    for t in 0..100 {
        let mu = sample_random_mixture(MixtureKind::Gaussian, 3, 1, &cfg, sub_seed(SEED, 400 + t))
            .unwrap();
        let s = mixture_moments(&basis, &mu).unwrap();
        let r = recover_shared_sigma_gaussian(&s, &SigmaSchedule::default()).unwrap();
        if r.success && r.residual <= 1e-8 {
            if r.k > 3 {
                over += 1;
            } else {
                ok += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok >= 95 && over == 0 && elapsed < Duration::from_secs(30),
        format!("{ok}/100 recovered with k <= 3, {over} used k > 3, {elapsed:.2?}"),
    )
}

fn lognormal_bound() -> Outcome {
    let basis = MonomialBasis::full_univariate(5);
    let cfg = SamplerConfig {
        xi_range: (0.5, 3.0),
        sigma_range: (0.05, 0.3),
        ..SamplerConfig::default()
    };
    let mut ok = 0;
    for t in 0..100 {
        let mu = sample_random_mixture(MixtureKind::Lognormal, 3, 1, &cfg, sub_seed(SEED, 500 + t))
            .unwrap();
        let s = mixture_moments(&basis, &mu).unwrap();
        let r = recover_shared_sigma_lognormal(&s, &SigmaSchedule::default()).unwrap();
        if r.success && r.residual <= 1e-8 && r.k <= 3 {
            ok += 1;
        }
    }
    outcome(ok >= 95, format!("{ok}/100 recovered with k <= 3"))
}

fn gap_homotopy() -> Outcome {
    let start = Instant::now();
    let basis = gap_basis();
    let cfg = SamplerConfig {
        xi_range: (-1.0, 1.0),
        sigma_range: (0.05, 0.05),
        min_separation: 0.2,
        shared_sigma: true,
        ..SamplerConfig::default()
    };
    let mut ok = 0;
    let mut failures = Vec::new();
    for t in 0..50 {
        let seed = sub_seed(SEED, 600 + t);
        let mu = sample_random_mixture(MixtureKind::Gaussian, 3, 1, &cfg, seed).unwrap();
        let s = mixture_moments(&basis, &mu).unwrap();
        let h = HomotopyConfig {
            seed,
            ..HomotopyConfig::default()
        };
        match homotopy_gap_recovery(&s, 3, &h) {
            Ok(r) if r.success && r.residual <= 1e-8 && r.k == 3 => ok += 1,
            Ok(r) => failures.push(r.failure_reason.unwrap_or_default()),
            Err(e) => failures.push(e.to_string()),
        }
    }
    let elapsed = start.elapsed();
    let mut detail = format!("{ok}/50 reached sigma >= 1e-4 with k = 3, {elapsed:.2?}");
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first failure: {f}"));
    }
    outcome(ok >= 45 && elapsed < Duration::from_secs(120), detail)
}

fn na_table() -> Outcome {
    let mut got = Vec::new();
    let mut pass = true;
    for d in 1..=9u32 {
        let basis = MonomialBasis::full_univariate(d);
        let est = estimate_na(
            &basis,
            d as usize + 1,
            20,
            sub_seed(SEED, 700 + u64::from(d)),
        )
        .unwrap();
        let want = (d as usize + 2) / 2;
        let lower = basis.m().div_ceil(2);
        pass &= est.estimate == Some(want) && est.estimate.unwrap_or(0) >= lower;
        got.push(est.estimate.map_or("none".to_string(), |k| k.to_string()));
    }
    outcome(pass, format!("N_A for d = 1..9: {}", got.join(",")))
}

fn reduction_stress() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut too_many = 0;
    let mut errors = Vec::new();
    let base = SamplerConfig {
        xi_range: (-1.0, 1.0),
        ..SamplerConfig::default()
    };
    for t in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(SEED, 800 + t));
        let basis = match rng.random_range(0..4) {
            0 => MonomialBasis::total_degree(2, rng.random_range(1..=2)).unwrap(),
            _ => MonomialBasis::full_univariate(rng.random_range(1..=7)),
        };
        let m = basis.m();
        let k = rng.random_range(m + 1..=50);
        let seed = rng.random::<u64>();
        let result = match t % 3 {
            0 => sample_random_atoms(k, basis.n(), &base, seed).and_then(|mu| {
                let out = reduce_atoms(&basis, &mu)?;
                Ok((
                    out.len(),
                    dirac_moments(&basis, &mu)?,
                    dirac_moments(&basis, &out)?,
                ))
            }),
            r => {
                let kind = if r == 2 && basis.n() == 1 {
                    MixtureKind::Lognormal
                } else {
                    MixtureKind::Gaussian
                };
                let cfg = if kind == MixtureKind::Lognormal {
                    SamplerConfig {
                        xi_range: (0.5, 1.5),
                        ..base.clone()
                    }
                } else {
                    base.clone()
                };
                sample_random_mixture(kind, k, basis.n(), &cfg, seed).and_then(|mu| {
                    let out = reduce_mixture_components(&basis, &mu)?;
                    Ok((
                        out.len(),
                        mixture_moments(&basis, &mu)?,
                        mixture_moments(&basis, &out)?,
                    ))
                })
            }
        };
        match result {
            Ok((len, before, after)) => {
                if len > m {
                    too_many += 1;
                }
                for (a, b) in before.values().iter().zip(after.values()) {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    outcome(
        too_many == 0 && errors.is_empty() && worst <= 1e-10,
        format!(
            "500 reductions, {too_many} above m, {} errors, worst moment drift {worst:.2e}",
            errors.len()
        ),
    )
}

fn prescribed_component() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(SEED, 9));
    let cfg = SamplerConfig {
        xi_range: (-1.5, 1.5),
        sigma_range: (0.2, 0.8),
        ..SamplerConfig::default()
    };
    let engine = RecoveryConfig::new(Engine::SharedSigma, MixtureKind::Gaussian);
    let mut ok = 0;
    let mut failures = Vec::new();
    for t in 0..20u64 {
        let d = rng.random_range(2..=5u32);
        let k = rng.random_range(1..=3usize);
        let basis = MonomialBasis::full_univariate(d);
        let mu = sample_random_mixture(MixtureKind::Gaussian, k, 1, &cfg, sub_seed(SEED, 900 + t))
            .unwrap();
        let s = mixture_moments(&basis, &mu).unwrap();
        let x0 = rng.random_range(-3.0..3.0);
        let sigma0 = rng.random_range(0.1..1.0);
        assert_eq!(hankel_classify(&s).unwrap().status, ConeStatus::Interior);
        match represent_with_prescribed_component(&s, &[x0], sigma0, &engine) {
            Ok(rep) => {
                let contains = rep
                    .mixture
                    .components()
                    .iter()
                    .any(|c| c.c > 0.0 && c.xi == [x0] && c.sigma == sigma0);
                let residual = mixture_moments(&basis, &rep.mixture)
                    .unwrap()
                    .relative_residual(s.values());
                if contains && residual <= 1e-8 {
                    ok += 1;
                } else {
                    failures.push(format!(
                        "trial {t}: contains={contains}, residual {residual:e}"
                    ));
                }
            }
            Err(e) => failures.push(format!("trial {t}: {e}")),
        }
    }
    let mut detail = format!("{ok}/20 representations contain the prescribed component");
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {f}"));
    }
    outcome(ok == 20, detail)
}

fn stripping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(SEED, 10));
    let oracle = |s: &MomentVector| Ok(hankel_classify(s)?.status);
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for t in 0..50 {
        // r atoms over {1, …, x^{2r}} lie on the boundary
        let r = rng.random_range(1..=3usize);
        let basis = MonomialBasis::full_univariate(2 * r as u32);
        let mut atoms: Vec<f64> = Vec::new();
        while atoms.len() < r {
            let x = rng.random_range(-1.0..1.0);
            if atoms.iter().all(|a: &f64| (a - x).abs() >= 0.3) {
                atoms.push(x);
            }
        }
        let weights: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..2.0)).collect();
        let base = dirac_moments(
            &basis,
            &AtomicMeasure::univariate(&weights, &atoms).unwrap(),
        )
        .unwrap();
        let v = if t % 2 == 0 {
            let x0 = loop {
                let x = rng.random_range(-1.5..1.5);
                if atoms.iter().all(|a| (a - x).abs() >= 0.3) {
                    break x;
                }
            };
            MomentVector::external(
                basis.clone(),
                basis.eval_point(&[x0]).unwrap().as_slice().to_vec(),
            )
            .unwrap()
        } else {
            infinity_direction(&basis).unwrap()
        };
        let c: f64 = rng.random_range(0.1..5.0);
        let s = base
            .with_values(
                base.values()
                    .iter()
                    .zip(v.values())
                    .map(|(a, b)| a + c * b)
                    .collect(),
            )
            .unwrap();
        match strip_mass(&s, &v, oracle, &StripConfig::default()) {
            Ok(res) => worst = worst.max((res.c - c).abs()),
            Err(e) => errors.push(e.to_string()),
        }
    }
    outcome(
        errors.is_empty() && worst <= 1e-6,
        format!(
            "50 instances, worst |c* - c| = {worst:.2e}, {} errors",
            errors.len()
        ),
    )
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    for kind in ExperimentKind::ALL {
        let mut cfg = ExperimentConfig::new(kind);
        cfg.seed = 99;
        cfg.trials = match kind {
            ExperimentKind::GapHomotopy => 4,
            _ => 8,
        };
        cfg.degrees = Some(vec![1, 2, 3, 4]);
        cfg.rank_trials = 5;
        std::env::remove_var(THREADS_ENV);
        let first = run_experiment(&cfg).unwrap();
        std::env::set_var(THREADS_ENV, "1");
        let second = run_experiment(&cfg).unwrap();
        std::env::remove_var(THREADS_ENV);
        let same = first.to_csv().unwrap() == second.to_csv().unwrap()
            && first.to_json().unwrap() == second.to_json().unwrap();
        if !same {
            differing.push(kind.name());
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "all six experiments byte-identical across default and single-thread runs".to_string()
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "smoothed basis exact on {1,x^2,x^3,x^5,x^6}",
            smoothed_table_exact,
        ),
        (
            "central Gaussian moments (i-1)!! sigma^i",
            central_gaussian_moments,
        ),
        ("log-normal moments vs quadrature", lognormal_quadrature),
        ("shared-sigma Gaussian recovery, d = 5", gaussian_bound),
        ("log-normal recovery, m = 6", lognormal_bound),
        ("gap-system homotopy recovery", gap_homotopy),
        ("rank number table d = 1..9", na_table),
        ("Caratheodory reduction stress", reduction_stress),
        ("prescribed-component representation", prescribed_component),
        ("mass stripping", stripping),
        ("harness determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.2?}]",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
