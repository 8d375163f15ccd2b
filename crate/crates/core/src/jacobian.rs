//! Jacobians of the k-component moment maps and randomized rank estimation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::measures::{AtomicMeasure, Component, MixtureKind, MixtureMeasure};
use crate::moments::{
    component_moments, gaussian_smoothed_basis, lognormal_moment_derivatives, SmoothedBasis,
};
use crate::seed::sub_seed;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// `DS_{k,A}(C, X)`: per atom the block `s_A(x_i), c_i ∂_1 s_A(x_i), …, c_i ∂_n s_A(x_i)`.
pub fn assemble_ds(basis: &MonomialBasis, mu: &AtomicMeasure) -> Result<DMatrix<f64>> {
    if mu.is_empty() {
        return Err(Error::InvalidInput("DS needs at least one atom".into()));
    }
    let n = basis.n();
    let mut out = DMatrix::zeros(basis.m(), mu.len() * (n + 1));
    for (i, (c, x)) in mu.atoms().enumerate() {
        let col = i * (n + 1);
        out.set_column(col, &basis.eval_point(x)?);
        let jac = basis.eval_jacobian(x)?;
        for j in 0..n {
            out.set_column(col + 1 + j, &(jac.column(j) * c));
        }
    }
    Ok(out)
}

/// `DT_{k,A}`: per component `t_A, c ∂_{ξ_1} t_A, …, c ∂_{ξ_n} t_A, c ∂_σ t_A`.
pub fn assemble_dt(basis: &MonomialBasis, mu: &MixtureMeasure) -> Result<DMatrix<f64>> {
    let smoothed = match mu.kind() {
        MixtureKind::Gaussian => Some(gaussian_smoothed_basis(basis)?),
        MixtureKind::Lognormal => None,
    };
    assemble_dt_with(basis, mu, smoothed.as_ref())
}

pub(crate) fn assemble_dt_with(
    basis: &MonomialBasis,
    mu: &MixtureMeasure,
    smoothed: Option<&SmoothedBasis>,
) -> Result<DMatrix<f64>> {
    if mu.is_empty() {
        return Err(Error::InvalidInput(
            "DT needs at least one component".into(),
        ));
    }
    let n = basis.n();
    let mut out = DMatrix::zeros(basis.m(), mu.len() * (n + 2));
    for (i, comp) in mu.components().iter().enumerate() {
        if comp.xi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: comp.xi.len(),
            });
        }
        let col = i * (n + 2);
        match mu.kind() {
            MixtureKind::Gaussian => {
                let sb =
                    smoothed.ok_or_else(|| Error::InvalidInput("missing smoothed basis".into()))?;
                out.set_column(col, &sb.eval(&comp.xi, comp.sigma)?);
                let dx = sb.eval_dx(&comp.xi, comp.sigma)?;
                for j in 0..n {
                    out.set_column(col + 1 + j, &(dx.column(j) * comp.c));
                }
                out.set_column(
                    col + 1 + n,
                    &(sb.eval_dsigma(&comp.xi, comp.sigma)? * comp.c),
                );
            }
            MixtureKind::Lognormal => {
                let degrees = basis
                    .univariate_degrees()
                    .ok_or_else(|| Error::UnsupportedBasis("log-normal needs n = 1".into()))?;
                out.set_column(
                    col,
                    &component_moments(basis, MixtureKind::Lognormal, None, &comp.xi, comp.sigma)?,
                );
                for (row, &d) in degrees.iter().enumerate() {
                    let (dxi, dsig) = lognormal_moment_derivatives(d, comp.xi[0], comp.sigma)?;
                    out[(row, col + 1)] = comp.c * dxi;
                    out[(row, col + 2)] = comp.c * dsig;
                }
            }
        }
    }
    Ok(out)
}

/// Singular-value rank of one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub k: Option<usize>,
    pub rows: usize,
    pub cols: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub rel_tol: f64,
    /// `rank == rows`: the moment map is locally onto.
    pub full_rank: bool,
}

/// Counts singular values above `rel_tol · σ_max`.
pub fn numeric_rank(matrix: &DMatrix<f64>, rel_tol: f64) -> Result<RankReport> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rank tolerance {rel_tol} not in (0, 1)"
        )));
    }
    let sv = singular_values(matrix);
    let smax = sv[0];
    let rank = if smax > 0.0 {
        sv.iter().filter(|&&s| s > rel_tol * smax).count()
    } else {
        0
    };
    Ok(RankReport {
        k: None,
        rows: matrix.nrows(),
        cols: matrix.ncols(),
        singular_values: sv,
        rank,
        rel_tol,
        full_rank: rank == matrix.nrows(),
    })
}

/// Parameter box for random Jacobian draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankSampling {
    pub rel_tol: f64,
    pub weight_range: (f64, f64),
    pub gaussian_xi_range: (f64, f64),
    pub lognormal_xi_range: (f64, f64),
    pub sigma_range: (f64, f64),
}

impl Default for RankSampling {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_RANK_TOL,
            weight_range: (0.5, 2.0),
            gaussian_xi_range: (-1.0, 1.0),
            lognormal_xi_range: (0.5, 2.0),
            sigma_range: (0.1, 1.0),
        }
    }
}

/// Family whose Jacobian is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankFamily {
    Dirac,
    Gaussian,
    Lognormal,
}

impl std::str::FromStr for RankFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirac" => Ok(RankFamily::Dirac),
            "gaussian" => Ok(RankFamily::Gaussian),
            "lognormal" => Ok(RankFamily::Lognormal),
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFrequency {
    pub k: usize,
    pub rows: usize,
    pub cols: usize,
    pub full_rank_count: usize,
    pub trials: usize,
    pub frequency: f64,
    pub max_rank: usize,
}

/// Empirical `N_A` (Dirac) or `N_A^M` (mixtures).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub family: RankFamily,
    pub m: usize,
    pub n: usize,
    /// Smallest `k` with at least one full-rank draw; `None` means not found up to `max_k`.
    pub estimate: Option<usize>,
    pub max_k: usize,
    /// Dimension-count lower bound `⌈m / p⌉`, `p` the parameters per atom or component.
    pub lower_bound: usize,
    pub per_k: Vec<KFrequency>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn random_matrix(
    basis: &MonomialBasis,
    family: RankFamily,
    smoothed: Option<&SmoothedBasis>,
    k: usize,
    cfg: &RankSampling,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.n();
    match family {
        RankFamily::Dirac => {
            let weights = (0..k).map(|_| draw(&mut rng, cfg.weight_range)).collect();
            let points = (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| draw(&mut rng, cfg.gaussian_xi_range))
                        .collect()
                })
                .collect();
            assemble_ds(basis, &AtomicMeasure::new(weights, points)?)
        }
        RankFamily::Gaussian | RankFamily::Lognormal => {
            let (kind, range) = match family {
                RankFamily::Gaussian => (MixtureKind::Gaussian, cfg.gaussian_xi_range),
                _ => (MixtureKind::Lognormal, cfg.lognormal_xi_range),
            };
            let comps = (0..k)
                .map(|_| {
                    let c = draw(&mut rng, cfg.weight_range);
                    let xi = (0..n).map(|_| draw(&mut rng, range)).collect();
                    let sigma = draw(&mut rng, cfg.sigma_range);
                    Component::new(c, xi, sigma)
                })
                .collect();
            assemble_dt_with(basis, &MixtureMeasure::new(kind, comps)?, smoothed)
        }
    }
}

/// Randomized estimate of the smallest `k` whose Jacobian reaches rank `m`.
///
/// Every `k` in `1..=max_k` gets `trials` independent draws, each seeded by
/// `sub_seed(seed, k · trials + t)`, so the result is independent of thread count.
pub fn estimate_rank_number(
    basis: &MonomialBasis,
    family: RankFamily,
    max_k: usize,
    trials: usize,
    seed: u64,
    cfg: &RankSampling,
) -> Result<RankEstimate> {
    let m = basis.m();
    let n = basis.n();
    let params = match family {
        RankFamily::Dirac => n + 1,
        _ => n + 2,
    };
    if family == RankFamily::Lognormal && n != 1 {
        return Err(Error::UnsupportedBasis("log-normal needs n = 1".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if max_k < ceil_div(m, params) {
        return Err(Error::InvalidInput(format!(
            "max_k = {max_k} is below the dimension bound {}",
            ceil_div(m, params)
        )));
    }
    let smoothed = match family {
        RankFamily::Gaussian => Some(gaussian_smoothed_basis(basis)?),
        _ => None,
    };
    let mut per_k = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        let ranks: Vec<usize> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = sub_seed(seed, (k * trials + t) as u64);
                let mat = random_matrix(basis, family, smoothed.as_ref(), k, cfg, s)?;
                Ok(numeric_rank(&mat, cfg.rel_tol)?.rank)
            })
            .collect::<Result<Vec<_>>>()?;
        let full = ranks.iter().filter(|&&r| r == m).count();
        per_k.push(KFrequency {
            k,
            rows: m,
            cols: k * params,
            full_rank_count: full,
            trials,
            frequency: full as f64 / trials as f64,
            max_rank: ranks.iter().copied().max().unwrap_or(0),
        });
    }
    let estimate = per_k.iter().find(|f| f.full_rank_count > 0).map(|f| f.k);
    let mut warnings = Vec::new();
    if let Some(est) = estimate {
        let f = &per_k[est - 1];
        if f.frequency < 1.0 {
            warnings.push(format!(
                "full rank at k = {est} in only {}/{} draws; generic rank should be attained almost everywhere, check conditioning",
                f.full_rank_count, f.trials
            ));
        }
        for w in per_k.windows(2) {
            if w[0].full_rank_count > 0 && w[1].full_rank_count == 0 {
                warnings.push(format!(
                    "full rank at k = {} but not at k = {}",
                    w[0].k, w[1].k
                ));
            }
        }
    }
    let mut notes = Vec::new();
    if family != RankFamily::Dirac {
        notes.push(format!(
            "mixture lower bounds: ceil(m/(n+1)) = {} counts location and scale coordinates only; \
             ceil(m/(n+2)) = {} also counts the weight of each component; ranks are computed directly",
            ceil_div(m, n + 1),
            ceil_div(m, n + 2)
        ));
    }
    Ok(RankEstimate {
        family,
        m,
        n,
        estimate,
        max_k,
        lower_bound: ceil_div(m, params),
        per_k,
        warnings,
        notes,
    })
}

/// Empirical `N_A` from random Dirac draws.
pub fn estimate_na(
    basis: &MonomialBasis,
    max_k: usize,
    trials: usize,
    seed: u64,
) -> Result<RankEstimate> {
    estimate_rank_number(
        basis,
        RankFamily::Dirac,
        max_k,
        trials,
        seed,
        &RankSampling::default(),
    )
}

/// Empirical `N_A^M` from random mixture draws.
pub fn estimate_nam(
    basis: &MonomialBasis,
    kind: MixtureKind,
    max_k: usize,
    trials: usize,
    seed: u64,
) -> Result<RankEstimate> {
    let family = match kind {
        MixtureKind::Gaussian => RankFamily::Gaussian,
        MixtureKind::Lognormal => RankFamily::Lognormal,
    };
    estimate_rank_number(basis, family, max_k, trials, seed, &RankSampling::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ds_examples() {
        let b = MonomialBasis::full_univariate(1);
        let ds = assemble_ds(&b, &AtomicMeasure::univariate(&[2.0], &[3.0]).unwrap()).unwrap();
        assert_eq!(ds, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 3.0, 2.0]));

        let b = MonomialBasis::full_univariate(2);
        let ds = assemble_ds(&b, &AtomicMeasure::univariate(&[1.0], &[0.0]).unwrap()).unwrap();
        assert_eq!(
            ds,
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        let r = numeric_rank(&ds, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 2);
        assert!(!r.full_rank);
    }

    #[test]
    fn ds_generic_rank_for_cubic() {
        let b = MonomialBasis::full_univariate(3);
        for seed in 0..100 {
            let mat = random_matrix(
                &b,
                RankFamily::Dirac,
                None,
                2,
                &RankSampling::default(),
                seed,
            )
            .unwrap();
            assert_eq!(
                numeric_rank(&mat, DEFAULT_RANK_TOL).unwrap().rank,
                4,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn dt_examples() {
        let b = MonomialBasis::full_univariate(2);
        let g = MixtureMeasure::new(
            MixtureKind::Gaussian,
            vec![Component::univariate(1.0, 0.0, 1.0)],
        )
        .unwrap();
        let dt = assemble_dt(&b, &g).unwrap();
        assert_eq!(dt.shape(), (3, 3));
        assert_eq!(dt.column(2).as_slice(), &[0.0, 0.0, 2.0]);

        let b1 = MonomialBasis::full_univariate(1);
        let ln = MixtureMeasure::new(
            MixtureKind::Lognormal,
            vec![Component::univariate(1.0, 1.0, 1.0)],
        )
        .unwrap();
        let dt = assemble_dt(&b1, &ln).unwrap();
        assert_eq!(dt[(0, 2)], 0.0);
        assert!((dt[(1, 2)] - 0.5f64.exp()).abs() < 1e-15);

        let b0 = MonomialBasis::full_univariate(0);
        for kind in [MixtureKind::Gaussian, MixtureKind::Lognormal] {
            let mu = MixtureMeasure::new(kind, vec![Component::univariate(1.3, 0.8, 0.4)]).unwrap();
            let dt = assemble_dt(&b0, &mu).unwrap();
            assert_eq!(dt, DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]));
            assert_eq!(numeric_rank(&dt, DEFAULT_RANK_TOL).unwrap().rank, 1);
        }
    }

    #[test]
    fn numeric_rank_examples() {
        assert_eq!(
            numeric_rank(&DMatrix::identity(3, 3), 1e-9).unwrap().rank,
            3
        );
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(numeric_rank(&ones, 1e-9).unwrap().rank, 1);
        assert_eq!(
            numeric_rank(&DMatrix::zeros(0, 3), 1e-9),
            Err(Error::EmptyMatrix)
        );
        assert!(numeric_rank(&ones, 1.5).is_err());
    }

    #[test]
    fn na_examples() {
        let est = estimate_na(&MonomialBasis::full_univariate(5), 5, 20, 1).unwrap();
        assert_eq!(est.estimate, Some(3));
        let gap = MonomialBasis::univariate(&[0, 2, 3, 5, 6]).unwrap();
        assert_eq!(estimate_na(&gap, 5, 20, 1).unwrap().estimate, Some(3));
        assert_eq!(
            estimate_na(&MonomialBasis::full_univariate(0), 2, 5, 1)
                .unwrap()
                .estimate,
            Some(1)
        );
        assert!(estimate_na(&MonomialBasis::full_univariate(5), 2, 5, 1).is_err());
    }

    #[test]
    fn nam_examples() {
        let b5 = MonomialBasis::full_univariate(5);
        assert_eq!(
            estimate_nam(&b5, MixtureKind::Gaussian, 4, 20, 3)
                .unwrap()
                .estimate,
            Some(2)
        );
        assert_eq!(
            estimate_nam(&b5, MixtureKind::Lognormal, 4, 20, 3)
                .unwrap()
                .estimate,
            Some(2)
        );
        let b1 = MonomialBasis::full_univariate(1);
        let est = estimate_nam(&b1, MixtureKind::Gaussian, 2, 5, 3).unwrap();
        assert_eq!(est.estimate, Some(1));
        assert!(!est.notes.is_empty());
    }

    #[test]
    fn estimate_reports_not_found() {
        // plane quadrics through two double points are defective: the doubled line
        let b = MonomialBasis::total_degree(2, 2).unwrap();
        let est = estimate_na(&b, 2, 10, 1).unwrap();
        assert_eq!(est.lower_bound, 2);
        assert_eq!(est.estimate, None);
        assert_eq!(estimate_na(&b, 3, 10, 1).unwrap().estimate, Some(3));
        let b9 = MonomialBasis::full_univariate(9);
        assert!(
            estimate_rank_number(&b9, RankFamily::Dirac, 4, 5, 1, &RankSampling::default())
                .is_err()
        );
    }
}
