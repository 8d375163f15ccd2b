//! Levenberg–Marquardt least squares and the moment-matching fit built on it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mass_estimate, moment_scale, RecoveredModel, RecoveryReport, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::jacobian::assemble_dt_with;
use crate::linalg::lstsq;
use crate::measures::{Component, MixtureKind, MixtureMeasure};
use crate::moments::{component_moments, gaussian_smoothed_basis, MomentVector, SmoothedBasis};
use crate::seed::sub_seed;

pub(crate) struct LmOutcome {
    pub x: DVector<f64>,
    /// `‖r(x)‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

/// Minimizes `‖r(x)‖₂` from `x0`; stops once `‖r‖_∞ ≤ target` or no step decreases the cost.
pub(crate) fn levenberg_marquardt<R, J, P>(
    residual: R,
    jacobian: J,
    project: P,
    x0: DVector<f64>,
    max_iter: usize,
    target: f64,
) -> Option<LmOutcome>
where
    R: Fn(&DVector<f64>) -> Option<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Option<DMatrix<f64>>,
    P: Fn(&mut DVector<f64>),
{
    let mut x = x0;
    project(&mut x);
    let mut r = residual(&x)?;
    let mut cost = r.norm_squared();
    let mut lambda: Option<f64> = None;
    let mut iterations = 0;
    while iterations < max_iter && r.amax() > target {
        iterations += 1;
        let jac = jacobian(&x)?;
        let p = jac.ncols();
        let diag: Vec<f64> = (0..p).map(|j| jac.column(j).norm_squared()).collect();
        let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
        if !(dmax > 0.0) || !dmax.is_finite() {
            return None;
        }
        let lam = lambda.get_or_insert(1e-3);
        let mut accepted = false;
        for _ in 0..30 {
            // augmented system [J; √λ D] δ = [−r; 0]
            let rows = jac.nrows() + p;
            let mut a = DMatrix::zeros(rows, p);
            a.view_mut((0, 0), (jac.nrows(), p)).copy_from(&jac);
            for j in 0..p {
                a[(jac.nrows() + j, j)] = (*lam * diag[j].max(1e-12 * dmax)).sqrt();
            }
            let mut b = DVector::zeros(rows);
            b.rows_mut(0, jac.nrows()).copy_from(&(-&r));
            let Some((delta, _)) = lstsq(&a, &b) else {
                *lam *= 10.0;
                continue;
            };
            let mut trial = &x + &delta;
            project(&mut trial);
            if let Some(rt) = residual(&trial) {
                let ct = rt.norm_squared();
                if ct.is_finite() && ct < cost {
                    x = trial;
                    r = rt;
                    cost = ct;
                    *lam = (*lam / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            *lam *= 4.0;
            if *lam > 1e16 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    Some(LmOutcome {
        residual: r.amax(),
        x,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub starts: usize,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            starts: 32,
            max_iter: 500,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            seed: 0,
        }
    }
}

/// Parameter layout: per component `ln c, ξ (ln ξ for log-normal), [ln σ]`, then a shared `ln σ` if not free.
struct Layout {
    kind: MixtureKind,
    k: usize,
    n: usize,
    free_sigma: bool,
}

impl Layout {
    fn per(&self) -> usize {
        1 + self.n + usize::from(self.free_sigma)
    }

    fn len(&self) -> usize {
        self.k * self.per() + usize::from(!self.free_sigma)
    }

    fn sigma_index(&self, comp: usize) -> usize {
        if self.free_sigma {
            comp * self.per() + 1 + self.n
        } else {
            self.k * self.per()
        }
    }

    fn components(&self, theta: &DVector<f64>) -> Option<Vec<Component>> {
        let mut comps = Vec::with_capacity(self.k);
        for i in 0..self.k {
            let base = i * self.per();
            let c = theta[base].exp();
            let xi: Vec<f64> = (0..self.n)
                .map(|j| match self.kind {
                    MixtureKind::Gaussian => theta[base + 1 + j],
                    MixtureKind::Lognormal => theta[base + 1 + j].exp(),
                })
                .collect();
            let sigma = theta[self.sigma_index(i)].exp();
            if !(c.is_finite() && c > 0.0 && sigma.is_finite() && sigma > 0.0)
                || xi
                    .iter()
                    .any(|v| !v.is_finite() || (self.kind == MixtureKind::Lognormal && *v <= 0.0))
            {
                return None;
            }
            comps.push(Component::new(c, xi, sigma));
        }
        Some(comps)
    }

    fn encode(&self, comps: &[Component]) -> DVector<f64> {
        let mut theta = DVector::zeros(self.len());
        for (i, comp) in comps.iter().enumerate() {
            let base = i * self.per();
            theta[base] = comp.c.ln();
            for j in 0..self.n {
                theta[base + 1 + j] = match self.kind {
                    MixtureKind::Gaussian => comp.xi[j],
                    MixtureKind::Lognormal => comp.xi[j].ln(),
                };
            }
            theta[self.sigma_index(i)] = comp.sigma.ln();
        }
        theta
    }
}

/// Fits a `k`-component mixture to `s` by multistart Levenberg–Marquardt.
///
/// Residual entries are weighted by `1 / (1 + |s_i|)`; success is judged on
/// the unweighted relative residual.
pub fn lm_fit(
    s: &MomentVector,
    kind: MixtureKind,
    k: usize,
    free_sigma: bool,
    cfg: &LmConfig,
) -> Result<RecoveryReport> {
    const ENGINE: &str = "lm";
    let basis = s.basis();
    if k == 0 {
        return Err(Error::InvalidInput(
            "component count must be at least 1".into(),
        ));
    }
    if kind == MixtureKind::Lognormal && basis.n() != 1 {
        return Err(Error::UnsupportedBasis("log-normal fits need n = 1".into()));
    }
    if cfg.starts == 0 {
        return Err(Error::Config("at least one start is required".into()));
    }
    let layout = Layout {
        kind,
        k,
        n: basis.n(),
        free_sigma,
    };
    let mut warnings = Vec::new();
    if layout.len() > basis.m() {
        warnings.push(format!(
            "{} parameters exceed {} moments; the fit is underdetermined",
            layout.len(),
            basis.m()
        ));
    }
    let smoothed: Option<SmoothedBasis> = match kind {
        MixtureKind::Gaussian => Some(gaussian_smoothed_basis(basis)?),
        MixtureKind::Lognormal => None,
    };
    let target = s.as_dvector();
    let weights =
        DVector::from_iterator(basis.m(), s.values().iter().map(|v| 1.0 / (1.0 + v.abs())));

    let residual = |theta: &DVector<f64>| -> Option<DVector<f64>> {
        let comps = layout.components(theta)?;
        let mut model = DVector::zeros(basis.m());
        for comp in &comps {
            model += component_moments(basis, kind, smoothed.as_ref(), &comp.xi, comp.sigma)
                .ok()?
                * comp.c;
        }
        let r = (model - &target).component_mul(&weights);
        r.iter().all(|v| v.is_finite()).then_some(r)
    };
    let jacobian = |theta: &DVector<f64>| -> Option<DMatrix<f64>> {
        let comps = layout.components(theta)?;
        let mix = MixtureMeasure::new(kind, comps.clone()).ok()?;
        let dt = assemble_dt_with(basis, &mix, smoothed.as_ref()).ok()?;
        let n = layout.n;
        let mut jac = DMatrix::zeros(basis.m(), layout.len());
        for (i, comp) in comps.iter().enumerate() {
            let col = i * (n + 2);
            let base = i * layout.per();
            jac.set_column(base, &(dt.column(col) * comp.c));
            for j in 0..n {
                let scale = match kind {
                    MixtureKind::Gaussian => 1.0,
                    MixtureKind::Lognormal => comp.xi[j],
                };
                jac.set_column(base + 1 + j, &(dt.column(col + 1 + j) * scale));
            }
            let si = layout.sigma_index(i);
            let ds = dt.column(col + 1 + n) * comp.sigma;
            let updated = jac.column(si) + ds;
            jac.set_column(si, &updated);
        }
        for r in 0..basis.m() {
            let w = weights[r];
            jac.row_mut(r).scale_mut(w);
        }
        jac.iter().all(|v| v.is_finite()).then_some(jac)
    };

    let mass = mass_estimate(s);
    let scale = moment_scale(s);
    let mut best: Option<(f64, Vec<Component>, usize)> = None;
    let mut total_iters = 0;
    for start in 0..cfg.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, start as u64));
        let sigma_scale = match kind {
            MixtureKind::Gaussian => scale,
            MixtureKind::Lognormal => 1.0,
        };
        let shared_sigma = sigma_scale * rng.random_range(0.05..0.6);
        let comps: Vec<Component> = (0..k)
            .map(|_| {
                let xi: Vec<f64> = (0..layout.n)
                    .map(|_| match kind {
                        MixtureKind::Gaussian => rng.random_range(-scale..scale),
                        MixtureKind::Lognormal => (scale.ln() + rng.random_range(-1.5..0.3)).exp(),
                    })
                    .collect();
                let sigma = if free_sigma {
                    sigma_scale * rng.random_range(0.05..0.6)
                } else {
                    shared_sigma
                };
                Component::new(mass / k as f64, xi, sigma)
            })
            .collect();
        let theta0 = layout.encode(&comps);
        let Some(out) = levenberg_marquardt(
            residual,
            jacobian,
            |_| {},
            theta0,
            cfg.max_iter,
            1e-3 * cfg.residual_tol,
        ) else {
            continue;
        };
        total_iters += out.iterations;
        let Some(found) = layout.components(&out.x) else {
            continue;
        };
        let Ok(mix) = MixtureMeasure::new(kind, found.clone()) else {
            continue;
        };
        let Ok(model) = RecoveredModel::Mixture(mix).moments(basis) else {
            continue;
        };
        let rel = model.relative_residual(s.values());
        if best.as_ref().is_none_or(|b| rel < b.0) {
            best = Some((rel, found, start));
        }
        if rel <= cfg.residual_tol {
            break;
        }
    }

    let Some((_, comps, _)) = best else {
        let mut r =
            RecoveryReport::failure(ENGINE, cfg.residual_tol, "every start failed to evaluate");
        r.iterations = total_iters;
        r.warnings = warnings;
        return Ok(r);
    };
    let mix = MixtureMeasure::new(kind, comps)?;
    let mut report =
        RecoveryReport::from_model(ENGINE, s, RecoveredModel::Mixture(mix), cfg.residual_tol)?;
    report.iterations = total_iters;
    report.warnings = warnings;
    if !free_sigma {
        report.sigma_used = report
            .mixture()
            .and_then(|m| m.components().first())
            .map(|c| c.sigma);
    }
    if !report.success {
        report.failure_reason = Some(format!(
            "all {} starts stalled; best residual {:e}",
            cfg.starts, report.residual
        ));
    }
    Ok(report)
}
