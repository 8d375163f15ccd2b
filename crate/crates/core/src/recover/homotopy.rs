//! σ-continuation from a full-rank Dirac representation to a shared-σ Gaussian mixture.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lm::levenberg_marquardt;
use super::{
    mass_estimate, moment_scale, shared_mixture, RecoveredModel, RecoveryReport,
    DEFAULT_RESIDUAL_TOL,
};
use crate::error::{Error, Result};
use crate::jacobian::{numeric_rank, DEFAULT_RANK_TOL};
use crate::linalg::pinv_solve;
use crate::measures::{AtomicMeasure, MixtureKind};
use crate::moments::{gaussian_smoothed_basis, MomentVector, SmoothedBasis};
use crate::seed::sub_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomotopyConfig {
    pub starts: usize,
    pub seed: u64,
    pub stage1_max_iter: usize,
    /// Relative residual a Dirac start must reach.
    pub stage1_tol: f64,
    pub rank_tol: f64,
    pub sigma_target: f64,
    pub sigma_min: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_newton: usize,
    /// Relative residual the corrector must reach for a step to be accepted.
    pub corrector_tol: f64,
    pub residual_tol: f64,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self {
            starts: 32,
            seed: 0,
            stage1_max_iter: 400,
            stage1_tol: 1e-11,
            rank_tol: DEFAULT_RANK_TOL,
            sigma_target: 0.1,
            sigma_min: 1e-4,
            initial_step: 0.005,
            min_step: 1e-8,
            max_newton: 12,
            corrector_tol: 1e-11,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

/// `θ = (c_1, x_1, …, c_k, x_k)` with `x_i ∈ R^n`.
struct State<'a> {
    sb: &'a SmoothedBasis,
    k: usize,
    n: usize,
    target: DVector<f64>,
    scale: f64,
}

impl State<'_> {
    fn split<'t>(&self, theta: &'t DVector<f64>, i: usize) -> (f64, &'t [f64]) {
        let base = i * (self.n + 1);
        (theta[base], &theta.as_slice()[base + 1..base + 1 + self.n])
    }

    fn residual(&self, theta: &DVector<f64>, sigma: f64) -> Option<DVector<f64>> {
        let mut out = -&self.target;
        for i in 0..self.k {
            let (c, x) = self.split(theta, i);
            out += self.sb.eval(x, sigma).ok()? * c;
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }

    /// `∂F/∂θ` at fixed σ; at σ = 0 this is `DS_{k,A}`.
    fn jacobian(&self, theta: &DVector<f64>, sigma: f64) -> Option<DMatrix<f64>> {
        let m = self.target.len();
        let mut jac = DMatrix::zeros(m, self.k * (self.n + 1));
        for i in 0..self.k {
            let (c, x) = self.split(theta, i);
            let base = i * (self.n + 1);
            jac.set_column(base, &self.sb.eval(x, sigma).ok()?);
            let dx = self.sb.eval_dx(x, sigma).ok()?;
            for j in 0..self.n {
                jac.set_column(base + 1 + j, &(dx.column(j) * c));
            }
        }
        jac.iter().all(|v| v.is_finite()).then_some(jac)
    }

    fn dsigma(&self, theta: &DVector<f64>, sigma: f64) -> Option<DVector<f64>> {
        let mut out = DVector::zeros(self.target.len());
        for i in 0..self.k {
            let (c, x) = self.split(theta, i);
            out += self.sb.eval_dsigma(x, sigma).ok()? * c;
        }
        Some(out)
    }

    fn rel(&self, r: &DVector<f64>) -> f64 {
        r.amax() / self.scale
    }

    fn weights_positive(&self, theta: &DVector<f64>) -> bool {
        (0..self.k).all(|i| self.split(theta, i).0 > 0.0)
    }

    fn atoms(&self, theta: &DVector<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        (0..self.k)
            .map(|i| {
                let (c, x) = self.split(theta, i);
                (c, x.to_vec())
            })
            .unzip()
    }
}

/// Newton with minimum-norm steps at fixed σ.
fn correct(
    st: &State,
    mut theta: DVector<f64>,
    sigma: f64,
    cfg: &HomotopyConfig,
) -> Option<(DVector<f64>, usize)> {
    let mut r = st.residual(&theta, sigma)?;
    for it in 0..=cfg.max_newton {
        if st.rel(&r) <= cfg.corrector_tol {
            return st.weights_positive(&theta).then_some((theta, it));
        }
        if it == cfg.max_newton {
            break;
        }
        let jac = st.jacobian(&theta, sigma)?;
        let step = pinv_solve(&jac, &r, 1e-13)?;
        theta -= step;
        let next = st.residual(&theta, sigma)?;
        if it > 1 && next.amax() > r.amax() {
            return None;
        }
        r = next;
    }
    None
}

/// Recovers a shared-σ Gaussian mixture with `k` components by continuation from `σ = 0`.
pub fn homotopy_gap_recovery(
    s: &MomentVector,
    k: usize,
    cfg: &HomotopyConfig,
) -> Result<RecoveryReport> {
    const ENGINE: &str = "homotopy";
    let basis = s.basis();
    let (m, n) = (basis.m(), basis.n());
    if k == 0 || k * (n + 1) < m {
        return Err(Error::InvalidInput(format!(
            "{k} atoms give {} parameters, fewer than {m} moments",
            k * (n + 1)
        )));
    }
    if cfg.starts == 0 {
        return Err(Error::Config("at least one start is required".into()));
    }
    if !(cfg.sigma_target > 0.0
        && cfg.sigma_min > 0.0
        && cfg.min_step > 0.0
        && cfg.initial_step > 0.0)
    {
        return Err(Error::Config(
            "σ target, minimum and steps must be positive".into(),
        ));
    }
    let sb = gaussian_smoothed_basis(basis)?;
    let st = State {
        sb: &sb,
        k,
        n,
        target: s.as_dvector(),
        scale: 1.0 + s.norm_inf(),
    };
    let mass = mass_estimate(s);
    let box_half = 1.5 * moment_scale(s);
    let floor = 1e-12 * mass;

    // stage 1: Dirac representation with full-rank DS
    let mut start_theta = None;
    let mut singular = 0usize;
    let mut iterations = 0usize;
    for start in 0..cfg.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, start as u64));
        let mut theta0 = DVector::zeros(k * (n + 1));
        for i in 0..k {
            theta0[i * (n + 1)] = mass / k as f64;
            for j in 0..n {
                theta0[i * (n + 1) + 1 + j] = rng.random_range(-box_half..box_half);
            }
        }
        let Some(out) = levenberg_marquardt(
            |t: &DVector<f64>| st.residual(t, 0.0).map(|r| r / st.scale),
            |t: &DVector<f64>| st.jacobian(t, 0.0).map(|j| j / st.scale),
            |t: &mut DVector<f64>| {
                for i in 0..k {
                    let c = &mut t[i * (n + 1)];
                    *c = c.max(floor);
                }
            },
            theta0,
            cfg.stage1_max_iter,
            0.1 * cfg.stage1_tol,
        ) else {
            continue;
        };
        iterations += out.iterations;
        if out.residual > cfg.stage1_tol {
            continue;
        }
        let jac = st
            .jacobian(&out.x, 0.0)
            .ok_or_else(|| Error::Conditioning("non-finite Jacobian".into()))?;
        if numeric_rank(&jac, cfg.rank_tol)?.full_rank {
            start_theta = Some(out.x);
            break;
        }
        singular += 1;
    }
    let Some(mut theta) = start_theta else {
        return Err(if singular > 0 {
            Error::SingularStart(format!(
                "{singular} converged Dirac starts all have rank-deficient DS"
            ))
        } else {
            Error::NoDiracRepresentation(format!(
                "no {k}-atom representation found from {} starts",
                cfg.starts
            ))
        });
    };

    // stage 3: predictor-corrector in σ
    let mut sigma = 0.0;
    let mut h = cfg.initial_step.min(cfg.sigma_target);
    let max_step = (cfg.sigma_target / 4.0).max(cfg.initial_step);
    let mut steps = 0usize;
    let mut stall = None;
    while sigma < cfg.sigma_target {
        let next = (sigma + h).min(cfg.sigma_target);
        let predicted = st
            .jacobian(&theta, sigma)
            .zip(st.dsigma(&theta, sigma))
            .and_then(|(j, ds)| pinv_solve(&j, &ds, 1e-13))
            .map(|tangent| &theta - tangent * (next - sigma));
        match predicted.and_then(|p| correct(&st, p, next, cfg)) {
            Some((corrected, its)) => {
                theta = corrected;
                sigma = next;
                steps += 1;
                iterations += its;
                if its <= 4 {
                    h = (h * 1.5).min(max_step);
                }
            }
            None => {
                h *= 0.5;
                if h < cfg.min_step {
                    stall = Some(format!("corrector stalled at σ = {sigma:e}"));
                    break;
                }
            }
        }
    }

    if !(sigma > 0.0) {
        let mut r = RecoveryReport::failure(
            ENGINE,
            cfg.residual_tol,
            stall.unwrap_or_else(|| "no σ-step accepted".into()),
        );
        r.iterations = iterations;
        r.model = Some(RecoveredModel::Atomic({
            let (w, x) = st.atoms(&theta);
            AtomicMeasure::new(w, x)?
        }));
        r.k = k;
        r.residual = st
            .residual(&theta, 0.0)
            .map_or(f64::INFINITY, |v| st.rel(&v));
        return Ok(r);
    }
    let (w, x) = st.atoms(&theta);
    let mix = shared_mixture(MixtureKind::Gaussian, &w, &x, sigma)?;
    let mut report =
        RecoveryReport::from_model(ENGINE, s, RecoveredModel::Mixture(mix), cfg.residual_tol)?;
    report.sigma_used = Some(sigma);
    report.sigma_steps = steps;
    report.iterations = iterations;
    if sigma < cfg.sigma_min {
        report.success = false;
        report.failure_reason = Some(format!(
            "reached σ = {sigma:e}, below the minimum {:e}",
            cfg.sigma_min
        ));
    } else if let Some(note) = stall {
        report.warnings.push(note);
    }
    Ok(report)
}
