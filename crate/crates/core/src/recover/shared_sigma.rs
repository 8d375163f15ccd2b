//! Shared-σ recovery: undo the smoothing for a trial σ, then recover atoms by Prony.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::prony::{prony_values, Extension, PronyOptions};
use super::{shared_mixture, RecoveredModel, RecoveryReport, DEFAULT_RESIDUAL_TOL};
use crate::error::{Error, Result};
use crate::jacobian::ceil_div;
use crate::linalg::pinv_solve;
use crate::measures::{MixtureKind, MixtureMeasure};
use crate::moments::{
    deconvolve_gaussian, gaussian_smoothed_basis, lognormal_moment, lognormal_moment_derivatives,
    MomentVector,
};

/// Descending trial values `σ_j = start · ratio^j`, `j < steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigmaSchedule {
    pub start: f64,
    pub ratio: f64,
    pub steps: usize,
    /// Replaces the geometric sequence when non-empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<f64>,
    pub residual_tol: f64,
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            ratio: 0.5,
            steps: 40,
            explicit: Vec::new(),
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

impl SigmaSchedule {
    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            explicit: values,
            ..Self::default()
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let vals: Vec<f64> = if self.explicit.is_empty() {
            if !(self.ratio > 0.0 && self.ratio < 1.0) {
                return Err(Error::Config(format!(
                    "schedule ratio {} not in (0, 1)",
                    self.ratio
                )));
            }
            (0..self.steps)
                .map(|j| self.start * self.ratio.powi(j as i32))
                .collect()
        } else {
            self.explicit.clone()
        };
        if vals.is_empty() || vals.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config(
                "σ schedule must be non-empty and positive".into(),
            ));
        }
        Ok(vals)
    }
}

fn is_zero(s: &MomentVector) -> bool {
    s.values().iter().all(|&v| v == 0.0)
}

/// Tries `k = k_max, k_max − 1, …` and moves to the next `k` only on rank deficiency.
fn prony_descending(values: &[f64], k_max: usize, opts: &PronyOptions) -> Result<Vec<(f64, f64)>> {
    let mut last = Error::RankDeficient { k: k_max };
    for k in (1..=k_max).rev() {
        match prony_values(values, k, opts) {
            Ok(atoms) => return Ok(atoms),
            Err(e @ Error::RankDeficient { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Prony output within this residual is polished before the final check.
const POLISH_WINDOW: f64 = 1e-3;

/// Minimum-norm Newton refinement of weights and locations at fixed σ against the original moments.
///
/// Prony on a nearly singular Hankel matrix loses digits; this recovers them.
fn polish(
    s: &MomentVector,
    kind: MixtureKind,
    sigma: f64,
    w: &[f64],
    x: &[f64],
    tol: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let basis = s.basis();
    let degrees = basis.univariate_degrees()?;
    let smoothed = match kind {
        MixtureKind::Gaussian => Some(gaussian_smoothed_basis(basis).ok()?),
        MixtureKind::Lognormal => None,
    };
    let target = DVector::from_column_slice(s.values());
    let scale = 1.0 + target.amax();
    let k = w.len();
    // value and ∂ξ of one component
    let column = |xi: f64| -> Option<(DVector<f64>, DVector<f64>)> {
        match &smoothed {
            Some(sb) => Some((
                sb.eval(&[xi], sigma).ok()?,
                sb.eval_dx(&[xi], sigma).ok()?.column(0).into_owned(),
            )),
            None => {
                if !(xi > 0.0) {
                    return None;
                }
                let mut v = DVector::zeros(degrees.len());
                let mut dv = DVector::zeros(degrees.len());
                for (row, &d) in degrees.iter().enumerate() {
                    v[row] = lognormal_moment(d, xi, sigma).ok()?;
                    dv[row] = lognormal_moment_derivatives(d, xi, sigma).ok()?.0;
                }
                Some((v, dv))
            }
        }
    };
    let residual = |p: &DVector<f64>| -> Option<DVector<f64>> {
        let mut r = -&target;
        for i in 0..k {
            r += column(p[2 * i + 1])?.0 * p[2 * i];
        }
        Some(r / scale)
    };
    let jacobian = |p: &DVector<f64>| -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(target.len(), 2 * k);
        for i in 0..k {
            let (v, dv) = column(p[2 * i + 1])?;
            j.set_column(2 * i, &(v / scale));
            j.set_column(2 * i + 1, &(dv * (p[2 * i] / scale)));
        }
        Some(j)
    };
    let mut p = DVector::from_iterator(2 * k, w.iter().zip(x).flat_map(|(&c, &xi)| [c, xi]));
    let mut r = residual(&p)?;
    for _ in 0..30 {
        if r.amax() <= 0.1 * tol {
            break;
        }
        let step = pinv_solve(&jacobian(&p)?, &(-&r), 1e-13)?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial = &p + &step * t;
            let feasible = (0..k).all(|i| trial[2 * i] >= 0.0);
            if let Some(rt) = feasible.then(|| residual(&trial)).flatten() {
                if rt.amax() < r.amax() {
                    p = trial;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let (mut wo, mut xo) = (Vec::with_capacity(k), Vec::with_capacity(k));
    for i in 0..k {
        if p[2 * i] > 0.0 {
            wo.push(p[2 * i]);
            xo.push(p[2 * i + 1]);
        }
    }
    Some((wo, xo))
}

/// Builds the report for one σ, polishing when the Prony residual falls short.
fn shared_report(
    engine: &str,
    s: &MomentVector,
    kind: MixtureKind,
    sigma: f64,
    w: Vec<f64>,
    x: Vec<f64>,
    tol: f64,
) -> Result<RecoveryReport> {
    let build = |w: &[f64], x: &[f64]| -> Result<RecoveryReport> {
        let xs: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        let mix = shared_mixture(kind, w, &xs, sigma)?;
        RecoveryReport::from_model(engine, s, RecoveredModel::Mixture(mix), tol)
    };
    let report = build(&w, &x)?;
    if report.success || !(report.residual < POLISH_WINDOW) {
        return Ok(report);
    }
    match polish(s, kind, sigma, &w, &x, tol) {
        Some((pw, px)) if !pw.is_empty() => match build(&pw, &px) {
            Ok(polished) if polished.residual < report.residual => Ok(polished),
            _ => Ok(report),
        },
        _ => Ok(report),
    }
}

/// Recovers a shared-σ Gaussian mixture with at most `⌈(d+1)/2⌉` components from `s` over `{1, x, …, x^d}`.
pub fn recover_shared_sigma_gaussian(
    s: &MomentVector,
    schedule: &SigmaSchedule,
) -> Result<RecoveryReport> {
    const ENGINE: &str = "shared-sigma-gaussian";
    let tol = schedule.residual_tol;
    if !s.basis().is_gap_free_univariate() {
        return Err(Error::UnsupportedBasis(
            "shared-σ Gaussian recovery needs {1, x, …, x^d}".into(),
        ));
    }
    let d = s.basis().m() - 1;
    if d < 1 {
        return Err(Error::InsufficientMoments("need d ≥ 1".into()));
    }
    if is_zero(s) {
        return RecoveryReport::from_model(
            ENGINE,
            s,
            RecoveredModel::Mixture(MixtureMeasure::empty(MixtureKind::Gaussian)),
            tol,
        );
    }
    let sigmas = schedule.values()?;
    let k_max = ceil_div(d + 1, 2);
    let opts = PronyOptions {
        extension: Extension::Real,
        residual_tol: POLISH_WINDOW.max(tol),
        ..PronyOptions::default()
    };
    let mut last_reason = String::from("empty schedule");
    for (step, &sigma) in sigmas.iter().enumerate() {
        let u = deconvolve_gaussian(s, sigma)?;
        let atoms = match prony_descending(&u, k_max, &opts) {
            Ok(a) => a,
            Err(e) => {
                last_reason = format!("σ = {sigma:e}: {e}");
                continue;
            }
        };
        let (w, x): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        let mut report = shared_report(ENGINE, s, MixtureKind::Gaussian, sigma, w, x, tol)?;
        report.sigma_used = Some(sigma);
        report.sigma_steps = step + 1;
        if report.success {
            return Ok(report);
        }
        last_reason = format!("σ = {sigma:e}: residual {:e}", report.residual);
    }
    let mut report = RecoveryReport::failure(
        ENGINE,
        tol,
        format!("schedule exhausted; last attempt {last_reason}"),
    );
    report.sigma_steps = sigmas.len();
    Ok(report)
}

/// Recovers a shared-σ log-normal mixture with at most `⌈m/2⌉` components from `s` over consecutive exponents.
pub fn recover_shared_sigma_lognormal(
    s: &MomentVector,
    schedule: &SigmaSchedule,
) -> Result<RecoveryReport> {
    const ENGINE: &str = "shared-sigma-lognormal";
    let tol = schedule.residual_tol;
    if !s.basis().is_consecutive_univariate() {
        return Err(Error::UnsupportedBasis(
            "log-normal recovery needs consecutive exponents {x^d1, …, x^(d1+m-1)}".into(),
        ));
    }
    if let Some((i, &v)) = s.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::Infeasible(format!(
            "moment {i} is {v}; measures on (0, ∞) have positive moments"
        )));
    }
    let degrees = s.basis().univariate_degrees().expect("univariate");
    let d1 = degrees[0];
    let m = degrees.len();
    let sigmas = schedule.values()?;
    let k_max = ceil_div(m, 2);
    let opts = PronyOptions {
        extension: Extension::Positive,
        residual_tol: POLISH_WINDOW.max(tol),
        ..PronyOptions::default()
    };
    let mut last_reason = String::from("empty schedule");
    for (step, &sigma) in sigmas.iter().enumerate() {
        let u: Vec<f64> = degrees
            .iter()
            .zip(s.values())
            .map(|(&d, &v)| {
                let fd = f64::from(d);
                v * (-0.5 * fd * fd * sigma * sigma).exp()
            })
            .collect();
        let atoms = match prony_descending(&u, k_max, &opts) {
            Ok(a) => a,
            Err(e) => {
                last_reason = format!("σ = {sigma:e}: {e}");
                continue;
            }
        };
        if atoms.iter().any(|&(_, x)| !(x > 0.0)) {
            last_reason = format!("σ = {sigma:e}: nonpositive atom");
            continue;
        }
        let w: Vec<f64> = atoms.iter().map(|&(c, x)| c / x.powi(d1 as i32)).collect();
        let x: Vec<f64> = atoms.iter().map(|&(_, x)| x).collect();
        if w.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            last_reason = format!("σ = {sigma:e}: non-finite weight");
            continue;
        }
        let mut report = shared_report(ENGINE, s, MixtureKind::Lognormal, sigma, w, x, tol)?;
        report.sigma_used = Some(sigma);
        report.sigma_steps = step + 1;
        if report.success {
            return Ok(report);
        }
        last_reason = format!("σ = {sigma:e}: residual {:e}", report.residual);
    }
    let mut report = RecoveryReport::failure(
        ENGINE,
        tol,
        format!("schedule exhausted; last attempt {last_reason}"),
    );
    report.sigma_steps = sigmas.len();
    Ok(report)
}
