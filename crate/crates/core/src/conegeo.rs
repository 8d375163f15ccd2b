//! Moment-cone geometry for univariate bases `{1, x, …, x^d}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::linalg::min_symmetric_eigenvalue;
use crate::measures::{Component, MixtureKind, MixtureMeasure};
use crate::moments::{component_moments, gaussian_smoothed_basis, mixture_moments, MomentVector};
use crate::recover::{recover, RecoveryConfig, RecoveryReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeStatus {
    Interior,
    Boundary,
    Exterior,
}

impl std::fmt::Display for ConeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConeStatus::Interior => "interior",
            ConeStatus::Boundary => "boundary",
            ConeStatus::Exterior => "exterior",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeClassification {
    pub status: ConeStatus,
    /// Smallest eigenvalue over the Hankel matrices tested.
    pub margin: f64,
    pub tol: f64,
}

fn classify_margin(margin: f64, tol: f64) -> ConeClassification {
    let status = if margin > tol {
        ConeStatus::Interior
    } else if margin < -tol {
        ConeStatus::Exterior
    } else {
        ConeStatus::Boundary
    };
    ConeClassification {
        status,
        margin,
        tol,
    }
}

fn hankel(s: &[f64], size: usize, offset: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| s[i + j + offset])
}

fn require_gap_free(s: &MomentVector) -> Result<()> {
    if s.basis().is_gap_free_univariate() {
        Ok(())
    } else {
        Err(Error::UnsupportedBasis(
            "cone classification needs {1, x, …, x^d}".into(),
        ))
    }
}

/// Membership in the moment cone of the real line via `H = (s_{i+j})_{i,j ≤ ⌊d/2⌋}`.
pub fn hankel_classify(s: &MomentVector) -> Result<ConeClassification> {
    require_gap_free(s)?;
    let v = s.values();
    let d = v.len() - 1;
    let tol = 1e-10 * (1.0 + s.norm_inf());
    let margin = min_symmetric_eigenvalue(&hankel(v, d / 2 + 1, 0));
    Ok(classify_margin(margin, tol))
}

/// Membership in the moment cone of `[0, ∞)`: both `(s_{i+j})` and `(s_{i+j+1})` must be positive.
pub fn stieltjes_classify(s: &MomentVector) -> Result<ConeClassification> {
    require_gap_free(s)?;
    let v = s.values();
    let d = v.len() - 1;
    let tol = 1e-10 * (1.0 + s.norm_inf());
    let mut margin = min_symmetric_eigenvalue(&hankel(v, d / 2 + 1, 0));
    if d >= 1 {
        margin = margin.min(min_symmetric_eigenvalue(&hankel(v, (d - 1) / 2 + 1, 1)));
    }
    Ok(classify_margin(margin, tol))
}

/// Unit vector `e_1`: the moment vector of an atom at the origin in the homogenized system.
pub fn origin_direction(basis: &MonomialBasis) -> Result<MomentVector> {
    let mut v = vec![0.0; basis.m()];
    v[0] = 1.0;
    MomentVector::external(basis.clone(), v)
}

/// Unit vector `e_m`: the direction of an atom at infinity.
pub fn infinity_direction(basis: &MonomialBasis) -> Result<MomentVector> {
    let mut v = vec![0.0; basis.m()];
    v[basis.m() - 1] = 1.0;
    MomentVector::external(basis.clone(), v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StripConfig {
    /// Absolute width the bisection bracket is reduced to.
    pub tol: f64,
    /// The search gives up beyond `cap_factor · max(‖s‖_∞, 1) / ‖v‖_∞`.
    pub cap_factor: f64,
}

impl Default for StripConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            cap_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripResult {
    pub c: f64,
    pub remainder: MomentVector,
    pub bisection_steps: usize,
}

/// `sup {c ≥ 0 : s − c·v ∈ S}` by bracketing and bisection against `oracle`.
///
/// Boundary answers count as members, so `c` is the last value at which the
/// oracle did not report an exterior point.
pub fn strip_mass<F>(
    s: &MomentVector,
    v: &MomentVector,
    oracle: F,
    cfg: &StripConfig,
) -> Result<StripResult>
where
    F: Fn(&MomentVector) -> Result<ConeStatus>,
{
    if s.basis() != v.basis() {
        return Err(Error::InvalidInput("s and v must share a basis".into()));
    }
    let vnorm = v.norm_inf();
    if !(vnorm > 0.0) {
        return Err(Error::InvalidInput("direction v is zero".into()));
    }
    let shifted = |c: f64| -> Result<MomentVector> {
        s.with_values(
            s.values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| a - c * b)
                .collect(),
        )
    };
    let inside = |c: f64| -> Result<bool> { Ok(oracle(&shifted(c)?)? != ConeStatus::Exterior) };
    if !inside(0.0)? {
        return Err(Error::NotInterior("s is outside the cone".into()));
    }
    let cap = cfg.cap_factor * s.norm_inf().max(1.0) / vnorm;
    let mut lo = 0.0;
    let mut hi = (s.norm_inf().max(1.0) / vnorm).min(cap);
    while inside(hi)? {
        lo = hi;
        if hi >= cap {
            return Err(Error::UnboundedStrip(format!(
                "s − c·v stays in the cone up to the cap c = {cap:e}"
            )));
        }
        hi = (2.0 * hi).min(cap);
    }
    let mut steps = 0;
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(StripResult {
        c: lo,
        remainder: shifted(lo)?,
        bisection_steps: steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescribedRepresentation {
    pub mixture: MixtureMeasure,
    pub epsilon: f64,
    /// Relative residual of the full mixture against `s`.
    pub residual: f64,
    pub halvings: usize,
    pub remainder: RecoveryReport,
}

/// A representation of `s` that contains the component `(ε, x0, σ0)` for some `ε > 0`.
///
/// Starting from `ε = s_0 / 2`, `ε` is halved until the remainder
/// `s − ε t_A(x0, σ0)` is recovered by the configured engine.
pub fn represent_with_prescribed_component(
    s: &MomentVector,
    x0: &[f64],
    sigma0: f64,
    engine: &RecoveryConfig,
) -> Result<PrescribedRepresentation> {
    let basis = s.basis();
    let kind = engine.kind;
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::Domain(format!(
            "prescribed σ0 = {sigma0} must be positive"
        )));
    }
    if kind == MixtureKind::Lognormal && !(x0.len() == 1 && x0[0] > 0.0) {
        return Err(Error::Domain(
            "a log-normal location must be positive".into(),
        ));
    }
    if basis.is_gap_free_univariate() {
        let class = match kind {
            MixtureKind::Gaussian => hankel_classify(s)?,
            MixtureKind::Lognormal => stieltjes_classify(s)?,
        };
        if class.status != ConeStatus::Interior {
            return Err(Error::NotInterior(format!(
                "s is {} (margin {:e}, tol {:e}); a prescription needs interior slack",
                class.status, class.margin, class.tol
            )));
        }
    }
    let mass = basis
        .constant_index()
        .map(|i| s.values()[i])
        .ok_or_else(|| {
            Error::UnsupportedBasis("prescription needs the constant monomial".into())
        })?;
    if !(mass > 0.0) {
        return Err(Error::NotInterior(format!("mass {mass} is not positive")));
    }
    let smoothed = match kind {
        MixtureKind::Gaussian => Some(gaussian_smoothed_basis(basis)?),
        MixtureKind::Lognormal => None,
    };
    let t = component_moments(basis, kind, smoothed.as_ref(), x0, sigma0)?;
    let tol = 1e-8;

    let mut eps = 0.5 * mass;
    let mut halvings = 0;
    let mut last = String::from("no attempt");
    while eps >= 1e-12 * mass {
        let rest = s.with_values(
            s.values()
                .iter()
                .zip(t.iter())
                .map(|(a, b)| a - eps * b)
                .collect(),
        )?;
        match recover(&rest, engine) {
            Ok(report) if report.success => {
                let remainder = report
                    .mixture()
                    .cloned()
                    .unwrap_or_else(|| MixtureMeasure::empty(kind));
                let prescribed =
                    MixtureMeasure::new(kind, vec![Component::new(eps, x0.to_vec(), sigma0)])?;
                let mixture = prescribed.concat(&remainder)?;
                let residual = mixture_moments(basis, &mixture)?.relative_residual(s.values());
                if residual <= tol {
                    return Ok(PrescribedRepresentation {
                        mixture,
                        epsilon: eps,
                        residual,
                        halvings,
                        remainder: report,
                    });
                }
                last = format!("ε = {eps:e}: combined residual {residual:e}");
            }
            Ok(report) => {
                last = format!(
                    "ε = {eps:e}: {}",
                    report
                        .failure_reason
                        .unwrap_or_else(|| "recovery failed".into())
                )
            }
            Err(e) => last = format!("ε = {eps:e}: {e}"),
        }
        eps *= 0.5;
        halvings += 1;
    }
    Err(Error::RecoveryFailed(format!(
        "no recoverable remainder for ε down to {:e}; last attempt {last}",
        1e-12 * mass
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicMeasure;
    use crate::moments::dirac_moments;
    use crate::recover::Engine;

    fn mv(vals: &[f64]) -> MomentVector {
        MomentVector::external(
            MonomialBasis::full_univariate(vals.len() as u32 - 1),
            vals.to_vec(),
        )
        .unwrap()
    }

    fn status(s: &MomentVector) -> Result<ConeStatus> {
        Ok(hankel_classify(s)?.status)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            hankel_classify(&mv(&[1.0, 0.0, 1.0])).unwrap().status,
            ConeStatus::Interior
        );
        assert_eq!(
            hankel_classify(&mv(&[1.0, 0.0, 0.0])).unwrap().status,
            ConeStatus::Boundary
        );
        assert_eq!(
            hankel_classify(&mv(&[1.0, 0.0, -1.0])).unwrap().status,
            ConeStatus::Exterior
        );
        let gap =
            MomentVector::external(MonomialBasis::univariate(&[0, 2]).unwrap(), vec![1.0, 1.0])
                .unwrap();
        assert!(matches!(
            hankel_classify(&gap),
            Err(Error::UnsupportedBasis(_))
        ));
    }

    #[test]
    fn stieltjes_rejects_negative_mean() {
        assert_eq!(
            stieltjes_classify(&mv(&[1.0, -0.5, 1.0])).unwrap().status,
            ConeStatus::Exterior
        );
        assert_eq!(
            stieltjes_classify(&mv(&[1.0, 0.5, 1.0])).unwrap().status,
            ConeStatus::Interior
        );
    }

    #[test]
    fn strip_two_atoms() {
        let b = MonomialBasis::full_univariate(2);
        let s = dirac_moments(
            &b,
            &AtomicMeasure::univariate(&[1.0, 2.0], &[0.0, 1.0]).unwrap(),
        )
        .unwrap();
        let v =
            MomentVector::external(b.clone(), b.eval_point(&[1.0]).unwrap().as_slice().to_vec())
                .unwrap();
        let r = strip_mass(&s, &v, status, &StripConfig::default()).unwrap();
        assert!((r.c - 2.0).abs() < 1e-8, "{}", r.c);
        assert!(r.remainder.relative_residual(&[1.0, 0.0, 0.0]) < 1e-8);
    }

    #[test]
    fn strip_single_ray_and_boundary() {
        let b = MonomialBasis::full_univariate(2);
        let s = dirac_moments(&b, &AtomicMeasure::univariate(&[3.0], &[2.0]).unwrap()).unwrap();
        let v = MomentVector::external(b.clone(), vec![1.0, 2.0, 4.0]).unwrap();
        let r = strip_mass(&s, &v, status, &StripConfig::default()).unwrap();
        assert!((r.c - 3.0).abs() < 1e-8);

        let boundary = mv(&[1.0, 0.0, 0.0]);
        let dir = MomentVector::external(b, vec![1.0, 1.0, 1.0]).unwrap();
        let r = strip_mass(&boundary, &dir, status, &StripConfig::default()).unwrap();
        assert!(r.c < 1e-8);
    }

    #[test]
    fn strip_unbounded_direction() {
        let s = mv(&[1.0, 0.0, 1.0]);
        let v = mv(&[0.0, 0.0, -1.0]);
        assert!(matches!(
            strip_mass(&s, &v, status, &StripConfig::default()),
            Err(Error::UnboundedStrip(_))
        ));
    }

    #[test]
    fn prescribed_far_component() {
        let b = MonomialBasis::full_univariate(2);
        let s = mixture_moments(
            &b,
            &MixtureMeasure::new(
                MixtureKind::Gaussian,
                vec![Component::univariate(1.0, 0.0, 1.0)],
            )
            .unwrap(),
        )
        .unwrap();
        let cfg = RecoveryConfig::new(Engine::SharedSigma, MixtureKind::Gaussian);
        let r = represent_with_prescribed_component(&s, &[5.0], 0.3, &cfg).unwrap();
        assert!(r.epsilon > 0.0);
        assert!(r.mixture.len() >= 2 && r.mixture.len() <= 3);
        let first = &r.mixture.components()[0];
        assert_eq!((first.xi[0], first.sigma), (5.0, 0.3));
        assert!(r.residual <= 1e-8);
    }

    #[test]
    fn prescribed_on_boundary_fails() {
        let cfg = RecoveryConfig::new(Engine::SharedSigma, MixtureKind::Gaussian);
        let err = represent_with_prescribed_component(&mv(&[1.0, 0.0, 0.0]), &[0.0], 0.5, &cfg)
            .unwrap_err();
        assert!(matches!(err, Error::NotInterior(_)));
    }
}
