//! Recovery engines that turn a moment vector into a mixture with few components.

mod homotopy;
mod lm;
mod matching;
mod prony;
mod shared_sigma;

pub use homotopy::{homotopy_gap_recovery, HomotopyConfig};
pub use lm::{lm_fit, LmConfig};
pub use matching::{match_components, ComponentMatch};
pub use prony::{prony_dirac, prony_dirac_with, Extension, PronyOptions};
pub use shared_sigma::{
    recover_shared_sigma_gaussian, recover_shared_sigma_lognormal, SigmaSchedule,
};

use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::jacobian::ceil_div;
use crate::measures::{AtomicMeasure, Component, MixtureKind, MixtureMeasure};
use crate::moments::{dirac_moments, mixture_moments, MomentVector};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;

/// The measure produced by an engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RecoveredModel {
    Atomic(AtomicMeasure),
    Mixture(MixtureMeasure),
}

impl RecoveredModel {
    pub fn len(&self) -> usize {
        match self {
            RecoveredModel::Atomic(a) => a.len(),
            RecoveredModel::Mixture(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mixture(&self) -> Option<&MixtureMeasure> {
        match self {
            RecoveredModel::Mixture(m) => Some(m),
            RecoveredModel::Atomic(_) => None,
        }
    }

    pub fn moments(&self, basis: &MonomialBasis) -> Result<MomentVector> {
        match self {
            RecoveredModel::Atomic(a) => dirac_moments(basis, a),
            RecoveredModel::Mixture(m) => mixture_moments(basis, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub engine: String,
    pub success: bool,
    pub model: Option<RecoveredModel>,
    /// Number of components in `model`.
    pub k: usize,
    /// `‖moments(model) − s‖_∞ / (1 + ‖s‖_∞)`; infinite without a model.
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_used: Option<f64>,
    pub iterations: usize,
    pub sigma_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RecoveryReport {
    pub(crate) fn failure(engine: &str, tolerance: f64, reason: impl Into<String>) -> Self {
        Self {
            engine: engine.to_string(),
            success: false,
            model: None,
            k: 0,
            residual: f64::INFINITY,
            tolerance,
            sigma_used: None,
            iterations: 0,
            sigma_steps: 0,
            failure_reason: Some(reason.into()),
            warnings: Vec::new(),
        }
    }

    /// Report for `model`, with `success` decided by the moment residual alone.
    pub(crate) fn from_model(
        engine: &str,
        s: &MomentVector,
        model: RecoveredModel,
        tolerance: f64,
    ) -> Result<Self> {
        let residual = model.moments(s.basis())?.relative_residual(s.values());
        let success = residual <= tolerance;
        Ok(Self {
            engine: engine.to_string(),
            success,
            k: model.len(),
            model: Some(model),
            residual,
            tolerance,
            sigma_used: None,
            iterations: 0,
            sigma_steps: 0,
            failure_reason: (!success)
                .then(|| format!("residual {residual:e} exceeds tolerance {tolerance:e}")),
            warnings: Vec::new(),
        })
    }

    pub fn mixture(&self) -> Option<&MixtureMeasure> {
        self.model.as_ref().and_then(RecoveredModel::mixture)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    SharedSigma,
    Homotopy,
    Lm,
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-sigma" => Ok(Engine::SharedSigma),
            "homotopy" => Ok(Engine::Homotopy),
            "lm" => Ok(Engine::Lm),
            other => Err(Error::InvalidInput(format!(
                "unknown engine {other:?}; expected shared-sigma, homotopy or lm"
            ))),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::SharedSigma => "shared-sigma",
            Engine::Homotopy => "homotopy",
            Engine::Lm => "lm",
        })
    }
}

/// Engine choice plus all engine settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    pub engine: Engine,
    pub kind: MixtureKind,
    /// Component count; engine default when absent.
    pub k: Option<usize>,
    pub seed: u64,
    pub free_sigma: bool,
    pub schedule: SigmaSchedule,
    pub homotopy: HomotopyConfig,
    pub lm: LmConfig,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            engine: Engine::SharedSigma,
            kind: MixtureKind::Gaussian,
            k: None,
            seed: 0,
            free_sigma: false,
            schedule: SigmaSchedule::default(),
            homotopy: HomotopyConfig::default(),
            lm: LmConfig::default(),
        }
    }
}

impl RecoveryConfig {
    pub fn new(engine: Engine, kind: MixtureKind) -> Self {
        Self {
            engine,
            kind,
            ..Self::default()
        }
    }

    /// `k` if given, otherwise the smallest count whose parameter total reaches `m`.
    pub fn default_k(&self, basis: &MonomialBasis) -> usize {
        if let Some(k) = self.k {
            return k;
        }
        let (m, n) = (basis.m(), basis.n());
        match self.engine {
            Engine::SharedSigma => ceil_div(m, 2),
            Engine::Homotopy => ceil_div(m, n + 1),
            Engine::Lm if self.free_sigma => ceil_div(m, n + 2),
            Engine::Lm => ceil_div(m.saturating_sub(1).max(1), n + 1),
        }
        .max(1)
    }
}

/// Runs the configured engine on `s`.
pub fn recover(s: &MomentVector, cfg: &RecoveryConfig) -> Result<RecoveryReport> {
    match cfg.engine {
        Engine::SharedSigma => match cfg.kind {
            MixtureKind::Gaussian => recover_shared_sigma_gaussian(s, &cfg.schedule),
            MixtureKind::Lognormal => recover_shared_sigma_lognormal(s, &cfg.schedule),
        },
        Engine::Homotopy => {
            if cfg.kind != MixtureKind::Gaussian {
                return Err(Error::UnsupportedBasis(
                    "the homotopy engine produces Gaussian mixtures only".into(),
                ));
            }
            let mut h = cfg.homotopy.clone();
            h.seed = cfg.seed;
            homotopy_gap_recovery(s, cfg.default_k(s.basis()), &h)
        }
        Engine::Lm => {
            let mut l = cfg.lm.clone();
            l.seed = cfg.seed;
            lm_fit(s, cfg.kind, cfg.default_k(s.basis()), cfg.free_sigma, &l)
        }
    }
}

pub(crate) fn shared_mixture(
    kind: MixtureKind,
    weights: &[f64],
    xs: &[Vec<f64>],
    sigma: f64,
) -> Result<MixtureMeasure> {
    MixtureMeasure::new(
        kind,
        weights
            .iter()
            .zip(xs)
            .map(|(&c, x)| Component::new(c, x.clone(), sigma))
            .collect(),
    )
}

/// Typical coordinate magnitude implied by the moments, `max (|s_α| / s_0)^{1/|α|}`.
pub(crate) fn moment_scale(s: &MomentVector) -> f64 {
    let basis = s.basis();
    let mass = basis
        .constant_index()
        .map(|i| s.values()[i])
        .filter(|&v| v > 0.0)
        .unwrap_or(1.0);
    let mut scale: f64 = 0.0;
    for (alpha, &v) in basis.exponents().iter().zip(s.values()) {
        let deg: u32 = alpha.iter().sum();
        if deg > 0 {
            scale = scale.max((v.abs() / mass).powf(1.0 / f64::from(deg)));
        }
    }
    if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    }
}

pub(crate) fn mass_estimate(s: &MomentVector) -> f64 {
    s.basis()
        .constant_index()
        .map(|i| s.values()[i])
        .filter(|&v| v > 0.0)
        .unwrap_or(1.0)
}
