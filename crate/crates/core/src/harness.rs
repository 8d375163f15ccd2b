//! Randomized experiments that check component-count bounds and write CSV / JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::conegeo::represent_with_prescribed_component;
use crate::error::{Error, Result};
use crate::jacobian::{ceil_div, estimate_na};
use crate::measures::{
    sample_random_atoms, sample_random_mixture, MixtureKind, MixtureMeasure, SamplerConfig,
};
use crate::moments::{dirac_moments, mixture_moments};
use crate::recover::{
    homotopy_gap_recovery, recover_shared_sigma_gaussian, recover_shared_sigma_lognormal, Engine,
    HomotopyConfig, RecoveredModel, RecoveryConfig, RecoveryReport, SigmaSchedule,
};
use crate::reduce::{reduce_atoms, reduce_mixture_components};
use crate::seed::sub_seed;

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "MIXCARA_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    UnivariateGaussianBound,
    LognormalBound,
    GapHomotopy,
    NaTable,
    ReductionStress,
    PrescribeCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::UnivariateGaussianBound => "univariate-gaussian-bound",
            ExperimentKind::LognormalBound => "lognormal-bound",
            ExperimentKind::GapHomotopy => "gap-homotopy",
            ExperimentKind::NaTable => "na-table",
            ExperimentKind::ReductionStress => "reduction-stress",
            ExperimentKind::PrescribeCheck => "prescribe-check",
        }
    }

    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::UnivariateGaussianBound,
        ExperimentKind::LognormalBound,
        ExperimentKind::GapHomotopy,
        ExperimentKind::NaTable,
        ExperimentKind::ReductionStress,
        ExperimentKind::PrescribeCheck,
    ];

    /// 0.95 for almost-everywhere statements, 1.0 for statements about every input.
    pub fn default_threshold(self) -> f64 {
        match self {
            ExperimentKind::UnivariateGaussianBound
            | ExperimentKind::LognormalBound
            | ExperimentKind::GapHomotopy => 0.95,
            ExperimentKind::NaTable
            | ExperimentKind::ReductionStress
            | ExperimentKind::PrescribeCheck => 1.0,
        }
    }

    fn default_basis(self) -> MonomialBasis {
        match self {
            ExperimentKind::GapHomotopy => {
                MonomialBasis::univariate(&[0, 2, 3, 5, 6]).expect("valid")
            }
            ExperimentKind::PrescribeCheck => MonomialBasis::full_univariate(4),
            _ => MonomialBasis::full_univariate(5),
        }
    }

    fn default_sampler(self) -> SamplerConfig {
        let base = SamplerConfig::default();
        match self {
            ExperimentKind::UnivariateGaussianBound => SamplerConfig {
                min_separation: 0.5,
                shared_sigma: true,
                ..base
            },
            ExperimentKind::LognormalBound => SamplerConfig {
                xi_range: (0.5, 3.0),
                ..base
            },
            ExperimentKind::GapHomotopy => SamplerConfig {
                xi_range: (-1.0, 1.0),
                sigma_range: (0.05, 0.05),
                min_separation: 0.2,
                shared_sigma: true,
                ..base
            },
            ExperimentKind::ReductionStress => SamplerConfig {
                xi_range: (-1.0, 1.0),
                ..base
            },
            ExperimentKind::PrescribeCheck => SamplerConfig {
                xi_range: (-1.5, 1.5),
                sigma_range: (0.2, 0.8),
                ..base
            },
            ExperimentKind::NaTable => base,
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_trials() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-8
}

fn default_rank_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MonomialBasis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<MixtureKind>,
    /// Ground-truth component count and, for the homotopy engine, the target count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub residual_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    /// Degrees for the rank table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<u32>>,
    /// Random parameter draws per `k` in the rank table.
    #[serde(default = "default_rank_trials")]
    pub rank_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            basis: None,
            kind: None,
            components: None,
            trials: default_trials(),
            seed: 0,
            residual_tol: default_tol(),
            success_threshold: None,
            sampler: None,
            degrees: None,
            rank_trials: default_rank_trials(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::Config("residual tolerance must be positive".into()));
        }
        if let Some(t) = self.success_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!(
                    "success threshold {t} not in [0, 1]"
                )));
            }
        }
        if self.experiment == ExperimentKind::NaTable && self.rank_trials == 0 {
            return Err(Error::Config("rank_trials must be at least 1".into()));
        }
        if let Some(k) = self.components {
            if k == 0 {
                return Err(Error::Config("components must be at least 1".into()));
            }
        }
        let basis = self.basis();
        match self.experiment {
            ExperimentKind::UnivariateGaussianBound | ExperimentKind::PrescribeCheck
                if !basis.is_gap_free_univariate() =>
            {
                Err(Error::Config(
                    "this experiment needs a basis {1, x, …, x^d}".into(),
                ))
            }
            ExperimentKind::LognormalBound if !basis.is_consecutive_univariate() => Err(
                Error::Config("lognormal-bound needs consecutive exponents".into()),
            ),
            ExperimentKind::GapHomotopy if basis.n() != 1 => Err(Error::Config(
                "gap-homotopy needs a univariate basis".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn basis(&self) -> MonomialBasis {
        self.basis
            .clone()
            .unwrap_or_else(|| self.experiment.default_basis())
    }

    pub fn sampler(&self) -> SamplerConfig {
        self.sampler
            .clone()
            .unwrap_or_else(|| self.experiment.default_sampler())
    }

    pub fn threshold(&self) -> f64 {
        self.success_threshold
            .unwrap_or_else(|| self.experiment.default_threshold())
    }

    fn kind(&self) -> MixtureKind {
        self.kind.unwrap_or(match self.experiment {
            ExperimentKind::LognormalBound => MixtureKind::Lognormal,
            _ => MixtureKind::Gaussian,
        })
    }
}

/// The bound an experiment tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub statement: String,
    /// Component count the bound allows, when a single number applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub truth: String,
    pub engine: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_used: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub success: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<RecoveredModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub basis: MonomialBasis,
    pub bound: BoundSpec,
    pub residual_tol: f64,
    pub threshold: f64,
    pub rows: Vec<TrialRow>,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub bound_held: bool,
}

impl ExperimentReport {
    fn assemble(cfg: &ExperimentConfig, bound: BoundSpec, rows: Vec<TrialRow>) -> Self {
        let (trials, successes, success_rate) = aggregate(&rows);
        let threshold = cfg.threshold();
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: cfg.experiment,
            seed: cfg.seed,
            basis: cfg.basis(),
            bound,
            residual_tol: cfg.residual_tol,
            threshold,
            trials,
            successes,
            success_rate,
            bound_held: success_rate >= threshold,
            rows,
        }
    }

    /// Checks that the stored aggregates agree with the rows.
    pub fn aggregates_consistent(&self) -> bool {
        let (trials, successes, rate) = aggregate(&self.rows);
        trials == self.trials
            && successes == self.successes
            && rate == self.success_rate
            && self.bound_held == (rate >= self.threshold)
    }

    pub const CSV_HEADER: [&'static str; 11] = [
        "schema_version",
        "experiment",
        "trial",
        "seed",
        "truth",
        "engine",
        "k_used",
        "bound",
        "residual",
        "success",
        "detail",
    ];

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER)?;
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                self.experiment.name().to_string(),
                row.trial.to_string(),
                row.seed.to_string(),
                row.truth.clone(),
                row.engine.clone(),
                opt(row.k_used),
                opt(row.bound),
                row.residual.map(|r| format!("{r:e}")).unwrap_or_default(),
                row.success.to_string(),
                row.detail.clone(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `<experiment>.csv` and `<experiment>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment.name()));
        let json_path = dir.join(format!("{}.json", self.experiment.name()));
        fs::write(&csv_path, self.to_csv()?)?;
        fs::write(&json_path, self.to_json()?)?;
        Ok((csv_path, json_path))
    }
}

fn aggregate(rows: &[TrialRow]) -> (usize, usize, f64) {
    let successes = rows.iter().filter(|r| r.success).count();
    let rate = if rows.is_empty() {
        0.0
    } else {
        successes as f64 / rows.len() as f64
    };
    (rows.len(), successes, rate)
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn summarize_mixture(mu: &MixtureMeasure) -> String {
    mu.components()
        .iter()
        .map(|c| {
            let xi: Vec<String> = c.xi.iter().map(|x| format!("{x:.6}")).collect();
            format!("{:.6}@[{}]/{:.6}", c.c, xi.join(","), c.sigma)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn row_from_report(
    trial: usize,
    seed: u64,
    truth: String,
    bound: usize,
    tol: f64,
    report: RecoveryReport,
) -> TrialRow {
    let within = report.k <= bound;
    let success = report.success && report.residual <= tol && within;
    let detail = if success {
        String::new()
    } else if report.success && !within {
        format!("used {} components, bound {bound}", report.k)
    } else {
        report
            .failure_reason
            .clone()
            .unwrap_or_else(|| "residual above tolerance".into())
    };
    TrialRow {
        trial,
        seed,
        truth,
        engine: report.engine,
        k_used: report.model.as_ref().map(|_| report.k),
        bound: Some(bound),
        residual: report.residual.is_finite().then_some(report.residual),
        success,
        detail,
        model: report.model,
    }
}

fn error_row(
    trial: usize,
    seed: u64,
    truth: String,
    engine: &str,
    bound: Option<usize>,
    e: Error,
) -> TrialRow {
    TrialRow {
        trial,
        seed,
        truth,
        engine: engine.to_string(),
        k_used: None,
        bound,
        residual: None,
        success: false,
        detail: e.to_string(),
        model: None,
    }
}

fn run_trials<F>(trials: usize, seed: u64, f: F) -> Vec<TrialRow>
where
    F: Fn(usize, u64) -> TrialRow + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(t, sub_seed(seed, t as u64)))
        .collect()
}

fn mixture_recovery_trials(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let basis = cfg.basis();
    let m = basis.m();
    let kind = cfg.kind();
    let sampler = cfg.sampler();
    let bound = match cfg.experiment {
        ExperimentKind::GapHomotopy => cfg.components.unwrap_or(3),
        _ => ceil_div(m, 2),
    };
    let truth_k = cfg.components.unwrap_or(bound);
    let schedule = SigmaSchedule {
        residual_tol: cfg.residual_tol,
        ..SigmaSchedule::default()
    };
    let statement = match cfg.experiment {
        ExperimentKind::UnivariateGaussianBound => format!(
            "shared-sigma Gaussian mixtures over {{1, x, ..., x^{}}} are recovered with at most ceil((d+1)/2) = {bound} components",
            m - 1
        ),
        ExperimentKind::LognormalBound => format!(
            "log-normal mixtures over {m} consecutive monomials are recovered with at most ceil(m/2) = {bound} components"
        ),
        _ => format!(
            "almost every shared-sigma Gaussian moment vector over the gap system is reached by {bound} components via sigma-homotopy"
        ),
    };
    let rows = run_trials(cfg.trials, cfg.seed, |t, seed| {
        let truth = match sample_random_mixture(kind, truth_k, 1, &sampler, seed) {
            Ok(mu) => mu,
            Err(e) => return error_row(t, seed, String::new(), "sampler", Some(bound), e),
        };
        let summary = summarize_mixture(&truth);
        let s = match mixture_moments(&basis, &truth) {
            Ok(s) => s,
            Err(e) => return error_row(t, seed, summary, "moments", Some(bound), e),
        };
        let (engine, result) = match cfg.experiment {
            ExperimentKind::GapHomotopy => {
                let h = HomotopyConfig {
                    seed,
                    residual_tol: cfg.residual_tol,
                    ..HomotopyConfig::default()
                };
                ("homotopy", homotopy_gap_recovery(&s, bound, &h))
            }
            _ => match kind {
                MixtureKind::Gaussian => (
                    "shared-sigma-gaussian",
                    recover_shared_sigma_gaussian(&s, &schedule),
                ),
                MixtureKind::Lognormal => (
                    "shared-sigma-lognormal",
                    recover_shared_sigma_lognormal(&s, &schedule),
                ),
            },
        };
        match result {
            Ok(report) => row_from_report(t, seed, summary, bound, cfg.residual_tol, report),
            Err(e) => error_row(t, seed, summary, engine, Some(bound), e),
        }
    });
    Ok(ExperimentReport::assemble(
        cfg,
        BoundSpec {
            statement,
            value: Some(bound),
        },
        rows,
    ))
}

fn na_table(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let degrees = cfg.degrees.clone().unwrap_or_else(|| (1..=9).collect());
    let rows: Vec<TrialRow> = degrees
        .par_iter()
        .enumerate()
        .map(|(t, &d)| {
            let seed = sub_seed(cfg.seed, t as u64);
            let basis = MonomialBasis::full_univariate(d);
            let expected = ceil_div(d as usize + 1, 2);
            let truth = format!("d={d}");
            match estimate_na(&basis, d as usize + 1, cfg.rank_trials, seed) {
                Ok(est) => {
                    let success = est.estimate == Some(expected)
                        && est.estimate.unwrap_or(0) >= est.lower_bound;
                    TrialRow {
                        trial: t,
                        seed,
                        truth,
                        engine: "rank-estimate".into(),
                        k_used: est.estimate,
                        bound: Some(expected),
                        residual: None,
                        success,
                        detail: if success {
                            String::new()
                        } else {
                            format!(
                                "estimate {:?}, lower bound {}",
                                est.estimate, est.lower_bound
                            )
                        },
                        model: None,
                    }
                }
                Err(e) => error_row(t, seed, truth, "rank-estimate", Some(expected), e),
            }
        })
        .collect();
    Ok(ExperimentReport::assemble(
        cfg,
        BoundSpec {
            statement: "the Jacobian rank number of {1, x, ..., x^d} equals ceil((d+1)/2)".into(),
            value: None,
        },
        rows,
    ))
}

/// Random basis with at most 8 monomials: univariate `{1, …, x^d}` or a bivariate total-degree space.
fn stress_basis(rng: &mut ChaCha8Rng) -> MonomialBasis {
    match rng.random_range(0..4) {
        0 => MonomialBasis::total_degree(2, rng.random_range(1..=2)).expect("valid"),
        _ => MonomialBasis::full_univariate(rng.random_range(1..=7)),
    }
}

fn reduction_stress(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let sampler = cfg.sampler();
    let rows = run_trials(cfg.trials, cfg.seed, |t, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = stress_basis(&mut rng);
        let m = basis.m();
        let k = rng.random_range(m + 1..=50);
        let mixture_kind = match rng.random_range(0..3) {
            0 => None,
            1 => Some(MixtureKind::Gaussian),
            _ if basis.n() == 1 => Some(MixtureKind::Lognormal),
            _ => Some(MixtureKind::Gaussian),
        };
        let truth = format!(
            "n={} m={m} k={k} kind={}",
            basis.n(),
            mixture_kind.map_or("dirac".into(), |k| k.to_string())
        );
        let sub = sub_seed(seed, 1);
        let outcome: Result<(usize, Vec<f64>, Vec<f64>)> = (|| match mixture_kind {
            None => {
                let mu = sample_random_atoms(k, basis.n(), &sampler, sub)?;
                let out = reduce_atoms(&basis, &mu)?;
                Ok((
                    out.len(),
                    dirac_moments(&basis, &mu)?.values().to_vec(),
                    dirac_moments(&basis, &out)?.values().to_vec(),
                ))
            }
            Some(kind) => {
                let mut smp = sampler.clone();
                if kind == MixtureKind::Lognormal {
                    smp.xi_range = (0.5, 1.5);
                }
                let mu = sample_random_mixture(kind, k, basis.n(), &smp, sub)?;
                let out = reduce_mixture_components(&basis, &mu)?;
                Ok((
                    out.len(),
                    mixture_moments(&basis, &mu)?.values().to_vec(),
                    mixture_moments(&basis, &out)?.values().to_vec(),
                ))
            }
        })();
        match outcome {
            Ok((len, before, after)) => {
                let drift = before
                    .iter()
                    .zip(&after)
                    .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                let success = len <= m && drift <= 1e-10;
                TrialRow {
                    trial: t,
                    seed,
                    truth,
                    engine: "caratheodory".into(),
                    k_used: Some(len),
                    bound: Some(m),
                    residual: Some(drift),
                    success,
                    detail: if success {
                        String::new()
                    } else {
                        format!("{len} components, max moment drift {drift:e}")
                    },
                    model: None,
                }
            }
            Err(e) => error_row(t, seed, truth, "caratheodory", Some(m), e),
        }
    });
    Ok(ExperimentReport::assemble(
        cfg,
        BoundSpec {
            statement: "reduction leaves at most m components and preserves every moment to 1e-10"
                .into(),
            value: None,
        },
        rows,
    ))
}

fn prescribe_check(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let basis = cfg.basis();
    let sampler = cfg.sampler();
    let kind = cfg.kind();
    let truth_k = cfg.components.unwrap_or(2);
    let mut engine = RecoveryConfig::new(Engine::SharedSigma, kind);
    engine.schedule.residual_tol = cfg.residual_tol;
    let rows = run_trials(cfg.trials, cfg.seed, |t, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 1));
        let x0 = match kind {
            MixtureKind::Gaussian => rng.random_range(-3.0..3.0),
            MixtureKind::Lognormal => rng.random_range(0.2..4.0),
        };
        let sigma0 = rng.random_range(0.1..1.0);
        let truth = match sample_random_mixture(kind, truth_k, 1, &sampler, seed) {
            Ok(mu) => mu,
            Err(e) => return error_row(t, seed, String::new(), "sampler", None, e),
        };
        let summary = format!(
            "{} | prescribe {x0:.6}/{sigma0:.6}",
            summarize_mixture(&truth)
        );
        let result = mixture_moments(&basis, &truth)
            .and_then(|s| represent_with_prescribed_component(&s, &[x0], sigma0, &engine));
        match result {
            Ok(rep) => {
                let has = rep
                    .mixture
                    .components()
                    .iter()
                    .any(|c| c.xi == [x0] && c.sigma == sigma0 && c.c > 0.0);
                let success = has && rep.residual <= cfg.residual_tol;
                TrialRow {
                    trial: t,
                    seed,
                    truth: summary,
                    engine: "prescribe+shared-sigma".into(),
                    k_used: Some(rep.mixture.len()),
                    bound: None,
                    residual: Some(rep.residual),
                    success,
                    detail: format!("epsilon={:e}", rep.epsilon),
                    model: Some(RecoveredModel::Mixture(rep.mixture)),
                }
            }
            Err(e) => error_row(t, seed, summary, "prescribe+shared-sigma", None, e),
        }
    });
    Ok(ExperimentReport::assemble(
        cfg,
        BoundSpec {
            statement: "every interior moment vector has a representation containing any prescribed component".into(),
            value: None,
        },
        rows,
    ))
}

/// Runs one experiment; trials run in parallel, capped by `MIXCARA_THREADS`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let run = || match cfg.experiment {
        ExperimentKind::UnivariateGaussianBound
        | ExperimentKind::LognormalBound
        | ExperimentKind::GapHomotopy => mixture_recovery_trials(cfg),
        ExperimentKind::NaTable => na_table(cfg),
        ExperimentKind::ReductionStress => reduction_stress(cfg),
        ExperimentKind::PrescribeCheck => prescribe_check(cfg),
    };
    match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    }
}
