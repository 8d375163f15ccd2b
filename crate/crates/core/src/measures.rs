//! Finitely atomic Dirac measures and finite Gaussian / log-normal mixtures.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Σ c_i δ_{x_i}` with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtomic")]
pub struct AtomicMeasure {
    weights: Vec<f64>,
    points: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawAtomic {
    weights: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl TryFrom<RawAtomic> for AtomicMeasure {
    type Error = Error;
    fn try_from(raw: RawAtomic) -> Result<Self> {
        AtomicMeasure::new(raw.weights, raw.points)
    }
}

impl AtomicMeasure {
    pub fn new(weights: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights but {} points",
                weights.len(),
                points.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        if let Some(first) = points.first() {
            let n = first.len();
            if n == 0 {
                return Err(Error::InvalidMeasure(
                    "points must have dimension ≥ 1".into(),
                ));
            }
            if points.iter().any(|p| p.len() != n) {
                return Err(Error::InvalidMeasure(
                    "point dimension varies across atoms".into(),
                ));
            }
            if points.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite point coordinate".into()));
            }
        }
        Ok(Self { weights, points })
    }

    pub fn empty() -> Self {
        Self {
            weights: Vec::new(),
            points: Vec::new(),
        }
    }

    /// Univariate convenience constructor.
    pub fn univariate(weights: &[f64], points: &[f64]) -> Result<Self> {
        Self::new(weights.to_vec(), points.iter().map(|&x| vec![x]).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Point dimension, `None` for the empty measure.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights
            .iter()
            .zip(&self.points)
            .map(|(&c, x)| (c, x.as_slice()))
    }

    /// Merges atoms whose Euclidean distance is at most `tol` (transitively).
    ///
    /// Each cluster becomes one atom at the weighted mean with the summed weight.
    pub fn merge_close_atoms(&self, tol: f64) -> AtomicMeasure {
        let k = self.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            let mut j = i;
            while parent[j] != r {
                let next = parent[j];
                parent[j] = r;
                j = next;
            }
            r
        }
        let tol = tol.max(0.0);
        for i in 0..k {
            for j in (i + 1)..k {
                if euclid(&self.points[i], &self.points[j]) <= tol {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[rj.max(ri)] = ri.min(rj);
                    }
                }
            }
        }
        let mut order: Vec<usize> = Vec::new();
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..k {
            let r = find(&mut parent, i);
            if clusters[r].is_empty() {
                order.push(r);
            }
            clusters[r].push(i);
        }
        let mut weights = Vec::with_capacity(order.len());
        let mut points = Vec::with_capacity(order.len());
        for r in order {
            let members = &clusters[r];
            if members.len() == 1 {
                weights.push(self.weights[members[0]]);
                points.push(self.points[members[0]].clone());
                continue;
            }
            let w: f64 = members.iter().map(|&i| self.weights[i]).sum();
            let n = self.points[members[0]].len();
            let mut p = vec![0.0; n];
            for &i in members {
                for (pj, xj) in p.iter_mut().zip(&self.points[i]) {
                    *pj += self.weights[i] * xj;
                }
            }
            p.iter_mut().for_each(|v| *v /= w);
            weights.push(w);
            points.push(p);
        }
        AtomicMeasure { weights, points }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureKind {
    Gaussian,
    Lognormal,
}

impl std::fmt::Display for MixtureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MixtureKind::Gaussian => "gaussian",
            MixtureKind::Lognormal => "lognormal",
        })
    }
}

impl std::str::FromStr for MixtureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MixtureKind::Gaussian),
            "lognormal" => Ok(MixtureKind::Lognormal),
            other => Err(Error::InvalidInput(format!(
                "unknown mixture kind '{other}'"
            ))),
        }
    }
}

/// One mixture component: weight `c`, location `xi`, isotropic scale `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub c: f64,
    pub xi: Vec<f64>,
    pub sigma: f64,
}

impl Component {
    pub fn new(c: f64, xi: Vec<f64>, sigma: f64) -> Self {
        Self { c, xi, sigma }
    }

    pub fn univariate(c: f64, xi: f64, sigma: f64) -> Self {
        Self::new(c, vec![xi], sigma)
    }
}

/// `Σ c_i δ_{ξ_i, σ_i}` of a single distribution family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct MixtureMeasure {
    kind: MixtureKind,
    components: Vec<Component>,
}

#[derive(Deserialize)]
struct RawMixture {
    kind: MixtureKind,
    components: Vec<Component>,
}

impl TryFrom<RawMixture> for MixtureMeasure {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureMeasure::new(raw.kind, raw.components)
    }
}

impl MixtureMeasure {
    pub fn new(kind: MixtureKind, components: Vec<Component>) -> Result<Self> {
        if let Some(first) = components.first() {
            let n = first.xi.len();
            if n == 0 {
                return Err(Error::InvalidMeasure(
                    "component location must have dimension ≥ 1".into(),
                ));
            }
            if components.iter().any(|c| c.xi.len() != n) {
                return Err(Error::InvalidMeasure("component dimension varies".into()));
            }
            if kind == MixtureKind::Lognormal && n != 1 {
                return Err(Error::InvalidMeasure(
                    "log-normal mixtures are univariate".into(),
                ));
            }
        }
        for comp in &components {
            if !(comp.c.is_finite() && comp.c > 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "weight {} is not positive",
                    comp.c
                )));
            }
            if !(comp.sigma.is_finite() && comp.sigma > 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "sigma {} is not positive",
                    comp.sigma
                )));
            }
            if comp.xi.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite location".into()));
            }
            if kind == MixtureKind::Lognormal && comp.xi[0] <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "log-normal location {} must be positive",
                    comp.xi[0]
                )));
            }
        }
        Ok(Self { kind, components })
    }

    pub fn empty(kind: MixtureKind) -> Self {
        Self {
            kind,
            components: Vec::new(),
        }
    }

    /// All components share the scale `sigma`.
    pub fn shared_sigma(kind: MixtureKind, atoms: &AtomicMeasure, sigma: f64) -> Result<Self> {
        let comps = atoms
            .atoms()
            .map(|(c, x)| Component::new(c, x.to_vec(), sigma))
            .collect();
        Self::new(kind, comps)
    }

    pub fn kind(&self) -> MixtureKind {
        self.kind
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(|c| c.xi.len())
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.c).sum()
    }

    /// Concatenation of two mixtures of the same kind.
    pub fn concat(&self, other: &MixtureMeasure) -> Result<MixtureMeasure> {
        if self.kind != other.kind {
            return Err(Error::InvalidMeasure(
                "cannot concatenate mixtures of different kinds".into(),
            ));
        }
        let mut comps = self.components.clone();
        comps.extend(other.components.iter().cloned());
        MixtureMeasure::new(self.kind, comps)
    }
}

/// Parameter ranges for random mixture generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub weight_range: (f64, f64),
    pub xi_range: (f64, f64),
    pub sigma_range: (f64, f64),
    /// Minimum Euclidean distance between component locations.
    pub min_separation: f64,
    /// Draw one σ for all components.
    pub shared_sigma: bool,
    pub max_retries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            weight_range: (0.5, 2.0),
            xi_range: (-2.0, 2.0),
            sigma_range: (0.05, 0.3),
            min_separation: 0.0,
            shared_sigma: false,
            max_retries: 10_000,
        }
    }
}

impl SamplerConfig {
    fn validate(&self, kind: Option<MixtureKind>) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.weight_range) || self.weight_range.0 <= 0.0 {
            return Err(Error::InvalidInput(
                "weight range must be positive and ordered".into(),
            ));
        }
        if !ordered(self.xi_range) {
            return Err(Error::InvalidInput("location range must be ordered".into()));
        }
        if kind.is_some() && (!ordered(self.sigma_range) || self.sigma_range.0 <= 0.0) {
            return Err(Error::InvalidInput(
                "sigma range must be positive and ordered".into(),
            ));
        }
        if kind == Some(MixtureKind::Lognormal) && self.xi_range.0 <= 0.0 {
            return Err(Error::InvalidInput(
                "log-normal locations must be positive".into(),
            ));
        }
        if self.min_separation < 0.0 {
            return Err(Error::InvalidInput("separation must be nonnegative".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn sample_locations(
    rng: &mut ChaCha8Rng,
    k: usize,
    n: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut locs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut retries = 0usize;
    while locs.len() < k {
        let cand: Vec<f64> = (0..n).map(|_| uniform(rng, cfg.xi_range)).collect();
        if locs.iter().all(|p| euclid(p, &cand) >= cfg.min_separation) {
            locs.push(cand);
        } else {
            retries += 1;
            if retries > cfg.max_retries {
                return Err(Error::Sampling(format!(
                    "could not place {k} locations with separation {} in {:?} after {} retries",
                    cfg.min_separation, cfg.xi_range, cfg.max_retries
                )));
            }
        }
    }
    locs.sort_by(|a, b| lex(a, b));
    Ok(locs)
}

/// Random mixture, deterministic in `seed`, components sorted by location.
pub fn sample_random_mixture(
    kind: MixtureKind,
    k: usize,
    n: usize,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<MixtureMeasure> {
    cfg.validate(Some(kind))?;
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locs = sample_locations(&mut rng, k, n, cfg)?;
    let shared = uniform(&mut rng, cfg.sigma_range);
    let comps = locs
        .into_iter()
        .map(|xi| {
            let c = uniform(&mut rng, cfg.weight_range);
            let sigma = if cfg.shared_sigma {
                shared
            } else {
                uniform(&mut rng, cfg.sigma_range)
            };
            Component::new(c, xi, sigma)
        })
        .collect();
    MixtureMeasure::new(kind, comps)
}

/// Random atomic measure, deterministic in `seed`, atoms sorted by position.
pub fn sample_random_atoms(
    k: usize,
    n: usize,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<AtomicMeasure> {
    cfg.validate(None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_locations(&mut rng, k, n, cfg)?;
    let weights = (0..k)
        .map(|_| uniform(&mut rng, cfg.weight_range))
        .collect();
    AtomicMeasure::new(weights, points)
}
