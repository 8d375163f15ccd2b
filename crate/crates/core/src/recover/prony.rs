//! Prony / Hankel recovery of a univariate atomic measure from `s_0, …, s_d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, singular_values};
use crate::measures::AtomicMeasure;
use crate::moments::{relative_residual, MomentVector};

/// How to supply the missing top moment when `2k − 1 = d + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Require `2k − 1 ≤ d`.
    None,
    /// Support on the real line: one node is fixed at a trial point `z` and the
    /// missing Hankel equation is replaced by `q(z) = 0`.
    Real,
    /// Support on `(0, ∞)`: one atom is fixed at a small positive point and
    /// the others are the Gauss nodes of the shifted sequence `s_{j+1} − z s_j`.
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PronyOptions {
    /// Roots with `|Im| ≤ real_tol (1 + |Re|)` count as real.
    pub real_tol: f64,
    /// Normalized weights in `[−weight_tol, 0]` are clamped and pruned.
    pub weight_tol: f64,
    /// Bound on `‖moments(out) − s‖_∞ / (1 + ‖s‖_∞)`.
    pub residual_tol: f64,
    /// Relative singular-value threshold on the leading Hankel block.
    pub rank_tol: f64,
    pub extension: Extension,
}

impl Default for PronyOptions {
    fn default() -> Self {
        Self {
            real_tol: 1e-8,
            weight_tol: 1e-10,
            residual_tol: 1e-8,
            rank_tol: 1e-10,
            extension: Extension::Real,
        }
    }
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0f64; n + 1];
    for i in 1..n {
        row[i] = row[i - 1] * (n - i + 1) as f64 / i as f64;
    }
    row
}

/// Moments of the pushforward under `y = (x − shift) / scale`.
fn affine_moments(s: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    for j in 0..s.len() {
        let binom = binomial_row(j);
        let mut acc = 0.0;
        let mut pow = 1.0; // (−shift)^{j−i}, built from i = j downwards
        for i in (0..=j).rev() {
            acc += binom[i] * pow * s[i];
            pow *= -shift;
        }
        out.push(acc / scale.powi(j as i32));
    }
    out
}

fn hankel(s: &[f64], rows: usize, cols: usize, offset: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| s[i + j + offset])
}

fn polish_root(coeffs: &[f64], mut x: f64) -> f64 {
    // monic polynomial Σ coeffs[i] y^i with coeffs[k] = 1
    for _ in 0..4 {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        if dp == 0.0 || !dp.is_finite() {
            break;
        }
        let next = x - p / dp;
        if !next.is_finite() || (next - x).abs() > 1e-6 * (1.0 + x.abs()) {
            break;
        }
        x = next;
    }
    x
}

/// Weights for the given nodes by least squares on all of `s`, in the
/// normalized coordinate `y = (x − shift) / scale`.
fn fit_weights(
    s: &[f64],
    shift: f64,
    scale: f64,
    nodes_y: &[f64],
    opts: &PronyOptions,
) -> Result<Vec<(f64, f64)>> {
    let mass = s[0];
    let mut y = affine_moments(s, shift, scale);
    y.iter_mut().for_each(|v| *v /= mass);
    let known = s.len();
    let vander = DMatrix::from_fn(known, nodes_y.len(), |j, i| nodes_y[i].powi(j as i32));
    let target = DVector::from_column_slice(&y);
    let (w, rcond) = lstsq(&vander, &target)
        .ok_or_else(|| Error::Conditioning("singular Vandermonde system".into()))?;
    if !(rcond > 1e-14) {
        return Err(Error::Conditioning(format!(
            "Vandermonde reciprocal condition {rcond:e}"
        )));
    }
    let min_w = w.min();
    if min_w < -opts.weight_tol {
        return Err(Error::InfeasibleWeights { min_weight: min_w });
    }

    let mut atoms: Vec<(f64, f64)> = nodes_y
        .iter()
        .zip(w.iter())
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(&r, &wi)| (wi * mass, shift + scale * r))
        .collect();
    atoms.sort_by(|a, b| a.1.total_cmp(&b.1));

    let model: Vec<f64> = (0..known)
        .map(|j| atoms.iter().map(|(c, x)| c * x.powi(j as i32)).sum())
        .collect();
    let residual = relative_residual(&model, s);
    if !(residual <= opts.residual_tol) {
        return Err(Error::ResidualTooLarge {
            residual,
            tol: opts.residual_tol,
        });
    }
    Ok(atoms)
}

/// `k` nodes on `(0, ∞)` matching `s_0, …, s_{2k−2}`, one of them fixed at `z`.
fn positive_nodes(s: &[f64], k: usize, opts: &PronyOptions) -> Result<Vec<f64>> {
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let mean = s[1] / s[0];
    if !(mean > 0.0) {
        return Err(Error::InfeasibleWeights { min_weight: mean });
    }
    let inner = PronyOptions {
        extension: Extension::None,
        ..opts.clone()
    };
    let mut z = 0.1 * mean;
    let mut last = Error::InfeasibleWeights { min_weight: 0.0 };
    for _ in 0..4 {
        let shifted: Vec<f64> = s.windows(2).map(|w| w[1] - z * w[0]).collect();
        match prony_values(&shifted, k - 1, &inner) {
            Ok(atoms) => {
                let mut nodes: Vec<f64> = atoms.into_iter().map(|(_, x)| x).collect();
                nodes.push(z);
                return Ok(nodes);
            }
            Err(e) => last = e,
        }
        z *= 0.1;
    }
    Err(last)
}

/// Atoms `x_i` and weights `c_i` with `Σ c_i x_i^j = s_j` for `j = 0..=d`.
pub(crate) fn prony_values(s: &[f64], k: usize, opts: &PronyOptions) -> Result<Vec<(f64, f64)>> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "target atom count must be at least 1".into(),
        ));
    }
    let d = s
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::InsufficientMoments("no moments".into()))?;
    let needs_extension = 2 * k - 1 == d + 1;
    if 2 * k - 1 > d + 1 || (needs_extension && opts.extension == Extension::None) {
        return Err(Error::InsufficientMoments(format!(
            "{k} atoms need moments up to degree {}, have {d}",
            2 * k - 1
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite moment".into()));
    }
    let mass = s[0];
    if !(mass > 0.0) {
        return Err(Error::InfeasibleWeights { min_weight: mass });
    }

    let shift = if d >= 1 { s[1] / mass } else { 0.0 };
    let var = if d >= 2 {
        s[2] / mass - shift * shift
    } else {
        0.0
    };
    let scale = if var > 1e-300 && var.is_finite() {
        var.sqrt()
    } else {
        1.0
    };

    if needs_extension && opts.extension == Extension::Positive {
        let nodes = positive_nodes(s, k, opts)?;
        let nodes_y: Vec<f64> = nodes.iter().map(|x| (x - shift) / scale).collect();
        return fit_weights(s, shift, scale, &nodes_y, opts);
    }

    let mut y = affine_moments(s, shift, scale);
    y.iter_mut().for_each(|v| *v /= mass);

    let lead = hankel(&y, k, k, 0);
    let sv = singular_values(&lead);
    if !(sv[k - 1] > opts.rank_tol * sv[0]) {
        return Err(Error::RankDeficient { k });
    }
    if !needs_extension {
        let rhs = DVector::from_fn(k, |i, _| -y[i + k]);
        let q = lead.lu().solve(&rhs).ok_or(Error::RankDeficient { k })?;
        let roots = monic_roots(q.as_slice(), opts)?;
        return fit_weights(s, shift, scale, &roots, opts);
    }
    // trial nodes in normalized coordinates, nearest the mean first
    let mut last = Error::RankDeficient { k };
    for z in [0.0f64, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5] {
        let mut a = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for i in 0..k - 1 {
            for j in 0..k {
                a[(i, j)] = y[i + j];
            }
            rhs[i] = -y[i + k];
        }
        for j in 0..k {
            a[(k - 1, j)] = z.powi(j as i32);
        }
        rhs[k - 1] = -z.powi(k as i32);
        let attempt = a
            .lu()
            .solve(&rhs)
            .ok_or(Error::RankDeficient { k })
            .and_then(|q| monic_roots(q.as_slice(), opts))
            .and_then(|roots| fit_weights(s, shift, scale, &roots, opts));
        match attempt {
            Ok(atoms) => return Ok(atoms),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Real roots of the monic polynomial `y^k + Σ q_i y^i`.
fn monic_roots(q: &[f64], opts: &PronyOptions) -> Result<Vec<f64>> {
    let k = q.len();
    let mut coeffs = q.to_vec();
    coeffs.push(1.0);
    if k == 1 {
        return Ok(vec![-coeffs[0]]);
    }
    let mut companion = DMatrix::zeros(k, k);
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..k {
        companion[(i, k - 1)] = -coeffs[i];
    }
    let eig = companion.complex_eigenvalues();
    let max_imag = eig
        .iter()
        .map(|z| z.im.abs() / (1.0 + z.re.abs()))
        .fold(0.0f64, f64::max);
    if !(max_imag <= opts.real_tol) {
        return Err(Error::NonrealAtoms { max_imag });
    }
    Ok(eig.iter().map(|z| polish_root(&coeffs, z.re)).collect())
}

/// Recovers a `k`-atomic measure from moments over `{1, x, …, x^d}`.
pub fn prony_dirac(s: &MomentVector, k: usize) -> Result<AtomicMeasure> {
    prony_dirac_with(s, k, &PronyOptions::default())
}

pub fn prony_dirac_with(s: &MomentVector, k: usize, opts: &PronyOptions) -> Result<AtomicMeasure> {
    if !s.basis().is_gap_free_univariate() {
        return Err(Error::UnsupportedBasis(
            "Prony recovery needs {1, x, …, x^d}".into(),
        ));
    }
    let atoms = prony_values(s.values(), k, opts)?;
    let (w, x): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
    AtomicMeasure::univariate(&w, &x)
}
