//! Forward moment maps for Dirac measures and Gaussian / log-normal mixtures.
//!
//! The Gaussian smoothed monomials `b_α(x, σ) = ∫ y^α dN(x, σ² id)(y)` are kept
//! as exact integer polynomials in `x` and `σ²`. In one variable they follow
//! `b_0 = 1`, `b_1 = x`, `b_i = x b_{i-1} + (i-1) σ² b_{i-2}`, and in several
//! variables they factor coordinate-wise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{powu, MonomialBasis};
use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, MixtureKind, MixtureMeasure};

/// Where a moment vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Dirac,
    Gaussian,
    Lognormal,
    External,
}

impl From<MixtureKind> for Provenance {
    fn from(k: MixtureKind) -> Self {
        match k {
            MixtureKind::Gaussian => Provenance::Gaussian,
            MixtureKind::Lognormal => Provenance::Lognormal,
        }
    }
}

/// A point `s ∈ R^m` tagged with its basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMomentVector")]
pub struct MomentVector {
    basis: MonomialBasis,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<Provenance>,
}

#[derive(Deserialize)]
struct RawMomentVector {
    basis: MonomialBasis,
    values: Vec<f64>,
    #[serde(default)]
    kind: Option<Provenance>,
}

impl TryFrom<RawMomentVector> for MomentVector {
    type Error = Error;
    fn try_from(raw: RawMomentVector) -> Result<Self> {
        MomentVector::new(raw.basis, raw.values, raw.kind)
    }
}

impl MomentVector {
    pub fn new(basis: MonomialBasis, values: Vec<f64>, kind: Option<Provenance>) -> Result<Self> {
        if values.len() != basis.m() {
            return Err(Error::DimensionMismatch {
                expected: basis.m(),
                got: values.len(),
            });
        }
        Ok(Self {
            basis,
            values,
            kind,
        })
    }

    pub fn external(basis: MonomialBasis, values: Vec<f64>) -> Result<Self> {
        Self::new(basis, values, Some(Provenance::External))
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> Option<Provenance> {
        self.kind
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.values)
    }

    /// `‖self − other‖_∞ / (1 + ‖other‖_∞)`.
    pub fn relative_residual(&self, other: &[f64]) -> f64 {
        relative_residual(&self.values, other)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.basis.clone(), values, Some(Provenance::External))
    }
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// `‖model − target‖_∞ / (1 + ‖target‖_∞)`.
pub fn relative_residual(model: &[f64], target: &[f64]) -> f64 {
    let diff = model
        .iter()
        .zip(target)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    diff / (1.0 + norm_inf(target))
}

/// Exact coefficients of the univariate `b_i(x, σ) = Σ_j coef[j] x^{i-2j} σ^{2j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnivariateSmoothed {
    degree: u32,
    coefficients: Vec<u128>,
}

impl UnivariateSmoothed {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `coefficients()[j]` multiplies `x^{degree-2j} σ^{2j}`.
    pub fn coefficients(&self) -> &[u128] {
        &self.coefficients
    }

    pub fn eval(&self, x: f64, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let mut acc = 0.0;
        let mut sp = 1.0;
        for (j, &c) in self.coefficients.iter().enumerate() {
            acc += c as f64 * powu(x, self.degree - 2 * j as u32) * sp;
            sp *= s2;
        }
        acc
    }

    /// `∂/∂x`.
    pub fn eval_dx(&self, x: f64, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let mut acc = 0.0;
        let mut sp = 1.0;
        for (j, &c) in self.coefficients.iter().enumerate() {
            let p = self.degree - 2 * j as u32;
            if p > 0 {
                acc += c as f64 * f64::from(p) * powu(x, p - 1) * sp;
            }
            sp *= s2;
        }
        acc
    }

    /// `∂/∂σ`.
    pub fn eval_dsigma(&self, x: f64, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let mut acc = 0.0;
        // d/dσ σ^{2j} = 2j σ^{2j-1}
        let mut sp = sigma;
        for (j, &c) in self.coefficients.iter().enumerate().skip(1) {
            acc += c as f64 * (2 * j) as f64 * powu(x, self.degree - 2 * j as u32) * sp;
            sp *= s2;
        }
        acc
    }
}

/// Table `b_0, …, b_{max}` built with checked integer arithmetic.
pub fn univariate_smoothed_table(max: u32) -> Result<Vec<UnivariateSmoothed>> {
    let mut table: Vec<UnivariateSmoothed> = Vec::with_capacity(max as usize + 1);
    for i in 0..=max {
        let coefficients = match i {
            0 | 1 => vec![1u128],
            _ => {
                let prev = &table[i as usize - 1].coefficients;
                let prev2 = &table[i as usize - 2].coefficients;
                let len = i as usize / 2 + 1;
                let mut c = vec![0u128; len];
                // x · b_{i-1}: same σ-power index
                for (j, &v) in prev.iter().enumerate() {
                    c[j] = v;
                }
                // (i-1) σ² b_{i-2}: σ-power index shifts by one
                for (j, &v) in prev2.iter().enumerate() {
                    let add = v
                        .checked_mul(u128::from(i - 1))
                        .and_then(|t| t.checked_add(c[j + 1]))
                        .ok_or_else(|| {
                            Error::Overflow(format!("smoothed coefficient of degree {i}"))
                        })?;
                    c[j + 1] = add;
                }
                c
            }
        };
        table.push(UnivariateSmoothed {
            degree: i,
            coefficients,
        });
    }
    Ok(table)
}

/// One term `coeff · x^{x_powers} · σ^{2 σ²-power}` of a smoothed monomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothedTerm {
    pub coeff: u128,
    pub x_powers: Vec<u32>,
    pub sigma_sq_power: u32,
}

/// Exact Gaussian smoothing `b_α(x, σ id)` of every monomial of a basis.
#[derive(Debug, Clone)]
pub struct SmoothedBasis {
    basis: MonomialBasis,
    univariate: Vec<UnivariateSmoothed>,
    terms: Vec<Vec<SmoothedTerm>>,
}

/// Builds the Gaussian smoothed basis with exact integer coefficients.
pub fn gaussian_smoothed_basis(basis: &MonomialBasis) -> Result<SmoothedBasis> {
    let max_exp = basis
        .exponents()
        .iter()
        .flat_map(|a| a.iter().copied())
        .max()
        .unwrap_or(0);
    let univariate = univariate_smoothed_table(max_exp)?;
    let mut terms = Vec::with_capacity(basis.m());
    for alpha in basis.exponents() {
        // expand Π_j b_{α_j}(x_j, σ)
        let mut acc = vec![SmoothedTerm {
            coeff: 1,
            x_powers: vec![0; basis.n()],
            sigma_sq_power: 0,
        }];
        for (var, &a) in alpha.iter().enumerate() {
            let factor = &univariate[a as usize];
            let mut next: Vec<SmoothedTerm> = Vec::new();
            for t in &acc {
                for (j, &c) in factor.coefficients.iter().enumerate() {
                    let coeff = t.coeff.checked_mul(c).ok_or_else(|| {
                        Error::Overflow(format!("smoothed coefficient of {alpha:?}"))
                    })?;
                    let mut x_powers = t.x_powers.clone();
                    x_powers[var] = a - 2 * j as u32;
                    let sigma_sq_power = t.sigma_sq_power + j as u32;
                    match next
                        .iter_mut()
                        .find(|o| o.x_powers == x_powers && o.sigma_sq_power == sigma_sq_power)
                    {
                        Some(o) => {
                            o.coeff = o
                                .coeff
                                .checked_add(coeff)
                                .ok_or_else(|| Error::Overflow(format!("{alpha:?}")))?
                        }
                        None => next.push(SmoothedTerm {
                            coeff,
                            x_powers,
                            sigma_sq_power,
                        }),
                    }
                }
            }
            acc = next;
        }
        acc.sort_by(|a, b| {
            a.sigma_sq_power
                .cmp(&b.sigma_sq_power)
                .then(b.x_powers.cmp(&a.x_powers))
        });
        terms.push(acc);
    }
    Ok(SmoothedBasis {
        basis: basis.clone(),
        univariate,
        terms,
    })
}

impl SmoothedBasis {
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Expanded terms of `b_{α_i}`, sorted by ascending σ power.
    pub fn terms(&self, i: usize) -> &[SmoothedTerm] {
        &self.terms[i]
    }

    /// Univariate `b_e` for a coordinate exponent `e` present in the basis.
    pub fn univariate(&self, e: u32) -> Option<&UnivariateSmoothed> {
        self.univariate.get(e as usize)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.basis.n() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `t_A(x, σ) = (b_α(x, σ id))_α`.
    pub fn eval(&self, x: &[f64], sigma: f64) -> Result<DVector<f64>> {
        self.check(x)?;
        let m = self.basis.m();
        Ok(DVector::from_iterator(
            m,
            self.basis.exponents().iter().map(|alpha| {
                alpha
                    .iter()
                    .zip(x)
                    .map(|(&a, &xj)| self.univariate[a as usize].eval(xj, sigma))
                    .product::<f64>()
            }),
        ))
    }

    /// `m × n` matrix of `∂ b_α / ∂ x_j`.
    pub fn eval_dx(&self, x: &[f64], sigma: f64) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let n = self.basis.n();
        let mut out = DMatrix::zeros(self.basis.m(), n);
        for (i, alpha) in self.basis.exponents().iter().enumerate() {
            let vals: Vec<f64> = alpha
                .iter()
                .zip(x)
                .map(|(&a, &xj)| self.univariate[a as usize].eval(xj, sigma))
                .collect();
            for j in 0..n {
                let mut v = self.univariate[alpha[j] as usize].eval_dx(x[j], sigma);
                for (l, &vl) in vals.iter().enumerate() {
                    if l != j {
                        v *= vl;
                    }
                }
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// `∂ b_α / ∂ σ` for every basis element.
    pub fn eval_dsigma(&self, x: &[f64], sigma: f64) -> Result<DVector<f64>> {
        self.check(x)?;
        let m = self.basis.m();
        let mut out = DVector::zeros(m);
        for (i, alpha) in self.basis.exponents().iter().enumerate() {
            let vals: Vec<f64> = alpha
                .iter()
                .zip(x)
                .map(|(&a, &xj)| self.univariate[a as usize].eval(xj, sigma))
                .collect();
            let mut acc = 0.0;
            for j in 0..alpha.len() {
                let mut v = self.univariate[alpha[j] as usize].eval_dsigma(x[j], sigma);
                for (l, &vl) in vals.iter().enumerate() {
                    if l != j {
                        v *= vl;
                    }
                }
                acc += v;
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// `∫ x^i dδ^L_{ξ,σ} = ξ^i exp(i² σ² / 2)`.
pub fn lognormal_moment(i: u32, xi: f64, sigma: f64) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Domain(format!(
            "log-normal location {xi} must be positive"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "log-normal scale {sigma} must be positive"
        )));
    }
    if i == 0 {
        return Ok(1.0);
    }
    let fi = f64::from(i);
    let exponent = 0.5 * fi * fi * sigma * sigma;
    let direct = xi.powi(i as i32) * exponent.exp();
    if direct.is_finite() && direct > 0.0 {
        return Ok(direct);
    }
    let log_value = fi * xi.ln() + exponent;
    if log_value > f64::MAX.ln() {
        return Err(Error::Overflow(format!(
            "log-normal moment of order {i} at ξ = {xi}, σ = {sigma} is e^{log_value:.3}"
        )));
    }
    Ok(log_value.exp())
}

/// `(∂_ξ, ∂_σ)` of [`lognormal_moment`].
pub fn lognormal_moment_derivatives(i: u32, xi: f64, sigma: f64) -> Result<(f64, f64)> {
    let t = lognormal_moment(i, xi, sigma)?;
    let fi = f64::from(i);
    Ok((fi * t / xi, fi * fi * sigma * t))
}

/// `S_{k,A}(C, X) = Σ c_i s_A(x_i)`.
pub fn dirac_moments(basis: &MonomialBasis, mu: &AtomicMeasure) -> Result<MomentVector> {
    let mut s = DVector::zeros(basis.m());
    for (c, x) in mu.atoms() {
        s += basis.eval_point(x)? * c;
    }
    MomentVector::new(
        basis.clone(),
        s.as_slice().to_vec(),
        Some(Provenance::Dirac),
    )
}

/// The single-component moment vector `t_A(ξ, σ)`.
pub fn component_moments(
    basis: &MonomialBasis,
    kind: MixtureKind,
    smoothed: Option<&SmoothedBasis>,
    xi: &[f64],
    sigma: f64,
) -> Result<DVector<f64>> {
    match kind {
        MixtureKind::Gaussian => match smoothed {
            Some(sb) => sb.eval(xi, sigma),
            None => gaussian_smoothed_basis(basis)?.eval(xi, sigma),
        },
        MixtureKind::Lognormal => {
            let degrees = basis
                .univariate_degrees()
                .ok_or_else(|| Error::UnsupportedBasis("log-normal moments need n = 1".into()))?;
            if xi.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: xi.len(),
                });
            }
            let vals = degrees
                .iter()
                .map(|&d| lognormal_moment(d, xi[0], sigma))
                .collect::<Result<Vec<_>>>()?;
            Ok(DVector::from_vec(vals))
        }
    }
}

/// `T_{k,A}(C, X, σ̄) = Σ c_i t_A(ξ_i, σ_i)`.
pub fn mixture_moments(basis: &MonomialBasis, mu: &MixtureMeasure) -> Result<MomentVector> {
    let smoothed = match mu.kind() {
        MixtureKind::Gaussian => Some(gaussian_smoothed_basis(basis)?),
        MixtureKind::Lognormal => None,
    };
    let mut s = DVector::zeros(basis.m());
    for comp in mu.components() {
        s += component_moments(basis, mu.kind(), smoothed.as_ref(), &comp.xi, comp.sigma)? * comp.c;
    }
    MomentVector::new(basis.clone(), s.as_slice().to_vec(), Some(mu.kind().into()))
}

/// Row `i` holds the coefficients of `b_{d_i}(x, σ)` in `{1, x, …, x^D}`.
///
/// For a gap-free basis the matrix is square, unit lower triangular, and
/// `M(σ) · S_full(C, X)` equals the shared-σ mixture moments.
pub fn transfer_matrix_gaussian(basis: &MonomialBasis, sigma: f64) -> Result<DMatrix<f64>> {
    let degrees = basis
        .univariate_degrees()
        .ok_or_else(|| Error::UnsupportedBasis("transfer matrix requires n = 1".into()))?;
    let max = basis.max_degree();
    let table = univariate_smoothed_table(max)?;
    let s2 = sigma * sigma;
    let mut m = DMatrix::zeros(degrees.len(), max as usize + 1);
    for (row, &d) in degrees.iter().enumerate() {
        let mut sp = 1.0;
        for (j, &c) in table[d as usize].coefficients.iter().enumerate() {
            m[(row, (d - 2 * j as u32) as usize)] = c as f64 * sp;
            sp *= s2;
        }
    }
    Ok(m)
}

/// Solves `M(σ) u = s` for a gap-free univariate basis by forward substitution.
pub fn deconvolve_gaussian(s: &MomentVector, sigma: f64) -> Result<Vec<f64>> {
    if !s.basis().is_gap_free_univariate() {
        return Err(Error::UnsupportedBasis(
            "deconvolution requires the basis {1, x, …, x^d}".into(),
        ));
    }
    let m = transfer_matrix_gaussian(s.basis(), sigma)?;
    let vals = s.values();
    let mut u = vec![0.0; vals.len()];
    for i in 0..vals.len() {
        let mut acc = vals[i];
        for j in 0..i {
            acc -= m[(i, j)] * u[j];
        }
        u[i] = acc;
    }
    Ok(u)
}
