//! Carathéodory-type reduction of representing measures to at most `m` atoms.
//!
//! While more than `m` atoms remain, a null vector `λ` of `m + 1` moment
//! columns is found and the weights move along `−λ` until one of them hits
//! zero. The moment vector is unchanged by construction.

use nalgebra::{DMatrix, DVector};

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, null_vector};
use crate::measures::MixtureKind;
use crate::measures::{AtomicMeasure, MixtureMeasure};
use crate::moments::{component_moments, gaussian_smoothed_basis};

const DROP_TOL: f64 = 1e-14;

/// Indices of surviving columns with their new weights.
pub(crate) fn caratheodory(
    columns: &DMatrix<f64>,
    weights: &[f64],
) -> Result<(Vec<usize>, Vec<f64>)> {
    let (m, k) = columns.shape();
    let mut w = weights.to_vec();
    let mut active: Vec<usize> = (0..k).collect();
    let mass: f64 = weights.iter().sum();
    let drop_below = DROP_TOL * mass.max(f64::MIN_POSITIVE);
    let target = columns * DVector::from_column_slice(weights);

    while active.len() > m {
        let sub: Vec<usize> = active[..m + 1].to_vec();
        let v = columns.select_columns(&sub);
        let (mut lambda, _) = null_vector(&v);
        let res = (&v * &lambda).norm();
        let scale = v.norm().max(f64::MIN_POSITIVE);
        if !(res <= 1e-8 * scale) {
            return Err(Error::Reduction(format!(
                "no null vector among {} columns in dimension {m}: residual {res:e} relative to {scale:e}",
                sub.len()
            )));
        }
        if lambda.max() <= 0.0 {
            lambda = -lambda;
        }
        let mut step = f64::INFINITY;
        let mut hit = usize::MAX;
        for (pos, &idx) in sub.iter().enumerate() {
            if lambda[pos] > 0.0 {
                let t = w[idx] / lambda[pos];
                if t < step {
                    step = t;
                    hit = pos;
                }
            }
        }
        // a nonzero λ always has a positive entry after the sign flip
        if hit == usize::MAX {
            return Err(Error::Reduction("null vector has no positive entry".into()));
        }
        for (pos, &idx) in sub.iter().enumerate() {
            w[idx] -= step * lambda[pos];
        }
        w[sub[hit]] = 0.0;
        active.retain(|&i| w[i] > drop_below);
    }

    // re-fit surviving weights against the original moments
    if !active.is_empty() {
        let v = columns.select_columns(&active);
        let current = DVector::from_iterator(active.len(), active.iter().map(|&i| w[i]));
        let err_now = (&v * &current - &target).amax();
        if let Some((refit, _)) = lstsq(&v, &target) {
            let err_refit = (&v * &refit - &target).amax();
            if refit.iter().all(|&c| c > 0.0) && err_refit < err_now {
                for (pos, &i) in active.iter().enumerate() {
                    w[i] = refit[pos];
                }
            }
        }
    }
    let out_w = active.iter().map(|&i| w[i]).collect();
    Ok((active, out_w))
}

/// Reduces a Dirac measure to at most `m` atoms with the same `A`-moments.
pub fn reduce_atoms(basis: &MonomialBasis, mu: &AtomicMeasure) -> Result<AtomicMeasure> {
    if mu.len() <= basis.m() {
        if let Some(n) = mu.dim() {
            if n != basis.n() {
                return Err(Error::DimensionMismatch {
                    expected: basis.n(),
                    got: n,
                });
            }
        }
        return Ok(mu.clone());
    }
    let mut cols = DMatrix::zeros(basis.m(), mu.len());
    for (j, (_, x)) in mu.atoms().enumerate() {
        cols.set_column(j, &basis.eval_point(x)?);
    }
    let (keep, weights) = caratheodory(&cols, mu.weights())?;
    let points = keep.iter().map(|&i| mu.points()[i].clone()).collect();
    AtomicMeasure::new(weights, points)
}

/// Reduces a mixture to at most `m` components with the same `A`-moments.
pub fn reduce_mixture_components(
    basis: &MonomialBasis,
    mu: &MixtureMeasure,
) -> Result<MixtureMeasure> {
    if mu.len() <= basis.m() {
        return Ok(mu.clone());
    }
    let smoothed = match mu.kind() {
        MixtureKind::Gaussian => Some(gaussian_smoothed_basis(basis)?),
        MixtureKind::Lognormal => None,
    };
    let mut cols = DMatrix::zeros(basis.m(), mu.len());
    for (j, comp) in mu.components().iter().enumerate() {
        cols.set_column(
            j,
            &component_moments(basis, mu.kind(), smoothed.as_ref(), &comp.xi, comp.sigma)?,
        );
    }
    let weights: Vec<f64> = mu.components().iter().map(|c| c.c).collect();
    let (keep, new_w) = caratheodory(&cols, &weights)?;
    let comps = keep
        .iter()
        .zip(new_w)
        .map(|(&i, c)| {
            let mut comp = mu.components()[i].clone();
            comp.c = c;
            comp
        })
        .collect();
    MixtureMeasure::new(mu.kind(), comps)
}
