//! Monomial function systems `{x^α}` in `n` variables.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite monomial system, ordered by total degree then lexicographically.
///
/// Construction sorts the exponents, so two bases built from the same set of
/// multi-indices compare equal regardless of input order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBasis", into = "RawBasis")]
pub struct MonomialBasis {
    n: usize,
    exponents: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct RawBasis {
    n: usize,
    exponents: Vec<Vec<u32>>,
}

impl TryFrom<RawBasis> for MonomialBasis {
    type Error = Error;

    fn try_from(raw: RawBasis) -> Result<Self> {
        MonomialBasis::new(raw.n, raw.exponents)
    }
}

impl From<MonomialBasis> for RawBasis {
    fn from(b: MonomialBasis) -> Self {
        RawBasis {
            n: b.n,
            exponents: b.exponents,
        }
    }
}

fn degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// Total degree first; within a degree `x_1` outranks `x_2`, so `x_1` comes first.
fn graded_lex(a: &[u32], b: &[u32]) -> Ordering {
    degree(a).cmp(&degree(b)).then_with(|| b.cmp(a))
}

impl MonomialBasis {
    pub fn new(n: usize, mut exponents: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBasis(
                "variable count must be at least 1".into(),
            ));
        }
        if exponents.is_empty() {
            return Err(Error::InvalidBasis(
                "basis must contain at least one monomial".into(),
            ));
        }
        if let Some(bad) = exponents.iter().find(|a| a.len() != n) {
            return Err(Error::InvalidBasis(format!(
                "multi-index {bad:?} has length {} but n = {n}",
                bad.len()
            )));
        }
        let distinct: BTreeSet<&Vec<u32>> = exponents.iter().collect();
        if distinct.len() != exponents.len() {
            return Err(Error::InvalidBasis(
                "exponents must be pairwise distinct".into(),
            ));
        }
        exponents.sort_by(|a, b| graded_lex(a, b));
        Ok(Self { n, exponents })
    }

    /// Univariate basis `{x^d : d in degrees}`.
    pub fn univariate(degrees: &[u32]) -> Result<Self> {
        Self::new(1, degrees.iter().map(|&d| vec![d]).collect())
    }

    /// Gap-free univariate basis `{1, x, …, x^d}`.
    pub fn full_univariate(d: u32) -> Self {
        Self::univariate(&(0..=d).collect::<Vec<_>>()).expect("gap-free basis is valid")
    }

    /// All monomials of total degree at most `d` in `n` variables.
    pub fn total_degree(n: usize, d: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBasis(
                "variable count must be at least 1".into(),
            ));
        }
        let mut out = Vec::new();
        let mut current = vec![0u32; n];
        fn rec(pos: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos == current.len() {
                out.push(current.clone());
                return;
            }
            for e in 0..=left {
                current[pos] = e;
                rec(pos + 1, left - e, current, out);
            }
            current[pos] = 0;
        }
        rec(0, d, &mut current, &mut out);
        Self::new(n, out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn max_degree(&self) -> u32 {
        self.exponents.iter().map(|a| degree(a)).max().unwrap_or(0)
    }

    /// Univariate exponents `d_1 < … < d_m`, or `None` for `n > 1`.
    pub fn univariate_degrees(&self) -> Option<Vec<u32>> {
        (self.n == 1).then(|| self.exponents.iter().map(|a| a[0]).collect())
    }

    /// True for `{1, x, …, x^d}`.
    pub fn is_gap_free_univariate(&self) -> bool {
        match self.univariate_degrees() {
            Some(ds) => ds.iter().enumerate().all(|(i, &d)| d as usize == i),
            None => false,
        }
    }

    /// True for univariate `{x^{d_1}, x^{d_1+1}, …, x^{d_1+m-1}}`.
    pub fn is_consecutive_univariate(&self) -> bool {
        match self.univariate_degrees() {
            Some(ds) => ds.windows(2).all(|w| w[1] == w[0] + 1),
            None => false,
        }
    }

    /// Position of the constant monomial, if present.
    pub fn constant_index(&self) -> Option<usize> {
        self.exponents
            .iter()
            .position(|a| a.iter().all(|&e| e == 0))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `s_A(x)`: every basis monomial evaluated at `x`, with `0^0 = 1`.
    pub fn eval_point(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(DVector::from_iterator(
            self.m(),
            self.exponents.iter().map(|alpha| monomial(x, alpha)),
        ))
    }

    /// `m × n` matrix of partial derivatives `∂ x^{α_i} / ∂ x_j`.
    pub fn eval_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let mut jac = DMatrix::zeros(self.m(), self.n);
        for (i, alpha) in self.exponents.iter().enumerate() {
            for j in 0..self.n {
                if alpha[j] == 0 {
                    continue;
                }
                let mut value = f64::from(alpha[j]) * powu(x[j], alpha[j] - 1);
                for (l, (&xl, &al)) in x.iter().zip(alpha).enumerate() {
                    if l != j {
                        value *= powu(xl, al);
                    }
                }
                jac[(i, j)] = value;
            }
        }
        Ok(jac)
    }
}

/// `x^e` with `0^0 = 1`.
pub(crate) fn powu(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        _ => x.powi(e as i32),
    }
}

pub(crate) fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter().zip(alpha).map(|(&xi, &a)| powu(xi, a)).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gap() -> MonomialBasis {
        MonomialBasis::univariate(&[0, 2, 3, 5, 6]).unwrap()
    }

    #[test]
    fn zero_point_uses_zero_pow_zero_one() {
        let b = MonomialBasis::full_univariate(2);
        assert_eq!(b.eval_point(&[0.0]).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn gap_basis_at_one_and_two() {
        assert_eq!(gap().eval_point(&[1.0]).unwrap().as_slice(), &[1.0; 5]);
        let expected: Vec<f64> = [0, 2, 3, 5, 6].iter().map(|&e| 2f64.powi(e)).collect();
        assert_eq!(
            gap().eval_point(&[2.0]).unwrap().as_slice(),
            expected.as_slice()
        );
        assert_eq!(expected, vec![1.0, 4.0, 8.0, 32.0, 64.0]);
    }

    #[test]
    fn jacobian_examples() {
        let b = MonomialBasis::full_univariate(2);
        assert_eq!(
            b.eval_jacobian(&[3.0]).unwrap().as_slice(),
            &[0.0, 1.0, 6.0]
        );

        let jac = gap().eval_jacobian(&[1.0]).unwrap();
        let h = 1e-6;
        let plus = gap().eval_point(&[1.0 + h]).unwrap();
        let minus = gap().eval_point(&[1.0 - h]).unwrap();
        for i in 0..5 {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            assert!((jac[(i, 0)] - fd).abs() <= 1e-6 * fd.abs().max(1.0));
        }
        assert_eq!(jac.as_slice(), &[0.0, 2.0, 3.0, 5.0, 6.0]);

        let b2 = MonomialBasis::new(2, vec![vec![0, 0], vec![1, 0], vec![0, 1]]).unwrap();
        let j2 = b2.eval_jacobian(&[1.0, 1.0]).unwrap();
        assert_eq!(
            j2,
            DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let b = MonomialBasis::full_univariate(2);
        assert_eq!(
            b.eval_point(&[1.0, 2.0]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 1,
                got: 2
            }
        );
        assert!(b.eval_jacobian(&[]).is_err());
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(MonomialBasis::univariate(&[0, 1, 1]).is_err());
        assert!(MonomialBasis::univariate(&[]).is_err());
        assert!(MonomialBasis::new(0, vec![vec![]]).is_err());
        assert!(MonomialBasis::new(2, vec![vec![1]]).is_err());
    }

    #[test]
    fn graded_order_and_shape_queries() {
        let b = MonomialBasis::total_degree(2, 2).unwrap();
        assert_eq!(b.m(), 6);
        assert_eq!(
            b.exponents(),
            &[
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        assert_eq!(b.max_degree(), 2);
        assert!(MonomialBasis::full_univariate(4).is_gap_free_univariate());
        assert!(!gap().is_gap_free_univariate());
        assert!(MonomialBasis::univariate(&[3, 4, 5])
            .unwrap()
            .is_consecutive_univariate());
        assert_eq!(gap().constant_index(), Some(0));
    }

    #[test]
    fn json_literal_roundtrip() {
        let b: MonomialBasis =
            serde_json::from_str(r#"{"n":1, "exponents":[[0],[2],[3],[5],[6]]}"#).unwrap();
        assert_eq!(b, gap());
        let back: MonomialBasis =
            serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<MonomialBasis>(r#"{"n":1,"exponents":[[1],[1]]}"#).is_err());
    }
}
