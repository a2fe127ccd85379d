//! Small square matrices over truncated `F[[u]]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalars::{FElement, FieldSpec, Valuation};
use crate::series::{FrobLift, USeries};

#[derive(Clone)]
pub struct SeriesMatrix {
    d: usize,
    entries: Vec<USeries>,
}

impl SeriesMatrix {
    pub fn from_rows(rows: Vec<Vec<USeries>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("matrix must be square and nonempty".into()));
        }
        let spec = rows[0][0].spec().clone();
        if rows.iter().flatten().any(|x| !FieldSpec::same_field(x.spec(), &spec)) {
            return Err(Error::SpecMismatch);
        }
        Ok(SeriesMatrix { d, entries: rows.into_iter().flatten().collect() })
    }

    pub fn identity(spec: &Arc<FieldSpec>, d: usize, cap: usize) -> Self {
        Self::diagonal(&vec![USeries::one(spec, cap); d])
    }

    pub fn diagonal(diag: &[USeries]) -> Self {
        let d = diag.len();
        let spec = diag[0].spec();
        let cap = diag.iter().map(USeries::cap).max().unwrap_or(0);
        let mut entries = vec![USeries::zero(spec, cap); d * d];
        for (i, x) in diag.iter().enumerate() {
            entries[i * d + i] = x.clone();
        }
        SeriesMatrix { d, entries }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        self.entries[0].spec()
    }

    pub fn get(&self, i: usize, j: usize) -> &USeries {
        &self.entries[i * self.d + j]
    }

    pub fn entries(&self) -> &[USeries] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<USeries>> {
        self.entries.chunks(self.d).map(<[USeries]>::to_vec).collect()
    }

    pub fn cap(&self) -> usize {
        self.entries.iter().map(USeries::cap).min().unwrap_or(0)
    }

    pub fn map(&self, f: impl Fn(&USeries) -> USeries) -> Self {
        SeriesMatrix { d: self.d, entries: self.entries.iter().map(f).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&USeries) -> Result<USeries>) -> Result<Self> {
        Ok(SeriesMatrix { d: self.d, entries: self.entries.iter().map(f).collect::<Result<_>>()? })
    }

    pub fn truncate(&self, cap: usize) -> Self {
        self.map(|x| x.truncate(cap))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, USeries::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, USeries::sub)
    }

    fn zip(&self, other: &Self, op: impl Fn(&USeries, &USeries) -> USeries) -> Self {
        assert_eq!(self.d, other.d, "dimension mismatch");
        SeriesMatrix { d: self.d, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| op(a, b)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d, "dimension mismatch");
        let d = self.d;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = self.get(i, 0).mul(other.get(0, j));
                for k in 1..d {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
                }
                entries.push(acc);
            }
        }
        SeriesMatrix { d, entries }
    }

    pub fn scale(&self, c: &FElement) -> Self {
        self.map(|x| x.scale(c))
    }

    /// Entrywise `φ`.
    pub fn frobenius(&self, f: &FrobLift) -> Self {
        self.map(|x| f.frobenius(x, 1))
    }

    /// Entrywise composition with `g`.
    pub fn compose(&self, g: &USeries) -> Result<Self> {
        self.try_map(|x| x.compose(g))
    }

    /// The matrix of constant terms, as series of the same cap.
    pub fn constant_part(&self) -> Self {
        let cap = self.cap();
        self.map(|x| USeries::constant(x.spec(), x.coeff(0).cloned().unwrap_or_else(|| FElement::zero(x.spec())), cap))
    }

    fn minor(&self, row: usize, col: usize) -> Self {
        let d = self.d;
        let entries = (0..d)
            .filter(|&i| i != row)
            .flat_map(|i| (0..d).filter(move |&j| j != col).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).clone())
            .collect();
        SeriesMatrix { d: d - 1, entries }
    }

    /// Cofactor expansion along the first row.
    pub fn det(&self) -> USeries {
        if self.d == 1 {
            return self.entries[0].clone();
        }
        let mut acc: Option<USeries> = None;
        for j in 0..self.d {
            let term = self.get(0, j).mul(&self.minor(0, j).det());
            acc = Some(match acc {
                None => term,
                Some(a) if j % 2 == 0 => a.add(&term),
                Some(a) => a.sub(&term),
            });
        }
        acc.expect("nonempty")
    }

    /// `adj(A)` with `A·adj(A) = det(A)·I`.
    pub fn adjugate(&self) -> Self {
        let d = self.d;
        if d == 1 {
            return SeriesMatrix::identity(self.spec(), 1, self.cap());
        }
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let c = self.minor(j, i).det();
                entries.push(if (i + j) % 2 == 0 { c } else { c.neg() });
            }
        }
        SeriesMatrix { d, entries }
    }

    /// Inverse of a matrix whose determinant is invertible in `F[[u]]`,
    /// i.e. has a nonzero constant term.
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        let c0 = det.coeff(0).cloned().unwrap_or_else(|| FElement::zero(self.spec()));
        if !c0.is_zero() {
            let inv = series_inverse(&det)?;
            return Ok(self.adjugate().map(|x| x.mul(&inv)));
        }
        Err(Error::PrecisionExhausted("determinant has no invertible constant term".into()))
    }

    /// `w_α`-gauge, the minimum over entries.
    pub fn gauge_alpha(&self, e0: usize) -> Valuation {
        self.entries.iter().map(|x| x.gauge_alpha(e0)).fold(Valuation::Infinite, Valuation::min)
    }

    pub fn min_valuation(&self) -> Valuation {
        self.entries.iter().map(USeries::min_valuation).fold(Valuation::Infinite, Valuation::min)
    }

    pub fn is_integral(&self) -> bool {
        self.entries.iter().all(USeries::is_integral)
    }

    pub fn eq_at_prec(&self, other: &Self) -> bool {
        self.d == other.d && self.entries.iter().zip(&other.entries).all(|(a, b)| a.eq_at_prec(b))
    }

    /// Block-diagonal sum.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let d = self.d + other.d;
        let cap = self.cap().max(other.cap());
        let spec = self.spec();
        let mut rows = vec![vec![USeries::zero(spec, cap); d]; d];
        for i in 0..self.d {
            for j in 0..self.d {
                rows[i][j] = self.get(i, j).clone();
            }
        }
        for i in 0..other.d {
            for j in 0..other.d {
                rows[self.d + i][self.d + j] = other.get(i, j).clone();
            }
        }
        SeriesMatrix { d, entries: rows.into_iter().flatten().collect() }
    }
}

/// `1/x` for a series with nonzero constant term.
pub fn series_inverse(x: &USeries) -> Result<USeries> {
    let cap = x.cap();
    let spec = x.spec();
    let c0 = x.coeff(0).ok_or_else(|| Error::InvalidInput("empty series".into()))?;
    let inv0 = c0.inv()?;
    let mut out = vec![FElement::zero(spec); cap];
    if cap == 0 {
        return Ok(USeries::new(spec, out));
    }
    out[0] = inv0.clone();
    for n in 1..cap {
        let mut acc = FElement::zero(spec);
        for k in 1..=n {
            let c = &x.coeffs()[k];
            if !c.is_exact_zero() {
                acc = &acc + &(c * &out[n - k]);
            }
        }
        out[n] = -&(&acc * &inv0);
    }
    Ok(USeries::new(spec, out))
}

impl fmt::Debug for SeriesMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.chunks(self.d)).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(spec: &Arc<FieldSpec>, rows: &[&[&[i64]]], cap: usize) -> SeriesMatrix {
        SeriesMatrix::from_rows(
            rows.iter().map(|r| r.iter().map(|c| USeries::from_ints(spec, c, cap)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn det_and_adjugate() {
        let s = FieldSpec::unramified(3).unwrap();
        let a = m(&s, &[&[&[1, 1], &[0, 2]], &[&[3], &[1, 0, 1]]], 10);
        let det = a.det();
        assert!(det.eq_at_prec(&USeries::from_ints(&s, &[1, -5, 1, 1], 10)));
        let prod = a.mul(&a.adjugate());
        assert!(prod.eq_at_prec(&SeriesMatrix::identity(&s, 2, 10).map(|x| x.mul(&det))));
        let b = m(&s, &[&[&[2], &[1], &[0]], &[&[0], &[1], &[1, 1]], &[&[1], &[0], &[1]]], 6);
        assert!(b.mul(&b.adjugate()).eq_at_prec(&SeriesMatrix::identity(&s, 3, 6).map(|x| x.mul(&b.det()))));
    }

    #[test]
    fn inverse_of_unit_determinant() {
        let s = FieldSpec::unramified(5).unwrap();
        let a = m(&s, &[&[&[1, 1], &[0, 2]], &[&[5], &[1, 0, 1]]], 12);
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).eq_at_prec(&SeriesMatrix::identity(&s, 2, 12)));
    }
}
