//! Truncated elements of the perfection `F_p[[t^{1/p^∞}]]`, used as a model of
//! `R` with `t = ū`.
//!
//! Exponents are stored as numerators over the fixed denominator `p^J`.
//! Terms with exponent above `A_max` are dropped and the loss is recorded as
//! a precision: a series with precision `P` is known modulo `t^{P/p^J}`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};

/// Root levels `J` and exponent bound `A_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PerfBudget {
    pub root_levels: u32,
    pub exp_bound: u64,
}

impl Default for PerfBudget {
    fn default() -> Self {
        PerfBudget { root_levels: 6, exp_bound: 32 }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct PerfSeries {
    p: u64,
    budget: PerfBudget,
    den: u64,
    terms: BTreeMap<u64, u64>,
    /// `None` for exactly known series.
    prec: Option<u64>,
}

impl PerfSeries {
    pub fn zero(p: u64, budget: PerfBudget) -> Self {
        let den = p.pow(budget.root_levels);
        PerfSeries { p, budget, den, terms: BTreeMap::new(), prec: None }
    }

    pub fn constant(p: u64, budget: PerfBudget, c: u64) -> Self {
        Self::monomial_num(p, budget, c, 0)
    }

    pub fn one(p: u64, budget: PerfBudget) -> Self {
        Self::constant(p, budget, 1)
    }

    /// `c·t^{num/p^J}`.
    pub fn monomial_num(p: u64, budget: PerfBudget, c: u64, num: u64) -> Self {
        let mut s = Self::zero(p, budget);
        s.insert(num, c % p);
        s.clip();
        s
    }

    /// `c·t^{num/p^k}`; fails when `k` exceeds the root budget.
    pub fn monomial(p: u64, budget: PerfBudget, c: u64, num: u64, den_pow: u32) -> Result<Self> {
        if den_pow > budget.root_levels {
            return Err(Error::BudgetExhausted(format!(
                "exponent denominator p^{den_pow} exceeds p^{}",
                budget.root_levels
            )));
        }
        let scale = p.pow(budget.root_levels - den_pow);
        Ok(Self::monomial_num(p, budget, c, num * scale))
    }

    /// The variable `t = ū`.
    pub fn var(p: u64, budget: PerfBudget) -> Self {
        let den = p.pow(budget.root_levels);
        Self::monomial_num(p, budget, 1, den)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn budget(&self) -> PerfBudget {
        self.budget
    }

    /// Common denominator `p^J` of the exponents.
    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn terms(&self) -> &BTreeMap<u64, u64> {
        &self.terms
    }

    pub fn prec_num(&self) -> Option<u64> {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec.is_none()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.is_zero() && self.is_exact()
    }

    fn bound(&self) -> u64 {
        self.budget.exp_bound * self.den
    }

    fn insert(&mut self, k: u64, c: u64) {
        if c == 0 {
            return;
        }
        let e = self.terms.entry(k).or_insert(0);
        *e = (*e + c) % self.p;
        if *e == 0 {
            self.terms.remove(&k);
        }
    }

    /// Enforce `exponent ≤ A_max` and drop terms at or above the precision.
    fn clip(&mut self) {
        let bound = self.bound();
        if self.terms.range(bound + 1..).next().is_some() {
            self.terms.retain(|&k, _| k <= bound);
            self.prec = Some(self.prec.map_or(bound + 1, |q| q.min(bound + 1)));
        }
        if let Some(q) = self.prec {
            self.terms.retain(|&k, _| k < q);
        }
    }

    /// Lowest exponent numerator; for a zero at precision, the precision.
    pub fn valuation_num(&self) -> Option<u64> {
        self.terms.keys().next().copied().or(self.prec)
    }

    /// `v_t` of the series as an exact rational (`None` for exact zero or when
    /// only a lower bound is known).
    pub fn valuation(&self) -> Option<BigRational> {
        self.terms
            .keys()
            .next()
            .map(|&k| BigRational::new(BigInt::from(k), BigInt::from(self.den)))
    }

    pub fn lowest_term(&self) -> Option<(u64, u64)> {
        self.terms.iter().next().map(|(&k, &c)| (k, c))
    }

    fn check(&self, other: &PerfSeries) {
        assert!(self.p == other.p && self.budget == other.budget, "perfection series from different rings");
    }

    pub fn add(&self, other: &PerfSeries) -> PerfSeries {
        self.check(other);
        let mut out = self.clone();
        out.prec = min_prec(self.prec, other.prec);
        for (&k, &c) in &other.terms {
            out.insert(k, c);
        }
        out.clip();
        out
    }

    pub fn neg(&self) -> PerfSeries {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = (self.p - *c) % self.p;
        }
        out
    }

    pub fn sub(&self, other: &PerfSeries) -> PerfSeries {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: u64) -> PerfSeries {
        let c = c % self.p;
        if c == 0 {
            let mut z = PerfSeries::zero(self.p, self.budget);
            z.prec = self.prec;
            return z;
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = (*v * c) % self.p;
        }
        out
    }

    pub fn mul(&self, other: &PerfSeries) -> PerfSeries {
        self.check(other);
        let mut out = PerfSeries::zero(self.p, self.budget);
        // (a + O(t^Pa))(b + O(t^Pb)) is known modulo t^{min(Pa + v(b), Pb + v(a))}
        let pa = self.prec.map(|q| q + other.valuation_num().unwrap_or(u64::MAX / 4));
        let pb = other.prec.map(|q| q + self.valuation_num().unwrap_or(u64::MAX / 4));
        out.prec = min_prec(pa, pb);
        if self.is_exact_zero() || other.is_exact_zero() {
            return PerfSeries::zero(self.p, self.budget);
        }
        let limit = out.prec.unwrap_or(u64::MAX).min(self.bound() + 1);
        for (&ka, &ca) in &self.terms {
            if ka >= limit {
                break;
            }
            for (&kb, &cb) in &other.terms {
                let k = ka + kb;
                if k >= limit {
                    if limit == self.bound() + 1 && out.prec.is_none_or(|q| q > limit) {
                        out.prec = Some(limit);
                    }
                    break;
                }
                out.insert(k, ca * cb % self.p);
            }
        }
        out.clip();
        out
    }

    /// `x^e`, via `x^{Σ d_i p^i} = Π φ^i(x)^{d_i}`.
    pub fn pow(&self, e: u64) -> PerfSeries {
        let mut acc = PerfSeries::one(self.p, self.budget);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            let d = e % self.p;
            for _ in 0..d {
                acc = acc.mul(&base);
            }
            e /= self.p;
            if e > 0 {
                base = base.frob();
            }
        }
        acc
    }

    /// Absolute Frobenius `x ↦ x^p`.
    pub fn frob(&self) -> PerfSeries {
        let mut out = PerfSeries::zero(self.p, self.budget);
        out.prec = self.prec.map(|q| q.saturating_mul(self.p));
        for (&k, &c) in &self.terms {
            out.terms.insert(k * self.p, c);
        }
        out.clip();
        out
    }

    /// `x ↦ x^{1/p}`; fails when an exponent would leave the root budget.
    pub fn frob_inv(&self) -> Result<PerfSeries> {
        let mut out = PerfSeries::zero(self.p, self.budget);
        out.prec = self.prec.map(|q| q.div_ceil(self.p));
        for (&k, &c) in &self.terms {
            if k % self.p != 0 {
                return Err(Error::BudgetExhausted(format!(
                    "p-th root of t^({k}/{}) needs more than {} root levels",
                    self.den, self.budget.root_levels
                )));
            }
            out.terms.insert(k / self.p, c);
        }
        out.clip();
        Ok(out)
    }

    /// Lower the precision to `t^{num/p^J}`.
    pub fn truncate_num(&self, num: u64) -> PerfSeries {
        let mut out = self.clone();
        out.prec = min_prec(self.prec, Some(num));
        out.clip();
        out
    }

    /// Agreement below the smaller of the two precisions.
    pub fn eq_at_prec(&self, other: &PerfSeries) -> bool {
        self.sub(other).is_zero()
    }

    /// Evaluate at `t = 0` with `t^α` read literally: the constant term.
    pub fn constant_term(&self) -> u64 {
        self.terms.get(&0).copied().unwrap_or(0)
    }
}

fn min_prec(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl fmt::Debug for PerfSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PerfSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .terms
            .iter()
            .map(|(&k, &c)| {
                let q = BigRational::new(BigInt::from(k), BigInt::from(self.den));
                if k == 0 {
                    format!("{c}")
                } else {
                    format!("{c}·t^({q})")
                }
            })
            .collect();
        if let Some(q) = self.prec {
            parts.push(format!("O(t^({}))", BigRational::new(BigInt::from(q), BigInt::from(self.den))));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const B: PerfBudget = PerfBudget { root_levels: 3, exp_bound: 8 };

    fn t(p: u64) -> PerfSeries {
        PerfSeries::var(p, B)
    }

    #[test]
    fn frobenius_and_roots() {
        let x = t(3);
        let root = x.frob_inv().unwrap();
        assert_eq!(root.valuation().unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(root.frob(), x);
        let deep = PerfSeries::monomial(3, B, 1, 1, 3).unwrap();
        assert!(matches!(deep.frob_inv(), Err(Error::BudgetExhausted(_))));
        assert!(PerfSeries::monomial(3, B, 1, 1, 4).is_err());
    }

    #[test]
    fn truncation_sets_precision() {
        let x = t(2).pow(5);
        let y = x.mul(&x);
        assert!(y.is_zero());
        assert_eq!(y.prec_num(), Some(8 * 8 + 1));
        let sq = x.frob();
        assert!(sq.is_zero());
        assert!(!sq.is_exact());
    }

    #[test]
    fn char_p_binomial() {
        // (1 + t)^3 = 1 + t^3 in characteristic 3
        let one_t = PerfSeries::one(3, B).add(&t(3));
        assert_eq!(one_t.pow(3), PerfSeries::one(3, B).add(&t(3).frob()));
        assert_eq!(one_t.mul(&one_t).mul(&one_t), one_t.frob());
    }

    fn arb(p: u64) -> impl Strategy<Value = PerfSeries> {
        prop::collection::vec((0u64..(3 * 27), 0u64..p), 0..6).prop_map(move |ts| {
            ts.into_iter().fold(PerfSeries::zero(p, B), |acc, (k, c)| {
                acc.add(&PerfSeries::monomial_num(p, B, c, k))
            })
        })
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb(3), b in arb(3), c in arb(3)) {
            prop_assert!(a.mul(&b).mul(&c).eq_at_prec(&a.mul(&b.mul(&c))));
            prop_assert!(a.mul(&b.add(&c)).eq_at_prec(&a.mul(&b).add(&a.mul(&c))));
            prop_assert!(a.frob().eq_at_prec(&a.pow(3)));
            prop_assert!(a.add(&b).frob().eq_at_prec(&a.frob().add(&b.frob())));
        }

        #[test]
        fn roots_invert_frobenius(a in arb(3)) {
            let a = a.frob();
            prop_assert!(a.frob_inv().unwrap().frob().eq_at_prec(&a));
        }
    }
}
