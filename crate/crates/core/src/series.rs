//! Truncated power series in `u` over `F`, the Frobenius lift `φ: u ↦ f(u)`,
//! Weierstrass degree, divisibility by the Eisenstein polynomial `E(u)` and
//! the gauge `w_α` on `O_F[[u^{e₀p}/ϖ]][1/p]`.
//!
//! A series with cap `M` is known modulo `u^M`; each coefficient additionally
//! carries its own ϖ-adic precision.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::binomial;

use crate::error::{Error, Result};
use crate::scalars::{FElement, FieldSpec, OFElement, Valuation, EXACT};

pub const DEFAULT_ORDER: usize = 40;

#[derive(Clone)]
pub struct USeries {
    spec: Arc<FieldSpec>,
    coeffs: Vec<FElement>,
}

impl USeries {
    /// A series known modulo `u^{coeffs.len()}`.
    pub fn new(spec: &Arc<FieldSpec>, coeffs: Vec<FElement>) -> Self {
        USeries { spec: spec.clone(), coeffs }
    }

    /// A polynomial given by its first coefficients, padded with exact zeros
    /// up to `cap` (extra coefficients beyond `cap` are dropped).
    pub fn from_poly(spec: &Arc<FieldSpec>, coeffs: &[FElement], cap: usize) -> Self {
        let mut c: Vec<FElement> = coeffs.iter().take(cap).cloned().collect();
        c.resize(cap, FElement::zero(spec));
        USeries::new(spec, c)
    }

    pub fn from_of_poly(spec: &Arc<FieldSpec>, coeffs: &[OFElement], cap: usize) -> Self {
        let c: Vec<FElement> = coeffs.iter().cloned().map(FElement::from_of).collect();
        Self::from_poly(spec, &c, cap)
    }

    pub fn from_ints(spec: &Arc<FieldSpec>, coeffs: &[i64], cap: usize) -> Self {
        let c: Vec<FElement> = coeffs.iter().map(|&a| FElement::from_int(spec, a)).collect();
        Self::from_poly(spec, &c, cap)
    }

    pub fn zero(spec: &Arc<FieldSpec>, cap: usize) -> Self {
        Self::from_poly(spec, &[], cap)
    }

    pub fn one(spec: &Arc<FieldSpec>, cap: usize) -> Self {
        Self::constant(spec, FElement::one(spec), cap)
    }

    pub fn constant(spec: &Arc<FieldSpec>, c: FElement, cap: usize) -> Self {
        Self::from_poly(spec, &[c], cap)
    }

    /// `c·u^k`.
    pub fn monomial(spec: &Arc<FieldSpec>, c: FElement, k: usize, cap: usize) -> Self {
        let mut s = Self::zero(spec, cap);
        if k < cap {
            s.coeffs[k] = c;
        }
        s
    }

    /// The variable `u`.
    pub fn var(spec: &Arc<FieldSpec>, cap: usize) -> Self {
        Self::monomial(spec, FElement::one(spec), 1, cap)
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    pub fn cap(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[FElement] {
        &self.coeffs
    }

    /// Coefficient of `u^i`; `None` beyond the cap.
    pub fn coeff(&self, i: usize) -> Option<&FElement> {
        self.coeffs.get(i)
    }

    /// Number of leading coefficients that are exactly zero.
    pub fn ord(&self) -> usize {
        self.coeffs.iter().take_while(|c| c.is_exact_zero()).count()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(FElement::is_zero)
    }

    pub fn is_exact(&self) -> bool {
        self.coeffs.iter().all(FElement::is_exact)
    }

    /// Smallest coefficient valuation (a lower bound when some coefficients
    /// are zero at precision).
    pub fn min_valuation(&self) -> Valuation {
        self.coeffs
            .iter()
            .fold(Valuation::Infinite, |acc, c| acc.min(c.valuation()))
    }

    /// Every coefficient certainly lies in `O_F`.
    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(FElement::is_integral)
    }

    /// Smallest absolute precision among the coefficients.
    pub fn min_prec(&self) -> i64 {
        self.coeffs.iter().map(FElement::abs_prec).min().unwrap_or(EXACT)
    }

    pub fn truncate(&self, cap: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.truncate(cap);
        USeries::new(&self.spec, c)
    }

    /// Lower every coefficient to absolute precision at most `prec`.
    pub fn cap_prec(&self, prec: i64) -> Self {
        self.map(|c| c.cap_prec(prec))
    }

    pub fn map(&self, f: impl Fn(&FElement) -> FElement) -> Self {
        USeries::new(&self.spec, self.coeffs.iter().map(f).collect())
    }

    pub fn scale(&self, c: &FElement) -> Self {
        self.map(|a| a * c)
    }

    /// Multiply by `u^k`.
    pub fn shift_u(&self, k: usize) -> Self {
        let mut c = vec![FElement::zero(&self.spec); k];
        c.extend(self.coeffs.iter().cloned());
        USeries::new(&self.spec, c)
    }

    pub fn add(&self, other: &USeries) -> Self {
        let cap = self.cap().min(other.cap());
        let c = (0..cap).map(|i| &self.coeffs[i] + &other.coeffs[i]).collect();
        USeries::new(&self.spec, c)
    }

    pub fn sub(&self, other: &USeries) -> Self {
        let cap = self.cap().min(other.cap());
        let c = (0..cap).map(|i| &self.coeffs[i] - &other.coeffs[i]).collect();
        USeries::new(&self.spec, c)
    }

    pub fn neg(&self) -> Self {
        self.map(|a| -a)
    }

    /// Product; the cap is the largest one the inputs determine.
    pub fn mul(&self, other: &USeries) -> Self {
        let cap = (self.cap() + other.ord())
            .min(other.cap() + self.ord())
            .min(self.cap().max(other.cap()));
        USeries::new(&self.spec, mul_truncated(&self.spec, &self.coeffs, &other.coeffs, cap))
    }

    pub fn pow(&self, k: u64) -> Self {
        let mut acc = USeries::one(&self.spec, self.cap());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// `h ∘ g`; the inner series must have zero constant term.
    pub fn compose(&self, g: &USeries) -> Result<Self> {
        let g0 = g.coeffs.first().ok_or_else(|| Error::InvalidInput("composition with an empty series".into()))?;
        if !g0.is_exact_zero() {
            if g0.is_zero() {
                return Err(Error::PrecisionExhausted(
                    "constant term of the inner series is only known to be small".into(),
                ));
            }
            return Err(Error::NonzeroConstantTerm);
        }
        let o = g.ord().max(1);
        let cap = self.cap().saturating_mul(o).min(g.cap());
        let mut acc: Vec<FElement> = vec![FElement::zero(&self.spec); cap];
        for k in (0..self.cap()).rev() {
            // terms h_k g^k with k·o ≥ cap cannot reach the output
            if k.saturating_mul(o) >= cap && k > 0 {
                continue;
            }
            acc = mul_truncated(&self.spec, &acc, &g.coeffs, cap);
            if cap > 0 {
                acc[0] = &acc[0] + &self.coeffs[k];
            }
        }
        Ok(USeries::new(&self.spec, acc))
    }

    /// Congruence of the common prefix at the coefficients' precisions.
    pub fn eq_at_prec(&self, other: &USeries) -> bool {
        self.sub(other).is_zero()
    }

    /// Least `n` with `c_n` a unit; `None` when the reduction mod ϖ vanishes
    /// up to the cap.
    pub fn wdeg(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| c.valuation() == Valuation::Exact(0))
    }

    /// `w_α(x) = min_n (v_F(c_n) + ⌊n/(e₀p)⌋)`.
    pub fn gauge_alpha(&self, e0: usize) -> Valuation {
        let step = e0 * self.spec.p() as usize;
        self.coeffs
            .iter()
            .enumerate()
            .fold(Valuation::Infinite, |acc, (n, c)| acc.min(c.valuation().shift((n / step) as i64)))
    }

    /// Value at `u = 0`.
    pub fn constant_term(&self) -> Option<&FElement> {
        self.coeffs.first()
    }
}

/// Truncated product of coefficient lists, skipping exact zeros.
pub(crate) fn mul_truncated(spec: &Arc<FieldSpec>, a: &[FElement], b: &[FElement], cap: usize) -> Vec<FElement> {
    let mut out = vec![FElement::zero(spec); cap];
    let bnz: Vec<(usize, &FElement)> = b.iter().enumerate().filter(|(_, c)| !c.is_exact_zero()).collect();
    for (i, ai) in a.iter().enumerate().take(cap) {
        if ai.is_exact_zero() {
            continue;
        }
        for &(j, bj) in &bnz {
            if i + j >= cap {
                break;
            }
            out[i + j] = &out[i + j] + &(ai * bj);
        }
    }
    out
}

impl fmt::Debug for USeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for USeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            terms.push(match i {
                0 => format!("({c})"),
                1 => format!("({c})·u"),
                _ => format!("({c})·u^{i}"),
            });
        }
        terms.push(format!("O(u^{})", self.cap()));
        write!(f, "{}", terms.join(" + "))
    }
}

/// `f(u) = u^p + a_{p-1}u^{p-1} + … + a_1 u` with every `a_i ≡ 0 mod ϖ`.
#[derive(Clone, Debug)]
pub struct FrobLift {
    spec: Arc<FieldSpec>,
    coeffs: Vec<OFElement>,
}

impl FrobLift {
    /// `coeffs` lists `a_1, …, a_p`.
    pub fn new(spec: &Arc<FieldSpec>, coeffs: Vec<OFElement>) -> Result<Self> {
        let p = spec.p() as usize;
        if coeffs.len() != p {
            return Err(Error::InvalidInput(format!(
                "a Frobenius lift needs {p} coefficients a_1..a_p, got {}",
                coeffs.len()
            )));
        }
        if !(&coeffs[p - 1] - &OFElement::one(spec)).is_exact_zero() {
            return Err(Error::InvalidInput("leading coefficient a_p must be 1".into()));
        }
        for (i, a) in coeffs[..p - 1].iter().enumerate() {
            if a.valuation().lower_bound() < 1 {
                return Err(Error::InvalidInput(format!("a_{} is not divisible by ϖ", i + 1)));
            }
        }
        Ok(FrobLift { spec: spec.clone(), coeffs })
    }

    pub fn from_ints(spec: &Arc<FieldSpec>, coeffs: &[i64]) -> Result<Self> {
        Self::new(spec, coeffs.iter().map(|&a| OFElement::from_int(spec, a)).collect())
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    pub fn p(&self) -> u64 {
        self.spec.p()
    }

    /// `a_i` for `1 ≤ i ≤ p`.
    pub fn a(&self, i: usize) -> &OFElement {
        &self.coeffs[i - 1]
    }

    pub fn coeffs(&self) -> &[OFElement] {
        &self.coeffs
    }

    /// Lowest index `s` with `a_s ≠ 0`.
    pub fn lowest_index(&self) -> usize {
        self.coeffs.iter().position(|a| !a.is_zero()).map(|i| i + 1).unwrap_or(self.coeffs.len())
    }

    /// `f(u)` modulo `u^cap`.
    pub fn series(&self, cap: usize) -> USeries {
        let mut c = vec![OFElement::zero(&self.spec)];
        c.extend(self.coeffs.iter().cloned());
        USeries::from_of_poly(&self.spec, &c, cap)
    }

    /// `f(u)/u` modulo `u^cap`.
    pub fn f0_series(&self, cap: usize) -> USeries {
        USeries::from_of_poly(&self.spec, &self.coeffs, cap)
    }

    /// `φⁿ(x)`: substitute `u ↦ f(u)` `n` times.
    pub fn frobenius(&self, x: &USeries, n: usize) -> USeries {
        let mut y = x.clone();
        for _ in 0..n {
            let f = self.series(y.cap());
            y = y.compose(&f).expect("f has zero constant term");
        }
        y
    }

    /// The `n`-fold iterate `f^{(n)}(u)` modulo `u^cap`.
    pub fn iterate(&self, n: usize, cap: usize) -> USeries {
        self.frobenius(&USeries::var(&self.spec, cap), n)
    }
}

/// Monic `E(u) = u^{e₀} + … + c₀` with non-leading coefficients in `ϖO_F`.
#[derive(Clone, Debug)]
pub struct EisensteinE {
    spec: Arc<FieldSpec>,
    coeffs: Vec<OFElement>,
}

impl EisensteinE {
    /// `coeffs` lists `c_0, …, c_{e₀}` with `c_{e₀} = 1`.
    pub fn new(spec: &Arc<FieldSpec>, coeffs: Vec<OFElement>) -> Result<Self> {
        let e = Self::new_unchecked(spec, coeffs)?;
        for (i, c) in e.coeffs[..e.degree()].iter().enumerate() {
            if c.valuation().lower_bound() < 1 {
                return Err(Error::InvalidInput(format!("coefficient {i} of E is a unit")));
            }
        }
        if e.coeffs[0].is_zero() {
            return Err(Error::InvalidInput("E(0) vanishes".into()));
        }
        Ok(e)
    }

    /// Only checks that the polynomial is monic of positive degree.
    pub fn new_unchecked(spec: &Arc<FieldSpec>, coeffs: Vec<OFElement>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput("E must have positive degree".into()));
        }
        if !(coeffs.last().unwrap() - &OFElement::one(spec)).is_exact_zero() {
            return Err(Error::InvalidInput("E must be monic".into()));
        }
        Ok(EisensteinE { spec: spec.clone(), coeffs })
    }

    pub fn from_ints(spec: &Arc<FieldSpec>, coeffs: &[i64]) -> Result<Self> {
        Self::new(spec, coeffs.iter().map(|&a| OFElement::from_int(spec, a)).collect())
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    /// `e₀ = deg E`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[OFElement] {
        &self.coeffs
    }

    /// `c₀ = E(0)`.
    pub fn c0(&self) -> &OFElement {
        &self.coeffs[0]
    }

    /// True when `v_F(E(0)) = 1`.
    pub fn is_eisenstein(&self) -> bool {
        self.coeffs[..self.degree()].iter().all(|c| c.valuation().lower_bound() >= 1)
            && self.coeffs[0].valuation() == Valuation::Exact(1)
    }

    pub fn series(&self, cap: usize) -> USeries {
        USeries::from_of_poly(&self.spec, &self.coeffs, cap)
    }

    /// Divide by `E` once: `x = E·q + r` with `deg r < e₀`, coefficient
    /// precisions reduced to what the unknown tail `O(u^cap)` leaves certain.
    pub fn div_rem(&self, x: &USeries) -> (USeries, Vec<FElement>) {
        let e0 = self.degree();
        let m = x.cap();
        let spec = &self.spec;
        let mut cur: Vec<FElement> = x.coeffs().to_vec();
        let mut q = vec![FElement::zero(spec); m.saturating_sub(e0)];
        let ecoef: Vec<FElement> = self.coeffs.iter().cloned().map(FElement::from_of).collect();
        for k in (e0..m).rev() {
            let t = cur[k].clone();
            if t.is_exact_zero() {
                continue;
            }
            q[k - e0] = t.clone();
            for (i, c) in ecoef.iter().enumerate().take(e0) {
                if !c.is_exact_zero() {
                    cur[k - e0 + i] = &cur[k - e0 + i] - &(&t * c);
                }
            }
            cur[k] = FElement::zero(spec);
        }
        cur.truncate(e0.min(m));
        // The tail Σ_{k≥m} t_k u^k reduces modulo E to coefficients of
        // valuation ≥ ⌈(k-j)/e₀⌉ + v(t_k).
        let tail = x.min_valuation().lower_bound().min(0);
        let e0i = e0 as i64;
        let mi = m as i64;
        let rem = cur
            .iter()
            .enumerate()
            .map(|(j, c)| c.cap_prec(num_integer::Integer::div_ceil(&(mi - j as i64), &e0i) + tail))
            .collect();
        let quo = q
            .iter()
            .enumerate()
            .map(|(t, c)| c.cap_prec(num_integer::Integer::div_ceil(&(mi - e0i - t as i64), &e0i) + tail))
            .collect();
        (USeries::new(spec, quo), rem)
    }

    /// Largest `k` with `E^k | x` at the available precision, and `x/E^k`.
    pub fn e_order(&self, x: &USeries) -> Result<(usize, USeries)> {
        if x.is_zero() {
            return Err(Error::Indeterminate("series is zero at its precision".into()));
        }
        let e0 = self.degree();
        let mut k = 0;
        let mut cur = x.clone();
        loop {
            if cur.cap() < e0 {
                if cur.wdeg() == Some(0) {
                    return Ok((k, cur));
                }
                return Err(Error::Indeterminate(format!(
                    "u-adic cap exhausted after dividing by E^{k}"
                )));
            }
            let (q, r) = self.div_rem(&cur);
            if !r.iter().all(FElement::is_zero) {
                return Ok((k, cur));
            }
            if r.iter().any(|c| c.abs_prec() < 1) {
                return Err(Error::Indeterminate(format!(
                    "remainder of division number {} vanishes only for lack of precision",
                    k + 1
                )));
            }
            if q.is_zero() {
                return Err(Error::Indeterminate(format!("cofactor after E^{} is zero at precision", k + 1)));
            }
            cur = q;
            k += 1;
        }
    }
}

/// The named Frobenius lifts with their companion Eisenstein polynomials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `f = u^p`, `E = u^{p-1} + ϖ`
    Classical,
    /// `f = (1+u)^p - 1`, `E = f/u`
    Cyclotomic,
    /// `f = u^p + ϖu`, `E = u^{p-1} + ϖ`
    LubinTate,
    /// `f = (u-p)^{p-1}u`, `E = f - p`
    Twisted,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Classical, Preset::Cyclotomic, Preset::LubinTate, Preset::Twisted];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Classical => "classical",
            Preset::Cyclotomic => "cyclotomic",
            Preset::LubinTate => "lubin-tate",
            Preset::Twisted => "twisted",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset '{name}'")))
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::Classical => "f = u^p, E = u^(p-1) + ϖ",
            Preset::Cyclotomic => "f = (1+u)^p - 1, E = f/u",
            Preset::LubinTate => "f = u^p + ϖu, E = u^(p-1) + ϖ",
            Preset::Twisted => "f = (u-p)^(p-1) u, E = f - p",
        }
    }

    /// `a_1, …, a_p`.
    pub fn frob_lift(self, spec: &Arc<FieldSpec>) -> FrobLift {
        let p = spec.p() as usize;
        let pb = BigInt::from(spec.p());
        let coeffs: Vec<OFElement> = match self {
            Preset::Classical => (1..=p).map(|i| OFElement::from_int(spec, (i == p) as i64)).collect(),
            Preset::Cyclotomic => (1..=p)
                .map(|i| OFElement::from_int(spec, binomial(pb.clone(), BigInt::from(i))))
                .collect(),
            Preset::LubinTate => {
                let mut c: Vec<OFElement> =
                    (1..=p).map(|i| OFElement::from_int(spec, (i == p) as i64)).collect();
                c[0] = OFElement::uniformizer(spec);
                c
            }
            Preset::Twisted => (1..=p)
                .map(|i| {
                    // coefficient of u^{i-1} in (u - p)^{p-1}
                    let b = binomial(BigInt::from(p - 1), BigInt::from(i - 1));
                    let sign = if (p - i) % 2 == 0 { 1 } else { -1 };
                    OFElement::from_int(spec, b * num_traits::pow(pb.clone(), p - i) * sign)
                })
                .collect(),
        };
        FrobLift::new(spec, coeffs).expect("preset lifts are valid")
    }

    pub fn eisenstein(self, spec: &Arc<FieldSpec>) -> EisensteinE {
        let p = spec.p() as usize;
        let coeffs: Vec<OFElement> = match self {
            Preset::Classical | Preset::LubinTate => {
                let mut c = vec![OFElement::zero(spec); p - 1];
                c[0] = OFElement::uniformizer(spec);
                c.push(OFElement::one(spec));
                c
            }
            Preset::Cyclotomic => self.frob_lift(spec).coeffs().to_vec(),
            Preset::Twisted => {
                let f = self.frob_lift(spec);
                let mut c = vec![OFElement::from_int(spec, -(spec.p() as i64))];
                c.extend(f.coeffs().iter().cloned());
                c
            }
        };
        EisensteinE::new(spec, coeffs).expect("preset polynomials are valid")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
