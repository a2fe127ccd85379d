//! Exact arithmetic in `O_F = Z_p[ϖ]` for a totally ramified `F/Q_p` and in
//! its fraction field, with absolute ϖ-adic precision tracking.
//!
//! An [`OFElement`] is stored in the `Z`-basis `1, ϖ, …, ϖ^{e-1}` of
//! `Z[ϖ] = Z[x]/(g)`. An element known modulo `ϖ^N` keeps the coefficient of
//! `ϖ^i` modulo `p^{⌈(N-i)/e⌉}`, which is exactly the ideal `ϖ^N O_F`. Elements
//! built from integers are *exact* (precision [`EXACT`]) and stay exact under
//! ring operations.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Precision marker for exactly known values.
pub const EXACT: i64 = i64::MAX / 4;

/// Default absolute ϖ-adic precision used when an exact value has to be
/// approximated (inverses, roots).
pub const DEFAULT_PRECISION: i64 = 12;

const POW_CACHE: usize = 320;

pub(crate) fn prec_add(a: i64, b: i64) -> i64 {
    if a >= EXACT || b >= EXACT {
        EXACT
    } else {
        (a + b).min(EXACT)
    }
}

/// A ϖ-adic valuation as far as it can be decided at the available precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    Exact(i64),
    /// The value is indistinguishable from zero; only a lower bound is known.
    AtLeast(i64),
    Infinite,
}

impl Valuation {
    /// The best known lower bound, with [`EXACT`] standing in for infinity.
    pub fn lower_bound(self) -> i64 {
        match self {
            Valuation::Exact(v) | Valuation::AtLeast(v) => v,
            Valuation::Infinite => EXACT,
        }
    }

    pub fn exact(self) -> Option<i64> {
        match self {
            Valuation::Exact(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    /// Valuation of a minimum: exact when the smallest candidate is exact and
    /// no lower bound undercuts it.
    pub fn min(self, other: Valuation) -> Valuation {
        use Valuation::*;
        match (self, other) {
            (Infinite, x) | (x, Infinite) => x,
            (Exact(a), Exact(b)) => Exact(a.min(b)),
            (Exact(a), AtLeast(b)) | (AtLeast(b), Exact(a)) => {
                if a <= b {
                    Exact(a)
                } else {
                    AtLeast(b)
                }
            }
            (AtLeast(a), AtLeast(b)) => AtLeast(a.min(b)),
        }
    }

    pub fn shift(self, k: i64) -> Valuation {
        match self {
            Valuation::Exact(v) => Valuation::Exact(v + k),
            Valuation::AtLeast(v) => Valuation::AtLeast(v + k),
            Valuation::Infinite => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{v}"),
            Valuation::AtLeast(v) => write!(f, ">= {v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

pub(crate) fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub(crate) fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    r
}

fn v_p(n: &BigInt, p: &BigInt) -> i64 {
    debug_assert!(!n.is_zero());
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let g = a.mod_floor(m).extended_gcd(m);
    if !g.gcd.is_one() {
        return None;
    }
    Some(g.x.mod_floor(m))
}

/// The field `F = Q_p(ϖ)` with `ϖ` a root of a monic Eisenstein polynomial.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    p: u64,
    eisenstein: Vec<BigInt>,
    default_prec: i64,
    p_big: BigInt,
    unit0: BigInt,
    p_pows: Vec<BigInt>,
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.eisenstein == other.eisenstein
    }
}

impl Eq for FieldSpec {}

impl FieldSpec {
    /// `eisenstein` lists `g_0, …, g_e` of the monic polynomial defining ϖ.
    pub fn new(p: u64, eisenstein: Vec<BigInt>) -> Result<Arc<Self>> {
        if !is_prime(p) {
            return Err(Error::InvalidField(format!("{p} is not prime")));
        }
        if eisenstein.len() < 2 {
            return Err(Error::InvalidField("Eisenstein polynomial must have degree >= 1".into()));
        }
        let e = eisenstein.len() - 1;
        if !eisenstein[e].is_one() {
            return Err(Error::InvalidField("Eisenstein polynomial must be monic".into()));
        }
        let p_big = BigInt::from(p);
        for (i, g) in eisenstein[..e].iter().enumerate() {
            if !g.is_multiple_of(&p_big) {
                return Err(Error::InvalidField(format!("coefficient g_{i} = {g} is not divisible by {p}")));
            }
        }
        if eisenstein[0].is_multiple_of(&(&p_big * &p_big)) {
            return Err(Error::InvalidField(format!("constant term {} is divisible by p^2", eisenstein[0])));
        }
        let unit0 = &eisenstein[0] / &p_big;
        let mut p_pows = Vec::with_capacity(POW_CACHE);
        let mut acc = BigInt::one();
        for _ in 0..POW_CACHE {
            p_pows.push(acc.clone());
            acc *= &p_big;
        }
        Ok(Arc::new(FieldSpec {
            p,
            eisenstein,
            default_prec: DEFAULT_PRECISION,
            p_big,
            unit0,
            p_pows,
        }))
    }

    pub fn from_i64(p: u64, eisenstein: &[i64]) -> Result<Arc<Self>> {
        Self::new(p, eisenstein.iter().map(|&g| BigInt::from(g)).collect())
    }

    /// `F = Q_p` with `ϖ = p`.
    pub fn unramified(p: u64) -> Result<Arc<Self>> {
        Self::from_i64(p, &[-(p as i64), 1])
    }

    /// Same field, different working precision for approximated exact values.
    pub fn with_precision(&self, prec: i64) -> Arc<Self> {
        let mut s = self.clone();
        s.default_prec = prec.max(1);
        Arc::new(s)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Degree `e_F` of the Eisenstein polynomial, equal to `v_F(p)`.
    pub fn e(&self) -> usize {
        self.eisenstein.len() - 1
    }

    pub fn eisenstein(&self) -> &[BigInt] {
        &self.eisenstein
    }

    pub fn default_prec(&self) -> i64 {
        self.default_prec
    }

    pub fn same_field(a: &Arc<FieldSpec>, b: &Arc<FieldSpec>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }

    pub(crate) fn p_big(&self) -> &BigInt {
        &self.p_big
    }

    pub(crate) fn p_pow(&self, k: i64) -> BigInt {
        if k <= 0 {
            BigInt::one()
        } else if (k as usize) < self.p_pows.len() {
            self.p_pows[k as usize].clone()
        } else {
            num_traits::pow(self.p_big.clone(), k as usize)
        }
    }

    fn zero_raw(&self) -> Vec<BigInt> {
        vec![BigInt::zero(); self.e()]
    }

    /// Reduce a polynomial in ϖ of arbitrary degree to the basis of length `e`.
    fn reduce_poly(&self, mut c: Vec<BigInt>) -> Vec<BigInt> {
        let e = self.e();
        for k in (e..c.len()).rev() {
            let t = std::mem::take(&mut c[k]);
            if t.is_zero() {
                continue;
            }
            for i in 0..e {
                if !self.eisenstein[i].is_zero() {
                    c[k - e + i] -= &t * &self.eisenstein[i];
                }
            }
        }
        c.resize(e, BigInt::zero());
        c
    }

    fn raw_mul(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let e = self.e();
        if e == 1 {
            return vec![&a[0] * &b[0]];
        }
        let mut prod = vec![BigInt::zero(); 2 * e - 1];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if !bj.is_zero() {
                    prod[i + j] += ai * bj;
                }
            }
        }
        self.reduce_poly(prod)
    }

    fn raw_mul_x(&self, c: &[BigInt]) -> Vec<BigInt> {
        let mut out = Vec::with_capacity(c.len() + 1);
        out.push(BigInt::zero());
        out.extend(c.iter().cloned());
        self.reduce_poly(out)
    }

    /// Canonical representative modulo `ϖ^prec`.
    fn normalize(&self, c: &mut [BigInt], prec: i64) {
        if prec >= EXACT {
            return;
        }
        let e = self.e() as i64;
        for (i, ci) in c.iter_mut().enumerate() {
            let k = Integer::div_ceil(&(prec - i as i64), &e);
            if k <= 0 {
                *ci = BigInt::zero();
            } else {
                *ci = ci.mod_floor(&self.p_pow(k));
            }
        }
    }

    fn raw_mod(&self, c: &mut [BigInt], modulus: &BigInt) {
        for ci in c.iter_mut() {
            *ci = ci.mod_floor(modulus);
        }
    }

    fn raw_val(&self, c: &[BigInt]) -> Option<i64> {
        let e = self.e() as i64;
        c.iter()
            .enumerate()
            .filter(|(_, ci)| !ci.is_zero())
            .map(|(i, ci)| e * v_p(ci, &self.p_big) + i as i64)
            .min()
    }

    /// Divide by ϖ an element whose constant coefficient is divisible by `p`.
    /// `target` is the precision of the result; `EXACT` requires `g_0 = ±p`.
    fn raw_div_x(&self, c: &[BigInt], target: i64) -> Vec<BigInt> {
        let e = self.e();
        let c0p = &c[0] / &self.p_big;
        // p/ϖ = -(g_1 + g_2 ϖ + … + g_e ϖ^{e-1}) / u_0 with g_0 = p·u_0
        let t = if self.unit0.abs().is_one() {
            -(&c0p * &self.unit0)
        } else {
            let k = Integer::div_ceil(&target.max(1), &(e as i64)) + 1;
            let m = self.p_pow(k);
            let inv = mod_inverse(&self.unit0, &m).expect("u_0 is a p-adic unit");
            (-(&c0p * inv)).mod_floor(&m)
        };
        (0..e)
            .map(|i| {
                let shifted = if i + 1 < e { c[i + 1].clone() } else { BigInt::zero() };
                shifted + &t * &self.eisenstein[i + 1]
            })
            .collect()
    }
}

/// An element of `O_F` known modulo `ϖ^prec`.
#[derive(Clone)]
pub struct OFElement {
    spec: Arc<FieldSpec>,
    c: Vec<BigInt>,
    prec: i64,
}

impl OFElement {
    pub(crate) fn from_raw(spec: &Arc<FieldSpec>, mut c: Vec<BigInt>, prec: i64) -> Self {
        let prec = prec.max(0);
        spec.normalize(&mut c, prec);
        OFElement { spec: spec.clone(), c, prec }
    }

    pub fn from_int(spec: &Arc<FieldSpec>, n: impl Into<BigInt>) -> Self {
        let mut c = spec.zero_raw();
        c[0] = n.into();
        OFElement { spec: spec.clone(), c, prec: EXACT }
    }

    pub fn zero(spec: &Arc<FieldSpec>) -> Self {
        Self::from_int(spec, 0)
    }

    pub fn one(spec: &Arc<FieldSpec>) -> Self {
        Self::from_int(spec, 1)
    }

    pub fn uniformizer(spec: &Arc<FieldSpec>) -> Self {
        let c = spec.raw_mul_x(&Self::one(spec).c);
        OFElement { spec: spec.clone(), c, prec: EXACT }
    }

    /// The zero element known only modulo `ϖ^prec`.
    pub fn zero_at(spec: &Arc<FieldSpec>, prec: i64) -> Self {
        Self::from_raw(spec, spec.zero_raw(), prec)
    }

    /// `Σ d_i ϖ^i`, known modulo `ϖ^prec` (exact when `prec` is `None`).
    pub fn from_digits(spec: &Arc<FieldSpec>, digits: &[u64], prec: Option<i64>) -> Result<Self> {
        let mut acc = Self::zero(spec);
        let pi = Self::uniformizer(spec);
        for &d in digits.iter().rev() {
            if d >= spec.p {
                return Err(Error::InvalidInput(format!("digit {d} is not below p = {}", spec.p)));
            }
            acc = &(&acc * &pi) + &Self::from_int(spec, d);
        }
        Ok(match prec {
            Some(n) => acc.truncate(n),
            None => acc,
        })
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec >= EXACT
    }

    /// Coefficients in the basis `1, ϖ, …, ϖ^{e-1}`.
    pub fn coefficients(&self) -> &[BigInt] {
        &self.c
    }

    pub fn valuation(&self) -> Valuation {
        match self.spec.raw_val(&self.c) {
            Some(v) => Valuation::Exact(v),
            None if self.is_exact() => Valuation::Infinite,
            None => Valuation::AtLeast(self.prec),
        }
    }

    /// True when the value is indistinguishable from zero.
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    pub fn is_exact_zero(&self) -> bool {
        self.is_exact() && self.is_zero()
    }

    pub fn is_unit(&self) -> bool {
        self.valuation() == Valuation::Exact(0)
    }

    /// Image in the residue field `F_p`.
    pub fn residue(&self) -> u64 {
        self.c[0].mod_floor(self.spec.p_big()).to_u64().expect("residue fits in u64")
    }

    /// Forget precision beyond `ϖ^prec`.
    pub fn truncate(&self, prec: i64) -> Self {
        if prec >= self.prec {
            return self.clone();
        }
        Self::from_raw(&self.spec, self.c.clone(), prec)
    }

    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.spec);
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn mul_pi_pow(&self, k: u64) -> Self {
        let mut c = self.c.clone();
        for _ in 0..k {
            c = self.spec.raw_mul_x(&c);
        }
        Self::from_raw(&self.spec, c, prec_add(self.prec, k as i64))
    }

    /// Exact division by ϖ; the element must have positive valuation.
    pub fn div_pi(&self) -> Result<Self> {
        if self.is_zero() {
            if self.is_exact() {
                return Ok(self.clone());
            }
            return Ok(Self::zero_at(&self.spec, self.prec - 1));
        }
        if self.valuation().lower_bound() < 1 {
            return Err(Error::InvalidInput("division by ϖ of an element of valuation 0".into()));
        }
        let exact_ok = self.spec.unit0.abs().is_one();
        let target = if self.is_exact() {
            if exact_ok {
                EXACT
            } else {
                self.spec.default_prec
            }
        } else {
            self.prec - 1
        };
        let c = self.spec.raw_div_x(&self.c, target);
        Ok(Self::from_raw(&self.spec, c, target))
    }

    /// Inverse of a unit, computed by Newton iteration `x ← x(2 - ax)`.
    pub fn inverse_unit(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::PrecisionExhausted(format!(
                "inverse of non-unit (valuation {})",
                self.valuation()
            )));
        }
        if self.is_exact() && self.c[0].abs().is_one() && self.c[1..].iter().all(Zero::is_zero) {
            return Ok(self.clone());
        }
        let n = if self.is_exact() { self.spec.default_prec } else { self.prec };
        let spec = &self.spec;
        let e = spec.e() as i64;
        let m = spec.p_pow(Integer::div_ceil(&n, &e).max(1));
        let mut a = self.c.clone();
        spec.raw_mod(&mut a, &m);
        let x0 = mod_inverse(&a[0], spec.p_big()).expect("unit residue is invertible");
        let mut x = spec.zero_raw();
        x[0] = x0;
        for _ in 0..128 {
            let mut ax = spec.raw_mul(&a, &x);
            spec.raw_mod(&mut ax, &m);
            if ax[0].is_one() && ax[1..].iter().all(Zero::is_zero) {
                return Ok(Self::from_raw(spec, x, n));
            }
            let mut two_minus: Vec<BigInt> = ax.iter().map(|t| -t).collect();
            two_minus[0] += 2;
            x = spec.raw_mul(&x, &two_minus);
            spec.raw_mod(&mut x, &m);
        }
        Err(Error::Internal("Newton inversion did not converge".into()))
    }

    /// The first `count` ϖ-adic digits (each in `0..p`); stops at the precision.
    pub fn digits(&self, count: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(count);
        let mut x = self.clone();
        for _ in 0..count {
            if x.prec <= 0 {
                break;
            }
            let d = x.residue();
            out.push(d);
            x = (&x - &Self::from_int(&self.spec, d)).div_pi().expect("digit removed");
        }
        out
    }

    /// Congruence modulo the smaller of the two precisions.
    pub fn eq_at_prec(&self, other: &OFElement) -> bool {
        (self - other).is_zero()
    }

    pub fn try_add(&self, other: &OFElement) -> Result<OFElement> {
        self.check_spec(other)?;
        Ok(self + other)
    }

    pub fn try_mul(&self, other: &OFElement) -> Result<OFElement> {
        self.check_spec(other)?;
        Ok(self * other)
    }

    fn check_spec(&self, other: &OFElement) -> Result<()> {
        if FieldSpec::same_field(&self.spec, &other.spec) {
            Ok(())
        } else {
            Err(Error::SpecMismatch)
        }
    }

    /// `self / other` in `F`.
    pub fn div(&self, other: &OFElement) -> Result<FElement> {
        self.check_spec(other)?;
        if other.valuation().exact().is_none() {
            return Err(Error::PrecisionExhausted(
                "divisor is indistinguishable from zero at its precision".into(),
            ));
        }
        FElement::from_of(self.clone()).checked_div(&FElement::from_of(other.clone()))
    }

    /// All `m`-th roots of a unit, one Hensel lift per residue root.
    pub fn root(&self, m: u64) -> Result<Roots> {
        if m == 0 {
            return Err(Error::InvalidInput("root of order 0".into()));
        }
        if !self.is_unit() {
            return Err(Error::InvalidInput("roots are only taken of units".into()));
        }
        let p = self.spec.p;
        let r = self.residue();
        let residue_roots: Vec<u64> = (1..p).filter(|&t| pow_mod_u64(t, m, p) == r).collect();
        if residue_roots.is_empty() {
            return Err(Error::NoResidueRoot(format!("{r} has no {m}-th root in F_{p}")));
        }
        if m % p == 0 {
            return Err(Error::InvalidInput(format!(
                "Hensel lifting of {m}-th roots needs p = {p} not dividing m"
            )));
        }
        let n = if self.is_exact() { self.spec.default_prec } else { self.prec };
        let spec = &self.spec;
        let m_el = OFElement::from_int(spec, m);
        let roots = residue_roots
            .iter()
            .map(|&t| {
                // u ← u - (u^m - a) / (m u^{m-1}), every step at precision n
                let mut u = OFElement::from_int(spec, t).truncate(n);
                let a = self.truncate(n);
                for _ in 0..128 {
                    let diff = &u.pow(m) - &a;
                    if diff.is_zero() {
                        break;
                    }
                    let deriv = (&m_el * &u.pow(m - 1)).truncate(n).inverse_unit()?;
                    u = (&u - &(&diff * &deriv)).truncate(n);
                }
                Ok(u)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Roots { roots, residue_roots })
    }
}

/// Output of [`OFElement::root`].
#[derive(Clone, Debug)]
pub struct Roots {
    pub roots: Vec<OFElement>,
    pub residue_roots: Vec<u64>,
}

impl Roots {
    pub fn is_unique(&self) -> bool {
        self.roots.len() == 1
    }

    /// The root with residue 1 when there is one, else the smallest residue.
    pub fn principal(&self) -> &OFElement {
        let idx = self.residue_roots.iter().position(|&t| t == 1).unwrap_or(0);
        &self.roots[idx]
    }
}

fn assert_same(a: &OFElement, b: &OFElement) {
    assert!(FieldSpec::same_field(&a.spec, &b.spec), "operands live in different fields");
}

impl<'a> Add<&'a OFElement> for &'a OFElement {
    type Output = OFElement;
    fn add(self, rhs: &OFElement) -> OFElement {
        assert_same(self, rhs);
        let c = self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect();
        OFElement::from_raw(&self.spec, c, self.prec.min(rhs.prec))
    }
}

impl<'a> Sub<&'a OFElement> for &'a OFElement {
    type Output = OFElement;
    fn sub(self, rhs: &OFElement) -> OFElement {
        assert_same(self, rhs);
        let c = self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect();
        OFElement::from_raw(&self.spec, c, self.prec.min(rhs.prec))
    }
}

impl<'a> Mul<&'a OFElement> for &'a OFElement {
    type Output = OFElement;
    fn mul(self, rhs: &OFElement) -> OFElement {
        assert_same(self, rhs);
        if self.is_exact() && rhs.is_exact() {
            let c = self.spec.raw_mul(&self.c, &rhs.c);
            return OFElement { spec: self.spec.clone(), c, prec: EXACT };
        }
        let va = self.valuation().lower_bound();
        let vb = rhs.valuation().lower_bound();
        let prec = prec_add(self.prec, vb).min(prec_add(rhs.prec, va));
        if self.is_zero() || rhs.is_zero() {
            return OFElement::from_raw(&self.spec, self.spec.zero_raw(), prec);
        }
        OFElement::from_raw(&self.spec, self.spec.raw_mul(&self.c, &rhs.c), prec)
    }
}

impl Neg for &OFElement {
    type Output = OFElement;
    fn neg(self) -> OFElement {
        let c = self.c.iter().map(|a| -a).collect();
        OFElement::from_raw(&self.spec, c, self.prec)
    }
}

impl Add for OFElement {
    type Output = OFElement;
    fn add(self, rhs: OFElement) -> OFElement {
        &self + &rhs
    }
}

impl Sub for OFElement {
    type Output = OFElement;
    fn sub(self, rhs: OFElement) -> OFElement {
        &self - &rhs
    }
}

impl Mul for OFElement {
    type Output = OFElement;
    fn mul(self, rhs: OFElement) -> OFElement {
        &self * &rhs
    }
}

impl Neg for OFElement {
    type Output = OFElement;
    fn neg(self) -> OFElement {
        -&self
    }
}

impl fmt::Debug for OFElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for OFElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("{c}·ϖ"),
                _ => format!("{c}·ϖ^{i}"),
            })
            .collect();
        let body = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        if self.is_exact() {
            write!(f, "{body}")
        } else {
            write!(f, "{body} + O(ϖ^{})", self.prec)
        }
    }
}

/// An element `ϖ^shift · unit` of `F`, where `unit` is a unit of `O_F` or is
/// indistinguishable from zero.
#[derive(Clone)]
pub struct FElement {
    shift: i64,
    unit: OFElement,
}

impl FElement {
    pub fn from_of(x: OFElement) -> Self {
        if x.is_exact_zero() {
            return FElement { shift: 0, unit: x };
        }
        match x.valuation() {
            Valuation::AtLeast(p) => Self::zero_at(&x.spec, p),
            Valuation::Exact(v) => {
                let mut unit = x;
                for _ in 0..v {
                    unit = unit.div_pi().expect("valuation is at least the number of divisions");
                }
                FElement { shift: v, unit }
            }
            Valuation::Infinite => unreachable!("exact zero handled above"),
        }
    }

    pub fn from_int(spec: &Arc<FieldSpec>, n: impl Into<BigInt>) -> Self {
        Self::from_of(OFElement::from_int(spec, n))
    }

    pub fn zero(spec: &Arc<FieldSpec>) -> Self {
        FElement { shift: 0, unit: OFElement::zero(spec) }
    }

    pub fn one(spec: &Arc<FieldSpec>) -> Self {
        FElement { shift: 0, unit: OFElement::one(spec) }
    }

    /// Zero known modulo `ϖ^abs_prec` (which may be negative).
    pub fn zero_at(spec: &Arc<FieldSpec>, abs_prec: i64) -> Self {
        FElement { shift: abs_prec, unit: OFElement::zero_at(spec, 0) }
    }

    /// `ϖ^k` for any integer `k`.
    pub fn pi_pow(spec: &Arc<FieldSpec>, k: i64) -> Self {
        FElement { shift: k, unit: OFElement::one(spec) }
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.unit.spec
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn unit(&self) -> &OFElement {
        &self.unit
    }

    pub fn is_exact(&self) -> bool {
        self.unit.is_exact()
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.unit.is_exact_zero()
    }

    /// Absolute precision: the value is known modulo `ϖ^abs_prec`.
    pub fn abs_prec(&self) -> i64 {
        prec_add(self.shift, self.unit.prec)
    }

    pub fn valuation(&self) -> Valuation {
        if self.is_exact_zero() {
            Valuation::Infinite
        } else if self.unit.is_zero() {
            Valuation::AtLeast(self.abs_prec())
        } else {
            Valuation::Exact(self.shift)
        }
    }

    /// Certainly in `O_F` at the recorded precision.
    pub fn is_integral(&self) -> bool {
        self.valuation().lower_bound() >= 0
    }

    pub fn to_of(&self) -> Result<OFElement> {
        if !self.is_integral() {
            return Err(Error::InvalidInput(format!("element of valuation {} is not integral", self.valuation())));
        }
        if self.is_exact_zero() {
            return Ok(self.unit.clone());
        }
        if self.unit.is_zero() {
            return Ok(OFElement::zero_at(self.spec(), self.abs_prec()));
        }
        Ok(self.unit.mul_pi_pow(self.shift as u64))
    }

    /// Lower the absolute precision to at most `abs_prec`.
    pub fn cap_prec(&self, abs_prec: i64) -> Self {
        if abs_prec >= self.abs_prec() {
            return self.clone();
        }
        if self.unit.is_zero() {
            return Self::zero_at(self.spec(), abs_prec);
        }
        let rel = abs_prec - self.shift;
        if rel <= 0 {
            Self::zero_at(self.spec(), abs_prec)
        } else {
            FElement { shift: self.shift, unit: self.unit.truncate(rel) }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        if self.unit.is_zero() {
            return Err(Error::PrecisionExhausted(format!(
                "inverse of an element indistinguishable from zero (valuation {})",
                self.valuation()
            )));
        }
        Ok(FElement { shift: -self.shift, unit: self.unit.inverse_unit()? })
    }

    pub fn checked_div(&self, other: &FElement) -> Result<Self> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.spec());
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Multiply by `ϖ^k`.
    pub fn mul_pi_pow(&self, k: i64) -> Self {
        if self.is_exact_zero() {
            return self.clone();
        }
        FElement { shift: self.shift + k, unit: self.unit.clone() }
    }

    pub fn eq_at_prec(&self, other: &FElement) -> bool {
        (self - other).is_zero()
    }

    /// Residue of an integral element.
    pub fn residue(&self) -> u64 {
        if self.shift > 0 || self.unit.is_zero() {
            0
        } else {
            self.unit.residue()
        }
    }
}

impl<'a> Add<&'a FElement> for &'a FElement {
    type Output = FElement;
    fn add(self, rhs: &FElement) -> FElement {
        assert_same(&self.unit, &rhs.unit);
        if self.is_exact_zero() {
            return rhs.clone();
        }
        if rhs.is_exact_zero() {
            return self.clone();
        }
        let cap = self.abs_prec().min(rhs.abs_prec());
        match (self.unit.is_zero(), rhs.unit.is_zero()) {
            (true, true) => FElement::zero_at(self.spec(), cap),
            (true, false) => rhs.cap_prec(cap),
            (false, true) => self.cap_prec(cap),
            (false, false) => {
                let s = self.shift.min(rhs.shift);
                let a = self.unit.mul_pi_pow((self.shift - s) as u64);
                let b = rhs.unit.mul_pi_pow((rhs.shift - s) as u64);
                let sum = FElement::from_of(&a + &b);
                sum.mul_pi_pow(s).cap_prec(cap)
            }
        }
    }
}

impl<'a> Sub<&'a FElement> for &'a FElement {
    type Output = FElement;
    fn sub(self, rhs: &FElement) -> FElement {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a FElement> for &'a FElement {
    type Output = FElement;
    fn mul(self, rhs: &FElement) -> FElement {
        assert_same(&self.unit, &rhs.unit);
        if self.is_exact_zero() || rhs.is_exact_zero() {
            return FElement::zero(self.spec());
        }
        if self.unit.is_zero() || rhs.unit.is_zero() {
            let va = self.valuation().lower_bound();
            let vb = rhs.valuation().lower_bound();
            let prec = prec_add(self.abs_prec(), vb).min(prec_add(rhs.abs_prec(), va));
            return FElement::zero_at(self.spec(), prec);
        }
        FElement { shift: self.shift + rhs.shift, unit: &self.unit * &rhs.unit }
    }
}

impl Neg for &FElement {
    type Output = FElement;
    fn neg(self) -> FElement {
        FElement { shift: self.shift, unit: -&self.unit }
    }
}

impl Add for FElement {
    type Output = FElement;
    fn add(self, rhs: FElement) -> FElement {
        &self + &rhs
    }
}

impl Sub for FElement {
    type Output = FElement;
    fn sub(self, rhs: FElement) -> FElement {
        &self - &rhs
    }
}

impl Mul for FElement {
    type Output = FElement;
    fn mul(self, rhs: FElement) -> FElement {
        &self * &rhs
    }
}

impl Neg for FElement {
    type Output = FElement;
    fn neg(self) -> FElement {
        -&self
    }
}

impl From<OFElement> for FElement {
    fn from(x: OFElement) -> Self {
        FElement::from_of(x)
    }
}

impl fmt::Debug for FElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact_zero() {
            return write!(f, "0");
        }
        if self.unit.is_zero() {
            return write!(f, "O(ϖ^{})", self.abs_prec());
        }
        match self.shift {
            0 => write!(f, "{}", self.unit),
            s => write!(f, "ϖ^{s}·({})", self.unit),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> Arc<FieldSpec> {
        FieldSpec::from_i64(3, &[-3, 0, 1]).unwrap()
    }

    #[test]
    fn rejects_non_eisenstein() {
        assert!(FieldSpec::from_i64(3, &[-9, 0, 1]).is_err());
        assert!(FieldSpec::from_i64(3, &[-3, 1, 1]).is_err());
        assert!(FieldSpec::from_i64(4, &[-4, 1]).is_err());
        assert!(FieldSpec::from_i64(3, &[-3, 0, 2]).is_err());
    }

    #[test]
    fn pi_squared_is_three() {
        let s = f3();
        let pi = OFElement::uniformizer(&s);
        let sq = &pi * &pi;
        assert!(sq.eq_at_prec(&OFElement::from_int(&s, 3)));
        assert_eq!(sq.valuation(), Valuation::Exact(2));
    }

    #[test]
    fn valuations() {
        let s = f3();
        assert_eq!(OFElement::uniformizer(&s).valuation(), Valuation::Exact(1));
        assert_eq!(OFElement::from_int(&s, 3).valuation(), Valuation::Exact(2));
        assert_eq!(OFElement::zero_at(&s, 8).valuation(), Valuation::AtLeast(8));
        assert_eq!(OFElement::zero(&s).valuation(), Valuation::Infinite);
        assert_eq!(OFElement::from_int(&s, 18).valuation(), Valuation::Exact(4));
    }

    #[test]
    fn truncation_is_canonical() {
        let s = f3();
        // 3ϖ + 27 modulo ϖ^4: 27 = ϖ^6 vanishes, 3ϖ = ϖ^3 survives
        let x = OFElement::from_raw(&s, vec![BigInt::from(27), BigInt::from(3)], 4);
        assert_eq!(x.coefficients(), &[BigInt::from(0), BigInt::from(3)]);
        assert_eq!(x.valuation(), Valuation::Exact(3));
        let y = OFElement::from_raw(&s, vec![BigInt::from(9), BigInt::from(0)], 4);
        assert!(y.is_zero());
    }

    #[test]
    fn division_examples() {
        let s = f3();
        let pi = OFElement::uniformizer(&s);
        let three = OFElement::from_int(&s, 3);
        let q = three.div(&pi).unwrap();
        assert_eq!(q.valuation(), Valuation::Exact(1));
        assert!(q.to_of().unwrap().eq_at_prec(&pi));
        let r = pi.div(&three).unwrap();
        assert_eq!(r.shift(), -1);
        let x = OFElement::from_int(&s, 7);
        assert!(x.div(&OFElement::one(&s)).unwrap().to_of().unwrap().eq_at_prec(&x));
        assert!(matches!(x.div(&OFElement::zero_at(&s, 5)), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn inverse_round_trip() {
        let s = f3().with_precision(20);
        let a = OFElement::from_raw(&s, vec![BigInt::from(5), BigInt::from(7)], 20);
        let inv = a.inverse_unit().unwrap();
        let prod = &a * &inv;
        assert!(prod.eq_at_prec(&OFElement::one(&s)));
        assert_eq!(prod.prec(), 20);
    }

    #[test]
    fn digits_round_trip() {
        let s = f3();
        let x = OFElement::from_raw(&s, vec![BigInt::from(-7), BigInt::from(11)], 10);
        let d = x.digits(10);
        assert_eq!(d.len(), 10);
        let back = OFElement::from_digits(&s, &d, Some(10)).unwrap();
        assert!(back.eq_at_prec(&x));
    }

    #[test]
    fn digits_with_non_monic_unit_constant() {
        // g = x + 6 over Z_3: ϖ = -6, so p/ϖ needs 1/2 in Z_3
        let s = FieldSpec::from_i64(3, &[6, 1]).unwrap();
        let x = OFElement::from_int(&s, 5).truncate(9);
        let d = x.digits(9);
        let back = OFElement::from_digits(&s, &d, Some(9)).unwrap();
        assert!(back.eq_at_prec(&x));
        let pi = OFElement::uniformizer(&s);
        assert_eq!(pi.valuation(), Valuation::Exact(1));
        assert!(pi.div_pi().unwrap().eq_at_prec(&OFElement::one(&s)));
    }

    #[test]
    fn roots_examples() {
        let s5 = FieldSpec::unramified(5).unwrap();
        let four = OFElement::from_int(&s5, 4);
        let r = four.root(2).unwrap();
        assert_eq!(r.residue_roots, vec![2, 3]);
        for u in &r.roots {
            assert!((u * u).eq_at_prec(&four));
        }
        let s3 = FieldSpec::unramified(3).unwrap();
        assert!(matches!(OFElement::from_int(&s3, 2).root(2), Err(Error::NoResidueRoot(_))));
        let one = OFElement::one(&s3).root(3).unwrap_err();
        assert!(matches!(one, Error::InvalidInput(_)));
        let r = OFElement::one(&s5).root(3).unwrap();
        assert!(r.is_unique());
        assert!(r.principal().eq_at_prec(&OFElement::one(&s5)));
    }

    #[test]
    fn felement_arithmetic() {
        let s = f3();
        let a = FElement::pi_pow(&s, -3);
        let b = FElement::from_int(&s, 9);
        let prod = &a * &b;
        assert_eq!(prod.valuation(), Valuation::Exact(1));
        let sum = &a + &b;
        assert_eq!(sum.valuation(), Valuation::Exact(-3));
        let zero = &sum - &sum;
        assert!(zero.is_zero());
        assert!(!FElement::pi_pow(&s, -1).is_integral());
    }

    #[test]
    fn precision_of_products() {
        let s = f3();
        let a = OFElement::from_int(&s, 3).truncate(5); // ϖ^2 + O(ϖ^5)
        let b = OFElement::uniformizer(&s).truncate(4); // ϖ + O(ϖ^4)
        let ab = &a * &b;
        assert_eq!(ab.prec(), 6);
        assert_eq!(ab.valuation(), Valuation::Exact(3));
    }
}
