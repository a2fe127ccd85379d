//! Sum and product polynomials of ϖ-typical Witt vectors.
//!
//! `S_m` and `P_m` are the unique polynomials in `x_0..x_m, y_0..y_m` whose
//! ghost components add and multiply: with `w_m(x) = Σ_{j≤m} ϖ^j x_j^{p^{m-j}}`,
//! `ϖ^m S_m = w_m(x) + w_m(y) - Σ_{j<m} ϖ^j S_j^{p^{m-j}}` and likewise for
//! `P_m` with `w_m(x)·w_m(y)`. Each division by `ϖ^m` is checked.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::scalars::{FieldSpec, OFElement};

/// Largest supported Witt length.
pub const MAX_LEN: usize = 5;
const NVARS: usize = 2 * MAX_LEN;

/// Exponent vector over `x_0..x_4, y_0..y_4`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Monomial(pub [u16; NVARS]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; NVARS]);

    pub fn x(i: usize) -> usize {
        i
    }

    pub fn y(i: usize) -> usize {
        MAX_LEN + i
    }

    pub fn var(index: usize, exp: u16) -> Self {
        let mut m = [0; NVARS];
        m[index] = exp;
        Monomial(m)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
        Monomial(m)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                let name = if i < MAX_LEN { format!("x{i}") } else { format!("y{}", i - MAX_LEN) };
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Polynomial with exact `O_F` coefficients.
#[derive(Clone, Debug)]
pub struct Poly {
    spec: Arc<FieldSpec>,
    terms: HashMap<Monomial, OFElement>,
}

impl Poly {
    pub fn zero(spec: &Arc<FieldSpec>) -> Self {
        Poly { spec: spec.clone(), terms: HashMap::new() }
    }

    pub fn term(spec: &Arc<FieldSpec>, m: Monomial, c: OFElement) -> Self {
        let mut p = Self::zero(spec);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn var(spec: &Arc<FieldSpec>, index: usize) -> Self {
        Self::term(spec, Monomial::var(index, 1), OFElement::one(spec))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &OFElement)> {
        self.terms.iter()
    }

    /// Terms in monomial order, for deterministic output.
    pub fn sorted_terms(&self) -> BTreeMap<Monomial, OFElement> {
        self.terms.iter().map(|(m, c)| (*m, c.clone())).collect()
    }

    fn accumulate(&mut self, m: Monomial, c: OFElement) {
        match self.terms.get_mut(&m) {
            Some(cur) => {
                let s = &*cur + &c;
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *cur = s;
                }
            }
            None => {
                if !c.is_zero() {
                    self.terms.insert(m, c);
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(*m, -c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(&self.spec);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.accumulate(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &OFElement) -> Poly {
        let mut out = Poly::zero(&self.spec);
        for (m, a) in &self.terms {
            out.accumulate(*m, a * c);
        }
        out
    }

    pub fn pow(&self, k: u64) -> Poly {
        let mut acc = Poly::term(&self.spec, Monomial::ONE, OFElement::one(&self.spec));
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact division by `ϖ^m`, failing on the first non-divisible coefficient.
    pub fn div_pi_pow(&self, m: u32) -> Result<Poly> {
        let mut out = Poly::zero(&self.spec);
        for (mono, c) in self.sorted_terms() {
            if c.valuation().lower_bound() < m as i64 {
                return Err(Error::IntegralityFailure(format!("{mono} (coefficient {c}, dividing by ϖ^{m})")));
            }
            let mut q = c;
            for _ in 0..m {
                q = q.div_pi()?;
            }
            out.accumulate(mono, q);
        }
        Ok(out)
    }

    pub fn eq_exact(&self, other: &Poly) -> bool {
        self.sub(other).is_empty()
    }

    /// Evaluate at `x_i = xs[i]`, `y_i = ys[i]`.
    pub fn eval(&self, xs: &[OFElement], ys: &[OFElement]) -> OFElement {
        let mut acc = OFElement::zero(&self.spec);
        let mut powers: HashMap<(usize, u16), OFElement> = HashMap::new();
        for (m, c) in self.sorted_terms() {
            let mut t = c;
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let base = if i < MAX_LEN { &xs[i] } else { &ys[i - MAX_LEN] };
                let pw = powers.entry((i, e)).or_insert_with(|| base.pow(e as u64));
                t = &t * pw;
            }
            acc = &acc + &t;
        }
        acc
    }

    /// Coefficients reduced modulo ϖ, nonzero residues only, in monomial order.
    pub fn reduce_mod_pi(&self) -> Vec<(Monomial, u64)> {
        self.sorted_terms()
            .into_iter()
            .map(|(m, c)| (m, c.residue()))
            .filter(|&(_, r)| r != 0)
            .collect()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.sorted_terms().iter().map(|(m, c)| format!("({c})*{m}")).collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// Ghost polynomial `w_m` in the variables starting at `offset`.
pub fn ghost_poly(spec: &Arc<FieldSpec>, m: usize, offset: usize) -> Poly {
    let p = spec.p();
    let pi = OFElement::uniformizer(spec);
    let mut acc = Poly::zero(spec);
    for j in 0..=m {
        let exp = p.pow((m - j) as u32) as u16;
        acc = acc.add(&Poly::term(spec, Monomial::var(offset + j, exp), pi.pow(j as u64)));
    }
    acc
}

/// Ghost components of a vector with entries in `O_F`.
pub fn ghost(spec: &Arc<FieldSpec>, a: &[OFElement]) -> Vec<OFElement> {
    let p = spec.p();
    let pi = OFElement::uniformizer(spec);
    (0..a.len())
        .map(|m| {
            (0..=m).fold(OFElement::zero(spec), |acc, j| {
                &acc + &(&pi.pow(j as u64) * &a[j].pow(p.pow((m - j) as u32)))
            })
        })
        .collect()
}

/// Witt components in `O_F` of the vector with the given ghost components,
/// when they exist.
pub fn from_ghost(spec: &Arc<FieldSpec>, w: &[OFElement]) -> Result<Vec<OFElement>> {
    let p = spec.p();
    let pi = OFElement::uniformizer(spec);
    let mut out: Vec<OFElement> = Vec::with_capacity(w.len());
    for m in 0..w.len() {
        let mut rest = w[m].clone();
        for (j, xj) in out.iter().enumerate() {
            rest = &rest - &(&pi.pow(j as u64) * &xj.pow(p.pow((m - j) as u32)));
        }
        for _ in 0..m {
            if rest.valuation().lower_bound() < 1 {
                return Err(Error::IntegralityFailure(format!("ghost component {m} is not a Witt image")));
            }
            rest = rest.div_pi()?;
        }
        out.push(rest);
    }
    Ok(out)
}

/// The sum and product laws up to a given length, with their reductions
/// modulo ϖ.
#[derive(Debug)]
pub struct WittPolySet {
    spec: Arc<FieldSpec>,
    len: usize,
    sum: Vec<Poly>,
    prod: Vec<Poly>,
    sum_red: Vec<Vec<(Monomial, u64)>>,
    prod_red: Vec<Vec<(Monomial, u64)>>,
}

impl WittPolySet {
    fn build(spec: &Arc<FieldSpec>, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_LEN {
            return Err(Error::InvalidInput(format!("Witt length must be in 1..={MAX_LEN}, got {len}")));
        }
        let p = spec.p();
        let pi = OFElement::uniformizer(spec);
        let mut sum: Vec<Poly> = Vec::new();
        let mut prod: Vec<Poly> = Vec::new();
        // powers S_j^{p^{m-j}} and P_j^{p^{m-j}}, raised once more at each step
        let mut sum_pw: Vec<Poly> = Vec::new();
        let mut prod_pw: Vec<Poly> = Vec::new();
        for m in 0..len {
            let gx = ghost_poly(spec, m, Monomial::x(0));
            let gy = ghost_poly(spec, m, Monomial::y(0));
            for pw in sum_pw.iter_mut().chain(prod_pw.iter_mut()) {
                *pw = pw.pow(p);
            }
            let mut rs = gx.add(&gy);
            let mut rp = gx.mul(&gy);
            for j in 0..m {
                let pij = pi.pow(j as u64);
                rs = rs.sub(&sum_pw[j].scale(&pij));
                rp = rp.sub(&prod_pw[j].scale(&pij));
            }
            let s = rs.div_pi_pow(m as u32)?;
            let pr = rp.div_pi_pow(m as u32)?;
            sum_pw.push(s.clone());
            prod_pw.push(pr.clone());
            sum.push(s);
            prod.push(pr);
        }
        let sum_red = sum.iter().map(Poly::reduce_mod_pi).collect();
        let prod_red = prod.iter().map(Poly::reduce_mod_pi).collect();
        Ok(WittPolySet { spec: spec.clone(), len, sum, prod, sum_red, prod_red })
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sum(&self, m: usize) -> &Poly {
        &self.sum[m]
    }

    pub fn prod(&self, m: usize) -> &Poly {
        &self.prod[m]
    }

    pub(crate) fn sum_reduced(&self, m: usize) -> &[(Monomial, u64)] {
        &self.sum_red[m]
    }

    pub(crate) fn prod_reduced(&self, m: usize) -> &[(Monomial, u64)] {
        &self.prod_red[m]
    }

    /// Recompute `w_m(S) - w_m(x) - w_m(y)` and `w_m(P) - w_m(x)w_m(y)`
    /// symbolically and report whether both vanish for every `m`.
    pub fn check_ghost_identities(&self) -> bool {
        let spec = &self.spec;
        let p = spec.p();
        let pi = OFElement::uniformizer(spec);
        (0..self.len).all(|m| {
            let gx = ghost_poly(spec, m, Monomial::x(0));
            let gy = ghost_poly(spec, m, Monomial::y(0));
            let ws = (0..=m).fold(Poly::zero(spec), |acc, j| {
                acc.add(&self.sum[j].pow(p.pow((m - j) as u32)).scale(&pi.pow(j as u64)))
            });
            let wp = (0..=m).fold(Poly::zero(spec), |acc, j| {
                acc.add(&self.prod[j].pow(p.pow((m - j) as u32)).scale(&pi.pow(j as u64)))
            });
            ws.eq_exact(&gx.add(&gy)) && wp.eq_exact(&gx.mul(&gy))
        })
    }

    /// All coefficients lie in `O_F` (they are stored as `O_F` elements, so
    /// this re-checks non-negativity of their valuations).
    pub fn is_integral(&self) -> bool {
        self.sum
            .iter()
            .chain(self.prod.iter())
            .all(|q| q.terms().all(|(_, c)| c.valuation().lower_bound() >= 0))
    }

    /// Evaluate the sum law on `O_F`-valued vectors.
    pub fn add_of(&self, a: &[OFElement], b: &[OFElement]) -> Vec<OFElement> {
        self.sum.iter().take(a.len()).map(|s| s.eval(a, b)).collect()
    }

    /// Evaluate the product law on `O_F`-valued vectors.
    pub fn mul_of(&self, a: &[OFElement], b: &[OFElement]) -> Vec<OFElement> {
        self.prod.iter().take(a.len()).map(|s| s.eval(a, b)).collect()
    }
}

type CacheKey = (u64, Vec<BigInt>, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<WittPolySet>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<WittPolySet>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `S_0..S_{n-1}` and `P_0..P_{n-1}` for the field's uniformizer, memoized
/// per `(p, g, n)`.
pub fn witt_polys(spec: &Arc<FieldSpec>, n: usize) -> Result<Arc<WittPolySet>> {
    let key = (spec.p(), spec.eisenstein().to_vec(), n);
    if let Some(hit) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let built = Arc::new(WittPolySet::build(spec, n)?);
    let mut guard = cache().lock().expect("cache poisoned");
    Ok(guard.entry(key).or_insert(built).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> usize {
        Monomial::x(i)
    }
    fn y(i: usize) -> usize {
        Monomial::y(i)
    }

    #[test]
    fn degree_zero_laws() {
        let s = FieldSpec::unramified(3).unwrap();
        let w = witt_polys(&s, 2).unwrap();
        let s0 = Poly::var(&s, x(0)).add(&Poly::var(&s, y(0)));
        assert!(w.sum(0).eq_exact(&s0));
        let p0 = Poly::var(&s, x(0)).mul(&Poly::var(&s, y(0)));
        assert!(w.prod(0).eq_exact(&p0));
    }

    #[test]
    fn first_sum_law_by_hand() {
        // S_1 = x1 + y1 - Σ_{0<i<p} C(p,i)/ϖ x0^i y0^{p-i}
        for (p, g) in [(3u64, vec![-3i64, 1]), (3, vec![-3, 0, 1]), (2, vec![-2, 1]), (5, vec![-5, 1])] {
            let s = FieldSpec::from_i64(p, &g).unwrap();
            let w = witt_polys(&s, 2).unwrap();
            let pi = OFElement::uniformizer(&s);
            let mut expect = Poly::var(&s, x(1)).add(&Poly::var(&s, y(1)));
            for i in 1..p {
                let c = OFElement::from_int(&s, num_integer::binomial(p as i64, i as i64));
                let c = c.div(&pi).unwrap().to_of().unwrap();
                let mono = Monomial::var(x(0), i as u16).mul(&Monomial::var(y(0), (p - i) as u16));
                expect = expect.sub(&Poly::term(&s, mono, c));
            }
            assert!(w.sum(1).eq_exact(&expect), "p = {p}, g = {g:?}: {}", w.sum(1));
        }
    }

    #[test]
    fn first_product_law_p2() {
        // P_1 = x0^2 y1 + y0^2 x1 + ϖ x1 y1 for ϖ = 2
        let s = FieldSpec::unramified(2).unwrap();
        let w = witt_polys(&s, 2).unwrap();
        let m = |a: Monomial, b: Monomial| a.mul(&b);
        let expect = Poly::term(&s, m(Monomial::var(x(0), 2), Monomial::var(y(1), 1)), OFElement::one(&s))
            .add(&Poly::term(&s, m(Monomial::var(y(0), 2), Monomial::var(x(1), 1)), OFElement::one(&s)))
            .add(&Poly::term(&s, m(Monomial::var(x(1), 1), Monomial::var(y(1), 1)), OFElement::from_int(&s, 2)));
        assert!(w.prod(1).eq_exact(&expect), "{}", w.prod(1));
        assert!(w.check_ghost_identities());
    }

    #[test]
    fn ghost_of_teichmuller() {
        let s = FieldSpec::from_i64(3, &[-3, 0, 1]).unwrap();
        let r = OFElement::from_int(&s, 7);
        let t = vec![r.clone(), OFElement::zero(&s), OFElement::zero(&s)];
        let g = ghost(&s, &t);
        assert!(g[1].eq_at_prec(&r.pow(3)));
        assert!(g[2].eq_at_prec(&r.pow(9)));
        let back = from_ghost(&s, &g).unwrap();
        assert!(back.iter().zip(&t).all(|(a, b)| a.eq_at_prec(b)));
    }

    #[test]
    fn non_witt_ghost_vector_is_rejected() {
        let s = FieldSpec::unramified(3).unwrap();
        let g = vec![OFElement::from_int(&s, 1), OFElement::from_int(&s, 2)];
        assert!(matches!(from_ghost(&s, &g), Err(Error::IntegralityFailure(_))));
    }

    #[test]
    fn integrality_failure_names_the_monomial() {
        let s = FieldSpec::unramified(3).unwrap();
        let q = Poly::term(&s, Monomial::var(x(2), 4), OFElement::from_int(&s, 2));
        match q.div_pi_pow(1) {
            Err(Error::IntegralityFailure(msg)) => assert!(msg.contains("x2^4")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn length_bounds() {
        let s = FieldSpec::unramified(3).unwrap();
        assert!(witt_polys(&s, 0).is_err());
        assert!(witt_polys(&s, MAX_LEN + 1).is_err());
    }
}
