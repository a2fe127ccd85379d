//! Kisin modules over truncated `𝔖_F = O_F[[u]]`: `E(u)`-height, minimal
//! height, the section `ξ_α` through the products `Y_n`, and `Fil¹`.

use std::sync::Arc;

use num_integer::Integer;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::SeriesMatrix;
use crate::scalars::{FElement, FieldSpec, OFElement, Valuation};
use crate::series::{EisensteinE, FrobLift, USeries};

/// Frobenius matrix `A` (`φ(e) = e·A`), Eisenstein polynomial and declared
/// height.
#[derive(Clone, Debug)]
pub struct KisinModule {
    a: SeriesMatrix,
    e: EisensteinE,
    r: usize,
}

impl KisinModule {
    pub fn new(a: SeriesMatrix, e: EisensteinE, r: usize) -> Result<Self> {
        if !FieldSpec::same_field(a.spec(), e.spec()) {
            return Err(Error::SpecMismatch);
        }
        if !a.is_integral() {
            return Err(Error::InvalidInput("Frobenius matrix has non-integral entries".into()));
        }
        Ok(KisinModule { a, e, r })
    }

    pub fn rank1(a: USeries, e: EisensteinE, r: usize) -> Result<Self> {
        Self::new(SeriesMatrix::from_rows(vec![vec![a]])?, e, r)
    }

    pub fn matrix(&self) -> &SeriesMatrix {
        &self.a
    }

    pub fn eisenstein(&self) -> &EisensteinE {
        &self.e
    }

    pub fn rank(&self) -> usize {
        self.a.dim()
    }

    pub fn height(&self) -> usize {
        self.r
    }

    pub fn spec(&self) -> &Arc<FieldSpec> {
        self.a.spec()
    }

    pub fn direct_sum(&self, other: &KisinModule) -> Self {
        KisinModule { a: self.a.direct_sum(&other.a), e: self.e.clone(), r: self.r.max(other.r) }
    }
}

fn is_unit_series(x: &USeries) -> bool {
    x.coeff(0).is_some_and(|c| c.valuation() == Valuation::Exact(0))
}

/// `E^r·A⁻¹` is integral. Since `E` is prime in `𝔖_F` this forces
/// `det A = γE^m` with `γ` a unit, and then `adj(A)` must be divisible by
/// `E^{m-r}`.
pub fn verify_height(m: &KisinModule) -> Result<bool> {
    let det = m.a.det();
    if det.is_zero() {
        return Err(Error::Indeterminate("det A vanishes at the available precision".into()));
    }
    let (k, gamma) = m.e.e_order(&det)?;
    if !is_unit_series(&gamma) {
        return Ok(false);
    }
    if k <= m.r {
        return Ok(true);
    }
    if k > m.rank() * m.r {
        return Ok(false);
    }
    for x in m.a.adjugate().entries() {
        if x.coeffs().iter().all(FElement::is_exact_zero) {
            continue;
        }
        if m.e.e_order(x)?.0 < k - m.r {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `a = γE^m` with `γ` a unit of `𝔖_F`.
pub fn minimal_height_rank1(a: &USeries, e: &EisensteinE) -> Result<(usize, USeries)> {
    let (m, gamma) = e.e_order(a)?;
    if !is_unit_series(&gamma) {
        return Err(Error::InvalidInput(format!(
            "cofactor of E^{m} is not a unit (Weierstrass degree {:?})",
            gamma.wdeg()
        )));
    }
    Ok((m, gamma))
}

/// Smallest `n ≤ max_n` with `φⁿ(f/u) = E^k` as polynomials; degrees force
/// `k = (p-1)pⁿ/e₀`.
pub fn hypothesis_check(f: &FrobLift, e: &EisensteinE, max_n: usize) -> Result<Option<(usize, usize)>> {
    if !FieldSpec::same_field(f.spec(), e.spec()) {
        return Err(Error::SpecMismatch);
    }
    let spec = f.spec();
    let p = f.p() as usize;
    let e0 = e.degree();
    // φⁿ(f/u)(0) = a₁ while E^k(0) = c₀^k
    if f.a(1).is_zero() {
        return Ok(None);
    }
    for n in 0..=max_n {
        let deg = (p - 1) * p.pow(n as u32);
        if deg % e0 != 0 {
            continue;
        }
        let k = deg / e0;
        if !(f.a(1) - &e.c0().pow(k as u64)).is_zero() {
            continue;
        }
        // compare a short prefix before paying for the full degree
        let mut matched = true;
        for cap in [(deg + 1).min(32), deg + 1] {
            let mut iter_n = USeries::var(spec, cap);
            for _ in 0..n {
                iter_n = f.series(cap).compose(&iter_n)?;
            }
            let lhs = f.f0_series(cap).compose(&iter_n)?;
            if !lhs.eq_at_prec(&e.series(cap).pow(k as u64)) {
                matched = false;
                break;
            }
        }
        if matched {
            return Ok(Some((n, k)));
        }
    }
    Ok(None)
}

/// `A = u·Π_{i<n} φ^i(f/u)` together with the rank-one witnesses
/// `𝔐 = A𝔖_F ⊂ 𝔐′ = 𝔖_F`.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub a: USeries,
    pub l: usize,
    pub submodule: KisinModule,
    pub ambient: KisinModule,
}

/// `A·E^l = φ(A)` modulo `u^cap`.
pub fn verify_counterexample(f: &FrobLift, e: &EisensteinE, a: &USeries, l: usize) -> Result<()> {
    let cap = a.cap();
    let lhs = a.mul(&e.series(cap).pow(l as u64));
    let rhs = f.frobenius(a, 1);
    if lhs.eq_at_prec(&rhs) {
        Ok(())
    } else {
        Err(Error::IdentityFailed(format!("A·E^{l} ≠ φ(A) modulo u^{cap}")))
    }
}

pub fn counterexample_module(f: &FrobLift, e: &EisensteinE, n: usize, cap: usize) -> Result<Counterexample> {
    let spec = f.spec();
    let p = f.p() as usize;
    let deg = (p - 1) * p.pow(n as u32);
    let (l, rem) = deg.div_rem(&e.degree());
    if rem != 0 {
        return Err(Error::InvalidInput(format!("e₀ does not divide (p-1)p^{n}")));
    }
    let mut a = USeries::var(spec, cap);
    let mut g = f.f0_series(cap);
    for _ in 0..n {
        a = a.mul(&g);
        g = f.frobenius(&g, 1);
    }
    verify_counterexample(f, e, &a, l)?;
    let submodule = KisinModule::rank1(e.series(cap).pow(l as u64), e.clone(), l)?;
    let ambient = KisinModule::rank1(USeries::one(spec, cap), e.clone(), l)?;
    Ok(Counterexample { a, l, submodule, ambient })
}

/// Output of the iteration `Y_n = φ(A)⋯φⁿ(A)·A₀^{-n}`.
#[derive(Clone, Debug)]
pub struct XiTrace {
    pub y: SeriesMatrix,
    /// `g_n = w_α(Y_{n+1} - Y_n)` for `n = 0, …, max_n - 1`.
    pub gauges: Vec<Valuation>,
    /// `w_α(Y·A₀ - φ(A)·φ(Y))`.
    pub residual: Valuation,
}

fn constant_inverse(a: &SeriesMatrix) -> Result<SeriesMatrix> {
    let a0 = a.constant_part();
    let det0 = a0.det().coeff(0).cloned().unwrap_or_else(|| FElement::zero(a.spec()));
    if det0.is_zero() {
        return Err(Error::InvalidInput("A mod u is singular".into()));
    }
    let inv = det0.inv()?;
    Ok(a0.adjugate().scale(&inv))
}

fn check_xi_hypothesis(m: &KisinModule, f: &FrobLift) -> Result<()> {
    if f.a(1).valuation().lower_bound() < m.r as i64 + 1 {
        return Err(Error::InvalidInput(format!(
            "the iteration needs ϖ^{} | a_1, but v(a_1) = {}",
            m.r + 1,
            f.a(1).valuation()
        )));
    }
    Ok(())
}

fn intertwining_residual(m: &KisinModule, f: &FrobLift, y: &SeriesMatrix) -> SeriesMatrix {
    let phi_a = m.a.frobenius(f);
    y.mul(&m.a.constant_part()).sub(&phi_a.mul(&y.frobenius(f)))
}

pub fn xi_iterate(m: &KisinModule, f: &FrobLift, max_n: usize) -> Result<XiTrace> {
    check_xi_hypothesis(m, f)?;
    let e0 = m.e.degree();
    let cap = m.a.cap();
    let spec = m.spec();
    let a0inv = constant_inverse(&m.a)?;
    let mut phi_n = m.a.clone();
    let mut prod = SeriesMatrix::identity(spec, m.rank(), cap);
    let mut a0pow = prod.clone();
    let mut y = prod.clone();
    let mut gauges = Vec::with_capacity(max_n);
    for _ in 0..max_n {
        phi_n = phi_n.frobenius(f);
        prod = prod.mul(&phi_n);
        a0pow = a0pow.mul(&a0inv);
        let next = prod.mul(&a0pow);
        gauges.push(next.sub(&y).gauge_alpha(e0));
        y = next;
    }
    if !y.constant_part().eq_at_prec(&SeriesMatrix::identity(spec, m.rank(), cap)) {
        return Err(Error::Internal("Y is not the identity modulo u".into()));
    }
    if let Some((last, rest)) = gauges.split_last() {
        // a difference that vanishes at the working precision has converged
        let stalled = last.exact().is_some_and(|v| rest.iter().any(|g| g.lower_bound() >= v));
        if stalled {
            return Err(Error::NonStabilization(format!(
                "gauge trace does not diverge: {}",
                gauges.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            )));
        }
    }
    let residual = intertwining_residual(m, f, &y).gauge_alpha(e0);
    if let Some(last) = gauges.last() {
        let bound = last.lower_bound() + m.a.constant_part().min_valuation().lower_bound();
        if !residual.is_infinite() && residual.lower_bound() < bound {
            return Err(Error::IdentityFailed(format!(
                "Y·φ(A₀) - φ(A)·φ(Y) has gauge {residual}, expected at least {bound}"
            )));
        }
    }
    Ok(XiTrace { y, gauges, residual })
}

/// Apply `T(Y) = φ(A)·φ(Y)·A₀⁻¹` to `start` `steps` times. Every fixed point
/// congruent to `I` mod `u` is the limit of `Y_n`, so iterating from any
/// such start must approach it.
pub fn xi_iterate_from(m: &KisinModule, f: &FrobLift, start: &SeriesMatrix, steps: usize) -> Result<SeriesMatrix> {
    check_xi_hypothesis(m, f)?;
    let a0inv = constant_inverse(&m.a)?;
    let phi_a = m.a.frobenius(f);
    let mut y = start.clone();
    for _ in 0..steps {
        y = phi_a.mul(&y.frobenius(f)).mul(&a0inv);
    }
    Ok(y)
}

/// Element of `O_K = O_F[u]/E` as a polynomial of degree below `e₀`.
fn reduce_mod_e(e: &EisensteinE, x: &[FElement]) -> Vec<FElement> {
    let spec = e.spec();
    let e0 = e.degree();
    let mut cur = x.to_vec();
    for k in (e0..cur.len()).rev() {
        let t = cur[k].clone();
        if t.is_exact_zero() {
            continue;
        }
        for (i, c) in e.coeffs().iter().enumerate().take(e0) {
            cur[k - e0 + i] = &cur[k - e0 + i] - &(&t * &FElement::from_of(c.clone()));
        }
        cur[k] = FElement::zero(spec);
    }
    cur.resize(e0, FElement::zero(spec));
    cur
}

fn k_mul(e: &EisensteinE, a: &[FElement], b: &[FElement]) -> Vec<FElement> {
    let spec = e.spec();
    let mut out = vec![FElement::zero(spec); a.len() + b.len()];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + &(x * y);
        }
    }
    reduce_mod_e(e, &out)
}

/// `v_K` of `Σ c_i π^i` is `min(e₀·v_F(c_i) + i)`, the terms having distinct
/// valuations.
fn k_valuation(e0: usize, x: &[FElement]) -> Option<i64> {
    x.iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| e0 as i64 * c.valuation().lower_bound() + i as i64)
        .min()
}

/// `dim Fil¹ = d - rank(A mod E)` for a module of height 1.
pub fn fil1_rank(m: &KisinModule) -> Result<usize> {
    let height1 = KisinModule { r: 1, ..m.clone() };
    if !verify_height(&height1)? {
        return Err(Error::InvalidInput("Fil¹ rank needs a module of height 1".into()));
    }
    let e0 = m.e.degree();
    let d = m.rank();
    let mut rows: Vec<Vec<Vec<FElement>>> = (0..d)
        .map(|i| (0..d).map(|j| m.e.div_rem(m.a.get(i, j)).1).collect())
        .collect();
    let mut rank = 0;
    for col in 0..d {
        let pivot = (rank..d)
            .filter_map(|i| k_valuation(e0, &rows[i][col]).map(|v| (v, i)))
            .min();
        let Some((_, pr)) = pivot else { continue };
        rows.swap(rank, pr);
        let prow = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            let factor = row[col].clone();
            for j in col..d {
                let a = k_mul(&m.e, &prow[col], &row[j]);
                let b = k_mul(&m.e, &factor, &prow[j]);
                row[j] = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            }
        }
        rank += 1;
    }
    Ok(d - rank)
}

/// `s = e_order(det A)`, the minimal height of `∧^d 𝔐`.
pub fn det_height(m: &KisinModule) -> Result<usize> {
    Ok(minimal_height_rank1(&m.a.det(), &m.e)?.0)
}

/// Random invertible matrix over `O_F[u]` with entries of degree at most
/// `deg`, exact integer coefficients below `p²`.
pub fn random_unit_matrix(spec: &Arc<FieldSpec>, d: usize, deg: usize, cap: usize, rng: &mut impl Rng) -> SeriesMatrix {
    let p = spec.p() as i64;
    loop {
        let rows: Vec<Vec<USeries>> = (0..d)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let c: Vec<i64> = (0..=deg).map(|_| rng.gen_range(0..p * p)).collect();
                        USeries::from_ints(spec, &c, cap)
                    })
                    .collect()
            })
            .collect();
        let m = SeriesMatrix::from_rows(rows).expect("square");
        if m.det().coeff(0).is_some_and(|c| c.residue() != 0) {
            return m;
        }
    }
}

/// `U·diag(1, …, 1, E, …, E)·V` with `s` copies of `E`, declared height 1.
pub fn random_height1_module(e: &EisensteinE, d: usize, s: usize, cap: usize, rng: &mut impl Rng) -> Result<KisinModule> {
    let spec = e.spec();
    let u = random_unit_matrix(spec, d, 2, cap, rng);
    let v = random_unit_matrix(spec, d, 2, cap, rng);
    let diag: Vec<USeries> = (0..d)
        .map(|i| if i + s < d { USeries::one(spec, cap) } else { e.series(cap) })
        .collect();
    KisinModule::new(u.mul(&SeriesMatrix::diagonal(&diag)).mul(&v), e.clone(), 1)
}

/// `O_F` scalar as a constant series.
pub fn constant(spec: &Arc<FieldSpec>, c: &OFElement, cap: usize) -> USeries {
    USeries::constant(spec, FElement::from_of(c.clone()), cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Preset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q3() -> Arc<FieldSpec> {
        FieldSpec::unramified(3).unwrap().with_precision(30)
    }

    #[test]
    fn height_examples() {
        let s = q3();
        let e = Preset::Classical.eisenstein(&s);
        let id = KisinModule::new(SeriesMatrix::identity(&s, 2, 20), e.clone(), 0).unwrap();
        assert!(verify_height(&id).unwrap());
        let line = |r| KisinModule::rank1(e.series(20), e.clone(), r).unwrap();
        assert!(verify_height(&line(1)).unwrap());
        assert!(!verify_height(&line(0)).unwrap());
        let pi = KisinModule::rank1(USeries::from_ints(&s, &[3], 20), e.clone(), 3).unwrap();
        assert!(!verify_height(&pi).unwrap());
    }

    #[test]
    fn height_needs_divisible_adjugate() {
        let s = q3();
        let e = Preset::Classical.eisenstein(&s);
        let es = e.series(20);
        // det = E² but the adjugate has a unit entry
        let a = SeriesMatrix::from_rows(vec![
            vec![es.clone(), USeries::one(&s, 20)],
            vec![USeries::zero(&s, 20), es.clone()],
        ])
        .unwrap();
        assert!(!verify_height(&KisinModule::new(a.clone(), e.clone(), 1).unwrap()).unwrap());
        assert!(verify_height(&KisinModule::new(a, e.clone(), 2).unwrap()).unwrap());
        let b = SeriesMatrix::diagonal(&[es.clone(), es]);
        assert!(verify_height(&KisinModule::new(b, e, 1).unwrap()).unwrap());
    }

    #[test]
    fn minimal_height_examples() {
        let s = q3();
        let e = Preset::Cyclotomic.eisenstein(&s);
        let f = Preset::Cyclotomic.frob_lift(&s);
        let (m, g) = minimal_height_rank1(&f.f0_series(20), &e).unwrap();
        assert_eq!(m, 1);
        assert!(g.eq_at_prec(&USeries::one(&s, g.cap())));
        assert_eq!(minimal_height_rank1(&USeries::from_ints(&s, &[2, 3], 20), &e).unwrap().0, 0);
        let pe = e.series(20).scale(&FElement::from_int(&s, 3));
        assert!(minimal_height_rank1(&pe, &e).is_err());
    }

    #[test]
    fn hypothesis_verdicts() {
        for p in [3u64, 5] {
            let s = FieldSpec::unramified(p).unwrap();
            let cyc = hypothesis_check(&Preset::Cyclotomic.frob_lift(&s), &Preset::Cyclotomic.eisenstein(&s), 4);
            assert_eq!(cyc.unwrap(), Some((0, 1)));
            let tw = hypothesis_check(&Preset::Twisted.frob_lift(&s), &Preset::Twisted.eisenstein(&s), 4);
            assert_eq!(tw.unwrap(), Some((1, p as usize - 1)));
            let cl = hypothesis_check(&Preset::Classical.frob_lift(&s), &Preset::Classical.eisenstein(&s), 6);
            assert_eq!(cl.unwrap(), None);
            // f/u = u^{p-1} + ϖ is E itself
            let lt = hypothesis_check(&Preset::LubinTate.frob_lift(&s), &Preset::LubinTate.eisenstein(&s), 3);
            assert_eq!(lt.unwrap(), Some((0, 1)));
            let e = EisensteinE::from_ints(&s, &[p as i64, p as i64, 1]).unwrap();
            let none = hypothesis_check(&Preset::LubinTate.frob_lift(&s), &e, 3);
            assert_eq!(none.unwrap(), None);
        }
    }

    #[test]
    fn counterexamples() {
        let s = q3();
        let cyc = counterexample_module(&Preset::Cyclotomic.frob_lift(&s), &Preset::Cyclotomic.eisenstein(&s), 0, 40)
            .unwrap();
        assert!(cyc.a.eq_at_prec(&USeries::var(&s, 40)));
        assert_eq!(cyc.l, 1);
        let f = Preset::Twisted.frob_lift(&s);
        let tw = counterexample_module(&f, &Preset::Twisted.eisenstein(&s), 1, 40).unwrap();
        assert!(tw.a.eq_at_prec(&f.series(40)));
        assert_eq!(tw.l, 2);
        assert!(verify_height(&tw.submodule).unwrap() && verify_height(&tw.ambient).unwrap());
        let bogus = USeries::from_ints(&s, &[0, 1, 1], 40);
        assert!(matches!(
            verify_counterexample(&f, &Preset::Twisted.eisenstein(&s), &bogus, 2),
            Err(Error::IdentityFailed(_))
        ));
    }

    #[test]
    fn fil1_examples() {
        let s = q3();
        let e = Preset::Classical.eisenstein(&s);
        let id = KisinModule::new(SeriesMatrix::identity(&s, 2, 20), e.clone(), 1).unwrap();
        assert_eq!(fil1_rank(&id).unwrap(), 0);
        let line = KisinModule::rank1(e.series(20), e.clone(), 1).unwrap();
        assert_eq!(fil1_rank(&line).unwrap(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_height1_module(&e, 3, 2, 20, &mut rng).unwrap();
        assert_eq!(fil1_rank(&m).unwrap(), 2);
        assert_eq!(det_height(&m).unwrap(), 2);
    }

    #[test]
    fn xi_constant_matrix_is_fixed() {
        let s = q3();
        let e = Preset::Classical.eisenstein(&s);
        let f = FrobLift::from_ints(&s, &[9, 0, 1]).unwrap();
        let a = SeriesMatrix::from_rows(vec![
            vec![USeries::from_ints(&s, &[1], 20), USeries::from_ints(&s, &[2], 20)],
            vec![USeries::from_ints(&s, &[3], 20), USeries::from_ints(&s, &[4], 20)],
        ])
        .unwrap();
        let m = KisinModule::new(a, e, 1).unwrap();
        let t = xi_iterate(&m, &f, 4).unwrap();
        assert!(t.y.eq_at_prec(&SeriesMatrix::identity(&s, 2, 20)));
        assert!(t.gauges.iter().all(|g| g.exact().is_none()));
    }

    #[test]
    fn xi_needs_divisible_linear_term() {
        let s = q3();
        let e = Preset::Classical.eisenstein(&s);
        let m = KisinModule::rank1(e.series(20), e.clone(), 1).unwrap();
        let f = FrobLift::from_ints(&s, &[3, 0, 1]).unwrap();
        assert!(matches!(xi_iterate(&m, &f, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn xi_random_module_diverges() {
        let s = q3();
        let e = Preset::Classical.eisenstein(&s);
        let f = FrobLift::from_ints(&s, &[9, 0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_height1_module(&e, 2, 1, 30, &mut rng).unwrap();
        let t = xi_iterate(&m, &f, 7).unwrap();
        let g: Vec<i64> = t.gauges.iter().map(|g| g.lower_bound()).collect();
        assert!(g.windows(2).skip(1).all(|w| w[0] < w[1]), "{g:?}");
    }
}
