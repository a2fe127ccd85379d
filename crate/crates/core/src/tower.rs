//! Ramification of the tower `K_n = K(π_{n-1})` cut out by iterating a
//! Frobenius lift: `i_min`, the elementary levels `i_n`, the APF constant
//! and the Newton polygons of the ramification polynomials
//! `g_n = f_n(π_n u + π_n)/u`.
//!
//! Everything is valuation arithmetic; no field `K_n` is constructed.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::newton::NewtonPolygon;
use crate::scalars::Valuation;
use crate::series::FrobLift;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[derive(Clone, Debug)]
pub struct TowerSpec {
    pub f: FrobLift,
    /// `e₀ = [K : F]`.
    pub e0: u64,
    /// `e = v_F(p)`.
    pub e: u64,
    pub p: u64,
}

/// Valuation data of one ramification polynomial.
#[derive(Clone, Debug)]
pub struct RamificationPolygon {
    pub n: u32,
    /// `(i, v_n(b_i))` for `0 ≤ i ≤ p-1`.
    pub points: Vec<(u64, BigRational)>,
    /// Set where the minimum defining `v_n(b_i)` is attained twice, so the
    /// value is only a lower bound.
    pub tie: Vec<bool>,
    pub polygon: NewtonPolygon,
    /// Hull is the single segment from `(0, v_n(b_0))` to `(p-1, p)` with
    /// total drop `i_n(p-1)`.
    pub single_segment: bool,
    pub level: BigRational,
}

impl TowerSpec {
    pub fn new(f: FrobLift, e0: u64) -> Result<Self> {
        if e0 == 0 {
            return Err(Error::InvalidInput("e0 must be at least 1".into()));
        }
        let p = f.p();
        let e = f.spec().e() as u64;
        Ok(TowerSpec { f, e0, e, p })
    }

    /// `v_F(a_i)`, `None` for `a_i = 0`.
    fn val(&self, i: usize) -> Result<Option<i64>> {
        match self.f.a(i).valuation() {
            Valuation::Exact(v) => Ok(Some(v)),
            Valuation::Infinite => Ok(None),
            Valuation::AtLeast(v) => Err(Error::Indeterminate(format!(
                "a_{i} is zero modulo ϖ^{v}; its valuation is unknown"
            ))),
        }
    }

    /// `e_n = p^n e₀`.
    pub fn e_n(&self, n: u32) -> i64 {
        (self.p.pow(n) * self.e0) as i64
    }

    /// `min{ i : v_F(a_i) ≤ e }`.
    pub fn imin(&self) -> Result<usize> {
        for i in 1..=self.p as usize {
            if let Some(v) = self.val(i)? {
                if v <= self.e as i64 {
                    return Ok(i);
                }
            }
        }
        unreachable!("a_p = 1 has valuation 0")
    }

    /// `v_F(a_{i_min}) + ⌊i_min/p⌋ e`.
    fn weight(&self) -> Result<(usize, i64)> {
        let i = self.imin()?;
        let v = self.val(i)?.expect("a_{i_min} is nonzero");
        Ok((i, v + (i as i64 / self.p as i64) * self.e as i64))
    }

    /// `i_n = [e_n (v_F(a_{i_min}) + ⌊i_min/p⌋ e) + i_min - p] / (p-1)`.
    pub fn elementary_level(&self, n: u32) -> Result<BigRational> {
        if n == 0 {
            return Err(Error::InvalidInput("levels start at n = 1".into()));
        }
        let (i, w) = self.weight()?;
        let p = self.p as i64;
        Ok(BigRational::new(
            BigInt::from(self.e_n(n) * w + i as i64 - p),
            BigInt::from(p - 1),
        ))
    }

    /// `c = (e₀/(p-1))(v_F(a_{i_min}) + ⌊i_min/p⌋e) - (p - i_min)/(p(p-1))`.
    pub fn apf_constant(&self) -> Result<BigRational> {
        let (i, w) = self.weight()?;
        let p = self.p as i64;
        Ok(BigRational::new(BigInt::from(self.e0 as i64 * w), BigInt::from(p - 1))
            - BigRational::new(BigInt::from(p - i as i64), BigInt::from(p * (p - 1))))
    }

    /// `min_{1≤n≤max_n} i_n / p^n`, the infimum defining `c` over a finite range.
    pub fn level_infimum(&self, max_n: u32) -> Result<(u32, BigRational)> {
        let mut best: Option<(u32, BigRational)> = None;
        for n in 1..=max_n {
            let r = self.elementary_level(n)? / q(self.p.pow(n) as i64);
            if best.as_ref().is_none_or(|(_, b)| r < *b) {
                best = Some((n, r));
            }
        }
        best.ok_or_else(|| Error::InvalidInput("empty range".into()))
    }

    /// Closed form of `c`, cross-checked against the infimum over `n ≤ 10`
    /// and for positivity.
    pub fn checked_apf_constant(&self) -> Result<BigRational> {
        let c = self.apf_constant()?;
        let (_, inf) = self.level_infimum(10)?;
        if inf != c {
            return Err(Error::IdentityFailed(format!("closed form {c} differs from infimum {inf}")));
        }
        if c <= BigRational::zero() {
            return Err(Error::IdentityFailed(format!("APF constant {c} is not positive")));
        }
        Ok(c)
    }

    /// `v_n(b_i)` from `min{e_n e + p, e_n v_F(a_j) + j : i+1 ≤ j ≤ p-1}`
    /// (and `v_n(b_{p-1}) = p`), with a flag when the minimum is not unique.
    pub fn b_valuation(&self, n: u32, i: usize) -> Result<(i64, bool)> {
        let p = self.p as usize;
        if i == p - 1 {
            return Ok((p as i64, false));
        }
        let en = self.e_n(n);
        let mut candidates = vec![en * self.e as i64 + p as i64];
        for j in i + 1..p {
            if let Some(v) = self.val(j)? {
                candidates.push(en * v + j as i64);
            }
        }
        let m = *candidates.iter().min().unwrap();
        let tie = candidates.iter().filter(|&&c| c == m).count() > 1;
        Ok((m, tie))
    }

    pub fn ramification_polygon(&self, n: u32) -> Result<RamificationPolygon> {
        if n == 0 {
            return Err(Error::InvalidInput("ramification polygons start at n = 1".into()));
        }
        let p = self.p as usize;
        let mut points = Vec::with_capacity(p);
        let mut tie = Vec::with_capacity(p);
        for i in 0..p {
            let (v, t) = self.b_valuation(n, i)?;
            points.push((i as u64, q(v)));
            tie.push(t);
        }
        let polygon = NewtonPolygon::hull(&points)?;
        let level = self.elementary_level(n)?;
        let verts = polygon.vertices();
        let single_segment = verts.len() == 2
            && verts[0] == points[0]
            && verts[1] == (p as u64 - 1, q(p as i64))
            && &points[0].1 - q(p as i64) == &level * q(p as i64 - 1);
        Ok(RamificationPolygon { n, points, tie, polygon, single_segment, level })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::{FieldSpec, OFElement};
    use crate::series::Preset;
    use proptest::prelude::*;

    fn tower(preset: Preset, p: u64) -> TowerSpec {
        let s = FieldSpec::unramified(p).unwrap();
        let e0 = preset.eisenstein(&s).degree() as u64;
        TowerSpec::new(preset.frob_lift(&s), e0).unwrap()
    }

    #[test]
    fn cyclotomic_three() {
        let t = tower(Preset::Cyclotomic, 3);
        assert_eq!(t.imin().unwrap(), 1);
        for n in 1..=6 {
            assert_eq!(t.elementary_level(n).unwrap(), q(3i64.pow(n) - 1));
        }
        assert_eq!(t.checked_apf_constant().unwrap(), BigRational::new(2.into(), 3.into()));
        let poly = t.ramification_polygon(1).unwrap();
        assert_eq!(poly.points, vec![(0, q(7)), (1, q(8)), (2, q(3))]);
        assert!(poly.single_segment);
        assert_eq!(poly.polygon.slopes(), vec![q(-2)]);
    }

    #[test]
    fn classical_levels() {
        for p in [2u64, 3, 5] {
            let t = tower(Preset::Classical, p);
            assert_eq!(t.imin().unwrap(), p as usize);
            let e0 = t.e0 as i64;
            for n in 1..=4 {
                let expect = BigRational::new(BigInt::from(p.pow(n) as i64 * e0), BigInt::from(p as i64 - 1));
                assert_eq!(t.elementary_level(n).unwrap(), expect);
                let poly = t.ramification_polygon(n).unwrap();
                assert!(poly.single_segment);
            }
            assert_eq!(
                t.checked_apf_constant().unwrap(),
                BigRational::new(BigInt::from(e0), BigInt::from(p as i64 - 1))
            );
        }
    }

    #[test]
    fn large_linear_coefficient_gives_imin_p() {
        let s = FieldSpec::unramified(3).unwrap();
        let f = FrobLift::from_ints(&s, &[9, 0, 1]).unwrap();
        assert_eq!(TowerSpec::new(f, 1).unwrap().imin().unwrap(), 3);
    }

    #[test]
    fn lubin_tate_levels() {
        for (p, g) in [(3u64, vec![-3i64, 1]), (3, vec![-3, 0, 1]), (5, vec![5, 1])] {
            let s = FieldSpec::from_i64(p, &g).unwrap();
            let f = Preset::LubinTate.frob_lift(&s);
            let e0 = Preset::LubinTate.eisenstein(&s).degree() as u64;
            let t = TowerSpec::new(f, e0).unwrap();
            assert_eq!(t.imin().unwrap(), 1);
            for n in 1..=4 {
                let expect = BigRational::new(
                    BigInt::from((p.pow(n) * e0) as i64 + 1 - p as i64),
                    BigInt::from(p as i64 - 1),
                );
                assert_eq!(t.elementary_level(n).unwrap(), expect);
            }
        }
    }

    #[test]
    fn presets_give_single_segments() {
        for p in [2u64, 3, 5, 7] {
            for preset in Preset::ALL {
                let t = tower(preset, p);
                for n in 1..=4 {
                    let poly = t.ramification_polygon(n).unwrap();
                    assert!(poly.single_segment, "{preset} p={p} n={n}: {:?}", poly.points);
                    assert!(poly.polygon.slopes_strictly_increasing());
                }
                t.checked_apf_constant().unwrap();
            }
        }
    }

    #[test]
    fn level_ratio_increases_towards_its_limit() {
        let t = tower(Preset::Cyclotomic, 3);
        let (n, inf) = t.level_infimum(10).unwrap();
        assert_eq!(n, 1);
        assert_eq!(inf, t.apf_constant().unwrap());
        let ratios: Vec<BigRational> =
            (1..=10).map(|n| t.elementary_level(n).unwrap() / q(3i64.pow(n))).collect();
        assert!(ratios.windows(2).all(|w| w[0] <= w[1]));
    }

    proptest! {
        #[test]
        fn candidate_valuations_never_tie(pi in 0usize..3, vals in prop::collection::vec(prop::option::of(1u64..5), 4), e0 in 1u64..4, n in 1u32..4) {
            // candidates e_n v + j are pairwise distinct modulo e_n ≥ p
            let p = [2u64, 3, 5][pi];
            let s = FieldSpec::unramified(p).unwrap();
            let pi_el = OFElement::uniformizer(&s);
            let mut co: Vec<OFElement> = (1..p as usize)
                .map(|j| vals[(j - 1) % vals.len()].map_or(OFElement::zero(&s), |v| pi_el.pow(v)))
                .collect();
            co.push(OFElement::one(&s));
            let t = TowerSpec::new(FrobLift::new(&s, co).unwrap(), e0).unwrap();
            let poly = t.ramification_polygon(n).unwrap();
            prop_assert!(poly.tie.iter().all(|&x| !x));
        }

        #[test]
        fn remark_formula(pi in 0usize..3, v in 1i64..4, e_is_big in any::<bool>(), e0 in 1u64..6, unit in 1i64..3) {
            let p = [2u64, 3, 5][pi];
            let g: Vec<i64> = if e_is_big { let mut g = vec![-(p as i64)]; g.extend(vec![0; 3]); g.push(1); g } else { vec![-(p as i64), 1] };
            let s = FieldSpec::from_i64(p, &g).unwrap();
            let e = s.e() as i64;
            prop_assume!(v <= e);
            let a1 = OFElement::uniformizer(&s).pow(v as u64);
            let a1 = &a1 * &OFElement::from_int(&s, 1 + unit * p as i64);
            let mut co = vec![a1];
            co.extend((2..p).map(|_| OFElement::zero(&s)));
            co.push(OFElement::one(&s));
            let t = TowerSpec::new(FrobLift::new(&s, co).unwrap(), e0).unwrap();
            prop_assert_eq!(t.imin().unwrap(), 1);
            let remark = BigRational::new(BigInt::from(e0 as i64 * v), BigInt::from(p as i64 - 1))
                - BigRational::new(1.into(), BigInt::from(p));
            prop_assert_eq!(t.checked_apf_constant().unwrap(), remark);
        }
    }
}
