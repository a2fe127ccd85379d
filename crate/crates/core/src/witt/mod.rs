//! Truncated ϖ-Witt vectors over the perfection model of `R`, and the
//! embedding `u ↦ {ū}_f` as the fixed point of `f ∘ φ⁻¹`.

pub mod perf;
pub mod poly;

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalars::{FieldSpec, OFElement};
use crate::series::{EisensteinE, FrobLift};

pub use perf::{PerfBudget, PerfSeries};
pub use poly::{witt_polys, Monomial, Poly, WittPolySet, MAX_LEN};

/// Outcome of the symbolic and numerical checks on the Witt laws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfTest {
    pub len: usize,
    pub ghost_identities: bool,
    pub integral: bool,
    pub samples: usize,
    /// Random pairs where the ghost map failed to turn `S`, `P` into `+`, `·`.
    pub failures: usize,
}

impl SelfTest {
    pub fn passed(&self) -> bool {
        self.ghost_identities && self.integral && self.failures == 0
    }
}

/// Check `S`, `P` up to `len` symbolically, then evaluate them on `samples`
/// random exact pairs and compare ghost components.
pub fn witt_selftest(spec: &Arc<FieldSpec>, len: usize, samples: usize, rng: &mut impl Rng) -> Result<SelfTest> {
    let polys = witt_polys(spec, len)?;
    let p = spec.p();
    let random_vec = |rng: &mut dyn rand::RngCore| -> Result<Vec<OFElement>> {
        (0..len)
            .map(|_| {
                let digits: Vec<u64> = (0..4).map(|_| rng.gen_range(0..p)).collect();
                let x = OFElement::from_digits(spec, &digits, None)?;
                Ok(if rng.gen_bool(0.5) { -x } else { x })
            })
            .collect()
    };
    let mut failures = 0;
    for _ in 0..samples {
        let a = random_vec(rng)?;
        let b = random_vec(rng)?;
        let (ga, gb) = (poly::ghost(spec, &a), poly::ghost(spec, &b));
        let gs = poly::ghost(spec, &polys.add_of(&a, &b));
        let gp = poly::ghost(spec, &polys.mul_of(&a, &b));
        let ok = (0..len).all(|m| {
            (&gs[m] - &(&ga[m] + &gb[m])).is_exact_zero() && (&gp[m] - &(&ga[m] * &gb[m])).is_exact_zero()
        });
        if !ok {
            failures += 1;
        }
    }
    Ok(SelfTest {
        len,
        ghost_identities: polys.check_ghost_identities(),
        integral: polys.is_integral(),
        samples,
        failures,
    })
}

/// Witt vectors of a fixed length over the perfection with a fixed budget.
#[derive(Clone, Debug)]
pub struct WittRing {
    spec: Arc<FieldSpec>,
    len: usize,
    budget: PerfBudget,
    polys: Arc<WittPolySet>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WittVec {
    comps: Vec<PerfSeries>,
}

impl WittVec {
    pub fn components(&self) -> &[PerfSeries] {
        &self.comps
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn eq_at_prec(&self, other: &WittVec) -> bool {
        self.comps.len() == other.comps.len()
            && self.comps.iter().zip(&other.comps).all(|(a, b)| a.eq_at_prec(b))
    }
}

impl WittRing {
    pub fn new(spec: &Arc<FieldSpec>, len: usize, budget: PerfBudget) -> Result<Self> {
        let polys = witt_polys(spec, len)?;
        Ok(WittRing { spec: spec.clone(), len, budget, polys })
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

    pub fn budget(&self) -> PerfBudget {
        self.budget
    }

    pub fn polys(&self) -> &WittPolySet {
        &self.polys
    }

    fn p(&self) -> u64 {
        self.spec.p()
    }

    pub fn from_components(&self, comps: Vec<PerfSeries>) -> Result<WittVec> {
        if comps.len() != self.len {
            return Err(Error::InvalidInput(format!(
                "expected {} Witt components, got {}",
                self.len,
                comps.len()
            )));
        }
        if comps.iter().any(|c| c.p() != self.p() || c.budget() != self.budget) {
            return Err(Error::InvalidInput("component from a different perfection ring".into()));
        }
        Ok(WittVec { comps })
    }

    pub fn zero(&self) -> WittVec {
        self.teich(&PerfSeries::zero(self.p(), self.budget))
    }

    pub fn one(&self) -> WittVec {
        self.teich(&PerfSeries::one(self.p(), self.budget))
    }

    /// `ū = t`, the distinguished element of `R`.
    pub fn ubar(&self) -> PerfSeries {
        PerfSeries::var(self.p(), self.budget)
    }

    /// Teichmüller lift `[r] = (r, 0, …, 0)`.
    pub fn teich(&self, r: &PerfSeries) -> WittVec {
        let mut comps = vec![PerfSeries::zero(self.p(), self.budget); self.len];
        comps[0] = r.clone();
        WittVec { comps }
    }

    /// Image of a scalar of `O_F`: its Witt components in `W_ϖ(O_F)` (ghost
    /// vector `(c, c, …)`) reduced modulo ϖ.
    pub fn scalar(&self, c: &OFElement) -> Result<WittVec> {
        let ghosts = vec![c.clone(); self.len];
        let comps = poly::from_ghost(&self.spec, &ghosts)?;
        Ok(WittVec {
            comps: comps
                .iter()
                .map(|x| PerfSeries::constant(self.p(), self.budget, x.residue()))
                .collect(),
        })
    }

    fn eval(&self, law: &[(Monomial, u64)], a: &WittVec, b: &WittVec, cache: &mut HashMap<(usize, u16), PerfSeries>) -> PerfSeries {
        let p = self.p();
        let mut acc = PerfSeries::zero(p, self.budget);
        for (mono, c) in law {
            let mut term = PerfSeries::constant(p, self.budget, *c);
            for (i, &e) in mono.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let base = if i < MAX_LEN { &a.comps[i] } else { &b.comps[i - MAX_LEN] };
                if base.is_exact_zero() {
                    term = PerfSeries::zero(p, self.budget);
                    break;
                }
                let pw = cache.entry((i, e)).or_insert_with(|| base.pow(e as u64));
                term = term.mul(pw);
            }
            acc = acc.add(&term);
        }
        acc
    }

    pub fn add(&self, a: &WittVec, b: &WittVec) -> WittVec {
        let mut cache = HashMap::new();
        WittVec {
            comps: (0..self.len)
                .map(|m| self.eval(self.polys.sum_reduced(m), a, b, &mut cache))
                .collect(),
        }
    }

    pub fn mul(&self, a: &WittVec, b: &WittVec) -> WittVec {
        let mut cache = HashMap::new();
        WittVec {
            comps: (0..self.len)
                .map(|m| self.eval(self.polys.prod_reduced(m), a, b, &mut cache))
                .collect(),
        }
    }

    pub fn neg(&self, a: &WittVec) -> Result<WittVec> {
        Ok(self.mul(&self.scalar(&OFElement::from_int(&self.spec, -1))?, a))
    }

    pub fn sub(&self, a: &WittVec, b: &WittVec) -> Result<WittVec> {
        Ok(self.add(a, &self.neg(b)?))
    }

    /// `φ(Σ[a_i]ϖ^i) = Σ[a_i^p]ϖ^i`: componentwise `p`-th power.
    pub fn frob(&self, a: &WittVec) -> WittVec {
        WittVec { comps: a.comps.iter().map(PerfSeries::frob).collect() }
    }

    pub fn frob_inv(&self, a: &WittVec) -> Result<WittVec> {
        Ok(WittVec { comps: a.comps.iter().map(PerfSeries::frob_inv).collect::<Result<_>>()? })
    }

    /// `Σ c_i x^i` for `O_F` coefficients `c_0, c_1, …`.
    pub fn eval_poly(&self, coeffs: &[OFElement], x: &WittVec) -> Result<WittVec> {
        let mut acc = self.zero();
        for c in coeffs.iter().rev() {
            acc = self.mul(&acc, x);
            if !c.is_zero() {
                acc = self.add(&acc, &self.scalar(c)?);
            }
        }
        Ok(acc)
    }

    /// `f(x)` for a Frobenius lift.
    pub fn apply_lift(&self, f: &FrobLift, x: &WittVec) -> Result<WittVec> {
        let mut coeffs = vec![OFElement::zero(&self.spec)];
        coeffs.extend(f.coeffs().iter().cloned());
        self.eval_poly(&coeffs, x)
    }
}

/// Output of [`f_fixed_point`].
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub u: WittVec,
    /// Number of applications of `f ∘ φ⁻¹` before two iterates agreed.
    pub iterations: usize,
}

/// Iterate `x ↦ f(φ⁻¹(x))` from `start` until two consecutive iterates agree.
pub fn fixed_point_from(ring: &WittRing, f: &FrobLift, start: WittVec) -> Result<FixedPoint> {
    let limit = 2 * ring.len().max(1) + 1;
    let mut x = start;
    for it in 1..=limit {
        let next = ring.apply_lift(f, &ring.frob_inv(&x)?)?;
        if next.eq_at_prec(&x) {
            return Ok(FixedPoint { u: next, iterations: it });
        }
        x = next;
    }
    Err(Error::NonStabilization(format!("no two consecutive iterates agreed after {limit} steps")))
}

/// `{ū}_f`: the unique lift of `ū` with `φ(u) = f(u)`, starting from `[ū]`.
pub fn f_fixed_point(f: &FrobLift, len: usize, budget: PerfBudget) -> Result<FixedPoint> {
    let ring = WittRing::new(f.spec(), len, budget)?;
    fixed_point_from(&ring, f, ring.teich(&ring.ubar()))
}

/// Post-conditions of the fixed point: `φ(u) = f(u)` and `u ≡ [ū] mod ϖ`.
pub fn verify_fixed_point(ring: &WittRing, f: &FrobLift, u: &WittVec) -> Result<(bool, bool)> {
    let lhs = ring.frob(u);
    let rhs = ring.apply_lift(f, u)?;
    let lifts_ubar = u.comps[0].eq_at_prec(&ring.ubar());
    Ok((lhs.eq_at_prec(&rhs), lifts_ubar))
}

/// Result of comparing `E(u) mod ϖ` with `ū^{e₀}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EReduction {
    pub holds: bool,
    /// `v_R(E(u) mod ϖ)` with `v(p) = 1`, when the reduction is nonzero.
    pub v_r: Option<BigRational>,
    /// `v(ϖ) = 1/e_F`.
    pub v_pi: BigRational,
}

/// Compute `E(u)` in the Witt model and check that its reduction modulo ϖ
/// is `ū^{e₀}` times a unit, so that `v_R(E(u) mod ϖ) = e₀·v_R(ū) = v(ϖ)`.
pub fn check_e_reduction(ring: &WittRing, e: &EisensteinE, u: &WittVec) -> Result<EReduction> {
    let eu = ring.eval_poly(e.coeffs(), u)?;
    let red = &eu.comps[0];
    let e_f = ring.spec().e() as i64;
    let e0 = e.degree() as i64;
    let den = BigInt::from(red.den());
    // v_R(ū) = v(π) = 1/(e₀ e_F)
    let v_r = red
        .lowest_term()
        .map(|(k, _)| BigRational::new(BigInt::from(k), den.clone()) / BigRational::from_integer(BigInt::from(e0 * e_f)));
    let v_pi = BigRational::new(BigInt::from(1), BigInt::from(e_f));
    let lowest_is_ubar_e0 = red.lowest_term().map(|(k, _)| k == e0 as u64 * red.den()).unwrap_or(false);
    Ok(EReduction { holds: lowest_is_ubar_e0 && v_r.as_ref() == Some(&v_pi), v_r, v_pi })
}
