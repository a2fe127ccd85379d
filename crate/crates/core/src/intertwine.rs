//! Power series `ξ` with `f(ξ(x)) = ξ(f′(x))` intertwining two Frobenius
//! lifts, built degree by degree.
//!
//! With `s` the lowest index of a nonzero coefficient and
//! `f(ξ_i) - ξ_i(f′) ≡ λ x^{i+s} mod x^{i+s+1}`, the next coefficient is
//! `μ_{i+1} = -λ / (a_1 - a′_1^{i+1})` for `s = 1` and
//! `μ_{i+1} = -λ / (s a_s μ₀^{s-1})` for `s > 1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalars::{FElement, FieldSpec, OFElement, Valuation};
use crate::series::{FrobLift, USeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Compatibility {
    pub s: usize,
    pub s_prime: usize,
    pub ok: bool,
}

/// `f` and `f′` can be intertwined only if their lowest terms share the index
/// and the valuation.
pub fn check_compatible(f: &FrobLift, f2: &FrobLift) -> Result<Compatibility> {
    if !FieldSpec::same_field(f.spec(), f2.spec()) {
        return Err(Error::SpecMismatch);
    }
    let s = f.lowest_index();
    let s_prime = f2.lowest_index();
    let ok = s == s_prime && f.a(s).valuation() == f2.a(s).valuation();
    Ok(Compatibility { s, s_prime, ok })
}

/// Candidates for `μ₀`: the free choice (default 1) when `s = 1`, otherwise
/// every unit with `μ₀^{s-1} = a′_s/a_s`.
pub fn compute_mu0(f: &FrobLift, f2: &FrobLift, choice: Option<OFElement>) -> Result<Vec<OFElement>> {
    let c = check_compatible(f, f2)?;
    if !c.ok {
        return Err(Error::Incompatible(format!(
            "lowest terms differ (s = {}, s' = {})",
            c.s, c.s_prime
        )));
    }
    let spec = f.spec();
    if c.s == 1 {
        if !f.a(1).eq_at_prec(f2.a(1)) {
            return Err(Error::Incompatible("incompatible linear terms: a_1 ≠ a'_1".into()));
        }
        let mu0 = choice.unwrap_or_else(|| OFElement::one(spec));
        if !mu0.is_unit() {
            return Err(Error::InvalidInput("μ₀ must be a unit".into()));
        }
        return Ok(vec![mu0]);
    }
    let ratio = f2.a(c.s).div(f.a(c.s))?.to_of()?;
    let roots = match ratio.root(c.s as u64 - 1) {
        Ok(r) => r,
        Err(Error::NoResidueRoot(msg)) => {
            return Err(Error::NoResidueRoot(format!("no μ₀ in O_F: {msg}")));
        }
        Err(e) => return Err(e),
    };
    match choice {
        Some(ch) => roots
            .roots
            .iter()
            .find(|r| r.residue() == ch.residue())
            .map(|r| vec![r.clone()])
            .ok_or_else(|| Error::InvalidInput("requested μ₀ is not a root".into())),
        None => Ok(roots.roots),
    }
}

/// Precision bookkeeping for one coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loss {
    pub degree: usize,
    pub divisor_valuation: i64,
    pub lambda_valuation: Valuation,
    /// Absolute ϖ-adic precision of `μ_degree`.
    pub precision: i64,
}

#[derive(Clone, Debug)]
pub struct IntertwineResult {
    pub xi: USeries,
    pub mu0: OFElement,
    pub integral: bool,
    /// `f∘ξ ≡ ξ∘f′ mod (x^M, ϖ^N)` was checked by direct composition.
    pub verified_to: (usize, i64),
    pub losses: Vec<Loss>,
}

fn divisor(f: &FrobLift, f2: &FrobLift, s: usize, mu0: &OFElement, i: usize) -> OFElement {
    if s == 1 {
        f.a(1) - &f2.a(1).pow(i as u64 + 1)
    } else {
        &(&OFElement::from_int(f.spec(), s as i64) * f.a(s)) * &mu0.pow(s as u64 - 1)
    }
}

/// Starting ϖ-adic precision needed to reach `n_target` after `m` divisions.
pub fn required_precision(f: &FrobLift, f2: &FrobLift, m: usize, n_target: i64) -> Result<i64> {
    let c = check_compatible(f, f2)?;
    let v = divisor(f, f2, c.s, &OFElement::one(f.spec()), 1)
        .valuation()
        .exact()
        .ok_or_else(|| Error::PrecisionExhausted("divisor of the recursion vanishes".into()))?;
    Ok(n_target + m as i64 * v)
}

/// `f(ξ(x)) - ξ(f′(x))` modulo `x^cap`.
pub fn intertwine_defect(f: &FrobLift, f2: &FrobLift, xi: &USeries, cap: usize) -> Result<USeries> {
    let xi = xi.truncate(cap);
    let lhs = f.series(xi.cap()).compose(&xi)?;
    let rhs = xi.compose(&f2.series(xi.cap()))?;
    Ok(lhs.sub(&rhs))
}

/// Direct check of `f∘ξ ≡ ξ∘f′ mod (x^m, ϖ^n)`: every coefficient of the
/// defect below `x^m` must be zero and known to at least `ϖ^n`.
pub fn verify_intertwine(f: &FrobLift, f2: &FrobLift, xi: &USeries, m: usize, n: i64) -> Result<bool> {
    if xi.constant_term().is_some_and(|c| !c.is_exact_zero()) {
        return Err(Error::NonzeroConstantTerm);
    }
    if xi.cap() < m {
        return Ok(false);
    }
    let d = intertwine_defect(f, f2, xi, m)?;
    Ok(d.cap() >= m && d.coeffs().iter().take(m).all(|c| c.is_zero() && c.abs_prec() >= n))
}

/// Build `ξ = μ₀x + μ₂x² + …` modulo `x^m` and verify it to `ϖ^n_target`.
/// The working precision is the default precision of `f`'s field.
pub fn solve_intertwiner(
    f: &FrobLift,
    f2: &FrobLift,
    mu0: &OFElement,
    m: usize,
    n_target: i64,
) -> Result<IntertwineResult> {
    let c = check_compatible(f, f2)?;
    if !c.ok {
        return Err(Error::Incompatible(format!("s = {}, s' = {}", c.s, c.s_prime)));
    }
    if !mu0.is_unit() {
        return Err(Error::InvalidInput("μ₀ must be a unit".into()));
    }
    let s = c.s;
    let spec: &Arc<FieldSpec> = f.spec();
    let work = spec.default_prec();
    let need = required_precision(f, f2, m, n_target)?;
    if work < need {
        return Err(Error::PrecisionExhausted(format!(
            "working precision {work} is below the {need} digits needed for x^{m} at ϖ^{n_target}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidInput("order cap must be at least 2".into()));
    }
    let mut coeffs = vec![FElement::zero(spec); m];
    coeffs[1] = FElement::from_of(mu0.clone());
    let mut losses = Vec::with_capacity(m);
    for i in 1..m - 1 {
        let xi = USeries::new(spec, coeffs.clone());
        let cap = i + s + 1;
        let d = intertwine_defect(f, f2, &xi.truncate(cap.min(m)), cap.min(m))?;
        for (k, ck) in d.coeffs().iter().enumerate().take(i + s) {
            if !ck.is_zero() {
                return Err(Error::Internal(format!(
                    "defect has a nonzero coefficient at x^{k} before degree {}",
                    i + s
                )));
            }
        }
        if cap > m {
            // the coefficient μ_{i+1} only affects x^{i+s} ≥ x^m
            break;
        }
        let lambda = d.coeff(i + s).expect("within cap").clone();
        if lambda.abs_prec() < 1 {
            return Err(Error::PrecisionExhausted(format!("λ at degree {} is unknown modulo ϖ", i + 1)));
        }
        if lambda.valuation().lower_bound() < 1 {
            return Err(Error::Internal(format!("λ at degree {} is not divisible by ϖ", i + 1)));
        }
        let dv = divisor(f, f2, s, mu0, i);
        let dval = dv.valuation().exact().ok_or_else(|| {
            Error::PrecisionExhausted(format!("divisor vanishes at degree {}", i + 1))
        })?;
        let inv = FElement::from_of(dv.truncate(work)).inv()?;
        let mu = -&(&lambda * &inv);
        losses.push(Loss {
            degree: i + 1,
            divisor_valuation: dval,
            lambda_valuation: lambda.valuation(),
            precision: mu.abs_prec(),
        });
        coeffs[i + 1] = mu;
    }
    let xi = USeries::new(spec, coeffs);
    let integral = xi.is_integral();
    let theorem_backed = f.a(s).valuation() == Valuation::Exact(1) && f2.a(s).valuation() == Valuation::Exact(1);
    if theorem_backed && !integral {
        return Err(Error::Internal("ξ is not integral although v(a_s) = v(ϖ)".into()));
    }
    if !verify_intertwine(f, f2, &xi, m, n_target)? {
        return Err(Error::IdentityFailed(format!(
            "f∘ξ ≢ ξ∘f′ modulo (x^{m}, ϖ^{n_target})"
        )));
    }
    Ok(IntertwineResult { xi, mu0: mu0.clone(), integral, verified_to: (m, n_target), losses })
}

/// Solve for every admissible `μ₀`, labelled by its choice.
pub fn solve_all(f: &FrobLift, f2: &FrobLift, choice: Option<OFElement>, m: usize, n_target: i64) -> Result<Vec<IntertwineResult>> {
    compute_mu0(f, f2, choice)?
        .iter()
        .map(|mu0| solve_intertwiner(f, f2, mu0, m, n_target))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Preset;

    fn lift(spec: &Arc<FieldSpec>, c: &[i64]) -> FrobLift {
        FrobLift::from_ints(spec, c).unwrap()
    }

    #[test]
    fn compatibility_examples() {
        let s = FieldSpec::unramified(3).unwrap();
        let cyc = Preset::Cyclotomic.frob_lift(&s);
        let c = check_compatible(&cyc, &cyc).unwrap();
        assert!(c.ok && c.s == 1);
        assert!(check_compatible(&cyc, &lift(&s, &[3, 0, 1])).unwrap().ok);
        let lt = Preset::LubinTate.frob_lift(&s);
        let pi = OFElement::uniformizer(&s);
        let quad = FrobLift::new(&s, vec![OFElement::zero(&s), pi, OFElement::one(&s)]).unwrap();
        let c = check_compatible(&lt, &quad).unwrap();
        assert!(!c.ok);
        assert_eq!((c.s, c.s_prime), (1, 2));
    }

    #[test]
    fn mu0_examples() {
        let s = FieldSpec::unramified(3).unwrap();
        let cyc = Preset::Cyclotomic.frob_lift(&s);
        let m = compute_mu0(&cyc, &cyc, None).unwrap();
        assert!(m[0].eq_at_prec(&OFElement::one(&s)));
        let m = compute_mu0(&lift(&s, &[0, 3, 1]), &lift(&s, &[0, 12, 1]), None).unwrap();
        assert_eq!(m.len(), 1);
        assert!(m[0].eq_at_prec(&OFElement::from_int(&s, 4)));
        let s5 = FieldSpec::unramified(5).unwrap();
        let err = compute_mu0(&lift(&s5, &[0, 0, 5, 0, 1]), &lift(&s5, &[0, 0, 10, 0, 1]), None).unwrap_err();
        assert!(matches!(err, Error::NoResidueRoot(_)));
        let two = compute_mu0(&lift(&s5, &[0, 0, 5, 0, 1]), &lift(&s5, &[0, 0, 20, 0, 1]), None).unwrap();
        assert_eq!(two.len(), 2);
        let err = compute_mu0(&cyc, &lift(&s, &[6, 0, 1]), None).unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
    }

    #[test]
    fn identity_intertwiner() {
        let s = FieldSpec::unramified(3).unwrap().with_precision(40);
        let f = Preset::Cyclotomic.frob_lift(&s);
        let r = solve_intertwiner(&f, &f, &OFElement::one(&s), 20, 10).unwrap();
        assert!(r.xi.eq_at_prec(&USeries::var(&s, 20)));
        assert!(r.integral);
    }

    #[test]
    fn verify_examples() {
        let s = FieldSpec::unramified(3).unwrap();
        let f = Preset::Classical.frob_lift(&s);
        assert!(verify_intertwine(&f, &f, &USeries::var(&s, 10), 10, 5).unwrap());
        let bent = USeries::from_ints(&s, &[0, 1, 1], 10);
        assert!(!verify_intertwine(&f, &f, &bent, 10, 5).unwrap());
        let s2 = FieldSpec::unramified(2).unwrap();
        let f2 = Preset::Classical.frob_lift(&s2);
        assert!(!verify_intertwine(&f2, &f2, &USeries::from_ints(&s2, &[0, 1, 1], 4), 4, 3).unwrap());
    }

    #[test]
    fn cyclotomic_against_linear() {
        let s = FieldSpec::unramified(3).unwrap();
        let f = Preset::Cyclotomic.frob_lift(&s);
        let f2 = lift(&s, &[3, 0, 1]);
        let need = required_precision(&f, &f2, 25, 10).unwrap();
        assert_eq!(need, 35);
        assert!(matches!(
            solve_intertwiner(&f, &f2, &OFElement::one(&s), 25, 10),
            Err(Error::PrecisionExhausted(_))
        ));
        let s = s.with_precision(need);
        let f = Preset::Cyclotomic.frob_lift(&s);
        let f2 = lift(&s, &[3, 0, 1]);
        let r = solve_intertwiner(&f, &f2, &OFElement::one(&s), 25, 10).unwrap();
        assert!(r.integral);
        assert_eq!(r.verified_to, (25, 10));
        assert!(r.losses.iter().all(|l| l.divisor_valuation == 1));
    }

    #[test]
    fn quadratic_lowest_term() {
        let s = FieldSpec::unramified(3).unwrap().with_precision(40);
        let f = lift(&s, &[0, 3, 1]);
        let f2 = lift(&s, &[0, 12, 1]);
        let mu0 = compute_mu0(&f, &f2, None).unwrap().remove(0);
        let r = solve_intertwiner(&f, &f2, &mu0, 15, 10).unwrap();
        assert!(verify_intertwine(&f, &f2, &r.xi, 15, 10).unwrap());
    }
}
