//! JSON encodings. Rationals are strings `"a/b"`, p-adic numbers are digit
//! lists with an absolute precision, exact values keep their integer
//! coordinates. Object keys come out sorted.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::matrix::SeriesMatrix;
use crate::newton::NewtonPolygon;
use crate::scalars::{FElement, FieldSpec, OFElement, Valuation};
use crate::series::{EisensteinE, FrobLift, USeries};
use crate::witt::{PerfSeries, WittVec};

fn bad(path: &str, what: &str) -> Error {
    Error::InvalidInput(format!("{path}: {what}"))
}

pub fn rational(q: &BigRational) -> Value {
    Value::String(q.to_string())
}

pub fn valuation(v: Valuation) -> Value {
    match v {
        Valuation::Exact(k) => json!(k),
        Valuation::AtLeast(k) => json!({ "at_least": k }),
        Valuation::Infinite => json!("inf"),
    }
}

pub fn field(spec: &FieldSpec) -> Value {
    json!({
        "p": spec.p(),
        "eisenstein": spec.eisenstein().iter().map(|g| g.to_string()).collect::<Vec<_>>(),
    })
}

/// Exact: `{"shift", "unit": [coordinates]}`. Approximate:
/// `{"shift", "digits", "prec"}` with `prec` absolute.
pub fn element(x: &FElement) -> Value {
    if x.is_exact() {
        json!({
            "shift": x.shift(),
            "unit": x.unit().coefficients().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        })
    } else {
        let rel = (x.abs_prec() - x.shift()).max(0) as usize;
        json!({ "shift": x.shift(), "digits": x.unit().digits(rel), "prec": x.abs_prec() })
    }
}

fn int_of(v: &Value, path: &str) -> Result<BigInt> {
    match v {
        Value::Number(n) => n.as_i64().map(BigInt::from).ok_or_else(|| bad(path, "expected an integer")),
        Value::String(s) => s.parse().map_err(|_| bad(path, "expected an integer string")),
        _ => Err(bad(path, "expected an integer")),
    }
}

fn i64_field(obj: &Map<String, Value>, key: &str, path: &str) -> Result<i64> {
    obj.get(key)
        .and_then(Value::as_i64)
        .ok_or_else(|| bad(&format!("{path}.{key}"), "expected an integer"))
}

/// Accepts an integer, an integer string, or either object form of
/// [`element`].
pub fn parse_element(spec: &Arc<FieldSpec>, v: &Value, path: &str) -> Result<FElement> {
    let obj = match v {
        Value::Object(o) => o,
        _ => return Ok(FElement::from_int(spec, int_of(v, path)?)),
    };
    let shift = obj.get("shift").map_or(Ok(0), |_| i64_field(obj, "shift", path))?;
    if let Some(unit) = obj.get("unit") {
        let coords = unit
            .as_array()
            .ok_or_else(|| bad(&format!("{path}.unit"), "expected a list"))?
            .iter()
            .enumerate()
            .map(|(i, c)| int_of(c, &format!("{path}.unit[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        if coords.len() > spec.e() {
            return Err(bad(&format!("{path}.unit"), "more coordinates than the ramification index"));
        }
        let pi = OFElement::uniformizer(spec);
        let u = coords
            .iter()
            .rev()
            .fold(OFElement::zero(spec), |acc, c| &(&acc * &pi) + &OFElement::from_int(spec, c.clone()));
        return Ok(FElement::from_of(u).mul_pi_pow(shift));
    }
    let digits = obj
        .get("digits")
        .and_then(Value::as_array)
        .ok_or_else(|| bad(path, "expected \"unit\" or \"digits\""))?
        .iter()
        .enumerate()
        .map(|(i, d)| d.as_u64().ok_or_else(|| bad(&format!("{path}.digits[{i}]"), "expected a digit")))
        .collect::<Result<Vec<_>>>()?;
    let prec = i64_field(obj, "prec", path)?;
    let rel = prec - shift;
    let unit = if rel <= 0 {
        OFElement::zero_at(spec, 0)
    } else {
        OFElement::from_digits(spec, &digits, Some(rel)).map_err(|e| bad(path, &e.to_string()))?
    };
    Ok(FElement::from_of(unit).mul_pi_pow(shift).cap_prec(prec))
}

fn parse_of(spec: &Arc<FieldSpec>, v: &Value, path: &str) -> Result<OFElement> {
    parse_element(spec, v, path)?.to_of().map_err(|e| bad(path, &e.to_string()))
}

fn list<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| bad(path, "expected a list"))
}

pub fn series(x: &USeries) -> Value {
    json!({ "coeffs": x.coeffs().iter().map(element).collect::<Vec<_>>(), "cap": x.cap() })
}

/// `{"coeffs": [...], "cap": M}` or a bare coefficient list (cap `default_cap`).
pub fn parse_series(spec: &Arc<FieldSpec>, v: &Value, default_cap: usize, path: &str) -> Result<USeries> {
    let (coeffs, cap) = match v {
        Value::Array(_) => (v, default_cap),
        Value::Object(o) => {
            let c = o.get("coeffs").ok_or_else(|| bad(path, "missing \"coeffs\""))?;
            let cap = match o.get("cap") {
                Some(m) => m.as_u64().ok_or_else(|| bad(&format!("{path}.cap"), "expected a count"))? as usize,
                None => default_cap,
            };
            (c, cap)
        }
        _ => return Err(bad(path, "expected a series")),
    };
    let items = list(coeffs, &format!("{path}.coeffs"))?
        .iter()
        .enumerate()
        .map(|(i, c)| parse_element(spec, c, &format!("{path}.coeffs[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if items.len() > cap {
        return Err(bad(path, "more coefficients than the cap"));
    }
    Ok(USeries::from_poly(spec, &items, cap))
}

pub fn matrix(m: &SeriesMatrix) -> Value {
    Value::Array(m.rows().iter().map(|r| Value::Array(r.iter().map(series).collect())).collect())
}

/// Row-major list of rows of series.
pub fn parse_matrix(spec: &Arc<FieldSpec>, v: &Value, default_cap: usize, path: &str) -> Result<SeriesMatrix> {
    let rows = list(v, path)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            list(r, &format!("{path}[{i}]"))?
                .iter()
                .enumerate()
                .map(|(j, x)| parse_series(spec, x, default_cap, &format!("{path}[{i}][{j}]")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SeriesMatrix::from_rows(rows).map_err(|e| bad(path, &e.to_string()))
}

fn of_list(xs: &[OFElement]) -> Value {
    Value::Array(xs.iter().map(|x| element(&FElement::from_of(x.clone()))).collect())
}

/// `{"coeffs": [a_1, …, a_p]}`.
pub fn frob_lift(f: &FrobLift) -> Value {
    json!({ "coeffs": of_list(f.coeffs()) })
}

pub fn coefficient_list(spec: &Arc<FieldSpec>, v: &Value, path: &str) -> Result<Vec<OFElement>> {
    let items = match v {
        Value::Object(o) => o.get("coeffs").ok_or_else(|| bad(path, "missing \"coeffs\""))?,
        _ => v,
    };
    list(items, path)?
        .iter()
        .enumerate()
        .map(|(i, c)| parse_of(spec, c, &format!("{path}[{i}]")))
        .collect()
}

pub fn parse_frob_lift(spec: &Arc<FieldSpec>, v: &Value, path: &str) -> Result<FrobLift> {
    FrobLift::new(spec, coefficient_list(spec, v, path)?).map_err(|e| bad(path, &e.to_string()))
}

/// `{"coeffs": [c_0, …, c_{e₀}]}`.
pub fn eisenstein(e: &EisensteinE) -> Value {
    json!({ "coeffs": of_list(e.coeffs()) })
}

pub fn parse_eisenstein(spec: &Arc<FieldSpec>, v: &Value, path: &str) -> Result<EisensteinE> {
    EisensteinE::new(spec, coefficient_list(spec, v, path)?).map_err(|e| bad(path, &e.to_string()))
}

/// Terms `{"num", "den_pow", "coeff"}` with the exponent `num/p^den_pow` in
/// lowest terms.
pub fn perf_series(x: &PerfSeries) -> Value {
    let p = x.p();
    let mut j = 0u32;
    let mut d = x.den();
    while d > 1 {
        d /= p;
        j += 1;
    }
    let terms: Vec<Value> = x
        .terms()
        .iter()
        .map(|(&num, &c)| {
            let (mut n, mut k) = (num, j);
            while k > 0 && n % p == 0 {
                n /= p;
                k -= 1;
            }
            json!({ "num": n, "den_pow": k, "coeff": c })
        })
        .collect();
    Value::Array(terms)
}

pub fn witt_vec(w: &WittVec) -> Value {
    Value::Array(w.components().iter().map(perf_series).collect())
}

pub fn polygon(np: &NewtonPolygon) -> Value {
    json!({
        "vertices": np.vertices().iter().map(|(x, y)| json!([x, rational(y)])).collect::<Vec<_>>(),
        "slopes": np.slopes().iter().map(rational).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_round_trip() {
        let s = FieldSpec::unramified(3).unwrap();
        let samples = [
            FElement::from_int(&s, -45),
            FElement::from_int(&s, 0),
            FElement::from_int(&s, 7).inv().unwrap(),
            FElement::pi_pow(&s, -2),
            FElement::zero_at(&s, 5),
            FElement::from_int(&s, 18).cap_prec(6),
        ];
        for x in &samples {
            let back = parse_element(&s, &element(x), "x").unwrap();
            assert!(back.eq_at_prec(x), "{x:?} -> {back:?}");
            assert_eq!(back.abs_prec(), x.abs_prec());
            assert_eq!(back.is_exact(), x.is_exact());
        }
        let r = FieldSpec::from_i64(3, &[-3, 0, 1]).unwrap();
        let x = FElement::from_of(&OFElement::uniformizer(&r) + &OFElement::from_int(&r, 5));
        assert!(parse_element(&r, &element(&x), "x").unwrap().eq_at_prec(&x));
    }

    #[test]
    fn series_and_matrix_inputs() {
        let s = FieldSpec::unramified(5).unwrap();
        let x = parse_series(&s, &json!([1, 0, "-3"]), 8, "s").unwrap();
        assert!(x.eq_at_prec(&USeries::from_ints(&s, &[1, 0, -3], 8)));
        assert_eq!(x.cap(), 8);
        let back = parse_series(&s, &series(&x), 3, "s").unwrap();
        assert_eq!(back.cap(), 8);
        let m = parse_matrix(&s, &json!([[[1], [0, 1]], [[5], {"coeffs": [1], "cap": 4}]]), 8, "A").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.get(1, 1).cap(), 4);
        let err = parse_matrix(&s, &json!([[[1], [0, "x"]]]), 8, "A").unwrap_err().to_string();
        assert!(err.contains("A[0]"), "{err}");
    }

    #[test]
    fn perf_exponents_in_lowest_terms() {
        use crate::witt::PerfBudget;
        let b = PerfBudget::default();
        let x = PerfSeries::monomial(3, b, 2, 9, 2).unwrap();
        assert_eq!(perf_series(&x), json!([{ "num": 1, "den_pow": 0, "coeff": 2 }]));
        let y = PerfSeries::monomial(3, b, 1, 1, 3).unwrap();
        assert_eq!(perf_series(&y), json!([{ "num": 1, "den_pow": 3, "coeff": 1 }]));
    }
}
