//! JSON input formats for forms, field profiles and subdomains.
//!
//! A form is either a named family,
//!
//! ```text
//! {"family": "cubic", "params": [1.0, -0.5, 0.25]}
//! ```
//!
//! with families `cubic` (α, β, γ), `cyclic` (a, b, c, d), `extremal_q` (no
//! parameters) and `corollary_q` (α, β, γ), or an explicit coefficient
//! matrix `{"matrix": [[...9 numbers...], ...9 rows]}` in entry order
//! `11, 22, 33, 12, 23, 31, 21, 32, 13`. A flat array of 81 numbers is also
//! accepted. Matrices are symmetrised, with a warning above 1e-9 asymmetry.

use crate::error::{Error, Result};
use crate::fields::{SpecialPotential, Subdomain};
use crate::forms::{CubicParams, CyclicParams, Mat9, QuadraticForm};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Asymmetry above which a warning is attached to a parsed matrix.
pub const ASYMMETRY_WARN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Cubic(CubicParams),
    Cyclic(CyclicParams),
    ExtremalQ,
    CorollaryQ { alpha: f64, beta: f64, gamma: f64 },
    Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormSpec {
    pub form: QuadraticForm,
    pub family: Family,
    pub warnings: Vec<String>,
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

fn number(v: &Value, what: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| spec_err(format!("{what} must be a number, got {v}")))?;
    if !x.is_finite() {
        return Err(spec_err(format!("{what} must be finite")));
    }
    Ok(x)
}

fn params<const N: usize>(family: &str, v: Option<&Value>) -> Result<[f64; N]> {
    let empty = Vec::new();
    let list = match v {
        None => &empty,
        Some(Value::Array(a)) => a,
        Some(other) => return Err(spec_err(format!("params must be an array, got {other}"))),
    };
    if list.len() != N {
        return Err(spec_err(format!("family {family} takes {N} parameters, got {}", list.len())));
    }
    let mut out = [0.0; N];
    for (i, x) in list.iter().enumerate() {
        out[i] = number(x, &format!("params[{i}]"))?;
    }
    Ok(out)
}

fn matrix(v: &Value) -> Result<Mat9> {
    let rows = v.as_array().ok_or_else(|| spec_err("matrix must be an array"))?;
    let flat: Vec<&Value> = if rows.len() == 81 {
        rows.iter().collect()
    } else if rows.len() == 9 {
        let mut flat = Vec::with_capacity(81);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_array().ok_or_else(|| spec_err(format!("matrix row {i} must be an array")))?;
            if r.len() != 9 {
                return Err(spec_err(format!("matrix row {i} has {} entries, expected 9", r.len())));
            }
            flat.extend(r.iter());
        }
        flat
    } else {
        return Err(spec_err(format!("matrix must be 9x9 or 81 numbers, got {} entries", rows.len())));
    };
    let mut m = Mat9::zeros();
    for (k, x) in flat.iter().enumerate() {
        m[(k / 9, k % 9)] = number(x, &format!("matrix[{}][{}]", k / 9, k % 9))?;
    }
    Ok(m)
}

fn object(text: &str) -> Result<serde_json::Map<String, Value>> {
    match serde_json::from_str::<Value>(text).map_err(|e| spec_err(format!("invalid JSON: {e}")))? {
        Value::Object(o) => Ok(o),
        other => Err(spec_err(format!("expected a JSON object, got {other}"))),
    }
}

pub fn parse_form(text: &str) -> Result<FormSpec> {
    let obj = object(text)?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "family" | "params" | "matrix") {
            return Err(spec_err(format!("unknown key {key:?}")));
        }
    }
    match (obj.get("family"), obj.get("matrix")) {
        (Some(_), Some(_)) => Err(spec_err("give either family or matrix, not both")),
        (None, None) => Err(spec_err("missing family or matrix")),
        (None, Some(m)) => {
            if obj.contains_key("params") {
                return Err(spec_err("params only apply to a family"));
            }
            let raw = matrix(m)?;
            let asym = QuadraticForm::asymmetry(&raw);
            let mut warnings = Vec::new();
            if asym > ASYMMETRY_WARN {
                warnings.push(format!("matrix asymmetry {asym:.3e} exceeds {ASYMMETRY_WARN:e}; using the symmetric part"));
            }
            Ok(FormSpec {
                form: QuadraticForm::new(raw),
                family: Family::Matrix,
                warnings,
            })
        }
        (Some(f), None) => {
            let name = f.as_str().ok_or_else(|| spec_err("family must be a string"))?;
            let p = obj.get("params");
            let (form, family) = match name {
                "cubic" => {
                    let [a, b, g] = params::<3>(name, p)?;
                    let c = CubicParams::new(a, b, g);
                    (QuadraticForm::from_cubic(c), Family::Cubic(c))
                }
                "cyclic" => {
                    let [a, b, c, d] = params::<4>(name, p)?;
                    let c = CyclicParams::new(a, b, c, d);
                    (QuadraticForm::from_cyclic(c), Family::Cyclic(c))
                }
                "extremal_q" => {
                    params::<0>(name, p)?;
                    (QuadraticForm::extremal_q(), Family::ExtremalQ)
                }
                "corollary_q" => {
                    let [alpha, beta, gamma] = params::<3>(name, p)?;
                    (
                        QuadraticForm::corollary_q(alpha, beta, gamma),
                        Family::CorollaryQ { alpha, beta, gamma },
                    )
                }
                other => return Err(spec_err(format!("unknown family {other:?}"))),
            };
            Ok(FormSpec {
                form,
                family,
                warnings: vec![],
            })
        }
    }
}

/// `{"v0": {"cos": [...], "sin": [...]}, ...}`; missing profiles are zero.
pub fn parse_profiles(text: &str) -> Result<SpecialPotential> {
    let obj = object(text)?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "v0" | "v1" | "v2" | "v3") {
            return Err(spec_err(format!("unknown profile {key:?}; expected v0..v3")));
        }
    }
    let sp: SpecialPotential = serde_json::from_value(Value::Object(obj)).map_err(|e| spec_err(e.to_string()))?;
    for (m, p) in sp.profiles().iter().enumerate() {
        if p.cos.iter().chain(&p.sin).any(|c| !c.is_finite()) {
            return Err(spec_err(format!("profile v{m} has non-finite coefficients")));
        }
    }
    Ok(sp)
}

/// `{"kind": "box", "center": [..], "half_widths": [..]}` or
/// `{"kind": "ball", "center": [..], "radius": r}`.
pub fn parse_domain(text: &str) -> Result<Subdomain> {
    let d: Subdomain = serde_json::from_str(text).map_err(|e| spec_err(e.to_string()))?;
    d.validated().map_err(|e| spec_err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families() {
        let f = parse_form(r#"{"family": "extremal_q"}"#).unwrap();
        assert_eq!(f.form, QuadraticForm::extremal_q());
        let f = parse_form(r#"{"family": "cubic", "params": [1, 2, 0]}"#).unwrap();
        assert_eq!(f.family, Family::Cubic(CubicParams::new(1.0, 2.0, 0.0)));
        assert_eq!(f.form, QuadraticForm::from_cubic(CubicParams::new(1.0, 2.0, 0.0)));
        let f = parse_form(r#"{"family": "corollary_q", "params": [8, 1, 0.125]}"#).unwrap();
        assert_eq!(f.form, QuadraticForm::corollary_q(8.0, 1.0, 0.125));
        assert!(parse_form(r#"{"family": "cubic", "params": [1, 2]}"#).is_err());
        assert!(parse_form(r#"{"family": "tetragonal"}"#).is_err());
        assert!(parse_form(r#"{"family": "cubic", "params": [1, 2, 0], "extra": 1}"#).is_err());
        assert!(parse_form("[1, 2, 3]").is_err());
        assert!(parse_form("{").is_err());
    }

    #[test]
    fn matrices_round_trip_and_warn() {
        let q = QuadraticForm::extremal_q();
        let json = serde_json::json!({ "matrix": q.to_rows() }).to_string();
        let f = parse_form(&json).unwrap();
        assert_eq!(f.form, q);
        assert!(f.warnings.is_empty());

        let mut rows = [[0.0; 9]; 9];
        rows[0][1] = 1.0;
        let f = parse_form(&serde_json::json!({ "matrix": rows }).to_string()).unwrap();
        assert_eq!(f.warnings.len(), 1);
        assert_eq!(f.form.matrix()[(1, 0)], 0.5);

        let flat: Vec<f64> = vec![0.0; 81];
        assert_eq!(parse_form(&serde_json::json!({ "matrix": flat }).to_string()).unwrap().form, QuadraticForm::zero());
        assert!(parse_form(r#"{"matrix": [[1, 2]]}"#).is_err());
    }

    #[test]
    fn profiles_and_domains() {
        let sp = parse_profiles(r#"{"v0": {"sin": [1.0]}}"#).unwrap();
        assert_eq!(sp, SpecialPotential::sine());
        assert!(parse_profiles(r#"{"v4": {}}"#).is_err());
        assert!(parse_profiles(r#"{"v0": {"cos": "x"}}"#).is_err());
        let d = parse_domain(r#"{"kind": "ball", "center": [0, 0, 0], "radius": 0.5}"#).unwrap();
        assert_eq!(d, Subdomain::ball([0.0; 3], 0.5).unwrap());
        assert!(parse_domain(r#"{"kind": "box", "center": [0, 0, 0], "half_widths": [1, 1, 1]}"#).is_err());
        assert!(parse_domain(r#"{"kind": "torus"}"#).is_err());
    }
}
