//! Exact rational helpers. All probabilities in this crate are `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Prob = BigRational;

pub fn ratio(num: i64, den: i64) -> Prob {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Prob {
    BigRational::from_integer(BigInt::from(n))
}

pub fn zero() -> Prob {
    BigRational::zero()
}

pub fn one() -> Prob {
    BigRational::one()
}

/// Parses `n`, `n/d` or a finite decimal such as `0.25`.
pub fn parse(text: &str) -> Option<Prob> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = whole.starts_with('-');
        let whole: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().ok()?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac: BigInt = frac.parse().ok()?;
        let mut value = BigRational::new(whole.abs() * &scale + frac, scale);
        if negative {
            value = -value;
        }
        return Some(value);
    }
    text.parse::<BigInt>().ok().map(BigRational::from_integer)
}

/// `num/den`, or just `num` for integers.
pub fn format(p: &Prob) -> String {
    if p.denom().is_one() {
        p.numer().to_string()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

pub fn is_probability(p: &Prob) -> bool {
    !p.is_negative() && *p <= BigRational::one()
}

/// A JSON number with the exact digits of `n`.
pub fn json_int(n: &BigInt) -> serde_json::Value {
    let number: serde_json::Number = n.to_string().parse().expect("integer literal");
    serde_json::Value::Number(number)
}

/// `{"num": .., "den": ..}`.
pub fn json(p: &Prob) -> serde_json::Value {
    serde_json::json!({ "num": json_int(p.numer()), "den": json_int(p.denom()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse("1/2"), Some(ratio(1, 2)));
        assert_eq!(parse(" 3 / 4 "), Some(ratio(3, 4)));
        assert_eq!(parse("1"), Some(one()));
        assert_eq!(parse("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse("-0.5"), Some(ratio(-1, 2)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("abc"), None);
    }

    #[test]
    fn formats_without_floats() {
        assert_eq!(format(&ratio(11, 32)), "11/32");
        assert_eq!(format(&ratio(4, 2)), "2");
        assert_eq!(json(&ratio(11, 32)).to_string(), r#"{"den":32,"num":11}"#);
    }
}
