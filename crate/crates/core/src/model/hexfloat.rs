//! Exact text encoding of `f64` as C99-style hexadecimal floats (`0x1.8p+1`).

use crate::error::{Error, Result};

const MANT_BITS: u32 = 52;
const MANT_MASK: u64 = (1 << MANT_BITS) - 1;
const EXP_BIAS: i64 = 1023;

pub fn encode(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let exp = ((bits >> MANT_BITS) & 0x7ff) as i64;
    let mant = bits & MANT_MASK;
    let (lead, e) = match (exp, mant) {
        (0, 0) => return format!("{sign}0x0p+0"),
        (0, _) => (0, 1 - EXP_BIAS),
        _ => (1, exp - EXP_BIAS),
    };
    let digits = format!("{mant:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

pub fn decode(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("malformed hex float '{s}'"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let signed = |v: f64| if neg { -v } else { v };
    match body {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(signed(f64::INFINITY)),
        _ => {}
    }
    let body = body.strip_prefix("0x").ok_or_else(bad)?;
    let (mantissa, exp) = body.split_once('p').ok_or_else(bad)?;
    let e: i64 = exp.parse().map_err(|_| bad())?;
    let (lead, frac) = match mantissa.split_once('.') {
        Some((l, f)) if !f.is_empty() => (l, f),
        Some(_) => return Err(bad()),
        None => (mantissa, ""),
    };
    if frac.len() > 13 || !frac.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(bad());
    }
    let mant = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len()))
    };
    let biased = match lead {
        "1" => {
            let b = e + EXP_BIAS;
            if !(1..=2046).contains(&b) {
                return Err(bad());
            }
            b as u64
        }
        "0" if mant == 0 && e == 0 => 0,
        "0" if e == 1 - EXP_BIAS => 0,
        _ => return Err(bad()),
    };
    let bits = (biased << MANT_BITS) | mant;
    Ok(signed(f64::from_bits(bits)))
}
