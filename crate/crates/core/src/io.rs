//! Number parsing and result serialization.
//!
//! Reals are read as decimal (`-1.25e-3`) or exact binary hex-floats
//! (`0x5p-2`, integer hex mantissa and binary exponent). Complex numbers
//! accept `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`. Output carries both a decimal
//! string (enough digits to read back to the same value at the stated
//! precision) and the exact hex-float.

use std::fmt::Write as _;

use rug::{Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::bundle::{ThetaBundle, SIX_NAMES};
use crate::error::{Result, ThetaError};
use crate::reduction::ReductionCertificate;

/// Version of the JSON layout emitted by [`BundleJson`].
pub const SCHEMA_VERSION: u32 = 1;

/// Bits per decimal digit.
pub const BITS_PER_DIGIT: f64 = std::f64::consts::LOG2_10;

pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * BITS_PER_DIGIT).ceil() as u32
}

fn parse_err(s: &str, what: &str) -> ThetaError {
    ThetaError::Parse(format!("{what}: {s:?}"))
}

/// Exact hex-float: `[-]0x<hex integer>p<binary exponent>`.
pub fn to_hex(x: &Float) -> String {
    if x.is_zero() {
        return if x.is_sign_negative() {
            "-0x0p0".into()
        } else {
            "0x0p0".into()
        };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let (m, e) = x.to_integer_exp().expect("finite nonzero float");
    let (sign, m) = if m < 0 {
        ("-", -m)
    } else {
        ("", m)
    };
    // strip trailing zero bits so equal values print identically
    let tz = m.find_one(0).unwrap_or(0);
    let m = Integer::from(&m >> tz);
    format!("{sign}0x{}p{}", m.to_string_radix(16), e as i64 + tz as i64)
}

fn parse_hex(s: &str, prec: u32) -> Result<Float> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(|| parse_err(s, "hex-float must start with 0x"))?;
    let (mant, exp) = match body.find(['p', 'P']) {
        Some(k) => (&body[..k], &body[k + 1..]),
        None => (body, "0"),
    };
    let m = Integer::from_str_radix(mant, 16).map_err(|_| parse_err(s, "bad hex mantissa"))?;
    let e: i64 = exp
        .parse()
        .map_err(|_| parse_err(s, "bad binary exponent"))?;
    let e = i32::try_from(e).map_err(|_| parse_err(s, "binary exponent out of range"))?;
    let bits = m.significant_bits().max(1);
    if bits > prec {
        return Err(ThetaError::Parse(format!(
            "{s:?} needs {bits} bits, more than the requested precision {prec}"
        )));
    }
    let mut f = Float::with_val(prec, &m);
    if e >= 0 {
        f <<= e as u32;
    } else {
        f >>= e.unsigned_abs();
    }
    if neg {
        f = -f;
    }
    Ok(f)
}

/// A real number at precision `prec`; hex-floats are exact (an error if they
/// do not fit), decimals are correctly rounded.
pub fn parse_real(s: &str, prec: u32) -> Result<Float> {
    let t = s.trim();
    let unsigned = t.trim_start_matches(['+', '-']);
    if unsigned.starts_with("0x") || unsigned.starts_with("0X") {
        return parse_hex(t, prec);
    }
    if t.is_empty()
        || t.chars()
            .any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
    {
        return Err(parse_err(s, "not a number"));
    }
    let v = Float::parse(t).map_err(|_| parse_err(s, "not a number"))?;
    Ok(Float::with_val(prec, v))
}

fn is_exponent_marker(prev: u8, hex: bool) -> bool {
    if hex {
        matches!(prev, b'p' | b'P')
    } else {
        matches!(prev, b'e' | b'E' | b'p' | b'P')
    }
}

/// Position of the sign that separates real and imaginary parts, if any.
fn split_point(t: &str) -> Option<usize> {
    let b = t.as_bytes();
    let mut k = None;
    for i in 1..b.len() {
        if (b[i] == b'+' || b[i] == b'-') && !is_exponent_marker(b[i - 1], false) {
            k = Some(i);
        }
    }
    // in a hex-float an `e` is a digit, so a sign after it does split
    if k.is_none() {
        let lower = t.to_ascii_lowercase();
        if lower.contains("0x") {
            for i in 1..b.len() {
                if (b[i] == b'+' || b[i] == b'-') && !is_exponent_marker(b[i - 1], true) {
                    k = Some(i);
                }
            }
        }
    }
    k
}

fn parse_imag(s: &str, prec: u32) -> Result<Float> {
    let body = s
        .trim()
        .strip_suffix(['i', 'I'])
        .ok_or_else(|| parse_err(s, "missing i"))?;
    let body = body.trim().trim_end_matches('*').trim();
    match body {
        "" | "+" => Ok(Float::with_val(prec, 1)),
        "-" => Ok(Float::with_val(prec, -1)),
        _ => parse_real(body, prec),
    }
}

/// Complex number at precision `prec` in the forms listed in the module docs.
pub fn parse_complex(s: &str, prec: u32) -> Result<Complex> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(parse_err(s, "empty number"));
    }
    let is_imag = t.ends_with(['i', 'I']);
    if !is_imag {
        let re = parse_real(&t, prec)?;
        return Ok(Complex::with_val(prec, (re, 0)));
    }
    match split_point(&t) {
        Some(k) => {
            let re = parse_real(&t[..k], prec)?;
            let im = parse_imag(&t[k..], prec)?;
            Ok(Complex::with_val(prec, (re, im)))
        }
        None => {
            let im = parse_imag(&t, prec)?;
            Ok(Complex::with_val(prec, (0, im)))
        }
    }
}

/// Decimal string that reads back to the same value at the same precision.
pub fn to_decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

/// One serialized complex value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueJson {
    pub re: String,
    pub im: String,
    pub re_hex: String,
    pub im_hex: String,
    /// Precision (bits) of the stored components.
    pub prec: u32,
}

impl ValueJson {
    pub fn from_complex(v: &Complex) -> Self {
        let prec = v.prec().0.max(v.prec().1);
        ValueJson {
            re: to_decimal(v.real()),
            im: to_decimal(v.imag()),
            re_hex: to_hex(v.real()),
            im_hex: to_hex(v.imag()),
            prec,
        }
    }

    /// The exact value from the hex fields.
    pub fn to_complex(&self) -> Result<Complex> {
        let re = parse_real(&self.re_hex, self.prec)?;
        let im = parse_real(&self.im_hex, self.prec)?;
        Ok(Complex::with_val(self.prec, (re, im)))
    }

    /// The value from the decimal fields, rounded at `prec`.
    pub fn to_complex_decimal(&self) -> Result<Complex> {
        let re = parse_real(&self.re, self.prec)?;
        let im = parse_real(&self.im, self.prec)?;
        Ok(Complex::with_val(self.prec, (re, im)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateJson {
    /// `[a, b, c, d]`.
    pub matrix: [i64; 4],
    pub shift_a: i64,
    pub shift_b: i64,
    pub negated_z: bool,
    pub z_red: ValueJson,
    pub tau_red: ValueJson,
}

impl CertificateJson {
    pub fn from_cert(c: &ReductionCertificate) -> Self {
        let m = c.matrix;
        CertificateJson {
            matrix: [m.a, m.b, m.c, m.d],
            shift_a: c.shift_a,
            shift_b: c.shift_b,
            negated_z: c.negated_z,
            z_red: ValueJson::from_complex(&c.z_red),
            tau_red: ValueJson::from_complex(&c.tau_red),
        }
    }
}

/// Serialized result of one evaluation; `values` keeps the requested outputs
/// in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleJson {
    pub schema_version: u32,
    pub z: String,
    pub tau: String,
    pub prec_bits: u32,
    pub method: String,
    pub achieved_bits: u32,
    pub work_bits: u32,
    pub guard_bits_used: u32,
    pub values: Vec<(String, ValueJson)>,
    pub certificate: Option<CertificateJson>,
}

/// Which values to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputSet {
    pub th00: bool,
    pub th01: bool,
    pub th10: bool,
    pub th11: bool,
    pub constants: bool,
}

impl Default for OutputSet {
    fn default() -> Self {
        OutputSet {
            th00: true,
            th01: true,
            th10: true,
            th11: false,
            constants: true,
        }
    }
}

impl OutputSet {
    /// Comma-separated subset of `00, 01, 10, 11, constants`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut o = OutputSet {
            th00: false,
            th01: false,
            th10: false,
            th11: false,
            constants: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "00" => o.th00 = true,
                "01" => o.th01 = true,
                "10" => o.th10 = true,
                "11" => o.th11 = true,
                "constants" => o.constants = true,
                "all" => {
                    o = OutputSet {
                        th00: true,
                        th01: true,
                        th10: true,
                        th11: true,
                        constants: true,
                    };
                }
                _ => return Err(parse_err(part, "unknown output")),
            }
        }
        if o == (OutputSet {
            th00: false,
            th01: false,
            th10: false,
            th11: false,
            constants: false,
        }) {
            return Err(parse_err(s, "no outputs selected"));
        }
        Ok(o)
    }

    fn selected<'a>(&self, b: &'a ThetaBundle) -> Vec<(&'static str, &'a Complex)> {
        let six = b.six();
        let mut v = Vec::new();
        let flags = [self.th00, self.th01, self.th10];
        for k in 0..3 {
            if flags[k] {
                v.push((SIX_NAMES[k], six[k]));
            }
        }
        if self.th11 {
            if let Some(t) = &b.th11_z {
                v.push(("th11_z", t));
            }
        }
        if self.constants {
            for k in 3..6 {
                v.push((SIX_NAMES[k], six[k]));
            }
        }
        v
    }
}

impl BundleJson {
    pub fn new(
        z: &str,
        tau: &str,
        prec_bits: u32,
        b: &ThetaBundle,
        outputs: &OutputSet,
        cert: Option<&ReductionCertificate>,
    ) -> Self {
        BundleJson {
            schema_version: SCHEMA_VERSION,
            z: z.to_string(),
            tau: tau.to_string(),
            prec_bits,
            method: b.method.to_string(),
            achieved_bits: b.achieved_bits,
            work_bits: b.work_bits,
            guard_bits_used: b.guard_bits_used,
            values: outputs
                .selected(b)
                .into_iter()
                .map(|(n, v)| (n.to_string(), ValueJson::from_complex(v)))
                .collect(),
            certificate: cert.map(CertificateJson::from_cert),
        }
    }

    pub fn value(&self, name: &str) -> Option<&ValueJson> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

/// Output layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

impl std::str::FromStr for Format {
    type Err = ThetaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "plain" => Ok(Format::Plain),
            _ => Err(parse_err(s, "unknown format")),
        }
    }
}

/// Render a result. Plain and CSV output show decimals rounded to the
/// requested precision; JSON keeps full working values.
pub fn render(j: &BundleJson, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(j).expect("plain data serializes"),
        Format::Csv => {
            let mut s = String::from("name,re,im,re_hex,im_hex\n");
            for (n, v) in &j.values {
                let _ = writeln!(s, "{n},{},{},{},{}", v.re, v.im, v.re_hex, v.im_hex);
            }
            s
        }
        Format::Plain => {
            let digits = (j.prec_bits as f64 / BITS_PER_DIGIT).ceil() as usize + 1;
            let mut s = String::new();
            for (n, v) in &j.values {
                let c = v.to_complex().expect("emitted values parse back");
                let re = c.real().to_string_radix(10, Some(digits));
                let (sign, im) = if c.imag().is_sign_negative() {
                    ('-', -c.imag().clone())
                } else {
                    ('+', c.imag().clone())
                };
                let im = im.to_string_radix(10, Some(digits));
                let _ = writeln!(s, "{n} = {re} {sign} {im}*i");
            }
            let _ = writeln!(
                s,
                "# method {}, achieved {} bits",
                j.method, j.achieved_bits
            );
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpcx::cx;

    #[test]
    fn parses_complex_forms() {
        // 53 bits: correctly rounded decimals equal the f64 literals
        let p = 53;
        let cases = [
            ("i", (0.0, 1.0)),
            ("-i", (0.0, -1.0)),
            ("0.6", (0.6, 0.0)),
            ("0.1+0.2i", (0.1, 0.2)),
            ("1e-3-2i", (1e-3, -2.0)),
            ("-2.5e+2+1e1i", (-250.0, 10.0)),
            ("3i", (0.0, 3.0)),
            ("0.5 - i", (0.5, -1.0)),
            ("0x3p-2+0x1p1i", (0.75, 2.0)),
            ("0xep0-0x1p0i", (14.0, -1.0)),
        ];
        for (s, want) in cases {
            let v = parse_complex(s, p).unwrap();
            assert_eq!(v, cx(p, want.0, want.1), "{s}");
        }
        for bad in ["", "abc", "1+", "0x1.8p-1", "1+2j", "ii"] {
            assert!(
                matches!(parse_complex(bad, p), Err(ThetaError::Parse(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn hex_is_exact() {
        let p = 300;
        let x = Float::with_val(p, Float::with_val(p, 1) / 3u32);
        let h = to_hex(&x);
        assert_eq!(parse_real(&h, p).unwrap(), x);
        assert_eq!(to_hex(&Float::with_val(10, 0.75)), "0x3p-2");
        assert_eq!(to_hex(&Float::with_val(10, -0.0)), "-0x0p0");
        assert!(parse_real("-0x0p0", 10).unwrap().is_sign_negative());
        // too many bits for the requested precision
        assert!(parse_real(&h, 64).is_err());
    }

    #[test]
    fn decimal_reads_back() {
        let p = 500;
        let mut x = Complex::with_val(
            p,
            (Float::with_val(p, 2).sqrt(), Float::with_val(p, 3).ln()),
        );
        x /= 7u32;
        let j = ValueJson::from_complex(&x);
        assert_eq!(j.to_complex().unwrap(), x);
        assert_eq!(j.to_complex_decimal().unwrap(), x);
    }

    #[test]
    fn output_sets() {
        let o = OutputSet::parse("00,constants").unwrap();
        assert!(o.th00 && o.constants && !o.th01 && !o.th11);
        assert!(OutputSet::parse("").is_err());
        assert!(OutputSet::parse("00,12").is_err());
        assert!(OutputSet::parse("all").unwrap().th11);
        assert_eq!(digits_to_bits(100), 333);
    }
}
