//! Fixed 17-significant-digit decimal formatting.
//!
//! Every number that leaves the library in text form (channel files, CSV,
//! key=value reports) goes through [`fmt17`], which is enough digits for an
//! `f64` to parse back bit-exactly.

/// Formats `x` with 17 significant digits, `%.17g` style: plain decimal for
/// moderate exponents, scientific otherwise. Trailing zeros are kept so the
/// width is stable.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        format!("{:.*}", decimals, x)
    } else {
        sci
    }
}
