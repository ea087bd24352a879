//! Compact `value(uncertainty)` notation, e.g. `1.04(3)` for 1.04 ± 0.03.

use alloc::format;
use alloc::string::String;

/// Formats `value` with its standard error as a correction to the last
/// printed digits.
///
/// The error is rounded to one significant digit, or two when that digit
/// would be 1, and the value is printed to the same decimal place. A zero
/// error prints the bare value.
pub fn format_uncertainty(value: f64, stderr: f64) -> String {
    if !stderr.is_finite() || stderr <= 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let mut exp = libm::floor(libm::log10(stderr)) as i32;
    // log10 may be off by one ulp at exact powers of ten
    if stderr / pow10(exp) >= 10.0 {
        exp += 1;
    } else if stderr / pow10(exp) < 1.0 {
        exp -= 1;
    }
    let mut lead = libm::round(stderr / pow10(exp));
    if lead >= 10.0 {
        exp += 1;
        lead = 1.0;
    }
    let sig_digits = if lead == 1.0 { 2 } else { 1 };
    let decimals = sig_digits - 1 - exp;
    if decimals <= 0 {
        let unit = pow10(-decimals);
        let v = libm::round(value / unit) * unit;
        let u = libm::round(stderr / unit) * unit;
        return format!("{v:.0}({u:.0})");
    }
    let digits = libm::round(stderr * pow10(decimals)) as u64;
    format!("{value:.prec$}({digits})", prec = decimals as usize)
}

fn pow10(e: i32) -> f64 {
    libm::pow(10.0, e as f64)
}
