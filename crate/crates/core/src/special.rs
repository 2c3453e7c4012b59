//! Complex Gamma, digamma and the Gauss hypergeometric function on `[0, 1]`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_TERMS: usize = 5000;

fn lanczos_sum(z: Complex64) -> Complex64 {
    // z already shifted by -1
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    x
}

/// Gamma function for complex arguments; poles map to an infinite value.
pub fn gamma(z: Complex64) -> Complex64 {
    if nonpositive_integer(z).is_some() {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < 0.5 {
        let s = (PI * z).sin();
        return PI / (s * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// `1 / Gamma(z)`, entire; exactly zero at the poles of Gamma.
pub fn rgamma(z: Complex64) -> Complex64 {
    if nonpositive_integer(z).is_some() {
        return Complex64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        return (PI * z).sin() * gamma(1.0 - z) / PI;
    }
    1.0 / gamma(z)
}

/// Digamma function `Gamma'/Gamma` for complex arguments.
pub fn digamma(z: Complex64) -> Complex64 {
    if nonpositive_integer(z).is_some() {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    if z.re < 0.5 {
        return digamma(1.0 - z) - PI * (PI * z).cos() / (PI * z).sin();
    }
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.norm() < 12.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    // asymptotic series with Bernoulli numbers B_2..B_14
    const B: [f64; 7] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ];
    let inv2 = 1.0 / (z * z);
    let mut pow = inv2;
    let mut series = Complex64::new(0.0, 0.0);
    for (k, b) in B.iter().enumerate() {
        series += b / (2.0 * (k + 1) as f64) * pow;
        pow *= inv2;
    }
    acc + z.ln() - 0.5 / z - series
}

/// Returns `Some(-k)` when `z` is (to rounding) the nonpositive integer `-k`.
pub fn nonpositive_integer(z: Complex64) -> Option<i64> {
    if z.im.abs() > 1e-14 || z.re > 0.5 {
        return None;
    }
    let r = z.re.round();
    if (z.re - r).abs() <= 1e-14 * r.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

fn pochhammer_step(x: Complex64, n: usize) -> Complex64 {
    x + n as f64
}

/// Gauss series; terminates early when a numerator parameter is a nonpositive integer.
fn gauss_series(a: Complex64, b: Complex64, c: Complex64, z: f64) -> Result<Complex64> {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..MAX_TERMS {
        let num = pochhammer_step(a, n) * pochhammer_step(b, n);
        if num.norm() == 0.0 {
            return Ok(sum);
        }
        term *= num / (pochhammer_step(c, n) * (n + 1) as f64) * z;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() && n > 2 {
            return Ok(sum);
        }
    }
    Err(Error::HypergeometricNonConvergence { terms: MAX_TERMS })
}

fn is_terminating(a: Complex64, b: Complex64) -> bool {
    nonpositive_integer(a).is_some() || nonpositive_integer(b).is_some()
}

/// `2F1(a, b; c; z)` for real `z` in `[0, 1]`.
///
/// Uses the Gauss series for `z <= 1/2` or terminating parameters and the
/// `z -> 1 - z` connection formula otherwise, including the logarithmic case
/// where `c - a - b` is an integer. At `z = 1` Gauss's summation theorem
/// applies and requires `Re(c - a - b) > 0`.
pub fn hyp2f1(a: Complex64, b: Complex64, c: Complex64, z: f64) -> Result<Complex64> {
    if nonpositive_integer(c).is_some() {
        return Err(Error::HypergeometricDegenerate(format!(
            "c = {c} is a nonpositive integer"
        )));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::OutOfRange(z));
    }
    if z == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if z <= 0.5 || is_terminating(a, b) {
        return gauss_series(a, b, c, z);
    }
    let m = c - a - b;
    if z == 1.0 {
        if m.re <= 0.0 {
            return Err(Error::HypergeometricDegenerate(format!(
                "divergent at z = 1 with Re(c - a - b) = {}",
                m.re
            )));
        }
        return Ok(gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b));
    }
    let w = 1.0 - z;
    let mr = m.re.round();
    if m.im.abs() < 1e-12 && (m.re - mr).abs() < 1e-9 {
        let mi = mr as i64;
        return if mi >= 0 {
            log_case_positive(a, b, mi as usize, w)
        } else {
            log_case_negative(a, b, (-mi) as usize, w)
        };
    }
    let t1 = gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b)
        * gauss_series(a, b, a + b - c + 1.0, w)?;
    let t2 = gamma(c) * gamma(-m) * rgamma(a) * rgamma(b)
        * Complex64::new(w, 0.0).powc(m)
        * gauss_series(c - a, c - b, m + 1.0, w)?;
    Ok(t1 + t2)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `c = a + b + m`, `m = 0, 1, 2, ...`.
fn log_case_positive(a: Complex64, b: Complex64, m: usize, w: f64) -> Result<Complex64> {
    let c = a + b + m as f64;
    let lw = w.ln();
    let mut finite = Complex64::new(0.0, 0.0);
    if m > 0 {
        let pref = factorial(m - 1) * gamma(c) * rgamma(a + m as f64) * rgamma(b + m as f64);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..m {
            finite += term;
            // (a)_n (b)_n / (n! (1-m)_n) w^n
            term *= (a + n as f64) * (b + n as f64) / ((n + 1) as f64 * (1.0 + n as f64 - m as f64))
                * w;
        }
        finite *= pref;
    }
    let pref = gamma(c) * rgamma(a) * rgamma(b) * (-w).powi(m as i32);
    if pref.norm() == 0.0 {
        return Ok(finite);
    }
    let mut coef = Complex64::new(1.0 / factorial(m), 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mf = m as f64;
    let one = Complex64::new(1.0, 0.0);
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let bracket = lw - digamma(one * (nf + 1.0)) - digamma(one * (nf + mf + 1.0))
            + digamma(a + nf + mf)
            + digamma(b + nf + mf);
        let term = coef * bracket;
        sum += term;
        if n > 2 && term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            return Ok(finite - pref * sum);
        }
        coef *= (a + mf + nf) * (b + mf + nf) / ((nf + 1.0) * (nf + mf + 1.0)) * w;
    }
    Err(Error::HypergeometricNonConvergence { terms: MAX_TERMS })
}

/// `c = a + b - m`, `m = 1, 2, ...`.
fn log_case_negative(a: Complex64, b: Complex64, m: usize, w: f64) -> Result<Complex64> {
    let mf = m as f64;
    let c = a + b - mf;
    let lw = w.ln();
    let mut finite = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    for n in 0..m {
        finite += term;
        term *= (a - mf + n as f64) * (b - mf + n as f64)
            / ((n + 1) as f64 * (1.0 + n as f64 - mf))
            * w;
    }
    finite *= factorial(m - 1) * gamma(c) * rgamma(a) * rgamma(b) * w.powi(-(m as i32));
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let pref = sign * gamma(c) * rgamma(a - mf) * rgamma(b - mf);
    if pref.norm() == 0.0 {
        return Ok(finite);
    }
    let mut coef = Complex64::new(1.0 / factorial(m), 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let bracket = lw - digamma(one * (nf + 1.0)) - digamma(one * (nf + mf + 1.0))
            + digamma(a + nf)
            + digamma(b + nf);
        let term = coef * bracket;
        sum += term;
        if n > 2 && term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            return Ok(finite - pref * sum);
        }
        coef *= (a + nf) * (b + nf) / ((nf + 1.0) * (nf + mf + 1.0)) * w;
    }
    Err(Error::HypergeometricNonConvergence { terms: MAX_TERMS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(c(5.0)).re, 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(c(0.5)).re, PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(c(-0.5)).re, -2.0 * PI.sqrt(), max_relative = 1e-14);
        // mpmath: gamma(1+1j) = 0.498015668118356 - 0.154949828301811j
        let g = gamma(Complex64::new(1.0, 1.0));
        assert_relative_eq!(g.re, 0.498_015_668_118_356, max_relative = 1e-13);
        assert_relative_eq!(g.im, -0.154_949_828_301_811, max_relative = 1e-13);
        assert!(gamma(c(-3.0)).re.is_infinite());
        assert_eq!(rgamma(c(-2.0)).norm(), 0.0);
        assert_eq!(rgamma(c(0.0)).norm(), 0.0);
    }

    #[test]
    fn digamma_known_values() {
        let euler = 0.577_215_664_901_532_9;
        assert_relative_eq!(digamma(c(1.0)).re, -euler, max_relative = 1e-14);
        assert_relative_eq!(digamma(c(0.5)).re, -euler - 2.0 * 2f64.ln(), max_relative = 1e-14);
        // mpmath: digamma(-2.5) = 1.10315664064524
        assert_relative_eq!(digamma(c(-2.5)).re, 1.103_156_640_645_243_2, max_relative = 1e-13);
        // mpmath: digamma(2+3j) = 1.20798071071015 + 1.10412968058758j
        let d = digamma(Complex64::new(2.0, 3.0));
        assert_relative_eq!(d.re, 1.207_980_710_710_151, max_relative = 1e-13);
        assert_relative_eq!(d.im, 1.104_129_680_587_576, max_relative = 1e-13);
    }

    #[test]
    fn hyp2f1_closed_forms() {
        assert_eq!(hyp2f1(c(0.3), c(2.0), c(1.5), 0.0).unwrap(), c(1.0));
        for z in [0.3, 0.6, 0.9, 0.99] {
            // 2F1(1,1;2;z) = -log(1-z)/z, integer c-a-b = 0
            let f = hyp2f1(c(1.0), c(1.0), c(2.0), z).unwrap();
            assert_relative_eq!(f.re, -(1.0 - z as f64).ln() / z, max_relative = 1e-13);
            // 2F1(1/2,1/2;3/2;z^2) = asin(z)/z, c-a-b = 1/2
            let f = hyp2f1(c(0.5), c(0.5), c(1.5), z * z).unwrap();
            assert_relative_eq!(f.re, z.asin() / z, max_relative = 1e-13);
            // 2F1(a,b;b;z) = (1-z)^{-a}, c-a-b = -a = -2
            let f = hyp2f1(c(2.0), c(1.3), c(1.3), z).unwrap();
            assert_relative_eq!(f.re, (1.0 - z).powi(-2), max_relative = 1e-12);
            // c-a-b = 1: 2F1(1, 1; 3; z) = 2[(1-z)ln(1-z) + z]/z^2
            let f = hyp2f1(c(1.0), c(1.0), c(3.0), z).unwrap();
            let exact = 2.0 * ((1.0 - z) * (1.0 - z).ln() + z) / (z * z);
            assert_relative_eq!(f.re, exact, max_relative = 1e-12);
        }
        let f = hyp2f1(c(1.0), c(1.0), c(2.0), 0.3).unwrap();
        assert_relative_eq!(f.re, 1.188_916_479_795_775, max_relative = 1e-13);
    }

    #[test]
    fn hyp2f1_reference_values() {
        // mpmath.hyp2f1(0.3, 1.7, 2.2, 0.8) = 1.39001189857006
        let f = hyp2f1(c(0.3), c(1.7), c(2.2), 0.8).unwrap();
        assert_relative_eq!(f.re, 1.390_011_898_570_056, max_relative = 1e-12);
        // mpmath.hyp2f1(-0.25+0.5j, 2.5, 0.5, 0.7)
        //   = -5.46693681447491 + 2.06380253773513j
        let f = hyp2f1(Complex64::new(-0.25, 0.5), c(2.5), c(0.5), 0.7).unwrap();
        assert_relative_eq!(f.re, -5.466_936_814_474_915, max_relative = 1e-12);
        assert_relative_eq!(f.im, 2.063_802_537_735_125, max_relative = 1e-12);
    }

    #[test]
    fn hyp2f1_terminating_and_errors() {
        // 2F1(-2, b; c; z) = 1 - 2bz/c + b(b+1)z^2/(c(c+1))
        let (b, cc, z) = (1.5, 0.5, 0.9);
        let exact = 1.0 - 2.0 * b * z / cc + b * (b + 1.0) * z * z / (cc * (cc + 1.0));
        assert_relative_eq!(hyp2f1(c(-2.0), c(b), c(cc), z).unwrap().re, exact, max_relative = 1e-14);
        assert!(hyp2f1(c(1.0), c(1.0), c(-1.0), 0.2).is_err());
        assert!(hyp2f1(c(1.0), c(1.0), c(2.0), 1.0).is_err());
        assert_relative_eq!(
            hyp2f1(c(0.5), c(0.5), c(1.5), 1.0).unwrap().re,
            PI / 2.0,
            max_relative = 1e-13
        );
    }
}
