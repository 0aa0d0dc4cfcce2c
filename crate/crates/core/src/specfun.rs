//! Scalar special functions.
//!
//! Everything downstream (mixture densities, Gini formulas, EM updates)
//! reduces to the functions in this module: log-gamma and its first two
//! derivatives, the regularized incomplete gamma and beta functions, the
//! Gauss hypergeometric function ₂F₁ on `z ∈ [0, 1]`, and log-multinomial
//! coefficients. All routines work on `f64`, take positive/valid inputs
//! only, and report failures through [`crate::Error`] instead of returning
//! NaN.
//!
//! References: Lanczos approximation per Pugh (2004); digamma per
//! Bernardo's AS 103; incomplete gamma/beta via the standard series and
//! modified-Lentz continued fractions (Numerical Recipes §6.2–6.4).

use crate::error::{Error, Result};

/// Euler–Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

const LN_PI: f64 = 1.1447298858494002;
const LN_2_SQRT_E_OVER_PI: f64 = 0.6207822376352452;

/// Tolerance and iteration budget shared by every series, continued
/// fraction, and root finder in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Relative tolerance (> 0).
    pub rel_tol: f64,
    /// Absolute floor, for quantities that legitimately approach zero (≥ 0).
    pub abs_tol: f64,
    /// Iteration budget (≥ 1).
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        // Headroom above the accuracy contracts of the callers.
        SeriesControl {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_terms: 20_000,
        }
    }
}

impl SeriesControl {
    fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || self.max_terms == 0 {
            return Err(Error::domain(
                "SeriesControl requires rel_tol > 0, abs_tol >= 0, max_terms >= 1",
            ));
        }
        Ok(())
    }
}

/// Lanczos coefficients (Pugh 2004, p. 116), as used in statrs.
const GAMMA_DK: &[f64] = &[
    2.4857408913875355e-5,
    1.0514237858172197,
    -3.4568709722201625,
    4.512277094668948,
    -2.9828522532357664,
    1.056397115771267,
    -1.9542877319164587e-1,
    1.709705434044412e-2,
    -5.719261174043057e-4,
    4.633994733599057e-6,
    -2.7199490848860772e-9,
];

const GAMMA_R: f64 = 10.900511;

/// ln Γ(x) for x > 0, without domain checks. Callers guarantee x > 0.
fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        let s = GAMMA_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(GAMMA_DK[0], |s, (i, &d)| s + d / (i as f64 - x));
        LN_PI
            - (std::f64::consts::PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + GAMMA_R) / std::f64::consts::E).ln()
    } else {
        let s = GAMMA_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(GAMMA_DK[0], |s, (i, &d)| s + d / (x + i as f64 - 1.0));
        s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + GAMMA_R) / std::f64::consts::E).ln()
    }
}

/// Natural logarithm of the gamma function, `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

/// Digamma function ψ(x) = d/dx ln Γ(x), for `x > 0`.
///
/// Recurrence up to x ≥ 12, then the asymptotic expansion (AS 103).
pub fn digamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

fn digamma_unchecked(x: f64) -> f64 {
    const C: f64 = 12.0;
    const S3: f64 = 1.0 / 12.0;
    const S4: f64 = 1.0 / 120.0;
    const S5: f64 = 1.0 / 252.0;
    const S6: f64 = 1.0 / 240.0;
    const S7: f64 = 1.0 / 132.0;

    let mut result = 0.0;
    let mut z = x;
    while z < C {
        result -= 1.0 / z;
        z += 1.0;
    }
    let mut r = 1.0 / z;
    result += z.ln() - 0.5 * r;
    r *= r;
    result -= r * (S3 - r * (S4 - r * (S5 - r * (S6 - r * S7))));
    result
}

/// Trigamma function ψ′(x) = d²/dx² ln Γ(x), for `x > 0`. Always positive.
pub fn trigamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("trigamma requires x > 0, got {x}")));
    }
    Ok(trigamma_unchecked(x))
}

fn trigamma_unchecked(x: f64) -> f64 {
    const C: f64 = 12.0;
    let mut result = 0.0;
    let mut z = x;
    while z < C {
        result += 1.0 / (z * z);
        z += 1.0;
    }
    // 1/z + 1/(2z²) + Σ B₂ₖ / z^(2k+1)
    let r = 1.0 / (z * z);
    result += 1.0 / z
        + 0.5 * r
        + r / z * (1.0 / 6.0 - r * (1.0 / 30.0 - r * (1.0 / 42.0 - r / 30.0)));
    result
}

/// Inverse digamma: the unique `x > 0` with ψ(x) = y.
///
/// Piecewise asymptotic initial guess refined by Newton steps with
/// [`trigamma`], stopping once `|ψ(x) − y| ≤ rel_tol · max(1, |y|)`.
pub fn inv_digamma(y: f64, ctl: &SeriesControl) -> Result<f64> {
    ctl.check()?;
    if !y.is_finite() {
        return Err(Error::domain(format!(
            "inv_digamma requires finite y, got {y}"
        )));
    }
    let mut x = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y + EULER_GAMMA)
    };
    let tol = ctl.rel_tol * y.abs().max(1.0);
    for _ in 0..ctl.max_terms {
        let f = digamma_unchecked(x) - y;
        if f.abs() <= tol {
            return Ok(x);
        }
        let step = f / trigamma_unchecked(x);
        let mut next = x - step;
        // ψ is only defined on (0, ∞); back off an overshoot.
        while next <= 0.0 {
            next = (x + next.max(0.0)) / 2.0;
            if next == x {
                break;
            }
        }
        x = next;
    }
    Err(Error::convergence(format!(
        "inv_digamma did not reach tolerance for y = {y}"
    )))
}

/// Log of the complete beta function, `ln B(a, b)` for `a, b > 0`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || a <= 0.0 || b <= 0.0 {
        return Err(Error::domain(format!(
            "ln_beta requires a, b > 0, got ({a}, {b})"
        )));
    }
    Ok(ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b))
}

/// Regularized lower incomplete gamma function P(a, x) = γ(a, x)/Γ(a).
///
/// Series expansion for `x < a + 1`, continued fraction otherwise; the two
/// regimes are the numerically stable ones for each representation.
pub fn reg_inc_gamma_lower(a: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    ctl.check()?;
    if !a.is_finite() || a <= 0.0 || !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "reg_inc_gamma_lower requires a > 0 and x >= 0, got ({a}, {x})"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let ln_pre = a * x.ln() - x - ln_gamma_unchecked(a);
    if x < a + 1.0 {
        // γ(a,x) series: Σ x^n Γ(a)/Γ(a+1+n)
        let mut term = 1.0 / a;
        let mut sum = term;
        for n in 1..=ctl.max_terms {
            term *= x / (a + n as f64);
            sum += term;
            if term.abs() <= ctl.rel_tol * sum.abs() + ctl.abs_tol {
                return Ok((ln_pre.exp() * sum).min(1.0));
            }
        }
        Err(Error::convergence(format!(
            "incomplete gamma series stalled at a = {a}, x = {x}"
        )))
    } else {
        // Q(a,x) by modified Lentz continued fraction.
        const FPMIN: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=ctl.max_terms {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() <= ctl.rel_tol {
                let q = ln_pre.exp() * h;
                return Ok((1.0 - q).clamp(0.0, 1.0));
            }
        }
        Err(Error::convergence(format!(
            "incomplete gamma continued fraction stalled at a = {a}, x = {x}"
        )))
    }
}

/// Regularized incomplete beta function I_z(a, b) for `z ∈ [0,1]`, `a, b > 0`.
///
/// Continued fraction with the symmetry split at `z = (a+1)/(a+b+2)`.
pub fn reg_inc_beta(z: f64, a: f64, b: f64, ctl: &SeriesControl) -> Result<f64> {
    ctl.check()?;
    if !a.is_finite() || !b.is_finite() || a <= 0.0 || b <= 0.0 {
        return Err(Error::domain(format!(
            "reg_inc_beta requires a, b > 0, got ({a}, {b})"
        )));
    }
    if !z.is_finite() || !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!(
            "reg_inc_beta requires z in [0, 1], got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == 1.0 {
        return Ok(1.0);
    }
    let ln_bt = a * z.ln() + b * (1.0 - z).ln()
        - (ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b));
    let bt = ln_bt.exp();
    if z < (a + 1.0) / (a + b + 2.0) {
        Ok((bt * beta_cf(a, b, z, ctl)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - bt * beta_cf(b, a, 1.0 - z, ctl)? / b).clamp(0.0, 1.0))
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=ctl.max_terms {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= ctl.rel_tol {
            return Ok(h);
        }
    }
    Err(Error::convergence(format!(
        "incomplete beta continued fraction stalled at a = {a}, b = {b}, x = {x}"
    )))
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) on the regime this crate
/// needs: `c > 0` and `z ∈ [0, 1]`, where `z = 1` additionally requires
/// `c − a − b > 0` (Gauss summation) unless the series terminates.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let (sign, ln_abs) = hyp2f1_signed_ln(a, b, c, z, ctl)?;
    let value = sign * ln_abs.exp();
    if !value.is_finite() {
        return Err(Error::convergence(format!(
            "hyp2f1({a}, {b}; {c}; {z}) overflows f64"
        )));
    }
    Ok(value)
}

/// ln ₂F₁(a, b; c; z) for regimes where the value is positive.
///
/// Used by the Gini formulas, whose coefficients can under/overflow as
/// plain `f64` when mixture shapes are very large.
pub(crate) fn hyp2f1_ln(a: f64, b: f64, c: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let (sign, ln_abs) = hyp2f1_signed_ln(a, b, c, z, ctl)?;
    if sign <= 0.0 {
        return Err(Error::domain(format!(
            "hyp2f1_ln requires a positive function value, got sign {sign} at ({a}, {b}; {c}; {z})"
        )));
    }
    Ok(ln_abs)
}

/// Nearest non-positive integer within 1e-12, as a term count.
fn terminating_order(x: f64) -> Option<usize> {
    if x > 0.5 {
        return None;
    }
    let r = x.round();
    if r <= 0.0 && (x - r).abs() <= 1e-12 {
        Some((-r) as usize)
    } else {
        None
    }
}

fn hyp2f1_signed_ln(a: f64, b: f64, c: f64, z: f64, ctl: &SeriesControl) -> Result<(f64, f64)> {
    ctl.check()?;
    if !a.is_finite() || !b.is_finite() || !c.is_finite() || !z.is_finite() {
        return Err(Error::domain("hyp2f1 requires finite arguments".to_string()));
    }
    if c <= 0.0 {
        return Err(Error::domain(format!("hyp2f1 requires c > 0, got {c}")));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain(format!(
            "hyp2f1 supports z in [0, 1] only, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok((1.0, 0.0));
    }

    let order = match (terminating_order(a), terminating_order(b)) {
        (Some(na), Some(nb)) => Some(na.min(nb)),
        (Some(na), None) => Some(na),
        (None, Some(nb)) => Some(nb),
        (None, None) => None,
    };

    if z == 1.0 {
        // Gauss summation theorem, also exact for terminating parameters.
        let s = c - a - b;
        if s > 0.0 && c - a > 0.0 && c - b > 0.0 {
            let ln = ln_gamma_unchecked(c) + ln_gamma_unchecked(s)
                - ln_gamma_unchecked(c - a)
                - ln_gamma_unchecked(c - b);
            return Ok((1.0, ln));
        }
        if let Some(n_terms) = order {
            return Ok(signed_ln(terminating_sum(a, b, c, z, n_terms)));
        }
        return Err(Error::domain(format!(
            "hyp2f1 diverges at z = 1 when c - a - b <= 0 (got {s})"
        )));
    }

    // A strongly negative parameter makes the raw series (terminating or
    // not) cancel catastrophically; Euler's transformation
    //   ₂F₁(a,b;c;z) = (1−z)^(c−a−b) ₂F₁(c−a, c−b; c; z)
    // turns it into an all-positive-term series when c−a, c−b > 0.
    if a.min(b) < -15.0 && c - a > 0.0 && c - b > 0.0 {
        let (sum_sign, ln_sum) = gauss_series_scaled(c - a, c - b, c, z, ctl)?;
        debug_assert!(sum_sign > 0.0);
        return Ok((sum_sign, ln_sum + (c - a - b) * (1.0 - z).ln()));
    }

    // Short terminating series: sum the exact finite polynomial.
    if let Some(n_terms) = order {
        return Ok(signed_ln(terminating_sum(a, b, c, z, n_terms)));
    }

    let sum = gauss_series(a, b, c, z, ctl)?;
    Ok(signed_ln(sum))
}

fn signed_ln(v: f64) -> (f64, f64) {
    if v == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        (v.signum(), v.abs().ln())
    }
}

fn terminating_sum(a: f64, b: f64, c: f64, z: f64, n_terms: usize) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..n_terms {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        sum += term;
    }
    sum
}

/// Plain Gauss power series Σ (a)ₙ(b)ₙ/((c)ₙ n!) zⁿ, for 0 < z < 1.
fn gauss_series(a: f64, b: f64, c: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..ctl.max_terms {
        let k = k as f64;
        let ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        term *= ratio;
        sum += term;
        // Geometric tail bound once the term ratio has dropped below one.
        let r = ratio.abs();
        if r < 1.0 {
            let tail = term.abs() * r / (1.0 - r);
            if tail <= ctl.rel_tol * sum.abs() + ctl.abs_tol {
                return Ok(sum);
            }
        }
    }
    Err(Error::convergence(format!(
        "hyp2f1 series stalled at ({a}, {b}; {c}; {z})"
    )))
}

/// Positive-term Gauss series with running rescaling, returning
/// `(sign, ln sum)`. Requires a, b, c > 0 so that every term is positive;
/// the partial sums may exceed f64 range, hence the log-scaled result.
fn gauss_series_scaled(a: f64, b: f64, c: f64, z: f64, ctl: &SeriesControl) -> Result<(f64, f64)> {
    const RESCALE_AT: f64 = 1e280;
    const RESCALE: f64 = 1e-280;
    debug_assert!(a > 0.0 && b > 0.0 && c > 0.0);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut log_scale = 0.0f64;
    for k in 0..ctl.max_terms {
        let k = k as f64;
        let ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        term *= ratio;
        sum += term;
        if sum > RESCALE_AT {
            sum *= RESCALE;
            term *= RESCALE;
            log_scale -= RESCALE.ln();
        }
        if ratio < 1.0 {
            let tail = term * ratio / (1.0 - ratio);
            if tail <= ctl.rel_tol * sum {
                return Ok((1.0, log_scale + sum.ln()));
            }
        }
    }
    Err(Error::convergence(format!(
        "hyp2f1 transformed series stalled at ({a}, {b}; {c}; {z})"
    )))
}

/// Log multinomial coefficient `ln[(Σkᵢ)! / Π kᵢ!]`.
pub fn ln_multinomial(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    // coefficient is exactly 1 when all draws land in one cell
    if counts.iter().all(|&k| k == 0 || k == total) {
        return 0.0;
    }
    let mut ln = ln_gamma_unchecked(total as f64 + 1.0);
    for &k in counts {
        if k > 1 {
            ln -= ln_gamma_unchecked(k as f64 + 1.0);
        }
    }
    ln
}
