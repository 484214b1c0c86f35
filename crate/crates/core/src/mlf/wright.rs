use super::gamma::{gamma_sign, ln_gamma};
use super::FracOrder;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use std::f64::consts::PI;

/// Smallest argument accepted by [`wright_psi`].
pub const THETA_MIN: f64 = 0.05;
const PSI_MAX_TERMS: usize = 500;
const PSI_STOP_REL: f64 = 1e-14;
/// Relative rounding error above which a series value is rejected.
const SERIES_REL_ACCURACY: f64 = 1e-10;
/// Per-term relative error of the log-gamma based terms, in ulps.
const M_WRIGHT_ROUNDING: f64 = 64.0;

fn require_fractional(alpha: FracOrder) -> Result<f64> {
    let a = alpha.value();
    if a >= 1.0 {
        return Err(Error::domain("the Wright-type density needs 0 < alpha < 1"));
    }
    Ok(a)
}

/// Partial sum of `(1/π) Σ_{n≥1} (-1)^{n-1} θ^{-αn-1} Γ(nα+1)/n! sin(nπα)`
/// together with an estimate of its rounding error.
fn psi_series(a: f64, theta: f64) -> Result<(f64, f64)> {
    let lt = theta.ln();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut prev_env = f64::INFINITY;
    for n in 1..=PSI_MAX_TERMS {
        let nf = n as f64;
        let env = (-(a * nf + 1.0) * lt + ln_gamma(nf * a + 1.0) - ln_gamma(nf + 1.0)).exp();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * env * (nf * PI * a).sin();
        sum += term;
        abs_sum += term.abs();
        // the sine factor may vanish, so stop on the envelope
        if n > 1 && env < prev_env && env < PSI_STOP_REL * sum.abs() {
            return Ok((sum / PI, 4.0 * f64::EPSILON * abs_sum / PI));
        }
        prev_env = env;
    }
    Err(Error::Accuracy(format!(
        "psi series not converged after {PSI_MAX_TERMS} terms at theta={theta}"
    )))
}

/// The probability density `ψ_α(θ)` from its series in negative powers of θ.
///
/// Fails with a domain error for `θ < 0.05` or `α = 1`, and with an accuracy
/// error when cancellation in the series would exceed a relative `1e-10`
/// (this happens near `θ = 0.05` once α is well above one half).
pub fn wright_psi(alpha: FracOrder, theta: f64) -> Result<f64> {
    let a = require_fractional(alpha)?;
    if !(theta >= THETA_MIN) || !theta.is_finite() {
        return Err(Error::domain(format!(
            "psi series needs theta >= {THETA_MIN}, got {theta}"
        )));
    }
    let (v, err) = psi_series(a, theta)?;
    if err > SERIES_REL_ACCURACY * v.abs() + 1e-14 {
        return Err(Error::Accuracy(format!(
            "psi series loses accuracy at theta={theta} for alpha={a} (rounding {err:.1e})"
        )));
    }
    Ok(v)
}

/// `φ_α(θ) = (1/α) θ^{-1-1/α} ψ_α(θ^{-1/α})`.
pub fn phi_alpha(alpha: FracOrder, theta: f64) -> Result<f64> {
    let a = require_fractional(alpha)?;
    if !(theta > 0.0) {
        return Err(Error::domain(format!(
            "phi_alpha needs theta > 0, got {theta}"
        )));
    }
    let u = theta.powf(-1.0 / a);
    // θ^{-1-1/α} = u^{1+α}
    Ok(u.powf(1.0 + a) * wright_psi(alpha, u)? / a)
}

/// `φ_α` from its entire power series `Σ (-θ)^n / (n! Γ(1-α-αn))`, with a
/// rounding-error estimate. Accurate for small and moderate θ only.
pub fn m_wright(alpha: FracOrder, theta: f64) -> Result<(f64, f64)> {
    let a = require_fractional(alpha)?;
    if !(theta >= 0.0) {
        return Err(Error::domain(format!(
            "m_wright needs theta >= 0, got {theta}"
        )));
    }
    if theta == 0.0 {
        return Ok((super::gamma::rgamma(1.0 - a), 0.0));
    }
    let lt = theta.ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut abs_sum = 0.0;
    let mut peak_seen = false;
    let mut prev = 0.0;
    for n in 0..5000usize {
        let nf = n as f64;
        let x = 1.0 - a - a * nf;
        // 1/Γ(x) = sin(πx) Γ(1-x) / π for x < 1
        let s = gamma_sign(x);
        let term = if s == 0.0 {
            0.0
        } else {
            let ln_r = if x > 0.0 {
                -ln_gamma(x)
            } else {
                ((PI * x).sin().abs() / PI).ln() + ln_gamma(1.0 - x)
            };
            let mag = (nf * lt - ln_gamma(nf + 1.0) + ln_r).exp();
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            sign * s * mag
        };
        let env = (nf * lt - ln_gamma(nf + 1.0) + ln_gamma(a * (nf + 1.0))).exp() / PI;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        abs_sum += term.abs();
        if n > 0 && env < prev {
            peak_seen = true;
        }
        if peak_seen && env < 1e-18 * sum.abs().max(1e-300) {
            return Ok((sum, M_WRIGHT_ROUNDING * f64::EPSILON * abs_sum));
        }
        prev = env;
    }
    Err(Error::Accuracy(format!(
        "M-Wright series not converged at theta={theta}"
    )))
}

/// Result of [`moment_check`]: the quadrature value and an error estimate
/// combining truncation, rounding and rule-comparison terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

/// `φ_α(θ)` with its rounding error: the ψ route where it is valid,
/// the direct power series otherwise.
fn phi_with_error(alpha: FracOrder, theta: f64) -> Result<(f64, f64)> {
    match phi_alpha(alpha, theta) {
        Ok(v) => Ok((v, SERIES_REL_ACCURACY * v.abs())),
        Err(Error::Domain(_)) | Err(Error::Accuracy(_)) => m_wright(alpha, theta),
        Err(e) => Err(e),
    }
}

/// `∫_0^∞ θ^ν φ_α(θ) dθ` by panel-wise Gauss–Legendre, for comparison with
/// `Γ(1+ν)/Γ(1+αν)`.
///
/// The integration runs outward until the integrand drops below `1e-16`
/// or until the series rounding error reaches the integrand itself; the
/// neglected tail is folded into the error estimate. A warning is logged if
/// the estimate exceeds `1e-4`.
pub fn moment_check(alpha: FracOrder, nu: f64) -> Result<MomentEstimate> {
    require_fractional(alpha)?;
    if !(0.0..=4.0).contains(&nu) {
        return Err(Error::domain(format!(
            "moment order must lie in [0, 4], got {nu}"
        )));
    }
    let fine = GaussLegendre::new(16);
    let coarse = GaussLegendre::new(10);
    let width = 0.25;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    let mut past_mode = false;
    let mut prev_end = 0.0;
    for _ in 0..4000 {
        let hi = lo + width;
        let panel = |rule: &GaussLegendre| -> Result<(f64, f64)> {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut v = 0.0;
            let mut e = 0.0;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let th = mid + half * x;
                let (p, pe) = phi_with_error(alpha, th)?;
                v += w * half * th.powf(nu) * p;
                e += w * half * th.powf(nu) * pe;
            }
            Ok((v, e))
        };
        let (vf, ef) = panel(&fine)?;
        let (vc, _) = panel(&coarse)?;
        value += vf;
        err += ef + (vf - vc).abs();
        let (p_end, e_end) = phi_with_error(alpha, hi)?;
        let f_end = hi.powf(nu) * p_end.abs();
        // a rise after the mode means the series has broken down
        let rising_again = past_mode && f_end > prev_end;
        if f_end < prev_end {
            past_mode = true;
        }
        prev_end = f_end;
        lo = hi;
        if past_mode && (f_end < 1e-16 || hi.powf(nu) * e_end >= f_end || rising_again) {
            // crude tail: the integrand decays at least exponentially here
            err += f_end + hi.powf(nu) * e_end;
            break;
        }
    }
    if err > 1e-4 {
        log::warn!(
            "moment_check(alpha={}, nu={nu}): estimated error {err:.2e} exceeds 1e-4",
            alpha.value()
        );
    }
    Ok(MomentEstimate {
        value,
        error_estimate: err,
    })
}
