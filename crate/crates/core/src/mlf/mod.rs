//! Two-parameter Mittag-Leffler function and the Wright-type densities used
//! by the fractional solution operator.
//!
//! `E_{α,β}(z) = Σ z^k / Γ(αk + β)` is evaluated on the real line in three
//! regimes:
//!
//! * the power series, whenever its largest term stays below `1e5` so that
//!   cancellation costs at most five digits;
//! * for `0 < α < 1` and `z < 0`, the algebraic asymptotic expansion
//!   `-Σ_{k=1}^{K} z^{-k} / Γ(β - αk)` when its smallest term is negligible;
//! * otherwise a real-line integral representation evaluated with tanh-sinh
//!   quadrature (`0 < α < 1`), or the Euler-type integral for `α = 1`.

pub mod gamma;
mod wright;

pub use wright::{m_wright, moment_check, phi_alpha, wright_psi, MomentEstimate, THETA_MIN};

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;
use gamma::{ln_gamma, rgamma};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Order of the time derivative, `0 < α ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::domain(format!(
                "fractional order must lie in (0, 1], got {alpha}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FracOrder> for f64 {
    fn from(a: FracOrder) -> f64 {
        a.0
    }
}

/// Parameters `(α, β)` of `E_{α,β}`, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlfParams {
    alpha: f64,
    beta: f64,
}

impl MlfParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "Mittag-Leffler parameters must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Largest power-series term (in absolute value) tolerated before switching
/// to another regime.
const SERIES_PEAK_LIMIT: f64 = 10.0;
const SERIES_MAX_TERMS: usize = 5000;
const ASYMPTOTIC_TERMS: usize = 30;
const QUAD_TOL: f64 = 1e-14;

/// `E_{α,β}(z)` for real `z`.
pub fn mittag_leffler(params: MlfParams, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!(
            "Mittag-Leffler argument must be finite, got {z}"
        )));
    }
    let MlfParams { alpha, beta } = params;
    if alpha == 1.0 && beta == 1.0 {
        return Ok(z.exp());
    }
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    let ln_peak = ln_peak_term(alpha, beta, z.abs());
    if z > 0.0 && ln_peak > f64::MAX.ln() {
        return Err(Error::domain(format!(
            "E_{{{alpha},{beta}}}({z}) exceeds the floating-point range"
        )));
    }
    if z > 0.0 || ln_peak <= SERIES_PEAK_LIMIT.ln() {
        return series(alpha, beta, z);
    }
    if alpha == 1.0 {
        return classical_negative(beta, z);
    }
    if alpha > 1.0 {
        return Err(Error::domain(
            "only 0 < alpha <= 1 is supported for large negative arguments",
        ));
    }
    if let Some(v) = asymptotic(alpha, beta, z) {
        return Ok(v);
    }
    integral_negative(alpha, beta, -z)
}

/// `ln max_k |z|^k / Γ(αk+β)` for `x = |z|`.
fn ln_peak_term(alpha: f64, beta: f64, x: f64) -> f64 {
    let lx = x.ln();
    let mut best = f64::NEG_INFINITY;
    let mut falling = 0;
    for k in 0..SERIES_MAX_TERMS {
        let v = k as f64 * lx - ln_gamma(alpha * k as f64 + beta);
        if v > best {
            best = v;
            falling = 0;
        } else {
            falling += 1;
            if falling > 4 {
                break;
            }
        }
    }
    best
}

fn series_term(alpha: f64, beta: f64, z: f64, k: usize) -> f64 {
    let arg = alpha * k as f64 + beta;
    let lz = k as f64 * z.abs().ln();
    if arg < 170.0 && lz < 700.0 {
        z.powi(k as i32) * rgamma(arg)
    } else {
        let sign = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        sign * (lz - ln_gamma(arg)).exp()
    }
}

fn series(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    // compensated (Kahan) summation
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut prev_mag = f64::INFINITY;
    for k in 0..SERIES_MAX_TERMS {
        let t = series_term(alpha, beta, z, k);
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        let mag = t.abs();
        if k > 2 && mag <= prev_mag && mag <= 1e-17 * sum.abs().max(1e-300) {
            return Ok(sum);
        }
        prev_mag = mag;
    }
    Err(Error::Accuracy(format!(
        "Mittag-Leffler series did not converge within {SERIES_MAX_TERMS} terms (alpha={alpha}, beta={beta}, z={z})"
    )))
}

/// Optimally truncated algebraic expansion for `0 < α < 1`, `z < 0`; `None`
/// when it cannot reach double precision with at most 30 terms.
fn asymptotic(alpha: f64, beta: f64, z: f64) -> Option<f64> {
    let mut terms = Vec::with_capacity(ASYMPTOTIC_TERMS + 1);
    for k in 1..=ASYMPTOTIC_TERMS + 1 {
        let kf = k as f64;
        let arg = beta - alpha * kf;
        // arguments that are nonpositive integers up to rounding give exact zeros
        let r = if arg <= 0.5 && (arg - arg.round()).abs() < 1e-9 {
            0.0
        } else {
            rgamma(arg)
        };
        let mag_ln = -kf * z.abs().ln();
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 }; // z^{-k} with z < 0
        terms.push(-sign * mag_ln.exp() * r);
    }
    let mut sum = 0.0;
    let mut last_nonzero = f64::INFINITY;
    for k in 0..ASYMPTOTIC_TERMS - 2 {
        let mag = terms[k].abs();
        if mag != 0.0 {
            if mag > last_nonzero {
                // past the smallest term without reaching tolerance
                return None;
            }
            last_nonzero = mag;
        }
        sum += terms[k];
        // the next three terms bound the truncation error; zeros among them
        // (poles of Γ) do not end the expansion on their own
        let next = terms[k + 1..k + 4]
            .iter()
            .fold(0.0_f64, |m, t| m.max(t.abs()));
        if sum != 0.0 && next <= 1e-16 * sum.abs() {
            return Some(sum);
        }
    }
    None
}

/// `E_{α,β}(-x)` for `0 < α < 1`, `x > 0` through
/// `(1/απ) ∫_0^∞ r^{(1-β)/α} e^{-r^{1/α}} (r sin π(1-β) + x sin π(1-β+α)) / (r² + 2rx cos απ + x²) dr`,
/// valid for `β < 1 + α`; larger `β` are reduced with the recurrence
/// `E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z`.
fn integral_negative(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    if beta >= 1.0 + alpha {
        let lower = integral_negative(alpha, beta - alpha, x)?;
        return Ok((lower - rgamma(beta - alpha)) / (-x));
    }
    let p = (1.0 - beta) / alpha;
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let c = (alpha * PI).cos();
    // the denominator is a Lorentzian in r centred at -x cos(απ); written
    // as a sum of squares it keeps full precision near the peak
    let (centre, width) = (-x * c, x * (alpha * PI).sin());
    let inv_alpha = 1.0 / alpha;
    let smooth = move |r: f64| -> f64 {
        let num = r * s1 + x * s2;
        let den = (r - centre).powi(2) + width * width;
        (-r.powf(inv_alpha)).exp() * num / den
    };
    let kernel = move |r: f64, _: f64| if r <= 0.0 { 0.0 } else { r.powf(p) * smooth(r) };
    // beyond r_max the exponential factor underflows
    let r_max = 745.0_f64.powf(alpha);
    let mut breaks = vec![0.0, 1.0_f64.min(r_max), r_max];
    if x < r_max {
        breaks.push(x);
    }
    // near α = 1 the peak is narrow; bracket it at a few widths
    if centre > 0.0 && width < 0.1 * centre {
        for k in [1.0, 10.0, 100.0] {
            breaks.extend([centre - k * width, centre + k * width]);
        }
    }
    breaks.retain(|&b| (0.0..=r_max).contains(&b));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut total = 0.0;
    for (i, w) in breaks.windows(2).enumerate() {
        total += if i == 0 && p < 0.0 {
            // r^p with p near -1 hides most of the mass below any node;
            // integrate the leading term exactly
            let g0 = smooth(0.0);
            let rest = move |r: f64, _: f64| {
                if r <= 0.0 {
                    0.0
                } else {
                    r.powf(p) * (smooth(r) - g0)
                }
            };
            g0 * w[1].powf(p + 1.0) / (p + 1.0) + tanh_sinh(rest, w[0], w[1], QUAD_TOL)?
        } else {
            tanh_sinh(kernel, w[0], w[1], QUAD_TOL)?
        };
    }
    Ok(total / (alpha * PI))
}

/// `E_{1,β}(z)`, `z < 0`: `1/Γ(β-1) ∫_0^1 (1-u)^{β-2} e^{zu} du` for `β > 1`,
/// shifted through the recurrence for `β < 1`.
fn classical_negative(beta: f64, z: f64) -> Result<f64> {
    if beta == 1.0 {
        return Ok(z.exp());
    }
    if beta < 1.0 {
        return Ok(rgamma(beta) + z * classical_negative(beta + 1.0, z)?);
    }
    let e = beta - 2.0;
    let f = move |u: f64, one_minus_u: f64| one_minus_u.powf(e) * (z * u).exp();
    // the mass sits within a few multiples of 1/|z| of the origin
    let split = (40.0 / z.abs()).min(1.0);
    if split == 1.0 {
        return Ok(rgamma(beta - 1.0) * tanh_sinh(f, 0.0, 1.0, QUAD_TOL)?);
    }
    let mut v = tanh_sinh(|u, _| f(u, 1.0 - u), 0.0, split, QUAD_TOL)?;
    v += tanh_sinh(f, split, 1.0, QUAD_TOL)?;
    Ok(rgamma(beta - 1.0) * v)
}
