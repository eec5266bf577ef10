//! Panelled double-exponential quadrature.
//!
//! Integrands here are smooth except (possibly) for an integrable
//! algebraic singularity at the left end of the first panel, and they may
//! oscillate. Panels are kept narrower than half an oscillation period;
//! double-exponential quadrature copes with the endpoint singularity.

use quadrature::double_exponential;

use crate::error::{Error, Result};

const MAX_PANELS: usize = 200_000;
const MAX_DEPTH: u32 = 12;

/// ∫_a^b f, splitting into panels no wider than `width`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, width: f64, rel_tol: f64) -> Result<f64> {
    integrate_graded(f, a, b, width, 1.0, rel_tol)
}

/// As [`integrate`], but the first panel [a, a+h] is mapped through
/// ω = a + h u^p, which turns an algebraic endpoint singularity
/// (ω-a)^{q} with q > -1 into the smooth weight u^{p(q+1)-1}.
pub(crate) fn integrate_graded<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, width: f64, p: f64, rel_tol: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let n = ((b - a) / width).ceil().max(1.0);
    if !n.is_finite() || n as usize > MAX_PANELS {
        return Err(Error::Capacity(format!("quadrature would need {n} panels")));
    }
    let n = n as usize;
    let h = (b - a) / n as f64;
    // Scale from a cheap first pass, so that panel tolerances are relative
    // to the L1 mass of the integrand rather than to a possibly cancelling sum.
    let mut mass = 0.0;
    for k in 0..n {
        let lo = a + k as f64 * h;
        mass += coarse_abs(f, lo, lo + h);
    }
    let tol = (rel_tol * mass).max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    let mut err = 0.0;
    for k in 0..n {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == n { b } else { lo + h };
        let (v, e) = if k == 0 && p > 1.0 {
            let w = hi - lo;
            let g = |u: f64| if u <= 0.0 { 0.0 } else { f(lo + w * u.powf(p)) * p * w * u.powf(p - 1.0) };
            panel(&g, 0.0, 1.0, tol / n as f64, 0)?
        } else {
            panel(f, lo, hi, tol / n as f64, 0)?
        };
        total += v;
        err += e;
    }
    if !total.is_finite() {
        return Err(Error::Numeric("non-finite integral".into()));
    }
    if err > 10.0 * tol {
        return Err(Error::Numeric(format!("quadrature error estimate {err:e} exceeds tolerance {tol:e}")));
    }
    Ok(total)
}

fn panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64, depth: u32) -> Result<(f64, f64)> {
    let out = double_exponential::integrate(f, lo, hi, tol * 0.1);
    if out.error_estimate <= tol || depth >= MAX_DEPTH {
        return Ok((out.integral, out.error_estimate));
    }
    let mid = 0.5 * (lo + hi);
    let (a, ea) = panel(f, lo, mid, 0.5 * tol, depth + 1)?;
    let (b, eb) = panel(f, mid, hi, 0.5 * tol, depth + 1)?;
    Ok((a + b, ea + eb))
}

// Five-point Gauss-Legendre estimate of ∫|f|; interior nodes only, so an
// endpoint singularity never gets evaluated.
fn coarse_abs<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_08, 0.236_926_885_056_189_08];
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    X.iter().zip(W.iter()).map(|(x, w)| w * f(c + r * x).abs()).filter(|v| v.is_finite()).sum::<f64>() * r
}

/// Cauchy principal value of ∫_0^upper f where f has a simple pole at
/// `pole`. A symmetric window of half-width w is excluded; the truncated
/// integral P(w) = PV + a₁w + a₃w³ + … is Richardson-extrapolated over
/// w, w/2, w/4 (and checked against w/2, w/4, w/8).
pub(crate) fn principal_value<F: Fn(f64) -> f64>(f: &F, pole: f64, upper: f64, window: f64, width: f64, rel_tol: f64) -> Result<f64> {
    if !(pole > 0.0 && pole < upper) {
        return Err(Error::Domain(format!("pole {pole} must lie inside (0, {upper})")));
    }
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::InvalidParameter(format!("principal-value window {window} must be in (0, 1)")));
    }
    let w = (window * pole).min(0.5 * pole).min(0.5 * (upper - pole));
    let tight = rel_tol * 1e-2;
    // Outer part: geometric panels towards the window so 1/(pole-ω) stays tame.
    let mut outer = 0.0;
    let mut lo = pole - w;
    let mut step = w;
    while lo > 0.0 {
        let a = (lo - step).max(0.0);
        outer += integrate(f, a, lo, width, tight)?;
        lo = a;
        step *= 2.0;
    }
    let mut hi = pole + w;
    let mut step = w;
    while hi < upper {
        let b = (hi + step).min(upper);
        outer += integrate(f, hi, b, width, tight)?;
        hi = b;
        step = (step * 2.0).min(width.max(w));
    }
    // P(w/2^k) = P(w) + shells between the shrinking windows.
    let mut p = vec![outer];
    let mut cur = w;
    for _ in 0..3 {
        let nxt = 0.5 * cur;
        let shell = integrate(f, pole - cur, pole - nxt, width, tight)? + integrate(f, pole + nxt, pole + cur, width, tight)?;
        p.push(p.last().unwrap() + shell);
        cur = nxt;
    }
    let r1: Vec<f64> = (0..3).map(|k| 2.0 * p[k + 1] - p[k]).collect();
    let r2: Vec<f64> = (0..2).map(|k| (8.0 * r1[k + 1] - r1[k]) / 7.0).collect();
    // |f| w just outside the window estimates the pole residue, which sets
    // the natural scale when the regular parts cancel.
    let residue = 0.5 * w * (f(pole - w).abs() + f(pole + w).abs());
    let scale = p.iter().map(|v| v.abs()).fold(r2[1].abs().max(residue), f64::max);
    if (r2[1] - r2[0]).abs() > rel_tol * scale.max(1e-300) {
        return Err(Error::Numeric(format!(
            "principal-value extrapolation unstable: {} vs {} (window {window})",
            r2[0], r2[1]
        )));
    }
    Ok(r2[1])
}
