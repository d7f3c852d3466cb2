//! Locates the concentration ring of a vortex profile.
//!
//! The ring is the pair (r0, beta) at which the Doppler field and the
//! second-order potential coefficient are simultaneously stationary,
//! Lambda'(r0) = 0 and b'(r0) = 0, with b(r0) > 0 and Lambda''(r0) > 0.
//! Unstable modes of large azimuthal wavenumber concentrate on this ring,
//! and every asymptotic quantity downstream is parametrized by it.
//!
//! For the Batchelor vortex the two conditions reduce to scalar equations:
//!
//! ```text
//! Lambda'(r) = 0   <=>   exp(r^2) = 1 + r^2 + beta r^4 / q
//! b'(r) = 0        <=>   g(r) = beta^2,
//! g(r) = (1 - 2 exp(-r^2)) / (r^2 (2 exp(-r^2) - 1) + exp(-r^2) - 1)
//! ```
//!
//! and the locator nests a Newton solve of the first inside a bisection on
//! beta of the second. General profiles use a damped two-dimensional Newton
//! iteration on (Lambda', b') directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{eval_fields, VortexProfile};

/// Residual bound both locators must achieve on (|Lambda'(r0)|, |b'(r0)|).
const RESIDUAL_TOL: f64 = 1e-12;

/// Iteration budget for every loop in this module.
const MAX_ITERATIONS: usize = 200;

/// Guard distance from the endpoints of the admissible beta interval
/// (q/2, 1/q); at beta = 1/q the coefficient b vanishes identically.
const BETA_ENDPOINT_GUARD: f64 = 1e-6;

/// Ring data parametrizing all asymptotics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RingGeometry {
    /// Ring radius r0.
    pub r0: f64,
    /// Wavenumber ratio beta = alpha/n selected by the ring conditions.
    pub beta: f64,
    /// b(r0) > 0, the square of the leading growth rate.
    pub b0: f64,
    /// Lambda(r0) < 0, the phase speed per unit wavenumber.
    pub lambda0: f64,
    /// Lambda''(r0) > 0, curvature of the Doppler field at the ring.
    pub lambda2: f64,
    /// p(r0) = (1 + beta^2 r0^2)/r0^2.
    pub p0: f64,
    /// a(r0), the first-order potential coefficient at the ring.
    pub a0: f64,
    /// (|Lambda'(r0)|, |b'(r0)|) at the returned point.
    pub residuals: (f64, f64),
}

/// Locate the ring of the Batchelor vortex with swirl parameter `q`.
pub fn locate_batchelor(q: f64) -> Result<RingGeometry> {
    if !(q > 0.0 && q < std::f64::consts::SQRT_2) {
        return Err(Error::InvalidConfig {
            reason: format!("swirl parameter must lie in (0, sqrt(2)), got {q}"),
        });
    }
    let lo = 0.5 * q + BETA_ENDPOINT_GUARD;
    let hi = 1.0 / q - BETA_ENDPOINT_GUARD;
    if lo >= hi {
        return Err(Error::NoRing { q, lo, hi });
    }
    let outer = |beta: f64| -> Result<f64> {
        let r0 = inner_radius(q, beta)?;
        Ok(g_of_r(r0) - beta * beta)
    };
    let f_lo = outer(lo)?;
    let f_hi = outer(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoRing { q, lo, hi });
    }
    // Bisection on the decreasing outer function, then a joint Newton polish.
    let (mut a, mut b) = (lo, hi);
    let (mut fa, _) = (f_lo, f_hi);
    let mut mid = 0.5 * (a + b);
    for _ in 0..MAX_ITERATIONS {
        mid = 0.5 * (a + b);
        if b - a < 1e-15 * mid {
            break;
        }
        let fm = outer(mid)?;
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let beta = mid;
    let r0 = inner_radius(q, beta)?;
    let profile = VortexProfile::batchelor(q)?;
    let (r0, beta) = newton2d(&profile, r0, beta)?;
    ring_from_point(&profile, r0, beta)
}

/// Locate a ring of a general profile by damped 2-D Newton from `seed`.
pub fn locate_general(profile: &VortexProfile, seed: (f64, f64)) -> Result<RingGeometry> {
    let (r0, beta) = newton2d(profile, seed.0, seed.1)?;
    let ring = ring_from_point(profile, r0, beta)?;
    verify_single_level(profile, &ring)?;
    Ok(ring)
}

/// Solve exp(r^2) = 1 + r^2 + beta r^4/q for the unique positive root by a
/// safeguarded Newton iteration started at r = 1.
pub(crate) fn inner_radius(q: f64, beta: f64) -> Result<f64> {
    let f = |r: f64| (r * r).exp() - 1.0 - r * r - beta * r.powi(4) / q;
    let fp = |r: f64| 2.0 * r * ((r * r).exp() - 1.0 - 2.0 * beta * r * r / q);
    // Bracket: f < 0 left of the root (for beta > q/2), f > 0 to the right.
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let mut r = 1.0f64;
    for iter in 0..MAX_ITERATIONS {
        let fr = f(r);
        if fr < 0.0 {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
        let mut r_new = r - fr / fp(r);
        if !r_new.is_finite() || r_new <= lo || r_new >= hi {
            r_new = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * r.max(0.5)
            };
        }
        if (r_new - r).abs() < 1e-15 * r_new.max(1.0) {
            return Ok(r_new);
        }
        r = r_new;
        if iter + 1 == MAX_ITERATIONS {
            return Err(Error::ConvergenceFailure {
                what: "ring inner radius solve".into(),
                iterations: MAX_ITERATIONS,
                residual: f(r).abs(),
            });
        }
    }
    unreachable!()
}

/// The scalar function whose level beta^2 marks b'(r) = 0 for the Batchelor
/// vortex.
fn g_of_r(r: f64) -> f64 {
    let e = (-r * r).exp();
    (1.0 - 2.0 * e) / (r * r * (2.0 * e - 1.0) + e - 1.0)
}

/// Damped 2-D Newton on (Lambda'(r), b'(r)) over (r, beta) with a centered
/// finite-difference Jacobian.
fn newton2d(profile: &VortexProfile, mut r: f64, mut beta: f64) -> Result<(f64, f64)> {
    let residual = |r: f64, beta: f64| -> Result<(f64, f64)> {
        let fb = eval_fields(profile, beta, r)?;
        Ok((fb.lambda_d1, fb.b_d1))
    };
    let norm = |v: (f64, f64)| v.0.hypot(v.1);
    // Stop threshold well below the residual contract so that re-running
    // from a converged point exits before taking any step.
    let stop = 1e-13;
    let mut res = residual(r, beta)?;
    for _ in 0..MAX_ITERATIONS {
        if norm(res) < stop {
            return Ok((r, beta));
        }
        let hr = 1e-7 * r.abs().max(1.0);
        let hb = 1e-7 * beta.abs().max(1.0);
        let rp = residual(r + hr, beta)?;
        let rm = residual(r - hr, beta)?;
        let bp = residual(r, beta + hb)?;
        let bm = residual(r, beta - hb)?;
        let j11 = (rp.0 - rm.0) / (2.0 * hr);
        let j21 = (rp.1 - rm.1) / (2.0 * hr);
        let j12 = (bp.0 - bm.0) / (2.0 * hb);
        let j22 = (bp.1 - bm.1) / (2.0 * hb);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SingularMatrix {
                context: "ring Newton Jacobian".into(),
            });
        }
        let dr = (res.0 * j22 - res.1 * j12) / det;
        let db = (j11 * res.1 - j21 * res.0) / det;
        // Damping: halve the step until the residual norm decreases.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let r_try = r - lambda * dr;
            let beta_try = beta - lambda * db;
            if r_try > 0.0 {
                if let Ok(res_try) = residual(r_try, beta_try) {
                    if norm(res_try) < norm(res) {
                        r = r_try;
                        beta = beta_try;
                        res = res_try;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // No decrease in any damped direction: either converged to the
            // attainable floor or stuck.
            if norm(res) < RESIDUAL_TOL {
                return Ok((r, beta));
            }
            return Err(Error::ConvergenceFailure {
                what: "ring 2-D Newton stalled".into(),
                iterations: MAX_ITERATIONS,
                residual: norm(res),
            });
        }
    }
    if norm(res) < RESIDUAL_TOL {
        return Ok((r, beta));
    }
    Err(Error::ConvergenceFailure {
        what: "ring 2-D Newton".into(),
        iterations: MAX_ITERATIONS,
        residual: norm(res),
    })
}

/// Assemble and validate the ring data at a converged point.
fn ring_from_point(profile: &VortexProfile, r0: f64, beta: f64) -> Result<RingGeometry> {
    let fb = eval_fields(profile, beta, r0)?;
    let residuals = (fb.lambda_d1.abs(), fb.b_d1.abs());
    if residuals.0 > RESIDUAL_TOL || residuals.1 > RESIDUAL_TOL {
        return Err(Error::ConvergenceFailure {
            what: "ring residuals".into(),
            iterations: MAX_ITERATIONS,
            residual: residuals.0.max(residuals.1),
        });
    }
    if !(fb.b > 0.0) {
        return Err(Error::AssumptionViolated {
            which: "b0".into(),
        });
    }
    if !(fb.lambda_d2 > 0.0) {
        return Err(Error::AssumptionViolated {
            which: "Lambda2".into(),
        });
    }
    let q = fb.q;
    if !(beta > 0.5 * q && beta < 1.0 / q) {
        return Err(Error::AssumptionViolated {
            which: "beta_range".into(),
        });
    }
    Ok(RingGeometry {
        r0,
        beta,
        b0: fb.b,
        lambda0: fb.lambda,
        lambda2: fb.lambda_d2,
        p0: fb.p,
        a0: fb.a,
        residuals,
    })
}

/// Check on a diagnostic grid that no other radius attains the ring level
/// Lambda(r0) (the single-level condition): Lambda(r0) must be the unique
/// global minimum.
fn verify_single_level(profile: &VortexProfile, ring: &RingGeometry) -> Result<()> {
    let (lo, hi) = match profile {
        VortexProfile::Batchelor { .. } => (1e-3, 20.0),
        VortexProfile::Tabulated(tab) => tab.domain(),
    };
    let n = 2000;
    for i in 0..=n {
        let r = lo + (hi - lo) * i as f64 / n as f64;
        if (r - ring.r0).abs() < 0.05 {
            continue;
        }
        let fb = eval_fields(profile, ring.beta, r)?;
        if fb.lambda < ring.lambda0 + 1e-9 {
            return Err(Error::AssumptionViolated {
                which: format!("single_level at r = {r}"),
            });
        }
    }
    Ok(())
}
