//! Vortex-column base flows and the scalar fields of the radial eigenvalue
//! problem.
//!
//! A profile supplies the swirl velocity V(r) and axial velocity W(r) of the
//! steady column V(r) e_theta + W(r) e_z, with radial derivatives. From these,
//! [`eval_fields`] assembles every scalar entering the second-order potential:
//! the angular velocity Omega = V/r, the Doppler field Lambda = beta W - Omega,
//! the Rayleigh function Phi = ((rV)^2)'/r^3, the swirl ratio q = -(rV)'/W',
//! and the potential coefficients a, b, d, p. The potential itself is
//!
//! ```text
//! k(r; omega) = p n^2 (1 + a/(n gamma) + b/gamma^2 + d/n^2),
//! gamma(r) = n Lambda(r) - omega.
//! ```
//!
//! The closed-form branch covers the Batchelor vortex
//! V = (q/r)(1 - exp(-r^2)), W = exp(-r^2); tabulated profiles are
//! interpolated by a piecewise-quintic Hermite spline so that third
//! derivatives of composite fields remain available.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet3, Jet5};

/// Pole guard: |gamma| below this raises [`Error::PoleError`].
const GAMMA_POLE_GUARD: f64 = 1e-14;

/// Minimum number of samples a tabulated profile must supply (the node
/// derivative estimator fits quartics through five neighbouring nodes).
const MIN_TABLE_LEN: usize = 6;

/// A vortex-column base flow.
///
/// Serialized form: `{"kind":"batchelor","q":0.25}` or
/// `{"kind":"tabulated","r":[...],"V":[...],"W":[...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VortexProfile {
    /// Batchelor (trailing-line) vortex with swirl parameter q.
    Batchelor { q: f64 },
    /// User-supplied samples of V and W on a radial grid.
    Tabulated(TabulatedProfile),
}

/// Sampled profile with quintic-spline evaluators built at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw")]
pub struct TabulatedProfile {
    r: Vec<f64>,
    #[serde(rename = "V")]
    v: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<f64>,
    #[serde(skip)]
    splines: OnceLock<(QuinticSpline, QuinticSpline)>,
}

/// Raw serde-facing form of a tabulated profile.
#[derive(Debug, Clone, Deserialize)]
struct TabulatedRaw {
    r: Vec<f64>,
    #[serde(rename = "V")]
    v: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<f64>,
}

impl TryFrom<TabulatedRaw> for TabulatedProfile {
    type Error = String;

    fn try_from(raw: TabulatedRaw) -> std::result::Result<Self, String> {
        TabulatedProfile::new(raw.r, raw.v, raw.w).map_err(|e| e.to_string())
    }
}

impl TabulatedProfile {
    /// Validate samples and build the spline evaluators.
    pub fn new(r: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if r.len() < MIN_TABLE_LEN {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "tabulated profile needs at least {MIN_TABLE_LEN} samples, got {}",
                    r.len()
                ),
            });
        }
        if r.len() != v.len() || r.len() != w.len() {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "tabulated profile arrays must agree in length: r={}, V={}, W={}",
                    r.len(),
                    v.len(),
                    w.len()
                ),
            });
        }
        if !r.iter().all(|x| x.is_finite() && *x > 0.0)
            || !v.iter().all(|x| x.is_finite())
            || !w.iter().all(|x| x.is_finite())
        {
            return Err(Error::InvalidConfig {
                reason: "tabulated profile samples must be finite with r > 0".into(),
            });
        }
        if !r.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidConfig {
                reason: "tabulated radii must be strictly increasing".into(),
            });
        }
        let profile = TabulatedProfile {
            r,
            v,
            w,
            splines: OnceLock::new(),
        };
        profile.splines(); // build eagerly so later evaluation cannot fail
        Ok(profile)
    }

    fn splines(&self) -> &(QuinticSpline, QuinticSpline) {
        self.splines.get_or_init(|| {
            (
                QuinticSpline::build(&self.r, &self.v),
                QuinticSpline::build(&self.r, &self.w),
            )
        })
    }

    /// First and last tabulated radius.
    pub fn domain(&self) -> (f64, f64) {
        (self.r[0], *self.r.last().unwrap())
    }
}

/// All scalar fields of the potential at one radius.
#[derive(Debug, Clone)]
pub struct FieldBundle {
    /// Evaluation radius.
    pub r: f64,
    /// Angular velocity Omega = V/r of the base flow.
    pub omega: f64,
    /// Doppler field Lambda = beta W - Omega.
    pub lambda: f64,
    /// Rayleigh function Phi = ((rV)^2)'/r^3.
    pub phi: f64,
    /// Swirl ratio q = -(rV)'/W'.
    pub q: f64,
    /// First-order potential coefficient a.
    pub a: f64,
    /// Second-order potential coefficient b.
    pub b: f64,
    /// n-independent potential correction d.
    pub d: f64,
    /// Prefactor p = (1 + beta^2 r^2)/r^2.
    pub p: f64,
    /// Lambda'(r).
    pub lambda_d1: f64,
    /// Lambda''(r).
    pub lambda_d2: f64,
    /// Lambda'''(r).
    pub lambda_d3: f64,
    /// b'(r).
    pub b_d1: f64,
    /// b''(r).
    pub b_d2: f64,
    /// b'''(r).
    pub b_d3: f64,
}

/// Wavenumber pair and complex frequency parametrizing the potential.
#[derive(Debug, Clone, Copy)]
pub struct PotentialParams {
    /// Wavenumber ratio beta = alpha/n.
    pub beta: f64,
    /// Azimuthal wavenumber (positive integer).
    pub n: u32,
    /// Complex frequency.
    pub omega: Complex64,
}

impl VortexProfile {
    /// Batchelor vortex with swirl parameter `q > 0`.
    pub fn batchelor(q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidConfig {
                reason: format!("Batchelor swirl parameter must be positive, got {q}"),
            });
        }
        Ok(VortexProfile::Batchelor { q })
    }

    /// Tabulated profile from samples (validates and builds splines).
    pub fn tabulated(r: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        Ok(VortexProfile::Tabulated(TabulatedProfile::new(r, v, w)?))
    }

    /// Parse a profile from its JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Serialize the profile to JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Jets of V, W and the circulation Gamma = rV through fifth order.
    ///
    /// Gamma is produced directly by the profile (rather than rebuilt as
    /// r * V by callers) because the Batchelor closed form Gamma = q f with
    /// f = 1 - exp(-r^2) keeps full relative accuracy at large radii, where
    /// V + rV' suffers catastrophic cancellation.
    fn base5(&self, r: f64) -> Result<(Jet5, Jet5, Jet5)> {
        if !(r > 0.0) {
            return Err(Error::DomainError { r });
        }
        match self {
            VortexProfile::Batchelor { q } => {
                let x = Jet5::var(r);
                let e = (-(x * x)).exp();
                // f = 1 - exp(-r^2) with a cancellation-free value and
                // derivative slots f^(k) = -e^(k).
                let mut f = -e;
                f.0[0] = -(-r * r).exp_m1();
                let gamma = f.scale(*q);
                let v = gamma / x;
                Ok((v, e, gamma))
            }
            VortexProfile::Tabulated(tab) => {
                let (lo, hi) = tab.domain();
                if r < lo || r > hi {
                    return Err(Error::DomainError { r });
                }
                let (sv, sw) = tab.splines();
                let v = sv.eval5(r);
                Ok((v, sw.eval5(r), Jet5::var(r) * v))
            }
        }
    }

    /// Jet of the swirl velocity V at `r` (value and three derivatives).
    pub fn v_jet(&self, r: f64) -> Result<Jet3> {
        Ok(self.base5(r)?.0.to_jet3())
    }

    /// Jet of the axial velocity W at `r`.
    pub fn w_jet(&self, r: f64) -> Result<Jet3> {
        Ok(self.base5(r)?.1.to_jet3())
    }

    /// Jet of the circulation Gamma = rV at `r`.
    pub fn circulation_jet(&self, r: f64) -> Result<Jet3> {
        Ok(self.base5(r)?.2.to_jet3())
    }

    /// Jet of the angular velocity Omega = V/r at `r`.
    pub fn omega_jet(&self, r: f64) -> Result<Jet3> {
        let (v, _, _) = self.base5(r)?;
        Ok((v / Jet5::var(r)).to_jet3())
    }

    /// Swirl ratio q(r) = -(rV)'/W'.
    pub fn q_at(&self, r: f64) -> Result<f64> {
        match self {
            VortexProfile::Batchelor { q } => {
                if !(r > 0.0) {
                    return Err(Error::DomainError { r });
                }
                Ok(*q)
            }
            VortexProfile::Tabulated(_) => {
                let (_, w, gamma) = self.base5(r)?;
                let w_d1 = w.d(1);
                if w_d1 == 0.0 {
                    return Err(Error::SingularProfile { r });
                }
                Ok(-gamma.d(1) / w_d1)
            }
        }
    }
}

/// Evaluate every scalar field of the potential at radius `r`.
///
/// Closed-form jets are used for the Batchelor vortex; tabulated profiles
/// differentiate their quintic interpolant (exact piecewise derivatives).
pub fn eval_fields(profile: &VortexProfile, beta: f64, r: f64) -> Result<FieldBundle> {
    if !(r > 0.0) {
        return Err(Error::DomainError { r });
    }
    let (v, w, gamma_c) = profile.base5(r)?;
    let x = Jet5::var(r);
    let omega = v / x;
    let lambda = w.scale(beta) - omega;
    let gamma_d = gamma_c.shift(); // jet of Gamma'
    let w_d = w.shift(); // jet of W'
    let s = Jet5::constant(1.0) + x.powi(2).scale(beta * beta); // 1 + beta^2 r^2
    let denom = x * s;

    // b = -2 beta Gamma (W' + beta Gamma') / (r (1 + beta^2 r^2)), the
    // division-free equivalent of beta r^2 (1 - beta q) Phi / (q (1 + beta^2 r^2)).
    let b = (gamma_c * (w_d + gamma_d.scale(beta))).scale(-2.0 * beta) / denom;

    // a = r * d/dr [ (beta r^2 W' - Gamma') / (r (1 + beta^2 r^2)) ], the
    // division-free equivalent of r * d/dr [ (beta r^2 + q) W' / (r (1 + beta^2 r^2)) ].
    let a_inner = (w_d * x.powi(2).scale(beta) - gamma_d) / denom;
    let a = r * a_inner.d(1);

    let phi = 2.0 * gamma_c.d(0) * gamma_d.d(0) / (r * r * r);
    let br2 = beta * beta * r * r;
    let s0 = 1.0 + br2;
    let d = -(1.0 + 10.0 * br2 - 3.0 * br2 * br2) / (4.0 * s0 * s0 * s0);
    let p = s0 / (r * r);

    let q = match profile {
        VortexProfile::Batchelor { q } => *q,
        VortexProfile::Tabulated(_) => {
            let w_d1 = w_d.d(0);
            if w_d1 == 0.0 {
                return Err(Error::SingularProfile { r });
            }
            -gamma_d.d(0) / w_d1
        }
    };

    Ok(FieldBundle {
        r,
        omega: omega.d(0),
        lambda: lambda.d(0),
        phi,
        q,
        a,
        b: b.d(0),
        d,
        p,
        lambda_d1: lambda.d(1),
        lambda_d2: lambda.d(2),
        lambda_d3: lambda.d(3),
        b_d1: b.d(1),
        b_d2: b.d(2),
        b_d3: b.d(3),
    })
}

/// Value-only assembly of (Lambda, a, b, d, p), cheaper than [`eval_fields`];
/// this is the hot path of the shooting integrator.
pub fn potential_values(
    profile: &VortexProfile,
    beta: f64,
    r: f64,
) -> Result<(f64, f64, f64, f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::DomainError { r });
    }
    let (v5, w5, g5) = profile.base5(r)?;
    let v = v5.to_jet3();
    let w = w5.to_jet3();
    let gamma_c = g5.to_jet3();
    let x = Jet3::var(r);
    let lambda = beta * w.f - v.f / r;
    let gamma_d = Jet3::new(gamma_c.d1, gamma_c.d2, gamma_c.d3, 0.0);
    let w_d = Jet3::new(w.d1, w.d2, w.d3, 0.0);
    let s0 = 1.0 + beta * beta * r * r;
    let b = -2.0 * beta * gamma_c.f * (w.d1 + beta * gamma_c.d1) / (r * s0);
    let s = Jet3::constant(1.0) + (x * x).scale(beta * beta);
    let a_inner = (w_d * (x * x).scale(beta) - gamma_d) / (x * s);
    let a = r * a_inner.d1;
    let br2 = beta * beta * r * r;
    let d = -(1.0 + 10.0 * br2 - 3.0 * br2 * br2) / (4.0 * s0 * s0 * s0);
    let p = s0 / (r * r);
    Ok((lambda, a, b, d, p))
}

/// Doppler field Lambda = beta W - Omega at one radius (value only).
pub fn lambda_at(profile: &VortexProfile, beta: f64, r: f64) -> Result<f64> {
    let (v, w, _) = profile.base5(r)?;
    Ok(beta * w.d(0) - v.d(0) / r)
}

/// gamma(r) = n Lambda(r) - omega.
pub fn eval_gamma(profile: &VortexProfile, params: &PotentialParams, r: f64) -> Result<Complex64> {
    let lambda = lambda_at(profile, params.beta, r)?;
    Ok(Complex64::new(f64::from(params.n) * lambda, 0.0) - params.omega)
}

/// The potential k(r; omega) = p n^2 (1 + a/(n gamma) + b/gamma^2 + d/n^2).
pub fn eval_potential_k(
    profile: &VortexProfile,
    params: &PotentialParams,
    r: f64,
) -> Result<Complex64> {
    let (lambda, a, b, d, p) = potential_values(profile, params.beta, r)?;
    let n = f64::from(params.n);
    let gamma = Complex64::new(n * lambda, 0.0) - params.omega;
    if gamma.norm() < GAMMA_POLE_GUARD {
        return Err(Error::PoleError {
            r,
            gamma_abs: gamma.norm(),
        });
    }
    let bracket = 1.0 + a / (n * gamma) + b / (gamma * gamma) + d / (n * n);
    Ok(p * n * n * bracket)
}

/// The potential k(r; omega) evaluated at a complex radius.
///
/// All five ingredient functions (Lambda, a, b, d, p) are assembled from the
/// closed-form swirl profile, so the result is the analytic continuation of
/// `eval_potential_k` off the real axis. Contour quadratures in the matched
/// inner solver rely on this. Only the closed-form profile can be continued;
/// a tabulated profile returns `InvalidConfig`.
pub(crate) fn eval_potential_k_complex(
    profile: &VortexProfile,
    params: &PotentialParams,
    r: Complex64,
) -> Result<Complex64> {
    let q = match profile {
        VortexProfile::Batchelor { q } => *q,
        VortexProfile::Tabulated(_) => {
            return Err(Error::InvalidConfig {
                reason: "complex-radius potential requires the closed-form profile".into(),
            })
        }
    };
    let beta = params.beta;
    let n = f64::from(params.n);
    let r2 = r * r;
    let e = (-r2).exp();
    let f = 1.0 - e;
    let gamma_c = q * f;
    let s = 1.0 + beta * beta * r2;
    let u = beta * r2 + q;
    // Lambda = beta W - V / r with V = Gamma / r.
    let lambda = beta * e - gamma_c / r2;
    // b = -2 beta Gamma (W' + beta Gamma') / (r s); the exponential factors
    // collapse to 4 beta q (1 - e)(1 - q beta) e / s.
    let b = 4.0 * beta * q * f * e * (1.0 - q * beta) / s;
    // a = r d/dr[(beta r^2 W' - Gamma')/(r s)] = -4 r^2 e ((beta - u) s - beta^2 u) / s^2.
    let a = -4.0 * r2 * e * ((beta - u) * s - beta * beta * u) / (s * s);
    let d = -(1.0 + 10.0 * beta * beta * r2 - 3.0 * beta.powi(4) * r2 * r2) / (4.0 * s * s * s);
    let p = s / r2;
    let gamma = n * lambda - params.omega;
    if gamma.norm() < GAMMA_POLE_GUARD {
        return Err(Error::PoleError {
            r: r.re,
            gamma_abs: gamma.norm(),
        });
    }
    let bracket = 1.0 + a / (n * gamma) + b / (gamma * gamma) + d / (n * n);
    Ok(p * n * n * bracket)
}

/// Piecewise-quintic Hermite spline with node derivatives estimated from
/// quartic fits through five neighbouring nodes. Globally C^2; each piece is
/// a polynomial, so derivatives of any order exist piecewise.
#[derive(Debug, Clone)]
pub(crate) struct QuinticSpline {
    x: Vec<f64>,
    /// Monomial coefficients per interval, in u = r - x[i].
    coef: Vec<[f64; 6]>,
}

impl QuinticSpline {
    /// Build from strictly increasing nodes (validated by the caller).
    fn build(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 0..n {
            let w0 = i.saturating_sub(2).min(n - 5);
            let xs: [f64; 5] = core::array::from_fn(|k| x[w0 + k]);
            let ys: [f64; 5] = core::array::from_fn(|k| y[w0 + k]);
            let coeffs = divided_differences(&xs, &ys);
            let jet = newton_poly_jet(&xs, &coeffs, x[i]);
            d1[i] = jet.d1;
            d2[i] = jet.d2;
        }
        let mut coef = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = x[i + 1] - x[i];
            // Quintic Hermite in t = u/h matching value, first and second
            // derivative at both interval ends.
            let a0 = y[i];
            let a1 = h * d1[i];
            let a2 = 0.5 * h * h * d2[i];
            let p1 = y[i + 1];
            let q1 = h * d1[i + 1];
            let c1 = h * h * d2[i + 1];
            let rem_a = p1 - a0 - a1 - a2;
            let rem_b = q1 - a1 - 2.0 * a2;
            let rem_c = c1 - 2.0 * a2;
            let a3 = 10.0 * rem_a - 4.0 * rem_b + 0.5 * rem_c;
            let a4 = -15.0 * rem_a + 7.0 * rem_b - rem_c;
            let a5 = 6.0 * rem_a - 3.0 * rem_b + 0.5 * rem_c;
            let t = [a0, a1, a2, a3, a4, a5];
            let mut c = [0.0; 6];
            let mut hp = 1.0;
            for (j, cj) in c.iter_mut().enumerate() {
                *cj = t[j] / hp;
                hp *= h;
            }
            coef.push(c);
        }
        QuinticSpline {
            x: x.to_vec(),
            coef,
        }
    }

    /// Evaluate value and five derivatives at `r` (must lie inside the table).
    fn eval5(&self, r: f64) -> Jet5 {
        let n = self.x.len();
        let i = self
            .x
            .partition_point(|&xx| xx <= r)
            .clamp(1, n - 1)
            .saturating_sub(1);
        let u = r - self.x[i];
        let c = &self.coef[i];
        let mut out = [0.0; 6];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            // Horner over j >= k of c_j * j!/(j-k)! * u^(j-k).
            for j in (k..6).rev() {
                let mut fall = 1.0;
                for l in 0..k {
                    fall *= (j - l) as f64;
                }
                s = s * u + c[j] * fall;
            }
            *slot = s;
        }
        Jet5(out)
    }
}

/// Newton divided-difference coefficients for five points.
fn divided_differences(xs: &[f64; 5], ys: &[f64; 5]) -> [f64; 5] {
    let mut c = *ys;
    for level in 1..5 {
        for i in (level..5).rev() {
            c[i] = (c[i] - c[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    c
}

/// Evaluate the Newton-form quartic and its derivatives at `x` using jets.
fn newton_poly_jet(xs: &[f64; 5], coeffs: &[f64; 5], x: f64) -> Jet3 {
    let xj = Jet3::var(x);
    let mut p = Jet3::constant(coeffs[4]);
    for k in (0..4).rev() {
        p = p * (xj - Jet3::constant(xs[k])) + Jet3::constant(coeffs[k]);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Relative tolerance for closed-form values checked against an
    /// extended-precision evaluation of the same formulas.
    const ORACLE_REL_TOL: f64 = 1e-12;

    fn rel_close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol * y.abs().max(1.0)
    }

    fn batchelor(q: f64) -> VortexProfile {
        VortexProfile::batchelor(q).unwrap()
    }

    #[test]
    fn batchelor_velocity_components_match_closed_form() {
        let p = batchelor(0.25);
        let r = 1.3;
        let v = p.v_jet(r).unwrap();
        let w = p.w_jet(r).unwrap();
        let e = (-r * r).exp();
        assert!(rel_close(v.f, 0.25 * (1.0 - e) / r, 1e-14));
        assert!(rel_close(w.f, e, 1e-14));
        assert!(rel_close(w.d1, -2.0 * r * e, 1e-14));
    }

    #[test]
    fn generic_point_regression_against_extended_precision() {
        // q = 0.25, beta = 0.16, r = 1.3; reference values computed with an
        // independent 50-digit evaluation of the closed forms.
        let p = batchelor(0.25);
        let fb = eval_fields(&p, 0.16, 1.3).unwrap();
        let v = p.v_jet(1.3).unwrap();
        let w = p.w_jet(1.3).unwrap();
        assert!(rel_close(v.f, 0.156823168462886679, ORACLE_REL_TOL));
        assert!(rel_close(w.f, 0.184519523992989268, ORACLE_REL_TOL));
        assert!(rel_close(fb.omega, 0.12063320650991283, ORACLE_REL_TOL));
        assert!(rel_close(fb.lambda, -0.0911100826710345474, ORACLE_REL_TOL));
        assert!(rel_close(fb.phi, 0.0222591818429570896, ORACLE_REL_TOL));
        assert!(rel_close(fb.a, 0.446170912362105567, ORACLE_REL_TOL));
        assert!(rel_close(fb.b, 0.0221540375572134115, ORACLE_REL_TOL));
        assert!(rel_close(fb.d, -0.314187446277597192, ORACLE_REL_TOL));
        assert!(rel_close(fb.p, 0.617315976331360947, ORACLE_REL_TOL));
        assert!(rel_close(
            fb.lambda_d1,
            0.0378603788060941775,
            ORACLE_REL_TOL
        ));
        assert!(rel_close(fb.b_d1, -0.0459806020298113729, ORACLE_REL_TOL));
        assert!(rel_close(
            fb.lambda_d2,
            0.0605407454956397874,
            ORACLE_REL_TOL
        ));
        assert!(rel_close(fb.b_d2, 0.0185988226039961416, ORACLE_REL_TOL));
        assert!(rel_close(
            fb.lambda_d3,
            -0.150029362854570488,
            ORACLE_REL_TOL
        ));
        assert!(rel_close(fb.b_d3, 0.341570440063998273, ORACLE_REL_TOL));
        assert!(rel_close(fb.q, 0.25, 1e-15));
    }

    #[test]
    fn small_radius_fields_avoid_cancellation() {
        let p = batchelor(0.25);
        let fb = eval_fields(&p, 0.16, 0.05).unwrap();
        assert!(rel_close(fb.lambda, -0.0900872606703939765, ORACLE_REL_TOL));
        assert!(rel_close(
            fb.lambda_d2,
            -0.0688530428680479062,
            ORACLE_REL_TOL
        ));
    }

    #[test]
    fn angular_velocity_derivative_vanishes_toward_axis() {
        let p = batchelor(0.25);
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let om = p.omega_jet(eps).unwrap();
            assert!(om.d1.abs() < last, "Omega' not decreasing at eps={eps}");
            last = om.d1.abs();
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn b_vanishes_identically_at_beta_equal_inverse_q() {
        // The factor W' + beta Gamma' vanishes identically at beta = 1/q;
        // in floating point this is exact up to one rounding of beta*q.
        for q in [0.25, 0.3] {
            let p = batchelor(q);
            for r in [0.3, 0.8252, 1.7, 4.0] {
                let fb = eval_fields(&p, 1.0 / q, r).unwrap();
                assert!(
                    fb.b.abs() < 1e-15,
                    "b({r}) = {} must vanish at beta = 1/q",
                    fb.b
                );
                assert!(fb.b_d1.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ring_point_has_small_field_gradients() {
        // Rounded ring coordinates: the stationarity defects at the rounded
        // point were computed with extended precision.
        let p = batchelor(0.25);
        let fb = eval_fields(&p, 0.1589, 0.8252).unwrap();
        assert!(fb.lambda_d1.abs() < 1e-3);
        assert!(fb.b_d1.abs() < 1e-3);
        assert!(rel_close(fb.lambda_d1.abs(), 3.6548e-5, 1e-3));
        assert!(rel_close(fb.b_d1.abs(), 9.77541e-7, 1e-3));
    }

    #[test]
    fn swirl_ratio_formula_reproduces_the_constant() {
        // q(r) = -(rV)'/W' must equal the Batchelor constant at any radius.
        let q = 0.25;
        let p = batchelor(q);
        let mut state = 0x2545f4914f6cdd1du64;
        for _ in 0..100 {
            // xorshift64* in (0.01, 10)
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            let unit = (state.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64
                / (1u64 << 53) as f64;
            let r = 0.01 + unit * 9.99;
            let g = p.circulation_jet(r).unwrap();
            let w = p.w_jet(r).unwrap();
            let q_formula = -g.d1 / w.d1;
            assert!(rel_close(q_formula, q, 1e-12), "q({r}) = {q_formula}");
            assert_eq!(p.q_at(r).unwrap(), q);
        }
    }

    #[test]
    fn potential_conjugation_symmetry_at_fixed_points() {
        let p = batchelor(0.25);
        let omega = Complex64::new(-10.1, 0.19);
        for r in [0.4, 0.8252, 1.9, 6.0] {
            let params = PotentialParams {
                beta: 0.1589,
                n: 100,
                omega,
            };
            let conj_params = PotentialParams {
                beta: 0.1589,
                n: 100,
                omega: omega.conj(),
            };
            let k = eval_potential_k(&p, &params, r).unwrap();
            let kc = eval_potential_k(&p, &conj_params, r).unwrap();
            assert!((kc - k.conj()).norm() < 1e-12 * k.norm());
        }
    }

    #[test]
    fn potential_limits_at_axis_and_infinity() {
        let p = batchelor(0.25);
        let params = PotentialParams {
            beta: 0.1589438198533728195,
            n: 100,
            omega: Complex64::new(-10.0867185375793097, 0.19366478354116618),
        };
        // r -> 0: r^2 k -> n^2 (up to the d/n^2 correction of size 1/4).
        let k_axis = eval_potential_k(&p, &params, 1e-4).unwrap();
        let n2 = 1e4;
        assert!((k_axis * Complex64::new(1e-8, 0.0) / n2 - 1.0).norm() < 1e-3);
        // r -> infinity: k -> alpha^2.
        let alpha = params.beta * 100.0;
        let k_far = eval_potential_k(&p, &params, 500.0).unwrap();
        assert!((k_far / (alpha * alpha) - 1.0).norm() < 2e-4);
    }

    #[test]
    fn gamma_at_unit_radius_matches_extended_precision() {
        let p = batchelor(0.25);
        let params = PotentialParams {
            beta: 0.1589438198533728195,
            n: 100,
            omega: Complex64::new(
                100.0 * -0.1008671853757930973,
                0.19366478354116618244,
            ),
        };
        let g = eval_gamma(&p, &params, 1.0).unwrap();
        let expect = Complex64::new(0.130920929396686998, -0.193664783541166182);
        assert!((g - expect).norm() < 1e-12);
    }

    #[test]
    fn pole_error_fires_for_real_frequency_on_the_critical_layer() {
        let p = batchelor(0.25);
        let beta = 0.1589438198533728195;
        let r = 1.0;
        let lambda = lambda_at(&p, beta, r).unwrap();
        let params = PotentialParams {
            beta,
            n: 100,
            omega: Complex64::new(100.0 * lambda, 0.0),
        };
        match eval_potential_k(&p, &params, r) {
            Err(Error::PoleError { .. }) => {}
            other => panic!("expected PoleError, got {other:?}"),
        }
    }

    #[test]
    fn domain_error_for_nonpositive_radius() {
        let p = batchelor(0.25);
        assert!(matches!(
            eval_fields(&p, 0.16, 0.0),
            Err(Error::DomainError { .. })
        ));
        assert!(matches!(
            eval_fields(&p, 0.16, -1.0),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn finite_difference_second_derivative_matches_jets() {
        // 4th-order central stencil on Lambda values vs the jet Lambda''.
        let p = batchelor(0.25);
        let beta = 0.16;
        for r in [0.3f64, 0.5, 0.8252, 1.2, 2.0, 3.5] {
            let h = 1e-3 * r.max(1.0);
            let f = |rr: f64| lambda_at(&p, beta, rr).unwrap();
            let fd2 = (-f(r + 2.0 * h) + 16.0 * f(r + h) - 30.0 * f(r)
                + 16.0 * f(r - h)
                - f(r - 2.0 * h))
                / (12.0 * h * h);
            let fb = eval_fields(&p, beta, r).unwrap();
            assert!(
                (fd2 - fb.lambda_d2).abs() < 1e-7,
                "r={r}: fd={fd2}, jet={}",
                fb.lambda_d2
            );
        }
    }

    #[test]
    fn profile_json_round_trip() {
        let p = VortexProfile::from_json(r#"{"kind":"batchelor","q":0.25}"#).unwrap();
        match p {
            VortexProfile::Batchelor { q } => assert_eq!(q, 0.25),
            _ => panic!("wrong kind"),
        }
        let text = p.to_json().unwrap();
        assert!(text.contains("batchelor"));

        let r: Vec<f64> = (1..=40).map(|i| 0.1 * i as f64).collect();
        let v: Vec<f64> = r.iter().map(|&x| x * (-x * x).exp()).collect();
        let w: Vec<f64> = r.iter().map(|&x| (-x * x).exp()).collect();
        let tab = VortexProfile::tabulated(r, v, w).unwrap();
        let text = tab.to_json().unwrap();
        let back = VortexProfile::from_json(&text).unwrap();
        let a = tab.v_jet(1.55).unwrap();
        let b = back.v_jet(1.55).unwrap();
        assert!((a.f - b.f).abs() < 1e-15);
        assert!(text.contains("\"V\""));
    }

    #[test]
    fn tabulated_batchelor_reproduces_closed_forms() {
        let q = 0.25;
        let exact = batchelor(q);
        let n = 2400usize;
        let r: Vec<f64> = (0..n).map(|i| 0.01 + 5.0 * i as f64 / (n - 1) as f64).collect();
        let v: Vec<f64> = r
            .iter()
            .map(|&x| q * (-(-x * x).exp_m1()) / x)
            .collect();
        let w: Vec<f64> = r.iter().map(|&x| (-x * x).exp()).collect();
        let tab = VortexProfile::tabulated(r, v, w).unwrap();
        for rr in [0.3, 0.8252, 1.6, 3.9] {
            let fe = eval_fields(&exact, 0.16, rr).unwrap();
            let ft = eval_fields(&tab, 0.16, rr).unwrap();
            assert!(rel_close(ft.lambda, fe.lambda, 1e-10), "Lambda at {rr}");
            assert!(rel_close(ft.b, fe.b, 1e-9), "b at {rr}");
            assert!(rel_close(ft.a, fe.a, 1e-7), "a at {rr}");
            assert!((ft.lambda_d1 - fe.lambda_d1).abs() < 1e-8, "Lambda' at {rr}");
            assert!((ft.b_d1 - fe.b_d1).abs() < 1e-7, "b' at {rr}");
            assert!((ft.lambda_d2 - fe.lambda_d2).abs() < 1e-6, "Lambda'' at {rr}");
            assert!((ft.lambda_d3 - fe.lambda_d3).abs() < 1e-3, "Lambda''' at {rr}");
            assert!(rel_close(ft.q, q, 1e-6), "q at {rr}");
        }
    }

    #[test]
    fn complex_potential_matches_real_evaluation_on_axis() {
        let profile = batchelor(0.25);
        let params = PotentialParams {
            beta: 0.19,
            n: 200,
            omega: Complex64::new(-20.17, 0.19),
        };
        for rr in [0.35, 0.7, 1.06, 1.44, 1.8, 3.0] {
            let real = eval_potential_k(&profile, &params, rr).unwrap();
            let cplx =
                eval_potential_k_complex(&profile, &params, Complex64::new(rr, 0.0)).unwrap();
            assert!(
                (real - cplx).norm() <= 5e-13 * real.norm(),
                "closed-form mismatch at r = {rr}: {real} vs {cplx}"
            );
        }
    }

    #[test]
    fn complex_potential_satisfies_cauchy_riemann() {
        let profile = batchelor(0.25);
        let params = PotentialParams {
            beta: 0.19,
            n: 200,
            omega: Complex64::new(-20.17, 0.19),
        };
        let r0 = Complex64::new(1.06, 0.03);
        let h = 1e-5;
        let k = |z: Complex64| eval_potential_k_complex(&profile, &params, z).unwrap();
        let d_re = (k(r0 + h) - k(r0 - h)) / (2.0 * h);
        let d_im = (k(r0 + Complex64::new(0.0, h)) - k(r0 - Complex64::new(0.0, h)))
            / Complex64::new(0.0, 2.0 * h);
        assert!(
            (d_re - d_im).norm() <= 1e-5 * d_re.norm().max(1.0),
            "directional derivatives disagree: {d_re} vs {d_im}"
        );
    }

    #[test]
    fn complex_potential_rejects_tabulated_profiles() {
        let r: Vec<f64> = (1..=30).map(|i| 0.15 * i as f64).collect();
        let v: Vec<f64> = r.iter().map(|&x| 0.25 * (1.0 - (-x * x).exp()) / x).collect();
        let w: Vec<f64> = r.iter().map(|&x| (-x * x).exp()).collect();
        let tab = VortexProfile::tabulated(r, v, w).unwrap();
        let params = PotentialParams {
            beta: 0.19,
            n: 100,
            omega: Complex64::new(-10.0, 0.2),
        };
        assert!(matches!(
            eval_potential_k_complex(&tab, &params, Complex64::new(1.0, 0.1)),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn tabulated_rejects_bad_input() {
        assert!(VortexProfile::tabulated(vec![1.0, 2.0], vec![0.0; 2], vec![0.0; 2]).is_err());
        let r = vec![1.0, 2.0, 3.0, 3.0, 4.0, 5.0];
        assert!(VortexProfile::tabulated(r, vec![0.0; 6], vec![0.0; 6]).is_err());
    }

    #[test]
    fn constant_axial_flow_makes_swirl_ratio_singular() {
        let r: Vec<f64> = (1..=20).map(|i| 0.2 * i as f64).collect();
        let v: Vec<f64> = r.iter().map(|&x| 0.25 * x).collect();
        let w = vec![1.0; r.len()];
        let tab = VortexProfile::tabulated(r, v, w).unwrap();
        assert!(matches!(
            tab.q_at(1.5),
            Err(Error::SingularProfile { .. })
        ));
    }
}
