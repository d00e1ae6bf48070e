//! Strictly convex, superlinear flux models and their derived objects:
//! f', its inverse, the convex dual f*, and the sonic point λ_f where f'
//! changes sign.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric flux families. Shifted quadratics a(u−c)²/2 carry closed forms
/// for everything; general convex polynomials fall back to the numeric path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FluxFamily {
    ShiftedQuadratic { a: f64, c: f64 },
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct FluxModel {
    family: FluxFamily,
    /// Validation / numeric-inversion window; expanded automatically.
    u_lo: f64,
    u_hi: f64,
    lambda_f: f64,
    tol_root: f64,
    /// f' coefficients for the polynomial family.
    dcoeffs: Vec<f64>,
}

const BRACKET_CAP: f64 = 1.153e18; // 2^60
const SUPERLINEAR_THRESHOLD: f64 = 10.0;

fn poly_eval(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

impl FluxModel {
    pub fn shifted_quadratic(a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !c.is_finite() {
            return Err(Error::Config(format!(
                "shifted quadratic needs a > 0 finite, c finite; got a={a}, c={c}"
            )));
        }
        Ok(Self {
            family: FluxFamily::ShiftedQuadratic { a, c },
            u_lo: c - 100.0,
            u_hi: c + 100.0,
            lambda_f: c,
            tol_root: 1e-10,
            dcoeffs: Vec::new(),
        })
    }

    /// Burgers flux u²/2.
    pub fn burgers() -> Self {
        Self::shifted_quadratic(1.0, 0.0).unwrap()
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) || coeffs.len() < 3 {
            return Err(Error::Config(
                "polynomial flux needs finite coefficients and degree >= 2".into(),
            ));
        }
        let dcoeffs = differentiate(&coeffs);
        let mut m = Self {
            family: FluxFamily::Polynomial { coeffs },
            u_lo: -100.0,
            u_hi: 100.0,
            lambda_f: 0.0,
            tol_root: 1e-10,
            dcoeffs,
        };
        m.validate_window()?;
        m.lambda_f = m.invert_derivative(0.0)?;
        Ok(m)
    }

    pub fn from_family(family: FluxFamily) -> Result<Self> {
        match family {
            FluxFamily::ShiftedQuadratic { a, c } => Self::shifted_quadratic(a, c),
            FluxFamily::Polynomial { coeffs } => Self::polynomial(coeffs),
        }
    }

    pub fn family(&self) -> &FluxFamily {
        &self.family
    }

    /// (a, c) when the flux is a shifted quadratic; the closed-form fast
    /// paths in the curve machinery key off this.
    pub fn quadratic_params(&self) -> Option<(f64, f64)> {
        match self.family {
            FluxFamily::ShiftedQuadratic { a, c } => Some((a, c)),
            _ => None,
        }
    }

    pub fn tol_root(&self) -> f64 {
        self.tol_root
    }

    /// Strict convexity and monotone f' on the window; superlinearity proxy
    /// at the window edges (diagnostic, auto-expanding).
    fn validate_window(&mut self) -> Result<()> {
        for _ in 0..16 {
            let n = 256;
            let h = (self.u_hi - self.u_lo) / n as f64;
            let mut prev = self.fprime(self.u_lo);
            for k in 1..=n {
                let u = self.u_lo + k as f64 * h;
                let d = self.fprime(u);
                if d <= prev {
                    return Err(Error::Config(format!(
                        "flux derivative not strictly increasing near u={u}"
                    )));
                }
                let (u1, u2) = (u - h, u);
                let mid = self.f(0.5 * (u1 + u2));
                if mid >= 0.5 * (self.f(u1) + self.f(u2)) {
                    return Err(Error::Config(format!(
                        "midpoint convexity failed on [{u1}, {u2}]"
                    )));
                }
                prev = d;
            }
            let grow = (self.f(self.u_lo).abs() / self.u_lo.abs().max(1.0))
                .min(self.f(self.u_hi).abs() / self.u_hi.abs().max(1.0));
            if grow > SUPERLINEAR_THRESHOLD {
                return Ok(());
            }
            self.u_lo *= 2.0;
            self.u_hi *= 2.0;
        }
        Err(Error::Config(
            "superlinearity proxy failed after window expansion".into(),
        ))
    }

    pub fn f(&self, u: f64) -> f64 {
        match &self.family {
            FluxFamily::ShiftedQuadratic { a, c } => 0.5 * a * (u - c) * (u - c),
            FluxFamily::Polynomial { coeffs } => poly_eval(coeffs, u),
        }
    }

    pub fn fprime(&self, u: f64) -> f64 {
        match &self.family {
            FluxFamily::ShiftedQuadratic { a, c } => a * (u - c),
            FluxFamily::Polynomial { .. } => poly_eval(&self.dcoeffs, u),
        }
    }

    /// f(u) with a non-finiteness guard, for the API surface.
    pub fn eval_f(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFinite("eval_f"));
        }
        Ok(self.f(u))
    }

    /// Unique u with f'(u) = s; expanding-bracket bisection on the monotone
    /// derivative (closed form for quadratics).
    pub fn fprime_inverse(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::NonFinite("fprime_inverse"));
        }
        if let Some((a, c)) = self.quadratic_params() {
            return Ok(c + s / a);
        }
        self.invert_derivative(s)
    }

    fn invert_derivative(&self, s: f64) -> Result<f64> {
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let mut iter = 0;
        while self.fprime(lo) > s {
            lo *= 2.0;
            iter += 1;
            if lo.abs() > BRACKET_CAP || iter > 80 {
                return Err(Error::BracketFailure {
                    context: "fprime_inverse",
                    r_lo: self.fprime(lo) - s,
                    r_hi: self.fprime(hi) - s,
                });
            }
        }
        iter = 0;
        while self.fprime(hi) < s {
            hi *= 2.0;
            iter += 1;
            if hi > BRACKET_CAP || iter > 80 {
                return Err(Error::BracketFailure {
                    context: "fprime_inverse",
                    r_lo: self.fprime(lo) - s,
                    r_hi: self.fprime(hi) - s,
                });
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if (self.fprime(mid) - s).abs() <= self.tol_root * (1.0 + s.abs())
                || hi - lo <= 4.0 * f64::EPSILON * (1.0 + mid.abs())
            {
                return Ok(mid);
            }
            if self.fprime(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Convex dual f*(p) = max_v [pv − f(v)], evaluated at v = (f')⁻¹(p).
    pub fn legendre_dual(&self, p: f64) -> Result<f64> {
        if !p.is_finite() {
            return Err(Error::NonFinite("legendre_dual"));
        }
        if let Some((a, c)) = self.quadratic_params() {
            return Ok(p * c + 0.5 * p * p / a);
        }
        let v = self.fprime_inverse(p)?;
        Ok(p * v - self.f(v))
    }

    /// f*(f'(p)) = p·f'(p) − f(p): the dual along the derivative without any
    /// inversion. This is what every cost integrand uses.
    pub fn dual_at_derivative(&self, p: f64) -> f64 {
        p * self.fprime(p) - self.f(p)
    }

    /// Sonic point: the root of f', cached at construction.
    pub fn lambda_f(&self) -> f64 {
        self.lambda_f
    }

    /// Recompute the root of f' (exercises the numeric path; equals
    /// `lambda_f()` within tol_root).
    pub fn find_lambda_f(&self) -> Result<f64> {
        match self.family {
            FluxFamily::ShiftedQuadratic { c, .. } => Ok(c),
            _ => self.invert_derivative(0.0),
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.u_lo, self.u_hi)
    }
}
