//! Piecewise-polynomial data on [0, ∞) with exact evaluation and integration.
//!
//! Initial and boundary data are restricted to this representation so that
//! configs stay serializable and the cumulative integral U0 carries no
//! quadrature error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise polynomial: segment `i` covers `[breaks[i], breaks[i+1])`; the
/// last segment extends to +∞. Coefficients are in the local variable
/// `t - breaks[i]`, lowest degree first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    segs: Vec<Vec<f64>>,
    #[serde(skip)]
    cum: Vec<f64>,
}

fn poly_eval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// ∫₀ˢ of the polynomial in its local variable.
fn poly_integral(coeffs: &[f64], s: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in coeffs.iter().enumerate().rev() {
        acc = acc * s + c / (k as f64 + 1.0);
    }
    acc * s
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, segs: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.is_empty() || breaks[0] != 0.0 {
            return Err(Error::Config("piecewise data must start at 0".into()));
        }
        if breaks.len() != segs.len() {
            return Err(Error::Config(format!(
                "{} breakpoints vs {} segments",
                breaks.len(),
                segs.len()
            )));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("breakpoints must be strictly increasing".into()));
        }
        if segs.iter().any(|s| s.is_empty() || s.iter().any(|c| !c.is_finite())) {
            return Err(Error::Config("empty or non-finite segment coefficients".into()));
        }
        let mut p = Self { breaks, segs, cum: Vec::new() };
        p.rebuild_cum();
        Ok(p)
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![0.0], vec![vec![v]]).expect("constant is always valid")
    }

    /// Step function: value `v_i` on `[t_i, t_{i+1})`, last value extends to ∞.
    pub fn steps(pairs: &[(f64, f64)]) -> Result<Self> {
        let breaks = pairs.iter().map(|p| p.0).collect();
        let segs = pairs.iter().map(|p| vec![p.1]).collect();
        Self::new(breaks, segs)
    }

    /// Must be called after deserialization to restore the integral cache.
    pub fn rebuild_cum(&mut self) {
        let mut cum = Vec::with_capacity(self.breaks.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 0..self.breaks.len() - 1 {
            let len = self.breaks[i + 1] - self.breaks[i];
            acc += poly_integral(&self.segs[i], len);
            cum.push(acc);
        }
        self.cum = cum;
    }

    fn seg_index(&self, t: f64) -> usize {
        match self.breaks.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// Right-continuous evaluation; clamps below 0.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let i = self.seg_index(t);
        poly_eval(&self.segs[i], t - self.breaks[i])
    }

    /// Exact ∫₀ʸ.
    pub fn integral(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let i = self.seg_index(y);
        self.cum[i] + poly_integral(&self.segs[i], y - self.breaks[i])
    }

    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.integral(b) - self.integral(a)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Sup of |value| over [a, b], via per-segment sampling plus endpoints.
    /// Exact for step data; a tight bound for low-degree polynomials.
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.max(0.0));
        if b <= a {
            return self.eval(a).abs();
        }
        let mut m = 0.0f64;
        let mut probes = vec![a, b];
        for &br in &self.breaks {
            if br > a && br < b {
                probes.push(br);
                probes.push(br - 1e-12 * (1.0 + br));
            }
        }
        for k in 0..=32 {
            probes.push(a + (b - a) * k as f64 / 32.0);
        }
        for p in probes {
            m = m.max(self.eval(p).abs());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_integral() {
        let p = PiecewisePoly::constant(2.5);
        assert_eq!(p.eval(3.0), 2.5);
        assert_relative_eq!(p.integral(4.0), 10.0);
    }

    #[test]
    fn riemann_step() {
        // 1 on [0,1), 0 after
        let p = PiecewisePoly::steps(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(1.0), 0.0);
        assert_relative_eq!(p.integral(0.7), 0.7);
        assert_relative_eq!(p.integral(3.0), 1.0);
        assert_relative_eq!(p.integral_between(0.5, 2.0), 0.5);
    }

    #[test]
    fn local_coordinates() {
        // t on [0,2), then 2 + 3(t-2)^2
        let p = PiecewisePoly::new(vec![0.0, 2.0], vec![vec![0.0, 1.0], vec![2.0, 0.0, 3.0]])
            .unwrap();
        assert_relative_eq!(p.eval(1.5), 1.5);
        assert_relative_eq!(p.eval(3.0), 2.0 + 3.0);
        // ∫0^2 t = 2 ; ∫2^3 (2+3s²) = 2 + 1 = 3
        assert_relative_eq!(p.integral(3.0), 5.0);
    }

    #[test]
    fn rejects_bad_breaks() {
        assert!(PiecewisePoly::new(vec![0.0, 1.0, 1.0], vec![vec![0.0]; 3]).is_err());
        assert!(PiecewisePoly::new(vec![0.5], vec![vec![0.0]]).is_err());
    }
}
