//! Source coefficient α(t), its antiderivative β(t) = ∫₀ᵗ α, and the shared
//! adaptive quadrature engine.
//!
//! β is evaluated by exact per-segment integration (closed forms for the
//! named presets, exact antiderivatives for piecewise polynomials and
//! tables). A uniform cache grid additionally carries cumulative ∫e^{±β},
//! which the shifted-quadratic fast paths consume, and the α sign-change
//! list, which makes β range queries exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::PiecewisePoly;

/// Source coefficient specification. Arbitrary closures are deliberately not
/// representable; configs must stay portable data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSpec {
    Zero,
    Constant { value: f64 },
    PiecewisePoly { data: PiecewisePoly },
    /// Sampled table with linear interpolation; constant beyond the ends.
    Table { ts: Vec<f64>, values: Vec<f64> },
    /// α(t) = (12t²−60t+70)/(4t³−30t²+70t+10); β = ln of the denominator /10.
    Example11,
    /// Oscillatory coefficient driving h-curves that touch the axis at
    /// 1/(kπ); truncated to zero below 1/((2n+1)π) and above 1/π.
    Example12 { n_trunc: u32 },
}

pub struct SourceModel {
    alpha: AlphaSpec,
    t_max: f64,
    tol_quad: f64,
    alpha_inf_norm: f64,
    /// Known discontinuities/kinks of α, used to split quadrature panels.
    breaks: Vec<f64>,
    /// Bounds of intervals on which β is monotone (α sign changes + breaks).
    monotone_bounds: Vec<f64>,
    /// Uniform cache grid.
    grid_h: f64,
    beta_vals: Vec<f64>,
    exp_cum: Vec<f64>,
    expneg_cum: Vec<f64>,
    /// Table integral cache (cumulative trapezoid at the table nodes).
    table_cum: Vec<f64>,
}

pub const DEFAULT_TOL_QUAD: f64 = 1e-9;
const BETA_GRID_CELLS: usize = 4096;

// --- Example 1.2 closed forms -------------------------------------------------

fn ex12_g(t: f64) -> f64 {
    t * (1.0 / t).sin()
}

fn ex12_gp(t: f64) -> f64 {
    (1.0 / t).sin() - (1.0 / t).cos() / t
}

fn ex12_gpp(t: f64) -> f64 {
    -(1.0 / t).sin() / (t * t * t)
}

/// γ'(t) for γ(t) = (t sin(1/t))⁴.
fn ex12_gamma_p(t: f64) -> f64 {
    let g = ex12_g(t);
    4.0 * g * g * g * ex12_gp(t)
}

/// γ''(t).
fn ex12_gamma_pp(t: f64) -> f64 {
    let g = ex12_g(t);
    let gp = ex12_gp(t);
    12.0 * g * g * gp * gp + 4.0 * g * g * g * ex12_gpp(t)
}

pub fn ex12_t_lower(n_trunc: u32) -> f64 {
    1.0 / ((2 * n_trunc + 1) as f64 * std::f64::consts::PI)
}

pub fn ex12_t_upper() -> f64 {
    1.0 / std::f64::consts::PI
}

// --- quadrature ---------------------------------------------------------------

/// Adaptive Simpson on [a, b] with estimated error ≤ tol·(1+|result|).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate_with_breaks(f, a, b, tol, &[])
}

/// Same, splitting panels first at the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    breaks: &[f64],
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("integrate"));
    }
    if b < a {
        return Err(Error::InvalidInterval { lo: a, hi: b });
    }
    if b == a {
        return Ok(0.0);
    }
    let mut cuts = vec![a];
    for &br in breaks {
        if br > a && br < b {
            cuts.push(br);
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    // First pass for an absolute budget.
    let mut rough = 0.0;
    for w in cuts.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        rough += (w[1] - w[0]) / 6.0 * (f(w[0]) + 4.0 * f(m) + f(w[1]));
    }
    let budget = tol * (1.0 + rough.abs());

    let mut total = 0.0;
    let mut worst = 0.0f64;
    let mut capped = false;
    for w in cuts.windows(2) {
        let piece_budget = budget * (w[1] - w[0]) / (b - a);
        let m = 0.5 * (w[0] + w[1]);
        let (fa, fm, fb) = (f(w[0]), f(m), f(w[1]));
        let whole = (w[1] - w[0]) / 6.0 * (fa + 4.0 * fm + fb);
        total += adaptive_panel(
            &f,
            w[0],
            fa,
            m,
            fm,
            w[1],
            fb,
            whole,
            piece_budget.max(1e-300),
            48,
            &mut worst,
            &mut capped,
        );
    }
    if capped {
        return Err(Error::QuadratureCap { a, b, worst });
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_panel<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
    capped: &mut bool,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || b - a < 1e-14 * (1.0 + a.abs()) {
        return left + right + err / 15.0;
    }
    if depth == 0 {
        *capped = true;
        *worst = worst.max(err.abs());
        return left + right;
    }
    adaptive_panel(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, worst, capped)
        + adaptive_panel(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, worst, capped)
}

// --- model --------------------------------------------------------------------

impl SourceModel {
    pub fn new(alpha: AlphaSpec, t_max: f64, tol_quad: f64) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::Config(format!("t_max must be positive, got {t_max}")));
        }
        if !(tol_quad > 0.0) {
            return Err(Error::Config("tol_quad must be positive".into()));
        }
        if let AlphaSpec::Table { ts, values } = &alpha {
            if ts.len() != values.len() || ts.len() < 2 || ts[0] != 0.0 {
                return Err(Error::Config(
                    "alpha table needs matching lengths, >= 2 nodes, starting at 0".into(),
                ));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("alpha table times must increase".into()));
            }
        }
        let mut model = Self {
            alpha,
            t_max,
            tol_quad,
            alpha_inf_norm: 0.0,
            breaks: Vec::new(),
            monotone_bounds: Vec::new(),
            grid_h: t_max / BETA_GRID_CELLS as f64,
            beta_vals: Vec::new(),
            exp_cum: Vec::new(),
            expneg_cum: Vec::new(),
            table_cum: Vec::new(),
        };
        model.build_table_cum();
        model.breaks = model.collect_breaks();
        model.build_grid();
        model.monotone_bounds = model.find_monotone_bounds();
        model.alpha_inf_norm = model.estimate_inf_norm();
        Ok(model)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn tol_quad(&self) -> f64 {
        self.tol_quad
    }

    pub fn alpha_inf_norm(&self) -> f64 {
        self.alpha_inf_norm
    }

    pub fn alpha_spec(&self) -> &AlphaSpec {
        &self.alpha
    }

    /// Quadrature split points of α within the horizon.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match &self.alpha {
            AlphaSpec::Zero => 0.0,
            AlphaSpec::Constant { value } => *value,
            AlphaSpec::PiecewisePoly { data } => data.eval(t),
            AlphaSpec::Table { ts, values } => {
                if t <= ts[0] {
                    values[0]
                } else if t >= *ts.last().unwrap() {
                    *values.last().unwrap()
                } else {
                    let i = ts.partition_point(|&x| x <= t) - 1;
                    let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
                    values[i] * (1.0 - w) + values[i + 1] * w
                }
            }
            AlphaSpec::Example11 => {
                (12.0 * t * t - 60.0 * t + 70.0) / (((4.0 * t - 30.0) * t + 70.0) * t + 10.0)
            }
            AlphaSpec::Example12 { n_trunc } => {
                if t <= ex12_t_lower(*n_trunc) || t >= ex12_t_upper() {
                    0.0
                } else {
                    ex12_gamma_pp(t) / (60.0 + ex12_gamma_p(t))
                }
            }
        }
    }

    /// β(t) = ∫₀ᵗ α, exact per kind. Panics never; negative t is an error in
    /// the checked wrapper `beta`.
    pub fn beta_raw(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.alpha {
            AlphaSpec::Zero => 0.0,
            AlphaSpec::Constant { value } => value * t,
            AlphaSpec::PiecewisePoly { data } => data.integral(t),
            AlphaSpec::Table { ts, values } => {
                if t <= ts[0] {
                    return values[0] * t;
                }
                let last = *ts.last().unwrap();
                if t >= last {
                    return *self.table_cum.last().unwrap()
                        + values.last().unwrap() * (t - last);
                }
                let i = ts.partition_point(|&x| x <= t) - 1;
                let dt = t - ts[i];
                let at = self.alpha(t);
                self.table_cum[i] + 0.5 * (values[i] + at) * dt
            }
            AlphaSpec::Example11 => {
                let den = ((4.0 * t - 30.0) * t + 70.0) * t + 10.0;
                (den / 10.0).ln()
            }
            AlphaSpec::Example12 { n_trunc } => {
                let lo = ex12_t_lower(*n_trunc);
                let hi = ex12_t_upper();
                if t <= lo || t >= hi {
                    0.0
                } else {
                    (1.0 + ex12_gamma_p(t) / 60.0).ln()
                }
            }
        }
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite("beta"));
        }
        if t < 0.0 {
            return Err(Error::InvalidInterval { lo: 0.0, hi: t });
        }
        Ok(self.beta_raw(t))
    }

    fn build_table_cum(&mut self) {
        if let AlphaSpec::Table { ts, values } = &self.alpha {
            let mut cum = Vec::with_capacity(ts.len());
            let mut acc = 0.0;
            cum.push(0.0);
            for i in 0..ts.len() - 1 {
                acc += 0.5 * (values[i] + values[i + 1]) * (ts[i + 1] - ts[i]);
                cum.push(acc);
            }
            self.table_cum = cum;
        }
    }

    fn collect_breaks(&self) -> Vec<f64> {
        let mut b = match &self.alpha {
            AlphaSpec::Zero | AlphaSpec::Constant { .. } | AlphaSpec::Example11 => vec![],
            AlphaSpec::PiecewisePoly { data } => data.breaks().to_vec(),
            AlphaSpec::Table { ts, .. } => ts.clone(),
            AlphaSpec::Example12 { n_trunc } => {
                let mut v = Vec::new();
                for k in 1..=(2 * n_trunc + 1) {
                    v.push(1.0 / (k as f64 * std::f64::consts::PI));
                }
                v
            }
        };
        b.retain(|&t| t > 0.0 && t < self.t_max);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        b
    }

    fn build_grid(&mut self) {
        let n = BETA_GRID_CELLS;
        let h = self.grid_h;
        let mut beta_vals = Vec::with_capacity(n + 1);
        let mut exp_cum = Vec::with_capacity(n + 1);
        let mut expneg_cum = Vec::with_capacity(n + 1);
        beta_vals.push(0.0);
        exp_cum.push(0.0);
        expneg_cum.push(0.0);
        let mut ep = 0.0;
        let mut en = 0.0;
        for k in 0..n {
            let a = k as f64 * h;
            let b = (k + 1) as f64 * h;
            ep += self.cell_integral(a, b, false);
            en += self.cell_integral(a, b, true);
            beta_vals.push(self.beta_raw(b));
            exp_cum.push(ep);
            expneg_cum.push(en);
        }
        self.beta_vals = beta_vals;
        self.exp_cum = exp_cum;
        self.expneg_cum = expneg_cum;
    }

    /// ∫ e^{±β} over one short interval by composite Simpson, split at α
    /// breaks (β kinks) inside.
    fn cell_integral(&self, a: f64, b: f64, neg: bool) -> f64 {
        if b <= a {
            return 0.0;
        }
        let simpson8 = |lo: f64, hi: f64| {
            let n = 8;
            let h = (hi - lo) / n as f64;
            let f = |t: f64| {
                let bv = self.beta_raw(t);
                if neg {
                    (-bv).exp()
                } else {
                    bv.exp()
                }
            };
            let mut s = f(lo) + f(hi);
            for j in 1..n {
                let t = lo + j as f64 * h;
                s += if j % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
            }
            s * h / 3.0
        };
        let from = self.breaks.partition_point(|&x| x <= a);
        let to = self.breaks.partition_point(|&x| x < b);
        if from == to {
            return simpson8(a, b);
        }
        let mut acc = 0.0;
        let mut lo = a;
        for &br in &self.breaks[from..to] {
            acc += simpson8(lo, br);
            lo = br;
        }
        acc + simpson8(lo, b)
    }

    fn find_monotone_bounds(&self) -> Vec<f64> {
        let mut bounds = vec![0.0, self.t_max];
        bounds.extend_from_slice(&self.breaks);
        // α sign transitions found on the cache grid and refined by bisection.
        let sgn = |v: f64| -> i8 {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        };
        let n = self.beta_vals.len() - 1;
        let mut prev_t = 0.0;
        let mut prev_s = sgn(self.alpha(0.0));
        for k in 1..=n {
            let t = k as f64 * self.grid_h;
            let s = sgn(self.alpha(t));
            if s != prev_s {
                if s != 0 && prev_s != 0 {
                    let (mut lo, mut hi) = (prev_t, t);
                    for _ in 0..60 {
                        let m = 0.5 * (lo + hi);
                        if sgn(self.alpha(m)) == prev_s {
                            lo = m;
                        } else {
                            hi = m;
                        }
                    }
                    bounds.push(0.5 * (lo + hi));
                } else {
                    bounds.push(prev_t);
                    bounds.push(t);
                }
            }
            prev_t = t;
            prev_s = s;
        }
        bounds.sort_by(|x, y| x.partial_cmp(y).unwrap());
        bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        bounds
    }

    fn estimate_inf_norm(&self) -> f64 {
        let mut m = 0.0f64;
        let n = 8192;
        for k in 0..=n {
            let t = self.t_max * k as f64 / n as f64;
            m = m.max(self.alpha(t).abs());
        }
        for &b in &self.breaks {
            m = m.max(self.alpha(b).abs());
            m = m.max(self.alpha(b - 1e-12).abs());
        }
        m
    }

    fn cum_lookup(&self, cum: &[f64], x: f64, neg: bool) -> f64 {
        let x = x.clamp(0.0, self.t_max);
        let k = ((x / self.grid_h) as usize).min(cum.len() - 1);
        let tk = k as f64 * self.grid_h;
        cum[k] + self.cell_integral(tk, x, neg)
    }

    /// ∫ₐᵇ e^{β(θ)} dθ via the cumulative table (direct quadrature for short
    /// intervals, where the table difference would cancel).
    pub fn exp_beta_int(&self, a: f64, b: f64) -> f64 {
        self.exp_int_impl(a, b, false)
    }

    /// ∫ₐᵇ e^{−β(θ)} dθ.
    pub fn exp_neg_beta_int(&self, a: f64, b: f64) -> f64 {
        self.exp_int_impl(a, b, true)
    }

    fn exp_int_impl(&self, a: f64, b: f64, neg: bool) -> f64 {
        if b < a {
            return -self.exp_int_impl(b, a, neg);
        }
        if b - a <= 3.0 * self.grid_h {
            return self.cell_integral(a, b, neg);
        }
        let cum = if neg { &self.expneg_cum } else { &self.exp_cum };
        self.cum_lookup(cum, b, neg) - self.cum_lookup(cum, a, neg)
    }

    /// Exact (min, max) of β over [a, b], using the monotone-piece bounds.
    pub fn beta_range(&self, a: f64, b: f64) -> (f64, f64) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut consider = |t: f64| {
            let v = self.beta_raw(t);
            lo = lo.min(v);
            hi = hi.max(v);
        };
        consider(a);
        consider(b);
        let from = self.monotone_bounds.partition_point(|&x| x <= a);
        for &t in &self.monotone_bounds[from..] {
            if t >= b {
                break;
            }
            consider(t);
        }
        (lo, hi)
    }

    /// Bounds of the intervals on which β is monotone.
    pub fn monotone_bounds(&self) -> &[f64] {
        &self.monotone_bounds
    }
}
