//! h-curves: the characteristic curves X'(θ) = f'(y0·e^{β(θ)}) that carry all
//! minimization in the explicit solution formula.
//!
//! Each curve is identified by a single parameter y0. The map
//! y0 ↦ ∫ f'(y0 e^β) dθ is strictly increasing, so the two-sided estimate
//! (f')⁻¹(Δx/Δt) / e^{max β} ≤ y0 ≤ (f')⁻¹(Δx/Δt) / e^{min β} always brackets
//! the solution and bisection converges. Shifted-quadratic fluxes make the
//! residual affine in y0, so the solve and the cost integral collapse to
//! closed forms in ∫e^{±β}; that fast path is what every scan below runs on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::source::{integrate_with_breaks, SourceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// t_lo = 0: curve anchored on the initial line.
    ToInitial,
    /// x_lo = 0: curve anchored on the time axis.
    ToBoundary,
    Interior,
}

/// A solved h-curve between two endpoints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HCurveSpec {
    pub y0: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub kind: CurveKind,
}

/// Which reading of the initial admissible set H_I to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityMode {
    /// Curve stays in the quarter plane (x ≥ 0). Default.
    Containment,
    /// Literal partial-integral condition: X(θ) ≥ y throughout.
    Strict,
}

/// Tolerance band for admissibility: curves touching the axis are admissible.
pub fn eps_adm(x_scale: f64) -> f64 {
    1e-8 * (1.0 + x_scale.abs())
}

/// Net displacement ∫_{t_lo}^{t_hi} f'(y0 e^{β(θ)}) dθ.
pub fn displacement(
    flux: &FluxModel,
    source: &SourceModel,
    y0: f64,
    t_lo: f64,
    t_hi: f64,
) -> f64 {
    if t_hi <= t_lo {
        return 0.0;
    }
    if let Some((a, c)) = flux.quadratic_params() {
        return a * (y0 * source.exp_beta_int(t_lo, t_hi) - c * (t_hi - t_lo));
    }
    integrate_with_breaks(
        |th| flux.fprime(y0 * source.beta_raw(th).exp()),
        t_lo,
        t_hi,
        0.1 * source.tol_quad(),
        source.breaks(),
    )
    .unwrap_or(f64::NAN)
}

/// Running cost ∫_{t_lo}^{t_hi} e^{−β} f*(f'(y0 e^β)) dθ of a curve leg.
///
/// Uses f*(f'(p)) = p·f'(p) − f(p); with the curve equation the first term
/// integrates to y0·Δx, leaving a single integral of e^{−β} f(y0 e^β).
pub fn leg_cost(flux: &FluxModel, source: &SourceModel, y0: f64, t_lo: f64, t_hi: f64) -> f64 {
    if t_hi <= t_lo {
        return 0.0;
    }
    if let Some((a, c)) = flux.quadratic_params() {
        return 0.5
            * a
            * (y0 * y0 * source.exp_beta_int(t_lo, t_hi)
                - c * c * source.exp_neg_beta_int(t_lo, t_hi));
    }
    let dx = displacement(flux, source, y0, t_lo, t_hi);
    let tail = integrate_with_breaks(
        |th| {
            let b = source.beta_raw(th);
            (-b).exp() * flux.f(y0 * b.exp())
        },
        t_lo,
        t_hi,
        0.1 * source.tol_quad(),
        source.breaks(),
    )
    .unwrap_or(f64::NAN);
    y0 * dx - tail
}

fn classify_kind(t_lo: f64, x_lo: f64, t_hi: f64) -> CurveKind {
    if t_lo.abs() <= 1e-14 * (1.0 + t_hi) {
        CurveKind::ToInitial
    } else if x_lo.abs() <= 1e-12 {
        CurveKind::ToBoundary
    } else {
        CurveKind::Interior
    }
}

/// Solve for the unique h-curve joining (x_lo, t_lo) to (x_hi, t_hi).
pub fn solve_h(
    x_hi: f64,
    t_hi: f64,
    x_lo: f64,
    t_lo: f64,
    flux: &FluxModel,
    source: &SourceModel,
) -> Result<HCurveSpec> {
    if ![x_hi, t_hi, x_lo, t_lo].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("solve_h"));
    }
    if t_hi <= t_lo {
        return Err(Error::InvalidInterval { lo: t_lo, hi: t_hi });
    }
    let dx = x_hi - x_lo;
    let dt = t_hi - t_lo;

    // Two-sided bracket estimate, validated on every solve.
    let c0 = flux.fprime_inverse(dx / dt)?;
    let (bmin, bmax) = source.beta_range(t_lo, t_hi);
    let (e_lo, e_hi) = (c0 * (-bmax).exp(), c0 * (-bmin).exp());
    let pad = 1e-9 * (1.0 + c0.abs());
    let mut lo = e_lo.min(e_hi) - pad;
    let mut hi = e_lo.max(e_hi) + pad;

    let y0 = if let Some((a, c)) = flux.quadratic_params() {
        let e = source.exp_beta_int(t_lo, t_hi);
        let y0 = (dx / a + c * dt) / e;
        if y0 < lo - 1e-6 * (1.0 + y0.abs()) || y0 > hi + 1e-6 * (1.0 + y0.abs()) {
            return Err(Error::BracketFailure {
                context: "solve_h bracket estimate",
                r_lo: y0 - lo,
                r_hi: hi - y0,
            });
        }
        y0
    } else {
        let resid = |y: f64| displacement(flux, source, y, t_lo, t_hi) - dx;
        let mut r_lo = resid(lo);
        let mut r_hi = resid(hi);
        let mut expansions = 0;
        while r_lo > 0.0 || r_hi < 0.0 {
            let w = (hi - lo).max(1e-12);
            if r_lo > 0.0 {
                lo -= w;
                r_lo = resid(lo);
            }
            if r_hi < 0.0 {
                hi += w;
                r_hi = resid(hi);
            }
            expansions += 1;
            if expansions > 80 || hi.abs() > 1.2e18 || lo.abs() > 1.2e18 {
                return Err(Error::BracketFailure {
                    context: "solve_h",
                    r_lo,
                    r_hi,
                });
            }
        }
        let tol = flux.tol_root() * (1.0 + dx.abs());
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let r = resid(mid);
            if r.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * (1.0 + mid.abs()) {
                break;
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        mid
    };

    Ok(HCurveSpec {
        y0,
        t_lo,
        t_hi,
        x_lo,
        x_hi,
        kind: classify_kind(t_lo, x_lo, t_hi),
    })
}

/// Position along the curve at time θ ∈ [t_lo, t_hi].
pub fn eval_curve(
    spec: &HCurveSpec,
    theta: f64,
    flux: &FluxModel,
    source: &SourceModel,
) -> Result<f64> {
    let slack = 1e-12 * (1.0 + spec.t_hi.abs());
    if theta < spec.t_lo - slack || theta > spec.t_hi + slack {
        return Err(Error::InvalidInterval {
            lo: spec.t_lo,
            hi: spec.t_hi,
        });
    }
    let th = theta.clamp(spec.t_lo, spec.t_hi);
    Ok(spec.x_lo + displacement(flux, source, spec.y0, spec.t_lo, th))
}

/// Minimum of the curve position over [t_lo, t_hi]: dense sampling plus
/// golden-section refinement in the best panel. Returns (θ_min, x_min).
pub fn curve_min(
    spec: &HCurveSpec,
    n_samples: usize,
    flux: &FluxModel,
    source: &SourceModel,
) -> (f64, f64) {
    let n = n_samples.max(8);
    let dt = (spec.t_hi - spec.t_lo) / n as f64;
    let xs: Vec<f64> = (0..=n)
        .map(|i| {
            spec.x_lo
                + displacement(flux, source, spec.y0, spec.t_lo, spec.t_lo + i as f64 * dt)
        })
        .collect();
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    let lo = spec.t_lo + dt * best.saturating_sub(1) as f64;
    let hi = (spec.t_lo + dt * (best + 1) as f64).min(spec.t_hi);
    let eval = |th: f64| spec.x_lo + displacement(flux, source, spec.y0, spec.t_lo, th);
    let (th, x) = golden_min(lo, hi, eval);
    if x < xs[best] {
        (th, x)
    } else {
        (spec.t_lo + dt * best as f64, xs[best])
    }
}

/// Golden-section minimization of a unimodal-on-[a,b] function.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, f: F) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..70 {
        if b - a <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Exact-structure infimum of the curve position: X' = f'(y0 e^β) changes
/// sign only where β crosses ln(λ_f / y0), and β is monotone between α sign
/// changes, so the minimum is attained at one of finitely many candidate
/// times. This is what the hot scan loops use; `curve_min` is the sampled
/// cross-check.
pub fn curve_inf(spec: &HCurveSpec, flux: &FluxModel, source: &SourceModel) -> (f64, f64) {
    let lam = flux.lambda_f();
    let mut cands: Vec<f64> = vec![spec.t_lo, spec.t_hi];
    let bounds = source.monotone_bounds();
    let from = bounds.partition_point(|&x| x <= spec.t_lo);
    for &b in &bounds[from..] {
        if b >= spec.t_hi {
            break;
        }
        cands.push(b);
    }
    let ratio = if spec.y0 != 0.0 { lam / spec.y0 } else { f64::NAN };
    if ratio.is_finite() && ratio > 0.0 {
        let level = ratio.ln();
        cands.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut crossings = Vec::new();
        for w in cands.windows(2) {
            let (p, q) = (w[0], w[1]);
            let (bp, bq) = (source.beta_raw(p) - level, source.beta_raw(q) - level);
            if bp == 0.0 {
                continue;
            }
            if bp * bq < 0.0 {
                let (mut lo, mut hi) = (p, q);
                for _ in 0..60 {
                    let m = 0.5 * (lo + hi);
                    if (source.beta_raw(m) - level) * bp > 0.0 {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                crossings.push(0.5 * (lo + hi));
            }
        }
        cands.extend(crossings);
    }
    let mut best = (spec.t_lo, spec.x_lo);
    for &th in &cands {
        let x = spec.x_lo + displacement(flux, source, spec.y0, spec.t_lo, th);
        if x < best.1 {
            best = (th, x);
        }
    }
    best
}

/// H_b membership: the h-curve from (0, τ) to (x, t) keeps nonnegative
/// partial integrals, i.e. never leaves the quarter plane.
pub fn is_admissible_boundary(
    tau: f64,
    x: f64,
    t: f64,
    flux: &FluxModel,
    source: &SourceModel,
) -> Result<bool> {
    if !(0.0 <= tau && tau < t) || x < 0.0 {
        return Err(Error::InvalidInterval { lo: tau, hi: t });
    }
    let spec = solve_h(x, t, 0.0, tau, flux, source)?;
    Ok(curve_inf(&spec, flux, source).1 >= -eps_adm(x))
}

/// H_I membership for the curve from (y, 0) to (x, t).
pub fn is_admissible_initial(
    y: f64,
    x: f64,
    t: f64,
    mode: AdmissibilityMode,
    flux: &FluxModel,
    source: &SourceModel,
) -> Result<bool> {
    if y < 0.0 || x < 0.0 || !(t > 0.0) {
        return Err(Error::InvalidInterval { lo: 0.0, hi: t });
    }
    let spec = solve_h(x, t, y, 0.0, flux, source)?;
    let floor = match mode {
        AdmissibilityMode::Containment => -eps_adm(x),
        AdmissibilityMode::Strict => y - eps_adm(x),
    };
    Ok(curve_inf(&spec, flux, source).1 >= floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{AlphaSpec, DEFAULT_TOL_QUAD};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn burgers() -> FluxModel {
        FluxModel::burgers()
    }

    fn zero_src(t_max: f64) -> SourceModel {
        SourceModel::new(AlphaSpec::Zero, t_max, DEFAULT_TOL_QUAD).unwrap()
    }

    fn ex11() -> (FluxModel, SourceModel) {
        (
            FluxModel::shifted_quadratic(1.0, 60.0).unwrap(),
            SourceModel::new(AlphaSpec::Example11, 6.0, DEFAULT_TOL_QUAD).unwrap(),
        )
    }

    #[test]
    fn straight_line_when_source_vanishes() {
        let (fx, src) = (burgers(), zero_src(2.0));
        let spec = solve_h(1.0, 1.0, 0.0, 0.0, &fx, &src).unwrap();
        assert_relative_eq!(spec.y0, 1.0, epsilon = 1e-10);
        assert_eq!(spec.kind, CurveKind::ToInitial);
        assert_relative_eq!(eval_curve(&spec, 0.5, &fx, &src).unwrap(), 0.5, epsilon = 1e-10);
        assert_relative_eq!(eval_curve(&spec, 0.0, &fx, &src).unwrap(), 0.0);
    }

    #[test]
    fn collapses_to_fprime_inverse_without_source() {
        // any convex flux: y0 = (f')⁻¹(Δx/Δt) when β ≡ 0
        let fx = FluxModel::polynomial(vec![0.0, 0.0, 0.0, 0.0, 0.25]).unwrap();
        let src = zero_src(3.0);
        let spec = solve_h(5.0, 2.5, 1.0, 0.5, &fx, &src).unwrap();
        let expect = fx.fprime_inverse(4.0 / 2.0).unwrap();
        assert_relative_eq!(spec.y0, expect, max_relative = 1e-8);
        assert_eq!(spec.kind, CurveKind::Interior);
    }

    #[test]
    fn quartic_roundtrip_closed_loop() {
        // (24,0) -> (24,5) under the ln-form source and shifted quadratic flux:
        // X(t) = (t−1)(t−2)(t−3)(t−4), parameter 10.
        let (fx, src) = ex11();
        let spec = solve_h(24.0, 5.0, 24.0, 0.0, &fx, &src).unwrap();
        assert!((spec.y0 - 10.0).abs() < 1e-6, "y0 = {}", spec.y0);
        for k in 0..=50 {
            let th = 5.0 * k as f64 / 50.0;
            let expect = (th - 1.0) * (th - 2.0) * (th - 3.0) * (th - 4.0);
            let got = eval_curve(&spec, th, &fx, &src).unwrap();
            assert!((got - expect).abs() < 1e-6, "θ={th}: {got} vs {expect}");
        }
        let mid = eval_curve(&spec, 2.5, &fx, &src).unwrap();
        assert!((mid - 0.5625).abs() < 1e-7);
    }

    #[test]
    fn quartic_minimum_and_admissibility() {
        let (fx, src) = ex11();
        let spec = solve_h(24.0, 5.0, 24.0, 0.0, &fx, &src).unwrap();
        let (th, xm) = curve_min(&spec, 256, &fx, &src);
        // critical points of the quartic: 2.5 ± √5/2, both with value −1
        let t_star = 2.5 + (5.0f64).sqrt() / 2.0;
        assert!((xm + 1.0).abs() < 1e-6, "min {xm}");
        assert!(
            (th - t_star).abs() < 1e-3 || (th - (5.0 - t_star)).abs() < 1e-3,
            "θ_min {th}"
        );
        let (thi, xi) = curve_inf(&spec, &fx, &src);
        assert!((xi - xm).abs() < 1e-8, "inf {xi} vs sampled {xm}");
        // the curve leaves the quarter plane, so both modes reject it
        assert!(!is_admissible_initial(24.0, 24.0, 5.0, AdmissibilityMode::Strict, &fx, &src)
            .unwrap());
        assert!(!is_admissible_initial(
            24.0,
            24.0,
            5.0,
            AdmissibilityMode::Containment,
            &fx,
            &src
        )
        .unwrap());
        let _ = thi;
    }

    #[test]
    fn example11_loop_leaves_quarter_plane() {
        // the same curve shifted to start at (0,·) heights: from (y,0)=(1,0) to (1,5)
        // X(t) = (t−1)(t−2)(t−3)(t−4) − 23 reaches −24 < 0
        let (fx, src) = ex11();
        let spec = solve_h(1.0, 5.0, 1.0, 0.0, &fx, &src).unwrap();
        let (_, xm) = curve_min(&spec, 256, &fx, &src);
        assert!(xm < -0.9);
        assert!(!is_admissible_initial(1.0, 1.0, 5.0, AdmissibilityMode::Containment, &fx, &src)
            .unwrap());
    }

    #[test]
    fn boundary_admissibility_straight_lines() {
        let (fx, src) = (burgers(), zero_src(2.0));
        assert!(is_admissible_boundary(0.0, 1.0, 1.0, &fx, &src).unwrap());
        assert!(is_admissible_boundary(0.99, 0.1, 1.0, &fx, &src).unwrap());
    }

    #[test]
    fn strict_vs_containment_line() {
        // line from (5,0) to (1,1): slope −4, stays in Q but partial integral < 0
        let fx = FluxModel::shifted_quadratic(1.0, 60.0).unwrap();
        let src = zero_src(2.0);
        assert!(!is_admissible_initial(5.0, 1.0, 1.0, AdmissibilityMode::Strict, &fx, &src)
            .unwrap());
        assert!(is_admissible_initial(5.0, 1.0, 1.0, AdmissibilityMode::Containment, &fx, &src)
            .unwrap());
    }

    #[test]
    fn rejects_degenerate_interval() {
        let (fx, src) = (burgers(), zero_src(1.0));
        assert!(solve_h(1.0, 1.0, 0.0, 1.0, &fx, &src).is_err());
        assert!(solve_h(1.0, f64::NAN, 0.0, 0.0, &fx, &src).is_err());
    }

    #[test]
    fn generic_path_agrees_with_quadratic_fast_path() {
        // same flux expressed both ways: (u−2)²/2 = u²/2 − 2u + 2
        let fq = FluxModel::shifted_quadratic(1.0, 2.0).unwrap();
        let fp = FluxModel::polynomial(vec![2.0, -2.0, 0.5]).unwrap();
        let src = SourceModel::new(AlphaSpec::Constant { value: 0.7 }, 3.0, DEFAULT_TOL_QUAD)
            .unwrap();
        for &(xh, th, xl, tl) in &[(2.0, 2.0, 0.0, 0.0), (1.0, 2.5, 3.0, 0.5), (0.5, 1.0, 0.0, 0.2)]
        {
            let a = solve_h(xh, th, xl, tl, &fq, &src).unwrap();
            let b = solve_h(xh, th, xl, tl, &fp, &src).unwrap();
            assert!((a.y0 - b.y0).abs() <= 1e-7 * (1.0 + a.y0.abs()), "{} {}", a.y0, b.y0);
            let ca = leg_cost(&fq, &src, a.y0, tl, th);
            let cb = leg_cost(&fp, &src, b.y0, tl, th);
            assert!((ca - cb).abs() <= 1e-6 * (1.0 + ca.abs()), "{ca} {cb}");
        }
    }

    #[test]
    fn curve_inf_matches_sampled_min_with_source() {
        let (fx, src) = ex11();
        for &(xh, xl) in &[(24.0, 24.0), (30.0, 10.0), (5.0, 20.0)] {
            let spec = solve_h(xh, 5.0, xl, 0.0, &fx, &src).unwrap();
            let (_, sampled) = curve_min(&spec, 1024, &fx, &src);
            let (_, exact) = curve_inf(&spec, &fx, &src);
            assert!(
                (sampled - exact).abs() <= 1e-6 * (1.0 + sampled.abs()),
                "{sampled} vs {exact}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_residual(y1 in -5.0f64..5.0, dy in 0.01f64..3.0) {
            let (fx, src) = ex11();
            let d1 = displacement(&fx, &src, y1, 0.3, 2.1);
            let d2 = displacement(&fx, &src, y1 + dy, 0.3, 2.1);
            prop_assert!(d1 < d2);
        }

        #[test]
        fn bracket_always_valid(xh in -10.0f64..30.0, xl in -10.0f64..30.0,
                                tl in 0.0f64..2.0, dt in 0.05f64..3.0) {
            let (fx, src) = ex11();
            let th = tl + dt;
            let spec = solve_h(xh, th, xl, tl, &fx, &src).unwrap();
            let s = (xh - xl) / dt;
            let c0 = fx.fprime_inverse(s).unwrap();
            let (bmin, bmax) = src.beta_range(tl, th);
            let lo = (c0 * (-bmax).exp()).min(c0 * (-bmin).exp());
            let hi = (c0 * (-bmax).exp()).max(c0 * (-bmin).exp());
            let slack = 1e-6 * (1.0 + spec.y0.abs());
            prop_assert!(spec.y0 >= lo - slack && spec.y0 <= hi + slack,
                "y0={} outside [{lo},{hi}]", spec.y0);
            // endpoint consistency
            let end = eval_curve(&spec, th, &fx, &src).unwrap();
            prop_assert!((end - xh).abs() <= 1e-7 * (1.0 + xh.abs()));
        }

        #[test]
        fn y0_continuous_in_endpoints(x in 0.5f64..5.0, d in 1e-6f64..1e-4) {
            let (fx, src) = (burgers(), zero_src(2.0));
            let a = solve_h(x, 1.0, 0.0, 0.0, &fx, &src).unwrap();
            let b = solve_h(x + d, 1.0, 0.0, 0.0, &fx, &src).unwrap();
            prop_assert!((a.y0 - b.y0).abs() <= 10.0 * d + 1e-9);
        }
    }
}
