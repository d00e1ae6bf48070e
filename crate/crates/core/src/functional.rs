//! The initial functional A(y,x,t) and boundary functional B(τ,x,t), their
//! constrained global minimizations over the admissible sets H_I and H_b,
//! and the value W(x,t) = min{A(x,t), B(x,t)}.

use serde::Serialize;

use crate::boundary::BoundaryTable;
use crate::error::{Error, Result};
use crate::hcurve::{curve_inf, eps_adm, golden_min, leg_cost, solve_h, AdmissibilityMode};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Initial,
    Boundary,
    Tie,
}

/// Outcome of one constrained 1-D minimization. The extreme minimizers are
/// the smallest/largest polished local minimizers whose value lies within
/// val_tol of the optimum; they coincide away from shocks.
#[derive(Debug, Clone, Serialize)]
pub struct MinimizationResult {
    pub value: f64,
    pub minimizer_lo: f64,
    pub minimizer_hi: f64,
    pub branch: Branch,
    /// (argument, value) of every near-optimal basin.
    pub candidates: Vec<(f64, f64)>,
}

/// A(y, x, t): h-curve cost from (y, 0) to (x, t) plus U0(y).
pub fn a_functional(y: f64, x: f64, t: f64, problem: &Problem) -> Result<f64> {
    if y < 0.0 || !(t > 0.0) {
        return Err(Error::InvalidInterval { lo: 0.0, hi: t });
    }
    let spec = solve_h(x, t, y, 0.0, &problem.flux, &problem.source)?;
    Ok(leg_cost(&problem.flux, &problem.source, spec.y0, 0.0, t) + problem.u0_integral(y))
}

/// B(τ, x, t): h-curve cost from (0, τ) to (x, t) plus the tabled W(0, τ).
pub fn b_functional(
    tau: f64,
    x: f64,
    t: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Result<f64> {
    if !(0.0 <= tau && tau < t) {
        return Err(Error::InvalidInterval { lo: tau, hi: t });
    }
    let w0 = table.w0(tau)?;
    let spec = solve_h(x, t, 0.0, tau, &problem.flux, &problem.source)?;
    Ok(leg_cost(&problem.flux, &problem.source, spec.y0, tau, t) + w0)
}

// --- scan + polish global minimization -----------------------------------------

pub(crate) struct ScanOutcome {
    pub value: f64,
    pub arg_lo: f64,
    pub arg_hi: f64,
    pub candidates: Vec<(f64, f64)>,
    pub edge_hi: bool,
}

/// Uniform scan over [lo, hi] with golden-section polish in each near-optimal
/// basin. `f` returns None where the argument is inadmissible.
pub(crate) fn scan_minimize<F: Fn(f64) -> Option<f64>>(
    lo: f64,
    hi: f64,
    n: usize,
    val_tol_rel: f64,
    f: F,
) -> Option<ScanOutcome> {
    let n = n.max(8);
    let h = (hi - lo) / n as f64;
    if !(h > 0.0) {
        return f(lo).map(|v| ScanOutcome {
            value: v,
            arg_lo: lo,
            arg_hi: lo,
            candidates: vec![(lo, v)],
            edge_hi: false,
        });
    }
    let args: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
    let vals: Vec<Option<f64>> = args.iter().map(|&a| f(a).filter(|v| v.is_finite())).collect();
    let finite = |i: usize| vals[i].unwrap_or(f64::INFINITY);

    let mut node_best = f64::INFINITY;
    for i in 0..=n {
        node_best = node_best.min(finite(i));
    }
    if !node_best.is_finite() {
        return None;
    }

    // local minima in node resolution, best first
    let mut locals: Vec<usize> = (0..=n)
        .filter(|&i| {
            let v = finite(i);
            v.is_finite()
                && (i == 0 || v <= finite(i - 1))
                && (i == n || v <= finite(i + 1))
        })
        .collect();
    locals.sort_by(|&a, &b| finite(a).partial_cmp(&finite(b)).unwrap());
    locals.truncate(24);

    let g = |x: f64| f(x).filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);
    let mut polished: Vec<(f64, f64)> = Vec::new();
    for &i in &locals {
        let a = if i == 0 { args[0] } else { args[i - 1] };
        let b = if i == n { args[n] } else { args[i + 1] };
        let (mut xa, mut va) = golden_min(a, b, g);
        if finite(i) < va {
            xa = args[i];
            va = finite(i);
        }
        polished.push((xa, va));
    }
    let value = polished
        .iter()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    let band = val_tol_rel * (1.0 + value.abs());
    let mut candidates: Vec<(f64, f64)> = polished
        .into_iter()
        .filter(|p| p.1 <= value + band)
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    candidates.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-9 * (1.0 + b.0.abs()));
    let arg_lo = candidates.first().map(|c| c.0).unwrap();
    let arg_hi = candidates.last().map(|c| c.0).unwrap();
    let edge_hi = arg_hi >= hi - 1.5 * h;
    Some(ScanOutcome {
        value,
        arg_lo,
        arg_hi,
        candidates,
        edge_hi,
    })
}

fn a_eval(y: f64, x: f64, t: f64, problem: &Problem, mode: AdmissibilityMode) -> Option<f64> {
    if y < 0.0 {
        return None;
    }
    let spec = solve_h(x, t, y, 0.0, &problem.flux, &problem.source).ok()?;
    let floor = match mode {
        AdmissibilityMode::Containment => -eps_adm(x),
        AdmissibilityMode::Strict => y - eps_adm(x),
    };
    if curve_inf(&spec, &problem.flux, &problem.source).1 < floor {
        return None;
    }
    Some(leg_cost(&problem.flux, &problem.source, spec.y0, 0.0, t) + problem.u0_integral(y))
}

/// Global minimization of A(·, x, t) over H_I ∩ [0, y_search_max], widening
/// the window when the argmin lands on its edge.
pub fn minimize_a(x: f64, t: f64, problem: &Problem) -> Result<MinimizationResult> {
    let mode = problem.tol.admissibility;
    let mut factor = 1.0;
    for _ in 0..5 {
        let ymax = (problem.y_search_max(x, t) * factor).max(1e-6);
        let out = scan_minimize(0.0, ymax, problem.tol.scan_cells, problem.tol.val_tol_rel, |y| {
            a_eval(y, x, t, problem, mode)
        });
        match out {
            None => {
                return Err(Error::EmptyAdmissible {
                    functional: "initial",
                    x,
                    t,
                })
            }
            Some(o) if o.edge_hi && factor < 8.0 => {
                factor *= 2.0;
                continue;
            }
            Some(o) => {
                return Ok(MinimizationResult {
                    value: o.value,
                    minimizer_lo: o.arg_lo,
                    minimizer_hi: o.arg_hi,
                    branch: Branch::Initial,
                    candidates: o.candidates,
                })
            }
        }
    }
    Err(Error::EmptyAdmissible {
        functional: "initial",
        x,
        t,
    })
}

fn b_eval(tau: f64, x: f64, t: f64, problem: &Problem, table: &BoundaryTable) -> Option<f64> {
    if !(0.0 <= tau && tau < t) {
        return None;
    }
    let w0 = table.w0(tau).ok()?;
    let spec = solve_h(x, t, 0.0, tau, &problem.flux, &problem.source).ok()?;
    if curve_inf(&spec, &problem.flux, &problem.source).1 < -eps_adm(x) {
        return None;
    }
    Some(leg_cost(&problem.flux, &problem.source, spec.y0, tau, t) + w0)
}

pub(crate) fn minimize_b_window(
    x: f64,
    t: f64,
    tau_lo: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Result<MinimizationResult> {
    let hi = t * (1.0 - 1e-9) - 1e-15;
    if hi <= tau_lo {
        return Err(Error::EmptyAdmissible {
            functional: "boundary",
            x,
            t,
        });
    }
    let out = scan_minimize(tau_lo, hi, problem.tol.scan_cells, problem.tol.val_tol_rel, |tau| {
        b_eval(tau, x, t, problem, table)
    })
    .ok_or(Error::EmptyAdmissible {
        functional: "boundary",
        x,
        t,
    })?;
    Ok(MinimizationResult {
        value: out.value,
        minimizer_lo: out.arg_lo,
        minimizer_hi: out.arg_hi,
        branch: Branch::Boundary,
        candidates: out.candidates,
    })
}

/// Global minimization of B(·, x, t) over H_b ∩ [0, t).
pub fn minimize_b(
    x: f64,
    t: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Result<MinimizationResult> {
    minimize_b_window(x, t, 0.0, problem, table)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueResult {
    pub w: f64,
    pub branch: Branch,
    pub initial: Option<MinimizationResult>,
    pub boundary: Option<MinimizationResult>,
}

/// W(x,t) = min{A(x,t), B(x,t)}; ties within val_tol report Branch::Tie with
/// both minimizer families.
pub fn value(x: f64, t: f64, problem: &Problem, table: &BoundaryTable) -> Result<ValueResult> {
    let a = match minimize_a(x, t, problem) {
        Ok(r) => Some(r),
        Err(Error::EmptyAdmissible { .. }) => None,
        Err(e) => return Err(e),
    };
    let b = match minimize_b(x, t, problem, table) {
        Ok(r) => Some(r),
        Err(Error::EmptyAdmissible { .. }) => None,
        Err(e) => return Err(e),
    };
    match (&a, &b) {
        (Some(ra), Some(rb)) => {
            let w = ra.value.min(rb.value);
            let branch = if (ra.value - rb.value).abs() <= problem.tol.val_tol(w) {
                Branch::Tie
            } else if ra.value < rb.value {
                Branch::Initial
            } else {
                Branch::Boundary
            };
            Ok(ValueResult {
                w,
                branch,
                initial: a,
                boundary: b,
            })
        }
        (Some(ra), None) => Ok(ValueResult {
            w: ra.value,
            branch: Branch::Initial,
            initial: a,
            boundary: None,
        }),
        (None, Some(rb)) => Ok(ValueResult {
            w: rb.value,
            branch: Branch::Boundary,
            initial: None,
            boundary: b,
        }),
        (None, None) => Err(Error::Infeasible { x, t }),
    }
}

/// |W(x,t) − W(x,t,s)|: the dynamic-programming defect across intermediate
/// level s. A minimizing path on [s,t] either stays off the axis (one
/// admissible h-leg from some (z,s)) or touches it last at τ ∈ [s,t) (a
/// boundary leg priced by the table).
pub fn dpp_residual(
    x: f64,
    t: f64,
    s: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Result<f64> {
    if !(0.0 < s && s < t) {
        return Err(Error::InvalidInterval { lo: s, hi: t });
    }
    let w_full = value(x, t, problem, table)?.w;

    let z_max = x + (t - s) * problem.speed_bound() + 1.0;
    let n = (problem.tol.scan_cells / 8).max(96);
    let direct = scan_minimize(0.0, z_max, n, problem.tol.val_tol_rel, |z| {
        let spec = solve_h(x, t, z, s, &problem.flux, &problem.source).ok()?;
        if curve_inf(&spec, &problem.flux, &problem.source).1 < -eps_adm(x) {
            return None;
        }
        let wz = value(z, s, problem, table).ok()?.w;
        Some(wz + leg_cost(&problem.flux, &problem.source, spec.y0, s, t))
    })
    .map(|o| o.value);

    let through_boundary = minimize_b_window(x, t, s, problem, table).ok().map(|r| r.value);

    let w_dp = match (direct, through_boundary) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::Infeasible { x, t }),
    };
    Ok((w_full - w_dp).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryTable;
    use crate::problem::preset;
    use approx::assert_relative_eq;

    fn zero_table(p: &Problem) -> BoundaryTable {
        BoundaryTable::from_fn(p.t_max, 257, |_| 0.0)
    }

    #[test]
    fn classical_lax_functional() {
        // α≡0, Burgers, u0≡0: A(y,x,t) = (x−y)²/(2t)
        let p = preset("zero").unwrap();
        for &(y, x, t) in &[(0.0, 1.0, 1.0), (0.5, 2.0, 0.7), (2.0, 0.3, 1.3)] {
            let a = a_functional(y, x, t, &p).unwrap();
            assert_relative_eq!(a, (x - y) * (x - y) / (2.0 * t), epsilon = 1e-9);
        }
        assert_relative_eq!(a_functional(1.0, 1.0, 1.0, &p).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn amplified_initial_functional() {
        // α≡1, Burgers, u0≡0, x=1, t=1, y=0 → 1/(2(e−1))
        let p = {
            let mut p = preset("amplified-constant").unwrap();
            p.u0 = crate::piecewise::PiecewisePoly::constant(0.0);
            p
        };
        let a = a_functional(0.0, 1.0, 1.0, &p).unwrap();
        assert_relative_eq!(a, 0.5 / (std::f64::consts::E - 1.0), epsilon = 1e-8);
    }

    #[test]
    fn boundary_functional_slope_one() {
        let p = preset("burgers-boundary").unwrap();
        let table = zero_table(&p);
        // slope-1 leg with zero boundary table: t·f*(1) = 0.5
        assert_relative_eq!(
            b_functional(0.0, 1.0, 1.0, &p, &table).unwrap(),
            0.5,
            epsilon = 1e-9
        );
        // steep-segment blow-up as τ → t: monotone growth near t
        let mut prev = b_functional(0.9, 1.0, 1.0, &p, &table).unwrap();
        for k in 1..6 {
            let tau = 1.0 - 0.1 / (2f64.powi(k));
            let v = b_functional(tau, 1.0, 1.0, &p, &table).unwrap();
            assert!(v > prev, "B should grow as τ → t: {v} vs {prev}");
            prev = v;
        }
    }

    #[test]
    fn boundary_functional_composed_with_ramp_table() {
        // table W(0,τ) = −τ/2 (boundary-follow of ū_b ≡ 1)
        let p = preset("burgers-boundary").unwrap();
        let table = BoundaryTable::from_fn(p.t_max, 1025, |t| -0.5 * t);
        let b = b_functional(0.5, 0.25, 1.0, &p, &table).unwrap();
        assert_relative_eq!(b, -0.1875, epsilon = 1e-9);
    }

    #[test]
    fn minimize_a_take_y_equals_x() {
        let p = preset("zero").unwrap();
        let r = minimize_a(1.0, 1.0, &p).unwrap();
        assert!(r.value.abs() < 1e-10);
        assert!((r.minimizer_lo - 1.0).abs() < 1e-5);
        assert!((r.minimizer_hi - 1.0).abs() < 1e-5);
    }

    #[test]
    fn minimize_a_with_linear_u0() {
        // u0 ≡ 1 → U0(y) = y: min over y of (2−y)²/2 + y at y=1, value 1.5
        let mut p = preset("zero").unwrap();
        p.u0 = crate::piecewise::PiecewisePoly::constant(1.0);
        p.x_max = 4.0;
        let r = minimize_a(2.0, 1.0, &p).unwrap();
        assert_relative_eq!(r.value, 1.5, epsilon = 1e-7);
        assert!((r.minimizer_lo - 1.0).abs() < 1e-4, "y* = {}", r.minimizer_lo);
    }

    #[test]
    fn minimize_a_riemann_two_basins_at_shock() {
        // u0 = 2 on [0,1), 0 after; shock abscissa at t=0.4 is x = 1.4
        let mut p = preset("zero").unwrap();
        p.u0 = crate::piecewise::PiecewisePoly::steps(&[(0.0, 2.0), (1.0, 0.0)]).unwrap();
        p.x_max = 4.0;

        // brute-force oracle at x = 1.4
        let x = 1.4;
        let t = 0.4;
        let mut oracle = f64::INFINITY;
        let mut y = 0.0;
        while y <= 3.0 {
            let v = (x - y) * (x - y) / (2.0 * t) + p.u0_integral(y);
            oracle = oracle.min(v);
            y += 1e-4;
        }
        let r = minimize_a(x, t, &p).unwrap();
        assert!((r.value - oracle).abs() < 1e-6, "{} vs {oracle}", r.value);
        assert!((r.value - 2.0).abs() < 1e-7);
        // two extreme minimizers y_* = 0.6, y^* = 1.4
        assert!((r.minimizer_lo - 0.6).abs() < 1e-4, "y_* = {}", r.minimizer_lo);
        assert!((r.minimizer_hi - 1.4).abs() < 1e-4, "y^* = {}", r.minimizer_hi);
        // away from the shock the minimizer is unique
        let r2 = minimize_a(2.0, t, &p).unwrap();
        assert!((r2.minimizer_hi - r2.minimizer_lo).abs() < 1e-5);
        assert_relative_eq!(r2.value, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn minimize_b_interior_optimum() {
        let p = preset("burgers-boundary").unwrap();
        let table = BoundaryTable::from_fn(p.t_max, 1025, |t| -0.5 * t);
        let r = minimize_b(0.25, 1.0, &p, &table).unwrap();
        // closed form: B(τ) = x²/(2(t−τ)) − τ/2, optimum τ* = t−x = 0.75, value −0.25
        assert_relative_eq!(r.value, -0.25, epsilon = 1e-7);
        assert!((r.minimizer_hi - 0.75).abs() < 1e-4, "τ* = {}", r.minimizer_hi);
        assert!(r.value <= -0.1875);
    }

    #[test]
    fn minimize_b_never_beats_a_for_sonic_datum() {
        // ū_b ≡ 0 = λ_f and u0 ≡ 0: B ≥ 0 = A
        let p = preset("zero").unwrap();
        let table = zero_table(&p);
        let rb = minimize_b(0.5, 1.0, &p, &table).unwrap();
        let ra = minimize_a(0.5, 1.0, &p).unwrap();
        assert!(rb.value >= -1e-9);
        assert!(ra.value.abs() < 1e-10);
    }

    #[test]
    fn value_zero_preset() {
        let p = preset("zero").unwrap();
        let table = zero_table(&p);
        for &(x, t) in &[(0.3, 0.5), (1.0, 1.0), (1.7, 0.2)] {
            let v = value(x, t, &p, &table).unwrap();
            assert!(v.w.abs() < 1e-9, "W({x},{t}) = {}", v.w);
        }
    }

    #[test]
    fn value_far_field_initial_branch() {
        // derived: with ū_b≡1, u0≡0, far from the boundary influence A wins
        // with W = 0 at y* = x (double-checked via W(0,t) + ∫u dx = 0)
        let p = preset("burgers-boundary").unwrap();
        let table = BoundaryTable::from_fn(p.t_max, 1025, |t| -0.5 * t);
        let v = value(2.0, 1.0, &p, &table).unwrap();
        assert_eq!(v.branch, Branch::Initial);
        assert!(v.w.abs() < 1e-8, "W = {}", v.w);
        let b = v.boundary.unwrap();
        assert!(b.value > v.w + 1e-3);
        // near the axis the boundary branch dominates
        let v0 = value(0.05, 1.0, &p, &table).unwrap();
        assert_eq!(v0.branch, Branch::Boundary);
        assert!(v0.w < 0.0);
    }

    #[test]
    fn alternative_form_identity() {
        // A(y,x,t) = U0(y) − ∫ₓʸ h(x−z,t)dz − ∫₀ᵗ e^{−β} f(h(0,t)e^β) dθ
        use crate::hcurve::solve_h;
        use crate::source::integrate;
        for (name, pts) in [
            ("amplified-constant", vec![(0.5, 1.7, 1.2), (2.0, 0.8, 0.9)]),
            ("example-1-1", vec![(5.0, 20.0, 2.0), (12.0, 8.0, 3.5)]),
        ] {
            let p = preset(name).unwrap();
            for &(y, x, t) in &pts {
                let lhs = a_functional(y, x, t, &p).unwrap();
                let hz = |z: f64| {
                    solve_h(x, t, z, 0.0, &p.flux, &p.source)
                        .map(|s| s.y0)
                        .unwrap_or(f64::NAN)
                };
                let int_h = integrate(hz, x.min(y), x.max(y), 1e-9).unwrap()
                    * if y >= x { 1.0 } else { -1.0 };
                let y00 = solve_h(x, t, x, 0.0, &p.flux, &p.source).unwrap().y0;
                let int_f = integrate(
                    |th| {
                        let b = p.source.beta_raw(th);
                        (-b).exp() * p.flux.f(y00 * b.exp())
                    },
                    0.0,
                    t,
                    1e-9,
                )
                .unwrap();
                let rhs = p.u0_integral(y) - int_h - int_f;
                assert!(
                    (lhs - rhs).abs() <= 1e-5 * (1.0 + lhs.abs()),
                    "{name} ({y},{x},{t}): {lhs} vs {rhs}"
                );
            }
        }
    }
}
