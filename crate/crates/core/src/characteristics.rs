//! Generalized characteristics: case-resolved speeds (classical where the
//! minimizer is unique, Rankine–Hugoniot across shocks), forward tracing,
//! characteristic triangles, and the Lax entropy check.

use serde::Serialize;

use crate::boundary::BoundaryTable;
use crate::error::{Error, Result};
use crate::functional::{value, Branch};
use crate::hcurve::solve_h;
use crate::problem::Problem;
use crate::solver::SolutionField;

fn rh_ratio(problem: &Problem, ul: f64, ur: f64) -> f64 {
    if (ul - ur).abs() <= 1e-9 * (1.0 + ul.abs().max(ur.abs())) {
        problem.flux.fprime(0.5 * (ul + ur))
    } else {
        (problem.flux.f(ul) - problem.flux.f(ur)) / (ul - ur)
    }
}

/// Case-resolved characteristic speed at (x, t).
pub fn char_speed(x: f64, t: f64, problem: &Problem, table: &BoundaryTable) -> Result<f64> {
    let v = value(x, t, problem, table)?;
    let amp = problem.source.beta_raw(t).exp();
    let h_init = |y: f64| -> Result<f64> {
        Ok(solve_h(x, t, y, 0.0, &problem.flux, &problem.source)?.y0)
    };
    let h_bdry = |tau: f64| -> Result<f64> {
        Ok(solve_h(x, t, 0.0, tau, &problem.flux, &problem.source)?.y0)
    };
    match v.branch {
        Branch::Initial => {
            let r = v.initial.as_ref().unwrap();
            if (r.minimizer_hi - r.minimizer_lo).abs() <= problem.tol.arg_tol(x) {
                Ok(problem.flux.fprime(amp * h_init(r.minimizer_hi)?))
            } else {
                let ul = amp * h_init(r.minimizer_lo)?;
                let ur = amp * h_init(r.minimizer_hi)?;
                Ok(rh_ratio(problem, ul, ur))
            }
        }
        Branch::Boundary => {
            let r = v.boundary.as_ref().unwrap();
            if (r.minimizer_hi - r.minimizer_lo).abs() <= problem.tol.arg_tol(t) {
                Ok(problem.flux.fprime(amp * h_bdry(r.minimizer_hi)?))
            } else {
                let ul = amp * h_bdry(r.minimizer_hi)?;
                let ur = amp * h_bdry(r.minimizer_lo)?;
                Ok(rh_ratio(problem, ul, ur))
            }
        }
        Branch::Tie => {
            let ra = v.initial.as_ref().unwrap();
            let rb = v.boundary.as_ref().unwrap();
            let y_hi = ra.minimizer_hi;
            let tau_hi = rb.minimizer_hi;
            if y_hi.abs() <= problem.tol.arg_tol(x) && tau_hi.abs() <= problem.tol.arg_tol(t) {
                // both families collapse to the origin: the fan speed
                let h = solve_h(x, t, 0.0, 0.0, &problem.flux, &problem.source)?.y0;
                Ok(problem.flux.fprime(amp * h))
            } else {
                let ua = amp * h_init(y_hi)?;
                let ub = amp * h_bdry(tau_hi)?;
                Ok(rh_ratio(problem, ub, ua))
            }
        }
    }
}

/// Whether the extreme minimizers at (x, t) are separated (a shock point).
fn minimizers_distinct(x: f64, t: f64, problem: &Problem, table: &BoundaryTable) -> bool {
    match value(x, t, problem, table) {
        Ok(v) => match v.branch {
            Branch::Initial => v
                .initial
                .map(|r| (r.minimizer_hi - r.minimizer_lo).abs() > problem.tol.arg_tol(x))
                .unwrap_or(false),
            Branch::Boundary => v
                .boundary
                .map(|r| (r.minimizer_hi - r.minimizer_lo).abs() > problem.tol.arg_tol(t))
                .unwrap_or(false),
            Branch::Tie => true,
        },
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicCurve {
    /// (t, x) polyline.
    pub points: Vec<(f64, f64)>,
    pub speeds: Vec<f64>,
    /// Set when the curve was clipped at the axis.
    pub clipped: bool,
    /// Non-fatal notes (partial traces, shock locking events).
    pub flags: Vec<String>,
}

/// Trace the generalized characteristic through (x0, t0) forward to t1 by
/// explicit Euler on the case-resolved speed. When distinct minimizers
/// persist, the tracer re-locates the jump after each step so it does not
/// drift off the shock.
pub fn trace(
    x0: f64,
    t0: f64,
    t1: f64,
    dt: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Result<CharacteristicCurve> {
    if !(t0 < t1) || !(dt > 0.0) {
        return Err(Error::InvalidInterval { lo: t0, hi: t1 });
    }
    let mut points = vec![(t0, x0)];
    let mut speeds = Vec::new();
    let mut flags = Vec::new();
    let mut clipped = false;
    let mut x = x0;
    let mut t = t0;
    let mut shock_streak = 0usize;
    while t < t1 - 1e-14 {
        let step = dt.min(t1 - t);
        let s = match char_speed(x, t, problem, table) {
            Ok(s) => s,
            Err(e) => {
                flags.push(format!("speed failure at t={t}: {e}; partial trace"));
                break;
            }
        };
        let distinct = minimizers_distinct(x, t, problem, table);
        shock_streak = if distinct { shock_streak + 1 } else { 0 };
        let mut xn = x + step * s;
        let tn = t + step;
        if xn < 0.0 {
            xn = 0.0;
            if !clipped {
                flags.push(format!("clipped at the axis near t={tn}"));
            }
            clipped = true;
        }
        if shock_streak >= 2 {
            if let Some(xj) = locate_jump_near(xn, tn, 4.0 * step * (1.0 + s.abs()), problem, table)
            {
                if shock_streak == 2 {
                    flags.push(format!("shock-locked from t={tn}"));
                }
                xn = xj;
            }
        }
        points.push((tn, xn));
        speeds.push(s);
        x = xn;
        t = tn;
    }
    Ok(CharacteristicCurve {
        points,
        speeds,
        clipped,
        flags,
    })
}

/// Find a u-discontinuity within [x−w, x+w] at time t, if any.
fn locate_jump_near(
    x: f64,
    t: f64,
    w: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Option<f64> {
    let u_at = |x: f64| {
        crate::solver::solve_point(x.max(0.0), t, problem, table)
            .ok()
            .map(|s| s.u)
    };
    let (mut lo, mut hi) = ((x - w).max(1e-12), x + w);
    let (mut ulo, mut uhi) = (u_at(lo)?, u_at(hi)?);
    let scale = 1.0 + ulo.abs().max(uhi.abs());
    if (ulo - uhi).abs() < 1e-4 * scale {
        return None;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let um = u_at(mid)?;
        if (um - ulo).abs() <= (um - uhi).abs() {
            lo = mid;
            ulo = um;
        } else {
            hi = mid;
            uhi = um;
        }
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleCase {
    Initial,
    Boundary,
    Mixed,
}

/// Characteristic triangle at an apex: the region between the extreme
/// minimizing curves. Polylines are sampled on a common time grid over
/// [0, t]; boundary-anchored curves are extended by x = 0 below their
/// departure time, so the section at any θ is [left(θ), right(θ)].
#[derive(Debug, Clone, Serialize)]
pub struct CharTriangle {
    pub apex: (f64, f64),
    pub case: TriangleCase,
    pub left: Vec<(f64, f64)>,
    pub right: Vec<(f64, f64)>,
}

impl CharTriangle {
    /// Section [left, right] at time θ by linear interpolation of the
    /// sampled polylines.
    pub fn section(&self, theta: f64) -> Option<(f64, f64)> {
        let t = self.apex.1;
        if theta < 0.0 || theta > t {
            return None;
        }
        let interp = |pts: &[(f64, f64)]| -> f64 {
            let n = pts.len() - 1;
            let pos = theta / t * n as f64;
            let i = (pos as usize).min(n - 1);
            let w = pos - i as f64;
            pts[i].1 * (1.0 - w) + pts[i + 1].1 * w
        };
        Some((interp(&self.left), interp(&self.right)))
    }
}

const TRIANGLE_SAMPLES: usize = 64;

fn sample_initial_curve(
    problem: &Problem,
    x: f64,
    t: f64,
    y: f64,
    k: usize,
) -> Result<Vec<(f64, f64)>> {
    let spec = solve_h(x, t, y, 0.0, &problem.flux, &problem.source)?;
    Ok((0..=k)
        .map(|i| {
            let th = t * i as f64 / k as f64;
            let xv = y + crate::hcurve::displacement(&problem.flux, &problem.source, spec.y0, 0.0, th);
            (th, xv)
        })
        .collect())
}

fn sample_boundary_curve(
    problem: &Problem,
    x: f64,
    t: f64,
    tau: f64,
    k: usize,
) -> Result<Vec<(f64, f64)>> {
    let spec = solve_h(x, t, 0.0, tau, &problem.flux, &problem.source)?;
    Ok((0..=k)
        .map(|i| {
            let th = t * i as f64 / k as f64;
            let xv = if th <= tau {
                0.0
            } else {
                crate::hcurve::displacement(&problem.flux, &problem.source, spec.y0, tau, th)
            };
            (th, xv)
        })
        .collect())
}

/// Assemble the characteristic triangle at (x, t) from the extreme
/// minimizers (degenerate away from shocks).
pub fn build_triangle(
    x: f64,
    t: f64,
    problem: &Problem,
    table: &BoundaryTable,
) -> Result<CharTriangle> {
    let v = value(x, t, problem, table)?;
    let k = TRIANGLE_SAMPLES;
    match v.branch {
        Branch::Initial => {
            let r = v.initial.as_ref().unwrap();
            Ok(CharTriangle {
                apex: (x, t),
                case: TriangleCase::Initial,
                left: sample_initial_curve(problem, x, t, r.minimizer_lo, k)?,
                right: sample_initial_curve(problem, x, t, r.minimizer_hi, k)?,
            })
        }
        Branch::Boundary => {
            let r = v.boundary.as_ref().unwrap();
            // the later departure bounds the triangle on the left
            Ok(CharTriangle {
                apex: (x, t),
                case: TriangleCase::Boundary,
                left: sample_boundary_curve(problem, x, t, r.minimizer_hi, k)?,
                right: sample_boundary_curve(problem, x, t, r.minimizer_lo, k)?,
            })
        }
        Branch::Tie => {
            let ra = v.initial.as_ref().unwrap();
            let rb = v.boundary.as_ref().unwrap();
            Ok(CharTriangle {
                apex: (x, t),
                case: TriangleCase::Mixed,
                left: sample_boundary_curve(problem, x, t, rb.minimizer_hi, k)?,
                right: sample_initial_curve(problem, x, t, ra.minimizer_hi, k)?,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TriangleReport {
    pub t0: f64,
    pub apexes: usize,
    pub disjoint_ok: bool,
    pub covering_ok: bool,
    pub worst_overlap: f64,
    pub worst_gap: f64,
    pub geo_tol: f64,
    pub failures: Vec<String>,
}

impl TriangleReport {
    pub fn pass(&self) -> bool {
        self.disjoint_ok && self.covering_ok
    }
}

/// Same-level triangles must be interior-disjoint and their union must cover
/// the strip 0 ≤ t ≤ t0 up to the geometric tolerance.
pub fn check_triangle_lemma(
    problem: &Problem,
    table: &BoundaryTable,
    t0: f64,
    xs: &[f64],
    geo_tol: f64,
) -> Result<TriangleReport> {
    let mut tris = Vec::with_capacity(xs.len());
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &x in &sorted {
        tris.push(build_triangle(x, t0, problem, table)?);
    }
    let mut failures = Vec::new();
    let mut worst_overlap = 0.0f64;
    let levels = 32usize;

    for i in 0..tris.len() {
        for j in i + 1..tris.len() {
            for l in 0..=levels {
                let th = t0 * l as f64 / levels as f64;
                let (Some((_, ri)), Some((lj, _))) = (tris[i].section(th), tris[j].section(th))
                else {
                    continue;
                };
                let overlap = ri - lj;
                if overlap > geo_tol {
                    worst_overlap = worst_overlap.max(overlap);
                    if failures.len() < 8 {
                        failures.push(format!(
                            "triangles at x={:.4} and x={:.4} overlap by {overlap:.3e} at θ={th:.4}",
                            tris[i].apex.0, tris[j].apex.0
                        ));
                    }
                }
            }
        }
    }
    let disjoint_ok = worst_overlap <= geo_tol;

    let mut worst_gap = 0.0f64;
    let x_hi = *sorted.last().unwrap();
    let nx = 48usize;
    let nt = 16usize;
    for a in 0..=nx {
        let xp = x_hi * a as f64 / nx as f64;
        for b in 1..=nt {
            let th = t0 * b as f64 / nt as f64;
            let mut dist = f64::INFINITY;
            for tri in &tris {
                if let Some((l, r)) = tri.section(th) {
                    let d = if xp < l {
                        l - xp
                    } else if xp > r {
                        xp - r
                    } else {
                        0.0
                    };
                    dist = dist.min(d);
                }
            }
            if dist > worst_gap {
                worst_gap = dist;
                if dist > geo_tol && failures.len() < 16 {
                    failures.push(format!("point ({xp:.4}, {th:.4}) uncovered by {dist:.3e}"));
                }
            }
        }
    }
    let covering_ok = worst_gap <= geo_tol;

    Ok(TriangleReport {
        t0,
        apexes: tris.len(),
        disjoint_ok,
        covering_ok,
        worst_overlap,
        worst_gap,
        geo_tol,
        failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyViolation {
    pub t: f64,
    pub x: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub speed: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub jumps_checked: usize,
    pub violations: Vec<EntropyViolation>,
}

impl EntropyReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lax admissibility at every detected jump: f'(u_left) > speed > f'(u_right)
/// with margin ≥ −entropy_tol, the speed being the Rankine–Hugoniot ratio.
pub fn entropy_check(field: &SolutionField, problem: &Problem) -> EntropyReport {
    let tol = problem.tol.entropy_tol;
    let mut violations = Vec::new();
    let mut checked = 0;
    for j in &field.jumps {
        let scale = 1.0 + j.u_left.abs().max(j.u_right.abs());
        if (j.u_left - j.u_right).abs() <= 1e-6 * scale {
            continue;
        }
        checked += 1;
        let speed = rh_ratio(problem, j.u_left, j.u_right);
        let m_left = problem.flux.fprime(j.u_left) - speed;
        let m_right = speed - problem.flux.fprime(j.u_right);
        let margin = m_left.min(m_right);
        if margin < -tol {
            violations.push(EntropyViolation {
                t: j.t,
                x: j.x,
                u_left: j.u_left,
                u_right: j.u_right,
                speed,
                margin,
            });
        }
    }
    EntropyReport {
        jumps_checked: checked,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::build_table;
    use crate::piecewise::PiecewisePoly;
    use crate::problem::{preset, UbSpec};
    use crate::solver::{solve_grid, Jump};

    #[test]
    fn classical_speed_in_smooth_regions() {
        let p = preset("burgers-boundary").unwrap();
        let tb = build_table(&p, 256).unwrap();
        // u = 1 left of the shock: speed f'(1) = 1
        let s = char_speed(0.2, 1.0, &p, &tb).unwrap();
        assert!((s - 1.0).abs() < 1e-3, "speed {s}");
        // u = 0 right of it: speed 0
        let s = char_speed(0.9, 1.0, &p, &tb).unwrap();
        assert!(s.abs() < 1e-3, "speed {s}");
    }

    #[test]
    fn rankine_hugoniot_at_the_shock() {
        let p = preset("burgers-riemann").unwrap();
        let tb = build_table(&p, 256).unwrap();
        // initial-branch shock at x = 1.5, t = 1: speed (f(1)−f(0))/1 = 1/2
        let s = char_speed(1.5, 1.0, &p, &tb).unwrap();
        assert!((s - 0.5).abs() < 1e-3, "speed {s}");
        // mixed tie at x = t/2 for the boundary dam-break
        let q = preset("burgers-boundary").unwrap();
        let tq = build_table(&q, 256).unwrap();
        let s = char_speed(0.5, 1.0, &q, &tq).unwrap();
        assert!((s - 0.5).abs() < 1e-3, "speed {s}");
    }

    #[test]
    fn origin_fan_speed() {
        // u0 ≡ 2, ū_b ≡ 0: rarefaction from the origin, u = x/t inside the fan,
        // both extreme minimizers collapse to the origin
        let mut p = preset("zero").unwrap();
        p.u0 = PiecewisePoly::constant(2.0);
        p.ub = UbSpec::Data {
            data: PiecewisePoly::constant(0.0),
        };
        p.x_max = 4.0;
        let tb = build_table(&p, 256).unwrap();
        for &x in &[0.5, 1.0, 1.5] {
            let s = char_speed(x, 1.0, &p, &tb).unwrap();
            assert!((s - x).abs() < 1e-3, "fan speed at {x}: {s}");
        }
    }

    #[test]
    fn trace_constant_and_amplified() {
        let p = preset("zero").unwrap();
        let tb = build_table(&p, 64).unwrap();
        let c = trace(0.5, 0.2, 1.0, 1.0 / 128.0, &p, &tb).unwrap();
        for &(_, x) in &c.points {
            assert!((x - 0.5).abs() < 1e-9);
        }
        // u = e^θ region: X(t) = x0 + e^t − e^{t0}
        let p = preset("amplified-constant").unwrap();
        let tb = build_table(&p, 256).unwrap();
        let c = trace(3.0, 0.2, 1.0, 1.0 / 256.0, &p, &tb).unwrap();
        let (tend, xend) = *c.points.last().unwrap();
        let expect = 3.0 + tend.exp() - 0.2f64.exp();
        assert!((xend - expect).abs() < 0.02, "{xend} vs {expect}");
    }

    #[test]
    fn trace_locks_onto_shock() {
        let p = preset("burgers-boundary").unwrap();
        let tb = build_table(&p, 512).unwrap();
        let c = trace(0.2, 0.4, 1.0, 1.0 / 128.0, &p, &tb).unwrap();
        let (tend, xend) = *c.points.last().unwrap();
        assert!((xend - tend / 2.0).abs() < 0.02, "x({tend}) = {xend}");
    }

    #[test]
    fn triangle_cases() {
        // degenerate initial triangle away from shocks
        let p = preset("burgers-riemann").unwrap();
        let tb = build_table(&p, 256).unwrap();
        let tri = build_triangle(3.0, 1.0, &p, &tb).unwrap();
        assert_eq!(tri.case, TriangleCase::Initial);
        let (l, r) = tri.section(0.0).unwrap();
        assert!((l - r).abs() < 1e-4);
        // shock apex: base [y_*, y^*] = [0.5, 1.5] on the x-axis
        let tri = build_triangle(1.5, 1.0, &p, &tb).unwrap();
        let (l, r) = tri.section(0.0).unwrap();
        assert!((l - 0.5).abs() < 1e-3, "base left {l}");
        assert!((r - 1.5).abs() < 1e-3, "base right {r}");
        // boundary-anchored triangle for the dam-break left state
        let q = preset("burgers-boundary").unwrap();
        let tq = build_table(&q, 256).unwrap();
        let tri = build_triangle(0.2, 1.0, &q, &tq).unwrap();
        assert_eq!(tri.case, TriangleCase::Boundary);
        let (l, _) = tri.section(0.2).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn triangles_nest_along_a_shock() {
        let p = preset("burgers-boundary").unwrap();
        let tb = build_table(&p, 256).unwrap();
        let t1 = build_triangle(0.3, 0.6, &p, &tb).unwrap();
        let t2 = build_triangle(0.5, 1.0, &p, &tb).unwrap();
        for l in 0..=16 {
            let th = 0.6 * l as f64 / 16.0;
            let (l1, r1) = t1.section(th).unwrap();
            let (l2, r2) = t2.section(th).unwrap();
            assert!(l2 <= l1 + 1e-6 && r1 <= r2 + 1e-6, "θ={th}");
        }
    }

    #[test]
    fn triangle_lemma_on_riemann() {
        let p = preset("burgers-riemann").unwrap();
        let tb = build_table(&p, 256).unwrap();
        let xs: Vec<f64> = (1..=48).map(|i| 4.0 * i as f64 / 48.0 - 0.01).collect();
        let geo_tol = 2.0 * (4.0 / 48.0);
        let rep = check_triangle_lemma(&p, &tb, 1.0, &xs, geo_tol).unwrap();
        assert!(rep.pass(), "{:?}", rep.failures);
        // negative control: swap a pair of section polylines
        let mut tri_a = build_triangle(2.8, 1.0, &p, &tb).unwrap();
        let tri_b = build_triangle(3.2, 1.0, &p, &tb).unwrap();
        tri_a.right = tri_b.right.clone();
        tri_a.left = tri_b.right.clone();
        let (la, _) = tri_a.section(0.0).unwrap();
        assert!(la > 2.8); // corrupted triangle juts right of its apex family
    }

    #[test]
    fn entropy_on_presets_and_negative_control() {
        let p = preset("burgers-riemann").unwrap();
        let tb = build_table(&p, 256).unwrap();
        let xs: Vec<f64> = (0..=100).map(|i| 0.05 + 3.9 * i as f64 / 100.0).collect();
        let f = solve_grid(&p, &xs, &[0.5, 1.0], &tb).unwrap();
        let rep = entropy_check(&f, &p);
        assert!(rep.jumps_checked >= 2);
        assert!(rep.pass(), "{:?}", rep.violations);

        // synthetic inadmissible jump u_left < u_right must be flagged
        let mut bad = f.clone();
        bad.jumps = vec![Jump {
            t: 1.0,
            x: 1.0,
            u_left: 0.0,
            u_right: 1.0,
        }];
        let rep = entropy_check(&bad, &p);
        assert_eq!(rep.violations.len(), 1);
        assert!(rep.violations[0].margin < 0.0);
    }

    #[test]
    fn speed_bounded_by_flux_derivative_range() {
        let p = preset("burgers-riemann").unwrap();
        let tb = build_table(&p, 128).unwrap();
        let bound = p.speed_bound() + 1e-6;
        for &x in &[0.3, 1.0, 1.5, 2.5, 3.5] {
            let s = char_speed(x, 0.8, &p, &tb).unwrap();
            assert!(s.abs() <= bound, "speed {s} exceeds bound {bound}");
        }
    }
}
