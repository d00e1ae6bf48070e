//! Problem assembly: flux + source + initial/boundary data + horizons,
//! the tolerance bundle, and the named presets used across tests and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::hcurve::AdmissibilityMode;
use crate::piecewise::PiecewisePoly;
use crate::source::{ex12_t_lower, ex12_t_upper, AlphaSpec, SourceModel, DEFAULT_TOL_QUAD};

/// Boundary datum: piecewise data, or the oscillatory schedule tied to the
/// example-1-2 source (60 off the active window; 60 + 720/(4n(n+1)π²) on the
/// intervals (1/((2n+1)π), 1/(2nπ))).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UbSpec {
    Data { data: PiecewisePoly },
    Ex12Schedule { n_trunc: u32 },
}

impl UbSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            UbSpec::Data { data } => data.eval(t),
            UbSpec::Ex12Schedule { n_trunc } => ex12_ub(t, *n_trunc),
        }
    }

    /// Discontinuity/kink locations, for quadrature splitting.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            UbSpec::Data { data } => data.breaks().to_vec(),
            UbSpec::Ex12Schedule { n_trunc } => {
                let mut v: Vec<f64> = (1..=(2 * n_trunc + 1))
                    .map(|k| 1.0 / (k as f64 * std::f64::consts::PI))
                    .collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            }
        }
    }

    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        match self {
            UbSpec::Data { data } => data.sup_abs(a, b),
            UbSpec::Ex12Schedule { .. } => {
                let pi2 = std::f64::consts::PI * std::f64::consts::PI;
                60.0 + 720.0 / (4.0 * 2.0 * pi2)
            }
        }
    }
}

pub fn ex12_ub(t: f64, n_trunc: u32) -> f64 {
    let pi = std::f64::consts::PI;
    if t <= ex12_t_lower(n_trunc) || t >= ex12_t_upper() {
        return 60.0;
    }
    // t ∈ (1/((k+1)π), 1/(kπ)) for some k ≤ 2n_trunc
    let k = (1.0 / (pi * t)).floor() as u32;
    if k % 2 == 1 {
        // adjacent to 1/(kπ) with k odd: the quiet intervals
        60.0
    } else {
        let n = (k / 2) as f64;
        60.0 + 720.0 / (4.0 * n * (n + 1.0) * pi * pi)
    }
}

/// All numeric knobs, spec'd defaults. Everything downstream reads these so
/// that reports are self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub tol_root: f64,
    pub tol_quad: f64,
    /// val_tol = val_tol_rel · (1 + |W|)
    pub val_tol_rel: f64,
    /// arg_tol = arg_tol_rel · (1 + |x|): unique-vs-distinct minimizer band
    pub arg_tol_rel: f64,
    pub tol_bln: f64,
    pub entropy_tol: f64,
    /// cells in the global 1-D minimization scans
    pub scan_cells: usize,
    /// samples for the curve_min cross-check path
    pub adm_samples: usize,
    pub admissibility: AdmissibilityMode,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_root: 1e-10,
            tol_quad: DEFAULT_TOL_QUAD,
            val_tol_rel: 1e-7,
            arg_tol_rel: 1e-5,
            tol_bln: 1e-4,
            entropy_tol: 1e-4,
            scan_cells: 2048,
            adm_samples: 256,
            admissibility: AdmissibilityMode::Containment,
        }
    }
}

impl Tolerances {
    pub fn val_tol(&self, w: f64) -> f64 {
        self.val_tol_rel * (1.0 + w.abs())
    }

    pub fn arg_tol(&self, x: f64) -> f64 {
        self.arg_tol_rel * (1.0 + x.abs())
    }
}

pub struct Problem {
    pub flux: FluxModel,
    pub source: SourceModel,
    pub u0: PiecewisePoly,
    pub ub: UbSpec,
    pub t_max: f64,
    pub x_max: f64,
    pub tol: Tolerances,
}

impl Problem {
    pub fn new(
        flux: FluxModel,
        source: SourceModel,
        u0: PiecewisePoly,
        ub: UbSpec,
        t_max: f64,
        x_max: f64,
        tol: Tolerances,
    ) -> Result<Self> {
        if !(t_max > 0.0 && x_max > 0.0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if source.t_max() < t_max {
            return Err(Error::Config(format!(
                "source horizon {} shorter than problem horizon {t_max}",
                source.t_max()
            )));
        }
        Ok(Self {
            flux,
            source,
            u0,
            ub,
            t_max,
            x_max,
            tol,
        })
    }

    /// Effective boundary datum ū_b(t) = max{u_b(t), λ_f}: the only part of
    /// the datum visible under convex flux.
    pub fn ub_bar(&self, t: f64) -> f64 {
        self.ub.eval(t).max(self.flux.lambda_f())
    }

    /// Exact U0(y) = ∫₀ʸ u0.
    pub fn u0_integral(&self, y: f64) -> f64 {
        self.u0.integral(y)
    }

    /// Bound on the u-scale of the data, for search windows.
    pub fn u_eff(&self) -> f64 {
        let u0m = self.u0.sup_abs(0.0, self.x_max);
        let ubm = self.ub.sup_abs(0.0, self.t_max).max(self.flux.lambda_f().abs());
        u0m.max(ubm) + 1.0
    }

    /// Max characteristic speed over the data range amplified by e^{±‖β‖}.
    pub fn speed_bound(&self) -> f64 {
        let (bmin, bmax) = self.source.beta_range(0.0, self.t_max);
        let amp = bmax.abs().max(bmin.abs()).exp();
        let ue = self.u_eff() * amp;
        self.flux.fprime(ue).abs().max(self.flux.fprime(-ue).abs())
    }

    /// Upper end of the y-search window for the initial functional.
    pub fn y_search_max(&self, x: f64, t: f64) -> f64 {
        x + t * self.speed_bound()
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "zero",
    "burgers-riemann",
    "burgers-boundary",
    "amplified-constant",
    "example-1-1",
    "example-1-2",
];

/// Named presets exercised by tests and the CLI.
pub fn preset(name: &str) -> Result<Problem> {
    let tol = Tolerances::default();
    match name {
        "zero" => Problem::new(
            FluxModel::burgers(),
            SourceModel::new(AlphaSpec::Zero, 2.0, tol.tol_quad)?,
            PiecewisePoly::constant(0.0),
            UbSpec::Data {
                data: PiecewisePoly::constant(0.0),
            },
            2.0,
            2.0,
            tol,
        ),
        "burgers-riemann" => Problem::new(
            FluxModel::burgers(),
            SourceModel::new(AlphaSpec::Zero, 2.0, tol.tol_quad)?,
            PiecewisePoly::steps(&[(0.0, 1.0), (1.0, 0.0)])?,
            UbSpec::Data {
                data: PiecewisePoly::constant(1.0),
            },
            2.0,
            4.0,
            tol,
        ),
        "burgers-boundary" => Problem::new(
            FluxModel::burgers(),
            SourceModel::new(AlphaSpec::Zero, 2.0, tol.tol_quad)?,
            PiecewisePoly::constant(0.0),
            UbSpec::Data {
                data: PiecewisePoly::constant(1.0),
            },
            2.0,
            2.0,
            tol,
        ),
        "amplified-constant" => Problem::new(
            FluxModel::burgers(),
            SourceModel::new(AlphaSpec::Constant { value: 1.0 }, 1.5, tol.tol_quad)?,
            PiecewisePoly::constant(1.0),
            UbSpec::Data {
                data: PiecewisePoly::constant(1.0),
            },
            1.5,
            4.0,
            tol,
        ),
        "example-1-1" => Problem::new(
            FluxModel::shifted_quadratic(1.0, 60.0)?,
            SourceModel::new(AlphaSpec::Example11, 6.0, tol.tol_quad)?,
            PiecewisePoly::constant(10.0),
            UbSpec::Data {
                data: PiecewisePoly::constant(60.0),
            },
            6.0,
            30.0,
            tol,
        ),
        "example-1-2" => {
            let n_trunc = 3;
            let t_max = ex12_t_upper();
            Problem::new(
                FluxModel::shifted_quadratic(1.0, 60.0)?,
                SourceModel::new(AlphaSpec::Example12 { n_trunc }, t_max, tol.tol_quad)?,
                PiecewisePoly::constant(0.0),
                UbSpec::Ex12Schedule { n_trunc },
                t_max,
                1.0,
                tol,
            )
        }
        other => Err(Error::Config(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}
