use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error(
        "bracket expansion exceeded cap in {context}: residuals {r_lo:.6e} / {r_hi:.6e} at ends"
    )]
    BracketFailure {
        context: &'static str,
        r_lo: f64,
        r_hi: f64,
    },

    #[error("quadrature subdivision cap on [{a}, {b}]; worst panel error {worst:.3e}")]
    QuadratureCap { a: f64, b: f64, worst: f64 },

    #[error("empty admissible set for the {functional} functional at x={x}, t={t}")]
    EmptyAdmissible {
        functional: &'static str,
        x: f64,
        t: f64,
    },

    #[error("time {t} beyond the table horizon {t_max}")]
    BeyondHorizon { t: f64, t_max: f64 },

    #[error("both minimization branches infeasible at x={x}, t={t}")]
    Infeasible { x: f64, t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
