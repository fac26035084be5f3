//! Stock densities, potentials and closed-form reference solutions shared by
//! the runners and the test suites.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, GridPdf};

/// Normal density `N(mean, sigma^2)` sampled and renormalized on the grid.
pub fn gaussian_pdf(grid: Grid, mean: f64, sigma: f64) -> Result<GridPdf> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    GridPdf::from_fn_normalized(grid, |x| norm * (-0.5 * ((x - mean) / sigma).powi(2)).exp())
}

/// The stationary oscillator density `pi^{-1/2} e^{-x^2}`.
pub fn oscillator_stationary_pdf(grid: Grid) -> Result<GridPdf> {
    GridPdf::from_fn_normalized(grid, |x| (-x * x).exp() / std::f64::consts::PI.sqrt())
}

/// Unit-mass plateau on `[a, b]` with smooth raised-cosine shoulders of
/// width `edge`.
pub fn windowed_uniform_pdf(grid: Grid, a: f64, b: f64, edge: f64) -> Result<GridPdf> {
    if !(a < b && edge > 0.0) {
        return Err(Error::Domain("need a < b and positive edge width".into()));
    }
    GridPdf::from_fn_normalized(grid, |x| {
        if x >= a && x <= b {
            1.0
        } else if x > a - edge && x < a {
            let t = (x - (a - edge)) / edge;
            0.5 - 0.5 * (std::f64::consts::PI * t).cos()
        } else if x > b && x < b + edge {
            let t = (x - b) / edge;
            0.5 + 0.5 * (std::f64::consts::PI * t).cos()
        } else {
            0.0
        }
    })
}

/// External potentials selectable by the runners.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Free,
    /// `V = (x^2 - 1)/2`, the oscillator whose semigroup ground value is 0.
    RescaledOscillator,
    Harmonic {
        omega: f64,
    },
    /// Coefficients in ascending degree.
    Polynomial {
        coefficients: Vec<f64>,
    },
}

impl Potential {
    pub fn sample(&self, grid: Grid, c: &PhysicalConstants) -> Result<GridField> {
        match self {
            Potential::Free => Ok(GridField::zeros(grid)),
            Potential::RescaledOscillator => GridField::from_fn(grid, |x| 0.5 * (x * x - 1.0)),
            Potential::Harmonic { omega } => {
                if !(omega.is_finite() && *omega > 0.0) {
                    return Err(Error::Domain(format!(
                        "harmonic frequency must be positive, got {omega}"
                    )));
                }
                let k = 0.5 * c.mass() * omega * omega;
                GridField::from_fn(grid, move |x| k * x * x)
            }
            Potential::Polynomial { coefficients } => {
                let coeffs = coefficients.clone();
                GridField::from_fn(grid, move |x| {
                    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
                })
            }
        }
    }
}

/// Closed-form fields of the free Gaussian packet with `|psi|^2 = N(0, sigma0^2)`
/// at `t = 0` and zero initial velocity.
#[derive(Debug, Clone, Copy)]
pub struct FreePacket {
    pub sigma0: f64,
    pub constants: PhysicalConstants,
}

impl FreePacket {
    pub fn new(sigma0: f64, constants: PhysicalConstants) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Domain(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        Ok(Self { sigma0, constants })
    }

    /// `sigma^2(t) = sigma0^2 + (hbar t / 2 m sigma0)^2`
    pub fn sigma_sq(&self, t: f64) -> f64 {
        let k = self.constants.hbar() * t / (2.0 * self.constants.mass() * self.sigma0);
        self.sigma0 * self.sigma0 + k * k
    }

    /// Current velocity `v(x, t) = x sigma'(t)/sigma(t)`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let k = self.constants.hbar() / (2.0 * self.constants.mass() * self.sigma0);
        x * k * k * t / self.sigma_sq(t)
    }

    pub fn density(&self, grid: Grid, t: f64) -> Result<GridPdf> {
        let s2 = self.sigma_sq(t);
        gaussian_pdf(grid, 0.0, s2.sqrt())
    }

    pub fn velocity_field(&self, grid: Grid, t: f64) -> GridField {
        GridField::from_fn(grid, |x| self.velocity(x, t)).expect("finite velocity")
    }

    /// Bohmian trajectory launched from `x0` at `t = 0`.
    pub fn trajectory(&self, x0: f64, t: f64) -> f64 {
        x0 * (self.sigma_sq(t) / (self.sigma0 * self.sigma0)).sqrt()
    }
}

/// Gaussian moments of the relaxing Ornstein-Uhlenbeck density governed by
/// `b = -x` at unit rate with stationary variance `1/2`.
#[derive(Debug, Clone, Copy)]
pub struct OuRelaxation {
    pub mean0: f64,
    pub var0: f64,
}

impl OuRelaxation {
    pub fn mean(&self, t: f64) -> f64 {
        self.mean0 * (-t).exp()
    }

    pub fn variance(&self, t: f64) -> f64 {
        let q = (-2.0 * t).exp();
        self.var0 * q + 0.5 * (1.0 - q)
    }

    pub fn density(&self, grid: Grid, t: f64) -> Result<GridPdf> {
        gaussian_pdf(grid, self.mean(t), self.variance(t).sqrt())
    }
}
