//! Closed-form propagators and transition densities: heat kernel, Mehler
//! kernel, Ornstein-Uhlenbeck transition density and its covariance, and the
//! free/oscillator Schrodinger propagators reached by Wick rotation. These
//! serve as golden references for the evolvers and samplers.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};
use num_complex::Complex64;

const PI: f64 = std::f64::consts::PI;

/// Unit-diffusion heat kernel `(4 pi t)^{-1/2} exp(-(y-x)^2/4t)`.
///
/// For a physical diffusion constant `D`, evaluate at `t -> D t`.
pub fn heat_kernel(y: f64, x: f64, t: f64) -> Result<f64> {
    positive_time(t)?;
    Ok((4.0 * PI * t).powf(-0.5) * (-(y - x).powi(2) / (4.0 * t)).exp())
}

/// Mehler kernel of `exp(-t H)` for `H = (1/2)(-Δ + x^2 - 1)`, in the
/// `exp(t/2) / sqrt(2 pi sinh t)` form.
pub fn mehler_kernel(y: f64, x: f64, t: f64) -> Result<f64> {
    positive_time(t)?;
    let sh = t.sinh();
    let ch = t.cosh();
    Ok((0.5 * t).exp() / (2.0 * PI * sh).sqrt()
        * (-((x * x + y * y) * ch - 2.0 * x * y) / (2.0 * sh)).exp())
}

/// The same kernel written through `1 - e^{-2t}`; must agree with
/// [`mehler_kernel`] identically.
pub fn mehler_kernel_alt(y: f64, x: f64, t: f64) -> Result<f64> {
    positive_time(t)?;
    let q = (-t).exp();
    let one_q2 = 1.0 - q * q;
    Ok((PI * one_q2).powf(-0.5) * (-0.5 * (x * x - y * y) - (x * q - y).powi(2) / one_q2).exp())
}

/// Stationary density `pi^{-1/2} e^{-x^2}` of the Ornstein-Uhlenbeck process.
pub fn ou_stationary(x: f64) -> f64 {
    (-x * x).exp() / PI.sqrt()
}

/// Ornstein-Uhlenbeck transition density: probability density in `y` after
/// time `t` for a walker started at `x`, obtained from the Mehler kernel by
/// the ground-state ratio  `p = k(y,x,t) rho_*^{1/2}(y) / rho_*^{1/2}(x)`.
///
/// Equals the Gaussian with mean `x e^{-t}` and variance `(1 - e^{-2t})/2`.
pub fn ou_transition(y: f64, x: f64, t: f64) -> Result<f64> {
    positive_time(t)?;
    let k = mehler_kernel(y, x, t)?;
    Ok(k * ((x * x - y * y) / 2.0).exp())
}

/// The same transition density from its Gaussian closed form.
pub fn ou_transition_gaussian(y: f64, x: f64, t: f64) -> Result<f64> {
    positive_time(t)?;
    let q = (-t).exp();
    let var = 0.5 * (1.0 - q * q);
    Ok((2.0 * PI * var).powf(-0.5) * (-(y - x * q).powi(2) / (2.0 * var)).exp())
}

/// Stationary covariance `E[X(t1) X(t2)] = (1/2) e^{-(t2-t1)}` evaluated by
/// double grid quadrature of `rho_*(x') x' p(x, x', t2-t1) x`.
pub fn ou_covariance(t1: f64, t2: f64, grid: Grid) -> Result<f64> {
    if t1 < 0.0 || t2 < t1 {
        return Err(Error::Domain(format!(
            "need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    let dt = t2 - t1;
    if dt == 0.0 {
        // stationary second moment of rho_*
        let f = GridField::from_fn(grid, |x| ou_stationary(x) * x * x)?;
        return Ok(crate::grid::quadrature(&f));
    }
    let n = grid.len();
    let h = grid.spacing();
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let mut sum = 0.0;
    for i in 0..n {
        let x_start = grid.node(i);
        let w_start = ou_stationary(x_start) * x_start * weight(i);
        if w_start == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for j in 0..n {
            let x_end = grid.node(j);
            inner += ou_transition(x_end, x_start, dt)? * x_end * weight(j);
        }
        sum += w_start * inner;
    }
    Ok(sum * h * h)
}

pub fn ou_covariance_closed_form(t1: f64, t2: f64) -> f64 {
    0.5 * (-(t2 - t1)).exp()
}

/// Which Schrodinger propagator to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    Free,
    Oscillator,
}

/// Free propagator `(4 pi i t)^{-1/2} exp(+i (y-x)^2 / 4t)` (generator `iΔ`)
/// or the `-1`-renormalized oscillator propagator
/// `exp(it/2) (2 pi i sin t)^{-1/2} exp(+i[(x^2+y^2) cos t - 2xy]/(2 sin t))`.
///
/// Oscillator caustics `sin t = 0` are refused rather than branch-picked.
pub fn schrodinger_propagator(kind: PropagatorKind, y: f64, x: f64, t: f64) -> Result<Complex64> {
    match kind {
        PropagatorKind::Free => {
            if t == 0.0 {
                return Err(Error::Domain("free propagator needs t != 0".into()));
            }
            let pref = (Complex64::new(0.0, 4.0 * PI * t)).sqrt().inv();
            Ok(pref * Complex64::new(0.0, (y - x).powi(2) / (4.0 * t)).exp())
        }
        PropagatorKind::Oscillator => {
            let s = t.sin();
            if s.abs() < 1e-12 {
                return Err(Error::CausticTime { t });
            }
            let pref = Complex64::new(0.0, 0.5 * t).exp()
                * (Complex64::new(0.0, 2.0 * PI * s)).sqrt().inv();
            let phase = ((x * x + y * y) * t.cos() - 2.0 * x * y) / (2.0 * s);
            Ok(pref * Complex64::new(0.0, phase).exp())
        }
    }
}

/// Euclidean kernel continued to imaginary time `tau = i t`: substituting
/// into the heat/Mehler formulas must reproduce the propagators.
pub fn wick_rotated_kernel(kind: PropagatorKind, y: f64, x: f64, t: f64) -> Result<Complex64> {
    let tau = Complex64::new(0.0, t);
    match kind {
        PropagatorKind::Free => {
            if t == 0.0 {
                return Err(Error::Domain("need t != 0".into()));
            }
            let pref = (4.0 * PI * tau).sqrt().inv();
            Ok(pref * (-(Complex64::from((y - x).powi(2))) / (4.0 * tau)).exp())
        }
        PropagatorKind::Oscillator => {
            if t.sin().abs() < 1e-12 {
                return Err(Error::CausticTime { t });
            }
            let sh = tau.sinh();
            let ch = tau.cosh();
            let pref = (0.5 * tau).exp() * (2.0 * PI * sh).sqrt().inv();
            Ok(pref * (-((x * x + y * y) * ch - 2.0 * x * y) / (2.0 * sh)).exp())
        }
    }
}

/// Kernel row `k(., x0, t)` sampled over a grid, for golden-file comparisons.
pub fn kernel_row(
    kernel: impl Fn(f64, f64, f64) -> Result<f64>,
    grid: Grid,
    x0: f64,
    t: f64,
) -> Result<GridField> {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        values.push(kernel(grid.node(i), x0, t)?);
    }
    GridField::new(grid, values)
}

/// Brute-force composition `∫ K(y,z,t) K(z,x,s) dz` of free propagators by
/// Simpson quadrature under a smooth raised-cosine window centered on the
/// stationary-phase point. Oracle-grade: used to certify the semigroup
/// property, not for production evaluation.
pub fn free_propagator_composition(y: f64, x: f64, t: f64, s: f64) -> Result<Complex64> {
    if t <= 0.0 || s <= 0.0 {
        return Err(Error::Domain("composition needs positive legs".into()));
    }
    let a = (s + t) / (4.0 * s * t);
    let scale = (1.0 / a.min(1.0)).sqrt();
    let plateau = 14.0 * scale;
    let taper = 14.0 * scale;
    let z_star = (y * s + x * t) / (s + t);
    let half_width = plateau + taper;
    let n = 600_001usize; // odd, for Simpson
    let h = 2.0 * half_width / (n - 1) as f64;
    let mut sum = Complex64::default();
    for i in 0..n {
        let z = z_star - half_width + i as f64 * h;
        let u = (z - z_star).abs();
        let w = if u <= plateau {
            1.0
        } else if u >= half_width {
            0.0
        } else {
            (0.5 * PI * (u - plateau) / taper).cos().powi(2)
        };
        if w == 0.0 {
            continue;
        }
        let f = schrodinger_propagator(PropagatorKind::Free, y, z, t)?
            * schrodinger_propagator(PropagatorKind::Free, z, x, s)?
            * w;
        let simpson = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += f * simpson;
    }
    Ok(sum * (h / 3.0))
}

fn positive_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!(
            "kernel time must be positive, got {t}"
        )));
    }
    Ok(())
}
