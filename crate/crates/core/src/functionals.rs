//! Static information-theoretic and potential-type functionals of a density:
//! Shannon entropy, Fisher information, the quantum potential, osmotic
//! velocity/pressure/temperature, and the indeterminacy inequality report.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::{
    expectation, gradient, laplacian, log_density_gradient, log_density_laplacian,
    quadrature_masked, GridField, GridPdf, Mask, MaskedField, DENSITY_FLOOR,
};

const NORMALIZATION_TOL: f64 = 1e-3;

/// `-∫ rho ln rho dx` over the unmasked nodes, in nats.
pub fn shannon_entropy(rho: &GridPdf) -> Result<f64> {
    rho.check_normalized(NORMALIZATION_TOL)?;
    let mask = nondegenerate_mask(rho)?;
    let integrand = rho.field().map(|r| if r > 0.0 { -r * r.ln() } else { 0.0 });
    Ok(quadrature_masked(&integrand, &mask))
}

/// `∫ (∇rho)^2 / rho dx` over the unmasked nodes.
///
/// Computed along two routes that must agree: the quotient route
/// `(∇rho)^2 / rho` and the expectation route `<(∇rho/rho)^2>`. The two
/// weight the same stencil differently at the mask edge, so their agreement
/// certifies the mask handling.
pub fn fisher_information(rho: &GridPdf) -> Result<f64> {
    let (value, check) = fisher_information_both_routes(rho)?;
    let scale = value.abs().max(f64::MIN_POSITIVE);
    if (value - check).abs() / scale > 1e-8 {
        return Err(Error::Inconsistent(format!(
            "fisher routes disagree: {value} vs {check}"
        )));
    }
    Ok(value)
}

pub fn fisher_information_both_routes(rho: &GridPdf) -> Result<(f64, f64)> {
    rho.check_normalized(NORMALIZATION_TOL)?;
    let mask = nondegenerate_mask(rho)?;
    let grad = gradient(rho.field())?;
    let quotient = grad.zip(rho.field(), |g, r| g * g / r.max(DENSITY_FLOOR));
    let route_a = quadrature_masked(&quotient, &mask);
    let squared_score = grad.zip(rho.field(), |g, r| {
        let s = g / r.max(DENSITY_FLOOR);
        r * s * s
    });
    let route_b = quadrature_masked(&squared_score, &mask);
    Ok((route_a, route_b))
}

/// `Q = -(hbar^2/2m) Δ(rho^1/2) / rho^1/2` on the unmasked nodes.
pub fn quantum_potential(rho: &GridPdf, c: &PhysicalConstants) -> Result<MaskedField> {
    let curvature = sqrt_density_curvature(rho)?;
    let pref = -c.hbar().powi(2) / (2.0 * c.mass());
    Ok(MaskedField::new(
        curvature.field.scale(pref),
        curvature.mask,
    ))
}

/// `Δ(rho^1/2)/rho^1/2` on the unmasked nodes (the bare functional without
/// physical prefactors).
pub fn sqrt_density_curvature(rho: &GridPdf) -> Result<MaskedField> {
    let mask = nondegenerate_mask(rho)?;
    if largest_run(&mask) < 3 {
        return Err(Error::DegenerateDensity(
            "need at least 3 contiguous unmasked nodes".into(),
        ));
    }
    let sqrt = rho.field().map(f64::sqrt);
    let lap = laplacian(&sqrt)?;
    let values = lap
        .values()
        .iter()
        .zip(sqrt.values())
        .zip(mask.inside())
        .map(|((&l, &s), &m)| {
            if m {
                l / s.max(DENSITY_FLOOR.sqrt())
            } else {
                0.0
            }
        })
        .collect();
    Ok(MaskedField::new(GridField::new(rho.grid(), values)?, mask))
}

/// Osmotic velocity `u = D ∇ln rho`.
pub fn osmotic_velocity(rho: &GridPdf, c: &PhysicalConstants) -> Result<MaskedField> {
    let lg = log_density_gradient(rho)?;
    Ok(MaskedField::new(lg.field.scale(c.diffusion()), lg.mask))
}

/// Osmotic pressure `P_osm = D^2 rho Δln rho`.
pub fn osmotic_pressure(rho: &GridPdf, c: &PhysicalConstants) -> Result<MaskedField> {
    let ll = log_density_laplacian(rho)?;
    let d2 = c.diffusion() * c.diffusion();
    let field = ll.field.zip(rho.field(), |l, r| d2 * r * l);
    Ok(MaskedField::new(field, ll.mask))
}

/// Largest deviation of `∇P_osm + (rho/m) ∇Q` from zero, relative to the
/// peak of `|∇P_osm|`; the continuum identity makes this pure discretization
/// error.
pub fn osmotic_pressure_identity_residual(rho: &GridPdf, c: &PhysicalConstants) -> Result<f64> {
    let p = osmotic_pressure(rho, c)?;
    let q = quantum_potential(rho, c)?;
    let grad_p = gradient(&p.field)?;
    let grad_q = gradient(&q.field)?;
    let interior = p.mask.intersect(&q.mask).shrink(3);
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..rho.grid().len() {
        if !interior.is_inside(i) {
            continue;
        }
        let gp = grad_p.values()[i];
        let gq = grad_q.values()[i];
        let r = rho.values()[i];
        residual = residual.max((gp + r / c.mass() * gq).abs());
        scale = scale.max(gp.abs());
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(residual / scale)
}

/// Osmotic temperature `Theta_osm = -m D^2 Δln rho`.
pub fn osmotic_temperature(rho: &GridPdf, c: &PhysicalConstants) -> Result<MaskedField> {
    let ll = log_density_laplacian(rho)?;
    let pref = -c.mass() * c.diffusion() * c.diffusion();
    Ok(MaskedField::new(ll.field.scale(pref), ll.mask))
}

/// Summary of the functionals plus indeterminacy-inequality slacks.
#[derive(Debug, Clone)]
pub struct FunctionalReport {
    pub shannon: f64,
    pub fisher: f64,
    pub mean_quantum_potential: f64,
    pub variance: f64,
    pub fourier_variance: Option<f64>,
    /// `F Var - 1 >= 0` (Cramer-Rao).
    pub cramer_rao_slack: f64,
    /// `F - 2 pi e exp(-2S) >= 0`, saturated by Gaussians.
    pub isoperimetric_slack: f64,
    /// `16 pi^2 sigma_tilde^2 - F >= 0`.
    pub fourier_slack: Option<f64>,
    /// `(2 pi e)^{-1/2} e^S - 1/(4 pi sigma_tilde) >= 0`.
    pub chain_lower_slack: Option<f64>,
    /// `sigma - (2 pi e)^{-1/2} e^S >= 0`.
    pub chain_upper_slack: f64,
    /// Set when any slack is below `-1e-8`.
    pub violation: bool,
}

/// Evaluates every functional and inequality of the report on one density.
pub fn inequality_report(rho: &GridPdf, c: &PhysicalConstants) -> Result<FunctionalReport> {
    let shannon = shannon_entropy(rho)?;
    let fisher = fisher_information(rho)?;
    let variance = rho.variance();
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::DegenerateDensity(format!("variance = {variance}")));
    }
    let q = quantum_potential(rho, c)?;
    let mean_quantum_potential = expectation(rho, &q.field, &q.mask);
    let fourier_variance = Some(fourier_variance(rho));

    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let cramer_rao_slack = fisher * variance - 1.0;
    let isoperimetric_slack = fisher - two_pi_e * (-2.0 * shannon).exp();
    let entropy_length = shannon.exp() / two_pi_e.sqrt();
    let chain_upper_slack = variance.sqrt() - entropy_length;
    let (fourier_slack, chain_lower_slack) = match fourier_variance {
        Some(sv) => {
            let f_slack = 16.0 * std::f64::consts::PI.powi(2) * sv - fisher;
            let c_slack = entropy_length - 1.0 / (4.0 * std::f64::consts::PI * sv.sqrt());
            (Some(f_slack), Some(c_slack))
        }
        None => (None, None),
    };
    let violation = cramer_rao_slack < -1e-8
        || isoperimetric_slack < -1e-8
        || chain_upper_slack < -1e-8
        || fourier_slack.is_some_and(|s| s < -1e-8)
        || chain_lower_slack.is_some_and(|s| s < -1e-8);

    Ok(FunctionalReport {
        shannon,
        fisher,
        mean_quantum_potential,
        variance,
        fourier_variance,
        cramer_rao_slack,
        isoperimetric_slack,
        fourier_slack,
        chain_lower_slack,
        chain_upper_slack,
        violation,
    })
}

/// Frequency-domain variance of `|FT(rho^1/2)|^2` with the unitary
/// `e^{-2 pi i nu x}` convention, via a zero-padded discrete transform.
pub fn fourier_variance(rho: &GridPdf) -> f64 {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = rho.grid().len();
    let h = rho.grid().spacing();
    let m = (4 * n).next_power_of_two().max(4096);
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
    for (i, &r) in rho.values().iter().enumerate() {
        buf[i] = Complex::new(r.sqrt(), 0.0);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    // bin j of the DFT is frequency j/(m h), wrapped to +-1/(2h)
    let dnu = 1.0 / (m as f64 * h);
    let mut mass = 0.0;
    let mut mean = 0.0;
    let mut second = 0.0;
    for (j, z) in buf.iter().enumerate() {
        let nu = if j <= m / 2 {
            j as f64
        } else {
            j as f64 - m as f64
        } * dnu;
        let p = (h * z.norm()).powi(2);
        mass += p;
        mean += nu * p;
        second += nu * nu * p;
    }
    mass *= dnu;
    mean *= dnu / mass;
    second *= dnu / mass;
    second - mean * mean
}

fn nondegenerate_mask(rho: &GridPdf) -> Result<Mask> {
    let mask = rho.support_mask();
    if mask.count() == 0 {
        return Err(Error::DegenerateDensity(
            "all nodes below mask threshold".into(),
        ));
    }
    Ok(mask)
}

fn largest_run(mask: &Mask) -> usize {
    let mut best = 0usize;
    let mut run = 0usize;
    for &b in mask.inside() {
        if b {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}
