//! Residuals and rate identities shared by the quantum and Brownian
//! hydrodynamical pictures. Both satisfy the same continuity equation and
//! differ only in the sign with which `∇(V+Q)` drives the current velocity.

use crate::constants::PhysicalConstants;
use crate::error::Result;
use crate::functionals::quantum_potential;
use crate::grid::{
    ensure_same_grid, gradient, log_density_laplacian, quadrature_masked, GridField, GridPdf, Mask,
    MaskedField,
};

/// Sign of the force term in `∂_t v + v ∇v = ∓ (1/m) ∇(V + Q)`:
/// minus for the quantum motion, plus for Brownian hydrodynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceSign {
    Quantum,
    Brownian,
}

impl ForceSign {
    fn signum(self) -> f64 {
        match self {
            ForceSign::Quantum => -1.0,
            ForceSign::Brownian => 1.0,
        }
    }
}

/// Pointwise residual of the gradient-form equation of motion between two
/// consecutive snapshots, time-centered. The mask is the intersection of
/// both snapshot supports eroded by a few nodes.
#[allow(clippy::too_many_arguments)]
pub fn momentum_residual(
    rho_a: &GridPdf,
    rho_b: &GridPdf,
    v_a: &GridField,
    v_b: &GridField,
    v_ext: &GridField,
    dt: f64,
    c: &PhysicalConstants,
    sign: ForceSign,
) -> Result<MaskedField> {
    ensure_same_grid(&[rho_a.field(), rho_b.field(), v_a, v_b, v_ext])?;
    let q_a = quantum_potential(rho_a, c)?;
    let q_b = quantum_potential(rho_b, c)?;
    let v_mid = v_a.zip(v_b, |a, b| 0.5 * (a + b));
    let dv_dt = v_b.zip(v_a, |b, a| (b - a) / dt);
    let grad_v = gradient(&v_mid)?;
    let q_mid = q_a.field.zip(&q_b.field, |a, b| 0.5 * (a + b));
    let total = v_ext.zip(&q_mid, |v, q| v + q);
    let force = gradient(&total)?.scale(sign.signum() / c.mass());
    let mask = q_a.mask.intersect(&q_b.mask).shrink(3);
    let mut values = vec![0.0; rho_a.grid().len()];
    for i in 0..values.len() {
        if mask.is_inside(i) {
            values[i] =
                dv_dt.values()[i] + v_mid.values()[i] * grad_v.values()[i] - force.values()[i];
        }
    }
    Ok(MaskedField::new(
        GridField::new(rho_a.grid(), values)?,
        mask,
    ))
}

/// The two equivalent forms of `dS/dt` and the pressure form of `dF/dt`
/// evaluated on one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct RateIdentities {
    /// `<∇v>` (density-weighted).
    pub entropy_rate_divergence: f64,
    /// `-(1/D) <v u>` (density-weighted).
    pub entropy_rate_osmotic: f64,
    /// `-2 ∫ v ∇(rho Δ ln rho) dx`, which is `dF/dt` for any current; the
    /// quantum report writes it as `+2 <v ∇P>` with the opposite pressure
    /// sign convention.
    pub fisher_rate: f64,
}

pub fn rate_identities(
    rho: &GridPdf,
    v: &GridField,
    u: &GridField,
    mask: &Mask,
    c: &PhysicalConstants,
) -> Result<RateIdentities> {
    ensure_same_grid(&[rho.field(), v, u])?;
    let grad_v = gradient(v)?;
    let entropy_rate_divergence = quadrature_masked(&rho.field().zip(&grad_v, |r, g| r * g), mask);
    let vu = v.zip(u, |a, b| a * b);
    let entropy_rate_osmotic =
        -quadrature_masked(&rho.field().zip(&vu, |r, p| r * p), mask) / c.diffusion();

    let ll = log_density_laplacian(rho)?;
    let pressure = rho.field().zip(&ll.field, |r, l| r * l);
    let grad_p = gradient(&pressure)?;
    let interior = mask.intersect(&ll.mask).shrink(3);
    let fisher_rate = -2.0 * quadrature_masked(&v.zip(&grad_p, |a, b| a * b), &interior);
    Ok(RateIdentities {
        entropy_rate_divergence,
        entropy_rate_osmotic,
        fisher_rate,
    })
}
