//! Large-friction Kramers picture: local moments of the phase-space
//! distribution in closed form, kinetic versus osmotic pressure and
//! temperature, the thermal-energy law, co-moving droplet balances and the
//! quantum heat-transfer residual.
//!
//! The phase-space velocity coordinate (denoted `u` in the local moments)
//! is distinct from the osmotic velocity field of the other modules; the
//! two meanings are kept apart by naming here.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::functionals::{osmotic_pressure, osmotic_temperature, quantum_potential};
use crate::grid::{
    ensure_same_grid, gradient, interval_quadrature, laplacian, log_density_gradient,
    log_density_laplacian, Grid, GridField, GridPdf, MaskedField,
};

/// Closed-form local moments of the free Brownian gas in the large-friction
/// regime, where the position marginal tracks the heat kernel.
#[derive(Debug, Clone)]
pub struct LocalMoments {
    pub time: f64,
    /// Position marginal `w(x, t)`.
    pub w: GridPdf,
    /// Local mean velocity `<u>_x = x/2t`.
    pub u_mean: GridField,
    /// Local second moment `<u^2>_x = (D beta - D/2t) + <u>_x^2`.
    pub u2_mean: GridField,
    /// Kinetic pressure `(<u^2>_x - <u>_x^2) w >= 0`.
    pub p_kin: GridField,
    /// Kinetic temperature `m (D beta - D/2t)`, constant in space.
    pub theta_kin: GridField,
    /// Osmotic temperature `-m D^2 Δ ln w`.
    pub theta_osm: MaskedField,
}

/// Validity bound of the regime and its closed-form moments.
pub fn regime_bound(c: &PhysicalConstants) -> f64 {
    1.0 / (2.0 * c.friction())
}

pub fn large_friction_moments(t: f64, grid: Grid, c: &PhysicalConstants) -> Result<LocalMoments> {
    let bound = regime_bound(c);
    if !(t.is_finite() && t > bound) {
        return Err(Error::Regime { t, bound });
    }
    let d = c.diffusion();
    let sigma = (2.0 * d * t).sqrt();
    let w = crate::scenario::gaussian_pdf(grid, 0.0, sigma)?;
    let u_mean = GridField::from_fn(grid, |x| x / (2.0 * t))?;

    // consistency: <u>_x must equal -D grad(w)/w
    let score = log_density_gradient(&w)?;
    let interior = score.mask.shrink(3);
    for i in 0..grid.len() {
        if interior.is_inside(i) {
            let lhs = u_mean.values()[i];
            let rhs = -d * score.field.values()[i];
            if (lhs - rhs).abs() > 1e-6 {
                return Err(Error::Inconsistent(format!(
                    "<u>_x and -D grad w / w differ by {} at node {i}",
                    lhs - rhs
                )));
            }
        }
    }

    let spread = d * c.friction() - d / (2.0 * t);
    let u2_mean = u_mean.map(|u| spread + u * u);
    let p_kin = w.field().scale(spread);
    let theta_kin = GridField::constant(grid, c.mass() * spread);
    let theta_osm = osmotic_temperature(&w, c)?;
    Ok(LocalMoments {
        time: t,
        w,
        u_mean,
        u2_mean,
        p_kin,
        theta_kin,
        theta_osm,
    })
}

/// Residual fields of the pressure balances in the analytic regime.
#[derive(Debug, Clone)]
pub struct PressureBalances {
    /// `-∇P_kin/w - beta <u>_x + ∇P_osm/w`, the Kramers momentum balance.
    pub kramers: MaskedField,
    /// `(∂_t + v∇)v + ∇P_osm/w`, the hydrodynamical balance with `v = <u>_x`.
    pub hydrodynamic: MaskedField,
    /// `-∇P_osm/w - (1/m)∇Q`, two independent discretizations of the same force,
    /// discretized independently (log route vs square-root route).
    pub q_route: MaskedField,
}

pub fn pressure_balance_residual(
    moments: &LocalMoments,
    c: &PhysicalConstants,
) -> Result<PressureBalances> {
    let grid = moments.w.grid();
    let d = c.diffusion();
    let d2 = d * d;
    let t = moments.time;
    let score = log_density_gradient(&moments.w)?;
    let log_lap = log_density_laplacian(&moments.w)?;
    let grad_log_lap = gradient(&log_lap.field)?;
    let mask = score.mask.intersect(&log_lap.mask).shrink(4);

    // grad P_osm / w = D^2 [grad(Δln w) + Δln w grad ln w]
    let posm_over_w = GridField::new(
        grid,
        (0..grid.len())
            .map(|i| {
                d2 * (grad_log_lap.values()[i]
                    + log_lap.field.values()[i] * score.field.values()[i])
            })
            .collect(),
    )?;
    // grad P_kin / w = (Theta_kin/m) grad ln w  (Theta_kin constant in x)
    let theta_over_m = moments.theta_kin.values()[0] / c.mass();
    let pkin_over_w = score.field.scale(theta_over_m);

    let beta = c.friction();
    let mut kramers = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            kramers[i] = -pkin_over_w.values()[i] - beta * moments.u_mean.values()[i]
                + posm_over_w.values()[i];
        }
    }

    // (∂_t + v ∇) v with v = x/2t: the time derivative is closed-form
    let dv_dt = GridField::from_fn(grid, |x| -x / (2.0 * t * t))?;
    let grad_v = gradient(&moments.u_mean)?;
    let mut hydro = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            hydro[i] = dv_dt.values()[i]
                + moments.u_mean.values()[i] * grad_v.values()[i]
                + posm_over_w.values()[i];
        }
    }

    let q = quantum_potential(&moments.w, c)?;
    let grad_q = gradient(&q.field)?;
    let mut q_route = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            q_route[i] = -posm_over_w.values()[i] - grad_q.values()[i] / c.mass();
        }
    }

    Ok(PressureBalances {
        kramers: MaskedField::new(GridField::new(grid, kramers)?, mask.clone()),
        hydrodynamic: MaskedField::new(GridField::new(grid, hydro)?, mask.clone()),
        q_route: MaskedField::new(GridField::new(grid, q_route)?, mask),
    })
}

/// Mass, momentum and kinetic-energy balances of the co-moving droplet
/// `[alpha, beta]`, each as the finite-difference rate on the left against
/// its closed-form right-hand side, plus the power-release identity.
#[derive(Debug, Clone)]
pub struct DropletBalance {
    pub mass_rate: f64,
    pub momentum_rate: f64,
    pub momentum_rhs: f64,
    pub energy_rate: f64,
    pub energy_rhs: f64,
    pub power_release_lhs: f64,
    pub power_release_rhs: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn droplet_balances(
    rho_a: &GridPdf,
    rho_b: &GridPdf,
    v_a: &GridField,
    v_b: &GridField,
    dt: f64,
    v_ext: &GridField,
    interval: (f64, f64),
    c: &PhysicalConstants,
) -> Result<DropletBalance> {
    ensure_same_grid(&[rho_a.field(), rho_b.field(), v_a, v_b, v_ext])?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let (alpha, beta) = interval;
    if alpha >= beta || alpha.is_nan() || beta.is_nan() {
        return Err(Error::Domain(format!("empty droplet [{alpha}, {beta}]")));
    }
    let mask = rho_a.support_mask().intersect(&rho_b.support_mask());
    let grid = rho_a.grid();
    let (ia, _) = grid.locate(alpha);
    let (ib, _) = grid.locate(beta);
    for i in ia.saturating_sub(1)..=(ib + 1).min(grid.len() - 1) {
        if !mask.is_inside(i) {
            return Err(Error::Domain(
                "droplet interval touches the masked region".into(),
            ));
        }
    }

    // first-order endpoint deformation by the local current
    let alpha_b = alpha + v_a.interp(alpha) * dt;
    let beta_b = beta + v_a.interp(beta) * dt;

    let mass_a = interval_quadrature(rho_a.field(), alpha, beta)?;
    let mass_b = interval_quadrature(rho_b.field(), alpha_b, beta_b)?;
    let mass_rate = (mass_b - mass_a) / dt;

    let flux_a = rho_a.field().zip(v_a, |r, v| r * v);
    let flux_b = rho_b.field().zip(v_b, |r, v| r * v);
    let momentum_rate = (interval_quadrature(&flux_b, alpha_b, beta_b)?
        - interval_quadrature(&flux_a, alpha, beta)?)
        / dt;

    let grad_v_ext = gradient(v_ext)?;
    let p_osm = osmotic_pressure(rho_a, c)?;
    let body_force = rho_a.field().zip(&grad_v_ext, |r, g| r * g / c.mass());
    let momentum_rhs = interval_quadrature(&body_force, alpha, beta)? + p_osm.field.interp(alpha)
        - p_osm.field.interp(beta);

    let kin_a = rho_a.field().zip(v_a, |r, v| 0.5 * r * v * v);
    let kin_b = rho_b.field().zip(v_b, |r, v| 0.5 * r * v * v);
    let energy_rate = (interval_quadrature(&kin_b, alpha_b, beta_b)?
        - interval_quadrature(&kin_a, alpha, beta)?)
        / dt;

    let q = quantum_potential(rho_a, c)?;
    let total_pot = v_ext.zip(&q.field, |v, q| v + q);
    let grad_total = gradient(&total_pot)?;
    let power = rho_a
        .field()
        .zip(v_a, |r, v| r * v)
        .zip(&grad_total, |rv, g| rv * g / c.mass());
    let energy_rhs = interval_quadrature(&power, alpha, beta)?;

    let grad_q = gradient(&q.field)?;
    let release = rho_a
        .field()
        .zip(v_a, |r, v| r * v)
        .zip(&grad_q, |rv, g| rv * g);
    let power_release_lhs = interval_quadrature(&release, alpha, beta)?;
    let grad_p = gradient(&p_osm.field)?;
    let drain = v_a.zip(&grad_p, |v, g| v * g);
    let power_release_rhs = -interval_quadrature(&drain, alpha, beta)?;

    Ok(DropletBalance {
        mass_rate,
        momentum_rate,
        momentum_rhs,
        energy_rate,
        energy_rhs,
        power_release_lhs,
        power_release_rhs,
    })
}

/// Pointwise residual of the quantum heat-transfer law
/// `(∂_t + v∇)Θ_osm = -2∇q/rho - 2(∇v)Θ_osm` with `q = -2 m D^2 rho Δv`,
/// between two consecutive snapshots.
pub fn quantum_heat_transfer_residual(
    rho_a: &GridPdf,
    rho_b: &GridPdf,
    v_a: &GridField,
    v_b: &GridField,
    dt: f64,
    c: &PhysicalConstants,
) -> Result<MaskedField> {
    ensure_same_grid(&[rho_a.field(), rho_b.field(), v_a, v_b])?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let grid = rho_a.grid();
    let th_a = osmotic_temperature(rho_a, c)?;
    let th_b = osmotic_temperature(rho_b, c)?;
    let theta_mid = th_a.field.zip(&th_b.field, |a, b| 0.5 * (a + b));
    let dtheta_dt = th_b.field.zip(&th_a.field, |b, a| (b - a) / dt);
    let v_mid = v_a.zip(v_b, |a, b| 0.5 * (a + b));
    let rho_mid = rho_a.field().zip(rho_b.field(), |a, b| 0.5 * (a + b));
    let grad_theta = gradient(&theta_mid)?;
    let grad_v = gradient(&v_mid)?;
    let lap_v = laplacian(&v_mid)?;
    let pref = -2.0 * c.mass() * c.diffusion() * c.diffusion();
    let heat_current = rho_mid.zip(&lap_v, |r, l| pref * r * l);
    let grad_heat = gradient(&heat_current)?;
    let mask = th_a.mask.intersect(&th_b.mask).shrink(4);
    let mut values = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            values[i] = dtheta_dt.values()[i]
                + v_mid.values()[i] * grad_theta.values()[i]
                + 2.0 * grad_heat.values()[i] / rho_mid.values()[i]
                + 2.0 * grad_v.values()[i] * theta_mid.values()[i];
        }
    }
    Ok(MaskedField::new(GridField::new(grid, values)?, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{evolve_quantum, WaveFunction};
    use crate::scenario::{gaussian_pdf, oscillator_stationary_pdf, Potential};

    fn c_kinetic() -> PhysicalConstants {
        PhysicalConstants::with_friction(1.0, 0.5, 4.0).unwrap()
    }

    #[test]
    fn moment_plugin_values() {
        let grid = Grid::new(-10.0, 10.0, 4001).unwrap();
        let c = c_kinetic();
        let m = large_friction_moments(1.0, grid, &c).unwrap();
        // Theta_kin = m(D beta - D/2t) = 2 - 0.25
        assert!((m.theta_kin.values()[0] - 1.75).abs() < 1e-12);
        assert!((c.kb_t() - 2.0).abs() < 1e-12);
        // Theta_osm = m D / 2t = 0.25
        let interior = m.theta_osm.mask.shrink(3);
        for i in 0..grid.len() {
            if interior.is_inside(i) {
                assert!((m.theta_osm.field.values()[i] - 0.25).abs() < 1e-6);
                // Theta_kin + Theta_osm = kB T exactly
                assert!(
                    (m.theta_kin.values()[i] + m.theta_osm.field.values()[i] - c.kb_t()).abs()
                        < 1e-6
                );
            }
        }
        // P_kin >= 0 nodewise
        assert!(m.p_kin.values().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn kinetic_temperature_approaches_kbt() {
        let grid = Grid::new(-90.0, 90.0, 4001).unwrap();
        let c = c_kinetic();
        let m = large_friction_moments(400.0, grid, &c).unwrap();
        assert!((m.theta_kin.values()[0] - c.kb_t()).abs() < 1e-3);
    }

    #[test]
    fn regime_bound_is_enforced() {
        let grid = Grid::new(-10.0, 10.0, 1001).unwrap();
        let c = c_kinetic();
        let err = large_friction_moments(0.1, grid, &c);
        assert!(matches!(err, Err(Error::Regime { .. })));
    }

    #[test]
    fn thermal_energy_conservation_plugin() {
        // ∂_t Theta_osm = -2 (grad v) Theta_osm: both sides equal -mD/2t^2
        let grid = Grid::new(-10.0, 10.0, 4001).unwrap();
        let c = c_kinetic();
        let t = 1.0;
        let m1 = large_friction_moments(t, grid, &c).unwrap();
        let dt = 1e-5;
        let m2 = large_friction_moments(t + dt, grid, &c).unwrap();
        let mid = grid.len() / 2;
        let lhs = (m2.theta_osm.field.values()[mid] - m1.theta_osm.field.values()[mid]) / dt;
        let grad_v = 1.0 / (2.0 * t);
        let rhs = -2.0 * grad_v * m1.theta_osm.field.values()[mid];
        assert!((lhs + 0.25).abs() < 1e-4, "lhs {lhs}");
        assert!((rhs + 0.25).abs() < 1e-9, "rhs {rhs}");
    }

    #[test]
    fn pressure_balances_close() {
        let grid = Grid::new(-8.0, 8.0, 8001).unwrap();
        let c = c_kinetic();
        for t in [0.5, 1.0, 2.0] {
            let m = large_friction_moments(t, grid, &c).unwrap();
            let b = pressure_balance_residual(&m, &c).unwrap();
            let sup = |f: &MaskedField| {
                let mut s = 0.0f64;
                for i in 0..grid.len() {
                    if f.mask.is_inside(i) && grid.node(i).abs() <= 3.0 {
                        s = s.max(f.field.values()[i].abs());
                    }
                }
                s
            };
            assert!(sup(&b.kramers) < 1e-5, "kramers {}", sup(&b.kramers));
            assert!(
                sup(&b.hydrodynamic) < 1e-5,
                "hydro {}",
                sup(&b.hydrodynamic)
            );
            assert!(sup(&b.q_route) < 1e-4, "q route {}", sup(&b.q_route));
        }
    }

    #[test]
    fn osmotic_pressure_gradient_of_heat_kernel() {
        // -grad P_osm = (D/2t) grad w
        let grid = Grid::new(-8.0, 8.0, 4001).unwrap();
        let c = PhysicalConstants::default();
        let t = 1.0;
        let sigma = (2.0 * c.diffusion() * t).sqrt();
        let w = gaussian_pdf(grid, 0.0, sigma).unwrap();
        let p = osmotic_pressure(&w, &c).unwrap();
        let grad_p = gradient(&p.field).unwrap();
        let grad_w = gradient(w.field()).unwrap();
        let interior = p.mask.shrink(4);
        for i in 0..grid.len() {
            if interior.is_inside(i) && grid.node(i).abs() < 4.0 {
                let lhs = -grad_p.values()[i];
                let rhs = c.diffusion() / (2.0 * t) * grad_w.values()[i];
                assert!((lhs - rhs).abs() < 1e-6, "node {i}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn stationary_droplet_rates_vanish() {
        let grid = Grid::new(-6.0, 6.0, 2401).unwrap();
        let c = PhysicalConstants::default();
        let rho = oscillator_stationary_pdf(grid).unwrap();
        let zero = GridField::zeros(grid);
        let v_ext = Potential::RescaledOscillator.sample(grid, &c).unwrap();
        let b = droplet_balances(&rho, &rho, &zero, &zero, 1e-3, &v_ext, (-0.5, 0.5), &c).unwrap();
        assert!(b.mass_rate.abs() < 1e-8);
        assert!(b.momentum_rate.abs() < 1e-8);
        assert!(b.momentum_rhs.abs() < 1e-8);
        assert!(b.energy_rate.abs() < 1e-8);
        assert!(b.energy_rhs.abs() < 1e-8);
    }

    #[test]
    fn droplet_rejects_masked_interval() {
        let grid = Grid::new(-12.0, 12.0, 2401).unwrap();
        let c = PhysicalConstants::default();
        let rho = gaussian_pdf(grid, 0.0, 0.5).unwrap();
        let zero = GridField::zeros(grid);
        let err = droplet_balances(&rho, &rho, &zero, &zero, 1e-3, &zero, (-11.0, 11.0), &c);
        assert!(err.is_err());
    }

    #[test]
    fn power_release_on_heat_kernel_flow() {
        // frozen oracle: ∫_{-1/2}^{1/2} rho v grad Q dx = -0.003857449472965841
        const ORACLE: f64 = -0.003857449472965841;
        let grid = Grid::new(-10.0, 10.0, 4001).unwrap();
        let c = PhysicalConstants::default();
        let t = 1.0;
        let sigma = (2.0 * c.diffusion() * t).sqrt();
        let rho = gaussian_pdf(grid, 0.0, sigma).unwrap();
        let v = GridField::from_fn(grid, |x| x / (2.0 * t)).unwrap();
        let b = droplet_balances(
            &rho,
            &rho,
            &v,
            &v,
            1e-3,
            &GridField::zeros(grid),
            (-0.5, 0.5),
            &c,
        )
        .unwrap();
        assert!(
            (b.power_release_lhs - ORACLE).abs() < 1e-4 * ORACLE.abs(),
            "lhs {}",
            b.power_release_lhs
        );
        assert!(
            (b.power_release_lhs - b.power_release_rhs).abs() < 1e-4 * ORACLE.abs(),
            "identity gap {}",
            b.power_release_lhs - b.power_release_rhs
        );
    }

    #[test]
    fn heat_transfer_reduced_form_for_free_packet() {
        let grid = Grid::new(-12.0, 12.0, 2401).unwrap();
        let c = PhysicalConstants::default();
        let rho0 = gaussian_pdf(grid, 0.0, 1.0).unwrap();
        let psi0 = WaveFunction::from_density(&rho0, c).unwrap();
        let run = evolve_quantum(&psi0, &GridField::zeros(grid), 1e-3, 1000, 999).unwrap();
        let n = run.states.len();
        let a = run.fields(n - 2).unwrap();
        let b = run.fields(n - 1).unwrap();
        let res = quantum_heat_transfer_residual(&a.rho, &b.rho, &a.v, &b.v, b.time - a.time, &c)
            .unwrap();
        let interior = res.mask.shrink(40);
        let mut sup = 0.0f64;
        for i in 0..grid.len() {
            if interior.is_inside(i) {
                sup = sup.max(res.field.values()[i].abs());
            }
        }
        assert!(sup < 5e-3, "reduced heat-transfer residual {sup}");
    }

    #[test]
    fn heat_transfer_stationary_state_is_silent() {
        let grid = Grid::new(-8.0, 8.0, 1601).unwrap();
        let c = PhysicalConstants::default();
        let rho = oscillator_stationary_pdf(grid).unwrap();
        let zero = GridField::zeros(grid);
        let res = quantum_heat_transfer_residual(&rho, &rho, &zero, &zero, 1e-3, &c).unwrap();
        assert!(res.max_abs_inside() < 1e-10);
    }

    #[test]
    fn heat_transfer_full_form_for_displaced_ground_state() {
        let grid = Grid::new(-10.0, 10.0, 2001).unwrap();
        let c = PhysicalConstants::default();
        let v_ext = Potential::RescaledOscillator.sample(grid, &c).unwrap();
        let rho0 = gaussian_pdf(grid, 0.3, 0.5f64.sqrt()).unwrap();
        let psi0 = WaveFunction::from_density(&rho0, c).unwrap();
        let run = evolve_quantum(&psi0, &v_ext, 1e-3, 500, 499).unwrap();
        let n = run.states.len();
        let a = run.fields(n - 2).unwrap();
        let b = run.fields(n - 1).unwrap();
        let res = quantum_heat_transfer_residual(&a.rho, &b.rho, &a.v, &b.v, b.time - a.time, &c)
            .unwrap();
        let interior = res.mask.shrink(40);
        let mut sup = 0.0f64;
        for i in 0..grid.len() {
            if interior.is_inside(i) && grid.node(i).abs() < 3.0 {
                sup = sup.max(res.field.values()[i].abs());
            }
        }
        assert!(sup < 5e-3, "full heat-transfer residual {sup}");
    }
}
