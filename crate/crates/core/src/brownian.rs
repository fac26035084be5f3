//! Brownian side of the duality: contractive semigroup dynamics, the
//! drift-diffusion Fokker-Planck equation in conservative form, their
//! pointwise equivalence through `rho = Psi rho_*^{1/2}`, the compatibility
//! potential, and the `H^- = 0` hydrodynamical diagnostics.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::{
    cumulative_quadrature, ensure_same_grid, expectation, gradient, log_density_gradient,
    quadrature, Grid, GridField, GridPdf, MaskedField,
};
use crate::hydro::{momentum_residual, ForceSign};
use crate::linalg::{solve_tridiagonal, SymTridiagonal};

/// Compatibility potential of a stationary density, in its two equivalent forms.
#[derive(Debug, Clone)]
pub struct CompatibilityPotential {
    /// `V = 2 m D^2 Δ(rho_*^{1/2}) / rho_*^{1/2}` (curvature form).
    pub potential: MaskedField,
    /// `V = m [b^2/2 + D ∇b]` with `b = D ∇ln rho_*` (drift form).
    pub drift_form: GridField,
    /// `max |curvature form - drift form| / max(1, max |V|)` over the
    /// eroded unmasked region; pure discretization error in the continuum.
    pub max_relative_gap: f64,
}

/// Builds the potential that makes `rho_*` stationary for both the
/// semigroup and the Fokker-Planck dynamics.
pub fn compatibility_potential(
    rho_star: &GridPdf,
    c: &PhysicalConstants,
) -> Result<CompatibilityPotential> {
    let curvature = crate::functionals::sqrt_density_curvature(rho_star)?;
    let pref = 2.0 * c.mass() * c.diffusion() * c.diffusion();
    let potential = MaskedField::new(curvature.field.scale(pref), curvature.mask);

    let b = log_density_gradient(rho_star)?.field.scale(c.diffusion());
    let grad_b = gradient(&b)?;
    let m = c.mass();
    let d = c.diffusion();
    let drift_form = b.zip(&grad_b, |b, gb| m * (0.5 * b * b + d * gb));

    let interior = potential.mask.shrink(3);
    let mut gap = 0.0f64;
    let mut scale = 1.0f64;
    for i in 0..rho_star.grid().len() {
        if interior.is_inside(i) {
            gap = gap.max((potential.field.values()[i] - drift_form.values()[i]).abs());
            scale = scale.max(potential.field.values()[i].abs());
        }
    }
    Ok(CompatibilityPotential {
        potential,
        drift_form,
        max_relative_gap: gap / scale,
    })
}

/// State of the generalized diffusion `∂_t Psi = [D Δ - V/(2mD)] Psi`.
#[derive(Debug, Clone)]
pub struct SemigroupState {
    pub time: f64,
    pub psi: GridField,
    pub rho_star: GridPdf,
    pub constants: PhysicalConstants,
}

impl SemigroupState {
    /// Normalizes `Psi` so that `rho = Psi rho_*^{1/2}` has unit mass.
    pub fn new(psi: GridField, rho_star: GridPdf, constants: PhysicalConstants) -> Result<Self> {
        ensure_same_grid(&[&psi, rho_star.field()])?;
        let mut state = Self {
            time: 0.0,
            psi,
            rho_star,
            constants,
        };
        let mass = state.density_mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::DegenerateDensity(format!(
                "Psi rho_*^1/2 mass {mass}"
            )));
        }
        state.psi = state.psi.scale(1.0 / mass);
        Ok(state)
    }

    fn density_mass(&self) -> f64 {
        quadrature(&self.psi.zip(self.rho_star.field(), |p, r| p * r.sqrt()))
    }

    /// `rho(x, t) = Psi(x, t) rho_*^{1/2}(x)`.
    pub fn density(&self) -> Result<GridPdf> {
        GridPdf::new(
            self.psi.grid(),
            self.psi
                .values()
                .iter()
                .zip(self.rho_star.values())
                .map(|(&p, &r)| p * r.sqrt())
                .collect(),
        )
    }
}

/// Crank-Nicolson stepping of the semigroup equation. The potential must be
/// renormalized so the bottom of the spectrum sits at zero; the run aborts
/// if `Psi` loses positivity.
pub fn evolve_semigroup(
    initial: &SemigroupState,
    v_ext: &GridField,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
) -> Result<Vec<SemigroupState>> {
    ensure_same_grid(&[&initial.psi, v_ext])?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let stride = snapshot_stride.max(1);
    let c = initial.constants;
    let grid = initial.psi.grid();
    let n = grid.len();
    let h = grid.spacing();
    let d = c.diffusion();
    let scale = 1.0 / (2.0 * c.mass() * d);
    // generator A = D lap - V/(2mD) on the interior, Dirichlet walls
    let m_int = n - 2;
    let diag: Vec<f64> = (0..m_int)
        .map(|k| -2.0 * d / (h * h) - v_ext.values()[k + 1] * scale)
        .collect();
    let off = d / (h * h);
    let half = 0.5 * dt;
    let solver_diag: Vec<f64> = diag.iter().map(|&a| 1.0 - half * a).collect();
    let solver_off = vec![-half * off; m_int - 1];

    let mut psi = initial.psi.values()[1..n - 1].to_vec();
    let mut out = vec![initial.clone()];
    let mut rhs = vec![0.0; m_int];
    for step in 1..=n_steps {
        for k in 0..m_int {
            let mut av = diag[k] * psi[k];
            if k > 0 {
                av += off * psi[k - 1];
            }
            if k + 1 < m_int {
                av += off * psi[k + 1];
            }
            rhs[k] = psi[k] + half * av;
        }
        psi = solve_tridiagonal(&solver_off, &solver_diag, &solver_off, &rhs)?;
        let max = psi.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if psi.iter().any(|&v| v < -1e-12 * max) {
            return Err(Error::Stability(format!(
                "semigroup state went negative at step {step}; reduce dt"
            )));
        }
        if step % stride == 0 || step == n_steps {
            let mut values = vec![0.0; n];
            values[1..n - 1].copy_from_slice(&psi);
            out.push(SemigroupState {
                time: step as f64 * dt,
                psi: GridField::new(grid, values)?,
                rho_star: initial.rho_star.clone(),
                constants: c,
            });
        }
    }
    Ok(out)
}

/// Density snapshots of the Fokker-Planck flow.
#[derive(Debug, Clone)]
pub struct FokkerPlanckRun {
    pub times: Vec<f64>,
    pub states: Vec<GridPdf>,
}

/// Conservative Crank-Nicolson stepping of `∂_t rho = D Δrho - ∇(b rho)`.
///
/// The flux is written in exponential-fitted form
/// `F = -D w ∇(rho/w)` with `w = exp(∫ b/D)`, so the discrete stationary
/// state is exactly `rho ∝ w` and the full-sum mass is conserved to
/// round-off under the zero-flux walls.
pub fn evolve_fokker_planck(
    rho0: &GridPdf,
    drift: &GridField,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
    c: &PhysicalConstants,
) -> Result<FokkerPlanckRun> {
    ensure_same_grid(&[rho0.field(), drift])?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let stride = snapshot_stride.max(1);
    let grid = rho0.grid();
    let n = grid.len();
    let h = grid.spacing();
    let d = c.diffusion();
    // stationary shape from the drift
    let potential = cumulative_quadrature(&drift.scale(1.0 / d), 0);
    let peak = potential.values().iter().fold(f64::MIN, |m, &v| m.max(v));
    let w: Vec<f64> = potential
        .values()
        .iter()
        .map(|&p| (p - peak).exp())
        .collect();

    // generator L: d rho_i/dt = -(F_{i+1/2} - F_{i-1/2})/h,
    // F_{i+1/2} = -(D/h) wbar (rho_{i+1}/w_{i+1} - rho_i/w_i)
    let mut lower = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n - 1];
    for i in 0..n {
        let wb_right = if i + 1 < n {
            0.5 * (w[i] + w[i + 1])
        } else {
            0.0
        };
        let wb_left = if i > 0 { 0.5 * (w[i - 1] + w[i]) } else { 0.0 };
        let k = d / (h * h);
        diag[i] = -k * (wb_right + wb_left) / w[i];
        if i + 1 < n {
            upper[i] = k * wb_right / w[i + 1];
        }
        if i > 0 {
            lower[i - 1] = k * wb_left / w[i - 1];
        }
    }
    let half = 0.5 * dt;
    let solver_diag: Vec<f64> = diag.iter().map(|&a| 1.0 - half * a).collect();
    let solver_lower: Vec<f64> = lower.iter().map(|&a| -half * a).collect();
    let solver_upper: Vec<f64> = upper.iter().map(|&a| -half * a).collect();

    let mut rho = rho0.values().to_vec();
    let mut run = FokkerPlanckRun {
        times: vec![0.0],
        states: vec![rho0.clone()],
    };
    let mut rhs = vec![0.0; n];
    for step in 1..=n_steps {
        for i in 0..n {
            let mut av = diag[i] * rho[i];
            if i > 0 {
                av += lower[i - 1] * rho[i - 1];
            }
            if i + 1 < n {
                av += upper[i] * rho[i + 1];
            }
            rhs[i] = rho[i] + half * av;
        }
        rho = solve_tridiagonal(&solver_lower, &solver_diag, &solver_upper, &rhs)?;
        if step % stride == 0 || step == n_steps {
            let pdf = GridPdf::new(grid, rho.clone())?;
            let mass = pdf.mass();
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::BoxTooSmall(format!(
                    "mass leak: ∫rho = {mass} at step {step}"
                )));
            }
            run.times.push(step as f64 * dt);
            run.states.push(pdf);
        }
    }
    Ok(run)
}

/// Ground-state reconstruction of the stationary density and drift from a
/// (renormalizable) potential: `rho_*^{1/2}` is the bottom eigenvector of
/// the semigroup generator and `b = D ∇ln rho_*`.
pub fn drift_from_potential(
    grid: Grid,
    v_ext: &GridField,
    c: &PhysicalConstants,
) -> Result<(GridPdf, GridField, f64)> {
    if v_ext.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.len();
    let h = grid.spacing();
    let d = c.diffusion();
    let scale = 1.0 / (2.0 * c.mass() * d);
    let matrix = SymTridiagonal {
        diag: (1..n - 1)
            .map(|i| 2.0 * d / (h * h) + v_ext.values()[i] * scale)
            .collect(),
        off: vec![-d / (h * h); n - 3],
    };
    let (e0, vec) = matrix.ground_state(1e-14, 2000)?;
    let mut values = vec![0.0; n];
    for (i, &v) in vec.iter().enumerate() {
        values[i + 1] = v * v;
    }
    let rho_star = GridPdf::normalized(grid, values)?;
    let b = log_density_gradient(&rho_star)?.field.scale(d);
    Ok((rho_star, b, e0))
}

/// Hydrodynamical diagnostics of a density trajectory driven by drift `b`.
#[derive(Debug, Clone)]
pub struct BrownianDiagnostics {
    /// `H^- = <(m/2)(v^2 - u^2) - V>` per snapshot; identically zero for
    /// admissible Brownian flows.
    pub h_minus: Vec<f64>,
    /// Kinetic scale `<(m/2) u^2>` per snapshot, for relative comparisons.
    pub osmotic_energy: Vec<f64>,
    /// Interior sup of `∂_t v + v∇v - (1/m)∇(V+Q)` per consecutive pair.
    pub momentum_residual_sup: Vec<f64>,
}

/// `v = b - u` evaluated on one density snapshot.
pub fn current_velocity(
    rho: &GridPdf,
    drift: &GridField,
    c: &PhysicalConstants,
) -> Result<MaskedField> {
    let u = crate::functionals::osmotic_velocity(rho, c)?;
    let v = drift.zip(&u.field, |b, u| b - u);
    let mut values = vec![0.0; rho.grid().len()];
    for i in 0..values.len() {
        if u.mask.is_inside(i) {
            values[i] = v.values()[i];
        }
    }
    Ok(MaskedField::new(
        GridField::new(rho.grid(), values)?,
        u.mask,
    ))
}

pub fn brownian_hydro_residuals(
    run: &FokkerPlanckRun,
    drift: &GridField,
    v_ext: &GridField,
    c: &PhysicalConstants,
) -> Result<BrownianDiagnostics> {
    let mut h_minus = Vec::with_capacity(run.states.len());
    let mut osmotic_energy = Vec::with_capacity(run.states.len());
    let mut momentum = Vec::new();
    let half_m = 0.5 * c.mass();
    for rho in &run.states {
        let u = crate::functionals::osmotic_velocity(rho, c)?;
        let v = current_velocity(rho, drift, c)?;
        let integrand = v
            .field
            .zip(&u.field, |v, u| half_m * (v * v - u * u))
            .zip(v_ext, |kin, pot| kin - pot);
        h_minus.push(expectation(rho, &integrand, &u.mask));
        let kin = u.field.map(|u| half_m * u * u);
        osmotic_energy.push(expectation(rho, &kin, &u.mask));
    }
    for k in 0..run.states.len() - 1 {
        let rho_a = &run.states[k];
        let rho_b = &run.states[k + 1];
        let v_a = current_velocity(rho_a, drift, c)?;
        let v_b = current_velocity(rho_b, drift, c)?;
        let res = momentum_residual(
            rho_a,
            rho_b,
            &v_a.field,
            &v_b.field,
            v_ext,
            run.times[k + 1] - run.times[k],
            c,
            ForceSign::Brownian,
        )?;
        let interior = res.mask.shrink(20);
        let mut sup = 0.0f64;
        for i in 0..res.field.len() {
            if interior.is_inside(i) {
                sup = sup.max(res.field.values()[i].abs());
            }
        }
        momentum.push(sup);
    }
    Ok(BrownianDiagnostics {
        h_minus,
        osmotic_energy,
        momentum_residual_sup: momentum,
    })
}
