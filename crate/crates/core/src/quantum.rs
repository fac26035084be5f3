//! Schrodinger evolution by norm-preserving Crank-Nicolson stepping,
//! Madelung field extraction, the positive invariant `H`, and the quantum
//! Hamilton-Jacobi residual diagnostics.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::functionals::quantum_potential;
use crate::grid::{
    cumulative_quadrature, ensure_same_grid, expectation, gradient, quadrature, GridField, GridPdf,
    Mask, MaskedField, DENSITY_FLOOR,
};
use crate::hydro::{momentum_residual, ForceSign};
use crate::linalg::{solve_complex_tridiagonal, SymTridiagonal};
use num_complex::Complex64;

/// Boundary-magnitude bound enforced when a state is constructed.
const CONFINEMENT_TOL: f64 = 1e-8;
/// Leakage bound during evolution; crossing it aborts the run.
const LEAK_TOL: f64 = 1e-6;

/// Complex state on a grid with homogeneous box boundaries.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: crate::grid::Grid,
    values: Vec<Complex64>,
    constants: PhysicalConstants,
}

impl WaveFunction {
    /// Validates, pins the boundary nodes to zero and normalizes.
    pub fn new(
        grid: crate::grid::Grid,
        values: Vec<Complex64>,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid("state length mismatch".into()));
        }
        if let Some(index) = values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite { index });
        }
        let max = values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if max == 0.0 {
            return Err(Error::DegenerateDensity("zero wave function".into()));
        }
        let boundary = values[0].norm().max(values[values.len() - 1].norm());
        if boundary > CONFINEMENT_TOL * max {
            return Err(Error::BoxTooSmall(format!(
                "boundary magnitude {:.3e} of peak exceeds {CONFINEMENT_TOL:.0e}",
                boundary / max
            )));
        }
        let mut psi = Self {
            grid,
            values,
            constants,
        };
        psi.values[0] = Complex64::default();
        let last = psi.values.len() - 1;
        psi.values[last] = Complex64::default();
        psi.normalize();
        Ok(psi)
    }

    fn from_parts_unchecked(
        grid: crate::grid::Grid,
        values: Vec<Complex64>,
        constants: PhysicalConstants,
    ) -> Self {
        Self {
            grid,
            values,
            constants,
        }
    }

    /// Real nonnegative state `rho^{1/2}`.
    pub fn from_density(rho: &GridPdf, constants: PhysicalConstants) -> Result<Self> {
        let values = rho
            .values()
            .iter()
            .map(|&r| Complex64::new(r.sqrt(), 0.0))
            .collect();
        Self::new(rho.grid(), values, constants)
    }

    /// Polar state `rho^{1/2} e^{i s / hbar}`.
    pub fn from_polar(
        rho: &GridPdf,
        action: &GridField,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        ensure_same_grid(&[rho.field(), action])?;
        let hbar = constants.hbar();
        let values = rho
            .values()
            .iter()
            .zip(action.values())
            .map(|(&r, &s)| Complex64::from_polar(r.sqrt(), s / hbar))
            .collect();
        Self::new(rho.grid(), values, constants)
    }

    pub fn grid(&self) -> crate::grid::Grid {
        self.grid
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(∫ |psi|^2 dx)^{1/2}` by trapezoid rule.
    pub fn norm(&self) -> f64 {
        let density = GridField::new(
            self.grid,
            self.values.iter().map(|z| z.norm_sqr()).collect(),
        )
        .expect("finite density");
        quadrature(&density).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for z in self.values.iter_mut() {
                *z /= n;
            }
        }
    }

    pub fn density(&self) -> Result<GridPdf> {
        GridPdf::new(
            self.grid,
            self.values.iter().map(|z| z.norm_sqr()).collect(),
        )
    }

    /// Largest boundary-adjacent magnitude relative to the peak.
    pub fn boundary_fraction(&self) -> f64 {
        let max = self.values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if max == 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        self.values[1].norm().max(self.values[n - 2].norm()) / max
    }
}

/// Time series of states emitted by the stepper.
#[derive(Debug, Clone)]
pub struct QuantumRun {
    pub times: Vec<f64>,
    pub states: Vec<WaveFunction>,
}

impl QuantumRun {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(WaveFunction::norm).collect()
    }

    pub fn fields(&self, index: usize) -> Result<HydroFields> {
        madelung_fields(&self.states[index], self.times[index])
    }
}

/// Crank-Nicolson evolution of `i hbar ∂_t psi = [-hbar^2/2m Δ + V] psi`
/// with Dirichlet box boundaries, keeping every `snapshot_stride`-th state.
///
/// The Cayley form conserves the discrete norm exactly; a per-step leakage
/// check aborts with a box error when probability reaches the walls.
pub fn evolve_quantum(
    psi0: &WaveFunction,
    v_ext: &GridField,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
) -> Result<QuantumRun> {
    if v_ext.grid() != psi0.grid() {
        return Err(Error::GridMismatch);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let c = psi0.constants();
    let hbar = c.hbar();
    if dt * v_ext.max_abs() / hbar >= 0.5 {
        return Err(Error::Domain(format!(
            "dt max|V|/hbar = {} exceeds the 0.5 sanity bound",
            dt * v_ext.max_abs() / hbar
        )));
    }
    let stride = snapshot_stride.max(1);
    let grid = psi0.grid();
    let n = grid.len();
    let h = grid.spacing();
    let kinetic = hbar * hbar / (2.0 * c.mass() * h * h);
    // interior Hamiltonian, Dirichlet walls
    let m_interior = n - 2;
    let a = dt / (2.0 * hbar);
    let mut diag_plus = Vec::with_capacity(m_interior);
    for k in 0..m_interior {
        let hdiag = 2.0 * kinetic + v_ext.values()[k + 1];
        diag_plus.push(Complex64::new(1.0, a * hdiag));
    }
    let off_plus = vec![Complex64::new(0.0, -a * kinetic); m_interior - 1];

    let mut psi = psi0.clone();
    let mut run = QuantumRun {
        times: vec![0.0],
        states: vec![psi.clone()],
    };
    let mut interior: Vec<Complex64> = psi.values[1..n - 1].to_vec();
    let mut rhs = vec![Complex64::default(); m_interior];
    for step in 1..=n_steps {
        // rhs = (I - i a H) psi
        for k in 0..m_interior {
            let hdiag = 2.0 * kinetic + v_ext.values()[k + 1];
            let mut hv = hdiag * interior[k];
            if k > 0 {
                hv -= kinetic * interior[k - 1];
            }
            if k + 1 < m_interior {
                hv -= kinetic * interior[k + 1];
            }
            rhs[k] = interior[k] - Complex64::new(0.0, a) * hv;
        }
        interior = solve_complex_tridiagonal(&diag_plus, &off_plus, &rhs)?;

        let max = interior.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let edge = interior[0].norm().max(interior[m_interior - 1].norm());
        if edge > LEAK_TOL * max {
            return Err(Error::BoxTooSmall(format!(
                "boundary leakage {:.3e} at step {step}",
                edge / max
            )));
        }
        if step % stride == 0 || step == n_steps {
            let mut values = vec![Complex64::default(); n];
            values[1..n - 1].copy_from_slice(&interior);
            psi = WaveFunction::from_parts_unchecked(grid, values, c);
            run.times.push(step as f64 * dt);
            run.states.push(psi.clone());
        }
    }
    Ok(run)
}

/// Discrete ground state of `-hbar^2/2m Δ + V` on the box, by inverse power
/// iteration; the state is trapezoid-normalized and real nonnegative.
pub fn ground_state(
    grid: crate::grid::Grid,
    v_ext: &GridField,
    c: PhysicalConstants,
) -> Result<(f64, WaveFunction)> {
    if v_ext.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let n = grid.len();
    let h = grid.spacing();
    let kinetic = c.hbar().powi(2) / (2.0 * c.mass() * h * h);
    let matrix = SymTridiagonal {
        diag: (1..n - 1)
            .map(|i| 2.0 * kinetic + v_ext.values()[i])
            .collect(),
        off: vec![-kinetic; n - 3],
    };
    let (value, vec) = matrix.ground_state(1e-14, 2000)?;
    let mut values = vec![Complex64::default(); n];
    for (i, &v) in vec.iter().enumerate() {
        values[i + 1] = Complex64::new(v, 0.0);
    }
    let mut psi = WaveFunction::from_parts_unchecked(grid, values, c);
    psi.normalize();
    if psi.boundary_fraction() > LEAK_TOL {
        return Err(Error::BoxTooSmall(
            "ground state touches the box walls; enlarge the domain".into(),
        ));
    }
    Ok((value, psi))
}

/// Shifts the potential so the discrete ground eigenvalue is zero; returns
/// the shifted field and the eigenvalue that was subtracted.
pub fn renormalize_ground(
    grid: crate::grid::Grid,
    v_ext: &GridField,
    c: PhysicalConstants,
) -> Result<(GridField, f64)> {
    let (e0, _) = ground_state(grid, v_ext, c)?;
    Ok((v_ext.map(|v| v - e0), e0))
}

/// Madelung fields extracted from one state: density, current and osmotic
/// velocities, quantum potential, and the action reconstructed from `m v`.
#[derive(Debug, Clone)]
pub struct HydroFields {
    pub rho: GridPdf,
    pub s: GridField,
    pub v: GridField,
    pub u: GridField,
    pub q: GridField,
    pub mask: Mask,
    pub time: f64,
}

impl HydroFields {
    pub fn grid(&self) -> crate::grid::Grid {
        self.rho.grid()
    }
}

/// Extracts `(rho, s, v, u, Q)` from a state.
///
/// The current velocity comes from the quotient form `(hbar/m) Im(∇psi/psi)`;
/// the action is the cumulative integral of `m v` anchored to zero at the
/// leftmost unmasked node, which dodges phase unwrapping near nodes of `psi`.
pub fn madelung_fields(psi: &WaveFunction, time: f64) -> Result<HydroFields> {
    let rho = psi.density()?;
    let mask = rho.support_mask();
    if mask.count() == 0 {
        return Err(Error::DegenerateDensity("state has no support".into()));
    }
    let c = psi.constants();
    let grid = psi.grid();
    let re = GridField::new(grid, psi.values().iter().map(|z| z.re).collect())?;
    let im = GridField::new(grid, psi.values().iter().map(|z| z.im).collect())?;
    let dre = gradient(&re)?;
    let dim = gradient(&im)?;
    let mut v_values = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            let dens = rho.values()[i].max(DENSITY_FLOOR);
            v_values[i] = c.hbar() / c.mass()
                * (re.values()[i] * dim.values()[i] - im.values()[i] * dre.values()[i])
                / dens;
        }
    }
    let v = GridField::new(grid, v_values)?;
    let u = crate::functionals::osmotic_velocity(&rho, &c)?;
    let q = quantum_potential(&rho, &c)?;
    let anchor = mask.first_inside().expect("nonempty mask");
    let s = cumulative_quadrature(&v.scale(c.mass()), anchor);
    Ok(HydroFields {
        rho,
        s,
        v,
        u: u.field,
        q: q.field,
        mask,
        time,
    })
}

/// `H(t) = <(m/2)(u^2 + v^2) + V>`, the conserved positive functional of the
/// quantum flow, evaluated on every snapshot.
pub fn quantum_invariant_h(run: &QuantumRun, v_ext: &GridField) -> Result<Vec<f64>> {
    let mut series = Vec::with_capacity(run.states.len());
    for (i, state) in run.states.iter().enumerate() {
        let f = run.fields(i)?;
        let half_m = 0.5 * state.constants().mass();
        let energy =
            f.u.zip(&f.v, |u, v| u * u + v * v)
                .zip(v_ext, |kin, pot| half_m * kin + pot);
        series.push(expectation(&f.rho, &energy, &f.mask));
    }
    Ok(series)
}

/// Pointwise residual of `∂_t s + (∇s)^2/2m + V + Q = 0` between two
/// snapshots, quotiented by the s-gauge: the action is defined only up to a
/// spatial constant per time, so the density-weighted spatial mean of the
/// raw residual (the gauge drift rate) is subtracted before reporting.
pub fn hj_residual_quantum(
    a: &HydroFields,
    b: &HydroFields,
    v_ext: &GridField,
    c: &PhysicalConstants,
) -> Result<MaskedField> {
    ensure_same_grid(&[a.rho.field(), b.rho.field(), v_ext])?;
    let dt = b.time - a.time;
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::Domain("snapshots must be at distinct times".into()));
    }
    let grid = a.grid();
    let ds_dt = b.s.zip(&a.s, |sb, sa| (sb - sa) / dt);
    let m = c.mass();
    let grad_s_a = gradient(&a.s)?;
    let grad_s_b = gradient(&b.s)?;
    let mask = a.mask.intersect(&b.mask).shrink(3);
    let mut raw = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            let kin =
                0.5 * (grad_s_a.values()[i].powi(2) + grad_s_b.values()[i].powi(2)) / (2.0 * m);
            let pot = v_ext.values()[i] + 0.5 * (a.q.values()[i] + b.q.values()[i]);
            raw[i] = ds_dt.values()[i] + kin + pot;
        }
    }
    let raw = GridField::new(grid, raw)?;
    let rho_mid = a.rho.field().zip(b.rho.field(), |x, y| 0.5 * (x + y));
    let weight = crate::grid::quadrature_masked(&rho_mid, &mask);
    let mean = crate::grid::quadrature_masked(&rho_mid.zip(&raw, |r, v| r * v), &mask) / weight;
    let mut values = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if mask.is_inside(i) {
            values[i] = raw.values()[i] - mean;
        }
    }
    Ok(MaskedField::new(GridField::new(grid, values)?, mask))
}

/// Gradient-form residual `∂_t v + v ∇v + (1/m) ∇(V+Q)` between snapshots.
pub fn hj_residual_gradient_form(
    a: &HydroFields,
    b: &HydroFields,
    v_ext: &GridField,
    c: &PhysicalConstants,
) -> Result<MaskedField> {
    momentum_residual(
        &a.rho,
        &b.rho,
        &a.v,
        &b.v,
        v_ext,
        b.time - a.time,
        c,
        ForceSign::Quantum,
    )
}
