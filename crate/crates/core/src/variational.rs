//! Extremum principles: maximum entropy under `<V> = zeta`, the Fisher
//! information extremum as a ground-state problem, and the constrained
//! Fisher action whose gamma branches dispatch to the quantum, Brownian and
//! classical evolutions.

use crate::brownian::{drift_from_potential, evolve_fokker_planck};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::functionals::{fisher_information, shannon_entropy};
use crate::grid::{ensure_same_grid, gradient, quadrature, GridField, GridPdf};
use crate::linalg::SymTridiagonal;
use crate::quantum::{evolve_quantum, madelung_fields, WaveFunction};

/// Result of a constrained extremization.
#[derive(Debug, Clone)]
pub struct ExtremumSolution {
    pub rho: GridPdf,
    pub multiplier: f64,
    pub constraint_value: f64,
    pub achieved_constraint: f64,
    pub functional_value: f64,
    /// Set when the constraint could not select the multiplier (constant V).
    pub degenerate: bool,
}

const CONSTRAINT_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 60;

fn mean_v_under_tilt(v_ext: &GridField, alpha: f64) -> (f64, GridPdf) {
    // rho_alpha ∝ exp(alpha V); exponent shifted by its max for stability
    let shift = v_ext
        .values()
        .iter()
        .map(|&v| alpha * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights = v_ext.map(|v| (alpha * v - shift).exp());
    let rho =
        GridPdf::normalized(v_ext.grid(), weights.into_values()).expect("positive tilt weights");
    let mean = quadrature(&rho.field().zip(v_ext, |r, v| r * v));
    (mean, rho)
}

/// Maximum-entropy density under the linear constraint `<V> = zeta`:
/// `rho_alpha ∝ exp(alpha V)` with the multiplier fixed by bisection.
pub fn max_entropy_pdf(v_ext: &GridField, zeta: f64) -> Result<ExtremumSolution> {
    let v_min = v_ext.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = v_ext
        .values()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = v_max.abs().max(v_min.abs()).max(1.0);
    if v_max - v_min < 1e-12 * scale {
        // constant potential: the constraint is independent of alpha
        if (zeta - v_min).abs() > CONSTRAINT_TOL * scale {
            return Err(Error::InfeasibleConstraint(format!(
                "constant V = {v_min} cannot achieve <V> = {zeta}"
            )));
        }
        let rho = GridPdf::normalized(v_ext.grid(), vec![1.0; v_ext.len()])?;
        let functional_value = shannon_entropy(&rho)?;
        return Ok(ExtremumSolution {
            rho,
            multiplier: 0.0,
            constraint_value: zeta,
            achieved_constraint: v_min,
            functional_value,
            degenerate: true,
        });
    }
    if zeta <= v_min || zeta >= v_max {
        return Err(Error::InfeasibleConstraint(format!(
            "<V> = {zeta} is outside the attainable range ({v_min}, {v_max})"
        )));
    }
    // <V>_alpha is increasing in alpha (its derivative is Var_alpha(V) >= 0);
    // verified numerically while the bracket is grown
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut grew = 0;
    while mean_v_under_tilt(v_ext, lo).0 > zeta {
        lo *= 2.0;
        grew += 1;
        if grew > MAX_DOUBLINGS {
            return Err(Error::InfeasibleConstraint(
                "bracket for the entropy multiplier did not close below".into(),
            ));
        }
    }
    grew = 0;
    while mean_v_under_tilt(v_ext, hi).0 < zeta {
        hi *= 2.0;
        grew += 1;
        if grew > MAX_DOUBLINGS {
            return Err(Error::InfeasibleConstraint(
                "bracket for the entropy multiplier did not close above".into(),
            ));
        }
    }
    if mean_v_under_tilt(v_ext, lo).0 > mean_v_under_tilt(v_ext, hi).0 {
        return Err(Error::Inconsistent(
            "<V>_alpha failed the monotonicity check on the bracket".into(),
        ));
    }
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..200 {
        alpha = 0.5 * (lo + hi);
        let (mean, _) = mean_v_under_tilt(v_ext, alpha);
        if (mean - zeta).abs() <= 1e-3 * CONSTRAINT_TOL * zeta.abs().max(1.0) {
            break;
        }
        if mean < zeta {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    let (achieved, rho) = mean_v_under_tilt(v_ext, alpha);
    if (achieved - zeta).abs() > CONSTRAINT_TOL * zeta.abs().max(1.0) {
        return Err(Error::InfeasibleConstraint(format!(
            "bisection stalled: <V> = {achieved} vs target {zeta}"
        )));
    }
    let functional_value = shannon_entropy(&rho)?;
    Ok(ExtremumSolution {
        rho,
        multiplier: alpha,
        constraint_value: zeta,
        achieved_constraint: achieved,
        functional_value,
        degenerate: false,
    })
}

/// Inner solve of the Fisher extremum at fixed multiplier: the extremizing
/// density is the squared positive ground state of `-Δ + (lambda/4) V`.
pub fn fisher_extremum_at(v_ext: &GridField, lambda: f64) -> Result<GridPdf> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "only confining multipliers lambda > 0 are supported, got {lambda}"
        )));
    }
    let grid = v_ext.grid();
    let n = grid.len();
    // confinement screen: (lambda/4)V must grow toward the box walls
    let v_min = v_ext.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let edge = v_ext.values()[0].min(v_ext.values()[n - 1]);
    if edge <= v_min + 1e-12 * (v_min.abs().max(1.0)) {
        return Err(Error::Spectrum(
            "potential does not confine on the box; no bound ground state".into(),
        ));
    }
    let h = grid.spacing();
    let matrix = SymTridiagonal {
        diag: (1..n - 1)
            .map(|i| 2.0 / (h * h) + 0.25 * lambda * v_ext.values()[i])
            .collect(),
        off: vec![-1.0 / (h * h); n - 3],
    };
    let (_, vec) = matrix.ground_state(1e-14, 2000)?;
    let peak = vec.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if vec[0].abs() > 1e-6 * peak || vec[n - 3].abs() > 1e-6 * peak {
        return Err(Error::Spectrum(
            "ground state does not decay in the box; enlarge the domain".into(),
        ));
    }
    let mut values = vec![0.0; n];
    for (i, &v) in vec.iter().enumerate() {
        values[i + 1] = v * v;
    }
    GridPdf::normalized(grid, values)
}

/// Fisher-information extremum under `<V> = zeta`: the multiplier is found
/// by bracketed bisection on the monotone map `lambda -> <V>_lambda`.
pub fn fisher_extremum_pdf(v_ext: &GridField, zeta: f64) -> Result<ExtremumSolution> {
    let mean_at = |lambda: f64| -> Result<(f64, GridPdf)> {
        let rho = fisher_extremum_at(v_ext, lambda)?;
        let mean = quadrature(&rho.field().zip(v_ext, |r, v| r * v));
        Ok((mean, rho))
    };
    // <V>_lambda decreases as confinement tightens; scan a geometric ladder
    // for a sign change, skipping multipliers whose ground state does not
    // fit the box, and verify monotonicity along the way
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for k in -(MAX_DOUBLINGS as i32)..=(MAX_DOUBLINGS as i32) {
        let lambda = 2f64.powi(k);
        let Ok((mean, _)) = mean_at(lambda) else {
            prev = None;
            continue;
        };
        if let Some((prev_lambda, prev_mean)) = prev {
            if prev_mean < mean - 1e-9 * (1.0 + mean.abs()) {
                return Err(Error::Inconsistent(
                    "<V>_lambda failed the monotonicity check on the bracket".into(),
                ));
            }
            if prev_mean >= zeta && mean <= zeta {
                bracket = Some((prev_lambda, lambda));
                break;
            }
        }
        prev = Some((lambda, mean));
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Err(Error::InfeasibleConstraint(format!(
            "no confining multiplier reaches <V> = {zeta} on this box"
        )));
    };
    let mut lambda = (lo * hi).sqrt();
    for _ in 0..200 {
        lambda = 0.5 * (lo + hi);
        let (mean, _) = mean_at(lambda)?;
        if (mean - zeta).abs() <= 1e-3 * CONSTRAINT_TOL * zeta.abs().max(1.0) {
            break;
        }
        if mean > zeta {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let (achieved, rho) = mean_at(lambda)?;
    if (achieved - zeta).abs() > CONSTRAINT_TOL * zeta.abs().max(1.0) {
        return Err(Error::InfeasibleConstraint(format!(
            "bisection stalled: <V> = {achieved} vs target {zeta}"
        )));
    }
    let functional_value = fisher_information(&rho)?;
    Ok(ExtremumSolution {
        rho,
        multiplier: lambda,
        constraint_value: zeta,
        achieved_constraint: achieved,
        functional_value,
        degenerate: false,
    })
}

/// Branch selected by the Fisher-constraint multiplier gamma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherBranch {
    /// `gamma = -m D^2 / 2`: quantum hydrodynamics with `+V`.
    Quantum,
    /// `gamma = +m D^2 / 2`: Brownian hydrodynamics with `-V`.
    Brownian,
    /// `gamma = 0`: the classical Hamilton-Jacobi ensemble.
    Classical,
}

/// Sign with which the external potential enters the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialSign {
    Plus,
    Minus,
}

pub fn branch_for_gamma(gamma: f64, c: &PhysicalConstants) -> Result<FisherBranch> {
    let g0 = 0.5 * c.mass() * c.diffusion() * c.diffusion();
    let tol = 1e-12 * g0;
    if (gamma + g0).abs() <= tol {
        Ok(FisherBranch::Quantum)
    } else if (gamma - g0).abs() <= tol {
        Ok(FisherBranch::Brownian)
    } else if gamma == 0.0 {
        Ok(FisherBranch::Classical)
    } else {
        Err(Error::UnsupportedBranch { gamma })
    }
}

/// Density/current snapshots of a dispatched branch evolution.
#[derive(Debug, Clone)]
pub struct BranchEvolution {
    pub branch: FisherBranch,
    pub times: Vec<f64>,
    pub rho: Vec<GridPdf>,
    pub v: Vec<GridField>,
}

/// Evolves the Euler-Lagrange system of the constrained-Fisher action.
///
/// The three admissible multipliers reuse the corresponding evolvers as a
/// shared code path: the quantum branch wraps `(rho0, s0)` into a state and
/// runs the Schrodinger stepper, the Brownian branch reconstructs the
/// stationary density of `V` and runs the Fokker-Planck stepper, and
/// `gamma = 0` integrates the classical Hamilton-Jacobi pair directly.
#[allow(clippy::too_many_arguments)]
pub fn constrained_fisher_branches(
    rho0: &GridPdf,
    s0: &GridField,
    v_ext: &GridField,
    gamma: f64,
    sign: PotentialSign,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
    c: &PhysicalConstants,
) -> Result<BranchEvolution> {
    ensure_same_grid(&[rho0.field(), s0, v_ext])?;
    let branch = branch_for_gamma(gamma, c)?;
    match branch {
        FisherBranch::Quantum => {
            if sign != PotentialSign::Plus {
                return Err(Error::Domain(
                    "the quantum branch is derived for the confining sign +V".into(),
                ));
            }
            let psi0 = WaveFunction::from_polar(rho0, s0, *c)?;
            let run = evolve_quantum(&psi0, v_ext, dt, n_steps, snapshot_stride)?;
            let mut rho = Vec::with_capacity(run.states.len());
            let mut v = Vec::with_capacity(run.states.len());
            for i in 0..run.states.len() {
                let f = madelung_fields(&run.states[i], run.times[i])?;
                rho.push(f.rho);
                v.push(f.v);
            }
            Ok(BranchEvolution {
                branch,
                times: run.times,
                rho,
                v,
            })
        }
        FisherBranch::Brownian => {
            if sign != PotentialSign::Minus {
                return Err(Error::Domain(
                    "the Brownian branch is derived for the -V action".into(),
                ));
            }
            let (_, b, _) = drift_from_potential(rho0.grid(), v_ext, c)?;
            let run = evolve_fokker_planck(rho0, &b, dt, n_steps, snapshot_stride, c)?;
            let mut v = Vec::with_capacity(run.states.len());
            for rho in &run.states {
                let cur = crate::brownian::current_velocity(rho, &b, c)?;
                v.push(cur.field);
            }
            Ok(BranchEvolution {
                branch,
                times: run.times,
                rho: run.states,
                v,
            })
        }
        FisherBranch::Classical => {
            classical_hj_evolution(rho0, s0, v_ext, sign, dt, n_steps, snapshot_stride, c)
        }
    }
}

/// RK4 integration of the classical ensemble equations
/// `∂_t s = -(∇s)^2/2m ∓ V`, `∂_t rho = -∇(rho ∇s/m)` with conservative
/// central fluxes and zero-flux walls.
#[allow(clippy::too_many_arguments)]
fn classical_hj_evolution(
    rho0: &GridPdf,
    s0: &GridField,
    v_ext: &GridField,
    sign: PotentialSign,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
    c: &PhysicalConstants,
) -> Result<BranchEvolution> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let stride = snapshot_stride.max(1);
    let grid = rho0.grid();
    let n = grid.len();
    let h = grid.spacing();
    let m = c.mass();
    let sgn = match sign {
        PotentialSign::Plus => 1.0,
        PotentialSign::Minus => -1.0,
    };

    let derivative = |rho: &[f64], s: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let s_field = GridField::new(grid, s.to_vec()).expect("finite action");
        let grad_s = gradient(&s_field).expect("grid large enough");
        let mut drho = vec![0.0; n];
        // conservative central flux F_{i+1/2} = avg(rho v)
        let mut flux = vec![0.0; n + 1];
        for i in 0..n - 1 {
            let va = grad_s.values()[i] / m;
            let vb = grad_s.values()[i + 1] / m;
            flux[i + 1] = 0.5 * (rho[i] * va + rho[i + 1] * vb);
        }
        for i in 0..n {
            drho[i] = -(flux[i + 1] - flux[i]) / h;
        }
        let ds = (0..n)
            .map(|i| -grad_s.values()[i] * grad_s.values()[i] / (2.0 * m) - sgn * v_ext.values()[i])
            .collect();
        (drho, ds)
    };

    let mut rho = rho0.values().to_vec();
    let mut s = s0.values().to_vec();
    let v_of = |s: &[f64]| -> Result<GridField> {
        let field = GridField::new(grid, s.to_vec())?;
        Ok(gradient(&field)?.scale(1.0 / m))
    };
    let mut out = BranchEvolution {
        branch: FisherBranch::Classical,
        times: vec![0.0],
        rho: vec![rho0.clone()],
        v: vec![v_of(&s)?],
    };
    for step in 1..=n_steps {
        let (k1r, k1s) = derivative(&rho, &s);
        let r2: Vec<f64> = rho
            .iter()
            .zip(&k1r)
            .map(|(a, k)| a + 0.5 * dt * k)
            .collect();
        let s2: Vec<f64> = s.iter().zip(&k1s).map(|(a, k)| a + 0.5 * dt * k).collect();
        let (k2r, k2s) = derivative(&r2, &s2);
        let r3: Vec<f64> = rho
            .iter()
            .zip(&k2r)
            .map(|(a, k)| a + 0.5 * dt * k)
            .collect();
        let s3: Vec<f64> = s.iter().zip(&k2s).map(|(a, k)| a + 0.5 * dt * k).collect();
        let (k3r, k3s) = derivative(&r3, &s3);
        let r4: Vec<f64> = rho.iter().zip(&k3r).map(|(a, k)| a + dt * k).collect();
        let s4: Vec<f64> = s.iter().zip(&k3s).map(|(a, k)| a + dt * k).collect();
        let (k4r, k4s) = derivative(&r4, &s4);
        for i in 0..n {
            rho[i] += dt / 6.0 * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
            s[i] += dt / 6.0 * (k1s[i] + 2.0 * k2s[i] + 2.0 * k3s[i] + k4s[i]);
        }
        if step % stride == 0 || step == n_steps {
            out.times.push(step as f64 * dt);
            out.rho.push(GridPdf::new(grid, rho.clone())?);
            out.v.push(v_of(&s)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::scenario::{gaussian_pdf, oscillator_stationary_pdf, Potential};

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn max_entropy_recovers_gaussian_multipliers() {
        let grid = Grid::new(-8.0, 8.0, 2001).unwrap();
        let v = GridField::from_fn(grid, |x| x * x).unwrap();
        let sol = max_entropy_pdf(&v, 0.5).unwrap();
        assert!(
            (sol.multiplier + 1.0).abs() < 1e-6,
            "alpha {}",
            sol.multiplier
        );
        assert!((sol.achieved_constraint - 0.5).abs() < 1e-6);
        let sol = max_entropy_pdf(&v, 0.25).unwrap();
        assert!(
            (sol.multiplier + 2.0).abs() < 1e-6,
            "alpha {}",
            sol.multiplier
        );
    }

    #[test]
    fn max_entropy_flags_constant_potential() {
        let grid = Grid::new(-1.0, 1.0, 101).unwrap();
        let v = GridField::constant(grid, 3.0);
        let sol = max_entropy_pdf(&v, 3.0).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.multiplier, 0.0);
        let spread = sol
            .rho
            .values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(
            (spread - sol.rho.values()[0]).abs() < 1e-12,
            "uniform density"
        );
        assert!(max_entropy_pdf(&v, 4.0).is_err());
    }

    #[test]
    fn max_entropy_rejects_unreachable_targets() {
        let grid = Grid::new(-2.0, 2.0, 401).unwrap();
        let v = GridField::from_fn(grid, |x| x * x).unwrap();
        assert!(matches!(
            max_entropy_pdf(&v, 10.0),
            Err(Error::InfeasibleConstraint(_))
        ));
        assert!(max_entropy_pdf(&v, -0.1).is_err());
    }

    #[test]
    fn max_entropy_beats_constrained_competitors() {
        let grid = Grid::new(-8.0, 8.0, 1201).unwrap();
        let v = GridField::from_fn(grid, |x| x * x).unwrap();
        let zeta = 0.5;
        let sol = max_entropy_pdf(&v, zeta).unwrap();
        let s_star = sol.functional_value;
        let mut seed = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            // random smooth competitor re-tilted onto the constraint
            let c1 = 4.0 * next() - 2.0;
            let w1 = 0.3 + next();
            let c2 = 4.0 * next() - 2.0;
            let w2 = 0.3 + next();
            let raw = GridField::from_fn(grid, |x| {
                (-(x - c1) * (x - c1) / (2.0 * w1 * w1)).exp()
                    + 0.7 * (-(x - c2) * (x - c2) / (2.0 * w2 * w2)).exp()
            })
            .unwrap();
            let base = GridPdf::normalized(grid, raw.into_values()).unwrap();
            // tilt exp(tau V) to match <V> = zeta
            let mut lo = -40.0;
            let mut hi = 4.0;
            let mean_of = |tau: f64| {
                let t = base.field().zip(&v, |r, vv| r * (tau * vv).exp());
                let z = quadrature(&t);
                quadrature(&t.zip(&v, |r, vv| r * vv)) / z
            };
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mean_of(mid) < zeta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let tilted = GridPdf::normalized(
                grid,
                base.field()
                    .zip(&v, |r, vv| r * (tau * vv).exp())
                    .into_values(),
            )
            .unwrap();
            if (mean_of(tau) - zeta).abs() > 1e-4 {
                continue; // competitor could not reach the constraint set
            }
            let s = shannon_entropy(&tilted).unwrap();
            assert!(
                s <= s_star + 1e-6,
                "competitor entropy {s} beats maximum {s_star}"
            );
        }
    }

    #[test]
    fn fisher_family_extremizer_is_the_oscillator_density() {
        let grid = Grid::new(-6.0, 6.0, 6001).unwrap();
        let exact = oscillator_stationary_pdf(grid).unwrap();
        for lambda in [2.0, 8.0, 20.0] {
            let v = GridField::from_fn(grid, |x| 4.0 / lambda * (x * x - 1.0)).unwrap();
            let rho = fisher_extremum_at(&v, lambda).unwrap();
            let mut sup = 0.0f64;
            for (a, b) in rho.values().iter().zip(exact.values()) {
                sup = sup.max((a - b).abs());
            }
            assert!(sup < 1e-5, "lambda {lambda}: sup {sup}");
        }
    }

    #[test]
    fn brownian_and_quantum_multiplier_dictionaries_coincide() {
        // lambda = 2/(m D^2) and lambda = 8 m / hbar^2 are both 8 at the
        // default constants and must select the same extremizer
        let cc = c();
        let from_diffusion = 2.0 / (cc.mass() * cc.diffusion() * cc.diffusion());
        let from_quantum = 8.0 * cc.mass() / (cc.hbar() * cc.hbar());
        assert_eq!(from_diffusion, 8.0);
        assert_eq!(from_quantum, 8.0);
        let grid = Grid::new(-6.0, 6.0, 3001).unwrap();
        let v = GridField::from_fn(grid, |x| 0.5 * (x * x - 1.0)).unwrap();
        let a = fisher_extremum_at(&v, from_diffusion).unwrap();
        let b = fisher_extremum_at(&v, from_quantum).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn fisher_constraint_closes() {
        let grid = Grid::new(-8.0, 8.0, 2001).unwrap();
        let v = GridField::from_fn(grid, |x| x * x).unwrap();
        let sol = fisher_extremum_pdf(&v, 0.25).unwrap();
        assert!(
            (sol.achieved_constraint - 0.25).abs() < 1e-6,
            "constraint {}",
            sol.achieved_constraint
        );
        // analytic multiplier: <x^2> = 1/sqrt(lambda)
        assert!(
            (sol.multiplier - 16.0).abs() < 1e-3,
            "lambda {}",
            sol.multiplier
        );
    }

    #[test]
    fn fisher_extremizer_is_stationary() {
        let grid = Grid::new(-6.0, 6.0, 6001).unwrap();
        let v = GridField::from_fn(grid, |x| x * x).unwrap();
        let sol = fisher_extremum_pdf(&v, 0.25).unwrap();
        let rho = &sol.rho;
        // perturbation rho(1 + eps w) with w orthogonal to 1 and V in the
        // rho-weighted inner product, so normalization and constraint are
        // preserved to first order
        let raw = GridField::from_fn(grid, |x| (1.3 * x).sin() + 0.5 * (0.7 * x).cos()).unwrap();
        let ip = |f: &GridField, g: &GridField| {
            quadrature(&rho.field().zip(f, |r, a| r * a).zip(g, |ra, b| ra * b))
        };
        let one = GridField::constant(grid, 1.0);
        // project out span{1, V} in the rho-weighted inner product; the two
        // directions are not orthogonal, so solve the 2x2 normal equations
        let m00 = ip(&one, &one);
        let m01 = ip(&one, &v);
        let m11 = ip(&v, &v);
        let r0 = ip(&raw, &one);
        let r1 = ip(&raw, &v);
        let det = m00 * m11 - m01 * m01;
        let a = (r0 * m11 - r1 * m01) / det;
        let b = (m00 * r1 - m01 * r0) / det;
        let w = raw.zip(&v, move |r, vv| r - a - b * vv);
        assert!(ip(&w, &one).abs() < 1e-10);
        assert!(ip(&w, &v).abs() < 1e-10);
        let norm = ip(&w, &w).sqrt();
        let eps = 1e-4;
        let f_at = |e: f64| {
            let pert = GridPdf::normalized(
                grid,
                rho.field()
                    .zip(&w, |r, ww| (r * (1.0 + e * ww)).max(0.0))
                    .into_values(),
            )
            .unwrap();
            fisher_information(&pert).unwrap()
        };
        let derivative = (f_at(eps) - f_at(-eps)) / (2.0 * eps) / norm;
        assert!(
            derivative.abs() < 1e-6,
            "first-order Fisher change {derivative} per unit norm"
        );
    }

    #[test]
    fn gamma_dispatch_table() {
        let cc = c();
        assert_eq!(
            branch_for_gamma(-0.125, &cc).unwrap(),
            FisherBranch::Quantum
        );
        assert_eq!(
            branch_for_gamma(0.125, &cc).unwrap(),
            FisherBranch::Brownian
        );
        assert_eq!(branch_for_gamma(0.0, &cc).unwrap(), FisherBranch::Classical);
        assert!(matches!(
            branch_for_gamma(0.3, &cc),
            Err(Error::UnsupportedBranch { .. })
        ));
    }

    #[test]
    fn quantum_branch_keeps_the_ground_state() {
        let grid = Grid::new(-8.0, 8.0, 1601).unwrap();
        let cc = c();
        let v = Potential::RescaledOscillator.sample(grid, &cc).unwrap();
        let (_, psi) = crate::quantum::ground_state(grid, &v, cc).unwrap();
        let rho0 = psi.density().unwrap();
        let s0 = GridField::zeros(grid);
        let out = constrained_fisher_branches(
            &rho0,
            &s0,
            &v,
            -0.125,
            PotentialSign::Plus,
            1e-3,
            200,
            200,
            &cc,
        )
        .unwrap();
        let last = out.rho.last().unwrap();
        let mut sup = 0.0f64;
        for (a, b) in last.values().iter().zip(rho0.values()) {
            sup = sup.max((a - b).abs());
        }
        assert!(sup < 1e-8, "quantum branch drift {sup}");
    }

    #[test]
    fn brownian_branch_is_the_fokker_planck_run() {
        let grid = Grid::new(-8.0, 8.0, 1601).unwrap();
        let cc = c();
        let v = Potential::RescaledOscillator.sample(grid, &cc).unwrap();
        let rho0 = gaussian_pdf(grid, 1.0, 0.5).unwrap();
        let out = constrained_fisher_branches(
            &rho0,
            &GridField::zeros(grid),
            &v,
            0.125,
            PotentialSign::Minus,
            1e-3,
            500,
            500,
            &cc,
        )
        .unwrap();
        // shared code path: must agree with a direct Fokker-Planck run
        let (_, b, _) = drift_from_potential(grid, &v, &cc).unwrap();
        let direct = evolve_fokker_planck(&rho0, &b, 1e-3, 500, 500, &cc).unwrap();
        let mut sup = 0.0f64;
        for (a, bb) in out
            .rho
            .last()
            .unwrap()
            .values()
            .iter()
            .zip(direct.states.last().unwrap().values())
        {
            sup = sup.max((a - bb).abs());
        }
        assert!(sup < 1e-10, "dispatch mismatch {sup}");
    }

    #[test]
    fn classical_branch_transports_rigidly() {
        let grid = Grid::new(-8.0, 8.0, 1601).unwrap();
        let cc = c();
        let rho0 = gaussian_pdf(grid, -0.5, 0.6).unwrap();
        let v0 = 0.5;
        let s0 = GridField::from_fn(grid, |x| cc.mass() * v0 * x).unwrap();
        let out = constrained_fisher_branches(
            &rho0,
            &s0,
            &GridField::zeros(grid),
            0.0,
            PotentialSign::Plus,
            1e-3,
            1000,
            1000,
            &cc,
        )
        .unwrap();
        let last = out.rho.last().unwrap();
        assert!(
            (last.mean() - (-0.5 + v0)).abs() < 1e-3,
            "transported center {}",
            last.mean()
        );
        // velocity stays uniform
        let v_last = out.v.last().unwrap();
        let mid = grid.len() / 2;
        assert!((v_last.values()[mid] - v0).abs() < 1e-10);
    }

    #[test]
    fn wrong_sign_requests_are_refused() {
        let grid = Grid::new(-8.0, 8.0, 1601).unwrap();
        let cc = c();
        let v = Potential::RescaledOscillator.sample(grid, &cc).unwrap();
        let rho0 = gaussian_pdf(grid, 0.0, 0.7).unwrap();
        let s0 = GridField::zeros(grid);
        assert!(constrained_fisher_branches(
            &rho0,
            &s0,
            &v,
            -0.125,
            PotentialSign::Minus,
            1e-3,
            10,
            10,
            &cc
        )
        .is_err());
        assert!(constrained_fisher_branches(
            &rho0,
            &s0,
            &v,
            0.125,
            PotentialSign::Plus,
            1e-3,
            10,
            10,
            &cc
        )
        .is_err());
    }
}
