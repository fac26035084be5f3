//! Subcommand execution: builds the scenario from the configuration, runs
//! the requested module and writes CSV outputs plus a run manifest.

use crate::config::{serialize, ScenarioConfig};
use qpot_core::brownian::{
    brownian_hydro_residuals, current_velocity, drift_from_potential, evolve_fokker_planck,
};
use qpot_core::csvio;
use qpot_core::error::Error as CoreError;
use qpot_core::functionals::{inequality_report, osmotic_pressure, osmotic_velocity};
use qpot_core::grid::{expectation, quadrature, GridField};
use qpot_core::kernels::{
    heat_kernel, mehler_kernel, ou_transition, schrodinger_propagator, PropagatorKind,
};
use qpot_core::kinetic::{large_friction_moments, pressure_balance_residual, regime_bound};
use qpot_core::paths::{estimate_drift_empirical, simulate_sde, DriftDirection};
use qpot_core::quantum::{
    evolve_quantum, madelung_fields, quantum_invariant_h, renormalize_ground, WaveFunction,
};
use qpot_core::recoil::{recoil_trajectory, ImpulseBranch, MatterState};
use qpot_core::scenario::Potential;
use qpot_core::variational::{fisher_extremum_pdf, max_entropy_pdf};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct RunError {
    pub message: String,
    /// Process exit code: 2 for configuration/input errors, 3 for numerics.
    pub code: i32,
}

impl RunError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    fn numerics(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 3,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Stability(_)
            | CoreError::BoxTooSmall(_)
            | CoreError::Spectrum(_)
            | CoreError::Inconsistent(_)
            | CoreError::DegenerateDensity(_)
            | CoreError::NotNormalized { .. } => 3,
            _ => 2,
        };
        Self {
            message: e.to_string(),
            code,
        }
    }
}

pub struct Emitter {
    directory: PathBuf,
    files: BTreeMap<String, String>,
}

impl Emitter {
    pub fn new(directory: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(directory)
            .map_err(|e| RunError::config(format!("cannot create output directory: {e}")))?;
        Ok(Self {
            directory: directory.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: String) -> Result<(), RunError> {
        std::fs::write(self.directory.join(name), &contents)
            .map_err(|e| RunError::config(format!("cannot write {name}: {e}")))?;
        self.files.insert(name.to_string(), contents);
        Ok(())
    }

    /// Run manifest: configuration echo, per-file content hashes, versions.
    pub fn finish(mut self, config: &ScenarioConfig) -> Result<(), RunError> {
        let mut manifest = String::from("[config]\n");
        for line in serialize(config).lines() {
            manifest.push_str(line);
            manifest.push('\n');
        }
        manifest.push_str("\n[outputs]\n");
        for (name, contents) in &self.files {
            let mut hasher = Sha256::new();
            hasher.update(contents.as_bytes());
            let digest = hasher.finalize();
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            manifest.push_str(&format!("{name} = sha256:{hex}\n"));
        }
        manifest.push_str("\n[versions]\n");
        manifest.push_str(&format!("qpot = {}\n", env!("CARGO_PKG_VERSION")));
        manifest.push_str("schema = 1\n");
        self.files.clear();
        std::fs::write(self.directory.join("manifest.txt"), manifest)
            .map_err(|e| RunError::config(format!("cannot write manifest: {e}")))?;
        Ok(())
    }
}

fn reference_point(config: &ScenarioConfig) -> f64 {
    match config.initial {
        crate::config::Initial::Gaussian { mean, .. } => mean,
        _ => 0.0,
    }
}

pub fn run_functionals(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let rho = config.initial_density()?;
    let c = config.constants()?;
    let report = inequality_report(&rho, &c)?;
    let mut emitter = Emitter::new(out)?;
    emitter.write("functionals.csv", csvio::functional_report_csv(&report))?;
    emitter.finish(config)
}

pub fn run_kernels(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let grid = config.grid()?;
    let x0 = reference_point(config);
    let times: Vec<f64> = (1..=4).map(|k| config.horizon * k as f64 / 4.0).collect();
    let mut heat = Vec::new();
    let mut mehler = Vec::new();
    let mut ou = Vec::new();
    let mut free = Vec::new();
    let mut osc = Vec::new();
    for &t in &times {
        for i in 0..grid.len() {
            let y = grid.node(i);
            heat.push((x0, y, t, heat_kernel(y, x0, t)?, 0.0));
            mehler.push((x0, y, t, mehler_kernel(y, x0, t)?, 0.0));
            ou.push((x0, y, t, ou_transition(y, x0, t)?, 0.0));
            let k = schrodinger_propagator(PropagatorKind::Free, y, x0, t)?;
            free.push((x0, y, t, k.re, k.im));
            if t.sin().abs() > 1e-6 {
                let k = schrodinger_propagator(PropagatorKind::Oscillator, y, x0, t)?;
                osc.push((x0, y, t, k.re, k.im));
            }
        }
    }
    let mut emitter = Emitter::new(out)?;
    emitter.write("heat.csv", csvio::kernel_csv(&heat))?;
    emitter.write("mehler.csv", csvio::kernel_csv(&mehler))?;
    emitter.write("ou_transition.csv", csvio::kernel_csv(&ou))?;
    emitter.write("free_schrodinger.csv", csvio::kernel_csv(&free))?;
    emitter.write("oscillator_schrodinger.csv", csvio::kernel_csv(&osc))?;
    emitter.finish(config)
}

pub fn run_evolve_quantum(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let grid = config.grid()?;
    let c = config.constants()?;
    let v_raw = config.potential_field()?;
    let (v_ext, _) = match config.potential {
        Potential::Free => (v_raw.clone(), 0.0),
        _ => renormalize_ground(grid, &v_raw, c)?,
    };
    let rho0 = config.initial_density()?;
    let psi0 = WaveFunction::from_density(&rho0, c)?;
    let run = evolve_quantum(
        &psi0,
        &v_ext,
        config.dt,
        config.n_steps(),
        config.snapshot_stride(),
    )?;
    let h_series = quantum_invariant_h(&run, &v_ext)?;
    let mut series = Vec::new();
    let mut snapshots_owned = Vec::new();
    for (i, state) in run.states.iter().enumerate() {
        let fields = madelung_fields(state, run.times[i])?;
        let s = qpot_core::functionals::shannon_entropy(&fields.rho)?;
        let f = qpot_core::functionals::fisher_information(&fields.rho)?;
        series.push((run.times[i], s, f, h_series[i], state.norm()));
        snapshots_owned.push(fields);
    }
    let snapshots: Vec<csvio::FieldSnapshot<'_>> = snapshots_owned
        .iter()
        .map(|f| csvio::FieldSnapshot {
            time: f.time,
            rho: &f.rho,
            v: &f.v,
            u: &f.u,
            q: &f.q,
            s: &f.s,
            mask: &f.mask,
        })
        .collect();
    let mut emitter = Emitter::new(out)?;
    emitter.write("series.csv", csvio::quantum_series_csv(&series))?;
    emitter.write("fields.csv", csvio::field_snapshots_csv(&snapshots))?;
    emitter.finish(config)
}

pub fn run_evolve_brownian(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let grid = config.grid()?;
    let c = config.constants()?;
    let (drift, v_ext) = match config.potential {
        Potential::Free => (GridField::zeros(grid), GridField::zeros(grid)),
        _ => {
            let v_raw = config.potential_field()?;
            let (rho_star, b, e0) = drift_from_potential(grid, &v_raw, &c)?;
            let _ = rho_star;
            (b, v_raw.map(|v| v - e0))
        }
    };
    let rho0 = config.initial_density()?;
    let run = evolve_fokker_planck(
        &rho0,
        &drift,
        config.dt,
        config.n_steps(),
        config.snapshot_stride(),
        &c,
    )?;
    let diagnostics = brownian_hydro_residuals(&run, &drift, &v_ext, &c)?;
    let mut series = Vec::new();
    let mut rows = Vec::new();
    for (i, rho) in run.states.iter().enumerate() {
        let s = qpot_core::functionals::shannon_entropy(rho)?;
        let f = qpot_core::functionals::fisher_information(rho)?;
        let v = current_velocity(rho, &drift, &c)?;
        let u = osmotic_velocity(rho, &c)?;
        let energy = v
            .field
            .zip(&u.field, |v, u| 0.5 * c.mass() * (v * v + u * u))
            .zip(&v_ext, |kin, pot| kin + pot);
        let h_plus = expectation(rho, &energy, &u.mask);
        series.push((
            run.times[i],
            s,
            f,
            h_plus,
            rho.mass(),
            diagnostics.h_minus[i],
        ));
        let q = qpot_core::functionals::quantum_potential(rho, &c)?;
        let s_field = qpot_core::grid::cumulative_quadrature(
            &v.field.scale(c.mass()),
            u.mask.first_inside().unwrap_or(0),
        );
        rows.push((rho.clone(), v.field, u.field, q.field, s_field, u.mask));
    }
    let snapshots: Vec<csvio::FieldSnapshot<'_>> = rows
        .iter()
        .zip(&run.times)
        .map(|((rho, v, u, q, s, mask), &time)| csvio::FieldSnapshot {
            time,
            rho,
            v,
            u,
            q,
            s,
            mask,
        })
        .collect();
    let mut emitter = Emitter::new(out)?;
    emitter.write("series.csv", csvio::brownian_series_csv(&series))?;
    emitter.write("fields.csv", csvio::field_snapshots_csv(&snapshots))?;
    emitter.finish(config)
}

pub fn run_ensemble(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let grid = config.grid()?;
    let c = config.constants()?;
    let rho0 = config.initial_density()?;
    let n_particles = 10_000;
    let run = match config.potential {
        Potential::Free => simulate_sde(
            &rho0,
            |_| 0.0,
            config.dt,
            config.n_steps(),
            n_particles,
            config.seed,
            config.snapshot_stride(),
            &c,
        )?,
        _ => {
            let v_raw = config.potential_field()?;
            let (_, b, _) = drift_from_potential(grid, &v_raw, &c)?;
            let drift = b.clone();
            simulate_sde(
                &rho0,
                move |x| drift.interp(x),
                config.dt,
                config.n_steps(),
                n_particles,
                config.seed,
                config.snapshot_stride(),
                &c,
            )?
        }
    };
    let m = run.ensembles.len();
    let mut emitter = Emitter::new(out)?;
    emitter.write("trajectories.csv", csvio::ensemble_csv(&run))?;
    if m >= 2 {
        let est = estimate_drift_empirical(
            &run.ensembles[m - 2],
            &run.ensembles[m - 1],
            DriftDirection::Forward,
            32,
            grid.x_min(),
            grid.x_max(),
        )?;
        let analytic: Box<dyn Fn(f64) -> f64> = match config.potential {
            Potential::Free => Box::new(|_| 0.0),
            _ => {
                let v_raw = config.potential_field()?;
                let (_, b, _) = drift_from_potential(grid, &v_raw, &c)?;
                Box::new(move |x| b.interp(x))
            }
        };
        emitter.write("drift_bins.csv", csvio::drift_bins_csv(&est, analytic))?;
    }
    emitter.finish(config)
}

pub fn run_kinetic(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let grid = config.grid()?;
    let c = config.constants()?;
    let bound = regime_bound(&c);
    let times: Vec<f64> = (1..=4)
        .map(|k| config.horizon * k as f64 / 4.0)
        .filter(|&t| t > bound)
        .collect();
    if times.is_empty() {
        return Err(RunError::config(format!(
            "horizon {} never clears the large-friction bound t > {bound}",
            config.horizon
        )));
    }
    let mut rows = Vec::new();
    for &t in &times {
        let moments = large_friction_moments(t, grid, &c)?;
        let balances = pressure_balance_residual(&moments, &c)?;
        let p_osm = osmotic_pressure(&moments.w, &c)?;
        for i in 0..grid.len() {
            if !moments.theta_osm.mask.is_inside(i) {
                continue;
            }
            rows.push((
                grid.node(i),
                t,
                moments.p_kin.values()[i],
                p_osm.field.values()[i],
                moments.theta_kin.values()[i],
                moments.theta_osm.field.values()[i],
                if balances.kramers.mask.is_inside(i) {
                    balances.kramers.field.values()[i]
                } else {
                    f64::NAN
                },
                if balances.hydrodynamic.mask.is_inside(i) {
                    balances.hydrodynamic.field.values()[i]
                } else {
                    f64::NAN
                },
            ));
        }
    }
    let mut emitter = Emitter::new(out)?;
    emitter.write("kinetic.csv", csvio::kinetic_csv(&rows))?;
    emitter.finish(config)
}

pub fn run_variational(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    if config.potential == Potential::Free {
        return Err(RunError::config(
            "the variational solvers need a non-constant potential",
        ));
    }
    let c = config.constants()?;
    let v_ext = config.potential_field()?;
    let rho0 = config.initial_density()?;
    let zeta = quadrature(&rho0.field().zip(&v_ext, |r, v| r * v));

    let mut emitter = Emitter::new(out)?;
    let max_ent = max_entropy_pdf(&v_ext, zeta)?;
    emitter.write(
        "max_entropy.csv",
        csvio::variational_csv(&max_ent.rho, &v_ext),
    )?;
    emitter.write(
        "max_entropy_summary.csv",
        csvio::variational_summary_csv(
            max_ent.multiplier,
            max_ent.functional_value,
            max_ent.achieved_constraint - max_ent.constraint_value,
        ),
    )?;
    match fisher_extremum_pdf(&v_ext, zeta) {
        Ok(fisher) => {
            emitter.write("fisher.csv", csvio::variational_csv(&fisher.rho, &v_ext))?;
            emitter.write(
                "fisher_summary.csv",
                csvio::variational_summary_csv(
                    fisher.multiplier,
                    fisher.functional_value,
                    fisher.achieved_constraint - fisher.constraint_value,
                ),
            )?;
        }
        Err(e) => return Err(RunError::numerics(format!("Fisher extremum failed: {e}"))),
    }
    let _ = c;
    emitter.finish(config)
}

pub fn run_recoil(config: &ScenarioConfig, out: &Path) -> Result<(), RunError> {
    let grid = config.grid()?;
    let c = config.constants()?;
    let v_ext = config.potential_field()?;
    let rho0 = config.initial_density()?;
    let state0 = MatterState::new(rho0, GridField::zeros(grid), c)?;
    let run = recoil_trajectory(
        &state0,
        &v_ext,
        config.dt,
        config.n_steps(),
        config.snapshot_stride(),
        ImpulseBranch::AntiBrownian,
    )?;
    let mut rows = Vec::new();
    for (i, state) in run.states.iter().enumerate().skip(1) {
        let q = qpot_core::functionals::quantum_potential(&state.rho, &c)?;
        rows.push((
            run.times[i],
            state.rho.clone(),
            state.v.clone(),
            q.field,
            q.mask,
            run.discarded_pulse[i - 1].clone(),
            run.applied_pulse[i - 1].clone(),
        ));
    }
    let snapshots: Vec<csvio::RecoilSnapshot<'_>> = rows
        .iter()
        .map(
            |(time, rho, v, q, q_mask, brownian, anti)| csvio::RecoilSnapshot {
                time: *time,
                rho,
                v,
                q,
                q_mask,
                brownian_pulse: brownian,
                anti_pulse: anti,
            },
        )
        .collect();
    let mut emitter = Emitter::new(out)?;
    emitter.write("recoil.csv", csvio::recoil_csv(&snapshots))?;
    emitter.finish(config)
}
