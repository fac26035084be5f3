//! Particle-level picture: Euler-Maruyama ensembles with reproducible
//! per-trajectory random streams, forward/backward drifts and their binned
//! empirical estimators, the forward/backward mean derivatives, the
//! acceleration catalogue, and Bohmian trajectory integration.

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::functionals::{osmotic_velocity, quantum_potential};
use crate::grid::{ensure_same_grid, gradient, laplacian, GridField, GridPdf, Mask, MaskedField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Particle positions at one time, tagged with the stream seed that fully
/// determines the trajectory bundle.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub positions: Vec<f64>,
    pub time: f64,
    pub seed: u64,
    pub constants: PhysicalConstants,
}

/// Snapshots of an SDE simulation.
#[derive(Debug, Clone)]
pub struct SdeRun {
    pub times: Vec<f64>,
    pub ensembles: Vec<Ensemble>,
    /// Fraction of trajectories that hit a wall at least once.
    pub escape_fraction: f64,
}

/// Inverse-CDF sampler over the grid (piecewise-linear CDF).
struct GridSampler {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridSampler {
    fn new(rho: &GridPdf) -> Self {
        let grid = rho.grid();
        let h = grid.spacing();
        let v = rho.values();
        let mut cdf = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            cdf[i] = cdf[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
        }
        let total = cdf[grid.len() - 1];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Self {
            nodes: grid.nodes(),
            cdf,
        }
    }

    fn sample(&self, u: f64) -> f64 {
        let idx = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("finite cdf"))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let i = idx.min(self.cdf.len() - 2);
        let width = self.cdf[i + 1] - self.cdf[i];
        if width <= 0.0 {
            return self.nodes[i];
        }
        let frac = ((u - self.cdf[i]) / width).clamp(0.0, 1.0);
        self.nodes[i] + frac * (self.nodes[i + 1] - self.nodes[i])
    }
}

/// Euler-Maruyama integration `X <- X + b(X) dt + sqrt(2 D dt) xi` with
/// initial positions drawn from `rho0` by inverse CDF.
///
/// Every trajectory owns a counter-derived ChaCha stream of the run seed,
/// so the output is bit-identical under any execution order. Walls reflect;
/// if more than 1% of trajectories touch a wall the box is too small.
#[allow(clippy::too_many_arguments)]
pub fn simulate_sde(
    rho0: &GridPdf,
    drift: impl Fn(f64) -> f64,
    dt: f64,
    n_steps: usize,
    n_particles: usize,
    seed: u64,
    snapshot_stride: usize,
    c: &PhysicalConstants,
) -> Result<SdeRun> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if n_particles == 0 {
        return Err(Error::Domain("need at least one particle".into()));
    }
    let stride = snapshot_stride.max(1);
    let sampler = GridSampler::new(rho0);
    let grid = rho0.grid();
    let (lo, hi) = (grid.x_min(), grid.x_max());
    let noise = (2.0 * c.diffusion() * dt).sqrt();

    let mut snapshot_steps = vec![0usize];
    let mut s = stride;
    while s < n_steps {
        snapshot_steps.push(s);
        s += stride;
    }
    if n_steps > 0 {
        snapshot_steps.push(n_steps);
    }
    let mut snapshots: Vec<Vec<f64>> = snapshot_steps
        .iter()
        .map(|_| vec![0.0; n_particles])
        .collect();

    let mut escaped = 0usize;
    for traj in 0..n_particles {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(traj as u64 + 1);
        let mut x = sampler.sample(rng.gen::<f64>());
        let mut hit_wall = false;
        let mut cursor = 0usize;
        if snapshot_steps[cursor] == 0 {
            snapshots[cursor][traj] = x;
            cursor += 1;
        }
        for step in 1..=n_steps {
            let xi: f64 = rng.sample(StandardNormal);
            x += drift(x) * dt + noise * xi;
            while x < lo || x > hi {
                hit_wall = true;
                if x < lo {
                    x = 2.0 * lo - x;
                } else {
                    x = 2.0 * hi - x;
                }
            }
            if cursor < snapshot_steps.len() && snapshot_steps[cursor] == step {
                snapshots[cursor][traj] = x;
                cursor += 1;
            }
        }
        if hit_wall {
            escaped += 1;
        }
    }
    let escape_fraction = escaped as f64 / n_particles as f64;
    if escape_fraction > 0.01 {
        return Err(Error::BoxTooSmall(format!(
            "{:.2}% of trajectories reached a wall",
            100.0 * escape_fraction
        )));
    }
    let times: Vec<f64> = snapshot_steps.iter().map(|&s| s as f64 * dt).collect();
    let ensembles = snapshot_steps
        .iter()
        .zip(snapshots)
        .map(|(&s, positions)| Ensemble {
            positions,
            time: s as f64 * dt,
            seed,
            constants: *c,
        })
        .collect();
    Ok(SdeRun {
        times,
        ensembles,
        escape_fraction,
    })
}

/// Forward and backward drifts of a diffusion with current velocity `v`:
/// `b = v + u`, `b_* = v - u`, `u = D ∇ln rho`.
#[derive(Debug, Clone)]
pub struct DriftPair {
    pub b: GridField,
    pub b_star: GridField,
    pub v: GridField,
    pub u: GridField,
    pub mask: Mask,
}

pub fn drift_pair_from_fields(
    rho: &GridPdf,
    v: &GridField,
    c: &PhysicalConstants,
) -> Result<DriftPair> {
    ensure_same_grid(&[rho.field(), v])?;
    let u = osmotic_velocity(rho, c)?;
    let mut b = vec![0.0; v.len()];
    let mut b_star = vec![0.0; v.len()];
    let mut v_masked = vec![0.0; v.len()];
    for i in 0..v.len() {
        if u.mask.is_inside(i) {
            b[i] = v.values()[i] + u.field.values()[i];
            b_star[i] = v.values()[i] - u.field.values()[i];
            v_masked[i] = v.values()[i];
        }
    }
    Ok(DriftPair {
        b: GridField::new(rho.grid(), b)?,
        b_star: GridField::new(rho.grid(), b_star)?,
        v: GridField::new(rho.grid(), v_masked)?,
        u: u.field,
        mask: u.mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftDirection {
    Forward,
    Backward,
}

/// Binned conditional-mean drift estimate from two consecutive ensembles.
#[derive(Debug, Clone)]
pub struct DriftEstimate {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Bins with fewer than 50 samples; their estimates are unreliable.
    pub flagged: Vec<bool>,
}

/// Estimates `b` (conditioning on the earlier position) or `b_*`
/// (conditioning on the later position) as the binned mean increment rate.
pub fn estimate_drift_empirical(
    before: &Ensemble,
    after: &Ensemble,
    direction: DriftDirection,
    n_bins: usize,
    lo: f64,
    hi: f64,
) -> Result<DriftEstimate> {
    if before.positions.len() != after.positions.len() {
        return Err(Error::Domain("ensembles have different sizes".into()));
    }
    if before.positions.len() < 1000 {
        return Err(Error::Domain(
            "drift estimation needs at least 10^3 particles".into(),
        ));
    }
    let dt = after.time - before.time;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("ensembles must be time-ordered".into()));
    }
    if lo >= hi || lo.is_nan() || hi.is_nan() || n_bins == 0 {
        return Err(Error::Domain("invalid binning".into()));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut sums = vec![0.0; n_bins];
    let mut sq_sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&x, &y) in before.positions.iter().zip(&after.positions) {
        let key = match direction {
            DriftDirection::Forward => x,
            DriftDirection::Backward => y,
        };
        if key < lo || key >= hi {
            continue;
        }
        let bin = ((key - lo) / width) as usize;
        let rate = (y - x) / dt;
        sums[bin] += rate;
        sq_sums[bin] += rate * rate;
        counts[bin] += 1;
    }
    let mut estimates = vec![0.0; n_bins];
    let mut standard_errors = vec![f64::INFINITY; n_bins];
    let mut flagged = vec![true; n_bins];
    let mut centers = vec![0.0; n_bins];
    for i in 0..n_bins {
        centers[i] = lo + (i as f64 + 0.5) * width;
        if counts[i] == 0 {
            continue;
        }
        let n = counts[i] as f64;
        estimates[i] = sums[i] / n;
        if counts[i] > 1 {
            let var = (sq_sums[i] - sums[i] * sums[i] / n) / (n - 1.0);
            standard_errors[i] = (var.max(0.0) / n).sqrt();
        }
        flagged[i] = counts[i] < 50;
    }
    Ok(DriftEstimate {
        bin_centers: centers,
        counts,
        estimates,
        standard_errors,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanDerivative {
    /// `(D f) = (∂_t + b ∇ + D Δ) f`
    Forward,
    /// `(D_* f) = (∂_t + b_* ∇ - D Δ) f`
    Backward,
}

/// Applies the forward or backward mean derivative to a function sampled at
/// two consecutive times, using time-centered spatial fields.
pub fn mean_derivative(
    f_a: &GridField,
    f_b: &GridField,
    dt: f64,
    drifts: &DriftPair,
    direction: MeanDerivative,
    c: &PhysicalConstants,
) -> Result<MaskedField> {
    ensure_same_grid(&[f_a, f_b, &drifts.b])?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let f_mid = f_a.zip(f_b, |a, b| 0.5 * (a + b));
    let df_dt = f_b.zip(f_a, |b, a| (b - a) / dt);
    let grad = gradient(&f_mid)?;
    let lap = laplacian(&f_mid)?;
    let (advect, diffuse) = match direction {
        MeanDerivative::Forward => (&drifts.b, c.diffusion()),
        MeanDerivative::Backward => (&drifts.b_star, -c.diffusion()),
    };
    let mut values = vec![0.0; f_a.len()];
    for i in 0..values.len() {
        if drifts.mask.is_inside(i) {
            values[i] = df_dt.values()[i]
                + advect.values()[i] * grad.values()[i]
                + diffuse * lap.values()[i];
        }
    }
    Ok(MaskedField::new(
        GridField::new(f_a.grid(), values)?,
        drifts.mask.clone(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccelerationKind {
    /// `(D^2 X)`
    ForwardForward,
    /// `(D_*^2 X)`
    BackwardBackward,
    /// `(1/2)(D D_* + D_* D) X`
    SymmetricMean,
}

/// One of the acceleration fields of a diffusion, from drift pairs at two
/// consecutive times.
pub fn acceleration(
    pair_a: &DriftPair,
    pair_b: &DriftPair,
    dt: f64,
    kind: AccelerationKind,
    c: &PhysicalConstants,
) -> Result<MaskedField> {
    ensure_same_grid(&[&pair_a.b, &pair_b.b])?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    let grid = pair_a.b.grid();
    let mask = pair_a.mask.intersect(&pair_b.mask).shrink(3);
    let b = pair_a.b.zip(&pair_b.b, |a, b| 0.5 * (a + b));
    let b_star = pair_a.b_star.zip(&pair_b.b_star, |a, b| 0.5 * (a + b));
    let d = c.diffusion();
    let values = match kind {
        AccelerationKind::ForwardForward => {
            let db_dt = pair_b.b.zip(&pair_a.b, |y, x| (y - x) / dt);
            let grad_b = gradient(&b)?;
            let lap_b = laplacian(&b)?;
            (0..grid.len())
                .map(|i| {
                    db_dt.values()[i] + b.values()[i] * grad_b.values()[i] + d * lap_b.values()[i]
                })
                .collect::<Vec<_>>()
        }
        AccelerationKind::BackwardBackward => {
            let db_dt = pair_b.b_star.zip(&pair_a.b_star, |y, x| (y - x) / dt);
            let grad_bs = gradient(&b_star)?;
            let lap_bs = laplacian(&b_star)?;
            (0..grid.len())
                .map(|i| {
                    db_dt.values()[i] + b_star.values()[i] * grad_bs.values()[i]
                        - d * lap_bs.values()[i]
                })
                .collect::<Vec<_>>()
        }
        AccelerationKind::SymmetricMean => {
            let v_a = pair_a.v.clone();
            let v_b = pair_b.v.clone();
            let dv_dt = v_b.zip(&v_a, |y, x| (y - x) / dt);
            let grad_b = gradient(&b)?;
            let grad_bs = gradient(&b_star)?;
            let diff = b_star.zip(&b, |s, f| s - f);
            let lap_diff = laplacian(&diff)?;
            (0..grid.len())
                .map(|i| {
                    dv_dt.values()[i]
                        + 0.5
                            * (b.values()[i] * grad_bs.values()[i]
                                + b_star.values()[i] * grad_b.values()[i])
                        + 0.5 * d * lap_diff.values()[i]
                })
                .collect::<Vec<_>>()
        }
    };
    let masked = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| if mask.is_inside(i) { v } else { 0.0 })
        .collect();
    Ok(MaskedField::new(GridField::new(grid, masked)?, mask))
}

/// All candidate accelerations next to the force fields they are compared
/// against; the artifact reports them side by side.
#[derive(Debug, Clone)]
pub struct AccelerationReport {
    pub forward_forward: MaskedField,
    pub backward_backward: MaskedField,
    pub symmetric_mean: MaskedField,
    /// `(1/m) ∇V`
    pub newton_force: GridField,
    /// `(1/m) ∇(V + 2Q)`
    pub dressed_force: GridField,
}

pub fn acceleration_report(
    pair_a: &DriftPair,
    pair_b: &DriftPair,
    dt: f64,
    rho_mid: &GridPdf,
    v_ext: &GridField,
    c: &PhysicalConstants,
) -> Result<AccelerationReport> {
    let q = quantum_potential(rho_mid, c)?;
    let dressed = v_ext.zip(&q.field, |v, q| v + 2.0 * q);
    Ok(AccelerationReport {
        forward_forward: acceleration(pair_a, pair_b, dt, AccelerationKind::ForwardForward, c)?,
        backward_backward: acceleration(pair_a, pair_b, dt, AccelerationKind::BackwardBackward, c)?,
        symmetric_mean: acceleration(pair_a, pair_b, dt, AccelerationKind::SymmetricMean, c)?,
        newton_force: gradient(v_ext)?.scale(1.0 / c.mass()),
        dressed_force: gradient(&dressed)?.scale(1.0 / c.mass()),
    })
}

/// One integrated trajectory of `dx/dt = v(x, t)`.
#[derive(Debug, Clone)]
pub struct BohmianPath {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Set when the trajectory entered a masked region and was stopped.
    pub truncated: bool,
}

impl BohmianPath {
    pub fn last_position(&self) -> f64 {
        *self.positions.last().expect("path has at least the start")
    }
}

/// Classical RK4 integration of the current-velocity flow with linear
/// interpolation in space and time between field snapshots.
pub fn bohmian_trajectories(
    times: &[f64],
    velocity: &[MaskedField],
    starts: &[f64],
    dt: f64,
) -> Result<Vec<BohmianPath>> {
    if times.len() != velocity.len() || times.len() < 2 {
        return Err(Error::Domain(
            "need matching times and at least two snapshots".into(),
        ));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Domain("snapshot times must increase".into()));
        }
    }
    let t_end = *times.last().expect("nonempty");
    let t_start = times[0];
    let grid = velocity[0].grid();

    let eval = |x: f64, t: f64| -> Option<f64> {
        let k = match times.binary_search_by(|probe| probe.partial_cmp(&t).expect("finite time")) {
            Ok(i) => i.min(times.len() - 2),
            Err(i) => i.saturating_sub(1).min(times.len() - 2),
        };
        let lam = ((t - times[k]) / (times[k + 1] - times[k])).clamp(0.0, 1.0);
        let (cell, _) = grid.locate(x);
        for field in [&velocity[k], &velocity[k + 1]] {
            if !field.mask.is_inside(cell) || !field.mask.is_inside(cell + 1) {
                return None;
            }
        }
        Some((1.0 - lam) * velocity[k].field.interp(x) + lam * velocity[k + 1].field.interp(x))
    };

    let mut paths = Vec::with_capacity(starts.len());
    for &x0 in starts {
        let mut path = BohmianPath {
            times: vec![t_start],
            positions: vec![x0],
            truncated: false,
        };
        let mut x = x0;
        let mut t = t_start;
        'steps: while t < t_end - 1e-15 {
            let step = dt.min(t_end - t);
            let stage = |dx: f64, dtau: f64, truncated: &mut bool| -> f64 {
                match eval(x + dx, t + dtau) {
                    Some(v) => v,
                    None => {
                        *truncated = true;
                        0.0
                    }
                }
            };
            let mut cut = false;
            let k1 = stage(0.0, 0.0, &mut cut);
            let k2 = stage(0.5 * step * k1, 0.5 * step, &mut cut);
            let k3 = stage(0.5 * step * k2, 0.5 * step, &mut cut);
            let k4 = stage(step * k3, step, &mut cut);
            if cut {
                path.truncated = true;
                break 'steps;
            }
            x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += step;
            path.times.push(t);
            path.positions.push(x);
        }
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::scenario::{gaussian_pdf, oscillator_stationary_pdf, FreePacket};

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn wiener_increment_variance() {
        let grid = Grid::new(-12.0, 12.0, 801).unwrap();
        let rho0 = gaussian_pdf(grid, 0.0, 0.05).unwrap();
        let n = 20_000;
        let run = simulate_sde(&rho0, |_| 0.0, 1e-2, 100, n, 7, 100, &c()).unwrap();
        let first = &run.ensembles[0].positions;
        let last = &run.ensembles.last().unwrap().positions;
        let increments: Vec<f64> = first.iter().zip(last).map(|(a, b)| b - a).collect();
        let mean = increments.iter().sum::<f64>() / n as f64;
        let var = increments
            .iter()
            .map(|d| (d - mean) * (d - mean))
            .sum::<f64>()
            / (n as f64 - 1.0);
        // Var = 2 D t = 1, sampling se of the variance ~ var sqrt(2/n)
        let se = 1.0 * (2.0 / n as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "variance {var}");
    }

    #[test]
    fn ou_mean_from_deterministic_start() {
        let grid = Grid::new(-8.0, 8.0, 801).unwrap();
        let rho0 = gaussian_pdf(grid, 1.0, 1e-3).unwrap();
        let n = 20_000;
        let run = simulate_sde(&rho0, |x| -x, 1e-3, 1000, n, 11, 1000, &c()).unwrap();
        let last = &run.ensembles.last().unwrap().positions;
        let mean = last.iter().sum::<f64>() / n as f64;
        let sd = (0.5f64 * (1.0 - (-2.0f64).exp()) / n as f64).sqrt();
        assert!(
            (mean - (-1.0f64).exp()).abs() < 3.0 * sd,
            "mean {mean} vs {}",
            (-1.0f64).exp()
        );
    }

    #[test]
    fn halving_dt_keeps_the_mean() {
        let grid = Grid::new(-8.0, 8.0, 801).unwrap();
        let rho0 = gaussian_pdf(grid, 1.0, 1e-3).unwrap();
        let n = 20_000;
        let coarse = simulate_sde(&rho0, |x| -x, 2e-3, 500, n, 11, 500, &c()).unwrap();
        let fine = simulate_sde(&rho0, |x| -x, 1e-3, 1000, n, 11, 1000, &c()).unwrap();
        let mean =
            |r: &SdeRun| r.ensembles.last().unwrap().positions.iter().sum::<f64>() / n as f64;
        let se = (0.5f64 / n as f64).sqrt();
        assert!(
            (mean(&coarse) - mean(&fine)).abs() < se,
            "dt bias too large"
        );
    }

    #[test]
    fn identical_seeds_are_bitwise_identical() {
        let grid = Grid::new(-8.0, 8.0, 801).unwrap();
        let rho0 = gaussian_pdf(grid, 0.0, 1.0).unwrap();
        let a = simulate_sde(&rho0, |x| -x, 1e-2, 50, 500, 99, 10, &c()).unwrap();
        let b = simulate_sde(&rho0, |x| -x, 1e-2, 50, 500, 99, 10, &c()).unwrap();
        for (ea, eb) in a.ensembles.iter().zip(&b.ensembles) {
            assert_eq!(ea.positions, eb.positions);
        }
    }

    #[test]
    fn tight_box_reports_escape() {
        let grid = Grid::new(-0.5, 0.5, 101).unwrap();
        let rho0 = gaussian_pdf(grid, 0.0, 0.2).unwrap();
        let err = simulate_sde(&rho0, |_| 0.0, 1e-2, 200, 2000, 1, 200, &c());
        assert!(matches!(err, Err(Error::BoxTooSmall(_))));
    }

    #[test]
    fn drift_pair_for_stationary_ou() {
        let grid = Grid::new(-6.0, 6.0, 3001).unwrap();
        let rho = oscillator_stationary_pdf(grid).unwrap();
        let v = GridField::zeros(grid);
        let pair = drift_pair_from_fields(&rho, &v, &c()).unwrap();
        let interior = pair.mask.shrink(3);
        for i in 0..grid.len() {
            let x = grid.node(i);
            if interior.is_inside(i) && x.abs() < 4.0 {
                assert!((pair.b.values()[i] + x).abs() < 1e-6, "b at {x}");
                assert!((pair.b_star.values()[i] - x).abs() < 1e-6, "b* at {x}");
                assert!(
                    (pair.b.values()[i] - pair.b_star.values()[i] - 2.0 * pair.u.values()[i]).abs()
                        < 1e-12
                );
            }
        }
    }

    #[test]
    fn heat_kernel_drift_consistency() {
        // free Brownian motion: b = 0, so v = -u pointwise
        let cc = c();
        let t = 1.0;
        let sigma = (2.0 * cc.diffusion() * t).sqrt();
        let grid = Grid::new(-10.0, 10.0, 2001).unwrap();
        let rho = gaussian_pdf(grid, 0.0, sigma).unwrap();
        let u = osmotic_velocity(&rho, &cc).unwrap();
        let v = u.field.scale(-1.0);
        let pair = drift_pair_from_fields(&rho, &v, &cc).unwrap();
        let interior = pair.mask.shrink(3);
        for i in 0..grid.len() {
            if interior.is_inside(i) {
                assert!(pair.b.values()[i].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empirical_drift_recovers_ou() {
        let grid = Grid::new(-6.0, 6.0, 1201).unwrap();
        let rho_star = oscillator_stationary_pdf(grid).unwrap();
        let n = 100_000;
        let dt = 5e-3;
        let run = simulate_sde(&rho_star, |x| -x, dt, 41, n, 424242, 1, &c()).unwrap();
        let m = run.ensembles.len();
        let before = &run.ensembles[m - 2];
        let after = &run.ensembles[m - 1];

        for (direction, sign) in [
            (DriftDirection::Forward, -1.0),
            (DriftDirection::Backward, 1.0),
        ] {
            let est = estimate_drift_empirical(before, after, direction, 32, -3.2, 3.2).unwrap();
            let mut populated = 0usize;
            let mut within = 0usize;
            for i in 0..est.bin_centers.len() {
                if est.flagged[i] {
                    continue;
                }
                populated += 1;
                let expected = sign * est.bin_centers[i];
                if (est.estimates[i] - expected).abs() <= 3.0 * est.standard_errors[i] {
                    within += 1;
                }
            }
            assert!(populated >= 10, "too few populated bins");
            assert!(
                within as f64 >= 0.95 * populated as f64,
                "{direction:?}: only {within}/{populated} bins within 3 se"
            );
        }
    }

    #[test]
    fn point_source_backward_drift_matches_field_route() {
        // free Brownian cloud released near the origin: after time t the
        // field route gives b_* = v - u = x/t; the binned estimator must
        // agree within sampling error
        let cc = c();
        let grid = Grid::new(-10.0, 10.0, 1601).unwrap();
        let rho0 = gaussian_pdf(grid, 0.0, 1e-3).unwrap();
        let n = 50_000;
        let dt = 5e-3;
        let t = 1.0;
        let steps = (t / dt) as usize;
        let run = simulate_sde(&rho0, |_| 0.0, dt, steps, n, 31, 1, &cc).unwrap();
        let m = run.ensembles.len();
        let est = estimate_drift_empirical(
            &run.ensembles[m - 2],
            &run.ensembles[m - 1],
            DriftDirection::Backward,
            24,
            -2.4,
            2.4,
        )
        .unwrap();
        let mut checked = 0;
        for i in 0..est.bin_centers.len() {
            if est.flagged[i] {
                continue;
            }
            let field_route = est.bin_centers[i] / t;
            if (est.estimates[i] - field_route).abs() <= 3.0 * est.standard_errors[i] {
                checked += 1;
            }
        }
        let populated = est.flagged.iter().filter(|f| !*f).count();
        assert!(populated >= 10);
        assert!(
            checked as f64 >= 0.9 * populated as f64,
            "only {checked}/{populated} bins match b_* = x/t"
        );
    }

    #[test]
    fn mean_derivative_collapses_on_identity() {
        let grid = Grid::new(-6.0, 6.0, 3001).unwrap();
        let cc = c();
        let rho = oscillator_stationary_pdf(grid).unwrap();
        let v = GridField::zeros(grid);
        let pair = drift_pair_from_fields(&rho, &v, &cc).unwrap();
        let x = GridField::from_fn(grid, |x| x).unwrap();
        let dx = mean_derivative(&x, &x, 1.0, &pair, MeanDerivative::Forward, &cc).unwrap();
        let interior = pair.mask.shrink(3);
        for i in 0..grid.len() {
            if interior.is_inside(i) && grid.node(i).abs() < 4.0 {
                assert!(
                    (dx.field.values()[i] - pair.b.values()[i]).abs() < 1e-9,
                    "DX != b at node {i}"
                );
            }
        }
        // constants are annihilated
        let one = GridField::constant(grid, 1.0);
        for dir in [MeanDerivative::Forward, MeanDerivative::Backward] {
            let d1 = mean_derivative(&one, &one, 1.0, &pair, dir, &cc).unwrap();
            assert!(d1.max_abs_inside() < 1e-12);
        }
    }

    #[test]
    fn stationary_ou_accelerations() {
        let grid = Grid::new(-6.0, 6.0, 4001).unwrap();
        let cc = c();
        let rho = oscillator_stationary_pdf(grid).unwrap();
        let v = GridField::zeros(grid);
        let pair = drift_pair_from_fields(&rho, &v, &cc).unwrap();
        let v_ext = GridField::from_fn(grid, |x| 0.5 * (x * x - 1.0)).unwrap();
        let report = acceleration_report(&pair, &pair, 1.0, &rho, &v_ext, &cc).unwrap();
        let interior = report.forward_forward.mask.shrink(3);
        for i in 0..grid.len() {
            let x = grid.node(i);
            if !interior.is_inside(i) || x.abs() > 2.6 {
                continue;
            }
            // D^2 X = D_*^2 X = +grad V / m = x
            assert!(
                (report.forward_forward.field.values()[i] - x).abs() < 1e-4,
                "D2X at {x}: {}",
                report.forward_forward.field.values()[i]
            );
            assert!((report.backward_backward.field.values()[i] - x).abs() < 1e-4);
            // symmetric mean = (1/m) grad(V + 2Q) = -x
            assert!(
                (report.symmetric_mean.field.values()[i] + x).abs() < 1e-4,
                "sym at {x}: {}",
                report.symmetric_mean.field.values()[i]
            );
            assert!((report.newton_force.values()[i] - x).abs() < 1e-8);
            assert!((report.dressed_force.values()[i] + x).abs() < 1e-3);
        }
    }

    #[test]
    fn reconstruction_identity_of_the_three_currents() {
        // ∂_t rho = -∇(v rho) = D Δrho - ∇(b rho) = -D Δrho - ∇(b_* rho)
        let grid = Grid::new(-10.0, 10.0, 2001).unwrap();
        let cc = c();
        let packet = FreePacket::new(1.0, cc).unwrap();
        let rho = packet.density(grid, 1.0).unwrap();
        let v = packet.velocity_field(grid, 1.0);
        let pair = drift_pair_from_fields(&rho, &v, &cc).unwrap();
        let d = cc.diffusion();
        let via_v = gradient(&rho.field().zip(&pair.v, |r, v| r * v))
            .unwrap()
            .scale(-1.0);
        let lap = laplacian(rho.field()).unwrap();
        let via_b = {
            let adv = gradient(&rho.field().zip(&pair.b, |r, b| r * b)).unwrap();
            lap.zip(&adv, |l, a| d * l - a)
        };
        let via_bs = {
            let adv = gradient(&rho.field().zip(&pair.b_star, |r, b| r * b)).unwrap();
            lap.zip(&adv, |l, a| -d * l - a)
        };
        let interior = pair.mask.shrink(5);
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            if interior.is_inside(i) {
                worst = worst.max((via_v.values()[i] - via_b.values()[i]).abs());
                worst = worst.max((via_v.values()[i] - via_bs.values()[i]).abs());
            }
        }
        assert!(worst < 1e-5, "reconstruction identity gap {worst}");
    }

    #[test]
    fn bohmian_flow_of_stationary_state_is_frozen() {
        let grid = Grid::new(-6.0, 6.0, 1001).unwrap();
        let rho = oscillator_stationary_pdf(grid).unwrap();
        let mask = rho.support_mask();
        let zero = MaskedField::new(GridField::zeros(grid), mask);
        let fields = vec![zero.clone(), zero];
        let paths = bohmian_trajectories(&[0.0, 1.0], &fields, &[0.3, -1.2], 1e-2).unwrap();
        for p in paths {
            assert!(!p.truncated);
            assert!((p.last_position() - p.positions[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn bohmian_free_packet_golden_trajectory() {
        let grid = Grid::new(-12.0, 12.0, 2401).unwrap();
        let cc = c();
        let packet = FreePacket::new(1.0, cc).unwrap();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let fields: Vec<MaskedField> = times
            .iter()
            .map(|&t| {
                let rho = packet.density(grid, t).unwrap();
                MaskedField::new(packet.velocity_field(grid, t), rho.support_mask())
            })
            .collect();
        let paths = bohmian_trajectories(&times, &fields, &[1.0], 1e-3).unwrap();
        let x1 = paths[0].last_position();
        assert!(
            (x1 - 1.25f64.sqrt()).abs() < 1e-3,
            "x(1) = {x1} vs {}",
            1.25f64.sqrt()
        );
        assert!(!paths[0].truncated);
    }

    #[test]
    fn bohmian_truncates_outside_support() {
        let grid = Grid::new(-2.0, 2.0, 401).unwrap();
        let rho = gaussian_pdf(grid, 0.0, 0.2).unwrap();
        let mask = rho.support_mask();
        // uniform outward velocity pushes the walker into the masked tail
        let v = MaskedField::new(GridField::constant(grid, 1.0), mask);
        let fields = vec![v.clone(), v];
        let paths = bohmian_trajectories(&[0.0, 5.0], &fields, &[0.0], 1e-2).unwrap();
        assert!(paths[0].truncated);
    }
}
