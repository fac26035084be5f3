//! CSV emission with fixed column orders and stable formatting: header row,
//! period decimal separator, LF line endings, shortest-roundtrip floats.
//! Identical data serializes to identical bytes.

use crate::grid::{GridField, GridPdf, Mask};
use crate::paths::{DriftEstimate, SdeRun};
use std::fmt::Write as _;

fn push_float(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else {
        write!(out, "{v}").expect("string write");
    }
}

fn push_row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        push_float(out, *v);
    }
    out.push('\n');
}

/// `(x, y, t, value_re, value_im)` rows of a sampled kernel.
pub fn kernel_csv(rows: &[(f64, f64, f64, f64, f64)]) -> String {
    let mut out = String::from("x,y,t,value_re,value_im\n");
    for &(x, y, t, re, im) in rows {
        push_row(&mut out, &[x, y, t, re, im]);
    }
    out
}

/// Time-series block `(t, S, F, H, norm)` of a quantum run.
pub fn quantum_series_csv(rows: &[(f64, f64, f64, f64, f64)]) -> String {
    let mut out = String::from("t,S,F,H,norm\n");
    for &(t, s, f, h, n) in rows {
        push_row(&mut out, &[t, s, f, h, n]);
    }
    out
}

/// Time-series block `(t, S, F, H, norm, H_minus)` of a Brownian run.
pub fn brownian_series_csv(rows: &[(f64, f64, f64, f64, f64, f64)]) -> String {
    let mut out = String::from("t,S,F,H,norm,H_minus\n");
    for &(t, s, f, h, n, hm) in rows {
        push_row(&mut out, &[t, s, f, h, n, hm]);
    }
    out
}

/// Field snapshots `(t, x, rho, v, u, Q, s)`; masked nodes print `nan` for
/// the mask-dependent columns.
pub struct FieldSnapshot<'a> {
    pub time: f64,
    pub rho: &'a GridPdf,
    pub v: &'a GridField,
    pub u: &'a GridField,
    pub q: &'a GridField,
    pub s: &'a GridField,
    pub mask: &'a Mask,
}

pub fn field_snapshots_csv(snapshots: &[FieldSnapshot<'_>]) -> String {
    let mut out = String::from("t,x,rho,v,u,Q,s\n");
    for snap in snapshots {
        let grid = snap.rho.grid();
        for i in 0..grid.len() {
            let inside = snap.mask.is_inside(i);
            let pick = |f: &GridField| if inside { f.values()[i] } else { f64::NAN };
            push_row(
                &mut out,
                &[
                    snap.time,
                    grid.node(i),
                    snap.rho.values()[i],
                    pick(snap.v),
                    pick(snap.u),
                    pick(snap.q),
                    pick(snap.s),
                ],
            );
        }
    }
    out
}

/// Trajectory rows `(trajectory_id, t, x)` of an SDE run.
pub fn ensemble_csv(run: &SdeRun) -> String {
    let mut out = String::from("trajectory_id,t,x\n");
    let n = run.ensembles.first().map_or(0, |e| e.positions.len());
    for traj in 0..n {
        for (t, ens) in run.times.iter().zip(&run.ensembles) {
            write!(out, "{traj},").expect("string write");
            push_float(&mut out, *t);
            out.push(',');
            push_float(&mut out, ens.positions[traj]);
            out.push('\n');
        }
    }
    out
}

/// Binned drift rows `(bin_center, count, drift_est, drift_analytic, stderr)`.
pub fn drift_bins_csv(est: &DriftEstimate, analytic: impl Fn(f64) -> f64) -> String {
    let mut out = String::from("bin_center,count,drift_est,drift_analytic,stderr\n");
    for i in 0..est.bin_centers.len() {
        let c = est.bin_centers[i];
        push_float(&mut out, c);
        write!(out, ",{},", est.counts[i]).expect("string write");
        push_float(&mut out, est.estimates[i]);
        out.push(',');
        push_float(&mut out, analytic(c));
        out.push(',');
        push_float(&mut out, est.standard_errors[i]);
        out.push('\n');
    }
    out
}

/// Kinetic fields `(x, t, P_kin, P_osm, Theta_kin, Theta_osm, kramers_residual,
/// transport_residual)`.
#[allow(clippy::type_complexity)]
pub fn kinetic_csv(rows: &[(f64, f64, f64, f64, f64, f64, f64, f64)]) -> String {
    let mut out =
        String::from("x,t,P_kin,P_osm,Theta_kin,Theta_osm,kramers_residual,transport_residual\n");
    for r in rows {
        push_row(&mut out, &[r.0, r.1, r.2, r.3, r.4, r.5, r.6, r.7]);
    }
    out
}

/// Variational profile `(x, rho, V)`.
pub fn variational_csv(rho: &GridPdf, v_ext: &GridField) -> String {
    let mut out = String::from("x,rho,V\n");
    let grid = rho.grid();
    for i in 0..grid.len() {
        push_row(
            &mut out,
            &[grid.node(i), rho.values()[i], v_ext.values()[i]],
        );
    }
    out
}

/// One-line variational summary.
pub fn variational_summary_csv(
    multiplier: f64,
    functional_value: f64,
    constraint_residual: f64,
) -> String {
    let mut out = String::from("multiplier,functional_value,constraint_residual\n");
    push_row(
        &mut out,
        &[multiplier, functional_value, constraint_residual],
    );
    out
}

/// Recoil snapshots `(t, x, rho, v, Q, brownian_pulse_v, anti_pulse_v)`.
pub struct RecoilSnapshot<'a> {
    pub time: f64,
    pub rho: &'a GridPdf,
    pub v: &'a GridField,
    pub q: &'a GridField,
    pub q_mask: &'a Mask,
    pub brownian_pulse: &'a GridField,
    pub anti_pulse: &'a GridField,
}

pub fn recoil_csv(snapshots: &[RecoilSnapshot<'_>]) -> String {
    let mut out = String::from("t,x,rho,v,Q,brownian_pulse_v,anti_pulse_v\n");
    for snap in snapshots {
        let grid = snap.rho.grid();
        for i in 0..grid.len() {
            let q = if snap.q_mask.is_inside(i) {
                snap.q.values()[i]
            } else {
                f64::NAN
            };
            push_row(
                &mut out,
                &[
                    snap.time,
                    grid.node(i),
                    snap.rho.values()[i],
                    snap.v.values()[i],
                    q,
                    snap.brownian_pulse.values()[i],
                    snap.anti_pulse.values()[i],
                ],
            );
        }
    }
    out
}

/// Functional report as `(name, value)` rows.
pub fn functional_report_csv(report: &crate::functionals::FunctionalReport) -> String {
    let mut out = String::from("name,value\n");
    let mut line = |name: &str, v: f64| {
        out.push_str(name);
        out.push(',');
        push_float(&mut out, v);
        out.push('\n');
    };
    line("shannon", report.shannon);
    line("fisher", report.fisher);
    line("mean_quantum_potential", report.mean_quantum_potential);
    line("variance", report.variance);
    line(
        "fourier_variance",
        report.fourier_variance.unwrap_or(f64::NAN),
    );
    line("cramer_rao_slack", report.cramer_rao_slack);
    line("isoperimetric_slack", report.isoperimetric_slack);
    line("fourier_slack", report.fourier_slack.unwrap_or(f64::NAN));
    line(
        "chain_lower_slack",
        report.chain_lower_slack.unwrap_or(f64::NAN),
    );
    line("chain_upper_slack", report.chain_upper_slack);
    line("violation", if report.violation { 1.0 } else { 0.0 });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rows_are_stable_bytes() {
        let rows = vec![(0.5, 1.0, 0.25, 0.1234567890123, -0.5)];
        let a = kernel_csv(&rows);
        let b = kernel_csv(&rows);
        assert_eq!(a, b);
        assert!(a.starts_with("x,y,t,value_re,value_im\n"));
        assert!(a.ends_with('\n'));
        assert!(!a.contains('\r'));
    }

    #[test]
    fn nan_prints_as_nan() {
        let mut s = String::new();
        push_float(&mut s, f64::NAN);
        assert_eq!(s, "nan");
    }
}
