use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::Observable;
use super::run::RunOutput;

/// Default absolute tolerance for deterministic comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// A stochastic comparison passes when `|z| <= Z_MAX` at this fraction of points.
pub const Z_MAX: f64 = 3.0;
pub const Z_FRACTION: f64 = 0.99;
/// Differences this small count as agreement whatever the standard error;
/// at `t = 0` both are pure roundoff.
pub const ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableDeviation {
    pub max_abs: f64,
    pub rms: f64,
    /// Fraction of points with `|z| <= 3`, when either run carries standard errors.
    pub z_fraction: Option<f64>,
    pub max_abs_z: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub tolerance: f64,
    pub observables: BTreeMap<Observable, ObservableDeviation>,
    pub pass: bool,
}

/// Compares every scalar observable present in both runs.
pub fn compare(a: &RunOutput, b: &RunOutput, tolerance: f64) -> Result<CompareReport> {
    let tol_scale = 1e-12 * a.times.iter().chain(&b.times).fold(1.0f64, |m, t| m.max(t.abs()));
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > tol_scale) {
        return Err(Error::Dimension(format!(
            "output grids differ ({} vs {} points)",
            a.times.len(),
            b.times.len()
        )));
    }
    let mut observables = BTreeMap::new();
    for (obs, ca) in &a.curves {
        let Some(cb) = b.curves.get(obs) else { continue };
        let n = ca.value.len();
        let diffs: Vec<f64> = ca.value.iter().zip(&cb.value).map(|(x, y)| x - y).collect();
        let max_abs = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
        let se_at = |i: usize| {
            let sq = |c: &super::run::Curve| c.stderr.as_ref().map_or(0.0, |s| if s[i].is_finite() { s[i] * s[i] } else { 0.0 });
            (sq(ca) + sq(cb)).sqrt()
        };
        let stochastic = ca.stderr.is_some() || cb.stderr.is_some();
        let (z_fraction, max_abs_z, pass) = if stochastic {
            let z: Vec<f64> = diffs
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let se = se_at(i);
                    if d.abs() <= ROUNDOFF {
                        0.0
                    } else if se > 0.0 {
                        d.abs() / se
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let ok = z.iter().filter(|&&z| z <= Z_MAX).count() as f64 / n as f64;
            let zmax = z.iter().fold(0.0f64, |m, &z| m.max(z));
            (Some(ok), Some(zmax), ok >= Z_FRACTION)
        } else {
            (None, None, max_abs <= tolerance)
        };
        observables.insert(*obs, ObservableDeviation { max_abs, rms, z_fraction, max_abs_z, pass });
    }
    if observables.is_empty() {
        return Err(Error::InvalidArgument("the runs share no scalar observable".into()));
    }
    let pass = observables.values().all(|d| d.pass);
    Ok(CompareReport { tolerance, observables, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::run::Curve;
    use crate::metrics::DecoherenceReport;

    fn output(values: Vec<f64>, stderr: Option<Vec<f64>>) -> RunOutput {
        let cfg = crate::cli::config::RunConfig::from_json(
            r#"{"schema":1,"model":{"preset":"ising","n_spins":2,"j":1.0},
               "noise":{"kind":"real_white","gamma":0.1},"initial_state":{"kind":"product_plus"},
               "t_max":1.0,"dt":0.5,"engine":"lindblad","observables":["fidelity"]}"#,
        )
        .unwrap();
        let mut curves = BTreeMap::new();
        let n = values.len();
        curves.insert(Observable::Fidelity, Curve { value: values, stderr });
        RunOutput {
            config: cfg,
            times: (0..n).map(|i| i as f64 * 0.5).collect(),
            curves,
            states: None,
            report: DecoherenceReport { tau_d_variance: 1.0, tau_d_bound: 1.0, tau_d_fitted: None, n: None, k: None },
            warnings: vec![],
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = output(vec![1.0, 0.9, 0.8], None);
        let r = compare(&a, &a, DEFAULT_TOLERANCE).unwrap();
        let d = &r.observables[&Observable::Fidelity];
        assert_eq!((d.max_abs, d.rms), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn deterministic_tolerance() {
        let a = output(vec![1.0, 0.9, 0.8], None);
        let b = output(vec![1.0, 0.9, 0.8 + 1e-5], None);
        assert!(!compare(&a, &b, DEFAULT_TOLERANCE).unwrap().pass);
        assert!(compare(&a, &b, 1e-4).unwrap().pass);
    }

    #[test]
    fn z_scores() {
        let a = output(vec![1.0, 0.9, 0.8], None);
        let b = output(vec![1.0, 0.91, 0.79], Some(vec![0.0, 0.01, 0.01]));
        let r = compare(&a, &b, DEFAULT_TOLERANCE).unwrap();
        let d = &r.observables[&Observable::Fidelity];
        assert_eq!(d.z_fraction, Some(1.0));
        assert!((d.max_abs_z.unwrap() - 1.0).abs() < 1e-9);
        let c = output(vec![1.0, 0.95, 0.8], Some(vec![0.0, 0.01, 0.01]));
        assert!(!compare(&a, &c, DEFAULT_TOLERANCE).unwrap().pass);
    }

    #[test]
    fn grid_mismatch() {
        let a = output(vec![1.0, 0.9, 0.8], None);
        let b = output(vec![1.0, 0.9], None);
        assert!(matches!(compare(&a, &b, DEFAULT_TOLERANCE), Err(Error::Dimension(_))));
    }
}
