//! Observables and decoherence-time estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::KBodySpec;
use crate::propagate::StochasticModel;
use crate::qcore::{eigh, CVector, DenseOperator, DensityMatrix, PauliAxis, StateVector, C64};

/// Slack allowed outside `[0, 1]` before a fidelity is reported as an error.
pub const FIDELITY_CLAMP_TOL: f64 = 1e-9;

/// `F = <psi0| rho |psi0>`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, psi0: &StateVector) -> Result<f64> {
    if rho.dim() != psi0.dim() {
        return Err(Error::Dimension(format!("rho dimension {} vs state {}", rho.dim(), psi0.dim())));
    }
    let v = psi0.amplitudes();
    let f = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
    if !(-FIDELITY_CLAMP_TOL..=1.0 + FIDELITY_CLAMP_TOL).contains(&f) {
        return Err(Error::Numerical(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Bures length `arccos(sqrt(F))`.
pub fn bures_length(rho: &DensityMatrix, psi0: &StateVector) -> Result<f64> {
    Ok(fidelity(rho, psi0)?.sqrt().acos())
}

/// `lambda_max - lambda_min`.
pub fn seminorm(op: &DenseOperator) -> Result<f64> {
    op.require_hermitian("seminorm argument")?;
    let values: Vec<f64> = if op.is_diagonal() {
        op.diagonal().iter().map(|z| z.re).collect()
    } else {
        eigh(op)?.values
    };
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

fn variance_from_image(psi: &CVector, l_psi: &CVector) -> f64 {
    let mean = psi.dotc(l_psi).re;
    (l_psi.norm_squared() - mean * mean).max(0.0)
}

/// `<L^2> - <L>^2` in a pure state.
pub fn variance(op: &DenseOperator, state: &StateVector) -> Result<f64> {
    op.require_hermitian("variance argument")?;
    let l_psi = op.apply(state.amplitudes())?;
    Ok(variance_from_image(state.amplitudes(), &l_psi))
}

/// Variance of a diagonal operator given by its diagonal.
pub fn variance_diagonal(diag: &[f64], state: &StateVector) -> Result<f64> {
    if diag.len() != state.dim() {
        return Err(Error::Dimension(format!("{} diagonal entries vs state {}", diag.len(), state.dim())));
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for (p, &l) in state.amplitudes().iter().map(|z| z.norm_sqr()).zip(diag) {
        m1 += p * l;
        m2 += p * l * l;
    }
    Ok((m2 - m1 * m1).max(0.0))
}

/// Decoherence-time estimates for one initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceReport {
    /// `1 / sum gamma DeltaL^2`.
    pub tau_d_variance: f64,
    /// `4 / sum gamma ||L||^2`.
    pub tau_d_bound: f64,
    /// From the short-time fidelity slope, when a curve was fitted.
    pub tau_d_fitted: Option<f64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
}

impl DecoherenceReport {
    /// Evaluates both analytic estimates over the model's channels, using
    /// `A` with rate `gamma'` and `B` with rate `gamma''`.
    pub fn for_model(model: &StochasticModel, psi0: &StateVector) -> Result<Self> {
        let model = model.unframed()?;
        let (mut rate, mut bound) = (0.0, 0.0);
        for ch in model.channels() {
            let (g_re, g_im) = ch.noise().amplitudes();
            rate += g_re * variance(ch.a_op(), psi0)?;
            bound += 0.25 * g_re * seminorm(ch.a_op())?.powi(2);
            if let Some(b) = ch.b_op() {
                rate += g_im * variance(b, psi0)?;
                bound += 0.25 * g_im * seminorm(b)?.powi(2);
            }
        }
        Ok(Self { tau_d_variance: rate.recip(), tau_d_bound: bound.recip(), tau_d_fitted: None, n: None, k: None })
    }
}

/// Result of the short-time fidelity fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTimeFit {
    /// Initial decay rate `-dF/dt` at `t = 0`.
    pub slope: f64,
    /// `1 / slope`; infinite when the slope is not positive.
    pub tau_d_fitted: f64,
    pub n_samples: usize,
}

/// Minimum number of samples inside the fit window.
pub const SHORT_TIME_MIN_SAMPLES: usize = 5;

/// Fits `1 - F(t) = a t + b t^2` through the origin over `0 < t <= window_end`
/// and returns `a`. The quadratic term absorbs the curvature of the decay so
/// the slope is unbiased at first order in the window length.
pub fn short_time_fit(times: &[f64], fidelity: &[f64], window_end: f64) -> Result<ShortTimeFit> {
    if times.len() != fidelity.len() {
        return Err(Error::Dimension(format!("{} times vs {} values", times.len(), fidelity.len())));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(fidelity)
        .filter(|(&t, _)| t > 0.0 && t <= window_end)
        .map(|(&t, &f)| (t, 1.0 - f))
        .collect();
    if pts.len() < SHORT_TIME_MIN_SAMPLES {
        return Err(Error::Fit(format!(
            "window t <= {window_end} holds {} samples, need at least {SHORT_TIME_MIN_SAMPLES}",
            pts.len()
        )));
    }
    let t_max = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        let s = t / t_max;
        s11 += s * s;
        s12 += s * s * s;
        s22 += s * s * s * s;
        r1 += s * y;
        r2 += s * s * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-14 * s11 * s22 {
        return Err(Error::Fit("degenerate sample times".into()));
    }
    let a = (r1 * s22 - r2 * s12) / det / t_max;
    Ok(ShortTimeFit {
        slope: a,
        tau_d_fitted: if a > 0.0 { a.recip() } else { f64::INFINITY },
        n_samples: pts.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    /// `|+>^N`.
    Product,
    /// `(|argmax L> + |argmin L>)/sqrt(2)` for a diagonal `L`.
    MaxDecoherence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub n_values: Vec<usize>,
    /// `1/tau_D = gamma DeltaL^2` at each `N`.
    pub inverse_tau: Vec<f64>,
    /// Least-squares slope of `log(1/tau_D)` against `log N`.
    pub exponent: f64,
    pub intercept: f64,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("need at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `gamma DeltaL^2` for the symmetrized k-body operator built from `axes`.
pub fn inverse_decoherence_time(axes: &[PauliAxis], n: usize, family: StateFamily, gamma: f64) -> Result<f64> {
    let spec = KBodySpec::pauli_string(n, axes)?;
    let dim = spec.dim();
    let var = match family {
        StateFamily::Product => {
            let amp = C64::new((dim as f64).sqrt().recip(), 0.0);
            let psi = StateVector::normalize(CVector::from_element(dim, amp))?;
            match spec.diagonal()? {
                Some(diag) => variance_diagonal(&diag, &psi)?,
                None => variance_from_image(psi.amplitudes(), &spec.apply(psi.amplitudes())?),
            }
        }
        StateFamily::MaxDecoherence => {
            let diag = spec.diagonal()?.ok_or_else(|| {
                Error::Unsupported("the max-decoherence family needs a diagonal kernel".into())
            })?;
            let (mut imax, mut imin) = (0, 0);
            for (i, &v) in diag.iter().enumerate() {
                if v > diag[imax] {
                    imax = i;
                }
                if v < diag[imin] {
                    imin = i;
                }
            }
            if imax == imin {
                0.0
            } else {
                let mut v = CVector::zeros(dim);
                v[imax] = C64::new(1.0, 0.0);
                v[imin] = C64::new(1.0, 0.0);
                variance_diagonal(&diag, &StateVector::normalize(v)?)?
            }
        }
    };
    Ok(gamma * var)
}

/// Fits the exponent of `1/tau_D ~ N^x` over `n_values`.
pub fn scaling_study(axes: &[PauliAxis], n_values: &[usize], family: StateFamily, gamma: f64) -> Result<ScalingResult> {
    if n_values.len() < 3 {
        return Err(Error::Fit(format!("scaling fit needs at least 3 values of N, got {}", n_values.len())));
    }
    let inverse_tau = n_values
        .iter()
        .map(|&n| inverse_decoherence_time(axes, n, family, gamma))
        .collect::<Result<Vec<_>>>()?;
    if inverse_tau.iter().any(|&r| r <= 0.0) {
        return Err(Error::Fit("decoherence rate vanishes for some N".into()));
    }
    let x: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = inverse_tau.iter().map(|r| r.ln()).collect();
    let (exponent, intercept) = linear_fit(&x, &y)?;
    Ok(ScalingResult { n_values: n_values.to_vec(), inverse_tau, exponent, intercept })
}
