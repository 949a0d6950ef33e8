//! Linearized dynamics around `rho = 1/2`, `upsilon + eta = 0`.
//!
//! With `u = rho_tilde - C0 / (alpha2 - 4)` the linear system is
//! `u'' + 2 d u' + (alpha2 - 4) u = 0`, where `d = 0` for the Correct form
//! and `d = (alpha1 - 1) / 2` for the erratum form, and `eta_tilde = u'`.
//! `eta` then follows from `eta' = -alpha2 rho_tilde - alpha1 eta_tilde + C0`,
//! which drifts at `-4 C0 / (alpha2 - 4)`; `upsilon = eta_tilde - eta`
//! drifts at the opposite rate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, InitialSpec, ModelParams, Variant};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;

/// Homogeneous part of the linear `rho_tilde` solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearMode {
    /// `A e^{-d tau} sin(omega tau + theta)`
    Oscillatory,
    /// `c1 e^{r1 tau} + c2 e^{r2 tau}`
    RealExponents { rates: [f64; 2], coeffs: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPrediction {
    pub alpha1: f64,
    pub alpha2: f64,
    pub c0: f64,
    /// Angular frequency per tau; 0 when not oscillatory.
    pub omega: f64,
    /// `omega / 2 pi`.
    pub nu: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// `C0 / (alpha2 - 4)`
    pub rho_offset: f64,
    pub eta_drift_rate: f64,
    pub upsilon_drift_rate: f64,
    pub damping: f64,
    /// `0.25 (alpha2 - 4) / |C0|`; infinite for `C0 = 0`.
    pub tau_c: f64,
    pub mode: LinearMode,
    eta0: f64,
    upsilon0: f64,
    rho_tilde0: f64,
}

impl LinearPrediction {
    pub fn period(&self) -> f64 {
        if self.omega > 0.0 {
            std::f64::consts::TAU / self.omega
        } else {
            f64::INFINITY
        }
    }
}

/// Exponential time-scale of `S` when `C0 != 0`.
pub fn tau_c(alpha2: f64, c0: f64) -> f64 {
    if c0 == 0.0 {
        f64::INFINITY
    } else {
        0.25 * (alpha2 - 4.0) / c0.abs()
    }
}

pub fn linearize(params: &ModelParams, spec: &InitialSpec) -> Result<LinearPrediction> {
    let params = params.validated()?;
    let (c0, _) = dynamics::resolve_closure(&params, spec)?;
    let stiffness = params.alpha2 - 4.0;
    if stiffness == 0.0 {
        return Err(Error::Degenerate(
            "alpha2 = 4: the linear restoring force vanishes".into(),
        ));
    }
    let damping = match params.variant {
        Variant::Correct => 0.0,
        Variant::IlinskiErratum => 0.5 * (params.alpha1 - 1.0),
    };
    let rho_offset = c0 / stiffness;
    let s0 = spec.state0;
    let u0 = s0.rho_tilde() - rho_offset;
    let du0 = s0.eta_tilde();

    let discriminant = damping * damping - stiffness;
    let (omega, amplitude, phase, mode) = if discriminant < 0.0 {
        let omega = (-discriminant).sqrt();
        let cos_part = (du0 + damping * u0) / omega;
        (omega, u0.hypot(cos_part), u0.atan2(cos_part), LinearMode::Oscillatory)
    } else if discriminant > 0.0 {
        let root = discriminant.sqrt();
        let rates = [-damping + root, -damping - root];
        let c1 = (du0 - rates[1] * u0) / (rates[0] - rates[1]);
        let coeffs = [c1, u0 - c1];
        (0.0, 0.0, 0.0, LinearMode::RealExponents { rates, coeffs })
    } else {
        return Err(Error::Degenerate(format!(
            "critically damped linearization (damping^2 = alpha2 - 4 = {stiffness})"
        )));
    };

    let eta_drift_rate = -4.0 * c0 / stiffness;
    Ok(LinearPrediction {
        alpha1: params.alpha1,
        alpha2: params.alpha2,
        c0,
        omega,
        nu: omega / std::f64::consts::TAU,
        amplitude,
        phase,
        rho_offset,
        eta_drift_rate,
        upsilon_drift_rate: -eta_drift_rate,
        damping,
        tau_c: tau_c(params.alpha2, c0),
        mode,
        eta0: s0.eta,
        upsilon0: s0.upsilon,
        rho_tilde0: s0.rho_tilde(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPoint {
    pub rho_tilde: f64,
    pub eta_tilde: f64,
    pub eta: f64,
    pub upsilon: f64,
}

pub fn linear_trajectory(pred: &LinearPrediction, tau: f64) -> LinearPoint {
    // u, u' and the integral of u over [0, tau].
    let (u, du, u_int) = match pred.mode {
        LinearMode::Oscillatory => {
            let (a, w, d, th) = (pred.amplitude, pred.omega, pred.damping, pred.phase);
            let decay = (-d * tau).exp();
            let arg = w * tau + pred.phase;
            let u = a * decay * arg.sin();
            let du = a * decay * (w * arg.cos() - d * arg.sin());
            let antiderivative =
                |e: f64, x: f64| e * (-d * x.sin() - w * x.cos()) / (d * d + w * w);
            let u_int = a * (antiderivative(decay, arg) - antiderivative(1.0, th));
            (u, du, u_int)
        }
        LinearMode::RealExponents { rates, coeffs } => {
            let mut acc = (0.0, 0.0, 0.0);
            for (r, c) in rates.into_iter().zip(coeffs) {
                let e = (r * tau).exp();
                acc.0 += c * e;
                acc.1 += c * r * e;
                acc.2 += c * (e - 1.0) / r;
            }
            acc
        }
    };
    let rho_tilde = pred.rho_offset + u;
    let eta_tilde = du;
    let eta = pred.eta0 + pred.eta_drift_rate * tau
        - pred.alpha2 * u_int
        - pred.alpha1 * (rho_tilde - pred.rho_tilde0);
    LinearPoint {
        rho_tilde,
        eta_tilde,
        eta,
        upsilon: if tau == 0.0 { pred.upsilon0 } else { eta_tilde - eta },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    NeutralOscillation,
    ExponentialDecayOfS { tau_c: f64 },
    ExponentialGrowthOfS { tau_c: f64 },
    /// `alpha2 <= 4`; carries the linear exponents `+-sqrt(4 - alpha2)`.
    NonOscillatory { exponents: [f64; 2] },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::NeutralOscillation => "NeutralOscillation",
            Regime::ExponentialDecayOfS { .. } => "ExponentialDecayOfS",
            Regime::ExponentialGrowthOfS { .. } => "ExponentialGrowthOfS",
            Regime::NonOscillatory { .. } => "NonOscillatory",
        }
    }

    pub fn tau_c(&self) -> Option<f64> {
        match *self {
            Regime::ExponentialDecayOfS { tau_c } | Regime::ExponentialGrowthOfS { tau_c } => Some(tau_c),
            _ => None,
        }
    }
}

pub fn classify(params: &ModelParams, c0: f64) -> Regime {
    let stiffness = params.alpha2 - 4.0;
    if stiffness <= 0.0 {
        let r = (-stiffness).sqrt();
        return Regime::NonOscillatory { exponents: [r, -r] };
    }
    if c0 > 0.0 {
        Regime::ExponentialDecayOfS {
            tau_c: tau_c(params.alpha2, c0),
        }
    } else if c0 < 0.0 {
        Regime::ExponentialGrowthOfS {
            tau_c: tau_c(params.alpha2, c0),
        }
    } else {
        Regime::NeutralOscillation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// Decay rate of the `rho_tilde` oscillation amplitude, per tau.
    pub damping: f64,
    pub omega: f64,
    /// Least-squares slope of the period-averaged `eta`.
    pub drift: f64,
    /// Least-squares slope of the period-averaged `upsilon`.
    pub upsilon_drift: f64,
    pub extrema: usize,
}

/// Turning points of `rho_tilde`, i.e. zeros of `eta_tilde` (since
/// `rho' = 2 sqrt(rho (1 - rho)) sinh(eta_tilde)`), refined by bisection on the
/// dense output.
pub fn rho_extrema(traj: &Trajectory) -> Vec<(f64, f64)> {
    const TAU_RESOLUTION: f64 = 1e-8;
    let eta_tilde = |tau: f64| traj.state_at(tau).map_or(f64::NAN, |s| s.eta_tilde());
    let mut out = Vec::new();
    for seg in traj.segments() {
        // Sub-sample each step so two close sign changes are not missed.
        const SUB: usize = 4;
        let mut prev_t = seg.t0;
        let mut prev_v = eta_tilde(prev_t);
        for j in 1..=SUB {
            let t = if j == SUB { seg.t1() } else { seg.t0 + seg.h * j as f64 / SUB as f64 };
            let v = eta_tilde(t);
            if prev_v != 0.0 && v != 0.0 && prev_v.signum() != v.signum() {
                let (mut lo, mut hi, mut vlo) = (prev_t, t, prev_v);
                while hi - lo > TAU_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    let vm = eta_tilde(mid);
                    if vm.signum() == vlo.signum() {
                        lo = mid;
                        vlo = vm;
                    } else {
                        hi = mid;
                    }
                }
                let tz = 0.5 * (lo + hi);
                if let Some(s) = traj.state_at(tz) {
                    out.push((tz, s.rho_tilde()));
                }
            }
            prev_t = t;
            prev_v = v;
        }
    }
    out
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

pub fn envelope_fit(traj: &Trajectory) -> Result<EnvelopeFit> {
    let extrema = rho_extrema(traj);
    if extrema.len() < 3 {
        return Err(Error::Fit(format!(
            "found {} extrema of rho_tilde, need at least 3",
            extrema.len()
        )));
    }

    // Half peak-to-trough heights are insensitive to the C0 offset.
    let (times, log_amps): (Vec<f64>, Vec<f64>) = extrema
        .windows(2)
        .map(|w| (0.5 * (w[0].0 + w[1].0), (0.5 * (w[1].1 - w[0].1).abs()).ln()))
        .unzip();
    let damping = -ols_slope(&times, &log_amps);

    let first = extrema[0].0;
    let last = extrema[extrema.len() - 1].0;
    let half_periods = (extrema.len() - 1) as f64;
    let omega = std::f64::consts::PI * half_periods / (last - first);

    // Mean of eta and upsilon over each full period (extremum i to i + 2),
    // then the least-squares slope of those means. With a single period the
    // raw samples over it are regressed instead.
    const PER_PERIOD: usize = 128;
    let state = |t: f64| {
        traj.state_at(t)
            .ok_or_else(|| Error::Fit(format!("no dense output at tau = {t}")))
    };
    let (mut centers, mut eta_means, mut ups_means) = (Vec::new(), Vec::new(), Vec::new());
    let (mut raw_t, mut raw_eta, mut raw_ups) = (Vec::new(), Vec::new(), Vec::new());
    for w in extrema.windows(3) {
        let (a, b) = (w[0].0, w[2].0);
        let (mut se, mut su) = (0.0, 0.0);
        for k in 0..PER_PERIOD {
            let t = a + (b - a) * (k as f64 + 0.5) / PER_PERIOD as f64;
            let s = state(t)?;
            se += s.eta;
            su += s.upsilon;
            if centers.is_empty() {
                raw_t.push(t);
                raw_eta.push(s.eta);
                raw_ups.push(s.upsilon);
            }
        }
        centers.push(0.5 * (a + b));
        eta_means.push(se / PER_PERIOD as f64);
        ups_means.push(su / PER_PERIOD as f64);
    }
    let (drift, upsilon_drift) = if centers.len() >= 2 {
        (ols_slope(&centers, &eta_means), ols_slope(&centers, &ups_means))
    } else {
        (ols_slope(&raw_t, &raw_eta), ols_slope(&raw_t, &raw_ups))
    };

    Ok(EnvelopeFit {
        damping,
        omega,
        drift,
        upsilon_drift,
        extrema: extrema.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::State;
    use approx::assert_relative_eq;

    fn params(alpha1: f64, alpha2: f64, variant: Variant) -> ModelParams {
        ModelParams::new(alpha1, alpha2, variant).unwrap()
    }

    #[test]
    fn frequency_and_period() {
        let p = params(1.5, 10.0, Variant::Correct);
        let pred = linearize(&p, &InitialSpec::with_c0(State::new(0.2, 0.0, 0.5), 0.0)).unwrap();
        assert_eq!(pred.omega, 6f64.sqrt());
        assert!((pred.nu - 0.38985).abs() < 1e-5);
        assert!((pred.period() - 2.5651).abs() < 1e-4);
        assert_eq!(pred.damping, 0.0);
        assert_eq!(pred.tau_c, f64::INFINITY);
    }

    #[test]
    fn drift_and_tau_c() {
        let p = params(1.5, 10.0, Variant::Correct);
        let pred = linearize(&p, &InitialSpec::with_c0(State::new(0.2, 0.0, 0.5), 0.1)).unwrap();
        assert!((pred.eta_drift_rate + 0.066667).abs() < 1e-6);
        assert_eq!(pred.upsilon_drift_rate, -pred.eta_drift_rate);
        assert_eq!(pred.tau_c, 15.0);
    }

    #[test]
    fn amplitude_and_phase_from_initial_conditions() {
        let p = params(1.5, 10.0, Variant::Correct);
        let pred = linearize(&p, &InitialSpec::with_c0(State::new(0.0, 0.0, 0.501), 0.0)).unwrap();
        assert_relative_eq!(pred.amplitude, 1e-3, epsilon = 1e-15);
        assert_relative_eq!(pred.phase, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let pt = linear_trajectory(&pred, 1.3);
        assert_relative_eq!(pt.rho_tilde, 1e-3 * (6f64.sqrt() * 1.3).cos(), epsilon = 1e-14);
    }

    #[test]
    fn erratum_damping() {
        let p = params(1.5, 10.0, Variant::IlinskiErratum);
        let pred = linearize(&p, &InitialSpec::with_c0(State::new(0.2, 0.0, 0.5), 0.0)).unwrap();
        assert_eq!(pred.damping, 0.25);
        assert_eq!(pred.omega, (6.0f64 - 0.0625).sqrt());
    }

    #[test]
    fn degenerate_cases() {
        let s = InitialSpec::with_c0(State::new(0.0, 0.0, 0.5), 0.0);
        assert!(matches!(linearize(&params(1.0, 4.0, Variant::Correct), &s), Err(Error::Degenerate(_))));
        // Erratum, critical damping: (alpha1 - 1)^2 / 4 = alpha2 - 4.
        assert!(matches!(linearize(&params(3.0, 5.0, Variant::IlinskiErratum), &s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn initial_conditions_reproduced() {
        let spec = InitialSpec::with_c0(State::new(0.3, -0.12, 0.47), 0.05);
        for (variant, a2) in [
            (Variant::Correct, 10.0),
            (Variant::IlinskiErratum, 10.0),
            (Variant::Correct, 3.0),
            (Variant::IlinskiErratum, 4.5),
        ] {
            let pred = linearize(&params(2.5, a2, variant), &spec).unwrap();
            let pt = linear_trajectory(&pred, 0.0);
            assert_relative_eq!(pt.rho_tilde, -0.03, epsilon = 1e-15);
            assert_relative_eq!(pt.eta_tilde, 0.18, epsilon = 1e-15);
            assert_relative_eq!(pt.eta, 0.3, epsilon = 1e-15);
            assert_eq!(pt.upsilon, -0.12);
        }
    }

    /// The closed form satisfies the linear ODEs: check by central differences.
    #[test]
    fn closed_form_satisfies_linear_equations() {
        let spec = InitialSpec::with_c0(State::new(0.1, 0.05, 0.52), -0.07);
        for (variant, a1, a2) in [
            (Variant::Correct, 1.5, 10.0),
            (Variant::IlinskiErratum, 1.5, 10.0),
            (Variant::IlinskiErratum, 0.0, 7.0),
            (Variant::Correct, 0.5, 2.0),
        ] {
            let pred = linearize(&params(a1, a2, variant), &spec).unwrap();
            let k = match variant {
                Variant::Correct => a1,
                Variant::IlinskiErratum => 1.0,
            };
            for tau in [0.4, 1.7, 3.3] {
                let h = 1e-5;
                let (m, c, p) = (
                    linear_trajectory(&pred, tau - h),
                    linear_trajectory(&pred, tau),
                    linear_trajectory(&pred, tau + h),
                );
                let d = |f: fn(&LinearPoint) -> f64| (f(&p) - f(&m)) / (2.0 * h);
                let tol = 1e-7;
                assert!((d(|x| x.rho_tilde) - c.eta_tilde).abs() < tol);
                let eta_rhs = -a2 * c.rho_tilde - a1 * c.eta_tilde + pred.c0;
                assert!((d(|x| x.eta) - eta_rhs).abs() < tol, "{variant} {tau}");
                let ups_rhs = 4.0 * c.rho_tilde + k * c.eta_tilde;
                assert!((d(|x| x.upsilon) - ups_rhs).abs() < tol, "{variant} {tau}");
            }
        }
    }

    #[test]
    fn regimes() {
        let p = params(1.5, 10.0, Variant::Correct);
        assert_eq!(classify(&p, 0.0), Regime::NeutralOscillation);
        assert_eq!(classify(&p, 0.1), Regime::ExponentialDecayOfS { tau_c: 15.0 });
        assert_eq!(classify(&p, -0.1), Regime::ExponentialGrowthOfS { tau_c: 15.0 });
        let r = classify(&params(1.5, 3.0, Variant::Correct), 0.0);
        assert_eq!(r, Regime::NonOscillatory { exponents: [1.0, -1.0] });
        assert!(matches!(classify(&params(1.5, 4.0, Variant::Correct), 0.3), Regime::NonOscillatory { .. }));
    }

    #[test]
    fn ols_slope_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = xs.map(|x| 2.5 * x - 1.0);
        assert_relative_eq!(ols_slope(&xs, &ys), 2.5, epsilon = 1e-14);
    }
}
