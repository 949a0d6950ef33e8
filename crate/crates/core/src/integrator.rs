//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! The solver is generic over [`OdeSystem`]; [`integrate`] wraps it for the
//! money flow equations and adds the `rho` boundary guard.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Derivatives, InitialSpec, ModelParams, State};
use crate::error::{Error, Result};

pub trait OdeSystem<const N: usize> {
    fn eval(&self, t: f64, y: &[f64; N]) -> Result<[f64; N]>;

    /// `false` once `y` has left the region the caller wants to stay in.
    /// Integration stops at the first crossing.
    fn in_domain(&self, _y: &[f64; N]) -> bool {
        true
    }

    /// Whether a step-size collapse at `y` should be read as reaching the
    /// edge of the domain rather than as an accuracy failure.
    fn near_boundary(&self, _y: &[f64; N]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step, in tau units.
    pub max_step: f64,
    pub rho_epsilon: f64,
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            rho_epsilon: 1e-12,
            t_end: 50.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(self, t_end: f64) -> Self {
        Self { t_end, ..self }
    }

    pub fn with_tolerances(self, rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("t_end", self.t_end),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !(self.rho_epsilon >= 0.0 && self.rho_epsilon < 0.5) {
            return Err(Error::InvalidParams(format!(
                "rho_epsilon = {} must lie in [0, 0.5)",
                self.rho_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BoundaryReached { tau: f64 },
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i]))))
    }
}

/// Raw solver output: accepted step points and their dense segments.
#[derive(Debug, Clone)]
pub struct DenseSolution<const N: usize> {
    pub times: Vec<f64>,
    pub values: Vec<[f64; N]>,
    /// Right-hand side at each stored value, as evaluated during the solve.
    pub slopes: Vec<[f64; N]>,
    pub segments: Vec<DenseSegment<N>>,
    pub termination: Termination,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("solution has an initial sample")
    }

    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let (first, last) = (self.times[0], self.t_end());
        if !(t >= first && t <= last) {
            return None;
        }
        if t == last {
            return self.values.last().copied();
        }
        let idx = self.segments.partition_point(|seg| seg.t1() <= t);
        self.segments.get(idx).map(|seg| seg.eval(t))
    }
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Hairer & Wanner's DOPRI5 defaults).
const SAFETY: f64 = 0.9;
const BETA_PI: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA_PI * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 5_000_000;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn rms_norm<const N: usize>(v: &[f64; N], scale: &[f64; N]) -> f64 {
    (v.iter().zip(scale).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt()
}

struct Step<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: f64,
    segment: DenseSegment<N>,
}

fn try_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Step<N>> {
    let k2 = sys.eval(t + C2 * h, &axpy(y, h, &[(A21, k1)]))?;
    let k3 = sys.eval(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = sys.eval(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = sys.eval(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = sys.eval(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = sys.eval(t + h, &y1)?;

    let err_vec: [f64; N] = std::array::from_fn(|i| {
        h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    });
    let scale: [f64; N] = std::array::from_fn(|i| abs_tol + rel_tol * y[i].abs().max(y1[i].abs()));
    let err = rms_norm(&err_vec, &scale);
    if !err.is_finite() {
        return Err(Error::NonFinite(format!("error estimate at t = {t}, h = {h}")));
    }

    let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
    let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
    let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
    let r5: [f64; N] = std::array::from_fn(|i| {
        h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
    });
    Ok(Step {
        y1,
        k7,
        err,
        segment: DenseSegment {
            t0: t,
            h,
            coeffs: [*y, r2, r3, r4, r5],
        },
    })
}

fn initial_step<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
) -> f64 {
    let scale: [f64; N] = std::array::from_fn(|i| abs_tol + rel_tol * y0[i].abs());
    let d0 = rms_norm(y0, &scale);
    let d1 = rms_norm(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(max_step);
    let Ok(f1) = sys.eval(t0 + h0, &axpy(y0, h0, &[(1.0, f0)])) else {
        return h0 * 0.1;
    };
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = rms_norm(&diff, &scale) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(max_step)
}

/// Locate the boundary crossing inside `seg` by bisection on the dense output.
fn bisect_exit<const N: usize, S: OdeSystem<N>>(sys: &S, seg: &DenseSegment<N>) -> f64 {
    let (mut lo, mut hi) = (seg.t0, seg.t1());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sys.in_domain(&seg.eval(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Integrate `sys` from `(t0, y0)` to `t_end > t0`.
///
/// Steps whose stages fail to evaluate are rejected and retried with a
/// smaller step. If the step then collapses, the run ends with
/// [`Termination::BoundaryReached`]; a collapse from accuracy alone is a
/// [`Error::StepFailure`].
pub fn solve<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
) -> Result<DenseSolution<N>> {
    if t_end.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParams(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    if !sys.in_domain(&y0) {
        return Err(Error::Domain(format!("initial value {y0:?} outside the domain")));
    }
    let mut k1 = sys.eval(t0, &y0)?;
    let mut sol = DenseSolution {
        times: vec![t0],
        values: vec![y0],
        slopes: vec![k1],
        segments: Vec::new(),
        termination: Termination::Completed,
    };
    let (mut t, mut y) = (t0, y0);
    let mut h = initial_step(sys, t0, &y0, &k1, rel_tol, abs_tol, max_step);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut eval_failed = false;

    for _ in 0..MAX_STEPS {
        if t >= t_end {
            return Ok(sol);
        }
        let min_step = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < min_step {
            if eval_failed || sys.near_boundary(&y) {
                sol.termination = Termination::BoundaryReached { tau: t };
                return Ok(sol);
            }
            return Err(Error::StepFailure {
                tau: t,
                step: h,
                partial: None,
            });
        }
        let last = t + h >= t_end || (t_end - t - h) < min_step;
        let h_try = if last { t_end - t } else { h };

        let step = match try_step(sys, t, &y, &k1, h_try, rel_tol, abs_tol) {
            Ok(step) => step,
            Err(Error::Domain(_)) | Err(Error::NonFinite(_)) => {
                eval_failed = true;
                last_rejected = true;
                h = h_try * 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };

        let fac11 = step.err.powf(EXPO);
        if step.err <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA_PI);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_try / fac;
            if last_rejected {
                h_new = h_new.min(h_try);
            }
            fac_old = step.err.max(1e-4);
            last_rejected = false;
            eval_failed = false;

            if !sys.in_domain(&step.y1) {
                let tau = bisect_exit(sys, &step.segment);
                let y_exit = step.segment.eval(tau);
                if tau > t {
                    sol.times.push(tau);
                    sol.values.push(y_exit);
                    sol.slopes.push(sys.eval(tau, &y_exit).unwrap_or([f64::NAN; N]));
                    sol.segments.push(step.segment);
                }
                sol.termination = Termination::BoundaryReached { tau };
                return Ok(sol);
            }

            t = if last { t_end } else { t + h_try };
            y = step.y1;
            k1 = step.k7;
            sol.times.push(t);
            sol.values.push(y);
            sol.slopes.push(k1);
            sol.segments.push(DenseSegment {
                h: t - step.segment.t0,
                ..step.segment
            });
            h = h_new.min(max_step);
        } else {
            h = h_try / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Err(Error::StepFailure {
        tau: t,
        step: h,
        partial: None,
    })
}

/// Money flow equations as an [`OdeSystem`] with the `rho` guard.
#[derive(Debug, Clone, Copy)]
pub struct MoneyFlowSystem {
    pub params: ModelParams,
    pub c0: f64,
    pub rho_epsilon: f64,
}

impl OdeSystem<3> for MoneyFlowSystem {
    fn eval(&self, _t: f64, y: &[f64; 3]) -> Result<[f64; 3]> {
        dynamics::rhs(&self.params, self.c0, &State::from_array(*y)).map(Derivatives::to_array)
    }

    fn in_domain(&self, y: &[f64; 3]) -> bool {
        y[2] >= self.rho_epsilon && y[2] <= 1.0 - self.rho_epsilon
    }

    fn near_boundary(&self, y: &[f64; 3]) -> bool {
        // The upsilon' term diverges like (rho (1 - rho))^{-1/2}.
        y[2].min(1.0 - y[2]) < self.rho_epsilon.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: f64,
    pub state: State,
}

/// Solution of the money flow equations with dense output.
#[derive(Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub c0: f64,
    pub eta_prime0: f64,
    pub termination: Termination,
    solution: DenseSolution<3>,
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("params", &self.params)
            .field("c0", &self.c0)
            .field("samples", &self.len())
            .field("t_end", &self.t_end())
            .field("termination", &self.termination)
            .finish()
    }
}

impl Trajectory {
    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        self.solution
            .times
            .iter()
            .zip(&self.solution.values)
            .map(|(&tau, &y)| Sample {
                tau,
                state: State::from_array(y),
            })
    }

    pub fn len(&self) -> usize {
        self.solution.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.solution.t_end()
    }

    pub fn initial_state(&self) -> State {
        State::from_array(self.solution.values[0])
    }

    pub fn final_state(&self) -> State {
        State::from_array(*self.solution.values.last().expect("nonempty"))
    }

    /// Dense-output state; `None` outside `[0, t_end]`.
    pub fn state_at(&self, tau: f64) -> Option<State> {
        self.solution.eval(tau).map(State::from_array)
    }

    /// Right-hand side evaluated at the dense-output state.
    pub fn derivatives_at(&self, tau: f64) -> Result<Derivatives> {
        let s = self
            .state_at(tau)
            .ok_or_else(|| Error::Sampling(format!("tau = {tau} outside [0, {}]", self.t_end())))?;
        dynamics::rhs(&self.params, self.c0, &s)
    }

    pub fn energy_at(&self, tau: f64) -> Result<f64> {
        let s = self
            .state_at(tau)
            .ok_or_else(|| Error::Sampling(format!("tau = {tau} outside [0, {}]", self.t_end())))?;
        dynamics::energy(&self.params, self.c0, &s)
    }

    /// Derivatives the solver evaluated at each stored sample.
    pub fn sample_derivatives(&self) -> impl Iterator<Item = Derivatives> + '_ {
        self.solution.slopes.iter().map(|k| Derivatives {
            eta_prime: k[0],
            upsilon_prime: k[1],
            rho_prime: k[2],
        })
    }

    pub fn segments(&self) -> &[DenseSegment<3>] {
        &self.solution.segments
    }

    /// Overwrite one stored sample; used to check that residual checks notice.
    #[doc(hidden)]
    pub fn corrupt_sample(&mut self, index: usize, state: State) {
        self.solution.values[index] = state.to_array();
    }
}

pub fn integrate(params: &ModelParams, spec: &InitialSpec, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let params = params.validated()?;
    cfg.validate()?;
    let (c0, eta_prime0) = dynamics::resolve_closure(&params, spec)?;
    let sys = MoneyFlowSystem {
        params,
        c0,
        rho_epsilon: cfg.rho_epsilon,
    };
    let wrap = |solution: DenseSolution<3>| Trajectory {
        params,
        c0,
        eta_prime0,
        termination: solution.termination,
        solution,
    };
    match solve(
        &sys,
        0.0,
        spec.state0.to_array(),
        cfg.t_end,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_step,
    ) {
        Ok(solution) => Ok(wrap(solution)),
        Err(Error::StepFailure { tau, step, .. }) => {
            // Rerun to the failure point to hand back what was accepted.
            let partial = if tau > 0.0 {
                solve(
                    &sys,
                    0.0,
                    spec.state0.to_array(),
                    tau,
                    cfg.rel_tol,
                    cfg.abs_tol,
                    cfg.max_step,
                )
                .ok()
                .map(|s| Box::new(wrap(s)))
            } else {
                None
            };
            Err(Error::StepFailure { tau, step, partial })
        }
        Err(e) => Err(e),
    }
}

/// Max over stored samples of `|eta' + alpha1 rho' + alpha2 (rho - 1/2) - C0|`,
/// with the derivatives that the solver evaluated from the right-hand side at
/// each accepted point.
pub fn closure_residual(traj: &Trajectory) -> f64 {
    closure_residuals(traj).map(|(abs, _)| abs).fold(0.0, f64::max)
}

/// Same as [`closure_residual`] in units of the ulp of the largest term.
pub fn closure_residual_ulps(traj: &Trajectory) -> f64 {
    closure_residuals(traj).map(|(_, ulps)| ulps).fold(0.0, f64::max)
}

/// Per-sample `(absolute, ulps)` closure defect, aligned with [`Trajectory::samples`].
pub fn closure_residuals(traj: &Trajectory) -> impl Iterator<Item = (f64, f64)> + '_ {
    traj.samples().zip(traj.sample_derivatives()).map(|(sample, d)| {
        let (abs, ulps) = state_closure_residual(&traj.params, traj.c0, &sample.state, &d);
        if abs.is_nan() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (abs, ulps)
        }
    })
}

/// Absolute closure defect at one state and that defect in ulps of the largest term.
pub fn state_closure_residual(params: &ModelParams, c0: f64, s: &State, d: &Derivatives) -> (f64, f64) {
    let defect = d.closure_defect(params, c0, s).abs();
    let scale = d.closure_scale(params, c0, s);
    let ulps = if defect == 0.0 { 0.0 } else { defect / ulp(scale) };
    (defect, ulps)
}

/// Spacing between `x` and the next larger float (for `x >= 0`).
pub fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1) - x
    }
}
