//! Lattice checks exposed on the command line, each returning a JSON value.

use std::f64::consts::PI;

use moneyflow_core::lattice::{
    default_discrete_action, frobenius, hamiltonian_matrix, loop_returns, plaquette_return, transition_matrix,
    RateSequence,
};
use moneyflow_core::linear::ols_slope;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;

pub fn plaquette(s_n: f64, s_next: f64) -> Result<Value> {
    let (cw, ccw) = loop_returns(s_n, s_next)?;
    Ok(json!({
        "s_n": s_n,
        "s_next": s_next,
        "plaquette_return": plaquette_return(s_n, s_next)?,
        "clockwise": cw,
        "counterclockwise": ccw,
    }))
}

/// `A1` for `S(t) = exp(sin 2 pi t)` on `[0, 1]` with `sigma2 = 1`; the
/// continuum value is `pi^2`.
pub fn sine_action(steps: usize) -> Result<f64> {
    let dt = 1.0 / steps as f64;
    let seq = RateSequence::from_log_path(|t| (2.0 * PI * t).sin(), steps, dt, 1.0, 1.0)?;
    Ok(default_discrete_action(&seq)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub dts: Vec<f64>,
    pub actions: Vec<f64>,
    pub errors: Vec<f64>,
    pub limit: f64,
    /// Least-squares slope of `ln |error|` against `ln dt`.
    pub order: f64,
}

pub fn sine_convergence(steps: &[usize]) -> Result<Convergence> {
    let limit = PI * PI;
    let dts: Vec<f64> = steps.iter().map(|&n| 1.0 / n as f64).collect();
    let actions = steps.iter().map(|&n| sine_action(n)).collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = actions.iter().map(|a| (a - limit).abs()).collect();
    let ln_dt: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ln_err: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok(Convergence {
        order: ols_slope(&ln_dt, &ln_err),
        dts,
        actions,
        errors,
        limit,
    })
}

pub fn matrices(s: f64, beta: f64, dt: f64) -> Result<Value> {
    let p = transition_matrix(s, beta)?;
    let h = hamiltonian_matrix(s, beta, dt)?;
    let h_dt = h.map(|row| row.map(|x| x * dt));
    Ok(json!({
        "s": s,
        "beta": beta,
        "dt": dt,
        "transition": p.entries,
        "determinant": p.determinant(),
        "entrywise_determinant": p.entrywise_determinant(),
        "apply_unit_1": p.apply([1.0, 0.0], false),
        "apply_uniform": p.apply([0.5, 0.5], false),
        "hamiltonian": h,
        "hamiltonian_times_dt": h_dt,
        "hamiltonian_frobenius": frobenius(&h),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_action() {
        let seq = RateSequence::new(vec![1.0, 0.1f64.exp()], 1.0, 1.0, 1.0).unwrap();
        let a = default_discrete_action(&seq).unwrap();
        assert!((a - 0.0050042).abs() < 1e-7);
    }

    #[test]
    fn matrices_json_has_exact_zero_determinant() {
        let v = matrices(2.0, 1.0, 0.01).unwrap();
        assert_eq!(v["determinant"], 0.0);
        assert_eq!(v["apply_unit_1"], json!([1.0, 0.5]));
    }
}
