//! Discrete-time lattice for two currencies exchanged at `t_n = n dt`.
//!
//! Each time slice carries the rate `S_n`; the elementary plaquette between
//! `t_n` and `t_{n+1}` has round-trip returns `S_n^{-1} S_{n+1} - 1` and
//! `S_n S_{n+1}^{-1} - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_rate(name: &str, s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {s} must be finite and > 0")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSequence {
    rates: Vec<f64>,
    pub dt: f64,
    pub beta: f64,
    pub sigma2: f64,
}

impl RateSequence {
    pub fn new(rates: Vec<f64>, dt: f64, beta: f64, sigma2: f64) -> Result<Self> {
        for (n, &s) in rates.iter().enumerate() {
            check_rate(&format!("S_{n}"), s)?;
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("dt = {dt} must be > 0")));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Domain(format!("sigma2 = {sigma2} must be > 0")));
        }
        if !beta.is_finite() {
            return Err(Error::Domain(format!("beta = {beta} must be finite")));
        }
        Ok(Self {
            rates,
            dt,
            beta,
            sigma2,
        })
    }

    /// Sample `S(t) = exp(y(t))` at `t_n = n dt` for `n = 0..=steps`.
    pub fn from_log_path(y: impl Fn(f64) -> f64, steps: usize, dt: f64, beta: f64, sigma2: f64) -> Result<Self> {
        let rates = (0..=steps).map(|n| y(n as f64 * dt).exp()).collect();
        Self::new(rates, dt, beta, sigma2)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Total arbitrage return around the plaquette `(t_n, t_{n+1})`:
/// `S_n / S_{n+1} + S_{n+1} / S_n - 2`, i.e. `2 cosh(ln S_{n+1} - ln S_n) - 2`.
pub fn plaquette_return(s_n: f64, s_next: f64) -> Result<f64> {
    check_rate("S_n", s_n)?;
    check_rate("S_next", s_next)?;
    Ok(s_n / s_next + s_next / s_n - 2.0)
}

/// Clockwise and counter-clockwise loop returns separately.
pub fn loop_returns(s_n: f64, s_next: f64) -> Result<(f64, f64)> {
    check_rate("S_n", s_n)?;
    check_rate("S_next", s_next)?;
    Ok((s_next / s_n - 1.0, s_n / s_next - 1.0))
}

/// `a_n = 1 / (2 sigma^2 dt)`, so that `a_n dt -> 1 / (2 sigma^2)`.
pub fn default_coefficient(sigma2: f64) -> impl Fn(usize, f64) -> f64 {
    move |_n, dt| 1.0 / (2.0 * sigma2 * dt)
}

/// `A1 = sum_n a_n (S_n / S_{n+1} + S_{n+1} / S_n - 2)` over consecutive
/// pairs of the sequence. `coefficient(n, dt)` supplies `a_n`.
pub fn discrete_action(seq: &RateSequence, coefficient: impl Fn(usize, f64) -> f64) -> Result<f64> {
    if seq.len() < 2 {
        return Err(Error::Domain(format!(
            "discrete action needs at least two rates, got {}",
            seq.len()
        )));
    }
    seq.rates
        .windows(2)
        .enumerate()
        .map(|(n, w)| Ok(coefficient(n, seq.dt) * plaquette_return(w[0], w[1])?))
        .sum()
}

/// [`discrete_action`] with [`default_coefficient`].
pub fn default_discrete_action(seq: &RateSequence) -> Result<f64> {
    discrete_action(seq, default_coefficient(seq.sigma2))
}

/// Parallel-transport factors `U_j` collected along a path through the lattice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatticePath {
    factors: Vec<f64>,
}

/// Currency held by a single trader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Currency {
    One,
    Two,
}

impl LatticePath {
    pub fn new(factors: Vec<f64>) -> Result<Self> {
        for (j, &u) in factors.iter().enumerate() {
            check_rate(&format!("U_{j}"), u)?;
        }
        Ok(Self { factors })
    }

    /// Path of a trader starting in `start`, deciding at each `t_n` whether to
    /// exchange. Converting 2 -> 1 contributes `S_n`, 1 -> 2 contributes
    /// `S_n^{-1}`, holding contributes 1.
    pub fn from_decisions(seq: &RateSequence, start: Currency, exchange: &[bool]) -> Result<Self> {
        if exchange.len() > seq.len() {
            return Err(Error::Domain(format!(
                "{} decisions for {} time slices",
                exchange.len(),
                seq.len()
            )));
        }
        let mut held = start;
        let factors = exchange
            .iter()
            .zip(seq.rates())
            .map(|(&swap, &s)| {
                if !swap {
                    return 1.0;
                }
                let (u, next) = match held {
                    Currency::Two => (s, Currency::One),
                    Currency::One => (1.0 / s, Currency::Two),
                };
                held = next;
                u
            })
            .collect();
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    /// `s(Q) = ln(U_1 ... U_J)`.
    pub fn log_transport(&self) -> f64 {
        self.factors.iter().map(|u| u.ln()).sum()
    }
}

/// Unnormalized path weight `(U_1 ... U_J)^beta = exp(beta s(Q))`.
pub fn path_weight(path: &LatticePath, beta: f64) -> Result<f64> {
    for (j, &u) in path.factors.iter().enumerate() {
        check_rate(&format!("U_{j}"), u)?;
    }
    let product: f64 = path.factors.iter().product();
    let w = product.powf(beta);
    if w.is_finite() && w > 0.0 {
        Ok(w)
    } else {
        Ok((beta * path.log_transport()).exp())
    }
}

/// `[[1, S^beta], [S^-beta, 1]]`.
///
/// The off-diagonal pair is also kept as the exponent `beta ln S`, so the
/// loop product `S^beta S^-beta` is evaluated as `exp(w - w) = 1` and the
/// determinant is exactly zero rather than zero up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub entries: [[f64; 2]; 2],
    log_upper: f64,
}

impl TransitionMatrix {
    pub fn determinant(&self) -> f64 {
        let diagonal = self.entries[0][0] * self.entries[1][1];
        let off_diagonal = (self.log_upper + -self.log_upper).exp();
        diagonal - off_diagonal
    }

    /// `a d - b c` on the stored floating-point entries.
    pub fn entrywise_determinant(&self) -> f64 {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    /// Matrix-vector product on `(p1, p2)`. With `normalize`, the result is
    /// rescaled to sum to one; the matrix itself does not preserve the sum.
    pub fn apply(&self, p: [f64; 2], normalize: bool) -> [f64; 2] {
        let [[a, b], [c, d]] = self.entries;
        let out = [a * p[0] + b * p[1], c * p[0] + d * p[1]];
        if normalize {
            let total = out[0] + out[1];
            [out[0] / total, out[1] / total]
        } else {
            out
        }
    }
}

pub fn transition_matrix(s: f64, beta: f64) -> Result<TransitionMatrix> {
    check_rate("S", s)?;
    if !beta.is_finite() {
        return Err(Error::Domain(format!("beta = {beta} must be finite")));
    }
    Ok(TransitionMatrix {
        entries: [[1.0, s.powf(beta)], [s.powf(-beta), 1.0]],
        log_upper: beta * s.ln(),
    })
}

/// `(1 / dt) [[0, S^beta], [S^-beta, 0]]`, which grows without bound as `dt -> 0`.
pub fn hamiltonian_matrix(s: f64, beta: f64, dt: f64) -> Result<[[f64; 2]; 2]> {
    check_rate("S", s)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt = {dt} must be > 0")));
    }
    if !beta.is_finite() {
        return Err(Error::Domain(format!("beta = {beta} must be finite")));
    }
    Ok([[0.0, s.powf(beta) / dt], [s.powf(-beta) / dt, 0.0]])
}

/// Frobenius norm of a 2x2 matrix.
pub fn frobenius(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plaquette_values() {
        assert_eq!(plaquette_return(1.0, 1.0).unwrap(), 0.0);
        let r = plaquette_return(1.0, 0.1f64.exp()).unwrap();
        assert_relative_eq!(r, 2.0 * 0.1f64.cosh() - 2.0, epsilon = 1e-15);
        assert!((r - 0.0100083).abs() < 1e-7);
        assert_eq!(plaquette_return(2.0, 3.5).unwrap(), plaquette_return(3.5, 2.0).unwrap());
        assert!(plaquette_return(0.0, 1.0).is_err());
        assert!(plaquette_return(1.0, -2.0).is_err());
        let (cw, ccw) = loop_returns(1.0, 1.25).unwrap();
        assert_eq!(cw, 0.25);
        assert_relative_eq!(ccw, -0.2, epsilon = 1e-15);
    }

    #[test]
    fn action_values() {
        let constant = RateSequence::new(vec![1.7; 20], 0.01, 1.0, 1.0).unwrap();
        assert_eq!(default_discrete_action(&constant).unwrap(), 0.0);
        assert_eq!(discrete_action(&constant, |n, _| n as f64 + 3.0).unwrap(), 0.0);

        let two = RateSequence::new(vec![1.0, 0.1f64.exp()], 1.0, 1.0, 1.0).unwrap();
        let a = default_discrete_action(&two).unwrap();
        assert!((a - 0.0050042).abs() < 1e-7);

        let one = RateSequence::new(vec![1.0], 1.0, 1.0, 1.0).unwrap();
        assert!(default_discrete_action(&one).is_err());
        assert!(RateSequence::new(vec![1.0, 0.0], 1.0, 1.0, 1.0).is_err());
        assert!(RateSequence::new(vec![1.0, 2.0], 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn path_weights() {
        assert_eq!(path_weight(&LatticePath::default(), 2.0).unwrap(), 1.0);
        let p = LatticePath::new(vec![2.0, 0.25]).unwrap();
        assert_eq!(path_weight(&p, 1.0).unwrap(), 0.5);
        assert_eq!(path_weight(&p, 0.0).unwrap(), 1.0);
        assert!(LatticePath::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn round_trip_path_collects_plaquette_ratio() {
        let seq = RateSequence::new(vec![1.5, 2.0, 3.0], 1.0, 1.0, 1.0).unwrap();
        // 2 -> 1 at t_0, 1 -> 2 at t_1: S_0 / S_1.
        let path = LatticePath::from_decisions(&seq, Currency::Two, &[true, true]).unwrap();
        assert_eq!(path.factors(), &[1.5, 0.5]);
        assert_relative_eq!(path_weight(&path, 1.0).unwrap(), 0.75, epsilon = 1e-15);
        let hold = LatticePath::from_decisions(&seq, Currency::One, &[false, false, false]).unwrap();
        assert_eq!(path_weight(&hold, 3.0).unwrap(), 1.0);
        assert!(LatticePath::from_decisions(&seq, Currency::One, &[false; 4]).is_err());
    }

    #[test]
    fn transition_matrix_values() {
        let m = transition_matrix(2.0, 1.0).unwrap();
        assert_eq!(m.determinant(), 0.0);
        assert_eq!(m.apply([1.0, 0.0], false), [1.0, 0.5]);
        let normalized = m.apply([1.0, 0.0], true);
        assert_relative_eq!(normalized[0] + normalized[1], 1.0, epsilon = 1e-15);
        assert_eq!(transition_matrix(1.0, 0.37).unwrap().apply([0.5, 0.5], false), [1.0, 1.0]);
        assert!(transition_matrix(0.0, 1.0).is_err());
        assert!(transition_matrix(-1.0, 1.0).is_err());
    }

    #[test]
    fn not_a_stochastic_matrix() {
        let m = transition_matrix(1.3, 0.8).unwrap();
        let out = m.apply([0.3, 0.7], false);
        assert!((out[0] + out[1] - 1.0).abs() > 0.1);
    }

    #[test]
    fn hamiltonian_values() {
        let h = hamiltonian_matrix(1.0, 1.0, 0.01).unwrap();
        assert_relative_eq!(h[0][1], 100.0, epsilon = 1e-12);
        assert_relative_eq!(h[1][0], 100.0, epsilon = 1e-12);
        assert_eq!((h[0][0], h[1][1]), (0.0, 0.0));

        let e = std::f64::consts::E;
        let h = hamiltonian_matrix(e, 1.0, 1.0).unwrap();
        assert_relative_eq!(h[0][1], e, epsilon = 1e-15);
        assert_relative_eq!(h[1][0], 1.0 / e, epsilon = 1e-15);

        let coarse = hamiltonian_matrix(1.7, 0.6, 0.02).unwrap();
        let fine = hamiltonian_matrix(1.7, 0.6, 0.01).unwrap();
        assert_relative_eq!(fine[0][1], 2.0 * coarse[0][1], epsilon = 1e-13);
        assert_relative_eq!(fine[1][0], 2.0 * coarse[1][0], epsilon = 1e-13);
        assert!(hamiltonian_matrix(1.0, 1.0, 0.0).is_err());
    }
}
