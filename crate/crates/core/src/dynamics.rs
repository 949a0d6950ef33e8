//! Equations of motion for the two-currency fast money flow model.
//!
//! The state is `(eta, upsilon, rho)`: the scaled log exchange rate
//! `eta = beta * ln S`, the phase difference `upsilon = phi1 - phi2`, and the
//! fraction `rho` of agents holding currency 1. Time is the dimensionless
//! `tau = h * t`.
//!
//! The first-order system is
//!
//! ```text
//! eta'     = alpha2 (1/2 - rho) - 2 alpha1 g sinh(upsilon + eta) + C0
//! upsilon' = (2 rho - 1) / g * cosh(upsilon + eta) + 2 k g sinh(upsilon + eta)
//! rho'     = 2 g sinh(upsilon + eta)
//! ```
//!
//! with `g = sqrt(rho (1 - rho))`. `k = alpha1` for [`Variant::Correct`] and
//! `k = 1` for [`Variant::IlinskiErratum`], the form with the dropped coupling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which form of the `upsilon'` equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Correct,
    /// `alpha1` replaced by 1 in the sinh term of the `upsilon'` equation only.
    IlinskiErratum,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Correct => write!(f, "correct"),
            Variant::IlinskiErratum => write!(f, "ilinski-erratum"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correct" => Ok(Variant::Correct),
            "ilinski-erratum" | "erratum" => Ok(Variant::IlinskiErratum),
            other => Err(Error::InvalidParams(format!(
                "unknown variant '{other}' (expected 'correct' or 'ilinski-erratum')"
            ))),
        }
    }
}

/// Dimensionless model couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Farmer coupling, `2 beta f`.
    pub alpha1: f64,
    /// Volatility coupling, `M beta^2 sigma^2 / h`.
    pub alpha2: f64,
    /// Log-rate scale. Only enters the observables `S` and `R`.
    pub beta: f64,
    pub variant: Variant,
}

impl ModelParams {
    pub fn new(alpha1: f64, alpha2: f64, variant: Variant) -> Result<Self> {
        Self {
            alpha1,
            alpha2,
            beta: 1.0,
            variant,
        }
        .validated()
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.alpha1.is_finite() && self.alpha2.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite parameters {self:?}")));
        }
        if self.alpha1 < 0.0 {
            return Err(Error::InvalidParams(format!("alpha1 = {} must be >= 0", self.alpha1)));
        }
        if self.alpha2 <= 0.0 {
            return Err(Error::InvalidParams(format!("alpha2 = {} must be > 0", self.alpha2)));
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidParams(format!("beta = {} must be > 0", self.beta)));
        }
        Ok(self)
    }

    /// Coefficient multiplying `2 g sinh(upsilon + eta)` in the `upsilon'` equation.
    pub fn upsilon_coupling(&self) -> f64 {
        match self.variant {
            Variant::Correct => self.alpha1,
            Variant::IlinskiErratum => 1.0,
        }
    }

    /// Farmer coefficient `f = alpha1 / (2 beta)`.
    pub fn farmer_coefficient(&self) -> f64 {
        self.alpha1 / (2.0 * self.beta)
    }
}

/// Dimensional parameters from which the couplings are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub sigma2: f64,
    /// Transition rate; `tau = h t`.
    pub h: f64,
    /// Total number of agents `M`.
    pub agents: u64,
    /// Farmer coefficient.
    pub f: f64,
    pub beta: f64,
    /// Investment horizon `T`.
    pub horizon: f64,
}

impl RawParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma2", self.sigma2),
            ("h", self.h),
            ("beta", self.beta),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and > 0")));
            }
        }
        if self.agents == 0 {
            return Err(Error::InvalidParams("agents must be >= 1".into()));
        }
        if !(self.f.is_finite() && self.f >= 0.0) {
            return Err(Error::InvalidParams(format!("f = {} must be finite and >= 0", self.f)));
        }
        Ok(())
    }

    /// `alpha1 = 2 beta f`, `alpha2 = M beta^2 sigma2 / h`.
    pub fn derive(&self, variant: Variant) -> Result<ModelParams> {
        self.validate()?;
        let alpha1 = 2.0 * self.beta * self.f;
        let alpha2 = self.agents as f64 * self.beta * self.beta * self.sigma2 / self.h;
        ModelParams {
            alpha1,
            alpha2,
            beta: self.beta,
            variant,
        }
        .validated()
    }

    /// The horizon in units of `tau`.
    pub fn tau_horizon(&self) -> f64 {
        self.h * self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub eta: f64,
    pub upsilon: f64,
    pub rho: f64,
}

impl State {
    pub const fn new(eta: f64, upsilon: f64, rho: f64) -> Self {
        Self { eta, upsilon, rho }
    }

    pub fn rho_tilde(&self) -> f64 {
        self.rho - 0.5
    }

    pub fn eta_tilde(&self) -> f64 {
        self.upsilon + self.eta
    }

    /// Exchange rate `S = exp(eta / beta)`.
    pub fn rate(&self, beta: f64) -> f64 {
        (self.eta / beta).exp()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.eta, self.upsilon, self.rho]
    }

    pub fn from_array(y: [f64; 3]) -> Self {
        Self::new(y[0], y[1], y[2])
    }

    fn check_domain(&self) -> Result<()> {
        if self.rho > 0.0 && self.rho < 1.0 && self.eta.is_finite() && self.upsilon.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "state {self:?} outside 0 < rho < 1 or non-finite"
            )))
        }
    }

    /// `sqrt(rho (1 - rho))`
    fn occupancy(&self) -> f64 {
        (self.rho * (1.0 - self.rho)).sqrt()
    }
}

/// The second closure datum: either `C0` or the initial slope `eta'(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    C0(f64),
    EtaPrime0(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub state0: State,
    pub closure: Closure,
}

impl InitialSpec {
    pub fn with_c0(state0: State, c0: f64) -> Self {
        Self {
            state0,
            closure: Closure::C0(c0),
        }
    }

    pub fn with_eta_prime0(state0: State, eta_prime0: f64) -> Self {
        Self {
            state0,
            closure: Closure::EtaPrime0(eta_prime0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivatives {
    pub eta_prime: f64,
    pub upsilon_prime: f64,
    pub rho_prime: f64,
}

impl Derivatives {
    pub fn to_array(self) -> [f64; 3] {
        [self.eta_prime, self.upsilon_prime, self.rho_prime]
    }

    /// `eta' + alpha1 rho' + alpha2 (rho - 1/2) - C0`; zero up to rounding.
    pub fn closure_defect(&self, params: &ModelParams, c0: f64, s: &State) -> f64 {
        self.eta_prime + params.alpha1 * self.rho_prime + params.alpha2 * (s.rho - 0.5) - c0
    }

    /// Largest magnitude among the terms of [`Derivatives::closure_defect`].
    pub fn closure_scale(&self, params: &ModelParams, c0: f64, s: &State) -> f64 {
        [
            self.eta_prime.abs(),
            (params.alpha1 * self.rho_prime).abs(),
            (params.alpha2 * (s.rho - 0.5)).abs(),
            c0.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Right-hand side of the equations of motion.
pub fn rhs(params: &ModelParams, c0: f64, s: &State) -> Result<Derivatives> {
    s.check_domain()?;
    let g = s.occupancy();
    let phase = s.eta_tilde();
    let (sh, ch) = (phase.sinh(), phase.cosh());

    let rho_prime = 2.0 * g * sh;
    // Written through rho' so the closure identity holds to rounding.
    let eta_prime = params.alpha2 * (0.5 - s.rho) - params.alpha1 * rho_prime + c0;
    let upsilon_prime = (2.0 * s.rho - 1.0) / g * ch + params.upsilon_coupling() * rho_prime;

    let d = Derivatives {
        eta_prime,
        upsilon_prime,
        rho_prime,
    };
    if d.to_array().iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::NonFinite(format!("rhs at {s:?} gave {d:?}")))
    }
}

/// Resolve the closure to the consistent pair `(C0, eta'(0))` using
/// `C0 = eta'(0) + alpha1 rho'(0) + alpha2 (rho(0) - 1/2)`.
pub fn resolve_closure(params: &ModelParams, spec: &InitialSpec) -> Result<(f64, f64)> {
    let s = &spec.state0;
    s.check_domain()?;
    let rho_prime0 = 2.0 * s.occupancy() * s.eta_tilde().sinh();
    let offset = params.alpha1 * rho_prime0 + params.alpha2 * (s.rho - 0.5);
    let pair = match spec.closure {
        Closure::C0(c0) => (c0, c0 - offset),
        Closure::EtaPrime0(ep) => (ep + offset, ep),
    };
    if pair.0.is_finite() && pair.1.is_finite() {
        Ok(pair)
    } else {
        Err(Error::NonFinite(format!("closure {pair:?}")))
    }
}

/// Reduced Lagrangian (the `phi2'` term is a total derivative and is omitted).
pub fn lagrangian(params: &ModelParams, s: &State, d: &Derivatives) -> Result<f64> {
    s.check_domain()?;
    let flow = d.eta_prime + params.alpha1 * d.rho_prime;
    Ok(-flow * flow / (2.0 * params.alpha2)
        + s.rho * d.upsilon_prime
        + 2.0 * s.occupancy() * s.eta_tilde().cosh())
}

/// First integral of the Correct-variant flow:
/// `E = -(alpha2 (1/2 - rho) + C0)^2 / (2 alpha2) - 2 g cosh(upsilon + eta)`.
pub fn energy(params: &ModelParams, c0: f64, s: &State) -> Result<f64> {
    s.check_domain()?;
    let flow = params.alpha2 * (0.5 - s.rho) + c0;
    Ok(-flow * flow / (2.0 * params.alpha2) - 2.0 * s.occupancy() * s.eta_tilde().cosh())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// Exchange rate `S`.
    pub rate: f64,
    /// Return `R = eta' / beta = S'/S`.
    pub ret: f64,
    /// Trading volume `V = |rho'|`.
    pub volume: f64,
    /// Farmer's term `F = f (2 rho - 1)`.
    pub farmer: f64,
    /// Coherent-state amplitudes in the gauge `phi2 = 0`.
    pub psi1: Complex64,
    pub psi2: Complex64,
}

pub fn observables(params: &ModelParams, s: &State, d: &Derivatives, agents: u64) -> Result<Observables> {
    s.check_domain()?;
    let m = agents.max(1) as f64;
    Ok(Observables {
        rate: s.rate(params.beta),
        ret: d.eta_prime / params.beta,
        volume: d.rho_prime.abs(),
        farmer: params.farmer_coefficient() * (2.0 * s.rho - 1.0),
        psi1: Complex64::from_polar((m * s.rho).sqrt(), -s.upsilon),
        psi2: Complex64::new((m * (1.0 - s.rho)).sqrt(), 0.0),
    })
}
