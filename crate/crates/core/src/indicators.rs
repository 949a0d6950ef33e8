//! Trading volume, return and positive/negative volume indices sampled from a
//! trajectory.
//!
//! Volume is `V = |rho'|` and the return is `R = eta' / beta = S'/S`. The
//! return of `eta + upsilon` is never used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;

pub const DEFAULT_BASE: f64 = 1000.0;
pub const DEFAULT_SAMPLE_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub taus: Vec<f64>,
    pub volume: Vec<f64>,
    pub ret: Vec<f64>,
    /// Exchange rate `S` at each sample; per-step returns are `S_k / S_{k-1} - 1`.
    pub rate: Vec<f64>,
    pub pvi: Vec<f64>,
    pub nvi: Vec<f64>,
    pub base: f64,
}

impl IndicatorSeries {
    /// Build from raw columns. Indices start flat at `base`.
    pub fn from_parts(taus: Vec<f64>, volume: Vec<f64>, ret: Vec<f64>, rate: Vec<f64>, base: f64) -> Result<Self> {
        let n = taus.len();
        if volume.len() != n || ret.len() != n || rate.len() != n {
            return Err(Error::GridMismatch(format!(
                "column lengths tau={n}, V={}, R={}, S={}",
                volume.len(),
                ret.len(),
                rate.len()
            )));
        }
        if let Some(v) = volume.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Domain(format!("volume {v} must be >= 0")));
        }
        if let Some(s) = rate.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Domain(format!("rate {s} must be finite and > 0")));
        }
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::Domain(format!("base {base} must be > 0")));
        }
        Ok(Self {
            taus,
            volume,
            ret,
            rate,
            pvi: vec![base; n],
            nvi: vec![base; n],
            base,
        })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn step_returns(&self) -> impl Iterator<Item = f64> + '_ {
        self.rate.windows(2).map(|w| w[1] / w[0] - 1.0)
    }
}

/// Sample `V`, `R` and `S` at `tau_k = k dtau_s` from the dense output.
pub fn sample_indicators(traj: &Trajectory, beta: f64, dtau_s: f64) -> Result<IndicatorSeries> {
    if !(dtau_s.is_finite() && dtau_s > 0.0) {
        return Err(Error::Sampling(format!("sample step {dtau_s} must be > 0")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Sampling(format!("beta = {beta} must be > 0")));
    }
    let span = traj.t_end();
    if span < 2.0 * dtau_s {
        return Err(Error::Sampling(format!(
            "trajectory span {span} shorter than two sample steps of {dtau_s}"
        )));
    }
    let count = (span / dtau_s + 1e-9).floor() as usize + 1;
    let (mut taus, mut volume, mut ret, mut rate) = (
        Vec::with_capacity(count),
        Vec::with_capacity(count),
        Vec::with_capacity(count),
        Vec::with_capacity(count),
    );
    for k in 0..count {
        let tau = (k as f64 * dtau_s).min(span);
        let s = traj
            .state_at(tau)
            .ok_or_else(|| Error::Sampling(format!("no dense output at tau = {tau}")))?;
        let d = traj.derivatives_at(tau)?;
        taus.push(tau);
        volume.push(d.rho_prime.abs());
        ret.push(d.eta_prime / beta);
        rate.push(s.rate(beta));
    }
    IndicatorSeries::from_parts(taus, volume, ret, rate, DEFAULT_BASE)
}

/// Market-convention recursion: PVI moves by the step return on strict volume
/// increases, NVI on strict decreases, neither on ties.
pub fn recursive_pvi_nvi(mut series: IndicatorSeries) -> IndicatorSeries {
    let n = series.len();
    series.pvi = vec![series.base; n];
    series.nvi = vec![series.base; n];
    for k in 1..n {
        let r = series.rate[k] / series.rate[k - 1] - 1.0;
        let (v0, v1) = (series.volume[k - 1], series.volume[k]);
        series.pvi[k] = if v1 > v0 { series.pvi[k - 1] * (1.0 + r) } else { series.pvi[k - 1] };
        series.nvi[k] = if v1 < v0 { series.nvi[k - 1] * (1.0 + r) } else { series.nvi[k - 1] };
    }
    series
}

/// Continuous PVI as read off the published figure: flat while `V` falls,
/// slope `sign(R)` while `V` rises. `V'` is taken by central differences
/// (one-sided at the ends) and each interval uses the values at its left end.
pub fn stylized_continuous_pvi(series: &IndicatorSeries) -> Vec<f64> {
    let n = series.len();
    let mut level = vec![series.base; n];
    if n < 2 {
        return level;
    }
    let v = &series.volume;
    let t = &series.taus;
    let dv = |k: usize| -> f64 {
        if k == 0 {
            (v[1] - v[0]) / (t[1] - t[0])
        } else if k == n - 1 {
            (v[k] - v[k - 1]) / (t[k] - t[k - 1])
        } else {
            (v[k + 1] - v[k - 1]) / (t[k + 1] - t[k - 1])
        }
    };
    for k in 1..n {
        let slope = if dv(k - 1) > 0.0 && series.ret[k - 1] != 0.0 {
            series.ret[k - 1].signum()
        } else {
            0.0
        };
        level[k] = level[k - 1] + slope * (t[k] - t[k - 1]);
    }
    level
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub max_gap: f64,
    /// Spearman rank correlation.
    pub rank_correlation: f64,
    pub first_disagreement: Option<f64>,
}

/// Compare two series on the common grid `taus`.
pub fn compare_indicators(taus: &[f64], a: &[f64], b: &[f64]) -> Result<DivergenceReport> {
    if a.len() != taus.len() || b.len() != taus.len() {
        return Err(Error::GridMismatch(format!(
            "grid has {} points, series have {} and {}",
            taus.len(),
            a.len(),
            b.len()
        )));
    }
    let max_gap = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let first_disagreement = a.iter().zip(b).position(|(x, y)| x != y).map(|k| taus[k]);
    let rank_correlation = if first_disagreement.is_none() {
        1.0
    } else {
        spearman(a, b)
    };
    Ok(DivergenceReport {
        max_gap,
        rank_correlation,
        first_disagreement,
    })
}

/// Ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let avg = 0.5 * (start + end - 1) as f64 + 1.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation; 0 when either series is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}
