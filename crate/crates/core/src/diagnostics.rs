//! Plot-ready comparison data and toy series generators.
//!
//! Nothing here renders figures; every output is a small table meant to be
//! written as tab-separated text and plotted elsewhere.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SmcError};
use crate::features::{cross_correlation, white_noise_band, Transform};
use crate::rng;

/// One correlation curve for target and surrogate, with the 99% band.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfPanel {
    pub name: &'static str,
    pub lags: Vec<usize>,
    pub target_values: Vec<f64>,
    pub surrogate_values: Vec<f64>,
    pub band: Vec<f64>,
}

impl AcfPanel {
    fn build(name: &'static str, x: &[f64], z: &[f64], f: Transform, g: Transform, max_lag: usize) -> Result<Self> {
        let lags: Vec<usize> = (1..=max_lag).collect();
        let curve =
            |u: &[f64]| -> Result<Vec<f64>> { lags.iter().map(|&tau| cross_correlation(u, f, g, tau)).collect() };
        Ok(AcfPanel {
            name,
            target_values: curve(x)?,
            surrogate_values: curve(z)?,
            band: lags.iter().map(|&tau| white_noise_band(x.len(), tau)).collect(),
            lags,
        })
    }

    /// Largest `|target - surrogate|` over lags.
    pub fn max_discrepancy(&self) -> f64 {
        self.target_values
            .iter()
            .zip(&self.surrogate_values)
            .map(|(t, s)| (t - s).abs())
            .fold(0.0, f64::max)
    }

    /// Whether the surrogate curve stays within the band around the target.
    pub fn surrogate_within_band(&self) -> bool {
        self.target_values
            .iter()
            .zip(&self.surrogate_values)
            .zip(&self.band)
            .all(|((t, s), b)| (t - s).abs() <= *b)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# {}: 99% band is 2.576/sqrt(N - lag) under a white-noise null\nlag\ttarget\tsurrogate\tband\n",
            self.name
        );
        for k in 0..self.lags.len() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.lags[k], self.target_values[k], self.surrogate_values[k], self.band[k]
            );
        }
        out
    }
}

/// The three stylized-fact panels: absolute-return autocorrelation up to
/// `long_lag`, leverage (return vs later absolute return) and return
/// autocorrelation up to `short_lag`.
pub struct AcfPanels {
    pub absolute: AcfPanel,
    pub leverage: AcfPanel,
    pub returns: AcfPanel,
}

pub fn acf_panels(x: &[f64], z: &[f64], short_lag: usize, long_lag: usize) -> Result<AcfPanels> {
    let shortest = x.len().min(z.len());
    if short_lag < 1 || long_lag < 1 || short_lag.max(long_lag) >= shortest {
        return Err(SmcError::invalid(format!(
            "lags ({short_lag}, {long_lag}) invalid for series of length {shortest}"
        )));
    }
    use Transform::*;
    Ok(AcfPanels {
        absolute: AcfPanel::build("acf_abs", x, z, Absolute, Absolute, long_lag)?,
        leverage: AcfPanel::build("acf_lev", x, z, Absolute, Centered, short_lag)?,
        returns: AcfPanel::build("acf_ret", x, z, Centered, Centered, short_lag)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ar1Init {
    /// First value drawn from the stationary law `N(0, 1 / (1 - p^2))`.
    #[default]
    Stationary,
    /// Start at zero and discard this many steps.
    BurnIn(usize),
}

/// `z_t = p z_{t-1} + e_t` with standard normal innovations.
pub fn ar1_generate(p: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    ar1_generate_with(p, n, seed, Ar1Init::Stationary)
}

pub fn ar1_generate_with(p: f64, n: usize, seed: u64, init: Ar1Init) -> Result<Vec<f64>> {
    if p.is_nan() || p.abs() >= 1.0 {
        return Err(SmcError::invalid(format!("AR(1) coefficient {p} is not stationary")));
    }
    if n == 0 {
        return Err(SmcError::invalid("series length must be at least 1"));
    }
    let mut rng = rng::seeded(seed, rng::STREAM_TOY);
    let mut eps = || -> f64 { rng.sample(StandardNormal) };
    let (mut z, skip) = match init {
        Ar1Init::Stationary => (eps() / (1.0 - p * p).sqrt(), 0),
        Ar1Init::BurnIn(b) => (0.0, b),
    };
    for _ in 0..skip {
        z = p * z + eps();
    }
    let mut out = Vec::with_capacity(n);
    out.push(z);
    for _ in 1..n {
        z = p * z + eps();
        out.push(z);
    }
    Ok(out)
}

/// Log-volatility AR(1) with leverage, a heteroskedastic return model:
///
/// ```text
/// h_t = phi h_{t-1} + s (lambda e_{t-1} + sqrt(1 - lambda^2) w_t)
/// x_t = exp(h_t / 2) e_t
/// ```
///
/// Negative `lambda` makes volatility rise after negative returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticVolatility {
    pub phi: f64,
    pub vol_of_vol: f64,
    pub leverage: f64,
}

impl Default for StochasticVolatility {
    fn default() -> Self {
        StochasticVolatility {
            phi: 0.95,
            vol_of_vol: 0.35,
            leverage: -0.6,
        }
    }
}

impl StochasticVolatility {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let nan = self.phi.is_nan() || self.leverage.is_nan() || self.vol_of_vol.is_nan();
        if nan || self.phi.abs() >= 1.0 || self.leverage.abs() > 1.0 || self.vol_of_vol < 0.0 {
            return Err(SmcError::invalid("stochastic volatility parameters out of range"));
        }
        if n == 0 {
            return Err(SmcError::invalid("series length must be at least 1"));
        }
        let mut rng = rng::seeded(seed, rng::STREAM_TOY);
        let stationary_sd = self.vol_of_vol / (1.0 - self.phi * self.phi).sqrt();
        let mut h = stationary_sd * rng.sample::<f64, _>(StandardNormal);
        let mut prev_eps: f64 = rng.sample(StandardNormal);
        let side = (1.0 - self.leverage * self.leverage).sqrt();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let w: f64 = rng.sample(StandardNormal);
            h = self.phi * h + self.vol_of_vol * (self.leverage * prev_eps + side * w);
            let eps: f64 = rng.sample(StandardNormal);
            out.push((0.5 * h).exp() * eps);
            prev_eps = eps;
        }
        Ok(out)
    }
}

/// `y_t = sin(2 pi t / period)` for `t = 0..n`.
pub fn sine_generate(period: usize, n: usize) -> Result<Vec<f64>> {
    if period < 2 || n < period {
        return Err(SmcError::invalid(format!(
            "need period >= 2 and n >= period (got period {period}, n {n})"
        )));
    }
    let w = std::f64::consts::TAU / period as f64;
    Ok((0..n)
        .map(|t| {
            // exact values at quarter periods
            if (4 * t) % period == 0 {
                [0.0, 1.0, 0.0, -1.0][(4 * t / period) % 4]
            } else {
                (w * t as f64).sin()
            }
        })
        .collect())
}

/// Delay embedding `(z_t, z_{t + lag})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub lag: usize,
    pub points: Vec<(f64, f64)>,
}

pub fn phase_diagram(z: &[f64], lag: usize) -> Result<PhaseDiagram> {
    if lag < 1 || lag >= z.len() {
        return Err(SmcError::invalid(format!(
            "phase lag {lag} must lie in [1, {})",
            z.len()
        )));
    }
    let points = z.iter().zip(&z[lag..]).map(|(&a, &b)| (a, b)).collect();
    Ok(PhaseDiagram { lag, points })
}

impl PhaseDiagram {
    pub fn radii(&self) -> Vec<f64> {
        self.points.iter().map(|(a, b)| a.hypot(*b)).collect()
    }

    /// Population standard deviation of the radii.
    pub fn radial_spread(&self) -> f64 {
        let r = self.radii();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        (r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / r.len() as f64).sqrt()
    }

    /// Root-mean-square distance of the radii from `radius`.
    pub fn rms_radial_deviation(&self, radius: f64) -> f64 {
        let r = self.radii();
        (r.iter().map(|v| (v - radius) * (v - radius)).sum::<f64>() / r.len() as f64).sqrt()
    }

    /// Fraction of points whose radius lies within `radius ± tol`.
    pub fn fraction_within(&self, radius: f64, tol: f64) -> f64 {
        let r = self.radii();
        r.iter().filter(|v| (*v - radius).abs() <= tol).count() as f64 / r.len() as f64
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# phase diagram, embedding lag {}\nz_t\tz_t_plus_lag\n", self.lag);
        for (a, b) in &self.points {
            let _ = writeln!(out, "{a}\t{b}");
        }
        out
    }
}

/// Pointwise mean and population standard deviation over complete periods.
pub fn period_average(z: &[f64], period: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if period == 0 || z.len() < 2 * period {
        return Err(SmcError::invalid(format!(
            "need at least two complete periods of {period} in {} values",
            z.len()
        )));
    }
    let cycles = z.len() / period;
    let rows = || z.chunks_exact(period).take(cycles);
    let mut mean = vec![0.0; period];
    for row in rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= cycles as f64);
    let mut var = vec![0.0; period];
    for row in rows() {
        for k in 0..period {
            let d = row[k] - mean[k];
            var[k] += d * d;
        }
    }
    let sd = var.into_iter().map(|v| (v / cycles as f64).sqrt()).collect();
    Ok((mean, sd))
}

/// Folded-CDF table for two sources, tagged by a `source` column.
pub fn folded_cdf_tsv(sources: &[(&str, &[(f64, f64)])]) -> String {
    let mut out = String::from("# folded CDF: CDF(x) for x <= 0, 1 - CDF(x) for x > 0\nsource\tx\tp\n");
    for (name, curve) in sources {
        for (x, p) in curve.iter() {
            let _ = writeln!(out, "{name}\t{x}\t{p}");
        }
    }
    out
}
