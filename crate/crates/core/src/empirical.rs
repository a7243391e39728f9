//! Empirical unconditional distribution and inverse-transform sampling.
//!
//! The CDF is stored as a table of knots: the sorted sample values paired with
//! plotting-position levels strictly inside `(0, 1)`. Between knots the inverse
//! CDF is linear; outside the first and last level it is clamped to the sample
//! minimum and maximum, so draws never leave the historical range.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Result, SmcError};
use crate::ingest::ReturnSeries;
use crate::rng;

/// Level assigned to the `i`-th smallest of `n` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlottingPosition {
    /// `(i + 0.5) / n`
    #[default]
    Midpoint,
    /// `(i + 1) / (n + 1)`
    Weibull,
}

impl PlottingPosition {
    pub fn level(self, i: usize, n: usize) -> f64 {
        match self {
            PlottingPosition::Midpoint => (i as f64 + 0.5) / n as f64,
            PlottingPosition::Weibull => (i as f64 + 1.0) / (n as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted_values: Vec<f64>,
    cdf_levels: Vec<f64>,
}

/// A batch of i.i.d. draws together with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SampleDraw {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fits the empirical CDF with midpoint plotting positions.
pub fn fit_empirical_cdf(r: &ReturnSeries) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::fit(r.values(), PlottingPosition::Midpoint)
}

impl EmpiricalDistribution {
    pub fn fit(values: &[f64], positions: PlottingPosition) -> Result<Self> {
        if values.len() < 2 {
            return Err(SmcError::TooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(SmcError::NonFinite(k));
        }
        let mut sorted_values = values.to_vec();
        sorted_values.sort_by(f64::total_cmp);
        let n = sorted_values.len();
        let cdf_levels = (0..n).map(|i| positions.level(i, n)).collect();
        Ok(EmpiricalDistribution {
            sorted_values,
            cdf_levels,
        })
    }

    /// Rebuilds a distribution from a stored knot table.
    pub fn from_table(sorted_values: Vec<f64>, cdf_levels: Vec<f64>) -> Result<Self> {
        if sorted_values.len() != cdf_levels.len() {
            return Err(SmcError::LengthMismatch {
                left: sorted_values.len(),
                right: cdf_levels.len(),
            });
        }
        if sorted_values.len() < 2 {
            return Err(SmcError::TooShort {
                needed: 2,
                got: sorted_values.len(),
            });
        }
        if let Some(k) = sorted_values.iter().position(|v| !v.is_finite()) {
            return Err(SmcError::NonFinite(k));
        }
        if sorted_values.windows(2).any(|w| w[0] > w[1]) {
            return Err(SmcError::invalid("distribution values are not sorted"));
        }
        if cdf_levels.windows(2).any(|w| w[0] >= w[1]) || cdf_levels.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return Err(SmcError::invalid(
                "cdf levels must be strictly increasing inside (0, 1)",
            ));
        }
        Ok(EmpiricalDistribution {
            sorted_values,
            cdf_levels,
        })
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn cdf_levels(&self) -> &[f64] {
        &self.cdf_levels
    }

    pub fn len(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted_values[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted_values[self.sorted_values.len() - 1]
    }

    /// Interpolated inverse CDF, truncated at the sample extremes.
    pub fn inverse_transform(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(SmcError::invalid(format!("u = {u} is outside [0, 1]")));
        }
        Ok(self.quantile(u))
    }

    /// Unchecked inverse CDF for `u` already known to lie in `[0, 1]`.
    fn quantile(&self, u: f64) -> f64 {
        let levels = &self.cdf_levels;
        let values = &self.sorted_values;
        let hi = levels.partition_point(|&l| l < u);
        if hi == 0 {
            return values[0];
        }
        if hi == levels.len() {
            return values[values.len() - 1];
        }
        if levels[hi] == u {
            return values[hi];
        }
        let lo = hi - 1;
        let (a, b) = (values[lo], values[hi]);
        if a == b {
            return a;
        }
        let w = (u - levels[lo]) / (levels[hi] - levels[lo]);
        (a + (b - a) * w).clamp(a, b)
    }

    /// Draws `n` i.i.d. values by inverse transform of uniform variates.
    pub fn sample_iid(&self, n: usize, seed: u64) -> Result<SampleDraw> {
        if n == 0 {
            return Err(SmcError::invalid("sample size must be at least 1"));
        }
        let mut rng = rng::seeded(seed, rng::STREAM_DRAW);
        let values = (0..n).map(|_| self.quantile(rng.random::<f64>())).collect();
        Ok(SampleDraw { values, seed })
    }

    /// Mountain-plot view: `CDF(x)` for `x <= 0`, `1 - CDF(x)` for `x > 0`.
    pub fn folded_cdf(&self) -> Vec<(f64, f64)> {
        self.sorted_values
            .iter()
            .zip(&self.cdf_levels)
            .map(|(&x, &u)| (x, if x <= 0.0 { u } else { 1.0 - u }))
            .collect()
    }

    /// Largest gap between the sample's empirical CDF and this distribution,
    /// evaluated at every knot.
    ///
    /// Below the last knot, the probability at or below `x_i` is the last level
    /// attached to the value `x_i`; the top knot carries the truncated upper
    /// tail, so the probability there is 1.
    pub fn ks_distance_at_knots(&self, sample: &[f64]) -> f64 {
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut worst: f64 = 0.0;
        for (i, &x) in self.sorted_values.iter().enumerate() {
            if i + 1 < self.sorted_values.len() && self.sorted_values[i + 1] == x {
                continue;
            }
            let model = if i + 1 == self.sorted_values.len() {
                1.0
            } else {
                self.cdf_levels[i]
            };
            let observed = sorted.partition_point(|&s| s <= x) as f64 / n;
            worst = worst.max((observed - model).abs());
        }
        worst
    }

    /// Two-column `value<TAB>level` text with a `#` comment header.
    pub fn to_table_string(&self) -> String {
        let mut out = String::from("# empirical distribution: value\tlevel\nvalue\tlevel\n");
        for (v, u) in self.sorted_values.iter().zip(&self.cdf_levels) {
            let _ = writeln!(out, "{v}\t{u}");
        }
        out
    }

    pub fn read_table(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SmcError::io(path, e))?;
        let mut values = Vec::new();
        let mut levels = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("value") {
                continue;
            }
            let mut fields = line.split(['\t', ',']).map(str::trim);
            let mut next = || -> Result<f64> {
                let cell = fields.next().unwrap_or("");
                cell.parse().map_err(|_| SmcError::NonNumeric {
                    row: k + 1,
                    value: cell.to_string(),
                })
            };
            values.push(next()?);
            levels.push(next()?);
        }
        Self::from_table(values, levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(values: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::fit(values, PlottingPosition::Midpoint).unwrap()
    }

    #[test]
    fn fit_examples() {
        let d = dist(&[3.0, 1.0, 2.0]);
        assert_eq!(d.sorted_values(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.cdf_levels(), &[1.0 / 6.0, 3.0 / 6.0, 5.0 / 6.0]);

        let d = dist(&[5.0, 5.0]);
        assert_eq!(d.sorted_values(), &[5.0, 5.0]);
        assert_eq!(d.cdf_levels(), &[0.25, 0.75]);

        assert!(matches!(
            EmpiricalDistribution::fit(&[1.0, f64::NAN], PlottingPosition::Midpoint),
            Err(SmcError::NonFinite(1))
        ));
        assert!(EmpiricalDistribution::fit(&[1.0], PlottingPosition::Midpoint).is_err());
    }

    #[test]
    fn weibull_levels() {
        let d = EmpiricalDistribution::fit(&[0.0, 1.0, 2.0], PlottingPosition::Weibull).unwrap();
        assert_eq!(d.cdf_levels(), &[0.25, 0.5, 0.75]);
    }

    #[test]
    fn inverse_examples() {
        let d = dist(&[0.0, 1.0]);
        assert_eq!(d.inverse_transform(0.0).unwrap(), 0.0);
        assert_eq!(d.inverse_transform(1.0).unwrap(), 1.0);
        assert_eq!(d.inverse_transform(0.5).unwrap(), 0.5);
        assert_eq!(d.inverse_transform(0.25).unwrap(), 0.0);
        assert_eq!(d.inverse_transform(0.75).unwrap(), 1.0);
        assert!(d.inverse_transform(-0.1).is_err());
        assert!(d.inverse_transform(1.5).is_err());
    }

    #[test]
    fn flat_segment_returns_duplicate() {
        let d = dist(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(d.inverse_transform(0.5).unwrap(), 2.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = dist(&[0.3, -1.2, 2.5, 0.0, 0.7]);
        assert_eq!(d.sample_iid(100, 9).unwrap(), d.sample_iid(100, 9).unwrap());
        assert_ne!(d.sample_iid(100, 9).unwrap(), d.sample_iid(100, 10).unwrap());
        assert!(d.sample_iid(0, 9).is_err());
    }

    #[test]
    fn constant_series_draws_constant() {
        let d = dist(&[4.0; 10]);
        assert!(d.sample_iid(500, 1).unwrap().values.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn folded_examples() {
        let d = dist(&[-2.0, 2.0]);
        let f = d.folded_cdf();
        assert_eq!(f[0].1, f[1].1);

        let d = dist(&[-3.0, -2.0, -1.0]);
        let p: Vec<f64> = d.folded_cdf().iter().map(|&(_, p)| p).collect();
        assert_eq!(p, d.cdf_levels());
    }

    #[test]
    fn table_round_trip() {
        let d = dist(&[0.1, -0.25, 3.0e-5, 1.0 / 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dist.tsv");
        std::fs::write(&path, d.to_table_string()).unwrap();
        assert_eq!(EmpiricalDistribution::read_table(&path).unwrap(), d);
    }

    #[test]
    fn from_table_validation() {
        assert!(EmpiricalDistribution::from_table(vec![2.0, 1.0], vec![0.25, 0.75]).is_err());
        assert!(EmpiricalDistribution::from_table(vec![1.0, 2.0], vec![0.0, 0.75]).is_err());
        assert!(EmpiricalDistribution::from_table(vec![1.0, 2.0], vec![0.5, 0.5]).is_err());
        assert!(EmpiricalDistribution::from_table(vec![1.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let d = dist(&[0.0, 1.0, 2.0, 3.0]);
        let sample: Vec<f64> = (0..4000)
            .map(|k| d.inverse_transform((k as f64 + 0.5) / 4000.0).unwrap())
            .collect();
        assert!(d.ks_distance_at_knots(&sample) < 1e-3);
    }
}
