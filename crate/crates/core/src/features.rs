//! Lagged correlation features, the scalar objective, and the incremental
//! objective state that makes pairwise-swap annealing cheap.
//!
//! A feature term is a pair of pointwise transforms `f`, `g` and a maximum lag.
//! For each lag `tau` the term contributes
//!
//! ```text
//!            mean_t f(u_t) g(u_{t-tau})
//! C(tau) = -------------------------------
//!          sqrt(mean f(u)^2) sqrt(mean g(u)^2)
//! ```
//!
//! The numerator averages the `N - tau` overlapping pairs (or all `N` pairs with
//! periodic boundaries); the denominator averages all `N` points. The series is
//! mean-removed first, and by default the absolute and squared transforms are
//! centred on their own means as well, so every feature of white noise is
//! centred on zero.
//!
//! Because the denominators and all single-point means depend only on the
//! multiset of values, swapping two positions changes nothing but the lagged
//! products whose window contains one of the swapped indices. [`ObjectiveState`]
//! exploits that: a swap is scored in `O(total lags)` arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmcError};
use crate::ingest::{mean, order_free_sum};

/// Two-sided 99% normal quantile used for white-noise confidence bands.
pub const Z99: f64 = 2.576;

/// Full recompute cadence for accumulated lag sums, in accepted swaps.
pub const DEFAULT_RECOMPUTE_EVERY: u64 = 1_000_000;

/// Half-width of the 99% white-noise band for an estimate over `n - lag` pairs.
pub fn white_noise_band(n: usize, lag: usize) -> f64 {
    Z99 / ((n - lag) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `u - mean(u)`
    Centered,
    /// `|u - mean(u)|`
    Absolute,
    /// `(u - mean(u))^2`
    Square,
}

impl Transform {
    const ALL: [Transform; 3] = [Transform::Centered, Transform::Absolute, Transform::Square];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Centered => "centered",
            Transform::Absolute => "absolute",
            Transform::Square => "square",
        }
    }
}

/// How per-lag discrepancies are folded into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// `sum_i w_i |target_i - candidate_i|`
    #[default]
    PerLagL1,
    /// `|sum_i w_i target_i - sum_i w_i candidate_i|`, which lets lags cancel.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    NonCircular,
    Circular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTerm {
    pub f: Transform,
    pub g: Transform,
    pub max_lag: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl FeatureTerm {
    pub fn new(f: Transform, g: Transform, max_lag: usize) -> Self {
        FeatureTerm {
            f,
            g,
            max_lag,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Declarative description of the objective.
///
/// Either a list of correlation terms is active, or (deterministic-target
/// mode) `target_series` is set and the objective is the mean squared
/// difference between the candidate series and that series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(default)]
    pub terms: Vec<FeatureTerm>,
    #[serde(default)]
    pub mode: ObjectiveMode,
    #[serde(default)]
    pub boundary: Boundary,
    /// Centre `|u|` and `u^2` on their own means before correlating.
    #[serde(default = "default_true")]
    pub center_transforms: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_series: Option<Vec<f64>>,
}

impl FeatureSpec {
    pub fn from_terms(terms: Vec<FeatureTerm>) -> Self {
        FeatureSpec {
            terms,
            mode: ObjectiveMode::PerLagL1,
            boundary: Boundary::NonCircular,
            center_transforms: true,
            target_series: None,
        }
    }

    /// Plain autocorrelation of the returns up to `max_lag`.
    pub fn autocorrelation(max_lag: usize) -> Self {
        Self::from_terms(vec![FeatureTerm::new(
            Transform::Centered,
            Transform::Centered,
            max_lag,
        )])
    }

    /// The four stylized-fact terms: return autocorrelation and leverage up to
    /// `short_lag`, absolute and squared autocorrelation up to `long_lag`.
    ///
    /// The leverage term correlates today's return with the absolute return
    /// `tau` steps later (`f = |x|` at `t`, `g = x` at `t - tau`).
    pub fn stylized_facts(short_lag: usize, long_lag: usize) -> Self {
        use Transform::*;
        Self::from_terms(vec![
            FeatureTerm::new(Centered, Centered, short_lag),
            FeatureTerm::new(Absolute, Centered, short_lag),
            FeatureTerm::new(Absolute, Absolute, long_lag),
            FeatureTerm::new(Square, Square, long_lag),
        ])
    }

    /// S&P 500 setup: stylized facts with 40 short and 200 long lags.
    pub fn sp500() -> Self {
        Self::stylized_facts(40, 200)
    }

    /// Deterministic-target mode: match `target` point by point.
    pub fn target(target: Vec<f64>) -> Self {
        FeatureSpec {
            target_series: Some(target),
            ..Self::from_terms(Vec::new())
        }
    }

    pub fn with_mode(mut self, mode: ObjectiveMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn is_target_mode(&self) -> bool {
        self.target_series.is_some()
    }

    /// Number of entries of a [`FeatureVector`] built under this spec.
    pub fn entry_count(&self) -> usize {
        match &self.target_series {
            Some(t) => t.len(),
            None => self.terms.iter().map(|t| t.max_lag).sum(),
        }
    }

    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(|t| t.max_lag).max().unwrap_or(0)
    }

    /// Checks the spec against a series length.
    pub fn validate(&self, n: usize) -> Result<()> {
        match (&self.target_series, self.terms.is_empty()) {
            (Some(_), false) => {
                return Err(SmcError::invalid(
                    "feature spec has both correlation terms and a target series",
                ))
            }
            (None, true) => return Err(SmcError::invalid("feature spec has no terms")),
            _ => {}
        }
        if let Some(t) = &self.target_series {
            if t.len() != n {
                return Err(SmcError::LengthMismatch {
                    left: t.len(),
                    right: n,
                });
            }
            if let Some(k) = t.iter().position(|v| !v.is_finite()) {
                return Err(SmcError::NonFinite(k));
            }
            return Ok(());
        }
        for term in &self.terms {
            if term.max_lag < 1 || term.max_lag >= n {
                return Err(SmcError::invalid(format!(
                    "max lag {} must lie in [1, {})",
                    term.max_lag, n
                )));
            }
            if !(term.weight > 0.0 && term.weight.is_finite()) {
                return Err(SmcError::invalid(format!(
                    "term weight {} must be positive",
                    term.weight
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("feature spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SmcError::Config(e.to_string()))
    }

    fn weights_per_entry(&self) -> Vec<f64> {
        self.terms
            .iter()
            .flat_map(|t| std::iter::repeat_n(t.weight, t.max_lag))
            .collect()
    }
}

/// Per-(term, lag) feature values, ordered by term then lag.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub entries: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Unweighted sum of all entries.
    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// Transformed copies of a series, one slot per [`Transform`].
fn transform_series(u: &[f64], kind: Transform, center_transforms: bool) -> Vec<f64> {
    let m = mean(u);
    let centered = u.iter().map(|v| v - m);
    let mut out: Vec<f64> = match kind {
        Transform::Centered => return centered.collect(),
        Transform::Absolute => centered.map(f64::abs).collect(),
        Transform::Square => centered.map(|c| c * c).collect(),
    };
    if center_transforms {
        let m = mean(&out);
        out.iter_mut().for_each(|v| *v -= m);
    }
    out
}

fn mean_square(v: &[f64]) -> f64 {
    order_free_sum(v.iter().map(|x| x * x).collect()) / v.len() as f64
}

fn normalization(f: &[f64], g: &[f64], same: bool, name: Transform, other: Transform) -> Result<f64> {
    let mf = mean_square(f);
    if mf <= 0.0 {
        return Err(SmcError::ZeroVariance(name.name()));
    }
    if same {
        return Ok(mf);
    }
    let mg = mean_square(g);
    if mg <= 0.0 {
        return Err(SmcError::ZeroVariance(other.name()));
    }
    Ok(mf.sqrt() * mg.sqrt())
}

fn lagged_sum(f: &[f64], g: &[f64], tau: usize, boundary: Boundary) -> f64 {
    let n = f.len();
    match boundary {
        Boundary::NonCircular => f[tau..].iter().zip(g).map(|(a, b)| a * b).sum(),
        Boundary::Circular => (0..n).map(|t| f[t] * g[(t + n - tau) % n]).sum(),
    }
}

fn pair_count(n: usize, tau: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::NonCircular => n - tau,
        Boundary::Circular => n,
    }
}

fn entry_scale(n: usize, tau: usize, boundary: Boundary, norm: f64) -> f64 {
    1.0 / (pair_count(n, tau, boundary) as f64 * norm)
}

fn cross_correlation_with(
    u: &[f64],
    f_kind: Transform,
    g_kind: Transform,
    tau: usize,
    boundary: Boundary,
    center_transforms: bool,
) -> Result<f64> {
    if tau >= u.len() {
        return Err(SmcError::invalid(format!(
            "lag {tau} must be below the series length {}",
            u.len()
        )));
    }
    let f = transform_series(u, f_kind, center_transforms);
    let g = transform_series(u, g_kind, center_transforms);
    let norm = normalization(&f, &g, f_kind == g_kind, f_kind, g_kind)?;
    if tau == 0 && f_kind == g_kind {
        return Ok(1.0);
    }
    let count = pair_count(u.len(), tau, boundary) as f64;
    Ok(lagged_sum(&f, &g, tau, boundary) / count / norm)
}

/// Lag-`tau` correlation of `f(u_t)` with `g(u_{t-tau})`, non-circular, with
/// centred transforms. Lag 0 is accepted for diagnostics.
pub fn cross_correlation(u: &[f64], f_kind: Transform, g_kind: Transform, tau: usize) -> Result<f64> {
    cross_correlation_with(u, f_kind, g_kind, tau, Boundary::NonCircular, true)
}

/// Feature vector of `u`. In deterministic-target mode this is `u` itself.
pub fn rho(u: &[f64], spec: &FeatureSpec) -> Result<FeatureVector> {
    spec.validate(u.len())?;
    if spec.is_target_mode() {
        return Ok(FeatureVector { entries: u.to_vec() });
    }
    let mut entries = Vec::with_capacity(spec.entry_count());
    for term in &spec.terms {
        let f = transform_series(u, term.f, spec.center_transforms);
        let g = transform_series(u, term.g, spec.center_transforms);
        let norm = normalization(&f, &g, term.f == term.g, term.f, term.g)?;
        for tau in 1..=term.max_lag {
            entries.push(lagged_sum(&f, &g, tau, spec.boundary) * entry_scale(u.len(), tau, spec.boundary, norm));
        }
    }
    Ok(FeatureVector { entries })
}

fn aggregate(mode: ObjectiveMode, weights: &[f64], pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    match mode {
        ObjectiveMode::PerLagL1 => pairs.zip(weights).map(|((t, c), w)| w * (t - c).abs()).sum(),
        ObjectiveMode::PaperLiteral => pairs.zip(weights).map(|((t, c), w)| w * t - w * c).sum::<f64>().abs(),
    }
}

/// Scalar discrepancy between two feature vectors.
pub fn objective_delta(target: &FeatureVector, candidate: &FeatureVector, spec: &FeatureSpec) -> Result<f64> {
    if target.len() != candidate.len() {
        return Err(SmcError::LengthMismatch {
            left: target.len(),
            right: candidate.len(),
        });
    }
    if spec.is_target_mode() {
        let n = target.len() as f64;
        return Ok(target
            .entries
            .iter()
            .zip(&candidate.entries)
            .map(|(t, c)| (t - c) * (t - c))
            .sum::<f64>()
            / n);
    }
    if target.len() != spec.entry_count() {
        return Err(SmcError::LengthMismatch {
            left: target.len(),
            right: spec.entry_count(),
        });
    }
    let weights = spec.weights_per_entry();
    Ok(aggregate(
        spec.mode,
        &weights,
        target.entries.iter().copied().zip(candidate.entries.iter().copied()),
    ))
}

/// One proposed swap, scored against a specific state version.
#[derive(Debug, Clone, Default)]
pub struct SwapProposal {
    pub i: usize,
    pub j: usize,
    pub new_delta: f64,
    /// Additive change to every running sum (one per feature entry, or a
    /// single squared-error sum in deterministic-target mode).
    pub adjustments: Vec<f64>,
    /// Lagged products re-evaluated to score the swap.
    pub touched: usize,
    version: u64,
}

#[derive(Debug, Clone)]
enum Kernel {
    Correlation {
        /// Transformed series indexed by `Transform::index`; empty when unused.
        transforms: [Vec<f64>; 3],
        lag_sums: Vec<f64>,
        /// `1 / (pair_count * norm)` per entry.
        scale: Vec<f64>,
        /// Normalization constant per term.
        norms: Vec<f64>,
        weights: Vec<f64>,
        band: Vec<f64>,
        /// `(f, g, max_lag)` per term.
        layout: Vec<(usize, usize, usize)>,
    },
    Target {
        target: Vec<f64>,
        sse: f64,
    },
}

/// Running objective for one annealing chain.
#[derive(Debug, Clone)]
pub struct ObjectiveState {
    series: Vec<f64>,
    target: Vec<f64>,
    mode: ObjectiveMode,
    boundary: Boundary,
    kernel: Kernel,
    delta: f64,
    version: u64,
    accepted_since_recompute: u64,
    recompute_every: u64,
}

/// Builds the incremental state for candidate `z` against `target`.
pub fn init_objective_state(z: &[f64], target: &FeatureVector, spec: &FeatureSpec) -> Result<ObjectiveState> {
    ObjectiveState::new(z, target, spec)
}

impl ObjectiveState {
    pub fn new(z: &[f64], target: &FeatureVector, spec: &FeatureSpec) -> Result<Self> {
        if z.is_empty() {
            return Err(SmcError::TooShort { needed: 1, got: 0 });
        }
        if let Some(k) = z.iter().position(|v| !v.is_finite()) {
            return Err(SmcError::NonFinite(k));
        }
        spec.validate(z.len())?;
        if target.len() != spec.entry_count() {
            return Err(SmcError::LengthMismatch {
                left: target.len(),
                right: spec.entry_count(),
            });
        }
        let n = z.len();
        let kernel = if let Some(y) = &spec.target_series {
            let sse = z.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            Kernel::Target { target: y.clone(), sse }
        } else {
            let mut transforms: [Vec<f64>; 3] = Default::default();
            for kind in Transform::ALL {
                if spec.terms.iter().any(|t| t.f == kind || t.g == kind) {
                    transforms[kind.index()] = transform_series(z, kind, spec.center_transforms);
                }
            }
            let mut scale = Vec::with_capacity(spec.entry_count());
            let mut band = Vec::with_capacity(spec.entry_count());
            let mut layout = Vec::with_capacity(spec.terms.len());
            let mut norms = Vec::with_capacity(spec.terms.len());
            for term in &spec.terms {
                let (fi, gi) = (term.f.index(), term.g.index());
                let norm = normalization(&transforms[fi], &transforms[gi], fi == gi, term.f, term.g)?;
                for tau in 1..=term.max_lag {
                    scale.push(entry_scale(n, tau, spec.boundary, norm));
                    band.push(white_noise_band(n, tau));
                }
                layout.push((fi, gi, term.max_lag));
                norms.push(norm);
            }
            let lag_sums = full_lag_sums(&transforms, &layout, spec.boundary);
            Kernel::Correlation {
                transforms,
                lag_sums,
                scale,
                norms,
                weights: spec.weights_per_entry(),
                band,
                layout,
            }
        };
        let mut state = ObjectiveState {
            series: z.to_vec(),
            target: target.entries.clone(),
            mode: spec.mode,
            boundary: spec.boundary,
            kernel,
            delta: 0.0,
            version: 0,
            accepted_since_recompute: 0,
            recompute_every: DEFAULT_RECOMPUTE_EVERY,
        };
        state.delta = state.delta_from_sums(None);
        Ok(state)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Running numerator sums (per entry), or the single squared-error sum.
    pub fn lag_sums(&self) -> Vec<f64> {
        match &self.kernel {
            Kernel::Correlation { lag_sums, .. } => lag_sums.clone(),
            Kernel::Target { sse, .. } => vec![*sse],
        }
    }

    /// Per-term denominators `sqrt(<f²>) sqrt(<g²>)` (or `<f²>` when
    /// `f == g`). They depend only on the multiset of values, so swaps never
    /// change them. Empty in deterministic-target mode.
    pub fn norms(&self) -> &[f64] {
        match &self.kernel {
            Kernel::Correlation { norms, .. } => norms,
            Kernel::Target { .. } => &[],
        }
    }

    pub fn set_recompute_every(&mut self, accepted: u64) {
        self.recompute_every = accepted.max(1);
    }

    /// Current candidate feature vector implied by the running sums.
    pub fn features(&self) -> FeatureVector {
        let entries = match &self.kernel {
            Kernel::Correlation { lag_sums, scale, .. } => lag_sums.iter().zip(scale).map(|(s, k)| s * k).collect(),
            Kernel::Target { .. } => self.series.clone(),
        };
        FeatureVector { entries }
    }

    /// True when every per-entry discrepancy lies inside the 99% white-noise
    /// band for its lag. Deterministic-target states never satisfy it.
    pub fn within_band(&self) -> bool {
        match &self.kernel {
            Kernel::Correlation {
                lag_sums, scale, band, ..
            } => lag_sums
                .iter()
                .zip(scale)
                .zip(band)
                .zip(&self.target)
                .all(|(((s, k), b), t)| (t - s * k).abs() <= *b),
            Kernel::Target { .. } => false,
        }
    }

    /// Weighted sum of the band half-widths. In either aggregation mode an
    /// objective above this value rules out [`within_band`](Self::within_band).
    pub fn band_bound(&self) -> f64 {
        match &self.kernel {
            Kernel::Correlation { band, weights, .. } => band.iter().zip(weights).map(|(b, w)| b * w).sum(),
            Kernel::Target { .. } => f64::NEG_INFINITY,
        }
    }

    fn delta_from_sums(&self, adjustments: Option<&[f64]>) -> f64 {
        match &self.kernel {
            Kernel::Correlation {
                lag_sums,
                scale,
                weights,
                ..
            } => {
                let candidate = lag_sums.iter().zip(scale).enumerate().map(|(e, (s, k))| {
                    let s = match adjustments {
                        Some(a) => s + a[e],
                        None => *s,
                    };
                    s * k
                });
                aggregate(self.mode, weights, self.target.iter().copied().zip(candidate))
            }
            Kernel::Target { sse, .. } => {
                let adj = adjustments.map_or(0.0, |a| a[0]);
                (sse + adj) / self.series.len() as f64
            }
        }
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let n = self.series.len();
        if i == j {
            return Err(SmcError::invalid(format!("swap indices must differ (got {i} twice)")));
        }
        if i >= n || j >= n {
            return Err(SmcError::invalid(format!(
                "swap ({i}, {j}) out of range for length {n}"
            )));
        }
        Ok(())
    }

    /// Scores swapping positions `i` and `j` without mutating the state.
    pub fn swap_delta(&self, i: usize, j: usize) -> Result<SwapProposal> {
        let mut proposal = SwapProposal::default();
        self.propose_into(i, j, &mut proposal)?;
        Ok(proposal)
    }

    /// [`swap_delta`](Self::swap_delta) into a reusable buffer.
    pub fn propose_into(&self, i: usize, j: usize, out: &mut SwapProposal) -> Result<()> {
        self.check_pair(i, j)?;
        out.i = i;
        out.j = j;
        out.version = self.version;
        out.touched = 0;
        out.adjustments.clear();

        let (zi, zj) = (self.series[i], self.series[j]);
        match &self.kernel {
            Kernel::Target { target, .. } => {
                let (yi, yj) = (target[i], target[j]);
                let adj = if zi == zj {
                    0.0
                } else {
                    (zj - yi) * (zj - yi) + (zi - yj) * (zi - yj) - (zi - yi) * (zi - yi) - (zj - yj) * (zj - yj)
                };
                out.adjustments.push(adj);
                out.touched = 2;
            }
            Kernel::Correlation { transforms, layout, .. } => {
                if zi == zj {
                    out.adjustments.resize(self.target.len(), 0.0);
                    out.new_delta = self.delta;
                    return Ok(());
                }
                let n = self.series.len();
                let circular = self.boundary == Boundary::Circular;
                for &(fi, gi, max_lag) in layout {
                    let (f, g) = (&transforms[fi], &transforms[gi]);
                    for tau in 1..=max_lag {
                        let (adj, touched) = lag_adjustment(f, g, n, tau, i, j, circular);
                        out.adjustments.push(adj);
                        out.touched += touched;
                    }
                }
            }
        }
        out.new_delta = self.delta_from_sums(Some(&out.adjustments));
        Ok(())
    }

    /// Commits a proposal produced by [`swap_delta`](Self::swap_delta) on this
    /// exact state version.
    pub fn apply_swap(&mut self, proposal: &SwapProposal) -> Result<()> {
        if proposal.version != self.version {
            return Err(SmcError::StaleProposal {
                proposal: proposal.version,
                state: self.version,
            });
        }
        let (i, j) = (proposal.i, proposal.j);
        self.check_pair(i, j)?;
        self.series.swap(i, j);
        match &mut self.kernel {
            Kernel::Correlation {
                transforms, lag_sums, ..
            } => {
                for t in transforms.iter_mut().filter(|t| !t.is_empty()) {
                    t.swap(i, j);
                }
                for (s, a) in lag_sums.iter_mut().zip(&proposal.adjustments) {
                    *s += a;
                }
            }
            Kernel::Target { sse, .. } => *sse += proposal.adjustments[0],
        }
        self.delta = proposal.new_delta;
        self.version += 1;
        self.accepted_since_recompute += 1;
        if self.accepted_since_recompute >= self.recompute_every {
            self.recompute();
        }
        Ok(())
    }

    /// Rebuilds every running sum from the current series.
    pub fn recompute(&mut self) {
        match &mut self.kernel {
            Kernel::Correlation {
                transforms,
                lag_sums,
                layout,
                ..
            } => *lag_sums = full_lag_sums(transforms, layout, self.boundary),
            Kernel::Target { target, sse } => {
                *sse = self
                    .series
                    .iter()
                    .zip(target.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            }
        }
        self.accepted_since_recompute = 0;
        self.delta = self.delta_from_sums(None);
    }
}

fn full_lag_sums(transforms: &[Vec<f64>; 3], layout: &[(usize, usize, usize)], boundary: Boundary) -> Vec<f64> {
    layout
        .iter()
        .flat_map(|&(fi, gi, max_lag)| {
            (1..=max_lag).map(move |tau| lagged_sum(&transforms[fi], &transforms[gi], tau, boundary))
        })
        .collect()
}

/// Change of `sum_t f[t] g[t - tau]` when positions `i` and `j` swap, and the
/// number of products re-evaluated.
///
/// A product moves only when `t` or `t - tau` is one of the swapped indices,
/// i.e. `t` in `{i, j, i + tau, j + tau}`.
#[inline]
fn lag_adjustment(f: &[f64], g: &[f64], n: usize, tau: usize, i: usize, j: usize, circular: bool) -> (f64, usize) {
    if circular {
        return circular_lag_adjustment(f, g, n, tau, i, j);
    }
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    let adjacent = j - i == tau;
    let mut diff = 0.0;
    let mut touched = 0;
    // t = i: f moves, g[i - tau] stays (i - tau < i < j)
    if i >= tau {
        diff += (f[j] - f[i]) * g[i - tau];
        touched += 1;
    }
    // t = j: f moves; g[j - tau] moves only when j - tau = i
    if j >= tau {
        diff += if adjacent {
            f[i] * g[j] - f[j] * g[i]
        } else {
            (f[i] - f[j]) * g[j - tau]
        };
        touched += 1;
    }
    // t = i + tau: g[i] moves; when i + tau = j it was handled above
    if !adjacent && i + tau < n {
        diff += f[i + tau] * (g[j] - g[i]);
        touched += 1;
    }
    // t = j + tau: g[j] moves
    if j + tau < n {
        diff += f[j + tau] * (g[i] - g[j]);
        touched += 1;
    }
    (diff, touched)
}

fn circular_lag_adjustment(f: &[f64], g: &[f64], n: usize, tau: usize, i: usize, j: usize) -> (f64, usize) {
    let mut ts = [0usize; 4];
    let mut m = 0;
    for cand in [i, j, i + tau, j + tau] {
        let t = cand % n;
        if !ts[..m].contains(&t) {
            ts[m] = t;
            m += 1;
        }
    }
    let swapped = |k: usize| {
        if k == i {
            j
        } else if k == j {
            i
        } else {
            k
        }
    };
    let mut diff = 0.0;
    for &t in &ts[..m] {
        let s = (t + n - tau) % n;
        diff += f[swapped(t)] * g[swapped(s)] - f[t] * g[s];
    }
    (diff, m)
}
