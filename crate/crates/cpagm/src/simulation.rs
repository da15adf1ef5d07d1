//! Seeded generators for the benchmark scenarios: autoregressive processes
//! (short and long memory), a noisy-coefficient variant, and self-exciting
//! threshold autoregressions, plus dataset assembly with matching splits.
//!
//! Each series draws from its own random substream derived from
//! `(seed, series index)`, so changing the series count or length never
//! reshuffles another series' path.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, SplitSpec, TimeSeries};

/// Default number of warm-up observations discarded from the zero initial
/// state.
pub const DEFAULT_BURN_IN: usize = 500;

/// Abort threshold for threshold-autoregression paths, which have no simple
/// analytic stationarity criterion.
const EXPLOSION_GUARD: f64 = 1e6;

/// Whether reassignment distances use in-sample one-step errors or a
/// recursive forecast of a disjoint validation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    InSample,
    OutOfSample,
}

/// One threshold-autoregression generating process.
///
/// Regime 1 (`beta1`) is active when `x_{t-d} <= r`, regime 2 (`beta2`) when
/// `x_{t-d} > r`. Each coefficient vector is `(b0, b1, ..., bp)` with `b0`
/// the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetarProcess {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub r: f64,
    pub d: usize,
}

/// The generating-process family of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "processes", rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Intercept-free AR recursions; one coefficient vector per process.
    Ar(Vec<Vec<f64>>),
    Setar(Vec<SetarProcess>),
}

impl ScenarioKind {
    /// The number of significant lags: the max process order.
    pub fn significant_lags(&self) -> usize {
        match self {
            ScenarioKind::Ar(procs) => procs.iter().map(|p| p.len()).max().unwrap_or(0),
            ScenarioKind::Setar(procs) => procs
                .iter()
                .map(|p| p.beta1.len().max(p.beta2.len()).saturating_sub(1))
                .max()
                .unwrap_or(0),
        }
    }

    pub fn n_processes(&self) -> usize {
        match self {
            ScenarioKind::Ar(p) => p.len(),
            ScenarioKind::Setar(p) => p.len(),
        }
    }
}

/// Generating-process parameters for one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    /// Optional per-series uniform multiplier `u ~ U(low, high)` applied to
    /// the whole coefficient vector (AR scenarios only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_noise: Option<(f64, f64)>,
    pub series_length: usize,
    pub n_per_process: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    /// Test-block length; `None` uses twice the significant lags for AR
    /// scenarios and exactly the significant lags for threshold scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_horizon: Option<usize>,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl ScenarioSpec {
    pub fn test_horizon(&self) -> usize {
        self.test_horizon.unwrap_or(match self.kind {
            ScenarioKind::Ar(_) => 2 * self.kind.significant_lags(),
            ScenarioKind::Setar(_) => self.kind.significant_lags(),
        })
    }

    pub fn n_series(&self) -> usize {
        self.kind.n_processes() * self.n_per_process
    }
}

/// Short-memory setup: three AR(4) processes.
pub fn scenario1(series_length: usize, n_per_process: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::Ar(vec![
            vec![0.1, 0.2, -0.4, 0.3],
            vec![0.2, -0.5, 0.3, -0.3],
            vec![-0.3, 0.4, 0.6, -0.2],
        ]),
        coefficient_noise: None,
        series_length,
        n_per_process,
        burn_in: DEFAULT_BURN_IN,
        seed,
        test_horizon: None,
    }
}

/// Long-memory setup: three AR(12) processes.
pub fn scenario2(series_length: usize, n_per_process: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::Ar(vec![
            vec![0.9, -0.5, -0.3, 0.3, 0.1, -0.3, 0.2, -0.3, 0.5, -0.5, 0.3, -0.3],
            vec![0.2, 0.3, -0.2, -0.2, 0.4, 0.2, -0.1, 0.2, 0.1, -0.2, -0.3, 0.5],
            vec![-0.3, -0.1, 0.3, -0.1, -0.2, -0.1, -0.4, -0.2, -0.3, 0.4, 0.1, 0.2],
        ]),
        coefficient_noise: None,
        series_length,
        n_per_process,
        burn_in: DEFAULT_BURN_IN,
        seed,
        test_horizon: None,
    }
}

/// Scenario 2 with a per-series `U(0.8, 1)` multiplier on the coefficients.
pub fn scenario2_noisy(series_length: usize, n_per_process: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        coefficient_noise: Some((0.8, 1.0)),
        ..scenario2(series_length, n_per_process, seed)
    }
}

/// Nonlinear setup: three SETAR(5) processes with delay 3.
pub fn scenario3(series_length: usize, n_per_process: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::Setar(vec![
            SetarProcess {
                beta1: vec![0.0, 0.2, 0.9, -0.7, 0.3, -0.4],
                beta2: vec![0.0, 0.5, -0.6, 0.5, -0.4, 0.4],
                r: 1.2,
                d: 3,
            },
            SetarProcess {
                beta1: vec![0.0, -0.2, -0.9, 0.7, -0.3, 0.4],
                beta2: vec![0.0, -0.5, 0.6, -0.5, 0.4, -0.4],
                r: 0.0,
                d: 3,
            },
            SetarProcess {
                beta1: vec![0.0, 0.3, 0.3, 0.3, -0.4, -0.4],
                beta2: vec![0.0, -0.1, -0.7, -0.3, 0.5, 0.5],
                r: 0.6,
                d: 3,
            },
        ]),
        coefficient_noise: None,
        series_length,
        n_per_process,
        burn_in: DEFAULT_BURN_IN,
        seed,
        test_horizon: None,
    }
}

/// Spectral radius of the AR companion matrix; the recursion is stationary
/// iff this is below 1.
pub fn ar_spectral_radius(phi: &[f64]) -> f64 {
    let p = phi.len();
    if p == 0 {
        return 0.0;
    }
    let companion = DMatrix::<f64>::from_fn(p, p, |i, j| {
        if i == 0 {
            phi[j]
        } else if j == i - 1 {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

fn check_stationary(phi: &[f64]) -> Result<()> {
    let radius = ar_spectral_radius(phi);
    if radius >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "AR coefficients {phi:?} are nonstationary (spectral radius {radius:.4})"
        )));
    }
    Ok(())
}

fn gen_ar_with(phi: &[f64], len: usize, burn_in: usize, rng: &mut ChaCha8Rng, noise_sd: f64) -> Vec<f64> {
    let p = phi.len();
    let mut path = Vec::with_capacity(burn_in + len + p);
    path.extend(std::iter::repeat_n(0.0, p)); // zero initial conditions
    for _ in 0..burn_in + len {
        let t = path.len();
        let mut x = 0.0;
        for (i, &c) in phi.iter().enumerate() {
            x += c * path[t - 1 - i];
        }
        let e: f64 = StandardNormal.sample(rng);
        path.push(x + noise_sd * e);
    }
    path.split_off(p + burn_in)
}

/// Simulates an intercept-free AR recursion with standard normal
/// innovations, discarding `burn_in` warm-up observations.
pub fn gen_ar(phi: &[f64], len: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::InvalidArgument("series length must be >= 1".into()));
    }
    check_stationary(phi)?;
    Ok(gen_ar_with(phi, len, burn_in, rng, 1.0))
}

#[cfg(test)]
pub(crate) fn gen_ar_noiseless(phi: &[f64], len: usize, burn_in: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    gen_ar_with(phi, len, burn_in, &mut rng, 0.0)
}

/// Simulates a two-regime threshold autoregression.
///
/// The regime is chosen per step by comparing `x_{t-d}` to `r`; each regime
/// draws its innovations from its own child stream of `rng`, so a `+inf`
/// threshold consumes exactly the regime-1 stream. Missing pre-sample lags
/// are treated as 0, which the burn-in washes out.
pub fn gen_setar(process: &SetarProcess, len: usize, burn_in: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::InvalidArgument("series length must be >= 1".into()));
    }
    if process.beta1.len() != process.beta2.len() || process.beta1.len() < 2 {
        return Err(Error::InvalidArgument(
            "regime coefficient vectors must share a length of at least 2".into(),
        ));
    }
    if process.d == 0 {
        return Err(Error::InvalidArgument("delay must be >= 1".into()));
    }
    let mut rng1 = ChaCha8Rng::seed_from_u64(rng.random());
    let mut rng2 = ChaCha8Rng::seed_from_u64(rng.random());
    gen_setar_streams(process, len, burn_in, &mut rng1, &mut rng2)
}

/// Threshold-autoregression path with explicit per-regime streams.
pub fn gen_setar_streams(
    process: &SetarProcess,
    len: usize,
    burn_in: usize,
    regime1: &mut ChaCha8Rng,
    regime2: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let p = process.beta1.len() - 1;
    let pad = p.max(process.d);
    let mut path = Vec::with_capacity(pad + burn_in + len);
    path.extend(std::iter::repeat_n(0.0, pad));
    for _ in 0..burn_in + len {
        let t = path.len();
        let (beta, rng) = if path[t - process.d] <= process.r {
            (&process.beta1, &mut *regime1)
        } else {
            (&process.beta2, &mut *regime2)
        };
        let mut x = beta[0];
        for i in 1..=p {
            x += beta[i] * path[t - i];
        }
        let e: f64 = StandardNormal.sample(rng);
        let value = x + e;
        if value.abs() > EXPLOSION_GUARD {
            return Err(Error::Numerical(format!(
                "threshold-autoregression path exploded past {EXPLOSION_GUARD:e}"
            )));
        }
        path.push(value);
    }
    Ok(path.split_off(pad + burn_in))
}

/// Generates the dataset for a scenario: `n_per_process` series per process
/// with ground-truth labels and splits laid out for the given policy and
/// model lag order.
pub fn build_scenario(
    spec: &ScenarioSpec,
    policy: SplitPolicy,
    lag: usize,
) -> Result<(Dataset, Vec<usize>)> {
    let h = spec.test_horizon();
    let l_sig = spec.kind.significant_lags();
    let t = spec.series_length;
    let split = match policy {
        SplitPolicy::InSample => SplitSpec::in_sample(t, h, lag)?,
        SplitPolicy::OutOfSample => SplitSpec::out_of_sample(t, h, l_sig)?,
    };

    let n_processes = spec.kind.n_processes();
    if n_processes == 0 || spec.n_per_process == 0 {
        return Err(Error::InvalidArgument(
            "scenario needs at least one process and one series per process".into(),
        ));
    }
    let n = spec.n_series();
    let generated = crate::par::map_indexed(n, |i| -> Result<TimeSeries> {
        let process = i / spec.n_per_process;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let values = match &spec.kind {
            ScenarioKind::Ar(procs) => {
                let mut phi = procs[process].clone();
                if let Some((lo, hi)) = spec.coefficient_noise {
                    let u: f64 = rng.random_range(lo..hi);
                    phi.iter_mut().for_each(|c| *c *= u);
                }
                gen_ar(&phi, t, spec.burn_in, &mut rng)?
            }
            ScenarioKind::Setar(procs) => gen_setar(&procs[process], t, spec.burn_in, &mut rng)?,
        };
        TimeSeries::new(format!("p{process}_{:03}", i % spec.n_per_process), values, 1)
    });
    let series = generated.into_iter().collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = (0..n).map(|i| i / spec.n_per_process).collect();
    let dataset = Dataset::new(series, vec![split; n])?;
    Ok((dataset, labels))
}
