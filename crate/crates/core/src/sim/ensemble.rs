//! Equivariance check: sample `|Psi|^2` at the start, transport the samples
//! with the guidance law and compare against `|Psi(t)|^2`.
//!
//! Only single-mode states on stationary foliations are supported, so the
//! `|Psi|^2` marginal is one-dimensional and evolves in closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FieldConfig, Leaf, ModeBasis};
use crate::guidance::{step_rk4, StepControl, TrajectoryState};
use crate::wavefunctional::{evaluate, evolve_stationary, WaveFunctionalState, MAX_LABELS};

use super::config::RunConfig;

/// Below this many samples the report carries a warning.
pub const MIN_SAMPLES: usize = 1000;
const GRID_POINTS: usize = 40_001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub t: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub mode: usize,
    pub omega: f64,
    pub period: f64,
    pub samples: usize,
    /// Trajectories lost to node or step errors; excluded from the statistics.
    pub failed: usize,
    /// 95% Kolmogorov-Smirnov critical value `1.36/sqrt(n)`.
    pub noise_floor: f64,
    pub entries: Vec<KsEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl EnsembleReport {
    pub fn max_ks(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.ks))
    }
}

/// Tabulated CDF of the one-mode marginal.
#[derive(Debug, Clone)]
pub struct MarginalCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl MarginalCdf {
    /// `|Psi|^2` along mode `mode` with every other coordinate at zero, normalized by the trapezoid rule.
    pub fn new(state: &WaveFunctionalState, basis: &ModeBasis, mode: usize) -> Result<Self> {
        let omega = basis.frequencies()[mode];
        if !(omega > 0.0) {
            return Err(Error::Unsupported(format!("mode {mode} has zero frequency")));
        }
        let degree = state.terms().iter().map(|t| t.labels.len()).max().unwrap_or(0);
        let half = (10.0 + 2.0 * degree as f64) / omega.sqrt();
        let step = 2.0 * half / (GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..GRID_POINTS).map(|k| -half + step * k as f64).collect();
        let mut coords = vec![0.0; basis.dim()];
        let mut density = Vec::with_capacity(GRID_POINTS);
        for &q in &grid {
            coords[mode] = q;
            let field = FieldConfig::from_modes(basis, coords.clone())?;
            let v = evaluate(state, basis, &field)?;
            // the ratio part is a polynomial; only the mode's own Gaussian factor is kept
            density.push(v.value.norm_sqr() * (-omega * q * q).exp());
        }
        let mut cdf = Vec::with_capacity(GRID_POINTS);
        cdf.push(0.0);
        for k in 1..GRID_POINTS {
            let prev = cdf[k - 1];
            cdf.push(prev + 0.5 * step * (density[k - 1] + density[k]));
        }
        let total = cdf[GRID_POINTS - 1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidState("marginal density does not normalize".into()));
        }
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { grid, cdf })
    }

    pub fn cdf(&self, q: f64) -> f64 {
        let n = self.grid.len();
        if q <= self.grid[0] {
            return 0.0;
        }
        if q >= self.grid[n - 1] {
            return 1.0;
        }
        let k = self.grid.partition_point(|&g| g <= q) - 1;
        let s = (q - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        self.cdf[k] + s * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Inverse CDF by bisection on the table and linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let s = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.grid[k - 1] + s * (self.grid[k] - self.grid[k - 1])
    }
}

/// Two-sided Kolmogorov-Smirnov distance between samples and a CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// Sampling mode for `config`, or an unsupported-config error.
fn ensemble_mode(config: &RunConfig, state: &WaveFunctionalState) -> Result<usize> {
    match state.single_mode() {
        None => Err(Error::Unsupported("ensemble needs a state whose labels share a single mode".into())),
        Some(None) => Ok(config.ensemble_mode.unwrap_or(0)),
        Some(Some(n)) => match config.ensemble_mode {
            Some(m) if m != n => Err(Error::Config(format!(
                "ensemble_mode {m} differs from the state's mode {n}"
            ))),
            _ => Ok(n),
        },
    }
}

/// Draws `config.ensemble_size` samples from the initial marginal and reports KS distances.
pub fn ensemble(config: &RunConfig) -> Result<EnsembleReport> {
    config.validate()?;
    let strategy = config.strategy()?;
    if !strategy.is_stationary() {
        return Err(Error::Unsupported("ensemble requires an equal_time or boosted foliation".into()));
    }
    let leaf = config.initial_leaf()?;
    let basis = ModeBasis::for_leaf(&leaf, config.mass)?;
    let state = config.initial_state(&basis)?;
    if state.terms().iter().any(|t| t.labels.len() > MAX_LABELS) {
        return Err(Error::Unsupported("too many labels".into()));
    }
    let mode = ensemble_mode(config, &state)?;
    if mode >= basis.dim() {
        return Err(Error::Config(format!("ensemble_mode {mode} out of range")));
    }
    let omega = basis.frequencies()[mode];
    let period = 2.0 * std::f64::consts::PI / omega;
    let mut times = config
        .ensemble_times
        .clone()
        .unwrap_or_else(|| vec![0.25 * period, 0.5 * period, period]);
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Config("ensemble times must be nonnegative".into()));
    }
    times.sort_by(f64::total_cmp);

    let initial = MarginalCdf::new(&state, &basis, mode)?;
    let n = config.ensemble_size;
    let control = config.step_control();
    let stepping = leaf.clone().with_label(0.0);

    let paths: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let q0 = initial.quantile(rng.random::<f64>());
            transport(&state, &basis, &stepping, mode, q0, &times, config.d_epsilon, &control).ok()
        })
        .collect();

    let failed = paths.iter().filter(|p| p.is_none()).count();
    let good: Vec<&Vec<f64>> = paths.iter().flatten().collect();
    let clock = stepping.mean_lapse();
    let mut entries = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let evolved = evolve_stationary(&state, &basis, clock * t)?;
        let target = MarginalCdf::new(&evolved, &basis, mode)?;
        let samples: Vec<f64> = good.iter().map(|p| p[k]).collect();
        entries.push(KsEntry {
            t,
            ks: ks_distance(&samples, |q| target.cdf(q)),
        });
    }
    let used = good.len();
    let warning = (n < MIN_SAMPLES)
        .then(|| format!("only {n} samples; KS distances below {:.3} are not resolved", 1.36 / (n.max(1) as f64).sqrt()));
    Ok(EnsembleReport {
        mode,
        omega,
        period,
        samples: used,
        failed,
        noise_floor: 1.36 / (used.max(1) as f64).sqrt(),
        entries,
        warning,
    })
}

/// Moves one sample through the requested times; returns its mode coordinate at each.
#[allow(clippy::too_many_arguments)]
fn transport(
    state: &WaveFunctionalState,
    basis: &ModeBasis,
    leaf: &Leaf,
    mode: usize,
    q0: f64,
    times: &[f64],
    max_dt: f64,
    control: &StepControl,
) -> Result<Vec<f64>> {
    let mut coords = vec![0.0; basis.dim()];
    coords[mode] = q0;
    let mut traj = TrajectoryState::new(0.0, FieldConfig::from_modes(basis, coords)?);
    let clock = leaf.mean_lapse();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - traj.leaf_label;
        if span > 0.0 {
            let steps = (span / max_dt).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            let start = traj.leaf_label;
            for k in 0..steps {
                let at = evolve_stationary(state, basis, clock * (start + dt * k as f64))?;
                traj = step_rk4(&at, basis, &traj, leaf, dt, control)?;
            }
            traj.leaf_label = target;
        }
        out.push(traj.field.mode_coords()[mode]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(state: &str, size: usize) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            r#"
            sites = 6
            dx = 0.5
            mass = 1.0
            d_epsilon = 0.05
            seed = 11
            ensemble_size = {size}
            {state}
            "#
        ))
        .unwrap()
    }

    #[test]
    fn gaussian_quantiles() {
        let leaf = Leaf::flat(6, 0.5).unwrap();
        let basis = ModeBasis::for_leaf(&leaf, 1.0).unwrap();
        let cdf = MarginalCdf::new(&WaveFunctionalState::vacuum(&basis), &basis, 0).unwrap();
        // omega_0 = m = 1: density exp(-q^2), standard deviation 1/sqrt 2
        assert!((cdf.cdf(0.0) - 0.5).abs() < 1e-9);
        let sigma = std::f64::consts::FRAC_1_SQRT_2;
        assert!((cdf.cdf(sigma) - 0.841_344_746_068_542_9).abs() < 1e-7);
        for u in [0.1, 0.5, 0.9] {
            assert!((cdf.cdf(cdf.quantile(u)) - u).abs() < 1e-9);
        }
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let samples: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&samples, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn small_ensemble_warns() {
        let report = ensemble(&config("[[state]]\namplitude = [1.0, 0.0]", 10)).unwrap();
        assert!(report.warning.is_some());
        assert_eq!(report.samples, 10);
        assert_eq!(report.entries.len(), 3);
    }

    #[test]
    fn rejects_multi_mode_state() {
        let state = r#"
            [[state]]
            amplitude = [1.0, 0.0]
            labels = [{ mode = 0, coeff = [1.0, 0.0] }, { mode = 2, coeff = [1.0, 0.0] }]
        "#;
        assert!(matches!(ensemble(&config(state, 10)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn seeded_and_reproducible() {
        let state = r#"
            [[state]]
            amplitude = [0.8, 0.0]
            [[state]]
            amplitude = [0.6, 0.0]
            labels = [{ mode = 0, coeff = [1.0, 0.0] }]
        "#;
        let c = config(state, 200);
        assert_eq!(ensemble(&c).unwrap(), ensemble(&c).unwrap());
    }
}
