//! Integration of the Bohm field under the guidance law
//! `(1/N) dphi/dt = Im[(1/Psi) dPsi/dphi_g]`.
//!
//! The field is advanced with classical fixed-step RK4 in mode coordinates. At
//! every stage the wave functional is re-evolved to the stage time and the
//! mode coordinates of the stage field are used, so `c_n` in the guidance
//! ratio always belongs to the field being moved.

use crate::error::{check_len, Error, Result};
use crate::geometry::{FieldConfig, Leaf, ModeBasis};
use crate::wavefunctional::{evolve_stationary, guidance_ratio, guidance_ratio_modes, WaveFunctionalState};

/// The Bohm field on the current leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub leaf_label: f64,
    pub field: FieldConfig,
    /// Site velocity `dphi/dt` at the start of the last step.
    pub dphi_dt: Vec<f64>,
}

impl TrajectoryState {
    pub fn new(leaf_label: f64, field: FieldConfig) -> Self {
        let n = field.site_values().len();
        Self {
            leaf_label,
            field,
            dphi_dt: vec![0.0; n],
        }
    }
}

/// Step-size control for [`step_rk4`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// A stage with `|Psi|` below this fraction of the step-start value triggers a halving.
    pub node_ratio: f64,
    pub max_halvings: u32,
    /// Optional bound on `max_i |dphi_i|` per (sub)step.
    pub max_dphi: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            node_ratio: 1e-10,
            max_halvings: 20,
            max_dphi: None,
        }
    }
}

/// Guidance velocity `N_i Im[(1/Psi) dPsi/dphi_g](i)` at each site.
pub fn velocity(
    state: &WaveFunctionalState,
    basis: &ModeBasis,
    field: &FieldConfig,
    leaf: &Leaf,
) -> Result<Vec<f64>> {
    basis.check_leaf(leaf.id())?;
    let ratio = guidance_ratio(state, basis, field)?;
    Ok(ratio
        .iter()
        .zip(leaf.lapse())
        .map(|(r, n)| n * r.im)
        .collect())
}

/// Guidance velocity in mode coordinates for a leaf with uniform lapse.
pub fn mode_velocity(state: &WaveFunctionalState, basis: &ModeBasis, q: &[f64], lapse: f64) -> Result<Vec<f64>> {
    let (ratio, _) = guidance_ratio_modes(state, basis, q)?;
    Ok(ratio.iter().map(|r| lapse * r.im).collect())
}

enum Retry {
    NodeProximity(f64),
    TooLarge(f64),
}

enum StepFailure {
    Retry(Retry),
    Fatal(Error),
}

impl From<Error> for StepFailure {
    fn from(e: Error) -> Self {
        match e {
            Error::Node { magnitude } => StepFailure::Retry(Retry::NodeProximity(magnitude)),
            other => StepFailure::Fatal(other),
        }
    }
}

struct Stepper<'a> {
    state: &'a WaveFunctionalState,
    basis: &'a ModeBasis,
    lapse: &'a [f64],
    uniform_lapse: Option<f64>,
    clock_rate: f64,
    control: StepControl,
    log_floor: f64,
}

impl Stepper<'_> {
    /// Mode-space rate at `offset` label time after the step start, and `ln|Psi|`.
    fn rate(&self, offset: f64, q: &[f64]) -> std::result::Result<(Vec<f64>, f64), StepFailure> {
        let evolved = evolve_stationary(self.state, self.basis, self.clock_rate * offset)?;
        let (ratio, value) = guidance_ratio_modes(&evolved, self.basis, q)?;
        let log_abs = value.log_abs();
        if log_abs < self.log_floor {
            return Err(StepFailure::Retry(Retry::NodeProximity(value.value.norm())));
        }
        let im: Vec<f64> = ratio.iter().map(|r| r.im).collect();
        let rate = match self.uniform_lapse {
            Some(n) => im.iter().map(|v| n * v).collect(),
            None => {
                let sites = self.basis.synthesize(&im)?;
                let scaled: Vec<f64> = sites.iter().zip(self.lapse).map(|(v, n)| v * n).collect();
                self.basis.analyze(&scaled)?
            }
        };
        Ok((rate, log_abs))
    }

    fn try_step(&self, offset: f64, q: &[f64], h: f64) -> std::result::Result<Vec<f64>, StepFailure> {
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { q.iter().zip(k).map(|(y, k)| y + a * k).collect() };
        let (k1, _) = self.rate(offset, q)?;
        let (k2, _) = self.rate(offset + 0.5 * h, &axpy(0.5 * h, &k1))?;
        let (k3, _) = self.rate(offset + 0.5 * h, &axpy(0.5 * h, &k2))?;
        let (k4, _) = self.rate(offset + h, &axpy(h, &k3))?;
        let next: Vec<f64> = (0..q.len())
            .map(|i| q[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if let Some(bound) = self.control.max_dphi {
            let diff: Vec<f64> = next.iter().zip(q).map(|(a, b)| a - b).collect();
            let dphi = self.basis.synthesize(&diff)?;
            let worst = dphi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > bound {
                return Err(StepFailure::Retry(Retry::TooLarge(worst)));
            }
        }
        // a node can sit between stages; check the end point as well
        self.rate(offset + h, &next)?;
        Ok(next)
    }

    fn advance(&self, offset: f64, q: &[f64], h: f64, depth: u32) -> Result<Vec<f64>> {
        match self.try_step(offset, q, h) {
            Ok(next) => Ok(next),
            Err(StepFailure::Fatal(e)) => Err(e),
            Err(StepFailure::Retry(reason)) => {
                if depth >= self.control.max_halvings {
                    return Err(match reason {
                        Retry::NodeProximity(magnitude) => Error::Node { magnitude },
                        Retry::TooLarge(max_dphi) => Error::StepUnderflow {
                            halvings: depth,
                            max_dphi,
                        },
                    });
                }
                let mid = self.advance(offset, q, 0.5 * h, depth + 1)?;
                self.advance(offset + 0.5 * h, &mid, 0.5 * h, depth + 1)
            }
        }
    }
}

/// One RK4 step of the Bohm field from `traj.leaf_label` to `traj.leaf_label + dt`.
///
/// `state` is the wave functional at the step start. Inside the step it is
/// evolved in closed form with the measure-weighted mean lapse of `leaf` as
/// the clock rate.
pub fn step_rk4(
    state: &WaveFunctionalState,
    basis: &ModeBasis,
    traj: &TrajectoryState,
    leaf: &Leaf,
    dt: f64,
    control: &StepControl,
) -> Result<TrajectoryState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    basis.check_leaf(leaf.id())?;
    basis.check_leaf(traj.field.basis_id())?;
    check_len(basis.dim(), leaf.len())?;

    let lapse = leaf.lapse();
    let first = lapse[0];
    let uniform_lapse = lapse.iter().all(|&n| n == first).then_some(first);

    let q0 = traj.field.mode_coords();
    let (start_ratio, start_value) = guidance_ratio_modes(state, basis, q0)?;
    let im: Vec<f64> = start_ratio.iter().map(|r| r.im).collect();
    let dphi_dt: Vec<f64> = basis
        .synthesize(&im)?
        .iter()
        .zip(lapse)
        .map(|(v, n)| v * n)
        .collect();

    let stepper = Stepper {
        state,
        basis,
        lapse,
        uniform_lapse,
        clock_rate: leaf.mean_lapse(),
        control: *control,
        log_floor: start_value.log_abs() + control.node_ratio.ln(),
    };
    let q = stepper.advance(0.0, q0, dt, 0)?;
    Ok(TrajectoryState {
        leaf_label: traj.leaf_label + dt,
        field: FieldConfig::from_modes(basis, q)?,
        dphi_dt,
    })
}

/// Integrates over `steps` equal steps on a stationary leaf family.
///
/// `state` is the wave functional at the start; the state at each step start
/// is obtained in closed form from it rather than by accumulation.
pub fn integrate_stationary(
    state: &WaveFunctionalState,
    basis: &ModeBasis,
    traj: &TrajectoryState,
    leaf: &Leaf,
    duration: f64,
    steps: usize,
    control: &StepControl,
) -> Result<TrajectoryState> {
    if steps == 0 {
        return Ok(traj.clone());
    }
    let dt = duration / steps as f64;
    let clock = leaf.mean_lapse();
    let mut current = traj.clone();
    for k in 0..steps {
        let at = evolve_stationary(state, basis, clock * dt * k as f64)?;
        current = step_rk4(&at, basis, &current, leaf, dt, control)?;
    }
    current.leaf_label = traj.leaf_label + duration;
    Ok(current)
}
