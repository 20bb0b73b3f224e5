//! The leaf-by-leaf run loop.
//!
//! On every leaf the guidance ratio gives the normal derivative `pi` of the
//! Bohm field, the foliation strategy turns `(phi, pi)` into displacement
//! vectors `W` and lapses `N = W.n`, and a record is emitted. The field is then
//! RK4-advanced by `d_epsilon` with that lapse, the labels are evolved by the
//! elapsed proper time, and the leaf is moved. When the new leaf has different
//! intrinsic geometry the basis is rebuilt and the labels reprojected.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::foliation::{advance_leaf, lapse_for, next_w, FoliationStrategy};
use crate::geometry::{FieldConfig, Leaf, MinkowskiVector, ModeBasis};
use crate::guidance::{step_rk4, StepControl, TrajectoryState};
use crate::wavefunctional::{evolve_stationary, guidance_ratio_modes, reproject, WaveFunctionalState};

use super::config::RunConfig;
use super::record::{restore_state, snapshot_state, LeafRecord, LeafSnapshot, ProjectionLog};

/// Relative tolerance under which a moved leaf reuses the previous basis.
const SAME_GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides the configured step count.
    pub steps: Option<usize>,
    /// Fill `wall_clock_s` (makes output nondeterministic).
    pub wall_clock: bool,
}

/// Iterator over the records of a run: one per leaf, leaves `start..=steps`.
///
/// The first error is yielded once, after the record of the leaf it was
/// raised on, and ends the stream.
pub struct Simulation {
    mass: f64,
    strategy: FoliationStrategy,
    control: StepControl,
    steps: usize,
    wall_clock: bool,
    leaf: Leaf,
    /// Leaf the current basis was computed on (identical geometry to `leaf`).
    basis_leaf: Leaf,
    basis: ModeBasis,
    state: WaveFunctionalState,
    field: FieldConfig,
    step: usize,
    projection: Option<ProjectionLog>,
    /// Failure of the step after the last emitted record.
    pending: Option<Error>,
    finished: bool,
}

impl Simulation {
    pub fn new(config: &RunConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let leaf = config.initial_leaf()?;
        let basis = ModeBasis::for_leaf(&leaf, config.mass)?;
        let state = config.initial_state(&basis)?;
        let field = config.initial_field(&basis)?;
        Self::assemble(config, options, leaf, basis, state, field, 0)
    }

    /// Continues a run from one of its own records.
    ///
    /// The first record yielded recomputes `record` itself.
    pub fn resume(config: &RunConfig, options: RunOptions, record: &LeafRecord) -> Result<Self> {
        config.validate()?;
        let leaf = record.leaf.to_leaf()?;
        if leaf.len() != config.sites {
            return Err(Error::Config(format!(
                "record has {} sites, config {}",
                leaf.len(),
                config.sites
            )));
        }
        let basis_leaf = match &record.basis_leaf {
            Some(snapshot) => snapshot.to_leaf()?,
            None => leaf.clone(),
        };
        let basis = ModeBasis::for_leaf(&basis_leaf, config.mass)?.rebind(leaf.id());
        let same = basis.frequencies() == record.frequencies.as_slice() && record.q.len() == basis.dim();
        let state = restore_state(&record.state, &basis, same)?;
        let field = if same {
            FieldConfig::from_parts(&basis, record.phi.clone(), record.q.clone())?
        } else {
            FieldConfig::from_sites(&basis, record.phi.clone())?
        };
        let mut sim = Self::assemble(config, options, leaf, basis, state, field, record.step)?;
        sim.basis_leaf = basis_leaf;
        Ok(sim)
    }

    fn assemble(
        config: &RunConfig,
        options: RunOptions,
        leaf: Leaf,
        basis: ModeBasis,
        state: WaveFunctionalState,
        field: FieldConfig,
        step: usize,
    ) -> Result<Self> {
        Ok(Self {
            mass: config.mass,
            strategy: config.strategy()?,
            control: config.step_control(),
            steps: options.steps.unwrap_or(config.steps),
            wall_clock: options.wall_clock,
            basis_leaf: leaf.clone(),
            leaf,
            basis,
            state,
            field,
            step,
            projection: None,
            pending: None,
            finished: false,
        })
    }

    pub fn leaf(&self) -> &Leaf {
        &self.leaf
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn state(&self) -> &WaveFunctionalState {
        &self.state
    }

    pub fn field(&self) -> &FieldConfig {
        &self.field
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Emits the record for the current leaf and, unless it is the last, moves on.
    fn advance(&mut self) -> Result<LeafRecord> {
        let started = Instant::now();
        let (ratio_modes, value) = guidance_ratio_modes(&self.state, &self.basis, self.field.mode_coords())?;
        let ratio = self.basis.synthesize_complex(&ratio_modes)?;
        let pi: Vec<f64> = ratio.iter().map(|r| r.im).collect();
        let phi = self.field.site_values().to_vec();
        let flow = next_w(&self.strategy, &self.leaf, &phi, &pi, self.mass)?;
        let lapse = lapse_for(&self.leaf, &flow.w)?;
        let velocity: Vec<f64> = pi.iter().zip(&lapse).map(|(p, n)| n * p).collect();

        let mut record = LeafRecord {
            step: self.step,
            t: self.leaf.label(),
            phi,
            velocity,
            rho: flow.stress.energy_density.clone(),
            w_t: flow.w.iter().map(|w| w.t).collect(),
            w_x: flow.w.iter().map(|w| w.x).collect(),
            lapse: lapse.clone(),
            q: self.field.mode_coords().to_vec(),
            frequencies: self.basis.frequencies().to_vec(),
            log_abs_psi: value.log_abs(),
            degenerate_sites: flow.degenerate_sites,
            projection: self.projection.take(),
            leaf: LeafSnapshot::of(&self.leaf),
            basis_leaf: (self.basis_leaf.id() != self.leaf.id()).then(|| LeafSnapshot::of(&self.basis_leaf)),
            state: snapshot_state(&self.state, &self.basis)?,
            wall_clock_s: None,
        };

        if self.step < self.steps {
            if let Err(e) = self.move_on(&flow.w, lapse) {
                self.pending = Some(e);
            }
        }
        self.step += 1;
        if self.wall_clock {
            record.wall_clock_s = Some(started.elapsed().as_secs_f64());
        }
        Ok(record)
    }

    /// RK4 step, label evolution and leaf advance towards the next leaf.
    fn move_on(&mut self, w: &[MinkowskiVector], lapse: Vec<f64>) -> Result<()> {
        let d = self.strategy.d_epsilon;
        let stepping = self.leaf.clone().with_lapse(lapse)?;
        let traj = TrajectoryState::new(stepping.label(), self.field.clone());
        let moved = step_rk4(&self.state, &self.basis, &traj, &stepping, d, &self.control)?;
        let state = evolve_stationary(&self.state, &self.basis, stepping.mean_lapse() * d)?;
        let next = advance_leaf(&self.leaf, w, d)?;

        if next.same_geometry(&self.leaf, SAME_GEOMETRY_TOL) {
            let basis = self.basis.rebind(next.id());
            self.state = state.rebind(&basis)?;
            self.field = FieldConfig::from_modes(&basis, moved.field.mode_coords().to_vec())?;
            self.basis = basis;
        } else {
            let basis = ModeBasis::for_leaf(&next, self.mass)?;
            let (state, residual) = reproject(&state, &self.basis, &basis)?;
            let frequency_drift = basis
                .frequencies()
                .iter()
                .zip(self.basis.frequencies())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            self.field = moved.field.rebase(&basis)?;
            self.state = state;
            self.basis = basis;
            self.basis_leaf = next.clone();
            self.projection = Some(ProjectionLog {
                residual,
                frequency_drift,
            });
        }
        self.leaf = next;
        Ok(())
    }
}

impl Iterator for Simulation {
    type Item = Result<LeafRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        if let Some(e) = self.pending.take() {
            self.finished = true;
            return Some(Err(e));
        }
        if self.step > self.steps {
            return None;
        }
        let out = self.advance();
        if out.is_err() {
            self.finished = true;
        }
        Some(out)
    }
}

/// Runs to completion and collects every record.
pub fn run(config: &RunConfig) -> Result<Vec<LeafRecord>> {
    Simulation::new(config, RunOptions::default())?.collect()
}
