//! Run configuration, read from a flat TOML file.
//!
//! Units: `c = hbar = 1`. `dx` is the comoving lattice spacing (a length),
//! `mass` an inverse length, `d_epsilon` the proper-time step per leaf.
//!
//! ```toml
//! sites = 16            # even, >= 4
//! dx = 0.5
//! mass = 1.0
//! d_epsilon = 0.01
//! steps = 100
//! seed = 7              # ensemble sampling
//! ensemble_size = 10000
//!
//! [foliation]
//! kind = "equal_time"   # | "boosted" (velocity) | "lapse_profile" (times, values) | "dynamic"
//!
//! [field]               # optional; one of: sites = [..] | coords = [..] | mode + coord
//! mode = 0
//! coord = 0.4
//!
//! [[state]]             # a_0 Psi_0
//! amplitude = [0.7071067811865476, 0.0]
//!
//! [[state]]             # a_1 Psi_1[phi; h], h = b phi_0
//! amplitude = [0.7071067811865476, 0.0]
//! labels = [{ mode = 0, coeff = [1.0, 0.0] }]
//! ```
//!
//! A label is `{ mode, coeff }` (single mode), `{ coeffs = [[re, im], ..] }`
//! (all modes) or `{ sites = [..] }` (real site values, projected onto the
//! initial leaf's basis).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::{FoliationKind, FoliationStrategy, LapseTable};
use crate::geometry::{FieldConfig, Leaf, ModeBasis};
use crate::guidance::StepControl;
use crate::wavefunctional::{LabelFunction, Term, WaveFunctionalState};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FoliationSpec {
    #[default]
    EqualTime,
    Boosted { velocity: f64 },
    LapseProfile { times: Vec<f64>, values: Vec<Vec<f64>> },
    Dynamic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coord: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSpec {
    Mode { mode: usize, coeff: [f64; 2] },
    Coeffs { coeffs: Vec<[f64; 2]> },
    Sites { sites: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub amplitude: [f64; 2],
    #[serde(default)]
    pub labels: Vec<LabelSpec>,
}

fn default_steps() -> usize {
    100
}

fn default_ensemble_size() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sites: usize,
    pub dx: f64,
    pub mass: f64,
    pub d_epsilon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    /// Label times at which the ensemble is compared; defaults to a quarter, half and full period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_times: Option<Vec<f64>>,
    /// Mode sampled by the ensemble when the state does not single one out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_mode: Option<usize>,
    /// Per-step bound on `max |dphi|`; exceeding it triggers step halving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dphi: Option<f64>,
    #[serde(default)]
    pub foliation: FoliationSpec,
    #[serde(default)]
    pub field: FieldSpec,
    pub state: Vec<TermSpec>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 4 || !self.sites.is_multiple_of(2) {
            return Err(Error::Config(format!("sites must be even and >= 4, got {}", self.sites)));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Config(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::Config(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.d_epsilon > 0.0 && self.d_epsilon.is_finite()) {
            return Err(Error::Config(format!("d_epsilon must be positive, got {}", self.d_epsilon)));
        }
        if !self.state.iter().any(|t| t.amplitude != [0.0, 0.0]) {
            return Err(Error::Config("at least one state amplitude must be nonzero".into()));
        }
        if let Some(b) = self.max_dphi {
            if !(b > 0.0) {
                return Err(Error::Config(format!("max_dphi must be positive, got {b}")));
            }
        }
        self.strategy()?;
        let forms = [
            self.field.sites.is_some(),
            self.field.coords.is_some(),
            self.field.mode.is_some() || self.field.coord.is_some(),
        ];
        if forms.iter().filter(|f| **f).count() > 1 {
            return Err(Error::Config("field: give only one of sites, coords, or mode + coord".into()));
        }
        if self.field.mode.is_some() != self.field.coord.is_some() {
            return Err(Error::Config("field: mode and coord go together".into()));
        }
        for v in [&self.field.sites, &self.field.coords].into_iter().flatten() {
            if v.len() != self.sites {
                return Err(Error::Config(format!("field has {} values for {} sites", v.len(), self.sites)));
            }
        }
        if let Some(m) = self.field.mode {
            if m >= self.sites {
                return Err(Error::Config(format!("field mode {m} out of range")));
            }
        }
        for (k, term) in self.state.iter().enumerate() {
            for label in &term.labels {
                let ok = match label {
                    LabelSpec::Mode { mode, .. } => *mode < self.sites,
                    LabelSpec::Coeffs { coeffs } => coeffs.len() == self.sites,
                    LabelSpec::Sites { sites } => sites.len() == self.sites,
                };
                if !ok {
                    return Err(Error::Config(format!("state term {k}: label does not match {} sites", self.sites)));
                }
            }
        }
        Ok(())
    }

    pub fn strategy(&self) -> Result<FoliationStrategy> {
        let kind = match &self.foliation {
            FoliationSpec::EqualTime => FoliationKind::EqualTime,
            FoliationSpec::Boosted { velocity } => FoliationKind::Boosted { velocity: *velocity },
            FoliationSpec::LapseProfile { times, values } => {
                let table = LapseTable::new(times.clone(), values.clone())?;
                if table.sites() != self.sites {
                    return Err(Error::Config(format!(
                        "lapse table rows have {} values for {} sites",
                        table.sites(),
                        self.sites
                    )));
                }
                FoliationKind::LapseProfile(table)
            }
            FoliationSpec::Dynamic => FoliationKind::Dynamic,
        };
        FoliationStrategy::new(kind, self.d_epsilon)
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            max_dphi: self.max_dphi,
            ..StepControl::default()
        }
    }

    /// The first leaf: the rest-frame equal-time line, or the boosted frame's for `boosted`.
    pub fn initial_leaf(&self) -> Result<Leaf> {
        match self.foliation {
            FoliationSpec::Boosted { velocity } => Leaf::boosted(self.sites, self.dx, velocity),
            _ => Leaf::flat(self.sites, self.dx),
        }
    }

    pub fn initial_state(&self, basis: &ModeBasis) -> Result<WaveFunctionalState> {
        let dim = basis.dim();
        let terms = self
            .state
            .iter()
            .map(|t| {
                let labels = t
                    .labels
                    .iter()
                    .map(|l| match l {
                        LabelSpec::Mode { mode, coeff } => {
                            LabelFunction::single_mode(dim, *mode, Complex64::new(coeff[0], coeff[1]))
                        }
                        LabelSpec::Coeffs { coeffs } => Ok(LabelFunction::new(
                            coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect(),
                        )),
                        LabelSpec::Sites { sites } => {
                            let values: Vec<Complex64> = sites.iter().map(|v| Complex64::new(*v, 0.0)).collect();
                            LabelFunction::from_sites(basis, &values)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Term::new(Complex64::new(t.amplitude[0], t.amplitude[1]), labels))
            })
            .collect::<Result<Vec<_>>>()?;
        WaveFunctionalState::new(basis, terms)
    }

    pub fn initial_field(&self, basis: &ModeBasis) -> Result<FieldConfig> {
        if let Some(sites) = &self.field.sites {
            return FieldConfig::from_sites(basis, sites.clone());
        }
        if let Some(coords) = &self.field.coords {
            return FieldConfig::from_modes(basis, coords.clone());
        }
        let mut coords = vec![0.0; basis.dim()];
        if let (Some(m), Some(c)) = (self.field.mode, self.field.coord) {
            coords[m] = c;
        }
        FieldConfig::from_modes(basis, coords)
    }
}
