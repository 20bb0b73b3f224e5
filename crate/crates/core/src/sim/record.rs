//! Line-delimited output records.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Leaf, MinkowskiVector, ModeBasis};
use crate::wavefunctional::{LabelFunction, Term, WaveFunctionalState};

use super::config::{FoliationSpec, RunConfig};

/// Embedding of a leaf, enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSnapshot {
    pub label: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub period: [f64; 2],
    pub spacing: f64,
    pub lapse: Vec<f64>,
}

impl LeafSnapshot {
    pub fn of(leaf: &Leaf) -> Self {
        Self {
            label: leaf.label(),
            t: leaf.points().iter().map(|p| p.t).collect(),
            x: leaf.points().iter().map(|p| p.x).collect(),
            period: [leaf.period().t, leaf.period().x],
            spacing: leaf.spacing(),
            lapse: leaf.lapse().to_vec(),
        }
    }

    pub fn to_leaf(&self) -> Result<Leaf> {
        if self.t.len() != self.x.len() {
            return Err(Error::Shape {
                expected: self.t.len(),
                found: self.x.len(),
            });
        }
        let points = self
            .t
            .iter()
            .zip(&self.x)
            .map(|(t, x)| MinkowskiVector::new(*t, *x))
            .collect();
        Leaf::new(
            self.label,
            points,
            MinkowskiVector::new(self.period[0], self.period[1]),
            self.spacing,
            Some(self.lapse.clone()),
        )
    }
}

/// One term of the state: labels as complex site values and as mode coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSnapshot {
    pub amplitude: Complex64,
    pub labels: Vec<Vec<Complex64>>,
    pub coeffs: Vec<Vec<Complex64>>,
}

pub fn snapshot_state(state: &WaveFunctionalState, basis: &ModeBasis) -> Result<Vec<TermSnapshot>> {
    state
        .terms()
        .iter()
        .map(|t| {
            Ok(TermSnapshot {
                amplitude: t.amplitude,
                labels: t
                    .labels
                    .iter()
                    .map(|h| h.site_values(basis))
                    .collect::<Result<_>>()?,
                coeffs: t.labels.iter().map(|h| h.coeffs().to_vec()).collect(),
            })
        })
        .collect()
}

/// Rebuilds a state from the stored coefficients, or from the site values
/// when `basis` is not the one the snapshot was taken in.
pub fn restore_state(terms: &[TermSnapshot], basis: &ModeBasis, same_basis: bool) -> Result<WaveFunctionalState> {
    let terms = terms
        .iter()
        .map(|t| {
            let labels = if same_basis {
                t.coeffs.iter().map(|c| LabelFunction::new(c.clone())).collect()
            } else {
                t.labels
                    .iter()
                    .map(|sites| LabelFunction::from_sites(basis, sites))
                    .collect::<Result<_>>()?
            };
            Ok(Term::new(t.amplitude, labels))
        })
        .collect::<Result<_>>()?;
    WaveFunctionalState::new(basis, terms)
}

/// Label transfer onto a leaf with different geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionLog {
    /// Max site-space error of the re-expanded labels.
    pub residual: f64,
    /// Max change of any frequency relative to the previous leaf.
    pub frequency_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub step: usize,
    pub t: f64,
    pub phi: Vec<f64>,
    /// `dphi/dt` with respect to the label.
    pub velocity: Vec<f64>,
    /// Energy density of the Bohm field seen along the leaf normal.
    pub rho: Vec<f64>,
    pub w_t: Vec<f64>,
    pub w_x: Vec<f64>,
    /// Lapse towards the next leaf.
    pub lapse: Vec<f64>,
    pub q: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub log_abs_psi: f64,
    pub degenerate_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionLog>,
    pub leaf: LeafSnapshot,
    /// Earlier leaf of identical geometry whose basis is still in use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_leaf: Option<LeafSnapshot>,
    pub state: Vec<TermSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: String,
    pub sites: usize,
    pub dx: f64,
    pub mass: f64,
    pub d_epsilon: f64,
    pub steps: usize,
    pub foliation: FoliationSpec,
}

impl RunHeader {
    pub fn new(config: &RunConfig, steps: usize) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            sites: config.sites,
            dx: config.dx,
            mass: config.mass,
            d_epsilon: config.d_epsilon,
            steps,
            foliation: config.foliation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub step: usize,
    pub t: f64,
    pub code: i32,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(step: usize, t: f64, error: &Error) -> Self {
        Self {
            step,
            t,
            code: exit_code(error),
            message: error.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputRecord {
    Header(RunHeader),
    Leaf(Box<LeafRecord>),
    Error(ErrorRecord),
}

/// Process exit status for an error: 2 config, 3 node, 4 foliation collapse, 1 otherwise.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::Unsupported(_) => 2,
        Error::Node { .. } | Error::StepUnderflow { .. } => 3,
        Error::FoliationCollapse { .. } => 4,
        _ => 1,
    }
}
