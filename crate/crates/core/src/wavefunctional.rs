//! Wave functionals as finite superpositions of excited Gaussians.
//!
//! Every functional `Psi_k[phi; h_1..h_k]` is stored as its ratio to the vacuum
//! Gaussian `Psi_0[phi] = exp(-1/2 sum_r omega_r q_r^2)`. The ratio is the
//! Hermite-type polynomial generated by repeated creation operators:
//!
//! ```text
//! P()          = 1
//! P(h_1..h_n)  = sqrt(2) B(h_n) P(h_1..h_{n-1})
//!                - sum_{m<n} <h_n, K^{1/2} h_m> P(h_1..(no h_m)..h_{n-1})
//! ```
//!
//! with `B(h) = <h, K^{1/2} phi> = sum_n b_n omega_n q_n`. Label pairings are
//! bilinear, not sesquilinear: label functions are complex and enter without
//! conjugation.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{FieldConfig, LeafId, ModeBasis};

/// Largest number of labels a single term may carry (the evaluation table is `2^k`).
pub const MAX_LABELS: usize = 16;

/// Below this magnitude of `Psi / Psi_0` the configuration is treated as a node.
pub const NODE_THRESHOLD: f64 = 1e-300;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A label function `h = sum_n b_n phi_n` stored by its mode coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelFunction {
    coeffs: Vec<Complex64>,
}

impl LabelFunction {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    /// `coeff * phi_mode` in a basis of dimension `dim`.
    pub fn single_mode(dim: usize, mode: usize, coeff: Complex64) -> Result<Self> {
        if mode >= dim {
            return Err(Error::Shape {
                expected: dim,
                found: mode + 1,
            });
        }
        let mut coeffs = vec![ZERO; dim];
        coeffs[mode] = coeff;
        Ok(Self { coeffs })
    }

    /// Projects site values onto the basis.
    pub fn from_sites(basis: &ModeBasis, values: &[Complex64]) -> Result<Self> {
        Ok(Self {
            coeffs: basis.analyze_complex(values)?,
        })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn site_values(&self, basis: &ModeBasis) -> Result<Vec<Complex64>> {
        basis.synthesize_complex(&self.coeffs)
    }

    /// Modes with a nonzero coefficient.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(n, _)| n)
    }

    /// `K^{1/2} h`, i.e. `b_n -> omega_n b_n`.
    fn promoted(&self, omega: &[f64]) -> Self {
        Self {
            coeffs: self.coeffs.iter().zip(omega).map(|(b, w)| b * w).collect(),
        }
    }
}

/// One term `a_k Psi_k[phi; h_1..h_k]` of a superposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub amplitude: Complex64,
    pub labels: Vec<LabelFunction>,
}

impl Term {
    pub fn new(amplitude: Complex64, labels: Vec<LabelFunction>) -> Self {
        Self { amplitude, labels }
    }

    pub fn vacuum(amplitude: Complex64) -> Self {
        Self::new(amplitude, Vec::new())
    }
}

/// Unnormalized superposition of functionals over one mode basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunctionalState {
    terms: Vec<Term>,
    basis_id: LeafId,
    dim: usize,
}

impl WaveFunctionalState {
    pub fn new(basis: &ModeBasis, terms: Vec<Term>) -> Result<Self> {
        if !terms.iter().any(|t| t.amplitude != ZERO) {
            return Err(Error::InvalidState(
                "state needs at least one term with nonzero amplitude".into(),
            ));
        }
        for term in &terms {
            if term.labels.len() > MAX_LABELS {
                return Err(Error::InvalidState(format!(
                    "term has {} labels, at most {MAX_LABELS} supported",
                    term.labels.len()
                )));
            }
            for label in &term.labels {
                check_len(basis.dim(), label.coeffs.len())?;
                if label.coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                    return Err(Error::InvalidState("non-finite label coefficient".into()));
                }
            }
        }
        Ok(Self {
            terms,
            basis_id: basis.leaf_id(),
            dim: basis.dim(),
        })
    }

    pub fn vacuum(basis: &ModeBasis) -> Self {
        Self {
            terms: vec![Term::vacuum(Complex64::new(1.0, 0.0))],
            basis_id: basis.leaf_id(),
            dim: basis.dim(),
        }
    }

    /// Reattaches the state to a basis of identical geometry (see [`ModeBasis::rebind`]).
    pub fn rebind(&self, basis: &ModeBasis) -> Result<Self> {
        check_len(basis.dim(), self.dim)?;
        Ok(Self {
            basis_id: basis.leaf_id(),
            ..self.clone()
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn basis_id(&self) -> LeafId {
        self.basis_id
    }

    /// True for the zero functional (e.g. `H` applied to the vacuum).
    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == ZERO)
    }

    /// The single mode every label lives on, if there is one.
    pub fn single_mode(&self) -> Option<Option<usize>> {
        let mut mode = None;
        for label in self.terms.iter().flat_map(|t| &t.labels) {
            for n in label.support() {
                match mode {
                    None => mode = Some(n),
                    Some(m) if m == n => {}
                    Some(_) => return None,
                }
            }
        }
        Some(mode)
    }
}

/// `Psi[phi]` split into the ratio to the vacuum and the log of the vacuum Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValue {
    pub value: Complex64,
    pub log_gaussian: f64,
}

impl FunctionalValue {
    pub fn full(&self) -> Complex64 {
        self.value * self.log_gaussian.exp()
    }

    /// `ln |Psi[phi]|`.
    pub fn log_abs(&self) -> f64 {
        self.value.norm().ln() + self.log_gaussian
    }
}

/// `P` evaluated on every subset of a term's labels, indexed by bitmask.
struct PolynomialTable {
    values: Vec<Complex64>,
}

impl PolynomialTable {
    fn build(labels: &[LabelFunction], omega: &[f64], q: &[f64]) -> Self {
        let k = labels.len();
        let b: Vec<Complex64> = labels
            .iter()
            .map(|h| {
                h.coeffs
                    .iter()
                    .zip(omega.iter().zip(q))
                    .map(|(c, (w, q))| c * (w * q))
                    .sum()
            })
            .collect();
        let mut pair = vec![ZERO; k * k];
        for j in 0..k {
            for l in 0..j {
                let c: Complex64 = labels[j]
                    .coeffs
                    .iter()
                    .zip(&labels[l].coeffs)
                    .zip(omega)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                pair[j * k + l] = c;
                pair[l * k + j] = c;
            }
        }

        let mut values = vec![ZERO; 1 << k];
        values[0] = Complex64::new(1.0, 0.0);
        for mask in 1usize..(1 << k) {
            let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
            let rest = mask & !(1 << top);
            let mut v = b[top] * values[rest] * SQRT_2;
            let mut bits = rest;
            while bits != 0 {
                let m = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                v -= pair[top * k + m] * values[rest & !(1 << m)];
            }
            values[mask] = v;
        }
        Self { values }
    }

    fn full(&self) -> Complex64 {
        *self.values.last().expect("table is never empty")
    }

    fn without(&self, m: usize) -> Complex64 {
        let full = self.values.len() - 1;
        self.values[full & !(1 << m)]
    }
}

fn check_field(basis: &ModeBasis, field: &FieldConfig) -> Result<()> {
    basis.check_leaf(field.basis_id())
}

fn check_state(basis: &ModeBasis, state: &WaveFunctionalState) -> Result<()> {
    basis.check_leaf(state.basis_id)?;
    check_len(basis.dim(), state.dim)
}

/// Ratio `Psi_k[phi; h_1..h_k] / Psi_0[phi]` for one term.
pub fn eval_term(labels: &[LabelFunction], basis: &ModeBasis, field: &FieldConfig) -> Result<Complex64> {
    check_field(basis, field)?;
    if labels.len() > MAX_LABELS {
        return Err(Error::InvalidState(format!(
            "{} labels exceed the supported {MAX_LABELS}",
            labels.len()
        )));
    }
    for h in labels {
        check_len(basis.dim(), h.coeffs.len())?;
    }
    Ok(PolynomialTable::build(labels, basis.frequencies(), field.mode_coords()).full())
}

/// `log Psi_0[phi] = -1/2 sum omega_r q_r^2`.
pub fn log_vacuum(basis: &ModeBasis, field: &FieldConfig) -> f64 {
    -0.5 * basis
        .frequencies()
        .iter()
        .zip(field.mode_coords())
        .map(|(w, q)| w * q * q)
        .sum::<f64>()
}

pub fn evaluate(state: &WaveFunctionalState, basis: &ModeBasis, field: &FieldConfig) -> Result<FunctionalValue> {
    check_state(basis, state)?;
    check_field(basis, field)?;
    let omega = basis.frequencies();
    let q = field.mode_coords();
    let value = state
        .terms
        .iter()
        .map(|t| t.amplitude * PolynomialTable::build(&t.labels, omega, q).full())
        .sum();
    Ok(FunctionalValue {
        value,
        log_gaussian: log_vacuum(basis, field),
    })
}

/// `(1/Psi) dPsi/dphi_g` in mode coordinates, plus the functional value.
///
/// Coefficient `n` is `-omega_n q_n + D_n / P` where `D_n` collects the
/// derivative of the polynomial part: `dB(h)/dphi_g = K^{1/2} h`.
pub fn guidance_ratio_modes(
    state: &WaveFunctionalState,
    basis: &ModeBasis,
    q: &[f64],
) -> Result<(Vec<Complex64>, FunctionalValue)> {
    check_state(basis, state)?;
    check_len(basis.dim(), q.len())?;
    let omega = basis.frequencies();

    let mut value = ZERO;
    let mut deriv = vec![ZERO; basis.dim()];
    for term in &state.terms {
        if term.amplitude == ZERO {
            continue;
        }
        let table = PolynomialTable::build(&term.labels, omega, q);
        value += term.amplitude * table.full();
        for (m, h) in term.labels.iter().enumerate() {
            let weight = term.amplitude * table.without(m) * SQRT_2;
            if weight == ZERO {
                continue;
            }
            for ((d, b), w) in deriv.iter_mut().zip(&h.coeffs).zip(omega) {
                *d += weight * b * w;
            }
        }
    }

    let magnitude = value.norm();
    if !(magnitude >= NODE_THRESHOLD) || !magnitude.is_finite() {
        return Err(Error::Node { magnitude });
    }
    // divide through the phase first: |value|^2 can underflow where |value| does not
    let phase = (value / magnitude).conj();
    let ratio: Vec<Complex64> = deriv
        .iter()
        .zip(omega.iter().zip(q))
        .map(|(d, (w, q))| d * phase / magnitude - w * q)
        .collect();
    if ratio.iter().any(|r| !(r.re.is_finite() && r.im.is_finite())) {
        return Err(Error::Node { magnitude });
    }
    let log_gaussian = -0.5 * omega.iter().zip(q).map(|(w, q)| w * q * q).sum::<f64>();
    Ok((ratio, FunctionalValue { value, log_gaussian }))
}

/// `(1/Psi) dPsi/dphi_g(x)` at every site.
pub fn guidance_ratio(state: &WaveFunctionalState, basis: &ModeBasis, field: &FieldConfig) -> Result<Vec<Complex64>> {
    check_field(basis, field)?;
    let (modes, _) = guidance_ratio_modes(state, basis, field.mode_coords())?;
    basis.synthesize_complex(&modes)
}

/// `H Psi`: each label in turn is promoted to `K^{1/2} h`; the vacuum drops out.
pub fn apply_hamiltonian(state: &WaveFunctionalState, basis: &ModeBasis) -> Result<WaveFunctionalState> {
    check_state(basis, state)?;
    let omega = basis.frequencies();
    let mut terms = Vec::new();
    for term in &state.terms {
        for m in 0..term.labels.len() {
            let mut labels = term.labels.clone();
            labels[m] = labels[m].promoted(omega);
            terms.push(Term::new(term.amplitude, labels));
        }
    }
    Ok(WaveFunctionalState {
        terms,
        basis_id: state.basis_id,
        dim: state.dim,
    })
}

/// Closed-form evolution on a stationary leaf family: `h -> exp(-i K^{1/2} dt) h`.
pub fn evolve_stationary(state: &WaveFunctionalState, basis: &ModeBasis, dt: f64) -> Result<WaveFunctionalState> {
    check_state(basis, state)?;
    let phases: Vec<Complex64> = basis
        .frequencies()
        .iter()
        .map(|w| Complex64::from_polar(1.0, -w * dt))
        .collect();
    let terms = state
        .terms
        .iter()
        .map(|t| Term {
            amplitude: t.amplitude,
            labels: t
                .labels
                .iter()
                .map(|h| LabelFunction {
                    coeffs: h.coeffs.iter().zip(&phases).map(|(b, p)| b * p).collect(),
                })
                .collect(),
        })
        .collect();
    Ok(WaveFunctionalState {
        terms,
        basis_id: state.basis_id,
        dim: state.dim,
    })
}

/// Carries labels to a new leaf by site index and re-expands them in its basis.
///
/// Returns the new state and the largest site-space error of re-synthesizing
/// the projected labels. Basis rotation between the two leaves is not
/// propagated into the amplitudes.
pub fn reproject(
    state: &WaveFunctionalState,
    from: &ModeBasis,
    to: &ModeBasis,
) -> Result<(WaveFunctionalState, f64)> {
    check_state(from, state)?;
    check_len(from.dim(), to.dim())?;
    let mut residual = 0.0f64;
    let mut terms = Vec::with_capacity(state.terms.len());
    for t in &state.terms {
        let mut labels = Vec::with_capacity(t.labels.len());
        for h in &t.labels {
            let sites = h.site_values(from)?;
            let projected = LabelFunction::from_sites(to, &sites)?;
            let back = projected.site_values(to)?;
            for (a, b) in back.iter().zip(&sites) {
                residual = residual.max((a - b).norm());
            }
            labels.push(projected);
        }
        terms.push(Term::new(t.amplitude, labels));
    }
    Ok((
        WaveFunctionalState {
            terms,
            basis_id: to.leaf_id(),
            dim: to.dim(),
        },
        residual,
    ))
}
