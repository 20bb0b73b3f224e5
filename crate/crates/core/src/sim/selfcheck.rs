//! Built-in invariant checks with residuals.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{
    build_k_operator, inner, spectral_sqrt, summation_by_parts_residual, FieldConfig, Leaf, MinkowskiVector,
    ModeBasis,
};
use crate::guidance::{integrate_stationary, StepControl, TrajectoryState};
use crate::stress_energy::{tensor_from_derivatives, timelike_eigenvector};
use crate::wavefunctional::{apply_hamiltonian, eval_term, evaluate, LabelFunction, Term, WaveFunctionalState};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelfCheckOptions {
    /// Added to `K[0][1]` only, breaking symmetry (negative control).
    pub perturb_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelfCheckReport {
    pub checks: Vec<Check>,
}

impl SelfCheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, outcome: Result<f64>, tolerance: f64) {
        let residual = outcome.unwrap_or(f64::INFINITY);
        self.checks.push(Check {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual < tolerance,
        });
    }
}

pub fn selfcheck(options: SelfCheckOptions) -> SelfCheckReport {
    let mut report = SelfCheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    report.push("dispersion_4_site", dispersion_4_site(), 1e-12);
    report.push("dispersion_continuum_64", dispersion_continuum(), 0.02);
    report.push("self_adjointness", self_adjointness(options.perturb_k), 1e-12);
    report.push("sqrt_squares_to_k", sqrt_residual(&mut rng), 1e-10);
    report.push("mode_orthonormality", orthonormality(&mut rng), 1e-12);
    report.push("summation_by_parts", summation_by_parts(&mut rng), 1e-13);
    report.push("hermite_forms", hermite_forms(&mut rng), 1e-12);
    report.push("hamiltonian_examples", hamiltonian_examples(&mut rng), 1e-10);
    report.push("eigenstate_static", eigenstate_static(), 1e-12);
    report.push("boost_covariance", boost_covariance(), 1e-10);
    report
}

/// A leaf with a random smooth-ish time profile, space-like by construction.
fn random_leaf(rng: &mut impl Rng, sites: usize) -> Result<Leaf> {
    let dx = rng.random_range(0.2..1.0);
    let times: Vec<f64> = (0..sites).map(|_| rng.random_range(-0.3..0.3) * dx).collect();
    Leaf::from_time_profile(dx, &times)
}

fn dispersion_4_site() -> Result<f64> {
    let leaf = Leaf::flat(4, 1.0)?;
    let basis = ModeBasis::for_leaf(&leaf, 1.0)?;
    let want = [1.0, 3.0, 3.0, 5.0];
    Ok(basis
        .frequencies()
        .iter()
        .zip(want)
        .fold(0.0f64, |m, (w, k)| m.max((w * w - k).abs())))
}

fn dispersion_continuum() -> Result<f64> {
    let leaf = Leaf::flat(64, 0.5)?;
    let basis = ModeBasis::for_leaf(&leaf, 1.0)?;
    let k = 2.0 * PI * 3.0 / 32.0;
    let exact = 1.0 + k * k;
    // wave number 3 is the degenerate pair at ascending positions 5 and 6
    let w = basis.frequencies()[5];
    Ok((w * w - exact).abs() / exact)
}

fn self_adjointness(perturb: Option<f64>) -> Result<f64> {
    let leaf = Leaf::from_time_profile(0.5, &[0.0, 0.1, 0.15, 0.05, -0.1, -0.05])?;
    let mut k = build_k_operator(&leaf, 1.0)?;
    if let Some(eps) = perturb {
        k.matrix_mut()[(0, 1)] += eps;
    }
    Ok(k.self_adjointness_residual())
}

fn sqrt_residual(rng: &mut impl Rng) -> Result<f64> {
    let leaf = random_leaf(rng, 8)?;
    let k = build_k_operator(&leaf, 2.0)?;
    let (root, _) = spectral_sqrt(&k)?;
    let square = root.matrix() * root.matrix();
    Ok((square - k.matrix()).norm() / k.matrix().norm())
}

fn orthonormality(rng: &mut impl Rng) -> Result<f64> {
    let leaf = random_leaf(rng, 16)?;
    Ok(ModeBasis::for_leaf(&leaf, 1.0)?.orthonormality_residual())
}

fn summation_by_parts(rng: &mut impl Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let sites = 2 * rng.random_range(2..16);
        let leaf = random_leaf(rng, sites)?;
        let phi: Vec<f64> = (0..sites).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(summation_by_parts_residual(&phi, &leaf)?);
    }
    Ok(worst)
}

fn hermite_forms(rng: &mut impl Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let leaf = Leaf::flat(8, 0.5)?;
        let basis = ModeBasis::for_leaf(&leaf, rng.random_range(0.3..3.0))?;
        let q: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let field = FieldConfig::from_modes(&basis, q.clone())?;
        let (n, m) = (rng.random_range(0..8), rng.random_range(0..8));
        let w = basis.frequencies();
        let label = |k| LabelFunction::single_mode(8, k, Complex64::new(1.0, 0.0));
        let one = eval_term(&[label(n)?], &basis, &field)?;
        worst = worst.max((one - SQRT_2 * q[n] * w[n]).norm());
        let two = eval_term(&[label(n)?, label(m)?], &basis, &field)?;
        let delta = if n == m { w[m] } else { 0.0 };
        worst = worst.max((two - (2.0 * q[n] * q[m] * w[n] * w[m] - delta)).norm());
    }
    Ok(worst)
}

fn hamiltonian_examples(rng: &mut impl Rng) -> Result<f64> {
    let leaf = random_leaf(rng, 8)?;
    let k = build_k_operator(&leaf, 1.3)?;
    let (root, basis) = spectral_sqrt(&k)?;
    let random_field = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..8).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    let (h1, h2) = (random_field(&mut local), random_field(&mut local));
    let apply = |m: &DMatrix<f64>, f: &[f64]| -> Vec<f64> { (m * nalgebra::DVector::from_column_slice(f)).as_slice().to_vec() };
    let real = |f: &[f64]| -> Vec<Complex64> { f.iter().map(|v| Complex64::new(*v, 0.0)).collect() };
    let (rh1, rh2) = (apply(root.matrix(), &h1), apply(root.matrix(), &h2));
    let (kh1, kh2) = (apply(k.matrix(), &h1), apply(k.matrix(), &h2));

    let l1 = LabelFunction::from_sites(&basis, &real(&h1))?;
    let l2 = LabelFunction::from_sites(&basis, &real(&h2))?;
    let one = WaveFunctionalState::new(&basis, vec![Term::new(Complex64::new(1.0, 0.0), vec![l1.clone()])])?;
    let two = WaveFunctionalState::new(&basis, vec![Term::new(Complex64::new(1.0, 0.0), vec![l1, l2])])?;
    let (h_one, h_two) = (apply_hamiltonian(&one, &basis)?, apply_hamiltonian(&two, &basis)?);

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let chi = random_field(&mut local);
        let field = FieldConfig::from_sites(&basis, chi.clone())?;
        let want_one = SQRT_2 * inner(&chi, &kh1, &leaf)?;
        let got_one = evaluate(&h_one, &basis, &field)?.value;
        worst = worst.max((got_one - want_one).norm() / want_one.abs().max(1.0));
        let want_two = 2.0 * inner(&chi, &kh1, &leaf)? * inner(&chi, &rh2, &leaf)?
            + 2.0 * inner(&chi, &rh1, &leaf)? * inner(&chi, &kh2, &leaf)?
            - 2.0 * inner(&h1, &kh2, &leaf)?;
        let got_two = evaluate(&h_two, &basis, &field)?.value;
        worst = worst.max((got_two - want_two).norm() / want_two.abs().max(1.0));
    }
    Ok(worst)
}

fn eigenstate_static() -> Result<f64> {
    let leaf = Leaf::flat(8, 0.5)?;
    let basis = ModeBasis::for_leaf(&leaf, 1.0)?;
    let n = 2;
    let state = WaveFunctionalState::new(
        &basis,
        vec![Term::new(
            Complex64::new(1.0, 0.0),
            vec![LabelFunction::single_mode(8, n, Complex64::new(1.0, 0.0))?],
        )],
    )?;
    let q: Vec<f64> = (0..8).map(|k| 0.1 * (k as f64 + 1.0)).collect();
    let traj = TrajectoryState::new(0.0, FieldConfig::from_modes(&basis, q.clone())?);
    let period = 2.0 * PI / basis.frequencies()[n];
    let end = integrate_stationary(&state, &basis, &traj, &leaf, period, 200, &StepControl::default())?;
    Ok(end
        .field
        .mode_coords()
        .iter()
        .zip(&q)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

fn boost_covariance() -> Result<f64> {
    let rest_n = MinkowskiVector::new(1.0, 0.0);
    let rest_e = MinkowskiVector::new(0.0, 1.0);
    let (phi, pi, grad, mass) = (0.4, 0.9, 0.3, 1.0);
    let w = timelike_eigenvector(&tensor_from_derivatives(phi, pi, grad, mass, rest_n, rest_e))?;
    let mut worst = 0.0f64;
    for v in [0.3, 0.6, 0.9] {
        let boosted = tensor_from_derivatives(phi, pi, grad, mass, rest_n.boost(v), rest_e.boost(v));
        let w_boosted = timelike_eigenvector(&boosted)?;
        let d = w_boosted - w.boost(v);
        worst = worst.max(d.t.abs().max(d.x.abs()));
    }
    let lapse = MinkowskiVector::from_velocity(0.6).dot(rest_n);
    Ok(worst.max((lapse - 1.25).abs()))
}
