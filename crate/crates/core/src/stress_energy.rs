//! Canonical stress-energy tensor of the classical Bohm field and its time-like eigenvector.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{Leaf, MinkowskiVector};

/// `W.W / |W|^2_euclid` above this is time-like; within `+-` it is treated as null.
pub const TIMELIKE_TOL: f64 = 1e-10;

/// Symmetric 2x2 tensor `T_{mu nu}` with lower Minkowski indices.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressTensor {
    pub tt: f64,
    pub tx: f64,
    pub xx: f64,
}

impl StressTensor {
    /// `T^mu_nu` as a row-major matrix.
    pub fn mixed(&self) -> [[f64; 2]; 2] {
        [[self.tt, self.tx], [-self.tx, -self.xx]]
    }

    /// `T^{01}`, the energy flux.
    pub fn flux(&self) -> f64 {
        -self.tx
    }

    /// Builds the tensor from a mixed-index matrix (assumed Minkowski-symmetric).
    pub fn from_mixed(m: [[f64; 2]; 2]) -> Self {
        Self {
            tt: m[0][0],
            tx: m[0][1],
            xx: -m[1][1],
        }
    }

    /// Tensor as seen after an active boost by `v`: `T' = L T L^{-1}` on mixed indices.
    pub fn boost(&self, v: f64) -> Self {
        let g = 1.0 / (1.0 - v * v).sqrt();
        let l = [[g, g * v], [g * v, g]];
        let li = [[g, -g * v], [-g * v, g]];
        let m = self.mixed();
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        *o += l[i][a] * m[a][b] * li[b][j];
                    }
                }
            }
        }
        Self::from_mixed(out)
    }

    /// `n^mu T_{mu nu} n^nu`.
    pub fn energy_density(&self, n: MinkowskiVector) -> f64 {
        n.t * n.t * self.tt + 2.0 * n.t * n.x * self.tx + n.x * n.x * self.xx
    }
}

/// Per-site stress-energy data of the Bohm field on a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct StressEnergyField {
    pub tensors: Vec<StressTensor>,
    /// Unit future-pointing time-like eigenvector, or the leaf normal where none exists.
    pub flow: Vec<MinkowskiVector>,
    pub energy_density: Vec<f64>,
    /// Sites where the leaf normal was substituted.
    pub degenerate: Vec<bool>,
}

impl StressEnergyField {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|d| **d).count()
    }
}

/// Tensor at one site from the normal derivative `pi` and the tangential
/// derivative per proper length `grad`, in the frame `(normal, tangent)`.
pub fn tensor_from_derivatives(
    phi: f64,
    pi: f64,
    grad: f64,
    mass: f64,
    normal: MinkowskiVector,
    tangent: MinkowskiVector,
) -> StressTensor {
    // d_mu phi = pi n_mu - grad e_mu, lowered with diag(1, -1)
    let d = MinkowskiVector::new(
        pi * normal.t - grad * tangent.t,
        -(pi * normal.x - grad * tangent.x),
    );
    let lagrangian = 0.5 * (pi * pi - grad * grad - mass * mass * phi * phi);
    StressTensor {
        tt: d.t * d.t - lagrangian,
        tx: d.t * d.x,
        xx: d.x * d.x + lagrangian,
    }
}

/// Canonical `T_{mu nu}` of a classical field with data `(phi, pi)` on the leaf.
///
/// `pi` is the normal derivative of the field. Sites without a time-like
/// eigenvector fall back to the leaf normal and are flagged.
pub fn compute_t(phi: &[f64], pi: &[f64], leaf: &Leaf, mass: f64) -> Result<StressEnergyField> {
    check_len(leaf.len(), phi.len())?;
    check_len(leaf.len(), pi.len())?;
    let grad = leaf.tangential_derivative(phi)?;
    let n = leaf.len();
    let mut out = StressEnergyField {
        tensors: Vec::with_capacity(n),
        flow: Vec::with_capacity(n),
        energy_density: Vec::with_capacity(n),
        degenerate: Vec::with_capacity(n),
    };
    for i in 0..n {
        let normal = leaf.normal(i);
        let t = tensor_from_derivatives(phi[i], pi[i], grad[i], mass, normal, leaf.tangent(i));
        let (w, degenerate) = match timelike_eigenvector(&t) {
            Ok(w) => (w, false),
            Err(_) => (normal, true),
        };
        out.energy_density.push(t.energy_density(normal));
        out.tensors.push(t);
        out.flow.push(w);
        out.degenerate.push(degenerate);
    }
    Ok(out)
}

/// Unit future-pointing time-like `W` with `T^mu_nu W^nu = lambda W^mu`.
///
/// The 2x2 eigenproblem is solved in closed form. Fails when the eigenvalues
/// coincide (null eigenvectors, or `T` proportional to the identity) or when
/// no eigenvector is time-like.
pub fn timelike_eigenvector(t: &StressTensor) -> Result<MinkowskiVector> {
    let [[a, b], [c, d]] = t.mixed();
    let scale = a.abs().max(b.abs()).max(d.abs()).max(f64::MIN_POSITIVE);
    // discriminant (a - d)^2 + 4bc = (T_tt + T_xx)^2 - 4 T_tx^2
    let disc = (a - d) * (a - d) + 4.0 * b * c;
    if disc <= TIMELIKE_TOL * scale * scale {
        return Err(Error::DegenerateFlow {
            reason: format!("coincident eigenvalues (discriminant {disc:e})"),
        });
    }
    let root = disc.sqrt();
    for lambda in [0.5 * (a + d + root), 0.5 * (a + d - root)] {
        let first = MinkowskiVector::new(b, lambda - a);
        let second = MinkowskiVector::new(lambda - d, c);
        let euclid = |v: MinkowskiVector| v.t * v.t + v.x * v.x;
        let w = if euclid(first) >= euclid(second) { first } else { second };
        let size = euclid(w);
        if size == 0.0 {
            continue;
        }
        let norm = w.norm_sq();
        if norm / size > TIMELIKE_TOL {
            let w = w.scale(1.0 / norm.sqrt());
            return Ok(if w.t < 0.0 { w.scale(-1.0) } else { w });
        }
    }
    Err(Error::DegenerateFlow {
        reason: "no time-like eigenvector".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest_frame() -> (MinkowskiVector, MinkowskiVector) {
        (MinkowskiVector::new(1.0, 0.0), MinkowskiVector::new(0.0, 1.0))
    }

    #[test]
    fn constant_field_energy() {
        let leaf = Leaf::flat(8, 0.5).unwrap();
        let c = 1.7;
        let f = compute_t(&[c; 8], &[0.0; 8], &leaf, 1.0).unwrap();
        for i in 0..8 {
            assert!((f.energy_density[i] - 0.5 * c * c).abs() < 1e-14);
            assert_eq!(f.tensors[i].tx, 0.0);
            assert!((f.tensors[i].tt - 0.5 * c * c).abs() < 1e-14);
            assert!((f.tensors[i].xx + 0.5 * c * c).abs() < 1e-14);
            // T is proportional to the identity: the normal is substituted
            assert!(f.degenerate[i]);
            assert_eq!(f.flow[i], MinkowskiVector::new(1.0, 0.0));
        }
    }

    #[test]
    fn pure_momentum_energy() {
        let leaf = Leaf::flat(6, 0.5).unwrap();
        let p = 0.8;
        let f = compute_t(&[0.0; 6], &[p; 6], &leaf, 1.0).unwrap();
        for i in 0..6 {
            assert!((f.energy_density[i] - 0.5 * p * p).abs() < 1e-14);
            assert_eq!(f.tensors[i].flux(), 0.0);
            assert_eq!(f.flow[i], MinkowskiVector::new(1.0, 0.0));
        }
    }

    #[test]
    fn traveling_profile_flux() {
        // phi = 0.3 x on a patch with d_x phi = pi: T^{01} = -pi * d_x phi
        let (n, e) = rest_frame();
        let pi = 0.3;
        let t = tensor_from_derivatives(0.2, pi, pi, 1e-3, n, e);
        assert!((t.flux() + pi * pi).abs() < 1e-15);
        assert!(matches!(timelike_eigenvector(&t), Err(Error::DegenerateFlow { .. })));
    }

    #[test]
    fn diagonal_tensor_gives_rest_vector() {
        let t = StressTensor { tt: 2.0, tx: 0.0, xx: 0.5 };
        assert_eq!(timelike_eigenvector(&t).unwrap(), MinkowskiVector::new(1.0, 0.0));
    }

    #[test]
    fn boosted_diagonal_tensor() {
        let t = StressTensor { tt: 2.0, tx: 0.0, xx: 0.5 }.boost(0.5);
        let w = timelike_eigenvector(&t).unwrap();
        let g = 1.0 / 0.75f64.sqrt();
        assert!((w.t - g).abs() < 1e-12 && (w.x - 0.5 * g).abs() < 1e-12);
    }

    #[test]
    fn energy_density_matches_hamiltonian_density() {
        let leaf = Leaf::from_time_profile(0.5, &[0.0, 0.1, 0.15, 0.05, -0.1, -0.05]).unwrap();
        let phi = [0.3, -0.2, 0.5, 0.1, -0.4, 0.2];
        let pi = [0.1, 0.7, -0.3, 0.2, 0.0, -0.5];
        let m = 1.3;
        let f = compute_t(&phi, &pi, &leaf, m).unwrap();
        let grad = leaf.tangential_derivative(&phi).unwrap();
        for i in 0..6 {
            let rho = 0.5 * (pi[i] * pi[i] + grad[i] * grad[i] + m * m * phi[i] * phi[i]);
            assert!((f.energy_density[i] - rho).abs() < 1e-12);
            assert!(f.energy_density[i] >= 0.0);
        }
    }

    #[test]
    fn second_eigenvector_is_orthogonal_and_spacelike() {
        let (n, e) = rest_frame();
        let t = tensor_from_derivatives(0.4, 0.9, 0.3, 1.0, n, e);
        let w = timelike_eigenvector(&t).unwrap();
        assert!((w.norm_sq() - 1.0).abs() < 1e-12 && w.t > 0.0);
        let s = MinkowskiVector::new(w.x, w.t);
        let m = t.mixed();
        let lambda_w = (m[0][0] * w.t + m[0][1] * w.x) / w.t;
        let ts = [m[0][0] * s.t + m[0][1] * s.x, m[1][0] * s.t + m[1][1] * s.x];
        let lambda_s = ts[0] / s.t;
        assert!((ts[1] - lambda_s * s.x).abs() < 1e-12);
        assert!(w.dot(s).abs() < 1e-12 && s.norm_sq() < 0.0);
        assert!((lambda_w - lambda_s).abs() > 1e-6);
    }
}
