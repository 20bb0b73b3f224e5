//! Space-like leaves in 1+1 Minkowski space and the spatial operator `K` on them.
//!
//! A leaf is a periodic chain of lattice sites embedded at events `(T_i, X_i)`.
//! Site `i + n` is identified with site `i` displaced by the leaf's period
//! vector, so a flat equal-time leaf has period `(0, n dx)` and a boosted
//! hyperplane has the boosted image of that vector.
//!
//! Every edge `i -> i+1` has proper length `l_i = sqrt(dX^2 - dT^2)`. With comoving
//! coordinate spacing `dx` the induced metric on the edge is `(l_i / dx)^2`; the
//! site measure is the mean of the two adjacent edge lengths, so that
//! `sum(mu) = sum(l)` is the proper length of the leaf.
//!
//! `K` is assembled in divergence form: the gradient energy is the edge sum
//! `sum_e (phi_{i+1} - phi_i)^2 / l_e`, which makes `K` exactly self-adjoint under the
//! measure-weighted inner product and makes the discrete summation-by-parts
//! identity hold to rounding.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A vector (or event) in 1+1 Minkowski space, signature (+, -).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MinkowskiVector {
    pub t: f64,
    pub x: f64,
}

impl MinkowskiVector {
    pub const fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }

    /// Unit time-like vector of an observer moving with velocity `v`.
    pub fn from_velocity(v: f64) -> Self {
        let gamma = 1.0 / (1.0 - v * v).sqrt();
        Self::new(gamma, gamma * v)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.t * other.t - self.x * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.t * s, self.x * s)
    }

    /// Lorentz boost by velocity `v` (active transformation).
    pub fn boost(self, v: f64) -> Self {
        let gamma = 1.0 / (1.0 - v * v).sqrt();
        Self::new(gamma * (self.t + v * self.x), gamma * (self.x + v * self.t))
    }

    /// Three-velocity `x / t` of the vector.
    pub fn velocity(self) -> f64 {
        self.x / self.t
    }
}

impl std::ops::Add for MinkowskiVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.t + rhs.t, self.x + rhs.x)
    }
}

impl std::ops::Sub for MinkowskiVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.t - rhs.t, self.x - rhs.x)
    }
}

/// Fingerprint of a leaf's intrinsic geometry.
///
/// Two leaves with bit-identical spacing, edge lengths and measure share an id,
/// and therefore share `K`, its square root and the mode basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeafId(pub u64);

/// A discretized space-like hypersurface.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    label: f64,
    points: Vec<MinkowskiVector>,
    period: MinkowskiVector,
    spacing: f64,
    lapse: Vec<f64>,
    edge_lengths: Vec<f64>,
    induced_metric: Vec<f64>,
    measure: Vec<f64>,
    id: LeafId,
}

impl Leaf {
    /// Builds a leaf from its embedding and validates it.
    ///
    /// `lapse` defaults to 1 at every site.
    pub fn new(
        label: f64,
        points: Vec<MinkowskiVector>,
        period: MinkowskiVector,
        spacing: f64,
        lapse: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::Geometry {
                site: 0,
                reason: format!("a periodic leaf needs at least 3 sites, got {n}"),
            });
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Geometry {
                site: 0,
                reason: format!("coordinate spacing must be positive, got {spacing}"),
            });
        }
        let lapse = lapse.unwrap_or_else(|| vec![1.0; n]);
        check_len(n, lapse.len())?;
        if let Some(i) = lapse.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Geometry {
                site: i,
                reason: format!("lapse must be positive, got {}", lapse[i]),
            });
        }

        let mut edge_lengths = Vec::with_capacity(n);
        for i in 0..n {
            let d = edge_vector(&points, period, i);
            let interval = d.x * d.x - d.t * d.t;
            if !(d.x > 0.0 && interval > 0.0) || !interval.is_finite() {
                return Err(Error::Geometry {
                    site: i,
                    reason: format!(
                        "edge to site {} is not space-like (dT = {}, dX = {})",
                        (i + 1) % n,
                        d.t,
                        d.x
                    ),
                });
            }
            edge_lengths.push(interval.sqrt());
        }

        let measure: Vec<f64> = (0..n)
            .map(|i| 0.5 * (edge_lengths[(i + n - 1) % n] + edge_lengths[i]))
            .collect();
        let induced_metric = measure.iter().map(|mu| (mu / spacing).powi(2)).collect();

        let mut hasher = DefaultHasher::new();
        spacing.to_bits().hash(&mut hasher);
        for (l, mu) in edge_lengths.iter().zip(&measure) {
            l.to_bits().hash(&mut hasher);
            mu.to_bits().hash(&mut hasher);
        }
        let id = LeafId(hasher.finish());

        Ok(Self {
            label,
            points,
            period,
            spacing,
            lapse,
            edge_lengths,
            induced_metric,
            measure,
            id,
        })
    }

    /// Equal-time leaf `T = 0` with sites at `X = i dx`.
    pub fn flat(sites: usize, spacing: f64) -> Result<Self> {
        let points = (0..sites)
            .map(|i| MinkowskiVector::new(0.0, i as f64 * spacing))
            .collect();
        Self::new(
            0.0,
            points,
            MinkowskiVector::new(0.0, sites as f64 * spacing),
            spacing,
            None,
        )
    }

    /// Equal-time hyperplane of a frame moving with velocity `v`.
    pub fn boosted(sites: usize, spacing: f64, v: f64) -> Result<Self> {
        if !(v.abs() < 1.0) {
            return Err(Error::Geometry {
                site: 0,
                reason: format!("boost velocity must satisfy |v| < 1, got {v}"),
            });
        }
        let points = (0..sites)
            .map(|i| MinkowskiVector::new(0.0, i as f64 * spacing).boost(v))
            .collect();
        let period = MinkowskiVector::new(0.0, sites as f64 * spacing).boost(v);
        Self::new(0.0, points, period, spacing, None)
    }

    /// Leaf `T = times[i]` over `X = i dx`, periodic in `X`.
    pub fn from_time_profile(spacing: f64, times: &[f64]) -> Result<Self> {
        let n = times.len();
        let points = times
            .iter()
            .enumerate()
            .map(|(i, &t)| MinkowskiVector::new(t, i as f64 * spacing))
            .collect();
        Self::new(
            0.0,
            points,
            MinkowskiVector::new(0.0, n as f64 * spacing),
            spacing,
            None,
        )
    }

    pub fn with_label(mut self, label: f64) -> Self {
        self.label = label;
        self
    }

    pub fn with_lapse(mut self, lapse: Vec<f64>) -> Result<Self> {
        check_len(self.len(), lapse.len())?;
        if let Some(i) = lapse.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Geometry {
                site: i,
                reason: format!("lapse must be positive, got {}", lapse[i]),
            });
        }
        self.lapse = lapse;
        Ok(self)
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[MinkowskiVector] {
        &self.points
    }

    pub fn period(&self) -> MinkowskiVector {
        self.period
    }

    /// Comoving coordinate spacing `dx`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn lapse(&self) -> &[f64] {
        &self.lapse
    }

    pub fn induced_metric(&self) -> &[f64] {
        &self.induced_metric
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Proper length of the edge from site `i` to site `i + 1`.
    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn id(&self) -> LeafId {
        self.id
    }

    /// Displacement from site `i` to site `i + 1`, wrapping through the period.
    pub fn edge(&self, i: usize) -> MinkowskiVector {
        edge_vector(&self.points, self.period, i)
    }

    /// Unit space-like tangent at site `i` (central difference).
    pub fn tangent(&self, i: usize) -> MinkowskiVector {
        let n = self.len();
        let d = self.edge((i + n - 1) % n) + self.edge(i);
        d.scale(1.0 / (-d.norm_sq()).sqrt())
    }

    /// Future-pointing unit normal at site `i`.
    pub fn normal(&self, i: usize) -> MinkowskiVector {
        let e = self.tangent(i);
        MinkowskiVector::new(e.x, e.t)
    }

    /// Whether `other` has the same spacing, edge lengths and measure to relative `tol`.
    pub fn same_geometry(&self, other: &Leaf, tol: f64) -> bool {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
        };
        self.spacing == other.spacing
            && close(&self.edge_lengths, &other.edge_lengths)
            && close(&self.measure, &other.measure)
    }

    pub fn total_length(&self) -> f64 {
        self.edge_lengths.iter().sum()
    }

    /// Measure-weighted mean lapse.
    pub fn mean_lapse(&self) -> f64 {
        let w: f64 = self.measure.iter().sum();
        self.measure
            .iter()
            .zip(&self.lapse)
            .map(|(mu, n)| mu * n)
            .sum::<f64>()
            / w
    }

    /// Discrete `(1/sqrt g) d_k (sqrt g d^k phi)` in divergence form.
    pub fn divergence_laplacian(&self, phi: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), phi.len())?;
        let n = self.len();
        let flux: Vec<f64> = (0..n)
            .map(|i| (phi[(i + 1) % n] - phi[i]) / self.edge_lengths[i])
            .collect();
        Ok((0..n)
            .map(|i| (flux[i] - flux[(i + n - 1) % n]) / self.measure[i])
            .collect())
    }

    /// Discrete `integral sqrt(g) d_k phi d^k phi` as an edge sum.
    pub fn gradient_energy(&self, phi: &[f64]) -> Result<f64> {
        check_len(self.len(), phi.len())?;
        let n = self.len();
        Ok((0..n)
            .map(|i| {
                let d = phi[(i + 1) % n] - phi[i];
                d * d / self.edge_lengths[i]
            })
            .sum())
    }

    /// Tangential derivative per unit proper length at each site.
    pub fn tangential_derivative(&self, phi: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), phi.len())?;
        let n = self.len();
        Ok((0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                (phi[(i + 1) % n] - phi[prev])
                    / (self.edge_lengths[prev] + self.edge_lengths[i])
            })
            .collect())
    }
}

fn edge_vector(points: &[MinkowskiVector], period: MinkowskiVector, i: usize) -> MinkowskiVector {
    let n = points.len();
    if i + 1 < n {
        points[i + 1] - points[i]
    } else {
        points[0] + period - points[i]
    }
}

/// Leaf-measure inner product `sum_i mu_i f_i g_i`.
pub fn inner(f: &[f64], g: &[f64], leaf: &Leaf) -> Result<f64> {
    check_len(leaf.len(), f.len())?;
    check_len(leaf.len(), g.len())?;
    Ok(leaf
        .measure()
        .iter()
        .zip(f.iter().zip(g))
        .map(|(mu, (a, b))| mu * a * b)
        .sum())
}

/// `|grad form + <phi, div grad phi>_mu|`, zero up to rounding on periodic leaves.
pub fn summation_by_parts_residual(phi: &[f64], leaf: &Leaf) -> Result<f64> {
    let gradient = leaf.gradient_energy(phi)?;
    let lap = leaf.divergence_laplacian(phi)?;
    Ok((gradient + inner(phi, &lap, leaf)?).abs())
}

/// Linear operator on site values, self-adjoint (when valid) under a diagonal measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteOperator {
    matrix: DMatrix<f64>,
    measure: Vec<f64>,
    leaf_id: LeafId,
}

impl SiteOperator {
    pub fn new(matrix: DMatrix<f64>, measure: Vec<f64>, leaf_id: LeafId) -> Result<Self> {
        check_len(matrix.nrows(), matrix.ncols())?;
        check_len(matrix.nrows(), measure.len())?;
        Ok(Self {
            matrix,
            measure,
            leaf_id,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Mutable access to the matrix; callers are responsible for keeping it self-adjoint.
    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.matrix
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn leaf_id(&self) -> LeafId {
        self.leaf_id
    }

    pub fn dim(&self) -> usize {
        self.measure.len()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), f.len())?;
        let v = &self.matrix * DVector::from_column_slice(f);
        Ok(v.iter().copied().collect())
    }

    /// `M^{1/2} A M^{-1/2}`, symmetric iff `A` is self-adjoint under `M`.
    pub fn symmetric_form(&self) -> DMatrix<f64> {
        let n = self.dim();
        let sq: Vec<f64> = self.measure.iter().map(|m| m.sqrt()).collect();
        DMatrix::from_fn(n, n, |i, j| sq[i] * self.matrix[(i, j)] / sq[j])
    }

    /// Relative Frobenius asymmetry of the symmetric form.
    pub fn self_adjointness_residual(&self) -> f64 {
        let s = self.symmetric_form();
        let scale = s.norm().max(1.0);
        (&s - s.transpose()).norm() / scale
    }
}

/// Assembles `K phi = -(1/sqrt g) d(sqrt g d phi) + m^2 phi` on the leaf.
pub fn build_k_operator(leaf: &Leaf, mass: f64) -> Result<SiteOperator> {
    if !(mass > 0.0) {
        return Err(Error::SingularOperator { mass });
    }
    let n = leaf.len();
    let mu = leaf.measure();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (e, &len) in leaf.edge_lengths().iter().enumerate() {
        let (i, j) = (e, (e + 1) % n);
        let w = 1.0 / len;
        k[(i, i)] += w / mu[i];
        k[(j, j)] += w / mu[j];
        k[(i, j)] -= w / mu[i];
        k[(j, i)] -= w / mu[j];
    }
    let m2 = mass * mass;
    for i in 0..n {
        k[(i, i)] += m2;
    }
    SiteOperator::new(k, mu.to_vec(), leaf.id())
}

const SELF_ADJOINT_TOL: f64 = 1e-10;
const NEGATIVE_EIGENVALUE_TOL: f64 = 1e-12;

/// Spectral square root of a self-adjoint nonnegative operator, with its eigenbasis.
pub fn spectral_sqrt(op: &SiteOperator) -> Result<(SiteOperator, ModeBasis)> {
    let residual = op.self_adjointness_residual();
    if residual > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint { residual });
    }
    let n = op.dim();
    let s = op.symmetric_form();
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut frequencies = Vec::with_capacity(n);
    let mut u = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda < -NEGATIVE_EIGENVALUE_TOL {
            return Err(Error::Spectrum { eigenvalue: lambda });
        }
        frequencies.push(lambda.max(0.0).sqrt());
        let mut v = eig.eigenvectors.column(k).clone_owned();
        // sign convention: first non-negligible component positive
        if let Some(first) = v.iter().find(|c| c.abs() > 1e-8) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        u.set_column(col, &v);
    }

    let sq: Vec<f64> = op.measure.iter().map(|m| m.sqrt()).collect();
    let root_sym = &u * DMatrix::from_diagonal(&DVector::from_vec(frequencies.clone())) * u.transpose();
    let root = DMatrix::from_fn(n, n, |i, j| root_sym[(i, j)] / sq[i] * sq[j]);
    let modes = DMatrix::from_fn(n, n, |i, c| u[(i, c)] / sq[i]);

    let basis = ModeBasis {
        frequencies,
        modes,
        measure: op.measure.clone(),
        leaf_id: op.leaf_id,
    };
    Ok((SiteOperator::new(root, op.measure.clone(), op.leaf_id)?, basis))
}

/// Eigenpairs `(omega_n, phi_n)` of `K^{1/2}`, orthonormal under the leaf measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    frequencies: Vec<f64>,
    modes: DMatrix<f64>,
    measure: Vec<f64>,
    leaf_id: LeafId,
}

impl ModeBasis {
    /// Builds `K`, its square root and the basis in one go.
    pub fn for_leaf(leaf: &Leaf, mass: f64) -> Result<Self> {
        Ok(spectral_sqrt(&build_k_operator(leaf, mass)?)?.1)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Site values of mode `n` as a column view.
    pub fn mode(&self, n: usize) -> Vec<f64> {
        self.modes.column(n).iter().copied().collect()
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn leaf_id(&self) -> LeafId {
        self.leaf_id
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    /// The same basis attached to another leaf of identical geometry.
    pub fn rebind(&self, leaf_id: LeafId) -> Self {
        Self {
            leaf_id,
            ..self.clone()
        }
    }

    pub fn check_leaf(&self, id: LeafId) -> Result<()> {
        if id == self.leaf_id {
            Ok(())
        } else {
            Err(Error::BasisMismatch {
                expected: self.leaf_id.0,
                found: id.0,
            })
        }
    }

    /// Mode coordinates `q_n = <phi_n, f>_mu`.
    pub fn analyze(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), f.len())?;
        let weighted: Vec<f64> = f.iter().zip(&self.measure).map(|(a, m)| a * m).collect();
        Ok((0..self.dim())
            .map(|n| {
                self.modes
                    .column(n)
                    .iter()
                    .zip(&weighted)
                    .map(|(p, w)| p * w)
                    .sum()
            })
            .collect())
    }

    pub fn analyze_complex(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let (re, im) = (self.analyze(&re)?, self.analyze(&im)?);
        Ok(re
            .into_iter()
            .zip(im)
            .map(|(a, b)| Complex64::new(a, b))
            .collect())
    }

    /// Site values `sum_n q_n phi_n`.
    pub fn synthesize(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), q.len())?;
        let v = &self.modes * DVector::from_column_slice(q);
        Ok(v.iter().copied().collect())
    }

    pub fn synthesize_complex(&self, q: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.dim(), q.len())?;
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (m, c) in q.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.modes.column(m).iter()) {
                *o += c * p;
            }
        }
        Ok(out)
    }

    /// Largest deviation of the measure-weighted Gram matrix from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let g: f64 = (0..n)
                    .map(|i| self.measure[i] * self.modes[(i, a)] * self.modes[(i, b)])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// A real field on a leaf together with its mode coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    site_values: Vec<f64>,
    mode_coords: Vec<f64>,
    basis_id: LeafId,
}

impl FieldConfig {
    pub fn from_sites(basis: &ModeBasis, site_values: Vec<f64>) -> Result<Self> {
        let mode_coords = basis.analyze(&site_values)?;
        Ok(Self {
            site_values,
            mode_coords,
            basis_id: basis.leaf_id(),
        })
    }

    pub fn from_modes(basis: &ModeBasis, mode_coords: Vec<f64>) -> Result<Self> {
        let site_values = basis.synthesize(&mode_coords)?;
        Ok(Self {
            site_values,
            mode_coords,
            basis_id: basis.leaf_id(),
        })
    }

    pub fn zero(basis: &ModeBasis) -> Self {
        Self {
            site_values: vec![0.0; basis.dim()],
            mode_coords: vec![0.0; basis.dim()],
            basis_id: basis.leaf_id(),
        }
    }

    pub fn site_values(&self) -> &[f64] {
        &self.site_values
    }

    pub fn mode_coords(&self) -> &[f64] {
        &self.mode_coords
    }

    pub fn basis_id(&self) -> LeafId {
        self.basis_id
    }

    /// Both views at once, e.g. restored from a record; they must agree to 1e-10.
    pub fn from_parts(basis: &ModeBasis, site_values: Vec<f64>, mode_coords: Vec<f64>) -> Result<Self> {
        check_len(basis.dim(), site_values.len())?;
        check_len(basis.dim(), mode_coords.len())?;
        let field = Self {
            site_values,
            mode_coords,
            basis_id: basis.leaf_id(),
        };
        let residual = field.round_trip_residual(basis)?;
        if !(residual <= 1e-10) {
            return Err(Error::InvalidState(format!(
                "site values and mode coordinates disagree by {residual:e}"
            )));
        }
        Ok(field)
    }

    /// Re-expresses the site values in another basis (e.g. after the leaf moved).
    pub fn rebase(&self, basis: &ModeBasis) -> Result<Self> {
        Self::from_sites(basis, self.site_values.clone())
    }

    /// Max-norm error of synthesizing the stored mode coordinates back to sites.
    pub fn round_trip_residual(&self, basis: &ModeBasis) -> Result<f64> {
        let back = basis.synthesize(&self.mode_coords)?;
        Ok(back
            .iter()
            .zip(&self.site_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
