//! Construction of successive leaves.
//!
//! Each site is displaced by the same proper time `d_epsilon` along a unit
//! time-like vector `W`. With `cosh(theta) = W.n` relative to the old normal the
//! lapse is stored as `N = cosh(theta)`, so the label advances by exactly
//! `d_epsilon`. Shift vectors are zero: sites keep their index.

use crate::error::{check_len, Error, Result};
use crate::geometry::{Leaf, MinkowskiVector};
use crate::stress_energy::{compute_t, StressEnergyField};

/// Lapse `N(x, t)` tabulated at increasing label times, linearly interpolated
/// in `t` and held constant outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct LapseTable {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl LapseTable {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Config(format!(
                "lapse table needs one row per time ({} times, {} rows)",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("lapse table times must increase".into()));
        }
        let sites = values[0].len();
        for row in &values {
            check_len(sites, row.len())?;
            if row.iter().any(|n| !(*n >= 1.0 && n.is_finite())) {
                return Err(Error::Config("tabulated lapse values must be >= 1".into()));
            }
        }
        Ok(Self { times, values })
    }

    pub fn sites(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[last] {
            return self.values[last].clone();
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoliationKind {
    EqualTime,
    Boosted { velocity: f64 },
    LapseProfile(LapseTable),
    /// Follow the time-like eigenvector of the Bohm field's stress-energy tensor.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoliationStrategy {
    pub kind: FoliationKind,
    pub d_epsilon: f64,
}

impl FoliationStrategy {
    pub fn new(kind: FoliationKind, d_epsilon: f64) -> Result<Self> {
        if !(d_epsilon > 0.0 && d_epsilon.is_finite()) {
            return Err(Error::Config(format!("d_epsilon must be positive, got {d_epsilon}")));
        }
        if let FoliationKind::Boosted { velocity } = kind {
            if !(velocity.abs() < 1.0) {
                return Err(Error::Config(format!("boost velocity must satisfy |v| < 1, got {velocity}")));
            }
        }
        Ok(Self { kind, d_epsilon })
    }

    /// Whether every leaf has the same intrinsic geometry (so the mode basis never changes).
    pub fn is_stationary(&self) -> bool {
        matches!(self.kind, FoliationKind::EqualTime | FoliationKind::Boosted { .. })
    }
}

/// Displacement directions for the next leaf, with the stress-energy data they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub w: Vec<MinkowskiVector>,
    pub degenerate_sites: usize,
    pub stress: StressEnergyField,
}

/// Chooses `W` at every site of `leaf` for the given strategy.
///
/// `momentum` is the normal derivative of the Bohm field. Degenerate sites of
/// the dynamic rule use the leaf normal and are counted.
pub fn next_w(
    strategy: &FoliationStrategy,
    leaf: &Leaf,
    field: &[f64],
    momentum: &[f64],
    mass: f64,
) -> Result<FlowField> {
    let stress = compute_t(field, momentum, leaf, mass)?;
    let n = leaf.len();
    let (w, degenerate_sites) = match &strategy.kind {
        FoliationKind::EqualTime => (vec![MinkowskiVector::new(1.0, 0.0); n], 0),
        FoliationKind::Boosted { velocity } => (vec![MinkowskiVector::from_velocity(*velocity); n], 0),
        FoliationKind::LapseProfile(table) => {
            check_len(n, table.sites())?;
            let lapse = table.at(leaf.label());
            let w = (0..n)
                .map(|i| {
                    let (normal, tangent) = (leaf.normal(i), leaf.tangent(i));
                    let sinh = (lapse[i] * lapse[i] - 1.0).max(0.0).sqrt();
                    normal.scale(lapse[i]) + tangent.scale(sinh)
                })
                .collect();
            (w, 0)
        }
        FoliationKind::Dynamic => (stress.flow.clone(), stress.degenerate_count()),
    };
    Ok(FlowField {
        w,
        degenerate_sites,
        stress,
    })
}

/// `N_i = cosh(theta_i) = W_i . n_i` relative to the leaf's normals.
pub fn lapse_for(leaf: &Leaf, w: &[MinkowskiVector]) -> Result<Vec<f64>> {
    check_len(leaf.len(), w.len())?;
    Ok(w.iter()
        .enumerate()
        .map(|(i, w)| w.dot(leaf.normal(i)))
        .collect())
}

/// Displaces every site by `d_epsilon W_i` and builds the next leaf.
pub fn advance_leaf(leaf: &Leaf, w: &[MinkowskiVector], d_epsilon: f64) -> Result<Leaf> {
    check_len(leaf.len(), w.len())?;
    if !(d_epsilon > 0.0 && d_epsilon.is_finite()) {
        return Err(Error::Config(format!("d_epsilon must be positive, got {d_epsilon}")));
    }
    for (i, v) in w.iter().enumerate() {
        if !((v.norm_sq() - 1.0).abs() < 1e-9 && v.t > 0.0) {
            return Err(Error::Geometry {
                site: i,
                reason: format!("displacement ({}, {}) is not unit future time-like", v.t, v.x),
            });
        }
    }
    let lapse = lapse_for(leaf, w)?;
    let points = leaf
        .points()
        .iter()
        .zip(w)
        .map(|(p, v)| *p + v.scale(d_epsilon))
        .collect();
    let n = leaf.len();
    Leaf::new(
        leaf.label() + d_epsilon,
        points,
        leaf.period(),
        leaf.spacing(),
        Some(lapse),
    )
    .map_err(|e| match e {
        Error::Geometry { site, .. } => Error::FoliationCollapse {
            site,
            next: (site + 1) % n,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_displacement_keeps_leaf_flat() {
        let leaf = Leaf::flat(8, 0.5).unwrap();
        let w = vec![MinkowskiVector::new(1.0, 0.0); 8];
        let next = advance_leaf(&leaf, &w, 0.1).unwrap();
        assert!((next.label() - 0.1).abs() < 1e-15);
        for (p, q) in next.points().iter().zip(leaf.points()) {
            assert!((p.t - q.t - 0.1).abs() < 1e-15 && p.x == q.x);
        }
        assert!(next.lapse().iter().all(|n| *n == 1.0));
        assert_eq!(next.id(), leaf.id());
    }

    #[test]
    fn uniform_boost_lapse() {
        let leaf = Leaf::flat(8, 0.5).unwrap();
        let w = vec![MinkowskiVector::from_velocity(0.6); 8];
        let d = 0.05;
        let next = advance_leaf(&leaf, &w, d).unwrap();
        for (i, n) in next.lapse().iter().enumerate() {
            assert!((n - 1.25).abs() < 1e-15);
            let shift = next.points()[i] - leaf.points()[i];
            let tangential = -shift.dot(leaf.tangent(i));
            assert!((tangential - 0.75 * d).abs() < 1e-15);
            assert!((shift.norm_sq() - d * d).abs() < 1e-15);
        }
    }

    #[test]
    fn opposed_flows_collapse() {
        let leaf = Leaf::flat(8, 0.5).unwrap();
        let mut w = vec![MinkowskiVector::new(1.0, 0.0); 8];
        w[3] = MinkowskiVector::from_velocity(0.9);
        w[4] = MinkowskiVector::from_velocity(-0.9);
        let err = advance_leaf(&leaf, &w, 1.0).unwrap_err();
        assert_eq!(err, Error::FoliationCollapse { site: 3, next: 4 });
        // a small step is fine
        assert!(advance_leaf(&leaf, &w, 0.01).is_ok());
    }

    #[test]
    fn lapse_profile_reproduces_table() {
        let leaf = Leaf::flat(4, 0.5).unwrap();
        let table = LapseTable::new(vec![0.0, 1.0], vec![vec![1.0, 1.5, 2.0, 1.2], vec![1.0; 4]]).unwrap();
        let strategy = FoliationStrategy::new(FoliationKind::LapseProfile(table), 0.01).unwrap();
        let flow = next_w(&strategy, &leaf, &[0.0; 4], &[0.0; 4], 1.0).unwrap();
        let lapse = lapse_for(&leaf, &flow.w).unwrap();
        for (n, want) in lapse.iter().zip([1.0, 1.5, 2.0, 1.2]) {
            assert!((n - want).abs() < 1e-14);
        }
        let half = LapseTable::new(vec![0.0, 1.0], vec![vec![3.0; 2], vec![1.0; 2]]).unwrap();
        assert_eq!(half.at(0.5), vec![2.0, 2.0]);
        assert_eq!(half.at(7.0), vec![1.0, 1.0]);
    }

    #[test]
    fn lapse_table_rejects_sub_unit_values() {
        assert!(LapseTable::new(vec![0.0], vec![vec![0.9, 1.0]]).is_err());
        assert!(LapseTable::new(vec![1.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn dynamic_with_static_constant_field_uses_normal() {
        let leaf = Leaf::flat(6, 0.5).unwrap();
        let strategy = FoliationStrategy::new(FoliationKind::Dynamic, 0.01).unwrap();
        let flow = next_w(&strategy, &leaf, &[0.4; 6], &[0.0; 6], 1.0).unwrap();
        assert!(flow.w.iter().all(|w| *w == MinkowskiVector::new(1.0, 0.0)));
        assert_eq!(flow.degenerate_sites, 6);
    }

    #[test]
    fn non_unit_flow_rejected() {
        let leaf = Leaf::flat(4, 0.5).unwrap();
        let w = vec![MinkowskiVector::new(2.0, 0.0); 4];
        assert!(matches!(advance_leaf(&leaf, &w, 0.1), Err(Error::Geometry { .. })));
    }
}
