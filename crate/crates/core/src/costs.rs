//! Cost functionals on control moduli and their time-optimal constraint sets.
//!
//! All costs depend only on the weighted moduli `|c_e| / mu_e` of the edge
//! controls, so they apply to any flavor. Integrals are left-endpoint sums,
//! which are exact for piecewise-constant controls.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::control::ControlGrid;
use crate::error::{Error, Result};
use crate::system::LevelSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// `sum_e |c_e|^2 / mu_e^2`
    Energy,
    /// `sqrt(sum_e |c_e|^2 / mu_e^2)`
    Length,
    /// `sum_e |c_e| / mu_e`
    Area,
    /// `max_e |c_e| / mu_e`
    TimeMax,
}

impl CostKind {
    pub const ALL: [CostKind; 4] = [CostKind::Energy, CostKind::Length, CostKind::Area, CostKind::TimeMax];

    pub fn name(self) -> &'static str {
        match self {
            CostKind::Energy => "energy",
            CostKind::Length => "length",
            CostKind::Area => "area",
            CostKind::TimeMax => "time-max",
        }
    }

    /// Integrand from the weighted moduli `w_e = |c_e| / mu_e`.
    pub fn integrand(self, weighted: impl Iterator<Item = f64>) -> f64 {
        match self {
            CostKind::Energy => weighted.map(|w| w * w).sum(),
            CostKind::Length => weighted.map(|w| w * w).sum::<f64>().sqrt(),
            CostKind::Area => weighted.sum(),
            CostKind::TimeMax => weighted.fold(0.0, f64::max),
        }
    }

    /// Integrand is positively homogeneous of degree one, hence invariant
    /// under reparametrization.
    pub fn is_homogeneous(self) -> bool {
        !matches!(self, CostKind::Energy)
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalTime {
    Fixed,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub kind: CostKind,
    /// Weights `mu_{j,k}` keyed by the unordered pair `(min, max)`, zero-based.
    pub weights: BTreeMap<(usize, usize), f64>,
    pub final_time: FinalTime,
}

impl CostSpec {
    pub fn new(kind: CostKind, weights: BTreeMap<(usize, usize), f64>, final_time: FinalTime) -> Result<Self> {
        let spec = CostSpec { kind, weights, final_time };
        spec.validate()?;
        Ok(spec)
    }

    /// Weights taken from the system's coupling strengths, fixed final time.
    pub fn from_system(kind: CostKind, sys: &LevelSystem) -> Self {
        CostSpec {
            kind,
            weights: sys.edges.iter().map(|e| (e.key(), e.mu)).collect(),
            final_time: FinalTime::Fixed,
        }
    }

    pub fn with_kind(&self, kind: CostKind) -> Self {
        CostSpec { kind, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == CostKind::Energy && self.final_time == FinalTime::Free {
            return Err(Error::InvalidCost("the energy cost requires a fixed final time".into()));
        }
        if let Some((&(j, k), _)) = self.weights.iter().find(|(_, &w)| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidCost(format!("weight on ({},{}) must be positive", j + 1, k + 1)));
        }
        Ok(())
    }

    pub fn weight(&self, j: usize, k: usize) -> Result<f64> {
        let key = (j.min(k), j.max(k));
        self.weights.get(&key).copied().ok_or(Error::MissingWeight(key.0, key.1))
    }

    /// Weights aligned with the control's edge list.
    pub fn edge_weights(&self, ctrl: &ControlGrid) -> Result<Vec<f64>> {
        ctrl.edges.iter().map(|&(j, k)| self.weight(j, k)).collect()
    }
}

/// Integrand value at one step.
pub fn step_integrand(kind: CostKind, ctrl: &ControlGrid, weights: &[f64], step: usize) -> f64 {
    kind.integrand(ctrl.values[step].iter().zip(weights).map(|(z, mu)| z.norm() / mu))
}

pub fn evaluate_cost(spec: &CostSpec, ctrl: &ControlGrid) -> Result<f64> {
    let weights = spec.edge_weights(ctrl)?;
    let dt = ctrl.grid.dt();
    Ok((0..ctrl.grid.steps())
        .map(|i| dt * step_integrand(spec.kind, ctrl, &weights, i))
        .sum())
}

/// Membership of one step's control in the equivalent time-minimization
/// constraint set: ellipsoid for energy and length, weighted cross-polytope
/// for area, box for time-max.
pub fn in_constraint_set(spec: &CostSpec, ctrl: &ControlGrid, step: usize) -> Result<bool> {
    let weights = spec.edge_weights(ctrl)?;
    Ok(step_integrand(spec.kind, ctrl, &weights, step) <= 1.0)
}

/// Relative deviation of the energy integrand from its mean.
pub fn constant_speed_residual(spec: &CostSpec, ctrl: &ControlGrid) -> Result<f64> {
    if spec.kind != CostKind::Energy {
        return Err(Error::WrongKind { expected: "energy", got: spec.kind.name() });
    }
    let weights = spec.edge_weights(ctrl)?;
    let speeds: Vec<f64> = (0..ctrl.grid.steps())
        .map(|i| step_integrand(CostKind::Energy, ctrl, &weights, i))
        .collect();
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let worst = speeds.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    Ok(worst / mean.max(1e-15))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Flavor, TimeGrid};
    use crate::system::Edge;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_2;

    fn two_level() -> LevelSystem {
        LevelSystem::new(vec![0.0, 0.0], vec![Edge::new(0, 1, 1.0)])
    }

    #[test]
    fn zero_control_costs_nothing() {
        let sys = two_level();
        let c = ControlGrid::zeros(TimeGrid::new(1.0, 10).unwrap(), Flavor::SkewH, &sys);
        for kind in CostKind::ALL {
            assert_eq!(evaluate_cost(&CostSpec::from_system(kind, &sys), &c).unwrap(), 0.0);
            assert!(in_constraint_set(&CostSpec::from_system(kind, &sys), &c, 0).unwrap());
        }
    }

    #[test]
    fn unit_modulus_on_quarter_period() {
        let sys = two_level();
        let g = TimeGrid::new(FRAC_PI_2, 50).unwrap();
        let c = ControlGrid::from_fn(g, Flavor::SkewH, &sys, |i, _| Complex64::from_polar(1.0, i as f64));
        for kind in CostKind::ALL {
            let spec = CostSpec::from_system(kind, &sys);
            assert!((evaluate_cost(&spec, &c).unwrap() - FRAC_PI_2).abs() < 1e-12);
            assert!(in_constraint_set(&spec, &c, 3).unwrap());
        }
    }

    #[test]
    fn isotropic_ladder_constraint_sets() {
        let sys = LevelSystem::ladder(vec![0.0; 3]);
        let c = ControlGrid::real_from_fn(TimeGrid::new(1.0, 1).unwrap(), &sys, |_, _| 1.0);
        let member = |kind| in_constraint_set(&CostSpec::from_system(kind, &sys), &c, 0).unwrap();
        assert!(member(CostKind::TimeMax));
        assert!(!member(CostKind::Energy));
        assert!(!member(CostKind::Area));
    }

    #[test]
    fn missing_weight_is_an_error() {
        let sys = two_level();
        let c = ControlGrid::zeros(TimeGrid::new(1.0, 1).unwrap(), Flavor::SkewH, &sys);
        let spec = CostSpec { kind: CostKind::Area, weights: BTreeMap::new(), final_time: FinalTime::Fixed };
        assert!(matches!(evaluate_cost(&spec, &c), Err(Error::MissingWeight(0, 1))));
    }

    #[test]
    fn energy_needs_fixed_time() {
        assert!(CostSpec::new(CostKind::Energy, BTreeMap::new(), FinalTime::Free).is_err());
        assert!(CostSpec::new(CostKind::Length, BTreeMap::new(), FinalTime::Free).is_ok());
    }

    #[test]
    fn constant_speed() {
        let sys = two_level();
        let spec = CostSpec::from_system(CostKind::Energy, &sys);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let flat = ControlGrid::real_from_fn(g, &sys, |_, _| 0.7);
        assert!(constant_speed_residual(&spec, &flat).unwrap() < 1e-15);
        let doubled = ControlGrid::real_from_fn(g, &sys, |i, _| if i < 5 { 1.0 } else { 2.0 });
        assert!((constant_speed_residual(&spec, &doubled).unwrap() - 0.6).abs() < 1e-12);
        assert!(matches!(
            constant_speed_residual(&spec.with_kind(CostKind::Area), &flat),
            Err(Error::WrongKind { .. })
        ));
    }
}
