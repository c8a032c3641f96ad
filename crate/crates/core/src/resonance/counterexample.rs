use num_complex::Complex64;

use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::dynamics::AdmissiblePair;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::system::{Edge, LevelSystem};

/// Two pairs on a four-level ladder with the same trajectory and the same
/// time-max cost. `a` is resonant; `b` adds a control on the unpopulated
/// edge `(3, 4)` that cycles through four phases and is neither resonant
/// nor weakly resonant.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub system: LevelSystem,
    pub a: AdmissiblePair,
    pub b: AdmissiblePair,
}

pub const COUNTEREXAMPLE_STEPS: usize = 400;

pub fn counterexample_pair(steps: usize) -> Result<Counterexample> {
    if steps == 0 || steps % 4 != 0 {
        return Err(Error::GridMismatch(format!("step count {steps} must be a positive multiple of 4")));
    }
    let edges = (0..3).map(|j| Edge::new(j, j + 1, 1.0).with_bound(1.0)).collect();
    let system = LevelSystem::new(vec![0.0; 4], edges);
    let grid = TimeGrid::new(std::f64::consts::FRAC_PI_2, steps)?;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let quarter = [one, -one, Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
    let a_ctrl = ControlGrid::from_fn(grid, Flavor::SkewH, &system, |_, e| if e == 0 { -one } else { zero });
    let b_ctrl = ControlGrid::from_fn(grid, Flavor::SkewH, &system, |i, e| match e {
        0 => -one,
        2 => quarter[4 * i / steps],
        _ => zero,
    });
    let mut psi0 = CVector::zeros(4);
    psi0[0] = one;
    let a = AdmissiblePair::from_control(&system, a_ctrl, &psi0)?;
    let b = AdmissiblePair::from_control(&system, b_ctrl, &psi0)?;
    Ok(Counterexample { system, a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{evaluate_cost, CostKind, CostSpec};
    use crate::resonance::classify::{classify_resonance, ResonanceStatus};

    #[test]
    fn same_trajectory_and_cost_different_classes() {
        let ce = counterexample_pair(COUNTEREXAMPLE_STEPS).unwrap();
        assert_eq!(ce.a.trajectory.max_state_deviation(&ce.b.trajectory), 0.0);
        let spec = CostSpec::from_system(CostKind::TimeMax, &ce.system);
        let ca = evaluate_cost(&spec, &ce.a.control).unwrap();
        let cb = evaluate_cost(&spec, &ce.b.control).unwrap();
        assert!((ca - cb).abs() < 1e-12);
        assert!((ca - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let last = ce.a.trajectory.last();
        assert!((last[1].norm() - 1.0).abs() < 1e-12);
        let va = classify_resonance(&ce.system, &ce.a, 1e-6, 1e-9).unwrap();
        let vb = classify_resonance(&ce.system, &ce.b, 1e-6, 1e-9).unwrap();
        assert_eq!(va.status, ResonanceStatus::Resonant);
        assert_eq!(vb.status, ResonanceStatus::Neither);
    }

    #[test]
    fn step_count_must_split_in_quarters() {
        assert!(counterexample_pair(10).is_err());
    }
}
