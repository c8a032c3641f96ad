//! Solver runs shared by the optimizer and resonance criteria.

use std::time::Instant;

use crate::boundary::BoundarySpec;
use crate::control::TimeGrid;
use crate::costs::{CostKind, CostSpec, FinalTime};
use crate::error::Result;
use crate::optimizer::{solve_reduced, SolveOptions, SolveOutcome};
use crate::system::LevelSystem;
use crate::verify::Fixtures;

pub(crate) struct Case {
    pub name: String,
    pub sys: LevelSystem,
    pub spec: CostSpec,
    pub source: BoundarySpec,
    pub target: BoundarySpec,
    /// Error text when the solver or the setup failed.
    pub outcome: std::result::Result<SolveOutcome, String>,
    pub seconds: f64,
}

impl Case {
    pub fn converged(&self) -> Option<&SolveOutcome> {
        self.outcome.as_ref().ok().filter(|o| o.converged)
    }

    /// One-line reason when the case did not produce a converged solution.
    pub fn failure(&self) -> Option<String> {
        match &self.outcome {
            Err(e) => Some(format!("{}: {e}", self.name)),
            Ok(o) if !o.converged => Some(format!("{}: {}", self.name, o.diagnostics.message)),
            Ok(_) => None,
        }
    }
}

struct Setup {
    name: &'static str,
    system: &'static str,
    kind: CostKind,
    final_time: FinalTime,
    source: BoundarySpec,
    target: BoundarySpec,
    grid: Option<TimeGrid>,
    transfer: Option<&'static str>,
}

fn setups() -> Vec<Setup> {
    let eig = |index| BoundarySpec::Eigenstate { index };
    let grid = |t| TimeGrid::new(t, 64).ok();
    vec![
        Setup {
            name: "two-level energy",
            system: "two_level.json",
            kind: CostKind::Energy,
            final_time: FinalTime::Fixed,
            source: eig(0),
            target: eig(1),
            grid: None,
            transfer: Some("transfer_energy.json"),
        },
        Setup {
            name: "two-level minimum time",
            system: "two_level_bounded.json",
            kind: CostKind::TimeMax,
            final_time: FinalTime::Free,
            source: eig(0),
            target: eig(1),
            grid: None,
            transfer: Some("transfer_time.json"),
        },
        Setup {
            name: "three-level energy",
            system: "three_level.json",
            kind: CostKind::Energy,
            final_time: FinalTime::Fixed,
            source: eig(0),
            target: eig(2),
            grid: grid(2.0),
            transfer: None,
        },
        Setup {
            name: "three-level length",
            system: "three_level.json",
            kind: CostKind::Length,
            final_time: FinalTime::Fixed,
            source: eig(0),
            target: eig(2),
            grid: grid(2.0),
            transfer: None,
        },
        Setup {
            name: "four-level energy",
            system: "four_level.json",
            kind: CostKind::Energy,
            final_time: FinalTime::Fixed,
            source: eig(0),
            target: eig(3),
            grid: grid(3.0),
            transfer: None,
        },
        Setup {
            name: "four-level energy to a superposition",
            system: "four_level.json",
            kind: CostKind::Energy,
            final_time: FinalTime::Fixed,
            source: eig(0),
            target: BoundarySpec::ModuliPoint { moduli: vec![0.25, 0.75, 0.0, 0.0] },
            grid: grid(1.0),
            transfer: None,
        },
    ]
}

fn run_setup(s: &Setup, fixtures: &Fixtures, seed: u64) -> Result<(LevelSystem, CostSpec, BoundarySpec, BoundarySpec, SolveOutcome)> {
    let sys = fixtures.system(s.system)?;
    let (source, target, grid) = match s.transfer {
        Some(name) => fixtures.transfer(name, sys.n)?,
        None => (s.source.clone(), s.target.clone(), s.grid.expect("grid or transfer file")),
    };
    let spec = CostSpec { final_time: s.final_time, ..CostSpec::from_system(s.kind, &sys) };
    let opts = SolveOptions { seed, ..SolveOptions::new(grid) };
    let out = solve_reduced(&sys, &spec, &source, &target, &opts)?;
    Ok((sys, spec, source, target, out))
}

pub(crate) fn solve_all(fixtures: &Fixtures, seed: u64) -> Vec<Case> {
    setups()
        .into_iter()
        .map(|s| {
            let start = Instant::now();
            let result = run_setup(&s, fixtures, seed);
            let seconds = start.elapsed().as_secs_f64();
            match result {
                Ok((sys, spec, source, target, out)) => {
                    Case { name: s.name.into(), sys, spec, source, target, outcome: Ok(out), seconds }
                }
                Err(e) => Case {
                    name: s.name.into(),
                    sys: LevelSystem::new(Vec::new(), Vec::new()),
                    spec: CostSpec::from_system(s.kind, &LevelSystem::new(Vec::new(), Vec::new())),
                    source: s.source,
                    target: s.target,
                    outcome: Err(e.to_string()),
                    seconds,
                },
            }
        })
        .collect()
}
