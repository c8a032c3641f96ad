//! File formats. Level indices are one-based on disk and zero-based in memory.
//!
//! JSON files carry systems, controls, cost specs, boundaries and states;
//! trajectories, populations and lifts are written as CSV. Numbers are
//! printed with the shortest representation that reads back to the same
//! double.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundarySpec;
use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::costs::{CostKind, CostSpec, FinalTime};
use crate::dynamics::StateTrajectory;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::optimizer::PmpLift;
use crate::system::{Edge, LevelSystem};

fn parse_err(context: &str, detail: impl Into<String>) -> Error {
    Error::Parse { context: context.to_string(), detail: detail.into() }
}

/// Reads and deserializes a JSON file; errors name the path, line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(&path.display().to_string(), e.to_string()))?;
    from_json_str(&text, &path.display().to_string())
}

pub fn from_json_str<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| parse_err(context, e.to_string()))
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFile {
    pub j: usize,
    pub k: usize,
    pub mu: f64,
    #[serde(default = "infinite_bound")]
    pub bound: BoundText,
}

/// A coupling bound: a number or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundText {
    Number(f64),
    Word(String),
}

fn infinite_bound() -> BoundText {
    BoundText::Word("inf".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    pub energies: Vec<f64>,
    pub edges: Vec<EdgeFile>,
}

fn one_based(context: &str, what: &str, index: usize) -> Result<usize> {
    index.checked_sub(1).ok_or_else(|| parse_err(context, format!("{what} index 0; levels are numbered from 1")))
}

impl SystemFile {
    pub fn from_system(sys: &LevelSystem) -> Self {
        SystemFile {
            n: sys.n,
            energies: sys.energies.clone(),
            edges: sys
                .edges
                .iter()
                .map(|e| EdgeFile {
                    j: e.j + 1,
                    k: e.k + 1,
                    mu: e.mu,
                    bound: if e.bound.is_finite() { BoundText::Number(e.bound) } else { infinite_bound() },
                })
                .collect(),
        }
    }

    /// Converts and validates the system.
    pub fn into_system(self, context: &str) -> Result<LevelSystem> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in self.edges {
            let bound = match e.bound {
                BoundText::Number(b) => b,
                BoundText::Word(w) if matches!(w.as_str(), "inf" | "Infinity" | "infinity") => f64::INFINITY,
                BoundText::Word(w) => return Err(parse_err(context, format!("bound must be a number or \"inf\", got {w:?}"))),
            };
            let j = one_based(context, "edge", e.j)?;
            let k = one_based(context, "edge", e.k)?;
            edges.push(Edge { j, k, mu: e.mu, bound });
        }
        let sys = LevelSystem { n: self.n, energies: self.energies, edges };
        sys.validate().into_result()?;
        Ok(sys)
    }
}

pub fn read_system(path: &Path) -> Result<LevelSystem> {
    read_json::<SystemFile>(path)?.into_system(&path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFile {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub flavor: Flavor,
    /// `"j,k"` to one `[re, im]` per step.
    pub values: BTreeMap<String, Vec<[f64; 2]>>,
}

fn parse_key(context: &str, key: &str) -> Result<(usize, usize)> {
    let bad = || parse_err(context, format!("control key {key:?} is not \"j,k\""));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let j: usize = a.trim().parse().map_err(|_| bad())?;
    let k: usize = b.trim().parse().map_err(|_| bad())?;
    Ok((one_based(context, "control", j)?, one_based(context, "control", k)?))
}

impl ControlFile {
    pub fn from_control(ctrl: &ControlGrid) -> Self {
        let values = ctrl
            .edges
            .iter()
            .enumerate()
            .map(|(e, &(j, k))| (format!("{},{}", j + 1, k + 1), ctrl.values.iter().map(|row| [row[e].re, row[e].im]).collect()))
            .collect();
        ControlFile { t_final: ctrl.grid.t_final(), steps: ctrl.grid.steps(), flavor: ctrl.flavor, values }
    }

    /// Builds the grid for `sys`. Edges absent from the file are zero; a
    /// lower entry `"k,j"` must mirror its upper entry under the flavor.
    pub fn into_control(self, sys: &LevelSystem, context: &str) -> Result<ControlGrid> {
        let grid = TimeGrid::new(self.t_final, self.steps)?;
        let mut ctrl = ControlGrid::zeros(grid, self.flavor, sys);
        let mut lower = Vec::new();
        for (key, series) in &self.values {
            let (j, k) = parse_key(context, key)?;
            if series.len() != self.steps {
                return Err(Error::GridMismatch(format!("{key}: {} values for {} steps", series.len(), self.steps)));
            }
            let Some(e) = sys.edge_index(j, k) else {
                return Err(Error::InvalidControl { invariant: "off-edge", detail: format!("({key}) is not a coupling") });
            };
            if j < k {
                for (i, [re, im]) in series.iter().enumerate() {
                    ctrl.values[i][e] = Complex64::new(*re, *im);
                }
            } else {
                lower.push((key.clone(), e, series));
            }
        }
        for (key, e, series) in lower {
            for (i, [re, im]) in series.iter().enumerate() {
                let upper = ctrl.values[i][e];
                let given = Complex64::new(*re, *im);
                if (given - self.flavor.mirror(upper)).norm() > 1e-12 * (1.0 + upper.norm()) {
                    let invariant = match self.flavor {
                        Flavor::HermitianV => "hermitian",
                        Flavor::SkewH => "skew-hermitian",
                        Flavor::RealU => "real-antisymmetric",
                    };
                    return Err(Error::InvalidControl { invariant, detail: format!("entry ({key}) at step {i} breaks the symmetry") });
                }
            }
        }
        ctrl.check(sys)?;
        Ok(ctrl)
    }
}

pub fn read_control(path: &Path, sys: &LevelSystem) -> Result<ControlGrid> {
    read_json::<ControlFile>(path)?.into_control(sys, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFile {
    pub kind: CostKind,
    /// `"j,k"` to `mu`; edges not listed take the system's coupling strength.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default = "fixed_time")]
    pub final_time: FinalTime,
}

fn fixed_time() -> FinalTime {
    FinalTime::Fixed
}

impl CostFile {
    pub fn from_spec(spec: &CostSpec) -> Self {
        CostFile {
            kind: spec.kind,
            weights: spec.weights.iter().map(|(&(j, k), &w)| (format!("{},{}", j + 1, k + 1), w)).collect(),
            final_time: spec.final_time,
        }
    }

    pub fn into_spec(self, sys: &LevelSystem, context: &str) -> Result<CostSpec> {
        let mut weights: BTreeMap<(usize, usize), f64> = sys.edges.iter().map(|e| (e.key(), e.mu)).collect();
        for (key, w) in self.weights {
            let (j, k) = parse_key(context, &key)?;
            weights.insert((j.min(k), j.max(k)), w);
        }
        CostSpec::new(self.kind, weights, self.final_time)
    }
}

pub fn read_cost(path: &Path, sys: &LevelSystem) -> Result<CostSpec> {
    read_json::<CostFile>(path)?.into_spec(sys, &path.display().to_string())
}

/// One-based mirror of [`BoundarySpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryFile {
    ModuliPoint { moduli: Vec<f64> },
    Eigenstate { index: usize },
    ModuliSet {
        fixed: Vec<(usize, f64)>,
        #[serde(default)]
        description: String,
    },
}

impl BoundaryFile {
    pub fn from_spec(spec: &BoundarySpec) -> Self {
        match spec {
            BoundarySpec::ModuliPoint { moduli } => BoundaryFile::ModuliPoint { moduli: moduli.clone() },
            BoundarySpec::Eigenstate { index } => BoundaryFile::Eigenstate { index: index + 1 },
            BoundarySpec::ModuliSet { fixed, description } => BoundaryFile::ModuliSet {
                fixed: fixed.iter().map(|&(j, a)| (j + 1, a)).collect(),
                description: description.clone(),
            },
        }
    }

    pub fn into_spec(self, n: usize, context: &str) -> Result<BoundarySpec> {
        let spec = match self {
            BoundaryFile::ModuliPoint { moduli } => BoundarySpec::ModuliPoint { moduli },
            BoundaryFile::Eigenstate { index } => BoundarySpec::Eigenstate { index: one_based(context, "eigenstate", index)? },
            BoundaryFile::ModuliSet { fixed, description } => BoundarySpec::ModuliSet {
                fixed: fixed
                    .into_iter()
                    .map(|(j, a)| Ok((one_based(context, "level", j)?, a)))
                    .collect::<Result<_>>()?,
                description,
            },
        };
        spec.validate(n)?;
        Ok(spec)
    }
}

/// Source and target of a transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFile {
    pub source: BoundaryFile,
    pub target: BoundaryFile,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

impl TransferFile {
    pub fn into_parts(self, n: usize, context: &str) -> Result<(BoundarySpec, BoundarySpec, TimeGrid)> {
        let grid = TimeGrid::new(self.t_final, self.steps)?;
        Ok((self.source.into_spec(n, context)?, self.target.into_spec(n, context)?, grid))
    }
}

pub fn read_transfer(path: &Path, n: usize) -> Result<(BoundarySpec, BoundarySpec, TimeGrid)> {
    let f: TransferFile = read_json(path)?;
    f.into_parts(n, &path.display().to_string())
}

/// A state as `[[re, im], ...]`.
pub fn state_to_json(psi: &CVector) -> String {
    let rows: Vec<[f64; 2]> = psi.iter().map(|z| [z.re, z.im]).collect();
    serde_json::to_string(&rows).expect("plain data serializes")
}

pub fn state_from_json(text: &str, context: &str) -> Result<CVector> {
    let rows: Vec<[f64; 2]> = from_json_str(text, context)?;
    Ok(CVector::from_iterator(rows.len(), rows.iter().map(|[re, im]| Complex64::new(*re, *im))))
}

/// Eigenstate `index` (zero-based) of an `n`-level system.
pub fn eigenstate(n: usize, index: usize) -> CVector {
    let mut v = CVector::from_element(n, Complex64::new(0.0, 0.0));
    v[index] = Complex64::new(1.0, 0.0);
    v
}

/// Writes a numeric table; floats use the shortest round-trip form.
fn csv_table(header: Vec<String>, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("writing to memory");
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
}

/// Columns `t, re_1, im_1, ..., re_n, im_n, pop_1, ..., pop_n`.
pub fn trajectory_csv(traj: &StateTrajectory) -> String {
    let n = traj.n();
    let header = std::iter::once("t".to_string())
        .chain((1..=n).flat_map(|j| [format!("re_{j}"), format!("im_{j}")]))
        .chain((1..=n).map(|j| format!("pop_{j}")))
        .collect();
    let rows = traj.states.iter().enumerate().map(|(i, psi)| {
        std::iter::once(traj.grid.node(i))
            .chain(psi.iter().flat_map(|z| [z.re, z.im]))
            .chain(psi.iter().map(|z| z.norm_sqr()))
            .collect()
    });
    csv_table(header, rows)
}

/// Columns `t, pop_1, ..., pop_n`.
pub fn populations_csv(traj: &StateTrajectory) -> String {
    let header = std::iter::once("t".to_string()).chain((1..=traj.n()).map(|j| format!("pop_{j}"))).collect();
    let rows = (0..traj.states.len()).map(|i| std::iter::once(traj.grid.node(i)).chain(traj.populations(i)).collect());
    csv_table(header, rows)
}

/// Columns `t, P_1, ..., P_n, H`; the node after the last step repeats the
/// last step's Hamiltonian.
pub fn lift_csv(lift: &PmpLift) -> String {
    let header = std::iter::once("t".to_string())
        .chain((1..=lift.n()).map(|j| format!("P_{j}")))
        .chain(["H".to_string()])
        .collect();
    let rows = lift.times.iter().zip(&lift.costate).enumerate().map(|(i, (t, p))| {
        let h = lift.hamiltonian.get(i).or(lift.hamiltonian.last()).copied().unwrap_or(0.0);
        std::iter::once(*t).chain(p.iter().copied()).chain([h]).collect()
    });
    csv_table(header, rows)
}

/// Parses a numeric CSV with one header line.
pub fn read_csv_rows(text: &str, context: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| parse_err(context, e.to_string()))?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(context, "empty file"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(context, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| parse_err(context, format!("line {line}: bad number {v:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a trajectory written by [`trajectory_csv`].
pub fn trajectory_from_csv(text: &str, context: &str) -> Result<StateTrajectory> {
    let (header, rows) = read_csv_rows(text, context)?;
    if header.len() < 4 || (header.len() - 1) % 3 != 0 {
        return Err(parse_err(context, "header is not t, re_j, im_j, pop_j"));
    }
    let n = (header.len() - 1) / 3;
    if rows.len() < 2 {
        return Err(parse_err(context, "a trajectory needs at least two rows"));
    }
    let t_final = rows[rows.len() - 1][0] - rows[0][0];
    let grid = TimeGrid::new(t_final, rows.len() - 1)?;
    let states: Vec<CVector> = rows
        .iter()
        .map(|r| CVector::from_iterator(n, (0..n).map(|j| Complex64::new(r[1 + 2 * j], r[2 + 2 * j]))))
        .collect();
    let real = states.iter().all(|s| s.iter().all(|z| z.im == 0.0));
    Ok(StateTrajectory { grid, states, real })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate;

    fn sys3() -> LevelSystem {
        LevelSystem::new(vec![0.0, 1.5, 2.25], vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 0.5).with_bound(2.0)])
    }

    #[test]
    fn system_round_trip() {
        let sys = sys3();
        let text = to_json_string(&SystemFile::from_system(&sys));
        assert!(text.contains("\"inf\""));
        let back = from_json_str::<SystemFile>(&text, "mem").unwrap().into_system("mem").unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn system_errors_name_the_problem() {
        let zero = r#"{"n": 2, "energies": [0, 1], "edges": [{"j": 0, "k": 1, "mu": 1}]}"#;
        let err = from_json_str::<SystemFile>(zero, "s.json").unwrap().into_system("s.json").unwrap_err();
        assert!(err.to_string().contains("s.json"));
        let broken = "{\"n\": 2,\n \"energies\": [0, 1,]}";
        let err = from_json_str::<SystemFile>(broken, "s.json").unwrap_err().to_string();
        assert!(err.contains("s.json") && err.contains("line 2"), "{err}");
        let count = r#"{"n": 3, "energies": [0, 1], "edges": []}"#;
        let err = from_json_str::<SystemFile>(count, "s").unwrap().into_system("s").unwrap_err();
        assert!(matches!(err, Error::InvalidSystem(_)));
    }

    #[test]
    fn control_round_trip() {
        let sys = sys3();
        let grid = TimeGrid::new(0.3, 7).unwrap();
        let ctrl = ControlGrid::from_fn(grid, Flavor::HermitianV, &sys, |i, e| Complex64::new(0.1 * i as f64 + 1.0 / 3.0, -(e as f64) / 7.0));
        let text = to_json_string(&ControlFile::from_control(&ctrl));
        let back = from_json_str::<ControlFile>(&text, "c").unwrap().into_control(&sys, "c").unwrap();
        assert_eq!(back, ctrl);
    }

    #[test]
    fn broken_hermitian_symmetry_is_an_invariant_error() {
        let sys = LevelSystem::ladder(vec![0.0, 1.0]);
        let text = r#"{"T": 1, "N": 1, "flavor": "V", "values": {"1,2": [[0.5, 0.25]], "2,1": [[0.5, 0.25]]}}"#;
        let err = from_json_str::<ControlFile>(text, "c").unwrap().into_control(&sys, "c").unwrap_err();
        assert!(matches!(err, Error::InvalidControl { invariant: "hermitian", .. }));
        let ok = r#"{"T": 1, "N": 1, "flavor": "V", "values": {"1,2": [[0.5, 0.25]], "2,1": [[0.5, -0.25]]}}"#;
        assert!(from_json_str::<ControlFile>(ok, "c").unwrap().into_control(&sys, "c").is_ok());
    }

    #[test]
    fn cost_and_boundary_round_trip() {
        let sys = sys3();
        let spec = CostSpec::from_system(CostKind::TimeMax, &sys);
        let text = to_json_string(&CostFile::from_spec(&spec));
        assert!(text.contains("time-max") && text.contains("\"2,3\""));
        assert_eq!(from_json_str::<CostFile>(&text, "c").unwrap().into_spec(&sys, "c").unwrap(), spec);
        for b in [
            BoundarySpec::Eigenstate { index: 2 },
            BoundarySpec::ModuliPoint { moduli: vec![0.25, 0.75, 0.0] },
            BoundarySpec::ModuliSet { fixed: vec![(0, 0.5)], description: "half".into() },
        ] {
            let text = to_json_string(&BoundaryFile::from_spec(&b));
            assert_eq!(from_json_str::<BoundaryFile>(&text, "b").unwrap().into_spec(3, "b").unwrap(), b);
        }
        let one = from_json_str::<BoundaryFile>(r#"{"kind": "eigenstate", "index": 1}"#, "b").unwrap();
        assert_eq!(one.into_spec(3, "b").unwrap(), BoundarySpec::Eigenstate { index: 0 });
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let sys = sys3();
        let grid = TimeGrid::new(0.9, 9).unwrap();
        let ctrl = ControlGrid::from_fn(grid, Flavor::SkewH, &sys, |i, e| Complex64::from_polar(0.7, i as f64 * 0.3 + e as f64));
        let traj = propagate(&sys, &ctrl, &eigenstate(3, 0)).unwrap();
        let back = trajectory_from_csv(&trajectory_csv(&traj), "t").unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.grid.steps(), 9);
        let pops = populations_csv(&traj);
        let (header, rows) = read_csv_rows(&pops, "p").unwrap();
        assert_eq!(header, ["t", "pop_1", "pop_2", "pop_3"]);
        assert_eq!(rows.len(), 10);
    }

    #[test]
    fn state_json() {
        let psi = eigenstate(2, 1);
        assert_eq!(state_from_json(&state_to_json(&psi), "s").unwrap(), psi);
    }
}
