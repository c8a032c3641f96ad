//! `qoc`: command-line front end to the qoc-core pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qoc_core::costs::{constant_speed_residual, evaluate_cost, in_constraint_set};
use qoc_core::dynamics::{eliminate_drift, propagate, restore_drift};
use qoc_core::io::{
    self, eigenstate, lift_csv, populations_csv, read_control, read_cost, read_system, read_transfer, state_from_json,
    to_json_string, trajectory_csv, trajectory_from_csv, ControlFile, SystemFile,
};
use qoc_core::linalg::CVector;
use qoc_core::optimizer::{classify_extremal, pmp_residual, solve_reduced, SolveOptions, THREADS_ENV};
use qoc_core::resonance::{classify_resonance, counterexample_pair, resonance_transform, TransformOptions, COUNTEREXAMPLE_STEPS};
use qoc_core::system::lie_rank_oracle;
use qoc_core::verify::{self, Fixtures, VerifyOptions};
use qoc_core::{AdmissiblePair, ControlGrid, CostKind, CostSpec, Error, Flavor, LevelSystem};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qoc", version, about = "Optimal control of n-level quantum systems on a coupling graph")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Threshold below which a modulus counts as zero.
    #[arg(long, global = true, default_value_t = 1e-6)]
    epsilon: f64,
    /// Tolerance of the command's main check; each command has its own default.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for the solver restarts and the random suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "qoc-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a control file and export the trajectory.
    Simulate(PairArgs),
    /// Move a V control to the interaction picture, or an H/U control back.
    EliminateDrift(ControlArgs),
    /// Replace a pair by a resonant one with the same populations.
    Resonate(PairArgs),
    /// Validate a system, and optionally a control or a trajectory against it.
    Check(CheckArgs),
    /// Solve an optimal transfer on the reduced real problem.
    Solve(SolveArgs),
    /// Resonance verdict of a pair; window analysis for real controls.
    Classify(ClassifyArgs),
    /// Write and classify the two built-in counterexample pairs.
    DemoCounterexample,
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ControlArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    control: PathBuf,
}

#[derive(Args)]
struct PairArgs {
    #[command(flatten)]
    files: ControlArgs,
    /// Initial state: a one-based eigenstate index or a JSON file `[[re, im], ...]`.
    #[arg(long, default_value = "1")]
    initial: String,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    control: Option<PathBuf>,
    /// Cost spec for the constraint-set check; defaults to energy with the system's weights.
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Trajectory CSV to check for unit norm and, with a control, admissibility.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    cost: PathBuf,
    /// Source, target, final time and step count.
    #[arg(long)]
    transfer: PathBuf,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Cost spec for the window analysis of real controls.
    #[arg(long)]
    cost: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated groups or criterion numbers.
    #[arg(long)]
    filter: Option<String>,
    /// Directory whose files replace the bundled fixtures of the same name.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::InvalidCost(_)
            | Error::InvalidBoundary(_)
            | Error::MissingWeight(..)
            | Error::WrongKind { .. }
            | Error::GridMismatch(_)
            | Error::DimensionMismatch(_)
            | Error::DimensionExceeded { .. } => 2,
            Error::NotControllable { .. } => 4,
            Error::NoConvergence(_) => 5,
            _ => 3,
        };
        Failure { code, message: describe(&e) }
    }
}

/// Error text with level indices shifted to the one-based numbering of the files.
fn describe(e: &Error) -> String {
    match e {
        Error::PhaseUndefined { level, node, modulus } => {
            format!("phase undefined for level {} at node {node}: modulus {modulus:e} below threshold", level + 1)
        }
        Error::SupportOverlap { level, product } => format!("states overlap on level {}: |psi1_j psi2_j| = {product:e}", level + 1),
        Error::MixedWindow { level } => format!("window is mixed: level {} crosses the zero threshold inside the window", level + 1),
        Error::MissingWeight(j, k) => format!("no cost weight for edge ({},{})", j + 1, k + 1),
        other => other.to_string(),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    check_threads()?;
    let common = cli.common;
    if !(common.epsilon >= 0.0) || common.tol.is_some_and(|t| !(t > 0.0)) {
        return Err(Failure::config("--epsilon must be non-negative and --tol positive"));
    }
    match cli.command {
        Command::Simulate(a) => simulate(&common, &a),
        Command::EliminateDrift(a) => drift(&common, &a),
        Command::Resonate(a) => resonate(&common, &a),
        Command::Check(a) => check(&common, &a),
        Command::Solve(a) => solve(&common, &a),
        Command::Classify(a) => classify(&common, &a),
        Command::DemoCounterexample => demo(&common),
        Command::Verify(a) => run_verify(&common, &a),
    }
}

fn check_threads() -> Outcome {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().parse::<usize>().map_or(true, |t| t == 0) => {
            Err(Failure::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))
        }
        _ => Ok(()),
    }
}

fn out_dir(common: &Common) -> Result<&Path, Failure> {
    fs::create_dir_all(&common.out).map_err(|e| Failure::config(format!("cannot create output directory {}: {e}", common.out.display())))?;
    Ok(&common.out)
}

fn write(dir: &Path, name: &str, text: &str) -> Outcome {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn initial_state(spec: &str, n: usize) -> Result<CVector, Failure> {
    if let Ok(index) = spec.parse::<usize>() {
        if index == 0 || index > n {
            return Err(Failure::config(format!("--initial eigenstate {index} outside 1..={n}")));
        }
        return Ok(eigenstate(n, index - 1));
    }
    let text = fs::read_to_string(spec).map_err(|e| Failure::config(format!("{spec}: {e}")))?;
    let psi = state_from_json(&text, spec)?;
    if psi.len() != n {
        return Err(Failure::config(format!("{spec}: state has {} entries for {n} levels", psi.len())));
    }
    Ok(psi)
}

fn load_pair(a: &PairArgs) -> Result<(LevelSystem, AdmissiblePair), Failure> {
    let sys = read_system(&a.files.system)?;
    let ctrl = read_control(&a.files.control, &sys)?;
    let psi0 = initial_state(&a.initial, sys.n)?;
    let pair = AdmissiblePair::from_control(&sys, ctrl, &psi0)?;
    Ok((sys, pair))
}

fn control_json(ctrl: &ControlGrid) -> String {
    to_json_string(&ControlFile::from_control(ctrl))
}

fn simulate(common: &Common, a: &PairArgs) -> Outcome {
    let (_, pair) = load_pair(a)?;
    let dir = out_dir(common)?;
    let traj = &pair.trajectory;
    write(dir, "trajectory.csv", &trajectory_csv(traj))?;
    write(dir, "populations.csv", &populations_csv(traj))?;
    let summary = json!({
        "flavor": pair.control.flavor.code(),
        "T": pair.control.grid.t_final(),
        "N": pair.control.grid.steps(),
        "norm_drift": traj.norm_drift(),
        "final_populations": traj.populations(traj.states.len() - 1),
    });
    write(dir, "summary.json", &to_json_string(&summary))?;
    println!("norm drift {:e}; wrote trajectory.csv, populations.csv, summary.json", traj.norm_drift());
    Ok(())
}

fn drift(common: &Common, a: &ControlArgs) -> Outcome {
    let sys = read_system(&a.system)?;
    let ctrl = read_control(&a.control, &sys)?;
    let (out, name) = match ctrl.flavor {
        Flavor::HermitianV => (eliminate_drift(&sys, &ctrl)?, "control_h.json"),
        Flavor::SkewH | Flavor::RealU => (restore_drift(&sys, &ctrl)?, "control_v.json"),
    };
    write(out_dir(common)?, name, &control_json(&out))?;
    println!("wrote {name} ({} control)", out.flavor.code());
    Ok(())
}

fn cost_table(sys: &LevelSystem, before: &ControlGrid, after: &ControlGrid) -> Result<String, Failure> {
    let mut rows = vec![vec!["kind".to_string(), "before".into(), "after".into()]];
    for kind in CostKind::ALL {
        let spec = CostSpec::from_system(kind, sys);
        rows.push(vec![kind.name().into(), format!("{:?}", evaluate_cost(&spec, before)?), format!("{:?}", evaluate_cost(&spec, after)?)]);
    }
    Ok(rows.iter().map(|r| r.join(",") + "\n").collect())
}

fn resonate(common: &Common, a: &PairArgs) -> Outcome {
    let (sys, pair) = load_pair(a)?;
    // work in the interaction picture
    let pair = if pair.control.flavor == Flavor::HermitianV {
        AdmissiblePair::from_control(&sys, eliminate_drift(&sys, &pair.control)?, pair.trajectory.initial())?
    } else {
        pair
    };
    let opts = TransformOptions { epsilon: common.epsilon, tol: common.tol.unwrap_or(1e-8) };
    let out = resonance_transform(&sys, &pair, opts)?;
    let before = classify_resonance(&sys, &pair, common.epsilon, 1e-6)?;
    let after = classify_resonance(&sys, &out.pair, common.epsilon, 1e-6)?;
    let dir = out_dir(common)?;
    write(dir, "resonant_control.json", &control_json(&out.pair.control))?;
    write(dir, "resonant_trajectory.csv", &trajectory_csv(&out.pair.trajectory))?;
    write(dir, "costs.csv", &cost_table(&sys, &pair.control, &out.pair.control)?)?;
    let verdicts = json!({
        "moduli_deviation": out.moduli_deviation,
        "phases": out.phases,
        "before": before,
        "after": after,
    });
    write(dir, "verdict.json", &to_json_string(&verdicts))?;
    println!("input {}, output {}; moduli deviation {:e}", before.status, after.status, out.moduli_deviation);
    Ok(())
}

fn check(common: &Common, a: &CheckArgs) -> Outcome {
    let sys = read_system(&a.system)?;
    let components: Vec<Vec<usize>> = sys.connected_components().iter().map(|c| c.iter().map(|j| j + 1).collect()).collect();
    let mut report = json!({
        "n": sys.n,
        "components": components,
        "controllable": sys.is_controllable(),
    });
    if let Ok(lie) = lie_rank_oracle(&sys) {
        report["lie_rank"] = json!(lie);
    }
    let mut ctrl = None;
    if let Some(path) = &a.control {
        let c = read_control(path, &sys)?;
        let spec = match &a.cost {
            Some(p) => read_cost(p, &sys)?,
            None => CostSpec::from_system(CostKind::Energy, &sys),
        };
        let costs: serde_json::Map<String, serde_json::Value> = CostKind::ALL
            .iter()
            .map(|&k| Ok((k.name().to_string(), json!(evaluate_cost(&spec.with_kind(k), &c)?))))
            .collect::<Result<_, Error>>()?;
        let outside = (0..c.grid.steps()).map(|i| in_constraint_set(&spec, &c, i)).collect::<Result<Vec<_>, _>>()?;
        let bounds_ok = c.values.iter().all(|row| {
            row.iter().zip(&c.edges).all(|(z, &(j, k))| {
                let b = sys.edges[sys.edge_index(j, k).expect("control edges come from the system")].bound;
                z.norm() <= b * (1.0 + 1e-12)
            })
        });
        report["control"] = json!({
            "flavor": c.flavor.code(),
            "costs": costs,
            "steps_outside_constraint_set": outside.iter().filter(|inside| !**inside).count(),
            "within_bounds": bounds_ok,
            "constant_speed_residual": constant_speed_residual(&spec.with_kind(CostKind::Energy), &c)?,
        });
        ctrl = Some(c);
    }
    if let Some(path) = &a.trajectory {
        let context = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{context}: {e}")))?;
        let traj = trajectory_from_csv(&text, &context)?;
        if traj.n() != sys.n {
            return Err(Failure::config(format!("{context}: trajectory has {} levels, system {}", traj.n(), sys.n)));
        }
        let mut t = json!({ "norm_drift": traj.norm_drift(), "nodes": traj.states.len() });
        if let Some(c) = &ctrl {
            let again = propagate(&sys, c, traj.initial())?;
            t["admissibility_residual"] = json!(again.max_state_deviation(&traj));
        }
        report["trajectory"] = t;
    }
    write(out_dir(common)?, "check.json", &to_json_string(&report))?;
    if !sys.is_controllable() {
        return Err(Error::NotControllable { components: components.len() }.into());
    }
    println!("system valid and controllable; wrote check.json");
    Ok(())
}

fn solve(common: &Common, a: &SolveArgs) -> Outcome {
    let sys = read_system(&a.system)?;
    let spec = read_cost(&a.cost, &sys)?;
    let (source, target, grid) = read_transfer(&a.transfer, sys.n)?;
    let mut opts = SolveOptions { seed: common.seed, ..SolveOptions::new(grid) };
    if let Some(tol) = common.tol {
        opts.endpoint_tol = tol;
    }
    if let Some(r) = a.restarts {
        opts.restarts = r;
    }
    opts.validate()?;
    let out = solve_reduced(&sys, &spec, &source, &target, &opts)?;
    let report = pmp_residual(&sys, &spec, &out.pair, &out.lift, &source, &target)?;
    let verdict = classify_resonance(&sys, &out.pair, common.epsilon, 1e-4)?;
    let dir = out_dir(common)?;
    write(dir, "control.json", &control_json(&out.pair.control))?;
    write(dir, "trajectory.csv", &trajectory_csv(&out.pair.trajectory))?;
    write(dir, "lift.csv", &lift_csv(&out.lift))?;
    let mut bundle = json!({
        "kind": spec.kind,
        "cost": out.cost,
        "converged": out.converged,
        "diagnostics": out.diagnostics,
        "pmp": report,
        "resonance": verdict,
    });
    if matches!(spec.kind, CostKind::Energy) {
        bundle["constant_speed_residual"] = json!(constant_speed_residual(&spec, &out.pair.control)?);
    }
    write(dir, "solution.json", &to_json_string(&bundle))?;
    let extremal = classify_extremal(&sys, &out.pair, &spec, common.epsilon)?;
    write(dir, "extremal.json", &to_json_string(&extremal))?;
    if !out.converged {
        return Err(Failure { code: 5, message: format!("solver did not converge: {}; best iterate written", out.diagnostics.message) });
    }
    println!("cost {:?}; PMP residual {:e}; wrote control.json, trajectory.csv, lift.csv, solution.json, extremal.json", out.cost, report.max_residual());
    Ok(())
}

fn classify(common: &Common, a: &ClassifyArgs) -> Outcome {
    let (sys, pair) = load_pair(&a.pair)?;
    let verdict = classify_resonance(&sys, &pair, common.epsilon, common.tol.unwrap_or(1e-6))?;
    let dir = out_dir(common)?;
    write(dir, "verdict.json", &to_json_string(&verdict))?;
    if pair.control.flavor == Flavor::RealU {
        let spec = match &a.cost {
            Some(p) => read_cost(p, &sys)?,
            None => CostSpec::from_system(CostKind::Energy, &sys),
        };
        let report = classify_extremal(&sys, &pair, &spec, common.epsilon)?;
        write(dir, "extremal.json", &to_json_string(&report))?;
        println!("{}; {} windows analysed, wrote verdict.json and extremal.json", verdict.status, report.windows.len());
    } else {
        println!("{}; wrote verdict.json", verdict.status);
    }
    Ok(())
}

fn demo(common: &Common) -> Outcome {
    let c = counterexample_pair(COUNTEREXAMPLE_STEPS)?;
    let dir = out_dir(common)?;
    write(dir, "counterexample_system.json", &to_json_string(&SystemFile::from_system(&c.system)))?;
    let mut verdicts = serde_json::Map::new();
    for (name, pair) in [("a", &c.a), ("b", &c.b)] {
        write(dir, &format!("counterexample_{name}.json"), &control_json(&pair.control))?;
        write(dir, &format!("counterexample_{name}_trajectory.csv"), &trajectory_csv(&pair.trajectory))?;
        let v = classify_resonance(&c.system, pair, common.epsilon, common.tol.unwrap_or(1e-9))?;
        println!("pair {name}: {}", v.status);
        verdicts.insert(name.into(), json!(v));
    }
    write(dir, "verdicts.json", &to_json_string(&verdicts))?;
    Ok(())
}

fn run_verify(common: &Common, a: &VerifyArgs) -> Outcome {
    let fixtures = match &a.fixtures {
        Some(dir) if !dir.is_dir() => return Err(Failure::config(format!("fixture directory {} not found", dir.display()))),
        Some(dir) => Fixtures::from_dir(dir),
        None => Fixtures::bundled(),
    };
    let opts = VerifyOptions { seed: common.seed, filter: a.filter.clone(), fixtures };
    let report = verify::run(&opts)?;
    for c in &report.criteria {
        println!("{}", c.summary_line());
    }
    write(out_dir(common)?, "verify.json", &io::to_json_string(&report))?;
    Ok(())
}
