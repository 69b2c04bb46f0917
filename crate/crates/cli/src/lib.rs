//! Batch verification harness: reads a flag fixture, runs one command and
//! writes a JSON report (plus a flowed fixture and a trajectory CSV for `flow`).
//!
//! Exit codes: 0 when every row passes, 1 when a check fails, 2 on bad input.

pub mod fixture;
pub mod report;
pub mod suites;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use sha2::{Digest, Sha256};
use symflag_core::ambient::{flow, hamiltonian_vector_field, trig_dictionary, FormField, ScalarField};
use symflag_core::flagmesh::{check_compatibility, validate_flag, FlagEmbedding, DEFAULT_COMPATIBILITY_TOL};
use symflag_core::symflag::{is_symplectic_flag, lift_flow_check, lift_tangent, moment_pairing, moment_trajectory, HamiltonianDictionary, LiftMode};

use fixture::Fixture;
use report::{Report, Row, Timing};
use suites::Suite;

/// Overrides the directory reports are written to when `--out` is absent.
pub const REPORT_DIR_ENV: &str = "SYMFLAG_REPORT_DIR";

/// Bad fixture, bad arguments or unreadable files (exit code 2).
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl InputError {
    pub fn new(msg: impl Into<String>) -> Self {
        InputError(msg.into())
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

impl From<symflag_core::Error> for InputError {
    fn from(e: symflag_core::Error) -> Self {
        InputError(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Moment,
    Check,
    Flow,
    Lift,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Moment => "moment",
            Command::Check => "check",
            Command::Flow => "flow",
            Command::Lift => "lift",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Direct,
    Inductive,
}

#[derive(Debug, Parser)]
#[command(name = "symflag", version, about = "Verify moment-map and transgression identities on nonlinear symplectic flags")]
pub struct Cli {
    pub command: Command,
    pub fixture: PathBuf,
    /// Check suite to run.
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Probe set: `fixture`, `dictionary`, `dictionary:CAP` or a JSON file with a probe list.
    #[arg(long)]
    pub probes: Option<String>,
    /// Flow time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Integrator step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Report path; other outputs are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the fixture seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Negates Omega in the KKS rows (sanity check of the harness).
    #[arg(long, hide = true)]
    pub debug_negate_omega: bool,
}

/// A finished command: the report plus any extra files, as (file name, contents).
pub struct Outcome {
    pub report: Report,
    pub extra: Vec<(String, String)>,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "fixture".into())
}

/// Where the report goes: `--out`, else `$SYMFLAG_REPORT_DIR` (or the current
/// directory) with a name derived from the command and fixture.
pub fn report_path(cli: &Cli) -> PathBuf {
    match &cli.out {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var_os(REPORT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            dir.join(format!("{}-{}.json", cli.command.name(), stem(&cli.fixture)))
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, InputError> {
    let (fx, bytes) = Fixture::load(&cli.fixture)?;
    let seed = cli.seed.unwrap_or(fx.config.seed);
    let flag = fx.flag()?;
    let mut report = Report {
        command: cli.command.name().into(),
        fixture: cli.fixture.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        fixture_sha256: hex::encode(Sha256::digest(&bytes)),
        rng: fx.config.rng.clone(),
        seed,
        suite: None,
        rows: Vec::new(),
        data: serde_json::Value::Null,
        all_pass: true,
        timing: Timing::default(),
    };
    let mut extra = Vec::new();
    match cli.command {
        Command::Validate => validate(&fx, &flag, &mut report),
        Command::Moment => moment(cli, &fx, &flag, &mut report)?,
        Command::Check => {
            report.suite = Some(cli.suite.name().into());
            let ctx = suites::Context { fixture: &fx, flag: &flag, seed, negate_omega: cli.debug_negate_omega };
            report.rows = suites::run(&ctx, cli.suite);
        }
        Command::Flow => extra = flow_cmd(cli, &fx, &flag, &mut report)?,
        Command::Lift => lift(cli, &fx, &flag, &mut report)?,
    }
    report.finish();
    Ok(Outcome { report, extra })
}

fn validate(fx: &Fixture, flag: &FlagEmbedding, report: &mut Report) {
    let v = validate_flag(flag, &fx.config.thresholds);
    let mut row = Row::le("validate.violations", v.violations.len() as f64, 0.0);
    if let Some(first) = v.violations.first() {
        row = row.with_detail(format!("{:?}: {}", first.kind, first.message));
    }
    report.rows.push(row);
    let mut data = serde_json::json!({ "violations": v.violations });
    if flag.is_symplectic_mode() {
        match is_symplectic_flag(flag, fx.config.symplectic_threshold) {
            Ok(s) => {
                let bad: usize = s.levels.iter().map(|l| l.degenerate_cells.len()).sum();
                report.rows.push(Row::le("validate.degenerate_cells", bad as f64, 0.0));
                data["symplectic"] = serde_json::to_value(&s).expect("serializable");
            }
            Err(e) => report.rows.push(Row::error("validate.symplectic", e)),
        }
    }
    report.data = data;
}

/// Resolves `--probes` into labelled functions.
fn probe_set(cli: &Cli, fx: &Fixture) -> Result<Vec<(String, ScalarField)>, InputError> {
    let names = symflag_core::ambient::coordinate_names(fx.ambient.dim);
    let dictionary = |cap: u32| trig_dictionary(fx.ambient.dim, cap).into_iter().map(|f| (f.label(&names), f)).collect();
    match cli.probes.as_deref() {
        None | Some("fixture") => fx.probe_fields(),
        Some("dictionary") => Ok(dictionary(fx.config.probe_cap)),
        Some(p) if p.starts_with("dictionary:") => {
            let cap = p["dictionary:".len()..].parse().map_err(|_| InputError::new(format!("bad probe set {p:?}")))?;
            Ok(dictionary(cap))
        }
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| InputError::new(format!("cannot read probe file {path}: {e}")))?;
            let probes: Vec<fixture::Probe> = serde_json::from_str(&text).map_err(|e| InputError::new(format!("schema error in probe file: {e}")))?;
            Fixture { probes, ..fx.clone() }.probe_fields()
        }
    }
}

fn moment(cli: &Cli, fx: &Fixture, flag: &FlagEmbedding, report: &mut Report) -> Result<(), InputError> {
    let probes = probe_set(cli, fx)?;
    let mut values = Vec::with_capacity(probes.len());
    for (_, f) in &probes {
        values.push(moment_pairing(flag, f)?);
    }
    report.data = serde_json::json!({
        "labels": probes.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
        "values": values,
    });
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flow_cmd(cli: &Cli, fx: &Fixture, flag: &FlagEmbedding, report: &mut Report) -> Result<Vec<(String, String)>, InputError> {
    let block = fx.flow.as_ref().ok_or_else(|| InputError::new("fixture has no flow block"))?;
    if !flag.is_symplectic_mode() {
        return Err(InputError::new("flow needs a symplectic fixture"));
    }
    let t = cli.t.unwrap_or(block.t);
    let dt = cli.dt.unwrap_or(block.dt);
    if !(t.is_finite() && t >= 0.0 && dt > 0.0) {
        return Err(InputError::new(format!("invalid flow time {t} / step {dt}")));
    }
    let h = fx.scalar(&block.hamiltonian)?;
    let x = hamiltonian_vector_field(flag.ambient(), &FormField::scalar(h.clone()))?;
    let base = stem(&report_path(cli));
    let (fixture_name, csv_name) = (format!("{base}.fixture.json"), format!("{base}.trajectory.csv"));

    let moved = match flow(flag.ambient(), &x, t, dt, flag.positions()) {
        Ok(p) => p,
        Err(e) => {
            report.rows.push(Row::error("flow.integrator", e));
            return Ok(Vec::new());
        }
    };
    let flowed = flag.clone().with_positions(moved)?;
    let out_fixture = fx.explicit(&flowed);
    let v = validate_flag(&flowed, &fx.config.thresholds);
    report.rows.push(Row::le("flow.violations", v.violations.len() as f64, 0.0));

    let mut probes = probe_set(cli, fx)?;
    probes.push(("hamiltonian".into(), h));
    let fields: Vec<ScalarField> = probes.iter().map(|(_, f)| f.clone()).collect();
    let traj = match moment_trajectory(flag, &x, t, dt, block.samples, &fields) {
        Ok(tr) => tr,
        Err(e) => {
            report.rows.push(Row::error("flow.conservation", e));
            return Ok(vec![(fixture_name, out_fixture.to_json())]);
        }
    };
    let last = probes.len() - 1;
    let start = traj[0].1[last];
    let drift = traj.iter().map(|(_, v)| (v[last] - start).abs()).fold(0.0, f64::max);
    report.rows.push(Row::le("flow.conservation", drift, fx.config.tolerances.flow_conservation).with_detail("drift of <J, h> along the flow of h"));

    let mut csv = String::from("t,probe,value\n");
    for (time, values) in &traj {
        for ((label, _), v) in probes.iter().take(last).zip(values) {
            csv.push_str(&format!("{time},{},{v}\n", csv_field(label)));
        }
    }
    report.data = serde_json::json!({ "t": t, "dt": dt, "fixture": fixture_name, "trajectory": csv_name });
    Ok(vec![(fixture_name, out_fixture.to_json()), (csv_name, csv)])
}

fn lift(cli: &Cli, fx: &Fixture, flag: &FlagEmbedding, report: &mut Report) -> Result<(), InputError> {
    let block = fx.lift.as_ref().ok_or_else(|| InputError::new("fixture has no lift block"))?;
    let mode = match cli.mode {
        Some(ModeArg::Direct) => LiftMode::Direct,
        Some(ModeArg::Inductive) => LiftMode::Inductive,
        None => fx.config.solver.mode,
    };
    let xi = fx.tangent(flag, &block.tangent)?;
    check_compatibility(flag, &xi, DEFAULT_COMPATIBILITY_TOL)?;
    let solver = &fx.config.solver;
    let dict = HamiltonianDictionary::trig(flag.ambient(), solver.cap)?;
    let (h, rep) = lift_tangent(flag, &xi, &dict, mode, solver.cap, solver.damping)?;
    let name = if mode == LiftMode::Direct { "direct" } else { "inductive" };
    let tol = fx.config.tolerances.lift_mixed;
    report.rows.push(Row::le(format!("lift.{name}.residual"), rep.residual, tol));
    let dt = fx.config.steps.lift_flow_dt;
    let fc = lift_flow_check(flag, &xi, &h, dt);
    report.rows.push(match &fc {
        Ok(fc) => Row::le(format!("lift.{name}.flow"), fc.deviation, rep.residual + 10.0 * dt),
        Err(e) => Row::error(format!("lift.{name}.flow"), e),
    });
    report.data = serde_json::json!({ "lift": rep, "flow": fc.ok() });
    Ok(())
}

/// Writes the report and extra files; returns the report path.
pub fn write_outputs(cli: &Cli, outcome: &Outcome) -> Result<PathBuf, InputError> {
    let path = report_path(cli);
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir).map_err(|e| InputError::new(format!("cannot create {}: {e}", dir.display())))?;
    }
    let write = |p: &Path, s: &str| std::fs::write(p, s).map_err(|e| InputError::new(format!("cannot write {}: {e}", p.display())));
    write(&path, &outcome.report.to_json())?;
    for (name, body) in &outcome.extra {
        write(&dir.join(name), body)?;
    }
    Ok(path)
}
