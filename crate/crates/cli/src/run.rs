//! Scenario loading, the `simulate`/`filter`/`verify` subcommands and the
//! layout of a run directory.
//!
//! ```text
//! <out>/trajectory.json   states x(0..T) and outputs y(1..T) (simulated runs)
//! <out>/trajectory.csv    the same, one row per k
//! <out>/measurements.json y(1..T) as filtered
//! <out>/steps/step_0001.json ... one StepRecord per step
//! <out>/summary.json      status of the last `filter` run
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use polyfilt::filter::{filter_step, FilterState, StepRecord, Trajectory};
use polyfilt::scenario::{bundled, Scenario, ScenarioFile};
use polyfilt::sos::{verify_certificate, TOL_IDENTITY, TOL_PSD};
use polyfilt::Error;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Inconsistent(String),
    Solver(String),
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Inconsistent(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Verification(_) => 5,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io_error",
            CliError::Config(_) => "config_error",
            CliError::Inconsistent(_) => "inconsistent_measurement",
            CliError::Solver(_) => "solver_failure",
            CliError::Verification(_) => "verification_failure",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Inconsistent(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InconsistentMeasurement { .. } => CliError::Inconsistent(e.to_string()),
            Error::Solver { .. } | Error::ProblemTooLarge { .. } => CliError::Solver(e.to_string()),
            Error::Sampling(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Command-line values that replace the scenario's own.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sos_degree: Option<u32>,
    pub max_halfspaces: Option<usize>,
    pub points: Option<usize>,
    pub timings: bool,
}

impl Overrides {
    fn apply(&self, file: &mut ScenarioFile) {
        if let Some(seed) = self.seed {
            file.filter.seed = seed;
            if let Some(sim) = &mut file.simulation {
                sim.seed = seed;
            }
        }
        if let Some(d) = self.sos_degree {
            file.filter.sos_half_degree = Some(d);
        }
        if let Some(j) = self.max_halfspaces {
            file.filter.max_halfspaces = Some(j);
        }
        if let Some(p) = self.points {
            file.filter.points = p;
        }
        file.filter.timings |= self.timings;
    }
}

/// Parses a scenario with the offending field path and position in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Config(format!("{origin}: field `{path}`: {inner}"))
    })
}

/// `spec` is a path, or the name of a bundled scenario when no such file exists.
pub fn load_scenario(spec: &str, overrides: &Overrides) -> Result<Scenario, CliError> {
    let path = Path::new(spec);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| io_err(path, e))?
    } else if let Some(text) = bundled(spec) {
        text.to_string()
    } else {
        return Err(CliError::Io(format!(
            "{spec}: no such file or bundled scenario"
        )));
    };
    let mut file = parse_scenario(&text, spec)?;
    overrides.apply(&mut file);
    Scenario::new(file).map_err(|e| CliError::Config(format!("{spec}: {e}")))
}

pub fn output_dir(scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    match (out, &scenario.file.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => Path::new("out").join(&scenario.file.name),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| io_err(path, format!("field `{}`: {}", e.path(), e.inner())))
}

fn write_trajectory(out: &Path, traj: &Trajectory) -> Result<(), CliError> {
    write_json(&out.join("trajectory.json"), traj)?;
    let path = out.join("trajectory.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    let n = traj.states.first().map_or(0, Vec::len);
    let m = traj.outputs.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("y{i}")));
    w.write_record(&header).map_err(|e| io_err(&path, e))?;
    for (k, x) in traj.states.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        match k.checked_sub(1).and_then(|i| traj.outputs.get(i)) {
            Some(y) => row.extend(y.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        w.write_record(&row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

pub fn simulate(scenario: &Scenario, out: &Path) -> Result<(), CliError> {
    let traj = scenario.simulate()?;
    write_trajectory(out, &traj)?;
    write_json(&out.join("measurements.json"), &traj.outputs)?;
    println!(
        "simulated {} steps into {}",
        traj.outputs.len(),
        out.display()
    );
    Ok(())
}

pub fn step_path(out: &Path, step: usize) -> PathBuf {
    out.join("steps").join(format!("step_{step:04}.json"))
}

pub fn filter(scenario: &Scenario, out: &Path) -> Result<(), CliError> {
    let (ys, truth) = scenario.measurements()?;
    if let Some(t) = &truth {
        write_trajectory(out, t)?;
    }
    write_json(&out.join("measurements.json"), &ys)?;
    let steps_dir = out.join("steps");
    if steps_dir.exists() {
        fs::remove_dir_all(&steps_dir).map_err(|e| io_err(&steps_dir, e))?;
    }

    let mut state = FilterState::initial(&scenario.model);
    let mut contained = Vec::new();
    let mut failure = None;
    for y in &ys {
        match filter_step(&scenario.model, &state, y, &scenario.file.filter) {
            Ok((next, record)) => {
                let inside = truth
                    .as_ref()
                    .map(|t| record.polytope.contains(&t.states[record.step], 1e-6))
                    .transpose()?;
                info!(
                    "step {}: {} half-spaces, box volume {:.3e}, polytope ~{:.3e}",
                    record.step,
                    record.polytope.len(),
                    record.box_volume,
                    record.polytope_volume_mc
                );
                write_json(&step_path(out, record.step), &record)?;
                contained.extend(inside);
                state = next;
            }
            Err(e) => {
                failure = Some(CliError::from(e));
                break;
            }
        }
    }

    let summary = json!({
        "scenario": scenario.file.name,
        "horizon": ys.len(),
        "steps": state.step,
        "status": failure.as_ref().map_or("ok", CliError::status),
        "error": failure.as_ref().map(ToString::to_string),
        "truth_contained": truth.as_ref().map(|_| &contained),
    });
    write_json(&out.join("summary.json"), &summary)?;
    match failure {
        Some(e) => Err(e),
        None => {
            println!("filtered {} steps into {}", state.step, out.display());
            Ok(())
        }
    }
}

/// All step records in `out`, in step order.
pub fn read_records(out: &Path) -> Result<Vec<StepRecord>, CliError> {
    let dir = out.join("steps");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| io_err(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io(format!("{}: no step records", dir.display())));
    }
    paths.iter().map(|p| read_json(p)).collect()
}

pub fn read_trajectory(out: &Path) -> Result<Option<Trajectory>, CliError> {
    let path = out.join("trajectory.json");
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn verify(out: &Path) -> Result<(), CliError> {
    let records = read_records(out)?;
    let mut problems = Vec::new();
    let mut total = 0;
    for rec in &records {
        if rec.certificates.len() != rec.polytope.len() {
            problems.push(format!(
                "step {}: {} certificates for {} half-spaces",
                rec.step,
                rec.certificates.len(),
                rec.polytope.len()
            ));
        }
        let mut worst = 0.0f64;
        for (i, (c, h)) in rec
            .certificates
            .iter()
            .zip(rec.polytope.halfspaces())
            .enumerate()
        {
            total += 1;
            let report = verify_certificate(&c.certificate, &rec.set, TOL_IDENTITY, TOL_PSD)?;
            worst = worst.max(report.identity_residual);
            if !report.passed {
                problems.push(format!(
                    "step {} half-space {i}: identity residual {:.3e}, min eigenvalue {:.3e}",
                    rec.step,
                    report.identity_residual,
                    report.min_eigenvalue()
                ));
            }
            if c.certificate.omega != h.omega || c.certificate.nu != h.nu {
                problems.push(format!(
                    "step {} half-space {i}: does not match its certificate",
                    rec.step
                ));
            }
        }
        println!(
            "step {:4}: {} certificates, max identity residual {worst:.2e}",
            rec.step,
            rec.certificates.len()
        );
    }
    if problems.is_empty() {
        println!("all {total} certificates verified");
        Ok(())
    } else {
        for p in &problems {
            eprintln!("{p}");
        }
        Err(CliError::Verification(format!(
            "{} problem(s)",
            problems.len()
        )))
    }
}
