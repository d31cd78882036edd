//! JSON scenario files: a model, filter settings, and either a simulation
//! recipe or recorded measurements.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{simulate, FilterConfig, SystemModel, Trajectory};
use crate::geometry::{sample_rng, sample_uniform_box_with, BoundingBox, SemialgebraicSet};
use crate::polynomial::Polynomial;

pub const SCENARIO_VERSION: u32 = 1;

/// Scenario files shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "lotka_volterra",
        include_str!("../scenarios/lotka_volterra.json"),
    ),
    ("example1", include_str!("../scenarios/example1.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// `‖z − c‖_∞ <= r` as `±(z_i − c_i) − r <= 0`.
pub fn inf_norm_ball(dim: usize, radius: f64, center: &[f64]) -> Vec<Polynomial> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut coeffs = vec![0.0; dim];
            coeffs[i] = sign;
            out.push(Polynomial::affine(&coeffs, -sign * center[i] - radius));
        }
    }
    out
}

/// `‖z − c‖_2 <= r` as `Σ (z_i − c_i)² − r² <= 0`.
pub fn two_norm_ball(dim: usize, radius: f64, center: &[f64]) -> Polynomial {
    let mut acc = Polynomial::constant(dim, -radius * radius);
    for i in 0..dim {
        let mut coeffs = vec![0.0; dim];
        coeffs[i] = 1.0;
        let d = Polynomial::affine(&coeffs, -center[i]);
        acc = &acc + &(&d * &d);
    }
    acc
}

/// `lower <= z <= upper` as `z_i − u_i <= 0`, `l_i − z_i <= 0`.
pub fn box_constraints(bx: &BoundingBox) -> Vec<Polynomial> {
    bx.to_halfspaces()
        .iter()
        .map(|h| h.to_polynomial())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "inf")]
    Inf,
    #[serde(rename = "2")]
    Two,
}

/// A bounding set as written in a scenario file.
#[derive(Clone, Debug, PartialEq)]
pub enum SetSpec {
    Ball {
        norm: Norm,
        radius: f64,
        center: Option<Vec<f64>>,
    },
    Box(BoundingBox),
    Constraints {
        constraints: Vec<Polynomial>,
        sample_box: Option<BoundingBox>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetSpecJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm: Option<Norm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraints: Option<Vec<Polynomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_box: Option<BoundingBox>,
}

impl TryFrom<SetSpecJson> for SetSpec {
    type Error = String;
    fn try_from(raw: SetSpecJson) -> std::result::Result<Self, String> {
        match raw {
            SetSpecJson {
                norm: Some(norm),
                radius: Some(radius),
                center,
                lower: None,
                upper: None,
                constraints: None,
                sample_box: None,
            } => {
                if !radius.is_finite() || radius < 0.0 {
                    return Err(format!(
                        "radius must be finite and non-negative, got {radius}"
                    ));
                }
                Ok(SetSpec::Ball {
                    norm,
                    radius,
                    center,
                })
            }
            SetSpecJson {
                norm: None,
                radius: None,
                center: None,
                lower: Some(lower),
                upper: Some(upper),
                constraints: None,
                sample_box: None,
            } => BoundingBox::new(lower, upper)
                .map(SetSpec::Box)
                .map_err(|e| e.to_string()),
            SetSpecJson {
                norm: None,
                radius: None,
                center: None,
                lower: None,
                upper: None,
                constraints: Some(constraints),
                sample_box,
            } => Ok(SetSpec::Constraints {
                constraints,
                sample_box,
            }),
            _ => Err(
                "a set is given by {norm, radius[, center]}, {lower, upper}, \
                      or {constraints[, sample_box]}"
                    .into(),
            ),
        }
    }
}

impl From<&SetSpec> for SetSpecJson {
    fn from(spec: &SetSpec) -> Self {
        let mut out = SetSpecJson {
            norm: None,
            radius: None,
            center: None,
            lower: None,
            upper: None,
            constraints: None,
            sample_box: None,
        };
        match spec {
            SetSpec::Ball {
                norm,
                radius,
                center,
            } => {
                out.norm = Some(*norm);
                out.radius = Some(*radius);
                out.center = center.clone();
            }
            SetSpec::Box(b) => {
                out.lower = Some(b.lower.clone());
                out.upper = Some(b.upper.clone());
            }
            SetSpec::Constraints {
                constraints,
                sample_box,
            } => {
                out.constraints = Some(constraints.clone());
                out.sample_box = sample_box.clone();
            }
        }
        out
    }
}

impl Serialize for SetSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SetSpecJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SetSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        SetSpec::try_from(SetSpecJson::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl SetSpec {
    /// The set as polynomial constraints in `dim` variables.
    pub fn to_set(&self, dim: usize, what: &str) -> Result<SemialgebraicSet> {
        let check = |len: usize| {
            if len != dim {
                Err(Error::InvalidInput(format!(
                    "{what}: expected dimension {dim}, found {len}"
                )))
            } else {
                Ok(())
            }
        };
        let constraints = match self {
            SetSpec::Ball {
                norm,
                radius,
                center,
            } => {
                let zero = vec![0.0; dim];
                let c = center.as_deref().unwrap_or(&zero);
                check(c.len())?;
                match norm {
                    Norm::Inf => inf_norm_ball(dim, *radius, c),
                    Norm::Two => vec![two_norm_ball(dim, *radius, c)],
                }
            }
            SetSpec::Box(b) => {
                check(b.dim())?;
                box_constraints(b)
            }
            SetSpec::Constraints {
                constraints,
                sample_box,
            } => {
                for h in constraints {
                    check(h.n_vars())?;
                }
                if let Some(b) = sample_box {
                    check(b.dim())?;
                }
                constraints.clone()
            }
        };
        SemialgebraicSet::new(dim, constraints)
    }

    /// One point drawn uniformly from the set.
    pub fn sample<R: Rng>(&self, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            SetSpec::Ball {
                norm,
                radius,
                center,
            } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; dim]);
                let cube = BoundingBox::new(
                    c.iter().map(|x| x - radius).collect(),
                    c.iter().map(|x| x + radius).collect(),
                )?;
                loop {
                    let p = sample_uniform_box_with(&cube, 1, rng).pop().unwrap();
                    if *norm == Norm::Inf {
                        return Ok(p);
                    }
                    let r2: f64 = p.iter().zip(&c).map(|(x, c)| (x - c) * (x - c)).sum();
                    if r2 <= radius * radius {
                        return Ok(p);
                    }
                }
            }
            SetSpec::Box(b) => Ok(sample_uniform_box_with(b, 1, rng).pop().unwrap()),
            SetSpec::Constraints { sample_box, .. } => {
                let set = self.to_set(dim, "sampled set")?;
                let Some(b) = sample_box else {
                    let zero = vec![0.0; dim];
                    if set.contains(&zero, 0.0)? {
                        return Ok(zero);
                    }
                    return Err(Error::Sampling(
                        "constraint sets need a sample_box to be simulated".into(),
                    ));
                };
                for _ in 0..1_000_000 {
                    let p = sample_uniform_box_with(b, 1, rng).pop().unwrap();
                    if set.contains(&p, 0.0)? {
                        return Ok(p);
                    }
                }
                Err(Error::Sampling(
                    "no point of the set found in its sample_box".into(),
                ))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub m_out: usize,
    pub degree: u32,
    /// `n` rows over the monomials of `q_d`, graded-lex order.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub process_noise: SetSpec,
    pub measurement_noise: SetSpec,
    pub initial_set: SetSpec,
    #[serde(rename = "A_schedule", default, skip_serializing_if = "Vec::is_empty")]
    pub a_schedule: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "C_schedule", default, skip_serializing_if = "Vec::is_empty")]
    pub c_schedule: Vec<Vec<Vec<f64>>>,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|row| row.len() != c) {
        return Err(Error::InvalidInput(format!(
            "{name}: row {bad} has a different length"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl ModelSpec {
    pub fn build(&self) -> Result<SystemModel> {
        if self.degree > 8 || self.n > 8 || self.m_out > 64 {
            return Err(Error::InvalidInput(
                "model: n <= 8, degree <= 8 and m_out <= 64 are supported".into(),
            ));
        }
        let model = SystemModel::new(
            self.n,
            self.m_out,
            self.degree,
            matrix(&self.a, "model.A")?,
            matrix(&self.c, "model.C")?,
            self.process_noise.to_set(self.n, "model.process_noise")?,
            self.measurement_noise
                .to_set(self.m_out, "model.measurement_noise")?,
            self.initial_set.to_set(self.n, "model.initial_set")?,
        )?;
        let a_sched = self
            .a_schedule
            .iter()
            .map(|m| matrix(m, "model.A_schedule"))
            .collect::<Result<Vec<_>>>()?;
        let c_sched = self
            .c_schedule
            .iter()
            .map(|m| matrix(m, "model.C_schedule"))
            .collect::<Result<Vec<_>>>()?;
        model.with_schedule(a_sched, c_sched)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub x0: Vec<f64>,
    /// Seed of the noise draws (uniform within the noise sets).
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    /// Recorded `y(1), y(2), …`; used instead of a simulation when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurements: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// A parsed and validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub model: SystemModel,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Scenario::new(file)
    }

    pub fn new(file: ScenarioFile) -> Result<Self> {
        if file.version != SCENARIO_VERSION {
            return Err(Error::InvalidInput(format!(
                "version: unsupported scenario version {} (expected {SCENARIO_VERSION})",
                file.version
            )));
        }
        let model = file.model.build()?;
        file.filter
            .validate()
            .map_err(|e| Error::InvalidInput(format!("filter: {e}")))?;
        if let Some(sim) = &file.simulation {
            if sim.x0.len() != model.n() {
                return Err(Error::InvalidInput(format!(
                    "simulation.x0: expected {} entries, found {}",
                    model.n(),
                    sim.x0.len()
                )));
            }
        }
        if let Some(ys) = &file.measurements {
            if let Some(i) = ys.iter().position(|y| y.len() != model.m_out()) {
                return Err(Error::InvalidInput(format!(
                    "measurements[{i}]: expected {} entries",
                    model.m_out()
                )));
            }
        }
        if file.simulation.is_none() && file.measurements.is_none() {
            return Err(Error::InvalidInput(
                "scenario needs either simulation or measurements".into(),
            ));
        }
        Ok(Scenario { file, model })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario serialization is infallible")
    }

    /// Simulates the model over the filter horizon with uniform noises.
    pub fn simulate(&self) -> Result<Trajectory> {
        let sim = self
            .file
            .simulation
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("scenario has no simulation section".into()))?;
        let horizon = self.file.filter.horizon;
        let mut rng = sample_rng(sim.seed);
        let n = self.model.n();
        let m = self.model.m_out();
        let mut w = Vec::with_capacity(horizon);
        let mut v = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            w.push(self.file.model.process_noise.sample(n, &mut rng)?);
            v.push(self.file.model.measurement_noise.sample(m, &mut rng)?);
        }
        simulate(&self.model, &sim.x0, &w, &v, horizon)
    }

    /// Measurements to filter, plus the true trajectory when simulated.
    pub fn measurements(&self) -> Result<(Vec<Vec<f64>>, Option<Trajectory>)> {
        if let Some(ys) = &self.file.measurements {
            let h = self.file.filter.horizon.min(ys.len());
            return Ok((ys[..h].to_vec(), None));
        }
        let traj = self.simulate()?;
        Ok((traj.outputs.clone(), Some(traj)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, text) in BUNDLED {
            let s = Scenario::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.file.name, *name);
        }
    }

    #[test]
    fn lotka_volterra_dynamics() {
        let s = Scenario::from_json(bundled("lotka_volterra").unwrap()).unwrap();
        let x = s.model.next_state(&[0.8, 0.3], &[0.0, 0.0], 0).unwrap();
        let x1 = 0.8 * (1.25 - 0.25 * 0.8 - 0.95 * 0.3);
        let x2 = 1.1 * 0.8 * 0.3 + 0.45 * 0.3;
        assert!((x[0] - x1).abs() < 1e-15 && (x[1] - x2).abs() < 1e-15);
        assert_eq!(
            s.model.output(&[0.3, 0.8], &[0.01], 1).unwrap(),
            vec![1.1 + 0.01]
        );
    }

    #[test]
    fn example1_dynamics() {
        let s = Scenario::from_json(bundled("example1").unwrap()).unwrap();
        let (a, b) = (0.15, -0.07);
        let x = s.model.next_state(&[a, b], &[0.0, 0.0], 0).unwrap();
        assert!((x[0] - a * b * (a + b)).abs() < 1e-15);
        assert!((x[1] - a * b * (2.0 * a + b)).abs() < 1e-15);
    }

    #[test]
    fn set_specs() {
        let inf: SetSpec = serde_json::from_str(r#"{"norm":"inf","radius":0.5}"#).unwrap();
        let set = inf.to_set(2, "w").unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.contains(&[0.5, -0.5], 1e-12).unwrap());
        assert!(!set.contains(&[0.51, 0.0], 0.0).unwrap());
        let two: SetSpec = serde_json::from_str(r#"{"norm":"2","radius":0.4}"#).unwrap();
        let set = two.to_set(2, "w").unwrap();
        assert_eq!(set.len(), 1);
        assert!(!set.contains(&[0.3, 0.3], 0.0).unwrap());
        assert!(serde_json::from_str::<SetSpec>(r#"{"norm":"inf"}"#).is_err());
        assert!(serde_json::from_str::<SetSpec>(r#"{"norm":"1","radius":1}"#).is_err());
        assert!(serde_json::from_str::<SetSpec>(r#"{"lower":[1],"upper":[0]}"#).is_err());
    }

    #[test]
    fn sampled_noise_stays_in_set() {
        let mut rng = sample_rng(3);
        for text in [
            r#"{"norm":"inf","radius":0.1}"#,
            r#"{"norm":"2","radius":0.4,"center":[1,2]}"#,
        ] {
            let spec: SetSpec = serde_json::from_str(text).unwrap();
            let set = spec.to_set(2, "w").unwrap();
            for _ in 0..200 {
                let p = spec.sample(2, &mut rng).unwrap();
                assert!(set.contains(&p, 1e-12).unwrap());
            }
        }
    }

    #[test]
    fn malformed_scenarios_are_reported() {
        let base = bundled("lotka_volterra").unwrap();
        let wrong_version = base.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(Scenario::from_json(&wrong_version)
            .unwrap_err()
            .to_string()
            .contains("version"));
        let err = Scenario::from_json("{\"version\": 1,\n \"model\": {}}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
