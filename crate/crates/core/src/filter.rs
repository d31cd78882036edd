//! The set-membership filter: per-step augmented sets, certified bounding
//! boxes, greedy polytope construction and point-wise refinement.
//!
//! At step `k` the unknowns are `x̃ = [x(k); x(k−1)]` (state block first).
//! Every half-space produced here constrains the `x(k)` block only.

use std::time::Instant;

use log::{debug, trace, warn};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    sample_rng, sample_uniform_box_with, BoundingBox, HalfSpace, Polytope, SemialgebraicSet,
    CONTAINS_TOL,
};
use crate::polynomial::{binomial, MonomialBasis, Polynomial};
use crate::sdp::{self, LinearFunctional, SdpOptions, SdpStatus};
use crate::sos::{
    self, Direction, OmegaEntry, SosCertificate, SupportProgram, TOL_IDENTITY, TOL_PSD,
};

/// Box sides narrower than this are widened before sampling.
pub const THIN_WIDTH: f64 = 2e-6;
/// Per-side padding applied to thin box sides.
pub const THIN_PAD: f64 = 1e-6;

/// `x(k+1) = A_k q_d(x(k)) + w(k)`, `y(k) = C_k q_d(x(k)) + v(k)` with
/// `w ∈ W`, `v ∈ V`, `x(0) ∈ X_0`.
#[derive(Clone, Debug)]
pub struct SystemModel {
    n: usize,
    m_out: usize,
    degree: u32,
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    process_noise: SemialgebraicSet,
    measurement_noise: SemialgebraicSet,
    initial_set: SemialgebraicSet,
    a_schedule: Vec<DMatrix<f64>>,
    c_schedule: Vec<DMatrix<f64>>,
    basis: MonomialBasis,
}

impl SystemModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m_out: usize,
        degree: u32,
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        process_noise: SemialgebraicSet,
        measurement_noise: SemialgebraicSet,
        initial_set: SemialgebraicSet,
    ) -> Result<Self> {
        if n == 0 || m_out == 0 {
            return Err(Error::InvalidInput(
                "state and output dimensions must be positive".into(),
            ));
        }
        let s = binomial(n + degree as usize, degree as usize);
        check_shape("A", &a, n, s)?;
        check_shape("C", &c, m_out, s)?;
        for (name, set, dim) in [
            ("process noise set", &process_noise, n),
            ("measurement noise set", &measurement_noise, m_out),
            ("initial set", &initial_set, n),
        ] {
            if set.n_vars() != dim {
                return Err(Error::InvalidInput(format!(
                    "{name} has {} variables, expected {dim}",
                    set.n_vars()
                )));
            }
            if set.is_empty() {
                return Err(Error::InvalidInput(format!("{name} has no constraints")));
            }
        }
        Ok(SystemModel {
            n,
            m_out,
            degree,
            a,
            c,
            process_noise,
            measurement_noise,
            initial_set,
            a_schedule: Vec::new(),
            c_schedule: Vec::new(),
            basis: MonomialBasis::new(n, degree),
        })
    }

    /// Time-varying coefficients: `a_schedule[k]` replaces `A` when mapping
    /// `x(k)` to `x(k+1)`, `c_schedule[k-1]` replaces `C` at output time `k`.
    /// Steps past the end of a table use the constant matrix.
    pub fn with_schedule(
        mut self,
        a_schedule: Vec<DMatrix<f64>>,
        c_schedule: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let s = self.basis.len();
        for m in &a_schedule {
            check_shape("A schedule entry", m, self.n, s)?;
        }
        for m in &c_schedule {
            check_shape("C schedule entry", m, self.m_out, s)?;
        }
        self.a_schedule = a_schedule;
        self.c_schedule = c_schedule;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_out(&self) -> usize {
        self.m_out
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn initial_set(&self) -> &SemialgebraicSet {
        &self.initial_set
    }

    pub fn process_noise(&self) -> &SemialgebraicSet {
        &self.process_noise
    }

    pub fn measurement_noise(&self) -> &SemialgebraicSet {
        &self.measurement_noise
    }

    /// `⌈d/2⌉ + 1`.
    pub fn default_sos_half_degree(&self) -> u32 {
        self.degree.div_ceil(2) + 1
    }

    /// `A_k`, mapping `x(k)` to `x(k+1)`.
    pub fn state_matrix(&self, k: usize) -> &DMatrix<f64> {
        self.a_schedule.get(k).unwrap_or(&self.a)
    }

    /// `C_k`, used for `y(k)` (`k >= 1`).
    pub fn output_matrix(&self, k: usize) -> &DMatrix<f64> {
        k.checked_sub(1)
            .and_then(|i| self.c_schedule.get(i))
            .unwrap_or(&self.c)
    }

    /// Components of `A_k q_d(x)` as polynomials in `n` variables.
    pub fn state_map(&self, k: usize) -> Vec<Polynomial> {
        rows_as_polynomials(self.state_matrix(k), &self.basis)
    }

    /// Components of `C_k q_d(x)` as polynomials in `n` variables.
    pub fn output_map(&self, k: usize) -> Vec<Polynomial> {
        rows_as_polynomials(self.output_matrix(k), &self.basis)
    }

    /// `x(k+1)` from `x(k)` and `w(k)`.
    pub fn next_state(&self, x: &[f64], w: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_len("state", x, self.n)?;
        self.check_len("process noise", w, self.n)?;
        let q = nalgebra::DVector::from_vec(self.basis.evaluate(x));
        let fx = self.state_matrix(k) * q;
        Ok(fx.iter().zip(w).map(|(f, w)| f + w).collect())
    }

    /// `y(k)` from `x(k)` and `v(k)`.
    pub fn output(&self, x: &[f64], v: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_len("state", x, self.n)?;
        self.check_len("measurement noise", v, self.m_out)?;
        let q = nalgebra::DVector::from_vec(self.basis.evaluate(x));
        let cx = self.output_matrix(k) * q;
        Ok(cx.iter().zip(v).map(|(c, v)| c + v).collect())
    }

    fn check_len(&self, what: &'static str, v: &[f64], n: usize) -> Result<()> {
        if v.len() != n {
            return Err(Error::dims(what, n, v.len()));
        }
        Ok(())
    }
}

fn check_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::InvalidInput(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} has non-finite entries"
        )));
    }
    Ok(())
}

fn rows_as_polynomials(m: &DMatrix<f64>, basis: &MonomialBasis) -> Vec<Polynomial> {
    (0..m.nrows())
        .map(|i| {
            let terms = basis
                .monomials()
                .iter()
                .enumerate()
                .map(|(j, mono)| (mono.clone(), m[(i, j)]));
            Polynomial::from_terms(basis.n_vars(), terms).expect("basis monomials match n")
        })
        .collect()
}

/// States `x(0), …, x(T)` and outputs `y(1), …, y(T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

/// Iterates the model exactly: `process_noise[k]` is `w(k)` and
/// `measurement_noise[k-1]` is `v(k)`.
pub fn simulate(
    model: &SystemModel,
    x0: &[f64],
    process_noise: &[Vec<f64>],
    measurement_noise: &[Vec<f64>],
    horizon: usize,
) -> Result<Trajectory> {
    if process_noise.len() < horizon {
        return Err(Error::dims(
            "process noise draws",
            horizon,
            process_noise.len(),
        ));
    }
    if measurement_noise.len() < horizon {
        return Err(Error::dims(
            "measurement noise draws",
            horizon,
            measurement_noise.len(),
        ));
    }
    if !model.initial_set.contains(x0, CONTAINS_TOL)? {
        warn!("simulation starts outside the initial set: {x0:?}");
    }
    let mut states = vec![x0.to_vec()];
    let mut outputs = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let next = model.next_state(&states[k], &process_noise[k], k)?;
        outputs.push(model.output(&next, &measurement_noise[k], k + 1)?);
        states.push(next);
    }
    Ok(Trajectory { states, outputs })
}

/// What is known about `x(k)` after step `k`: constraints `g(x) <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub step: usize,
    pub constraints: Vec<Polynomial>,
    pub polytope: Option<Polytope>,
    pub bounding_box: Option<BoundingBox>,
}

impl FilterState {
    pub fn initial(model: &SystemModel) -> Self {
        FilterState {
            step: 0,
            constraints: model.initial_set.constraints().to_vec(),
            polytope: None,
            bounding_box: None,
        }
    }
}

/// `X_k` over `x̃ = [x(k); x(k−1)]`: process-noise constraints with
/// `w = x(k) − a(x(k−1))`, measurement-noise constraints with
/// `v = y(k) − c(x(k))`, and the previous constraints on `x(k−1)`.
pub fn build_step_set(
    model: &SystemModel,
    state: &FilterState,
    y: &[f64],
) -> Result<SemialgebraicSet> {
    let n = model.n;
    if y.len() != model.m_out {
        return Err(Error::dims("measurement", model.m_out, y.len()));
    }
    let k = state.step + 1;
    let total = 2 * n;

    let mut w_images = Vec::with_capacity(n);
    for (i, a_i) in model.state_map(k - 1).iter().enumerate() {
        w_images.push(Polynomial::var(total, i).try_sub(&a_i.lift(total, n)?)?);
    }
    let mut v_images = Vec::with_capacity(model.m_out);
    for (j, c_j) in model.output_map(k).iter().enumerate() {
        v_images.push(Polynomial::constant(total, y[j]).try_sub(&c_j.lift(total, 0)?)?);
    }

    let mut constraints = Vec::new();
    for h in model.process_noise.constraints() {
        constraints.push(h.substitute(&w_images)?);
    }
    for h in model.measurement_noise.constraints() {
        constraints.push(h.substitute(&v_images)?);
    }
    for g in &state.constraints {
        if g.n_vars() != n {
            return Err(Error::dims("state constraint", n, g.n_vars()));
        }
        constraints.push(g.lift(total, n)?);
    }
    SemialgebraicSet::new(total, constraints)
}

/// Knobs shared by the box, greedy and refinement searches.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchParams {
    pub sos_half_degree: u32,
    pub sdp: SdpOptions,
    /// Bound on the free components of `ω` in the split programs.
    pub omega_bound: f64,
    /// A point is excluded only when its certified objective is below `−tol_exclude`.
    pub tol_exclude: f64,
    /// Half-spaces allowed beyond the `2n` box faces (`None`: unlimited).
    pub max_halfspaces: Option<usize>,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            sos_half_degree: 2,
            sdp: SdpOptions::default(),
            omega_bound: 1e3,
            tol_exclude: 1e-7,
            max_halfspaces: None,
        }
    }
}

fn certificate_ok(cert: &SosCertificate, set: &SemialgebraicSet) -> Result<bool> {
    let report = sos::verify_certificate(cert, set, TOL_IDENTITY, TOL_PSD)?;
    if !report.passed {
        warn!(
            "certificate rejected: identity residual {:.3e}, min eigenvalue {:.3e}",
            report.identity_residual,
            report.min_eigenvalue()
        );
    }
    Ok(report.passed)
}

/// Certified axis-aligned box around the `x(k)` block (its first `dim`
/// variables) of `set`, with one certificate per face in the order
/// `+e_1, −e_1, +e_2, …`.
///
/// A face query that comes back `Unbounded` proves the set is empty and is
/// returned as a solver error with that status.
pub fn bounding_box(
    set: &SemialgebraicSet,
    dim: usize,
    sos_half_degree: u32,
    options: &SdpOptions,
) -> Result<(BoundingBox, Vec<SosCertificate>)> {
    let directions: Vec<Vec<f64>> = (0..2 * dim)
        .map(|f| {
            let mut e = vec![0.0; dim];
            e[f / 2] = if f % 2 == 0 { 1.0 } else { -1.0 };
            e
        })
        .collect();
    let certs: Vec<Result<SosCertificate>> = directions
        .par_iter()
        .map(|e| sos::min_halfspace_offset(set, e, sos_half_degree, options))
        .collect();
    let mut out = Vec::with_capacity(certs.len());
    for (f, c) in certs.into_iter().enumerate() {
        let c = c.map_err(|e| match e {
            Error::Solver { status, .. } => Error::Solver {
                status,
                context: format!(
                    "bounding box face {}{}",
                    if f % 2 == 0 { "+" } else { "-" },
                    f / 2 + 1
                ),
            },
            other => other,
        })?;
        if !certificate_ok(&c, set)? {
            return Err(Error::Solver {
                status: SdpStatus::NumericalFailure,
                context: format!("bounding box face {} failed verification", f),
            });
        }
        out.push(c);
    }
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for i in 0..dim {
        upper.push(out[2 * i].nu);
        lower.push(-out[2 * i + 1].nu);
    }
    for i in 0..dim {
        if lower[i] > upper[i] {
            let gap = lower[i] - upper[i];
            if gap > 1e-6 * (1.0 + upper[i].abs()) {
                return Err(Error::Solver {
                    status: SdpStatus::Unbounded,
                    context: format!(
                        "bounding box side {} is empty ({} > {})",
                        i + 1,
                        lower[i],
                        upper[i]
                    ),
                });
            }
            // solver-level disagreement on a degenerate side: keep the
            // weaker of the two readings, which both faces still certify
            std::mem::swap(&mut lower[i], &mut upper[i]);
        }
    }
    Ok((BoundingBox::new(lower, upper)?, out))
}

/// A half-space found by one greedy iteration.
#[derive(Clone, Debug)]
pub struct GreedyStep {
    pub halfspace: HalfSpace,
    pub certificate: SosCertificate,
    /// Hinge objective `Σ max(0, ν − ωᵀp_i)` at the optimum.
    pub objective: f64,
    /// Indices (into the input list) of points with `ωᵀp <= ν`.
    pub retained: Vec<usize>,
}

fn solve_split_pair<F>(build: F) -> Vec<(f64, Option<(SupportProgram, sdp::SdpSolution)>)>
where
    F: Fn(f64) -> Result<Option<(f64, SupportProgram, sdp::SdpSolution)>> + Sync,
{
    let (a, b) = rayon::join(|| build(1.0), || build(-1.0));
    [a, b]
        .into_iter()
        .map(|r| match r {
            Ok(Some((obj, p, s))) => (obj, Some((p, s))),
            Ok(None) => (f64::INFINITY, None),
            Err(e) => {
                warn!("split program failed: {e}");
                (f64::INFINITY, None)
            }
        })
        .collect()
}

/// One step of the greedy construction: the certified half-space that keeps
/// the fewest points, with the point count relaxed to a sum of hinge losses
/// and `ω_1` normalized to `+1` and `−1` in two separate programs.
pub fn greedy_halfspace(
    set: &SemialgebraicSet,
    dim: usize,
    points: &[Vec<f64>],
    params: &SearchParams,
) -> Result<GreedyStep> {
    for p in points {
        if p.len() != dim {
            return Err(Error::dims("sample point", dim, p.len()));
        }
    }
    let build = |sign: f64| -> Result<Option<(f64, SupportProgram, sdp::SdpSolution)>> {
        let mut prog = SupportProgram::new(
            set,
            &Direction::Split {
                sign,
                dim,
                bound: params.omega_bound,
            },
            params.sos_half_degree,
        )?;
        let mut objective = LinearFunctional::new();
        if points.is_empty() {
            objective.push_scalar(prog.nu, 1.0);
        }
        for p in points {
            // t − ν + Σ_{k>=1} ω_k p_k − s = −sign·p_1, i.e. t = ν − ωᵀp + s
            let t = prog.problem.add_nonneg();
            let s = prog.problem.add_nonneg();
            let mut f = LinearFunctional::new()
                .scalar(t, 1.0)
                .scalar(prog.nu, -1.0)
                .scalar(s, -1.0);
            for (k, entry) in prog.omega.iter().enumerate() {
                if let OmegaEntry::Var(v) = *entry {
                    f.push_scalar(v, p[k]);
                }
            }
            prog.problem.add_equality(f, -sign * p[0])?;
            objective.push_scalar(t, 1.0);
        }
        prog.problem.set_objective(objective)?;
        let sol = sdp::solve(&prog.problem, &params.sdp)?;
        if sol.status != SdpStatus::Optimal {
            debug!("greedy split {sign:+} ended with {:?}", sol.status);
            return Ok(None);
        }
        Ok(Some((sol.objective_value, prog, sol)))
    };
    let results = solve_split_pair(build);
    let best = results
        .into_iter()
        .enumerate()
        .filter(|(_, (_, r))| r.is_some())
        .min_by(|(_, (a, _)), (_, (b, _))| a.total_cmp(b));
    let Some((_, (objective, Some((prog, sol))))) = best else {
        return Err(Error::Solver {
            status: SdpStatus::NumericalFailure,
            context: "both greedy split programs failed".into(),
        });
    };
    let certificate = prog.certificate(&sol);
    let halfspace = certificate.halfspace()?;
    let retained = points
        .iter()
        .enumerate()
        .filter(|(_, p)| halfspace.slack(p).map(|s| s <= 0.0).unwrap_or(false))
        .map(|(i, _)| i)
        .collect();
    Ok(GreedyStep {
        halfspace,
        certificate,
        objective,
        retained,
    })
}

/// Result of the greedy construction.
#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    /// Box faces followed by the added half-spaces.
    pub polytope: Polytope,
    /// Certificates of the added half-spaces, in order.
    pub certificates: Vec<SosCertificate>,
    /// Indices of input points inside the final polytope.
    pub retained: Vec<usize>,
}

/// Repeats [`greedy_halfspace`] on the surviving points until an iteration
/// discards nothing or the half-space budget is spent. Points are assumed to
/// lie in `bbox`.
pub fn greedy_polytope(
    set: &SemialgebraicSet,
    bbox: &BoundingBox,
    points: &[Vec<f64>],
    params: &SearchParams,
) -> Result<GreedyOutcome> {
    let dim = bbox.dim();
    let mut polytope = bbox.to_polytope();
    let mut certificates = Vec::new();
    let mut current: Vec<usize> = (0..points.len()).collect();
    loop {
        if params
            .max_halfspaces
            .is_some_and(|cap| certificates.len() >= cap)
        {
            break;
        }
        let subset: Vec<Vec<f64>> = current.iter().map(|&i| points[i].clone()).collect();
        let step = match greedy_halfspace(set, dim, &subset, params) {
            Ok(s) => s,
            Err(e) if !certificates.is_empty() => {
                warn!("greedy iteration failed, keeping the polytope so far: {e}");
                break;
            }
            Err(e) => return Err(e),
        };
        if step.retained.len() >= current.len() {
            break;
        }
        if !certificate_ok(&step.certificate, set)? {
            break;
        }
        debug!(
            "greedy half-space {:?} <= {} keeps {}/{} points",
            step.halfspace.omega,
            step.halfspace.nu,
            step.retained.len(),
            current.len()
        );
        current = step.retained.iter().map(|&j| current[j]).collect();
        polytope.push(step.halfspace)?;
        certificates.push(step.certificate);
    }
    Ok(GreedyOutcome {
        polytope,
        certificates,
        retained: current,
    })
}

/// Best certified separation of `point` from the set: the split program
/// minimizing `ν − ωᵀp`, returned with its objective value.
pub fn separate_point(
    set: &SemialgebraicSet,
    point: &[f64],
    params: &SearchParams,
) -> Result<Option<(f64, SosCertificate)>> {
    let dim = point.len();
    let build = |sign: f64| -> Result<Option<(f64, SupportProgram, sdp::SdpSolution)>> {
        let mut prog = SupportProgram::new(
            set,
            &Direction::Split {
                sign,
                dim,
                bound: params.omega_bound,
            },
            params.sos_half_degree,
        )?;
        let mut objective = LinearFunctional::new().scalar(prog.nu, 1.0);
        for (k, entry) in prog.omega.iter().enumerate() {
            if let OmegaEntry::Var(v) = *entry {
                objective.push_scalar(v, -point[k]);
            }
        }
        prog.problem.set_objective(objective)?;
        let sol = sdp::solve(&prog.problem, &params.sdp)?;
        if sol.status != SdpStatus::Optimal {
            debug!("separation split {sign:+} ended with {:?}", sol.status);
            return Ok(None);
        }
        Ok(Some((sol.objective_value - sign * point[0], prog, sol)))
    };
    let best = solve_split_pair(build)
        .into_iter()
        .filter(|(_, r)| r.is_some())
        .min_by(|(a, _), (b, _)| a.total_cmp(b));
    Ok(best.map(|(obj, r)| {
        let (prog, sol) = r.unwrap();
        (obj, prog.certificate(&sol))
    }))
}

/// Point-wise refinement: for each point still inside the polytope, add the
/// certified half-space that cuts it off whenever one exists. `already_added`
/// counts half-spaces already spent against `params.max_halfspaces`.
pub fn refine_polytope(
    set: &SemialgebraicSet,
    polytope: &Polytope,
    points: &[Vec<f64>],
    already_added: usize,
    params: &SearchParams,
) -> Result<(Polytope, Vec<SosCertificate>)> {
    let mut out = polytope.clone();
    let mut certificates = Vec::new();
    for p in points {
        if params
            .max_halfspaces
            .is_some_and(|cap| already_added + certificates.len() >= cap)
        {
            break;
        }
        if !out.contains(p, 0.0)? {
            continue;
        }
        let separation = separate_point(set, p, params)?;
        if let Some((obj, _)) = &separation {
            trace!("separation objective {obj:.3e} at {p:?}");
        }
        match separation {
            Some((obj, cert)) if obj < -params.tol_exclude => {
                if certificate_ok(&cert, set)? {
                    debug!("refinement cuts {p:?} (objective {obj:.3e})");
                    out.push(cert.halfspace()?)?;
                    certificates.push(cert);
                }
            }
            Some(_) => {}
            None => warn!("no separation program solved for point {p:?}; point kept"),
        }
    }
    Ok((out, certificates))
}

/// Filter configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// `None` picks `⌈d/2⌉ + 1` from the model degree.
    pub sos_half_degree: Option<u32>,
    /// Sample points per step for the greedy and refinement phases.
    pub points: usize,
    pub max_halfspaces: Option<usize>,
    pub seed: u64,
    pub omega_bound: f64,
    pub tol_exclude: f64,
    pub horizon: usize,
    /// Points used for the reported Monte-Carlo volume estimates.
    pub mc_points: usize,
    pub sdp: SdpOptions,
    /// Record wall-clock times per phase (makes output non-reproducible).
    pub timings: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            sos_half_degree: None,
            points: 20,
            max_halfspaces: None,
            seed: 0,
            omega_bound: 1e3,
            tol_exclude: 1e-7,
            horizon: 1,
            mc_points: 10_000,
            sdp: SdpOptions::default(),
            timings: false,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidInput("points must be at least 1".into()));
        }
        if self.sos_half_degree == Some(0) {
            return Err(Error::DegreeTooSmall {
                given: 0,
                required: 1,
            });
        }
        if self.omega_bound.is_nan() || self.omega_bound <= 0.0 {
            return Err(Error::InvalidInput("omega_bound must be positive".into()));
        }
        if self.tol_exclude.is_nan() || self.tol_exclude < 0.0 {
            return Err(Error::InvalidInput(
                "tol_exclude must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn search_params(&self, model: &SystemModel) -> SearchParams {
        SearchParams {
            sos_half_degree: self
                .sos_half_degree
                .unwrap_or_else(|| model.default_sos_half_degree()),
            sdp: self.sdp.clone(),
            omega_bound: self.omega_bound,
            tol_exclude: self.tol_exclude,
            max_halfspaces: self.max_halfspaces,
        }
    }
}

/// Where a polytope half-space came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSpaceSource {
    BoxFace,
    Greedy,
    Refinement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedHalfSpace {
    pub source: HalfSpaceSource,
    pub certificate: SosCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTimings {
    pub bounding_box_s: f64,
    pub greedy_s: f64,
    pub refinement_s: f64,
    pub total_s: f64,
}

/// Everything produced at one step, in a form that can be re-verified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub measurement: Vec<f64>,
    /// The step set `X_k` over `[x(k); x(k−1)]`, needed to re-check certificates.
    pub set: SemialgebraicSet,
    pub bounding_box: BoundingBox,
    /// Box faces, then greedy half-spaces, then refinement half-spaces.
    pub polytope: Polytope,
    /// One entry per polytope half-space, same order.
    pub certificates: Vec<CertifiedHalfSpace>,
    pub box_volume: f64,
    pub polytope_volume_mc: f64,
    pub mc_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StepTimings>,
}

fn step_rng(seed: u64, step: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = sample_rng(seed ^ step as u64);
    rng.set_stream(stream);
    rng
}

/// One full filter step: box, greedy polytope, refinement, emptiness probe.
pub fn filter_step(
    model: &SystemModel,
    state: &FilterState,
    y: &[f64],
    config: &FilterConfig,
) -> Result<(FilterState, StepRecord)> {
    let k = state.step + 1;
    let n = model.n;
    let params = config.search_params(model);
    let t0 = Instant::now();

    let set = build_step_set(model, state, y)?;
    let (bbox, box_certs) = match bounding_box(&set, n, params.sos_half_degree, &params.sdp) {
        Ok(b) => b,
        Err(Error::Solver {
            status: SdpStatus::Unbounded,
            ..
        }) => return Err(Error::InconsistentMeasurement { step: k }),
        Err(e) => return Err(e),
    };
    let t_box = t0.elapsed().as_secs_f64();

    let sample_box = bbox.inflate_thin(THIN_WIDTH, THIN_PAD);
    let points =
        sample_uniform_box_with(&sample_box, config.points, &mut step_rng(config.seed, k, 0));
    let greedy = greedy_polytope(&set, &bbox, &points, &params)?;
    let t_greedy = t0.elapsed().as_secs_f64();

    let survivors: Vec<Vec<f64>> = greedy.retained.iter().map(|&i| points[i].clone()).collect();
    let (polytope, refine_certs) = refine_polytope(
        &set,
        &greedy.polytope,
        &survivors,
        greedy.certificates.len(),
        &params,
    )?;
    let t_refine = t0.elapsed().as_secs_f64();

    if !polytope.is_feasible(&params.sdp)? {
        return Err(Error::InconsistentMeasurement { step: k });
    }

    let mut certificates: Vec<CertifiedHalfSpace> = box_certs
        .into_iter()
        .map(|c| CertifiedHalfSpace {
            source: HalfSpaceSource::BoxFace,
            certificate: c,
        })
        .collect();
    certificates.extend(greedy.certificates.into_iter().map(|c| CertifiedHalfSpace {
        source: HalfSpaceSource::Greedy,
        certificate: c,
    }));
    certificates.extend(refine_certs.into_iter().map(|c| CertifiedHalfSpace {
        source: HalfSpaceSource::Refinement,
        certificate: c,
    }));

    let mc = sample_uniform_box_with(
        &sample_box,
        config.mc_points,
        &mut step_rng(config.seed, k, 1),
    );
    let polytope_volume_mc = crate::geometry::mc_volume_on(
        |p| polytope.contains(p, CONTAINS_TOL).unwrap_or(false),
        &sample_box,
        &mc,
    );

    let record = StepRecord {
        step: k,
        measurement: y.to_vec(),
        set,
        box_volume: bbox.volume(),
        bounding_box: bbox.clone(),
        polytope: polytope.clone(),
        certificates,
        polytope_volume_mc,
        mc_points: config.mc_points,
        timings: config.timings.then(|| StepTimings {
            bounding_box_s: t_box,
            greedy_s: t_greedy - t_box,
            refinement_s: t_refine - t_greedy,
            total_s: t0.elapsed().as_secs_f64(),
        }),
    };
    let next = FilterState {
        step: k,
        constraints: polytope.to_constraints(),
        polytope: Some(polytope),
        bounding_box: Some(bbox),
    };
    Ok((next, record))
}

/// Runs [`filter_step`] over `measurements` (`y(1), y(2), …`), calling
/// `on_step` after each step.
pub fn run_filter<F>(
    model: &SystemModel,
    measurements: &[Vec<f64>],
    config: &FilterConfig,
    mut on_step: F,
) -> Result<Vec<StepRecord>>
where
    F: FnMut(&StepRecord),
{
    config.validate()?;
    let mut state = FilterState::initial(model);
    let mut records = Vec::with_capacity(measurements.len());
    for y in measurements {
        let (next, record) = filter_step(model, &state, y, config)?;
        on_step(&record);
        records.push(record);
        state = next;
    }
    Ok(records)
}
