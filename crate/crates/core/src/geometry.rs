//! Semialgebraic sets, half-spaces, polytopes and boxes, plus the seeded
//! sampling used for Monte-Carlo volume estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::Polynomial;
use crate::sdp::{self, LinearFunctional, SdpOptions, SdpProblem, SdpStatus};

/// Default tolerance for membership tests.
pub const CONTAINS_TOL: f64 = 1e-9;

/// Named generator behind every sampling routine.
pub type SampleRng = ChaCha8Rng;

pub fn sample_rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `{z : h_s(z) <= 0 for every s}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemialgebraicSet {
    n_vars: usize,
    constraints: Vec<Polynomial>,
}

impl SemialgebraicSet {
    pub fn new(n_vars: usize, constraints: Vec<Polynomial>) -> Result<Self> {
        for h in &constraints {
            if h.n_vars() != n_vars {
                return Err(Error::dims("set constraint", n_vars, h.n_vars()));
            }
        }
        Ok(SemialgebraicSet {
            n_vars,
            constraints,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn push(&mut self, h: Polynomial) -> Result<()> {
        if h.n_vars() != self.n_vars {
            return Err(Error::dims("set constraint", self.n_vars, h.n_vars()));
        }
        self.constraints.push(h);
        Ok(())
    }

    /// Largest constraint value at `point` (`-inf` for an unconstrained set).
    pub fn max_violation(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n_vars {
            return Err(Error::dims("point", self.n_vars, point.len()));
        }
        let mut worst = f64::NEG_INFINITY;
        for h in &self.constraints {
            worst = worst.max(h.evaluate(point)?);
        }
        Ok(worst)
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        Ok(self.max_violation(point)? <= tol)
    }
}

#[derive(Deserialize)]
struct SetJson {
    n_vars: usize,
    constraints: Vec<Polynomial>,
}

impl<'de> Deserialize<'de> for SemialgebraicSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SetJson::deserialize(d)?;
        SemialgebraicSet::new(raw.n_vars, raw.constraints).map_err(serde::de::Error::custom)
    }
}

/// `{ρ : ωᵀρ <= ν}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HalfSpaceJson")]
pub struct HalfSpace {
    pub omega: Vec<f64>,
    pub nu: f64,
}

#[derive(Deserialize)]
struct HalfSpaceJson {
    omega: Vec<f64>,
    nu: f64,
}

impl TryFrom<HalfSpaceJson> for HalfSpace {
    type Error = Error;
    fn try_from(raw: HalfSpaceJson) -> Result<Self> {
        HalfSpace::new(raw.omega, raw.nu)
    }
}

impl HalfSpace {
    pub fn new(omega: Vec<f64>, nu: f64) -> Result<Self> {
        if omega.is_empty() || omega.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput(
                "half-space normal must be nonzero".into(),
            ));
        }
        if !nu.is_finite() || omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("half-space data must be finite".into()));
        }
        Ok(HalfSpace { omega, nu })
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// `ωᵀρ − ν`; non-positive inside.
    pub fn slack(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.omega.len() {
            return Err(Error::dims("point", self.omega.len(), point.len()));
        }
        Ok(dot(&self.omega, point) - self.nu)
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        Ok(self.slack(point)? <= tol)
    }

    /// The constraint `ωᵀρ − ν <= 0` as a degree-1 polynomial.
    pub fn to_polynomial(&self) -> Polynomial {
        Polynomial::affine(&self.omega, -self.nu)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intersection of half-spaces. An empty intersection is allowed: it is how
/// an inconsistent measurement shows up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeJson")]
pub struct Polytope {
    halfspaces: Vec<HalfSpace>,
}

#[derive(Deserialize)]
struct PolytopeJson {
    halfspaces: Vec<HalfSpace>,
}

impl TryFrom<PolytopeJson> for Polytope {
    type Error = Error;
    fn try_from(raw: PolytopeJson) -> Result<Self> {
        Polytope::new(raw.halfspaces)
    }
}

impl Polytope {
    pub fn new(halfspaces: Vec<HalfSpace>) -> Result<Self> {
        if let Some(first) = halfspaces.first() {
            for h in &halfspaces {
                if h.dim() != first.dim() {
                    return Err(Error::dims("polytope half-space", first.dim(), h.dim()));
                }
            }
        }
        Ok(Polytope { halfspaces })
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.halfspaces.first().map(HalfSpace::dim)
    }

    pub fn push(&mut self, h: HalfSpace) -> Result<()> {
        if let Some(n) = self.dim() {
            if h.dim() != n {
                return Err(Error::dims("polytope half-space", n, h.dim()));
            }
        }
        self.halfspaces.push(h);
        Ok(())
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        for h in &self.halfspaces {
            if !h.contains(point, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The half-spaces as affine constraints `ωᵀρ − ν <= 0`.
    pub fn to_constraints(&self) -> Vec<Polynomial> {
        self.halfspaces
            .iter()
            .map(HalfSpace::to_polynomial)
            .collect()
    }

    /// Decides whether the intersection is non-empty with a small LP solved by
    /// the interior-point code: find `x` and `s >= 0` with `ω_jᵀx + s_j = ν_j`.
    pub fn is_feasible(&self, options: &SdpOptions) -> Result<bool> {
        let Some(n) = self.dim() else {
            return Ok(true);
        };
        let mut p = SdpProblem::new();
        let x: Vec<usize> = (0..n).map(|_| p.add_free()).collect();
        for h in &self.halfspaces {
            let s = p.add_nonneg();
            let mut f = LinearFunctional::new().scalar(s, 1.0);
            for (i, &w) in h.omega.iter().enumerate() {
                if w != 0.0 {
                    f.push_scalar(x[i], w);
                }
            }
            p.add_equality(f, h.nu)?;
        }
        let sol = sdp::solve(&p, options)?;
        match sol.status {
            SdpStatus::Optimal => Ok(true),
            SdpStatus::Infeasible => Ok(false),
            status => Err(Error::Solver {
                status,
                context: "polytope feasibility probe".into(),
            }),
        }
    }
}

/// Axis-aligned box `lower <= ρ <= upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxJson")]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Deserialize)]
struct BoxJson {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxJson> for BoundingBox {
    type Error = Error;
    fn try_from(raw: BoxJson) -> Result<Self> {
        BoundingBox::new(raw.lower, raw.upper)
    }
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dims("box bounds", lower.len(), upper.len()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidInput(format!("box side {i} is not finite")));
            }
            if l > u {
                return Err(Error::InvalidInput(format!(
                    "box side {i} has lower {l} above upper {u}"
                )));
            }
        }
        Ok(BoundingBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        if point.len() != self.dim() {
            return Err(Error::dims("point", self.dim(), point.len()));
        }
        Ok(point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol))
    }

    /// Widen every side whose width is below `min_width` by `pad` on each end.
    pub fn inflate_thin(&self, min_width: f64, pad: f64) -> BoundingBox {
        let mut out = self.clone();
        for i in 0..self.dim() {
            if self.upper[i] - self.lower[i] < min_width {
                out.lower[i] -= pad;
                out.upper[i] += pad;
            }
        }
        out
    }

    /// The `2n` faces `±ρ_i <= ±bound`, in the order `+e_1, −e_1, +e_2, …`.
    pub fn to_halfspaces(&self) -> Vec<HalfSpace> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            out.push(HalfSpace {
                omega: e.clone(),
                nu: self.upper[i],
            });
            e[i] = -1.0;
            out.push(HalfSpace {
                omega: e,
                nu: -self.lower[i],
            });
        }
        out
    }

    pub fn to_polytope(&self) -> Polytope {
        Polytope {
            halfspaces: self.to_halfspaces(),
        }
    }
}

/// `n` points i.i.d. uniform in the box, from a ChaCha8 stream seeded with `seed`.
pub fn sample_uniform_box(bx: &BoundingBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = sample_rng(seed);
    sample_uniform_box_with(bx, n, &mut rng)
}

pub fn sample_uniform_box_with<R: Rng>(bx: &BoundingBox, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            bx.lower
                .iter()
                .zip(&bx.upper)
                .map(|(&l, &u)| {
                    let x = l + (u - l) * rng.random::<f64>();
                    x.min(u)
                })
                .collect()
        })
        .collect()
}

/// `Vol(B) · hits / N` with `N` fresh uniform points.
pub fn mc_volume<F>(inside: F, bx: &BoundingBox, n: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> bool,
{
    if n == 0 {
        return Err(Error::Sampling(
            "Monte-Carlo volume needs at least one point".into(),
        ));
    }
    let points = sample_uniform_box(bx, n, seed);
    Ok(mc_volume_on(inside, bx, &points))
}

/// Same estimate on a caller-supplied cloud, so that several regions can be
/// compared on identical points.
pub fn mc_volume_on<F>(inside: F, bx: &BoundingBox, points: &[Vec<f64>]) -> f64
where
    F: Fn(&[f64]) -> bool,
{
    if points.is_empty() {
        return 0.0;
    }
    let hits = points.iter().filter(|p| inside(p)).count();
    bx.volume() * hits as f64 / points.len() as f64
}

/// Up to `n_target` points of `set`, drawn uniformly from `bx` and kept when
/// inside. Fails only if no point at all is found within `max_tries` draws.
pub fn rejection_sample(
    set: &SemialgebraicSet,
    bx: &BoundingBox,
    n_target: usize,
    max_tries: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if bx.dim() != set.n_vars() {
        return Err(Error::dims("sampling box", set.n_vars(), bx.dim()));
    }
    let mut rng = sample_rng(seed);
    let mut out = Vec::with_capacity(n_target);
    let mut tries = 0;
    while out.len() < n_target && tries < max_tries {
        let p = sample_uniform_box_with(bx, 1, &mut rng).pop().unwrap();
        tries += 1;
        if set.contains(&p, 0.0)? {
            out.push(p);
        }
    }
    if out.is_empty() && n_target > 0 {
        return Err(Error::Sampling(format!(
            "no point of the set found in {max_tries} draws"
        )));
    }
    Ok(out)
}
