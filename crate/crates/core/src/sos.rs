//! Putinar-type certificates that a half-space contains a semialgebraic set.
//!
//! For `X = {z : h_s(z) <= 0}` and a direction `ω` acting on the leading
//! `ω.len()` coordinates of `z`, the relaxation searches for SOS polynomials
//! `σ_0, …, σ_m` with
//!
//! ```text
//! ν − ωᵀx = σ_0(z) − Σ_s σ_s(z) h_s(z)
//! ```
//!
//! identically in `z`. Any such identity proves `ωᵀx <= ν` on `X`. Each
//! `σ_s = q_sᵀ Q_s q_s` with `Q_s ⪰ 0` over a monomial vector `q_s`, and the
//! identity is imposed coefficient by coefficient, giving an SDP.
//!
//! Degrees follow the usual truncation at relaxation order
//! `r = max(d̃, ⌈deg h_s / 2⌉, 1)`: `σ_0` has degree `2r` and `σ_s` has
//! degree `2(r − ⌈deg h_s / 2⌉)`, so every product stays within degree `2r`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SemialgebraicSet;
use crate::polynomial::{
    binomial, gram_expand, gram_linear_map, Monomial, MonomialBasis, Polynomial, MAX_VARS,
};
use crate::sdp::{
    self, min_eigenvalue, LinearFunctional, SdpOptions, SdpProblem, SdpSolution, SdpStatus,
};

/// Default bound on the identity residual accepted by [`verify_certificate`].
pub const TOL_IDENTITY: f64 = 1e-6;
/// Default bound on negative Gram eigenvalues accepted by [`verify_certificate`].
pub const TOL_PSD: f64 = 1e-8;

/// Largest Gram side accepted when reading a certificate from disk.
const MAX_SIDE: usize = 4096;

fn half_ceil(d: u32) -> u32 {
    d.div_ceil(2)
}

/// Relaxation order for `set` at SOS half-degree `d̃`.
pub fn relaxation_order(set: &SemialgebraicSet, sos_half_degree: u32) -> Result<u32> {
    if sos_half_degree == 0 {
        return Err(Error::DegreeTooSmall {
            given: 0,
            required: 1,
        });
    }
    let needed = set
        .constraints()
        .iter()
        .map(|h| half_ceil(h.degree()))
        .max()
        .unwrap_or(0);
    Ok(sos_half_degree.max(needed).max(1))
}

/// Half-degrees of the monomial vectors of `σ_0, σ_1, …, σ_m`.
pub fn multiplier_half_degrees(set: &SemialgebraicSet, order: u32) -> Vec<u32> {
    std::iter::once(order)
        .chain(
            set.constraints()
                .iter()
                .map(|h| order - half_ceil(h.degree())),
        )
        .collect()
}

/// How the normal `ω` enters the program.
#[derive(Clone, Debug, PartialEq)]
pub enum Direction {
    /// A fixed vector.
    Fixed(Vec<f64>),
    /// `ω_1 = sign` and `ω_2, …, ω_n` are decision variables with
    /// `|ω_i| <= bound` (no bound when `bound` is infinite).
    Split { sign: f64, dim: usize, bound: f64 },
}

/// One component of `ω` inside a [`SupportProgram`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OmegaEntry {
    Fixed(f64),
    Var(usize),
}

/// The SDP encoding of "`ωᵀx <= ν` holds on the set", with handles to the
/// variables so callers can add their own rows and objective.
#[derive(Clone, Debug)]
pub struct SupportProgram {
    pub problem: SdpProblem,
    /// Scalar index of `ν` (free).
    pub nu: usize,
    pub omega: Vec<OmegaEntry>,
    /// Block indices of `Q_0, …, Q_m`.
    pub blocks: Vec<usize>,
    pub half_degrees: Vec<u32>,
    pub order: u32,
    pub sos_half_degree: u32,
    n_vars: usize,
}

impl SupportProgram {
    pub fn new(
        set: &SemialgebraicSet,
        direction: &Direction,
        sos_half_degree: u32,
    ) -> Result<Self> {
        let n_vars = set.n_vars();
        let dim = match direction {
            Direction::Fixed(w) => {
                if w.iter().all(|&x| x == 0.0) {
                    return Err(Error::InvalidInput("direction must be nonzero".into()));
                }
                if w.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("direction must be finite".into()));
                }
                w.len()
            }
            Direction::Split { sign, dim, bound } => {
                if *sign != 1.0 && *sign != -1.0 {
                    return Err(Error::InvalidInput("split sign must be ±1".into()));
                }
                if bound.is_nan() || *bound <= 0.0 {
                    return Err(Error::InvalidInput(
                        "direction bound must be positive".into(),
                    ));
                }
                *dim
            }
        };
        if dim == 0 || dim > n_vars {
            return Err(Error::dims("direction", n_vars, dim));
        }
        let order = relaxation_order(set, sos_half_degree)?;
        let half_degrees = multiplier_half_degrees(set, order);

        let mut problem = SdpProblem::new();
        let nu = problem.add_free();
        let omega: Vec<OmegaEntry> = match direction {
            Direction::Fixed(w) => w.iter().map(|&x| OmegaEntry::Fixed(x)).collect(),
            Direction::Split { sign, dim, .. } => std::iter::once(OmegaEntry::Fixed(*sign))
                .chain((1..*dim).map(|_| OmegaEntry::Var(problem.add_free())))
                .collect(),
        };
        let bases: Vec<MonomialBasis> = half_degrees
            .iter()
            .map(|&k| MonomialBasis::new(n_vars, k))
            .collect();
        let mut blocks = Vec::with_capacity(bases.len());
        for b in &bases {
            blocks.push(problem.add_block(b.len())?);
        }
        // Estimate the size before expanding anything large.
        if problem.variable_count() > sdp::SdpOptions::default().max_variables {
            return Err(Error::ProblemTooLarge {
                count: problem.variable_count(),
                cap: sdp::SdpOptions::default().max_variables,
            });
        }

        // Coefficient rows, one per monomial of degree <= 2r.
        let rows = MonomialBasis::new(n_vars, 2 * order);
        let mut lhs: Vec<BTreeMap<(usize, usize, usize), f64>> = vec![BTreeMap::new(); rows.len()];
        let row_of = |m: &Monomial| rows.index_of(m).expect("product degree within 2r");

        for (m, entries) in gram_linear_map(&bases[0]) {
            let r = row_of(&m);
            for (i, j, w) in entries {
                *lhs[r].entry((blocks[0], i, j)).or_default() -= w;
            }
        }
        for (s, h) in set.constraints().iter().enumerate() {
            let map = gram_linear_map(&bases[s + 1]);
            for (m, entries) in &map {
                for (beta, c) in h.terms() {
                    let r = row_of(&m.mul(beta));
                    for &(i, j, w) in entries {
                        *lhs[r].entry((blocks[s + 1], i, j)).or_default() += c * w;
                    }
                }
            }
        }

        let mut rhs = vec![0.0; rows.len()];
        let mut scalar_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
        scalar_terms[row_of(&Monomial::one(n_vars))].push((nu, 1.0));
        for (i, entry) in omega.iter().enumerate() {
            let r = row_of(&Monomial::var(n_vars, i));
            match *entry {
                OmegaEntry::Fixed(w) => rhs[r] += w,
                OmegaEntry::Var(k) => scalar_terms[r].push((k, -1.0)),
            }
        }
        for ((terms, scalars), b) in lhs.into_iter().zip(scalar_terms).zip(rhs) {
            let mut f = LinearFunctional::new();
            f.scalars = scalars;
            for ((block, i, j), c) in terms {
                if c != 0.0 {
                    f.push_block(block, i, j, c);
                }
            }
            problem.add_equality(f, b)?;
        }

        if let Direction::Split { bound, .. } = direction {
            if bound.is_finite() {
                for entry in &omega {
                    if let OmegaEntry::Var(k) = *entry {
                        // ±ω_k/bound + s = 1 keeps the right-hand side O(1)
                        for sign in [1.0, -1.0] {
                            let slack = problem.add_nonneg();
                            let f = LinearFunctional::new()
                                .scalar(k, sign / bound)
                                .scalar(slack, 1.0);
                            problem.add_equality(f, 1.0)?;
                        }
                    }
                }
            }
        }
        problem.set_objective(LinearFunctional::new().scalar(nu, 1.0))?;

        Ok(SupportProgram {
            problem,
            nu,
            omega,
            blocks,
            half_degrees,
            order,
            sos_half_degree,
            n_vars,
        })
    }

    pub fn omega_value(&self, solution: &SdpSolution) -> Vec<f64> {
        self.omega
            .iter()
            .map(|e| match *e {
                OmegaEntry::Fixed(w) => w,
                OmegaEntry::Var(k) => solution.free_values[k],
            })
            .collect()
    }

    pub fn certificate(&self, solution: &SdpSolution) -> SosCertificate {
        SosCertificate {
            nu: solution.free_values[self.nu],
            omega: self.omega_value(solution),
            gram_matrices: self
                .blocks
                .iter()
                .map(|&b| {
                    let q = &solution.block_values[b];
                    (q + q.transpose()) * 0.5
                })
                .collect(),
            sos_half_degree: self.sos_half_degree,
            order: self.order,
            half_degrees: self.half_degrees.clone(),
            n_vars: self.n_vars,
        }
    }
}

/// The SDP minimizing `ν` subject to the containment certificate for a
/// fixed direction.
pub fn build_support_sdp(
    set: &SemialgebraicSet,
    omega: &[f64],
    sos_half_degree: u32,
) -> Result<SdpProblem> {
    Ok(SupportProgram::new(set, &Direction::Fixed(omega.to_vec()), sos_half_degree)?.problem)
}

/// Smallest certified `ν` with `ωᵀx <= ν` on `set`.
///
/// An `Unbounded` solver status means `ν` can be pushed to `−∞`, i.e. the
/// set itself is empty; it is returned as [`Error::Solver`] so callers can
/// tell it apart from other failures.
pub fn min_halfspace_offset(
    set: &SemialgebraicSet,
    omega: &[f64],
    sos_half_degree: u32,
    options: &SdpOptions,
) -> Result<SosCertificate> {
    let program = SupportProgram::new(set, &Direction::Fixed(omega.to_vec()), sos_half_degree)?;
    let solution = sdp::solve(&program.problem, options)?;
    if solution.status != SdpStatus::Optimal {
        return Err(Error::Solver {
            status: solution.status,
            context: format!("support query in direction {omega:?}"),
        });
    }
    Ok(program.certificate(&solution))
}

/// A certificate `ν − ωᵀx = σ_0 − Σ σ_s h_s` with explicit Gram matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SosCertificate {
    pub nu: f64,
    pub omega: Vec<f64>,
    /// `Q_0, …, Q_m`, symmetric.
    pub gram_matrices: Vec<DMatrix<f64>>,
    pub sos_half_degree: u32,
    pub order: u32,
    /// Half-degree of the monomial vector behind each Gram matrix.
    pub half_degrees: Vec<u32>,
    pub n_vars: usize,
}

impl SosCertificate {
    /// The certified half-space as a pair `(ω, ν)`.
    pub fn halfspace(&self) -> Result<crate::geometry::HalfSpace> {
        crate::geometry::HalfSpace::new(self.omega.clone(), self.nu)
    }

    /// `(ν − ωᵀx) − σ_0 + Σ σ_s h_s`, which is zero for an exact certificate.
    pub fn identity_residual(&self, set: &SemialgebraicSet) -> Result<Polynomial> {
        self.check_shapes(set)?;
        let n = self.n_vars;
        let mut coeffs = vec![0.0; n];
        for (c, w) in coeffs.iter_mut().zip(&self.omega) {
            *c = -w;
        }
        let mut res = Polynomial::affine(&coeffs, self.nu);
        for (s, (q, &k)) in self
            .gram_matrices
            .iter()
            .zip(&self.half_degrees)
            .enumerate()
        {
            let basis = MonomialBasis::new(n, k);
            let (sigma, _) = gram_expand(&basis, &rows_of(q))?;
            if s == 0 {
                res = res.try_sub(&sigma)?;
            } else {
                res = res.try_add(&sigma.try_mul(&set.constraints()[s - 1])?)?;
            }
        }
        Ok(res)
    }

    fn check_shapes(&self, set: &SemialgebraicSet) -> Result<()> {
        if set.n_vars() != self.n_vars {
            return Err(Error::dims(
                "certificate variables",
                set.n_vars(),
                self.n_vars,
            ));
        }
        if self.gram_matrices.len() != set.len() + 1 {
            return Err(Error::dims(
                "certificate Gram count",
                set.len() + 1,
                self.gram_matrices.len(),
            ));
        }
        if self.half_degrees.len() != self.gram_matrices.len() {
            return Err(Error::dims(
                "certificate degrees",
                self.gram_matrices.len(),
                self.half_degrees.len(),
            ));
        }
        if self.omega.is_empty() || self.omega.len() > self.n_vars {
            return Err(Error::dims(
                "certificate direction",
                self.n_vars,
                self.omega.len(),
            ));
        }
        for (q, &k) in self.gram_matrices.iter().zip(&self.half_degrees) {
            let side = binomial(self.n_vars + k as usize, k as usize);
            if q.nrows() != side || q.ncols() != side {
                return Err(Error::dims("certificate Gram side", side, q.nrows()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn rows_of(q: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..q.nrows())
        .map(|i| q.row(i).iter().copied().collect())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct GramJson {
    half_degree: u32,
    side: usize,
    /// Lower triangle, row-major: `Q[0][0], Q[1][0], Q[1][1], Q[2][0], …`.
    lower: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    nu: f64,
    omega: Vec<f64>,
    n_vars: usize,
    sos_half_degree: u32,
    order: u32,
    grams: Vec<GramJson>,
}

impl Serialize for SosCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let grams = self
            .gram_matrices
            .iter()
            .zip(&self.half_degrees)
            .map(|(q, &k)| {
                let side = q.nrows();
                let mut lower = Vec::with_capacity(side * (side + 1) / 2);
                for i in 0..side {
                    for j in 0..=i {
                        lower.push(q[(i, j)]);
                    }
                }
                GramJson {
                    half_degree: k,
                    side,
                    lower,
                }
            })
            .collect();
        CertificateJson {
            nu: self.nu,
            omega: self.omega.clone(),
            n_vars: self.n_vars,
            sos_half_degree: self.sos_half_degree,
            order: self.order,
            grams,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SosCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = CertificateJson::deserialize(d)?;
        if raw.n_vars == 0 || raw.n_vars > MAX_VARS {
            return Err(D::Error::custom(format!(
                "n_vars must be in 1..={MAX_VARS}"
            )));
        }
        if !raw.nu.is_finite() || raw.omega.iter().any(|w| !w.is_finite()) {
            return Err(D::Error::custom("non-finite certificate data"));
        }
        let mut gram_matrices = Vec::with_capacity(raw.grams.len());
        let mut half_degrees = Vec::with_capacity(raw.grams.len());
        for g in raw.grams {
            if g.side > MAX_SIDE {
                return Err(D::Error::custom(format!(
                    "Gram side {} above {MAX_SIDE}",
                    g.side
                )));
            }
            if binomial(raw.n_vars + g.half_degree as usize, g.half_degree as usize) != g.side {
                return Err(D::Error::custom(format!(
                    "Gram side {} does not match half-degree {} in {} variables",
                    g.side, g.half_degree, raw.n_vars
                )));
            }
            if g.lower.len() != g.side * (g.side + 1) / 2 {
                return Err(D::Error::custom("Gram lower triangle has the wrong length"));
            }
            if g.lower.iter().any(|x| !x.is_finite()) {
                return Err(D::Error::custom("non-finite Gram entry"));
            }
            let mut q = DMatrix::zeros(g.side, g.side);
            let mut it = g.lower.into_iter();
            for i in 0..g.side {
                for j in 0..=i {
                    let v = it.next().unwrap();
                    q[(i, j)] = v;
                    q[(j, i)] = v;
                }
            }
            gram_matrices.push(q);
            half_degrees.push(g.half_degree);
        }
        Ok(SosCertificate {
            nu: raw.nu,
            omega: raw.omega,
            gram_matrices,
            sos_half_degree: raw.sos_half_degree,
            order: raw.order,
            half_degrees,
            n_vars: raw.n_vars,
        })
    }
}

/// Outcome of an independent certificate check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    /// Largest absolute coefficient of the identity residual.
    pub identity_residual: f64,
    pub min_eigenvalues: Vec<f64>,
    pub passed: bool,
}

impl CertificateReport {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Recomputes the polynomial identity and the Gram spectra from scratch,
/// without consulting the solver.
pub fn verify_certificate(
    certificate: &SosCertificate,
    set: &SemialgebraicSet,
    tol_identity: f64,
    tol_psd: f64,
) -> Result<CertificateReport> {
    let residual = certificate.identity_residual(set)?.max_abs_coefficient();
    let min_eigenvalues: Vec<f64> = certificate
        .gram_matrices
        .iter()
        .map(min_eigenvalue)
        .collect();
    let passed = residual <= tol_identity && min_eigenvalues.iter().all(|&e| e >= -tol_psd);
    Ok(CertificateReport {
        identity_residual: residual,
        min_eigenvalues,
        passed,
    })
}

/// A bound `b` such that `ωᵀx <= ν + b` at a point `z` of the set, accounting
/// for the certificate's identity residual and any negative Gram eigenvalues.
pub fn soundness_slack(
    certificate: &SosCertificate,
    set: &SemialgebraicSet,
    point: &[f64],
) -> Result<f64> {
    let residual = certificate.identity_residual(set)?;
    let mut slack = residual.evaluate(point)?.abs();
    for (s, (q, &k)) in certificate
        .gram_matrices
        .iter()
        .zip(&certificate.half_degrees)
        .enumerate()
    {
        let neg = (-min_eigenvalue(q)).max(0.0);
        if neg == 0.0 {
            continue;
        }
        let z = MonomialBasis::new(certificate.n_vars, k).evaluate(point);
        let norm_sq: f64 = z.iter().map(|v| v * v).sum();
        let weight = if s == 0 {
            1.0
        } else {
            set.constraints()[s - 1].evaluate(point)?.abs()
        };
        slack += neg * norm_sq * weight;
    }
    Ok(slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> SemialgebraicSet {
        let [x, y] = [Polynomial::var(2, 0), Polynomial::var(2, 1)];
        let h = &(&(&x * &x) + &(&y * &y)) - &Polynomial::constant(2, 1.0);
        SemialgebraicSet::new(2, vec![h]).unwrap()
    }

    /// 1 − x = ((x − 1)² + y²)/2 + ½(1 − x² − y²) over the basis (1, x, y).
    fn hand_disk_certificate() -> SosCertificate {
        let q0 = DMatrix::from_row_slice(3, 3, &[0.5, -0.5, 0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.5]);
        SosCertificate {
            nu: 1.0,
            omega: vec![1.0, 0.0],
            gram_matrices: vec![q0, DMatrix::from_element(1, 1, 0.5)],
            sos_half_degree: 1,
            order: 1,
            half_degrees: vec![1, 0],
            n_vars: 2,
        }
    }

    #[test]
    fn hand_certificate_is_exact() {
        let basis = MonomialBasis::new(2, 1);
        assert_eq!(basis.get(1), &Monomial::var(2, 0));
        let r =
            verify_certificate(&hand_disk_certificate(), &disk(), TOL_IDENTITY, TOL_PSD).unwrap();
        assert_eq!(r.identity_residual, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn perturbed_offset_fails() {
        let mut c = hand_disk_certificate();
        c.nu -= 0.1;
        let r = verify_certificate(&c, &disk(), TOL_IDENTITY, TOL_PSD).unwrap();
        assert!(r.identity_residual >= 0.1 - 1e-12);
        assert!(!r.passed);
    }

    #[test]
    fn disk_block_sizes() {
        let p = build_support_sdp(&disk(), &[1.0, 0.0], 1).unwrap();
        assert_eq!(p.block_sides(), &[3, 1]);
        assert_eq!(p.equalities().len(), 6);
    }

    #[test]
    fn degree_zero_is_rejected() {
        assert!(matches!(
            build_support_sdp(&disk(), &[1.0, 0.0], 0),
            Err(Error::DegreeTooSmall {
                given: 0,
                required: 1
            })
        ));
        assert!(build_support_sdp(&disk(), &[0.0, 0.0], 1).is_err());
        assert!(build_support_sdp(&disk(), &[1.0, 0.0, 0.0], 1).is_err());
    }

    #[test]
    fn disk_support_is_one() {
        let c = min_halfspace_offset(&disk(), &[1.0, 0.0], 1, &SdpOptions::default()).unwrap();
        assert!((c.nu - 1.0).abs() < 1e-6, "{}", c.nu);
        assert!(
            verify_certificate(&c, &disk(), TOL_IDENTITY, TOL_PSD)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn json_round_trip_uses_lower_triangle() {
        let c = hand_disk_certificate();
        let text = c.to_json();
        assert!(
            text.contains(r#""lower":[0.5,-0.5,0.5,0.0,0.0,0.5]"#),
            "{text}"
        );
        assert_eq!(SosCertificate::from_json(&text).unwrap(), c);
        let bad = text.replace(r#""side":3"#, r#""side":4"#);
        assert!(SosCertificate::from_json(&bad).is_err());
    }

    #[test]
    fn slack_is_zero_for_exact_certificate() {
        let s = soundness_slack(&hand_disk_certificate(), &disk(), &[0.3, -0.2]).unwrap();
        assert_eq!(s, 0.0);
    }
}
