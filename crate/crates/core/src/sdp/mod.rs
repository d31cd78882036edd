//! Small dense semidefinite programs.
//!
//! Problems are stated over three kinds of variables: free scalars, scalars
//! flagged non-negative, and symmetric PSD blocks. All constraints are
//! linear equalities and the objective is linear:
//!
//! ```text
//! minimize    Σ c_j y_j + Σ_b <C_b, X_b>
//! subject to  Σ a_ij y_j + Σ_b <A_ib, X_b> = b_i     for every equality i
//!             y_j >= 0 for flagged scalars,  X_b ⪰ 0
//! ```
//!
//! [`solve`] runs an infeasible-start primal-dual path-following method;
//! [`check_solution`] recomputes every residual from the problem data alone.

mod ipm;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ipm::solve;

/// One term `coef · X_b[row][col]` of a linear functional. Because blocks are
/// symmetric, `(row, col)` and `(col, row)` address the same variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockTerm {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

/// Sparse linear functional over all problem variables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    pub scalars: Vec<(usize, f64)>,
    pub blocks: Vec<BlockTerm>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(mut self, var: usize, coef: f64) -> Self {
        self.scalars.push((var, coef));
        self
    }

    pub fn push_scalar(&mut self, var: usize, coef: f64) {
        self.scalars.push((var, coef));
    }

    pub fn push_block(&mut self, block: usize, row: usize, col: usize, coef: f64) {
        self.blocks.push(BlockTerm {
            block,
            row,
            col,
            coef,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty() && self.blocks.is_empty()
    }

    /// Value of the functional at the given point.
    pub fn evaluate(&self, scalars: &[f64], blocks: &[DMatrix<f64>]) -> f64 {
        let s: f64 = self.scalars.iter().map(|&(j, c)| c * scalars[j]).sum();
        let b: f64 = self
            .blocks
            .iter()
            .map(|t| t.coef * blocks[t.block][(t.row, t.col)])
            .sum();
        s + b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub lhs: LinearFunctional,
    pub rhs: f64,
}

/// A semidefinite program under construction or ready to solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    /// Non-negativity flag per scalar variable.
    nonneg: Vec<bool>,
    block_sides: Vec<usize>,
    objective: LinearFunctional,
    equalities: Vec<Equality>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sign-unrestricted scalar and returns its index.
    pub fn add_free(&mut self) -> usize {
        self.nonneg.push(false);
        self.nonneg.len() - 1
    }

    /// Adds a scalar constrained to be `>= 0` and returns its index.
    pub fn add_nonneg(&mut self) -> usize {
        self.nonneg.push(true);
        self.nonneg.len() - 1
    }

    /// Adds a PSD block of the given side and returns its index.
    pub fn add_block(&mut self, side: usize) -> Result<usize> {
        if side == 0 {
            return Err(Error::InvalidInput(
                "PSD block side must be at least 1".into(),
            ));
        }
        self.block_sides.push(side);
        Ok(self.block_sides.len() - 1)
    }

    pub fn add_equality(&mut self, lhs: LinearFunctional, rhs: f64) -> Result<()> {
        self.check_functional(&lhs)?;
        if !rhs.is_finite() {
            return Err(Error::InvalidInput(
                "non-finite equality right-hand side".into(),
            ));
        }
        self.equalities.push(Equality { lhs, rhs });
        Ok(())
    }

    pub fn set_objective(&mut self, objective: LinearFunctional) -> Result<()> {
        self.check_functional(&objective)?;
        self.objective = objective;
        Ok(())
    }

    fn check_functional(&self, f: &LinearFunctional) -> Result<()> {
        for &(j, c) in &f.scalars {
            if j >= self.nonneg.len() {
                return Err(Error::InvalidInput(format!(
                    "scalar variable {j} is not declared"
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
        }
        for t in &f.blocks {
            let side = *self
                .block_sides
                .get(t.block)
                .ok_or_else(|| Error::InvalidInput(format!("block {} is not declared", t.block)))?;
            if t.row >= side || t.col >= side {
                return Err(Error::InvalidInput(format!(
                    "entry ({}, {}) outside block {} of side {side}",
                    t.row, t.col, t.block
                )));
            }
            if !t.coef.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    /// Re-checks every invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.block_sides.contains(&0) {
            return Err(Error::InvalidInput(
                "PSD block side must be at least 1".into(),
            ));
        }
        self.check_functional(&self.objective)?;
        for eq in &self.equalities {
            self.check_functional(&eq.lhs)?;
            if !eq.rhs.is_finite() {
                return Err(Error::InvalidInput(
                    "non-finite equality right-hand side".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_scalars(&self) -> usize {
        self.nonneg.len()
    }

    pub fn is_nonneg(&self, var: usize) -> bool {
        self.nonneg[var]
    }

    pub fn block_sides(&self) -> &[usize] {
        &self.block_sides
    }

    pub fn objective(&self) -> &LinearFunctional {
        &self.objective
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    /// Scalar unknowns: every scalar plus the upper triangle of each block.
    pub fn variable_count(&self) -> usize {
        self.nonneg.len()
            + self
                .block_sides
                .iter()
                .map(|s| s * (s + 1) / 2)
                .sum::<usize>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SdpProblem = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdpOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub tol_psd: f64,
    pub max_iterations: usize,
    /// Refuse problems with more scalar unknowns than this.
    pub max_variables: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol_feas: 1e-7,
            tol_gap: 1e-7,
            tol_psd: 1e-8,
            max_iterations: 200,
            max_variables: 50_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub free_values: Vec<f64>,
    pub block_values: Vec<DMatrix<f64>>,
    pub objective_value: f64,
    pub dual_objective: f64,
    /// Equality multipliers of the dual problem.
    pub dual_values: Vec<f64>,
    /// Relative primal infeasibility `‖b - Ax‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// Relative dual infeasibility.
    pub dual_residual: f64,
    /// Relative gap `|p - d| / (1 + |p| + |d|)`.
    pub duality_gap: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Residuals of a candidate point, recomputed from problem data only.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// Largest absolute equality violation.
    pub equality_residual: f64,
    /// Index of the equality attaining `equality_residual`.
    pub worst_equality: Option<usize>,
    pub min_eigenvalues: Vec<f64>,
    /// Smallest value among non-negative scalars (`+inf` if there are none).
    pub min_nonneg: f64,
    pub objective: f64,
}

impl ResidualReport {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol_feas: f64, tol_psd: f64) -> bool {
        self.equality_residual <= tol_feas
            && self.min_eigenvalue() >= -tol_psd
            && self.min_nonneg >= -tol_psd
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Recomputes equality residuals, block eigenvalues and the objective.
pub fn check_solution(problem: &SdpProblem, solution: &SdpSolution) -> Result<ResidualReport> {
    check_point(problem, &solution.free_values, &solution.block_values)
}

pub fn check_point(
    problem: &SdpProblem,
    scalars: &[f64],
    blocks: &[DMatrix<f64>],
) -> Result<ResidualReport> {
    if scalars.len() != problem.n_scalars() {
        return Err(Error::dims(
            "solution scalars",
            problem.n_scalars(),
            scalars.len(),
        ));
    }
    if blocks.len() != problem.block_sides.len() {
        return Err(Error::dims(
            "solution blocks",
            problem.block_sides.len(),
            blocks.len(),
        ));
    }
    for (b, (m, &side)) in blocks.iter().zip(&problem.block_sides).enumerate() {
        if m.nrows() != side || m.ncols() != side {
            return Err(Error::InvalidInput(format!(
                "block {b} is {}x{}, expected {side}x{side}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut worst = None;
    let mut equality_residual: f64 = 0.0;
    for (i, eq) in problem.equalities.iter().enumerate() {
        let r = (eq.lhs.evaluate(scalars, blocks) - eq.rhs).abs();
        if r > equality_residual || worst.is_none() {
            equality_residual = equality_residual.max(r);
            worst = Some(i);
        }
    }
    let min_nonneg = scalars
        .iter()
        .zip(&problem.nonneg)
        .filter(|(_, &nn)| nn)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    Ok(ResidualReport {
        equality_residual,
        worst_equality: worst,
        min_eigenvalues: blocks.iter().map(min_eigenvalue).collect(),
        min_nonneg,
        objective: problem.objective.evaluate(scalars, blocks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_bound() -> SdpProblem {
        // minimize y  s.t.  [y - 3] ⪰ 0, written as X = y - 3
        let mut p = SdpProblem::new();
        let y = p.add_free();
        let x = p.add_block(1).unwrap();
        let mut f = LinearFunctional::new().scalar(y, 1.0);
        f.push_block(x, 0, 0, -1.0);
        p.add_equality(f, 3.0).unwrap();
        p.set_objective(LinearFunctional::new().scalar(y, 1.0))
            .unwrap();
        p
    }

    #[test]
    fn rejects_undeclared_variables() {
        let mut p = SdpProblem::new();
        assert!(p
            .add_equality(LinearFunctional::new().scalar(0, 1.0), 0.0)
            .is_err());
        p.add_block(2).unwrap();
        let mut f = LinearFunctional::new();
        f.push_block(0, 2, 0, 1.0);
        assert!(p.add_equality(f, 0.0).is_err());
        assert!(p.add_block(0).is_err());
    }

    #[test]
    fn variable_count_includes_triangles() {
        let mut p = SdpProblem::new();
        p.add_free();
        p.add_block(3).unwrap();
        p.add_block(1).unwrap();
        assert_eq!(p.variable_count(), 1 + 6 + 1);
    }

    #[test]
    fn zero_point_violates_psd_and_equality() {
        let p = scalar_bound();
        let r = check_point(&p, &[0.0], &[DMatrix::zeros(1, 1)]).unwrap();
        assert_eq!(r.equality_residual, 3.0);
        // y = 0 forces X = -3
        let r = check_point(&p, &[0.0], &[DMatrix::from_element(1, 1, -3.0)]).unwrap();
        assert_eq!(r.equality_residual, 0.0);
        assert!(!r.passes(1e-7, 1e-8));
        assert!(r.min_eigenvalue() < 0.0);
    }

    #[test]
    fn check_rejects_shape_mismatch() {
        let p = scalar_bound();
        assert!(check_point(&p, &[0.0, 1.0], &[DMatrix::zeros(1, 1)]).is_err());
        assert!(check_point(&p, &[0.0], &[DMatrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn json_dump_round_trips() {
        let p = scalar_bound();
        let back = SdpProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }
}
