//! Infeasible-start primal-dual path-following solver.
//!
//! Search direction: Nesterov–Todd, computed in the scaled space where
//! `Gᵀ Z G = G⁻¹ X G⁻ᵀ = D` is diagonal, with a Mehrotra predictor-corrector
//! step. The Schur complement `M = BᵀB` (`B` stacks `vec(Gᵀ A_i G)`) is
//! handled through a thin QR of `B` when that fits in memory: the dual step
//! comes from the triangular factor and the primal step from a projection
//! onto the range of `Q`, which keeps `A(ΔX) = r_p` accurate even when `M` is
//! badly conditioned near the optimum. Larger problems fall back to a dense
//! Cholesky of `M`. Free scalars are eliminated through a small saddle-point
//! solve. Equality rows, the right-hand side and the objective are all scaled
//! to unit norm before iterating, so positive rescalings of `b` or `c` leave
//! the iterates unchanged.

use std::collections::BTreeMap;

use log::{debug, trace};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{SdpOptions, SdpProblem, SdpSolution, SdpStatus};
use crate::error::{Error, Result};

/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.95;
/// Divergence ratio below which a normalized ray is taken as an
/// infeasibility certificate.
const RAY_TOL: f64 = 1e-8;

struct Block {
    side: usize,
    /// Per equality row: upper-triangle entries `(k, l, a)` of the symmetric
    /// constraint matrix (`A[k][l] = A[l][k] = a`).
    rows: Vec<Vec<(usize, usize, f64)>>,
    touching: Vec<usize>,
    c: DMatrix<f64>,
}

struct Data {
    m: usize,
    b: DVector<f64>,
    /// Original scalar index of each free / non-negative column.
    free_idx: Vec<usize>,
    lp_idx: Vec<usize>,
    free_cols: Vec<Vec<(usize, f64)>>,
    lp_cols: Vec<Vec<(usize, f64)>>,
    c_free: DVector<f64>,
    c_lp: DVector<f64>,
    blocks: Vec<Block>,
    /// Original equality index of each kept row, with its scale factor.
    kept_rows: Vec<(usize, f64)>,
    obj_scale: f64,
    /// Norm of the row-scaled right-hand side; `b` is stored divided by it,
    /// which makes the iterates invariant to a positive rescaling of `b`.
    b_scale: f64,
    /// Norm of the scaled objective: 1, or 0 for pure feasibility problems.
    c_norm: f64,
}

enum Prepared {
    Ready(Box<Data>),
    /// An equality with no variables but a nonzero right-hand side.
    TriviallyInfeasible,
}

fn prepare(problem: &SdpProblem) -> Prepared {
    let n_scalars = problem.n_scalars();
    let mut scalar_slot = vec![(false, 0usize); n_scalars];
    let (mut free_idx, mut lp_idx) = (Vec::new(), Vec::new());
    for (j, slot) in scalar_slot.iter_mut().enumerate() {
        if problem.is_nonneg(j) {
            *slot = (true, lp_idx.len());
            lp_idx.push(j);
        } else {
            *slot = (false, free_idx.len());
            free_idx.push(j);
        }
    }
    let sides = problem.block_sides();

    let mut kept_rows = Vec::new();
    let mut b = Vec::new();
    let mut free_cols = vec![Vec::new(); free_idx.len()];
    let mut lp_cols = vec![Vec::new(); lp_idx.len()];
    let mut block_rows: Vec<Vec<Vec<(usize, usize, f64)>>> =
        sides.iter().map(|_| Vec::new()).collect();

    for (i, eq) in problem.equalities().iter().enumerate() {
        let mut scal: BTreeMap<usize, f64> = BTreeMap::new();
        for &(j, c) in &eq.lhs.scalars {
            *scal.entry(j).or_insert(0.0) += c;
        }
        let mut ent: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for t in &eq.lhs.blocks {
            let (k, l) = if t.row <= t.col {
                (t.row, t.col)
            } else {
                (t.col, t.row)
            };
            let a = if k == l { t.coef } else { 0.5 * t.coef };
            *ent.entry((t.block, k, l)).or_insert(0.0) += a;
        }
        scal.retain(|_, c| *c != 0.0);
        ent.retain(|_, a| *a != 0.0);
        let norm_sq: f64 = scal.values().map(|c| c * c).sum::<f64>()
            + ent
                .iter()
                .map(|(&(_, k, l), a)| if k == l { a * a } else { 2.0 * a * a })
                .sum::<f64>();
        if norm_sq == 0.0 {
            if eq.rhs != 0.0 {
                return Prepared::TriviallyInfeasible;
            }
            continue;
        }
        let s = 1.0 / norm_sq.sqrt();
        let row = kept_rows.len();
        kept_rows.push((i, s));
        b.push(eq.rhs * s);
        for (j, c) in scal {
            let (is_lp, slot) = scalar_slot[j];
            if is_lp {
                lp_cols[slot].push((row, c * s));
            } else {
                free_cols[slot].push((row, c * s));
            }
        }
        for ((blk, k, l), a) in ent {
            let rows = &mut block_rows[blk];
            if rows.len() <= row {
                rows.resize(row + 1, Vec::new());
            }
            rows[row].push((k, l, a * s));
        }
    }
    let m = kept_rows.len();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let b_scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    for v in &mut b {
        *v /= b_scale;
    }

    let obj = problem.objective();
    let mut c_free = DVector::zeros(free_idx.len());
    let mut c_lp = DVector::zeros(lp_idx.len());
    for &(j, c) in &obj.scalars {
        let (is_lp, slot) = scalar_slot[j];
        if is_lp {
            c_lp[slot] += c;
        } else {
            c_free[slot] += c;
        }
    }
    let mut c_blocks: Vec<DMatrix<f64>> = sides.iter().map(|&s| DMatrix::zeros(s, s)).collect();
    for t in &obj.blocks {
        let cb = &mut c_blocks[t.block];
        if t.row == t.col {
            cb[(t.row, t.row)] += t.coef;
        } else {
            cb[(t.row, t.col)] += 0.5 * t.coef;
            cb[(t.col, t.row)] += 0.5 * t.coef;
        }
    }
    let c_norm_sq: f64 = c_free.norm_squared()
        + c_lp.norm_squared()
        + c_blocks.iter().map(|c| c.norm_squared()).sum::<f64>();
    let obj_scale = if c_norm_sq > 0.0 {
        c_norm_sq.sqrt()
    } else {
        1.0
    };
    c_free /= obj_scale;
    c_lp /= obj_scale;

    let blocks = sides
        .iter()
        .zip(block_rows)
        .zip(c_blocks)
        .map(|((&side, mut rows), c)| {
            rows.resize(m, Vec::new());
            let touching = (0..m).filter(|&i| !rows[i].is_empty()).collect();
            Block {
                side,
                rows,
                touching,
                c: c / obj_scale,
            }
        })
        .collect();

    Prepared::Ready(Box::new(Data {
        m,
        b: DVector::from_vec(b),
        free_idx,
        lp_idx,
        free_cols,
        lp_cols,
        c_free,
        c_lp,
        blocks,
        kept_rows,
        obj_scale,
        b_scale,
        c_norm: if c_norm_sq > 0.0 { 1.0 } else { 0.0 },
    }))
}

/// `<A_i, X>` for a row stored as upper-triangle entries.
#[inline]
fn row_dot(row: &[(usize, usize, f64)], x: &DMatrix<f64>) -> f64 {
    row.iter()
        .map(|&(k, l, a)| {
            if k == l {
                a * x[(k, k)]
            } else {
                2.0 * a * x[(k, l)]
            }
        })
        .sum()
}

struct Iterate {
    xf: DVector<f64>,
    xl: DVector<f64>,
    xb: Vec<DMatrix<f64>>,
    lam: DVector<f64>,
    zl: DVector<f64>,
    zb: Vec<DMatrix<f64>>,
}

impl Data {
    fn apply_a(&self, xf: &DVector<f64>, xl: &DVector<f64>, xb: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (col, &v) in self.free_cols.iter().zip(xf.iter()) {
            for &(i, a) in col {
                out[i] += a * v;
            }
        }
        for (col, &v) in self.lp_cols.iter().zip(xl.iter()) {
            for &(i, a) in col {
                out[i] += a * v;
            }
        }
        for (blk, x) in self.blocks.iter().zip(xb) {
            for &i in &blk.touching {
                out[i] += row_dot(&blk.rows[i], x);
            }
        }
        out
    }

    fn at_cols(cols: &[Vec<(usize, f64)>], lam: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            cols.len(),
            cols.iter()
                .map(|col| col.iter().map(|&(i, a)| a * lam[i]).sum::<f64>()),
        )
    }

    fn at_block(blk: &Block, lam: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(blk.side, blk.side);
        for &i in &blk.touching {
            let li = lam[i];
            for &(k, l, a) in &blk.rows[i] {
                out[(k, l)] += li * a;
                if k != l {
                    out[(l, k)] += li * a;
                }
            }
        }
        out
    }

    fn objective(&self, it: &Iterate) -> f64 {
        self.c_free.dot(&it.xf)
            + self.c_lp.dot(&it.xl)
            + self
                .blocks
                .iter()
                .zip(&it.xb)
                .map(|(b, x)| b.c.dot(x))
                .sum::<f64>()
    }

    fn cone_dim(&self) -> usize {
        self.lp_idx.len() + self.blocks.iter().map(|b| b.side).sum::<usize>()
    }

    fn initial_point(&self) -> Iterate {
        let scale_for = |side: usize, rows: &mut dyn Iterator<Item = (f64, f64)>| {
            let n = side as f64;
            let mut xi = 10f64.max(n.sqrt());
            let mut eta = 10f64.max(n.sqrt());
            for (bi, norm_a) in rows {
                xi = xi.max(n * (1.0 + bi.abs()) / (1.0 + norm_a));
                eta = eta.max(norm_a);
            }
            (xi, eta)
        };
        let mut xb = Vec::with_capacity(self.blocks.len());
        let mut zb = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let mut rows = blk.touching.iter().map(|&i| {
                let fro: f64 = blk.rows[i]
                    .iter()
                    .map(|&(k, l, a)| if k == l { a * a } else { 2.0 * a * a })
                    .sum::<f64>()
                    .sqrt();
                (self.b[i], fro)
            });
            let (xi, eta) = scale_for(blk.side, &mut rows);
            let eta = eta.max(blk.c.norm());
            xb.push(DMatrix::identity(blk.side, blk.side) * xi);
            zb.push(DMatrix::identity(blk.side, blk.side) * eta);
        }
        let mut xl = DVector::zeros(self.lp_idx.len());
        let mut zl = DVector::zeros(self.lp_idx.len());
        for (j, col) in self.lp_cols.iter().enumerate() {
            let mut rows = col.iter().map(|&(i, a)| (self.b[i], a.abs()));
            let (xi, eta) = scale_for(1, &mut rows);
            xl[j] = xi;
            zl[j] = eta.max(self.c_lp[j].abs());
        }
        Iterate {
            xf: DVector::zeros(self.free_idx.len()),
            xl,
            xb,
            lam: DVector::zeros(self.m),
            zl,
            zb,
        }
    }

    /// Dense Schur complement `M = A_l D A_lᵀ + Σ_b [tr(A_i X A_j W)]`.
    fn schur(&self, d_lp: &DVector<f64>, xb: &[DMatrix<f64>], wb: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.m;
        let mut schur = DMatrix::zeros(m, m);
        for (col, &d) in self.lp_cols.iter().zip(d_lp.iter()) {
            for &(i, ai) in col {
                for &(j, aj) in col {
                    schur[(i, j)] += ai * d * aj;
                }
            }
        }
        for ((blk, x), w) in self.blocks.iter().zip(xb).zip(wb) {
            let n = blk.side;
            let mut t = DMatrix::<f64>::zeros(n, n); // T = A_i X, stored by rows
            let mut h = DMatrix::<f64>::zeros(n, n); // H = W A_i X
            let mut row_used = vec![false; n];
            for &i in &blk.touching {
                let row = &blk.rows[i];
                // rows of T touched by A_i
                let mut used = Vec::new();
                for &(k, l, a) in row {
                    let pairs = [(k, l), (l, k)];
                    let pairs = if k == l { &pairs[..1] } else { &pairs[..] };
                    for &(r, s) in pairs {
                        if !row_used[r] {
                            row_used[r] = true;
                            used.push(r);
                        }
                        // T[r, :] += a * X[s, :]  (X symmetric: column s)
                        let xs = x.column(s);
                        for p in 0..n {
                            t[(r, p)] += a * xs[p];
                        }
                    }
                }
                h.fill(0.0);
                for &r in &used {
                    let wr = w.column(r);
                    for p in 0..n {
                        let trp = t[(r, p)];
                        if trp != 0.0 {
                            h.column_mut(p).axpy(trp, &wr, 1.0);
                        }
                    }
                }
                for &j in &blk.touching {
                    let v: f64 = blk.rows[j]
                        .iter()
                        .map(|&(p, q, a)| {
                            if p == q {
                                a * h[(p, p)]
                            } else {
                                a * (h[(q, p)] + h[(p, q)])
                            }
                        })
                        .sum();
                    schur[(i, j)] += v;
                }
                for &r in &used {
                    row_used[r] = false;
                    t.row_mut(r).fill(0.0);
                }
            }
        }
        (&schur + schur.transpose()) * 0.5
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `α` with `X + α ΔX ⪰ 0` (`+inf` when the direction never leaves the cone).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n == 1 {
        return if dx[(0, 0)] < 0.0 {
            -x[(0, 0)] / dx[(0, 0)]
        } else {
            f64::INFINITY
        };
    }
    let chol = match Cholesky::new(x.clone()) {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    let y = match l.solve_lower_triangular(dx) {
        Some(y) => y,
        None => return 0.0,
    };
    let s = match l.solve_lower_triangular(&y.transpose()) {
        Some(s) => s,
        None => return 0.0,
    };
    let lmin = SymmetricEigen::new(sym(&s)).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Residuals {
    rp: DVector<f64>,
    rf: DVector<f64>,
    rl: DVector<f64>,
    rb: Vec<DMatrix<f64>>,
    pobj: f64,
    dobj: f64,
    relp: f64,
    reld: f64,
    gap: f64,
}

fn residuals(data: &Data, it: &Iterate) -> Residuals {
    let ax = data.apply_a(&it.xf, &it.xl, &it.xb);
    let rp = &data.b - &ax;
    let rf = &data.c_free - Data::at_cols(&data.free_cols, &it.lam);
    let rl = &data.c_lp - Data::at_cols(&data.lp_cols, &it.lam) - &it.zl;
    let rb: Vec<DMatrix<f64>> = data
        .blocks
        .iter()
        .zip(&it.zb)
        .map(|(blk, z)| &blk.c - Data::at_block(blk, &it.lam) - z)
        .collect();
    let pobj = data.objective(it);
    let dobj = data.b.dot(&it.lam);
    let dual_sq =
        rf.norm_squared() + rl.norm_squared() + rb.iter().map(|r| r.norm_squared()).sum::<f64>();
    let relp = rp.norm() / (1.0 + data.b.norm());
    let reld = dual_sq.sqrt() / (1.0 + data.c_norm);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Residuals {
        rp,
        rf,
        rl,
        rb,
        pobj,
        dobj,
        relp,
        reld,
        gap,
    }
}

struct Direction {
    dxf: DVector<f64>,
    dxl: DVector<f64>,
    dxb: Vec<DMatrix<f64>>,
    dlam: DVector<f64>,
    dzl: DVector<f64>,
    dzb: Vec<DMatrix<f64>>,
    /// Block steps in NT-scaled coordinates (`G⁻¹ΔX G⁻ᵀ`, `GᵀΔZ G`).
    dxb_hat: Vec<DMatrix<f64>>,
    dzb_hat: Vec<DMatrix<f64>>,
}

impl Direction {
    fn plus(&self, o: &Direction) -> Direction {
        let add =
            |a: &[DMatrix<f64>], b: &[DMatrix<f64>]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Direction {
            dxf: &self.dxf + &o.dxf,
            dxl: &self.dxl + &o.dxl,
            dxb: add(&self.dxb, &o.dxb),
            dlam: &self.dlam + &o.dlam,
            dzl: &self.dzl + &o.dzl,
            dzb: add(&self.dzb, &o.dzb),
            dxb_hat: add(&self.dxb_hat, &o.dxb_hat),
            dzb_hat: add(&self.dzb_hat, &o.dzb_hat),
        }
    }
}

/// `F` with `A = F Fᵀ`: Cholesky when it succeeds, otherwise from the
/// eigendecomposition with eigenvalues floored at a tiny positive fraction.
fn psd_factor(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Some(c.unpack());
    }
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    if !top.is_finite() || top <= 0.0 {
        return None;
    }
    let mut f = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        f.column_mut(j).scale_mut(l.max(1e-30 * top).sqrt());
    }
    Some(f)
}

/// Nesterov–Todd scaling of one block: `Gᵀ Z G = G⁻¹ X G⁻ᵀ = diag(d)`.
struct NtScaling {
    g: DMatrix<f64>,
    d: DVector<f64>,
}

impl NtScaling {
    fn new(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let l = psd_factor(x)?;
        let r = psd_factor(z)?;
        // RᵀL = U D Vᵀ, G = L V D^{-1/2}
        let svd = (r.transpose() * &l).svd(false, true);
        let v_t = svd.v_t?;
        let d = svd.singular_values;
        if d.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return None;
        }
        let mut g = l * v_t.transpose();
        for (j, s) in d.iter().enumerate() {
            g.column_mut(j).scale_mut(1.0 / s.sqrt());
        }
        Some(NtScaling { g, d })
    }

    fn to_scaled(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(self.g.transpose() * m * &self.g))
    }

    fn unscaled(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(&self.g * m * self.g.transpose()))
    }

    /// Solves `(D Y + Y D)/2 = R` for `Y`.
    fn lyap_inv(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| {
            2.0 * r[(i, j)] / (self.d[i] + self.d[j])
        })
    }

    fn diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.d)
    }
}

/// Factored Newton system for one iteration.
struct Newton<'a> {
    data: &'a Data,
    chol: SchurFactor,
    /// `M⁻¹ A_f` and the reduced free-variable system `A_fᵀ M⁻¹ A_f`.
    minv_af: DMatrix<f64>,
    reduced: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    d_lp: DVector<f64>,
    nt: Vec<NtScaling>,
}

impl<'a> Newton<'a> {
    fn new(data: &'a Data, it: &Iterate) -> Option<Self> {
        let d_lp = it.xl.component_div(&it.zl);
        let nt: Vec<NtScaling> = it
            .xb
            .iter()
            .zip(&it.zb)
            .map(|(x, z)| NtScaling::new(x, z))
            .collect::<Option<_>>()?;
        let scalings: Vec<&DMatrix<f64>> = nt.iter().map(|s| &s.g).collect();
        let chol = match data.schur_factor_rows(&d_lp, &scalings) {
            Some(bt) => SchurFactor::from_rows(bt)?,
            None => {
                let sb: Vec<DMatrix<f64>> = nt.iter().map(|s| &s.g * s.g.transpose()).collect();
                SchurFactor::Cholesky(factor_spd(data.schur(&d_lp, &sb, &sb))?)
            }
        };
        let nf = data.free_idx.len();
        let mut af = DMatrix::zeros(data.m, nf);
        for (j, col) in data.free_cols.iter().enumerate() {
            for &(i, a) in col {
                af[(i, j)] = a;
            }
        }
        let minv_af = chol.solve_mat(&af);
        let reduced = if nf > 0 {
            Some((af.transpose() * &minv_af).lu())
        } else {
            None
        };
        Some(Newton {
            data,
            chol,
            minv_af,
            reduced,
            d_lp,
            nt,
        })
    }

    /// Solves for the direction given the LP target `g_lp`
    /// (`Δx = g − D Δz`) and the scaled block targets `r_c`
    /// (`ΔX̂ + ΔẐ = r_c`).
    ///
    /// The primal equation `A(ΔX) = r_p` is only met to the accuracy of the
    /// Schur solve; a round or two of iterative refinement on that equation
    /// cleans up what the factorization leaves behind.
    fn direction(
        &self,
        res: &Residuals,
        g_lp: &DVector<f64>,
        r_c: &[DMatrix<f64>],
    ) -> Option<Direction> {
        let mut dir = self.raw_direction(&res.rp, &res.rf, &res.rl, &res.rb, g_lp, r_c)?;
        let data = self.data;
        let scale = 1.0 + res.rp.norm();
        let zero_f = DVector::zeros(data.free_idx.len());
        let zero_l = DVector::zeros(data.lp_idx.len());
        let zero_b: Vec<DMatrix<f64>> = data
            .blocks
            .iter()
            .map(|b| DMatrix::zeros(b.side, b.side))
            .collect();
        let mut err = &res.rp - data.apply_a(&dir.dxf, &dir.dxl, &dir.dxb);
        for _ in 0..2 {
            let e = err.norm();
            if e <= 1e-15 * scale {
                break;
            }
            let corr = self.raw_direction(&err, &zero_f, &zero_l, &zero_b, &zero_l, &zero_b)?;
            let next = dir.plus(&corr);
            let next_err = &res.rp - data.apply_a(&next.dxf, &next.dxl, &next.dxb);
            if next_err.norm() >= e {
                break;
            }
            dir = next;
            err = next_err;
        }
        Some(dir)
    }

    fn raw_direction(
        &self,
        rp: &DVector<f64>,
        rf: &DVector<f64>,
        rl: &DVector<f64>,
        rb: &[DMatrix<f64>],
        g_lp: &DVector<f64>,
        r_c: &[DMatrix<f64>],
    ) -> Option<Direction> {
        let data = self.data;
        // h = r_p − A_l (g − D r_l) − Σ A_b(G (r_c − Gᵀ R_b G) Gᵀ)
        let lp_part = g_lp - self.d_lp.component_mul(rl);
        let blk_part: Vec<DMatrix<f64>> = self
            .nt
            .iter()
            .zip(rb)
            .zip(r_c)
            .map(|((nt, r), c)| nt.unscaled(&(c - nt.to_scaled(r))))
            .collect();
        let zero_f = DVector::zeros(data.free_idx.len());
        let h = rp - data.apply_a(&zero_f, &lp_part, &blk_part);
        let u = self.chol.solve(&h);
        let dxf = match &self.reduced {
            Some(lu) => {
                let af_t_u = Data::at_cols(&data.free_cols, &u);
                lu.solve(&(af_t_u - rf))?
            }
            None => DVector::zeros(0),
        };
        let dlam = &u - &self.minv_af * &dxf;
        let dzl = rl - Data::at_cols(&data.lp_cols, &dlam);
        let n_blocks = data.blocks.len();
        let (mut dzb, mut dzb_hat) = (Vec::with_capacity(n_blocks), Vec::with_capacity(n_blocks));
        for (blk, (r, nt)) in data.blocks.iter().zip(rb.iter().zip(&self.nt)) {
            let dz = r - Data::at_block(blk, &dlam);
            dzb_hat.push(nt.to_scaled(&dz));
            dzb.push(dz);
        }
        // w = r_c − Gᵀ R_b G per block, (g − D r_l)/√d for the LP part
        let sqrt_d = self.d_lp.map(f64::sqrt);
        let w_lp = lp_part.component_div(&sqrt_d);
        let w_b: Vec<DMatrix<f64>> = self
            .nt
            .iter()
            .zip(rb)
            .zip(r_c)
            .map(|((nt, r), c)| c - nt.to_scaled(r))
            .collect();
        let rp_eff =
            rp - data.apply_a(&dxf, &DVector::zeros(data.lp_idx.len()), &zero_blocks(data));
        let (dxl, dxb_hat) = match self.chol.primal_step(&data.stack(&w_lp, &w_b), &rp_eff) {
            Some(v) => {
                let (xl_hat, xb_hat) = data.unstack(&v);
                (
                    xl_hat.component_mul(&sqrt_d),
                    xb_hat.iter().map(sym).collect(),
                )
            }
            None => {
                let dxl = g_lp - self.d_lp.component_mul(&dzl);
                let hat: Vec<DMatrix<f64>> =
                    r_c.iter().zip(&dzb_hat).map(|(c, dz)| c - dz).collect();
                (dxl, hat)
            }
        };
        let dxb: Vec<DMatrix<f64>> = self
            .nt
            .iter()
            .zip(&dxb_hat)
            .map(|(nt, x)| nt.unscaled(x))
            .collect();
        if !dxf.iter().chain(dlam.iter()).all(|v| v.is_finite()) {
            return None;
        }
        Some(Direction {
            dxf,
            dxl,
            dxb,
            dlam,
            dzl,
            dzb,
            dxb_hat,
            dzb_hat,
        })
    }
}

/// Work budget (`rows × m²`) for the QR factor form. Past it the Schur
/// complement is assembled directly, which exploits the sparsity of LP columns
/// (hinge slacks, for instance) and costs `O(m³)` to factor.
const FACTOR_FORM_LIMIT: usize = 400_000_000;

/// Factorization of the Schur complement.
enum SchurFactor {
    Cholesky(Cholesky<f64, nalgebra::Dyn>),
    /// Thin QR `B = QR` of the stacked scaled constraints, so `M = RᵀR`.
    Triangular {
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    },
}

impl SchurFactor {
    /// Thin QR of `B`, where `M = BᵀB`. The triangular factor carries only
    /// the square root of `M`'s condition number, which matters as `μ → 0`.
    fn from_rows(b: DMatrix<f64>) -> Option<Self> {
        let (n, m) = b.shape();
        let fb = faer::Mat::<f64>::from_fn(n, m, |i, j| b[(i, j)]);
        let qr = fb.qr();
        let fq = qr.compute_thin_Q();
        let fr = qr.thin_R();
        let mut q = DMatrix::from_fn(n, m, |i, j| fq[(i, j)]);
        let mut r = DMatrix::from_fn(m, m, |i, j| if i <= j { fr[(i, j)] } else { 0.0 });
        let big = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !big.is_finite() || big <= 0.0 {
            return None;
        }
        for i in 0..m {
            if r[(i, i)] < 0.0 {
                r.row_mut(i).neg_mut();
                q.column_mut(i).neg_mut();
            }
            r[(i, i)] = r[(i, i)].max(1e-15 * big);
        }
        Some(SchurFactor::Triangular { q, r })
    }

    fn solve(&self, h: &DVector<f64>) -> DVector<f64> {
        match self {
            SchurFactor::Cholesky(c) => c.solve(h),
            SchurFactor::Triangular { r, .. } => {
                let y = r.tr_solve_upper_triangular(h).unwrap_or_else(|| h.clone());
                r.solve_upper_triangular(&y).unwrap_or(y)
            }
        }
    }

    /// The scaled primal step `(I − QQᵀ) w + Q R⁻ᵀ r`, which meets
    /// `Bᵀ x = r` to rounding error however ill-conditioned `M` is.
    fn primal_step(&self, w: &DVector<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SchurFactor::Cholesky(_) => None,
            SchurFactor::Triangular { q, r } => {
                let y = r.tr_solve_upper_triangular(rhs)?;
                let coef = y - q.tr_mul(w);
                Some(w + q * coef)
            }
        }
    }

    fn solve_mat(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = h.clone();
        for j in 0..h.ncols() {
            out.set_column(j, &self.solve(&h.column(j).into_owned()));
        }
        out
    }
}

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper triangle by columns, off-diagonal entries scaled by `√2` so that
/// `svec(A)·svec(B) = ⟨A, B⟩` for symmetric `A`, `B`.
fn svec_into(a: &DMatrix<f64>, out: &mut [f64]) {
    let mut t = 0;
    for j in 0..a.ncols() {
        for i in 0..j {
            out[t] = std::f64::consts::SQRT_2 * a[(i, j)];
            t += 1;
        }
        out[t] = a[(j, j)];
        t += 1;
    }
}

fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut t = 0;
    for j in 0..n {
        for i in 0..j {
            let x = v[t] * std::f64::consts::FRAC_1_SQRT_2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            t += 1;
        }
        a[(j, j)] = v[t];
        t += 1;
    }
    a
}

fn zero_blocks(data: &Data) -> Vec<DMatrix<f64>> {
    data.blocks
        .iter()
        .map(|b| DMatrix::zeros(b.side, b.side))
        .collect()
}

impl Data {
    /// Stacks block (as `svec`) then LP parts in the row layout of
    /// `schur_factor_rows`.
    fn stack(&self, lp: &DVector<f64>, blocks: &[DMatrix<f64>]) -> DVector<f64> {
        let mut v = DVector::zeros(self.factor_rows());
        let mut offset = 0;
        for b in blocks {
            let len = svec_len(b.nrows());
            svec_into(b, &mut v.as_mut_slice()[offset..offset + len]);
            offset += len;
        }
        v.rows_mut(offset, lp.len()).copy_from(lp);
        v
    }

    fn unstack(&self, v: &DVector<f64>) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let len = svec_len(blk.side);
            blocks.push(smat(&v.as_slice()[offset..offset + len], blk.side));
            offset += len;
        }
        (DVector::from_column_slice(&v.as_slice()[offset..]), blocks)
    }

    fn factor_rows(&self) -> usize {
        self.lp_idx.len() + self.blocks.iter().map(|b| svec_len(b.side)).sum::<usize>()
    }

    /// `B` with `M = BᵀB`: for each block, column `i` holds
    /// `vec(Gᵀ A_i G)` for the NT scaling `G`; LP columns add `√d_j a_j`.
    /// `None` when the matrix would be too large or `m` exceeds its row count.
    fn schur_factor_rows(
        &self,
        d_lp: &DVector<f64>,
        scalings: &[&DMatrix<f64>],
    ) -> Option<DMatrix<f64>> {
        let n_rows = self.factor_rows();
        if n_rows < self.m
            || n_rows.saturating_mul(self.m).saturating_mul(self.m) > FACTOR_FORM_LIMIT
        {
            return None;
        }
        let mut bt = DMatrix::zeros(n_rows, self.m);
        let mut offset = 0;
        for (blk, g) in self.blocks.iter().zip(scalings) {
            let n = blk.side;
            let mut bi = DMatrix::<f64>::zeros(n, n);
            for &i in &blk.touching {
                bi.fill(0.0);
                for &(k, q, a) in &blk.rows[i] {
                    // Gᵀ e_k e_qᵀ G = G[k,:]ᵀ ⊗ G[q,:], and the symmetric twin
                    bi.ger(a, &g.row(k).transpose(), &g.row(q).transpose(), 1.0);
                    if k != q {
                        bi.ger(a, &g.row(q).transpose(), &g.row(k).transpose(), 1.0);
                    }
                }
                let len = svec_len(n);
                let start = i * n_rows + offset;
                svec_into(&bi, &mut bt.as_mut_slice()[start..start + len]);
            }
            offset += svec_len(n);
        }
        for (j, (col, &d)) in self.lp_cols.iter().zip(d_lp.iter()).enumerate() {
            let sd = d.sqrt();
            for &(i, a) in col {
                bt[(offset + j, i)] = sd * a;
            }
        }
        Some(bt)
    }
}

fn factor_spd(mut m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m
        .diagonal()
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        for i in 0..m.nrows() {
            m[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

fn step_lengths(it: &Iterate, dir: &Direction) -> (f64, f64) {
    let mut ap = max_step_lp(&it.xl, &dir.dxl);
    let mut ad = max_step_lp(&it.zl, &dir.dzl);
    for (x, dx) in it.xb.iter().zip(&dir.dxb) {
        ap = ap.min(max_step_psd(x, dx));
    }
    for (z, dz) in it.zb.iter().zip(&dir.dzb) {
        ad = ad.min(max_step_psd(z, dz));
    }
    (ap, ad)
}

fn complementarity(data: &Data, it: &Iterate) -> f64 {
    let dim = data.cone_dim().max(1) as f64;
    (it.xl.dot(&it.zl) + it.xb.iter().zip(&it.zb).map(|(x, z)| x.dot(z)).sum::<f64>()) / dim
}

/// Solves the problem with the given options.
///
/// Returns `Err` only for malformed or oversized problems; solver outcomes
/// (including infeasibility) are reported through [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, options: &SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let count = problem.variable_count();
    if count > options.max_variables {
        return Err(Error::ProblemTooLarge {
            count,
            cap: options.max_variables,
        });
    }
    let data = match prepare(problem) {
        Prepared::Ready(d) => *d,
        Prepared::TriviallyInfeasible => return Ok(failed(problem, SdpStatus::Infeasible, 0)),
    };
    if data.cone_dim() == 0 {
        return Err(Error::InvalidInput("problem has no conic variables".into()));
    }

    let mut it = data.initial_point();
    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut stalled = 0usize;
    let mut last = residuals(&data, &it);

    for iter in 0..options.max_iterations {
        iterations = iter;
        let res = residuals(&data, &it);
        let mu = complementarity(&data, &it);
        trace!(
            "iter {iter}: pobj {:.9e} dobj {:.9e} relp {:.2e} reld {:.2e} gap {:.2e} mu {:.2e}",
            res.pobj,
            res.dobj,
            res.relp,
            res.reld,
            res.gap,
            mu
        );
        if res.relp <= options.tol_feas
            && res.reld <= options.tol_feas
            && res.gap <= options.tol_gap
        {
            status = SdpStatus::Optimal;
            last = res;
            break;
        }
        if res.dobj > 0.0 {
            // normalized dual ray: ‖A*λ + Z‖ / bᵀλ
            let ray = dual_ray_norm(&data, &it) / res.dobj;
            if ray < RAY_TOL {
                status = SdpStatus::Infeasible;
                last = res;
                break;
            }
        }
        if res.pobj < 0.0 {
            let ax = &data.b - &res.rp;
            if ax.norm() / (-res.pobj) < RAY_TOL {
                status = SdpStatus::Unbounded;
                last = res;
                break;
            }
        }

        let newton = match Newton::new(&data, &it) {
            Some(n) => n,
            None => {
                status = SdpStatus::NumericalFailure;
                last = res;
                break;
            }
        };

        // predictor
        let g_lp_aff = -&it.xl;
        let rc_aff: Vec<DMatrix<f64>> = newton.nt.iter().map(|nt| -nt.diag()).collect();
        let aff = match newton.direction(&res, &g_lp_aff, &rc_aff) {
            Some(d) => d,
            None => {
                status = SdpStatus::NumericalFailure;
                last = res;
                break;
            }
        };
        let (ap, ad) = step_lengths(&it, &aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let dim = data.cone_dim() as f64;
        let mu_aff = ((&it.xl + &aff.dxl * ap).dot(&(&it.zl + &aff.dzl * ad))
            + it.xb
                .iter()
                .zip(&aff.dxb)
                .zip(it.zb.iter().zip(&aff.dzb))
                .map(|((x, dx), (z, dz))| (x + dx * ap).dot(&(z + dz * ad)))
                .sum::<f64>())
            / dim;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector: ΔX̂ + ΔẐ = L_D⁻¹(σμI − D² − sym(ΔX̂_a ΔẐ_a))
        let g_lp = DVector::from_iterator(
            it.xl.len(),
            (0..it.xl.len()).map(|j| (sigma * mu - aff.dxl[j] * aff.dzl[j]) / it.zl[j] - it.xl[j]),
        );
        let r_c: Vec<DMatrix<f64>> = newton
            .nt
            .iter()
            .zip(aff.dxb_hat.iter().zip(&aff.dzb_hat))
            .map(|(nt, (dx, dz))| {
                let n = nt.d.len();
                let target =
                    DMatrix::from_diagonal(&nt.d.map(|d| sigma * mu - d * d)) - sym(&(dx * dz));
                debug_assert_eq!(target.nrows(), n);
                nt.lyap_inv(&target)
            })
            .collect();
        let dir = match newton.direction(&res, &g_lp, &r_c) {
            Some(d) => d,
            None => {
                status = SdpStatus::NumericalFailure;
                last = res;
                break;
            }
        };
        let (ap, ad) = step_lengths(&it, &dir);
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);

        it.xf += &dir.dxf * ap;
        it.xl += &dir.dxl * ap;
        for (x, dx) in it.xb.iter_mut().zip(&dir.dxb) {
            *x += dx * ap;
        }
        it.lam += &dir.dlam * ad;
        it.zl += &dir.dzl * ad;
        for (z, dz) in it.zb.iter_mut().zip(&dir.dzb) {
            *z += dz * ad;
        }

        if ap < 1e-9 && ad < 1e-9 {
            stalled += 1;
            if stalled >= 3 {
                status = SdpStatus::NumericalFailure;
                last = residuals(&data, &it);
                break;
            }
        } else {
            stalled = 0;
        }
        last = res;
        iterations = iter + 1;
    }
    if status == SdpStatus::MaxIterations {
        last = residuals(&data, &it);
    }
    debug!(
        "sdp: {:?} after {iterations} iterations (pobj {:.9e}, relp {:.1e}, reld {:.1e}, gap {:.1e})",
        status, last.pobj, last.relp, last.reld, last.gap
    );
    Ok(unscale(problem, &data, &it, status, &last, iterations))
}

fn dual_ray_norm(data: &Data, it: &Iterate) -> f64 {
    let f = Data::at_cols(&data.free_cols, &it.lam);
    let l = Data::at_cols(&data.lp_cols, &it.lam) + &it.zl;
    let b: f64 = data
        .blocks
        .iter()
        .zip(&it.zb)
        .map(|(blk, z)| (Data::at_block(blk, &it.lam) + z).norm_squared())
        .sum();
    (f.norm_squared() + l.norm_squared() + b).sqrt()
}

fn failed(problem: &SdpProblem, status: SdpStatus, iterations: usize) -> SdpSolution {
    SdpSolution {
        status,
        free_values: vec![0.0; problem.n_scalars()],
        block_values: problem
            .block_sides()
            .iter()
            .map(|&s| DMatrix::zeros(s, s))
            .collect(),
        objective_value: f64::NAN,
        dual_objective: f64::NAN,
        dual_values: vec![0.0; problem.equalities().len()],
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        duality_gap: f64::INFINITY,
        iterations,
    }
}

fn unscale(
    problem: &SdpProblem,
    data: &Data,
    it: &Iterate,
    status: SdpStatus,
    res: &Residuals,
    iterations: usize,
) -> SdpSolution {
    let mut free_values = vec![0.0; problem.n_scalars()];
    for (slot, &j) in data.free_idx.iter().enumerate() {
        free_values[j] = it.xf[slot] * data.b_scale;
    }
    for (slot, &j) in data.lp_idx.iter().enumerate() {
        free_values[j] = it.xl[slot] * data.b_scale;
    }
    let mut dual_values = vec![0.0; problem.equalities().len()];
    for (row, &(orig, s)) in data.kept_rows.iter().enumerate() {
        dual_values[orig] = it.lam[row] * s * data.obj_scale;
    }
    SdpSolution {
        status,
        free_values,
        block_values: it.xb.iter().map(|x| sym(x) * data.b_scale).collect(),
        objective_value: res.pobj * data.obj_scale * data.b_scale,
        dual_objective: res.dobj * data.obj_scale * data.b_scale,
        dual_values,
        primal_residual: res.relp,
        dual_residual: res.reld,
        duality_gap: res.gap,
        iterations,
    }
}
