//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use polyfilt::sdp::{LinearFunctional, SdpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An SDP whose optimum is known by construction: a primal point `X*` and a
/// dual pair `(λ*, Z*)` with `X* Z* = 0` are drawn first, then `b = A(X*)`
/// and `C = A*(λ*) + Z*`, so the duality gap at the chosen pair is zero.
pub struct PlantedSdp {
    pub problem: SdpProblem,
    pub optimum: f64,
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

pub fn planted_sdp(
    seed: u64,
    sides: &[usize],
    n_eq: usize,
    n_free: usize,
    n_nonneg: usize,
) -> PlantedSdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = SdpProblem::new();
    let free: Vec<usize> = (0..n_free).map(|_| p.add_free()).collect();
    let nonneg: Vec<usize> = (0..n_nonneg).map(|_| p.add_nonneg()).collect();
    let blocks: Vec<usize> = sides.iter().map(|&s| p.add_block(s).unwrap()).collect();

    // planted primal/dual points
    let mut x_star = Vec::new();
    let mut z_star = Vec::new();
    for &n in sides {
        let q = random_orthogonal(&mut rng, n);
        let r = rng.random_range(1..=n.max(2) - 1).min(n);
        let mut dx = DMatrix::zeros(n, n);
        let mut dz = DMatrix::zeros(n, n);
        for i in 0..n {
            if i < r {
                dx[(i, i)] = rng.random_range(0.5..2.0);
            } else {
                dz[(i, i)] = rng.random_range(0.5..2.0);
            }
        }
        if n == 1 {
            // one of the two is zero, decided by a coin
            if rng.random_bool(0.5) {
                dx[(0, 0)] = 0.0;
                dz[(0, 0)] = 1.0;
            } else {
                dz[(0, 0)] = 0.0;
            }
        }
        x_star.push(&q * dx * q.transpose());
        z_star.push(&q * dz * q.transpose());
    }
    let y_free: Vec<f64> = (0..n_free).map(|_| rng.random_range(-2.0..2.0)).collect();
    let (mut y_nn, mut z_nn) = (Vec::new(), Vec::new());
    for _ in 0..n_nonneg {
        if rng.random_bool(0.5) {
            y_nn.push(rng.random_range(0.5..2.0));
            z_nn.push(0.0);
        } else {
            y_nn.push(0.0);
            z_nn.push(rng.random_range(0.5..2.0));
        }
    }
    let lambda: Vec<f64> = (0..n_eq).map(|_| rng.random_range(-1.0..1.0)).collect();

    // random constraint data
    let mut a_free = vec![vec![0.0; n_eq]; n_free];
    let mut a_nn = vec![vec![0.0; n_eq]; n_nonneg];
    let mut a_blk: Vec<Vec<DMatrix<f64>>> = sides.iter().map(|_| Vec::new()).collect();
    for i in 0..n_eq {
        let mut f = LinearFunctional::new();
        let mut lhs_val = 0.0;
        for (j, &v) in free.iter().enumerate() {
            let a = rng.random_range(-1.0..1.0);
            a_free[j][i] = a;
            f.push_scalar(v, a);
            lhs_val += a * y_free[j];
        }
        for (j, &v) in nonneg.iter().enumerate() {
            let a = rng.random_range(-1.0..1.0);
            a_nn[j][i] = a;
            f.push_scalar(v, a);
            lhs_val += a * y_nn[j];
        }
        for (b, &n) in sides.iter().enumerate() {
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = (&g + g.transpose()) * 0.5;
            for r in 0..n {
                for c in r..n {
                    let coef = if r == c { a[(r, r)] } else { 2.0 * a[(r, c)] };
                    f.push_block(blocks[b], r, c, coef);
                }
            }
            lhs_val += a.dot(&x_star[b]);
            a_blk[b].push(a);
        }
        p.add_equality(f, lhs_val).unwrap();
    }

    // objective C = A*(λ) + Z*
    let mut obj = LinearFunctional::new();
    let mut optimum = 0.0;
    for (j, &v) in free.iter().enumerate() {
        let c: f64 = (0..n_eq).map(|i| a_free[j][i] * lambda[i]).sum();
        obj.push_scalar(v, c);
        optimum += c * y_free[j];
    }
    for (j, &v) in nonneg.iter().enumerate() {
        let c: f64 = (0..n_eq).map(|i| a_nn[j][i] * lambda[i]).sum::<f64>() + z_nn[j];
        obj.push_scalar(v, c);
        optimum += c * y_nn[j];
    }
    for (b, &n) in sides.iter().enumerate() {
        let mut c = z_star[b].clone();
        for i in 0..n_eq {
            c += &a_blk[b][i] * lambda[i];
        }
        for r in 0..n {
            for cc in r..n {
                let coef = if r == cc { c[(r, r)] } else { 2.0 * c[(r, cc)] };
                obj.push_block(blocks[b], r, cc, coef);
            }
        }
        optimum += c.dot(&x_star[b]);
    }
    p.set_objective(obj).unwrap();
    PlantedSdp {
        problem: p,
        optimum,
    }
}

/// Vertices of the 2-D polygon `{x : a_j·x <= b_j}` by brute-force
/// intersection of every pair of boundary lines.
pub fn polygon_vertices(halfplanes: &[([f64; 2], f64)]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..halfplanes.len() {
        for j in i + 1..halfplanes.len() {
            let ([a1, b1], c1) = halfplanes[i];
            let ([a2, b2], c2) = halfplanes[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (c1 * b2 - c2 * b1) / det;
            let y = (a1 * c2 - a2 * c1) / det;
            if halfplanes
                .iter()
                .all(|&([a, b], c)| a * x + b * y <= c + 1e-9)
            {
                out.push([x, y]);
            }
        }
    }
    out
}

/// `max ω·v` over the polygon, by enumerating its vertices.
pub fn vertex_lp(halfplanes: &[([f64; 2], f64)], omega: [f64; 2]) -> f64 {
    polygon_vertices(halfplanes)
        .iter()
        .map(|v| omega[0] * v[0] + omega[1] * v[1])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Random convex polygon: sorted random angles on an ellipse-ish curve,
/// returned as half-planes through consecutive vertices.
pub fn random_polygon(rng: &mut ChaCha8Rng, n_sides: usize) -> Vec<([f64; 2], f64)> {
    let cx = rng.random_range(-0.5..0.5);
    let cy = rng.random_range(-0.5..0.5);
    let rx = rng.random_range(0.3..1.0);
    let ry = rng.random_range(0.3..1.0);
    let mut angles: Vec<f64> = Vec::new();
    // spread angles so the polygon always contains its center
    for k in 0..n_sides {
        let base = k as f64 * std::f64::consts::TAU / n_sides as f64;
        angles.push(base + rng.random_range(0.0..0.8) * std::f64::consts::TAU / n_sides as f64);
    }
    let verts: Vec<[f64; 2]> = angles
        .iter()
        .map(|t| [cx + rx * t.cos(), cy + ry * t.sin()])
        .collect();
    let mut out = Vec::new();
    for k in 0..n_sides {
        let p = verts[k];
        let q = verts[(k + 1) % n_sides];
        // outward normal of a counter-clockwise edge
        let normal = [q[1] - p[1], p[0] - q[0]];
        let len = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        let normal = [normal[0] / len, normal[1] / len];
        out.push((normal, normal[0] * p[0] + normal[1] * p[1]));
    }
    out
}

/// Whether `p` lies in the polygon, up to `tol`.
pub fn polygon_contains(halfplanes: &[([f64; 2], f64)], p: [f64; 2], tol: f64) -> bool {
    halfplanes
        .iter()
        .all(|&([a, b], c)| a * p[0] + b * p[1] <= c + tol)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
