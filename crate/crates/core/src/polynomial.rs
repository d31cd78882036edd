//! Sparse multivariate polynomials over a graded-lexicographic monomial basis.
//!
//! Every symbolic object in the filter (noise bounds, state maps, SOS
//! multipliers) is a [`Polynomial`]: a map from [`Monomial`] to an `f64`
//! coefficient. Terms are kept in graded-lex order, so iteration order is
//! deterministic and matches the listing `1, x1, ..., xn, x1², x1x2, ...`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Upper bound on the variable count accepted from external input.
pub const MAX_VARS: usize = 64;
/// Upper bound on a single exponent accepted from external input.
pub const MAX_EXPONENT: u32 = 64;

/// Exponent vector of a monomial, one entry per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    /// The monomial `x_var`.
    pub fn var(n_vars: usize, var: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[var] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of two monomials over the same variables.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    /// Graded order: lower total degree first; within a degree, larger
    /// exponent vectors (lexicographically) come first, so `x1² < x1x2 < x2²`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n_vars` variables of degree exactly `degree`, in
/// descending lexicographic order.
fn monomials_of_degree(n_vars: usize, degree: u32, out: &mut Vec<Monomial>) {
    fn rec(prefix: &mut Vec<u32>, remaining_vars: usize, remaining: u32, out: &mut Vec<Monomial>) {
        if remaining_vars == 1 {
            prefix.push(remaining);
            out.push(Monomial(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(prefix, remaining_vars - 1, remaining - e, out);
            prefix.pop();
        }
    }
    if n_vars == 0 {
        if degree == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    rec(&mut Vec::with_capacity(n_vars), n_vars, degree, out);
}

/// Binomial coefficient `C(n, k)`, saturating on overflow.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Ordered list of all monomials of degree at most `max_degree`.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    n_vars: usize,
    max_degree: u32,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(n_vars: usize, max_degree: u32) -> Self {
        let mut monomials =
            Vec::with_capacity(binomial(n_vars + max_degree as usize, max_degree as usize));
        for d in 0..=max_degree {
            monomials_of_degree(n_vars, d, &mut monomials);
        }
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        MonomialBasis {
            n_vars,
            max_degree,
            monomials,
            index,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Values of every basis monomial at `point`.
    pub fn evaluate(&self, point: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.evaluate(point)).collect()
    }
}

/// Graded-lex basis of all monomials in `n_vars` variables up to `degree`.
pub fn monomial_basis(n_vars: usize, degree: u32) -> MonomialBasis {
    MonomialBasis::new(n_vars, degree)
}

/// Immutable sparse polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        Self::from_terms(n_vars, [(Monomial::one(n_vars), c)])
            .expect("constant monomial always matches n_vars")
    }

    /// The polynomial `x_var` (zero-based variable index).
    pub fn var(n_vars: usize, var: usize) -> Self {
        assert!(
            var < n_vars,
            "variable index {var} out of range for {n_vars} variables"
        );
        Polynomial {
            n_vars,
            terms: BTreeMap::from([(Monomial::var(n_vars, var), 1.0)]),
        }
    }

    /// All `n_vars` coordinate polynomials `x_1, ..., x_n`.
    pub fn vars(n_vars: usize) -> Vec<Self> {
        (0..n_vars).map(|i| Self::var(n_vars, i)).collect()
    }

    /// Builds a polynomial from `(monomial, coefficient)` pairs, summing
    /// repeated monomials.
    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.n_vars() != n_vars {
                return Err(Error::dims("polynomial term", n_vars, m.n_vars()));
            }
            *map.entry(m).or_insert(0.0) += c;
        }
        Ok(Polynomial::normalized(n_vars, map))
    }

    /// Affine polynomial `offset + Σ coeffs[i]·x_i`.
    pub fn affine(coeffs: &[f64], offset: f64) -> Self {
        let n = coeffs.len();
        let terms = std::iter::once((Monomial::one(n), offset)).chain(
            coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| (Monomial::var(n, i), c)),
        );
        Self::from_terms(n, terms).expect("affine terms match n_vars")
    }

    fn normalized(n_vars: usize, mut terms: BTreeMap<Monomial, f64>) -> Self {
        terms.retain(|_, c| c.abs() >= PRUNE_THRESHOLD);
        Polynomial { n_vars, terms }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterates terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n_vars {
            return Err(Error::dims(
                "polynomial evaluation",
                self.n_vars,
                point.len(),
            ));
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.evaluate(point)).sum())
    }

    fn check_same(&self, other: &Polynomial, context: &'static str) -> Result<()> {
        if self.n_vars != other.n_vars {
            return Err(Error::dims(context, self.n_vars, other.n_vars));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other, "polynomial addition")?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_insert(0.0) += c;
        }
        Ok(Polynomial::normalized(self.n_vars, terms))
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.try_add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect();
        Polynomial::normalized(self.n_vars, terms)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other, "polynomial multiplication")?;
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        Ok(Polynomial::normalized(self.n_vars, terms))
    }

    pub fn powi(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.n_vars, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Replaces variable `i` by `images[i]`; the result lives in the images'
    /// variable space.
    pub fn substitute(&self, images: &[Polynomial]) -> Result<Polynomial> {
        if images.len() != self.n_vars {
            return Err(Error::dims(
                "substitution image count",
                self.n_vars,
                images.len(),
            ));
        }
        let target_vars = match images.first() {
            Some(p) => p.n_vars,
            None => 0,
        };
        if let Some(bad) = images.iter().find(|p| p.n_vars != target_vars) {
            return Err(Error::dims("substitution image", target_vars, bad.n_vars));
        }
        // powers[i][e] = images[i]^e, filled lazily
        let mut powers: Vec<Vec<Polynomial>> = images
            .iter()
            .map(|_| vec![Polynomial::constant(target_vars, 1.0)])
            .collect();
        let mut out = Polynomial::zero(target_vars);
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(target_vars, *c);
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = &powers[i][powers[i].len() - 1] * &images[i];
                    powers[i].push(next);
                }
                term = &term * &powers[i][e as usize];
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Re-embeds the polynomial into `n_total` variables, mapping variable
    /// `i` to `offset + i`.
    pub fn lift(&self, n_total: usize, offset: usize) -> Result<Polynomial> {
        if offset + self.n_vars > n_total {
            return Err(Error::dims("lift target", offset + self.n_vars, n_total));
        }
        let terms = self.terms.iter().map(|(m, &c)| {
            let mut e = vec![0; n_total];
            e[offset..offset + self.n_vars].copy_from_slice(m.exponents());
            (Monomial(e), c)
        });
        Polynomial::from_terms(n_total, terms)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial add: n_vars mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial sub: n_vars mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial mul: n_vars mismatch")
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            if m.is_constant() {
                write!(f, "{a}")?;
            } else if a == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        Ok(())
    }
}

/// Linear map from a symmetric Gram matrix to the coefficients of
/// `q(x)ᵀ Q q(x)`: for each monomial, the `(i, j, weight)` triples (with
/// `i <= j`) such that the coefficient equals `Σ weight·Q[i][j]`.
pub type GramMap = BTreeMap<Monomial, Vec<(usize, usize, f64)>>;

pub fn gram_linear_map(basis: &MonomialBasis) -> GramMap {
    let mut map: GramMap = BTreeMap::new();
    let mons = basis.monomials();
    for i in 0..mons.len() {
        for j in i..mons.len() {
            let w = if i == j { 1.0 } else { 2.0 };
            map.entry(mons[i].mul(&mons[j]))
                .or_default()
                .push((i, j, w));
        }
    }
    map
}

/// Expands `q(x)ᵀ Q q(x)` for a symmetric `Q` given in row-major order.
/// Only the upper triangle of `Q` is read.
pub fn gram_expand(basis: &MonomialBasis, q: &[Vec<f64>]) -> Result<(Polynomial, GramMap)> {
    let k = basis.len();
    if q.len() != k {
        return Err(Error::dims("Gram matrix rows", k, q.len()));
    }
    if let Some(row) = q.iter().find(|r| r.len() != k) {
        return Err(Error::dims("Gram matrix columns", k, row.len()));
    }
    let map = gram_linear_map(basis);
    let terms = map.iter().map(|(m, entries)| {
        let c = entries.iter().map(|&(i, j, w)| w * q[i][j]).sum::<f64>();
        (m.clone(), c)
    });
    let poly = Polynomial::from_terms(basis.n_vars(), terms)?;
    Ok((poly, map))
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exps: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialJson {
    n_vars: usize,
    terms: Vec<TermJson>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolynomialJson {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| TermJson {
                    exps: m.0.clone(),
                    coef: c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PolynomialJson::deserialize(d)?;
        if raw.n_vars > MAX_VARS {
            return Err(D::Error::custom(format!(
                "n_vars {} exceeds the limit of {MAX_VARS}",
                raw.n_vars
            )));
        }
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            if t.exps.len() != raw.n_vars {
                return Err(D::Error::custom(format!(
                    "term has {} exponents, expected {}",
                    t.exps.len(),
                    raw.n_vars
                )));
            }
            if t.exps.iter().any(|&e| e > MAX_EXPONENT) {
                return Err(D::Error::custom(format!("exponent above {MAX_EXPONENT}")));
            }
            if !t.coef.is_finite() {
                return Err(D::Error::custom("non-finite coefficient"));
            }
            terms.push((Monomial(t.exps), t.coef));
        }
        Polynomial::from_terms(raw.n_vars, terms).map_err(D::Error::custom)
    }
}

impl Polynomial {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polynomial serialization is infallible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i)
    }

    #[test]
    fn basis_two_vars_degree_two_is_graded_lex() {
        let b = monomial_basis(2, 2);
        let got: Vec<Vec<u32>> = b
            .monomials()
            .iter()
            .map(|m| m.exponents().to_vec())
            .collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn basis_constant_only() {
        let b = monomial_basis(3, 0);
        assert_eq!(b.len(), 1);
        assert!(b.get(0).is_constant());
    }

    #[test]
    fn basis_four_vars_degree_two() {
        assert_eq!(monomial_basis(4, 2).len(), 15);
    }

    #[test]
    fn basis_ordering_agrees_with_monomial_ord() {
        let b = monomial_basis(3, 3);
        assert!(b.monomials().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn evaluate_simple() {
        let p = &(&x(2, 0) * &x(2, 0)) + &(&x(2, 0) * &x(2, 1));
        assert_eq!(p.evaluate(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(Polynomial::zero(3).evaluate(&[0.3, 1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_disk_boundary() {
        let h = &(&x(2, 0).powi(2) + &x(2, 1).powi(2)) - &Polynomial::constant(2, 0.04);
        assert!(h.evaluate(&[0.2, 0.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        assert!(matches!(
            x(2, 0).evaluate(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn products() {
        assert_eq!(&x(1, 0) * &x(1, 0), x(1, 0).powi(2));
        let one = Polynomial::constant(1, 1.0);
        let p = &(&one + &x(1, 0)) * &(&one - &x(1, 0));
        assert_eq!(p, &one - &x(1, 0).powi(2));
    }

    #[test]
    fn mismatched_dimensions_error() {
        assert!(x(2, 0).try_add(&x(3, 0)).is_err());
        assert!(x(2, 0).try_mul(&x(3, 0)).is_err());
    }

    #[test]
    fn zero_terms_are_pruned() {
        let p = &x(2, 0) - &x(2, 0);
        assert!(p.is_zero());
        let q = Polynomial::from_terms(1, [(Monomial::one(1), 1e-16)]).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn identity_substitution_is_noop() {
        let p = &(&x(2, 0).powi(3) - &x(2, 1).scale(2.5)) + &Polynomial::constant(2, 0.7);
        assert_eq!(p.substitute(&Polynomial::vars(2)).unwrap(), p);
    }

    #[test]
    fn substitute_measurement_residual() {
        // p(v) = v - 0.5 with v = y - x1 - x2, y = 0
        let p = &Polynomial::var(1, 0) - &Polynomial::constant(1, 0.5);
        let v = &(-&x(2, 0)) - &x(2, 1);
        let got = p.substitute(&[v]).unwrap();
        let expected = &(&(-&x(2, 0)) - &x(2, 1)) - &Polynomial::constant(2, 0.5);
        assert_eq!(got, expected);
    }

    #[test]
    fn substitute_wrong_count() {
        assert!(x(2, 0).substitute(&[x(2, 0)]).is_err());
    }

    #[test]
    fn gram_identity_and_offdiagonal() {
        let b = monomial_basis(1, 1);
        let (p, _) = gram_expand(&b, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(p, &Polynomial::constant(1, 1.0) + &x(1, 0).powi(2));
        let (p, _) = gram_expand(&b, &[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert_eq!(p, x(1, 0));
    }

    #[test]
    fn gram_all_ones_is_square_of_sum() {
        let b = monomial_basis(2, 1);
        let q = vec![vec![1.0; 3]; 3];
        let (p, map) = gram_expand(&b, &q).unwrap();
        let s = &(&Polynomial::constant(2, 1.0) + &x(2, 0)) + &x(2, 1);
        assert_eq!(p, &s * &s);
        assert_eq!(map.len(), 6);
    }

    #[test]
    fn gram_rejects_wrong_shape() {
        let b = monomial_basis(2, 1);
        assert!(gram_expand(&b, &vec![vec![1.0; 3]; 2]).is_err());
    }

    #[test]
    fn lift_moves_variables() {
        let p = &x(2, 0) * &x(2, 1);
        let lifted = p.lift(4, 2).unwrap();
        assert_eq!(lifted.evaluate(&[9.0, 9.0, 2.0, 3.0]).unwrap(), 6.0);
    }

    #[test]
    fn json_is_sorted_and_round_trips() {
        let p = &x(2, 1).powi(2) + &(&x(2, 0) + &Polynomial::constant(2, -0.04));
        let s = p.to_json();
        assert_eq!(
            s,
            r#"{"n_vars":2,"terms":[{"exps":[0,0],"coef":-0.04},{"exps":[1,0],"coef":1.0},{"exps":[0,2],"coef":1.0}]}"#
        );
        assert_eq!(Polynomial::from_json(&s).unwrap(), p);
    }

    #[test]
    fn json_rejects_bad_exponent_length() {
        assert!(
            Polynomial::from_json(r#"{"n_vars":2,"terms":[{"exps":[1],"coef":1.0}]}"#).is_err()
        );
    }

    #[test]
    fn display_is_readable() {
        let p = &x(2, 0).powi(2) - &Polynomial::constant(2, 0.5);
        assert_eq!(p.to_string(), "-0.5 + x1^2");
    }
}
