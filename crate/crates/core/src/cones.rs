//! Open rational polyhedral cones `{u : ⟨n, u⟩ > 0 for all n}` with exact
//! membership, redundancy removal and equality testing.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::laurent::{dot, gcd_all, LaurentPoly};

type Q = BigRational;

fn q(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenCone {
    dim: usize,
    names: Vec<String>,
    inequalities: Vec<Vec<i64>>,
    minimal: bool,
}

/// How one inequality of a cone is implied by (or fails for) another cone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// `n = Σ λ_k n_k` over the inequalities `n_k` of the other cone, `λ ≥ 0`.
    Combination { inequality: Vec<i64>, lambda: Vec<Q> },
    /// A point of the other cone where `⟨n, u⟩ ≤ 0`.
    Separating { inequality: Vec<i64>, point: Vec<Q> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeComparison {
    pub equal: bool,
    /// Certificates for the inequalities of the second cone against the first.
    pub forward: Vec<Certificate>,
    /// Certificates for the inequalities of the first cone against the second.
    pub backward: Vec<Certificate>,
}

impl ConeComparison {
    /// A point lying in exactly one of the two cones, when they differ.
    pub fn witness(&self) -> Option<&[Q]> {
        self.forward.iter().chain(&self.backward).find_map(|c| match c {
            Certificate::Separating { point, .. } => Some(point.as_slice()),
            _ => None,
        })
    }
}

fn primitive(n: &[i64]) -> Vec<i64> {
    let g = gcd_all(n);
    if g == 0 {
        n.to_vec()
    } else {
        n.iter().map(|x| x / g).collect()
    }
}

impl OpenCone {
    pub fn new(dim: usize, names: Vec<String>, inequalities: Vec<Vec<i64>>) -> Result<OpenCone> {
        if names.len() != dim {
            return Err(Error::LengthMismatch(names.len(), dim));
        }
        let mut ineqs = Vec::with_capacity(inequalities.len());
        for n in inequalities {
            if n.len() != dim {
                return Err(Error::LengthMismatch(n.len(), dim));
            }
            ineqs.push(primitive(&n));
        }
        ineqs.sort();
        ineqs.dedup();
        Ok(OpenCone { dim, names, inequalities: ineqs, minimal: false })
    }

    fn default_names(dim: usize) -> Vec<String> {
        (1..=dim).map(|i| format!("u{i}")).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn inequalities(&self) -> &[Vec<i64>] {
        &self.inequalities
    }

    pub fn is_minimal(&self) -> bool {
        self.minimal
    }

    pub fn with_names(mut self, names: Vec<String>) -> OpenCone {
        assert_eq!(names.len(), self.dim);
        self.names = names;
        self
    }

    pub fn contains(&self, u: &[Q]) -> Result<bool> {
        if u.len() != self.dim {
            return Err(Error::LengthMismatch(u.len(), self.dim));
        }
        Ok(self.inequalities.iter().all(|n| {
            let v: Q = n.iter().zip(u).map(|(a, b)| q(*a) * b).sum();
            v.is_positive()
        }))
    }

    pub fn contains_int(&self, u: &[i64]) -> Result<bool> {
        if u.len() != self.dim {
            return Err(Error::LengthMismatch(u.len(), self.dim));
        }
        Ok(self.inequalities.iter().all(|n| dot(n, u) > 0))
    }

    pub fn contains_f64(&self, u: &[f64]) -> Result<bool> {
        if u.len() != self.dim {
            return Err(Error::LengthMismatch(u.len(), self.dim));
        }
        Ok(self
            .inequalities
            .iter()
            .all(|n| n.iter().zip(u).map(|(a, b)| *a as f64 * b).sum::<f64>() > 0.0))
    }

    /// True when no `u` satisfies every inequality.
    pub fn is_empty(&self) -> bool {
        // N u ≥ 1 is feasible iff N u > 0 is
        let rows: Vec<Vec<Q>> = self.inequalities.iter().map(|n| n.iter().map(|&x| q(x)).collect()).collect();
        let rhs = vec![Q::one(); rows.len()];
        feasible_point(&rows, &rhs, self.dim).is_none()
    }

    /// A point in the cone, if any.
    pub fn interior_point(&self) -> Option<Vec<Q>> {
        let rows: Vec<Vec<Q>> = self.inequalities.iter().map(|n| n.iter().map(|&x| q(x)).collect()).collect();
        let rhs = vec![Q::one(); rows.len()];
        feasible_point(&rows, &rhs, self.dim)
    }

    /// Indices of inequalities implied by the others.
    pub fn redundant(&self) -> Vec<usize> {
        (0..self.inequalities.len())
            .filter(|&i| self.inequalities[i].iter().any(|x| *x != 0))
            .filter(|&i| {
                let others: Vec<Vec<i64>> = self
                    .inequalities
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, n)| n.clone())
                    .collect();
                implies(&others, &self.inequalities[i], self.dim).is_ok()
            })
            .collect()
    }

    /// The same cone cut out by an irredundant subset of the inequalities.
    pub fn minimize(&self) -> OpenCone {
        let mut keep = self.inequalities.clone();
        let mut i = 0;
        while i < keep.len() {
            let others: Vec<Vec<i64>> =
                keep.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, n)| n.clone()).collect();
            if keep[i].iter().any(|x| *x != 0) && implies(&others, &keep[i], self.dim).is_ok()
            {
                keep.remove(i);
            } else {
                i += 1;
            }
        }
        OpenCone { dim: self.dim, names: self.names.clone(), inequalities: keep, minimal: true }
    }

    /// Extremal rays of the closure of a two-dimensional cone.
    pub fn rays_2d(&self) -> Option<Vec<[i64; 2]>> {
        if self.dim != 2 {
            return None;
        }
        let min = self.minimize();
        let mut rays = Vec::new();
        for n in &min.inequalities {
            for r in [[-n[1], n[0]], [n[1], -n[0]]] {
                if min.inequalities.iter().all(|m| m[0] * r[0] + m[1] * r[1] >= 0) && !rays.contains(&r) {
                    rays.push(r);
                }
            }
        }
        rays.sort();
        Some(rays)
    }
}

/// Cone dual to the `x^m` vertex of the Newton polytope: `⟨j′ − j, u⟩ > 0`
/// for the top exponent `j′` against every other exponent `j`.
pub fn mcmullen_cone(p: &LaurentPoly, grading: Option<&[i64]>, names: Option<Vec<String>>) -> Result<OpenCone> {
    let dim = p.nvars();
    let default: Vec<i64> = (0..dim).map(|i| (i + 1 == dim) as i64).collect();
    let grading = grading.unwrap_or(&default);
    let top = p.max_degree(grading).ok_or(Error::ZeroPolynomial)?;
    let tops: Vec<&Vec<i64>> = p.terms().map(|(e, _)| e).filter(|e| dot(grading, e) == top).collect();
    if tops.len() != 1 {
        return Err(Error::Cone(format!("{} terms of top degree {top}; need exactly one", tops.len())));
    }
    let jt = tops[0].clone();
    let ineqs = p
        .terms()
        .map(|(e, _)| e)
        .filter(|e| **e != jt)
        .map(|e| jt.iter().zip(e).map(|(a, b)| a - b).collect())
        .collect();
    OpenCone::new(dim, names.unwrap_or_else(|| OpenCone::default_names(dim)), ineqs)
}

/// Classes positive on every given orbit class.
pub fn fried_cone(classes: &[Vec<i64>], dim: usize, names: Option<Vec<String>>) -> Result<OpenCone> {
    OpenCone::new(dim, names.unwrap_or_else(|| OpenCone::default_names(dim)), classes.to_vec())
}

/// Decides whether `{N u > 0} ⊆ {n u > 0}`; on success returns `λ ≥ 0` with `n = Σ λ_k N_k`,
/// otherwise a point with `N u ≥ 0` (and `≥ 1` when the cone is nonempty) and `n u ≤ 0`.
fn implies(ineqs: &[Vec<i64>], n: &[i64], dim: usize) -> std::result::Result<Vec<Q>, Vec<Q>> {
    // infeasibility of {N u ≥ 0, −n u ≥ 1} ⇔ n ∈ cone(N)
    let mut rows: Vec<Vec<Q>> = ineqs.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect();
    let mut rhs = vec![Q::zero(); rows.len()];
    rows.push(n.iter().map(|&x| q(-x)).collect());
    rhs.push(Q::one());
    if let Some(u0) = feasible_point(&rows, &rhs, dim) {
        // prefer a separating point strictly inside the cone
        let mut strict = rhs.clone();
        for r in strict.iter_mut().take(ineqs.len()) {
            *r = Q::one();
        }
        *strict.last_mut().unwrap() = Q::zero();
        let point = feasible_point(&rows, &strict, dim).unwrap_or(u0);
        return Err(point);
    }
    // λ ≥ 0 with Nᵀ λ = n
    let k = ineqs.len();
    let a: Vec<Vec<Q>> = (0..dim).map(|i| (0..k).map(|j| q(ineqs[j][i])).collect()).collect();
    let b: Vec<Q> = n.iter().map(|&x| q(x)).collect();
    let lambda = simplex_nonneg(&a, &b).expect("Farkas alternative");
    Ok(lambda)
}

/// Exact comparison of two nonempty open cones.
pub fn cones_equal(c1: &OpenCone, c2: &OpenCone) -> Result<ConeComparison> {
    if c1.dim != c2.dim {
        return Err(Error::LengthMismatch(c1.dim, c2.dim));
    }
    for c in [c1, c2] {
        if c.is_empty() {
            return Err(Error::Cone("empty cone".into()));
        }
    }
    let certify = |from: &OpenCone, to: &OpenCone| -> Vec<Certificate> {
        to.inequalities
            .iter()
            .map(|n| match implies(&from.inequalities, n, from.dim) {
                Ok(lambda) => Certificate::Combination { inequality: n.clone(), lambda },
                Err(point) => Certificate::Separating { inequality: n.clone(), point },
            })
            .collect()
    };
    let forward = certify(c1, c2);
    let backward = certify(c2, c1);
    let equal = forward
        .iter()
        .chain(&backward)
        .all(|c| matches!(c, Certificate::Combination { .. }));
    Ok(ConeComparison { equal, forward, backward })
}

/// Some `x` with `A x ≥ b`, by Fourier–Motzkin elimination in low dimension and
/// the simplex method otherwise.
pub fn feasible_point(a: &[Vec<Q>], b: &[Q], dim: usize) -> Option<Vec<Q>> {
    if dim <= 4 {
        fourier_motzkin(a, b, dim)
    } else {
        simplex_point(a, b, dim)
    }
}

/// Normalizes a row `(a, β)` meaning `a·x ≥ β` to a canonical positive multiple.
fn normalize_row(mut row: (Vec<Q>, Q)) -> (Vec<Q>, Q) {
    let scale = row.0.iter().chain(std::iter::once(&row.1)).find(|x| !x.is_zero()).map(|x| x.abs());
    if let Some(s) = scale {
        for x in row.0.iter_mut() {
            *x /= &s;
        }
        row.1 /= &s;
    }
    row
}

pub fn fourier_motzkin(a: &[Vec<Q>], b: &[Q], dim: usize) -> Option<Vec<Q>> {
    let mut stages: Vec<Vec<(Vec<Q>, Q)>> = Vec::with_capacity(dim + 1);
    let mut sys: Vec<(Vec<Q>, Q)> = a.iter().cloned().zip(b.iter().cloned()).map(normalize_row).collect();
    for k in (0..dim).rev() {
        sys.sort();
        sys.dedup();
        stages.push(sys.clone());
        let (mut pos, mut neg, mut zero) = (Vec::new(), Vec::new(), Vec::new());
        for r in sys {
            if r.0[k].is_positive() {
                pos.push(r);
            } else if r.0[k].is_negative() {
                neg.push(r);
            } else {
                zero.push(r);
            }
        }
        let mut next = zero;
        for p in &pos {
            for n in &neg {
                // p/|p_k| + n/|n_k| eliminates x_k
                let cp = p.0[k].clone();
                let cn = -n.0[k].clone();
                let coeffs: Vec<Q> = p.0.iter().zip(&n.0).map(|(x, y)| x / &cp + y / &cn).collect();
                next.push(normalize_row((coeffs, &p.1 / &cp + &n.1 / &cn)));
            }
        }
        sys = next;
    }
    if sys.iter().any(|r| r.1.is_positive()) {
        return None;
    }
    let mut x = vec![Q::zero(); dim];
    for (stage, k) in stages.iter().rev().zip(0..dim) {
        let mut lo: Option<Q> = None;
        let mut hi: Option<Q> = None;
        for (coeffs, beta) in stage {
            let c = &coeffs[k];
            if c.is_zero() {
                continue;
            }
            let rest: Q = (0..k).map(|i| &coeffs[i] * &x[i]).sum();
            let bound = (beta - rest) / c;
            if c.is_positive() {
                if lo.as_ref().map_or(true, |l| bound > *l) {
                    lo = Some(bound);
                }
            } else if hi.as_ref().map_or(true, |h| bound < *h) {
                hi = Some(bound);
            }
        }
        x[k] = match (lo, hi) {
            (Some(l), Some(h)) => {
                debug_assert!(l <= h);
                (l + h) / q(2)
            }
            (Some(l), None) => l.ceil() + Q::one(),
            (None, Some(h)) => h.floor() - Q::one(),
            (None, None) => Q::zero(),
        };
    }
    Some(x)
}

/// `A x ≥ b` with free `x`, via `x = x⁺ − x⁻` and surplus variables.
pub fn simplex_point(a: &[Vec<Q>], b: &[Q], dim: usize) -> Option<Vec<Q>> {
    let r = a.len();
    let rows: Vec<Vec<Q>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out: Vec<Q> = row.clone();
            out.extend(row.iter().map(|x| -x));
            out.extend((0..r).map(|j| if i == j { -Q::one() } else { Q::zero() }));
            out
        })
        .collect();
    let v = simplex_nonneg(&rows, b)?;
    Some((0..dim).map(|i| &v[i] - &v[dim + i]).collect())
}

/// Phase-one simplex with Bland's rule: some `x ≥ 0` with `A x = b`.
pub fn simplex_nonneg(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let r = a.len();
    let n = a.first().map_or(0, |row| row.len());
    // tableau columns: n originals, r artificials, rhs
    let width = n + r + 1;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(r + 1);
    for i in 0..r {
        let flip = b[i].is_negative();
        let mut row: Vec<Q> = a[i].iter().map(|x| if flip { -x } else { x.clone() }).collect();
        row.extend((0..r).map(|j| if i == j { Q::one() } else { Q::zero() }));
        row.push(if flip { -b[i].clone() } else { b[i].clone() });
        t.push(row);
    }
    // objective: minimise Σ artificials, written as reduced costs
    let mut obj = vec![Q::zero(); width];
    for row in &t {
        for j in 0..n {
            obj[j] -= &row[j];
        }
        obj[width - 1] -= &row[width - 1];
    }
    let mut basis: Vec<usize> = (n..n + r).collect();
    loop {
        let Some(enter) = (0..n + r).find(|&j| obj[j].is_negative()) else { break };
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..r {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else { break };
        let piv = t[pr][enter].clone();
        for x in t[pr].iter_mut() {
            *x /= &piv;
        }
        let prow = t[pr].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != pr && !row[enter].is_zero() {
                let k = row[enter].clone();
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= &k * p;
                }
            }
        }
        if !obj[enter].is_zero() {
            let k = obj[enter].clone();
            for (x, p) in obj.iter_mut().zip(&prow) {
                *x -= &k * p;
            }
        }
        basis[pr] = enter;
    }
    if !obj[width - 1].is_zero() {
        return None;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1].clone();
        }
    }
    Some(x)
}
