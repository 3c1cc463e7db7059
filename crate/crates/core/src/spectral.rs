//! Specializations, largest real roots, Perron–Frobenius data of the labeled
//! transition matrix at positive points, the entropy function and stretch factors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cones::OpenCone;
use crate::error::{Error, Result};
use crate::laurent::LaurentPoly;
use crate::marking::CoordinateSystem;
use crate::twisted::LabeledTransitionGraph;

type Q = BigRational;

pub const DEFAULT_TOL: f64 = 1e-12;
const ITERATION_CAP: usize = 1_000_000;

/// `Σ a_h ζ^{u(h)}`, unit-normalized.
pub fn specialize(p: &LaurentPoly, u: &[i64]) -> Result<LaurentPoly> {
    p.substitute_character(u)?.unit_normalize()
}

/// Dense coefficients `c[k]` of `ζ^k` after clearing negative powers.
fn dense(p: &LaurentPoly) -> Result<Vec<Q>> {
    if p.nvars() != 1 {
        return Err(Error::LengthMismatch(p.nvars(), 1));
    }
    let p = p.unit_normalize()?;
    let deg = p.terms().map(|(e, _)| e[0]).max().unwrap() as usize;
    let mut c = vec![Q::zero(); deg + 1];
    for (e, k) in p.terms() {
        c[e[0] as usize] = Q::from_integer(k.clone());
    }
    Ok(c)
}

fn trim(p: &mut Vec<Q>) {
    while p.len() > 1 && p.last().unwrap().is_zero() {
        p.pop();
    }
}

fn derivative(p: &[Q]) -> Vec<Q> {
    let mut d: Vec<Q> =
        p.iter().enumerate().skip(1).map(|(k, c)| c * Q::from_integer(BigInt::from(k))).collect();
    if d.is_empty() {
        d.push(Q::zero());
    }
    d
}

fn remainder(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !(r.len() == 1 && r[0].is_zero()) {
        let k = r.len() - 1 - db;
        let f = r.last().unwrap() / &lead;
        for (i, c) in b.iter().enumerate() {
            r[i + k] -= &f * c;
        }
        r.pop();
        trim(&mut r);
        if r.len() <= db {
            break;
        }
    }
    trim(&mut r);
    r
}

fn is_zero_poly(p: &[Q]) -> bool {
    p.iter().all(|c| c.is_zero())
}

fn eval(p: &[Q], x: &Q) -> Q {
    p.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
}

/// The Sturm chain `p, p′, −rem(p, p′), …`.
pub struct SturmChain {
    chain: Vec<Vec<Q>>,
}

impl SturmChain {
    fn new(p: Vec<Q>) -> SturmChain {
        let mut chain = vec![p.clone(), derivative(&p)];
        loop {
            let n = chain.len();
            if is_zero_poly(&chain[n - 1]) {
                chain.pop();
                break;
            }
            let r = remainder(&chain[n - 2], &chain[n - 1]);
            if is_zero_poly(&r) {
                break;
            }
            chain.push(r.into_iter().map(|c| -c).collect());
        }
        SturmChain { chain }
    }

    fn sign_changes(&self, x: &Q) -> usize {
        let signs: Vec<i8> = self
            .chain
            .iter()
            .map(|p| {
                let v = eval(p, x);
                if v.is_positive() {
                    1
                } else if v.is_negative() {
                    -1
                } else {
                    0
                }
            })
            .filter(|&s| s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Number of distinct roots in `(a, b]`.
    fn count(&self, a: &Q, b: &Q) -> usize {
        self.sign_changes(a).saturating_sub(self.sign_changes(b))
    }
}

/// The largest positive real root of a one-variable Laurent polynomial.
pub fn largest_real_root(p: &LaurentPoly, tol: f64) -> Result<f64> {
    let c = dense(p)?;
    let n = c.len() - 1;
    if n == 0 {
        return Err(Error::Numeric("no positive real root: constant polynomial".into()));
    }
    let lead = c[n].abs();
    let bound = Q::one() + c[..n].iter().map(|x| x.abs() / &lead).fold(Q::zero(), |a, b| if b > a { b } else { a });
    let sturm = SturmChain::new(c);
    let mut lo = Q::zero();
    let mut hi = bound;
    if sturm.count(&lo, &hi) == 0 {
        return Err(Error::Numeric("no positive real root".into()));
    }
    let tol = Q::from_float(tol.max(1e-300)).unwrap();
    let two = Q::from_integer(BigInt::from(2));
    while &hi - &lo > tol {
        let mid = (&lo + &hi) / &two;
        if sturm.count(&mid, &hi) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(((lo + hi) / two).to_f64().unwrap())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PfEigen {
    pub value: f64,
    /// Left eigenvector, strictly positive, summing to 1.
    pub vector: Vec<f64>,
    /// `‖U·A − E·U‖∞ / E`.
    pub residual: f64,
    pub iterations: usize,
}

/// Perron–Frobenius eigenvalue and left eigenvector of a nonnegative irreducible matrix,
/// by power iteration with `A + I` and Collatz–Wielandt stopping bounds.
pub fn pf_eigen_matrix(a: &[Vec<f64>], tol: f64) -> Result<PfEigen> {
    let n = a.len();
    if n == 0 {
        return Err(Error::Numeric("empty matrix".into()));
    }
    let mut u = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for it in 1..=ITERATION_CAP {
        for j in 0..n {
            next[j] = u[j] + (0..n).map(|i| u[i] * a[i][j]).sum::<f64>();
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for j in 0..n {
            let r = next[j] / u[j];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let s: f64 = next.iter().sum();
        for j in 0..n {
            u[j] = next[j] / s;
        }
        if !(lo.is_finite() && hi.is_finite()) || u.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::Numeric("power iteration lost positivity; matrix not irreducible?".into()));
        }
        let value = (lo + hi) / 2.0 - 1.0;
        if hi - lo <= tol * value.max(f64::MIN_POSITIVE) {
            let residual = (0..n)
                .map(|j| ((0..n).map(|i| u[i] * a[i][j]).sum::<f64>() - value * u[j]).abs())
                .fold(0.0, f64::max)
                / value;
            return Ok(PfEigen { value, vector: u, residual, iterations: it });
        }
    }
    Err(Error::Numeric(format!("power iteration did not converge in {ITERATION_CAP} steps")))
}

/// Perron–Frobenius data of `A(t)` at a positive point `t` (one entry per `H₀` coordinate).
pub fn pf_eigen(l: &LabeledTransitionGraph, point: &[f64], tol: f64) -> Result<PfEigen> {
    if point.len() + 1 != l.b() {
        return Err(Error::LengthMismatch(point.len(), l.b() - 1));
    }
    if point.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Evaluation("point must be positive".into()));
    }
    let a = l.evaluate_with(|label| label.iter().zip(point).map(|(k, t)| t.powi(*k as i32)).product());
    pf_eigen_matrix(&a, tol)
}

/// `F(q) = log E(A(e^{q·c_t})) − q·c_x` for an internal covector `c`.
fn level_function(l: &LabeledTransitionGraph, c: &[f64], q: f64, tol: f64) -> Result<f64> {
    let b = l.b();
    let a = l.evaluate_with(|label| {
        let s: f64 = label.iter().zip(c).map(|(k, x)| *k as f64 * x).sum();
        (q * s).exp()
    });
    let e = pf_eigen_matrix(&a, (tol * 0.1).max(1e-14))?;
    Ok(e.value.ln() - q * c[b - 1])
}

const BRACKET_CAP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct Entropy {
    pub value: f64,
    pub tolerance: f64,
    /// Samples `(q, F(q))` seen while bracketing.
    pub bracket: Vec<(f64, f64)>,
    pub sign_changes: usize,
}

/// `ℌ(u)`: the unique `q > 0` with `log E(A(e^{q·u})) = q·u(x)`, for `u` (in `coords`)
/// inside `cone`.
pub fn entropy(
    l: &LabeledTransitionGraph,
    coords: &CoordinateSystem,
    cone: &OpenCone,
    u: &[f64],
    tol: f64,
) -> Result<Entropy> {
    if !cone.contains_f64(u)? {
        return Err(Error::Numeric(format!("class {u:?} lies outside the cone")));
    }
    let c = coords.covector_to_internal_f64(u);
    let f = |q: f64| level_function(l, &c, q, tol);
    let mut lo = 0.0;
    let flo = f(lo)?;
    let mut bracket = vec![(lo, flo)];
    if !(flo > 0.0) {
        return Err(Error::Numeric(format!("F(0) = {flo} is not positive; the map is not expanding")));
    }
    let mut hi = 1.0;
    loop {
        let fh = f(hi)?;
        bracket.push((hi, fh));
        if fh < 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Err(Error::Numeric(format!("could not bracket the level set; samples {bracket:?}")));
        }
    }
    let sign_changes = bracket.windows(2).filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0)).count();
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Entropy { value: 0.5 * (lo + hi), tolerance: tol, bracket, sign_changes })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stretch {
    pub value: f64,
    pub entropy: f64,
    /// Largest root of the specialization, when a polynomial is supplied.
    pub sturm: Option<f64>,
}

/// `Λ(u) = e^{ℌ(u)}` for integral `u`, cross-checked against the specialization of `poly`.
pub fn stretch(
    l: &LabeledTransitionGraph,
    coords: &CoordinateSystem,
    cone: &OpenCone,
    u: &[i64],
    poly: Option<&LaurentPoly>,
    tol: f64,
) -> Result<Stretch> {
    let uf: Vec<f64> = u.iter().map(|&x| x as f64).collect();
    let h = entropy(l, coords, cone, &uf, tol)?;
    let sturm = match poly {
        Some(p) => Some(largest_real_root(&specialize(p, u)?, tol)?),
        None => None,
    };
    Ok(Stretch { value: h.value.exp(), entropy: h.value, sturm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::fried_cone;
    use crate::fixtures;
    use crate::marking::MarkedAbelianization;

    fn zeta(terms: &[(i64, i64)]) -> LaurentPoly {
        LaurentPoly::from_terms(1, terms.iter().map(|&(e, c)| (vec![e], c)))
    }

    struct Running {
        l: LabeledTransitionGraph,
        coords: CoordinateSystem,
        cone: OpenCone,
        poly: LaurentPoly,
        m: MarkedAbelianization,
    }

    fn running() -> Running {
        let m = fixtures::running_marked();
        let coords = fixtures::running_coordinates(&m);
        let l = LabeledTransitionGraph::build(&m);
        let cone = fried_cone(&fixtures::running_orbit_classes(), 2, None).unwrap();
        Running { l, coords, cone, poly: fixtures::running_polynomial(), m }
    }

    #[test]
    fn specializations() {
        let p = fixtures::running_polynomial();
        let u1 = specialize(&p, &[-1, 2]).unwrap();
        assert_eq!(u1, zeta(&[(9, 1), (5, -1), (4, -1), (3, -1), (2, -1), (1, -1), (0, -2)]));
        let u2 = specialize(&p, &[-1, 1]).unwrap();
        assert_eq!(u2, zeta(&[(6, 1), (3, -3), (1, -3), (0, -1)]));
        // at u0: the characteristic polynomial of A(1), computed independently
        let u0 = specialize(&p, &[0, 1]).unwrap();
        let a = fixtures::running_example().transition_matrix().to_i64_rows();
        assert_eq!(u0, zeta(&char_poly_faddeev(&a)));
    }

    /// Faddeev–LeVerrier over the integers.
    fn char_poly_faddeev(a: &[Vec<i64>]) -> Vec<(i64, i64)> {
        let n = a.len();
        let mul = |x: &Vec<Vec<i64>>, y: &[Vec<i64>]| -> Vec<Vec<i64>> {
            (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect()).collect()
        };
        let mut m = vec![vec![0; n]; n];
        let mut c = vec![0i64; n + 1];
        c[n] = 1;
        let a = a.to_vec();
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut mk = mul(&a, &m);
            for i in 0..n {
                mk[i][i] += c[n - k + 1];
            }
            let am = mul(&a, &mk);
            let tr: i64 = (0..n).map(|i| am[i][i]).sum();
            c[n - k] = -tr / k as i64;
            m = mk;
        }
        c.iter().enumerate().filter(|(_, v)| **v != 0).map(|(e, v)| (e as i64, *v)).collect()
    }

    #[test]
    fn largest_roots() {
        let p = fixtures::running_polynomial();
        let r1 = largest_real_root(&specialize(&p, &[-1, 2]).unwrap(), 1e-12).unwrap();
        assert!((r1 - 1.35827).abs() < 1e-4, "{r1}");
        let r2 = largest_real_root(&specialize(&p, &[-1, 1]).unwrap(), 1e-12).unwrap();
        assert!((r2 - 1.632992).abs() < 1e-4, "{r2}");
        assert!((largest_real_root(&zeta(&[(1, 1), (0, -2)]), 1e-12).unwrap() - 2.0).abs() < 1e-11);
        // double root
        assert!((largest_real_root(&zeta(&[(2, 1), (1, -4), (0, 4)]), 1e-12).unwrap() - 2.0).abs() < 1e-11);
        assert!(largest_real_root(&zeta(&[(2, 1), (0, 1)]), 1e-12).is_err());
        assert!(largest_real_root(&zeta(&[(1, 1), (0, 1)]), 1e-12).is_err());
    }

    #[test]
    fn pf_examples() {
        let e = pf_eigen_matrix(&[vec![2.0]], 1e-12).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
        assert_eq!(e.vector, vec![1.0]);
        let r = running();
        let at_one = pf_eigen(&r.l, &[1.0], 1e-12).unwrap();
        let sturm = largest_real_root(&specialize(&r.poly, &[0, 1]).unwrap(), 1e-13).unwrap();
        assert!((at_one.value - sturm).abs() < 1e-9);
        assert!(at_one.residual < 1e-11);
        assert!(at_one.vector.iter().all(|x| *x > 0.0));
        // log E is convex in log t
        let lo = pf_eigen(&r.l, &[0.5], 1e-12).unwrap().value.ln();
        let hi = pf_eigen(&r.l, &[2.0], 1e-12).unwrap().value.ln();
        assert!(at_one.value.ln() <= 0.5 * (lo + hi) + 1e-12);
        assert!(pf_eigen(&r.l, &[-1.0], 1e-12).is_err());
    }

    #[test]
    fn entropy_and_stretch() {
        let r = running();
        let u1 = entropy(&r.l, &r.coords, &r.cone, &[-1.0, 2.0], 1e-12).unwrap();
        assert!((u1.value - 1.35827f64.ln()).abs() < 1e-4);
        assert_eq!(u1.sign_changes, 1);
        let u0 = entropy(&r.l, &r.coords, &r.cone, &[0.0, 1.0], 1e-12).unwrap().value;
        let twice = entropy(&r.l, &r.coords, &r.cone, &[0.0, 2.0], 1e-12).unwrap().value;
        assert!((twice - u0 / 2.0).abs() < 1e-9);
        let sturm = largest_real_root(&specialize(&r.poly, &[0, 1]).unwrap(), 1e-13).unwrap();
        assert!((u0 - sturm.ln()).abs() < 1e-6);
        assert!(entropy(&r.l, &r.coords, &r.cone, &[1.0, 1.0], 1e-12).is_err());
        let small = entropy(&r.l, &r.coords, &r.cone, &[0.0, 0.1], 1e-12).unwrap().value;
        assert!((small - 10.0 * u0).abs() < 1e-9, "{small}");

        for (u, want) in [([-1, 2], 1.35827), ([-1, 1], 1.632992)] {
            let s = stretch(&r.l, &r.coords, &r.cone, &u, Some(&r.poly), 1e-12).unwrap();
            assert!((s.value - want).abs() < 1e-4);
            assert!((s.value - s.sturm.unwrap()).abs() < 1e-6);
            let s3 = stretch(&r.l, &r.coords, &r.cone, &[3 * u[0], 3 * u[1]], None, 1e-12).unwrap();
            assert!((s3.value - s.value.powf(1.0 / 3.0)).abs() < 1e-6);
        }
        assert_eq!(r.m.b(), 2);
    }
}
