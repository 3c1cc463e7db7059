//! Multivariate Laurent polynomials with integer coefficients (the group ring
//! of a free abelian group) and square matrices over them.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Exponent = Vec<i64>;

/// A finite sum of monomials `c · v₁^{e₁} ⋯ v_n^{e_n}`; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LaurentPoly {
    nvars: usize,
    terms: BTreeMap<Exponent, BigInt>,
}

impl LaurentPoly {
    pub fn zero(nvars: usize) -> LaurentPoly {
        LaurentPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn one(nvars: usize) -> LaurentPoly {
        LaurentPoly::monomial(vec![0; nvars], BigInt::one())
    }

    pub fn constant(nvars: usize, c: impl Into<BigInt>) -> LaurentPoly {
        LaurentPoly::monomial(vec![0; nvars], c.into())
    }

    pub fn monomial(exponent: Exponent, coeff: impl Into<BigInt>) -> LaurentPoly {
        let mut p = LaurentPoly::zero(exponent.len());
        p.add_term(exponent, coeff.into());
        p
    }

    /// The variable `v_i` among `nvars`.
    pub fn var(i: usize, nvars: usize) -> LaurentPoly {
        let mut e = vec![0; nvars];
        e[i] = 1;
        LaurentPoly::monomial(e, 1)
    }

    pub fn from_terms<I, C>(nvars: usize, terms: I) -> LaurentPoly
    where
        I: IntoIterator<Item = (Exponent, C)>,
        C: Into<BigInt>,
    {
        let mut p = LaurentPoly::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent length");
            p.add_term(e, c.into());
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical (lexicographic) order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Exponent, &BigInt)> {
        self.terms.iter()
    }

    pub fn coeff(&self, e: &[i64]) -> BigInt {
        self.terms.get(e).cloned().unwrap_or_default()
    }

    fn add_term(&mut self, e: Exponent, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check(&self, other: &LaurentPoly) -> Result<()> {
        if self.nvars == other.nvars {
            Ok(())
        } else {
            Err(Error::LengthMismatch(self.nvars, other.nvars))
        }
    }

    pub fn try_add(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &LaurentPoly) -> Result<LaurentPoly> {
        self.check(other)?;
        let mut acc: BTreeMap<Exponent, BigInt> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_default() += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(LaurentPoly { nvars: self.nvars, terms: acc })
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, k: &BigInt) -> LaurentPoly {
        if k.is_zero() {
            return LaurentPoly::zero(self.nvars);
        }
        LaurentPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * k)).collect(),
        }
    }

    /// Multiplies by the monomial with exponent `shift`.
    pub fn shift(&self, shift: &[i64]) -> LaurentPoly {
        assert_eq!(shift.len(), self.nvars);
        LaurentPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.iter().zip(shift).map(|(a, b)| a + b).collect(), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> LaurentPoly {
        let mut out = LaurentPoly::one(self.nvars);
        for _ in 0..k {
            out = out.try_mul(self).expect("same ring");
        }
        out
    }

    /// Re-expresses every exponent through `f`, collecting coefficients.
    pub fn map_exponents(&self, nvars: usize, mut f: impl FnMut(&[i64]) -> Exponent) -> LaurentPoly {
        let mut out = LaurentPoly::zero(nvars);
        for (e, c) in &self.terms {
            let img = f(e);
            assert_eq!(img.len(), nvars);
            out.add_term(img, c.clone());
        }
        out
    }

    /// Applies the integer matrix `m` (rows = new coordinates) to every exponent.
    pub fn linear_change(&self, m: &[Vec<i64>]) -> LaurentPoly {
        self.map_exponents(m.len(), |e| {
            m.iter().map(|row| row.iter().zip(e).map(|(a, b)| a * b).sum()).collect()
        })
    }

    /// Single-variable polynomial `Σ a_h ζ^{u(h)}`.
    pub fn substitute_character(&self, u: &[i64]) -> Result<LaurentPoly> {
        if u.len() != self.nvars {
            return Err(Error::LengthMismatch(u.len(), self.nvars));
        }
        Ok(self.map_exponents(1, |e| vec![e.iter().zip(u).map(|(a, b)| a * b).sum()]))
    }

    /// Exponent set; the Newton polytope is its convex hull.
    pub fn newton_support(&self) -> Result<Vec<Exponent>> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(self.terms.keys().cloned().collect())
    }

    /// Canonical representative up to `±monomial`: every variable's minimum exponent
    /// is zero and the lexicographically largest term is positive.
    pub fn unit_normalize(&self) -> Result<LaurentPoly> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let mins: Vec<i64> = (0..self.nvars)
            .map(|i| self.terms.keys().map(|e| e[i]).min().unwrap())
            .collect();
        let shift: Vec<i64> = mins.iter().map(|m| -m).collect();
        let out = self.shift(&shift);
        let (_, lead) = out.terms.iter().next_back().unwrap();
        Ok(if lead.is_negative() { out.neg() } else { out })
    }

    /// True when the two polynomials agree up to multiplication by `±monomial`.
    pub fn equal_up_to_units(&self, other: &LaurentPoly) -> bool {
        match (self.unit_normalize(), other.unit_normalize()) {
            (Ok(a), Ok(b)) => a == b,
            (Err(_), Err(_)) => self.is_zero() && other.is_zero(),
            _ => false,
        }
    }

    fn check_point_len(&self, len: usize) -> Result<()> {
        if len == self.nvars {
            return Ok(());
        }
        // polynomials over the fibre lattice may omit the last coordinate
        if len + 1 == self.nvars && self.terms.keys().all(|e| e[len] == 0) {
            return Ok(());
        }
        Err(Error::LengthMismatch(len, self.nvars))
    }

    /// Exact value at a point with positive rational coordinates.
    pub fn eval_positive(&self, point: &[BigRational]) -> Result<BigRational> {
        self.check_point_len(point.len())?;
        if let Some(bad) = point.iter().find(|x| !x.is_positive()) {
            return Err(Error::Evaluation(format!("nonpositive coordinate {bad}")));
        }
        let mut total = BigRational::zero();
        for (e, c) in &self.terms {
            let mut term = BigRational::from_integer(c.clone());
            for (x, &k) in point.iter().zip(e) {
                term *= rational_pow(x, k);
            }
            total += term;
        }
        Ok(total)
    }

    pub fn eval_positive_f64(&self, point: &[f64]) -> Result<f64> {
        self.check_point_len(point.len())?;
        if let Some(bad) = point.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Evaluation(format!("nonpositive coordinate {bad}")));
        }
        let mut total = 0.0;
        for (e, c) in &self.terms {
            let mut term = c.to_f64().unwrap_or(f64::NAN);
            for (x, &k) in point.iter().zip(e) {
                term *= x.powi(k as i32);
            }
            total += term;
        }
        Ok(total)
    }

    /// Sum of coefficients (value at the all-ones point).
    pub fn coefficient_sum(&self) -> BigInt {
        self.terms.values().sum()
    }

    /// Maximum of `⟨g, e⟩` over the support.
    pub fn max_degree(&self, grading: &[i64]) -> Option<i64> {
        self.terms.keys().map(|e| dot(grading, e)).max()
    }

    pub fn format_with(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (e, c)) in self.terms.iter().rev().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .zip(names)
                .filter(|(k, _)| **k != 0)
                .map(|(k, n)| if *k == 1 { n.clone() } else { format!("{n}^{k}") })
                .collect();
            let abs = c.abs();
            let sign = if c.is_negative() { "-" } else { "+" };
            if i == 0 {
                if c.is_negative() {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {sign} "));
            }
            if mono.is_empty() {
                out.push_str(&abs.to_string());
            } else {
                if !abs.is_one() {
                    out.push_str(&format!("{abs}*"));
                }
                out.push_str(&mono.join("*"));
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rational_pow(x: &BigRational, k: i64) -> BigRational {
    let p = num_traits::pow(x.clone(), k.unsigned_abs() as usize);
    if k < 0 {
        p.recip()
    } else {
        p
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.nvars).map(|i| format!("v{}", i + 1)).collect();
        f.write_str(&self.format_with(&names))
    }
}

/// Square matrix over a Laurent polynomial ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingMatrix {
    n: usize,
    nvars: usize,
    entries: Vec<LaurentPoly>,
}

impl RingMatrix {
    pub fn zeros(n: usize, nvars: usize) -> RingMatrix {
        RingMatrix { n, nvars, entries: vec![LaurentPoly::zero(nvars); n * n] }
    }

    pub fn identity(n: usize, nvars: usize) -> RingMatrix {
        let mut m = RingMatrix::zeros(n, nvars);
        for i in 0..n {
            m.set(i, i, LaurentPoly::one(nvars));
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: LaurentPoly) {
        assert_eq!(p.nvars(), self.nvars);
        self.entries[i * self.n + j] = p;
    }

    pub fn add_to(&mut self, i: usize, j: usize, p: &LaurentPoly) {
        let cur = self.get(i, j).try_add(p).expect("same ring");
        self.set(i, j, cur);
    }

    pub fn mul(&self, other: &RingMatrix) -> RingMatrix {
        assert_eq!(self.n, other.n);
        let mut out = RingMatrix::zeros(self.n, self.nvars);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut acc = LaurentPoly::zero(self.nvars);
                for k in 0..self.n {
                    acc = acc.try_add(&self.get(i, k).try_mul(other.get(k, j)).unwrap()).unwrap();
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// `v·I − self`, where `v` is variable `var`.
    pub fn char_matrix(&self, var: usize) -> RingMatrix {
        let x = LaurentPoly::var(var, self.nvars);
        let mut out = RingMatrix::zeros(self.n, self.nvars);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut e = self.get(i, j).neg();
                if i == j {
                    e = e.try_add(&x).unwrap();
                }
                out.set(i, j, e);
            }
        }
        out
    }

    /// Exact determinant by cofactor expansion along rows with minors memoised
    /// by their column set.
    pub fn determinant(&self) -> LaurentPoly {
        let n = self.n;
        assert!(n < 26, "determinant of a {n}x{n} matrix is out of reach");
        let full = (1usize << n) - 1;
        // minors[mask]: rows n-|mask|..n against the columns in mask
        let mut minors: Vec<Option<LaurentPoly>> = vec![None; full + 1];
        minors[0] = Some(LaurentPoly::one(self.nvars));
        let mut by_size: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for mask in 1..=full {
            by_size[mask.count_ones() as usize].push(mask);
        }
        for (size, masks) in by_size.iter().enumerate().skip(1) {
            let row = n - size;
            for &mask in masks {
                let mut acc = LaurentPoly::zero(self.nvars);
                let mut below = 0;
                for j in 0..n {
                    if mask & (1 << j) == 0 {
                        continue;
                    }
                    let entry = self.get(row, j);
                    if !entry.is_zero() {
                        if let Some(minor) = &minors[mask & !(1 << j)] {
                            if !minor.is_zero() {
                                let term = entry.try_mul(minor).unwrap();
                                acc = if below % 2 == 0 {
                                    acc.try_add(&term).unwrap()
                                } else {
                                    acc.try_sub(&term).unwrap()
                                };
                            }
                        }
                    }
                    below += 1;
                }
                minors[mask] = Some(acc);
            }
            if size >= 2 {
                for &mask in &by_size[size - 2] {
                    if mask != 0 {
                        minors[mask] = None;
                    }
                }
            }
        }
        minors[full].take().unwrap()
    }
}

/// gcd of a list, zero for an empty or all-zero list.
pub(crate) fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}
