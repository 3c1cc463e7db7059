//! Marked abelianization: spanning tree, cycle basis, the induced action on
//! first homology, its Smith form, and the coinvariant lattice `H₀` together
//! with the splitting `H = H₀ ⊕ ℤ·x` where `x` is the stable letter at the root.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graphcore::{EdgePath, GraphMap, IntMatrix, Subdivision};

/// A cellular 1-chain: one integer coefficient per edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chain(pub Vec<BigInt>);

impl Chain {
    pub fn zero(m: usize) -> Chain {
        Chain(vec![BigInt::zero(); m])
    }

    pub fn of_path(m: usize, path: &EdgePath) -> Chain {
        let mut c = Chain::zero(m);
        for s in &path.steps {
            c.0[s.edge] += s.sign.as_i64();
        }
        c
    }

    pub fn add(&self, other: &Chain) -> Chain {
        Chain(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Chain) -> Chain {
        Chain(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add_edge(&mut self, e: usize, k: i64) {
        self.0[e] += k;
    }

    /// Pushes the chain through the edge images of `f`.
    pub fn push_forward(&self, f: &GraphMap) -> Chain {
        let m = f.num_edges();
        let mut out = Chain::zero(m);
        for (e, k) in self.0.iter().enumerate() {
            if k.is_zero() {
                continue;
            }
            for s in &f.edge_image(e).steps {
                out.0[s.edge] += k * s.sign.as_i64();
            }
        }
        out
    }

    /// Boundary as a vertex vector (terminus minus origin).
    pub fn boundary(&self, f: &GraphMap) -> Vec<BigInt> {
        let g = f.graph();
        let mut out = vec![BigInt::zero(); g.num_vertices()];
        for (e, k) in self.0.iter().enumerate() {
            out[g.edge(e).terminus] += k;
            out[g.edge(e).origin] -= k;
        }
        out
    }
}

/// `u · a · v = d` with `u`, `v` unimodular and `d` diagonal with each entry dividing the next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Smith {
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub d: IntMatrix,
    pub rank: usize,
}

pub fn smith_normal_form(a: &IntMatrix) -> Smith {
    let (r, c) = (a.rows(), a.cols());
    let mut d = a.clone();
    let mut u = IntMatrix::identity(r);
    let mut u_inv = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);

    fn row_axpy(m: &mut IntMatrix, dst: usize, src: usize, k: &BigInt) {
        for j in 0..m.cols() {
            let val = m.get(dst, j) + k * m.get(src, j);
            m.set(dst, j, val);
        }
    }
    fn col_axpy(m: &mut IntMatrix, dst: usize, src: usize, k: &BigInt) {
        for i in 0..m.rows() {
            let val = m.get(i, dst) + k * m.get(i, src);
            m.set(i, dst, val);
        }
    }
    fn swap_rows(m: &mut IntMatrix, a: usize, b: usize) {
        for j in 0..m.cols() {
            let x = m.get(a, j).clone();
            let y = m.get(b, j).clone();
            m.set(a, j, y);
            m.set(b, j, x);
        }
    }
    fn swap_cols(m: &mut IntMatrix, a: usize, b: usize) {
        for i in 0..m.rows() {
            let x = m.get(i, a).clone();
            let y = m.get(i, b).clone();
            m.set(i, a, y);
            m.set(i, b, x);
        }
    }

    let mut rank = 0;
    for t in 0..r.min(c) {
        loop {
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    let x = d.get(i, j);
                    if !x.is_zero()
                        && pivot.map_or(true, |(pi, pj)| x.abs() < d.get(pi, pj).abs())
                    {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else { break };
            if pi != t {
                swap_rows(&mut d, pi, t);
                swap_rows(&mut u, pi, t);
                swap_cols(&mut u_inv, pi, t);
            }
            if pj != t {
                swap_cols(&mut d, pj, t);
                swap_cols(&mut v, pj, t);
            }
            let p = d.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..r {
                let q = d.get(i, t) / &p;
                if !q.is_zero() {
                    row_axpy(&mut d, i, t, &-&q);
                    row_axpy(&mut u, i, t, &-&q);
                    col_axpy(&mut u_inv, t, i, &q);
                }
                if !d.get(i, t).is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..c {
                let q = d.get(t, j) / &p;
                if !q.is_zero() {
                    col_axpy(&mut d, j, t, &-&q);
                    col_axpy(&mut v, j, t, &-&q);
                }
                if !d.get(t, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..r).find(|&i| (t + 1..c).any(|j| !(d.get(i, j) % &p).is_zero()));
            if let Some(i) = bad {
                let one = BigInt::one();
                row_axpy(&mut d, t, i, &one);
                row_axpy(&mut u, t, i, &one);
                col_axpy(&mut u_inv, i, t, &-one);
                continue;
            }
            break;
        }
        if d.get(t, t).is_zero() {
            break;
        }
        if d.get(t, t).is_negative() {
            let m1 = BigInt::from(-1);
            for j in 0..c {
                let x = d.get(t, j) * &m1;
                d.set(t, j, x);
            }
            for j in 0..r {
                let x = u.get(t, j) * &m1;
                u.set(t, j, x);
            }
            for i in 0..r {
                let x = u_inv.get(i, t) * &m1;
                u_inv.set(i, t, x);
            }
        }
        rank += 1;
    }
    Smith { u, u_inv, v, d, rank }
}

#[derive(Clone, Debug)]
pub struct MarkedAbelianization {
    map: GraphMap,
    root: usize,
    in_tree: Vec<bool>,
    tree_paths: Vec<Chain>,
    non_tree: Vec<usize>,
    cycle_basis: Vec<Chain>,
    h1_action: IntMatrix,
    smith: Smith,
    b: usize,
    pi0: IntMatrix,
    pi0_section: IntMatrix,
    torsion: Vec<BigInt>,
}

/// Default basepoint: the first vertex fixed by `f`, else the first of minimal period.
pub fn default_root(f: &GraphMap) -> usize {
    let n = f.graph().num_vertices();
    let period = |v: usize| {
        let mut w = f.vertex_image(v);
        for k in 1..=n {
            if w == v {
                return Some(k);
            }
            w = f.vertex_image(w);
        }
        None
    };
    (0..n)
        .filter_map(|v| period(v).map(|p| (p, v)))
        .min()
        .map(|(_, v)| v)
        .unwrap_or(0)
}

impl MarkedAbelianization {
    /// Marks `f` at `root` (default: [`default_root`]) using `tree` (default: BFS tree).
    pub fn new(f: &GraphMap, root: Option<usize>, tree: Option<&[usize]>) -> Result<Self> {
        let g = f.graph();
        let nv = g.num_vertices();
        let m = g.num_edges();
        let root = root.unwrap_or_else(|| default_root(f));
        if root >= nv {
            return Err(Error::Marking(format!("root #{root} is not a vertex")));
        }
        let in_tree = match tree {
            Some(edges) => {
                let mut flags = vec![false; m];
                for &e in edges {
                    if e >= m {
                        return Err(Error::Marking(format!("tree edge #{e} does not exist")));
                    }
                    flags[e] = true;
                }
                flags
            }
            None => bfs_tree(f, root),
        };
        let tree_paths = tree_paths(f, root, &in_tree)?;
        let non_tree: Vec<usize> = (0..m).filter(|&e| !in_tree[e]).collect();
        let cycle_basis: Vec<Chain> = non_tree
            .iter()
            .map(|&e| {
                let edge = g.edge(e);
                let mut z = tree_paths[edge.origin].sub(&tree_paths[edge.terminus]);
                z.add_edge(e, 1);
                z
            })
            .collect();
        let k = non_tree.len();
        let mut h1 = IntMatrix::zeros(k, k);
        for (j, z) in cycle_basis.iter().enumerate() {
            let img = z.push_forward(f);
            for (i, &e) in non_tree.iter().enumerate() {
                h1.set(i, j, img.0[e].clone());
            }
        }
        let smith = smith_normal_form(&h1.sub(&IntMatrix::identity(k)));
        let rank = smith.rank;
        let b = 1 + k - rank;
        let mut pi0 = IntMatrix::zeros(k - rank, k);
        let mut section = IntMatrix::zeros(k, k - rank);
        for (r, row) in (rank..k).enumerate() {
            let flip = smith
                .u
                .row(row)
                .iter()
                .find(|x| !x.is_zero())
                .map_or(false, |x| x.is_negative());
            let s = if flip { BigInt::from(-1) } else { BigInt::one() };
            for j in 0..k {
                pi0.set(r, j, smith.u.get(row, j) * &s);
                section.set(j, r, smith.u_inv.get(j, row) * &s);
            }
        }
        let torsion: Vec<BigInt> =
            (0..rank).map(|i| smith.d.get(i, i).clone()).filter(|x| !x.is_one()).collect();
        Ok(MarkedAbelianization {
            map: f.clone(),
            root,
            in_tree,
            tree_paths,
            non_tree,
            cycle_basis,
            h1_action: h1,
            smith,
            b,
            pi0,
            pi0_section: section,
            torsion,
        })
    }

    pub fn map(&self) -> &GraphMap {
        &self.map
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn tree_edges(&self) -> Vec<usize> {
        (0..self.in_tree.len()).filter(|&e| self.in_tree[e]).collect()
    }

    /// `ρ(v)`: the tree path from the root to `v`, as a chain.
    pub fn tree_path(&self, v: usize) -> &Chain {
        &self.tree_paths[v]
    }

    pub fn non_tree_edges(&self) -> &[usize] {
        &self.non_tree
    }

    pub fn cycle_basis(&self) -> &[Chain] {
        &self.cycle_basis
    }

    pub fn h1_action(&self) -> &IntMatrix {
        &self.h1_action
    }

    pub fn smith(&self) -> &Smith {
        &self.smith
    }

    /// Rank of `H`.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn pi0(&self) -> &IntMatrix {
        &self.pi0
    }

    pub fn pi0_section(&self) -> &IntMatrix {
        &self.pi0_section
    }

    /// Nontrivial invariant factors of the coinvariants (torsion is discarded).
    pub fn torsion(&self) -> &[BigInt] {
        &self.torsion
    }

    /// Coordinates of a cycle in the cycle basis.
    pub fn cycle_coords(&self, z: &Chain) -> Vec<BigInt> {
        debug_assert!(z.boundary(&self.map).iter().all(|x| x.is_zero()), "not a cycle");
        self.non_tree.iter().map(|&e| z.0[e].clone()).collect()
    }

    pub fn chain_of_coords(&self, coords: &[BigInt]) -> Chain {
        let mut out = Chain::zero(self.map.num_edges());
        for (c, z) in coords.iter().zip(&self.cycle_basis) {
            for (e, k) in z.0.iter().enumerate() {
                out.0[e] += c * k;
            }
        }
        out
    }

    /// Projection of a cycle to `H₀ ≅ ℤ^{b−1}`.
    pub fn project(&self, z: &Chain) -> Vec<i64> {
        self.pi0
            .mul_vec(&self.cycle_coords(z))
            .into_iter()
            .map(|x| x.to_i64().expect("H0 coordinate fits in i64"))
            .collect()
    }

    /// Cycle representing the `k`-th basis element of `H₀`.
    pub fn section_cycle(&self, k: usize) -> Chain {
        let col: Vec<BigInt> =
            (0..self.pi0_section.rows()).map(|i| self.pi0_section.get(i, k).clone()).collect();
        self.chain_of_coords(&col)
    }

    pub fn validate_class(&self, u: &CohomologyClass) -> Result<()> {
        let m = self.map.num_edges();
        if u.edge_values.len() != m {
            return Err(Error::Class {
                name: u.label(),
                detail: format!("{} edge values for {m} edges", u.edge_values.len()),
            });
        }
        let mut bad = Vec::new();
        for (z, &e) in self.cycle_basis.iter().zip(&self.non_tree) {
            let before = u.eval(z);
            let after = u.eval(&z.push_forward(&self.map));
            if before != after {
                bad.push(format!(
                    "cycle through `{}`: u(z) = {before}, u(f(z)) = {after}",
                    self.map.graph().edge_id(e)
                ));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Class { name: u.label(), detail: format!("not f-invariant: {}", bad.join("; ")) })
        }
    }

    /// The valuation induced on `H` in internal coordinates `(H₀ basis, x)`.
    pub fn class_on_h(&self, u: &CohomologyClass) -> Result<Vec<BigRational>> {
        self.validate_class(u)?;
        let mut out: Vec<BigRational> = (0..self.b - 1).map(|k| u.eval(&self.section_cycle(k))).collect();
        out.push(u.stable_value.clone());
        Ok(out)
    }

    /// Builds the coordinate system whose `i`-th coordinate is the character `chars[i]`.
    pub fn make_coordinates(&self, chars: &[CohomologyClass]) -> Result<CoordinateSystem> {
        if chars.len() != self.b {
            return Err(Error::Coordinates(format!(
                "{} characters given for rank {}",
                chars.len(),
                self.b
            )));
        }
        let mut rows = Vec::with_capacity(self.b);
        for c in chars {
            let cov = self.class_on_h(c)?;
            let mut row = Vec::with_capacity(self.b);
            for x in cov {
                if !x.is_integer() {
                    return Err(Error::Coordinates(format!("character `{}` is not integral", c.label())));
                }
                row.push(x.to_integer().to_i64().ok_or_else(|| Error::Coordinates("overflow".into()))?);
            }
            rows.push(row);
        }
        let names = chars.iter().map(|c| c.label()).collect();
        CoordinateSystem::new(names, rows)
    }

    /// Integral characters whose coordinates are the internal ones: the rows of
    /// `π₀` as cochains on non-tree edges, then the class dual to the stable letter.
    pub fn standard_characters(&self) -> Vec<CohomologyClass> {
        let m = self.map.num_edges();
        let names = CoordinateSystem::internal(self.b).names().to_vec();
        let mut out = Vec::with_capacity(self.b);
        for (k, name) in names.iter().enumerate().take(self.b - 1) {
            let mut values = vec![BigRational::zero(); m];
            for (j, &e) in self.non_tree.iter().enumerate() {
                values[e] = BigRational::from_integer(self.pi0.get(k, j).clone());
            }
            out.push(CohomologyClass::new(Some(name), values, BigRational::zero()));
        }
        out.push(CohomologyClass::new(
            names.last().map(String::as_str),
            vec![BigRational::zero(); m],
            BigRational::one(),
        ));
        out
    }

    pub fn internal_coordinates(&self) -> CoordinateSystem {
        CoordinateSystem::internal(self.b)
    }
}

fn bfs_tree(f: &GraphMap, root: usize) -> Vec<bool> {
    let g = f.graph();
    let mut seen = vec![false; g.num_vertices()];
    let mut flags = vec![false; g.num_edges()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        for (e, edge) in g.edges().iter().enumerate() {
            let other = if edge.origin == v {
                edge.terminus
            } else if edge.terminus == v {
                edge.origin
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                flags[e] = true;
                queue.push_back(other);
            }
        }
    }
    flags
}

fn tree_paths(f: &GraphMap, root: usize, in_tree: &[bool]) -> Result<Vec<Chain>> {
    let g = f.graph();
    let nv = g.num_vertices();
    let m = g.num_edges();
    let count = in_tree.iter().filter(|&&t| t).count();
    if count + 1 != nv {
        return Err(Error::Marking(format!(
            "tree has {count} edges but a spanning tree needs {}",
            nv - 1
        )));
    }
    let mut paths: Vec<Option<Chain>> = vec![None; nv];
    paths[root] = Some(Chain::zero(m));
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let here = paths[v].clone().unwrap();
        for (e, edge) in g.edges().iter().enumerate() {
            if !in_tree[e] {
                continue;
            }
            let (other, sign) = if edge.origin == v {
                (edge.terminus, 1)
            } else if edge.terminus == v {
                (edge.origin, -1)
            } else {
                continue;
            };
            if paths[other].is_none() {
                let mut p = here.clone();
                p.add_edge(e, sign);
                paths[other] = Some(p);
                queue.push_back(other);
            }
        }
    }
    paths
        .into_iter()
        .enumerate()
        .map(|(v, p)| {
            p.ok_or_else(|| {
                Error::Marking(format!("tree does not span: `{}` unreachable", g.vertex_name(v)))
            })
        })
        .collect()
}

/// A real cohomology class given by an edge cochain and its value on the stable letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohomologyClass {
    pub name: Option<String>,
    pub edge_values: Vec<BigRational>,
    pub stable_value: BigRational,
}

impl CohomologyClass {
    pub fn new(name: Option<&str>, edge_values: Vec<BigRational>, stable_value: BigRational) -> Self {
        CohomologyClass { name: name.map(str::to_string), edge_values, stable_value }
    }

    pub fn from_ints(name: Option<&str>, edge_values: &[i64], stable_value: i64) -> Self {
        let q = |x: i64| BigRational::from_integer(x.into());
        CohomologyClass::new(name, edge_values.iter().map(|&x| q(x)).collect(), q(stable_value))
    }

    pub fn zero(m: usize) -> Self {
        CohomologyClass::from_ints(None, &vec![0; m], 0)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "<unnamed>".into())
    }

    pub fn eval(&self, z: &Chain) -> BigRational {
        z.0.iter()
            .zip(&self.edge_values)
            .map(|(k, v)| v * BigRational::from_integer(k.clone()))
            .sum()
    }

    /// Values `h(v)` on the vertical segments over each vertex, determined by
    /// `u(f(e)) − u(e) = h(terminus e) − h(origin e)` and the stable value at the root.
    pub fn vertex_potential(&self, m: &MarkedAbelianization) -> Vec<BigRational> {
        let f = m.map();
        let g = f.graph();
        let root = m.root();
        let h_root = &self.stable_value + self.eval(m.tree_path(f.vertex_image(root)));
        let drift: Vec<BigRational> = (0..g.num_edges())
            .map(|e| {
                let img = Chain::of_path(g.num_edges(), f.edge_image(e));
                self.eval(&img) - &self.edge_values[e]
            })
            .collect();
        (0..g.num_vertices())
            .map(|v| {
                let path = m.tree_path(v);
                let mut h = h_root.clone();
                for (e, k) in path.0.iter().enumerate() {
                    h += &drift[e] * BigRational::from_integer(k.clone());
                }
                h
            })
            .collect()
    }

    /// The same class expressed relative to another root/tree of the same map.
    pub fn rebased(&self, from: &MarkedAbelianization, to: &MarkedAbelianization) -> Self {
        let h = self.vertex_potential(from);
        let r = to.root();
        let stable = &h[r] - self.eval(to.tree_path(to.map().vertex_image(r)));
        CohomologyClass { name: self.name.clone(), edge_values: self.edge_values.clone(), stable_value: stable }
    }

    /// The same class on a subdivided map: the first piece of each edge carries its value.
    pub fn lifted(&self, from: &MarkedAbelianization, sub: &Subdivision, to: &MarkedAbelianization) -> Self {
        let mut values = vec![BigRational::zero(); sub.map.num_edges()];
        for (e, pieces) in sub.pieces.iter().enumerate() {
            values[pieces[0]] = self.edge_values[e].clone();
        }
        let lifted = CohomologyClass {
            name: self.name.clone(),
            edge_values: values,
            stable_value: BigRational::zero(),
        };
        let h = self.vertex_potential(from);
        let r = to.root();
        let stable = &h[r] - lifted.eval(to.tree_path(to.map().vertex_image(r)));
        CohomologyClass { stable_value: stable, ..lifted }
    }
}

/// Integer coordinates on `H` given by a unimodular family of characters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinateSystem {
    names: Vec<String>,
    /// Row `i`: the `i`-th character as an internal covector.
    matrix: Vec<Vec<i64>>,
    inverse: Vec<Vec<i64>>,
}

impl CoordinateSystem {
    pub fn new(names: Vec<String>, matrix: Vec<Vec<i64>>) -> Result<CoordinateSystem> {
        let n = matrix.len();
        let inv = rational_inverse(&matrix)
            .ok_or_else(|| Error::Coordinates("character family is singular".into()))?;
        let mut inverse = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let x = &inv[i][j];
                if !x.is_integer() {
                    return Err(Error::Coordinates("character family is not unimodular".into()));
                }
                inverse[i][j] = x.to_integer().to_i64().unwrap();
            }
        }
        Ok(CoordinateSystem { names, matrix, inverse })
    }

    /// Internal coordinates, named `t1 … t_{b−1}, x`.
    pub fn internal(b: usize) -> CoordinateSystem {
        let mut names: Vec<String> = (1..b).map(|i| format!("t{i}")).collect();
        names.push("x".into());
        let id: Vec<Vec<i64>> = (0..b).map(|i| (0..b).map(|j| (i == j) as i64).collect()).collect();
        CoordinateSystem { names, matrix: id.clone(), inverse: id }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    /// Coordinates of an element of `H` given internally.
    pub fn apply(&self, h: &[i64]) -> Vec<i64> {
        self.matrix.iter().map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }

    /// Internal coordinates of an element given in these coordinates.
    pub fn unapply(&self, h: &[i64]) -> Vec<i64> {
        self.inverse.iter().map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }

    /// A class given as an internal covector, in these coordinates (`c · C⁻¹`).
    pub fn covector_to_coords(&self, c: &[BigRational]) -> Vec<BigRational> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| &c[i] * BigRational::from_integer(self.inverse[i][j].into()))
                    .sum()
            })
            .collect()
    }

    /// A class given in these coordinates, as an internal covector (`u · C`).
    pub fn covector_to_internal(&self, u: &[BigRational]) -> Vec<BigRational> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| &u[i] * BigRational::from_integer(self.matrix[i][j].into()))
                    .sum()
            })
            .collect()
    }

    pub fn covector_to_internal_f64(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|i| u[i] * self.matrix[i][j] as f64).sum()).collect()
    }

    /// The fibration class `u₀` (value 1 on `x`, 0 on `H₀`) in these coordinates.
    pub fn fibration_class(&self) -> Vec<i64> {
        self.inverse.last().cloned().unwrap_or_default()
    }

    pub fn poly_to_coords(&self, p: &crate::laurent::LaurentPoly) -> crate::laurent::LaurentPoly {
        p.linear_change(&self.matrix)
    }
}

fn rational_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let q = |x: i64| BigRational::from_integer(x.into());
    let mut a: Vec<Vec<BigRational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n);
            row.iter().map(|&x| q(x)).chain((0..n).map(|j| q((i == j) as i64))).collect()
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let k = a[r][col].clone();
                for j in 0..2 * n {
                    let sub = &k * &a[col][j];
                    a[r][j] -= sub;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Integer determinant by exact rational elimination.
pub fn int_determinant(m: &[Vec<i64>]) -> BigInt {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> =
        m.iter().map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect()).collect();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigInt::zero();
        };
        if p != col {
            a.swap(col, p);
            det = -det;
        }
        det *= &a[col][col];
        for r in col + 1..n {
            let k = &a[r][col] / &a[col][col];
            for j in col..n {
                let sub = &k * &a[col][j];
                a[r][j] -= sub;
            }
        }
    }
    det.to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn running_marked() -> MarkedAbelianization {
        let f = fixtures::running_example();
        let root = f.graph().vertex_index("R").unwrap();
        let a = f.graph().edge_index("a").unwrap();
        MarkedAbelianization::new(&f, Some(root), Some(&[a])).unwrap()
    }

    #[test]
    fn running_h1_action_is_signed_three_cycle() {
        let m = running_marked();
        // cycle basis: b - a = -γ1, c = γ3, d - a = γ2 (non-tree edges b, c, d)
        let h1 = m.h1_action().to_i64_rows();
        assert_eq!(h1, vec![vec![0, -1, 0], vec![0, 0, 1], vec![-1, 0, 0]]);
        let d = m.smith().d.to_i64_rows();
        assert_eq!(d, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 0]]);
        assert_eq!(m.b(), 2);
        // π0 sends γ1, γ2, γ3 to the same generator
        let gamma = |w: &str| Chain::of_path(4, &m.map().graph().parse_path(w).unwrap());
        let p1 = m.project(&gamma("b^-1 a"));
        assert_eq!(p1.len(), 1);
        assert_eq!(p1[0].abs(), 1);
        assert_eq!(m.project(&gamma("a^-1 d")), p1);
        assert_eq!(m.project(&gamma("c")), p1);
        assert!(m.torsion().is_empty());
    }

    #[test]
    fn identity_rose_has_full_rank() {
        let f = GraphMap::from_words(
            &["v"],
            &[("a", "v", "v"), ("b", "v", "v"), ("c", "v", "v")],
            &[("v", "v")],
            &[("a", "a"), ("b", "b"), ("c", "c")],
        )
        .unwrap();
        let m = MarkedAbelianization::new(&f, None, None).unwrap();
        assert_eq!(m.b(), 4);
        assert_eq!(m.pi0(), &IntMatrix::identity(3));
    }

    #[test]
    fn bad_trees_are_rejected() {
        let f = fixtures::running_example();
        assert!(MarkedAbelianization::new(&f, Some(0), Some(&[])).is_err());
        let c = f.graph().edge_index("c").unwrap();
        let err = MarkedAbelianization::new(&f, Some(0), Some(&[c])).unwrap_err();
        assert!(err.to_string().contains("does not span"));
        assert!(MarkedAbelianization::new(&f, Some(7), None).is_err());
    }

    #[test]
    fn class_validation() {
        let m = running_marked();
        let u1 = fixtures::running_classes().into_iter().find(|c| c.label() == "u1").unwrap();
        assert!(m.validate_class(&u1).is_ok());
        let bad = CohomologyClass::from_ints(Some("bad"), &[1, 0, 0, 0], 0);
        let err = m.validate_class(&bad).unwrap_err().to_string();
        assert!(err.contains("not f-invariant"), "{err}");
        assert!(m.validate_class(&CohomologyClass::zero(4)).is_ok());
    }

    #[test]
    fn classes_in_character_coordinates() {
        let m = running_marked();
        let classes = fixtures::running_classes();
        let get = |n: &str| classes.iter().find(|c| c.label() == n).unwrap().clone();
        let coords = m.make_coordinates(&[get("s*"), get("w*")]).unwrap();
        let q = |x: i64| BigRational::from_integer(x.into());
        for (name, want) in [("u0", [0, 1]), ("u1", [-1, 2]), ("u2", [-1, 1])] {
            let c = m.class_on_h(&get(name)).unwrap();
            assert_eq!(coords.covector_to_coords(&c), vec![q(want[0]), q(want[1])], "{name}");
        }
        // x is the stable letter: (0, 1); the H0 generator is ±γ1
        assert_eq!(coords.apply(&[0, 1]), vec![0, 1]);
        assert_eq!(coords.apply(&[1, 0])[0].abs(), 1);
        assert_eq!(coords.fibration_class(), vec![0, 1]);
        assert_eq!(m.class_on_h(&CohomologyClass::zero(4)).unwrap(), vec![q(0), q(0)]);
    }

    #[test]
    fn coordinate_families() {
        let m = running_marked();
        let classes = fixtures::running_classes();
        let get = |n: &str| classes.iter().find(|c| c.label() == n).unwrap().clone();
        let mut w2 = get("w*");
        w2.stable_value *= BigRational::from_integer(2.into());
        for v in w2.edge_values.iter_mut() {
            *v *= BigRational::from_integer(2.into());
        }
        assert!(m.make_coordinates(&[get("s*"), w2]).is_err());
        let swapped = m.make_coordinates(&[get("w*"), get("s*")]).unwrap();
        let straight = m.make_coordinates(&[get("s*"), get("w*")]).unwrap();
        let h = [3, -2];
        let a = straight.apply(&h);
        assert_eq!(swapped.apply(&h), vec![a[1], a[0]]);
    }

    #[test]
    fn rebasing_keeps_the_class() {
        let f = fixtures::running_example();
        let m_r = running_marked();
        let m_l = MarkedAbelianization::new(&f, f.graph().vertex_index("L"), None).unwrap();
        for c in fixtures::running_classes() {
            let moved = c.rebased(&m_r, &m_l);
            let back = moved.rebased(&m_l, &m_r);
            assert_eq!(back, c);
        }
    }

    fn check_marking(f: &GraphMap) {
        let m = MarkedAbelianization::new(f, None, None).unwrap();
        let k = m.non_tree_edges().len();
        // π0 kills the image of (M - I)
        let mi = m.h1_action().sub(&IntMatrix::identity(k));
        assert!(m.pi0().mul(&mi).to_i64_rows().iter().flatten().all(|&x| x == 0));
        // section
        assert_eq!(m.pi0().mul(m.pi0_section()), IntMatrix::identity(m.b() - 1));
        // b = 1 + corank
        let s = m.smith();
        assert_eq!(s.u.mul(&mi).mul(&s.v), s.d);
        assert_eq!(s.u.mul(&s.u_inv), IntMatrix::identity(k));
        assert_eq!(m.b(), 1 + k - s.rank);
        // divisibility chain
        for i in 1..s.rank {
            assert!((s.d.get(i, i) % s.d.get(i - 1, i - 1)).is_zero());
        }
        // a second marking from another root differs by GL(b-1, Z)
        let other_root = (0..f.graph().num_vertices()).last().unwrap();
        let m2 = MarkedAbelianization::new(f, Some(other_root), None).unwrap();
        let r = m.b() - 1;
        let t: Vec<Vec<i64>> = {
            let cols: Vec<Vec<i64>> = (0..r).map(|j| m2.project(&m.section_cycle(j))).collect();
            (0..r).map(|i| (0..r).map(|j| cols[j][i]).collect()).collect()
        };
        assert_eq!(int_determinant(&t).abs(), BigInt::one());
        for z in m.cycle_basis() {
            let p1 = m.project(z);
            let via: Vec<i64> = t.iter().map(|row| row.iter().zip(&p1).map(|(a, b)| a * b).sum()).collect();
            assert_eq!(via, m2.project(z));
        }
    }

    #[test]
    fn marking_invariants_on_running_example() {
        check_marking(&fixtures::running_example());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn marking_invariants_on_random_maps(seed in any::<u64>()) {
            let f = fixtures::random_graph_map(seed, 6);
            check_marking(&f);
        }

        #[test]
        fn class_on_h_evaluates_cycles(seed in any::<u64>(), vals in prop::collection::vec(-5i64..6, 3)) {
            // random invariant classes: pull back random characters of H0 along π0
            let f = fixtures::random_graph_map(seed, 6);
            let m = MarkedAbelianization::new(&f, None, None).unwrap();
            let r = m.b() - 1;
            let k = m.non_tree_edges().len();
            let psi: Vec<i64> = (0..r).map(|i| vals[i % vals.len()]).collect();
            // covector on cycle coords: ψ ∘ π0, realised on non-tree edges
            let mut edge_values = vec![BigRational::zero(); f.num_edges()];
            for (j, &e) in m.non_tree_edges().iter().enumerate() {
                let v: i64 = (0..r).map(|i| psi[i] * m.pi0().get(i, j).to_i64().unwrap()).sum();
                edge_values[e] = BigRational::new(v.into(), 3.into());
            }
            let u = CohomologyClass::new(None, edge_values, BigRational::new(7.into(), 2.into()));
            prop_assert!(m.validate_class(&u).is_ok());
            let cov = m.class_on_h(&u).unwrap();
            for z in m.cycle_basis() {
                let p = m.project(z);
                let via: BigRational = p.iter().zip(&cov).map(|(a, c)| c * BigRational::from_integer((*a).into())).sum();
                prop_assert_eq!(via, u.eval(z));
            }
            prop_assert_eq!(k, m.cycle_basis().len());
        }
    }
}
