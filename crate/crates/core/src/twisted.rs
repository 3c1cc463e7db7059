//! The homology-labeled transition graph of a marked train track map.
//!
//! Nodes are edges of the graph; there is one arc `e_j → e_i` for every
//! occurrence of `e_i` in `f(e_j)`, labeled by an element of `H₀`.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::graphcore::{IntMatrix, PointOrbit, Sign};
use crate::laurent::{LaurentPoly, RingMatrix};
use crate::marking::{Chain, MarkedAbelianization};
use crate::error::{Error, Result};

/// One occurrence of `target` in the image of `source`, as an arc `source → target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub source: usize,
    pub target: usize,
    /// 1-based position in the image of `source`.
    pub position: usize,
    pub sign: Sign,
    /// Exponent of the arc's monomial in `A(t)`, in `H₀` coordinates.
    pub label: Vec<i64>,
    /// Class in `H` of the flow segment over the occurrence (internal coordinates).
    pub orbit_step: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledTransitionGraph {
    nodes: usize,
    b: usize,
    arcs: Vec<Occurrence>,
}

/// A simple directed cycle: `arcs[k]` runs from `nodes[k]` to `nodes[k + 1]` (cyclically).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Circuit {
    pub nodes: Vec<usize>,
    pub arcs: Vec<usize>,
}

impl Circuit {
    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn node_mask(&self) -> u64 {
        self.nodes.iter().fold(0, |m, &v| m | (1 << v))
    }

    fn canonical(nodes: Vec<usize>, arcs: Vec<usize>) -> Circuit {
        let k = (0..nodes.len()).min_by_key(|&i| nodes[i]).unwrap_or(0);
        let mut n = nodes;
        let mut a = arcs;
        n.rotate_left(k);
        a.rotate_left(k);
        Circuit { nodes: n, arcs: a }
    }
}

impl LabeledTransitionGraph {
    /// Labels every occurrence through its correction chain
    /// `δ = ρ(f∗) + f_#ρ(o e_j) + prefix + (sign < 0 ? −e_i : 0) − ρ(o e_i)`.
    pub fn build(m: &MarkedAbelianization) -> LabeledTransitionGraph {
        let f = m.map();
        let g = f.graph();
        let ne = g.num_edges();
        let base = m.tree_path(f.vertex_image(m.root())).clone();
        let mut arcs = Vec::new();
        for j in 0..ne {
            let start = base.add(&m.tree_path(g.edge(j).origin).push_forward(f));
            let mut prefix = Chain::zero(ne);
            for (l, step) in f.edge_image(j).steps.iter().enumerate() {
                let i = step.edge;
                let mut delta = start.add(&prefix).sub(m.tree_path(g.edge(i).origin));
                if step.sign == Sign::Neg {
                    delta.add_edge(i, -1);
                }
                let p = m.project(&delta);
                let mut orbit_step = p.clone();
                orbit_step.push(1);
                arcs.push(Occurrence {
                    source: j,
                    target: i,
                    position: l + 1,
                    sign: step.sign,
                    label: p.iter().map(|x| -x).collect(),
                    orbit_step,
                });
                prefix.add_edge(i, step.sign.as_i64());
            }
        }
        LabeledTransitionGraph { nodes: ne, b: m.b(), arcs }
    }

    /// Builds directly from arcs; `orbit_step` is recomputed from the labels.
    pub fn from_arcs(nodes: usize, b: usize, arcs: Vec<(usize, usize, Vec<i64>)>) -> LabeledTransitionGraph {
        let mut pos = vec![0; nodes];
        let arcs = arcs
            .into_iter()
            .map(|(source, target, label)| {
                assert_eq!(label.len() + 1, b);
                pos[source] += 1;
                let mut orbit_step: Vec<i64> = label.iter().map(|x| -x).collect();
                orbit_step.push(1);
                Occurrence { source, target, position: pos[source], sign: Sign::Pos, label, orbit_step }
            })
            .collect();
        LabeledTransitionGraph { nodes, b, arcs }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    /// Rank of `H`; labels have `b − 1` entries.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn arcs(&self) -> &[Occurrence] {
        &self.arcs
    }

    pub fn arc_at(&self, source: usize, position: usize) -> Option<usize> {
        self.arcs.iter().position(|a| a.source == source && a.position == position)
    }

    /// Labels shifted by the coboundary of `omega`: `label += ω(target) − ω(source)`.
    pub fn gauged(&self, omega: &[Vec<i64>]) -> LabeledTransitionGraph {
        let mut out = self.clone();
        for a in &mut out.arcs {
            for k in 0..a.label.len() {
                a.label[k] += omega[a.target][k] - omega[a.source][k];
                a.orbit_step[k] = -a.label[k];
            }
        }
        out
    }

    /// Adds `shift` to the label of a single arc (orbit steps are left alone).
    pub fn with_label_shift(&self, arc: usize, shift: &[i64]) -> LabeledTransitionGraph {
        let mut out = self.clone();
        for (x, s) in out.arcs[arc].label.iter_mut().zip(shift) {
            *x += s;
        }
        out
    }

    /// `A(t)` over `b` variables (the last, `x`, does not occur).
    pub fn matrix(&self) -> RingMatrix {
        let mut a = RingMatrix::zeros(self.nodes, self.b);
        for arc in &self.arcs {
            let mut e = arc.label.clone();
            e.push(0);
            a.add_to(arc.target, arc.source, &LaurentPoly::monomial(e, 1));
        }
        a
    }

    /// `A(1, …, 1)`.
    pub fn evaluate_at_one(&self) -> IntMatrix {
        let mut a = IntMatrix::zeros(self.nodes, self.nodes);
        for arc in &self.arcs {
            let v = a.get(arc.target, arc.source) + 1;
            a.set(arc.target, arc.source, v);
        }
        a
    }

    /// `A(t)` evaluated at real weights: entry `(i, j)` sums `w(label)` over arcs `j → i`.
    pub fn evaluate_with(&self, weight: impl Fn(&[i64]) -> f64) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.nodes]; self.nodes];
        for arc in &self.arcs {
            a[arc.target][arc.source] += weight(&arc.label);
        }
        a
    }

    /// All simple directed cycles, one per choice of parallel arcs, in canonical order.
    pub fn circuits(&self) -> Vec<Circuit> {
        let n = self.nodes;
        let mut parallel: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (k, a) in self.arcs.iter().enumerate() {
            parallel.entry((a.source, a.target)).or_default().push(k);
        }
        let mut adj = vec![Vec::new(); n];
        for &(s, t) in parallel.keys() {
            adj[s].push(t);
        }
        let mut out = Vec::new();
        for cycle in elementary_cycles(&adj) {
            let k = cycle.len();
            let choices: Vec<&Vec<usize>> =
                (0..k).map(|i| &parallel[&(cycle[i], cycle[(i + 1) % k])]).collect();
            let mut idx = vec![0; k];
            loop {
                let arcs: Vec<usize> = (0..k).map(|i| choices[i][idx[i]]).collect();
                out.push(Circuit::canonical(cycle.clone(), arcs));
                let mut done = true;
                for i in (0..k).rev() {
                    idx[i] += 1;
                    if idx[i] < choices[i].len() {
                        done = false;
                        break;
                    }
                    idx[i] = 0;
                }
                if done {
                    break;
                }
            }
        }
        out.sort();
        out
    }

    /// Class in `H` (internal coordinates) of the closed orbit of a circuit or closed walk.
    pub fn walk_class(&self, arcs: &[usize]) -> Vec<i64> {
        let mut c = vec![0; self.b];
        for &k in arcs {
            for (x, y) in c.iter_mut().zip(&self.arcs[k].orbit_step) {
                *x += y;
            }
        }
        c
    }

    pub fn orbit_class(&self, y: &Circuit) -> Vec<i64> {
        self.walk_class(&y.arcs)
    }

    /// `p_y`: the product of the arc monomials, over `b` variables.
    pub fn circuit_monomial(&self, y: &Circuit) -> LaurentPoly {
        let mut e = vec![0; self.b];
        for &k in &y.arcs {
            for (x, l) in e.iter_mut().zip(&self.arcs[k].label) {
                *x += l;
            }
        }
        LaurentPoly::monomial(e, 1)
    }

    /// `p_y⁻¹ · x^{|y|}` as a monomial.
    pub fn orbit_monomial(&self, y: &Circuit) -> LaurentPoly {
        let p = self.circuit_monomial(y);
        let (e, _) = p.terms().next().unwrap();
        let mut inv: Vec<i64> = e.iter().map(|x| -x).collect();
        inv[self.b - 1] = y.len() as i64;
        LaurentPoly::monomial(inv, 1)
    }

    /// Splits a closed walk (a cyclic arc sequence) into circuits by repeatedly
    /// excising the first cycle closed along the walk.
    pub fn decompose_closed_walk(&self, walk: &[usize]) -> Result<Vec<Circuit>> {
        for (i, &k) in walk.iter().enumerate() {
            let next = walk[(i + 1) % walk.len()];
            if self.arcs[k].target != self.arcs[next].source {
                return Err(Error::Dynamics(format!("walk breaks after arc {i}")));
            }
        }
        let mut stack: Vec<usize> = Vec::new();
        let mut at: Vec<Option<usize>> = vec![None; self.nodes];
        let mut out = Vec::new();
        for &k in walk {
            let a = &self.arcs[k];
            at[a.source] = Some(stack.len());
            stack.push(k);
            if let Some(p) = at[a.target] {
                let arcs: Vec<usize> = stack.drain(p..).collect();
                let nodes: Vec<usize> = arcs.iter().map(|&k| self.arcs[k].source).collect();
                for &v in &nodes {
                    at[v] = None;
                }
                out.push(Circuit::canonical(nodes, arcs));
            }
        }
        debug_assert!(stack.is_empty());
        Ok(out)
    }

    /// The matrix `B(t)` of the lifted action on an invariant set of periodic points.
    pub fn subdivision_factor(&self, orbit: &PointOrbit) -> Result<RingMatrix> {
        let k = orbit.len();
        let mut b = RingMatrix::zeros(k, self.b);
        for (j, p) in orbit.points.iter().enumerate() {
            let arc = self
                .arc_at(p.edge, p.occurrence)
                .ok_or_else(|| Error::Subdivision("orbit not f-invariant".into()))?;
            if p.next >= k || orbit.points[p.next].edge != self.arcs[arc].target {
                return Err(Error::Subdivision("orbit not f-invariant".into()));
            }
            let mut e = self.arcs[arc].label.clone();
            e.push(0);
            let c = if p.orientation_preserved { 1 } else { -1 };
            b.set(p.next, j, LaurentPoly::monomial(e, BigInt::from(c)));
        }
        Ok(b)
    }
}

/// Johnson's elementary circuit enumeration; each cycle starts at its least node.
pub fn elementary_cycles(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        start: usize,
        blocked: Vec<bool>,
        blist: Vec<Vec<usize>>,
        stack: Vec<usize>,
        out: Vec<Vec<usize>>,
    }

    impl State<'_> {
        fn unblock(&mut self, u: usize) {
            self.blocked[u] = false;
            while let Some(w) = self.blist[u].pop() {
                if self.blocked[w] {
                    self.unblock(w);
                }
            }
        }

        fn circuit(&mut self, v: usize) -> bool {
            let mut found = false;
            self.stack.push(v);
            self.blocked[v] = true;
            for &w in &self.adj[v] {
                if w < self.start {
                    continue;
                }
                if w == self.start {
                    self.out.push(self.stack.clone());
                    found = true;
                } else if !self.blocked[w] && self.circuit(w) {
                    found = true;
                }
            }
            if found {
                self.unblock(v);
            } else {
                for &w in &self.adj[v] {
                    if w >= self.start && !self.blist[w].contains(&v) {
                        self.blist[w].push(v);
                    }
                }
            }
            self.stack.pop();
            found
        }
    }

    let n = adj.len();
    let mut st = State {
        adj,
        start: 0,
        blocked: vec![false; n],
        blist: vec![Vec::new(); n],
        stack: Vec::new(),
        out: Vec::new(),
    };
    for s in 0..n {
        st.start = s;
        st.blocked.iter_mut().for_each(|b| *b = false);
        st.blist.iter_mut().for_each(|b| b.clear());
        st.circuit(s);
    }
    st.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn running() -> (MarkedAbelianization, LabeledTransitionGraph) {
        let m = fixtures::running_marked();
        let l = LabeledTransitionGraph::build(&m);
        (m, l)
    }

    fn arc_label(l: &LabeledTransitionGraph, m: &MarkedAbelianization, src: &str, pos: usize) -> i64 {
        let g = m.map().graph();
        let k = l.arc_at(g.edge_index(src).unwrap(), pos).unwrap();
        l.arcs()[k].label[0]
    }

    /// Sign of the H0 generator relative to γ1 = b⁻¹a.
    fn orientation(m: &MarkedAbelianization) -> i64 {
        let g = m.map().graph();
        m.project(&Chain::of_path(4, &g.parse_path("b^-1 a").unwrap()))[0]
    }

    #[test]
    fn running_labels_match_published_entries() {
        let (m, l) = running();
        let o = orientation(&m);
        assert_eq!(o * arc_label(&l, &m, "d", 3), 2);
        assert_eq!(o * arc_label(&l, &m, "c", 2), -1);
        assert_eq!(l.arcs().len(), 10);
        for a in l.arcs() {
            assert_eq!(*a.orbit_step.last().unwrap(), 1);
        }
    }

    #[test]
    fn evaluate_at_one_is_transition_matrix() {
        let (m, l) = running();
        assert_eq!(l.evaluate_at_one(), m.map().transition_matrix());
        assert_eq!(
            l.evaluate_at_one().to_i64_rows(),
            vec![vec![0, 1, 1, 2], vec![0, 0, 1, 2], vec![0, 0, 0, 1], vec![1, 0, 0, 1]]
        );
    }

    #[test]
    fn trivial_h0_gives_unlabeled_graph() {
        let f = crate::GraphMap::from_words(
            &["v"],
            &[("a", "v", "v"), ("b", "v", "v")],
            &[("v", "v")],
            &[("a", "a b"), ("b", "a")],
        )
        .unwrap();
        let m = MarkedAbelianization::new(&f, None, None).unwrap();
        assert_eq!(m.b(), 1);
        let l = LabeledTransitionGraph::build(&m);
        assert!(l.arcs().iter().all(|a| a.label.is_empty()));
        let a = l.matrix();
        for i in 0..2 {
            for j in 0..2 {
                let c = l.evaluate_at_one().get(i, j).clone();
                let want = if c == BigInt::from(0) { LaurentPoly::zero(1) } else { LaurentPoly::constant(1, c) };
                assert_eq!(a.get(i, j), &want);
            }
        }
    }

    #[test]
    fn running_circuits() {
        let (m, l) = running();
        let cs = l.circuits();
        assert_eq!(cs.len(), 7);
        let coords = fixtures::running_coordinates(&m);
        let mut classes: Vec<Vec<i64>> = cs.iter().map(|y| coords.apply(&l.orbit_class(y))).collect();
        classes.sort();
        let mut want = vec![
            vec![-2, 1],
            vec![-3, 2],
            vec![-1, 2],
            vec![0, 3],
            vec![-1, 4],
            vec![-3, 3],
            vec![-2, 3],
        ];
        want.sort();
        assert_eq!(classes, want);
        let d = m.map().graph().edge_index("d").unwrap();
        let loop_d = cs.iter().find(|y| y.nodes == vec![d]).unwrap();
        assert_eq!(coords.apply(&l.orbit_class(loop_d)), vec![-2, 1]);
        for y in &cs {
            assert_eq!(l.orbit_class(y)[1], y.len() as i64);
            let mono = l.orbit_monomial(y);
            let (e, c) = mono.terms().next().unwrap();
            assert_eq!((e.clone(), c.clone()), (l.orbit_class(y), BigInt::from(1)));
        }
    }

    #[test]
    fn circuits_small_graphs() {
        let single = LabeledTransitionGraph::from_arcs(1, 1, vec![(0, 0, vec![])]);
        assert_eq!(single.circuits().len(), 1);
        let doubled = LabeledTransitionGraph::from_arcs(
            2,
            1,
            vec![(0, 1, vec![]), (0, 1, vec![]), (1, 0, vec![]), (1, 0, vec![])],
        );
        let cs = doubled.circuits();
        assert_eq!(cs.len(), 4);
        let mut arcsets: Vec<Vec<usize>> = cs.iter().map(|c| c.arcs.clone()).collect();
        arcsets.dedup();
        assert_eq!(arcsets, vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]]);
    }

    /// Brute force: every cyclic node sequence with distinct nodes.
    fn brute_cycles(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
        fn go(adj: &[Vec<usize>], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            let v = *path.last().unwrap();
            for &w in &adj[v] {
                if w == path[0] {
                    out.push(path.clone());
                } else if w > path[0] && !path.contains(&w) {
                    path.push(w);
                    go(adj, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        for s in 0..adj.len() {
            go(adj, &mut vec![s], &mut out);
        }
        out.sort();
        out
    }

    #[test]
    fn johnson_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..7);
            let adj: Vec<Vec<usize>> =
                (0..n).map(|_| (0..n).filter(|_| rng.gen_bool(0.4)).collect()).collect();
            let mut got = elementary_cycles(&adj);
            got.sort();
            assert_eq!(got, brute_cycles(&adj));
        }
    }

    #[test]
    fn closed_walk_decomposition() {
        let (m, l) = running();
        let g = m.map().graph();
        let (a, d) = (g.edge_index("a").unwrap(), g.edge_index("d").unwrap());
        let dd = l.arc_at(d, 3).unwrap();
        let parts = l.decompose_closed_walk(&[dd, dd]).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0], parts[1]);
        let coords = fixtures::running_coordinates(&m);
        assert_eq!(coords.apply(&l.walk_class(&[dd, dd])), vec![-4, 2]);
        // a -> d (a in f(d)) then d -> a (d in f(a)), then the loop at d
        let d_to_a = l.arcs().iter().position(|x| x.source == d && x.target == a).unwrap();
        let a_to_d = l.arcs().iter().position(|x| x.source == a && x.target == d).unwrap();
        let walk = [a_to_d, dd, d_to_a];
        let parts = l.decompose_closed_walk(&walk).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(parts.iter().any(|c| c.arcs == vec![dd]));
        assert!(parts.iter().any(|c| c.nodes == vec![a, d]));
        assert!(l.decompose_closed_walk(&[a_to_d]).is_err());
    }

    /// All closed walks of length ≤ 5: the excised circuits add up to the walk.
    #[test]
    fn closed_walk_additivity_exhaustive() {
        let (_, l) = running();
        let arcs = l.arcs();
        let mut walks: Vec<Vec<usize>> = (0..arcs.len()).map(|k| vec![k]).collect();
        let mut checked = 0;
        for _ in 0..5 {
            let mut next = Vec::new();
            for w in &walks {
                let first = arcs[w[0]].source;
                let last = arcs[*w.last().unwrap()].target;
                if last == first {
                    let parts = l.decompose_closed_walk(w).unwrap();
                    let mut sum = vec![0; l.b()];
                    for c in &parts {
                        for (x, y) in sum.iter_mut().zip(l.orbit_class(c)) {
                            *x += y;
                        }
                    }
                    assert_eq!(sum, l.walk_class(w));
                    assert_eq!(parts.iter().map(Circuit::len).sum::<usize>(), w.len());
                    checked += 1;
                }
                for (k, a) in arcs.iter().enumerate() {
                    if a.source == last {
                        let mut v = w.clone();
                        v.push(k);
                        next.push(v);
                    }
                }
            }
            walks = next;
        }
        assert!(checked > 50);
    }

    #[test]
    fn gauge_leaves_circuit_monomials() {
        let (_, l) = running();
        let omega = vec![vec![3], vec![-1], vec![7], vec![0]];
        let g = l.gauged(&omega);
        let c1 = l.circuits();
        let c2 = g.circuits();
        assert_eq!(c1, c2);
        for y in &c1 {
            assert_eq!(l.circuit_monomial(y), g.circuit_monomial(y));
            assert_eq!(l.orbit_class(y), g.orbit_class(y));
        }
        assert_ne!(l.matrix(), g.matrix());
    }

    #[test]
    fn subdivision_factor_at_d_fixed_point() {
        let (m, l) = running();
        let f = m.map();
        let d = f.graph().edge_index("d").unwrap();
        let sub = f
            .subdivide_at_invariant_set(&[crate::graphcore::PeriodicPointSpec { host: d, chain: vec![3] }])
            .unwrap();
        let b = l.subdivision_factor(&sub.orbit).unwrap();
        assert_eq!(b.size(), 1);
        let coords = fixtures::running_coordinates(&m);
        let entry = coords.poly_to_coords(b.get(0, 0));
        assert_eq!(entry, LaurentPoly::monomial(vec![2, 0], 1));
        let empty = l.subdivision_factor(&PointOrbit::default()).unwrap();
        assert_eq!(empty.size(), 0);
        assert_eq!(empty.determinant(), LaurentPoly::one(2));
    }

    #[test]
    fn reversed_fixed_point_has_negative_entry() {
        // the middle of a is fixed with its orientation reversed
        let f = crate::GraphMap::from_words(
            &["v"],
            &[("a", "v", "v"), ("b", "v", "v")],
            &[("v", "v")],
            &[("a", "b a^-1 b"), ("b", "b a")],
        )
        .unwrap();
        let m = MarkedAbelianization::new(&f, None, None).unwrap();
        let l = LabeledTransitionGraph::build(&m);
        let sub = f
            .subdivide_at_invariant_set(&[crate::graphcore::PeriodicPointSpec { host: 0, chain: vec![2] }])
            .unwrap();
        assert!(!sub.orbit.points[0].orientation_preserved);
        let bm = l.subdivision_factor(&sub.orbit).unwrap();
        let (_, c) = bm.get(0, 0).terms().next().unwrap();
        assert_eq!(c, &BigInt::from(-1));
        let k = l.arc_at(0, 2).unwrap();
        let mut e = l.arcs()[k].label.clone();
        e.push(0);
        assert_eq!(bm.get(0, 0), &LaurentPoly::monomial(e, -1));
    }
}
