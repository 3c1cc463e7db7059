//! Free-group endomorphisms and Stallings folding.
//!
//! Words are sequences of nonzero integers: `k` is the generator `x_k`, `-k` its inverse.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub type Word = Vec<i32>;

pub fn reduce(word: &[i32]) -> Word {
    let mut out: Word = Vec::with_capacity(word.len());
    for &x in word {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

pub fn inverse(word: &[i32]) -> Word {
    word.iter().rev().map(|x| -x).collect()
}

pub fn format_word(word: &[i32]) -> String {
    if word.is_empty() {
        return "1".into();
    }
    word.iter()
        .map(|&x| if x > 0 { format!("x{x}") } else { format!("x{}^-1", -x) })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeGroupEndo {
    rank: usize,
    images: Vec<Word>,
}

impl FreeGroupEndo {
    pub fn new(rank: usize, images: Vec<Word>) -> Result<FreeGroupEndo> {
        if images.len() != rank {
            return Err(Error::Endo(format!("{} images for rank {rank}", images.len())));
        }
        for (i, w) in images.iter().enumerate() {
            if let Some(bad) = w.iter().find(|x| **x == 0 || x.unsigned_abs() as usize > rank) {
                return Err(Error::Endo(format!("image of x{} uses unknown letter {bad}", i + 1)));
            }
        }
        Ok(FreeGroupEndo { rank, images: images.iter().map(|w| reduce(w)).collect() })
    }

    pub fn identity(rank: usize) -> FreeGroupEndo {
        FreeGroupEndo { rank, images: (1..=rank as i32).map(|k| vec![k]).collect() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn apply(&self, word: &[i32]) -> Word {
        let mut out = Vec::new();
        for &x in word {
            let img = &self.images[x.unsigned_abs() as usize - 1];
            if x > 0 {
                out.extend_from_slice(img);
            } else {
                out.extend(inverse(img));
            }
        }
        reduce(&out)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &FreeGroupEndo) -> FreeGroupEndo {
        assert_eq!(self.rank, other.rank);
        FreeGroupEndo { rank: self.rank, images: other.images.iter().map(|w| self.apply(w)).collect() }
    }

    /// The folded graph of the image subgroup.
    pub fn fold(&self) -> FoldedGraph {
        FoldedGraph::from_words(&self.images)
    }

    pub fn image_rank(&self) -> usize {
        self.fold().rank()
    }

    /// Injective iff the image has full rank (free groups of finite rank are Hopfian).
    pub fn is_injective(&self) -> bool {
        self.image_rank() == self.rank
    }

    pub fn is_surjective(&self) -> bool {
        let g = self.fold();
        (1..=self.rank as i32).all(|k| g.accepts(&[k]))
    }

    /// Least `i` with `rank φ^i(F) = rank φ^{i+1}(F)`, and the ranks seen up to there.
    pub fn stable_image_index(&self, cap: usize) -> Result<(usize, Vec<usize>)> {
        let mut graph = FoldedGraph::from_words(&FreeGroupEndo::identity(self.rank).images);
        let mut ranks = vec![graph.rank()];
        for i in 0..cap {
            let basis: Vec<Word> = graph.basis().iter().map(|w| self.apply(w)).collect();
            graph = FoldedGraph::from_words(&basis);
            let r = graph.rank();
            if r > ranks[i] {
                return Err(Error::Endo(format!("rank increased from {} to {r}", ranks[i])));
            }
            ranks.push(r);
            if r == ranks[i] {
                return Ok((i, ranks));
            }
        }
        Err(Error::Endo(format!("image rank did not stabilize within {cap} iterations")))
    }
}

impl fmt::Display for FreeGroupEndo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.images.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "x{} -> {}", i + 1, format_word(w))?;
        }
        Ok(())
    }
}

/// A based graph with edges labeled by generators, folded to an immersion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldedGraph {
    base: usize,
    vertices: usize,
    /// `(origin, label, terminus)`, label in `1..=n`.
    edges: Vec<(usize, u32, usize)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.0[hi] = lo;
        }
    }
}

impl FoldedGraph {
    /// Wedge of loops spelling `words`, folded in a deterministic order.
    pub fn from_words(words: &[Word]) -> FoldedGraph {
        Self::fold_wedge(words, None::<&mut rand::rngs::ThreadRng>)
    }

    /// Same, but folding the violations in a random order.
    pub fn from_words_random<R: Rng>(words: &[Word], rng: &mut R) -> FoldedGraph {
        Self::fold_wedge(words, Some(rng))
    }

    fn fold_wedge<R: Rng>(words: &[Word], rng: Option<&mut R>) -> FoldedGraph {
        let mut vertices = 1;
        let mut edges = Vec::new();
        for w in words {
            let w = reduce(w);
            let mut cur = 0;
            for (i, &x) in w.iter().enumerate() {
                let next = if i + 1 == w.len() {
                    0
                } else {
                    vertices += 1;
                    vertices - 1
                };
                if x > 0 {
                    edges.push((cur, x as u32, next));
                } else {
                    edges.push((next, (-x) as u32, cur));
                }
                cur = next;
            }
        }
        Self::fold(vertices, edges, rng)
    }

    fn fold<R: Rng>(vertices: usize, mut edges: Vec<(usize, u32, usize)>, mut rng: Option<&mut R>) -> FoldedGraph {
        let mut uf = UnionFind((0..vertices).collect());
        loop {
            for e in edges.iter_mut() {
                *e = (uf.find(e.0), e.1, uf.find(e.2));
            }
            edges.sort();
            edges.dedup();
            // folds pending: pairs of vertices forced together
            let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
            let mut out_seen: BTreeMap<(usize, u32), usize> = BTreeMap::new();
            let mut in_seen: BTreeMap<(usize, u32), usize> = BTreeMap::new();
            for &(o, l, t) in &edges {
                if let Some(&t2) = out_seen.get(&(o, l)) {
                    if t2 != t {
                        queue.push_back((t2, t));
                    }
                } else {
                    out_seen.insert((o, l), t);
                }
                if let Some(&o2) = in_seen.get(&(t, l)) {
                    if o2 != o {
                        queue.push_back((o2, o));
                    }
                } else {
                    in_seen.insert((t, l), o);
                }
            }
            if queue.is_empty() {
                break;
            }
            match rng.as_deref_mut() {
                Some(r) => {
                    let k = r.gen_range(0..queue.len());
                    let (a, b) = queue[k];
                    uf.union(a, b);
                }
                None => {
                    while let Some((a, b)) = queue.pop_front() {
                        uf.union(a, b);
                    }
                }
            }
        }
        // renumber vertices compactly, base first
        let base = uf.find(0);
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        ids.insert(base, 0);
        for &(o, _, t) in &edges {
            for v in [o, t] {
                let n = ids.len();
                ids.entry(v).or_insert(n);
            }
        }
        let mut edges: Vec<(usize, u32, usize)> = edges.iter().map(|&(o, l, t)| (ids[&o], l, ids[&t])).collect();
        edges.sort();
        FoldedGraph { base: 0, vertices: ids.len(), edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, u32, usize)] {
        &self.edges
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// First Betti number `E − V + 1`.
    pub fn rank(&self) -> usize {
        self.edges.len() + 1 - self.vertices
    }

    pub fn is_immersion(&self) -> bool {
        let mut out = std::collections::BTreeSet::new();
        let mut inc = std::collections::BTreeSet::new();
        self.edges.iter().all(|&(o, l, t)| out.insert((o, l)) && inc.insert((t, l)))
    }

    /// The wedge of `n` petals labeled `1..=n`.
    pub fn is_rose(&self, n: usize) -> bool {
        self.vertices == 1 && self.edges.len() == n && self.edges.iter().enumerate().all(|(i, e)| e.1 as usize == i + 1)
    }

    fn step(&self, v: usize, x: i32) -> Option<usize> {
        let l = x.unsigned_abs();
        if x > 0 {
            self.edges.iter().find(|e| e.0 == v && e.1 == l).map(|e| e.2)
        } else {
            self.edges.iter().find(|e| e.2 == v && e.1 == l).map(|e| e.0)
        }
    }

    /// Whether the reduced word lies in the subgroup (reads a closed path at the base).
    pub fn accepts(&self, word: &[i32]) -> bool {
        let mut v = self.base;
        for &x in &reduce(word) {
            match self.step(v, x) {
                Some(w) => v = w,
                None => return false,
            }
        }
        v == self.base
    }

    /// Neighbours of `v` as `(letter, vertex)`, ordered by label then outgoing first.
    fn neighbours(&self, v: usize) -> Vec<(i32, usize, usize)> {
        let mut out: Vec<(u32, u8, i32, usize, usize)> = Vec::new();
        for (k, &(o, l, t)) in self.edges.iter().enumerate() {
            if o == v {
                out.push((l, 0, l as i32, t, k));
            }
            if t == v {
                out.push((l, 1, -(l as i32), o, k));
            }
        }
        out.sort();
        out.into_iter().map(|(_, _, x, w, k)| (x, w, k)).collect()
    }

    /// Vertex renumbering by breadth-first search from the base; equal for isomorphic based graphs.
    pub fn canonical_form(&self) -> (usize, Vec<(usize, u32, usize)>) {
        let mut order = vec![usize::MAX; self.vertices];
        order[self.base] = 0;
        let mut next = 1;
        let mut queue = VecDeque::from([self.base]);
        while let Some(v) = queue.pop_front() {
            for (_, w, _) in self.neighbours(v) {
                if order[w] == usize::MAX {
                    order[w] = next;
                    next += 1;
                    queue.push_back(w);
                }
            }
        }
        let mut edges: Vec<(usize, u32, usize)> =
            self.edges.iter().map(|&(o, l, t)| (order[o], l, order[t])).collect();
        edges.sort();
        (self.vertices, edges)
    }

    /// A free basis of the subgroup: one word per edge outside a breadth-first spanning tree.
    pub fn basis(&self) -> Vec<Word> {
        let mut path: Vec<Option<Word>> = vec![None; self.vertices];
        let mut tree = vec![false; self.edges.len()];
        path[self.base] = Some(Vec::new());
        let mut queue = VecDeque::from([self.base]);
        while let Some(v) = queue.pop_front() {
            for (x, w, k) in self.neighbours(v) {
                if path[w].is_none() {
                    let mut p = path[v].clone().unwrap();
                    p.push(x);
                    path[w] = Some(p);
                    tree[k] = true;
                    queue.push_back(w);
                }
            }
        }
        self.edges
            .iter()
            .enumerate()
            .filter(|(k, _)| !tree[*k])
            .map(|(_, &(o, l, t))| {
                let mut w = path[o].clone().unwrap();
                w.push(l as i32);
                w.extend(inverse(path[t].as_ref().unwrap()));
                reduce(&w)
            })
            .collect()
    }
}
