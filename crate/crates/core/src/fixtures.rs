//! Worked examples and seeded random generators used by the tests, benches and CLI.

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graphcore::{EdgePath, Graph, GraphMap, PeriodicPointSpec, Sign, Step};
use crate::laurent::LaurentPoly;
use crate::marking::{CohomologyClass, CoordinateSystem, MarkedAbelianization};
use crate::stallings::FreeGroupEndo;

/// Two vertices `L`, `R`; `a, b, d: L → R`, `c: R → R`;
/// `a ↦ d`, `b ↦ a`, `c ↦ b̄a`, `d ↦ b ā d b̄ a c`.
pub fn running_example() -> GraphMap {
    GraphMap::from_words(
        &["L", "R"],
        &[("a", "L", "R"), ("b", "L", "R"), ("c", "R", "R"), ("d", "L", "R")],
        &[("L", "L"), ("R", "R")],
        &[("a", "d"), ("b", "a"), ("c", "b^-1 a"), ("d", "b a^-1 d b^-1 a c")],
    )
    .expect("running example is valid")
}

/// The running example marked at `R` with spanning tree `{a}`.
pub fn running_marked() -> MarkedAbelianization {
    let f = running_example();
    let g = f.graph();
    let root = g.vertex_index("R");
    let a = g.edge_index("a").unwrap();
    MarkedAbelianization::new(&f, root, Some(&[a])).expect("running marking")
}

fn class(name: &str, values: [i64; 4], stable: i64) -> CohomologyClass {
    CohomologyClass::from_ints(Some(name), &values, stable)
}

/// `s*`, `w*` and the classes `u0 = w*`, `u1 = −s* + 2w*`, `u2 = −s* + w*`, relative to [`running_marked`].
pub fn running_classes() -> Vec<CohomologyClass> {
    vec![
        class("s*", [0, -1, 1, 1], 0),
        class("w*", [0, 0, 0, 0], 1),
        class("u0", [0, 0, 0, 0], 1),
        class("u1", [0, 1, -1, -1], 2),
        class("u2", [0, 1, -1, -1], 1),
    ]
}

pub fn running_characters() -> Vec<CohomologyClass> {
    running_classes().into_iter().take(2).collect()
}

pub fn running_coordinates(m: &MarkedAbelianization) -> CoordinateSystem {
    m.make_coordinates(&running_characters()).expect("running characters are unimodular")
}

/// `x⁴ − t²x³ − t³x² − tx² − t³x − t²x − x − t` in the variables `(t, x)`.
pub fn running_polynomial() -> LaurentPoly {
    LaurentPoly::from_terms(
        2,
        [
            (vec![0, 4], 1),
            (vec![2, 3], -1),
            (vec![3, 2], -1),
            (vec![1, 2], -1),
            (vec![3, 1], -1),
            (vec![2, 1], -1),
            (vec![0, 1], -1),
            (vec![1, 0], -1),
        ],
    )
}

/// The seven closed-orbit classes of the running example in `(s*, w*)` coordinates.
pub fn running_orbit_classes() -> Vec<Vec<i64>> {
    vec![vec![-2, 1], vec![-3, 2], vec![-1, 2], vec![0, 3], vec![-1, 4], vec![-3, 3], vec![-2, 3]]
}

/// Rank 5: `x_i ↦ x_{i+1}` for `i < 5`, `x5 ↦ x5 x2 x1⁻¹ x2 x1 x2⁻¹ x4⁻¹`.
pub fn phi1() -> FreeGroupEndo {
    FreeGroupEndo::new(5, vec![vec![2], vec![3], vec![4], vec![5], vec![5, 2, -1, 2, 1, -2, -4]])
        .expect("phi1")
}

/// Rank 4: `x_i ↦ x_{i+1}` for `i < 4`, `x4 ↦ x4 x2 x1⁻¹ x2 x2 x3⁻¹ x4⁻¹`.
pub fn phi2() -> FreeGroupEndo {
    FreeGroupEndo::new(4, vec![vec![2], vec![3], vec![4], vec![4, 2, -1, 2, 2, -3, -4]]).expect("phi2")
}

/// The same map with edges listed in the order `perm` (new edge `k` is old edge `perm[k]`).
pub fn relabel_edges(f: &GraphMap, perm: &[usize]) -> GraphMap {
    let g = f.graph();
    let mut inv = vec![0; perm.len()];
    for (k, &old) in perm.iter().enumerate() {
        inv[old] = k;
    }
    let edges: Vec<(String, String, String)> = perm
        .iter()
        .map(|&e| {
            let edge = g.edge(e);
            (edge.id.clone(), g.vertex_name(edge.origin).to_string(), g.vertex_name(edge.terminus).to_string())
        })
        .collect();
    let graph = Graph::new(g.vertices(), &edges).expect("relabeled graph");
    let images = perm
        .iter()
        .map(|&e| EdgePath::new(f.edge_image(e).steps.iter().map(|s| Step::new(inv[s.edge], s.sign)).collect()))
        .collect();
    GraphMap::new(graph, f.vertex_images().to_vec(), images).expect("relabeled map")
}

fn rose_graph(k: usize) -> Graph {
    let names: Vec<String> = (0..k).map(|i| format!("e{i}")).collect();
    let edges: Vec<(String, String, String)> = names.iter().map(|n| (n.clone(), "v".into(), "v".into())).collect();
    Graph::new(&["v".to_string()], &edges).unwrap()
}

fn reduced(steps: Vec<Step>) -> EdgePath {
    let mut out: Vec<Step> = Vec::new();
    for s in steps {
        if out.last() == Some(&s.inverse()) {
            out.pop();
        } else {
            out.push(s);
        }
    }
    EdgePath::new(out)
}

/// Positive words on a rose.
fn positive_rose<R: Rng>(rng: &mut R, max_edges: usize) -> Option<GraphMap> {
    let k = rng.gen_range(2..=max_edges.clamp(2, 4));
    let images = (0..k)
        .map(|_| {
            let len = rng.gen_range(1..=3);
            EdgePath::new((0..len).map(|_| Step::fwd(rng.gen_range(0..k))).collect())
        })
        .collect();
    GraphMap::new(rose_graph(k), vec![0], images).ok()
}

/// A cyclic permutation of petals with a commutator appended to one image, so
/// that the action on homology fixes a vector.
fn commutator_rose<R: Rng>(rng: &mut R, max_edges: usize) -> Option<GraphMap> {
    let k = rng.gen_range(2..=max_edges.clamp(2, 5));
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let mut images: Vec<EdgePath> = (0..k)
        .map(|i| {
            let sign = if rng.gen_bool(0.8) { Sign::Pos } else { Sign::Neg };
            EdgePath::new(vec![Step::new(perm[(perm.iter().position(|&p| p == i).unwrap() + 1) % k], sign)])
        })
        .collect();
    let e = rng.gen_range(0..k);
    let p = Step::new(rng.gen_range(0..k), if rng.gen_bool(0.5) { Sign::Pos } else { Sign::Neg });
    let q = Step::new(rng.gen_range(0..k), if rng.gen_bool(0.5) { Sign::Pos } else { Sign::Neg });
    let mut steps = images[e].steps.clone();
    let tail = [p, q, p.inverse(), q.inverse()];
    if rng.gen_bool(0.5) {
        steps.extend(tail);
    } else {
        let mut s = tail.to_vec();
        s.extend(steps);
        steps = s;
    }
    images[e] = reduced(steps);
    if images[e].is_empty() {
        return None;
    }
    GraphMap::new(rose_graph(k), vec![0], images).ok()
}

/// Random small graph with random reduced edge paths.
fn random_small_graph<R: Rng>(rng: &mut R, max_edges: usize) -> Option<GraphMap> {
    let nv = rng.gen_range(1..=3usize);
    let ne = rng.gen_range(nv + 1..=max_edges.max(nv + 1).min(nv + 4));
    let vnames: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::with_capacity(ne);
    for i in 0..ne {
        // the first nv - 1 edges form a path so the graph is connected
        let (o, t) = if i + 1 < nv { (i, i + 1) } else { (rng.gen_range(0..nv), rng.gen_range(0..nv)) };
        edges.push((format!("e{i}"), vnames[o].clone(), vnames[t].clone()));
    }
    let graph = Graph::new(&vnames, &edges).ok()?;
    if (0..nv).any(|v| graph.valence(v) < 2) {
        return None;
    }
    let vimg: Vec<usize> = (0..nv).map(|_| rng.gen_range(0..nv)).collect();
    let mut images = Vec::with_capacity(ne);
    for e in 0..ne {
        let from = vimg[graph.edge(e).origin];
        let to = vimg[graph.edge(e).terminus];
        let mut found = None;
        for _ in 0..60 {
            let len = rng.gen_range(1..=4);
            let mut v = from;
            let mut steps: Vec<Step> = Vec::new();
            for _ in 0..len {
                let options: Vec<Step> = (0..ne)
                    .flat_map(|k| [Step::new(k, Sign::Pos), Step::new(k, Sign::Neg)])
                    .filter(|s| graph.step_origin(*s) == v && steps.last() != Some(&s.inverse()))
                    .collect();
                let s = *options.choose(rng)?;
                v = graph.step_terminus(s);
                steps.push(s);
            }
            if v == to {
                found = Some(EdgePath::new(steps));
                break;
            }
        }
        images.push(found?);
    }
    GraphMap::new(graph, vimg, images).ok()
}

/// A valid graph map (no dynamical hypotheses), with at most `max_edges` edges.
pub fn random_graph_map(seed: u64, max_edges: usize) -> GraphMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let f = match rng.gen_range(0..3) {
            0 => positive_rose(&mut rng, max_edges),
            1 => commutator_rose(&mut rng, max_edges),
            _ => random_small_graph(&mut rng, max_edges),
        };
        if let Some(f) = f {
            return f;
        }
    }
}

/// An expanding irreducible train track map with at most `max_edges` edges.
pub fn random_train_track(seed: u64, max_edges: usize) -> GraphMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let f = match rng.gen_range(0..4) {
            0 => positive_rose(&mut rng, max_edges),
            1 | 2 => commutator_rose(&mut rng, max_edges),
            _ => random_small_graph(&mut rng, max_edges),
        };
        if let Some(f) = f {
            if f.check_dynamics().is_ok() {
                return f;
            }
        }
    }
}

/// A random periodic point of `f` off the vertices, following a random circuit
/// of the transition graph; `None` when the attempts all hit vertices.
pub fn random_periodic_point(f: &GraphMap, seed: u64) -> Option<PeriodicPointSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        let host = rng.gen_range(0..f.num_edges());
        let mut chain = Vec::new();
        let mut e = host;
        for _ in 0..3 * f.num_edges() {
            let img = f.edge_image(e);
            let l = rng.gen_range(0..img.len());
            chain.push(l + 1);
            e = img.steps[l].edge;
            if e == host {
                break;
            }
        }
        if e != host {
            continue;
        }
        let spec = PeriodicPointSpec { host, chain };
        if f.subdivide_at_invariant_set(std::slice::from_ref(&spec)).is_ok() {
            return Some(spec);
        }
    }
    None
}

/// A random endomorphism of the free group of rank `rank` with images of length ≤ `max_len`.
pub fn random_endo(seed: u64, rank: usize, max_len: usize) -> FreeGroupEndo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..rank)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            (0..len)
                .map(|_| {
                    let g = rng.gen_range(1..=rank as i32);
                    if rng.gen_bool(0.5) {
                        g
                    } else {
                        -g
                    }
                })
                .collect()
        })
        .collect();
    FreeGroupEndo::new(rank, images).unwrap()
}

/// A random rational class with small numerator and denominator.
pub fn random_rational<R: Rng>(rng: &mut R, bound: i64) -> BigRational {
    BigRational::new(rng.gen_range(-bound..=bound).into(), rng.gen_range(1..=3).into())
}
