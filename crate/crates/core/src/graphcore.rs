//! Finite graphs, combinatorial graph maps and the dynamical checks
//! (irreducible, expanding, train track) that gate the rest of the pipeline.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result, ValidationIssue, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    pub fn from_i64(s: i64) -> Option<Sign> {
        match s {
            1 => Some(Sign::Pos),
            -1 => Some(Sign::Neg),
            _ => None,
        }
    }

    pub fn mul(self, other: Sign) -> Sign {
        if self == other {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }
}

/// One signed edge traversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub edge: usize,
    pub sign: Sign,
}

impl Step {
    pub fn new(edge: usize, sign: Sign) -> Step {
        Step { edge, sign }
    }

    pub fn fwd(edge: usize) -> Step {
        Step::new(edge, Sign::Pos)
    }

    pub fn inverse(self) -> Step {
        Step::new(self.edge, self.sign.flip())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct EdgePath {
    pub steps: Vec<Step>,
}

impl EdgePath {
    pub fn new(steps: Vec<Step>) -> EdgePath {
        EdgePath { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn inverse(&self) -> EdgePath {
        EdgePath::new(self.steps.iter().rev().map(|s| s.inverse()).collect())
    }

    /// Indices `k` such that step `k + 1` undoes step `k`.
    pub fn backtracks(&self) -> Vec<usize> {
        self.steps
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] == w[0].inverse())
            .map(|(k, _)| k)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub origin: usize,
    pub terminus: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph from vertex names and `(id, from, to)` triples.
    pub fn new<S: AsRef<str>>(vertices: &[S], edges: &[(S, S, S)]) -> Result<Graph> {
        let mut issues = Vec::new();
        let mut vindex: HashMap<&str, usize> = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if vindex.insert(v.as_ref(), i).is_some() {
                issues.push(ValidationIssue::DuplicateVertex(v.as_ref().to_string()));
            }
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (id, from, to) in edges {
            let id = id.as_ref();
            if !seen.insert(id.to_string()) {
                issues.push(ValidationIssue::DuplicateEdge(id.to_string()));
            }
            let mut ends = [0usize; 2];
            for (slot, name) in [from.as_ref(), to.as_ref()].into_iter().enumerate() {
                match vindex.get(name) {
                    Some(&i) => ends[slot] = i,
                    None => issues.push(ValidationIssue::UnknownVertex {
                        edge: id.to_string(),
                        vertex: name.to_string(),
                    }),
                }
            }
            out.push(Edge { id: id.to_string(), origin: ends[0], terminus: ends[1] });
        }
        let graph = Graph {
            vertices: vertices.iter().map(|v| v.as_ref().to_string()).collect(),
            edges: out,
        };
        if issues.is_empty() {
            for v in 0..graph.num_vertices() {
                if graph.valence(v) == 1 {
                    issues.push(ValidationIssue::ValenceOne(graph.vertices[v].clone()));
                }
            }
        }
        if issues.is_empty() {
            Ok(graph)
        } else {
            Err(Error::Validation(ValidationReport { issues }))
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn edge_id(&self, e: usize) -> &str {
        &self.edges[e].id
    }

    /// Valence, counting both ends of a loop.
    pub fn valence(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.origin == v) as usize + (e.terminus == v) as usize)
            .sum()
    }

    pub fn step_origin(&self, s: Step) -> usize {
        let e = &self.edges[s.edge];
        match s.sign {
            Sign::Pos => e.origin,
            Sign::Neg => e.terminus,
        }
    }

    pub fn step_terminus(&self, s: Step) -> usize {
        self.step_origin(s.inverse())
    }

    /// Parses a whitespace separated word such as `"b a^-1 d"`.
    pub fn parse_path(&self, word: &str) -> Result<EdgePath> {
        let mut steps = Vec::new();
        for tok in word.split_whitespace() {
            let (id, sign) = match tok.strip_suffix("^-1") {
                Some(id) => (id, Sign::Neg),
                None => (tok, Sign::Pos),
            };
            let e = self
                .edge_index(id)
                .ok_or_else(|| Error::Parse(format!("unknown edge `{id}` in `{word}`")))?;
            steps.push(Step::new(e, sign));
        }
        Ok(EdgePath::new(steps))
    }

    pub fn format_path(&self, path: &EdgePath) -> String {
        path.steps
            .iter()
            .map(|s| match s.sign {
                Sign::Pos => self.edges[s.edge].id.clone(),
                Sign::Neg => format!("{}^-1", self.edges[s.edge].id),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks that consecutive steps of `path` share endpoints.
    fn path_break(&self, path: &EdgePath) -> Option<usize> {
        path.steps
            .windows(2)
            .position(|w| self.step_terminus(w[0]) != self.step_origin(w[1]))
            .map(|k| k + 1)
    }
}

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> IntMatrix {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> IntMatrix {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> IntMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = IntMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            for (j, x) in row.iter().enumerate() {
                m.set(i, j, x.clone().into());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_i64_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_i64().expect("entry fits in i64")).collect())
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.to_f64().unwrap_or(f64::INFINITY)).collect())
            .collect()
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut out = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn is_permutation(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let mut col_hits = vec![0usize; n];
        for i in 0..n {
            let mut hits = 0;
            for j in 0..n {
                let x = self.get(i, j);
                if x.is_one() {
                    hits += 1;
                    col_hits[j] += 1;
                } else if !x.is_zero() {
                    return false;
                }
            }
            if hits != 1 {
                return false;
            }
        }
        col_hits.iter().all(|&c| c == 1)
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// A combinatorial graph map: vertices to vertices, edges to edge paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphMap {
    graph: Graph,
    vertex_image: Vec<usize>,
    edge_image: Vec<EdgePath>,
}

/// Germ of an edge at one of its ends: the start of the step `(edge, sign)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Direction {
    pub edge: usize,
    pub sign: Sign,
}

impl Direction {
    pub fn of_step(s: Step) -> Direction {
        Direction { edge: s.edge, sign: s.sign }
    }
}

/// An unordered pair of directions at a common vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Turn {
    pub first: Direction,
    pub second: Direction,
}

impl Turn {
    pub fn is_degenerate(&self) -> bool {
        self.first == self.second
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TurnSource {
    /// Turn between steps `position` and `position + 1` (1-based) of the image of `edge`.
    Image { edge: usize, position: usize },
    ValenceTwo { vertex: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IllegalTurn {
    /// The taken turn whose forward image degenerates.
    pub turn: Turn,
    pub source: TurnSource,
    /// Power of `f` in whose edge images (or at whose vertex) the backtrack appears.
    pub power: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainTrackCheck {
    pub is_train_track: bool,
    pub witness: Option<IllegalTurn>,
    /// Number of distinct turns in the closure.
    pub closure_size: usize,
    /// False when `max_power` cut the closure short.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iterate {
    pub path: EdgePath,
    pub backtracks: Vec<usize>,
}

impl GraphMap {
    pub fn new(graph: Graph, vertex_image: Vec<usize>, edge_image: Vec<EdgePath>) -> Result<GraphMap> {
        let gm = GraphMap { graph, vertex_image, edge_image };
        let issues = gm.issues();
        if issues.is_empty() {
            Ok(gm)
        } else {
            Err(Error::Validation(ValidationReport { issues }))
        }
    }

    /// Convenience constructor from names and whitespace separated image words.
    pub fn from_words(
        vertices: &[&str],
        edges: &[(&str, &str, &str)],
        vertex_images: &[(&str, &str)],
        edge_images: &[(&str, &str)],
    ) -> Result<GraphMap> {
        let graph = Graph::new(vertices, edges)?;
        let mut vimg = vec![usize::MAX; graph.num_vertices()];
        let mut issues = Vec::new();
        for (v, w) in vertex_images {
            match (graph.vertex_index(v), graph.vertex_index(w)) {
                (Some(i), Some(j)) => vimg[i] = j,
                _ => issues.push(ValidationIssue::MissingVertexImage(v.to_string())),
            }
        }
        let mut eimg = vec![EdgePath::default(); graph.num_edges()];
        let mut given = vec![false; graph.num_edges()];
        for (e, word) in edge_images {
            let Some(i) = graph.edge_index(e) else {
                issues.push(ValidationIssue::DanglingEdge {
                    context: "edge images".into(),
                    edge: e.to_string(),
                });
                continue;
            };
            eimg[i] = graph.parse_path(word)?;
            given[i] = true;
        }
        for (i, ok) in given.iter().enumerate() {
            if !ok {
                issues.push(ValidationIssue::MissingEdgeImage(graph.edge_id(i).to_string()));
            }
        }
        for (i, &w) in vimg.iter().enumerate() {
            if w == usize::MAX {
                issues.push(ValidationIssue::MissingVertexImage(graph.vertex_name(i).to_string()));
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(ValidationReport { issues }));
        }
        GraphMap::new(graph, vimg, eimg)
    }

    fn issues(&self) -> Vec<ValidationIssue> {
        let g = &self.graph;
        let mut issues = Vec::new();
        if self.vertex_image.len() != g.num_vertices() {
            issues.push(ValidationIssue::MissingVertexImage("<count>".into()));
            return issues;
        }
        if self.edge_image.len() != g.num_edges() {
            issues.push(ValidationIssue::MissingEdgeImage("<count>".into()));
            return issues;
        }
        for (v, &w) in self.vertex_image.iter().enumerate() {
            if w >= g.num_vertices() {
                issues.push(ValidationIssue::MissingVertexImage(g.vertex_name(v).to_string()));
            }
        }
        for v in 0..g.num_vertices() {
            if g.valence(v) == 1 {
                issues.push(ValidationIssue::ValenceOne(g.vertex_name(v).to_string()));
            }
        }
        if !issues.is_empty() {
            return issues;
        }
        for (e, path) in self.edge_image.iter().enumerate() {
            let id = g.edge_id(e).to_string();
            if path.is_empty() {
                issues.push(ValidationIssue::EmptyImage(id));
                continue;
            }
            if let Some(bad) = path.steps.iter().find(|s| s.edge >= g.num_edges()) {
                issues.push(ValidationIssue::DanglingEdge {
                    context: format!("image of `{id}`"),
                    edge: format!("#{}", bad.edge),
                });
                continue;
            }
            if let Some(step) = g.path_break(path) {
                issues.push(ValidationIssue::BrokenPath { edge: id, step });
                continue;
            }
            let edge = g.edge(e);
            let want_start = self.vertex_image[edge.origin];
            let want_end = self.vertex_image[edge.terminus];
            let start = g.step_origin(path.steps[0]);
            let end = g.step_terminus(*path.steps.last().unwrap());
            if start != want_start {
                issues.push(ValidationIssue::EndpointMismatch {
                    edge: id.clone(),
                    detail: format!(
                        "starts at `{}` but f({}) = `{}`",
                        g.vertex_name(start),
                        g.vertex_name(edge.origin),
                        g.vertex_name(want_start)
                    ),
                });
            }
            if end != want_end {
                issues.push(ValidationIssue::EndpointMismatch {
                    edge: id,
                    detail: format!(
                        "ends at `{}` but f({}) = `{}`",
                        g.vertex_name(end),
                        g.vertex_name(edge.terminus),
                        g.vertex_name(want_end)
                    ),
                });
            }
        }
        issues
    }

    /// Re-runs every invariant check and reports all problems found.
    pub fn validate(&self) -> std::result::Result<(), ValidationReport> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ValidationReport { issues })
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn vertex_image(&self, v: usize) -> usize {
        self.vertex_image[v]
    }

    pub fn vertex_images(&self) -> &[usize] {
        &self.vertex_image
    }

    pub fn edge_image(&self, e: usize) -> &EdgePath {
        &self.edge_image[e]
    }

    pub fn edge_images(&self) -> &[EdgePath] {
        &self.edge_image
    }

    /// Image of a signed step.
    pub fn step_image(&self, s: Step) -> EdgePath {
        match s.sign {
            Sign::Pos => self.edge_image[s.edge].clone(),
            Sign::Neg => self.edge_image[s.edge].inverse(),
        }
    }

    /// Image of a path, concatenated without reduction.
    pub fn path_image(&self, p: &EdgePath) -> EdgePath {
        let mut steps = Vec::new();
        for &s in &p.steps {
            steps.extend(self.step_image(s).steps);
        }
        EdgePath::new(steps)
    }

    /// Entry `(e, e')` counts the occurrences of `e` (either sign) in `f(e')`.
    pub fn transition_matrix(&self) -> IntMatrix {
        let m = self.num_edges();
        let mut a = IntMatrix::zeros(m, m);
        for (src, path) in self.edge_image.iter().enumerate() {
            for s in &path.steps {
                let v = a.get(s.edge, src) + 1;
                a.set(s.edge, src, v);
            }
        }
        a
    }

    fn successors(&self) -> Vec<BTreeSet<usize>> {
        self.edge_image
            .iter()
            .map(|p| p.steps.iter().map(|s| s.edge).collect())
            .collect()
    }

    pub fn is_irreducible(&self) -> bool {
        let m = self.num_edges();
        if m == 0 {
            return false;
        }
        let fwd = self.successors();
        let mut bwd = vec![BTreeSet::new(); m];
        for (src, outs) in fwd.iter().enumerate() {
            for &t in outs {
                bwd[t].insert(src);
            }
        }
        reaches_all(&fwd) && reaches_all(&bwd)
    }

    /// Expansion for irreducible maps: the transition matrix is not a permutation.
    pub fn is_expanding(&self) -> Result<bool> {
        if !self.is_irreducible() {
            return Err(Error::Dynamics("irreducibility required".into()));
        }
        Ok(!self.transition_matrix().is_permutation())
    }

    pub fn direction_vertex(&self, d: Direction) -> usize {
        self.graph.step_origin(Step::new(d.edge, d.sign))
    }

    /// Derivative map on directions: the first germ of the image path.
    pub fn df(&self, d: Direction) -> Direction {
        let img = &self.edge_image[d.edge];
        match d.sign {
            Sign::Pos => Direction::of_step(img.steps[0]),
            Sign::Neg => Direction::of_step(img.steps.last().unwrap().inverse()),
        }
    }

    fn direction_key(&self, d: Direction) -> (usize, usize, Sign) {
        (self.direction_vertex(d), d.edge, d.sign)
    }

    fn make_turn(&self, a: Direction, b: Direction) -> Turn {
        if self.direction_key(a) <= self.direction_key(b) {
            Turn { first: a, second: b }
        } else {
            Turn { first: b, second: a }
        }
    }

    /// All directions, in (vertex, edge, sign) order.
    pub fn directions(&self) -> Vec<Direction> {
        let mut ds: Vec<Direction> = (0..self.num_edges())
            .flat_map(|e| [Sign::Pos, Sign::Neg].map(|sign| Direction { edge: e, sign }))
            .collect();
        ds.sort_by_key(|&d| self.direction_key(d));
        ds
    }

    /// Turns taken inside edge images plus the turn at every valence-2 vertex.
    pub fn taken_turns(&self) -> Vec<(Turn, TurnSource)> {
        let mut out = Vec::new();
        for (e, path) in self.edge_image.iter().enumerate() {
            for (k, w) in path.steps.windows(2).enumerate() {
                let t = self.make_turn(Direction::of_step(w[0].inverse()), Direction::of_step(w[1]));
                out.push((t, TurnSource::Image { edge: e, position: k + 1 }));
            }
        }
        let dirs = self.directions();
        for v in 0..self.graph.num_vertices() {
            let at: Vec<Direction> =
                dirs.iter().copied().filter(|&d| self.direction_vertex(d) == v).collect();
            if at.len() == 2 {
                out.push((self.make_turn(at[0], at[1]), TurnSource::ValenceTwo { vertex: v }));
            }
        }
        out.sort_by(|a, b| {
            let ka = (self.direction_key(a.0.first), self.direction_key(a.0.second));
            let kb = (self.direction_key(b.0.first), self.direction_key(b.0.second));
            ka.cmp(&kb)
        });
        out
    }

    /// Decides the train track property by closing the taken turns under `Df`.
    pub fn is_train_track(&self, max_power: usize) -> TrainTrackCheck {
        let mut seen: BTreeMap<Turn, ()> = BTreeMap::new();
        let mut queue: VecDeque<(Turn, Turn, TurnSource, usize)> = VecDeque::new();
        for (t, src) in self.taken_turns() {
            let power = match src {
                TurnSource::Image { .. } => 1,
                TurnSource::ValenceTwo { .. } => 0,
            };
            queue.push_back((t, t, src, power));
        }
        let mut complete = true;
        while let Some((turn, origin, src, power)) = queue.pop_front() {
            if seen.insert(turn, ()).is_some() {
                continue;
            }
            if turn.is_degenerate() {
                return TrainTrackCheck {
                    is_train_track: false,
                    witness: Some(IllegalTurn { turn: origin, source: src, power }),
                    closure_size: seen.len(),
                    complete: true,
                };
            }
            if power >= max_power {
                complete = false;
                continue;
            }
            let next = self.make_turn(self.df(turn.first), self.df(turn.second));
            if !seen.contains_key(&next) {
                queue.push_back((next, origin, src, power + 1));
            }
        }
        TrainTrackCheck { is_train_track: true, witness: None, closure_size: seen.len(), complete }
    }

    /// The unreduced path `f^n(e)` with its immediate backtracks.
    pub fn iterate_edge(&self, e: usize, n: usize) -> Iterate {
        let mut path = EdgePath::new(vec![Step::fwd(e)]);
        for _ in 0..n {
            path = self.path_image(&path);
        }
        let backtracks = path.backtracks();
        Iterate { path, backtracks }
    }

    pub fn describe_turn(&self, t: &Turn) -> String {
        let name = |d: Direction| match d.sign {
            Sign::Pos => self.graph.edge_id(d.edge).to_string(),
            Sign::Neg => format!("{}^-1", self.graph.edge_id(d.edge)),
        };
        format!(
            "{{{}, {}}} at `{}`",
            name(t.first),
            name(t.second),
            self.graph.vertex_name(self.direction_vertex(t.first))
        )
    }

    /// Runs the standing hypotheses of the pipeline.
    pub fn check_dynamics(&self) -> Result<()> {
        if !self.is_irreducible() {
            return Err(Error::Dynamics("map is not irreducible".into()));
        }
        if !self.is_expanding()? {
            return Err(Error::Dynamics("map is not expanding".into()));
        }
        let budget = 4 * self.num_edges() * self.num_edges() + 4;
        let tt = self.is_train_track(budget);
        if let Some(w) = tt.witness {
            let src = match w.source {
                TurnSource::Image { edge, position } => format!(
                    "taken in f({}) after step {}",
                    self.graph.edge_id(edge),
                    position
                ),
                TurnSource::ValenceTwo { vertex } => {
                    format!("at valence-2 vertex `{}`", self.graph.vertex_name(vertex))
                }
            };
            return Err(Error::Dynamics(format!(
                "not a train track map: turn {} ({}) degenerates under f^{}",
                self.describe_turn(&w.turn),
                src,
                w.power
            )));
        }
        Ok(())
    }
}

fn reaches_all(adj: &[BTreeSet<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// A periodic point named by the occurrences its orbit passes through:
/// start in `host`, follow occurrence `chain[0]` (1-based position in `f(host)`),
/// then `chain[1]` in the image of that edge, and so on back to `host`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicPointSpec {
    pub host: usize,
    pub chain: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitPoint {
    /// Original edge containing the point.
    pub edge: usize,
    /// Position along the edge in the uniform combinatorial parametrisation.
    pub position: BigRational,
    /// Vertex created for the point in the subdivided graph.
    pub vertex: usize,
    /// Index in the orbit of `f(point)`.
    pub next: usize,
    /// 1-based position in `f(edge)` of the occurrence containing `f(point)`.
    pub occurrence: usize,
    pub orientation_preserved: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PointOrbit {
    pub points: Vec<OrbitPoint>,
}

impl PointOrbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subdivision {
    pub map: GraphMap,
    pub orbit: PointOrbit,
    /// For each original edge, its pieces (edge indices of the new graph) in order.
    pub pieces: Vec<Vec<usize>>,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl GraphMap {
    /// Affine branch of `f` on occurrence `l` of `f(e)`: `x ↦ n·x − (l−1)` or `l − n·x`.
    fn branch(&self, e: usize, l: usize) -> (Step, BigRational, BigRational) {
        let n = self.edge_image[e].len() as i64;
        let step = self.edge_image[e].steps[l - 1];
        match step.sign {
            Sign::Pos => (step, rat(n, 1), rat(1 - l as i64, 1)),
            Sign::Neg => (step, rat(-n, 1), rat(l as i64, 1)),
        }
    }

    fn orbit_of(&self, spec: &PeriodicPointSpec) -> Result<Vec<(usize, BigRational, usize, bool)>> {
        if spec.host >= self.num_edges() {
            return Err(Error::Subdivision(format!("no edge #{}", spec.host)));
        }
        if spec.chain.is_empty() {
            return Err(Error::Subdivision("empty occurrence chain".into()));
        }
        let mut e = spec.host;
        let mut alpha = BigRational::one();
        let mut beta = BigRational::zero();
        let mut edges = Vec::new();
        for &l in &spec.chain {
            if l == 0 || l > self.edge_image[e].len() {
                return Err(Error::Subdivision(format!(
                    "position {l} out of range in f({})",
                    self.graph.edge_id(e)
                )));
            }
            edges.push(e);
            let (step, a, b) = self.branch(e, l);
            beta = &a * &beta + b;
            alpha = a * alpha;
            e = step.edge;
        }
        if e != spec.host {
            return Err(Error::Subdivision(format!(
                "chain from `{}` ends in `{}`: not periodic",
                self.graph.edge_id(spec.host),
                self.graph.edge_id(e)
            )));
        }
        if alpha.is_one() {
            return Err(Error::Subdivision("point is not periodic: branch is the identity".into()));
        }
        let mut x = &beta / (BigRational::one() - &alpha);
        let mut out = Vec::new();
        for (i, &l) in spec.chain.iter().enumerate() {
            let e = edges[i];
            if !(x.is_positive() && x < BigRational::one()) {
                return Err(Error::Subdivision(format!(
                    "orbit hits a vertex in `{}`",
                    self.graph.edge_id(e)
                )));
            }
            let n = self.edge_image[e].len() as i64;
            if x < rat(l as i64 - 1, n) || x > rat(l as i64, n) {
                return Err(Error::Subdivision("point is not periodic under the declared data".into()));
            }
            let (step, a, b) = self.branch(e, l);
            out.push((e, x.clone(), l, step.sign == Sign::Pos));
            x = a * x + b;
        }
        Ok(out)
    }

    /// Subdivides at a finite invariant set of periodic points.
    pub fn subdivide_at_invariant_set(&self, specs: &[PeriodicPointSpec]) -> Result<Subdivision> {
        // collect orbit points, deduplicated by location
        let mut pts: Vec<(usize, BigRational, usize, bool, usize)> = Vec::new();
        for spec in specs {
            let orbit = self.orbit_of(spec)?;
            if pts.iter().any(|p| p.0 == orbit[0].0 && p.1 == orbit[0].1) {
                continue;
            }
            let base = pts.len();
            let p = orbit.len();
            for (i, (e, x, l, pres)) in orbit.into_iter().enumerate() {
                pts.push((e, x, l, pres, base + (i + 1) % p));
            }
        }
        let g = &self.graph;
        let nv = g.num_vertices();
        // breakpoints per edge
        let mut breaks: Vec<Vec<(BigRational, usize)>> = vec![Vec::new(); g.num_edges()];
        for (i, p) in pts.iter().enumerate() {
            breaks[p.0].push((p.1.clone(), i));
        }
        for b in &mut breaks {
            b.sort();
        }
        let mut vertices: Vec<String> = g.vertices().to_vec();
        for p in &pts {
            vertices.push(format!("{}@{}", g.edge_id(p.0), p.1));
        }
        let mut new_edges: Vec<(String, String, String)> = Vec::new();
        let mut pieces: Vec<Vec<usize>> = Vec::new();
        // endpoints (as positions) of each piece
        let mut piece_span: Vec<(usize, BigRational, BigRational)> = Vec::new();
        for (e, edge) in g.edges().iter().enumerate() {
            let mut ids = Vec::new();
            let mut stops: Vec<(BigRational, usize)> = vec![(BigRational::zero(), edge.origin)];
            stops.extend(breaks[e].iter().map(|(x, i)| (x.clone(), nv + i)));
            stops.push((BigRational::one(), edge.terminus));
            let k = stops.len() - 1;
            for w in stops.windows(2) {
                let id = if k == 1 { edge.id.clone() } else { format!("{}.{}", edge.id, ids.len() + 1) };
                ids.push(new_edges.len());
                piece_span.push((e, w[0].0.clone(), w[1].0.clone()));
                new_edges.push((id, vertices[w[0].1].clone(), vertices[w[1].1].clone()));
            }
            pieces.push(ids);
        }
        let new_graph = Graph::new(&vertices, &new_edges)?;
        // locate piece by (edge, from, to) positions
        let traverse = |edge: usize, from: &BigRational, to: &BigRational| -> Result<Vec<Step>> {
            let ids = &pieces[edge];
            let find = |x: &BigRational| -> Option<usize> {
                if x.is_zero() {
                    return Some(0);
                }
                if x.is_one() {
                    return Some(ids.len());
                }
                breaks[edge].iter().position(|(y, _)| y == x).map(|k| k + 1)
            };
            let (Some(a), Some(b)) = (find(from), find(to)) else {
                return Err(Error::Subdivision("orbit not f-invariant".into()));
            };
            Ok(if a < b {
                (a..b).map(|k| Step::new(ids[k], Sign::Pos)).collect()
            } else {
                (b..a).rev().map(|k| Step::new(ids[k], Sign::Neg)).collect()
            })
        };
        let mut images = Vec::with_capacity(piece_span.len());
        for (e, xa, xb) in &piece_span {
            let path = &self.edge_image[*e];
            let n = path.len() as i64;
            let mut steps = Vec::new();
            for (k, step) in path.steps.iter().enumerate() {
                let lo = rat(k as i64, n);
                let hi = rat(k as i64 + 1, n);
                let a = if *xa > lo { xa.clone() } else { lo.clone() };
                let b = if *xb < hi { xb.clone() } else { hi };
                if a >= b {
                    continue;
                }
                let shift = rat(k as i64, 1);
                let la = a * rat(n, 1) - &shift;
                let lb = b * rat(n, 1) - &shift;
                let (from, to) = match step.sign {
                    Sign::Pos => (la, lb),
                    Sign::Neg => (BigRational::one() - la, BigRational::one() - lb),
                };
                steps.extend(traverse(step.edge, &from, &to)?);
            }
            images.push(EdgePath::new(steps));
        }
        let mut vimg: Vec<usize> = self.vertex_image.clone();
        for p in &pts {
            vimg.push(nv + p.4);
        }
        let map = GraphMap::new(new_graph, vimg, images)?;
        let orbit = PointOrbit {
            points: pts
                .into_iter()
                .enumerate()
                .map(|(i, (edge, position, occurrence, pres, next))| OrbitPoint {
                    edge,
                    position,
                    vertex: nv + i,
                    next,
                    occurrence,
                    orientation_preserved: pres,
                })
                .collect(),
        };
        Ok(Subdivision { map, orbit, pieces })
    }
}
