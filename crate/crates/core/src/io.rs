//! JSON formats for graph maps, classes, coordinates, polynomials, cones and endomorphisms.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::cones::OpenCone;
use crate::error::{Error, Result, ValidationIssue, ValidationReport};
use crate::graphcore::{EdgePath, Graph, GraphMap, Sign, Step};
use crate::laurent::LaurentPoly;
use crate::marking::CohomologyClass;
use crate::stallings::FreeGroupEndo;

pub const SCHEMA: &str = "trainpoly/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub id: String,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepJson {
    pub edge: String,
    pub sign: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMapJson {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeJson>,
    pub vertex_images: BTreeMap<String, String>,
    pub edge_images: BTreeMap<String, Vec<StepJson>>,
}

impl GraphMapJson {
    pub fn from_map(f: &GraphMap) -> GraphMapJson {
        let g = f.graph();
        GraphMapJson {
            vertices: g.vertices().to_vec(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeJson {
                    id: e.id.clone(),
                    from: g.vertex_name(e.origin).into(),
                    to: g.vertex_name(e.terminus).into(),
                })
                .collect(),
            vertex_images: (0..g.num_vertices())
                .map(|v| (g.vertex_name(v).into(), g.vertex_name(f.vertex_image(v)).into()))
                .collect(),
            edge_images: (0..g.num_edges())
                .map(|e| {
                    let steps = f
                        .edge_image(e)
                        .steps
                        .iter()
                        .map(|s| StepJson { edge: g.edge_id(s.edge).into(), sign: s.sign.as_i64() })
                        .collect();
                    (g.edge_id(e).into(), steps)
                })
                .collect(),
        }
    }

    pub fn to_map(&self) -> Result<GraphMap> {
        let edges: Vec<(String, String, String)> =
            self.edges.iter().map(|e| (e.id.clone(), e.from.clone(), e.to.clone())).collect();
        let graph = Graph::new(&self.vertices, &edges)?;
        let mut issues = Vec::new();
        let mut vimg = vec![usize::MAX; graph.num_vertices()];
        for (v, w) in &self.vertex_images {
            match (graph.vertex_index(v), graph.vertex_index(w)) {
                (Some(i), Some(j)) => vimg[i] = j,
                _ => issues.push(ValidationIssue::MissingVertexImage(v.clone())),
            }
        }
        for (v, slot) in vimg.iter().enumerate() {
            if *slot == usize::MAX && !issues.iter().any(|i| matches!(i, ValidationIssue::MissingVertexImage(_))) {
                issues.push(ValidationIssue::MissingVertexImage(graph.vertex_name(v).into()));
            }
        }
        let mut eimg: Vec<Option<EdgePath>> = vec![None; graph.num_edges()];
        for (id, steps) in &self.edge_images {
            let Some(e) = graph.edge_index(id) else {
                issues.push(ValidationIssue::DanglingEdge { context: "edge images".into(), edge: id.clone() });
                continue;
            };
            let mut path = Vec::with_capacity(steps.len());
            for s in steps {
                let Some(k) = graph.edge_index(&s.edge) else {
                    issues.push(ValidationIssue::DanglingEdge {
                        context: format!("image of `{id}`"),
                        edge: s.edge.clone(),
                    });
                    continue;
                };
                let Some(sign) = Sign::from_i64(s.sign) else {
                    return Err(Error::Parse(format!("sign {} in image of `{id}` is not ±1", s.sign)));
                };
                path.push(Step::new(k, sign));
            }
            eimg[e] = Some(EdgePath::new(path));
        }
        for (e, p) in eimg.iter().enumerate() {
            if p.is_none() {
                issues.push(ValidationIssue::MissingEdgeImage(graph.edge_id(e).into()));
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(ValidationReport { issues }));
        }
        GraphMap::new(graph, vimg, eimg.into_iter().map(Option::unwrap).collect())
    }
}

pub fn parse_graph_map(text: &str) -> Result<GraphMap> {
    serde_json::from_str::<GraphMapJson>(text)?.to_map()
}

pub fn graph_map_to_json(f: &GraphMap) -> serde_json::Value {
    serde_json::to_value(GraphMapJson::from_map(f)).expect("serializable")
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d == BigInt::from(0) {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Rationals are written `p/q`, or as plain integers.
pub fn format_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassJson {
    pub name: String,
    pub edge_values: BTreeMap<String, String>,
    pub stable_value: String,
}

impl ClassJson {
    pub fn from_class(c: &CohomologyClass, f: &GraphMap) -> ClassJson {
        let g = f.graph();
        ClassJson {
            name: c.label(),
            edge_values: c
                .edge_values
                .iter()
                .enumerate()
                .map(|(e, v)| (g.edge_id(e).to_string(), format_rational(v)))
                .collect(),
            stable_value: format_rational(&c.stable_value),
        }
    }

    /// Edges without a value get 0.
    pub fn to_class(&self, f: &GraphMap) -> Result<CohomologyClass> {
        let g = f.graph();
        let mut values = vec![BigRational::from_integer(0.into()); g.num_edges()];
        for (id, v) in &self.edge_values {
            let e = g.edge_index(id).ok_or_else(|| Error::Class {
                name: self.name.clone(),
                detail: format!("unknown edge `{id}`"),
            })?;
            values[e] = parse_rational(v)?;
        }
        Ok(CohomologyClass::new(Some(&self.name), values, parse_rational(&self.stable_value)?))
    }
}

pub fn parse_classes(text: &str, f: &GraphMap) -> Result<Vec<CohomologyClass>> {
    let raw: Vec<ClassJson> = serde_json::from_str(text)?;
    raw.iter().map(|c| c.to_class(f)).collect()
}

/// Which named classes serve as coordinates, and what to call the coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordsJson {
    pub characters: Vec<String>,
    #[serde(default)]
    pub variables: Option<Vec<String>>,
}

pub fn parse_coords(text: &str) -> Result<CoordsJson> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exponents: Vec<i64>,
    pub coefficient: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub variables: Vec<String>,
    pub terms: Vec<TermJson>,
}

impl PolynomialJson {
    /// Terms in decreasing exponent order.
    pub fn from_poly(p: &LaurentPoly, names: &[String]) -> PolynomialJson {
        PolynomialJson {
            variables: names.to_vec(),
            terms: p
                .terms()
                .rev()
                .map(|(e, c)| TermJson { exponents: e.clone(), coefficient: c.to_string() })
                .collect(),
        }
    }

    pub fn to_poly(&self) -> Result<LaurentPoly> {
        let n = self.variables.len();
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if t.exponents.len() != n {
                return Err(Error::LengthMismatch(t.exponents.len(), n));
            }
            let c: BigInt =
                t.coefficient.parse().map_err(|_| Error::Parse(format!("bad coefficient `{}`", t.coefficient)))?;
            terms.push((t.exponents.clone(), c));
        }
        Ok(LaurentPoly::from_terms(n, terms))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeJson {
    pub coordinates: Vec<String>,
    pub inequalities: Vec<Vec<i64>>,
    pub strict: bool,
    pub minimal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<Vec<[i64; 2]>>,
}

impl ConeJson {
    pub fn from_cone(c: &OpenCone) -> ConeJson {
        ConeJson {
            coordinates: c.names().to_vec(),
            inequalities: c.inequalities().to_vec(),
            strict: true,
            minimal: c.is_minimal(),
            rays: c.rays_2d(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndoJson {
    pub rank: usize,
    pub images: Vec<Vec<String>>,
}

fn parse_letter(s: &str, rank: usize) -> Result<i32> {
    let bad = || Error::Parse(format!("`{s}` is not a generator x1..x{rank} (optionally prefixed by -)"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let k: i32 = body.strip_prefix('x').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if k < 1 || k as usize > rank {
        return Err(bad());
    }
    Ok(if neg { -k } else { k })
}

impl EndoJson {
    pub fn from_endo(e: &FreeGroupEndo) -> EndoJson {
        EndoJson {
            rank: e.rank(),
            images: e
                .images()
                .iter()
                .map(|w| w.iter().map(|&x| if x > 0 { format!("x{x}") } else { format!("-x{}", -x) }).collect())
                .collect(),
        }
    }

    pub fn to_endo(&self) -> Result<FreeGroupEndo> {
        let images = self
            .images
            .iter()
            .map(|w| w.iter().map(|s| parse_letter(s, self.rank)).collect::<Result<Vec<i32>>>())
            .collect::<Result<Vec<_>>>()?;
        FreeGroupEndo::new(self.rank, images)
    }
}

pub fn parse_endo(text: &str) -> Result<FreeGroupEndo> {
    serde_json::from_str::<EndoJson>(text)?.to_endo()
}
