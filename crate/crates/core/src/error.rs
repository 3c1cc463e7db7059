use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One problem found while validating a graph map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    DuplicateVertex(String),
    DuplicateEdge(String),
    UnknownVertex { edge: String, vertex: String },
    DanglingEdge { context: String, edge: String },
    ValenceOne(String),
    MissingVertexImage(String),
    MissingEdgeImage(String),
    EmptyImage(String),
    BrokenPath { edge: String, step: usize },
    EndpointMismatch { edge: String, detail: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            DuplicateVertex(v) => write!(f, "duplicate vertex `{v}`"),
            DuplicateEdge(e) => write!(f, "duplicate edge id `{e}`"),
            UnknownVertex { edge, vertex } => {
                write!(f, "edge `{edge}` names unknown vertex `{vertex}`")
            }
            DanglingEdge { context, edge } => {
                write!(f, "dangling edge id `{edge}` in {context}")
            }
            ValenceOne(v) => write!(f, "valence-1 vertex `{v}`"),
            MissingVertexImage(v) => write!(f, "no image given for vertex `{v}`"),
            MissingEdgeImage(e) => write!(f, "no image given for edge `{e}`"),
            EmptyImage(e) => write!(f, "empty image for edge `{e}`"),
            BrokenPath { edge, step } => {
                write!(f, "image of `{edge}` is not an edge path at step {step}")
            }
            EndpointMismatch { edge, detail } => {
                write!(f, "endpoint mismatch in image of `{edge}`: {detail}")
            }
        }
    }
}

/// Every issue found by a validation pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph map: {0}")]
    Validation(ValidationReport),
    #[error("{0}")]
    Dynamics(String),
    #[error("marking: {0}")]
    Marking(String),
    #[error("cohomology class `{name}`: {detail}")]
    Class { name: String, detail: String },
    #[error("coordinates: {0}")]
    Coordinates(String),
    #[error("exponent length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("{0}")]
    Evaluation(String),
    #[error("cone: {0}")]
    Cone(String),
    #[error("subdivision: {0}")]
    Subdivision(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("identity check failed: {0}")]
    IdentityCheck(String),
    #[error("endomorphism: {0}")]
    Endo(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
