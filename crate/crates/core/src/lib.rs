//! Train track maps, their labeled transition graphs, and the invariants of
//! the free-by-cyclic group they define: the McMullen polynomial, the cone of
//! cross sections, specializations, stretch factors and the entropy function.
//!
//! The pipeline runs
//! [`GraphMap`] → [`MarkedAbelianization`] → [`LabeledTransitionGraph`] →
//! polynomial / cones / spectral data. Free-group endomorphisms are handled
//! separately by [`stallings`].

pub mod cones;
pub mod error;
pub mod fixtures;
pub mod graphcore;
pub mod io;
pub mod laurent;
pub mod marking;
pub mod mcpoly;
pub mod report;
pub mod spectral;
pub mod stallings;
pub mod twisted;

pub use cones::OpenCone;
pub use error::{Error, Result};
pub use graphcore::{EdgePath, Graph, GraphMap, IntMatrix, Sign, Step};
pub use laurent::{LaurentPoly, RingMatrix};
pub use marking::{CohomologyClass, CoordinateSystem, MarkedAbelianization};
pub use stallings::{FoldedGraph, FreeGroupEndo};
pub use twisted::{Circuit, LabeledTransitionGraph, Occurrence};
