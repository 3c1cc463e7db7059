//! End-to-end analysis of one train track map.

use std::fmt;

use crate::cones::{cones_equal, fried_cone, mcmullen_cone, ConeComparison, OpenCone};
use crate::error::{Error, Result};
use crate::graphcore::GraphMap;
use crate::laurent::LaurentPoly;
use crate::marking::{CohomologyClass, CoordinateSystem, MarkedAbelianization};
use crate::mcpoly::{cycle_polynomial, det_polynomial};
use crate::twisted::LabeledTransitionGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Dynamics,
    Mark,
    Labels,
    Polynomial,
    Cones,
    Spectral,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Dynamics => "dynamics",
            Stage::Mark => "mark",
            Stage::Labels => "labels",
            Stage::Polynomial => "polynomial",
            Stage::Cones => "cones",
            Stage::Spectral => "spectral",
        }
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub root: Option<usize>,
    pub tree: Option<Vec<usize>>,
    /// Classes whose values give the coordinates; the standard ones when absent.
    pub characters: Option<Vec<CohomologyClass>>,
    pub variables: Option<Vec<String>>,
    pub check_routes: bool,
    /// Shift the label of this arc by one in the first `H₀` coordinate, for the determinant only.
    pub perturb_arc: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct OrbitRecord {
    /// Edge ids along the circuit.
    pub edges: Vec<String>,
    pub class: Vec<i64>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub marked: MarkedAbelianization,
    pub labeled: LabeledTransitionGraph,
    pub coords: CoordinateSystem,
    pub polynomial: LaurentPoly,
    pub cycle_polynomial: Option<LaurentPoly>,
    pub orbits: Vec<OrbitRecord>,
    pub mcmullen_cone: OpenCone,
    pub fried_cone: OpenCone,
    pub comparison: ConeComparison,
}

impl Report {
    pub fn routes_agree(&self) -> Option<bool> {
        self.cycle_polynomial.as_ref().map(|c| *c == self.polynomial)
    }
}

/// Validate, mark, label, compute the polynomial and both cones, and compare them.
/// A cone mismatch is an [`Error::IdentityCheck`] at [`Stage::Cones`].
pub fn analyze(f: &GraphMap, opts: &Options) -> std::result::Result<Report, StageError> {
    f.validate().map_err(Error::Validation).at(Stage::Validate)?;
    f.check_dynamics().at(Stage::Dynamics)?;
    let marked = MarkedAbelianization::new(f, opts.root, opts.tree.as_deref()).at(Stage::Mark)?;
    let chars = opts.characters.clone().unwrap_or_else(|| marked.standard_characters());
    let mut coords = marked.make_coordinates(&chars).at(Stage::Mark)?;
    if let Some(names) = &opts.variables {
        coords = CoordinateSystem::new(names.clone(), coords.matrix().to_vec()).at(Stage::Mark)?;
    }
    let labeled = LabeledTransitionGraph::build(&marked);

    let det_graph = match opts.perturb_arc {
        Some(k) if k >= labeled.arcs().len() => {
            return Err(Error::Parse(format!("no arc {k}; there are {}", labeled.arcs().len()))).at(Stage::Labels)
        }
        Some(k) => {
            let mut shift = vec![0; labeled.b() - 1];
            if let Some(s) = shift.first_mut() {
                *s = 1;
            }
            labeled.with_label_shift(k, &shift)
        }
        None => labeled.clone(),
    };
    let polynomial = coords.poly_to_coords(&det_polynomial(&det_graph));
    if polynomial.is_zero() {
        return Err(Error::ZeroPolynomial).at(Stage::Polynomial);
    }
    let cycle = opts.check_routes.then(|| coords.poly_to_coords(&cycle_polynomial(&labeled)));

    let g = f.graph();
    let orbits: Vec<OrbitRecord> = labeled
        .circuits()
        .iter()
        .map(|y| OrbitRecord {
            edges: y.nodes.iter().map(|&e| g.edge_id(e).to_string()).collect(),
            class: coords.apply(&labeled.orbit_class(y)),
        })
        .collect();
    let names = coords.names().to_vec();
    let grading = coords.fibration_class();
    let mc = mcmullen_cone(&polynomial, Some(&grading), Some(names.clone())).at(Stage::Cones)?;
    let classes: Vec<Vec<i64>> = orbits.iter().map(|o| o.class.clone()).collect();
    let fc = fried_cone(&classes, coords.dim(), Some(names)).at(Stage::Cones)?;
    let comparison = cones_equal(&mc, &fc).at(Stage::Cones)?;
    if !comparison.equal {
        let detail = match comparison.witness() {
            Some(w) => format!("cones differ; witness {}", w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
            None => "cones differ".to_string(),
        };
        return Err(Error::IdentityCheck(detail)).at(Stage::Cones);
    }
    if let Some(c) = &cycle {
        if *c != polynomial {
            return Err(Error::IdentityCheck("determinant and cycle routes disagree".into())).at(Stage::Polynomial);
        }
    }
    Ok(Report {
        marked,
        labeled,
        coords,
        polynomial,
        cycle_polynomial: cycle,
        orbits,
        mcmullen_cone: mc.minimize(),
        fried_cone: fc.minimize(),
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn running_opts() -> Options {
        let m = fixtures::running_marked();
        Options {
            root: Some(m.root()),
            tree: Some(m.tree_edges()),
            characters: Some(fixtures::running_characters()),
            variables: Some(vec!["t".into(), "x".into()]),
            check_routes: true,
            perturb_arc: None,
        }
    }

    #[test]
    fn running_report() {
        let r = analyze(&fixtures::running_example(), &running_opts()).unwrap();
        assert_eq!(r.polynomial, fixtures::running_polynomial());
        assert_eq!(r.routes_agree(), Some(true));
        assert_eq!(r.orbits.len(), 7);
        assert_eq!(r.mcmullen_cone.inequalities(), &[vec![-2, 1], vec![0, 1]]);
        assert_eq!(r.fried_cone.inequalities(), r.mcmullen_cone.inequalities());
    }

    #[test]
    fn default_characters() {
        let r = analyze(&fixtures::running_example(), &Options::default()).unwrap();
        assert_eq!(r.coords.dim(), 2);
        assert!(r.comparison.equal);
        assert!(r.polynomial.equal_up_to_units(&r.coords.poly_to_coords(&det_polynomial(&r.labeled))));
    }

    #[test]
    fn perturbed_arc_breaks_identity() {
        let mut opts = running_opts();
        opts.check_routes = false;
        let mut failed = 0;
        for k in 0..10 {
            opts.perturb_arc = Some(k);
            if let Err(e) = analyze(&fixtures::running_example(), &opts) {
                assert!(matches!(e.error, Error::IdentityCheck(_)), "{e}");
                assert_eq!(e.stage, Stage::Cones);
                failed += 1;
            }
        }
        assert!(failed > 0);
        opts.perturb_arc = Some(99);
        assert_eq!(analyze(&fixtures::running_example(), &opts).unwrap_err().stage, Stage::Labels);
    }

    #[test]
    fn dynamics_stage() {
        let f = GraphMap::from_words(&["v"], &[("a", "v", "v"), ("b", "v", "v")], &[("v", "v")], &[("a", "b"), ("b", "a")])
            .unwrap();
        let e = analyze(&f, &Options::default()).unwrap_err();
        assert_eq!(e.stage, Stage::Dynamics);
        assert!(e.to_string().starts_with("[dynamics]"));
    }
}
