//! The McMullen polynomial `det(xI − A(t))`, computed either as a determinant
//! or as a signed sum over families of disjoint circuits.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graphcore::Subdivision;
use crate::laurent::LaurentPoly;
use crate::marking::{CohomologyClass, CoordinateSystem, MarkedAbelianization};
use crate::twisted::LabeledTransitionGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Det,
    Cycle,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Det => "det",
            Route::Cycle => "cycle",
        }
    }
}

/// `det(xI − A(t))` in internal coordinates (`x` is the last variable).
pub fn det_polynomial(l: &LabeledTransitionGraph) -> LaurentPoly {
    l.matrix().char_matrix(l.b() - 1).determinant()
}

/// `x^m + Σ_n (Σ_{disjoint y, |y| = n} (−1)^{#y} p_y) x^{m−n}` in internal coordinates.
pub fn cycle_polynomial(l: &LabeledTransitionGraph) -> LaurentPoly {
    let b = l.b();
    let m = l.num_nodes();
    // circuits sharing a node set are interchangeable in disjoint families
    let mut groups: BTreeMap<u64, (usize, usize, LaurentPoly)> = BTreeMap::new();
    for y in l.circuits() {
        let entry = groups
            .entry(y.node_mask())
            .or_insert_with(|| (y.nodes[0], y.len(), LaurentPoly::zero(b)));
        entry.2 = entry.2.try_sub(&l.circuit_monomial(&y)).unwrap();
    }
    let mut groups: Vec<(u64, usize, usize, LaurentPoly)> =
        groups.into_iter().map(|(mask, (least, len, w))| (mask, least, len, w)).collect();
    groups.sort_by_key(|g| (g.1, g.0));

    fn rec(
        groups: &[(u64, usize, usize, LaurentPoly)],
        start: usize,
        used: u64,
        len: usize,
        prod: &LaurentPoly,
        m: usize,
        b: usize,
        acc: &mut LaurentPoly,
    ) {
        let mut e = vec![0; b];
        e[b - 1] = (m - len) as i64;
        *acc = acc.try_add(&prod.shift(&e)).unwrap();
        for (i, (mask, _, k, w)) in groups.iter().enumerate().skip(start) {
            if used & mask == 0 {
                let next = prod.try_mul(w).unwrap();
                rec(groups, i + 1, used | mask, len + k, &next, m, b, acc);
            }
        }
    }

    let mut acc = LaurentPoly::zero(b);
    rec(&groups, 0, 0, 0, &LaurentPoly::one(b), m, b, &mut acc);
    acc
}

pub fn mcmullen(l: &LabeledTransitionGraph, coords: &CoordinateSystem, route: Route) -> LaurentPoly {
    let p = match route {
        Route::Det => det_polynomial(l),
        Route::Cycle => cycle_polynomial(l),
    };
    coords.poly_to_coords(&p)
}

pub fn mcmullen_det(l: &LabeledTransitionGraph, coords: &CoordinateSystem) -> LaurentPoly {
    mcmullen(l, coords, Route::Det)
}

pub fn mcmullen_cycle(l: &LabeledTransitionGraph, coords: &CoordinateSystem) -> LaurentPoly {
    mcmullen(l, coords, Route::Cycle)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubdivisionCheck {
    pub original: LaurentPoly,
    pub subdivided: LaurentPoly,
    /// `det(xI − B(t))`.
    pub factor: LaurentPoly,
    pub holds: bool,
}

/// Marks the subdivided map compatibly with `m`: same root, and a tree made of
/// the pieces of tree edges plus all but the last piece of every other edge.
pub fn mark_subdivision(m: &MarkedAbelianization, sub: &Subdivision) -> Result<MarkedAbelianization> {
    let tree = m.tree_edges();
    let mut edges = Vec::new();
    for (e, pieces) in sub.pieces.iter().enumerate() {
        if tree.contains(&e) {
            edges.extend(pieces.iter().copied());
        } else {
            edges.extend(pieces[..pieces.len() - 1].iter().copied());
        }
    }
    MarkedAbelianization::new(&sub.map, Some(m.root()), Some(&edges))
}

/// Computes both sides of `𝔪′ = 𝔪 · det(xI − B(t))` in the coordinates given by `chars`.
pub fn check_subdivision(
    m: &MarkedAbelianization,
    sub: &Subdivision,
    chars: &[CohomologyClass],
) -> Result<SubdivisionCheck> {
    let coords = m.make_coordinates(chars)?;
    let l = LabeledTransitionGraph::build(m);
    let original = mcmullen_det(&l, &coords);
    let b = l.subdivision_factor(&sub.orbit)?;
    let factor = coords.poly_to_coords(&b.char_matrix(l.b() - 1).determinant());

    let m2 = mark_subdivision(m, sub)?;
    if m2.b() != m.b() {
        return Err(Error::Subdivision(format!("rank changed from {} to {}", m.b(), m2.b())));
    }
    let lifted: Vec<CohomologyClass> = chars.iter().map(|c| c.lifted(m, sub, &m2)).collect();
    let coords2 = m2.make_coordinates(&lifted)?;
    let subdivided = mcmullen_det(&LabeledTransitionGraph::build(&m2), &coords2);
    let holds = subdivided.equal_up_to_units(&original.try_mul(&factor)?);
    Ok(SubdivisionCheck { original, subdivided, factor, holds })
}
