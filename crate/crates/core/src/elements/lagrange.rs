//! Lagrange elements on equispaced nodes.

use super::polynomial::{monomial_count, monomial_exponents};
use super::{Family, Functional, ReferenceElement};

/// Node coordinates with the node indices on each vertex, each edge and the
/// interior.
type NodeLayout = (Vec<[f64; 2]>, [Vec<usize>; 3], [Vec<usize>; 3], Vec<usize>);

/// Equispaced nodes grouped by topological entity: vertices, edges (each in
/// local edge direction), interior. Degree 0 places one node at the centroid.
pub(super) fn lagrange_nodes(k: usize) -> NodeLayout {
    if k == 0 {
        return (
            vec![[1.0 / 3.0, 1.0 / 3.0]],
            Default::default(),
            Default::default(),
            vec![0],
        );
    }
    let kf = k as f64;
    let mut nodes = Vec::new();
    let mut vertex: [Vec<usize>; 3] = Default::default();
    let mut edge: [Vec<usize>; 3] = Default::default();
    let mut interior = Vec::new();
    let mut push = |p: [f64; 2]| {
        nodes.push(p);
        nodes.len() - 1
    };
    vertex[0].push(push([0.0, 0.0]));
    vertex[1].push(push([1.0, 0.0]));
    vertex[2].push(push([0.0, 1.0]));
    // edge 0: (1,0) -> (0,1)
    for j in 1..k {
        edge[0].push(push([(k - j) as f64 / kf, j as f64 / kf]));
    }
    // edge 1: (0,1) -> (0,0)
    for j in (1..k).rev() {
        edge[1].push(push([0.0, j as f64 / kf]));
    }
    // edge 2: (0,0) -> (1,0)
    for i in 1..k {
        edge[2].push(push([i as f64 / kf, 0.0]));
    }
    for j in 1..k {
        for i in 1..k {
            if i + j < k {
                interior.push(push([i as f64 / kf, j as f64 / kf]));
            }
        }
    }
    (nodes, vertex, edge, interior)
}

pub(super) fn lagrange(family: Family, k: usize) -> ReferenceElement {
    let nmono = monomial_count(k);
    let span = (0..nmono)
        .map(|m| {
            let mut v = vec![0.0; nmono];
            v[m] = 1.0;
            v
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(monomial_exponents(k).len(), nmono);
    let (nodes, vertex, edge, interior) = lagrange_nodes(k);
    let functionals = nodes
        .iter()
        .map(|&p| Functional {
            points: vec![p],
            weights: vec![[1.0, 0.0]],
        })
        .collect();
    if family == Family::DG {
        let all = (0..nodes.len()).collect();
        ReferenceElement::from_span(
            family,
            k,
            k,
            1,
            span,
            functionals,
            Default::default(),
            Default::default(),
            all,
        )
    } else {
        ReferenceElement::from_span(family, k, k, 1, span, functionals, vertex, edge, interior)
    }
}
