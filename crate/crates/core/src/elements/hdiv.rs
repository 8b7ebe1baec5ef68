//! Raviart-Thomas and Brezzi-Douglas-Marini elements.
//!
//! Facet dofs are normal moments `∫_e v·n̂ L_k(t) ds` against shifted
//! Legendre polynomials in the local edge parameter; interior dofs are
//! moments against `(P_{s-1})²` (RT) or the lowest Nédélec-type space
//! `(P_{s-2})² ⊕ (-y, x) P̃_{s-2}` (BDM).

use super::polynomial::{monomial_count, monomial_exponents, monomial_index, shifted_legendre};
use super::{reference_edge_normal, reference_edge_point, Family, Functional, ReferenceElement};
use crate::quadrature::{edge_rule, triangle_rule};

fn vector_monomials(out: &mut Vec<Vec<f64>>, span_degree: usize, up_to: usize) {
    let nmono = monomial_count(span_degree);
    for c in 0..2 {
        for (a, b) in monomial_exponents(up_to) {
            let mut v = vec![0.0; 2 * nmono];
            v[c * nmono + monomial_index(a, b)] = 1.0;
            out.push(v);
        }
    }
}

fn facet_functionals(s: usize) -> (Vec<Functional>, [Vec<usize>; 3]) {
    let rule = edge_rule(2 * s + 2).expect("edge rule");
    let mut functionals = Vec::new();
    let mut facet_dofs: [Vec<usize>; 3] = Default::default();
    for (e, dofs) in facet_dofs.iter_mut().enumerate() {
        let (n, len) = reference_edge_normal(e);
        for k in 0..=s {
            let points = rule.points.iter().map(|&t| reference_edge_point(e, t)).collect();
            let weights = rule
                .iter()
                .map(|(t, w)| {
                    let s = w * len * shifted_legendre(k, t);
                    [s * n[0], s * n[1]]
                })
                .collect();
            dofs.push(functionals.len());
            functionals.push(Functional { points, weights });
        }
    }
    (functionals, facet_dofs)
}

fn moment_functional(degree: usize, q: impl Fn([f64; 2]) -> [f64; 2]) -> Functional {
    let rule = triangle_rule(degree).expect("triangle rule");
    Functional {
        points: rule.points.clone(),
        weights: rule
            .iter()
            .map(|(p, w)| {
                let v = q(*p);
                [w * v[0], w * v[1]]
            })
            .collect(),
    }
}

fn pow2(p: [f64; 2], a: usize, b: usize) -> f64 {
    p[0].powi(a as i32) * p[1].powi(b as i32)
}

pub(super) fn raviart_thomas(s: usize) -> ReferenceElement {
    let degree = s + 1;
    let nmono = monomial_count(degree);
    let mut span = Vec::new();
    vector_monomials(&mut span, degree, s);
    for b in 0..=s {
        let a = s - b;
        let mut v = vec![0.0; 2 * nmono];
        v[monomial_index(a + 1, b)] = 1.0;
        v[nmono + monomial_index(a, b + 1)] = 1.0;
        span.push(v);
    }

    let (mut functionals, facet_dofs) = facet_functionals(s);
    let mut interior = Vec::new();
    if s >= 1 {
        for c in 0..2 {
            for (a, b) in monomial_exponents(s - 1) {
                interior.push(functionals.len());
                functionals.push(moment_functional(2 * s + 2, |p| {
                    let m = pow2(p, a, b);
                    if c == 0 {
                        [m, 0.0]
                    } else {
                        [0.0, m]
                    }
                }));
            }
        }
    }
    ReferenceElement::from_span(
        Family::RT,
        s,
        degree,
        2,
        span,
        functionals,
        Default::default(),
        facet_dofs,
        interior,
    )
}

pub(super) fn bdm(s: usize) -> ReferenceElement {
    let mut span = Vec::new();
    vector_monomials(&mut span, s, s);

    let (mut functionals, facet_dofs) = facet_functionals(s);
    let mut interior = Vec::new();
    if s >= 2 {
        for c in 0..2 {
            for (a, b) in monomial_exponents(s - 2) {
                interior.push(functionals.len());
                functionals.push(moment_functional(2 * s + 2, |p| {
                    let m = pow2(p, a, b);
                    if c == 0 {
                        [m, 0.0]
                    } else {
                        [0.0, m]
                    }
                }));
            }
        }
        let k = s - 2;
        for b in 0..=k {
            let a = k - b;
            interior.push(functionals.len());
            functionals.push(moment_functional(2 * s + 2, |p| {
                let m = pow2(p, a, b);
                [-p[1] * m, p[0] * m]
            }));
        }
    }
    ReferenceElement::from_span(
        Family::BDM,
        s,
        s,
        2,
        span,
        functionals,
        Default::default(),
        facet_dofs,
        interior,
    )
}
