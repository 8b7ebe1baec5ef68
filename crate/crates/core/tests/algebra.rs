use std::sync::Arc;

use eulerfem::algebra::{
    build_discrete_current, commutator, ep_identity_residual, hat, kelvin_residual, operator_scalar_order,
    AdvectionOperator, LoopSpec, OperatorFlux, ScalarSpace, StreamSampler,
};
use eulerfem::elements::Family;
use eulerfem::forms::FluxMode;
use eulerfem::harness_io::{kelvin_check, torus_loops};
use eulerfem::mesh::Mesh;
use eulerfem::solver::SolverConfig;
use eulerfem::spaces::{build_space, interpolate};
use eulerfem::Error;

fn mesh(n: usize, periodic: bool) -> Arc<Mesh> {
    Arc::new(Mesh::structured(n, periodic).unwrap())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn hat_recovers_the_advecting_field() {
    for periodic in [false, true] {
        for (family, order) in [(Family::BDM, 1), (Family::BDM, 2), (Family::RT, 1)] {
            let m = mesh(4, periodic);
            let vs = build_space(&m, family, order).unwrap();
            let scalars = ScalarSpace::build(&m, operator_scalar_order(&vs)).unwrap();
            let beta = StreamSampler::new(&vs, 9).unwrap().sample().unwrap();
            let comps = scalars.components(&beta);
            for flux in [OperatorFlux::Centred, OperatorFlux::Upwind] {
                let op = AdvectionOperator::new(&beta, &scalars, flux).unwrap();
                let h = hat(&op).unwrap();
                for i in 0..2 {
                    assert!(max_diff(&h[i], &comps[i]) < 1e-11, "{family}{order} periodic={periodic}");
                }
            }
        }
    }
}

#[test]
fn hat_needs_linear_scalars() {
    let m = mesh(3, false);
    let vs = build_space(&m, Family::RT, 0).unwrap();
    let beta = interpolate(&vs, |_| [1.0, 0.0]);
    let scalars = ScalarSpace::build(&m, 0).unwrap();
    let op = AdvectionOperator::centred(&beta, &scalars).unwrap();
    assert_eq!(hat(&op).unwrap_err(), Error::HatNeedsLinearScalars);
}

#[test]
fn commutator_is_antisymmetric_and_annihilates_constants() {
    let m = mesh(4, true);
    let vs = build_space(&m, Family::BDM, 1).unwrap();
    let scalars = ScalarSpace::build(&m, 1).unwrap();
    let mut sampler = StreamSampler::new(&vs, 4).unwrap();
    let (u, v) = (sampler.sample().unwrap(), sampler.sample().unwrap());
    let xu = AdvectionOperator::centred(&u, &scalars).unwrap();
    let xv = AdvectionOperator::centred(&v, &scalars).unwrap();
    let uv = commutator(&xu, &xv).unwrap();
    let vu = commutator(&xv, &xu).unwrap();
    let (h1, h2) = (uv.hat().unwrap(), vu.hat().unwrap());
    for i in 0..2 {
        let sum: Vec<f64> = h1[i].iter().zip(&h2[i]).map(|(a, b)| a + b).collect();
        assert!(sum.iter().all(|x| x.abs() < 1e-10));
    }
    let ones = scalars.constant(1.0);
    assert!(uv.apply(&ones).unwrap().iter().all(|x| x.abs() < 1e-10));
    let w = scalars.components(&u);
    let pair = uv.pair_hat(&w).unwrap();
    let direct: f64 = (0..2).map(|i| scalars.inner(&w[i], &h1[i])).sum();
    assert!((pair - direct).abs() < 1e-10 * direct.abs().max(1.0));
}

#[test]
fn commutator_needs_a_shared_scalar_space() {
    let m = mesh(3, true);
    let vs = build_space(&m, Family::BDM, 1).unwrap();
    let u = StreamSampler::new(&vs, 1).unwrap().sample().unwrap();
    let a = AdvectionOperator::centred(&u, &ScalarSpace::build(&m, 1).unwrap()).unwrap();
    let b = AdvectionOperator::centred(&u, &ScalarSpace::build(&m, 1).unwrap()).unwrap();
    assert!(matches!(commutator(&a, &b), Err(Error::SpaceMismatch(_))));
}

#[test]
fn euler_poincare_identity_holds_in_both_modes() {
    for periodic in [false, true] {
        let m = mesh(4, periodic);
        let vs = build_space(&m, Family::BDM, 2).unwrap();
        let scalars = ScalarSpace::build(&m, operator_scalar_order(&vs)).unwrap();
        let mut sampler = StreamSampler::new(&vs, 12).unwrap();
        let (u, v) = (sampler.sample().unwrap(), sampler.sample().unwrap());
        for mode in [FluxMode::Centred, FluxMode::Upwind] {
            let r = ep_identity_residual(&u, &v, &scalars, mode).unwrap();
            assert!(r.relative < 1e-9, "{mode} periodic={periodic}: {}", r.relative);
        }
    }
}

#[test]
fn row_and_column_currents_are_unit_div_free_loops() {
    let m = mesh(6, true);
    for spec in [LoopSpec::Row(0), LoopSpec::Row(5), LoopSpec::Column(2)] {
        let c = build_discrete_current(&m, &spec).unwrap();
        assert_eq!(c.cells.len(), 12);
        assert_eq!(c.facets.len(), 12);
        assert!(c.field.div_norm().unwrap() < 1e-12, "{spec:?}");
        assert!(c.field.max_normal_jump().unwrap() < 1e-12);
        let nonzero = c.field.coeffs().iter().filter(|x| **x != 0.0).count();
        assert_eq!(nonzero, 12);
        assert!(c.field.coeffs().iter().all(|x| *x == 0.0 || x.abs() == 1.0));
        let bdm = build_space(&m, Family::BDM, 1).unwrap();
        assert!(c.embed(&bdm).unwrap().div_norm().unwrap() < 1e-12);
    }
}

#[test]
fn explicit_cell_loop_around_a_vertex() {
    // the six cells around the interior vertex (1, 1) of a 3×3 mesh
    let m = mesh(3, false);
    let n = 3;
    let id = |i: usize, j: usize, up: usize| 2 * (j * n + i) + up;
    let cells = vec![id(0, 0, 0), id(1, 0, 1), id(1, 1, 0), id(1, 1, 1), id(0, 1, 0), id(0, 0, 1)];
    let c = build_discrete_current(&m, &LoopSpec::Cells(cells)).unwrap();
    assert!(c.field.div_norm().unwrap() < 1e-12);
}

#[test]
fn broken_loops_are_rejected() {
    let m = mesh(4, true);
    let open = vec![0, 1, 3, 2];
    let bad = [
        LoopSpec::Row(4),
        LoopSpec::Column(7),
        LoopSpec::Cells(vec![0, 1]),
        LoopSpec::Cells(vec![0, 1, 0]),
        LoopSpec::Cells(open),
    ];
    for spec in bad {
        assert!(matches!(build_discrete_current(&m, &spec), Err(Error::InvalidLoop(_))), "{spec:?}");
    }
    let walled = mesh(4, false);
    assert!(build_discrete_current(&walled, &LoopSpec::Row(1)).is_err());
}

#[test]
fn kelvin_residual_vanishes_for_torus_currents() {
    let solver = SolverConfig { dt: 0.04, t_end: 0.2, ..Default::default() };
    for mode in [FluxMode::Centred, FluxMode::Upwind] {
        let worst = kelvin_check(6, Family::BDM, 1, mode, &solver, std::f64::consts::PI / 15.0, 0.05, &torus_loops(6))
            .unwrap();
        assert_eq!(worst.len(), 3);
        for (k, w) in worst.iter().enumerate() {
            assert!(*w < 1e-8, "{mode} current {k}: {w:e}");
        }
    }
}

#[test]
fn kelvin_residual_rejects_divergent_currents() {
    let m = mesh(3, true);
    let vs = build_space(&m, Family::BDM, 1).unwrap();
    let scalars = ScalarSpace::build(&m, 1).unwrap();
    let u = StreamSampler::new(&vs, 3).unwrap().sample().unwrap();
    let bad = interpolate(&vs, |x| [x[0].sin(), 0.0]);
    assert!(matches!(
        kelvin_residual(&u, &u, 0.1, &bad, &scalars, FluxMode::Centred),
        Err(Error::NotDivergenceFree(_))
    ));
}
