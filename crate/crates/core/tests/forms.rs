use std::f64::consts::PI;
use std::sync::Arc;

use eulerfem::algebra::{operator_scalar_order, StreamSampler};
use eulerfem::elements::Family;
use eulerfem::forms::{
    momentum_trilinear, pressure_order, scalar_advection_matrix, upwind_indicator, FluxMode, MixedSpaces,
    StepAssembler, TrilinearForm,
};
use eulerfem::mesh::Mesh;
use eulerfem::solver::sparse::dot;
use eulerfem::spaces::{build_space, interpolate, interpolate_scalar, Field};
use eulerfem::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [FluxMode; 2] = [FluxMode::Centred, FluxMode::Upwind];

fn mesh(n: usize, periodic: bool) -> Arc<Mesh> {
    Arc::new(Mesh::structured(n, periodic).unwrap())
}

#[test]
fn upwind_indicator_is_half_sign() {
    assert_eq!(upwind_indicator(2.0), 0.5);
    assert_eq!(upwind_indicator(-1e-3), -0.5);
    assert_eq!(upwind_indicator(0.0), 0.0);
}

#[test]
fn scalar_advection_matches_analytic_pairing_for_linear_data() {
    // β = e₁ and continuous a = x + 2y on the walled 2×2 mesh: jumps vanish, so
    // (X a, b) = ∫ ∂ₓa b − ∫_{x=2π} a b + ∫_{x=0} a b.
    let m = mesh(2, false);
    let bdm = build_space(&m, Family::BDM, 1).unwrap();
    let beta = interpolate(&bdm, |_| [1.0, 0.0]);
    let dg = build_space(&m, Family::DG, 1).unwrap();
    let a = interpolate_scalar(&dg, |x| x[0] + 2.0 * x[1]);
    let b = interpolate_scalar(&dg, |x| x[0]);
    for mode in MODES {
        let am = scalar_advection_matrix(&beta, &dg, mode).unwrap();
        let pairing = dot(b.coeffs(), &am.mul_vec(a.coeffs()));
        assert!((pairing + 12.0 * PI.powi(3)).abs() < 1e-10, "{mode}: {pairing}");
    }
}

#[test]
fn trilinear_forms_match_analytic_value_for_linear_data() {
    // u = e₁, a = (y, x), v = (x, 0): T(u; a, v) = −∫ a·∂ₓv = −4π³.
    let m = mesh(2, false);
    let bdm = build_space(&m, Family::BDM, 1).unwrap();
    let u = interpolate(&bdm, |_| [1.0, 0.0]);
    let a = interpolate(&bdm, |x| [x[1], x[0]]);
    let v = interpolate(&bdm, |x| [x[0], 0.0]);
    for form in [TrilinearForm::Flux, TrilinearForm::Rotational] {
        for mode in MODES {
            let t = momentum_trilinear(form, &u, &a, &v, mode).unwrap();
            assert!((t + 4.0 * PI.powi(3)).abs() < 1e-10, "{form:?} {mode}: {t}");
        }
    }
}

#[test]
fn advection_rejects_divergent_velocity() {
    let m = mesh(3, false);
    let bdm = build_space(&m, Family::BDM, 1).unwrap();
    let beta = interpolate(&bdm, |x| [x[0], 0.0]);
    let dg = build_space(&m, Family::DG, 1).unwrap();
    assert!(matches!(
        scalar_advection_matrix(&beta, &dg, FluxMode::Centred),
        Err(Error::NotDivergenceFree(_))
    ));
    let rt = build_space(&m, Family::RT, 1).unwrap();
    assert!(matches!(
        scalar_advection_matrix(&beta, &rt, FluxMode::Centred),
        Err(Error::SpaceMismatch(_))
    ));
}

#[test]
fn scalar_operator_structure_on_random_fields() {
    for (family, order, periodic) in [(Family::BDM, 1, true), (Family::RT, 1, false), (Family::BDM, 2, false)] {
        let m = mesh(4, periodic);
        let vs = build_space(&m, family, order).unwrap();
        let dg = build_space(&m, Family::DG, operator_scalar_order(&vs)).unwrap();
        let ones = interpolate_scalar(&dg, |_| 1.0);
        let mut sampler = StreamSampler::new(&vs, 7).unwrap();
        for _ in 0..4 {
            let beta = sampler.sample().unwrap();
            let centred = scalar_advection_matrix(&beta, &dg, FluxMode::Centred).unwrap();
            let scale = centred.max_abs();
            assert!(centred.add_scaled(1.0, &centred.transpose()).max_abs() < 1e-12 * scale);
            let col = centred.mul_vec(ones.coeffs());
            assert!(col.iter().all(|x| x.abs() < 1e-12 * scale));
            let upwind = scalar_advection_matrix(&beta, &dg, FluxMode::Upwind).unwrap();
            let a: Vec<f64> = (0..dg.dim()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
            assert!(dot(&a, &upwind.mul_vec(&a)) >= -1e-12);
        }
    }
}

#[test]
fn flux_and_rotational_forms_agree_for_div_free_advection() {
    let m = mesh(4, true);
    let vs = build_space(&m, Family::BDM, 2).unwrap();
    let mut sampler = StreamSampler::new(&vs, 11).unwrap();
    let (u, v) = (sampler.sample().unwrap(), sampler.sample().unwrap());
    for mode in MODES {
        let g = momentum_trilinear(TrilinearForm::Flux, &u, &u, &v, mode).unwrap();
        let r = momentum_trilinear(TrilinearForm::Rotational, &u, &u, &v, mode).unwrap();
        assert!((g - r).abs() < 1e-10 * g.abs().max(1.0), "{mode}: {g} vs {r}");
        let t = momentum_trilinear(TrilinearForm::Flux, &u, &u, &u, mode).unwrap();
        assert!(t.abs() < 1e-10, "{mode}: T(u;u,u) = {t}");
    }
}

#[test]
fn pressure_pairing_follows_family() {
    let m = mesh(2, false);
    assert_eq!(pressure_order(&build_space(&m, Family::RT, 2).unwrap()).unwrap(), 2);
    assert_eq!(pressure_order(&build_space(&m, Family::BDM, 2).unwrap()).unwrap(), 1);
    assert!(pressure_order(&build_space(&m, Family::DG, 1).unwrap()).is_err());
}

fn assembler(n: usize, periodic: bool, family: Family, order: usize, mode: FluxMode) -> StepAssembler {
    let vs = build_space(&mesh(n, periodic), family, order).unwrap();
    StepAssembler::new(MixedSpaces::new(vs).unwrap(), mode, 0.1, None).unwrap()
}

#[test]
fn constant_state_is_a_steady_solution_on_the_torus() {
    for mode in MODES {
        let asm = assembler(4, true, Family::BDM, 1, mode);
        let u = interpolate(&asm.spaces().velocity, |_| [1.0, -0.5]);
        let mut state = u.coeffs().to_vec();
        state.resize(asm.spaces().dim(), 0.0);
        let load = vec![0.0; asm.spaces().nu()];
        let r = asm.residual(u.coeffs(), &state, &load, false).unwrap();
        let worst = r.residual.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(worst < 1e-12, "{mode}: {worst}");
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (family, order, periodic) in [(Family::BDM, 1, false), (Family::RT, 1, true)] {
        for mode in MODES {
            let asm = assembler(4, periodic, family, order, mode);
            let vs = asm.spaces().velocity.clone();
            let mut sampler = StreamSampler::new(&vs, 5).unwrap();
            // generic noise keeps u·n away from zero at facet quadrature points,
            // where the upwind residual jumps
            let mut noisy = |f: Field| -> Vec<f64> { f.coeffs().iter().map(|c| c + 0.1 * rng.random_range(-1.0..1.0)).collect() };
            let u_n = noisy(sampler.sample().unwrap());
            let mut state = noisy(sampler.sample().unwrap());
            state.extend((0..asm.spaces().np() + 1).map(|_| rng.random_range(-1.0..1.0)));
            let load = vec![0.0; asm.spaces().nu()];
            let jac = asm.residual(&u_n, &state, &load, true).unwrap().jacobian.unwrap();
            let dense = jac.to_dense();
            let scale = jac.max_abs();
            let eps = 1e-6;
            let mut worst = 0.0f64;
            for k in 0..state.len() {
                let mut sp = state.clone();
                let mut sm = state.clone();
                sp[k] += eps;
                sm[k] -= eps;
                let rp = asm.residual(&u_n, &sp, &load, false).unwrap().residual;
                let rm = asm.residual(&u_n, &sm, &load, false).unwrap().residual;
                for (j, row) in dense.iter().enumerate() {
                    let fd = (rp[j] - rm[j]) / (2.0 * eps);
                    worst = worst.max((fd - row[k]).abs());
                }
            }
            assert!(worst < 1e-6 * scale, "{family}{order} {mode}: {worst:e} vs scale {scale:e}");
        }
    }
}

#[test]
fn residual_rejects_wrong_state_length() {
    let asm = assembler(2, false, Family::RT, 0, FluxMode::Centred);
    let u = Field::zeros(&asm.spaces().velocity);
    let load = vec![0.0; asm.spaces().nu()];
    assert!(matches!(
        asm.residual(u.coeffs(), u.coeffs(), &load, false),
        Err(Error::DimensionMismatch { .. })
    ));
}
