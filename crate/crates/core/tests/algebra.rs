mod common;

use approx::assert_abs_diff_eq;
use restframe::algebra::{
    canonicity_residual, external_generators, from_relative, internal_cm, internal_generators, poisson_bracket,
    poisson_bracket_with, restframe_residuals, sample_points, to_relative, verify_poincare_algebra, BracketMethod,
    Component, GeneratorFn, Layout, PhaseSpacePoint, TwoBody,
};
use restframe::kinematics::{CollectiveState, Vec3};
use restframe::potential::Potential;

fn quartic() -> TwoBody {
    TwoBody::new(Potential::Polynomial(vec![0.3, 0.5, 0.1]), 1.0, 2.5, 1.0).unwrap()
}

#[test]
fn external_casimirs() {
    let mut rng = common::rng(11);
    for _ in 0..50 {
        let z = common::random_in_ball(&mut rng, 3.0);
        let h = common::random_in_ball(&mut rng, 3.0);
        let spin = common::random_in_ball(&mut rng, 2.0);
        let mc = 0.5 + h.norm();
        let cs = CollectiveState::new(z, h, mc, spin, 1.0).unwrap();
        let g = external_generators(&cs);
        let scale = mc * mc * (1.0 + h.norm_squared());
        assert_abs_diff_eq!(g.p.square(), mc * mc, epsilon = 1e-12 * scale);
        let w = g.pauli_lubanski();
        assert_abs_diff_eq!(w.square(), -mc * mc * spin.norm_squared(), epsilon = 1e-10 * scale * (1.0 + z.norm()).powi(2));
        assert_abs_diff_eq!(w.dot(&g.p), 0.0, epsilon = 1e-10 * scale * (1.0 + z.norm()));
    }
}

#[test]
fn closure_holds_for_both_realizations() {
    let mut rng = common::rng(5);
    let model = quartic();
    let ext = sample_points(Layout::External, &model, 20, false, &mut rng);
    assert!(verify_poincare_algebra(&model, &ext, BracketMethod::Dual).unwrap().max_residual() < 1e-8);
    let int = sample_points(Layout::Internal, &model, 20, true, &mut rng);
    let report = verify_poincare_algebra(&model, &int, BracketMethod::Dual).unwrap();
    assert!(report.max_residual() < 1e-8, "{report:?}");
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["layout"], "internal");
}

#[test]
fn mass_commutes_with_internal_momentum_and_spin() {
    let model = quartic();
    let mut rng = common::rng(9);
    let mc = GeneratorFn { layout: Layout::Internal, model: &model, component: Component::Scalar };
    for pt in sample_points(Layout::Internal, &model, 20, false, &mut rng) {
        for i in 0..3 {
            let p = GeneratorFn { component: Component::Momentum(i), ..mc.clone() };
            let s = GeneratorFn { component: Component::Angular(i), ..mc.clone() };
            assert!(poisson_bracket(&mc, &p, &pt).unwrap().abs() < 1e-12);
            assert!(poisson_bracket(&mc, &s, &pt).unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn dual_and_central_difference_brackets_agree() {
    let model = quartic();
    let mut rng = common::rng(13);
    let k = GeneratorFn { layout: Layout::Internal, model: &model, component: Component::Boost(0) };
    let p = GeneratorFn { component: Component::Momentum(1), ..k.clone() };
    for pt in sample_points(Layout::Internal, &model, 10, false, &mut rng) {
        let a = poisson_bracket_with(&k, &p, &pt, BracketMethod::Dual).unwrap();
        let b = poisson_bracket_with(&k, &p, &pt, BracketMethod::CentralDifference).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
}

#[test]
fn canonical_brackets() {
    let model = quartic();
    let mut rng = common::rng(17);
    for layout in [Layout::External, Layout::Internal, Layout::Relative] {
        for pt in sample_points(layout, &model, 10, false, &mut rng) {
            assert!(canonicity_residual(&pt, &model).unwrap() < 1e-10);
        }
    }
}

#[test]
fn constraint_surface_round_trip() {
    let model = quartic();
    let mut rng = common::rng(19);
    for _ in 0..50 {
        let rho = common::random_in_ball(&mut rng, 1.5);
        let pi = common::random_in_ball(&mut rng, 1.5);
        let pt = from_relative(&rho, &pi, &model).unwrap();
        let (p, k) = restframe_residuals(&pt, &model).unwrap();
        assert!(p < 1e-14 && k < 1e-10, "{p} {k}");
        let (e1, k1) = pt.pair(0);
        let (e2, k2) = pt.pair(1);
        let (r, q) = to_relative(&e1, &e2, &k1, &k2, model.m1, model.m2);
        assert!((r - rho).norm() < 1e-14 && (q - pi).norm() < 1e-14);
        let g = internal_generators(&pt, &model).unwrap();
        assert!((g.spin - rho.cross(&pi)).norm() < 1e-13);
        // equal masses put the internal center of mass at the midpoint
        let sym = TwoBody::new(model.potential.clone(), 1.0, 1.0, 1.0).unwrap();
        assert!(internal_cm(&rho, &pi, &sym).unwrap().norm() < 1e-15);
    }
}

#[test]
fn radicand_violations_are_domain_errors() {
    let model = TwoBody::new(Potential::Polynomial(vec![-5.0]), 1.0, 1.0, 1.0).unwrap();
    let pt = PhaseSpacePoint::internal(Vec3::zeros(), Vec3::zeros(), Vec3::x(), Vec3::zeros()).unwrap();
    assert!(matches!(
        internal_generators(&pt, &model),
        Err(restframe::Error::Domain { .. })
    ));
    assert!(verify_poincare_algebra(&model, &[], BracketMethod::Auto).is_err());
    assert!("sideways".parse::<Layout>().is_err());
}
