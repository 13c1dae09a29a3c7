use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use restframe::entanglement::{
    entanglement_entropy, hydrogen_state, presentation_map, trace_out_com, trace_out_first, trace_out_particle,
    trace_out_relativistic_particle, Particle, PeriodicGrid, PresentationMap, PresentationTag, RelativisticState,
    TwoParticleWavefunction,
};
use restframe::kinematics::Vec3;
use restframe::Error;

fn exponential(a: f64) -> impl Fn(f64) -> Complex64 + Send + Sync + Clone + 'static {
    move |r: f64| Complex64::new((-r.abs() / a).exp(), 0.0)
}

/// Entropy of the Gaussian kernel `exp(−γ(x² + x′²)/2 + βxx′)`.
fn gaussian_entropy(gamma: f64, beta: f64) -> f64 {
    let xi = beta / (gamma + (gamma * gamma - beta * beta).sqrt());
    -(1.0 - xi).ln() - xi / (1.0 - xi) * xi.ln()
}

#[test]
fn gaussian_entropy_oracle() {
    let grid = PeriodicGrid::new(160, 24.0).unwrap();
    let mid = grid.length / 2.0;
    for (a, b) in [(1.0, 0.6), (1.0, -0.3), (2.0, 1.5)] {
        let psi = TwoParticleWavefunction::from_fn(grid, 1.0, 1.0, 0.0, move |x1, x2| {
            let (u, v) = (x1 - mid, x2 - mid);
            Complex64::new((-(a * u * u + a * v * v + 2.0 * b * u * v) / 2.0).exp(), 0.0)
        })
        .unwrap();
        let gamma = a - b * b / (2.0 * a);
        let beta = b * b / (2.0 * a);
        let want = gaussian_entropy(gamma, beta);
        for keep in [Particle::Electron, Particle::Proton] {
            let got = entanglement_entropy(&trace_out_particle(&psi, keep).unwrap()).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }
}

#[test]
fn box_norm_matches_quadrature_oracle() {
    for (n, l) in [(200, 10.0), (400, 10.0), (256, 6.0)] {
        let grid = PeriodicGrid::new(n, l).unwrap();
        let psi = hydrogen_state(exponential(1.0), grid.momentum(1), 1.0, 4.0, grid).unwrap();
        let dx = grid.spacing();
        // ∫ e^{−2|r|} over one box, times the trapezoid kink correction
        let exact = 1.0 - (-l).exp();
        assert_abs_diff_eq!(psi.norm_squared() / l, exact * (1.0 + dx * dx / 3.0), epsilon = dx.powi(4));
    }
}

#[test]
fn electron_kernel_structure_for_several_states() {
    let grid = PeriodicGrid::new(96, 30.0).unwrap();
    let (me, mp) = (1.0, 1836.0);
    for (k, a) in [(0, 1.0), (1, 2.5), (-4, 0.7), (7, 1.3)] {
        let p = grid.momentum(k);
        let psi = hydrogen_state(exponential(a), p, me, mp, grid).unwrap();
        let rho = trace_out_particle(&psi, Particle::Electron).unwrap();
        assert!(rho.translation_residual() < 1e-10);
        assert!(rho.structure_residual(me * p / (me + mp)) < 1e-10);
        assert!(rho.diagonal_flatness() < 1e-10);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-13);
        assert!(rho.eigenvalues().unwrap().iter().all(|&l| l > -1e-10));
        let proton = trace_out_particle(&psi, Particle::Proton).unwrap();
        assert!(proton.structure_residual(mp * p / (me + mp)) < 1e-10);
        let (se, sp) = (entanglement_entropy(&rho).unwrap(), entanglement_entropy(&proton).unwrap());
        assert_abs_diff_eq!(se, sp, epsilon = 1e-8);
        assert!(se > 0.1, "a bound pair is entangled in the particle partition");
    }
}

#[test]
fn relative_factor_is_pure_in_both_presentations() {
    let grid = PeriodicGrid::new(96, 30.0).unwrap();
    let p = grid.momentum(2);
    let psi = hydrogen_state(exponential(1.0), p, 1.0, 3.0, grid).unwrap();
    let b = trace_out_com(&psi).unwrap();
    let b2 = trace_out_first(&psi, &presentation_map(&psi, PresentationTag::B).unwrap()).unwrap();
    assert_eq!(b, b2);
    for t in [0.5, 3.0, -2.0] {
        let c = trace_out_first(&psi, &PresentationMap::new(PresentationTag::C, 1.0, 3.0, p, t).unwrap()).unwrap();
        let (sb, sc) = (entanglement_entropy(&b).unwrap(), entanglement_entropy(&c).unwrap());
        assert_abs_diff_eq!(sb, sc, epsilon = 1e-10);
        assert_abs_diff_eq!(c.purity(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn b_map_preserves_the_norm() {
    let grid = PeriodicGrid::new(128, 20.0).unwrap();
    let psi = hydrogen_state(exponential(1.5), grid.momentum(3), 1.0, 2.0, grid).unwrap();
    let map = presentation_map(&psi, PresentationTag::B).unwrap();
    assert_eq!(map.jacobian().abs(), 1.0);
    let dx = grid.spacing();
    let mut transformed = 0.0;
    for &x in &grid.points() {
        for &r in &grid.relative_points() {
            let (xe, xp) = map.inverse(x, r);
            transformed += psi.eval(xe, xp).norm_sqr() * dx * dx;
        }
    }
    assert_abs_diff_eq!(transformed, psi.norm_squared(), epsilon = 1e-12 * transformed);
}

#[test]
fn particle_partition_is_refused_after_the_rest_frame_conditions() {
    let grid = PeriodicGrid::new(64, 20.0).unwrap();
    for k in [Vec3::zeros(), Vec3::new(0.6, 0.0, 0.0), Vec3::new(1.0, -2.0, 0.5)] {
        let state = RelativisticState::on_grid(k, &grid, exponential(1.0)).unwrap();
        for which in [1, 2] {
            match trace_out_relativistic_particle(&state, which) {
                Err(Error::RelativisticNonSeparability { particle }) => assert_eq!(particle, which),
                other => panic!("expected non-separability, got {other:?}"),
            }
        }
    }
}
