use std::f64::consts::PI;

use ansyb_core::diracprop::*;
use ansyb_core::linalg::{c, max_abs_diff, vec_max_abs_diff, CMat, C64, I, ONE, ZERO};
use ansyb_core::Error;
use proptest::prelude::*;

fn lattice(nx: usize) -> SpaceTimeLattice {
    SpaceTimeLattice::with_period(nx, 16.0, 1e-5).unwrap()
}

#[test]
fn equal_time_kernel_is_the_lattice_delta() {
    for nx in [16, 32, 64] {
        let lat = lattice(nx);
        for m in [0.0, 1.0, 2.5] {
            let k = free_kernels(m, &lat, 0.3, 0.3).unwrap().k_m.matrix;
            let lhs = k * gamma0_block(&lat) * c(2.0 * PI, 0.0);
            let rhs = CMat::identity(lat.dim(), lat.dim()) * c(1.0 / lat.a, 0.0);
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-8, "nx = {nx}, m = {m}");
        }
    }
}

#[test]
fn causal_kernel_is_dirac_self_adjoint_under_time_swap() {
    let lat = lattice(32);
    let (t, tp) = (0.7, -0.4);
    let forward = free_kernels(1.0, &lat, t, tp).unwrap();
    let backward = free_kernels(1.0, &lat, tp, t).unwrap();
    assert!(max_abs_diff(&forward.k_m.dirac_adjoint(&lat), &backward.k_m.matrix) < 1e-10);
    assert!(max_abs_diff(&forward.p_m.dirac_adjoint(&lat), &backward.p_m.matrix) < 1e-10);
}

#[test]
fn massless_kernel_stays_in_the_light_cone() {
    let lat = lattice(64);
    let width = 2.0 * lat.a;
    let center = 0.5 * lat.ell();
    let tau = 3.0;
    let k = free_kernels(0.0, &lat, tau, 0.0).unwrap().k_m.matrix;
    let packet = SpinorField::gaussian(&lat, center, width, 0.0, [ONE, ONE]);
    let leak = packet_cone_leakage(&k, &lat, &packet, center, tau, 6.0 * width);
    assert!(leak <= 1e-6, "leakage {leak}");
    // A massive kernel on the same data still decays, only not as sharply.
    let km = free_kernels(1.0, &lat, tau, 0.0).unwrap().k_m.matrix;
    assert!(packet_cone_leakage(&km, &lat, &packet, center, tau, 6.0 * width).is_finite());
    // τ is a whole number of sites here, so the massless kernel is an exact lattice shift.
    assert!(cone_leakage(&k, &lat, tau, 0.0) <= 1e-6);
    let k0 = free_kernels(0.0, &lat, 0.0, 0.0).unwrap().k_m.matrix;
    assert!(cone_leakage(&k0, &lat, 0.0, 0.0) < 1e-12);
}

#[test]
fn first_order_massless_kernel_stays_in_the_light_cone() {
    let lat = lattice(64);
    let width = 2.0 * lat.a;
    let center = 0.5 * lat.ell();
    let b = Potential::gaussian_scalar(&lat, 0.2, center, 1.0);
    let k = perturbation_term(1, 0.0, &lat, &b, Orientation::Retarded, 2.0, 0.0).unwrap().matrix;
    let packet = SpinorField::gaussian(&lat, center, width, 0.0, [ONE, ONE]);
    let leak = packet_cone_leakage(&k, &lat, &packet, center, 2.0, 6.0 * width);
    assert!(leak <= 1e-6, "leakage {leak}");
}

#[test]
fn green_functions_are_causally_supported() {
    let lat = lattice(16);
    let zero = CMat::zeros(lat.dim(), lat.dim());
    let ret = green_functions(1.0, &lat, Orientation::Retarded, -0.5, 0.0).unwrap();
    let adv = green_functions(1.0, &lat, Orientation::Advanced, 0.5, 0.0).unwrap();
    assert_eq!(ret.matrix, zero);
    assert_eq!(adv.matrix, zero);
    assert_eq!(ret.kind, KernelKind::Retarded);
    assert_eq!(adv.kind, KernelKind::Advanced);
}

#[test]
fn advanced_minus_retarded_is_the_causal_kernel() {
    let lat = lattice(16);
    for (t, tp) in [(0.8, 0.1), (-0.3, 0.4)] {
        let adv = green_functions(1.3, &lat, Orientation::Advanced, t, tp).unwrap().matrix;
        let ret = green_functions(1.3, &lat, Orientation::Retarded, t, tp).unwrap().matrix;
        let k = free_kernels(1.3, &lat, t, tp).unwrap().k_m.matrix;
        assert!(max_abs_diff(&(adv - ret), &(k * (I * c(2.0 * PI, 0.0)))) < 1e-10);
    }
}

#[test]
fn plane_waves_follow_the_dispersion_relation() {
    let lat = lattice(32);
    let m = 0.8;
    for j in [-3i64, 0, 2, 5] {
        let k = 2.0 * PI * j as f64 / lat.ell();
        let e = (k * k + m * m).sqrt();
        let norm = ((m + e) * (m + e) + k * k).sqrt();
        let spinor = [c((m + e) / norm, 0.0), c(k / norm, 0.0)];
        let phi = SpinorField::plane_wave(&lat, j, spinor);
        let t = 1.5;
        let evolved = cauchy_evolve(&phi, &Potential::zero(&lat), m, &lat, 0.0, t).unwrap();
        let expected = &phi.values * C64::from_polar(1.0, -e * t);
        let err = vec_max_abs_diff(&evolved.values, &expected);
        assert!(err <= 1e-8, "j = {j}: {err}");
    }
}

#[test]
fn evolution_conserves_probability_and_is_trivial_at_zero_time() {
    let lat = lattice(32);
    let phi = SpinorField::gaussian(&lat, 8.0, 1.5, 0.7, [ONE, c(0.0, 0.5)]);
    let b = Potential::gaussian_scalar(&lat, 0.3, 8.0, 1.0);
    let later = cauchy_evolve(&phi, &b, 1.0, &lat, 0.0, 2.0).unwrap();
    assert!((later.probability(&lat) - phi.probability(&lat)).abs() <= 1e-10 * phi.probability(&lat));
    let same = cauchy_evolve(&phi, &b, 1.0, &lat, 0.4, 0.4).unwrap();
    assert_eq!(same, phi);
    let v = Potential::gaussian_vector(&lat, 0.2, 0.1, 8.0, 1.0);
    let later = cauchy_evolve(&phi, &v, 1.0, &lat, 0.0, -1.0).unwrap();
    assert!((later.probability(&lat) - phi.probability(&lat)).abs() <= 1e-10 * phi.probability(&lat));
}

#[test]
fn free_glueing_holds_at_several_start_times() {
    let lat = lattice(64);
    let phi = SpinorField::gaussian(&lat, 8.0, 2.0, 0.5, [ONE, ZERO]);
    for t0 in [-1.0, 0.0, 0.75] {
        let g = glueing_check(&phi, &Potential::zero(&lat), 1.0, &lat, t0, t0 + 1.5, 0).unwrap();
        assert!(g.forward <= 1e-6 && g.retarded <= 1e-6, "t0 = {t0}: {g:?}");
    }
}

#[test]
fn first_order_glueing_error_is_quadratic_in_the_potential() {
    let lat = lattice(32);
    let phi = SpinorField::gaussian(&lat, 8.0, 2.0, 0.5, [ONE, ZERO]);
    let base = Potential::gaussian_scalar(&lat, 1.0, 8.0, 1.0);
    let amps = [0.1, 0.05, 0.025];
    let res: Vec<f64> = amps
        .iter()
        .map(|&s| glueing_check(&phi, &base.scaled(s), 1.0, &lat, 0.0, 1.0, 1).unwrap().forward)
        .collect();
    for w in res.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() < 0.6, "{res:?}");
    }
    let order0 = glueing_check(&phi, &base.scaled(0.1), 1.0, &lat, 0.0, 1.0, 0).unwrap().forward;
    assert!(order0 > res[0]);
}

#[test]
fn kernel_composition_is_a_semigroup() {
    let lat = lattice(16);
    let scale = c(2.0 * PI * lat.a, 0.0);
    let g = gamma0_block(&lat);
    let p = |t: f64, tp: f64| free_kernels(0.9, &lat, t, tp).unwrap().k_m.matrix * &g * scale;
    let composed = p(1.1, 0.4) * p(0.4, -0.2);
    assert!(max_abs_diff(&composed, &p(1.1, -0.2)) < 1e-10);
}

#[test]
fn free_kernel_is_translation_invariant() {
    let lat = lattice(16);
    let k = free_kernels(1.0, &lat, 0.6, 0.0).unwrap().k_m.matrix;
    let n = lat.nx;
    for x in 0..n {
        for y in 0..n {
            let (xs, ys) = ((x + 3) % n, (y + 3) % n);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((k[(2 * x + i, 2 * y + j)] - k[(2 * xs + i, 2 * ys + j)]).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn first_order_kernels_are_dirac_adjoints_of_each_other() {
    let lat = lattice(16);
    let b = Potential::gaussian_scalar(&lat, 0.2, 4.0, 1.0);
    let (t, tp) = (0.9, 0.2);
    let ret = perturbation_term(1, 1.0, &lat, &b, Orientation::Retarded, t, tp).unwrap();
    let adv = perturbation_term(1, 1.0, &lat, &b, Orientation::Advanced, tp, t).unwrap();
    assert_eq!(ret.kind, KernelKind::PerturbedRetarded);
    assert!(max_abs_diff(&ret.dirac_adjoint(&lat), &adv.matrix) < 1e-10);
}

#[test]
fn truncation_orders() {
    let lat = lattice(16);
    let b = Potential::gaussian_scalar(&lat, 0.2, 4.0, 1.0);
    let zeroth = perturbation_term(0, 1.0, &lat, &b, Orientation::Retarded, 0.5, 0.0).unwrap();
    let free = green_functions(1.0, &lat, Orientation::Retarded, 0.5, 0.0).unwrap();
    assert!(max_abs_diff(&zeroth.matrix, &free.matrix) < 1e-14);
    assert!(matches!(truncated_propagator(1.0, &lat, &b, 0.5, 2), Err(Error::Unsupported(_))));
    let phi = SpinorField::gaussian(&lat, 4.0, 1.0, 0.0, [ONE, ZERO]);
    assert!(matches!(glueing_check(&phi, &b, 1.0, &lat, 0.0, 1.0, 2), Err(Error::Unsupported(_))));
    assert!(glueing_check(&phi, &b, 1.0, &lat, 1.0, 1.0, 1).is_err());
    assert!(free_kernels(-1.0, &lat, 0.0, 0.0).is_err());
}

#[test]
fn lattice_and_field_validation() {
    assert!(SpaceTimeLattice::new(12, 0.5, 0.1).is_err());
    assert!(SpaceTimeLattice::new(16, 0.5, 0.3).is_err());
    assert!(SpaceTimeLattice::new(16, -0.5, 0.1).is_err());
    let lat = lattice(16);
    assert!(SpinorField::new(&lat, ansyb_core::linalg::CVec::zeros(31)).is_err());
    assert_eq!(lat.momenta().len(), 16);
    assert!((lat.displacement(0.5, 15.5) - 1.0).abs() < 1e-12);
}

#[test]
fn free_hamiltonian_squares_to_energy() {
    let lat = lattice(16);
    let m = 0.7;
    let h = free_hamiltonian(&lat, m);
    assert!(max_abs_diff(&h, &h.adjoint()) < 1e-12);
    let phi = SpinorField::plane_wave(&lat, 3, [ONE, ZERO]);
    let k = 2.0 * PI * 3.0 / lat.ell();
    let hh = &h * (&h * &phi.values);
    assert!(vec_max_abs_diff(&hh, &(&phi.values * c(k * k + m * m, 0.0))) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernel_adjoint_relation_for_random_times(t in -2.0f64..2.0, tp in -2.0f64..2.0, m in 0.0f64..2.0) {
        let lat = lattice(16);
        let f = free_kernels(m, &lat, t, tp).unwrap().k_m;
        let b = free_kernels(m, &lat, tp, t).unwrap().k_m;
        prop_assert!(max_abs_diff(&f.dirac_adjoint(&lat), &b.matrix) < 1e-10);
    }

    #[test]
    fn evolution_preserves_norm(seed_k in -4.0f64..4.0, amp in 0.0f64..0.5, t in 0.1f64..2.0) {
        let lat = lattice(16);
        let phi = SpinorField::gaussian(&lat, 8.0, 1.5, seed_k, [ONE, c(0.3, -0.2)]);
        let b = Potential::gaussian_scalar(&lat, amp, 8.0, 1.0);
        let out = cauchy_evolve(&phi, &b, 1.0, &lat, 0.0, t).unwrap();
        prop_assert!((out.probability(&lat) / phi.probability(&lat) - 1.0).abs() < 1e-10);
    }
}
