use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gainloss::closed_forms::{
    period_grid, residual_check, CaseTag, ClosedFormModel, EllipticSolution,
};
use gainloss::dynamics::{
    eom_x, momenta_from_velocities, velocities_from_momenta, Coords, PhaseState,
};
use gainloss::elliptic::{complete_e, complete_k, incomplete_e, jacobi};
use gainloss::invariants::{charge_functions, poisson_bracket, sample_phase_point};
use gainloss::models::{
    bateman, quartic_translational, rotational_model, QuarticTranslationalParams, RotationalParams,
    SexticQesParams,
};
use gainloss::qes;
use gainloss::rep::{build_matrix_rep, x_to_z, z_to_x, RadialGain, SystemSpec};

fn translational() -> impl Strategy<Value = SystemSpec> {
    (
        0.2..3.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        0.1..2.0f64,
        -1.0..1.0f64,
        -1.5..1.5f64,
        1..=3usize,
    )
        .prop_map(|(omega0, alpha0, beta0, a, b, gamma, pairs)| {
            quartic_translational(&QuarticTranslationalParams {
                omega0,
                alpha0,
                beta0,
                a,
                b,
                gamma,
                pairs,
                ..Default::default()
            })
            .unwrap()
        })
}

fn rotational() -> impl Strategy<Value = SystemSpec> {
    (
        0.2..3.0f64,
        -2.0..2.0f64,
        -1.5..1.5f64,
        -1.0..1.0f64,
        any::<bool>(),
        1..=3usize,
    )
        .prop_map(|(omega0, alpha0, gamma, c, linear, pairs)| {
            let gain = if linear {
                RadialGain::Linear(c)
            } else {
                RadialGain::Constant(c)
            };
            rotational_model(&RotationalParams {
                gain,
                omega0,
                alpha0,
                gamma,
                pairs,
                coupling: 0.0,
            })
            .unwrap()
        })
}

fn catalog() -> impl Strategy<Value = SystemSpec> {
    prop_oneof![translational(), rotational()]
}

fn state_for(spec: &SystemSpec, seed: u64, coords: Coords) -> PhaseState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (q, p) = sample_phase_point(spec, &mut rng);
    PhaseState::new(0.0, q, p, coords)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matrix_structure_holds(spec in catalog(), seed in any::<u64>()) {
        let s = state_for(&spec, seed, Coords::Z);
        let rep = build_matrix_rep(&spec, &gainloss::rep::z_to_x_coords(&s.q)).unwrap();
        let report = rep.verify_structure(1e-12);
        prop_assert!(report.pass, "{:?}", report.checks);
    }

    #[test]
    fn frame_round_trip(x in prop::collection::vec(-1.0..1.0f64, 2..=6), seed in any::<u64>()) {
        let n = x.len() / 2 * 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let s = PhaseState::new(0.0, x[..n].to_vec(), v, Coords::X);
        let back = z_to_x(&x_to_z(&s).unwrap()).unwrap();
        for (a, b) in s.q.iter().chain(&s.v).zip(back.q.iter().chain(&back.v)) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn momenta_round_trip(spec in catalog(), seed in any::<u64>(), in_x in any::<bool>()) {
        let z = state_for(&spec, seed, Coords::Z);
        let s = if in_x { z_to_x(&z).unwrap() } else { z };
        let p = momenta_from_velocities(&spec, &s).unwrap();
        let back = velocities_from_momenta(&spec, s.t, &s.q, &p, s.coords).unwrap();
        for (a, b) in s.v.iter().zip(&back.v) {
            prop_assert!((a - b).abs() < 1e-15 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn brackets_are_antisymmetric(spec in catalog(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (z, p) = sample_phase_point(&spec, &mut rng);
        let fs = charge_functions(&spec);
        for fa in &fs {
            for fb in &fs {
                let ab = poisson_bracket(&spec, *fa, *fb, &z, &p, false).unwrap().value;
                let ba = poisson_bracket(&spec, *fb, *fa, &z, &p, false).unwrap().value;
                prop_assert!((ab + ba).abs() < 1e-12, "{} {}: {ab} {ba}", fa.label(), fb.label());
            }
        }
    }

    #[test]
    fn reversing_gain_swaps_damped_and_antidamped(
        omega in 0.1..3.0f64, gamma in -2.0..2.0f64, s in -2.0..2.0f64,
        q in prop::array::uniform2(-2.0..2.0f64), v in prop::array::uniform2(-2.0..2.0f64),
    ) {
        let fwd = bateman(omega, gamma, s).unwrap();
        let rev = bateman(omega, -gamma, s).unwrap();
        let a = eom_x(&fwd, &PhaseState::new(0.0, q.to_vec(), v.to_vec(), Coords::X)).unwrap();
        let b = eom_x(&rev, &PhaseState::new(0.0, vec![q[1], q[0]], vec![v[1], v[0]], Coords::X)).unwrap();
        prop_assert_eq!(a[0], b[1]);
        prop_assert_eq!(a[1], b[0]);
    }

    #[test]
    fn jacobi_identities(u in -50.0..50.0f64, m in 0.0..0.999f64) {
        let j = jacobi(u, m).unwrap();
        prop_assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-12);
        prop_assert!((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sn_has_period_four_k(u in -10.0..10.0f64, m in 0.0..0.99f64) {
        let k = complete_k(m).unwrap();
        prop_assert!((jacobi(u + 4.0 * k, m).unwrap().sn - jacobi(u, m).unwrap().sn).abs() < 1e-10);
    }

    #[test]
    fn sn_derivative_matches_differences(u in -10.0..10.0f64, m in 0.0..0.99f64) {
        let j = jacobi(u, m).unwrap();
        let exact = j.cn * j.dn;
        prop_assume!(exact.abs() > 1e-3);
        let h = f64::EPSILON.cbrt() * u.abs().max(1.0);
        let fd = (jacobi(u + h, m).unwrap().sn - jacobi(u - h, m).unwrap().sn) / (2.0 * h);
        prop_assert!((fd - exact).abs() / exact.abs() < 1e-7);
    }

    #[test]
    fn incomplete_e_limits(phi in -3.0..3.0f64, m in 0.0..0.99f64) {
        prop_assert!((incomplete_e(phi, 0.0).unwrap() - phi).abs() < 1e-14);
        prop_assert!((incomplete_e(FRAC_PI_2, m).unwrap() - complete_e(m).unwrap()).abs() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qes_methods_agree(at in 0.05..3.0f64, bt in -2.0..2.0f64, n in 0..=6usize, p in 0..=1u8) {
        let problem = qes::build_recursion_matrix(&SexticQesParams::new(at, bt, n, p).unwrap()).unwrap();
        let checked = qes::spectrum(&problem);
        prop_assert!(checked.agree && checked.disagreement < 1e-8, "{}", checked.disagreement);
        prop_assert!(checked.spectrum.all_real());
    }

    #[test]
    fn qes_small_atilde_continuity(bt in prop_oneof![-2.0..-0.5f64, 0.5..2.0f64], n in 0..=6usize, p in 0..=1u8) {
        let at = 1e-6;
        let problem = qes::build_recursion_matrix(&SexticQesParams::new(at, bt, n, p).unwrap()).unwrap();
        let mut got: Vec<f64> = qes::spectrum(&problem).spectrum.energies.iter().map(|e| e.re).collect();
        // levels at ã = 0 are E_j = −4b̃j; the first-order shift comes from the
        // off-diagonal products u_j·l_j = 8ã(j+1)(2j+1+2p)(n−j) over the level gaps
        let d = |j: usize| 4.0 * bt * j as f64;
        let ul = |j: usize| 8.0 * at * (j + 1) as f64 * (2 * j + 1 + 2 * p as usize) as f64 * (n - j) as f64;
        let mut predicted: Vec<(f64, f64)> = (0..=n)
            .map(|j| {
                let mut shift = 0.0;
                if j > 0 {
                    shift += ul(j - 1) / (d(j) - d(j - 1));
                }
                if j < n {
                    shift += ul(j) / (d(j) - d(j + 1));
                }
                (-d(j), -(d(j) + shift))
            })
            .collect();
        got.sort_by(f64::total_cmp);
        predicted.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (g, (limit, first_order)) in got.iter().zip(&predicted) {
            prop_assert!((g - first_order).abs() < 1e-6, "{g} vs first order {first_order}");
            if (first_order - limit).abs() < 0.5e-4 {
                prop_assert!((g - limit).abs() < 1e-4, "{g} vs {limit}");
            }
        }
    }

    #[test]
    fn quartic_cn_residual(omega0 in 1.1..2.5f64, beta0 in 0.3..2.0f64, amp in 0.2..1.5f64) {
        let mut p = QuarticTranslationalParams { omega0, beta0, ..Default::default() };
        p.alpha0 = p.cubic_free_alpha0();
        let sol = EllipticSolution::new(CaseTag::TransCn, ClosedFormModel::Translational(p), amp).unwrap();
        let spec = sol.system_spec().unwrap();
        let grid = period_grid(&sol, 2.0, 200).unwrap();
        prop_assert!(residual_check(&sol, &spec, &grid).unwrap().max_residual < 1e-8);
    }
}
