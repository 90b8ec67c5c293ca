use std::sync::OnceLock;

use grazing_spectral::boltzmann_modes::{build_mode_tensor, ModeKey, ModeTensor, QuadratureSpec};
use grazing_spectral::config::RunConfig;
use grazing_spectral::cross_sections::CrossSection;
use grazing_spectral::experiments::loglog_slope;
use grazing_spectral::grazing_fpl_modes::{build_split_kernel, reassemble, FplKernel, SplitKernel, SplitSource};
use grazing_spectral::grid::{add, neg, GridConfig, Lattice};
use grazing_spectral::spectral_core::{
    collision_direct, collision_fast, hermitian_defect, l2_difference, random_hermitian, InitialCondition, Maxwellian,
};
use proptest::prelude::*;

const N: usize = 2;

fn grid() -> GridConfig {
    GridConfig::new(N).unwrap()
}

fn fpl_split() -> &'static SplitKernel {
    static S: OnceLock<SplitKernel> = OnceLock::new();
    S.get_or_init(|| {
        let g = grid();
        let fk = FplKernel::new(0.0, 1.0).unwrap();
        build_split_kernel(SplitSource::Fpl(&fk), &g, &QuadratureSpec::for_grid(&g)).unwrap()
    })
}

fn cutoff_tensor() -> &'static ModeTensor {
    static T: OnceLock<ModeTensor> = OnceLock::new();
    T.get_or_init(|| {
        let g = grid();
        build_mode_tensor(&CrossSection::cutoff(0.0).unwrap(), &g, &QuadratureSpec::for_grid(&g), None).unwrap()
    })
}

fn lattice() -> impl Strategy<Value = Lattice> {
    let n = N as i32;
    [-n..=n, -n..=n, -n..=n]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn key_is_invariant_under_sign_flips(l in lattice(), m in lattice()) {
        let k = ModeKey::new(l, m);
        prop_assert_eq!(k, ModeKey::new(neg(l), neg(m)));
        prop_assert_eq!(k, ModeKey::new(neg(l), m));
        prop_assert_eq!(k, ModeKey::new(l, neg(m)));
    }

    #[test]
    fn tensor_modes_have_the_mode_symmetries(l in lattice(), m in lattice()) {
        let t = cutoff_tensor();
        let b = t.get(l, m);
        prop_assert_eq!(b, t.get(neg(l), neg(m)));
        prop_assert_eq!(b, t.get(neg(l), m));
        prop_assert_eq!(t.get(neg(m), m), 0.0);
    }

    #[test]
    fn split_modes_vanish_at_zero_output(m in lattice()) {
        prop_assert_eq!(fpl_split().mode(neg(m), m), 0.0);
    }

    #[test]
    fn split_modes_match_reassembly(l in lattice(), m in lattice()) {
        let s = fpl_split();
        let k = add(l, m).map(f64::from);
        prop_assert_eq!(s.mode(l, m), reassemble(s.fields_at(m), k));
    }

    #[test]
    fn fast_output_is_hermitian_and_matches_direct(seed in any::<u64>()) {
        let g = grid();
        let s = random_hermitian(&g, seed);
        let d = collision_direct(&s, fpl_split()).unwrap();
        let f = collision_fast(&s, fpl_split()).unwrap();
        let scale = d.iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(hermitian_defect(&g, &f) <= 1e-13 * scale);
        prop_assert!(hermitian_defect(&g, &d) <= 1e-13 * scale);
        let err = d.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * scale, "{}", err / scale);
    }

    #[test]
    fn mass_mode_of_the_operator_vanishes(seed in any::<u64>()) {
        let g = grid();
        let s = random_hermitian(&g, seed);
        let i0 = g.index([0, 0, 0]).unwrap();
        prop_assert_eq!(collision_direct(&s, cutoff_tensor()).unwrap()[i0].norm(), 0.0);
        prop_assert!(collision_fast(&s, fpl_split()).unwrap()[i0].norm() <= 1e-15);
    }

    #[test]
    fn projected_maxwellians_are_hermitian(u in -0.2f64..0.2, t in 0.03f64..0.1) {
        let g = grid();
        let m = Maxwellian { density: 1.0, velocity: [u, -0.5 * u, 0.0], temperature: t };
        let s = InitialCondition::TruncatedMaxwellian(m).project(&g, 12).unwrap();
        prop_assert!(s.hermitian_defect() <= 1e-15);
        prop_assert!(s.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    }

    #[test]
    fn l2_difference_is_a_metric(a in any::<u64>(), b in any::<u64>()) {
        let g = grid();
        let (x, y) = (random_hermitian(&g, a), random_hermitian(&g, b));
        prop_assert_eq!(l2_difference(&x, &x), 0.0);
        prop_assert!((l2_difference(&x, &y) - l2_difference(&y, &x)).abs() <= 1e-15 * l2_difference(&x, &y));
    }

    #[test]
    fn loglog_slope_recovers_power_laws(p in -4.0f64..4.0, c in 0.1f64..10.0) {
        let x = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| c * v.powf(p)).collect();
        prop_assert!((loglog_slope(&x, &y) - p).abs() <= 1e-12);
    }

    #[test]
    fn canonical_config_round_trips(n in 1usize..6, seed in any::<u64>(), e0 in 0.1f64..1.0, t_end in 0.0f64..5.0) {
        let text = format!("n = {n}\nseed = {seed}\neps = {e0},{}\nt_end = {t_end}\n", e0 / 2.0);
        let cfg = RunConfig::from_text(&text).unwrap();
        let again = RunConfig::from_text(&cfg.canonical()).unwrap();
        prop_assert_eq!(cfg.canonical(), again.canonical());
        prop_assert_eq!(cfg.hash(), again.hash());
    }
}
