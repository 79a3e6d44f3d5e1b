mod common;

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use pdi_core::config::RunConfig;
use pdi_core::geometry::derived_regions;
use pdi_core::imaging::{
    glsm_cost, glsm_minimize, hermitian_norm, image, image_side, period_cell, GlsmOptions, GlsmSystem,
    SamplingGrid,
};
use pdi_core::operators::{add_noise, sharp, simulate, CMatrix, CVector, Simulation};
use pdi_core::{Side, Variant};
use proptest::prelude::*;

const EXAMPLE3: &str = include_str!("../../../configs/example3.toml");
const BACKGROUND: &str = include_str!("../../../configs/background.toml");

fn random_matrix(n: usize, state: &mut u64) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        C64::new(2.0 * common::lcg(state) - 1.0, 2.0 * common::lcg(state) - 1.0)
    })
}

fn random_vector(n: usize, state: &mut u64) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(2.0 * common::lcg(state) - 1.0, 2.0 * common::lcg(state) - 1.0))
}

#[test]
fn glsm_closed_forms() {
    let mut state = 2u64;
    let n = random_matrix(5, &mut state);
    let s = sharp(&n).unwrap();
    let a = glsm_minimize(&n, &s, &CVector::zeros(5), 1e-3, 0.01).unwrap();
    assert!(a.iter().all(|c| *c == C64::default()));

    let id = CMatrix::identity(5, 5);
    let phi = random_vector(5, &mut state);
    for alpha in [1e-4, 0.1, 2.0] {
        let a = glsm_minimize(&id, &id, &phi, alpha, 0.0).unwrap();
        let want = &phi / C64::new(1.0 + alpha, 0.0);
        assert!((&a - &want).norm() <= 1e-14 * want.norm());
    }
}

#[test]
fn glsm_rejects_bad_input() {
    let mut state = 2u64;
    let n = random_matrix(4, &mut state);
    let s = sharp(&n).unwrap();
    let phi = random_vector(4, &mut state);
    assert!(glsm_minimize(&n, &s, &phi, 0.0, 0.0).is_err());
    assert!(glsm_minimize(&n, &s, &random_vector(3, &mut state), 1e-2, 0.0).is_err());
    let mut bad = n.clone();
    bad[(1, 2)] = C64::new(f64::NAN, 0.0);
    assert!(glsm_minimize(&bad, &s, &phi, 1e-2, 0.0).is_err());
}

#[test]
fn glsm_matches_descent_oracle_on_6x6() {
    let mut state = 99u64;
    for _ in 0..4 {
        let n = random_matrix(6, &mut state);
        let s = sharp(&n).unwrap();
        let phi = random_vector(6, &mut state);
        let (alpha, delta) = (5e-2, 1e-2);
        let a = glsm_minimize(&n, &s, &phi, alpha, delta).unwrap();
        let shift = delta * hermitian_norm(&s);
        let got = glsm_cost(&n, &s, &phi, alpha, delta, &a);
        let oracle = common::descent_oracle(&n, &s, &phi, alpha, shift);
        let want = common::cost(&n, &s, &phi, alpha, shift, &oracle);
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
        assert!(got <= want * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn glsm_zeroes_the_gradient(seed in any::<u64>(), n in 2usize..12, la in -4.0f64..0.0) {
        let mut state = seed;
        let nm = random_matrix(n, &mut state);
        let s = sharp(&nm).unwrap();
        let phi = random_vector(n, &mut state);
        let (alpha, delta) = (10f64.powf(la), 0.01);
        let a = glsm_minimize(&nm, &s, &phi, alpha, delta).unwrap();
        let scale = (nm.adjoint() * &phi).norm();
        let step = 1e-3 * a.norm().max(1e-12);
        for _ in 0..20 {
            let v = random_vector(n, &mut state).normalize() * C64::new(step, 0.0);
            let d = (glsm_cost(&nm, &s, &phi, alpha, delta, &(&a + &v))
                - glsm_cost(&nm, &s, &phi, alpha, delta, &(&a - &v)))
                / (2.0 * step);
            prop_assert!(d.abs() <= 1e-10 * scale, "{}", d.abs() / scale);
        }
    }
}

#[test]
fn sampling_grid_layout() {
    let g = SamplingGrid::with_spacing([[-1.0, 1.0], [0.0, 0.5]], 0.1).unwrap();
    assert_eq!((g.nx, g.ny), (20, 5));
    assert_eq!(g.len(), 100);
    let p = g.point(0);
    assert!((p[0] + 0.95).abs() < 1e-12 && (p[1] - 0.05).abs() < 1e-12);
    let p = g.point(21);
    assert!((p[0] + 0.85).abs() < 1e-12 && (p[1] - 0.15).abs() < 1e-12);
    assert!(SamplingGrid::with_spacing([[0.0, 1.0], [0.0, 1.0]], 0.0).is_err());
}

fn example3() -> &'static (RunConfig, Simulation) {
    static SIM: OnceLock<(RunConfig, Simulation)> = OnceLock::new();
    SIM.get_or_init(|| {
        let rc = RunConfig::from_toml(EXAMPLE3).unwrap();
        let sim = simulate(&rc.media, Variant::Perturbed, rc.solver.with_grid(132, 128)).unwrap();
        (rc, sim)
    })
}

fn coarse_options(rc: &RunConfig, spacing_in_wavelengths: f64) -> GlsmOptions {
    let mut s = rc.imaging.clone();
    s.sampling_res = spacing_in_wavelengths * rc.media.wave.wavelength();
    GlsmOptions::from_settings(&s).unwrap()
}

#[test]
fn indicator_is_positive_finite_and_order_independent() {
    let (rc, sim) = example3();
    let p = &rc.media.wave;
    let opts = coarse_options(rc, 0.1);
    let plus = add_noise(&sim.plus, 0.01, 1).unwrap();
    let map = image_side(p, &plus, &opts).unwrap();
    assert!(map.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(map.values.iter().any(|v| *v > 0.0));
    let sys = GlsmSystem::new(&plus, p, &opts).unwrap();
    let mut order: Vec<usize> = (0..map.values.len()).collect();
    let mut state = 5u64;
    for i in (1..order.len()).rev() {
        let j = (common::lcg(&mut state) * (i + 1) as f64) as usize;
        order.swap(i, j);
    }
    for &i in order.iter().take(200) {
        let (v, d) = sys.indicator_at(p, map.point(i));
        assert_eq!(v.to_bits(), map.values[i].to_bits());
        assert_eq!(d, map.diagnostics[i]);
    }
}

#[test]
fn image_needs_top_then_bottom() {
    let (rc, sim) = example3();
    let opts = coarse_options(rc, 0.2);
    assert!(image(&rc.media, &sim.minus, &sim.plus, &opts).is_err());
    let map = image(&rc.media, &sim.plus, &sim.minus, &opts).unwrap();
    let top = image_side(&rc.media.wave, &sim.plus, &opts).unwrap();
    let bottom = image_side(&rc.media.wave, &sim.minus, &opts).unwrap();
    for i in 0..map.values.len() {
        assert_eq!(map.values[i], top.values[i] + bottom.values[i]);
    }
}

#[test]
fn argmax_cell_is_seed_invariant() {
    let (rc, sim) = example3();
    let p = &rc.media.wave;
    let opts = coarse_options(rc, 0.05);
    let cells: Vec<i64> = [1u64, 2, 3]
        .iter()
        .map(|&seed| {
            let plus = add_noise(&sim.plus, 0.01, seed).unwrap();
            let minus = add_noise(&sim.minus, 0.01, seed).unwrap();
            let map = image(&rc.media, &plus, &minus, &opts).unwrap();
            period_cell(p, map.point(map.argmax().0)[0])
        })
        .collect();
    assert_eq!(cells, vec![0, 0, 0]);
}

#[test]
fn noiseless_map_ignores_the_seed() {
    let (rc, sim) = example3();
    let opts = coarse_options(rc, 0.2);
    let a = add_noise(&sim.plus, 0.0, 1).unwrap();
    let b = add_noise(&sim.plus, 0.0, 77).unwrap();
    assert_eq!(
        image_side(&rc.media.wave, &a, &opts).unwrap(),
        image_side(&rc.media.wave, &b, &opts).unwrap()
    );
}

#[test]
fn argmax_is_stable_under_sampling_refinement() {
    let (rc, sim) = example3();
    let coarse = coarse_options(rc, 0.05);
    let fine = coarse_options(rc, 0.025);
    let a = image(&rc.media, &sim.plus, &sim.minus, &coarse).unwrap();
    let b = image(&rc.media, &sim.plus, &sim.minus, &fine).unwrap();
    let (pa, pb) = (a.point(a.argmax().0), b.point(b.argmax().0));
    let step = coarse.sampling.step();
    assert!((pa[0] - pb[0]).abs() <= step[0] + 1e-12, "{pa:?} {pb:?}");
    assert!((pa[1] - pb[1]).abs() <= step[1] + 1e-12, "{pa:?} {pb:?}");
}

#[test]
fn points_outside_the_layer_are_dim() {
    let (rc, sim) = example3();
    let p = &rc.media.wave;
    let plus = add_noise(&sim.plus, 0.01, 1).unwrap();
    let minus = add_noise(&sim.minus, 0.01, 1).unwrap();
    let mut settings = rc.imaging.clone();
    let h = p.half_height();
    settings.extent[1] = [-1.5 * h, 1.5 * h];
    settings.sampling_res = 0.05 * p.wavelength();
    let map = image(&rc.media, &plus, &minus, &GlsmOptions::from_settings(&settings).unwrap()).unwrap();
    let omega = &rc.media.defect.as_ref().unwrap().region;
    let inside = map.mean_over(omega).unwrap();
    let outside = map.mean_where(|x| x[1].abs() > 1.2 * h).unwrap();
    assert!(outside < 0.5 * inside, "{outside} vs {inside}");
}

#[test]
fn defect_free_data_collapses_the_d_term() {
    let rc = RunConfig::from_toml(BACKGROUND).unwrap();
    let p = &rc.media.wave;
    let sim = simulate(&rc.media, Variant::Perturbed, rc.solver.with_grid(132, 128)).unwrap();
    let opts = coarse_options(&rc, 0.1);
    let regions = derived_regions(&rc.media);
    for data in [&sim.plus, &sim.minus] {
        let map = image_side(p, data, &opts).unwrap();
        for (i, d) in map.diagnostics.iter().enumerate() {
            if regions.d_hat_p.contains(map.point(i)) {
                assert!(d.d_term <= 1e-6 * d.cost_q, "{} vs {}", d.d_term, d.cost_q);
            }
        }
        let (_, max) = map.min_max();
        let ex = example3();
        assert_eq!(ex.0.media.wave, *p);
        let with_defect = image_side(p, if data.side == Side::Top { &ex.1.plus } else { &ex.1.minus }, &opts).unwrap();
        assert!(max < 1e-3 * with_defect.min_max().1, "{max} vs {}", with_defect.min_max().1);
    }
}
