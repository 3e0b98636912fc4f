use bdsr::dualsdp::forward_operator;
use bdsr::estimate::singular_values;
use bdsr::model::*;
use bdsr::{rng, C64};
use bdsr_solver::faer::Mat;
use proptest::prelude::*;
use rand::Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn instance(l: usize, k: usize, r: usize, seed: u64) -> (Subspace, Scene) {
    let sub = random_subspace(l, k, SubspaceKind::Gaussian, seed).unwrap();
    let mut scene = random_scene(r, k, seed, GainModel::Fading);
    // arbitrary, possibly unseparated shifts: the identities hold regardless
    let mut g = rng::stream(seed, rng::Stream::Trial);
    scene.shifts = (0..r).map(|_| ShiftPair::new(g.random(), g.random())).collect();
    (sub, scene)
}

#[test]
fn wrap_distance_examples() {
    assert_eq!(wrap_distance(0.75, 0.5), 0.25);
    assert_eq!(wrap_distance(0.0, 0.75), 0.25);
    assert_eq!(wrap_distance(0.37, 0.37), 0.0);
    assert!((wrap_distance(1.2, 0.1) - 0.1).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn wrap_distance_is_a_torus_metric(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -3.0f64..3.0) {
        let dab = wrap_distance(a, b);
        prop_assert!((0.0..=0.5).contains(&dab));
        prop_assert_eq!(dab, wrap_distance(b, a));
        prop_assert!(dab <= wrap_distance(a, x) + wrap_distance(x, b) + 1e-12);
        prop_assert!(wrap_distance(a, a + 2.0) < 1e-12);
    }
}

proptest! {
    #[test]
    fn shift_pairs_are_reduced(t in -10.0f64..10.0, f in -10.0f64..10.0) {
        let s = ShiftPair::new(t, f);
        prop_assert!((0.0..1.0).contains(&s.tau) && (0.0..1.0).contains(&s.f));
        prop_assert!(s.dist(&ShiftPair::new(t + 1.0, f - 3.0)) < 1e-12);
    }

    #[test]
    fn flat_index_round_trip(n in 0i64..12, seed in any::<u64>()) {
        let l = (2 * n + 1) as usize;
        let idx = (seed % (l * l) as u64) as usize;
        let (k, ll) = unflat(idx, n);
        prop_assert!(k.abs() <= n && ll.abs() <= n);
        prop_assert_eq!(flat(k, ll, n), idx);
    }
}

#[test]
fn separation_examples() {
    let s = [ShiftPair::new(0.28, 0.53), ShiftPair::new(0.94, 0.42)];
    let sep = check_separation(&s, 9);
    assert!((sep.delta_min - 0.34).abs() < 1e-12);
    assert!(sep.ok);
    let one = check_separation(&s[..1], 9);
    assert!(one.ok && one.delta_min.is_infinite());
    let dup = check_separation(&[s[0], s[0]], 9);
    assert!(!dup.ok && dup.delta_min == 0.0);
}

#[test]
fn sampled_shifts_are_separated_and_reproducible() {
    let a = sample_separated_shifts(3, 10, 7).unwrap();
    assert_eq!(a, sample_separated_shifts(3, 10, 7).unwrap());
    assert!(check_separation(&a, 10).ok);
    // 40 shifts at 2.38/N = 0.79 cannot fit on the torus
    assert!(matches!(sample_separated_shifts(40, 3, 1), Err(bdsr::Error::Separation(_))));
}

#[test]
fn subspace_generators() {
    let g = random_subspace(19, 2, SubspaceKind::Gaussian, 3).unwrap();
    assert_eq!((g.l, g.k, g.d.len()), (19, 2, 19));
    let f = random_subspace(21, 3, SubspaceKind::FourierRows, 3).unwrap();
    assert!(f.d.iter().flatten().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    assert!(f.d.iter().all(|row| row[0] == c(1.0, 0.0)));
    let u = random_subspace(21, 1, SubspaceKind::UniformPm1, 3).unwrap();
    assert!(u.d.iter().flatten().all(|z| z.re.abs() <= 1.0 && z.im.abs() <= 1.0));
    assert_eq!(g, random_subspace(19, 2, SubspaceKind::Gaussian, 3).unwrap());
    assert_ne!(g, random_subspace(19, 2, SubspaceKind::Gaussian, 4).unwrap());
}

#[test]
fn gaussian_column_covariance_approaches_identity() {
    let l = 513;
    for k in [1usize, 2, 4, 8] {
        let sub = random_subspace(l, k, SubspaceKind::Gaussian, 11).unwrap();
        let mut cov = Mat::<C64>::zeros(k, k);
        for row in &sub.d {
            // row is d_l^H, so d_l d_l^H has entries conj(row_i) row_j
            for i in 0..k {
                for j in 0..k {
                    cov[(i, j)] += row[i].conj() * row[j] / l as f64;
                }
            }
        }
        for i in 0..k {
            cov[(i, i)] -= c(1.0, 0.0);
        }
        let dev = singular_values(&cov)[0];
        assert!(dev <= 4.0 * (k as f64 / l as f64).sqrt(), "K={k}: deviation {dev}");
    }
}

#[test]
fn scene_generators() {
    let s = random_scene(2, 2, 5, GainModel::UnitModulus);
    assert!(s.gains.iter().all(|g| (g.norm() - 1.0).abs() < 1e-15));
    for seed in 0..50 {
        let f = random_scene(1, 3, seed, GainModel::Fading);
        assert!(f.gains[0].re.abs() >= 0.5 && f.gains[0].im.abs() >= 0.5);
        let nrm: f64 = f.orientations[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((nrm - 1.0).abs() < 1e-12);
    }
    assert!(s.validate(Some(2)).is_ok());
    assert!(s.validate(Some(3)).is_err());
}

#[test]
fn empty_scene_synthesizes_zero() {
    let sub = random_subspace(7, 2, SubspaceKind::Gaussian, 1).unwrap();
    let scene = random_scene(0, 2, 1, GainModel::UnitModulus);
    assert!(synthesize(&scene, &sub).unwrap().y.iter().all(|z| *z == c(0.0, 0.0)));
    assert!(synthesize_direct(&scene, &sub).unwrap().y.iter().all(|z| *z == c(0.0, 0.0)));
    assert!(lift(&scene, 2, 7).unwrap().u.iter().all(|z| *z == c(0.0, 0.0)));
}

fn single(sub: &Subspace, r: ShiftPair, seed: u64) -> Scene {
    let mut s = random_scene(1, sub.k, seed, GainModel::UnitModulus);
    s.gains[0] = c(1.0, 0.0);
    s.shifts[0] = r;
    s
}

#[test]
fn zero_shift_reproduces_the_waveform() {
    let sub = random_subspace(9, 3, SubspaceKind::Gaussian, 2).unwrap();
    let scene = single(&sub, ShiftPair::new(0.0, 0.0), 2);
    let s = sub.apply(&scene.orientations[0]);
    for y in [synthesize(&scene, &sub).unwrap().y, synthesize_direct(&scene, &sub).unwrap().y] {
        assert!(max_diff(&y, &s) < 1e-12);
    }
}

#[test]
fn grid_delay_is_a_circular_shift() {
    let sub = random_subspace(11, 2, SubspaceKind::Gaussian, 4).unwrap();
    let n = sub.n();
    for m in -n..=n {
        let scene = single(&sub, ShiftPair::new(m as f64 / 11.0, 0.0), 4);
        let s = sub.apply(&scene.orientations[0]);
        let y = synthesize(&scene, &sub).unwrap().y;
        for p in -n..=n {
            let want = s[(wrap_index(p - m, n) + n) as usize];
            assert!((y[(p + n) as usize] - want).norm() < 1e-12, "m={m} p={p}");
        }
    }
}

#[test]
fn both_synthesis_routes_agree() {
    for t in 0..100u64 {
        let l = [3usize, 5, 7, 9, 11][(t % 5) as usize];
        let k = 1 + (t as usize % 3).min(l - 1);
        let (sub, scene) = instance(l, k, 1 + (t % 4) as usize, t);
        let a = synthesize(&scene, &sub).unwrap().y;
        let b = synthesize_direct(&scene, &sub).unwrap().y;
        assert!(max_diff(&a, &b) <= 1e-10 * max_abs(&a), "instance {t}");
    }
}

#[test]
fn lifted_matrix_reproduces_the_observation() {
    for t in 0..20u64 {
        let (sub, scene) = instance(7, 2, 1 + (t % 3) as usize, t);
        let u = lift(&scene, sub.k, sub.l).unwrap();
        let y = forward_operator(&u, &sub).unwrap();
        assert!(max_diff(&y, &synthesize(&scene, &sub).unwrap().y) < 1e-12);
    }
}

#[test]
fn single_shift_lift_has_rank_one() {
    let (sub, scene) = instance(7, 3, 1, 9);
    let u = lift(&scene, sub.k, sub.l).unwrap();
    let m = Mat::from_fn(sub.k, 49, |i, j| u.at(i, j));
    let s = singular_values(&m);
    assert!((s[0] - scene.gains[0].norm()).abs() < 1e-12);
    assert!(s[1] < 1e-12 && s[2] < 1e-12);
}

#[test]
fn dimension_errors() {
    let sub = random_subspace(7, 2, SubspaceKind::Gaussian, 1).unwrap();
    let scene = random_scene(1, 3, 1, GainModel::UnitModulus);
    assert!(synthesize(&scene, &sub).is_err());
    assert!(synthesize_direct(&scene, &sub).is_err());
    assert!(lift(&scene, 3, 8).is_err());
    assert!(Subspace::new(vec![vec![c(1.0, 0.0)]; 4], SubspaceKind::Custom).is_err());
}

#[test]
fn awgn_hits_the_target_snr() {
    let (sub, scene) = instance(15, 3, 1, 3);
    let y = synthesize(&scene, &sub).unwrap().y;
    for snr in [-5.0, 0.0, 10.0, 30.0] {
        let w = awgn(&y, snr, 8);
        let py: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        let pw: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        assert!((10.0 * (py / pw).log10() - snr).abs() < 0.01);
    }
    assert_eq!(awgn(&y, 10.0, 8), awgn(&y, 10.0, 8));
}

#[test]
fn shift_pairs_serialise_as_pairs() {
    let s = ShiftPair::new(0.25, 0.5);
    assert_eq!(serde_json::to_string(&s).unwrap(), "[0.25,0.5]");
    let back: ShiftPair = serde_json::from_str("[1.25,-0.5]").unwrap();
    assert_eq!(back, s);
    assert!(serde_json::from_str::<ShiftPair>("[1e999,0]").is_err());
}
