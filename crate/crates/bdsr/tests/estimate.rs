use bdsr::estimate::*;
use bdsr::model::*;
use bdsr::C64;

fn scene(sub: &Subspace, shifts: &[ShiftPair], seed: u64, gains: GainModel) -> Scene {
    random_scene(shifts.len(), sub.k, seed, gains).with_shifts(shifts.to_vec()).unwrap()
}

fn exp1_shifts() -> Vec<ShiftPair> {
    vec![ShiftPair::new(0.28, 0.53), ShiftPair::new(0.94, 0.42)]
}

#[test]
fn ls_matrix_is_full_rank_at_true_shifts() {
    let sub = random_subspace(19, 2, SubspaceKind::Gaussian, 1).unwrap();
    let b = build_ls_matrix(&exp1_shifts(), &sub).unwrap();
    assert_eq!((b.nrows(), b.ncols()), (19, 4));
    assert!(*singular_values(&b).last().unwrap() > 1e-3);
}

#[test]
fn zero_shift_rows_are_the_subspace_rows() {
    let sub = random_subspace(9, 3, SubspaceKind::Gaussian, 2).unwrap();
    let b = build_ls_matrix(&[ShiftPair::new(0.0, 0.0)], &sub).unwrap();
    for p in -4i64..=4 {
        for (i, d) in sub.row(p).iter().enumerate() {
            assert!((b[((p + 4) as usize, i)] - d).norm() < 1e-13);
        }
    }
}

#[test]
fn noiseless_recovery_is_exact() {
    let sub = random_subspace(19, 2, SubspaceKind::Gaussian, 3).unwrap();
    let sc = scene(&sub, &exp1_shifts(), 3, GainModel::Fading);
    let y = synthesize(&sc, &sub).unwrap().y;
    let rec = recover_products(&y, &sc.shifts, &sub).unwrap();
    let ynorm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!(rec.residual <= 1e-8 * ynorm);
    assert!(!rec.rank_deficient && !rec.underdetermined && rec.rank == 4);
    for j in 0..2 {
        let want: Vec<C64> = sc.orientations[j].iter().map(|h| sc.gains[j] * h).collect();
        assert!(rec.products[j].iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-10));
        assert!((rec.magnitudes[j] - sc.gains[j].norm()).abs() < 1e-10);
        let nrm: f64 = rec.directions[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((nrm - 1.0).abs() < 1e-12);
    }
    let m = score(&sc, &sc.shifts, Some(&rec), &sub, 0.05);
    assert!(m.min_correlation.unwrap() >= 1.0 - 1e-10);
    assert_eq!(m.max_shift_error, 0.0);
    assert_eq!((m.missed, m.spurious), (0, 0));
}

#[test]
fn consistent_system_recovers_x() {
    let sub = random_subspace(11, 2, SubspaceKind::UniformPm1, 4).unwrap();
    let shifts = [ShiftPair::new(0.1, 0.2), ShiftPair::new(0.6, 0.7)];
    let b = build_ls_matrix(&shifts, &sub).unwrap();
    let x = [C64::new(1.0, -2.0), C64::new(0.5, 0.0), C64::new(-0.3, 0.9), C64::new(0.0, 1.1)];
    let y: Vec<C64> = (0..11).map(|p| (0..4).map(|c| b[(p, c)] * x[c]).sum()).collect();
    let rec = recover_products(&y, &shifts, &sub).unwrap();
    let got: Vec<C64> = rec.products.concat();
    assert!(got.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-10));
}

#[test]
fn duplicate_shift_is_rank_deficient() {
    let sub = random_subspace(9, 2, SubspaceKind::Gaussian, 5).unwrap();
    let r = ShiftPair::new(0.3, 0.4);
    let b = build_ls_matrix(&[r, r], &sub).unwrap();
    assert!(*singular_values(&b).last().unwrap() < 1e-10);
    let y = synthesize(&scene(&sub, &[r], 5, GainModel::UnitModulus), &sub).unwrap().y;
    let rec = recover_products(&y, &[r, r], &sub).unwrap();
    assert!(rec.rank_deficient && rec.rank == 2);
    // the minimum-norm solution splits the product evenly
    assert!(rec.products[0].iter().zip(&rec.products[1]).all(|(a, b)| (a - b).norm() < 1e-10));
}

#[test]
fn underdetermined_systems_are_flagged() {
    let sub = random_subspace(5, 3, SubspaceKind::Gaussian, 6).unwrap();
    let shifts = [ShiftPair::new(0.1, 0.1), ShiftPair::new(0.6, 0.5)];
    let y = synthesize(&scene(&sub, &shifts, 6, GainModel::UnitModulus), &sub).unwrap().y;
    let rec = recover_products(&y, &shifts, &sub).unwrap();
    assert!(rec.underdetermined && rec.rank_deficient);
    assert_eq!(rec.condition, 0.0);
}

#[test]
fn block_permutation_permutes_products() {
    let sub = random_subspace(19, 2, SubspaceKind::Gaussian, 7).unwrap();
    let sc = scene(&sub, &exp1_shifts(), 7, GainModel::UnitModulus);
    let y = synthesize(&sc, &sub).unwrap().y;
    let a = recover_products(&y, &sc.shifts, &sub).unwrap();
    let rev: Vec<ShiftPair> = sc.shifts.iter().rev().copied().collect();
    let b = recover_products(&y, &rev, &sub).unwrap();
    for j in 0..2 {
        assert!(a.products[j].iter().zip(&b.products[1 - j]).all(|(x, y)| (x - y).norm() < 1e-10));
    }
}

#[test]
fn scoring_is_gauge_invariant() {
    let sub = random_subspace(9, 3, SubspaceKind::Gaussian, 8).unwrap();
    let sc = scene(&sub, &[ShiftPair::new(0.2, 0.3)], 8, GainModel::UnitModulus);
    let y = synthesize(&sc, &sub).unwrap().y;
    let rec = recover_products(&y, &sc.shifts, &sub).unwrap();
    let base = score(&sc, &sc.shifts, Some(&rec), &sub, 0.05);
    for k in 0..8 {
        let u = C64::from_polar(1.0, k as f64 * 0.9);
        let mut turned = rec.clone();
        turned.directions = rec.directions.iter().map(|h| h.iter().map(|z| z * u).collect()).collect();
        let m = score(&sc, &sc.shifts, Some(&turned), &sub, 0.05);
        let (c0, c1) = (base.matches[0].correlation.unwrap(), m.matches[0].correlation.unwrap());
        assert!((c0 - c1).abs() < 1e-14);
        let (w0, w1) = (base.matches[0].waveform_rmse.unwrap(), m.matches[0].waveform_rmse.unwrap());
        assert!((w0 - w1).abs() < 1e-14);
    }
}

#[test]
fn waveform_reconstruction() {
    let sub = random_subspace(9, 2, SubspaceKind::Gaussian, 9).unwrap();
    let sc = scene(&sub, &[ShiftPair::new(0.5, 0.5)], 9, GainModel::UnitModulus);
    let y = synthesize(&sc, &sub).unwrap().y;
    let mut rec = recover_products(&y, &sc.shifts, &sub).unwrap();
    let s = sub.apply(&sc.orientations[0]);
    let sh = &reconstruct_waveforms(&rec, &sub)[0];
    assert!(s.iter().zip(sh).all(|(a, b)| (a.norm() - b.norm()).abs() < 1e-10));
    rec.directions[0] = vec![C64::new(0.0, 0.0); 2];
    assert!(reconstruct_waveforms(&rec, &sub)[0].iter().all(|z| z.norm() == 0.0));
}

#[test]
fn score_counts_misses_and_spurious_peaks() {
    let sub = random_subspace(9, 1, SubspaceKind::Gaussian, 10).unwrap();
    let sc = scene(&sub, &exp1_shifts(), 10, GainModel::UnitModulus);
    let m = score(&sc, &[], None, &sub, 0.05);
    assert_eq!((m.missed, m.spurious, m.matches.len()), (2, 0, 0));
    let est = [ShiftPair::new(0.281, 0.529), ShiftPair::new(0.5, 0.5), ShiftPair::new(0.94, 0.42)];
    let m = score(&sc, &est, None, &sub, 0.05);
    assert_eq!((m.missed, m.spurious), (0, 1));
    assert!((m.max_shift_error - 0.001).abs() < 1e-12);
    assert!(m.min_correlation.is_none());
}
