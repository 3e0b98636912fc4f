//! Least-squares recovery of the products c_j h_j once the shifts are known,
//! waveform reconstruction and scoring against a known scene.

use bdsr_solver::faer::Mat;
use serde::Serialize;

use crate::model::{Scene, ShiftPair, Subspace};
use crate::{spectral, Result, C64};

/// L×(R·K) matrix; row p, block j is a(r_j)^H D̃_p.
pub fn build_ls_matrix(shifts: &[ShiftPair], sub: &Subspace) -> Result<Mat<C64>> {
    sub.validate()?;
    let n = sub.n();
    let k = sub.k;
    let atoms: Vec<_> = shifts.iter().map(|r| spectral::atom(*r, sub.l)).collect();
    let mut m = Mat::<C64>::zeros(sub.l, shifts.len() * k);
    for p in -n..=n {
        let dt = spectral::dtilde(p, sub)?;
        for (j, a) in atoms.iter().enumerate() {
            for (row, w) in dt.iter().zip(&a.v) {
                for (i, d) in row.iter().enumerate() {
                    m[((p + n) as usize, j * k + i)] += *w * d;
                }
            }
        }
    }
    Ok(m)
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat<C64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().map(|v| v.into_iter().collect()).unwrap_or_else(|_| vec![f64::NAN]);
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recovery {
    /// x_j = ĉ_j ĥ_j.
    pub products: Vec<Vec<C64>>,
    pub magnitudes: Vec<f64>,
    pub directions: Vec<Vec<C64>>,
    pub residual: f64,
    /// Smallest singular value of the least-squares matrix.
    pub condition: f64,
    pub rank: usize,
    pub rank_deficient: bool,
    /// More unknowns than samples.
    pub underdetermined: bool,
}

/// Minimum-norm least squares through the SVD pseudoinverse.
pub fn recover_products(y: &[C64], shifts: &[ShiftPair], sub: &Subspace) -> Result<Recovery> {
    let k = sub.k;
    if y.len() != sub.l {
        return Err(crate::Error::Dimension(format!("y has length {}, expected {}", y.len(), sub.l)));
    }
    let b = build_ls_matrix(shifts, sub)?;
    let cols = b.ncols();
    if cols == 0 {
        return Ok(Recovery {
            products: vec![],
            magnitudes: vec![],
            directions: vec![],
            residual: y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            condition: f64::INFINITY,
            rank: 0,
            rank_deficient: false,
            underdetermined: false,
        });
    }
    let svd = b.svd().map_err(|_| crate::Error::Singular(f64::INFINITY))?;
    let (u, v) = (svd.U(), svd.V());
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cut = smax * f64::EPSILON * sub.l.max(cols) as f64;
    let ns = s.len();
    let mut x = vec![C64::new(0.0, 0.0); cols];
    let mut rank = 0;
    for t in 0..ns {
        if s[t] <= cut {
            continue;
        }
        rank += 1;
        let coef: C64 = (0..sub.l).map(|p| u[(p, t)].conj() * y[p]).sum::<C64>() / s[t];
        for (c, xc) in x.iter_mut().enumerate() {
            *xc += v[(c, t)] * coef;
        }
    }
    let residual = (0..sub.l)
        .map(|p| ((0..cols).map(|c| b[(p, c)] * x[c]).sum::<C64>() - y[p]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let condition = if ns < cols { 0.0 } else { s.iter().copied().fold(f64::INFINITY, f64::min) };
    let products: Vec<Vec<C64>> = x.chunks(k).map(<[C64]>::to_vec).collect();
    let magnitudes: Vec<f64> = products.iter().map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let directions = products
        .iter()
        .zip(&magnitudes)
        .map(|(p, m)| if *m > 0.0 { p.iter().map(|z| z / m).collect() } else { p.clone() })
        .collect();
    Ok(Recovery {
        products,
        magnitudes,
        directions,
        residual,
        condition,
        rank,
        rank_deficient: rank < cols,
        underdetermined: cols > sub.l,
    })
}

/// ŝ_j = D ĥ_j.
pub fn reconstruct_waveforms(rec: &Recovery, sub: &Subspace) -> Vec<Vec<C64>> {
    rec.directions.iter().map(|h| sub.apply(h)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchReport {
    pub truth: usize,
    pub estimate: usize,
    pub true_shift: ShiftPair,
    pub estimated_shift: ShiftPair,
    /// Wrap-around errors per coordinate.
    pub tau_error: f64,
    pub f_error: f64,
    /// |h_j^H ĥ_j|, when a recovery is available.
    pub correlation: Option<f64>,
    /// RMS difference of |s_j(l)| and |ŝ_j(l)|.
    pub waveform_rmse: Option<f64>,
    pub gain_magnitude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub matches: Vec<MatchReport>,
    pub missed: usize,
    pub spurious: usize,
    pub max_shift_error: f64,
    pub min_correlation: Option<f64>,
    pub gate: f64,
}

/// Greedy matching by increasing ℓ∞ wrap distance; pairs farther apart than
/// `gate` stay unmatched.
pub fn score(
    scene: &Scene,
    estimate: &[ShiftPair],
    recovery: Option<&Recovery>,
    sub: &Subspace,
    gate: f64,
) -> Metrics {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (j, t) in scene.shifts.iter().enumerate() {
        for (i, e) in estimate.iter().enumerate() {
            let d = t.dist(e);
            if d <= gate {
                cand.push((d, j, i));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_t = vec![false; scene.r()];
    let mut used_e = vec![false; estimate.len()];
    let mut matches = Vec::new();
    for (_, j, i) in cand {
        if used_t[j] || used_e[i] {
            continue;
        }
        used_t[j] = true;
        used_e[i] = true;
        let (t, e) = (scene.shifts[j], estimate[i]);
        let h = &scene.orientations[j];
        let rec = recovery.filter(|r| i < r.directions.len());
        let correlation = rec.map(|r| r.directions[i].iter().zip(h).map(|(a, b)| b.conj() * a).sum::<C64>().norm());
        let waveform_rmse = rec.map(|r| {
            let s = sub.apply(h);
            let sh = sub.apply(&r.directions[i]);
            (s.iter().zip(&sh).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum::<f64>() / sub.l as f64).sqrt()
        });
        matches.push(MatchReport {
            truth: j,
            estimate: i,
            true_shift: t,
            estimated_shift: e,
            tau_error: crate::model::wrap_distance(t.tau, e.tau),
            f_error: crate::model::wrap_distance(t.f, e.f),
            correlation,
            waveform_rmse,
            gain_magnitude: rec.map(|r| r.magnitudes[i]),
        });
    }
    matches.sort_by_key(|m| m.truth);
    let max_shift_error = matches.iter().map(|m| m.tau_error.max(m.f_error)).fold(0.0, f64::max);
    let min_correlation = matches.iter().filter_map(|m| m.correlation).reduce(f64::min);
    Metrics {
        missed: scene.r() - matches.len(),
        spurious: estimate.len() - matches.len(),
        matches,
        max_shift_error,
        min_correlation,
        gate,
    }
}
