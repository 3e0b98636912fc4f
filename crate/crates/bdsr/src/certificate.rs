//! Dual certificate built from random kernels, without an SDP.
//!
//! f(r) = Σ_j M_(0,0)(r, r_j) α_j + M_(1,0)(r, r_j) β_j + M_(0,1)(r, r_j) γ_j with
//! M^{(m',n')}_{(m,n)}(r, r_j) = (1/T²) Σ_p D̃_p^H a^{(m',n')}(r) z_p(r_j)^H D̃_p, the
//! coefficients chosen so that f interpolates sign(c_j) h_j with zero gradient at
//! every r_j.

use std::f64::consts::TAU;

use bdsr_solver::faer::linalg::solvers::Solve;
use bdsr_solver::faer::Mat;
use serde::Serialize;

use crate::localize::{self, DualPolynomial};
use crate::model::{flat, half_width, wrap_distance, Scene, ShiftPair, Subspace};
use crate::spectral::{self, FejerCoeffs};
use crate::{estimate, Error, Result, C64};

/// Radius separating the near and far regions around each shift, in units of 1/N.
pub const CLOSE_RADIUS: f64 = 0.2447;

/// Kernel family (m, n) and derivative order (m', n') of M^{(m',n')}_{(m,n)}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KernelIndex {
    pub m: u32,
    pub n: u32,
    pub dm: u32,
    pub dn: u32,
}

impl KernelIndex {
    pub fn new(m: u32, n: u32, dm: u32, dn: u32) -> Result<Self> {
        if m > 1 || n > 1 || dm + dn > 2 {
            return Err(Error::Invalid(format!("kernel index ({m},{n},{dm},{dn}) out of range")));
        }
        Ok(KernelIndex { m, n, dm, dn })
    }

    pub fn total(&self) -> u32 {
        self.m + self.n + self.dm + self.dn
    }
}

fn ipow(k: i64, m: u32) -> C64 {
    C64::new(0.0, TAU * k as f64).powu(m)
}

/// z_p(r_j)_(m,n), entry (k, l) = g_k (i2πk)^m g_p (i2πp)^n e^{i2πk(p+l)/L} e^{−i2π(kτ_j + pf_j)}.
pub fn kernel_z(p: i64, rj: ShiftPair, m: u32, n: u32, fc: &FejerCoeffs) -> Result<Vec<C64>> {
    let nn = fc.n;
    if p.abs() > nn || m > 1 || n > 1 {
        return Err(Error::Invalid(format!("kernel vector index p={p}, (m,n)=({m},{n}) out of range")));
    }
    let l = 2 * nn + 1;
    let lf = l as f64;
    let mut z = vec![C64::new(0.0, 0.0); (l * l) as usize];
    let pf = fc.get(p) * ipow(p, n);
    for k in -nn..=nn {
        let kf = fc.get(k) * ipow(k, m) * pf * C64::from_polar(1.0, -TAU * (k as f64 * rj.tau + p as f64 * rj.f));
        for ll in -nn..=nn {
            z[flat(k, ll, nn)] = kf * C64::from_polar(1.0, TAU * (k * (p + ll)).rem_euclid(l) as f64 / lf);
        }
    }
    Ok(z)
}

/// w_l = Σ_k e^{−i2πpk/L} v_(k, p−l), so that D̃_p^H v = D^H w.
fn fold(p: i64, v: &[C64], n: i64) -> Vec<C64> {
    let l = 2 * n + 1;
    (-n..=n)
        .map(|ll| {
            let lp = crate::model::wrap_index(p - ll, n);
            (-n..=n)
                .map(|k| C64::from_polar(1.0, -TAU * (p * k).rem_euclid(l) as f64 / l as f64) * v[flat(k, lp, n)])
                .sum()
        })
        .collect()
}

fn atom_c(r: ShiftPair, l: usize, dm: u32, dn: u32) -> Result<Vec<C64>> {
    Ok(spectral::atom_deriv(r, l, dm, dn)?.into_iter().map(|x| C64::new(x, 0.0)).collect())
}

fn scale(fc: &FejerCoeffs) -> f64 {
    1.0 / (fc.t * fc.t) as f64
}

/// M^{(m',n')}_{(m,n)}(r, r_j), K×K, straight from the D̃_p definition.
pub fn kernel_m(r: ShiftPair, rj: ShiftPair, idx: KernelIndex, sub: &Subspace, fc: &FejerCoeffs) -> Result<Mat<C64>> {
    let n = sub.n();
    check_fejer(fc, n)?;
    let a = atom_c(r, sub.l, idx.dm, idx.dn)?;
    let k = sub.k;
    let mut m = Mat::<C64>::zeros(k, k);
    for p in -n..=n {
        let dt = spectral::dtilde(p, sub)?;
        let z = kernel_z(p, rj, idx.m, idx.n, fc)?;
        let mut left = vec![C64::new(0.0, 0.0); k];
        let mut right = vec![C64::new(0.0, 0.0); k];
        for (row, (av, zv)) in dt.iter().zip(a.iter().zip(&z)) {
            for i in 0..k {
                left[i] += row[i].conj() * av;
                right[i] += zv.conj() * row[i];
            }
        }
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] += left[i] * right[j];
            }
        }
    }
    Ok(Mat::from_fn(k, k, |i, j| m[(i, j)] * scale(fc)))
}

/// L×L matrix R with D^H R D = M for every D; rows/columns indexed by l + N.
pub fn kernel_r(r: ShiftPair, rj: ShiftPair, idx: KernelIndex, l: usize, fc: &FejerCoeffs) -> Result<Mat<C64>> {
    let n = half_width(l)?;
    check_fejer(fc, n)?;
    let a = atom_c(r, l, idx.dm, idx.dn)?;
    let mut out = Mat::<C64>::zeros(l, l);
    for p in -n..=n {
        let w = fold(p, &a, n);
        let wt = fold(p, &kernel_z(p, rj, idx.m, idx.n, fc)?, n);
        for i in 0..l {
            for j in 0..l {
                out[(i, j)] += w[i] * wt[j].conj();
            }
        }
    }
    Ok(Mat::from_fn(l, l, |i, j| out[(i, j)] * scale(fc)))
}

fn check_fejer(fc: &FejerCoeffs, n: i64) -> Result<()> {
    if fc.n != n {
        return Err(Error::Dimension(format!("Fejér table built for N={}, subspace has N={n}", fc.n)));
    }
    Ok(())
}

/// Block rows are the constraints (value, ∂_τ, ∂_f); block columns the kernel
/// families (0,0), (1,0), (0,1); each block is R×R of K×K tiles.
const BLOCKS: [(u32, u32); 3] = [(0, 0), (1, 0), (0, 1)];

fn block_scale(row: usize, col: usize, mu: f64) -> f64 {
    let sign = if row == 0 { 1.0 } else { -1.0 };
    sign / mu.powi(((row > 0) as i32) + ((col > 0) as i32))
}

pub fn assemble_e(shifts: &[ShiftPair], sub: &Subspace, fc: &FejerCoeffs) -> Result<Mat<C64>> {
    let (r, k, n) = (shifts.len(), sub.k, sub.n());
    check_fejer(fc, n)?;
    let mu = spectral::mu(n);
    let folded = FoldedKernels::new(shifts, sub, fc)?;
    let mut e = Mat::<C64>::zeros(3 * r * k, 3 * r * k);
    for (bi, &(dm, dn)) in BLOCKS.iter().enumerate() {
        for (li, rl) in shifts.iter().enumerate() {
            let left = folded.left(*rl, dm, dn)?;
            for bj in 0..BLOCKS.len() {
                let s = block_scale(bi, bj, mu);
                for ki in 0..r {
                    let right = &folded.right[ki][bj];
                    let (r0, c0) = ((bi * r + li) * k, (bj * r + ki) * k);
                    for i in 0..k {
                        for j in 0..k {
                            let v: C64 = (0..sub.l).map(|p| left[p][i] * right[p][j]).sum();
                            e[(r0 + i, c0 + j)] = v * s * scale(fc);
                        }
                    }
                }
            }
        }
    }
    Ok(e)
}

/// Per-p factors of M: D̃_p^H a(r) = D^H w_p and z_p^H D̃_p = (D^H w̃_p)^H, so every
/// kernel matrix is (1/T²) Σ_p left_p right_p^T with K-vectors on each side.
struct FoldedKernels<'a> {
    sub: &'a Subspace,
    /// right[j][family][p + N]: z_p(r_j)_(m,n)^H D̃_p as a K-vector.
    right: Vec<Vec<Vec<Vec<C64>>>>,
}

impl<'a> FoldedKernels<'a> {
    fn new(shifts: &[ShiftPair], sub: &'a Subspace, fc: &FejerCoeffs) -> Result<Self> {
        let n = sub.n();
        let mut right = Vec::with_capacity(shifts.len());
        for rj in shifts {
            let mut fams = Vec::with_capacity(3);
            for &(m, nn) in &BLOCKS {
                let mut per_p = Vec::with_capacity(sub.l);
                for p in -n..=n {
                    let w = fold(p, &kernel_z(p, *rj, m, nn, fc)?, n);
                    per_p.push(dh_times(sub, &w, true));
                }
                fams.push(per_p);
            }
            right.push(fams);
        }
        Ok(FoldedKernels { sub, right })
    }

    /// left[p + N] = D̃_p^H a^{(dm,dn)}(r).
    fn left(&self, r: ShiftPair, dm: u32, dn: u32) -> Result<Vec<Vec<C64>>> {
        let n = self.sub.n();
        let a = atom_c(r, self.sub.l, dm, dn)?;
        Ok((-n..=n).map(|p| dh_times(self.sub, &fold(p, &a, n), false)).collect())
    }
}

/// D^H w, or its entrywise conjugate (w^H D) when `conj` is set.
fn dh_times(sub: &Subspace, w: &[C64], conj: bool) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); sub.k];
    for (row, wl) in sub.d.iter().zip(w) {
        for (o, d) in out.iter_mut().zip(row) {
            *o += if conj { wl.conj() * d } else { d.conj() * wl };
        }
    }
    out
}

/// Deterministic counterpart with entries F^{(a)}(Δτ) F^{(b)}(Δf); E[E] = Ē ⊗ I_K.
pub fn assemble_ebar(shifts: &[ShiftPair], fc: &FejerCoeffs) -> Result<Mat<f64>> {
    let r = shifts.len();
    let mu = spectral::mu(fc.n);
    let mut e = Mat::<f64>::zeros(3 * r, 3 * r);
    for (bi, &(dm, dn)) in BLOCKS.iter().enumerate() {
        for (bj, &(m, n)) in BLOCKS.iter().enumerate() {
            let s = block_scale(bi, bj, mu);
            for (li, rl) in shifts.iter().enumerate() {
                for (ki, rk) in shifts.iter().enumerate() {
                    let ft = spectral::fejer_eval(rl.tau - rk.tau, dm + m, fc)?;
                    let ff = spectral::fejer_eval(rl.f - rk.f, dn + n, fc)?;
                    e[(bi * r + li, bj * r + ki)] = s * ft * ff;
                }
            }
        }
    }
    Ok(e)
}

fn spectral_norm_real(a: &Mat<f64>) -> f64 {
    a.singular_values().map(|s| s.into_iter().fold(0.0, f64::max)).unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop3Margins {
    /// ‖I − Ē‖₂, to be compared with 0.19808.
    pub identity_gap: f64,
    /// ‖I − Ē‖∞ (maximum absolute row sum).
    pub identity_gap_inf: f64,
    pub norm: f64,
    /// ‖Ē⁻¹‖₂, to be compared with 1.2470.
    pub inverse_norm: f64,
}

pub fn prop3_margins(shifts: &[ShiftPair], fc: &FejerCoeffs) -> Result<Prop3Margins> {
    let e = assemble_ebar(shifts, fc)?;
    let d = Mat::from_fn(e.nrows(), e.ncols(), |i, j| (i == j) as u8 as f64 - e[(i, j)]);
    let identity_gap_inf = (0..d.nrows()).map(|i| (0..d.ncols()).map(|j| d[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
    let sv = e.singular_values().map_err(|_| Error::Singular(f64::INFINITY))?;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Prop3Margins {
        identity_gap: spectral_norm_real(&d),
        identity_gap_inf,
        norm: sv.iter().copied().fold(0.0, f64::max),
        inverse_norm: 1.0 / smin,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateResult {
    pub alpha: Vec<Vec<C64>>,
    pub beta: Vec<Vec<C64>>,
    pub gamma: Vec<Vec<C64>>,
    /// Equivalent dual vector q, so that f = Σ_p q_p D̃_p^H a(r).
    pub q: Vec<C64>,
    pub interpolation_residuals: Vec<f64>,
    /// max(‖f^(1,0)(r_j)‖₂, ‖f^(0,1)(r_j)‖₂) per shift.
    pub stationarity_residuals: Vec<f64>,
    pub grid: usize,
    /// sup ‖f‖₂ over grid nodes at distance ≥ 0.2447/N from every shift.
    pub sup_far: f64,
    /// sup ‖f‖₂ over grid nodes strictly inside that radius, shifts excluded.
    pub sup_close: f64,
    pub close_radius: f64,
    pub e_condition: f64,
    pub e_identity_gap: f64,
    pub e_inverse_norm: f64,
    pub prop3: Prop3Margins,
}

impl CertificateResult {
    pub fn off_support_sup(&self) -> f64 {
        self.sup_far.max(self.sup_close)
    }
}

/// Solve E [α; μβ; μγ] = [sign(c) h; 0; 0] and validate the resulting polynomial
/// on a `grid`×`grid` lattice. Requires even N.
pub fn build_certificate(scene: &Scene, sub: &Subspace, grid: usize) -> Result<CertificateResult> {
    let n = sub.n();
    if n % 2 != 0 {
        return Err(Error::Invalid(format!("certificate needs even N, got N={n}")));
    }
    scene.validate(Some(sub.k))?;
    if scene.gains.iter().any(|c| c.norm() <= 1e-12) {
        return Err(Error::Invalid("gain magnitudes must exceed 1e-12".into()));
    }
    let fc = spectral::fejer_coeffs(n);
    let (r, k) = (scene.r(), sub.k);
    let mu = spectral::mu(n);
    let e = assemble_e(&scene.shifts, sub, &fc)?;
    let sv = estimate::singular_values(&e);
    let (smax, smin) = (sv.first().copied().unwrap_or(0.0), sv.last().copied().unwrap_or(0.0));
    let e_condition = smax / smin;
    if !(smin > smax * 1e-13) {
        return Err(Error::Singular(e_condition));
    }
    let mut rhs = Mat::<C64>::zeros(3 * r * k, 1);
    for (j, (c, h)) in scene.gains.iter().zip(&scene.orientations).enumerate() {
        for i in 0..k {
            rhs[(j * k + i, 0)] = c / c.norm() * h[i];
        }
    }
    let x = e.partial_piv_lu().solve(&rhs);
    let tile = |b: usize, j: usize, s: f64| (0..k).map(|i| x[((b * r + j) * k + i, 0)] * s).collect::<Vec<C64>>();
    let alpha: Vec<Vec<C64>> = (0..r).map(|j| tile(0, j, 1.0)).collect();
    let beta: Vec<Vec<C64>> = (0..r).map(|j| tile(1, j, 1.0 / mu)).collect();
    let gamma: Vec<Vec<C64>> = (0..r).map(|j| tile(2, j, 1.0 / mu)).collect();

    // q_p = (1/T²) Σ_j z_{00}^H D̃_p α_j + z_{10}^H D̃_p β_j + z_{01}^H D̃_p γ_j
    let folded = FoldedKernels::new(&scene.shifts, sub, &fc)?;
    let mut q = vec![C64::new(0.0, 0.0); sub.l];
    for (pi, qp) in q.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..r {
            for (fam, coef) in folded.right[j].iter().zip([&alpha[j], &beta[j], &gamma[j]]) {
                acc += fam[pi].iter().zip(coef).map(|(a, c)| a * c).sum::<C64>();
            }
        }
        *qp = acc * scale(&fc);
    }

    let poly = localize::build_polynomial(&q, sub)?;
    let vec_norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut interpolation_residuals = Vec::with_capacity(r);
    let mut stationarity_residuals = Vec::with_capacity(r);
    for (j, rj) in scene.shifts.iter().enumerate() {
        let sign = scene.gains[j] / scene.gains[j].norm();
        let f = poly.eval(*rj);
        interpolation_residuals
            .push(vec_norm(&f.iter().zip(&scene.orientations[j]).map(|(a, h)| a - sign * h).collect::<Vec<_>>()));
        let dt = vec_norm(&eval_deriv(&poly, *rj, 1, 0));
        let df = vec_norm(&eval_deriv(&poly, *rj, 0, 1));
        stationarity_residuals.push(dt.max(df));
    }

    let g = localize::eval_grid(&poly, grid)?;
    let close_radius = CLOSE_RADIUS / n as f64;
    let (mut sup_far, mut sup_close) = (0.0f64, 0.0f64);
    for (idx, v) in g.data.iter().enumerate() {
        let node = g.node(idx);
        let d = scene.shifts.iter().map(|s| s.dist(&node)).fold(f64::INFINITY, f64::min);
        if d >= close_radius {
            sup_far = sup_far.max(v.sqrt());
        } else if d > 0.0 {
            sup_close = sup_close.max(v.sqrt());
        }
    }

    let ident_gap = {
        let d = Mat::from_fn(e.nrows(), e.ncols(), |i, j| C64::new((i == j) as u8 as f64, 0.0) - e[(i, j)]);
        estimate::singular_values(&d).first().copied().unwrap_or(0.0)
    };
    Ok(CertificateResult {
        alpha,
        beta,
        gamma,
        q,
        interpolation_residuals,
        stationarity_residuals,
        grid,
        sup_far,
        sup_close,
        close_radius,
        e_condition,
        e_identity_gap: ident_gap,
        e_inverse_norm: 1.0 / smin,
        prop3: prop3_margins(&scene.shifts, &fc)?,
    })
}

/// ∂_τ^a ∂_f^b f(r) from the coefficient tensor.
pub fn eval_deriv(poly: &DualPolynomial, r: ShiftPair, a: u32, b: u32) -> Vec<C64> {
    let n = poly.n();
    let ll = poly.l * poly.l;
    let mut out = vec![C64::new(0.0, 0.0); poly.k];
    for p in -n..=n {
        for k in -n..=n {
            let w = C64::new(0.0, -TAU * k as f64).powu(a)
                * C64::new(0.0, -TAU * p as f64).powu(b)
                * C64::from_polar(1.0, -TAU * (k as f64 * r.tau + p as f64 * r.f));
            let col = flat(p, k, n);
            for (i, o) in out.iter_mut().enumerate() {
                *o += poly.coeff[i * ll + col] * w;
            }
        }
    }
    out
}

/// Wrap-around ℓ∞ distance of `r` to the nearest shift.
pub fn nearest_distance(r: ShiftPair, shifts: &[ShiftPair]) -> f64 {
    shifts
        .iter()
        .map(|s| wrap_distance(s.tau, r.tau).max(wrap_distance(s.f, r.f)))
        .fold(f64::INFINITY, f64::min)
}
