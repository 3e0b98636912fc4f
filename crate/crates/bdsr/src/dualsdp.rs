//! The atomic-norm dual as a conic program.
//!
//! Complex Hermitian blocks are embedded as real symmetric matrices
//! `[[Re Z, −Im Z], [Im Z, Re Z]]`; a complex functional is the average of its
//! two real copies, so Re Z_ac = (X[a,c] + X[a+n,c+n])/2 and
//! Im Z_ac = (X[a+n,c] − X[a,c+n])/2.
//!
//! The PSD block is `[[Q, Q̂^H], [Q̂, I_K]]` with Q of size L² indexed by the pair
//! (p, k), p outer. Q is tied to the unit-trace Toeplitz structure either by the
//! Θ rows Tr(Θ_ñ Q) = δ_ñ or, by default, by the equivalent samples
//! ψ(θ)^H Q ψ(θ) = 1 on the (2L−1)² grid, which are an invertible recombination of
//! the Θ rows and have rank two in the embedding.

use std::f64::consts::TAU;

use bdsr_solver::faer::Mat;
use bdsr_solver::{solve_conic, ConicProblem, IterLog, PsdTerm, Row, SolverOptions, Status};
use serde::{Deserialize, Serialize};

use crate::model::{flat, half_width, LiftedMatrix, Scene, ShiftPair, Subspace};
use crate::{estimate, localize, spectral, Error, Result, C64};

/// y(p) = Tr(D̃_p U).
pub fn forward_operator(u: &LiftedMatrix, sub: &Subspace) -> Result<Vec<C64>> {
    if u.k != sub.k || u.l != sub.l || u.u.len() != sub.k * sub.l * sub.l {
        return Err(Error::Dimension("lifted matrix does not match the subspace".into()));
    }
    let n = sub.n();
    (-n..=n)
        .map(|p| {
            let dt = spectral::dtilde(p, sub)?;
            Ok(dt
                .iter()
                .enumerate()
                .map(|(r, row)| row.iter().enumerate().map(|(i, d)| d * u.at(i, r)).sum::<C64>())
                .sum())
        })
        .collect()
}

/// X*(q) = Σ_p q_p D̃_p^H.
pub fn adjoint_operator(q: &[C64], sub: &Subspace) -> Result<LiftedMatrix> {
    check_len(q, sub)?;
    let n = sub.n();
    let ll = sub.l * sub.l;
    let mut m = LiftedMatrix::zeros(sub.k, sub.l);
    for p in -n..=n {
        let qp = q[(p + n) as usize];
        if qp == C64::new(0.0, 0.0) {
            continue;
        }
        for (r, row) in spectral::dtilde(p, sub)?.iter().enumerate() {
            for (i, d) in row.iter().enumerate() {
                m.u[i * ll + r] += qp * d.conj();
            }
        }
    }
    Ok(m)
}

fn check_len(q: &[C64], sub: &Subspace) -> Result<()> {
    if q.len() != sub.l {
        return Err(Error::Dimension(format!("q has length {}, expected {}", q.len(), sub.l)));
    }
    Ok(())
}

/// G_p[i, k] = (1/L) Σ_l d_l[i] e^{i2πk(p−l)/L}, as a K×L array for each p.
fn g_tables(sub: &Subspace) -> Vec<Vec<C64>> {
    let n = sub.n();
    let l = sub.l as i64;
    let lf = l as f64;
    (-n..=n)
        .map(|p| {
            let mut g = vec![C64::new(0.0, 0.0); sub.k * sub.l];
            for k in -n..=n {
                for ll in -n..=n {
                    let ph = C64::from_polar(1.0 / lf, TAU * (k * (p - ll)).rem_euclid(l) as f64 / lf);
                    for (i, dh) in sub.row(ll).iter().enumerate() {
                        g[i * sub.l + (k + n) as usize] += dh.conj() * ph;
                    }
                }
            }
            g
        })
        .collect()
}

/// Q̂ with column (p, k) = (1/L) q_p Σ_l d_l e^{i2πk(p−l)/L}, flattened p outer.
pub fn build_qhat(q: &[C64], sub: &Subspace) -> Result<LiftedMatrix> {
    check_len(q, sub)?;
    let n = sub.n();
    let ll = sub.l * sub.l;
    let mut m = LiftedMatrix::zeros(sub.k, sub.l);
    for (pi, g) in g_tables(sub).iter().enumerate() {
        let p = pi as i64 - n;
        for i in 0..sub.k {
            for k in -n..=n {
                m.u[i * ll + flat(p, k, n)] = q[pi] * g[i * sub.l + (k + n) as usize];
            }
        }
    }
    Ok(m)
}

/// One Toeplitz functional T_ñ(Q) = Σ_{a−b=ñ} Q_ab on L²×L² matrices indexed by
/// pairs, with the difference taken per component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ThetaRow {
    pub n1: i64,
    pub n2: i64,
    pub target: i64,
}

impl ThetaRow {
    /// Σ_{a−b=ñ} Q_ab for a row-major complex L²×L² matrix.
    pub fn eval(&self, q: &[C64], l: usize) -> C64 {
        let n = (l as i64 - 1) / 2;
        let ll = l * l;
        let mut s = C64::new(0.0, 0.0);
        for (a1, b1) in diagonal(self.n1, n) {
            for (a2, b2) in diagonal(self.n2, n) {
                s += q[flat(a1, a2, n) * ll + flat(b1, b2, n)];
            }
        }
        s
    }
}

/// Pairs (a, b) in [−n, n]² with a − b = d.
fn diagonal(d: i64, n: i64) -> impl Iterator<Item = (i64, i64)> {
    (-n..=n).filter_map(move |a| {
        let b = a - d;
        (b.abs() <= n).then_some((a, b))
    })
}

/// All (2L−1)² functionals, ñ ∈ [−(L−1), L−1]², target 1 at ñ = 0.
pub fn theta_trace_rows(l: usize) -> Result<Vec<ThetaRow>> {
    half_width(l)?;
    let m = l as i64 - 1;
    let mut rows = Vec::with_capacity((2 * l - 1) * (2 * l - 1));
    for n1 in -m..=m {
        for n2 in -m..=m {
            rows.push(ThetaRow { n1, n2, target: (n1 == 0 && n2 == 0) as i64 });
        }
    }
    Ok(rows)
}

/// The rows that survive merging ñ with −ñ: ñ = 0 and the half plane
/// n1 > 0 or (n1 = 0, n2 > 0). Each contributes a real and an imaginary part.
pub fn independent_theta_rows(l: usize) -> Result<Vec<ThetaRow>> {
    Ok(theta_trace_rows(l)?
        .into_iter()
        .filter(|r| r.n1 > 0 || (r.n1 == 0 && r.n2 >= 0))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Exact,
    Noisy { zeta: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceForm {
    #[default]
    Sampled,
    Toeplitz,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssembleOptions {
    pub variant: Variant,
    pub trace_form: TraceForm,
    /// Add Q ⪰ 0 as its own block, linked entrywise to the bordered block.
    /// The bordered block already implies it.
    pub keep_redundant_q_cone: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions { variant: Variant::Exact, trace_form: TraceForm::Sampled, keep_redundant_q_cone: false }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RowCounts {
    pub trace: usize,
    pub identity: usize,
    pub coupling: usize,
    pub linking: usize,
}

/// Where the pieces of the dual live in the conic program.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Layout {
    pub l: usize,
    pub k: usize,
    /// Complex size L² + K of the bordered block.
    pub bordered: usize,
    /// Offsets of Re q_{−N} and Im q_{−N} in the linear variables.
    pub q_re: usize,
    pub q_im: usize,
    pub t: Option<usize>,
    pub rows: RowCounts,
}

#[derive(Clone, Debug)]
pub struct DualProblem {
    pub conic: ConicProblem,
    pub layout: Layout,
    pub options: AssembleOptions,
    pub y: Vec<C64>,
}

/// Real-embedding coefficients of Re Z_ac and Im Z_ac.
fn re_entry(a: usize, c: usize, n: usize, w: f64) -> [(usize, usize, f64); 2] {
    [(a, c, 0.5 * w), (a + n, c + n, 0.5 * w)]
}

fn im_entry(a: usize, c: usize, n: usize, w: f64) -> [(usize, usize, f64); 2] {
    [(a + n, c, 0.5 * w), (a, c + n, -0.5 * w)]
}

pub fn assemble(y: &[C64], sub: &Subspace, opts: AssembleOptions) -> Result<DualProblem> {
    sub.validate()?;
    check_len(y, sub)?;
    if let Variant::Noisy { zeta } = opts.variant {
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::Invalid(format!("ζ must be positive, got {zeta}")));
        }
    }
    let (l, k) = (sub.l, sub.k);
    let n = sub.n();
    let ll = l * l;
    let nb = ll + k;
    let mut rows: Vec<Row> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut counts = RowCounts::default();

    match opts.trace_form {
        TraceForm::Sampled => {
            let s = 2 * l - 1;
            for s1 in 0..s {
                for s2 in 0..s {
                    let (t1, t2) = (s1 as f64 / s as f64, s2 as f64 / s as f64);
                    let mut v1 = vec![0.0; 2 * nb];
                    let mut v2 = vec![0.0; 2 * nb];
                    for p in -n..=n {
                        for kk in -n..=n {
                            let z = C64::from_polar(1.0, -TAU * (p as f64 * t1 + kk as f64 * t2));
                            let a = flat(p, kk, n);
                            v1[a] = z.re;
                            v1[a + nb] = z.im;
                            v2[a] = -z.im;
                            v2[a + nb] = z.re;
                        }
                    }
                    rows.push(Row::low_rank(0, vec![(0.5, v1), (0.5, v2)]));
                    b.push(1.0);
                }
            }
        }
        TraceForm::Toeplitz => {
            for th in independent_theta_rows(l)? {
                let mut re = Vec::new();
                let mut im = Vec::new();
                for (a1, b1) in diagonal(th.n1, n) {
                    for (a2, b2) in diagonal(th.n2, n) {
                        let (a, c) = (flat(a1, a2, n), flat(b1, b2, n));
                        re.extend(re_entry(a, c, nb, 1.0));
                        if a != c {
                            im.extend(im_entry(a, c, nb, 1.0));
                        }
                    }
                }
                rows.push(Row::entries(0, re));
                b.push(th.target as f64);
                if th.n1 != 0 || th.n2 != 0 {
                    rows.push(Row::entries(0, im));
                    b.push(0.0);
                }
            }
        }
    }
    counts.trace = rows.len();

    for i in 0..k {
        for j in i..k {
            rows.push(Row::entries(0, re_entry(ll + i, ll + j, nb, 1.0).to_vec()));
            b.push((i == j) as u8 as f64);
            if i != j {
                rows.push(Row::entries(0, im_entry(ll + i, ll + j, nb, 1.0).to_vec()));
                b.push(0.0);
            }
        }
    }
    counts.identity = rows.len() - counts.trace;

    let (q_re, q_im, t, soc_dims, n_free) = match opts.variant {
        Variant::Exact => (0, l, None, vec![], 2 * l),
        Variant::Noisy { .. } => (1, 1 + l, Some(0), vec![2 * l + 1], 0),
    };
    // Z[L²+i, (p,k)] = q_p G_p[i,k]
    for (pi, g) in g_tables(sub).iter().enumerate() {
        let p = pi as i64 - n;
        for i in 0..k {
            for kk in -n..=n {
                let c = flat(p, kk, n);
                let gv = g[i * l + (kk + n) as usize];
                rows.push(
                    Row::entries(0, re_entry(ll + i, c, nb, 1.0).to_vec())
                        .with_lin(vec![(q_re + pi, -gv.re), (q_im + pi, gv.im)]),
                );
                rows.push(
                    Row::entries(0, im_entry(ll + i, c, nb, 1.0).to_vec())
                        .with_lin(vec![(q_re + pi, -gv.im), (q_im + pi, -gv.re)]),
                );
                b.extend([0.0, 0.0]);
            }
        }
    }
    counts.coupling = 2 * k * ll;

    let mut psd_dims = vec![2 * nb];
    if opts.keep_redundant_q_cone {
        psd_dims.push(2 * ll);
        for a in 0..ll {
            for c in a..ll {
                let re1 = re_entry(a, c, nb, 1.0).to_vec();
                let re2 = re_entry(a, c, ll, -1.0).to_vec();
                rows.push(Row { psd: vec![(0, PsdTerm::Entries(re1)), (1, PsdTerm::Entries(re2))], lin: vec![] });
                b.push(0.0);
                if a != c {
                    rows.push(Row {
                        psd: vec![
                            (0, PsdTerm::Entries(im_entry(a, c, nb, 1.0).to_vec())),
                            (1, PsdTerm::Entries(im_entry(a, c, ll, -1.0).to_vec())),
                        ],
                        lin: vec![],
                    });
                    b.push(0.0);
                }
            }
        }
        counts.linking = ll * ll;
    }

    let n_lin = 2 * l + t.map_or(0, |_| 1);
    let mut c_lin = vec![0.0; n_lin];
    for (pi, yp) in y.iter().enumerate() {
        c_lin[q_re + pi] = -yp.re;
        c_lin[q_im + pi] = -yp.im;
    }
    if let (Variant::Noisy { zeta }, Some(t)) = (opts.variant, t) {
        c_lin[t] = zeta;
    }
    let conic = ConicProblem {
        c_psd: vec![Vec::new(); psd_dims.len()],
        psd_dims,
        soc_dims,
        n_free,
        c_lin,
        rows,
        b,
    };
    conic.validate()?;
    Ok(DualProblem {
        conic,
        layout: Layout { l, k, bordered: nb, q_re, q_im, t, rows: counts },
        options: opts,
        y: y.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kkt {
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub q: Vec<C64>,
    /// ⟨q, y⟩_ℝ, minus ζ‖q‖₂ for the noisy variant.
    pub objective: f64,
    pub status: Status,
    pub kkt: Kkt,
    pub iterations: usize,
    pub log: Vec<IterLog>,
    pub log_csv: String,
    /// Recovered Q, row-major L²×L².
    pub q_matrix: Vec<C64>,
    /// Largest |Tr(Θ_ñ Q) − δ_ñ| over all (2L−1)² rows.
    pub trace_residual: f64,
}

/// Complex Hermitian Z of size n from its real embedding.
pub fn extract_hermitian(x: &Mat<f64>, n: usize) -> Vec<C64> {
    let mut z = vec![C64::new(0.0, 0.0); n * n];
    for a in 0..n {
        for c in 0..n {
            z[a * n + c] = C64::new(
                0.5 * (x[(a, c)] + x[(a + n, c + n)]),
                0.5 * (x[(a + n, c)] - x[(a, c + n)]),
            );
        }
    }
    z
}

/// `[[Re Z, −Im Z], [Im Z, Re Z]]`.
pub fn embed_hermitian(z: &[C64], n: usize) -> Mat<f64> {
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let v = z[(i % n) * n + (j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Default options for the dual SDP. Near the optimum the primal residual
/// floors at a few 1e−8 for L around 20, so its tolerance is 1e−7.
pub fn solver_options() -> SolverOptions {
    SolverOptions { tol_primal: 1e-7, ..SolverOptions::default() }
}

pub fn solve_dual(problem: &DualProblem, opts: &SolverOptions) -> Result<DualSolution> {
    let res = solve_conic(&problem.conic, opts)?;
    let lay = &problem.layout;
    let q: Vec<C64> =
        (0..lay.l).map(|p| C64::new(res.x_lin[lay.q_re + p], res.x_lin[lay.q_im + p])).collect();
    let z = extract_hermitian(&res.x_psd[0], lay.bordered);
    let ll = lay.l * lay.l;
    let mut qm = vec![C64::new(0.0, 0.0); ll * ll];
    for a in 0..ll {
        qm[a * ll..(a + 1) * ll].copy_from_slice(&z[a * lay.bordered..a * lay.bordered + ll]);
    }
    let trace_residual = theta_trace_rows(lay.l)?
        .iter()
        .map(|r| (r.eval(&qm, lay.l) - C64::new(r.target as f64, 0.0)).norm())
        .fold(0.0, f64::max);
    let inner: f64 = q.iter().zip(&problem.y).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
    let objective = match problem.options.variant {
        Variant::Exact => inner,
        Variant::Noisy { zeta } => inner - zeta * q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
    };
    Ok(DualSolution {
        q,
        objective,
        status: res.status,
        kkt: Kkt { pres: res.pres, dres: res.dres, gap: res.gap },
        iterations: res.iterations,
        log_csv: res.log_csv(),
        log: res.log,
        q_matrix: qm,
        trace_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop1Report {
    /// ‖f(r_j) − sign(c_j) h_j‖₂ per shift.
    pub interpolation_residuals: Vec<f64>,
    /// max ‖f(r)‖₂ over grid nodes farther than `exclusion` (ℓ∞, wrapped) from every shift.
    pub off_support_max: f64,
    pub exclusion: f64,
    /// Smallest singular value of the stacked least-squares matrix at the true shifts.
    pub sigma_min: f64,
    pub condition1: bool,
    pub condition2: bool,
}

/// Validate the uniqueness conditions against a known scene: interpolation at
/// the true shifts, the off-support bound on a `grid`×`grid` lattice and the
/// linear independence of the atoms.
pub fn check_prop1(
    q: &[C64],
    scene: &Scene,
    sub: &Subspace,
    grid: usize,
    exclusion: f64,
    tol: f64,
) -> Result<Prop1Report> {
    scene.validate(Some(sub.k))?;
    let poly = localize::build_polynomial(q, sub)?;
    let interpolation_residuals: Vec<f64> = scene
        .shifts
        .iter()
        .zip(scene.gains.iter().zip(&scene.orientations))
        .map(|(r, (c, h))| {
            let sign = c / c.norm();
            poly.eval(*r).iter().zip(h).map(|(f, h)| (f - sign * h).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect();
    let g = localize::eval_grid(&poly, grid)?;
    let mut off_support_max: f64 = 0.0;
    for a in 0..grid {
        for bb in 0..grid {
            let r = ShiftPair::new(a as f64 / grid as f64, bb as f64 / grid as f64);
            if scene.shifts.iter().all(|s| s.dist(&r) > exclusion) {
                off_support_max = off_support_max.max(g.data[a * grid + bb].sqrt());
            }
        }
    }
    let sigma_min = if scene.shifts.is_empty() {
        f64::INFINITY
    } else {
        let a = estimate::build_ls_matrix(&scene.shifts, sub)?;
        estimate::singular_values(&a).into_iter().fold(f64::INFINITY, f64::min)
    };
    let cond2_tol = 1e-8 * (sub.l as f64).sqrt();
    Ok(Prop1Report {
        condition1: interpolation_residuals.iter().all(|r| *r <= tol) && off_support_max < 1.0,
        condition2: sigma_min > cond2_tol,
        interpolation_residuals,
        off_support_max,
        exclusion,
        sigma_min,
    })
}
