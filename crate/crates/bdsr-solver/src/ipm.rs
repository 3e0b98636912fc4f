//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector. Every Newton direction reduces all residuals of
//! the embedding by the same factor, so τ/κ classifies the outcome.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::cones::{jordan, matvec, soc_interior, sym_product, PsdScaling, SocScaling};
use crate::problem::{ConicProblem, PsdTerm};
use crate::SolverError;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_gap: 1e-8, tol_primal: 1e-8, tol_dual: 1e-8, max_iter: 200, step_fraction: 0.99 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.tol_gap > 0.0
            && self.tol_primal > 0.0
            && self.tol_dual > 0.0
            && self.max_iter >= 1
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::Options(format!("{self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIter,
    PrimalInfeasible,
    DualInfeasible,
    /// Scaling or factorisation broke down; the best iterate is returned.
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIter => "max_iter",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterLog {
    pub iter: usize,
    pub pobj: f64,
    pub dobj: f64,
    /// |pobj − dobj| / max(1, min(|pobj|, |dobj|))
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    /// Step length that produced this iterate (0 for the starting point).
    pub step: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    /// |r̂ₚᵀŷ| + |r̂_dᵀx̂| + |r̂_fᵀx̂_f|: bounds how far pobj − dobj may dip below zero.
    pub infeasibility_slack: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub status: Status,
    pub x_psd: Vec<Mat<f64>>,
    pub s_psd: Vec<Mat<f64>>,
    /// Second-order blocks followed by free variables.
    pub x_lin: Vec<f64>,
    pub s_soc: Vec<f64>,
    /// Multipliers of the original (unscaled) rows.
    pub y: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    pub iterations: usize,
    pub log: Vec<IterLog>,
}

impl SolverResult {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iter,gap,pres,dres,step\n");
        for l in &self.log {
            out.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", l.iter, l.gap, l.pres, l.dres, l.step));
        }
        out
    }
}

struct Block {
    n: usize,
    ent: Vec<(usize, Vec<(usize, usize, f64)>)>,
    u: Mat<f64>,
    uw: Vec<f64>,
    uown: Vec<usize>,
    c: Mat<f64>,
}

const REFINE_STEPS: usize = 3;

/// The Schur complement is dense m×m; 32768 rows is 8 GiB.
pub const MAX_ROWS: usize = 1 << 15;

struct Data {
    m: usize,
    blocks: Vec<Block>,
    soc_dims: Vec<usize>,
    soc_off: Vec<usize>,
    n_soc: usize,
    n_free: usize,
    alin: Mat<f64>,
    clin: Vec<f64>,
    b: Vec<f64>,
    rowscale: Vec<f64>,
    nu: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

fn axpy_mat(y: &mut Mat<f64>, a: f64, x: &Mat<f64>) {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] += a * x[(i, j)];
        }
    }
}

fn lin_comb(a: f64, x: &Mat<f64>, b: f64, y: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| a * x[(i, j)] + b * y[(i, j)])
}

fn sym_entries(n: usize, entries: &[(usize, usize, f64)], scale: f64) -> Mat<f64> {
    let mut c = Mat::<f64>::zeros(n, n);
    for &(a, b, v) in entries {
        if a == b {
            c[(a, a)] += scale * v;
        } else {
            c[(a, b)] += 0.5 * scale * v;
            c[(b, a)] += 0.5 * scale * v;
        }
    }
    c
}

impl Data {
    fn new(p: &ConicProblem) -> Result<Self, SolverError> {
        p.validate()?;
        let m = p.n_rows();
        if m > MAX_ROWS {
            return Err(SolverError::TooLarge { rows: m, limit: MAX_ROWS });
        }
        let n_lin = p.n_lin();
        let mut rowscale = vec![0.0; m];
        for (i, row) in p.rows.iter().enumerate() {
            let mut s2 = 0.0;
            for (_, term) in &row.psd {
                match term {
                    PsdTerm::Entries(e) => {
                        for &(a, b, v) in e {
                            s2 += if a == b { v * v } else { 0.5 * v * v };
                        }
                    }
                    PsdTerm::LowRank(lr) => {
                        for (ws, us) in lr {
                            for (wt, ut) in lr {
                                let d = dot(us, ut);
                                s2 += ws * wt * d * d;
                            }
                        }
                    }
                }
            }
            s2 += row.lin.iter().map(|(_, v)| v * v).sum::<f64>();
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(SolverError::Malformed(format!("row {i} is empty or not finite")));
            }
            rowscale[i] = 1.0 / s2.sqrt();
        }

        let mut blocks: Vec<Block> = p
            .psd_dims
            .iter()
            .zip(&p.c_psd)
            .map(|(&n, c)| Block {
                n,
                ent: Vec::new(),
                u: Mat::zeros(n, 0),
                uw: Vec::new(),
                uown: Vec::new(),
                c: sym_entries(n, c, 1.0),
            })
            .collect();
        let mut lr_vecs: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); blocks.len()];
        let mut alin = Mat::<f64>::zeros(m, n_lin);
        for (i, row) in p.rows.iter().enumerate() {
            let d = rowscale[i];
            for (blk, term) in &row.psd {
                let bl = &mut blocks[*blk];
                match term {
                    PsdTerm::Entries(e) => {
                        let mut es: Vec<(usize, usize, f64)> =
                            e.iter().map(|&(a, b, v)| (a.min(b), a.max(b), v * d)).collect();
                        es.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
                        bl.ent.push((i, es));
                    }
                    PsdTerm::LowRank(lr) => {
                        for (w, u) in lr {
                            bl.uw.push(w * d);
                            bl.uown.push(i);
                            lr_vecs[*blk].push(u);
                        }
                    }
                }
            }
            for &(j, v) in &row.lin {
                alin[(i, j)] += v * d;
            }
        }
        for (bl, vecs) in blocks.iter_mut().zip(&lr_vecs) {
            bl.u = Mat::from_fn(bl.n, vecs.len(), |r, c| vecs[c][r]);
        }
        let b = p.b.iter().zip(&rowscale).map(|(b, d)| b * d).collect();
        let n_soc = p.n_soc();
        Ok(Data {
            m,
            blocks,
            soc_dims: p.soc_dims.clone(),
            soc_off: p.soc_offsets(),
            n_soc,
            n_free: p.n_free,
            alin,
            clin: p.c_lin.clone(),
            b,
            rowscale,
            nu: p.degree() as f64,
        })
    }

    fn apply_a(&self, xs: &[Mat<f64>], xl: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..xl.len() {
                s += self.alin[(i, j)] * xl[j];
            }
            *o = s;
        }
        for (bl, x) in self.blocks.iter().zip(xs) {
            for (row, es) in &bl.ent {
                out[*row] += es.iter().map(|&(a, b, v)| v * x[(a, b)]).sum::<f64>();
            }
            if bl.u.ncols() > 0 {
                let xu = x * &bl.u;
                for s in 0..bl.u.ncols() {
                    let mut acc = 0.0;
                    for r in 0..bl.n {
                        acc += bl.u[(r, s)] * xu[(r, s)];
                    }
                    out[bl.uown[s]] += bl.uw[s] * acc;
                }
            }
        }
        out
    }

    fn apply_at(&self, y: &[f64]) -> (Vec<Mat<f64>>, Vec<f64>) {
        let mut mats = Vec::with_capacity(self.blocks.len());
        for bl in &self.blocks {
            let mut z = Mat::<f64>::zeros(bl.n, bl.n);
            for (row, es) in &bl.ent {
                let yr = y[*row];
                for &(a, b, v) in es {
                    if a == b {
                        z[(a, a)] += yr * v;
                    } else {
                        z[(a, b)] += 0.5 * yr * v;
                        z[(b, a)] += 0.5 * yr * v;
                    }
                }
            }
            if bl.u.ncols() > 0 {
                let scaled =
                    Mat::from_fn(bl.n, bl.u.ncols(), |r, s| bl.u[(r, s)] * bl.uw[s] * y[bl.uown[s]]);
                z += &scaled * bl.u.transpose();
            }
            mats.push(z);
        }
        let nl = self.alin.ncols();
        let lin = (0..nl).map(|j| (0..self.m).map(|i| self.alin[(i, j)] * y[i]).sum()).collect();
        (mats, lin)
    }

    fn schur(&self, ps: &[PsdScaling], ss: &[SocScaling]) -> Mat<f64> {
        let m = self.m;
        let mut mm = Mat::<f64>::zeros(m, m);
        for (bl, sc) in self.blocks.iter().zip(ps) {
            let w = &sc.wbar;
            for (p, (ri, ei)) in bl.ent.iter().enumerate() {
                for (rj, ej) in &bl.ent[p..] {
                    let mut acc = 0.0;
                    for &(a, b, v) in ei {
                        for &(c, d, u) in ej {
                            acc += v * u * 0.5 * (w[(a, c)] * w[(b, d)] + w[(a, d)] * w[(b, c)]);
                        }
                    }
                    mm[(*ri, *rj)] += acc;
                    if ri != rj {
                        mm[(*rj, *ri)] += acc;
                    }
                }
            }
            let t = bl.u.ncols();
            if t > 0 {
                let v = w * &bl.u;
                let pm = bl.u.transpose() * &v;
                for s in 0..t {
                    for q in 0..t {
                        let val = bl.uw[s] * bl.uw[q] * pm[(s, q)] * pm[(s, q)];
                        mm[(bl.uown[s], bl.uown[q])] += val;
                    }
                }
                for s in 0..t {
                    let rs = bl.uown[s];
                    for (rj, ej) in &bl.ent {
                        let mut acc = 0.0;
                        for &(c, d, u) in ej {
                            acc += u * v[(c, s)] * v[(d, s)];
                        }
                        let val = bl.uw[s] * acc;
                        mm[(rs, *rj)] += val;
                        mm[(*rj, rs)] += val;
                    }
                }
            }
        }
        for (k, sc) in ss.iter().enumerate() {
            let off = self.soc_off[k];
            let d = self.soc_dims[k];
            let rows: Vec<usize> =
                (0..m).filter(|&i| (0..d).any(|j| self.alin[(i, off + j)] != 0.0)).collect();
            let ah: Vec<Vec<f64>> = rows
                .iter()
                .map(|&i| {
                    (0..d)
                        .map(|c| (0..d).map(|j| self.alin[(i, off + j)] * sc.h[j][c]).sum())
                        .collect()
                })
                .collect();
            for (p, &i) in rows.iter().enumerate() {
                for &j in &rows {
                    let val: f64 = (0..d).map(|c| ah[p][c] * self.alin[(j, off + c)]).sum();
                    mm[(i, j)] += val;
                }
            }
        }
        mm
    }

    fn cost_dot(&self, xs: &[Mat<f64>], xl: &[f64]) -> f64 {
        self.blocks.iter().zip(xs).map(|(bl, x)| inner(&bl.c, x)).sum::<f64>() + dot(&self.clin, xl)
    }
}

/// Factorised reduced KKT system [[M, A_f], [A_fᵀ, 0]].
struct Kkt {
    /// Unregularised M, kept for refinement.
    m0: Mat<f64>,
    llt: faer::linalg::solvers::Llt<f64>,
    mf: Mat<f64>,
    sf: Option<faer::linalg::solvers::PartialPivLu<f64>>,
    af: Mat<f64>,
}

impl Kkt {
    fn new(m0: Mat<f64>, af: Mat<f64>) -> Option<Self> {
        let m = m0.nrows();
        let mut mm = m0.clone();
        let maxd = (0..m).map(|i| mm[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 0.0;
        let llt = loop {
            match mm.llt(Side::Lower) {
                Ok(l) => break l,
                Err(_) => {
                    let next = if reg == 0.0 { 1e-14 * maxd } else { reg * 100.0 };
                    if next > 1e-4 * maxd {
                        return None;
                    }
                    for i in 0..m {
                        mm[(i, i)] += next - reg;
                    }
                    reg = next;
                }
            }
        };
        if af.ncols() == 0 {
            return Some(Kkt { m0, llt, mf: Mat::zeros(m, 0), sf: None, af });
        }
        let mf = llt.solve(&af);
        let sf = af.transpose() * &mf;
        let sf = sf.partial_piv_lu();
        Some(Kkt { m0, llt, mf, sf: Some(sf), af })
    }

    /// [M y + A_f f; A_fᵀ y].
    fn apply(&self, y: &[f64], f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = y.len();
        let top = (0..m)
            .map(|i| {
                (0..m).map(|j| self.m0[(i, j)] * y[j]).sum::<f64>()
                    + (0..f.len()).map(|j| self.af[(i, j)] * f[j]).sum::<f64>()
            })
            .collect();
        let bot = (0..f.len()).map(|j| (0..m).map(|i| self.af[(i, j)] * y[i]).sum()).collect();
        (top, bot)
    }

    /// Factorised solve followed by iterative refinement against the unregularised system.
    fn solve_refined(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut y, mut f) = self.solve(r1, r2);
        let rhs_norm = (dot(r1, r1) + dot(r2, r2)).sqrt();
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let (t1, t2) = self.apply(&y, &f);
            let e1: Vec<f64> = r1.iter().zip(&t1).map(|(a, b)| a - b).collect();
            let e2: Vec<f64> = r2.iter().zip(&t2).map(|(a, b)| a - b).collect();
            let err = (dot(&e1, &e1) + dot(&e2, &e2)).sqrt();
            if !(err < 0.5 * last) || err <= 1e-15 * rhs_norm {
                break;
            }
            last = err;
            let (dy, df) = self.solve(&e1, &e2);
            y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
            f.iter_mut().zip(&df).for_each(|(a, b)| *a += b);
        }
        (y, f)
    }

    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = r1.len();
        let rhs = Mat::from_fn(m, 1, |i, _| r1[i]);
        let z = self.llt.solve(&rhs);
        match &self.sf {
            None => ((0..m).map(|i| z[(i, 0)]).collect(), Vec::new()),
            Some(sf) => {
                let nf = self.af.ncols();
                let t = Mat::from_fn(nf, 1, |j, _| {
                    (0..m).map(|i| self.af[(i, j)] * z[(i, 0)]).sum::<f64>() - r2[j]
                });
                let f = sf.solve(&t);
                let y = (0..m)
                    .map(|i| z[(i, 0)] - (0..nf).map(|j| self.mf[(i, j)] * f[(j, 0)]).sum::<f64>())
                    .collect();
                (y, (0..nf).map(|j| f[(j, 0)]).collect())
            }
        }
    }
}

#[derive(Clone)]
struct Point {
    xs: Vec<Mat<f64>>,
    ss: Vec<Mat<f64>>,
    xl: Vec<f64>,
    sl: Vec<f64>,
    y: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<Mat<f64>>,
    rd_soc: Vec<f64>,
    rf: Vec<f64>,
    rg: f64,
    mu: f64,
    pobj: f64,
    dobj: f64,
    pres: f64,
    dres: f64,
    gap: f64,
    slack: f64,
    aty: (Vec<Mat<f64>>, Vec<f64>),
    ax: Vec<f64>,
    cx: f64,
    by: f64,
}

struct Direction {
    dxs: Vec<Mat<f64>>,
    dss: Vec<Mat<f64>>,
    dxl: Vec<f64>,
    dsl: Vec<f64>,
    dy: Vec<f64>,
    dtau: f64,
    dkappa: f64,
    xt: Vec<Mat<f64>>,
    st: Vec<Mat<f64>>,
    xt_soc: Vec<Vec<f64>>,
    st_soc: Vec<Vec<f64>>,
}

/// Solution of the reduced system for the τ column, shared by both corrector passes.
struct TauColumn {
    y2: Vec<f64>,
    f2: Vec<f64>,
    chc: f64,
    g_minus_b: Vec<f64>,
}

struct Solver<'a> {
    d: &'a Data,
    bnorm: f64,
    cnorm: f64,
}

impl<'a> Solver<'a> {
    fn residuals(&self, pt: &Point) -> Residuals {
        let d = self.d;
        let ax = d.apply_a(&pt.xs, &pt.xl);
        let rp: Vec<f64> = d.b.iter().zip(&ax).map(|(b, a)| b * pt.tau - a).collect();
        let aty = d.apply_at(&pt.y);
        let rd: Vec<Mat<f64>> = d
            .blocks
            .iter()
            .enumerate()
            .map(|(k, bl)| {
                Mat::from_fn(bl.n, bl.n, |i, j| bl.c[(i, j)] * pt.tau - aty.0[k][(i, j)] - pt.ss[k][(i, j)])
            })
            .collect();
        let rd_soc: Vec<f64> = (0..d.n_soc).map(|j| d.clin[j] * pt.tau - aty.1[j] - pt.sl[j]).collect();
        let rf: Vec<f64> = (d.n_soc..d.n_soc + d.n_free).map(|j| d.clin[j] * pt.tau - aty.1[j]).collect();
        let cx = d.cost_dot(&pt.xs, &pt.xl);
        let by = dot(&d.b, &pt.y);
        let rg = pt.kappa + cx - by;
        let xs_dot: f64 = pt.xs.iter().zip(&pt.ss).map(|(x, s)| inner(x, s)).sum::<f64>()
            + dot(&pt.xl[..d.n_soc], &pt.sl);
        let mu = (xs_dot + pt.tau * pt.kappa) / (d.nu + 1.0);
        let t = pt.tau;
        let pobj = cx / t;
        let dobj = by / t;
        let rd_norm2: f64 = rd.iter().map(|r| inner(r, r)).sum::<f64>() + dot(&rd_soc, &rd_soc) + dot(&rf, &rf);
        let pres = norm(&rp) / t / (1.0 + self.bnorm);
        let dres = rd_norm2.sqrt() / t / (1.0 + self.cnorm);
        let gap = (pobj - dobj).abs() / pobj.abs().min(dobj.abs()).max(1.0);
        let slack = (dot(&rp, &pt.y).abs()
            + (rd.iter().zip(&pt.xs).map(|(r, x)| inner(r, x)).sum::<f64>()
                + dot(&rd_soc, &pt.xl[..d.n_soc]))
            .abs()
            + dot(&rf, &pt.xl[d.n_soc..]).abs())
            / (t * t);
        Residuals { rp, rd, rd_soc, rf, rg, mu, pobj, dobj, pres, dres, gap, slack, aty, ax, cx, by }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        pt: &Point,
        res: &Residuals,
        ps: &[PsdScaling],
        ss: &[SocScaling],
        kkt: &Kkt,
        tc: &TauColumn,
        eta: f64,
        rc: &[Mat<f64>],
        rc_soc: &[Vec<f64>],
        r_tk: f64,
    ) -> Direction {
        let d = self.d;
        let (y2, f2) = (&tc.y2, &tc.f2);
        let xi: Vec<Mat<f64>> = ps.iter().zip(rc).map(|(sc, r)| sc.lambda_solve(r)).collect();
        let t_psd: Vec<Mat<f64>> = ps
            .iter()
            .zip(&xi)
            .zip(&res.rd)
            .map(|((sc, x), rd)| lin_comb(1.0, &sc.expand(x), -eta, &sc.h(rd)))
            .collect();
        let mut xi_soc = Vec::new();
        let mut t_lin = vec![0.0; d.n_soc + d.n_free];
        for (k, sc) in ss.iter().enumerate() {
            let off = d.soc_off[k];
            let dim = d.soc_dims[k];
            let x = sc.lambda_solve(&rc_soc[k]);
            let wx = matvec(&sc.r, &x);
            let hr = matvec(&sc.h, &res.rd_soc[off..off + dim]);
            for j in 0..dim {
                t_lin[off + j] = wx[j] - eta * hr[j];
            }
            xi_soc.push(x);
        }
        let at = d.apply_a(&t_psd, &t_lin);
        let r1: Vec<f64> = res.rp.iter().zip(&at).map(|(p, a)| eta * p - a).collect();
        let r2: Vec<f64> = res.rf.iter().map(|f| eta * f).collect();
        let (y1, f1) = kkt.solve_refined(&r1, &r2);
        let gmb = &tc.g_minus_b;
        let cfree = &d.clin[d.n_soc..];
        let c_t = d.cost_dot(&t_psd, &t_lin);
        let den = dot(gmb, y2) + dot(cfree, f2) - tc.chc - pt.kappa / pt.tau;
        let num = -eta * res.rg - dot(gmb, &y1) - dot(cfree, &f1) - c_t - r_tk / pt.tau;
        let dtau = num / den;
        let dy: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a + dtau * b).collect();
        let dxf: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| a + dtau * b).collect();
        let (aty_psd, aty_lin) = d.apply_at(&dy);
        let dss: Vec<Mat<f64>> = d
            .blocks
            .iter()
            .enumerate()
            .map(|(k, bl)| {
                Mat::from_fn(bl.n, bl.n, |i, j| {
                    eta * res.rd[k][(i, j)] - aty_psd[k][(i, j)] + bl.c[(i, j)] * dtau
                })
            })
            .collect();
        let dsl: Vec<f64> =
            (0..d.n_soc).map(|j| eta * res.rd_soc[j] - aty_lin[j] + d.clin[j] * dtau).collect();
        let mut dxs = Vec::with_capacity(ps.len());
        let mut xt = Vec::with_capacity(ps.len());
        let mut st = Vec::with_capacity(ps.len());
        for ((sc, x), ds) in ps.iter().zip(&xi).zip(&dss) {
            dxs.push(lin_comb(1.0, &sc.expand(x), -1.0, &sc.h(ds)));
            let s_t = sc.contract(ds);
            xt.push(lin_comb(1.0, x, -1.0, &s_t));
            st.push(s_t);
        }
        let mut dxl = vec![0.0; d.n_soc + d.n_free];
        let mut xt_soc = Vec::new();
        let mut st_soc = Vec::new();
        for (k, sc) in ss.iter().enumerate() {
            let off = d.soc_off[k];
            let dim = d.soc_dims[k];
            let wx = matvec(&sc.r, &xi_soc[k]);
            let hs = matvec(&sc.h, &dsl[off..off + dim]);
            for j in 0..dim {
                dxl[off + j] = wx[j] - hs[j];
            }
            let s_t = matvec(&sc.r, &dsl[off..off + dim]);
            xt_soc.push(xi_soc[k].iter().zip(&s_t).map(|(a, b)| a - b).collect());
            st_soc.push(s_t);
        }
        dxl[d.n_soc..].copy_from_slice(&dxf);
        let dkappa = (r_tk - pt.kappa * dtau) / pt.tau;
        Direction { dxs, dss, dxl, dsl, dy, dtau, dkappa, xt, st, xt_soc, st_soc }
    }
}

fn step_to_boundary(pt: &Point, dir: &Direction, ps: &[PsdScaling], ss: &[SocScaling]) -> f64 {
    let mut a = f64::INFINITY;
    for (k, sc) in ps.iter().enumerate() {
        a = a.min(sc.max_step(&dir.xt[k])).min(sc.max_step(&dir.st[k]));
    }
    for (k, sc) in ss.iter().enumerate() {
        a = a.min(sc.max_step(&dir.xt_soc[k])).min(sc.max_step(&dir.st_soc[k]));
    }
    if dir.dtau < 0.0 {
        a = a.min(-pt.tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        a = a.min(-pt.kappa / dir.dkappa);
    }
    a
}

fn take_step(pt: &mut Point, dir: &Direction, alpha: f64) {
    for (x, dx) in pt.xs.iter_mut().zip(&dir.dxs) {
        axpy_mat(x, alpha, dx);
    }
    for (s, ds) in pt.ss.iter_mut().zip(&dir.dss) {
        axpy_mat(s, alpha, ds);
    }
    for (x, dx) in pt.xl.iter_mut().zip(&dir.dxl) {
        *x += alpha * dx;
    }
    for (s, ds) in pt.sl.iter_mut().zip(&dir.dsl) {
        *s += alpha * ds;
    }
    for (y, dy) in pt.y.iter_mut().zip(&dir.dy) {
        *y += alpha * dy;
    }
    pt.tau += alpha * dir.dtau;
    pt.kappa += alpha * dir.dkappa;
}

fn symmetrise(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn finish(
    d: &Data,
    pt: &Point,
    res: &Residuals,
    status: Status,
    iterations: usize,
    log: Vec<IterLog>,
) -> SolverResult {
    let t = pt.tau;
    let scale = |m: &Mat<f64>| Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / t);
    SolverResult {
        status,
        x_psd: pt.xs.iter().map(scale).collect(),
        s_psd: pt.ss.iter().map(scale).collect(),
        x_lin: pt.xl.iter().map(|v| v / t).collect(),
        s_soc: pt.sl.iter().map(|v| v / t).collect(),
        y: pt.y.iter().zip(&d.rowscale).map(|(y, s)| y * s / t).collect(),
        primal_obj: res.pobj,
        dual_obj: res.dobj,
        pres: res.pres,
        dres: res.dres,
        gap: res.gap,
        iterations,
        log,
    }
}

/// Solves the conic program. Deterministic for identical inputs and options.
pub fn solve_conic(p: &ConicProblem, opts: &SolverOptions) -> Result<SolverResult, SolverError> {
    opts.validate()?;
    let d = Data::new(p)?;
    let cnorm = {
        let c2: f64 = d.blocks.iter().map(|bl| inner(&bl.c, &bl.c)).sum::<f64>() + dot(&d.clin, &d.clin);
        c2.sqrt()
    };
    let solver = Solver { d: &d, bnorm: norm(&d.b), cnorm };

    let mut pt = Point {
        xs: d.blocks.iter().map(|bl| Mat::identity(bl.n, bl.n)).collect(),
        ss: d.blocks.iter().map(|bl| Mat::identity(bl.n, bl.n)).collect(),
        xl: vec![0.0; d.n_soc + d.n_free],
        sl: vec![0.0; d.n_soc],
        y: vec![0.0; d.m],
        tau: 1.0,
        kappa: 1.0,
    };
    for &off in &d.soc_off {
        pt.xl[off] = 1.0;
        pt.sl[off] = 1.0;
    }

    let mut log = Vec::new();
    let mut step = 0.0;
    let mut best: Option<(f64, Point)> = None;
    let merit = |r: &Residuals| {
        (r.pres / opts.tol_primal).max(r.dres / opts.tol_dual).max(r.gap / opts.tol_gap)
    };

    for iter in 0..=opts.max_iter {
        let res = solver.residuals(&pt);
        log.push(IterLog {
            iter,
            pobj: res.pobj,
            dobj: res.dobj,
            gap: res.gap,
            pres: res.pres,
            dres: res.dres,
            step,
            mu: res.mu,
            tau: pt.tau,
            kappa: pt.kappa,
            infeasibility_slack: res.slack,
        });
        let score = merit(&res);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, pt.clone()));
        }
        if res.pres <= opts.tol_primal && res.dres <= opts.tol_dual && res.gap <= opts.tol_gap {
            return Ok(finish(&d, &pt, &res, Status::Optimal, iter, log));
        }
        // infeasibility certificates from the homogeneous ray
        if pt.tau < pt.kappa {
            if res.by > 0.0 {
                let mut r2: f64 = res
                    .aty
                    .0
                    .iter()
                    .zip(&pt.ss)
                    .map(|(a, s)| {
                        let m = lin_comb(1.0, a, 1.0, s);
                        inner(&m, &m)
                    })
                    .sum();
                for j in 0..d.n_soc {
                    r2 += (res.aty.1[j] + pt.sl[j]).powi(2);
                }
                for j in d.n_soc..d.n_soc + d.n_free {
                    r2 += res.aty.1[j].powi(2);
                }
                if r2.sqrt() <= opts.tol_dual * res.by {
                    return Ok(finish(&d, &pt, &res, Status::PrimalInfeasible, iter, log));
                }
            }
            if res.cx < 0.0 && norm(&res.ax) <= opts.tol_primal * (-res.cx) {
                return Ok(finish(&d, &pt, &res, Status::DualInfeasible, iter, log));
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let ps: Option<Vec<PsdScaling>> =
            pt.xs.iter().zip(&pt.ss).map(|(x, s)| PsdScaling::new(x, s)).collect();
        let ss: Option<Vec<SocScaling>> = d
            .soc_off
            .iter()
            .zip(&d.soc_dims)
            .map(|(&o, &n)| SocScaling::new(&pt.xl[o..o + n], &pt.sl[o..o + n]))
            .collect();
        let (Some(ps), Some(ss)) = (ps, ss) else {
            return Ok(numerical_failure(&solver, &d, best, iter, log));
        };
        let af = Mat::from_fn(d.m, d.n_free, |i, j| d.alin[(i, d.n_soc + j)]);
        let mut mm = d.schur(&ps, &ss);
        symmetrise(&mut mm);
        let Some(kkt) = Kkt::new(mm, af) else {
            return Ok(numerical_failure(&solver, &d, best, iter, log));
        };
        // τ column: K [y2; f2] = [A H c + b; c_f]
        let hc_psd: Vec<Mat<f64>> = ps.iter().zip(&d.blocks).map(|(sc, bl)| sc.h(&bl.c)).collect();
        let mut hc_lin = vec![0.0; d.n_soc + d.n_free];
        for (k, sc) in ss.iter().enumerate() {
            let off = d.soc_off[k];
            let dim = d.soc_dims[k];
            let v = matvec(&sc.h, &d.clin[off..off + dim]);
            hc_lin[off..off + dim].copy_from_slice(&v);
        }
        let g = d.apply_a(&hc_psd, &hc_lin);
        let chc = d.cost_dot(&hc_psd, &hc_lin);
        let r1: Vec<f64> = g.iter().zip(&d.b).map(|(g, b)| g + b).collect();
        let (y2, f2) = kkt.solve_refined(&r1, &d.clin[d.n_soc..]);
        let tc = TauColumn { y2, f2, chc, g_minus_b: g.iter().zip(&d.b).map(|(g, b)| g - b).collect() };
        // predictor
        let rc_aff: Vec<Mat<f64>> = ps
            .iter()
            .map(|sc| {
                let n = sc.lambda.len();
                Mat::from_fn(n, n, |i, j| if i == j { -sc.lambda[i] * sc.lambda[i] } else { 0.0 })
            })
            .collect();
        let rc_soc_aff: Vec<Vec<f64>> =
            ss.iter().map(|sc| jordan(&sc.lambda, &sc.lambda).iter().map(|v| -v).collect()).collect();
        let aff = solver.direction(
            &pt, &res, &ps, &ss, &kkt, &tc, 1.0, &rc_aff, &rc_soc_aff, -pt.tau * pt.kappa,
        );
        let alpha_aff = step_to_boundary(&pt, &aff, &ps, &ss).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
        let smu = sigma * res.mu;

        // corrector
        let rc: Vec<Mat<f64>> = ps
            .iter()
            .enumerate()
            .map(|(k, sc)| {
                let n = sc.lambda.len();
                let corr = sym_product(&aff.xt[k], &aff.st[k]);
                Mat::from_fn(n, n, |i, j| {
                    let diag = if i == j { smu - sc.lambda[i] * sc.lambda[i] } else { 0.0 };
                    diag - corr[(i, j)]
                })
            })
            .collect();
        let rc_soc: Vec<Vec<f64>> = ss
            .iter()
            .enumerate()
            .map(|(k, sc)| {
                let ll = jordan(&sc.lambda, &sc.lambda);
                let corr = jordan(&aff.xt_soc[k], &aff.st_soc[k]);
                let mut r: Vec<f64> = ll.iter().zip(&corr).map(|(a, b)| -a - b).collect();
                r[0] += smu;
                r
            })
            .collect();
        let r_tk = smu - pt.tau * pt.kappa - aff.dtau * aff.dkappa;
        let dir = solver.direction(&pt, &res, &ps, &ss, &kkt, &tc, 1.0 - sigma, &rc, &rc_soc, r_tk);
        let alpha = (opts.step_fraction * step_to_boundary(&pt, &dir, &ps, &ss)).min(1.0);
        if !(alpha > 1e-12) || !dir.dtau.is_finite() {
            return Ok(numerical_failure(&solver, &d, best, iter, log));
        }
        take_step(&mut pt, &dir, alpha);
        for x in pt.xs.iter_mut().chain(pt.ss.iter_mut()) {
            symmetrise(x);
        }
        let soc_ok = d
            .soc_off
            .iter()
            .zip(&d.soc_dims)
            .all(|(&o, &n)| soc_interior(&pt.xl[o..o + n]) && soc_interior(&pt.sl[o..o + n]));
        if !soc_ok || pt.tau <= 0.0 || pt.kappa <= 0.0 {
            return Ok(numerical_failure(&solver, &d, best, iter, log));
        }
        step = alpha;
    }
    let (_, bp) = best.expect("at least one iterate");
    let res = solver.residuals(&bp);
    Ok(finish(&d, &bp, &res, Status::MaxIter, opts.max_iter, log))
}

fn numerical_failure(
    solver: &Solver<'_>,
    d: &Data,
    best: Option<(f64, Point)>,
    iter: usize,
    log: Vec<IterLog>,
) -> SolverResult {
    let (_, bp) = best.expect("at least one iterate");
    let res = solver.residuals(&bp);
    finish(d, &bp, &res, Status::NumericalFailure, iter, log)
}
