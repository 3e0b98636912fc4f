//! The dual vector polynomial, its norm on a fine grid and peak extraction.

use std::f64::consts::TAU;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dualsdp::build_qhat;
use crate::model::{flat, ShiftPair, Subspace};
use crate::{Error, Result, C64};

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_THRESHOLD: f64 = 1.0 - 1e-3;

/// f(r) = Σ_{p,k} c_{p,k} e^{−i2π(kτ + pf)}; entry (i, p, k) at
/// `i·L² + (p+N)·L + (k+N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPolynomial {
    pub k: usize,
    pub l: usize,
    pub coeff: Vec<C64>,
}

pub fn build_polynomial(q: &[C64], sub: &Subspace) -> Result<DualPolynomial> {
    let m = build_qhat(q, sub)?;
    Ok(DualPolynomial { k: m.k, l: m.l, coeff: m.u })
}

impl DualPolynomial {
    pub fn n(&self) -> i64 {
        (self.l as i64 - 1) / 2
    }

    pub fn eval(&self, r: ShiftPair) -> Vec<C64> {
        let n = self.n();
        let ll = self.l * self.l;
        let mut out = vec![C64::new(0.0, 0.0); self.k];
        for p in -n..=n {
            for k in -n..=n {
                let e = C64::from_polar(1.0, -TAU * (k as f64 * r.tau + p as f64 * r.f));
                let col = flat(p, k, n);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += self.coeff[i * ll + col] * e;
                }
            }
        }
        out
    }

    pub fn norm_sqr(&self, r: ShiftPair) -> f64 {
        self.eval(r).iter().map(|z| z.norm_sqr()).sum()
    }
}

/// ‖f‖₂² on the nodes (a/G, b/G), row-major with rows a ↔ τ and columns b ↔ f.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub g: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.g + b]
    }

    pub fn node(&self, idx: usize) -> ShiftPair {
        let g = self.g as f64;
        ShiftPair::new((idx / self.g) as f64 / g, (idx % self.g) as f64 / g)
    }
}

/// Zero-padded separable DFTs: first over p for each of the L values of k,
/// then over k for every column.
pub fn eval_grid(poly: &DualPolynomial, g: usize) -> Result<Grid> {
    if g < poly.l {
        return Err(Error::Invalid(format!("grid size {g} is below L = {}", poly.l)));
    }
    let n = poly.n();
    let ll = poly.l * poly.l;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(g);
    let zero = C64::new(0.0, 0.0);
    let wrap = |i: i64| i.rem_euclid(g as i64) as usize;
    let mut data = vec![0.0; g * g];
    let mut rows = vec![zero; poly.l * g];
    let mut col = vec![zero; g];
    for i in 0..poly.k {
        rows.iter_mut().for_each(|z| *z = zero);
        for k in -n..=n {
            let row = &mut rows[(k + n) as usize * g..(k + n + 1) as usize * g];
            for p in -n..=n {
                row[wrap(p)] = poly.coeff[i * ll + flat(p, k, n)];
            }
            fft.process(row);
        }
        for b in 0..g {
            col.iter_mut().for_each(|z| *z = zero);
            for k in -n..=n {
                col[wrap(k)] = rows[(k + n) as usize * g + b];
            }
            fft.process(&mut col);
            for (a, z) in col.iter().enumerate() {
                data[a * g + b] += z.norm_sqr();
            }
        }
    }
    Ok(Grid { g, data })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftEstimate {
    pub shifts: Vec<ShiftPair>,
    /// ‖f‖₂² at each shift.
    pub peak_values: Vec<f64>,
    pub grid_step: f64,
}

/// One shift per 8-connected component (wrapping on the torus) of
/// {‖f‖₂² ≥ threshold}, at the component argmax, strongest first.
pub fn extract_peaks(grid: &Grid, threshold: f64) -> ShiftEstimate {
    let g = grid.g;
    let mut seen = vec![false; g * g];
    let mut peaks: Vec<(f64, usize)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..g * g {
        if seen[start] || !(grid.data[start] >= threshold) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut best = (grid.data[start], start);
        while let Some(idx) = stack.pop() {
            let v = grid.data[idx];
            if v > best.0 || (v == best.0 && idx < best.1) {
                best = (v, idx);
            }
            let (a, b) = ((idx / g) as i64, (idx % g) as i64);
            for da in -1..=1 {
                for db in -1..=1 {
                    let na = (a + da).rem_euclid(g as i64) as usize;
                    let nb = (b + db).rem_euclid(g as i64) as usize;
                    let j = na * g + nb;
                    if !seen[j] && grid.data[j] >= threshold {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        peaks.push(best);
    }
    peaks.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    ShiftEstimate {
        shifts: peaks.iter().map(|&(_, i)| grid.node(i)).collect(),
        peak_values: peaks.iter().map(|&(v, _)| v).collect(),
        grid_step: 1.0 / g as f64,
    }
}

/// max over the grid of ‖f‖₂.
pub fn feasibility_sup(grid: &Grid) -> f64 {
    grid.data.iter().copied().fold(0.0, f64::max).sqrt()
}

pub const GRID_FORMAT: &str = "bdsr-grid";

/// JSON header stored next to the raw little-endian f64 payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub format: String,
    pub version: u32,
    pub g: usize,
    pub l: usize,
    pub k: usize,
    pub seed: Option<u64>,
    pub dtype: String,
    pub layout: String,
}

impl GridHeader {
    pub fn new(g: usize, l: usize, k: usize, seed: Option<u64>) -> Self {
        GridHeader {
            format: GRID_FORMAT.into(),
            version: 1,
            g,
            l,
            k,
            seed,
            dtype: "f64-le".into(),
            layout: "row-major; row a is tau = a/G, column b is f = b/G; value |f(r)|^2".into(),
        }
    }
}

pub fn grid_bytes(grid: &Grid) -> Vec<u8> {
    grid.data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Parse a header and its payload, checking that they agree.
pub fn read_grid(header: &str, payload: &[u8]) -> Result<(GridHeader, Grid)> {
    let h: GridHeader = serde_json::from_str(header)?;
    if h.format != GRID_FORMAT || h.version != 1 || h.dtype != "f64-le" {
        return Err(Error::Invalid("unsupported grid header".into()));
    }
    let cells = h.g.checked_mul(h.g).filter(|c| *c <= 1 << 28);
    let Some(cells) = cells else {
        return Err(Error::Invalid(format!("grid size {} too large", h.g)));
    };
    if h.g == 0 || payload.len() != cells * 8 {
        return Err(Error::Dimension(format!("payload has {} bytes, expected {}", payload.len(), cells * 8)));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((h.clone(), Grid { g: h.g, data }))
}
