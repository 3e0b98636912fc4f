//! Dirichlet and squared Fejér kernels, atoms and the matrices D̃_p.

use std::f64::consts::{PI, TAU};

use crate::model::{flat, half_width, ShiftPair, Subspace};
use crate::{Error, Result, C64};

pub const MAX_ORDER: u32 = 3;

/// Σ_{r=−n..n} (i2πr)^m e^{i2πtr} · scale, paired over ±r so the result is
/// exactly real.
fn real_series(t: f64, order: u32, coeff: impl Fn(i64) -> f64, n: i64) -> f64 {
    let mut s = if order == 0 { coeff(0) } else { 0.0 };
    for r in 1..=n {
        let w = TAU * r as f64;
        let x = w * t;
        // (i w)^m e^{ixr} + (−i w)^m e^{−ixr}
        let term = match order % 4 {
            0 => 2.0 * x.cos(),
            1 => -2.0 * x.sin(),
            2 => -2.0 * x.cos(),
            _ => 2.0 * x.sin(),
        };
        s += coeff(r) * w.powi(order as i32) * term;
    }
    s
}

/// Order-m derivative of D_N(t) = (1/L) Σ_{r=−N..N} e^{i2πtr}. Real for every order.
pub fn dirichlet(t: f64, n: i64, order: u32) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::Invalid(format!("derivative order {order} > {MAX_ORDER}")));
    }
    if n < 0 {
        return Err(Error::Dimension("N must be nonnegative".into()));
    }
    Ok(real_series(t, order, |_| 1.0, n) / (2 * n + 1) as f64)
}

fn dn(t: f64, n: i64, order: u32) -> f64 {
    real_series(t, order, |_| 1.0, n) / (2 * n + 1) as f64
}

/// a(r) with entry (k, l) = D_N(l/L − τ)·D_N(k/L − f). The entries are real.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub r: ShiftPair,
    pub v: Vec<f64>,
}

pub fn atom(r: ShiftPair, l: usize) -> Atom {
    Atom { r, v: atom_deriv(r, l, 0, 0).expect("order 0") }
}

/// ∂_τ^{m'} ∂_f^{n'} a(r).
pub fn atom_deriv(r: ShiftPair, l: usize, m: u32, n_: u32) -> Result<Vec<f64>> {
    if m + n_ > 2 {
        return Err(Error::Invalid(format!("atom derivative order ({m},{n_}) exceeds 2")));
    }
    let n = half_width(l)?;
    let lf = l as f64;
    let sign = |o: u32| if o % 2 == 0 { 1.0 } else { -1.0 };
    let dt: Vec<f64> = (-n..=n).map(|i| sign(m) * dn(i as f64 / lf - r.tau, n, m)).collect();
    let df: Vec<f64> = (-n..=n).map(|i| sign(n_) * dn(i as f64 / lf - r.f, n, n_)).collect();
    let mut v = vec![0.0; l * l];
    for k in -n..=n {
        for ll in -n..=n {
            v[flat(k, ll, n)] = dt[(ll + n) as usize] * df[(k + n) as usize];
        }
    }
    Ok(v)
}

/// D̃_p as L² rows of length K; row (k, l) is e^{i2πpk/L} d_{p−l}^H.
pub fn dtilde(p: i64, sub: &Subspace) -> Result<Vec<Vec<C64>>> {
    let n = sub.n();
    if p.abs() > n {
        return Err(Error::Dimension(format!("p = {p} outside [−{n}, {n}]")));
    }
    let l = sub.l as i64;
    let mut rows = vec![Vec::new(); sub.l * sub.l];
    for k in -n..=n {
        let ph = C64::from_polar(1.0, TAU * (p * k).rem_euclid(l) as f64 / l as f64);
        for ll in -n..=n {
            rows[flat(k, ll, n)] = sub.row(p - ll).iter().map(|z| ph * z).collect();
        }
    }
    Ok(rows)
}

/// Coefficients of F(t) = (1/T) Σ_{n=−N..N} g_n e^{i2πnt}.
#[derive(Clone, Debug, PartialEq)]
pub struct FejerCoeffs {
    pub n: i64,
    pub t: i64,
    /// g_n at offset n + N.
    pub g: Vec<f64>,
}

impl FejerCoeffs {
    pub fn get(&self, n: i64) -> f64 {
        if n.abs() > self.n {
            0.0
        } else {
            self.g[(n + self.n) as usize]
        }
    }
}

/// T = N/2 + 1 for even N. Odd N uses T = ⌈N/2⌉ + 1 and drops the two
/// coefficients at ±(N + 1).
pub fn fejer_coeffs(n: i64) -> FejerCoeffs {
    let t = (n + 1) / 2 + 1;
    let tf = t as f64;
    let g = (-n..=n)
        .map(|m| {
            let lo = (m - t).max(-t);
            let hi = (m + t).min(t);
            (lo..=hi)
                .map(|l| (1.0 - l.abs() as f64 / tf) * (1.0 - (m - l).abs() as f64 / tf))
                .sum::<f64>()
                / tf
        })
        .collect();
    FejerCoeffs { n, t, g }
}

/// F^{(order)}(t) through the coefficient sum.
pub fn fejer_eval(t: f64, order: u32, c: &FejerCoeffs) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::Invalid(format!("derivative order {order} > {MAX_ORDER}")));
    }
    Ok(real_series(t, order, |r| c.get(r), c.n) / c.t as f64)
}

/// μ = √|F''(0)| = √((π²/3)(N² + 4N)).
pub fn mu(n: i64) -> f64 {
    let nf = n as f64;
    (PI * PI / 3.0 * (nf * nf + 4.0 * nf)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_cap() {
        assert!(dirichlet(0.1, 3, 4).is_err());
        assert!(atom_deriv(ShiftPair::new(0.1, 0.2), 5, 2, 1).is_err());
    }

    #[test]
    fn dirichlet_at_grid() {
        assert!((dirichlet(0.0, 4, 0).unwrap() - 1.0).abs() < 1e-15);
        for l in 1..9 {
            assert!(dirichlet(l as f64 / 9.0, 4, 0).unwrap().abs() < 1e-14);
        }
        assert!(dirichlet(0.0, 4, 1).unwrap().abs() < 1e-15);
    }
}
