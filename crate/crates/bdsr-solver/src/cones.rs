//! Nesterov-Todd scalings and step-length rules for the PSD and second-order cones.

use faer::{Mat, Side};

/// Scaled iterate λ and the scaling R with R⁻¹XR⁻ᵀ = RᵀSR = diag(λ).
pub struct PsdScaling {
    pub r: Mat<f64>,
    pub lambda: Vec<f64>,
    /// H(·) = W̄·W̄ with W̄ = RRᵀ.
    pub wbar: Mat<f64>,
}

impl PsdScaling {
    pub fn new(x: &Mat<f64>, s: &Mat<f64>) -> Option<Self> {
        let n = x.nrows();
        let lx = x.llt(Side::Lower).ok()?.L().to_owned();
        let ls = s.llt(Side::Lower).ok()?.L().to_owned();
        let prod = ls.transpose() * &lx;
        let svd = prod.svd().ok()?;
        let lambda: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return None;
        }
        let mut r = &lx * svd.V();
        for (j, &l) in lambda.iter().enumerate() {
            let f = 1.0 / l.sqrt();
            for i in 0..n {
                r[(i, j)] *= f;
            }
        }
        let wbar = &r * r.transpose();
        Some(PsdScaling { r, lambda, wbar })
    }

    /// R Y Rᵀ
    pub fn expand(&self, y: &Mat<f64>) -> Mat<f64> {
        &self.r * y * self.r.transpose()
    }

    /// Rᵀ S R
    pub fn contract(&self, s: &Mat<f64>) -> Mat<f64> {
        self.r.transpose() * s * &self.r
    }

    /// W̄ S W̄
    pub fn h(&self, s: &Mat<f64>) -> Mat<f64> {
        &self.wbar * s * &self.wbar
    }

    /// Solves diag(λ)∘Y = Rc for the symmetrised product.
    pub fn lambda_solve(&self, rc: &Mat<f64>) -> Mat<f64> {
        let n = self.lambda.len();
        Mat::from_fn(n, n, |i, j| 2.0 * rc[(i, j)] / (self.lambda[i] + self.lambda[j]))
    }

    /// Largest α ≤ 1/eps with diag(λ) + αΔ ⪰ 0, Δ given in scaled coordinates.
    pub fn max_step(&self, d: &Mat<f64>) -> f64 {
        let n = self.lambda.len();
        let is: Vec<f64> = self.lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
        let m = Mat::from_fn(n, n, |i, j| 0.5 * (d[(i, j)] + d[(j, i)]) * is[i] * is[j]);
        let ev = match m.self_adjoint_eigenvalues(Side::Lower) {
            Ok(ev) => ev,
            Err(_) => return 0.0,
        };
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
        if lo >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lo
        }
    }
}

/// (A B + B A) / 2
pub fn sym_product(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let ab = a * b;
    let n = ab.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (ab[(i, j)] + ab[(j, i)]))
}

pub fn soc_jnorm2(x: &[f64]) -> f64 {
    x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()
}

pub fn soc_interior(x: &[f64]) -> bool {
    x[0] > 0.0 && soc_jnorm2(x) > 0.0
}

/// NT scaling of a second-order block. W x = W⁻¹ s = λ, stored as R = W⁻¹.
pub struct SocScaling {
    pub r: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

impl SocScaling {
    pub fn new(x: &[f64], s: &[f64]) -> Option<Self> {
        let d = x.len();
        let xj = soc_jnorm2(x);
        let sj = soc_jnorm2(s);
        if !(xj > 0.0 && sj > 0.0 && x[0] > 0.0 && s[0] > 0.0) {
            return None;
        }
        let xn: Vec<f64> = x.iter().map(|v| v / xj.sqrt()).collect();
        let sn: Vec<f64> = s.iter().map(|v| v / sj.sqrt()).collect();
        let dot: f64 = xn.iter().zip(&sn).map(|(a, b)| a * b).sum();
        let gamma = ((1.0 + dot) / 2.0).sqrt();
        let mut wb = vec![0.0; d];
        wb[0] = (sn[0] + xn[0]) / (2.0 * gamma);
        for i in 1..d {
            wb[i] = (sn[i] - xn[i]) / (2.0 * gamma);
        }
        let beta = (sj / xj).powf(0.25);
        let build = |sign: f64, scale: f64| {
            let mut m = vec![vec![0.0; d]; d];
            m[0][0] = scale * wb[0];
            for i in 1..d {
                m[0][i] = scale * sign * wb[i];
                m[i][0] = scale * sign * wb[i];
                for j in 1..d {
                    let id = if i == j { 1.0 } else { 0.0 };
                    m[i][j] = scale * (id + wb[i] * wb[j] / (1.0 + wb[0]));
                }
            }
            m
        };
        let w = build(1.0, beta);
        let r = build(-1.0, 1.0 / beta);
        let lambda = matvec(&w, x);
        let h = matmul(&r, &r);
        Some(SocScaling { r, w, lambda, h })
    }

    /// Solves λ∘u = r for the Jordan product u∘v = (uᵀv, u₀v₁ + v₀u₁).
    pub fn lambda_solve(&self, rc: &[f64]) -> Vec<f64> {
        let l = &self.lambda;
        let l1sq: f64 = l[1..].iter().map(|v| v * v).sum();
        let dot1: f64 = l[1..].iter().zip(&rc[1..]).map(|(a, b)| a * b).sum();
        let u0 = (l[0] * rc[0] - dot1) / (l[0] * l[0] - l1sq);
        let mut u = vec![u0; l.len()];
        for i in 1..l.len() {
            u[i] = (rc[i] - u0 * l[i]) / l[0];
        }
        u
    }

    pub fn max_step(&self, d: &[f64]) -> f64 {
        soc_max_step(&self.lambda, d)
    }
}

pub fn jordan(u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    out[0] = u.iter().zip(v).map(|(a, b)| a * b).sum();
    for i in 1..u.len() {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
    out
}

/// Largest α with x + αd in the second-order cone, x interior.
pub fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    let a = soc_jnorm2(d);
    let b = x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(p, q)| p * q).sum::<f64>();
    let c = soc_jnorm2(x);
    let mut best = f64::INFINITY;
    if d[0] < 0.0 {
        best = best.min(-x[0] / d[0]);
    }
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            best = best.min(-c / (2.0 * b));
        }
        return best;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return best;
    }
    let q = -(b + b.signum() * disc.sqrt());
    for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
        if root > 0.0 {
            best = best.min(root);
        }
    }
    best
}

pub fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(p, q)| (p - q).abs() <= tol)
    }

    #[test]
    fn soc_scaling_maps_both_points_to_lambda() {
        let x = [3.0, 1.0, -0.5, 0.2];
        let s = [2.0, -0.3, 0.9, 1.1];
        let sc = SocScaling::new(&x, &s).unwrap();
        let wx = matvec(&sc.w, &x);
        let rs = matvec(&sc.r, &s);
        assert!(close(&wx, &rs, 1e-12), "{wx:?} vs {rs:?}");
        // R = W⁻¹
        let rwx = matvec(&sc.r, &wx);
        assert!(close(&rwx, &x, 1e-12));
    }

    #[test]
    fn soc_lambda_solve_inverts_jordan_product() {
        let x = [2.0, 0.3, -0.4];
        let s = [1.5, 0.2, 0.7];
        let sc = SocScaling::new(&x, &s).unwrap();
        let r = [0.7, -0.2, 0.05];
        let u = sc.lambda_solve(&r);
        assert!(close(&jordan(&sc.lambda, &u), &r, 1e-12));
    }

    #[test]
    fn soc_step_hits_boundary() {
        let x = [1.0, 0.0];
        let d = [-1.0, 1.0];
        // (1-α)² = α² at α = 1/2
        assert!((soc_max_step(&x, &d) - 0.5).abs() < 1e-14);
        assert_eq!(soc_max_step(&x, &[1.0, 0.5]), f64::INFINITY);
        let x3 = [2.0, 1.0, 0.0];
        let d3 = [0.0, 0.0, 1.0];
        // 4 = 1 + α²
        assert!((soc_max_step(&x3, &d3) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn psd_scaling_diagonalises_both() {
        let x = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
        let s = Mat::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.2 });
        let sc = PsdScaling::new(&x, &s).unwrap();
        let rs = sc.contract(&s);
        let rinv = sc.r.partial_piv_lu();
        use faer::linalg::solvers::Solve;
        let t = rinv.solve(&x);
        let xt = rinv.solve(t.transpose().to_owned());
        for i in 0..3 {
            for j in 0..3 {
                let l = if i == j { sc.lambda[i] } else { 0.0 };
                assert!((rs[(i, j)] - l).abs() < 1e-12);
                assert!((xt[(i, j)] - l).abs() < 1e-12);
            }
        }
    }
}
