//! Conic program in equality standard form.
//!
//! minimize   Σ_b ⟨C_b, X_b⟩ + c_linᵀ x_lin
//! subject to Σ_b A_b(X_b) + A_lin x_lin = b
//!            X_b ⪰ 0, each second-order block in its cone, free block unrestricted.
//!
//! The linear variable vector is laid out as all second-order blocks in order,
//! followed by the free variables.

use crate::SolverError;

/// Coefficients of one equality row on one PSD block.
#[derive(Clone, Debug, PartialEq)]
pub enum PsdTerm {
    /// Σ v·X[a,b]. X is symmetric, so (a,b) and (b,a) address the same entry.
    Entries(Vec<(usize, usize, f64)>),
    /// Σ w·uᵀXu.
    LowRank(Vec<(f64, Vec<f64>)>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    pub psd: Vec<(usize, PsdTerm)>,
    pub lin: Vec<(usize, f64)>,
}

impl Row {
    pub fn entries(block: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        Row { psd: vec![(block, PsdTerm::Entries(entries))], lin: Vec::new() }
    }

    pub fn low_rank(block: usize, terms: Vec<(f64, Vec<f64>)>) -> Self {
        Row { psd: vec![(block, PsdTerm::LowRank(terms))], lin: Vec::new() }
    }

    pub fn with_lin(mut self, lin: Vec<(usize, f64)>) -> Self {
        self.lin = lin;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProblem {
    pub psd_dims: Vec<usize>,
    pub soc_dims: Vec<usize>,
    pub n_free: usize,
    /// Objective entries per PSD block, Σ v·X[a,b].
    pub c_psd: Vec<Vec<(usize, usize, f64)>>,
    /// Objective on the linear variables (second-order blocks, then free).
    pub c_lin: Vec<f64>,
    pub rows: Vec<Row>,
    pub b: Vec<f64>,
}

impl ConicProblem {
    pub fn n_soc(&self) -> usize {
        self.soc_dims.iter().sum()
    }

    pub fn n_lin(&self) -> usize {
        self.n_soc() + self.n_free
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Barrier degree of the cone product.
    pub fn degree(&self) -> usize {
        self.psd_dims.iter().sum::<usize>() + self.soc_dims.len()
    }

    /// Start offset of every second-order block inside the linear variables.
    pub fn soc_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.soc_dims.len());
        let mut acc = 0;
        for &d in &self.soc_dims {
            off.push(acc);
            acc += d;
        }
        off
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::Malformed(msg));
        if self.c_psd.len() != self.psd_dims.len() {
            return bad(format!(
                "{} objective blocks for {} PSD cones",
                self.c_psd.len(),
                self.psd_dims.len()
            ));
        }
        if self.c_lin.len() != self.n_lin() {
            return bad(format!("c_lin has {} entries, expected {}", self.c_lin.len(), self.n_lin()));
        }
        if self.b.len() != self.rows.len() {
            return bad(format!("{} right-hand sides for {} rows", self.b.len(), self.rows.len()));
        }
        if self.soc_dims.iter().any(|&d| d < 2) {
            return bad("second-order cones need dimension ≥ 2".into());
        }
        if self.psd_dims.iter().any(|&d| d == 0) {
            return bad("empty PSD cone".into());
        }
        for (k, c) in self.c_psd.iter().enumerate() {
            let n = self.psd_dims[k];
            if c.iter().any(|&(a, b, _)| a >= n || b >= n) {
                return bad(format!("objective entry outside PSD block {k}"));
            }
        }
        let n_lin = self.n_lin();
        for (i, row) in self.rows.iter().enumerate() {
            for (blk, term) in &row.psd {
                let Some(&n) = self.psd_dims.get(*blk) else {
                    return bad(format!("row {i} references PSD block {blk}"));
                };
                match term {
                    PsdTerm::Entries(e) => {
                        if e.iter().any(|&(a, b, _)| a >= n || b >= n) {
                            return bad(format!("row {i} has an entry outside block {blk}"));
                        }
                    }
                    PsdTerm::LowRank(v) => {
                        if v.iter().any(|(_, u)| u.len() != n) {
                            return bad(format!("row {i} has a low-rank vector of wrong length"));
                        }
                    }
                }
            }
            if row.lin.iter().any(|&(j, _)| j >= n_lin) {
                return bad(format!("row {i} references linear variable out of range"));
            }
        }
        if self.rows.is_empty() {
            return bad("no equality rows".into());
        }
        Ok(())
    }
}
