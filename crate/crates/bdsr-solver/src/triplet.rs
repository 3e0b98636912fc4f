//! Plain-text sparse triplet format for exchanging conic programs.
//!
//! ```text
//! bdsr-conic 1
//! psd <n>                          one line per PSD block, in order
//! soc <d>                          one line per second-order block, in order
//! free <n>
//! rows <m>
//! b <row> <value>
//! c psd <block> <i> <j> <value>    objective, Σ v·X[i,j]
//! c lin <var> <value>
//! a psd <row> <block> <i> <j> <value>
//! a lr <row> <block> <weight> <u_0> … <u_{n-1}>
//! a lin <row> <var> <value>
//! ```
//! Lines starting with `#` and blank lines are ignored. Values are written with
//! the shortest round-trip representation, so export followed by import is exact.

use std::fmt::Write;

use crate::problem::{ConicProblem, PsdTerm, Row};
use crate::SolverError;

const MAGIC: &str = "bdsr-conic 1";
const MAX_DIM: usize = 1 << 20;
const MAX_ROWS: usize = 1 << 24;

pub fn export(p: &ConicProblem) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    for n in &p.psd_dims {
        let _ = writeln!(out, "psd {n}");
    }
    for d in &p.soc_dims {
        let _ = writeln!(out, "soc {d}");
    }
    let _ = writeln!(out, "free {}", p.n_free);
    let _ = writeln!(out, "rows {}", p.rows.len());
    for (i, b) in p.b.iter().enumerate() {
        if *b != 0.0 {
            let _ = writeln!(out, "b {i} {b}");
        }
    }
    for (k, c) in p.c_psd.iter().enumerate() {
        for (i, j, v) in c {
            let _ = writeln!(out, "c psd {k} {i} {j} {v}");
        }
    }
    for (j, v) in p.c_lin.iter().enumerate() {
        if *v != 0.0 {
            let _ = writeln!(out, "c lin {j} {v}");
        }
    }
    for (r, row) in p.rows.iter().enumerate() {
        for (k, term) in &row.psd {
            match term {
                PsdTerm::Entries(e) => {
                    for (i, j, v) in e {
                        let _ = writeln!(out, "a psd {r} {k} {i} {j} {v}");
                    }
                }
                PsdTerm::LowRank(lr) => {
                    for (w, u) in lr {
                        let _ = write!(out, "a lr {r} {k} {w}");
                        for x in u {
                            let _ = write!(out, " {x}");
                        }
                        out.push('\n');
                    }
                }
            }
        }
        for (j, v) in &row.lin {
            let _ = writeln!(out, "a lin {r} {j} {v}");
        }
    }
    out
}

struct Cursor<'a> {
    line: usize,
    toks: std::str::SplitWhitespace<'a>,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> SolverError {
        SolverError::Parse { line: self.line, msg: msg.into() }
    }

    fn word(&mut self) -> Result<&'a str, SolverError> {
        self.toks.next().ok_or_else(|| self.err("unexpected end of line"))
    }

    fn index(&mut self, bound: usize, what: &str) -> Result<usize, SolverError> {
        let w = self.word()?;
        let v: usize = w.parse().map_err(|_| self.err(format!("bad {what} '{w}'")))?;
        if v >= bound {
            return Err(self.err(format!("{what} {v} out of range (< {bound})")));
        }
        Ok(v)
    }

    fn value(&mut self) -> Result<f64, SolverError> {
        let w = self.word()?;
        let v: f64 = w.parse().map_err(|_| self.err(format!("bad number '{w}'")))?;
        if !v.is_finite() {
            return Err(self.err("non-finite value"));
        }
        Ok(v)
    }

    fn done(&mut self) -> Result<(), SolverError> {
        match self.toks.next() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("trailing token '{t}'"))),
        }
    }
}

pub fn import(text: &str) -> Result<ConicProblem, SolverError> {
    let mut p = ConicProblem::default();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((line, _)) => return Err(SolverError::Parse { line, msg: "missing header".into() }),
        None => return Err(SolverError::Parse { line: 0, msg: "empty input".into() }),
    }
    let mut rows_declared = false;
    let mut free_declared = false;
    for (line, l) in lines {
        let mut c = Cursor { line, toks: l.split_whitespace() };
        let head = c.word()?;
        let shape_frozen = rows_declared;
        match head {
            "psd" | "soc" if shape_frozen || free_declared => {
                return Err(c.err("cone declared after free/rows"));
            }
            "psd" => {
                let n = c.index(MAX_DIM + 1, "dimension")?;
                p.psd_dims.push(n);
                p.c_psd.push(Vec::new());
            }
            "soc" => p.soc_dims.push(c.index(MAX_DIM + 1, "dimension")?),
            "free" if shape_frozen || free_declared => return Err(c.err("free declared twice")),
            "free" => {
                p.n_free = c.index(MAX_DIM + 1, "free count")?;
                free_declared = true;
            }
            "rows" if shape_frozen => return Err(c.err("rows declared twice")),
            "rows" => {
                let m = c.index(MAX_ROWS + 1, "row count")?;
                p.rows = vec![Row::default(); m];
                p.b = vec![0.0; m];
                p.c_lin = vec![0.0; p.n_lin()];
                rows_declared = true;
            }
            _ if !shape_frozen => return Err(c.err("data before 'rows'")),
            "b" => {
                let r = c.index(p.rows.len(), "row")?;
                p.b[r] = c.value()?;
            }
            "c" => match c.word()? {
                "psd" => {
                    let k = c.index(p.psd_dims.len(), "block")?;
                    let n = p.psd_dims[k];
                    let i = c.index(n, "entry row")?;
                    let j = c.index(n, "entry column")?;
                    let v = c.value()?;
                    p.c_psd[k].push((i, j, v));
                }
                "lin" => {
                    let j = c.index(p.c_lin.len(), "variable")?;
                    p.c_lin[j] = c.value()?;
                }
                other => return Err(c.err(format!("unknown objective kind '{other}'"))),
            },
            "a" => {
                let kind = c.word()?;
                let r = c.index(p.rows.len(), "row")?;
                match kind {
                    "psd" => {
                        let k = c.index(p.psd_dims.len(), "block")?;
                        let n = p.psd_dims[k];
                        let i = c.index(n, "entry row")?;
                        let j = c.index(n, "entry column")?;
                        let v = c.value()?;
                        push_entry(&mut p.rows[r], k, (i, j, v));
                    }
                    "lr" => {
                        let k = c.index(p.psd_dims.len(), "block")?;
                        let n = p.psd_dims[k];
                        let w = c.value()?;
                        let mut u = Vec::new();
                        for _ in 0..n {
                            u.push(c.value()?);
                        }
                        push_low_rank(&mut p.rows[r], k, (w, u));
                    }
                    "lin" => {
                        let j = c.index(p.n_lin(), "variable")?;
                        let v = c.value()?;
                        p.rows[r].lin.push((j, v));
                    }
                    other => return Err(c.err(format!("unknown row term '{other}'"))),
                }
            }
            other => return Err(c.err(format!("unknown record '{other}'"))),
        }
        c.done()?;
    }
    if !rows_declared {
        return Err(SolverError::Parse { line: 0, msg: "no 'rows' record".into() });
    }
    Ok(p)
}

fn push_entry(row: &mut Row, k: usize, e: (usize, usize, f64)) {
    if let Some((_, PsdTerm::Entries(v))) =
        row.psd.iter_mut().rev().find(|(b, t)| *b == k && matches!(t, PsdTerm::Entries(_)))
    {
        v.push(e);
    } else {
        row.psd.push((k, PsdTerm::Entries(vec![e])));
    }
}

fn push_low_rank(row: &mut Row, k: usize, t: (f64, Vec<f64>)) {
    if let Some((_, PsdTerm::LowRank(v))) =
        row.psd.iter_mut().rev().find(|(b, t)| *b == k && matches!(t, PsdTerm::LowRank(_)))
    {
        v.push(t);
    } else {
        row.psd.push((k, PsdTerm::LowRank(vec![t])));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConicProblem {
        ConicProblem {
            psd_dims: vec![2],
            soc_dims: vec![3],
            n_free: 1,
            c_psd: vec![vec![(0, 0, 2.0), (1, 1, 5.0)]],
            c_lin: vec![1.0, 0.0, 0.0, -0.25],
            rows: vec![
                Row::entries(0, vec![(0, 0, 1.0), (1, 1, 1.0)]),
                Row::low_rank(0, vec![(0.5, vec![1.0, -1.0])]).with_lin(vec![(3, 1.0)]),
                Row { psd: vec![], lin: vec![(0, 1.0), (1, 0.1)] },
            ],
            b: vec![1.0, 0.0, 2.5],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let q = import(&export(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_out_of_range_entries() {
        let t = "bdsr-conic 1\npsd 2\nfree 0\nrows 1\na psd 0 0 2 0 1.0\n";
        assert!(matches!(import(t), Err(SolverError::Parse { line: 5, .. })));
    }

    #[test]
    fn rejects_missing_header_and_garbage() {
        assert!(import("").is_err());
        assert!(import("psd 2").is_err());
        assert!(import("bdsr-conic 1\nrows 1\nb 0 nan\n").is_err());
        assert!(import("bdsr-conic 1\nrows 1\nb 0 1 2\n").is_err());
        assert!(import("bdsr-conic 1\nb 0 1\n").is_err());
    }
}
