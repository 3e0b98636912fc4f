//! Scenes, subspaces, observations and the forward model.
//!
//! Vectors indexed by p ∈ [−N, N] are stored at offset p + N. Pairs (k, l) are
//! flattened as `(k + N)·L + (l + N)`, k outer.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::spectral;
use crate::{Error, Result, C64};

/// Minimum wrap-around ℓ∞ separation, in units of 1/N.
pub const SEPARATION: f64 = 2.38;
pub const MAX_REJECTIONS: usize = 10_000;

/// Reduce into [0, 1). `rem_euclid` can round up to exactly 1 for tiny negatives.
pub fn wrap01(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Map any integer onto its representative in [−N, N] modulo L = 2N + 1.
pub fn wrap_index(p: i64, n: i64) -> i64 {
    (p + n).rem_euclid(2 * n + 1) - n
}

pub fn flat(k: i64, l: i64, n: i64) -> usize {
    ((k + n) * (2 * n + 1) + (l + n)) as usize
}

pub fn unflat(idx: usize, n: i64) -> (i64, i64) {
    let ll = (2 * n + 1) as usize;
    ((idx / ll) as i64 - n, (idx % ll) as i64 - n)
}

pub fn half_width(l: usize) -> Result<i64> {
    if l == 0 || l % 2 == 0 {
        return Err(Error::Dimension(format!("L must be odd and positive, got {l}")));
    }
    Ok(((l - 1) / 2) as i64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ShiftPair {
    pub tau: f64,
    pub f: f64,
}

impl ShiftPair {
    pub fn new(tau: f64, f: f64) -> Self {
        ShiftPair { tau: wrap01(tau), f: wrap01(f) }
    }

    /// ℓ∞ wrap-around distance.
    pub fn dist(&self, o: &ShiftPair) -> f64 {
        wrap_distance(self.tau, o.tau).max(wrap_distance(self.f, o.f))
    }
}

impl TryFrom<[f64; 2]> for ShiftPair {
    type Error = String;
    fn try_from(v: [f64; 2]) -> std::result::Result<Self, String> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(ShiftPair::new(v[0], v[1]))
        } else {
            Err("shift coordinates must be finite".into())
        }
    }
}

impl From<ShiftPair> for [f64; 2] {
    fn from(s: ShiftPair) -> Self {
        [s.tau, s.f]
    }
}

/// Symmetric by construction: the smaller of the two directed arcs.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = wrap01(a - b).min(wrap01(b - a));
    d.min(0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Separation {
    pub ok: bool,
    /// `f64::INFINITY` for fewer than two shifts.
    pub delta_min: f64,
}

pub fn check_separation(shifts: &[ShiftPair], n: i64) -> Separation {
    let mut delta_min = f64::INFINITY;
    for (i, a) in shifts.iter().enumerate() {
        for b in &shifts[i + 1..] {
            delta_min = delta_min.min(a.dist(b));
        }
    }
    Separation { ok: delta_min >= SEPARATION / n as f64, delta_min }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    UnitModulus,
    Fading,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub shifts: Vec<ShiftPair>,
    pub gains: Vec<C64>,
    pub orientations: Vec<Vec<C64>>,
}

impl Scene {
    pub fn r(&self) -> usize {
        self.shifts.len()
    }

    pub fn validate(&self, k: Option<usize>) -> Result<()> {
        let r = self.shifts.len();
        if self.gains.len() != r || self.orientations.len() != r {
            return Err(Error::Dimension("scene lists differ in length".into()));
        }
        for (j, (c, h)) in self.gains.iter().zip(&self.orientations).enumerate() {
            if !(c.norm() > 0.0 && c.norm().is_finite()) {
                return Err(Error::Invalid(format!("gain {j} must be finite and nonzero")));
            }
            if let Some(k) = k {
                if h.len() != k {
                    return Err(Error::Dimension(format!("orientation {j} has length {}, expected {k}", h.len())));
                }
            }
            let nrm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (nrm - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("orientation {j} has norm {nrm}")));
            }
        }
        Ok(())
    }

    pub fn with_shifts(mut self, shifts: Vec<ShiftPair>) -> Result<Self> {
        if shifts.len() != self.gains.len() {
            return Err(Error::Dimension("shift count differs from gain count".into()));
        }
        self.shifts = shifts;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    Gaussian,
    FourierRows,
    UniformPm1,
    Custom,
}

/// Row `l + N` of `d` holds d_l^H.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub l: usize,
    pub k: usize,
    pub kind: SubspaceKind,
    pub d: Vec<Vec<C64>>,
}

impl Subspace {
    pub fn new(d: Vec<Vec<C64>>, kind: SubspaceKind) -> Result<Self> {
        let l = d.len();
        half_width(l)?;
        let k = d.first().map_or(0, Vec::len);
        let s = Subspace { l, k, kind, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        half_width(self.l)?;
        if self.k == 0 || self.k > self.l {
            return Err(Error::Dimension(format!("need 1 ≤ K ≤ L, got K={} L={}", self.k, self.l)));
        }
        if self.d.len() != self.l || self.d.iter().any(|r| r.len() != self.k) {
            return Err(Error::Dimension("D must be L×K".into()));
        }
        if self.d.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("D has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> i64 {
        (self.l as i64 - 1) / 2
    }

    /// d_l^H for any integer l, wrapped modulo L.
    pub fn row(&self, l: i64) -> &[C64] {
        let n = self.n();
        &self.d[(wrap_index(l, n) + n) as usize]
    }

    /// s = D h, indexed by l + N.
    pub fn apply(&self, h: &[C64]) -> Vec<C64> {
        self.d.iter().map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub scene_digest: Option<String>,
    pub subspace_digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<C64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ObservationMeta>,
}

impl Observation {
    pub fn new(y: Vec<C64>) -> Self {
        Observation { y, meta: None }
    }
}

/// K×L² matrix, row-major, columns flattened by [`flat`].
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedMatrix {
    pub k: usize,
    pub l: usize,
    pub u: Vec<C64>,
}

impl LiftedMatrix {
    pub fn zeros(k: usize, l: usize) -> Self {
        LiftedMatrix { k, l, u: vec![C64::new(0.0, 0.0); k * l * l] }
    }

    pub fn at(&self, i: usize, col: usize) -> C64 {
        self.u[i * self.l * self.l + col]
    }
}

pub fn random_subspace(l: usize, k: usize, kind: SubspaceKind, seed: u64) -> Result<Subspace> {
    half_width(l)?;
    if k == 0 || k > l {
        return Err(Error::Dimension(format!("need 1 ≤ K ≤ L, got K={k} L={l}")));
    }
    let mut g = rng::stream(seed, Stream::Subspace);
    // rows are d_l^H, so column-form definitions are conjugated
    let d = (0..l)
        .map(|_| match kind {
            SubspaceKind::Gaussian | SubspaceKind::Custom => (0..k).map(|_| rng::complex_normal(&mut g)).collect(),
            SubspaceKind::FourierRows => {
                let sigma: f64 = g.random();
                (0..k).map(|i| C64::from_polar(1.0, -TAU * i as f64 * sigma)).collect()
            }
            SubspaceKind::UniformPm1 => {
                (0..k).map(|_| C64::new(g.random_range(-1.0..=1.0), g.random_range(-1.0..=1.0))).collect()
            }
        })
        .collect();
    Subspace::new(d, kind)
}

/// Gains and orientations; the shifts are left at the origin for the caller to
/// set, e.g. from [`sample_separated_shifts`].
pub fn random_scene(r: usize, k: usize, seed: u64, gains: GainModel) -> Scene {
    let mut g = rng::stream(seed, Stream::Scene);
    let mut orientations = Vec::with_capacity(r);
    let mut cs = Vec::with_capacity(r);
    for _ in 0..r {
        let h: Vec<C64> = (0..k).map(|_| rng::complex_normal(&mut g)).collect();
        let nrm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        orientations.push(h.into_iter().map(|z| z / nrm).collect());
        cs.push(match gains {
            GainModel::UnitModulus => C64::from_polar(1.0, TAU * g.random::<f64>()),
            GainModel::Fading => {
                let mut part = || {
                    let w = rng::normal(&mut g);
                    let s = if g.random::<bool>() { 1.0 } else { -1.0 };
                    s * (0.5 + w * w)
                };
                let re = part();
                C64::new(re, part())
            }
        });
    }
    Scene { shifts: vec![ShiftPair::default(); r], gains: cs, orientations }
}

/// Uniform shifts on the torus, redrawn until they meet the separation condition.
pub fn sample_separated_shifts(r: usize, n: i64, seed: u64) -> Result<Vec<ShiftPair>> {
    let mut g = rng::stream(seed, Stream::Shifts);
    for _ in 0..MAX_REJECTIONS {
        let s: Vec<ShiftPair> = (0..r).map(|_| ShiftPair::new(g.random(), g.random())).collect();
        if check_separation(&s, n).ok {
            return Ok(s);
        }
    }
    Err(Error::Separation(MAX_REJECTIONS))
}

fn check_k(scene: &Scene, sub: &Subspace) -> Result<()> {
    sub.validate()?;
    scene.validate(Some(sub.k))
}

/// y(p) = Σ_j c_j a(r_j)^H D̃_p h_j.
pub fn synthesize(scene: &Scene, sub: &Subspace) -> Result<Observation> {
    check_k(scene, sub)?;
    let n = sub.n();
    let atoms: Vec<spectral::Atom> = scene.shifts.iter().map(|r| spectral::atom(*r, sub.l)).collect();
    let mut y = vec![C64::new(0.0, 0.0); sub.l];
    for p in -n..=n {
        let dt = spectral::dtilde(p, sub)?;
        let mut acc = C64::new(0.0, 0.0);
        for (j, atom) in atoms.iter().enumerate() {
            let h = &scene.orientations[j];
            let v: C64 = atom
                .v
                .iter()
                .enumerate()
                .map(|(row, a)| *a * dt[row].iter().zip(h).map(|(x, z)| x * z).sum::<C64>())
                .sum();
            acc += scene.gains[j] * v;
        }
        y[(p + n) as usize] = acc;
    }
    Ok(Observation::new(y))
}

/// The same samples through the double-DFT form
/// y(p) = (1/L) Σ_j c_j Σ_{k,l} d_l^H h_j e^{i2πk(p−l)/L} e^{i2π(p f_j − k τ_j)}.
pub fn synthesize_direct(scene: &Scene, sub: &Subspace) -> Result<Observation> {
    check_k(scene, sub)?;
    let n = sub.n();
    let lf = sub.l as f64;
    let mut y = vec![C64::new(0.0, 0.0); sub.l];
    for (j, r) in scene.shifts.iter().enumerate() {
        let s = sub.apply(&scene.orientations[j]);
        for p in -n..=n {
            let mut acc = C64::new(0.0, 0.0);
            for k in -n..=n {
                let inner: C64 = (-n..=n)
                    .map(|l| s[(l + n) as usize] * C64::from_polar(1.0, TAU * ((k * (p - l)).rem_euclid(sub.l as i64)) as f64 / lf))
                    .sum();
                acc += inner * C64::from_polar(1.0, TAU * (p as f64 * r.f - k as f64 * r.tau));
            }
            y[(p + n) as usize] += scene.gains[j] * acc / lf;
        }
    }
    Ok(Observation::new(y))
}

/// U = Σ_j c_j h_j a(r_j)^H.
pub fn lift(scene: &Scene, k: usize, l: usize) -> Result<LiftedMatrix> {
    half_width(l)?;
    scene.validate(Some(k))?;
    let mut m = LiftedMatrix::zeros(k, l);
    let ll = l * l;
    for (j, r) in scene.shifts.iter().enumerate() {
        let a = spectral::atom(*r, l);
        for i in 0..k {
            let w = scene.gains[j] * scene.orientations[j][i];
            for (col, v) in a.v.iter().enumerate() {
                m.u[i * ll + col] += w * *v;
            }
        }
    }
    Ok(m)
}

/// Complex white noise scaled so that 10·log10(‖y‖²/‖n‖²) equals `snr_db` exactly.
pub fn awgn(y: &[C64], snr_db: f64, seed: u64) -> Vec<C64> {
    let mut g = rng::stream(seed, Stream::Noise);
    let w: Vec<C64> = y.iter().map(|_| rng::complex_normal(&mut g)).collect();
    let py: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let pw: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let scale = if pw > 0.0 { (py / pw / 10f64.powf(snr_db / 10.0)).sqrt() } else { 0.0 };
    w.into_iter().map(|z| z * scale).collect()
}
