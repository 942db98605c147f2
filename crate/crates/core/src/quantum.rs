//! Spin-S chains: zero-momentum sector Hamiltonians, level statistics,
//! relaxation dynamics and scar diagnostics.
//!
//! The quantum Hamiltonian mirrors the classical one with the internal
//! coupling `J = J̃/√(S(S+1))`:
//!
//! ```text
//! H = −Σ_i (J Sx_i Sx_{i+1} + 2J Sy_i Sy_{i+1}) + h Σ_i (Sx_i + Sy_i)
//! ```
//!
//! H contains no Sz, so all product-basis work happens in a frame quantized
//! along x: with `(x', y', z') = (y, z, x)` every term is built from Sz' and
//! Sx' and the Hamiltonian is a real symmetric matrix. The physical Sz is Sy'
//! in that frame and is purely imaginary. Full-basis vectors returned by this
//! module (`psi_inf`, lifted eigenvectors) use this frame; [`SpinOperators`]
//! are the ordinary Sz-basis matrices.
//!
//! Besides translations, H commutes with the site reflection `i → −i`, so the
//! zero-momentum sector splits further into reflection-even and -odd blocks.
//! Level statistics need this split. The all-up state is even.
//!
//! Full-basis index of a product state: `Σ_i a_i d^i` with `d = 2S+1` and
//! `a_i = S − m_i` measured in the quantization frame.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat, Side};
use rand::Rng as _;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::vec3::Vec3;
use crate::{par, rng, stats, Error, Result};

pub const DEFAULT_DIM_LIMIT: usize = 20_000;
/// Upper bound on the product-basis size for the symmetry tables and the
/// full-basis propagator.
pub const FULL_DIM_LIMIT: usize = 1 << 22;
pub const R_TRIM: f64 = 0.1;
pub const SCAR_WINDOW: usize = 5;
pub const SCAR_SCORE: f64 = 5.0;
pub const TOP_OVERLAPS: usize = 5;

const NONE: u32 = u32::MAX;

/// Spin quantum number, stored as 2S ∈ {1, 2, 3, 4}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Spin(u32);

/// Serialized as its display form, e.g. "3/2".
impl Serialize for Spin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Spin {
    pub fn from_twice(two_s: u32) -> Result<Self> {
        if (1..=4).contains(&two_s) {
            Ok(Self(two_s))
        } else {
            Err(Error::InvalidParameter(format!("2S must be 1..=4, got {two_s}")))
        }
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// 2S + 1.
    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// S(S+1).
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }

    /// m for local index a, m = S − a.
    fn m(self, a: usize) -> f64 {
        self.value() - a as f64
    }

    /// ⟨a−1|S+|a⟩, zero for a = 0.
    fn raise(self, a: usize) -> f64 {
        if a == 0 {
            return 0.0;
        }
        let m = self.m(a);
        (self.casimir() - m * (m + 1.0)).max(0.0).sqrt()
    }

    /// ⟨a+1|S−|a⟩, zero for a = 2S.
    fn lower(self, a: usize) -> f64 {
        if a + 1 >= self.dim() {
            return 0.0;
        }
        let m = self.m(a);
        (self.casimir() - m * (m - 1.0)).max(0.0).sqrt()
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    /// Accepts "1/2", "3/2", "1", "2" and decimal forms such as "1.5".
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse spin {s:?}"));
        let twice = if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim() {
                "2" => num,
                "1" => 2 * num,
                _ => return Err(bad()),
            }
        } else {
            let x: f64 = s.trim().parse().map_err(|_| bad())?;
            let t = 2.0 * x;
            if (t - t.round()).abs() > 1e-9 || t < 0.5 {
                return Err(bad());
            }
            t.round() as u32
        };
        Spin::from_twice(twice)
    }
}

/// Sx, Sy, Sz in the |m⟩ basis ordered m = S, S−1, …, −S.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub spin: Spin,
    pub sx: Mat<c64>,
    pub sy: Mat<c64>,
    pub sz: Mat<c64>,
}

pub fn spin_operators(spin: Spin) -> SpinOperators {
    let d = spin.dim();
    let mut sx = Mat::<c64>::zeros(d, d);
    let mut sy = Mat::<c64>::zeros(d, d);
    let mut sz = Mat::<c64>::zeros(d, d);
    for a in 0..d {
        sz[(a, a)] = c64::new(spin.m(a), 0.0);
        if a >= 1 {
            // S+ |a⟩ = raise(a) |a−1⟩
            let r = spin.raise(a);
            sx[(a - 1, a)] += c64::new(r / 2.0, 0.0);
            sy[(a - 1, a)] += c64::new(0.0, -r / 2.0);
        }
        if a + 1 < d {
            let l = spin.lower(a);
            sx[(a + 1, a)] += c64::new(l / 2.0, 0.0);
            sy[(a + 1, a)] += c64::new(0.0, l / 2.0);
        }
    }
    SpinOperators { spin, sx, sy, sz }
}

/// Cartesian axis in the physical frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Local matrix of the physical spin component along `axis`, written in the
/// x-quantized frame. Row-major d×d.
fn frame_operator(spin: Spin, axis: Axis) -> Vec<c64> {
    let d = spin.dim();
    let mut op = vec![c64::new(0.0, 0.0); d * d];
    for a in 0..d {
        match axis {
            // Sx = Sz'
            Axis::X => op[a * d + a] = c64::new(spin.m(a), 0.0),
            // Sy = Sx' = (S+ + S−)/2
            Axis::Y => {
                if a >= 1 {
                    op[(a - 1) * d + a] += c64::new(spin.raise(a) / 2.0, 0.0);
                }
                if a + 1 < d {
                    op[(a + 1) * d + a] += c64::new(spin.lower(a) / 2.0, 0.0);
                }
            }
            // Sz = Sy' = (S+ − S−)/(2i)
            Axis::Z => {
                if a >= 1 {
                    op[(a - 1) * d + a] += c64::new(0.0, -spin.raise(a) / 2.0);
                }
                if a + 1 < d {
                    op[(a + 1) * d + a] += c64::new(0.0, spin.lower(a) / 2.0);
                }
            }
        }
    }
    op
}

/// Components of a physical vector along (x', y', z') = (y, z, x).
fn to_frame(n: Vec3) -> Vec3 {
    [n[1], n[2], n[0]]
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Local amplitudes of the spin coherent state pointing along the physical
/// unit vector `n`, in the x-quantized frame.
pub fn coherent_amplitudes(spin: Spin, n: Vec3) -> Vec<c64> {
    let p = to_frame(crate::vec3::normalize(n));
    let theta = p[2].clamp(-1.0, 1.0).acos();
    let phi = p[1].atan2(p[0]);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let two_s = spin.twice();
    (0..spin.dim())
        .map(|a| {
            let m = spin.m(a);
            let up = two_s - a as u32;
            let mag = binomial(two_s, up).sqrt() * c.powi(up as i32) * s.powi(a as i32);
            c64::from_polar(mag, -phi * m)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reflection {
    Even,
    Odd,
    /// Plain zero-momentum sector, both parities mixed.
    Unresolved,
}

/// Zero-momentum (optionally reflection-resolved) sector basis. Symmetric
/// state for representative r: `|r̃⟩ = Σ_{s ∈ orbit(r)} χ_s |s⟩ / √N_r` with
/// χ_s = −1 for states reached only through a reflection in the odd sector.
#[derive(Debug, Clone)]
pub struct MomentumSectorBasis {
    pub spin: Spin,
    pub length: usize,
    pub reflection: Reflection,
    reps: Vec<usize>,
    orbit: Vec<usize>,
    slot: Vec<u32>,
    sign: Vec<i8>,
}

struct Digits {
    d: usize,
    length: usize,
    top: usize,
}

impl Digits {
    fn new(d: usize, length: usize) -> Self {
        Self { d, length, top: d.pow(length as u32 - 1) }
    }

    /// Shift every site down by one, site 0 wraps to L−1.
    fn rotate(&self, s: usize) -> usize {
        s / self.d + (s % self.d) * self.top
    }

    fn reverse(&self, mut s: usize) -> usize {
        let mut r = 0;
        for _ in 0..self.length {
            r = r * self.d + s % self.d;
            s /= self.d;
        }
        r
    }

    fn translation_min(&self, s: usize) -> usize {
        let mut best = s;
        let mut t = s;
        for _ in 1..self.length {
            t = self.rotate(t);
            best = best.min(t);
        }
        best
    }

    fn orbit_size(&self, s: usize, with_reflection: bool) -> usize {
        let mut images = Vec::with_capacity(2 * self.length);
        let mut t = s;
        for _ in 0..self.length {
            images.push(t);
            t = self.rotate(t);
        }
        if with_reflection {
            let mut t = self.reverse(s);
            for _ in 0..self.length {
                images.push(t);
                t = self.rotate(t);
            }
        }
        images.sort_unstable();
        images.dedup();
        images.len()
    }

    fn digit(&self, s: usize, site: usize) -> usize {
        (s / self.d.pow(site as u32)) % self.d
    }
}

pub fn full_dimension(spin: Spin, length: usize) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..length {
        n = n
            .checked_mul(spin.dim())
            .filter(|&n| n <= FULL_DIM_LIMIT)
            .ok_or(Error::DimensionGuard { dim: usize::MAX, limit: FULL_DIM_LIMIT })?;
    }
    Ok(n)
}

impl MomentumSectorBasis {
    pub fn new(spin: Spin, length: usize, reflection: Reflection, limit: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidParameter(format!("L must be at least 2, got {length}")));
        }
        let full = full_dimension(spin, length)?;
        let dg = Digits::new(spin.dim(), length);
        let with_reflection = reflection != Reflection::Unresolved;
        let mut reps = Vec::new();
        let mut orbit = Vec::new();
        let mut slot = vec![NONE; full];
        let mut sign = vec![1i8; full];
        for s in 0..full {
            let tmin = dg.translation_min(s);
            let (rep, mirrored, symmetric) = if with_reflection {
                let rmin = dg.translation_min(dg.reverse(s));
                (tmin.min(rmin), tmin != tmin.min(rmin), tmin == rmin)
            } else {
                (tmin, false, false)
            };
            if reflection == Reflection::Odd && symmetric {
                continue;
            }
            if rep == s {
                slot[s] = reps.len() as u32;
                reps.push(s);
                orbit.push(dg.orbit_size(s, with_reflection));
                if reps.len() > limit {
                    return Err(Error::DimensionGuard { dim: reps.len(), limit });
                }
            } else {
                slot[s] = slot[rep];
            }
            if reflection == Reflection::Odd && mirrored {
                sign[s] = -1;
            }
        }
        Ok(Self { spin, length, reflection, reps, orbit, slot, sign })
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn full_dim(&self) -> usize {
        self.slot.len()
    }

    /// Full-basis index of each representative (smallest index in its orbit).
    pub fn representatives(&self) -> &[usize] {
        &self.reps
    }

    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit
    }

    /// Sector slot and character of a full-basis state, `None` when the state
    /// has no component in this sector.
    pub fn locate(&self, s: usize) -> Option<(usize, f64)> {
        let k = self.slot[s];
        (k != NONE).then(|| (k as usize, self.sign[s] as f64))
    }

    /// Sector vector → full product basis.
    pub fn lift(&self, v: &[f64]) -> Vec<f64> {
        (0..self.full_dim())
            .map(|s| match self.locate(s) {
                Some((k, chi)) => chi * v[k] / (self.orbit[k] as f64).sqrt(),
                None => 0.0,
            })
            .collect()
    }

    /// Sector coordinates ⟨r̃|ψ⟩ of a full-basis vector.
    pub fn project(&self, psi: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.dim()];
        for (s, &amp) in psi.iter().enumerate() {
            if let Some((k, chi)) = self.locate(s) {
                out[k] += amp * chi;
            }
        }
        for (k, x) in out.iter_mut().enumerate() {
            *x /= (self.orbit[k] as f64).sqrt();
        }
        out
    }

    /// Sector coordinates of the translation-invariant product state with
    /// local amplitudes `local`: `√N_r Π_i local[a_i(r)]`, zero in the odd
    /// sector.
    pub fn product_state(&self, local: &[c64]) -> Vec<c64> {
        if self.reflection == Reflection::Odd {
            return vec![c64::new(0.0, 0.0); self.dim()];
        }
        let dg = Digits::new(self.spin.dim(), self.length);
        self.reps
            .iter()
            .zip(&self.orbit)
            .map(|(&r, &n)| {
                let p = (0..self.length).fold(c64::new(1.0, 0.0), |acc, i| acc * local[dg.digit(r, i)]);
                p * (n as f64).sqrt()
            })
            .collect()
    }

    /// Per-representative occupation counts of each local level, used to
    /// evaluate many product states quickly.
    fn level_counts(&self) -> Vec<Vec<u8>> {
        let dg = Digits::new(self.spin.dim(), self.length);
        self.reps
            .iter()
            .map(|&r| {
                let mut c = vec![0u8; self.spin.dim()];
                for i in 0..self.length {
                    c[dg.digit(r, i)] += 1;
                }
                c
            })
            .collect()
    }
}

/// Chain parameters; `coupling` is the renormalized J̃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainParams {
    pub spin: Spin,
    pub length: usize,
    pub coupling: f64,
    pub field: f64,
}

impl ChainParams {
    pub fn new(spin: Spin, length: usize, coupling: f64, field: f64) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidParameter(format!("L must be at least 2, got {length}")));
        }
        if !coupling.is_finite() || !field.is_finite() {
            return Err(Error::InvalidParameter("J̃ and h must be finite".into()));
        }
        Ok(Self { spin, length, coupling, field })
    }

    /// J = J̃/√(S(S+1)).
    pub fn internal_coupling(&self) -> f64 {
        self.coupling / self.spin.casimir().sqrt()
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self { coupling, ..*self }
    }
}

/// Calls `emit(target, amplitude)` for every nonzero `⟨target|H|s⟩` in the
/// x-quantized frame. Targets may repeat.
fn hamiltonian_column(p: &ChainParams, dg: &Digits, s: usize, mut emit: impl FnMut(usize, f64)) {
    let spin = p.spin;
    let (j, h, l) = (p.internal_coupling(), p.field, p.length);
    let a: Vec<usize> = (0..l).map(|i| dg.digit(s, i)).collect();
    let pw: Vec<usize> = (0..l).map(|i| dg.d.pow(i as u32)).collect();
    let mut diag = 0.0;
    for i in 0..l {
        let k = (i + 1) % l;
        diag += -j * spin.m(a[i]) * spin.m(a[k]) + h * spin.m(a[i]);
    }
    emit(s, diag);
    // Ladder moves on one site: (new digit, matrix element) for S+ and S−.
    let moves = |ai: usize| {
        let mut v = [(0usize, 0.0f64); 2];
        let mut n = 0;
        if ai >= 1 {
            v[n] = (ai - 1, spin.raise(ai));
            n += 1;
        }
        if ai + 1 < spin.dim() {
            v[n] = (ai + 1, spin.lower(ai));
            n += 1;
        }
        (v, n)
    };
    for i in 0..l {
        let (mi, ni) = moves(a[i]);
        // h Sx' = (h/2)(S+ + S−)
        for &(b, c) in &mi[..ni] {
            emit(s - a[i] * pw[i] + b * pw[i], h * c / 2.0);
        }
        // −2J Sx'_i Sx'_k = −(J/2)(S+ + S−)_i (S+ + S−)_k
        let k = (i + 1) % l;
        let (mk, nk) = moves(a[k]);
        for &(bi, ci) in &mi[..ni] {
            let si = s - a[i] * pw[i] + bi * pw[i];
            for &(bk, ck) in &mk[..nk] {
                emit(si - a[k] * pw[k] + bk * pw[k], -0.5 * j * ci * ck);
            }
        }
    }
}

/// Sector Hamiltonian together with its basis.
#[derive(Debug, Clone)]
pub struct QuantumChain {
    pub params: ChainParams,
    pub basis: MomentumSectorBasis,
    pub hamiltonian: Mat<f64>,
}

/// Dense real-symmetric Hamiltonian of the chosen zero-momentum block:
/// `⟨r̃'|H|r̃⟩ = √(N_r/N_r') Σ_{s ∈ orbit(r')} χ_s ⟨s|H|r⟩`.
pub fn build_hamiltonian(params: &ChainParams, reflection: Reflection, limit: usize) -> Result<QuantumChain> {
    let basis = MomentumSectorBasis::new(params.spin, params.length, reflection, limit)?;
    let hamiltonian = sector_hamiltonian(params, &basis);
    Ok(QuantumChain { params: *params, basis, hamiltonian })
}

fn sector_hamiltonian(params: &ChainParams, basis: &MomentumSectorBasis) -> Mat<f64> {
    let n = basis.dim();
    let dg = Digits::new(params.spin.dim(), params.length);
    let columns = par::map_range(n, |c| {
        let mut col = vec![0.0; n];
        let r = basis.reps[c];
        let nr = basis.orbit[c] as f64;
        hamiltonian_column(params, &dg, r, |s, amp| {
            if let Some((k, chi)) = basis.locate(s) {
                col[k] += chi * amp * (nr / basis.orbit[k] as f64).sqrt();
            }
        });
        col
    });
    Mat::from_fn(n, n, |i, j| columns[j][i])
}

/// Product-basis Hamiltonian in compressed-row form (x-quantized frame).
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn new(params: &ChainParams) -> Result<Self> {
        let dim = full_dimension(params.spin, params.length)?;
        let dg = Digits::new(params.spin.dim(), params.length);
        let rows = par::map_range(dim, |s| {
            let mut row: Vec<(u32, f64)> = Vec::new();
            // H is symmetric, so the column of s is also its row.
            hamiltonian_column(params, &dg, s, |t, amp| row.push((t as u32, amp)));
            row.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged
        });
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { dim, row_ptr, cols, vals })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, x: &[c64], y: &mut [c64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *out = acc;
        }
    }

    /// ⟨x|H|x⟩ for a normalized x.
    pub fn expectation(&self, x: &[c64]) -> f64 {
        let mut y = vec![c64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Dense product-basis Hamiltonian in the ordinary Sz basis, assembled from
/// [`spin_operators`] by explicit tensor products. Only for small checks.
pub fn dense_full_hamiltonian(params: &ChainParams) -> Result<Mat<c64>> {
    let dim = full_dimension(params.spin, params.length)?;
    if dim > 4096 {
        return Err(Error::DimensionGuard { dim, limit: 4096 });
    }
    let ops = spin_operators(params.spin);
    let (j, h, l) = (params.internal_coupling(), params.field, params.length);
    let mut out = Mat::<c64>::zeros(dim, dim);
    let one = c64::new(1.0, 0.0);
    for i in 0..l {
        let k = (i + 1) % l;
        add_two_site(&mut out, params.spin, l, i, k, &ops.sx, &ops.sx, one * (-j));
        add_two_site(&mut out, params.spin, l, i, k, &ops.sy, &ops.sy, one * (-2.0 * j));
        add_one_site(&mut out, params.spin, l, i, &ops.sx, one * h);
        add_one_site(&mut out, params.spin, l, i, &ops.sy, one * h);
    }
    Ok(out)
}

fn add_one_site(out: &mut Mat<c64>, spin: Spin, l: usize, i: usize, op: &Mat<c64>, coef: c64) {
    let dg = Digits::new(spin.dim(), l);
    let pw = spin.dim().pow(i as u32);
    for s in 0..out.ncols() {
        let a = dg.digit(s, i);
        for b in 0..spin.dim() {
            let v = op[(b, a)];
            if v != c64::new(0.0, 0.0) {
                out[(s - a * pw + b * pw, s)] += coef * v;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn add_two_site(out: &mut Mat<c64>, spin: Spin, l: usize, i: usize, k: usize, oi: &Mat<c64>, ok: &Mat<c64>, coef: c64) {
    let dg = Digits::new(spin.dim(), l);
    let (pi, pk) = (spin.dim().pow(i as u32), spin.dim().pow(k as u32));
    let zero = c64::new(0.0, 0.0);
    for s in 0..out.ncols() {
        let (ai, ak) = (dg.digit(s, i), dg.digit(s, k));
        for bi in 0..spin.dim() {
            let vi = oi[(bi, ai)];
            if vi == zero {
                continue;
            }
            let si = s - ai * pi + bi * pi;
            for bk in 0..spin.dim() {
                let vk = ok[(bk, ak)];
                if vk != zero {
                    out[(si - ak * pk + bk * pk, s)] += coef * vi * vk;
                }
            }
        }
    }
}

/// Translation by one site as a product-basis permutation matrix.
pub fn dense_translation(spin: Spin, length: usize) -> Result<Mat<c64>> {
    let dim = full_dimension(spin, length)?;
    if dim > 4096 {
        return Err(Error::DimensionGuard { dim, limit: 4096 });
    }
    let dg = Digits::new(spin.dim(), length);
    let mut t = Mat::<c64>::zeros(dim, dim);
    for s in 0..dim {
        t[(dg.rotate(s), s)] = c64::new(1.0, 0.0);
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column n is the eigenvector of `values[n]` in the sector basis.
    pub vectors: Mat<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, n: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, n)]).collect()
    }

    /// Eigenbasis coefficients ⟨E_n|ψ⟩ of a sector vector.
    pub fn coefficients(&self, psi: &[c64]) -> Result<Vec<c64>> {
        if psi.len() != self.vectors.nrows() {
            return Err(Error::DimensionMismatch { expected: self.vectors.nrows(), got: psi.len() });
        }
        Ok(par::map_range(self.dim(), |n| {
            let mut acc = c64::new(0.0, 0.0);
            for (i, p) in psi.iter().enumerate() {
                acc += *p * self.vectors[(i, n)];
            }
            acc
        }))
    }

    /// |⟨E_n|ψ⟩|².
    pub fn overlaps(&self, psi: &[c64]) -> Result<Vec<f64>> {
        Ok(self.coefficients(psi)?.iter().map(|c| c.norm_sqr()).collect())
    }
}

pub fn diagonalize(h: &Mat<f64>) -> Result<EigenDecomposition> {
    let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&k| s[k]).collect();
    let u = eig.U();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(EigenDecomposition { values, vectors })
}

pub fn eigenvalues(h: &Mat<f64>) -> Result<Vec<f64>> {
    let mut v = h.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

impl QuantumChain {
    pub fn diagonalize(&self) -> Result<EigenDecomposition> {
        diagonalize(&self.hamiltonian)
    }

    /// Ψup in sector coordinates (zero in the odd block).
    pub fn psi_up(&self) -> Vec<c64> {
        psi_up(&self.basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RStatistic {
    pub mean: f64,
    /// Number of r values averaged.
    pub count: usize,
    /// Spacing pairs with a zero spacing, counted as r = 0.
    pub degenerate: usize,
}

/// r_n = min(s_n, s_{n−1})/max(s_n, s_{n−1}) after dropping `trim` of the
/// levels at each spectral edge.
pub fn r_values(levels: &[f64], trim: f64) -> (Vec<f64>, usize) {
    let mut e = levels.to_vec();
    e.sort_by(|a, b| a.total_cmp(b));
    let cut = (trim * e.len() as f64).floor() as usize;
    let e = &e[cut..e.len() - cut];
    let mut out = Vec::new();
    let mut degenerate = 0;
    for w in e.windows(3) {
        let (s0, s1) = (w[1] - w[0], w[2] - w[1]);
        let hi = s0.max(s1);
        if hi <= 0.0 || s0.min(s1) <= 0.0 {
            degenerate += 1;
            out.push(0.0);
        } else {
            out.push(s0.min(s1) / hi);
        }
    }
    (out, degenerate)
}

pub fn r_statistic(levels: &[f64], trim: f64) -> Result<RStatistic> {
    pooled_r_statistic(&[levels], trim)
}

/// ⟨r⟩ pooled over independent symmetry blocks, each with at least 100 levels.
pub fn pooled_r_statistic(blocks: &[&[f64]], trim: f64) -> Result<RStatistic> {
    let mut all = Vec::new();
    let mut degenerate = 0;
    for b in blocks {
        if b.len() < 100 {
            return Err(Error::InvalidParameter(format!("need at least 100 levels per block, got {}", b.len())));
        }
        let (r, d) = r_values(b, trim);
        all.extend(r);
        degenerate += d;
    }
    Ok(RStatistic { mean: stats::mean(&all), count: all.len(), degenerate })
}

/// ⟨r⟩ of the zero-momentum sector, pooled over its two reflection blocks.
pub fn chain_r_statistic(params: &ChainParams, trim: f64) -> Result<RStatistic> {
    let even = eigenvalues(&build_hamiltonian(params, Reflection::Even, DEFAULT_DIM_LIMIT)?.hamiltonian)?;
    let odd = eigenvalues(&build_hamiltonian(params, Reflection::Odd, DEFAULT_DIM_LIMIT)?.hamiltonian)?;
    pooled_r_statistic(&[&even, &odd], trim)
}

/// All spins in |m = S⟩ along the physical z axis, in sector coordinates.
pub fn psi_up(basis: &MomentumSectorBasis) -> Vec<c64> {
    basis.product_state(&coherent_amplitudes(basis.spin, [0.0, 0.0, 1.0]))
}

/// Site 0 in |m = S⟩, the other sites in a random pure state with complex
/// Gaussian amplitudes (|c|² exponential with mean 1/N, uniform phases),
/// normalized. Full basis, x-quantized frame.
pub fn psi_inf(spin: Spin, length: usize, seed: u64) -> Result<Vec<c64>> {
    let full = full_dimension(spin, length)?;
    let d = spin.dim();
    let rest = full / d;
    let up = coherent_amplitudes(spin, [0.0, 0.0, 1.0]);
    let mut rng = rng::rng_from_seed(seed);
    let exp = Exp::new(rest as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let c: Vec<c64> = (0..rest)
        .map(|_| {
            let w: f64 = exp.sample(&mut rng);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            c64::from_polar(w.sqrt(), phase)
        })
        .collect();
    let mut psi: Vec<c64> = (0..full).map(|s| up[s % d] * c[s / d]).collect();
    let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|x| *x /= norm);
    Ok(psi)
}

/// ⟨ψ|S^axis_site|ψ⟩ for a full-basis vector.
pub fn site_expectation(spin: Spin, length: usize, psi: &[c64], site: usize, axis: Axis) -> f64 {
    let d = spin.dim();
    let op = frame_operator(spin, axis);
    let dg = Digits::new(d, length);
    let pw = d.pow(site as u32);
    let mut acc = c64::new(0.0, 0.0);
    for (s, &x) in psi.iter().enumerate() {
        if x == c64::new(0.0, 0.0) {
            continue;
        }
        let a = dg.digit(s, site);
        for b in 0..d {
            let v = op[b * d + a];
            if v != c64::new(0.0, 0.0) {
                acc += psi[s - a * pw + b * pw].conj() * v * x;
            }
        }
    }
    acc.re
}

/// O = re + i·im in sector coordinates.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub re: Mat<f64>,
    pub im: Mat<f64>,
}

/// (1/L) Σ_i S^axis_i restricted to the sector. For translation-invariant
/// states its expectation equals that of S^axis_1.
pub fn site_average_operator(basis: &MomentumSectorBasis, axis: Axis) -> SectorOperator {
    let spin = basis.spin;
    let d = spin.dim();
    let l = basis.length;
    let op = frame_operator(spin, axis);
    let dg = Digits::new(d, l);
    let n = basis.dim();
    let columns = par::map_range(n, |c| {
        let mut col = vec![c64::new(0.0, 0.0); n];
        let r = basis.reps[c];
        let nr = basis.orbit[c] as f64;
        for i in 0..l {
            let pw = d.pow(i as u32);
            let a = dg.digit(r, i);
            for b in 0..d {
                let v = op[b * d + a];
                if v == c64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((k, chi)) = basis.locate(r - a * pw + b * pw) {
                    col[k] += v * (chi * (nr / basis.orbit[k] as f64).sqrt() / l as f64);
                }
            }
        }
        col
    });
    SectorOperator {
        re: Mat::from_fn(n, n, |i, j| columns[j][i].re),
        im: Mat::from_fn(n, n, |i, j| columns[j][i].im),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relaxation {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// max_t |‖ψ(t)‖ − 1|
    pub max_norm_error: f64,
    /// max_t |⟨H⟩(t) − ⟨H⟩(0)|
    pub max_energy_drift: f64,
}

/// Observable `op` expressed in the eigenbasis, kept for repeated evolutions.
#[derive(Debug, Clone)]
pub struct EigenOperator {
    pub re: Mat<f64>,
    pub im: Mat<f64>,
}

pub fn to_eigenbasis(eig: &EigenDecomposition, op: &SectorOperator) -> Result<EigenOperator> {
    let n = eig.dim();
    if op.re.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: op.re.nrows() });
    }
    let u = &eig.vectors;
    let re = u.transpose() * (&op.re * u);
    let im = u.transpose() * (&op.im * u);
    Ok(EigenOperator { re, im })
}

/// ⟨ψ(t)|O|ψ(t)⟩ on `times` for a sector state, evolved exactly in the
/// eigenbasis.
pub fn evolve_observable(eig: &EigenDecomposition, psi: &[c64], op: &SectorOperator, times: &[f64]) -> Result<Relaxation> {
    let o = to_eigenbasis(eig, op)?;
    let c = eig.coefficients(psi)?;
    Ok(evolve_in_eigenbasis(eig, &c, &o, times))
}

pub fn evolve_in_eigenbasis(eig: &EigenDecomposition, c: &[c64], o: &EigenOperator, times: &[f64]) -> Relaxation {
    let n = eig.dim();
    let e = &eig.values;
    let norm0: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    let energy0: f64 = c.iter().zip(e).map(|(x, en)| x.norm_sqr() * en).sum();
    let rows = par::map(times, |&t| {
        let a: Vec<c64> = c.iter().zip(e).map(|(x, en)| *x * c64::from_polar(1.0, -en * t)).collect();
        let mut value = 0.0;
        for m in 0..n {
            let (mut wr, mut wi) = (c64::new(0.0, 0.0), c64::new(0.0, 0.0));
            for (k, ak) in a.iter().enumerate() {
                wr += *ak * o.re[(k, m)];
                wi += *ak * o.im[(k, m)];
            }
            // (O a)_m = wr_m − i wi_m because re is symmetric and im antisymmetric.
            value += (a[m].conj() * wr).re + (a[m].conj() * wi).im;
        }
        let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let energy: f64 = a.iter().zip(e).map(|(x, en)| x.norm_sqr() * en).sum();
        (value, (norm.sqrt() - norm0.sqrt()).abs(), (energy - energy0).abs())
    });
    Relaxation {
        times: times.to_vec(),
        values: rows.iter().map(|r| r.0).collect(),
        max_norm_error: rows.iter().map(|r| r.1).fold((norm0.sqrt() - 1.0).abs(), f64::max),
        max_energy_drift: rows.iter().map(|r| r.2).fold(0.0, f64::max),
    }
}

/// Infinite-time average Σ_n |c_n|² O_nn.
pub fn diagonal_ensemble(c: &[c64], o: &EigenOperator) -> f64 {
    c.iter().enumerate().map(|(n, x)| x.norm_sqr() * o.re[(n, n)]).sum()
}

const KRYLOV_MAX: usize = 60;
const KRYLOV_TOL: f64 = 1e-12;

/// exp(−i H dt) ψ by a Lanczos (Krylov) projection with full
/// reorthogonalization; halves the step when the subspace bound is reached.
pub fn krylov_step(h: &SparseHamiltonian, psi: &mut [c64], dt: f64) -> Result<()> {
    if psi.len() != h.dim {
        return Err(Error::DimensionMismatch { expected: h.dim, got: psi.len() });
    }
    if try_krylov(h, psi, dt)? {
        return Ok(());
    }
    if dt.abs() < 1e-8 {
        return Err(Error::Eigen("Krylov propagation did not converge".into()));
    }
    krylov_step(h, psi, dt / 2.0)?;
    krylov_step(h, psi, dt / 2.0)
}

fn try_krylov(h: &SparseHamiltonian, psi: &mut [c64], dt: f64) -> Result<bool> {
    let n = h.dim;
    let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(true);
    }
    let mut basis: Vec<Vec<c64>> = vec![psi.iter().map(|x| *x / norm).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![c64::new(0.0, 0.0); n];
    loop {
        let k = basis.len() - 1;
        h.apply(&basis[k], &mut w);
        let a: f64 = basis[k].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let proj: c64 = v.iter().zip(&w).map(|(vi, wi)| vi.conj() * wi).sum();
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= proj * vi);
            }
        }
        let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let m = alpha.len();
        let check = m >= KRYLOV_MAX || b < 1e-14 || (m >= 8 && m % 4 == 0);
        if check {
            let y = tridiagonal_exp(&alpha, &beta, dt)?;
            let err = b * y[m - 1].norm();
            if err < KRYLOV_TOL || b < 1e-14 {
                for x in psi.iter_mut() {
                    *x = c64::new(0.0, 0.0);
                }
                for (v, yk) in basis.iter().zip(&y) {
                    psi.iter_mut().zip(v).for_each(|(p, vi)| *p += *yk * vi * norm);
                }
                return Ok(true);
            }
            if m >= KRYLOV_MAX {
                return Ok(false);
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| *x / b).collect());
    }
}

/// exp(−i T dt) e₁ for the symmetric tridiagonal T(alpha, beta).
fn tridiagonal_exp(alpha: &[f64], beta: &[f64], dt: f64) -> Result<Vec<c64>> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    Ok((0..m)
        .map(|i| (0..m).map(|k| c64::from_polar(u[(0, k)] * u[(i, k)], -s[k] * dt)).sum())
        .collect())
}

/// Full-basis evolution sampled on a uniform grid `times` (starting at 0),
/// with `observable` evaluated on ψ(t).
pub fn evolve_full(
    h: &SparseHamiltonian,
    psi0: &[c64],
    times: &[f64],
    observable: impl Fn(&[c64]) -> f64,
) -> Result<Relaxation> {
    let mut psi = psi0.to_vec();
    let e0 = h.expectation(&psi);
    let mut t = 0.0;
    let mut values = Vec::with_capacity(times.len());
    let (mut max_norm_error, mut max_energy_drift) = (0.0f64, 0.0f64);
    for &target in times {
        if target < t {
            return Err(Error::InvalidParameter("time grid must be ascending from 0".into()));
        }
        if target > t {
            krylov_step(h, &mut psi, target - t)?;
            t = target;
        }
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        max_norm_error = max_norm_error.max((norm - 1.0).abs());
        max_energy_drift = max_energy_drift.max((h.expectation(&psi) - e0).abs());
        values.push(observable(&psi));
    }
    Ok(Relaxation { times: times.to_vec(), values, max_norm_error, max_energy_drift })
}

/// Von Neumann entropy (natural log) of sites `0..cut` for a full-basis
/// vector; density-matrix eigenvalues below 1e-14 are dropped.
pub fn entanglement_entropy(psi: &[c64], spin: Spin, length: usize, cut: usize) -> f64 {
    let (da, db) = cut_dims(spin, length, cut);
    let m = Mat::<c64>::from_fn(da, db, |i, j| psi[i + da * j]);
    let rho = if da <= db { &m * m.adjoint() } else { m.adjoint() * &m };
    entropy_of(rho.self_adjoint_eigenvalues(Side::Lower).unwrap_or_default())
}

fn entropy_real(psi: &[f64], spin: Spin, length: usize, cut: usize) -> f64 {
    let (da, db) = cut_dims(spin, length, cut);
    let m = Mat::<f64>::from_fn(da, db, |i, j| psi[i + da * j]);
    let rho = if da <= db { &m * m.transpose() } else { m.transpose() * &m };
    entropy_of(rho.self_adjoint_eigenvalues(Side::Lower).unwrap_or_default())
}

fn cut_dims(spin: Spin, length: usize, cut: usize) -> (usize, usize) {
    let cut = cut.min(length);
    (spin.dim().pow(cut as u32), spin.dim().pow((length - cut) as u32))
}

fn entropy_of(p: Vec<f64>) -> f64 {
    p.into_iter().filter(|&x| x > 1e-14).map(|x| -x * x.ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScarRow {
    pub index: usize,
    pub energy: f64,
    /// Half-chain entropy in nats.
    pub entropy: f64,
    /// Entropy divided by the sector maximum.
    pub entropy_normalized: f64,
    pub overlap: f64,
    /// (median ℰ of the ±5 neighbours − ℰ_n) / MAD of the neighbours.
    pub outlier_score: f64,
    pub top_overlap: bool,
    pub central: bool,
    pub scar: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScarReport {
    pub params: ChainParams,
    pub rows: Vec<ScarRow>,
    pub overlap_sum: f64,
}

impl ScarReport {
    pub fn max_overlap(&self) -> &ScarRow {
        self.rows.iter().max_by(|a, b| a.overlap.total_cmp(&b.overlap)).expect("report has rows")
    }

    pub fn scars(&self) -> impl Iterator<Item = &ScarRow> {
        self.rows.iter().filter(|r| r.scar)
    }
}

/// Scar diagnostics on the reflection-even zero-momentum block, the block
/// that carries all of Ψup.
pub fn scar_report(params: &ChainParams) -> Result<(ScarReport, QuantumChain, EigenDecomposition)> {
    let chain = build_hamiltonian(params, Reflection::Even, DEFAULT_DIM_LIMIT)?;
    let eig = chain.diagonalize()?;
    let report = scar_report_from(&chain, &eig)?;
    Ok((report, chain, eig))
}

pub fn scar_report_from(chain: &QuantumChain, eig: &EigenDecomposition) -> Result<ScarReport> {
    let n = eig.dim();
    let overlaps = eig.overlaps(&chain.psi_up())?;
    let (spin, length) = (chain.params.spin, chain.params.length);
    let cut = length / 2;
    let entropy = par::map_range(n, |k| entropy_real(&chain.basis.lift(&eig.vector(k)), spin, length, cut));
    let emax = entropy.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| overlaps[b].total_cmp(&overlaps[a]));
    let top: Vec<usize> = order.into_iter().take(TOP_OVERLAPS).collect();
    let rows = (0..n)
        .map(|k| {
            let score = outlier_score(&entropy, k, SCAR_WINDOW);
            let central = 4 * k >= n && 4 * k < 3 * n;
            ScarRow {
                index: k,
                energy: eig.values[k],
                entropy: entropy[k],
                entropy_normalized: if emax > 0.0 { entropy[k] / emax } else { 0.0 },
                overlap: overlaps[k],
                outlier_score: score,
                top_overlap: top.contains(&k),
                central,
                scar: central && score > SCAR_SCORE,
            }
        })
        .collect();
    Ok(ScarReport { params: chain.params, rows, overlap_sum: overlaps.iter().sum() })
}

/// (median − x_k)/MAD over the `window` neighbours on each side of k.
pub fn outlier_score(xs: &[f64], k: usize, window: usize) -> f64 {
    let lo = k.saturating_sub(window);
    let hi = (k + window + 1).min(xs.len());
    let neighbours: Vec<f64> = (lo..hi).filter(|&i| i != k).map(|i| xs[i]).collect();
    if neighbours.is_empty() {
        return 0.0;
    }
    let med = stats::median(&neighbours);
    let mad = stats::mad(&neighbours).max(1e-15);
    (med - xs[k]) / mad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SphericalGrid {
    fn default() -> Self {
        Self { n_theta: 90, n_phi: 180 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalMap {
    /// θ_i = iπ/(n_θ − 1), both poles included.
    pub theta: Vec<f64>,
    /// φ_j = 2πj/n_φ.
    pub phi: Vec<f64>,
    /// Row-major in θ.
    pub values: Vec<f64>,
}

impl SphericalMap {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi.len() + j]
    }
}

/// |⟨E_n|Ψ(θ,φ)⟩|² with every spin polarized along n(θ, φ).
pub fn spherical_overlap_map(basis: &MomentumSectorBasis, eigenvector: &[f64], grid: SphericalGrid) -> Result<SphericalMap> {
    if eigenvector.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: eigenvector.len() });
    }
    if grid.n_theta < 2 || grid.n_phi < 1 {
        return Err(Error::InvalidParameter("spherical grid needs n_theta ≥ 2 and n_phi ≥ 1".into()));
    }
    let theta: Vec<f64> = (0..grid.n_theta).map(|i| i as f64 * std::f64::consts::PI / (grid.n_theta - 1) as f64).collect();
    let phi: Vec<f64> = (0..grid.n_phi).map(|j| j as f64 * std::f64::consts::TAU / grid.n_phi as f64).collect();
    let counts = basis.level_counts();
    let weights: Vec<f64> = basis.orbit.iter().zip(eigenvector).map(|(&n, v)| v * (n as f64).sqrt()).collect();
    let points: Vec<(f64, f64)> = theta.iter().flat_map(|&t| phi.iter().map(move |&p| (t, p))).collect();
    let values = par::map(&points, |&(t, p)| {
        if basis.reflection == Reflection::Odd {
            return 0.0;
        }
        let local = coherent_amplitudes(basis.spin, crate::vec3::from_angles(t, p));
        let powers: Vec<Vec<c64>> = local
            .iter()
            .map(|c| {
                let mut pw = vec![c64::new(1.0, 0.0); basis.length + 1];
                for k in 1..=basis.length {
                    pw[k] = pw[k - 1] * c;
                }
                pw
            })
            .collect();
        let mut acc = c64::new(0.0, 0.0);
        for (cnt, w) in counts.iter().zip(&weights) {
            let mut prod = c64::new(*w, 0.0);
            for (a, &k) in cnt.iter().enumerate() {
                prod *= powers[a][k as usize];
            }
            acc += prod;
        }
        acc.norm_sqr()
    });
    Ok(SphericalMap { theta, phi, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandContrast {
    pub on_mean: f64,
    pub off_median: f64,
    pub ratio: f64,
    pub on_points: usize,
    pub off_points: usize,
}

/// Mean map value within angular distance `band` of the classical orbit
/// against the median beyond `off`. Grid points are weighted equally.
pub fn orbit_band_contrast(map: &SphericalMap, orbit: &[Vec3], band: f64, off: f64) -> BandContrast {
    let mut on = Vec::new();
    let mut rest = Vec::new();
    for (i, &t) in map.theta.iter().enumerate() {
        for (j, &p) in map.phi.iter().enumerate() {
            let n = crate::vec3::from_angles(t, p);
            let dist = orbit.iter().map(|&s| crate::vec3::angle_between(n, s)).fold(f64::INFINITY, f64::min);
            let v = map.at(i, j);
            if dist <= band {
                on.push(v);
            } else if dist >= off {
                rest.push(v);
            }
        }
    }
    let on_mean = stats::mean(&on);
    let off_median = stats::median(&rest);
    BandContrast { on_mean, off_median, ratio: on_mean / off_median, on_points: on.len(), off_points: rest.len() }
}

/// 𝒫 = 1/Σ p_n² for overlaps p_n.
pub fn participation_ratio(overlaps: &[f64]) -> f64 {
    1.0 / overlaps.iter().map(|p| p * p).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub coupling: f64,
    pub participation: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrScan {
    pub points: Vec<PrPoint>,
    /// Vertex of the parabola through the largest sample and its neighbours.
    pub peak_coupling: f64,
    pub peak_value: f64,
    /// Height of the maximum of the 3-point running mean above the higher of
    /// the lowest smoothed values on either side of it.
    pub prominence: f64,
    pub relative_prominence: f64,
}

pub fn participation_ratio_scan(spin: Spin, length: usize, couplings: &[f64], field: f64) -> Result<PrScan> {
    if couplings.len() < 3 {
        return Err(Error::InvalidParameter("J̃ grid needs at least 3 points".into()));
    }
    let points: Result<Vec<PrPoint>> = par::map(couplings, |&jt| {
        let params = ChainParams::new(spin, length, jt, field)?;
        let chain = build_hamiltonian(&params, Reflection::Even, DEFAULT_DIM_LIMIT)?;
        let eig = chain.diagonalize()?;
        let overlaps = eig.overlaps(&chain.psi_up())?;
        Ok(PrPoint { coupling: jt, participation: participation_ratio(&overlaps), dim: eig.dim() })
    })
    .into_iter()
    .collect();
    Ok(summarize_peak(points?))
}

/// Mean of ⟨S1z(t)⟩/S from |Ψup⟩ over `[0, window]`, sampled every 0.05.
/// Libration-like dynamics oscillate around zero, rotation-like dynamics
/// keep a positive offset.
pub fn relaxation_baseline(params: &ChainParams, window: f64) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::InvalidParameter("baseline window must be positive".into()));
    }
    let chain = build_hamiltonian(params, Reflection::Even, DEFAULT_DIM_LIMIT)?;
    let eig = chain.diagonalize()?;
    let steps = (window / 0.05).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|k| window * k as f64 / steps as f64).collect();
    let op = site_average_operator(&chain.basis, Axis::Z);
    let r = evolve_observable(&eig, &chain.psi_up(), &op, &times)?;
    Ok(stats::mean(&r.values) / params.spin.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossover {
    /// First J̃ where the baseline reaches 10% of its rise over the scan.
    pub lower: f64,
    /// First J̃ where it reaches 90%.
    pub upper: f64,
}

impl Crossover {
    pub fn contains(&self, coupling: f64) -> bool {
        self.lower <= coupling && coupling <= self.upper
    }
}

/// 10–90% rise interval of `baselines` against increasing `couplings`, by
/// linear interpolation. `None` if the baseline does not rise.
pub fn crossover_region(couplings: &[f64], baselines: &[f64]) -> Option<Crossover> {
    let n = couplings.len().min(baselines.len());
    if n < 2 {
        return None;
    }
    let (lo, hi) = (baselines[0], baselines[n - 1]);
    if !(hi > lo) {
        return None;
    }
    let level = |frac: f64| {
        let target = lo + frac * (hi - lo);
        (1..n).find(|&k| baselines[k] >= target).map(|k| {
            let (x0, x1, y0, y1) = (couplings[k - 1], couplings[k], baselines[k - 1], baselines[k]);
            if y1 > y0 { x0 + (target - y0) / (y1 - y0) * (x1 - x0) } else { x1 }
        })
    };
    Some(Crossover { lower: level(0.1)?, upper: level(0.9)? })
}

pub fn summarize_peak(points: Vec<PrPoint>) -> PrScan {
    let y: Vec<f64> = points.iter().map(|p| p.participation).collect();
    let k = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
    let (peak_coupling, peak_value) = if k > 0 && k + 1 < y.len() {
        let (xm, x0, xp) = (points[k - 1].coupling, points[k].coupling, points[k + 1].coupling);
        let step = 0.5 * (xp - xm);
        let (u, v) = stats::parabolic_vertex(y[k - 1], y[k], y[k + 1]);
        if ((x0 - xm) - (xp - x0)).abs() < 1e-9 * step.abs().max(1.0) {
            (x0 + u * step, v)
        } else {
            (x0, y[k])
        }
    } else {
        (points[k].coupling, y[k])
    };
    // Prominence is taken on a 3-point running mean so that a single-point
    // spike from level fluctuations does not count as a peak.
    let smooth: Vec<f64> = if y.len() >= 3 { y.windows(3).map(|w| (w[0] + w[1] + w[2]) / 3.0).collect() } else { y.clone() };
    let ks = smooth.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
    let left = smooth[..=ks].iter().cloned().fold(f64::INFINITY, f64::min);
    let right = smooth[ks..].iter().cloned().fold(f64::INFINITY, f64::min);
    let prominence = smooth[ks] - left.max(right);
    PrScan { points, peak_coupling, peak_value, prominence, relative_prominence: prominence / smooth[ks] }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins() -> Vec<Spin> {
        (1..=4).map(|t| Spin::from_twice(t).unwrap()).collect()
    }

    fn scaled(m: &Mat<c64>, c: c64) -> Mat<c64> {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
    }

    fn max_abs(m: &Mat<c64>) -> f64 {
        let mut x: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                x = x.max(m[(i, j)].norm());
            }
        }
        x
    }

    #[test]
    fn operator_algebra() {
        for s in spins() {
            let o = spin_operators(s);
            let d = s.dim();
            let comm = &o.sx * &o.sy - &o.sy * &o.sx;
            let target = scaled(&o.sz, c64::new(0.0, 1.0));
            assert!(max_abs(&(comm - target)) < 1e-12);
            let cas = &o.sx * &o.sx + &o.sy * &o.sy + &o.sz * &o.sz;
            let id = Mat::<c64>::from_fn(d, d, |i, j| if i == j { c64::new(s.casimir(), 0.0) } else { c64::new(0.0, 0.0) });
            assert!(max_abs(&(cas - id)) < 1e-12);
            for m in [&o.sx, &o.sy, &o.sz] {
                assert!(max_abs(&(m - m.adjoint())) < 1e-15);
            }
            for a in 0..d {
                assert_eq!(o.sz[(a, a)].re, s.value() - a as f64);
            }
        }
    }

    #[test]
    fn spin_parsing() {
        assert_eq!("1/2".parse::<Spin>().unwrap().twice(), 1);
        assert_eq!("1.5".parse::<Spin>().unwrap().twice(), 3);
        assert_eq!("2".parse::<Spin>().unwrap().to_string(), "2");
        assert_eq!(Spin::from_twice(3).unwrap().to_string(), "3/2");
        assert!("0".parse::<Spin>().is_err());
        assert!("5/2".parse::<Spin>().is_err());
        assert!("0.7".parse::<Spin>().is_err());
    }

    #[test]
    fn frame_operators_follow_the_axis_relabeling() {
        // In the frame the operators must satisfy [Sx, Sy] = i Sz as well.
        for s in spins() {
            let d = s.dim();
            let m = |axis| {
                let op = frame_operator(s, axis);
                Mat::<c64>::from_fn(d, d, |i, j| op[i * d + j])
            };
            let (x, y, z) = (m(Axis::X), m(Axis::Y), m(Axis::Z));
            let comm = &x * &y - &y * &x;
            assert!(max_abs(&(comm - scaled(&z, c64::new(0.0, 1.0)))) < 1e-12);
        }
    }

    #[test]
    fn coherent_states_point_along_n() {
        for s in spins() {
            let d = s.dim();
            for n in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.2, -0.5, 0.3]] {
                let n = crate::vec3::normalize(n);
                let c = coherent_amplitudes(s, n);
                let norm: f64 = c.iter().map(|x| x.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
                for (axis, comp) in [(Axis::X, n[0]), (Axis::Y, n[1]), (Axis::Z, n[2])] {
                    let op = frame_operator(s, axis);
                    let mut e = c64::new(0.0, 0.0);
                    for i in 0..d {
                        for j in 0..d {
                            e += c[i].conj() * op[i * d + j] * c[j];
                        }
                    }
                    assert!((e.re - s.value() * comp).abs() < 1e-12, "{s} {n:?} {axis:?}");
                }
            }
        }
    }

    /// Necklace and bracelet counts by Burnside's lemma.
    fn burnside(d: usize, l: usize) -> (usize, usize) {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        let necklaces: usize = (0..l).map(|k| d.pow(gcd(k, l) as u32)).sum::<usize>() / l;
        let reflections = if l % 2 == 1 {
            l * d.pow((l as u32 + 1) / 2)
        } else {
            (l / 2) * (d.pow(l as u32 / 2 + 1) + d.pow(l as u32 / 2))
        };
        let bracelets = (necklaces * l + reflections) / (2 * l);
        (necklaces, bracelets)
    }

    #[test]
    fn sector_dimensions_match_orbit_counting() {
        for (two_s, l) in [(1, 12), (1, 13), (2, 7), (3, 5), (4, 6), (1, 2), (2, 3)] {
            let s = Spin::from_twice(two_s).unwrap();
            let (neck, brace) = burnside(s.dim(), l);
            let all = MomentumSectorBasis::new(s, l, Reflection::Unresolved, usize::MAX).unwrap();
            let even = MomentumSectorBasis::new(s, l, Reflection::Even, usize::MAX).unwrap();
            let odd = MomentumSectorBasis::new(s, l, Reflection::Odd, usize::MAX).unwrap();
            assert_eq!(all.dim(), neck, "S={s} L={l}");
            assert_eq!(even.dim(), brace);
            assert_eq!(odd.dim(), neck - brace);
            assert_eq!(all.orbit_sizes().iter().sum::<usize>(), all.full_dim());
            assert_eq!(even.orbit_sizes().iter().sum::<usize>(), all.full_dim());
        }
        let s2 = Spin::from_twice(4).unwrap();
        let b = MomentumSectorBasis::new(s2, 6, Reflection::Unresolved, usize::MAX).unwrap();
        assert_eq!(b.dim(), 2635);
        assert!(MomentumSectorBasis::new(s2, 6, Reflection::Unresolved, 1000).is_err());
    }

    #[test]
    fn representatives_are_smallest_in_orbit() {
        let s = Spin::from_twice(2).unwrap();
        let b = MomentumSectorBasis::new(s, 5, Reflection::Even, usize::MAX).unwrap();
        for st in 0..b.full_dim() {
            let (k, _) = b.locate(st).unwrap();
            assert!(b.representatives()[k] <= st);
        }
    }

    #[test]
    fn two_site_spectrum_matches_bell_basis() {
        // h = 0: S1·S2 terms are diagonal in the Bell basis, and with periodic
        // boundaries the bond appears twice, giving −2J(xx + 2yy)/4.
        let s = Spin::from_twice(1).unwrap();
        let jt = 1.3;
        let p = ChainParams::new(s, 2, jt, 0.0).unwrap();
        let j = p.internal_coupling();
        let h = dense_full_hamiltonian(&p).unwrap();
        let mut e: Vec<f64> = h.self_adjoint_eigenvalues(Side::Lower).unwrap();
        e.sort_by(|a, b| a.total_cmp(b));
        let mut want = vec![-1.5 * j, -0.5 * j, 0.5 * j, 1.5 * j];
        want.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in e.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn spectrum_of_sectors(p: &ChainParams, refl: &[Reflection]) -> Vec<f64> {
        let mut e = Vec::new();
        for &r in refl {
            e.extend(eigenvalues(&build_hamiltonian(p, r, usize::MAX).unwrap().hamiltonian).unwrap());
        }
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    /// Eigenvalues of H on the range of the k = 0 projector, computed from the
    /// plain Sz-basis matrix with the rest of the space pushed far away.
    fn brute_force_k0(p: &ChainParams) -> Vec<f64> {
        let h = dense_full_hamiltonian(p).unwrap();
        let t = dense_translation(p.spin, p.length).unwrap();
        let n = h.nrows();
        let mut proj = Mat::<c64>::zeros(n, n);
        let mut tk = Mat::<c64>::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        for _ in 0..p.length {
            proj += scaled(&tk, c64::new(1.0 / p.length as f64, 0.0));
            tk = &t * &tk;
        }
        let shift = 1e3;
        let id = Mat::<c64>::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        let m = &proj * &h * &proj + scaled(&(&id - &proj), c64::new(shift, 0.0));
        let mut e: Vec<f64> = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
        e.retain(|&x| x < shift / 2.0);
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    #[test]
    fn sector_spectrum_matches_full_diagonalization() {
        let s = Spin::from_twice(1).unwrap();
        for l in 2..=6 {
            let p = ChainParams::new(s, l, 1.76, 1.0).unwrap();
            let want = brute_force_k0(&p);
            let all = spectrum_of_sectors(&p, &[Reflection::Unresolved]);
            let split = spectrum_of_sectors(&p, &[Reflection::Even, Reflection::Odd]);
            assert_eq!(want.len(), all.len(), "L={l}");
            assert_eq!(want.len(), split.len());
            for ((a, b), c) in want.iter().zip(&all).zip(&split) {
                assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9, "L={l}: {a} {b} {c}");
            }
        }
        let p = ChainParams::new(Spin::from_twice(2).unwrap(), 4, 0.9, 1.0).unwrap();
        let want = brute_force_k0(&p);
        let split = spectrum_of_sectors(&p, &[Reflection::Even, Reflection::Odd]);
        for (a, c) in want.iter().zip(&split) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn full_hamiltonian_commutes_with_translation() {
        let p = ChainParams::new(Spin::from_twice(1).unwrap(), 6, 1.76, 1.0).unwrap();
        let h = dense_full_hamiltonian(&p).unwrap();
        let t = dense_translation(p.spin, p.length).unwrap();
        assert!(max_abs(&(&h * &t - &t * &h)) < 1e-10);
        assert!(max_abs(&(&h - h.adjoint())) < 1e-12);
    }

    #[test]
    fn frame_sparse_matrix_is_unitarily_equivalent() {
        let p = ChainParams::new(Spin::from_twice(2).unwrap(), 4, 1.2, 0.7).unwrap();
        let sp = SparseHamiltonian::new(&p).unwrap();
        let n = sp.dim;
        let mut dense = Mat::<f64>::zeros(n, n);
        let mut col = vec![c64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut e = vec![c64::new(0.0, 0.0); n];
            e[j] = c64::new(1.0, 0.0);
            sp.apply(&e, &mut col);
            for i in 0..n {
                dense[(i, j)] = col[i].re;
            }
        }
        let a = eigenvalues(&dense).unwrap();
        let mut b: Vec<f64> = dense_full_hamiltonian(&p).unwrap().self_adjoint_eigenvalues(Side::Lower).unwrap();
        b.sort_by(|x, y| x.total_cmp(y));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn sector_hamiltonian_is_symmetric_and_psi_up_has_zero_energy() {
        for (two_s, l) in [(1, 8), (3, 4), (4, 3)] {
            let p = ChainParams::new(Spin::from_twice(two_s).unwrap(), l, 1.76, 1.0).unwrap();
            let chain = build_hamiltonian(&p, Reflection::Even, DEFAULT_DIM_LIMIT).unwrap();
            let h = &chain.hamiltonian;
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    assert!((h[(i, j)] - h[(j, i)]).abs() < 1e-12);
                }
            }
            let psi = chain.psi_up();
            let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            let mut e = c64::new(0.0, 0.0);
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    e += psi[i].conj() * h[(i, j)] * psi[j];
                }
            }
            assert!(e.norm() < 1e-12, "{e}");
            let sz = site_average_operator(&chain.basis, Axis::Z);
            let eig = chain.diagonalize().unwrap();
            let rel = evolve_observable(&eig, &psi, &sz, &[0.0, 0.5]).unwrap();
            assert!((rel.values[0] - p.spin.value()).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenpairs_are_accurate() {
        let p = ChainParams::new(Spin::from_twice(2).unwrap(), 5, 1.76, 1.0).unwrap();
        let chain = build_hamiltonian(&p, Reflection::Even, DEFAULT_DIM_LIMIT).unwrap();
        let eig = chain.diagonalize().unwrap();
        let h = &chain.hamiltonian;
        let hv = h * &eig.vectors;
        let scale = eig.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for n in 0..eig.dim() {
            for i in 0..eig.dim() {
                assert!((hv[(i, n)] - eig.values[n] * eig.vectors[(i, n)]).abs() < 1e-8 * scale);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let g = eig.vectors.transpose() * &eig.vectors;
        for i in 0..eig.dim() {
            for j in 0..eig.dim() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn r_statistic_oracles() {
        let ladder: Vec<f64> = (0..200).map(|k| k as f64).collect();
        assert!((r_statistic(&ladder, 0.0).unwrap().mean - 1.0).abs() < 1e-12);
        let mut rng = rng::rng_from_seed(3);
        let poisson: Vec<f64> = (0..200_000).map(|_| rng.random::<f64>()).collect();
        let r = r_statistic(&poisson, R_TRIM).unwrap();
        assert!((r.mean - (2.0 * 2f64.ln() - 1.0)).abs() < 0.01, "{}", r.mean);
        assert!(r_statistic(&ladder[..50], 0.0).is_err());
        let (_, deg) = r_values(&[0.0, 1.0, 1.0, 2.0, 3.0], 0.0);
        assert_eq!(deg, 2);
    }

    #[test]
    fn entropy_oracles() {
        let half = Spin::from_twice(1).unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        // Singlet (|01⟩ − |10⟩)/√2: indices 2 and 1.
        let singlet = vec![c64::new(0.0, 0.0), c64::new(a, 0.0), c64::new(-a, 0.0), c64::new(0.0, 0.0)];
        assert!((entanglement_entropy(&singlet, half, 2, 1) - 2f64.ln()).abs() < 1e-12);
        let s1 = Spin::from_twice(2).unwrap();
        let b = MomentumSectorBasis::new(s1, 6, Reflection::Even, usize::MAX).unwrap();
        let up = psi_up(&b);
        let lifted = lift_complex(&b, &up);
        assert!(entanglement_entropy(&lifted, s1, 6, 3).abs() < 1e-10);
        let mut rng = rng::rng_from_seed(11);
        let v: Vec<f64> = (0..b.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let lifted = b.lift(&v);
        let e = entropy_real(&lifted, s1, 6, 3);
        assert!(e > 0.0 && e <= 3.0 * 3f64.ln() + 1e-12);
        let c: Vec<c64> = lifted.iter().map(|x| c64::new(*x, 0.0)).collect();
        assert!((entanglement_entropy(&c, s1, 6, 3) - e).abs() < 1e-10);
    }

    fn lift_complex(b: &MomentumSectorBasis, v: &[c64]) -> Vec<c64> {
        (0..b.full_dim())
            .map(|s| match b.locate(s) {
                Some((k, chi)) => v[k] * (chi / (b.orbit_sizes()[k] as f64).sqrt()),
                None => c64::new(0.0, 0.0),
            })
            .collect()
    }

    #[test]
    fn psi_inf_properties() {
        let s = Spin::from_twice(2).unwrap();
        let psi = psi_inf(s, 6, 5).unwrap();
        let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((site_expectation(s, 6, &psi, 0, Axis::Z) - 1.0).abs() < 1e-12);
        let bound = 3.0 / (psi.len() as f64 / 3.0).sqrt();
        assert!(site_expectation(s, 6, &psi, 1, Axis::Z).abs() < bound);
        assert_eq!(psi, psi_inf(s, 6, 5).unwrap());
    }

    #[test]
    fn krylov_matches_eigenbasis_evolution() {
        let p = ChainParams::new(Spin::from_twice(1).unwrap(), 8, 1.76, 1.0).unwrap();
        let chain = build_hamiltonian(&p, Reflection::Even, DEFAULT_DIM_LIMIT).unwrap();
        let eig = chain.diagonalize().unwrap();
        let up = chain.psi_up();
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let sz = site_average_operator(&chain.basis, Axis::Z);
        let exact = evolve_observable(&eig, &up, &sz, &times).unwrap();
        let sp = SparseHamiltonian::new(&p).unwrap();
        let full0 = lift_complex(&chain.basis, &up);
        let kry = evolve_full(&sp, &full0, &times, |psi| site_expectation(p.spin, p.length, psi, 0, Axis::Z)).unwrap();
        for (a, b) in exact.values.iter().zip(&kry.values) {
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
        assert!(kry.max_norm_error < 1e-10);
        assert!(kry.max_energy_drift < 1e-10);
        assert!(exact.max_norm_error < 1e-10);
    }

    #[test]
    fn crossover_interpolates_rise() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let c = crossover_region(&x, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((c.lower - 1.1).abs() < 1e-12 && (c.upper - 1.9).abs() < 1e-12);
        assert!(c.contains(1.5) && !c.contains(2.5));
        assert!(crossover_region(&x, &[1.0, 0.5, 0.2, 0.0]).is_none());
    }

    #[test]
    fn participation_ratio_limits() {
        assert_eq!(participation_ratio(&[1.0, 0.0, 0.0]), 1.0);
        assert!((participation_ratio(&[0.25; 4]) - 4.0).abs() < 1e-12);
        let pts = |ys: &[f64]| ys.iter().enumerate().map(|(k, &y)| PrPoint { coupling: k as f64, participation: y, dim: 1 }).collect();
        let s = summarize_peak(pts(&[1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0]));
        assert!((s.peak_coupling - 4.0).abs() < 1e-12);
        assert!((s.relative_prominence - 7.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn spherical_map_pole_equals_overlap() {
        let p = ChainParams::new(Spin::from_twice(3).unwrap(), 4, 1.76, 1.0).unwrap();
        let chain = build_hamiltonian(&p, Reflection::Even, DEFAULT_DIM_LIMIT).unwrap();
        let eig = chain.diagonalize().unwrap();
        let ov = eig.overlaps(&chain.psi_up()).unwrap();
        let n = ov.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let map = spherical_overlap_map(&chain.basis, &eig.vector(n), SphericalGrid { n_theta: 7, n_phi: 6 }).unwrap();
        for j in 0..6 {
            assert!((map.at(0, j) - ov[n]).abs() < 1e-10);
        }
        assert!(map.values.iter().all(|v| *v >= 0.0));
    }
}
