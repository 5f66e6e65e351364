//! Tight-binding models in the Landau gauge and their finite-volume matrices.

use crate::error::{Error, Result};
use crate::lattice::{Bc, FiniteVolume};
use crate::linalg::{self, c, CMat, C64, ZERO};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Constant magnetic field as an antisymmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticField {
    pub b: Vec<Vec<f64>>,
}

impl MagneticField {
    pub fn zero(d: usize) -> Self {
        Self { b: vec![vec![0.0; d]; d] }
    }

    /// Sets B_ij = v and B_ji = -v for each `(i, j, v)` with i < j.
    pub fn from_upper(d: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut f = Self::zero(d);
        for &(i, j, v) in entries {
            if i >= j || j >= d {
                return Err(Error::Invalid(format!("field entry ({i},{j}) must satisfy i < j < d")));
            }
            f.b[i][j] = v;
            f.b[j][i] = -v;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn b_plus(&self, i: usize, j: usize) -> f64 {
        if i > j {
            self.b[i][j]
        } else {
            0.0
        }
    }

    /// ⟨y|B₊|x⟩.
    pub fn form(&self, y: &[i64], x: &[i64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..i {
                s += y[i] as f64 * self.b[i][j] * x[j] as f64;
            }
        }
        s
    }

    /// Peierls phase for the hop x - y -> x with wrap vector a (source = x - y - a in the box).
    pub fn peierls(&self, x: &[i64], y: &[i64], a: &[i64]) -> C64 {
        let src: Vec<i64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        let phi = 0.5 * self.form(y, y) + self.form(y, &src) + self.form(&src, a);
        C64::from_polar(1.0, phi)
    }

    /// Checks L_i L_j B_ij / 2π ∈ Z on every pair of periodic axes.
    pub fn check_torus(&self, vol: &FiniteVolume) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in (i + 1)..d {
                if vol.bc[i] == Bc::Periodic && vol.bc[j] == Bc::Periodic {
                    let flux = (vol.sizes[i] * vol.sizes[j]) as f64 * self.b[i][j] / (2.0 * PI);
                    if (flux - flux.round()).abs() > 1e-9 {
                        return Err(Error::FluxMismatch(format!("axes ({i},{j}) carry flux {flux}")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HoppingSpec {
    pub y: Vec<i64>,
    pub w: CMat,
    pub lambda: f64,
}

impl HoppingSpec {
    pub fn new(y: Vec<i64>, w: CMat, lambda: f64) -> Self {
        Self { y, w, lambda }
    }
}

#[derive(Clone, Debug)]
pub struct BulkModel {
    pub d: usize,
    pub n: usize,
    pub hoppings: Vec<HoppingSpec>,
    pub field: MagneticField,
    pub mu: f64,
    pub chiral: bool,
}

fn lex_sign(y: &[i64]) -> i32 {
    for &v in y {
        if v > 0 {
            return 1;
        }
        if v < 0 {
            return -1;
        }
    }
    0
}

fn is_block_offdiag(w: &CMat, half: usize) -> bool {
    (0..w.nrows()).all(|i| (0..w.ncols()).all(|j| (i < half) != (j < half) || w[(i, j)].norm() < 1e-14))
}

impl BulkModel {
    pub fn new(d: usize, n: usize) -> Self {
        Self { d, n, hoppings: vec![], field: MagneticField::zero(d), mu: 0.0, chiral: false }
    }

    pub fn with_hop(mut self, y: Vec<i64>, w: CMat, lambda: f64) -> Self {
        self.hoppings.push(HoppingSpec::new(y, w, lambda));
        self
    }

    pub fn is_clean(&self) -> bool {
        self.hoppings.iter().all(|h| h.lambda == 0.0)
    }

    /// Chirality operator J = diag(1, -1) on the fiber.
    pub fn j_diag(&self) -> Vec<f64> {
        (0..self.n).map(|a| if a < self.n / 2 { 1.0 } else { -1.0 }).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.field.dim() != self.d {
            return Err(Error::Invalid("field dimension differs from model dimension".into()));
        }
        for h in &self.hoppings {
            if h.y.len() != self.d || h.w.nrows() != self.n || h.w.ncols() != self.n {
                return Err(Error::Invalid(format!("hop {:?} has wrong shape", h.y)));
            }
            if h.lambda < 0.0 {
                return Err(Error::Invalid("negative disorder coupling".into()));
            }
        }
        if self.chiral {
            if self.n % 2 != 0 {
                return Err(Error::NotChiral("odd fiber".into()));
            }
            if self.mu != 0.0 {
                return Err(Error::NotChiral("chiral model needs mu = 0".into()));
            }
            for h in &self.hoppings {
                if !is_block_offdiag(&h.w, self.n / 2) {
                    return Err(Error::NotChiral(format!("hop {:?} is not block off-diagonal", h.y)));
                }
            }
        }
        Ok(())
    }

    /// Hops with y ≥ 0 in lexicographic order; each carries the index of its disorder channel.
    /// A listed negative hop is folded onto its partner; listing both directions
    /// is accepted only when they are adjoint to each other.
    pub fn canonical_hops(&self) -> Result<Vec<HoppingSpec>> {
        self.validate()?;
        let mut out: Vec<HoppingSpec> = Vec::new();
        let mut pending: Vec<HoppingSpec> = Vec::new();
        for h in &self.hoppings {
            match lex_sign(&h.y) {
                1 => out.push(h.clone()),
                0 => {
                    if linalg::hermiticity_residual(&h.w) > 1e-12 {
                        return Err(Error::Invalid("on-site matrix must be Hermitian".into()));
                    }
                    out.push(h.clone())
                }
                _ => pending.push(HoppingSpec::new(h.y.iter().map(|v| -v).collect(), linalg::adjoint(&h.w), h.lambda)),
            }
        }
        for p in pending {
            if let Some(q) = out.iter().find(|q| q.y == p.y) {
                if linalg::max_abs(&(&q.w - &p.w)) > 1e-12 || q.lambda != p.lambda {
                    return Err(Error::Invalid(format!("hops {:?} and its reverse are not adjoint", p.y)));
                }
            } else {
                out.push(p);
            }
        }
        Ok(out)
    }

    pub fn range(&self) -> i64 {
        self.hoppings.iter().flat_map(|h| h.y.iter().map(|v| v.abs())).max().unwrap_or(0)
    }
}

/// Dense operator on a finite volume, site-major with `fiber` orbitals per site.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    pub matrix: CMat,
    pub volume: FiniteVolume,
    pub fiber: usize,
}

impl LatticeOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// J ⊗ 1 as a diagonal.
    pub fn chirality_diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|p| if p % self.fiber < self.fiber / 2 { 1.0 } else { -1.0 }).collect()
    }

    pub fn site_of(&self, p: usize) -> usize {
        p / self.fiber
    }
}

/// Disorder draws ω ∈ [-1/2, 1/2] per (site, canonical hop), plus an
/// independent channel for boundary terms.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderConfig {
    pub seed: Option<u64>,
    pub per_site: usize,
    pub draws: Vec<f64>,
    pub boundary_per_site: usize,
    pub boundary: Vec<f64>,
}

impl DisorderConfig {
    pub fn clean() -> Self {
        Self { seed: None, per_site: 0, draws: vec![], boundary_per_site: 0, boundary: vec![] }
    }

    pub fn get(&self, site: usize, hop: usize) -> f64 {
        if self.per_site == 0 {
            0.0
        } else {
            self.draws[site * self.per_site + hop]
        }
    }

    pub fn get_boundary(&self, site: usize, term: usize) -> f64 {
        if self.boundary_per_site == 0 {
            0.0
        } else {
            self.boundary[site * self.boundary_per_site + term]
        }
    }

    /// Configuration seen from a lattice shifted by `a`: ω'_x = ω_{x+a}.
    pub fn translated(&self, vol: &FiniteVolume, a: &[i64]) -> Self {
        let mut out = self.clone();
        for s in 0..vol.sites() {
            let x = vol.coords(s);
            let xa: Vec<i64> = x.iter().zip(a).map(|(p, q)| p + q).collect();
            let t = vol.index(&vol.wrap(&xa).expect("translation needs a periodic volume").0);
            for k in 0..self.per_site {
                out.draws[s * self.per_site + k] = self.draws[t * self.per_site + k];
            }
            for k in 0..self.boundary_per_site {
                out.boundary[s * self.boundary_per_site + k] = self.boundary[t * self.boundary_per_site + k];
            }
        }
        out
    }
}

fn uniform_draws(seed: u64, stream: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count).map(|_| rng.gen::<f64>() - 0.5).collect()
}

pub fn sample_disorder(model: &BulkModel, vol: &FiniteVolume, seed: u64) -> Result<DisorderConfig> {
    let per_site = model.canonical_hops()?.len();
    Ok(DisorderConfig {
        seed: Some(seed),
        per_site,
        draws: uniform_draws(seed, 0, per_site * vol.sites()),
        boundary_per_site: 0,
        boundary: vec![],
    })
}

/// Bulk draws from `seed`; boundary draws from their own stream of `boundary_seed`.
pub fn sample_disorder_halfspace(model: &HalfSpaceModel, vol: &FiniteVolume, seed: u64, boundary_seed: u64) -> Result<DisorderConfig> {
    let mut cfg = sample_disorder(&model.bulk, vol, seed)?;
    let k = model.boundary_terms.len();
    cfg.boundary_per_site = k;
    cfg.boundary = uniform_draws(boundary_seed, 1, k * vol.sites());
    Ok(cfg)
}

fn add_block(h: &mut CMat, n: usize, t: usize, s: usize, w: &CMat, z: C64) {
    for a in 0..n {
        for b in 0..n {
            let v = w[(a, b)];
            if v != ZERO {
                h[(t * n + a, s * n + b)] += z * v;
            }
        }
    }
}

fn add_block_adj(h: &mut CMat, n: usize, t: usize, s: usize, w: &CMat, z: C64) {
    // H[s, t] += (z W)†
    for a in 0..n {
        for b in 0..n {
            let v = w[(a, b)];
            if v != ZERO {
                h[(s * n + b, t * n + a)] += (z * v).conj();
            }
        }
    }
}

fn check_volume(model: &BulkModel, vol: &FiniteVolume) -> Result<()> {
    if vol.dim() != model.d {
        return Err(Error::Invalid(format!("volume dimension {} vs model {}", vol.dim(), model.d)));
    }
    for h in &model.hoppings {
        for (i, &yi) in h.y.iter().enumerate() {
            if vol.bc[i] == Bc::Periodic && 2 * yi.unsigned_abs() as usize >= vol.sizes[i] {
                return Err(Error::RangeTooLarge(format!("hop {:?} on axis {i} of length {}", h.y, vol.sizes[i])));
            }
        }
    }
    model.field.check_torus(vol)
}

pub fn assemble_bulk(model: &BulkModel, vol: &FiniteVolume, disorder: &DisorderConfig) -> Result<LatticeOperator> {
    check_volume(model, vol)?;
    let hops = model.canonical_hops()?;
    let n = model.n;
    let mut h = linalg::zeros(n * vol.sites(), n * vol.sites());
    for t in 0..vol.sites() {
        let x = vol.coords(t);
        for (k, hop) in hops.iter().enumerate() {
            let amp = 1.0 + hop.lambda * disorder.get(t, k);
            if hop.y.iter().all(|&v| v == 0) {
                add_block(&mut h, n, t, t, &hop.w, c(amp, 0.0));
                continue;
            }
            let src: Vec<i64> = x.iter().zip(&hop.y).map(|(p, q)| p - q).collect();
            let Some((s, a)) = vol.wrap(&src) else { continue };
            let z = model.field.peierls(&x, &hop.y, &a) * amp;
            let s = vol.index(&s);
            add_block(&mut h, n, t, s, &hop.w, z);
            add_block_adj(&mut h, n, t, s, &hop.w, z);
        }
    }
    Ok(LatticeOperator { matrix: h, volume: vol.clone(), fiber: n })
}

/// Boundary hop W̃ from depth m at x∥ - y to depth n at x∥.
#[derive(Clone, Debug)]
pub struct BoundaryTerm {
    pub y: Vec<i64>,
    pub n: usize,
    pub m: usize,
    pub w: CMat,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct HalfSpaceModel {
    pub bulk: BulkModel,
    pub boundary_terms: Vec<BoundaryTerm>,
    pub depth: usize,
}

impl HalfSpaceModel {
    pub fn dirichlet(bulk: BulkModel) -> Self {
        Self { bulk, boundary_terms: vec![], depth: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.bulk.validate()?;
        let d = self.bulk.d;
        for t in &self.boundary_terms {
            if t.y.len() + 1 != d || t.w.nrows() != self.bulk.n || t.w.ncols() != self.bulk.n {
                return Err(Error::Invalid("boundary term has wrong shape".into()));
            }
            if t.n > self.depth || t.m > self.depth {
                return Err(Error::BoundaryDepth(format!("term at depths ({},{}) exceeds R = {}", t.n, t.m, self.depth)));
            }
            if self.bulk.chiral && !is_block_offdiag(&t.w, self.bulk.n / 2) {
                return Err(Error::NotChiral("boundary term is not block off-diagonal".into()));
            }
            let selfterm = t.n == t.m && t.y.iter().all(|&v| v == 0);
            if selfterm && linalg::hermiticity_residual(&t.w) > 1e-12 {
                return Err(Error::Invalid("on-site boundary term must be Hermitian".into()));
            }
        }
        Ok(())
    }
}

pub fn assemble_halfspace(model: &HalfSpaceModel, vol: &FiniteVolume, disorder: &DisorderConfig) -> Result<LatticeOperator> {
    if !vol.is_halfspace() {
        return Err(Error::Invalid("half-space assembly needs a halfspace last axis".into()));
    }
    model.validate()?;
    let d = model.bulk.d;
    if !model.boundary_terms.is_empty() && model.depth >= vol.sizes[d - 1] {
        return Err(Error::BoundaryDepth(format!("R = {} vs thickness {}", model.depth, vol.sizes[d - 1])));
    }
    let mut op = assemble_bulk(&model.bulk, vol, disorder)?;
    let n = model.bulk.n;
    for t in 0..vol.sites() {
        let x = vol.coords(t);
        for (k, term) in model.boundary_terms.iter().enumerate() {
            if x[d - 1] != term.n as i64 {
                continue;
            }
            let mut y = term.y.clone();
            y.push(term.n as i64 - term.m as i64);
            let amp = 1.0 + term.lambda * disorder.get_boundary(t, k);
            let src: Vec<i64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
            let Some((s, a)) = vol.wrap(&src) else { continue };
            let z = model.bulk.field.peierls(&x, &y, &a) * amp;
            let s = vol.index(&s);
            add_block(&mut op.matrix, n, t, s, &term.w, z);
            if s != t {
                add_block_adj(&mut op.matrix, n, t, s, &term.w, z);
            }
        }
    }
    Ok(op)
}

/// H_k = Σ_y e^{i⟨y|k⟩} W_y.
pub fn bloch_fiber(model: &BulkModel, k: &[f64]) -> Result<CMat> {
    bloch_parts(model, k, None)
}

/// ∂H_k/∂k_axis.
pub fn bloch_fiber_derivative(model: &BulkModel, k: &[f64], axis: usize) -> Result<CMat> {
    bloch_parts(model, k, Some(axis))
}

fn bloch_parts(model: &BulkModel, k: &[f64], axis: Option<usize>) -> Result<CMat> {
    if !model.field.is_zero() {
        return Err(Error::BlochRequiresZeroField);
    }
    if !model.is_clean() {
        return Err(Error::BlochRequiresClean);
    }
    let hops = model.canonical_hops()?;
    let n = model.n;
    let mut h = linalg::zeros(n, n);
    for hop in &hops {
        let phase: f64 = hop.y.iter().zip(k).map(|(&y, &q)| y as f64 * q).sum();
        let mut z = C64::from_polar(1.0, phase);
        if let Some(ax) = axis {
            z *= c(0.0, hop.y[ax] as f64);
        }
        let zero = hop.y.iter().all(|&v| v == 0);
        for a in 0..n {
            for b in 0..n {
                h[(a, b)] += z * hop.w[(a, b)];
                if !zero {
                    h[(b, a)] += (z * hop.w[(a, b)]).conj();
                }
            }
        }
    }
    Ok(h)
}

/// V^x = e^{i⟨X|B₊|x⟩} S^x on a fully periodic volume.
pub fn magnetic_translation(field: &MagneticField, vol: &FiniteVolume, x: &[i64], fiber: usize) -> Result<CMat> {
    if vol.bc.iter().any(|&b| b != Bc::Periodic) {
        return Err(Error::Invalid("magnetic translations need a periodic volume".into()));
    }
    field.check_torus(vol)?;
    let d = vol.dim();
    for j in 0..d {
        let f: f64 = (0..d).map(|i| vol.sizes[j] as f64 * field.b[j][i] * x[i] as f64).sum::<f64>() / (2.0 * PI);
        if (f - f.round()).abs() > 1e-9 {
            return Err(Error::FluxMismatch(format!("translation {x:?} does not commute with the torus wrap on axis {j}")));
        }
    }
    let sites = vol.sites();
    let mut v = linalg::zeros(sites * fiber, sites * fiber);
    for t in 0..sites {
        let xt = vol.coords(t);
        let src: Vec<i64> = xt.iter().zip(x).map(|(p, q)| p - q).collect();
        let (s, a) = vol.wrap(&src).expect("periodic");
        let phi = field.form(&xt, x) + field.form(&src, &a);
        let z = C64::from_polar(1.0, phi);
        let s = vol.index(&s);
        for o in 0..fiber {
            v[(t * fiber + o, s * fiber + o)] = z;
        }
    }
    Ok(v)
}

/// Gauge transform e^{(i/2)⟨X|B₊|X⟩} to the symmetric gauge, as a diagonal.
pub fn symmetric_gauge_diag(field: &MagneticField, vol: &FiniteVolume, fiber: usize) -> Vec<C64> {
    (0..vol.sites() * fiber)
        .map(|p| {
            let x = vol.coords(p / fiber);
            C64::from_polar(1.0, 0.5 * field.form(&x, &x))
        })
        .collect()
}

pub fn diag_conjugate(d: &[C64], a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)] * d[j].conj())
}
