//! Clean half-space models through their partial Bloch fibers ĥ(k∥).
//!
//! The fiber acts on depth × orbital, depth slowest. Parallel derivations
//! i[·, X_j] become −∂_{k_j} on fibers.

use crate::error::{Error, Result};
use crate::invariants::{chain_diag, even_form_diag, lambda_n, odd_form_diag, InvariantResult};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};
use crate::model::HalfSpaceModel;
use crate::spectral::SmoothStep;
use faer::Mat;
use std::f64::consts::PI;

fn add_scaled(h: &mut CMat, n: usize, row: usize, col: usize, w: &CMat, z: C64, adjoint: bool) {
    for a in 0..n {
        for b in 0..n {
            if adjoint {
                h[(col * n + b, row * n + a)] += z.conj() * w[(a, b)].conj();
            } else {
                h[(row * n + a, col * n + b)] += z * w[(a, b)];
            }
        }
    }
}

fn fiber_parts(model: &HalfSpaceModel, kpar: &[f64], depth: usize, axis: Option<usize>) -> Result<CMat> {
    let bulk = &model.bulk;
    if !bulk.field.is_zero() {
        return Err(Error::BlochRequiresZeroField);
    }
    if !bulk.is_clean() || model.boundary_terms.iter().any(|t| t.lambda != 0.0) {
        return Err(Error::BlochRequiresClean);
    }
    model.validate()?;
    let d = bulk.d;
    if kpar.len() + 1 != d {
        return Err(Error::Invalid(format!("expected {} parallel momenta", d - 1)));
    }
    if !model.boundary_terms.is_empty() && model.depth >= depth {
        return Err(Error::BoundaryDepth(format!("R = {} vs thickness {depth}", model.depth)));
    }
    let n = bulk.n;
    let mut h = linalg::zeros(depth * n, depth * n);
    let factor = |ypar: &[i64]| -> C64 {
        let phase: f64 = ypar.iter().zip(kpar).map(|(&y, &q)| y as f64 * q).sum();
        let mut z = C64::from_polar(1.0, phase);
        if let Some(ax) = axis {
            z *= c(0.0, ypar[ax] as f64);
        }
        z
    };
    for hop in bulk.canonical_hops()? {
        let yd = hop.y[d - 1];
        let z = factor(&hop.y[..d - 1]);
        let onsite = hop.y.iter().all(|&v| v == 0);
        for row in 0..depth as i64 {
            let col = row - yd;
            if col < 0 || col >= depth as i64 {
                continue;
            }
            add_scaled(&mut h, n, row as usize, col as usize, &hop.w, z, false);
            if !onsite {
                add_scaled(&mut h, n, row as usize, col as usize, &hop.w, z, true);
            }
        }
    }
    for t in &model.boundary_terms {
        let z = factor(&t.y);
        add_scaled(&mut h, n, t.n, t.m, &t.w, z, false);
        if !(t.n == t.m && t.y.iter().all(|&v| v == 0)) {
            add_scaled(&mut h, n, t.n, t.m, &t.w, z, true);
        }
    }
    Ok(h)
}

/// ĥ(k∥) on `depth` layers.
pub fn slab_fiber(model: &HalfSpaceModel, kpar: &[f64], depth: usize) -> Result<CMat> {
    fiber_parts(model, kpar, depth, None)
}

/// ∂ĥ(k∥)/∂k_axis.
pub fn slab_fiber_derivative(model: &HalfSpaceModel, kpar: &[f64], depth: usize, axis: usize) -> Result<CMat> {
    fiber_parts(model, kpar, depth, Some(axis))
}

/// Chirality diagonal of the slab fiber.
pub fn slab_chirality(model: &HalfSpaceModel, depth: usize) -> Vec<f64> {
    let j = model.bulk.j_diag();
    (0..depth).flat_map(|_| j.iter().copied()).collect()
}

/// Uniform grid of parallel momenta and a depth cut.
#[derive(Clone, Copy, Debug)]
pub struct SlabGrid {
    pub grid: usize,
    pub depth: usize,
    pub cut: usize,
}

impl SlabGrid {
    pub fn new(grid: usize, depth: usize) -> Self {
        Self { grid, depth, cut: depth / 2 }
    }

    fn points(&self, dpar: usize) -> Vec<Vec<f64>> {
        let total = self.grid.pow(dpar as u32);
        (0..total)
            .map(|idx| {
                let mut r = idx;
                (0..dpar)
                    .map(|_| {
                        let q = r % self.grid;
                        r /= self.grid;
                        2.0 * PI * q as f64 / self.grid as f64
                    })
                    .collect()
            })
            .collect()
    }
}

struct Accumulator {
    total: C64,
    tail: C64,
}

impl Accumulator {
    fn add(&mut self, diag: &[C64], n: usize, cut: usize) {
        for (r, v) in diag.iter().enumerate() {
            self.total += *v;
            if r / n == cut - 1 {
                self.tail += *v;
            }
        }
    }

    fn finish(self, points: usize) -> Result<(C64, f64)> {
        let value = self.total / points as f64;
        let tail = (self.tail / points as f64).norm();
        if tail > 1e-6 * value.norm().max(1.0) {
            return Err(Error::DepthCutTooSmall(format!("tail {tail:e}")));
        }
        Ok((value, tail))
    }
}

fn sweep(model: &HalfSpaceModel, g: &SlabGrid, mut per_k: impl FnMut(&[f64], &linalg::Eigh, &[CMat], &[usize]) -> Result<Vec<C64>>) -> Result<(C64, f64)> {
    let d = model.bulk.d;
    if d < 2 {
        return Err(Error::Invalid("slab fibers need d ≥ 2".into()));
    }
    if g.cut == 0 || g.cut > g.depth {
        return Err(Error::DepthCutTooSmall(format!("cut {} outside 1..={}", g.cut, g.depth)));
    }
    let n = model.bulk.n;
    let rows: Vec<usize> = (0..g.cut * n).collect();
    let pts = g.points(d - 1);
    let mut acc = Accumulator { total: ZERO, tail: ZERO };
    for k in &pts {
        let h = slab_fiber(model, k, g.depth)?;
        let spec = linalg::eigh(&h)?;
        // lattice derivation = −∂_k on fibers
        let dh: Vec<CMat> = (0..d - 1)
            .map(|a| slab_fiber_derivative(model, k, g.depth, a).map(|m| linalg::scale(&m, c(-1.0, 0.0))))
            .collect::<Result<_>>()?;
        let diag = per_k(k, &spec, &dh, &rows)?;
        acc.add(&diag, n, g.cut);
    }
    acc.finish(pts.len())
}

/// C̃h over all parallel directions of ũ_Δ = exp(2πi f(ĥ)); needs d − 1 odd.
pub fn boundary_invariant_unitary(model: &HalfSpaceModel, g: &SlabGrid, f: &SmoothStep) -> Result<InvariantResult> {
    let d = model.bulk.d;
    if (d - 1) % 2 != 1 {
        return Err(Error::Invalid("unitary boundary invariant needs odd d − 1".into()));
    }
    let (value, tail) = sweep(model, g, |_, spec, dh, rows| {
        let mut u = spec.apply(|e| f.exp_phase_minus_one(e));
        for i in 0..u.nrows() {
            u[(i, i)] += ONE;
        }
        let du: Vec<CMat> = dh
            .iter()
            .map(|m| spec.dk_derivative(m, |e| f.exp_phase_minus_one(e), |e| f.exp_phase_minus_one_prime(e)))
            .collect();
        let dus: Vec<CMat> = du.iter().map(linalg::adjoint).collect();
        Ok(odd_form_diag(&u, &du, &dus, rows))
    })?;
    let z = lambda_n(d - 1) * value;
    Ok(InvariantResult::new(&format!("Ch~{}(u_delta)", d - 1), z, format!("grid={}^{} depth={} cut={} tail={tail:e}", g.grid, d - 1, g.depth, g.cut)))
}

/// C̃h over all parallel directions of p̃_Δ − s(p̃_Δ); needs a chiral model with d − 1 even.
pub fn boundary_invariant_projection(model: &HalfSpaceModel, g: &SlabGrid, f: &SmoothStep) -> Result<InvariantResult> {
    let d = model.bulk.d;
    if !model.bulk.chiral {
        return Err(Error::NotChiral("chiral boundary projection needs a chiral model".into()));
    }
    if (d - 1) % 2 != 0 {
        return Err(Error::Invalid("projection boundary invariant needs even d − 1".into()));
    }
    let j = slab_chirality(model, g.depth);
    let (value, tail) = sweep(model, g, |_, spec, dh, rows| {
        // p̃ − s(p̃) = ½ Ĵ (e^{iπf(ĥ)} + 1); derivatives of s(p̃) vanish
        let e = spec.apply(|x| f.ind_phase_plus_one(x));
        let p = Mat::from_fn(e.nrows(), e.ncols(), |a, b| e[(a, b)] * (0.5 * j[a]));
        let dp: Vec<CMat> = dh
            .iter()
            .map(|m| {
                let de = spec.dk_derivative(m, |x| f.ind_phase_plus_one(x), |x| f.ind_phase_plus_one_prime(x));
                Mat::from_fn(de.nrows(), de.ncols(), |a, b| de[(a, b)] * (0.5 * j[a]))
            })
            .collect();
        if dp.is_empty() {
            return Ok(rows.iter().map(|&r| p[(r, r)]).collect());
        }
        // the leading factor is the full p̃, whose constant part s(p̃) contributes only via ∂p̃
        let mut full = p.clone();
        for (i, &ji) in j.iter().enumerate() {
            if ji < 0.0 {
                full[(i, i)] += ONE;
            }
        }
        Ok(even_form_diag(&full, &dp, rows))
    })?;
    let z = lambda_n(d - 1) * value;
    Ok(InvariantResult::new(&format!("Ch~{}(p_delta)", d - 1), z, format!("grid={}^{} depth={} cut={} tail={tail:e}", g.grid, d - 1, g.depth, g.cut)))
}

/// Boundary current 𝒯̃(f′(ĥ) i[ĥ, X_axis]).
pub fn boundary_current(model: &HalfSpaceModel, g: &SlabGrid, f: &SmoothStep, axis: usize) -> Result<f64> {
    if axis + 1 >= model.bulk.d {
        return Err(Error::Invalid("current direction must be parallel to the boundary".into()));
    }
    let (value, _) = sweep(model, g, |_, spec, dh, rows| {
        let fp = spec.apply(|e| c(f.derivative(e), 0.0));
        Ok(chain_diag(&[&fp, &dh[axis]], rows))
    })?;
    Ok(value.re)
}

/// Eigenvalues of ĥ(k∥) inside (lo, hi).
pub fn in_gap_levels(model: &HalfSpaceModel, kpar: &[f64], depth: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let vals = linalg::eigvalsh(&slab_fiber(model, kpar, depth)?)?;
    Ok(vals.into_iter().filter(|&e| e > lo && e < hi).collect())
}
