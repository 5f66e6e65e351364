//! Pfaffians, gap-labelling lattices and finite-difference Streda checks.

use crate::error::{Error, Result};
use crate::invariants::{chiral_polarization, open_box_fermi_unitary, plaquette_sum, InvariantResult};
use crate::lattice::{Bc, FiniteVolume, TraceWindow};
use crate::linalg::{self, c, CMat};
use crate::model::{assemble_bulk, BulkModel, DisorderConfig, LatticeOperator, MagneticField};
use crate::spectral;
use faer::Mat;
use std::f64::consts::PI;

/// Pfaffian by first-row expansion.
pub fn pfaffian(a: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid("pfaffian needs a square matrix".into()));
    }
    let asym = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (a[i][j] + a[j][i]).abs()).fold(0.0, f64::max);
    if asym > 1e-12 {
        return Err(Error::NotAntisymmetric);
    }
    if n % 2 == 1 {
        return Err(Error::OddDimension);
    }
    fn rec(a: &[Vec<f64>], idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 1.0;
        }
        let first = idx[0];
        let mut s = 0.0;
        for (pos, &j) in idx.iter().enumerate().skip(1) {
            let rest: Vec<usize> = idx.iter().copied().filter(|&q| q != first && q != j).collect();
            let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * a[first][j] * rec(a, &rest);
        }
        s
    }
    Ok(rec(a, &(0..n).collect::<Vec<_>>()))
}

/// Value lattice Σ_J coefficient_J · Z of the pairings with cocycle index set I.
#[derive(Clone, Debug, PartialEq)]
pub struct GapLabelLattice {
    pub index_set: Vec<usize>,
    /// (J, (2π)^{−|J∖I|/2} Pf(B_{J∖I})), J = I first.
    pub terms: Vec<(Vec<usize>, f64)>,
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1 << n)).map(move |mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
}

pub fn pairing_lattice(index_set: &[usize], field: &MagneticField, d: usize) -> Result<GapLabelLattice> {
    if field.dim() != d || index_set.iter().any(|&i| i >= d) {
        return Err(Error::Invalid("index set or field does not match d".into()));
    }
    let mut terms = Vec::new();
    for extra in subsets(d) {
        if extra.iter().any(|i| index_set.contains(i)) || extra.len() % 2 == 1 {
            continue;
        }
        let sub: Vec<Vec<f64>> = extra.iter().map(|&i| extra.iter().map(|&j| field.b[i][j]).collect()).collect();
        let coef = (2.0 * PI).powf(-(extra.len() as f64) / 2.0) * pfaffian(&sub)?;
        let mut j: Vec<usize> = index_set.iter().copied().chain(extra.iter().copied()).collect();
        j.sort_unstable();
        if extra.is_empty() || coef != 0.0 {
            terms.push((j, coef));
        }
    }
    Ok(GapLabelLattice { index_set: index_set.to_vec(), terms })
}

/// Integer coefficients |n_J| ≤ bound of the lattice point nearest to `value`.
pub fn gap_label_check(value: f64, lattice: &GapLabelLattice, bound: i64) -> (Vec<i64>, f64) {
    let k = lattice.terms.len();
    let mut best = (vec![0; k], value.abs());
    let mut coeffs = vec![-bound; k];
    loop {
        let v: f64 = coeffs.iter().zip(&lattice.terms).map(|(&n, t)| n as f64 * t.1).sum();
        let r = (value - v).abs();
        let l1 = |x: &[i64]| x.iter().map(|v| v.abs()).sum::<i64>();
        if r < best.1 - 1e-15 || ((r - best.1).abs() <= 1e-15 && l1(&coeffs) < l1(&best.0)) {
            best = (coeffs.clone(), r);
        }
        let mut i = 0;
        while i < k {
            coeffs[i] += 1;
            if coeffs[i] <= bound {
                break;
            }
            coeffs[i] = -bound;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    best
}

/// Nearest-neighbour hopping on Z² with field B₁₂ = `flux`.
pub fn harper(flux: f64) -> Result<BulkModel> {
    let one = linalg::identity(1);
    let mut b = BulkModel::new(2, 1).with_hop(vec![1, 0], one.clone(), 0.0).with_hop(vec![0, 1], one, 0.0);
    b.field = MagneticField::from_upper(2, &[(0, 1, flux)])?;
    Ok(b)
}

/// Integrated density of states 𝒯(P_F) of a torus operator, with the gap around μ.
pub fn ids(h: &LatticeOperator, mu: f64) -> Result<(f64, (f64, f64))> {
    let vals = linalg::eigvalsh(&h.matrix)?;
    let spec_width = vals.last().unwrap_or(&0.0) - vals.first().unwrap_or(&0.0);
    let tol = 1e-8 * spec_width.max(1.0);
    if vals.iter().any(|e| (e - mu).abs() < tol) {
        return Err(Error::NoGap(format!("eigenvalue at mu = {mu}")));
    }
    let filled = vals.iter().filter(|&&e| e < mu).count();
    let below = vals.iter().copied().filter(|&e| e < mu).fold(f64::NEG_INFINITY, f64::max);
    let above = vals.iter().copied().filter(|&e| e > mu).fold(f64::INFINITY, f64::min);
    Ok((filled as f64 / h.volume.sites() as f64, (below, above)))
}

/// Ch₂ of a torus projection from the plaquette sum over twisted boundary conditions.
pub fn twisted_chern(model: &BulkModel, vol: &FiniteVolume, mu: f64, grid: usize) -> Result<InvariantResult> {
    if vol.dim() != 2 || vol.bc.iter().any(|&b| b != Bc::Periodic) {
        return Err(Error::Invalid("twisted Chern number needs a 2-torus".into()));
    }
    let h = assemble_bulk(model, vol, &DisorderConfig::clean())?;
    let n = model.n;
    let twisted = |t1: f64, t2: f64| -> CMat {
        Mat::from_fn(h.matrix.nrows(), h.matrix.ncols(), |a, b| {
            let z = h.matrix[(a, b)];
            if z.norm() == 0.0 {
                return z;
            }
            let (sa, sb) = (a / n, b / n);
            let ph = t1 * vol.displacement(sa, sb, 0) / vol.sizes[0] as f64 + t2 * vol.displacement(sa, sb, 1) / vol.sizes[1] as f64;
            z * c(ph.cos(), ph.sin())
        })
    };
    let g = grid as f64;
    let plaq = plaquette_sum(grid, grid, &|i, j| {
        let ht = twisted(2.0 * PI * i as f64 / g, 2.0 * PI * j as f64 / g);
        let (frame, vals) = crate::invariants::occupied_frame(&ht, mu)?;
        let tol = 1e-8 * (vals.last().unwrap_or(&0.0) - vals.first().unwrap_or(&0.0)).max(1.0);
        if vals.iter().any(|e| (e - mu).abs() < tol) {
            return Err(Error::NoGap(format!("eigenvalue at mu = {mu} under twist")));
        }
        Ok(frame)
    })?;
    // the twist e^{iθ·(x−s)/L} enters as k ↦ −k relative to Bloch fibers
    Ok(InvariantResult::new("Ch2(P_F)", c(plaq, 0.0), format!("torus={:?} twist_grid={grid}^2", vol.sizes)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StredaResult {
    pub derivative: f64,
    pub target: f64,
    pub mismatch: f64,
    pub delta_b: f64,
}

fn with_field(model: &BulkModel, i: usize, j: usize, b: f64) -> Result<BulkModel> {
    let mut m = model.clone();
    let mut entries = Vec::new();
    for p in 0..m.d {
        for q in p + 1..m.d {
            let v = if (p, q) == (i, j) { b } else { m.field.b[p][q] };
            if v != 0.0 {
                entries.push((p, q, v));
            }
        }
    }
    m.field = MagneticField::from_upper(m.d, &entries)?;
    Ok(m)
}

/// Central difference of 𝒯(P_F) in B_ij at δB = 2π/(L_i L_j), against Ch_{ij}/2π.
pub fn streda_ids(model: &BulkModel, axes: (usize, usize), mu: f64, vol: &FiniteVolume, target_chern: f64) -> Result<StredaResult> {
    let (i, j) = axes;
    if i >= j || j >= model.d {
        return Err(Error::Invalid("axes must satisfy i < j < d".into()));
    }
    let db = 2.0 * PI / (vol.sizes[i] * vol.sizes[j]) as f64;
    let b0 = model.field.b[i][j];
    model.field.check_torus(vol)?;
    let eval = |b: f64| -> Result<f64> {
        let m = with_field(model, i, j, b)?;
        let h = assemble_bulk(&m, vol, &DisorderConfig::clean())?;
        ids(&h, mu).map(|r| r.0).map_err(|e| match e {
            Error::NoGap(s) => Error::GapClosedUnderDb(s),
            other => other,
        })
    };
    let derivative = (eval(b0 + db)? - eval(b0 - db)?) / (2.0 * db);
    let target = target_chern / (2.0 * PI);
    Ok(StredaResult { derivative, target, mismatch: (derivative - target).abs(), delta_b: db })
}

/// Central difference of the chiral polarization P_{C,k} in B_ij; axis k must be open.
pub fn streda_chiral_polarization(model: &BulkModel, axes: (usize, usize), k: usize, vol: &FiniteVolume, window: &TraceWindow, target_chern: f64) -> Result<StredaResult> {
    let (i, j) = axes;
    if vol.bc[k] != Bc::Open {
        return Err(Error::Invalid("polarization axis must be open".into()));
    }
    let db = 2.0 * PI / (vol.sizes[i] * vol.sizes[j]) as f64;
    let b0 = model.field.b[i][j];
    let eval = |b: f64| -> Result<f64> {
        let m = with_field(model, i, j, b)?;
        let h = assemble_bulk(&m, vol, &DisorderConfig::clean())?;
        let jd = h.chirality_diag();
        let u = open_box_fermi_unitary(&h)?;
        let p = spectral::chiral_projection(&u, &jd);
        Ok(chiral_polarization(&p, &jd, vol, h.fiber, k, window)?.value)
    };
    let derivative = (eval(b0 + db)? - eval(b0 - db)?) / (2.0 * db);
    let target = target_chern / (4.0 * PI);
    Ok(StredaResult { derivative, target, mismatch: (derivative - target).abs(), delta_b: db })
}
