//! Bulk and boundary Chern numbers, Fredholm indices and related traces.

use crate::clifford::{dirac_phase, CliffordRep};
use crate::error::{Error, Result};
use crate::lattice::{derivation, Bc, FiniteVolume, TraceWindow};
use crate::linalg::{self, c, CMat, C64, I, ONE, ZERO};
use crate::model::{bloch_fiber, BulkModel, LatticeOperator};
use crate::spectral::{self, chiral_blocks, fermi_data, SmoothStep, SpectralData};
use faer::Mat;
use std::f64::consts::PI;

/// Residual below which a value is reported as quantized.
pub const QUANTIZATION_TOL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantResult {
    pub name: String,
    pub value: f64,
    /// Imaginary part left over by the trace; should vanish.
    pub imag: f64,
    pub rounded: Option<i64>,
    pub residual: f64,
    pub meta: String,
}

impl InvariantResult {
    pub fn new(name: &str, z: C64, meta: String) -> Self {
        let r = z.re.round();
        let residual = (z.re - r).abs();
        Self {
            name: name.to_string(),
            value: z.re,
            imag: z.im,
            rounded: (residual < QUANTIZATION_TOL).then_some(r as i64),
            residual,
            meta,
        }
    }

    pub fn quantized(&self) -> bool {
        self.rounded.is_some()
    }
}

fn double_factorial(n: usize) -> f64 {
    (1..=n).rev().step_by(2).map(|k| k as f64).product()
}

/// Normalization Λ_n of the n-th Chern cocycle.
pub fn lambda_n(n: usize) -> C64 {
    if n % 2 == 0 {
        let h = n / 2;
        let fact: f64 = (1..=h).map(|k| k as f64).product();
        c(0.0, 2.0 * PI).powu(h as u32) / fact
    } else {
        I * c(0.0, PI).powu(((n - 1) / 2) as u32) / double_factorial(n)
    }
}

/// All permutations of 0..n with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if left.is_empty() {
            out.push((prefix.clone(), sign));
            return;
        }
        for i in 0..left.len() {
            let v = left.remove(i);
            prefix.push(v);
            // moving element i to the front costs i transpositions
            rec(prefix, left, if i % 2 == 0 { sign } else { -sign }, out);
            prefix.pop();
            left.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), 1.0, &mut out);
    out
}

/// Diagonal entries (M₁ M₂ ⋯ M_k)[r, r] for r in `rows`.
pub fn chain_diag(mats: &[&CMat], rows: &[usize]) -> Vec<C64> {
    let k = mats.len();
    if k == 1 {
        return rows.iter().map(|&r| mats[0][(r, r)]).collect();
    }
    let mut x = linalg::columns(mats[k - 1], rows);
    for m in mats[1..k - 1].iter().rev() {
        x = *m * &x;
    }
    let first = mats[0];
    rows.iter()
        .enumerate()
        .map(|(j, &r)| {
            let mut s = ZERO;
            for l in 0..first.ncols() {
                s += first[(r, l)] * x[(l, j)];
            }
            s
        })
        .collect()
}

/// Σ_ρ (−1)^ρ diag(P ∂_{ρ1}P ⋯ ∂_{ρn}P) on `rows`.
pub fn even_form_diag(p: &CMat, dp: &[CMat], rows: &[usize]) -> Vec<C64> {
    let mut acc = vec![ZERO; rows.len()];
    for (perm, sign) in permutations(dp.len()) {
        let mut mats: Vec<&CMat> = vec![p];
        mats.extend(perm.iter().map(|&j| &dp[j]));
        for (a, v) in acc.iter_mut().zip(chain_diag(&mats, rows)) {
            *a += v * sign;
        }
    }
    acc
}

/// Σ_ρ (−1)^ρ diag((u* − 1) ∂_{ρ1}u ∂_{ρ2}u* ∂_{ρ3}u ⋯) on `rows`.
pub fn odd_form_diag(u: &CMat, du: &[CMat], dus: &[CMat], rows: &[usize]) -> Vec<C64> {
    let mut us = linalg::adjoint(u);
    for i in 0..us.nrows().min(us.ncols()) {
        us[(i, i)] -= ONE;
    }
    let mut acc = vec![ZERO; rows.len()];
    for (perm, sign) in permutations(du.len()) {
        let mut mats: Vec<&CMat> = vec![&us];
        for (pos, &j) in perm.iter().enumerate() {
            mats.push(if pos % 2 == 0 { &du[j] } else { &dus[j] });
        }
        for (a, v) in acc.iter_mut().zip(chain_diag(&mats, rows)) {
            *a += v * sign;
        }
    }
    acc
}

fn grid_point(idx: usize, d: usize, grid: usize) -> Vec<f64> {
    let mut r = idx;
    (0..d)
        .map(|_| {
            let q = r % grid;
            r /= grid;
            2.0 * PI * q as f64 / grid as f64
        })
        .collect()
}

/// Step of the central k-differences.
pub const K_STEP: f64 = 1e-4;

fn k_derivatives(k: &[f64], f: &dyn Fn(&[f64]) -> Result<CMat>) -> Result<Vec<CMat>> {
    let shifted = |j: usize, t: f64| -> Result<CMat> {
        let mut kk = k.to_vec();
        kk[j] += t;
        f(&kk)
    };
    (0..k.len())
        .map(|j| {
            // central difference at h and 2h combined by Richardson extrapolation
            let d1 = shifted(j, K_STEP)? - shifted(j, -K_STEP)?;
            let d2 = shifted(j, 2.0 * K_STEP)? - shifted(j, -2.0 * K_STEP)?;
            let d = linalg::scale(&d1, c(8.0, 0.0)) - d2;
            // Bloch fibers carry e^{+ik}: the lattice derivation is −∂_k
            Ok(linalg::scale(&d, c(-1.0 / (12.0 * K_STEP), 0.0)))
        })
        .collect()
}

/// Odd Chern number of a Bloch-convention unitary symbol over a uniform grid.
pub fn odd_chern_bloch(d: usize, grid: usize, u: &dyn Fn(&[f64]) -> Result<CMat>) -> Result<C64> {
    let total = grid.pow(d as u32);
    let mut sum = ZERO;
    for idx in 0..total {
        let k = grid_point(idx, d, grid);
        let uk = u(&k)?;
        let du = k_derivatives(&k, u)?;
        let dus: Vec<CMat> = du.iter().map(linalg::adjoint).collect();
        let rows: Vec<usize> = (0..uk.nrows()).collect();
        sum += odd_form_diag(&uk, &du, &dus, &rows).into_iter().sum::<C64>();
    }
    Ok(lambda_n(d) * sum / total as f64)
}

/// Even Chern number of a Bloch-convention projection symbol over a uniform grid.
pub fn even_chern_bloch(d: usize, grid: usize, p: &dyn Fn(&[f64]) -> Result<CMat>) -> Result<C64> {
    let total = grid.pow(d as u32);
    let mut sum = ZERO;
    for idx in 0..total {
        let k = grid_point(idx, d, grid);
        let pk = p(&k)?;
        let dp = k_derivatives(&k, p)?;
        let rows: Vec<usize> = (0..pk.nrows()).collect();
        sum += even_form_diag(&pk, &dp, &rows).into_iter().sum::<C64>();
    }
    Ok(lambda_n(d) * sum / total as f64)
}

fn bloch_spectrum(model: &BulkModel, k: &[f64]) -> Result<SpectralData> {
    linalg::eigh(&bloch_fiber(model, k)?)
}

fn check_gap(values: &[f64], mu: f64, k: &[f64]) -> Result<()> {
    let tol = 1e-8 * (values.last().unwrap_or(&0.0) - values.first().unwrap_or(&0.0)).max(1.0);
    if values.iter().any(|e| (e - mu).abs() < tol) {
        return Err(Error::NoGap(format!("band touches mu = {mu} at k = {k:?}")));
    }
    Ok(())
}

/// Fermi projection of the Bloch fiber at k.
pub fn bloch_projection(model: &BulkModel, k: &[f64]) -> Result<CMat> {
    let s = bloch_spectrum(model, k)?;
    check_gap(&s.values, model.mu, k)?;
    Ok(s.apply(|e| if e < model.mu { ONE } else { ZERO }))
}

/// Lower-left block of sgn(H_k) for a chiral model.
pub fn bloch_fermi_unitary(model: &BulkModel, k: &[f64]) -> Result<CMat> {
    let s = bloch_spectrum(model, k)?;
    check_gap(&s.values, 0.0, k)?;
    let q = s.apply(|e| c(e.signum(), 0.0));
    let (plus, minus) = chiral_blocks(&model.j_diag());
    Ok(linalg::submatrix(&q, &minus, &plus))
}

/// Top odd Chern number of a clean chiral model by a Riemann sum over the Brillouin zone.
pub fn winding_k(model: &BulkModel, grid: usize) -> Result<InvariantResult> {
    if !model.chiral {
        return Err(Error::NotChiral("winding needs a chiral model".into()));
    }
    if model.d % 2 == 0 {
        return Err(Error::Invalid("winding needs odd dimension".into()));
    }
    let z = odd_chern_bloch(model.d, grid, &|k| bloch_fermi_unitary(model, k))?;
    Ok(InvariantResult::new(&format!("Ch{}(u_F)", model.d), z, format!("grid={grid}^{}", model.d)))
}

/// Occupied frames on a 2-torus grid; returns the plaquette sum (1/2πi) Σ Log F.
pub fn plaquette_sum(g1: usize, g2: usize, frame: &dyn Fn(usize, usize) -> Result<CMat>) -> Result<f64> {
    let mut frames = Vec::with_capacity(g1 * g2);
    for i in 0..g1 {
        for j in 0..g2 {
            frames.push(frame(i, j)?);
        }
    }
    let at = |i: usize, j: usize| &frames[(i % g1) * g2 + (j % g2)];
    let link = |a: &CMat, b: &CMat| -> Result<C64> {
        let m = linalg::adjoint(a) * b;
        Ok(m.determinant())
    };
    let mut total = 0.0;
    for i in 0..g1 {
        for j in 0..g2 {
            let u1 = link(at(i, j), at(i + 1, j))?;
            let u2 = link(at(i + 1, j), at(i + 1, j + 1))?;
            let u3 = link(at(i + 1, j + 1), at(i, j + 1))?;
            let u4 = link(at(i, j + 1), at(i, j))?;
            total += (u1 * u2 * u3 * u4).arg();
        }
    }
    Ok(total / (2.0 * PI))
}

/// Frame of occupied eigenvectors of a Hermitian matrix.
pub fn occupied_frame(h: &CMat, mu: f64) -> Result<(CMat, Vec<f64>)> {
    let s = linalg::eigh(h)?;
    let occ: Vec<usize> = (0..s.values.len()).filter(|&i| s.values[i] < mu).collect();
    Ok((linalg::columns(&s.vectors, &occ), s.values))
}

/// Top even Chern number; d = 2 by link variables, higher d by the Riemann sum.
pub fn chern_even_k(model: &BulkModel, grid: usize) -> Result<InvariantResult> {
    let d = model.d;
    if d % 2 != 0 {
        return Err(Error::Invalid("even Chern number needs even dimension".into()));
    }
    let riemann = even_chern_bloch(d, grid, &|k| bloch_projection(model, k))?;
    if d != 2 {
        return Ok(InvariantResult::new(&format!("Ch{d}(P_F)"), riemann, format!("grid={grid}^{d} riemann")));
    }
    let g = grid as f64;
    let plaq = plaquette_sum(grid, grid, &|i, j| {
        let k = [2.0 * PI * i as f64 / g, 2.0 * PI * j as f64 / g];
        let (f, e) = occupied_frame(&bloch_fiber(model, &k)?, model.mu)?;
        check_gap(&e, model.mu, &k)?;
        Ok(f)
    })?;
    // link variables compute (1/2πi)∫tr P[∂₁P, ∂₂P], which is −Ch₂
    let mut r = InvariantResult::new("Ch2(P_F)", c(-plaq, 0.0), format!("grid={grid}^2 riemann={:.12}", riemann.re));
    r.imag = riemann.im;
    Ok(r)
}

/// Orbital indices of the sites in `sites`.
pub fn orbital_rows(sites: &[usize], fiber: usize) -> Vec<usize> {
    sites.iter().flat_map(|&s| (0..fiber).map(move |o| s * fiber + o)).collect()
}

/// Λ_n Σ_ρ (−1)^ρ 𝒯(P ∂_{ρ1}P ⋯) with ∂_j = i[·, X_j], averaged over a window.
pub fn chern_real_space_projection(p: &CMat, vol: &FiniteVolume, fiber: usize, axes: &[usize], window: &TraceWindow) -> Result<InvariantResult> {
    if axes.iter().any(|&a| vol.bc[a] == Bc::Periodic) {
        return Err(Error::Invalid("real-space Chern numbers need open axes".into()));
    }
    let sites = vol.window_sites(window, axes)?;
    let rows = orbital_rows(&sites, fiber);
    let dp: Vec<CMat> = axes.iter().map(|&a| derivation(p, vol, fiber, a)).collect();
    let s: C64 = even_form_diag(p, &dp, &rows).into_iter().sum();
    let z = lambda_n(axes.len()) * s / sites.len() as f64;
    Ok(InvariantResult::new(&format!("Ch{}(P)", axes.len()), z, format!("volume={:?} window_sites={}", vol.sizes, sites.len())))
}

/// Odd analogue for a unitary acting on the J = −1 ← J = +1 half of the fiber.
pub fn chern_real_space_unitary(u: &CMat, vol: &FiniteVolume, half_fiber: usize, axes: &[usize], window: &TraceWindow) -> Result<InvariantResult> {
    if axes.iter().any(|&a| vol.bc[a] == Bc::Periodic) {
        return Err(Error::Invalid("real-space Chern numbers need open axes".into()));
    }
    let sites = vol.window_sites(window, axes)?;
    let rows = orbital_rows(&sites, half_fiber);
    let du: Vec<CMat> = axes.iter().map(|&a| derivation(u, vol, half_fiber, a)).collect();
    let dus: Vec<CMat> = du.iter().map(linalg::adjoint).collect();
    let s: C64 = odd_form_diag(u, &du, &dus, &rows).into_iter().sum();
    let z = lambda_n(axes.len()) * s / sites.len() as f64;
    Ok(InvariantResult::new(&format!("Ch{}(U)", axes.len()), z, format!("volume={:?} window_sites={}", vol.sizes, sites.len())))
}

/// Fermi unitary of an open-box chiral operator: polar part of its off-diagonal block.
/// Edge zero modes of the box are paired arbitrarily by the SVD completion.
pub fn open_box_fermi_unitary(h: &LatticeOperator) -> Result<CMat> {
    let (plus, minus) = chiral_blocks(&h.chirality_diag());
    let a = linalg::submatrix(&h.matrix, &minus, &plus);
    Ok(linalg::polar_unitary(&a)?.0)
}

/// Real-space Chern number of the Fermi projection (|I| even) or Fermi unitary (|I| odd).
pub fn chern_real_space(h: &LatticeOperator, mu: f64, axes: &[usize], window: &TraceWindow) -> Result<InvariantResult> {
    if axes.len() % 2 == 0 {
        let spec = spectral::diagonalize(h)?;
        let f = fermi_data(&spec, mu, None, None)?;
        chern_real_space_projection(&f.projection, &h.volume, h.fiber, axes, window)
    } else {
        let u = open_box_fermi_unitary(h)?;
        chern_real_space_unitary(&u, &h.volume, h.fiber / 2, axes, window)
    }
}

/// Chiral polarization i 𝒯(P J ∂_j P) over a window.
pub fn chiral_polarization(p: &CMat, j: &[f64], vol: &FiniteVolume, fiber: usize, axis: usize, window: &TraceWindow) -> Result<InvariantResult> {
    let sites = vol.window_sites(window, &[axis])?;
    let rows = orbital_rows(&sites, fiber);
    let dp = derivation(p, vol, fiber, axis);
    let pj = Mat::from_fn(p.nrows(), p.ncols(), |a, b| p[(a, b)] * j[b]);
    let s: C64 = chain_diag(&[&pj, &dp], &rows).into_iter().sum();
    let z = I * s / sites.len() as f64;
    let r = z.re;
    let half = (2.0 * r).round() / 2.0;
    Ok(InvariantResult {
        name: "P_C".into(),
        value: r,
        imag: z.im,
        rounded: ((r - half).abs() < QUANTIZATION_TOL).then_some((2.0 * r).round() as i64),
        residual: (r - half).abs(),
        meta: format!("volume={:?} window_sites={} rounded_is_2P", vol.sizes, sites.len()),
    })
}

/// Result of counting near-kernel singular vectors localized in a region.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCount {
    pub kernel: usize,
    pub cokernel: usize,
    pub tau: f64,
    pub smallest: Vec<f64>,
}

impl KernelCount {
    pub fn index(&self) -> i64 {
        self.kernel as i64 - self.cokernel as i64
    }
}

/// Default relative threshold τ/‖T‖ for near-kernel singular values.
pub const TAU_ZERO: f64 = 1e-6;

/// Counts singular vectors of T below τ = `tau_rel`·‖T‖ whose lift has weight > ½ in `region`.
pub fn localized_kernel(t: &CMat, lift: Option<&CMat>, region: &[bool], tau_rel: f64) -> Result<KernelCount> {
    if t.nrows() == 0 {
        return Ok(KernelCount { kernel: 0, cokernel: 0, tau: 0.0, smallest: vec![] });
    }
    let svd = linalg::svd(t)?;
    let norm = svd.s.first().copied().unwrap_or(0.0);
    let tau = tau_rel * norm;
    if let Some(s) = svd.s.iter().find(|&&s| s >= tau / 10.0 && s <= 10.0 * tau) {
        return Err(Error::AmbiguousKernel(format!("singular value {s:e} near tau {tau:e}")));
    }
    let weight = |v: &CMat, col: usize| -> f64 {
        let w: Vec<C64> = match lift {
            Some(l) => (0..l.nrows()).map(|r| (0..l.ncols()).map(|q| l[(r, q)] * v[(q, col)]).sum()).collect(),
            None => (0..v.nrows()).map(|r| v[(r, col)]).collect(),
        };
        let tot: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let inside: f64 = w.iter().zip(region).filter(|(_, &b)| b).map(|(z, _)| z.norm_sqr()).sum();
        inside / tot
    };
    let mut kernel = 0;
    let mut cokernel = 0;
    for (i, &s) in svd.s.iter().enumerate() {
        if s < tau {
            if weight(&svd.v, i) > 0.5 {
                kernel += 1;
            }
            if weight(&svd.u, i) > 0.5 {
                cokernel += 1;
            }
        }
    }
    let mut smallest: Vec<f64> = svd.s.iter().rev().take(4).copied().collect();
    smallest.reverse();
    Ok(KernelCount { kernel, cokernel, tau, smallest })
}

/// Ind(Π U Π*) for Π the restriction to centered positions x ≥ 0 of a d = 1 volume.
pub fn fredholm_index_halfline(u: &CMat, vol: &FiniteVolume, orbitals: usize, tau_rel: f64) -> Result<KernelCount> {
    if vol.dim() != 1 {
        return Err(Error::Invalid("half-line index needs d = 1".into()));
    }
    let l = vol.sizes[0];
    let half: Vec<usize> = (0..l).filter(|&s| vol.position(s, 0) >= 0.0).collect();
    let rows = orbital_rows(&half, orbitals);
    let t = linalg::submatrix(u, &rows, &rows);
    // near the cut at x = 0, away from the far end of the half window
    let reach = (half.len() / 2) as f64;
    let region: Vec<bool> = rows.iter().map(|&r| vol.position(r / orbitals, 0) < reach).collect();
    localized_kernel(&t, None, &region, tau_rel)
}

fn central_region(vol: &FiniteVolume, rows: usize, per_site: usize, x0: &[f64]) -> Vec<bool> {
    let radius = vol.sizes.iter().min().copied().unwrap_or(0) as f64 / 4.0;
    (0..rows)
        .map(|r| {
            let s = r / per_site;
            let d2: f64 = (0..vol.dim()).map(|i| (vol.position(s, i) + x0[i]).powi(2)).sum();
            d2.sqrt() < radius
        })
        .collect()
}

/// Ind(P G P) on ran P for even d; the Dirac phase is taken in the γ₀ grading.
pub fn fredholm_index_dirac_even(p_frame: &CMat, fiber: usize, vol: &FiniteVolume, rep: &CliffordRep, x0: &[f64], tau_rel: f64) -> Result<KernelCount> {
    let d = vol.dim();
    if d % 2 != 0 {
        return Err(Error::Invalid("even Dirac index needs even d".into()));
    }
    let phase = dirac_phase(rep, vol, x0)?;
    let g = phase.g_blocks();
    let h = rep.dim / 2;
    let sites = vol.sites();
    let r = p_frame.ncols();
    // lift of ran P into (site, clifford, orbital) ordering
    let lifted = Mat::from_fn(sites * h * fiber, r * h, |row, col| {
        let (s, rest) = (row / (h * fiber), row % (h * fiber));
        let (cl, o) = (rest / fiber, rest % fiber);
        let (j, cc) = (col / h, col % h);
        if cl == cc {
            p_frame[(s * fiber + o, j)]
        } else {
            ZERO
        }
    });
    let gl = Mat::from_fn(sites * h * fiber, r * h, |row, col| {
        let (s, rest) = (row / (h * fiber), row % (h * fiber));
        let (cl, o) = (rest / fiber, rest % fiber);
        let mut z = ZERO;
        for k in 0..h {
            z += g[s][(cl, k)] * lifted[((s * h + k) * fiber + o, col)];
        }
        z
    });
    let t = linalg::adjoint(&lifted) * &gl;
    let region = central_region(vol, sites * h * fiber, h * fiber, x0);
    localized_kernel(&t, Some(&lifted), &region, tau_rel)
}

/// −Ind(E U E) on ran E for odd d, E the Hardy projection of the Dirac phase.
pub fn fredholm_index_dirac_odd(u: &CMat, half_fiber: usize, vol: &FiniteVolume, rep: &CliffordRep, x0: &[f64], tau_rel: f64) -> Result<KernelCount> {
    let d = vol.dim();
    if d % 2 != 1 {
        return Err(Error::Invalid("odd Dirac index needs odd d".into()));
    }
    let phase = dirac_phase(rep, vol, x0)?;
    let k = rep.dim;
    let sites = vol.sites();
    let n = half_fiber;
    // frame of ran E per site, lifted to (site, clifford, orbital)
    let mut cols: Vec<(usize, CMat)> = Vec::new();
    for (s, e) in phase.hardy_blocks().iter().enumerate() {
        let sp = linalg::eigh(e)?;
        for (i, &v) in sp.values.iter().enumerate() {
            if v > 0.5 {
                cols.push((s, Mat::from_fn(k, 1, |a, _| sp.vectors[(a, i)])));
            }
        }
    }
    let r = cols.len() * n;
    let frame = Mat::from_fn(sites * k * n, r, |row, col| {
        let (s, rest) = (row / (k * n), row % (k * n));
        let (cl, o) = (rest / n, rest % n);
        let (ci, oo) = (col / n, col % n);
        if cols[ci].0 == s && o == oo {
            cols[ci].1[(cl, 0)]
        } else {
            ZERO
        }
    });
    // (1 ⊗ U) acting on the frame: clifford index untouched
    let uf = Mat::from_fn(sites * k * n, r, |row, col| {
        let (s, rest) = (row / (k * n), row % (k * n));
        let (cl, o) = (rest / n, rest % n);
        let mut z = ZERO;
        for s2 in 0..sites {
            for o2 in 0..n {
                let w = u[(s * n + o, s2 * n + o2)];
                if w != ZERO {
                    z += w * frame[((s2 * k + cl) * n + o2, col)];
                }
            }
        }
        z
    });
    let t = linalg::adjoint(&frame) * &uf;
    let region = central_region(vol, sites * k * n, k * n, x0);
    let mut count = localized_kernel(&t, Some(&frame), &region, tau_rel)?;
    std::mem::swap(&mut count.kernel, &mut count.cokernel);
    Ok(count)
}

/// Local Calderon–Fedosov trace of diag((P − PG*PGP)^n) − diag((P − PGPG*P)^n)
/// over a central ball, n = d + 1 (even d, scalar G).
pub fn calderon_fedosov_even(p: &CMat, fiber: usize, vol: &FiniteVolume, rep: &CliffordRep, x0: &[f64]) -> Result<f64> {
    if rep.dim != 2 {
        return Err(Error::Invalid("Calderon-Fedosov check implemented for scalar Dirac phases".into()));
    }
    let phase = dirac_phase(rep, vol, x0)?;
    let g: Vec<C64> = phase.g_blocks().iter().flat_map(|b| std::iter::repeat(b[(0, 0)]).take(fiber)).collect();
    let gp = Mat::from_fn(p.nrows(), p.ncols(), |a, b| g[a] * p[(a, b)]);
    let gsp = Mat::from_fn(p.nrows(), p.ncols(), |a, b| g[a].conj() * p[(a, b)]);
    let pgp = p * &gp;
    let pgsp = p * &gsp;
    let a = p - &pgsp * &pgp;
    let b = p - &pgp * &pgsp;
    let n = vol.dim() + 1;
    let mut an = a.clone();
    let mut bn = b.clone();
    for _ in 1..n {
        an = &an * &a;
        bn = &bn * &b;
    }
    let region = central_region(vol, p.nrows(), fiber, x0);
    let s: C64 = (0..p.nrows()).filter(|&r| region[r]).map(|r| an[(r, r)] - bn[(r, r)]).sum();
    Ok(s.re)
}

/// Per-site traces of a slab summed over depth n < cut and averaged over parallel sites.
#[derive(Clone, Debug)]
pub struct SlabTrace {
    pub value: C64,
    /// Contribution of the last layer n = cut − 1.
    pub tail: f64,
}

pub fn depth_cut_default(vol: &FiniteVolume) -> usize {
    vol.sizes[vol.dim() - 1] / 2
}

/// 𝒯̃ over the rows of a slab: `diag` holds per-orbital values for every site.
pub fn trace_per_area(diag: &dyn Fn(&[usize]) -> Vec<C64>, vol: &FiniteVolume, fiber: usize, window: &TraceWindow, cut: usize) -> Result<SlabTrace> {
    let d = vol.dim();
    if !vol.is_halfspace() {
        return Err(Error::Invalid("trace per area needs a half-space slab".into()));
    }
    let par: Vec<usize> = (0..d - 1).filter(|&a| vol.bc[a] == Bc::Open).collect();
    let base = vol.window_sites(window, &par)?;
    let sites: Vec<usize> = base.into_iter().filter(|&s| (vol.coords(s)[d - 1] as usize) < cut).collect();
    let rows = orbital_rows(&sites, fiber);
    let vals = diag(&rows);
    let n_par = sites.len() / cut.max(1);
    let mut total = ZERO;
    let mut tail = ZERO;
    for (i, v) in vals.iter().enumerate() {
        total += *v;
        if vol.coords(rows[i] / fiber)[d - 1] as usize == cut - 1 {
            tail += *v;
        }
    }
    let value = total / n_par as f64;
    let tail = (tail / n_par as f64).norm();
    if tail > 1e-6 * value.norm().max(1.0) {
        return Err(Error::DepthCutTooSmall(format!("tail {tail:e} at cut {cut}")));
    }
    Ok(SlabTrace { value, tail })
}

/// Boundary Chern number of ũ_Δ (|Ĩ| odd) on a dense slab.
pub fn boundary_invariant_unitary(u: &CMat, vol: &FiniteVolume, fiber: usize, axes: &[usize], window: &TraceWindow, cut: usize) -> Result<InvariantResult> {
    if axes.len() % 2 != 1 {
        return Err(Error::Invalid("unitary boundary invariant needs odd |I|".into()));
    }
    let du: Vec<CMat> = axes.iter().map(|&a| derivation(u, vol, fiber, a)).collect();
    let dus: Vec<CMat> = du.iter().map(linalg::adjoint).collect();
    let t = trace_per_area(&|rows| odd_form_diag(u, &du, &dus, rows), vol, fiber, window, cut)?;
    let z = lambda_n(axes.len()) * t.value;
    Ok(InvariantResult::new(&format!("Ch~{}(u_delta)", axes.len()), z, format!("slab={:?} cut={cut} tail={:e}", vol.sizes, t.tail)))
}

/// Boundary Chern number of p̃_Δ (|Ĩ| even) on a dense slab; `shift` is s(p̃) = diag(0, 1).
pub fn boundary_invariant_projection(p: &CMat, j: &[f64], vol: &FiniteVolume, fiber: usize, axes: &[usize], window: &TraceWindow, cut: usize) -> Result<InvariantResult> {
    if axes.len() % 2 != 0 {
        return Err(Error::Invalid("projection boundary invariant needs even |I|".into()));
    }
    let mut ps = p.clone();
    for (i, &ji) in j.iter().enumerate() {
        if ji < 0.0 {
            ps[(i, i)] -= ONE;
        }
    }
    let dp: Vec<CMat> = axes.iter().map(|&a| derivation(p, vol, fiber, a)).collect();
    let t = trace_per_area(&|rows| even_form_diag(&ps, &dp, rows), vol, fiber, window, cut)?;
    let z = lambda_n(axes.len()) * t.value;
    Ok(InvariantResult::new(&format!("Ch~{}(p_delta)", axes.len()), z, format!("slab={:?} cut={cut} tail={:e}", vol.sizes, t.tail)))
}

/// Boundary current 𝒯̃(f′(ĥ) i[ĥ, X_j]) on a dense slab.
pub fn boundary_current(h: &CMat, spec: &SpectralData, f: &SmoothStep, vol: &FiniteVolume, fiber: usize, axis: usize, window: &TraceWindow, cut: usize) -> Result<f64> {
    let fp = spec.apply(|e| c(f.derivative(e), 0.0));
    let dh = derivation(h, vol, fiber, axis);
    let t = trace_per_area(&|rows| chain_diag(&[&fp, &dh], rows), vol, fiber, window, cut)?;
    Ok(t.value.re)
}

/// Tr(Ĵ χ(|ĥ| ≤ δ)) restricted to depth n < cut.
pub fn zero_mode_chirality(spec: &SpectralData, j: &[f64], vol: &FiniteVolume, fiber: usize, delta: f64, cut: usize) -> Result<InvariantResult> {
    let (pp, pm) = spectral::chiral_splitting(spec, j, delta, None)?;
    let d = vol.dim();
    let mut s = 0.0;
    for r in 0..pp.nrows() {
        if (vol.coords(r / fiber)[d - 1] as usize) < cut {
            s += pp[(r, r)].re - pm[(r, r)].re;
        }
    }
    Ok(InvariantResult::new("N+ - N-", c(s, 0.0), format!("delta={delta} cut={cut}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{chiral_odd, dirac_even, ssh};
    use crate::clifford::build_rep;
    use crate::model::{assemble_bulk, DisorderConfig};

    #[test]
    fn normalizations() {
        assert!((lambda_n(1) - I).norm() < 1e-15);
        assert!((lambda_n(2) - c(0.0, 2.0 * PI)).norm() < 1e-14);
        assert!((lambda_n(3) - I * c(0.0, PI) / 3.0).norm() < 1e-14);
        assert!((lambda_n(4) - c(-2.0 * PI * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn permutation_signs() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p.iter().map(|x| x.1).sum::<f64>(), 0.0);
        for (perm, s) in &p {
            let inv = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| perm[i] > perm[j]).count();
            assert_eq!(*s, if inv % 2 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn chain_diag_matches_product() {
        let a = Mat::from_fn(5, 5, |i, j| c(i as f64 - j as f64, (i * j) as f64 * 0.1));
        let b = Mat::from_fn(5, 5, |i, j| c((i + 2 * j) as f64, 1.0));
        let full = &a * &b * &a;
        let d = chain_diag(&[&a, &b, &a], &[1, 3]);
        assert!((d[0] - full[(1, 1)]).norm() < 1e-12 && (d[1] - full[(3, 3)]).norm() < 1e-12);
    }

    #[test]
    fn ssh_winding_values() {
        assert!((winding_k(&ssh(0.5, 0.0, 0.0, 1), 256).unwrap().value + 1.0).abs() < 1e-10);
        assert!(winding_k(&ssh(2.0, 0.0, 0.0, 1), 256).unwrap().value.abs() < 1e-10);
        assert!((winding_k(&ssh(-0.5, 0.0, 0.0, 2), 128).unwrap().value + 2.0).abs() < 1e-10);
    }

    #[test]
    fn dirac_plaquette_values() {
        for (m, want) in [(-1.0, 1), (1.0, -1), (3.0, 0)] {
            let r = chern_even_k(&dirac_even(2, m).unwrap(), 32).unwrap();
            assert_eq!(r.rounded, Some(want), "m={m} {r:?}");
            assert!(r.residual < 1e-9);
        }
    }

    #[test]
    fn plaquette_agrees_with_riemann_sum() {
        let model = dirac_even(2, -1.0).unwrap();
        let r = chern_even_k(&model, 48).unwrap();
        let riemann = even_chern_bloch(2, 48, &|k| bloch_projection(&model, k)).unwrap();
        assert!((riemann.re - r.value).abs() < 1e-6 && riemann.im.abs() < 1e-9, "{riemann} vs {}", r.value);
    }

    #[test]
    fn chiral_d1_sign() {
        let r = winding_k(&chiral_odd(1, 0.5).unwrap(), 128).unwrap();
        assert_eq!(r.rounded, Some(1));
        let r = winding_k(&chiral_odd(3, 0.0).unwrap(), 12).unwrap();
        assert_eq!(r.rounded, Some(2));
    }

    #[test]
    fn halfline_index_of_shift() {
        let l = 40;
        let vol = FiniteVolume::periodic(&[l]);
        let s = Mat::from_fn(l, l, |p, q| if p == (q + 1) % l { ONE } else { ZERO });
        assert_eq!(fredholm_index_halfline(&s, &vol, 1, TAU_ZERO).unwrap().index(), -1);
        assert_eq!(fredholm_index_halfline(&linalg::identity(l), &vol, 1, TAU_ZERO).unwrap().index(), 0);
    }

    #[test]
    fn ssh_halfline_index() {
        for (m, want) in [(0.5, 1), (2.0, 0)] {
            let vol = FiniteVolume::periodic(&[64]);
            let h = assemble_bulk(&ssh(m, 0.0, 0.0, 1), &vol, &DisorderConfig::clean()).unwrap();
            let u = open_box_fermi_unitary(&h).unwrap();
            assert_eq!(fredholm_index_halfline(&u, &vol, 1, TAU_ZERO).unwrap().index(), want);
        }
    }

    #[test]
    fn ssh_real_space_winding() {
        let vol = FiniteVolume::open(&[128]);
        let h = assemble_bulk(&ssh(0.5, 0.0, 0.0, 1), &vol, &DisorderConfig::clean()).unwrap();
        let r = chern_real_space(&h, 0.0, &[0], &TraceWindow::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn atomic_insulator_is_trivial() {
        let mut b = BulkModel::new(2, 2).with_hop(vec![0, 0], linalg::from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]]), 0.0);
        b.mu = 0.0;
        let vol = FiniteVolume::open(&[6, 6]);
        let h = assemble_bulk(&b, &vol, &DisorderConfig::clean()).unwrap();
        let r = chern_real_space(&h, 0.0, &[0, 1], &TraceWindow::default()).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn dirac_real_space_chern() {
        let vol = FiniteVolume::open(&[16, 16]);
        let h = assemble_bulk(&dirac_even(2, -1.0).unwrap(), &vol, &DisorderConfig::clean()).unwrap();
        let r = chern_real_space(&h, 0.0, &[0, 1], &TraceWindow::default()).unwrap();
        assert!((r.value - 1.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn ssh_chiral_polarization() {
        let vol = FiniteVolume::open(&[128]);
        for (m, want) in [(0.5, 0.5), (2.0, 0.0)] {
            let h = assemble_bulk(&ssh(m, 0.0, 0.0, 1), &vol, &DisorderConfig::clean()).unwrap();
            let u = open_box_fermi_unitary(&h).unwrap();
            let p = spectral::chiral_projection(&u, &h.chirality_diag());
            let r = chiral_polarization(&p, &h.chirality_diag(), &vol, 2, 0, &TraceWindow::default()).unwrap();
            assert!((r.value - want).abs() < 1e-6 && r.imag.abs() < 1e-9, "m={m} {r:?}");
        }
    }

    #[test]
    fn ssh_dirac_index_matches() {
        let vol = FiniteVolume::open(&[64]);
        let h = assemble_bulk(&ssh(0.5, 0.0, 0.0, 1), &vol, &DisorderConfig::clean()).unwrap();
        let u = open_box_fermi_unitary(&h).unwrap();
        let k = fredholm_index_dirac_odd(&u, 1, &vol, &build_rep(1), &[0.5], TAU_ZERO).unwrap();
        assert_eq!(k.index(), -1);
    }
}
