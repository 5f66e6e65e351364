//! Property checks shared by the property suite and the acceptance runner.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use std::f64::consts::PI;
use topolat::catalog::{bulk_gap, dirac_even, ssh};
use topolat::clifford::build_rep;
use topolat::gaplabel::harper;
use topolat::invariants::{chern_even_k, odd_chern_bloch, winding_k, bloch_fermi_unitary};
use topolat::linalg::{self, c, CMat};
use topolat::slab::{boundary_invariant_unitary, SlabGrid};
use topolat::spectral::{SmoothStep, StepKind, StepProfile};
use topolat::{assemble_bulk, magnetic_translation, sample_disorder, FiniteVolume, HalfSpaceModel};

pub type Check = Result<(), TestCaseError>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg))
    }
}

pub fn clifford_ccr(n: usize) -> Check {
    let rep = build_rep(n);
    ensure(rep.ccr_residual() < 1e-12, format!("CCR residual {} at n = {n}", rep.ccr_residual()))?;
    let one = linalg::identity(rep.dim);
    for g in &rep.generators {
        ensure(linalg::hermiticity_residual(g) < 1e-12, format!("non-Hermitian generator at n = {n}"))?;
    }
    if n % 2 == 0 {
        let g0 = &rep.chirality;
        ensure(linalg::max_abs(&(g0 * g0 - &one)) < 1e-12, format!("ν₀² ≠ 1 at n = {n}"))?;
        for g in &rep.generators {
            ensure(linalg::max_abs(&(g0 * g + g * g0)) < 1e-12, format!("ν₀ does not anticommute at n = {n}"))?;
        }
    }
    Ok(())
}

pub fn chiral_spectrum(m: f64, l1: f64, l2: f64, sites: usize, seed: u64) -> Check {
    let model = ssh(m, l1, l2, 1);
    let vol = FiniteVolume::open(&[sites]);
    let h = assemble_bulk(&model, &vol, &sample_disorder(&model, &vol, seed).unwrap()).unwrap();
    let e = linalg::eigvalsh(&h.matrix).unwrap();
    let n = e.len();
    let err = (0..n).map(|i| (e[i] + e[n - 1 - i]).abs()).fold(0.0, f64::max);
    ensure(err < 1e-10, format!("pairing error {err:e}"))
}

pub fn magnetic_covariance(p: usize, l: usize, lambda: f64, seed: u64, shift: (i64, i64)) -> Check {
    let mut model = harper(2.0 * PI * p as f64 / l as f64).unwrap();
    for h in &mut model.hoppings {
        h.lambda = lambda;
    }
    let vol = FiniteVolume::periodic(&[l, l]);
    let dis = sample_disorder(&model, &vol, seed).unwrap();
    let h = assemble_bulk(&model, &vol, &dis).unwrap();
    let a = [shift.0, shift.1];
    let v = magnetic_translation(&model.field, &vol, &a, 1).unwrap();
    let lhs = &v * &h.matrix * linalg::adjoint(&v);
    let rhs = assemble_bulk(&model, &vol, &dis.translated(&vol, &[-a[0], -a[1]])).unwrap();
    let err = linalg::max_abs(&(lhs - rhs.matrix));
    ensure(err < 1e-12, format!("covariance error {err:e}"))
}

/// Boundary invariant of the d = 2 half-plane for varying smooth steps.
pub fn f_exp_independence(m: f64, frac: f64, septic: bool) -> Check {
    let bulk = dirac_even(2, m).unwrap();
    let want = chern_even_k(&bulk, 32).unwrap().rounded.unwrap() as f64;
    let gap = bulk_gap(&bulk, 64).unwrap();
    let profile = if septic { StepProfile::Septic } else { StepProfile::Quintic };
    let f = SmoothStep::in_gap(StepKind::Exp, (-gap, gap), frac).with_profile(profile);
    let r = boundary_invariant_unitary(&HalfSpaceModel::dirichlet(bulk), &SlabGrid::new(128, 32), &f).unwrap();
    ensure((r.value - want).abs() < 1e-6, format!("m = {m}, frac = {frac}: {} vs {want}", r.value))
}

pub fn winding_additivity(m1: f64, m2: f64) -> Check {
    let (a, b) = (ssh(m1, 0.0, 0.0, 1), ssh(m2, 0.0, 0.0, 1));
    let w1 = winding_k(&a, 128).unwrap().value;
    let w2 = winding_k(&b, 128).unwrap().value;
    let prod = odd_chern_bloch(1, 128, &|k| Ok(bloch_fermi_unitary(&a, k)? * bloch_fermi_unitary(&b, k)?)).unwrap();
    ensure((prod.re - w1 - w2).abs() < 1e-8, format!("Ch(u₁u₂) = {} vs {w1} + {w2}", prod.re))?;
    let double = winding_k(&ssh(m1, 0.0, 0.0, 2), 128).unwrap().value;
    ensure((double - 2.0 * w1).abs() < 1e-8, format!("Ch(u ⊕ u) = {double} vs 2·{w1}"))
}

fn hermitian(a: [f64; 4]) -> CMat {
    linalg::from_rows(&[vec![c(a[0], 0.0), c(a[2], a[3])], vec![c(a[2], -a[3]), c(a[1], 0.0)]])
}

/// Adds an on-site perturbation of norm ε·gap and compares the rounded invariant.
pub fn homotopy_stability(m: f64, eps: f64, dir: [f64; 4], chiral: bool) -> Check {
    let (model, d) = if chiral { (ssh(m, 0.0, 0.0, 1), 1) } else { (dirac_even(2, m).unwrap(), 2) };
    let gap = bulk_gap(&model, 64).unwrap();
    let mut dir = dir;
    if chiral {
        dir[0] = 0.0;
        dir[1] = 0.0;
    }
    let pert = hermitian(dir);
    let norm = linalg::eigvalsh(&pert).unwrap().iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if norm < 1e-9 {
        return Ok(());
    }
    let pert = linalg::scale(&pert, c(eps * gap / norm, 0.0));
    let mut moved = model.clone();
    let zero = vec![0i64; d];
    let h = moved.hoppings.iter_mut().find(|h| h.y == zero).unwrap();
    h.w = &h.w + &pert;
    let inv = |m: &topolat::BulkModel| if chiral { winding_k(m, 128) } else { chern_even_k(m, 32) };
    let (a, b) = (inv(&model).unwrap(), inv(&moved).unwrap());
    ensure(a.rounded.is_some() && a.rounded == b.rounded, format!("m = {m}, ε = {eps}: {} → {}", a.value, b.value))?;
    ensure(b.residual < 1e-6, format!("perturbed residual {}", b.residual))
}

pub fn masses_off_critical(d: usize) -> impl Strategy<Value = f64> {
    (-(d as f64) - 1.5..d as f64 + 1.5).prop_filter("away from gap closings", move |m| {
        topolat::catalog::critical_masses(d).iter().all(|mc| (m - mc).abs() > 0.2)
    })
}

/// Disordered SSH chain with additive mass disorder λ″ = |m|λ₂ = 1.
pub fn ssh_dirty() -> topolat::BulkModel {
    ssh(0.5, 1.0, 2.0, 1)
}

pub struct ChiralRoutes {
    pub zero_modes: f64,
    pub real_space: f64,
    pub index: i64,
    pub halfline_index: i64,
}

/// Zero modes on a half-line of `sites`, real-space winding and both indices on an open chain.
pub fn chiral_routes(model: &topolat::BulkModel, sites: usize, seed: u64) -> topolat::Result<ChiralRoutes> {
    use topolat::invariants::{
        chern_real_space, depth_cut_default, fredholm_index_dirac_odd, fredholm_index_halfline, open_box_fermi_unitary,
        zero_mode_chirality, TAU_ZERO,
    };
    use topolat::model::sample_disorder_halfspace;
    use topolat::spectral::diagonalize;

    let hs = HalfSpaceModel::dirichlet(model.clone());
    let half = FiniteVolume::slab(&[sites]);
    let h = topolat::assemble_halfspace(&hs, &half, &sample_disorder_halfspace(&hs, &half, seed, seed)?)?;
    let spec = diagonalize(&h)?;
    let zm = zero_mode_chirality(&spec, &h.chirality_diag(), &half, h.fiber, 1e-3, depth_cut_default(&half))?;

    let open = FiniteVolume::open(&[sites]);
    let h = assemble_bulk(model, &open, &sample_disorder(model, &open, seed)?)?;
    let rs = chern_real_space(&h, model.mu, &[0], &topolat::TraceWindow::default())?;
    let u = open_box_fermi_unitary(&h)?;
    let index = fredholm_index_dirac_odd(&u, h.fiber / 2, &open, &build_rep(1), &[0.5], TAU_ZERO)?.index();
    let halfline_index = fredholm_index_halfline(&u, &open, h.fiber / 2, TAU_ZERO)?.index();
    Ok(ChiralRoutes { zero_modes: zm.value, real_space: rs.value, index, halfline_index })
}

pub struct DenseBoundary {
    pub invariant: f64,
    pub current: f64,
}

/// Boundary invariant and current of dirac_even(2, m) on a dense half-plane slab with
/// hopping disorder of strength `lambda`.
pub fn dense_boundary_d2(m: f64, sizes: [usize; 2], lambda: f64, seed: u64, frac: f64) -> topolat::Result<DenseBoundary> {
    use topolat::invariants::{boundary_current, boundary_invariant_unitary as dense_unitary, depth_cut_default};
    use topolat::model::sample_disorder_halfspace;
    use topolat::spectral::{boundary_operators, diagonalize};

    let mut bulk = dirac_even(2, m)?;
    let gap = bulk_gap(&bulk, 64)?;
    for h in &mut bulk.hoppings {
        h.lambda = lambda;
    }
    let hs = HalfSpaceModel::dirichlet(bulk);
    let vol = FiniteVolume::slab(&sizes);
    let dis = if lambda == 0.0 { topolat::DisorderConfig::clean() } else { sample_disorder_halfspace(&hs, &vol, seed, seed)? };
    let h = topolat::assemble_halfspace(&hs, &vol, &dis)?;
    let spec = diagonalize(&h)?;
    let f = SmoothStep::in_gap(StepKind::Exp, (-gap, gap), frac).with_profile(StepProfile::Septic);
    let ops = boundary_operators(&spec, &f, None)?;
    let window = topolat::TraceWindow::default();
    let cut = depth_cut_default(&vol);
    let inv = dense_unitary(&ops.u_delta, &vol, h.fiber, &[0], &window, cut)?;
    let current = boundary_current(&h.matrix, &spec, &f, &vol, h.fiber, 0, &window, cut)?;
    Ok(DenseBoundary { invariant: inv.value, current })
}

/// Same quantities on a Bloch slab.
pub fn bloch_boundary_d2(m: f64, grid: usize, depth: usize, frac: f64) -> topolat::Result<DenseBoundary> {
    use topolat::slab::boundary_current;
    let bulk = dirac_even(2, m)?;
    let gap = bulk_gap(&bulk, 64)?;
    let hs = HalfSpaceModel::dirichlet(bulk);
    let g = SlabGrid::new(grid, depth);
    let f = SmoothStep::in_gap(StepKind::Exp, (-gap, gap), frac).with_profile(StepProfile::Septic);
    Ok(DenseBoundary {
        invariant: boundary_invariant_unitary(&hs, &g, &f)?.value,
        current: boundary_current(&hs, &g, &f, 0)?,
    })
}
