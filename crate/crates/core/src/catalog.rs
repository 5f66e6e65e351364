//! Exactly solvable models with closed-form phase diagrams.

use crate::clifford::build_rep;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I, ONE, ZERO};
use crate::model::{bloch_fiber, BulkModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn eye_kron(w: &CMat, n: usize) -> CMat {
    linalg::kron(w, &linalg::identity(n))
}

/// SSH chain on a 2N′ fiber: hop ½(σ₁ + iσ₂) ⊗ 1 and mass m σ₂ ⊗ 1,
/// with disorder couplings `lambda1` on the hop and `lambda2` on the mass.
pub fn ssh(m: f64, lambda1: f64, lambda2: f64, n_prime: usize) -> BulkModel {
    let hop = linalg::from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]]);
    let sigma2 = linalg::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]);
    // σ ⊗ 1_N′ keeps the J-blocks contiguous
    let mut b = BulkModel::new(1, 2 * n_prime)
        .with_hop(vec![1], eye_kron(&hop, n_prime), lambda1)
        .with_hop(vec![0], eye_kron(&linalg::scale(&sigma2, c(m, 0.0)), n_prime), lambda2);
    b.chiral = true;
    b
}

fn unit(d: usize, j: usize, sign: i64) -> Vec<i64> {
    (0..d).map(|i| if i == j { sign } else { 0 }).collect()
}

fn clifford_model(d: usize, m: f64, gammas: &[CMat], mass: &CMat) -> BulkModel {
    let n = mass.nrows();
    let mut b = BulkModel::new(d, n);
    for (j, g) in gammas.iter().enumerate().take(d) {
        // (γ_j / 2i) S_j + (γ_mass / 2) S_j, with the symbol of S_j equal to e^{ik_j}
        // in the derivation-compatible Fourier convention, i.e. a hop along −e_j
        let w = linalg::scale(g, c(0.0, -0.5)) + linalg::scale(mass, c(0.5, 0.0));
        b = b.with_hop(unit(d, j, -1), w, 0.0);
    }
    b.with_hop(vec![0; d], linalg::scale(mass, c(m, 0.0)), 0.0)
}

/// Σ sin k_j γ_j + (m + Σ cos k_j) γ₀ on a 2^{d/2} fiber.
pub fn dirac_even(d: usize, m: f64) -> Result<BulkModel> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Invalid(format!("dirac_even needs even d, got {d}")));
    }
    let rep = build_rep(d);
    Ok(clifford_model(d, m, &rep.generators, &rep.chirality))
}

/// Σ sin k_j γ_j + (m + Σ cos k_j) γ_{d+1} on a 2^{(d+1)/2} fiber; chiral w.r.t. γ₀.
pub fn chiral_odd(d: usize, m: f64) -> Result<BulkModel> {
    if d % 2 != 1 {
        return Err(Error::Invalid(format!("chiral_odd needs odd d, got {d}")));
    }
    let rep = build_rep(d + 1);
    let mut b = clifford_model(d, m, &rep.generators[..d], &rep.generators[d]);
    b.chiral = true;
    Ok(b)
}

/// Gap-closing masses −d, −d+2, …, d.
pub fn critical_masses(d: usize) -> Vec<f64> {
    (0..=d).map(|n| -(d as f64) + 2.0 * n as f64).collect()
}

fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let mut r = 1i64;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// Sign factor of the explicit phase diagrams.
pub fn chi(d: usize) -> i64 {
    let e = if d % 2 == 0 { d / 2 + 1 } else { (d - 1) / 2 };
    if e % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub m: f64,
    /// Phase index n with m ∈ (−d+2n, −d+2n+2); `None` outside [−d, d].
    pub n: Option<usize>,
    pub chern: i64,
}

/// Top Chern number of `dirac_even` (even d) or `chiral_odd` (odd d).
pub fn analytic_chern(d: usize, m: f64) -> Result<PhasePoint> {
    if critical_masses(d).iter().any(|&mc| (m - mc).abs() < 1e-12) {
        return Err(Error::NoGap(format!("m = {m} is a critical mass")));
    }
    let df = d as f64;
    if m.abs() > df {
        return Ok(PhasePoint { m, n: None, chern: 0 });
    }
    let n = ((m + df) / 2.0).floor() as usize;
    let sign = if n % 2 == 0 { 1 } else { -1 };
    Ok(PhasePoint { m, n: Some(n), chern: chi(d) * sign * binomial(d - 1, n) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylPoint {
    pub k: Vec<f64>,
    pub chirality: i64,
    pub energy: f64,
}

/// Boundary band crossings of the half-space `dirac_even` model and Σν.
pub fn weyl_points(d: usize, m: f64) -> Result<(Vec<WeylPoint>, i64)> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Invalid(format!("weyl_points needs even d, got {d}")));
    }
    let mut pts = Vec::new();
    for mask in 0u32..(1 << (d - 1)) {
        let k: Vec<f64> = (0..d - 1).map(|j| if mask >> j & 1 == 1 { PI } else { 0.0 }).collect();
        let lam = -(m + k.iter().map(|x| x.cos()).sum::<f64>());
        if lam.abs() < 1.0 {
            let chirality = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            pts.push(WeylPoint { k, chirality, energy: 0.0 });
        }
    }
    let total = pts.iter().map(|p| p.chirality).sum();
    Ok((pts, total))
}

/// Boundary band (Ê_k, λ_k) = (sin k, −(m + cos k)) of the d = 2 model, when |λ_k| < 1.
pub fn edge_band(m: f64, k: f64) -> Option<(f64, f64)> {
    let lam = -(m + k.cos());
    (lam.abs() < 1.0 - 1e-12).then_some((k.sin(), lam))
}

/// ∫_{−1/2}^{1/2} ln|a + b ω| dω.
fn mean_log(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return a.abs().ln();
    }
    let g = |u: f64| if u == 0.0 { 0.0 } else { u * u.abs().ln() - u };
    (g(a + 0.5 * b) - g(a - 0.5 * b)) / b
}

/// Closed-form inverse localization length of the disordered SSH chain at E = 0,
/// for hops 1 + λ′ω′ and masses m + λ″ω″. The multiplicative mass disorder of
/// [`ssh`] corresponds to λ″ = |m| λ₂.
pub fn localization_length_analytic(m: f64, lambda1: f64, lambda2: f64) -> f64 {
    if lambda1 > 0.0 && lambda2 > 0.0 {
        let (l1, l2) = (lambda1, lambda2);
        // c ln|u| with c ∝ u vanishes at u = 0
        let xlog = |c: f64, u: f64| if u == 0.0 { 0.0 } else { c * u.abs().ln() };
        let a = xlog(1.0 / l1 + 0.5, 2.0 + l1) - xlog(1.0 / l1 - 0.5, 2.0 - l1);
        let b = xlog(m / l2 - 0.5, 2.0 * m - l2) - xlog(m / l2 + 0.5, 2.0 * m + l2);
        (a + b).abs()
    } else {
        (mean_log(1.0, lambda1) - mean_log(m, lambda2)).abs()
    }
}

/// λ″ on the divergence manifold for given m and λ′, searched in [lo, hi].
pub fn critical_disorder(m: f64, lambda1: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |l2: f64| mean_log(1.0, lambda1) - mean_log(m, l2);
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa * fb > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid) * fa > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub signed_mean: f64,
    pub stderr: f64,
}

/// Birkhoff average of ln|t_j| − ln|m_j| along the E = 0 recursion,
/// with t_j = 1 + λ′ω′_j and m_j = m + λ″ω″_j.
pub fn lyapunov_transfer(m: f64, lambda1: f64, lambda2: f64, sites: usize, seed: u64) -> LyapunovEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..sites {
        let w1: f64 = rng.gen::<f64>() - 0.5;
        let w2: f64 = rng.gen::<f64>() - 0.5;
        let v = (1.0 + lambda1 * w1).abs().ln() - (m + lambda2 * w2).abs().ln();
        s += v;
        s2 += v * v;
    }
    let n = sites as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    LyapunovEstimate { value: mean.abs(), signed_mean: mean, stderr: (var / n).sqrt() }
}

/// min_k |E(k)| over a uniform grid; zero-field clean models only.
pub fn bulk_gap(model: &BulkModel, grid: usize) -> Result<f64> {
    let d = model.d;
    let total = grid.pow(d as u32);
    let mut gap = f64::INFINITY;
    for idx in 0..total {
        let mut r = idx;
        let k: Vec<f64> = (0..d)
            .map(|_| {
                let q = r % grid;
                r /= grid;
                2.0 * PI * q as f64 / grid as f64
            })
            .collect();
        let e = linalg::eigvalsh(&bloch_fiber(model, &k)?)?;
        for v in e {
            gap = gap.min((v - model.mu).abs());
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssh_gap_formula() {
        for m in [0.0, 0.3, 0.5, 2.0, -1.7] {
            let g = bulk_gap(&ssh(m, 0.0, 0.0, 1), 400).unwrap();
            assert!((g - ((m as f64).abs() - 1.0).abs()).abs() < 1e-3, "m={m} gap={g}");
        }
        assert!(bulk_gap(&ssh(1.0, 0.0, 0.0, 1), 400).unwrap() < 1e-12);
    }

    #[test]
    fn ssh_fiber_copies() {
        let m = ssh(0.5, 0.0, 0.0, 2);
        m.validate().unwrap();
        let e = linalg::eigvalsh(&bloch_fiber(&m, &[0.3]).unwrap()).unwrap();
        assert!((e[0] - e[1]).abs() < 1e-14 && (e[2] - e[3]).abs() < 1e-14);
    }

    #[test]
    fn dirac_even_bands() {
        for d in [2usize, 4] {
            let m = -1.3;
            let model = dirac_even(d, m).unwrap();
            model.validate().unwrap();
            let k: Vec<f64> = (0..d).map(|j| 0.4 + 0.9 * j as f64).collect();
            let e = linalg::eigvalsh(&bloch_fiber(&model, &k).unwrap()).unwrap();
            let s: f64 = k.iter().map(|x| x.sin().powi(2)).sum();
            let c: f64 = m + k.iter().map(|x| x.cos()).sum::<f64>();
            let want = (s + c * c).sqrt();
            let h = e.len() / 2;
            for (i, v) in e.iter().enumerate() {
                let w = if i < h { -want } else { want };
                assert!((v - w).abs() < 1e-12);
            }
        }
        let model = dirac_even(2, -2.0).unwrap();
        let e = linalg::eigvalsh(&bloch_fiber(&model, &[0.0, 0.0]).unwrap()).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn chiral_odd_is_chiral() {
        for d in [1usize, 3] {
            let model = chiral_odd(d, 0.3).unwrap();
            model.validate().unwrap();
            let h = bloch_fiber(&model, &vec![0.7; d]).unwrap();
            let g0 = build_rep(d + 1).chirality;
            let r = &g0 * &h * &g0 + &h;
            assert!(linalg::max_abs(&r) == 0.0);
        }
    }

    #[test]
    fn critical_masses_close_the_gap() {
        for mc in critical_masses(2) {
            assert!(bulk_gap(&dirac_even(2, mc).unwrap(), 8).unwrap() < 1e-12);
        }
        for mc in critical_masses(3) {
            assert!(bulk_gap(&chiral_odd(3, mc).unwrap(), 8).unwrap() < 1e-12);
        }
        assert!(bulk_gap(&dirac_even(2, -1.0).unwrap(), 16).unwrap() > 0.9);
    }

    #[test]
    fn explicit_values() {
        assert_eq!(analytic_chern(2, -1.0).unwrap().chern, 1);
        assert_eq!(analytic_chern(2, 1.0).unwrap().chern, -1);
        assert_eq!(analytic_chern(2, 3.0).unwrap().chern, 0);
        assert_eq!(analytic_chern(3, 0.0).unwrap().chern, 2);
        assert_eq!(analytic_chern(1, 0.5).unwrap().chern, 1);
        assert!(analytic_chern(2, 0.0).is_err());
    }

    #[test]
    fn weyl_examples() {
        let (p, s) = weyl_points(2, -1.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].k.clone(), s), (vec![0.0], 1));
        let (p, s) = weyl_points(2, 1.0).unwrap();
        assert_eq!((p[0].k.clone(), s), (vec![PI], -1));
        let (p, s) = weyl_points(4, -3.0).unwrap();
        assert_eq!((p.len(), s), (1, 1));
    }

    #[test]
    fn weyl_chirality_sum_matches_phase_diagram() {
        for d in [2usize, 4] {
            for n in 0..d {
                let m = -(d as f64) + 2.0 * n as f64 + 1.0;
                let (_, s) = weyl_points(d, m).unwrap();
                assert_eq!(chi(d) * s, analytic_chern(d, m).unwrap().chern);
            }
        }
    }

    #[test]
    fn edge_band_window() {
        assert_eq!(edge_band(-1.0, 0.0), Some((0.0, 0.0)));
        assert_eq!(edge_band(-1.0, PI / 2.0), None);
        assert!((0..50).all(|i| edge_band(3.0, i as f64 * 0.13).is_none()));
    }

    fn integral_oracle(m: f64, l1: f64, l2: f64) -> f64 {
        // midpoint rule on the double integral
        let n = 400_000;
        let h = 1.0 / n as f64;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..n {
            let w = -0.5 + (i as f64 + 0.5) * h;
            a += (1.0 + l1 * w).abs().ln() * h;
            b += (m + l2 * w).abs().ln() * h;
        }
        (a - b).abs()
    }

    #[test]
    fn closed_form_matches_integral() {
        for (m, l1, l2) in [(0.5, 1.0, 1.0), (0.8, 1.5, 0.5), (1.5, 3.0, 2.5), (0.5, 0.3, 0.2)] {
            let a = localization_length_analytic(m, l1, l2);
            assert!((a - integral_oracle(m, l1, l2)).abs() < 1e-4, "{m} {l1} {l2}");
        }
        assert!((localization_length_analytic(0.5, 1e-6, 1e-6) - 2f64.ln()).abs() < 1e-6);
        assert!((localization_length_analytic(0.5, 0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn divergence_manifold() {
        let l2 = critical_disorder(0.5, 1.0, 2.0, 100.0).unwrap();
        assert!(localization_length_analytic(0.5, 1.0, l2) < 1e-9);
    }

    #[test]
    fn clean_lyapunov_is_exact() {
        let e = lyapunov_transfer(0.5, 0.0, 0.0, 100, 1);
        assert!((e.value - 2f64.ln()).abs() < 1e-14);
        assert_eq!(e.stderr, 0.0);
    }
}
