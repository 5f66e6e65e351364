//! Irreducible complex Clifford representations and Dirac phases.

use crate::error::{Error, Result};
use crate::lattice::FiniteVolume;
use crate::linalg::{self, c, CMat, C64, I, ONE, ZERO};
use faer::Mat;

#[derive(Clone, Debug)]
pub struct CliffordRep {
    pub n: usize,
    pub dim: usize,
    pub generators: Vec<CMat>,
    /// ν_0; the identity for odd `n`.
    pub chirality: CMat,
}

fn offdiag(a: &CMat, b: &CMat) -> CMat {
    let k = a.nrows();
    Mat::from_fn(2 * k, 2 * k, |i, j| match (i < k, j < k) {
        (true, false) => a[(i, j - k)],
        (false, true) => b[(i - k, j)],
        _ => ZERO,
    })
}

fn grading(k: usize) -> CMat {
    Mat::from_fn(2 * k, 2 * k, |i, j| {
        if i != j {
            ZERO
        } else if i < k {
            ONE
        } else {
            -ONE
        }
    })
}

/// Inductive construction: Cl_1 = {1}; Cl_2 from Pauli matrices;
/// odd steps append ν_0, even steps double the fiber.
pub fn build_rep(n: usize) -> CliffordRep {
    assert!(n >= 1, "generator count must be positive");
    let mut gens: Vec<CMat> = vec![linalg::identity(1)];
    let mut m = 1;
    while m < n {
        if m % 2 == 1 {
            // Cl_m (odd) -> Cl_{m+1}
            let k = gens[0].nrows();
            let one = linalg::identity(k);
            let mut next: Vec<CMat> = gens.iter().map(|s| offdiag(s, s)).collect();
            next.push(offdiag(&linalg::scale(&one, -I), &linalg::scale(&one, I)));
            gens = next;
        } else {
            // Cl_m (even) -> Cl_{m+1}
            gens.push(grading(gens[0].nrows() / 2));
        }
        m += 1;
    }
    let dim = gens[0].nrows();
    let chirality = if n % 2 == 0 { grading(dim / 2) } else { linalg::identity(dim) };
    CliffordRep { n, dim, generators: gens, chirality }
}

impl CliffordRep {
    pub fn product(&self) -> CMat {
        let mut p = linalg::identity(self.dim);
        for g in &self.generators {
            p = &p * g;
        }
        p
    }

    /// max |{ν_i, ν_j} − 2δ_ij|.
    pub fn ccr_residual(&self) -> f64 {
        let mut r = 0.0f64;
        let one = linalg::identity(self.dim);
        for (i, a) in self.generators.iter().enumerate() {
            for (j, b) in self.generators.iter().enumerate() {
                let ac = a * b + b * a;
                let want = if i == j { linalg::scale(&one, c(2.0, 0.0)) } else { linalg::zeros(self.dim, self.dim) };
                r = r.max(linalg::max_abs(&(ac - want)));
            }
        }
        r
    }
}

/// `(−i)^{⌊n/2⌋}`.
pub fn chirality_phase(n: usize) -> C64 {
    let mut z = ONE;
    for _ in 0..n / 2 {
        z *= -I;
    }
    z
}

/// Per-site blocks of F = sgn(Σ ν_i ⊗ (X_i + x0_i)).
#[derive(Clone, Debug)]
pub struct DiracPhase {
    pub rep_dim: usize,
    pub blocks: Vec<CMat>,
    pub even: bool,
}

pub fn dirac_phase(rep: &CliffordRep, vol: &FiniteVolume, x0: &[f64]) -> Result<DiracPhase> {
    let d = vol.dim();
    if rep.n != d || x0.len() != d {
        return Err(Error::Invalid(format!("rep has {} generators, volume dimension {d}", rep.n)));
    }
    if x0.iter().any(|&s| !(s.abs() > 0.0 && s.abs() < 1.0)) {
        return Err(Error::DiracKernel(format!("shift {x0:?} outside (0,1)")));
    }
    let mut blocks = Vec::with_capacity(vol.sites());
    for s in 0..vol.sites() {
        let mut dm = linalg::zeros(rep.dim, rep.dim);
        for (i, g) in rep.generators.iter().enumerate() {
            let xi = vol.position(s, i) + x0[i];
            dm = dm + linalg::scale(g, c(xi, 0.0));
        }
        let e = linalg::eigh(&dm)?;
        if e.values.iter().any(|v| v.abs() < 1e-12) {
            return Err(Error::DiracKernel(format!("site {s}")));
        }
        blocks.push(e.apply(|v| c(v.signum(), 0.0)));
    }
    Ok(DiracPhase { rep_dim: rep.dim, blocks, even: d % 2 == 0 })
}

impl DiracPhase {
    /// Dense F with (site, clifford) ordering.
    pub fn matrix(&self) -> CMat {
        let k = self.rep_dim;
        let n = self.blocks.len() * k;
        Mat::from_fn(n, n, |p, q| if p / k == q / k { self.blocks[p / k][(p % k, q % k)] } else { ZERO })
    }

    /// Even case: lower-left block G of F in the γ_0 grading, per site.
    pub fn g_blocks(&self) -> Vec<CMat> {
        let h = self.rep_dim / 2;
        self.blocks.iter().map(|f| Mat::from_fn(h, h, |i, j| f[(h + i, j)])).collect()
    }

    /// Odd case: Hardy projection (1 + F)/2, per site.
    pub fn hardy_blocks(&self) -> Vec<CMat> {
        let k = self.rep_dim;
        self.blocks
            .iter()
            .map(|f| Mat::from_fn(k, k, |i, j| (f[(i, j)] + if i == j { ONE } else { ZERO }) * 0.5))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cl1_is_scalar_one() {
        let r = build_rep(1);
        assert_eq!(r.dim, 1);
        assert_eq!(r.generators[0][(0, 0)], ONE);
    }

    #[test]
    fn cl2_matches_pauli_choice() {
        let r = build_rep(2);
        let g1 = &r.generators[0];
        let g2 = &r.generators[1];
        assert_eq!((g1[(0, 1)], g1[(1, 0)]), (ONE, ONE));
        assert_eq!((g2[(0, 1)], g2[(1, 0)]), (-I, I));
        assert_eq!((r.chirality[(0, 0)], r.chirality[(1, 1)]), (ONE, -ONE));
    }

    #[test]
    fn cl3_product_is_i() {
        let r = build_rep(3);
        let p = r.product();
        assert!(linalg::max_abs(&(p - linalg::scale(&linalg::identity(2), I))) < 1e-14);
        // the third generator is the Cl_2 grading
        assert_eq!(r.generators[2][(1, 1)], -ONE);
    }

    #[test]
    fn relations_hold_up_to_eight() {
        for n in 1..=8 {
            let r = build_rep(n);
            assert_eq!(r.dim, 1 << (n / 2));
            assert!(r.ccr_residual() < 1e-12, "n={n}");
            for g in &r.generators {
                assert!(linalg::hermiticity_residual(g) < 1e-14);
            }
            let p = linalg::scale(&r.product(), chirality_phase(n));
            if n % 2 == 1 {
                assert!(linalg::max_abs(&(p - linalg::identity(r.dim))) < 1e-12, "n={n}");
            } else {
                assert!(linalg::max_abs(&(p - &r.chirality)) < 1e-12, "n={n}");
                for g in &r.generators {
                    let ac = &r.chirality * g + g * &r.chirality;
                    assert!(linalg::max_abs(&ac) < 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_site_phase() {
        let r = build_rep(1);
        let v = FiniteVolume::open(&[1]);
        let f = dirac_phase(&r, &v, &[0.5]).unwrap();
        assert_eq!(f.blocks[0][(0, 0)], ONE);
    }

    #[test]
    fn phase_is_graded_involution() {
        let r = build_rep(2);
        let v = FiniteVolume::open(&[8, 8]);
        let f = dirac_phase(&r, &v, &[0.5, 0.5]).unwrap();
        for b in &f.blocks {
            assert!(linalg::max_abs(&(b * b - linalg::identity(2))) < 1e-10);
            assert!(linalg::hermiticity_residual(b) < 1e-12);
            let ac = &r.chirality * b + b * &r.chirality;
            assert!(linalg::max_abs(&ac) < 1e-15);
        }
        for g in f.g_blocks() {
            assert!(linalg::unitarity_residual(&g) < 1e-10);
        }
    }

    #[test]
    fn integer_shift_is_rejected() {
        let r = build_rep(2);
        let v = FiniteVolume::open(&[4, 4]);
        assert!(matches!(dirac_phase(&r, &v, &[0.0, 0.5]), Err(Error::DiracKernel(_))));
    }
}
