//! Functional calculus on finite-volume Hamiltonians.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, Eigh, C64, ONE, ZERO};
use crate::model::LatticeOperator;
use faer::Mat;
use std::f64::consts::PI;

pub type SpectralData = Eigh;

pub fn diagonalize(h: &LatticeOperator) -> Result<SpectralData> {
    diagonalize_matrix(&h.matrix)
}

pub fn diagonalize_matrix(h: &CMat) -> Result<SpectralData> {
    let scale = linalg::max_abs(h).max(1.0);
    if linalg::hermiticity_residual(h) > 1e-10 * scale {
        return Err(Error::Invalid("operator is not Hermitian".into()));
    }
    linalg::eigh(h)
}

/// Default gap tolerance: 1e-8 of the spectral width.
pub fn default_gap_tol(spec: &SpectralData) -> f64 {
    match (spec.values.first(), spec.values.last()) {
        (Some(a), Some(b)) => 1e-8 * (b - a).max(1.0),
        _ => 1e-8,
    }
}

#[derive(Clone, Debug)]
pub struct FermiData {
    pub projection: CMat,
    /// sgn(H - μ) = 1 - 2P.
    pub flatband: CMat,
    pub fermi_unitary: Option<CMat>,
    pub gap: (f64, f64),
    pub filled: usize,
}

/// Indices with J = +1 and J = -1.
pub fn chiral_blocks(j: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let plus = (0..j.len()).filter(|&i| j[i] > 0.0).collect();
    let minus = (0..j.len()).filter(|&i| j[i] < 0.0).collect();
    (plus, minus)
}

pub fn fermi_data(spec: &SpectralData, mu: f64, chiral: Option<&[f64]>, gap_tol: Option<f64>) -> Result<FermiData> {
    let tol = gap_tol.unwrap_or_else(|| default_gap_tol(spec));
    if let Some(e) = spec.values.iter().find(|e| (*e - mu).abs() < tol) {
        return Err(Error::NoGap(format!("eigenvalue {e} within {tol:e} of mu = {mu}")));
    }
    let filled = spec.values.iter().filter(|&&e| e < mu).count();
    let below = spec.values[..filled].last().copied().unwrap_or(f64::NEG_INFINITY);
    let above = spec.values.get(filled).copied().unwrap_or(f64::INFINITY);
    let projection = spec.apply(|e| if e < mu { ONE } else { ZERO });
    let n = projection.nrows();
    let flatband = Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO } - projection[(i, j)] * 2.0);
    let fermi_unitary = match chiral {
        None => None,
        Some(jd) => {
            if mu != 0.0 {
                return Err(Error::NotChiral("chiral Fermi data needs mu = 0".into()));
            }
            let k = spec.values.len();
            let pair = (0..k).map(|i| (spec.values[i] + spec.values[k - 1 - i]).abs()).fold(0.0, f64::max);
            if pair > 1e-8 * (1.0 + below.abs().max(above.abs())) {
                return Err(Error::NotChiral(format!("spectrum not symmetric, pairing error {pair:e}")));
            }
            let (plus, minus) = chiral_blocks(jd);
            let diag_res = linalg::max_abs(&linalg::submatrix(&flatband, &plus, &plus))
                .max(linalg::max_abs(&linalg::submatrix(&flatband, &minus, &minus)));
            if diag_res > 1e-8 {
                return Err(Error::NotChiral(format!("flat band has diagonal blocks of size {diag_res:e}")));
            }
            Some(linalg::submatrix(&flatband, &minus, &plus))
        }
    };
    Ok(FermiData { projection, flatband, fermi_unitary, gap: (below, above), filled })
}

/// Polar part A|A|^{-1} of the lower-left block of an approximately chiral H.
pub fn fermi_unitary_ach(h: &CMat, j: &[f64]) -> Result<CMat> {
    let (plus, minus) = chiral_blocks(j);
    let a = linalg::submatrix(h, &minus, &plus);
    let (u, smin) = linalg::polar_unitary(&a)?;
    if smin <= 1e-8 {
        return Err(Error::AchViolated(format!("off-diagonal block has singular value {smin:e}")));
    }
    Ok(u)
}

/// ½[[1, −U*], [−U, 1]] in the J-blocks given by `j`: the Fermi projection of a flat chiral H.
pub fn chiral_projection(u: &CMat, j: &[f64]) -> CMat {
    let (plus, minus) = chiral_blocks(j);
    let n = j.len();
    let mut p = linalg::zeros(n, n);
    for i in 0..n {
        p[(i, i)] = c(0.5, 0.0);
    }
    for (a, &ma) in minus.iter().enumerate() {
        for (b, &pb) in plus.iter().enumerate() {
            p[(ma, pb)] = -u[(a, b)] * 0.5;
            p[(pb, ma)] = -u[(a, b)].conj() * 0.5;
        }
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Exp,
    Ind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepProfile {
    /// 6t⁵ − 15t⁴ + 10t³
    Quintic,
    /// −20t⁷ + 70t⁶ − 84t⁵ + 35t⁴
    Septic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothStep {
    pub kind: StepKind,
    pub lo: f64,
    pub hi: f64,
    pub profile: StepProfile,
}

impl SmoothStep {
    pub fn new(kind: StepKind, lo: f64, hi: f64) -> Self {
        Self { kind, lo, hi, profile: StepProfile::Quintic }
    }

    /// Support shrunk to the central `frac` of a gap.
    pub fn in_gap(kind: StepKind, gap: (f64, f64), frac: f64) -> Self {
        let mid = 0.5 * (gap.0 + gap.1);
        let half = 0.5 * frac * (gap.1 - gap.0);
        Self::new(kind, mid - half, mid + half)
    }

    pub fn with_profile(mut self, p: StepProfile) -> Self {
        self.profile = p;
        self
    }

    fn unit(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self.profile {
            StepProfile::Quintic => t * t * t * (t * (6.0 * t - 15.0) + 10.0),
            StepProfile::Septic => t.powi(4) * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t))),
        }
    }

    fn unit_prime(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        match self.profile {
            StepProfile::Quintic => 30.0 * t * t * (t - 1.0) * (t - 1.0),
            StepProfile::Septic => 140.0 * t.powi(3) * (1.0 - t).powi(3),
        }
    }

    pub fn eval(&self, e: f64) -> f64 {
        let s = self.unit((e - self.lo) / (self.hi - self.lo));
        match self.kind {
            StepKind::Exp => s,
            StepKind::Ind => 2.0 * s - 1.0,
        }
    }

    pub fn derivative(&self, e: f64) -> f64 {
        let w = self.hi - self.lo;
        let s = self.unit_prime((e - self.lo) / w) / w;
        match self.kind {
            StepKind::Exp => s,
            StepKind::Ind => 2.0 * s,
        }
    }

    /// e^{2πi f} − 1, exactly zero outside the support.
    pub fn exp_phase_minus_one(&self, e: f64) -> C64 {
        let f = self.eval(e);
        if f == 0.0 || f == 1.0 {
            ZERO
        } else {
            C64::from_polar(1.0, 2.0 * PI * f) - ONE
        }
    }

    pub fn exp_phase_minus_one_prime(&self, e: f64) -> C64 {
        let f = self.eval(e);
        c(0.0, 2.0 * PI * self.derivative(e)) * C64::from_polar(1.0, 2.0 * PI * f)
    }

    /// e^{iπ f} + 1, exactly zero outside the support.
    pub fn ind_phase_plus_one(&self, e: f64) -> C64 {
        let f = self.eval(e);
        if f.abs() == 1.0 {
            ZERO
        } else {
            C64::from_polar(1.0, PI * f) + ONE
        }
    }

    pub fn ind_phase_plus_one_prime(&self, e: f64) -> C64 {
        let f = self.eval(e);
        c(0.0, PI * self.derivative(e)) * C64::from_polar(1.0, PI * f)
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryOperators {
    pub u_delta: CMat,
    pub p_delta: Option<CMat>,
}

/// ũ = exp(2πi f_Exp(ĥ)); in the chiral case also p̃ = ½Ĵ(e^{iπ f_Ind(ĥ)} + 1) + diag(0, 1).
pub fn boundary_operators(spec: &SpectralData, f_exp: &SmoothStep, f_ind: Option<(&SmoothStep, &[f64])>) -> Result<BoundaryOperators> {
    let n = spec.vectors.nrows();
    let mut u = spec.apply(|e| f_exp.exp_phase_minus_one(e));
    for i in 0..n {
        u[(i, i)] += ONE;
    }
    let p_delta = match f_ind {
        None => None,
        Some((f, j)) => {
            if j.len() != n {
                return Err(Error::Invalid("chirality diagonal has wrong length".into()));
            }
            let e = spec.apply(|x| f.ind_phase_plus_one(x));
            let mut p = Mat::from_fn(n, n, |a, b| e[(a, b)] * (0.5 * j[a]));
            for (i, &ji) in j.iter().enumerate() {
                if ji < 0.0 {
                    p[(i, i)] += ONE;
                }
            }
            Some(p)
        }
    };
    Ok(BoundaryOperators { u_delta: u, p_delta })
}

/// p̃(δ) = χ(|ĥ| ≤ δ) split along the ±1 eigenspaces of Ĵ.
pub fn chiral_splitting(spec: &SpectralData, j: &[f64], delta: f64, gap_tol: Option<f64>) -> Result<(CMat, CMat)> {
    let tol = gap_tol.unwrap_or_else(|| default_gap_tol(spec));
    if let Some(e) = spec.values.iter().find(|e| (e.abs() - delta).abs() < tol) {
        return Err(Error::DeltaInSpectrum(format!("eigenvalue {e} at ±{delta}")));
    }
    let p = spec.apply(|e| if e.abs() <= delta { ONE } else { ZERO });
    let n = p.nrows();
    let plus = Mat::from_fn(n, n, |a, b| if j[a] > 0.0 { p[(a, b)] } else { ZERO });
    let minus = Mat::from_fn(n, n, |a, b| if j[a] < 0.0 { p[(a, b)] } else { ZERO });
    Ok((plus, minus))
}
