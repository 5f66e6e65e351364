//! Adiabatic loops: polarization change, adiabatic evolution and boundary spectral flow.

use crate::catalog::ssh;
use crate::error::{Error, Result};
use crate::invariants::{bloch_projection, occupied_frame, odd_chern_bloch, plaquette_sum, InvariantResult};
use crate::lattice::FiniteVolume;
use crate::linalg::{self, c, CMat, ONE, ZERO};
use crate::model::{assemble_bulk, bloch_fiber, BulkModel, DisorderConfig};
use std::f64::consts::PI;

/// Periodic scalar profile on [0, 2π).
#[derive(Clone, Debug, PartialEq)]
pub enum Waveform {
    Sine { amplitude: f64, offset: f64 },
    Cosine { amplitude: f64, offset: f64 },
    /// Knots (t, value) sorted in t within [0, 2π); linear interpolation, wrapping.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl Waveform {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Waveform::Sine { amplitude, offset } => offset + amplitude * t.sin(),
            Waveform::Cosine { amplitude, offset } => offset + amplitude * t.cos(),
            Waveform::PiecewiseLinear { knots } => {
                let Some(&last) = knots.last() else { return 0.0 };
                let t = t.rem_euclid(2.0 * PI);
                let first = knots[0];
                // segment containing t, including the wrap from the last knot to the first
                let (a, b, tt) = match knots.windows(2).find(|w| t >= w[0].0 && t <= w[1].0) {
                    Some(w) => (w[0], w[1], t),
                    None => {
                        let tt = if t < first.0 { t + 2.0 * PI } else { t };
                        (last, (first.0 + 2.0 * PI, first.1), tt)
                    }
                };
                if b.0 > a.0 {
                    a.1 + (b.1 - a.1) * (tt - a.0) / (b.0 - a.0)
                } else {
                    a.1
                }
            }
        }
    }
}

/// Time-dependent hopping amplitude wave(t)·w added at displacement y.
#[derive(Clone, Debug)]
pub struct LoopTerm {
    pub y: Vec<i64>,
    pub w: CMat,
    pub wave: Waveform,
}

/// h(t) = base + Σ terms, t ∈ [0, 2π), Fermi level μ.
#[derive(Clone, Debug)]
pub struct AdiabaticLoop {
    pub base: BulkModel,
    pub terms: Vec<LoopTerm>,
    pub mu: f64,
    /// Number of traversals per period.
    pub windings: u32,
}

impl AdiabaticLoop {
    pub fn new(base: BulkModel, terms: Vec<LoopTerm>) -> Self {
        let mu = base.mu;
        Self { base, terms, mu, windings: 1 }
    }

    pub fn repeated(mut self, times: u32) -> Self {
        self.windings *= times;
        self
    }

    pub fn model_at(&self, t: f64) -> BulkModel {
        let s = t * self.windings as f64;
        let mut m = self.base.clone();
        for term in &self.terms {
            let w = linalg::scale(&term.w, c(term.wave.eval(s), 0.0));
            if let Some(h) = m.hoppings.iter_mut().find(|h| h.y == term.y) {
                h.w = &h.w + &w;
            } else {
                m = m.with_hop(term.y.clone(), w, 0.0);
            }
        }
        m
    }
}

fn sigma(which: u8) -> CMat {
    match which {
        1 => linalg::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]),
        2 => linalg::from_rows(&[vec![ZERO, c(0.0, -1.0)], vec![c(0.0, 1.0), ZERO]]),
        _ => linalg::from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]]),
    }
}

/// SSH chain with mass 1 + r cos t and staggered potential r sin t σ₃, circling the m = 1 closing.
pub fn rice_mele_loop(r: f64) -> AdiabaticLoop {
    let mut base = ssh(0.0, 0.0, 0.0, 1);
    base.chiral = false;
    AdiabaticLoop::new(
        base,
        vec![
            LoopTerm { y: vec![0], w: sigma(2), wave: Waveform::Cosine { amplitude: r, offset: 1.0 } },
            LoopTerm { y: vec![0], w: sigma(3), wave: Waveform::Sine { amplitude: r, offset: 0.0 } },
        ],
    )
}

/// SSH chain with mass m₀ + r cos t only; chiral at every t.
pub fn chiral_mass_loop(m0: f64, r: f64) -> AdiabaticLoop {
    AdiabaticLoop::new(ssh(0.0, 0.0, 0.0, 1), vec![LoopTerm { y: vec![0], w: sigma(2), wave: Waveform::Cosine { amplitude: r, offset: m0 } }])
}

fn t_point(i: usize, steps: usize) -> f64 {
    2.0 * PI * i as f64 / steps as f64
}

fn gap_error(e: Error, t: f64) -> Error {
    match e {
        Error::NoGap(s) => Error::GapClosedOnLoop(format!("t = {t}: {s}")),
        other => other,
    }
}

/// ΔP_j as the plaquette Chern number of P(t, k) over the (t, k_j) torus,
/// averaged over the remaining momenta.
pub fn delta_polarization(lp: &AdiabaticLoop, j: usize, t_grid: usize, k_grid: usize) -> Result<InvariantResult> {
    let d = lp.base.d;
    if j >= d {
        return Err(Error::Invalid(format!("direction {j} out of range")));
    }
    let others = k_grid.pow(d as u32 - 1);
    let models: Vec<BulkModel> = (0..t_grid).map(|i| lp.model_at(t_point(i, t_grid))).collect();
    let mut total = 0.0;
    for o in 0..others {
        let mut rest = o;
        let kperp: Vec<f64> = (0..d - 1)
            .map(|_| {
                let q = rest % k_grid;
                rest /= k_grid;
                t_point(q, k_grid)
            })
            .collect();
        total += plaquette_sum(t_grid, k_grid, &|it, ik| {
            let mut k = kperp.clone();
            k.insert(j, t_point(ik, k_grid));
            let t = t_point(it, t_grid);
            let (frame, vals) = occupied_frame(&bloch_fiber(&models[it], &k)?, lp.mu)?;
            if vals.iter().any(|e| (e - lp.mu).abs() < 1e-8) {
                return Err(Error::GapClosedOnLoop(format!("t = {t}, k = {k:?}")));
            }
            Ok(frame)
        })?;
    }
    let v = total / others as f64;
    Ok(InvariantResult::new("DeltaP", c(v, 0.0), format!("grid=({t_grid} t) x ({k_grid} k)")))
}

/// Solution path of i∂_t v = i[ṗ, p] v, v₀ = 1, by midpoint exponential steps.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub v_final: CMat,
    pub p0: CMat,
    pub max_intertwining: f64,
    pub max_unitarity: f64,
}

/// Adiabatic evolution of a family of projections p(t).
pub fn evolve_projections(p_at: &dyn Fn(f64) -> Result<CMat>, steps: usize) -> Result<Evolution> {
    let dt = 2.0 * PI / steps as f64;
    let p0 = p_at(0.0)?;
    let n = p0.nrows();
    let mut v = linalg::identity(n);
    let mut inter = 0.0f64;
    let mut unit = 0.0f64;
    let mut p_prev = p0.clone();
    for s in 0..steps {
        let t = s as f64 * dt;
        let p_next = p_at(t + dt)?;
        let pm = p_at(t + 0.5 * dt)?;
        let pdot = linalg::scale(&(&p_next - &p_prev), c(1.0 / dt, 0.0));
        let k = linalg::scale(&(&pdot * &pm - &pm * &pdot), c(0.0, 1.0));
        v = linalg::expm_hermitian(&k, dt)? * &v;
        let moved = &v * &p0 * linalg::adjoint(&v);
        inter = inter.max(linalg::max_abs(&(&p_next - &moved)));
        unit = unit.max(linalg::unitarity_residual(&v));
        p_prev = p_next;
    }
    Ok(Evolution { v_final: v, p0, max_intertwining: inter, max_unitarity: unit })
}

/// Adiabatic evolution of the Fermi projection of the loop on a finite volume.
pub fn adiabatic_evolution(lp: &AdiabaticLoop, vol: &FiniteVolume, steps: usize) -> Result<Evolution> {
    let p_at = |t: f64| -> Result<CMat> {
        let h = assemble_bulk(&lp.model_at(t), vol, &DisorderConfig::clean())?;
        let spec = crate::spectral::diagonalize(&h)?;
        let f = crate::spectral::fermi_data(&spec, lp.mu, None, None).map_err(|e| gap_error(e, t))?;
        Ok(f.projection)
    };
    evolve_projections(&p_at, steps)
}

/// Ch₁ along direction j of p₀ v₂π p₀ + 1 − p₀, with v evolved fiberwise in k.
pub fn stroboscopic_winding(lp: &AdiabaticLoop, steps: usize, k_grid: usize) -> Result<InvariantResult> {
    if lp.base.d != 1 {
        return Err(Error::Invalid("stroboscopic winding implemented for d = 1".into()));
    }
    let w_at = |k: &[f64]| -> Result<CMat> {
        let ev = evolve_projections(&|t| bloch_projection(&lp.model_at(t), k).map_err(|e| gap_error(e, t)), steps)?;
        let p = &ev.p0;
        let mut w = p * &ev.v_final * p;
        for i in 0..w.nrows() {
            w[(i, i)] += ONE;
        }
        Ok(w - p)
    };
    let z = odd_chern_bloch(1, k_grid, &w_at)?;
    Ok(InvariantResult::new("Ch1(pvp+1-p)", z, format!("steps={steps} k_grid={k_grid}")))
}

/// Offset of the counting level above μ used by [`spectral_flow`].
pub const SF_LEVEL_SHIFT: f64 = 1e-3;

/// Signed count of eigenvalue crossings of μ by states localized in the first quarter
/// of an open chain, over one period of the loop. Eigenvalues are counted
/// through μ + [`SF_LEVEL_SHIFT`] on the cell midpoints of the t grid.
pub fn spectral_flow(lp: &AdiabaticLoop, sites: usize, steps: usize) -> Result<i64> {
    if lp.base.d != 1 {
        return Err(Error::Invalid("spectral flow implemented for d = 1".into()));
    }
    let vol = FiniteVolume::open(&[sites]);
    let n = lp.base.n;
    let level = lp.mu + SF_LEVEL_SHIFT;
    let count = |t: f64| -> Result<(usize, f64)> {
        let h = assemble_bulk(&lp.model_at(t), &vol, &DisorderConfig::clean())?;
        let vals = linalg::eigvalsh(&h.matrix)?;
        let closest = vals.iter().map(|e| (e - level).abs()).fold(f64::INFINITY, f64::min);
        Ok((vals.iter().filter(|&&e| e < level).count(), closest))
    };
    let near_edge = |t: f64| -> Result<bool> {
        let h = assemble_bulk(&lp.model_at(t), &vol, &DisorderConfig::clean())?;
        let spec = linalg::eigh(&h.matrix)?;
        let (idx, _) = spec
            .values
            .iter()
            .enumerate()
            .map(|(i, e)| (i, (e - level).abs()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let w: f64 = (0..sites / 4 * n).map(|r| spec.vectors[(r, idx)].norm_sqr()).sum();
        Ok(w > 0.5)
    };
    let node = |s: usize| 2.0 * PI * (s as f64 + 0.5) / steps as f64;
    let dt = 2.0 * PI / steps as f64;
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut lip = 0.0f64;
    let mut h_prev: Option<CMat> = None;
    for s in 0..=steps {
        let c = count(node(s))?;
        if c.1 < 1e-10 {
            return Err(Error::CrossingOnGridNode(format!("t = {}", node(s))));
        }
        nodes.push(c);
        let h = assemble_bulk(&lp.model_at(node(s)), &vol, &DisorderConfig::clean())?.matrix;
        if let Some(hp) = &h_prev {
            let dv = linalg::eigvalsh(&(&h - hp))?;
            lip = lip.max(dv.iter().fold(0.0f64, |m, e| m.max(e.abs())) / dt);
        }
        h_prev = Some(h);
    }
    // eigenvalues move at most lip·|Δt| (Weyl), with a safety factor
    let lip = 2.0 * lip;
    let mut flow = 0i64;
    for s in 0..steps {
        let mut stack = vec![(node(s), nodes[s], node(s + 1), nodes[s + 1])];
        while let Some((a, ca, b, cb)) = stack.pop() {
            let reach = 0.5 * lip * (b - a);
            if ca.0 == cb.0 && ca.1 > reach && cb.1 > reach {
                continue;
            }
            if b - a < 1e-10 {
                if ca.0 != cb.0 && near_edge(0.5 * (a + b))? {
                    // eigenvalue moving up through μ lowers the count below μ
                    flow += ca.0 as i64 - cb.0 as i64;
                }
                continue;
            }
            let m = 0.5 * (a + b);
            let cm = count(m)?;
            stack.push((a, ca, m, cm));
            stack.push((m, cm, b, cb));
        }
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveforms() {
        let w = Waveform::PiecewiseLinear { knots: vec![(0.0, 0.0), (PI, 1.0)] };
        assert!((w.eval(PI / 2.0) - 0.5).abs() < 1e-12);
        assert!((w.eval(1.5 * PI) - 0.5).abs() < 1e-12);
        assert!((w.eval(2.0 * PI) - w.eval(0.0)).abs() < 1e-12);
        assert_eq!(Waveform::Cosine { amplitude: 2.0, offset: 1.0 }.eval(0.0), 3.0);
    }

    #[test]
    fn loop_is_closed() {
        let lp = rice_mele_loop(0.5);
        let a = bloch_fiber(&lp.model_at(0.0), &[0.3]).unwrap();
        let b = bloch_fiber(&lp.model_at(2.0 * PI), &[0.3]).unwrap();
        assert!(linalg::max_abs(&(a - b)) < 1e-12);
    }

    #[test]
    fn constant_loop_is_trivial() {
        let lp = AdiabaticLoop::new(ssh(0.5, 0.0, 0.0, 1), vec![]);
        assert!(delta_polarization(&lp, 0, 8, 8).unwrap().value.abs() < 1e-12);
        assert_eq!(spectral_flow(&lp, 16, 8).unwrap(), 0);
    }

    #[test]
    fn rice_mele_routes() {
        let lp = rice_mele_loop(0.5);
        let dp = delta_polarization(&lp, 0, 32, 32).unwrap();
        assert!(dp.rounded.unwrap().abs() == 1 && dp.residual < 1e-6, "{dp:?}");
        let sw = stroboscopic_winding(&lp, 256, 32).unwrap();
        assert!((sw.value - dp.value).abs() < 1e-3, "{sw:?} vs {dp:?}");
    }

    #[test]
    fn chiral_loop_has_no_pump() {
        let dp = delta_polarization(&chiral_mass_loop(0.5, 0.3), 0, 16, 16).unwrap();
        assert!(dp.value.abs() < 1e-8);
    }

    #[test]
    fn constant_evolution() {
        let p = linalg::from_rows(&[vec![ONE, ZERO], vec![ZERO, ZERO]]);
        let ev = evolve_projections(&|_| Ok(p.clone()), 16).unwrap();
        assert!(linalg::max_abs(&(ev.v_final - linalg::identity(2))) < 1e-14);
    }

    #[test]
    fn rice_mele_edge_flow() {
        let lp = rice_mele_loop(0.5);
        let dp = delta_polarization(&lp, 0, 32, 32).unwrap().rounded.unwrap();
        let sf = spectral_flow(&lp, 32, 64).unwrap();
        assert_eq!(sf.abs(), dp.abs());
        assert_eq!(spectral_flow(&chiral_mass_loop(0.5, 0.3), 32, 64).unwrap(), 0);
    }
}
