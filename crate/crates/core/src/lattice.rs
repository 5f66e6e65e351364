//! Finite volumes of Z^d and position operators on them.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, I};
use faer::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bc {
    Periodic,
    Open,
    /// Dirichlet cut at n = 0; last axis only.
    HalfSpace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteVolume {
    pub sizes: Vec<usize>,
    pub bc: Vec<Bc>,
}

impl FiniteVolume {
    pub fn new(sizes: Vec<usize>, bc: Vec<Bc>) -> Result<Self> {
        if sizes.is_empty() || sizes.len() != bc.len() {
            return Err(Error::Invalid("sizes and bc must have equal nonzero length".into()));
        }
        if sizes.iter().any(|&l| l == 0) {
            return Err(Error::Invalid("zero-length axis".into()));
        }
        let d = sizes.len();
        if bc[..d - 1].contains(&Bc::HalfSpace) {
            return Err(Error::Invalid("halfspace only allowed on the last axis".into()));
        }
        Ok(Self { sizes, bc })
    }

    pub fn periodic(sizes: &[usize]) -> Self {
        Self { sizes: sizes.to_vec(), bc: vec![Bc::Periodic; sizes.len()] }
    }

    pub fn open(sizes: &[usize]) -> Self {
        Self { sizes: sizes.to_vec(), bc: vec![Bc::Open; sizes.len()] }
    }

    /// Periodic parallel axes, half-space on the last one.
    pub fn slab(sizes: &[usize]) -> Self {
        let mut bc = vec![Bc::Periodic; sizes.len()];
        *bc.last_mut().unwrap() = Bc::HalfSpace;
        Self { sizes: sizes.to_vec(), bc }
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sites(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_halfspace(&self) -> bool {
        self.bc.last() == Some(&Bc::HalfSpace)
    }

    /// Row-major site index (first axis slowest).
    pub fn index(&self, x: &[i64]) -> usize {
        let mut k = 0usize;
        for (i, &xi) in x.iter().enumerate() {
            k = k * self.sizes[i] + xi as usize;
        }
        k
    }

    pub fn coords(&self, mut k: usize) -> Vec<i64> {
        let d = self.dim();
        let mut x = vec![0i64; d];
        for i in (0..d).rev() {
            x[i] = (k % self.sizes[i]) as i64;
            k /= self.sizes[i];
        }
        x
    }

    /// Reduce a coordinate into the box; `None` if it leaves through a non-periodic face.
    /// Also returns the wrap vector `a` with `x = reduced + a`.
    pub fn wrap(&self, x: &[i64]) -> Option<(Vec<i64>, Vec<i64>)> {
        let mut r = x.to_vec();
        let mut a = vec![0i64; x.len()];
        for i in 0..x.len() {
            let l = self.sizes[i] as i64;
            if x[i] < 0 || x[i] >= l {
                if self.bc[i] != Bc::Periodic {
                    return None;
                }
                r[i] = x[i].rem_euclid(l);
                a[i] = x[i] - r[i];
            }
        }
        Some((r, a))
    }

    /// Position along `axis`, measured from the geometric center floor(L/2).
    /// The half-space axis keeps the depth n = x_d instead.
    pub fn position(&self, site: usize, axis: usize) -> f64 {
        let x = self.coords(site)[axis];
        if self.bc[axis] == Bc::HalfSpace {
            x as f64
        } else {
            (x - (self.sizes[axis] / 2) as i64) as f64
        }
    }

    /// Displacement x_a - x_b along `axis`, minimal image on periodic axes.
    pub fn displacement(&self, a: usize, b: usize, axis: usize) -> f64 {
        let xa = self.coords(a)[axis];
        let xb = self.coords(b)[axis];
        let mut dx = xa - xb;
        if self.bc[axis] == Bc::Periodic {
            let l = self.sizes[axis] as i64;
            dx = dx.rem_euclid(l);
            if 2 * dx > l {
                dx -= l;
            }
            if 2 * dx == l {
                // ambiguous antipode: contributes nothing
                return 0.0;
            }
        }
        dx as f64
    }

    /// Centered window of `fraction` of each listed axis; full range elsewhere.
    pub fn window_sites(&self, window: &TraceWindow, axes: &[usize]) -> Result<Vec<usize>> {
        let d = self.dim();
        let mut lo = vec![0i64; d];
        let mut hi = vec![0i64; d];
        for i in 0..d {
            let l = self.sizes[i] as i64;
            if axes.contains(&i) && self.bc[i] != Bc::HalfSpace {
                let w = ((window.fraction * l as f64).round() as i64).clamp(1, l);
                if self.bc[i] == Bc::Open && w >= l && l > 1 {
                    return Err(Error::WindowTooLarge(format!("axis {i}: window {w} of {l}")));
                }
                lo[i] = (l - w) / 2;
                hi[i] = lo[i] + w;
            } else {
                lo[i] = 0;
                hi[i] = l;
            }
        }
        Ok((0..self.sites())
            .filter(|&s| {
                let x = self.coords(s);
                (0..d).all(|i| x[i] >= lo[i] && x[i] < hi[i])
            })
            .collect())
    }
}

/// Region over which per-site traces are averaged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceWindow {
    pub fraction: f64,
}

impl Default for TraceWindow {
    fn default() -> Self {
        Self { fraction: 0.5 }
    }
}

impl TraceWindow {
    pub fn full() -> Self {
        Self { fraction: 1.0 }
    }
}

/// `i[A, X_axis]` with fiber `n` per site. Minimal image on periodic axes.
pub fn derivation(a: &CMat, vol: &FiniteVolume, fiber: usize, axis: usize) -> CMat {
    let dim = a.nrows();
    let sites = vol.sites();
    // displacement table between sites only depends on coordinates along `axis`
    let coord: Vec<i64> = (0..sites).map(|s| vol.coords(s)[axis]).collect();
    let l = vol.sizes[axis] as i64;
    let periodic = vol.bc[axis] == Bc::Periodic;
    let dx = |p: i64, q: i64| -> f64 {
        let mut d = p - q;
        if periodic {
            d = d.rem_euclid(l);
            if 2 * d > l {
                d -= l;
            }
            if 2 * d == l {
                return 0.0;
            }
        }
        d as f64
    };
    // (A X - X A)_{pq} = A_pq (x_q - x_p)
    Mat::from_fn(dim, dim, |p, q| {
        let d = dx(coord[q / fiber], coord[p / fiber]);
        if d == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            I * a[(p, q)] * d
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let v = FiniteVolume::open(&[3, 4, 5]);
        for k in 0..v.sites() {
            assert_eq!(v.index(&v.coords(k)), k);
        }
        assert_eq!(v.coords(1), vec![0, 0, 1]);
    }

    #[test]
    fn positions_are_centered() {
        let v = FiniteVolume::open(&[4]);
        let xs: Vec<f64> = (0..4).map(|s| v.position(s, 0)).collect();
        assert_eq!(xs, vec![-2.0, -1.0, 0.0, 1.0]);
        let h = FiniteVolume::slab(&[4, 3]);
        assert_eq!(h.position(h.index(&[0, 2]), 1), 2.0);
    }

    #[test]
    fn wrap_respects_bc() {
        let v = FiniteVolume::new(vec![4, 4], vec![Bc::Periodic, Bc::Open]).unwrap();
        assert_eq!(v.wrap(&[-1, 2]), Some((vec![3, 2], vec![-4, 0])));
        assert_eq!(v.wrap(&[0, 4]), None);
    }

    #[test]
    fn halfspace_must_be_last() {
        assert!(FiniteVolume::new(vec![3, 3], vec![Bc::HalfSpace, Bc::Open]).is_err());
    }

    #[test]
    fn window_is_interior_on_open_axes() {
        let v = FiniteVolume::open(&[8, 8]);
        let w = v.window_sites(&TraceWindow::default(), &[0, 1]).unwrap();
        assert_eq!(w.len(), 16);
        assert!(v.window_sites(&TraceWindow::full(), &[0]).is_err());
    }

    #[test]
    fn derivation_of_shift() {
        // S|x> = |x+1> gives i[S, X] = -i S
        let v = FiniteVolume::open(&[5]);
        let s = Mat::from_fn(5, 5, |p, q| if p == q + 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let d = derivation(&s, &v, 1, 0);
        for p in 0..5 {
            for q in 0..5 {
                let want = if p == q + 1 { C64::new(0.0, -1.0) } else { C64::new(0.0, 0.0) };
                assert!((d[(p, q)] - want).norm() < 1e-15);
            }
        }
    }
}
