//! TOML model files.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use topolat::linalg::{c, CMat};
use topolat::pump::{AdiabaticLoop, LoopTerm, Waveform};
use topolat::{
    BoundaryTerm, Bc, BulkModel, Error, FiniteVolume, HalfSpaceModel, HoppingSpec, MagneticField, Result,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hopping: Vec<MatrixEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspace: Option<HalfspaceSection>,
    #[serde(rename = "loop", default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<LoopSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub fiber: usize,
    #[serde(default)]
    pub chiral: bool,
    #[serde(default)]
    pub mu: f64,
}

/// Hop W_y given by rows of real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub y: Vec<i64>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub lambda: f64,
}

/// Upper-triangular entries of B in units of 2π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub entry: Vec<FieldEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEntry {
    pub i: usize,
    pub j: usize,
    pub flux: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    /// At most i64::MAX, the largest TOML integer.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_seed: Option<u64>,
    /// Replaces the coupling λ of each hopping entry, in file order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcName {
    Periodic,
    Open,
    Halfspace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSection {
    pub sizes: Vec<usize>,
    pub bc: Vec<BcName>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSection {
    /// Boundary depth R.
    #[serde(default)]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub term: Vec<BoundaryEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryEntry {
    pub y: Vec<i64>,
    pub n: usize,
    pub m: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    #[serde(default = "one")]
    pub windings: u32,
    pub term: Vec<LoopEntry>,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopEntry {
    pub y: Vec<i64>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
    pub wave: WaveEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WaveEntry {
    Sine { amplitude: f64, #[serde(default)] offset: f64 },
    Cosine { amplitude: f64, #[serde(default)] offset: f64 },
    /// Knots (t, value) with t in [0, 2π).
    Linear { knots: Vec<[f64; 2]> },
}

fn matrix(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>, n: usize, what: &str) -> Result<CMat> {
    let shape_ok = |rows: &[Vec<f64>]| rows.len() == n && rows.iter().all(|r| r.len() == n);
    if !shape_ok(re) || im.is_some_and(|m| !shape_ok(m)) {
        return Err(Error::Invalid(format!("{what}: matrix must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c(re[i][j], im.map_or(0.0, |m| m[i][j]))))
}

impl ModelFile {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Fails for seeds above the TOML integer range (i64::MAX).
    pub fn to_toml(&self) -> std::result::Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn bulk(&self) -> Result<BulkModel> {
        let (d, n) = (self.model.d, self.model.fiber);
        let mut b = BulkModel::new(d, n);
        b.mu = self.model.mu;
        b.chiral = self.model.chiral;
        let overrides = self.disorder.as_ref().and_then(|s| s.lambda.clone());
        if let Some(l) = &overrides {
            if l.len() != self.hopping.len() {
                return Err(Error::Invalid("disorder.lambda needs one value per hopping entry".into()));
            }
        }
        for (i, h) in self.hopping.iter().enumerate() {
            if h.y.len() != d {
                return Err(Error::Invalid(format!("hopping {i}: y must have length {d}")));
            }
            let w = matrix(&h.re, h.im.as_ref(), n, &format!("hopping {i}"))?;
            let lambda = overrides.as_ref().map_or(h.lambda, |l| l[i]);
            b.hoppings.push(HoppingSpec::new(h.y.clone(), w, lambda));
        }
        if let Some(f) = &self.field {
            let entries: Vec<_> = f.entry.iter().map(|e| (e.i, e.j, 2.0 * PI * e.flux)).collect();
            b.field = MagneticField::from_upper(d, &entries)?;
        }
        b.validate()?;
        Ok(b)
    }

    pub fn halfspace(&self) -> Result<HalfSpaceModel> {
        let bulk = self.bulk()?;
        let n = bulk.n;
        let mut hs = HalfSpaceModel::dirichlet(bulk);
        if let Some(s) = &self.halfspace {
            hs.depth = s.depth;
            for (i, t) in s.term.iter().enumerate() {
                let w = matrix(&t.re, t.im.as_ref(), n, &format!("halfspace term {i}"))?;
                hs.boundary_terms.push(BoundaryTerm { y: t.y.clone(), n: t.n, m: t.m, w, lambda: t.lambda });
            }
        }
        hs.validate()?;
        Ok(hs)
    }

    pub fn volume(&self) -> Result<FiniteVolume> {
        let v = self.volume.as_ref().ok_or_else(|| Error::Invalid("model file has no [volume] section".into()))?;
        if v.sizes.len() != self.model.d {
            return Err(Error::Invalid(format!("volume.sizes must have length {}", self.model.d)));
        }
        let bc = v
            .bc
            .iter()
            .map(|b| match b {
                BcName::Periodic => Bc::Periodic,
                BcName::Open => Bc::Open,
                BcName::Halfspace => Bc::HalfSpace,
            })
            .collect();
        FiniteVolume::new(v.sizes.clone(), bc)
    }

    pub fn seed(&self) -> Option<u64> {
        self.disorder.as_ref().map(|s| s.seed)
    }

    pub fn boundary_seed(&self) -> Option<u64> {
        self.disorder.as_ref().and_then(|s| s.boundary_seed)
    }

    pub fn adiabatic_loop(&self) -> Result<AdiabaticLoop> {
        let s = self.pump.as_ref().ok_or_else(|| Error::Invalid("model file has no [loop] section".into()))?;
        let base = self.bulk()?;
        let n = base.n;
        let mut terms = Vec::new();
        for (i, t) in s.term.iter().enumerate() {
            let w = matrix(&t.re, t.im.as_ref(), n, &format!("loop term {i}"))?;
            let wave = match &t.wave {
                WaveEntry::Sine { amplitude, offset } => Waveform::Sine { amplitude: *amplitude, offset: *offset },
                WaveEntry::Cosine { amplitude, offset } => Waveform::Cosine { amplitude: *amplitude, offset: *offset },
                WaveEntry::Linear { knots } => Waveform::PiecewiseLinear { knots: knots.iter().map(|k| (k[0], k[1])).collect() },
            };
            terms.push(LoopTerm { y: t.y.clone(), w, wave });
        }
        let lp = AdiabaticLoop::new(base, terms);
        Ok(lp.repeated(s.windings))
    }

    /// Copy with the on-site (y = 0) hopping entry scaled by `m`.
    pub fn with_mass(&self, m: f64) -> Result<ModelFile> {
        let mut f = self.clone();
        let zero = vec![0i64; self.model.d];
        let h = f
            .hopping
            .iter_mut()
            .find(|h| h.y == zero)
            .ok_or_else(|| Error::Invalid("mass sweep needs an on-site (y = 0) hopping entry".into()))?;
        let scale = |rows: &mut Vec<Vec<f64>>| rows.iter_mut().flatten().for_each(|v| *v *= m);
        scale(&mut h.re);
        if let Some(im) = h.im.as_mut() {
            scale(im);
        }
        Ok(f)
    }
}
