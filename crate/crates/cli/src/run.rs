//! Command dispatch.

use crate::modelfile::ModelFile;
use crate::record::{F17, ResultRecord};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use topolat::catalog::{bulk_gap, localization_length_analytic, lyapunov_transfer};
use topolat::clifford::build_rep;
use topolat::gaplabel::{gap_label_check, ids, pairing_lattice, streda_ids, twisted_chern};
use topolat::invariants::{
    boundary_current, boundary_invariant_projection, boundary_invariant_unitary, calderon_fedosov_even,
    chern_even_k, chern_real_space, chiral_polarization, depth_cut_default, fredholm_index_dirac_even,
    fredholm_index_dirac_odd, open_box_fermi_unitary, winding_k, InvariantResult, KernelCount,
};
use topolat::linalg::{self, CMat};
use topolat::model::sample_disorder_halfspace;
use topolat::pump::{delta_polarization, spectral_flow, stroboscopic_winding};
use topolat::slab::{self, SlabGrid};
use topolat::spectral::{
    boundary_operators, chiral_projection, diagonalize, fermi_data, SmoothStep, StepKind, StepProfile,
};
use topolat::{
    assemble_bulk, assemble_halfspace, bloch_fiber, sample_disorder, Bc, BulkModel, DisorderConfig, Error,
    FiniteVolume, HalfSpaceModel, LatticeOperator, TraceWindow,
};

#[derive(Parser, Debug)]
#[command(name = "topolat", version, about = "Topological invariants of disordered magnetic lattice models")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Write JSON-lines records to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the sweep table as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Worker threads for sweeps and disorder averages.
    #[arg(long, global = true, env = "TOPOLAT_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Minimal distance of the spectrum to μ (default 1e-8 of the spectral width).
    #[arg(long, global = true)]
    pub gap_tol: Option<f64>,
    /// Residual above which an invariant is flagged unquantized.
    #[arg(long, global = true, default_value_t = topolat::invariants::QUANTIZATION_TOL)]
    pub quant_tol: f64,
    /// Singular values below this fraction of the norm count as kernel.
    #[arg(long, global = true, default_value_t = topolat::invariants::TAU_ZERO)]
    pub tau_zero: f64,
    /// Linear fraction of the volume used by trace-per-volume windows.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub window: f64,
    /// Number of consecutive disorder seeds, starting at the file's seed.
    #[arg(long, global = true, default_value_t = 1)]
    pub seeds: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues of the finite-volume operator, or of a Bloch fiber with --k.
    Spectrum {
        model: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
    },
    /// Even Chern number in k-space (B = 0) or by boundary twists on a torus (B ≠ 0).
    Chern {
        model: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Odd Chern number of the Fermi unitary in k-space.
    Winding {
        model: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Chern number from the real-space formula on an open box.
    RealspaceChern { model: PathBuf },
    /// Fredholm index against the Dirac phase.
    Index {
        model: PathBuf,
        /// Shift x0 of the Dirac operator, one entry per axis.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
    },
    /// Boundary invariant and boundary current.
    Boundary {
        model: PathBuf,
        #[command(flatten)]
        slab: SlabArgs,
    },
    /// Signed count of boundary zero modes N₊ − N₋.
    ZeroModes {
        model: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Chiral polarization on an open chain.
    Polarization { model: PathBuf },
    /// Invariant against the on-site mass scale.
    PhaseDiagram {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 21)]
        steps: usize,
        #[arg(long)]
        grid: Option<usize>,
        /// Mass value represented by the file's on-site entry.
        #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
        mass_unit: f64,
    },
    /// Inverse localization length of a disordered SSH chain at E = 0.
    Localization {
        model: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        sites: usize,
    },
    /// Field derivative of the integrated density of states.
    Streda {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        axes: Vec<usize>,
        /// Chern number to compare against.
        #[arg(long, allow_hyphen_values = true)]
        target_chern: Option<f64>,
    },
    /// Integrated density of states and its gap label.
    Gaplabel {
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        bound: i64,
    },
    /// Polarization pumped by the [loop] of the model file.
    Pump {
        model: PathBuf,
        #[arg(long, default_value_t = 64)]
        t_grid: usize,
        #[arg(long, default_value_t = 64)]
        k_grid: usize,
        #[arg(long, default_value_t = 512)]
        steps: usize,
        /// Chain length for the spectral flow.
        #[arg(long, default_value_t = 128)]
        sites: usize,
    },
    /// Bulk, real-space and index routes for one model.
    Verify {
        model: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SlabArgs {
    /// Parallel momentum grid of the Bloch slab.
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    /// Slab depth of the Bloch slab.
    #[arg(long, default_value_t = 64)]
    pub depth: usize,
    /// Support of the smooth step as a fraction of the gap.
    #[arg(long, default_value_t = 0.9)]
    pub frac: f64,
    /// Gap interval, default ± the bulk gap around μ.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gap: Option<Vec<f64>>,
    /// Use the dense slab of [volume] even for clean models.
    #[arg(long)]
    pub dense: bool,
}

/// Exit status: parse errors, or a failed precondition of a computation.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 1,
            Failure::Compute(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Parse(s) => format!("parse-error: {s}"),
            Failure::Compute(e) => e.to_string(),
        }
    }
}

type Out<T> = std::result::Result<T, Failure>;

fn parse<T>(r: topolat::Result<T>) -> Out<T> {
    r.map_err(|e| Failure::Parse(e.to_string()))
}

pub fn load(path: &Path) -> Out<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    ModelFile::parse(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

struct Ctx<'a> {
    g: &'a Global,
    command: &'static str,
}

impl Ctx<'_> {
    fn window(&self) -> TraceWindow {
        TraceWindow { fraction: self.g.window }
    }

    fn inv(&self, r: &InvariantResult) -> ResultRecord {
        ResultRecord::invariant(self.command, r, self.g.quant_tol)
    }

    fn seeds(&self, file: &ModelFile) -> Vec<Option<u64>> {
        match file.seed() {
            None => vec![None],
            Some(s) => (0..self.g.seeds.max(1)).map(|i| Some(s + i)).collect(),
        }
    }

    /// Runs `f` once per seed on the worker pool; records come back in seed order.
    fn per_seed(&self, file: &ModelFile, f: impl Fn(Option<u64>) -> Out<Vec<ResultRecord>> + Sync) -> Out<Vec<ResultRecord>> {
        let seeds = self.seeds(file);
        let runs: Vec<Out<Vec<ResultRecord>>> = seeds.par_iter().map(|&s| f(s)).collect();
        let mut recs = Vec::new();
        for r in runs {
            recs.extend(r?);
        }
        if seeds.len() > 1 {
            recs.extend(means(self.command, &recs));
        }
        Ok(recs)
    }
}

/// Seed average of every invariant name appearing in `recs`.
fn means(command: &str, recs: &[ResultRecord]) -> Vec<ResultRecord> {
    let mut names: Vec<&str> = Vec::new();
    for r in recs {
        if !names.contains(&r.invariant.as_str()) {
            names.push(&r.invariant);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let vals: Vec<f64> = recs.iter().filter(|r| r.invariant == name).map(|r| r.value.0).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let mut rec = ResultRecord::new(command, &format!("{name} (mean)"), mean).param("samples", vals.len());
            rec.residual = Some(F17((mean - mean.round()).abs()));
            rec
        })
        .collect()
}

fn disorder_bulk(model: &BulkModel, vol: &FiniteVolume, seed: Option<u64>) -> topolat::Result<DisorderConfig> {
    match seed {
        Some(s) if !model.is_clean() => sample_disorder(model, vol, s),
        _ => Ok(DisorderConfig::clean()),
    }
}

fn disorder_half(file: &ModelFile, hs: &HalfSpaceModel, vol: &FiniteVolume, seed: Option<u64>) -> topolat::Result<DisorderConfig> {
    let dirty = !hs.bulk.is_clean() || hs.boundary_terms.iter().any(|t| t.lambda != 0.0);
    match seed {
        Some(s) if dirty => sample_disorder_halfspace(hs, vol, s, file.boundary_seed().unwrap_or(s)),
        _ => Ok(DisorderConfig::clean()),
    }
}

fn bulk_operator(file: &ModelFile, seed: Option<u64>) -> Out<(BulkModel, LatticeOperator)> {
    let model = parse(file.bulk())?;
    let vol = parse(file.volume())?;
    let dis = disorder_bulk(&model, &vol, seed)?;
    let h = assemble_bulk(&model, &vol, &dis)?;
    Ok((model, h))
}

fn all_axes(d: usize) -> Vec<usize> {
    (0..d).collect()
}

fn kernel_record(c: &Ctx, name: &str, k: &KernelCount) -> ResultRecord {
    ResultRecord::integer(c.command, name, k.index())
        .param("kernel", k.kernel)
        .param("cokernel", k.cokernel)
        .param("tau", k.tau)
        .param("smallest_singular_values", k.smallest.clone())
}

fn fredholm(c: &Ctx, model: &BulkModel, h: &LatticeOperator, x0: &[f64]) -> Out<ResultRecord> {
    let d = model.d;
    let vol = &h.volume;
    let rep = build_rep(d);
    if d % 2 == 0 {
        let spec = diagonalize(h)?;
        let f = fermi_data(&spec, model.mu, None, c.g.gap_tol)?;
        let frame = linalg::columns(&spec.vectors, &(0..f.filled).collect::<Vec<_>>());
        let k = fredholm_index_dirac_even(&frame, h.fiber, vol, &rep, x0, c.g.tau_zero)?;
        let mut rec = kernel_record(c, "Ind(PGP)", &k);
        if rep.dim == 2 {
            rec = rec.param("calderon_fedosov", calderon_fedosov_even(&f.projection, h.fiber, vol, &rep, x0)?);
        }
        Ok(rec)
    } else {
        if !model.chiral {
            return Err(Error::NotChiral("odd index needs a chiral model".into()).into());
        }
        let u = chiral_unitary(c, model, h)?;
        let k = fredholm_index_dirac_odd(&u, h.fiber / 2, vol, &rep, x0, c.g.tau_zero)?;
        Ok(kernel_record(c, "-Ind(EUE)", &k))
    }
}

/// Fermi unitary of a chiral operator; polar part on boxes with open axes.
fn chiral_unitary(c: &Ctx, model: &BulkModel, h: &LatticeOperator) -> Out<CMat> {
    if h.volume.bc.iter().all(|&b| b == Bc::Periodic) {
        let spec = diagonalize(h)?;
        let j = h.chirality_diag();
        let f = fermi_data(&spec, model.mu, Some(&j), c.g.gap_tol)?;
        Ok(f.fermi_unitary.expect("chiral Fermi data"))
    } else {
        Ok(open_box_fermi_unitary(h)?)
    }
}

fn default_gap(model: &BulkModel, arg: &Option<Vec<f64>>) -> Out<(f64, f64)> {
    match arg {
        Some(v) if v.len() == 2 => Ok((v[0], v[1])),
        Some(_) => Err(Failure::Parse("--gap needs two values lo,hi".into())),
        None => {
            let g = bulk_gap(model, 64)?;
            Ok((model.mu - g, model.mu + g))
        }
    }
}

fn step(kind: StepKind, gap: (f64, f64), frac: f64) -> SmoothStep {
    SmoothStep::in_gap(kind, gap, frac).with_profile(StepProfile::Septic)
}

fn zero_modes(c: &Ctx, file: &ModelFile, delta: Option<f64>) -> Out<Vec<ResultRecord>> {
    let hs = parse(file.halfspace())?;
    let vol = parse(file.volume())?;
    if hs.bulk.d != 1 || !hs.bulk.chiral || !vol.is_halfspace() {
        return Err(Error::Invalid("zero modes need a chiral d = 1 model on a half-line volume".into()).into());
    }
    let delta = match delta {
        Some(v) => v,
        None if hs.bulk.is_clean() => 0.5 * bulk_gap(&hs.bulk, 256)?,
        None => 1e-3,
    };
    c.per_seed(file, |seed| {
        let dis = disorder_half(file, &hs, &vol, seed)?;
        let h = assemble_halfspace(&hs, &vol, &dis)?;
        let spec = diagonalize(&h)?;
        let r = topolat::invariants::zero_mode_chirality(&spec, &h.chirality_diag(), &vol, h.fiber, delta, depth_cut_default(&vol))?;
        Ok(vec![c.inv(&r).seed(seed).param("delta", delta)])
    })
}

fn boundary(c: &Ctx, file: &ModelFile, a: &SlabArgs) -> Out<Vec<ResultRecord>> {
    let hs = parse(file.halfspace())?;
    let d = hs.bulk.d;
    if d == 1 {
        return zero_modes(c, file, None);
    }
    if d % 2 == 1 && !hs.bulk.chiral {
        return Err(Error::NotChiral("odd-d boundary invariant needs a chiral model".into()).into());
    }
    let dense = a.dense || !hs.bulk.is_clean() || !hs.bulk.field.is_zero();
    let gap = default_gap(&hs.bulk, &a.gap)?;
    let param = |r: ResultRecord| r.param("gap", vec![gap.0, gap.1]).param("frac", a.frac);
    if !dense {
        let g = SlabGrid::new(a.grid, a.depth);
        let grid = format!("bloch slab k_grid={} depth={} cut={}", g.grid, g.depth, g.cut);
        let mut recs = Vec::new();
        if d % 2 == 0 {
            let f = step(StepKind::Exp, gap, a.frac);
            let r = slab::boundary_invariant_unitary(&hs, &g, &f)?;
            recs.push(param(c.inv(&r)));
            if d == 2 {
                let j = slab::boundary_current(&hs, &g, &f, 0)?;
                recs.push(param(ResultRecord::new(c.command, "J~1", j).param("minus_2pi_J", -2.0 * PI * j)).grid(grid.clone()));
            }
        } else {
            let f = step(StepKind::Ind, gap, a.frac);
            let r = slab::boundary_invariant_projection(&hs, &g, &f)?;
            recs.push(param(c.inv(&r)));
        }
        return Ok(recs);
    }
    let vol = parse(file.volume())?;
    if !vol.is_halfspace() {
        return Err(Failure::Parse("dense boundary route needs a halfspace axis in [volume]".into()));
    }
    let cut = depth_cut_default(&vol);
    let axes: Vec<usize> = (0..d - 1).collect();
    c.per_seed(file, |seed| {
        let dis = disorder_half(file, &hs, &vol, seed)?;
        let h = assemble_halfspace(&hs, &vol, &dis)?;
        let spec = diagonalize(&h)?;
        let mut recs = Vec::new();
        if d % 2 == 0 {
            let f = step(StepKind::Exp, gap, a.frac);
            let ops = boundary_operators(&spec, &f, None)?;
            let r = boundary_invariant_unitary(&ops.u_delta, &vol, h.fiber, &axes, &c.window(), cut)?;
            recs.push(param(c.inv(&r)).seed(seed));
            if d == 2 {
                let j = boundary_current(&h.matrix, &spec, &f, &vol, h.fiber, 0, &c.window(), cut)?;
                recs.push(param(ResultRecord::new(c.command, "J~1", j).param("minus_2pi_J", -2.0 * PI * j)).seed(seed));
            }
        } else {
            let jd = h.chirality_diag();
            let fe = step(StepKind::Exp, gap, a.frac);
            let fi = step(StepKind::Ind, gap, a.frac);
            let ops = boundary_operators(&spec, &fe, Some((&fi, &jd)))?;
            let p = ops.p_delta.expect("chiral boundary projection");
            let r = boundary_invariant_projection(&p, &jd, &vol, h.fiber, &axes, &c.window(), cut)?;
            recs.push(param(c.inv(&r)).seed(seed));
        }
        Ok(recs)
    })
}

fn top_invariant(model: &BulkModel, grid: Option<usize>) -> topolat::Result<InvariantResult> {
    match (model.d % 2, model.d) {
        (0, 2) => chern_even_k(model, grid.unwrap_or(64)),
        (0, _) => chern_even_k(model, grid.unwrap_or(12)),
        (_, 1) => winding_k(model, grid.unwrap_or(256)),
        _ => winding_k(model, grid.unwrap_or(32)),
    }
}

fn ssh_parameters(model: &BulkModel) -> Out<(f64, f64, f64)> {
    let err = || Failure::Compute(Error::Invalid("localization needs an SSH chain: d = 1, fiber 2, hops at y = 0 and y = 1".into()));
    if model.d != 1 || model.n != 2 || !model.field.is_zero() {
        return Err(err());
    }
    let mass = model.hoppings.iter().find(|h| h.y == [0]).ok_or_else(err)?;
    let hop = model.hoppings.iter().find(|h| h.y == [1]).ok_or_else(err)?;
    let m = mass.w[(1, 0)].im;
    // multiplicative mass disorder m(1 + λω) is additive with λ″ = |m|λ
    Ok((m, hop.lambda, m.abs() * mass.lambda))
}

fn execute(c: &Ctx, cmd: &Command) -> Out<Vec<ResultRecord>> {
    let file = match cmd {
        Command::Spectrum { model, .. }
        | Command::Chern { model, .. }
        | Command::Winding { model, .. }
        | Command::RealspaceChern { model }
        | Command::Index { model, .. }
        | Command::Boundary { model, .. }
        | Command::ZeroModes { model, .. }
        | Command::Polarization { model }
        | Command::PhaseDiagram { model, .. }
        | Command::Localization { model, .. }
        | Command::Streda { model, .. }
        | Command::Gaplabel { model, .. }
        | Command::Pump { model, .. }
        | Command::Verify { model, .. } => load(model)?,
    };
    match cmd {
        Command::Spectrum { k, .. } => {
            let model = parse(file.bulk())?;
            let (vals, grid) = match k {
                Some(k) => (linalg::eigvalsh(&bloch_fiber(&model, k)?)?, format!("k={k:?}")),
                None => {
                    let vol = parse(file.volume())?;
                    let h = if vol.is_halfspace() {
                        let hs = parse(file.halfspace())?;
                        let dis = disorder_half(&file, &hs, &vol, file.seed())?;
                        assemble_halfspace(&hs, &vol, &dis)?
                    } else {
                        assemble_bulk(&model, &vol, &disorder_bulk(&model, &vol, file.seed())?)?
                    };
                    (linalg::eigvalsh(&h.matrix)?, format!("volume={:?}", vol.sizes))
                }
            };
            let dist = vals.iter().map(|e| (e - model.mu).abs()).fold(f64::INFINITY, f64::min);
            let mut rec = ResultRecord::new(c.command, "distance-to-mu", dist).grid(grid).seed(file.seed());
            rec.values = Some(vals.into_iter().map(F17).collect());
            Ok(vec![rec])
        }
        Command::Chern { grid, .. } => {
            let model = parse(file.bulk())?;
            if model.d % 2 == 1 {
                return Err(Error::Invalid("chern needs even d; use winding for odd d".into()).into());
            }
            let r = if model.field.is_zero() {
                top_invariant(&model, *grid)?
            } else {
                twisted_chern(&model, &parse(file.volume())?, model.mu, grid.unwrap_or(6))?
            };
            Ok(vec![c.inv(&r)])
        }
        Command::Winding { grid, .. } => {
            let model = parse(file.bulk())?;
            if model.d % 2 == 0 {
                return Err(Error::Invalid("winding needs odd d; use chern for even d".into()).into());
            }
            Ok(vec![c.inv(&top_invariant(&model, *grid)?)])
        }
        Command::RealspaceChern { .. } => c.per_seed(&file, |seed| {
            let (model, h) = bulk_operator(&file, seed)?;
            let r = chern_real_space(&h, model.mu, &all_axes(model.d), &c.window())?;
            Ok(vec![c.inv(&r).seed(seed)])
        }),
        Command::Index { x0, .. } => {
            let d = file.model.d;
            let x0 = x0.clone().unwrap_or_else(|| vec![0.5; d]);
            c.per_seed(&file, |seed| {
                let (model, h) = bulk_operator(&file, seed)?;
                Ok(vec![fredholm(c, &model, &h, &x0)?.seed(seed).param("x0", x0.clone())])
            })
        }
        Command::Boundary { slab, .. } => boundary(c, &file, slab),
        Command::ZeroModes { delta, .. } => zero_modes(c, &file, *delta),
        Command::Polarization { .. } => c.per_seed(&file, |seed| {
            let (model, h) = bulk_operator(&file, seed)?;
            if model.d != 1 || !model.chiral {
                return Err(Error::Invalid("chiral polarization needs a chiral d = 1 model".into()).into());
            }
            let j = h.chirality_diag();
            let u = chiral_unitary(c, &model, &h)?;
            let p = chiral_projection(&u, &j);
            let r = chiral_polarization(&p, &j, &h.volume, h.fiber, 0, &c.window())?;
            Ok(vec![c.inv(&r).seed(seed)])
        }),
        Command::PhaseDiagram { from, to, steps, grid, mass_unit, .. } => {
            let masses: Vec<f64> = (0..*steps)
                .map(|i| if *steps == 1 { *from } else { from + (to - from) * i as f64 / (*steps - 1) as f64 })
                .collect();
            let recs: Vec<Out<ResultRecord>> = masses
                .par_iter()
                .map(|&m| {
                    let model = parse(file.with_mass(m / mass_unit).and_then(|f| f.bulk()))?;
                    Ok(match top_invariant(&model, *grid) {
                        Ok(r) => c.inv(&r).param("m", m),
                        Err(e @ Error::NoGap(_)) => {
                            let mut rec = ResultRecord::new(c.command, "gap-closed", f64::NAN).param("m", m);
                            rec.flags.push(e.token().into());
                            rec
                        }
                        Err(e) => return Err(e.into()),
                    })
                })
                .collect();
            recs.into_iter().collect()
        }
        Command::Localization { sites, .. } => {
            let model = parse(file.bulk())?;
            let (m, l1, l2) = ssh_parameters(&model)?;
            let seed = file.seed().unwrap_or(0);
            let est = lyapunov_transfer(m, l1, l2, *sites, seed);
            let exact = localization_length_analytic(m, l1, l2);
            let mut rec = ResultRecord::new(c.command, "inverse-localization-length", est.value)
                .param("closed_form", exact)
                .param("signed_mean", est.signed_mean)
                .param("stderr", est.stderr)
                .param("m", m)
                .param("lambda1", l1)
                .param("lambda2_additive", l2)
                .grid(format!("sites={sites}"))
                .seed(Some(seed));
            rec.residual = Some(F17((est.value - exact).abs()));
            Ok(vec![rec])
        }
        Command::Streda { axes, target_chern, .. } => {
            let model = parse(file.bulk())?;
            let vol = parse(file.volume())?;
            if axes.len() != 2 {
                return Err(Failure::Parse("--axes needs two entries i,j".into()));
            }
            let s = streda_ids(&model, (axes[0], axes[1]), model.mu, &vol, target_chern.unwrap_or(0.0))?;
            let estimate = 2.0 * PI * s.derivative;
            let mut rec = ResultRecord::new(c.command, "dIDS/dB", s.derivative)
                .param("chern_estimate", estimate)
                .param("delta_b", s.delta_b)
                .grid(format!("torus={:?}", vol.sizes));
            rec.residual = Some(F17((estimate - estimate.round()).abs()));
            if rec.residual.unwrap().0 < c.g.quant_tol {
                rec.rounded = Some(estimate.round() as i64);
            }
            if target_chern.is_some() {
                rec = rec.param("target", s.target).param("mismatch", s.mismatch);
            }
            Ok(vec![rec])
        }
        Command::Gaplabel { bound, .. } => {
            let model = parse(file.bulk())?;
            let vol = parse(file.volume())?;
            let h = assemble_bulk(&model, &vol, &DisorderConfig::clean())?;
            let (v, (below, above)) = ids(&h, model.mu)?;
            let lattice = pairing_lattice(&[], &model.field, model.d)?;
            let (coeffs, residual) = gap_label_check(v, &lattice, *bound);
            let labels: Vec<String> = lattice.terms.iter().map(|(j, w)| format!("{j:?}:{w}")).collect();
            let mut rec = ResultRecord::new(c.command, "IDS", v)
                .param("labels", coeffs)
                .param("lattice", labels.join(" "))
                .param("gap", vec![below, above])
                .grid(format!("torus={:?}", vol.sizes));
            rec.residual = Some(F17(residual));
            Ok(vec![rec])
        }
        Command::Pump { t_grid, k_grid, steps, sites, .. } => {
            let lp = parse(file.adiabatic_loop())?;
            let dp = delta_polarization(&lp, 0, *t_grid, *k_grid)?;
            let mut recs = vec![c.inv(&dp)];
            if lp.base.d == 1 {
                let sw = stroboscopic_winding(&lp, *steps, *k_grid)?;
                recs.push(c.inv(&sw).param("route_mismatch", (sw.value - dp.value).abs()));
                let sf = spectral_flow(&lp, *sites, *steps)?;
                recs.push(ResultRecord::integer(c.command, "spectral-flow", sf).grid(format!("sites={sites} steps={steps}")));
            }
            Ok(recs)
        }
        Command::Verify { grid, .. } => {
            let model = parse(file.bulk())?;
            let d = model.d;
            let mut recs = Vec::new();
            if model.field.is_zero() && model.is_clean() {
                recs.push(c.inv(&top_invariant(&model, *grid)?).param("route", "k-space"));
            }
            let (_, h) = bulk_operator(&file, file.seed())?;
            let rs = chern_real_space(&h, model.mu, &all_axes(d), &c.window())?;
            recs.push(c.inv(&rs).param("route", "real-space").seed(file.seed()));
            let x0 = vec![0.5; d];
            recs.push(fredholm(c, &model, &h, &x0)?.param("route", "index").seed(file.seed()));
            let rounded: Vec<Option<i64>> = recs.iter().map(|r| r.rounded).collect();
            let agree = rounded.iter().all(|r| r.is_some() && *r == rounded[0]);
            let mut rec = ResultRecord::new(c.command, "routes-agree", if agree { 1.0 } else { 0.0 }).param("routes", recs.len());
            rec.rounded = if agree { rounded[0] } else { None };
            recs.push(rec);
            Ok(recs)
        }
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Spectrum { .. } => "spectrum",
        Command::Chern { .. } => "chern",
        Command::Winding { .. } => "winding",
        Command::RealspaceChern { .. } => "realspace-chern",
        Command::Index { .. } => "index",
        Command::Boundary { .. } => "boundary",
        Command::ZeroModes { .. } => "zero-modes",
        Command::Polarization { .. } => "polarization",
        Command::PhaseDiagram { .. } => "phase-diagram",
        Command::Localization { .. } => "localization",
        Command::Streda { .. } => "streda",
        Command::Gaplabel { .. } => "gaplabel",
        Command::Pump { .. } => "pump",
        Command::Verify { .. } => "verify",
    }
}

fn write_csv(path: &Path, recs: &[ResultRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "m,value")?;
    for r in recs {
        let m = match r.parameters.get("m") {
            Some(crate::record::Param::Float(F17(m))) => *m,
            _ => continue,
        };
        writeln!(w, "{m:.16e},{:.16e}", r.value.0)?;
    }
    w.flush()
}

/// Runs a parsed command line and writes its records.
pub fn run(cli: &Cli) -> Out<()> {
    let c = Ctx { g: &cli.global, command: name(&cli.command) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs.max(1))
        .build()
        .map_err(|e| Failure::Parse(e.to_string()))?;
    let start = Instant::now();
    let mut recs = pool.install(|| execute(&c, &cli.command))?;
    let wall = start.elapsed().as_secs_f64();
    for r in &mut recs {
        r.wall_time = F17(wall);
    }
    let io = |e: std::io::Error| Failure::Parse(e.to_string());
    let mut text = String::new();
    for r in &recs {
        text.push_str(&r.to_json());
        text.push('\n');
    }
    match &cli.global.out {
        Some(p) => std::fs::write(p, text).map_err(io)?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io)?,
    }
    if let Some(p) = &cli.global.csv {
        write_csv(p, &recs).map_err(io)?;
    }
    Ok(())
}
