//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};

use anisoflow::agrd::{read_agrd, write_agrd, GridPayload};
use anisoflow::eigen::{conjecture_sweep, eigen_test, EigenTestConfig, SweepConfig};
use anisoflow::grid::{a2tv_energy, ScalarGrid, TensorField};
use anisoflow::shapes::{
    calibrated_c_shape, convexity_measure, ellipse_max_curvature, rasterize, Mask, RasterShape,
    ShapeSpec, ShapeVariant,
};
use anisoflow::solver::{
    a2tv_flow, chambolle_pock_rof, chambolle_project, FlowParams, RofProblem, RofSolution,
    SolverParams,
};
use anisoflow::spectral::{
    apply_filter_with_residual, decompose, reconstruct, spectrum, SpectralDecomposition,
    SpectralFilter,
};
use anisoflow::tensor::{
    build_weickert_tensor, eig2x2, set_tensor_from_indicator, StructureTensorParams,
    WeickertParams,
};

use crate::imageio::{
    affine_for, read_grid_auto, write_pgm, write_pgm_ascii, write_png, AffineScale,
};
use crate::manifest::{write_csv, ManifestBuilder};

/// Preview image encoding for scalar outputs.
#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum ImageFormat {
    #[default]
    Pgm,
    PgmAscii,
    Png,
}

/// Error marker for exit code 3.
#[derive(Debug)]
pub struct NumericalFailure;

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure")
    }
}

impl std::error::Error for NumericalFailure {}

/// Defaults supplied by an optional JSON config file; explicit flags win.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub tau: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub k: Option<f64>,
    pub mu: Option<f64>,
    pub theta: Option<f64>,
    pub score_bar: Option<f64>,
    pub support_floor: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Ok(serde_json::from_str(&body).context("parsing config")?)
    }
}

fn resolve<T: Copy>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

// -------------------------------------------------------------------
// shared flag groups
// -------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SolverFlags {
    /// Dual step of the projection scheme.
    #[arg(long)]
    tau: Option<f64>,
    /// Iteration cap per solve.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative fixed-point tolerance on the dual field.
    #[arg(long)]
    tol: Option<f64>,
    /// Use the plain gradient in the projection update instead of the
    /// adjoint-consistent adapted gradient.
    #[arg(long)]
    paper_literal_grad: bool,
}

impl SolverFlags {
    fn params(&self, config: &Config) -> Result<SolverParams> {
        let mut p = SolverParams::new(
            resolve(self.tau, config.tau, 0.125),
            resolve(self.max_iters, config.max_iters, 3000),
            resolve(self.tol, config.tol, 1e-6),
        )?;
        p.paper_literal_grad = self.paper_literal_grad;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantName {
    Disk,
    Ellipse,
    Cshape,
    Neuron,
}

#[derive(Args, Debug)]
pub struct ShapeFlags {
    #[arg(long, value_enum)]
    variant: VariantName,
    /// Square grid side in pixels.
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Disk radius.
    #[arg(long)]
    r: Option<f64>,
    /// Ellipse semi-major axis.
    #[arg(long)]
    ra: Option<f64>,
    /// Ellipse semi-minor axis.
    #[arg(long)]
    rb: Option<f64>,
    /// C-shape outer radius.
    #[arg(long)]
    outer: Option<f64>,
    /// C-shape inner radius.
    #[arg(long)]
    inner: Option<f64>,
    /// C-shape opening angle in radians.
    #[arg(long)]
    opening: Option<f64>,
    /// Solve the C-shape opening for this hull-perimeter ratio.
    #[arg(long)]
    target_hull_ratio: Option<f64>,
    /// Neuron lobe semi-axes and layout.
    #[arg(long)]
    lobe_ra: Option<f64>,
    #[arg(long)]
    lobe_rb: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    protrusion_len: Option<f64>,
    #[arg(long)]
    protrusion_w: Option<f64>,
    /// Indicator height.
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Subtract the grid mean from the indicator.
    #[arg(long)]
    zero_mean: bool,
    /// Rotation in degrees.
    #[arg(long, default_value_t = 0.0)]
    rotation_deg: f64,
}

impl ShapeFlags {
    fn build(&self) -> Result<(ShapeSpec, RasterShape)> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| anyhow!("--{name} is required for this variant"))
        };
        if let (VariantName::Cshape, Some(ratio)) = (self.variant, self.target_hull_ratio) {
            let outer = need(self.outer, "outer")?;
            let inner = need(self.inner, "inner")?;
            let (mut spec, _) = calibrated_c_shape(
                self.size, self.size, outer, inner, ratio, self.h, self.zero_mean,
            )?;
            spec.rotation = self.rotation_deg.to_radians();
            let shape = rasterize(&spec)?;
            return Ok((spec, shape));
        }
        let variant = match self.variant {
            VariantName::Disk => ShapeVariant::Disk {
                r: need(self.r, "r")?,
            },
            VariantName::Ellipse => ShapeVariant::Ellipse {
                ra: need(self.ra, "ra")?,
                rb: need(self.rb, "rb")?,
            },
            VariantName::Cshape => ShapeVariant::CShape {
                outer: need(self.outer, "outer")?,
                inner: need(self.inner, "inner")?,
                opening: need(self.opening, "opening")?,
            },
            VariantName::Neuron => ShapeVariant::NeuronPair {
                lobe_ra: need(self.lobe_ra, "lobe-ra")?,
                lobe_rb: need(self.lobe_rb, "lobe-rb")?,
                separation: need(self.separation, "separation")?,
                protrusion_len: need(self.protrusion_len, "protrusion-len")?,
                protrusion_w: need(self.protrusion_w, "protrusion-w")?,
            },
        };
        let spec = ShapeSpec::centered(variant, self.size, self.size, self.h, self.zero_mean)
            .with_rotation(self.rotation_deg.to_radians());
        let shape = rasterize(&spec)?;
        Ok((spec, shape))
    }

    fn describe(&self, m: &mut ManifestBuilder) {
        m.param("variant", format!("{:?}", self.variant));
        m.param("size", self.size);
        m.param("h", self.h);
        m.param("zero_mean", self.zero_mean);
        m.param("rotation_deg", self.rotation_deg);
        for (name, v) in [
            ("r", self.r),
            ("ra", self.ra),
            ("rb", self.rb),
            ("outer", self.outer),
            ("inner", self.inner),
            ("opening", self.opening),
            ("target_hull_ratio", self.target_hull_ratio),
            ("lobe_ra", self.lobe_ra),
            ("lobe_rb", self.lobe_rb),
            ("separation", self.separation),
            ("protrusion_len", self.protrusion_len),
            ("protrusion_w", self.protrusion_w),
        ] {
            if let Some(v) = v {
                m.param(name, v);
            }
        }
    }
}

fn check_finite(grid: &ScalarGrid) -> Result<()> {
    if grid.values().iter().any(|v| !v.is_finite()) {
        return Err(anyhow!(NumericalFailure).context("non-finite values in result"));
    }
    Ok(())
}

fn load_tensor(path: Option<&Path>, tv: bool, w: usize, h: usize) -> Result<TensorField> {
    match (path, tv) {
        (Some(_), true) => bail!("--tensor and --tv are mutually exclusive"),
        (None, true) | (None, false) => Ok(TensorField::identity(w, h)),
        (Some(p), false) => match read_agrd(p)? {
            GridPayload::Tensor(t) => {
                if t.width() != w || t.height() != h {
                    bail!("tensor dimensions do not match the input image");
                }
                Ok(t)
            }
            _ => bail!("{} does not hold a tensor field", p.display()),
        },
    }
}

fn export_scalar(
    m: &mut ManifestBuilder,
    name_base: &str,
    grid: &ScalarGrid,
    format: ImageFormat,
) -> Result<AffineScale> {
    let affine = affine_for(grid);
    match format {
        ImageFormat::Pgm => {
            let p = m.output(&format!("{name_base}.pgm"));
            write_pgm(&p, grid, affine)?;
        }
        ImageFormat::PgmAscii => {
            let p = m.output(&format!("{name_base}.pgm"));
            write_pgm_ascii(&p, grid, affine)?;
        }
        ImageFormat::Png => {
            let p = m.output(&format!("{name_base}.png"));
            write_png(&p, grid, affine)?;
        }
    }
    let agrd = m.output(&format!("{name_base}.agrd"));
    write_agrd(&agrd, &GridPayload::Scalar(grid.clone()))?;
    Ok(affine)
}

// -------------------------------------------------------------------
// shapes
// -------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ShapesArgs {
    #[command(flatten)]
    shape: ShapeFlags,
    /// Preview image encoding.
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    image_format: ImageFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_shapes(args: ShapesArgs, _config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("shapes", &args.out_dir)?;
    args.shape.describe(&mut m);
    let (spec, shape) = args.shape.build()?;

    let affine = export_scalar(&mut m, "shape", shape.indicator(), args.image_format)?;
    m.diagnostic("indicator_affine", affine);

    let mask_grid = shape.mask().to_scalar();
    let mask_path = m.output("mask.pgm");
    write_pgm(&mask_path, &mask_grid, AffineScale { offset: 0.0, scale: 255.0 })?;

    let kappa_max = match spec.variant {
        ShapeVariant::Disk { r } => Some(1.0 / r),
        ShapeVariant::Ellipse { ra, rb } => Some(ellipse_max_curvature(ra, rb)?),
        _ => None,
    };
    let geometry = serde_json::json!({
        "area": shape.area(),
        "perimeter": shape.perimeter(),
        "hull_perimeter": shape.hull_perimeter(),
        "convexity_measure": convexity_measure(&shape),
        "kappa_max": kappa_max,
        "opening": match spec.variant {
            ShapeVariant::CShape { opening, .. } => Some(opening),
            _ => None,
        },
    });
    let geo_path = m.output("geometry.json");
    std::fs::write(&geo_path, serde_json::to_string_pretty(&geometry)?)?;
    m.finish()?;
    Ok(())
}

// -------------------------------------------------------------------
// tensor
// -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TensorMode {
    Weickert,
    Set,
}

#[derive(Args, Debug)]
pub struct TensorArgs {
    /// Source image (weickert mode) or indicator/mask image (set mode).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = TensorMode::Weickert)]
    mode: TensorMode,
    /// Pre-smoothing scale sigma.
    #[arg(long)]
    sigma: Option<f64>,
    /// Tensor smoothing scale rho.
    #[arg(long)]
    rho: Option<f64>,
    /// Weickert contrast parameter K.
    #[arg(long)]
    k: Option<f64>,
    /// Anisotropy for set mode.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_tensor(args: TensorArgs, config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("tensor", &args.out_dir)?;
    m.hash_input(&args.input)?;
    let image = read_grid_auto(&args.input)?;
    let sigma = resolve(args.sigma, config.sigma, 1.0);
    let rho = resolve(args.rho, config.rho, 4.0);
    let k = resolve(args.k, config.k, 1.0);
    m.param("input", args.input.display().to_string());
    m.param("mode", format!("{:?}", args.mode));

    let tensor = match args.mode {
        TensorMode::Weickert => {
            m.param("sigma", sigma);
            m.param("rho", rho);
            m.param("k", k);
            build_weickert_tensor(
                &image,
                &StructureTensorParams::new(sigma, rho)?,
                &WeickertParams::with_k(k)?,
            )
        }
        TensorMode::Set => {
            let a = args.a.ok_or_else(|| anyhow!("--a is required in set mode"))?;
            m.param("a", a);
            set_tensor_from_indicator(&image, a)?
        }
    };

    let tensor_path = m.output("tensor.agrd");
    write_agrd(&tensor_path, &GridPayload::Tensor(tensor.clone()))?;

    // diagnostic image of the minor eigenvalue
    let minor = ScalarGrid::from_fn(tensor.width(), tensor.height(), |r, c| {
        let i = tensor.idx(r, c);
        eig2x2(tensor.a11[i], tensor.a12[i], tensor.a22[i]).mu2
    });
    let affine = affine_for(&minor);
    let minor_path = m.output("minor_eig.pgm");
    write_pgm(&minor_path, &minor, affine)?;
    m.diagnostic("minor_eig_affine", affine);
    m.finish()?;
    Ok(())
}

// -------------------------------------------------------------------
// flow
// -------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    input: PathBuf,
    /// Tensor field (AGRD); omit or pass --tv for the identity.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Isotropic TV (identity tensor).
    #[arg(long)]
    tv: bool,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    steps: usize,
    #[command(flatten)]
    solver: SolverFlags,
    /// Dump every snapshot as AGRD.
    #[arg(long)]
    dump_snapshots: bool,
    /// Preview image encoding.
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    image_format: ImageFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_flow(args: FlowArgs, config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("flow", &args.out_dir)?;
    m.hash_input(&args.input)?;
    if let Some(t) = &args.tensor {
        m.hash_input(t)?;
    }
    let f = read_grid_auto(&args.input)?;
    let tensor = load_tensor(args.tensor.as_deref(), args.tv, f.width(), f.height())?;
    let inner = args.solver.params(config)?;
    m.param("input", args.input.display().to_string());
    m.param("dt", args.dt);
    m.param("steps", args.steps);
    m.param("tau", inner.tau);
    m.param("max_iters", inner.max_iters);
    m.param("tol", inner.tol);
    m.param("paper_literal_grad", inner.paper_literal_grad);

    let params = FlowParams::new(args.dt, args.steps, inner)?;
    let traj = a2tv_flow(&f, &tensor, &params)?;
    for snap in &traj.snapshots {
        check_finite(snap)?;
    }

    let energy_path = m.output("energy.csv");
    let energies: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|u| a2tv_energy(u, &tensor))
        .collect::<Result<Vec<_>, _>>()?;
    write_csv(
        &energy_path,
        "t,energy,mean",
        traj.times
            .iter()
            .zip(&energies)
            .zip(&traj.snapshots)
            .map(|((t, e), u)| format!("{t},{e},{}", u.mean())),
    )?;

    let steps_path = m.output("steps.csv");
    write_csv(
        &steps_path,
        "step,iterations,residual,converged",
        traj.step_diagnostics.iter().enumerate().map(|(k, d)| {
            format!("{k},{},{},{}", d.iterations, d.final_residual, d.converged)
        }),
    )?;

    let affine = export_scalar(&mut m, "final", traj.snapshots.last().unwrap(), args.image_format)?;
    m.diagnostic("final_affine", affine);

    if args.dump_snapshots {
        for (k, snap) in traj.snapshots.iter().enumerate() {
            let p = m.output(&format!("snapshot_{k:04}.agrd"));
            write_agrd(&p, &GridPayload::Scalar(snap.clone()))?;
        }
        for (k, p_k) in traj.subgradients.iter().enumerate() {
            let p = m.output(&format!("subgradient_{k:04}.agrd"));
            write_agrd(&p, &GridPayload::Scalar(p_k.clone()))?;
        }
    }

    m.diagnostic("initial_energy", energies.first());
    m.diagnostic("final_energy", energies.last());
    m.diagnostic(
        "total_inner_iterations",
        traj.step_diagnostics
            .iter()
            .map(|d| d.iterations)
            .sum::<usize>(),
    );
    m.finish()?;
    Ok(())
}

// -------------------------------------------------------------------
// rof
// -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverName {
    Chambolle,
    Cp,
}

#[derive(Args, Debug)]
pub struct RofArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tensor: Option<PathBuf>,
    #[arg(long)]
    tv: bool,
    /// Fidelity weight (inverse regularization time).
    #[arg(long)]
    fid_weight: f64,
    #[arg(long, value_enum, default_value_t = SolverName::Chambolle)]
    solver: SolverName,
    #[command(flatten)]
    solver_flags: SolverFlags,
    /// Preview image encoding.
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    image_format: ImageFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_rof(args: RofArgs, config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("rof", &args.out_dir)?;
    m.hash_input(&args.input)?;
    if let Some(t) = &args.tensor {
        m.hash_input(t)?;
    }
    let f = read_grid_auto(&args.input)?;
    let tensor = load_tensor(args.tensor.as_deref(), args.tv, f.width(), f.height())?;
    let params = args.solver_flags.params(config)?;
    m.param("input", args.input.display().to_string());
    m.param("fid_weight", args.fid_weight);
    m.param("solver", format!("{:?}", args.solver));
    m.param("tau", params.tau);
    m.param("max_iters", params.max_iters);
    m.param("tol", params.tol);

    let prob = RofProblem::new(f, tensor, args.fid_weight)?;
    let sol: RofSolution = match args.solver {
        SolverName::Chambolle => chambolle_project(&prob, &params)?,
        SolverName::Cp => chambolle_pock_rof(&prob, &params)?,
    };
    check_finite(&sol.u)?;

    let affine = export_scalar(&mut m, "u", &sol.u, args.image_format)?;
    m.diagnostic("u_affine", affine);
    let xi_path = m.output("xi.agrd");
    write_agrd(&xi_path, &GridPayload::Vector(sol.xi.clone()))?;
    let p_path = m.output("p.agrd");
    write_agrd(&p_path, &GridPayload::Scalar(sol.p.clone()))?;

    let energy_path = m.output("energy.csv");
    write_csv(
        &energy_path,
        "iteration,energy",
        sol.energy_trace
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{i},{e}")),
    )?;

    m.diagnostic("iterations", sol.diagnostics.iterations);
    m.diagnostic("final_residual", sol.diagnostics.final_residual);
    m.diagnostic("converged", sol.diagnostics.converged);
    m.finish()?;
    Ok(())
}

// -------------------------------------------------------------------
// spectral
// -------------------------------------------------------------------

#[derive(Subcommand, Debug)]
pub enum SpectralCmd {
    /// Run the flow and store the band decomposition.
    Decompose(SpectralDecomposeArgs),
    /// Apply a scale filter to a stored decomposition.
    Filter(SpectralFilterArgs),
    /// Recompute the spectrum of a stored decomposition.
    Spectrum(SpectralSpectrumArgs),
}

#[derive(Args, Debug)]
pub struct SpectralDecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tensor: Option<PathBuf>,
    #[arg(long)]
    tv: bool,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    steps: usize,
    #[command(flatten)]
    solver: SolverFlags,
    /// Also dump each band as an 8-bit preview image.
    #[arg(long)]
    dump_band_previews: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct DecompositionMeta {
    times: Vec<f64>,
    dt: f64,
    source_mean: f64,
    bands: Vec<String>,
    residual: String,
}

pub fn run_spectral(cmd: SpectralCmd, config: &Config) -> Result<()> {
    match cmd {
        SpectralCmd::Decompose(args) => spectral_decompose(args, config),
        SpectralCmd::Filter(args) => spectral_filter(args),
        SpectralCmd::Spectrum(args) => spectral_spectrum(args),
    }
}

fn spectral_decompose(args: SpectralDecomposeArgs, config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("spectral-decompose", &args.out_dir)?;
    m.hash_input(&args.input)?;
    if let Some(t) = &args.tensor {
        m.hash_input(t)?;
    }
    let f = read_grid_auto(&args.input)?;
    let tensor = load_tensor(args.tensor.as_deref(), args.tv, f.width(), f.height())?;
    let inner = args.solver.params(config)?;
    m.param("input", args.input.display().to_string());
    m.param("dt", args.dt);
    m.param("steps", args.steps);
    m.param("max_iters", inner.max_iters);
    m.param("tol", inner.tol);

    let traj = a2tv_flow(&f, &tensor, &FlowParams::new(args.dt, args.steps, inner)?)?;
    let dec = decompose(&traj)?;

    let mut band_names = Vec::new();
    for (k, band) in dec.bands.iter().enumerate() {
        let name = format!("band_{k:04}.agrd");
        let p = m.output(&name);
        write_agrd(&p, &GridPayload::Scalar(band.clone()))?;
        band_names.push(name);
        if args.dump_band_previews {
            let affine = affine_for(band);
            let prev = m.output(&format!("band_{k:04}.pgm"));
            write_pgm(&prev, band, affine)?;
        }
    }
    let residual_path = m.output("residual.agrd");
    write_agrd(&residual_path, &GridPayload::Scalar(dec.residual.clone()))?;

    let meta = DecompositionMeta {
        times: dec.times.clone(),
        dt: dec.dt,
        source_mean: dec.source_mean,
        bands: band_names,
        residual: "residual.agrd".to_string(),
    };
    let meta_path = m.output("decomposition.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;

    let s = spectrum(&dec);
    let spec_path = m.output("spectrum.csv");
    write_csv(
        &spec_path,
        "t,S",
        s.times
            .iter()
            .zip(&s.values)
            .map(|(t, v)| format!("{t},{v}")),
    )?;

    // completeness check doubles as a numerical health check
    let rec = reconstruct(&dec);
    let mut err2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..rec.values().len() {
        let d = rec.values()[i] - f.values()[i];
        err2 += d * d;
        norm2 += f.values()[i] * f.values()[i];
    }
    m.diagnostic("reconstruction_rel_error", (err2 / norm2.max(1e-30)).sqrt());
    m.finish()?;
    Ok(())
}

fn load_decomposition(dir: &Path) -> Result<SpectralDecomposition> {
    let meta: DecompositionMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("decomposition.json"))?)
            .context("parsing decomposition.json")?;
    let mut bands = Vec::with_capacity(meta.bands.len());
    for name in &meta.bands {
        match read_agrd(&dir.join(name))? {
            GridPayload::Scalar(g) => bands.push(g),
            _ => bail!("band {name} is not scalar"),
        }
    }
    let residual = match read_agrd(&dir.join(&meta.residual))? {
        GridPayload::Scalar(g) => g,
        _ => bail!("residual is not scalar"),
    };
    Ok(SpectralDecomposition {
        times: meta.times,
        bands,
        residual,
        source_mean: meta.source_mean,
        dt: meta.dt,
    })
}

#[derive(Args, Debug)]
pub struct SpectralFilterArgs {
    /// Directory produced by `spectral decompose`.
    #[arg(long)]
    dec: PathBuf,
    /// Low-pass cutoff (keeps t >= t_c plus the residual).
    #[arg(long)]
    lpf: Option<f64>,
    /// High-pass cutoff (keeps t <= t_c).
    #[arg(long)]
    hpf: Option<f64>,
    /// Band-pass window "t1,t2".
    #[arg(long)]
    band: Option<String>,
    /// Include the residual regardless of the filter kind.
    #[arg(long)]
    with_residual: bool,
    /// Preview image encoding.
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    image_format: ImageFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

fn spectral_filter(args: SpectralFilterArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("spectral-filter", &args.out_dir)?;
    let dec = load_decomposition(&args.dec)?;
    m.param("dec", args.dec.display().to_string());

    let filter = match (args.lpf, args.hpf, &args.band) {
        (Some(t_c), None, None) => SpectralFilter::Lpf { t_c },
        (None, Some(t_c), None) => SpectralFilter::Hpf { t_c },
        (None, None, Some(spec)) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 2 {
                bail!("--band expects t1,t2");
            }
            SpectralFilter::bpf(parts[0].trim().parse()?, parts[1].trim().parse()?)?
        }
        _ => bail!("pass exactly one of --lpf, --hpf, --band"),
    };
    m.param("filter", format!("{filter:?}"));
    m.param("with_residual", args.with_residual);

    let include_residual = args.with_residual || matches!(filter, SpectralFilter::Lpf { .. });
    let out = apply_filter_with_residual(&dec, &filter, include_residual);
    check_finite(&out)?;
    let affine = export_scalar(&mut m, "filtered", &out, args.image_format)?;
    m.diagnostic("filtered_affine", affine);
    m.finish()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SpectralSpectrumArgs {
    #[arg(long)]
    dec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

fn spectral_spectrum(args: SpectralSpectrumArgs) -> Result<()> {
    let mut m = ManifestBuilder::new("spectral-spectrum", &args.out_dir)?;
    let dec = load_decomposition(&args.dec)?;
    m.param("dec", args.dec.display().to_string());
    let s = spectrum(&dec);
    let path = m.output("spectrum.csv");
    write_csv(
        &path,
        "t,S",
        s.times
            .iter()
            .zip(&s.values)
            .map(|(t, v)| format!("{t},{v}")),
    )?;
    m.finish()?;
    Ok(())
}

// -------------------------------------------------------------------
// eigen
// -------------------------------------------------------------------

#[derive(Subcommand, Debug)]
pub enum EigenCmd {
    /// Flow one shape and report the eigenfunction diagnostics.
    Test(EigenTestArgs),
    /// Ellipse eccentricity/anisotropy sweep.
    Sweep(EigenSweepArgs),
}

#[derive(Args, Debug)]
pub struct EigenTestArgs {
    #[command(flatten)]
    shape: ShapeFlags,
    /// Anisotropy parameter of the set tensor.
    #[arg(long)]
    a: f64,
    /// Flow steps covering 1.2 of the predicted extinction time.
    #[arg(long, default_value_t = 12)]
    steps: usize,
    #[arg(long)]
    score_bar: Option<f64>,
    #[arg(long)]
    support_floor: Option<f64>,
    /// Extended iteration cap for the cold first flow step.
    #[arg(long)]
    first_step_max_iters: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct EigenSweepArgs {
    /// Ratio list "start:end:step" or comma-separated values.
    #[arg(long, default_value = "0.3:1.0:0.1")]
    ratios: String,
    /// Anisotropy list, same syntax.
    #[arg(long, default_value = "0.5:1.0:0.1")]
    a_values: String,
    #[arg(long, default_value_t = 100.0)]
    ra: f64,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long)]
    score_bar: Option<f64>,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    /// Extended iteration cap for the cold first flow step per cell.
    #[arg(long)]
    first_step_max_iters: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("range syntax is start:end:step");
        }
        let start: f64 = parts[0].parse()?;
        let end: f64 = parts[1].parse()?;
        let step: f64 = parts[2].parse()?;
        if !(step > 0.0) {
            bail!("step must be positive");
        }
        let mut out = Vec::new();
        let mut v = start;
        while v <= end + 1e-9 {
            out.push((v * 1e9).round() / 1e9);
            v += step;
        }
        Ok(out)
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(Into::into))
            .collect()
    }
}

pub fn run_eigen(cmd: EigenCmd, config: &Config) -> Result<()> {
    match cmd {
        EigenCmd::Test(args) => {
            let mut m = ManifestBuilder::new("eigen-test", &args.out_dir)?;
            args.shape.describe(&mut m);
            let (spec, _) = args.shape.build()?;
            let cfg = EigenTestConfig {
                a: args.a,
                steps: args.steps,
                inner: args.solver.params(config)?,
                first_step_max_iters: args.first_step_max_iters,
                score_bar: resolve(args.score_bar, config.score_bar, 0.0017),
                support_floor: resolve(args.support_floor, config.support_floor, 0.1),
            };
            m.param("a", cfg.a);
            m.param("steps", cfg.steps);
            m.param("score_bar", cfg.score_bar);
            m.param("support_floor", cfg.support_floor);
            m.param("grid_resolution_note", format!("{}x{} grid; score bar is resolution-sensitive", spec.width, spec.height));

            let report = eigen_test(&spec, &cfg)?;
            let path = m.output("report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            m.diagnostic("is_eigen", report.is_eigen);
            m.finish()?;
            Ok(())
        }
        EigenCmd::Sweep(args) => {
            let mut m = ManifestBuilder::new("eigen-sweep", &args.out_dir)?;
            let cfg = SweepConfig {
                ratios: parse_list(&args.ratios)?,
                a_values: parse_list(&args.a_values)?,
                ra: args.ra,
                score_bar: resolve(args.score_bar, config.score_bar, 0.0017),
                grid: args.size,
                steps: args.steps,
                inner: args.solver.params(config)?,
                first_step_max_iters: args.first_step_max_iters,
            };
            m.param("ratios", &cfg.ratios);
            m.param("a_values", &cfg.a_values);
            m.param("ra", cfg.ra);
            m.param("size", cfg.grid);
            m.param("score_bar", cfg.score_bar);
            m.param("steps", cfg.steps);
            m.param("grid_resolution_note", format!("{0}x{0} grid; score bar is resolution-sensitive", cfg.grid));

            let sweep = conjecture_sweep(&cfg)?;
            let path = m.output("sweep.json");
            std::fs::write(&path, serde_json::to_string_pretty(&sweep)?)?;

            // heat map: rows = ratios, cols = a values
            let header = std::iter::once("ratio".to_string())
                .chain(sweep.a_values.iter().map(|a| format!("a={a}")))
                .collect::<Vec<_>>()
                .join(",");
            let scores_path = m.output("scores.csv");
            write_csv(
                &scores_path,
                &header,
                sweep.ratios.iter().zip(&sweep.scores).map(|(r, row)| {
                    std::iter::once(r.to_string())
                        .chain(row.iter().map(|s| s.to_string()))
                        .collect::<Vec<_>>()
                        .join(",")
                }),
            )?;

            let fcr_path = m.output("fcr.csv");
            write_csv(
                &fcr_path,
                "ratio,a_cr_grid,a_cr_refined,f_cr_exp,f_cr_theory",
                (0..sweep.ratios.len()).map(|i| {
                    let fmt = |v: Option<f64>| {
                        v.map(|x| x.to_string()).unwrap_or_else(|| "nan".into())
                    };
                    format!(
                        "{},{},{},{},{}",
                        sweep.ratios[i],
                        fmt(sweep.a_cr_grid[i]),
                        fmt(sweep.a_cr_refined[i]),
                        fmt(sweep.f_cr_exp[i]),
                        sweep.f_cr_theory[i]
                    )
                }),
            )?;
            for note in &sweep.notes {
                eprintln!("note: {note}");
            }
            m.diagnostic("notes", &sweep.notes);
            m.finish()?;
            Ok(())
        }
    }
}

// -------------------------------------------------------------------
// inpaint / fuse
// -------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct InpaintArgs {
    /// Depth image with holes.
    #[arg(long)]
    depth: PathBuf,
    /// Known-pixel mask (nonzero = known).
    #[arg(long)]
    mask: PathBuf,
    /// Guide image the tensor is built from.
    #[arg(long)]
    guide: PathBuf,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = 6000)]
    outer_iters: usize,
    #[arg(long, default_value_t = 5)]
    inner_proj: usize,
    /// Preview image encoding.
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    image_format: ImageFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_inpaint(args: InpaintArgs, config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("inpaint", &args.out_dir)?;
    for p in [&args.depth, &args.mask, &args.guide] {
        m.hash_input(p)?;
    }
    let f = read_grid_auto(&args.depth)?;
    let mask_grid = read_grid_auto(&args.mask)?;
    let guide = read_grid_auto(&args.guide)?;
    let (lo, hi) = mask_grid.min_max();
    let mid = 0.5 * (lo + hi);
    let known = Mask::new(
        mask_grid.width(),
        mask_grid.height(),
        mask_grid.values().iter().map(|&v| v > mid).collect(),
    )?;

    let mut prob = anisoflow::apps::InpaintProblem::new(f, known, guide)?;
    prob.mu = resolve(args.mu, config.mu, 80.0);
    prob.theta = resolve(args.theta, config.theta, 5.0);
    prob.wp = WeickertParams::with_k(resolve(args.k, config.k, 1.0))?;
    prob.outer_iters = args.outer_iters;
    prob.inner_proj = args.inner_proj;
    m.param("mu", prob.mu);
    m.param("theta", prob.theta);
    m.param("k", prob.wp.k);
    m.param("outer_iters", prob.outer_iters);
    m.param("inner_proj", prob.inner_proj);

    let u = anisoflow::apps::inpaint(&prob)?;
    check_finite(&u)?;
    let affine = export_scalar(&mut m, "inpainted", &u, args.image_format)?;
    m.diagnostic("inpainted_affine", affine);
    m.finish()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    /// Functional (low-resolution) image.
    #[arg(long)]
    func: PathBuf,
    /// Structural guide image.
    #[arg(long)]
    guide: PathBuf,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Preview image encoding.
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    image_format: ImageFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run_fuse(args: FuseArgs, config: &Config) -> Result<()> {
    let mut m = ManifestBuilder::new("fuse", &args.out_dir)?;
    m.hash_input(&args.func)?;
    m.hash_input(&args.guide)?;
    let f = read_grid_auto(&args.func)?;
    let guide = read_grid_auto(&args.guide)?;
    let mut prob = anisoflow::apps::FusionProblem::new(f, guide)?;
    prob.mu = resolve(args.mu, config.mu, 5.0 / 3.0);
    prob.k = resolve(args.k, config.k, 0.1);
    prob.solver = args.solver.params(config)?;
    m.param("mu", prob.mu);
    m.param("k", prob.k);
    m.param("max_iters", prob.solver.max_iters);
    m.param("tol", prob.solver.tol);

    let sol = anisoflow::apps::fuse(&prob)?;
    check_finite(&sol.u)?;
    let affine = export_scalar(&mut m, "fused", &sol.u, args.image_format)?;
    m.diagnostic("fused_affine", affine);
    m.diagnostic("iterations", sol.diagnostics.iterations);
    m.diagnostic("final_residual", sol.diagnostics.final_residual);
    m.diagnostic("converged", sol.diagnostics.converged);
    m.finish()?;
    Ok(())
}

