use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lfx_core::autodiff::suite::run_op_suite;
use lfx_core::autodiff::GradCheckConfig;
use lfx_core::io::{self, DatasetManifest};
use lfx_core::lightfield::{subspace_view, to_macpi_image, SubspaceId};
use lfx_core::model::suite::network_gradcheck;
use lfx_core::model::{build_xmask, Network, NetworkConfig, Task};
use lfx_core::optics::{fit_epi_slope, random_scene, render_lf, OpticsConfig, RandomSceneParams, SceneSpec};
use lfx_core::pipeline::{evaluate, predict_tiled, to_luma, train, Bicubic, EvalProtocol, Predictor, Tiling, TrainConfig};
use lfx_core::{LfDims, LfError, LightField4D, Plane, Result};

use crate::overrides::load_config;
use crate::{CliError, Common};

type CliResult = std::result::Result<(), CliError>;

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(LfError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}

fn require_out(common: &Common) -> Result<&Path> {
    let out = common.out.as_deref().ok_or_else(|| LfError::config("--out is required"))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| LfError::io(parent, e))?;
    }
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LfError::io(dir, e))
}

/// `.lf4d` files as binary containers, anything else as a PNG view grid.
fn write_scene(out: &Path, lf: &LightField4D) -> Result<()> {
    if out.extension().is_some_and(|e| e == "lf4d") {
        io::write_lf4d(out, lf)
    } else {
        io::write_png_grid(out, lf)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| LfError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("config serializes")
}

fn no_config(common: &Common, cmd: &str) -> Result<()> {
    if common.config.is_some() || !common.set.is_empty() {
        return Err(LfError::config(format!("{cmd} takes no --config or --set")));
    }
    Ok(())
}

// ---- render ----------------------------------------------------------------

/// `--set` overrides apply to the optics file.
pub fn render(common: &Common, scene: &Path, optics: &Path) -> CliResult {
    require(scene)?;
    require(optics)?;
    if common.config.is_some() {
        return Err(LfError::config("render reads optics from its second argument, not --config").into());
    }
    let out = require_out(common)?;
    let optics: OpticsConfig = load_config(default_optics(), Some(optics), &common.set)?;
    optics.validate()?;
    let scene = SceneSpec::load_json(scene)?;
    let lf = render_lf(&scene, &optics)?;
    write_scene(out, &lf)?;
    println!("rendered {} -> {}", lf.dims(), out.display());
    Ok(())
}

fn default_optics() -> OpticsConfig {
    OpticsConfig {
        z0: 10.0,
        baseline: 1.0,
        pixel_pitch: 1.0,
        angular: [5, 5],
        spatial: [64, 64],
    }
}

// ---- make-dataset ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneFormat {
    Lf4d,
    Png,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub count: usize,
    pub optics: OpticsConfig,
    pub scene: RandomSceneParams,
    pub format: SceneFormat,
    /// Scene `k` uses seed `seed + k`.
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 8,
            optics: default_optics(),
            scene: RandomSceneParams::default(),
            format: SceneFormat::Lf4d,
            seed: 0,
        }
    }
}

pub fn make_dataset(common: &Common) -> CliResult {
    let mut cfg: DatasetConfig = load_config(DatasetConfig::default(), common.config.as_deref(), &common.set)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.optics.validate()?;
    let out = require_out(common)?;
    create_dir(out)?;
    let mut scenes = Vec::with_capacity(cfg.count);
    for k in 0..cfg.count {
        let scene = random_scene(&cfg.optics, &cfg.scene, cfg.seed.wrapping_add(k as u64))?;
        let lf = render_lf(&scene, &cfg.optics)?;
        let name = match cfg.format {
            SceneFormat::Lf4d => format!("scene_{k:04}.lf4d"),
            SceneFormat::Png => format!("scene_{k:04}"),
        };
        write_scene(&out.join(&name), &lf)?;
        scenes.push(PathBuf::from(name));
    }
    DatasetManifest { scenes }.save(&out.join("manifest.json"))?;
    write_text(&out.join("dataset.json"), &to_json(&cfg))?;
    println!("wrote {} scenes to {}", cfg.count, out.display());
    Ok(())
}

// ---- train -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRun {
    /// Dataset manifest; relative paths resolve against the working directory.
    pub dataset: PathBuf,
    pub validation: Option<PathBuf>,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset/manifest.json"),
            validation: None,
            network: NetworkConfig::ssr(2, 5),
            train: TrainConfig::ssr(2),
        }
    }
}

pub fn train_cmd(common: &Common) -> CliResult {
    let mut run: TrainRun = load_config(TrainRun::default(), common.config.as_deref(), &common.set)?;
    if let Some(s) = common.seed {
        run.train.seed = s;
    }
    run.network.validate()?;
    run.train.validate()?;
    if run.network.task != run.train.task || (run.train.task == Task::Ssr && run.network.scale != run.train.scale) {
        return Err(LfError::config("network and train sections disagree on task or scale").into());
    }
    require(&run.dataset)?;
    if let Some(v) = &run.validation {
        require(v)?;
    }
    let out = require_out(common)?;
    create_dir(out)?;
    write_text(&out.join("config.json"), &to_json(&run))?;

    let scenes: Vec<_> = DatasetManifest::load_scenes(&run.dataset)?.into_iter().map(|(_, lf)| lf).collect();
    let pairs = run.train.make_pairs(&scenes)?;
    let val = match &run.validation {
        Some(v) => {
            let s: Vec<_> = DatasetManifest::load_scenes(v)?.into_iter().map(|(_, lf)| lf).collect();
            run.train.make_pairs(&s)?
        }
        None => Vec::new(),
    };
    let mut net = Network::<f32>::new(run.network.clone(), run.train.seed)?;
    let report = train(&mut net, &pairs, &val, &run.train, Some(out))?;
    let last = out.join("final.lfck");
    net.save(&last)?;
    println!(
        "trained {} steps on {} pairs; final loss {:.5}; checkpoint {}",
        report.steps.len(),
        pairs.len(),
        report.final_loss().unwrap_or(f64::NAN),
        last.display()
    );
    Ok(())
}

// ---- eval ------------------------------------------------------------------

/// `bicubic` or `bicubic:<scale>` selects the interpolation baseline instead
/// of a checkpoint.
fn load_predictor(spec: &str) -> Result<(Box<dyn Predictor>, EvalProtocol)> {
    if let Some(rest) = spec.strip_prefix("bicubic") {
        let scale = match rest.strip_prefix(':') {
            Some(s) => s.parse().map_err(|_| LfError::config(format!("bad bicubic scale `{s}`")))?,
            None if rest.is_empty() => 2,
            None => return Err(LfError::config(format!("unknown model `{spec}`"))),
        };
        return Ok((Box::new(Bicubic(scale)), EvalProtocol::ssr(scale)));
    }
    let path = Path::new(spec);
    require(path)?;
    let net = Network::<f32>::load(path)?;
    let proto = match net.config().task {
        Task::Ssr => EvalProtocol::ssr(net.config().scale),
        Task::Asr => EvalProtocol::asr(),
    };
    Ok((Box::new(net), proto))
}

pub fn eval(common: &Common, model: &str, dataset: &Path) -> CliResult {
    require(dataset)?;
    let (predictor, default_proto) = load_predictor(model)?;
    let proto: EvalProtocol = load_config(default_proto, common.config.as_deref(), &common.set)?;
    if let Some(t) = proto.tiling {
        t.validate()?;
    }
    let out = common.out.as_deref().map(|_| require_out(common)).transpose()?;
    let scenes = DatasetManifest::load_scenes(dataset)?;
    let report = evaluate(predictor.as_ref(), &scenes, &proto)?;
    match out {
        Some(p) => {
            report.write_csv(p)?;
            println!("psnr {:.4} ssim {:.6} over {} scenes -> {}", report.psnr, report.ssim, report.scenes.len(), p.display());
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

// ---- sr --------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrConfig {
    /// `null` runs each light field in one pass.
    pub tiling: Option<Tiling>,
    pub batch: usize,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            tiling: Some(Tiling::default()),
            batch: 4,
        }
    }
}

fn channel(lf: &LightField4D, c: usize) -> Result<LightField4D> {
    let d = lf.dims();
    LightField4D::from_fn(d.with_channels(1), |_, u, v, y, x| lf.get(c, u, v, y, x))
}

/// Runs `net` on every channel separately when it was trained on one.
fn super_resolve(net: &Network<f32>, lf: &LightField4D, cfg: &SrConfig) -> Result<LightField4D> {
    let run = |x: &LightField4D| match cfg.tiling {
        Some(t) => predict_tiled(net, x, t, cfg.batch),
        None => net.predict(std::slice::from_ref(x))?.pop().ok_or_else(|| LfError::invalid("no prediction")),
    };
    let ci = net.config().image_channels;
    let d = lf.dims();
    if d.c == ci {
        return run(lf);
    }
    if ci != 1 {
        return Err(LfError::shape(format!("network expects {ci} channels, input has {}", d.c)));
    }
    let outs = (0..d.c).map(|c| run(&channel(lf, c)?)).collect::<Result<Vec<_>>>()?;
    let od = outs[0].dims();
    LightField4D::from_fn(LfDims { c: d.c, ..od }, |c, u, v, y, x| outs[c].get(0, u, v, y, x))
}

pub fn sr(common: &Common, checkpoint: &Path, input: &Path) -> CliResult {
    require(checkpoint)?;
    require(input)?;
    let cfg: SrConfig = load_config(SrConfig::default(), common.config.as_deref(), &common.set)?;
    if let Some(t) = cfg.tiling {
        t.validate()?;
    }
    let out = require_out(common)?;
    let net = Network::<f32>::load(checkpoint)?;
    let lf = io::load_scene(input)?;
    let pred = super_resolve(&net, &lf, &cfg)?;
    write_scene(out, &pred)?;
    println!("{} -> {} ({})", lf.dims(), pred.dims(), out.display());
    Ok(())
}

// ---- inspect ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub u: usize,
    pub v: usize,
    pub y: usize,
    pub x: usize,
}

/// All views tiled `U × V`, view `(u, v)` at block row `u`, block column `v`.
pub fn sai_grid(lf: &LightField4D) -> Plane {
    let d = lf.dims();
    Plane::from_fn(d.u * d.y, d.v * d.x, |r, c| lf.get(0, r / d.y, c / d.x, r % d.y, c % d.x))
}

pub fn inspect(common: &Common, input: &Path, at: [Option<usize>; 4]) -> CliResult {
    no_config(common, "inspect")?;
    require(input)?;
    let out = require_out(common)?;
    let lf = io::load_scene(input)?;
    let lf = if lf.dims().c == 1 { lf } else { to_luma(&lf)? };
    let d = lf.dims();
    let pick = |v: Option<usize>, n: usize, name: &str| -> Result<usize> {
        let i = v.unwrap_or(n / 2);
        if i >= n {
            return Err(LfError::invalid(format!("--{name} {i} out of range (size {n})")));
        }
        Ok(i)
    };
    let s = Slice {
        u: pick(at[0], d.u, "u")?,
        v: pick(at[1], d.v, "v")?,
        y: pick(at[2], d.y, "y")?,
        x: pick(at[3], d.x, "x")?,
    };
    create_dir(out)?;
    let mut panels = vec![("sai_grid", sai_grid(&lf)), ("macpi", to_macpi_image(&lf, 0)?)];
    for (id, batch) in [
        (SubspaceId::EpiUx, s.v * d.y + s.y),
        (SubspaceId::EpiVy, s.u * d.x + s.x),
        (SubspaceId::VsiVx, s.u * d.y + s.y),
        (SubspaceId::VsiUy, s.v * d.x + s.x),
    ] {
        let name = match id {
            SubspaceId::EpiUx => "epi_ux",
            SubspaceId::EpiVy => "epi_vy",
            SubspaceId::VsiVx => "vsi_vx",
            _ => "vsi_uy",
        };
        panels.push((name, subspace_view(&lf, id).plane(0, batch)));
    }
    let mut slopes = serde_json::Map::new();
    for (name, p) in &panels {
        io::write_png_gray8(&out.join(format!("{name}.png")), p)?;
        if name.starts_with("epi") {
            let slope = fit_epi_slope(p).ok().filter(|v| v.is_finite());
            slopes.insert(name.to_string(), serde_json::json!(slope));
        }
    }
    let meta = serde_json::json!({ "dims": d, "slice": s, "epi_slopes": slopes });
    write_text(&out.join("slices.json"), &to_json(&meta))?;
    println!("wrote {} panels for {} at {:?} -> {}", panels.len(), d, s, out.display());
    Ok(())
}

// ---- gradcheck -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckRun {
    pub seeds: Vec<u64>,
    pub network: NetworkConfig,
    pub spatial: usize,
    /// Probed entries per tensor of the network check; `null` = all.
    pub max_entries: Option<usize>,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckRun {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            network: NetworkConfig::ssr(2, 2).toy(8, 1, 1),
            spatial: 6,
            max_entries: Some(16),
            step: 1e-5,
            tolerance: 1e-4,
        }
    }
}

pub fn gradcheck(common: &Common) -> CliResult {
    let mut run: GradcheckRun = load_config(GradcheckRun::default(), common.config.as_deref(), &common.set)?;
    if let Some(s) = common.seed {
        run.seeds = vec![s];
    }
    run.network.validate()?;
    let out = common.out.as_deref().map(|_| require_out(common)).transpose()?;
    let mut csv = String::from("seed,check,max_rel_error,worst_input,worst_index\n");
    let mut failures = Vec::new();
    for &seed in &run.seeds {
        let cfg = GradCheckConfig {
            step: run.step,
            seed,
            ..Default::default()
        };
        let mut reports = run_op_suite(seed, &cfg)?
            .into_iter()
            .map(|(n, r)| (n.to_string(), r))
            .collect::<Vec<_>>();
        let net_cfg = GradCheckConfig {
            max_entries: run.max_entries,
            ..cfg
        };
        reports.push(("network".into(), network_gradcheck(&run.network, run.spatial, seed, &net_cfg)?));
        for (name, r) in reports {
            let _ = writeln!(csv, "{seed},{name},{:e},{},{}", r.max_rel_error, r.worst.0, r.worst.1);
            println!("seed {seed:3} {name:14} {:.2e}", r.max_rel_error);
            if !(r.max_rel_error < run.tolerance) {
                failures.push(format!("{name}@{seed}"));
            }
        }
    }
    if let Some(p) = out {
        write_text(p, &csv)?;
    }
    if !failures.is_empty() {
        return Err(CliError::Check(format!("gradient check above {:e}: {}", run.tolerance, failures.join(" "))));
    }
    Ok(())
}

// ---- maskdump --------------------------------------------------------------

pub fn parse_d_max(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| LfError::config(format!("d_max `{s}` is not a number or `inf`"))),
    }
}

/// Rows are query tokens `a·L + p`; `1` = admitted.
pub fn mask_csv(s: usize, l: usize, d_max: f64) -> Result<(String, Plane)> {
    let m = build_xmask::<f64>(s, l, d_max)?;
    let n = s * l;
    let plane = Plane::from_fn(n, n, |q, k| if m.data()[q * n + k] == 0.0 { 1.0 } else { 0.0 });
    let mut csv = String::new();
    for q in 0..n {
        let row: Vec<&str> = (0..n).map(|k| if plane.get(q, k) > 0.5 { "1" } else { "0" }).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok((csv, plane))
}

pub fn maskdump(common: &Common, s: usize, l: usize, d_max: &str) -> CliResult {
    no_config(common, "maskdump")?;
    let d = parse_d_max(d_max)?;
    let out = require_out(common)?;
    create_dir(out)?;
    let (csv, plane) = mask_csv(s, l, d)?;
    write_text(&out.join("mask.csv"), &csv)?;
    io::write_png_gray8(&out.join("mask.png"), &plane)?;
    let admitted = plane.data().iter().filter(|&&v| v > 0.5).count();
    println!("S={s} L={l} d_max={d}: {admitted} of {} pairs admitted -> {}", plane.data().len(), out.display());
    Ok(())
}
