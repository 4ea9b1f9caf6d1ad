//! `colocov` command line: generate worlds and trajectories, render depth,
//! compute coverage, warp frames, evaluate depth estimates, export datasets.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use colocov_core::camera::CameraIntrinsics;
use colocov_core::coverage::{segment_coverage, CoverageParams};
use colocov_core::dataset::{export_dataset, verify_manifest, ExportConfig};
use colocov_core::gen::{generate_colon, generate_trajectory, ColonGenSpec, TrajectorySpec};
use colocov_core::io;
use colocov_core::metrics::{auto_epsilon, evaluate};
use colocov_core::render::Renderer;
use colocov_core::view_synthesis::{synthesize_view, view_synthesis_loss, RigidTransform};

#[derive(Parser)]
#[command(name = "colocov", about = "Synthetic colonoscopy coverage toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a colon world and a camera trajectory.
    Generate(GenerateArgs),
    /// Compute segment coverage for a world and trajectory.
    Coverage(CoverageArgs),
    /// Warp an RGB+depth frame through a relative pose and report the loss.
    Warp(WarpArgs),
    /// Evaluate predicted depth images against ground truth.
    EvalDepth(EvalDepthArgs),
    /// Export a labeled segment dataset.
    Export(ExportArgs),
    /// Re-hash an exported dataset against its manifest.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory duration in seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 30)]
    fps: u32,
    /// Centerline length (world units; 1 unit = 1 cm).
    #[arg(long, default_value_t = 60.0)]
    length: f64,
    #[arg(long, default_value_t = 2.5)]
    radius: f64,
    #[arg(long, default_value_t = 0.4)]
    fold_amplitude: f64,
    #[arg(long, default_value_t = 20)]
    fold_count: u32,
    #[arg(long, default_value_t = 4.0)]
    bend_amplitude: f64,
    #[arg(long, default_value_t = 192)]
    axial_segments: u32,
    #[arg(long, default_value_t = 32)]
    radial_segments: u32,
    /// Start of the pullback as a fraction of the centerline length.
    #[arg(long, default_value_t = 0.9)]
    start_frac: f64,
    /// End of the pullback as a fraction of the centerline length.
    #[arg(long, default_value_t = 0.1)]
    end_frac: f64,
    #[arg(long, default_value_t = 0.25)]
    position_jitter: f64,
    #[arg(long, default_value_t = 8.0)]
    orientation_jitter_deg: f64,
    #[arg(long, default_value_t = 1.0)]
    jitter_smoothness_hz: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write a binary copy of the geometry.
    #[arg(long, default_value_t = false)]
    binary: bool,
}

#[derive(Args)]
struct CoverageArgs {
    /// Mesh file (`.ccvw` binary or `v/f` text).
    #[arg(long)]
    world: PathBuf,
    /// Lumen file (`.ccvw` binary or `l` text).
    #[arg(long)]
    lumen: PathBuf,
    /// Trajectory file.
    #[arg(long)]
    trajectory: PathBuf,
    /// Intrinsics file; defaults to the wide-angle endoscope camera.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    #[arg(long, default_value_t = 4.0)]
    delta1: f64,
    #[arg(long, default_value_t = 0.005)]
    depth_tol: f64,
    /// Optional path for the text report (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WarpArgs {
    /// Source RGB image (`.ccri`).
    #[arg(long)]
    rgb: PathBuf,
    /// Source depth image (`.ccdi`).
    #[arg(long)]
    depth: PathBuf,
    /// Intrinsics file.
    #[arg(long)]
    intrinsics: PathBuf,
    /// Two-line trajectory file; the warp goes from the first pose's frame
    /// to the second's.
    #[arg(long)]
    pose: PathBuf,
    /// Where to write the synthesized RGB (`.ccri`).
    #[arg(long)]
    out_rgb: Option<PathBuf>,
    /// Where to write the synthesized depth (`.ccdi`).
    #[arg(long)]
    out_depth: Option<PathBuf>,
    /// Reference RGB of the target frame; enables the loss report.
    #[arg(long)]
    reference_rgb: Option<PathBuf>,
    /// Reference depth of the target frame.
    #[arg(long)]
    reference_depth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.85)]
    ssim_weight: f64,
}

#[derive(Args)]
struct EvalDepthArgs {
    /// Directory of predicted `.ccdi` files.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth `.ccdi` files (matched by file name).
    #[arg(long)]
    gt: PathBuf,
    /// Comma-separated subset of mre,drmre,dom.
    #[arg(long, default_value = "mre,drmre,dom")]
    metrics: String,
    /// Denominator floor; `auto` for 1e-3 x median ground truth.
    #[arg(long, default_value = "auto")]
    epsilon: String,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, default_value_t = 5)]
    worlds: usize,
    #[arg(long, default_value_t = 120)]
    segments_per_world: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    fps: u32,
    #[arg(long, default_value_t = 10.0)]
    segment_seconds: f64,
    /// Write every n-th depth frame per segment.
    #[arg(long, default_value_t = 1)]
    depth_stride: usize,
    #[arg(long, default_value_t = 384)]
    width: u32,
    #[arg(long, default_value_t = 320)]
    height: u32,
    #[arg(long, default_value_t = 120.0)]
    hfov_deg: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Dataset root containing `manifest.txt`.
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Coverage(args) => coverage(args),
        Command::Warp(args) => warp(args),
        Command::EvalDepth(args) => eval_depth(args),
        Command::Export(args) => export(args),
        Command::Verify(args) => verify(args),
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let colon_spec = ColonGenSpec {
        seed: args.seed,
        length: args.length,
        base_radius: args.radius,
        fold_amplitude: args.fold_amplitude,
        fold_count: args.fold_count,
        bend_amplitude: args.bend_amplitude,
        axial_segments: args.axial_segments,
        radial_segments: args.radial_segments,
    };
    let world = generate_colon(&colon_spec)?;
    let total = world.lumen.total_length();
    let traj_spec = TrajectorySpec {
        seed: args.seed,
        duration_s: args.duration,
        fps: args.fps,
        start_arclen: total * args.start_frac,
        end_arclen: total * args.end_frac,
        position_jitter_amp: args.position_jitter,
        orientation_jitter_amp_deg: args.orientation_jitter_deg,
        jitter_smoothness_hz: args.jitter_smoothness_hz,
        monotonic: args.start_frac > args.end_frac,
    };
    let traj = generate_trajectory(&world, &traj_spec)?;

    std::fs::create_dir_all(&args.out)?;
    io::write_mesh_text(&args.out.join("mesh.txt"), &world.mesh)?;
    io::write_lumen_text(&args.out.join("lumen.txt"), &world.lumen)?;
    if args.binary {
        io::write_mesh_binary(&args.out.join("mesh.ccvw"), &world.mesh)?;
        io::write_lumen_binary(&args.out.join("lumen.ccvw"), &world.lumen)?;
    }
    io::write_trajectory(&args.out.join("trajectory.txt"), &traj)?;
    io::write_intrinsics(
        &args.out.join("intrinsics.txt"),
        &CameraIntrinsics::endoscope_default(),
    )?;
    println!(
        "world: {} vertices, {} faces, lumen length {:.2}",
        world.mesh.vertex_count(),
        world.mesh.face_count(),
        total
    );
    println!("trajectory: {} frames at {} fps -> {}", traj.len(), traj.fps, args.out.display());
    Ok(())
}

fn read_world(mesh_path: &PathBuf, lumen_path: &PathBuf) -> anyhow::Result<colocov_core::world::ColonWorld> {
    let mesh = if mesh_path.extension().is_some_and(|e| e == "ccvw") {
        io::read_mesh_binary(mesh_path)?
    } else {
        io::read_mesh_text(mesh_path)?
    };
    let lumen = if lumen_path.extension().is_some_and(|e| e == "ccvw") {
        io::read_lumen_binary(lumen_path)?
    } else {
        io::read_lumen_text(lumen_path)?
    };
    Ok(colocov_core::world::ColonWorld::new(mesh, lumen)?)
}

fn coverage(args: CoverageArgs) -> anyhow::Result<()> {
    let world = read_world(&args.world, &args.lumen)?;
    let traj = io::read_trajectory(&args.trajectory)?;
    let k = match &args.intrinsics {
        Some(path) => io::read_intrinsics(path)?,
        None => CameraIntrinsics::endoscope_default(),
    };
    let params = CoverageParams {
        delta0: args.delta0,
        delta1: args.delta1,
        depth_tol: args.depth_tol,
    };
    let renderer = Renderer::new(&world);
    let report = segment_coverage(&renderer, &traj, &k, &params)?;
    let text = io::encode_coverage_report(&report);
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn warp(args: WarpArgs) -> anyhow::Result<()> {
    let k = io::read_intrinsics(&args.intrinsics)?;
    let rgb = io::read_rgb(&args.rgb)?;
    let depth = io::read_depth(&args.depth, k)?;
    let poses = io::read_trajectory(&args.pose)?;
    if poses.len() < 2 {
        bail!("pose file must contain two frames (source, target)");
    }
    let xform = RigidTransform::between(&poses.poses[0], &poses.poses[1]);
    let (rgb_hat, depth_hat, mask) = synthesize_view(&rgb, &depth, &k, &xform)?;
    println!("valid fraction: {:.4}", mask.valid_fraction());
    if let Some(path) = &args.out_rgb {
        io::write_rgb(path, &rgb_hat)?;
    }
    if let Some(path) = &args.out_depth {
        io::write_depth(path, &depth_hat)?;
    }
    if let (Some(ref_rgb), Some(ref_depth)) = (&args.reference_rgb, &args.reference_depth) {
        let i_prev = io::read_rgb(ref_rgb)?;
        let d_prev = io::read_depth(ref_depth, k)?;
        let loss = view_synthesis_loss(&i_prev, &rgb_hat, &d_prev, &depth_hat, &mask, args.ssim_weight)?;
        println!("l1={:.6} ssim={:.6} depth_consistency={:.6} combined={:.6}",
            loss.l1, loss.ssim, loss.depth_consistency, loss.combined);
    }
    Ok(())
}

fn eval_depth(args: EvalDepthArgs) -> anyhow::Result<()> {
    let mut names: Vec<String> = std::fs::read_dir(&args.pred)
        .with_context(|| format!("reading {}", args.pred.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "ccdi"))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no .ccdi files under {}", args.pred.display());
    }
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for name in &names {
        preds.push(io::read_depth_nominal(&args.pred.join(name))?);
        gts.push(io::read_depth_nominal(&args.gt.join(name))?);
    }
    let epsilon = if args.epsilon == "auto" {
        auto_epsilon(&gts)
    } else {
        args.epsilon.parse().context("bad --epsilon")?
    };
    let report = evaluate(&preds, &gts, epsilon, args.pairs, args.seed)?;

    let wanted: Vec<&str> = args.metrics.split(',').map(|s| s.trim()).collect();
    let mut header = String::new();
    let mut row = String::new();
    for m in &wanted {
        match *m {
            "mre" => {
                header.push_str("MRE      ");
                row.push_str(&format!("{:<9.4}", report.mre));
            }
            "drmre" => {
                header.push_str("DR-MRE   ");
                row.push_str(&format!("{:<9.4}", report.dr_mre));
            }
            "dom" => {
                header.push_str("DOM      ");
                row.push_str(&format!("{:<9.4}", report.dom));
            }
            other => bail!("unknown metric {other:?}"),
        }
    }
    println!("{} images, epsilon={:.6}, sigma={:.6}", names.len(), report.epsilon, report.sigma);
    println!("{header}");
    println!("{row}");
    Ok(())
}

fn export(args: ExportArgs) -> anyhow::Result<()> {
    let mut cfg = ExportConfig::new(args.out.clone());
    cfg.n_worlds = args.worlds;
    cfg.segments_per_world = args.segments_per_world;
    cfg.seed = args.seed;
    cfg.fps = args.fps;
    cfg.segment_seconds = args.segment_seconds;
    cfg.depth_stride = args.depth_stride;
    cfg.camera = CameraIntrinsics::from_hfov(args.width, args.height, args.hfov_deg)?;
    let manifest = export_dataset(&cfg)?;
    println!(
        "exported {} files ({} segments) -> {}",
        manifest.entries.len(),
        args.worlds * args.segments_per_world,
        args.out.display()
    );
    Ok(())
}

fn verify(args: VerifyArgs) -> anyhow::Result<()> {
    let manifest = verify_manifest(&args.dir)?;
    println!("ok: {} files match the manifest", manifest.entries.len());
    Ok(())
}
