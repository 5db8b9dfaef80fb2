use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shellsplat::pipeline::{self, Ablation, RunConfig};

#[derive(Parser)]
#[command(name = "shellsplat", version, about = "Two-shell Gaussian splatting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Scale alignment, distance maps, threshold selection, masks.
    Prepare,
    /// Stage 1: background shell.
    TrainBackground,
    /// Stage 2: foreground over the frozen background.
    TrainForeground,
    /// Cube map and equirect image of the background.
    Envmap,
    /// PSNR/SSIM on the held-out views.
    Eval,
    /// Every step in order.
    All,
}

#[derive(ValueEnum, Clone, Copy)]
enum AblateArg {
    NoShell,
    NoPlanarity,
    DistanceInit,
}

impl From<AblateArg> for Ablation {
    fn from(a: AblateArg) -> Self {
        match a {
            AblateArg::NoShell => Ablation::NoShell,
            AblateArg::NoPlanarity => Ablation::NoPlanarity,
            AblateArg::DistanceInit => Ablation::DistanceInit,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Scene directory holding colmap/, images/ and depths/.
    #[arg(long, global = true, default_value = ".")]
    scene: PathBuf,
    #[arg(long, global = true, default_value = "output")]
    out: PathBuf,
    /// key=value run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    r_inner: Option<f64>,
    #[arg(long, global = true)]
    r_outer: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Icosphere subdivision level.
    #[arg(long, global = true)]
    level: Option<u32>,
    #[arg(long, global = true)]
    iters1: Option<usize>,
    #[arg(long, global = true)]
    iters2: Option<usize>,
    #[arg(long, global = true)]
    lambda_shell: Option<f64>,
    #[arg(long, global = true)]
    lambda_planarity: Option<f64>,
    #[arg(long, global = true, value_enum)]
    ablate: Vec<AblateArg>,
    /// Port of the threshold-selection service.
    #[arg(long, global = true)]
    port: Option<u16>,
    /// z or ray.
    #[arg(long, global = true)]
    depth_convention: Option<String>,
    #[arg(long, global = true)]
    face_res: Option<usize>,
}

fn build_config(c: &Common) -> shellsplat::Result<RunConfig> {
    let mut cfg = RunConfig::for_scene(&c.scene, &c.out);
    if let Some(path) = &c.config {
        cfg.load_file(path)?;
    }
    if let Some(v) = c.r_inner {
        cfg.r_inner = Some(v);
    }
    if let Some(v) = c.r_outer {
        cfg.r_outer = Some(v);
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.level {
        cfg.level = v;
    }
    if let Some(v) = c.iters1 {
        cfg.stage1.iterations = v;
    }
    if let Some(v) = c.iters2 {
        cfg.stage2.iterations = v;
    }
    if let Some(v) = c.lambda_shell {
        cfg.stage1.lambda_shell = v;
    }
    if let Some(v) = c.lambda_planarity {
        cfg.stage1.lambda_planarity = v;
    }
    if !c.ablate.is_empty() {
        cfg.ablations = c.ablate.iter().map(|&a| a.into()).collect();
    }
    if let Some(v) = c.port {
        cfg.port = v;
    }
    if let Some(v) = &c.depth_convention {
        cfg.depth_convention = v.parse()?;
    }
    if let Some(v) = c.face_res {
        cfg.face_res = v;
    }
    cfg.stage1.log_interval = 100;
    cfg.stage2.log_interval = 100;
    Ok(cfg)
}

fn run(cli: &Cli) -> shellsplat::Result<()> {
    let cfg = build_config(&cli.common)?;
    match cli.command {
        Command::Prepare => {
            let p = pipeline::cmd_prepare(&cfg)?;
            println!(
                "r_inner={} r_outer={} foreground points={} test views={}",
                p.params.r_inner,
                p.params.r_outer,
                p.foreground_points,
                p.split.test.len()
            );
        }
        Command::TrainBackground => {
            let o = pipeline::cmd_train_background(&cfg)?;
            println!("background: {} Gaussians after {} iterations", o.cloud.len(), o.iterations);
        }
        Command::TrainForeground => {
            let o = pipeline::cmd_train_foreground(&cfg)?;
            println!("foreground: {} Gaussians after {} iterations", o.cloud.len(), o.iterations);
        }
        Command::Envmap => {
            let cube = pipeline::cmd_envmap(&cfg)?;
            println!("envmap: {} hole pixels", cube.hole_count());
        }
        Command::Eval => {
            let r = pipeline::cmd_eval(&cfg)?;
            print!("{}", r.to_csv());
        }
        Command::All => {
            let s = pipeline::cmd_all(&cfg)?;
            print!("{}", s.report.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
