use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use phaselink::noisefloor::{published_points, write_models_csv, write_points_csv};
use phaselink::pipeline::{export_histograms, export_scatter, read_coefficient_maps};
use phaselink::stack::write_ground_truth;
use phaselink::{
    fit_rational, process_stack, render_scene, simulate_noise_points, Error, Method, NoiseRunConfig, RunConfig,
    SceneSpec, SlcStack,
};

#[derive(Parser)]
#[command(name = "phaselink", version, about = "Phase linking for distributed-scatterer InSAR stacks")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic stack and its ground-truth sidecar.
    Simulate(SimulateArgs),
    /// Estimate the noise floor of the normalized fit and fit the rational model.
    Noisefloor(NoiseArgs),
    /// Link phases and compute quality maps for every pixel of a stack.
    Link(LinkArgs),
    /// Histograms and scatter samples of the coefficient maps of a `link` run.
    Histogram(HistogramArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Header of the stack to write; samples go next to it with extension `raw`.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth CSV [default: OUT with extension `truth.csv`].
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Scene description (TOML). Without it a three-strip demo scene is rendered.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 20)]
    acquisitions: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct NoiseArgs {
    /// Stack sizes N.
    #[arg(long, value_delimiter = ',', default_values_t = (20..=95).step_by(5).collect::<Vec<usize>>())]
    sizes: Vec<usize>,
    /// Samples per coherence estimate.
    #[arg(long, default_value_t = 10_000)]
    ensemble_size: usize,
    /// Independent ensembles per stack size.
    #[arg(long, default_value_t = 200)]
    ensembles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Fit the built-in reference table instead of simulating.
    #[arg(long)]
    published: bool,
    /// Noise points CSV.
    #[arg(long, default_value = "noise_points.csv")]
    points_out: PathBuf,
    /// Fitted model CSV.
    #[arg(long, default_value = "noise_models.csv")]
    fit_out: PathBuf,
}

#[derive(Args)]
struct LinkArgs {
    /// Stack header.
    #[arg(long)]
    stack: PathBuf,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// e.g. pt-ml,pt-cw,pt-ew,ed-ml,ed-cw,ed-ew
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    shp_alpha: Option<f64>,
    #[arg(long)]
    shp_min: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    reference: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Skip secondary solutions and the ambiguity coefficient.
    #[arg(long)]
    no_ambiguity: bool,
    /// Fitted noise-floor models (CSV from `noisefloor`).
    #[arg(long)]
    noise_models: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct HistogramArgs {
    /// Output directory of a `link` run.
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Histogram CSV; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Optional (gamma_gof, gamma_amb) scatter CSV.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Noisefloor(a) => noisefloor(a),
        Command::Link(a) => run_link(a),
        Command::Histogram(a) => histogram(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad user input, 2 for I/O and malformed files, 3 for anything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format(_) => 2,
        Error::Ensemble { source, .. } => exit_code(source),
        Error::InvalidConfig(_)
        | Error::InvalidBeta(_)
        | Error::InvalidInput(_)
        | Error::IndexOutOfRange { .. }
        | Error::TooFewAcquisitions { .. }
        | Error::UnknownMethodScheme(_)
        | Error::RegionGapOrOverlap
        | Error::NotPsd
        | Error::DimensionMismatch { .. } => 1,
        _ => 3,
    }
}

fn read_text(path: &Path) -> phaselink::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> phaselink::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn simulate(a: SimulateArgs) -> phaselink::Result<()> {
    let spec = match &a.scene {
        Some(path) => toml::from_str::<SceneSpec>(&read_text(path)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
        None => SceneSpec::three_strips(a.width, a.height, a.acquisitions, a.seed),
    };
    let (stack, truth) = render_scene(&spec)?;
    stack.write(&a.out)?;
    let truth_path = a.truth.unwrap_or_else(|| a.out.with_extension("truth.csv"));
    write_ground_truth(&truth_path, &truth)?;
    info!("wrote {} and {}", a.out.display(), truth_path.display());
    Ok(())
}

fn global_threads(threads: usize) {
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
}

fn noisefloor(a: NoiseArgs) -> phaselink::Result<()> {
    let methods = a.methods.unwrap_or_else(|| Method::ALL.to_vec());
    let points = if a.published {
        methods
            .iter()
            .map(|&m| published_points(m))
            .collect::<phaselink::Result<Vec<_>>>()?
            .concat()
    } else {
        global_threads(a.threads);
        let cfg = NoiseRunConfig {
            stack_sizes: a.sizes,
            ensemble_size: a.ensemble_size,
            n_ensembles: a.ensembles,
            seed: a.seed,
            methods: methods.clone(),
            beta: a.beta,
        };
        simulate_noise_points(&cfg)?
    };
    write_points_csv(&points, create(&a.points_out)?)?;

    let mut models = Vec::new();
    for m in &methods {
        let own: Vec<_> = points.iter().filter(|p| p.method == *m).copied().collect();
        match fit_rational(&own) {
            Ok(model) => models.push(model),
            Err(Error::TooFewPoints { got, .. }) => log::warn!("{m}: {got} stack sizes are too few to fit"),
            Err(e) => return Err(e),
        }
    }
    write_models_csv(&models, create(&a.fit_out)?)?;
    Ok(())
}

fn run_link(a: LinkArgs) -> phaselink::Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_toml(&read_text(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.window {
        cfg.window = v;
    }
    if let Some(v) = a.shp_alpha {
        cfg.shp_alpha = v;
    }
    if let Some(v) = a.shp_min {
        cfg.shp_min = v;
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.reference {
        cfg.reference = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    if a.no_ambiguity {
        cfg.ambiguity = false;
    }
    if a.noise_models.is_some() {
        cfg.noise_models = a.noise_models;
    }

    let stack = SlcStack::read(&a.stack)?;
    cfg.validate(stack.n_acquisitions())?;
    let out = process_stack(&stack, &cfg)?;
    out.write(&a.out_dir)?;
    let rejected = out.rejected.iter().filter(|&&r| r != 0).count();
    let failed = out.errors.iter().filter(|&&e| e != 0).count();
    info!("{} pixels, {rejected} rejected, {failed} with errors", out.rejected.len());
    if failed > 0 {
        log::warn!("{failed} pixels recorded errors, see errors.u8");
    }
    Ok(())
}

fn histogram(a: HistogramArgs) -> phaselink::Result<()> {
    let maps = read_coefficient_maps(&a.run_dir)?;
    if a.out == Path::new("-") {
        export_histograms(&maps, a.bins, io::stdout().lock())?;
    } else {
        let mut w = create(&a.out)?;
        export_histograms(&maps, a.bins, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.scatter {
        export_scatter(&maps, create(path)?)?;
    }
    Ok(())
}
