use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixspec2d::experiments::{run_experiment, trial_seed, ExperimentConfig, MANIFEST_JSON};
use mixspec2d::io::{
    peaks_csv, read_grid, write_grid, write_grid_csv, write_periodogram, EstimateDoc,
};
use mixspec2d::selector::DEFAULT_XI_MARGIN;
use mixspec2d::{
    lse_estimate, periodogram, select_order, synthesize, top_peaks, xi_threshold, Error,
    MaCoefficients, RefineOptions,
};

#[derive(Parser)]
#[command(name = "mixspec2d", version, about = "Sinusoids in colored 2-D noise")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw one observation and its noise field from an experiment config.
    Synth(SynthArgs),
    /// Scaled periodogram of a grid file and its top peaks.
    Periodogram(PeriodogramArgs),
    /// Least-squares fit of a fixed number of sinusoids.
    Estimate(EstimateArgs),
    /// Penalized order selection.
    Select(SelectArgs),
    /// Monte Carlo run of an experiment config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    /// Index into the config's sizes.
    #[arg(long, default_value_t = 0)]
    size_index: usize,
    /// Field seed; defaults to the seed of trial 0 at the chosen size.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    format: Format,
}

#[derive(Args)]
struct PeriodogramArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    pad: usize,
    /// Number of peaks listed in peaks.csv.
    #[arg(long, default_value_t = 5)]
    peaks: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long, default_value_t = 4)]
    pad: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 8)]
    q_max: usize,
    /// Penalty weight, or `auto` for the threshold of the `--ma` noise model.
    #[arg(long)]
    xi: String,
    /// Noise coefficients (JSON) used by `--xi auto`.
    #[arg(long)]
    ma: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_XI_MARGIN)]
    margin: f64,
    #[arg(long, default_value_t = 4)]
    pad: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::InvalidModel(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        _ => 1,
    }
}

fn out_dir(dir: &Path) -> mixspec2d::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn synth(a: SynthArgs) -> mixspec2d::Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let &(rows, cols) = cfg
        .sizes
        .get(a.size_index)
        .ok_or_else(|| Error::Config(format!("size index {} out of range", a.size_index)))?;
    let seed = a
        .seed
        .unwrap_or_else(|| trial_seed(cfg.innovation.master_seed, a.size_index, 0));
    out_dir(&a.out_dir)?;
    let real = synthesize(
        &cfg.truth,
        &cfg.noise_model()?,
        cfg.innovation.distribution,
        seed,
        rows,
        cols,
    )?;
    match a.format {
        Format::Bin => {
            write_grid(&a.out_dir.join("y.bin"), &real.y)?;
            write_grid(&a.out_dir.join("noise.bin"), &real.noise)?;
        }
        Format::Csv => {
            write_grid_csv(&a.out_dir.join("y.csv"), &real.y)?;
            write_grid_csv(&a.out_dir.join("noise.csv"), &real.noise)?;
        }
    }
    println!("{rows}x{cols} seed {seed}");
    Ok(())
}

fn periodogram_cmd(a: PeriodogramArgs) -> mixspec2d::Result<()> {
    let y = read_grid(&a.input)?;
    let pg = periodogram(&y, a.pad)?;
    out_dir(&a.out_dir)?;
    write_periodogram(&a.out_dir.join("periodogram.bin"), &pg)?;
    let peaks = top_peaks(&pg, a.peaks, &[], 0.0);
    std::fs::write(a.out_dir.join("peaks.csv"), peaks_csv(&peaks))?;
    print!("{}", peaks_csv(&peaks));
    Ok(())
}

fn estimate(a: EstimateArgs) -> mixspec2d::Result<()> {
    let y = read_grid(&a.input)?;
    let opts = RefineOptions {
        pad_factor: a.pad,
        k_max: a.order.max(RefineOptions::default().k_max),
        ..Default::default()
    };
    let r = lse_estimate(&y, a.order, &opts)?;
    out_dir(&a.out_dir)?;
    let doc = serde_json::to_string_pretty(&EstimateDoc::new(a.order, &r))? + "\n";
    std::fs::write(a.out_dir.join("estimate.json"), &doc)?;
    print!("{doc}");
    Ok(())
}

fn select(a: SelectArgs) -> mixspec2d::Result<()> {
    let xi = if a.xi == "auto" {
        let path =
            a.ma.as_ref()
                .ok_or_else(|| Error::Config("--xi auto needs --ma".into()))?;
        let ma: MaCoefficients = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        xi_threshold(&ma, a.margin)?
    } else {
        a.xi.parse::<f64>()
            .map_err(|_| Error::Config(format!("--xi {:?} is neither a number nor auto", a.xi)))?
    };
    let y = read_grid(&a.input)?;
    let opts = RefineOptions {
        pad_factor: a.pad,
        k_max: a
            .q_max
            .saturating_sub(1)
            .max(RefineOptions::default().k_max),
        ..Default::default()
    };
    let r = select_order(&y, a.q_max, xi, &opts)?;
    out_dir(&a.out_dir)?;
    std::fs::write(
        a.out_dir.join("selection.json"),
        serde_json::to_string_pretty(&r)? + "\n",
    )?;
    std::fs::write(a.out_dir.join("selection.csv"), r.to_csv())?;
    println!("selected order {} (xi = {xi})", r.selected);
    if let Some(f) = &r.failure {
        eprintln!("warning: {f}");
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> mixspec2d::Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.innovation.master_seed = seed;
    }
    let dir = a
        .out_dir
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out-dir".into()))?;
    let summary = run_experiment(&cfg, &dir)?;
    for agg in &summary.aggregates {
        let mut line = format!("{}x{}: {} trials", agg.rows, agg.cols, agg.trials);
        if let Some(f) = agg.frac_selected_p {
            line += &format!(", selected P in {:.1}%", 100.0 * f);
        }
        if let Some(s) = agg.median_sup {
            line += &format!(", median sup {s:.4e}");
        }
        println!("{line}");
    }
    println!("wrote {}", dir.join(MANIFEST_JSON).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Periodogram(a) => periodogram_cmd(a),
        Cmd::Estimate(a) => estimate(a),
        Cmd::Select(a) => select(a),
        Cmd::Experiment(a) => experiment(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
