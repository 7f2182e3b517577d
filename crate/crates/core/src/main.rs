use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use noma_qoe::harness::{
    emit_chart, emit_csv, format_summary, read_trace, replay, run, summarize, sweep, write_trace, Settings,
    SweepSpec, Variable,
};
use noma_qoe::qoe::{
    cmf_fit, derive_profile, rank_top_k, read_sessions, synth_dataset, write_model, write_profiles,
    write_sessions, FeatureMatrix,
};
use noma_qoe::rng::{keyed_rng, Stream};
use noma_qoe::{Error, Result};

#[derive(Parser)]
#[command(name = "noma-qoe", version, about = "QoE-aware NOMA video streaming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `sim.seed` (the first seed of a sweep).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// `qoe_aware` or `baseline`; sweeps always run both.
    #[arg(long)]
    mode: Option<String>,
    /// Overrides `sched.omega`.
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// One simulation; writes trace.tsv and summary.csv.
    Run(Common),
    /// Sweep omega over `sweep.omega_grid`; writes sweep_omega.csv/.svg.
    SweepOmega(Common),
    /// Sweep bandwidth over `sweep.bandwidth_grid_hz`; writes sweep_bw.csv/.svg.
    SweepBw(Common),
    /// Synthetic session data; writes sessions.csv and profiles_truth.csv.
    GenData(Common),
    /// Rank factors, fit the QoE model and derive profiles; writes qoe_model.txt.
    FitQoe {
        #[command(flatten)]
        common: Common,
        /// Session CSV (default: <out-dir>/sessions.csv).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Recompute summary metrics from a trace file and print them.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
    },
}

fn settings(c: &Common) -> Result<Settings> {
    let mut s = match &c.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(seed) = c.seed {
        s.sim.seed = seed;
    }
    if let Some(m) = &c.mode {
        s.sim.sched.mode = m.parse()?;
    }
    if let Some(w) = c.omega {
        s.sim.sched.omega = w;
    }
    s.sim.validate()?;
    Ok(s)
}

fn out_dir(c: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&c.out_dir).map_err(|e| Error::io(&c.out_dir, e))?;
    Ok(&c.out_dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_run(c: &Common) -> Result<()> {
    let s = settings(c)?;
    let dir = out_dir(c)?;
    let m = run(&s.sim)?;
    write_trace(&m.trace, &dir.join("trace.tsv"))?;
    let summary = format_summary(&m.users, &m.aggregate, m.mean_objective);
    write(&dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_sweep(c: &Common, variable: Variable) -> Result<()> {
    let s = settings(c)?;
    let dir = out_dir(c)?;
    let (grid, stem) = match variable {
        Variable::Omega => (s.sweep.omega_grid.clone(), "sweep_omega"),
        Variable::Bandwidth => (s.sweep.bandwidth_grid_hz.clone(), "sweep_bw"),
    };
    let first = s.sim.seed;
    let spec = SweepSpec {
        variable,
        grid,
        seeds: (first..first + s.sweep.seeds as u64).collect(),
        base: s.sim,
    };
    let start = Instant::now();
    let rows = sweep(&spec)?;
    log::info!("{} runs in {:.1} s", rows.len(), start.elapsed().as_secs_f64());
    emit_csv(&rows, &dir.join(format!("{stem}.csv")))?;
    emit_chart(&rows, &dir.join(format!("{stem}.svg")))?;
    println!("{variable},mode,runs,mean_psnr_db,mean_stalls,mean_rate_bps");
    for p in summarize(&rows) {
        println!(
            "{},{},{},{:.4},{:.3},{:.0}",
            p.value, p.mode, p.runs, p.mean_psnr_db, p.mean_stalls, p.mean_rate_bps
        );
    }
    Ok(())
}

fn cmd_gen_data(c: &Common) -> Result<()> {
    let s = settings(c)?;
    let dir = out_dir(c)?;
    let mut rng = keyed_rng(s.sim.seed, Stream::Dataset, 0, 0);
    let data = synth_dataset(&mut rng, &s.data)?;
    write_sessions(&data.sessions, &dir.join("sessions.csv"))?;
    write_profiles(&data.truth, &dir.join("profiles_truth.csv"))?;
    println!(
        "{} sessions, {} users, {} services",
        data.sessions.rows.len(),
        data.qoe.n_users(),
        data.qoe.n_services()
    );
    Ok(())
}

/// User attribute columns among the top-ranked factors; all of them when
/// none made the cut.
fn select_user_features(xu: &FeatureMatrix, ranked: &[(String, f64)]) -> DMatrix<f64> {
    let mut cols: Vec<usize> = ranked.iter().filter_map(|(n, _)| xu.column_index(n)).collect();
    if cols.is_empty() {
        cols = (0..xu.names.len()).collect();
    }
    cols.sort_unstable();
    xu.values.select_columns(&cols)
}

fn cmd_fit_qoe(c: &Common, input: Option<&Path>) -> Result<()> {
    let s = settings(c)?;
    let dir = out_dir(c)?;
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| dir.join("sessions.csv"));
    let table = read_sessions(&input)?;
    let ranked = rank_top_k(&table.factor_table(), s.top_k)?;
    for (name, ig) in &ranked {
        println!("{name}\t{ig:.4}");
    }
    let (y, xu, xs) = table.to_matrices();
    let xu_sel = select_user_features(&xu, &ranked);
    let model = cmf_fit(&y, &xu_sel, &xs.values, &s.cmf)?;
    let profiles = (0..model.n_users())
        .map(|u| derive_profile(&model, u, &xs))
        .collect::<Result<Vec<_>>>()?;
    write_model(&model, &profiles, &dir.join("qoe_model.txt"))?;
    println!(
        "fit: {} iterations, objective {:.6}",
        model.trace.len().saturating_sub(1),
        model.trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_replay(c: &Common, trace: &Path) -> Result<()> {
    let s = settings(c)?;
    let rows = read_trace(trace)?;
    let m = replay(&rows, &s.sim.video.ladder)?;
    print!("{}", format_summary(&m.users, &m.aggregate, m.mean_objective));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::SweepOmega(c) => cmd_sweep(c, Variable::Omega),
        Command::SweepBw(c) => cmd_sweep(c, Variable::Bandwidth),
        Command::GenData(c) => cmd_gen_data(c),
        Command::FitQoe { common, input } => cmd_fit_qoe(common, input.as_deref()),
        Command::Replay { common, trace } => cmd_replay(common, trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

