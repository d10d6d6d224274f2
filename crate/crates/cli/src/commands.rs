use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use rnff::approximation::{
    ablation_point, default_mode, ApproximationSetup, LocationSpec, SweepVar,
};
use rnff::features::{build_feature_matrix, kernel_matrix, FeatureFactor};
use rnff::io::{
    fmt_f64, read_locations_csv, read_training_csv, write_kernel_binary, write_kernel_csv,
    write_paths_csv, write_predictions_csv, write_training_csv, ModelDocument,
};
use rnff::learn::experiment::{linspace, mean_relative_error, median};
use rnff::learn::{
    exact_posterior, posterior_predict, synthetic_dataset, train, AmsGradConfig,
    LearningExperiment, SyntheticConfig, TrainConfig,
};
use rnff::simulate::{Path as SamplePath, PathSampler};
use rnff::spectral::SpectralConfig;
use rnff::{FeatureMode, FrequencyGrid, HarmonizableMixture, KernelParams, SpectralDensityModel};

use crate::config::merge_with_file;
use crate::exit::CliError;
use crate::{
    AblateArgs, ApproximateArgs, ExperimentArgs, GridArgs, KernelArgs, LearnArgs, LocationArgs,
    PredictArgs, SimulateArgs, SynthArgs, TrainArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| {
        CliError::config(format!(
            "missing required flag --{flag} (see --help for usage)"
        ))
    })
}

fn positive(value: f64, flag: &str) -> CliResult<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::config(format!(
            "--{flag} must be positive, got {value}"
        )))
    }
}

fn out_dir(out: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> rnff::Result<()>,
) -> CliResult {
    let file = File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| CliError::from(e).context(path.display()))?;
    w.flush()
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn spectral_model(args: &KernelArgs) -> CliResult<SpectralDensityModel> {
    if let Some(path) = &args.spectral_config {
        let config = SpectralConfig::from_json(&read_text(path)?)
            .map_err(|e| CliError::config(e).context(path.display()))?;
        return Ok(config.to_model()?);
    }
    let a = positive(args.a.unwrap_or(1.0), "a")?;
    match args.kernel.as_deref().unwrap_or("ls") {
        "ls" => Ok(SpectralDensityModel::locally_stationary(a)?),
        "hmk" => {
            let reference = HarmonizableMixture::reference();
            let mixture = HarmonizableMixture::new(
                a,
                reference.etas().to_vec(),
                reference.amplitude().clone(),
            )?;
            Ok(SpectralDensityModel::HarmonizableMixture(mixture))
        }
        other => Err(CliError::config(format!(
            "unknown --kernel {other:?}, expected ls or hmk"
        ))),
    }
}

fn frequency_grid(
    args: &GridArgs,
    model: &SpectralDensityModel,
    default_m: Option<usize>,
    default_omega: Option<f64>,
) -> CliResult<FrequencyGrid> {
    let m = require(args.m.or(default_m), "m")?;
    let omega_max = positive(
        require(args.omega_max.or(default_omega), "omega-max")?,
        "omega-max",
    )?;
    build_grid(args.grid.as_deref(), model, m, omega_max)
}

fn build_grid(
    kind: Option<&str>,
    model: &SpectralDensityModel,
    m: usize,
    omega_max: f64,
) -> CliResult<FrequencyGrid> {
    let symmetric = match kind {
        Some("symmetric") => true,
        Some("nonnegative") => false,
        Some(other) => {
            return Err(CliError::config(format!(
                "unknown --grid {other:?}, expected symmetric or nonnegative"
            )))
        }
        None => !model.has_real_weights(),
    };
    Ok(if symmetric {
        FrequencyGrid::symmetric(m, omega_max)?
    } else {
        FrequencyGrid::nonnegative(m, omega_max)?
    })
}

fn setup(
    args: &GridArgs,
    model: SpectralDensityModel,
    grid: FrequencyGrid,
) -> CliResult<ApproximationSetup> {
    let mode = match &args.mode {
        Some(s) => s.parse::<FeatureMode>().map_err(CliError::config)?,
        None => default_mode(&model, &grid),
    };
    let jitter = args.jitter.unwrap_or(0.0);
    if !(jitter >= 0.0) {
        return Err(CliError::config("--jitter must be nonnegative"));
    }
    let mut s = ApproximationSetup::new(model, grid);
    s.mode = mode;
    s.jitter = jitter;
    s.strict = args.strict_aliasing;
    Ok(s)
}

fn locations(
    args: &LocationArgs,
    default_n: Option<usize>,
    default_dx: Option<f64>,
) -> CliResult<Vec<f64>> {
    let n = require(args.n.or(default_n), "n")?;
    let dx = positive(require(args.dx.or(default_dx), "dx")?, "dx")?;
    Ok(LocationSpec {
        n,
        dx,
        centered: args.centered,
    }
    .locations())
}

pub fn approximate(flags: ApproximateArgs) -> CliResult {
    let args: ApproximateArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let model = spectral_model(&args.kernel)?;
    let grid = frequency_grid(&args.grid, &model, None, None)?;
    let xs = locations(&args.locations, None, None)?;
    let dir = out_dir(&args.out)?;
    let run = setup(&args.grid, model, grid)?.run(&xs)?;
    let abs_error = run.abs_error();
    for (name, k) in [
        ("exact_kernel", &run.exact),
        ("lowrank_kernel", &run.lowrank),
        ("abs_error", &abs_error),
    ] {
        write_file(&dir.join(format!("{name}.csv")), |w| {
            write_kernel_csv(w, &xs, k)
        })?;
        if args.binary {
            write_file(&dir.join(format!("{name}.bin")), |w| {
                write_kernel_binary(w, k)
            })?;
        }
    }
    write_json(&dir.join("summary.json"), &run.summary)?;
    println!(
        "{}",
        serde_json::to_string(&run.summary).map_err(CliError::numeric)?
    );
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    sweep_var: &'static str,
    n: usize,
    value: f64,
    rel_rsse: f64,
}

fn thread_cap() -> CliResult<usize> {
    match std::env::var("RNFF_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| {
                CliError::config(format!(
                    "RNFF_THREADS must be a positive integer, got {v:?}"
                ))
            }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn ablate(flags: AblateArgs) -> CliResult {
    let args: AblateArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let model = spectral_model(&args.kernel)?;
    let sweep: SweepVar = require(args.sweep.clone(), "sweep")?
        .parse()
        .map_err(CliError::config)?;
    let values = require(args.values.clone(), "values")?;
    let ns = require(args.ns.clone(), "ns")?;
    if values.is_empty() || ns.is_empty() {
        return Err(CliError::config("sweep lists must be nonempty"));
    }
    let fixed = positive(
        args.fixed.unwrap_or(match sweep {
            SweepVar::M => 5.0,
            SweepVar::OmegaMax => 100.0,
        }),
        "fixed",
    )?;
    let dx = positive(args.dx.unwrap_or(1e-3), "dx")?;
    let symmetric = match args.grid.as_deref() {
        Some("symmetric") => true,
        Some("nonnegative") => false,
        Some(other) => return Err(CliError::config(format!("unknown --grid {other:?}"))),
        None => !model.has_real_weights(),
    };
    let cells: Vec<(usize, f64)> = values
        .iter()
        .flat_map(|&v| ns.iter().map(move |&n| (n, v)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap()?)
        .build()
        .map_err(CliError::numeric)?;
    let results: Vec<rnff::Result<f64>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, value)| {
                let loc = LocationSpec {
                    n,
                    dx,
                    centered: args.centered,
                };
                ablation_point(&model, sweep, value, fixed, symmetric, &loc)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(cells.len());
    for ((n, value), result) in cells.into_iter().zip(results) {
        rows.push(AblationRow {
            sweep_var: sweep.name(),
            n,
            value,
            rel_rsse: result?,
        });
    }
    let dir = out_dir(&args.out)?;
    write_file(&dir.join("ablation.csv"), |w| {
        writeln!(w, "sweep_var,n,value,rel_rsse")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.sweep_var,
                r.n,
                fmt_f64(r.value),
                fmt_f64(r.rel_rsse)
            )?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct SimulationCheck {
    paths: usize,
    max_z_score: f64,
    tolerance: f64,
    passed: bool,
}

/// Entrywise `|mean(Re z_i z̄_j) − K_ij|` in units of the standard error of
/// the product sample.
fn covariance_check(paths: &[SamplePath], k: &rnff::RealMatrix) -> f64 {
    let n = k.nrows();
    let count = paths.len() as f64;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let products: Vec<f64> = paths
                .iter()
                .map(|p| match p {
                    SamplePath::Real(v) => v[i] * v[j],
                    SamplePath::Complex(v) => (v[i] * v[j].conj()).re,
                })
                .collect();
            let mean = products.iter().sum::<f64>() / count;
            let var = products.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (count - 1.0);
            let se = (var / count).sqrt();
            let dev = (mean - k[(i, j)]).abs();
            worst = worst.max(if se > 0.0 {
                dev / se
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            });
        }
    }
    worst
}

pub fn simulate(flags: SimulateArgs) -> CliResult {
    let args: SimulateArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let model = spectral_model(&args.kernel)?;
    let grid = frequency_grid(&args.grid, &model, Some(20), Some(5.0))?;
    let xs = locations(&args.locations, Some(100), Some(0.01))?;
    let count = args.paths.unwrap_or(1);
    let seed = args.seed.unwrap_or(0);
    let s = setup(&args.grid, model, grid)?;
    let factor = FeatureFactor::from_density(&s.grid, &s.model, s.mode, s.jitter)?;
    let sampler = PathSampler::new(&factor, &xs, s.strict)?;
    let paths: Vec<SamplePath> = (0..count as u64)
        .map(|id| sampler.draw_seeded(seed, id))
        .collect();
    let dir = out_dir(&args.out)?;
    write_file(&dir.join("paths.csv"), |w| write_paths_csv(w, &xs, &paths))?;
    if args.validate {
        if count < 2 {
            return Err(CliError::config("--validate needs at least two paths"));
        }
        let k = kernel_matrix(&build_feature_matrix(&xs, &factor, false)?)?;
        let max_z_score = covariance_check(&paths, &k);
        let check = SimulationCheck {
            paths: count,
            max_z_score,
            tolerance: 4.0,
            passed: max_z_score <= 4.0,
        };
        write_json(&dir.join("validation.json"), &check)?;
        if !check.passed {
            return Err(CliError::numeric(format!(
                "empirical covariance deviates by {max_z_score:.2} standard errors"
            )));
        }
    }
    Ok(())
}

fn train_config(args: &TrainArgs, seed: u64) -> CliResult<TrainConfig> {
    let defaults = TrainConfig::default();
    let optimizer = AmsGradConfig {
        learning_rate: positive(args.lr.unwrap_or(defaults.optimizer.learning_rate), "lr")?,
        beta1: args.beta1.unwrap_or(defaults.optimizer.beta1),
        beta2: args.beta2.unwrap_or(defaults.optimizer.beta2),
        epsilon: args.epsilon.unwrap_or(defaults.optimizer.epsilon),
    };
    let hidden = args.hidden.clone().unwrap_or(defaults.hidden);
    if hidden.contains(&0) {
        return Err(CliError::config("--hidden widths must be positive"));
    }
    Ok(TrainConfig {
        optimizer,
        iterations: args.iterations.unwrap_or(defaults.iterations),
        seed,
        hidden,
        complex_output: args.complex_output,
    })
}

fn learning_grid(args: &TrainArgs) -> CliResult<FrequencyGrid> {
    let m = args.m.unwrap_or(255);
    let omega_max = positive(args.omega_max.unwrap_or(10.0), "omega-max")?;
    Ok(FrequencyGrid::symmetric(m, omega_max)?)
}

#[derive(Serialize)]
struct LearnSummary {
    final_nll: f64,
    initial_nll: f64,
    seed: u64,
    iterations: usize,
}

pub fn learn(flags: LearnArgs) -> CliResult {
    let args: LearnArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let data = require(args.data.clone(), "data")?;
    let (xs, z) =
        read_training_csv(open(&data)?).map_err(|e| CliError::from(e).context(data.display()))?;
    if xs.is_empty() {
        return Err(CliError::config(format!(
            "{}: no training rows",
            data.display()
        )));
    }
    let seed = args.seed.unwrap_or(0);
    let config = train_config(&args.train, seed)?;
    let grid = learning_grid(&args.train)?;
    let rank = args.train.rank.unwrap_or(8);
    let outcome = train(&xs, &z, &grid, rank, &config)?;
    let dir = out_dir(&args.out)?;
    ModelDocument::from_cache(&outcome.cache)?
        .write(&dir.join("model.json"))
        .map_err(CliError::from)?;
    write_file(&dir.join("losses.csv"), |w| {
        writeln!(w, "iteration,nll")?;
        for (i, v) in outcome.losses.iter().enumerate() {
            writeln!(w, "{i},{}", fmt_f64(*v))?;
        }
        Ok(())
    })?;
    let summary = LearnSummary {
        final_nll: outcome.final_nll(),
        initial_nll: outcome.initial_nll(),
        seed,
        iterations: config.iterations,
    };
    write_json(&dir.join("summary.json"), &summary)
}

#[derive(Serialize)]
struct Comparison {
    relative_error: f64,
    t: usize,
}

pub fn predict(flags: PredictArgs) -> CliResult {
    let args: PredictArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let model_path = require(args.model.clone(), "model")?;
    open(&model_path)?;
    let doc = ModelDocument::read(&model_path)
        .map_err(|e| CliError::from(e).context(model_path.display()))?;
    let cache = doc
        .cache()
        .map_err(|e| CliError::from(e).context(model_path.display()))?;
    let xs_test = match &args.xs {
        Some(path) => read_locations_csv(open(path)?)
            .map_err(|e| CliError::from(e).context(path.display()))?,
        None => linspace(
            args.lo.unwrap_or(-10.0),
            args.hi.unwrap_or(10.0),
            args.t.unwrap_or(100),
        ),
    };
    let (mean, cov) = posterior_predict(&cache, &xs_test)?;
    let var: Vec<f64> = (0..xs_test.len()).map(|i| cov[(i, i)]).collect();
    let dir = out_dir(&args.out)?;
    write_file(&dir.join("predictions.csv"), |w| {
        write_predictions_csv(w, &xs_test, &mean, &var)
    })?;
    if args.compare_exact {
        let data = require(args.data.clone(), "data")?;
        let (xs, z) = read_training_csv(open(&data)?)
            .map_err(|e| CliError::from(e).context(data.display()))?;
        let kernel = KernelParams::locally_stationary(positive(args.a.unwrap_or(0.5), "a")?)?;
        let noise_std = positive(args.noise_std.unwrap_or(1e-2), "noise-std")?;
        let (mu, cov_true) = exact_posterior(&kernel, &xs, &z, noise_std * noise_std, &xs_test)?;
        let var_true: Vec<f64> = (0..xs_test.len()).map(|i| cov_true[(i, i)]).collect();
        write_file(&dir.join("exact_predictions.csv"), |w| {
            write_predictions_csv(w, &xs_test, &mu, &var_true)
        })?;
        let comparison = Comparison {
            relative_error: mean_relative_error(&mean, &mu)?,
            t: xs_test.len(),
        };
        write_json(&dir.join("comparison.json"), &comparison)?;
    }
    Ok(())
}

pub fn synth_data(flags: SynthArgs) -> CliResult {
    let args: SynthArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let defaults = SyntheticConfig::default();
    let config = SyntheticConfig {
        a: positive(args.a.unwrap_or(defaults.a), "a")?,
        n: args.n.unwrap_or(defaults.n),
        x_range: positive(args.x_range.unwrap_or(defaults.x_range), "x-range")?,
        noise_std: args.noise_std.unwrap_or(defaults.noise_std),
    };
    let data = synthetic_dataset(&config, args.seed.unwrap_or(0))?;
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("train.csv"));
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
    }
    write_file(&output, |w| write_training_csv(w, &data.xs, &data.z))
}

#[derive(Serialize)]
struct ExperimentSummary {
    seeds: Vec<u64>,
    median_learned_error: f64,
    median_rbf_error: f64,
}

pub fn experiment(flags: ExperimentArgs) -> CliResult {
    let args: ExperimentArgs = merge_with_file(&flags, flags.config.as_deref())?;
    let seeds = args.seeds.clone().unwrap_or_else(|| (0..5).collect());
    if seeds.is_empty() {
        return Err(CliError::config("--seeds must be nonempty"));
    }
    let grid = learning_grid(&args.train)?;
    let exp = LearningExperiment {
        m: grid.m(),
        omega_max: grid.omega_max(),
        rank: args.train.rank.unwrap_or(8),
        train: train_config(&args.train, 0)?,
        ..Default::default()
    };
    let trials = seeds
        .iter()
        .map(|s| exp.run_trial(*s))
        .collect::<rnff::Result<Vec<_>>>()?;
    let dir = out_dir(&args.out)?;
    write_file(&dir.join("experiment.csv"), |w| {
        writeln!(w, "seed,learned_error,rbf_error,initial_nll,final_nll")?;
        for t in &trials {
            writeln!(
                w,
                "{},{},{},{},{}",
                t.seed,
                fmt_f64(t.learned_error),
                fmt_f64(t.rbf_error),
                fmt_f64(t.initial_nll),
                fmt_f64(t.final_nll)
            )?;
        }
        Ok(())
    })?;
    let learned: Vec<f64> = trials.iter().map(|t| t.learned_error).collect();
    let rbf: Vec<f64> = trials.iter().map(|t| t.rbf_error).collect();
    let summary = ExperimentSummary {
        seeds,
        median_learned_error: median(&learned),
        median_rbf_error: median(&rbf),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{}",
        serde_json::to_string(&summary).map_err(CliError::numeric)?
    );
    Ok(())
}
