use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sml_core::behavior_dim::{embodied_dimension_with, SupportSet, EXACT_RANK_TOL};
use sml_core::crbm::{
    bound_embodied, bound_joint_log2, bound_lower_log2, bound_nonembodied_log2, cd_train, conditional_kl,
    construct_sparse_crbm, support_points_from_policy, CrbmParams,
};
use sml_core::kernels::{kernel_to_json, load_kernel, load_system, simulate, system_to_json};
use sml_core::pipeline::{
    bits_for, run_dimension_stage, run_experiment, run_scan_stage, run_support_stage, training_data, ExperimentConfig,
    MRange, World, WorldSource,
};
use sml_core::policy_models::{embodiment_matrix, fit_expfam, sparse_representative};
use sml_core::rng::{self, streams};
use sml_core::worlds::{make_cyclic_walker, make_random_sml, walker_performance, CyclicWalkerConfig};
use sml_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sml", version, about = "Embodied behavior dimension and CRBM policy experiments")]
struct Cli {
    /// Overrides the seed of the experiment config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; reports go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// ExperimentConfig JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct WorldArgs {
    /// Built-in walker, e.g. `P=6,A=3,L=100,slip=0.1`.
    #[arg(long, conflicts_with = "system")]
    walker: Option<String>,
    /// SmlSystem JSON file.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Reference policy JSON for a file world.
    #[arg(long, requires = "system")]
    policy: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Writes a built-in or random system as JSON.
    GenWorld {
        #[arg(long, conflicts_with = "random")]
        walker: Option<String>,
        /// `W,S,A,rank_beta,rank_alpha`.
        #[arg(long)]
        random: Option<String>,
    },
    /// Samples a trajectory.
    Simulate {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Exact embodied behavior dimension of a system.
    Dim {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = EXACT_RANK_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        a0: usize,
    },
    /// Estimates the sensor support from exploration data.
    Support {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        keep: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Estimates the internal world model and its affine rank.
    Gamma {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        keep: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Relative rank tolerance for the noisy estimate.
        #[arg(long)]
        rank_tol: Option<f64>,
    },
    /// Hidden-unit bounds.
    Bound {
        /// Support cardinality.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        support: u64,
        #[arg(long)]
        dim: u64,
        /// Also report the input-size bounds for `k` input and `n` output bits.
        #[arg(long, requires = "n", value_parser = clap::value_parser!(u32).range(1..))]
        k: Option<u32>,
        #[arg(long, requires = "k", value_parser = clap::value_parser!(u32).range(1..))]
        n: Option<u32>,
    },
    /// Matches a target behavior with the exponential-family policy model.
    FitExpfam {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
    },
    /// Sparse policy with the same behavior as the target.
    SparseRep {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated support sensors; all sensors when absent.
        #[arg(long, value_delimiter = ',')]
        support: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Builds a CRBM whose conditionals approximate a sparse policy.
    ConstructCrbm {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        sharpness: f64,
        #[arg(long, value_delimiter = ',')]
        rows: Option<Vec<usize>>,
    },
    /// Trains one CRBM on reference demonstrations.
    TrainCrbm {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Trains and scores CRBMs over a range of hidden-unit counts.
    Scan {
        #[command(flatten)]
        world: WorldArgs,
        /// Inclusive range such as `1..12`.
        #[arg(long)]
        m: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        full_scale: bool,
    },
    /// Runs every stage and writes the full report.
    Report {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        full_scale: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numeric(_) => 3,
                _ => 2,
            })
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn experiment_config(cli: &Cli, world: Option<&WorldArgs>) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::walker_preset(),
    };
    if let Some(w) = world {
        if let Some(spec) = &w.walker {
            cfg.world = WorldSource::Walker(CyclicWalkerConfig::parse_spec(spec)?);
        } else if let Some(system) = &w.system {
            cfg.world = WorldSource::File { system: system.clone(), reference_policy: w.policy.clone() };
            if cli.config.is_none() {
                cfg.keep_fraction = ExperimentConfig::default().keep_fraction;
            }
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match &cli.cmd {
        Command::GenWorld { walker, random } => match (walker, random) {
            (Some(spec), _) => {
                let mut cfg = CyclicWalkerConfig::parse_spec(spec)?;
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                let w = make_cyclic_walker(&cfg)?;
                emit(out, &system_to_json(&w.sml))?;
                if let Some(p) = out {
                    let sidecar = json!({
                        "config": cfg,
                        "alpha_s": serde_json::from_str::<serde_json::Value>(&kernel_to_json(&w.alpha_s))?,
                        "scripted_policy": serde_json::from_str::<serde_json::Value>(&kernel_to_json(&w.scripted_policy))?,
                        "symbolic_dimension": w.symbolic_dimension(),
                    });
                    std::fs::write(with_suffix(p, ".sidecar.json"), pretty(&sidecar))?;
                }
                Ok(())
            }
            (None, Some(spec)) => {
                let v: Vec<usize> = spec
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad random world spec '{spec}'"))))
                    .collect::<Result<_>>()?;
                let [w, s, a, rb, ra] = v[..] else {
                    return Err(Error::Parse("random world spec needs W,S,A,rank_beta,rank_alpha".into()));
                };
                emit(out, &system_to_json(&make_random_sml(w, s, a, rb, ra, seed)?))
            }
            (None, None) => Err(Error::Parse("gen-world needs --walker or --random".into())),
        },
        Command::Simulate { world, steps } => {
            let cfg = experiment_config(cli, Some(world))?;
            let w = World::load(&cfg.world)?;
            let traj = simulate(&w.sys, &w.reference, *steps, cfg.seed)?;
            let distance = w.walker.as_ref().map(|wk| walker_performance(&traj, wk));
            emit(out, &pretty(&json!({ "trajectory": traj, "distance": distance })))
        }
        Command::Dim { system, tol, a0 } => {
            let sys = load_system(system)?;
            let rep = embodied_dimension_with(&sys, *a0, *tol)?;
            emit(out, &pretty(&serde_json::to_value(&rep)?))
        }
        Command::Support { world, keep, steps } => {
            let mut cfg = experiment_config(cli, Some(world))?;
            cfg.keep_fraction = keep.unwrap_or(cfg.keep_fraction);
            cfg.data_steps = steps.unwrap_or(cfg.data_steps);
            cfg.validate()?;
            let w = World::load(&cfg.world)?;
            let st = run_support_stage(&cfg, &w)?;
            emit(out, &pretty(&json!({ "config": cfg, "support": st })))
        }
        Command::Gamma { world, keep, steps, rank_tol } => {
            let mut cfg = experiment_config(cli, Some(world))?;
            cfg.keep_fraction = keep.unwrap_or(cfg.keep_fraction);
            cfg.data_steps = steps.unwrap_or(cfg.data_steps);
            cfg.rank_tol = rank_tol.unwrap_or(cfg.rank_tol);
            cfg.validate()?;
            let w = World::load(&cfg.world)?;
            let st = run_support_stage(&cfg, &w)?;
            let dims = run_dimension_stage(&cfg, &w, &st)?;
            emit(out, &pretty(&json!({ "config": cfg, "support": st, "dimension": dims })))
        }
        Command::Bound { support, dim, k, n } => {
            let m = bound_embodied(*support, *dim)?;
            println!("{m}");
            if let Some(p) = out {
                let mut rep = json!({ "support": support, "dim": dim, "m_bound": m });
                if let (Some(k), Some(n)) = (k, n) {
                    rep["nonembodied_log2"] = json!(bound_nonembodied_log2(*k, *n));
                    rep["joint_log2"] = json!(bound_joint_log2(*k, *n));
                    rep["lower_log2"] = json!(bound_lower_log2(*k, *n));
                }
                std::fs::write(p, pretty(&rep))?;
            }
            Ok(())
        }
        Command::FitExpfam { system, target, tol, max_iters } => {
            let sys = load_system(system)?;
            let target = load_kernel(target)?;
            let e = embodiment_matrix(&sys, EXACT_RANK_TOL)?;
            let rep = fit_expfam(&sys, &e, &target, *tol, *max_iters)?;
            if !rep.converged {
                emit(out, &pretty(&serde_json::to_value(&rep)?))?;
                return Err(Error::Numeric(format!("no convergence, behavior gap {:e}", rep.behavior_gap)));
            }
            emit(out, &pretty(&serde_json::to_value(&rep)?))
        }
        Command::SparseRep { system, target, support, tol } => {
            let sys = load_system(system)?;
            let target = load_kernel(target)?;
            let support = match support {
                Some(s) => SupportSet { sensor_indices: s.clone(), kept_mass: 1.0 },
                None => SupportSet::full(sys.n_sensor()),
            };
            let pi = sparse_representative(&sys, &target, &support, *tol)?;
            let policy: serde_json::Value = serde_json::from_str(&kernel_to_json(&pi))?;
            let nonzeros = pi.nonzeros_in(&support.sensor_indices);
            emit(out, &pretty(&json!({ "policy": policy, "nonzeros": nonzeros })))
        }
        Command::ConstructCrbm { policy, sharpness, rows } => {
            let pi = load_kernel(policy)?;
            let rows = rows.clone().unwrap_or_else(|| (0..pi.domain()).collect());
            let (k, n) = (bits_for(pi.domain()), bits_for(pi.codomain()).max(1));
            let points = support_points_from_policy(&pi, &rows, k, n)?;
            let params = construct_sparse_crbm(&points, *sharpness)?;
            let kl = conditional_kl(&params, &points)?;
            let p: serde_json::Value = serde_json::from_str(&params.to_json())?;
            emit(out, &pretty(&json!({ "params": p, "conditional_kl": kl })))
        }
        Command::TrainCrbm { world, m, epochs } => {
            let mut cfg = experiment_config(cli, Some(world))?;
            cfg.train.epochs = epochs.unwrap_or(cfg.train.epochs);
            cfg.validate()?;
            let w = World::load(&cfg.world)?;
            let (k, n) = w.code_widths();
            let data = training_data(&cfg, &w)?;
            let mut r = rng::substream(cfg.seed, streams::CRBM_TRAIN, &[*m as u64]);
            let init = CrbmParams::random(k, n, *m, cfg.init_weight_sd, &mut r)?;
            let train = sml_core::crbm::TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
            emit(out, &cd_train(&init, &data, &train)?.to_json())
        }
        Command::Scan { world, m, restarts, full_scale } => {
            let mut cfg = experiment_config(cli, Some(world))?;
            if *full_scale {
                cfg = cfg.full_scale();
            }
            if let Some(m) = m {
                cfg.m_range = Some(MRange::parse(m)?);
            }
            cfg.restarts = restarts.unwrap_or(cfg.restarts);
            cfg.validate()?;
            let w = World::load(&cfg.world)?;
            let st = run_support_stage(&cfg, &w)?;
            let dims = run_dimension_stage(&cfg, &w, &st)?;
            let range = cfg.m_range.unwrap_or(MRange { start: 1, end: (2 * dims.m_bound as usize).max(1) });
            let data = training_data(&cfg, &w)?;
            let scan = run_scan_stage(&cfg, &w, &data, &dims, range)?;
            match out {
                Some(p) => {
                    std::fs::write(p, scan.to_csv())?;
                    let rep = json!({ "config": cfg, "scan": scan });
                    std::fs::write(with_suffix(p, ".json"), pretty(&rep))?;
                    Ok(())
                }
                None => emit(None, &scan.to_csv()),
            }
        }
        Command::Report { world, full_scale } => {
            let mut cfg = experiment_config(cli, Some(world))?;
            if *full_scale {
                cfg = cfg.full_scale();
            }
            let rep = run_experiment(&cfg)?;
            if let (Some(p), Some(scan)) = (out, &rep.scan) {
                std::fs::write(with_suffix(p, ".csv"), scan.to_csv())?;
            }
            emit(out, &rep.to_json())
        }
    }
}
