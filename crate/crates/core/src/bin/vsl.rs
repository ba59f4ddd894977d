use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vsl_core::certificate::{certificate, sample_average_h};
use vsl_core::config::{load_scenario, ScenarioFile};
use vsl_core::io::{self, Preamble};
use vsl_core::issa::{self, IssaOptions, Termination};
use vsl_core::network::{HighwayScenario, SpeedProfile};
use vsl_core::reformulation::{BuildOptions, DensityBoundMode};
use vsl_core::sampling::{generate_samples, propagate_batch, propagate_speeds, read_samples, write_samples, SampleSet};
use vsl_core::validation::{self, simulate_ctm, ValidationConfig, DEFAULT_ENUMERATION_CAP};
use vsl_core::{Error, Result};

/// Variable speed limits with a distributionally robust performance certificate.
#[derive(Parser)]
#[command(name = "vsl", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Directory with rho0.csv and omega.csv; overrides the generator.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Training seed; overrides the scenario's generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training samples; overrides the scenario's n_samples.
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dynamics {
    /// Linear training dynamics.
    Linear,
    /// Demand/supply cell transmission model.
    Ctm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bounds {
    Physical,
    Propagated,
}

#[derive(Subcommand)]
enum Cmd {
    /// Propagate the samples under a fixed profile.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated speeds in km/h, or `uncontrolled`.
        #[arg(long, default_value = "uncontrolled")]
        u: String,
        #[arg(long, value_enum, default_value = "linear")]
        model: Dynamics,
        /// Steps to simulate; defaults to T.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Certificate of a fixed profile.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        u: String,
    },
    /// Integer solution search for the best certified profile.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Relative gap at which the search stops.
        #[arg(long, default_value_t = 1e-4)]
        gap: f64,
        /// Wall-clock budget in seconds.
        #[arg(long = "time-limit")]
        time_limit: Option<f64>,
        /// Exclude profiles with an empty ambiguity set from every relaxation.
        #[arg(long = "screen-invalid")]
        screen_invalid: bool,
        #[arg(long = "density-bounds", value_enum, default_value = "physical")]
        density_bounds: Bounds,
    },
    /// Certificate of every admissible profile.
    BruteForce {
        #[command(flatten)]
        common: Common,
        /// Refuse grids with more profiles than this.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u128,
    },
    /// Out-of-sample check of a profile against fresh samples.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        u: String,
        /// Certified value to compare against; defaults to the certificate
        /// of `u` on the training samples.
        #[arg(long = "j-hat")]
        j_hat: Option<f64>,
        /// Number of validation samples.
        #[arg(long)]
        nval: Option<usize>,
        /// CTM horizon in steps.
        #[arg(long = "t-val")]
        t_val: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_speeds(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput { path: "u".into(), reason: format!("`{v}` is not a speed") })
        })
        .collect()
}

fn profile(scenario: &HighwayScenario, text: &str) -> Result<SpeedProfile> {
    SpeedProfile::from_speeds(scenario, &parse_speeds(text)?)
}

struct Context {
    file: ScenarioFile,
    out: PathBuf,
    training_seed: Option<u64>,
}

fn context(c: &Common) -> Result<Context> {
    let file = load_scenario(&c.scenario)?;
    let out = io::ensure_dir(&c.out)?;
    let training_seed = c.seed.or(file.generator.as_ref().and_then(|g| g.seed));
    Ok(Context { file, out, training_seed })
}

fn samples(c: &Common, ctx: &Context, steps: usize) -> Result<SampleSet> {
    if let Some(dir) = &c.samples {
        return read_samples(dir);
    }
    let gen = ctx.file.generator.as_ref().ok_or_else(|| Error::InvalidInput {
        path: "generator".into(),
        reason: "no [generator] section and no --samples directory".into(),
    })?;
    let seed = ctx.training_seed.ok_or_else(|| Error::InvalidInput {
        path: "generator.seed".into(),
        reason: "no seed in the scenario and no --seed".into(),
    })?;
    generate_samples(&gen.spec, c.n_samples.unwrap_or(gen.n_samples), steps, seed)
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Simulate { common, u, model, horizon } => {
            let ctx = context(&common)?;
            let sc = &ctx.file.scenario;
            let horizon = horizon.unwrap_or(sc.horizon());
            let speeds = if u == "uncontrolled" { SpeedProfile::uncontrolled(sc) } else { parse_speeds(&u)? };
            if speeds.len() != sc.n() {
                return Err(Error::Dimension(format!("--u has {} speeds, scenario has {} edges", speeds.len(), sc.n())));
            }
            let set = samples(&common, &ctx, horizon)?;
            set.check_against(&sc.with_horizon(horizon)?)?;
            let trajectories = set
                .samples()
                .iter()
                .map(|s| match model {
                    Dynamics::Linear => Ok(propagate_speeds(sc.h(), &speeds, s, horizon)),
                    Dynamics::Ctm => simulate_ctm(sc, &speeds, s, horizon).map(|r| r.trajectory),
                })
                .collect::<Result<Vec<_>>>()?;
            let pre = Preamble::for_samples(&set).with("model", match model {
                Dynamics::Linear => "linear",
                Dynamics::Ctm => "ctm",
            });
            let path = ctx.out.join(io::TRAJECTORIES_FILE);
            io::write_trajectory_rows(&path, &pre, sc.delta_hours(), &trajectories)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Cmd::Certify { common, u } => {
            let ctx = context(&common)?;
            let sc = &ctx.file.scenario;
            let u = profile(sc, &u)?;
            let set = samples(&common, &ctx, sc.horizon())?;
            let batch = propagate_batch(sc, &u, &set)?;
            let cert = certificate(sc, &u, &batch, sc.epsilon())?;
            io::write_certificate(&ctx.out, &Preamble::for_samples(&set), u.speeds(), sc.epsilon(), sample_average_h(&batch), &cert)?;
            println!("u = {:?} km/h, J = {:e}, lambda* = {:e}", u.speeds(), cert.value, cert.lambda_star);
            Ok(0)
        }
        Cmd::Solve { common, gap, time_limit, screen_invalid, density_bounds } => {
            let ctx = context(&common)?;
            let sc = &ctx.file.scenario;
            let set = samples(&common, &ctx, sc.horizon())?;
            let time_limit = match time_limit {
                Some(s) if s.is_finite() && s >= 0.0 => Some(Duration::from_secs_f64(s)),
                Some(_) => return Err(Error::InvalidInput { path: "time-limit".into(), reason: "must be a nonnegative number of seconds".into() }),
                None => None,
            };
            let opts = IssaOptions {
                gap_eps: gap,
                time_limit,
                build: BuildOptions {
                    density_bounds: match density_bounds {
                        Bounds::Physical => DensityBoundMode::Physical,
                        Bounds::Propagated => DensityBoundMode::Propagated,
                    },
                    screen_invalid,
                    ..Default::default()
                },
                ..Default::default()
            };
            let report = issa::run(sc, &set, &opts)?;
            if common.samples.is_none() {
                write_samples(&ctx.out.join("samples"), &set)?;
            }
            io::write_solve_report(&ctx.out, &Preamble::for_samples(&set), sc, &report)?;
            match &report.u_best {
                Some(u) => println!(
                    "u = {:?} km/h, J = {:e}, UB = {:e}, {} iterations, stopped on {}",
                    u.speeds(),
                    report.j_hat,
                    report.ub,
                    report.log.len(),
                    report.termination.label()
                ),
                None => println!("no profile with a finite certificate ({})", report.termination.label()),
            }
            Ok(match (&report.termination, &report.u_best) {
                (Termination::NumericalFailure(msg), _) => {
                    eprintln!("error: {msg}");
                    4
                }
                (_, None) => 3,
                _ => 0,
            })
        }
        Cmd::BruteForce { common, cap } => {
            let ctx = context(&common)?;
            let sc = &ctx.file.scenario;
            let set = samples(&common, &ctx, sc.horizon())?;
            let r = validation::brute_force_optimum(sc, &set, cap)?;
            io::write_brute_force(&ctx.out.join(io::BRUTE_FORCE_FILE), &Preamble::for_samples(&set), &r)?;
            println!("u* = {:?} km/h, J* = {:e}, {} of {} profiles invalid", r.u_star.speeds(), r.j_star, r.invalid, r.evaluated);
            Ok(0)
        }
        Cmd::Validate { common, u, j_hat, nval, t_val } => {
            let ctx = context(&common)?;
            let sc = &ctx.file.scenario;
            let u = profile(sc, &u)?;
            let set = samples(&common, &ctx, sc.horizon())?;
            let j_hat = match j_hat {
                Some(j) => j,
                None => certificate(sc, &u, &propagate_batch(sc, &u, &set)?, sc.epsilon())?.value,
            };
            let gen = ctx.file.generator.as_ref().ok_or_else(|| Error::InvalidInput {
                path: "generator".into(),
                reason: "validation draws from the scenario's [generator]".into(),
            })?;
            let cfg = ValidationConfig::from_training_seed(
                nval.or(ctx.file.n_val).unwrap_or(1000),
                t_val.or(ctx.file.validation_horizon).unwrap_or(sc.horizon()),
                ctx.training_seed.unwrap_or(0),
            );
            let r = validation::validate(sc, &u, j_hat, &gen.spec, &cfg)?;
            io::write_validation(&ctx.out, &Preamble::for_samples(&set), sc.delta_hours(), u.speeds(), &r)?;
            println!(
                "mean H = {:e} vs J = {:e}: guarantee {}",
                r.mean_h,
                r.j_hat,
                if r.guarantee_holds { "holds" } else { "violated" }
            );
            Ok(0)
        }
    }
}

