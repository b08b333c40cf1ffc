//! `vriesz`: run the solver, the epsilon studies, the averaging-operator
//! sweep, the Penrose search and norm evaluation from the command line.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input,
//! 3 blow-up (time printed on stdout), 4 velocity-box contamination.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use vriesz_core::averaging::{kg_sweep, ProbeOptions};
use vriesz_core::config::InitialCondition;
use vriesz_core::experiments::{bootstrap_monitor, epsilon_convergence_study};
use vriesz_core::integrator::{simulate, RunSpec, Termination};
use vriesz_core::output::{content_address, write_snapshot, write_study, write_table, DiagnosticsWriter, StudyManifest};
use vriesz_core::penrose::{samples_table, stability_infimum, Axis, SearchBox, VelocityProfile};
use vriesz_core::phase_space::{norm_report, NormKey};
use vriesz_core::spectral::XTransform;
use vriesz_core::{Error, GridGeometry, RunConfig};

#[derive(Parser)]
#[command(name = "vriesz", version, about = "Vlasov equation with Riesz-type interactions on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write the diagnostics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's [output] dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance of regularised runs to the limit run for a list of eps.
    StudyEps {
        #[arg(long)]
        config: PathBuf,
        /// Strictly decreasing, ending at 0 (defaults to [study] eps).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Key quantity N_{m,w}(t) for every eps on a shared interval.
    StudyBootstrap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        m: Option<u32>,
        /// Literal weight exponent of the velocity weight.
        #[arg(long)]
        weight: Option<f64>,
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operator-norm estimates of the averaging operator over horizons T.
    KgSweep {
        #[arg(long)]
        alpha: f64,
        #[arg(long = "Ts", value_delimiter = ',', required = true)]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, default_value_t = ProbeOptions::default().kmax)]
        kmax: i64,
        #[arg(long, default_value_t = ProbeOptions::default().nt)]
        nt: usize,
        /// Power-iteration steps per probe (0 = pure random probing).
        #[arg(long, default_value_t = ProbeOptions::default().refine_steps)]
        refine: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "kg_sweep.csv")]
        out: PathBuf,
    },
    /// Infimum of |P| over a search box for a velocity profile.
    Penrose {
        #[arg(long, value_enum, default_value_t = Profile::Maxwellian)]
        profile: Profile,
        #[arg(long, default_value_t = 1.0)]
        thermal: f64,
        /// Bump separation of the two-bump profile.
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 256)]
        nv: usize,
        #[arg(long, default_value_t = 8.0)]
        v_max: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1.0])]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [-3.0, 3.0])]
        tau: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [-4.0, 4.0])]
        eta: Vec<f64>,
        /// Write |P| over the coarse search grid as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Weighted Sobolev norms of a snapshot.
    Norms {
        #[arg(long)]
        snapshot: PathBuf,
        /// Pairs k:weight, e.g. 2:6,4:6.
        #[arg(long, value_delimiter = ',')]
        sobolev: Vec<String>,
        /// Sobolev orders of the density.
        #[arg(long, value_delimiter = ',')]
        rho: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Maxwellian,
    TwoBump,
}

/// Errors that mean "the input was wrong" rather than "something broke".
fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(
            e.downcast_ref::<Error>(),
            Some(
                Error::Kernel(_)
                    | Error::Grid(_)
                    | Error::InvalidArgument(_)
                    | Error::NormOrder(_)
                    | Error::SymbolDomain(_)
                    | Error::Config(_)
                    | Error::Format(_)
                    | Error::Json(_)
            )
        )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_validation(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::StudyEps { config, eps, out } => cmd_study_eps(&config, eps, out),
        Command::StudyBootstrap { config, eps, m, weight, bound, out } => {
            cmd_study_bootstrap(&config, eps, m, weight, bound, out)
        }
        Command::KgSweep { alpha, horizons, d, trials, kmax, nt, refine, seed, out } => {
            let rows = kg_sweep(d, alpha, &horizons, trials, ProbeOptions { kmax, nt, refine_steps: refine, seed })?;
            let table: Vec<Vec<f64>> =
                rows.iter().map(|r| vec![r.horizon, r.alpha, r.estimate, r.symbol_norm, r.fitted_c]).collect();
            let hash = content_address(&[format!("kg-sweep d={d} alpha={alpha} Ts={horizons:?} trials={trials} kmax={kmax} nt={nt} refine={refine} seed={seed}").as_bytes()]);
            write_table(&out, &hash, &["T", "alpha", "estimate", "symbol_norm", "fitted_C"], &table)?;
            for r in &rows {
                println!("T={} estimate={} symbol_norm={} fitted_C={}", r.horizon, r.estimate, r.symbol_norm, r.fitted_c);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Penrose { profile, thermal, separation, d, nv, v_max, gamma, tau, eta, dump } => {
            let geometry = GridGeometry::new(d, 8, nv, v_max)?;
            let p = match profile {
                Profile::Maxwellian => VelocityProfile::maxwellian(geometry, thermal)?,
                // unit mass, bumps at +-separation/2 on the first axis
                Profile::TwoBump => VelocityProfile::from_fn(geometry, |v| {
                    let s = separation / 2.0;
                    let norm = 2.0 * (2.0 * std::f64::consts::PI * thermal * thermal).powf(d as f64 / 2.0);
                    let r2 = |c: f64| (v[0] - c).powi(2) + if d > 1 { v[1] * v[1] } else { 0.0 };
                    ((-r2(s) / (2.0 * thermal * thermal)).exp() + (-r2(-s) / (2.0 * thermal * thermal)).exp()) / norm
                })?,
            };
            let range = |name: &str, r: &[f64]| -> Result<(f64, f64)> {
                match r {
                    [lo, hi] => Ok((*lo, *hi)),
                    _ => Err(Error::InvalidArgument(format!("--{name} takes lo,hi")).into()),
                }
            };
            let (g0, g1) = range("gamma", &gamma)?;
            let (t0, t1) = range("tau", &tau)?;
            let (e0, e1) = range("eta", &eta)?;
            let std = SearchBox::standard();
            let search = SearchBox {
                gamma: Axis::geometric(g0, g1, std.gamma.n),
                tau: Axis::linear(t0, t1, std.tau.n),
                eta: Axis::linear(e0, e1, std.eta.n),
            };
            let inf = stability_infimum(&p, &search)?;
            let a = &inf.argmin;
            println!("inf_abs={} gamma={} tau={} eta={:?}", inf.inf_abs, a.gamma, a.tau, a.eta);
            if let Some(path) = dump {
                let (cols, rows) = samples_table(&inf);
                let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
                let hash = content_address(&[format!("penrose {:?}", p.values).as_bytes()]);
                write_table(&path, &hash, &cols, &rows)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Norms { snapshot, sobolev, rho } => {
            let f = vriesz_core::output::read_snapshot(&snapshot)?;
            let keys = sobolev
                .iter()
                .map(|s| {
                    let (k, w) = s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("expected k:weight, got {s}")))?;
                    Ok(NormKey {
                        k: k.trim().parse().map_err(|e| Error::InvalidArgument(format!("{s}: {e}")))?,
                        weight: w.trim().parse().map_err(|e| Error::InvalidArgument(format!("{s}: {e}")))?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let transform = XTransform::new(f.geometry.d, f.geometry.nx);
            let t = vriesz_core::output::read_snapshot_meta(&snapshot)?.t;
            let report = norm_report(&f, &transform, t, &keys, &rho)?;
            println!("t={t} mass={} L2={}", f.mass(), f.l2_norm());
            for (k, v) in &report.weighted_sobolev {
                println!("{}={v}", vriesz_core::output::sobolev_label(k));
            }
            for (m, v) in &report.rho_sobolev {
                println!("{}={v}", vriesz_core::output::rho_label(*m));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Reads a config; relative snapshot paths resolve against the config's directory.
fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    let mut inputs = text.into_bytes();
    if let InitialCondition::File { path: snap } = &mut cfg.initial {
        if snap.is_relative() {
            if let Some(dir) = path.parent() {
                *snap = dir.join(&*snap);
            }
        }
        inputs.extend(fs::read(&*snap).with_context(|| format!("reading {}", snap.display()))?);
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok((cfg, inputs))
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<ExitCode> {
    let (cfg, _) = load_config(path)?;
    let dir = out_dir(&cfg, out)?;
    let hash = cfg.hash();
    let spec = RunSpec::from_config(&cfg)?;
    let f0 = cfg.initial_distribution()?;
    let d = cfg.grid.d;
    let mut writer = DiagnosticsWriter::create(&dir.join("diagnostics.csv"), &hash, d, &spec.sobolev, &spec.rho_orders)?;
    let snapshots = cfg.output.snapshots;
    let outcome = simulate(&spec, f0, &mut |row, f| {
        writer.append(row)?;
        if snapshots {
            write_snapshot(&dir.join(format!("snapshot_{:06}.bin", row.step)), f, row.t, &hash)?;
        }
        Ok(())
    })?;
    if snapshots {
        let t = outcome.rows.last().map_or(0.0, |r| r.t);
        write_snapshot(&dir.join("snapshot_final.bin"), &outcome.final_state, t, &hash)?;
    }
    if outcome.rows.len() > 1 {
        let dr = outcome.drifts();
        println!("drift mass={:.3e} momentum={:.3e} L2={:.3e} energy={:.3e}", dr.mass, dr.momentum, dr.l2, dr.energy);
    }
    match outcome.termination {
        Termination::Completed => {
            println!("completed t={}", outcome.rows.last().map_or(0.0, |r| r.t));
            Ok(ExitCode::SUCCESS)
        }
        Termination::BlowUp { t, step, reason } => {
            println!("blowup_time={t}");
            eprintln!("blow-up at step {step}: {reason:?}");
            Ok(ExitCode::from(3))
        }
        Termination::BoundaryContamination { t, fraction } => {
            println!("boundary_contamination_time={t}");
            eprintln!("{fraction:e} of |f| reached the outer 10% of the velocity box");
            Ok(ExitCode::from(4))
        }
    }
}

fn manifest(cfg: &RunConfig, study: &str, eps: &[f64], inputs: &[u8]) -> StudyManifest {
    StudyManifest {
        format_version: vriesz_core::FORMAT_VERSION,
        study: study.into(),
        config_hash: cfg.hash(),
        eps_list: eps.to_vec(),
        grid: cfg.grid,
        dt: cfg.time.dt,
        content_address: content_address(&[inputs, cfg.to_toml().as_bytes()]),
        inputs: vec![],
        csv: String::new(),
    }
}

fn study_eps(cfg: &RunConfig, eps: Option<Vec<f64>>) -> Result<Vec<f64>> {
    match eps.or_else(|| cfg.study.as_ref().map(|s| s.eps.clone())) {
        Some(e) if !e.is_empty() => Ok(e),
        _ => Err(Error::InvalidArgument("no eps list: pass --eps or set [study] eps".into()).into()),
    }
}

fn blowup_exit(err: anyhow::Error) -> Result<ExitCode> {
    if let Some(Error::StudyBlowUp { eps, t }) = err.downcast_ref::<Error>() {
        println!("blowup_time={t}");
        eprintln!("member eps = {eps} terminated early");
        return Ok(ExitCode::from(3));
    }
    Err(err)
}

fn cmd_study_eps(path: &Path, eps: Option<Vec<f64>>, out: Option<PathBuf>) -> Result<ExitCode> {
    let (cfg, mut inputs) = load_config(path)?;
    let eps = study_eps(&cfg, eps)?;
    inputs.extend(format!("{eps:?}").bytes());
    let dir = out_dir(&cfg, out)?;
    let study = match epsilon_convergence_study(&cfg, &eps) {
        Ok(s) => s,
        Err(e) => return blowup_exit(e.into()),
    };
    let mut m = manifest(&cfg, "epsilon_convergence", &eps, &inputs);
    m.inputs.push(path.display().to_string());
    let csv = write_study(&dir, "eps_study", &vriesz_core::experiments::EpsStudy::columns(), &study.table(), m)?;
    for r in &study.rows {
        println!("eps={} f_error={} rho_error={}", r.eps, r.f_error, r.rho_error);
    }
    if let Some(o) = study.order {
        println!("order={} residual={}", o.order, o.residual);
    }
    println!("wrote {}", csv.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_study_bootstrap(
    path: &Path,
    eps: Option<Vec<f64>>,
    m: Option<u32>,
    weight: Option<f64>,
    bound: Option<f64>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let (cfg, mut inputs) = load_config(path)?;
    let eps = study_eps(&cfg, eps)?;
    let s = cfg.study.clone().unwrap_or(vriesz_core::config::StudyConfig {
        eps: vec![],
        m: 5,
        weight: 6.0,
        bound: None,
        t_list: vec![],
    });
    let (m, weight, bound) = (m.unwrap_or(s.m), weight.unwrap_or(s.weight), bound.or(s.bound));
    inputs.extend(format!("{eps:?} m={m} weight={weight} bound={bound:?}").bytes());
    let dir = out_dir(&cfg, out)?;
    let study = match bootstrap_monitor(&cfg, &eps, m, weight, bound) {
        Ok(s) => s,
        Err(e) => return blowup_exit(e.into()),
    };
    for w in &study.warnings {
        eprintln!("warning: {w}");
    }
    let mut man = manifest(&cfg, "bootstrap", &eps, &inputs);
    man.inputs.push(path.display().to_string());
    let cols = study.columns();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let csv = write_study(&dir, "bootstrap_study", &cols, &study.table(), man)?;
    for s in &study.series {
        println!("eps={} N_final={}", s.eps, s.values.last().copied().unwrap_or(f64::NAN));
    }
    println!("max_final={}", study.max_final);
    for (e, t) in &study.exceeded {
        println!("exceeded eps={e} t={t}");
    }
    println!("wrote {}", csv.display());
    Ok(ExitCode::SUCCESS)
}
