// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! `czpulse`: run the CZ-gate experiments from a TOML config and write CSV tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use czpulse_core::config::{Config, SpectrumRange};
use czpulse_core::experiments::{self, Deviation, RunOptions};
use czpulse_core::output::{RunManifest, Table};
use czpulse_core::Error;

const SPECTRUM_SCHEMA: &str = "\
Outputs:
  spectrum.csv  omega_c_ghz, label, energy_ghz
  zeta.csv      omega_c_ghz, zeta_mhz, g_eff_mhz, d_factor, abs_zeta_mhz,
                zeta_no_direct_mhz, d_divergent
Energies in GHz, zeta and g_eff in MHz, d_factor in ns^2.";

const GATE_SCHEMA: &str = "\
Outputs:
  gate.csv      tg_ns, epg, phi_zz_rad, leakage_total, phi1_rad, phi2_rad,
                lambda1..lambda4, evals, unitarity_defect, error, kind
  waveform.csv  t_ns, omega_c_ghz
Prints `epg=<value> phi_zz=<value>` on success.";

const DESIGNMAP_SCHEMA: &str = "\
Outputs:
  designmap_epg.csv         delta12_mhz, alpha_c_mhz, idle_ghz, bound_ghz, epg, lambda1, error
  designmap_indicators.csv  delta12_mhz, alpha_c_mhz, omega_c_ghz, abs_zeta_mhz, d_star_ns2,
                            d_divergent, error";

const STRAY_SCHEMA: &str = "\
Needs the five-mode chain (Q1, C1, Q2, C2, Q3) with C1 tunable.
Outputs:
  stray.csv           gate, stray, mode_i, mode_j, stray_mhz, epg, phi_zz_rad, leakage_total,
                      phi1_rad, phi2_rad, lambda1..lambda4, evals, unitarity_defect, error
  stray_baseline.csv  circuit, epg, leakage, lambda1, error";

const NOISE_SCHEMA: &str = "\
Needs [noise] and [flux] sections. Rates in 1/us.
Outputs:
  noise_rates.csv   omega_c_ghz, gamma_ss, gamma_sl, gamma_phi_100, gamma_phi_001,
                    gamma_phi_101, clamped
  noise_budget.csv  tg_ns, eps_transition_ss, eps_transition_sl, eps_transition, eps_dephasing,
                    eps_total, eps_transition_projected, eps_dephasing_projected,
                    epg_coherent, error
  noise_phase.csv   pulse, noise, eps_phase, dc_power_100, error";

const SCHEMES_SCHEMA: &str = "\
Outputs:
  schemes.csv       scheme, omega_c_ghz, zeta_mhz, abs_zeta_mhz, d_factor_ns2, d_divergent,
                    pulsed_side
  schemes_idle.csv  scheme, idle_ghz, zeta_idle_khz, max_abs_zeta_pulsed_mhz, error";

#[derive(Parser, Debug)]
#[command(name = "czpulse", version, about = "Adiabatic CZ gates with a tunable coupler")]
#[command(after_help = "Logging: set CZPULSE_LOG to error, info or debug.\n\
Exit codes: 0 success, 2 usage or config error, 3 numerical or calibration failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML config file
    #[arg(long)]
    config: PathBuf,
    /// output directory for CSV files and the run manifest
    #[arg(long)]
    out: PathBuf,
    /// overrides [job].seed
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads, 0 for all logical cores; overrides [job].workers
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tracked spectrum, ZZ strength and D-factor versus coupler frequency
    #[command(after_help = SPECTRUM_SCHEMA)]
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// start,stop,points in GHz; overrides [spectrum]
        #[arg(long)]
        range: Option<String>,
    },
    /// Optimize or evaluate one gate from [pulse]
    #[command(after_help = GATE_SCHEMA)]
    Gate {
        #[command(flatten)]
        common: Common,
        /// pulse family: awp, fourier or netzero
        #[arg(long)]
        kind: Option<String>,
        /// gate time in ns
        #[arg(long)]
        tg: Option<f64>,
        /// number of Fourier components to optimize
        #[arg(long)]
        mmax: Option<usize>,
        /// fixed lambdas, comma separated (skips optimization)
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lambdas: Option<Vec<f64>>,
        /// reflection distortion `r,td_ns`
        #[arg(long)]
        distort: Option<String>,
        /// parameter deviation `param,delta`, e.g. omega1,+10MHz or rho12,-10%; repeatable
        #[arg(long, allow_hyphen_values = true)]
        deviate: Vec<String>,
    },
    /// Optimized error over qubit detuning and coupler anharmonicity
    #[command(after_help = DESIGNMAP_SCHEMA)]
    Designmap {
        #[command(flatten)]
        common: Common,
    },
    /// Five-mode spectator study with next-nearest-neighbour stray couplings
    #[command(after_help = STRAY_SCHEMA)]
    Stray {
        #[command(flatten)]
        common: Common,
    },
    /// Decoherence rates and benchmarking error budget
    #[command(after_help = NOISE_SCHEMA)]
    Noise {
        #[command(flatten)]
        common: Common,
    },
    /// ZZ and D-factor for the four coupler placement and tuning schemes
    #[command(after_help = SCHEMES_SCHEMA)]
    Schemes {
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment by id (see `czpulse list`); defaults to [job].experiment
    Run {
        #[command(flatten)]
        common: Common,
        experiment: Option<String>,
    },
    /// List experiment ids
    List,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::UnknownExperiment(_) | Error::Io(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn load(common: &Common) -> Result<Config, Failure> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.job.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.job.workers = w;
    }
    Ok(cfg)
}

fn write_outputs(common: &Common, experiment: &str, seed: u64, tables: &[Table]) -> Result<(), Failure> {
    let mut files = Vec::new();
    for t in tables {
        let p = t.write(&common.out)?;
        log::info!("wrote {}", p.display());
        files.push(file_name(&p));
    }
    let manifest = RunManifest {
        config: common.config.display().to_string(),
        experiment: experiment.to_string(),
        out_dir: common.out.display().to_string(),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        files,
    };
    let p = manifest.write(&common.out)?;
    log::info!("wrote {}", p.display());
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn run_experiment(common: &Common, cfg: &Config, id: &str) -> Result<(), Failure> {
    log::info!("running {id}");
    let opts = RunOptions { seed: cfg.job.seed, workers: cfg.job.workers };
    let tables = experiments::run(id, cfg, opts)?;
    for t in &tables {
        if let Some(k) = t.column("error") {
            let failed = t.rows.iter().filter(|r| !r[k].to_string().is_empty()).count();
            if failed > 0 {
                log::warn!("{}: {failed} of {} rows failed", t.name, t.rows.len());
            }
        }
    }
    write_outputs(common, id, cfg.job.seed, &tables)
}

fn parse_range(s: &str) -> Result<SpectrumRange, Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || usage(format!("--range expects start,stop,points, got '{s}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let r = SpectrumRange {
        start_ghz: parts[0].parse().map_err(|_| bad())?,
        stop_ghz: parts[1].parse().map_err(|_| bad())?,
        points: parts[2].parse().map_err(|_| bad())?,
    };
    r.grid().map_err(|e| usage(e.to_string()))?;
    Ok(r)
}

fn parse_distortion(s: &str) -> Result<[f64; 2], Failure> {
    let bad = || usage(format!("--distort expects r,td_ns, got '{s}'"));
    let (r, td) = s.split_once(',').ok_or_else(bad)?;
    Ok([r.trim().parse().map_err(|_| bad())?, td.trim().parse().map_err(|_| bad())?])
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::List => {
            for (id, about) in experiments::EXPERIMENTS {
                println!("{id:<10} {about}");
            }
            Ok(())
        }
        Command::Spectrum { common, range } => {
            let mut cfg = load(&common)?;
            if let Some(r) = range {
                cfg.spectrum = Some(parse_range(&r)?);
            } else if let Some(r) = &cfg.spectrum {
                r.grid().map_err(|e| usage(e.to_string()))?;
            }
            run_experiment(&common, &cfg, "fig2")
        }
        Command::Gate { common, kind, tg, mmax, lambdas, distort, deviate } => {
            let mut cfg = load(&common)?;
            if let Some(k) = kind {
                cfg.pulse.kind = k;
            }
            if let Some(t) = tg {
                cfg.pulse.tg_ns = t;
            }
            if let Some(m) = mmax {
                cfg.pulse.mmax = m;
            }
            if let Some(l) = lambdas {
                cfg.pulse.lambdas = l;
            }
            if let Some(d) = distort {
                cfg.pulse.distortion = Some(parse_distortion(&d)?);
            }
            cfg.validate()?;
            let devs = deviate.iter().map(|d| Deviation::parse(d)).collect::<Result<Vec<_>, _>>()?;
            let kind = cfg.pulse.kind()?;
            let outcome = experiments::configured_gate(&cfg, &devs)?;
            println!("epg={:e} phi_zz={}", outcome.report.epg, outcome.report.phi_zz);
            let tables = experiments::gate_tables(kind, &outcome)?;
            write_outputs(&common, "gate", cfg.job.seed, &tables)
        }
        Command::Designmap { common } => run_experiment(&common, &load(&common)?, "designmap"),
        Command::Stray { common } => run_experiment(&common, &load(&common)?, "stray"),
        Command::Noise { common } => run_experiment(&common, &load(&common)?, "noise"),
        Command::Schemes { common } => run_experiment(&common, &load(&common)?, "schemes"),
        Command::Run { common, experiment } => {
            let cfg = load(&common)?;
            let id = experiment
                .or_else(|| cfg.job.experiment.clone())
                .ok_or_else(|| usage("no experiment given and [job].experiment is not set".into()))?;
            run_experiment(&common, &cfg, &id)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CZPULSE_LOG", "error")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("czpulse: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
