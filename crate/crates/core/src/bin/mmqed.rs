use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use mmqed::acceptance::{run_all, CriterionOutcome};
use mmqed::artifacts::write_json;
use mmqed::config::{Manifest, RunConfig, SCHEMA_VERSION};
use mmqed::dynamics::{lz_ramp_experiment, slow_fringe_frequency, stark_plateau, stark_ramsey};
use mmqed::error::{Error, Result};
use mmqed::gates::{bell_experiment, calibrate_cz};
use mmqed::spectroscopy::{eigen_sweep, exchange_scan, write_exchange_csv};

#[derive(Parser)]
#[command(name = "mmqed", version, about = "Two qubits coupled through a multimode resonator filter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML profile layered over the built-in device defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set device.g_f=0.12`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Master seed for noise sampling, shots and bootstrap.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single- or two-excitation spectrum along a qubit sweep.
    Spectroscopy,
    /// Exchange rate against qubit–filter detuning.
    ExchangeScan,
    /// Excited population after ramp, hold and return through the filter band.
    LzRamp {
        /// Add qubit T1 and quasi-static dephasing.
        #[arg(long)]
        decoherence: bool,
    },
    /// Ramsey fringe frequency of qubit 1 with a photon stored in the filter.
    StarkRamsey {
        /// Add qubit T1 and quasi-static dephasing.
        #[arg(long)]
        decoherence: bool,
    },
    /// Calibrate the controlled-phase gate.
    CzCalibrate,
    /// Calibrate, then prepare and tomograph a Bell state.
    Bell {
        /// Add qubit T1 and quasi-static dephasing.
        #[arg(long)]
        decoherence: bool,
    },
    /// Run every acceptance check on the resolved profile.
    Validate,
    /// Print the resolved profile as TOML.
    ShowConfig,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectroscopy => "spectroscopy",
            Command::ExchangeScan => "exchange-scan",
            Command::LzRamp { .. } => "lz-ramp",
            Command::StarkRamsey { .. } => "stark-ramsey",
            Command::CzCalibrate => "cz-calibrate",
            Command::Bell { .. } => "bell",
            Command::Validate => "validate",
            Command::ShowConfig => "show-config",
        }
    }
}

/// JSON artifact carrying the config hash next to its payload.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    schema_version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    data: &'a T,
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(BufWriter<File>, Option<&str>) -> Result<()>) -> Result<()> {
        let f = self.create(name)?;
        write(f, Some(&self.manifest.config_hash))?;
        self.manifest.artifacts.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let m = &self.manifest;
        let stamped = Stamped {
            schema_version: SCHEMA_VERSION,
            command: &m.command,
            config_hash: &m.config_hash,
            seed: m.seed,
            data,
        };
        write_json(self.create(name)?, &stamped)?;
        self.manifest.artifacts.push(name.into());
        Ok(())
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.display().to_string();
    }
    match &cli.command {
        Command::LzRamp { decoherence: true } => cfg.lz.decoherence.enabled = true,
        Command::StarkRamsey { decoherence: true } => cfg.stark.decoherence.enabled = true,
        Command::Bell { decoherence: true } => cfg.bell.decoherence.enabled = true,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig, run: &mut Run) -> Result<bool> {
    let p = &cfg.device;
    match &cli.command {
        Command::Spectroscopy => {
            let s = &cfg.spectroscopy;
            let table = eigen_sweep(p, &s.sweep_axis(&cfg.transmons), &s.grid(), s.block, s.other_nu)?;
            run.csv("spectrum.csv", |f, h| table.write_csv(f, h))?;
        }
        Command::ExchangeScan => {
            let rows = exchange_scan(p, &cfg.exchange.centers)?;
            run.csv("exchange.csv", |f, h| write_exchange_csv(&rows, f, h))?;
        }
        Command::LzRamp { .. } => {
            let open = cfg.lz.decoherence.with_seed(cfg.seed);
            let r = lz_ramp_experiment(p, &cfg.lz.ramp, Some(&cfg.transmons[0]), &open)?;
            run.csv("lz_ramp.csv", |f, h| r.write_csv(f, h))?;
            #[derive(Serialize)]
            struct Summary {
                slow_fringe_ghz: Option<f64>,
                realizations: usize,
            }
            let fringe = slow_fringe_frequency(&r, 10.0, 0.05, 0.5).ok();
            run.json("lz_summary.json", &Summary { slow_fringe_ghz: fringe, realizations: r.realizations })?;
        }
        Command::StarkRamsey { .. } => {
            let open = cfg.stark.decoherence.with_seed(cfg.seed);
            let r = stark_ramsey(p, &cfg.stark.protocol, &open)?;
            run.csv("stark.csv", |f, h| r.write_csv(f, h))?;
            #[derive(Serialize)]
            struct Summary {
                plateau_ghz: Option<f64>,
                artificial_detuning_ghz: f64,
                realizations: usize,
            }
            let plateau = stark_plateau(p, &r, 1.0).ok();
            let summary = Summary {
                plateau_ghz: plateau,
                artificial_detuning_ghz: cfg.stark.protocol.artificial_detuning,
                realizations: r.realizations,
            };
            run.json("stark_summary.json", &summary)?;
        }
        Command::CzCalibrate => {
            let cal = calibrate_cz(p, &cfg.cz.schedule, &cfg.cz.calibration)?;
            run.csv("cz_phase_trace.csv", |f, h| cal.write_trace_csv(f, h))?;
            run.json("cz_calibration.json", &cal)?;
        }
        Command::Bell { .. } => {
            let cal = calibrate_cz(p, &cfg.cz.schedule, &cfg.cz.calibration)?;
            let out = bell_experiment(p, &cal.schedule, &cfg.bell.options(cfg.seed), cfg.seed)?;
            run.json("bell.json", &out.report)?;
        }
        Command::Validate => {
            let outcomes = run_all(cfg, |o| println!("{o}"));
            for o in &outcomes {
                run.manifest.timings.insert(format!("criterion_{}", o.id), o.seconds);
            }
            let passed = outcomes.iter().all(|o| o.passed);
            #[derive(Serialize)]
            struct Summary<'a> {
                passed: bool,
                criteria: &'a [CriterionOutcome],
            }
            run.json("acceptance.json", &Summary { passed, criteria: &outcomes })?;
            println!("{}", if passed { "all acceptance checks passed" } else { "acceptance checks FAILED" });
            return Ok(passed);
        }
        Command::ShowConfig => unreachable!("handled before any artifact is written"),
    }
    Ok(true)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write_json(BufWriter::new(File::create(dir.join("manifest.json"))?), manifest)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::ShowConfig = cli.command {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let dir = PathBuf::from(&cfg.out);
    if let Err(e) = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("config.toml"), cfg.to_toml())) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    let threads = rayon::current_num_threads();
    let mut run = Run { dir: dir.clone(), manifest: Manifest::new(cli.command.name(), &cfg, threads) };
    let start = Instant::now();
    let result = execute(&cli, &cfg, &mut run);
    run.manifest.wall_time_s = start.elapsed().as_secs_f64();
    let code = match &result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            run.manifest.status = "failed".into();
            ExitCode::from(1)
        }
        Err(e) => {
            run.manifest.status = format!("error: {e}");
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config { .. }) { 2 } else { 1 })
        }
    };
    if let Err(e) = write_manifest(&dir, &run.manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    code
}
