use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fuzzydiag::alerting::Dispatcher;
use fuzzydiag::baseline::ProfileSet;
use fuzzydiag::config::Config;
use fuzzydiag::ingest::{FlowRecord, IngestError, RecordReader};
use fuzzydiag::pipeline::{run_detect, run_survey, run_tune, ModuleRuleBases};
use fuzzydiag::report::summarize;
use fuzzydiag::rulebook::{save_rulebase, ModuleKind};
use fuzzydiag::simgen::{generate, reference_scenario, ScenarioSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_COLD_START: u8 = 4;

#[derive(Parser)]
#[command(name = "fuzzydiag", about = "Fuzzy diagnostics for network traffic flow anomalies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a baseline profile from a flow-record stream
    Survey {
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Record file, or `-` for standard input
        #[arg(long, short, default_value = "-")]
        input: String,
    },
    /// Run detection against a learned profile
    Detect {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, short, default_value = "-")]
        input: String,
    },
    /// Displace intensity membership functions from Normal-labeled traffic
    Tune {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, short, default_value = "-")]
        input: String,
        /// Directory for the tuned rule-base files
        #[arg(long, default_value = "tuned")]
        out_dir: PathBuf,
    },
    /// Emit a synthetic scenario as a flow-record stream
    Simulate {
        /// Built-in scenario name, or path to a scenario TOML file
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; standard output when omitted
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Summarize an alert log
    Report {
        log: PathBuf,
        /// Write per-module columnar plot data into this directory
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, u8> {
    match path {
        Some(p) => Config::load(p).map_err(|e| {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }),
        None => Ok(Config::default()),
    }
}

fn open_records(
    input: &str,
) -> Result<Box<dyn Iterator<Item = Result<FlowRecord, IngestError>>>, u8> {
    if input == "-" {
        Ok(Box::new(RecordReader::new(BufReader::new(io::stdin()))))
    } else {
        let file = File::open(input).map_err(|e| {
            eprintln!("cannot open input {input}: {e}");
            EXIT_INPUT
        })?;
        Ok(Box::new(RecordReader::new(BufReader::new(file))))
    }
}

fn load_profiles(cfg: &Config) -> Result<ProfileSet, u8> {
    let profiles = ProfileSet::load(&cfg.profile_path).map_err(|e| {
        eprintln!("cannot load profile {}: {e}", cfg.profile_path.display());
        EXIT_COLD_START
    })?;
    if profiles.uncovered_slots() == profiles.total_slots() {
        eprintln!("profile {} has no coverage; run survey first", cfg.profile_path.display());
        return Err(EXIT_COLD_START);
    }
    Ok(profiles)
}

fn cmd_survey(config: Option<PathBuf>, input: String) -> Result<(), u8> {
    let cfg = load_config(&config)?;
    let records = open_records(&input)?;
    let mut profiles = match ProfileSet::load(&cfg.profile_path) {
        Ok(existing) => existing,
        Err(_) => ProfileSet::new(cfg.slot_len, cfg.weekly, cfg.epsilon).map_err(|e| {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        })?,
    };
    let summary = run_survey(records, &cfg, &mut profiles).map_err(|e| {
        eprintln!("survey failed: {e}");
        EXIT_INPUT
    })?;
    profiles.save(&cfg.profile_path).map_err(|e| {
        eprintln!("cannot write profile {}: {e}", cfg.profile_path.display());
        EXIT_CONFIG
    })?;
    println!(
        "survey: windows={} rejected={} parse_errors={} covered_slots={}/{}",
        summary.windows,
        summary.rejected,
        summary.parse_errors,
        summary.total_slots - summary.uncovered_slots,
        summary.total_slots
    );
    if summary.uncovered_slots == summary.total_slots {
        eprintln!("warning: no slots covered");
        return Err(EXIT_INPUT);
    }
    Ok(())
}

fn cmd_detect(config: Option<PathBuf>, input: String) -> Result<(), u8> {
    let cfg = load_config(&config)?;
    let profiles = load_profiles(&cfg)?;
    let rulebases = ModuleRuleBases::from_config(&cfg).map_err(|e| {
        eprintln!("cannot load rule bases: {e}");
        EXIT_CONFIG
    })?;
    let sinks = cfg.sink_config().map_err(|e| {
        eprintln!("config error: {e}");
        EXIT_CONFIG
    })?;
    let log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&sinks.log_path)
        .map_err(|e| {
            eprintln!("cannot open log sink {}: {e}", sinks.log_path.display());
            EXIT_CONFIG
        })?;
    let mut dispatcher = Dispatcher::new(BufWriter::new(log), sinks.email, sinks.sms);
    let records = open_records(&input)?;
    let s = run_detect(records, &cfg, &profiles, &rulebases, &mut dispatcher).map_err(|e| {
        eprintln!("detect failed: {e}");
        EXIT_INPUT
    })?;
    println!(
        "detect: windows={} decisions ignore={} log={} email={} sms={}",
        s.windows, s.decisions[0], s.decisions[1], s.decisions[2], s.decisions[3]
    );
    println!(
        "  dispatched log={} email={} sms={} suppressed={} cold_start_skips={} rejected={} parse_errors={} delivery_failures={}",
        s.dispatched[1],
        s.dispatched[2],
        s.dispatched[3],
        s.suppressed,
        s.cold_start_skips,
        s.rejected,
        s.parse_errors,
        s.delivery_failures
    );
    Ok(())
}

fn cmd_tune(config: Option<PathBuf>, input: String, out_dir: PathBuf) -> Result<(), u8> {
    let cfg = load_config(&config)?;
    let profiles = load_profiles(&cfg)?;
    let rulebases = ModuleRuleBases::from_config(&cfg).map_err(|e| {
        eprintln!("cannot load rule bases: {e}");
        EXIT_CONFIG
    })?;
    let records = open_records(&input)?;
    let outcome = run_tune(records, &cfg, &profiles, &rulebases).map_err(|e| {
        eprintln!("tune failed: {e}");
        EXIT_INPUT
    })?;
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        eprintln!("cannot create {}: {e}", out_dir.display());
        EXIT_CONFIG
    })?;
    for (kind, report) in &outcome.reports {
        let path = out_dir.join(format!("{kind}.rules"));
        save_rulebase(outcome.rulebases.get(*kind), &path).map_err(|e| {
            eprintln!("cannot write {}: {e}", path.display());
            EXIT_CONFIG
        })?;
        println!(
            "tune {kind}: samples={} false_alerts before={} after={}{}",
            report.samples_seen,
            report.false_alerts_before,
            report.false_alerts_after,
            report
                .warning
                .as_ref()
                .map(|w| format!(" warning={w}"))
                .unwrap_or_default()
        );
        for (term, disp) in &report.per_term_displacement {
            if *disp != 0.0 {
                println!("  {term}: displacement {disp:+.4}");
            }
        }
    }
    Ok(())
}

fn cmd_simulate(scenario: String, seed: u64, output: Option<PathBuf>) -> Result<(), u8> {
    let spec: ScenarioSpec = if Path::new(&scenario).exists() {
        let text = std::fs::read_to_string(&scenario).map_err(|e| {
            eprintln!("cannot read scenario {scenario}: {e}");
            EXIT_INPUT
        })?;
        toml::from_str(&text).map_err(|e| {
            eprintln!("bad scenario file {scenario}: {e}");
            EXIT_INPUT
        })?
    } else {
        reference_scenario(&scenario).map_err(|e| {
            eprintln!("{e}");
            EXIT_INPUT
        })?
    };
    let records = generate(&spec, seed).map_err(|e| {
        eprintln!("invalid scenario: {e}");
        EXIT_INPUT
    })?;
    let write_all = |w: &mut dyn Write| -> io::Result<()> {
        let mut w = BufWriter::new(w);
        for r in &records {
            writeln!(w, "{}", r.to_line())?;
        }
        w.flush()
    };
    let result = match output {
        Some(path) => {
            let mut f = File::create(&path).map_err(|e| {
                eprintln!("cannot create {}: {e}", path.display());
                EXIT_INPUT
            })?;
            write_all(&mut f)
        }
        None => write_all(&mut io::stdout()),
    };
    result.map_err(|e| {
        eprintln!("write failed: {e}");
        EXIT_INPUT
    })
}

fn cmd_report(log: PathBuf, data_dir: Option<PathBuf>) -> Result<(), u8> {
    let file = File::open(&log).map_err(|e| {
        eprintln!("cannot open log {}: {e}", log.display());
        EXIT_INPUT
    })?;
    let lines = BufReader::new(file).lines().map_while(Result::ok);
    let summary = summarize(lines);
    print!("{}", summary.render());
    if let Some(dir) = data_dir {
        summary.write_plot_data(&dir).map_err(|e| {
            eprintln!("cannot write plot data: {e}");
            EXIT_INPUT
        })?;
        for kind in ModuleKind::ALL {
            println!("wrote {}", dir.join(format!("{kind}.dat")).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Survey { config, input } => cmd_survey(config, input),
        Cmd::Detect { config, input } => cmd_detect(config, input),
        Cmd::Tune { config, input, out_dir } => cmd_tune(config, input, out_dir),
        Cmd::Simulate { scenario, seed, output } => cmd_simulate(scenario, seed, output),
        Cmd::Report { log, data_dir } => cmd_report(log, data_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
