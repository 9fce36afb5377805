//! Batch runner for spin-star magnetometry simulations: config parsing,
//! experiment pipelines, sweeps, oracle checks and file emission.

pub mod commands;
pub mod config;
pub mod output;

use config::{config_err, CliError, RawConfig, RunConfig};

const USAGE: &str = "\
spinstar — spin-star cat-state magnetometry simulator

USAGE:
  spinstar <SUBCOMMAND> [FLAGS]

SUBCOMMANDS:
  spectrum      prepare -> sequence -> readout -> detection; emits spectrum
                and peak CSVs plus an SVG plot
  estimate      field experiment with zero-delay reference phasing; emits
                per-peak estimates CSV and a fused JSON record
  sweep         repeat the estimate over one axis (config sweep.axis/values)
  compile       emit the timed pulse program for the configured sequence
  oracle-check  compare the block engine against the brute-force simulator
                on random operation sequences (n <= 4)

FLAGS (override config-file values):
  --config PATH        JSON configuration file
  --preset NAME        tms | tmp
  --seed U64           master seed (default 0)
  --out DIR            output directory (default out)
  --pulses NAME        ideal | hard | bb1
  --sequence NAME      original | a | b
  --priming BOOL       polarisation-priming prefix
  --delay SECONDS      phase-accumulation delay
  --b0 TESLA           field offset from nominal
  --delta-h HZ         peripheral frequency offset
  --delta-si HZ        centre frequency offset
  --threads N          sweep worker threads
  --axis NAME          sweep axis: delta_center | delta_peripheral | b0
  --values LIST        comma-separated sweep values
  --n N                oracle-check system size (<= 4)
  --trials N           oracle-check trial count
  --help               print this text

EXIT CODES:
  0 ok, 1 config error, 2 numerical/consistency failure
";

fn parse_flag_value<'a>(
    flag: &str,
    it: &mut impl Iterator<Item = &'a String>,
) -> Result<String, CliError> {
    it.next().cloned().ok_or_else(|| config_err(format!("missing value for {flag}")))
}

/// Parse argv (without the program name) and run. Returns the process exit
/// code.
pub fn run(args: &[String]) -> i32 {
    match try_run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn try_run(args: &[String]) -> Result<(), CliError> {
    let mut it = args.iter();
    let sub = match it.next() {
        Some(s) if s == "--help" || s == "-h" => {
            println!("{USAGE}");
            return Ok(());
        }
        Some(s) => s.clone(),
        None => {
            println!("{USAGE}");
            return Err(config_err("missing subcommand"));
        }
    };

    let mut raw = RawConfig::default();
    let mut overrides: Vec<(String, String)> = Vec::new();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--help" | "-h" => {
                println!("{USAGE}");
                return Ok(());
            }
            "--config" => {
                let path = parse_flag_value("--config", &mut it)?;
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| config_err(format!("cannot read {path}: {e}")))?;
                raw = RawConfig::from_json(&text)?;
            }
            flag @ ("--preset" | "--seed" | "--out" | "--pulses" | "--sequence" | "--priming"
            | "--delay" | "--b0" | "--delta-h" | "--delta-si" | "--threads" | "--axis"
            | "--values" | "--n" | "--trials") => {
                let value = parse_flag_value(flag, &mut it)?;
                overrides.push((flag.to_string(), value));
            }
            other => return Err(config_err(format!("unknown flag {other:?}"))),
        }
    }
    for (flag, value) in &overrides {
        apply_override(&mut raw, flag, value)?;
    }
    let config = RunConfig::resolve(&raw)?;
    match sub.as_str() {
        "spectrum" => commands::cmd_spectrum(&config),
        "estimate" => commands::cmd_estimate(&config),
        "sweep" => commands::cmd_sweep(&config),
        "compile" => commands::cmd_compile(&config),
        "oracle-check" => commands::cmd_oracle_check(&config),
        other => Err(config_err(format!(
            "unknown subcommand {other:?} (expected spectrum | estimate | sweep | compile | \
             oracle-check)"
        ))),
    }
}

fn apply_override(raw: &mut RawConfig, flag: &str, value: &str) -> Result<(), CliError> {
    let parse_f64 = |v: &str, what: &str| -> Result<f64, CliError> {
        v.parse::<f64>().map_err(|_| config_err(format!("{what}: invalid number {v:?}")))
    };
    match flag {
        "--preset" => raw.preset = Some(value.to_string()),
        "--seed" => {
            raw.seed = Some(
                value
                    .parse::<u64>()
                    .map_err(|_| config_err(format!("seed: invalid integer {value:?}")))?,
            )
        }
        "--out" => raw.out_dir = Some(value.to_string()),
        "--pulses" => raw.pulses = Some(value.to_string()),
        "--sequence" => raw.sequence = Some(value.to_string()),
        "--priming" => {
            raw.priming = Some(match value {
                "true" | "1" | "yes" | "on" => true,
                "false" | "0" | "no" | "off" => false,
                _ => return Err(config_err(format!("priming: invalid bool {value:?}"))),
            })
        }
        "--delay" => raw.delay_s = Some(parse_f64(value, "delay_s")?),
        "--b0" => raw.b0_tesla = Some(parse_f64(value, "b0_tesla")?),
        "--delta-h" => raw.delta_h_hz = Some(parse_f64(value, "delta_h_hz")?),
        "--delta-si" => raw.delta_si_hz = Some(parse_f64(value, "delta_si_hz")?),
        "--threads" => {
            raw.threads = Some(
                value
                    .parse::<usize>()
                    .map_err(|_| config_err(format!("threads: invalid integer {value:?}")))?,
            )
        }
        "--axis" => raw.sweep.axis = Some(value.to_string()),
        "--values" => {
            let values: Result<Vec<f64>, CliError> = value
                .split(',')
                .map(|v| parse_f64(v.trim(), "sweep.values"))
                .collect();
            raw.sweep.values = Some(values?);
        }
        "--n" => {
            raw.oracle.n = Some(
                value
                    .parse::<u32>()
                    .map_err(|_| config_err(format!("oracle.n: invalid integer {value:?}")))?,
            )
        }
        "--trials" => {
            raw.oracle.trials = Some(
                value
                    .parse::<usize>()
                    .map_err(|_| config_err(format!("oracle.trials: invalid integer {value:?}")))?,
            )
        }
        _ => unreachable!("flag list is closed"),
    }
    Ok(())
}
