//! Command-line front end: run scenarios, compare strategies, tune unit
//! controllers and generate synthetic weather.
//!
//! Exit codes are a stable contract for scripting: 0 on success, 1 for
//! validation problems (bad flags, unreadable or inconsistent inputs), 2 for
//! runtime failures (numerical breakdown, write errors).

use std::process::ExitCode;

use heatfair::control::{tune_a0, tune_a1, well_tuned_residual};
use heatfair::coordination::Strategy;
use heatfair::engine::{run, write_result_dir};
use heatfair::metrics::compare;
use heatfair::scenario::{
    bundled_scenario, bundled_scenario_names, demo_units, table1_units, PowerSchedule, Scenario,
};
use heatfair::weather::{synth_weather, SynthWeather};
use heatfair::{AllocationMode, Error, UnitParams};

const USAGE: &str = "\
usage: heatfair <command> [options]

commands:
  run      --scenario <name|file> --out <dir> [--set key=value ...]
  compare  --scenario <name|file> --strategies <list> [--lambda <list>]
           --out <dir> [--set key=value ...]
  tune     --params <name|file> [--Tc <degC>]
  weather  --out <file> [--base <degC>] [--amplitude <degC>] [--period <h>]
           [--depth <degC>] [--snap <start:end>] [--duration <h>]

A <name|file> is either a bundled scenario/parameter-set name or a path to a
JSON document. Bundled scenarios: table1-{skewed,flat,gain,price} and
demo-{skewed,flat,gain,price}; bundled parameter sets: table1, demo.

Strategy names for `compare` and `--set strategy=`: skewed, flat, gain,
price (price needs `--lambda`, one factor per unit, e.g. `--lambda 2,2,1`).

Recognized `--set` keys: P_max, T_c, t0_h, t_end_h, coordination_interval_s,
output_interval_h, allocation_mode, feedback_mode, a1_sign, strategy, lambda.
";

enum CliError {
    /// Bad invocation or bad inputs.
    Usage(String),
    /// Error surfaced from the library.
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) if e.is_validation() => 1,
            CliError::Lib(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{USAGE}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let (cmd, rest) = args
        .split_first()
        .ok_or_else(|| CliError::Usage("missing command".to_string()))?;
    match cmd.as_str() {
        "run" => cmd_run(rest),
        "compare" => cmd_compare(rest),
        "tune" => cmd_tune(rest),
        "weather" => cmd_weather(rest),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// Flag parsing
// ---------------------------------------------------------------------------

struct Flags {
    pairs: Vec<(String, String)>,
}

impl Flags {
    /// Parse `--flag value` pairs; `repeatable` flags may occur many times.
    fn parse(args: &[String], known: &[&str], repeatable: &[&str]) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let name = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("unexpected argument `{arg}`")))?;
            if !known.contains(&name) {
                return Err(CliError::Usage(format!("unknown flag `--{name}`")));
            }
            let value = it
                .next()
                .ok_or_else(|| CliError::Usage(format!("flag `--{name}` needs a value")))?;
            if !repeatable.contains(&name) && pairs.iter().any(|(n, _)| n == name) {
                return Err(CliError::Usage(format!("flag `--{name}` given twice")));
            }
            pairs.push((name.to_string(), value.clone()));
        }
        Ok(Flags { pairs })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, name: &str) -> Result<&str, CliError> {
        self.get(name)
            .ok_or_else(|| CliError::Usage(format!("missing required flag `--{name}`")))
    }

    fn all(&self, name: &str) -> Vec<&str> {
        self.pairs
            .iter()
            .filter(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    fn get_f64(&self, name: &str, default: f64) -> Result<f64, CliError> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => parse_f64(name, v),
        }
    }
}

fn parse_f64(name: &str, v: &str) -> Result<f64, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("cannot parse `--{name} {v}` as a number")))
}

fn parse_f64_list(name: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("cannot parse `{x}` in `--{name} {v}`")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scenario loading and overrides
// ---------------------------------------------------------------------------

fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    if let Some(s) = bundled_scenario(spec) {
        return Ok(s);
    }
    if !std::path::Path::new(spec).exists() {
        return Err(CliError::Usage(format!(
            "`{spec}` is neither a bundled scenario ({}) nor an existing file",
            bundled_scenario_names().join(", ")
        )));
    }
    Ok(Scenario::from_path(spec)?)
}

fn apply_overrides(scenario: &mut Scenario, flags: &Flags) -> Result<(), CliError> {
    for setting in flags.all("set") {
        let (key, value) = setting.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("`--set {setting}` is not of the form key=value"))
        })?;
        apply_override(scenario, key.trim(), value.trim())?;
    }
    Ok(())
}

fn apply_override(scenario: &mut Scenario, key: &str, value: &str) -> Result<(), CliError> {
    let bad = |k: &str, v: &str| CliError::Usage(format!("cannot parse `--set {k}={v}`"));
    match key {
        "P_max" => {
            let v: f64 = value.parse().map_err(|_| bad(key, value))?;
            scenario.p_max = PowerSchedule::Constant(v);
        }
        "T_c" => scenario.t_c = value.parse().map_err(|_| bad(key, value))?,
        "t0_h" => scenario.t0_h = value.parse().map_err(|_| bad(key, value))?,
        "t_end_h" => scenario.t_end_h = value.parse().map_err(|_| bad(key, value))?,
        "coordination_interval_s" => {
            scenario.coordination_interval_s = value.parse().map_err(|_| bad(key, value))?
        }
        "output_interval_h" => {
            scenario.output_interval_h = value.parse().map_err(|_| bad(key, value))?
        }
        "allocation_mode" => {
            scenario.allocation_mode = match value {
                "clamp" => AllocationMode::Clamp,
                "redistribute" => AllocationMode::Redistribute,
                _ => return Err(bad(key, value)),
            }
        }
        "feedback_mode" => {
            scenario.feedback_mode = match value {
                "continuous" => heatfair::scenario::FeedbackMode::Continuous,
                "sampled" => heatfair::scenario::FeedbackMode::Sampled,
                _ => return Err(bad(key, value)),
            }
        }
        "a1_sign" => {
            scenario.a1_sign = match value {
                "as-given" => heatfair::scenario::A1Sign::AsGiven,
                "negated" => heatfair::scenario::A1Sign::Negated,
                _ => return Err(bad(key, value)),
            }
        }
        "strategy" => {
            scenario.strategy = strategy_by_name(value, None, scenario)?;
        }
        "lambda" => {
            let lambda = parse_f64_list(key, value)?;
            match &mut scenario.strategy {
                Strategy::PriceProportional { lambda: l } => *l = lambda,
                _ => {
                    return Err(CliError::Usage(
                        "`--set lambda=` only applies to the price strategy".to_string(),
                    ))
                }
            }
        }
        _ => return Err(CliError::Usage(format!("unknown `--set` key `{key}`"))),
    }
    Ok(())
}

fn strategy_by_name(
    name: &str,
    lambda: Option<&Vec<f64>>,
    scenario: &Scenario,
) -> Result<Strategy, CliError> {
    match name {
        "skewed" => Ok(Strategy::Skewed),
        "flat" => Ok(Strategy::Flat),
        "gain" => Ok(Strategy::GainProportional),
        "price" => {
            // Reuse the scenario's own factors when it is already
            // price-weighted and no explicit list was given.
            if let Some(l) = lambda {
                return Ok(Strategy::PriceProportional { lambda: l.clone() });
            }
            if let Strategy::PriceProportional { lambda } = &scenario.strategy {
                return Ok(Strategy::PriceProportional {
                    lambda: lambda.clone(),
                });
            }
            Err(CliError::Usage(
                "strategy `price` needs `--lambda` (one factor per unit)".to_string(),
            ))
        }
        other => Err(CliError::Usage(format!(
            "unknown strategy `{other}` (expected skewed, flat, gain or price)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_run(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(args, &["scenario", "out", "set"], &["set"])?;
    let mut scenario = load_scenario(flags.require("scenario")?)?;
    apply_overrides(&mut scenario, &flags)?;
    let out = flags.require("out")?;
    let result = run(&scenario)?;
    write_result_dir(&result, out)?;
    println!(
        "{}: {} rounds, total discomfort {:.4} degC h, total consumption {:.4} MWh -> {out}",
        scenario.name.as_deref().unwrap_or("scenario"),
        result.rounds.len(),
        result.metrics.total_discomfort_ch,
        result.metrics.total_consumption_mwh,
    );
    Ok(())
}

fn cmd_compare(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &["scenario", "strategies", "lambda", "out", "set"],
        &["set"],
    )?;
    let mut base = load_scenario(flags.require("scenario")?)?;
    apply_overrides(&mut base, &flags)?;
    let lambda = flags
        .get("lambda")
        .map(|v| parse_f64_list("lambda", v))
        .transpose()?;
    let names: Vec<&str> = flags
        .require("strategies")?
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(CliError::Usage("`--strategies` is empty".to_string()));
    }
    let out = std::path::Path::new(flags.require("out")?);

    let mut results = Vec::new();
    for name in &names {
        let mut scenario = base.clone();
        scenario.strategy = strategy_by_name(name, lambda.as_ref(), &base)?;
        scenario.name = Some(format!(
            "{}-{name}",
            base.name.as_deref().unwrap_or("scenario")
        ));
        let result = run(&scenario)?;
        write_result_dir(&result, out.join(name))?;
        results.push((name.to_string(), result));
    }
    let borrowed: Vec<(String, &heatfair::SimulationResult)> =
        results.iter().map(|(n, r)| (n.clone(), r)).collect();
    let report = compare(&borrowed)?;
    let text = report.to_string();
    std::fs::create_dir_all(out).map_err(Error::from)?;
    std::fs::write(out.join("report.txt"), &text).map_err(Error::from)?;
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )
    .map_err(Error::from)?;
    print!("{text}");
    Ok(())
}

fn load_units(spec: &str) -> Result<Vec<UnitParams>, CliError> {
    match spec {
        "table1" => Ok(table1_units()),
        "demo" => Ok(demo_units()),
        path => {
            if !std::path::Path::new(path).exists() {
                return Err(CliError::Usage(format!(
                    "`{path}` is neither a bundled parameter set (table1, demo) nor an existing file"
                )));
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::MissingInput {
                path: path.to_string(),
                source: e,
            })?;
            let units: Vec<UnitParams> = serde_json::from_str(&text).map_err(Error::from)?;
            for u in &units {
                u.validate()?;
            }
            Ok(units)
        }
    }
}

fn cmd_tune(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(args, &["params", "Tc"], &[])?;
    let units = load_units(flags.require("params")?)?;
    let t_c = flags.get("Tc").map(|v| parse_f64("Tc", v)).transpose()?;
    for u in &units {
        let residual = well_tuned_residual(u);
        let a1_star = tune_a1(u);
        print!("{}: residual={residual} a1*={a1_star}", u.unit_id);
        if let Some(t_c) = t_c {
            let mut tuned = u.clone();
            tuned.a1 = a1_star;
            let a0_star = tune_a0(&tuned, t_c)?;
            print!(" a0*={a0_star} (Tc={t_c})");
        }
        println!();
    }
    Ok(())
}

fn cmd_weather(args: &[String]) -> Result<(), CliError> {
    let flags = Flags::parse(
        args,
        &[
            "out",
            "base",
            "amplitude",
            "period",
            "depth",
            "snap",
            "duration",
        ],
        &[],
    )?;
    let out = flags.require("out")?;
    let (snap_start_h, snap_end_h) = match flags.get("snap") {
        None => (72.0, 120.0),
        Some(v) => {
            let (a, b) = v.split_once(':').ok_or_else(|| {
                CliError::Usage(format!("`--snap {v}` is not of the form start:end"))
            })?;
            (parse_f64("snap", a)?, parse_f64("snap", b)?)
        }
    };
    let duration = flags.get_f64("duration", 240.0)?;
    if !(duration.is_finite() && duration >= 2.0 && duration <= u32::MAX as f64) {
        return Err(CliError::Usage(format!(
            "`--duration {duration}` must be at least 2 hourly samples"
        )));
    }
    let spec = SynthWeather {
        base_c: flags.get_f64("base", -2.0)?,
        amplitude_c: flags.get_f64("amplitude", 1.5)?,
        period_h: flags.get_f64("period", 24.0)?,
        snap_depth_c: flags.get_f64("depth", 10.0)?,
        snap_start_h,
        snap_end_h,
        duration_h: duration as u32,
    };
    let series = synth_weather(&spec)?;
    std::fs::write(out, series.to_csv_string().as_bytes()).map_err(Error::from)?;
    println!(
        "wrote {} hourly samples spanning [{}, {}] h -> {out}",
        series.samples().len(),
        series.first_time_h(),
        series.last_time_h()
    );
    Ok(())
}
