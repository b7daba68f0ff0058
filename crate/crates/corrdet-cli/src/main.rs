//! Batch driver for the verification suites, the streaming memory/sample
//! sweep, the broadcast communication sweep, and the Gaussian audits.
//!
//! Exit codes: 0 all checks passed, 1 at least one check failed, 2 usage or
//! configuration error. Reports are JSON, sweeps are CSV (UTF-8, LF, header
//! row); identical config and seed give byte-identical output.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use corrdet::finite_dist::{build_parity_family, SubsetCollection};
use corrdet::gaussian::stack_sigma_gate;
use corrdet::protocol::{build_group_broadcast, run_protocol};
use corrdet::streaming::{bits_for, draw_samples, sweep_tradeoff, GroupScanConfig, SweepStatus};
use corrdet::suites::{
    bias_suite, chain_suite, gaussian_mc_suite, gaussian_suite, margin_suite, parity_suite,
    GaussianMcConfig, GaussianSuiteConfig, MarginSuiteConfig, SuiteReport,
};

const CONFIG_HELP: &str = "\
Config file: flat `key = value` lines, `#` comments. Unknown keys are
rejected. Keys by subcommand:
  verify          suite (all|parity|margins|bias|chain|gaussian),
                  tolerance (float >= 0, overrides every suite tolerance),
                  instances (margin-suite instance count, default 1000)
  sweep-stream    d (>= 2, pair hypotheses), rho, delta (both in (0,1)),
                  budgets (comma-separated state bits; default derived),
                  passes (comma-separated pass counts, default 1),
                  trials (default 20)
  sweep-protocol  d, rho, delta, n_list (comma-separated samples/machine),
                  s_per_machine (bits, default 10),
                  m (machine count; 0 = smallest feasible per row, default 0),
                  trials (default 50)
  gaussian        sigma (default half the stack gate), samples (>= 10000),
                  stacks, tolerance
The seed comes from --seed only.";

#[derive(Parser)]
#[command(name = "corrdet", version, about = "Correlation-detection verification suites and sweeps", after_long_help = CONFIG_HELP)]
struct Cli {
    /// RNG seed for every randomized component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report or CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suite selector for `verify` (overrides the config key).
    #[arg(long, global = true)]
    suite: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact identity and margin suites.
    Verify,
    /// Memory/sample trade-off sweep for the streaming detector (CSV).
    SweepStream,
    /// Communication sweep for the broadcast detector (CSV).
    SweepProtocol,
    /// Closed-form and Monte Carlo Gaussian audits.
    Gaussian,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let raw = load_config(cli.config.as_deref())?;
    if cli.suite.is_some() && !matches!(cli.command, Command::Verify) {
        return Err("--suite only applies to the verify subcommand".to_string());
    }
    match cli.command {
        Command::Verify => cmd_verify(&cli, &raw),
        Command::SweepStream => cmd_sweep_stream(&cli, &raw),
        Command::SweepProtocol => cmd_sweep_protocol(&cli, &raw),
        Command::Gaussian => cmd_gaussian(&cli, &raw),
    }
}

type RawConfig = BTreeMap<String, String>;

fn load_config(path: Option<&std::path::Path>) -> Result<RawConfig, String> {
    let mut map = RawConfig::new();
    let Some(path) = path else {
        return Ok(map);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", lineno + 1))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(format!("config line {}: duplicate key {key}", lineno + 1));
        }
    }
    Ok(map)
}

fn check_known_keys(raw: &RawConfig, allowed: &[&str]) -> Result<(), String> {
    for key in raw.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(format!(
                "unknown config key {key} (allowed: {})",
                allowed.join(", ")
            ));
        }
    }
    Ok(())
}

fn parse_f64(raw: &RawConfig, key: &str) -> Result<Option<f64>, String> {
    raw.get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| format!("config key {key}: {v} is not a number"))
        })
        .transpose()
}

fn parse_usize(raw: &RawConfig, key: &str) -> Result<Option<usize>, String> {
    raw.get(key)
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| format!("config key {key}: {v} is not a non-negative integer"))
        })
        .transpose()
}

fn parse_usize_list(raw: &RawConfig, key: &str) -> Result<Option<Vec<usize>>, String> {
    raw.get(key)
        .map(|v| {
            v.split(',')
                .map(|item| {
                    item.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("config key {key}: {item} is not an integer"))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()
}

fn require_unit_interval(name: &str, value: f64) -> Result<(), String> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(format!("{name} must lie strictly inside (0, 1), got {value}"))
    }
}

fn require_positive(name: &str, value: usize) -> Result<(), String> {
    if value >= 1 {
        Ok(())
    } else {
        Err(format!("{name} must be positive"))
    }
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    command: &'a str,
    seed: u64,
    suites: Vec<SuiteReport>,
    passed: bool,
    failures: usize,
}

fn finish_report(
    command: &str,
    seed: u64,
    suites: Vec<SuiteReport>,
    out: Option<&PathBuf>,
) -> Result<ExitCode, String> {
    let failures: usize = suites.iter().map(|s| s.failures()).sum();
    let report = RunReport {
        command,
        seed,
        passed: failures == 0,
        failures,
        suites,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| format!("report serialization failed: {e}"))?;
    json.push('\n');
    emit(out, &json)?;
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify(cli: &Cli, raw: &RawConfig) -> Result<ExitCode, String> {
    check_known_keys(raw, &["suite", "tolerance", "instances"])?;
    let tolerance = parse_f64(raw, "tolerance")?;
    if let Some(t) = tolerance {
        if !(t >= 0.0) {
            return Err(format!("tolerance must be >= 0, got {t}"));
        }
    }
    let instances = parse_usize(raw, "instances")?.unwrap_or(1000);
    require_positive("instances", instances)?;
    let selector = cli
        .suite
        .clone()
        .or_else(|| raw.get("suite").cloned())
        .unwrap_or_else(|| "all".to_string());

    let wants = |name: &str| selector == "all" || selector == name;
    if !["all", "parity", "margins", "bias", "chain", "gaussian"].contains(&selector.as_str()) {
        return Err(format!(
            "unknown suite {selector} (expected all, parity, margins, bias, chain or gaussian)"
        ));
    }

    let mut suites = Vec::new();
    if wants("parity") {
        let tol = tolerance.unwrap_or(1e-12);
        suites.push(parity_suite(tol).map_err(|e| e.to_string())?);
    }
    if wants("margins") {
        let cfg = MarginSuiteConfig {
            instances,
            seed: cli.seed,
            tol: tolerance.unwrap_or(1e-12),
        };
        suites.push(margin_suite(&cfg).map_err(|e| e.to_string())?);
    }
    if wants("bias") {
        let tol = tolerance.unwrap_or(1e-12);
        suites.push(bias_suite(tol).map_err(|e| e.to_string())?);
    }
    if wants("chain") {
        let tol = tolerance.unwrap_or(1e-12);
        suites.push(chain_suite(cli.seed, tol).map_err(|e| e.to_string())?);
    }
    if wants("gaussian") {
        let cfg = GaussianSuiteConfig {
            sigma: 0.5 * stack_sigma_gate(),
            seed: cli.seed,
            tol_exact: tolerance.unwrap_or(1e-12),
            tol_quad: tolerance.unwrap_or(1e-10),
        };
        suites.push(gaussian_suite(&cfg).map_err(|e| e.to_string())?);
    }
    finish_report("verify", cli.seed, suites, cli.out.as_ref())
}

fn cmd_gaussian(cli: &Cli, raw: &RawConfig) -> Result<ExitCode, String> {
    check_known_keys(raw, &["sigma", "samples", "stacks", "tolerance"])?;
    let tolerance = parse_f64(raw, "tolerance")?;
    if let Some(t) = tolerance {
        if !(t >= 0.0) {
            return Err(format!("tolerance must be >= 0, got {t}"));
        }
    }
    let sigma = parse_f64(raw, "sigma")?.unwrap_or(0.5 * stack_sigma_gate());
    require_unit_interval("sigma", sigma)?;
    let samples = parse_usize(raw, "samples")?.unwrap_or(100_000);
    if samples < 10_000 {
        return Err(format!("samples must be >= 10000, got {samples}"));
    }
    let stacks = parse_usize(raw, "stacks")?.unwrap_or(5);
    require_positive("stacks", stacks)?;

    let closed = GaussianSuiteConfig {
        sigma,
        seed: cli.seed,
        tol_exact: tolerance.unwrap_or(1e-12),
        tol_quad: tolerance.unwrap_or(1e-10),
    };
    let mc = GaussianMcConfig {
        samples,
        stacks,
        seed: cli.seed,
    };
    let suites = vec![
        gaussian_suite(&closed).map_err(|e| e.to_string())?,
        gaussian_mc_suite(&mc).map_err(|e| e.to_string())?,
    ];
    finish_report("gaussian", cli.seed, suites, cli.out.as_ref())
}

fn cmd_sweep_stream(cli: &Cli, raw: &RawConfig) -> Result<ExitCode, String> {
    check_known_keys(raw, &["d", "rho", "delta", "budgets", "passes", "trials"])?;
    let d = parse_usize(raw, "d")?.unwrap_or(16);
    if d < 2 {
        return Err(format!("d must be >= 2, got {d}"));
    }
    let rho = parse_f64(raw, "rho")?.unwrap_or(0.25);
    require_unit_interval("rho", rho)?;
    let delta = parse_f64(raw, "delta")?.unwrap_or(0.1);
    require_unit_interval("delta", delta)?;
    let trials = parse_usize(raw, "trials")?.unwrap_or(20);
    require_positive("trials", trials)?;
    let passes = parse_usize_list(raw, "passes")?.unwrap_or_else(|| vec![1]);
    for &p in &passes {
        require_positive("passes entry", p)?;
    }

    let hypotheses = SubsetCollection::all_pairs(d).map_err(|e| e.to_string())?;
    let family = build_parity_family(&hypotheses, rho, d).map_err(|e| e.to_string())?;
    let cfg = GroupScanConfig::new(hypotheses, rho, delta).map_err(|e| e.to_string())?;
    let k = cfg.k();

    let budgets = match parse_usize_list(raw, "budgets")? {
        Some(list) => {
            for &b in &list {
                require_positive("budgets entry", b)?;
            }
            list
        }
        None => {
            let mut slots: Vec<usize> = vec![1, k / 12, k / 4, k / 2, k]
                .into_iter()
                .map(|s| s.max(1))
                .collect();
            slots.dedup();
            slots
                .into_iter()
                .map(|s| cfg.phase_bits() + s * cfg.slot_bits())
                .collect()
        }
    };

    let records = sweep_tradeoff(&cfg, &budgets, &passes, &family, trials, cli.seed)
        .map_err(|e| e.to_string())?;

    let mut csv = String::from(
        "d,k,rho,delta,s_bits,slots,passes,t,total_samples,ts_ell,success_rate,trials,seed\n",
    );
    for rec in &records {
        let rate = match rec.status {
            SweepStatus::Infeasible => 0.0,
            _ => rec.success_rate,
        };
        csv.push_str(&format!(
            "{d},{k},{rho},{delta},{},{},{},{},{},{},{rate},{trials},{}\n",
            rec.s_bits, rec.slots, rec.passes, rec.t, rec.total_samples, rec.ts_ell, cli.seed
        ));
    }
    emit(cli.out.as_ref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep_protocol(cli: &Cli, raw: &RawConfig) -> Result<ExitCode, String> {
    check_known_keys(
        raw,
        &["d", "rho", "delta", "m", "n_list", "s_per_machine", "trials"],
    )?;
    let d = parse_usize(raw, "d")?.unwrap_or(4);
    if d < 2 {
        return Err(format!("d must be >= 2, got {d}"));
    }
    let rho = parse_f64(raw, "rho")?.unwrap_or(0.3);
    require_unit_interval("rho", rho)?;
    let delta = parse_f64(raw, "delta")?.unwrap_or(0.1);
    require_unit_interval("delta", delta)?;
    let m_fixed = parse_usize(raw, "m")?.unwrap_or(0);
    let s_per_machine = parse_usize(raw, "s_per_machine")?.unwrap_or(10);
    require_positive("s_per_machine", s_per_machine)?;
    let trials = parse_usize(raw, "trials")?.unwrap_or(50);
    require_positive("trials", trials)?;
    let n_list = parse_usize_list(raw, "n_list")?.unwrap_or_else(|| vec![122, 244, 488]);
    for &n in &n_list {
        require_positive("n_list entry", n)?;
    }

    let hypotheses = SubsetCollection::all_pairs(d).map_err(|e| e.to_string())?;
    let family = build_parity_family(&hypotheses, rho, d).map_err(|e| e.to_string())?;
    let k = hypotheses.len();
    let phase_len = ((8.0 / (rho * rho)) * (4.0 * k as f64 / delta).ln()).ceil() as usize;

    let mut csv = String::from(
        "d,k,rho,m,n,s_per_machine,groups,total_bits,success_rate,trials,seed\n",
    );
    for &n in &n_list {
        let m = if m_fixed > 0 {
            m_fixed
        } else {
            let sum_bits = bits_for(2 * n + 1);
            let ppm = (s_per_machine / sum_bits).min(k).max(1);
            k.div_ceil(ppm) * phase_len.div_ceil(n)
        };
        let built = build_group_broadcast(hypotheses.clone(), rho, delta, m, n, s_per_machine);
        let row = match built {
            Ok(proto) => {
                let mut hits = 0usize;
                for trial in 0..trials {
                    let planted = trial % k;
                    let inputs: Vec<Vec<usize>> = (0..m)
                        .map(|machine| {
                            let machine_seed = cli
                                .seed
                                .wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                                .wrapping_add((machine as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
                            draw_samples(family.alternative(planted), machine_seed, n)
                        })
                        .collect();
                    let (out, _) =
                        run_protocol(&proto, &inputs, 0).map_err(|e| e.to_string())?;
                    if out == Some(planted) {
                        hits += 1;
                    }
                }
                let rate = hits as f64 / trials as f64;
                format!(
                    "{d},{k},{rho},{m},{n},{s_per_machine},{},{},{rate},{trials},{}\n",
                    proto.groups(),
                    proto.total_bits(),
                    cli.seed
                )
            }
            Err(_) => format!(
                "{d},{k},{rho},{m},{n},{s_per_machine},0,0,0,{trials},{}\n",
                cli.seed
            ),
        };
        csv.push_str(&row);
    }
    emit(cli.out.as_ref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}
