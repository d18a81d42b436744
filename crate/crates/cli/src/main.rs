mod args;
mod report;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use wbslope_core::alignment::{optimize_phases, AlignOptions};
use wbslope_core::channel::{load_channel, make_symmetric, Channel};
use wbslope_core::format::fmt17;
use wbslope_core::montecarlo::{self, ExperimentConfig, SampleRecord, SweepRow};
use wbslope_core::outer_bound::{
    all_psd, check_membership, is_member, max_power_epsilon, slope_outer_bound, BoundOptions, DEFAULT_PSD_TOL,
};
use wbslope_core::{Error, SlopeReport};

use args::{ChannelArgs, Cli, Command, ExperimentArgs, Format, OutputArgs, SearchArgs};
use report::{emit, pair, Pairs, Report};

#[derive(Debug)]
pub enum CliError {
    Input(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv output: {e}"))
    }
}

fn input(e: Error) -> CliError {
    CliError::Input(e.to_string())
}

/// What a successful command produced: whether every optimizer converged.
struct Outcome {
    converged: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Outcome { converged: true }) => ExitCode::SUCCESS,
        Ok(Outcome { converged: false }) => {
            eprintln!("wbslope: optimizer did not converge; results written and flagged converged=false");
            ExitCode::from(2)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("wbslope: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Slope { channel, output } => slope(&channel, &output),
        Command::Align { channel, search, output } => align(&channel, &search, &output),
        Command::Bound { channel, search, output } => bound(&channel, &search, &output),
        Command::Membership { channel, tol, power, p_hi, output } => {
            membership(&channel, tol.unwrap_or(DEFAULT_PSD_TOL), power, p_hi, &output)
        }
        Command::Montecarlo { experiment, with_bound, output } => {
            let (config, jobs) = experiment_config(&experiment, with_bound)?;
            let records = montecarlo::run_experiment(&config, jobs).map_err(input)?;
            let report = Report { records: records.iter().map(record_pairs).collect(), summary: Vec::new() };
            let bytes = match output.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    montecarlo::write_records(&records, &mut buf)?;
                    buf
                }
                Format::Text => report.render(Format::Text)?,
            };
            finish_experiment(&config, &bytes, output.out.as_deref())?;
            Ok(Outcome { converged: records.iter().all(|r| r.converged) })
        }
        Command::Sweep { experiment, output } => {
            let (config, jobs) = experiment_config(&experiment, false)?;
            let (rows, records) = montecarlo::median_sweep(&config, jobs).map_err(input)?;
            let bytes = match output.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    montecarlo::write_sweep(&rows, &mut buf)?;
                    buf
                }
                Format::Text => Report { records: rows.iter().map(sweep_pairs).collect(), summary: Vec::new() }
                    .render(Format::Text)?,
            };
            finish_experiment(&config, &bytes, output.out.as_deref())?;
            Ok(Outcome { converged: records.iter().all(|r| r.converged) })
        }
    }
}

fn resolve_channel(args: &ChannelArgs) -> Result<Channel, CliError> {
    if let Some(tokens) = &args.symmetric {
        let (mut k, mut a) = (None, None);
        for t in tokens {
            match t.split_once('=') {
                Some(("k", v)) => k = Some(parse_value::<usize>("--symmetric k", v)?),
                Some(("a", v)) => a = Some(parse_value::<f64>("--symmetric a", v)?),
                _ => return Err(CliError::Input(format!("--symmetric: expected k=<int> a=<real>, got '{t}'"))),
            }
        }
        let (Some(k), Some(a)) = (k, a) else {
            return Err(CliError::Input("--symmetric needs both k=<int> and a=<real>".into()));
        };
        return make_symmetric(k, a, None).map_err(|e| CliError::Input(format!("--symmetric: {e}")));
    }
    let path = args.channel.as_deref().expect("clap enforces one channel source");
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read channel file {}: {e}", path.display())))?;
    load_channel(&text).map_err(|e| CliError::Input(format!("channel file {}: {e}", path.display())))
}

fn parse_value<T: std::str::FromStr>(name: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| CliError::Input(format!("{name}: cannot parse '{v}': {e}")))
}

fn parse_list(name: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').map(|x| parse_value::<f64>(name, x)).collect()
}

fn write_report(report: &Report, output: &OutputArgs) -> Result<(), CliError> {
    let bytes = report.render(output.format.unwrap_or(Format::Text))?;
    emit(&bytes, output.out.as_deref())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&x| fmt17(x)).collect::<Vec<_>>().join(";")
}

fn slope(channel: &ChannelArgs, output: &OutputArgs) -> Result<Outcome, CliError> {
    let ch = resolve_channel(channel)?;
    let r = SlopeReport::baseline(&ch);
    let report = Report::summary(vec![
        pair("k", ch.k()),
        pair("ebno_min", fmt17(r.ebno_min)),
        pair("s0_no_interference", fmt17(r.s0_no_interference)),
        pair("s0_tdma", fmt17(r.s0_tdma)),
        pair("s0_tin", fmt17(r.s0_tin)),
    ]);
    write_report(&report, output)?;
    Ok(Outcome { converged: true })
}

fn align(channel: &ChannelArgs, search: &SearchArgs, output: &OutputArgs) -> Result<Outcome, CliError> {
    let ch = resolve_channel(channel)?;
    let opts = AlignOptions {
        restarts: search.restarts,
        seed: search.seed,
        tol: search.tol.unwrap_or(AlignOptions::default().tol),
        ..Default::default()
    };
    let r = optimize_phases(&ch, &opts).map_err(input)?;
    let report = Report::summary(vec![
        pair("k", ch.k()),
        pair("theta", join(r.theta_star.as_slice())),
        pair("cost", fmt17(r.cost_star)),
        pair("s0_inta", fmt17(r.slope)),
        pair("grad_norm", fmt17(r.grad_norm)),
        pair("restarts", r.restarts_used),
        pair("converged", r.converged),
    ]);
    write_report(&report, output)?;
    Ok(Outcome { converged: r.converged })
}

fn bound(channel: &ChannelArgs, search: &SearchArgs, output: &OutputArgs) -> Result<Outcome, CliError> {
    let ch = resolve_channel(channel)?;
    let opts = BoundOptions {
        restarts: search.restarts,
        seed: search.seed,
        tol: search.tol.unwrap_or(BoundOptions::default().tol),
        ..Default::default()
    };
    let ob = slope_outer_bound(&ch, &opts, DEFAULT_PSD_TOL).map_err(input)?;
    let (k1, k3): (Vec<f64>, Vec<f64>) = ob.denominator.profile.mats().iter().map(|m| (m.a11, m.a12)).unzip();
    let report = Report::summary(vec![
        pair("k", ch.k()),
        pair("s0_bound", fmt17(ob.slope)),
        pair("denominator", fmt17(ob.denominator.value)),
        pair("membership", if ob.verified { "pass" } else { "fail" }),
        pair("status", if ob.verified { "verified" } else { "unverified" }),
        pair("kkt_residual", fmt17(ob.denominator.kkt.residual())),
        pair("k1", join(&k1)),
        pair("k3", join(&k3)),
        pair("converged", ob.denominator.converged),
    ]);
    write_report(&report, output)?;
    Ok(Outcome { converged: ob.denominator.converged })
}

fn membership(channel: &ChannelArgs, tol: f64, power: f64, p_hi: f64, output: &OutputArgs) -> Result<Outcome, CliError> {
    let ch = resolve_channel(channel)?;
    let certs = check_membership(&ch, power, None, tol).map_err(input)?;
    let records = certs
        .iter()
        .map(|c| {
            vec![
                pair("j", c.j_index),
                pair("min_eigenvalue", fmt17(c.min_eigenvalue)),
                pair("tolerance", fmt17(c.tolerance)),
                pair("is_psd", c.is_psd),
                pair("marginal", c.is_marginal()),
                pair("eigenvalues", join(&c.eigenvalues)),
            ]
        })
        .collect();
    let mut summary: Pairs = vec![
        pair("power", fmt17(power)),
        pair("all_psd", all_psd(&certs)),
        pair("membership", if is_member(&ch, tol).map_err(input)? { "pass" } else { "fail" }),
    ];
    match max_power_epsilon(&ch, tol, p_hi) {
        Ok(eps) => summary.push(pair("epsilon", fmt17(eps))),
        // Membership still holds at the top of the bracket; report the bracket.
        Err(Error::BracketTooSmall { p_hi }) => summary.push(pair("epsilon", format!(">={}", fmt17(p_hi)))),
        Err(e) => return Err(CliError::Input(format!("--p-hi: {e}"))),
    }
    write_report(&Report { records, summary }, output)?;
    Ok(Outcome { converged: true })
}

fn experiment_config(args: &ExperimentArgs, include_bound: bool) -> Result<(ExperimentConfig, usize), CliError> {
    let mut config = ExperimentConfig { include_bound, ..Default::default() };
    let mut jobs = 0;
    let mut seen = Vec::new();
    for s in &args.settings {
        let Some((key, v)) = s.split_once('=') else {
            return Err(CliError::Input(format!("setting '{s}' is not of the form key=value")));
        };
        if seen.contains(&key) {
            return Err(CliError::Input(format!("setting '{key}' given twice")));
        }
        seen.push(key);
        match key {
            "k" => config.k = parse_value(key, v)?,
            "a" => config.a_values = parse_list(key, v)?,
            "samples" => config.samples = parse_value(key, v)?,
            "seed" => config.seed = parse_value(key, v)?,
            "restarts" => config.restarts = parse_value(key, v)?,
            "tol" => config.tol = parse_value(key, v)?,
            "jobs" => jobs = parse_value(key, v)?,
            _ => {
                return Err(CliError::Input(format!(
                    "unknown setting '{key}' (expected k, a, samples, seed, restarts, jobs or tol)"
                )))
            }
        }
    }
    let clash = |key: &str| CliError::Input(format!("'{key}' given both as a setting and as --{key}"));
    macro_rules! flag {
        ($field:expr, $key:literal, $value:expr) => {
            if let Some(v) = $value {
                if seen.contains(&$key) {
                    return Err(clash($key));
                }
                $field = v;
            }
        };
    }
    flag!(config.k, "k", args.k);
    flag!(config.samples, "samples", args.samples);
    flag!(config.seed, "seed", args.seed);
    flag!(config.restarts, "restarts", args.restarts);
    flag!(config.tol, "tol", args.tol);
    flag!(jobs, "jobs", args.jobs);
    if let Some(list) = &args.a {
        if seen.contains(&"a") {
            return Err(clash("a"));
        }
        config.a_values = parse_list("--a", list)?;
    }
    config.validate().map_err(input)?;
    Ok((config, jobs))
}

fn finish_experiment(config: &ExperimentConfig, bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    emit(bytes, out)?;
    if let Some(path) = out {
        montecarlo::write_metadata(config, path).map_err(input)?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn record_pairs(r: &SampleRecord) -> Pairs {
    vec![
        pair("a", fmt17(r.a)),
        pair("sample", r.sample_index),
        pair("s0_tin", fmt17(r.s0_tin)),
        pair("s0_tdma", fmt17(r.s0_tdma)),
        pair("s0_inta", fmt17(r.s0_inta)),
        pair("s0_bound", opt(r.s0_bound)),
        pair("membership", r.membership.map(|m| m.to_string()).unwrap_or_default()),
        pair("converged", r.converged),
    ]
}

fn sweep_pairs(r: &SweepRow) -> Pairs {
    vec![
        pair("a", fmt17(r.a)),
        pair("median_inta", fmt17(r.median_inta)),
        pair("s0_tin", fmt17(r.s0_tin)),
        pair("s0_tdma", fmt17(r.s0_tdma)),
    ]
}
