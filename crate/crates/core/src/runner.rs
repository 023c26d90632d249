//! Monte Carlo sweeps, CSV output and the command-line front end.
//!
//! A sweep varies one axis (SNR, beam waist or user count). At every axis
//! value it runs `trials` independent user drops. Every drop is evaluated
//! under each requested scheme and the results are averaged. Trials run in
//! parallel but are reduced in a fixed order, so the output does not depend
//! on the thread count.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::channel::{build_channel, normalize_channel, ChannelMatrix};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geometry::{place_users_random, Scene};
use crate::hrs::{default_group_count, hrs_rates, hrs_sinrs_with_powers, hrs_split, kmeans_group, rates_from_sinrs, Grouping};
use crate::optimizer::{feasible_init, sca_solve, simplify_high_snr, AllocationProblem, PowerAllocation};
use crate::precoding::{hrs_precoders, rs_precoders};
use crate::ratesplit::{oma_rates, rs_rates, rs_split, RateBreakdown, Scheme};

/// Significant digits written for every CSV number.
const CSV_DIGITS: i32 = 15;

/// Formats a number for CSV output in plain decimal notation with 15
/// significant digits.
pub fn fmt_value(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (CSV_DIGITS - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum SweepAxis {
    /// Transmit SNR in dB, normalized channels.
    #[value(name = "snr")]
    SnrDb,
    /// VCSEL beam waist in micrometers, physical channels.
    #[value(name = "beam-waist")]
    BeamWaistUm,
    /// Number of users, normalized channels at the fixed SNR.
    #[value(name = "users")]
    NumUsers,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::BeamWaistUm => "beam_waist_um",
            SweepAxis::NumUsers => "num_users",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scenario parameters that stay fixed along the sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedParams {
    pub num_users: usize,
    /// `None` picks the default for the user count.
    pub num_groups: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub snr_db: f64,
}

impl FixedParams {
    pub fn from_config(config: &SimConfig) -> Self {
        FixedParams {
            num_users: 4,
            num_groups: None,
            alpha: config.alpha,
            beta: config.beta,
            snr_db: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    pub fixed: FixedParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "sweep needs at least one axis value"));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "axis values must be finite and strictly increasing"));
        }
        if self.axis == SweepAxis::NumUsers && self.values.iter().any(|&v| !(v >= 1.0 && v.fract() == 0.0)) {
            return Err(Error::invalid("values", "user counts must be positive integers"));
        }
        if self.axis == SweepAxis::BeamWaistUm && self.values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("values", "beam waists must be > 0"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("schemes", "need at least one scheme"));
        }
        if self.fixed.num_users == 0 {
            return Err(Error::invalid("num_users", "need at least one user"));
        }
        for (name, v) in [("alpha", self.fixed.alpha), ("beta", self.fixed.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Requested schemes in canonical order without duplicates.
    fn ordered_schemes(&self) -> Vec<Scheme> {
        Scheme::ALL.into_iter().filter(|s| self.schemes.contains(s)).collect()
    }
}

/// One CSV row: a single trial, or the average over valid trials
/// (`trial == -1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scheme: Scheme,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub trial: i64,
    pub r_outer_common: f64,
    pub r_inner_common_total: f64,
    pub r_private_total: f64,
    pub sum_rate: f64,
    /// Trials behind the row (0 or 1 for a single trial).
    pub valid_trials: usize,
    /// Why the point could not be evaluated. Rates are NaN then.
    pub skipped: Option<String>,
}

impl ResultRecord {
    fn from_outcome(scheme: Scheme, axis: SweepAxis, axis_value: f64, trial: i64, outcome: &Outcome) -> Self {
        match outcome {
            Ok(b) => ResultRecord {
                scheme,
                axis,
                axis_value,
                trial,
                r_outer_common: b.r_outer_common,
                r_inner_common_total: b.inner_common_total(),
                r_private_total: b.private_total(),
                sum_rate: b.sum_rate,
                valid_trials: 1,
                skipped: None,
            },
            Err(reason) => ResultRecord {
                scheme,
                axis,
                axis_value,
                trial,
                r_outer_common: f64::NAN,
                r_inner_common_total: f64::NAN,
                r_private_total: f64::NAN,
                sum_rate: f64::NAN,
                valid_trials: 0,
                skipped: Some(reason.clone()),
            },
        }
    }

    pub fn is_average(&self) -> bool {
        self.trial < 0
    }
}

type Outcome = std::result::Result<RateBreakdown, String>;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one user drop.
pub fn trial_seed(seed: u64, axis_index: usize, trial: usize) -> u64 {
    mix(mix(mix(seed) ^ axis_index as u64) ^ trial as u64)
}

/// Channel and grouping of one user drop.
#[derive(Debug, Clone)]
pub struct Trial {
    pub scene: Scene,
    pub channel: ChannelMatrix,
    /// Total transmit power fed to the rate formulas.
    pub power: f64,
    pub grouping: Grouping,
}

/// Places users, builds the channel and groups the users for one drop.
///
/// `snr_db = Some(..)` selects normalized channels with `P = 10^(snr/10)`
/// and fails on uncovered users. `None` keeps physical gains with `P = 1`
/// (every VCSEL at full power) and thermal noise; uncovered users then simply
/// have zero rows.
pub fn prepare_trial(
    config: &SimConfig,
    scene: &Scene,
    num_users: usize,
    num_groups: usize,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<Trial> {
    let scene = place_users_random(scene, num_users, seed)?;
    let physical = build_channel(&scene, &config.noise)?;
    let (channel, power) = match snr_db {
        Some(snr) => normalize_channel(&physical, snr)?,
        None => (physical, 1.0),
    };
    let grouping = kmeans_group(&scene.users, num_groups.min(num_users), seed)?;
    Ok(Trial {
        scene,
        channel,
        power,
        grouping,
    })
}

/// Sum-rate breakdown of one scheme on one drop.
pub fn evaluate_scheme(config: &SimConfig, trial: &Trial, scheme: Scheme, alpha: f64, beta: f64) -> Result<RateBreakdown> {
    let h = &trial.channel.gains;
    let noise = &trial.channel.noise_var;
    let k = h.nrows();
    match scheme {
        Scheme::Oma => Ok(oma_rates(h, trial.power, noise)),
        Scheme::Rs => {
            let pre = rs_precoders(h, config.common_strategy)?;
            Ok(rs_rates(h, &pre, &rs_split(trial.power, alpha, k)?, noise))
        }
        Scheme::Hrs => {
            let pre = hrs_precoders(h, &trial.grouping, config.common_strategy)?;
            let split = hrs_split(trial.power, alpha, beta, trial.grouping.num_groups(), k)?;
            hrs_rates(h, &trial.grouping, &pre, &split, noise)
        }
        Scheme::HrsOpt => optimize_trial(config, trial, alpha).map(|(_, b)| b),
    }
}

/// Optimized allocation for one drop, starting from the uniform split with
/// private share `alpha`.
pub fn optimize_trial(config: &SimConfig, trial: &Trial, alpha: f64) -> Result<(PowerAllocation, RateBreakdown)> {
    let h = &trial.channel.gains;
    let noise = &trial.channel.noise_var;
    let pre = hrs_precoders(h, &trial.grouping, config.common_strategy)?;
    let settings = &config.allocation;
    let mut problem = AllocationProblem::new(h.clone(), noise.clone(), trial.grouping.clone(), pre.clone(), trial.power)?;
    problem.p_min = settings.private_min_fraction * trial.power;
    problem.p_max = settings.private_max_fraction * trial.power;
    problem.r_min = settings.min_sum_rate;
    problem.validate()?;
    let reduced = simplify_high_snr(&problem)?;
    let init = feasible_init(&reduced, alpha)?;
    let out = sca_solve(&reduced, &init, &settings.sca)?;
    let sinrs = hrs_sinrs_with_powers(h, &trial.grouping, &pre, 0.0, &out.p_inner_common, &out.p_private, noise)?;
    Ok((out, rates_from_sinrs(Scheme::HrsOpt, &trial.grouping, &sinrs)))
}

fn run_point(config: &SimConfig, spec: &SweepSpec, schemes: &[Scheme], axis_index: usize, trial: usize) -> Vec<Outcome> {
    let value = spec.values[axis_index];
    let fixed = &spec.fixed;
    let seed = trial_seed(spec.seed, axis_index, trial);
    let (k, snr, scene) = match spec.axis {
        SweepAxis::SnrDb => (fixed.num_users, Some(value), config.scene.clone()),
        SweepAxis::NumUsers => (value as usize, Some(fixed.snr_db), config.scene.clone()),
        SweepAxis::BeamWaistUm => match config.scene.vcsel.with_w0(value * 1e-6) {
            Ok(vcsel) => (fixed.num_users, None, Scene { vcsel, ..config.scene.clone() }),
            Err(e) => return vec![Err(e.to_string()); schemes.len()],
        },
    };
    let groups = match (spec.axis, fixed.num_groups) {
        (_, Some(g)) => g,
        (SweepAxis::NumUsers, None) => k.div_ceil(4),
        (_, None) => default_group_count(k),
    };
    match prepare_trial(config, &scene, k, groups, snr, seed) {
        Ok(t) => schemes
            .iter()
            .map(|&s| evaluate_scheme(config, &t, s, fixed.alpha, fixed.beta).map_err(|e| e.to_string()))
            .collect(),
        Err(e) => vec![Err(e.to_string()); schemes.len()],
    }
}

/// Runs a sweep. Points that cannot be evaluated (uncovered users,
/// rank-deficient channels, too many groups) become rows with NaN rates and a
/// `skipped` reason; averages use the remaining trials.
///
/// Rows are ordered by scheme, axis value, then trial, with the average
/// (`trial = -1`) first.
pub fn run_sweep(spec: &SweepSpec, config: &SimConfig) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    config.validate()?;
    let schemes = spec.ordered_schemes();
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|a| (0..spec.trials).map(move |t| (a, t)))
        .collect();
    let outcomes: Vec<Vec<Outcome>> = jobs
        .par_iter()
        .map(|&(a, t)| run_point(config, spec, &schemes, a, t))
        .collect();

    let mut records = Vec::with_capacity(schemes.len() * spec.values.len() * (spec.trials + 1));
    for (si, &scheme) in schemes.iter().enumerate() {
        for (a, &value) in spec.values.iter().enumerate() {
            let rows: Vec<ResultRecord> = (0..spec.trials)
                .map(|t| ResultRecord::from_outcome(scheme, spec.axis, value, t as i64, &outcomes[a * spec.trials + t][si]))
                .collect();
            records.push(average(scheme, spec.axis, value, &rows));
            records.extend(rows);
        }
    }
    Ok(records)
}

fn average(scheme: Scheme, axis: SweepAxis, axis_value: f64, rows: &[ResultRecord]) -> ResultRecord {
    let valid: Vec<&ResultRecord> = rows.iter().filter(|r| r.skipped.is_none()).collect();
    let n = valid.len();
    let mean = |f: fn(&ResultRecord) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            valid.iter().map(|r| f(r)).sum::<f64>() / n as f64
        }
    };
    ResultRecord {
        scheme,
        axis,
        axis_value,
        trial: -1,
        r_outer_common: mean(|r| r.r_outer_common),
        r_inner_common_total: mean(|r| r.r_inner_common_total),
        r_private_total: mean(|r| r.r_private_total),
        sum_rate: mean(|r| r.sum_rate),
        valid_trials: n,
        skipped: (n == 0).then(|| "no trial could be evaluated".to_string()),
    }
}

/// `(axis_value, averaged sum rate, valid trials)` of one scheme.
pub fn averages(records: &[ResultRecord], scheme: Scheme) -> Vec<(f64, f64, usize)> {
    records
        .iter()
        .filter(|r| r.scheme == scheme && r.is_average())
        .map(|r| (r.axis_value, r.sum_rate, r.valid_trials))
        .collect()
}

pub const CSV_HEADER: &str = "scheme,axis,axis_value,trial,r_outer_common,r_inner_common_total,r_private_total,sum_rate_bps_hz";

pub fn write_csv<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("records", "nothing to write"));
    }
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme,
            r.axis,
            fmt_value(r.axis_value),
            r.trial,
            fmt_value(r.r_outer_common),
            fmt_value(r.r_inner_common_total),
            fmt_value(r.r_private_total),
            fmt_value(r.sum_rate)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("records", "nothing to write"));
    }
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(records, std::io::BufWriter::new(file))
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
/// `optimize` stopped at the iteration limit.
pub const EXIT_MAX_ITER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "owc-sim", version, about = "Rate-splitting simulator for laser-based optical wireless downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo sweep over SNR, beam waist or user count; writes a rate CSV.
    Simulate(SimulateArgs),
    /// Optimize the power allocation of one seeded drop; writes powers and rates.
    Optimize(OptimizeArgs),
    /// Dump the channel matrix of one seeded drop.
    Channel(ChannelArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scene config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Axis to sweep.
    #[arg(long, value_enum)]
    sweep: SweepAxis,
    /// First axis value (with --to and --step).
    #[arg(long, requires_all = ["to", "step"], conflicts_with = "values")]
    from: Option<f64>,
    /// Last axis value, inclusive.
    #[arg(long, requires_all = ["from", "step"])]
    to: Option<f64>,
    /// Axis increment.
    #[arg(long, requires_all = ["from", "to"])]
    step: Option<f64>,
    /// Explicit comma-separated axis values.
    #[arg(long, value_delimiter = ',', required_unless_present = "from")]
    values: Option<Vec<f64>>,
    /// Comma-separated schemes: OMA, RS, HRS, HRS_OPT.
    #[arg(long, value_delimiter = ',', default_value = "OMA,RS,HRS,HRS_OPT")]
    schemes: Vec<Scheme>,
    /// Users per drop (ignored on the users axis).
    #[arg(long, default_value_t = 4)]
    users: usize,
    /// Groups for HRS; default 2 for up to 8 users, else ceil(K/4) (ceil(K/4) on the users axis).
    #[arg(long)]
    groups: Option<usize>,
    /// Private power share; overrides the config.
    #[arg(long)]
    alpha: Option<f64>,
    /// Inner (non outer-common) power share for HRS; overrides the config.
    #[arg(long)]
    beta: Option<f64>,
    /// SNR in dB when the axis is not SNR.
    #[arg(long, default_value_t = 15.0)]
    snr: f64,
    /// Drops per axis value.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// Scene config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Transmit SNR in dB.
    #[arg(long, default_value_t = 15.0)]
    snr: f64,
    #[arg(long, default_value_t = 4)]
    users: usize,
    /// Groups; default 2 for up to 8 users, else ceil(K/4).
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Scene config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 4)]
    users: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Normalize rows at this SNR instead of dumping physical gains.
    #[arg(long)]
    snr: Option<f64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn axis_values(args: &SimulateArgs) -> Result<Vec<f64>> {
    if let Some(v) = &args.values {
        return Ok(v.clone());
    }
    let (from, to, step) = (args.from.unwrap(), args.to.unwrap(), args.step.unwrap());
    if !(step > 0.0) || !(to >= from) {
        return Err(Error::invalid("step", "need --step > 0 and --to >= --from"));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| from + i as f64 * step).collect())
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn exit_code(e: &Error) -> i32 {
    if e.is_infeasibility() {
        EXIT_INFEASIBLE
    } else {
        EXIT_USAGE
    }
}

fn simulate(args: SimulateArgs) -> Result<i32> {
    let config = SimConfig::load(&args.config)?;
    let fixed = FixedParams {
        num_users: args.users,
        num_groups: args.groups,
        alpha: args.alpha.unwrap_or(config.alpha),
        beta: args.beta.unwrap_or(config.beta),
        snr_db: args.snr,
    };
    let spec = SweepSpec {
        axis: args.sweep,
        values: axis_values(&args)?,
        schemes: args.schemes.clone(),
        trials: args.trials,
        seed: args.seed,
        fixed,
    };
    let records = run_sweep(&spec, &config)?;
    for scheme in spec.ordered_schemes() {
        let skipped = records
            .iter()
            .filter(|r| r.scheme == scheme && !r.is_average() && r.skipped.is_some())
            .count();
        if skipped > 0 {
            let first = records.iter().find(|r| r.scheme == scheme && !r.is_average() && r.skipped.is_some());
            eprintln!(
                "{scheme}: {skipped} of {} drops skipped (e.g. {})",
                spec.values.len() * spec.trials,
                first.and_then(|r| r.skipped.as_deref()).unwrap_or("")
            );
        }
    }
    write_csv(&records, open_output(&args.out)?)?;
    Ok(EXIT_OK)
}

fn optimize(args: OptimizeArgs) -> Result<i32> {
    let config = SimConfig::load(&args.config)?;
    let groups = args.groups.unwrap_or_else(|| default_group_count(args.users));
    let trial = prepare_trial(&config, &config.scene, args.users, groups, Some(args.snr), args.seed)?;
    let (alloc, rates) = optimize_trial(&config, &trial, config.alpha)?;
    let mut out = open_output(&args.out)?;
    writeln!(out, "quantity,index,value")?;
    for (g, p) in alloc.p_inner_common.iter().enumerate() {
        writeln!(out, "p_inner_common,{g},{}", fmt_value(*p))?;
    }
    for (k, p) in alloc.p_private.iter().enumerate() {
        writeln!(out, "p_private,{k},{}", fmt_value(*p))?;
    }
    writeln!(out, "r_outer_common,,{}", fmt_value(rates.r_outer_common))?;
    for (g, r) in rates.r_inner_common.iter().enumerate() {
        writeln!(out, "r_inner_common,{g},{}", fmt_value(*r))?;
    }
    for (k, r) in rates.r_private.iter().enumerate() {
        writeln!(out, "r_private,{k},{}", fmt_value(*r))?;
    }
    writeln!(out, "sum_rate_bps_hz,,{}", fmt_value(rates.sum_rate))?;
    writeln!(out, "objective,,{}", fmt_value(alloc.objective_value))?;
    writeln!(out, "iterations,,{}", alloc.iterations)?;
    writeln!(out, "converged,,{}", alloc.converged)?;
    out.flush()?;
    if alloc.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("optimizer stopped after {} iterations without converging", alloc.iterations);
        Ok(EXIT_MAX_ITER)
    }
}

fn channel(args: ChannelArgs) -> Result<i32> {
    let config = SimConfig::load(&args.config)?;
    let scene = place_users_random(&config.scene, args.users, args.seed)?;
    let mut h = build_channel(&scene, &config.noise)?;
    let uncovered = h.uncovered_users();
    if !uncovered.is_empty() {
        eprintln!("uncovered users (all-zero rows): {uncovered:?}");
    }
    if let Some(snr) = args.snr {
        h = normalize_channel(&h, snr)?.0;
    }
    h.write_csv(open_output(&args.out)?)?;
    Ok(EXIT_OK)
}

/// Entry point of the `owc-sim` binary; returns the process exit code.
///
/// Exit codes: 0 success, 1 usage or input error, 2 infeasible scenario,
/// 3 optimizer hit its iteration limit.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Optimize(a) => optimize(a),
        Command::Channel(a) => channel(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
