//! Command-line runner.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use envelop_core::attacks::{simulate_probe_attack, tradeoff_scan, ResendPolicy, ScanTemplate};
use envelop_core::envelope::{
    classical_envelope, envelope_probe_readout, envelope_segmented, reveal_command,
    stock_usd_command, verify_envelope, EnvelopeParams, EnvelopeReport, LeakLayout,
};
use envelop_core::models::b92_model;
use envelop_core::records::{frequencies, parse_stream};
use envelop_core::sync::{
    compare_modulation, phase_schedule, simulate_sync_loop, BayesGrid, Controller, DeltaModel,
    ModulationStats, PilotReadout, SkewDynamics,
};
use envelop_core::{CpcModel, MeasurementModel};
use serde::Serialize;

use crate::error::CliError;
use crate::logio::{read_log, read_rule, to_lines};
use crate::output::{emit, json_text, num, opt_num, Format, Table};
use crate::schema::{load_model, model_json, povm_reports, read_model_file, AnyModel};

#[derive(Debug, Parser)]
#[command(
    name = "envelop",
    version,
    about = "Envelopment experiments on CPC-oriented models"
)]
pub struct Cli {
    /// Seed for every stochastic subcommand.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every POVM of a model file.
    Validate { model: PathBuf },
    /// Segmented envelope of a measurement model (with a USD command), or
    /// the reveal envelope of a classical model.
    Envelope {
        model: PathBuf,
        /// Overlap ratio; ignored for classical models.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, value_enum, default_value_t = LayoutArg::General)]
        layout: LayoutArg,
        /// Where to write the enveloping model.
        #[arg(long)]
        beta_out: Option<PathBuf>,
    },
    /// Probe envelope with a leak-readout command.
    EnvelopeProbe {
        model: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        beta_out: Option<PathBuf>,
    },
    /// Intercept-resend attack over a grid of overlap ratios.
    AttackScan {
        #[command(flatten)]
        base: BaseModel,
        /// Comma-separated ratios in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        r_grid: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Guess)]
        policy: PolicyArg,
        /// Eve counts as fully informed above `1 − epsilon` bits per bit.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Bob's error rate at or below which the attack goes unnoticed.
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
    },
    /// Sample a probe model under one of Eve's commands.
    ProbeAttack {
        model: PathBuf,
        /// Defaults to the first command.
        #[arg(long)]
        eve_command: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Skew tracking loop; writes the step trace.
    SyncSim {
        #[command(flatten)]
        base: BaseModel,
        #[command(flatten)]
        clock: ClockArgs,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// Leave the lever at zero.
        #[arg(long)]
        no_control: bool,
        #[arg(long, default_value_t = 0.5)]
        gain: f64,
        #[arg(long, default_value_t = 0.0)]
        deadband: f64,
        /// Largest lever per step; defaults to s0 / 2.
        #[arg(long)]
        u_max: Option<f64>,
        #[arg(long, value_enum, default_value_t = ReadoutArg::Quadrature)]
        readout: ReadoutArg,
        /// Also write the run summary as JSON.
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Secret clock-phase modulation: baseline, informed and blind Eve.
    ModulationSim {
        #[command(flatten)]
        base: BaseModel,
        #[command(flatten)]
        clock: ClockArgs,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// Phase offsets are `amplitude · 2π · U[0, 1)`.
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
    /// Cut an event log into occurrences and count outcomes.
    Parse {
        log: PathBuf,
        #[arg(long)]
        rule: PathBuf,
        /// Also write the occurrences as JSON lines.
        #[arg(long)]
        occurrences_out: Option<PathBuf>,
    },
}

/// The two-state model the simulators run on.
#[derive(Debug, Args)]
pub struct BaseModel {
    /// Measurement model file with two Alice commands.
    #[arg(long, conflicts_with = "theta")]
    pub model: Option<PathBuf>,
    /// Angle between the two B92 states, in degrees.
    #[arg(long, default_value_t = 45.0)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct ClockArgs {
    /// Skew leeway.
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    /// Skew drift per step; defaults to s0 / 100 for sync runs, 0 for
    /// modulation runs.
    #[arg(long)]
    pub drift: Option<f64>,
    /// Skew noise per step; defaults to s0 / 20 for sync runs, 0 for
    /// modulation runs.
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    General,
    Economy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Guess,
    Suppress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReadoutArg {
    Quadrature,
    InPhase,
}

/// Parses `args` (program name first), runs and returns the exit code.
/// Failures print one JSON line on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("bad arguments");
            let err = CliError::Usage(first.trim_start_matches("error: ").to_owned());
            eprintln!("{}", err.diagnostic());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    let format = cli.format;
    let seed = || {
        cli.seed
            .ok_or_else(|| CliError::Usage("--seed is required for this subcommand".into()))
    };
    match &cli.command {
        Command::Validate { model } => validate(model, out, format),
        Command::Envelope {
            model,
            r,
            layout,
            beta_out,
        } => envelope(model, *r, *layout, beta_out.as_deref(), out, format),
        Command::EnvelopeProbe { model, r, beta_out } => {
            envelope_probe(model, *r, beta_out.as_deref(), out, format)
        }
        Command::AttackScan {
            base,
            r_grid,
            trials,
            policy,
            epsilon,
            threshold,
        } => {
            let alpha = base_model(base)?;
            let template = ScanTemplate {
                policy: match policy {
                    PolicyArg::Guess => ResendPolicy::GuessOnInconclusive,
                    PolicyArg::Suppress => ResendPolicy::SuppressOnInconclusive,
                },
                trials: *trials,
                seed: seed()?,
            };
            let rows = tradeoff_scan(&alpha, r_grid, &template)?;
            let text = match format {
                Format::Json => json_text(&rows),
                Format::Csv => {
                    let mut t = Table::new(&[
                        "r",
                        "S_beta",
                        "bob_error_rate",
                        "bob_error_stderr",
                        "eve_conclusive_rate",
                        "eve_conclusive_stderr",
                        "eve_info_bits",
                        "sifted_fraction",
                        "insecure",
                        "trials",
                        "seed",
                    ]);
                    for row in &rows {
                        t.push(vec![
                            num(row.r),
                            num(row.s_beta),
                            num(row.bob_error_rate),
                            num(row.bob_error_stderr),
                            num(row.eve_conclusive_rate),
                            num(row.eve_conclusive_stderr),
                            num(row.eve_info_bits),
                            num(row.sifted_fraction),
                            row.is_insecure(*epsilon, *threshold).to_string(),
                            row.trials.to_string(),
                            row.seed.to_string(),
                        ]);
                    }
                    t.to_csv()
                }
            };
            emit(out, &text)
        }
        Command::ProbeAttack {
            model,
            eve_command,
            trials,
        } => {
            let AnyModel::Probe(beta) = load_model(model)? else {
                return Err(CliError::Usage("probe-attack needs a probe model".into()));
            };
            let command = match eve_command {
                Some(c) => c.clone(),
                None => beta.eve_commands()[0].clone(),
            };
            let stats = simulate_probe_attack(&beta, &command, *trials, seed()?)?;
            let text = match format {
                Format::Json => json_text(&stats),
                Format::Csv => {
                    let mut t =
                        Table::new(&["alice", "eve_outcome", "bob_outcome", "count", "frequency"]);
                    for (a, alice) in stats.alice_labels.iter().enumerate() {
                        for (je, eve) in stats.eve_labels.iter().enumerate() {
                            for (jb, bob) in stats.bob_labels.iter().enumerate() {
                                t.push(vec![
                                    alice.clone(),
                                    eve.clone(),
                                    bob.clone(),
                                    stats.counts[a][je][jb].to_string(),
                                    num(stats.joint_frequency(a, je, jb)),
                                ]);
                            }
                        }
                    }
                    t.to_csv()
                }
            };
            emit(out, &text)
        }
        Command::SyncSim {
            base,
            clock,
            steps,
            no_control,
            gain,
            deadband,
            u_max,
            readout,
            stats_out,
        } => {
            let s0 = clock.s0;
            let d = delta_model(base, s0, *readout)?;
            let dynamics = SkewDynamics {
                drift_rate: clock.drift.unwrap_or(0.01 * s0),
                noise_sigma: clock.noise.unwrap_or(0.05 * s0),
                ..SkewDynamics::stock(s0)
            };
            let controller = Controller::new(*gain, *deadband, u_max.unwrap_or(0.5 * s0))?;
            let prior = BayesGrid::stock(0.5 * s0)?;
            let run = simulate_sync_loop(
                &d,
                &dynamics,
                (!no_control).then_some(&controller),
                &prior,
                *steps,
                seed()?,
            )?;
            if let Some(path) = stats_out {
                emit(Some(path), &json_text(&run.stats))?;
            }
            let text = match format {
                Format::Json => {
                    #[derive(Serialize)]
                    struct Doc<'a> {
                        stats: &'a envelop_core::sync::SyncStats,
                        trace: &'a [envelop_core::sync::TraceRow],
                    }
                    json_text(&Doc {
                        stats: &run.stats,
                        trace: &run.trace,
                    })
                }
                Format::Csv => {
                    let mut t = Table::new(&[
                        "step",
                        "true_skew",
                        "estimate",
                        "lever",
                        "gamma_outcome",
                        "pilot_outcome",
                        "contained",
                    ]);
                    for row in &run.trace {
                        t.push(vec![
                            row.step.to_string(),
                            num(row.true_skew),
                            num(row.estimate),
                            num(row.lever),
                            row.gamma_outcome.clone(),
                            row.pilot_outcome.to_string(),
                            row.contained.to_string(),
                        ]);
                    }
                    t.to_csv()
                }
            };
            emit(out, &text)
        }
        Command::ModulationSim {
            base,
            clock,
            steps,
            amplitude,
        } => {
            let s0 = clock.s0;
            let d = delta_model(base, s0, ReadoutArg::Quadrature)?;
            let dynamics = SkewDynamics {
                drift_rate: clock.drift.unwrap_or(0.0),
                noise_sigma: clock.noise.unwrap_or(0.0),
                ..SkewDynamics::still(s0)
            };
            let seed = seed()?;
            let schedule = phase_schedule(*amplitude, *steps, seed);
            let cmp = compare_modulation(&d, &dynamics, &schedule, seed)?;
            let runs = [
                ("baseline", &cmp.baseline),
                ("informed", &cmp.informed),
                ("blind", &cmp.blind),
            ];
            let text = match format {
                Format::Json => {
                    #[derive(Serialize)]
                    struct Named<'a> {
                        run: &'a str,
                        #[serde(flatten)]
                        stats: &'a ModulationStats,
                    }
                    let docs: Vec<Named> = runs
                        .iter()
                        .map(|(run, stats)| Named { run, stats })
                        .collect();
                    json_text(&docs)
                }
                Format::Csv => {
                    let mut t = Table::new(&[
                        "run",
                        "eve_knows",
                        "bob_error_rate",
                        "bob_error_stderr",
                        "bob_sifted_fraction",
                        "eve_conclusive_rate",
                        "eve_conclusive_stderr",
                        "eve_error_rate",
                        "eve_info_bits",
                        "eve_bob_info_bits",
                        "steps",
                        "seed",
                    ]);
                    for (run, s) in runs {
                        t.push(vec![
                            run.to_owned(),
                            s.eve_knows.to_string(),
                            num(s.bob_error_rate),
                            num(s.bob_error_stderr),
                            num(s.bob_sifted_fraction),
                            num(s.eve_conclusive_rate),
                            num(s.eve_conclusive_stderr),
                            num(s.eve_error_rate),
                            num(s.eve_info_bits),
                            num(s.eve_bob_info_bits),
                            s.steps.to_string(),
                            s.seed.to_string(),
                        ]);
                    }
                    t.to_csv()
                }
            };
            emit(out, &text)
        }
        Command::Parse {
            log,
            rule,
            occurrences_out,
        } => {
            let rule = read_rule(rule)?;
            let events = read_log(log)?;
            let (occurrences, report) = parse_stream(&events, &rule)?;
            if let Some(path) = occurrences_out {
                emit(Some(path), &to_lines(&occurrences))?;
            }
            let table = frequencies(&occurrences)?;
            let text = match format {
                Format::Json => json_text(&serde_json::json!({
                    "report": report,
                    "frequencies": table,
                })),
                Format::Csv => {
                    let mut t =
                        Table::new(&["alice", "eve", "outcome", "count", "total", "frequency"]);
                    for row in &table.rows {
                        for (outcome, count) in &row.counts {
                            t.push(vec![
                                row.alice.clone(),
                                row.eve.clone(),
                                outcome.clone(),
                                count.to_string(),
                                row.total.to_string(),
                                num(*count as f64 / row.total as f64),
                            ]);
                        }
                    }
                    t.to_csv()
                }
            };
            emit(out, &text)
        }
    }
}

fn base_model(base: &BaseModel) -> Result<MeasurementModel, CliError> {
    match &base.model {
        Some(path) => match load_model(path)? {
            AnyModel::Measurement(m) => Ok(m),
            other => Err(CliError::Usage(format!(
                "expected a measurement model, got a {} model",
                other.kind()
            ))),
        },
        None => Ok(b92_model(base.theta.to_radians())?),
    }
}

fn delta_model(base: &BaseModel, s0: f64, readout: ReadoutArg) -> Result<DeltaModel, CliError> {
    if !(s0 > 0.0) {
        return Err(CliError::Usage("--s0 must be positive".into()));
    }
    let readout = match readout {
        ReadoutArg::Quadrature => PilotReadout::Quadrature,
        ReadoutArg::InPhase => PilotReadout::InPhase,
    };
    Ok(DeltaModel::new(base_model(base)?, 1.2 / s0, readout)?)
}

fn validate(path: &Path, out: Option<&Path>, format: Format) -> Result<(), CliError> {
    let file = read_model_file(path)?;
    let reports = povm_reports(&file)?;
    let ok = reports.iter().all(|(_, r)| r.ok);
    let model = if ok { Some(file.to_model()?) } else { None };
    let text = match format {
        Format::Json => {
            let povms: Vec<_> = reports
                .iter()
                .map(
                    |(command, report)| serde_json::json!({ "command": command, "report": report }),
                )
                .collect();
            json_text(&serde_json::json!({
                "kind": model.as_ref().map(AnyModel::kind),
                "povms": povms,
                "ok": ok,
            }))
        }
        Format::Csv => {
            let mut t = Table::new(&[
                "command",
                "element",
                "hermiticity_residual",
                "min_eigenvalue",
                "completeness_residual",
                "ok",
            ]);
            for (command, report) in &reports {
                for (i, el) in report.elements.iter().enumerate() {
                    t.push(vec![
                        command.clone(),
                        i.to_string(),
                        num(el.hermiticity_residual),
                        num(el.min_eigenvalue),
                        num(report.completeness_residual),
                        report.ok.to_string(),
                    ]);
                }
            }
            t.to_csv()
        }
    };
    emit(out, &text)?;
    match reports.iter().find(|(_, r)| !r.ok) {
        Some((command, r)) => Err(CliError::Failed(format!(
            "POVM `{command}` is not a valid measurement (completeness residual {})",
            r.completeness_residual
        ))),
        None => Ok(()),
    }
}

fn report_text(
    report: &EnvelopeReport,
    requested_r: Option<f64>,
    ok: bool,
    format: Format,
) -> String {
    match format {
        Format::Json => json_text(&serde_json::json!({
            "requested_r": requested_r,
            "max_prob_deviation": report.max_prob_deviation,
            "overlap_pairs": report.overlap_pairs,
            "r": report.r,
            "ok": ok,
        })),
        Format::Csv => {
            let mut t = Table::new(&[
                "a",
                "b",
                "S_alpha",
                "S_beta",
                "ratio",
                "max_prob_deviation",
                "ok",
            ]);
            for p in &report.overlap_pairs {
                t.push(vec![
                    p.a.clone(),
                    p.b.clone(),
                    num(p.s_alpha),
                    num(p.s_beta),
                    opt_num(p.ratio),
                    num(report.max_prob_deviation),
                    ok.to_string(),
                ]);
            }
            t.to_csv()
        }
    }
}

/// Writes `beta` and the report, then fails when the report is not ok.
fn finish_envelope(
    beta: AnyModel,
    report: &EnvelopeReport,
    requested_r: Option<f64>,
    beta_out: Option<&Path>,
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let ok = report.ok && requested_r.is_none_or(|r| report.ratios_match(r, 1e-12));
    if let Some(path) = beta_out {
        emit(Some(path), &model_json(&beta))?;
    }
    emit(out, &report_text(report, requested_r, ok, format))?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "envelope check failed (max deviation {}, ratio {:?})",
            report.max_prob_deviation, report.r
        )))
    }
}

fn envelope(
    path: &Path,
    r: f64,
    layout: LayoutArg,
    beta_out: Option<&Path>,
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    match load_model(path)? {
        AnyModel::Measurement(alpha) => {
            let count = alpha.alice_commands().len();
            let params = match (r == 1.0, layout) {
                (true, _) => EnvelopeParams::identity(count),
                (false, LayoutArg::General) => {
                    EnvelopeParams::with_layout(count, r, LeakLayout::General)?
                }
                (false, LayoutArg::Economy) => {
                    EnvelopeParams::with_layout(count, r, LeakLayout::Economy)?
                }
            };
            let params = if count == 2 {
                let usd = stock_usd_command(&alpha, &params)?;
                params.with_extra(usd)
            } else {
                params
            };
            let beta = envelope_segmented(&alpha, &params)?;
            let report = verify_envelope(&alpha, &beta)?;
            finish_envelope(
                AnyModel::Measurement(beta),
                &report,
                Some(r),
                beta_out,
                out,
                format,
            )
        }
        AnyModel::Classical(alpha) => {
            let beta = classical_envelope(&alpha, vec![reveal_command(alpha.alice_commands())])?;
            let report = verify_envelope(&alpha, &beta)?;
            finish_envelope(
                AnyModel::Classical(beta),
                &report,
                None,
                beta_out,
                out,
                format,
            )
        }
        AnyModel::Probe(_) => Err(CliError::Usage(
            "probe models are enveloped with `envelope-probe`".into(),
        )),
    }
}

fn envelope_probe(
    path: &Path,
    r: f64,
    beta_out: Option<&Path>,
    out: Option<&Path>,
    format: Format,
) -> Result<(), CliError> {
    let AnyModel::Probe(alpha) = load_model(path)? else {
        return Err(CliError::Usage("envelope-probe needs a probe model".into()));
    };
    let beta = envelope_probe_readout(&alpha, r)?;
    let report = verify_envelope(&alpha, &beta)?;
    finish_envelope(
        AnyModel::Probe(beta),
        &report,
        Some(r),
        beta_out,
        out,
        format,
    )
}
