use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use linksat::bifurcation::bifurcation_branches;
use linksat::estimator::{classify, write_regime_csv};
use linksat::harness::{self, Receiver};
use linksat::sim::ServiceModel;
use linksat::{fit, sweep, FitOptions, SimConfig, SizeConvention, SweepSeries};

#[derive(Debug, Parser)]
#[command(name = "linksat", version, about = "Single-link throughput saturation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a payload sweep and write the sweep CSV.
    Simulate(SimulateArgs),
    /// Fit T_max, p_c and λ_c to a sweep CSV.
    Analyze(AnalyzeArgs),
    /// Write the transcritical branch table.
    Bifurcate(BifurcateArgs),
    /// Send one paced UDP probe stream.
    Send(SendArgs),
    /// Receive probe streams and report one CSV row per stream.
    Recv(RecvArgs),
    /// Send a paced UDP stream for each payload in a range.
    Sweep(SweepArgs),
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} must be positive"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} must be non-negative"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ServiceArg {
    Overlap,
    Serial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConventionArg {
    Frame,
    Payload,
}

impl From<ConventionArg> for SizeConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Frame => SizeConvention::Frame,
            ConventionArg::Payload => SizeConvention::Payload,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Link bandwidth, bits/s.
    #[arg(long, default_value = "100e6", value_parser = positive)]
    bandwidth: f64,
    /// Per-packet NIC processing time, seconds.
    #[arg(long, default_value = "40e-6", value_parser = positive)]
    tau: f64,
    /// Offered goodput, bits/s.
    #[arg(long, default_value = "100e6", value_parser = positive)]
    rate: f64,
    /// Simulated seconds per payload.
    #[arg(long, default_value = "10", value_parser = positive)]
    time: f64,
    #[arg(long, default_value_t = 25)]
    from: u32,
    #[arg(long, default_value_t = 1450)]
    to: u32,
    #[arg(long, default_value_t = 25)]
    step: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// NIC buffer, packets.
    #[arg(long, default_value_t = 128)]
    buffer: usize,
    /// Multiplicative jitter on processing time, in [0, 0.1].
    #[arg(long, default_value = "0", value_parser = non_negative)]
    noise: f64,
    #[arg(long, value_enum, default_value = "overlap")]
    service_model: ServiceArg,
    /// Processing-rate gain for the smallest frames (0 disables).
    #[arg(long, default_value = "0", value_parser = non_negative)]
    small_packet_speedup: f64,
    /// Output path; `-` for standard output.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Sweep CSV to fit.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "frame")]
    size_convention: ConventionArg,
    /// Fit JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Regime/deficit CSV path [default: next to --out, `.regimes.csv`].
    #[arg(long)]
    regimes: Option<PathBuf>,
    /// Loss fraction above which samples do not set the plateau level.
    #[arg(long, default_value = "0.05", value_parser = non_negative)]
    max_plateau_loss: f64,
}

#[derive(Debug, Args)]
struct BifurcateArgs {
    #[arg(long, default_value = "100e6", value_parser = positive)]
    bandwidth: f64,
    /// Critical packet size, bytes.
    #[arg(long = "p-c", default_value = "500", value_parser = positive)]
    p_c: f64,
    #[arg(long, default_value = "71", value_parser = positive)]
    from: f64,
    #[arg(long, default_value = "1496", value_parser = positive)]
    to: f64,
    #[arg(long, default_value = "25", value_parser = positive)]
    step: f64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SendArgs {
    #[arg(long)]
    dest: SocketAddr,
    #[arg(long)]
    payload: u32,
    /// Target goodput, bits/s.
    #[arg(long, value_parser = positive)]
    rate: f64,
    /// Seconds to send.
    #[arg(long, value_parser = positive)]
    time: f64,
}

#[derive(Debug, Args)]
struct RecvArgs {
    #[arg(long)]
    listen: SocketAddr,
    /// Seconds to listen.
    #[arg(long, value_parser = positive)]
    time: f64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Receiver address (not needed with --loopback).
    #[arg(long, required_unless_present = "loopback")]
    dest: Option<SocketAddr>,
    #[arg(long, default_value_t = 25)]
    from: u32,
    #[arg(long, default_value_t = 1450)]
    to: u32,
    #[arg(long, default_value_t = 25)]
    step: u32,
    #[arg(long, default_value = "100e6", value_parser = positive)]
    rate: f64,
    #[arg(long, default_value = "10", value_parser = positive)]
    time_per_step: f64,
    /// Quiet time between steps, milliseconds.
    #[arg(long, default_value_t = 250)]
    gap_ms: u64,
    /// Run a receiver on 127.0.0.1 in this process and report its view.
    #[arg(long)]
    loopback: bool,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Bifurcate(a) => bifurcate(a),
        Command::Send(a) => send(a),
        Command::Recv(a) => recv(a),
        Command::Sweep(a) => measure_sweep(a),
    }
}

fn with_output(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if path.as_os_str() == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        body(&mut lock)?;
        lock.flush()?;
        return Ok(());
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_series(path: &Path, series: &SweepSeries) -> Result<()> {
    with_output(path, |w| Ok(series.write_csv(w)?))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let base = SimConfig {
        bandwidth: a.bandwidth,
        per_packet_service: a.tau,
        payload: a.from,
        offered_goodput: a.rate,
        duration: a.time,
        buffer_capacity: a.buffer,
        noise_amplitude: a.noise,
        seed: a.seed,
        service_model: match a.service_model {
            ServiceArg::Overlap => ServiceModel::Overlap,
            ServiceArg::Serial => ServiceModel::Serial,
        },
        small_packet_speedup: a.small_packet_speedup,
    };
    base.validate()?;
    let series = sweep(&base, a.from, a.to, a.step)?;
    write_series(&a.out, &series)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let series = SweepSeries::read_csv(BufReader::new(file))
        .with_context(|| format!("reading {}", a.input.display()))?;
    let options = FitOptions {
        size_convention: a.size_convention.into(),
        max_plateau_loss: Some(a.max_plateau_loss),
    };
    let result = fit(&series, options)?;
    let rows = classify(&series, &result)?;

    with_output(&a.out, |w| {
        writeln!(w, "{}", result.to_json_string()?)?;
        Ok(())
    })?;
    let regimes = a.regimes.unwrap_or_else(|| a.out.with_extension("regimes.csv"));
    with_output(&regimes, |w| Ok(write_regime_csv(&rows, w)?))?;

    println!(
        "t_max={} bps p_c={} bytes ({}) lambda_c={} pps breakpoint_index={}",
        result.t_max_hat,
        result.p_c_hat,
        result.size_convention.as_str(),
        result.lambda_c_hat,
        result.breakpoint_index
    );
    if let Some(d) = result.intercept_diagnostic {
        eprintln!(
            "saturated segment with free intercept: intercept={} bps slope={} bps/byte",
            d.intercept_bps, d.slope_bps_per_byte
        );
    }
    Ok(())
}

fn bifurcate(a: BifurcateArgs) -> Result<()> {
    if a.from > a.to {
        return Err(linksat::Error::InvalidParameter {
            name: "from",
            reason: "must not exceed --to".into(),
        }
        .into());
    }
    let count = ((a.to - a.from) / a.step + 1e-9).floor() as usize + 1;
    let sizes: Vec<f64> = (0..count).map(|i| a.from + i as f64 * a.step).collect();
    let rows = bifurcation_branches(a.bandwidth, a.p_c, &sizes)?;
    with_output(&a.out, |w| {
        writeln!(w, "packet_bytes,x_stable_bps,x_unstable_bps,r_bps")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.packet_size,
                r.stable_deficit(),
                r.unstable_deficit(),
                r.r
            )?;
        }
        Ok(())
    })
}

fn send(a: SendArgs) -> Result<()> {
    let report = harness::send_stream(a.dest, a.payload, a.rate, Duration::from_secs_f64(a.time))?;
    if report.unreachable {
        eprintln!("warning: {} reported unreachable during the stream", a.dest);
    }
    let series: SweepSeries = std::iter::once(report.to_sample()).collect();
    write_series(Path::new("-"), &series)
}

fn recv(a: RecvArgs) -> Result<()> {
    let listen = Duration::from_secs_f64(a.time);
    let receiver = Receiver::bind(a.listen)?;
    eprintln!(
        "listening on {} for {}s (Ethernet flow control state is not verified)",
        receiver.local_addr()?,
        a.time
    );
    let reports = receiver.run_for(listen)?;
    if reports.is_empty() {
        eprintln!("empty stream: no probe datagrams received");
    }
    write_series(&a.out, &harness::reports_to_series(&reports))
}

fn measure_sweep(a: SweepArgs) -> Result<()> {
    let payloads: Vec<u32> = linksat::sim::sweep_payloads(a.from, a.to, a.step)?;
    let per_step = Duration::from_secs_f64(a.time_per_step);
    let gap = Duration::from_millis(a.gap_ms);

    let (steps, series) = if a.loopback {
        let run = harness::loopback_sweep(([127, 0, 0, 1], 0).into(), &payloads, a.rate, per_step, gap)?;
        let series = harness::reports_to_series(&run.reports);
        (run.steps, series)
    } else {
        let dest = a.dest.expect("clap enforces --dest without --loopback");
        let steps = harness::run_sweep(dest, &payloads, a.rate, per_step, gap);
        let series = harness::sender_series(&steps);
        (steps, series)
    };
    for step in &steps {
        if let Err(e) = &step.outcome {
            eprintln!("payload {}: {e}", step.payload);
        }
    }
    write_series(&a.out, &series)
}
