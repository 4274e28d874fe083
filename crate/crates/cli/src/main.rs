//! `mwsim` — run one scenario, a full sweep, or condense a sweep CSV into a
//! plot-ready table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;

use mwsim_core::experiment::{
    self, csv_row, emit_plotdata, parse_scenario, parse_sweep, PlotMetric, CSV_HEADER,
};
use mwsim_core::mobility::MobilityModel;
use mwsim_core::sim::TraceOptions;

/// Discrete-event simulator for clustering-based routing protocols in mobile
/// wireless sensor networks.
///
/// Without `--sweep`, runs a single scenario and prints (or writes) its
/// configuration echo plus one CSV row. With `--sweep`, runs the protocol ×
/// mobility × speed × seed cross product and emits run rows plus per-cell
/// aggregate rows. `--plotdata` post-processes an existing sweep CSV instead
/// of simulating.
#[derive(Parser, Debug)]
#[command(name = "mwsim", version, about)]
struct Args {
    /// Scenario or sweep configuration file (line-oriented `key = value`,
    /// `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Protocol: MAR, GRC, GRC-R, DECA, DEMC, DEMC-R.
    #[arg(long)]
    protocol: Option<String>,

    /// Mobility model: rwp, mass, linear.
    #[arg(long)]
    mobility: Option<String>,

    /// Node speed in m/s.
    #[arg(long)]
    speed: Option<f64>,

    /// Number of sensor nodes.
    #[arg(long)]
    nodes: Option<u32>,

    /// Master random seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Simulated duration in seconds.
    #[arg(long)]
    duration: Option<f64>,

    /// Output file (CSV for runs/sweeps, TSV for --plotdata); stdout if
    /// omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run the full sweep instead of a single scenario.
    #[arg(long)]
    sweep: bool,

    /// Worker threads for sweep execution. Output is byte-identical for any
    /// value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Dump the event trace to events.tsv (single-run mode).
    #[arg(long)]
    trace_events: bool,

    /// Dump sampled node positions to mobility.tsv (single-run mode).
    #[arg(long)]
    trace_mobility: bool,

    /// Dump per-round cluster snapshots to clusters.tsv (single-run mode).
    #[arg(long)]
    clusters: bool,

    /// Build a plot table from an existing sweep CSV: `loss:<model>` or
    /// `pdr:<model>` with model one of rwp, mass, linear.
    #[arg(long, value_name = "METRIC:MODEL")]
    plotdata: Option<String>,

    /// Input sweep CSV for --plotdata.
    #[arg(long, value_name = "CSV")]
    from: Option<PathBuf>,
}

fn overrides(args: &Args) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(v) = &args.protocol {
        out.push(("protocol".into(), v.clone()));
    }
    if let Some(v) = &args.mobility {
        out.push(("mobility".into(), v.clone()));
    }
    if let Some(v) = args.speed {
        out.push(("speed".into(), v.to_string()));
    }
    if let Some(v) = args.nodes {
        out.push(("nodes".into(), v.to_string()));
    }
    if let Some(v) = args.seed {
        out.push(("seed".into(), v.to_string()));
    }
    if let Some(v) = args.duration {
        out.push(("duration".into(), v.to_string()));
    }
    out
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn write_trace(path: &Path, lines: &[String]) -> Result<()> {
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let args = Args::parse();

    let config_text = match &args.config {
        Some(path) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => String::new(),
    };

    if let Some(figure) = &args.plotdata {
        let Some((metric, model)) = figure.split_once(':') else {
            bail!("--plotdata expects METRIC:MODEL, e.g. loss:rwp");
        };
        let metric = PlotMetric::parse(metric)
            .with_context(|| format!("unknown plot metric `{metric}` (loss or pdr)"))?;
        let model = MobilityModel::parse(model)
            .with_context(|| format!("unknown mobility model `{model}`"))?;
        let from = args
            .from
            .as_ref()
            .context("--plotdata requires --from <sweep.csv>")?;
        let csv =
            fs::read_to_string(from).with_context(|| format!("reading {}", from.display()))?;
        let table = emit_plotdata(&csv, metric, model)?;
        return emit(&args.out, &table);
    }

    if args.sweep {
        let spec = parse_sweep(&config_text, &overrides(&args))?;
        let csv = experiment::run_sweep(&spec, args.jobs.max(1))?;
        return emit(&args.out, &csv);
    }

    let cfg = parse_scenario(&config_text, &overrides(&args))?;
    let opts = TraceOptions {
        events: args.trace_events,
        mobility: args.trace_mobility,
        clusters: args.clusters,
    };
    let result = experiment::run_one_traced(&cfg, opts)?;

    if args.trace_events {
        write_trace(Path::new("events.tsv"), &result.output.trace.events)?;
    }
    if args.trace_mobility {
        write_trace(Path::new("mobility.tsv"), &result.output.trace.mobility)?;
    }
    if args.clusters {
        write_trace(Path::new("clusters.tsv"), &result.output.trace.clusters)?;
    }

    let mut text = String::new();
    for line in result.echo.lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(CSV_HEADER);
    text.push('\n');
    text.push_str(&csv_row(&cfg, &result.output.metrics));
    text.push('\n');
    emit(&args.out, &text)
}
