//! `hbg` command-line tool: validate, compile, simulate and plot hybrid bond
//! graph models, and run the three-tank benchmark.

pub mod csvio;
pub mod plot;

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hbg_core::bench::{build_three_tank, oracle_simulate, scenario_checks, BenchError, Check, TankParams};
use hbg_core::ibd::{compile_with_cap, emit_graph_dot, DEFAULT_MODE_CAP};
use hbg_core::{
    check_all_modes, emit_dot, parse_model, serialize_model, simulate, BondGraph, IntegratorKind, SimConfig,
};

pub use csvio::{read_csv, write_csv, CsvOptions};
pub use plot::plot_svg;

#[derive(Parser, Debug)]
#[command(name = "hbg", version, about = "Hybrid bond graph modeling and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model and report diagnostics.
    Validate { model: PathBuf },
    /// Compile a model to a block diagram.
    Compile(CompileArgs),
    /// Simulate a model and write the trace as CSV.
    Sim(SimArgs),
    /// Run a built-in benchmark and check it against expected values.
    Bench {
        #[arg(value_enum)]
        benchmark: Benchmark,
    },
    /// Plot columns of a trace CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct CompileArgs {
    model: PathBuf,
    /// Output format for the block diagram.
    #[arg(long, value_enum)]
    emit: Option<Emit>,
    /// File for the emitted diagram; standard output if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write the bond graph with causal strokes as DOT to this file.
    #[arg(long)]
    emit_graph: Option<PathBuf>,
    /// Report causality in every mode.
    #[arg(long)]
    check_modes: bool,
    /// Largest number of modes to enumerate.
    #[arg(long, default_value_t = DEFAULT_MODE_CAP)]
    mode_cap: u64,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SimArgs {
    model: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    #[arg(long, value_enum, default_value_t = Integrator::Rk4)]
    integrator: Integrator,
    /// Comma-separated probe labels; all probes if omitted.
    #[arg(long, value_delimiter = ',')]
    probe: Option<Vec<String>>,
    /// Add the mode bit string as a column.
    #[arg(long)]
    mode: bool,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    /// Comma-separated initial state, one value per storage element.
    #[arg(long, value_delimiter = ',')]
    init: Option<Vec<f64>>,
    /// Write the mode-change log as CSV to this file.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    csv: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Comma-separated column names; all columns if omitted.
    #[arg(long)]
    series: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Emit {
    Dot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Integrator {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Benchmark {
    ThreeTank,
}

/// Failure of one command, with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    /// Bad flags or arguments: exit 2.
    Usage(String),
    /// Model or runtime error: exit 1.
    Runtime(String),
}

type Outcome = Result<(), Failure>;

fn runtime(cmd: &str, input: impl Display, e: impl Display) -> Failure {
    Failure::Runtime(format!("hbg {cmd}: {input}: {e}"))
}

fn usage(cmd: &str, input: impl Display, e: impl Display) -> Failure {
    Failure::Usage(format!("hbg {cmd}: {input}: {e}"))
}

/// Runs the tool with `args` (program name first) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] writing to the given streams.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "hbg: usage error: {text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Validate { model } => validate(&model, out, err),
        Command::Compile(a) => compile_cmd(&a, out, err),
        Command::Sim(a) => sim(&a, out),
        Command::Bench { benchmark } => bench(benchmark, out),
        Command::Plot(a) => plot(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "{m}");
            1
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "{m}");
            2
        }
    }
}

fn read_model(cmd: &str, path: &Path, err: &mut dyn Write) -> Result<BondGraph, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| runtime(cmd, path.display(), e))?;
    parse_model(&text).map_err(|errors| {
        for e in &errors {
            let _ = writeln!(
                err,
                "{}:{}:{}: {:?}: {}",
                path.display(),
                e.span.line,
                e.span.column,
                e.kind,
                e.message
            );
        }
        runtime(
            cmd,
            path.display(),
            format!("{} error{}", errors.len(), if errors.len() == 1 { "" } else { "s" }),
        )
    })
}

fn write_file(cmd: &str, path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| runtime(cmd, path.display(), e))
}

fn validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let g = read_model("validate", path, err)?;
    let _ = writeln!(
        out,
        "{}: ok ({} elements, {} junctions ({} switched), {} bonds)",
        path.display(),
        g.elements.len(),
        g.junctions.len(),
        g.switched_junctions().len(),
        g.bonds.len()
    );
    Ok(())
}

fn compile_cmd(a: &CompileArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    const CMD: &str = "compile";
    let g = read_model(CMD, &a.model, err)?;
    if a.check_modes {
        let report = check_all_modes(&g, a.mode_cap).map_err(|e| runtime(CMD, a.model.display(), e))?;
        let _ = writeln!(out, "{report}");
    }
    let d = compile_with_cap(&g, a.mode_cap).map_err(|e| runtime(CMD, a.model.display(), e))?;
    if let Some(path) = &a.emit_graph {
        write_file(CMD, path, &emit_graph_dot(&g, Some(&d.causality)))?;
    }
    match (a.emit, &a.out) {
        (Some(Emit::Dot), Some(path)) => write_file(CMD, path, &emit_dot(&d))?,
        (Some(Emit::Dot), None) => {
            let _ = write!(out, "{}", emit_dot(&d));
        }
        (None, _) => {
            let _ = writeln!(
                out,
                "{}: {} blocks ({} integrators, {} switches), {} wires",
                a.model.display(),
                d.blocks.len(),
                d.count("Integrator"),
                d.count("Switch"),
                d.wires().len()
            );
        }
    }
    Ok(())
}

fn sim(a: &SimArgs, out: &mut dyn Write) -> Outcome {
    const CMD: &str = "sim";
    if !(a.dt > 0.0 && a.dt.is_finite()) {
        return Err(usage(CMD, "--dt", format!("must be positive, got {}", a.dt)));
    }
    if !(a.t_end >= 0.0 && a.t_end.is_finite()) {
        return Err(usage(CMD, "--t-end", format!("must be non-negative, got {}", a.t_end)));
    }
    if a.record_every == 0 {
        return Err(usage(CMD, "--record-every", "must be at least 1"));
    }
    let g = read_model(CMD, &a.model, out)?;
    let d = compile_with_cap(&g, DEFAULT_MODE_CAP).map_err(|e| runtime(CMD, a.model.display(), e))?;
    if let Some(labels) = &a.probe {
        if let Some(bad) = labels.iter().find(|l| !d.probe_labels().contains(l)) {
            return Err(usage(CMD, "--probe", format!("model has no probe `{bad}`")));
        }
    }
    if let Some(x) = &a.init {
        if x.len() != d.states.len() {
            return Err(usage(
                CMD,
                "--init",
                format!(
                    "expected {} values ({}), got {}",
                    d.states.len(),
                    d.state_names().join(", "),
                    x.len()
                ),
            ));
        }
    }
    let cfg = SimConfig {
        dt: a.dt,
        t_end: a.t_end,
        integrator: match a.integrator {
            Integrator::Euler => IntegratorKind::Euler,
            Integrator::Rk4 => IntegratorKind::Rk4,
        },
        initial_state: a.init.clone(),
        record_every: a.record_every,
    };
    let trace = simulate(&d, &cfg).map_err(|e| runtime(CMD, a.model.display(), e))?;
    let opts = CsvOptions {
        probes: a.probe.clone(),
        mode: a.mode,
    };
    write_csv(&trace, &a.out, &opts).map_err(|e| runtime(CMD, a.out.display(), e))?;
    if let Some(path) = &a.events {
        let mut text = String::from("t,junction,transition\n");
        for e in &trace.events {
            text.push_str(&format!("{:?},{},{}\n", e.time, e.junction, e.transition));
        }
        write_file(CMD, path, &text)?;
    }
    let _ = writeln!(
        out,
        "{}: {} rows, {} mode changes -> {}",
        a.model.display(),
        trace.len(),
        trace.events.len(),
        a.out.display()
    );
    Ok(())
}

fn bench(which: Benchmark, out: &mut dyn Write) -> Outcome {
    const CMD: &str = "bench";
    let Benchmark::ThreeTank = which;
    let p = TankParams::default();
    let fail = |e: &dyn Display| runtime(CMD, "three-tank", e);
    // the model goes through its text form, as a user model would
    let g = parse_model(&serialize_model(&build_three_tank(&p))).map_err(|e| fail(&format!("{e:?}")))?;
    let d = compile_with_cap(&g, DEFAULT_MODE_CAP).map_err(|e| fail(&e))?;
    let mut checks = scenario_checks(&p, |cfg| simulate(&d, cfg).map_err(BenchError::from)).map_err(|e| fail(&e))?;

    let cfg = SimConfig::default();
    let hbg = simulate(&d, &cfg).map_err(|e| fail(&e))?;
    let (oracle, _) = oracle_simulate(&p, &cfg).map_err(|e| fail(&e))?;
    let gap = hbg
        .probes
        .iter()
        .flatten()
        .zip(oracle.probes.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let modes = check_all_modes(&g, DEFAULT_MODE_CAP).map_err(|e| fail(&e))?;

    for c in &checks {
        let _ = writeln!(out, "{c}");
    }
    let oracle_ok = gap < 1e-9;
    let _ = writeln!(
        out,
        "oracle max|dh|={gap:.1e} (expected <1e-9) {}",
        if oracle_ok { "PASS" } else { "FAIL" }
    );
    let modes_ok = modes.mode_invariant_integral && modes.orientation_invariant;
    let _ = writeln!(
        out,
        "modes={} integral causality in all (expected yes) {}",
        modes.outcomes.len(),
        if modes_ok { "PASS" } else { "FAIL" }
    );
    checks.retain(|c: &Check| !c.passed());
    if checks.is_empty() && oracle_ok && modes_ok {
        Ok(())
    } else {
        Err(fail(&"one or more checks failed"))
    }
}

fn plot(a: &PlotArgs) -> Outcome {
    const CMD: &str = "plot";
    let series: Option<Vec<String>> = match &a.series {
        None => None,
        Some(s) => {
            let names: Vec<String> = s.split(',').map(|n| n.trim().to_string()).collect();
            if names.iter().any(|n| n.is_empty()) {
                return Err(usage(CMD, "--series", format!("empty series name in `{s}`")));
            }
            Some(names)
        }
    };
    let table = read_csv(&a.csv).map_err(|e| runtime(CMD, a.csv.display(), e))?;
    let svg = plot_svg(&table, series.as_deref()).map_err(|e| match e {
        plot::PlotError::UnknownSeries(_) | plot::PlotError::NoSeries => usage(CMD, "--series", e),
        _ => runtime(CMD, a.csv.display(), e),
    })?;
    write_file(CMD, &a.out, &svg)
}
